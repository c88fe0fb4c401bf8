//! Dual updates: inner MM for the A/D criteria and a projected-gradient solve
//! on the trace-one PSD set for the E criterion.

use crate::error::{invalid, Result};
use crate::fim::Criterion;
use crate::linalg::{norm, reconstruct, sym_evd, Matrix, SymMatrix};

use super::scalar::{scalar_cubic_root, scalar_quadratic_root};
use super::surrogate::{dual_objective, trace_product, DualState, Penalty, PrimalSurrogate, NORM_FLOOR};

/// Stopping rule of a dual solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerOptions {
    /// Relative Frobenius change of `Phi` (A/D), or relative duality-gap
    /// target (E).
    pub tol: f64,
    pub max_iter: usize,
}

/// Result of a dual solve.
#[derive(Clone, Debug)]
pub struct DualOutcome {
    pub state: DualState,
    pub iterations: usize,
    /// Number of `||Phi~_k a_i||` weights floored at `NORM_FLOOR`.
    pub floor_hits: usize,
    pub converged: bool,
    /// Dual objective at the start and after every iteration.
    pub objective: Vec<f64>,
}

fn penalty_for(c: Criterion) -> Penalty {
    match c {
        Criterion::A => Penalty::TraceSqrt,
        Criterion::D => Penalty::LogDet,
        Criterion::E => Penalty::None,
    }
}

/// Minimizes `2 sum_i ||Phi~ a_i|| - Tr[M Phi] - penalty(Phi)` over PSD
/// `Phi` by majorization-minimization, starting from the positive-definite
/// `phi_init`.
///
/// Each step majorizes the norms by quadratics tangent at `Phi_k`, shifts the
/// quadratic form by its largest eigenvalue and linearizes the concave part,
/// which leaves a problem `Tr[Phi C] + lambda Tr[Phi^2] - penalty(Phi)` solved
/// in the eigenbasis of `C`.
pub fn dual_update_ad(
    s: &PrimalSurrogate,
    criterion: Criterion,
    phi_init: &SymMatrix,
    opts: &InnerOptions,
) -> Result<DualOutcome> {
    if criterion == Criterion::E {
        return Err(invalid("the E criterion uses dual_update_e"));
    }
    let n = s.dimension();
    if phi_init.dim() != n {
        return Err(invalid(format!(
            "initial dual matrix is {0}x{0}, expected {n}x{n}",
            phi_init.dim()
        )));
    }
    let penalty = penalty_for(criterion);
    let k = s.num_blocks();
    let m = s.num_sensors();
    let a: Vec<Vec<f64>> = (0..m).map(|i| s.a(i)).collect();

    let mut phi = phi_init.clone();
    let mut objective = vec![dual_objective(s, &phi, penalty)?];
    let mut floor_hits = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let tilde = DualState::new(phi.clone(), s).phi_tilde().clone();

        let dim = k * n;
        let mut big_a = Matrix::zeros(dim, dim);
        for ai in &a {
            let mut w = norm(&tilde.mul_vec(ai));
            if w < NORM_FLOOR {
                w = NORM_FLOOR;
                floor_hits += 1;
            }
            for p in 0..dim {
                for q in 0..dim {
                    big_a[(p, q)] += ai[p] * ai[q] / w;
                }
            }
        }
        let big_a = big_a.symmetric_part();
        let lambda1 = sym_evd(&big_a)?.max();
        let mut shifted = big_a.into_matrix();
        for p in 0..dim {
            shifted[(p, p)] -= lambda1;
        }
        let b = &tilde * &shifted;

        let mut c = Matrix::zeros(n, n);
        for (blk, &rot) in s.rotated().iter().enumerate() {
            let bb = b.block(0, blk * n, n, n);
            let sym = &bb + &bb.transpose();
            let term = if rot { rotate_t_congruent(&sym) } else { sym };
            c = &c + &term;
        }
        let c = (&c - s.fim().as_matrix()).symmetric_part();
        let lambda = k as f64 * lambda1;

        let evd = sym_evd(&c)?;
        let x: Vec<f64> = evd
            .values
            .iter()
            .map(|&e| match criterion {
                Criterion::A => scalar_cubic_root(e, lambda).powi(2),
                _ => scalar_quadratic_root(e, lambda),
            })
            .collect();
        let next = reconstruct(&evd.vectors, &x);

        let change = (next.as_matrix() - phi.as_matrix()).frobenius_norm() / phi.frobenius_norm();
        phi = next;
        objective.push(dual_objective(s, &phi, penalty)?);
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    Ok(DualOutcome {
        state: DualState::new(phi, s),
        iterations,
        floor_hits,
        converged,
        objective,
    })
}

// U^T M U for a 2x2 M.
fn rotate_t_congruent(m: &Matrix) -> Matrix {
    Matrix::from_row_major(2, 2, vec![m[(1, 1)], -m[(1, 0)], -m[(0, 1)], m[(0, 0)]])
}

/// Euclidean projection of a symmetric matrix onto `{Phi >= 0, Tr Phi = 1}`.
pub fn project_spectraplex(m: &SymMatrix) -> Result<SymMatrix> {
    let evd = sym_evd(m)?;
    Ok(reconstruct(&evd.vectors, &project_simplex(&evd.values)))
}

// Projection onto the probability simplex; `v` sorted descending.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (j, &u) in v.iter().enumerate() {
        acc += u;
        let t = (acc - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&u| (u - theta).max(0.0)).collect()
}

// Relative gap accepted when no step decreases the objective in floating
// point. Near a smooth optimum f - f* is of order gap^2 / curvature, so a gap
// of this size already pins the objective to roundoff.
const STALL_GAP: f64 = 1e-6;

/// Minimizes `2 sum_i ||Phi~ a_i|| - Tr[M Phi]` over `{Phi >= 0, Tr Phi = 1}`.
///
/// Projected gradient with backtracking; the Frank-Wolfe gap
/// `<G, Phi> - lambda_min(G)` bounds the suboptimality and serves as the
/// stopping rule (`gap <= tol * (1 + |objective|)`). A solve that stalls at
/// roundoff also counts as converged once the relative gap is below `1e-6`.
pub fn dual_update_e(s: &PrimalSurrogate, phi_init: &SymMatrix, opts: &InnerOptions) -> Result<DualOutcome> {
    let n = s.dimension();
    if phi_init.dim() != n {
        return Err(invalid(format!(
            "initial dual matrix is {0}x{0}, expected {n}x{n}",
            phi_init.dim()
        )));
    }
    let f = |phi: &SymMatrix| 2.0 * s.norm_sum(phi) - trace_product(s.fim(), phi);
    let grad = |phi: &SymMatrix| {
        let g = s.norm_sum_gradient(phi).scale(2.0);
        (&g - s.fim().as_matrix()).symmetric_part()
    };

    let mut phi = project_spectraplex(phi_init)?;
    let mut fx = f(&phi);
    let mut objective = vec![fx];
    let mut g = grad(&phi);
    let mut step = 1.0 / g.frobenius_norm().max(1e-300);
    let mut converged = false;
    let mut iterations = 0;
    let mut floor_hits = 0;

    loop {
        let gap = trace_product(&g, &phi) - sym_evd(&g)?.min();
        if gap <= opts.tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let mut accepted = None;
        for _ in 0..60 {
            let trial = project_spectraplex(&phi.sub(&g.scale(step)))?;
            let d = trial.as_matrix() - phi.as_matrix();
            let ft = f(&trial);
            let model = fx + trace_product(&g, &d) + d.frobenius_norm().powi(2) / (2.0 * step);
            if ft <= model + 1e-15 * fx.abs() {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let stalled = |gap: f64| gap <= STALL_GAP * (1.0 + fx.abs());
        let Some((next, fnext)) = accepted else {
            converged = stalled(gap);
            break;
        };
        if fnext > fx {
            converged = stalled(gap);
            break;
        }
        phi = next;
        fx = fnext;
        objective.push(fx);
        g = grad(&phi);
        step *= 2.0;
    }

    let z = s.z(&phi);
    floor_hits += (0..z.ncols()).filter(|&i| norm(&z.col(i)) < NORM_FLOOR).count();
    Ok(DualOutcome {
        state: DualState::new(phi, s),
        iterations,
        floor_hits,
        converged,
        objective,
    })
}
