//! Outer primal-dual loop.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{invalid, Error, Result};
use crate::fim::{criterion_of_fim, Criterion, HybridForm};
use crate::geometry::Orientation;
use crate::linalg::{inverse, norm, sym_evd, Matrix, SymMatrix};
use crate::problem::DesignProblem;

use super::dual::{dual_update_ad, dual_update_e, DualOutcome, InnerOptions};
use super::surrogate::{primal_update, PrimalSurrogate, NORM_FLOOR};

/// Tuning of [`solve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Stop when `||J_{t+1} - J_t||_F / ||J_t||_F` falls below this.
    pub outer_tol: f64,
    /// Inner stopping tolerance handed to the dual update.
    pub inner_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Norm below which surrogate columns count as zero.
    pub norm_floor: f64,
    /// Draw the initial dual matrix at random instead of from the initial
    /// design; also seeds the perturbation of degenerate initial designs.
    pub seed: Option<u64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            outer_tol: 1e-3,
            inner_tol: 1e-3,
            max_outer: 500,
            max_inner: 200,
            norm_floor: NORM_FLOOR,
            seed: None,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0 && self.inner_tol > 0.0 && self.norm_floor > 0.0) {
            return Err(invalid("solver tolerances must be positive"));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(invalid("iteration caps must be positive"));
        }
        Ok(())
    }
}

/// Why the outer loop stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
}

/// One outer iteration; iteration 0 describes the initial design.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub criterion: f64,
    pub inner_iters: usize,
    /// `||J_t - J_{t-1}||_F / ||J_{t-1}||_F`.
    pub step_norm: f64,
    /// Floored weights in the dual update plus rows kept by the primal update.
    pub floor_hits: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct DesignResult {
    pub orientation: Orientation,
    pub status: Status,
    pub trace: Vec<IterationRecord>,
    /// The initial design was stationary and had to be perturbed.
    pub perturbed: bool,
    /// Primal steps discarded because they would have increased the
    /// criterion even after tightening the dual solve.
    pub rejected_steps: usize,
    /// Final dual matrix.
    pub phi: SymMatrix,
}

impl DesignResult {
    pub fn criterion(&self) -> f64 {
        self.trace.last().expect("trace holds the initial record").criterion
    }

    pub fn criterion_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.criterion).collect()
    }

    pub fn outer_iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Tightest inner tolerance used when a primal step fails to descend.
const MIN_INNER_TOL: f64 = 1e-14;

/// Alternates the criterion-specific dual update with the closed-form primal
/// update until the relative change of `J` drops below `outer_tol`.
///
/// The criterion is evaluated after every primal step. A step that would
/// increase it triggers re-solving the dual with a tighter tolerance; if that
/// still does not help the step is discarded and the loop ends.
pub fn solve(problem: &DesignProblem, init: &Orientation, opts: &SolverOptions) -> Result<DesignResult> {
    opts.validate()?;
    problem.check_orientation(init)?;
    let start = Instant::now();
    let form = problem.form();
    let crit = problem.criterion();
    let n = problem.dimension();

    let mut j = init.clone();
    let mut value = criterion_of_fim(&form.fim(j.matrix()), crit)?;
    let mut trace = vec![IterationRecord {
        iter: 0,
        criterion: value,
        inner_iters: 0,
        step_norm: 0.0,
        floor_hits: 0,
        elapsed: start.elapsed(),
    }];

    let mut phi = initial_phi(crit, &form.fim(j.matrix()), n, opts.seed)?;
    let mut perturbed = false;
    {
        let s = PrimalSurrogate::new(form, j.matrix());
        let z = s.z(&phi);
        if (0..z.ncols()).all(|i| norm(&z.col(i)) < opts.norm_floor) {
            j = perturb(&j, opts.seed.unwrap_or(0))?;
            value = criterion_of_fim(&form.fim(j.matrix()), crit)?;
            trace[0].criterion = value;
            perturbed = true;
        }
    }

    let mut status = Status::MaxIterations;
    let mut rejected_steps = 0;
    for t in 1..=opts.max_outer {
        let s = PrimalSurrogate::new(form, j.matrix());
        let mut inner = InnerOptions {
            tol: opts.inner_tol,
            max_iter: opts.max_inner,
        };
        let mut outcome = dual_solve(&s, crit, &phi, &inner)?;
        let mut inner_iters = outcome.iterations;
        let mut floor_hits = outcome.floor_hits;

        let mut candidate = step(form, &s, &outcome, &j, crit, opts.norm_floor)?;
        while candidate.as_ref().is_none_or(|c| c.value > value) && inner.tol > MIN_INNER_TOL {
            inner.tol = (inner.tol * 1e-3).max(MIN_INNER_TOL);
            inner.max_iter = inner.max_iter.saturating_mul(10);
            let start_phi = outcome.state.phi().clone();
            outcome = dual_solve(&s, crit, &start_phi, &inner)?;
            inner_iters += outcome.iterations;
            floor_hits += outcome.floor_hits;
            candidate = step(form, &s, &outcome, &j, crit, opts.norm_floor)?;
        }
        let next = match candidate {
            Some(c) if c.value <= value => c,
            _ => {
                rejected_steps += 1;
                status = Status::Converged;
                break;
            }
        };

        let step_norm = (next.j.matrix() - j.matrix()).frobenius_norm() / j.matrix().frobenius_norm();
        trace.push(IterationRecord {
            iter: t,
            criterion: next.value,
            inner_iters,
            step_norm,
            floor_hits: floor_hits + next.kept,
            elapsed: start.elapsed(),
        });
        j = next.j;
        value = next.value;
        phi = outcome.state.into_phi();
        if step_norm < opts.outer_tol {
            status = Status::Converged;
            break;
        }
    }

    Ok(DesignResult {
        orientation: j,
        status,
        trace,
        perturbed,
        rejected_steps,
        phi,
    })
}

/// [`solve`] restricted to 3D TOA-RSS problems.
pub fn solve_3d_toa_rss(problem: &DesignProblem, init: &Orientation, opts: &SolverOptions) -> Result<DesignResult> {
    if problem.dimension() != 3 {
        return Err(invalid(format!(
            "expected a 3D problem, got n = {}",
            problem.dimension()
        )));
    }
    if problem.noise().aoa().is_some() {
        return Err(Error::Unsupported("3D designs cannot use AOA measurements".into()));
    }
    solve(problem, init, opts)
}

struct Candidate {
    j: Orientation,
    value: f64,
    kept: usize,
}

fn dual_solve(s: &PrimalSurrogate, crit: Criterion, phi: &SymMatrix, inner: &InnerOptions) -> Result<DualOutcome> {
    match crit {
        Criterion::E => dual_update_e(s, phi, inner),
        _ => dual_update_ad(s, crit, phi, inner),
    }
}

// Primal step from a dual solution; `None` when the new design has a
// singular FIM.
fn step(
    form: &HybridForm,
    s: &PrimalSurrogate,
    outcome: &DualOutcome,
    j: &Orientation,
    crit: Criterion,
    floor: f64,
) -> Result<Option<Candidate>> {
    let (next, kept) = primal_update(&s.z(outcome.state.phi()), j, floor)?;
    let f = form.fim(next.matrix());
    match criterion_of_fim(&f, crit) {
        Ok(value) => Ok(Some(Candidate { j: next, value, kept })),
        Err(Error::SingularFim { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Starting dual matrix: the exact dual optimum of the unlinearized problem
/// at the initial design (`M^-2 / 4` for A, `M^-1` for D), `I / n` for E, or
/// a seeded random matrix when `seed` is given.
pub fn initial_phi(crit: Criterion, m: &SymMatrix, n: usize, seed: Option<u64>) -> Result<SymMatrix> {
    if let Some(seed) = seed {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let g = Matrix::from_row_major(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect());
        let mut p = g.tr_mul(&g);
        for i in 0..n {
            p[(i, i)] += 0.1;
        }
        let p = p.symmetric_part();
        return Ok(match crit {
            Criterion::E => p.scale(1.0 / p.trace()),
            _ => p.scale(1.0 / m.trace()),
        });
    }
    match crit {
        Criterion::A => Ok(sym_evd(m)?.reconstruct_with(|x| 0.25 / (x * x))),
        Criterion::D => inverse(m),
        Criterion::E => Ok(SymMatrix::identity(n).scale(1.0 / n as f64)),
    }
}

// Rotates every row by 1e-3 rad with a seeded sign (2D) or about a seeded
// random axis (3D).
fn perturb(j: &Orientation, seed: u64) -> Result<Orientation> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let angle: f64 = 1e-3;
    let mut out = j.matrix().clone();
    for i in 0..out.nrows() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let a: f64 = sign * angle;
        let row = j.row(i).to_vec();
        if row.len() == 2 {
            out[(i, 0)] = a.cos() * row[0] - a.sin() * row[1];
            out[(i, 1)] = a.sin() * row[0] + a.cos() * row[1];
        } else {
            let axis: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let k: Vec<f64> = axis.iter().map(|x| x / norm(&axis)).collect();
            let cross = [
                k[1] * row[2] - k[2] * row[1],
                k[2] * row[0] - k[0] * row[2],
                k[0] * row[1] - k[1] * row[0],
            ];
            let kd: f64 = k.iter().zip(&row).map(|(x, y)| x * y).sum();
            for c in 0..3 {
                out[(i, c)] = row[c] * a.cos() + cross[c] * a.sin() + k[c] * kd * (1.0 - a.cos());
            }
        }
    }
    Orientation::normalized(out)
}
