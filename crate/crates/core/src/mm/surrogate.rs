//! Primal surrogate, dual state and the bounding functions the MM steps are
//! built from.

use crate::error::{invalid, Result};
use crate::fim::{rotate_congruent, HybridForm};
use crate::geometry::Orientation;
use crate::linalg::{inverse, norm, sym_evd, Matrix, SymMatrix};

/// Norm below which `||z_i||` or `||Phi_k~ a_i||` counts as zero.
pub const NORM_FLOOR: f64 = 1e-12;

// T^T v for a 2-vector, T = U.
fn rotate_t(v: &[f64]) -> [f64; 2] {
    [-v[1], v[0]]
}

/// Linearization data at the current orientation `J_t`: one matrix
/// `A_b = J_t^T R_b` per information block.
#[derive(Clone, Debug)]
pub struct PrimalSurrogate {
    rotated: Vec<bool>,
    atilde: Vec<Matrix>,
    m_mat: SymMatrix,
    n: usize,
}

impl PrimalSurrogate {
    pub fn new(form: &HybridForm, jt: &Matrix) -> Self {
        let rotated = form.blocks().iter().map(|b| b.rotated).collect();
        let atilde = form.blocks().iter().map(|b| jt.tr_mul(b.weight.as_matrix())).collect();
        Self {
            rotated,
            atilde,
            m_mat: form.fim(jt),
            n: jt.ncols(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn num_sensors(&self) -> usize {
        self.atilde[0].ncols()
    }

    pub fn num_blocks(&self) -> usize {
        self.atilde.len()
    }

    pub fn rotated(&self) -> &[bool] {
        &self.rotated
    }

    /// `A_b = J_t^T R_b` for block `b`.
    pub fn atilde(&self, b: usize) -> &Matrix {
        &self.atilde[b]
    }

    /// `M = H_t^T R H_t`, the FIM at the expansion point.
    pub fn fim(&self) -> &SymMatrix {
        &self.m_mat
    }

    /// Column `i` of every `A_b`, stacked.
    pub fn a(&self, i: usize) -> Vec<f64> {
        self.atilde.iter().flat_map(|a| a.col(i)).collect()
    }

    /// `Q_b = T_b Phi T_b^T` for every block.
    pub fn q_blocks(&self, phi: &Matrix) -> Vec<Matrix> {
        self.rotated
            .iter()
            .map(|&r| if r { rotate_congruent(phi) } else { phi.clone() })
            .collect()
    }

    /// `Z = sum_b Q_b A_b`; column `i` is `Phi~ a_i`.
    pub fn z(&self, phi: &Matrix) -> Matrix {
        let mut z = Matrix::zeros(self.n, self.num_sensors());
        for (q, a) in self.q_blocks(phi).iter().zip(&self.atilde) {
            z = &z + &(q * a);
        }
        z
    }

    /// `sum_i ||Phi~ a_i||`.
    pub fn norm_sum(&self, phi: &Matrix) -> f64 {
        let z = self.z(phi);
        (0..z.ncols()).map(|i| norm(&z.col(i))).sum()
    }

    /// Symmetric gradient of `sum_i ||Phi~ a_i||` with respect to `Phi`;
    /// terms with `||z_i|| < NORM_FLOOR` contribute nothing.
    pub fn norm_sum_gradient(&self, phi: &Matrix) -> Matrix {
        let z = self.z(phi);
        let mut g = Matrix::zeros(self.n, self.n);
        for i in 0..z.ncols() {
            let zi = z.col(i);
            let r = norm(&zi);
            if r < NORM_FLOOR {
                continue;
            }
            let u: Vec<f64> = zi.iter().map(|x| x / r).collect();
            for (b, a) in self.atilde.iter().enumerate() {
                let ai = a.col(i);
                let (x, y): (Vec<f64>, Vec<f64>) = if self.rotated[b] {
                    (rotate_t(&ai).to_vec(), rotate_t(&u).to_vec())
                } else {
                    (ai, u.clone())
                };
                for p in 0..self.n {
                    for s in 0..self.n {
                        g[(p, s)] += 0.5 * (x[p] * y[s] + y[p] * x[s]);
                    }
                }
            }
        }
        g
    }
}

/// Dual matrix `Phi` with the derived `Phi~ = [Q_1, ..., Q_k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    phi: SymMatrix,
    tilde: Matrix,
}

impl DualState {
    pub fn new(phi: SymMatrix, surrogate: &PrimalSurrogate) -> Self {
        let blocks = surrogate.q_blocks(&phi);
        let mut tilde = blocks[0].clone();
        for q in &blocks[1..] {
            tilde = tilde.hstack(q);
        }
        Self { phi, tilde }
    }

    pub fn phi(&self) -> &SymMatrix {
        &self.phi
    }

    /// `[Q_1, ..., Q_k]` (with `Q_1 = Phi`).
    pub fn phi_tilde(&self) -> &Matrix {
        &self.tilde
    }

    pub fn into_phi(self) -> SymMatrix {
        self.phi
    }
}

/// Saddle value of the linearized problem at `Phi`, i.e. the primal
/// maximization over unit rows already carried out:
/// `2 sum_i ||Phi~ a_i|| - Tr[M Phi] - penalty(Phi)`.
///
/// The penalty is `Tr sqrt(Phi)` (A), `log det Phi` (D) or zero (E).
pub fn dual_objective(s: &PrimalSurrogate, phi: &SymMatrix, penalty: Penalty) -> Result<f64> {
    let base = 2.0 * s.norm_sum(phi) - trace_product(s.fim(), phi);
    let p = match penalty {
        Penalty::None => 0.0,
        Penalty::TraceSqrt => sym_evd(phi)?.values.iter().map(|x| x.max(0.0).sqrt()).sum(),
        Penalty::LogDet => sym_evd(phi)?.values.iter().map(|x| x.ln()).sum(),
    };
    Ok(base - p)
}

/// Concave penalty subtracted in the dual objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Penalty {
    TraceSqrt,
    LogDet,
    None,
}

pub(crate) fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

/// Rows `z_i / ||z_i||`; rows whose `||z_i||` falls below `floor` keep the
/// previous direction. Returns the new orientation and the number of kept
/// rows.
pub fn primal_update(z: &Matrix, previous: &Orientation, floor: f64) -> Result<(Orientation, usize)> {
    if z.nrows() != previous.dimension() || z.ncols() != previous.num_sensors() {
        return Err(invalid(format!(
            "surrogate is {}x{}, orientation is {}x{}",
            z.nrows(),
            z.ncols(),
            previous.num_sensors(),
            previous.dimension()
        )));
    }
    let mut j = previous.matrix().clone();
    let mut kept = 0;
    for i in 0..z.ncols() {
        let zi = z.col(i);
        let r = norm(&zi);
        if r < floor || !r.is_finite() {
            kept += 1;
            continue;
        }
        for (k, v) in zi.iter().enumerate() {
            j[(i, k)] = v / r;
        }
    }
    Ok((Orientation::new(j)?, kept))
}

/// `2 Tr[Phi H_t^T R H] - Tr[Phi H_t^T R H_t]`, a lower bound on
/// `Tr[Phi H^T R H]` for PSD `Phi` and `R`, tight at `H = H_t`.
pub fn surrogate_lower_bound(h: &Matrix, h_t: &Matrix, r: &SymMatrix, phi: &SymMatrix) -> f64 {
    let rh = r.as_matrix() * h;
    let rht = r.as_matrix() * h_t;
    2.0 * trace_product(phi, &h_t.tr_mul(&rh)) - trace_product(phi, &h_t.tr_mul(&rht))
}

/// `||Phi~ a||^2 / (2 w) + w / 2` with `w = max(||Phi~_k a||, NORM_FLOOR)`,
/// an upper bound on `||Phi~ a||` tight at `Phi~ = Phi~_k`.
pub fn surrogate_upper_bound_norm(phi_tilde: &Matrix, phi_tilde_k: &Matrix, a: &[f64]) -> f64 {
    let x = norm(&phi_tilde.mul_vec(a));
    let w = norm(&phi_tilde_k.mul_vec(a)).max(NORM_FLOOR);
    x * x / (2.0 * w) + w / 2.0
}

/// Minimizer and minimum of `Tr(Phi M) - Tr sqrt(Phi)` over PSD `Phi`:
/// `Phi* = M^-2 / 4` and `-Tr(M^-1) / 4`.
pub fn fenchel_min_value(m: &SymMatrix) -> Result<(SymMatrix, f64)> {
    let inv = inverse(m)?;
    let phi = sym_evd(m)?.reconstruct_with(|x| 0.25 / (x * x));
    Ok((phi, -0.25 * inv.trace()))
}
