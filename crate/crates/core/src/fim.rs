//! Fisher information of the hybrid model, its CRLB and the A/D/E criteria.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::geometry::{DistanceProfile, Orientation};
use crate::linalg::{inverse, sym_evd, Matrix, SymMatrix};
use crate::models::NoiseModel;
use crate::problem::DesignProblem;

/// Smallest admissible `lambda_min(F) / lambda_max(F)` before a FIM counts as
/// singular.
pub const FIM_RCOND_FLOOR: f64 = 1e-12;

/// The 2D rotation `U = [[0, 1], [-1, 0]]`.
pub fn rotation() -> Matrix {
    Matrix::from_row_major(2, 2, vec![0.0, 1.0, -1.0, 0.0])
}

/// `J U` for a 2-column `J`: rows `(x, y)` become `(-y, x)`.
pub(crate) fn rotate_rows(j: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(j.nrows(), 2);
    for i in 0..j.nrows() {
        out[(i, 0)] = -j[(i, 1)];
        out[(i, 1)] = j[(i, 0)];
    }
    out
}

/// `U M U^T` for a 2x2 `M`.
pub(crate) fn rotate_congruent(m: &Matrix) -> Matrix {
    Matrix::from_row_major(2, 2, vec![m[(1, 1)], -m[(1, 0)], -m[(0, 1)], m[(0, 0)]])
}

fn check_rows(j: &Orientation, m: usize) -> Result<()> {
    if j.num_sensors() != m {
        return Err(invalid(format!(
            "orientation has {} rows, noise model has {m} sensors",
            j.num_sensors()
        )));
    }
    Ok(())
}

/// `J^T Sigma_TOA^-1 J`.
pub fn fim_toa(j: &Orientation, noise: &NoiseModel) -> Result<SymMatrix> {
    check_rows(j, noise.num_sensors())?;
    Ok(inverse(noise.toa())?.congruence(j.matrix()))
}

/// `eta^2 J^T D Sigma_RSS^-1 D J`.
pub fn fim_rss(j: &Orientation, d: &DistanceProfile, eta: f64, noise: &NoiseModel) -> Result<SymMatrix> {
    check_rows(j, noise.num_sensors())?;
    let w = scaled_precision(noise.rss(), d)?;
    Ok(w.congruence(j.matrix()).scale(eta * eta))
}

/// `U^T J^T D Sigma_AOA^-1 D J U` (2D only).
pub fn fim_aoa(j: &Orientation, d: &DistanceProfile, noise: &NoiseModel) -> Result<SymMatrix> {
    if j.dimension() != 2 {
        return Err(Error::Unsupported("AOA information is only defined in 2D".into()));
    }
    check_rows(j, noise.num_sensors())?;
    let aoa = noise
        .aoa()
        .ok_or_else(|| invalid("noise model has no AOA covariance"))?;
    Ok(scaled_precision(aoa, d)?.congruence(&rotate_rows(j.matrix())))
}

// D Sigma^-1 D
fn scaled_precision(cov: &SymMatrix, d: &DistanceProfile) -> Result<SymMatrix> {
    if d.len() != cov.dim() {
        return Err(invalid(format!(
            "{} distances for a {}-sensor covariance",
            d.len(),
            cov.dim()
        )));
    }
    let p = inverse(cov)?;
    let inv = d.inverse_distances();
    let m = cov.dim();
    let mut out = Matrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            out[(a, b)] = inv[a] * p[(a, b)] * inv[b];
        }
    }
    Ok(out.symmetric_part())
}

/// One term `T^T J^T W J T` of the compact FIM, with `T` either the identity
/// or the rotation `U`.
#[derive(Clone, Debug, PartialEq)]
pub struct InfoBlock {
    pub rotated: bool,
    pub weight: SymMatrix,
}

/// Compact form `F = H^T R H` with `R = blkdiag(R1, R2)` and
/// `H = [J; J U]`; without AOA it reduces to `H = J`, `R = R1`.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridForm {
    r1: SymMatrix,
    r2: Option<SymMatrix>,
    blocks: Vec<InfoBlock>,
}

impl HybridForm {
    pub fn new(d: &DistanceProfile, eta: f64, noise: &NoiseModel) -> Result<Self> {
        let r1 = inverse(noise.toa())?.add(&scaled_precision(noise.rss(), d)?.scale(eta * eta));
        let r2 = noise.aoa().map(|a| scaled_precision(a, d)).transpose()?;
        Self::from_weights(r1, r2)
    }

    /// Form with explicit weights `R1` and optional `R2`, both PSD.
    pub fn from_weights(r1: SymMatrix, r2: Option<SymMatrix>) -> Result<Self> {
        for w in std::iter::once(&r1).chain(r2.as_ref()) {
            if w.dim() != r1.dim() {
                return Err(invalid(format!(
                    "weights are {}x{} and {}x{}",
                    r1.dim(),
                    r1.dim(),
                    w.dim(),
                    w.dim()
                )));
            }
            let lo = sym_evd(w)?.min();
            if lo < -1e-12 * w.max_abs() {
                return Err(invalid(format!(
                    "weight matrix is not PSD (smallest eigenvalue {lo:e})"
                )));
            }
        }
        let mut blocks = vec![InfoBlock {
            rotated: false,
            weight: r1.clone(),
        }];
        if let Some(r2) = &r2 {
            blocks.push(InfoBlock {
                rotated: true,
                weight: r2.clone(),
            });
        }
        Ok(Self { r1, r2, blocks })
    }

    /// `Sigma_TOA^-1 + eta^2 D Sigma_RSS^-1 D`.
    pub fn r1(&self) -> &SymMatrix {
        &self.r1
    }

    /// `D Sigma_AOA^-1 D`, when AOA is modeled.
    pub fn r2(&self) -> Option<&SymMatrix> {
        self.r2.as_ref()
    }

    pub fn blocks(&self) -> &[InfoBlock] {
        &self.blocks
    }

    pub fn num_sensors(&self) -> usize {
        self.r1.dim()
    }

    /// The stacked matrix `H`.
    pub fn h(&self, j: &Matrix) -> Matrix {
        match self.r2 {
            Some(_) => j.vstack(&rotate_rows(j)),
            None => j.clone(),
        }
    }

    /// The block-diagonal weight `R`.
    pub fn r(&self) -> SymMatrix {
        let m = self.num_sensors();
        let Some(r2) = &self.r2 else {
            return self.r1.clone();
        };
        let mut out = Matrix::zeros(2 * m, 2 * m);
        for a in 0..m {
            for b in 0..m {
                out[(a, b)] = self.r1[(a, b)];
                out[(m + a, m + b)] = r2[(a, b)];
            }
        }
        SymMatrix::new(out).expect("block-diagonal of symmetric blocks")
    }

    /// `sum_b T_b^T J^T R_b J T_b`.
    pub fn fim(&self, j: &Matrix) -> SymMatrix {
        self.cross_fim(j, j)
    }

    /// `sum_b T_b^T A^T R_b B T_b`, symmetrized.
    pub fn cross_fim(&self, a: &Matrix, b: &Matrix) -> SymMatrix {
        let n = a.ncols();
        let mut out = Matrix::zeros(n, n);
        for block in &self.blocks {
            let wb = block.weight.as_matrix() * b;
            let term = a.tr_mul(&wb);
            let term = if block.rotated { rotate_congruent_t(&term) } else { term };
            out = &out + &term;
        }
        out.symmetric_part()
    }
}

// U^T M U for a 2x2 M.
fn rotate_congruent_t(m: &Matrix) -> Matrix {
    Matrix::from_row_major(2, 2, vec![m[(1, 1)], -m[(1, 0)], -m[(0, 1)], m[(0, 0)]])
}

/// Optimal-design criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Criterion {
    /// Trace of the CRLB.
    A,
    /// `-log det F`.
    D,
    /// Largest eigenvalue of the CRLB.
    E,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::A, Criterion::D, Criterion::E];
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::A => "A",
            Criterion::D => "D",
            Criterion::E => "E",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Criterion::A),
            "D" | "d" => Ok(Criterion::D),
            "E" | "e" => Ok(Criterion::E),
            other => Err(invalid(format!("unknown criterion {other:?}, expected A, D or E"))),
        }
    }
}

/// Fisher information, CRLB and the three criterion values.
#[derive(Clone, Debug, PartialEq)]
pub struct FimResult {
    pub fim: SymMatrix,
    pub crlb: SymMatrix,
    /// `trace(C)`.
    pub a: f64,
    /// `-log det F`.
    pub d: f64,
    /// `lambda_max(C)`.
    pub e: f64,
}

impl FimResult {
    pub fn from_fim(fim: SymMatrix) -> Result<Self> {
        let evd = sym_evd(&fim)?;
        let hi = evd.max();
        let lo = evd.min();
        if !(lo > 0.0 && lo > FIM_RCOND_FLOOR * hi) {
            return Err(Error::SingularFim { min_eigenvalue: lo });
        }
        Ok(Self {
            crlb: evd.reconstruct_with(|x| 1.0 / x),
            a: evd.values.iter().map(|x| 1.0 / x).sum(),
            d: -evd.values.iter().map(|x| x.ln()).sum::<f64>(),
            e: 1.0 / lo,
            fim,
        })
    }

    pub fn value(&self, c: Criterion) -> f64 {
        match c {
            Criterion::A => self.a,
            Criterion::D => self.d,
            Criterion::E => self.e,
        }
    }
}

/// Criterion value of a Fisher information matrix.
pub fn criterion_of_fim(fim: &SymMatrix, c: Criterion) -> Result<f64> {
    Ok(FimResult::from_fim(fim.clone())?.value(c))
}

/// `F_TOA + F_RSS (+ F_AOA)` and its inverse.
pub fn hybrid_fim(problem: &DesignProblem, j: &Orientation) -> Result<FimResult> {
    problem.check_orientation(j)?;
    let noise = problem.noise();
    let mut f = fim_toa(j, noise)?.add(&fim_rss(j, problem.distances(), problem.constants().eta, noise)?);
    if noise.aoa().is_some() {
        f = f.add(&fim_aoa(j, problem.distances(), noise)?);
    }
    debug_assert!({
        let compact = problem.form().fim(j.matrix());
        (&compact - &f).frobenius_norm() <= 1e-10 * f.frobenius_norm().max(1.0)
    });
    FimResult::from_fim(f)
}

/// Criterion value of orientation `j` under `problem`'s model.
pub fn criterion_value(problem: &DesignProblem, j: &Orientation, c: Criterion) -> Result<f64> {
    problem.check_orientation(j)?;
    criterion_of_fim(&problem.form().fim(j.matrix()), c)
}
