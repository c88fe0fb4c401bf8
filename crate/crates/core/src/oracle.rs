//! Independent reference computations: the closed-form trace CRLB for
//! uniform noise, an exhaustive angle-grid design search for small `m`, and
//! a dense grid over the trace-one 2x2 PSD set.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fim::Criterion;
use crate::geometry::Orientation;
use crate::linalg::{Matrix, SymMatrix};
use crate::mm::PrimalSurrogate;
use crate::problem::DesignProblem;

/// Scalar noise levels of a uniform-noise setup.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoreticalCrlbInput {
    /// Sensor-target distances in meters.
    pub distances: Vec<f64>,
    /// Range noise standard deviation (m).
    pub gamma: f64,
    /// Power noise standard deviation (dB).
    pub sigma: f64,
    /// Bearing noise standard deviation (rad).
    pub tau: f64,
    pub eta: f64,
}

/// `4 / sum_i (eta^2 / (d_i^2 sigma^2) + 1 / (d_i^2 tau^2) + 1 / gamma^2)`,
/// the trace CRLB of any design with `J^T J = (m/2) I`.
pub fn theoretical_trace_crlb(input: &TheoreticalCrlbInput) -> Result<f64> {
    let TheoreticalCrlbInput {
        distances,
        gamma,
        sigma,
        tau,
        eta,
    } = input;
    if distances.is_empty() || !distances.iter().all(|&d| d > 0.0) {
        return Err(invalid("distances must be positive"));
    }
    if !(*gamma > 0.0 && *sigma > 0.0 && *tau > 0.0) {
        return Err(invalid("noise standard deviations must be positive"));
    }
    let info: f64 = distances
        .iter()
        .map(|d| {
            let d2 = d * d;
            eta * eta / (d2 * sigma * sigma) + 1.0 / (d2 * tau * tau) + 1.0 / (gamma * gamma)
        })
        .sum();
    Ok(4.0 / info)
}

/// `||J^T J - (m/2) I||_F` for a 2D orientation.
pub fn check_half_identity(j: &Orientation) -> Result<f64> {
    if j.dimension() != 2 {
        return Err(invalid("the half-identity check applies to 2D orientations"));
    }
    let jtj = j.matrix().tr_mul(j.matrix());
    let target = Matrix::identity(2).scale(j.num_sensors() as f64 / 2.0);
    Ok((&jtj - &target).frobenius_norm())
}

/// Finest admissible angle-grid resolution in degrees.
pub const MIN_RESOLUTION_DEG: f64 = 0.5;

/// Largest sensor count the exhaustive search accepts.
pub const MAX_BRUTE_FORCE_SENSORS: usize = 3;

#[derive(Clone, Debug)]
pub struct BruteForceResult {
    pub orientation: Orientation,
    pub value: f64,
    /// Grid points per angle.
    pub points_per_angle: usize,
}

/// Evaluates the problem's criterion on every combination of azimuths from
/// a uniform grid over `[0, 360)` degrees and returns the best one.
///
/// Ties resolve to the lexicographically smallest angle-index tuple, so the
/// result does not depend on how the work is scheduled.
pub fn brute_force_design(problem: &DesignProblem, resolution_deg: f64) -> Result<BruteForceResult> {
    let m = problem.num_sensors();
    if problem.dimension() != 2 {
        return Err(Error::Unsupported("the angle-grid search is 2D only".into()));
    }
    if m > MAX_BRUTE_FORCE_SENSORS {
        return Err(Error::Unsupported(format!(
            "the angle-grid search handles at most {MAX_BRUTE_FORCE_SENSORS} sensors, got {m}"
        )));
    }
    if !(MIN_RESOLUTION_DEG..=90.0).contains(&resolution_deg) {
        return Err(invalid(format!(
            "resolution must lie in [{MIN_RESOLUTION_DEG}, 90] degrees, got {resolution_deg}"
        )));
    }
    let npts = (360.0 / resolution_deg).round() as usize;
    let step = std::f64::consts::TAU / npts as f64;
    let cs: Vec<(f64, f64)> = (0..npts)
        .map(|k| ((k as f64 * step).cos(), (k as f64 * step).sin()))
        .collect();

    let form = problem.form();
    let p = form.r1().as_matrix().clone();
    let q = form
        .r2()
        .map(|r| r.as_matrix().clone())
        .unwrap_or_else(|| Matrix::zeros(m, m));
    let eval = GridEvaluator {
        p,
        q,
        crit: problem.criterion(),
        cs: &cs,
    };

    let outer: Vec<Vec<usize>> = match m {
        2 => (0..npts).map(|a| vec![a]).collect(),
        _ => (0..npts).flat_map(|a| (0..npts).map(move |b| vec![a, b])).collect(),
    };
    let best = outer.par_iter().map(|prefix| eval.best_last(prefix)).reduce(
        || (f64::INFINITY, Vec::new()),
        |x, y| {
            if y.0 < x.0 || (y.0 == x.0 && !y.1.is_empty() && (x.1.is_empty() || y.1 < x.1)) {
                y
            } else {
                x
            }
        },
    );
    if !best.0.is_finite() {
        return Err(Error::SingularFim { min_eigenvalue: 0.0 });
    }
    let angles: Vec<f64> = best.1.iter().map(|&k| k as f64 * step).collect();
    Ok(BruteForceResult {
        orientation: Orientation::from_azimuths(&angles)?,
        value: best.0,
        points_per_angle: npts,
    })
}

/// `|v(res) - v(res / 2)| + 1e-9`, the empirically measured gap between the
/// grid minimum at `resolution_deg` and the continuous optimum.
pub fn grid_slack(problem: &DesignProblem, resolution_deg: f64) -> Result<f64> {
    let coarse = brute_force_design(problem, resolution_deg)?.value;
    let fine = brute_force_design(problem, resolution_deg / 2.0)?.value;
    Ok((coarse - fine).abs() + 1e-9)
}

struct GridEvaluator<'a> {
    p: Matrix,
    q: Matrix,
    crit: Criterion,
    cs: &'a [(f64, f64)],
}

impl GridEvaluator<'_> {
    // Best last angle for fixed leading angles; the FIM entries are affine in
    // (c^2, cs, s^2, c, s) of the last row.
    fn best_last(&self, prefix: &[usize]) -> (f64, Vec<usize>) {
        let last = prefix.len();
        let (p, q) = (&self.p, &self.q);
        let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
        for (i, &a) in prefix.iter().enumerate() {
            let (ci, si) = self.cs[a];
            for (k, &b) in prefix.iter().enumerate() {
                let (ck, sk) = self.cs[b];
                xx += p[(i, k)] * ci * ck + q[(i, k)] * si * sk;
                yy += p[(i, k)] * si * sk + q[(i, k)] * ci * ck;
                xy += p[(i, k)] * ci * sk - q[(i, k)] * si * ck;
            }
        }
        // linear coefficients in (c, s) of the last row
        let (mut lxx_c, mut lxx_s, mut lyy_c, mut lyy_s, mut lxy_c, mut lxy_s) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &a) in prefix.iter().enumerate() {
            let (ci, si) = self.cs[a];
            let (pi, qi) = (p[(i, last)], q[(i, last)]);
            lxx_c += 2.0 * pi * ci;
            lxx_s += 2.0 * qi * si;
            lyy_s += 2.0 * pi * si;
            lyy_c += 2.0 * qi * ci;
            lxy_s += (pi - qi) * ci;
            lxy_c += (pi - qi) * si;
        }
        let (pl, ql) = (p[(last, last)], q[(last, last)]);

        let mut best = (f64::INFINITY, usize::MAX);
        for (k, &(c, s)) in self.cs.iter().enumerate() {
            let fxx = xx + lxx_c * c + lxx_s * s + pl * c * c + ql * s * s;
            let fyy = yy + lyy_c * c + lyy_s * s + pl * s * s + ql * c * c;
            let fxy = xy + lxy_c * c + lxy_s * s + (pl - ql) * c * s;
            let v = criterion_2x2(fxx, fxy, fyy, self.crit);
            if v < best.0 {
                best = (v, k);
            }
        }
        let mut idx = prefix.to_vec();
        idx.push(best.1);
        if best.1 == usize::MAX {
            idx.clear();
        }
        (best.0, idx)
    }
}

// Criterion of [[a, b], [b, c]]; infinity when singular.
fn criterion_2x2(a: f64, b: f64, c: f64, crit: Criterion) -> f64 {
    let tr = a + c;
    let det = a * c - b * b;
    let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
    let hi = 0.5 * (tr + disc);
    let lo = det / hi;
    if !(lo > 0.0 && lo > crate::fim::FIM_RCOND_FLOOR * hi) {
        return f64::INFINITY;
    }
    match crit {
        Criterion::A => tr / det,
        Criterion::D => -det.ln(),
        Criterion::E => 1.0 / lo,
    }
}

/// Minimum of `2 sum_i ||Phi~ a_i|| - Tr[M Phi]` over an `n x n` grid of the
/// disk parameterization `Phi = [[1/2 + p, q], [q, 1/2 - p]]`,
/// `p^2 + q^2 <= 1/4`, of the trace-one 2x2 PSD matrices.
pub fn disk_grid_e_dual(s: &PrimalSurrogate, resolution: usize) -> Result<(f64, SymMatrix)> {
    if s.dimension() != 2 {
        return Err(Error::Unsupported("the disk grid covers 2x2 matrices only".into()));
    }
    if resolution < 2 {
        return Err(invalid("disk grid needs at least 2 points per axis"));
    }
    let h = 1.0 / (resolution - 1) as f64;
    let best = (0..resolution)
        .into_par_iter()
        .map(|a| {
            let p = -0.5 + a as f64 * h;
            let mut best = (f64::INFINITY, 0.0, 0.0);
            for b in 0..resolution {
                let q = -0.5 + b as f64 * h;
                if p * p + q * q > 0.25 {
                    continue;
                }
                let phi = disk_point(p, q);
                let v = 2.0 * s.norm_sum(&phi) - crate::mm::trace_product(s.fim(), &phi);
                if v < best.0 {
                    best = (v, p, q);
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, 0.0, 0.0), |x, y| if y.0 < x.0 { y } else { x });
    Ok((best.0, SymMatrix::new(disk_point(best.1, best.2))?))
}

fn disk_point(p: f64, q: f64) -> Matrix {
    Matrix::from_row_major(2, 2, vec![0.5 + p, q, q, 0.5 - p])
}
