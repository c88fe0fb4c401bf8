//! Hybrid TOA-RSS-AOA measurement model: constants, noise covariances,
//! noiseless measurements and seeded sampling of noisy ones.

use std::f64::consts::{LN_10, PI};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::geometry::{distance, TargetSensorConfig};
use crate::linalg::{cholesky, min_eigenvalue, Matrix, SymMatrix};

/// Physical constants of the measurement model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConstants {
    /// Signal speed in m/s.
    pub c: f64,
    /// Source power at the target in dB.
    pub p0: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// `-10 alpha / ln(10)`.
    pub eta: f64,
}

impl ModelConstants {
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

    pub fn new(c: f64, p0: f64, alpha: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid(format!("signal speed must be positive, got {c}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("path-loss exponent must be positive, got {alpha}")));
        }
        if !p0.is_finite() {
            return Err(invalid("source power must be finite"));
        }
        Ok(Self {
            c,
            p0,
            alpha,
            eta: -10.0 * alpha / LN_10,
        })
    }

    /// Path-loss exponent `alpha` with default speed and zero source power.
    pub fn with_alpha(alpha: f64) -> Result<Self> {
        Self::new(Self::SPEED_OF_LIGHT, 0.0, alpha)
    }

    /// Constants whose `eta` is exactly the given value (`eta < 0`).
    pub fn from_eta(eta: f64) -> Result<Self> {
        if !(eta < 0.0 && eta.is_finite()) {
            return Err(invalid(format!("eta must be negative and finite, got {eta}")));
        }
        let mut k = Self::with_alpha(-eta * LN_10 / 10.0)?;
        k.eta = eta;
        Ok(k)
    }
}

/// Covariances of the three measurement blocks.
///
/// The TOA covariance lives in the range domain (m^2), the RSS covariance in
/// dB^2 and the AOA covariance in rad^2. AOA is optional: 3D problems and
/// TOA-RSS-only setups omit it.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    toa: SymMatrix,
    rss: SymMatrix,
    aoa: Option<SymMatrix>,
}

impl NoiseModel {
    pub fn new(toa: SymMatrix, rss: SymMatrix, aoa: Option<SymMatrix>) -> Result<Self> {
        let m = toa.dim();
        let blocks = [("TOA", Some(&toa)), ("RSS", Some(&rss)), ("AOA", aoa.as_ref())];
        for (name, cov) in blocks {
            let Some(cov) = cov else { continue };
            if cov.dim() != m {
                return Err(invalid(format!(
                    "{name} covariance is {0}x{0}, expected {m}x{m}",
                    cov.dim()
                )));
            }
            let lo = min_eigenvalue(cov)?;
            if !(lo > 0.0) {
                return Err(invalid(format!(
                    "{name} covariance is not positive definite (smallest eigenvalue {lo:e})"
                )));
            }
        }
        Ok(Self { toa, rss, aoa })
    }

    /// Independent noise with variances `gamma2` (range), `sigma2` (power)
    /// and `tau2` (bearing) on every sensor.
    pub fn uniform(m: usize, gamma2: f64, sigma2: f64, tau2: Option<f64>) -> Result<Self> {
        let diag = |v: f64| SymMatrix::from_diag(&vec![v; m]);
        Self::new(diag(gamma2), diag(sigma2), tau2.map(diag))
    }

    pub fn toa(&self) -> &SymMatrix {
        &self.toa
    }

    pub fn rss(&self) -> &SymMatrix {
        &self.rss
    }

    pub fn aoa(&self) -> Option<&SymMatrix> {
        self.aoa.as_ref()
    }

    pub fn num_sensors(&self) -> usize {
        self.toa.dim()
    }

    /// All covariances multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.toa.scale(s),
            self.rss.scale(s),
            self.aoa.as_ref().map(|a| a.scale(s)),
        )
    }

    /// Drops the AOA block.
    pub fn without_aoa(&self) -> Self {
        Self {
            toa: self.toa.clone(),
            rss: self.rss.clone(),
            aoa: None,
        }
    }
}

/// Stacked hybrid measurement `q = [z; p; theta]`.
///
/// `p` holds the power offsets `p_i - p0`. `theta` is absent when the model
/// has no AOA block.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridMeasurement {
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub theta: Option<Vec<f64>>,
}

impl HybridMeasurement {
    pub fn stacked(&self) -> Vec<f64> {
        let mut q = self.z.clone();
        q.extend_from_slice(&self.p);
        if let Some(t) = &self.theta {
            q.extend_from_slice(t);
        }
        q
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x - 2.0 * PI * ((x + PI) / (2.0 * PI)).floor();
    if w <= -PI {
        w + 2.0 * PI
    } else if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Noiseless ranges `d_i`, powers `eta ln d_i` and (2D, when `with_aoa`)
/// bearings `atan2(r_y - s_yi, r_x - s_xi)`.
pub fn hybrid_mean(cfg: &TargetSensorConfig, k: &ModelConstants, with_aoa: bool) -> Result<HybridMeasurement> {
    if with_aoa && cfg.dimension() != 2 {
        return Err(crate::Error::Unsupported(
            "AOA measurements are only modeled in 2D".into(),
        ));
    }
    let r = cfg.target();
    let z: Vec<f64> = cfg.sensors().iter().map(|s| distance(r, s)).collect();
    let p = z.iter().map(|d| k.eta * d.ln()).collect();
    let theta = with_aoa.then(|| {
        cfg.sensors()
            .iter()
            .map(|s| wrap_angle((r[1] - s[1]).atan2(r[0] - s[0])))
            .collect()
    });
    Ok(HybridMeasurement { z, p, theta })
}

/// Draws noisy measurements for a fixed geometry and noise model.
#[derive(Clone, Debug)]
pub struct MeasurementSampler {
    mean: HybridMeasurement,
    toa: Matrix,
    rss: Matrix,
    aoa: Option<Matrix>,
}

impl MeasurementSampler {
    pub fn new(cfg: &TargetSensorConfig, k: &ModelConstants, noise: &NoiseModel) -> Result<Self> {
        Self::with_scale(cfg, k, noise, 1.0)
    }

    /// Sampler for the covariances scaled by `scale >= 0`; `scale = 0`
    /// reproduces the noiseless mean exactly.
    pub fn with_scale(cfg: &TargetSensorConfig, k: &ModelConstants, noise: &NoiseModel, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(invalid(format!("noise scale must be non-negative, got {scale}")));
        }
        if noise.num_sensors() != cfg.num_sensors() {
            return Err(invalid(format!(
                "noise model has {} sensors, configuration has {}",
                noise.num_sensors(),
                cfg.num_sensors()
            )));
        }
        let mean = hybrid_mean(cfg, k, noise.aoa().is_some())?;
        let factor = |c: &SymMatrix| cholesky(c).map(|l| l.scale(scale.sqrt()));
        Ok(Self {
            mean,
            toa: factor(noise.toa())?,
            rss: factor(noise.rss())?,
            aoa: noise.aoa().map(factor).transpose()?,
        })
    }

    pub fn mean(&self) -> &HybridMeasurement {
        &self.mean
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HybridMeasurement {
        let m = self.mean.z.len();
        let mut draw = |l: &Matrix, mu: &[f64]| {
            let g: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let e = l.mul_vec(&g);
            mu.iter().zip(e).map(|(a, b)| a + b).collect::<Vec<f64>>()
        };
        let z = draw(&self.toa, &self.mean.z);
        let p = draw(&self.rss, &self.mean.p);
        let theta = match (&self.aoa, &self.mean.theta) {
            (Some(l), Some(t)) => Some(draw(l, t).into_iter().map(wrap_angle).collect()),
            _ => None,
        };
        HybridMeasurement { z, p, theta }
    }
}

/// One noisy measurement drawn from `rng`.
pub fn sample_measurement<R: Rng + ?Sized>(
    cfg: &TargetSensorConfig,
    k: &ModelConstants,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<HybridMeasurement> {
    Ok(MeasurementSampler::new(cfg, k, noise)?.sample(rng))
}

/// `G G^T / m + floor * I` for an `m x m` matrix `G` of draws.
pub fn correlated_covariance_from_draws(g: &Matrix, floor: f64) -> Result<SymMatrix> {
    if !g.is_square() {
        return Err(invalid("draw matrix must be square"));
    }
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(invalid(format!("covariance floor must be positive, got {floor}")));
    }
    let m = g.nrows();
    let ggt = g.transpose().tr_mul(&g.transpose());
    let mut sigma = ggt.scale(1.0 / m as f64);
    for i in 0..m {
        sigma[(i, i)] += floor;
    }
    Ok(sigma.symmetric_part())
}

/// Random symmetric positive-definite covariance with smallest eigenvalue at
/// least `floor`, built from i.i.d. U[0,1] draws.
pub fn random_correlated_covariance(m: usize, floor: f64, seed: u64) -> Result<SymMatrix> {
    if m < 2 {
        return Err(invalid(format!("covariance dimension must be at least 2, got {m}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let data = (0..m * m).map(|_| rng.random::<f64>()).collect();
    correlated_covariance_from_draws(&Matrix::from_row_major(m, m, data), floor)
}
