//! Maximum-likelihood target localization from hybrid measurements and
//! Monte-Carlo MSE evaluation of sensor placements.
//!
//! The estimator is 2D only: a grid search of the hybrid likelihood followed
//! by one Gauss-Newton step.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::TargetSensorConfig;
use crate::linalg::{cholesky, Matrix, SymMatrix};
use crate::models::{HybridMeasurement, MeasurementSampler, ModelConstants, NoiseModel};

/// Square grid of candidate target positions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    center: [f64; 2],
    half_width: f64,
    resolution: usize,
}

impl GridSpec {
    pub const DEFAULT_RESOLUTION: usize = 201;
    /// Default half-width as a multiple of the largest sensor-target distance.
    pub const DEFAULT_WIDTH_FACTOR: f64 = 1.5;

    pub fn new(center: [f64; 2], half_width: f64, resolution: usize) -> Result<Self> {
        if !center.iter().all(|x| x.is_finite()) {
            return Err(invalid("grid center must be finite"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid(format!("grid half-width must be positive, got {half_width}")));
        }
        if resolution < 3 {
            return Err(invalid(format!(
                "grid needs at least 3 points per axis, got {resolution}"
            )));
        }
        Ok(Self {
            center,
            half_width,
            resolution,
        })
    }

    /// Default grid: `201 x 201` points over `center +- 1.5 * max_distance`.
    pub fn covering(center: [f64; 2], max_distance: f64) -> Result<Self> {
        Self::new(
            center,
            Self::DEFAULT_WIDTH_FACTOR * max_distance,
            Self::DEFAULT_RESOLUTION,
        )
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Distance between neighbouring grid points.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.resolution - 1) as f64
    }

    pub fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        let h = self.spacing();
        [
            self.center[0] - self.half_width + ix as f64 * h,
            self.center[1] - self.half_width + iy as f64 * h,
        ]
    }

    pub fn translated(&self, offset: [f64; 2]) -> Self {
        Self {
            center: [self.center[0] + offset[0], self.center[1] + offset[1]],
            ..*self
        }
    }

    fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.resolution).flat_map(move |iy| (0..self.resolution).map(move |ix| self.point(ix, iy)))
    }
}

/// Output of [`mle_estimate`].
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateResult {
    pub r_hat: [f64; 2],
    /// Negative log-likelihood at `r_hat`.
    pub nll: f64,
    pub grid_argmin: [f64; 2],
    pub grid_nll: f64,
    /// Length of the Gauss-Newton step, whether or not it was kept.
    pub step_norm: f64,
    pub step_accepted: bool,
}

/// A noise block's whitener with its raw residuals and Jacobian rows.
type Block<'a> = (&'a Whitener, Vec<f64>, Vec<[f64; 2]>);

// Maps residuals r to L^-1 r for a covariance L L^T.
#[derive(Clone, Debug)]
enum Whitener {
    Diagonal(Vec<f64>),
    Full(Matrix),
}

impl Whitener {
    fn new(c: &SymMatrix) -> Result<Self> {
        if c.is_diagonal() {
            Ok(Self::Diagonal(c.diag().iter().map(|v| 1.0 / v.sqrt()).collect()))
        } else {
            Ok(Self::Full(cholesky(c)?))
        }
    }

    fn apply_in_place(&self, r: &mut [f64]) {
        match self {
            Self::Diagonal(w) => r.iter_mut().zip(w).for_each(|(x, w)| *x *= w),
            Self::Full(l) => {
                for i in 0..r.len() {
                    let row = l.row(i);
                    let mut s = r[i];
                    for k in 0..i {
                        s -= row[k] * r[k];
                    }
                    r[i] = s / row[i];
                }
            }
        }
    }

    // 0.5 r^T C^-1 r; `r` is overwritten.
    fn half_quad(&self, r: &mut [f64]) -> f64 {
        self.apply_in_place(r);
        0.5 * r.iter().map(|x| x * x).sum::<f64>()
    }
}

// Difference of two angles in (-pi, pi], wrapped to (-pi, pi].
fn angle_residual(a: f64, b: f64) -> f64 {
    let r = a - b;
    if r > PI {
        r - 2.0 * PI
    } else if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Hybrid likelihood for fixed sensor positions and noise model.
#[derive(Clone, Debug)]
pub struct Localizer {
    sensors: Vec<[f64; 2]>,
    eta: f64,
    toa: Whitener,
    rss: Whitener,
    aoa: Option<Whitener>,
}

// Distances, log-distances and bearings from every sensor to every grid point.
struct GridTable {
    grid: GridSpec,
    d: Vec<f64>,
    log_d: Vec<f64>,
    bearing: Vec<f64>,
}

impl Localizer {
    pub fn new(sensors: &[Vec<f64>], noise: &NoiseModel, constants: &ModelConstants) -> Result<Self> {
        if sensors.iter().any(|s| s.len() != 2) {
            return Err(Error::Unsupported("the MLE grid search is 2D only".into()));
        }
        if sensors.len() != noise.num_sensors() {
            return Err(invalid(format!(
                "noise model has {} sensors, {} positions given",
                noise.num_sensors(),
                sensors.len()
            )));
        }
        if !sensors.iter().flatten().all(|x| x.is_finite()) {
            return Err(invalid("sensor positions must be finite"));
        }
        Ok(Self {
            sensors: sensors.iter().map(|s| [s[0], s[1]]).collect(),
            eta: constants.eta,
            toa: Whitener::new(noise.toa())?,
            rss: Whitener::new(noise.rss())?,
            aoa: noise.aoa().map(Whitener::new).transpose()?,
        })
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    fn check(&self, q: &HybridMeasurement) -> Result<()> {
        let m = self.num_sensors();
        if q.z.len() != m || q.p.len() != m {
            return Err(invalid(format!("measurement has {} ranges for {m} sensors", q.z.len())));
        }
        match (&q.theta, &self.aoa) {
            (Some(t), Some(_)) if t.len() == m => Ok(()),
            (None, None) => Ok(()),
            _ => Err(invalid("measurement bearings do not match the noise model")),
        }
    }

    /// `0.5 sum_blocks res^T Sigma^-1 res` without constants; `+inf` when `r`
    /// coincides with a sensor.
    pub fn neg_log_likelihood(&self, q: &HybridMeasurement, r: [f64; 2]) -> Result<f64> {
        self.check(q)?;
        let m = self.num_sensors();
        let mut d = vec![0.0; m];
        let mut bearing = vec![0.0; m];
        for (i, s) in self.sensors.iter().enumerate() {
            d[i] = (r[0] - s[0]).hypot(r[1] - s[1]);
            bearing[i] = (r[1] - s[1]).atan2(r[0] - s[0]);
        }
        let log_d: Vec<f64> = d.iter().map(|x| x.ln()).collect();
        let mut buf = vec![0.0; m];
        Ok(self.nll_at(q, &d, &log_d, &bearing, &mut buf))
    }

    fn nll_at(&self, q: &HybridMeasurement, d: &[f64], log_d: &[f64], bearing: &[f64], buf: &mut [f64]) -> f64 {
        if d.contains(&0.0) {
            return f64::INFINITY;
        }
        for i in 0..buf.len() {
            buf[i] = q.z[i] - d[i];
        }
        let mut v = self.toa.half_quad(buf);
        for i in 0..buf.len() {
            buf[i] = q.p[i] - self.eta * log_d[i];
        }
        v += self.rss.half_quad(buf);
        if let (Some(w), Some(t)) = (&self.aoa, &q.theta) {
            for i in 0..buf.len() {
                buf[i] = angle_residual(t[i], bearing[i]);
            }
            v += w.half_quad(buf);
        }
        v
    }

    // Whitened residuals and Jacobian of the stacked mean at `r`.
    fn linearize(&self, q: &HybridMeasurement, r: [f64; 2]) -> Option<(Vec<f64>, Vec<[f64; 2]>)> {
        let m = self.num_sensors();
        let mut res = Vec::with_capacity(3 * m);
        let mut jac = Vec::with_capacity(3 * m);
        let mut blocks: Vec<Block<'_>> = Vec::new();
        let mut toa = (vec![0.0; m], vec![[0.0; 2]; m]);
        let mut rss = toa.clone();
        let mut aoa = toa.clone();
        for (i, s) in self.sensors.iter().enumerate() {
            let (dx, dy) = (r[0] - s[0], r[1] - s[1]);
            let d = dx.hypot(dy);
            if d == 0.0 {
                return None;
            }
            let u = [dx / d, dy / d];
            toa.0[i] = q.z[i] - d;
            toa.1[i] = u;
            rss.0[i] = q.p[i] - self.eta * d.ln();
            rss.1[i] = [self.eta * u[0] / d, self.eta * u[1] / d];
            if let Some(t) = &q.theta {
                aoa.0[i] = angle_residual(t[i], dy.atan2(dx));
                aoa.1[i] = [-u[1] / d, u[0] / d];
            }
        }
        blocks.push((&self.toa, toa.0, toa.1));
        blocks.push((&self.rss, rss.0, rss.1));
        if let Some(w) = &self.aoa {
            blocks.push((w, aoa.0, aoa.1));
        }
        for (w, mut rb, jb) in blocks {
            w.apply_in_place(&mut rb);
            let mut cx: Vec<f64> = jb.iter().map(|j| j[0]).collect();
            let mut cy: Vec<f64> = jb.iter().map(|j| j[1]).collect();
            w.apply_in_place(&mut cx);
            w.apply_in_place(&mut cy);
            res.extend(rb);
            jac.extend(cx.into_iter().zip(cy).map(|(x, y)| [x, y]));
        }
        Some((res, jac))
    }

    /// Gradient of [`Localizer::neg_log_likelihood`] with respect to `r`.
    pub fn neg_log_likelihood_gradient(&self, q: &HybridMeasurement, r: [f64; 2]) -> Result<[f64; 2]> {
        self.check(q)?;
        let (res, jac) = self
            .linearize(q, r)
            .ok_or_else(|| invalid("gradient is undefined at a sensor position"))?;
        let mut g = [0.0; 2];
        for (e, j) in res.iter().zip(&jac) {
            g[0] -= j[0] * e;
            g[1] -= j[1] * e;
        }
        Ok(g)
    }

    // Undamped Gauss-Newton step from `r`; `None` if the normal matrix is
    // singular or `r` sits on a sensor.
    fn gauss_newton_step(&self, q: &HybridMeasurement, r: [f64; 2]) -> Option<[f64; 2]> {
        let (res, jac) = self.linearize(q, r)?;
        let (mut h00, mut h01, mut h11, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (e, j) in res.iter().zip(&jac) {
            h00 += j[0] * j[0];
            h01 += j[0] * j[1];
            h11 += j[1] * j[1];
            g0 += j[0] * e;
            g1 += j[1] * e;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > 1e-14 * (h00 * h11).max(f64::MIN_POSITIVE)) {
            return None;
        }
        Some([(h11 * g0 - h01 * g1) / det, (h00 * g1 - h01 * g0) / det])
    }

    fn table(&self, grid: &GridSpec) -> GridTable {
        let m = self.num_sensors();
        let n = grid.resolution * grid.resolution;
        let mut t = GridTable {
            grid: *grid,
            d: Vec::with_capacity(n * m),
            log_d: Vec::with_capacity(n * m),
            bearing: Vec::with_capacity(n * m),
        };
        for p in grid.points() {
            for s in &self.sensors {
                let (dx, dy) = (p[0] - s[0], p[1] - s[1]);
                let d = dx.hypot(dy);
                t.d.push(d);
                t.log_d.push(d.ln());
                t.bearing.push(dy.atan2(dx));
            }
        }
        t
    }

    /// Grid search followed by one Gauss-Newton step, which is discarded if
    /// it increases the likelihood.
    pub fn estimate(&self, q: &HybridMeasurement, grid: &GridSpec) -> Result<EstimateResult> {
        self.check(q)?;
        self.estimate_on(q, &self.table(grid))
    }

    fn estimate_on(&self, q: &HybridMeasurement, t: &GridTable) -> Result<EstimateResult> {
        let m = self.num_sensors();
        let mut buf = vec![0.0; m];
        let mut best = (f64::INFINITY, 0);
        for k in 0..t.grid.resolution * t.grid.resolution {
            let s = k * m..(k + 1) * m;
            let v = self.nll_at(q, &t.d[s.clone()], &t.log_d[s.clone()], &t.bearing[s], &mut buf);
            if v < best.0 {
                best = (v, k);
            }
        }
        if !best.0.is_finite() {
            return Err(Error::EstimationFailed(
                "likelihood is infinite on the whole grid".into(),
            ));
        }
        let res = t.grid.resolution;
        let r0 = t.grid.point(best.1 % res, best.1 / res);
        let mut out = EstimateResult {
            r_hat: r0,
            nll: best.0,
            grid_argmin: r0,
            grid_nll: best.0,
            step_norm: 0.0,
            step_accepted: false,
        };
        if let Some(delta) = self.gauss_newton_step(q, r0) {
            let r1 = [r0[0] + delta[0], r0[1] + delta[1]];
            out.step_norm = delta[0].hypot(delta[1]);
            let v1 = self.neg_log_likelihood(q, r1)?;
            if v1 <= best.0 {
                out.r_hat = r1;
                out.nll = v1;
                out.step_accepted = true;
            }
        }
        Ok(out)
    }
}

/// Negative log-likelihood of `q` at candidate `r`; see [`Localizer`].
pub fn neg_log_likelihood(
    q: &HybridMeasurement,
    r: [f64; 2],
    sensors: &[Vec<f64>],
    noise: &NoiseModel,
    constants: &ModelConstants,
) -> Result<f64> {
    Localizer::new(sensors, noise, constants)?.neg_log_likelihood(q, r)
}

/// MLE of the target position from `q`: grid argmin plus one Gauss-Newton step.
pub fn mle_estimate(
    q: &HybridMeasurement,
    sensors: &[Vec<f64>],
    noise: &NoiseModel,
    constants: &ModelConstants,
    grid: &GridSpec,
) -> Result<EstimateResult> {
    Localizer::new(sensors, noise, constants)?.estimate(q, grid)
}

/// Reports with more failed trials than this fraction are flagged invalid.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

/// Monte-Carlo mean squared localization error.
#[derive(Clone, Debug, PartialEq)]
pub struct MseReport {
    pub trials: usize,
    pub seed: u64,
    /// Mean of `squared_errors`.
    pub mse: f64,
    /// `||r_hat - r||^2` of every successful trial, in trial order.
    pub squared_errors: Vec<f64>,
    /// Indices of trials whose estimate failed.
    pub failed_trials: Vec<usize>,
    /// More than [`MAX_FAILURE_FRACTION`] of the trials failed.
    pub invalid: bool,
}

impl MseReport {
    /// Standard error of `mse`.
    pub fn standard_error(&self) -> f64 {
        standard_error(&self.squared_errors)
    }
}

fn kahan_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0, 0.0);
    for x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

fn mean(xs: &[f64]) -> f64 {
    kahan_sum(xs.iter().copied()) / xs.len() as f64
}

fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let mu = mean(xs);
    let var = kahan_sum(xs.iter().map(|x| (x - mu) * (x - mu))) / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Estimates the MSE of the MLE for `placement` (whose target is the true
/// position) over `trials` noisy measurements.
///
/// Trial `t` draws from ChaCha20 seeded with `seed` on stream `t`, so results
/// do not depend on scheduling, and two placements evaluated with the same
/// seed and noise model see the same standardized noise.
pub fn monte_carlo_mse(
    placement: &TargetSensorConfig,
    noise: &NoiseModel,
    constants: &ModelConstants,
    trials: usize,
    grid: &GridSpec,
    seed: u64,
) -> Result<MseReport> {
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    if placement.dimension() != 2 {
        return Err(Error::Unsupported("the MLE grid search is 2D only".into()));
    }
    let sampler = MeasurementSampler::new(placement, constants, noise)?;
    let loc = Localizer::new(placement.sensors(), noise, constants)?;
    let table = loc.table(grid);
    let r = placement.target();

    let outcomes: Vec<Result<Option<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let q = sampler.sample(&mut rng);
            match loc.estimate_on(&q, &table) {
                Ok(e) => Ok(Some((e.r_hat[0] - r[0]).powi(2) + (e.r_hat[1] - r[1]).powi(2))),
                Err(Error::EstimationFailed(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut squared_errors = Vec::with_capacity(trials);
    let mut failed_trials = Vec::new();
    for (t, o) in outcomes.into_iter().enumerate() {
        match o? {
            Some(e) => squared_errors.push(e),
            None => failed_trials.push(t),
        }
    }
    if squared_errors.is_empty() {
        return Err(Error::EstimationFailed("every Monte-Carlo trial failed".into()));
    }
    Ok(MseReport {
        trials,
        seed,
        mse: mean(&squared_errors),
        invalid: failed_trials.len() as f64 > MAX_FAILURE_FRACTION * trials as f64,
        squared_errors,
        failed_trials,
    })
}

/// Mean and standard error of the per-trial difference `a - b` of two reports
/// run with the same seed and trial count.
pub fn paired_difference(a: &MseReport, b: &MseReport) -> Result<(f64, f64)> {
    if a.trials != b.trials || a.seed != b.seed || a.failed_trials != b.failed_trials {
        return Err(invalid("paired comparison needs reports over the same trials"));
    }
    let diff: Vec<f64> = a
        .squared_errors
        .iter()
        .zip(&b.squared_errors)
        .map(|(x, y)| x - y)
        .collect();
    Ok((mean(&diff), standard_error(&diff)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{orientation_from_positions, uniform_circle, DistanceProfile};
    use crate::linalg::SymMatrix;
    use crate::models::hybrid_mean;
    use crate::{hybrid_fim, Criterion, DesignProblem};

    fn setup(m: usize, aoa: bool) -> (TargetSensorConfig, NoiseModel, ModelConstants) {
        let cfg = TargetSensorConfig::new(
            vec![0.3, -0.2],
            uniform_circle(&[0.0, 0.0], 1.0, m).unwrap().sensors().to_vec(),
        )
        .unwrap();
        let tau = aoa.then_some(0.5);
        (
            cfg,
            NoiseModel::uniform(m, 1.0, 2.0, tau).unwrap(),
            ModelConstants::from_eta(-4.343).unwrap(),
        )
    }

    fn r_of(cfg: &TargetSensorConfig) -> [f64; 2] {
        [cfg.target()[0], cfg.target()[1]]
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new([0.0, 0.0], 1.0, 2).is_err());
        assert!(GridSpec::new([0.0, 0.0], 0.0, 11).is_err());
        let g = GridSpec::new([1.0, 2.0], 1.0, 5).unwrap();
        assert_eq!(g.point(0, 0), [0.0, 1.0]);
        assert_eq!(g.point(2, 2), [1.0, 2.0]);
        assert_eq!(g.point(4, 4), [2.0, 3.0]);
        assert_eq!(g.points().count(), 25);
    }

    #[test]
    fn angle_residual_wraps() {
        assert!((angle_residual(3.0, -3.0) - (6.0 - 2.0 * PI)).abs() < 1e-15);
        assert!((angle_residual(-3.0, 3.0) + (6.0 - 2.0 * PI)).abs() < 1e-15);
        assert_eq!(angle_residual(0.5, 0.25), 0.25);
    }

    #[test]
    fn nll_is_zero_at_the_noiseless_mean() {
        let (cfg, noise, k) = setup(4, true);
        let q = hybrid_mean(&cfg, &k, true).unwrap();
        let v = neg_log_likelihood(&q, r_of(&cfg), cfg.sensors(), &noise, &k).unwrap();
        assert!(v.abs() < 1e-24);
    }

    #[test]
    fn nll_isolates_range_block() {
        let cfg = uniform_circle(&[0.0, 0.0], 1.0, 3).unwrap();
        let noise = NoiseModel::uniform(3, 1.0, 1.0, Some(1.0)).unwrap();
        let k = ModelConstants::from_eta(-4.343).unwrap();
        let mut q = hybrid_mean(&cfg, &k, true).unwrap();
        let dz = [0.1, -0.2, 0.3];
        for (z, e) in q.z.iter_mut().zip(dz) {
            *z += e;
        }
        let v = neg_log_likelihood(&q, [0.0, 0.0], cfg.sensors(), &noise, &k).unwrap();
        let expect = 0.5 * dz.iter().map(|x| x * x).sum::<f64>();
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn nll_is_infinite_at_a_sensor() {
        let (cfg, noise, k) = setup(3, true);
        let q = hybrid_mean(&cfg, &k, true).unwrap();
        let s = &cfg.sensors()[1];
        let v = neg_log_likelihood(&q, [s[0], s[1]], cfg.sensors(), &noise, &k).unwrap();
        assert_eq!(v, f64::INFINITY);
    }

    #[test]
    fn nll_matches_fim_quadratic() {
        for aoa in [false, true] {
            let (cfg, noise, k) = setup(5, aoa);
            let q = hybrid_mean(&cfg, &k, aoa).unwrap();
            let (j, d) = orientation_from_positions(&cfg).unwrap();
            let p = DesignProblem::new(2, d, k, noise.clone(), Criterion::A).unwrap();
            let f = hybrid_fim(&p, &j).unwrap().fim;
            let loc = Localizer::new(cfg.sensors(), &noise, &k).unwrap();
            let r = r_of(&cfg);
            for a in 0..8 {
                let t = a as f64 * PI / 4.0;
                let delta = [1e-3 * t.cos(), 1e-3 * t.sin()];
                let v = loc.neg_log_likelihood(&q, [r[0] + delta[0], r[1] + delta[1]]).unwrap();
                let fd = f.as_matrix().mul_vec(&delta);
                let quad = 0.5 * (delta[0] * fd[0] + delta[1] * fd[1]);
                assert!((v - quad).abs() <= 0.05 * quad, "aoa={aoa} {v} vs {quad}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (cfg, noise, k) = setup(4, true);
        let mut q = hybrid_mean(&cfg, &k, true).unwrap();
        q.z[0] += 0.2;
        q.p[2] -= 0.5;
        q.theta.as_mut().unwrap()[1] += 0.1;
        let loc = Localizer::new(cfg.sensors(), &noise, &k).unwrap();
        for r in [[0.3, -0.2], [-0.4, 0.1], [0.05, 0.6]] {
            let g = loc.neg_log_likelihood_gradient(&q, r).unwrap();
            let h = 1e-6 * (1.0 + r[0].hypot(r[1]));
            for c in 0..2 {
                let (mut a, mut b) = (r, r);
                a[c] += h;
                b[c] -= h;
                let fd = (loc.neg_log_likelihood(&q, a).unwrap() - loc.neg_log_likelihood(&q, b).unwrap()) / (2.0 * h);
                assert!((fd - g[c]).abs() <= 1e-4 * g[c].abs().max(1e-3), "{fd} vs {}", g[c]);
            }
        }
    }

    #[test]
    fn correlated_noise_whitening_matches_inverse() {
        let (cfg, _, k) = setup(3, true);
        let c =
            SymMatrix::new(Matrix::from_rows(&[[1.0, 0.3, 0.1], [0.3, 2.0, -0.4], [0.1, -0.4, 1.5]]).unwrap()).unwrap();
        let noise = NoiseModel::new(c.clone(), c.scale(2.0), Some(c.scale(0.5))).unwrap();
        let mut q = hybrid_mean(&cfg, &k, true).unwrap();
        q.z[1] += 0.3;
        let v = neg_log_likelihood(&q, r_of(&cfg), cfg.sensors(), &noise, &k).unwrap();
        let ci = crate::linalg::inverse(&c).unwrap();
        let e = [0.0, 0.3, 0.0];
        let expect = 0.5 * crate::linalg::dot(&e, &ci.as_matrix().mul_vec(&e));
        assert!((v - expect).abs() < 1e-14);
    }

    #[test]
    fn noiseless_recovery_on_a_centered_grid() {
        let (cfg, noise, k) = setup(4, true);
        let q = hybrid_mean(&cfg, &k, true).unwrap();
        let grid = GridSpec::new(r_of(&cfg), 1.5, 101).unwrap();
        let e = mle_estimate(&q, cfg.sensors(), &noise, &k, &grid).unwrap();
        let r = r_of(&cfg);
        assert!((e.r_hat[0] - r[0]).hypot(e.r_hat[1] - r[1]) < 1e-6);
    }

    #[test]
    fn gauss_newton_refines_an_off_grid_target() {
        let (cfg, noise, k) = setup(4, true);
        let q = hybrid_mean(&cfg, &k, true).unwrap();
        let grid = GridSpec::new([0.0, 0.0], 1.5, 101).unwrap();
        let e = mle_estimate(&q, cfg.sensors(), &noise, &k, &grid).unwrap();
        let r = r_of(&cfg);
        let before = (e.grid_argmin[0] - r[0]).hypot(e.grid_argmin[1] - r[1]);
        let after = (e.r_hat[0] - r[0]).hypot(e.r_hat[1] - r[1]);
        assert!(before <= grid.spacing());
        assert!(e.step_accepted && after <= before * before, "{before} -> {after}");
        assert!(e.nll <= e.grid_nll + 1e-12);
    }

    #[test]
    fn refinement_never_worsens_the_likelihood() {
        let (cfg, noise, k) = setup(3, true);
        let sampler = MeasurementSampler::new(&cfg, &k, &noise.scaled(4.0).unwrap()).unwrap();
        let loc = Localizer::new(cfg.sensors(), &noise, &k).unwrap();
        let grid = GridSpec::new([0.0, 0.0], 1.5, 41).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..50 {
            let e = loc.estimate(&sampler.sample(&mut rng), &grid).unwrap();
            assert!(e.nll <= e.grid_nll + 1e-12);
        }
    }

    #[test]
    fn estimates_are_translation_equivariant() {
        let (cfg, noise, k) = setup(4, true);
        let sampler = MeasurementSampler::new(&cfg, &k, &noise.scaled(0.01).unwrap()).unwrap();
        let q = sampler.sample(&mut ChaCha20Rng::seed_from_u64(9));
        let grid = GridSpec::new([0.0, 0.0], 1.5, 61).unwrap();
        let e = mle_estimate(&q, cfg.sensors(), &noise, &k, &grid).unwrap();
        let off = [12.5, -3.25];
        let moved = cfg.translated(&off).unwrap();
        let e2 = mle_estimate(&q, moved.sensors(), &noise, &k, &grid.translated(off)).unwrap();
        for ((a, b), o) in e2.r_hat.iter().zip(e.r_hat).zip(off) {
            assert!((a - b - o).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let (cfg, noise, k) = setup(3, true);
        let q = hybrid_mean(&cfg, &k, false).unwrap();
        assert!(neg_log_likelihood(&q, [0.0, 0.0], cfg.sensors(), &noise, &k).is_err());
        let s3 = vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        assert!(matches!(Localizer::new(&s3, &noise, &k), Err(Error::Unsupported(_))));
        let d = DistanceProfile::uniform(3, 1.0).unwrap();
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn zero_noise_limit_has_negligible_mse() {
        let (cfg, noise, k) = setup(3, true);
        let grid = GridSpec::new(r_of(&cfg), 1.5, 61).unwrap();
        let rep = monte_carlo_mse(&cfg, &noise.scaled(1e-12).unwrap(), &k, 20, &grid, 1).unwrap();
        assert!(rep.mse < 1e-10 && !rep.invalid);
    }

    #[test]
    fn report_is_reproducible_and_consistent() {
        let (cfg, noise, k) = setup(3, true);
        let grid = GridSpec::new([0.0, 0.0], 1.5, 41).unwrap();
        let a = monte_carlo_mse(&cfg, &noise, &k, 30, &grid, 5).unwrap();
        let b = monte_carlo_mse(&cfg, &noise, &k, 30, &grid, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mse, mean(&a.squared_errors));
        let (d, se) = paired_difference(&a, &b).unwrap();
        assert_eq!((d, se), (0.0, 0.0));
    }

    #[test]
    fn kahan_sum_is_compensated() {
        let xs = std::iter::once(1.0).chain(std::iter::repeat_n(1e-16, 10_000));
        assert!((kahan_sum(xs) - (1.0 + 1e-12)).abs() < 1e-15);
    }
}
