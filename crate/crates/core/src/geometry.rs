//! Target/sensor configurations and the orientation-matrix view of them.
//!
//! Row `i` of the orientation matrix is the unit vector pointing from sensor
//! `i` towards the target. Together with the sensor-target distances it
//! carries everything the Fisher information depends on.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{norm, Matrix};

/// Tolerance on `| ||j_i|| - 1 |` accepted when constructing an [`Orientation`].
pub const ROW_UNIT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TargetSensorConfig {
    target: Vec<f64>,
    sensors: Vec<Vec<f64>>,
}

impl TargetSensorConfig {
    pub fn new(target: Vec<f64>, sensors: Vec<Vec<f64>>) -> Result<Self> {
        let n = target.len();
        if n != 2 && n != 3 {
            return Err(invalid(format!("dimension must be 2 or 3, got {n}")));
        }
        if sensors.len() < 2 {
            return Err(invalid(format!(
                "at least two sensors are required, got {}",
                sensors.len()
            )));
        }
        for (i, s) in sensors.iter().enumerate() {
            if s.len() != n {
                return Err(invalid(format!("sensor {i} has dimension {}, target has {n}", s.len())));
            }
            if !s.iter().chain(&target).all(|x| x.is_finite()) {
                return Err(invalid(format!("sensor {i} or target is not finite")));
            }
            if distance(&target, s) == 0.0 {
                return Err(Error::DegenerateGeometry { index: i });
            }
        }
        Ok(Self { target, sensors })
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn sensors(&self) -> &[Vec<f64>] {
        &self.sensors
    }

    pub fn dimension(&self) -> usize {
        self.target.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    /// Same sensors, different target (used for mismatch studies).
    pub fn with_target(&self, target: Vec<f64>) -> Result<Self> {
        Self::new(target, self.sensors.clone())
    }

    /// Shifts the target and every sensor by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        let shift = |p: &[f64]| p.iter().zip(offset).map(|(a, b)| a + b).collect::<Vec<_>>();
        Self::new(shift(&self.target), self.sensors.iter().map(|s| shift(s)).collect())
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sensor-target distances `d_i` and the diagonal matrix `diag(1/d_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceProfile {
    distances: Vec<f64>,
}

impl DistanceProfile {
    pub fn new(distances: Vec<f64>) -> Result<Self> {
        if distances.is_empty() {
            return Err(invalid("distance profile is empty"));
        }
        if let Some(i) = distances.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(invalid(format!(
                "distance {i} must be positive and finite, got {}",
                distances[i]
            )));
        }
        Ok(Self { distances })
    }

    pub fn uniform(m: usize, d: f64) -> Result<Self> {
        Self::new(vec![d; m])
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn inverse_distances(&self) -> Vec<f64> {
        self.distances.iter().map(|d| 1.0 / d).collect()
    }

    /// `D = diag(1/d_1, ..., 1/d_m)`.
    pub fn matrix(&self) -> Matrix {
        Matrix::from_diag(&self.inverse_distances())
    }
}

/// The m x n orientation matrix with unit-norm rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Orientation {
    j: Matrix,
}

/// Angle view of an orientation.
#[derive(Clone, Debug, PartialEq)]
pub enum Angles {
    /// Azimuths in `(-pi, pi]`.
    Planar(Vec<f64>),
    /// `(azimuth, elevation)` pairs; elevation in `[-pi/2, pi/2]`.
    Spherical(Vec<(f64, f64)>),
}

impl Orientation {
    /// Validates that every row is unit-norm within [`ROW_UNIT_TOL`].
    pub fn new(j: Matrix) -> Result<Self> {
        let n = j.ncols();
        if n != 2 && n != 3 {
            return Err(invalid(format!("orientation must have 2 or 3 columns, got {n}")));
        }
        if j.nrows() == 0 {
            return Err(invalid("orientation has no rows"));
        }
        for i in 0..j.nrows() {
            let r = norm(j.row(i));
            if !((r - 1.0).abs() <= ROW_UNIT_TOL) {
                return Err(invalid(format!(
                    "orientation row {i} has norm {r}, expected 1 within {ROW_UNIT_TOL:e}"
                )));
            }
        }
        Ok(Self { j })
    }

    /// Normalizes every row; fails only on zero or non-finite rows.
    pub fn normalized(mut j: Matrix) -> Result<Self> {
        for i in 0..j.nrows() {
            let r = norm(j.row(i));
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid(format!("orientation row {i} cannot be normalized")));
            }
            j.row_mut(i).iter_mut().for_each(|x| *x /= r);
        }
        Self::new(j)
    }

    pub fn from_azimuths(theta: &[f64]) -> Result<Self> {
        let rows: Vec<[f64; 2]> = theta.iter().map(|t| [t.cos(), t.sin()]).collect();
        Self::new(Matrix::from_rows(&rows)?)
    }

    /// Rows `(cos(phi) cos(theta), cos(phi) sin(theta), sin(phi))`.
    pub fn from_spherical(angles: &[(f64, f64)]) -> Result<Self> {
        let rows: Vec<[f64; 3]> = angles
            .iter()
            .map(|&(t, p)| [p.cos() * t.cos(), p.cos() * t.sin(), p.sin()])
            .collect();
        Self::new(Matrix::from_rows(&rows)?)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.j
    }

    pub fn into_matrix(self) -> Matrix {
        self.j
    }

    pub fn num_sensors(&self) -> usize {
        self.j.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.j.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.j.row(i)
    }

    pub fn angles(&self) -> Angles {
        angles_from_orientation(self)
    }
}

/// Orientation rows `(r - s_i)/||r - s_i||` and distances `||r - s_i||`.
pub fn orientation_from_positions(cfg: &TargetSensorConfig) -> Result<(Orientation, DistanceProfile)> {
    let n = cfg.dimension();
    let mut j = Matrix::zeros(cfg.num_sensors(), n);
    let mut d = Vec::with_capacity(cfg.num_sensors());
    for (i, s) in cfg.sensors().iter().enumerate() {
        let di = distance(cfg.target(), s);
        if di == 0.0 {
            return Err(Error::DegenerateGeometry { index: i });
        }
        for k in 0..n {
            j[(i, k)] = (cfg.target()[k] - s[k]) / di;
        }
        d.push(di);
    }
    Ok((Orientation::new(j)?, DistanceProfile::new(d)?))
}

/// Sensor positions `s_i = target - d_i j_i`.
pub fn positions_from_orientation(j: &Orientation, d: &DistanceProfile, target: &[f64]) -> Result<TargetSensorConfig> {
    if d.len() != j.num_sensors() {
        return Err(invalid(format!(
            "{} distances for {} orientation rows",
            d.len(),
            j.num_sensors()
        )));
    }
    if target.len() != j.dimension() {
        return Err(invalid(format!(
            "target has dimension {}, orientation has {}",
            target.len(),
            j.dimension()
        )));
    }
    let sensors = (0..j.num_sensors())
        .map(|i| {
            j.row(i)
                .iter()
                .zip(target)
                .map(|(u, t)| t - d.distances()[i] * u)
                .collect()
        })
        .collect();
    TargetSensorConfig::new(target.to_vec(), sensors)
}

/// Largest sensor count for which [`balance_signs`] searches all sign
/// patterns; beyond it signs are chosen greedily row by row.
pub const MAX_EXHAUSTIVE_SIGNS: usize = 16;

/// Flips rows of `j` so that the resultant `||sum_i j_i||` is as small as
/// possible.
///
/// Every information term depends on `j_i` only through `j_i j_i^T`, so
/// moving a sensor to the opposite side of the target leaves the FIM
/// unchanged. This picks the representative with the sensors spread around
/// the target. Ties go to the smallest flip pattern (row 0 is bit 0).
pub fn balance_signs(j: &Orientation) -> Orientation {
    let m = j.num_sensors();
    let n = j.dimension();
    let resultant = |flip: &dyn Fn(usize) -> bool| {
        let mut s = vec![0.0; n];
        for i in 0..m {
            let sign = if flip(i) { -1.0 } else { 1.0 };
            s.iter_mut().zip(j.row(i)).for_each(|(a, b)| *a += sign * b);
        }
        norm(&s)
    };
    let flips: Vec<bool> = if m <= MAX_EXHAUSTIVE_SIGNS {
        let mut best = (resultant(&|_| false), 0u32);
        for mask in 1..(1u32 << m) {
            let v = resultant(&|i| mask >> i & 1 == 1);
            if v < best.0 - 1e-12 {
                best = (v, mask);
            }
        }
        (0..m).map(|i| best.1 >> i & 1 == 1).collect()
    } else {
        let mut s = vec![0.0; n];
        let mut flips = Vec::with_capacity(m);
        for i in 0..m {
            let row = j.row(i);
            let plus: f64 = s.iter().zip(row).map(|(a, b)| (a + b) * (a + b)).sum();
            let minus: f64 = s.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
            let flip = minus < plus;
            let sign = if flip { -1.0 } else { 1.0 };
            s.iter_mut().zip(row).for_each(|(a, b)| *a += sign * b);
            flips.push(flip);
        }
        if resultant(&|i| flips[i]) < resultant(&|_| false) {
            flips
        } else {
            vec![false; m]
        }
    };
    let mut out = j.matrix().clone();
    for (i, _) in flips.iter().enumerate().filter(|(_, &f)| f) {
        out.row_mut(i).iter_mut().for_each(|x| *x = -*x);
    }
    Orientation { j: out }
}

/// Azimuth (and elevation in 3D) of every orientation row.
///
/// At the poles (`cos(phi) == 0`) the azimuth is reported as 0.
pub fn angles_from_orientation(j: &Orientation) -> Angles {
    let rows = 0..j.num_sensors();
    if j.dimension() == 2 {
        Angles::Planar(rows.map(|i| azimuth(j.row(i)[1], j.row(i)[0])).collect())
    } else {
        Angles::Spherical(
            rows.map(|i| {
                let r = j.row(i);
                let horizontal = r[0].hypot(r[1]);
                let phi = r[2].clamp(-1.0, 1.0).asin();
                let theta = if horizontal == 0.0 { 0.0 } else { azimuth(r[1], r[0]) };
                (theta, phi)
            })
            .collect(),
        )
    }
}

// atan2 mapped onto (-pi, pi]
fn azimuth(y: f64, x: f64) -> f64 {
    let t = y.atan2(x);
    if t == -PI {
        PI
    } else {
        t
    }
}

/// Sensors equally spaced on a circle around `target`, sensor `i` at angle
/// `2 pi i / m`. With `m = 4` this is the axis-aligned cross.
pub fn uniform_circle(target: &[f64], radius: f64, m: usize) -> Result<TargetSensorConfig> {
    if target.len() != 2 {
        return Err(invalid("uniform_circle needs a 2D target"));
    }
    let sensors = (0..m)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / m as f64;
            vec![target[0] + radius * a.cos(), target[1] + radius * a.sin()]
        })
        .collect();
    TargetSensorConfig::new(target.to_vec(), sensors)
}

/// Sensors at i.i.d. uniform angles on a circle around `target`.
pub fn random_circle(target: &[f64], radius: f64, m: usize, seed: u64) -> Result<TargetSensorConfig> {
    if target.len() != 2 {
        return Err(invalid("random_circle needs a 2D target"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sensors = (0..m)
        .map(|_| {
            let a: f64 = rng.random_range(0.0..2.0 * PI);
            vec![target[0] + radius * a.cos(), target[1] + radius * a.sin()]
        })
        .collect();
    TargetSensorConfig::new(target.to_vec(), sensors)
}

/// Sensors spread over a sphere around `target`.
///
/// For `m = 6` this is the axis-aligned arrangement `+-e_x, +-e_y, +-e_z`;
/// other counts use a Fibonacci lattice.
pub fn uniform_sphere(target: &[f64], radius: f64, m: usize) -> Result<TargetSensorConfig> {
    if target.len() != 3 {
        return Err(invalid("uniform_sphere needs a 3D target"));
    }
    let dirs: Vec<[f64; 3]> = if m == 6 {
        vec![
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, -1.0],
        ]
    } else {
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..m)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                let r = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                [r * a.cos(), r * a.sin(), z]
            })
            .collect()
    };
    let sensors = dirs
        .iter()
        .map(|d| (0..3).map(|k| target[k] + radius * d[k]).collect())
        .collect();
    TargetSensorConfig::new(target.to_vec(), sensors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn balance_signs_spreads_sensors() {
        let j = Orientation::from_azimuths(&[0.0, 0.1, -0.1]).unwrap();
        let b = balance_signs(&j);
        // Flipping row 0 and flipping rows 1 and 2 tie; the smaller pattern wins.
        assert_eq!(b.row(0), &[-1.0, -0.0]);
        assert_eq!(b.row(1), j.row(1));
        assert_eq!(b.row(2), j.row(2));
        let uniform = Orientation::from_azimuths(&[0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0]).unwrap();
        assert_eq!(balance_signs(&uniform), uniform);
    }

    #[test]
    fn axis_aligned_sensor() {
        let cfg = TargetSensorConfig::new(vec![0.0, 0.0], vec![vec![-10.0, 0.0], vec![0.0, 5.0]]).unwrap();
        let (j, d) = orientation_from_positions(&cfg).unwrap();
        assert_eq!(j.row(0), &[1.0, 0.0]);
        assert_eq!(d.distances()[0], 10.0);
    }

    #[test]
    fn diagonal_sensor() {
        let cfg = TargetSensorConfig::new(vec![0.0, 0.0], vec![vec![-1.0, -1.0], vec![2.0, 0.0]]).unwrap();
        let (j, d) = orientation_from_positions(&cfg).unwrap();
        assert!((j.row(0)[0] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((j.row(0)[1] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((d.distances()[0] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn uniform_cross_of_radius_ten() {
        let cfg = uniform_circle(&[0.0, 0.0], 10.0, 4).unwrap();
        let (j, d) = orientation_from_positions(&cfg).unwrap();
        let expected = [[-1.0, 0.0], [0.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        for (i, e) in expected.iter().enumerate() {
            assert!((j.row(i)[0] - e[0]).abs() < 1e-15);
            assert!((j.row(i)[1] - e[1]).abs() < 1e-15);
            assert!((d.distances()[i] - 10.0).abs() < 1e-14);
        }
    }

    #[test]
    fn coincident_sensor_is_degenerate() {
        let err = TargetSensorConfig::new(vec![1.0, 1.0], vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap_err();
        assert_eq!(err, Error::DegenerateGeometry { index: 1 });
    }

    #[test]
    fn positions_from_single_row() {
        let j = Orientation::new(Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap()).unwrap();
        let d = DistanceProfile::new(vec![10.0, 1.0]).unwrap();
        let cfg = positions_from_orientation(&j, &d, &[0.0, 0.0]).unwrap();
        assert_eq!(cfg.sensors()[0], vec![-10.0, 0.0]);
    }

    #[test]
    fn unit_distances_put_sensors_on_unit_circle() {
        let j = Orientation::from_azimuths(&[0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0]).unwrap();
        let d = DistanceProfile::uniform(3, 1.0).unwrap();
        let cfg = positions_from_orientation(&j, &d, &[0.0, 0.0]).unwrap();
        for s in cfg.sensors() {
            assert!((norm(s) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn planar_angles() {
        let j = Orientation::new(Matrix::from_rows(&[[1.0, 0.0], [0.0, -1.0], [-1.0, 0.0]]).unwrap()).unwrap();
        match j.angles() {
            Angles::Planar(t) => {
                assert_eq!(t[0], 0.0);
                assert_eq!(t[1], -PI / 2.0);
                assert_eq!(t[2], PI);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn pole_convention() {
        let j = Orientation::new(Matrix::from_rows(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap()).unwrap();
        match j.angles() {
            Angles::Spherical(a) => {
                assert_eq!(a[0], (0.0, PI / 2.0));
                assert_eq!(a[1], (0.0, 0.0));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn rejects_non_unit_rows() {
        let j = Matrix::from_rows(&[[1.0 + 1e-8, 0.0], [0.0, 1.0]]).unwrap();
        assert!(Orientation::new(j).is_err());
    }

    #[test]
    fn six_axis_sphere() {
        let cfg = uniform_sphere(&[0.0, 0.0, 0.0], 10.0, 6).unwrap();
        let (j, _) = orientation_from_positions(&cfg).unwrap();
        let jtj = j.matrix().tr_mul(j.matrix());
        assert!((&jtj - &Matrix::identity(3).scale(2.0)).max_abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn position_round_trip(
            target in proptest::collection::vec(-50.0f64..50.0, 3),
            angles in proptest::collection::vec((-3.1f64..3.1, -1.5f64..1.5), 2..8),
            dists in proptest::collection::vec(0.1f64..100.0, 8),
            planar in any::<bool>(),
        ) {
            let (j, tgt) = if planar {
                let az: Vec<f64> = angles.iter().map(|a| a.0).collect();
                (Orientation::from_azimuths(&az).unwrap(), target[..2].to_vec())
            } else {
                (Orientation::from_spherical(&angles).unwrap(), target.clone())
            };
            let d = DistanceProfile::new(dists[..j.num_sensors()].to_vec()).unwrap();
            let cfg = positions_from_orientation(&j, &d, &tgt).unwrap();
            let (j2, d2) = orientation_from_positions(&cfg).unwrap();
            prop_assert!((j.matrix() - j2.matrix()).max_abs() < 1e-9);
            for (a, b) in d.distances().iter().zip(d2.distances()) {
                prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
            }
            let back = match j.angles() {
                Angles::Planar(t) => Orientation::from_azimuths(&t).unwrap(),
                Angles::Spherical(a) => Orientation::from_spherical(&a).unwrap(),
            };
            prop_assert!((back.matrix() - j.matrix()).max_abs() < 1e-12);
        }

        #[test]
        fn balanced_signs_keep_outer_products(az in proptest::collection::vec(-3.1f64..3.1, 2..20)) {
            let j = Orientation::from_azimuths(&az).unwrap();
            let b = balance_signs(&j);
            prop_assert_eq!((&j.matrix().tr_mul(j.matrix()) - &b.matrix().tr_mul(b.matrix())).max_abs(), 0.0);
            let res = |o: &Orientation| {
                let s: Vec<f64> = (0..2).map(|k| (0..o.num_sensors()).map(|i| o.row(i)[k]).sum()).collect();
                norm(&s)
            };
            prop_assert!(res(&b) <= res(&j) + 1e-12);
        }
    }
}
