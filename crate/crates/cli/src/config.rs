//! Run configuration: a TOML document describing the problem, the solver and
//! the Monte-Carlo campaign. Dense covariance matrices and orientation
//! matrices live in CSV sidecar files referenced by path.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use osp_core::geometry::{orientation_from_positions, uniform_circle, uniform_sphere};
use osp_core::linalg::{Matrix, SymMatrix};
use osp_core::mm::SolverOptions;
use osp_core::models::random_correlated_covariance;
use osp_core::{
    Criterion, DesignProblem, DistanceProfile, ModelConstants, NoiseModel, Orientation, TargetSensorConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds random initializations, random placements, degenerate-start
    /// perturbations and Monte-Carlo trials unless a section sets its own.
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse: Option<MseConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// 2 or 3.
    pub dimension: usize,
    #[serde(with = "criterion_name")]
    pub criterion: Criterion,
    /// Target position; the origin when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    pub geometry: GeometrySpec,
    pub constants: ConstantsSpec,
    pub noise: NoiseSpec,
}

mod criterion_name {
    use osp_core::Criterion;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(c: &Criterion, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(c)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Criterion, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

/// Sensor-target distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    /// `sensors` sensors, all at `distance`.
    Uniform { sensors: usize, distance: f64 },
    /// One distance per sensor.
    Distances { distances: Vec<f64> },
    /// Sensor positions; distances are measured to the target.
    Positions { positions: Vec<Vec<f64>> },
}

/// Exactly one of `eta` and `alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub toa: CovarianceSpec,
    pub rss: CovarianceSpec,
    /// No AOA block when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aoa: Option<CovarianceSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceSpec {
    /// `variance * I`.
    Uniform {
        variance: f64,
    },
    Diagonal {
        variances: Vec<f64>,
    },
    /// Dense row-major CSV matrix, path relative to the config file.
    File {
        path: PathBuf,
    },
    /// `G G^T / m + floor I` with `G` drawn i.i.d. U[0,1].
    RandomCorrelated {
        seed: u64,
        floor: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "defaults::outer_tol")]
    pub outer_tol: f64,
    #[serde(default = "defaults::inner_tol")]
    pub inner_tol: f64,
    #[serde(default = "defaults::max_outer")]
    pub max_outer: usize,
    #[serde(default = "defaults::max_inner")]
    pub max_inner: usize,
    /// Start from a seeded random dual matrix instead of the closed form.
    #[serde(default)]
    pub random_dual_init: bool,
    #[serde(default)]
    pub init: InitSpec,
}

mod defaults {
    use osp_core::mm::SolverOptions;

    pub fn outer_tol() -> f64 {
        SolverOptions::default().outer_tol
    }
    pub fn inner_tol() -> f64 {
        SolverOptions::default().inner_tol
    }
    pub fn max_outer() -> usize {
        SolverOptions::default().max_outer
    }
    pub fn max_inner() -> usize {
        SolverOptions::default().max_inner
    }
    pub fn trials() -> usize {
        1000
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn yes() -> bool {
        true
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_tol: defaults::outer_tol(),
            inner_tol: defaults::inner_tol(),
            max_outer: defaults::max_outer(),
            max_inner: defaults::max_inner(),
            random_dual_init: false,
            init: InitSpec::default(),
        }
    }
}

/// Initial orientation of the design.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Equally spaced on a circle (2D) or spread over a sphere (3D).
    #[default]
    Uniform,
    /// Orientation of the problem's sensor positions.
    Positions,
    /// Azimuths in radians (2D).
    Azimuths { azimuths: Vec<f64> },
    /// Uniformly random directions; the run seed when `seed` is omitted.
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// CSV file with one orientation row per line.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MseConfig {
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    pub placement: PlacementSpec,
    /// Multiplies every covariance when sampling measurements and
    /// evaluating the likelihood.
    #[serde(default = "defaults::one")]
    pub noise_scale: f64,
    /// Target assumed when placing the sensors; the true target when
    /// omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_target: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: GridConfig,
}

/// Sensor placement evaluated by the `mse` command. Sensors sit at the
/// problem's distances from the design target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlacementSpec {
    /// The optimized design, signs balanced around the target.
    Designed {
        #[serde(default = "defaults::yes")]
        balance_signs: bool,
    },
    /// Equally spaced directions.
    Uniform,
    /// I.i.d. uniform directions; the run seed when `seed` is omitted.
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

/// Search grid of the MLE; defaults cover 1.5x the largest distance around
/// the design target with 201 points per axis.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

/// A loaded configuration with sidecar paths resolved against its directory.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let config = RunConfig::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => config_error(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn target(&self) -> Result<Vec<f64>, CliError> {
        let n = self.config.problem.dimension;
        if n != 2 && n != 3 {
            return Err(config_error(format!("problem.dimension must be 2 or 3, got {n}")));
        }
        match &self.config.problem.target {
            Some(t) if t.len() != n => Err(config_error(format!(
                "problem.target has {} coordinates, dimension is {n}",
                t.len()
            ))),
            Some(t) => Ok(t.clone()),
            None => Ok(vec![0.0; n]),
        }
    }

    pub fn distances(&self) -> Result<DistanceProfile, CliError> {
        let d = match &self.config.problem.geometry {
            GeometrySpec::Uniform { sensors, distance } => DistanceProfile::uniform(*sensors, *distance),
            GeometrySpec::Distances { distances } => DistanceProfile::new(distances.clone()),
            GeometrySpec::Positions { .. } => return Ok(orientation_from_positions(&self.positions()?)?.1),
        };
        d.map_err(|e| config_error(format!("problem.geometry: {e}")))
    }

    /// Sensor positions of a `positions` geometry.
    fn positions(&self) -> Result<TargetSensorConfig, CliError> {
        match &self.config.problem.geometry {
            GeometrySpec::Positions { positions } => TargetSensorConfig::new(self.target()?, positions.clone())
                .map_err(|e| config_error(format!("problem.geometry.positions: {e}"))),
            _ => Err(config_error(
                "solver.init kind \"positions\" needs a positions geometry",
            )),
        }
    }

    pub fn constants(&self) -> Result<ModelConstants, CliError> {
        let c = &self.config.problem.constants;
        let k = match (c.eta, c.alpha) {
            (Some(eta), None) => ModelConstants::from_eta(eta),
            (None, Some(alpha)) => ModelConstants::with_alpha(alpha),
            _ => return Err(config_error("problem.constants needs exactly one of eta and alpha")),
        };
        k.map_err(|e| config_error(format!("problem.constants: {e}")))
    }

    pub fn noise(&self, m: usize) -> Result<NoiseModel, CliError> {
        let n = &self.config.problem.noise;
        let toa = self.covariance("toa", &n.toa, m)?;
        let rss = self.covariance("rss", &n.rss, m)?;
        let aoa = n.aoa.as_ref().map(|s| self.covariance("aoa", s, m)).transpose()?;
        NoiseModel::new(toa, rss, aoa).map_err(|e| config_error(format!("problem.noise: {e}")))
    }

    fn covariance(&self, name: &str, spec: &CovarianceSpec, m: usize) -> Result<SymMatrix, CliError> {
        let ctx = |msg: String| config_error(format!("problem.noise.{name}: {msg}"));
        match spec {
            CovarianceSpec::Uniform { variance } => Ok(SymMatrix::from_diag(&vec![*variance; m])),
            CovarianceSpec::Diagonal { variances } => {
                if variances.len() != m {
                    return Err(ctx(format!("{} variances for {m} sensors", variances.len())));
                }
                Ok(SymMatrix::from_diag(variances))
            }
            CovarianceSpec::File { path } => {
                let full = self.resolve(path);
                let mat = read_matrix(&full)?;
                if mat.nrows() != m || mat.ncols() != m {
                    return Err(ctx(format!(
                        "{} holds a {}x{} matrix, expected {m}x{m}",
                        full.display(),
                        mat.nrows(),
                        mat.ncols()
                    )));
                }
                for i in 0..m {
                    for j in 0..i {
                        let (a, b) = (mat[(i, j)], mat[(j, i)]);
                        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                            return Err(ctx(format!(
                                "{} is not symmetric: entry ({}, {}) = {a} but ({}, {}) = {b}",
                                full.display(),
                                i + 1,
                                j + 1,
                                j + 1,
                                i + 1
                            )));
                        }
                    }
                }
                SymMatrix::new(mat).map_err(|e| ctx(e.to_string()))
            }
            CovarianceSpec::RandomCorrelated { seed, floor } => {
                random_correlated_covariance(m, *floor, *seed).map_err(|e| ctx(e.to_string()))
            }
        }
    }

    pub fn problem(&self) -> Result<DesignProblem, CliError> {
        let d = self.distances()?;
        let m = d.len();
        let p = &self.config.problem;
        DesignProblem::new(p.dimension, d, self.constants()?, self.noise(m)?, p.criterion)
            .map_err(|e| config_error(format!("problem: {e}")))
    }

    pub fn solver_options(&self) -> Result<SolverOptions, CliError> {
        let s = &self.config.solver;
        let opts = SolverOptions {
            outer_tol: s.outer_tol,
            inner_tol: s.inner_tol,
            max_outer: s.max_outer,
            max_inner: s.max_inner,
            seed: s.random_dual_init.then_some(self.config.seed),
            ..SolverOptions::default()
        };
        if !(opts.outer_tol > 0.0 && opts.inner_tol > 0.0) || opts.max_outer == 0 || opts.max_inner == 0 {
            return Err(config_error("solver tolerances and iteration caps must be positive"));
        }
        Ok(opts)
    }

    pub fn initial_orientation(&self, problem: &DesignProblem) -> Result<Orientation, CliError> {
        let n = problem.dimension();
        let m = problem.num_sensors();
        let ctx = |e: osp_core::Error| config_error(format!("solver.init: {e}"));
        let j = match &self.config.solver.init {
            InitSpec::Uniform => {
                let origin = vec![0.0; n];
                let cfg = if n == 2 {
                    uniform_circle(&origin, 1.0, m)
                } else {
                    uniform_sphere(&origin, 1.0, m)
                };
                orientation_from_positions(&cfg.map_err(ctx)?).map_err(ctx)?.0
            }
            InitSpec::Positions => orientation_from_positions(&self.positions()?).map_err(ctx)?.0,
            InitSpec::Azimuths { azimuths } => {
                if n != 2 {
                    return Err(config_error("solver.init: azimuths need a 2D problem"));
                }
                Orientation::from_azimuths(azimuths).map_err(ctx)?
            }
            InitSpec::Random { seed } => random_orientation(m, n, seed.unwrap_or(self.config.seed)).map_err(ctx)?,
            InitSpec::File { path } => {
                let full = self.resolve(path);
                crate::commands::read_orientation(&full)?.0
            }
        };
        if j.num_sensors() != m || j.dimension() != n {
            return Err(config_error(format!(
                "solver.init: orientation is {}x{}, problem needs {m}x{n}",
                j.num_sensors(),
                j.dimension()
            )));
        }
        Ok(j)
    }
}

/// Uniformly random unit rows: uniform azimuths in 2D, normalized Gaussian
/// vectors in 3D.
pub fn random_orientation(m: usize, n: usize, seed: u64) -> osp_core::Result<Orientation> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    if n == 2 {
        let az: Vec<f64> = (0..m).map(|_| rng.random_range(-PI..PI)).collect();
        return Orientation::from_azimuths(&az);
    }
    let data: Vec<f64> = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
    Orientation::normalized(Matrix::from_row_major(m, n, data))
}

/// Reads a dense matrix from a CSV file: one row per line, entries separated
/// by commas, blank lines and `#` comments ignored.
pub fn read_matrix(path: &Path) -> Result<Matrix, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, s)| {
                s.parse::<f64>().map_err(|_| {
                    config_error(format!(
                        "{}:{line}: column {} is not a number: {s:?}",
                        path.display(),
                        c + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(config_error(format!("{} holds no rows", path.display())));
    }
    Matrix::from_rows(&rows).map_err(|e| config_error(format!("{}: {e}", path.display())))
}
