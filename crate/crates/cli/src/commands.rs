//! The four commands. Each reads a [`LoadedConfig`], writes its documents
//! into an output directory and reports an [`Outcome`].

use std::path::{Path, PathBuf};

use osp_core::estimator::{monte_carlo_mse, GridSpec};
use osp_core::geometry::{
    balance_signs, orientation_from_positions, positions_from_orientation, uniform_circle, Angles, ROW_UNIT_TOL,
};
use osp_core::linalg::norm;
use osp_core::mm::{solve, DesignResult, Status};
use osp_core::oracle::{brute_force_design, grid_slack};
use osp_core::{hybrid_fim, DesignProblem, Orientation, TargetSensorConfig};
use serde::{Deserialize, Serialize};

use crate::config::{random_orientation, read_matrix, LoadedConfig, PlacementSpec, RunConfig};
use crate::output::{fmt_f64, to_toml, trace_csv, write_atomic};
use crate::{CliError, FORMAT_VERSION};

/// Rows further than this from unit norm are rejected by `evaluate`.
pub const ROW_REJECT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    MaxIterations,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Converged => crate::exit::CONVERGED,
            Self::MaxIterations => crate::exit::MAX_ITERATIONS,
        }
    }
}

/// Options shared by every command.
#[derive(Clone, Debug)]
pub struct RunArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl RunArgs {
    fn load(&self) -> Result<LoadedConfig, CliError> {
        let mut loaded = LoadedConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            loaded.config.seed = seed;
        }
        Ok(loaded)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionValues {
    pub a: f64,
    pub d: f64,
    pub e: f64,
}

fn criterion_values(problem: &DesignProblem, j: &Orientation) -> Result<CriterionValues, CliError> {
    let f = hybrid_fim(problem, j)?;
    Ok(CriterionValues { a: f.a, d: f.d, e: f.e })
}

fn rows(j: &Orientation) -> Vec<Vec<f64>> {
    (0..j.num_sensors()).map(|i| j.row(i).to_vec()).collect()
}

/// Azimuths (2D) or `[azimuth, elevation]` pairs (3D) in radians.
fn angle_rows(j: &Orientation) -> Vec<Vec<f64>> {
    match j.angles() {
        Angles::Planar(a) => a.into_iter().map(|x| vec![x]).collect(),
        Angles::Spherical(a) => a.into_iter().map(|(az, el)| vec![az, el]).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub format_version: u32,
    pub command: String,
    pub status: String,
    pub seed: u64,
    pub criterion: String,
    pub value: f64,
    pub outer_iterations: usize,
    pub rejected_steps: usize,
    pub perturbed: bool,
    pub all_criteria: CriterionValues,
    pub orientation: Vec<Vec<f64>>,
    pub angles: Vec<Vec<f64>>,
    /// Sensor positions at the problem's distances around its target.
    pub positions: Vec<Vec<f64>>,
    pub config: RunConfig,
}

/// Runs the design solver; returns the result alongside the outcome so
/// callers can reuse it.
pub fn design(args: &RunArgs, timing: bool) -> Result<(Outcome, DesignResult), CliError> {
    let loaded = args.load()?;
    let problem = loaded.problem()?;
    let init = loaded.initial_orientation(&problem)?;
    let opts = loaded.solver_options()?;
    let result = solve(&problem, &init, &opts).map_err(CliError::from)?;
    let target = loaded.target()?;
    let positions = positions_from_orientation(&result.orientation, problem.distances(), &target)?;

    let outcome = match result.status {
        Status::Converged => Outcome::Converged,
        Status::MaxIterations => Outcome::MaxIterations,
    };
    let report = DesignReport {
        format_version: FORMAT_VERSION,
        command: "design".into(),
        status: match outcome {
            Outcome::Converged => "converged".into(),
            Outcome::MaxIterations => "max_iterations".into(),
        },
        seed: loaded.config.seed,
        criterion: problem.criterion().to_string(),
        value: result.criterion(),
        outer_iterations: result.outer_iterations(),
        rejected_steps: result.rejected_steps,
        perturbed: result.perturbed,
        all_criteria: criterion_values(&problem, &result.orientation)?,
        orientation: rows(&result.orientation),
        angles: angle_rows(&result.orientation),
        positions: positions.sensors().to_vec(),
        config: loaded.config.clone(),
    };
    write_atomic(&args.out.join("result.toml"), to_toml(&report)?.as_bytes())?;
    write_atomic(&args.out.join("trace.csv"), trace_csv(&result.trace, timing).as_bytes())?;
    Ok((outcome, result))
}

/// Reads an orientation matrix from CSV. Rows within [`ROW_UNIT_TOL`] of unit
/// norm are kept as is, rows within [`ROW_REJECT_TOL`] are re-normalized
/// (reported by the flag), anything further off is rejected.
pub fn read_orientation(path: &Path) -> Result<(Orientation, bool), CliError> {
    let j = read_matrix(path)?;
    let mut worst: f64 = 0.0;
    for i in 0..j.nrows() {
        let dev = (norm(j.row(i)) - 1.0).abs();
        if !(dev <= ROW_REJECT_TOL) {
            return Err(CliError::Config(format!(
                "{}: row {} has norm {} (must be within {ROW_REJECT_TOL} of 1)",
                path.display(),
                i + 1,
                norm(j.row(i))
            )));
        }
        worst = worst.max(dev);
    }
    if worst > ROW_UNIT_TOL {
        Ok((Orientation::normalized(j)?, true))
    } else {
        Ok((Orientation::new(j)?, false))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub format_version: u32,
    pub command: String,
    pub renormalized: bool,
    pub criteria: CriterionValues,
    pub orientation: Vec<Vec<f64>>,
    pub config: RunConfig,
}

/// A, D and E criteria of the orientation stored in `orientation`.
pub fn evaluate(args: &RunArgs, orientation: &Path) -> Result<EvaluateReport, CliError> {
    let loaded = args.load()?;
    let problem = loaded.problem()?;
    let (j, renormalized) = read_orientation(orientation)?;
    if renormalized {
        eprintln!("warning: {} rows re-normalized to unit length", orientation.display());
    }
    if j.num_sensors() != problem.num_sensors() || j.dimension() != problem.dimension() {
        return Err(CliError::Config(format!(
            "orientation is {}x{}, problem is {}x{}",
            j.num_sensors(),
            j.dimension(),
            problem.num_sensors(),
            problem.dimension()
        )));
    }
    let report = EvaluateReport {
        format_version: FORMAT_VERSION,
        command: "evaluate".into(),
        renormalized,
        criteria: criterion_values(&problem, &j)?,
        orientation: rows(&j),
        config: loaded.config.clone(),
    };
    write_atomic(&args.out.join("evaluate.toml"), to_toml(&report)?.as_bytes())?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseDocument {
    pub format_version: u32,
    pub command: String,
    pub placement: String,
    pub trials: usize,
    pub seed: u64,
    pub mse: f64,
    pub standard_error: f64,
    /// `noise_scale * trace(CRLB)` of the evaluated placement.
    pub crlb_trace: f64,
    pub failed_trials: Vec<usize>,
    pub invalid: bool,
    pub true_target: Vec<f64>,
    pub design_target: Vec<f64>,
    pub sensors: Vec<Vec<f64>>,
    pub grid_center: Vec<f64>,
    pub grid_half_width: f64,
    pub grid_resolution: usize,
    pub config: RunConfig,
}

/// Monte-Carlo MSE of the MLE for the configured placement. Writes the
/// report and the per-trial squared errors; a report with too many failed
/// trials is written and then turned into an estimation error.
pub fn mse(args: &RunArgs) -> Result<MseDocument, CliError> {
    let loaded = args.load()?;
    let cfg = &loaded.config;
    let spec = cfg
        .mse
        .as_ref()
        .ok_or_else(|| CliError::Config("the mse command needs an [mse] section".into()))?;
    if cfg.problem.dimension != 2 {
        return Err(CliError::Config("the mse command is 2D only".into()));
    }
    if spec.trials == 0 {
        return Err(CliError::Config("mse.trials must be positive".into()));
    }
    if !(spec.noise_scale > 0.0 && spec.noise_scale.is_finite()) {
        return Err(CliError::Config(format!(
            "mse.noise_scale must be positive, got {}",
            spec.noise_scale
        )));
    }
    let problem = loaded.problem()?;
    let m = problem.num_sensors();
    let true_target = loaded.target()?;
    let design_target = match &spec.design_target {
        Some(t) if t.len() != 2 => return Err(CliError::Config("mse.design_target needs 2 coordinates".into())),
        Some(t) => t.clone(),
        None => true_target.clone(),
    };

    let (kind, j) = match &spec.placement {
        PlacementSpec::Designed { balance_signs: balance } => {
            let init = loaded.initial_orientation(&problem)?;
            let result = solve(&problem, &init, &loaded.solver_options()?)?;
            let j = if *balance {
                balance_signs(&result.orientation)
            } else {
                result.orientation
            };
            ("designed", j)
        }
        PlacementSpec::Uniform => (
            "uniform",
            orientation_from_positions(&uniform_circle(&[0.0, 0.0], 1.0, m)?)?.0,
        ),
        PlacementSpec::Random { seed } => ("random", random_orientation(m, 2, seed.unwrap_or(cfg.seed))?),
    };
    let placed = positions_from_orientation(&j, problem.distances(), &design_target)?;
    let truth = TargetSensorConfig::new(true_target.clone(), placed.sensors().to_vec())?;

    let max_d = problem.distances().distances().iter().cloned().fold(0.0, f64::max);
    let center = match &spec.grid.center {
        Some(c) if c.len() != 2 => return Err(CliError::Config("mse.grid.center needs 2 coordinates".into())),
        Some(c) => [c[0], c[1]],
        None => [design_target[0], design_target[1]],
    };
    let grid = GridSpec::new(
        center,
        spec.grid.half_width.unwrap_or(GridSpec::DEFAULT_WIDTH_FACTOR * max_d),
        spec.grid.resolution.unwrap_or(GridSpec::DEFAULT_RESOLUTION),
    )
    .map_err(|e| CliError::Config(format!("mse.grid: {e}")))?;

    let noise = problem.noise().scaled(spec.noise_scale)?;
    let k = problem.constants();
    let report = monte_carlo_mse(&truth, &noise, k, spec.trials, &grid, cfg.seed)?;

    let (jt, dt) = orientation_from_positions(&truth)?;
    let at_truth = DesignProblem::new(2, dt, *k, noise, osp_core::Criterion::A)?;
    let crlb_trace = hybrid_fim(&at_truth, &jt).map(|f| f.a).unwrap_or(f64::INFINITY);

    let doc = MseDocument {
        format_version: FORMAT_VERSION,
        command: "mse".into(),
        placement: kind.into(),
        trials: report.trials,
        seed: report.seed,
        mse: report.mse,
        standard_error: report.standard_error(),
        crlb_trace,
        failed_trials: report.failed_trials.clone(),
        invalid: report.invalid,
        true_target,
        design_target,
        sensors: truth.sensors().to_vec(),
        grid_center: grid.center().to_vec(),
        grid_half_width: grid.half_width(),
        grid_resolution: grid.resolution(),
        config: cfg.clone(),
    };
    write_atomic(&args.out.join("mse.toml"), to_toml(&doc)?.as_bytes())?;
    let mut csv = String::from("trial,squared_error\n");
    let failed: std::collections::BTreeSet<usize> = report.failed_trials.iter().copied().collect();
    let mut errs = report.squared_errors.iter();
    for t in (0..report.trials).filter(|t| !failed.contains(t)) {
        csv.push_str(&format!(
            "{t},{}\n",
            fmt_f64(*errs.next().expect("one error per successful trial"))
        ));
    }
    write_atomic(&args.out.join("mse_errors.csv"), csv.as_bytes())?;
    if report.invalid {
        return Err(CliError::Estimation(format!(
            "{} of {} trials failed",
            report.failed_trials.len(),
            report.trials
        )));
    }
    Ok(doc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteForceReport {
    pub format_version: u32,
    pub command: String,
    pub resolution_deg: f64,
    pub points_per_angle: usize,
    pub criterion: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_slack: Option<f64>,
    pub orientation: Vec<Vec<f64>>,
    pub angles: Vec<Vec<f64>>,
    pub config: RunConfig,
}

/// Exhaustive angle-grid search (2D, at most three sensors).
pub fn bruteforce(args: &RunArgs, resolution_deg: f64, with_slack: bool) -> Result<BruteForceReport, CliError> {
    let loaded = args.load()?;
    let problem = loaded.problem()?;
    let res = brute_force_design(&problem, resolution_deg)?;
    let slack = with_slack.then(|| grid_slack(&problem, resolution_deg)).transpose()?;
    let report = BruteForceReport {
        format_version: FORMAT_VERSION,
        command: "bruteforce".into(),
        resolution_deg,
        points_per_angle: res.points_per_angle,
        criterion: problem.criterion().to_string(),
        value: res.value,
        grid_slack: slack,
        orientation: rows(&res.orientation),
        angles: angle_rows(&res.orientation),
        config: loaded.config.clone(),
    };
    write_atomic(&args.out.join("bruteforce.toml"), to_toml(&report)?.as_bytes())?;
    Ok(report)
}
