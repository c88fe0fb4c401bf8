use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use osp_cli::commands::{BruteForceReport, DesignReport, EvaluateReport, MseDocument};
use osp_cli::config::{LoadedConfig, RunConfig};
use osp_cli::output::TRACE_HEADER;
use osp_core::geometry::{orientation_from_positions, uniform_circle};
use osp_core::hybrid_fim;

const UNIFORM_NOISE: &str = r#"
[problem.noise]
toa = { kind = "uniform", variance = 1.0 }
rss = { kind = "uniform", variance = 1.0 }
aoa = { kind = "uniform", variance = 1.0 }
"#;

fn problem(m: usize, distance: f64, criterion: &str) -> String {
    format!(
        "seed = 3\n\n[problem]\ndimension = 2\ncriterion = \"{criterion}\"\n\
         geometry = {{ kind = \"uniform\", sensors = {m}, distance = {distance} }}\n\
         constants = {{ eta = -4.343 }}\n{UNIFORM_NOISE}"
    )
}

fn osp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osp"))
        .args(args)
        .output()
        .expect("osp runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn run(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> Output {
    let out = dir.join("out");
    let mut args = vec![cmd, "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    osp(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn design_reproduces_the_five_sensor_uniform_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!("{}\n[solver.init]\nkind = \"random\"\n", problem(5, 1.0, "A")),
    );
    let o = run(dir.path(), "design", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: DesignReport =
        toml::from_str(&fs::read_to_string(dir.path().join("out/result.toml")).unwrap()).unwrap();
    assert_eq!(report.format_version, 1);
    assert_eq!(report.status, "converged");
    assert!((report.value - 0.0383).abs() <= 5e-4, "{}", report.value);
    assert_eq!(report.orientation.len(), 5);
    let trace = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some(TRACE_HEADER));
    let values: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), report.outer_iterations + 1);
    assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn echoed_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[solver]\nouter_tol = 1e-4\n\n[solver.init]\nkind = \"azimuths\"\nazimuths = [0.1, 1.0, 2.5]\n\n\
         [mse]\ntrials = 5\nplacement = {{ kind = \"random\", seed = 9 }}\ngrid = {{ resolution = 51 }}\n",
        problem(3, 2.0, "D")
    );
    let cfg = write(dir.path(), "run.toml", &text);
    let original = LoadedConfig::load(Path::new(&cfg)).unwrap().config;
    let o = run(dir.path(), "design", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: DesignReport =
        toml::from_str(&fs::read_to_string(dir.path().join("out/result.toml")).unwrap()).unwrap();
    assert_eq!(report.config, original);
    assert_eq!(RunConfig::from_toml(&report.config.to_toml()).unwrap(), original);
}

#[test]
fn design_is_byte_for_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        "seed = 1\n\n[problem]\ndimension = 2\ncriterion = \"E\"\ngeometry = { kind = \"uniform\", sensors = 4, distance = 10.0 }\n\
         constants = { alpha = 2.0 }\n\n[problem.noise]\ntoa = { kind = \"random_correlated\", seed = 1, floor = 0.1 }\n\
         rss = { kind = \"random_correlated\", seed = 2, floor = 0.1 }\naoa = { kind = \"random_correlated\", seed = 3, floor = 0.1 }\n";
    let cfg = write(dir.path(), "run.toml", text);
    let read = |sub: &str| {
        let out = dir.path().join(sub);
        let o = osp(&[
            "design",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "8",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (
            fs::read(out.join("result.toml")).unwrap(),
            fs::read(out.join("trace.csv")).unwrap(),
        )
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!("{}\n[solver.init]\nkind = \"random\"\n", problem(4, 1.0, "A")),
    );
    let o = run(dir.path(), "design", &cfg, &["--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: DesignReport =
        toml::from_str(&fs::read_to_string(dir.path().join("out/result.toml")).unwrap()).unwrap();
    assert_eq!(report.seed, 42);
    assert_eq!(report.config.seed, 42);
}

#[test]
fn iteration_limit_exits_with_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[solver]\nmax_outer = 1\nouter_tol = 1e-12\n\n[solver.init]\nkind = \"random\"\n",
        problem(5, 1.0, "A")
    );
    let cfg = write(dir.path(), "run.toml", &text);
    let o = run(dir.path(), "design", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let report: DesignReport =
        toml::from_str(&fs::read_to_string(dir.path().join("out/result.toml")).unwrap()).unwrap();
    assert_eq!(report.status, "max_iterations");
}

#[test]
fn non_symmetric_noise_matrix_is_rejected_by_entry() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "toa.csv", "1.0, 0.2, 0.0\n0.2, 1.0, 0.3\n0.0, 0.1, 1.0\n");
    let text = problem(3, 1.0, "A").replace(
        r#"toa = { kind = "uniform", variance = 1.0 }"#,
        r#"toa = { kind = "file", path = "toa.csv" }"#,
    );
    let cfg = write(dir.path(), "run.toml", &text);
    let o = run(dir.path(), "design", &cfg, &[]);
    assert_eq!(o.status.code(), Some(3));
    let msg = stderr(&o);
    assert!(msg.contains("not symmetric") && msg.contains("(3, 2)"), "{msg}");
}

#[test]
fn malformed_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        &problem(3, 1.0, "A").replace("dimension = 2", "dimension = two"),
    );
    let o = run(dir.path(), "design", &cfg, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 4, column 13"), "{}", stderr(&o));
}

#[test]
fn usage_errors_are_configuration_errors() {
    assert_eq!(osp(&["design"]).status.code(), Some(3));
    assert_eq!(osp(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(osp(&["--help"]).status.code(), Some(0));
}

#[test]
fn evaluate_matches_the_direct_fisher_computation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &problem(4, 10.0, "A"));
    write(dir.path(), "cross.csv", "1, 0\n0, 1\n-1, 0\n0, -1\n");
    let o = run(
        dir.path(),
        "evaluate",
        &cfg,
        &["--orientation", dir.path().join("cross.csv").to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: EvaluateReport =
        toml::from_str(&fs::read_to_string(dir.path().join("out/evaluate.toml")).unwrap()).unwrap();
    let problem = LoadedConfig::load(Path::new(&cfg)).unwrap().problem().unwrap();
    let (j, _) = orientation_from_positions(&uniform_circle(&[0.0, 0.0], 10.0, 4).unwrap()).unwrap();
    let direct = hybrid_fim(&problem, &j).unwrap();
    assert!((report.criteria.a - direct.a).abs() <= 1e-14 * direct.a);
    assert!((report.criteria.d - direct.d).abs() <= 1e-14 * direct.d.abs().max(1.0));
    assert!((report.criteria.e - direct.e).abs() <= 1e-14 * direct.e);
    assert!(!report.renormalized);
}

#[test]
fn evaluate_renormalizes_slightly_long_rows_and_rejects_others() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &problem(3, 1.0, "A"));
    let near = write(dir.path(), "near.csv", "1.0000001, 0\n0, 1\n-1, 0\n");
    let o = run(dir.path(), "evaluate", &cfg, &["--orientation", &near]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let far = write(dir.path(), "far.csv", "1.01, 0\n0, 1\n-1, 0\n");
    assert_eq!(
        run(dir.path(), "evaluate", &cfg, &["--orientation", &far])
            .status
            .code(),
        Some(3)
    );
    let short = write(dir.path(), "short.csv", "1, 0\n0, 1\n");
    assert_eq!(
        run(dir.path(), "evaluate", &cfg, &["--orientation", &short])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn equispaced_three_sensor_design_evaluates_to_the_theoretical_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &problem(3, 1.0, "A"));
    let s = 3f64.sqrt() / 2.0;
    let j = write(dir.path(), "j.csv", &format!("1, 0\n-0.5, {s}\n-0.5, {}\n", -s));
    let o = run(dir.path(), "evaluate", &cfg, &["--orientation", &j]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: EvaluateReport =
        toml::from_str(&fs::read_to_string(dir.path().join("out/evaluate.toml")).unwrap()).unwrap();
    let theory = 4.0 / (3.0 * (4.343f64.powi(2) + 2.0));
    assert!((report.criteria.a - theory).abs() <= 1e-12);
}

#[test]
fn bruteforce_matches_the_two_sensor_value_and_refuses_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &problem(2, 1.0, "A"));
    let o = run(dir.path(), "bruteforce", &cfg, &["--slack"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: BruteForceReport =
        toml::from_str(&fs::read_to_string(dir.path().join("out/bruteforce.toml")).unwrap()).unwrap();
    assert_eq!(r.resolution_deg, 1.0);
    assert!((r.value - 0.0959).abs() <= 5e-5 + r.grid_slack.unwrap());

    assert_eq!(
        run(dir.path(), "bruteforce", &cfg, &["--resolution", "0.4"])
            .status
            .code(),
        Some(3)
    );
    let four = write(dir.path(), "four.toml", &problem(4, 1.0, "A"));
    let o = run(dir.path(), "bruteforce", &four, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("at most 3"), "{}", stderr(&o));
}

#[test]
fn mse_is_reproducible_and_accurate_without_noise() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[mse]\ntrials = 20\nplacement = {{ kind = \"designed\" }}\n",
        problem(3, 1.0, "A")
    );
    let cfg = write(dir.path(), "run.toml", &text);
    let read = |sub: &str| {
        let out = dir.path().join(sub);
        let o = osp(&["mse", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (
            fs::read(out.join("mse.toml")).unwrap(),
            fs::read(out.join("mse_errors.csv")).unwrap(),
        )
    };
    let (a, errs) = read("a");
    assert_eq!((a.clone(), errs.clone()), read("b"));
    let doc: MseDocument = toml::from_str(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(doc.trials, 20);
    assert_eq!(String::from_utf8(errs).unwrap().lines().count(), 21);

    let tiny = format!(
        "{}\n[mse]\ntrials = 1\nnoise_scale = 1e-30\nplacement = {{ kind = \"uniform\" }}\n",
        problem(3, 1.0, "A")
    );
    let cfg = write(dir.path(), "tiny.toml", &tiny);
    let o = run(dir.path(), "mse", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: MseDocument = toml::from_str(&fs::read_to_string(dir.path().join("out/mse.toml")).unwrap()).unwrap();
    assert!(doc.mse < 1e-10, "{}", doc.mse);
}

#[test]
fn mse_without_its_section_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &problem(3, 1.0, "A"));
    assert_eq!(run(dir.path(), "mse", &cfg, &[]).status.code(), Some(3));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &problem(3, 1.0, "A"));
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_osp"))
        .args(["design", "--config", &cfg, "--out", out.to_str().unwrap()])
        .env("OSP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}
