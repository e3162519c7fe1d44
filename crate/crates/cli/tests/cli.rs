use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};

use funnel_cli::artifacts::{read_json, OutDir, Table};
use funnel_cli::commands::{self, Context};
use funnel_cli::config::AfterVerdict;
use funnel_cli::pipeline::Setup;
use funnel_cli::svg::{polyline_points, render, PlotKind};
use funnel_cli::sweep::{run_point, sweep};
use funnel_cli::{CliError, RunConfig};
use proptest::prelude::*;

/// Small cylinder run that classifies in a few seconds.
fn quick() -> RunConfig {
    RunConfig {
        dx: 0.5,
        neta: 16,
        ..RunConfig::default()
    }
}

fn funnel_bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_funnel"));
    cmd.stderr(Stdio::null());
    cmd
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

#[test]
fn sections_and_dotted_keys_agree() {
    let a = RunConfig::parse("[geometry]\nR = 2\nalpha_deg = 30 # comment\n[grid]\nneta = 20\n")
        .unwrap();
    let b = RunConfig::parse("geometry.R = 2\ngeometry.alpha_deg = 30\ngrid.neta = 20\n").unwrap();
    assert_eq!(a, b);
    assert_eq!(a.radius, 2.0);
    assert_eq!(a.alpha_deg, 30.0);
    assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
}

#[test]
fn config_errors_name_the_problem() {
    let cases = [
        ("geometry.alpha_deg = 95", "alpha_deg"),
        ("grid.nx = 8", "grid.nx"),
        ("geometry.wobble = 1", "unknown key"),
        ("grid.neta = 20\ngrid.neta = 24", "given twice"),
        ("[grid\nneta = 20", "unterminated"),
        ("model.theta 0.3", "key = value"),
        ("model.theta = 0.6", "model.theta"),
        ("time.scheme = leapfrog", "time.scheme"),
    ];
    for (text, needle) in cases {
        let err = RunConfig::parse(text).unwrap_err();
        assert!(matches!(err, CliError::Config(_)), "{text}");
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains(needle), "{text}: {err}");
    }
}

fn arb_opt(range: std::ops::Range<f64>) -> impl Strategy<Value = Option<f64>> {
    prop::option::of(range)
}

prop_compose! {
    fn arb_config()(
        theta in 0.01f64..0.49,
        n_dim in 2usize..=6,
        radius in 0.01f64..20.0,
        alpha_deg in 0.0f64..89.0,
        l_extra in arb_opt(0.01..30.0),
        l_margin in 0.01f64..1.0,
        x_min in arb_opt(-500.0..-1.5),
        x_max in arb_opt(0.5..800.0),
        nx in prop::option::of(16usize..5000),
        dx in 0.01f64..2.0,
        neta in 16usize..400,
        dt in arb_opt(1e-4..1.0),
        t_end in arb_opt(1.0..2000.0),
        explicit in any::<bool>(),
        observe_interval in 0.01f64..10.0,
        n_start in arb_opt(1.0..100.0),
        history_interval in 0.01f64..10.0,
        front_at in -50.0f64..50.0,
        eps in (0.001f64..0.5, 0.001f64..0.5, 1e-9f64..1e-2),
        probe_radius in arb_opt(0.5..100.0),
        trailing_window in 0.1f64..20.0,
        lambdas in prop::collection::vec(0.01f64..0.99, 1..4),
        after in 0usize..3,
        steady_r in arb_opt(0.1..50.0),
        gap in (1usize..64, 0.001f64..1.0),
        wave in (1.0f64..100.0, 4usize..10000),
        r_list in prop::collection::vec(0.01f64..20.0, 0..4),
        alpha_list in prop::collection::vec(0.0f64..89.0, 0..4),
        workers in 1usize..16,
        out_dir in "[a-z][a-z0-9_/]{0,12}",
        seed in any::<u64>(),
    ) -> RunConfig {
        RunConfig {
            theta,
            n_dim,
            radius,
            alpha_deg,
            l_match: l_extra.map(|e| radius + e),
            l_margin,
            x_min,
            x_max,
            nx,
            dx,
            neta,
            dt,
            t_end,
            scheme: if explicit { "explicit-rk2".parse().unwrap() } else { "imex-be".parse().unwrap() },
            observe_interval,
            n_start,
            history_interval,
            front_at,
            eps_spread: eps.0,
            eps_block: eps.1,
            eps_steady: eps.2,
            probe_radius,
            trailing_window,
            lambdas,
            after: [AfterVerdict::Nothing, AfterVerdict::Levelsets, AfterVerdict::Steady][after],
            steady_r,
            gap_directions: gap.0,
            gap_radius: gap.1,
            wave_half_width: wave.0,
            wave_points: 2 * wave.1 + 1,
            r_list,
            alpha_list,
            workers,
            out_dir,
            seed,
        }
    }
}

proptest! {
    #[test]
    fn config_text_round_trips(cfg in arb_config()) {
        let text = cfg.to_text();
        prop_assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }
}

#[test]
fn artifacts_reject_other_schema_versions() {
    let dir = tempfile::tempdir().unwrap();
    let out = OutDir::new(dir.path());
    let csv = out
        .csv("t.csv", &["a", "b"], &[vec!["1".into(), "2".into()]])
        .unwrap();
    let table = Table::read(&csv).unwrap();
    assert_eq!(table.column("b").unwrap(), vec![2.0]);
    let json = out.json("t.json", &serde_json::json!({"x": 1})).unwrap();
    assert_eq!(read_json(&json).unwrap()["x"], 1);

    let bumped = dir.path().join("v2.csv");
    write(&bumped, "# schema_version 2\na,b\n1,2\n");
    assert!(matches!(
        Table::read(&bumped),
        Err(CliError::Artifact { .. })
    ));
    let bare = dir.path().join("bare.csv");
    write(&bare, "a,b\n1,2\n");
    assert!(Table::read(&bare).is_err());
    let bumped = dir.path().join("v2.json");
    write(&bumped, "{\"schema_version\": 2}");
    assert!(matches!(read_json(&bumped), Err(CliError::Artifact { .. })));
    let missing = dir.path().join("none.json");
    write(&missing, "{\"x\": 1}");
    assert!(read_json(&missing).is_err());
}

#[test]
fn phase_plot_has_one_marker_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = OutDir::new(dir.path());
    let rows: Vec<Vec<String>> = [
        ("0.5", "30", "blocked"),
        ("1", "30", "spreading"),
        ("1", "60", "undecided"),
    ]
    .iter()
    .map(|(r, a, v)| {
        vec![
            r.to_string(),
            a.to_string(),
            v.to_string(),
            "nan".into(),
            "nan".into(),
        ]
    })
    .collect();
    let csv = out
        .csv(
            "phase.csv",
            &["R", "alpha_deg", "verdict", "mean_speed", "eigenvalue"],
            &rows,
        )
        .unwrap();
    let svg = render(&csv, PlotKind::Phase).unwrap();
    assert_eq!(svg.matches("<circle class=\"marker").count(), 3);
    assert_eq!(svg.matches("marker blocked").count(), 1);
    assert_eq!(svg.matches("marker spreading").count(), 1);
    assert_eq!(svg.matches("marker undecided").count(), 1);
}

#[test]
fn constant_offsets_plot_flat() {
    let dir = tempfile::tempdir().unwrap();
    let out = OutDir::new(dir.path());
    let rows: Vec<Vec<String>> = (0..20)
        .flat_map(|k| {
            (0..3).map(move |ray| vec![format!("{}", 10 + k), format!("{ray}"), "1.25".to_string()])
        })
        .collect();
    let csv = out
        .csv("levels.csv", &["t", "angle", "offset"], &rows)
        .unwrap();
    let points = polyline_points(&render(&csv, PlotKind::Offsets).unwrap());
    assert_eq!(points.len(), 20);
    assert!(points
        .windows(2)
        .all(|w| w[0].1 == w[1].1 && w[1].0 > w[0].0));
}

#[test]
fn wave_command_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context::new(dir.path(), true);
    let written = commands::wave(&quick(), &ctx).unwrap();
    assert!(written.iter().all(|p| p.exists()));
    let summary = read_json(&dir.path().join("wave.json")).unwrap();
    let c = summary["c"].as_f64().unwrap();
    assert!((c - 0.5 / 2f64.sqrt()).abs() < 1e-5);
    let svg = render(&dir.path().join("wave_profile.csv"), PlotKind::Wave).unwrap();
    let points = polyline_points(&svg);
    assert!(points.len() > 10);
    // φ decreases, and SVG y grows downwards
    assert!(points
        .windows(2)
        .all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1 - 1e-9));
    assert!("histogram".parse::<PlotKind>().is_err());
}

#[test]
fn single_point_sweep_matches_a_run() {
    let cfg = quick();
    let point = run_point(&cfg, 1.0, 0.0);
    assert!(point.error.is_none(), "{:?}", point.error);
    let setup = Setup::new(&cfg).unwrap();
    let run = setup.entire().unwrap();
    let verdict = setup.classify(&run).unwrap();
    assert_eq!(point.verdict, verdict.kind);
    let far = verdict
        .probe_values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(point.far_field_max, far);
}

#[test]
fn sweeps_ignore_order_and_worker_count() {
    let mut cfg = quick();
    cfg.r_list = vec![1.0, 0.5];
    cfg.alpha_list = vec![0.0];
    let a = sweep(&cfg).unwrap();
    cfg.r_list = vec![0.5, 1.0, 0.5];
    cfg.workers = 2;
    let b = sweep(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.points.len(), 2);
    assert!(a.points[0].radius < a.points[1].radius);

    cfg.r_list.clear();
    assert!(matches!(sweep(&cfg), Err(CliError::Config(_))));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.cfg");
    write(&cfg_path, "geometry.alpha_deg = 95\n");
    let status = funnel_bin()
        .args(["--quiet", "--config"])
        .arg(&cfg_path)
        .arg("wave")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let out = dir.path().join("geom");
    let status = funnel_bin()
        .args(["--quiet", "--out"])
        .arg(&out)
        .args([
            "geom",
            "--R",
            "1",
            "--alpha-deg",
            "45",
            "--L",
            "1.01",
            "--check",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));

    let out = dir.path().join("wave");
    let status = funnel_bin()
        .args(["--quiet", "--out"])
        .arg(&out)
        .arg("wave")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("wave.json").exists() && out.join("wave_profile.csv").exists());

    // thresholds no terminal state can meet leave the verdict undecided
    let cfg_path = dir.path().join("strict.cfg");
    write(
        &cfg_path,
        "grid.dx = 0.5\ngrid.neta = 16\nclassify.eps_spread = 1e-14\nclassify.eps_block = 1e-14\n",
    );
    let out = dir.path().join("strict");
    let status = funnel_bin()
        .args(["--quiet", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .arg("classify")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(5));
    assert_eq!(
        read_json(&out.join("verdict.json")).unwrap()["kind"],
        "undecided"
    );
}
