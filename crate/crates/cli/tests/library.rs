use privnet_cli::config::ExperimentConfig;
use privnet_cli::sweep::run_sweep_with_workers;
use privnet_cli::{
    emit_csv, emit_plot, parse_config_str, read_csv, render_svg, run_experiment, run_sweep, write_csv, Axis,
    CliError, Experiment, ResultRow, SweepSpec,
};

fn small(n_blocks: u64) -> ExperimentConfig {
    ExperimentConfig {
        n_blocks,
        ..ExperimentConfig::default()
    }
}

fn spec(axis: Axis, values: &[f64], seeds: u64, realizations: u64, n_blocks: u64) -> SweepSpec {
    SweepSpec {
        base: small(n_blocks),
        axis,
        values: values.to_vec(),
        seeds_per_point: seeds,
        realizations_per_point: realizations,
    }
}

#[test]
fn emitted_defaults_parse_back_to_the_same_config() {
    let text = serde_json::to_string_pretty(&ExperimentConfig::default()).unwrap();
    assert_eq!(parse_config_str(&text).unwrap(), Experiment::Run(ExperimentConfig::default()));

    let mut with_sweep: serde_json::Value = serde_json::from_str(&text).unwrap();
    with_sweep["sweep"] = serde_json::json!({"axis": "alpha", "values": [0.5, 1.0], "seeds_per_point": 3});
    let Experiment::Sweep(s) = parse_config_str(&with_sweep.to_string()).unwrap() else {
        panic!("expected a sweep");
    };
    assert_eq!(s.base, ExperimentConfig::default());
    assert_eq!((s.axis, s.values, s.seeds_per_point, s.realizations_per_point), (Axis::Alpha, vec![0.5, 1.0], 3, 1));
}

#[test]
fn csv_header_is_stable() {
    let rows = run_sweep(&spec(Axis::Gamma, &[0.1], 1, 1, 200)).unwrap().rows();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "axis_value,realization,seed,private_rate,open_rate,effective_private_rate,empirical_outage,\
         markov_bound,avg_power,avg_Qp,avg_Qo,utility,decode_failures"
    );
    // one run row and the aggregate, whose realization and seed are empty
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(2).unwrap().starts_with("0.1,,,"));
}

fn agree_to_12_digits(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

#[test]
fn csv_round_trip_preserves_values() {
    let rows = run_sweep(&spec(Axis::V, &[10.0, 50.0], 2, 2, 2_000)).unwrap().rows();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    emit_csv(&rows, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!((a.axis_value, a.realization, a.seed), (b.axis_value, b.realization, b.seed));
        let fields = |r: &ResultRow| {
            [
                r.private_rate,
                r.open_rate,
                r.effective_private_rate,
                r.empirical_outage,
                r.markov_bound,
                r.avg_power,
                r.avg_qp,
                r.avg_qo,
                r.utility,
                r.decode_failures,
            ]
        };
        for (x, y) in fields(a).into_iter().zip(fields(b)) {
            assert!(agree_to_12_digits(x, y), "{x} vs {y}");
        }
    }
}

#[test]
fn gamma_sweep_plot_has_three_series() {
    let gammas = [0.05, 0.1, 0.15, 0.2, 0.3, 0.4];
    let rows = run_sweep(&spec(Axis::Gamma, &gammas, 1, 1, 1_000)).unwrap().rows();
    let svg = render_svg(&rows, "gamma");
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches(r#"class="series""#).count(), 3);
    for name in ["private", "open", "effective private"] {
        assert!(svg.contains(&format!(r#"data-series="{name}""#)), "missing {name}");
    }
    // each series has one marker per gamma
    assert_eq!(svg.matches("<circle").count(), 3 * gammas.len());
    assert_eq!(svg.matches("<g").count(), svg.matches("</g>").count());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rates.svg");
    emit_plot(&rows, "gamma", &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), svg);
}

#[test]
fn empty_tables_are_refused_without_creating_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("none.csv");
    let svg = dir.path().join("none.svg");
    let err = emit_csv(&[], &csv).unwrap_err();
    assert!(matches!(err, CliError::EmptyRows(_)));
    assert_eq!(err.exit_code(), 2);
    assert!(matches!(emit_plot(&[], "gamma", &svg), Err(CliError::EmptyRows(_))));
    assert!(!csv.exists() && !svg.exists());
}

#[test]
fn io_errors_name_the_path() {
    let rows = run_sweep(&spec(Axis::Gamma, &[0.1], 1, 1, 100)).unwrap().rows();
    let path = std::path::Path::new("/nonexistent-dir/rows.csv");
    let err = emit_csv(&rows, path).unwrap_err();
    assert!(err.to_string().contains("/nonexistent-dir/rows.csv"), "{err}");
}

#[test]
fn single_point_sweep_equals_direct_run() {
    let s = spec(Axis::Alpha, &[0.7], 1, 1, 3_000);
    let result = run_sweep(&s).unwrap();
    let direct_config = s.base.with_axis(Axis::Alpha, 0.7);
    let direct = run_experiment(&direct_config, None).unwrap();
    assert_eq!(result.runs.len(), 1);
    assert_eq!(result.runs[0].summary, direct);

    let rows = result.rows();
    let expected = ResultRow::from_summary(Some(0.7), &direct_config, &direct);
    assert_eq!(rows[0], expected);
    // the aggregate of one run carries the same numbers
    assert!(rows[1].is_aggregate());
    assert_eq!(rows[1].private_rate, expected.private_rate);
    assert_eq!(rows[1].utility, expected.utility);
}

#[test]
fn sweep_rows_do_not_depend_on_worker_count() {
    let s = spec(Axis::Gamma, &[0.05, 0.2, 0.4], 2, 2, 1_500);
    let one = run_sweep_with_workers(&s, Some(1)).unwrap().rows();
    let four = run_sweep_with_workers(&s, Some(4)).unwrap().rows();
    assert_eq!(one, four);
    assert_eq!(one.len(), 3 * (2 * 2 + 1));
}

#[test]
fn sweep_rows_follow_axis_realization_seed_order() {
    let rows = run_sweep(&spec(Axis::V, &[10.0, 20.0], 2, 2, 300)).unwrap().rows();
    let keys: Vec<_> = rows.iter().map(|r| (r.axis_value.unwrap(), r.realization, r.seed)).collect();
    let run = |v, r, s| (v, Some(r), Some(s));
    assert_eq!(
        keys,
        vec![
            run(10.0, 0, 1),
            run(10.0, 0, 2),
            run(10.0, 1, 1),
            run(10.0, 1, 2),
            (10.0, None, None),
            run(20.0, 0, 1),
            run(20.0, 0, 2),
            run(20.0, 1, 1),
            run(20.0, 1, 2),
            (20.0, None, None),
        ]
    );
}

#[test]
fn invalid_sweep_points_are_identified() {
    let err = run_sweep(&spec(Axis::Gamma, &[0.5, 1.5], 1, 1, 100)).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let msgs = err.messages();
    assert!(msgs.iter().any(|m| m.starts_with("gamma=1.5, realization 0: ")), "{msgs:?}");
}
