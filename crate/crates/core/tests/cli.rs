use std::path::Path;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("rabi").chain(args.iter().copied());
    let code = rabi::cli::run_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("curve.csv");
    let (code, _, err) = run(&["simulate", "--points", "50", "--out", path(&file)]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t_s,t_eff_s,p_g"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 3);
    assert!(first[2].parse::<f64>().unwrap().abs() < 1e-12);
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn identical_invocations_identical_output() {
    let args = [
        "simulate",
        "--points",
        "64",
        "--mode",
        "effective",
        "--initial",
        "thermal",
    ];
    let (a, out_a, _) = run(&args);
    let (b, out_b, _) = run(&args);
    assert_eq!((a, b), (0, 0));
    assert_eq!(out_a, out_b);
    let fit = [
        "fit",
        "--synthetic",
        "--points",
        "200",
        "--tmax",
        "2e-3",
        "--grid-points",
        "5",
        "--seed",
        "3",
    ];
    let (_, fa, _) = run(&fit);
    let (_, fb, _) = run(&fit);
    assert_eq!(fa, fb);
    assert!(fa.starts_with("parameter,value,unit\n"));
}

#[test]
fn compare_passes_on_reference() {
    let (code, out, err) = run(&["compare", "--points", "41", "--tmax", "100e-6"]);
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.starts_with("pair,max_abs_rho,max_abs_p_g"));
}

#[test]
fn missing_data_file_named() {
    let (code, _, err) = run(&["fit", "--data", "/nonexistent/data.csv"]);
    assert_eq!(code, 1);
    assert!(err.contains("/nonexistent/data.csv"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    let (code, _, err) = run(&["frobnicate"]);
    assert_eq!(code, 1);
    assert!(err.to_lowercase().contains("usage"), "{err}");
    let (code, _, _) = run(&["simulate", "--doublets", "0"]);
    assert_eq!(code, 1);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("simulate"));
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.cfg");
    std::fs::write(&cfg, "nbar = 0.05\ngamma1 = fast\n").unwrap();
    let (code, _, err) = run(&["thermal", "--config", path(&cfg)]);
    assert_eq!(code, 1);
    assert!(err.contains("model.cfg") && err.contains('2'), "{err}");
}

#[test]
fn fit_reads_saved_synthetic_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let (code, _, err) = run(&[
        "fit",
        "--synthetic",
        "--points",
        "300",
        "--tmax",
        "2e-3",
        "--grid-points",
        "7",
        "--save-data",
        path(&data),
    ]);
    assert_eq!(code, 0, "{err}");
    let (code, out, err) = run(&["fit", "--data", path(&data), "--grid-points", "7"]);
    assert_eq!(code, 0, "{err}");
    let gamma: f64 = out
        .lines()
        .find(|l| l.starts_with("gamma_cavity,"))
        .and_then(|l| l.split(',').nth(1))
        .unwrap()
        .parse()
        .unwrap();
    assert!((gamma / 17.73 - 1.0).abs() < 0.1, "{out}");
}

#[test]
fn spectrum_and_thermal_tables() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("g.csv");
    let (code, out, _) = run(&["spectrum", "--dump-generator", path(&dump)]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 26);
    assert!(out.starts_with("mode_id,type,re_lambda,im_lambda,level_a,level_b"));
    assert!(std::fs::read_to_string(&dump).unwrap().lines().count() > 25);
    let (code, out, _) = run(&["thermal"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("quantity,value\n"));
}
