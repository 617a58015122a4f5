use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_polarqdt");

fn config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/krb_fermions.conf")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    let prefix = format!("{key}=");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} in output:\n{text}"))
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

/// Header of the CSV body, then its rows, comments dropped.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows = reader.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

const KRB: [&str; 6] = ["--set", "c6_au=16130", "--set", "reduced_mass_amu=63.4968", "--set", "symmetry=fermions"];

#[test]
fn selfcheck_reports_scales_and_passes() {
    let o = run(&[&["selfcheck"], &KRB[..]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!((value(&text, "E0_uK") / 98.0 - 1.0).abs() < 0.02);
    assert!((value(&text, "E1_uK") / 24.3 - 1.0).abs() < 0.02);
    assert!(!text.contains("FAIL"));
}

#[test]
fn missing_c6_exits_2_and_names_the_key() {
    let o = run(&["selfcheck", "--set", "reduced_mass_amu=63.4968", "--set", "symmetry=fermions"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("c6_au"));
    assert!(o.stdout.is_empty());
}

#[test]
fn every_config_error_is_listed() {
    let o = run(&["rates", "--set", "c6_au=-1", "--set", "bogus_key=3", "--set", "l_max=two"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for needle in ["c6_au", "bogus_key", "l_max", "symmetry", "s", "y"] {
        assert!(err.contains(needle), "{needle} missing from:\n{err}");
    }
    assert!(err.lines().count() >= 6, "{err}");
}

#[test]
fn unreachable_tail_exits_3() {
    let cfg = config_path();
    let o = run(&["rates", "--config", cfg.to_str().unwrap(), "--set", "d_points=3", "--set", "r_max_limit_bohr=100"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("numerical failure"));
}

// Γ(1/4) and unit conversions typed in independently of the library.
const GAMMA_QUARTER: f64 = 3.625_609_908_221_908;
const AMU_IN_ME: f64 = 1_822.888_486_209;
const HARTREE_IN_UK: f64 = 3.157_750_248_040_7e11;

#[test]
fn ploss_analytic_column_matches_universal_p_wave() {
    // y = 1: β₁ = ā₁ (kā)² for any s.
    let o = run(&[
        &["ploss"],
        &KRB[..],
        &["--set", "s=0.3", "--set", "y=1", "--set", "e_min_uK=0.01", "--set", "e_max_uK=1", "--set", "e_points=5"],
    ]
    .concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["E_uK", "L", "M", "P_loss_numeric", "P_loss_analytic_lowE", "P_loss_qt"]);
    assert_eq!(rows.len(), 10);

    let mu = 63.4968 * AMU_IN_ME;
    let abar = 2.0 * std::f64::consts::PI / GAMMA_QUARTER.powi(2) * (2.0 * mu * 16130.0_f64).powf(0.25);
    let gamma_three_quarters = std::f64::consts::PI * 2f64.sqrt() / GAMMA_QUARTER;
    let abar1 = GAMMA_QUARTER.powi(6) / (144.0 * std::f64::consts::PI.powi(2) * gamma_three_quarters.powi(2)) * abar;
    for row in &rows {
        let e: f64 = row[0].parse().unwrap();
        let k = (2.0 * mu * e / HARTREE_IN_UK).sqrt();
        let expected = 1.0 - (-4.0 * k * abar1 * (k * abar).powi(2)).exp();
        let analytic: f64 = row[4].parse().unwrap();
        let numeric: f64 = row[3].parse().unwrap();
        assert!((analytic / expected - 1.0).abs() < 1e-6, "E = {e}: {analytic} vs {expected}");
        assert!((numeric / analytic - 1.0).abs() < 0.05, "E = {e}: {numeric} vs {analytic}");
    }
}

#[test]
fn rates_total_is_the_channel_sum() {
    let cfg = config_path();
    let o = run(&["rates", "--config", cfg.to_str().unwrap(), "--set", "d_points=4", "--set", "d_max_debye=0.3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(&header[..2], ["d_debye", "K_total_cm3_s"]);
    assert!(header[2..].iter().all(|h| h.starts_with("K_")));
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let total: f64 = row[1].parse().unwrap();
        let sum: f64 = row[2..].iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum / total - 1.0).abs() < 1e-12, "{total} vs {sum}");
    }
}

#[test]
fn output_is_reproducible_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path();
    let first = dir.path().join("a.csv");
    let second = dir.path().join("b.csv");
    let replayed = dir.path().join("c.csv");
    let base = ["rates", "--config", cfg.to_str().unwrap(), "--set", "d_points=3", "--set", "d_max_debye=0.2"];
    for out in [&first, &second] {
        let o = run(&[&base[..], &["--out", out.to_str().unwrap()]].concat());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = std::fs::read(&first).unwrap();
    assert_eq!(a, std::fs::read(&second).unwrap());

    let o = run(&["rates", "--replay", first.to_str().unwrap(), "--out", replayed.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(a, std::fs::read(&replayed).unwrap());
    assert!(String::from_utf8(a).unwrap().contains("# config_sha256 "));
}

#[test]
fn set_overrides_the_config_file() {
    let cfg = config_path();
    let o = run(&["rates", "--config", cfg.to_str().unwrap(), "--set", "d_points=2", "--set", "d_max_debye=0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("# d_points=2\n"));
    assert_eq!(csv_rows(&text).1.len(), 2);
}

#[test]
fn fit_recovers_y_from_generated_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path();
    let o = run(&["rates", "--config", cfg.to_str().unwrap(), "--set", "d_points=5", "--set", "d_max_debye=0.4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = csv_rows(&stdout(&o));
    let data = dir.path().join("data.csv");
    let mut text = String::from("d_debye,K_cm3_s\n");
    for row in rows.iter().skip(1) {
        text.push_str(&format!("{},{}\n", row[0], row[1]));
    }
    std::fs::write(&data, text).unwrap();

    let o = run(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "y=0.5",
        "--set",
        &format!("dataset={}", data.display()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((value(&out, "y") - 0.83).abs() < 1e-3, "{out}");
    assert!(value(&out, "sigma_y").is_finite());
    assert_eq!(value(&out, "rows"), 4.0);
}

#[test]
fn bad_dataset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    std::fs::write(&data, "d_debye,K_cm3_s\n0.1,-3\n").unwrap();
    let cfg = config_path();
    let o = run(&["fit", "--config", cfg.to_str().unwrap(), "--set", &format!("dataset={}", data.display())]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("dataset"));
}
