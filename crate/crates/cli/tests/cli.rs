use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_infoprice"));
    c.env("INFOPRICE_THREADS", "2");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Parses CSV text into a header and rows.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn column(header: &[String], row: &[String], name: &str) -> f64 {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    row[i].parse().unwrap()
}

fn write_scenario(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("s.toml");
    std::fs::write(&p, body).unwrap();
    p
}

const CONSTANT_EXP: &str = r#"
[curve]
kind = "flat"
rate = 0.05

[[factor]]
id = "X"
maturity = 2.0
prior = { kind = "exponential", delta = 0.5 }
schedule = { kind = "constant", sigma = SIGMA }

[[asset]]
id = "S"
flows = [{ pay_date = 2.0, payoff = "X" }]

[job]
seed = 1
"#;

#[test]
fn price_at_start_is_discounted_prior_mean() {
    let (header, rows) = table(&stdout(&run(&["price", scenario("exponential.toml").to_str().unwrap()])));
    assert_eq!(header, ["asset", "t", "price", "gamma_total", "mean_X", "variance_X", "gamma_X"]);
    assert_eq!(rows.len(), 1);
    assert!((column(&header, &rows[0], "price") - 1.0).abs() < 1e-12);
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let text = stdout(&run(&["price", scenario("gbm.toml").to_str().unwrap(), "--at", "0.5", "--xi", "Z=0.3"]));
    let (_, rows) = table(&text);
    for field in &rows[0][1..] {
        let (mantissa, _) = field.split_once('e').unwrap();
        let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
        assert_eq!(digits.len(), 17, "{field}");
    }
}

#[test]
fn gbm_scenario_matches_lognormal_formula() {
    let out = run(&["price", scenario("gbm.toml").to_str().unwrap(), "--at", "0.5", "--at", "1.5", "--xi", "Z=0.3"]);
    let (header, rows) = table(&stdout(&out));
    let (s0, r, vol) = (100.0_f64, 0.03, 0.25);
    for row in &rows {
        let t = column(&header, row, "t");
        let expected = s0 * (r * t + vol * 0.3 - 0.5 * vol * vol * t).exp();
        let p = column(&header, row, "price");
        assert!(((p - expected) / expected).abs() < 1e-8, "t = {t}: {p} vs {expected}");
    }
}

#[test]
fn silent_factor_prices_at_prior_mean_whatever_the_noise() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_scenario(dir.path(), &CONSTANT_EXP.replace("SIGMA", "0.0"));
    let discount = (-0.05_f64 * 1.0).exp();
    for xi in ["-1.5", "0.0", "2.0"] {
        let (header, rows) = table(&stdout(&run(&["price", s.to_str().unwrap(), "--at", "1.0", "--xi", &format!("X={xi}")])));
        let p = column(&header, &rows[0], "price");
        assert!((p - 0.5 * discount).abs() < 1e-12, "ξ = {xi}: {p}");
        assert!(column(&header, &rows[0], "gamma_X").abs() < 1e-12);
    }
}

#[test]
fn path_file_agrees_with_point_state() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_scenario(dir.path(), &CONSTANT_EXP.replace("SIGMA", "0.7"));
    let path = dir.path().join("xi.csv");
    std::fs::write(&path, "t,X\n0,0\n0.4,0.25\n1.1,0.9\n").unwrap();
    let (h1, along) = table(&stdout(&run(&["price", s.to_str().unwrap(), "--path", path.to_str().unwrap()])));
    assert_eq!(along.len(), 3);
    // with a constant rate the state depends on ξ_t alone
    let (h2, point) = table(&stdout(&run(&["price", s.to_str().unwrap(), "--at", "1.1", "--xi", "X=0.9"])));
    let (a, b) = (column(&h1, &along[2], "price"), column(&h2, &point[0], "price"));
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
}

#[test]
fn factor_at_maturity_needs_its_revealed_value() {
    let out = run(&["price", scenario("two_factor.toml").to_str().unwrap(), "--help"]);
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let s = write_scenario(dir.path(), &CONSTANT_EXP.replace("SIGMA", "1.0"));
    let too_late = run(&["price", s.to_str().unwrap(), "--at", "2.0"]);
    assert_eq!(too_late.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&too_late.stderr).contains("--reveal X="));
}

#[test]
fn nonzero_information_at_start_is_rejected() {
    let out = run(&["price", scenario("exponential.toml").to_str().unwrap(), "--at", "0", "--xi", "X=0.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("identically zero"));
}

#[test]
fn malformed_scenarios_name_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (CONSTANT_EXP.replace("SIGMA", "1.0").replace("payoff = \"X\"", "payoff = \"X +\""), "payoff"),
        (CONSTANT_EXP.replace("SIGMA", "1.0").replace("payoff = \"X\"", "payoff = \"Y\""), "Y"),
        (CONSTANT_EXP.replace("SIGMA", "-1.0"), "schedule"),
        (CONSTANT_EXP.replace("SIGMA", "1.0").replace("rate = 0.05", "rate = 0.05\ncolour = 1"), "colour"),
        (CONSTANT_EXP.replace("SIGMA", "1.0").replace("delta = 0.5", "delta = 0.0"), "prior"),
    ];
    for (body, needle) in cases {
        let s = write_scenario(dir.path(), &body);
        let out = run(&["price", s.to_str().unwrap()]);
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "{needle}: {err}");
        assert!(err.contains(needle), "expected `{needle}` in: {err}");
    }
    let missing = run(&["price", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn simulate_writes_three_tables_and_respects_the_seed() {
    let s = scenario("two_factor.toml");
    let go = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&["simulate", s.to_str().unwrap(), "--paths", "40", "--grid", "8", "--seed", seed, "--out", dir.path().to_str().unwrap()]);
        stdout(&out);
        ["paths.csv", "summary.csv", "correlations.csv"].map(|f| std::fs::read_to_string(dir.path().join(f)).unwrap())
    };
    let a = go("3");
    assert_eq!(a, go("3"));
    assert_ne!(a[0], go("4")[0]);
    assert!(a[1].starts_with("t,asset,mean_price,variance_price,mean_discounted_value,se_discounted_value,martingale_z\n"));
    assert!(a[2].starts_with("asset_a,asset_b,t_start,t_end,correlation,se,z\n"));
}

#[test]
fn option_table_is_consistent_with_parity() {
    let out = run(&["option", scenario("exponential.toml").to_str().unwrap(), "--strike", "0.7", "--strike", "1.3", "--expiry", "0.5"]);
    let (header, rows) = table(&stdout(&out));
    assert_eq!(
        header,
        ["factor", "strike", "expiry", "critical_kind", "critical_value", "call", "put", "forward", "mc", "mc_se"]
    );
    for row in &rows {
        let (c, p, f) = (column(&header, row, "call"), column(&header, row, "put"), column(&header, row, "forward"));
        assert!((c - p - f).abs() < 1e-10);
        assert_eq!(row[8], "");
    }
    let (_, rows) = table(&stdout(&run(&[
        "option",
        scenario("exponential.toml").to_str().unwrap(),
        "--strike",
        "1.0",
        "--expiry",
        "0.5",
        "--mc",
        "20000",
    ])));
    let (call, mc, se): (f64, f64, f64) = (rows[0][5].parse().unwrap(), rows[0][8].parse().unwrap(), rows[0][9].parse().unwrap());
    assert!((call - mc).abs() <= 4.0 * se);
}

#[test]
fn verify_reports_through_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "verify",
        scenario("exponential.toml").to_str().unwrap(),
        "--suite",
        "consistency",
        "--paths",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("verify_consistency.csv")).unwrap();
    assert!(text.starts_with("suite,factor,check,statistic,bound,pass\n"));
    assert!(text.trim_end().ends_with("PASS"));
}

#[test]
fn stochastic_jobs_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_scenario(dir.path(), &CONSTANT_EXP.replace("SIGMA", "1.0").replace("[job]\nseed = 1\n", ""));
    let out = run(&["simulate", s.to_str().unwrap(), "--paths", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}
