use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diqcert::edq::EdqDocument;
use diqcert::solver::InteriorPointSolver;
use diqcert::tradeoff::{calculate_mintradeoff, MinTradeoffRequest};

fn listing_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/listing")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diqcert"))
        .args(args)
        .env_remove("QCERT_SOLVER")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const MODCHSH: &str = "C(0,0)+C(0,1)+C(1,0)-C(1,1)+C(2,1)";

fn modchsh_mt(dir: &Path) -> PathBuf {
    let mt = dir.join("mt.edq");
    let o = run(&[
        "mintradeoff",
        "--certificate",
        MODCHSH,
        "--value",
        "3.8",
        "--a-config",
        "2,2,2",
        "--b-config",
        "2,2",
        "--spot",
        "2,0",
        "--entropy",
        "min",
        "--use-case",
        "rng",
        "--level",
        "2",
        "--out",
        p(&mt),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("asymptotic keyrate: 1.4368"), "{}", stdout(&o));
    mt
}

#[test]
fn validate_listing_config() {
    let o = run(&["validate", "--config", p(&listing_dir().join("config.json"))]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("ok"));
}

#[test]
fn validate_rejects_duplicate_tags() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(listing_dir().join("config.json"))
        .unwrap()
        .replace("[[1, 2], [3, 4]]", "[[1, 2], [2, 3]]");
    let path = dir.path().join("c.json");
    std::fs::write(&path, text).unwrap();
    assert_eq!(run(&["validate", "--config", p(&path)]).status.code(), Some(2));
}

#[test]
fn missing_file_is_io_error() {
    assert_eq!(run(&["validate", "--config", "/nonexistent/c.json"]).status.code(), Some(4));
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(run(&["rates", "--bogus"]).status.code(), Some(2));
}

#[test]
fn malformed_expression_is_reported() {
    let o = run(&["mintradeoff", "--certificate", "C(0,", "--value", "1", "--a-config", "2,2", "--b-config", "2,2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("syntax error"));
}

#[test]
fn key_distribution_without_hab_fails_validation() {
    let o = run(&[
        "mintradeoff",
        "--certificate",
        "C(0,0)+C(0,1)+C(1,0)-C(1,1)",
        "--value",
        "2.7",
        "--a-config",
        "2,2",
        "--b-config",
        "2,2",
        "--spot",
        "0,2",
        "--entropy",
        "vn",
        "--m-radau",
        "4",
        "--use-case",
        "qkd",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("H(A|B)"));
}

#[test]
fn parse_data_reports_listing_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eber.edq");
    let o = run(&[
        "parse-data",
        "--config",
        p(&listing_dir().join("config.json")),
        "--dir",
        p(&listing_dir()),
        "--expression",
        "C(0,0)+C(0,1)+C(1,0)-C(1,1)",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("ignored by metadata: 1"));
    assert!(text.contains("events per second: 1000000000"));
    let eber = EdqDocument::load(&out).unwrap().into_eber_data().unwrap();
    assert!((eber.expressions[0].value - 2.0 * 2f64.sqrt()).abs() < 1e-6);
}

#[test]
fn modchsh_chain_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let mt = modchsh_mt(dir.path());

    let mut req = MinTradeoffRequest::new(vec![MODCHSH.into()], vec![3.8], vec![2, 2, 2], vec![2, 2]);
    req.spot_setting = (2, 0);
    let direct = calculate_mintradeoff(&req, &InteriorPointSolver::default()).unwrap();
    let from_cli = EdqDocument::load(&mt).unwrap().into_min_tradeoff().unwrap();
    assert_eq!(from_cli.coefficients, direct.coefficients);
    assert_eq!(from_cli.constant, direct.constant);
    assert_eq!(from_cli.asymptotic_keyrate, direct.asymptotic_keyrate);

    let sweep = dir.path().join("sweep.edq");
    let o = run(&[
        "rates",
        "--mt",
        p(&mt),
        "--chunk-time",
        "3600",
        "--events-per-sec",
        "1e6",
        "--eps-s",
        "1e-12",
        "--p-omega",
        "0.99",
        "--gamma",
        "0.01",
        "--out",
        p(&sweep),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("\"-log beta\": 21.0"), "{text}");
    assert!(text.contains("\"pxpy_randomness_consumption_per_round\": 2.584962500721156"), "{text}");

    let grid = dir.path().join("grid.csv");
    let o = run(&["plot-data", "--sweep", p(&sweep), "--x", "-log-beta", "--y", "gamma", "--out", p(&grid)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&grid).unwrap();
    assert!(csv.starts_with("neg_log_beta,gamma,net_gain_per_second\n"));
    assert_eq!(csv.lines().count(), 41);
}

#[test]
fn rates_takes_cartesian_product() {
    let dir = tempfile::tempdir().unwrap();
    let mt = modchsh_mt(dir.path());
    let o = run(&[
        "rates",
        "--mt",
        p(&mt),
        "--chunk-time",
        "3600",
        "--events-per-sec",
        "1e6",
        "--eps-s",
        "1e-12,1e-9",
        "--gamma",
        "0.01,0.05",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("combinations: 4"));
}
