use std::path::PathBuf;

use diqcert::eat::{sweep, Axis, EatError, SweepLists};
use diqcert::edq::{EdqDocument, EdqError, Stage};
use diqcert::ingest::{parse_data_config, parse_data_dir, parse_data_text, EberData, IngestError};
use diqcert::solver::InteriorPointSolver;
use diqcert::tradeoff::{
    calculate_mintradeoff, EntropyType, MinTradeoffInfo, MinTradeoffRequest, TradeoffError, UseCase,
};

const CHSH: &str = "C(0,0)+C(0,1)+C(1,0)-C(1,1)";
const MOD_CHSH: &str = "C(0,0)+C(0,1)+C(1,0)-C(1,1)+C(2,1)";

fn listing_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/listing")
}

fn listing_config_text() -> String {
    std::fs::read_to_string(listing_dir().join("config.json")).unwrap()
}

fn modchsh_info() -> MinTradeoffInfo {
    let mut req = MinTradeoffRequest::new(vec![MOD_CHSH.into()], vec![3.8], vec![2, 2, 2], vec![2, 2]);
    req.spot_setting = (2, 0);
    calculate_mintradeoff(&req, &InteriorPointSolver::default()).unwrap()
}

#[test]
fn bad_token_reports_position() {
    let config = parse_data_config(&listing_config_text()).unwrap();
    let err = parse_data_text(&config, "bad.dat", "1 0 5 5 0 5 x 1 0 5 1 1\n").unwrap_err();
    match err {
        IngestError::Token { file, line, column, token } => {
            assert_eq!((file.as_str(), line, column, token.as_str()), ("bad.dat", 1, 7, "x"));
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn all_rows_ignored_is_an_error() {
    let config = parse_data_config(&listing_config_text()).unwrap();
    let counts = parse_data_text(&config, "meta.dat", "2 1 1 2 3 4 5 6 7 8 9 0\n").unwrap();
    assert!(matches!(EberData::new(config, counts), Err(IngestError::NoRows { ignored: 1, .. })));
}

#[test]
fn config_validation_names_the_field() {
    let text = listing_config_text().replace("\"time_per_line\": 1.0", "\"time_per_line\": -1.0");
    let err = parse_data_config(&text).unwrap_err().to_string();
    assert!(err.contains("time_per_line"), "{err}");
}

#[test]
fn edq_round_trips_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_data_config(&listing_config_text()).unwrap();
    let counts = parse_data_dir(&config, &listing_dir()).unwrap();
    let mut eber = EberData::new(config.clone(), counts).unwrap();
    eber.add_expression(CHSH, 0.99).unwrap();
    let info = modchsh_info();
    let result = sweep(&info, &SweepLists::single(3600.0, 1e6, 1e-12, 0.99, 0.01)).unwrap();
    let request = MinTradeoffRequest::new(vec![CHSH.into()], vec![2.7], vec![2, 2], vec![2, 2]);

    let stages = vec![
        Stage::DataConfig(config),
        Stage::EberData(Box::new(eber)),
        Stage::Certificate(request),
        Stage::MinTradeoff(Box::new(info)),
        Stage::SweepResult(Box::new(result)),
    ];
    for stage in stages {
        let doc = EdqDocument::new(stage, "Simple Bell");
        let path = dir.path().join(format!("{}.edq", doc.stage.kind()));
        doc.save(&path).unwrap();
        assert_eq!(EdqDocument::load(&path).unwrap(), doc);
    }
}

#[test]
fn edq_rejects_wrong_kind_and_future_version() {
    let doc = EdqDocument::new(Stage::Certificate(MinTradeoffRequest::new(vec![CHSH.into()], vec![2.5], vec![2, 2], vec![2, 2])), "");
    assert!(matches!(doc.clone().into_min_tradeoff(), Err(EdqError::WrongKind { expected: "min-tradeoff", found: "certificate" })));
    let newer = doc.to_json().replace("\"version\": 1", "\"version\": 99");
    assert!(matches!(EdqDocument::from_json(&newer), Err(EdqError::Version(99))));
    let unknown = doc.to_json().replace("\"kind\": \"certificate\"", "\"kind\": \"spreadsheet\"");
    assert!(matches!(EdqDocument::from_json(&unknown), Err(EdqError::UnknownKind(_))));
}

#[test]
fn bare_gui_config_loads_as_edq() {
    let doc = EdqDocument::from_json(&listing_config_text()).unwrap();
    let config = doc.into_data_config().unwrap();
    assert_eq!(config.setup_nickname, "Simple Bell");
}

#[test]
fn request_validation() {
    let mut req = MinTradeoffRequest::new(vec![CHSH.into()], vec![2.7, 1.0], vec![2, 2], vec![2, 2]);
    assert!(matches!(req.validate(), Err(TradeoffError::Input(_))));
    req.values = vec![f64::NAN];
    assert!(matches!(req.validate(), Err(TradeoffError::Input(_))));
    req.values = vec![2.7];
    req.spot_setting = (3, 0);
    assert!(req.validate().is_err(), "spot may add at most one setting per party");
    req.spot_setting = (2, 2);
    assert!(req.validate().is_ok());
    req.spot_setting = (0, 2);
    req.use_case = UseCase::KeyDistribution;
    req.entropy_type = EntropyType::VonNeumann;
    req.m_radau = 4;
    assert!(matches!(req.validate(), Err(TradeoffError::MissingHab { x: 0, y: 2 })));
    req.hab = "(0,2):0.01".parse().unwrap();
    assert!(req.validate().is_ok());
    req.m_radau = 1;
    assert!(req.validate().is_err());
}

#[test]
fn min_tradeoff_info_round_trips_and_evaluates() {
    let info = modchsh_info();
    let again = MinTradeoffInfo::from_json(&info.to_json()).unwrap();
    assert_eq!(again, info);
    assert_eq!(info.evaluate(&[3.8]), info.certificate_value);
    // The tangent lies below the entropy curve away from the touching point.
    assert!(info.evaluate(&[3.5]) < info.certificate_value);
    assert_eq!(info.pxpy_consumption(), 6f64.log2());
}

#[test]
fn sweep_grid_and_csv() {
    let info = modchsh_info();
    let mut lists = SweepLists::single(3600.0, 1e6, 1e-12, 0.99, 0.01);
    lists.gamma = vec![0.01, 0.02, 0.05];
    lists.beta_exponents = (10..=30).collect();
    let result = sweep(&info, &lists).unwrap();
    assert_eq!(result.cells.len(), 3 * 21);
    assert_eq!(result.best_per_combination.len(), 3);

    let grid = result.grid(Axis::NegLogBeta, Axis::Gamma);
    assert_eq!(grid.x_values.len(), 21);
    assert_eq!(grid.y_values, vec![0.01, 0.02, 0.05]);
    let csv = grid.to_csv().unwrap();
    assert_eq!(csv.lines().count(), 1 + 63);

    let full = result.to_csv().unwrap();
    assert!(full.starts_with("combination,"));
    assert_eq!(full.lines().count(), 1 + 63);

    let best = result.best_cell();
    assert!(result.cells.iter().all(|c| c.net_gain_per_second <= best.net_gain_per_second));
}

#[test]
fn empty_sweep_list_is_rejected() {
    let info = modchsh_info();
    let mut lists = SweepLists::single(3600.0, 1e6, 1e-12, 0.99, 0.01);
    lists.gamma.clear();
    assert_eq!(sweep(&info, &lists).unwrap_err(), EatError::EmptyList("gamma"));
}
