//! Key distribution from the example click data, with von Neumann entropy.

use std::path::Path;

use diqcert::eat::{sweep, SweepLists};
use diqcert::ingest::{parse_data_config, parse_data_dir, EberData};
use diqcert::solver::default_solver;
use diqcert::tradeoff::{calculate_mintradeoff, EntropyType, MinTradeoffRequest, UseCase};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/listing");
    let config = parse_data_config(&std::fs::read_to_string(dir.join("config.json")).expect("config")).expect("valid config");
    let counts = parse_data_dir(&config, &dir).expect("data files");
    let mut eber = EberData::new(config, counts).expect("counts");
    let chsh = eber.add_expression("C(0,0)+C(0,1)+C(1,0)-C(1,1)", 0.99).expect("CHSH").clone();
    println!("CHSH = {} ± {}", chsh.value, chsh.half_width);

    let mut req = MinTradeoffRequest::new(vec![chsh.expression], vec![chsh.value], vec![2, 2], vec![2, 2]);
    req.half_widths = vec![chsh.half_width];
    req.spot_setting = (0, 2);
    req.entropy_type = EntropyType::VonNeumann;
    req.use_case = UseCase::KeyDistribution;
    req.m_radau = 8;
    req.hab = "{(0, 2): 0.01}".parse().expect("hab");
    let info = calculate_mintradeoff(&req, default_solver().as_ref()).expect("min-tradeoff function");
    println!("certificate value: {}", info.certificate_value);

    let mut lists = SweepLists::single(10.0, eber.events_per_second, 1e-12, 0.99, 0.1);
    lists.gamma = vec![0.01, 0.05, 0.1, 0.2];
    let result = sweep(&info, &lists).expect("sweep");
    for &i in &result.best_per_combination {
        let c = &result.cells[i];
        println!("gamma {:<5} -log2 beta {:>2}  {:.4e} bits/s", c.gamma, c.neg_log_beta, c.net_gain_per_second);
    }
}
