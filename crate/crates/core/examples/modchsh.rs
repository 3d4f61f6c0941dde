//! Randomness generation from the modified CHSH certificate.

use diqcert::eat::{sweep, SweepLists};
use diqcert::solver::default_solver;
use diqcert::tradeoff::{calculate_mintradeoff, MinTradeoffRequest};

fn main() {
    let mut req = MinTradeoffRequest::new(
        vec!["C(0,0)+C(0,1)+C(1,0)-C(1,1)+C(2,1)".into()],
        vec![3.8],
        vec![2, 2, 2],
        vec![2, 2],
    );
    req.spot_setting = (2, 0);
    let info = calculate_mintradeoff(&req, default_solver().as_ref()).expect("min-tradeoff function");
    println!("asymptotic rate: {} bits/round", info.asymptotic_keyrate);

    let result = sweep(&info, &SweepLists::single(3600.0, 1e6, 1e-12, 0.99, 0.01)).expect("sweep");
    println!("net gain: {} bits/s", result.net_gain_per_second());
    println!("{}", serde_json::to_string_pretty(&result.parameters_dict()).expect("json"));
}
