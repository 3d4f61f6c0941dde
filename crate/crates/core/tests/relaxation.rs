use approx::assert_abs_diff_eq;
use diqcert::npa::{
    build_bff_vonneumann, build_npa_minentropy, optimize_expression, Certificate, GuessTarget,
};
use diqcert::sdp::Sense;
use diqcert::solver::InteriorPointSolver;
use diqcert::{parse_expression, Scenario};

const CHSH: &str = "C(0,0)+C(0,1)+C(1,0)-C(1,1)";
const MOD_CHSH: &str = "C(0,0)+C(0,1)+C(1,0)-C(1,1)+C(2,1)";

fn solver() -> InteriorPointSolver {
    InteriorPointSolver::default()
}

fn chsh_cert(value: f64) -> (Scenario, Vec<Certificate>) {
    let s = Scenario::binary(2, 2);
    let e = parse_expression(CHSH, &s).unwrap();
    (s, vec![Certificate::new(e, value)])
}

#[test]
fn tsirelson_level_two() {
    let s = Scenario::binary(2, 2);
    let e = parse_expression(CHSH, &s).unwrap();
    let (v, _) = optimize_expression(&e, 2, Sense::Maximize, &solver()).unwrap();
    assert_abs_diff_eq!(v, 2.0 * 2f64.sqrt(), epsilon = 1e-6);
}

#[test]
fn min_entropy_endpoints() {
    for (value, expected) in [(2.0 * 2f64.sqrt(), 1.0), (2.0, 0.0)] {
        let (s, certs) = chsh_cert(value);
        let p = build_npa_minentropy(&s, 2, &certs, (0, 0), GuessTarget::Alice).unwrap();
        let r = p.solve(&solver()).unwrap();
        assert_abs_diff_eq!(r.h_min, expected, epsilon = 1e-4);
    }
}

#[test]
fn min_entropy_matches_analytic_curve() {
    for value in [2.2, 2.5, 2.7] {
        let (s, certs) = chsh_cert(value);
        let r = build_npa_minentropy(&s, 2, &certs, (0, 0), GuessTarget::Alice)
            .unwrap()
            .solve(&solver())
            .unwrap();
        let pg = 0.5 + 0.5 * (2.0 - value * value / 4.0f64).sqrt();
        assert_abs_diff_eq!(r.p_guess, pg, epsilon = 1e-6);
    }
}

#[test]
fn modified_chsh_joint_guess() {
    let s = Scenario::new(vec![2, 2, 2], vec![2, 2]).unwrap();
    let e = parse_expression(MOD_CHSH, &s).unwrap();
    let r = build_npa_minentropy(&s, 2, &[Certificate::new(e, 3.8)], (2, 0), GuessTarget::Joint)
        .unwrap()
        .solve(&solver())
        .unwrap();
    assert_abs_diff_eq!(r.h_min, 1.43682, epsilon = 1e-3);
}

#[test]
fn bff_ideal_chsh() {
    let s = Scenario::binary(2, 3);
    let e = parse_expression(CHSH, &s).unwrap();
    let p = build_bff_vonneumann(&s, 2, &[Certificate::new(e, 2.0 * 2f64.sqrt())], (0, 2), 8).unwrap();
    let r = p.solve(&solver()).unwrap();
    assert!(r.solutions.iter().all(|s| s.status.is_usable()));
    let expected = 1.0 - 1.0 / (2.0 * 64.0 * std::f64::consts::LN_2);
    assert_abs_diff_eq!(r.entropy, expected, epsilon = 1e-4);
}
