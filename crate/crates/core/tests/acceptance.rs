//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Every SDP solved here goes through [`Checked`], which re-verifies weak
//! duality and the KKT conditions from the raw primal and dual data and later
//! re-solves the problem to confirm bitwise determinism.

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use diqcert::eat::{
    eat_bound, epsilon_k, epsilon_omega, epsilon_v, spot_check_lift, sweep, EatParameters, SweepLists,
};
use diqcert::ingest::{parse_data_config, parse_data_dir, parse_data_text, AggregatedCounts, EberData};
use diqcert::npa::{build_npa_minentropy, expression_problem, Certificate, GuessTarget};
use diqcert::quadrature::gauss_radau;
use diqcert::sdp::{Sense, SdpProblem};
use diqcert::solver::{DualSolution, InteriorPointSolver, SdpSolver, SolverError};
use diqcert::tradeoff::{
    calculate_mintradeoff, DiameterConvention, EntropyType, MinTradeoffRequest, TestAlphabetProfile, UseCase,
    VariancePoint,
};
use diqcert::{parse_expression, Scenario};

const CHSH: &str = "C(0,0)+C(0,1)+C(1,0)-C(1,1)";
const MOD_CHSH: &str = "C(0,0)+C(0,1)+C(1,0)-C(1,1)+C(2,1)";

/// Relative tolerance for the independent optimality checks.
const KKT_TOL: f64 = 1e-5;

struct Checked {
    inner: InteriorPointSolver,
    log: Mutex<Vec<(SdpProblem, DualSolution)>>,
}

impl Checked {
    fn new() -> Self {
        Self {
            inner: InteriorPointSolver::default(),
            log: Mutex::new(Vec::new()),
        }
    }
}

impl SdpSolver for Checked {
    fn solve(&self, problem: &SdpProblem) -> Result<DualSolution, SolverError> {
        let sol = self.inner.solve(problem)?;
        self.log.lock().unwrap().push((problem.clone(), sol.clone()));
        Ok(sol)
    }

    fn name(&self) -> String {
        format!("checked {}", self.inner.name())
    }
}

fn min_eig(dim: usize, row_major: &[f64]) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let m = DMatrix::from_row_slice(dim, dim, row_major);
    SymmetricEigen::new(m).eigenvalues.min()
}

/// Largest violation among primal/dual feasibility, stationarity,
/// complementarity and weak duality, each scaled by the problem size.
fn optimality_violation(p: &SdpProblem, s: &DualSolution) -> Result<f64, String> {
    if !s.status.is_usable() {
        return Err(format!("status {:?}", s.status));
    }
    let scale = 1.0 + s.primal_objective.abs();
    let mut worst = 0.0f64;
    let eq = p
        .equalities
        .iter()
        .map(|e| (e.terms.iter().map(|&(k, c)| c * s.y[k]).sum::<f64>() - e.rhs).abs())
        .fold(0.0, f64::max);
    worst = worst.max(eq);
    let mut fstar = vec![0.0; p.num_vars];
    let mut f0x = 0.0;
    let mut complementarity = 0.0;
    for (j, blk) in p.blocks.iter().enumerate() {
        let f = p.block_matrix(j, &s.y);
        let x = &s.block_duals[j];
        let fnorm = f.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        worst = worst.max(-min_eig(blk.dim, &f) / fnorm);
        worst = worst.max(-min_eig(blk.dim, x) / xnorm);
        complementarity += f.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        for e in &blk.entries {
            let mult = if e.row == e.col { 1.0 } else { 2.0 };
            let v = e.coef * mult * x[e.row * blk.dim + e.col];
            match e.var {
                Some(k) => fstar[k] += v,
                None => f0x += v,
            }
        }
    }
    worst = worst.max(complementarity.abs() / scale);
    let sign = p.sense.sign();
    let mut residual = fstar.iter().map(|v| sign * v).collect::<Vec<_>>();
    for &(k, c) in &p.objective {
        residual[k] += c;
    }
    for (e, l) in p.equalities.iter().zip(&s.equality_multipliers) {
        for &(k, c) in &e.terms {
            residual[k] -= l * c;
        }
    }
    worst = worst.max(residual.iter().map(|r| r.abs()).fold(0.0, f64::max) / scale);
    let dual = p.objective_constant
        + sign * f0x
        + p.equalities
            .iter()
            .zip(&s.equality_multipliers)
            .map(|(e, l)| l * e.rhs)
            .sum::<f64>();
    if (dual - s.dual_objective).abs() > KKT_TOL * scale {
        return Err(format!("reported dual {} != recomputed {dual}", s.dual_objective));
    }
    // Weak duality: the dual bound may not fall on the wrong side of the primal value.
    let gap = sign * (dual - s.primal_objective);
    worst = worst.max(-gap / scale).max(gap.abs() / scale);
    Ok(worst)
}

struct Line {
    pass: bool,
    detail: String,
}

fn line(checks: Vec<(bool, String)>) -> Line {
    Line {
        pass: checks.iter().all(|(ok, _)| *ok),
        detail: checks
            .into_iter()
            .map(|(ok, d)| format!("{}{d}", if ok { "" } else { "!! " }))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn failed(detail: impl std::fmt::Display) -> Line {
    Line {
        pass: false,
        detail: format!("!! {detail}"),
    }
}

fn listing_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/listing")
}

fn within_rel(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

fn tsirelson(solver: &Checked) -> Line {
    let s = Scenario::binary(2, 2);
    let e = parse_expression(CHSH, &s).expect("CHSH parses");
    let start = Instant::now();
    let (problem, _) = expression_problem(&e, 2, Sense::Maximize).expect("relaxation builds");
    let sol = match solver.solve(&problem) {
        Ok(sol) => sol,
        Err(e) => return failed(e),
    };
    let secs = start.elapsed().as_secs_f64();
    let v = sol.dual_objective;
    line(vec![
        ((v - 2.0 * 2f64.sqrt()).abs() <= 1e-5, format!("max CHSH = {v:.9} (2√2 ± 1e-5)")),
        (secs < 10.0, format!("{secs:.2} s (< 10 s)")),
    ])
}

fn min_entropy_endpoints(solver: &Checked) -> Line {
    let s = Scenario::binary(2, 2);
    let e = parse_expression(CHSH, &s).expect("CHSH parses");
    let mut checks = Vec::new();
    for (value, expected) in [(2.0 * 2f64.sqrt(), 1.0), (2.0, 0.0)] {
        let cert = Certificate::new(e.clone(), value);
        let r = build_npa_minentropy(&s, 2, &[cert], (0, 0), GuessTarget::Alice).and_then(|p| p.solve(solver));
        match r {
            Ok(r) => checks.push((
                (r.h_min - expected).abs() <= 1e-4,
                format!("H_min(S={value:.7}) = {:.6} ({expected} ± 1e-4)", r.h_min),
            )),
            Err(e) => checks.push((false, format!("S={value}: {e}"))),
        }
    }
    line(checks)
}

fn modchsh(solver: &Checked) -> Line {
    let start = Instant::now();
    let mut req = MinTradeoffRequest::new(vec![MOD_CHSH.into()], vec![3.8], vec![2, 2, 2], vec![2, 2]);
    req.spot_setting = (2, 0);
    req.relaxation_level = 2;
    req.entropy_type = EntropyType::MinEntropy;
    req.use_case = UseCase::RandomnessGeneration;
    let info = match calculate_mintradeoff(&req, solver) {
        Ok(info) => info,
        Err(e) => return failed(e),
    };
    let res = match sweep(&info, &SweepLists::single(3600.0, 1e6, 1e-12, 0.99, 0.01)) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let secs = start.elapsed().as_secs_f64();
    let best = res.best_cell();
    let net = res.net_gain_per_second();
    line(vec![
        (
            (info.asymptotic_keyrate - 1.4368664).abs() <= 0.01,
            format!("asymptotic rate {:.7} (1.4368664 ± 0.01)", info.asymptotic_keyrate),
        ),
        (
            info.pxpy_consumption() == 6f64.log2(),
            format!("pxpy {} (log2 6 exactly)", info.pxpy_consumption()),
        ),
        (
            best.neg_log_beta.abs_diff(21) <= 1,
            format!("best -log2 beta {} (21 ± 1)", best.neg_log_beta),
        ),
        (within_rel(net, 947239.75, 0.02), format!("net gain {net:.2} bits/s (947239.75 ± 2%)")),
        (within_rel(best.d_f, 66.262, 0.01), format!("d_f {:.4} (66.262 ± 1%)", best.d_f)),
        (secs < 300.0, format!("{secs:.1} s (< 5 min)")),
    ])
}

fn split_counts(config: &diqcert::ingest::DataConfig, lines: &[&str], cuts: &[usize]) -> AggregatedCounts {
    let mut total = AggregatedCounts::empty(config).expect("config is valid");
    let mut start = 0;
    for (i, &end) in cuts.iter().chain(std::iter::once(&lines.len())).enumerate() {
        let end = end.max(start);
        let text = lines[start..end].join("\n");
        let part = parse_data_text(config, &format!("part{i}.dat"), &text).expect("listing rows parse");
        total.merge(&part).expect("same scenario");
        start = end;
    }
    total
}

fn ingestion() -> Line {
    let dir = listing_dir();
    let config = match std::fs::read_to_string(dir.join("config.json"))
        .map_err(|e| e.to_string())
        .and_then(|t| parse_data_config(&t).map_err(|e| e.to_string()))
    {
        Ok(c) => c,
        Err(e) => return failed(e),
    };
    let counts = match parse_data_dir(&config, &dir) {
        Ok(c) => c,
        Err(e) => return failed(e),
    };
    let report = counts.report.clone();
    let mut eber = match EberData::new(config.clone(), counts.clone()) {
        Ok(e) => e,
        Err(e) => return failed(e),
    };
    let chsh = match eber.add_expression(CHSH, 0.99) {
        Ok(s) => s.value,
        Err(e) => return failed(e),
    };

    let text = std::fs::read_to_string(dir.join("run1.dat")).expect("fixture exists");
    // Repeat the rows so random splits cut through a longer file.
    let rows: Vec<&str> = text.lines().cycle().take(5 * 6).collect();
    let whole = split_counts(&config, &rows, &[]);
    let mut runner = TestRunner::new(Config {
        cases: 256,
        failure_persistence: None,
        ..Config::default()
    });
    let n = rows.len();
    let invariance = runner.run(&(prop::collection::vec(0..=n, 0..8), any::<u64>()), |(mut cuts, seed)| {
        cuts.sort_unstable();
        let mut shuffled = rows.clone();
        // Row order inside a file never matters either.
        let k = (seed as usize) % n;
        shuffled.rotate_left(k);
        let split = split_counts(&config, &shuffled, &cuts);
        if split.pairs != whole.pairs
            || split.report.accepted_rows != whole.report.accepted_rows
            || split.report.ignored_metadata != whole.report.ignored_metadata
        {
            return Err(TestCaseError::fail(format!("cuts {cuts:?} changed the totals")));
        }
        Ok(())
    });

    line(vec![
        (
            report.ignored_metadata == 1 && report.accepted_rows == 4,
            format!("accepted {} rows, {} ignored by metadata", report.accepted_rows, report.ignored_metadata),
        ),
        (
            (chsh - 2.8284271).abs() <= 1e-6,
            format!("CHSH {chsh:.9} (2.8284271 ± 1e-6)"),
        ),
        (
            eber.events_per_second == 1e9,
            format!("events/s {} (1e9 exactly)", eber.events_per_second),
        ),
        match invariance {
            Ok(()) => (true, "summation invariance over 256 random splits".to_string()),
            Err(e) => (false, format!("summation invariance: {e}")),
        },
    ])
}

fn qkd(solver: &Checked) -> Line {
    let start = Instant::now();
    let dir = listing_dir();
    let config = parse_data_config(&std::fs::read_to_string(dir.join("config.json")).expect("fixture exists"))
        .expect("listing config is valid");
    let counts = parse_data_dir(&config, &dir).expect("listing data parses");
    let mut eber = EberData::new(config, counts).expect("listing counts are complete");
    let stat = eber.add_expression(CHSH, 0.99).expect("CHSH evaluates").clone();

    let mut req = MinTradeoffRequest::new(vec![stat.expression.clone()], vec![stat.value], vec![2, 2], vec![2, 2]);
    req.half_widths = vec![stat.half_width];
    req.spot_setting = (0, 2);
    req.relaxation_level = 2;
    req.entropy_type = EntropyType::VonNeumann;
    req.use_case = UseCase::KeyDistribution;
    req.m_radau = 8;
    req.hab = "{(0, 2): 0.01}".parse().expect("hab table parses");
    let info = match calculate_mintradeoff(&req, solver) {
        Ok(info) => info,
        Err(e) => return failed(e),
    };
    let res = match sweep(&info, &SweepLists::single(10.0, eber.events_per_second, 1e-12, 0.99, 0.1)) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let secs = start.elapsed().as_secs_f64();
    let best = res.best_cell();
    let net = res.net_gain_per_second();
    line(vec![
        (
            (info.certificate_value - 0.979964).abs() <= 0.01,
            format!("certificate value {:.6} (0.979964 ± 0.01)", info.certificate_value),
        ),
        (within_rel(net, 8e8, 0.05), format!("net rate {net:.4e} bits/s (8e8 ± 5%)")),
        (
            best.neg_log_beta.abs_diff(20) <= 2,
            format!("best -log2 beta {} (20 ± 2)", best.neg_log_beta),
        ),
        (secs < 900.0, format!("{secs:.1} s (< 15 min)")),
    ])
}

fn random_profile() -> impl Strategy<Value = (TestAlphabetProfile, f64, Vec<f64>)> {
    (2usize..12)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(-20.0f64..20.0, k),
                prop::collection::vec(0.001f64..1.0, k),
                0.001f64..1.0,
            )
        })
        .prop_map(|(values, weights, gamma)| {
            let total: f64 = weights.iter().sum();
            let q: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let profile = TestAlphabetProfile {
                outcome_values: values,
                quantum_max: max,
                quantum_min: min,
                variance_points: vec![VariancePoint {
                    label: "random".into(),
                    distribution: q.clone(),
                }],
            };
            (profile, gamma, q)
        })
}

fn eat_params() -> impl Strategy<Value = (EatParameters, f64, f64, f64)> {
    (
        1e-15f64..1e-3,
        0.01f64..1.0,
        1e-4f64..1.0,
        1u32..40,
        1e3f64..1e10,
        1.0f64..1e4,
        2usize..64,
        (-1.0f64..2.0, 0.0f64..1e5, 0.0f64..1e3),
    )
        .prop_map(|(eps_s, p_omega, gamma, k, r, chunk, ab, (t, var, d_f))| {
            let params = EatParameters {
                eps_s,
                p_omega,
                gamma,
                beta: 2f64.powi(-(k as i32)),
                events_per_second: r,
                chunk_time: chunk,
                switch_delay: 0.0,
                alphabet_size_ab: ab,
                hab: None,
                subtract_consumption: false,
            };
            (params, t, var, d_f)
        })
}

fn eat_formulas() -> Line {
    let config = Config {
        cases: 100,
        failure_persistence: None,
        ..Config::default()
    };
    let mut checks = Vec::new();
    let mut report = |name: &str, r: Result<(), String>| match r {
        Ok(()) => checks.push((true, name.to_string())),
        Err(e) => checks.push((false, format!("{name}: {e}"))),
    };

    let mut runner = TestRunner::new(config.clone());
    report(
        "breakdown identity",
        runner
            .run(&eat_params(), |(params, t, var, d_f)| {
                let lifted = spot_check_lift(
                    &TestAlphabetProfile {
                        outcome_values: vec![t, t + d_f],
                        quantum_max: t + d_f,
                        quantum_min: t,
                        variance_points: Vec::new(),
                    },
                    params.gamma,
                    DiameterConvention::QuantumRange,
                )
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
                let mut stats = lifted.stats;
                stats.var_f_gamma = var;
                let b = eat_bound(t, params.rounds(), &params, &stats).map_err(|e| TestCaseError::fail(e.to_string()))?;
                prop_assert_eq!(b.bound, b.n_t - b.n_eps_v - b.n_eps_k - b.eps_omega);
                prop_assert_eq!(b.n_t, b.n * b.t);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let mut runner = TestRunner::new(config.clone());
    report(
        "eps_V linear in beta",
        runner
            .run(&(1e-12f64..0.5, 1e-12f64..0.5, 2usize..64, 0.0f64..1e6), |(b1, b2, ab, var)| {
                let r1 = epsilon_v(b1, ab, var).unwrap() / b1;
                let r2 = epsilon_v(b2, ab, var).unwrap() / b2;
                prop_assert!((r1 - r2).abs() <= 1e-12 * r1.abs(), "{} vs {}", r1, r2);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let mut runner = TestRunner::new(config.clone());
    report(
        "eps_K log-log slope 2 ± 0.05 on 2^-30..2^-20",
        runner
            .run(&(2usize..64, 0.0f64..200.0), |(ab, d_f)| {
                let pts: Vec<(f64, f64)> = (20..=30)
                    .map(|k| {
                        let beta = 2f64.powi(-k);
                        (beta.ln(), epsilon_k(beta, ab, d_f).unwrap().ln())
                    })
                    .collect();
                let n = pts.len() as f64;
                let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
                let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
                let slope = sxy / sxx;
                prop_assert!((slope - 2.0).abs() <= 0.05, "slope {}", slope);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let mut runner = TestRunner::new(config.clone());
    report(
        "eps_Omega closed form to 1e-12",
        runner
            .run(&(1e-12f64..0.999, 0.001f64..1.0, 1e-20f64..0.5), |(beta, p_omega, eps_s)| {
                let got = epsilon_omega(beta, p_omega, eps_s).unwrap();
                let want = (1.0 - 2.0 * (p_omega * eps_s).log2()) / beta;
                prop_assert!((got - want).abs() <= 1e-12 * want.abs(), "{} vs {}", got, want);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    let mut runner = TestRunner::new(config);
    report(
        "spot-check lift mixture identity to 1e-12",
        runner
            .run(&random_profile(), |(profile, gamma, q)| {
                for convention in [DiameterConvention::QuantumRange, DiameterConvention::FullSimplex] {
                    let lifted = spot_check_lift(&profile, gamma, convention).unwrap();
                    let base = profile.mean(&q);
                    let mixed = lifted.on_mixture(&q);
                    let scale = 1.0 + profile.outcome_values.iter().map(|v| v.abs()).fold(0.0, f64::max);
                    prop_assert!((mixed - base).abs() <= 1e-12 * scale, "{} vs {}", mixed, base);
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );
    line(checks)
}

fn quadrature() -> Line {
    let mut checks = Vec::new();
    for m in 2..=5 {
        let rule = match gauss_radau(m) {
            Ok(r) => r,
            Err(e) => return failed(e),
        };
        let worst = (0..=(2 * m - 2) as i32)
            .map(|d| (rule.integrate(|t| t.powi(d)) - 1.0 / (d as f64 + 1.0)).abs())
            .fold(0.0, f64::max);
        checks.push((worst <= 1e-12, format!("m={m} max monomial error {worst:.1e}")));
        checks.push((rule.nodes.contains(&1.0), format!("m={m} has node 1")));
    }
    let two = gauss_radau(2).expect("m = 2 is valid");
    let matches = (two.nodes[0] - 1.0 / 3.0).abs() <= 1e-12
        && (two.weights[0] - 0.75).abs() <= 1e-12
        && two.nodes[1] == 1.0
        && (two.weights[1] - 0.25).abs() <= 1e-12;
    checks.push((matches, format!("m=2 rule {:?} {:?}", two.nodes, two.weights)));
    line(checks)
}

fn solver_checks(solver: &Checked) -> Line {
    let log = std::mem::take(&mut *solver.log.lock().unwrap());
    if log.is_empty() {
        return failed("no SDPs were solved");
    }
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    let mut nondeterministic = 0;
    for (i, (p, s)) in log.iter().enumerate() {
        match optimality_violation(p, s) {
            Ok(v) => worst = worst.max(v),
            Err(e) => problems.push(format!("#{i}: {e}")),
        }
        match solver.inner.solve(p) {
            Ok(again) if again.y == s.y && again.equality_multipliers == s.equality_multipliers => {}
            _ => nondeterministic += 1,
        }
    }
    line(vec![
        (
            problems.is_empty() && worst <= KKT_TOL,
            format!(
                "{} SDPs, worst scaled KKT/duality violation {worst:.1e} (<= {KKT_TOL:.0e}){}",
                log.len(),
                if problems.is_empty() { String::new() } else { format!(" {}", problems.join(", ")) }
            ),
        ),
        (
            nondeterministic == 0,
            format!("{nondeterministic} of {} re-solves differed", log.len()),
        ),
    ])
}

fn main() {
    let solver = Checked::new();
    let criteria: Vec<(&str, Box<dyn Fn() -> Line + '_>)> = vec![
        ("Tsirelson bound", Box::new(|| tsirelson(&solver))),
        ("Min-entropy endpoints", Box::new(|| min_entropy_endpoints(&solver))),
        ("modCHSH reproduction", Box::new(|| modchsh(&solver))),
        ("Data ingestion", Box::new(ingestion)),
        ("QKD walkthrough", Box::new(|| qkd(&solver))),
        ("EAT formula suite", Box::new(eat_formulas)),
        ("Quadrature", Box::new(quadrature)),
        ("Solver", Box::new(|| solver_checks(&solver))),
    ];
    let mut failures = 0;
    for (name, run) in &criteria {
        let result = run();
        if !result.pass {
            failures += 1;
        }
        println!("{} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
