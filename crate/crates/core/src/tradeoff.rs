//! Affine min-tradeoff functions extracted from dual solutions.
//!
//! A min-tradeoff function here is `f(p) = constant + Σ_k λ_k E_k(p)`, where
//! `E_k` are the certificate expressions. Two routes produce it:
//!
//! * min-entropy: the dual of `max p_guess` is an affine upper bound `g(v)`
//!   on the guessing probability for every certificate vector `v`.
//!   `-log2 g` is convex, so its tangent at the targets is a lower bound.
//! * von Neumann: each quadrature node's dual is affine in `v` already and the
//!   node sum is taken directly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::expr::{BellExpression, ExprError};
use crate::npa::{
    build_bff_vonneumann, build_npa_minentropy, certificate_rhs, optimize_expression, Certificate, GuessTarget,
    NpaError,
};
use crate::scenario::{Behavior, Scenario, ScenarioError};
use crate::sdp::Sense;
use crate::solver::{DualSolution, SdpSolver, SolveStatus};

#[derive(Debug, Error)]
pub enum TradeoffError {
    #[error(transparent)]
    Expression(#[from] ExprError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Relaxation(#[from] NpaError),
    #[error("{0}")]
    Input(String),
    #[error("key distribution needs H(A|B) at the spot setting ({x},{y})")]
    MissingHab { x: usize, y: usize },
    #[error("certificate multipliers are not finite ({0})")]
    BadDual(String),
    #[error("malformed H(A|B) table: {0}")]
    Hab(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum EntropyType {
    #[default]
    #[serde(rename = "min-entropy", alias = "min")]
    MinEntropy,
    #[serde(rename = "von-neumann", alias = "von Neumann entropy", alias = "vn")]
    VonNeumann,
}

impl FromStr for EntropyType {
    type Err = TradeoffError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "min" | "min-entropy" => Ok(Self::MinEntropy),
            "vn" | "von-neumann" | "von neumann" | "von neumann entropy" => Ok(Self::VonNeumann),
            other => Err(TradeoffError::Input(format!("unknown entropy type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum UseCase {
    #[default]
    #[serde(rename = "randomness-generation", alias = "Randomness Generation", alias = "rng")]
    RandomnessGeneration,
    #[serde(rename = "key-distribution", alias = "Key Distribution", alias = "qkd")]
    KeyDistribution,
}

impl FromStr for UseCase {
    type Err = TradeoffError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rng" | "randomness-generation" | "randomness generation" => Ok(Self::RandomnessGeneration),
            "qkd" | "key-distribution" | "key distribution" => Ok(Self::KeyDistribution),
            other => Err(TradeoffError::Input(format!("unknown use case '{other}'"))),
        }
    }
}

/// How `Max f` and `Min f|Γ` are taken for the diameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DiameterConvention {
    /// Both extremes over the relaxation's quantum set.
    #[default]
    QuantumRange,
    /// `Max f` over point masses of the test alphabet, `Min f` over the quantum set.
    FullSimplex,
}

/// `H(A|B)` per setting pair, written `{(0, 2): 0.01}` in text form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HabTable(pub BTreeMap<(usize, usize), f64>);

impl HabTable {
    pub fn get(&self, setting: (usize, usize)) -> Option<f64> {
        self.0.get(&setting).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn parse_pair(text: &str) -> Option<(usize, usize)> {
    let inner = text.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (x, y) = inner.split_once(',')?;
    Some((x.trim().parse().ok()?, y.trim().parse().ok()?))
}

impl FromStr for HabTable {
    type Err = TradeoffError;

    /// Accepts `{(0, 2): 0.01, (1, 1): 0.2}` with or without braces.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim();
        let body = body
            .strip_prefix('{')
            .and_then(|b| b.strip_suffix('}'))
            .unwrap_or(body)
            .trim();
        let mut map = BTreeMap::new();
        let mut rest = body;
        while !rest.is_empty() {
            let close = rest.find(')').ok_or_else(|| TradeoffError::Hab(s.into()))?;
            let key = parse_pair(&rest[..=close]).ok_or_else(|| TradeoffError::Hab(s.into()))?;
            let after = rest[close + 1..].trim_start();
            let after = after.strip_prefix(':').ok_or_else(|| TradeoffError::Hab(s.into()))?;
            let end = after.find(',').unwrap_or(after.len());
            let value: f64 = after[..end].trim().parse().map_err(|_| TradeoffError::Hab(s.into()))?;
            map.insert(key, value);
            rest = after[end..].trim_start().trim_start_matches(',').trim_start();
        }
        Ok(Self(map))
    }
}

impl fmt::Display for HabTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, ((x, y), v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({x}, {y}): {v}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for HabTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<String, f64> = self.0.iter().map(|(&(x, y), &v)| (format!("({x}, {y})"), v)).collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HabTable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, f64>::deserialize(deserializer)?;
        let mut map = BTreeMap::new();
        for (k, v) in raw {
            let key = parse_pair(&k).ok_or_else(|| serde::de::Error::custom(format!("bad setting key '{k}'")))?;
            map.insert(key, v);
        }
        Ok(Self(map))
    }
}

/// Inputs of a min-tradeoff computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinTradeoffRequest {
    pub expressions: Vec<String>,
    pub values: Vec<f64>,
    /// Statistical half-widths of `values`, if they come from counts.
    #[serde(default)]
    pub half_widths: Vec<f64>,
    #[serde(rename = "A_config")]
    pub a_config: Vec<usize>,
    #[serde(rename = "B_config")]
    pub b_config: Vec<usize>,
    pub spot_setting: (usize, usize),
    #[serde(default = "default_level")]
    pub relaxation_level: usize,
    #[serde(default)]
    pub m_radau: usize,
    #[serde(default)]
    pub entropy_type: EntropyType,
    #[serde(default)]
    pub use_case: UseCase,
    #[serde(default)]
    pub hab: HabTable,
    /// Min-entropy only; defaults to the joint pair for randomness and Alice for keys.
    #[serde(default)]
    pub guess: Option<GuessTarget>,
    #[serde(default)]
    pub diameter_convention: DiameterConvention,
    /// Outputs per round; defaults to the outcome count at the spot setting.
    #[serde(default)]
    pub alphabet_size_ab: Option<usize>,
    #[serde(default)]
    pub setup_nickname: String,
    #[serde(default)]
    pub additional_data: serde_json::Value,
}

fn default_level() -> usize {
    2
}

impl MinTradeoffRequest {
    pub fn new(expressions: Vec<String>, values: Vec<f64>, a_config: Vec<usize>, b_config: Vec<usize>) -> Self {
        Self {
            expressions,
            values,
            half_widths: Vec::new(),
            a_config,
            b_config,
            spot_setting: (0, 0),
            relaxation_level: 2,
            m_radau: 0,
            entropy_type: EntropyType::MinEntropy,
            use_case: UseCase::RandomnessGeneration,
            hab: HabTable::default(),
            guess: None,
            diameter_convention: DiameterConvention::QuantumRange,
            alphabet_size_ab: None,
            setup_nickname: String::new(),
            additional_data: serde_json::Value::Null,
        }
    }

    /// Checks everything that can be checked without solving; returns the
    /// scenario, the parsed expressions and `H(A|B)` at the spot for key distribution.
    pub fn validate(&self) -> Result<(Scenario, Vec<BellExpression>, Option<f64>), TradeoffError> {
        if self.expressions.is_empty() {
            return Err(TradeoffError::Input("at least one certificate expression is required".into()));
        }
        if self.expressions.len() != self.values.len() {
            return Err(TradeoffError::Input(format!(
                "{} expressions but {} values",
                self.expressions.len(),
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(TradeoffError::Input("certificate values must be finite".into()));
        }
        if !self.half_widths.is_empty() && self.half_widths.len() != self.values.len() {
            return Err(TradeoffError::Input("half_widths must match values".into()));
        }
        if self.half_widths.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
            return Err(TradeoffError::Input("half_widths must be finite and non-negative".into()));
        }
        if self.relaxation_level == 0 {
            return Err(TradeoffError::Input("relaxation level must be at least 1".into()));
        }
        if self.entropy_type == EntropyType::VonNeumann && self.m_radau < 2 {
            return Err(TradeoffError::Input("von Neumann entropy needs m_radau >= 2".into()));
        }
        let scenario = Scenario::new(self.a_config.clone(), self.b_config.clone())?;
        let (sx, sy) = self.spot_setting;
        if sx > scenario.alice_settings() || sy > scenario.bob_settings() {
            return Err(TradeoffError::Input(format!(
                "spot setting ({sx},{sy}) may add at most one setting per party"
            )));
        }
        let hab = match self.use_case {
            UseCase::KeyDistribution => Some(self.hab.get((sx, sy)).ok_or(TradeoffError::MissingHab { x: sx, y: sy })?),
            UseCase::RandomnessGeneration => None,
        };
        let expressions = self
            .expressions
            .iter()
            .map(|t| BellExpression::parse(t, &scenario))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((scenario, expressions, hab))
    }

    pub fn guess_target(&self) -> GuessTarget {
        self.guess.unwrap_or(match self.use_case {
            UseCase::RandomnessGeneration => GuessTarget::Joint,
            UseCase::KeyDistribution => GuessTarget::Alice,
        })
    }
}

/// A certificate expression with its target value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateTerm {
    pub expression: String,
    pub target: f64,
    #[serde(default)]
    pub half_width: f64,
}

/// A behavior used for the variance estimate, as a test-round distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub label: String,
    /// `q(c) = P(a,b|x,y) / (AS·BS)` over test outcomes.
    pub distribution: Vec<f64>,
}

/// Values of `f` on the test alphabet and its extremes over the quantum set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestAlphabetProfile {
    /// `f(δ_c)` for test outcomes `c = (a,b,x,y)`, flat-index order.
    pub outcome_values: Vec<f64>,
    pub quantum_max: f64,
    pub quantum_min: f64,
    pub variance_points: Vec<VariancePoint>,
}

impl TestAlphabetProfile {
    pub fn simplex_max(&self) -> f64 {
        self.outcome_values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ_c q(c) f(δ_c)`.
    pub fn mean(&self, q: &[f64]) -> f64 {
        q.iter().zip(&self.outcome_values).map(|(p, f)| p * f).sum()
    }
}

/// Summary of one SDP solve, kept for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub label: String,
    pub status: SolveStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub iterations: usize,
    pub solve_time_seconds: f64,
}

impl SolveSummary {
    fn of(label: impl Into<String>, s: &DualSolution) -> Self {
        Self {
            label: label.into(),
            status: s.status,
            primal_objective: s.primal_objective,
            dual_objective: s.dual_objective,
            gap: s.gap,
            iterations: s.iterations,
            solve_time_seconds: s.solve_time_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinTradeoffInfo {
    pub certificates: Vec<CertificateTerm>,
    pub scenario: Scenario,
    pub spot_setting: (usize, usize),
    pub entropy_type: EntropyType,
    pub use_case: UseCase,
    /// `λ_k`: bits per unit of certificate expression `k`.
    pub coefficients: Vec<f64>,
    /// Constant term of `f`.
    pub constant: f64,
    /// `f` at the targets, before any `H(A|B)` subtraction.
    pub certificate_value: f64,
    /// Where the SDP was solved; equal to the targets unless they carry error bars.
    pub solve_targets: Vec<f64>,
    pub asymptotic_keyrate: f64,
    pub hab: HabTable,
    pub relaxation_level: usize,
    pub m_radau: usize,
    pub guess: Option<GuessTarget>,
    pub diameter_convention: DiameterConvention,
    pub alphabet_size_ab: usize,
    pub profile: TestAlphabetProfile,
    pub solves: Vec<SolveSummary>,
    pub setup_nickname: String,
    #[serde(default)]
    pub additional_data: serde_json::Value,
}

impl MinTradeoffInfo {
    /// `f` at certificate values `v`.
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant + self.coefficients.iter().zip(values).map(|(l, v)| l * v).sum::<f64>()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.certificates.iter().map(|c| c.target).collect()
    }

    pub fn expressions(&self) -> Result<Vec<BellExpression>, ExprError> {
        self.certificates
            .iter()
            .map(|c| BellExpression::parse(&c.expression, &self.scenario))
            .collect()
    }

    pub fn evaluate_behavior(&self, behavior: &Behavior) -> Result<f64, ExprError> {
        let values = self
            .expressions()?
            .iter()
            .map(|e| e.evaluate(behavior))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.evaluate(&values))
    }

    /// `f` at the targets moved against `f` by their half-widths.
    pub fn derated_value(&self) -> f64 {
        self.certificate_value
            - self
                .certificates
                .iter()
                .zip(&self.coefficients)
                .map(|(c, l)| l.abs() * c.half_width)
                .sum::<f64>()
    }

    pub fn hab_at_spot(&self) -> Option<f64> {
        self.hab.get(self.spot_setting)
    }

    /// `log2(AS·BS)`: bits to draw a uniform test setting pair.
    pub fn pxpy_consumption(&self) -> f64 {
        ((self.scenario.alice_settings() * self.scenario.bob_settings()) as f64).log2()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("min-tradeoff serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// An affine bound `constant + Σ_k coefficients[k]·v_k` on the certificate values.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBound {
    pub constant: f64,
    pub coefficients: Vec<f64>,
}

impl AffineBound {
    pub fn at(&self, values: &[f64]) -> f64 {
        self.constant + self.coefficients.iter().zip(values).map(|(l, v)| l * v).sum::<f64>()
    }
}

/// `g(v)` from one dual solution whose rows are normalization then certificates.
pub fn dual_affine(certificates: &[Certificate], solution: &DualSolution) -> Result<AffineBound, TradeoffError> {
    let lambda = &solution.equality_multipliers;
    if lambda.len() != certificates.len() + 1 {
        return Err(TradeoffError::BadDual(format!(
            "{} multipliers for {} certificates",
            lambda.len(),
            certificates.len()
        )));
    }
    // rhs = [1, v_k - c_k]
    let zeros = vec![0.0; certificates.len()];
    let constant = solution.bound_at(&certificate_rhs(certificates, &zeros));
    let coefficients = lambda[1..].to_vec();
    if !constant.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(TradeoffError::BadDual("non-finite multiplier".into()));
    }
    Ok(AffineBound { constant, coefficients })
}

/// Tangent of `-log2 g` at `targets`, a valid lower bound wherever `g` is an upper
/// bound on the guessing probability.
pub fn min_entropy_tangent(g: &AffineBound, targets: &[f64]) -> Result<AffineBound, TradeoffError> {
    let g0 = g.at(targets);
    if g0 <= 0.0 || !g0.is_finite() {
        return Err(TradeoffError::BadDual(format!("guessing-probability bound {g0} is not positive")));
    }
    let h0 = -g0.log2();
    let slopes: Vec<f64> = g
        .coefficients
        .iter()
        .map(|l| -l / (g0 * std::f64::consts::LN_2))
        .collect();
    let constant = h0 - slopes.iter().zip(targets).map(|(s, v)| s * v).sum::<f64>();
    Ok(AffineBound {
        constant,
        coefficients: slopes,
    })
}

/// Targets moved toward the uniform behavior by at most their half-widths.
///
/// Observed values of ideal experiments sit on (or numerically just past) the
/// boundary of the quantum set, where the dual multipliers diverge. Every point
/// of the segment to the uniform behavior is within the error bars, and `f` is
/// affine, so it is still evaluated at the observed values.
fn interior_targets(
    expressions: &[BellExpression],
    scenario: &Scenario,
    values: &[f64],
    half_widths: &[f64],
) -> Result<Vec<f64>, TradeoffError> {
    if half_widths.iter().all(|&h| h == 0.0) {
        return Ok(values.to_vec());
    }
    let uniform = Behavior::uniform(scenario);
    let centre = expressions
        .iter()
        .map(|e| e.evaluate(&uniform))
        .collect::<Result<Vec<_>, _>>()?;
    let tau = values
        .iter()
        .zip(&centre)
        .zip(half_widths)
        .filter(|((v, u), _)| (*v - *u).abs() > 0.0)
        .map(|((v, u), h)| h / (v - u).abs())
        .fold(1.0, f64::min);
    Ok(values.iter().zip(&centre).map(|(v, u)| v + tau * (u - v)).collect())
}

fn test_distribution(behavior: &Behavior) -> Vec<f64> {
    let s = behavior.scenario();
    let pairs = (s.alice_settings() * s.bob_settings()) as f64;
    behavior.table().iter().map(|p| p / pairs).collect()
}

/// Computes a min-tradeoff function for `request` with `solver`.
pub fn calculate_mintradeoff(
    request: &MinTradeoffRequest,
    solver: &dyn SdpSolver,
) -> Result<MinTradeoffInfo, TradeoffError> {
    let (scenario, expressions, hab) = request.validate()?;
    let (sx, sy) = request.spot_setting;
    let solve_targets = interior_targets(&expressions, &scenario, &request.values, &request.half_widths)?;
    let certificates: Vec<Certificate> = expressions
        .iter()
        .zip(&solve_targets)
        .map(|(e, &v)| Certificate::new(e.clone(), v))
        .collect();
    let level = request.relaxation_level;
    let ext = scenario.extended_to_include(sx, sy);
    let mut solves = Vec::new();

    let (bound, certificate_behavior) = match request.entropy_type {
        EntropyType::MinEntropy => {
            let guess = request.guess_target();
            let problem = build_npa_minentropy(&scenario, level, &certificates, (sx, sy), guess)?;
            let result = problem.solve(solver)?;
            solves.push(SolveSummary::of("guessing probability", &result.solution));
            let g = dual_affine(&problem.certificates, &result.solution)?;
            let tangent = min_entropy_tangent(&g, &solve_targets)?;
            let behavior = problem.behavior(&result.solution)?.restrict(&scenario)?;
            (tangent, behavior)
        }
        EntropyType::VonNeumann => {
            let problem = build_bff_vonneumann(&scenario, level, &certificates, (sx, sy), request.m_radau)?;
            let result = problem.solve(solver)?;
            let mut constant = 0.0;
            let mut coefficients = vec![0.0; certificates.len()];
            for (i, (node, sol)) in problem.nodes.iter().zip(&result.solutions).enumerate() {
                solves.push(SolveSummary::of(format!("quadrature node {i}"), sol));
                let g = dual_affine(&problem.certificates, sol)?;
                constant += node.c * (1.0 + g.constant);
                for (acc, l) in coefficients.iter_mut().zip(&g.coefficients) {
                    *acc += node.c * l;
                }
            }
            let behavior = problem.relaxation.behavior(&result.solutions[0].y, 0)?.restrict(&scenario)?;
            (AffineBound { constant, coefficients }, behavior)
        }
    };
    let certificate_value = bound.at(&request.values);

    // f as one expression over behaviors, for its range over the quantum set.
    let parts: Vec<(f64, &BellExpression)> = bound.coefficients.iter().copied().zip(expressions.iter()).collect();
    let combined = BellExpression::linear_combination(&parts, &scenario)?;
    let (hi, hi_behavior) = optimize_expression(&combined, level, Sense::Maximize, solver)?;
    let (lo, lo_behavior) = optimize_expression(&combined, level, Sense::Minimize, solver)?;
    let _ = hi_behavior;

    let pairs = (scenario.alice_settings() * scenario.bob_settings()) as f64;
    let per_expression: Vec<(Vec<f64>, f64)> = expressions.iter().map(|e| e.coefficient_vector()).collect();
    let outcome_values: Vec<f64> = (0..scenario.table_len())
        .map(|i| {
            bound.constant
                + bound
                    .coefficients
                    .iter()
                    .zip(&per_expression)
                    .map(|(l, (v, c))| l * (pairs * v[i] + c))
                    .sum::<f64>()
        })
        .collect();
    let profile = TestAlphabetProfile {
        outcome_values,
        quantum_max: bound.constant + hi,
        quantum_min: bound.constant + lo,
        variance_points: vec![
            VariancePoint {
                label: "quantum minimizer".into(),
                distribution: test_distribution(&lo_behavior),
            },
            VariancePoint {
                label: "certificate point".into(),
                distribution: test_distribution(&certificate_behavior),
            },
        ],
    };

    let alphabet_size_ab = request
        .alphabet_size_ab
        .unwrap_or(ext.alice_outcomes(sx) * ext.bob_outcomes(sy));
    let half_widths = if request.half_widths.is_empty() {
        vec![0.0; request.values.len()]
    } else {
        request.half_widths.clone()
    };
    Ok(MinTradeoffInfo {
        certificates: request
            .expressions
            .iter()
            .zip(&request.values)
            .zip(&half_widths)
            .map(|((e, &t), &h)| CertificateTerm {
                expression: e.clone(),
                target: t,
                half_width: h,
            })
            .collect(),
        scenario,
        spot_setting: (sx, sy),
        entropy_type: request.entropy_type,
        use_case: request.use_case,
        coefficients: bound.coefficients,
        constant: bound.constant,
        certificate_value,
        solve_targets,
        asymptotic_keyrate: certificate_value - hab.unwrap_or(0.0),
        hab: request.hab.clone(),
        relaxation_level: level,
        m_radau: request.m_radau,
        guess: match request.entropy_type {
            EntropyType::MinEntropy => Some(request.guess_target()),
            EntropyType::VonNeumann => None,
        },
        diameter_convention: request.diameter_convention,
        alphabet_size_ab,
        profile,
        solves,
        setup_nickname: request.setup_nickname.clone(),
        additional_data: request.additional_data.clone(),
    })
}
