//! Finite-size entropy accumulation bound and net-gain sweeps.
//!
//! For a chunk of `n` rounds the certified smooth min-entropy is
//!
//! ```text
//! n t - n (eps_V + eps_K) - eps_Omega
//! ```
//!
//! where `t` is the min-tradeoff function at the expected statistics and the
//! correction terms depend on `beta`, the alphabet size, and the variance and
//! diameter of the spot-checking lift of `f`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{binary_entropy, Scenario};
use crate::tradeoff::{DiameterConvention, MinTradeoffInfo, TestAlphabetProfile, UseCase};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EatError {
    #[error("{name} = {value} is out of range ({expected})")]
    Range {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("key distribution needs H(A|B) at the spot setting")]
    MissingHab,
    #[error("parameter list '{0}' is empty")]
    EmptyList(&'static str),
    #[error("csv export failed: {0}")]
    Csv(String),
}

fn check(name: &'static str, value: f64, ok: bool, expected: &'static str) -> Result<(), EatError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(EatError::Range { name, value, expected })
    }
}

fn check_beta(beta: f64) -> Result<(), EatError> {
    check("beta", beta, beta > 0.0 && beta < 1.0, "0 < beta < 1")
}

/// Statistics of the lifted min-tradeoff function entering the correction terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffStats {
    pub max_f: f64,
    /// `Min f|Γ`.
    pub min_f_gamma: f64,
    /// `Var f|Γ`.
    pub var_f_gamma: f64,
    /// `max_f - min_f_gamma`.
    pub d_f: f64,
    pub gamma: f64,
    pub convention: DiameterConvention,
}

/// `f` extended to the alphabet `C ∪ {⊥}` of a spot-checking protocol.
///
/// `f(⊥) = M` and `f(c) = M + (f_base(c) - M) / γ`, so that on the round
/// distribution `(1-γ) δ_⊥ + γ q` the lifted function equals `f_base(q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedTradeoff {
    pub reference: f64,
    pub gamma: f64,
    pub base_values: Vec<f64>,
    pub stats: TradeoffStats,
}

impl LiftedTradeoff {
    /// `f(δ_c)`, or `f(δ_⊥)` for `None`.
    pub fn value(&self, outcome: Option<usize>) -> f64 {
        match outcome {
            None => self.reference,
            Some(c) => self.reference + (self.base_values[c] - self.reference) / self.gamma,
        }
    }

    /// `f` on the round distribution `(1-γ) δ_⊥ + γ q`.
    pub fn on_mixture(&self, q: &[f64]) -> f64 {
        let test: f64 = q
            .iter()
            .enumerate()
            .map(|(c, p)| self.gamma * p * self.value(Some(c)))
            .sum();
        (1.0 - self.gamma) * self.value(None) + test
    }

    /// Variance of the lifted `f` on the round distribution built from `q`.
    pub fn variance_at(&self, q: &[f64]) -> f64 {
        let m = self.reference;
        let mean_u: f64 = q.iter().zip(&self.base_values).map(|(p, f)| p * (f - m)).sum();
        let second: f64 = q.iter().zip(&self.base_values).map(|(p, f)| p * (f - m).powi(2)).sum();
        (second / self.gamma - mean_u * mean_u).max(0.0)
    }
}

/// Lifts `profile` to a spot-checking protocol with test probability `gamma`.
pub fn spot_check_lift(
    profile: &TestAlphabetProfile,
    gamma: f64,
    convention: DiameterConvention,
) -> Result<LiftedTradeoff, EatError> {
    check("gamma", gamma, gamma > 0.0 && gamma <= 1.0, "0 < gamma <= 1")?;
    let reference = match convention {
        DiameterConvention::QuantumRange => profile.quantum_max,
        DiameterConvention::FullSimplex => profile.simplex_max(),
    };
    let mut lifted = LiftedTradeoff {
        reference,
        gamma,
        base_values: profile.outcome_values.clone(),
        stats: TradeoffStats {
            max_f: reference,
            min_f_gamma: profile.quantum_min.min(reference),
            var_f_gamma: 0.0,
            d_f: 0.0,
            gamma,
            convention,
        },
    };
    let var = profile
        .variance_points
        .iter()
        .map(|p| lifted.variance_at(&p.distribution))
        .fold(0.0, f64::max);
    lifted.stats.var_f_gamma = var;
    lifted.stats.d_f = lifted.stats.max_f - lifted.stats.min_f_gamma;
    Ok(lifted)
}

/// `(β ln2 / 2) (log2(2|AB|² + 1) + sqrt(var + 2))²`, bits per round.
pub fn epsilon_v(beta: f64, alphabet_size_ab: usize, var_f_gamma: f64) -> Result<f64, EatError> {
    check_beta(beta)?;
    check("var_f_gamma", var_f_gamma, var_f_gamma >= 0.0, "var >= 0")?;
    let ab = alphabet_size_ab as f64;
    let inner = (2.0 * ab * ab + 1.0).log2() + (var_f_gamma + 2.0).sqrt();
    Ok(beta * std::f64::consts::LN_2 / 2.0 * inner * inner)
}

/// `θ1 θ2 θ3`, bits per round, evaluated through logarithms.
pub fn epsilon_k(beta: f64, alphabet_size_ab: usize, d_f: f64) -> Result<f64, EatError> {
    check_beta(beta)?;
    check("d_f", d_f, d_f >= 0.0, "d_f >= 0")?;
    let ln2 = std::f64::consts::LN_2;
    let l = (alphabet_size_ab as f64).log2() + d_f;
    let ln_theta1 = 2.0 * beta.ln() - (6.0 * (1.0 - beta).powi(3) * ln2).ln();
    let ln_theta2 = beta * l * ln2;
    // ln(2^l + e^2) without forming 2^l
    let (a, b) = (l * ln2, 2.0);
    let ln_sum = a.max(b) + (-(a - b).abs()).exp().ln_1p();
    Ok((ln_theta1 + ln_theta2 + 3.0 * ln_sum.ln()).exp())
}

/// `(1/β)(1 - 2 log2(p_Ω ε_s))`, bits per chunk.
pub fn epsilon_omega(beta: f64, p_omega: f64, eps_s: f64) -> Result<f64, EatError> {
    check_beta(beta)?;
    check("p_omega", p_omega, p_omega > 0.0 && p_omega <= 1.0, "0 < p_omega <= 1")?;
    check("eps_s", eps_s, eps_s > 0.0 && eps_s < 1.0, "0 < eps_s < 1")?;
    let prod = p_omega * eps_s;
    check("p_omega * eps_s", prod, prod < 1.0, "p_omega * eps_s < 1")?;
    Ok((1.0 - 2.0 * prod.log2()) / beta)
}

/// Rounds per chunk when every test round costs two setting changes.
pub fn effective_rounds(chunk_time: f64, events_per_second: f64, gamma: f64, switch_delay: f64) -> f64 {
    (chunk_time / (1.0 / events_per_second + 2.0 * gamma * switch_delay)).floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EatParameters {
    pub eps_s: f64,
    pub p_omega: f64,
    pub gamma: f64,
    pub beta: f64,
    pub events_per_second: f64,
    pub chunk_time: f64,
    #[serde(default)]
    pub switch_delay: f64,
    pub alphabet_size_ab: usize,
    #[serde(default)]
    pub hab: Option<f64>,
    #[serde(default)]
    pub subtract_consumption: bool,
}

impl EatParameters {
    pub fn validate(&self) -> Result<(), EatError> {
        check_beta(self.beta)?;
        check("eps_s", self.eps_s, self.eps_s > 0.0 && self.eps_s < 1.0, "0 < eps_s < 1")?;
        check("p_omega", self.p_omega, self.p_omega > 0.0 && self.p_omega <= 1.0, "0 < p_omega <= 1")?;
        check("gamma", self.gamma, self.gamma > 0.0 && self.gamma <= 1.0, "0 < gamma <= 1")?;
        check("events_per_second", self.events_per_second, self.events_per_second > 0.0, "> 0")?;
        check("chunk_time", self.chunk_time, self.chunk_time > 0.0, "> 0")?;
        check("switch_delay", self.switch_delay, self.switch_delay >= 0.0, ">= 0")?;
        let ab = self.alphabet_size_ab as f64;
        check("alphabet_size_ab", ab, self.alphabet_size_ab >= 2, ">= 2")
    }

    pub fn rounds(&self) -> f64 {
        effective_rounds(self.chunk_time, self.events_per_second, self.gamma, self.switch_delay)
    }
}

/// Terms of the chunk bound; `bound = n_t - n_eps_v - n_eps_k - eps_omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub n: f64,
    pub t: f64,
    pub eps_v: f64,
    pub eps_k: f64,
    pub n_t: f64,
    pub n_eps_v: f64,
    pub n_eps_k: f64,
    pub eps_omega: f64,
    pub bound: f64,
}

impl Breakdown {
    pub fn recompute(&self) -> f64 {
        self.n_t - self.n_eps_v - self.n_eps_k - self.eps_omega
    }
}

/// Smooth min-entropy of one chunk of `n` rounds at rate `t`; may be negative.
pub fn eat_bound(t: f64, n: f64, params: &EatParameters, stats: &TradeoffStats) -> Result<Breakdown, EatError> {
    params.validate()?;
    check("t", t, true, "finite")?;
    let eps_v = epsilon_v(params.beta, params.alphabet_size_ab, stats.var_f_gamma)?;
    let eps_k = epsilon_k(params.beta, params.alphabet_size_ab, stats.d_f)?;
    let eps_omega = epsilon_omega(params.beta, params.p_omega, params.eps_s)?;
    let n_t = n * t;
    let n_eps_v = n * eps_v;
    let n_eps_k = n * eps_k;
    Ok(Breakdown {
        n,
        t,
        eps_v,
        eps_k,
        n_t,
        n_eps_v,
        n_eps_k,
        eps_omega,
        bound: n_t - n_eps_v - n_eps_k - eps_omega,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Consumption {
    /// `log2(AS·BS)`, spent on every test round.
    pub pxpy: f64,
    /// `h(γ)`, spent on every round to decide test or generation.
    pub selection: f64,
}

impl Consumption {
    pub fn per_round(&self, gamma: f64) -> f64 {
        self.selection + gamma * self.pxpy
    }
}

pub fn consumption_per_round(scenario: &Scenario, gamma: f64) -> Consumption {
    Consumption {
        pxpy: ((scenario.alice_settings() * scenario.bob_settings()) as f64).log2(),
        selection: binary_entropy(gamma),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `max(0, bound) / chunk_time`.
    pub gross: f64,
    /// Input randomness per second for settings and test selection.
    pub consumption: f64,
    pub net: f64,
}

pub fn net_gain(breakdown: &Breakdown, params: &EatParameters, consumption: &Consumption) -> RateReport {
    let gross = breakdown.bound.max(0.0) / params.chunk_time;
    let spent = params.events_per_second * consumption.per_round(params.gamma);
    RateReport {
        gross,
        consumption: spent,
        net: if params.subtract_consumption { gross - spent } else { gross },
    }
}

/// Rate `t` entering the bound: `f` at the targets, optionally moved against `f`
/// by the error bars, minus `H(A|B)` for key distribution.
pub fn certified_rate(info: &MinTradeoffInfo, hab: Option<f64>, derate_by_error_bar: bool) -> Result<f64, EatError> {
    let f = if derate_by_error_bar {
        info.derated_value()
    } else {
        info.certificate_value
    };
    match info.use_case {
        UseCase::RandomnessGeneration => Ok(f),
        UseCase::KeyDistribution => Ok(f - hab.ok_or(EatError::MissingHab)?),
    }
}

/// Value lists whose Cartesian product is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLists {
    pub chunk_time: Vec<f64>,
    pub events_per_second: Vec<f64>,
    pub eps_s: Vec<f64>,
    pub p_omega: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(default = "default_switch_delay")]
    pub switch_delay: Vec<f64>,
    /// `β = 2^-k` for each `k` listed.
    #[serde(default = "default_beta_exponents")]
    pub beta_exponents: Vec<u32>,
    #[serde(default)]
    pub subtract_consumption: bool,
    /// Lower `t` by the certificates' error bars; by default on when any are present.
    #[serde(default)]
    pub derate_by_error_bar: Option<bool>,
}

fn default_switch_delay() -> Vec<f64> {
    vec![0.0]
}

pub fn default_beta_exponents() -> Vec<u32> {
    (1..=40).collect()
}

impl SweepLists {
    pub fn single(chunk_time: f64, events_per_second: f64, eps_s: f64, p_omega: f64, gamma: f64) -> Self {
        Self {
            chunk_time: vec![chunk_time],
            events_per_second: vec![events_per_second],
            eps_s: vec![eps_s],
            p_omega: vec![p_omega],
            gamma: vec![gamma],
            switch_delay: default_switch_delay(),
            beta_exponents: default_beta_exponents(),
            subtract_consumption: false,
            derate_by_error_bar: None,
        }
    }

    fn check_nonempty(&self) -> Result<(), EatError> {
        let lists: [(&'static str, bool); 7] = [
            ("chunk_time", self.chunk_time.is_empty()),
            ("events_per_second", self.events_per_second.is_empty()),
            ("eps_s", self.eps_s.is_empty()),
            ("p_omega", self.p_omega.is_empty()),
            ("gamma", self.gamma.is_empty()),
            ("switch_delay", self.switch_delay.is_empty()),
            ("beta_exponents", self.beta_exponents.is_empty()),
        ];
        match lists.iter().find(|(_, empty)| *empty) {
            Some((name, _)) => Err(EatError::EmptyList(name)),
            None => Ok(()),
        }
    }
}

/// One grid point: a parameter combination at one `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub combination: usize,
    pub chunk_time: f64,
    pub events_per_second: f64,
    pub eps_s: f64,
    pub p_omega: f64,
    pub gamma: f64,
    pub switch_delay: f64,
    pub neg_log_beta: u32,
    pub beta: f64,
    pub d_f: f64,
    pub var_f_gamma: f64,
    pub breakdown: Breakdown,
    pub gross_rate: f64,
    pub consumption_rate: f64,
    pub net_gain_per_second: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct CsvRow {
    combination: usize,
    chunk_time: f64,
    events_per_second: f64,
    eps_s: f64,
    p_omega: f64,
    gamma: f64,
    switch_delay: f64,
    neg_log_beta: u32,
    beta: f64,
    n: f64,
    t: f64,
    n_t: f64,
    n_eps_v: f64,
    n_eps_k: f64,
    eps_omega: f64,
    bound: f64,
    d_f: f64,
    var_f_gamma: f64,
    gross_rate: f64,
    consumption_rate: f64,
    net_gain_per_second: f64,
}

impl From<&SweepCell> for CsvRow {
    fn from(c: &SweepCell) -> Self {
        Self {
            combination: c.combination,
            chunk_time: c.chunk_time,
            events_per_second: c.events_per_second,
            eps_s: c.eps_s,
            p_omega: c.p_omega,
            gamma: c.gamma,
            switch_delay: c.switch_delay,
            neg_log_beta: c.neg_log_beta,
            beta: c.beta,
            n: c.breakdown.n,
            t: c.breakdown.t,
            n_t: c.breakdown.n_t,
            n_eps_v: c.breakdown.n_eps_v,
            n_eps_k: c.breakdown.n_eps_k,
            eps_omega: c.breakdown.eps_omega,
            bound: c.breakdown.bound,
            d_f: c.d_f,
            var_f_gamma: c.var_f_gamma,
            gross_rate: c.gross_rate,
            consumption_rate: c.consumption_rate,
            net_gain_per_second: c.net_gain_per_second,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EatSweepResult {
    pub lists: SweepLists,
    pub cells: Vec<SweepCell>,
    /// Index into `cells` of the best `β` for each combination.
    pub best_per_combination: Vec<usize>,
    /// Index into `cells` of the overall maximum.
    pub best: usize,
    pub certificate_value: f64,
    pub asymptotic_keyrate: f64,
    pub constant: f64,
    pub hab: Option<f64>,
    pub pxpy_consumption: f64,
    pub alphabet_size_ab: usize,
    pub diameter_convention: DiameterConvention,
}

impl EatSweepResult {
    pub fn best_cell(&self) -> &SweepCell {
        &self.cells[self.best]
    }

    pub fn net_gain_per_second(&self) -> f64 {
        self.best_cell().net_gain_per_second
    }

    /// Parameters of the best cell, keyed like the reference Python output.
    pub fn parameters_dict(&self) -> serde_json::Map<String, serde_json::Value> {
        let c = self.best_cell();
        let mut m = serde_json::Map::new();
        let mut put = |k: &str, v: serde_json::Value| {
            m.insert(k.to_string(), v);
        };
        put("diameter_of_min_tradeoff", c.d_f.into());
        put("pxpy_randomness_consumption_per_round", self.pxpy_consumption.into());
        put("hab", self.hab.map_or(serde_json::Value::Null, Into::into));
        put("subtract_consumption_for_test_rounds", self.lists.subtract_consumption.into());
        put("min-tradeoff certificate value", self.certificate_value.into());
        put("epsS", c.eps_s.into());
        put("events per second", c.events_per_second.into());
        put("single data chunk generation time", c.chunk_time.into());
        put("pOmega", c.p_omega.into());
        put("-log beta", f64::from(c.neg_log_beta).into());
        put("test round probability", c.gamma.into());
        put("switch delay", c.switch_delay.into());
        put("entropy_lower_bound_const_values", self.constant.into());
        put("variance_of_min_tradeoff", c.var_f_gamma.into());
        m
    }

    /// One row per cell with every parameter, the breakdown and the rates.
    pub fn to_csv(&self) -> Result<String, EatError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.cells {
            w.serialize(CsvRow::from(c)).map_err(|e| EatError::Csv(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| EatError::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| EatError::Csv(e.to_string()))
    }
}

/// A sweep parameter usable as a plot axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    NegLogBeta,
    Gamma,
    ChunkTime,
    EventsPerSecond,
    EpsS,
    POmega,
    SwitchDelay,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::NegLogBeta => "neg_log_beta",
            Axis::Gamma => "gamma",
            Axis::ChunkTime => "chunk_time",
            Axis::EventsPerSecond => "events_per_second",
            Axis::EpsS => "eps_s",
            Axis::POmega => "p_omega",
            Axis::SwitchDelay => "switch_delay",
        }
    }

    pub fn of(self, c: &SweepCell) -> f64 {
        match self {
            Axis::NegLogBeta => f64::from(c.neg_log_beta),
            Axis::Gamma => c.gamma,
            Axis::ChunkTime => c.chunk_time,
            Axis::EventsPerSecond => c.events_per_second,
            Axis::EpsS => c.eps_s,
            Axis::POmega => c.p_omega,
            Axis::SwitchDelay => c.switch_delay,
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    /// Accepts snake case, kebab case and the GUI labels (`-log beta`, `test round probability`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == '-' || c == ' ' { '_' } else { c })
            .collect();
        Ok(match key.trim_start_matches('_') {
            "neg_log_beta" | "log_beta" => Axis::NegLogBeta,
            "gamma" | "test_round_probability" => Axis::Gamma,
            "chunk_time" | "single_data_chunk_generation_time" => Axis::ChunkTime,
            "events_per_second" | "events_per_sec" => Axis::EventsPerSecond,
            "eps_s" | "epss" => Axis::EpsS,
            "p_omega" | "pomega" => Axis::POmega,
            "switch_delay" => Axis::SwitchDelay,
            _ => return Err(format!("unknown sweep parameter '{s}'")),
        })
    }
}

/// Best net gain on an `(x, y)` grid, maximized over every other parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x: Axis,
    pub y: Axis,
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// `values[j][i]` at `(x_values[i], y_values[j])`.
    pub values: Vec<Vec<f64>>,
}

impl Grid {
    /// Long format: one row per grid point, header `x,y,net_gain_per_second`.
    pub fn to_csv(&self) -> Result<String, EatError> {
        let err = |e: csv::Error| EatError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([self.x.name(), self.y.name(), "net_gain_per_second"]).map_err(err)?;
        for (j, y) in self.y_values.iter().enumerate() {
            for (i, x) in self.x_values.iter().enumerate() {
                w.write_record([x.to_string(), y.to_string(), self.values[j][i].to_string()])
                    .map_err(err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| EatError::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| EatError::Csv(e.to_string()))
    }
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl EatSweepResult {
    pub fn grid(&self, x: Axis, y: Axis) -> Grid {
        let x_values = sorted_unique(self.cells.iter().map(|c| x.of(c)).collect());
        let y_values = sorted_unique(self.cells.iter().map(|c| y.of(c)).collect());
        let mut values = vec![vec![f64::NEG_INFINITY; x_values.len()]; y_values.len()];
        for c in &self.cells {
            let i = x_values.partition_point(|v| *v < x.of(c));
            let j = y_values.partition_point(|v| *v < y.of(c));
            values[j][i] = values[j][i].max(c.net_gain_per_second);
        }
        Grid {
            x,
            y,
            x_values,
            y_values,
            values,
        }
    }
}

fn is_unimodal(values: &[f64]) -> bool {
    let mut falling = false;
    for w in values.windows(2) {
        if w[1] > w[0] && falling {
            return false;
        }
        if w[1] < w[0] {
            falling = true;
        }
    }
    true
}

/// Evaluates the bound on the Cartesian product of `lists`, every `β` in the grid.
pub fn sweep(info: &MinTradeoffInfo, lists: &SweepLists) -> Result<EatSweepResult, EatError> {
    lists.check_nonempty()?;
    let hab = info.hab_at_spot();
    let derate = lists
        .derate_by_error_bar
        .unwrap_or_else(|| info.certificates.iter().any(|c| c.half_width > 0.0));
    let t = certified_rate(info, hab, derate)?;
    let mut exponents = lists.beta_exponents.clone();
    exponents.sort_unstable();
    exponents.dedup();

    let mut cells = Vec::new();
    let mut best_per_combination = Vec::new();
    let mut combination = 0;
    for &gamma in &lists.gamma {
        let lifted = spot_check_lift(&info.profile, gamma, info.diameter_convention)?;
        let stats = lifted.stats;
        let consumption = consumption_per_round(&info.scenario, gamma);
        for &chunk_time in &lists.chunk_time {
            for &events_per_second in &lists.events_per_second {
                for &switch_delay in &lists.switch_delay {
                    for &eps_s in &lists.eps_s {
                        for &p_omega in &lists.p_omega {
                            let start = cells.len();
                            for &k in &exponents {
                                let beta = 0.5f64.powi(k as i32);
                                let params = EatParameters {
                                    eps_s,
                                    p_omega,
                                    gamma,
                                    beta,
                                    events_per_second,
                                    chunk_time,
                                    switch_delay,
                                    alphabet_size_ab: info.alphabet_size_ab,
                                    hab,
                                    subtract_consumption: lists.subtract_consumption,
                                };
                                let b = eat_bound(t, params.rounds(), &params, &stats)?;
                                let rate = net_gain(&b, &params, &consumption);
                                cells.push(SweepCell {
                                    combination,
                                    chunk_time,
                                    events_per_second,
                                    eps_s,
                                    p_omega,
                                    gamma,
                                    switch_delay,
                                    neg_log_beta: k,
                                    beta,
                                    d_f: stats.d_f,
                                    var_f_gamma: stats.var_f_gamma,
                                    breakdown: b,
                                    gross_rate: rate.gross,
                                    consumption_rate: rate.consumption,
                                    net_gain_per_second: rate.net,
                                });
                            }
                            let profile: Vec<f64> = cells[start..].iter().map(|c| c.breakdown.bound).collect();
                            if !is_unimodal(&profile) {
                                log::warn!("beta profile of combination {combination} is not unimodal: {profile:?}");
                            }
                            let best = (start..cells.len())
                                .max_by(|&a, &b| {
                                    cells[a]
                                        .net_gain_per_second
                                        .total_cmp(&cells[b].net_gain_per_second)
                                        .then(b.cmp(&a))
                                })
                                .expect("beta grid is non-empty");
                            best_per_combination.push(best);
                            combination += 1;
                        }
                    }
                }
            }
        }
    }
    let best = best_per_combination
        .iter()
        .copied()
        .max_by(|&a, &b| {
            cells[a]
                .net_gain_per_second
                .total_cmp(&cells[b].net_gain_per_second)
                .then(b.cmp(&a))
        })
        .expect("at least one combination");
    Ok(EatSweepResult {
        lists: lists.clone(),
        cells,
        best_per_combination,
        best,
        certificate_value: info.certificate_value,
        asymptotic_keyrate: info.asymptotic_keyrate,
        constant: info.constant,
        hab,
        pxpy_consumption: info.pxpy_consumption(),
        alphabet_size_ab: info.alphabet_size_ab,
        diameter_convention: info.diameter_convention,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms() {
        let v = epsilon_v(0.5, 2, 0.0).unwrap();
        let expect = 0.5 * std::f64::consts::LN_2 / 2.0 * (9f64.log2() + 2f64.sqrt()).powi(2);
        assert_relative_eq!(v, expect, max_relative = 1e-14);

        let k = epsilon_k(0.5, 2, 0.0).unwrap();
        let theta1 = 0.25 / (6.0 * 0.125 * std::f64::consts::LN_2);
        let theta3 = (2.0 + std::f64::consts::E.powi(2)).ln().powi(3);
        assert_relative_eq!(k, theta1 * 2f64.sqrt() * theta3, max_relative = 1e-13);

        assert_relative_eq!(epsilon_omega(0.25, 1.0, 0.5).unwrap(), 12.0, max_relative = 1e-15);
    }

    #[test]
    fn epsilon_k_survives_large_diameter() {
        let k = epsilon_k(2f64.powi(-21), 4, 5000.0).unwrap();
        assert!(k.is_finite() && k > 0.0);
    }

    #[test]
    fn range_errors() {
        assert!(epsilon_v(0.0, 4, 1.0).is_err());
        assert!(epsilon_k(1.0, 4, 1.0).is_err());
        assert!(matches!(epsilon_omega(0.5, 1.0, 1.0), Err(EatError::Range { .. })));
    }

    #[test]
    fn rounds_model() {
        assert_eq!(effective_rounds(3600.0, 1e6, 0.01, 0.0), 3.6e9);
        assert_eq!(effective_rounds(10.0, 1e9, 0.0, 1e-3), 1e10);
        assert!(effective_rounds(10.0, 1e9, 0.1, 2e-6) < effective_rounds(10.0, 1e9, 0.1, 1e-6));
    }

    #[test]
    fn consumption_examples() {
        let c = consumption_per_round(&Scenario::binary(3, 2), 0.5);
        assert_eq!(c.pxpy, 6f64.log2());
        assert_eq!(c.selection, 1.0);
        assert_eq!(consumption_per_round(&Scenario::binary(2, 2), 0.1).pxpy, 2.0);
    }

    #[test]
    fn unimodal_detection() {
        assert!(is_unimodal(&[1.0, 2.0, 3.0, 2.0, 1.0]));
        assert!(!is_unimodal(&[1.0, 0.0, 1.0]));
    }
}
