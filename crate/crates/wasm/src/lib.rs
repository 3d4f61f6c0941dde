//! Browser bindings for the static demo page in `www/`.
//!
//! Each export takes plain strings or numbers and returns a JSON string, so the
//! page needs no bundler. The `*_json` functions are the native entry points
//! used by the tests.

use serde::{Deserialize, Serialize};
use serde_json::json;
use wasm_bindgen::prelude::*;

use diqcert::eat::{eat_bound, effective_rounds, EatParameters, TradeoffStats};
use diqcert::quadrature::gauss_radau;
use diqcert::tradeoff::DiameterConvention;
use diqcert::{parse_expression, Behavior, Scenario};

fn parse_config(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| format!("bad outcome count '{}'", s.trim())))
        .collect()
}

/// Canonical form, coefficient vector and uniform-behavior value of an expression.
pub fn expression_json(text: &str, a_config: &str, b_config: &str) -> Result<String, String> {
    let scenario = Scenario::new(parse_config(a_config)?, parse_config(b_config)?).map_err(|e| e.to_string())?;
    let expr = parse_expression(text, &scenario).map_err(|e| e.to_string())?;
    let uniform = expr.evaluate(&Behavior::uniform(&scenario)).map_err(|e| e.to_string())?;
    let (coefficients, constant) = expr.coefficient_vector();
    Ok(json!({
        "canonical": expr.to_string(),
        "uniform_value": uniform,
        "coefficients": coefficients,
        "constant": constant,
        "setting_pairs": expr.setting_pairs(),
    })
    .to_string())
}

pub fn gauss_radau_json(m: usize) -> Result<String, String> {
    let rule = gauss_radau(m).map_err(|e| e.to_string())?;
    serde_json::to_string(&rule).map_err(|e| e.to_string())
}

/// Inputs of the rate-versus-beta profile.
#[derive(Debug, Clone, Deserialize)]
pub struct ProfileInput {
    pub t: f64,
    pub var_f_gamma: f64,
    pub d_f: f64,
    pub alphabet_size_ab: usize,
    pub chunk_time: f64,
    pub events_per_second: f64,
    pub gamma: f64,
    #[serde(default)]
    pub switch_delay: f64,
    pub eps_s: f64,
    pub p_omega: f64,
    #[serde(default = "default_max_k")]
    pub max_k: u32,
}

fn default_max_k() -> u32 {
    40
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfilePoint {
    pub neg_log_beta: u32,
    pub bits_per_chunk: f64,
    pub bits_per_second: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Profile {
    pub rounds: f64,
    pub points: Vec<ProfilePoint>,
    pub best: ProfilePoint,
}

/// Chunk bound for `beta = 2^-k`, `k = 1..=max_k`, and the best `k`.
pub fn beta_profile(input: &ProfileInput) -> Result<Profile, String> {
    if input.max_k == 0 {
        return Err("max_k must be at least 1".into());
    }
    let n = effective_rounds(input.chunk_time, input.events_per_second, input.gamma, input.switch_delay);
    let stats = TradeoffStats {
        max_f: input.t,
        min_f_gamma: input.t - input.d_f,
        var_f_gamma: input.var_f_gamma,
        d_f: input.d_f,
        gamma: input.gamma,
        convention: DiameterConvention::QuantumRange,
    };
    let mut points = Vec::with_capacity(input.max_k as usize);
    for k in 1..=input.max_k {
        let params = EatParameters {
            eps_s: input.eps_s,
            p_omega: input.p_omega,
            gamma: input.gamma,
            beta: 2f64.powi(-(k as i32)),
            events_per_second: input.events_per_second,
            chunk_time: input.chunk_time,
            switch_delay: input.switch_delay,
            alphabet_size_ab: input.alphabet_size_ab,
            hab: None,
            subtract_consumption: false,
        };
        let b = eat_bound(input.t, n, &params, &stats).map_err(|e| e.to_string())?;
        points.push(ProfilePoint {
            neg_log_beta: k,
            bits_per_chunk: b.bound,
            bits_per_second: b.bound.max(0.0) / input.chunk_time,
        });
    }
    let best = points
        .iter()
        .fold(None::<&ProfilePoint>, |acc, p| match acc {
            Some(a) if a.bits_per_chunk >= p.bits_per_chunk => Some(a),
            _ => Some(p),
        })
        .cloned()
        .expect("at least one point");
    Ok(Profile { rounds: n, points, best })
}

pub fn beta_profile_json(input: &str) -> Result<String, String> {
    let input: ProfileInput = serde_json::from_str(input).map_err(|e| e.to_string())?;
    serde_json::to_string(&beta_profile(&input)?).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn expression(text: &str, a_config: &str, b_config: &str) -> Result<String, JsValue> {
    expression_json(text, a_config, b_config).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn radau(m: usize) -> Result<String, JsValue> {
    gauss_radau_json(m).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn rate_profile(input: &str) -> Result<String, JsValue> {
    beta_profile_json(input).map_err(|e| JsValue::from_str(&e))
}
