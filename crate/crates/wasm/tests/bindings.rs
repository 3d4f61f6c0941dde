use serde_json::Value;

use diqcert_wasm::{beta_profile_json, expression_json, gauss_radau_json};

#[test]
fn chsh_is_zero_on_uniform_noise() {
    let out: Value = serde_json::from_str(&expression_json("C(0,0)+C(0,1)+C(1,0)-C(1,1)", "2,2", "2,2").unwrap()).unwrap();
    assert!(out["uniform_value"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(out["setting_pairs"].as_array().unwrap().len(), 4);
}

#[test]
fn expression_errors_are_strings() {
    assert!(expression_json("C(0,", "2,2", "2,2").unwrap_err().contains("syntax"));
    assert!(expression_json("C(0,0)", "2,x", "2,2").unwrap_err().contains("x"));
}

#[test]
fn radau_rule_ends_at_one() {
    let rule: Value = serde_json::from_str(&gauss_radau_json(8).unwrap()).unwrap();
    let nodes = rule["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 8);
    assert_eq!(nodes[7].as_f64().unwrap(), 1.0);
    let total: f64 = rule["weights"].as_array().unwrap().iter().map(|w| w.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(gauss_radau_json(1).is_err());
}

#[test]
fn profile_has_interior_optimum() {
    let input = r#"{"t":0.2,"var_f_gamma":50,"d_f":60,"alphabet_size_ab":4,"chunk_time":3600,
                   "events_per_second":1e6,"gamma":0.01,"eps_s":1e-12,"p_omega":0.99}"#;
    let out: Value = serde_json::from_str(&beta_profile_json(input).unwrap()).unwrap();
    assert_eq!(out["points"].as_array().unwrap().len(), 40);
    let k = out["best"]["neg_log_beta"].as_u64().unwrap();
    assert!(k > 1 && k < 40, "{k}");
    assert_eq!(out["rounds"].as_f64().unwrap(), 3.6e9);
}

#[test]
fn profile_rejects_bad_parameters() {
    let input = r#"{"t":0.2,"var_f_gamma":1,"d_f":1,"alphabet_size_ab":4,"chunk_time":1,
                   "events_per_second":1,"gamma":0.01,"eps_s":2.0,"p_omega":0.99}"#;
    assert!(beta_profile_json(input).unwrap_err().contains("eps_s"));
}
