use mfqkd::keyrate::{keyrate, sweep, Analysis, ProtocolConfig, RateStatus, Transmitter};
use mfqkd::par::Execution;
use mfqkd::report::{render, to_csv, OutputFormat};
use mfqkd::Error;

fn passive(analysis: Analysis) -> ProtocolConfig {
    let mut cfg = ProtocolConfig { analysis, ..Default::default() };
    cfg.quadrature.nodes = 8;
    cfg.quadrature.convergence_check = false;
    cfg
}

#[test]
fn oil_rate_is_positive_and_below_the_leak_free_limit() {
    let cfg = ProtocolConfig { transmitter: Transmitter::Oil, ..Default::default() };
    let r = keyrate(&cfg, 50.0, 120.0).unwrap();
    assert_eq!(r.status, RateStatus::Ok);
    assert!(r.r > 0.0 && r.r < r.q_key);
    assert!(r.eph_u >= 0.0 && r.eph_u <= 0.5);
}

#[test]
fn passive_rate_grows_with_attenuation() {
    let cfg = passive(Analysis::Baseline);
    let low = keyrate(&cfg, 25.0, 30.0).unwrap().r;
    let high = keyrate(&cfg, 25.0, 120.0).unwrap().r;
    assert!(high > low, "{high} <= {low}");
}

#[test]
fn refined_is_at_least_baseline() {
    let b = keyrate(&passive(Analysis::Baseline), 50.0, 120.0).unwrap();
    let r = keyrate(&passive(Analysis::Refined), 50.0, 120.0).unwrap();
    assert!(r.r >= b.r - 1e-9, "{} < {}", r.r, b.r);
}

#[test]
fn execution_policy_does_not_change_output() {
    let mut cfg = passive(Analysis::Baseline);
    cfg.distances_km = vec![10.0, 60.0];
    cfg.attenuations_db = vec![40.0, 120.0];
    let par = to_csv(&sweep(&cfg).unwrap()).unwrap();
    cfg.quadrature.execution = Execution::Sequential;
    let seq = to_csv(&sweep(&cfg).unwrap()).unwrap();
    assert_eq!(par, seq);
}

#[test]
fn config_json_roundtrip_and_rejection() {
    let cfg = passive(Analysis::Refined);
    let back = ProtocolConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
    assert!(matches!(ProtocolConfig::from_json(r#"{"transmiter": "oil"}"#), Err(Error::Config(_))));
    assert!(matches!(ProtocolConfig::from_json(r#"{"p_zb": 1.5}"#), Err(Error::Config(_))));
    assert!(matches!(ProtocolConfig::from_json(r#"{"distances_km": []}"#), Err(Error::Config(_))));
}

#[test]
fn long_distance_yields_zero_rate_with_status() {
    let cfg = ProtocolConfig { transmitter: Transmitter::Oil, ..Default::default() };
    let r = keyrate(&cfg, 400.0, 120.0).unwrap();
    assert_eq!(r.r, 0.0);
    assert_ne!(r.status, RateStatus::Ok);
    let json = render(&[r], OutputFormat::Json).unwrap();
    assert!(json.contains("\"distance_km\": 400.0"));
}
