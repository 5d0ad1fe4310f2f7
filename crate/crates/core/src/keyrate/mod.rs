//! Key-rate assembly: configuration, the per-transmitter pipelines, parameter
//! optimization and distance × attenuation sweeps.

mod family;
mod oil;
mod optimize;
mod passive;

pub use oil::{key_test_fidelity, keyrate_oil, oil_programs, INDISTINGUISHABLE_TOL};
pub use optimize::{
    coordinates, optimize_parameters, optimize_with_starts, sweep, with_coordinates, OptimizationResult, OptimizerSettings,
};
pub use passive::{
    keyrate_passive, keyrate_passive_refined, passive_context, passive_programs, passive_report, PassiveContext,
};

use crate::bounds::{CoinFidelity, PurificationConvention};
use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::oil::PhaseJitter;
use crate::passive::{default_leak_schedule, PassiveParams, QuadratureOptions, RegionGeometry};
use crate::types::Intensity;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transmitter {
    #[default]
    Passive,
    Oil,
}

impl fmt::Display for Transmitter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transmitter::Passive => "passive",
            Transmitter::Oil => "oil",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    #[default]
    Baseline,
    /// Splits each single-photon state into its two dominant eigen-components
    /// and bounds the key-component statistics separately.
    Refined,
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Analysis::Baseline => "baseline",
            Analysis::Refined => "refined",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassiveSettings {
    pub mu_max: f64,
    pub geometry: RegionGeometry,
    pub n_cut: u32,
    /// Per-n leakage truncation; defaults to full blocks for `n ≤ 2` and one
    /// leakage photon above.
    pub n_l_cut: Option<Vec<u32>>,
}

impl Default for PassiveSettings {
    fn default() -> Self {
        PassiveSettings { mu_max: 0.5, geometry: RegionGeometry::default(), n_cut: 4, n_l_cut: None }
    }
}

impl PassiveSettings {
    /// Source parameters at attenuation `att_db`, with `ω = μ_max 10^(−Att/10)`.
    pub fn params(&self, att_db: f64) -> PassiveParams {
        let mut p = PassiveParams::from_attenuation(self.mu_max, att_db, self.geometry, self.n_cut);
        p.n_l_cut = self.n_l_cut.clone().unwrap_or_else(|| default_leak_schedule(self.n_cut));
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OilSettings {
    /// Test-basis intensities; `I0` is also the key-basis intensity.
    pub i0: f64,
    pub i1: f64,
    pub i2: f64,
    pub n_cut: u32,
    pub jitter: Option<PhaseJitter>,
}

impl Default for OilSettings {
    fn default() -> Self {
        OilSettings { i0: 0.5, i1: 0.1, i2: 1e-4, n_cut: 4, jitter: None }
    }
}

impl OilSettings {
    pub fn params(&self, att_db: f64) -> Result<crate::oil::OilParams> {
        let mut p = crate::oil::OilParams::from_intensities(self.i0, self.i1, self.i2, att_db, self.n_cut)?;
        p.jitter = self.jitter;
        Ok(p)
    }
}

/// Everything needed to evaluate, optimize or sweep key rates. Mirrors the
/// JSON configuration file; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub transmitter: Transmitter,
    pub analysis: Analysis,
    pub passive: PassiveSettings,
    pub oil: OilSettings,
    /// Fiber and detector model; `distance_km` is replaced by the grid value.
    pub channel: ChannelParams,
    /// Probability that Bob measures in the key basis (passive source).
    pub p_zb: f64,
    /// Probability that both parties use the key basis (OIL source).
    pub p_zazb: f64,
    pub distances_km: Vec<f64>,
    pub attenuations_db: Vec<f64>,
    pub quadrature: QuadratureOptions,
    /// Optimize the source parameters at every sweep point.
    pub optimize: bool,
    pub optimizer: OptimizerSettings,
    pub seed: u64,
    pub purification: PurificationConvention,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            transmitter: Transmitter::Passive,
            analysis: Analysis::Baseline,
            passive: PassiveSettings::default(),
            oil: OilSettings::default(),
            channel: ChannelParams::default(),
            p_zb: 1.0,
            p_zazb: 1.0,
            distances_km: vec![50.0],
            attenuations_db: vec![120.0],
            quadrature: QuadratureOptions::default(),
            optimize: false,
            optimizer: OptimizerSettings::default(),
            seed: 0,
            purification: PurificationConvention::default(),
        }
    }
}

impl ProtocolConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ProtocolConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration always serializes")
    }

    /// Checks every field; all failures map to [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, p) in [("p_zb", self.p_zb), ("p_zazb", self.p_zazb)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.distances_km.is_empty() || self.attenuations_db.is_empty() {
            return bad("distance and attenuation grids must be non-empty".into());
        }
        if let Some(d) = self.distances_km.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return bad(format!("distance {d} must be finite and non-negative"));
        }
        if let Some(a) = self.attenuations_db.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return bad(format!("attenuation {a} must be finite and non-negative"));
        }
        if self.quadrature.nodes < 2 {
            return bad(format!("quadrature nodes must be at least 2, got {}", self.quadrature.nodes));
        }
        let wrap = |r: Result<()>| r.map_err(|e| Error::Config(e.to_string()));
        wrap(self.channel.validate())?;
        wrap(self.purification.validate())?;
        wrap(self.optimizer.validate())?;
        match self.transmitter {
            Transmitter::Passive => wrap(self.passive.params(self.attenuations_db[0]).validate()),
            Transmitter::Oil => wrap(self.oil.params(self.attenuations_db[0]).map(|_| ())),
        }
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex. The execution
    /// policy does not affect results and is left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.quadrature.execution = Default::default();
        let json = serde_json::to_string(&canonical).expect("configuration always serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn channel_at(&self, distance_km: f64) -> ChannelParams {
        ChannelParams { distance_km, ..self.channel }
    }
}

/// `h2(p) = −p log2 p − (1 − p) log2(1 − p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("binary entropy argument {p} outside [0, 1]")));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Entropy of an error rate, saturating at one bit once the rate reaches ½.
fn capped_entropy(p: f64) -> f64 {
    binary_entropy(p.clamp(0.0, 0.5)).expect("argument clamped into range")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatus {
    Ok,
    NoPositiveRate,
    /// The coin imbalance exceeds the coin yield, so no phase-error bound
    /// below one exists.
    DegenerateCoin,
    /// An estimation program was infeasible or numerically unusable.
    LpFailed(String),
    Failed(String),
}

impl fmt::Display for RateStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateStatus::Ok => f.write_str("ok"),
            RateStatus::NoPositiveRate => f.write_str("no positive rate"),
            RateStatus::DegenerateCoin => f.write_str("degenerate coin"),
            RateStatus::LpFailed(m) => write!(f, "lp failed: {m}"),
            RateStatus::Failed(m) => write!(f, "failed: {m}"),
        }
    }
}

/// Source parameters of one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub omega: f64,
    pub mu_max: Option<f64>,
    pub delta_theta_z: Option<f64>,
    /// `I0, I1, I2` of the OIL source.
    pub intensities: Option<[f64; 3]>,
}

/// Probability, observations and photon-number statistics of one region or
/// setting family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub label: String,
    pub p_omega: f64,
    pub gain: f64,
    pub error_gain: f64,
    pub p_n: Vec<f64>,
}

/// One fidelity lower bound fed to an estimation program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub family: String,
    pub n: u32,
    pub i: Intensity,
    pub j: Intensity,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub quadrature_nodes: usize,
    pub lp_pivots: usize,
    pub seed: u64,
    pub version: String,
}

/// Every ingredient of one key-rate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub transmitter: Transmitter,
    pub analysis: Analysis,
    pub distance_km: f64,
    pub att_db: f64,
    pub status: RateStatus,
    /// `max(r_raw, 0)`.
    pub r: f64,
    pub r_raw: f64,
    /// Lower bound on the key-basis single-photon yield entering the rate
    /// (the key-component yield under the refined analysis).
    pub y1_l: f64,
    pub y_x_l: f64,
    pub gamma_x_u: f64,
    pub ex_u: f64,
    pub eph_u: f64,
    pub overlap: f64,
    pub y_coin: f64,
    pub f_prime: f64,
    /// Key/test-basis single-photon fidelity of the OIL source.
    pub f_zx: Option<f64>,
    pub q_key: f64,
    pub e_key: f64,
    pub p_omega: f64,
    pub p1: f64,
    /// Weight of the key component in the key-basis single-photon state; one
    /// under the baseline analysis.
    pub key_weight: f64,
    pub source: SourceSummary,
    pub regions: Vec<RegionSummary>,
    pub fidelities: Vec<FidelityRecord>,
    pub provenance: Provenance,
}

impl KeyRateReport {
    /// Placeholder for a grid point whose evaluation failed.
    pub fn failed(cfg: &ProtocolConfig, distance_km: f64, att_db: f64, err: &Error) -> Self {
        KeyRateReport {
            transmitter: cfg.transmitter,
            analysis: cfg.analysis,
            distance_km,
            att_db,
            status: match err {
                Error::LpFailed { .. } => RateStatus::LpFailed(err.to_string()),
                _ => RateStatus::Failed(err.to_string()),
            },
            r: 0.0,
            r_raw: f64::NAN,
            y1_l: f64::NAN,
            y_x_l: f64::NAN,
            gamma_x_u: f64::NAN,
            ex_u: f64::NAN,
            eph_u: f64::NAN,
            overlap: f64::NAN,
            y_coin: f64::NAN,
            f_prime: f64::NAN,
            f_zx: None,
            q_key: f64::NAN,
            e_key: f64::NAN,
            p_omega: f64::NAN,
            p1: f64::NAN,
            key_weight: f64::NAN,
            source: SourceSummary { omega: f64::NAN, mu_max: None, delta_theta_z: None, intensities: None },
            regions: Vec::new(),
            fidelities: Vec::new(),
            provenance: provenance(cfg, 0),
        }
    }
}

fn provenance(cfg: &ProtocolConfig, lp_pivots: usize) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        quadrature_nodes: cfg.quadrature.nodes,
        lp_pivots,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Bounds that enter the rate formula, shared by all pipelines.
#[derive(Debug, Clone, Copy)]
struct RateInputs {
    prefactor: f64,
    p1: f64,
    key_weight: f64,
    y1_l: f64,
    y_x_l: f64,
    gamma_x_u: f64,
    overlap: f64,
    f_zx: Option<f64>,
    q_key: f64,
    e_key: f64,
    f_ec: f64,
}

/// Derived quantities of the rate formula.
#[derive(Debug, Clone)]
struct RateOutputs {
    ex_u: f64,
    y_coin: f64,
    coin: CoinFidelity,
    eph_u: f64,
    r_raw: f64,
    status: RateStatus,
}

/// `prefactor·[p1·w·Y1L·(1 − h2(e_ph)) − Q f_EC h2(E)]`, with
/// `e_ph = G^U_{F'}(e_X)`, `e_X = Γ_X^U / Y_X^L` and `F'` from the overlap
/// and the coin yield `½(Y1L + Y_X^L)`.
fn assemble_rate(x: &RateInputs) -> Result<RateOutputs> {
    let ex_u = if x.y_x_l > 0.0 { (x.gamma_x_u / x.y_x_l).clamp(0.0, 1.0) } else { 1.0 };
    let y_coin = 0.5 * (x.y1_l + x.y_x_l);
    let coin = if y_coin > 0.0 {
        crate::bounds::coin_f_prime(x.overlap, y_coin)?
    } else {
        CoinFidelity { value: 0.0, degenerate: true }
    };
    let eph_u = crate::bounds::phase_error_upper(ex_u, coin.value)?;
    let privacy = x.p1 * x.key_weight * x.y1_l * (1.0 - capped_entropy(eph_u));
    let leak = x.q_key * x.f_ec * capped_entropy(x.e_key);
    let r_raw = x.prefactor * (privacy - leak);
    let status = if coin.degenerate {
        RateStatus::DegenerateCoin
    } else if r_raw > 0.0 {
        RateStatus::Ok
    } else {
        RateStatus::NoPositiveRate
    };
    Ok(RateOutputs { ex_u, y_coin, coin, eph_u, r_raw, status })
}

/// Evaluates one grid point with the parameters stored in `cfg`.
pub fn keyrate(cfg: &ProtocolConfig, distance_km: f64, att_db: f64) -> Result<KeyRateReport> {
    match (cfg.transmitter, cfg.analysis) {
        (Transmitter::Passive, Analysis::Baseline) => keyrate_passive(cfg, distance_km, att_db),
        (Transmitter::Passive, Analysis::Refined) => keyrate_passive_refined(cfg, distance_km, att_db),
        (Transmitter::Oil, _) => keyrate_oil(cfg, distance_km, att_db),
    }
}

/// Every estimation program solved at one grid point, across both analyses
/// for the passive source.
pub fn estimation_programs(cfg: &ProtocolConfig, distance_km: f64, att_db: f64) -> Result<Vec<crate::lp::LinearProgram>> {
    match cfg.transmitter {
        Transmitter::Passive => passive_programs(&passive_context(cfg, distance_km, att_db)?, cfg),
        Transmitter::Oil => oil_programs(cfg, distance_km, att_db),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.11).unwrap() - 0.4999).abs() < 1e-4);
        assert!((binary_entropy(0.3).unwrap() - binary_entropy(0.7).unwrap()).abs() < 1e-15);
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(-1e-9).is_err());
    }

    #[test]
    fn config_roundtrip_and_rejection() {
        let cfg = ProtocolConfig::default();
        let back = ProtocolConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let partial = ProtocolConfig::from_json(r#"{"transmitter": "oil", "oil": {"i0": 0.6}}"#).unwrap();
        assert_eq!(partial.oil.i1, 0.1);
        assert!(matches!(ProtocolConfig::from_json(r#"{"bogus": 1}"#), Err(Error::Config(_))));
        assert!(matches!(ProtocolConfig::from_json(r#"{"p_zb": 1.5}"#), Err(Error::Config(_))));
        assert!(matches!(ProtocolConfig::from_json(r#"{"oil": {"i1": 0.9}, "transmitter": "oil"}"#), Err(Error::Config(_))));
    }

    #[test]
    fn assembly_clamps_and_flags() {
        let base = RateInputs {
            prefactor: 1.0,
            p1: 0.3,
            key_weight: 1.0,
            y1_l: 0.1,
            y_x_l: 0.1,
            gamma_x_u: 0.0,
            overlap: 1.0,
            f_zx: None,
            q_key: 0.05,
            e_key: 0.0,
            f_ec: 1.16,
        };
        let out = assemble_rate(&base).unwrap();
        assert!((out.r_raw - 0.03).abs() < 1e-15);
        assert_eq!(out.status, RateStatus::Ok);
        let half = assemble_rate(&RateInputs { gamma_x_u: 0.05, overlap: 1.0, e_key: 0.01, ..base }).unwrap();
        assert_eq!(half.eph_u, 0.5);
        assert!(half.r_raw < 0.0);
        assert_eq!(half.status, RateStatus::NoPositiveRate);
        let degenerate = assemble_rate(&RateInputs { overlap: 0.5, ..base }).unwrap();
        assert_eq!(degenerate.status, RateStatus::DegenerateCoin);
    }
}
