//! Simulated detection statistics of a lossy channel followed by an active
//! BB84 receiver with two threshold detectors, plus the model-based
//! linearization points used by the estimation programs.
//!
//! Double clicks are assigned a random bit value. With `A = (1 − p_d)e^{−m}`
//! the no-click probability of a detector that receives mean photon number
//! `m`, a setting whose correct and wrong detectors receive `m_c` and `m_e`
//! yields
//!
//! * gain `Q = 1 − A_c A_e`,
//! * error gain `E·Q = ½(1 + A_c)(1 − A_e)`.

use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, C64};
use crate::mode_basis::{binomial, NPhotonBasis};
use crate::oil::{mode_amplitudes, setting_to_phases, OilParams};
use crate::passive::{quadrature::region_quadrature, PassiveParams};
use crate::types::{Basis, Bit, Intensity};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Fiber and detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub distance_km: f64,
    #[serde(default = "default_alpha")]
    pub alpha_db_per_km: f64,
    #[serde(default = "default_dark")]
    pub p_dark: f64,
    #[serde(default = "default_eff")]
    pub detector_efficiency: f64,
    #[serde(default = "default_f_ec")]
    pub f_ec: f64,
}

fn default_alpha() -> f64 {
    0.2
}
fn default_dark() -> f64 {
    1e-6
}
fn default_eff() -> f64 {
    1.0
}
fn default_f_ec() -> f64 {
    1.16
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            distance_km: 0.0,
            alpha_db_per_km: default_alpha(),
            p_dark: default_dark(),
            detector_efficiency: default_eff(),
            f_ec: default_f_ec(),
        }
    }
}

impl ChannelParams {
    pub fn at_distance(distance_km: f64) -> Self {
        ChannelParams { distance_km, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.distance_km >= 0.0 && self.distance_km.is_finite()) {
            return Err(Error::InvalidInput(format!("distance must be non-negative, got {}", self.distance_km)));
        }
        if !(self.alpha_db_per_km >= 0.0 && self.alpha_db_per_km.is_finite()) {
            return Err(Error::InvalidInput(format!("fiber loss must be non-negative, got {}", self.alpha_db_per_km)));
        }
        if !unit(self.p_dark) || !unit(self.detector_efficiency) {
            return Err(Error::InvalidInput("dark-count probability and detector efficiency must lie in [0, 1]".into()));
        }
        if !(self.f_ec >= 1.0 && self.f_ec.is_finite()) {
            return Err(Error::InvalidInput(format!("error-correction efficiency must be at least 1, got {}", self.f_ec)));
        }
        Ok(())
    }

    /// Overall transmittance `η_det · 10^(−α d / 10)`.
    pub fn transmittance(&self) -> f64 {
        self.detector_efficiency * 10f64.powf(-self.alpha_db_per_km * self.distance_km / 10.0)
    }
}

/// Gain and error gain of one setting or region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub gain: f64,
    pub error_gain: f64,
}

impl Observation {
    /// Probability of the correct outcome.
    pub fn correct_gain(&self) -> f64 {
        self.gain - self.error_gain
    }

    /// Probability of outcome `b` when the bit sent was `a`.
    pub fn outcome_gain(&self, sent: Bit, outcome: Bit) -> f64 {
        if sent == outcome {
            self.correct_gain()
        } else {
            self.error_gain
        }
    }

    pub fn error_rate(&self) -> f64 {
        if self.gain > 0.0 {
            self.error_gain / self.gain
        } else {
            0.0
        }
    }

    fn scaled_add(&mut self, o: Observation, w: f64) {
        self.gain += w * o.gain;
        self.error_gain += w * o.error_gain;
    }
}

/// Observation of a setting whose detectors receive the mean photon numbers
/// `m_correct` and `m_error`.
pub fn point_observation(m_correct: f64, m_error: f64, p_dark: f64) -> Observation {
    let ln_a = (-p_dark).ln_1p();
    let gain = -(2.0 * ln_a - m_correct - m_error).exp_m1();
    let miss_err = -(ln_a - m_error).exp_m1();
    let a_c = (ln_a - m_correct).exp();
    Observation { gain, error_gain: 0.5 * (1.0 + a_c) * miss_err }
}

/// Detector-mode transformation applied by Bob's receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Measurement {
    /// Detector 0 watches `e`, detector 1 watches `l`.
    TimeBin,
    /// 50:50 interference; detector 0 is the output `(a_e + e^{−iϕ} a_l)/√2`.
    Interferometric { phase: f64 },
}

impl Measurement {
    /// Mean photon numbers at detectors 0 and 1 for coherent amplitudes
    /// `(α_e, α_l)`.
    pub fn port_intensities(&self, alpha_e: C64, alpha_l: C64) -> (f64, f64) {
        match *self {
            Measurement::TimeBin => (alpha_e.norm_sqr(), alpha_l.norm_sqr()),
            Measurement::Interferometric { phase } => {
                let r = C64::from_polar(1.0, -phase) * alpha_l;
                (0.5 * (alpha_e + r).norm_sqr(), 0.5 * (alpha_e - r).norm_sqr())
            }
        }
    }
}

/// Measurement Bob applies to a basis of the passive transmitter.
pub fn passive_measurement(basis: Basis) -> Measurement {
    match basis {
        Basis::Z => Measurement::TimeBin,
        Basis::X => Measurement::Interferometric { phase: 0.0 },
    }
}

/// Measurement Bob applies to a basis of the OIL transmitter: the key basis
/// interferes the two bins with reference phase `π/2`, the test basis
/// resolves arrival time.
pub fn oil_measurement(basis: Basis) -> Measurement {
    match basis {
        Basis::Z => Measurement::Interferometric { phase: FRAC_PI_2 },
        Basis::X => Measurement::TimeBin,
    }
}

fn split_ports(ports: (f64, f64), bit: Bit) -> (f64, f64) {
    match bit {
        Bit::Zero => ports,
        Bit::One => (ports.1, ports.0),
    }
}

/// Region-averaged observations of the passive transmitter, using the same
/// node sets as the state integrals. Indexed like
/// [`PassiveStateSet`](crate::passive::PassiveStateSet): `(basis·3 + I)·2 + bit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassiveObservables {
    pub regions: Vec<Observation>,
}

impl PassiveObservables {
    pub fn get(&self, bit: Bit, basis: Basis, intensity: Intensity) -> Observation {
        self.regions[(basis.index() * 3 + intensity.index()) * 2 + bit.index()]
    }

    /// Bit-averaged observation; both bit regions carry equal mass.
    pub fn basis(&self, basis: Basis, intensity: Intensity) -> Observation {
        let (a, b) = (self.get(Bit::Zero, basis, intensity), self.get(Bit::One, basis, intensity));
        Observation { gain: 0.5 * (a.gain + b.gain), error_gain: 0.5 * (a.error_gain + b.error_gain) }
    }
}

/// Averages the point observations over each post-selection region.
pub fn passive_observables(params: &PassiveParams, channel: &ChannelParams, nodes: usize) -> Result<PassiveObservables> {
    params.validate()?;
    channel.validate()?;
    let eta = channel.transmittance();
    let mut regions = Vec::with_capacity(12);
    for basis in Basis::ALL {
        for intensity in Intensity::ALL {
            for bit in Bit::ALL {
                let quad = region_quadrature(bit, basis, intensity, &params.geometry, nodes);
                let mut acc = Observation { gain: 0.0, error_gain: 0.0 };
                let mut mass = 0.0;
                let m = passive_measurement(basis);
                for node in quad.columns.iter().flatten() {
                    let ae = C64::new(node.amp_e, 0.0);
                    let al = C64::from_polar(node.amp_l, node.phi);
                    let (p0, p1) = m.port_intensities(ae, al);
                    let (mc, me) = split_ports((eta * params.mu_max * p0, eta * params.mu_max * p1), bit);
                    acc.scaled_add(point_observation(mc, me, channel.p_dark), node.weight);
                    mass += node.weight;
                }
                if !(mass > 0.0) {
                    return Err(Error::EmptyRegion(format!("{bit:?}{basis:?}{intensity:?}")));
                }
                regions.push(Observation { gain: acc.gain / mass, error_gain: acc.error_gain / mass });
            }
        }
    }
    Ok(PassiveObservables { regions })
}

/// Point observations of the OIL transmitter, indexed `[basis][I][bit]`;
/// key-basis decoy entries are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OilObservables {
    pub settings: Vec<Option<Observation>>,
}

impl OilObservables {
    pub fn get(&self, bit: Bit, basis: Basis, intensity: Intensity) -> Option<Observation> {
        self.settings[(basis.index() * 3 + intensity.index()) * 2 + bit.index()]
    }

    pub fn basis(&self, basis: Basis, intensity: Intensity) -> Option<Observation> {
        let a = self.get(Bit::Zero, basis, intensity)?;
        let b = self.get(Bit::One, basis, intensity)?;
        Some(Observation { gain: 0.5 * (a.gain + b.gain), error_gain: 0.5 * (a.error_gain + b.error_gain) })
    }
}

pub fn oil_observables(params: &OilParams, channel: &ChannelParams) -> Result<OilObservables> {
    params.validate()?;
    channel.validate()?;
    let eta = channel.transmittance();
    let mut settings = Vec::with_capacity(12);
    for basis in Basis::ALL {
        for intensity in Intensity::ALL {
            for bit in Bit::ALL {
                if basis == Basis::Z && intensity != Intensity::I0 {
                    settings.push(None);
                    continue;
                }
                let s = setting_to_phases(bit, basis, intensity, &params.kappa)?;
                let amps = mode_amplitudes(s.phi12, s.phi23, params.mu_in, 0.0);
                let (p0, p1) = oil_measurement(basis).port_intensities(amps[0], amps[1]);
                let (mc, me) = split_ports((eta * p0, eta * p1), bit);
                settings.push(Some(point_observation(mc, me, channel.p_dark)));
            }
        }
    }
    Ok(OilObservables { settings })
}

/// Model yield `1 − (1 − p_d)²(1 − η)^n` of an n-photon input.
pub fn reference_yield(n: u32, eta: f64, p_dark: f64) -> f64 {
    let loss = if n == 0 { 0.0 } else { n as f64 * (-eta).ln_1p() };
    -(2.0 * (-p_dark).ln_1p() + loss).exp_m1()
}

/// Fock-space transformation of `m` photons in `(e, l)` to detector modes:
/// `U[j][k] = ⟨j, m−j|_d U |k, m−k⟩_{el}`.
fn detector_unitary(m: u32, measurement: Measurement) -> Vec<Vec<C64>> {
    let d = m as usize + 1;
    match measurement {
        Measurement::TimeBin => {
            (0..d).map(|j| (0..d).map(|k| if j == k { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).collect()).collect()
        }
        Measurement::Interferometric { phase } => {
            let fact = |x: u32| (1..=x).map(f64::from).product::<f64>();
            let scale = 2f64.powf(-(m as f64) / 2.0);
            let mut u = vec![vec![C64::new(0.0, 0.0); d]; d];
            for k in 0..=m {
                let ph = C64::from_polar(1.0, -phase * (m - k) as f64);
                let norm_in = (fact(k) * fact(m - k)).sqrt();
                for j in 0..=m {
                    let mut c = 0.0;
                    for r in j.saturating_sub(m - k)..=j.min(k) {
                        let sign = if ((m - k) - (j - r)).is_multiple_of(2) { 1.0 } else { -1.0 };
                        c += sign * (binomial(k as u64, r as u64) * binomial((m - k) as u64, (j - r) as u64)) as f64;
                    }
                    let norm_out = (fact(j) * fact(m - j)).sqrt();
                    u[j as usize][k as usize] = ph * (c * scale * norm_out / norm_in);
                }
            }
            u
        }
    }
}

/// Joint photon-number distribution `P(k_0, k_1)` at the two detectors,
/// after tracing out every mode other than `e` (mode 0) and `l` (mode 1).
pub fn detector_distribution(rho: &HermitianMatrix, basis: &NPhotonBasis, measurement: Measurement) -> Result<Vec<Vec<f64>>> {
    if rho.dim() != basis.len() {
        return Err(Error::DimensionMismatch(rho.dim(), basis.len()));
    }
    let n = basis.n();
    let mut out = vec![vec![0.0; n as usize + 1]; n as usize + 1];
    // Group basis states by their configuration outside (e, l).
    let mut groups: std::collections::BTreeMap<Vec<u32>, Vec<usize>> = std::collections::BTreeMap::new();
    for i in 0..basis.len() {
        groups.entry(basis.config(i).occupations[2..].to_vec()).or_default().push(i);
    }
    for members in groups.values() {
        let m = basis.config(members[0]).occupations[0] + basis.config(members[0]).occupations[1];
        let u = detector_unitary(m, measurement);
        let d = m as usize + 1;
        // Index within the group by the e occupation.
        let mut idx = vec![usize::MAX; d];
        for &i in members {
            idx[basis.config(i).occupations[0] as usize] = i;
        }
        for (j, uj) in u.iter().enumerate() {
            let mut p = C64::new(0.0, 0.0);
            for k in 0..d {
                for k2 in 0..d {
                    if idx[k] == usize::MAX || idx[k2] == usize::MAX {
                        continue;
                    }
                    p += uj[k] * rho.get(idx[k], idx[k2]) * uj[k2].conj();
                }
            }
            out[j][m as usize - j] += p.re;
        }
    }
    Ok(out)
}

/// Model yield of an n-photon state whose photons outside `(e, l)` never
/// reach Bob: `Σ_m P(m photons in e, l) · Ỹ_m`.
pub fn reference_yield_of_state(rho: &HermitianMatrix, basis: &NPhotonBasis, eta: f64, p_dark: f64) -> Result<f64> {
    let dist = detector_distribution(rho, basis, Measurement::TimeBin)?;
    let mut y = 0.0;
    for (k0, row) in dist.iter().enumerate() {
        for (k1, &p) in row.iter().enumerate() {
            y += p * reference_yield((k0 + k1) as u32, eta, p_dark);
        }
    }
    Ok(y.clamp(0.0, 1.0))
}

/// Model error probability `Tr[ρ Π_err]` of an n-photon state, where the
/// correct detector for bit `bit` is detector `bit`.
pub fn reference_error(
    rho: &HermitianMatrix,
    basis: &NPhotonBasis,
    measurement: Measurement,
    bit: Bit,
    eta: f64,
    p_dark: f64,
) -> Result<f64> {
    let dist = detector_distribution(rho, basis, measurement)?;
    let mut g = 0.0;
    for (k0, row) in dist.iter().enumerate() {
        for (k1, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (kc, ke) = if bit == Bit::Zero { (k0, k1) } else { (k1, k0) };
            let a_c = (1.0 - p_dark) * (1.0 - eta).powi(kc as i32);
            let a_e = (1.0 - p_dark) * (1.0 - eta).powi(ke as i32);
            g += p * 0.5 * (1.0 + a_c) * (1.0 - a_e);
        }
    }
    Ok(g.max(0.0))
}

#[cfg(test)]
mod tests {
    #[test]
    fn reference_yield_at_unit_transmittance() {
        let pd = 1e-6;
        let dark = pd * (2.0 - pd);
        assert!((reference_yield(0, 1.0, pd) - dark).abs() < 1e-12 * dark);
        assert_eq!(reference_yield(3, 1.0, pd), 1.0);
    }

    use super::*;
    use crate::mode_basis::enumerate_basis;
    use crate::passive::RegionGeometry;

    #[test]
    fn transmittance_examples() {
        assert_eq!(ChannelParams::at_distance(0.0).transmittance(), 1.0);
        assert!((ChannelParams::at_distance(50.0).transmittance() - 0.1).abs() < 1e-15);
        assert!((ChannelParams::at_distance(100.0).transmittance() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn point_observation_limits() {
        let pd = 1e-6;
        let o = point_observation(0.0, 0.0, pd);
        assert!((o.gain - (1.0 - (1.0 - pd) * (1.0 - pd))).abs() < 1e-9 * pd);
        assert!((o.error_rate() - 0.5).abs() < 1e-9);
        let o = point_observation(0.3, 0.0, 0.0);
        assert_eq!(o.error_gain, 0.0);
        let tiny = point_observation(1e-9, 0.0, pd);
        assert!((tiny.error_rate() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn reference_yield_examples() {
        let pd: f64 = 1e-6;
        assert!((reference_yield(0, 0.1, pd) - (1.0 - (1.0 - pd).powi(2))).abs() < 1e-9 * pd);
        assert!((reference_yield(3, 1.0, pd) - 1.0).abs() < 1e-15);
        assert!((reference_yield(2, 0.1, pd) - (1.0 - (1.0 - pd).powi(2) * 0.81)).abs() < 1e-15);
    }

    #[test]
    fn reference_error_vacuum_and_perfect_state() {
        let pd = 1e-3;
        let b0 = enumerate_basis(0, 2, &[]);
        let vac = HermitianMatrix::from_real_diagonal(&[1.0]);
        let g = reference_error(&vac, &b0, Measurement::TimeBin, Bit::Zero, 0.3, pd).unwrap();
        assert!((g - (pd * (1.0 - pd) + 0.5 * pd * pd)).abs() < 1e-15);
        let b1 = enumerate_basis(1, 2, &[]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = HermitianMatrix::outer(&[C64::new(s, 0.0), C64::new(s, 0.0)], 1.0);
        let m = Measurement::Interferometric { phase: 0.0 };
        assert!(reference_error(&plus, &b1, m, Bit::Zero, 1.0, 0.0).unwrap().abs() < 1e-15);
        assert!((reference_error(&plus, &b1, m, Bit::One, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn interferometer_matches_coherent_ports() {
        // A two-photon Fock state from a coherent pair: port distribution must
        // be binomial in the coherent port intensities.
        let b = enumerate_basis(2, 2, &[]);
        let (ae, al) = (C64::new(0.7, 0.0), C64::from_polar(0.4, 0.9));
        let v = b.coherent_vector(&[ae, al]);
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let rho = HermitianMatrix::outer(&v, 1.0 / norm);
        let m = Measurement::Interferometric { phase: 0.3 };
        let dist = detector_distribution(&rho, &b, m).unwrap();
        let (p0, p1) = m.port_intensities(ae, al);
        let (q0, q1) = (p0 / (p0 + p1), p1 / (p0 + p1));
        assert!((dist[2][0] - q0 * q0).abs() < 1e-12);
        assert!((dist[1][1] - 2.0 * q0 * q1).abs() < 1e-12);
        assert!((dist[0][2] - q1 * q1).abs() < 1e-12);
    }

    #[test]
    fn passive_observables_are_consistent() {
        let params = PassiveParams::new(0.8, 0.0, RegionGeometry::default(), 4);
        let o = passive_observables(&params, &ChannelParams::at_distance(50.0), 8).unwrap();
        for r in &o.regions {
            assert!(0.0 <= r.error_gain && r.error_gain <= r.gain && r.gain <= 1.0);
        }
        let (a, b) = (o.get(Bit::Zero, Basis::Z, Intensity::I0), o.get(Bit::One, Basis::Z, Intensity::I0));
        assert!((a.gain - b.gain).abs() < 1e-5 * a.gain, "{a:?} {b:?}");
        let dark = passive_observables(&params, &ChannelParams { distance_km: 1e6, ..Default::default() }, 8).unwrap();
        let pd = 1e-6;
        assert!((dark.regions[0].gain - (1.0 - (1.0f64 - pd).powi(2))).abs() < 1e-15);
    }

    #[test]
    fn oil_observables_examples() {
        let p = OilParams { mu_in: 0.5, omega: 0.0, kappa: [0.0, 0.5, 1.0], n_cut: 4, jitter: None };
        let ch = ChannelParams { p_dark: 0.0, ..ChannelParams::at_distance(50.0) };
        let o = oil_observables(&p, &ch).unwrap();
        let z0 = o.get(Bit::Zero, Basis::Z, Intensity::I0).unwrap();
        assert!(z0.error_gain.abs() < 1e-15);
        assert!((z0.gain - (1.0 - (-0.05f64).exp())).abs() < 1e-15);
        let vac = oil_observables(&p, &ChannelParams::at_distance(50.0)).unwrap();
        let v = vac.get(Bit::One, Basis::X, Intensity::I2).unwrap();
        assert!((v.gain - (1.0 - (1.0f64 - 1e-6).powi(2))).abs() < 1e-15);
        assert!(o.get(Bit::Zero, Basis::Z, Intensity::I1).is_none());
    }
}
