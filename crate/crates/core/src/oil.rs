//! Optical-injection-locking transmitter: per-setting n-photon states over the
//! modes `(e, l, P, F)`, where `P` and `F` carry the residual leakage of the
//! blocked pulses before and after the round.
//!
//! The key basis is labelled `Z` and the test basis `X`. Physically the key
//! states are the time-bin eigenstates of the Y operator and the test states
//! are the early/late (Z-operator) eigenstates.

use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, C64};
use crate::mode_basis::{enumerate_basis, NPhotonBasis};
use crate::types::{Basis, Bit, Intensity};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

pub const MODE_COUNT: usize = 4;
pub const LEAK_MODES: [usize; 2] = [2, 3];

/// Gaussian fluctuations of the two controlled phases, averaged over a fixed
/// set of pseudo-random draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseJitter {
    pub sigma: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Source parameters of the OIL transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OilParams {
    pub mu_in: f64,
    pub omega: f64,
    /// `κ` of the test-basis intensities `I0, I1, I2`; `κ = 0` is `I0`.
    pub kappa: [f64; 3],
    #[serde(default = "default_n_cut")]
    pub n_cut: u32,
    #[serde(default)]
    pub jitter: Option<PhaseJitter>,
}

fn default_n_cut() -> u32 {
    4
}

/// Mean photon number `μ_in(1 + cos κπ)/2` of a test-basis setting.
pub fn intensity_of_kappa(mu_in: f64, kappa: f64) -> f64 {
    0.5 * mu_in * (1.0 + (kappa * PI).cos())
}

/// Inverse of [`intensity_of_kappa`] on `κ ∈ [0, 1]`.
pub fn kappa_for_intensity(mu_in: f64, intensity: f64) -> Result<f64> {
    if !(0.0..=mu_in).contains(&intensity) {
        return Err(Error::InvalidInput(format!("intensity {intensity} outside [0, mu_in = {mu_in}]")));
    }
    Ok((2.0 * intensity / mu_in - 1.0).clamp(-1.0, 1.0).acos() / PI)
}

impl OilParams {
    /// Parameters from the three test-basis mean photon numbers, with
    /// `I0 = μ_in` and leakage `ω = 10^(−Att/10) μ_in / 2`.
    pub fn from_intensities(i0: f64, i1: f64, i2: f64, att_db: f64, n_cut: u32) -> Result<Self> {
        if !(i0 > i1 && i1 > i2 && i2 > 0.0) {
            return Err(Error::InvalidInput(format!("intensities must satisfy I0 > I1 > I2 > 0, got {i0}, {i1}, {i2}")));
        }
        let p = OilParams {
            mu_in: i0,
            omega: 0.5 * 10f64.powf(-att_db / 10.0) * i0,
            kappa: [0.0, kappa_for_intensity(i0, i1)?, kappa_for_intensity(i0, i2)?],
            n_cut,
            jitter: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_in > 0.0 && self.mu_in.is_finite()) {
            return Err(Error::InvalidInput(format!("mu_in must be positive, got {}", self.mu_in)));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidInput(format!("omega must be non-negative, got {}", self.omega)));
        }
        if self.kappa[0] != 0.0 {
            return Err(Error::InvalidInput("kappa of I0 must be 0".into()));
        }
        if self.kappa.iter().any(|k| !(0.0..=1.0).contains(k)) {
            return Err(Error::InvalidInput(format!("kappa values must lie in [0, 1], got {:?}", self.kappa)));
        }
        if self.n_cut < 1 {
            return Err(Error::InvalidInput("n_cut must be at least 1".into()));
        }
        Ok(())
    }

    pub fn intensity(&self, i: Intensity) -> f64 {
        intensity_of_kappa(self.mu_in, self.kappa[i.index()])
    }

    pub fn basis(&self, n: u32) -> NPhotonBasis {
        enumerate_basis(n, MODE_COUNT, &LEAK_MODES)
    }
}

/// Controlled phases of one preparation setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OilSetting {
    pub bit: Bit,
    pub basis: Basis,
    pub intensity: Intensity,
    pub phi12: f64,
    pub phi23: f64,
}

impl OilSetting {
    pub fn mu_e(&self, mu_in: f64) -> f64 {
        0.5 * mu_in * (1.0 + self.phi12.cos())
    }

    pub fn mu_l(&self, mu_in: f64) -> f64 {
        0.5 * mu_in * (1.0 + self.phi23.cos())
    }
}

/// Phases Alice applies for a (bit, basis, intensity) choice.
pub fn setting_to_phases(bit: Bit, basis: Basis, intensity: Intensity, kappa: &[f64; 3]) -> Result<OilSetting> {
    let (phi12, phi23) = match (basis, bit) {
        (Basis::Z, _) if intensity != Intensity::I0 => {
            return Err(Error::InvalidInput("no decoy intensities in the key basis".into()))
        }
        (Basis::Z, Bit::Zero) => (FRAC_PI_2, FRAC_PI_2),
        (Basis::Z, Bit::One) => (-FRAC_PI_2, -FRAC_PI_2),
        (Basis::X, Bit::Zero) => (kappa[intensity.index()] * PI, PI),
        (Basis::X, Bit::One) => (PI, kappa[intensity.index()] * PI),
    };
    Ok(OilSetting { bit, basis, intensity, phi12, phi23 })
}

/// Coherent amplitudes of `(e, l, P, F)` relative to the random phase `φ1`.
pub fn mode_amplitudes(phi12: f64, phi23: f64, mu_in: f64, omega: f64) -> [C64; 4] {
    let h = 0.5 * mu_in.sqrt();
    let one = C64::new(1.0, 0.0);
    let w = omega.sqrt();
    [
        (one + C64::from_polar(1.0, phi12)) * h,
        C64::from_polar(1.0, phi12) * (one + C64::from_polar(1.0, phi23)) * h,
        C64::new(w, 0.0),
        C64::from_polar(w, phi12 + phi23),
    ]
}

fn check_basis(n: u32, basis: &NPhotonBasis) -> Result<()> {
    if basis.mode_count() != MODE_COUNT || basis.n() != n {
        return Err(Error::InvalidInput(format!(
            "basis must cover {n} photons in {MODE_COUNT} modes, got {} in {}",
            basis.n(),
            basis.mode_count()
        )));
    }
    Ok(())
}

fn block_vector(phi12: f64, phi23: f64, params: &OilParams, basis: &NPhotonBasis) -> Vec<C64> {
    let amps = mode_amplitudes(phi12, phi23, params.mu_in, params.omega);
    let x: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let s = (-0.5 * x).exp();
    basis.coherent_vector(&amps).into_iter().map(|z| z * s).collect()
}

/// Unnormalized n-photon vector `|γ⟩` of a setting without phase jitter.
pub fn oil_gamma(setting: &OilSetting, params: &OilParams, n: u32, basis: &NPhotonBasis) -> Result<Vec<C64>> {
    check_basis(n, basis)?;
    Ok(block_vector(setting.phi12, setting.phi23, params, basis))
}

/// Sub-normalized n-photon operator emitted for a setting, after averaging the
/// random global phase (and the controlled-phase jitter when configured).
pub fn oil_state_n(setting: &OilSetting, params: &OilParams, n: u32, basis: &NPhotonBasis) -> Result<HermitianMatrix> {
    if n > params.n_cut {
        return Err(Error::InvalidInput(format!("n = {n} exceeds n_cut = {}", params.n_cut)));
    }
    check_basis(n, basis)?;
    match params.jitter {
        None => Ok(HermitianMatrix::outer(&block_vector(setting.phi12, setting.phi23, params, basis), 1.0)),
        Some(j) if j.samples == 0 || j.sigma == 0.0 => {
            Ok(HermitianMatrix::outer(&block_vector(setting.phi12, setting.phi23, params, basis), 1.0))
        }
        Some(j) => {
            let normal = Normal::new(0.0, j.sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(j.seed);
            let mut acc = HermitianMatrix::zeros(basis.len());
            for _ in 0..j.samples {
                let d12 = normal.sample(&mut rng);
                let d23 = normal.sample(&mut rng);
                let v = block_vector(setting.phi12 + d12, setting.phi23 + d23, params, basis);
                acc.add_scaled(&HermitianMatrix::outer(&v, 1.0), 1.0 / j.samples as f64);
            }
            Ok(acc)
        }
    }
}

/// Normalized n-photon state of one setting.
pub fn oil_setting_state(bit: Bit, basis: Basis, intensity: Intensity, params: &OilParams, n: u32) -> Result<HermitianMatrix> {
    let s = setting_to_phases(bit, basis, intensity, &params.kappa)?;
    let m = oil_state_n(&s, params, n, &params.basis(n))?;
    let t = m.trace();
    if !(t > 0.0) {
        return Err(Error::EmptyRegion(format!("OIL setting {bit:?}{basis:?}{intensity:?} at n = {n}")));
    }
    Ok(m.scaled(1.0 / t))
}

/// Bit-averaged normalized state `½ρ_0 + ½ρ_1` of a basis and intensity.
pub fn oil_mixed_state(basis: Basis, intensity: Intensity, params: &OilParams, n: u32) -> Result<HermitianMatrix> {
    let mut m = oil_setting_state(Bit::Zero, basis, intensity, params, n)?.scaled(0.5);
    m.add_scaled(&oil_setting_state(Bit::One, basis, intensity, params, n)?, 0.5);
    Ok(m)
}

/// Poisson photon-number probability of a setting with total intensity `μ`.
pub fn oil_p_n(mu: f64, omega: f64, n: u32) -> f64 {
    let x = mu + 2.0 * omega;
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    (-x).exp() * x.powi(n as i32) / fact
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(omega: f64) -> OilParams {
        OilParams { mu_in: 0.6, omega, kappa: [0.0, 0.6, 0.98], n_cut: 4, jitter: None }
    }

    #[test]
    fn setting_examples() {
        let k = [0.0, 1.0, 0.5];
        let s = setting_to_phases(Bit::Zero, Basis::Z, Intensity::I0, &k).unwrap();
        assert_eq!((s.phi12, s.phi23), (FRAC_PI_2, FRAC_PI_2));
        let s = setting_to_phases(Bit::Zero, Basis::X, Intensity::I1, &k).unwrap();
        assert_eq!((s.phi12, s.phi23), (PI, PI));
        assert!(s.mu_e(1.0).abs() < 1e-15 && s.mu_l(1.0).abs() < 1e-15);
        let s = setting_to_phases(Bit::One, Basis::X, Intensity::I0, &k).unwrap();
        assert_eq!((s.phi12, s.phi23), (PI, 0.0));
        assert!(s.mu_e(1.0).abs() < 1e-15 && (s.mu_l(1.0) - 1.0).abs() < 1e-15);
        let err = setting_to_phases(Bit::Zero, Basis::Z, Intensity::I1, &k).unwrap_err();
        assert!(err.to_string().contains("no decoy intensities in the key basis"));
    }

    #[test]
    fn kappa_inversion() {
        for i in [1e-4, 0.01, 0.3, 0.59] {
            let k = kappa_for_intensity(0.6, i).unwrap();
            assert!((intensity_of_kappa(0.6, k) - i).abs() < 1e-14);
        }
        assert!(kappa_for_intensity(0.6, 0.7).is_err());
    }

    #[test]
    fn vacuum_and_single_photon_blocks() {
        let p = params(0.0);
        let s = setting_to_phases(Bit::Zero, Basis::Z, Intensity::I0, &p.kappa).unwrap();
        let s0 = oil_state_n(&s, &p, 0, &p.basis(0)).unwrap();
        assert!((s0.get(0, 0).re - (-0.6f64).exp()).abs() < 1e-15);
        let s1 = oil_state_n(&s, &p, 1, &p.basis(1)).unwrap();
        let w = (-0.6f64).exp() * 0.6;
        assert!((s1.get(0, 0).re - 0.5 * w).abs() < 1e-15);
        assert!((s1.get(1, 0) - C64::new(0.0, 0.5 * w)).norm() < 1e-15);
        assert_eq!(s1.get(2, 2).norm(), 0.0);
    }

    #[test]
    fn traces_are_poisson() {
        let p = params(0.02);
        for (bit, basis, i) in [(Bit::One, Basis::X, Intensity::I1), (Bit::Zero, Basis::Z, Intensity::I0)] {
            let s = setting_to_phases(bit, basis, i, &p.kappa).unwrap();
            let mu = s.mu_e(p.mu_in) + s.mu_l(p.mu_in);
            for n in 0..=4 {
                let m = oil_state_n(&s, &p, n, &p.basis(n)).unwrap();
                assert!((m.trace() - oil_p_n(mu, p.omega, n)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn key_and_test_signal_states_coincide() {
        for omega in [0.0, 0.01] {
            let p = params(omega);
            let z = oil_mixed_state(Basis::Z, Intensity::I0, &p, 1).unwrap();
            let x = oil_mixed_state(Basis::X, Intensity::I0, &p, 1).unwrap();
            assert!(z.max_abs_diff(&x) <= 1e-10);
            assert!((z.trace() - 1.0).abs() < 1e-12);
        }
        let z = oil_mixed_state(Basis::Z, Intensity::I0, &params(0.0), 1).unwrap();
        assert!((z.get(0, 0).re - 0.5).abs() < 1e-14 && z.get(0, 1).norm() < 1e-14);
    }

    #[test]
    fn jitter_off_matches_plain_and_on_stays_valid() {
        let mut p = params(0.01);
        p.jitter = Some(PhaseJitter { sigma: 0.05, samples: 64, seed: 1 });
        let s = setting_to_phases(Bit::Zero, Basis::Z, Intensity::I0, &p.kappa).unwrap();
        let m = oil_state_n(&s, &p, 1, &p.basis(1)).unwrap();
        assert!(m.max_asymmetry() < 1e-15);
        let e = crate::linalg::hermitian_eigen(&m).unwrap();
        assert!(e.values[0] > -1e-15);
    }
}
