//! Fully passive transmitter: post-selection geometry, phase inversion,
//! leakage amplitudes and the n-photon operators conditioned on a classical
//! outcome `(θ, φ, μ)`.
//!
//! Mode order everywhere in this module is `(e, l, 1, 3, 5)`; modes 1, 3 and 5
//! are the leakage modes.

pub mod oracle;
pub mod quadrature;
pub mod states;

use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, C64};
use crate::mode_basis::{enumerate_basis, NPhotonBasis};
use crate::types::{Basis, Bit, Intensity, RegionSpec};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

pub use oracle::{mc_region_oracle, McEstimate};
pub use quadrature::{region_quadrature, QuadratureOptions, RegionQuadrature};
pub use states::{region_average, region_state, PassiveStateSet, RegionAverage, RegionState};

/// Number of optical modes carried by a passive round.
pub const MODE_COUNT: usize = 5;
/// Indices of the leakage modes 1, 3, 5 within `(e, l, 1, 3, 5)`.
pub const LEAK_MODES: [usize; 3] = [2, 3, 4];
/// Largest photon number tracked for the photon-number distribution.
pub const PN_MAX: usize = 20;

/// Thresholds of the post-selection regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionGeometry {
    pub delta_theta_z: f64,
    pub delta_theta_x: f64,
    pub delta_phi_x: f64,
    /// Lower edge of `I0` and upper edge of `I1`, as a fraction of `μ_max`.
    pub t1: f64,
    /// Lower edge of `I1` and upper edge of `I2`, as a fraction of `μ_max`.
    pub t2: f64,
}

impl Default for RegionGeometry {
    fn default() -> Self {
        RegionGeometry { delta_theta_z: 0.1, delta_theta_x: 0.11, delta_phi_x: 0.09, t1: 0.05, t2: 0.01 }
    }
}

impl RegionGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = |c: bool, what: &str| if c { Ok(()) } else { Err(Error::InvalidInput(what.to_string())) };
        ok(self.delta_theta_z > 0.0 && self.delta_theta_z < FRAC_PI_2, "delta_theta_z must lie in (0, π/2)")?;
        ok(self.delta_theta_x > 0.0 && self.delta_theta_x < FRAC_PI_2, "delta_theta_x must lie in (0, π/2)")?;
        ok(self.delta_phi_x > 0.0 && self.delta_phi_x < PI, "delta_phi_x must lie in (0, π)")?;
        ok(self.t2 > 0.0 && self.t2 < self.t1 && self.t1 < 2.0, "thresholds must satisfy 0 < t2 < t1 < 2")
    }
}

/// Photon-number leakage truncation: `n_l_cut[n]` is the largest number of
/// leakage photons kept in the n-photon block.
pub fn default_leak_schedule(n_cut: u32) -> Vec<u32> {
    (0..=n_cut).map(|n| if n <= 2 { n } else { 1 }).collect()
}

/// Source parameters of the passive transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassiveParams {
    pub mu_max: f64,
    pub omega: f64,
    #[serde(default)]
    pub geometry: RegionGeometry,
    #[serde(default = "default_n_cut")]
    pub n_cut: u32,
    /// Per-n leakage cut; missing entries mean no truncation.
    #[serde(default)]
    pub n_l_cut: Vec<u32>,
}

fn default_n_cut() -> u32 {
    4
}

impl PassiveParams {
    pub fn new(mu_max: f64, omega: f64, geometry: RegionGeometry, n_cut: u32) -> Self {
        PassiveParams { mu_max, omega, geometry, n_cut, n_l_cut: default_leak_schedule(n_cut) }
    }

    /// `ω = μ_max · 10^(−Att/10)`.
    pub fn from_attenuation(mu_max: f64, att_db: f64, geometry: RegionGeometry, n_cut: u32) -> Self {
        Self::new(mu_max, mu_max * 10f64.powf(-att_db / 10.0), geometry, n_cut)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_max > 0.0 && self.mu_max.is_finite()) {
            return Err(Error::InvalidInput(format!("mu_max must be positive, got {}", self.mu_max)));
        }
        if !(self.omega >= 0.0 && self.omega <= self.mu_max) {
            return Err(Error::InvalidInput(format!("omega must lie in [0, mu_max], got {}", self.omega)));
        }
        if self.n_cut < 1 || self.n_cut as usize > PN_MAX {
            return Err(Error::InvalidInput(format!("n_cut must lie in [1, {PN_MAX}], got {}", self.n_cut)));
        }
        self.geometry.validate()
    }

    pub fn leak_cut(&self, n: u32) -> u32 {
        self.n_l_cut.get(n as usize).copied().unwrap_or(n).min(n)
    }

    /// Full n-photon basis over `(e, l, 1, 3, 5)`.
    pub fn full_basis(&self, n: u32) -> NPhotonBasis {
        enumerate_basis(n, MODE_COUNT, &LEAK_MODES)
    }

    /// Basis used for the n-photon block, truncated per the leakage schedule.
    pub fn basis(&self, n: u32) -> NPhotonBasis {
        let full = self.full_basis(n);
        let cut = self.leak_cut(n);
        if cut >= n {
            full
        } else {
            full.leak_truncated_subbasis(cut)
        }
    }

    pub fn bases(&self) -> Vec<NPhotonBasis> {
        (0..=self.n_cut).map(|n| self.basis(n)).collect()
    }
}

/// Classical post-selection outcome plus the derived mode intensities and phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPoint {
    pub theta: f64,
    pub phi: f64,
    pub mu: f64,
    pub mu_e: f64,
    pub mu_l: f64,
    pub phi_e: f64,
    pub phi_l: f64,
}

impl TargetPoint {
    pub fn new(theta: f64, phi: f64, mu: f64, phi_e: f64) -> Self {
        let c = (theta / 2.0).cos();
        let s = (theta / 2.0).sin();
        TargetPoint { theta, phi, mu, mu_e: mu * c * c, mu_l: mu * s * s, phi_e, phi_l: phi_e + phi }
    }
}

/// One of the four equally likely sign branches of the phase inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchSigns {
    pub s_e: i8,
    pub s_l: i8,
}

impl BranchSigns {
    pub const ALL: [BranchSigns; 4] = [
        BranchSigns { s_e: 1, s_l: 1 },
        BranchSigns { s_e: 1, s_l: -1 },
        BranchSigns { s_e: -1, s_l: 1 },
        BranchSigns { s_e: -1, s_l: -1 },
    ];

    pub fn negated(self) -> Self {
        BranchSigns { s_e: -self.s_e, s_l: -self.s_l }
    }
}

/// Reduce an angle to `(−π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

fn half_sum_phase(a: f64, b: f64) -> f64 {
    let a = a.rem_euclid(TAU);
    let b = b.rem_euclid(TAU);
    let shift = if (a - b).abs() > PI { PI } else { 0.0 };
    0.5 * (a + b) + shift
}

/// Map the four random phases of a pulse train to the post-selection variables.
pub fn target_from_phases(phases: [f64; 4], mu_max: f64) -> TargetPoint {
    let [p1, p2, p3, p4] = phases;
    let mu_e = 0.5 * mu_max * (1.0 + (p1 - p2).cos());
    let mu_l = 0.5 * mu_max * (1.0 + (p3 - p4).cos());
    let mu = mu_e + mu_l;
    let phi_e = half_sum_phase(p1, p2);
    let phi_l = half_sum_phase(p3, p4);
    let theta = if mu > 0.0 { 2.0 * (mu_e / mu).sqrt().min(1.0).acos() } else { 0.0 };
    TargetPoint { theta, phi: wrap_pi(phi_l - phi_e), mu, mu_e, mu_l, phi_e, phi_l }
}

fn clamped_acos(x: f64, what: &str) -> Result<f64> {
    if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&x) {
        return Err(Error::Domain(format!("{what}: arccos argument {x} outside [-1, 1]")));
    }
    Ok(x.clamp(-1.0, 1.0).acos())
}

/// Half-widths `(½·arccos(2μ_e/μ_max − 1), ½·arccos(2μ_l/μ_max − 1))`.
pub fn half_phase_spreads(p: &TargetPoint, mu_max: f64) -> Result<(f64, f64)> {
    let ue = clamped_acos(2.0 * p.mu_e / mu_max - 1.0, "early mode")?;
    let ul = clamped_acos(2.0 * p.mu_l / mu_max - 1.0, "late mode")?;
    Ok((0.5 * ue, 0.5 * ul))
}

/// Random phases compatible with `p` for the given global phase and sign branch.
pub fn invert_phases(p: &TargetPoint, phi_e: f64, s: BranchSigns, mu_max: f64) -> Result<[f64; 4]> {
    let (he, hl) = half_phase_spreads(p, mu_max)?;
    let ce = s.s_e as f64 * he;
    let cl = s.s_l as f64 * hl;
    Ok([phi_e + ce, phi_e - ce, phi_e + p.phi + cl, phi_e + p.phi - cl])
}

/// Probability density of `(θ, φ, μ)`.
pub fn joint_pdf(p: &TargetPoint, mu_max: f64) -> Result<f64> {
    let a = 1.0 - p.mu_e / mu_max;
    let b = 1.0 - p.mu_l / mu_max;
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::Domain(format!(
            "density is singular or undefined at mu_e/mu_max = {}, mu_l/mu_max = {}",
            1.0 - a,
            1.0 - b
        )));
    }
    Ok(1.0 / (TAU * mu_max * PI * PI * a.sqrt() * b.sqrt()))
}

/// Intensity interval containing `mu`, if any.
pub fn classify_intensity(mu: f64, g: &RegionGeometry, mu_max: f64) -> Option<Intensity> {
    let x = mu / mu_max;
    if x >= g.t1 && x < 2.0 {
        Some(Intensity::I0)
    } else if x >= g.t2 && x < g.t1 {
        Some(Intensity::I1)
    } else if (0.0..g.t2).contains(&x) {
        Some(Intensity::I2)
    } else {
        None
    }
}

/// Bit and basis selected by `(θ, φ)`, if any.
pub fn classify_bit_basis(theta: f64, phi: f64, g: &RegionGeometry) -> Option<(Bit, Basis)> {
    if theta < g.delta_theta_z {
        return Some((Bit::Zero, Basis::Z));
    }
    if theta > PI - g.delta_theta_z {
        return Some((Bit::One, Basis::Z));
    }
    if (theta - FRAC_PI_2).abs() < g.delta_theta_x {
        let phi = wrap_pi(phi);
        if phi.abs() < g.delta_phi_x {
            return Some((Bit::Zero, Basis::X));
        }
        if PI - phi.abs() < g.delta_phi_x {
            return Some((Bit::One, Basis::X));
        }
    }
    None
}

/// Region of a classical outcome, or `None` for an inconclusive round.
pub fn classify_region(p: &TargetPoint, g: &RegionGeometry, mu_max: f64) -> Option<RegionSpec> {
    let (bit, basis) = classify_bit_basis(p.theta, p.phi, g)?;
    let intensity = classify_intensity(p.mu, g, mu_max)?;
    Some(RegionSpec::new(bit, basis, intensity))
}

/// Leakage amplitude functions of one sign branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageFunctions {
    pub c: f64,
    pub s: f64,
    pub r: f64,
    pub h: f64,
    pub mu_l: f64,
}

pub fn leakage_functions(p: &TargetPoint, s: BranchSigns, omega: f64, mu_max: f64) -> Result<LeakageFunctions> {
    let (he, hl) = half_phase_spreads(p, mu_max)?;
    let c = s.s_e as f64 * he;
    let sl = s.s_l as f64 * hl;
    let r2 = 0.5 * omega * (1.0 + (p.phi + c + sl).cos());
    let z = C64::from_polar(1.0, -c) + C64::from_polar(1.0, p.phi + sl);
    Ok(LeakageFunctions { c, s: sl, r: r2.max(0.0).sqrt(), h: z.arg(), mu_l: omega + r2 })
}

/// Coherent amplitudes of `(e, l, 1, 3, 5)` relative to the global phase `φ_e`,
/// given `√μ_e`, `√μ_l`, the relative phase and the signed half spreads.
#[inline]
pub(crate) fn branch_amplitudes(sqrt_mu_e: f64, sqrt_mu_l: f64, phi: f64, c: f64, s: f64, omega: f64) -> [C64; 5] {
    let e = C64::new(sqrt_mu_e, 0.0);
    let l = C64::from_polar(sqrt_mu_l, phi);
    if omega == 0.0 {
        let z = C64::new(0.0, 0.0);
        return [e, l, z, z, z];
    }
    let a = (0.5 * omega).sqrt();
    let m1 = C64::from_polar(a, c);
    let m3 = (C64::from_polar(1.0, -c) + C64::from_polar(1.0, phi + s)) * (0.5 * omega.sqrt());
    let m5 = C64::from_polar(a, phi - s);
    [e, l, m1, m3, m5]
}

fn check_basis(n: u32, basis: &NPhotonBasis) -> Result<()> {
    if basis.mode_count() != MODE_COUNT {
        return Err(Error::InvalidInput(format!("basis has {} modes, expected {MODE_COUNT}", basis.mode_count())));
    }
    if basis.n() != n {
        return Err(Error::InvalidInput(format!("basis holds {} photons, requested n = {n}", basis.n())));
    }
    Ok(())
}

/// Sub-normalized n-photon operator emitted for the outcome `p`, averaged over
/// the four sign branches and the unobserved global phase.
pub fn sigma_n_point(p: &TargetPoint, n: u32, params: &PassiveParams, basis: &NPhotonBasis) -> Result<HermitianMatrix> {
    if n > params.n_cut {
        return Err(Error::InvalidInput(format!("n = {n} exceeds n_cut = {}", params.n_cut)));
    }
    check_basis(n, basis)?;
    let (he, hl) = half_phase_spreads(p, params.mu_max)?;
    let mut out = HermitianMatrix::zeros(basis.len());
    for s in BranchSigns::ALL {
        let amps = branch_amplitudes(
            p.mu_e.sqrt(),
            p.mu_l.sqrt(),
            p.phi,
            s.s_e as f64 * he,
            s.s_l as f64 * hl,
            params.omega,
        );
        let x: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let mut v = basis.coherent_vector(&amps);
        let scale = (-0.5 * x).exp();
        v.iter_mut().for_each(|z| *z *= scale);
        out.add_scaled(&HermitianMatrix::outer(&v, 1.0), 0.25);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MU: f64 = 0.5;

    #[test]
    fn phases_to_target_fixed_points() {
        let p = target_from_phases([0.0; 4], MU);
        assert!((p.mu_e - MU).abs() < 1e-15 && (p.mu_l - MU).abs() < 1e-15);
        assert!((p.theta - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(p.phi, 0.0);
        let q = target_from_phases([0.0, PI, 0.0, 0.0], MU);
        assert!(q.mu_e.abs() < 1e-15);
        assert!((q.theta - PI).abs() < 1e-7);
    }

    #[test]
    fn inversion_examples() {
        let p = TargetPoint::new(FRAC_PI_2, 0.0, 2.0 * MU, 0.4);
        let ph = invert_phases(&p, 0.4, BranchSigns::ALL[0], MU).unwrap();
        for x in ph {
            assert!((x - 0.4).abs() < 1e-7);
        }
        let p = TargetPoint::new(FRAC_PI_2, 0.0, MU, 0.0);
        let ph = invert_phases(&p, 0.0, BranchSigns::ALL[0], MU).unwrap();
        assert!((ph[0] - ph[1] - FRAC_PI_2).abs() < 1e-12);
        let bad = TargetPoint::new(0.0, 0.0, 1.5 * MU, 0.0);
        assert!(matches!(invert_phases(&bad, 0.0, BranchSigns::ALL[0], MU), Err(Error::Domain(_))));
    }

    #[test]
    fn roundtrip_all_branches() {
        let p = TargetPoint::new(1.1, -2.3, 0.7 * MU, 0.9);
        for s in BranchSigns::ALL {
            let ph = invert_phases(&p, 0.9, s, MU).unwrap();
            let q = target_from_phases(ph, MU);
            assert!((q.theta - p.theta).abs() < 1e-9);
            assert!((wrap_pi(q.phi - p.phi)).abs() < 1e-9);
            assert!((q.mu - p.mu).abs() < 1e-12);
        }
    }

    #[test]
    fn pdf_symmetries() {
        let a = joint_pdf(&TargetPoint::new(0.7, 0.3, 0.6 * MU, 0.0), MU).unwrap();
        let b = joint_pdf(&TargetPoint::new(0.7, -2.0, 0.6 * MU, 0.0), MU).unwrap();
        let c = joint_pdf(&TargetPoint::new(PI - 0.7, 0.3, 0.6 * MU, 0.0), MU).unwrap();
        assert_eq!(a, b);
        assert!((a - c).abs() < 1e-12 * a);
        assert!(joint_pdf(&TargetPoint::new(0.0, 0.0, MU, 0.0), MU).is_err());
    }

    #[test]
    fn region_examples() {
        let g = RegionGeometry { delta_theta_z: 0.1, ..RegionGeometry::default() };
        let p = TargetPoint::new(0.05, 0.0, 0.9 * MU, 0.0);
        assert_eq!(classify_region(&p, &g, MU), Some(RegionSpec::new(Bit::Zero, Basis::Z, Intensity::I0)));
        let p = TargetPoint::new(FRAC_PI_2, 0.05, 0.03 * MU, 0.0);
        assert_eq!(classify_region(&p, &g, MU), Some(RegionSpec::new(Bit::Zero, Basis::X, Intensity::I1)));
        let p = TargetPoint::new(FRAC_PI_2, FRAC_PI_2, 0.5 * MU, 0.0);
        assert_eq!(classify_region(&p, &g, MU), None);
        let p = TargetPoint::new(FRAC_PI_2 + 0.05, -PI + 0.02, 0.005 * MU, 0.0);
        assert_eq!(classify_region(&p, &g, MU), Some(RegionSpec::new(Bit::One, Basis::X, Intensity::I2)));
    }

    #[test]
    fn leakage_function_limits() {
        let p = TargetPoint::new(0.8, 0.4, 0.9 * MU, 0.0);
        let f = leakage_functions(&p, BranchSigns::ALL[2], 0.0, MU).unwrap();
        assert_eq!(f.r, 0.0);
        assert_eq!(f.mu_l, 0.0);
        let p = TargetPoint::new(FRAC_PI_2, 0.6, 2.0 * MU, 0.0);
        let f = leakage_functions(&p, BranchSigns::ALL[0], 0.01, MU).unwrap();
        assert!(f.c.abs() < 1e-7 && f.s.abs() < 1e-7);
        assert!((f.r * f.r - 0.005 * (1.0 + 0.6f64.cos())).abs() < 1e-9);
    }

    #[test]
    fn sigma_point_vacuum_and_single_photon() {
        let params = PassiveParams::new(MU, 0.0, RegionGeometry::default(), 4);
        let p = TargetPoint::new(FRAC_PI_2, 0.0, 0.8 * MU, 0.0);
        let s0 = sigma_n_point(&p, 0, &params, &params.full_basis(0)).unwrap();
        assert!((s0.get(0, 0).re - (-p.mu).exp()).abs() < 1e-15);
        let s1 = sigma_n_point(&p, 1, &params, &params.full_basis(1)).unwrap();
        let w = (-p.mu).exp() * p.mu * 0.5;
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((s1.get(i, j) - C64::new(w, 0.0)).norm() < 1e-15);
        }
        assert!(s1.get(2, 2).norm() == 0.0);
        assert!(sigma_n_point(&p, 5, &params, &params.full_basis(5)).is_err());
        assert!(sigma_n_point(&p, 1, &params, &enumerate_basis(1, 4, &[2, 3])).is_err());
    }

    #[test]
    fn sigma_point_trace_matches_poisson_average() {
        let params = PassiveParams::new(MU, 0.02, RegionGeometry::default(), 4);
        let p = TargetPoint::new(1.0, 2.2, 0.9 * MU, 0.0);
        for n in 0..=4u32 {
            let s = sigma_n_point(&p, n, &params, &params.full_basis(n)).unwrap();
            let fact: f64 = (1..=n).map(|i| i as f64).product();
            let expect: f64 = BranchSigns::ALL
                .iter()
                .map(|&b| {
                    let x = p.mu + leakage_functions(&p, b, 0.02, MU).unwrap().mu_l;
                    (-x).exp() * x.powi(n as i32) / fact
                })
                .sum::<f64>()
                / 4.0;
            assert!((s.trace() - expect).abs() < 1e-14);
            assert!(s.max_asymmetry() < 1e-15);
        }
    }
}
