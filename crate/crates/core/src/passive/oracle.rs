//! Monte-Carlo oracle for the passive source.
//!
//! Samples the four random phases of a pulse train, classifies the outcome,
//! and averages the n-photon blocks of the emitted coherent state built
//! directly from the interferometer and leakage amplitudes. Shares no code
//! with the quadrature path beyond classification.

use super::{classify_region, target_from_phases, PassiveParams, MODE_COUNT};
use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, C64};
use crate::mode_basis::NPhotonBasis;
use crate::par::{map_range, Execution};
use crate::types::{Basis, Bit, BitSel, Intensity, RegionSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

const CHUNK: u64 = 1 << 16;

/// Running sums for a ratio estimator `E[y·1_Ω] / E[x·1_Ω]`.
#[derive(Debug, Clone, Default, PartialEq)]
struct RatioSums {
    y: f64,
    yy: f64,
    xy: f64,
}

impl RatioSums {
    fn push(&mut self, x: f64, y: f64) {
        self.y += y;
        self.yy += y * y;
        self.xy += x * y;
    }

    fn add(&mut self, o: &RatioSums) {
        self.y += o.y;
        self.yy += o.yy;
        self.xy += o.xy;
    }
}

/// Accumulated sample sums of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct McAccumulator {
    samples: u64,
    accepted: u64,
    /// Sums of `t_n = e^{-x} xⁿ / n!` and `t_n²` per n.
    tn: Vec<(f64, f64)>,
    /// Per n: sums of block entries (real and imaginary parts) against `t_n`.
    entries: Vec<Vec<(RatioSums, RatioSums)>>,
}

impl McAccumulator {
    fn new(bases: &[NPhotonBasis]) -> Self {
        McAccumulator {
            samples: 0,
            accepted: 0,
            tn: vec![(0.0, 0.0); bases.len()],
            entries: bases.iter().map(|b| vec![Default::default(); b.len() * b.len()]).collect(),
        }
    }

    fn add(&mut self, o: &McAccumulator) {
        self.samples += o.samples;
        self.accepted += o.accepted;
        for (a, b) in self.tn.iter_mut().zip(&o.tn) {
            a.0 += b.0;
            a.1 += b.1;
        }
        for (ea, eb) in self.entries.iter_mut().zip(&o.entries) {
            for (a, b) in ea.iter_mut().zip(eb) {
                a.0.add(&b.0);
                a.1.add(&b.1);
            }
        }
    }

    /// Estimates with delta-method standard errors.
    /// `fraction` is the probability of the sampled box (one for uniform sampling).
    pub fn estimate(&self, spec: RegionSpec, fraction: f64) -> Result<McEstimate> {
        if self.accepted == 0 {
            return Err(Error::NoSamples(spec.to_string()));
        }
        let nf = self.samples as f64;
        let q = self.accepted as f64 / nf;
        let mass = fraction * q;
        let mass_se = fraction * (q * (1.0 - q) / nf).sqrt();
        let acc = self.accepted as f64;
        let mut p_n = Vec::new();
        let mut p_n_se = Vec::new();
        let mut rho = Vec::new();
        let mut se_re = Vec::new();
        let mut se_im = Vec::new();
        for (n, &(sx, sxx)) in self.tn.iter().enumerate() {
            // p_n: ratio of t_n to the indicator; the indicator's square is itself.
            let r = sx / acc;
            let var = (sxx - 2.0 * r * sx + r * r * acc) / nf;
            p_n.push(r);
            p_n_se.push((var.max(0.0) / nf).sqrt() / q);
            let d = (self.entries[n].len() as f64).sqrt().round() as usize;
            let mut m = HermitianMatrix::zeros(d);
            let mut sr = vec![0.0; d * d];
            let mut si = vec![0.0; d * d];
            let xbar = sx / nf;
            for (k, (re, im)) in self.entries[n].iter().enumerate() {
                let ratio_se = |s: &RatioSums, r: f64| {
                    let v = (s.yy - 2.0 * r * s.xy + r * r * sxx) / nf;
                    (v.max(0.0) / nf).sqrt() / xbar
                };
                let (rr, ri) = if sx > 0.0 { (re.y / sx, im.y / sx) } else { (0.0, 0.0) };
                m.data_mut()[k] = C64::new(rr, ri);
                sr[k] = if sx > 0.0 { ratio_se(re, rr) } else { 0.0 };
                si[k] = if sx > 0.0 { ratio_se(im, ri) } else { 0.0 };
            }
            rho.push(m);
            se_re.push(sr);
            se_im.push(si);
        }
        Ok(McEstimate { spec, samples: self.samples, accepted: self.accepted, mass, mass_se, p_n, p_n_se, rho, se_re, se_im })
    }
}

/// Monte-Carlo estimates for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub spec: RegionSpec,
    pub samples: u64,
    pub accepted: u64,
    pub mass: f64,
    pub mass_se: f64,
    /// `p_{n|Ω}` for `n ≤ n_max`.
    pub p_n: Vec<f64>,
    pub p_n_se: Vec<f64>,
    /// Unit-trace n-photon states on the full basis.
    pub rho: Vec<HermitianMatrix>,
    pub se_re: Vec<Vec<f64>>,
    pub se_im: Vec<Vec<f64>>,
}

impl McEstimate {
    /// Largest entrywise `|Δ|/SE` between `other` and the n-photon estimate.
    /// Standard errors are floored at `se_floor`.
    pub fn max_z_score(&self, n: usize, other: &HermitianMatrix, se_floor: f64) -> f64 {
        let m = &self.rho[n];
        let mut worst: f64 = 0.0;
        for k in 0..m.data().len() {
            let d = other.data()[k] - m.data()[k];
            worst = worst.max(d.re.abs() / self.se_re[n][k].max(se_floor));
            worst = worst.max(d.im.abs() / self.se_im[n][k].max(se_floor));
        }
        worst
    }
}

/// Sampling distribution of the pulse-train phases.
///
/// Phases are drawn as `φ1,2 = φ_e ± d_e/2`, `φ3,4 = φ_e + φ ± d_l/2` with
/// `φ_e` uniform, which is a measure-preserving reparameterization of four
/// independent uniform phases. A proposal restricts `|d_e|`, `|d_l|` and `φ` to
/// a box known to contain a region; estimates are reweighted by the box's
/// probability `fraction()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub de_min: f64,
    pub dl_min: f64,
    /// Disjoint `φ` windows; empty means the full circle.
    pub phi_windows: Vec<(f64, f64)>,
}

impl Proposal {
    pub fn uniform() -> Self {
        Proposal { de_min: 0.0, dl_min: 0.0, phi_windows: Vec::new() }
    }

    /// Smallest box containing `region`.
    pub fn for_region(region: RegionSpec, params: &PassiveParams) -> Self {
        let g = &params.geometry;
        let d_min = |x_max: f64| if x_max >= 1.0 { 0.0 } else { 2.0 * x_max.sqrt().acos() };
        let t_hi = match region.intensity {
            Intensity::I0 => 2.0,
            Intensity::I1 => g.t1,
            Intensity::I2 => g.t2,
        };
        let mut de_min = d_min(t_hi);
        let mut dl_min = de_min;
        let k = (0.5 * g.delta_theta_z).tan().powi(2);
        let w = g.delta_phi_x;
        let phi_windows = match (region.basis, region.bit) {
            (Basis::Z, BitSel::Bit(Bit::Zero)) => {
                dl_min = dl_min.max(d_min(k));
                Vec::new()
            }
            (Basis::Z, BitSel::Bit(Bit::One)) => {
                de_min = de_min.max(d_min(k));
                Vec::new()
            }
            (Basis::Z, BitSel::Both) => Vec::new(),
            (Basis::X, BitSel::Bit(Bit::Zero)) => vec![(-w, w)],
            (Basis::X, BitSel::Bit(Bit::One)) => vec![(PI - w, PI + w)],
            (Basis::X, BitSel::Both) => vec![(-w, w), (PI - w, PI + w)],
        };
        Proposal { de_min, dl_min, phi_windows }
    }

    fn phi_width(&self) -> f64 {
        if self.phi_windows.is_empty() {
            TAU
        } else {
            self.phi_windows.iter().map(|(a, b)| b - a).sum()
        }
    }

    /// Probability of the box under uniform phases.
    pub fn fraction(&self) -> f64 {
        (PI - self.de_min) / PI * (PI - self.dl_min) / PI * self.phi_width() / TAU
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> [f64; 4] {
        let mut spread = |min: f64| {
            let d = min + (PI - min) * rng.gen::<f64>();
            if rng.gen::<bool>() {
                d
            } else {
                -d
            }
        };
        let de = spread(self.de_min);
        let dl = spread(self.dl_min);
        let mut phi = rng.gen::<f64>() * self.phi_width();
        if !self.phi_windows.is_empty() {
            for &(a, b) in &self.phi_windows {
                if phi < b - a {
                    phi += a;
                    break;
                }
                phi -= b - a;
            }
        }
        let pe = rng.gen::<f64>() * TAU;
        [pe + 0.5 * de, pe - 0.5 * de, pe + phi + 0.5 * dl, pe + phi - 0.5 * dl]
    }
}

/// Sample `samples` pulse trains from `proposal` and accumulate every
/// single-bit region. Accumulators are returned in
/// [`RegionSpec::all_single`] order.
pub fn mc_sample_regions(
    params: &PassiveParams,
    proposal: &Proposal,
    n_max: u32,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<McAccumulator>> {
    params.validate()?;
    if samples < 10_000 {
        return Err(Error::InvalidInput(format!("at least 10^4 samples are required, got {samples}")));
    }
    let bases: Vec<NPhotonBasis> = (0..=n_max).map(|n| params.full_basis(n)).collect();
    let specs = RegionSpec::all_single();
    let chunks = samples.div_ceil(CHUNK);
    let sm = params.mu_max.sqrt();
    let partials = map_range(exec, chunks as usize, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let count = CHUNK.min(samples - c as u64 * CHUNK);
        let mut accs: Vec<McAccumulator> = specs.iter().map(|_| McAccumulator::new(&bases)).collect();
        let mut pow = vec![C64::new(0.0, 0.0); MODE_COUNT * (n_max as usize + 1)];
        let mut v: Vec<Vec<C64>> = bases.iter().map(|b| vec![C64::new(0.0, 0.0); b.len()]).collect();
        for _ in 0..count {
            let ph = proposal.sample(&mut rng);
            let p = target_from_phases(ph, params.mu_max);
            let Some(spec) = classify_region(&p, &params.geometry, params.mu_max) else { continue };
            let idx = specs.iter().position(|s| *s == spec).expect("classification yields a single-bit region");
            let e = |a: f64| C64::from_polar(1.0, a);
            let amps = [
                (e(ph[0]) + e(ph[1])) * (0.5 * sm),
                (e(ph[2]) + e(ph[3])) * (0.5 * sm),
                e(ph[0]) * (0.5 * params.omega).sqrt(),
                (e(ph[1]) + e(ph[2])) * (0.5 * params.omega.sqrt()),
                e(ph[3]) * (0.5 * params.omega).sqrt(),
            ];
            let x: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            let scale = (-x).exp();
            let acc = &mut accs[idx];
            acc.accepted += 1;
            let mut t = scale;
            for (n, basis) in bases.iter().enumerate() {
                if n > 0 {
                    t *= x / n as f64;
                }
                acc.tn[n].0 += t;
                acc.tn[n].1 += t * t;
                basis.coherent_coefficients(&amps, &mut pow, &mut v[n]);
                let d = basis.len();
                for i in 0..d {
                    for j in 0..d {
                        let z = v[n][i] * v[n][j].conj() * scale;
                        let slot = &mut acc.entries[n][i * d + j];
                        slot.0.push(t, z.re);
                        slot.1.push(t, z.im);
                    }
                }
            }
        }
        for a in accs.iter_mut() {
            a.samples = count;
        }
        accs
    });
    let mut total: Vec<McAccumulator> = specs.iter().map(|_| McAccumulator::new(&bases)).collect();
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.add(p);
        }
    }
    Ok(total)
}

/// Monte-Carlo estimate of one region (single bit or union), sampling only
/// the box that contains it.
pub fn mc_region_oracle(
    params: &PassiveParams,
    region: RegionSpec,
    n_max: u32,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    let proposal = Proposal::for_region(region, params);
    let accs = mc_sample_regions(params, &proposal, n_max, samples, seed, Execution::default())?;
    let specs = RegionSpec::all_single();
    let pick = |s: RegionSpec| specs.iter().position(|x| *x == s).expect("single-bit spec");
    let acc = match region.bit {
        BitSel::Bit(_) => accs[pick(region)].clone(),
        BitSel::Both => {
            let mut a = accs[pick(RegionSpec::new(Bit::Zero, region.basis, region.intensity))].clone();
            let drawn = a.samples;
            a.add(&accs[pick(RegionSpec::new(Bit::One, region.basis, region.intensity))]);
            a.samples = drawn;
            a
        }
    };
    acc.estimate(region, proposal.fraction())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::passive::RegionGeometry;

    #[test]
    fn box_proposal_contains_its_region() {
        let p = PassiveParams::new(0.5, 0.0, RegionGeometry::default(), 4);
        for spec in RegionSpec::all_single() {
            let prop = Proposal::for_region(spec, &p);
            // Every uniform sample landing in the region must lie inside the box.
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..200_000 {
                let ph: [f64; 4] = std::array::from_fn(|_| rng.gen::<f64>() * TAU);
                let t = target_from_phases(ph, p.mu_max);
                if classify_region(&t, &p.geometry, p.mu_max) != Some(spec) {
                    continue;
                }
                let de = crate::passive::wrap_pi(ph[0] - ph[1]).abs();
                let dl = crate::passive::wrap_pi(ph[2] - ph[3]).abs();
                assert!(de >= prop.de_min && dl >= prop.dl_min, "{spec}");
                if !prop.phi_windows.is_empty() {
                    let inside = prop
                        .phi_windows
                        .iter()
                        .any(|&(a, b)| (a..b).contains(&t.phi) || (a..b).contains(&t.phi.rem_euclid(TAU)));
                    assert!(inside, "{spec}");
                }
            }
        }
    }

    #[test]
    fn seed_repeatable_and_rejects_tiny_runs() {
        let p = PassiveParams::new(0.5, 0.01, RegionGeometry::default(), 4);
        let s = RegionSpec::new(Bit::Zero, Basis::X, Intensity::I0);
        let a = mc_region_oracle(&p, s, 1, 20_000, 7).unwrap();
        let b = mc_region_oracle(&p, s, 1, 20_000, 7).unwrap();
        assert_eq!(a, b);
        assert!(mc_region_oracle(&p, s, 1, 100, 7).is_err());
    }

    #[test]
    fn union_mass_is_sum_of_bit_masses() {
        let p = PassiveParams::new(0.5, 0.0, RegionGeometry::default(), 2);
        let u = mc_region_oracle(&p, RegionSpec::union(Basis::X, Intensity::I0), 0, 50_000, 11).unwrap();
        let m0 = mc_region_oracle(&p, RegionSpec::new(Bit::Zero, Basis::X, Intensity::I0), 0, 50_000, 11).unwrap().mass;
        let m1 = mc_region_oracle(&p, RegionSpec::new(Bit::One, Basis::X, Intensity::I0), 0, 50_000, 11).unwrap().mass;
        assert!((u.mass - (m0 + m1)).abs() < 1e-15, "{} vs {}", u.mass, m0 + m1);
    }

    #[test]
    fn leak_free_blocks_have_no_leak_support() {
        let p = PassiveParams::new(0.5, 0.0, RegionGeometry { delta_theta_z: 0.4, ..Default::default() }, 4);
        let est = mc_region_oracle(&p, RegionSpec::union(Basis::Z, Intensity::I0), 2, 50_000, 3).unwrap();
        let b = p.full_basis(2);
        for i in 0..b.len() {
            if b.leak_count_at(i) > 0 {
                assert_eq!(est.rho[2].get(i, i).re, 0.0);
            }
        }
        assert!((est.rho[2].trace() - 1.0).abs() < 1e-12);
    }
}
