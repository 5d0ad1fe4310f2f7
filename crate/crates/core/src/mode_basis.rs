//! n-photon number-state bases over k optical modes, ordered by the number of
//! photons in the designated leakage modes.

use crate::error::{Error, Result};
use crate::linalg::C64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Photon counts per mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeConfiguration {
    pub occupations: Vec<u32>,
}

impl ModeConfiguration {
    pub fn new(occupations: Vec<u32>) -> Self {
        ModeConfiguration { occupations }
    }

    pub fn total(&self) -> u32 {
        self.occupations.iter().sum()
    }
}

/// Ordered basis of all configurations of `n` photons in `k` modes.
///
/// Configurations are sorted by ascending leakage photon count `n_L`; within a
/// stratum they are sorted in descending lexicographic order of the non-leak
/// occupations and then of the leak occupations.
#[derive(Debug, Clone, PartialEq)]
pub struct NPhotonBasis {
    n: u32,
    k: usize,
    leak_mask: Vec<bool>,
    configs: Vec<ModeConfiguration>,
    lookup: HashMap<Vec<u32>, usize>,
    flat: Vec<usize>,
}

fn compositions(n: u32, k: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == k {
        prefix.push(n);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=n).rev() {
        prefix.push(first);
        compositions(n - first, k, prefix, out);
        prefix.pop();
    }
}

impl NPhotonBasis {
    fn from_configs(n: u32, k: usize, leak_mask: Vec<bool>, configs: Vec<ModeConfiguration>) -> Self {
        let lookup = configs.iter().enumerate().map(|(i, c)| (c.occupations.clone(), i)).collect();
        let flat = configs.iter().flat_map(|c| c.occupations.iter().map(|&o| o as usize)).collect();
        NPhotonBasis { n, k, leak_mask, configs, lookup, flat }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn mode_count(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[ModeConfiguration] {
        &self.configs
    }

    pub fn config(&self, i: usize) -> &ModeConfiguration {
        &self.configs[i]
    }

    pub fn leak_mask(&self) -> &[bool] {
        &self.leak_mask
    }

    pub fn is_leak_mode(&self, mode: usize) -> bool {
        self.leak_mask[mode]
    }

    /// Photons in leakage modes for configuration `c`.
    pub fn leak_count(&self, c: &ModeConfiguration) -> u32 {
        c.occupations.iter().zip(&self.leak_mask).filter(|(_, &l)| l).map(|(o, _)| *o).sum()
    }

    pub fn leak_count_at(&self, i: usize) -> u32 {
        self.leak_count(&self.configs[i])
    }

    /// Position of `config` in the basis.
    pub fn basis_index(&self, config: &ModeConfiguration) -> Result<usize> {
        if config.occupations.len() != self.k {
            return Err(Error::InvalidInput(format!(
                "configuration has {} modes, basis has {}",
                config.occupations.len(),
                self.k
            )));
        }
        if config.total() != self.n {
            return Err(Error::InvalidInput(format!(
                "configuration carries {} photons, basis has {}",
                config.total(),
                self.n
            )));
        }
        self.lookup.get(&config.occupations).copied().ok_or_else(|| {
            Error::InvalidInput(format!("configuration {:?} not in this (truncated) basis", config.occupations))
        })
    }

    /// The ordered prefix of configurations with at most `n_l_cut` leak photons.
    pub fn leak_truncated_subbasis(&self, n_l_cut: u32) -> NPhotonBasis {
        let configs: Vec<ModeConfiguration> =
            self.configs.iter().filter(|c| self.leak_count(c) <= n_l_cut).cloned().collect();
        NPhotonBasis::from_configs(self.n, self.k, self.leak_mask.clone(), configs)
    }

    /// Coefficients `Π_m α_m^{n_m} / √(n_m!)` of every configuration, i.e. the
    /// n-photon block of the product coherent state `⊗_m |α_m⟩` without the
    /// overall `exp(−Σ|α|²/2)` factor. `pow` is scratch space of length
    /// `k·(n+1)`.
    pub fn coherent_coefficients(&self, amps: &[C64], pow: &mut [C64], out: &mut [C64]) {
        let stride = self.n as usize + 1;
        debug_assert_eq!(amps.len(), self.k);
        for (m, &a) in amps.iter().enumerate() {
            let row = &mut pow[m * stride..(m + 1) * stride];
            row[0] = C64::new(1.0, 0.0);
            for j in 1..stride {
                row[j] = row[j - 1] * a / (j as f64).sqrt();
            }
        }
        for (c, slot) in out.iter_mut().enumerate().take(self.configs.len()) {
            let occ = &self.flat[c * self.k..(c + 1) * self.k];
            let mut acc = C64::new(1.0, 0.0);
            for (m, &o) in occ.iter().enumerate() {
                if o > 0 {
                    acc *= pow[m * stride + o];
                }
            }
            *slot = acc;
        }
    }

    /// Same as [`NPhotonBasis::coherent_coefficients`] with internal scratch.
    pub fn coherent_vector(&self, amps: &[C64]) -> Vec<C64> {
        let mut pow = vec![C64::new(0.0, 0.0); self.k * (self.n as usize + 1)];
        let mut out = vec![C64::new(0.0, 0.0); self.configs.len()];
        self.coherent_coefficients(amps, &mut pow, &mut out);
        out
    }

    /// True when the basis contains every configuration of `n` photons in `k` modes.
    pub fn is_complete(&self) -> bool {
        self.configs.len() == binomial(self.n as u64 + self.k as u64 - 1, self.k as u64 - 1) as usize
    }
}

/// Enumerate every configuration of `n` photons in `k` modes.
pub fn enumerate_basis(n: u32, k: usize, leak_modes: &[usize]) -> NPhotonBasis {
    assert!(k >= 1, "at least one mode is required");
    let mut leak_mask = vec![false; k];
    for &m in leak_modes {
        leak_mask[m] = true;
    }
    let mut raw = Vec::new();
    compositions(n, k, &mut Vec::with_capacity(k), &mut raw);
    let split = |occ: &Vec<u32>| -> (u32, Vec<u32>, Vec<u32>) {
        let mut nl = 0;
        let mut keep = Vec::new();
        let mut leak = Vec::new();
        for (o, &l) in occ.iter().zip(&leak_mask) {
            if l {
                nl += o;
                leak.push(*o);
            } else {
                keep.push(*o);
            }
        }
        (nl, keep, leak)
    };
    raw.sort_by(|a, b| {
        let (na, ka, la) = split(a);
        let (nb, kb, lb) = split(b);
        na.cmp(&nb).then(kb.cmp(&ka)).then(lb.cmp(&la))
    });
    let configs = raw.into_iter().map(ModeConfiguration::new).collect();
    NPhotonBasis::from_configs(n, k, leak_mask, configs)
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEAK: [usize; 3] = [2, 3, 4];

    #[test]
    fn sizes() {
        assert_eq!(enumerate_basis(1, 5, &LEAK).len(), 5);
        assert_eq!(enumerate_basis(4, 5, &LEAK).len(), 70);
        // Brute force: count all 4-tuples of 0..=2 summing to 2.
        let mut count = 0;
        for a in 0..=2u32 {
            for b in 0..=2u32 {
                for c in 0..=2u32 {
                    for d in 0..=2u32 {
                        if a + b + c + d == 2 {
                            count += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(enumerate_basis(2, 4, &[2, 3]).len(), count);
        assert_eq!(binomial(8, 4), 70);
    }

    #[test]
    fn ordering_and_index_roundtrip() {
        let b = enumerate_basis(3, 5, &LEAK);
        assert!(b.is_complete());
        for i in 0..b.len() {
            assert_eq!(b.basis_index(b.config(i)).unwrap(), i);
        }
        for w in b.configs().windows(2) {
            assert!(b.leak_count(&w[0]) <= b.leak_count(&w[1]));
        }
        assert_eq!(b.config(0).occupations, vec![3, 0, 0, 0, 0]);
        let b1 = enumerate_basis(1, 5, &LEAK);
        assert_eq!(b1.config(0).occupations, vec![1, 0, 0, 0, 0]);
        assert_eq!(b1.config(1).occupations, vec![0, 1, 0, 0, 0]);
    }

    #[test]
    fn index_matches_linear_scan() {
        let b = enumerate_basis(2, 5, &LEAK);
        let target = ModeConfiguration::new(vec![0, 0, 1, 0, 1]);
        let scan = b.configs().iter().position(|c| *c == target).unwrap();
        assert_eq!(b.basis_index(&target).unwrap(), scan);
        assert!(b.basis_index(&ModeConfiguration::new(vec![1, 0, 0, 0, 0])).is_err());
        assert!(b.basis_index(&ModeConfiguration::new(vec![1, 1, 0, 0])).is_err());
    }

    #[test]
    fn coherent_coefficients_follow_multinomial_norm() {
        // Σ_c |coef_c|² = (Σ|α|²)^n / n! by the multinomial theorem.
        let amps = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5), C64::new(0.05, 0.0), C64::new(0.0, 0.1), C64::new(0.2, -0.2)];
        let x: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        for n in 0..=4u32 {
            let b = enumerate_basis(n, 5, &LEAK);
            let v = b.coherent_vector(&amps);
            let s: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            let fact: f64 = (1..=n).map(|i| i as f64).product();
            assert!((s - x.powi(n as i32) / fact).abs() < 1e-15);
        }
    }

    #[test]
    fn truncation() {
        let b = enumerate_basis(2, 5, &LEAK);
        let t0 = b.leak_truncated_subbasis(0);
        let occ: Vec<Vec<u32>> = t0.configs().iter().map(|c| c.occupations.clone()).collect();
        assert_eq!(occ, vec![vec![2, 0, 0, 0, 0], vec![1, 1, 0, 0, 0], vec![0, 2, 0, 0, 0]]);
        assert_eq!(b.leak_truncated_subbasis(2).len(), b.len());
        let b3 = enumerate_basis(3, 5, &LEAK);
        let filtered = b3.configs().iter().filter(|c| b3.leak_count(c) <= 1).count();
        let t1 = b3.leak_truncated_subbasis(1);
        assert_eq!(t1.len(), filtered);
        assert_eq!(t1.configs(), &b3.configs()[..filtered]);
        // Strata sizes add up to the full dimension.
        let total: usize = (0..=3).map(|c| {
            b3.configs().iter().filter(|x| b3.leak_count(x) == c).count()
        }).sum();
        assert_eq!(total, b3.len());
    }
}
