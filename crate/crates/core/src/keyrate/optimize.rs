//! Source-parameter optimization and grid sweeps.
//!
//! The optimizer is a coordinate ascent on the pre-clamp rate: for each
//! coordinate a log-spaced scan over its bracket, then a golden-section
//! search on log scale around the best scan point. Probes run at reduced
//! quadrature resolution; the winner is re-evaluated at the configured one.

use super::{keyrate, KeyRateReport, ProtocolConfig, RateStatus, Transmitter};
use crate::error::{Error, Result};
use crate::par::map_ordered;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub passes: usize,
    pub coarse_points: usize,
    pub golden_iterations: usize,
    /// Quadrature nodes used while probing.
    pub nodes: usize,
    pub mu_max_range: [f64; 2],
    pub delta_theta_z_range: [f64; 2],
    pub i0_range: [f64; 2],
    pub i1_range: [f64; 2],
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            passes: 2,
            coarse_points: 6,
            golden_iterations: 10,
            nodes: 8,
            mu_max_range: [0.05, 1.5],
            delta_theta_z_range: [0.01, 0.5],
            i0_range: [1e-3, 1.0],
            i1_range: [1e-3, 1.0],
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("mu_max_range", self.mu_max_range),
            ("delta_theta_z_range", self.delta_theta_z_range),
            ("i0_range", self.i0_range),
            ("i1_range", self.i1_range),
        ] {
            if !(r[0] > 0.0 && r[0] < r[1] && r[1].is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must satisfy 0 < lo < hi, got {r:?}")));
            }
        }
        if self.coarse_points < 2 || self.nodes < 2 {
            return Err(Error::InvalidInput("optimizer needs at least 2 scan points and 2 nodes".into()));
        }
        Ok(())
    }

    fn ranges(&self, t: Transmitter) -> [[f64; 2]; 2] {
        match t {
            Transmitter::Passive => [self.mu_max_range, self.delta_theta_z_range],
            Transmitter::Oil => [self.i0_range, self.i1_range],
        }
    }
}

/// Optimized parameters and the rate they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// The input configuration with the optimized parameters substituted.
    pub config: ProtocolConfig,
    /// `(μ_max, Δθ_Z)` or `(I0, I1)`.
    pub point: Vec<f64>,
    /// Evaluation of `point` at the configured quadrature resolution.
    pub report: KeyRateReport,
    /// Best pre-clamp rate among the probes.
    pub best_probe: f64,
    pub evaluations: usize,
}

impl OptimizationResult {
    /// True when no probe reached a positive rate.
    pub fn no_positive_rate(&self) -> bool {
        self.best_probe <= 0.0
    }
}

/// Current values of the optimized coordinates.
pub fn coordinates(cfg: &ProtocolConfig) -> Vec<f64> {
    match cfg.transmitter {
        Transmitter::Passive => vec![cfg.passive.mu_max, cfg.passive.geometry.delta_theta_z],
        Transmitter::Oil => vec![cfg.oil.i0, cfg.oil.i1],
    }
}

/// `cfg` with the optimized coordinates replaced by `x`.
pub fn with_coordinates(cfg: &ProtocolConfig, x: &[f64]) -> ProtocolConfig {
    let mut c = cfg.clone();
    match c.transmitter {
        Transmitter::Passive => {
            c.passive.mu_max = x[0];
            c.passive.geometry.delta_theta_z = x[1];
        }
        Transmitter::Oil => {
            c.oil.i0 = x[0];
            c.oil.i1 = x[1];
        }
    }
    c
}

struct Objective<'a> {
    probe_cfg: ProtocolConfig,
    distance_km: f64,
    att_db: f64,
    cache: HashMap<Vec<u64>, f64>,
    best: (f64, Vec<f64>),
    _cfg: &'a ProtocolConfig,
}

impl Objective<'_> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(&v) = self.cache.get(&key) {
            return v;
        }
        let c = with_coordinates(&self.probe_cfg, x);
        let v = match c.validate().and_then(|_| keyrate(&c, self.distance_km, self.att_db)) {
            Ok(r) if r.r_raw.is_finite() => r.r_raw,
            _ => f64::NEG_INFINITY,
        };
        self.cache.insert(key, v);
        if v > self.best.0 {
            self.best = (v, x.to_vec());
        }
        v
    }

    /// Maximizes along coordinate `k` starting from `x`; returns the best
    /// point found.
    fn line_search(&mut self, x: &[f64], k: usize, range: [f64; 2], s: &OptimizerSettings) -> Vec<f64> {
        let (lo, hi) = (range[0].ln(), range[1].ln());
        let at = |t: f64| -> Vec<f64> {
            let mut y = x.to_vec();
            y[k] = t.exp();
            y
        };
        let grid: Vec<f64> =
            (0..s.coarse_points).map(|j| lo + (hi - lo) * j as f64 / (s.coarse_points - 1) as f64).collect();
        let mut best_t = x[k].ln();
        let mut best_v = self.eval(x);
        let mut best_j = None;
        for (j, &t) in grid.iter().enumerate() {
            let v = self.eval(&at(t));
            if v > best_v {
                best_v = v;
                best_t = t;
                best_j = Some(j);
            }
        }
        let (mut a, mut b) = match best_j {
            Some(j) => (grid[j.saturating_sub(1)], grid[(j + 1).min(grid.len() - 1)]),
            None => {
                let step = (hi - lo) / (s.coarse_points - 1) as f64;
                ((best_t - step).max(lo), (best_t + step).min(hi))
            }
        };
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = self.eval(&at(c));
        let mut fd = self.eval(&at(d));
        for _ in 0..s.golden_iterations {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.eval(&at(c));
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.eval(&at(d));
            }
        }
        for (t, v) in [(c, fc), (d, fd)] {
            if v > best_v {
                best_v = v;
                best_t = t;
            }
        }
        at(best_t)
    }
}

/// Optimizes the source parameters at one grid point.
pub fn optimize_parameters(cfg: &ProtocolConfig, distance_km: f64, att_db: f64) -> Result<OptimizationResult> {
    optimize_with_starts(cfg, distance_km, att_db, &[])
}

/// As [`optimize_parameters`], also probing each of `starts` and ascending
/// from the best of them and the configured point.
pub fn optimize_with_starts(
    cfg: &ProtocolConfig,
    distance_km: f64,
    att_db: f64,
    starts: &[Vec<f64>],
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let s = &cfg.optimizer;
    let mut probe_cfg = cfg.clone();
    probe_cfg.quadrature.nodes = s.nodes;
    probe_cfg.quadrature.convergence_check = false;
    let mut obj =
        Objective { probe_cfg, distance_km, att_db, cache: HashMap::new(), best: (f64::NEG_INFINITY, Vec::new()), _cfg: cfg };
    let mut x = coordinates(cfg);
    let mut fx = obj.eval(&x);
    for st in starts {
        let v = obj.eval(st);
        if v > fx {
            fx = v;
            x = st.clone();
        }
    }
    let ranges = s.ranges(cfg.transmitter);
    for _ in 0..s.passes {
        for (k, range) in ranges.iter().enumerate() {
            x = obj.line_search(&x, k, *range, s);
        }
    }
    let (best_probe, point) = obj.best.clone();
    if point.is_empty() {
        return Err(Error::InvalidInput("no admissible parameter point found".into()));
    }
    let config = with_coordinates(cfg, &point);
    let report = keyrate(&config, distance_km, att_db)?;
    Ok(OptimizationResult { config, point, report, best_probe, evaluations: obj.cache.len() })
}

/// Evaluates every `(distance, attenuation)` pair of the configuration, in
/// distance-major order. Rows run in parallel; within a row attenuations are
/// visited in order and each optimization also probes the previous point's
/// optimum. Failures are recorded in the report status.
pub fn sweep(cfg: &ProtocolConfig) -> Result<Vec<KeyRateReport>> {
    cfg.validate()?;
    let rows = map_ordered(cfg.quadrature.execution, &cfg.distances_km, |&d| {
        let mut out = Vec::with_capacity(cfg.attenuations_db.len());
        let mut prev: Option<Vec<f64>> = None;
        for &att in &cfg.attenuations_db {
            let rep = if cfg.optimize {
                let starts: Vec<Vec<f64>> = prev.iter().cloned().collect();
                match optimize_with_starts(cfg, d, att, &starts) {
                    Ok(o) => {
                        prev = Some(o.point.clone());
                        let flat = o.no_positive_rate();
                        let mut r = o.report;
                        if flat && r.status == RateStatus::Ok {
                            r.status = RateStatus::NoPositiveRate;
                        }
                        r
                    }
                    Err(e) => KeyRateReport::failed(cfg, d, att, &e),
                }
            } else {
                keyrate(cfg, d, att).unwrap_or_else(|e| KeyRateReport::failed(cfg, d, att, &e))
            };
            out.push(rep);
        }
        out
    });
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::Analysis;

    #[test]
    fn coordinates_roundtrip() {
        let cfg = ProtocolConfig::default();
        let x = vec![0.7, 0.2];
        let c = with_coordinates(&cfg, &x);
        assert_eq!(coordinates(&c), x);
        let oil = ProtocolConfig { transmitter: Transmitter::Oil, ..Default::default() };
        assert_eq!(coordinates(&oil), vec![0.5, 0.1]);
    }

    #[test]
    fn sweep_covers_grid_in_order() {
        let mut cfg = ProtocolConfig { transmitter: Transmitter::Oil, analysis: Analysis::Baseline, ..Default::default() };
        cfg.distances_km = vec![25.0, 50.0, 75.0];
        cfg.attenuations_db = vec![30.0, 70.0, 120.0];
        let reps = sweep(&cfg).unwrap();
        assert_eq!(reps.len(), 9);
        assert_eq!((reps[4].distance_km, reps[4].att_db), (50.0, 70.0));
    }

    #[test]
    fn optimizer_beats_every_probe_and_the_start() {
        let mut cfg = ProtocolConfig { transmitter: Transmitter::Oil, ..Default::default() };
        cfg.optimizer.passes = 1;
        cfg.optimizer.golden_iterations = 6;
        let start = super::super::keyrate(&cfg, 50.0, 120.0).unwrap();
        let o = optimize_parameters(&cfg, 50.0, 120.0).unwrap();
        assert!(o.best_probe >= start.r_raw);
        assert!(o.report.r >= start.r);
        assert!(o.evaluations > 5);
    }
}
