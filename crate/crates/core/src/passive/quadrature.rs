//! Deterministic product quadrature over a post-selection region.
//!
//! The region is parameterized by the half phase spreads of the two
//! interferometer arms, `u_e = arccos(2μ_e/μ_max − 1)` and likewise `u_l`,
//! together with the relative phase `φ`. In these coordinates the outcome
//! density is the constant `1/(2π³)` on `[0,π]² × (−π,π]`, so the singular
//! factors of the `(θ, φ, μ)` density disappear. Each `u_e` slice of a region
//! is a single `u_l` interval whose ends are known in closed form; the outer
//! `u_e` axis is split at every point where the active constraint changes and
//! each piece is integrated with a smoothstep-graded Gauss–Legendre rule.

use super::RegionGeometry;
use crate::par::Execution;
use crate::types::{Basis, Bit, Intensity, RegionSpec};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Resolution and validation settings for region integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureOptions {
    /// Gauss nodes per axis and per sub-interval.
    pub nodes: usize,
    /// Recompute the scalar moments at twice the resolution and fail if
    /// they disagree by more than `tolerance` (relative).
    pub convergence_check: bool,
    pub tolerance: f64,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { nodes: 12, convergence_check: true, tolerance: 1e-6, execution: Execution::default() }
    }
}

/// A single quadrature node. Amplitude factors are stored in units of `√μ_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadNode {
    /// `cos(u_e/2) = √(μ_e/μ_max)`.
    pub amp_e: f64,
    /// `u_e/2`.
    pub half_ue: f64,
    pub amp_l: f64,
    pub half_ul: f64,
    pub phi: f64,
    /// Probability weight; the weights of a region sum to its probability.
    pub weight: f64,
}

/// Nodes of one single-bit region, grouped by outer `u_e` node.
#[derive(Debug, Clone)]
pub struct RegionQuadrature {
    pub spec: RegionSpec,
    pub nodes_per_axis: usize,
    pub columns: Vec<Vec<QuadNode>>,
}

impl RegionQuadrature {
    pub fn mass(&self) -> f64 {
        self.columns.iter().flatten().map(|n| n.weight).sum()
    }

    pub fn node_count(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "at least one node is required");
    let mut out = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (0.5 * (1.0 - x), 0.5 * w);
        out[n - 1 - i] = (0.5 * (1.0 + x), 0.5 * w);
    }
    out
}

/// Ratio bounds on `k = μ_l/μ_e = tan²(θ/2)` for a bit/basis region.
fn ratio_bounds(bit: Bit, basis: Basis, g: &RegionGeometry) -> (f64, f64) {
    let t2 = |a: f64| (0.5 * a).tan().powi(2);
    match (basis, bit) {
        (Basis::Z, Bit::Zero) => (0.0, t2(g.delta_theta_z)),
        (Basis::Z, Bit::One) => (1.0 / t2(g.delta_theta_z), f64::INFINITY),
        (Basis::X, _) => (t2(FRAC_PI_2 - g.delta_theta_x), t2(FRAC_PI_2 + g.delta_theta_x)),
    }
}

/// Bounds on `μ/μ_max` for an intensity interval.
fn intensity_bounds(intensity: Intensity, g: &RegionGeometry) -> (f64, f64) {
    match intensity {
        Intensity::I0 => (g.t1, 2.0),
        Intensity::I1 => (g.t2, g.t1),
        Intensity::I2 => (0.0, g.t2),
    }
}

struct Slicer {
    k_lo: f64,
    k_hi: f64,
    t_lo: f64,
    t_hi: f64,
}

impl Slicer {
    /// Allowed `x_l = μ_l/μ_max` interval for a given `x_e`.
    fn slice(&self, xe: f64) -> Option<(f64, f64)> {
        let lo = (self.k_lo * xe).max(self.t_lo - xe).max(0.0);
        let mut hi = (self.t_hi - xe).min(1.0);
        if self.k_hi.is_finite() {
            hi = hi.min(self.k_hi * xe);
        }
        (hi > lo).then_some((lo, hi))
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut xs = vec![self.t_lo, self.t_hi, self.t_lo - 1.0, self.t_hi - 1.0];
        for k in [self.k_lo, self.k_hi] {
            if k.is_finite() {
                xs.push(self.t_lo / (1.0 + k));
                xs.push(self.t_hi / (1.0 + k));
                if k > 0.0 {
                    xs.push(1.0 / k);
                }
            }
        }
        xs
    }
}

fn u_of_x(x: f64) -> f64 {
    2.0 * x.clamp(0.0, 1.0).sqrt().acos()
}

/// Nodes and weights for the relative phase of a bit/basis region. The weights
/// include the uniform density `1/(2π)`.
pub fn phi_rule(bit: Bit, basis: Basis, g: &RegionGeometry, n: usize) -> Vec<(f64, f64)> {
    let gl = gauss_legendre(n);
    let on = |a: f64, b: f64| gl.iter().map(move |&(s, w)| (a + (b - a) * s, (b - a) * w / TAU));
    match (basis, bit) {
        (Basis::Z, _) => (0..n).map(|j| (-PI + TAU * (j as f64 + 0.5) / n as f64, 1.0 / n as f64)).collect(),
        (Basis::X, Bit::Zero) => on(-g.delta_phi_x, g.delta_phi_x).collect(),
        (Basis::X, Bit::One) => on(PI - g.delta_phi_x, PI).chain(on(-PI, -PI + g.delta_phi_x)).collect(),
    }
}

/// Build the node set of a single-bit region.
pub fn region_quadrature(
    bit: Bit,
    basis: Basis,
    intensity: Intensity,
    g: &RegionGeometry,
    nodes: usize,
) -> RegionQuadrature {
    let (k_lo, k_hi) = ratio_bounds(bit, basis, g);
    let (t_lo, t_hi) = intensity_bounds(intensity, g);
    let slicer = Slicer { k_lo, k_hi, t_lo, t_hi };
    let mut us: Vec<f64> = slicer
        .breakpoints()
        .into_iter()
        .filter(|&x| x > 0.0 && x < 1.0)
        .map(u_of_x)
        .chain([0.0, PI])
        .collect();
    us.sort_by(f64::total_cmp);
    us.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let gl = gauss_legendre(nodes);
    let phis = phi_rule(bit, basis, g, nodes);
    let density_ul = 1.0 / (PI * PI);
    let mut columns = Vec::new();
    for w in us.windows(2) {
        let (ua, ub) = (w[0], w[1]);
        let mid = 0.5 * (ua + ub);
        if slicer.slice((0.5 * mid).cos().powi(2)).is_none() {
            continue;
        }
        for &(s, ws) in &gl {
            let ue = ua + (ub - ua) * s * s * (3.0 - 2.0 * s);
            let wue = (ub - ua) * 6.0 * s * (1.0 - s) * ws;
            let xe = (0.5 * ue).cos().powi(2);
            let Some((lo, hi)) = slicer.slice(xe) else { continue };
            let (ul_a, ul_b) = (u_of_x(hi), u_of_x(lo));
            let mut col = Vec::with_capacity(nodes * phis.len());
            for &(t, wt) in &gl {
                let ul = ul_a + (ul_b - ul_a) * t;
                let wul = (ul_b - ul_a) * wt;
                for &(phi, wphi) in &phis {
                    col.push(QuadNode {
                        amp_e: (0.5 * ue).cos(),
                        half_ue: 0.5 * ue,
                        amp_l: (0.5 * ul).cos(),
                        half_ul: 0.5 * ul,
                        phi,
                        weight: wue * wul * density_ul * wphi,
                    });
                }
            }
            columns.push(col);
        }
    }
    RegionQuadrature { spec: RegionSpec::new(bit, basis, intensity), nodes_per_axis: nodes, columns }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in [1, 2, 5, 16, 33] {
            let r = gauss_legendre(n);
            let s: f64 = r.iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-14);
            for deg in 0..(2 * n) as i32 {
                let q: f64 = r.iter().map(|&(x, w)| w * x.powi(deg)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn full_band_mass_is_exact() {
        // The three intensity bands partition μ, so their masses add up to the
        // mass of the same region with its lowest band edge pushed to zero.
        let g = RegionGeometry::default();
        let bands: f64 = Intensity::ALL
            .iter()
            .map(|&i| region_quadrature(Bit::Zero, Basis::Z, i, &g, 24).mass())
            .sum();
        let g0 = RegionGeometry { t1: 1e-12, t2: 5e-13, ..g };
        let whole = region_quadrature(Bit::Zero, Basis::Z, Intensity::I0, &g0, 24).mass();
        assert!((bands - whole).abs() < 1e-9 * whole, "{bands} vs {whole}");
    }

    #[test]
    fn bit_symmetry_of_masses() {
        let g = RegionGeometry::default();
        for basis in Basis::ALL {
            for i in Intensity::ALL {
                let a = region_quadrature(Bit::Zero, basis, i, &g, 16).mass();
                let b = region_quadrature(Bit::One, basis, i, &g, 16).mass();
                assert!((a - b).abs() < 1e-9 * a, "{basis:?} {i:?}: {a} {b}");
            }
        }
    }

    #[test]
    fn x_phase_window_weight() {
        let g = RegionGeometry::default();
        let w0: f64 = phi_rule(Bit::Zero, Basis::X, &g, 8).iter().map(|p| p.1).sum();
        let w1: f64 = phi_rule(Bit::One, Basis::X, &g, 8).iter().map(|p| p.1).sum();
        let wz: f64 = phi_rule(Bit::Zero, Basis::Z, &g, 8).iter().map(|p| p.1).sum();
        assert!((w0 - g.delta_phi_x / PI).abs() < 1e-15);
        assert!((w1 - w0).abs() < 1e-15);
        assert!((wz - 1.0).abs() < 1e-15);
    }
}
