//! Quantum-coin inequalities and the fidelity and purification quantities
//! that feed them.
//!
//! Two rounds whose emitted states have fidelity `z` produce detection
//! statistics `y` and `y'` that are tied together by
//! `G_z^L(y) ≤ y' ≤ G_z^U(y)`. The functions here evaluate those envelopes,
//! linearize them for use inside linear programs and compute the fidelities
//! (or lower bounds on them) that set `z`.

use crate::error::{Error, Result};
use crate::linalg::{fidelity, fix_gauge, hermitian_eigen, inner, EigenDecomposition, HermitianMatrix, C64};
use crate::mode_basis::NPhotonBasis;
use crate::types::{Basis, Bit};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

const DOMAIN_SLACK: f64 = 1e-12;
/// Distance by which [`lcs_tangent_shifted`] moves a reference point off a
/// kink or an endpoint with unbounded slope.
pub const KINK_SHIFT: f64 = 1e-6;

fn unit(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&v) {
        Ok(v.clamp(0.0, 1.0))
    } else {
        Err(Error::Domain(format!("{name} = {v} lies outside [0, 1]")))
    }
}

/// Which envelope of the coin inequality is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    L,
    U,
}

/// A fidelity-like coin parameter `z ∈ [0, 1]` with the envelope functions
/// attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinFunctions {
    z: f64,
}

impl CoinFunctions {
    pub fn new(z: f64) -> Result<Self> {
        Ok(CoinFunctions { z: unit("z", z)? })
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn g(&self, y: f64, sign: Side) -> Result<f64> {
        g_pm(y, self.z, sign)
    }

    pub fn envelope(&self, y: f64, side: Side) -> Result<f64> {
        g_bound(y, self.z, side)
    }

    pub fn tangent(&self, y_ref: f64, side: Side) -> Result<TangentLine> {
        lcs_tangent(self.z, y_ref, side)
    }
}

/// `g±(y, z) = y + (1−z)(1−2y) ± 2√(z(1−z)y(1−y))`; `Side::U` selects `+`.
pub fn g_pm(y: f64, z: f64, sign: Side) -> Result<f64> {
    let y = unit("y", y)?;
    let z = unit("z", z)?;
    let root = 2.0 * (z * (1.0 - z) * y * (1.0 - y)).max(0.0).sqrt();
    let base = y + (1.0 - z) * (1.0 - 2.0 * y);
    Ok(match sign {
        Side::U => base + root,
        Side::L => base - root,
    })
}

/// The envelopes `G_z^L` (zero for `y ≤ 1−z`) and `G_z^U` (one for `y ≥ z`).
pub fn g_bound(y: f64, z: f64, side: Side) -> Result<f64> {
    let yc = unit("y", y)?;
    let zc = unit("z", z)?;
    let v = match side {
        Side::L if yc > 1.0 - zc => g_pm(yc, zc, Side::L)?,
        Side::L => 0.0,
        Side::U if yc < zc => g_pm(yc, zc, Side::U)?,
        Side::U => 1.0,
    };
    Ok(v.clamp(0.0, 1.0))
}

fn g_slope(y: f64, z: f64, side: Side) -> f64 {
    let s = match side {
        Side::U => 1.0,
        Side::L => -1.0,
    };
    let root_z = (z * (1.0 - z)).sqrt();
    let root_y = (y * (1.0 - y)).sqrt();
    2.0 * z - 1.0 + s * root_z * (1.0 - 2.0 * y) / root_y
}

/// A line `slope·y + intercept` touching `G_z^K` at `y_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentLine {
    pub slope: f64,
    pub intercept: f64,
    pub y_ref: f64,
    pub z: f64,
    pub side: Side,
}

impl TangentLine {
    pub fn eval(&self, y: f64) -> f64 {
        self.slope * y + self.intercept
    }

    /// Largest amount by which the line crosses to the wrong side of the
    /// envelope on a uniform grid of `points` values of `y`.
    pub fn max_violation(&self, points: usize) -> f64 {
        (0..points)
            .map(|i| {
                let y = i as f64 / (points - 1).max(1) as f64;
                let g = g_bound(y, self.z, self.side).unwrap_or(f64::NAN);
                match self.side {
                    Side::L => self.eval(y) - g,
                    Side::U => g - self.eval(y),
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Points where the tangent is not defined: the junction of the piecewise
/// definition and endpoints where the slope diverges.
fn kinks(z: f64, side: Side) -> Vec<f64> {
    let mut k = Vec::new();
    if z > 0.0 && z < 1.0 {
        match side {
            Side::L => k.extend([1.0 - z, 1.0]),
            Side::U => k.extend([z, 0.0]),
        }
    } else if z == 1.0 {
        match side {
            Side::L => k.push(0.0),
            Side::U => k.push(1.0),
        }
    }
    k
}

/// Tangent of `G_z^K` at `y_ref`. Convexity of `G^L` and concavity of `G^U`
/// make the line a global under- (over-) estimator.
pub fn lcs_tangent(z: f64, y_ref: f64, side: Side) -> Result<TangentLine> {
    let z = unit("z", z)?;
    let y = unit("y_ref", y_ref)?;
    if let Some(k) = kinks(z, side).into_iter().find(|k| (y - k).abs() < 1e-12) {
        return Err(Error::Domain(format!(
            "reference point {y} sits on a kink of G_z^{side:?} at {k} (z = {z}); perturb it into the smooth branch"
        )));
    }
    let smooth = match side {
        Side::L => y > 1.0 - z,
        Side::U => y < z,
    };
    let slope = if !smooth {
        0.0
    } else if z == 1.0 {
        1.0
    } else {
        g_slope(y, z, side)
    };
    let value = g_bound(y, z, side)?;
    Ok(TangentLine { slope, intercept: value - slope * y, y_ref: y, z, side })
}

/// [`lcs_tangent`] after moving `y_ref` by [`KINK_SHIFT`] off any kink,
/// towards the interior of the smooth branch.
pub fn lcs_tangent_shifted(z: f64, y_ref: f64, side: Side) -> Result<TangentLine> {
    let z = unit("z", z)?;
    let mut y = unit("y_ref", y_ref)?;
    for k in kinks(z, side) {
        if (y - k).abs() < KINK_SHIFT {
            let into_branch = match side {
                Side::L => 1.0,
                Side::U => -1.0,
            };
            let dir = if k == 1.0 {
                -1.0
            } else if k == 0.0 {
                1.0
            } else {
                into_branch
            };
            y = (k + dir * KINK_SHIFT).clamp(0.0, 1.0);
        }
    }
    lcs_tangent(z, y, side)
}

fn check_unit_trace(rho: &HermitianMatrix) -> Result<()> {
    let t = rho.trace();
    if (t - 1.0).abs() > crate::linalg::TRACE_TOL {
        return Err(Error::Trace { found: t, expected: 1.0 });
    }
    Ok(())
}

/// Lower bound on `F(ρ_I, ρ_J)` from three Bures legs: each state to its
/// normalized projection, plus the fidelity of the two projections. The
/// arguments are the projected operators `Π ρ Π` before renormalization, so
/// their traces are the captured weights.
pub fn projected_fidelity_lower_bound(proj_i: &HermitianMatrix, proj_j: &HermitianMatrix) -> Result<f64> {
    if proj_i.dim() != proj_j.dim() {
        return Err(Error::DimensionMismatch(proj_i.dim(), proj_j.dim()));
    }
    let (ti, tj) = (proj_i.trace(), proj_j.trace());
    if !(ti > 0.0 && tj > 0.0) {
        return Err(Error::Domain("projection annihilates the state".into()));
    }
    let f_proj = fidelity(&proj_i.scaled(1.0 / ti), &proj_j.scaled(1.0 / tj))?;
    let d = |f: f64| crate::linalg::bures_from_fidelity(f.min(1.0));
    let chain = d(ti) + d(f_proj) + d(tj);
    let root = (1.0 - 0.5 * chain * chain).max(0.0);
    Ok(root * root)
}

/// Fidelity lower bound between two full unit-trace n-photon states, keeping
/// only basis states with at most `n_l_cut` leakage photons. With no
/// truncation this is the exact fidelity.
pub fn fidelity_lower_bound(
    rho_i: &HermitianMatrix,
    rho_j: &HermitianMatrix,
    basis: &NPhotonBasis,
    n_l_cut: u32,
) -> Result<f64> {
    if rho_i.dim() != rho_j.dim() {
        return Err(Error::DimensionMismatch(rho_i.dim(), rho_j.dim()));
    }
    if rho_i.dim() != basis.len() {
        return Err(Error::DimensionMismatch(rho_i.dim(), basis.len()));
    }
    check_unit_trace(rho_i)?;
    check_unit_trace(rho_j)?;
    if n_l_cut >= basis.n() {
        return fidelity(rho_i, rho_j);
    }
    let idx: Vec<usize> = (0..basis.len()).filter(|&i| basis.leak_count_at(i) <= n_l_cut).collect();
    projected_fidelity_lower_bound(&rho_i.principal_submatrix(&idx), &rho_j.principal_submatrix(&idx))
}

/// Phases `ξ_{a,β,j}` attached to the shield states of each purification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PurificationConvention {
    /// Non-zero phases; every unlisted `(a, β, j)` uses 0.
    pub phases: Vec<(Bit, Basis, usize, f64)>,
}

impl Default for PurificationConvention {
    fn default() -> Self {
        PurificationConvention { phases: vec![(Bit::Zero, Basis::Z, 1, PI), (Bit::One, Basis::X, 1, PI)] }
    }
}

impl PurificationConvention {
    pub fn xi(&self, bit: Bit, basis: Basis, j: usize) -> f64 {
        self.phases
            .iter()
            .find(|&&(a, b, k, _)| a == bit && b == basis && k == j)
            .map_or(0.0, |p| p.3)
    }

    pub fn validate(&self) -> Result<()> {
        match self.phases.iter().find(|p| !(p.3 > -PI && p.3 <= PI)) {
            Some(p) => Err(Error::InvalidInput(format!("phase {} lies outside (-pi, pi]", p.3))),
            None => Ok(()),
        }
    }
}

/// Order of the four per-setting states used throughout the overlap routines.
pub const OVERLAP_ORDER: [(Bit, Basis); 4] =
    [(Bit::Zero, Basis::Z), (Bit::One, Basis::Z), (Bit::Zero, Basis::X), (Bit::One, Basis::X)];

/// Gauge references for the two dominant eigenvectors of each of the four
/// states, built from the ideal key-basis vectors `u0` and `u1`. The ideal
/// test-basis vectors are `(u0 ± u1)/√2`; the second eigenvector of each
/// state is referenced to the ideal vector of the other bit.
pub fn bb84_gauge_references(u0: &[C64], u1: &[C64]) -> [[Vec<C64>; 2]; 4] {
    let plus: Vec<C64> = u0.iter().zip(u1).map(|(a, b)| (a + b) / SQRT_2).collect();
    let minus: Vec<C64> = u0.iter().zip(u1).map(|(a, b)| (a - b) / SQRT_2).collect();
    [
        [u0.to_vec(), u1.to_vec()],
        [u1.to_vec(), u0.to_vec()],
        [plus.clone(), minus.clone()],
        [minus, plus],
    ]
}

/// Eigen-pairs of a state in descending order with every eigenvector's
/// global phase fixed: the first two are aligned with `refs` (real positive
/// overlap), the rest have their leading component real positive.
pub fn gauged_eigenpairs(rho: &HermitianMatrix, refs: &[Vec<C64>; 2]) -> Result<Vec<(f64, Vec<C64>)>> {
    let eig: EigenDecomposition = hermitian_eigen(rho)?;
    let mut pairs = eig.descending();
    for (j, (_, v)) in pairs.iter_mut().enumerate() {
        let anchor = refs.get(j).map(|r| inner(r, v)).filter(|z| z.norm() > 1e-8);
        match anchor {
            Some(z) => {
                let phase = z.conj() / z.norm();
                v.iter_mut().for_each(|x| *x *= phase);
            }
            None => fix_gauge(v),
        }
    }
    Ok(pairs)
}

/// `Re⟨ψ_Z|ψ_X⟩` for the entangled states built from purifications of the
/// four single-photon states `ρ_{a,β}` (given in [`OVERLAP_ORDER`]).
pub fn purification_overlap(
    states: [&HermitianMatrix; 4],
    refs: &[[Vec<C64>; 2]; 4],
    convention: &PurificationConvention,
) -> Result<f64> {
    let d = states[0].dim();
    if let Some(s) = states.iter().find(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch(d, s.dim()));
    }
    if let Some(r) = refs.iter().flatten().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch(d, r.len()));
    }
    convention.validate()?;
    let mut phased = Vec::with_capacity(4);
    for (k, rho) in states.iter().enumerate() {
        let t = rho.trace();
        if !(t > 0.0) {
            return Err(Error::Domain("state with zero trace".into()));
        }
        let (bit, basis) = OVERLAP_ORDER[k];
        let pairs = gauged_eigenpairs(&rho.scaled(1.0 / t), &refs[k])?;
        let purif: Vec<Vec<C64>> = pairs
            .into_iter()
            .enumerate()
            .map(|(j, (q, v))| {
                let w = C64::from_polar(q.max(0.0).sqrt(), convention.xi(bit, basis, j));
                v.into_iter().map(|x| x * w).collect()
            })
            .collect();
        phased.push(purif);
    }
    let pair = |a: usize, b: usize| -> C64 {
        phased[a].iter().zip(&phased[b]).map(|(u, v)| inner(u, v)).sum()
    };
    let total = pair(0, 2) + pair(0, 3) + pair(1, 2) - pair(1, 3);
    Ok((total.re / (2.0 * SQRT_2)).clamp(-1.0, 1.0))
}

/// `F'` with the degeneracy flag raised when the coin imbalance exceeds the
/// coin yield.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinFidelity {
    pub value: f64,
    pub degenerate: bool,
}

/// `F' = (1 − (1 − Re⟨ψ_Z|ψ_X⟩)/Y_coin)²`, zero once the ratio exceeds one.
pub fn coin_f_prime(overlap_real: f64, y_coin_lower: f64) -> Result<CoinFidelity> {
    if !(overlap_real.is_finite() && (-1.0 - DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&overlap_real)) {
        return Err(Error::Domain(format!("overlap {overlap_real} lies outside [-1, 1]")));
    }
    if !(y_coin_lower > 0.0 && y_coin_lower <= 1.0 + DOMAIN_SLACK) {
        return Err(Error::Domain(format!("coin yield {y_coin_lower} lies outside (0, 1]")));
    }
    let ratio = (1.0 - overlap_real.min(1.0)) / y_coin_lower.min(1.0);
    if ratio > 1.0 {
        return Ok(CoinFidelity { value: 0.0, degenerate: true });
    }
    Ok(CoinFidelity { value: ((1.0 - ratio) * (1.0 - ratio)).clamp(0.0, 1.0), degenerate: false })
}

/// Upper bound `G^U_{F'}(e_X)` on the phase-error rate.
pub fn phase_error_upper(e_x_upper: f64, f_prime: f64) -> Result<f64> {
    g_bound(e_x_upper, f_prime, Side::U)
}

/// Interval `[G^L_F(Y), G^U_F(Y)]` containing the yield of a round whose
/// state has fidelity `F` with the one that produced `Y`.
pub fn yield_transfer(y_known: f64, f: f64) -> Result<(f64, f64)> {
    Ok((g_bound(y_known, f, Side::L)?, g_bound(y_known, f, Side::U)?))
}
