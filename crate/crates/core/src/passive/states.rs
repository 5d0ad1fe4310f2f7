//! Region-averaged n-photon operators and photon-number statistics.

use super::quadrature::{region_quadrature, QuadNode, QuadratureOptions, RegionQuadrature};
use super::{branch_amplitudes, PassiveParams, PN_MAX};
use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix, C64};
use crate::mode_basis::NPhotonBasis;
use crate::par::{map_ordered, Execution};
use crate::types::{Basis, Bit, BitSel, Intensity, RegionSpec};

/// Unnormalized region integrals: probability mass, `⟨Tr σ̄ⁿ⟩_Ω` for
/// `n ≤ PN_MAX`, and `⟨Π σ̄ⁿ Π⟩_Ω` on the (possibly truncated) basis for
/// `n ≤ n_cut`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRaw {
    pub mass: f64,
    pub pn: Vec<f64>,
    pub blocks: Vec<HermitianMatrix>,
}

impl RegionRaw {
    fn zeros(bases: &[NPhotonBasis]) -> Self {
        RegionRaw {
            mass: 0.0,
            pn: vec![0.0; PN_MAX + 1],
            blocks: bases.iter().map(|b| HermitianMatrix::zeros(b.len())).collect(),
        }
    }

    fn absorb(&mut self, other: &RegionRaw) {
        self.mass += other.mass;
        for (a, b) in self.pn.iter_mut().zip(&other.pn) {
            *a += b;
        }
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.add_scaled(b, 1.0);
        }
    }
}

/// Quadrature result for one region (a single bit or the union of both).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionState {
    pub spec: RegionSpec,
    pub raw: RegionRaw,
    pub nodes: usize,
}

/// Normalized view of one n-photon block of a region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionAverage {
    /// Unit-trace operator `ΠρΠ / Tr[ΠρΠ]` on the block's basis.
    pub rho: HermitianMatrix,
    pub p_n_given_region: f64,
    pub region_mass: f64,
    /// `Tr[ΠρΠ]`, equal to one when the block is not truncated.
    pub captured: f64,
}

impl RegionState {
    pub fn mass(&self) -> f64 {
        self.raw.mass
    }

    pub fn n_cut(&self) -> u32 {
        self.raw.blocks.len() as u32 - 1
    }

    /// `p_{n|Ω}` for `n ≤ PN_MAX`.
    pub fn p_n(&self, n: usize) -> f64 {
        self.raw.pn[n] / self.raw.mass
    }

    pub fn p_n_all(&self) -> Vec<f64> {
        self.raw.pn.iter().map(|p| p / self.raw.mass).collect()
    }

    /// `Π ρⁿ Π` with `ρⁿ` the normalized n-photon state; its trace is the
    /// weight captured by the truncated basis.
    pub fn projected_block(&self, n: u32) -> Result<HermitianMatrix> {
        let n = n as usize;
        if n >= self.raw.blocks.len() {
            return Err(Error::InvalidInput(format!("block n = {n} exceeds n_cut = {}", self.n_cut())));
        }
        if self.raw.pn[n] <= 0.0 {
            return Err(Error::EmptyRegion(format!("{} (n = {n})", self.spec)));
        }
        let mut b = self.raw.blocks[n].scaled(1.0 / self.raw.pn[n]);
        b.hermitize();
        Ok(b)
    }

    pub fn captured(&self, n: u32) -> Result<f64> {
        Ok(self.projected_block(n)?.trace())
    }

    /// Unit-trace n-photon state (renormalized after truncation).
    pub fn rho(&self, n: u32) -> Result<HermitianMatrix> {
        let b = self.projected_block(n)?;
        let t = b.trace();
        Ok(b.scaled(1.0 / t))
    }

    pub fn average(&self, n: u32) -> Result<RegionAverage> {
        let b = self.projected_block(n)?;
        let captured = b.trace();
        Ok(RegionAverage {
            rho: b.scaled(1.0 / captured),
            p_n_given_region: self.p_n(n as usize),
            region_mass: self.mass(),
            captured,
        })
    }

    /// Union of two disjoint regions of the same basis and intensity.
    pub fn union(&self, other: &RegionState) -> Result<RegionState> {
        if self.spec.basis != other.spec.basis || self.spec.intensity != other.spec.intensity {
            return Err(Error::InvalidInput(format!("cannot merge {} with {}", self.spec, other.spec)));
        }
        let mut raw = self.raw.clone();
        raw.absorb(&other.raw);
        Ok(RegionState { spec: RegionSpec::union(self.spec.basis, self.spec.intensity), raw, nodes: self.nodes })
    }
}

const SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

struct Scratch {
    pow: Vec<C64>,
    vecs: Vec<Vec<C64>>,
}

fn accumulate_node(
    node: &QuadNode,
    params: &PassiveParams,
    bases: &[NPhotonBasis],
    acc: &mut RegionRaw,
    scratch: &mut Scratch,
) {
    let sm = params.mu_max.sqrt();
    let branches: &[(f64, f64)] = if params.omega == 0.0 { &SIGNS[..1] } else { &SIGNS };
    let wb = node.weight / branches.len() as f64;
    acc.mass += node.weight;
    for &(se, sl) in branches {
        let amps = branch_amplitudes(
            sm * node.amp_e,
            sm * node.amp_l,
            node.phi,
            se * node.half_ue,
            sl * node.half_ul,
            params.omega,
        );
        let x: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let mut t = (-x).exp();
        acc.pn[0] += wb * t;
        for n in 1..=PN_MAX {
            t *= x / n as f64;
            acc.pn[n] += wb * t;
        }
        let scale = (-0.5 * x).exp();
        for (n, basis) in bases.iter().enumerate() {
            let d = basis.len();
            let v = &mut scratch.vecs[n];
            basis.coherent_coefficients(&amps, &mut scratch.pow, v);
            let data = acc.blocks[n].data_mut();
            for i in 0..d {
                let vi = v[i] * (wb * scale * scale);
                if vi == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &mut data[i * d..(i + 1) * d];
                for j in i..d {
                    row[j] += vi * v[j].conj();
                }
            }
        }
    }
}

fn mirror_upper(m: &mut HermitianMatrix) {
    let d = m.dim();
    for i in 0..d {
        let diag = m.get(i, i);
        m.set(i, i, C64::new(diag.re, 0.0));
        for j in (i + 1)..d {
            let v = m.get(i, j);
            m.set(j, i, v.conj());
        }
    }
}

/// Integrate the region's node set; columns are processed independently and
/// reduced in order.
pub fn accumulate_region(
    quad: &RegionQuadrature,
    params: &PassiveParams,
    bases: &[NPhotonBasis],
    exec: Execution,
) -> RegionRaw {
    let max_n = bases.iter().map(|b| b.n()).max().unwrap_or(0) as usize;
    let partials = map_ordered(exec, &quad.columns, |col| {
        let mut acc = RegionRaw::zeros(bases);
        let mut scratch = Scratch {
            pow: vec![C64::new(0.0, 0.0); super::MODE_COUNT * (max_n + 1)],
            vecs: bases.iter().map(|b| vec![C64::new(0.0, 0.0); b.len()]).collect(),
        };
        for node in col {
            accumulate_node(node, params, bases, &mut acc, &mut scratch);
        }
        acc
    });
    let mut total = RegionRaw::zeros(bases);
    for p in &partials {
        total.absorb(p);
    }
    total.blocks.iter_mut().for_each(mirror_upper);
    total
}

fn scalar_moments(quad: &RegionQuadrature, params: &PassiveParams, exec: Execution) -> RegionRaw {
    accumulate_region(quad, params, &[], exec)
}

fn check_convergence(coarse: &RegionRaw, fine: &RegionRaw, n_cut: u32, tol: f64) -> Result<()> {
    if (coarse.mass - fine.mass).abs() > tol * fine.mass {
        return Err(Error::NotConverged { coarse: coarse.mass, fine: fine.mass });
    }
    for n in 0..=n_cut as usize {
        let (a, b) = (coarse.pn[n] / coarse.mass, fine.pn[n] / fine.mass);
        if (a - b).abs() > tol {
            return Err(Error::NotConverged { coarse: a, fine: b });
        }
    }
    Ok(())
}

fn single_region(bit: Bit, basis: Basis, intensity: Intensity, params: &PassiveParams, opts: &QuadratureOptions, bases: &[NPhotonBasis]) -> Result<RegionState> {
    let quad = region_quadrature(bit, basis, intensity, &params.geometry, opts.nodes);
    let raw = accumulate_region(&quad, params, bases, opts.execution);
    let spec = RegionSpec::new(bit, basis, intensity);
    if !(raw.mass > 0.0) {
        return Err(Error::EmptyRegion(spec.to_string()));
    }
    if opts.convergence_check {
        let fine_quad = region_quadrature(bit, basis, intensity, &params.geometry, 2 * opts.nodes);
        let fine = scalar_moments(&fine_quad, params, opts.execution);
        check_convergence(&raw, &fine, params.n_cut, opts.tolerance)?;
    }
    Ok(RegionState { spec, raw, nodes: opts.nodes })
}

/// Quadrature state of a region (single bit or union of both bits).
pub fn region_state(spec: RegionSpec, params: &PassiveParams, opts: &QuadratureOptions) -> Result<RegionState> {
    params.validate()?;
    let bases = params.bases();
    match spec.bit {
        BitSel::Bit(b) => single_region(b, spec.basis, spec.intensity, params, opts, &bases),
        BitSel::Both => {
            let a = single_region(Bit::Zero, spec.basis, spec.intensity, params, opts, &bases)?;
            let b = single_region(Bit::One, spec.basis, spec.intensity, params, opts, &bases)?;
            a.union(&b)
        }
    }
}

/// Normalized n-photon state, `p_{n|Ω}` and `p_Ω` of one region.
pub fn region_average(spec: RegionSpec, n: u32, params: &PassiveParams, opts: &QuadratureOptions) -> Result<RegionAverage> {
    if n > params.n_cut {
        return Err(Error::InvalidInput(format!("n = {n} exceeds n_cut = {}", params.n_cut)));
    }
    region_state(spec, params, opts)?.average(n)
}

/// All twelve single-bit regions of one parameter point.
#[derive(Debug, Clone)]
pub struct PassiveStateSet {
    pub params: PassiveParams,
    pub regions: Vec<RegionState>,
}

fn slot(bit: Bit, basis: Basis, intensity: Intensity) -> usize {
    (basis.index() * 3 + intensity.index()) * 2 + bit.index()
}

impl PassiveStateSet {
    pub fn compute(params: &PassiveParams, opts: &QuadratureOptions) -> Result<Self> {
        params.validate()?;
        let bases = params.bases();
        let specs = RegionSpec::all_single();
        let mut regions = Vec::with_capacity(specs.len());
        for s in specs {
            let BitSel::Bit(bit) = s.bit else { unreachable!("all_single yields single-bit regions") };
            regions.push(single_region(bit, s.basis, s.intensity, params, opts, &bases)?);
        }
        Ok(PassiveStateSet { params: params.clone(), regions })
    }

    pub fn get(&self, bit: Bit, basis: Basis, intensity: Intensity) -> &RegionState {
        &self.regions[slot(bit, basis, intensity)]
    }

    pub fn union(&self, basis: Basis, intensity: Intensity) -> RegionState {
        self.get(Bit::Zero, basis, intensity)
            .union(self.get(Bit::One, basis, intensity))
            .expect("regions of one basis and intensity always merge")
    }

    pub fn bases(&self) -> Vec<NPhotonBasis> {
        self.params.bases()
    }
}
