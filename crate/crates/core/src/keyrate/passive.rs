//! Key rate of the passive transmitter.

use super::family::{decoy_inputs, even_mixture, fidelity_table, overlap_sq, state_fidelities, LpTracker};
use super::{
    assemble_rate, provenance, Analysis, FidelityRecord, KeyRateReport, ProtocolConfig, RateInputs, RegionSummary,
    SourceSummary, Transmitter,
};
use crate::bounds::{bb84_gauge_references, purification_overlap, OVERLAP_ORDER};
use crate::channel::{
    passive_measurement, passive_observables, reference_error, reference_yield_of_state, ChannelParams,
    PassiveObservables,
};
use crate::error::Result;
use crate::linalg::{HermitianMatrix, C64};
use crate::lp::{
    build_bit_error_lp, build_refined_error_lp, build_refined_yield_lp, build_yield_lp, key_opp_split,
    DecoyCoinInputs, KeyOppSplit, LinearProgram, RefinedErrorInputs, RefinedYieldInputs, TauFidelities,
};
use crate::mode_basis::{ModeConfiguration, NPhotonBasis};
use crate::passive::{PassiveParams, PassiveStateSet, QuadratureOptions, RegionState, MODE_COUNT};
use crate::types::{Basis, Bit, Intensity};

/// States, observations and bases of one passive parameter point, shared by
/// the baseline and refined analyses.
#[derive(Debug, Clone)]
pub struct PassiveContext {
    pub params: PassiveParams,
    pub channel: ChannelParams,
    pub eta: f64,
    pub states: PassiveStateSet,
    /// Bit-merged regions, indexed `basis·3 + I`.
    pub unions: Vec<RegionState>,
    pub observations: PassiveObservables,
    pub bases: Vec<NPhotonBasis>,
    pub nodes: usize,
}

impl PassiveContext {
    pub fn build(params: &PassiveParams, channel: &ChannelParams, opts: &QuadratureOptions) -> Result<Self> {
        channel.validate()?;
        let states = PassiveStateSet::compute(params, opts)?;
        let mut unions = Vec::with_capacity(6);
        for basis in Basis::ALL {
            for i in Intensity::ALL {
                unions.push(states.union(basis, i));
            }
        }
        let observations = passive_observables(params, channel, opts.nodes)?;
        Ok(PassiveContext {
            params: params.clone(),
            channel: *channel,
            eta: channel.transmittance(),
            bases: params.bases(),
            states,
            unions,
            observations,
            nodes: opts.nodes,
        })
    }

    pub fn union(&self, basis: Basis, i: Intensity) -> &RegionState {
        &self.unions[basis.index() * 3 + i.index()]
    }

    pub fn region(&self, bit: Bit, basis: Basis, i: Intensity) -> &RegionState {
        self.states.get(bit, basis, i)
    }

    fn n_cut(&self) -> u32 {
        self.params.n_cut
    }

    fn blocks(&self, region: impl Fn(Intensity) -> RegionState) -> Result<[Vec<HermitianMatrix>; 3]> {
        let mut out: [Vec<HermitianMatrix>; 3] = Default::default();
        for (k, i) in Intensity::ALL.into_iter().enumerate() {
            let r = region(i);
            out[k] = (0..=self.n_cut()).map(|n| r.projected_block(n)).collect::<Result<_>>()?;
        }
        Ok(out)
    }

    fn p_n(&self, region: impl Fn(Intensity) -> RegionState) -> [Vec<f64>; 3] {
        Intensity::ALL.map(|i| {
            let r = region(i);
            (0..=self.n_cut() as usize).map(|n| r.p_n(n)).collect()
        })
    }

    /// Bit-averaged gain family of one basis.
    pub fn yield_family(&self, basis: Basis, records: &mut Vec<FidelityRecord>) -> Result<DecoyCoinInputs> {
        let label = format!("{basis:?}");
        let region = |i| self.union(basis, i).clone();
        let blocks = self.blocks(region)?;
        let fid = fidelity_table(&label, &blocks, records)?;
        let mut reference: [Vec<f64>; 3] = Default::default();
        for (k, i) in Intensity::ALL.into_iter().enumerate() {
            let r = self.union(basis, i);
            reference[k] = (0..=self.n_cut())
                .map(|n| reference_yield_of_state(&r.rho(n)?, &self.bases[n as usize], self.eta, self.channel.p_dark))
                .collect::<Result<_>>()?;
        }
        let observed = Intensity::ALL.map(|i| self.observations.basis(basis, i).gain);
        Ok(decoy_inputs(&label, observed, self.p_n(region), fid, reference))
    }

    /// Outcome-`outcome` family of bit `bit` in the test basis. With
    /// `outcome ≠ bit` this is the bit-error family.
    pub fn outcome_family(&self, bit: Bit, outcome: Bit, fid: &[[[f64; 3]; 3]]) -> Result<DecoyCoinInputs> {
        let label = format!("{}X>{}", bit.index(), outcome.index());
        let mut reference: [Vec<f64>; 3] = Default::default();
        for (k, i) in Intensity::ALL.into_iter().enumerate() {
            let r = self.region(bit, Basis::X, i);
            reference[k] = (0..=self.n_cut())
                .map(|n| self.outcome_reference(&r.rho(n)?, n, bit, outcome))
                .collect::<Result<_>>()?;
        }
        let observed = Intensity::ALL.map(|i| self.observations.get(bit, Basis::X, i).outcome_gain(bit, outcome));
        let p_n = self.p_n(|i| self.region(bit, Basis::X, i).clone());
        Ok(decoy_inputs(&label, observed, p_n, fid.to_vec(), reference))
    }

    /// Model probability of outcome `outcome` for an n-photon test-basis
    /// state of bit `bit`.
    fn outcome_reference(&self, rho: &HermitianMatrix, n: u32, bit: Bit, outcome: Bit) -> Result<f64> {
        let basis = &self.bases[n as usize];
        let (eta, pd) = (self.eta, self.channel.p_dark);
        let err = reference_error(rho, basis, passive_measurement(Basis::X), bit, eta, pd)?;
        if outcome == bit {
            Ok((reference_yield_of_state(rho, basis, eta, pd)? - err).max(0.0))
        } else {
            Ok(err)
        }
    }

    /// Per-bit fidelity tables of the test basis.
    pub fn test_fidelities(&self, bit: Bit, records: &mut Vec<FidelityRecord>) -> Result<Vec<[[f64; 3]; 3]>> {
        let blocks = self.blocks(|i| self.region(bit, Basis::X, i).clone())?;
        fidelity_table(&format!("{}X", bit.index()), &blocks, records)
    }

    /// Ideal single-photon vectors `|e⟩` and `|l⟩` in the n = 1 basis.
    pub fn ideal_vectors(&self) -> Result<(Vec<C64>, Vec<C64>)> {
        let b = &self.bases[1];
        let unit = |mode: usize| -> Result<Vec<C64>> {
            let mut occ = vec![0; MODE_COUNT];
            occ[mode] = 1;
            let idx = b.basis_index(&ModeConfiguration::new(occ))?;
            let mut v = vec![C64::new(0.0, 0.0); b.len()];
            v[idx] = C64::new(1.0, 0.0);
            Ok(v)
        };
        Ok((unit(0)?, unit(1)?))
    }

    fn single_photon_states(&self) -> Result<Vec<HermitianMatrix>> {
        OVERLAP_ORDER.iter().map(|&(bit, basis)| self.region(bit, basis, Intensity::I0).rho(1)).collect()
    }

    fn summaries(&self) -> Vec<RegionSummary> {
        let mut out = Vec::with_capacity(12);
        for basis in Basis::ALL {
            for i in Intensity::ALL {
                for bit in Bit::ALL {
                    let r = self.region(bit, basis, i);
                    let o = self.observations.get(bit, basis, i);
                    out.push(RegionSummary {
                        label: format!("{}{basis:?}{i}", bit.index()),
                        p_omega: r.mass(),
                        gain: o.gain,
                        error_gain: o.error_gain,
                        p_n: r.p_n_all(),
                    });
                }
            }
        }
        out
    }
}

/// Builds the context of the configured passive source at one grid point.
pub fn passive_context(cfg: &ProtocolConfig, distance_km: f64, att_db: f64) -> Result<PassiveContext> {
    PassiveContext::build(&cfg.passive.params(att_db), &cfg.channel_at(distance_km), &cfg.quadrature)
}

/// Key rate under the baseline analysis.
pub fn keyrate_passive(cfg: &ProtocolConfig, distance_km: f64, att_db: f64) -> Result<KeyRateReport> {
    passive_report(&passive_context(cfg, distance_km, att_db)?, cfg, Analysis::Baseline, att_db)
}

/// Key rate under the refined analysis.
pub fn keyrate_passive_refined(cfg: &ProtocolConfig, distance_km: f64, att_db: f64) -> Result<KeyRateReport> {
    passive_report(&passive_context(cfg, distance_km, att_db)?, cfg, Analysis::Refined, att_db)
}

/// Intermediate bounds of either analysis.
struct Bounds {
    y1_l: f64,
    y_x_l: f64,
    gamma_x_u: f64,
    overlap: f64,
    key_weight: f64,
}

fn baseline_bounds(ctx: &PassiveContext, cfg: &ProtocolConfig, lp: &mut LpTracker, rec: &mut Vec<FidelityRecord>) -> Result<Bounds> {
    let y1_l = lp.optimum(&build_yield_lp(&ctx.yield_family(Basis::Z, rec)?)?)?;
    let y_x_l = lp.optimum(&build_yield_lp(&ctx.yield_family(Basis::X, rec)?)?)?;
    let mut gamma = 0.0;
    for bit in Bit::ALL {
        let fid = ctx.test_fidelities(bit, rec)?;
        gamma += 0.5 * lp.optimum(&build_bit_error_lp(&ctx.outcome_family(bit, bit.flip(), &fid)?)?)?;
    }
    let (u0, u1) = ctx.ideal_vectors()?;
    let refs = bb84_gauge_references(&u0, &u1);
    let s = ctx.single_photon_states()?;
    let overlap = purification_overlap([&s[0], &s[1], &s[2], &s[3]], &refs, &cfg.purification)?;
    Ok(Bounds { y1_l, y_x_l, gamma_x_u: gamma, overlap, key_weight: 1.0 })
}

/// Key/opp splits of the single-photon states, indexed `[bit][basis][I]`.
fn splits(ctx: &PassiveContext) -> Result<[[[KeyOppSplit; 3]; 2]; 2]> {
    let mut out: Vec<KeyOppSplit> = Vec::with_capacity(12);
    for bit in Bit::ALL {
        for basis in Basis::ALL {
            for i in Intensity::ALL {
                out.push(key_opp_split(&ctx.region(bit, basis, i).rho(1)?)?);
            }
        }
    }
    let mut it = out.into_iter();
    let mut take3 = || -> [KeyOppSplit; 3] { std::array::from_fn(|_| it.next().expect("twelve splits")) };
    let z0 = take3();
    let x0 = take3();
    let z1 = take3();
    let x1 = take3();
    Ok([[z0, x0], [z1, x1]])
}

/// Refined yield program of one basis: the key and opp components are the
/// bit-averaged mixtures of the per-bit dominant eigenvectors, and the
/// mixture weights are the smaller of the two bits' eigenvalues.
fn refined_yield(
    ctx: &PassiveContext,
    sp: &[[[KeyOppSplit; 3]; 2]; 2],
    basis: Basis,
    lp: &mut LpTracker,
    rec: &mut Vec<FidelityRecord>,
) -> Result<f64> {
    let b = basis.index();
    let key: [HermitianMatrix; 3] = std::array::from_fn(|i| even_mixture(&sp[0][b][i].v_key, &sp[1][b][i].v_key));
    let opp: [HermitianMatrix; 3] = std::array::from_fn(|i| even_mixture(&sp[0][b][i].v_opp, &sp[1][b][i].v_opp));
    let mut key_opp = [0.0; 3];
    for i in 0..3 {
        key_opp[i] = crate::linalg::fidelity(&key[i], &opp[i])?.min(1.0);
    }
    let tau = TauFidelities { key: state_fidelities(&key)?, opp: state_fidelities(&opp)?, key_opp };
    let basis1 = &ctx.bases[1];
    let refy = |m: &HermitianMatrix| reference_yield_of_state(m, basis1, ctx.eta, ctx.channel.p_dark);
    let mut reference_key = [0.0; 3];
    let mut reference_opp = [0.0; 3];
    for i in 0..3 {
        reference_key[i] = refy(&key[i])?;
        reference_opp[i] = refy(&opp[i])?;
    }
    let inputs = RefinedYieldInputs {
        base: ctx.yield_family(basis, rec)?,
        q_key: std::array::from_fn(|i| sp[0][b][i].q_key.min(sp[1][b][i].q_key)),
        q_opp: std::array::from_fn(|i| sp[0][b][i].q_opp.min(sp[1][b][i].q_opp)),
        tau,
        reference_key,
        reference_opp,
    };
    lp.optimum(&build_refined_yield_lp(&inputs)?)
}

fn key_of(s: &KeyOppSplit) -> &Vec<C64> {
    &s.v_key
}

fn opp_of(s: &KeyOppSplit) -> &Vec<C64> {
    &s.v_opp
}

fn refined_error(
    ctx: &PassiveContext,
    sp: &[[[KeyOppSplit; 3]; 2]; 2],
    lp: &mut LpTracker,
    rec: &mut Vec<FidelityRecord>,
) -> Result<f64> {
    let x = Basis::X.index();
    let fid = [ctx.test_fidelities(Bit::Zero, rec)?, ctx.test_fidelities(Bit::One, rec)?];
    let mut families: Vec<[DecoyCoinInputs; 2]> = Vec::with_capacity(2);
    for bit in Bit::ALL {
        let f = &fid[bit.index()];
        families.push([ctx.outcome_family(bit, Bit::Zero, f)?, ctx.outcome_family(bit, Bit::One, f)?]);
    }
    let pair_table = |a: usize, pick: fn(&KeyOppSplit) -> &Vec<C64>| -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| overlap_sq(pick(&sp[a][x][i]), pick(&sp[a][x][j]))))
    };
    let mut reference_key = [[[0.0; 3]; 2]; 2];
    let mut reference_opp = [[[0.0; 3]; 2]; 2];
    for bit in Bit::ALL {
        let a = bit.index();
        for outcome in Bit::ALL {
            for i in 0..3 {
                let s = &sp[a][x][i];
                reference_key[a][outcome.index()][i] =
                    ctx.outcome_reference(&HermitianMatrix::outer(&s.v_key, 1.0), 1, bit, outcome)?;
                reference_opp[a][outcome.index()][i] =
                    ctx.outcome_reference(&HermitianMatrix::outer(&s.v_opp, 1.0), 1, bit, outcome)?;
            }
        }
    }
    let mut it = families.into_iter();
    let inputs = RefinedErrorInputs {
        families: [it.next().expect("bit 0"), it.next().expect("bit 1")],
        q_key: std::array::from_fn(|a| std::array::from_fn(|i| sp[a][x][i].q_key)),
        q_opp: std::array::from_fn(|a| std::array::from_fn(|i| sp[a][x][i].q_opp)),
        f_key: [pair_table(0, key_of), pair_table(1, key_of)],
        f_opp: [pair_table(0, opp_of), pair_table(1, opp_of)],
        cross_key_opp: std::array::from_fn(|a| std::array::from_fn(|i| overlap_sq(&sp[a][x][i].v_key, &sp[1 - a][x][i].v_opp))),
        reference_key,
        reference_opp,
    };
    lp.optimum(&build_refined_error_lp(&inputs)?)
}

fn refined_bounds(ctx: &PassiveContext, cfg: &ProtocolConfig, lp: &mut LpTracker, rec: &mut Vec<FidelityRecord>) -> Result<Bounds> {
    let sp = splits(ctx)?;
    let y1_l = refined_yield(ctx, &sp, Basis::Z, lp, rec)?;
    let y_x_l = refined_yield(ctx, &sp, Basis::X, lp, rec)?;
    let gamma_x_u = refined_error(ctx, &sp, lp, rec)?;
    let (u0, u1) = ctx.ideal_vectors()?;
    let refs = bb84_gauge_references(&u0, &u1);
    let pure: [HermitianMatrix; 4] = std::array::from_fn(|k| {
        let (bit, basis) = OVERLAP_ORDER[k];
        HermitianMatrix::outer(&sp[bit.index()][basis.index()][0].v_key, 1.0)
    });
    let overlap = purification_overlap([&pure[0], &pure[1], &pure[2], &pure[3]], &refs, &cfg.purification)?;
    let z = Basis::Z.index();
    let key_weight = sp[0][z][0].q_key.min(sp[1][z][0].q_key);
    Ok(Bounds { y1_l, y_x_l, gamma_x_u, overlap, key_weight })
}

/// Every estimation program of both analyses at a prepared context, in
/// solution order. Each program carries its linearization points.
pub fn passive_programs(ctx: &PassiveContext, cfg: &ProtocolConfig) -> Result<Vec<LinearProgram>> {
    let mut lp = LpTracker::recording();
    let mut rec = Vec::new();
    baseline_bounds(ctx, cfg, &mut lp, &mut rec)?;
    refined_bounds(ctx, cfg, &mut lp, &mut rec)?;
    Ok(lp.recorded.unwrap_or_default())
}

/// Assembles the report of either analysis from a prepared context.
pub fn passive_report(ctx: &PassiveContext, cfg: &ProtocolConfig, analysis: Analysis, att_db: f64) -> Result<KeyRateReport> {
    let mut lp = LpTracker::default();
    let mut rec = Vec::new();
    let b = match analysis {
        Analysis::Baseline => baseline_bounds(ctx, cfg, &mut lp, &mut rec)?,
        Analysis::Refined => refined_bounds(ctx, cfg, &mut lp, &mut rec)?,
    };
    let key = ctx.union(Basis::Z, Intensity::I0);
    let obs = ctx.observations.basis(Basis::Z, Intensity::I0);
    let inputs = RateInputs {
        prefactor: cfg.p_zb * key.mass(),
        p1: key.p_n(1),
        key_weight: b.key_weight,
        y1_l: b.y1_l,
        y_x_l: b.y_x_l,
        gamma_x_u: b.gamma_x_u,
        overlap: b.overlap,
        f_zx: None,
        q_key: obs.gain,
        e_key: obs.error_rate(),
        f_ec: ctx.channel.f_ec,
    };
    let out = assemble_rate(&inputs)?;
    let mut prov_cfg = cfg.clone();
    prov_cfg.quadrature.nodes = ctx.nodes;
    Ok(KeyRateReport {
        transmitter: Transmitter::Passive,
        analysis,
        distance_km: ctx.channel.distance_km,
        att_db,
        status: out.status,
        r: out.r_raw.max(0.0),
        r_raw: out.r_raw,
        y1_l: b.y1_l,
        y_x_l: b.y_x_l,
        gamma_x_u: b.gamma_x_u,
        ex_u: out.ex_u,
        eph_u: out.eph_u,
        overlap: b.overlap,
        y_coin: out.y_coin,
        f_prime: out.coin.value,
        f_zx: inputs.f_zx,
        q_key: inputs.q_key,
        e_key: inputs.e_key,
        p_omega: key.mass(),
        p1: inputs.p1,
        key_weight: b.key_weight,
        source: SourceSummary {
            omega: ctx.params.omega,
            mu_max: Some(ctx.params.mu_max),
            delta_theta_z: Some(ctx.params.geometry.delta_theta_z),
            intensities: None,
        },
        regions: ctx.summaries(),
        fidelities: rec,
        provenance: provenance(&prov_cfg, lp.pivots),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::passive::RegionGeometry;

    fn quick_cfg() -> ProtocolConfig {
        let mut cfg = ProtocolConfig {
            quadrature: QuadratureOptions { nodes: 6, convergence_check: false, ..Default::default() },
            ..Default::default()
        };
        cfg.passive.geometry = RegionGeometry { delta_theta_z: 0.1, ..Default::default() };
        cfg
    }

    #[test]
    fn baseline_rate_is_positive_at_fifty_km() {
        let cfg = quick_cfg();
        let r = keyrate_passive(&cfg, 50.0, 120.0).unwrap();
        assert!(r.r > 0.0, "{:?} r_raw={}", r.status, r.r_raw);
        assert!(r.y1_l > 0.0 && r.y1_l < 1.0);
        assert!(r.eph_u >= r.ex_u - 1e-12);
        assert!(r.f_prime > 0.0 && r.f_prime <= 1.0);
        assert_eq!(r.regions.len(), 12);
    }

    #[test]
    fn refined_and_baseline_share_observations() {
        let cfg = quick_cfg();
        let ctx = passive_context(&cfg, 50.0, 120.0).unwrap();
        let base = passive_report(&ctx, &cfg, Analysis::Baseline, 120.0).unwrap();
        let refined = passive_report(&ctx, &cfg, Analysis::Refined, 120.0).unwrap();
        assert_eq!(base.q_key, refined.q_key);
        assert!(refined.key_weight > 0.9 && refined.key_weight <= 1.0);
        assert!(refined.overlap >= base.overlap - 1e-12);
    }
}
