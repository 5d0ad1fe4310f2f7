//! Key rate of the OIL transmitter. Only the test basis carries decoy
//! intensities; the key-basis single-photon yield follows from the test-basis
//! bound through the key/test fidelity.

use super::family::{decoy_inputs, fidelity_table, LpTracker};
use super::{
    assemble_rate, provenance, FidelityRecord, KeyRateReport, ProtocolConfig, RateInputs, RegionSummary,
    SourceSummary, Transmitter,
};
use crate::bounds::{bb84_gauge_references, purification_overlap, yield_transfer, OVERLAP_ORDER};
use crate::channel::{oil_measurement, oil_observables, reference_error, reference_yield_of_state, OilObservables};
use crate::error::Result;
use crate::linalg::{fidelity, HermitianMatrix, C64};
use crate::lp::{build_bit_error_lp, build_yield_lp, LinearProgram};
use crate::mode_basis::ModeConfiguration;
use crate::oil::{oil_mixed_state, oil_p_n, oil_setting_state, OilParams, MODE_COUNT};
use crate::types::{Basis, Bit, Intensity};
use std::f64::consts::FRAC_1_SQRT_2;

/// States closer than this in max-norm are treated as identical.
pub const INDISTINGUISHABLE_TOL: f64 = 1e-10;

/// Fidelity between the key- and test-basis single-photon states at `I0`,
/// returning exactly one when the two states coincide.
pub fn key_test_fidelity(params: &OilParams) -> Result<(f64, bool)> {
    let z = oil_mixed_state(Basis::Z, Intensity::I0, params, 1)?;
    let x = oil_mixed_state(Basis::X, Intensity::I0, params, 1)?;
    if z.max_abs_diff(&x) <= INDISTINGUISHABLE_TOL {
        return Ok((1.0, true));
    }
    Ok((fidelity(&z, &x)?.min(1.0), false))
}

fn p_n_table(params: &OilParams) -> [Vec<f64>; 3] {
    Intensity::ALL.map(|i| (0..=params.n_cut).map(|n| oil_p_n(params.intensity(i), params.omega, n)).collect())
}

fn states<F>(params: &OilParams, f: F) -> Result<[Vec<HermitianMatrix>; 3]>
where
    F: Fn(Intensity, u32) -> Result<HermitianMatrix>,
{
    let mut out: [Vec<HermitianMatrix>; 3] = Default::default();
    for (k, i) in Intensity::ALL.into_iter().enumerate() {
        out[k] = (0..=params.n_cut).map(|n| f(i, n)).collect::<Result<_>>()?;
    }
    Ok(out)
}

fn summaries(params: &OilParams, obs: &OilObservables) -> Vec<RegionSummary> {
    let mut out = Vec::new();
    for basis in Basis::ALL {
        for i in Intensity::ALL {
            if let Some(o) = obs.basis(basis, i) {
                out.push(RegionSummary {
                    label: format!("{basis:?}{i}"),
                    p_omega: if basis == Basis::Z { 1.0 } else { 0.0 },
                    gain: o.gain,
                    error_gain: o.error_gain,
                    p_n: (0..=crate::passive::PN_MAX as u32).map(|n| oil_p_n(params.intensity(i), params.omega, n)).collect(),
                });
            }
        }
    }
    out
}

/// Key rate of the OIL source with intensities from `cfg.oil`.
pub fn keyrate_oil(cfg: &ProtocolConfig, distance_km: f64, att_db: f64) -> Result<KeyRateReport> {
    oil_report(cfg, distance_km, att_db, &mut LpTracker::default())
}

/// The estimation programs of the OIL analysis, in solution order.
pub fn oil_programs(cfg: &ProtocolConfig, distance_km: f64, att_db: f64) -> Result<Vec<LinearProgram>> {
    let mut lp = LpTracker::recording();
    oil_report(cfg, distance_km, att_db, &mut lp)?;
    Ok(lp.recorded.unwrap_or_default())
}

fn oil_report(cfg: &ProtocolConfig, distance_km: f64, att_db: f64, lp: &mut LpTracker) -> Result<KeyRateReport> {
    let params = cfg.oil.params(att_db)?;
    let channel = cfg.channel_at(distance_km);
    let obs = oil_observables(&params, &channel)?;
    let eta = channel.transmittance();
    let pd = channel.p_dark;
    let bases: Vec<_> = (0..=params.n_cut).map(|n| params.basis(n)).collect();
    let mut rec: Vec<FidelityRecord> = Vec::new();

    let mixed = states(&params, |i, n| oil_mixed_state(Basis::X, i, &params, n))?;
    let fid = fidelity_table("X", &mixed, &mut rec)?;
    let mut reference: [Vec<f64>; 3] = Default::default();
    for k in 0..3 {
        reference[k] = (0..=params.n_cut as usize)
            .map(|n| reference_yield_of_state(&mixed[k][n], &bases[n], eta, pd))
            .collect::<Result<_>>()?;
    }
    let observed = Intensity::ALL.map(|i| obs.basis(Basis::X, i).expect("test basis has all intensities").gain);
    let y_x_l = lp.optimum(&build_yield_lp(&decoy_inputs("X", observed, p_n_table(&params), fid, reference))?)?;

    let (f_zx, _) = key_test_fidelity(&params)?;
    let (y1_l, _) = yield_transfer(y_x_l, f_zx)?;

    let mut gamma = 0.0;
    for bit in Bit::ALL {
        let per_bit = states(&params, |i, n| oil_setting_state(bit, Basis::X, i, &params, n))?;
        let label = format!("{}X>{}", bit.index(), bit.flip().index());
        let fid = fidelity_table(&format!("{}X", bit.index()), &per_bit, &mut rec)?;
        let mut reference: [Vec<f64>; 3] = Default::default();
        for k in 0..3 {
            reference[k] = (0..=params.n_cut as usize)
                .map(|n| reference_error(&per_bit[k][n], &bases[n], oil_measurement(Basis::X), bit, eta, pd))
                .collect::<Result<_>>()?;
        }
        let observed = Intensity::ALL.map(|i| obs.get(bit, Basis::X, i).expect("test basis has all intensities").error_gain);
        let inputs = decoy_inputs(&label, observed, p_n_table(&params), fid, reference);
        gamma += 0.5 * lp.optimum(&build_bit_error_lp(&inputs)?)?;
    }

    let b1 = &bases[1];
    let unit = |mode: usize| -> Result<usize> {
        let mut occ = vec![0; MODE_COUNT];
        occ[mode] = 1;
        b1.basis_index(&ModeConfiguration::new(occ))
    };
    let (ie, il) = (unit(0)?, unit(1)?);
    let mut u0 = vec![C64::new(0.0, 0.0); b1.len()];
    let mut u1 = u0.clone();
    u0[ie] = C64::new(FRAC_1_SQRT_2, 0.0);
    u0[il] = C64::new(0.0, FRAC_1_SQRT_2);
    u1[ie] = C64::new(FRAC_1_SQRT_2, 0.0);
    u1[il] = C64::new(0.0, -FRAC_1_SQRT_2);
    let refs = bb84_gauge_references(&u0, &u1);
    let s: Vec<HermitianMatrix> = OVERLAP_ORDER
        .iter()
        .map(|&(bit, basis)| oil_setting_state(bit, basis, Intensity::I0, &params, 1))
        .collect::<Result<_>>()?;
    let overlap = purification_overlap([&s[0], &s[1], &s[2], &s[3]], &refs, &cfg.purification)?;

    let key_obs = obs.basis(Basis::Z, Intensity::I0).expect("key basis at I0");
    let inputs = RateInputs {
        prefactor: cfg.p_zazb,
        p1: oil_p_n(params.mu_in, params.omega, 1),
        key_weight: 1.0,
        y1_l,
        y_x_l,
        gamma_x_u: gamma,
        overlap,
        f_zx: Some(f_zx),
        q_key: key_obs.gain,
        e_key: key_obs.error_rate(),
        f_ec: channel.f_ec,
    };
    let out = assemble_rate(&inputs)?;
    Ok(KeyRateReport {
        transmitter: Transmitter::Oil,
        analysis: cfg.analysis,
        distance_km,
        att_db,
        status: out.status,
        r: out.r_raw.max(0.0),
        r_raw: out.r_raw,
        y1_l,
        y_x_l,
        gamma_x_u: gamma,
        ex_u: out.ex_u,
        eph_u: out.eph_u,
        overlap,
        y_coin: out.y_coin,
        f_prime: out.coin.value,
        f_zx: Some(f_zx),
        q_key: inputs.q_key,
        e_key: inputs.e_key,
        p_omega: 1.0,
        p1: inputs.p1,
        key_weight: 1.0,
        source: SourceSummary {
            omega: params.omega,
            mu_max: None,
            delta_theta_z: None,
            intensities: Some(Intensity::ALL.map(|i| params.intensity(i))),
        },
        regions: summaries(&params, &obs),
        fidelities: rec,
        provenance: provenance(cfg, lp.pivots),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::RateStatus;

    #[test]
    fn key_and_test_states_coincide() {
        for att in [20.0, 40.0, 1000.0] {
            let p = OilParams::from_intensities(0.5, 0.1, 1e-4, att, 4).unwrap();
            let (f, exact) = key_test_fidelity(&p).unwrap();
            assert!(exact);
            assert_eq!(f, 1.0);
        }
    }

    #[test]
    fn rate_is_positive_beyond_a_hundred_km() {
        let cfg = ProtocolConfig { transmitter: Transmitter::Oil, ..Default::default() };
        let r = keyrate_oil(&cfg, 100.0, 120.0).unwrap();
        assert_eq!(r.status, RateStatus::Ok, "r_raw = {}", r.r_raw);
        assert_eq!(r.f_zx, Some(1.0));
        assert_eq!(r.y1_l, r.y_x_l);
        assert!((r.overlap - 1.0).abs() < 1e-9);
    }
}
