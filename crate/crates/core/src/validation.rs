//! Independent oracles and the end-to-end checks built on them.
//!
//! Each check compares a production code path against a computation that
//! shares as little code with it as possible: Monte-Carlo sampling of the
//! source phases, a trigonometric form of the coin envelopes, an exhaustive
//! decoy solver with its own linear algebra, and vertex enumeration for
//! random programs. [`run_all`] drives every check and is what the `validate`
//! command reports.

use crate::bounds::{fidelity_lower_bound, g_bound, g_pm, lcs_tangent_shifted, Side};
use crate::channel::ChannelParams;
use crate::error::Result;
use crate::keyrate::{
    estimation_programs, key_test_fidelity, keyrate_oil, optimize_with_starts, sweep, Analysis, KeyRateReport,
    ProtocolConfig, Transmitter,
};
use crate::linalg::{fidelity, hermitian_eigen, HermitianMatrix, C64};
use crate::lp::{
    build_yield_lp, solve_by_vertex_enumeration, DecoyCoinInputs, LinearProgram, Relation, Sense,
};
use crate::mode_basis::NPhotonBasis;
use crate::oil::{mode_amplitudes, oil_mixed_state, oil_p_n, oil_setting_state, setting_to_phases, OilParams};
use crate::par::{map_ordered, Execution};
use crate::passive::{
    invert_phases, mc_region_oracle, target_from_phases, wrap_pi, BranchSigns, PassiveParams, PassiveStateSet,
    QuadratureOptions, RegionGeometry, TargetPoint, PN_MAX,
};
use crate::report::to_csv;
use crate::types::{Basis, Bit, Intensity, RegionSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use libm::erfc;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::time::{Duration, Instant};

/// Sample counts, grids and seeds of a validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSettings {
    pub seed: u64,
    /// Monte-Carlo pulse trains per region.
    pub mc_samples: u64,
    pub random_programs: usize,
    pub roundtrip_samples: usize,
    pub quadrature_nodes: usize,
    /// Compare every quadrature against a run at twice the resolution.
    pub convergence_check: bool,
    /// Grid on which every estimation program is checked against the truth.
    pub feasibility_distances_km: Vec<f64>,
    pub feasibility_attenuations_db: Vec<f64>,
    pub trend_distance_km: f64,
    pub trend_attenuations_db: Vec<f64>,
    /// Grid of the refined-versus-baseline comparison.
    pub comparison_distances_km: Vec<f64>,
    pub comparison_attenuations_db: Vec<f64>,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        ValidationSettings::full()
    }
}

impl ValidationSettings {
    pub fn full() -> Self {
        ValidationSettings {
            seed: 20_240_601,
            mc_samples: 2_000_000,
            random_programs: 120,
            roundtrip_samples: 10_000,
            quadrature_nodes: 12,
            convergence_check: true,
            feasibility_distances_km: vec![0.0, 50.0, 100.0],
            feasibility_attenuations_db: vec![30.0, 70.0, 120.0],
            trend_distance_km: 50.0,
            trend_attenuations_db: vec![30.0, 50.0, 70.0, 90.0, 105.0, 120.0],
            comparison_distances_km: vec![25.0, 50.0, 75.0],
            comparison_attenuations_db: vec![90.0, 105.0, 120.0],
        }
    }

    /// Small samples and grids for a smoke run in well under a minute.
    pub fn quick() -> Self {
        ValidationSettings {
            mc_samples: 100_000,
            random_programs: 100,
            quadrature_nodes: 8,
            convergence_check: false,
            feasibility_distances_km: vec![50.0],
            feasibility_attenuations_db: vec![30.0, 120.0],
            trend_attenuations_db: vec![30.0, 90.0, 105.0, 120.0],
            comparison_distances_km: vec![50.0],
            comparison_attenuations_db: vec![120.0],
            ..ValidationSettings::full()
        }
    }

    fn quadrature(&self) -> QuadratureOptions {
        QuadratureOptions {
            nodes: self.quadrature_nodes,
            convergence_check: self.convergence_check,
            ..QuadratureOptions::default()
        }
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    /// Human-readable measurements behind the verdict.
    pub details: Vec<String>,
    pub seconds: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {} ({:.1} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.details.join("; ")
        )
    }
}

/// Accumulates sub-results of one check.
struct Check {
    passed: bool,
    details: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { passed: true, details: Vec::new() }
    }

    fn require(&mut self, ok: bool, detail: String) {
        self.passed &= ok;
        if ok {
            self.details.push(detail);
        } else {
            self.details.push(format!("FAILED {detail}"));
        }
    }

    fn note(&mut self, detail: String) {
        self.details.push(detail);
    }

    fn fail(&mut self, detail: String) {
        self.require(false, detail);
    }
}

/// Names of the checks, indexed from one.
pub const CHECK_NAMES: [&str; 10] = [
    "quadrature vs Monte Carlo",
    "normalization and state validity",
    "truncated fidelity bound",
    "coin functions and tangents",
    "estimation program soundness and tightness",
    "OIL key/test indistinguishability",
    "key-rate trends with attenuation",
    "refined vs baseline analysis",
    "phase/target roundtrip",
    "byte-identical reruns",
];

/// Runs check `id` (1-based).
pub fn run_check(id: usize, s: &ValidationSettings) -> CheckOutcome {
    let start = Instant::now();
    let mut c = Check::new();
    let result = match id {
        1 => quadrature_vs_monte_carlo(s, &mut c),
        2 => normalization(s, &mut c),
        3 => truncated_fidelity(s, &mut c),
        4 => coin_suite(&mut c),
        5 => program_soundness(s, &mut c),
        6 => oil_indistinguishability(&mut c),
        7 => trends(s, &mut c),
        8 => refined_vs_baseline(s, &mut c),
        9 => phase_roundtrip(s, &mut c),
        10 => reproducibility(&mut c),
        _ => Err(crate::Error::InvalidInput(format!("no check with id {id}"))),
    };
    if let Err(e) = result {
        c.fail(format!("error: {e}"));
    }
    CheckOutcome {
        id,
        name: CHECK_NAMES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown").to_string(),
        passed: c.passed,
        details: c.details,
        seconds: elapsed(start),
    }
}

/// Runs every check in order, calling `progress` after each.
pub fn run_all(s: &ValidationSettings, mut progress: impl FnMut(&CheckOutcome)) -> Vec<CheckOutcome> {
    (1..=CHECK_NAMES.len())
        .map(|id| {
            let o = run_check(id, s);
            progress(&o);
            o
        })
        .collect()
}

fn elapsed(start: Instant) -> f64 {
    Duration::as_secs_f64(&start.elapsed())
}

// ---------------------------------------------------------------------------
// Monte-Carlo comparison

/// Entrywise z-scores of `a` against a Monte-Carlo estimate with standard
/// errors `se_re`, `se_im` (row-major), over the upper triangle.
fn z_scores(a: &HermitianMatrix, b: &HermitianMatrix, se_re: &[f64], se_im: &[f64], floor: f64) -> Vec<f64> {
    let d = a.dim();
    let mut out = Vec::with_capacity(d * (d + 1));
    for i in 0..d {
        for j in i..d {
            let k = i * d + j;
            let diff = a.get(i, j) - b.get(i, j);
            out.push(diff.re.abs() / se_re[k].max(floor));
            if i != j {
                out.push(diff.im.abs() / se_im[k].max(floor));
            }
        }
    }
    out
}

#[derive(Default)]
struct ZTally {
    tests: usize,
    exceed: usize,
    max: f64,
}

impl ZTally {
    fn add(&mut self, z: &[f64]) {
        self.tests += z.len();
        self.exceed += z.iter().filter(|&&v| v > 3.0).count();
        self.max = z.iter().copied().fold(self.max, f64::max);
    }

    fn describe(&self, what: &str) -> String {
        // Two-sided tail of the standard normal beyond 3.
        let p3 = 2.699_796_063_260_2e-3;
        format!(
            "{what}: {} of {} entries beyond 3 SE (null expectation {:.1}), max z {:.2}",
            self.exceed,
            self.tests,
            p3 * self.tests as f64,
            self.max
        )
    }
}

/// Monte-Carlo estimate of the bit-averaged OIL state of one basis and
/// intensity: each sample draws a bit and a global phase, builds the coherent
/// amplitudes of every mode and expands their product in the Fock basis mode
/// by mode.
pub struct OilMcEstimate {
    pub rho: Vec<HermitianMatrix>,
    pub se_re: Vec<Vec<f64>>,
    pub se_im: Vec<Vec<f64>>,
}

fn fock_amplitude(amps: &[C64], occ: &[u32]) -> C64 {
    let mut z = C64::new(1.0, 0.0);
    for (a, &k) in amps.iter().zip(occ) {
        let fact: f64 = (1..=k).map(f64::from).product();
        z *= (-0.5 * a.norm_sqr()).exp() * a.powu(k) / fact.sqrt();
    }
    z
}

pub fn oil_mc_oracle(
    params: &OilParams,
    basis: Basis,
    intensity: Intensity,
    n_max: u32,
    samples: u64,
    seed: u64,
) -> Result<OilMcEstimate> {
    let settings: Vec<_> =
        Bit::ALL.iter().map(|&b| setting_to_phases(b, basis, intensity, &params.kappa)).collect::<Result<_>>()?;
    let bases: Vec<NPhotonBasis> = (0..=n_max).map(|n| params.basis(n)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shift: Vec<Vec<C64>> = Vec::new();
    let mut sum: Vec<Vec<C64>> = bases.iter().map(|b| vec![C64::new(0.0, 0.0); b.len() * b.len()]).collect();
    let mut sq: Vec<Vec<(f64, f64)>> = bases.iter().map(|b| vec![(0.0, 0.0); b.len() * b.len()]).collect();
    for _ in 0..samples {
        let s = settings[rng.gen_range(0..2)];
        let g = C64::from_polar(1.0, rng.gen::<f64>() * TAU);
        let amps: Vec<C64> = mode_amplitudes(s.phi12, s.phi23, params.mu_in, params.omega).iter().map(|a| a * g).collect();
        let first = shift.is_empty();
        for (n, b) in bases.iter().enumerate() {
            let v: Vec<C64> = b.configs().iter().map(|c| fock_amplitude(&amps, &c.occupations)).collect();
            let t: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            let d = b.len();
            let outer: Vec<C64> = (0..d * d).map(|k| v[k / d] * v[k % d].conj() / t).collect();
            if first {
                shift.push(outer.clone());
            }
            for (k, z) in outer.iter().enumerate() {
                let dz = z - shift[n][k];
                sum[n][k] += dz;
                sq[n][k].0 += dz.re * dz.re;
                sq[n][k].1 += dz.im * dz.im;
            }
        }
    }
    let m = samples as f64;
    let mut rho = Vec::new();
    let mut se_re = Vec::new();
    let mut se_im = Vec::new();
    for (n, b) in bases.iter().enumerate() {
        let dmean: Vec<C64> = sum[n].iter().map(|z| z / m).collect();
        let se = |s2: f64, mu: f64| ((s2 / m - mu * mu).max(0.0) / (m - 1.0)).sqrt();
        se_re.push(sq[n].iter().zip(&dmean).map(|(s, z)| se(s.0, z.re)).collect());
        se_im.push(sq[n].iter().zip(&dmean).map(|(s, z)| se(s.1, z.im)).collect());
        let mean: Vec<C64> = dmean.iter().zip(&shift[n]).map(|(d, z0)| z0 + d).collect();
        let mut h = HermitianMatrix::from_row_major(b.len(), mean)?;
        h.hermitize();
        rho.push(h);
    }
    Ok(OilMcEstimate { rho, se_re, se_im })
}

fn quadrature_vs_monte_carlo(s: &ValidationSettings, c: &mut Check) -> Result<()> {
    let params = PassiveParams::from_attenuation(0.5, 20.0, RegionGeometry::default(), 2);
    let states = PassiveStateSet::compute(&params, &s.quadrature())?;
    let mut entries = ZTally::default();
    let mut scalars = ZTally::default();
    for (k, basis) in Basis::ALL.into_iter().enumerate() {
        for (l, i) in Intensity::ALL.into_iter().enumerate() {
            let region = states.union(basis, i);
            let seed = s.seed.wrapping_add((k * 3 + l) as u64);
            let est = mc_region_oracle(&params, RegionSpec::union(basis, i), 2, s.mc_samples, seed)?;
            scalars.add(&[(region.mass() - est.mass).abs() / est.mass_se]);
            for n in 0..=2u32 {
                let nu = n as usize;
                scalars.add(&[(region.p_n(nu) - est.p_n[nu]).abs() / est.p_n_se[nu].max(1e-300)]);
                let q = region.rho(n)?;
                entries.add(&z_scores(&q, &est.rho[nu], &est.se_re[nu], &est.se_im[nu], 1e-15));
            }
        }
    }
    c.note(format!("passive: {} samples per (basis, intensity), n <= 2", s.mc_samples));
    c.require(entries.exceed == 0, entries.describe("passive matrix entries"));
    c.require(scalars.exceed == 0, scalars.describe("passive masses and p_n"));
    c.note(format!(
        "familywise view: max z {:.2} over {} entries vs Bonferroni-corrected threshold {:.2}",
        entries.max,
        entries.tests,
        bonferroni_threshold(entries.tests)
    ));

    let oil = OilParams::from_intensities(0.5, 0.1, 1e-4, 20.0, 2)?;
    let mut oil_z = ZTally::default();
    for (basis, intensities) in [(Basis::Z, vec![Intensity::I0]), (Basis::X, Intensity::ALL.to_vec())] {
        for i in intensities {
            let est = oil_mc_oracle(&oil, basis, i, 2, s.mc_samples, s.seed ^ 0x0111)?;
            for n in 0..=2u32 {
                let exact = oil_mixed_state(basis, i, &oil, n)?;
                oil_z.add(&z_scores(&exact, &est.rho[n as usize], &est.se_re[n as usize], &est.se_im[n as usize], 1e-12));
            }
        }
    }
    c.require(oil_z.exceed == 0, oil_z.describe("OIL matrix entries"));
    Ok(())
}

/// `z` with `P(|N(0,1)| > z) = 0.0027 / tests`, by bisection on `erfc`.
fn bonferroni_threshold(tests: usize) -> f64 {
    let target = 2.699_796_063_260_2e-3 / tests.max(1) as f64;
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erfc(mid / std::f64::consts::SQRT_2) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// State validity

fn check_state(rho: &HermitianMatrix, what: &str, worst: &mut (f64, f64, f64), c: &mut Check) -> Result<()> {
    let asym = rho.max_asymmetry();
    let min_eig = hermitian_eigen(rho)?.values.first().copied().unwrap_or(0.0);
    let trace_err = (rho.trace() - 1.0).abs();
    worst.0 = worst.0.max(asym);
    worst.1 = worst.1.min(min_eig);
    worst.2 = worst.2.max(trace_err);
    if asym > 1e-12 || min_eig < -1e-9 || trace_err > 1e-8 {
        c.fail(format!("{what}: asymmetry {asym:.2e}, min eigenvalue {min_eig:.2e}, trace error {trace_err:.2e}"));
    }
    Ok(())
}

fn normalization(s: &ValidationSettings, c: &mut Check) -> Result<()> {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut min_mass = 1.0f64;
    for (mu_max, omega) in [(0.5, 5e-3), (1.0, 1e-2), (0.3, 0.0)] {
        let params = PassiveParams::new(mu_max, omega, RegionGeometry::default(), 4);
        let states = PassiveStateSet::compute(&params, &s.quadrature())?;
        let mut regions = states.regions.clone();
        for basis in Basis::ALL {
            for i in Intensity::ALL {
                regions.push(states.union(basis, i));
            }
        }
        for r in &regions {
            let total: f64 = r.p_n_all().iter().take(PN_MAX + 1).sum();
            min_mass = min_mass.min(total);
            for n in 0..=params.n_cut {
                let raw = r.raw.blocks[n as usize].scaled(1.0 / r.raw.pn[n as usize]);
                let mut rho = raw.scaled(1.0 / raw.trace());
                let asym = rho.max_asymmetry();
                rho.hermitize();
                check_state(&rho, &format!("passive {} n={n} mu_max={mu_max}", r.spec), &mut worst, c)?;
                worst.0 = worst.0.max(asym);
                if asym > 1e-12 {
                    c.fail(format!("passive {} n={n}: raw block asymmetry {asym:.2e}", r.spec));
                }
                if n <= 2 && (raw.trace() - 1.0).abs() > 1e-8 {
                    c.fail(format!("passive {} n={n}: block trace {} differs from p_n", r.spec, raw.trace()));
                }
            }
        }
    }
    for omega in [0.0, 1e-4, 1e-2] {
        let mut params = OilParams::from_intensities(0.5, 0.1, 1e-4, 30.0, 4)?;
        params.omega = omega;
        for i in Intensity::ALL {
            let total: f64 = (0..=PN_MAX as u32).map(|n| oil_p_n(params.intensity(i), omega, n)).sum();
            min_mass = min_mass.min(total);
            for basis in Basis::ALL {
                for bit in Bit::ALL {
                    if basis == Basis::Z && i != Intensity::I0 {
                        continue;
                    }
                    for n in 0..=params.n_cut {
                        let rho = oil_setting_state(bit, basis, i, &params, n)?;
                        check_state(&rho, &format!("OIL {bit:?}{basis:?}{i} n={n} omega={omega}"), &mut worst, c)?;
                    }
                }
            }
        }
    }
    c.require(min_mass >= 1.0 - 1e-6, format!("smallest sum of p_n over n <= {PN_MAX}: 1 - {:.2e}", 1.0 - min_mass));
    c.note(format!(
        "max asymmetry {:.2e}, min eigenvalue {:.2e}, max trace error {:.2e}",
        worst.0, worst.1, worst.2
    ));
    Ok(())
}

// ---------------------------------------------------------------------------
// Truncated fidelity bound

fn truncated_fidelity(s: &ValidationSettings, c: &mut Check) -> Result<()> {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut gap_high = 0.0f64;
    let mut pairs = 0usize;
    let mut rows = Vec::new();
    for omega in [1e-4, 1e-3, 1e-2] {
        let mut gaps = [0.0f64; 2];
        let mut tally = |src: usize, n: u32, exact: f64, bound: f64| {
            worst_excess = worst_excess.max(bound - exact);
            if n <= 2 {
                gaps[src] = gaps[src].max(exact - bound);
            } else {
                gap_high = gap_high.max(exact - bound);
            }
            pairs += 1;
        };
        let mut params = PassiveParams::new(0.5, omega, RegionGeometry::default(), 4);
        params.n_l_cut = (0..=params.n_cut).collect();
        let states = PassiveStateSet::compute(&params, &s.quadrature())?;
        for basis in Basis::ALL {
            let unions: Vec<_> = Intensity::ALL.iter().map(|&i| states.union(basis, i)).collect();
            for n in 1..=params.n_cut {
                let full = params.full_basis(n);
                let rho: Vec<HermitianMatrix> = unions.iter().map(|u| u.rho(n)).collect::<Result<_>>()?;
                for i in 0..3 {
                    for j in i + 1..3 {
                        tally(0, n, fidelity(&rho[i], &rho[j])?, fidelity_lower_bound(&rho[i], &rho[j], &full, 1)?);
                    }
                }
            }
        }
        let mut oil = OilParams::from_intensities(0.5, 0.1, 1e-4, 30.0, 4)?;
        oil.omega = omega;
        for bit in Bit::ALL {
            for n in 1..=oil.n_cut {
                let rho: Vec<HermitianMatrix> =
                    Intensity::ALL.iter().map(|&i| oil_setting_state(bit, Basis::X, i, &oil, n)).collect::<Result<_>>()?;
                for i in 0..3 {
                    for j in i + 1..3 {
                        tally(1, n, fidelity(&rho[i], &rho[j])?, fidelity_lower_bound(&rho[i], &rho[j], &oil.basis(n), 1)?);
                    }
                }
            }
        }
        rows.push((omega, gaps));
    }
    c.require(worst_excess <= 1e-8, format!("{pairs} state pairs with n <= 4, largest bound - exact {worst_excess:.2e}"));
    for (omega, [passive, oil]) in rows {
        c.require(
            passive <= 0.05 && oil <= 0.05,
            format!("omega = {omega:e}, n <= 2, one leak photon kept: largest gap passive {passive:.3e}, OIL {oil:.3e}"),
        );
    }
    c.note(format!("largest gap at n = 3, 4: {gap_high:.3e}"));
    Ok(())
}

// ---------------------------------------------------------------------------
// Coin functions

/// Extremes of `y'` subject to the angle constraint `|θ − θ'| ≤ arccos √z`
/// with `y = cos²θ`: the trigonometric form of the coin envelopes.
fn envelope_by_angles(y: f64, z: f64, side: Side) -> f64 {
    let theta = y.clamp(0.0, 1.0).sqrt().acos();
    let delta = z.clamp(0.0, 1.0).sqrt().acos();
    let t = match side {
        Side::U => (theta - delta).max(0.0),
        Side::L => (theta + delta).min(PI / 2.0),
    };
    t.cos().powi(2)
}

fn coin_suite(c: &mut Check) -> Result<()> {
    let grid: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
    let mut identity = 0.0f64;
    for &y in &grid {
        identity = identity.max((g_pm(y, 1.0, Side::U)? - y).abs()).max((g_pm(y, 1.0, Side::L)? - y).abs());
    }
    c.require(identity <= 1e-12, format!("g+-(y, 1) = y, max deviation {identity:.1e}"));

    let mut branch = 0.0f64;
    let mut branch_cut = 0.0f64;
    for &z in &grid {
        for &y in &grid {
            for side in [Side::L, Side::U] {
                let g = g_bound(y, z, side)?;
                branch = branch.max((g - envelope_by_angles(y, z, side)).abs());
                let flat = match side {
                    Side::L => y <= 1.0 - z,
                    Side::U => y >= z,
                };
                if flat {
                    branch_cut = branch_cut.max((g - if side == Side::L { 0.0 } else { 1.0 }).abs());
                }
            }
        }
    }
    c.require(branch <= 1e-9, format!("G^L and G^U vs angle form on 201x201 grid, max deviation {branch:.1e}"));
    c.require(branch_cut == 0.0, "flat branches are exactly 0 and 1".to_string());

    let mut dominance = f64::NEG_INFINITY;
    let zs = [0.0, 0.1, 0.5, 0.9, 0.99, 0.999_999, 1.0];
    for &z in &zs {
        for k in 0..=50 {
            let y_ref = k as f64 / 50.0;
            for side in [Side::L, Side::U] {
                dominance = dominance.max(lcs_tangent_shifted(z, y_ref, side)?.max_violation(1000));
            }
        }
    }
    c.require(dominance <= 1e-12, format!("tangents never cross their envelope on a 1000-point grid ({dominance:.1e})"));

    let v = g_bound(0.2, 0.9, Side::U)?;
    c.require((v - 0.5).abs() <= 1e-12, format!("G^U_0.9(0.2) = {v:.15}"));
    Ok(())
}

// ---------------------------------------------------------------------------
// Estimation programs

/// Exhaustive solver of the decoy problem with one shared yield per photon
/// number: minimizes `Y_1` over `0 ≤ Y_n ≤ 1` subject to
/// `Q_I − (1 − Σ p_n) ≤ Σ_n p_{n,I} Y_n ≤ Q_I` for each intensity. Uses its own
/// elimination and enumerates every vertex.
pub fn textbook_decoy_y1(p_n: &[Vec<f64>; 3], q: [f64; 3]) -> Option<f64> {
    let n = p_n[0].len();
    let mut planes: Vec<(Vec<f64>, f64, i8)> = Vec::new();
    for i in 0..3 {
        let mass: f64 = p_n[i].iter().sum();
        planes.push((p_n[i].clone(), q[i], 1));
        planes.push((p_n[i].clone(), q[i] - 1.0 + mass, -1));
    }
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        planes.push((e.clone(), 1.0, 1));
        planes.push((e, 0.0, -1));
    }
    let feasible = |x: &[f64]| {
        planes.iter().all(|(a, b, dir)| {
            let l: f64 = a.iter().zip(x).map(|(u, v)| u * v).sum();
            if *dir > 0 {
                l <= b + 1e-11
            } else {
                l >= b - 1e-11
            }
        })
    };
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&k| planes[k].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&k| planes[k].1).collect();
        if let Some(x) = gauss(a, b) {
            if feasible(&x) && best.is_none_or(|v| x[1] < v) {
                best = Some(x[1]);
            }
        }
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < planes.len() - n + k {
                idx[k] += 1;
                for m in k + 1..n {
                    idx[m] = idx[m - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Row-scaled Gaussian elimination; `None` for a singular system.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for r in 0..n {
        let s = a[r].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s == 0.0 {
            return None;
        }
        a[r].iter_mut().for_each(|v| *v /= s);
        b[r] /= s;
    }
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-13 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let t: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - t) / a[k][k];
    }
    Some(x)
}

fn poisson(mu: f64, len: usize) -> Vec<f64> {
    let mut p = vec![(-mu).exp()];
    for n in 1..len {
        let last = p[n - 1];
        p.push(last * mu / n as f64);
    }
    p
}

/// A random program with a known feasible point and at most about 10^6
/// candidate vertices.
pub fn random_program(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(2..=10usize);
    let binom = |m: u64, k: u64| (0..k).fold(1u64, |acc, i| acc * (m - i) / (i + 1));
    let mut max_cons = 0;
    while max_cons < 12 && binom((max_cons + 1 + 2 * n) as u64, n as u64) <= 1_000_000 {
        max_cons += 1;
    }
    let m = rng.gen_range(1..=max_cons.max(1));
    let sense = if rng.gen_bool(0.5) { Sense::Min } else { Sense::Max };
    let mut lp = LinearProgram::new("random", sense);
    let mut x0 = Vec::with_capacity(n);
    for j in 0..n {
        let lo = -rng.gen::<f64>();
        let hi = rng.gen::<f64>() + 0.1;
        lp.add_var(format!("x{j}"), lo, hi);
        x0.push(lo + (hi - lo) * rng.gen::<f64>());
    }
    for k in 0..m {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                terms.push((j, rng.gen_range(-1.0..1.0)));
            }
        }
        let lhs: f64 = terms.iter().map(|&(j, a)| a * x0[j]).sum();
        let slack = if rng.gen_bool(0.2) { 0.0 } else { 0.5 * rng.gen::<f64>() };
        let (rel, rhs) = match rng.gen_range(0..10) {
            0 => (Relation::Eq, lhs),
            1..=5 => (Relation::Le, lhs + slack),
            _ => (Relation::Ge, lhs - slack),
        };
        lp.add_constraint(format!("c{k}"), terms, rel, rhs);
    }
    lp.set_objective((0..n).map(|j| (j, rng.gen_range(-1.0..1.0))).collect());
    lp
}

fn program_soundness(s: &ValidationSettings, c: &mut Check) -> Result<()> {
    let mut points = Vec::new();
    for t in [Transmitter::Passive, Transmitter::Oil] {
        for &d in &s.feasibility_distances_km {
            for &a in &s.feasibility_attenuations_db {
                points.push((t, d, a));
            }
        }
    }
    let results = map_ordered(Execution::Parallel, &points, |&(t, d, att)| -> Result<Vec<(String, f64)>> {
        let mut cfg = ProtocolConfig { transmitter: t, ..Default::default() };
        cfg.passive.n_l_cut = Some((0..=cfg.passive.n_cut).collect());
        cfg.quadrature = s.quadrature();
        let programs = estimation_programs(&cfg, d, att)?;
        Ok(programs
            .iter()
            .map(|lp| {
                let v = lp.reference_point().map(|x| lp.max_violation(&x)).unwrap_or(f64::INFINITY);
                (lp.name.clone(), v)
            })
            .collect())
    });
    let mut kinds = std::collections::BTreeMap::<String, (usize, f64)>::new();
    for r in results {
        for (name, v) in r? {
            let kind = name.split_whitespace().take_while(|w| w.chars().all(|ch| ch.is_ascii_lowercase())).collect::<Vec<_>>().join(" ");
            let e = kinds.entry(kind).or_insert((0, 0.0));
            e.0 += 1;
            e.1 = e.1.max(v);
        }
    }
    let worst = kinds.values().map(|v| v.1).fold(0.0, f64::max);
    let summary: Vec<String> = kinds.iter().map(|(k, (n, v))| format!("{k} x{n} ({v:.1e})")).collect();
    c.require(
        kinds.len() == 4 && worst <= 1e-9,
        format!("channel truth feasible at {} points: {}", points.len(), summary.join(", ")),
    );

    let mut worst_decoy = 0.0f64;
    let mut cases = 0;
    for mus in [[0.5, 0.1, 1e-4], [0.8, 0.2, 0.01], [0.3, 0.05, 0.0]] {
        for d in [0.0, 25.0, 50.0, 100.0, 150.0] {
            let ch = ChannelParams::at_distance(d);
            let (eta, pd) = (ch.transmittance(), ch.p_dark);
            let p_n = mus.map(|m| poisson(m, 5));
            let q = mus.map(|m| crate::channel::point_observation(eta * m, 0.0, pd).gain);
            let yn: Vec<f64> = (0..5).map(|n| crate::channel::reference_yield(n, eta, pd)).collect();
            let inputs = DecoyCoinInputs {
                label: "Z".into(),
                observed: q,
                p_n: p_n.clone(),
                fidelity: vec![[[1.0; 3]; 3]; 5],
                reference: [yn.clone(), yn.clone(), yn],
            };
            let lp = build_yield_lp(&inputs)?.solve()?.optimum("decoy")?;
            match textbook_decoy_y1(&p_n, q) {
                Some(o) => worst_decoy = worst_decoy.max((lp - o).abs()),
                None => c.fail(format!("textbook decoy problem infeasible at {d} km")),
            }
            cases += 1;
        }
    }
    c.require(worst_decoy <= 1e-6, format!("unit-fidelity yield program vs shared-yield decoy solver, {cases} cases, max diff {worst_decoy:.1e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x1f);
    let mut worst_lp = 0.0f64;
    let mut vars10 = 0;
    for _ in 0..s.random_programs {
        let lp = random_program(&mut rng);
        vars10 += usize::from(lp.vars.len() == 10);
        let a = lp.solve()?;
        let b = solve_by_vertex_enumeration(&lp)?;
        if a.status != b.status {
            c.fail(format!("status {} vs {} on a random program", a.status, b.status));
            continue;
        }
        worst_lp = worst_lp.max((a.objective - b.objective).abs());
    }
    c.require(
        worst_lp <= 1e-7,
        format!("{} random programs ({vars10} with 10 variables) vs vertex enumeration, max diff {worst_lp:.1e}", s.random_programs),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// OIL key/test states

fn oil_indistinguishability(c: &mut Check) -> Result<()> {
    let mut worst = 0.0f64;
    let mut two_photon = 0.0f64;
    for omega in [0.0, 1e-4, 1e-2] {
        let mut params = OilParams::from_intensities(0.5, 0.1, 1e-4, 30.0, 4)?;
        params.omega = omega;
        let diff = |n| -> Result<f64> {
            let z = oil_mixed_state(Basis::Z, Intensity::I0, &params, n)?;
            let x = oil_mixed_state(Basis::X, Intensity::I0, &params, n)?;
            Ok(z.max_abs_diff(&x))
        };
        worst = worst.max(diff(1)?);
        two_photon = two_photon.max(diff(2)?);
        let (f, exact) = key_test_fidelity(&params)?;
        c.require(exact && f == 1.0, format!("omega = {omega:e}: key/test fidelity {f} taken as exactly one"));
    }
    c.require(worst <= 1e-10, format!("single-photon max |rho_Z,I0 - rho_X,I0| = {worst:.1e}"));
    c.note(format!("two-photon states stay distinguishable ({two_photon:.2e})"));
    let cfg = ProtocolConfig { transmitter: Transmitter::Oil, ..Default::default() };
    let r = keyrate_oil(&cfg, 50.0, 120.0)?;
    c.require(
        r.f_zx == Some(1.0) && r.y1_l == r.y_x_l,
        format!("key-rate pipeline uses the unit-fidelity branch (Y1L = {:.6e})", r.y1_l),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Key-rate behaviour

fn rate_at(reps: &[KeyRateReport], att: f64) -> Option<f64> {
    reps.iter().find(|r| r.att_db == att).map(|r| r.r)
}

fn trends(s: &ValidationSettings, c: &mut Check) -> Result<()> {
    let start = Instant::now();
    for t in [Transmitter::Passive, Transmitter::Oil] {
        let cfg = ProtocolConfig {
            transmitter: t,
            optimize: true,
            distances_km: vec![s.trend_distance_km],
            attenuations_db: s.trend_attenuations_db.clone(),
            quadrature: s.quadrature(),
            ..Default::default()
        };
        let reps = sweep(&cfg)?;
        let listing: Vec<String> = reps.iter().map(|r| format!("{}:{:.6e}", r.att_db, r.r)).collect();
        c.note(format!("{t} at {} km: {}", s.trend_distance_km, listing.join(" ")));
        let monotone = reps.windows(2).all(|w| w[1].r >= w[0].r);
        c.require(monotone, format!("{t}: R nondecreasing in attenuation"));
        if let (Some(r30), Some(r120)) = (rate_at(&reps, 30.0), rate_at(&reps, 120.0)) {
            c.require(r30 < r120, format!("{t}: R(30) = {r30:.3e} < R(120) = {r120:.3e}"));
        }
        if t == Transmitter::Passive {
            if let (Some(r90), Some(r105), Some(r120)) = (rate_at(&reps, 90.0), rate_at(&reps, 105.0), rate_at(&reps, 120.0)) {
                c.require(r90 >= 0.5 * r120, format!("passive: R(90) / R(120) = {:.4}", r90 / r120));
                c.require(r120 - r105 <= 0.05 * r120, format!("passive: (R(120) - R(105)) / R(120) = {:.2e}", (r120 - r105) / r120));
            }
        }
    }
    let cfg = ProtocolConfig { transmitter: Transmitter::Oil, ..Default::default() };
    let o = optimize_with_starts(&cfg, 100.0, 120.0, &[])?;
    c.require(o.report.r > 0.0, format!("OIL at 100 km, 120 dB: R = {:.4e}", o.report.r));
    let secs = elapsed(start);
    c.require(secs <= 1800.0, format!("sweeps took {secs:.0} s"));
    Ok(())
}

fn refined_vs_baseline(s: &ValidationSettings, c: &mut Check) -> Result<()> {
    let base = ProtocolConfig { transmitter: Transmitter::Passive, quadrature: s.quadrature(), ..Default::default() };
    let refined = ProtocolConfig { analysis: Analysis::Refined, ..base.clone() };
    let atts: Vec<f64> = s.comparison_attenuations_db.iter().copied().filter(|&a| a >= 90.0).collect();
    let rows = map_ordered(Execution::Parallel, &s.comparison_distances_km, |&d| -> Result<Vec<(f64, f64, f64, f64)>> {
        let mut out = Vec::new();
        let (mut pb, mut pr): (Vec<Vec<f64>>, Vec<Vec<f64>>) = (Vec::new(), Vec::new());
        for &att in &atts {
            let ob = optimize_with_starts(&base, d, att, &pb)?;
            let mut starts = vec![ob.point.clone()];
            starts.extend(pr.iter().cloned());
            let or = optimize_with_starts(&refined, d, att, &starts)?;
            out.push((d, att, ob.report.r, or.report.r));
            pb = vec![ob.point];
            pr = vec![or.point];
        }
        Ok(out)
    });
    let mut all = Vec::new();
    for r in rows {
        all.extend(r?);
    }
    let mut strictly = 0;
    for &(d, att, rb, rr) in &all {
        let ok = rr >= rb - 1e-9;
        strictly += usize::from(rr > rb);
        c.require(ok, format!("{d} km {att} dB: refined {rr:.6e} vs baseline {rb:.6e}"));
    }
    c.require(strictly > 0, format!("refined strictly better at {strictly} of {} points", all.len()));
    Ok(())
}

// ---------------------------------------------------------------------------
// Phase inversion

fn phase_roundtrip(s: &ValidationSettings, c: &mut Check) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x9);
    let mut worst_phase = 0.0f64;
    let mut worst_target = 0.0f64;
    let mut seen = [0usize; 4];
    for _ in 0..s.roundtrip_samples {
        let mu_max = rng.gen_range(0.05..2.0);
        let ph: [f64; 4] = std::array::from_fn(|_| rng.gen::<f64>() * TAU);
        let p = target_from_phases(ph, mu_max);
        let sign = |x: f64| if wrap_pi(x) >= 0.0 { 1i8 } else { -1 };
        let signs = BranchSigns { s_e: sign(ph[0] - ph[1]), s_l: sign(ph[2] - ph[3]) };
        seen[BranchSigns::ALL.iter().position(|b| *b == signs).expect("one of four branches")] += 1;
        let back = invert_phases(&p, p.phi_e, signs, mu_max)?;
        for k in 0..4 {
            worst_phase = worst_phase.max(wrap_pi(back[k] - ph[k]).abs());
        }
        for b in BranchSigns::ALL {
            let q = target_from_phases(invert_phases(&p, p.phi_e, b, mu_max)?, mu_max);
            let d = (q.theta - p.theta).abs().max(wrap_pi(q.phi - p.phi).abs()).max((q.mu - p.mu).abs());
            worst_target = worst_target.max(d);
        }
        let t = TargetPoint::new(p.theta, p.phi, p.mu, p.phi_e);
        worst_target = worst_target.max((t.mu_e - p.mu_e).abs()).max((t.mu_l - p.mu_l).abs());
    }
    c.require(worst_phase <= 1e-9, format!("phases -> target -> phases over {} samples, max error {worst_phase:.1e}", s.roundtrip_samples));
    c.require(worst_target <= 1e-9, format!("target -> phases -> target on all four branches, max error {worst_target:.1e}"));
    c.require(seen.iter().all(|&k| k > 0), format!("branch counts {seen:?}"));
    Ok(())
}

// ---------------------------------------------------------------------------
// Reproducibility

/// Configuration of the reproducibility check: a short passive grid and an
/// optimized OIL grid.
pub const REPRO_CONFIGS: [&str; 2] = [
    r#"{"transmitter": "passive", "distances_km": [25, 50], "attenuations_db": [30, 120],
        "quadrature": {"nodes": 8}, "seed": 7}"#,
    r#"{"transmitter": "oil", "optimize": true, "distances_km": [50, 100], "attenuations_db": [30, 120], "seed": 7}"#,
];

fn reproducibility(c: &mut Check) -> Result<()> {
    for text in REPRO_CONFIGS {
        let cfg = ProtocolConfig::from_json(text)?;
        let a = to_csv(&sweep(&cfg)?)?;
        let b = to_csv(&sweep(&ProtocolConfig::from_json(text)?)?)?;
        let mut seq = cfg.clone();
        seq.quadrature.execution = Execution::Sequential;
        let d = to_csv(&sweep(&seq)?)?;
        c.require(
            a == b && a == d,
            format!("{}: {} bytes identical across reruns and execution policies", cfg.transmitter, a.len()),
        );
    }
    Ok(())
}
