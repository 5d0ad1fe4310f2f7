//! Estimation programs: decoy constraints on each intensity plus linearized
//! coin constraints tying the photon-number yields of different intensities
//! (and, in the refined programs, of the dominant eigenvectors).

use super::{LinearProgram, Relation, Sense};
use crate::bounds::{lcs_tangent_shifted, Side};
use crate::error::{Error, Result};
use crate::linalg::{fix_gauge, hermitian_eigen, HermitianMatrix, C64};
use crate::types::Intensity;
use serde::{Deserialize, Serialize};

/// Observations and state data of one decoy family (one basis, or one bit
/// and outcome of the test basis) across the three intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyCoinInputs {
    /// Prefix for variable names, e.g. `Z` or `0X`.
    pub label: String,
    /// Observed gain (or error gain) per intensity.
    pub observed: [f64; 3],
    /// `p_{n|Ω}` per intensity for `n = 0..=n_cut`.
    pub p_n: [Vec<f64>; 3],
    /// Fidelity lower bounds per `n`, indexed `[n][I][J]`.
    pub fidelity: Vec<[[f64; 3]; 3]>,
    /// Linearization points per intensity and `n`.
    pub reference: [Vec<f64>; 3],
}

impl DecoyCoinInputs {
    pub fn n_cut(&self) -> usize {
        self.fidelity.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.fidelity.len();
        if len < 2 {
            return Err(Error::InvalidInput(format!("{}: n_cut must be at least 1", self.label)));
        }
        let in_unit = |v: f64| v.is_finite() && (-1e-12..=1.0 + 1e-12).contains(&v);
        for i in 0..3 {
            if self.p_n[i].len() != len || self.reference[i].len() != len {
                return Err(Error::DimensionMismatch(self.p_n[i].len().min(self.reference[i].len()), len));
            }
            if !in_unit(self.observed[i]) {
                return Err(Error::Domain(format!("{}: observation {} outside [0, 1]", self.label, self.observed[i])));
            }
            if let Some(p) = self.p_n[i].iter().chain(&self.reference[i]).find(|&&p| !in_unit(p)) {
                return Err(Error::Domain(format!("{}: probability {p} outside [0, 1]", self.label)));
            }
        }
        if let Some(f) = self.fidelity.iter().flatten().flatten().find(|&&f| !in_unit(f)) {
            return Err(Error::Domain(format!("{}: fidelity {f} outside [0, 1]", self.label)));
        }
        Ok(())
    }
}

fn var_name(label: &str, i: usize, tag: &str) -> String {
    format!("{label}[{}]{tag}", Intensity::ALL[i])
}

/// Adds the yield variables, decoy rows and cross-intensity coin rows of one
/// family. Returns the variable indices `[I][n]`.
fn add_family(lp: &mut LinearProgram, f: &DecoyCoinInputs) -> Result<[Vec<usize>; 3]> {
    f.validate()?;
    let len = f.fidelity.len();
    let vars: [Vec<usize>; 3] = std::array::from_fn(|i| {
        (0..len).map(|n| lp.add_unit_var_at(var_name(&f.label, i, &format!("n{n}")), f.reference[i][n])).collect()
    });
    for i in 0..3 {
        let terms: Vec<(usize, f64)> = (0..len).map(|n| (vars[i][n], f.p_n[i][n])).collect();
        let q = f.observed[i].clamp(0.0, 1.0);
        lp.add_constraint(var_name(&f.label, i, ":decoy-lo"), terms.clone(), Relation::Le, q);
        let mass: f64 = f.p_n[i].iter().sum();
        lp.add_constraint(var_name(&f.label, i, ":decoy-hi"), terms, Relation::Ge, q - 1.0 + mass);
    }
    for n in 0..len {
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let label = format!("{}:coin n{n} {}->{}", f.label, Intensity::ALL[i], Intensity::ALL[j]);
                    add_coin(lp, vars[i][n], vars[j][n], f.fidelity[n][i][j], f.reference[i][n], &label)?;
                }
            }
        }
    }
    Ok(vars)
}

/// `LCS^L_F(y_from) ≤ y_to ≤ LCS^U_F(y_from)` linearized at `y_ref`.
fn add_coin(lp: &mut LinearProgram, from: usize, to: usize, fid: f64, y_ref: f64, label: &str) -> Result<()> {
    let fid = fid.clamp(0.0, 1.0);
    let y_ref = y_ref.clamp(0.0, 1.0);
    let lo = lcs_tangent_shifted(fid, y_ref, Side::L)?;
    let hi = lcs_tangent_shifted(fid, y_ref, Side::U)?;
    lp.add_constraint(format!("{label} L"), vec![(to, 1.0), (from, -lo.slope)], Relation::Ge, lo.intercept);
    lp.add_constraint(format!("{label} U"), vec![(to, 1.0), (from, -hi.slope)], Relation::Le, hi.intercept);
    Ok(())
}

/// Minimizes the single-photon yield of `I0`.
pub fn build_yield_lp(inputs: &DecoyCoinInputs) -> Result<LinearProgram> {
    let mut lp = LinearProgram::new(format!("yield {}", inputs.label), Sense::Min);
    let v = add_family(&mut lp, inputs)?;
    lp.set_objective(vec![(v[0][1], 1.0)]);
    Ok(lp)
}

/// Maximizes the single-photon error probability of `I0` for one bit.
pub fn build_bit_error_lp(inputs: &DecoyCoinInputs) -> Result<LinearProgram> {
    let mut lp = LinearProgram::new(format!("bit error {}", inputs.label), Sense::Max);
    let v = add_family(&mut lp, inputs)?;
    lp.set_objective(vec![(v[0][1], 1.0)]);
    Ok(lp)
}

/// Weights and vectors of the two dominant eigenvectors of a single-photon
/// state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyOppSplit {
    pub q_key: f64,
    pub q_opp: f64,
    pub v_key: Vec<C64>,
    pub v_opp: Vec<C64>,
    /// `1 − q_key − q_opp`.
    pub residual: f64,
    /// Set when the two eigenvalues are closer than `1e-12`; the order is
    /// then the deterministic one of the eigensolver.
    pub degenerate: bool,
}

/// Splits a unit-trace state into its two dominant eigen-components.
pub fn key_opp_split(rho: &HermitianMatrix) -> Result<KeyOppSplit> {
    if rho.dim() < 2 {
        return Err(Error::InvalidInput("key/opp split needs at least two dimensions".into()));
    }
    let t = rho.trace();
    if (t - 1.0).abs() > crate::linalg::TRACE_TOL {
        return Err(Error::Trace { found: t, expected: 1.0 });
    }
    let pairs = hermitian_eigen(rho)?.descending();
    let (q_key, mut v_key) = pairs[0].clone();
    let (q_opp, mut v_opp) = pairs[1].clone();
    fix_gauge(&mut v_key);
    fix_gauge(&mut v_opp);
    let (q_key, q_opp) = (q_key.max(0.0), q_opp.max(0.0));
    Ok(KeyOppSplit {
        q_key,
        q_opp,
        v_key,
        v_opp,
        residual: (1.0 - q_key - q_opp).max(0.0),
        degenerate: q_key - q_opp < 1e-12,
    })
}

/// Fidelities between the key and opp components across intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauFidelities {
    /// `[I][J]` between key components.
    pub key: [[f64; 3]; 3],
    /// `[I][J]` between opp components.
    pub opp: [[f64; 3]; 3],
    /// Per intensity, between the key and the opp component.
    pub key_opp: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedYieldInputs {
    pub base: DecoyCoinInputs,
    pub q_key: [f64; 3],
    pub q_opp: [f64; 3],
    pub tau: TauFidelities,
    pub reference_key: [f64; 3],
    pub reference_opp: [f64; 3],
}

fn check_weights(q_key: &[f64; 3], q_opp: &[f64; 3]) -> Result<()> {
    for i in 0..3 {
        let (k, o) = (q_key[i], q_opp[i]);
        if !(k >= 0.0 && o >= 0.0 && k + o <= 1.0 + 1e-10) {
            return Err(Error::Domain(format!("invalid key/opp weights ({k}, {o})")));
        }
    }
    Ok(())
}

/// Mixture rows `q_k K + q_o O ≤ Y1 ≤ q_k K + q_o O + (1 − q_k − q_o)`.
fn add_mixture(lp: &mut LinearProgram, y1: usize, k: usize, o: usize, qk: f64, qo: f64, label: &str) {
    let terms = vec![(y1, 1.0), (k, -qk), (o, -qo)];
    lp.add_constraint(format!("{label}:mix-lo"), terms.clone(), Relation::Ge, 0.0);
    lp.add_constraint(format!("{label}:mix-hi"), terms, Relation::Le, (1.0 - qk - qo).max(0.0));
}

/// Minimizes the key-component yield of `I0`.
pub fn build_refined_yield_lp(inputs: &RefinedYieldInputs) -> Result<LinearProgram> {
    check_weights(&inputs.q_key, &inputs.q_opp)?;
    let label = &inputs.base.label;
    let mut lp = LinearProgram::new(format!("refined yield {label}"), Sense::Min);
    let y = add_family(&mut lp, &inputs.base)?;
    let key: Vec<usize> = (0..3).map(|i| lp.add_unit_var_at(var_name(label, i, "key"), inputs.reference_key[i])).collect();
    let opp: Vec<usize> = (0..3).map(|i| lp.add_unit_var_at(var_name(label, i, "opp"), inputs.reference_opp[i])).collect();
    for i in 0..3 {
        add_mixture(&mut lp, y[i][1], key[i], opp[i], inputs.q_key[i], inputs.q_opp[i], &var_name(label, i, ""));
    }
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                let tag = format!("{label}:{}->{}", Intensity::ALL[i], Intensity::ALL[j]);
                add_coin(&mut lp, key[i], key[j], inputs.tau.key[i][j], inputs.reference_key[i], &format!("{tag} key"))?;
                add_coin(&mut lp, opp[i], opp[j], inputs.tau.opp[i][j], inputs.reference_opp[i], &format!("{tag} opp"))?;
            }
        }
        let tag = var_name(label, i, "");
        let f = inputs.tau.key_opp[i];
        add_coin(&mut lp, key[i], opp[i], f, inputs.reference_key[i], &format!("{tag} key->opp"))?;
        add_coin(&mut lp, opp[i], key[i], f, inputs.reference_opp[i], &format!("{tag} opp->key"))?;
    }
    lp.set_objective(vec![(key[0], 1.0)]);
    Ok(lp)
}

/// Inputs of the refined test-basis error program, indexed by bit `a` and
/// outcome `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedErrorInputs {
    /// `[a][b]`: per-outcome gains, `p_{n|Ω_{a,X}}`, fidelities and references.
    pub families: [[DecoyCoinInputs; 2]; 2],
    /// `[a][I]`.
    pub q_key: [[f64; 3]; 2],
    pub q_opp: [[f64; 3]; 2],
    /// `[a][I][J]`: `|⟨φ_{a,I}^t|φ_{a,J}^t⟩|²`.
    pub f_key: [[[f64; 3]; 3]; 2],
    pub f_opp: [[[f64; 3]; 3]; 2],
    /// `[a][I]`: `|⟨φ_{a,I}^key|φ_{1−a,I}^opp⟩|²`.
    pub cross_key_opp: [[f64; 3]; 2],
    /// `[a][b][I]` references of the key and opp variables.
    pub reference_key: [[[f64; 3]; 2]; 2],
    pub reference_opp: [[[f64; 3]; 2]; 2],
}

/// Maximizes `½(Y^{1}_{0,key} + Y^{0}_{1,key})` at `I0`: the error outcome of
/// each bit is the opposite bit value.
pub fn build_refined_error_lp(inputs: &RefinedErrorInputs) -> Result<LinearProgram> {
    for a in 0..2 {
        check_weights(&inputs.q_key[a], &inputs.q_opp[a])?;
    }
    let mut lp = LinearProgram::new("refined bit error X", Sense::Max);
    let mut key = [[[0usize; 3]; 2]; 2];
    let mut opp = [[[0usize; 3]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let fam = &inputs.families[a][b];
            let y = add_family(&mut lp, fam)?;
            for i in 0..3 {
                key[a][b][i] = lp.add_unit_var_at(var_name(&fam.label, i, "key"), inputs.reference_key[a][b][i]);
                opp[a][b][i] = lp.add_unit_var_at(var_name(&fam.label, i, "opp"), inputs.reference_opp[a][b][i]);
                add_mixture(
                    &mut lp,
                    y[i][1],
                    key[a][b][i],
                    opp[a][b][i],
                    inputs.q_key[a][i],
                    inputs.q_opp[a][i],
                    &var_name(&fam.label, i, ""),
                );
            }
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        let tag = format!("{}:{}->{}", fam.label, Intensity::ALL[i], Intensity::ALL[j]);
                        let (rk, ro) = (inputs.reference_key[a][b][i], inputs.reference_opp[a][b][i]);
                        add_coin(&mut lp, key[a][b][i], key[a][b][j], inputs.f_key[a][i][j], rk, &format!("{tag} key"))?;
                        add_coin(&mut lp, opp[a][b][i], opp[a][b][j], inputs.f_opp[a][i][j], ro, &format!("{tag} opp"))?;
                    }
                }
            }
        }
    }
    for a in 0..2 {
        let a2 = 1 - a;
        for b in 0..2 {
            for i in 0..3 {
                let tag = format!("{}:{}", inputs.families[a][b].label, Intensity::ALL[i]);
                add_coin(
                    &mut lp,
                    key[a][b][i],
                    opp[a2][b][i],
                    inputs.cross_key_opp[a][i],
                    inputs.reference_key[a][b][i],
                    &format!("{tag} key->opp'"),
                )?;
                add_coin(
                    &mut lp,
                    opp[a][b][i],
                    key[a2][b][i],
                    inputs.cross_key_opp[a2][i],
                    inputs.reference_opp[a][b][i],
                    &format!("{tag} opp->key'"),
                )?;
            }
        }
    }
    lp.set_objective(vec![(key[0][1][0], 0.5), (key[1][0][0], 0.5)]);
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_by_vertex_enumeration, LpStatus};

    fn poisson(mu: f64, len: usize) -> Vec<f64> {
        let mut p = vec![(-mu).exp()];
        for n in 1..len {
            let last = p[n - 1];
            p.push(last * mu / n as f64);
        }
        p
    }

    fn family(fid: f64) -> DecoyCoinInputs {
        let mus: [f64; 3] = [0.5, 0.1, 0.001];
        let eta: f64 = 0.1;
        let pd: f64 = 1e-6;
        let yn: Vec<f64> = (0..5).map(|n| 1.0 - (1.0 - pd) * (1.0 - pd) * (1.0 - eta).powi(n)).collect();
        DecoyCoinInputs {
            label: "Z".into(),
            observed: mus.map(|m| 1.0 - (1.0 - pd) * (1.0 - pd) * (-eta * m).exp()),
            p_n: mus.map(|m| poisson(m, 5)),
            fidelity: vec![[[fid; 3]; 3]; 5],
            reference: [yn.clone(), yn.clone(), yn],
        }
    }

    /// The same decoy problem with one shared yield per photon number.
    fn shared_yield_oracle(f: &DecoyCoinInputs) -> f64 {
        let mut lp = LinearProgram::new("oracle", Sense::Min);
        let v: Vec<usize> = (0..5).map(|n| lp.add_unit_var(format!("Y{n}"))).collect();
        for i in 0..3 {
            let terms: Vec<(usize, f64)> = (0..5).map(|n| (v[n], f.p_n[i][n])).collect();
            let mass: f64 = f.p_n[i].iter().sum();
            lp.add_constraint("lo", terms.clone(), Relation::Le, f.observed[i]);
            lp.add_constraint("hi", terms, Relation::Ge, f.observed[i] - 1.0 + mass);
        }
        lp.set_objective(vec![(v[1], 1.0)]);
        solve_by_vertex_enumeration(&lp).unwrap().objective
    }

    #[test]
    fn unit_fidelity_reduces_to_shared_yields() {
        let f = family(1.0);
        let lp = build_yield_lp(&f).unwrap();
        let s = lp.solve().unwrap();
        let oracle = shared_yield_oracle(&f);
        assert!((s.objective - oracle).abs() < 1e-9, "{} vs {oracle}", s.objective);
    }

    #[test]
    fn zero_fidelity_decouples_intensities() {
        let f = family(0.0);
        let s = build_yield_lp(&f).unwrap().solve().unwrap();
        // Single-intensity bound: p_1 Y_1 ≥ Q − (1 − Σ_{n≠1} p_n · 0) is vacuous
        // except through the upper decoy row.
        let mut lp = LinearProgram::new("single", Sense::Min);
        let v: Vec<usize> = (0..5).map(|n| lp.add_unit_var(format!("Y{n}"))).collect();
        let terms: Vec<(usize, f64)> = (0..5).map(|n| (v[n], f.p_n[0][n])).collect();
        let mass: f64 = f.p_n[0].iter().sum();
        lp.add_constraint("lo", terms.clone(), Relation::Le, f.observed[0]);
        lp.add_constraint("hi", terms, Relation::Ge, f.observed[0] - 1.0 + mass);
        lp.set_objective(vec![(v[1], 1.0)]);
        let single = lp.solve().unwrap().objective;
        assert!((s.objective - single).abs() < 1e-9);
    }

    #[test]
    fn truth_is_feasible() {
        let f = family(0.999);
        let lp = build_yield_lp(&f).unwrap();
        let truth = lp.reference_point().unwrap();
        assert_eq!(truth, (0..3).flat_map(|i| f.reference[i].clone()).collect::<Vec<f64>>());
        // The references are the true yields, but the decoy rows neglect n > 4.
        assert!(lp.max_violation(&truth) < 1e-12);
        let s = lp.solve().unwrap();
        assert!(s.objective <= f.reference[0][1] + 1e-12);
    }

    #[test]
    fn symmetric_bit_error_programs_agree() {
        let mut f = family(0.99);
        f.observed = f.observed.map(|q| 0.01 * q);
        f.reference = f.reference.clone().map(|r| r.iter().map(|y| 0.01 * y).collect());
        let a = build_bit_error_lp(&f).unwrap().solve().unwrap();
        let mut g = f.clone();
        g.label = "1X".into();
        let b = build_bit_error_lp(&g).unwrap().solve().unwrap();
        assert_eq!(a.status, LpStatus::Optimal);
        assert!((a.objective - b.objective).abs() < 1e-9);
        assert!(a.objective < 1.0);
    }

    #[test]
    fn split_examples() {
        let mixed = HermitianMatrix::from_real_diagonal(&[0.5, 0.5]);
        let s = key_opp_split(&mixed).unwrap();
        assert!((s.q_key - 0.5).abs() < 1e-15 && (s.q_opp - 0.5).abs() < 1e-15 && s.degenerate);
        let v = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)];
        let s = key_opp_split(&HermitianMatrix::outer(&v, 1.0)).unwrap();
        assert!((s.q_key - 1.0).abs() < 1e-12 && s.residual < 1e-12);
    }

    #[test]
    fn pure_components_recover_baseline() {
        let base = family(0.999);
        let inputs = RefinedYieldInputs {
            base: base.clone(),
            q_key: [1.0; 3],
            q_opp: [0.0; 3],
            tau: TauFidelities { key: [[0.999; 3]; 3], opp: [[0.0; 3]; 3], key_opp: [0.0; 3] },
            reference_key: [base.reference[0][1], base.reference[1][1], base.reference[2][1]],
            reference_opp: [0.5; 3],
        };
        let refined = build_refined_yield_lp(&inputs).unwrap().solve().unwrap();
        let baseline = build_yield_lp(&base).unwrap().solve().unwrap();
        assert!(refined.objective >= baseline.objective - 1e-9);
    }
}
