//! Shared plumbing between the pipelines: fidelity tables, decoy families
//! and LP bookkeeping.

use super::FidelityRecord;
use crate::bounds::projected_fidelity_lower_bound;
use crate::error::Result;
use crate::linalg::{fidelity, inner, HermitianMatrix, C64};
use crate::lp::{DecoyCoinInputs, LinearProgram};
use crate::types::Intensity;

/// Fidelity lower bounds `[n][I][J]` between the blocks of three intensities.
/// Each block is a projected operator `ΠρΠ` whose trace is the captured
/// weight, so untruncated blocks give the exact fidelity.
pub(crate) fn fidelity_table(
    label: &str,
    blocks: &[Vec<HermitianMatrix>; 3],
    records: &mut Vec<FidelityRecord>,
) -> Result<Vec<[[f64; 3]; 3]>> {
    let len = blocks[0].len();
    let mut table = vec![[[1.0; 3]; 3]; len];
    for n in 0..len {
        for i in 0..3 {
            for j in i + 1..3 {
                let f = projected_fidelity_lower_bound(&blocks[i][n], &blocks[j][n])?;
                table[n][i][j] = f;
                table[n][j][i] = f;
                records.push(FidelityRecord {
                    family: label.to_string(),
                    n: n as u32,
                    i: Intensity::ALL[i],
                    j: Intensity::ALL[j],
                    value: f,
                });
            }
        }
    }
    Ok(table)
}

/// Fidelities `[I][J]` between three unit-trace states.
pub(crate) fn state_fidelities(states: &[HermitianMatrix; 3]) -> Result<[[f64; 3]; 3]> {
    let mut t = [[1.0; 3]; 3];
    for i in 0..3 {
        for j in i + 1..3 {
            let f = fidelity(&states[i], &states[j])?.min(1.0);
            t[i][j] = f;
            t[j][i] = f;
        }
    }
    Ok(t)
}

/// `|⟨u|v⟩|²` for unit vectors.
pub(crate) fn overlap_sq(u: &[C64], v: &[C64]) -> f64 {
    inner(u, v).norm_sqr().min(1.0)
}

/// `½(|u⟩⟨u| + |v⟩⟨v|)`.
pub(crate) fn even_mixture(u: &[C64], v: &[C64]) -> HermitianMatrix {
    let mut m = HermitianMatrix::outer(u, 0.5);
    m.add_scaled(&HermitianMatrix::outer(v, 0.5), 1.0);
    m
}

pub(crate) fn decoy_inputs(
    label: &str,
    observed: [f64; 3],
    p_n: [Vec<f64>; 3],
    fidelity: Vec<[[f64; 3]; 3]>,
    reference: [Vec<f64>; 3],
) -> DecoyCoinInputs {
    DecoyCoinInputs { label: label.to_string(), observed, p_n, fidelity, reference }
}

/// Solves programs and accumulates their pivot counts, optionally keeping a
/// copy of each program.
#[derive(Debug, Default)]
pub(crate) struct LpTracker {
    pub pivots: usize,
    pub recorded: Option<Vec<LinearProgram>>,
}

impl LpTracker {
    pub fn recording() -> Self {
        LpTracker { pivots: 0, recorded: Some(Vec::new()) }
    }

    pub fn optimum(&mut self, lp: &LinearProgram) -> Result<f64> {
        if let Some(r) = self.recorded.as_mut() {
            r.push(lp.clone());
        }
        let sol = lp.solve()?;
        self.pivots += sol.pivots;
        sol.optimum(&lp.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fidelity_table_is_symmetric_with_unit_diagonal() {
        let a = HermitianMatrix::from_real_diagonal(&[0.9, 0.1]);
        let b = HermitianMatrix::from_real_diagonal(&[0.5, 0.5]);
        let c = HermitianMatrix::from_real_diagonal(&[0.1, 0.9]);
        let mut rec = Vec::new();
        let t = fidelity_table("t", &[vec![a], vec![b], vec![c]], &mut rec).unwrap();
        assert_eq!(rec.len(), 3);
        for i in 0..3 {
            assert_eq!(t[0][i][i], 1.0);
            for j in 0..3 {
                assert_eq!(t[0][i][j], t[0][j][i]);
            }
        }
        let exact = (0.9f64 * 0.1).sqrt() * 2.0;
        assert!((t[0][0][2] - exact * exact).abs() < 1e-12);
    }
}
