//! Brute-force reference solver: the optimum of a bounded feasible program
//! is attained at a vertex, and every vertex is the solution of some square
//! system of active constraints. Exponential in size; intended for programs
//! with a handful of variables.

use super::{LinearProgram, LpSolution, LpStatus, Sense};
use crate::error::{Error, Result};

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` when it is (numerically) singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-12 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Enumerates every vertex of the feasible box-bounded polytope and returns
/// the best. Refuses programs with more than 12 variables.
pub fn solve_by_vertex_enumeration(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.vars.len();
    if n == 0 || n > 12 {
        return Err(Error::InvalidInput(format!("vertex enumeration supports 1..=12 variables, got {n}")));
    }
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut a = vec![0.0; n];
        for &(j, v) in &c.terms {
            a[j] += v;
        }
        planes.push((a, c.rhs));
    }
    for (j, v) in lp.vars.iter().enumerate() {
        for bound in [v.lower, v.upper] {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            planes.push((a, bound));
        }
    }
    let scale = lp.constraints.iter().map(|c| c.rhs.abs()).fold(1.0, f64::max);
    let sign = if lp.sense == Sense::Min { 1.0 } else { -1.0 };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    if planes.len() >= n {
        loop {
            let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
            let b = idx.iter().map(|&i| planes[i].1).collect();
            if let Some(x) = solve_square(a, b) {
                if lp.max_violation(&x) <= 1e-9 * scale {
                    let v = sign * lp.objective_value(&x);
                    if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                        best = Some((v, x));
                    }
                }
            }
            if !next_combination(&mut idx, planes.len()) {
                break;
            }
        }
    }
    Ok(match best {
        Some((v, x)) => LpSolution { status: LpStatus::Optimal, objective: sign * v, x, pivots: 0 },
        None => LpSolution { status: LpStatus::Infeasible, objective: f64::NAN, x: Vec::new(), pivots: 0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Relation;

    #[test]
    fn agrees_on_a_triangle() {
        let mut lp = LinearProgram::new("t", Sense::Max);
        let x = lp.add_unit_var("x");
        let y = lp.add_unit_var("y");
        lp.add_constraint("c", vec![(x, 1.0), (y, 1.0)], Relation::Le, 1.0);
        lp.set_objective(vec![(x, 2.0), (y, 1.0)]);
        let s = solve_by_vertex_enumeration(&lp).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-12);
    }
}
