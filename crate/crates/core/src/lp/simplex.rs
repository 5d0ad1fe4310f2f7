//! Dense two-phase tableau simplex.
//!
//! Variables are shifted to start at zero and their upper bounds become
//! ordinary rows. Pricing is Dantzig's rule; after a run of degenerate pivots
//! the solver switches to Bland's rule for the rest of the phase, which rules
//! out cycling. Independent blocks of variables (connected through no
//! constraint) are solved separately.

use super::{LinearProgram, LpSolution, LpStatus, Relation, Sense, FEAS_TOL};
use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-12;
const RATIO_TIE: f64 = 1e-14;
const COST_EPS: f64 = 1e-11;
const DEGENERATE_RUN: usize = 50;
const MAX_PIVOTS: usize = 100_000;

struct Tableau {
    rows: usize,
    cols: usize,
    /// `(rows + 1) × (cols + 1)`; the last row holds reduced costs, the last
    /// column the right-hand side (objective row: minus the current value).
    t: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.cols + 1;
        let p = self.t[r * w + c];
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        let row_r: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..=self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f != 0.0 {
                for (j, &rv) in row_r.iter().enumerate() {
                    self.t[i * w + j] -= f * rv;
                }
                self.t[i * w + c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs simplex iterations on the current cost row over columns
    /// `0..allowed`. Returns `false` when the objective is unbounded.
    fn optimize(&mut self, allowed: usize) -> Result<bool> {
        let mut bland = false;
        let mut degenerate = 0usize;
        loop {
            let costs = &self.t[self.rows * (self.cols + 1)..self.rows * (self.cols + 1) + allowed];
            let entering = if bland {
                costs.iter().position(|&r| r < -COST_EPS)
            } else {
                costs
                    .iter()
                    .enumerate()
                    .filter(|(_, &r)| r < -COST_EPS)
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(j, _)| j)
            };
            let Some(c) = entering else { return Ok(true) };
            let leave = if bland { self.ratio_bland(c) } else { self.ratio_harris(c) };
            let Some((r, ratio)) = leave else { return Ok(false) };
            if ratio <= 1e-14 {
                degenerate += 1;
                if degenerate >= DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
            if self.pivots > MAX_PIVOTS {
                return Err(Error::LpFailed { name: "simplex".into(), status: "iteration limit".into() });
            }
        }
    }
}

impl Tableau {
    /// Textbook minimum-ratio test, ties broken by the smallest basic index.
    fn ratio_bland(&self, c: usize) -> Option<(usize, f64)> {
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, c);
            if a > PIVOT_EPS {
                let ratio = self.rhs(i).max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some((k, best)) => ratio < best - RATIO_TIE || (ratio <= best + RATIO_TIE && self.basis[i] < self.basis[k]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        leave
    }

    /// Harris two-pass ratio test: bound the step with every basic variable
    /// relaxed by `HARRIS_TOL`, then take the largest pivot among the rows
    /// that block within that step.
    fn ratio_harris(&self, c: usize) -> Option<(usize, f64)> {
        let mut relaxed = f64::INFINITY;
        for i in 0..self.rows {
            let a = self.at(i, c);
            if a > PIVOT_EPS {
                relaxed = relaxed.min((self.rhs(i).max(0.0) + HARRIS_TOL) / a);
            }
        }
        if !relaxed.is_finite() {
            return None;
        }
        let mut leave: Option<(usize, f64, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, c);
            if a > PIVOT_EPS {
                let ratio = self.rhs(i).max(0.0) / a;
                if ratio <= relaxed && leave.is_none_or(|(_, _, best)| a > best) {
                    leave = Some((i, ratio, a));
                }
            }
        }
        leave.map(|(i, r, _)| (i, r))
    }
}

struct Block {
    vars: Vec<usize>,
    cons: Vec<usize>,
}

fn blocks(lp: &LinearProgram) -> Vec<Block> {
    let n = lp.vars.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for c in &lp.constraints {
        let mut it = c.terms.iter().map(|t| t.0);
        if let Some(first) = it.next() {
            for j in it {
                let (a, b) = (find(&mut parent, first), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut root_block: Vec<Option<usize>> = vec![None; n];
    let mut out: Vec<Block> = Vec::new();
    for j in 0..n {
        let r = find(&mut parent, j);
        let b = *root_block[r].get_or_insert_with(|| {
            out.push(Block { vars: Vec::new(), cons: Vec::new() });
            out.len() - 1
        });
        out[b].vars.push(j);
    }
    for (k, c) in lp.constraints.iter().enumerate() {
        match c.terms.first() {
            Some(&(j, _)) => {
                let r = find(&mut parent, j);
                out[root_block[r].expect("variable has a block")].cons.push(k);
            }
            None => {
                // Constant constraint; attach to the first block so it is
                // checked for feasibility.
                if !out.is_empty() {
                    out[0].cons.push(k);
                }
            }
        }
    }
    out
}

/// Solves one block; `cost` is the minimization cost of each block variable.
fn solve_block(lp: &LinearProgram, block: &Block, cost: &[f64]) -> Result<(LpStatus, Vec<f64>, usize)> {
    let nv = block.vars.len();
    let local: std::collections::HashMap<usize, usize> = block.vars.iter().enumerate().map(|(k, &j)| (j, k)).collect();
    // Rows: (coefficients, relation, rhs) in shifted variables.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for &k in &block.cons {
        let c = &lp.constraints[k];
        let mut a = vec![0.0; nv];
        let mut rhs = c.rhs;
        for &(j, coef) in &c.terms {
            a[local[&j]] += coef;
            rhs -= coef * lp.vars[j].lower;
        }
        rows.push((a, c.relation, rhs));
    }
    for (k, &j) in block.vars.iter().enumerate() {
        let span = lp.vars[j].upper - lp.vars[j].lower;
        let mut a = vec![0.0; nv];
        a[k] = 1.0;
        rows.push((a, Relation::Le, span));
    }
    for r in rows.iter_mut() {
        let big = r.0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if big > 0.0 {
            r.0.iter_mut().for_each(|x| *x /= big);
            r.2 /= big;
        }
        if r.2 < 0.0 {
            r.0.iter_mut().for_each(|x| *x = -*x);
            r.2 = -r.2;
            r.1 = match r.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let art_start = nv + n_slack;
    let cols = art_start + n_art;
    let w = cols + 1;
    let mut tab = Tableau { rows: m, cols, t: vec![0.0; (m + 1) * w], basis: vec![0; m], pivots: 0 };
    let (mut s, mut a) = (nv, art_start);
    for (i, (coef, rel, rhs)) in rows.iter().enumerate() {
        tab.t[i * w..i * w + nv].copy_from_slice(coef);
        tab.t[i * w + cols] = *rhs;
        match rel {
            Relation::Le => {
                tab.t[i * w + s] = 1.0;
                tab.basis[i] = s;
                s += 1;
            }
            Relation::Ge => {
                tab.t[i * w + s] = -1.0;
                tab.t[i * w + a] = 1.0;
                tab.basis[i] = a;
                s += 1;
                a += 1;
            }
            Relation::Eq => {
                tab.t[i * w + a] = 1.0;
                tab.basis[i] = a;
                a += 1;
            }
        }
    }
    if n_art > 0 {
        let obj = m * w;
        for i in 0..m {
            if tab.basis[i] >= art_start {
                for j in 0..art_start {
                    tab.t[obj + j] -= tab.t[i * w + j];
                }
                tab.t[obj + cols] -= tab.t[i * w + cols];
            }
        }
        tab.optimize(art_start)?;
        let infeasibility = -tab.t[obj + cols];
        let scale = rows.iter().map(|r| r.2).fold(1.0, f64::max);
        if infeasibility > 1e-9 * scale {
            return Ok((LpStatus::Infeasible, Vec::new(), tab.pivots));
        }
        for i in 0..m {
            if tab.basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| tab.at(i, j).abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }
    }
    let obj = m * w;
    tab.t[obj..obj + w].fill(0.0);
    tab.t[obj..obj + nv].copy_from_slice(&cost[..nv]);
    for i in 0..m {
        let b = tab.basis[i];
        let cb = if b < nv { cost[b] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..w {
                tab.t[obj + j] -= cb * tab.t[i * w + j];
            }
        }
    }
    if !tab.optimize(art_start)? {
        return Ok((LpStatus::Unbounded, Vec::new(), tab.pivots));
    }
    let mut y = vec![0.0; nv];
    for i in 0..m {
        if tab.basis[i] < nv {
            y[tab.basis[i]] = tab.rhs(i).max(0.0);
        }
    }
    let x = block
        .vars
        .iter()
        .zip(&y)
        .map(|(&j, &yi)| (lp.vars[j].lower + yi).min(lp.vars[j].upper))
        .collect();
    Ok((LpStatus::Optimal, x, tab.pivots))
}

/// Solves `lp`. Infeasible and unbounded programs are reported through the
/// status field; malformed programs are errors.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.vars.len();
    let sign = match lp.sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let mut cost = vec![0.0; n];
    for &(j, c) in &lp.objective {
        cost[j] += sign * c;
    }
    let mut x = vec![0.0; n];
    let mut pivots = 0;
    for block in blocks(lp) {
        let bc: Vec<f64> = block.vars.iter().map(|&j| cost[j]).collect();
        if block.cons.is_empty() {
            for (&j, &c) in block.vars.iter().zip(&bc) {
                x[j] = if c < 0.0 { lp.vars[j].upper } else { lp.vars[j].lower };
            }
            continue;
        }
        let (status, bx, p) = solve_block(lp, &block, &bc)?;
        pivots += p;
        if status != LpStatus::Optimal {
            return Ok(LpSolution { status, objective: f64::NAN, x: Vec::new(), pivots });
        }
        for (&j, v) in block.vars.iter().zip(bx) {
            x[j] = v;
        }
    }
    let viol = lp.max_violation(&x);
    let scale = lp.constraints.iter().map(|c| c.rhs.abs()).fold(1.0, f64::max);
    if viol > FEAS_TOL * scale {
        return Err(Error::LpFailed {
            name: lp.name.clone(),
            status: format!("numerically unstable (violation {viol:.3e})"),
        });
    }
    Ok(LpSolution { status: LpStatus::Optimal, objective: lp.objective_value(&x), x, pivots })
}
