//! Exact-rational linear programming.
//!
//! A dense two-phase tableau simplex with Bland's rule. Every program in this
//! crate has at most a few dozen variables, so the dense representation and
//! the slow-but-safe pivoting rule are not a bottleneck.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::Q;

const MAX_PIVOTS: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<(usize, Q)>,
    sense: Sense,
    rhs: Q,
}

/// A linear program over non-negative variables with optional upper bounds.
#[derive(Clone, Debug)]
pub struct RationalLp {
    vars: usize,
    maximize: bool,
    objective: Vec<Q>,
    upper: Vec<Option<Q>>,
    rows: Vec<Row>,
}

/// Verdict of [`RationalLp::solve`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { value: Q, x: Vec<Q> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal_value(&self) -> Option<&Q> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }
}

impl RationalLp {
    pub fn maximize(vars: usize) -> Self {
        RationalLp::new(vars, true)
    }

    pub fn minimize(vars: usize) -> Self {
        RationalLp::new(vars, false)
    }

    fn new(vars: usize, maximize: bool) -> Self {
        RationalLp { vars, maximize, objective: vec![Q::zero(); vars], upper: vec![None; vars], rows: Vec::new() }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn set_objective(&mut self, var: usize, coeff: Q) {
        self.objective[var] = coeff;
    }

    pub fn set_upper(&mut self, var: usize, bound: Q) {
        self.upper[var] = Some(bound);
    }

    /// Adds `sum coeffs[k].1 * x[coeffs[k].0]  (sense)  rhs`.
    pub fn add_constraint(&mut self, coeffs: Vec<(usize, Q)>, sense: Sense, rhs: Q) {
        debug_assert!(coeffs.iter().all(|(j, _)| *j < self.vars));
        self.rows.push(Row { coeffs, sense, rhs });
    }

    /// Solves the program exactly.
    ///
    /// Returns an error only if the pivot limit is hit, which signals a bug
    /// rather than a property of the program; the error carries a dump of it.
    pub fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).run().map_err(|message| Error::Lp { message, program: self.to_string() })
    }
}

impl fmt::Display for RationalLp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let term = |c: &Q, j: usize| format!("{c}*x{j}");
        let obj: Vec<String> =
            self.objective.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(j, c)| term(c, j)).collect();
        writeln!(
            f,
            "{} {}",
            if self.maximize { "maximize" } else { "minimize" },
            if obj.is_empty() { "0".to_string() } else { obj.join(" + ") }
        )?;
        for row in &self.rows {
            let lhs: Vec<String> = row.coeffs.iter().map(|(j, c)| term(c, *j)).collect();
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            writeln!(f, "  {} {op} {}", lhs.join(" + "), row.rhs)?;
        }
        for (j, ub) in self.upper.iter().enumerate() {
            if let Some(ub) = ub {
                writeln!(f, "  x{j} <= {ub}")?;
            }
        }
        write!(f, "  x >= 0 ({} variables)", self.vars)
    }
}

struct Tableau {
    // a[i] has `cols` entries followed by the right-hand side
    a: Vec<Vec<Q>>,
    basis: Vec<usize>,
    cols: usize,
    structural: usize,
    artificial_start: usize,
    objective: Vec<Q>,
    sign: Q,
}

impl Tableau {
    fn build(lp: &RationalLp) -> Tableau {
        let mut rows: Vec<(Vec<Q>, Sense, Q)> = Vec::new();
        for row in &lp.rows {
            let mut dense = vec![Q::zero(); lp.vars];
            for (j, c) in &row.coeffs {
                dense[*j] += c;
            }
            rows.push((dense, row.sense, row.rhs.clone()));
        }
        for (j, ub) in lp.upper.iter().enumerate() {
            if let Some(ub) = ub {
                let mut dense = vec![Q::zero(); lp.vars];
                dense[j] = Q::one();
                rows.push((dense, Sense::Le, ub.clone()));
            }
        }
        for (dense, sense, rhs) in rows.iter_mut() {
            if rhs.is_negative() {
                for c in dense.iter_mut() {
                    *c = -c.clone();
                }
                *rhs = -rhs.clone();
                *sense = match *sense {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
            }
        }
        let slack_count = rows.iter().filter(|r| r.1 != Sense::Eq).count();
        let artificial_count = rows.iter().filter(|r| r.1 != Sense::Le).count();
        let artificial_start = lp.vars + slack_count;
        let cols = artificial_start + artificial_count;
        let mut a = Vec::with_capacity(rows.len());
        let mut basis = Vec::with_capacity(rows.len());
        let (mut next_slack, mut next_art) = (lp.vars, artificial_start);
        for (dense, sense, rhs) in rows {
            let mut line = dense;
            line.resize(cols + 1, Q::zero());
            match sense {
                Sense::Le => {
                    line[next_slack] = Q::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Sense::Ge => {
                    line[next_slack] = -Q::one();
                    next_slack += 1;
                    line[next_art] = Q::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                Sense::Eq => {
                    line[next_art] = Q::one();
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            line[cols] = rhs;
            a.push(line);
        }
        let sign = if lp.maximize { Q::one() } else { -Q::one() };
        let mut objective = vec![Q::zero(); cols];
        for (j, c) in lp.objective.iter().enumerate() {
            objective[j] = c * &sign;
        }
        Tableau { a, basis, cols, structural: lp.vars, artificial_start, objective, sign }
    }

    /// Reduced-cost row for maximizing `c` over the current basis; the last
    /// entry holds minus the objective value.
    fn reduced_costs(&self, c: &[Q]) -> Vec<Q> {
        let mut d: Vec<Q> = c.iter().cloned().chain(std::iter::once(Q::zero())).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &c[b];
            if cb.is_zero() {
                continue;
            }
            for (dj, aij) in d.iter_mut().zip(&self.a[i]) {
                if !aij.is_zero() {
                    *dj -= cb * aij;
                }
            }
        }
        d
    }

    fn pivot(&mut self, row: usize, col: usize, d: &mut [Q]) {
        let p = self.a[row][col].clone();
        if !p.is_one() {
            for v in self.a[row].iter_mut() {
                if !v.is_zero() {
                    *v /= &p;
                }
            }
        }
        let pivot_row = self.a[row].clone();
        let nz: Vec<usize> = (0..pivot_row.len()).filter(|&j| !pivot_row[j].is_zero()).collect();
        for (i, line) in self.a.iter_mut().enumerate() {
            if i == row || line[col].is_zero() {
                continue;
            }
            let f = line[col].clone();
            for &j in &nz {
                line[j] -= &f * &pivot_row[j];
            }
        }
        if !d[col].is_zero() {
            let f = d[col].clone();
            for &j in &nz {
                d[j] -= &f * &pivot_row[j];
            }
        }
        self.basis[row] = col;
    }

    /// Bland's-rule simplex maximizing with reduced costs `d` over columns `< allowed`.
    fn optimize(&mut self, d: &mut [Q], allowed: usize) -> std::result::Result<bool, String> {
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..allowed).find(|&j| d[j].is_positive()) else {
                return Ok(true);
            };
            let mut best: Option<(usize, Q)> = None;
            for (i, line) in self.a.iter().enumerate() {
                if line[enter].is_positive() {
                    let ratio = &line[self.cols] / &line[enter];
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            match best {
                None => return Ok(false),
                Some((row, _)) => self.pivot(row, enter, d),
            }
        }
        Err(format!("pivot limit of {MAX_PIVOTS} reached"))
    }

    fn run(mut self) -> std::result::Result<LpOutcome, String> {
        if self.artificial_start < self.cols {
            let mut c1 = vec![Q::zero(); self.cols];
            for c in c1.iter_mut().skip(self.artificial_start) {
                *c = -Q::one();
            }
            let mut d = self.reduced_costs(&c1);
            let cols = self.cols;
            self.optimize(&mut d, cols)?;
            // -d[rhs] is the phase-one optimum, i.e. minus the artificial total
            if !d[self.cols].is_zero() {
                return Ok(LpOutcome::Infeasible);
            }
            let mut i = 0;
            while i < self.a.len() {
                if self.basis[i] >= self.artificial_start {
                    match (0..self.artificial_start).find(|&j| !self.a[i][j].is_zero()) {
                        Some(j) => {
                            let mut scratch = vec![Q::zero(); self.cols + 1];
                            self.pivot(i, j, &mut scratch);
                            i += 1;
                        }
                        None => {
                            self.a.remove(i);
                            self.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }
        let mut d = self.reduced_costs(&self.objective.clone());
        let allowed = self.artificial_start;
        if !self.optimize(&mut d, allowed)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![Q::zero(); self.structural];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.structural {
                x[b] = self.a[i][self.cols].clone();
            }
        }
        // recompute the value from x so the sign convention cannot drift
        let value: Q = x.iter().zip(&self.objective).map(|(xi, c)| xi * c).sum::<Q>() * &self.sign;
        Ok(LpOutcome::Optimal { value, x })
    }
}

impl RationalLp {
    /// Objective value of `x` under this program's objective (no feasibility check).
    pub fn evaluate(&self, x: &[Q]) -> Q {
        x.iter().zip(&self.objective).map(|(a, b)| a * b).sum()
    }

    /// True if `x` satisfies every constraint and bound exactly.
    pub fn is_feasible(&self, x: &[Q]) -> bool {
        if x.len() != self.vars || x.iter().any(Signed::is_negative) {
            return false;
        }
        let bounds_ok = self.upper.iter().zip(x).all(|(ub, xi)| ub.as_ref().is_none_or(|u| xi <= u));
        bounds_ok
            && self.rows.iter().all(|row| {
                let lhs: Q = row.coeffs.iter().map(|(j, c)| c * &x[*j]).sum();
                match row.sense {
                    Sense::Le => lhs <= row.rhs,
                    Sense::Ge => lhs >= row.rhs,
                    Sense::Eq => lhs == row.rhs,
                }
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q;

    fn int(n: i64) -> Q {
        q(n, 1)
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let mut lp = RationalLp::maximize(2);
        lp.set_objective(0, int(3));
        lp.set_objective(1, int(5));
        lp.add_constraint(vec![(0, int(1))], Sense::Le, int(4));
        lp.add_constraint(vec![(1, int(2))], Sense::Le, int(12));
        lp.add_constraint(vec![(0, int(3)), (1, int(2))], Sense::Le, int(18));
        assert_eq!(lp.solve().unwrap(), LpOutcome::Optimal { value: int(36), x: vec![int(2), int(6)] });
    }

    #[test]
    fn minimum_with_ge_and_eq_rows() {
        // min x + 2y, x + y = 1, y >= 1/3 -> 4/3
        let mut lp = RationalLp::minimize(2);
        lp.set_objective(0, int(1));
        lp.set_objective(1, int(2));
        lp.add_constraint(vec![(0, int(1)), (1, int(1))], Sense::Eq, int(1));
        lp.add_constraint(vec![(1, int(1))], Sense::Ge, q(1, 3));
        let out = lp.solve().unwrap();
        assert_eq!(out.optimal_value(), Some(&q(4, 3)));
    }

    #[test]
    fn infeasible_program() {
        let mut lp = RationalLp::maximize(1);
        lp.add_constraint(vec![(0, int(1))], Sense::Ge, int(2));
        lp.set_upper(0, int(1));
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_program() {
        let mut lp = RationalLp::maximize(2);
        lp.set_objective(0, int(1));
        lp.add_constraint(vec![(0, int(1)), (1, int(-1))], Sense::Le, int(1));
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn negative_rhs_and_redundant_equalities() {
        // -x - y = -2 twice (redundant), max x with x <= 3/2
        let mut lp = RationalLp::maximize(2);
        lp.set_objective(0, int(1));
        lp.add_constraint(vec![(0, int(-1)), (1, int(-1))], Sense::Eq, int(-2));
        lp.add_constraint(vec![(0, int(-2)), (1, int(-2))], Sense::Eq, int(-4));
        lp.set_upper(0, q(3, 2));
        let out = lp.solve().unwrap();
        assert_eq!(out, LpOutcome::Optimal { value: q(3, 2), x: vec![q(3, 2), q(1, 2)] });
    }

    #[test]
    fn degenerate_program_terminates() {
        // a classic cycling example for the largest-coefficient rule
        let mut lp = RationalLp::maximize(4);
        for (j, c) in [q(3, 4), int(-150), q(1, 50), int(-6)].into_iter().enumerate() {
            lp.set_objective(j, c);
        }
        lp.add_constraint(vec![(0, q(1, 4)), (1, int(-60)), (2, q(-1, 25)), (3, int(9))], Sense::Le, int(0));
        lp.add_constraint(vec![(0, q(1, 2)), (1, int(-90)), (2, q(-1, 50)), (3, int(3))], Sense::Le, int(0));
        lp.add_constraint(vec![(2, int(1))], Sense::Le, int(1));
        let out = lp.solve().unwrap();
        assert_eq!(out.optimal_value(), Some(&q(1, 20)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small() -> impl Strategy<Value = Q> {
            (-4i64..=4, 1i64..=3).prop_map(|(n, d)| q(n, d))
        }

        proptest! {
            // Optima are feasible and no vertex of a tiny grid beats them.
            #[test]
            fn optimum_dominates_grid_points(
                c in prop::collection::vec(small(), 2),
                rows in prop::collection::vec((small(), small(), small()), 1..4),
            ) {
                let mut lp = RationalLp::maximize(2);
                lp.set_objective(0, c[0].clone());
                lp.set_objective(1, c[1].clone());
                lp.set_upper(0, int(3));
                lp.set_upper(1, int(3));
                for (a, b, r) in &rows {
                    lp.add_constraint(vec![(0, a.clone()), (1, b.clone())], Sense::Le, r.clone());
                }
                let grid: Vec<Vec<Q>> = (0..=12)
                    .flat_map(|i| (0..=12).map(move |j| vec![q(i, 4), q(j, 4)]))
                    .collect();
                match lp.solve().unwrap() {
                    LpOutcome::Optimal { value, x } => {
                        prop_assert!(lp.is_feasible(&x));
                        prop_assert_eq!(lp.evaluate(&x), value.clone());
                        for p in grid.iter().filter(|p| lp.is_feasible(p)) {
                            prop_assert!(lp.evaluate(p) <= value);
                        }
                    }
                    LpOutcome::Infeasible => {
                        prop_assert!(grid.iter().all(|p| !lp.is_feasible(p)));
                    }
                    LpOutcome::Unbounded => prop_assert!(false, "bounded box reported unbounded"),
                }
            }
        }
    }
}
