//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Problems here are small (a few dozen variables), so the tableau is kept
//! dense and every pivot touches the whole matrix.

use super::LpError;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

/// `minimize c.x  s.t.  a_eq x = b_eq,  a_ub x <= b_ub,  lo <= x <= hi`.
#[derive(Clone, Debug)]
pub struct StandardLp<'a> {
    pub c: &'a [f64],
    pub a_eq: &'a [Vec<f64>],
    pub b_eq: &'a [f64],
    pub a_ub: &'a [Vec<f64>],
    pub b_ub: &'a [f64],
    pub bounds: &'a [(f64, f64)],
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Reduced costs of `cost` (length `cols`) for the current basis.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj -= cb * self.t[r][j];
                }
            }
        }
        d
    }

    /// Runs simplex iterations on `cost` over columns where `usable[j]`.
    fn optimize(&mut self, cost: &[f64], usable: &[bool]) -> Result<(), LpError> {
        for _ in 0..MAX_PIVOTS {
            let d = self.reduced_costs(cost);
            // Bland: lowest-index improving column
            let Some(col) = (0..self.cols).find(|&j| usable[j] && d[j] < -COST_TOL) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            let tie = (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs());
                            if ratio < bratio && !tie
                                || tie && self.basis[r] < self.basis[br]
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = best else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col);
        }
        Err(LpError::IterationLimit)
    }
}

pub fn solve(lp: &StandardLp<'_>) -> Result<LpSolution, LpError> {
    let n = lp.c.len();
    assert_eq!(lp.bounds.len(), n, "one bound pair per variable");
    let lo: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
    let shift = |row: &[f64], b: f64| b - row.iter().zip(&lo).map(|(a, l)| a * l).sum::<f64>();

    // Constraint rows over the shifted variables x' = x - lo >= 0, each with
    // an optional slack (+1 for <=).
    struct Row {
        coeffs: Vec<f64>,
        rhs: f64,
        slack: bool,
    }
    let mut rows: Vec<Row> = Vec::new();
    for (a, &b) in lp.a_eq.iter().zip(lp.b_eq) {
        rows.push(Row {
            coeffs: a.clone(),
            rhs: shift(a, b),
            slack: false,
        });
    }
    for (a, &b) in lp.a_ub.iter().zip(lp.b_ub) {
        rows.push(Row {
            coeffs: a.clone(),
            rhs: shift(a, b),
            slack: true,
        });
    }
    for (j, &(l, h)) in lp.bounds.iter().enumerate() {
        if h.is_finite() {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push(Row {
                coeffs,
                rhs: h - l,
                slack: true,
            });
        }
    }

    let n_slack = rows.iter().filter(|r| r.slack).count();
    // A row needs an artificial unless its slack enters with +1 after making rhs >= 0.
    let needs_art: Vec<bool> = rows.iter().map(|r| !r.slack || r.rhs < 0.0).collect();
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let cols = n + n_slack + n_art;
    let mut t = vec![vec![0.0; cols + 1]; rows.len()];
    let mut basis = vec![0; rows.len()];
    let (mut s_idx, mut a_idx) = (n, n + n_slack);
    for (r, row) in rows.iter().enumerate() {
        let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[r][j] = sign * row.coeffs[j];
        }
        t[r][cols] = sign * row.rhs;
        if row.slack {
            t[r][s_idx] = sign;
            if !needs_art[r] {
                basis[r] = s_idx;
            }
            s_idx += 1;
        }
        if needs_art[r] {
            t[r][a_idx] = 1.0;
            basis[r] = a_idx;
            a_idx += 1;
        }
    }
    let mut tab = Tableau { t, basis, cols };
    let is_art = |j: usize| j >= n + n_slack;
    let scale = rows.iter().map(|r| r.rhs.abs()).fold(1.0, f64::max);

    if n_art > 0 {
        let cost: Vec<f64> = (0..cols).map(|j| if is_art(j) { 1.0 } else { 0.0 }).collect();
        tab.optimize(&cost, &vec![true; cols])?;
        let infeasibility: f64 = (0..tab.t.len())
            .filter(|&r| is_art(tab.basis[r]))
            .map(|r| tab.rhs(r))
            .sum();
        if infeasibility > 1e-9 * scale {
            return Err(LpError::Infeasible);
        }
        // Drive remaining (zero-level) artificials out of the basis.
        let mut r = 0;
        while r < tab.t.len() {
            if is_art(tab.basis[r]) {
                match (0..n + n_slack).find(|&j| tab.t[r][j].abs() > 1e-9) {
                    Some(j) => tab.pivot(r, j),
                    None => {
                        // redundant constraint
                        tab.t.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(lp.c);
    let usable: Vec<bool> = (0..cols).map(|j| !is_art(j)).collect();
    tab.optimize(&cost, &usable)?;

    let mut x = lo.clone();
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] += tab.rhs(r);
        }
    }
    for (xi, &(l, h)) in x.iter_mut().zip(lp.bounds) {
        *xi = xi.clamp(l, h);
    }
    let objective = x.iter().zip(lp.c).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(
        c: &[f64],
        a_eq: &[Vec<f64>],
        b_eq: &[f64],
        a_ub: &[Vec<f64>],
        b_ub: &[f64],
        bounds: &[(f64, f64)],
    ) -> Result<LpSolution, LpError> {
        solve(&StandardLp {
            c,
            a_eq,
            b_eq,
            a_ub,
            b_ub,
            bounds,
        })
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let s = run(
            &[-3.0, -5.0],
            &[],
            &[],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
            &[(0.0, f64::INFINITY); 2],
        )
        .unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        assert!((s.objective + 36.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min x + y s.t. x + y = 2, -x <= -1.5 (x >= 1.5), y <= 10
        let s = run(
            &[1.0, 2.0],
            &[vec![1.0, 1.0]],
            &[2.0],
            &[vec![-1.0, 0.0]],
            &[-1.5],
            &[(0.0, 10.0); 2],
        )
        .unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-9 && s.x[1].abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let inf = run(
            &[1.0],
            &[vec![1.0]],
            &[2.0],
            &[],
            &[],
            &[(0.0, 1.0)],
        );
        assert_eq!(inf.unwrap_err(), LpError::Infeasible);
        let unb = run(&[-1.0], &[], &[], &[], &[], &[(0.0, f64::INFINITY)]);
        assert_eq!(unb.unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let s = run(
            &[1.0, 1.0],
            &[vec![1.0, 1.0], vec![2.0, 2.0]],
            &[1.0, 2.0],
            &[],
            &[],
            &[(0.0, 1.0); 2],
        )
        .unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_lower_bounds() {
        let s = run(&[1.0], &[], &[], &[], &[], &[(0.25, 3.0)]).unwrap();
        assert_eq!(s.x, [0.25]);
    }
}
