//! The shot-distribution linear program.
//!
//! Variables are the fractions `f[i][j]` of shots computer `i` would give
//! map `j`, laid out computer-major. The program minimizes
//! `sum_ij f[i][j] * TVD[i][j]` subject to each computer's fractions summing to
//! one and, for every ordered pair of computers `(i, j)`,
//!
//! ```text
//!  TVD_j - (1 + eps) * TVD_i <= 0
//! -TVD_j + TVD_i / (1 + eps) <= 0
//! ```
//!
//! where `TVD_i = sum_j f[i][j] * TVD[i][j]` is computer `i`'s expected TVD.

mod apportion;
pub mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use apportion::{allocate_shots, equal_split};
pub use simplex::LpSolution;

/// Entries below this are raised to it before building the program, so no
/// computer's expected TVD can sit at exactly zero.
pub const TVD_FLOOR: f64 = 1e-6;

/// Number of times `plan` relaxes epsilon after an infeasible solve.
pub const EPSILON_RETRIES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("invalid TVD matrix: {0}")]
    InvalidMatrix(String),
    #[error("still infeasible after relaxing epsilon to {epsilon}")]
    InfeasibleAfterRetries { epsilon: f64 },
}

/// Predicted TVDs, one row per computer and one column per map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvdMatrix {
    pub values: Vec<Vec<f64>>,
    #[serde(default)]
    pub computers: Vec<String>,
    #[serde(default)]
    pub maps: Vec<String>,
}

impl TvdMatrix {
    pub fn new(values: Vec<Vec<f64>>) -> Self {
        let computers = (0..values.len()).map(|i| format!("comp{}", i + 1)).collect();
        let m = values.first().map_or(0, Vec::len);
        let maps = (0..m).map(|j| format!("map{j}")).collect();
        Self {
            values,
            computers,
            maps,
        }
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn m(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let bad = |msg: String| Err(LpError::InvalidMatrix(msg));
        if self.k() < 2 {
            return bad(format!("need at least 2 computers, got {}", self.k()));
        }
        if self.m() == 0 {
            return bad("need at least one map".into());
        }
        if self.values.iter().any(|r| r.len() != self.m()) {
            return bad("rows have different lengths".into());
        }
        if self.values.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("entries must be finite and non-negative".into());
        }
        if !self.computers.is_empty() && self.computers.len() != self.k() {
            return bad("computer labels do not match rows".into());
        }
        if !self.maps.is_empty() && self.maps.len() != self.m() {
            return bad("map labels do not match columns".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpConfig {
    pub epsilon: f64,
    /// Row of the computer that will actually run the shots.
    pub target_computer: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            target_computer: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpProblem {
    pub k: usize,
    pub m: usize,
    pub c: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

/// Assembles `c`, `A_eq`, `b_eq`, `A_ub`, `b_ub` and the `[0, 1]` bounds.
///
/// Inequality rows come in pairs per ordered computer pair `(i, j)`, `i`
/// outer, `j` inner, skipping `i == j`.
pub fn build_lp(t: &TvdMatrix, cfg: &LpConfig) -> Result<LpProblem, LpError> {
    t.validate()?;
    if cfg.epsilon < 0.0 || !cfg.epsilon.is_finite() {
        return Err(LpError::InvalidMatrix(format!(
            "epsilon must be >= 0, got {}",
            cfg.epsilon
        )));
    }
    let (k, m) = (t.k(), t.m());
    let tvd: Vec<Vec<f64>> = t
        .values
        .iter()
        .map(|r| r.iter().map(|v| v.max(TVD_FLOOR)).collect())
        .collect();
    let c: Vec<f64> = tvd.iter().flatten().copied().collect();

    let a_eq: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row = vec![0.0; k * m];
            row[i * m..(i + 1) * m].fill(1.0);
            row
        })
        .collect();

    let up = 1.0 + cfg.epsilon;
    let mut a_ub = Vec::with_capacity(2 * k * (k - 1));
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let mut upper = vec![0.0; k * m];
            let mut lower = vec![0.0; k * m];
            for col in 0..m {
                upper[i * m + col] = -up * tvd[i][col];
                upper[j * m + col] = tvd[j][col];
                lower[i * m + col] = tvd[i][col] / up;
                lower[j * m + col] = -tvd[j][col];
            }
            a_ub.push(upper);
            a_ub.push(lower);
        }
    }
    Ok(LpProblem {
        k,
        m,
        c,
        a_eq,
        b_eq: vec![1.0; k],
        b_ub: vec![0.0; a_ub.len()],
        a_ub,
        bounds: vec![(0.0, 1.0); k * m],
    })
}

pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    simplex::solve(&simplex::StandardLp {
        c: &p.c,
        a_eq: &p.a_eq,
        b_eq: &p.b_eq,
        a_ub: &p.a_ub,
        b_ub: &p.b_ub,
        bounds: &p.bounds,
    })
}

/// Solved shot distribution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShotPlan {
    pub computers: Vec<String>,
    pub maps: Vec<String>,
    pub target_computer: usize,
    /// `k x m`, each row sums to one.
    pub fractions: Vec<Vec<f64>>,
    /// Integer shots per map on the target computer.
    pub shots: Vec<u64>,
    /// Expected TVD per computer under `fractions`.
    pub equalized_tvd: Vec<f64>,
    pub objective: f64,
    pub epsilon_requested: f64,
    pub epsilon_used: f64,
    /// Every epsilon tried, in order.
    pub epsilon_attempts: Vec<f64>,
}

fn next_epsilon(eps: f64) -> f64 {
    (2.0 * eps).max(0.01)
}

/// Builds, solves and apportions. On infeasibility epsilon is doubled (from
/// at least 0.01) up to [`EPSILON_RETRIES`] times.
pub fn plan(t: &TvdMatrix, cfg: &LpConfig, total_shots: u64) -> Result<ShotPlan, LpError> {
    t.validate()?;
    if cfg.target_computer >= t.k() {
        return Err(LpError::InvalidMatrix(format!(
            "target computer {} out of range",
            cfg.target_computer
        )));
    }
    let mut eps = cfg.epsilon;
    let mut attempts = Vec::new();
    let solution = loop {
        attempts.push(eps);
        let problem = build_lp(t, &LpConfig { epsilon: eps, ..*cfg })?;
        match solve_lp(&problem) {
            Ok(s) => break s,
            Err(LpError::Infeasible) if attempts.len() <= EPSILON_RETRIES => {
                eps = next_epsilon(eps);
            }
            Err(LpError::Infeasible) => {
                return Err(LpError::InfeasibleAfterRetries { epsilon: eps })
            }
            Err(e) => return Err(e),
        }
    };

    let (k, m) = (t.k(), t.m());
    let fractions: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let row = &solution.x[i * m..(i + 1) * m];
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    let equalized_tvd = fractions
        .iter()
        .zip(&t.values)
        .map(|(f, v)| f.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect();
    let labels = |given: &[String], n: usize, prefix: &str| -> Vec<String> {
        if given.len() == n {
            given.to_vec()
        } else {
            (0..n).map(|i| format!("{prefix}{i}")).collect()
        }
    };
    Ok(ShotPlan {
        computers: labels(&t.computers, k, "comp"),
        maps: labels(&t.maps, m, "map"),
        target_computer: cfg.target_computer,
        shots: allocate_shots(&fractions[cfg.target_computer], total_shots),
        fractions,
        equalized_tvd,
        objective: solution.objective,
        epsilon_requested: cfg.epsilon,
        epsilon_used: eps,
        epsilon_attempts: attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> TvdMatrix {
        TvdMatrix::new(vec![vec![0.12, 0.22], vec![0.18, 0.14]])
    }

    #[test]
    fn worked_example_matrices() {
        let eps = 0.0;
        let p = build_lp(&worked(), &LpConfig { epsilon: eps, target_computer: 0 }).unwrap();
        assert_eq!(p.c, [0.12, 0.22, 0.18, 0.14]);
        assert_eq!(p.a_eq, [vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0]]);
        assert_eq!(p.b_eq, [1.0, 1.0]);
        assert_eq!(
            p.a_ub,
            [
                vec![-0.12, -0.22, 0.18, 0.14],
                vec![0.12, 0.22, -0.18, -0.14],
                vec![0.12, 0.22, -0.18, -0.14],
                vec![-0.12, -0.22, 0.18, 0.14],
            ]
        );
        assert_eq!(p.b_ub, [0.0; 4]);
    }

    #[test]
    fn worked_example_matrices_with_tolerance() {
        let e: f64 = 0.25;
        let p = build_lp(&worked(), &LpConfig { epsilon: e, target_computer: 0 }).unwrap();
        let u = 1.0 + e;
        let want = [
            [-u * 0.12, -u * 0.22, 0.18, 0.14],
            [0.12 / u, 0.22 / u, -0.18, -0.14],
            [0.12, 0.22, -u * 0.18, -u * 0.14],
            [-0.12, -0.22, 0.18 / u, 0.14 / u],
        ];
        for (row, w) in p.a_ub.iter().zip(want) {
            for (a, b) in row.iter().zip(w) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_map_and_three_computers_shapes() {
        let t = TvdMatrix::new(vec![vec![0.3], vec![0.2]]);
        let p = build_lp(&t, &LpConfig { epsilon: 0.1, target_computer: 0 }).unwrap();
        assert_eq!(p.a_ub.len(), 4);
        assert!((p.a_ub[0][0] + 1.1 * 0.3).abs() < 1e-15 && p.a_ub[0][1] == 0.2);

        let t = TvdMatrix::new(vec![vec![0.1, 0.2], vec![0.2, 0.3], vec![0.3, 0.1]]);
        let p = build_lp(&t, &LpConfig::default()).unwrap();
        assert_eq!(p.a_eq.len(), 3);
        assert_eq!(p.a_ub.len(), 12);
        for (i, row) in p.a_eq.iter().enumerate() {
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 2);
            assert_eq!(row[2 * i], 1.0);
        }
    }

    #[test]
    fn solves_worked_example() {
        let p = build_lp(&worked(), &LpConfig { epsilon: 0.0, target_computer: 0 }).unwrap();
        let s = solve_lp(&p).unwrap();
        for (a, b) in s.x.iter().zip([0.8, 0.2, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-9, "{:?}", s.x);
        }
        assert!((s.objective - 0.28).abs() < 1e-12);
    }

    #[test]
    fn plan_worked_example() {
        let plan = plan(&worked(), &LpConfig { epsilon: 0.0, target_computer: 0 }, 32_000).unwrap();
        assert_eq!(plan.shots, [25_600, 6_400]);
        for v in &plan.equalized_tvd {
            assert!((v - 0.14).abs() < 1e-9);
        }
        assert_eq!(plan.epsilon_used, 0.0);
    }

    #[test]
    fn identical_rows_take_the_row_minimum() {
        let t = TvdMatrix::new(vec![vec![0.3, 0.1, 0.2], vec![0.3, 0.1, 0.2]]);
        let plan = plan(&t, &LpConfig { epsilon: 0.0, target_computer: 1 }, 100).unwrap();
        assert!((plan.objective - 0.2).abs() < 1e-12);
        assert_eq!(plan.shots, [0, 100, 0]);
    }

    #[test]
    fn single_map_gets_all_shots() {
        let t = TvdMatrix::new(vec![vec![0.3], vec![0.31]]);
        let plan = plan(&t, &LpConfig::default(), 999).unwrap();
        assert_eq!(plan.shots, [999]);
    }

    #[test]
    fn escalation_recovers_when_possible() {
        // ranges [0.10, 0.12] vs [0.125, 0.2] need eps >= 0.125/0.12 - 1
        let t = TvdMatrix::new(vec![vec![0.10, 0.12], vec![0.125, 0.2]]);
        let plan = plan(&t, &LpConfig { epsilon: 0.0, target_computer: 0 }, 10).unwrap();
        assert_eq!(plan.epsilon_attempts, [0.0, 0.01, 0.02, 0.04, 0.08]);
        assert_eq!(plan.epsilon_used, 0.08);
        let (a, b) = (plan.equalized_tvd[0], plan.equalized_tvd[1]);
        assert!(a.max(b) / a.min(b) <= 1.08 + 1e-9);
    }

    #[test]
    fn escalation_gives_up_on_dominated_rows() {
        let row = [1.0, 2.0, 3.0];
        let t = TvdMatrix::new(vec![
            row.iter().map(|v| 0.01 * v).collect(),
            row.iter().map(|v| 0.5 * v).collect(),
        ]);
        let err = plan(&t, &LpConfig { epsilon: 0.01, target_computer: 0 }, 10).unwrap_err();
        assert_eq!(err, LpError::InfeasibleAfterRetries { epsilon: 0.16 });
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(TvdMatrix::new(vec![vec![0.1]]).validate().is_err());
        assert!(TvdMatrix::new(vec![vec![0.1], vec![-0.1]]).validate().is_err());
        assert!(TvdMatrix::new(vec![vec![0.1, 0.2], vec![0.1]]).validate().is_err());
        let t = worked();
        assert!(plan(&t, &LpConfig { epsilon: 0.1, target_computer: 2 }, 10).is_err());
    }

    #[test]
    fn zero_rows_are_floored() {
        let t = TvdMatrix::new(vec![vec![0.0, 0.0], vec![0.0, 0.5]]);
        let plan = plan(&t, &LpConfig::default(), 10).unwrap();
        assert_eq!(plan.shots.iter().sum::<u64>(), 10);
        assert!(plan.equalized_tvd[1] <= 1.1 * TVD_FLOOR + 1e-12);
    }
}
