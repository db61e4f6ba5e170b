//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Only small problems arise here (cone-membership tests, Slater checks and
//! the linear subproblems of Frank–Wolfe), so a full tableau is used.

use serde::{Deserialize, Serialize};

use super::matrix::{norm_inf, Matrix};
use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;

/// Sign restriction on an LP variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarBound {
    /// `x ≥ 0`.
    NonNeg,
    /// Unrestricted in sign.
    Free,
}

/// Find `x` with `a_eq · x = b_eq` subject to per-variable sign restrictions.
#[derive(Debug, Clone)]
pub struct LpFeasibilityProblem {
    pub a_eq: Matrix,
    pub b_eq: Vec<f64>,
    pub lower_bounds: Vec<VarBound>,
}

impl LpFeasibilityProblem {
    pub fn new(a_eq: Matrix, b_eq: Vec<f64>, lower_bounds: Vec<VarBound>) -> Result<Self> {
        if a_eq.rows() != b_eq.len() {
            return Err(Error::Dimension(format!(
                "{} equality rows but {} right-hand sides",
                a_eq.rows(),
                b_eq.len()
            )));
        }
        if a_eq.cols() != lower_bounds.len() {
            return Err(Error::Dimension(format!(
                "{} columns but {} variable bounds",
                a_eq.cols(),
                lower_bounds.len()
            )));
        }
        if a_eq.as_slice().iter().chain(&b_eq).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite LP data".into()));
        }
        Ok(Self {
            a_eq,
            b_eq,
            lower_bounds,
        })
    }

    /// All variables nonnegative.
    pub fn nonneg(a_eq: Matrix, b_eq: Vec<f64>) -> Result<Self> {
        let q = a_eq.cols();
        Self::new(a_eq, b_eq, vec![VarBound::NonNeg; q])
    }

    /// `‖a_eq·x − b_eq‖_∞`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let ax = self.a_eq.mul_vec(x);
        ax.iter()
            .zip(&self.b_eq)
            .fold(0.0, |acc, (l, r)| acc.max((l - r).abs()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    /// Largest phase-1 objective (total artificial mass) accepted as feasible.
    pub feas_tol: f64,
    /// Pivot cap; `None` means `10·(p+q)²`.
    pub max_pivots: Option<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            max_pivots: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpVerdict {
    Feasible(Vec<f64>),
    Infeasible,
}

impl LpVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpVerdict::Feasible(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// Phase-1 feasibility test with default options.
pub fn lp_feasible(problem: &LpFeasibilityProblem) -> Result<LpVerdict> {
    lp_feasible_with(problem, &LpOptions::default())
}

pub fn lp_feasible_with(problem: &LpFeasibilityProblem, opts: &LpOptions) -> Result<LpVerdict> {
    let mut tab = Tableau::phase_one(problem, opts)?;
    tab.run()?;
    if tab.phase_one_value() > opts.feas_tol {
        return Ok(LpVerdict::Infeasible);
    }
    Ok(LpVerdict::Feasible(tab.solution(problem)))
}

/// Maximizes `cᵀx` over the feasible set of `problem`.
pub fn lp_maximize(
    problem: &LpFeasibilityProblem,
    c: &[f64],
    opts: &LpOptions,
) -> Result<LpOutcome> {
    if c.len() != problem.a_eq.cols() {
        return Err(Error::Dimension(format!(
            "objective has {} entries for {} variables",
            c.len(),
            problem.a_eq.cols()
        )));
    }
    let mut tab = Tableau::phase_one(problem, opts)?;
    tab.run()?;
    if tab.phase_one_value() > opts.feas_tol {
        return Ok(LpOutcome::Infeasible);
    }
    tab.start_phase_two(c);
    if !tab.run()? {
        return Ok(LpOutcome::Unbounded);
    }
    let x = tab.solution(problem);
    let value = x.iter().zip(c).map(|(a, b)| a * b).sum();
    Ok(LpOutcome::Optimal { x, value })
}

struct Tableau {
    /// Rows `0..p` are constraints; the last column is the right-hand side.
    t: Matrix,
    /// Reduced costs (minimization form), one per column, plus objective slot.
    cost: Vec<f64>,
    basis: Vec<usize>,
    /// Number of structural columns (free variables split in two).
    structural: usize,
    /// Columns that may enter the basis.
    allowed: usize,
    /// Map from original variable to (positive column, optional negative column).
    columns: Vec<(usize, Option<usize>)>,
    pivots: usize,
    max_pivots: usize,
    dropped: Vec<bool>,
}

impl Tableau {
    fn phase_one(problem: &LpFeasibilityProblem, opts: &LpOptions) -> Result<Self> {
        let p = problem.a_eq.rows();
        let mut columns = Vec::with_capacity(problem.lower_bounds.len());
        let mut structural = 0;
        for bound in &problem.lower_bounds {
            match bound {
                VarBound::NonNeg => {
                    columns.push((structural, None));
                    structural += 1;
                }
                VarBound::Free => {
                    columns.push((structural, Some(structural + 1)));
                    structural += 2;
                }
            }
        }
        let width = structural + p + 1;
        let mut t = Matrix::zeros(p, width);
        for i in 0..p {
            let sign = if problem.b_eq[i] < 0.0 { -1.0 } else { 1.0 };
            for (j, &(pos, neg)) in columns.iter().enumerate() {
                let a = sign * problem.a_eq[(i, j)];
                t[(i, pos)] = a;
                if let Some(neg) = neg {
                    t[(i, neg)] = -a;
                }
            }
            t[(i, structural + i)] = 1.0;
            t[(i, width - 1)] = sign * problem.b_eq[i];
        }
        // Phase-1 costs: 1 on artificials, reduced against the artificial basis.
        let mut cost = vec![0.0; width];
        for i in 0..p {
            for j in 0..structural {
                cost[j] -= t[(i, j)];
            }
            cost[width - 1] -= t[(i, width - 1)];
        }
        let q = problem.lower_bounds.len();
        let max_pivots = opts.max_pivots.unwrap_or(10 * (p + q) * (p + q)).max(1);
        Ok(Self {
            t,
            cost,
            basis: (structural..structural + p).collect(),
            structural,
            allowed: structural,
            columns,
            pivots: 0,
            max_pivots,
            dropped: vec![false; p],
        })
    }

    fn width(&self) -> usize {
        self.t.cols()
    }

    fn phase_one_value(&self) -> f64 {
        (0..self.basis.len())
            .filter(|&i| self.basis[i] >= self.structural && !self.dropped[i])
            .map(|i| self.t[(i, self.width() - 1)].max(0.0))
            .sum()
    }

    /// Pivots to optimality. Returns `false` if the problem is unbounded.
    fn run(&mut self) -> Result<bool> {
        let rhs = self.width() - 1;
        loop {
            // Bland: lowest-index improving column.
            let scale = 1.0 + norm_inf(&self.cost[..self.allowed]);
            let entering = (0..self.allowed).find(|&j| self.cost[j] < -COST_EPS * scale);
            let Some(col) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.basis.len() {
                if self.dropped[i] {
                    continue;
                }
                let a = self.t[(i, col)];
                if a > PIVOT_EPS {
                    let ratio = self.t[(i, rhs)].max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-15
                                || ((ratio - br).abs() <= 1e-15 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Ok(false);
            };
            self.pivot(row, col)?;
        }
    }

    fn pivot(&mut self, row: usize, col: usize) -> Result<()> {
        self.pivots += 1;
        if self.pivots > self.max_pivots {
            return Err(Error::IterationCap(self.max_pivots));
        }
        let w = self.width();
        let p = self.t[(row, col)];
        for j in 0..w {
            self.t[(row, j)] /= p;
        }
        self.t[(row, col)] = 1.0;
        for i in 0..self.basis.len() {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..w {
                let v = self.t[(row, j)];
                if v != 0.0 {
                    self.t[(i, j)] -= f * v;
                }
            }
            self.t[(i, col)] = 0.0;
        }
        let f = self.cost[col];
        if f != 0.0 {
            for j in 0..w {
                let v = self.t[(row, j)];
                if v != 0.0 {
                    self.cost[j] -= f * v;
                }
            }
            self.cost[col] = 0.0;
        }
        self.basis[row] = col;
        Ok(())
    }

    fn start_phase_two(&mut self, c: &[f64]) {
        // Drive remaining artificials out of the basis, or drop redundant rows.
        for i in 0..self.basis.len() {
            if self.basis[i] < self.structural {
                continue;
            }
            let candidate = (0..self.structural)
                .filter(|&j| self.t[(i, j)].abs() > 1e-9)
                .max_by(|&a, &b| self.t[(i, a)].abs().total_cmp(&self.t[(i, b)].abs()));
            match candidate {
                Some(j) => {
                    // Degenerate pivot; the artificial is at (numerically) zero.
                    let rhs = self.width() - 1;
                    self.t[(i, rhs)] = self.t[(i, rhs)].max(0.0);
                    let _ = self.pivot(i, j);
                }
                None => self.dropped[i] = true,
            }
        }
        // Minimize -cᵀx over the structural columns.
        let w = self.width();
        let mut cost = vec![0.0; w];
        for (j, &(pos, neg)) in self.columns.iter().enumerate() {
            cost[pos] = -c[j];
            if let Some(neg) = neg {
                cost[neg] = c[j];
            }
        }
        let basic_cost: Vec<f64> = self
            .basis
            .iter()
            .map(|&b| if b < self.structural { cost[b] } else { 0.0 })
            .collect();
        for (i, &cb) in basic_cost.iter().enumerate() {
            if cb == 0.0 || self.dropped[i] {
                continue;
            }
            for j in 0..w {
                cost[j] -= cb * self.t[(i, j)];
            }
        }
        self.cost = cost;
        self.allowed = self.structural;
    }

    fn solution(&self, problem: &LpFeasibilityProblem) -> Vec<f64> {
        let rhs = self.width() - 1;
        let mut values = vec![0.0; self.structural];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.structural && !self.dropped[i] {
                values[b] = self.t[(i, rhs)].max(0.0);
            }
        }
        self.columns
            .iter()
            .take(problem.lower_bounds.len())
            .map(|&(pos, neg)| values[pos] - neg.map_or(0.0, |n| values[n]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn simplex_feasible() {
        let p = LpFeasibilityProblem::nonneg(mat(&[vec![1.0, 1.0]]), vec![1.0]).unwrap();
        let LpVerdict::Feasible(x) = lp_feasible(&p).unwrap() else {
            panic!("expected feasible");
        };
        assert!(p.residual(&x) <= 1e-8);
        assert!(x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn negative_sum_infeasible() {
        let p = LpFeasibilityProblem::nonneg(mat(&[vec![1.0, 1.0]]), vec![-1.0]).unwrap();
        assert_eq!(lp_feasible(&p).unwrap(), LpVerdict::Infeasible);
    }

    #[test]
    fn free_variable_can_go_negative() {
        let p = LpFeasibilityProblem::new(
            mat(&[vec![1.0, 1.0]]),
            vec![-1.0],
            vec![VarBound::Free, VarBound::NonNeg],
        )
        .unwrap();
        let LpVerdict::Feasible(x) = lp_feasible(&p).unwrap() else {
            panic!("expected feasible");
        };
        assert!(p.residual(&x) <= 1e-8);
        assert!(x[0] < 0.0);
    }

    #[test]
    fn single_state_cone_membership_system() {
        // η(1−γ)·1₂ + c·[0,1] = [0.386, 1.288], η free, c ≥ 0; γ = 0.5.
        let g = 0.5;
        let p = LpFeasibilityProblem::new(
            mat(&[vec![1.0 - g, 0.0], vec![1.0 - g, 1.0]]),
            vec![0.386, 1.288],
            vec![VarBound::Free, VarBound::NonNeg],
        )
        .unwrap();
        let LpVerdict::Feasible(x) = lp_feasible(&p).unwrap() else {
            panic!("expected feasible");
        };
        assert!((x[1] - 0.902).abs() < 1e-9);
        assert!(p.residual(&x) <= 1e-8);
    }

    #[test]
    fn iteration_cap_is_distinct() {
        let p = LpFeasibilityProblem::nonneg(
            mat(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 1.0]]),
            vec![3.0, 2.0],
        )
        .unwrap();
        let opts = LpOptions {
            max_pivots: Some(1),
            ..LpOptions::default()
        };
        assert!(matches!(lp_feasible_with(&p, &opts), Err(Error::IterationCap(1))));
    }

    #[test]
    fn redundant_rows_are_fine() {
        let p = LpFeasibilityProblem::nonneg(
            mat(&[vec![1.0, 1.0], vec![2.0, 2.0]]),
            vec![1.0, 2.0],
        )
        .unwrap();
        let out = lp_maximize(&p, &[1.0, 3.0], &LpOptions::default()).unwrap();
        let LpOutcome::Optimal { x, value } = out else {
            panic!("expected optimum, got {out:?}");
        };
        assert!((value - 3.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximize_small_lp() {
        // max x + 2y, x + y + s1 = 4, y + s2 = 3.
        let p = LpFeasibilityProblem::nonneg(
            mat(&[vec![1.0, 1.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]]),
            vec![4.0, 3.0],
        )
        .unwrap();
        let LpOutcome::Optimal { x, value } =
            lp_maximize(&p, &[1.0, 2.0, 0.0, 0.0], &LpOptions::default()).unwrap()
        else {
            panic!()
        };
        assert!((value - 7.0).abs() < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_and_infeasible_outcomes() {
        let p = LpFeasibilityProblem::nonneg(mat(&[vec![1.0, -1.0]]), vec![0.0]).unwrap();
        assert_eq!(
            lp_maximize(&p, &[1.0, 0.0], &LpOptions::default()).unwrap(),
            LpOutcome::Unbounded
        );
        let p = LpFeasibilityProblem::nonneg(mat(&[vec![1.0, 1.0]]), vec![-1.0]).unwrap();
        assert_eq!(
            lp_maximize(&p, &[1.0, 0.0], &LpOptions::default()).unwrap(),
            LpOutcome::Infeasible
        );
    }

    #[test]
    fn planted_solutions_are_always_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let p = rng.gen_range(1..7);
            let q = rng.gen_range(1..10);
            let a = Matrix::from_fn(p, q, |_, _| rng.gen_range(-1.0..1.0));
            let bounds: Vec<VarBound> = (0..q)
                .map(|_| if rng.gen_bool(0.3) { VarBound::Free } else { VarBound::NonNeg })
                .collect();
            let x0: Vec<f64> = bounds
                .iter()
                .map(|b| match b {
                    VarBound::Free => rng.gen_range(-2.0..2.0),
                    VarBound::NonNeg => {
                        if rng.gen_bool(0.3) {
                            0.0
                        } else {
                            rng.gen_range(0.0..2.0)
                        }
                    }
                })
                .collect();
            let b = a.mul_vec(&x0);
            let prob = LpFeasibilityProblem::new(a, b, bounds.clone()).unwrap();
            match lp_feasible(&prob).unwrap() {
                LpVerdict::Feasible(x) => {
                    assert!(prob.residual(&x) <= 1e-8, "residual {}", prob.residual(&x));
                    for (v, bd) in x.iter().zip(&bounds) {
                        if *bd == VarBound::NonNeg {
                            assert!(*v >= 0.0);
                        }
                    }
                }
                LpVerdict::Infeasible => panic!("planted solution missed"),
            }
        }
    }
}
