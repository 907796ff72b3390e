//! Dense two-phase primal simplex.
//!
//! Problems are `minimize c'x` subject to rows `a'x {<=,=,>=} b` and
//! per-variable bounds `lo <= x <= hi` (`lo` finite, `hi` may be infinite).
//! Bounds are shifted out (`x = lo + y`), finite upper bounds become rows,
//! and every row is equilibrated to unit max-abs before pivoting. Pivoting
//! uses Bland's rule throughout, so the pivot sequence is deterministic and
//! cannot cycle.

use thiserror::Error;

/// Constraint violation tolerated in an optimal point.
pub const FEAS_TOL: f64 = 1e-7;
/// Smallest tableau entry accepted as a pivot.
pub const PIVOT_TOL: f64 = 1e-10;
/// Reduced-cost threshold for optimality.
pub const OPT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("row {row} has {found} coefficients, expected {expected}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("bounds list has {found} entries, expected {expected}")]
    BoundsMismatch { expected: usize, found: usize },
    #[error("variable {var} has invalid bounds [{lo}, {hi}]")]
    InvalidBounds { var: usize, lo: f64, hi: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("degenerate pivot: {0}")]
    DegeneratePivot(String),
}

impl LinearProgram {
    /// A program over `objective.len()` variables, each bounded to `[0, inf)`.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) -> &mut Self {
        self.bounds[var] = (lo, hi);
        self
    }

    pub fn check(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(LpError::BoundsMismatch {
                expected: n,
                found: self.bounds.len(),
            });
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective".into()));
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::DimensionMismatch {
                    row,
                    expected: n,
                    found: c.coeffs.len(),
                });
            }
            if c.coeffs.iter().any(|a| !a.is_finite()) || !c.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("constraint {row}")));
            }
        }
        for (var, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || hi.is_nan() || lo > hi {
                return Err(LpError::InvalidBounds { var, lo, hi });
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x));
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Reduced costs, with the negated objective value in the last slot.
    cost: Vec<f64>,
    width: usize,
    iterations: usize,
    max_iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[j] = 0.0;
            }
        }
        let f = self.cost[j];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[j] = 0.0;
        }
        self.basis[r] = j;
    }

    /// Runs Bland-rule iterations over columns `0..allowed`.
    fn run(&mut self, allowed: usize) -> Result<Step, LpError> {
        loop {
            let Some(j) = (0..allowed).find(|&j| self.cost[j] < -OPT_TOL) else {
                return Ok(Step::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][j];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = 1e-12 * br.abs().max(1.0);
                        if ratio < br - tie || (ratio <= br + tie && self.basis[i] < self.basis[bi])
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Step::Unbounded);
            };
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(LpError::DegeneratePivot(format!(
                    "no progress after {} pivots",
                    self.max_iterations
                )));
            }
            self.pivot(r, j);
        }
    }
}

fn infeasible(n: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        x: vec![0.0; n],
        objective_value: f64::NAN,
    }
}

/// Solves `lp` with the two-phase simplex method.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.check()?;
    let n = lp.num_vars();

    // Shift bounds out and collect equilibrated rows with nonnegative rhs.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    let shifted = |c: &Constraint| -> f64 {
        c.rhs
            - c.coeffs
                .iter()
                .zip(&lp.bounds)
                .map(|(a, (lo, _))| a * lo)
                .sum::<f64>()
    };
    let mut raw: Vec<(Vec<f64>, Relation, f64)> = lp
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.relation, shifted(c)))
        .collect();
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if hi.is_finite() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            raw.push((a, Relation::Le, hi - lo));
        }
    }
    for (mut a, mut rel, mut b) in raw {
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            let ok = match rel {
                Relation::Le => b >= -FEAS_TOL,
                Relation::Ge => b <= FEAS_TOL,
                Relation::Eq => b.abs() <= FEAS_TOL,
            };
            if !ok {
                return Ok(infeasible(n));
            }
            continue;
        }
        a.iter_mut().for_each(|v| *v /= scale);
        b /= scale;
        if b < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
            b = -b;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        rows.push((a, rel, b));
    }

    // Column layout: structural | slack/surplus | artificial.
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let art_start = n + n_slack;
    let width = art_start + n_art;

    let mut tab = Tableau {
        rows: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        cost: vec![0.0; width + 1],
        width,
        iterations: 0,
        max_iterations: 10_000 + 200 * (m + width),
    };
    let (mut next_slack, mut next_art) = (n, art_start);
    for (a, rel, b) in rows {
        let mut row = vec![0.0; width + 1];
        row[..n].copy_from_slice(&a);
        row[width] = b;
        match rel {
            Relation::Le => {
                row[next_slack] = 1.0;
                tab.basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = -1.0;
                next_slack += 1;
                row[next_art] = 1.0;
                tab.basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = 1.0;
                tab.basis.push(next_art);
                next_art += 1;
            }
        }
        tab.rows.push(row);
    }

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        for j in art_start..width {
            tab.cost[j] = 1.0;
        }
        for i in 0..m {
            if tab.basis[i] >= art_start {
                for j in 0..=width {
                    tab.cost[j] -= tab.rows[i][j];
                }
            }
        }
        tab.run(width)?;
        if -tab.cost[width] > FEAS_TOL {
            return Ok(infeasible(n));
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= art_start {
                match (0..art_start).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL) {
                    Some(j) => {
                        tab.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    // Phase 2 on the original objective, normalized so OPT_TOL is relative.
    let c_scale = lp.objective.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let c_scale = if c_scale > 0.0 { c_scale } else { 1.0 };
    let mut cost = vec![0.0; width + 1];
    cost[..n].copy_from_slice(&lp.objective);
    cost[..n].iter_mut().for_each(|v| *v /= c_scale);
    for i in 0..tab.rows.len() {
        let cb = if tab.basis[i] < n {
            cost[tab.basis[i]]
        } else {
            0.0
        };
        if cb != 0.0 {
            for (c, &a) in cost.iter_mut().zip(&tab.rows[i]) {
                *c -= cb * a;
            }
        }
    }
    // Basic columns carry exactly zero reduced cost.
    for &b in &tab.basis {
        cost[b] = 0.0;
    }
    tab.cost = cost;
    if let Step::Unbounded = tab.run(art_start)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![0.0; n],
            objective_value: f64::NEG_INFINITY,
        });
    }

    let mut x: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] += tab.rhs(i).max(0.0);
        }
    }
    for (v, &(lo, hi)) in x.iter_mut().zip(&lp.bounds) {
        *v = v.clamp(lo, hi);
    }
    let violation = lp.max_violation(&x);
    if violation > FEAS_TOL {
        return Err(LpError::DegeneratePivot(format!(
            "optimal basis violates a constraint by {violation:e}"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective_at(&x),
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_row() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Ge, 1.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_optimum() {
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 0.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.x, vec![0.0]);
    }

    #[test]
    fn textbook_max() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.add_constraint(vec![1.0, 0.0], Relation::Le, 4.0)
            .add_constraint(vec![0.0, 2.0], Relation::Le, 12.0)
            .add_constraint(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = solve(&lp).unwrap();
        assert!((s.objective_value + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_bounds() {
        // min x - y st x + y = 3, x in [1, 2], y in [0, 1.5]
        let mut lp = LinearProgram::new(vec![1.0, -1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 3.0)
            .set_bounds(0, 1.0, 2.0)
            .set_bounds(1, 0.0, 1.5);
        let s = solve(&lp).unwrap();
        assert!((s.x[0] - 1.5).abs() < 1e-9);
        assert!((s.x[1] - 1.5).abs() < 1e-9);
        assert!(s.objective_value.abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Ge, 2.0)
            .add_constraint(vec![1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);

        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_constraint(vec![0.0], Relation::Ge, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0)
            .add_constraint(vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = solve(&lp).unwrap();
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn widely_scaled_rows() {
        // bits vs bits-per-second magnitudes in one program
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_constraint(vec![4e9, 1e9], Relation::Ge, 9.667e7)
            .add_constraint(vec![1e-3, 0.0], Relation::Le, 1e-6);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(lp.max_violation(&s.x) <= FEAS_TOL);
        // x0 is cheaper per unit of coverage but capped at 1e-3; x1 covers the rest
        assert!((s.objective_value - (1e-3 + (9.667e7 - 4e6) / 1e9)).abs() < 1e-9);
    }

    #[test]
    fn dimension_errors() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0], Relation::Ge, 1.0);
        assert_eq!(
            solve(&lp).unwrap_err(),
            LpError::DimensionMismatch {
                row: 0,
                expected: 2,
                found: 1
            }
        );
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.set_bounds(0, 2.0, 1.0);
        assert!(matches!(
            solve(&lp),
            Err(LpError::InvalidBounds { var: 0, .. })
        ));
    }

    #[test]
    fn degenerate_vertex_does_not_cycle() {
        // Beale's cycling example (cycles under Dantzig's rule without anti-cycling).
        let mut lp = LinearProgram::new(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value + 0.05).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn feasible_lp() -> impl Strategy<Value = LinearProgram> {
            (2usize..5, 1usize..5).prop_flat_map(|(n, m)| {
                (
                    prop::collection::vec(-5.0f64..5.0, n),
                    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), m),
                    prop::collection::vec(0.0f64..2.0, n),
                    prop::collection::vec(0.0f64..1.0, m),
                )
                    .prop_map(move |(c, rows, x0, slack)| {
                        let mut lp = LinearProgram::new(c);
                        for (a, s) in rows.into_iter().zip(slack) {
                            let rhs: f64 = a.iter().zip(&x0).map(|(a, x)| a * x).sum::<f64>() + s;
                            lp.add_constraint(a, Relation::Le, rhs);
                        }
                        for j in 0..n {
                            lp.set_bounds(j, 0.0, 4.0);
                        }
                        lp
                    })
            })
        }

        proptest! {
            #[test]
            fn optimal_points_are_feasible(lp in feasible_lp()) {
                let s = solve(&lp).unwrap();
                prop_assert_eq!(s.status, LpStatus::Optimal);
                prop_assert!(lp.max_violation(&s.x) <= FEAS_TOL);
                prop_assert!((s.objective_value - lp.objective_at(&s.x)).abs() <= 1e-9);
            }

            #[test]
            fn deterministic(lp in feasible_lp()) {
                let a = solve(&lp).unwrap();
                let b = solve(&lp).unwrap();
                prop_assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                                b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            }

            #[test]
            fn objective_scaling(lp in feasible_lp(), alpha in 0.01f64..100.0) {
                let base = solve(&lp).unwrap();
                let mut scaled = lp.clone();
                scaled.objective.iter_mut().for_each(|c| *c *= alpha);
                let s = solve(&scaled).unwrap();
                let tol = 1e-7 * (1.0 + base.objective_value.abs()) * alpha.max(1.0);
                prop_assert!((s.objective_value - alpha * base.objective_value).abs() <= tol);
            }
        }
    }
}
