use holosched_core::lp::{LinearProgram, Relation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Half-space `a'x <= b`; `tight` rows come from equalities and are always active.
struct HalfSpace {
    a: Vec<f64>,
    b: f64,
    tight: bool,
}

fn half_spaces(lp: &LinearProgram) -> Vec<HalfSpace> {
    let n = lp.num_vars();
    let mut out = Vec::new();
    for c in &lp.constraints {
        match c.relation {
            Relation::Le => out.push(HalfSpace {
                a: c.coeffs.clone(),
                b: c.rhs,
                tight: false,
            }),
            Relation::Ge => out.push(HalfSpace {
                a: c.coeffs.iter().map(|v| -v).collect(),
                b: -c.rhs,
                tight: false,
            }),
            Relation::Eq => out.push(HalfSpace {
                a: c.coeffs.clone(),
                b: c.rhs,
                tight: true,
            }),
        }
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut a = vec![0.0; n];
        a[j] = -1.0;
        out.push(HalfSpace {
            a,
            b: -lo,
            tight: false,
        });
        if hi.is_finite() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            out.push(HalfSpace {
                a,
                b: hi,
                tight: false,
            });
        }
    }
    out
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let p = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[p][col].abs() < 1e-11 {
            return None;
        }
        m.swap(col, p);
        rhs.swap(col, p);
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                let (upper, lower) = m.split_at_mut(r);
                for (x, &p) in lower[0][col..n].iter_mut().zip(&upper[col][col..n]) {
                    *x -= f * p;
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Minimum objective over all basic feasible solutions, with the minimizing
/// vertex. `None` when no vertex is feasible. Exact for programs whose
/// feasible region is bounded.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_vars();
    let spaces = half_spaces(lp);
    let tight: Vec<usize> = (0..spaces.len()).filter(|&i| spaces[i].tight).collect();
    let free: Vec<usize> = (0..spaces.len()).filter(|&i| !spaces[i].tight).collect();
    if tight.len() > n {
        return None;
    }
    let feasible = |x: &[f64]| {
        spaces.iter().all(|h| {
            let lhs: f64 = h.a.iter().zip(x).map(|(a, v)| a * v).sum();
            let tol = 1e-9 * (1.0 + h.b.abs());
            if h.tight {
                (lhs - h.b).abs() <= tol
            } else {
                lhs <= h.b + tol
            }
        })
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(free.len(), n - tight.len(), |pick| {
        let rows: Vec<usize> = tight
            .iter()
            .copied()
            .chain(pick.iter().map(|&i| free[i]))
            .collect();
        let m = rows.iter().map(|&r| spaces[r].a.clone()).collect();
        let rhs = rows.iter().map(|&r| spaces[r].b).collect();
        if let Some(x) = solve_square(m, rhs) {
            if feasible(&x) {
                let obj = lp.objective_at(&x);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, x));
                }
            }
        }
    });
    best
}

/// A random program with 2..=6 variables and 1..=8 rows that is feasible by
/// construction and bounded by a box on every variable.
pub fn random_feasible_lp(seed: u64) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=6);
    let m = rng.gen_range(1..=8);
    let objective = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let mut lp = LinearProgram::new(objective);
    let mut x0 = Vec::with_capacity(n);
    for j in 0..n {
        let lo = if rng.gen_bool(0.2) {
            rng.gen_range(0.0..1.0)
        } else {
            0.0
        };
        let hi = lo + rng.gen_range(2.0..10.0);
        lp.set_bounds(j, lo, hi);
        x0.push(rng.gen_range(lo..hi));
    }
    let mut equalities = 0;
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let at: f64 = a.iter().zip(&x0).map(|(a, x)| a * x).sum();
        let roll: f64 = rng.gen();
        if roll < 0.15 && equalities + 1 < n {
            equalities += 1;
            lp.add_constraint(a, Relation::Eq, at);
        } else if roll < 0.6 {
            let slack = rng.gen_range(0.0..3.0);
            lp.add_constraint(a, Relation::Le, at + slack);
        } else {
            let slack = rng.gen_range(0.0..3.0);
            lp.add_constraint(a, Relation::Ge, at - slack);
        }
    }
    lp
}
