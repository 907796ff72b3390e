use holosched_core::lp::{self, LinearProgram, LpStatus, Relation};
use holosched_core::model::Scenario;

use crate::grid::shared_ids;

#[derive(Clone, Copy)]
struct Choice {
    support: u32,
    integrator: usize,
}

/// Feasibility LP for every user at once: each user restricted to its
/// support, every latency at most `cap`.
fn jointly_feasible(s: &Scenario, ids: &[usize], choices: &[Choice], cap: f64) -> bool {
    let mut cols = 0;
    let layout: Vec<(Vec<(usize, usize)>, usize)> = choices
        .iter()
        .map(|c| {
            let xs: Vec<(usize, usize)> = (0..ids.len())
                .filter(|i| c.support & (1 << i) != 0)
                .map(|i| {
                    cols += 1;
                    (i, cols - 1)
                })
                .collect();
            cols += 1;
            (xs, cols - 1)
        })
        .collect();

    let mut lp = LinearProgram::new(vec![0.0; cols]);
    for ((xs, z), (n, c)) in layout.iter().zip(choices.iter().enumerate()) {
        let u = &s.users[n];
        let class = &s.classes[u.class];
        let t = xs.len();
        let inflate = 1.0 + s.split_overhead * (t as f64 - 1.0);
        let integrator = ids[c.integrator];

        let mut sum = vec![0.0; cols];
        let mut latency = vec![0.0; cols];
        latency[*z] = 1.0;
        for &(i, col) in xs {
            let m = ids[i];
            lp.set_bounds(col, 0.0, 1.0);
            sum[col] = 1.0;
            let mut per_server = vec![0.0; cols];
            per_server[*z] = 1.0;
            let mut work = 0.0;
            for &op in &u.ops {
                work += class.base_workload[&op] / s.servers[m].capacity[&(u.class, op)];
            }
            per_server[col] = -inflate * work;
            lp.add_constraint(per_server, Relation::Ge, 0.0);
            let mut coef = class.size_bits / u.uplink_bw[&m];
            if m != integrator {
                coef += class.size_bits / s.links.get(m, integrator).expect("link");
            }
            latency[col] = coef;
        }
        lp.add_constraint(sum, Relation::Eq, 1.0);
        lp.add_constraint(latency, Relation::Le, cap);
    }
    matches!(lp::solve(&lp), Ok(sol) if sol.status == LpStatus::Optimal)
}

fn choices_per_user(k: usize) -> Vec<Choice> {
    let mut out = Vec::new();
    for support in 1..(1u32 << k) {
        for integrator in (0..k).filter(|i| support & (1 << i) != 0) {
            out.push(Choice {
                support,
                integrator,
            });
        }
    }
    out
}

/// Smallest total split count over every joint support assignment whose
/// joint LP keeps all users at or under `cap`. Exhaustive, so only for a
/// handful of servers and users.
pub fn min_total_splits(s: &Scenario, cap: f64) -> Option<usize> {
    let ids = shared_ids(s);
    let options = choices_per_user(ids.len());
    let n = s.users.len();
    let mut best: Option<usize> = None;
    let mut idx = vec![0usize; n];
    loop {
        let choices: Vec<Choice> = idx.iter().map(|&i| options[i]).collect();
        let splits: usize = choices
            .iter()
            .map(|c| c.support.count_ones() as usize)
            .sum();
        if best.is_none_or(|b| splits < b) && jointly_feasible(s, &ids, &choices, cap) {
            best = Some(splits);
        }
        // odometer
        let mut d = 0;
        loop {
            if d == n {
                return best;
            }
            idx[d] += 1;
            if idx[d] < options.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
