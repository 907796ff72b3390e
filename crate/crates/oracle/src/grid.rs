use holosched_core::model::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ACTIVE: f64 = 1e-6;

/// Shared (non-private) server ids in index order.
pub fn shared_ids(s: &Scenario) -> Vec<usize> {
    s.servers
        .iter()
        .filter(|m| m.private_to.is_none())
        .map(|m| m.id)
        .collect()
}

/// Total latency of `user` with fraction `x[i]` on the i-th shared server
/// and shards gathered on server `integrator`, straight from the raw
/// scenario fields.
pub fn eval_latency(s: &Scenario, user: usize, x: &[f64], integrator: usize) -> f64 {
    let u = &s.users[user];
    let class = &s.classes[u.class];
    let ids = shared_ids(s);
    let t = x.iter().filter(|&&v| v > ACTIVE).count();
    let inflate = 1.0 + s.split_overhead * (t as f64 - 1.0);
    let mut comm = 0.0;
    let mut comp: f64 = 0.0;
    let mut integ = 0.0;
    for (i, &m) in ids.iter().enumerate() {
        if x[i] <= ACTIVE {
            continue;
        }
        comm += x[i] * class.size_bits / u.uplink_bw[&m];
        let mut work = 0.0;
        for &c in &u.ops {
            work += x[i] * class.base_workload[&c] * inflate / s.servers[m].capacity[&(u.class, c)];
        }
        comp = comp.max(work);
        if m != integrator {
            integ += x[i] * class.size_bits / s.links.get(m, integrator).expect("link");
        }
    }
    comm + comp + integ
}

fn compositions(
    total: usize,
    parts: usize,
    prefix: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if parts == 1 {
        prefix.push(total);
        visit(prefix);
        prefix.pop();
        return;
    }
    for first in 0..=total {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, visit);
        prefix.pop();
    }
}

/// Best latency for `user` over every allocation whose fractions are
/// multiples of `step`, trying every active server as integrator.
pub fn grid_min_latency(s: &Scenario, user: usize, step: f64) -> (f64, Vec<f64>, usize) {
    let ids = shared_ids(s);
    let units = (1.0 / step).round() as usize;
    let mut best = (f64::INFINITY, Vec::new(), 0);
    compositions(units, ids.len(), &mut Vec::new(), &mut |c| {
        let x: Vec<f64> = c.iter().map(|&k| k as f64 / units as f64).collect();
        for (i, &m) in ids.iter().enumerate() {
            if x[i] > ACTIVE {
                let l = eval_latency(s, user, &x, m);
                if l < best.0 {
                    best = (l, x.clone(), m);
                }
            }
        }
    });
    best
}

/// Grid estimate of the min-max latency: users share no capacity, so it is
/// the worst user's grid optimum.
pub fn grid_l_max(s: &Scenario, step: f64) -> f64 {
    (0..s.users.len())
        .map(|n| grid_min_latency(s, n, step).0)
        .fold(0.0, f64::max)
}

/// Random heterogeneous instance with `n_servers` servers, `n_users` users,
/// two ops and one class.
pub fn random_instance(seed: u64, n_servers: usize, n_users: usize) -> Scenario {
    use holosched_core::model::{
        ComputeOp, DataClass, InterServerLinks, MecServer, TeleportedUser,
    };
    use std::collections::BTreeMap;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0f0_ac1e);
    let size_bits = rng.gen_range(1e7..2e8);
    let workload = BTreeMap::from([
        (0, rng.gen_range(10.0..80.0)),
        (1, rng.gen_range(10.0..80.0)),
    ]);
    let servers = (0..n_servers)
        .map(|m| {
            MecServer::new(
                m,
                BTreeMap::from([
                    ((0, 0), rng.gen_range(20.0..200.0)),
                    ((0, 1), rng.gen_range(20.0..200.0)),
                ]),
            )
        })
        .collect();
    let users = (0..n_users)
        .map(|n| TeleportedUser {
            id: n,
            class: 0,
            ops: vec![0, 1],
            uplink_bw: (0..n_servers)
                .map(|m| (m, rng.gen_range(5e8..5e9)))
                .collect(),
        })
        .collect();
    let mut links = InterServerLinks::new();
    for a in 0..n_servers {
        for b in (a + 1)..n_servers {
            links.set(a, b, rng.gen_range(1e9..1e10));
        }
    }
    Scenario {
        servers,
        users,
        links,
        classes: vec![DataClass {
            id: 0,
            size_bits,
            base_workload: workload,
        }],
        ops: vec![
            ComputeOp {
                id: 0,
                name: "decode".into(),
            },
            ComputeOp {
                id: 1,
                name: "render".into(),
            },
        ],
        split_overhead: rng.gen_range(0.0..0.15),
        rng_seed: seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use holosched_core::model::fixtures::uniform;

    #[test]
    fn grid_finds_even_split() {
        // 4 identical servers: step 0.25 contains the exact optimum
        let s = uniform(4, 1, 1e6, 40.0, 10.0, 1e9, 1e9);
        let (l, x, _) = grid_min_latency(&s, 0, 0.25);
        assert_eq!(x, vec![0.25; 4]);
        assert!((l - (1e-3 + 1.0 + 0.75e-3)).abs() < 1e-12);
    }

    #[test]
    fn composition_count() {
        let mut n = 0;
        compositions(50, 3, &mut Vec::new(), &mut |_| n += 1);
        assert_eq!(n, 52 * 51 / 2);
    }
}
