//! Domain types and the per-user latency model.
//!
//! A user's latency is the sum of three terms:
//!
//! * communication: every active shard is uploaded from the user to its
//!   server, `sum_m x_m * s_k / b_{m,n}`;
//! * computation: shards run in parallel, so the slowest active server
//!   dominates, `max_m sum_c x_m * A_{k,c}[t] / p_{k,c,m}`, where the work
//!   grows with the split count as `A[t] = A * (1 + delta * (t - 1))`;
//! * integration: shards not already on the integrating server are moved
//!   there over the inter-server links, `sum_{m != I} x_m * s_k / b_{m,I}`.
//!
//! All quantities are SI: bits, bits/second, operation-units,
//! operation-units/second and seconds.

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use serde::Serialize;
use thiserror::Error;

pub type ServerId = usize;
pub type UserId = usize;
pub type ClassId = usize;
pub type OpId = usize;

/// A fraction at or below this value is not an active split.
pub const SPLIT_EPS: f64 = 1e-6;

/// Tolerance on `sum_m x_m = 1` for an allocation.
pub const FRACTION_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dangling reference: {kind} {id} does not exist{context}")]
    DanglingReference {
        kind: &'static str,
        id: usize,
        context: String,
    },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

impl ModelError {
    fn dangling(kind: &'static str, id: usize) -> Self {
        ModelError::DanglingReference {
            kind,
            id,
            context: String::new(),
        }
    }

    fn dangling_in(kind: &'static str, id: usize, context: impl Into<String>) -> Self {
        ModelError::DanglingReference {
            kind,
            id,
            context: format!(" ({})", context.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataClass {
    pub id: ClassId,
    pub size_bits: f64,
    /// Unsplit work per operation, in operation-units.
    pub base_workload: BTreeMap<OpId, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComputeOp {
    pub id: OpId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MecServer {
    pub id: ServerId,
    /// Processing rate for `(class, op)` in operation-units per second.
    pub capacity: BTreeMap<(ClassId, OpId), f64>,
    /// Jobs already waiting on the server. Only the shortest-queue baseline reads it.
    pub queue_len: u32,
    /// Set for a user's own device modelled as a server. Only that user can
    /// reach it, and it has no uplink from the others.
    pub private_to: Option<UserId>,
}

impl MecServer {
    pub fn new(id: ServerId, capacity: BTreeMap<(ClassId, OpId), f64>) -> Self {
        MecServer {
            id,
            capacity,
            queue_len: 0,
            private_to: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeleportedUser {
    pub id: UserId,
    pub class: ClassId,
    pub ops: Vec<OpId>,
    /// Uplink bandwidth to each server, bits/second.
    pub uplink_bw: BTreeMap<ServerId, f64>,
}

/// Symmetric inter-server bandwidth table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterServerLinks {
    bw: BTreeMap<(ServerId, ServerId), f64>,
}

impl InterServerLinks {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: ServerId, b: ServerId) -> (ServerId, ServerId) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn set(&mut self, a: ServerId, b: ServerId, bits_per_s: f64) {
        assert_ne!(a, b, "a server has no link to itself");
        self.bw.insert(Self::key(a, b), bits_per_s);
    }

    pub fn get(&self, a: ServerId, b: ServerId) -> Option<f64> {
        self.bw.get(&Self::key(a, b)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((ServerId, ServerId), f64)> + '_ {
        self.bw.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.bw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bw.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub servers: Vec<MecServer>,
    pub users: Vec<TeleportedUser>,
    pub links: InterServerLinks,
    pub classes: Vec<DataClass>,
    pub ops: Vec<ComputeOp>,
    /// Per-extra-split workload inflation (delta).
    pub split_overhead: f64,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn server(&self, id: ServerId) -> Result<&MecServer, ModelError> {
        self.servers
            .get(id)
            .filter(|s| s.id == id)
            .ok_or_else(|| ModelError::dangling("server", id))
    }

    pub fn user(&self, id: UserId) -> Result<&TeleportedUser, ModelError> {
        self.users
            .get(id)
            .filter(|u| u.id == id)
            .ok_or_else(|| ModelError::dangling("user", id))
    }

    pub fn class(&self, id: ClassId) -> Result<&DataClass, ModelError> {
        self.classes
            .get(id)
            .filter(|c| c.id == id)
            .ok_or_else(|| ModelError::dangling("class", id))
    }

    pub fn op(&self, id: OpId) -> Result<&ComputeOp, ModelError> {
        self.ops
            .get(id)
            .filter(|c| c.id == id)
            .ok_or_else(|| ModelError::dangling("op", id))
    }

    /// Servers reachable by `user`: every shared server plus the user's own.
    pub fn servers_for(&self, user: UserId) -> impl Iterator<Item = &MecServer> + '_ {
        self.servers
            .iter()
            .filter(move |s| s.private_to.is_none_or(|owner| owner == user))
    }

    /// Shared MEC servers, excluding private devices.
    pub fn shared_servers(&self) -> impl Iterator<Item = &MecServer> + '_ {
        self.servers.iter().filter(|s| s.private_to.is_none())
    }

    /// Checks every structural invariant and returns all violations found.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.servers.is_empty() {
            out.push("servers: at least one server is required".to_string());
        }
        if self.users.is_empty() {
            out.push("users: at least one user is required".to_string());
        }
        if !(self.split_overhead >= 0.0) || !self.split_overhead.is_finite() {
            out.push(format!(
                "split_overhead: must be finite and >= 0, got {}",
                self.split_overhead
            ));
        }
        for (i, op) in self.ops.iter().enumerate() {
            if op.id != i {
                out.push(format!("ops[{i}].id: expected {i}, got {}", op.id));
            }
        }
        for (i, class) in self.classes.iter().enumerate() {
            if class.id != i {
                out.push(format!("classes[{i}].id: expected {i}, got {}", class.id));
            }
            if !(class.size_bits > 0.0) {
                out.push(format!(
                    "classes[{i}].size_bits: must be > 0, got {}",
                    class.size_bits
                ));
            }
            for (&op, &w) in &class.base_workload {
                if op >= self.ops.len() {
                    out.push(format!("classes[{i}].base_workload: unknown op {op}"));
                }
                if !(w > 0.0) {
                    out.push(format!(
                        "classes[{i}].base_workload[{op}]: must be > 0, got {w}"
                    ));
                }
            }
        }
        for (i, server) in self.servers.iter().enumerate() {
            if server.id != i {
                out.push(format!("servers[{i}].id: expected {i}, got {}", server.id));
            }
            for (&(k, c), &p) in &server.capacity {
                if !(p > 0.0) {
                    out.push(format!(
                        "servers[{i}].capacity[({k},{c})]: must be > 0, got {p}"
                    ));
                }
            }
            if let Some(owner) = server.private_to {
                if owner >= self.users.len() {
                    out.push(format!("servers[{i}].private_to: unknown user {owner}"));
                }
            }
        }
        for (i, user) in self.users.iter().enumerate() {
            if user.id != i {
                out.push(format!("users[{i}].id: expected {i}, got {}", user.id));
            }
            let Some(class) = self.classes.get(user.class) else {
                out.push(format!("users[{i}].class: unknown class {}", user.class));
                continue;
            };
            for &c in &user.ops {
                if !class.base_workload.contains_key(&c) {
                    out.push(format!(
                        "users[{i}].ops: op {c} has no workload in class {}",
                        user.class
                    ));
                }
            }
            for server in self.servers_for(i) {
                match user.uplink_bw.get(&server.id) {
                    None => out.push(format!(
                        "users[{i}].uplink_bw: missing entry for server {}",
                        server.id
                    )),
                    Some(&b) if !(b > 0.0) => out.push(format!(
                        "users[{i}].uplink_bw[{}]: must be > 0, got {b}",
                        server.id
                    )),
                    _ => {}
                }
                for &c in &user.ops {
                    if !server.capacity.contains_key(&(user.class, c)) {
                        out.push(format!(
                            "servers[{}].capacity: missing entry for (class {}, op {c})",
                            server.id, user.class
                        ));
                    }
                }
            }
        }
        for a in 0..self.servers.len() {
            for b in (a + 1)..self.servers.len() {
                let both_private =
                    self.servers[a].private_to.is_some() && self.servers[b].private_to.is_some();
                match self.links.get(a, b) {
                    None if !both_private => {
                        out.push(format!("links: missing entry for ({a},{b})"))
                    }
                    Some(bw) if !(bw > 0.0) => {
                        out.push(format!("links[({a},{b})]: must be > 0, got {bw}"))
                    }
                    _ => {}
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some(v) => Err(ModelError::InvariantViolation(v)),
        }
    }

    /// Stable 64-bit fingerprint of the scenario contents, used to check
    /// that policies in a batch were evaluated on identical draws.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::default();
        self.split_overhead.to_bits().hash(&mut h);
        self.rng_seed.hash(&mut h);
        for s in &self.servers {
            s.id.hash(&mut h);
            s.queue_len.hash(&mut h);
            s.private_to.hash(&mut h);
            for (k, v) in &s.capacity {
                k.hash(&mut h);
                v.to_bits().hash(&mut h);
            }
        }
        for u in &self.users {
            u.id.hash(&mut h);
            u.class.hash(&mut h);
            u.ops.hash(&mut h);
            for (k, v) in &u.uplink_bw {
                k.hash(&mut h);
                v.to_bits().hash(&mut h);
            }
        }
        for (k, v) in self.links.iter() {
            k.hash(&mut h);
            v.to_bits().hash(&mut h);
        }
        for c in &self.classes {
            c.id.hash(&mut h);
            c.size_bits.to_bits().hash(&mut h);
            for (k, v) in &c.base_workload {
                k.hash(&mut h);
                v.to_bits().hash(&mut h);
            }
        }
        for op in &self.ops {
            op.id.hash(&mut h);
            op.name.hash(&mut h);
        }
        h.finish()
    }
}

// FNV-1a; std's default hasher is not guaranteed stable across releases.
struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for Fnv64 {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

/// How one user's task is spread over servers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub user: UserId,
    pub fractions: BTreeMap<ServerId, f64>,
    /// Server that merges the processed shards.
    pub integrator: ServerId,
    /// Time spent waiting behind already-queued jobs before processing
    /// starts. Zero for every policy except shortest-queue.
    pub queue_wait_s: f64,
}

impl Allocation {
    pub fn whole(user: UserId, server: ServerId) -> Self {
        Allocation {
            user,
            fractions: BTreeMap::from([(server, 1.0)]),
            integrator: server,
            queue_wait_s: 0.0,
        }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let mut sum = 0.0;
        for (&m, &x) in &self.fractions {
            if !(0.0..=1.0).contains(&x) {
                return Err(ModelError::InvariantViolation(format!(
                    "user {}: fraction on server {m} is {x}, outside [0, 1]",
                    self.user
                )));
            }
            sum += x;
        }
        if (sum - 1.0).abs() > FRACTION_SUM_TOL {
            return Err(ModelError::InvariantViolation(format!(
                "user {}: fractions sum to {sum}, expected 1",
                self.user
            )));
        }
        if !(self.queue_wait_s >= 0.0) {
            return Err(ModelError::InvariantViolation(format!(
                "user {}: negative queue wait {}",
                self.user, self.queue_wait_s
            )));
        }
        Ok(())
    }

    /// Fractions with values at or below [`SPLIT_EPS`] dropped and the rest
    /// renormalized to sum to one.
    pub fn active_fractions(&self) -> BTreeMap<ServerId, f64> {
        let kept: BTreeMap<ServerId, f64> = self
            .fractions
            .iter()
            .filter(|(_, &x)| x > SPLIT_EPS)
            .map(|(&m, &x)| (m, x))
            .collect();
        let total: f64 = kept.values().sum();
        kept.into_iter().map(|(m, x)| (m, x / total)).collect()
    }

    pub fn split_count(&self) -> usize {
        self.fractions.values().filter(|&&x| x > SPLIT_EPS).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Schedule {
    pub allocations: Vec<Allocation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserLatency {
    pub comm_s: f64,
    pub comp_s: f64,
    pub integ_s: f64,
    pub total_s: f64,
    pub splits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub per_user: BTreeMap<UserId, UserLatency>,
    pub max_latency_s: f64,
    pub split_counts: BTreeMap<UserId, usize>,
}

impl LatencyReport {
    pub fn totals_s(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_user.values().map(|u| u.total_s)
    }

    pub fn total_splits(&self) -> usize {
        self.split_counts.values().sum()
    }
}

/// Work multiplier for a task split into `splits` shards.
pub fn workload_factor(split_overhead: f64, splits: usize) -> f64 {
    1.0 + split_overhead * (splits.max(1) - 1) as f64
}

/// Unsplit processing time of `user`'s task on `server`:
/// `sum_c A_{k,c} / p_{k,c,m}` over the user's operations.
pub fn service_time(
    scenario: &Scenario,
    user: &TeleportedUser,
    server: &MecServer,
) -> Result<f64, ModelError> {
    let class = scenario.class(user.class)?;
    let mut total = 0.0;
    for &c in &user.ops {
        scenario.op(c)?;
        let work = *class.base_workload.get(&c).ok_or_else(|| {
            ModelError::dangling_in("op", c, format!("no workload in class {}", class.id))
        })?;
        let rate = *server.capacity.get(&(class.id, c)).ok_or_else(|| {
            ModelError::dangling_in(
                "capacity",
                server.id,
                format!(
                    "server {} has no capacity for (class {}, op {c})",
                    server.id, class.id
                ),
            )
        })?;
        total += work / rate;
    }
    Ok(total)
}

fn uplink(user: &TeleportedUser, server: ServerId) -> Result<f64, ModelError> {
    user.uplink_bw.get(&server).copied().ok_or_else(|| {
        ModelError::dangling_in(
            "uplink",
            server,
            format!("user {} has no uplink to it", user.id),
        )
    })
}

fn link(scenario: &Scenario, a: ServerId, b: ServerId) -> Result<f64, ModelError> {
    scenario
        .links
        .get(a, b)
        .ok_or_else(|| ModelError::dangling_in("link", a, format!("no inter-server link to {b}")))
}

/// Latency breakdown for one user's allocation.
pub fn user_latency(scenario: &Scenario, alloc: &Allocation) -> Result<UserLatency, ModelError> {
    alloc.check()?;
    let user = scenario.user(alloc.user)?;
    let class = scenario.class(user.class)?;
    scenario.server(alloc.integrator)?;
    for &m in alloc.fractions.keys() {
        let server = scenario.server(m)?;
        if server.private_to.is_some_and(|owner| owner != user.id) {
            return Err(ModelError::InvariantViolation(format!(
                "user {} allocated to server {m}, which is private to another user",
                user.id
            )));
        }
    }

    let active = alloc.active_fractions();
    let splits = active.len();
    let factor = workload_factor(scenario.split_overhead, splits);
    let size = class.size_bits;

    let mut comm_s = 0.0;
    let mut comp_s: f64 = 0.0;
    let mut integ_s = 0.0;
    for (&m, &x) in &active {
        let server = scenario.server(m)?;
        comm_s += x * size / uplink(user, m)?;
        comp_s = comp_s.max(x * factor * service_time(scenario, user, server)?);
        if m != alloc.integrator {
            integ_s += x * size / link(scenario, m, alloc.integrator)?;
        }
    }
    comp_s += alloc.queue_wait_s;

    Ok(UserLatency {
        comm_s,
        comp_s,
        integ_s,
        total_s: comm_s + comp_s + integ_s,
        splits,
    })
}

pub fn report(scenario: &Scenario, schedule: &Schedule) -> Result<LatencyReport, ModelError> {
    let mut per_user = BTreeMap::new();
    for alloc in &schedule.allocations {
        if per_user
            .insert(alloc.user, user_latency(scenario, alloc)?)
            .is_some()
        {
            return Err(ModelError::InvariantViolation(format!(
                "user {} has more than one allocation",
                alloc.user
            )));
        }
    }
    if let Some(missing) = scenario
        .users
        .iter()
        .find(|u| !per_user.contains_key(&u.id))
    {
        return Err(ModelError::InvariantViolation(format!(
            "schedule has no allocation for user {}",
            missing.id
        )));
    }
    let max_latency_s = per_user.values().map(|u| u.total_s).fold(0.0, f64::max);
    let split_counts = per_user.iter().map(|(&n, u)| (n, u.splits)).collect();
    Ok(LatencyReport {
        per_user,
        max_latency_s,
        split_counts,
    })
}

/// Builders for small hand-made scenarios, shared by tests across the crate.
pub mod fixtures {
    use super::*;

    /// `n_servers` identical servers and `n_users` identical users with a
    /// single class and a single op.
    pub fn uniform(
        n_servers: usize,
        n_users: usize,
        size_bits: f64,
        workload: f64,
        capacity: f64,
        uplink: f64,
        interserver: f64,
    ) -> Scenario {
        let servers = (0..n_servers)
            .map(|m| MecServer::new(m, BTreeMap::from([((0, 0), capacity)])))
            .collect();
        let users = (0..n_users)
            .map(|n| TeleportedUser {
                id: n,
                class: 0,
                ops: vec![0],
                uplink_bw: (0..n_servers).map(|m| (m, uplink)).collect(),
            })
            .collect();
        let mut links = InterServerLinks::new();
        for a in 0..n_servers {
            for b in (a + 1)..n_servers {
                links.set(a, b, interserver);
            }
        }
        Scenario {
            servers,
            users,
            links,
            classes: vec![DataClass {
                id: 0,
                size_bits,
                base_workload: BTreeMap::from([(0, workload)]),
            }],
            ops: vec![ComputeOp {
                id: 0,
                name: "render".into(),
            }],
            split_overhead: 0.0,
            rng_seed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::uniform;
    use super::*;

    fn even(user: UserId, servers: &[ServerId], integrator: ServerId) -> Allocation {
        let x = 1.0 / servers.len() as f64;
        Allocation {
            user,
            fractions: servers.iter().map(|&m| (m, x)).collect(),
            integrator,
            queue_wait_s: 0.0,
        }
    }

    #[test]
    fn pure_transmission() {
        // tiny workload on a huge capacity stands in for zero work
        let s = uniform(1, 1, 1e6, 1e-30, 1e30, 1e8, 1e9);
        let lat = user_latency(&s, &Allocation::whole(0, 0)).unwrap();
        assert!((lat.comm_s - 0.01).abs() < 1e-15);
        assert!(lat.comp_s < 1e-50);
        assert_eq!(lat.integ_s, 0.0);
        assert!((lat.total_s - 0.01).abs() < 1e-15);
        assert_eq!(lat.splits, 1);
    }

    #[test]
    fn even_split_two_servers_by_hand() {
        // s = 8e6 bits, b_up = 1e8, b_inter = 4e8, A = 10, p = 20, delta = 0.
        // comm = 2 * 0.5 * 8e6 / 1e8 = 0.08
        // comp = max(0.5 * 10 / 20) = 0.25   (unsplit 0.5, halved)
        // integ = 0.5 * 8e6 / 4e8 = 0.01
        let s = uniform(2, 1, 8e6, 10.0, 20.0, 1e8, 4e8);
        let lat = user_latency(&s, &even(0, &[0, 1], 0)).unwrap();
        assert!((lat.comm_s - 0.08).abs() < 1e-12);
        assert!((lat.comp_s - 0.25).abs() < 1e-12);
        assert!((lat.integ_s - 0.01).abs() < 1e-12);
        assert!((lat.total_s - 0.34).abs() < 1e-12);
        assert_eq!(lat.splits, 2);

        let whole = user_latency(&s, &Allocation::whole(0, 0)).unwrap();
        assert!((whole.comm_s - lat.comm_s).abs() < 1e-12);
        assert!((whole.comp_s - 2.0 * lat.comp_s).abs() < 1e-12);
    }

    #[test]
    fn split_overhead_inflates_work() {
        let mut s = uniform(3, 1, 1e6, 30.0, 10.0, 1e9, 1e9);
        s.split_overhead = 0.05;
        let lat = user_latency(&s, &even(0, &[0, 1, 2], 1)).unwrap();
        // (1/3) * 30 * 1.1 / 10
        assert!((lat.comp_s - 1.1).abs() < 1e-12);
    }

    #[test]
    fn tiny_fractions_are_not_splits() {
        let s = uniform(2, 1, 1e6, 10.0, 10.0, 1e9, 1e9);
        let alloc = Allocation {
            user: 0,
            fractions: BTreeMap::from([(0, 1.0 - 5e-10), (1, 5e-10)]),
            integrator: 0,
            queue_wait_s: 0.0,
        };
        let lat = user_latency(&s, &alloc).unwrap();
        assert_eq!(lat.splits, 1);
        assert_eq!(lat.integ_s, 0.0);
        assert!((lat.comp_s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_active_server_has_no_integration() {
        let s = uniform(3, 1, 1e6, 10.0, 10.0, 1e9, 1e9);
        // integrator elsewhere still pays the transfer; on the same server it does not
        let lat = user_latency(&s, &Allocation::whole(0, 2)).unwrap();
        assert_eq!(lat.integ_s, 0.0);
        assert_eq!(lat.splits, 1);
    }

    #[test]
    fn dangling_references() {
        let s = uniform(2, 1, 1e6, 10.0, 10.0, 1e9, 1e9);
        let err = user_latency(&s, &Allocation::whole(0, 5)).unwrap_err();
        assert!(matches!(
            err,
            ModelError::DanglingReference {
                kind: "server",
                id: 5,
                ..
            }
        ));
        let err = user_latency(&s, &Allocation::whole(3, 0)).unwrap_err();
        assert!(matches!(
            err,
            ModelError::DanglingReference {
                kind: "user",
                id: 3,
                ..
            }
        ));

        let mut bad = s.clone();
        bad.users[0].class = 4;
        let err = user_latency(&bad, &Allocation::whole(0, 0)).unwrap_err();
        assert!(matches!(
            err,
            ModelError::DanglingReference {
                kind: "class",
                id: 4,
                ..
            }
        ));

        let mut bad = s.clone();
        bad.servers[1].capacity.clear();
        let err = user_latency(&bad, &even(0, &[0, 1], 0)).unwrap_err();
        assert!(matches!(
            err,
            ModelError::DanglingReference {
                kind: "capacity",
                ..
            }
        ));
    }

    #[test]
    fn fraction_sum_must_be_one() {
        let s = uniform(2, 1, 1e6, 10.0, 10.0, 1e9, 1e9);
        let alloc = Allocation {
            user: 0,
            fractions: BTreeMap::from([(0, 0.5), (1, 0.4)]),
            integrator: 0,
            queue_wait_s: 0.0,
        };
        assert!(matches!(
            user_latency(&s, &alloc),
            Err(ModelError::InvariantViolation(_))
        ));
    }

    #[test]
    fn report_aggregates_users() {
        let s = uniform(1, 1, 1e6, 10.0, 10.0, 1e8, 1e9);
        let r = report(
            &s,
            &Schedule {
                allocations: vec![Allocation::whole(0, 0)],
            },
        )
        .unwrap();
        assert_eq!(r.max_latency_s, r.per_user[&0].total_s);

        let s = uniform(3, 2, 1e6, 10.0, 10.0, 1e8, 1e9);
        let sched = Schedule {
            allocations: vec![even(0, &[0, 1, 2], 0), even(1, &[0, 1, 2], 0)],
        };
        let r = report(&s, &sched).unwrap();
        assert_eq!(r.per_user[&0], r.per_user[&1]);
        assert_eq!(r.split_counts[&0], 3);
        assert_eq!(r.total_splits(), 6);

        let missing = Schedule {
            allocations: vec![even(0, &[0, 1, 2], 0)],
        };
        assert!(report(&s, &missing).is_err());
    }

    #[test]
    fn violations_name_the_field() {
        let mut s = uniform(2, 1, 1e6, 10.0, 10.0, 1e9, 1e9);
        assert!(s.violations().is_empty());
        s.users[0].uplink_bw.insert(1, -3.0);
        s.servers[0].capacity.clear();
        let v = s.violations();
        assert!(
            v.iter().any(|m| m.starts_with("users[0].uplink_bw[1]")),
            "{v:?}"
        );
        assert!(
            v.iter()
                .any(|m| m.contains("servers[0].capacity: missing entry for (class 0, op 0)")),
            "{v:?}"
        );
    }

    #[test]
    fn fingerprint_tracks_contents() {
        let a = uniform(3, 2, 1e6, 10.0, 10.0, 1e9, 1e9);
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.users[1].uplink_bw.insert(2, 2e9);
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn alloc3() -> impl Strategy<Value = Allocation> {
            (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0usize..3).prop_filter_map(
                "nonzero",
                |(a, b, c, i)| {
                    let t = a + b + c;
                    (t > 1e-3).then(|| Allocation {
                        user: 0,
                        fractions: BTreeMap::from([(0, a / t), (1, b / t), (2, c / t)]),
                        integrator: i,
                        queue_wait_s: 0.0,
                    })
                },
            )
        }

        fn scenario3() -> impl Strategy<Value = Scenario> {
            (
                prop::collection::vec(1e8f64..5e9, 3),
                prop::collection::vec(1.0f64..100.0, 3),
                1e6f64..1e8,
                1.0f64..50.0,
                0.0f64..0.2,
            )
                .prop_map(|(up, cap, size, work, delta)| {
                    let mut s = uniform(3, 1, size, work, 1.0, 1e9, 7e9);
                    for m in 0..3 {
                        s.users[0].uplink_bw.insert(m, up[m]);
                        s.servers[m].capacity.insert((0, 0), cap[m]);
                    }
                    s.links.set(0, 1, 5e9);
                    s.split_overhead = delta;
                    s
                })
        }

        proptest! {
            #[test]
            fn more_uplink_never_hurts_comm(s in scenario3(), a in alloc3(), m in 0usize..3, boost in 1.0f64..10.0) {
                let before = user_latency(&s, &a).unwrap();
                let mut faster = s.clone();
                let b = faster.users[0].uplink_bw[&m];
                faster.users[0].uplink_bw.insert(m, b * boost);
                let after = user_latency(&faster, &a).unwrap();
                prop_assert!(after.comm_s <= before.comm_s);
            }

            #[test]
            fn sizes_and_work_scale_homogeneously(s in scenario3(), a in alloc3(), alpha in 0.1f64..10.0) {
                let mut s = s;
                s.split_overhead = 0.0;
                let base = user_latency(&s, &a).unwrap();
                let mut scaled = s.clone();
                scaled.classes[0].size_bits *= alpha;
                *scaled.classes[0].base_workload.get_mut(&0).unwrap() *= alpha;
                let lat = user_latency(&scaled, &a).unwrap();
                prop_assert!((lat.comm_s - alpha * base.comm_s).abs() <= 1e-12 * lat.comm_s.max(1.0));
                prop_assert!((lat.comp_s - alpha * base.comp_s).abs() <= 1e-12 * lat.comp_s.max(1.0));
            }

            #[test]
            fn total_is_sum_of_terms(s in scenario3(), a in alloc3()) {
                let lat = user_latency(&s, &a).unwrap();
                prop_assert_eq!(lat.total_s, lat.comm_s + lat.comp_s + lat.integ_s);
            }

            #[test]
            fn even_split_divides_compute(j in 1usize..6, work in 1.0f64..100.0, cap in 1.0f64..100.0) {
                let s = uniform(j, 1, 1e6, work, cap, 1e9, 1e9);
                let whole = user_latency(&s, &Allocation::whole(0, 0)).unwrap();
                let split = user_latency(&s, &even(0, &(0..j).collect::<Vec<_>>(), 0)).unwrap();
                prop_assert!((split.comp_s - whole.comp_s / j as f64).abs() <= 1e-12 * whole.comp_s);
            }
        }
    }
}
