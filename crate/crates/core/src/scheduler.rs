//! Scheduling policies: the two-stage LP scheduler and three baselines.
//!
//! The proposed scheduler works in two stages.
//!
//! 1. Min-max latency. For every user, every support set `S` of servers and
//!    every integrator `I` in `S`, a small LP finds the fractions minimizing
//!    the user's latency with the work inflated for exactly `|S|` shards. The
//!    computation term is a max over servers, so it is linearized with an
//!    auxiliary `z >= x_m * A[t] / p_m`. Users share no server capacity in
//!    this latency model, so the joint min-max LP separates and its optimum
//!    `l*_max` is the largest per-user optimum.
//! 2. Split minimization. Under the cap `l*_max * (1 + SLACK)`, each user
//!    takes the smallest support that stays under the cap, which yields the
//!    combination with the fewest total splits. One joint LP over the chosen
//!    supports then minimizes the maximum latency, and a second pass
//!    minimizes the sum of latencies with that maximum held.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, LinearProgram, LpError, LpStatus, Relation};
use crate::model::{
    self, service_time, workload_factor, Allocation, ClassId, LatencyReport, MecServer, ModelError,
    OpId, Scenario, Schedule, ServerId, TeleportedUser, UserId, SPLIT_EPS,
};

/// Relative slack allowed over the stage-one optimum.
pub const SLACK: f64 = 1e-6;

/// Support sets are bitmasks, so enumeration is limited to this many servers.
pub const MAX_ENUMERATED_SERVERS: usize = 16;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("invalid policy parameters: {0}")]
    InvalidParams(String),
    #[error("internal scheduler error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Proposed,
    LocalComputation,
    JoinShortestQueue,
    AlwaysSplitEvenly,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Proposed,
        PolicyKind::LocalComputation,
        PolicyKind::JoinShortestQueue,
        PolicyKind::AlwaysSplitEvenly,
    ];

    /// Short name used on the command line and in CSV output.
    pub fn key(self) -> &'static str {
        match self {
            PolicyKind::Proposed => "proposed",
            PolicyKind::LocalComputation => "local",
            PolicyKind::JoinShortestQueue => "jsq",
            PolicyKind::AlwaysSplitEvenly => "split",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Proposed => "Proposed",
            PolicyKind::LocalComputation => "Local Computation",
            PolicyKind::JoinShortestQueue => "Join Shortest Queue",
            PolicyKind::AlwaysSplitEvenly => "Always Split Evenly",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proposed" | "lp" => Ok(PolicyKind::Proposed),
            "local" | "local_computation" => Ok(PolicyKind::LocalComputation),
            "jsq" | "join_shortest_queue" => Ok(PolicyKind::JoinShortestQueue),
            "split" | "split_evenly" | "always_split_evenly" => Ok(PolicyKind::AlwaysSplitEvenly),
            other => Err(format!(
                "unknown policy `{other}` (expected proposed, local, jsq or split)"
            )),
        }
    }
}

pub type CapacityTable = BTreeMap<(ClassId, OpId), f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Proposed,
    LocalComputation { local_capacity: CapacityTable },
    JoinShortestQueue,
    AlwaysSplitEvenly,
}

/// A schedule together with the scenario it must be evaluated on. Local
/// computation adds one private device per user, so its scenario differs
/// from the input.
#[derive(Debug, Clone)]
pub struct Plan<'a> {
    pub scenario: Cow<'a, Scenario>,
    pub schedule: Schedule,
}

impl Plan<'_> {
    pub fn report(&self) -> Result<LatencyReport, ModelError> {
        model::report(&self.scenario, &self.schedule)
    }
}

impl Policy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::Proposed => PolicyKind::Proposed,
            Policy::LocalComputation { .. } => PolicyKind::LocalComputation,
            Policy::JoinShortestQueue => PolicyKind::JoinShortestQueue,
            Policy::AlwaysSplitEvenly => PolicyKind::AlwaysSplitEvenly,
        }
    }

    pub fn plan<'a>(&self, scenario: &'a Scenario) -> Result<Plan<'a>, ScheduleError> {
        scenario.validate()?;
        Ok(match self {
            Policy::Proposed => Plan {
                scenario: Cow::Borrowed(scenario),
                schedule: schedule_proposed(scenario)?.schedule,
            },
            Policy::LocalComputation { local_capacity } => {
                let local = schedule_local(scenario, local_capacity)?;
                Plan {
                    scenario: Cow::Owned(local.scenario),
                    schedule: local.schedule,
                }
            }
            Policy::JoinShortestQueue => Plan {
                scenario: Cow::Borrowed(scenario),
                schedule: schedule_jsq(scenario)?.schedule,
            },
            Policy::AlwaysSplitEvenly => Plan {
                scenario: Cow::Borrowed(scenario),
                schedule: schedule_split_evenly(scenario)?,
            },
        })
    }

    pub fn evaluate(&self, scenario: &Scenario) -> Result<LatencyReport, ScheduleError> {
        Ok(self.plan(scenario)?.report()?)
    }
}

/// Per-user latency coefficients over the shared servers.
#[derive(Debug, Clone)]
pub(crate) struct UserTerms {
    pub servers: Vec<ServerId>,
    /// `s_k / b_{m,n}`
    pub comm: Vec<f64>,
    /// Unsplit processing time `sum_c A_{k,c} / p_{k,c,m}`.
    pub work: Vec<f64>,
    /// `integ[a][b] = s_k / b_{a,b}`, zero on the diagonal.
    pub integ: Vec<Vec<f64>>,
}

impl UserTerms {
    pub fn new(scenario: &Scenario, user: &TeleportedUser) -> Result<Self, ModelError> {
        let size = scenario.class(user.class)?.size_bits;
        let servers: Vec<&MecServer> = scenario.shared_servers().collect();
        let mut comm = Vec::with_capacity(servers.len());
        let mut work = Vec::with_capacity(servers.len());
        for s in &servers {
            let b = user.uplink_bw.get(&s.id).copied().ok_or_else(|| {
                ModelError::InvariantViolation(format!(
                    "user {} has no uplink to server {}",
                    user.id, s.id
                ))
            })?;
            comm.push(size / b);
            work.push(service_time(scenario, user, s)?);
        }
        let mut integ = vec![vec![0.0; servers.len()]; servers.len()];
        for (a, sa) in servers.iter().enumerate() {
            for (b, sb) in servers.iter().enumerate() {
                if a != b {
                    let bw = scenario.links.get(sa.id, sb.id).ok_or_else(|| {
                        ModelError::InvariantViolation(format!(
                            "no link between servers {} and {}",
                            sa.id, sb.id
                        ))
                    })?;
                    integ[a][b] = size / bw;
                }
            }
        }
        Ok(UserTerms {
            servers: servers.iter().map(|s| s.id).collect(),
            comm,
            work,
            integ,
        })
    }
}

/// One (support, integrator) choice for a user and its optimal latency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// Bitmask over the user's server list.
    pub support: u32,
    /// Index into the user's server list; always inside `support`.
    pub integrator: usize,
    pub latency_s: f64,
}

impl Candidate {
    pub fn splits(&self) -> usize {
        self.support.count_ones() as usize
    }
}

/// Column of each variable of one user's block in a joint LP.
struct Block {
    x: Vec<(usize, usize)>,
    l: usize,
}

/// Sparse `(column, coefficient)` terms, relation and right-hand side.
type SparseRow = (Vec<(usize, f64)>, Relation, f64);

/// Appends one user's latency rows for a fixed support and integrator.
/// Returns the variable layout; the caller owns the objective.
fn add_user_block(
    objective: &mut Vec<f64>,
    bounds: &mut Vec<(f64, f64)>,
    rows: &mut Vec<SparseRow>,
    terms: &UserTerms,
    support: u32,
    integrator: usize,
    split_overhead: f64,
) -> Block {
    let members: Vec<usize> = (0..terms.servers.len())
        .filter(|i| support & (1 << i) != 0)
        .collect();
    let factor = workload_factor(split_overhead, members.len());
    let mut next = || {
        objective.push(0.0);
        bounds.push((0.0, f64::INFINITY));
        objective.len() - 1
    };
    let x: Vec<(usize, usize)> = members.iter().map(|&i| (i, next())).collect();
    let z = next();
    let l = next();
    for &(_, col) in &x {
        bounds[col] = (0.0, 1.0);
    }

    rows.push((
        x.iter().map(|&(_, c)| (c, 1.0)).collect(),
        Relation::Eq,
        1.0,
    ));
    for &(i, col) in &x {
        rows.push((
            vec![(z, 1.0), (col, -factor * terms.work[i])],
            Relation::Ge,
            0.0,
        ));
    }
    let mut latency = vec![(l, 1.0), (z, -1.0)];
    for &(i, col) in &x {
        latency.push((col, -(terms.comm[i] + terms.integ[i][integrator])));
    }
    rows.push((latency, Relation::Ge, 0.0));
    Block { x, l }
}

fn assemble(objective: Vec<f64>, bounds: Vec<(f64, f64)>, rows: Vec<SparseRow>) -> LinearProgram {
    let n = objective.len();
    let mut lp = LinearProgram::new(objective);
    lp.bounds = bounds;
    for (sparse, rel, rhs) in rows {
        let mut dense = vec![0.0; n];
        for (j, v) in sparse {
            dense[j] += v;
        }
        lp.add_constraint(dense, rel, rhs);
    }
    lp
}

/// Minimum latency for one user restricted to `support`, with the
/// integrator fixed.
pub(crate) fn candidate_latency(
    terms: &UserTerms,
    support: u32,
    integrator: usize,
    split_overhead: f64,
) -> Result<f64, ScheduleError> {
    let (mut objective, mut bounds, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    let block = add_user_block(
        &mut objective,
        &mut bounds,
        &mut rows,
        terms,
        support,
        integrator,
        split_overhead,
    );
    objective[block.l] = 1.0;
    let lp = assemble(objective, bounds, rows);
    let sol = lp::solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective_value),
        other => Err(ScheduleError::Internal(format!(
            "single-user LP returned {other:?} for support {support:#b}"
        ))),
    }
}

/// Every (support, integrator) candidate for a user, ordered by split
/// count, then support bitmask, then integrator.
fn enumerate_candidates(
    terms: &UserTerms,
    split_overhead: f64,
) -> Result<Vec<Candidate>, ScheduleError> {
    let k = terms.servers.len();
    let mut supports: Vec<u32> = (1..(1u32 << k)).collect();
    supports.sort_by_key(|s| (s.count_ones(), *s));
    let mut out = Vec::new();
    for support in supports {
        for integrator in (0..k).filter(|i| support & (1 << i) != 0) {
            out.push(Candidate {
                support,
                integrator,
                latency_s: candidate_latency(terms, support, integrator, split_overhead)?,
            });
        }
    }
    Ok(out)
}

/// Result of the two-stage scheduler.
#[derive(Debug, Clone)]
pub struct ProposedSchedule {
    pub schedule: Schedule,
    /// Maximum per-user latency of the returned schedule.
    pub l_max_s: f64,
    /// Stage-one min-max optimum.
    pub stage1_l_max_s: f64,
    /// Candidate chosen for each user in stage two.
    pub chosen: Vec<Candidate>,
    /// Set when stage two found no feasible support and fell back to stage one's.
    pub used_fallback: bool,
}

pub fn schedule_proposed(scenario: &Scenario) -> Result<ProposedSchedule, ScheduleError> {
    let n_shared = scenario.shared_servers().count();
    if n_shared == 0 {
        return Err(ScheduleError::InvalidParams(
            "no shared servers to schedule on".into(),
        ));
    }
    if n_shared > MAX_ENUMERATED_SERVERS {
        return Err(ScheduleError::InvalidParams(format!(
            "{n_shared} servers exceeds the enumeration limit of {MAX_ENUMERATED_SERVERS}"
        )));
    }
    let delta = scenario.split_overhead;
    let terms: Vec<UserTerms> = scenario
        .users
        .iter()
        .map(|u| UserTerms::new(scenario, u))
        .collect::<Result<_, _>>()?;
    let candidates: Vec<Vec<Candidate>> = terms
        .iter()
        .map(|t| enumerate_candidates(t, delta))
        .collect::<Result<_, _>>()?;

    // Stage 1
    let best: Vec<Candidate> = candidates
        .iter()
        .map(|c| {
            *c.iter()
                .min_by(|a, b| a.latency_s.total_cmp(&b.latency_s))
                .expect("at least one candidate per user")
        })
        .collect();
    let stage1 = best.iter().map(|c| c.latency_s).fold(0.0, f64::max);
    if !stage1.is_finite() {
        return Err(ScheduleError::Internal(format!(
            "stage-one optimum is {stage1}"
        )));
    }

    // Stage 2
    let cap = stage1 * (1.0 + SLACK);
    let mut used_fallback = false;
    let chosen: Vec<Candidate> = candidates
        .iter()
        .zip(&best)
        .enumerate()
        .map(|(n, (cands, &fallback))| {
            let feasible = |c: &&Candidate| c.latency_s <= cap;
            let Some(fewest) = cands.iter().filter(feasible).map(Candidate::splits).min() else {
                warn!("user {n}: no support meets l_max {cap:.6} s, keeping the stage-one support");
                used_fallback = true;
                return fallback;
            };
            *cands
                .iter()
                .filter(feasible)
                .filter(|c| c.splits() == fewest)
                .min_by(|a, b| a.latency_s.total_cmp(&b.latency_s))
                .expect("nonempty")
        })
        .collect();

    let fractions = solve_restricted(&terms, &chosen, delta)?;
    let allocations = scenario
        .users
        .iter()
        .zip(&terms)
        .zip(fractions)
        .map(|((user, t), x)| finish_allocation(user.id, t, x))
        .collect();
    let schedule = Schedule { allocations };
    let l_max_s = model::report(scenario, &schedule)?.max_latency_s;
    Ok(ProposedSchedule {
        schedule,
        l_max_s,
        stage1_l_max_s: stage1,
        chosen,
        used_fallback,
    })
}

/// Joint LP over the chosen supports: minimize the max latency, then the
/// sum of latencies with the max held. Returns per-user fractions indexed
/// by position in each user's server list.
fn solve_restricted(
    terms: &[UserTerms],
    chosen: &[Candidate],
    delta: f64,
) -> Result<Vec<Vec<f64>>, ScheduleError> {
    let (mut objective, mut bounds, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    let blocks: Vec<Block> = terms
        .iter()
        .zip(chosen)
        .map(|(t, c)| {
            add_user_block(
                &mut objective,
                &mut bounds,
                &mut rows,
                t,
                c.support,
                c.integrator,
                delta,
            )
        })
        .collect();
    objective.push(0.0);
    bounds.push((0.0, f64::INFINITY));
    let l_max = objective.len() - 1;
    for b in &blocks {
        rows.push((vec![(b.l, 1.0), (l_max, -1.0)], Relation::Le, 0.0));
    }

    let mut minmax = objective.clone();
    minmax[l_max] = 1.0;
    let first = lp::solve(&assemble(minmax, bounds.clone(), rows.clone()))?;
    if first.status != LpStatus::Optimal {
        return Err(ScheduleError::Internal(format!(
            "restricted min-max LP returned {:?}",
            first.status
        )));
    }
    let held = first.objective_value * (1.0 + SLACK);

    let mut sum = objective;
    for b in &blocks {
        sum[b.l] = 1.0;
    }
    rows.push((vec![(l_max, 1.0)], Relation::Le, held));
    let second = lp::solve(&assemble(sum, bounds, rows))?;
    let x = if second.status == LpStatus::Optimal {
        &second.x
    } else {
        &first.x
    };

    Ok(terms
        .iter()
        .zip(&blocks)
        .map(|(t, b)| {
            let mut f = vec![0.0; t.servers.len()];
            for &(i, col) in &b.x {
                f[i] = x[col];
            }
            f
        })
        .collect())
}

/// Drops tiny fractions, renormalizes, and picks the integrator.
fn finish_allocation(user: UserId, terms: &UserTerms, raw: Vec<f64>) -> Allocation {
    let kept: Vec<f64> = raw
        .iter()
        .map(|&x| if x > SPLIT_EPS { x.min(1.0) } else { 0.0 })
        .collect();
    let total: f64 = kept.iter().sum();
    let x: Vec<f64> = kept.iter().map(|v| v / total).collect();
    let integrator = best_integrator(terms, &x);
    Allocation {
        user,
        fractions: terms.servers.iter().copied().zip(x).collect(),
        integrator: terms.servers[integrator],
        queue_wait_s: 0.0,
    }
}

/// Active server minimizing the shard-gathering time; ties go to the lowest id.
fn best_integrator(terms: &UserTerms, x: &[f64]) -> usize {
    let cost = |i: usize| -> f64 {
        (0..x.len())
            .filter(|&m| m != i && x[m] > SPLIT_EPS)
            .map(|m| x[m] * terms.integ[m][i])
            .sum()
    };
    let mut best: Option<(usize, f64)> = None;
    for i in (0..x.len()).filter(|&i| x[i] > SPLIT_EPS) {
        let c = cost(i);
        if best.is_none_or(|(_, bc)| c < bc) {
            best = Some((i, c));
        }
    }
    best.map(|b| b.0).unwrap_or(0)
}

/// Local computation plan: the scenario extended with one private device
/// per user, plus the schedule that runs each task on its own device.
#[derive(Debug, Clone)]
pub struct LocalPlan {
    pub scenario: Scenario,
    pub schedule: Schedule,
}

/// Each user computes on a private device with `local_capacity`, then ships
/// the result once to the MEC server with the best uplink for integration.
pub fn schedule_local(
    scenario: &Scenario,
    local_capacity: &CapacityTable,
) -> Result<LocalPlan, ScheduleError> {
    if let Some((&(k, c), &p)) = local_capacity
        .iter()
        .find(|(_, &p)| !(p > 0.0 && p.is_finite()))
    {
        return Err(ScheduleError::InvalidParams(format!(
            "local capacity for (class {k}, op {c}) must be positive, got {p}"
        )));
    }
    for user in &scenario.users {
        if let Some(&c) = user
            .ops
            .iter()
            .find(|&&c| !local_capacity.contains_key(&(user.class, c)))
        {
            return Err(ScheduleError::InvalidParams(format!(
                "no local capacity for (class {}, op {c}) needed by user {}",
                user.class, user.id
            )));
        }
    }

    let mut augmented = scenario.clone();
    let first_device = augmented.servers.len();
    let mut allocations = Vec::with_capacity(scenario.users.len());
    for user in &scenario.users {
        let device = first_device + user.id;
        let mut server = MecServer::new(device, local_capacity.clone());
        server.private_to = Some(user.id);
        augmented.servers.push(server);

        let mut best: Option<(ServerId, f64)> = None;
        for s in scenario.shared_servers() {
            let b = *user.uplink_bw.get(&s.id).ok_or_else(|| {
                ModelError::InvariantViolation(format!(
                    "user {} has no uplink to server {}",
                    user.id, s.id
                ))
            })?;
            augmented.links.set(device, s.id, b);
            if best.is_none_or(|(_, bb)| b > bb) {
                best = Some((s.id, b));
            }
        }
        let (hub, _) =
            best.ok_or_else(|| ScheduleError::InvalidParams("no shared servers".into()))?;
        // the task is already on the device
        augmented.users[user.id]
            .uplink_bw
            .insert(device, f64::INFINITY);
        allocations.push(Allocation {
            user: user.id,
            fractions: BTreeMap::from([(device, 1.0), (hub, 0.0)]),
            integrator: hub,
            queue_wait_s: 0.0,
        });
    }
    Ok(LocalPlan {
        scenario: augmented,
        schedule: Schedule { allocations },
    })
}

#[derive(Debug, Clone)]
pub struct JsqPlan {
    pub schedule: Schedule,
    /// Jobs added to each server's queue during this pass.
    pub queue_increments: BTreeMap<ServerId, u32>,
}

/// Mean unsplit service time of the scenario's tasks on `server`; the
/// per-job cost of waiting in its queue.
fn mean_service_time(scenario: &Scenario, server: &MecServer) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for u in &scenario.users {
        total += service_time(scenario, u, server)?;
    }
    Ok(total / scenario.users.len() as f64)
}

/// Whole tasks go to the server with the fewest queued jobs, in user id
/// order, ties to the lowest server id. Each queued job ahead adds one mean
/// service time of waiting.
pub fn schedule_jsq(scenario: &Scenario) -> Result<JsqPlan, ScheduleError> {
    let servers: Vec<&MecServer> = scenario.shared_servers().collect();
    if servers.is_empty() {
        return Err(ScheduleError::InvalidParams("no shared servers".into()));
    }
    let service: Vec<f64> = servers
        .iter()
        .map(|s| mean_service_time(scenario, s))
        .collect::<Result<_, _>>()?;
    let mut queue: Vec<u32> = servers.iter().map(|s| s.queue_len).collect();
    let mut increments: BTreeMap<ServerId, u32> = servers.iter().map(|s| (s.id, 0)).collect();
    let mut users: Vec<&TeleportedUser> = scenario.users.iter().collect();
    users.sort_by_key(|u| u.id);

    let mut allocations = Vec::with_capacity(users.len());
    for user in users {
        let i = (0..servers.len())
            .min_by_key(|&i| (queue[i], servers[i].id))
            .expect("nonempty");
        let mut alloc = Allocation::whole(user.id, servers[i].id);
        alloc.queue_wait_s = f64::from(queue[i]) * service[i];
        queue[i] += 1;
        *increments.get_mut(&servers[i].id).expect("known server") += 1;
        allocations.push(alloc);
    }
    Ok(JsqPlan {
        schedule: Schedule { allocations },
        queue_increments: increments,
    })
}

/// Every task is split into equal shards on every shared server.
pub fn schedule_split_evenly(scenario: &Scenario) -> Result<Schedule, ScheduleError> {
    let servers: Vec<ServerId> = scenario.shared_servers().map(|s| s.id).collect();
    if servers.is_empty() {
        return Err(ScheduleError::InvalidParams("no shared servers".into()));
    }
    let share = 1.0 / servers.len() as f64;
    let allocations = scenario
        .users
        .iter()
        .map(|user| {
            let terms = UserTerms::new(scenario, user)?;
            let x = vec![share; servers.len()];
            let integrator = terms.servers[best_integrator(&terms, &x)];
            Ok(Allocation {
                user: user.id,
                fractions: servers.iter().map(|&m| (m, share)).collect(),
                integrator,
                queue_wait_s: 0.0,
            })
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(Schedule { allocations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::uniform;
    use crate::model::{report, user_latency};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn single_server_single_user() {
        let s = uniform(1, 1, 1e7, 10.0, 20.0, 1e8, 1e9);
        let out = schedule_proposed(&s).unwrap();
        let a = &out.schedule.allocations[0];
        assert_eq!(a.fractions, BTreeMap::from([(0, 1.0)]));
        let direct = user_latency(&s, &Allocation::whole(0, 0)).unwrap().total_s;
        assert_close(out.l_max_s, direct, 1e-12);
        assert_close(out.l_max_s, 0.1 + 0.5, 1e-9);
    }

    #[test]
    fn three_identical_servers_split_evenly() {
        // s = 1e6, b_up = 1e9, b_inter = 1e9, A = 30, p = 10, delta = 0.
        // Splitting three ways: comm 1e-3, comp 1.0, integ 2/3 * 1e-3.
        let s = uniform(3, 1, 1e6, 30.0, 10.0, 1e9, 1e9);
        let out = schedule_proposed(&s).unwrap();
        let a = &out.schedule.allocations[0];
        for x in a.fractions.values() {
            assert_close(*x, 1.0 / 3.0, 1e-9);
        }
        let expected = 1e-3 + 3.0 / 3.0 + (2.0 / 3.0) * 1e-3;
        assert_close(out.l_max_s, expected, 1e-9);
        assert_eq!(a.split_count(), 3);
    }

    #[test]
    fn split_overhead_can_keep_a_task_whole() {
        // with heavy overhead and costly integration, one server wins
        let mut s = uniform(3, 1, 1e9, 1.0, 10.0, 1e10, 1e8);
        s.split_overhead = 5.0;
        let out = schedule_proposed(&s).unwrap();
        assert_eq!(out.schedule.allocations[0].split_count(), 1);
    }

    #[test]
    fn stage_two_stays_within_stage_one() {
        let mut s = uniform(3, 2, 5e7, 40.0, 50.0, 2e9, 6e9);
        s.split_overhead = 0.05;
        s.servers[2].capacity.insert((0, 0), 15.0);
        s.users[1].uplink_bw.insert(0, 1e9);
        let out = schedule_proposed(&s).unwrap();
        assert!(out.l_max_s <= out.stage1_l_max_s * (1.0 + SLACK) + 1e-12);
        assert!(!out.used_fallback);
    }

    #[test]
    fn deterministic() {
        let mut s = uniform(3, 2, 5e7, 40.0, 50.0, 2e9, 6e9);
        s.servers[1].capacity.insert((0, 0), 35.0);
        let a = schedule_proposed(&s).unwrap().schedule;
        let b = schedule_proposed(&s).unwrap().schedule;
        assert_eq!(a, b);
    }

    #[test]
    fn jsq_assigns_round_robin_on_empty_queues() {
        let s = uniform(3, 3, 1e6, 10.0, 10.0, 1e9, 1e9);
        let plan = schedule_jsq(&s).unwrap();
        let servers: Vec<ServerId> = plan
            .schedule
            .allocations
            .iter()
            .map(|a| a.integrator)
            .collect();
        assert_eq!(servers, vec![0, 1, 2]);
        assert!(plan
            .schedule
            .allocations
            .iter()
            .all(|a| a.queue_wait_s == 0.0));
        assert_eq!(plan.queue_increments.values().sum::<u32>(), 3);
    }

    #[test]
    fn jsq_prefers_short_queues_and_charges_waiting() {
        let mut s = uniform(2, 3, 1e6, 10.0, 10.0, 1e9, 1e9);
        s.servers[0].queue_len = 2;
        let plan = schedule_jsq(&s).unwrap();
        let chosen: Vec<ServerId> = plan
            .schedule
            .allocations
            .iter()
            .map(|a| a.integrator)
            .collect();
        // queues: [2, 0] -> 1, [2, 1] -> 1, [2, 2] -> 0
        assert_eq!(chosen, vec![1, 1, 0]);
        let waits: Vec<f64> = plan
            .schedule
            .allocations
            .iter()
            .map(|a| a.queue_wait_s)
            .collect();
        assert_eq!(waits, vec![0.0, 1.0, 2.0]);
        assert_eq!(plan.queue_increments, BTreeMap::from([(0, 1), (1, 2)]));
        let r = report(&s, &plan.schedule).unwrap();
        assert_close(r.per_user[&2].comp_s, 3.0, 1e-12);
    }

    #[test]
    fn jsq_single_user_matches_whole_assignment() {
        let s = uniform(3, 1, 1e6, 10.0, 10.0, 1e9, 1e9);
        let plan = schedule_jsq(&s).unwrap();
        assert_eq!(plan.schedule.allocations[0], Allocation::whole(0, 0));
    }

    #[test]
    fn split_evenly_fractions() {
        let s = uniform(3, 2, 1e6, 10.0, 10.0, 1e9, 1e9);
        let sched = schedule_split_evenly(&s).unwrap();
        for a in &sched.allocations {
            assert_eq!(a.fractions.len(), 3);
            assert!(a.fractions.values().all(|&x| x == 1.0 / 3.0));
            assert_eq!(a.split_count(), 3);
        }
        let one = uniform(1, 1, 1e6, 10.0, 10.0, 1e9, 1e9);
        assert_eq!(
            schedule_split_evenly(&one).unwrap().allocations[0],
            Allocation::whole(0, 0)
        );
    }

    #[test]
    fn split_evenly_integrates_on_best_connected_server() {
        let mut s = uniform(3, 1, 1e6, 10.0, 10.0, 1e9, 1e9);
        s.links.set(1, 0, 1e10);
        s.links.set(1, 2, 1e10);
        let sched = schedule_split_evenly(&s).unwrap();
        assert_eq!(sched.allocations[0].integrator, 1);
    }

    #[test]
    fn local_collapses_to_best_server() {
        // local capacity equal to the MEC capacity, every uplink equal
        let s = uniform(3, 1, 1e7, 10.0, 20.0, 1e8, 1e9);
        let plan = schedule_local(&s, &BTreeMap::from([((0, 0), 20.0)])).unwrap();
        let local = report(&plan.scenario, &plan.schedule).unwrap();
        let single = user_latency(&s, &Allocation::whole(0, 0)).unwrap();
        assert_close(local.max_latency_s, single.total_s, 1e-12);
        let u = local.per_user[&0];
        assert_eq!(u.comm_s, 0.0);
        assert_close(u.comp_s, 0.5, 1e-12);
        assert_close(u.integ_s, 0.1, 1e-12);
        assert!(
            plan.scenario.violations().is_empty(),
            "{:?}",
            plan.scenario.violations()
        );
    }

    #[test]
    fn local_by_hand() {
        // s = 4e7, uplinks 1e9/2e9/5e8, A = {12, 6}, p_local = {4, 3}
        let mut s = uniform(3, 1, 4e7, 12.0, 10.0, 1e9, 1e9);
        s.ops.push(crate::model::ComputeOp {
            id: 1,
            name: "decode".into(),
        });
        s.classes[0].base_workload.insert(1, 6.0);
        s.users[0].ops.push(1);
        for srv in &mut s.servers {
            srv.capacity.insert((0, 1), 10.0);
        }
        s.users[0].uplink_bw = BTreeMap::from([(0, 1e9), (1, 2e9), (2, 5e8)]);
        let local = BTreeMap::from([((0, 0), 4.0), ((0, 1), 3.0)]);
        let plan = schedule_local(&s, &local).unwrap();
        assert_eq!(plan.schedule.allocations[0].integrator, 1);
        let r = report(&plan.scenario, &plan.schedule).unwrap();
        assert_close(r.max_latency_s, 12.0 / 4.0 + 6.0 / 3.0 + 4e7 / 2e9, 1e-12);
    }

    #[test]
    fn local_rejects_bad_capacity() {
        let s = uniform(2, 1, 1e6, 10.0, 10.0, 1e9, 1e9);
        assert!(schedule_local(&s, &BTreeMap::new()).is_err());
        assert!(schedule_local(&s, &BTreeMap::from([((0, 0), 0.0)])).is_err());
    }

    #[test]
    fn policy_kind_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.key().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("fastest".parse::<PolicyKind>().is_err());
    }
}
