//! Scenario templates, seeded sampling, and paired batch evaluation.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, LikabilityCurve, MetricsError, PolicyResult};
use crate::model::{
    ComputeOp, DataClass, InterServerLinks, LatencyReport, MecServer, ModelError, Scenario,
    TeleportedUser,
};
use crate::scheduler::{CapacityTable, Policy, PolicyKind, ScheduleError};

/// Closed interval `[lo, hi]`, written as a two-element array.
pub type Range = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpSpec {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    #[serde(default)]
    pub name: String,
    pub size_bits: f64,
    /// Unsplit work per op name, operation-units.
    pub workload: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityRange {
    pub class: usize,
    pub op: String,
    pub range: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub queue_len: u32,
    pub capacity: Vec<CapacityRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalCapacity {
    pub class: usize,
    pub op: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSpec {
    pub capacity: Vec<LocalCapacity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikabilitySpec {
    #[serde(default = "default_l_ref_ms")]
    pub l_ref_ms: f64,
    #[serde(default = "default_knots")]
    pub knots: Vec<[f64; 2]>,
}

fn default_l_ref_ms() -> f64 {
    metrics::DEFAULT_L_REF_S * 1e3
}

fn default_knots() -> Vec<[f64; 2]> {
    metrics::DEFAULT_KNOTS
        .iter()
        .map(|&(r, l)| [r, l])
        .collect()
}

impl Default for LikabilitySpec {
    fn default() -> Self {
        LikabilitySpec {
            l_ref_ms: default_l_ref_ms(),
            knots: default_knots(),
        }
    }
}

fn default_runs() -> usize {
    100
}

fn default_overhead() -> f64 {
    0.05
}

/// Parameter ranges from which run scenarios are drawn. The number of
/// servers is the length of `servers`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTemplate {
    pub n_users: usize,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_overhead")]
    pub split_overhead: f64,
    pub bw_uplink_range: Range,
    pub bw_interserver_range: Range,
    pub ops: Vec<OpSpec>,
    pub classes: Vec<ClassSpec>,
    pub servers: Vec<ServerSpec>,
    /// Class of each user; defaults to `user % classes.len()`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_classes: Option<Vec<usize>>,
    #[serde(default)]
    pub local: LocalSpec,
    #[serde(default)]
    pub likability: LikabilitySpec,
}

/// One invariant violation with the dotted path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid template: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Template(Vec<Violation>),
    #[error("run {run}: {source}")]
    Scenario { run: usize, source: ModelError },
    #[error("run {run}, policy {policy}: {source}")]
    Policy {
        run: usize,
        policy: PolicyKind,
        source: ScheduleError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("no policies to evaluate")]
    NoPolicies,
    #[error("template has no local capacity table; the local policy needs one")]
    MissingLocalCapacity,
}

impl ScenarioTemplate {
    pub fn n_servers(&self) -> usize {
        self.servers.len()
    }

    fn op_index(&self, name: &str) -> Option<usize> {
        self.ops.iter().position(|o| o.name == name)
    }

    fn user_class(&self, user: usize) -> usize {
        match &self.user_classes {
            Some(c) => c[user],
            None => user % self.classes.len().max(1),
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |path: String, message: String| out.push(Violation { path, message });
        let range = |path: &str, r: Range, push: &mut dyn FnMut(String, String)| {
            if !r[0].is_finite() || !r[1].is_finite() {
                push(
                    path.into(),
                    format!("bounds must be finite, got [{}, {}]", r[0], r[1]),
                );
            } else if r[0] > r[1] {
                push(
                    path.into(),
                    format!("lower bound {} exceeds upper bound {}", r[0], r[1]),
                );
            } else if r[0] <= 0.0 {
                push(
                    path.into(),
                    format!("values must be positive, got [{}, {}]", r[0], r[1]),
                );
            }
        };

        if self.servers.is_empty() {
            push("servers".into(), "at least one server is required".into());
        }
        if self.n_users == 0 {
            push("n_users".into(), "at least one user is required".into());
        }
        if self.n_runs == 0 {
            push("n_runs".into(), "at least one run is required".into());
        }
        if !(self.split_overhead >= 0.0) || !self.split_overhead.is_finite() {
            push(
                "split_overhead".into(),
                format!("must be finite and >= 0, got {}", self.split_overhead),
            );
        }
        range("bw_uplink_range", self.bw_uplink_range, &mut push);
        range("bw_interserver_range", self.bw_interserver_range, &mut push);
        if self.ops.is_empty() {
            push("ops".into(), "at least one op is required".into());
        }
        for (i, op) in self.ops.iter().enumerate() {
            if self.ops[..i].iter().any(|o| o.name == op.name) {
                push(
                    format!("ops[{i}].name"),
                    format!("duplicate op name `{}`", op.name),
                );
            }
        }
        if self.classes.is_empty() {
            push("classes".into(), "at least one class is required".into());
        }
        for (k, class) in self.classes.iter().enumerate() {
            if !(class.size_bits > 0.0) || !class.size_bits.is_finite() {
                push(
                    format!("classes[{k}].size_bits"),
                    format!("must be positive, got {}", class.size_bits),
                );
            }
            if class.workload.is_empty() {
                push(
                    format!("classes[{k}].workload"),
                    "at least one op workload is required".into(),
                );
            }
            for (op, &w) in &class.workload {
                if self.op_index(op).is_none() {
                    push(
                        format!("classes[{k}].workload.{op}"),
                        format!("unknown op `{op}`"),
                    );
                }
                if !(w > 0.0) || !w.is_finite() {
                    push(
                        format!("classes[{k}].workload.{op}"),
                        format!("must be positive, got {w}"),
                    );
                }
            }
        }
        if let Some(uc) = &self.user_classes {
            if uc.len() != self.n_users {
                push(
                    "user_classes".into(),
                    format!("has {} entries for {} users", uc.len(), self.n_users),
                );
            }
            for (n, &k) in uc.iter().enumerate() {
                if k >= self.classes.len() {
                    push(format!("user_classes[{n}]"), format!("unknown class {k}"));
                }
            }
        }

        // (class, op) pairs that some server must be able to process
        let needed: Vec<(usize, &str)> = self
            .classes
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.workload.keys().map(move |op| (k, op.as_str())))
            .collect();

        for (m, server) in self.servers.iter().enumerate() {
            for (j, entry) in server.capacity.iter().enumerate() {
                let path = format!("servers[{m}].capacity[{j}]");
                if entry.class >= self.classes.len() {
                    push(
                        format!("{path}.class"),
                        format!("unknown class {}", entry.class),
                    );
                }
                if self.op_index(&entry.op).is_none() {
                    push(format!("{path}.op"), format!("unknown op `{}`", entry.op));
                }
                range(&format!("{path}.range"), entry.range, &mut push);
                if server.capacity[..j]
                    .iter()
                    .any(|e| e.class == entry.class && e.op == entry.op)
                {
                    push(
                        path,
                        format!(
                            "duplicate entry for (class {}, op {})",
                            entry.class, entry.op
                        ),
                    );
                }
            }
            for &(k, op) in &needed {
                if !server.capacity.iter().any(|e| e.class == k && e.op == op) {
                    push(
                        format!("servers[{m}].capacity"),
                        format!("missing entry for (class {k}, op {op}) on server {m}"),
                    );
                }
            }
        }

        if !self.local.capacity.is_empty() {
            for (j, entry) in self.local.capacity.iter().enumerate() {
                let path = format!("local.capacity[{j}]");
                if entry.class >= self.classes.len() {
                    push(
                        format!("{path}.class"),
                        format!("unknown class {}", entry.class),
                    );
                }
                if self.op_index(&entry.op).is_none() {
                    push(format!("{path}.op"), format!("unknown op `{}`", entry.op));
                }
                if !(entry.value > 0.0) || !entry.value.is_finite() {
                    push(
                        format!("{path}.value"),
                        format!("must be positive, got {}", entry.value),
                    );
                }
            }
            for &(k, op) in &needed {
                if !self
                    .local
                    .capacity
                    .iter()
                    .any(|e| e.class == k && e.op == op)
                {
                    push(
                        "local.capacity".into(),
                        format!("missing entry for (class {k}, op {op})"),
                    );
                }
            }
        }

        if !(self.likability.l_ref_ms > 0.0) || !self.likability.l_ref_ms.is_finite() {
            push(
                "likability.l_ref_ms".into(),
                format!("must be positive, got {}", self.likability.l_ref_ms),
            );
        }
        if let Err(e) = self.curve() {
            push("likability.knots".into(), e.to_string());
        }
        out.sort();
        out
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(SimError::Template(v))
        }
    }

    pub fn curve(&self) -> Result<LikabilityCurve, MetricsError> {
        LikabilityCurve::new(self.likability.knots.iter().map(|k| (k[0], k[1])).collect())
    }

    pub fn l_ref_s(&self) -> f64 {
        self.likability.l_ref_ms / 1e3
    }

    pub fn local_capacity(&self) -> Option<CapacityTable> {
        if self.local.capacity.is_empty() {
            return None;
        }
        self.local
            .capacity
            .iter()
            .map(|e| Some(((e.class, self.op_index(&e.op)?), e.value)))
            .collect()
    }

    /// Builds the policy of `kind`, pulling any parameters from the template.
    pub fn policy(&self, kind: PolicyKind) -> Result<Policy, SimError> {
        Ok(match kind {
            PolicyKind::Proposed => Policy::Proposed,
            PolicyKind::JoinShortestQueue => Policy::JoinShortestQueue,
            PolicyKind::AlwaysSplitEvenly => Policy::AlwaysSplitEvenly,
            PolicyKind::LocalComputation => Policy::LocalComputation {
                local_capacity: self
                    .local_capacity()
                    .ok_or(SimError::MissingLocalCapacity)?,
            },
        })
    }
}

fn draw(rng: &mut ChaCha8Rng, r: Range) -> f64 {
    if r[1] > r[0] {
        rng.gen_range(r[0]..=r[1])
    } else {
        r[0]
    }
}

/// Draws the scenario for `run_index`. The result depends only on the
/// template and `(rng_seed, run_index)`.
pub fn sample(template: &ScenarioTemplate, run_index: usize) -> Result<Scenario, SimError> {
    template.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(template.rng_seed);
    rng.set_stream(run_index as u64);

    let n_servers = template.n_servers();
    let ops: Vec<ComputeOp> = template
        .ops
        .iter()
        .enumerate()
        .map(|(id, o)| ComputeOp {
            id,
            name: o.name.clone(),
        })
        .collect();
    let op_id = |name: &str| template.op_index(name).expect("validated op name");
    let classes: Vec<DataClass> = template
        .classes
        .iter()
        .enumerate()
        .map(|(id, c)| DataClass {
            id,
            size_bits: c.size_bits,
            base_workload: c.workload.iter().map(|(op, &w)| (op_id(op), w)).collect(),
        })
        .collect();

    let mut users = Vec::with_capacity(template.n_users);
    for n in 0..template.n_users {
        let class = template.user_class(n);
        let uplink_bw = (0..n_servers)
            .map(|m| (m, draw(&mut rng, template.bw_uplink_range)))
            .collect();
        users.push(TeleportedUser {
            id: n,
            class,
            ops: classes[class].base_workload.keys().copied().collect(),
            uplink_bw,
        });
    }
    let mut links = InterServerLinks::new();
    for a in 0..n_servers {
        for b in (a + 1)..n_servers {
            links.set(a, b, draw(&mut rng, template.bw_interserver_range));
        }
    }
    let servers = template
        .servers
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            let capacity = spec
                .capacity
                .iter()
                .map(|e| ((e.class, op_id(&e.op)), draw(&mut rng, e.range)))
                .collect();
            let mut server = MecServer::new(m, capacity);
            server.queue_len = spec.queue_len;
            server
        })
        .collect();

    let scenario = Scenario {
        servers,
        users,
        links,
        classes,
        ops,
        split_overhead: template.split_overhead,
        rng_seed: template.rng_seed,
    };
    scenario.validate().map_err(|source| SimError::Scenario {
        run: run_index,
        source,
    })?;
    Ok(scenario)
}

/// Reports for one policy across every run of a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyBatch {
    pub policy: PolicyKind,
    /// Indexed by run.
    pub reports: Vec<LatencyReport>,
    /// Fingerprint of the scenario each report was computed on.
    pub fingerprints: Vec<u64>,
    pub result: PolicyResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchResult {
    pub n_runs: usize,
    pub policies: Vec<PolicyBatch>,
}

impl BatchResult {
    pub fn get(&self, kind: PolicyKind) -> Option<&PolicyBatch> {
        self.policies.iter().find(|p| p.policy == kind)
    }
}

fn run_one(
    template: &ScenarioTemplate,
    policies: &[Policy],
    run: usize,
) -> Result<(u64, Vec<LatencyReport>), SimError> {
    let scenario = sample(template, run)?;
    let fp = scenario.fingerprint();
    let reports = policies
        .iter()
        .map(|p| {
            p.evaluate(&scenario).map_err(|source| SimError::Policy {
                run,
                policy: p.kind(),
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok((fp, reports))
}

/// Evaluates every policy on the same scenario draw for each run, then
/// aggregates. Results are ordered by run index.
pub fn run_batch(
    template: &ScenarioTemplate,
    policies: &[Policy],
) -> Result<BatchResult, SimError> {
    if policies.is_empty() {
        return Err(SimError::NoPolicies);
    }
    template.validate()?;
    let curve = template.curve()?;

    #[cfg(feature = "parallel")]
    let runs: Vec<(u64, Vec<LatencyReport>)> = {
        use rayon::prelude::*;
        (0..template.n_runs)
            .into_par_iter()
            .map(|run| run_one(template, policies, run))
            .collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<(u64, Vec<LatencyReport>)> = (0..template.n_runs)
        .map(|run| run_one(template, policies, run))
        .collect::<Result<_, _>>()?;

    let mut out = Vec::with_capacity(policies.len());
    for (i, policy) in policies.iter().enumerate() {
        let reports: Vec<LatencyReport> = runs.iter().map(|(_, r)| r[i].clone()).collect();
        let fingerprints = runs.iter().map(|(fp, _)| *fp).collect();
        let result = metrics::aggregate(policy.kind(), &reports, &curve, template.l_ref_s())?;
        out.push(PolicyBatch {
            policy: policy.kind(),
            reports,
            fingerprints,
            result,
        });
    }
    Ok(BatchResult {
        n_runs: template.n_runs,
        policies: out,
    })
}
