use holosched_core::metrics::{self, LikabilityCurve};
use holosched_core::model::report;
use holosched_core::scheduler::schedule_proposed;
use holosched_core::{default_template, run_batch, sample, PolicyKind, ScenarioTemplate};
use serde::{Deserialize, Serialize};

/// Slider state sent by the page. Missing fields keep the shipped defaults.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoParams {
    pub n_users: usize,
    pub n_runs: usize,
    pub seed: u64,
    /// Multiplies both ends of the uplink bandwidth range.
    pub uplink_scale: f64,
    /// Multiplies every server's capacity range.
    pub capacity_scale: f64,
    pub split_overhead: f64,
    pub l_ref_ms: f64,
}

impl Default for DemoParams {
    fn default() -> Self {
        let t = default_template();
        DemoParams {
            n_users: t.n_users,
            n_runs: 20,
            seed: t.rng_seed,
            uplink_scale: 1.0,
            capacity_scale: 1.0,
            split_overhead: t.split_overhead,
            l_ref_ms: t.l_ref_s() * 1e3,
        }
    }
}

pub fn parse(json: &str) -> Result<DemoParams, String> {
    if json.trim().is_empty() {
        return Ok(DemoParams::default());
    }
    serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))
}

impl DemoParams {
    pub fn template(&self) -> Result<ScenarioTemplate, String> {
        if !(1..=16).contains(&self.n_users) {
            return Err("n_users must be between 1 and 16".into());
        }
        if !(1..=500).contains(&self.n_runs) {
            return Err("n_runs must be between 1 and 500".into());
        }
        for (name, v) in [
            ("uplink_scale", self.uplink_scale),
            ("capacity_scale", self.capacity_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive"));
            }
        }
        let mut t = default_template();
        t.n_users = self.n_users;
        t.n_runs = self.n_runs;
        t.rng_seed = self.seed;
        t.split_overhead = self.split_overhead;
        t.bw_uplink_range = t.bw_uplink_range.map(|b| b * self.uplink_scale);
        if let Some(uc) = &t.user_classes {
            t.user_classes = Some((0..self.n_users).map(|n| uc[n % uc.len()]).collect());
        }
        for s in &mut t.servers {
            for c in &mut s.capacity {
                c.range = c.range.map(|p| p * self.capacity_scale);
            }
        }
        t.likability.l_ref_ms = self.l_ref_ms;
        t.validate().map_err(|e| e.to_string())?;
        Ok(t)
    }
}

#[derive(Serialize)]
struct PolicyRow {
    policy: &'static str,
    label: &'static str,
    mean_ms: f64,
    std_ms: f64,
    likability: f64,
    max_ms: Vec<f64>,
}

pub fn compare(p: &DemoParams) -> Result<String, String> {
    let t = p.template()?;
    let policies = PolicyKind::ALL
        .iter()
        .map(|&k| t.policy(k))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let batch = run_batch(&t, &policies).map_err(|e| e.to_string())?;
    let mut rows: Vec<PolicyRow> = batch
        .policies
        .iter()
        .map(|b| PolicyRow {
            policy: b.policy.key(),
            label: b.policy.label(),
            mean_ms: b.result.mean_latency_ms,
            std_ms: b.result.std_latency_ms,
            likability: b.result.mean_likability,
            max_ms: b.reports.iter().map(|r| r.max_latency_s * 1e3).collect(),
        })
        .collect();
    rows.sort_by(|a, b| a.mean_ms.total_cmp(&b.mean_ms));
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct UserRow {
    user: usize,
    /// `[server, fraction]` pairs for every server with a non-zero share.
    fractions: Vec<(usize, f64)>,
    integrator: usize,
    comm_ms: f64,
    comp_ms: f64,
    integ_ms: f64,
    total_ms: f64,
}

#[derive(Serialize)]
struct Breakdown {
    servers: Vec<String>,
    l_max_ms: f64,
    users: Vec<UserRow>,
}

pub fn breakdown(p: &DemoParams, run: usize) -> Result<String, String> {
    let t = p.template()?;
    let s = sample(&t, run).map_err(|e| e.to_string())?;
    let out = schedule_proposed(&s).map_err(|e| e.to_string())?;
    let r = report(&s, &out.schedule).map_err(|e| e.to_string())?;
    let users = out
        .schedule
        .allocations
        .iter()
        .map(|a| {
            let u = &r.per_user[&a.user];
            UserRow {
                user: a.user,
                fractions: a
                    .fractions
                    .iter()
                    .filter(|(_, &x)| x > 0.0)
                    .map(|(&m, &x)| (m, x))
                    .collect(),
                integrator: a.integrator,
                comm_ms: u.comm_s * 1e3,
                comp_ms: u.comp_s * 1e3,
                integ_ms: u.integ_s * 1e3,
                total_ms: u.total_s * 1e3,
            }
        })
        .collect();
    let b = Breakdown {
        servers: t.servers.iter().map(|s| s.name.clone()).collect(),
        l_max_ms: r.max_latency_s * 1e3,
        users,
    };
    serde_json::to_string(&b).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CurvePoint {
    latency_ms: f64,
    resemblance: f64,
    likability: f64,
}

pub fn curve(l_ref_ms: f64, points: usize) -> Result<String, String> {
    if !(l_ref_ms.is_finite() && l_ref_ms > 0.0) {
        return Err("l_ref_ms must be positive".into());
    }
    if !(2..=10_000).contains(&points) {
        return Err("points must be between 2 and 10000".into());
    }
    let c = LikabilityCurve::new(metrics::DEFAULT_KNOTS.to_vec()).map_err(|e| e.to_string())?;
    let l_ref_s = l_ref_ms / 1e3;
    // latency axis up to 4 x l_ref keeps the valley in the middle of the plot
    let top = 4.0 * l_ref_s;
    let pts = (0..points)
        .map(|i| {
            let l = top * i as f64 / (points - 1) as f64;
            let r = metrics::resemblance(l, l_ref_s).map_err(|e| e.to_string())?;
            Ok(CurvePoint {
                latency_ms: l * 1e3,
                resemblance: r,
                likability: c.eval(r).map_err(|e| e.to_string())?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    serde_json::to_string(&pts).map_err(|e| e.to_string())
}
