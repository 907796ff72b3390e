//! Result files. Every writer is a pure function of the batch so repeated
//! runs with the same seed produce identical bytes.

use std::io::Write;
use std::path::Path;

use holosched_core::metrics::{self, LikabilityCurve};
use holosched_core::{BatchResult, PolicyKind, PolicyResult, ScenarioTemplate};
use serde::Serialize;

/// Writes through a temp file in the same directory, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Policy results sorted by ascending mean latency.
pub fn ranked(batch: &BatchResult) -> Vec<&PolicyResult> {
    let mut rows: Vec<&PolicyResult> = batch.policies.iter().map(|p| &p.result).collect();
    rows.sort_by(|a, b| a.mean_latency_ms.total_cmp(&b.mean_latency_ms));
    rows
}

/// Lowest mean latency among the non-proposed policies.
pub fn best_baseline_ms(batch: &BatchResult) -> Option<f64> {
    batch
        .policies
        .iter()
        .filter(|p| p.policy != PolicyKind::Proposed)
        .map(|p| p.result.mean_latency_ms)
        .min_by(f64::total_cmp)
}

/// Percentage by which `mean_ms` undercuts `baseline_ms`; negative when slower.
pub fn reduction_pct(mean_ms: f64, baseline_ms: f64) -> f64 {
    100.0 * (baseline_ms - mean_ms) / baseline_ms
}

pub fn latency_csv(batch: &BatchResult) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "run", "policy", "user", "comm_ms", "comp_ms", "integ_ms", "total_ms", "splits",
    ])
    .expect("in-memory write");
    for run in 0..batch.n_runs {
        for p in &batch.policies {
            for (user, u) in &p.reports[run].per_user {
                w.write_record([
                    run.to_string(),
                    p.policy.key().to_string(),
                    user.to_string(),
                    format!("{:.6}", u.comm_s * 1e3),
                    format!("{:.6}", u.comp_s * 1e3),
                    format!("{:.6}", u.integ_s * 1e3),
                    format!("{:.6}", u.total_s * 1e3),
                    u.splits.to_string(),
                ])
                .expect("in-memory write");
            }
        }
    }
    w.into_inner().expect("in-memory flush")
}

pub fn summary_md(template: &ScenarioTemplate, batch: &BatchResult) -> String {
    let baseline = best_baseline_ms(batch);
    let mut s = String::new();
    s.push_str("# Latency and likability by policy\n\n");
    s.push_str(&format!(
        "{} runs, {} users, {} servers, seed {}. Latency is the per-user total, pooled over runs.\n\n",
        batch.n_runs,
        template.n_users,
        template.n_servers(),
        template.rng_seed
    ));
    s.push_str("| Policy | Latency (ms) | Likability | Reduction vs best baseline |\n");
    s.push_str("|---|---:|---:|---:|\n");
    for r in ranked(batch) {
        let reduction = baseline.map_or("n/a".to_string(), |b| {
            format!("{:.1}%", reduction_pct(r.mean_latency_ms, b))
        });
        s.push_str(&format!(
            "| {} | {:.1} ± {:.1} | {:+.3} | {} |\n",
            r.policy.label(),
            r.mean_latency_ms,
            r.std_latency_ms,
            r.mean_likability,
            reduction
        ));
    }
    s
}

#[derive(Serialize)]
struct Series<'a> {
    seed: u64,
    n_runs: usize,
    n_users: usize,
    l_ref_ms: f64,
    policies: Vec<PolicySeries<'a>>,
    likability_curve: Vec<CurvePoint>,
}

#[derive(Serialize)]
struct PolicySeries<'a> {
    policy: &'static str,
    label: &'static str,
    summary: &'a PolicyResult,
    max_latency_ms: Vec<f64>,
    mean_latency_ms: Vec<f64>,
    mean_likability: Vec<f64>,
    total_splits: Vec<usize>,
}

#[derive(Serialize)]
struct CurvePoint {
    latency_ms: f64,
    resemblance: f64,
    likability: f64,
}

fn curve_points(curve: &LikabilityCurve, l_ref_s: f64) -> Vec<CurvePoint> {
    // uniform in resemblance so the valley gets as many points as the tails
    (1..=200)
        .map(|k| {
            let r = k as f64 / 200.0;
            let latency_s = l_ref_s * (1.0 / r - 1.0);
            CurvePoint {
                latency_ms: latency_s * 1e3,
                resemblance: r,
                likability: curve.eval(r).expect("r in [0, 1]"),
            }
        })
        .collect()
}

/// Per-run series for plotting plus a sampled likability curve.
pub fn series_json(template: &ScenarioTemplate, batch: &BatchResult) -> Vec<u8> {
    let curve = template.curve().expect("validated before the batch ran");
    let l_ref_s = template.l_ref_s();
    let policies = batch
        .policies
        .iter()
        .map(|p| {
            let mut max_ms = Vec::with_capacity(batch.n_runs);
            let mut mean_ms = Vec::with_capacity(batch.n_runs);
            let mut lik = Vec::with_capacity(batch.n_runs);
            for r in &p.reports {
                let totals: Vec<f64> = r.totals_s().collect();
                let n = totals.len() as f64;
                max_ms.push(r.max_latency_s * 1e3);
                mean_ms.push(totals.iter().sum::<f64>() / n * 1e3);
                let scores: f64 = totals
                    .iter()
                    .map(|&t| metrics::score(&curve, t, l_ref_s).expect("finite latency"))
                    .sum();
                lik.push(scores / n);
            }
            PolicySeries {
                policy: p.policy.key(),
                label: p.policy.label(),
                summary: &p.result,
                max_latency_ms: max_ms,
                mean_latency_ms: mean_ms,
                mean_likability: lik,
                total_splits: p.reports.iter().map(|r| r.total_splits()).collect(),
            }
        })
        .collect();
    let series = Series {
        seed: template.rng_seed,
        n_runs: batch.n_runs,
        n_users: template.n_users,
        l_ref_ms: l_ref_s * 1e3,
        policies,
        likability_curve: curve_points(&curve, l_ref_s),
    };
    let mut bytes = serde_json::to_vec_pretty(&series).expect("plain data serializes");
    bytes.push(b'\n');
    bytes
}
