//! Runs every policy on the shipped template and prints one line per policy.
//!
//!     cargo run --release -p holosched-core --example compare_policies

use holosched_core::{default_template, run_batch, PolicyKind};

fn main() {
    let t = default_template();
    let policies: Vec<_> = PolicyKind::ALL
        .iter()
        .map(|&k| t.policy(k).unwrap())
        .collect();
    let start = std::time::Instant::now();
    let b = run_batch(&t, &policies).unwrap();
    for p in &b.policies {
        let r = &p.result;
        let splits: usize = p.reports.iter().map(|r| r.total_splits()).sum();
        println!(
            "{:>10} {:8.1} ± {:5.1} ms  likability {:+.3} ± {:.3}  splits/run {:.2}",
            r.policy.key(),
            r.mean_latency_ms,
            r.std_latency_ms,
            r.mean_likability,
            r.std_likability,
            splits as f64 / b.n_runs as f64
        );
    }
    println!("{} runs in {:?}", b.n_runs, start.elapsed());
}
