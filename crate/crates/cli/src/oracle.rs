use std::io::Write;
use std::time::{Duration, Instant};

use holosched_core::lp::{self, LpStatus};
use holosched_core::scheduler::{schedule_proposed, SLACK};
use holosched_oracle::{
    grid_l_max, min_total_splits, random_feasible_lp, random_instance, vertex_enumeration,
};

use crate::{EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub seeds: u64,
    pub grid: f64,
    pub lp_seeds: u64,
    pub tolerance: f64,
    pub lp_tolerance: f64,
    pub n_servers: usize,
    pub max_users: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            seeds: 20,
            grid: 0.02,
            lp_seeds: 50,
            tolerance: 0.02,
            lp_tolerance: 1e-6,
            n_servers: 3,
            max_users: 2,
        }
    }
}

/// Worst deviation seen by one check, with the seed that produced it.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Worst {
    pub deviation: f64,
    pub seed: Option<u64>,
}

impl Worst {
    fn observe(&mut self, deviation: f64, seed: u64) {
        if self.seed.is_none() || deviation > self.deviation {
            *self = Worst {
                deviation,
                seed: Some(seed),
            };
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    /// Absolute objective gap between simplex and vertex enumeration.
    pub lp: Worst,
    pub lp_breaches: Vec<u64>,
    pub lp_elapsed: Duration,
    /// Relative gap `|scheduler - grid| / grid` on max latency.
    pub grid: Worst,
    pub grid_breaches: Vec<u64>,
    /// Seeds where the scheduler's optimum was above the grid's.
    pub grid_worse_than_reference: Vec<u64>,
    /// Seeds where the scheduler used more splits than the minimum.
    pub split_mismatches: Vec<u64>,
    pub scheduler_elapsed: Duration,
    pub errors: Vec<String>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.lp_breaches.is_empty()
            && self.grid_breaches.is_empty()
            && self.split_mismatches.is_empty()
            && self.errors.is_empty()
    }
}

/// Instance `seed` of the scheduler family: heterogeneous servers, one or two users.
pub fn scheduler_instance(config: &OracleConfig, seed: u64) -> holosched_core::Scenario {
    random_instance(
        seed,
        config.n_servers,
        1 + (seed as usize) % config.max_users.max(1),
    )
}

pub fn check_lp(config: &OracleConfig, report: &mut OracleReport) {
    let started = Instant::now();
    for seed in 0..config.lp_seeds {
        let program = random_feasible_lp(seed);
        let Some((reference, _)) = vertex_enumeration(&program) else {
            report
                .errors
                .push(format!("lp seed {seed}: reference found no vertex"));
            continue;
        };
        match lp::solve(&program) {
            Ok(sol) if sol.status == LpStatus::Optimal => {
                let dev = (sol.objective_value - reference).abs();
                report.lp.observe(dev, seed);
                if dev > config.lp_tolerance {
                    report.lp_breaches.push(seed);
                }
            }
            Ok(sol) => report
                .errors
                .push(format!("lp seed {seed}: solver returned {:?}", sol.status)),
            Err(e) => report.errors.push(format!("lp seed {seed}: {e}")),
        }
    }
    report.lp_elapsed = started.elapsed();
}

pub fn check_scheduler(config: &OracleConfig, report: &mut OracleReport) {
    let started = Instant::now();
    for seed in 0..config.seeds {
        let s = scheduler_instance(config, seed);
        let out = match schedule_proposed(&s) {
            Ok(out) => out,
            Err(e) => {
                report.errors.push(format!("scheduler seed {seed}: {e}"));
                continue;
            }
        };
        let grid = grid_l_max(&s, config.grid);
        let dev = (out.l_max_s - grid).abs() / grid;
        report.grid.observe(dev, seed);
        if dev > config.tolerance {
            report.grid_breaches.push(seed);
        }
        if out.l_max_s > grid * (1.0 + 1e-9) {
            report.grid_worse_than_reference.push(seed);
        }
        let splits: usize = out
            .schedule
            .allocations
            .iter()
            .map(|a| a.split_count())
            .sum();
        match min_total_splits(&s, out.stage1_l_max_s * (1.0 + SLACK)) {
            Some(min) if min == splits => {}
            _ => report.split_mismatches.push(seed),
        }
    }
    report.scheduler_elapsed = started.elapsed();
}

pub fn run_oracles(config: &OracleConfig) -> OracleReport {
    let mut report = OracleReport::default();
    check_lp(config, &mut report);
    check_scheduler(config, &mut report);
    report
}

fn seed_list(seeds: &[u64]) -> String {
    seeds
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn cmd_oracle(config: &OracleConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let grid_ok = config.grid > 0.0
        && config.grid <= 1.0
        && ((1.0 / config.grid) - (1.0 / config.grid).round()).abs() < 1e-9;
    if !grid_ok {
        let _ = writeln!(
            err,
            "error: --grid must divide 1 evenly (got {})",
            config.grid
        );
        return EXIT_USAGE;
    }
    if config.seeds == 0 && config.lp_seeds == 0 {
        let _ = writeln!(err, "error: nothing to check");
        return EXIT_USAGE;
    }
    let report = run_oracles(config);
    let _ = writeln!(
        out,
        "lp: {} programs, max |simplex - vertices| = {:.3e} (seed {}), {:.2?}",
        config.lp_seeds,
        report.lp.deviation,
        report.lp.seed.map_or("-".into(), |s| s.to_string()),
        report.lp_elapsed
    );
    let _ = writeln!(
        out,
        "scheduler: {} instances, max relative deviation from grid {} = {:.4}% (seed {}), {:.2?}",
        config.seeds,
        config.grid,
        report.grid.deviation * 100.0,
        report.grid.seed.map_or("-".into(), |s| s.to_string()),
        report.scheduler_elapsed
    );
    let _ = writeln!(
        out,
        "scheduler at or below grid optimum on {}/{} instances",
        config.seeds as usize - report.grid_worse_than_reference.len(),
        config.seeds
    );
    let _ = writeln!(
        out,
        "split minimality: {}/{} instances match exhaustive enumeration",
        config.seeds as usize - report.split_mismatches.len(),
        config.seeds
    );
    if report.passed() {
        return EXIT_OK;
    }
    if !report.lp_breaches.is_empty() {
        let _ = writeln!(
            err,
            "lp tolerance {:e} exceeded on seeds {}",
            config.lp_tolerance,
            seed_list(&report.lp_breaches)
        );
    }
    if !report.grid_breaches.is_empty() {
        let _ = writeln!(
            err,
            "grid tolerance {}% exceeded on seeds {}",
            config.tolerance * 100.0,
            seed_list(&report.grid_breaches)
        );
    }
    if !report.split_mismatches.is_empty() {
        let _ = writeln!(
            err,
            "non-minimal splits on seeds {}",
            seed_list(&report.split_mismatches)
        );
    }
    for e in &report.errors {
        let _ = writeln!(err, "{e}");
    }
    EXIT_FAILURE
}
