//! Latency statistics and the uncanny-valley likability score.
//!
//! Latency maps to resemblance through `r = 1 / (1 + latency / l_ref)`, and
//! resemblance maps to likability through a shape-preserving cubic through
//! a handful of knots. The default knots trace a valley at high but
//! imperfect resemblance, so the composed map is not monotone in latency.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::LatencyReport;
use crate::scheduler::PolicyKind;

/// Default resemblance reference latency, seconds.
pub const DEFAULT_L_REF_S: f64 = 3.0;

pub const DEFAULT_KNOTS: [(f64, f64); 6] = [
    (0.0, 0.0),
    (0.35, 0.45),
    (0.60, 0.20),
    (0.75, -0.30),
    (0.87, 0.10),
    (1.0, 1.0),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("reference latency must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("latency must be finite and non-negative, got {0}")]
    InvalidLatency(f64),
    #[error("resemblance {0} is outside [0, 1]")]
    ResemblanceOutOfRange(f64),
    #[error("invalid likability curve: {0}")]
    InvalidCurve(String),
    #[error("nothing to aggregate")]
    Empty,
}

/// Monotone piecewise-cubic Hermite curve through `(resemblance, likability)` knots.
#[derive(Debug, Clone, PartialEq)]
pub struct LikabilityCurve {
    knots: Vec<(f64, f64)>,
    slopes: Vec<f64>,
}

impl Default for LikabilityCurve {
    fn default() -> Self {
        LikabilityCurve::new(DEFAULT_KNOTS.to_vec()).expect("default knots are valid")
    }
}

impl LikabilityCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, MetricsError> {
        let bad = |m: String| Err(MetricsError::InvalidCurve(m));
        if knots.len() < 3 {
            return bad(format!("need at least 3 knots, got {}", knots.len()));
        }
        if knots.iter().any(|(r, l)| !r.is_finite() || !l.is_finite()) {
            return bad("knots must be finite".into());
        }
        if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return bad("first knot must sit at r = 0 and last at r = 1".into());
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("resemblance must be strictly increasing".into());
        }
        if knots.iter().any(|&(_, l)| !(-1.0..=1.0).contains(&l)) {
            return bad("likability must lie in [-1, 1]".into());
        }
        // A monotone interpolant only has extrema at knots, so counting knot
        // minima is exact.
        let minima = knots
            .windows(3)
            .filter(|w| w[1].1 < w[0].1 && w[1].1 < w[2].1)
            .count();
        if minima != 1 {
            return bad(format!(
                "expected exactly one interior valley, found {minima}"
            ));
        }
        let slopes = pchip_slopes(&knots);
        Ok(LikabilityCurve { knots, slopes })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Evaluates the curve at `r`, which must lie in `[0, 1]`.
    pub fn eval(&self, r: f64) -> Result<f64, MetricsError> {
        if !(0.0..=1.0).contains(&r) {
            return Err(MetricsError::ResemblanceOutOfRange(r));
        }
        let i = match self.knots.iter().position(|&(x, _)| x > r) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => return Ok(self.knots[self.knots.len() - 1].1),
        };
        let (x0, y0) = self.knots[i];
        let (x1, y1) = self.knots[i + 1];
        let h = x1 - x0;
        let t = (r - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * y0 + h10 * h * self.slopes[i] + h01 * y1 + h11 * h * self.slopes[i + 1])
    }
}

/// Fritsch-Carlson slopes: interior slopes are a weighted harmonic mean of
/// the neighbouring secants (zero at local extrema), end slopes use the
/// one-sided three-point formula clipped to keep the end segments monotone.
fn pchip_slopes(knots: &[(f64, f64)]) -> Vec<f64> {
    let n = knots.len();
    let h: Vec<f64> = knots.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let delta: Vec<f64> = knots
        .windows(2)
        .zip(&h)
        .map(|(w, h)| (w[1].1 - w[0].1) / h)
        .collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
            continue;
        }
        let w1 = 2.0 * h[i] + h[i - 1];
        let w2 = h[i] + 2.0 * h[i - 1];
        d[i] = (w1 + w2) / (w1 / a + w2 / b);
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| -> f64 {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// Perceived resemblance for a total latency, `1 / (1 + latency / l_ref)`.
pub fn resemblance(total_latency_s: f64, l_ref_s: f64) -> Result<f64, MetricsError> {
    if !(l_ref_s > 0.0) || !l_ref_s.is_finite() {
        return Err(MetricsError::NonPositiveReference(l_ref_s));
    }
    if !(total_latency_s >= 0.0) || !total_latency_s.is_finite() {
        return Err(MetricsError::InvalidLatency(total_latency_s));
    }
    Ok(1.0 / (1.0 + total_latency_s / l_ref_s))
}

pub fn likability(curve: &LikabilityCurve, r: f64) -> Result<f64, MetricsError> {
    curve.eval(r)
}

/// Likability score for a total latency.
pub fn score(
    curve: &LikabilityCurve,
    total_latency_s: f64,
    l_ref_s: f64,
) -> Result<f64, MetricsError> {
    curve.eval(resemblance(total_latency_s, l_ref_s)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub policy: PolicyKind,
    pub mean_latency_ms: f64,
    pub std_latency_ms: f64,
    pub mean_likability: f64,
    pub std_likability: f64,
    pub n_runs: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and population standard deviation of per-user total latency and
/// likability, pooled over every user of every run.
pub fn aggregate(
    policy: PolicyKind,
    reports: &[LatencyReport],
    curve: &LikabilityCurve,
    l_ref_s: f64,
) -> Result<PolicyResult, MetricsError> {
    let totals: Vec<f64> = reports.iter().flat_map(|r| r.totals_s()).collect();
    if totals.is_empty() {
        return Err(MetricsError::Empty);
    }
    let scores: Vec<f64> = totals
        .iter()
        .map(|&t| score(curve, t, l_ref_s))
        .collect::<Result<_, _>>()?;
    let ms: Vec<f64> = totals.iter().map(|t| t * 1e3).collect();
    let (mean_latency_ms, std_latency_ms) = mean_std(&ms);
    let (mean_likability, std_likability) = mean_std(&scores);
    Ok(PolicyResult {
        policy,
        mean_latency_ms,
        std_latency_ms,
        mean_likability,
        std_likability,
        n_runs: reports.len(),
    })
}
