//! Decay-rate regimes of `E[(Z_t(i) - Z_t)²]` and their numerical diagnostics.
//!
//! | coupling      | regime        | decay            |
//! |---------------|---------------|------------------|
//! | `α < 1/2`     | subcritical   | `t^(-2α)`        |
//! | `α = 1/2`     | critical      | `t^(-1) log t`   |
//! | `α > 1/2`     | supercritical | `t^(-1)`         |
//!
//! Exponents are fitted on the exact moment recursions rather than on sampled
//! trajectories, so the fits carry no Monte-Carlo noise.

use serde::{Deserialize, Serialize};

use crate::moments::limit_sequence;
use crate::numeric::{linear_fit, Compensated};
use crate::{Error, ModelParams, Result};

/// Tolerance used to decide `α = 1/2`.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

/// Default density of the log-spaced subsample used before fitting.
pub const POINTS_PER_DECADE: u32 = 50;

/// Decade means within this relative distance count as bounded.
pub const BOUNDED_RATIO_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeLabel {
    Subcritical,
    Critical,
    Supercritical,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::Subcritical => "subcritical",
            RegimeLabel::Critical => "critical",
            RegimeLabel::Supercritical => "supercritical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub label: RegimeLabel,
    pub alpha: f64,
}

impl Regime {
    /// Power of `t` in the predicted decay, ignoring the logarithm.
    pub fn predicted_exponent(&self) -> f64 {
        match self.label {
            RegimeLabel::Subcritical => -2.0 * self.alpha,
            RegimeLabel::Critical | RegimeLabel::Supercritical => -1.0,
        }
    }

    pub fn predicted_rate(&self) -> String {
        match self.label {
            RegimeLabel::Subcritical => format!("t^(-{})", 2.0 * self.alpha),
            RegimeLabel::Critical => "t^(-1)*log(t)".to_string(),
            RegimeLabel::Supercritical => "t^(-1)".to_string(),
        }
    }
}

pub fn classify_regime(alpha: f64) -> Result<Regime> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParams("alpha must lie in [0,1]".into()));
    }
    let label = if (alpha - 0.5).abs() <= CRITICAL_TOLERANCE {
        RegimeLabel::Critical
    } else if alpha < 0.5 {
        RegimeLabel::Subcritical
    } else {
        RegimeLabel::Supercritical
    };
    Ok(Regime { label, alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Least-squares line through `(ln t, ln value)` for points with `t` in the
/// window.
pub fn fit_power_law(series: &[(f64, f64)], window: (f64, f64)) -> Result<ExponentFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, value) in series
        .iter()
        .filter(|(t, _)| (window.0..=window.1).contains(t))
    {
        if value.is_nan() || t.is_nan() || value <= 0.0 || t <= 0.0 {
            return Err(Error::NonPositive { t, value });
        }
        xs.push(t.ln());
        ys.push(value.ln());
    }
    if xs.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} points in window [{}, {}], need at least 10",
            xs.len(),
            window.0,
            window.1
        )));
    }
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(ExponentFit {
        slope,
        intercept,
        r_squared,
        window,
    })
}

/// Roughly `per_decade` log-spaced integer times in `[lo, hi]` paired with
/// `values[t]`.
pub fn log_subsample(values: &[f64], lo: u64, hi: u64, per_decade: u32) -> Vec<(f64, f64)> {
    let hi = hi.min(values.len() as u64 - 1);
    if lo == 0 || lo > hi {
        return Vec::new();
    }
    let start = (lo as f64).log10();
    let span = (hi as f64).log10() - start;
    let count = (span * per_decade as f64).round().max(1.0) as u64;
    let mut ts: Vec<u64> = (0..=count)
        .map(|k| 10f64.powf(start + span * k as f64 / count as f64).round() as u64)
        .map(|t| t.clamp(lo, hi))
        .collect();
    ts.dedup();
    ts.into_iter()
        .map(|t| (t as f64, values[t as usize]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecadeMean {
    /// Points with `10^decade ≤ t < 10^(decade+1)`.
    pub decade: i32,
    pub mean_ratio: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub decades: Vec<DecadeMean>,
    /// Last two decade means within [`BOUNDED_RATIO_TOLERANCE`] of each other.
    pub bounded: bool,
    pub monotone_increasing: bool,
}

/// Per-decade means of `t x_t / ln t`, which stay bounded exactly when the
/// decay is `t^(-1) log t`.
pub fn critical_diagnostic(series: &[(f64, f64)]) -> Result<CriticalReport> {
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t > 1.0).collect();
    let (first, last) = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(Error::InsufficientData("empty series".into())),
    };
    let lo = first.log10().ceil() as i32;
    let hi = last.log10().floor() as i32;
    // complete decades [10^d, 10^(d+1)] inside the covered range
    if hi - lo < 3 {
        return Err(Error::InsufficientData(format!(
            "series spans [{first}, {last}], need at least 3 complete decades"
        )));
    }
    let decades: Vec<DecadeMean> = (lo..hi)
        .map(|d| {
            let (a, b) = (10f64.powi(d), 10f64.powi(d + 1));
            let ratios: Vec<f64> = pts
                .iter()
                .filter(|(t, _)| *t >= a && *t < b)
                .map(|(t, x)| t * x / t.ln())
                .collect();
            DecadeMean {
                decade: d,
                mean_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
                points: ratios.len(),
            }
        })
        .collect();
    let n = decades.len();
    let (prev, last) = (decades[n - 2].mean_ratio, decades[n - 1].mean_ratio);
    let bounded = ((last - prev) / prev).abs() <= BOUNDED_RATIO_TOLERANCE;
    let monotone_increasing = decades
        .windows(2)
        .all(|w| w[1].mean_ratio > w[0].mean_ratio);
    Ok(CriticalReport {
        decades,
        bounded,
        monotone_increasing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiMartingaleReport {
    /// `S_T = Σ_{t<T} α sqrt(x_t) / (t+m+1)` for `T = 0..=len`.
    pub partial_sums: Vec<f64>,
    pub total: f64,
    /// `S_T - S_{T/10}`.
    pub tail_increment: f64,
    /// `tail_increment / total` (zero when the total vanishes).
    pub tail_fraction: f64,
    /// Increments over successive complete decades `[10^d, 10^(d+1))`.
    pub decade_increments: Vec<f64>,
}

/// Partial sums of the bound on the expected absolute conditional drift of
/// `Z_t(i)`; their convergence is the quasi-martingale premise of almost sure
/// synchronization.
pub fn quasi_martingale_sum(params: &ModelParams, x_sequence: &[f64]) -> QuasiMartingaleReport {
    let m = params.total_init();
    let mut acc = Compensated::default();
    let mut partial_sums = Vec::with_capacity(x_sequence.len() + 1);
    partial_sums.push(0.0);
    for (t, &x) in x_sequence.iter().enumerate() {
        acc.add(params.alpha * x.max(0.0).sqrt() / (t as u64 + m + 1) as f64);
        partial_sums.push(acc.value());
    }
    let horizon = x_sequence.len();
    let total = partial_sums[horizon];
    let tail_increment = total - partial_sums[horizon / 10];
    let tail_fraction = if total > 0.0 {
        tail_increment / total
    } else {
        0.0
    };
    let mut decade_increments = Vec::new();
    let mut lo = 1usize;
    while lo * 10 <= horizon {
        decade_increments.push(partial_sums[lo * 10] - partial_sums[lo]);
        lo *= 10;
    }
    QuasiMartingaleReport {
        partial_sums,
        total,
        tail_increment,
        tail_fraction,
        decade_increments,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRecord {
    pub alpha: f64,
    pub regime: RegimeLabel,
    pub slope: f64,
    pub r_squared: f64,
    pub window: (u64, u64),
    /// `"bounded"` or `"unbounded"` from [`critical_diagnostic`].
    pub ratio_flag: String,
}

/// Fit the decay exponent of the limit recursion over `window` and run the
/// critical-ratio diagnostic over `[min(100, lo), hi]`.
pub fn analyze(params: &ModelParams, window: (u64, u64)) -> Result<AsymptoticsRecord> {
    params.validate()?;
    let (lo, hi) = window;
    if lo == 0 || lo >= hi {
        return Err(Error::InvalidParams(format!("invalid window [{lo}, {hi}]")));
    }
    let regime = classify_regime(params.alpha)?;
    let x = limit_sequence(params, hi);
    let fit = fit_power_law(
        &log_subsample(&x, lo, hi, POINTS_PER_DECADE),
        (lo as f64, hi as f64),
    )?;
    let diag = critical_diagnostic(&log_subsample(&x, lo.min(100), hi, POINTS_PER_DECADE))?;
    Ok(AsymptoticsRecord {
        alpha: params.alpha,
        regime: regime.label,
        slope: fit.slope,
        r_squared: fit.r_squared,
        window,
        ratio_flag: if diag.bounded { "bounded" } else { "unbounded" }.to_string(),
    })
}
