//! Large-`N` Gaussian limit of the mean fraction.
//!
//! `W_t^N = sqrt(N) (Z_t - a/m)` converges as `N → ∞` to the Gauss-Markov
//! chain `W_0 = 0`, `W_{t+1} = W_t + σ_t B_{t+1}` with i.i.d. standard normal
//! `B` and
//!
//! ```text
//! σ_t² = [(a/m - a²/m²) - (1-α)² x^∞_t] / (t+m+1)²
//! ```
//!
//! For finite `N`, `W_t^N` alone is not Markov: the full vector of urn
//! fractions is needed. The checks here are therefore finite-dimensional:
//! marginal variances against the exact finite-`N` recursion, marginal
//! skewness and kurtosis, and correlations between increments.

use serde::{Deserialize, Serialize};

use crate::moments::{finite_n_sequence, limit_sequence};
use crate::montecarlo::map_replicas;
use crate::parallel::Execution;
use crate::sim::{init_system, simulate_to, Stepper, SystemState};
use crate::stats::{pearson, StreamingStats};
use crate::{Error, ModelParams, Result, UniformSource};

/// Schedule entries below this are treated as a recursion bug.
pub const NEGATIVE_TOLERANCE: f64 = -1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSchedule {
    /// `σ_t²` for `t = 0..horizon`.
    pub sigma_sq: Vec<f64>,
}

impl SigmaSchedule {
    pub fn horizon(&self) -> usize {
        self.sigma_sq.len()
    }

    /// `Var(W_t) = Σ_{s<t} σ_s²` for `t = 0..=horizon`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.sigma_sq.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for s in &self.sigma_sq {
            acc += s;
            out.push(acc);
        }
        out
    }
}

pub fn sigma_schedule(params: &ModelParams, horizon: u64) -> Result<SigmaSchedule> {
    params.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon must be ≥ 1".into()));
    }
    let x_inf = limit_sequence(params, horizon - 1);
    let var = params.bernoulli_variance();
    let coupling = (1.0 - params.alpha).powi(2);
    let m = params.total_init();
    let sigma_sq = x_inf
        .iter()
        .enumerate()
        .map(|(t, &x)| {
            let s = (t as u64 + m + 1) as f64;
            let value = (var - coupling * x) / (s * s);
            if value < NEGATIVE_TOLERANCE {
                Err(Error::NegativeVariance { t: t as u64, value })
            } else {
                Ok(value.max(0.0))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SigmaSchedule { sigma_sq })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPath {
    pub w: Vec<f64>,
}

/// One path of the limit chain; `B_{t+1}` is `source.normal(replica, t + 1)`.
pub fn sample_limit_process(
    schedule: &SigmaSchedule,
    source: &UniformSource,
    replica: u64,
) -> LimitPath {
    let mut w = Vec::with_capacity(schedule.horizon() + 1);
    let mut current = 0.0;
    w.push(current);
    for (t, s2) in schedule.sigma_sq.iter().enumerate() {
        current += s2.sqrt() * source.normal(replica, t as u64 + 1);
        w.push(current);
    }
    LimitPath { w }
}

pub fn empirical_w(params: &ModelParams, state: &SystemState) -> f64 {
    (params.n_urns as f64).sqrt() * (state.mean_fraction(params) - params.mean_fraction())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltThresholds {
    /// Width of the agreement band in standard errors.
    pub se_multiplier: f64,
    pub max_abs_skewness: f64,
    pub max_abs_excess_kurtosis: f64,
}

impl Default for CltThresholds {
    fn default() -> Self {
        Self {
            se_multiplier: 4.0,
            max_abs_skewness: 0.15,
            max_abs_excess_kurtosis: 0.3,
        }
    }
}

pub const MIN_CLT_REPLICAS: u64 = 500;
pub const MIN_CLT_URNS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltTestConfig {
    pub params: ModelParams,
    pub replicas: u64,
    pub horizon: u64,
    pub seed: u64,
    pub thresholds: CltThresholds,
    /// Reject ensembles with fewer than [`MIN_CLT_URNS`] urns. Disabled only for
    /// small-`N` negative controls.
    pub require_large_n: bool,
}

impl CltTestConfig {
    pub fn new(params: ModelParams, replicas: u64, horizon: u64, seed: u64) -> Self {
        Self {
            params,
            replicas,
            horizon,
            seed,
            thresholds: CltThresholds::default(),
            require_large_n: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltRow {
    pub t: u64,
    pub mean: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `N v_t` from the exact finite-`N` recursion.
    pub ref_finite_n: f64,
    /// `Σ_{s<t} σ_s²`.
    pub ref_limit: f64,
    pub var_ok: bool,
    pub skew_ok: bool,
    pub kurt_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltSummary {
    pub n_urns: usize,
    pub replicas: u64,
    pub horizon: u64,
    pub alpha: f64,
    pub max_abs_skewness: f64,
    pub max_abs_excess_kurtosis: f64,
    pub variance_pass_fraction: f64,
    pub max_abs_increment_corr: f64,
    /// `se_multiplier / sqrt(R)`.
    pub corr_band: f64,
    pub corr_violations: usize,
    pub corr_pairs: usize,
    pub variance_ok: bool,
    pub gaussian: bool,
    pub increments_ok: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub rows: Vec<CltRow>,
    pub summary: CltSummary,
}

/// Simulate `R` independent `N`-urn systems and compare the law of `W_t^N`
/// for `t = 1..=T` with its Gaussian description.
pub fn clt_moment_test(config: &CltTestConfig) -> Result<CltReport> {
    clt_moment_test_with(config, Execution::Parallel)
}

pub fn clt_moment_test_with(config: &CltTestConfig, exec: Execution) -> Result<CltReport> {
    let params = config.params;
    params.validate()?;
    if config.replicas < MIN_CLT_REPLICAS {
        return Err(Error::InvalidParams(format!(
            "replicas must be ≥ {MIN_CLT_REPLICAS}"
        )));
    }
    if config.require_large_n && params.n_urns < MIN_CLT_URNS {
        return Err(Error::InvalidParams(format!(
            "n_urns must be ≥ {MIN_CLT_URNS}"
        )));
    }
    if config.horizon == 0 {
        return Err(Error::InvalidParams("horizon must be ≥ 1".into()));
    }
    let horizon = config.horizon;
    let source = UniformSource::new(config.seed);
    let paths: Vec<Vec<f64>> = map_replicas(exec, config.replicas, |replica| {
        let mut state = init_system(&params).expect("validated");
        let mut stepper = Stepper::new(&params, source, replica);
        let mut w = Vec::with_capacity(horizon as usize + 1);
        w.push(empirical_w(&params, &state));
        for _ in 0..horizon {
            stepper.advance(&mut state);
            w.push(empirical_w(&params, &state));
        }
        w
    });

    let n = params.n_urns as f64;
    let exact = finite_n_sequence(&params, horizon);
    let limit = sigma_schedule(&params, horizon)?.cumulative();
    let th = config.thresholds;

    let rows: Vec<CltRow> = (1..=horizon as usize)
        .map(|t| {
            let mut s = StreamingStats::new();
            for p in &paths {
                s.push(p[t]);
            }
            let variance = s.variance().unwrap_or(f64::NAN);
            let variance_se = s.variance_std_error().unwrap_or(f64::NAN);
            let skewness = s.skewness().unwrap_or(f64::NAN);
            let excess_kurtosis = s.excess_kurtosis().unwrap_or(f64::NAN);
            let ref_finite_n = n * exact[t].v;
            CltRow {
                t: t as u64,
                mean: s.mean(),
                variance,
                variance_se,
                skewness,
                excess_kurtosis,
                ref_finite_n,
                ref_limit: limit[t],
                var_ok: (variance - ref_finite_n).abs() <= th.se_multiplier * variance_se,
                skew_ok: skewness.abs() <= th.max_abs_skewness,
                kurt_ok: excess_kurtosis.abs() <= th.max_abs_excess_kurtosis,
            }
        })
        .collect();

    let increments: Vec<Vec<f64>> = (0..horizon as usize)
        .map(|t| paths.iter().map(|p| p[t + 1] - p[t]).collect())
        .collect();
    let corr_band = th.se_multiplier / (config.replicas as f64).sqrt();
    let mut max_corr: f64 = 0.0;
    let mut violations = 0;
    let mut pairs = 0;
    for s in 0..increments.len() {
        for t in s + 1..increments.len() {
            let r = pearson(&increments[s], &increments[t]);
            max_corr = max_corr.max(r.abs());
            pairs += 1;
            if r.is_nan() || r.abs() > corr_band {
                violations += 1;
            }
        }
    }

    let fold_max = |f: fn(&CltRow) -> f64| rows.iter().map(f).fold(0.0f64, |a, b| a.max(b.abs()));
    let variance_ok = rows.iter().all(|r| r.var_ok);
    let gaussian = rows.iter().all(|r| r.skew_ok && r.kurt_ok);
    let increments_ok = violations == 0;
    let summary = CltSummary {
        n_urns: params.n_urns,
        replicas: config.replicas,
        horizon,
        alpha: params.alpha,
        max_abs_skewness: fold_max(|r| r.skewness),
        max_abs_excess_kurtosis: fold_max(|r| r.excess_kurtosis),
        variance_pass_fraction: rows.iter().filter(|r| r.var_ok).count() as f64 / rows.len() as f64,
        max_abs_increment_corr: max_corr,
        corr_band,
        corr_violations: violations,
        corr_pairs: pairs,
        variance_ok,
        gaussian,
        increments_ok,
        passed: variance_ok && gaussian && increments_ok,
    };
    Ok(CltReport { rows, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSamplerRow {
    pub t: u64,
    pub variance: f64,
    pub variance_se: f64,
    pub reference: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSamplerReport {
    pub rows: Vec<LimitSamplerRow>,
    /// Correlation of consecutive increments `(W_1 - W_0, W_2 - W_1)`.
    pub lag1_corr: f64,
    pub corr_band: f64,
    pub passed: bool,
}

/// Sample `paths` limit trajectories and compare `Var(W_t)` with
/// `Σ_{s<t} σ_s²` at every `t ≥ 1`.
pub fn limit_sampler_check(
    schedule: &SigmaSchedule,
    paths: u64,
    seed: u64,
    se_multiplier: f64,
    exec: Execution,
) -> LimitSamplerReport {
    let source = UniformSource::new(seed);
    let samples: Vec<LimitPath> =
        map_replicas(exec, paths, |r| sample_limit_process(schedule, &source, r));
    let cumulative = schedule.cumulative();
    let rows: Vec<LimitSamplerRow> = (1..cumulative.len())
        .map(|t| {
            let s = StreamingStats::from_slice(&samples.iter().map(|p| p.w[t]).collect::<Vec<_>>());
            let variance = s.variance().unwrap_or(f64::NAN);
            let variance_se = s.variance_std_error().unwrap_or(f64::NAN);
            LimitSamplerRow {
                t: t as u64,
                variance,
                variance_se,
                reference: cumulative[t],
                ok: (variance - cumulative[t]).abs() <= se_multiplier * variance_se,
            }
        })
        .collect();
    let (lag1_corr, corr_band) = if schedule.horizon() >= 2 {
        let d1: Vec<f64> = samples.iter().map(|p| p.w[1] - p.w[0]).collect();
        let d2: Vec<f64> = samples.iter().map(|p| p.w[2] - p.w[1]).collect();
        (pearson(&d1, &d2), se_multiplier / (paths as f64).sqrt())
    } else {
        (0.0, f64::INFINITY)
    };
    let passed = rows.iter().all(|r| r.ok) && lag1_corr.abs() <= corr_band;
    LimitSamplerReport {
        rows,
        lag1_corr,
        corr_band,
        passed,
    }
}

pub const MIN_LLN_URNS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlnReport {
    pub t: u64,
    pub n_urns: usize,
    /// `|Z_t - a/m|`.
    pub mean_deviation: f64,
    /// `|(1/N) Σ Z_t(i)² - (x^∞_t + a²/m²)|`.
    pub second_moment_deviation: f64,
}

/// Single-replica comparison of the empirical mean and second moment of the
/// urn fractions with their large-`N` limits.
pub fn lln_check(
    params: &ModelParams,
    t: u64,
    source: UniformSource,
    replica: u64,
) -> Result<LlnReport> {
    if params.n_urns < MIN_LLN_URNS {
        return Err(Error::InvalidParams(format!(
            "n_urns must be ≥ {MIN_LLN_URNS}"
        )));
    }
    let state = simulate_to(params, t, source, replica)?;
    let p = params.mean_fraction();
    let (a, m) = (params.red_init as f64, params.total_init() as f64);
    // integer sums keep the deterministic t = 0 case exact
    let balls = state.balls_per_urn(params) as f64;
    let sq_sum: u128 = state
        .red_counts
        .iter()
        .map(|&x| x as u128 * x as u128)
        .sum();
    let second = sq_sum as f64 / (params.n_urns as f64 * balls * balls);
    let x_inf = limit_sequence(params, t)[t as usize];
    Ok(LlnReport {
        t,
        n_urns: params.n_urns,
        mean_deviation: (state.mean_fraction(params) - p).abs(),
        second_moment_deviation: (second - (x_inf + a * a / (m * m))).abs(),
    })
}
