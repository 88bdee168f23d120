//! The acceptance suite run by `urnsync verify`.
//!
//! Each criterion is an independent function returning a [`CriterionResult`];
//! tolerances and seeds are fixed constants below. With
//! [`SuiteOptions::extended`] a few supplementary checks run after the ten
//! criteria.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{analyze, quasi_martingale_sum, RegimeLabel};
use crate::clt::{clt_moment_test, limit_sampler_check, lln_check, sigma_schedule, CltTestConfig};
use crate::enumeration::{exact_enumeration_sequence, ENUMERATION_LIMIT};
use crate::experiment::{
    parse_config_bytes, run, Command, ExperimentConfig, PartialConfig, RunOutput,
};
use crate::moments::{finite_n_sequence, iterate_exact, limit_sequence, moment_table};
use crate::montecarlo::{map_replicas, run_replicas, EnsembleSpec, Estimator};
use crate::parallel::Execution;
use crate::sim::simulate_to;
use crate::stats::{ks_distance_uniform, median};
use crate::{ModelParams, Result, UniformSource};

pub const SUITE_SEED: u64 = 20_240_917;

pub const FLOAT_RELATIVE_TOLERANCE: f64 = 1e-12;
pub const ANCHOR_TOLERANCE: f64 = 1e-15;
pub const SLOPE_TOLERANCE: f64 = 0.05;
pub const SE_MULTIPLIER: f64 = 4.0;
pub const MIN_HIT_FRACTION: f64 = 0.95;
pub const LLN_TOLERANCE: f64 = 1e-2;
pub const LLN_RATIO_RANGE: (f64, f64) = (2.2, 4.5);
pub const KS_TOLERANCE: f64 = 0.03;
pub const SPREAD_THRESHOLD: f64 = 0.1;
pub const MAX_SPREAD_FRACTION: f64 = 0.05;
pub const PLATEAU_TOLERANCE: f64 = 0.01;
pub const SE_SCALING_TOLERANCE: f64 = 0.10;
pub const THREAD_COUNTS: [usize; 3] = [1, 2, 8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: u32, name: &str, passed: bool, detail: String) -> Self {
        Self {
            id,
            name: name.to_string(),
            passed,
            detail,
        }
    }

    fn from_result(id: u32, name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(id, name, passed, detail),
            Err(e) => Self::new(id, name, false, format!("error: {e}")),
        }
    }

    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("[{tag}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SuiteOptions {
    pub extended: bool,
}

pub fn run_suite(options: &SuiteOptions) -> Vec<CriterionResult> {
    let mut out = vec![
        oracle_equivalence(),
        hand_anchors(),
        decay_regimes(),
        variance_bound(),
        monte_carlo_agreement(),
        gaussian_fluctuations(),
        law_of_large_numbers(),
        classical_limit(),
        synchronization(),
        reproducibility(),
    ];
    if options.extended {
        out.extend([
            schedule_positivity(),
            stderr_scaling(),
            gaussian_fluctuations_off_center(),
        ]);
    }
    out
}

fn params(n: usize, a: u64, b: u64, alpha: f64) -> Result<ModelParams> {
    ModelParams::new(n, a, b, alpha)
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn relative_error(approx: f64, exact: f64) -> f64 {
    if exact == 0.0 {
        if approx == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((approx - exact) / exact).abs()
    }
}

/// Criterion 1: exact enumeration against the finite-`N` recursion.
pub fn oracle_equivalence() -> CriterionResult {
    let run = || -> Result<(bool, String)> {
        let mut cases = 0usize;
        let mut exact_mismatches = 0usize;
        let mut worst = 0.0f64;
        for n in 1..=ENUMERATION_LIMIT {
            let horizon = ENUMERATION_LIMIT / n;
            for a in [1, 2] {
                for b in [1, 2] {
                    for alpha in [0.0, 0.3, 0.5, 0.8, 1.0] {
                        let p = params(n as usize, a, b, alpha)?;
                        let oracle = exact_enumeration_sequence(&p, horizon)?;
                        let rational = iterate_exact(&p, horizon);
                        let float = finite_n_sequence(&p, horizon);
                        for t in 0..=horizon as usize {
                            cases += 1;
                            if oracle[t].v != rational[t].v || oracle[t].x != rational[t].x {
                                exact_mismatches += 1;
                            }
                            worst = worst
                                .max(relative_error(float[t].v, to_f64(&oracle[t].v)))
                                .max(relative_error(float[t].x, to_f64(&oracle[t].x)));
                        }
                    }
                }
            }
        }
        Ok((
            exact_mismatches == 0 && worst <= FLOAT_RELATIVE_TOLERANCE,
            format!("{cases} (N,t,a,b,alpha) cases, rational mismatches {exact_mismatches}, max float rel err {worst:.2e}"),
        ))
    };
    CriterionResult::from_result(1, "oracle equivalence", run())
}

/// Criterion 2: closed-form first-step values.
pub fn hand_anchors() -> CriterionResult {
    let run = || -> Result<(bool, String)> {
        let mut worst = 0.0f64;
        let mut check = |value: f64, exact: f64| worst = worst.max((value - exact).abs());
        for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let two = moment_table(&params(2, 1, 1, alpha)?, 1);
            check(two[1].x_exact, 1.0 / 72.0);
            check(two[1].v_exact, 1.0 / 72.0);
            check(
                moment_table(&params(1, 1, 1, alpha)?, 1)[1].v_exact,
                1.0 / 36.0,
            );
            let single = params(1, 1, 1, alpha)?;
            check(limit_sequence(&single, 1)[1], 1.0 / 36.0);
            check(sigma_schedule(&single, 1)?.sigma_sq[0], 1.0 / 36.0);
        }
        Ok((
            worst <= ANCHOR_TOLERANCE,
            format!("max abs deviation {worst:.2e}"),
        ))
    };
    CriterionResult::from_result(2, "hand-derived anchors", run())
}

/// Criterion 3: decay exponents of the limit recursion.
pub fn decay_regimes() -> CriterionResult {
    let run = || -> Result<(bool, String)> {
        let window = (1_000, 1_000_000);
        let mut passed = true;
        let mut parts = Vec::new();
        for (alpha, expected) in [
            (0.1, -0.2),
            (0.2, -0.4),
            (0.3, -0.6),
            (0.4, -0.8),
            (0.6, -1.0),
            (0.8, -1.0),
            (1.0, -1.0),
        ] {
            let rec = analyze(&params(2, 1, 1, alpha)?, window)?;
            passed &= (rec.slope - expected).abs() <= SLOPE_TOLERANCE;
            parts.push(format!("a={alpha}:{:.3}", rec.slope));
        }
        let critical = analyze(&params(2, 1, 1, 0.5)?, window)?;
        passed &= critical.regime == RegimeLabel::Critical && critical.ratio_flag == "bounded";
        parts.push(format!("a=0.5:{}", critical.ratio_flag));
        Ok((passed, format!("slopes {}", parts.join(" "))))
    };
    CriterionResult::from_result(3, "decay regimes", run())
}

/// Criterion 4: `v_t < (a/m²)/N` and `E[Z_t²] < a/m` over a parameter sweep.
pub fn variance_bound() -> CriterionResult {
    let run = || -> Result<(bool, String)> {
        let horizon = 100_000;
        let mut sweeps = 0usize;
        let mut violations = 0usize;
        let mut worst_ratio = 0.0f64;
        for n in [1usize, 2, 5, 20, 100] {
            for a in 1..=3 {
                for b in 1..=3 {
                    for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
                        let p = params(n, a, b, alpha)?;
                        let m = p.total_init() as f64;
                        let mean = p.mean_fraction();
                        let bound = a as f64 / (m * m) / n as f64;
                        sweeps += 1;
                        for s in finite_n_sequence(&p, horizon) {
                            worst_ratio = worst_ratio.max(s.v / bound);
                            if s.v >= bound || s.v + mean * mean >= mean {
                                violations += 1;
                            }
                        }
                    }
                }
            }
        }
        Ok((
            violations == 0,
            format!("{sweeps} parameter sets to t={horizon}, violations {violations}, max v/bound {worst_ratio:.4}"),
        ))
    };
    CriterionResult::from_result(4, "variance bound", run())
}

/// Criterion 5: ensemble estimates of `x_t` and `v_t` against the recursion.
pub fn monte_carlo_agreement() -> CriterionResult {
    let run = || -> Result<(bool, String)> {
        let times: Vec<u64> = (1..=20).map(|k| 5 * k).collect();
        let mut passed = true;
        let mut parts = Vec::new();
        for (k, alpha) in [0.25, 0.5, 0.75].into_iter().enumerate() {
            let p = params(5, 1, 1, alpha)?;
            let exact = finite_n_sequence(&p, 100);
            let est = run_replicas(&EnsembleSpec::new(
                p,
                10_000,
                100,
                SUITE_SEED + 500 + k as u64,
                times.clone(),
            ))?;
            let hits = |e: Estimator, reference: &dyn Fn(u64) -> f64| {
                times
                    .iter()
                    .filter(|&&t| {
                        est.get(t, e).is_some_and(|r| {
                            r.stderr.is_some_and(|se| {
                                (r.value - reference(t)).abs() <= SE_MULTIPLIER * se
                            })
                        })
                    })
                    .count()
            };
            let x_hits = hits(Estimator::XHat, &|t| exact[t as usize].x);
            let v_hits = hits(Estimator::VHat, &|t| exact[t as usize].v);
            let need = (MIN_HIT_FRACTION * times.len() as f64).ceil() as usize;
            passed &= x_hits >= need && v_hits >= need;
            parts.push(format!("a={alpha}: x {x_hits}/20 v {v_hits}/20"));
        }
        Ok((passed, parts.join(", ")))
    };
    CriterionResult::from_result(5, "monte carlo vs recursion", run())
}

fn clt_check(alpha: f64, seed: u64) -> Result<(bool, String)> {
    let p = params(2000, 1, 1, alpha)?;
    let report = clt_moment_test(&CltTestConfig::new(p, 2000, 20, seed))?;
    let s = &report.summary;
    let sampler = limit_sampler_check(
        &sigma_schedule(&p, 20)?,
        10_000,
        seed + 1,
        SE_MULTIPLIER,
        Execution::Parallel,
    );
    Ok((
        s.passed && sampler.passed,
        format!(
            "var within 4SE {:.0}%, max|skew| {:.3}, max|kurt| {:.3}, corr violations {}/{}, limit sampler {}",
            100.0 * s.variance_pass_fraction,
            s.max_abs_skewness,
            s.max_abs_excess_kurtosis,
            s.corr_violations,
            s.corr_pairs,
            if sampler.passed { "ok" } else { "off" }
        ),
    ))
}

/// Criterion 6: Gaussian fluctuations of the rescaled mean.
pub fn gaussian_fluctuations() -> CriterionResult {
    CriterionResult::from_result(6, "gaussian fluctuations", clt_check(0.5, SUITE_SEED + 600))
}

/// Criterion 7: law of large numbers for the empirical mean and second moment.
pub fn law_of_large_numbers() -> CriterionResult {
    let run = || -> Result<(bool, String)> {
        let big = params(100_000, 1, 1, 0.5)?;
        let small = params(10_000, 1, 1, 0.5)?;
        let single = lln_check(&big, 5, UniformSource::new(SUITE_SEED + 700), 0)?;
        let mut passed = single.mean_deviation <= LLN_TOLERANCE
            && single.second_moment_deviation <= LLN_TOLERANCE;
        let reports = |p: &ModelParams| -> Result<Vec<_>> {
            (0..20u64)
                .map(|k| lln_check(p, 5, UniformSource::new(SUITE_SEED + 710 + k), 0))
                .collect()
        };
        let (lo, hi) = (reports(&small)?, reports(&big)?);
        let ratio = |f: fn(&crate::clt::LlnReport) -> f64| {
            median(&lo.iter().map(f).collect::<Vec<_>>())
                / median(&hi.iter().map(f).collect::<Vec<_>>())
        };
        let mean_ratio = ratio(|r| r.mean_deviation);
        let second_ratio = ratio(|r| r.second_moment_deviation);
        let in_range = |r: f64| (LLN_RATIO_RANGE.0..=LLN_RATIO_RANGE.1).contains(&r);
        passed &= in_range(mean_ratio) && in_range(second_ratio);
        Ok((
            passed,
            format!(
                "N=1e5 deviations {:.2e}, {:.2e}; median shrink factors {mean_ratio:.2}, {second_ratio:.2}",
                single.mean_deviation, single.second_moment_deviation
            ),
        ))
    };
    CriterionResult::from_result(7, "law of large numbers", run())
}

/// Criterion 8: a single uncoupled urn with `a = b = 1` has a uniform limit.
pub fn classical_limit() -> CriterionResult {
    let run = || -> Result<(bool, String)> {
        let p = params(1, 1, 1, 0.0)?;
        let source = UniformSource::new(SUITE_SEED + 800);
        let samples: Vec<f64> = map_replicas(Execution::Parallel, 5000, |r| {
            simulate_to(&p, 5000, source, r).map(|s| s.fraction(&p, 0))
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let d = ks_distance_uniform(&samples);
        Ok((d <= KS_TOLERANCE, format!("KS distance {d:.4}")))
    };
    CriterionResult::from_result(8, "classical uniform limit", run())
}

/// Criterion 9: small systems synchronize, and the drift bound is summable.
pub fn synchronization() -> CriterionResult {
    let run = || -> Result<(bool, String)> {
        let p = params(5, 1, 1, 0.5)?;
        let spreads: Vec<f64> = map_replicas(Execution::Parallel, 100, |k| {
            simulate_to(&p, 100_000, UniformSource::new(SUITE_SEED + 900 + k), 0)
                .map(|s| s.summary(&p).spread)
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let desync =
            spreads.iter().filter(|&&s| s > SPREAD_THRESHOLD).count() as f64 / spreads.len() as f64;
        let x: Vec<f64> = finite_n_sequence(&p, 1_000_000)
            .iter()
            .map(|s| s.x)
            .collect();
        let qm = quasi_martingale_sum(&p, &x);
        Ok((
            desync <= MAX_SPREAD_FRACTION && qm.tail_fraction <= PLATEAU_TOLERANCE,
            format!(
                "desynchronized fraction {desync:.2}, max spread {:.2e}, last-decade share of drift sum {:.4}",
                spreads.iter().cloned().fold(0.0, f64::max),
                qm.tail_fraction
            ),
        ))
    };
    CriterionResult::from_result(9, "synchronization", run())
}

fn reproducibility_configs() -> Result<Vec<ExperimentConfig>> {
    let layer = |json: serde_json::Value| -> Result<PartialConfig> {
        serde_json::from_value(json).map_err(crate::Error::from)
    };
    let cases = [
        (
            Command::Simulate,
            serde_json::json!({"n": 6, "horizon": 300, "seed": 11, "full": true, "record_every": 7}),
        ),
        (
            Command::Simulate,
            serde_json::json!({"n": 4, "horizon": 120, "replicas": 200, "seed": 12, "record_every": 10}),
        ),
        (
            Command::Simulate,
            serde_json::json!({"n": 3, "horizon": 80, "replicas": 70, "seed": 13, "format": "jsonl"}),
        ),
        (
            Command::Moments,
            serde_json::json!({"n": 3, "a": 2, "b": 1, "alpha": 0.3, "horizon": 500}),
        ),
        (
            Command::Asymptotics,
            serde_json::json!({"alphas": [0.2, 0.5, 0.9], "window_lo": 100, "window_hi": 100000}),
        ),
        (
            Command::Clt,
            serde_json::json!({"n": 300, "replicas": 500, "horizon": 8, "seed": 14}),
        ),
        (
            Command::Clt,
            serde_json::json!({"n": 200, "replicas": 500, "horizon": 5, "seed": 15, "format": "jsonl"}),
        ),
    ];
    cases
        .into_iter()
        .map(|(command, json)| ExperimentConfig::resolve(command, &[&layer(json)?]))
        .collect()
}

/// Criterion 10: outputs are bit-identical across thread counts and when
/// replayed from their own embedded config.
pub fn reproducibility() -> CriterionResult {
    let run = || -> Result<(bool, String)> {
        let configs = reproducibility_configs()?;
        let mut failures = Vec::new();
        for config in &configs {
            let reference = run(config, Some(THREAD_COUNTS[0]))?;
            let replayed = ExperimentConfig::resolve(
                config.command,
                &[&parse_config_bytes(&reference.primary)?],
            )?;
            for threads in THREAD_COUNTS {
                let fresh: RunOutput = run(config, Some(threads))?;
                let replay: RunOutput = run(&replayed, Some(threads))?;
                if fresh != reference || replay != reference {
                    failures.push(format!("{}@{threads}", config.command.as_str()));
                }
            }
        }
        Ok((
            failures.is_empty(),
            format!(
                "{} configs x threads {:?} x (fresh, replay); mismatches [{}]",
                configs.len(),
                THREAD_COUNTS,
                failures.join(" ")
            ),
        ))
    };
    CriterionResult::from_result(10, "reproducibility", run())
}

/// Extended: the limit variance schedule stays positive to `t = 10⁶`.
pub fn schedule_positivity() -> CriterionResult {
    let run = || -> Result<(bool, String)> {
        let mut min_scaled = f64::INFINITY;
        for a in 1..=3 {
            for b in 1..=3 {
                for alpha in [0.0, 0.1, 0.5, 0.9, 1.0] {
                    let p = params(1, a, b, alpha)?;
                    let m = p.total_init() as f64;
                    for (t, s) in sigma_schedule(&p, 1_000_000)?.sigma_sq.iter().enumerate() {
                        let scale = (t as f64 + m + 1.0).powi(2);
                        min_scaled = min_scaled.min(s * scale);
                    }
                }
            }
        }
        Ok((
            min_scaled > 0.0,
            format!("min (t+m+1)² σ_t² = {min_scaled:.4}"),
        ))
    };
    CriterionResult::from_result(11, "schedule positivity", run())
}

/// Extended: doubling the ensemble shrinks the median standard error by √2.
pub fn stderr_scaling() -> CriterionResult {
    let run = || -> Result<(bool, String)> {
        let p = params(5, 1, 1, 0.5)?;
        let times: Vec<u64> = (1..=10).map(|k| 10 * k).collect();
        let median_se = |replicas: u64| -> Result<f64> {
            let est = run_replicas(&EnsembleSpec::new(
                p,
                replicas,
                100,
                SUITE_SEED + 1200,
                times.clone(),
            ))?;
            let se: Vec<f64> = est
                .series(Estimator::XHat)
                .iter()
                .filter_map(|r| r.stderr)
                .collect();
            Ok(median(&se))
        };
        let ratio = median_se(4000)? / median_se(8000)?;
        let target = std::f64::consts::SQRT_2;
        Ok((
            (ratio / target - 1.0).abs() <= SE_SCALING_TOLERANCE,
            format!("median stderr ratio {ratio:.3} (target {target:.3})"),
        ))
    };
    CriterionResult::from_result(12, "stderr scaling", run())
}

/// Extended: the Gaussian checks away from the critical coupling.
pub fn gaussian_fluctuations_off_center() -> CriterionResult {
    let run = || -> Result<(bool, String)> {
        let mut passed = true;
        let mut parts = Vec::new();
        for (k, alpha) in [0.25, 0.75].into_iter().enumerate() {
            let (ok, detail) = clt_check(alpha, SUITE_SEED + 1300 + 10 * k as u64)?;
            passed &= ok;
            parts.push(format!("a={alpha}: {detail}"));
        }
        Ok((passed, parts.join("; ")))
    };
    CriterionResult::from_result(13, "gaussian fluctuations off center", run())
}
