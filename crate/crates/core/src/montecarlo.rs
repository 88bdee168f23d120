//! Replica engine.
//!
//! Replicas are grouped into fixed-size leaves. Each leaf is simulated and
//! accumulated sequentially; leaves run in parallel and are combined with
//! [`tree_reduce`], so estimates are bit-identical for any worker count.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::parallel::{map_indexed, Execution};
use crate::sim::{init_system, Stepper, SystemState};
use crate::stats::{tree_reduce, StatsBlock, StreamingStats};
use crate::{Error, ModelParams, Result, UniformSource};

/// Replicas accumulated sequentially inside one leaf of the reduction tree.
pub const REPLICAS_PER_LEAF: u64 = 32;

/// Default cap on `N * R * T` urn updates.
pub const DEFAULT_WORK_BUDGET: u128 = 5_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Mean of `Z_t` over replicas.
    ZMean,
    /// Pooled mean of `(Z_t(i) - Z_t)²` over urns and replicas.
    XHat,
    /// Across-replica variance of `Z_t`.
    VHat,
    /// Mean of `max_i |Z_t(i) - Z_t|`.
    SpreadMean,
    /// Pooled mean of `|Z_t(i) - Z_t|`.
    AbsDevMean,
    WMean,
    WVar,
    WSkew,
    WKurt,
}

impl Estimator {
    pub const ALL: [Estimator; 9] = [
        Estimator::ZMean,
        Estimator::XHat,
        Estimator::VHat,
        Estimator::SpreadMean,
        Estimator::AbsDevMean,
        Estimator::WMean,
        Estimator::WVar,
        Estimator::WSkew,
        Estimator::WKurt,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::ZMean => "z_mean",
            Estimator::XHat => "x_hat",
            Estimator::VHat => "v_hat",
            Estimator::SpreadMean => "spread_mean",
            Estimator::AbsDevMean => "abs_dev_mean",
            Estimator::WMean => "w_mean",
            Estimator::WVar => "w_var",
            Estimator::WSkew => "w_skew",
            Estimator::WKurt => "w_kurt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.as_str() == s)
    }
}

/// Which estimator families to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorSet {
    pub z_mean: bool,
    pub x_hat: bool,
    pub v_hat: bool,
    pub spread_mean: bool,
    pub abs_dev_mean: bool,
    pub w_moments: bool,
}

impl Default for EstimatorSet {
    fn default() -> Self {
        Self {
            z_mean: true,
            x_hat: true,
            v_hat: true,
            spread_mean: true,
            abs_dev_mean: true,
            w_moments: false,
        }
    }
}

impl EstimatorSet {
    pub fn all() -> Self {
        Self {
            w_moments: true,
            ..Self::default()
        }
    }

    fn includes(&self, e: Estimator) -> bool {
        match e {
            Estimator::ZMean => self.z_mean,
            Estimator::XHat => self.x_hat,
            Estimator::VHat => self.v_hat,
            Estimator::SpreadMean => self.spread_mean,
            Estimator::AbsDevMean => self.abs_dev_mean,
            Estimator::WMean | Estimator::WVar | Estimator::WSkew | Estimator::WKurt => {
                self.w_moments
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub params: ModelParams,
    pub replicas: u64,
    pub horizon: u64,
    pub seed: u64,
    /// Sorted times in `[0, horizon]`.
    pub record_times: Vec<u64>,
    pub estimators: EstimatorSet,
    pub work_budget: u128,
    pub budget_override: bool,
}

impl EnsembleSpec {
    pub fn new(
        params: ModelParams,
        replicas: u64,
        horizon: u64,
        seed: u64,
        record_times: Vec<u64>,
    ) -> Self {
        Self {
            params,
            replicas,
            horizon,
            seed,
            record_times,
            estimators: EstimatorSet::default(),
            work_budget: DEFAULT_WORK_BUDGET,
            budget_override: false,
        }
    }

    pub fn work(&self) -> u128 {
        self.params.n_urns as u128 * self.replicas as u128 * self.horizon as u128
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.replicas == 0 {
            return Err(Error::InvalidParams("replicas must be ≥ 1".into()));
        }
        if self.record_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams(
                "record_times must be strictly increasing".into(),
            ));
        }
        if self.record_times.last().is_some_and(|&t| t > self.horizon) {
            return Err(Error::InvalidParams(
                "record_times must lie in [0, horizon]".into(),
            ));
        }
        if !self.budget_override && self.work() > self.work_budget {
            return Err(Error::BudgetExceeded {
                work: self.work(),
                budget: self.work_budget,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub t: u64,
    pub estimator: Estimator,
    #[serde(with = "crate::io::nan_as_null")]
    pub value: f64,
    /// `None` when the ensemble is too small to estimate it.
    pub stderr: Option<f64>,
    pub n_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEstimates {
    pub rows: Vec<EstimateRow>,
}

impl EnsembleEstimates {
    pub fn get(&self, t: u64, estimator: Estimator) -> Option<&EstimateRow> {
        self.rows
            .iter()
            .find(|r| r.t == t && r.estimator == estimator)
    }

    pub fn series(&self, estimator: Estimator) -> Vec<&EstimateRow> {
        self.rows
            .iter()
            .filter(|r| r.estimator == estimator)
            .collect()
    }
}

/// Per-replica scalars tracked at each recorded time.
const SCALARS: [&str; 5] = ["z_bar", "sq_dev", "spread", "abs_dev", "w"];

#[derive(Debug, Clone, Copy)]
struct Observation {
    z_bar: f64,
    sq_dev: f64,
    spread: f64,
    abs_dev: f64,
    w: f64,
}

fn observe(state: &SystemState, params: &ModelParams) -> Observation {
    let denom = state.balls_per_urn(params) as f64;
    let n = state.red_counts.len() as f64;
    let z_bar = state.mean_fraction(params);
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut spread: f64 = 0.0;
    for &x in &state.red_counts {
        let d = x as f64 / denom - z_bar;
        sq += d * d;
        abs += d.abs();
        spread = spread.max(d.abs());
    }
    Observation {
        z_bar,
        sq_dev: sq / n,
        spread,
        abs_dev: abs / n,
        w: n.sqrt() * (z_bar - params.mean_fraction()),
    }
}

/// Apply `f` to every replica in index order, in parallel leaves.
pub fn map_replicas<T, F>(exec: Execution, replicas: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let leaves = replicas.div_ceil(REPLICAS_PER_LEAF) as usize;
    map_indexed(exec, leaves, |leaf| {
        let lo = leaf as u64 * REPLICAS_PER_LEAF;
        let hi = (lo + REPLICAS_PER_LEAF).min(replicas);
        (lo..hi).map(&f).collect::<Vec<T>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

pub fn run_replicas(spec: &EnsembleSpec) -> Result<EnsembleEstimates> {
    run_replicas_with(spec, Execution::Parallel)
}

pub fn run_replicas_with(spec: &EnsembleSpec, exec: Execution) -> Result<EnsembleEstimates> {
    spec.validate()?;
    let params = spec.params;
    let source = UniformSource::new(spec.seed);
    let times = &spec.record_times;
    let labels: Arc<[String]> = times
        .iter()
        .flat_map(|t| SCALARS.iter().map(move |s| format!("{s}@{t}")))
        .collect();

    let leaves = spec.replicas.div_ceil(REPLICAS_PER_LEAF) as usize;
    let blocks = map_indexed(exec, leaves, |leaf| -> Result<StatsBlock> {
        let mut block = StatsBlock::new(labels.clone());
        let lo = leaf as u64 * REPLICAS_PER_LEAF;
        let hi = (lo + REPLICAS_PER_LEAF).min(spec.replicas);
        for replica in lo..hi {
            let mut state = init_system(&params)?;
            let mut stepper = Stepper::new(&params, source, replica);
            for (k, &target) in times.iter().enumerate() {
                while state.t < target {
                    stepper.advance(&mut state);
                }
                let o = observe(&state, &params);
                let base = k * SCALARS.len();
                block.push(base, o.z_bar);
                block.push(base + 1, o.sq_dev);
                block.push(base + 2, o.spread);
                block.push(base + 3, o.abs_dev);
                block.push(base + 4, o.w);
            }
        }
        Ok(block)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let merged = tree_reduce(blocks, |a, b| a.merge(b))?.expect("at least one replica");
    Ok(estimates_from(&merged, times, spec.estimators))
}

fn estimates_from(block: &StatsBlock, times: &[u64], set: EstimatorSet) -> EnsembleEstimates {
    let cells = block.cells();
    let mut rows = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let base = k * SCALARS.len();
        let [z, sq, spread, abs, w]: [&StreamingStats; 5] =
            std::array::from_fn(|j| &cells[base + j]);
        let n = z.count();
        let nf = n as f64;
        let moment_se = |k: f64| (n >= 2).then(|| (k / nf).sqrt());
        for e in Estimator::ALL {
            if !set.includes(e) {
                continue;
            }
            let (value, stderr) = match e {
                Estimator::ZMean => (z.mean(), z.std_error_mean()),
                Estimator::XHat => (sq.mean(), sq.std_error_mean()),
                Estimator::VHat => (z.variance().unwrap_or(f64::NAN), z.variance_std_error()),
                Estimator::SpreadMean => (spread.mean(), spread.std_error_mean()),
                Estimator::AbsDevMean => (abs.mean(), abs.std_error_mean()),
                Estimator::WMean => (w.mean(), w.std_error_mean()),
                Estimator::WVar => (w.variance().unwrap_or(f64::NAN), w.variance_std_error()),
                Estimator::WSkew => (w.skewness().unwrap_or(f64::NAN), moment_se(6.0)),
                Estimator::WKurt => (w.excess_kurtosis().unwrap_or(f64::NAN), moment_se(24.0)),
            };
            rows.push(EstimateRow {
                t,
                estimator: e,
                value,
                stderr,
                n_samples: n,
            });
        }
    }
    EnsembleEstimates { rows }
}
