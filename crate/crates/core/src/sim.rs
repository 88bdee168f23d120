//! Urn dynamics.
//!
//! Integer red counts are the source of truth; fractions are derived on
//! demand as `X_t(i) / (t + m)`.

use serde::{Deserialize, Serialize};

use crate::{Error, ModelParams, Result, UniformSource};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: u64,
    pub red_counts: Vec<u64>,
}

impl SystemState {
    /// Balls in every urn at time `t`: `t + m`.
    pub fn balls_per_urn(&self, params: &ModelParams) -> u64 {
        self.t + params.total_init()
    }

    pub fn fraction(&self, params: &ModelParams, i: usize) -> f64 {
        self.red_counts[i] as f64 / self.balls_per_urn(params) as f64
    }

    pub fn fractions(&self, params: &ModelParams) -> Vec<f64> {
        let denom = self.balls_per_urn(params) as f64;
        self.red_counts.iter().map(|&x| x as f64 / denom).collect()
    }

    pub fn total_red(&self) -> u64 {
        self.red_counts.iter().sum()
    }

    /// Average red fraction over urns, `Z_t`.
    pub fn mean_fraction(&self, params: &ModelParams) -> f64 {
        self.total_red() as f64 / (self.red_counts.len() as f64 * self.balls_per_urn(params) as f64)
    }

    pub fn summary(&self, params: &ModelParams) -> TrajectoryRow {
        let denom = self.balls_per_urn(params) as f64;
        let z_bar = self.mean_fraction(params);
        let lo = *self.red_counts.iter().min().expect("at least one urn");
        let hi = *self.red_counts.iter().max().expect("at least one urn");
        let z_min = lo as f64 / denom;
        let z_max = hi as f64 / denom;
        TrajectoryRow {
            t: self.t,
            z_bar,
            z_min,
            z_max,
            spread: (z_max - z_bar).max(z_bar - z_min),
        }
    }
}

pub fn init_system(params: &ModelParams) -> Result<SystemState> {
    params.validate()?;
    Ok(SystemState {
        t: 0,
        red_counts: vec![params.red_init; params.n_urns],
    })
}

/// Conditional probability that urn `i` (0-based) receives a red ball at the
/// next step: `alpha * Z_t + (1 - alpha) * Z_t(i)`.
pub fn reinforcement_probability(
    state: &SystemState,
    params: &ModelParams,
    i: usize,
) -> Result<f64> {
    if i >= state.red_counts.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            n_urns: state.red_counts.len(),
        });
    }
    let denom = state.balls_per_urn(params) as f64;
    let z_bar = state.total_red() as f64 / (state.red_counts.len() as f64 * denom);
    Ok(params.alpha * z_bar + (1.0 - params.alpha) * (state.red_counts[i] as f64 / denom))
}

/// Advance one step in place. Urn `i` gains a red ball iff
/// `uniforms[i] <= p_i` (inclusive threshold).
pub fn step_in_place(
    state: &mut SystemState,
    params: &ModelParams,
    uniforms: &[f64],
) -> Result<()> {
    let n = state.red_counts.len();
    if uniforms.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: uniforms.len(),
        });
    }
    advance(state, params, uniforms);
    Ok(())
}

#[inline]
fn advance(state: &mut SystemState, params: &ModelParams, uniforms: &[f64]) {
    let denom = state.balls_per_urn(params) as f64;
    let z_bar = state.total_red() as f64 / (state.red_counts.len() as f64 * denom);
    let shared = params.alpha * z_bar;
    let own = 1.0 - params.alpha;
    for (x, &u) in state.red_counts.iter_mut().zip(uniforms) {
        let p = shared + own * (*x as f64 / denom);
        *x += u64::from(u <= p);
    }
    state.t += 1;
}

pub fn step(state: &SystemState, params: &ModelParams, uniforms: &[f64]) -> Result<SystemState> {
    let mut next = state.clone();
    step_in_place(&mut next, params, uniforms)?;
    Ok(next)
}

/// Drives a state forward with draws from a [`UniformSource`]; the step from
/// `t` to `t + 1` consumes addresses `(replica, t + 1, i)`.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    params: &'a ModelParams,
    source: UniformSource,
    replica: u64,
    buf: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(params: &'a ModelParams, source: UniformSource, replica: u64) -> Self {
        Self {
            params,
            source,
            replica,
            buf: vec![0.0; params.n_urns],
        }
    }

    #[inline]
    pub fn advance(&mut self, state: &mut SystemState) {
        self.source
            .fill_uniforms(self.replica, state.t + 1, &mut self.buf);
        advance(state, self.params, &self.buf);
    }
}

/// Which times a trajectory run records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RecordPolicy {
    /// `t = 0, k, 2k, ...` plus the horizon.
    Every(u64),
    /// Roughly `per_decade` log-spaced times per decade plus `t = 0` and the horizon.
    LogSpaced { per_decade: u32 },
    /// Explicit times; entries beyond the horizon are ignored.
    Times(Vec<u64>),
}

impl RecordPolicy {
    pub fn times(&self, horizon: u64) -> Vec<u64> {
        let mut ts: Vec<u64> = match self {
            RecordPolicy::Every(k) => {
                let k = (*k).max(1);
                (0..=horizon)
                    .step_by(k as usize)
                    .chain(std::iter::once(horizon))
                    .collect()
            }
            RecordPolicy::LogSpaced { per_decade } => {
                let mut v = vec![0, horizon];
                if horizon >= 1 {
                    let decades = (horizon as f64).log10();
                    let count = (decades * *per_decade as f64).ceil() as u64;
                    for k in 0..=count {
                        let t = 10f64.powf(k as f64 / *per_decade as f64).round() as u64;
                        if t <= horizon {
                            v.push(t);
                        }
                    }
                }
                v
            }
            RecordPolicy::Times(ts) => ts.iter().copied().filter(|&t| t <= horizon).collect(),
        };
        ts.sort_unstable();
        ts.dedup();
        ts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: u64,
    pub z_bar: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// `max_i |Z_t(i) - Z_t|`.
    pub spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrnRow {
    pub t: u64,
    pub urn: usize,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
    /// Per-urn fractions at every recorded time, when requested.
    pub urns: Option<Vec<UrnRow>>,
}

pub fn run_trajectory(
    params: &ModelParams,
    horizon: u64,
    source: UniformSource,
    replica: u64,
    policy: &RecordPolicy,
    full_vector: bool,
) -> Result<TrajectoryRecord> {
    let mut state = init_system(params)?;
    let times = policy.times(horizon);
    let mut record = TrajectoryRecord {
        rows: Vec::with_capacity(times.len()),
        urns: full_vector.then(Vec::new),
    };
    let mut stepper = Stepper::new(params, source, replica);
    for &target in &times {
        while state.t < target {
            stepper.advance(&mut state);
        }
        record.rows.push(state.summary(params));
        if let Some(urns) = record.urns.as_mut() {
            urns.extend(
                state
                    .fractions(params)
                    .into_iter()
                    .enumerate()
                    .map(|(urn, z)| UrnRow { t: state.t, urn, z }),
            );
        }
    }
    Ok(record)
}

/// Run a single replica to `horizon` and return the final state.
pub fn simulate_to(
    params: &ModelParams,
    horizon: u64,
    source: UniformSource,
    replica: u64,
) -> Result<SystemState> {
    let mut state = init_system(params)?;
    let mut stepper = Stepper::new(params, source, replica);
    while state.t < horizon {
        stepper.advance(&mut state);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(n: usize, a: u64, b: u64, alpha: f64) -> ModelParams {
        ModelParams::new(n, a, b, alpha).unwrap()
    }

    #[test]
    fn initial_state() {
        let p = params(2, 1, 1, 0.5);
        let s = init_system(&p).unwrap();
        assert_eq!(s.t, 0);
        assert_eq!(s.red_counts, vec![1, 1]);
        assert_eq!(s.fractions(&p), vec![0.5, 0.5]);

        let p = params(3, 2, 3, 0.0);
        let s = init_system(&p).unwrap();
        assert!(s.fractions(&p).iter().all(|&z| z == 0.4));
    }

    #[test]
    fn init_rejects_invalid() {
        let bad = ModelParams {
            n_urns: 1,
            red_init: 0,
            white_init: 1,
            alpha: 0.2,
        };
        assert_eq!(
            init_system(&bad).unwrap_err().to_string(),
            "red_init must be ≥ 1"
        );
    }

    #[test]
    fn probability_examples() {
        // m = 3, t = 0 would not give thirds for two urns; use t = 1 with m = 2.
        let p = params(2, 1, 1, 0.5);
        let s = SystemState {
            t: 1,
            red_counts: vec![1, 2],
        };
        let prob = reinforcement_probability(&s, &p, 0).unwrap();
        assert!((prob - 5.0 / 12.0).abs() < 1e-15);

        let p0 = params(2, 1, 1, 0.0);
        assert_eq!(
            reinforcement_probability(&s, &p0, 1).unwrap(),
            s.fraction(&p0, 1)
        );

        let single = params(1, 2, 3, 0.7);
        let s1 = SystemState {
            t: 4,
            red_counts: vec![5],
        };
        assert!((reinforcement_probability(&s1, &single, 0).unwrap() - 5.0 / 9.0).abs() < 1e-15);

        assert!(matches!(
            reinforcement_probability(&s, &p, 2),
            Err(Error::IndexOutOfRange {
                index: 2,
                n_urns: 2
            })
        ));
    }

    #[test]
    fn step_thresholding() {
        for alpha in [0.0, 0.3, 1.0] {
            let p = params(2, 1, 1, alpha);
            let s = init_system(&p).unwrap();
            let next = step(&s, &p, &[0.3, 0.9]).unwrap();
            assert_eq!(next.red_counts, vec![2, 1]);
            assert_eq!(next.t, 1);
            assert_eq!(next.fractions(&p), vec![2.0 / 3.0, 1.0 / 3.0]);
        }
    }

    #[test]
    fn threshold_is_inclusive() {
        let p = params(2, 1, 1, 0.5);
        let s = init_system(&p).unwrap();
        let next = step(&s, &p, &[0.5, 0.5]).unwrap();
        assert_eq!(next.red_counts, vec![2, 2]);
    }

    #[test]
    fn full_coupling_shares_threshold() {
        let p = params(3, 1, 1, 1.0);
        let s = SystemState {
            t: 2,
            red_counts: vec![1, 2, 3],
        };
        let probs: Vec<f64> = (0..3)
            .map(|i| reinforcement_probability(&s, &p, i).unwrap())
            .collect();
        assert!(probs.iter().all(|&q| q == probs[0]));
        assert_eq!(probs[0], s.mean_fraction(&p));
    }

    #[test]
    fn step_rejects_length_mismatch() {
        let p = params(3, 1, 1, 0.5);
        let s = init_system(&p).unwrap();
        assert!(matches!(
            step(&s, &p, &[0.1, 0.2]),
            Err(Error::LengthMismatch {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn trajectory_is_deterministic() {
        let p = params(4, 2, 3, 0.4);
        let src = UniformSource::new(77);
        let policy = RecordPolicy::Every(7);
        let a = run_trajectory(&p, 200, src, 3, &policy, true).unwrap();
        let b = run_trajectory(&p, 200, src, 3, &policy, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.first().unwrap().t, 0);
        assert_eq!(a.rows.last().unwrap().t, 200);
        let c = run_trajectory(&p, 200, src, 4, &policy, false).unwrap();
        assert_ne!(a.rows, c.rows);
        assert!(c.urns.is_none());
        assert_eq!(a.urns.as_ref().unwrap().len(), a.rows.len() * 4);
    }

    #[test]
    fn record_policies() {
        assert_eq!(RecordPolicy::Every(4).times(10), vec![0, 4, 8, 10]);
        assert_eq!(RecordPolicy::Times(vec![5, 1, 20, 5]).times(10), vec![1, 5]);
        let log = RecordPolicy::LogSpaced { per_decade: 10 }.times(1000);
        assert_eq!(log.first(), Some(&0));
        assert_eq!(log.last(), Some(&1000));
        assert!(log.windows(2).all(|w| w[0] < w[1]));
        assert!(log.len() >= 25);
    }

    // Enumerate all 2^T draw sequences for a single a=b=1 urn and collect the
    // reachable fractions; these are exactly {k/(T+2): k = 1..T+1}.
    #[test]
    fn single_urn_support() {
        let horizon = 10u64;
        let mut reachable = std::collections::BTreeSet::new();
        for mask in 0u32..(1 << horizon) {
            let mut red = 1u64;
            for k in 0..horizon {
                red += u64::from(mask >> k & 1 == 1);
            }
            reachable.insert(red);
        }
        let expected: Vec<u64> = (1..=horizon + 1).collect();
        assert_eq!(reachable.into_iter().collect::<Vec<_>>(), expected);

        for alpha in [0.0, 0.6, 1.0] {
            let p = params(1, 1, 1, alpha);
            for replica in 0..50 {
                let s = simulate_to(&p, horizon, UniformSource::new(9), replica).unwrap();
                assert!((1..=horizon + 1).contains(&s.red_counts[0]));
            }
        }
    }

    #[test]
    fn mean_fraction_is_a_over_m() {
        let p = params(5, 1, 1, 0.5);
        let src = UniformSource::new(2);
        let r = 200u64;
        let zs: Vec<f64> = (0..r)
            .map(|k| simulate_to(&p, 1000, src, k).unwrap().mean_fraction(&p))
            .collect();
        let mean = zs.iter().sum::<f64>() / r as f64;
        let sd = (zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (r - 1) as f64).sqrt();
        assert!(
            (mean - 0.5).abs() < 4.0 * sd / (r as f64).sqrt(),
            "mean {mean}"
        );
    }

    // Martingale of Z_t, and the per-urn drift alpha (Z_t - Z_t(i)) / (t+m+1).
    #[test]
    fn martingale_and_drift() {
        let p = params(4, 1, 2, 0.6);
        let m = p.total_init() as f64;
        let src = UniformSource::new(31);
        let r = 4000u64;
        let t_obs = 5u64;
        let mut dz_bar = Vec::new();
        let mut resid = Vec::new();
        for k in 0..r {
            let mut s = simulate_to(&p, t_obs, src, k).unwrap();
            let before = s.clone();
            Stepper::new(&p, src, k).advance(&mut s);
            dz_bar.push(s.mean_fraction(&p) - before.mean_fraction(&p));
            let drift = p.alpha * (before.mean_fraction(&p) - before.fraction(&p, 0))
                / (t_obs as f64 + m + 1.0);
            resid.push(s.fraction(&p, 0) - before.fraction(&p, 0) - drift);
        }
        for xs in [&dz_bar, &resid] {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!(
                mean.abs() < 4.0 * sd / n.sqrt(),
                "mean {mean}, se {}",
                sd / n.sqrt()
            );
        }
    }

    // For fixed t the marginal moments of Z_t(i) agree across urns.
    #[test]
    fn exchangeable_marginals() {
        let p = params(3, 2, 1, 0.3);
        let src = UniformSource::new(8);
        let r = 4000u64;
        let finals: Vec<Vec<f64>> = (0..r)
            .map(|k| simulate_to(&p, 30, src, k).unwrap().fractions(&p))
            .collect();
        let col = |i: usize| -> (f64, f64) {
            let xs: Vec<f64> = finals.iter().map(|z| z[i]).collect();
            let mean = xs.iter().sum::<f64>() / r as f64;
            let var = xs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
            (mean, var)
        };
        let (m0, v0) = col(0);
        for i in 1..3 {
            let (mi, vi) = col(i);
            let se = ((v0 + vi) / r as f64).sqrt();
            assert!((m0 - mi).abs() < 4.0 * se);
            assert!((v0 - vi).abs() / v0 < 0.15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn state_invariants(
            n in 1usize..6, a in 1u64..4, b in 1u64..4, alpha in 0.0f64..=1.0,
            seed in any::<u64>(), horizon in 0u64..60
        ) {
            let p = params(n, a, b, alpha);
            let mut s = init_system(&p).unwrap();
            let mut stepper = Stepper::new(&p, UniformSource::new(seed), 0);
            for _ in 0..horizon {
                let prev = s.clone();
                stepper.advance(&mut s);
                for (x0, x1) in prev.red_counts.iter().zip(&s.red_counts) {
                    prop_assert!(*x1 == *x0 || *x1 == *x0 + 1);
                }
                for &x in &s.red_counts {
                    prop_assert!(x >= a && x <= a + s.t);
                    prop_assert!(x < s.balls_per_urn(&p));
                }
                let zs = s.fractions(&p);
                let z_bar = s.mean_fraction(&p);
                let lo = zs.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo > 0.0 && hi < 1.0);
                prop_assert!(lo - 1e-15 <= z_bar && z_bar <= hi + 1e-15);
            }
        }
    }
}
