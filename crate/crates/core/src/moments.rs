//! Exact second-moment recursions.
//!
//! For a system of `N` urns the pair `v_t = Var(Z_t)` and
//! `x_t = E[(Z_t(i) - Z_t)²]` evolves deterministically. With `s = t + m + 1`,
//! `p = a/m`, `E[Z_t²] = v_t + p²` and `(1/N) Σ E[Z_t(i)²] = x_t + v_t + p²`:
//!
//! ```text
//! v_{t+1} = v_t + [p - α(2-α) E[Z_t²] - (1-α)² (1/N) Σ E[Z_t(i)²]] / (N s²)
//! x_{t+1} = f(t) x_t + g(t)
//! f(t)    = 1 - 2α/s + (α² - (N-1)/N (1-α)²) / s²
//! g(t)    = (N-1)/N (p - E[Z_t²]) / s²
//! ```
//!
//! As `N → ∞`, `v → 0` and `x` tends to the solution of
//! `x_{t+1} = x_t - 2α x_t/s + (2α-1) x_t/s² + (p - p²)/s²`.
//!
//! The step functions are generic over [`Scalar`] so the same code runs in
//! `f64` and in exact rational arithmetic.

use std::ops::{Add, Div, Mul, Sub};

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::numeric::{simplest_rational, Compensated};
use crate::{Error, ModelParams, Result};

pub trait Scalar:
    Clone
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn from_u64(v: u64) -> Self;
    /// Conversion for the coupling weight; exact types recover the simplest
    /// rational that rounds to `alpha`.
    fn from_alpha(alpha: f64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_u64(v: u64) -> Self {
        v as f64
    }
    fn from_alpha(alpha: f64) -> Self {
        alpha
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn from_u64(v: u64) -> Self {
        BigRational::from_integer(v.into())
    }
    fn from_alpha(alpha: f64) -> Self {
        simplest_rational(alpha)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentState<T = f64> {
    pub t: u64,
    /// `Var(Z_t)`.
    pub v: T,
    /// `E[(Z_t(i) - Z_t)²]`.
    pub x: T,
}

impl<T: Scalar> MomentState<T> {
    pub fn initial() -> Self {
        Self {
            t: 0,
            v: T::from_u64(0),
            x: T::from_u64(0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitMomentState {
    pub t: u64,
    pub x_inf: f64,
}

impl LimitMomentState {
    pub fn initial() -> Self {
        Self { t: 0, x_inf: 0.0 }
    }
}

/// Parameters lifted into a scalar type, shared by every step.
#[derive(Debug, Clone)]
pub struct MomentSystem<T> {
    n: T,
    m: u64,
    p: T,
    alpha: T,
    /// `(N-1)/N`.
    pair_weight: T,
}

impl<T: Scalar> MomentSystem<T> {
    pub fn new(params: &ModelParams) -> Self {
        let n = T::from_u64(params.n_urns as u64);
        let p = T::from_u64(params.red_init) / T::from_u64(params.total_init());
        let pair_weight = T::from_u64(params.n_urns as u64 - 1) / n.clone();
        Self {
            n,
            m: params.total_init(),
            p,
            alpha: T::from_alpha(params.alpha),
            pair_weight,
        }
    }

    fn one() -> T {
        T::from_u64(1)
    }

    pub fn mean_fraction(&self) -> T {
        self.p.clone()
    }

    /// `E[Z_t²] = v_t + p²`.
    pub fn second_moment_of_mean(&self, s: &MomentState<T>) -> T {
        s.v.clone() + self.p.clone() * self.p.clone()
    }

    /// `(1/N) Σ_i E[Z_t(i)²] = x_t + v_t + p²`.
    pub fn mean_urn_second_moment(&self, s: &MomentState<T>) -> T {
        s.x.clone() + self.second_moment_of_mean(s)
    }

    /// Increment of `v` at time `t`.
    pub fn v_increment(&self, s: &MomentState<T>) -> T {
        let denom = T::from_u64(s.t + self.m + 1);
        let denom_sq = denom.clone() * denom;
        let a = self.alpha.clone();
        let one_minus = Self::one() - a.clone();
        let two = T::from_u64(2);
        let bracket = self.p.clone()
            - a.clone() * (two - a) * self.second_moment_of_mean(s)
            - one_minus.clone() * one_minus * self.mean_urn_second_moment(s);
        bracket / (self.n.clone() * denom_sq)
    }

    /// `B = α² - (N-1)/N (1-α)²`.
    pub fn b_coefficient(&self) -> T {
        let one_minus = Self::one() - self.alpha.clone();
        self.alpha.clone() * self.alpha.clone()
            - self.pair_weight.clone() * one_minus.clone() * one_minus
    }

    pub fn f(&self, t: u64) -> T {
        let s = T::from_u64(t + self.m + 1);
        let a = T::from_u64(2) * self.alpha.clone();
        Self::one() - a / s.clone() + self.b_coefficient() / (s.clone() * s)
    }

    pub fn g(&self, t: u64, ez2: T) -> T {
        let s = T::from_u64(t + self.m + 1);
        self.pair_weight.clone() * (self.p.clone() - ez2) / (s.clone() * s)
    }

    /// Increment of `x` at time `t`, `(f(t) - 1) x_t + g(t)`.
    pub fn x_increment(&self, s: &MomentState<T>) -> T {
        let f = self.f(s.t);
        let g = self.g(s.t, self.second_moment_of_mean(s));
        (f - Self::one()) * s.x.clone() + g
    }

    pub fn step(&self, s: &MomentState<T>) -> MomentState<T> {
        MomentState {
            t: s.t + 1,
            v: s.v.clone() + self.v_increment(s),
            x: s.x.clone() + self.x_increment(s),
        }
    }

    /// Increment of `x^∞` at time `t`.
    pub fn limit_increment(&self, t: u64, x_inf: T) -> T {
        let s = T::from_u64(t + self.m + 1);
        let s_sq = s.clone() * s.clone();
        let two_alpha = T::from_u64(2) * self.alpha.clone();
        let var = self.p.clone() - self.p.clone() * self.p.clone();
        (two_alpha.clone() - Self::one()) * x_inf.clone() / s_sq.clone() + var / s_sq
            - two_alpha * x_inf / s
    }

    /// Iterate the finite-`N` recursion from the initial state.
    pub fn iterate(&self, horizon: u64) -> Vec<MomentState<T>> {
        let mut out = Vec::with_capacity(horizon as usize + 1);
        let mut s = MomentState::initial();
        out.push(s.clone());
        for _ in 0..horizon {
            s = self.step(&s);
            out.push(s.clone());
        }
        out
    }
}

pub fn finite_n_moment_step(params: &ModelParams, s: &MomentState) -> MomentState {
    MomentSystem::<f64>::new(params).step(s)
}

pub fn limit_moment_step(params: &ModelParams, s: &LimitMomentState) -> LimitMomentState {
    let sys = MomentSystem::<f64>::new(params);
    LimitMomentState {
        t: s.t + 1,
        x_inf: s.x_inf + sys.limit_increment(s.t, s.x_inf),
    }
}

/// Finite-`N` `(v_t, x_t)` for `t = 0..=horizon` with compensated accumulation.
pub fn finite_n_sequence(params: &ModelParams, horizon: u64) -> Vec<MomentState> {
    let sys = MomentSystem::<f64>::new(params);
    let mut v = Compensated::new(0.0);
    let mut x = Compensated::new(0.0);
    let mut out = Vec::with_capacity(horizon as usize + 1);
    out.push(MomentState::initial());
    for t in 0..horizon {
        let s = MomentState {
            t,
            v: v.value(),
            x: x.value(),
        };
        v.add(sys.v_increment(&s));
        x.add(sys.x_increment(&s));
        out.push(MomentState {
            t: t + 1,
            v: v.value(),
            x: x.value(),
        });
    }
    out
}

/// `x^∞_t` for `t = 0..=horizon` with compensated accumulation.
pub fn limit_sequence(params: &ModelParams, horizon: u64) -> Vec<f64> {
    let sys = MomentSystem::<f64>::new(params);
    let mut x = Compensated::new(0.0);
    let mut out = Vec::with_capacity(horizon as usize + 1);
    out.push(0.0);
    for t in 0..horizon {
        x.add(sys.limit_increment(t, x.value()));
        out.push(x.value());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionCoefficients {
    /// `A = 2α`.
    pub a: f64,
    /// `B = α² - (N-1)/N (1-α)²`.
    pub b: f64,
    pub f: f64,
    pub g: f64,
}

pub fn recursion_coefficients(
    params: &ModelParams,
    t: u64,
    ez2: f64,
) -> Result<RecursionCoefficients> {
    let p = params.mean_fraction();
    if !(0.0..=p).contains(&ez2) {
        return Err(Error::OutOfRange(format!(
            "E[Z_t²] = {ez2} must lie in [0, {p}]"
        )));
    }
    let sys = MomentSystem::<f64>::new(params);
    Ok(RecursionCoefficients {
        a: 2.0 * params.alpha,
        b: sys.b_coefficient(),
        f: sys.f(t),
        g: sys.g(t, ez2),
    })
}

/// `x_t` from the product form `x_t = [Π_{k<t} f(k)] Σ_{i<t} F(i)` with
/// `F(i) = g(i) / Π_{k≤i} f(k)`, i.e. through the accumulated sequence
/// `ξ_{t+1} = ξ_t + F(t)`.
///
/// `v_sequence[t]` supplies `Var(Z_t)` for `t < horizon`. Returns
/// `x_0..=x_horizon`.
pub fn closed_form_x(params: &ModelParams, horizon: u64, v_sequence: &[f64]) -> Result<Vec<f64>> {
    if (v_sequence.len() as u64) < horizon {
        return Err(Error::InsufficientData(format!(
            "horizon {horizon} needs {horizon} variances, got {}",
            v_sequence.len()
        )));
    }
    let sys = MomentSystem::<f64>::new(params);
    let p = params.mean_fraction();
    let mut product = 1.0;
    let mut xi = Compensated::new(0.0);
    let mut out = Vec::with_capacity(horizon as usize + 1);
    out.push(0.0);
    for t in 0..horizon {
        let ez2 = v_sequence[t as usize] + p * p;
        product *= sys.f(t);
        xi.add(sys.g(t, ez2) / product);
        out.push(product * xi.value());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: u64,
    pub v_exact: f64,
    pub x_exact: f64,
    pub x_inf: f64,
}

pub fn moment_table(params: &ModelParams, horizon: u64) -> Vec<MomentRow> {
    let finite = finite_n_sequence(params, horizon);
    let limit = limit_sequence(params, horizon);
    finite
        .iter()
        .zip(&limit)
        .map(|(s, &x_inf)| MomentRow {
            t: s.t,
            v_exact: s.v,
            x_exact: s.x,
            x_inf,
        })
        .collect()
}

/// Exact rational iteration, used by the oracle comparison.
pub fn iterate_exact(params: &ModelParams, horizon: u64) -> Vec<MomentState<BigRational>> {
    MomentSystem::<BigRational>::new(params).iterate(horizon)
}
