//! Mergeable streaming statistics and a few goodness-of-fit helpers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Count, mean and central moment sums up to fourth order for one scalar.
///
/// Updates follow Welford's recurrence and merges use the pairwise
/// combination formulas of Chan et al. extended to third and fourth order
/// (Pébay 2008).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamingStats {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl StreamingStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut s = Self::new();
        for &x in xs {
            s.push(x);
        }
        s
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&self, other: &Self) -> Self {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let mean = self.mean + delta * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        Self {
            count: self.count + other.count,
            mean,
            m2,
            m3,
            m4,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; `None` below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.m2 / (self.count as f64 - 1.0))
    }

    pub fn std_error_mean(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.count as f64).sqrt())
    }

    /// Standard error of [`variance`](Self::variance), from the fourth
    /// central moment: `sqrt((μ4 - σ⁴ (n-3)/(n-1)) / n)`.
    pub fn variance_std_error(&self) -> Option<f64> {
        if self.count < 4 {
            return None;
        }
        let n = self.count as f64;
        let var = self.m2 / (n - 1.0);
        let mu4 = self.m4 / n;
        Some(((mu4 - var * var * (n - 3.0) / (n - 1.0)).max(0.0) / n).sqrt())
    }

    /// Sample skewness `g1 = sqrt(n) m3 / m2^{3/2}`.
    pub fn skewness(&self) -> Option<f64> {
        (self.count >= 3 && self.m2 > 0.0)
            .then(|| (self.count as f64).sqrt() * self.m3 / self.m2.powf(1.5))
    }

    /// Sample excess kurtosis `g2 = n m4 / m2² - 3`.
    pub fn excess_kurtosis(&self) -> Option<f64> {
        (self.count >= 4 && self.m2 > 0.0)
            .then(|| self.count as f64 * self.m4 / (self.m2 * self.m2) - 3.0)
    }
}

/// A fixed-schema vector of [`StreamingStats`], one per labelled scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsBlock {
    labels: Arc<[String]>,
    cells: Vec<StreamingStats>,
}

impl StatsBlock {
    pub fn new(labels: Arc<[String]>) -> Self {
        let cells = vec![StreamingStats::new(); labels.len()];
        Self { labels, cells }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn cells(&self) -> &[StreamingStats] {
        &self.cells
    }

    #[inline]
    pub fn push(&mut self, index: usize, x: f64) {
        self.cells[index].push(x);
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if !Arc::ptr_eq(&self.labels, &other.labels) && self.labels != other.labels {
            return Err(Error::SchemaMismatch(format!(
                "{} vs {} tracked scalars",
                self.labels.len(),
                other.labels.len()
            )));
        }
        Ok(Self {
            labels: self.labels.clone(),
            cells: self
                .cells
                .iter()
                .zip(&other.cells)
                .map(|(a, b)| a.merge(b))
                .collect(),
        })
    }
}

/// Reduce `items` by merging adjacent pairs level by level.
///
/// The pairing depends only on `items.len()`, so the result is bitwise
/// reproducible however the leaves were produced.
pub fn tree_reduce<T, F>(mut items: Vec<T>, merge: F) -> Result<Option<T>>
where
    F: Fn(&T, &T) -> Result<T>,
{
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut iter = items.into_iter();
        while let Some(a) = iter.next() {
            match iter.next() {
                Some(b) => next.push(merge(&a, &b)?),
                None => next.push(a),
            }
        }
        items = next;
    }
    Ok(items.pop())
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and a
/// continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn ks_distance_uniform(samples: &[f64]) -> f64 {
    ks_distance(samples, |x| x.clamp(0.0, 1.0))
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
