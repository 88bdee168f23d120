//! Small numerical helpers shared by the recursions and the fitters.

use num_bigint::BigInt;
use num_rational::BigRational;

/// Neumaier-compensated running value.
///
/// Used to accumulate long recursions whose increments span many orders of
/// magnitude relative to the running total.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    pub fn new(value: f64) -> Self {
        Self {
            sum: value,
            carry: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for Compensated {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Compensated::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// The rational with the smallest denominator (up to 10⁶) that converts back to
/// exactly `x`, falling back to the exact binary expansion of `x`.
///
/// `0.3` maps to `3/10` rather than `5404319552844595/18014398509481984`.
pub fn simplest_rational(x: f64) -> BigRational {
    assert!(x.is_finite(), "cannot convert {x} to a rational");
    for den in 1i64..=1_000_000 {
        let num = (x * den as f64).round();
        if num.abs() < 9.0e15 && num / den as f64 == x {
            return BigRational::new(BigInt::from(num as i64), BigInt::from(den));
        }
    }
    BigRational::from_float(x).expect("finite")
}

/// Ordinary least squares `y = intercept + slope * x`; returns
/// `(slope, intercept, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    (slope, intercept, r_squared)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_beats_naive() {
        let mut acc = Compensated::new(1.0);
        let mut naive = 1.0f64;
        for _ in 0..1_000_000 {
            acc.add(1e-17);
            naive += 1e-17;
        }
        assert_eq!(naive, 1.0);
        assert!((acc.value() - (1.0 + 1e-11)).abs() < 1e-22);
    }

    #[test]
    fn rational_recovery() {
        assert_eq!(
            simplest_rational(0.3),
            BigRational::new(3.into(), 10.into())
        );
        assert_eq!(simplest_rational(0.0), BigRational::new(0.into(), 1.into()));
        assert_eq!(simplest_rational(1.0), BigRational::new(1.into(), 1.into()));
        assert_eq!(
            simplest_rational(0.125),
            BigRational::new(1.into(), 8.into())
        );
        let third = simplest_rational(1.0 / 3.0);
        assert_eq!(third, BigRational::new(1.into(), 3.into()));
    }

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..20).map(|k| k as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.7 * x).collect();
        let (slope, intercept, r2) = linear_fit(&xs, &ys);
        assert!((slope + 0.7).abs() < 1e-12);
        assert!((intercept - 3.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
