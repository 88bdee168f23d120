//! Exact moments by enumerating the joint law of the urn counts.
//!
//! The distribution over count vectors is propagated step by step in rational
//! arithmetic. Urn 0 is tracked individually; urns `1..N` are kept as a sorted
//! multiset, since their joint law is invariant under permutation and any
//! outcome relabelling among them leaves urn 0 and the mean untouched. Urns
//! sharing a count share a success probability, so a group of `k` of them
//! moves by a binomial number of successes.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::moments::Scalar;
use crate::{Error, ModelParams, Result};

/// Largest `N * t` accepted by the enumeration.
pub const ENUMERATION_LIMIT: u64 = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    pub t: u64,
    /// `Var(Z_t)`.
    pub v: BigRational,
    /// `E[(Z_t(0) - Z_t)²]`.
    pub x: BigRational,
    /// `E[Z_t]`.
    pub mean: BigRational,
    /// `E[Z_t²]`.
    pub mean_sq: BigRational,
    /// `(1/N) Σ_i E[Z_t(i)²]`.
    pub urn_sq: BigRational,
}

type Counts = (u64, Vec<u64>);

fn rational(n: u64, d: u64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn binomial(k: u64, j: u64) -> BigRational {
    let mut c = BigRational::one();
    for r in 0..j {
        c *= rational(k - r, r + 1);
    }
    c
}

fn pow(base: &BigRational, e: u64) -> BigRational {
    num_traits::pow(base.clone(), e as usize)
}

fn moments_of(dist: &BTreeMap<Counts, BigRational>, t: u64, n: u64, balls: u64) -> ExactMoments {
    let nb = rational(1, n);
    let denom = rational(1, balls);
    let mut mean = BigRational::zero();
    let mut mean_sq = BigRational::zero();
    let mut x = BigRational::zero();
    let mut urn_sq = BigRational::zero();
    for ((c0, rest), w) in dist {
        let total: u64 = c0 + rest.iter().sum::<u64>();
        let z_bar = rational(total, 1) * &denom * &nb;
        let z0 = rational(*c0, 1) * &denom;
        let sq_sum: u64 = c0 * c0 + rest.iter().map(|c| c * c).sum::<u64>();
        let dev = &z0 - &z_bar;
        mean += w * &z_bar;
        mean_sq += w * &z_bar * &z_bar;
        x += w * &dev * &dev;
        urn_sq += w * rational(sq_sum, balls * balls * n);
    }
    let v = &mean_sq - &mean * &mean;
    ExactMoments {
        t,
        v,
        x,
        mean,
        mean_sq,
        urn_sq,
    }
}

/// Exact moments for `t = 0..=horizon`.
pub fn exact_enumeration_sequence(params: &ModelParams, horizon: u64) -> Result<Vec<ExactMoments>> {
    params.validate()?;
    let n = params.n_urns as u64;
    if n * horizon > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge {
            work: n * horizon,
            limit: ENUMERATION_LIMIT,
        });
    }
    let m = params.total_init();
    let alpha = BigRational::from_alpha(params.alpha);
    let one_minus = BigRational::one() - &alpha;

    let mut dist: BTreeMap<Counts, BigRational> = BTreeMap::new();
    dist.insert(
        (params.red_init, vec![params.red_init; params.n_urns - 1]),
        BigRational::one(),
    );
    let mut out = vec![moments_of(&dist, 0, n, m)];

    for t in 0..horizon {
        let balls = t + m;
        let mut next: BTreeMap<Counts, BigRational> = BTreeMap::new();
        for ((c0, rest), w) in &dist {
            let total: u64 = c0 + rest.iter().sum::<u64>();
            let shared = &alpha * rational(total, n * balls);
            let prob = |c: u64| &shared + &one_minus * rational(c, balls);

            // Run-length groups of equal counts among urns 1..N.
            let mut groups: Vec<(u64, u64)> = Vec::new();
            for &c in rest {
                match groups.last_mut() {
                    Some((value, k)) if *value == c => *k += 1,
                    _ => groups.push((c, 1)),
                }
            }

            // Each partial outcome: the new counts of urns 1..N so far and its weight.
            let mut partial: Vec<(Vec<u64>, BigRational)> =
                vec![(Vec::with_capacity(rest.len()), w.clone())];
            for &(c, k) in &groups {
                let p = prob(c);
                let q = BigRational::one() - &p;
                let mut grown = Vec::with_capacity(partial.len() * (k as usize + 1));
                for (counts, weight) in &partial {
                    for j in 0..=k {
                        let pj = binomial(k, j) * pow(&p, j) * pow(&q, k - j);
                        if pj.is_zero() {
                            continue;
                        }
                        let mut counts = counts.clone();
                        counts.extend(std::iter::repeat_n(c, (k - j) as usize));
                        counts.extend(std::iter::repeat_n(c + 1, j as usize));
                        grown.push((counts, weight * pj));
                    }
                }
                partial = grown;
            }

            let p0 = prob(*c0);
            let q0 = BigRational::one() - &p0;
            for (mut counts, weight) in partial {
                counts.sort_unstable();
                for (delta, pr) in [(0u64, &q0), (1u64, &p0)] {
                    if pr.is_zero() {
                        continue;
                    }
                    *next
                        .entry((c0 + delta, counts.clone()))
                        .or_insert_with(BigRational::zero) += &weight * pr;
                }
            }
        }
        dist = next;
        out.push(moments_of(&dist, t + 1, n, t + 1 + m));
    }
    Ok(out)
}

pub fn exact_enumeration_moments(params: &ModelParams, t: u64) -> Result<ExactMoments> {
    Ok(exact_enumeration_sequence(params, t)?
        .pop()
        .expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::iterate_exact;

    fn params(n: usize, a: u64, b: u64, alpha: f64) -> ModelParams {
        ModelParams::new(n, a, b, alpha).unwrap()
    }

    /// Independent brute force: every one of the 2^(N t) draw sequences, with
    /// the full count vector carried along.
    fn brute_force(params: &ModelParams, horizon: u64) -> (BigRational, BigRational, BigRational) {
        let n = params.n_urns;
        let m = params.total_init();
        let alpha = BigRational::from_alpha(params.alpha);
        let bits = n as u64 * horizon;
        let mut e_mean = BigRational::zero();
        let mut e_mean_sq = BigRational::zero();
        let mut e_x = BigRational::zero();
        for mask in 0u64..(1 << bits) {
            let mut counts = vec![params.red_init; n];
            let mut weight = BigRational::one();
            for t in 0..horizon {
                let balls = t + m;
                let total: u64 = counts.iter().sum();
                let z_bar = rational(total, n as u64 * balls);
                let mut next = counts.clone();
                for i in 0..n {
                    let p = &alpha * &z_bar
                        + (BigRational::one() - &alpha) * rational(counts[i], balls);
                    if mask >> (t * n as u64 + i as u64) & 1 == 1 {
                        weight *= p;
                        next[i] += 1;
                    } else {
                        weight *= BigRational::one() - p;
                    }
                }
                counts = next;
            }
            let balls = horizon + m;
            let total: u64 = counts.iter().sum();
            let z_bar = rational(total, n as u64 * balls);
            let dev = rational(counts[0], balls) - &z_bar;
            e_mean += &weight * &z_bar;
            e_mean_sq += &weight * &z_bar * &z_bar;
            e_x += &weight * &dev * &dev;
        }
        let v = &e_mean_sq - &e_mean * &e_mean;
        (e_mean, v, e_x)
    }

    #[test]
    fn hand_enumerated_pair() {
        let m = exact_enumeration_moments(&params(2, 1, 1, 0.5), 1).unwrap();
        assert_eq!(m.x, rational(1, 72));
        assert_eq!(m.v, rational(1, 72));
        assert_eq!(m.mean, rational(1, 2));
    }

    #[test]
    fn lumped_matches_brute_force() {
        for (n, horizon) in [(1usize, 8u64), (2, 5), (3, 3), (4, 2), (5, 2)] {
            for alpha in [0.0, 0.3, 1.0] {
                for (a, b) in [(1, 1), (2, 1)] {
                    let p = params(n, a, b, alpha);
                    let exact = exact_enumeration_moments(&p, horizon).unwrap();
                    let (mean, v, x) = brute_force(&p, horizon);
                    assert_eq!(exact.mean, mean);
                    assert_eq!(exact.v, v);
                    assert_eq!(exact.x, x);
                }
            }
        }
    }

    #[test]
    fn mean_is_conserved() {
        for (n, horizon) in [(1usize, 24u64), (3, 8), (6, 4), (24, 1)] {
            let p = params(n, 2, 1, 0.8);
            for m in exact_enumeration_sequence(&p, horizon).unwrap() {
                assert_eq!(m.mean, rational(2, 3));
            }
        }
    }

    #[test]
    fn single_urn_has_no_spread() {
        for m in exact_enumeration_sequence(&params(1, 1, 2, 0.5), 12).unwrap() {
            assert!(m.x.is_zero());
        }
    }

    #[test]
    fn matches_recursion_exactly() {
        let p = params(3, 1, 2, 0.3);
        let oracle = exact_enumeration_sequence(&p, 8).unwrap();
        let rec = iterate_exact(&p, 8);
        for (o, r) in oracle.iter().zip(&rec) {
            assert_eq!(o.v, r.v);
            assert_eq!(o.x, r.x);
            assert_eq!(o.urn_sq, &r.x + &r.v + rational(1, 9));
        }
    }

    #[test]
    fn rejects_large_instances() {
        assert!(matches!(
            exact_enumeration_moments(&params(5, 1, 1, 0.5), 5),
            Err(Error::InstanceTooLarge {
                work: 25,
                limit: 24
            })
        ));
    }
}
