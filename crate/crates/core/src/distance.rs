//! Scalar distance kernels between discrete distributions and category profiles.

use accurate::sum::OnlineExactSum;
use accurate::traits::SumWithAccumulator;
use serde::{Deserialize, Serialize};

use crate::attr_model::{CategoryProfile, NORMALIZATION_TOL};
use crate::error::{Result, TadError};

/// Largest joint attribute space enumerated by [`delta_term`] and [`lemma1_check`].
pub const JOINT_ENUMERATION_CAP: u128 = 1 << 16;

/// Probability weights over an implicit ordered value set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution(Vec<f64>);

impl DiscreteDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(TadError::validation("distribution has no values"));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(TadError::validation("weights must lie in [0, 1]"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(TadError::validation(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }
}

/// Total variation distance, half the L1 distance between `p` and `q`.
pub fn tv_distance(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if p.0.len() != q.0.len() {
        return Err(TadError::validation(format!(
            "value sets differ in size: {} vs {}",
            p.0.len(),
            q.0.len()
        )));
    }
    Ok(tv_unchecked(&p.0, &q.0))
}

#[inline]
pub(crate) fn tv_unchecked(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn check_compatible(pk: &CategoryProfile, pt: &CategoryProfile) -> Result<()> {
    let same = pk.distributions.len() == pt.distributions.len()
        && pk
            .distributions
            .iter()
            .zip(&pt.distributions)
            .all(|(a, b)| a.len() == b.len());
    if !same || pk.distributions.is_empty() {
        return Err(TadError::validation(format!(
            "profiles '{}' and '{}' do not share a schema",
            pk.category_id, pt.category_id
        )));
    }
    Ok(())
}

/// Mean over attributes of the TV distance between the two categories' distributions.
pub fn category_distance(pk: &CategoryProfile, pt: &CategoryProfile) -> Result<f64> {
    check_compatible(pk, pt)?;
    Ok(category_distance_unchecked(pk, pt))
}

#[inline]
pub(crate) fn category_distance_unchecked(pk: &CategoryProfile, pt: &CategoryProfile) -> f64 {
    let l = pk.distributions.len() as f64;
    pk.distributions
        .iter()
        .zip(&pt.distributions)
        .map(|(p, q)| tv_unchecked(p, q))
        .sum::<f64>()
        / l
}

/// Mixed-radix counter over the joint attribute space.
fn for_each_joint(cards: &[usize], mut f: impl FnMut(&[usize])) {
    let mut digits = vec![0usize; cards.len()];
    loop {
        f(&digits);
        let mut l = cards.len();
        loop {
            if l == 0 {
                return;
            }
            l -= 1;
            digits[l] += 1;
            if digits[l] < cards[l] {
                break;
            }
            digits[l] = 0;
        }
    }
}

fn joint_cards(pk: &CategoryProfile, pt: &CategoryProfile) -> Result<Vec<usize>> {
    check_compatible(pk, pt)?;
    let cards: Vec<usize> = pk.distributions.iter().map(Vec::len).collect();
    let size = cards
        .iter()
        .fold(1u128, |acc, &c| acc.saturating_mul(c as u128));
    if size > JOINT_ENUMERATION_CAP {
        return Err(TadError::infeasible(format!(
            "joint attribute space has {size} outcomes, over the cap of {JOINT_ENUMERATION_CAP}; use fewer attributes"
        )));
    }
    Ok(cards)
}

/// The normalization slack term: the sum over the joint attribute space of
/// `(1/2L) * sum_l (p_k(a^l) + p_t(a^l))`.
pub fn delta_term(pk: &CategoryProfile, pt: &CategoryProfile) -> Result<f64> {
    let cards = joint_cards(pk, pt)?;
    // Occurrences of each (attribute, value) across the joint space; integer
    // tallies keep the weights exact.
    let mut counts: Vec<Vec<u64>> = cards.iter().map(|&c| vec![0; c]).collect();
    for_each_joint(&cards, |a| {
        for (l, &v) in a.iter().enumerate() {
            counts[l][v] += 1;
        }
    });
    // Each attribute's weighted mass is summed exactly, so rounding in the
    // stored probabilities (e.g. 1 - p next to p) cancels before the total.
    let masses = counts.iter().enumerate().map(|(l, row)| {
        row.iter()
            .enumerate()
            .flat_map(|(v, &n)| {
                let n = n as f64;
                [n * pk.distributions[l][v], n * pt.distributions[l][v]]
            })
            .sum_with_accumulator::<OnlineExactSum<f64>>()
    });
    let total = masses.sum_with_accumulator::<OnlineExactSum<f64>>();
    Ok(total / (2.0 * cards.len() as f64))
}

/// Outcome of comparing the joint-space L1 distance against `d_A + delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub lhs: f64,
    pub d_a: f64,
    pub delta: f64,
    pub holds: bool,
    pub slack: f64,
}

/// Slack below which the inequality counts as violated.
pub const LEMMA1_SLACK_TOL: f64 = 1e-9;

/// Enumerates the joint space under conditional independence of attributes
/// and checks `sum_a |p_k(a) - p_t(a)| <= d_A + delta`.
pub fn lemma1_check(pk: &CategoryProfile, pt: &CategoryProfile) -> Result<Lemma1Report> {
    let cards = joint_cards(pk, pt)?;
    let mut lhs = 0.0;
    for_each_joint(&cards, |a| {
        let mut jk = 1.0;
        let mut jt = 1.0;
        for (l, &v) in a.iter().enumerate() {
            jk *= pk.distributions[l][v];
            jt *= pt.distributions[l][v];
        }
        lhs += (jk - jt).abs();
    });
    let d_a = category_distance_unchecked(pk, pt);
    let delta = delta_term(pk, pt)?;
    let slack = d_a + delta - lhs;
    Ok(Lemma1Report {
        lhs,
        d_a,
        delta,
        holds: slack >= -LEMMA1_SLACK_TOL,
        slack,
    })
}

/// Sample-complexity term `sqrt((4/m) (d ln(2em/d) + ln(4/delta)))`.
pub fn vc_complexity_term(m: u64, d: u64, delta: f64) -> Result<f64> {
    if m == 0 || d == 0 {
        return Err(TadError::validation("sample count and VC dimension must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TadError::validation(format!("delta {delta} not in (0, 1)")));
    }
    let (m, d) = (m as f64, d as f64);
    let bracket = d * (2.0 * std::f64::consts::E * m / d).ln() + (4.0 / delta).ln();
    Ok((4.0 / m * bracket).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dd(w: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(w.to_vec()).unwrap()
    }

    fn bin(id: &str, p: &[f64]) -> CategoryProfile {
        CategoryProfile::from_binary_marginals(id, p)
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&dd(&[0.5, 0.5]), &dd(&[0.5, 0.5])).unwrap(), 0.0);
        assert_eq!(tv_distance(&dd(&[1.0, 0.0]), &dd(&[0.0, 1.0])).unwrap(), 1.0);
        assert!((tv_distance(&dd(&[0.2, 0.8]), &dd(&[0.5, 0.5])).unwrap() - 0.3).abs() < 1e-15);
        assert!(tv_distance(&dd(&[1.0]), &dd(&[0.5, 0.5])).is_err());
        assert!(DiscreteDistribution::new(vec![0.7, 0.7]).is_err());
    }

    #[test]
    fn category_distance_examples() {
        let a = bin("a", &[0.9, 0.1]);
        assert_eq!(category_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(category_distance(&bin("a", &[1.0, 0.0]), &bin("b", &[0.0, 1.0])).unwrap(), 1.0);
        // Hand half-L1: |0.9-0.6| = 0.3 and |0.1-0.3| = 0.2, mean 0.25.
        let d = category_distance(&a, &bin("b", &[0.6, 0.3])).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        assert!(category_distance(&a, &bin("c", &[0.5])).is_err());
    }

    /// Delta by brute force over every joint outcome, written independently of the counter.
    fn delta_oracle(pk: &[f64], pt: &[f64]) -> f64 {
        let l = pk.len();
        let mut total = 0.0;
        for mask in 0u32..(1 << l) {
            for i in 0..l {
                let on = (mask >> i) & 1 == 1;
                let (a, b) = if on { (pk[i], pt[i]) } else { (1.0 - pk[i], 1.0 - pt[i]) };
                total += (a + b) / (2.0 * l as f64);
            }
        }
        total
    }

    #[test]
    fn delta_matches_enumeration_and_closed_form() {
        assert!((delta_term(&bin("a", &[0.3]), &bin("b", &[0.9])).unwrap() - 1.0).abs() < 1e-12);
        let (pk, pt) = ([0.1, 0.5, 0.8], [0.4, 0.0, 1.0]);
        assert!((delta_oracle(&pk, &pt) - 4.0).abs() < 1e-12);
        assert_eq!(delta_term(&bin("a", &pk), &bin("b", &pt)).unwrap(), 4.0);
        let a = bin("a", &[0.2, 0.7]);
        assert_eq!(delta_term(&a, &a).unwrap(), delta_term(&a, &bin("b", &[1.0, 0.0])).unwrap());
    }

    #[test]
    fn lemma1_examples() {
        let a = bin("a", &[0.3, 0.6]);
        let r = lemma1_check(&a, &a).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.holds);
        assert_eq!(r.slack, r.delta);

        let r = lemma1_check(&bin("a", &[1.0]), &bin("b", &[0.0])).unwrap();
        assert_eq!((r.lhs, r.d_a, r.delta), (2.0, 1.0, 1.0));
        assert!(r.holds);
        assert_eq!(r.slack, 0.0);
    }

    #[test]
    fn enumeration_cap_is_infeasible() {
        let big = bin("a", &[0.5; 17]);
        assert!(matches!(delta_term(&big, &big), Err(TadError::Infeasible(_))));
        assert!(matches!(lemma1_check(&big, &big), Err(TadError::Infeasible(_))));
        let ok = bin("a", &[0.5; 16]);
        assert!(lemma1_check(&ok, &ok).is_ok());
    }

    #[test]
    fn vc_term() {
        let t25 = vc_complexity_term(25, 10, 0.05).unwrap();
        let t100 = vc_complexity_term(100, 10, 0.05).unwrap();
        assert!(t100 < t25);
        assert!((t25 - 2.2082).abs() < 1e-4);
        assert!(vc_complexity_term(25, 10, 0.99).unwrap() < vc_complexity_term(25, 10, 0.5).unwrap());
        assert!(vc_complexity_term(0, 10, 0.05).is_err());
        assert!(vc_complexity_term(25, 0, 0.05).is_err());
        assert!(vc_complexity_term(25, 10, 1.0).is_err());
        assert!(vc_complexity_term(25, 10, 0.0).is_err());
    }

    fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("nonzero", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn tv_is_a_metric((p, q, r) in (2usize..6).prop_flat_map(|n| (dist(n), dist(n), dist(n)))) {
            let tv = |a: &[f64], b: &[f64]| tv_unchecked(a, b);
            prop_assert_eq!(tv(&p, &q), tv(&q, &p));
            prop_assert!(tv(&p, &p).abs() <= 1e-12);
            prop_assert!(tv(&p, &r) <= tv(&p, &q) + tv(&q, &r) + 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&tv(&p, &q)));
        }

        #[test]
        fn binary_delta_is_power_of_two(pk in prop::collection::vec(0.0f64..=1.0, 1..9),
                                        seed in prop::collection::vec(0.0f64..=1.0, 8)) {
            let pt: Vec<f64> = seed[..pk.len()].to_vec();
            let d = delta_term(&bin("a", &pk), &bin("b", &pt)).unwrap();
            prop_assert!((d - 2f64.powi(pk.len() as i32 - 1)).abs() < 1e-9);
        }
    }
}
