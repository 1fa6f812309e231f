//! Probability vectors on the simplex, entropy, and simplex samplers.

use crate::{CoreError, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Tolerance on the sum of a probability vector.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A probability vector over `n_y >= 2` target values.
///
/// Construction validates the simplex invariants; inputs are never silently
/// renormalized (use [`BeliefVector::normalized`] for that).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct BeliefVector(Vec<f64>);

impl BeliefVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(CoreError::InvalidBelief {
                sum: probs.iter().sum(),
                n: probs.len(),
            });
        }
        let sum: f64 = probs.iter().sum();
        let in_range = probs.iter().all(|&p| (0.0..=1.0 + SUM_TOLERANCE).contains(&p));
        if !in_range || (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(CoreError::InvalidBelief { sum, n: probs.len() });
        }
        Ok(BeliefVector(probs))
    }

    /// Explicitly renormalize a non-negative weight vector into a belief.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.len() < 2 || !(sum > 0.0) || weights.iter().any(|&w| w < 0.0) {
            return Err(CoreError::InvalidBelief { sum, n: weights.len() });
        }
        Ok(BeliefVector(weights.into_iter().map(|w| w / sum).collect()))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    /// Degenerate belief with all mass on `index`.
    pub fn vertex(n: usize, index: usize) -> Result<Self> {
        let mut v = vec![0.0; n];
        if index >= n {
            return Err(CoreError::InvalidBelief { sum: 0.0, n });
        }
        v[index] = 1.0;
        Self::new(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn max_entry(&self) -> f64 {
        self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl<'de> Deserialize<'de> for BeliefVector {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let probs = Vec::<f64>::deserialize(deserializer)?;
        BeliefVector::new(probs).map_err(serde::de::Error::custom)
    }
}

/// Lowest-index argmax. Ties always resolve to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Shannon entropy `-Σ p ln p` (natural log), with the convention
/// `0 ln 0 = 0` on the simplex boundary.
pub fn entropy(b: &BeliefVector) -> f64 {
    entropy_raw(b.probs())
}

pub(crate) fn entropy_raw(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// `ln Σ e^{x_i}` with max-shift for stability.
pub fn log_sum_exp(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(CoreError::EmptyInput("log_sum_exp"));
    }
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Ok(m);
    }
    Ok(m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln())
}

/// Softmax of a vector; the gradient of log-sum-exp, and the touch point
/// of the tangent defined by reward vector `xs`.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Total variation distance `½ Σ |p_i - q_i|`.
pub fn tv_distance(b1: &BeliefVector, b2: &BeliefVector) -> Result<f64> {
    if b1.len() != b2.len() {
        return Err(CoreError::LengthMismatch {
            expected: b1.len(),
            got: b2.len(),
        });
    }
    Ok(b1
        .probs()
        .iter()
        .zip(b2.probs())
        .map(|(p, q)| (p - q).abs())
        .sum::<f64>()
        / 2.0)
}

/// Uniform draw from the simplex: Dirichlet(1, …, 1) via normalized
/// exponentials.
pub fn sample_dirichlet_uniform(n: usize, rng: &mut ChaCha8Rng) -> BeliefVector {
    loop {
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                -u.ln()
            })
            .collect();
        if let Ok(b) = BeliefVector::normalized(draws) {
            return b;
        }
    }
}

/// Enumerate all grid beliefs with entries `c_i / k` (integer compositions
/// of `k` into `n` parts), calling `f` for each.
pub fn for_each_grid_belief(n: usize, k: usize, f: &mut impl FnMut(&[f64])) {
    let mut counts = vec![0usize; n];
    let mut buf = vec![0.0f64; n];
    fn recurse(
        counts: &mut [usize],
        buf: &mut [f64],
        pos: usize,
        remaining: usize,
        k: usize,
        f: &mut impl FnMut(&[f64]),
    ) {
        if pos == counts.len() - 1 {
            counts[pos] = remaining;
            for (b, &c) in buf.iter_mut().zip(counts.iter()) {
                *b = c as f64 / k as f64;
            }
            f(buf);
            return;
        }
        for c in 0..=remaining {
            counts[pos] = c;
            recurse(counts, buf, pos + 1, remaining - c, k, f);
        }
    }
    recurse(&mut counts, &mut buf, 0, k, k, f);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_of_uniform_pair_is_ln2() {
        let b = BeliefVector::new(vec![0.5, 0.5]).unwrap();
        assert!(close(entropy(&b), std::f64::consts::LN_2, 1e-12));
    }

    #[test]
    fn entropy_of_vertex_is_zero() {
        let b = BeliefVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(entropy(&b), 0.0);
    }

    #[test]
    fn entropy_hand_value() {
        // -0.8182 ln 0.8182 - 0.1818 ln 0.1818, summed by hand calculator
        let b = BeliefVector::new(vec![0.8182, 0.1818]).unwrap();
        assert!(close(entropy(&b), 0.474111965084938, 1e-12));
    }

    #[test]
    fn lse_basic_and_shift_stability() {
        assert!(close(
            log_sum_exp(&[0.0, 0.0]).unwrap(),
            std::f64::consts::LN_2,
            1e-12
        ));
        assert!(close(
            log_sum_exp(&[1.0, 0.0]).unwrap(),
            1.313261687518223,
            1e-12
        ));
        // no overflow at large inputs
        assert!(close(
            log_sum_exp(&[1000.0, 1000.0]).unwrap(),
            1000.0 + std::f64::consts::LN_2,
            1e-9
        ));
    }

    #[test]
    fn lse_rejects_empty() {
        assert!(log_sum_exp(&[]).is_err());
    }

    #[test]
    fn belief_validation() {
        assert!(BeliefVector::new(vec![0.5, 0.6]).is_err());
        assert!(BeliefVector::new(vec![1.0]).is_err());
        assert!(BeliefVector::new(vec![-0.1, 1.1]).is_err());
        assert!(BeliefVector::new(vec![0.3, 0.7]).is_ok());
    }

    #[test]
    fn normalized_is_explicit() {
        let b = BeliefVector::normalized(vec![2.0, 2.0]).unwrap();
        assert_eq!(b.probs(), &[0.5, 0.5]);
        assert!(BeliefVector::normalized(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn tv_examples() {
        let a = BeliefVector::new(vec![0.8, 0.2]).unwrap();
        let b = BeliefVector::new(vec![0.6, 0.4]).unwrap();
        assert!(close(tv_distance(&a, &b).unwrap(), 0.2, 1e-12));
        let v0 = BeliefVector::vertex(2, 0).unwrap();
        let v1 = BeliefVector::vertex(2, 1).unwrap();
        assert!(close(tv_distance(&v0, &v1).unwrap(), 1.0, 1e-12));
        assert!(close(tv_distance(&a, &a).unwrap(), 0.0, 1e-12));
    }

    #[test]
    fn tv_length_mismatch() {
        let a = BeliefVector::uniform(2).unwrap();
        let b = BeliefVector::uniform(3).unwrap();
        assert!(tv_distance(&a, &b).is_err());
    }

    #[test]
    fn grid_enumerates_compositions() {
        let mut count = 0usize;
        for_each_grid_belief(3, 4, &mut |b| {
            assert!(close(b.iter().sum::<f64>(), 1.0, 1e-12));
            count += 1;
        });
        // compositions of 4 into 3 parts: C(6,2) = 15
        assert_eq!(count, 15);
    }

    #[test]
    fn dirichlet_draws_are_valid_and_deterministic() {
        let mut r1 = rng::stream(3, "dir");
        let mut r2 = rng::stream(3, "dir");
        for _ in 0..100 {
            let a = sample_dirichlet_uniform(5, &mut r1);
            let b = sample_dirichlet_uniform(5, &mut r2);
            assert_eq!(a.probs(), b.probs());
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.9, 0.9]), 1);
    }
}
