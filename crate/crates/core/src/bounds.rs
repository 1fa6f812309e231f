//! Tangent lower bounds on negative belief entropy induced by prediction
//! rewards, and numerical verification of the worst-case gap.
//!
//! For a convex `ρ(b)` the affine function `⟨b, r⟩ − ρ*(r)` is a tangent
//! plane whenever `r` is a realizable gradient of `ρ`; for `ρ = −H` the
//! Fenchel conjugate `ρ*` is log-sum-exp, so tangent intercepts are
//! analytic. A family of reward vectors — one per prediction label —
//! therefore yields `ρ'(b) = max_j ⟨b, r_j⟩ − ρ*(r_j)`, a piecewise-linear
//! lower bound whose gap to `−H` is bounded in closed form.

use crate::simplex::{self, BeliefVector};
use crate::{CoreError, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A symmetric prediction reward: `r_correct` for predicting the target
/// value, `r_incorrect` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRewardSpec {
    pub r_correct: f64,
    pub r_incorrect: f64,
    pub n_y: usize,
}

impl PredictionRewardSpec {
    pub fn new(r_correct: f64, r_incorrect: f64, n_y: usize) -> Result<Self> {
        if n_y < 2 {
            return Err(CoreError::InvalidConfig(format!("n_y must be >= 2, got {n_y}")));
        }
        if !(r_correct.is_finite() && r_incorrect.is_finite()) || r_correct < r_incorrect {
            return Err(CoreError::InvalidConfig(format!(
                "need finite r_correct >= r_incorrect, got {r_correct} < {r_incorrect}"
            )));
        }
        Ok(Self { r_correct, r_incorrect, n_y })
    }

    /// Margin `m = r' − r''`.
    pub fn margin(&self) -> f64 {
        self.r_correct - self.r_incorrect
    }

    /// Whether the worst-case gap bound applies (`1 ≤ m ≤ n_y`).
    pub fn bound_applicable(&self) -> bool {
        let m = self.margin();
        (1.0..=self.n_y as f64).contains(&m)
    }

    /// `ln(e^{r'} + (n_y − 1) e^{r''})`, the shared tangent intercept of
    /// the symmetric family, computed with max-shift.
    pub fn conjugate_constant(&self) -> f64 {
        let m = self.r_correct.max(self.r_incorrect);
        m + ((self.r_correct - m).exp() + (self.n_y - 1) as f64 * (self.r_incorrect - m).exp()).ln()
    }
}

/// A family of reward vectors, one per prediction label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardVectorFamily {
    vectors: Vec<Vec<f64>>,
}

impl RewardVectorFamily {
    /// Labels are implicit vector indices (0-based); all vectors must share
    /// one dimension.
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(CoreError::EmptyInput("reward vector family"));
        };
        let n = first.len();
        if n < 2 {
            return Err(CoreError::InvalidConfig("reward vectors need length >= 2".into()));
        }
        for v in &vectors {
            if v.len() != n {
                return Err(CoreError::LengthMismatch { expected: n, got: v.len() });
            }
        }
        Ok(Self { vectors })
    }

    /// A single constant vector `(c, c, …, c)`: rewards every prediction
    /// equally, i.e. an abstain option. Its tangent touches `−H` at the
    /// uniform belief when `c = −ln n_y`.
    pub fn abstain(n_y: usize, c: f64) -> Result<Self> {
        Self::new(vec![vec![c; n_y]])
    }

    pub fn n_y(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Add a constant to every entry of every vector (shifts tangent values
    /// but not the maximizing label).
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            vectors: self
                .vectors
                .iter()
                .map(|v| v.iter().map(|x| x + c).collect())
                .collect(),
        }
    }
}

/// The symmetric 0-1-style family: vector `j` has `r'` at position `j` and
/// `r''` elsewhere.
pub fn reward_vectors_01(spec: &PredictionRewardSpec) -> RewardVectorFamily {
    let vectors = (0..spec.n_y)
        .map(|j| {
            let mut v = vec![spec.r_incorrect; spec.n_y];
            v[j] = spec.r_correct;
            v
        })
        .collect();
    RewardVectorFamily { vectors }
}

/// Value of the tangent defined by reward vector `r` at belief `b`:
/// `⟨b, r⟩ − lse(r)`.
pub fn tangent_value(b: &BeliefVector, r: &[f64]) -> Result<f64> {
    if b.len() != r.len() {
        return Err(CoreError::LengthMismatch { expected: b.len(), got: r.len() });
    }
    let dot: f64 = b.probs().iter().zip(r).map(|(p, x)| p * x).sum();
    Ok(dot - simplex::log_sum_exp(r)?)
}

/// Maximum tangent value over the family and the maximizing label
/// (lowest label on ties). This is the expected-prediction-reward lower
/// bound on `−H(b)`.
pub fn prediction_lower_bound(b: &BeliefVector, family: &RewardVectorFamily) -> Result<(f64, usize)> {
    if family.is_empty() {
        return Err(CoreError::EmptyInput("reward vector family"));
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_label = 0;
    for (j, r) in family.vectors.iter().enumerate() {
        let v = tangent_value(b, r)?;
        if v > best {
            best = v;
            best_label = j;
        }
    }
    Ok((best, best_label))
}

/// Closed form of the symmetric-family lower bound:
/// `(r' − r'') max_i b_i + r'' − ln(e^{r'} + (n_y − 1) e^{r''})`.
pub fn closed_form_01_bound(b: &BeliefVector, spec: &PredictionRewardSpec) -> Result<f64> {
    if b.len() != spec.n_y {
        return Err(CoreError::LengthMismatch { expected: spec.n_y, got: b.len() });
    }
    Ok(spec.margin() * b.max_entry() + spec.r_incorrect - spec.conjugate_constant())
}

/// Gap `−H(b) − ρ'(b)` for the symmetric family; non-negative, and at most
/// [`theorem_bound`] when the margin is in `[1, n_y]`.
pub fn approximation_error_01(b: &BeliefVector, spec: &PredictionRewardSpec) -> Result<f64> {
    Ok(-simplex::entropy(b) - closed_form_01_bound(b, spec)?)
}

/// Worst-case gap over the whole simplex:
/// `max{ε₁, ε₂} − r'' + ln(e^{r'} + (n_y − 1) e^{r''})` with
/// `ε₁ = ln(1/m) − 1` and `ε₂ = ln(1/n_y) − m/n_y`, valid for `1 ≤ m ≤ n_y`.
pub fn theorem_bound(spec: &PredictionRewardSpec) -> Result<f64> {
    if !spec.bound_applicable() {
        return Err(CoreError::BoundNotApplicable { m: spec.margin(), n_y: spec.n_y });
    }
    let m = spec.margin();
    let n_y = spec.n_y as f64;
    let eps1 = (1.0 / m).ln() - 1.0;
    let eps2 = (1.0 / n_y).ln() - m / n_y;
    Ok(eps1.max(eps2) - spec.r_incorrect + spec.conjugate_constant())
}

/// Maximum tangent value across several families (e.g. prediction families
/// plus an abstain vector). Adding a family can only raise the surface.
pub fn multi_tangent_bound(b: &BeliefVector, families: &[RewardVectorFamily]) -> Result<f64> {
    if families.is_empty() {
        return Err(CoreError::EmptyInput("family sequence"));
    }
    let mut best = f64::NEG_INFINITY;
    for fam in families {
        if fam.n_y() != b.len() {
            return Err(CoreError::LengthMismatch { expected: b.len(), got: fam.n_y() });
        }
        let (v, _) = prediction_lower_bound(b, fam)?;
        best = best.max(v);
    }
    Ok(best)
}

/// How [`verify_bound_sweep`] covers the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SimplexSampler {
    /// All integer compositions at resolution `step` (uses `k = round(1/step)`).
    Grid { step: f64 },
    /// `n` uniform Dirichlet draws from the given seed.
    Random { n: usize, seed: u64 },
}

/// Result of a bound-verification sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub n_y: usize,
    pub r_correct: f64,
    pub r_incorrect: f64,
    pub theorem_bound: f64,
    pub max_error: f64,
    pub argmax_belief: BeliefVector,
    pub holds: bool,
    pub samples_checked: usize,
}

/// Sweep the simplex and check `0 ≤ −H(b) − ρ'(b) ≤ theorem_bound` at every
/// sampled belief.
///
/// On top of the requested sampler, the sweep always evaluates the
/// candidate maximizers from the bound's derivation — the beliefs uniform
/// on a support of size `k` for `k = 1..n_y` (the `k = 1` vertex and the
/// uniform belief included) — so the reported maximum is the true maximum
/// whenever the bound is tight at one of those points.
pub fn verify_bound_sweep(spec: &PredictionRewardSpec, sampler: SimplexSampler) -> Result<BoundReport> {
    let bound = theorem_bound(spec)?;
    let n = spec.n_y;
    let margin = spec.margin();
    let constant = spec.r_incorrect - spec.conjugate_constant();

    let mut max_error = f64::NEG_INFINITY;
    let mut min_error = f64::INFINITY;
    let mut argmax: Vec<f64> = vec![];
    let mut samples = 0usize;

    // Error evaluated directly on raw probabilities to keep the sweep
    // allocation-free in the inner loop.
    let mut visit = |probs: &[f64]| {
        let max_p = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let err = -simplex::entropy_raw(probs) - (margin * max_p + constant);
        if err > max_error {
            max_error = err;
            argmax = probs.to_vec();
        }
        if err < min_error {
            min_error = err;
        }
        samples += 1;
    };

    // Candidate maximizers from the derivation: uniform over supports of
    // size k, for k = 1..n_y.
    let mut support = vec![0.0; n];
    for k in 1..=n {
        for (i, s) in support.iter_mut().enumerate() {
            *s = if i < k { 1.0 / k as f64 } else { 0.0 };
        }
        visit(&support);
    }

    match sampler {
        SimplexSampler::Grid { step } => {
            if !(step > 0.0 && step <= 0.5) {
                return Err(CoreError::InvalidConfig(format!("grid step {step} out of (0, 0.5]")));
            }
            let k = (1.0 / step).round() as usize;
            simplex::for_each_grid_belief(n, k, &mut visit);
        }
        SimplexSampler::Random { n: draws, seed } => {
            if draws == 0 {
                return Err(CoreError::InvalidConfig("random sampler needs n >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut buf = vec![0.0f64; n];
            for _ in 0..draws {
                sample_exp_normalized(&mut buf, &mut rng);
                visit(&buf);
            }
        }
    }

    let holds = min_error >= -SWEEP_TOLERANCE && max_error <= bound + SWEEP_TOLERANCE;
    Ok(BoundReport {
        n_y: n,
        r_correct: spec.r_correct,
        r_incorrect: spec.r_incorrect,
        theorem_bound: bound,
        max_error,
        argmax_belief: BeliefVector::new(argmax)?,
        holds,
        samples_checked: samples,
    })
}

const SWEEP_TOLERANCE: f64 = 1e-9;

fn sample_exp_normalized(buf: &mut [f64], rng: &mut ChaCha8Rng) {
    use rand::Rng;
    loop {
        let mut sum = 0.0;
        for x in buf.iter_mut() {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            *x = -u.ln();
            sum += *x;
        }
        if sum > 0.0 {
            for x in buf.iter_mut() {
                *x /= sum;
            }
            return;
        }
    }
}
