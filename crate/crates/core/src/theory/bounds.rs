use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest LF error rate `min_lfs` accepts; the formula diverges at ½.
pub const MAX_LF_ERROR: f64 = 0.49;

/// Hoeffding bound `exp(-2 m α²)` on the majority-vote error.
pub fn mv_error_bound(m: usize, alpha: f64) -> f64 {
    (-2.0 * m as f64 * alpha * alpha).exp()
}

/// `P(#incorrect ≥ m/2)` for `m` independent voters that are each wrong
/// with probability `eps`. Ties count as errors.
pub fn mv_error_exact(m: usize, eps: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let first = m.div_ceil(2);
    let mut total = 0.0;
    for j in first..=m {
        total += binomial(m, j) * eps.powi(j as i32) * (1.0 - eps).powi((m - j) as i32);
    }
    total.min(1.0)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// `sqrt(p̂ (1 - p̂) / trials)`.
    pub std_error: f64,
    pub trials: usize,
}

/// Monte Carlo majority-vote error with ties counted as errors.
pub fn simulate_mv_error(m: usize, eps: f64, trials: usize, seed: u64) -> Result<McEstimate> {
    if trials < 1000 {
        return Err(Error::invalid("simulation needs at least 1000 trials"));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::invalid(format!("error rate {eps} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = 0usize;
    for _ in 0..trials {
        let wrong = (0..m).filter(|_| rng.random::<f64>() < eps).count();
        if 2 * wrong >= m {
            errors += 1;
        }
    }
    let p = errors as f64 / trials as f64;
    Ok(McEstimate {
        mean: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
    })
}

/// Smallest `m` with `ln(1/ε)/(2(½-ε)²) ≤ m`.
pub fn min_lfs(eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::invalid(format!(
            "LF error rate {eps} must lie in (0, 1/2)"
        )));
    }
    if eps >= MAX_LF_ERROR {
        return Err(Error::invalid(format!(
            "LF error rate {eps} too close to 1/2: the required LF count diverges"
        )));
    }
    let margin = 0.5 - eps;
    Ok(((1.0 / eps).ln() / (2.0 * margin * margin)).ceil() as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub rademacher: f64,
    pub n1: usize,
    pub n2: usize,
    pub delta: f64,
    pub c_g: f64,
    /// Mixture components.
    pub k: usize,
    pub d: usize,
    pub m: usize,
    /// LF accuracy margin over chance (not the info-loss weight).
    pub alpha_margin: f64,
    pub loss_bound: f64,
}

impl TheoryInputs {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rademacher >= 0.0
            && self.n1 > 0
            && self.n2 > 0
            && self.delta > 0.0
            && self.delta < 1.0
            && self.c_g > 0.0
            && self.alpha_margin > 0.0
            && self.alpha_margin <= 0.5
            && self.loss_bound > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "theory inputs out of range: {self:?}"
            )))
        }
    }
}

/// `2𝕽 + sqrt(ln(1/δ)/(2 n₂)) + B (4 c_G k d² / n₁)^{1/4} + B √2 exp(-m α²)`.
pub fn generalization_bound(t: &TheoryInputs) -> Result<f64> {
    t.validate()?;
    let estimation = ((1.0 / t.delta).ln() / (2.0 * t.n2 as f64)).sqrt();
    let density =
        t.loss_bound * (4.0 * t.c_g * t.k as f64 * (t.d * t.d) as f64 / t.n1 as f64).powf(0.25);
    let labels =
        t.loss_bound * 2f64.sqrt() * (-(t.m as f64) * t.alpha_margin * t.alpha_margin).exp();
    Ok(2.0 * t.rademacher + estimation + density + labels)
}
