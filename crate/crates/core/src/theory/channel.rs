use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bounds::{min_lfs, mv_error_bound, mv_error_exact};
use crate::error::{Error, Result};

pub const CHAIN_TOLERANCE: f64 = 1e-12;

/// Joint distribution over a finite support × {0, 1}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteJoint {
    /// `table[x] = [P(x, 0), P(x, 1)]`.
    table: Vec<[f64; 2]>,
}

impl FiniteJoint {
    pub fn new(table: Vec<[f64; 2]>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::invalid("joint needs a non-empty support"));
        }
        if table
            .iter()
            .flatten()
            .any(|&p| !(p >= 0.0) || !p.is_finite())
        {
            return Err(Error::invalid(
                "joint entries must be finite and non-negative",
            ));
        }
        let total: f64 = table.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("joint sums to {total}, not 1")));
        }
        Ok(Self { table })
    }

    /// Random joint with `support` points. About a third of the cells are
    /// zeroed so that nearly disjoint pairs also turn up.
    pub fn random<R: Rng + ?Sized>(support: usize, rng: &mut R) -> Self {
        let support = support.max(1);
        let mut cells: Vec<f64> = (0..2 * support)
            .map(|_| {
                if rng.random::<f64>() < 0.33 {
                    0.0
                } else {
                    -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()
                }
            })
            .collect();
        if cells.iter().all(|&c| c == 0.0) {
            cells[0] = 1.0;
        }
        let total: f64 = cells.iter().sum();
        let table = cells
            .chunks(2)
            .map(|c| [c[0] / total, c[1] / total])
            .collect();
        Self { table }
    }

    pub fn support(&self) -> usize {
        self.table.len()
    }

    pub fn table(&self) -> &[[f64; 2]] {
        &self.table
    }

    pub fn x_marginal(&self) -> Vec<f64> {
        self.table.iter().map(|r| r[0] + r[1]).collect()
    }

    fn cells(&self) -> impl Iterator<Item = f64> + '_ {
        self.table.iter().flatten().copied()
    }
}

/// Symmetric binary channel `[[1-ε, ε], [ε, 1-ε]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyChannel {
    eps: f64,
}

impl NoisyChannel {
    pub fn new(eps: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&eps) {
            return Err(Error::invalid(format!(
                "channel flip rate {eps} must lie in [0, 1/2)"
            )));
        }
        Ok(Self { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let e = self.eps;
        [[1.0 - e, e], [e, 1.0 - e]]
    }

    /// Explicit 2×2 inverse via the adjugate.
    pub fn inverse(&self) -> [[f64; 2]; 2] {
        let [[a, b], [c, d]] = self.matrix();
        let det = a * d - b * c;
        [[d / det, -b / det], [-c / det, a / det]]
    }
}

/// `(1 - 2ε)^{-1}`, the ∞-norm of the inverse channel.
pub fn channel_inf_norm_inverse(eps: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::invalid(format!(
            "channel with flip rate {eps} is singular or invalid"
        )));
    }
    Ok(1.0 / (1.0 - 2.0 * eps))
}

/// Max absolute row sum.
pub fn inf_norm(m: &[[f64; 2]; 2]) -> f64 {
    m.iter()
        .map(|r| r[0].abs() + r[1].abs())
        .fold(0.0, f64::max)
}

/// `P̃(x, ỹ) = Σ_y P(x, y) C[y][ỹ]`.
pub fn apply_channel(joint: &FiniteJoint, channel: &NoisyChannel) -> FiniteJoint {
    let c = channel.matrix();
    let table = joint
        .table
        .iter()
        .map(|p| {
            [
                p[0] * c[0][0] + p[1] * c[1][0],
                p[0] * c[0][1] + p[1] * c[1][1],
            ]
        })
        .collect();
    FiniteJoint { table }
}

fn same_support(a: &FiniteJoint, b: &FiniteJoint) -> Result<()> {
    if a.support() != b.support() {
        return Err(Error::invalid(format!(
            "supports differ: {} vs {}",
            a.support(),
            b.support()
        )));
    }
    Ok(())
}

/// Half the L1 distance.
pub fn tv_distance(a: &FiniteJoint, b: &FiniteJoint) -> Result<f64> {
    same_support(a, b)?;
    Ok(0.5
        * a.cells()
            .zip(b.cells())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>())
}

/// `Σ (√p - √q)²`, the squared form with range `[0, 2]`.
pub fn hellinger_squared(a: &FiniteJoint, b: &FiniteJoint) -> Result<f64> {
    same_support(a, b)?;
    Ok(a.cells()
        .zip(b.cells())
        .map(|(p, q)| (p.sqrt() - q.sqrt()).powi(2))
        .sum())
}

/// `sqrt(Σ (√p - √q)²)`, range `[0, √2]`.
pub fn hellinger(a: &FiniteJoint, b: &FiniteJoint) -> Result<f64> {
    Ok(hellinger_squared(a, b)?.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MvComparison {
    pub m: usize,
    pub lf_error: f64,
    /// `(1 - 2 exp(-2 m (½ - ε_λ)²))^{-1}`.
    pub mv_multiplier: f64,
    /// `(1 - 2 ε_λ)^{-1}`.
    pub single_multiplier: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainEntry {
    /// Flip rate actually applied: `ε`, or the exact MV error.
    pub channel_eps: f64,
    pub tv_clean: f64,
    pub tv_noisy: f64,
    pub multiplier: f64,
    /// `tv_noisy ≤ tv_clean`.
    pub lower_holds: bool,
    /// `tv_clean ≤ multiplier · tv_noisy`.
    pub upper_holds: bool,
    /// `‖(P̃ - Q̃) C⁻¹‖₁ ≤ ‖P̃ - Q̃‖₁ ‖C⁻¹‖∞`, with the left side equal to
    /// the clean L1 distance.
    pub inversion_holds: bool,
    pub mv: Option<MvComparison>,
    pub holds: bool,
    /// The two joints, kept only when the chain fails.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<(FiniteJoint, FiniteJoint)>,
}

/// Checks `d(P̃, Q̃) ≤ d(P, Q) ≤ ‖C⁻¹‖∞ d(P̃, Q̃)` for total variation. With
/// `with_mv = Some((m, ε_λ))` the channel's flip rate is the exact
/// majority-vote error of `m` LFs and the multiplier comparison against a
/// single LF is checked too when `m ≥ min_lfs(ε_λ)`.
pub fn verify_rcgan_tv_chain(
    p: &FiniteJoint,
    q: &FiniteJoint,
    eps: f64,
    with_mv: Option<(usize, f64)>,
) -> Result<ChainEntry> {
    same_support(p, q)?;
    let channel_eps = match with_mv {
        Some((m, lf_error)) => {
            if !(lf_error > 0.0 && lf_error < 0.5) {
                return Err(Error::invalid(format!(
                    "LF error {lf_error} must lie in (0, 1/2)"
                )));
            }
            mv_error_exact(m, lf_error)
        }
        None => eps,
    };
    let channel = NoisyChannel::new(channel_eps)?;
    let multiplier = channel_inf_norm_inverse(channel_eps)?;
    let (pn, qn) = (apply_channel(p, &channel), apply_channel(q, &channel));
    let tv_clean = tv_distance(p, q)?;
    let tv_noisy = tv_distance(&pn, &qn)?;
    let lower_holds = tv_noisy <= tv_clean + CHAIN_TOLERANCE;
    let upper_holds = tv_clean <= multiplier * tv_noisy + CHAIN_TOLERANCE;

    // undo the channel row by row and compare against the norm bound
    let inv = channel.inverse();
    let mut recovered_l1 = 0.0;
    let mut noisy_l1 = 0.0;
    for (a, b) in pn.table.iter().zip(&qn.table) {
        let d = [a[0] - b[0], a[1] - b[1]];
        noisy_l1 += d[0].abs() + d[1].abs();
        recovered_l1 += (d[0] * inv[0][0] + d[1] * inv[1][0]).abs()
            + (d[0] * inv[0][1] + d[1] * inv[1][1]).abs();
    }
    let inversion_holds = (recovered_l1 - 2.0 * tv_clean).abs() <= 1e-10
        && recovered_l1 <= noisy_l1 * inf_norm(&inv) + CHAIN_TOLERANCE;

    let mv = match with_mv {
        Some((m, lf_error))
            if lf_error < super::bounds::MAX_LF_ERROR && m >= min_lfs(lf_error)? =>
        {
            let bound = mv_error_bound(m, 0.5 - lf_error);
            let mv_multiplier = 1.0 / (1.0 - 2.0 * bound);
            let single_multiplier = 1.0 / (1.0 - 2.0 * lf_error);
            let chained = multiplier <= mv_multiplier + CHAIN_TOLERANCE;
            Some(MvComparison {
                m,
                lf_error,
                mv_multiplier,
                single_multiplier,
                holds: chained && mv_multiplier <= single_multiplier + CHAIN_TOLERANCE,
            })
        }
        _ => None,
    };
    let holds =
        lower_holds && upper_holds && inversion_holds && mv.as_ref().is_none_or(|c| c.holds);
    Ok(ChainEntry {
        channel_eps,
        tv_clean,
        tv_noisy,
        multiplier,
        lower_holds,
        upper_holds,
        inversion_holds,
        mv,
        holds,
        witness: (!holds).then(|| (p.clone(), q.clone())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn j(rows: &[[f64; 2]]) -> FiniteJoint {
        FiniteJoint::new(rows.to_vec()).unwrap()
    }

    #[test]
    fn channel_examples() {
        assert_eq!(channel_inf_norm_inverse(0.0).unwrap(), 1.0);
        assert!((channel_inf_norm_inverse(0.1).unwrap() - 1.25).abs() < 1e-15);
        let explicit = inf_norm(&NoisyChannel::new(0.1).unwrap().inverse());
        assert!((explicit - 1.25).abs() < 1e-12);
        assert!(channel_inf_norm_inverse(0.5).is_err());
        assert!(NoisyChannel::new(0.5).is_err());
        let mut prev = 0.0;
        for i in 0..50 {
            let v = channel_inf_norm_inverse(i as f64 / 100.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn apply_channel_examples() {
        let p = j(&[[0.6, 0.4], [0.0, 0.0]]);
        let ch = NoisyChannel::new(0.1).unwrap();
        let out = apply_channel(&p, &ch);
        assert!((out.table()[0][0] - 0.58).abs() < 1e-15);
        assert_eq!(apply_channel(&p, &NoisyChannel::new(0.0).unwrap()), p);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let r = FiniteJoint::random(9, &mut rng);
            let n = apply_channel(&r, &ch);
            assert_eq!(r.x_marginal().len(), n.x_marginal().len());
            for (a, b) in r.x_marginal().iter().zip(n.x_marginal()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn distance_examples() {
        let p = j(&[[0.5, 0.0], [0.0, 0.5]]);
        let q = j(&[[0.0, 0.5], [0.5, 0.0]]);
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(hellinger(&p, &p).unwrap(), 0.0);
        assert!((tv_distance(&p, &q).unwrap() - 1.0).abs() < 1e-15);
        assert!((hellinger_squared(&p, &q).unwrap() - 2.0).abs() < 1e-15);
        let short = j(&[[1.0, 0.0]]);
        assert!(tv_distance(&p, &short).is_err());
    }

    #[test]
    fn chain_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = FiniteJoint::random(8, &mut rng);
        let same = verify_rcgan_tv_chain(&p, &p, 0.2, None).unwrap();
        assert!(same.holds && same.tv_clean == 0.0);
        let q = FiniteJoint::random(8, &mut rng);
        let e = verify_rcgan_tv_chain(&p, &q, 0.2, None).unwrap();
        assert!(e.holds, "{e:?}");
        assert!(e.witness.is_none());

        let e = verify_rcgan_tv_chain(&p, &q, 0.0, Some((12, 0.25))).unwrap();
        let mv = e.mv.unwrap();
        assert_eq!(mv.single_multiplier, 2.0);
        assert!(mv.mv_multiplier <= 2.0);
        assert!(e.holds);
    }
}
