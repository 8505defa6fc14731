use std::rc::Rc;

use super::model::ModelBundle;
use crate::diffcore::nn::{cross_entropy, mean_log, PROB_EPS};
use crate::diffcore::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::weaksup::LabelMatrix;

fn clamped_ln(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS).ln()
}

/// `mean ln D(x) + mean ln(1 - D(G(z)))` on plain probability slices.
pub fn gan_value(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(Error::invalid("gan_value needs non-empty batches"));
    }
    let r = d_real.iter().map(|&p| clamped_ln(p)).sum::<f64>() / d_real.len() as f64;
    let f = d_fake.iter().map(|&p| clamped_ln(1.0 - p)).sum::<f64>() / d_fake.len() as f64;
    Ok(r + f)
}

/// Graph form of [`gan_value`].
pub fn gan_value_graph(g: &mut Graph, d_real: Var, d_fake: Var) -> Var {
    let r = mean_log(g, d_real);
    let neg = g.scale(d_fake, -1.0);
    let one_minus = g.add_scalar(neg, 1.0);
    let f = mean_log(g, one_minus);
    g.add(r, f).expect("scalars")
}

/// Non-saturating generator loss `-mean ln D(G(z))`.
pub fn generator_loss(g: &mut Graph, d_fake: Var) -> Var {
    let m = mean_log(g, d_fake);
    g.scale(m, -1.0)
}

/// Mean cross-entropy of `q_out` against the sampled one-hot codes.
pub fn info_loss(g: &mut Graph, codes: Var, q_out: Var) -> Result<Var> {
    cross_entropy(g, q_out, codes)
}

/// Mean cross-entropy on plain matrices, for checking and reporting.
pub fn info_loss_value(codes: &Tensor, q_out: &Tensor) -> Result<f64> {
    if !codes.same_shape(q_out) {
        return Err(Error::ShapeMismatch {
            op: "info_loss",
            lhs: codes.shape().to_vec(),
            rhs: q_out.shape().to_vec(),
        });
    }
    let n = codes.rows().max(1);
    let s: f64 = codes
        .data()
        .iter()
        .zip(q_out.data())
        .map(|(&t, &p)| -t * clamped_ln(p))
        .sum();
    Ok(s / n as f64)
}

/// The pieces of the alignment term for one batch.
#[derive(Clone, Copy, Debug)]
pub struct AlignmentTerms {
    /// `β · (f1_ce + f2_ce + multiplier · penalty)`.
    pub total: Var,
    /// `CE(F1(q̂), detach(ŷ))`.
    pub f1_ce: Var,
    /// `CE(F2(ŷ), detach(q̂))`.
    pub f2_ce: Var,
    /// Mean over rows of `‖θ - 0.5‖²`, before the multiplier.
    pub penalty: Var,
    pub multiplier: f64,
    pub q_hat: Var,
    pub y_hat: Var,
    pub theta: Var,
}

/// Alignment term on a batch whose rows all carry at least one vote.
/// Returns `None` for an empty batch.
pub fn alignment_loss(
    g: &mut Graph,
    bundle: &ModelBundle,
    x: &Tensor,
    votes: &LabelMatrix,
    epoch: usize,
) -> Result<Option<AlignmentTerms>> {
    if votes.n() == 0 {
        return Ok(None);
    }
    if x.rows() != votes.n() {
        return Err(Error::ShapeMismatch {
            op: "alignment_loss",
            lhs: x.shape().to_vec(),
            rhs: vec![votes.n(), votes.m()],
        });
    }
    if let Some(i) = (0..votes.n()).find(|&i| !votes.is_covered(i)) {
        return Err(Error::invalid(format!(
            "alignment batch row {i} has no votes"
        )));
    }
    let cfg = &bundle.config;
    let classes = bundle.arch.classes;
    let xv = g.input(x.clone());
    let feats = bundle.features(g, xv)?;
    let q_hat = bundle.code_posterior(g, feats)?;
    let theta = bundle.lf_weights(g, feats)?;
    let scores = g.weighted_votes(theta, Rc::from(votes.votes()), classes)?;
    let y_hat = g.softmax(scores);

    let y_target = g.detach(y_hat);
    let f1_out = bundle.interface_f1(g, q_hat)?;
    let f1_ce = cross_entropy(g, f1_out, y_target)?;

    let q_target = g.detach(q_hat);
    let f2_out = bundle.interface_f2(g, y_hat)?;
    let f2_ce = cross_entropy(g, f2_out, q_target)?;

    let rows = g.value(theta).rows();
    let half = g.input(Tensor::full(rows, votes.m(), 0.5));
    let diff = g.sub(theta, half)?;
    let sq = g.mul(diff, diff)?;
    let per_row = g.sum_rows(sq);
    let penalty = g.mean(per_row);

    let multiplier = cfg.penalty_multiplier(classes, epoch);
    let weighted_penalty = g.scale(penalty, multiplier);
    let ce = g.add(f1_ce, f2_ce)?;
    let sum = g.add(ce, weighted_penalty)?;
    let total = g.scale(sum, cfg.align_weight);
    Ok(Some(AlignmentTerms {
        total,
        f1_ce,
        f2_ce,
        penalty,
        multiplier,
        q_hat,
        y_hat,
        theta,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gan_value_examples() {
        let v = gan_value(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!((v + 2.0 * 2f64.ln()).abs() < 1e-12);
        let v = gan_value(&[0.8], &[0.3]).unwrap();
        assert!((v - (0.8f64.ln() + 0.7f64.ln())).abs() < 1e-12);
        assert!((v + 0.5798).abs() < 1e-4);
        let v = gan_value(&[1.0], &[0.0]).unwrap();
        assert!(v < 0.0 && v > -1e-6);
    }

    #[test]
    fn gan_value_graph_agrees() {
        let mut g = Graph::new();
        let r = g.input(Tensor::matrix(2, 1, vec![0.8, 0.6]));
        let f = g.input(Tensor::matrix(2, 1, vec![0.3, 0.1]));
        let v = gan_value_graph(&mut g, r, f);
        let direct = gan_value(&[0.8, 0.6], &[0.3, 0.1]).unwrap();
        assert!((g.value(v).item() - direct).abs() < 1e-14);
    }

    #[test]
    fn info_loss_examples() {
        let codes = Tensor::from_rows(&[vec![0.0, 0.0, 1.0, 0.0]]);
        let q = Tensor::from_rows(&[vec![0.1, 0.2, 0.6, 0.1]]);
        assert!((info_loss_value(&codes, &q).unwrap() - 0.5108).abs() < 1e-4);
        let uniform = Tensor::full(3, 4, 0.25);
        let codes = Tensor::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]);
        assert!((info_loss_value(&codes, &uniform).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!(info_loss_value(&codes, &codes).unwrap() < 1e-6);

        let mut g = Graph::new();
        let c = g.input(codes.clone());
        let u = g.input(uniform);
        let l = info_loss(&mut g, c, u).unwrap();
        assert!((g.value(l).item() - 4f64.ln()).abs() < 1e-12);
    }
}
