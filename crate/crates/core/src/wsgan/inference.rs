use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{one_hot, sample_noise, ModelBundle};
use crate::diffcore::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::weaksup::{weighted_softmax_posterior, LabelMatrix, PosteriorTable};

/// Where a pseudolabel came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlSource {
    /// Label model over the sample's LF votes, weighted by A.
    Lf,
    /// `F1(Q(x))` for samples without any vote.
    Synthetic,
}

impl PlSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PlSource::Lf => "lf",
            PlSource::Synthetic => "synthetic",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Pseudolabels {
    /// Rows marked covered are exactly the LF-sourced ones.
    pub table: PosteriorTable,
    pub sources: Vec<PlSource>,
}

/// Forward quantities for a batch of inputs, without gradients.
#[derive(Clone, Debug)]
pub struct Heads {
    /// `Q(x)`, `n × C`.
    pub q: Tensor,
    /// `F1(Q(x))`, `n × C`.
    pub f1: Tensor,
    /// LF weights, `n × m` (vector and plain modes repeat one row).
    pub theta: Tensor,
}

pub fn heads(bundle: &ModelBundle, x: &Tensor) -> Result<Heads> {
    if x.cols() != bundle.arch.feature_dim {
        return Err(Error::ShapeMismatch {
            op: "heads",
            lhs: x.shape().to_vec(),
            rhs: vec![bundle.arch.feature_dim],
        });
    }
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let feats = bundle.features(&mut g, xv)?;
    let q = bundle.code_posterior(&mut g, feats)?;
    let f1 = bundle.interface_f1(&mut g, q)?;
    let theta = bundle.lf_weights(&mut g, feats)?;
    let theta = if g.value(theta).rows() == 1 && x.rows() != 1 {
        g.broadcast_rows(theta, x.rows())?
    } else {
        theta
    };
    Ok(Heads {
        q: g.value(q).clone(),
        f1: g.value(f1).clone(),
        theta: g.value(theta).clone(),
    })
}

/// Argmax of Q on every row: the generator-code cluster of each input.
pub fn code_assignments(bundle: &ModelBundle, x: &Tensor) -> Result<Vec<usize>> {
    Ok(heads(bundle, x)?.q.argmax_rows())
}

/// Routes covered rows through the weighted label model and the rest
/// through `F1(Q(x))`.
pub fn predict_pseudolabels(
    bundle: &ModelBundle,
    x: &Tensor,
    l: &LabelMatrix,
) -> Result<Pseudolabels> {
    if x.rows() != l.n() || l.m() != bundle.arch.lfs || l.classes() != bundle.arch.classes {
        return Err(Error::invalid(format!(
            "inputs {:?} and label matrix {}×{} (C={}) do not fit the model",
            x.shape(),
            l.n(),
            l.m(),
            l.classes()
        )));
    }
    let h = heads(bundle, x)?;
    let c = bundle.arch.classes;
    let mut probs = Vec::with_capacity(l.n() * c);
    let mut sources = Vec::with_capacity(l.n());
    let mut covered = Vec::with_capacity(l.n());
    for i in 0..l.n() {
        if l.is_covered(i) {
            probs.extend(weighted_softmax_posterior(
                l.row(i),
                h.theta.row_slice(i),
                c,
            )?);
            sources.push(PlSource::Lf);
            covered.push(true);
        } else {
            probs.extend_from_slice(h.f1.row_slice(i));
            sources.push(PlSource::Synthetic);
            covered.push(false);
        }
    }
    let table = PosteriorTable::new(Tensor::matrix(l.n(), c, probs), covered)?;
    Ok(Pseudolabels { table, sources })
}

/// Single-sample form of [`predict_pseudolabels`]; `None` votes count as
/// an all-abstain row.
pub fn predict_pseudolabel(
    bundle: &ModelBundle,
    x: &[f64],
    votes: Option<&[u8]>,
) -> Result<(Vec<f64>, PlSource)> {
    let m = bundle.arch.lfs;
    let row = match votes {
        Some(v) => v.to_vec(),
        None => vec![0; m],
    };
    let l = LabelMatrix::new(1, m, bundle.arch.classes, row)?;
    let p = predict_pseudolabels(bundle, &Tensor::row(x), &l)?;
    Ok((p.table.row(0).to_vec(), p.sources[0]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeSpec {
    Fixed(usize),
    Uniform,
}

/// `x̃ = G(z, b)` for `n` fresh draws. Noise comes first from the seeded
/// stream, then the codes.
pub fn generate_samples(
    bundle: &ModelBundle,
    n: usize,
    spec: CodeSpec,
    seed: u64,
) -> Result<(Tensor, Vec<usize>)> {
    let c = bundle.arch.classes;
    if let CodeSpec::Fixed(k) = spec {
        if k >= c {
            return Err(Error::invalid(format!("code {k} outside 0..{c}")));
        }
    }
    if n == 0 {
        return Ok((Tensor::zeros(0, bundle.arch.feature_dim), Vec::new()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = sample_noise(&mut rng, n, bundle.arch.z_dim);
    let codes: Vec<usize> = match spec {
        CodeSpec::Fixed(k) => vec![k; n],
        CodeSpec::Uniform => (0..n).map(|_| rng.random_range(0..c)).collect(),
    };
    let mut g = Graph::new();
    let zv = g.input(z);
    let bv = g.input(one_hot(&codes, c));
    let x = bundle.generate(&mut g, zv, bv)?;
    Ok((g.value(x).clone(), codes))
}
