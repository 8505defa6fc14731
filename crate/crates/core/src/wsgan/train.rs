use log::{debug, info};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainingConfig;
use super::inference::{code_assignments, predict_pseudolabels};
use super::losses::{alignment_loss, generator_loss, info_loss};
use super::model::{one_hot, sample_noise, Architecture, ModelBundle};
use crate::data::Dataset;
use crate::diffcore::nn::binary_cross_entropy;
use crate::diffcore::{adam_step, Graph, Tensor};
use crate::error::{Error, Result};
use crate::metrics::{adjusted_rand_index, pseudolabel_accuracy};
use crate::weaksup::LabelMatrix;

/// Means over the batches of one epoch, plus end-of-epoch evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub info_loss: f64,
    pub align_loss: f64,
    pub penalty: f64,
    /// ARI between `argmax Q(x)` and the hidden labels.
    pub ari: f64,
    /// Covered-set accuracy of the weighted label model; empty when no
    /// row is covered.
    pub pl_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

/// Per-batch losses, kept for exact trace comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub d_loss: f64,
    pub g_loss: f64,
    pub info_loss: f64,
    pub align_loss: f64,
    pub penalty: f64,
}

/// Fresh bundle sized for `dataset` and `l`, seeded from `config.seed`.
pub fn initialize(
    dataset: &Dataset,
    l: &LabelMatrix,
    config: &TrainingConfig,
) -> Result<ModelBundle> {
    config.validate()?;
    check_inputs(dataset, l, config)?;
    let arch = Architecture {
        feature_dim: dataset.dim(),
        classes: dataset.classes,
        lfs: l.m(),
        z_dim: config.z_dim,
        hidden: config.hidden,
    };
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(config.seed);
    Ok(ModelBundle::new(arch, config.clone(), &mut rng))
}

fn check_inputs(dataset: &Dataset, l: &LabelMatrix, config: &TrainingConfig) -> Result<()> {
    if dataset.n() == 0 {
        return Err(Error::invalid("empty dataset"));
    }
    if !dataset.features.is_finite() {
        return Err(Error::NonFinite("dataset features".into()));
    }
    if l.n() != dataset.n() || l.classes() != dataset.classes {
        return Err(Error::invalid(format!(
            "label matrix is {}×{} over {} classes, dataset has {} rows over {} classes",
            l.n(),
            l.m(),
            l.classes(),
            dataset.n(),
            dataset.classes
        )));
    }
    if config.mode.aligns() && !(0..l.n()).any(|i| l.is_covered(i)) {
        return Err(Error::invalid("label matrix covers no sample"));
    }
    Ok(())
}

/// Initializes and trains for `config.epochs` epochs.
pub fn train(
    dataset: &Dataset,
    l: &LabelMatrix,
    config: &TrainingConfig,
) -> Result<(ModelBundle, TrainingHistory)> {
    let mut bundle = initialize(dataset, l, config)?;
    let mut history = TrainingHistory::default();
    fit(&mut bundle, dataset, l, config.epochs, &mut history, None)?;
    Ok((bundle, history))
}

/// Continues training `bundle` for `epochs` more epochs from its saved RNG
/// position. When `trace` is given, every batch's losses are appended.
pub fn fit(
    bundle: &mut ModelBundle,
    dataset: &Dataset,
    l: &LabelMatrix,
    epochs: usize,
    history: &mut TrainingHistory,
    mut trace: Option<&mut Vec<StepLosses>>,
) -> Result<()> {
    check_inputs(dataset, l, &bundle.config)?;
    if dataset.dim() != bundle.arch.feature_dim || l.m() != bundle.arch.lfs {
        return Err(Error::invalid(
            "dataset or label matrix does not match the bundle",
        ));
    }
    let mut rng = bundle.rng.restore();
    let n = dataset.n();
    let bs = bundle.config.batch_size;
    for _ in 0..epochs {
        let epoch = bundle.epochs_done;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut sums = [0.0; 5];
        let mut batches = 0usize;
        for chunk in order.chunks(bs) {
            let s = train_batch(bundle, dataset, l, chunk, epoch, &mut rng)?;
            sums[0] += s.d_loss;
            sums[1] += s.g_loss;
            sums[2] += s.info_loss;
            sums[3] += s.align_loss;
            sums[4] += s.penalty;
            batches += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(s);
            }
        }
        bundle.epochs_done += 1;
        bundle.rng = super::model::RngState::capture(bundle.config.seed, &rng);
        let b = batches as f64;
        let q_clusters = code_assignments(bundle, &dataset.features)?;
        let ari = adjusted_rand_index(&q_clusters, &dataset.labels)?;
        let pl = predict_pseudolabels(bundle, &dataset.features, l)?;
        let pl_accuracy = pseudolabel_accuracy(&pl.table, &dataset.labels)?;
        let rec = EpochRecord {
            epoch,
            d_loss: sums[0] / b,
            g_loss: sums[1] / b,
            info_loss: sums[2] / b,
            align_loss: sums[3] / b,
            penalty: sums[4] / b,
            ari,
            pl_accuracy,
        };
        debug!("{rec:?}");
        history.records.push(rec);
    }
    if epochs > 0 {
        info!(
            "{} trained to epoch {}: {:?}",
            bundle.config.mode.as_str(),
            bundle.epochs_done,
            history.last()
        );
    }
    Ok(())
}

fn finite(value: f64, term: &'static str, epoch: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteLoss { term, epoch })
    }
}

/// One optimizer round on a batch: discriminator, generator, code
/// recovery, then alignment. Random draws per batch, in order: `z`, the
/// codes `b`, then one uniform per real and per fake row for label flips.
fn train_batch(
    bundle: &mut ModelBundle,
    dataset: &Dataset,
    l: &LabelMatrix,
    rows: &[usize],
    epoch: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<StepLosses> {
    let cfg = bundle.config.clone();
    let c = bundle.arch.classes;
    let bsz = rows.len();
    let real = dataset.features.select_rows(rows);
    let z = sample_noise(rng, bsz, bundle.arch.z_dim);
    let codes: Vec<usize> = (0..bsz).map(|_| rng.random_range(0..c)).collect();
    let b = one_hot(&codes, c);
    let (hi, lo) = (1.0 - cfg.label_smoothing, cfg.label_smoothing);
    let mut flip = |target: f64| {
        if rng.random::<f64>() < cfg.label_flip {
            1.0 - target
        } else {
            target
        }
    };
    let real_t: Vec<f64> = (0..bsz).map(|_| flip(hi)).collect();
    let fake_t: Vec<f64> = (0..bsz).map(|_| flip(lo)).collect();

    // discriminator
    let d_loss = {
        let mut g = Graph::new();
        let zv = g.input(z.clone());
        let bv = g.input(b.clone());
        let fake = bundle.generate(&mut g, zv, bv)?;
        let fake = g.detach(fake);
        let xr = g.input(real.clone());
        let fr = bundle.features(&mut g, xr)?;
        let dr = bundle.discriminate(&mut g, fr)?;
        let ff = bundle.features(&mut g, fake)?;
        let df = bundle.discriminate(&mut g, ff)?;
        let tr = g.input(Tensor::matrix(bsz, 1, real_t));
        let tf = g.input(Tensor::matrix(bsz, 1, fake_t));
        let lr = binary_cross_entropy(&mut g, dr, tr)?;
        let lf = binary_cross_entropy(&mut g, df, tf)?;
        let loss = g.add(lr, lf)?;
        let v = finite(g.value(loss).item(), "discriminator", epoch)?;
        let grads = g.backward(loss)?;
        adam_step(&mut bundle.store, &grads, &mut bundle.opt_d, cfg.lr_d)?;
        v
    };

    // generator
    let g_loss = {
        let mut g = Graph::new();
        let zv = g.input(z.clone());
        let bv = g.input(b.clone());
        let fake = bundle.generate(&mut g, zv, bv)?;
        let ff = bundle.features(&mut g, fake)?;
        let df = bundle.discriminate(&mut g, ff)?;
        let loss = generator_loss(&mut g, df);
        let v = finite(g.value(loss).item(), "generator", epoch)?;
        let grads = g.backward(loss)?;
        adam_step(&mut bundle.store, &grads, &mut bundle.opt_g, cfg.lr_g)?;
        v
    };

    // code recovery
    let info = {
        let mut g = Graph::new();
        let zv = g.input(z);
        let bv = g.input(b);
        let fake = bundle.generate(&mut g, zv, bv)?;
        let ff = bundle.features(&mut g, fake)?;
        let q = bundle.code_posterior(&mut g, ff)?;
        let ce = info_loss(&mut g, bv, q)?;
        let v = finite(g.value(ce).item(), "info", epoch)?;
        let loss = g.scale(ce, cfg.info_weight);
        let grads = g.backward(loss)?;
        adam_step(&mut bundle.store, &grads, &mut bundle.opt_info, cfg.lr_info)?;
        v
    };

    // alignment on the covered part of the real batch
    let (mut align, mut penalty) = (0.0, 0.0);
    if cfg.mode.aligns() {
        let covered: Vec<usize> = rows.iter().copied().filter(|&i| l.is_covered(i)).collect();
        let x = dataset.features.select_rows(&covered);
        let votes = l.select_rows(&covered);
        let mut g = Graph::new();
        if let Some(t) = alignment_loss(&mut g, bundle, &x, &votes, epoch)? {
            align = finite(
                g.value(t.f1_ce).item() + g.value(t.f2_ce).item(),
                "alignment",
                epoch,
            )?;
            penalty = finite(t.multiplier * g.value(t.penalty).item(), "penalty", epoch)?;
            finite(g.value(t.total).item(), "alignment", epoch)?;
            let grads = g.backward(t.total)?;
            adam_step(&mut bundle.store, &grads, &mut bundle.opt_ws, cfg.lr_ws)?;
        }
    }

    Ok(StepLosses {
        d_loss,
        g_loss,
        info_loss: info,
        align_loss: align,
        penalty,
    })
}
