use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::nn::{cross_entropy, Activation, Mlp};
use crate::diffcore::{adam_step, AdamState, Graph, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 30,
            batch_size: 32,
            lr: 3e-3,
            seed: 0,
        }
    }
}

fn one_hot(labels: &[usize], classes: usize) -> Tensor {
    let mut t = Tensor::zeros(labels.len(), classes);
    for (i, &y) in labels.iter().enumerate() {
        t.set(i, y, 1.0);
    }
    t
}

/// Trains a two-hidden-layer MLP with Adam for a fixed number of epochs
/// and returns argmax accuracy on the test set.
pub fn train_eval_classifier(
    train_x: &Tensor,
    train_y: &[usize],
    test_x: &Tensor,
    test_y: &[usize],
    classes: usize,
    config: &ClassifierConfig,
) -> Result<f64> {
    if train_x.rows() != train_y.len() || test_x.rows() != test_y.len() {
        return Err(Error::invalid("feature and label counts differ"));
    }
    if train_y.is_empty() || test_y.is_empty() {
        return Err(Error::invalid("empty train or test set"));
    }
    if train_x.cols() != test_x.cols() {
        return Err(Error::invalid("train and test features differ in width"));
    }
    if train_y.iter().chain(test_y).any(|&y| y >= classes) {
        return Err(Error::invalid("label outside class range"));
    }
    let mut present = vec![false; classes];
    train_y.iter().for_each(|&y| present[y] = true);
    if let Some(k) = present.iter().position(|p| !p) {
        warn!("class {k} missing from the training set");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut store = ParamStore::new();
    let net = Mlp::new(
        &mut store,
        "clf",
        &[train_x.cols(), config.hidden, config.hidden, classes],
        Activation::Tanh,
        Activation::Softmax,
        &mut rng,
    );
    let mut adam = AdamState::new(&store, net.params());
    let mut order: Vec<usize> = (0..train_y.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let labels: Vec<usize> = chunk.iter().map(|&i| train_y[i]).collect();
            let mut g = Graph::new();
            let x = g.input(train_x.select_rows(chunk));
            let t = g.input(one_hot(&labels, classes));
            let p = net.forward(&mut g, &store, x)?;
            let loss = cross_entropy(&mut g, p, t)?;
            let grads = g.backward(loss)?;
            adam_step(&mut store, &grads, &mut adam, config.lr)?;
        }
    }

    let mut g = Graph::new();
    let x = g.input(test_x.clone());
    let p = net.forward(&mut g, &store, x)?;
    let pred = g.value(p).argmax_rows();
    let hits = pred.iter().zip(test_y).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / test_y.len() as f64)
}
