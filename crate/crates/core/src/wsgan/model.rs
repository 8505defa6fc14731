use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Mode, TrainingConfig};
use crate::diffcore::nn::{Activation, Linear, Mlp};
use crate::diffcore::{AdamState, Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::Result;

/// Scale applied to the accuracy head's initial weights so that its
/// sigmoid outputs start within a hair of 0.5.
pub const ACCURACY_HEAD_INIT_SCALE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub feature_dim: usize,
    pub classes: usize,
    pub lfs: usize,
    pub z_dim: usize,
    pub hidden: usize,
}

/// Position of a ChaCha stream, enough to resume it exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(seed: u64, rng: &ChaCha8Rng) -> Self {
        Self {
            seed,
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// All WSGAN networks, their optimizers, and the training RNG position.
///
/// G maps `z ⊕ b` to feature space. A shared trunk encodes samples for
/// the discriminator head D, the code head Q and the accuracy head A.
/// F1 and F2 are `C → C` softmax maps between code and label posteriors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub arch: Architecture,
    pub config: TrainingConfig,
    pub store: ParamStore,
    pub generator: Mlp,
    pub trunk: Mlp,
    pub d_head: Linear,
    pub q_head: Linear,
    pub a_head: Linear,
    /// Pre-sigmoid LF weights for vector mode.
    pub a_vector: ParamId,
    pub f1: Linear,
    pub f2: Linear,
    pub opt_d: AdamState,
    pub opt_g: AdamState,
    pub opt_info: AdamState,
    pub opt_ws: AdamState,
    pub rng: RngState,
    pub epochs_done: usize,
}

impl ModelBundle {
    /// Initializes every component regardless of mode, always in the same
    /// order (G, trunk, D, Q, A, F1, F2), so two modes sharing a seed start
    /// from identical shared weights and RNG position.
    pub fn new(arch: Architecture, config: TrainingConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut store = ParamStore::new();
        let h = arch.hidden;
        let generator = Mlp::new(
            &mut store,
            "G",
            &[arch.z_dim + arch.classes, h, h, arch.feature_dim],
            Activation::Tanh,
            Activation::Identity,
            rng,
        );
        let trunk = Mlp::new(
            &mut store,
            "trunk",
            &[arch.feature_dim, h, h],
            Activation::Tanh,
            Activation::Tanh,
            rng,
        );
        let d_head = Linear::new(&mut store, "D", h, 1, rng);
        let q_head = Linear::new(&mut store, "Q", h, arch.classes, rng);
        let a_head = Linear::new(&mut store, "A", h, arch.lfs, rng);
        for w in store.get_mut(a_head.weight).data_mut() {
            *w *= ACCURACY_HEAD_INIT_SCALE;
        }
        let a_vector = store.add("A.vector", Tensor::zeros(1, arch.lfs));
        let f1 = Linear::new(&mut store, "F1", arch.classes, arch.classes, rng);
        let f2 = Linear::new(&mut store, "F2", arch.classes, arch.classes, rng);

        let d_group: Vec<ParamId> = trunk.params().into_iter().chain(d_head.params()).collect();
        let g_group = generator.params();
        let info_group: Vec<ParamId> = generator
            .params()
            .into_iter()
            .chain(trunk.params())
            .chain(q_head.params())
            .collect();
        let ws_group: Vec<ParamId> = trunk
            .params()
            .into_iter()
            .chain(q_head.params())
            .chain(a_head.params())
            .chain([a_vector])
            .chain(f1.params())
            .chain(f2.params())
            .collect();

        Self {
            opt_d: AdamState::new(&store, d_group),
            opt_g: AdamState::new(&store, g_group),
            opt_info: AdamState::new(&store, info_group),
            opt_ws: AdamState::new(&store, ws_group),
            rng: RngState::capture(config.seed, rng),
            arch,
            config,
            store,
            generator,
            trunk,
            d_head,
            q_head,
            a_head,
            a_vector,
            f1,
            f2,
            epochs_done: 0,
        }
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    /// `G(z, b)` for noise `z` (`n × z_dim`) and one-hot codes `b` (`n × C`).
    pub fn generate(&self, g: &mut Graph, z: Var, codes: Var) -> Result<Var> {
        let input = g.concat(z, codes)?;
        self.generator.forward(g, &self.store, input)
    }

    /// Shared trunk features.
    pub fn features(&self, g: &mut Graph, x: Var) -> Result<Var> {
        self.trunk.forward(g, &self.store, x)
    }

    /// Discriminator probability that each row is real (`n × 1`).
    pub fn discriminate(&self, g: &mut Graph, feats: Var) -> Result<Var> {
        let logit = self.d_head.forward(g, &self.store, feats)?;
        Ok(g.sigmoid(logit))
    }

    /// Q's posterior over the discrete code (`n × C`).
    pub fn code_posterior(&self, g: &mut Graph, feats: Var) -> Result<Var> {
        let logit = self.q_head.forward(g, &self.store, feats)?;
        Ok(g.softmax(logit))
    }

    /// LF weights θ in `(0, 1)`: per sample from detached features in
    /// encoder mode (`n × m`), a shared row in vector mode (`1 × m`), and a
    /// constant 0.5 row otherwise.
    pub fn lf_weights(&self, g: &mut Graph, feats: Var) -> Result<Var> {
        match self.mode() {
            Mode::Encoder => {
                let z = g.detach(feats);
                let logit = self.a_head.forward(g, &self.store, z)?;
                Ok(g.sigmoid(logit))
            }
            Mode::Vector => {
                let raw = g.param(&self.store, self.a_vector);
                Ok(g.sigmoid(raw))
            }
            Mode::InfoGan => Ok(g.input(Tensor::full(1, self.arch.lfs, 0.5))),
        }
    }

    pub fn interface_f1(&self, g: &mut Graph, q: Var) -> Result<Var> {
        let h = self.f1.forward(g, &self.store, q)?;
        Ok(g.softmax(h))
    }

    pub fn interface_f2(&self, g: &mut Graph, y: Var) -> Result<Var> {
        let h = self.f2.forward(g, &self.store, y)?;
        Ok(g.softmax(h))
    }

    /// Parameters that belong to the shared trunk.
    pub fn trunk_params(&self) -> Vec<ParamId> {
        self.trunk.params()
    }
}

/// Draws `n × dim` standard normals, row-major.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize) -> Tensor {
    use rand_distr::{Distribution, StandardNormal};
    let data = (0..n * dim).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::matrix(n, dim, data)
}

pub fn one_hot(labels: &[usize], classes: usize) -> Tensor {
    let mut t = Tensor::zeros(labels.len(), classes);
    for (i, &k) in labels.iter().enumerate() {
        t.set(i, k, 1.0);
    }
    t
}
