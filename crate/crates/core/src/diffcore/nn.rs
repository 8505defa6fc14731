use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, ParamId, ParamStore, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Probabilities are clamped into `[PROB_EPS, 1 - PROB_EPS]` before any log.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => g.relu(x),
            Activation::Tanh => g.tanh(x),
            Activation::Sigmoid => g.sigmoid(x),
            Activation::Softmax => g.softmax(x),
        }
    }
}

/// Affine layer `x W + b` with `W: in × out`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    /// Glorot-uniform weights, zero bias. Draws `inputs * outputs` uniforms
    /// from `rng` in row-major order.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let w = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        let weight = store.add(format!("{name}.weight"), Tensor::matrix(inputs, outputs, w));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(1, outputs));
        Self {
            weight,
            bias,
            inputs,
            outputs,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let h = g.matmul(x, w)?;
        g.add(h, b)
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}

/// Stack of linear layers; `hidden` applies between layers and `output`
/// after the last one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub hidden: Activation,
    pub output: Activation,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self {
            layers,
            hidden,
            output,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, mut x: Var) -> Result<Var> {
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(g, store, x)?;
            let act = if i == last { self.output } else { self.hidden };
            x = act.apply(g, x);
        }
        Ok(x)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }
}

fn clamped_log(g: &mut Graph, p: Var) -> Var {
    let c = g.clamp(p, PROB_EPS, 1.0 - PROB_EPS);
    g.log(c)
}

/// Mean over rows of `-Σ_k target_k · ln(probs_k)`.
pub fn cross_entropy(g: &mut Graph, probs: Var, target: Var) -> Result<Var> {
    let lp = clamped_log(g, probs);
    let picked = g.mul(lp, target)?;
    let per_row = g.sum_rows(picked);
    let m = g.mean(per_row);
    Ok(g.scale(m, -1.0))
}

/// Mean binary cross-entropy of probabilities against soft targets.
pub fn binary_cross_entropy(g: &mut Graph, probs: Var, target: Var) -> Result<Var> {
    let lp = clamped_log(g, probs);
    let one_minus_p = {
        let neg = g.scale(probs, -1.0);
        g.add_scalar(neg, 1.0)
    };
    let lq = clamped_log(g, one_minus_p);
    let one_minus_t = {
        let neg = g.scale(target, -1.0);
        g.add_scalar(neg, 1.0)
    };
    let a = g.mul(lp, target)?;
    let b = g.mul(lq, one_minus_t)?;
    let s = g.add(a, b)?;
    let m = g.mean(s);
    Ok(g.scale(m, -1.0))
}

/// Mean of `ln(p)` with the probability clamped.
pub fn mean_log(g: &mut Graph, probs: Var) -> Var {
    let lp = clamped_log(g, probs);
    g.mean(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(
            &mut store,
            "m",
            &[3, 5, 2],
            Activation::Tanh,
            Activation::Softmax,
            &mut rng,
        );
        assert_eq!(mlp.params().len(), 4);
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(7, 3));
        let y = mlp.forward(&mut g, &store, x).unwrap();
        let out = g.value(y);
        assert_eq!((out.rows(), out.cols()), (7, 2));
        for r in 0..7 {
            assert!((out.row_slice(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_cross_entropy_is_log_c() {
        let mut g = Graph::new();
        let p = g.input(Tensor::full(3, 4, 0.25));
        let t = g.input(Tensor::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ]));
        let ce = cross_entropy(&mut g, p, t).unwrap();
        assert!((g.value(ce).item() - 4f64.ln()).abs() < 1e-12);
    }
}
