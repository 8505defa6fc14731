use serde::{Deserialize, Serialize};

use super::graph::{Gradients, ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam moments for one parameter group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    params: Vec<ParamId>,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    /// Fresh state with the usual defaults (0.9, 0.999, 1e-8).
    pub fn new(store: &ParamStore, params: Vec<ParamId>) -> Self {
        Self::with_betas(store, params, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(
        store: &ParamStore,
        params: Vec<ParamId>,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> Self {
        let zeros = |id: &ParamId| {
            let t = store.get(*id);
            Tensor::zeros(t.rows(), t.cols())
        };
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            first: params.iter().map(zeros).collect(),
            second: params.iter().map(zeros).collect(),
            params,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    pub fn first_moment(&self, i: usize) -> &Tensor {
        &self.first[i]
    }

    pub fn second_moment(&self, i: usize) -> &Tensor {
        &self.second[i]
    }

    /// One bias-corrected Adam update over parallel slices of parameters
    /// and gradients, in the order of this state's group.
    pub fn update(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor], lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        if params.len() != self.params.len() || grads.len() != self.params.len() {
            return Err(Error::invalid("parameter group size mismatch"));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if !p.same_shape(g) || !p.same_shape(&self.first[i]) {
                return Err(Error::ShapeMismatch {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient for parameter {i}")));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *w -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Applies one Adam update to every parameter in `state`'s group. A
/// parameter without a gradient is treated as having a zero gradient.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let ids = state.params.clone();
    let zero: Vec<Tensor> = ids
        .iter()
        .map(|&id| {
            let t = store.get(id);
            Tensor::zeros(t.rows(), t.cols())
        })
        .collect();
    let g: Vec<&Tensor> = ids
        .iter()
        .zip(&zero)
        .map(|(&id, z)| grads.param(id).unwrap_or(z))
        .collect();
    let mut owned: Vec<Tensor> = ids.iter().map(|&id| store.get(id).clone()).collect();
    {
        let mut refs: Vec<&mut Tensor> = owned.iter_mut().collect();
        state.update(&mut refs, &g, lr)?;
    }
    for (id, t) in ids.into_iter().zip(owned) {
        *store.get_mut(id) = t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::scalar(value));
        (s, id)
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let (store, id) = single(1.5);
        let mut st = AdamState::new(&store, vec![id]);
        let mut p = store.get(id).clone();
        st.update(&mut [&mut p], &[&Tensor::scalar(2.0)], 0.1)
            .unwrap();
        let m_before = st.first_moment(0).item();
        let mut q = p.clone();
        st.update(&mut [&mut q], &[&Tensor::scalar(0.0)], 0.1)
            .unwrap();
        assert!((st.first_moment(0).item() - 0.9 * m_before).abs() < 1e-15);

        // from scratch, zero gradients never move anything
        let mut fresh = AdamState::new(&store, vec![id]);
        let mut r = store.get(id).clone();
        fresh
            .update(&mut [&mut r], &[&Tensor::scalar(0.0)], 0.1)
            .unwrap();
        assert_eq!(r.item(), 1.5);
        assert_eq!(fresh.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::row(&[0.0, 0.0, 0.0]));
        let mut st = AdamState::new(&store, vec![id]);
        let mut p = store.get(id).clone();
        st.update(&mut [&mut p], &[&Tensor::row(&[3.0, -0.2, 1e-3])], 0.01)
            .unwrap();
        for (&w, s) in p.data().iter().zip([-1.0, 1.0, -1.0]) {
            assert!((w - 0.01 * s).abs() < 1e-7, "{w}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (store, id) = single(0.0);
        let mut st = AdamState::new(&store, vec![id]);
        let mut p = store.get(id).clone();
        assert!(st
            .update(&mut [&mut p], &[&Tensor::row(&[1.0, 2.0])], 0.1)
            .is_err());
        assert!(st
            .update(&mut [&mut p], &[&Tensor::scalar(f64::NAN)], 0.1)
            .is_err());
        assert!(st
            .update(&mut [&mut p], &[&Tensor::scalar(1.0)], 0.0)
            .is_err());
    }
}
