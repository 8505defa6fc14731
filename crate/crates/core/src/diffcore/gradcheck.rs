use super::graph::{Graph, ParamStore, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Denominator floor for relative errors; gradient entries smaller than
/// this are compared on an absolute scale of the floor.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub rel_errors: Vec<f64>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    fn from_pairs(analytic: Vec<f64>, numeric: Vec<f64>) -> Self {
        let rel_errors: Vec<f64> = analytic
            .iter()
            .zip(&numeric)
            .map(|(&a, &n)| relative_error(a, n))
            .collect();
        let max_rel_error = rel_errors.iter().cloned().fold(0.0, f64::max);
        Self {
            analytic,
            numeric,
            rel_errors,
            max_rel_error,
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
    (analytic - numeric).abs() / denom
}

fn scalar_value(g: &Graph, v: Var) -> Result<f64> {
    let t = g.value(v);
    if !t.is_scalar() {
        return Err(Error::NonScalarLoss(t.shape().to_vec()));
    }
    let x = t.item();
    if !x.is_finite() {
        return Err(Error::NonFinite("function value at perturbed point".into()));
    }
    Ok(x)
}

/// Compares reverse-mode gradients of `f` at `point` with central
/// differences of half-width `step`.
pub fn check_gradients<F>(f: F, point: &Tensor, step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut g = Graph::new();
    let x = g.leaf(point.clone());
    let y = f(&mut g, x)?;
    scalar_value(&g, y)?;
    let grads = g.backward(y)?;
    let analytic = match grads.get(x) {
        Some(t) => t.data().to_vec(),
        None => vec![0.0; point.numel()],
    };

    let eval = |p: Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let x = g.leaf(p);
        let y = f(&mut g, x)?;
        scalar_value(&g, y)
    };
    let mut numeric = Vec::with_capacity(point.numel());
    for i in 0..point.numel() {
        let mut plus = point.clone();
        plus.data_mut()[i] += step;
        let mut minus = point.clone();
        minus.data_mut()[i] -= step;
        numeric.push((eval(plus)? - eval(minus)?) / (2.0 * step));
    }
    Ok(GradCheckReport::from_pairs(analytic, numeric))
}

/// Same as [`check_gradients`], over every coordinate of every parameter
/// in `store`. Coordinates are listed in parameter order.
pub fn check_param_gradients<F>(store: &ParamStore, f: F, step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut g = Graph::new();
    let y = f(&mut g, store)?;
    scalar_value(&g, y)?;
    let grads = g.backward(y)?;

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let mut work = store.clone();
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let y = f(&mut g, s)?;
        scalar_value(&g, y)
    };
    for id in store.ids() {
        let n = store.get(id).numel();
        match grads.param(id) {
            Some(t) => analytic.extend_from_slice(t.data()),
            None => analytic.extend(std::iter::repeat_n(0.0, n)),
        }
        for i in 0..n {
            let orig = store.get(id).data()[i];
            work.get_mut(id).data_mut()[i] = orig + step;
            let fp = eval(&work)?;
            work.get_mut(id).data_mut()[i] = orig - step;
            let fm = eval(&work)?;
            work.get_mut(id).data_mut()[i] = orig;
            numeric.push((fp - fm) / (2.0 * step));
        }
    }
    Ok(GradCheckReport::from_pairs(analytic, numeric))
}
