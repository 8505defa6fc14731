use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::diffcore::Tensor;
use crate::error::{Error, Result};

fn moments(sample: &Tensor) -> (DVector<f64>, DMatrix<f64>) {
    let (n, d) = (sample.rows(), sample.cols());
    let x = DMatrix::from_row_slice(n, d, sample.data());
    let mean = x.row_mean().transpose();
    let mut centered = x;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    (mean, cov)
}

/// Symmetric square root with eigenvalues clipped at zero. Returns the
/// root and whether any clipping happened.
fn psd_sqrt(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut clipped = false;
    let roots = eig.eigenvalues.map(|l| {
        if l < 0.0 {
            clipped |= l < -1e-12;
            0.0
        } else {
            l.sqrt()
        }
    });
    let q = &eig.eigenvectors;
    (q * DMatrix::from_diagonal(&roots) * q.transpose(), clipped)
}

/// Fréchet distance between Gaussian fits of two samples:
/// `‖μ₁−μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^{1/2})`.
///
/// The trace of `(Σ₁Σ₂)^{1/2}` is taken as the trace of the symmetric
/// root of `Σ₁^{1/2} Σ₂ Σ₁^{1/2}`, which has the same eigenvalues.
pub fn frechet_gaussian_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    let d = a.cols();
    if b.cols() != d {
        return Err(Error::invalid("samples live in different dimensions"));
    }
    if a.rows() < d + 1 || b.rows() < d + 1 {
        return Err(Error::invalid(format!(
            "each sample needs at least {} points",
            d + 1
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("Fréchet input sample".into()));
    }
    let (mu1, s1) = moments(a);
    let (mu2, s2) = moments(b);
    let (r1, c1) = psd_sqrt(&s1);
    let inner = &r1 * &s2 * &r1;
    let (root, c2) = psd_sqrt(&inner);
    if c1 || c2 {
        warn!("covariance not positive semi-definite; negative eigenvalues clipped");
    }
    let diff = mu1 - mu2;
    let value = diff.dot(&diff) + s1.trace() + s2.trace() - 2.0 * root.trace();
    Ok(value.max(0.0))
}

/// Closed form for two 1-D Gaussians: `(μ₁−μ₂)² + (σ₁−σ₂)²`.
pub fn frechet_gaussian_1d(mu1: f64, var1: f64, mu2: f64, var2: f64) -> f64 {
    (mu1 - mu2).powi(2) + var1 + var2 - 2.0 * (var1 * var2).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = Tensor::from_rows(&[
            vec![0.0, 1.0],
            vec![2.0, -1.0],
            vec![0.5, 0.3],
            vec![-1.0, 0.0],
        ]);
        assert!(frechet_gaussian_distance(&a, &a).unwrap().abs() < 1e-8);
    }

    #[test]
    fn one_dimensional_closed_form() {
        // exact sample moments: {-1, 1} has mean 0, unbiased variance 2
        let s = |scale: f64| Tensor::matrix(2, 1, vec![-scale, scale]);
        let a = s(1.0 / 2f64.sqrt()); // variance 1
        let b = s(2.0 / 2f64.sqrt()); // variance 4
        let v = frechet_gaussian_distance(&a, &b).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
        assert_eq!(frechet_gaussian_1d(0.0, 1.0, 0.0, 4.0), 1.0);
    }

    #[test]
    fn rank_deficient_is_finite() {
        let a = Tensor::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]);
        let b = Tensor::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]]);
        let v = frechet_gaussian_distance(&a, &b).unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }

    #[test]
    fn too_few_points() {
        let a = Tensor::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert!(frechet_gaussian_distance(&a, &a).is_err());
    }
}
