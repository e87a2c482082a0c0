use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `ln(1 + e^z)`, evaluated as `max(z, 0) + ln(1 + e^{-|z|})`.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Symmetric square root `S` of a symmetric PSD matrix, `S S^T = A`.
///
/// Negative eigenvalues from round-off are clamped to zero.
pub fn matrix_sqrt_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::dim("matrix_sqrt_psd", "square", format!("{:?}", a.shape())));
    }
    let asym = (a - a.transpose()).amax();
    if asym > 1e-9 * (1.0 + a.amax()) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

#[derive(Clone, Debug)]
pub struct UtResult {
    /// Transformed mean.
    pub mean: DVector<f64>,
    /// Output covariance including the additive term.
    pub output_cov: DMatrix<f64>,
    /// Cross covariance between input and output.
    pub cross_cov: DMatrix<f64>,
}

/// Sigma-point scaling `lambda = (theta^2 - 1) n`.
pub fn ut_lambda(n: usize, theta: f64) -> f64 {
    (theta * theta - 1.0) * n as f64
}

/// Unscented transform of `N(mean, cov)` through `phi`, with `additive_cov`
/// added to the output covariance.
///
/// Sigma points are `mean` and `mean +/- sqrt(n + lambda)` times the columns
/// of the PSD square root of `cov`. Mean weights are `lambda/(n+lambda)` and
/// `1/(2(n+lambda))`; the central covariance weight adds `3 - theta^2`.
pub fn unscented_transform<F>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    additive_cov: &DMatrix<f64>,
    phi: F,
    theta: f64,
) -> Result<UtResult>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = mean.len();
    if n == 0 {
        return Err(Error::param("unscented_transform", "mean must be nonempty"));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::param("theta", "must lie in (0, 1]"));
    }
    if cov.shape() != (n, n) {
        return Err(Error::dim("ut cov", format!("{n}x{n}"), format!("{:?}", cov.shape())));
    }
    let lambda = ut_lambda(n, theta);
    let spread = (n as f64 + lambda).sqrt();
    let root = matrix_sqrt_psd(cov)? * spread;

    let mut sigma = Vec::with_capacity(2 * n + 1);
    sigma.push(mean.clone());
    for j in 0..n {
        sigma.push(mean + root.column(j));
    }
    for j in 0..n {
        sigma.push(mean - root.column(j));
    }
    let outputs: Vec<DVector<f64>> = sigma.iter().map(&phi).collect();
    let l = outputs[0].len();
    if additive_cov.shape() != (l, l) {
        return Err(Error::dim("ut additive cov", format!("{l}x{l}"), format!("{:?}", additive_cov.shape())));
    }

    let denom = n as f64 + lambda;
    let w_side = 0.5 / denom;
    let w_mean0 = lambda / denom;
    let w_cov0 = (lambda + denom * (3.0 - theta * theta)) / denom;

    let mut y = &outputs[0] * w_mean0;
    for out in &outputs[1..] {
        y.axpy(w_side, out, 1.0);
    }

    let mut b1 = additive_cov.clone();
    let mut b2 = DMatrix::zeros(n, l);
    for (i, (x, out)) in sigma.iter().zip(&outputs).enumerate() {
        let w = if i == 0 { w_cov0 } else { w_side };
        let dy = out - &y;
        let dx = x - mean;
        b1.ger(w, &dy, &dy, 1.0);
        b2.ger(w, &dx, &dy, 1.0);
    }
    Ok(UtResult {
        mean: y,
        output_cov: b1,
        cross_cov: b2,
    })
}
