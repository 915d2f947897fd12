//! Kernel PCA with a polynomial kernel.
//!
//! Fitting builds the Gram matrix of the training points, double-centres it,
//! and keeps the leading eigenvectors scaled by `1/sqrt(lambda)` so that each
//! projected coordinate has unit norm in feature space. New points are centred
//! against the stored kernel row means before projection.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Eigenvalues below this fraction of the largest one are discarded.
const RELATIVE_EIGEN_CUTOFF: f64 = 1e-10;

/// `k(x, y) = (gamma * <x, y> + coef0) ^ degree`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub degree: u32,
    pub gamma: f64,
    pub coef0: f64,
}

impl KernelParams {
    /// Cubic kernel with `gamma = 1/dim`, `coef0 = 1`.
    pub fn cubic(dim: usize) -> Self {
        Self {
            degree: 3,
            gamma: 1.0 / dim.max(1) as f64,
            coef0: 1.0,
        }
    }
}

pub fn kernel(x: &[f64], y: &[f64], params: &KernelParams) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Parameter(format!(
            "kernel arguments differ in dimension: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(kernel_unchecked(x, y, params))
}

fn kernel_unchecked(x: &[f64], y: &[f64], p: &KernelParams) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (p.gamma * dot + p.coef0).powi(p.degree as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpcaModel {
    pub kernel: KernelParams,
    pub dim: usize,
    /// Row-major `n_train x dim`.
    pub training_points: Vec<f64>,
    pub n_train: usize,
    /// Row-major `n_train x n_components`, eigenvectors divided by `sqrt(lambda)`.
    pub alphas: Vec<f64>,
    pub n_components: usize,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Every eigenvalue above the cutoff, descending; used for explained variance.
    pub spectrum: Vec<f64>,
    pub row_means: Vec<f64>,
    pub grand_mean: f64,
}

impl KpcaModel {
    /// Fit on `n x dim` row-major data. Returns fewer than `n_components`
    /// components when the centred kernel has lower numerical rank.
    pub fn fit(points: &[f64], dim: usize, n_components: usize, kernel: KernelParams) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} values do not form rows of width {dim}",
                points.len()
            )));
        }
        let n = points.len() / dim;
        if n_components == 0 || n_components > n {
            return Err(Error::Parameter(format!(
                "n_components must be in 1..={n}, got {n_components}"
            )));
        }
        if let Some(i) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite training value at row {}", i / dim)));
        }

        let row = |i: usize| &points[i * dim..(i + 1) * dim];
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let k = kernel_unchecked(row(i), row(j), &kernel);
                gram[(i, j)] = k;
                gram[(j, i)] = k;
            }
        }
        let row_means: Vec<f64> = (0..n).map(|i| gram.row(i).sum() / n as f64).collect();
        let grand_mean = row_means.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] += grand_mean - row_means[i] - row_means[j];
            }
        }

        let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let lambda_max = eig.eigenvalues[order[0]];
        let scale = lambda_max.abs().max(1.0);
        if lambda_max <= 1e-12 * scale || lambda_max <= f64::MIN_POSITIVE {
            return Err(Error::Data(
                "centred kernel matrix is numerically zero (all training points identical?)".into(),
            ));
        }
        let cutoff = RELATIVE_EIGEN_CUTOFF * lambda_max;
        let spectrum: Vec<f64> = order
            .iter()
            .map(|&i| eig.eigenvalues[i])
            .take_while(|&l| l > cutoff)
            .collect();
        let k = n_components.min(spectrum.len());

        let mut alphas = vec![0.0; n * k];
        for (c, &src) in order.iter().take(k).enumerate() {
            let v = eig.eigenvectors.column(src);
            // sign: largest-magnitude entry positive (first one on ties)
            let pivot = (0..n).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            let s = sign / spectrum[c].sqrt();
            for i in 0..n {
                alphas[i * k + c] = v[i] * s;
            }
        }

        Ok(Self {
            kernel,
            dim,
            training_points: points.to_vec(),
            n_train: n,
            alphas,
            n_components: k,
            eigenvalues: spectrum[..k].to_vec(),
            spectrum,
            row_means,
            grand_mean,
        })
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::Parameter(format!(
                "expected a {}-dimensional point, got {}",
                self.dim,
                x.len()
            )));
        }
        let n = self.n_train;
        let kx: Vec<f64> = (0..n)
            .map(|i| kernel_unchecked(x, &self.training_points[i * self.dim..(i + 1) * self.dim], &self.kernel))
            .collect();
        let kx_mean = kx.iter().sum::<f64>() / n as f64;
        let k = self.n_components;
        let mut out = vec![0.0; k];
        for i in 0..n {
            let centred = kx[i] - kx_mean - self.row_means[i] + self.grand_mean;
            let a = &self.alphas[i * k..(i + 1) * k];
            for (o, ai) in out.iter_mut().zip(a) {
                *o += centred * ai;
            }
        }
        Ok(out)
    }

    /// Project every row of a row-major matrix.
    pub fn transform_rows(&self, rows: &[f64]) -> Result<Vec<f64>> {
        if rows.len() % self.dim != 0 {
            return Err(Error::Shape(format!("{} values are not rows of width {}", rows.len(), self.dim)));
        }
        let mut out = Vec::with_capacity(rows.len() / self.dim * self.n_components);
        for r in rows.chunks_exact(self.dim) {
            out.extend(self.transform(r)?);
        }
        Ok(out)
    }

    /// Cumulative explained-variance ratios over the eigenvalue spectrum.
    pub fn explained_variance(&self) -> Vec<f64> {
        cumulative_explained_variance(&self.spectrum)
    }
}

/// Running sums of `lambda_i / sum(lambda)` for eigenvalues in descending order.
pub fn cumulative_explained_variance(eigenvalues: &[f64]) -> Vec<f64> {
    let total: f64 = eigenvalues.iter().map(|l| l.max(0.0)).sum();
    if total <= 0.0 {
        return vec![0.0; eigenvalues.len()];
    }
    let mut acc = 0.0;
    eigenvalues
        .iter()
        .map(|l| {
            acc += l.max(0.0);
            (acc / total).min(1.0)
        })
        .collect()
}
