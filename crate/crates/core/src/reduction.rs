//! PCA fitting and projection of descriptor streams.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, RowMatrix};

/// Eigenvalues below `RANK_TOLERANCE * largest` are treated as numerically zero.
const RANK_TOLERANCE: f64 = 1e-12;
const COVARIANCE_BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaConfig {
    pub output_dim: usize,
    /// At most this many samples (drawn uniformly with `seed`) enter the covariance.
    pub sample_cap: usize,
    pub seed: u64,
    /// Scale each component by `1/sqrt(eigenvalue)`. Components are then orthogonal
    /// but no longer unit length.
    pub whiten: bool,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig {
            output_dim: 80,
            sample_cap: 200_000,
            seed: 0,
            whiten: false,
        }
    }
}

/// Mean and `K x D` projection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// Row-major `output_dim x input_dim`.
    components: Vec<f64>,
    input_dim: usize,
    output_dim: usize,
    /// Variance along each component, descending. Not persisted.
    explained_variance: Vec<f64>,
}

impl PcaModel {
    /// Builds a model from stored parts (as read from a model file).
    pub fn from_parts(mean: Vec<f64>, components: Vec<f64>, output_dim: usize) -> Result<Self> {
        let input_dim = mean.len();
        if output_dim == 0 || output_dim > input_dim {
            return Err(Error::input(format!(
                "PCA output dim {output_dim} must be in 1..={input_dim}"
            )));
        }
        if components.len() != output_dim * input_dim {
            return Err(Error::input("PCA component matrix has the wrong size"));
        }
        if mean.iter().chain(&components).any(|v| !v.is_finite()) {
            return Err(Error::input("PCA parameters must be finite"));
        }
        Ok(PcaModel {
            mean,
            components,
            input_dim,
            output_dim,
            explained_variance: Vec::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k * self.input_dim..(k + 1) * self.input_dim]
    }

    /// Empty for models loaded from disk.
    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim {
            return Err(Error::input(format!(
                "vector has length {}, PCA expects {}",
                v.len(),
                self.input_dim
            )));
        }
        let centred: Vec<f64> = v.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok((0..self.output_dim).map(|k| dot(self.component(k), &centred)).collect())
    }

    /// Projects an `f32` descriptor, the storage type of descriptor files.
    pub fn project_f32(&self, v: &[f32], out: &mut Vec<f64>) -> Result<()> {
        if v.len() != self.input_dim {
            return Err(Error::input(format!(
                "descriptor has length {}, PCA expects {}",
                v.len(),
                self.input_dim
            )));
        }
        out.clear();
        for k in 0..self.output_dim {
            let row = self.component(k);
            let mut acc = 0.0;
            for ((&x, &m), &c) in v.iter().zip(&self.mean).zip(row) {
                acc += (f64::from(x) - m) * c;
            }
            out.push(acc);
        }
        Ok(())
    }

    pub fn project_all(&self, samples: &RowMatrix) -> Result<RowMatrix> {
        let mut out = RowMatrix::with_cols(self.output_dim);
        for row in samples.iter_rows() {
            out.push_row(&self.project(row)?)?;
        }
        Ok(out)
    }

    /// Maps a projection back to input space: `mean + components^T * y`.
    pub fn reconstruct(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.output_dim {
            return Err(Error::input("projection has the wrong length"));
        }
        let mut v = self.mean.clone();
        for (k, &coef) in y.iter().enumerate() {
            for (vi, &c) in v.iter_mut().zip(self.component(k)) {
                *vi += coef * c;
            }
        }
        Ok(v)
    }
}

/// Uniform subsample of row indices, sorted, or all rows when under the cap.
pub fn subsample_indices(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, n, cap).into_vec();
    idx.sort_unstable();
    idx
}

/// Fits PCA by eigendecomposition of the sample covariance.
///
/// Components are ordered by descending eigenvalue and signed so that each row's
/// largest-magnitude entry is positive. If the data has rank below `output_dim`, the
/// trailing components come from the null space of the covariance.
pub fn fit_pca(samples: &RowMatrix, cfg: &PcaConfig) -> Result<PcaModel> {
    let dim = samples.cols();
    let k = cfg.output_dim;
    if k == 0 || k > dim {
        return Err(Error::input(format!("PCA output dim {k} must be in 1..={dim}")));
    }
    let idx = subsample_indices(samples.rows(), cfg.sample_cap.max(1), cfg.seed);
    let n = idx.len();
    if n < k {
        return Err(Error::input(format!("PCA needs at least {k} samples, got {n}")));
    }

    let mut mean = vec![0.0; dim];
    for &i in &idx {
        for (m, v) in mean.iter_mut().zip(samples.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    // accumulate X^T X over fixed-size row blocks, in index order
    let mut scatter = DMatrix::<f64>::zeros(dim, dim);
    for block in idx.chunks(COVARIANCE_BLOCK) {
        let centred = DMatrix::from_fn(block.len(), dim, |r, c| samples.row(block[r])[c] - mean[c]);
        scatter += centred.transpose() * &centred;
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = scatter / denom;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let mut components = Vec::with_capacity(k * dim);
    let mut explained = Vec::with_capacity(k);
    let mut deficient = 0;
    for &j in order.iter().take(k) {
        let lambda = eig.eigenvalues[j].max(0.0);
        if lambda <= RANK_TOLERANCE * top {
            deficient += 1;
        }
        let col = eig.eigenvectors.column(j);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        let scale = if cfg.whiten && lambda > RANK_TOLERANCE * top && lambda > 0.0 {
            sign / lambda.sqrt()
        } else {
            sign
        };
        components.extend(col.iter().map(|v| v * scale));
        explained.push(lambda);
    }
    if deficient > 0 {
        log::warn!("sample covariance is rank deficient: {deficient} of {k} components span its null space");
    }
    let mut model = PcaModel::from_parts(mean, components, k)?;
    model.explained_variance = explained;
    Ok(model)
}
