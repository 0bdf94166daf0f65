use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, RowMatrix};

/// Components whose weight falls below this are re-seeded.
pub const COLLAPSE_WEIGHT: f64 = 1e-8;
/// Variance floor relative to the per-dimension data variance.
pub const VARIANCE_FLOOR_RATIO: f64 = 1e-6;
/// Rows per E-step shard. Fixed so that reductions do not depend on the thread count.
const SHARD_ROWS: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            components: 32,
            max_iter: 100,
            tol: 1e-5,
            seed: 0,
        }
    }
}

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    dim: usize,
    weights: Vec<f64>,
    /// Row-major `K x dim`.
    means: Vec<f64>,
    /// Row-major `K x dim`, strictly positive.
    variances: Vec<f64>,
    log_norm: Vec<f64>,
}

impl GmmModel {
    pub fn from_parts(dim: usize, weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || dim == 0 {
            return Err(Error::input("GMM needs at least one component and one dimension"));
        }
        if means.len() != k * dim || variances.len() != k * dim {
            return Err(Error::input("GMM parameter arrays have inconsistent sizes"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::input("GMM weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("GMM weights sum to {total}")));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::input("GMM means must be finite and variances positive"));
        }
        let mut model = GmmModel {
            dim,
            weights,
            means,
            variances,
            log_norm: Vec::new(),
        };
        model.refresh();
        Ok(model)
    }

    fn refresh(&mut self) {
        let dim = self.dim;
        self.log_norm = (0..self.weights.len())
            .map(|k| {
                let log_det: f64 = self.variances[k * dim..(k + 1) * dim].iter().map(|v| v.ln()).sum();
                self.weights[k].ln() - 0.5 * (dim as f64 * (2.0 * PI).ln() + log_det)
            })
            .collect();
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn variance(&self, k: usize) -> &[f64] {
        &self.variances[k * self.dim..(k + 1) * self.dim]
    }

    /// Writes posterior responsibilities of `x` into `gamma` and returns `log p(x)`.
    pub fn posteriors(&self, x: &[f64], gamma: &mut [f64]) -> f64 {
        let dim = self.dim;
        for (k, g) in gamma.iter_mut().enumerate().take(self.components()) {
            let mu = &self.means[k * dim..(k + 1) * dim];
            let var = &self.variances[k * dim..(k + 1) * dim];
            let mut maha = 0.0;
            for ((&xi, &m), &v) in x.iter().zip(mu).zip(var) {
                let d = xi - m;
                maha += d * d / v;
            }
            *g = self.log_norm[k] - 0.5 * maha;
        }
        let max = gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for g in gamma.iter_mut() {
            *g = (*g - max).exp();
            total += *g;
        }
        gamma.iter_mut().for_each(|g| *g /= total);
        max + total.ln()
    }

    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let mut gamma = vec![0.0; self.components()];
        self.posteriors(x, &mut gamma);
        Ok(gamma)
    }

    /// Mean per-sample log-likelihood.
    pub fn mean_log_likelihood(&self, samples: &RowMatrix) -> Result<f64> {
        self.check_dim(samples.cols())?;
        if samples.is_empty() {
            return Err(Error::input("no samples"));
        }
        let mut gamma = vec![0.0; self.components()];
        let total: f64 = samples.iter_rows().map(|x| self.posteriors(x, &mut gamma)).sum();
        Ok(total / samples.rows() as f64)
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim {
            return Err(Error::input(format!(
                "vector dim {d} does not match GMM dim {}",
                self.dim
            )));
        }
        Ok(())
    }
}

/// Convergence trace of [`fit_gmm`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Mean log-likelihood of the model before each M-step, ending with the returned model.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Indices into `log_likelihood` after which a collapsed component was re-seeded.
    pub reseeded_at: Vec<usize>,
}

struct Stats {
    count: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    log_likelihood: f64,
    /// Sample with the lowest likelihood: (log p, row).
    worst: (f64, usize),
}

impl Stats {
    fn zeros(k: usize, dim: usize) -> Stats {
        Stats {
            count: vec![0.0; k],
            sum: vec![0.0; k * dim],
            sum_sq: vec![0.0; k * dim],
            log_likelihood: 0.0,
            worst: (f64::INFINITY, 0),
        }
    }

    fn merge(&mut self, other: &Stats) {
        for (a, b) in self.count.iter_mut().zip(&other.count) {
            *a += b;
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.log_likelihood += other.log_likelihood;
        if other.worst.0 < self.worst.0 {
            self.worst = other.worst;
        }
    }
}

fn e_step(model: &GmmModel, samples: &RowMatrix) -> Stats {
    let (k, dim) = (model.components(), model.dim);
    let shards: Vec<Stats> = samples
        .as_slice()
        .par_chunks(SHARD_ROWS * dim)
        .enumerate()
        .map(|(s, chunk)| {
            let mut st = Stats::zeros(k, dim);
            let mut gamma = vec![0.0; k];
            for (i, x) in chunk.chunks_exact(dim).enumerate() {
                let lp = model.posteriors(x, &mut gamma);
                st.log_likelihood += lp;
                if lp < st.worst.0 {
                    st.worst = (lp, s * SHARD_ROWS + i);
                }
                for (c, &g) in gamma.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    st.count[c] += g;
                    let sum = &mut st.sum[c * dim..(c + 1) * dim];
                    let sq = &mut st.sum_sq[c * dim..(c + 1) * dim];
                    for ((s1, s2), &xi) in sum.iter_mut().zip(sq.iter_mut()).zip(x) {
                        *s1 += g * xi;
                        *s2 += g * xi * xi;
                    }
                }
            }
            st
        })
        .collect();
    let mut total = Stats::zeros(k, dim);
    for s in &shards {
        total.merge(s);
    }
    total
}

fn kmeans_pp(samples: &RowMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = samples.rows();
    // greedy variant: several D^2 draws per step, keep the one that lowers the potential most
    let trials = 2 + (k as f64).ln() as usize;
    let mut seeds = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = samples
        .iter_rows()
        .map(|x| squared_distance(x, samples.row(seeds[0])))
        .collect();
    while seeds.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            seeds.push(rng.random_range(0..n));
            continue;
        }
        let candidates: Vec<usize> = (0..trials).map(|_| draw(&d2, rng.random::<f64>() * total)).collect();
        let (best, _, best_d2) = candidates
            .par_iter()
            .map(|&c| {
                let centre = samples.row(c);
                let updated: Vec<f64> = samples
                    .iter_rows()
                    .zip(&d2)
                    .map(|(x, &d)| d.min(squared_distance(x, centre)))
                    .collect();
                (c, updated.iter().sum::<f64>(), updated)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least two trials");
        seeds.push(best);
        d2 = best_d2;
    }
    seeds
}

/// Index whose cumulative weight first exceeds `target`.
fn draw(d2: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    for (i, &d) in d2.iter().enumerate() {
        acc += d;
        if acc > target && d > 0.0 {
            return i;
        }
    }
    d2.iter().rposition(|&d| d > 0.0).unwrap_or(d2.len() - 1)
}

/// Trains a diagonal GMM with k-means++ seeding followed by EM.
///
/// Iteration stops when the relative improvement of the mean log-likelihood drops
/// below `tol` or after `max_iter` M-steps.
pub fn fit_gmm(samples: &RowMatrix, cfg: &GmmConfig) -> Result<(GmmModel, FitReport)> {
    let (n, dim, k) = (samples.rows(), samples.cols(), cfg.components);
    if k == 0 || dim == 0 {
        return Err(Error::input("GMM needs at least one component and one dimension"));
    }
    if n < 10 * k {
        return Err(Error::input(format!(
            "GMM with {k} components needs at least {} samples, got {n}",
            10 * k
        )));
    }
    if samples.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::input("GMM samples must be finite"));
    }

    // work on globally centred data to limit cancellation in E[x^2] - E[x]^2
    let mut centre = vec![0.0; dim];
    for x in samples.iter_rows() {
        for (c, v) in centre.iter_mut().zip(x) {
            *c += v;
        }
    }
    centre.iter_mut().for_each(|c| *c /= n as f64);
    let mut data = samples.clone();
    for i in 0..n {
        for (v, c) in data.row_mut(i).iter_mut().zip(&centre) {
            *v -= c;
        }
    }
    let data_var: Vec<f64> = (0..dim)
        .map(|d| data.iter_rows().map(|x| x[d] * x[d]).sum::<f64>() / n as f64)
        .collect();
    let mean_var = data_var.iter().sum::<f64>() / dim as f64;
    let floor: Vec<f64> = data_var
        .iter()
        .map(|&v| {
            let base = if v > 0.0 {
                v
            } else if mean_var > 0.0 {
                mean_var
            } else {
                1e-6
            };
            VARIANCE_FLOOR_RATIO * base
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds = kmeans_pp(&data, k, &mut rng);
    let mut model = init_from_seeds(&data, &seeds, &data_var, &floor)?;

    let mut report = FitReport {
        log_likelihood: Vec::new(),
        iterations: 0,
        converged: false,
        reseeded_at: Vec::new(),
    };
    loop {
        let stats = e_step(&model, &data);
        let ll = stats.log_likelihood / n as f64;
        if let Some(&prev) = report.log_likelihood.last() {
            let restarted = report.reseeded_at.last() == Some(&(report.log_likelihood.len() - 1));
            if !restarted && (ll - prev) / prev.abs().max(f64::MIN_POSITIVE) < cfg.tol {
                report.log_likelihood.push(ll);
                report.converged = true;
                break;
            }
        }
        report.log_likelihood.push(ll);
        if report.iterations >= cfg.max_iter {
            break;
        }
        let reseeded = m_step(&mut model, &stats, &data, &data_var, &floor, n);
        report.iterations += 1;
        if reseeded {
            report.reseeded_at.push(report.log_likelihood.len() - 1);
        }
    }

    for k in 0..model.components() {
        for (m, c) in model.means[k * dim..(k + 1) * dim].iter_mut().zip(&centre) {
            *m += c;
        }
    }
    model.refresh();
    Ok((model, report))
}

fn init_from_seeds(data: &RowMatrix, seeds: &[usize], data_var: &[f64], floor: &[f64]) -> Result<GmmModel> {
    let (n, dim, k) = (data.rows(), data.cols(), seeds.len());
    let mut count = vec![0usize; k];
    let mut sq = vec![0.0; k * dim];
    for x in data.iter_rows() {
        let (best, _) = seeds
            .iter()
            .enumerate()
            .map(|(j, &s)| (j, squared_distance(x, data.row(s))))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        count[best] += 1;
        let seed = data.row(seeds[best]);
        for d in 0..dim {
            sq[best * dim + d] += (x[d] - seed[d]).powi(2);
        }
    }
    let mut means = Vec::with_capacity(k * dim);
    let mut variances = Vec::with_capacity(k * dim);
    let mut weights = Vec::with_capacity(k);
    for j in 0..k {
        means.extend_from_slice(data.row(seeds[j]));
        for d in 0..dim {
            let v = if count[j] > 1 {
                sq[j * dim + d] / count[j] as f64
            } else {
                data_var[d]
            };
            variances.push(v.max(floor[d]));
        }
        weights.push(count[j].max(1) as f64 / n as f64);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    GmmModel::from_parts(dim, weights, means, variances)
}

/// Returns whether a collapsed component was re-seeded.
fn m_step(model: &mut GmmModel, stats: &Stats, data: &RowMatrix, data_var: &[f64], floor: &[f64], n: usize) -> bool {
    let dim = model.dim;
    let mut reseeded = false;
    for k in 0..model.components() {
        let nk = stats.count[k];
        let w = nk / n as f64;
        if w < COLLAPSE_WEIGHT {
            log::warn!("GMM component {k} collapsed (weight {w:e}); re-seeding from the least likely sample");
            reseeded = true;
            model.weights[k] = 1.0 / n as f64;
            model.means[k * dim..(k + 1) * dim].copy_from_slice(data.row(stats.worst.1));
            for ((v, &dv), &f) in model.variances[k * dim..(k + 1) * dim]
                .iter_mut()
                .zip(data_var.iter())
                .zip(floor.iter())
            {
                *v = dv.max(f);
            }
            continue;
        }
        model.weights[k] = w;
        for (d, &f) in floor.iter().enumerate() {
            let mu = stats.sum[k * dim + d] / nk;
            let var = stats.sum_sq[k * dim + d] / nk - mu * mu;
            model.means[k * dim + d] = mu;
            model.variances[k * dim + d] = var.max(f);
        }
    }
    let total: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= total);
    model.refresh();
    reseeded
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn clusters(centres: &[Vec<f64>], per: usize, sd: f64, seed: u64) -> RowMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sd).unwrap();
        let mut m = RowMatrix::with_cols(centres[0].len());
        for _ in 0..per {
            for c in centres {
                let row: Vec<f64> = c.iter().map(|v| v + noise.sample(&mut rng)).collect();
                m.push_row(&row).unwrap();
            }
        }
        m
    }

    #[test]
    fn single_component_closed_form() {
        let x = clusters(&[vec![1.0, -3.0, 0.5]], 200, 2.0, 1);
        let (m, _) = fit_gmm(
            &x,
            &GmmConfig {
                components: 1,
                ..GmmConfig::default()
            },
        )
        .unwrap();
        for d in 0..3 {
            let mean = x.iter_rows().map(|r| r[d]).sum::<f64>() / 200.0;
            let var = x.iter_rows().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / 200.0;
            assert!((m.mean(0)[d] - mean).abs() < 1e-8);
            assert!((m.variance(0)[d] - var).abs() < 1e-8);
        }
        assert_eq!(m.weights(), &[1.0]);
    }

    #[test]
    fn recovers_separated_clusters() {
        let centres = vec![vec![0.0, 0.0], vec![20.0, 0.0], vec![0.0, 20.0], vec![20.0, 20.0]];
        let x = clusters(&centres, 100, 0.5, 2);
        let (m, report) = fit_gmm(
            &x,
            &GmmConfig {
                components: 4,
                seed: 3,
                ..GmmConfig::default()
            },
        )
        .unwrap();
        for c in &centres {
            let best = (0..4)
                .map(|k| squared_distance(m.mean(k), c))
                .fold(f64::INFINITY, f64::min);
            assert!(best.sqrt() < 0.5, "centre {c:?} missed");
        }
        for w in report.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
        for x in x.iter_rows().take(20) {
            let g = m.responsibilities(x).unwrap();
            assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(g.iter().copied().fold(0.0, f64::max) > 0.99);
        }
    }

    #[test]
    fn insufficient_samples() {
        let x = clusters(&[vec![0.0]], 5, 1.0, 0);
        assert!(matches!(
            fit_gmm(&x, &GmmConfig::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn deterministic_for_seed() {
        let x = clusters(&[vec![0.0, 1.0], vec![5.0, 5.0], vec![-4.0, 2.0]], 50, 1.0, 4);
        let cfg = GmmConfig {
            components: 3,
            seed: 11,
            ..GmmConfig::default()
        };
        assert_eq!(fit_gmm(&x, &cfg).unwrap(), fit_gmm(&x, &cfg).unwrap());
    }

    #[test]
    fn duplicate_points_do_not_break_fit() {
        // only two distinct points but four components: seeds repeat, components collapse
        let x = RowMatrix::from_rows(
            &[vec![0.0, 0.0], vec![1.0, 1.0]]
                .iter()
                .cycle()
                .take(60)
                .cloned()
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let (m, _) = fit_gmm(
            &x,
            &GmmConfig {
                components: 4,
                ..GmmConfig::default()
            },
        )
        .unwrap();
        assert!(m.variances().iter().all(|v| *v > 0.0));
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
