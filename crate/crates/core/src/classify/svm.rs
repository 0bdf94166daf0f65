use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, RowMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    /// L2 regularization strength.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            epochs: 50,
            seed: 0,
        }
    }
}

/// One-vs-rest linear classifier. Each weight vector is `dim + 1` long, bias last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: Vec<String>,
    pub dim: usize,
    pub weights: Vec<Vec<f64>>,
}

impl LinearModel {
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::input(format!(
                "vector has dim {}, classifier expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self
            .weights
            .iter()
            .map(|w| dot(&w[..self.dim], x) + w[self.dim])
            .collect())
    }

    /// Index into `classes` of the highest score; ties go to the lower index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &s)| if s > best.1 { (i, s) } else { best },
        )
        .0
}

/// Folds exact duplicates (same label, bit-identical vector) into one example with a count.
fn distinct_examples(samples: &RowMatrix, labels: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let mut index: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
    let mut rows = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for (i, x) in samples.iter_rows().enumerate() {
        let key = (labels[i], x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        match index.get(&key) {
            Some(&j) => counts[j] += 1.0,
            None => {
                index.insert(key, rows.len());
                rows.push(i);
                counts.push(1.0);
            }
        }
    }
    (rows, counts)
}

/// Trains one-vs-rest L2-regularized hinge-loss classifiers by stochastic subgradient
/// descent (Pegasos step size `1 / (lambda t)`, iterates projected onto the ball of
/// radius `1 / sqrt(lambda)`), with the bias as a regularized constant feature. The returned weights are the running average of the iterates over the second
/// half of training.
///
/// An epoch is one pass over the *distinct* training examples in an order shuffled by
/// `seed`. Repeated examples are folded into a per-example weight (count divided by the
/// mean count), so the objective, an average over the training multiset, and the update
/// sequence are unchanged when the whole training set is duplicated.
pub fn train(samples: &RowMatrix, labels: &[String], cfg: &SvmConfig) -> Result<LinearModel> {
    if samples.rows() != labels.len() {
        return Err(Error::input("sample and label counts differ"));
    }
    if !(cfg.lambda.is_finite() && cfg.lambda > 0.0) {
        return Err(Error::config("regularization must be positive"));
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::input("training needs at least two classes"));
    }
    let label_idx: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();

    let (rows, counts) = distinct_examples(samples, &label_idx);
    let mean_count = counts.iter().sum::<f64>() / counts.len() as f64;
    let example_weight: Vec<f64> = counts.iter().map(|c| c / mean_count).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let schedule: Vec<Vec<usize>> = (0..cfg.epochs)
        .map(|_| {
            order.shuffle(&mut rng);
            order.clone()
        })
        .collect();

    let dim = samples.cols();
    let total_steps = cfg.epochs * rows.len();
    let weights = (0..classes.len())
        .into_par_iter()
        .map(|c| {
            let mut w = vec![0.0; dim + 1];
            let mut avg = vec![0.0; dim + 1];
            let mut averaged = 0usize;
            let mut t = 0usize;
            for epoch in &schedule {
                for &e in epoch {
                    t += 1;
                    let x = samples.row(rows[e]);
                    let y = if label_idx[rows[e]] == c { 1.0 } else { -1.0 };
                    let eta = 1.0 / (cfg.lambda * t as f64);
                    let margin = y * (dot(&w[..dim], x) + w[dim]);
                    let shrink = 1.0 - eta * cfg.lambda;
                    w.iter_mut().for_each(|v| *v *= shrink);
                    if margin < 1.0 {
                        let step = eta * example_weight[e] * y;
                        for (wi, xi) in w.iter_mut().zip(x) {
                            *wi += step * xi;
                        }
                        w[dim] += step;
                    }
                    // the optimum lies in the ball of radius 1/sqrt(lambda)
                    let norm_sq: f64 = w.iter().map(|v| v * v).sum();
                    if norm_sq * cfg.lambda > 1.0 {
                        let scale = 1.0 / (norm_sq * cfg.lambda).sqrt();
                        w.iter_mut().for_each(|v| *v *= scale);
                    }
                    if 2 * t > total_steps {
                        averaged += 1;
                        let r = 1.0 / averaged as f64;
                        for (a, v) in avg.iter_mut().zip(&w) {
                            *a += (v - *a) * r;
                        }
                    }
                }
            }
            avg
        })
        .collect();

    Ok(LinearModel { classes, dim, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(n: usize, seed: u64) -> (RowMatrix, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = RowMatrix::with_cols(2);
        let mut y = Vec::new();
        for i in 0..n {
            let (cx, label) = if i % 2 == 0 { (-3.0, "a") } else { (3.0, "b") };
            x.push_row(&[cx + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .unwrap();
            y.push(label.to_string());
        }
        (x, y)
    }

    #[test]
    fn separable_clusters_fit_perfectly() {
        let (x, y) = blobs(60, 1);
        let m = train(&x, &y, &SvmConfig::default()).unwrap();
        for (row, label) in x.iter_rows().zip(&y) {
            assert_eq!(&m.classes[m.predict(row).unwrap()], label);
        }
    }

    #[test]
    fn duplicated_training_set_gives_identical_model() {
        let (x, y) = blobs(40, 2);
        let cfg = SvmConfig {
            seed: 5,
            ..SvmConfig::default()
        };
        let m1 = train(&x, &y, &cfg).unwrap();
        let mut rows: Vec<Vec<f64>> = x.iter_rows().map(<[f64]>::to_vec).collect();
        rows.extend(rows.clone());
        let x2 = RowMatrix::from_rows(&rows).unwrap();
        let y2 = [y.clone(), y].concat();
        assert_eq!(train(&x2, &y2, &cfg).unwrap(), m1);
    }

    #[test]
    fn deterministic_under_seed() {
        let (x, y) = blobs(30, 3);
        let cfg = SvmConfig {
            seed: 9,
            epochs: 5,
            ..SvmConfig::default()
        };
        assert_eq!(train(&x, &y, &cfg).unwrap(), train(&x, &y, &cfg).unwrap());
    }

    #[test]
    fn single_class_rejected() {
        let x = RowMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let y = vec!["a".to_string(), "a".to_string()];
        assert!(matches!(
            train(&x, &y, &SvmConfig::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn bias_shift_keeps_predictions() {
        let (x, y) = blobs(30, 4);
        let m = train(&x, &y, &SvmConfig::default()).unwrap();
        let mut shifted = m.clone();
        for w in &mut shifted.weights {
            w[2] += 17.5;
        }
        for row in x.iter_rows() {
            assert_eq!(m.predict(row).unwrap(), shifted.predict(row).unwrap());
        }
    }
}
