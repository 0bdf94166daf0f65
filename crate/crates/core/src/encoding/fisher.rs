use std::fmt;
use std::str::FromStr;

use crate::encoding::GmmModel;
use crate::error::{Error, Result};
use crate::linalg::{l2_norm, RowMatrix};

/// Fixed-length image encoding for one or more descriptor streams.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedImage {
    pub image_id: String,
    pub vector: Vec<f64>,
}

/// How a set of projected descriptors becomes one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncodingMode {
    /// Mean and variance gradients, `2 * K * dim` values.
    #[default]
    Fisher,
    /// Hard-assignment histogram over the GMM components, `K` values.
    Bow,
}

impl EncodingMode {
    pub fn output_dim(self, gmm: &GmmModel) -> usize {
        match self {
            EncodingMode::Fisher => 2 * gmm.components() * gmm.dim(),
            EncodingMode::Bow => gmm.components(),
        }
    }
}

impl fmt::Display for EncodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingMode::Fisher => "fisher",
            EncodingMode::Bow => "bow",
        })
    }
}

impl FromStr for EncodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fisher" | "fv" => Ok(EncodingMode::Fisher),
            "bow" => Ok(EncodingMode::Bow),
            other => Err(Error::config(format!("unknown encoding mode {other:?}"))),
        }
    }
}

/// Unnormalized Fisher Vector: all mean-gradient blocks, then all variance-gradient blocks.
///
/// For component `k` with weight `w`, mean `mu` and std-dev `sigma`, over `N` descriptors:
/// `G_mu = 1/(N sqrt(w)) sum_n gamma_nk (x_n - mu)/sigma` and
/// `G_sigma = 1/(N sqrt(2w)) sum_n gamma_nk [((x_n - mu)/sigma)^2 - 1]`.
pub fn fisher_gradients(model: &GmmModel, descriptors: &RowMatrix) -> Result<Vec<f64>> {
    if descriptors.is_empty() {
        return Err(Error::input("cannot encode an empty descriptor set"));
    }
    model.check_dim(descriptors.cols())?;
    let (k, dim) = (model.components(), model.dim());
    let inv_sd: Vec<f64> = model.variances().iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut out = vec![0.0; 2 * k * dim];
    let (g_mu, g_sigma) = out.split_at_mut(k * dim);
    let mut gamma = vec![0.0; k];
    for x in descriptors.iter_rows() {
        model.posteriors(x, &mut gamma);
        for (c, &g) in gamma.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let mu = model.mean(c);
            let is = &inv_sd[c * dim..(c + 1) * dim];
            for d in 0..dim {
                let u = (x[d] - mu[d]) * is[d];
                g_mu[c * dim + d] += g * u;
                g_sigma[c * dim + d] += g * (u * u - 1.0);
            }
        }
    }
    let n = descriptors.rows() as f64;
    for (c, &w) in model.weights().iter().enumerate() {
        let a = 1.0 / (n * w.sqrt());
        let b = 1.0 / (n * (2.0 * w).sqrt());
        g_mu[c * dim..(c + 1) * dim].iter_mut().for_each(|v| *v *= a);
        g_sigma[c * dim..(c + 1) * dim].iter_mut().for_each(|v| *v *= b);
    }
    Ok(out)
}

/// Signed square root, element-wise.
pub fn power_normalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.signum() * x.abs().sqrt();
    }
}

/// Scales to unit L2 norm. A zero vector is left unchanged.
pub fn l2_normalize(v: &mut [f64]) {
    let norm = l2_norm(v);
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Fisher Vector with power and L2 normalization.
pub fn fisher_vector(model: &GmmModel, descriptors: &RowMatrix) -> Result<Vec<f64>> {
    let mut v = fisher_gradients(model, descriptors)?;
    power_normalize(&mut v);
    l2_normalize(&mut v);
    Ok(v)
}

/// Hard-assignment histogram over components, power and L2 normalized.
pub fn bow_histogram(model: &GmmModel, descriptors: &RowMatrix) -> Result<Vec<f64>> {
    if descriptors.is_empty() {
        return Err(Error::input("cannot encode an empty descriptor set"));
    }
    model.check_dim(descriptors.cols())?;
    let mut hist = vec![0.0; model.components()];
    let mut gamma = vec![0.0; model.components()];
    for x in descriptors.iter_rows() {
        model.posteriors(x, &mut gamma);
        let best = gamma
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, &g)| if g > a.1 { (i, g) } else { a })
            .0;
        hist[best] += 1.0;
    }
    let n = descriptors.rows() as f64;
    hist.iter_mut().for_each(|h| *h /= n);
    power_normalize(&mut hist);
    l2_normalize(&mut hist);
    Ok(hist)
}

pub fn encode(mode: EncodingMode, model: &GmmModel, descriptors: &RowMatrix) -> Result<Vec<f64>> {
    match mode {
        EncodingMode::Fisher => fisher_vector(model, descriptors),
        EncodingMode::Bow => bow_histogram(model, descriptors),
    }
}

/// Concatenates per-stream encodings of the same image and re-normalizes to unit length.
pub fn concat_encodings(parts: &[EncodedImage]) -> Result<EncodedImage> {
    let first = parts
        .first()
        .ok_or_else(|| Error::input("no encodings to concatenate"))?;
    if let Some(p) = parts.iter().find(|p| p.image_id != first.image_id) {
        return Err(Error::input(format!(
            "cannot concatenate encodings of {:?} and {:?}",
            first.image_id, p.image_id
        )));
    }
    let mut vector: Vec<f64> = parts.iter().flat_map(|p| p.vector.iter().copied()).collect();
    l2_normalize(&mut vector);
    Ok(EncodedImage {
        image_id: first.image_id.clone(),
        vector,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_component() -> GmmModel {
        GmmModel::from_parts(
            2,
            vec![0.25, 0.75],
            vec![0.0, 0.0, 10.0, -10.0],
            vec![1.0, 2.0, 0.5, 1.5],
        )
        .unwrap()
    }

    #[test]
    fn shape() {
        let m = two_component();
        let x = RowMatrix::from_rows(&[vec![1.0, 2.0], vec![9.0, -9.0]]).unwrap();
        assert_eq!(fisher_vector(&m, &x).unwrap().len(), 8);
        assert_eq!(bow_histogram(&m, &x).unwrap().len(), 2);
        assert_eq!(EncodingMode::Fisher.output_dim(&m), 8);
    }

    #[test]
    fn single_component_closed_form() {
        let m = GmmModel::from_parts(3, vec![1.0], vec![1.0, 2.0, 3.0], vec![4.0, 0.25, 1.0]).unwrap();
        let x = [2.0, 1.0, 5.5];
        let g = fisher_gradients(&m, &RowMatrix::from_rows(&[x.to_vec()]).unwrap()).unwrap();
        // with one component gamma = 1, N = 1, w = 1
        let u = [(2.0 - 1.0) / 2.0, (1.0 - 2.0) / 0.5, (5.5 - 3.0) / 1.0];
        for d in 0..3 {
            assert!((g[d] - u[d]).abs() < 1e-10);
            assert!((g[3 + d] - (u[d] * u[d] - 1.0) / 2f64.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn normalized_output_has_unit_norm_and_keeps_signs() {
        let m = two_component();
        let x = RowMatrix::from_rows(&[vec![1.0, 2.0], vec![9.0, -9.0], vec![0.3, -0.1]]).unwrap();
        let raw = fisher_gradients(&m, &x).unwrap();
        let fv = fisher_vector(&m, &x).unwrap();
        assert!((l2_norm(&fv) - 1.0).abs() < 1e-12);
        for (a, b) in raw.iter().zip(&fv) {
            assert!(a.signum() == b.signum() || *a == 0.0);
        }
    }

    #[test]
    fn copies_do_not_change_the_encoding() {
        let m = two_component();
        let rows = vec![vec![1.0, 2.0], vec![9.0, -9.0], vec![0.3, -0.1]];
        let once = fisher_vector(&m, &RowMatrix::from_rows(&rows).unwrap()).unwrap();
        let thrice = fisher_vector(
            &m,
            &RowMatrix::from_rows(&rows.iter().cycle().take(3 * rows.len()).cloned().collect::<Vec<_>>()).unwrap(),
        )
        .unwrap();
        for (a, b) in once.iter().zip(&thrice) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_set_rejected() {
        let m = two_component();
        assert!(fisher_vector(&m, &RowMatrix::with_cols(2)).is_err());
        assert!(fisher_vector(&m, &RowMatrix::from_rows(&[vec![1.0]]).unwrap()).is_err());
    }

    #[test]
    fn concatenation() {
        let a = EncodedImage {
            image_id: "x".into(),
            vector: vec![0.6, 0.8],
        };
        let b = EncodedImage {
            image_id: "x".into(),
            vector: vec![1.0, 0.0, 0.0],
        };
        assert_eq!(concat_encodings(std::slice::from_ref(&a)).unwrap(), a);
        let ab = concat_encodings(&[a.clone(), b]).unwrap();
        assert_eq!(ab.vector.len(), 5);
        assert!((l2_norm(&ab.vector) - 1.0).abs() < 1e-12);
        let c = EncodedImage {
            image_id: "y".into(),
            vector: vec![1.0],
        };
        assert!(matches!(concat_encodings(&[a, c]), Err(Error::InvalidInput(_))));
    }
}
