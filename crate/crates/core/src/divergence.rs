//! f-divergences between discrete histograms and their sliding-window extension.
//!
//! Every kind except Bhattacharyya is evaluated as a sum of nonnegative per-bin terms
//! `q_k * f(p_k / q_k)`, with the generator shifted by a multiple of `t - 1` where needed
//! so that each term is itself nonnegative (this does not change the value for
//! normalized inputs). Restricting the sum to a window of bins therefore gives a
//! nonnegative value that vanishes when the two windows agree, without renormalizing
//! the window. Bhattacharyya is evaluated as `-ln(1 - H)` where `H` is the Hellinger
//! value over the same bins; on full distributions this is exactly `-ln sum sqrt(p q)`.
//!
//! Sums are accumulated over the terms in ascending order, so reordering the bins of
//! both inputs with the same permutation gives a bit-identical result.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`DiscreteDistribution`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Probability histogram: nonnegative finite masses summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution(Vec<f64>);

impl DiscreteDistribution {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::input("distribution has no bins"));
        }
        if let Some(v) = mass.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::input(format!("distribution has invalid mass {v}")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::input(format!("distribution sums to {total}, not 1")));
        }
        Ok(DiscreteDistribution(mass))
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::input("weights must have a positive finite total"));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for DiscreteDistribution {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// The divergence family members supported for contrast measurement.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DivergenceKind {
    Bhattacharyya,
    KL,
    SymmetricKL,
    #[default]
    Hellinger,
    TotalVariation,
    Pearson,
    /// Alpha divergence; the parameter must be finite and not 0 or 1.
    Alpha(f64),
}

impl DivergenceKind {
    /// All kinds, with the alpha divergence at `alpha`.
    pub fn all(alpha: f64) -> [DivergenceKind; 7] {
        [
            DivergenceKind::Bhattacharyya,
            DivergenceKind::KL,
            DivergenceKind::SymmetricKL,
            DivergenceKind::Hellinger,
            DivergenceKind::TotalVariation,
            DivergenceKind::Pearson,
            DivergenceKind::Alpha(alpha),
        ]
    }

    pub fn validate(self) -> Result<()> {
        if let DivergenceKind::Alpha(a) = self {
            if !a.is_finite() || a == 0.0 || a == 1.0 {
                return Err(Error::config(format!("alpha divergence parameter {a} is not allowed")));
            }
        }
        Ok(())
    }

    /// Whether the divergence is symmetric in its arguments.
    pub fn is_symmetric(self) -> bool {
        match self {
            DivergenceKind::KL | DivergenceKind::Pearson => false,
            DivergenceKind::Alpha(a) => a == 0.5,
            _ => true,
        }
    }

    /// Per-bin contribution. Never negative, possibly `+inf`.
    fn term(self, p: f64, q: f64) -> f64 {
        if p == q {
            return 0.0;
        }
        match self {
            DivergenceKind::Hellinger | DivergenceKind::Bhattacharyya => {
                let d = p.sqrt() - q.sqrt();
                0.5 * d * d
            }
            DivergenceKind::TotalVariation => (p - q).abs(),
            DivergenceKind::Pearson => {
                if q == 0.0 {
                    f64::INFINITY
                } else {
                    (p - q) * (p - q) / q
                }
            }
            DivergenceKind::KL => {
                if p == 0.0 {
                    q
                } else if q == 0.0 {
                    f64::INFINITY
                } else {
                    (p * (p / q).ln() - p + q).max(0.0)
                }
            }
            DivergenceKind::SymmetricKL => {
                if p == 0.0 || q == 0.0 {
                    f64::INFINITY
                } else {
                    (p - q) * (p / q).ln()
                }
            }
            DivergenceKind::Alpha(a) => {
                let mixed = p.powf(a) * q.powf(1.0 - a);
                let v = (a * p + (1.0 - a) * q - mixed) / (a * (1.0 - a));
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v.max(0.0)
                }
            }
        }
    }

    /// Evaluates the divergence over aligned bin slices without validation.
    ///
    /// `scratch` is reused across calls to avoid allocation.
    pub fn evaluate_with(self, p: &[f64], q: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend(p.iter().zip(q).map(|(&a, &b)| self.term(a, b)));
        scratch.sort_unstable_by(f64::total_cmp);
        let total: f64 = scratch.iter().sum();
        match self {
            DivergenceKind::Bhattacharyya => {
                if total >= 1.0 {
                    f64::INFINITY
                } else {
                    // -ln(1 - H), and exactly 0 when H is 0
                    -(-total).ln_1p()
                }
            }
            _ => total,
        }
    }

    pub fn evaluate(self, p: &[f64], q: &[f64]) -> f64 {
        self.evaluate_with(p, q, &mut Vec::with_capacity(p.len()))
    }
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivergenceKind::Bhattacharyya => f.write_str("bhattacharyya"),
            DivergenceKind::KL => f.write_str("kl"),
            DivergenceKind::SymmetricKL => f.write_str("symmetric-kl"),
            DivergenceKind::Hellinger => f.write_str("hellinger"),
            DivergenceKind::TotalVariation => f.write_str("total-variation"),
            DivergenceKind::Pearson => f.write_str("pearson"),
            DivergenceKind::Alpha(a) => write!(f, "alpha:{a}"),
        }
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let kind = match s.as_str() {
            "bhattacharyya" => DivergenceKind::Bhattacharyya,
            "kl" => DivergenceKind::KL,
            "symmetric-kl" | "symmetric_kl" | "skl" => DivergenceKind::SymmetricKL,
            "hellinger" => DivergenceKind::Hellinger,
            "total-variation" | "total_variation" | "tv" => DivergenceKind::TotalVariation,
            "pearson" => DivergenceKind::Pearson,
            other => match other.strip_prefix("alpha:") {
                Some(a) => DivergenceKind::Alpha(
                    a.parse()
                        .map_err(|_| Error::config(format!("bad alpha parameter {a:?}")))?,
                ),
                None => return Err(Error::config(format!("unknown divergence kind {other:?}"))),
            },
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Width of the sliding window used for the subspace extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubspaceConfig {
    window: usize,
}

impl Default for SubspaceConfig {
    fn default() -> Self {
        SubspaceConfig { window: 3 }
    }
}

impl SubspaceConfig {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::config("subspace window must be at least 1"));
        }
        Ok(SubspaceConfig { window })
    }

    pub fn window(self) -> usize {
        self.window
    }

    /// Number of windows over a `bins`-bin histogram.
    pub fn count(self, bins: usize) -> Result<usize> {
        if bins < self.window {
            return Err(Error::config(format!(
                "subspace window {} exceeds histogram length {bins}",
                self.window
            )));
        }
        Ok(bins - self.window + 1)
    }
}

fn check_pair(kind: DivergenceKind, p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    kind.validate()?;
    if p.len() != q.len() {
        return Err(Error::input(format!(
            "distributions have different lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// Divergence of `p` from `q`. KL-type terms with `q_k = 0 < p_k` yield `+inf`.
pub fn divergence(kind: DivergenceKind, p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_pair(kind, p, q)?;
    Ok(kind.evaluate(p.mass(), q.mass()))
}

/// Divergence restricted to each window `j..j+window` of the raw histograms.
pub fn subspace_divergence(
    kind: DivergenceKind,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    cfg: SubspaceConfig,
) -> Result<Vec<f64>> {
    check_pair(kind, p, q)?;
    cfg.count(p.len())?;
    let mut out = Vec::new();
    subspace_into(kind, p.mass(), q.mass(), cfg.window, &mut out, &mut Vec::new());
    Ok(out)
}

/// Appends the windowed divergences of two aligned slices to `out`. Unchecked.
pub fn subspace_into(
    kind: DivergenceKind,
    p: &[f64],
    q: &[f64],
    window: usize,
    out: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) {
    out.extend(
        p.windows(window)
            .zip(q.windows(window))
            .map(|(pw, qw)| kind.evaluate_with(pw, qw, scratch)),
    );
}
