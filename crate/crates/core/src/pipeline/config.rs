use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::classify::{Split, SvmConfig};
use crate::descriptor::{ChannelPair, ExtractionConfig, StreamKind};
use crate::divergence::{DivergenceKind, SubspaceConfig};
use crate::encoding::{EncodingMode, GmmConfig};
use crate::error::{Error, Result};
use crate::reduction::PcaConfig;

/// Every tunable of the pipeline. Serialized as flat `key = value` lines with `#` comments.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub resize_width: usize,
    pub resize_height: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub bins: usize,
    pub subspace_window: usize,
    pub divergence: DivergenceKind,
    pub channel_pairs: Vec<ChannelPair>,
    /// Colour streams that enter fit and encode; external streams are added on top.
    pub streams: Vec<StreamKind>,
    pub pca_dim: usize,
    pub pca_whiten: bool,
    pub pca_sample_cap: usize,
    pub gmm_components: usize,
    pub gmm_max_iter: usize,
    pub gmm_tol: f64,
    pub gmm_sample_cap: usize,
    pub encoding: EncodingMode,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub seed: u64,
    /// Partition whose train split fits PCA and GMM; `None` takes the first in the manifest.
    pub fit_partition: Option<String>,
    /// Split scored by `train-eval`; `train` is only meaningful as an overfitting check.
    pub evaluate_on: Split,
    /// Images decoded and described concurrently per batch.
    pub batch_size: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let e = ExtractionConfig::default();
        let svm = SvmConfig::default();
        PipelineConfig {
            resize_width: e.resize.0,
            resize_height: e.resize.1,
            grid_rows: e.grid_rows,
            grid_cols: e.grid_cols,
            bins: e.bins,
            subspace_window: e.subspace.window(),
            divergence: e.kind,
            channel_pairs: e.pairs,
            streams: vec![StreamKind::Spatial, StreamKind::Channel],
            pca_dim: 80,
            pca_whiten: false,
            pca_sample_cap: 200_000,
            gmm_components: 32,
            gmm_max_iter: 100,
            gmm_tol: 1e-5,
            gmm_sample_cap: 200_000,
            encoding: EncodingMode::Fisher,
            svm_lambda: svm.lambda,
            svm_epochs: svm.epochs,
            seed: 0,
            fit_partition: None,
            evaluate_on: Split::Test,
            batch_size: 16,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!("bad value {value:?} for {key}"))),
    }
}

impl PipelineConfig {
    pub fn extraction(&self) -> Result<ExtractionConfig> {
        let cfg = ExtractionConfig {
            resize: (self.resize_width, self.resize_height),
            grid_rows: self.grid_rows,
            grid_cols: self.grid_cols,
            bins: self.bins,
            subspace: SubspaceConfig::new(self.subspace_window)?,
            kind: self.divergence,
            pairs: self.channel_pairs.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn pca(&self, output_dim: usize, seed: u64) -> PcaConfig {
        PcaConfig {
            output_dim,
            sample_cap: self.pca_sample_cap,
            seed,
            whiten: self.pca_whiten,
        }
    }

    pub fn gmm(&self, seed: u64) -> GmmConfig {
        GmmConfig {
            components: self.gmm_components,
            max_iter: self.gmm_max_iter,
            tol: self.gmm_tol,
            seed,
        }
    }

    pub fn svm(&self) -> SvmConfig {
        SvmConfig {
            lambda: self.svm_lambda,
            epochs: self.svm_epochs,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.extraction()?;
        if self.pca_dim == 0 || self.pca_dim > e.spatial_dim().min(e.channel_dim()) {
            return Err(Error::config(format!(
                "pca_dim {} must be in 1..={} (smallest raw stream dim)",
                self.pca_dim,
                e.spatial_dim().min(e.channel_dim())
            )));
        }
        if self.gmm_components == 0 || self.gmm_max_iter == 0 {
            return Err(Error::config("gmm_components and gmm_max_iter must be positive"));
        }
        if !(self.gmm_tol >= 0.0 && self.gmm_tol.is_finite()) {
            return Err(Error::config("gmm_tol must be a nonnegative number"));
        }
        if self.pca_sample_cap == 0 || self.gmm_sample_cap == 0 || self.batch_size == 0 {
            return Err(Error::config("sample caps and batch_size must be positive"));
        }
        if !(self.svm_lambda > 0.0 && self.svm_lambda.is_finite()) || self.svm_epochs == 0 {
            return Err(Error::config("svm_lambda and svm_epochs must be positive"));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "resize_width" => self.resize_width = parse(key, value)?,
            "resize_height" => self.resize_height = parse(key, value)?,
            "grid_rows" => self.grid_rows = parse(key, value)?,
            "grid_cols" => self.grid_cols = parse(key, value)?,
            "bins" => self.bins = parse(key, value)?,
            "subspace_window" => self.subspace_window = parse(key, value)?,
            "divergence" => self.divergence = value.parse()?,
            "channel_pairs" => {
                self.channel_pairs = value.split(',').map(str::parse).collect::<Result<Vec<ChannelPair>>>()?
            }
            "streams" => {
                self.streams = Vec::new();
                for name in value.split(',').map(str::trim).filter(|n| !n.is_empty()) {
                    let kind = match name {
                        "spatial" => StreamKind::Spatial,
                        "channel" => StreamKind::Channel,
                        _ => return Err(Error::config(format!("unknown stream {name:?}"))),
                    };
                    if !self.streams.contains(&kind) {
                        self.streams.push(kind);
                    }
                }
            }
            "pca_dim" => self.pca_dim = parse(key, value)?,
            "pca_whiten" => self.pca_whiten = parse_bool(key, value)?,
            "pca_sample_cap" => self.pca_sample_cap = parse(key, value)?,
            "gmm_components" => self.gmm_components = parse(key, value)?,
            "gmm_max_iter" => self.gmm_max_iter = parse(key, value)?,
            "gmm_tol" => self.gmm_tol = parse(key, value)?,
            "gmm_sample_cap" => self.gmm_sample_cap = parse(key, value)?,
            "encoding" => self.encoding = value.parse()?,
            "svm_lambda" => self.svm_lambda = parse(key, value)?,
            "svm_epochs" => self.svm_epochs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "fit_partition" => self.fit_partition = (!value.is_empty()).then(|| value.to_string()),
            "evaluate_on" => {
                self.evaluate_on = value
                    .parse()
                    .map_err(|_| Error::config(format!("bad value {value:?} for evaluate_on")))?
            }
            "batch_size" => self.batch_size = parse(key, value)?,
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Text form accepted by [`PipelineConfig::parse`]; every key is written.
    pub fn to_text(&self) -> String {
        let pairs: Vec<String> = self.channel_pairs.iter().map(ToString::to_string).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("resize_width", self.resize_width.to_string());
        kv("resize_height", self.resize_height.to_string());
        kv("grid_rows", self.grid_rows.to_string());
        kv("grid_cols", self.grid_cols.to_string());
        kv("bins", self.bins.to_string());
        kv("subspace_window", self.subspace_window.to_string());
        kv("divergence", self.divergence.to_string());
        kv("channel_pairs", pairs.join(","));
        let streams: Vec<&str> = self.streams.iter().map(|s| s.name()).collect();
        kv("streams", streams.join(","));
        kv("pca_dim", self.pca_dim.to_string());
        kv("pca_whiten", self.pca_whiten.to_string());
        kv("pca_sample_cap", self.pca_sample_cap.to_string());
        kv("gmm_components", self.gmm_components.to_string());
        kv("gmm_max_iter", self.gmm_max_iter.to_string());
        kv("gmm_tol", format!("{:e}", self.gmm_tol));
        kv("gmm_sample_cap", self.gmm_sample_cap.to_string());
        kv("encoding", self.encoding.to_string());
        kv("svm_lambda", format!("{:e}", self.svm_lambda));
        kv("svm_epochs", self.svm_epochs.to_string());
        kv("seed", self.seed.to_string());
        kv("fit_partition", self.fit_partition.clone().unwrap_or_default());
        kv("evaluate_on", self.evaluate_on.to_string());
        kv("batch_size", self.batch_size.to_string());
        s
    }
}
