use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{evaluate, summarize, train, PartitionReport, PartitionSummary, Split};
use crate::colorgrid::RasterImage;
use crate::descriptor::{extract_image, DescriptorSet, StreamKind};
use crate::encoding::{concat_encodings, encode as encode_set, fit_gmm, EncodedImage, GmmModel};
use crate::error::{Error, Result};
use crate::formats::{self, DescriptorHeader, DescriptorWriter};
use crate::linalg::RowMatrix;
use crate::pipeline::{Manifest, PipelineConfig};
use crate::reduction::{fit_pca, subsample_indices, PcaModel};
use crate::synthetic::{gradient_descriptors, GRADIENT_BINS};

pub const SPATIAL_FILE: &str = "spatial.dsc";
pub const CHANNEL_FILE: &str = "channel.dsc";
pub const GRADIENT_FILE: &str = "gradient.dsc";
pub const EXTRACT_ERRORS_FILE: &str = "extract_errors.csv";
pub const FIT_REPORT_FILE: &str = "fit_report.json";
pub const ENCODINGS_FILE: &str = "encodings.enc";
pub const REPORT_FILE: &str = "report.json";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const PER_CLASS_FILE: &str = "per_class.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractSummary {
    pub written: usize,
    /// `(image id, error message)` for every image that could not be described.
    pub skipped: Vec<(String, String)>,
}

struct Output {
    path: PathBuf,
    header: DescriptorHeader,
}

/// Decodes and describes manifest images in parallel batches, writing results in
/// manifest order. Failures are logged, listed in `errors_file` and skipped.
fn run_extraction<F>(
    manifest: &Manifest,
    batch_size: usize,
    outputs: &[Output],
    errors_path: &Path,
    strict: bool,
    describe: F,
) -> Result<ExtractSummary>
where
    F: Fn(&str, &RasterImage) -> Result<Vec<DescriptorSet>> + Sync,
{
    let mut writers = outputs
        .iter()
        .map(|o| {
            let h = o.header;
            DescriptorWriter::new(
                BufWriter::new(File::create(&o.path)?),
                h.stream,
                h.dim,
                h.patch_rows,
                h.patch_cols,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let images = manifest.images();
    let total = images.len();
    let mut summary = ExtractSummary {
        written: 0,
        skipped: Vec::new(),
    };
    for (b, batch) in images.chunks(batch_size.max(1)).enumerate() {
        let results: Vec<Result<Vec<DescriptorSet>>> = batch
            .par_iter()
            .map(|e| RasterImage::open(&e.path).and_then(|img| describe(&e.image_id, &img)))
            .collect();
        for (entry, res) in batch.iter().zip(results) {
            match res {
                Ok(sets) => {
                    for (w, s) in writers.iter_mut().zip(&sets) {
                        w.write(s)?;
                    }
                    summary.written += 1;
                }
                Err(e) => {
                    log::warn!("skipping {}: {e}", entry.image_id);
                    summary.skipped.push((entry.image_id.clone(), e.to_string()));
                }
            }
        }
        log::info!("described {}/{total} images", (b * batch_size + batch.len()).min(total));
    }
    for w in writers {
        w.finish()?;
    }
    let mut errs = csv::Writer::from_path(errors_path)?;
    errs.write_record(["image_path", "error"])?;
    for (id, msg) in &summary.skipped {
        errs.write_record([id, msg])?;
    }
    errs.flush()?;
    if strict && !summary.skipped.is_empty() {
        return Err(Error::input(format!(
            "{} of {total} images could not be described (see {})",
            summary.skipped.len(),
            errors_path.display()
        )));
    }
    Ok(summary)
}

/// Writes the spatial and channel descriptor files for every manifest image.
pub fn extract(cfg: &PipelineConfig, manifest: &Manifest, out_dir: &Path, strict: bool) -> Result<ExtractSummary> {
    cfg.validate()?;
    let ex = cfg.extraction()?;
    std::fs::create_dir_all(out_dir)?;
    let header = |stream, dim| DescriptorHeader {
        stream,
        dim,
        patch_rows: ex.patch_rows(),
        patch_cols: ex.patch_cols(),
        count: 0,
    };
    let outputs = [
        Output {
            path: out_dir.join(SPATIAL_FILE),
            header: header(StreamKind::Spatial, ex.spatial_dim()),
        },
        Output {
            path: out_dir.join(CHANNEL_FILE),
            header: header(StreamKind::Channel, ex.channel_dim()),
        },
    ];
    run_extraction(
        manifest,
        cfg.batch_size,
        &outputs,
        &out_dir.join(EXTRACT_ERRORS_FILE),
        strict,
        |id, img| {
            let (s, c) = extract_image(id, img, &ex)?;
            Ok(vec![s, c])
        },
    )
}

/// Writes a luminance-gradient external stream on the same patch lattice.
pub fn extract_gradient(
    cfg: &PipelineConfig,
    manifest: &Manifest,
    out_dir: &Path,
    strict: bool,
) -> Result<ExtractSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let outputs = [Output {
        path: out_dir.join(GRADIENT_FILE),
        header: DescriptorHeader {
            stream: StreamKind::External,
            dim: 9 * GRADIENT_BINS,
            patch_rows: cfg.grid_rows - 2,
            patch_cols: cfg.grid_cols - 2,
            count: 0,
        },
    }];
    let resize = (cfg.resize_width, cfg.resize_height);
    let errors = out_dir.join("gradient_errors.csv");
    run_extraction(manifest, cfg.batch_size, &outputs, &errors, strict, |id, img| {
        Ok(vec![gradient_descriptors(
            id,
            img,
            resize,
            cfg.grid_rows,
            cfg.grid_cols,
        )?])
    })
}

/// Name, descriptor file and external flag of every stream: the configured colour
/// streams, then externals in order.
fn streams(cfg: &PipelineConfig, out_dir: &Path, externals: &[PathBuf]) -> Result<Vec<(String, PathBuf, bool)>> {
    let mut v: Vec<(String, PathBuf, bool)> = cfg
        .streams
        .iter()
        .map(|s| {
            let file = if *s == StreamKind::Spatial {
                SPATIAL_FILE
            } else {
                CHANNEL_FILE
            };
            (s.name().to_string(), out_dir.join(file), false)
        })
        .collect();
    v.extend(
        externals
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("external{i}"), p.clone(), true)),
    );
    if v.is_empty() {
        return Err(Error::config("no descriptor streams selected"));
    }
    Ok(v)
}

pub fn pca_path(out_dir: &Path, stream: &str) -> PathBuf {
    out_dir.join(format!("{stream}.pca"))
}

pub fn gmm_path(out_dir: &Path, stream: &str) -> PathBuf {
    out_dir.join(format!("{stream}.gmm"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamFit {
    pub stream: String,
    pub input_dim: usize,
    pub output_dim: usize,
    pub train_images: usize,
    pub pca_samples: usize,
    pub gmm_samples: usize,
    pub gmm_iterations: usize,
    pub gmm_converged: bool,
    pub gmm_log_likelihood: f64,
}

/// Partition whose train split fits the models.
fn fit_dataset_ids(cfg: &PipelineConfig, manifest: &Manifest) -> Result<HashSet<String>> {
    let partition = match &cfg.fit_partition {
        Some(p) => p.clone(),
        None => manifest.partitions().remove(0),
    };
    let ds = manifest.dataset(&partition)?;
    Ok(ds.split(Split::Train).map(|i| i.image_id.clone()).collect())
}

fn fit_stream(
    cfg: &PipelineConfig,
    name: &str,
    path: &Path,
    train_ids: &HashSet<String>,
    stream_index: u64,
    external: bool,
) -> Result<(PcaModel, GmmModel, StreamFit)> {
    let header = formats::open_descriptors(path)?.header();
    let output_dim = if external {
        cfg.pca_dim.min(header.dim)
    } else if cfg.pca_dim > header.dim {
        return Err(Error::config(format!(
            "pca_dim {} exceeds the {name} stream dim {}",
            cfg.pca_dim, header.dim
        )));
    } else {
        cfg.pca_dim
    };

    // pass 1: count training images present in the file
    let mut present = 0usize;
    for set in formats::open_descriptors(path)? {
        if train_ids.contains(&set?.image_id) {
            present += 1;
        }
    }
    if present == 0 {
        return Err(Error::input(format!("{name} stream has no train-split images")));
    }
    if present < train_ids.len() {
        log::warn!("{name} stream is missing {} train images", train_ids.len() - present);
    }
    let per_image = header.patch_rows * header.patch_cols;
    let total = present * per_image;
    let seed = cfg.seed.wrapping_add(2 * stream_index);
    let pca_idx = subsample_indices(total, cfg.pca_sample_cap, seed);
    let gmm_idx = subsample_indices(total, cfg.gmm_sample_cap, seed.wrapping_add(1));

    // pass 2: gather the sampled train descriptors
    let mut pca_rows = RowMatrix::with_cols(header.dim);
    let mut gmm_raw: Vec<f32> = Vec::with_capacity(gmm_idx.len() * header.dim);
    let (mut pi, mut gi, mut offset) = (0usize, 0usize, 0usize);
    let mut row = Vec::with_capacity(header.dim);
    for set in formats::open_descriptors(path)? {
        let set = set?;
        if !train_ids.contains(&set.image_id) {
            continue;
        }
        let end = offset + per_image;
        while pi < pca_idx.len() && pca_idx[pi] < end {
            row.clear();
            row.extend(set.descriptor(pca_idx[pi] - offset).iter().map(|&v| f64::from(v)));
            pca_rows.push_row(&row)?;
            pi += 1;
        }
        while gi < gmm_idx.len() && gmm_idx[gi] < end {
            gmm_raw.extend_from_slice(set.descriptor(gmm_idx[gi] - offset));
            gi += 1;
        }
        offset = end;
    }

    let pca = fit_pca(&pca_rows, &cfg.pca(output_dim, seed))?;
    let projected = gmm_raw
        .par_chunks(header.dim)
        .map(|d| {
            let mut out = Vec::with_capacity(output_dim);
            pca.project_f32(d, &mut out).map(|_| out)
        })
        .collect::<Result<Vec<_>>>()?;
    let gmm_samples = RowMatrix::from_rows(&projected)?;
    let (gmm, report) = fit_gmm(&gmm_samples, &cfg.gmm(seed.wrapping_add(1)))?;
    log::info!(
        "{name}: PCA {}->{output_dim} on {} samples, GMM K={} in {} iterations",
        header.dim,
        pca_rows.rows(),
        gmm.components(),
        report.iterations
    );
    let fit = StreamFit {
        stream: name.to_string(),
        input_dim: header.dim,
        output_dim,
        train_images: present,
        pca_samples: pca_rows.rows(),
        gmm_samples: gmm_samples.rows(),
        gmm_iterations: report.iterations,
        gmm_converged: report.converged,
        gmm_log_likelihood: *report.log_likelihood.last().unwrap_or(&f64::NAN),
    };
    Ok((pca, gmm, fit))
}

/// Fits PCA and GMM per stream on train-split descriptors only.
pub fn fit(cfg: &PipelineConfig, manifest: &Manifest, out_dir: &Path, externals: &[PathBuf]) -> Result<Vec<StreamFit>> {
    cfg.validate()?;
    let train_ids = fit_dataset_ids(cfg, manifest)?;
    let mut fits = Vec::new();
    for (i, (name, path, external)) in streams(cfg, out_dir, externals)?.iter().enumerate() {
        let (pca, gmm, fit) = fit_stream(cfg, name, path, &train_ids, i as u64, *external)?;
        formats::save_pca(pca_path(out_dir, name), &pca)?;
        formats::save_gmm(gmm_path(out_dir, name), &gmm)?;
        fits.push(fit);
    }
    std::fs::write(
        out_dir.join(FIT_REPORT_FILE),
        serde_json::to_string_pretty(&fits)? + "\n",
    )?;
    Ok(fits)
}

fn encode_descriptor_set(
    cfg: &PipelineConfig,
    pca: &PcaModel,
    gmm: &GmmModel,
    set: &DescriptorSet,
) -> Result<Vec<f64>> {
    let mut m = RowMatrix::with_cols(pca.output_dim());
    let mut buf = Vec::with_capacity(pca.output_dim());
    for d in set.iter() {
        pca.project_f32(d, &mut buf)?;
        m.push_row(&buf)?;
    }
    encode_set(cfg.encoding, gmm, &m)
}

type IdVectors = Vec<(String, Vec<f64>)>;

/// Encodes every image of one stream file; returns `(image id, vector)` in file order.
fn encode_stream(cfg: &PipelineConfig, name: &str, path: &Path, out_dir: &Path) -> Result<(usize, IdVectors)> {
    let pca = formats::load_pca(pca_path(out_dir, name))?;
    let gmm = formats::load_gmm(gmm_path(out_dir, name))?;
    let reader = formats::open_descriptors(path)?;
    let header = reader.header();
    if header.dim != pca.input_dim() || pca.output_dim() != gmm.dim() {
        return Err(Error::input(format!(
            "{name}: descriptor dim {} / PCA {}->{} / GMM dim {} are inconsistent",
            header.dim,
            pca.input_dim(),
            pca.output_dim(),
            gmm.dim()
        )));
    }
    let mut out = Vec::with_capacity(header.count);
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut reader = reader.peekable();
    while reader.peek().is_some() {
        batch.clear();
        for set in reader.by_ref().take(cfg.batch_size) {
            batch.push(set?);
        }
        let encoded = batch
            .par_iter()
            .map(|s| encode_descriptor_set(cfg, &pca, &gmm, s).map(|v| (s.image_id.clone(), v)))
            .collect::<Result<Vec<_>>>()?;
        out.extend(encoded);
    }
    Ok((cfg.encoding.output_dim(&gmm), out))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodeSummary {
    pub images: usize,
    pub dim: usize,
}

/// Encodes each stream separately and concatenates them per image, re-normalized.
/// Images follow the first stream's order.
pub fn encode(cfg: &PipelineConfig, out_dir: &Path, externals: &[PathBuf]) -> Result<EncodeSummary> {
    cfg.validate()?;
    let mut order: Vec<String> = Vec::new();
    let mut per_stream: Vec<HashMap<String, Vec<f64>>> = Vec::new();
    let mut dim = 0;
    let streams_named = streams(cfg, out_dir, externals)?;
    for (i, (name, path, _)) in streams_named.iter().enumerate() {
        let (d, items) = encode_stream(cfg, name, path, out_dir)?;
        dim += d;
        if i == 0 {
            order = items.iter().map(|(id, _)| id.clone()).collect();
        }
        let n = items.len();
        let map: HashMap<String, Vec<f64>> = items.into_iter().collect();
        if map.len() != n {
            return Err(Error::input(format!("{name} stream lists an image more than once")));
        }
        per_stream.push(map);
    }
    let mut missing: Vec<String> = Vec::new();
    for (map, (name, _, _)) in per_stream.iter().zip(&streams_named).skip(1) {
        for id in &order {
            if !map.contains_key(id) {
                missing.push(format!("{id} ({name})"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::input(format!(
            "images missing from streams: {}",
            missing.join(", ")
        )));
    }
    let mut fused = Vec::with_capacity(order.len());
    for id in &order {
        let parts: Vec<EncodedImage> = per_stream
            .iter_mut()
            .map(|m| EncodedImage {
                image_id: id.clone(),
                vector: m.remove(id).expect("checked above"),
            })
            .collect();
        fused.push(concat_encodings(&parts)?);
    }
    formats::save_encodings(out_dir.join(ENCODINGS_FILE), dim, &fused)?;
    Ok(EncodeSummary {
        images: fused.len(),
        dim,
    })
}

fn gather(
    encodings: &HashMap<String, Vec<f64>>,
    items: &[(String, String)],
    dim: usize,
) -> Result<(RowMatrix, Vec<String>)> {
    let missing: Vec<&str> = items
        .iter()
        .filter(|(id, _)| !encodings.contains_key(id))
        .map(|(id, _)| id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::input(format!("no encoding for images: {}", missing.join(", "))));
    }
    let mut m = RowMatrix::with_cols(dim);
    for (id, _) in items {
        m.push_row(&encodings[id])?;
    }
    Ok((m, items.iter().map(|(_, l)| l.clone()).collect()))
}

/// Trains and evaluates a classifier per partition and writes the reports.
pub fn train_eval(cfg: &PipelineConfig, manifest: &Manifest, out_dir: &Path) -> Result<PartitionSummary> {
    cfg.validate()?;
    let (dim, items) = formats::load_encodings(out_dir.join(ENCODINGS_FILE))?;
    let encodings: HashMap<String, Vec<f64>> = items.into_iter().map(|e| (e.image_id, e.vector)).collect();
    let mut reports = Vec::new();
    for partition in manifest.partitions() {
        let ds = manifest.dataset(&partition)?;
        let pick = |s: Split| -> Vec<(String, String)> {
            ds.split(s).map(|i| (i.image_id.clone(), i.label.clone())).collect()
        };
        let (xtr, ytr) = gather(&encodings, &pick(Split::Train), dim)?;
        let (xte, yte) = gather(&encodings, &pick(cfg.evaluate_on), dim)?;
        let model = train(&xtr, &ytr, &cfg.svm())?;
        let report = evaluate(&model, &xte, &yte)?;
        log::info!(
            "partition {partition:?}: accuracy {:.4}, mAP {:.4}",
            report.accuracy,
            report.mean_average_precision
        );
        reports.push(PartitionReport { partition, report });
    }
    let summary = summarize(reports)?;
    std::fs::write(
        out_dir.join(REPORT_FILE),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    write_report_csvs(&summary, out_dir)?;
    Ok(summary)
}

fn csv_name(base: &str, partition: &str, multiple: bool) -> String {
    if multiple {
        let (stem, ext) = base.rsplit_once('.').unwrap_or((base, "csv"));
        format!("{stem}_{partition}.{ext}")
    } else {
        base.to_string()
    }
}

/// Confusion matrix and per-class CSVs, suffixed by partition when there are several.
pub fn write_report_csvs(summary: &PartitionSummary, out_dir: &Path) -> Result<()> {
    let multiple = summary.partitions.len() > 1;
    for p in &summary.partitions {
        std::fs::write(
            out_dir.join(csv_name(CONFUSION_FILE, &p.partition, multiple)),
            p.report.confusion_csv(),
        )?;
        std::fs::write(
            out_dir.join(csv_name(PER_CLASS_FILE, &p.partition, multiple)),
            p.report.per_class_csv(),
        )?;
    }
    Ok(())
}

/// Reads a written report, re-emits its CSVs and returns a readable summary.
pub fn report(out_dir: &Path) -> Result<String> {
    let text = std::fs::read_to_string(out_dir.join(REPORT_FILE))?;
    let summary: PartitionSummary = serde_json::from_str(&text)?;
    write_report_csvs(&summary, out_dir)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "accuracy {:.2}% ± {:.2}  mAP {:.2}% ± {:.2}  ({} partition{})",
        100.0 * summary.accuracy_mean,
        100.0 * summary.accuracy_std,
        100.0 * summary.map_mean,
        100.0 * summary.map_std,
        summary.partitions.len(),
        if summary.partitions.len() == 1 { "" } else { "s" }
    );
    for p in &summary.partitions {
        if summary.partitions.len() > 1 {
            let _ = writeln!(s, "\npartition {}", p.partition);
        }
        let width = p.report.classes.iter().map(String::len).max().unwrap_or(5).max(5);
        let _ = writeln!(s, "{:width$}  {:>5}  {:>8}  {:>8}", "class", "n", "accuracy", "AP");
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}%", 100.0 * x));
        for c in &p.report.per_class {
            let _ = writeln!(
                s,
                "{:width$}  {:>5}  {:>8}  {:>8}",
                c.class,
                c.test_count,
                pct(c.accuracy),
                pct(c.average_precision)
            );
        }
    }
    Ok(s)
}
