use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::classify::{LabeledDataset, LabeledItem, Split};
use crate::error::{Error, Result};

/// One row of a label manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// The path as written in the manifest; used as the image id in every artifact.
    pub image_id: String,
    /// `image_id` resolved against the manifest's directory.
    pub path: PathBuf,
    pub label: String,
    pub split: Split,
    /// Empty when the manifest has no partition column.
    pub partition: String,
}

/// CSV of `image_path,label,split[,partition]`, optionally with that header row.
///
/// An image may be listed once per partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for (n, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            if n == 0 && rec.get(0) == Some("image_path") {
                continue;
            }
            if rec.len() < 3 || rec.len() > 4 {
                return Err(Error::input(format!(
                    "manifest line {}: expected image_path,label,split[,partition]",
                    n + 1
                )));
            }
            let image_id = rec[0].to_string();
            if image_id.is_empty() || rec[1].is_empty() {
                return Err(Error::input(format!("manifest line {}: empty path or label", n + 1)));
            }
            entries.push(ManifestEntry {
                path: base.join(&image_id),
                image_id,
                label: rec[1].to_string(),
                split: rec[2].parse()?,
                partition: rec.get(3).unwrap_or("").to_string(),
            });
        }
        if entries.is_empty() {
            return Err(Error::input("manifest lists no images"));
        }
        let manifest = Manifest { entries };
        for p in manifest.partitions() {
            manifest.dataset(&p)?;
        }
        Ok(manifest)
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    /// Distinct images in order of first appearance.
    pub fn images(&self) -> Vec<&ManifestEntry> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.image_id.as_str()))
            .collect()
    }

    /// Partition names in order of first appearance.
    pub fn partitions(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.partition.as_str()))
            .map(|e| e.partition.clone())
            .collect()
    }

    /// The labelled train/test assignment of one partition, validated against leakage.
    pub fn dataset(&self, partition: &str) -> Result<LabeledDataset> {
        let items: Vec<LabeledItem> = self
            .entries
            .iter()
            .filter(|e| e.partition == partition)
            .map(|e| LabeledItem {
                image_id: e.image_id.clone(),
                label: e.label.clone(),
                split: e.split,
            })
            .collect();
        if items.is_empty() {
            return Err(Error::input(format!("manifest has no partition {partition:?}")));
        }
        LabeledDataset::new(items).map_err(|e| match e {
            Error::InvalidInput(m) if !partition.is_empty() => {
                Error::InvalidInput(format!("partition {partition:?}: {m}"))
            }
            other => other,
        })
    }
}
