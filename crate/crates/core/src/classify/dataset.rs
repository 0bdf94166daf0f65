use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::input(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledItem {
    pub image_id: String,
    pub label: String,
    pub split: Split,
}

/// Labelled images with a train/test assignment.
///
/// No image may be in both splits and every class needs at least one image in each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    items: Vec<LabeledItem>,
}

impl LabeledDataset {
    pub fn new(items: Vec<LabeledItem>) -> Result<Self> {
        let mut seen: HashMap<&str, (&str, Split)> = HashMap::new();
        for it in &items {
            if let Some(&(label, split)) = seen.get(it.image_id.as_str()) {
                if split != it.split {
                    return Err(Error::input(format!(
                        "image {:?} appears in both train and test splits",
                        it.image_id
                    )));
                }
                if label != it.label {
                    return Err(Error::input(format!("image {:?} has two labels", it.image_id)));
                }
                return Err(Error::input(format!("image {:?} is listed twice", it.image_id)));
            }
            seen.insert(&it.image_id, (&it.label, it.split));
        }
        let mut per_class: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for it in &items {
            let e = per_class.entry(&it.label).or_default();
            match it.split {
                Split::Train => e.0 += 1,
                Split::Test => e.1 += 1,
            }
        }
        if let Some((label, _)) = per_class.iter().find(|(_, (tr, te))| *tr == 0 || *te == 0) {
            return Err(Error::input(format!(
                "class {label:?} needs at least one train and one test image"
            )));
        }
        Ok(LabeledDataset { items })
    }

    pub fn items(&self) -> &[LabeledItem] {
        &self.items
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<String> {
        self.items
            .iter()
            .map(|i| i.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &LabeledItem> + '_ {
        self.items.iter().filter(move |i| i.split == split)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str, label: &str, split: Split) -> LabeledItem {
        LabeledItem {
            image_id: id.into(),
            label: label.into(),
            split,
        }
    }

    #[test]
    fn valid_dataset() {
        let ds = LabeledDataset::new(vec![
            item("a", "x", Split::Train),
            item("b", "x", Split::Test),
            item("c", "y", Split::Train),
            item("d", "y", Split::Test),
        ])
        .unwrap();
        assert_eq!(ds.classes(), vec!["x", "y"]);
        assert_eq!(ds.split(Split::Train).count(), 2);
    }

    #[test]
    fn leakage_rejected() {
        let err = LabeledDataset::new(vec![
            item("a", "x", Split::Train),
            item("a", "x", Split::Test),
            item("b", "x", Split::Test),
        ]);
        assert!(matches!(err, Err(Error::InvalidInput(m)) if m.contains("both")));
    }

    #[test]
    fn class_without_test_rejected() {
        let err = LabeledDataset::new(vec![item("a", "x", Split::Train), item("b", "y", Split::Test)]);
        assert!(err.is_err());
    }
}
