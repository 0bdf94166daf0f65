use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classify::LinearModel;
use crate::error::{Error, Result};
use crate::linalg::RowMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: String,
    pub test_count: usize,
    /// Fraction of this class's test items predicted correctly; `None` without test items.
    pub accuracy: Option<f64>,
    /// Average precision of this class's decision scores; `None` if the class was not
    /// trained or has no test items.
    pub average_precision: Option<f64>,
}

/// Evaluation of one classifier on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Trained classes in model order, followed by any test-only classes.
    pub classes: Vec<String>,
    pub test_count: usize,
    pub accuracy: f64,
    pub mean_average_precision: f64,
    pub per_class: Vec<ClassStats>,
    /// `confusion[truth][predicted]` over `classes`.
    pub confusion: Vec<Vec<usize>>,
}

impl Report {
    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("truth\\predicted");
        for c in &self.classes {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            out.push_str(&csv_field(c));
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Per-class accuracy and AP, one row per class, for bar charts.
    pub fn per_class_csv(&self) -> String {
        let mut out = String::from("class,test_count,accuracy,average_precision\n");
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        for s in &self.per_class {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                csv_field(&s.class),
                s.test_count,
                fmt(s.accuracy),
                fmt(s.average_precision)
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Average precision of `scores` for the items flagged in `positive`.
///
/// Items are ranked by descending score, ties by ascending index. `None` when there are
/// no positives.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let total = positive.iter().filter(|&&p| p).count();
    if total == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if positive[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

/// Scores `samples` and compares predictions to `labels`.
///
/// Test labels unknown to the model are kept as extra confusion rows (they can never be
/// predicted) and a warning is logged.
pub fn evaluate(model: &LinearModel, samples: &RowMatrix, labels: &[String]) -> Result<Report> {
    if samples.rows() != labels.len() {
        return Err(Error::input("sample and label counts differ"));
    }
    if samples.is_empty() {
        return Err(Error::input("test set is empty"));
    }
    let mut classes = model.classes.clone();
    for l in labels {
        if !classes.contains(l) {
            log::warn!("test class {l:?} was not seen in training; scoring against trained classes only");
            classes.push(l.clone());
        }
    }
    let trained = model.classes.len();
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    let mut scores: Vec<Vec<f64>> = Vec::with_capacity(labels.len());
    let truth: Vec<usize> = labels
        .iter()
        .map(|l| classes.iter().position(|c| c == l).expect("label registered"))
        .collect();
    for (x, &t) in samples.iter_rows().zip(&truth) {
        let s = model.scores(x)?;
        confusion[t][super::svm::argmax(&s)] += 1;
        scores.push(s);
    }

    let mut per_class = Vec::with_capacity(classes.len());
    let mut ap_values = Vec::new();
    for (c, name) in classes.iter().enumerate() {
        let test_count: usize = confusion[c].iter().sum();
        let accuracy = (test_count > 0).then(|| confusion[c][c] as f64 / test_count as f64);
        let average_precision = if c < trained {
            let col: Vec<f64> = scores.iter().map(|s| s[c]).collect();
            let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            average_precision(&col, &pos)
        } else {
            None
        };
        ap_values.extend(average_precision);
        per_class.push(ClassStats {
            class: name.clone(),
            test_count,
            accuracy,
            average_precision,
        });
    }
    let correct: usize = (0..classes.len()).map(|c| confusion[c][c]).sum();
    let mean_average_precision = if ap_values.is_empty() {
        0.0
    } else {
        ap_values.iter().sum::<f64>() / ap_values.len() as f64
    };
    Ok(Report {
        classes,
        test_count: labels.len(),
        accuracy: correct as f64 / labels.len() as f64,
        mean_average_precision,
        per_class,
        confusion,
    })
}

/// For each `(a, b)`: (a mistaken for b + b mistaken for a) / (test items of a and b).
pub fn confusion_pairs(report: &Report, pairs: &[(String, String)]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|(a, b)| {
            let ia = report
                .class_index(a)
                .ok_or_else(|| Error::input(format!("unknown class {a:?}")))?;
            let ib = report
                .class_index(b)
                .ok_or_else(|| Error::input(format!("unknown class {b:?}")))?;
            let n: usize = report.confusion[ia].iter().sum::<usize>() + report.confusion[ib].iter().sum::<usize>();
            if n == 0 {
                return Ok(0.0);
            }
            Ok((report.confusion[ia][ib] + report.confusion[ib][ia]) as f64 / n as f64)
        })
        .collect()
}

/// Reports over several train/test partitions with mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub partitions: Vec<PartitionReport>,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub map_mean: f64,
    pub map_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub partition: String,
    pub report: Report,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(partitions: Vec<PartitionReport>) -> Result<PartitionSummary> {
    if partitions.is_empty() {
        return Err(Error::input("no partitions to summarize"));
    }
    let acc: Vec<f64> = partitions.iter().map(|p| p.report.accuracy).collect();
    let map: Vec<f64> = partitions.iter().map(|p| p.report.mean_average_precision).collect();
    let (accuracy_mean, accuracy_std) = mean_std(&acc);
    let (map_mean, map_std) = mean_std(&map);
    Ok(PartitionSummary {
        partitions,
        accuracy_mean,
        accuracy_std,
        map_mean,
        map_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Identity "classifier" over one-hot vectors.
    fn oracle_model(classes: &[&str]) -> LinearModel {
        let k = classes.len();
        LinearModel {
            classes: classes.iter().map(|s| s.to_string()).collect(),
            dim: k,
            weights: (0..k)
                .map(|c| {
                    let mut w = vec![0.0; k + 1];
                    w[c] = 1.0;
                    w
                })
                .collect(),
        }
    }

    fn one_hot(idx: &[usize], k: usize) -> RowMatrix {
        let rows: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        RowMatrix::from_rows(&rows).unwrap()
    }

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn perfect_model() {
        let m = oracle_model(&["a", "b", "c"]);
        let x = one_hot(&[0, 1, 2, 2, 0], 3);
        let r = evaluate(&m, &x, &labels(&["a", "b", "c", "c", "a"])).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.mean_average_precision, 1.0);
        for (i, row) in r.confusion.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i != j {
                    assert_eq!(v, 0);
                }
            }
        }
        let pairs = confusion_pairs(&r, &[("a".into(), "b".into()), ("b".into(), "c".into())]).unwrap();
        assert_eq!(pairs, vec![0.0, 0.0]);
    }

    #[test]
    fn confusion_rows_count_test_items_and_accuracy_is_trace_ratio() {
        let m = oracle_model(&["a", "b"]);
        let x = one_hot(&[0, 1, 1, 0, 1], 2);
        let y = labels(&["a", "a", "b", "b", "b"]);
        let r = evaluate(&m, &x, &y).unwrap();
        assert_eq!(r.confusion, vec![vec![1, 1], vec![1, 2]]);
        let trace = (r.confusion[0][0] + r.confusion[1][1]) as f64;
        assert_eq!(r.accuracy, trace / 5.0);
        assert_eq!(r.per_class[0].test_count, 2);
        assert_eq!(r.per_class[1].test_count, 3);
    }

    #[test]
    fn hand_counted_pair_error() {
        let m = oracle_model(&["A", "B"]);
        let x = one_hot(&[0, 1, 1, 1], 2);
        let r = evaluate(&m, &x, &labels(&["A", "A", "B", "B"])).unwrap();
        let rate = confusion_pairs(&r, &[("A".into(), "B".into())]).unwrap();
        assert_eq!(rate, vec![0.25]);
        assert!(confusion_pairs(&r, &[("A".into(), "Z".into())]).is_err());
    }

    #[test]
    fn unseen_test_class_is_kept_as_row() {
        let m = oracle_model(&["a", "b"]);
        let x = one_hot(&[0, 1, 1], 2);
        let r = evaluate(&m, &x, &labels(&["a", "b", "z"])).unwrap();
        assert_eq!(r.classes, vec!["a", "b", "z"]);
        assert_eq!(r.confusion[2], vec![0, 1, 0]);
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_class[2].average_precision, None);
    }

    #[test]
    fn average_precision_hand_cases() {
        assert_eq!(
            average_precision(&[0.9, 0.8, 0.1], &[true, false, true]),
            Some((1.0 + 2.0 / 3.0) / 2.0)
        );
        assert_eq!(average_precision(&[0.1, 0.2], &[false, false]), None);
    }

    #[test]
    fn random_scorer_map_is_near_half() {
        // Monte-Carlo oracle: AP of random scores on balanced data concentrates near 0.5
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let trials = 200;
        let mut total = 0.0;
        for _ in 0..trials {
            let pos: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
            let s: Vec<f64> = (0..200).map(|_| rng.random()).collect();
            let neg: Vec<bool> = pos.iter().map(|p| !p).collect();
            let ap = (average_precision(&s, &pos).unwrap()
                + average_precision(&s.iter().map(|v| -v).collect::<Vec<_>>(), &neg).unwrap())
                / 2.0;
            total += ap;
        }
        let map = total / trials as f64;
        assert!((map - 0.5).abs() < 0.1, "{map}");
    }

    #[test]
    fn identical_partitions_have_zero_spread() {
        let m = oracle_model(&["a", "b"]);
        let r = evaluate(&m, &one_hot(&[0, 0], 2), &labels(&["a", "b"])).unwrap();
        let s = summarize(vec![
            PartitionReport {
                partition: "1".into(),
                report: r.clone(),
            },
            PartitionReport {
                partition: "2".into(),
                report: r,
            },
        ])
        .unwrap();
        assert_eq!(s.accuracy_std, 0.0);
        assert_eq!(s.map_std, 0.0);
        assert_eq!(s.accuracy_mean, 0.5);
    }

    #[test]
    fn csv_outputs() {
        let m = oracle_model(&["a", "b"]);
        let r = evaluate(&m, &one_hot(&[0, 1], 2), &labels(&["a", "b"])).unwrap();
        assert_eq!(r.confusion_csv(), "truth\\predicted,a,b\na,1,0\nb,0,1\n");
        assert!(r
            .per_class_csv()
            .starts_with("class,test_count,accuracy,average_precision\na,1,1,1\n"));
    }
}
