//! Binary classification metrics and dataset splits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sample {index} has no project_id")]
    ProjectFieldMissing { index: usize },
    #[error("cannot make {k} folds from {n} samples")]
    InvalidFoldCount { k: usize, n: usize },
    #[error("cannot hold out {holdout} of {projects} projects")]
    InvalidProjectHoldout { holdout: usize, projects: usize },
    #[error("test fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    /// Count `(predicted, actual)` pairs, 1 being the positive class.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u8, u8)>) -> Self {
        let mut c = Self::default();
        for (predicted, actual) in pairs {
            match (predicted == 1, actual == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
}

impl Scores {
    fn fields(&self) -> [f64; 5] {
        [self.accuracy, self.precision, self.recall, self.f1, self.mcc]
    }

    fn from_fields(f: [f64; 5]) -> Self {
        Scores {
            accuracy: f[0],
            precision: f[1],
            recall: f[2],
            f1: f[3],
            mcc: f[4],
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Accuracy, precision, recall, F1 and MCC. Any metric whose denominator
/// is zero is reported as 0.
pub fn score(c: &ConfusionCounts) -> Result<Scores, MetricsError> {
    if c.total() == 0 {
        return Err(MetricsError::EmptyEvaluation);
    }
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let mcc_den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    Ok(Scores {
        accuracy: (tp + tn) / (tp + fp + tn + fn_),
        precision,
        recall,
        f1: ratio(2.0 * precision * recall, precision + recall),
        mcc: ratio(tp * tn - fp * fn_, mcc_den),
    })
}

/// Per-fold scores with their mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub per_fold: Vec<Scores>,
    pub mean: Scores,
    pub std: Scores,
}

pub fn summarize(per_fold: Vec<Scores>) -> Result<Summary, MetricsError> {
    if per_fold.is_empty() {
        return Err(MetricsError::EmptyEvaluation);
    }
    let n = per_fold.len() as f64;
    let mut mean = [0.0; 5];
    for s in &per_fold {
        for (m, v) in mean.iter_mut().zip(s.fields()) {
            *m += v / n;
        }
    }
    let mut var = [0.0; 5];
    for s in &per_fold {
        for ((acc, v), m) in var.iter_mut().zip(s.fields()).zip(mean) {
            *acc += (v - m) * (v - m) / n;
        }
    }
    Ok(Summary {
        per_fold,
        mean: Scores::from_fields(mean),
        std: Scores::from_fields(var.map(f64::sqrt)),
    })
}

/// Aligned plain-text table, one row per fold plus `mean±std`.
pub fn format_table(summary: &Summary) -> String {
    let mut out = format!(
        "{:<8} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "fold", "accuracy", "precision", "recall", "f1", "mcc"
    );
    for (i, s) in summary.per_fold.iter().enumerate() {
        let _ = write!(out, "{:<8}", i + 1);
        for v in s.fields() {
            let _ = write!(out, " {v:>9.4}");
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<8}", "mean");
    for (m, s) in summary.mean.fields().iter().zip(summary.std.fields()) {
        let _ = write!(out, " {:>9}", format!("{m:.4}±{s:.4}"));
    }
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitScheme {
    /// Stratified single split; the classic setting is 0.2.
    Holdout { test_fraction: f64 },
    /// Stratified k-fold.
    KFold(usize),
    /// Whole projects held out for testing.
    ByProject { holdout: usize },
}

impl SplitScheme {
    pub const HOLDOUT_80_20: SplitScheme = SplitScheme::Holdout { test_fraction: 0.2 };
}

/// Something that can be split: a binary label and optionally a project.
pub trait SplitItem {
    fn label(&self) -> u8;
    fn project_id(&self) -> Option<&str>;
}

impl SplitItem for (u8, Option<String>) {
    fn label(&self) -> u8 {
        self.0
    }

    fn project_id(&self) -> Option<&str> {
        self.1.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn by_label<T: SplitItem>(items: &[T]) -> BTreeMap<u8, Vec<usize>> {
    let mut classes: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        classes.entry(item.label()).or_default().push(i);
    }
    classes
}

fn fold_from_test(n: usize, mut test: Vec<usize>) -> Fold {
    test.sort_unstable();
    let mut in_test = vec![false; n];
    for &i in &test {
        in_test[i] = true;
    }
    Fold {
        train: (0..n).filter(|&i| !in_test[i]).collect(),
        test,
    }
}

/// Split item indices into train/test folds. Deterministic for a seed.
pub fn split<T: SplitItem>(items: &[T], scheme: SplitScheme, seed: u64) -> Result<Vec<Fold>, MetricsError> {
    let n = items.len();
    if n == 0 {
        return Err(MetricsError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match scheme {
        SplitScheme::Holdout { test_fraction } => {
            if !(test_fraction > 0.0 && test_fraction < 1.0) {
                return Err(MetricsError::InvalidFraction(test_fraction));
            }
            let mut test = Vec::new();
            for (_, mut members) in by_label(items) {
                members.shuffle(&mut rng);
                let take = (members.len() as f64 * test_fraction).round() as usize;
                test.extend_from_slice(&members[..take]);
            }
            Ok(vec![fold_from_test(n, test)])
        }
        SplitScheme::KFold(k) => {
            if k < 2 || k > n {
                return Err(MetricsError::InvalidFoldCount { k, n });
            }
            let mut order = Vec::with_capacity(n);
            for (_, mut members) in by_label(items) {
                members.shuffle(&mut rng);
                order.extend(members);
            }
            let mut tests = vec![Vec::new(); k];
            for (pos, idx) in order.into_iter().enumerate() {
                tests[pos % k].push(idx);
            }
            Ok(tests.into_iter().map(|t| fold_from_test(n, t)).collect())
        }
        SplitScheme::ByProject { holdout } => {
            let mut projects = Vec::with_capacity(n);
            for (index, item) in items.iter().enumerate() {
                let p = item
                    .project_id()
                    .filter(|p| !p.is_empty())
                    .ok_or(MetricsError::ProjectFieldMissing { index })?;
                projects.push(p);
            }
            let mut distinct: Vec<&str> = projects.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if holdout == 0 || holdout >= distinct.len() {
                return Err(MetricsError::InvalidProjectHoldout {
                    holdout,
                    projects: distinct.len(),
                });
            }
            distinct.shuffle(&mut rng);
            let held = &distinct[..holdout];
            let test = (0..n).filter(|&i| held.contains(&projects[i])).collect();
            Ok(vec![fold_from_test(n, test)])
        }
    }
}
