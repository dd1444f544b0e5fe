//! Confusion matrices, per-class precision/recall/F1, averaged reports and
//! the strategy-comparison and summary tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label `{0}` is not one of the evaluated classes")]
    UnknownLabel(String),
    #[error("y_true has {0} labels but y_pred has {1}")]
    LengthMismatch(usize, usize),
    #[error("accuracy of an empty confusion matrix is undefined")]
    Empty,
    #[error("cannot average zero reports")]
    NoReports,
    #[error("class sets differ: {0:?} vs {1:?}")]
    ClassMismatch(Vec<String>, Vec<String>),
    #[error("report metadata differs: {0}")]
    MetadataMismatch(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("report schema version {found} is not supported (expected {expected})")]
    Schema { found: u32, expected: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// Rows are true labels, columns predictions.
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

impl ConfusionMatrix {
    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    /// Element-wise sum; both matrices must share the class order.
    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<(), EvalError> {
        if self.classes != other.classes {
            return Err(EvalError::ClassMismatch(self.classes.clone(), other.classes.clone()));
        }
        for (r, o) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in r.iter_mut().zip(o) {
                *a += b;
            }
        }
        self.n += other.n;
        Ok(())
    }
}

pub fn confusion<S: AsRef<str>>(y_true: &[S], y_pred: &[S], classes: &[String]) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let lookup = |s: &S| {
        index
            .get(s.as_ref())
            .copied()
            .ok_or_else(|| EvalError::UnknownLabel(s.as_ref().to_string()))
    };
    let k = classes.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (t, p) in y_true.iter().zip(y_pred) {
        counts[lookup(t)?][lookup(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
        n: y_true.len() as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: f64,
    /// Set when a metric's denominator was zero and it was reported as 0.
    #[serde(default)]
    pub precision_undefined: bool,
    #[serde(default)]
    pub recall_undefined: bool,
    #[serde(default)]
    pub f1_undefined: bool,
}

pub fn f1_score(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn class_metrics(cm: &ConfusionMatrix, c: usize) -> ClassMetrics {
    let tp = cm.counts[c][c];
    let predicted = cm.col_sum(c);
    let actual = cm.row_sum(c);
    let ratio = |num: u64, den: u64| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
    let (precision, precision_undefined) = ratio(tp, predicted);
    let (recall, recall_undefined) = ratio(tp, actual);
    ClassMetrics {
        precision,
        recall,
        f1: f1_score(precision, recall),
        support: actual as f64,
        precision_undefined,
        recall_undefined,
        f1_undefined: precision + recall == 0.0,
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    if cm.n == 0 {
        return Err(EvalError::Empty);
    }
    Ok(cm.trace() as f64 / cm.n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Unweighted (macro) and support-weighted means of per-class metrics.
pub fn aggregate(per_class: &[ClassMetrics]) -> (Averages, Averages) {
    let k = per_class.len().max(1) as f64;
    let total: f64 = per_class.iter().map(|m| m.support).sum();
    let mut macro_avg = Averages::default();
    let mut weighted = Averages::default();
    for m in per_class {
        macro_avg.precision += m.precision / k;
        macro_avg.recall += m.recall / k;
        macro_avg.f1 += m.f1 / k;
        if total > 0.0 {
            let w = m.support / total;
            weighted.precision += w * m.precision;
            weighted.recall += w * m.recall;
            weighted.f1 += w * m.f1;
        }
    }
    (macro_avg, weighted)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMeta {
    pub model: String,
    pub task: String,
    pub language: String,
    pub strategy: String,
    pub feature_mode: String,
    pub split_seeds: Vec<u64>,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, serde_json::Value>,
    /// Full resolved run configuration.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl RunMeta {
    fn same_run(&self, other: &RunMeta) -> Result<(), EvalError> {
        let fields = [
            ("model", &self.model, &other.model),
            ("task", &self.task, &other.task),
            ("language", &self.language, &other.language),
            ("strategy", &self.strategy, &other.strategy),
            ("feature_mode", &self.feature_mode, &other.feature_mode),
        ];
        for (name, a, b) in fields {
            if a != b {
                return Err(EvalError::MetadataMismatch(format!("{name}: `{a}` vs `{b}`")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean of each split's derived metrics.
    #[default]
    PerSplitMean,
    /// Metrics recomputed from the summed confusion matrices.
    Pooled,
    /// A single evaluation, nothing averaged.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub schema_version: u32,
    pub classes: Vec<String>,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub n_samples: f64,
    pub averaging: Averaging,
    pub n_reports: usize,
    pub meta: RunMeta,
}

impl ClassificationReport {
    pub fn from_confusion(cm: &ConfusionMatrix, meta: RunMeta) -> Result<Self, EvalError> {
        let metrics: Vec<ClassMetrics> = (0..cm.k()).map(|c| class_metrics(cm, c)).collect();
        let (macro_avg, weighted_avg) = aggregate(&metrics);
        Ok(ClassificationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            classes: cm.classes.clone(),
            per_class: cm.classes.iter().cloned().zip(metrics).collect(),
            accuracy: accuracy(cm)?,
            macro_avg,
            weighted_avg,
            n_samples: cm.n as f64,
            averaging: Averaging::Single,
            n_reports: 1,
            meta,
        })
    }

    pub fn metrics(&self, class: &str) -> Option<&ClassMetrics> {
        self.per_class.get(class)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| EvalError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let io = |message: String| EvalError::Io {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
        let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != REPORT_SCHEMA_VERSION {
            return Err(EvalError::Schema {
                found,
                expected: REPORT_SCHEMA_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| io(e.to_string()))
    }

    /// Per-class precision, recall and F1 table plus accuracy.
    pub fn to_markdown(&self) -> String {
        let m = &self.meta;
        let mut out = format!(
            "### {} / {} / {} / {}\n\n| Category | Precision | Recall | F1-score | Support |\n|---|---|---|---|---|\n",
            m.model, m.task, m.language, m.strategy
        );
        for c in &self.classes {
            let x = &self.per_class[c];
            writeln!(
                out,
                "| {c} | {:.3} | {:.3} | {:.3} | {:.1} |",
                x.precision, x.recall, x.f1, x.support
            )
            .unwrap();
        }
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            writeln!(out, "| {name} | {:.3} | {:.3} | {:.3} | {:.1} |", a.precision, a.recall, a.f1, self.n_samples).unwrap();
        }
        writeln!(out, "\nAccuracy: {:.3} ({} report(s), {:?})", self.accuracy, self.n_reports, self.averaging).unwrap();
        out
    }
}

/// Arithmetic mean of every numeric field; seeds from all reports are kept.
pub fn average_reports(reports: &[ClassificationReport]) -> Result<ClassificationReport, EvalError> {
    let first = reports.first().ok_or(EvalError::NoReports)?;
    for r in &reports[1..] {
        if r.classes != first.classes {
            return Err(EvalError::ClassMismatch(first.classes.clone(), r.classes.clone()));
        }
        first.meta.same_run(&r.meta)?;
    }
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&ClassificationReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let mean_avg = |f: &dyn Fn(&ClassificationReport) -> Averages| Averages {
        precision: mean(&|r| f(r).precision),
        recall: mean(&|r| f(r).recall),
        f1: mean(&|r| f(r).f1),
    };
    let per_class = first
        .classes
        .iter()
        .map(|c| {
            let get = |r: &ClassificationReport| r.per_class[c];
            let m = ClassMetrics {
                precision: mean(&|r| get(r).precision),
                recall: mean(&|r| get(r).recall),
                f1: mean(&|r| get(r).f1),
                support: mean(&|r| get(r).support),
                precision_undefined: reports.iter().any(|r| get(r).precision_undefined),
                recall_undefined: reports.iter().any(|r| get(r).recall_undefined),
                f1_undefined: reports.iter().any(|r| get(r).f1_undefined),
            };
            (c.clone(), m)
        })
        .collect();
    let mut meta = first.meta.clone();
    meta.split_seeds = reports.iter().flat_map(|r| r.meta.split_seeds.iter().copied()).collect();
    Ok(ClassificationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        classes: first.classes.clone(),
        per_class,
        accuracy: mean(&|r| r.accuracy),
        macro_avg: mean_avg(&|r| r.macro_avg),
        weighted_avg: mean_avg(&|r| r.weighted_avg),
        n_samples: mean(&|r| r.n_samples),
        averaging: Averaging::PerSplitMean,
        n_reports: reports.len(),
        meta,
    })
}

/// Report computed from the sum of per-split confusion matrices.
pub fn pooled_report(matrices: &[ConfusionMatrix], meta: RunMeta) -> Result<ClassificationReport, EvalError> {
    let mut total = matrices.first().ok_or(EvalError::NoReports)?.clone();
    for m in &matrices[1..] {
        total.add(m)?;
    }
    let mut r = ClassificationReport::from_confusion(&total, meta)?;
    r.averaging = Averaging::Pooled;
    r.n_reports = matrices.len();
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Accuracy,
    MacroF1,
    WeightedF1,
    WeightedRecall,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "macro_f1" => Ok(Metric::MacroF1),
            "weighted_f1" => Ok(Metric::WeightedF1),
            "weighted_recall" => Ok(Metric::WeightedRecall),
            _ => Err(format!("unknown metric `{s}`")),
        }
    }
}

pub fn score<S: AsRef<str>>(metric: Metric, y_true: &[S], y_pred: &[S], classes: &[String]) -> Result<f64, EvalError> {
    let cm = confusion(y_true, y_pred, classes)?;
    let metrics: Vec<ClassMetrics> = (0..cm.k()).map(|c| class_metrics(&cm, c)).collect();
    let (macro_avg, weighted) = aggregate(&metrics);
    Ok(match metric {
        Metric::Accuracy => accuracy(&cm)?,
        Metric::MacroF1 => macro_avg.f1,
        Metric::WeightedF1 => weighted.f1,
        Metric::WeightedRecall => weighted.recall,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub task: String,
    pub language: String,
    pub strategy: String,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
}

/// One row per strategy for a one-vs-rest and a multiclass run of the same model.
pub fn compare_strategies(
    ovr: &ClassificationReport,
    multi: &ClassificationReport,
) -> Result<Vec<ComparisonRow>, EvalError> {
    let (a, b) = (&ovr.meta, &multi.meta);
    for (name, x, y) in [
        ("task", &a.task, &b.task),
        ("language", &a.language, &b.language),
        ("model", &a.model, &b.model),
    ] {
        if x != y {
            return Err(EvalError::MetadataMismatch(format!("{name}: `{x}` vs `{y}`")));
        }
    }
    if ovr.classes != multi.classes {
        return Err(EvalError::ClassMismatch(ovr.classes.clone(), multi.classes.clone()));
    }
    Ok([("ovr", ovr), ("multiclass", multi)]
        .into_iter()
        .map(|(s, r)| ComparisonRow {
            task: r.meta.task.clone(),
            language: r.meta.language.clone(),
            strategy: s.to_string(),
            weighted_precision: r.weighted_avg.precision,
            weighted_recall: r.weighted_avg.recall,
        })
        .collect())
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn comparison_markdown(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("| Task | Language | Strategy | Weighted precision | Weighted recall |\n|---|---|---|---|---|\n");
    for r in rows {
        writeln!(
            out,
            "| {} | {} | {} | {:.3} | {:.3} |",
            r.task, r.language, r.strategy, r.weighted_precision, r.weighted_recall
        )
        .unwrap();
    }
    out
}

/// Whether, for every (task, language), multiclass weighted recall is at
/// least the one-vs-rest value. `None` when a pair is incomplete.
pub fn multiclass_recall_direction(rows: &[ComparisonRow]) -> BTreeMap<(String, String), Option<bool>> {
    let mut by: BTreeMap<(String, String), (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in rows {
        let e = by.entry((r.task.clone(), r.language.clone())).or_default();
        match r.strategy.as_str() {
            "ovr" => e.0 = Some(r.weighted_recall),
            _ => e.1 = Some(r.weighted_recall),
        }
    }
    by.into_iter()
        .map(|(k, (o, m))| (k, o.zip(m).map(|(o, m)| m >= o)))
        .collect()
}

/// Task-wise accuracy summary with one column per language.
pub fn summary_markdown(reports: &[ClassificationReport]) -> String {
    let languages: BTreeSet<&str> = reports.iter().map(|r| r.meta.language.as_str()).collect();
    let mut rows: BTreeMap<(&str, &str, &str), BTreeMap<&str, f64>> = BTreeMap::new();
    for r in reports {
        rows.entry((r.meta.task.as_str(), r.meta.model.as_str(), r.meta.strategy.as_str()))
            .or_default()
            .insert(r.meta.language.as_str(), r.accuracy);
    }
    let mut out = String::from("| Task | Model | Strategy |");
    for l in &languages {
        write!(out, " {l} accuracy |").unwrap();
    }
    out.push_str("\n|---|---|---|");
    for _ in &languages {
        out.push_str("---|");
    }
    out.push('\n');
    for ((task, model, strategy), accs) in &rows {
        write!(out, "| {task} | {model} | {strategy} |").unwrap();
        for l in &languages {
            match accs.get(l) {
                Some(a) => write!(out, " {:.1}% |", a * 100.0).unwrap(),
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classes(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn confusion_example() {
        let cm = confusion(&["a", "a", "b"], &["a", "b", "b"], &classes(&["a", "b"])).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);
        assert!(matches!(
            confusion(&["a"], &["c"], &classes(&["a", "b"])),
            Err(EvalError::UnknownLabel(_))
        ));
        assert!(matches!(
            confusion(&["a"], &[], &classes(&["a"])),
            Err(EvalError::LengthMismatch(1, 0))
        ));
    }

    #[test]
    fn metric_examples() {
        // TP 8, FP 2, FN 2
        let cm = ConfusionMatrix {
            classes: classes(&["x", "y"]),
            counts: vec![vec![8, 2], vec![2, 0]],
            n: 12,
        };
        let m = class_metrics(&cm, 0);
        assert!((m.precision - 0.8).abs() < 1e-12 && (m.recall - 0.8).abs() < 1e-12 && (m.f1 - 0.8).abs() < 1e-12);

        let cm = confusion(&["a", "a"], &["a", "a"], &classes(&["a", "z"])).unwrap();
        let z = class_metrics(&cm, 1);
        assert_eq!((z.precision, z.recall, z.f1), (0.0, 0.0, 0.0));
        assert!(z.precision_undefined && z.recall_undefined && z.f1_undefined);
        assert_eq!(accuracy(&cm).unwrap(), 1.0);

        let off = confusion(&["a", "z"], &["z", "a"], &classes(&["a", "z"])).unwrap();
        assert_eq!(accuracy(&off).unwrap(), 0.0);
        let empty = confusion::<&str>(&[], &[], &classes(&["a"])).unwrap();
        assert!(matches!(accuracy(&empty), Err(EvalError::Empty)));

        assert!((f1_score(0.860, 0.792) - 0.825).abs() < 2e-3);
    }

    #[test]
    fn weighted_recall_example() {
        let cm = confusion(&["a", "a", "a", "b"], &["a", "a", "a", "a"], &classes(&["a", "b"])).unwrap();
        let r = ClassificationReport::from_confusion(&cm, RunMeta::default()).unwrap();
        assert!((r.weighted_avg.recall - 0.75).abs() < 1e-12);
        assert!((r.accuracy - 0.75).abs() < 1e-12);
        let bal = confusion(&["a", "b"], &["a", "a"], &classes(&["a", "b"])).unwrap();
        let r = ClassificationReport::from_confusion(&bal, RunMeta::default()).unwrap();
        assert!((r.macro_avg.precision - r.weighted_avg.precision).abs() < 1e-12);
        assert!((r.macro_avg.f1 - r.weighted_avg.f1).abs() < 1e-12);
    }

    fn meta(model: &str, strategy: &str, seed: u64) -> RunMeta {
        RunMeta {
            model: model.into(),
            task: "sentiment".into(),
            language: "english".into(),
            strategy: strategy.into(),
            feature_mode: "counts".into(),
            split_seeds: vec![seed],
            ..Default::default()
        }
    }

    #[test]
    fn averaging() {
        let c = classes(&["a", "b"]);
        let r1 = ClassificationReport::from_confusion(
            &confusion(&["a", "b", "a", "b", "a"], &["a", "b", "a", "b", "b"], &c).unwrap(),
            meta("mnb", "multiclass", 1),
        )
        .unwrap();
        let same = average_reports(&vec![r1.clone(); 5]).unwrap();
        assert!((same.accuracy - r1.accuracy).abs() < 1e-15);
        assert_eq!(same.per_class, r1.per_class);
        assert_eq!(same.meta.split_seeds, vec![1; 5]);

        let r2 = ClassificationReport::from_confusion(
            &confusion(&["a", "b", "a", "b", "a", "b", "a", "b", "a", "b"], &["a", "b", "a", "b", "a", "b", "a", "a", "b", "a"], &c).unwrap(),
            meta("mnb", "multiclass", 2),
        )
        .unwrap();
        assert!((r1.accuracy - 0.8).abs() < 1e-12 && (r2.accuracy - 0.7).abs() < 1e-12);
        let avg = average_reports(&[r1.clone(), r2.clone()]).unwrap();
        assert!((avg.accuracy - 0.75).abs() < 1e-12);
        assert_eq!(avg.meta.split_seeds, vec![1, 2]);

        let pooled = pooled_report(
            &[
                confusion(&["a", "b", "a", "b", "a"], &["a", "b", "a", "b", "b"], &c).unwrap(),
                confusion(&["a", "b", "a", "b", "a", "b", "a", "b", "a", "b"], &["a", "b", "a", "b", "a", "b", "a", "a", "b", "a"], &c).unwrap(),
            ],
            meta("mnb", "multiclass", 0),
        )
        .unwrap();
        assert!((pooled.accuracy - 11.0 / 15.0).abs() < 1e-12);
        assert_eq!(pooled.averaging, Averaging::Pooled);

        let mut other = r2.clone();
        other.meta.model = "svm".into();
        assert!(matches!(average_reports(&[r1.clone(), other]), Err(EvalError::MetadataMismatch(_))));
        let r3 = ClassificationReport::from_confusion(
            &confusion(&["a"], &["a"], &classes(&["a", "c"])).unwrap(),
            meta("mnb", "multiclass", 3),
        )
        .unwrap();
        assert!(matches!(average_reports(&[r1, r3]), Err(EvalError::ClassMismatch(..))));
    }

    #[test]
    fn comparison_table() {
        let c = classes(&["a", "b"]);
        let cm = confusion(&["a", "b", "a"], &["a", "b", "b"], &c).unwrap();
        let o = ClassificationReport::from_confusion(&cm, meta("svm", "ovr", 1)).unwrap();
        let m = ClassificationReport::from_confusion(&cm, meta("svm", "multiclass", 1)).unwrap();
        let rows = compare_strategies(&o, &m).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].weighted_precision, rows[1].weighted_precision);
        assert_eq!(rows[0].weighted_recall, rows[1].weighted_recall);
        let csv = comparison_csv(&rows);
        assert!(csv.starts_with("task,language,strategy,weighted_precision,weighted_recall\n"));
        assert_eq!(csv.lines().count(), 3);
        assert!(comparison_markdown(&rows).contains("| sentiment | english | ovr |"));
        let dir = multiclass_recall_direction(&rows);
        assert_eq!(dir[&("sentiment".to_string(), "english".to_string())], Some(true));

        let mut urdu = m.clone();
        urdu.meta.language = "urdu".into();
        assert!(matches!(compare_strategies(&o, &urdu), Err(EvalError::MetadataMismatch(_))));
    }

    #[test]
    fn summary_has_language_columns() {
        let c = classes(&["a", "b"]);
        let cm = confusion(&["a", "b"], &["a", "b"], &c).unwrap();
        let en = ClassificationReport::from_confusion(&cm, meta("bilstm_attention", "multiclass", 1)).unwrap();
        let mut ur = en.clone();
        ur.meta.language = "urdu".into();
        ur.accuracy = 0.5;
        let md = summary_markdown(&[en, ur]);
        assert!(md.contains("english accuracy") && md.contains("urdu accuracy"));
        assert!(md.contains("| sentiment | bilstm_attention | multiclass | 100.0% | 50.0% |"), "{md}");
    }

    #[test]
    fn report_round_trip_and_schema_check() {
        let dir = tempfile::tempdir().unwrap();
        let c = classes(&["a", "b"]);
        let r = ClassificationReport::from_confusion(&confusion(&["a", "b"], &["a", "a"], &c).unwrap(), meta("mnb", "multiclass", 1)).unwrap();
        let p = dir.path().join("r.json");
        r.save(&p).unwrap();
        assert_eq!(ClassificationReport::load(&p).unwrap(), r);
        let text = std::fs::read_to_string(&p).unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 7", 1);
        std::fs::write(&p, text).unwrap();
        assert!(matches!(ClassificationReport::load(&p), Err(EvalError::Schema { found: 7, .. })));
        assert!(r.to_markdown().contains("| a |"));
    }

    fn arb_labels() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (2usize..7).prop_flat_map(|k| (Just(k), prop::collection::vec((0..k, 0..k), 1..200)))
    }

    proptest! {
        #[test]
        fn per_class_equals_binary_reduction((k, pairs) in arb_labels()) {
            let cls: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
            let t: Vec<&str> = pairs.iter().map(|p| cls[p.0].as_str()).collect();
            let p: Vec<&str> = pairs.iter().map(|p| cls[p.1].as_str()).collect();
            let cm = confusion(&t, &p, &cls).unwrap();
            for c in 0..k {
                let bt: Vec<&str> = t.iter().map(|&x| if x == cls[c] { "pos" } else { "neg" }).collect();
                let bp: Vec<&str> = p.iter().map(|&x| if x == cls[c] { "pos" } else { "neg" }).collect();
                let bin = confusion(&bt, &bp, &classes(&["neg", "pos"])).unwrap();
                prop_assert_eq!(class_metrics(&cm, c), class_metrics(&bin, 1));
            }
            let r = ClassificationReport::from_confusion(&cm, RunMeta::default()).unwrap();
            prop_assert!((r.weighted_avg.recall - r.accuracy).abs() < 1e-12);
            for m in r.per_class.values() {
                prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
                prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
            }
        }

        #[test]
        fn metrics_invariant_under_class_reordering((k, pairs) in arb_labels(), seed in any::<u64>()) {
            let cls: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
            let t: Vec<&str> = pairs.iter().map(|p| cls[p.0].as_str()).collect();
            let p: Vec<&str> = pairs.iter().map(|p| cls[p.1].as_str()).collect();
            let perm = crate::corpus::permutation(k, seed);
            let shuffled: Vec<String> = perm.iter().map(|&i| cls[i].clone()).collect();
            let a = ClassificationReport::from_confusion(&confusion(&t, &p, &cls).unwrap(), RunMeta::default()).unwrap();
            let b = ClassificationReport::from_confusion(&confusion(&t, &p, &shuffled).unwrap(), RunMeta::default()).unwrap();
            prop_assert_eq!(&a.per_class, &b.per_class);
            prop_assert_eq!(a.accuracy, b.accuracy);
            prop_assert!((a.weighted_avg.f1 - b.weighted_avg.f1).abs() < 1e-12);
            prop_assert!((a.macro_avg.recall - b.macro_avg.recall).abs() < 1e-12);
        }
    }
}
