//! Thresholded multilabel metrics: element-wise accuracy and macro
//! precision, recall and F1 with a per-class breakdown.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `1` where `prob >= threshold`, else `0`.
pub fn threshold_predictions(probs: &Matrix<f64>, threshold: f64) -> Matrix<u8> {
    probs.map(|&p| u8::from(p >= threshold))
}

fn check_pair(pred: &Matrix<u8>, truth: &Matrix<u8>) -> Result<()> {
    if pred.shape() != truth.shape() {
        return Err(Error::ShapeMismatch(format!(
            "predictions {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    if pred.rows() == 0 || pred.cols() == 0 {
        return Err(Error::EmptyInput("no samples to score"));
    }
    Ok(())
}

/// Percentage of label slots where prediction and truth agree.
pub fn elementwise_accuracy(pred: &Matrix<u8>, truth: &Matrix<u8>) -> Result<f64> {
    check_pair(pred, truth)?;
    let hits = pred
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .filter(|(a, b)| a == b)
        .count();
    Ok(100.0 * hits as f64 / pred.as_slice().len() as f64)
}

/// Percentage of samples whose whole label vector is predicted exactly.
pub fn exact_match_accuracy(pred: &Matrix<u8>, truth: &Matrix<u8>) -> Result<f64> {
    check_pair(pred, truth)?;
    let hits = (0..pred.rows()).filter(|&r| pred.row(r) == truth.row(r)).count();
    Ok(100.0 * hits as f64 / pred.rows() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub class_id: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassStats {
    fn from_counts(class_id: usize, tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            class_id,
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassStats>,
}

/// Per-class confusion counts and their unweighted means. A zero
/// denominator yields 0 and the class still counts toward the mean.
pub fn macro_prf(pred: &Matrix<u8>, truth: &Matrix<u8>) -> Result<MacroPrf> {
    check_pair(pred, truth)?;
    let classes = pred.cols();
    let mut counts = vec![[0usize; 4]; classes];
    for r in 0..pred.rows() {
        for (c, (&p, &t)) in pred.row(r).iter().zip(truth.row(r)).enumerate() {
            let slot = match (p != 0, t != 0) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            };
            counts[c][slot] += 1;
        }
    }
    let per_class: Vec<ClassStats> = counts
        .iter()
        .enumerate()
        .map(|(c, &[tp, fp, fn_, tn])| ClassStats::from_counts(c, tp, fp, fn_, tn))
        .collect();
    let mean = |f: fn(&ClassStats) -> f64| per_class.iter().map(f).sum::<f64>() / classes as f64;
    Ok(MacroPrf {
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        f1: mean(|s| s.f1),
        per_class,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassStats>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Percent.
    pub elementwise_accuracy: f64,
    /// Percent; reported only, never used for model selection.
    pub exact_match_accuracy: f64,
    pub threshold: f64,
    pub n_samples: usize,
}

impl EvalReport {
    pub fn from_predictions(pred: &Matrix<u8>, truth: &Matrix<u8>, threshold: f64) -> Result<Self> {
        let prf = macro_prf(pred, truth)?;
        Ok(Self {
            elementwise_accuracy: elementwise_accuracy(pred, truth)?,
            exact_match_accuracy: exact_match_accuracy(pred, truth)?,
            macro_precision: prf.precision,
            macro_recall: prf.recall,
            macro_f1: prf.f1,
            per_class: prf.per_class,
            threshold,
            n_samples: pred.rows(),
        })
    }

    pub fn from_probabilities(probs: &Matrix<f64>, truth: &Matrix<u8>, threshold: f64) -> Result<Self> {
        Self::from_predictions(&threshold_predictions(probs, threshold), truth, threshold)
    }

    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }
}

/// CSV and aligned-text renderings of one report.
#[derive(Debug, Clone)]
pub struct RenderedReport {
    pub csv: String,
    pub text: String,
}

/// Renders `report` with one row per class in `class_id` order plus a
/// `macro` summary row. Rates are rounded to 4 decimals in both forms.
pub fn classification_report(report: &EvalReport, class_names: &[String]) -> Result<RenderedReport> {
    if report.n_samples == 0 || report.per_class.is_empty() {
        return Err(Error::EmptyInput("report has no samples"));
    }
    if class_names.len() != report.num_classes() {
        return Err(Error::NameCountMismatch {
            expected: report.num_classes(),
            got: class_names.len(),
        });
    }
    let mut rows: Vec<&ClassStats> = report.per_class.iter().collect();
    rows.sort_by_key(|s| s.class_id);
    let sum = |f: fn(&ClassStats) -> usize| rows.iter().map(|s| f(s)).sum::<usize>();
    let (tp, fp, fn_, tn) = (sum(|s| s.tp), sum(|s| s.fp), sum(|s| s.fn_), sum(|s| s.tn));
    let r4 = |x: f64| format!("{x:.4}");

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["class_id", "class_name", "tp", "fp", "fn", "tn", "precision", "recall", "f1"])?;
    for s in &rows {
        w.write_record([
            s.class_id.to_string(),
            class_names[s.class_id].clone(),
            s.tp.to_string(),
            s.fp.to_string(),
            s.fn_.to_string(),
            s.tn.to_string(),
            r4(s.precision),
            r4(s.recall),
            r4(s.f1),
        ])?;
    }
    w.write_record([
        "macro".to_string(),
        String::new(),
        tp.to_string(),
        fp.to_string(),
        fn_.to_string(),
        tn.to_string(),
        r4(report.macro_precision),
        r4(report.macro_recall),
        r4(report.macro_f1),
    ])?;
    let csv = String::from_utf8(w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?)
        .expect("csv output is utf-8");

    let name_w = class_names.iter().map(|n| n.len()).chain([10]).max().unwrap_or(10);
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:>5}  {:<name_w$}  {:>6} {:>6} {:>6} {:>6}  {:>9} {:>9} {:>9}",
        "id", "class", "tp", "fp", "fn", "tn", "precision", "recall", "f1"
    );
    for s in &rows {
        let _ = writeln!(
            text,
            "{:>5}  {:<name_w$}  {:>6} {:>6} {:>6} {:>6}  {:>9} {:>9} {:>9}",
            s.class_id,
            class_names[s.class_id],
            s.tp,
            s.fp,
            s.fn_,
            s.tn,
            r4(s.precision),
            r4(s.recall),
            r4(s.f1)
        );
    }
    let _ = writeln!(
        text,
        "{:>5}  {:<name_w$}  {:>6} {:>6} {:>6} {:>6}  {:>9} {:>9} {:>9}",
        "macro",
        "",
        tp,
        fp,
        fn_,
        tn,
        r4(report.macro_precision),
        r4(report.macro_recall),
        r4(report.macro_f1)
    );
    let _ = writeln!(
        text,
        "\nsamples {}  threshold {}  element-wise accuracy {}%  exact-match accuracy {}%",
        report.n_samples,
        report.threshold,
        r4(report.elementwise_accuracy),
        r4(report.exact_match_accuracy)
    );
    Ok(RenderedReport { csv, text })
}
