use std::fmt::Write as _;

use rayon::prelude::*;

use super::dataset::Dataset;
use crate::chromatic::csv_field;
use crate::classifier::ClassProbabilities;
use crate::error::{Error, Result};
use crate::model::Classifier;

/// Metrics for one class, treating it as positive and all others as negative.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `(TP + TN) / total`.
    pub accuracy: f64,
    /// Set when the metric's denominator was zero and it was reported as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

impl ClassMetrics {
    fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                (0.0, true)
            } else {
                (num as f64 / den as f64, false)
            }
        };
        let (precision, precision_undefined) = ratio(tp, tp + fp);
        let (recall, recall_undefined) = ratio(tp, tp + fn_);
        let (f1, f1_undefined) = if precision + recall == 0.0 {
            (0.0, true)
        } else {
            (2.0 * precision * recall / (precision + recall), false)
        };
        let (accuracy, _) = ratio(tp + tn, tp + tn + fp + fn_);
        ClassMetrics {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
            accuracy,
            precision_undefined,
            recall_undefined,
            f1_undefined,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Mean of the per-class `(TP + TN) / total` accuracies.
    pub macro_accuracy: f64,
    /// Correct predictions over all predictions.
    pub accuracy: f64,
}

impl EvalReport {
    pub fn from_predictions(
        class_names: Vec<String>,
        truth: &[usize],
        predicted: &[usize],
    ) -> Result<Self> {
        let n = class_names.len();
        if truth.len() != predicted.len() {
            return Err(Error::Shape(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut confusion = vec![vec![0u64; n]; n];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= n || p >= n {
                return Err(Error::Domain(format!("class index out of range for {n} classes")));
            }
            confusion[t][p] += 1;
        }
        Self::from_confusion(class_names, confusion)
    }

    pub fn from_confusion(class_names: Vec<String>, confusion: Vec<Vec<u64>>) -> Result<Self> {
        let n = class_names.len();
        if n == 0 || confusion.len() != n || confusion.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!(
                "confusion matrix must be {n}x{n} and non-empty"
            )));
        }
        let total: u64 = confusion.iter().flatten().sum();
        let per_class: Vec<ClassMetrics> = (0..n)
            .map(|k| {
                let tp = confusion[k][k];
                let row: u64 = confusion[k].iter().sum();
                let col: u64 = confusion.iter().map(|r| r[k]).sum();
                let (fn_, fp) = (row - tp, col - tp);
                ClassMetrics::from_counts(tp, fp, fn_, total - tp - fp - fn_)
            })
            .collect();
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n as f64;
        let trace: u64 = (0..n).map(|k| confusion[k][k]).sum();
        Ok(EvalReport {
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            macro_accuracy: mean(|m| m.accuracy),
            accuracy: if total == 0 { 0.0 } else { trace as f64 / total as f64 },
            class_names,
            confusion,
            per_class,
        })
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    /// One row per class, then a `macro` row and a `micro` row. Undefined
    /// metrics are written as 0 with the flag column set.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "class,support,tp,fp,fn,tn,precision,recall,f1,accuracy,undefined\n",
        );
        for (name, m) in self.class_names.iter().zip(&self.per_class) {
            let mut flags = Vec::new();
            if m.precision_undefined {
                flags.push("precision");
            }
            if m.recall_undefined {
                flags.push("recall");
            }
            if m.f1_undefined {
                flags.push("f1");
            }
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
                csv_field(name),
                m.tp + m.fn_,
                m.tp,
                m.fp,
                m.fn_,
                m.tn,
                m.precision,
                m.recall,
                m.f1,
                m.accuracy,
                flags.join(";")
            );
        }
        let total = self.total();
        let _ = writeln!(
            out,
            "macro,{total},,,,,{:.6},{:.6},{:.6},{:.6},",
            self.macro_precision, self.macro_recall, self.macro_f1, self.macro_accuracy
        );
        let _ = writeln!(out, "micro,{total},,,,,,,,{:.6},", self.accuracy);
        out
    }

    /// Confusion matrix as aligned text, rows true and columns predicted,
    /// classes referred to by index with a legend underneath.
    pub fn confusion_text(&self) -> String {
        let n = self.class_names.len();
        let width = self
            .confusion
            .iter()
            .flatten()
            .map(|v| v.to_string().len())
            .max()
            .unwrap_or(1)
            .max(n.to_string().len())
            .max(2);
        let mut out = format!("{:>w$} |", "t\\p", w = width + 1);
        for k in 0..n {
            let _ = write!(out, " {k:>width$}");
        }
        out.push('\n');
        out.push_str(&"-".repeat(width + 3 + n * (width + 1)));
        out.push('\n');
        for (k, row) in self.confusion.iter().enumerate() {
            let _ = write!(out, "{k:>w$} |", w = width + 1);
            for v in row {
                let _ = write!(out, " {v:>width$}");
            }
            out.push('\n');
        }
        for (k, name) in self.class_names.iter().enumerate() {
            let _ = writeln!(out, "{k:>w$}: {name}", w = width + 1);
        }
        out
    }
}

fn check_classes(model: &dyn Classifier, ds: &Dataset) -> Result<()> {
    if model.class_names().len() != ds.num_classes() {
        return Err(Error::Config(format!(
            "model has {} classes, dataset has {}",
            model.class_names().len(),
            ds.num_classes()
        )));
    }
    Ok(())
}

/// Class probabilities for every item, in dataset order. Images are decoded
/// and classified in parallel.
pub fn predict_all<C: Classifier>(model: &C, ds: &Dataset) -> Result<Vec<ClassProbabilities>> {
    check_classes(model, ds)?;
    let size = model.config().vit.image_size;
    (0..ds.len())
        .into_par_iter()
        .map(|i| model.predict(&ds.image(i, size)?))
        .collect()
}

/// Confusion matrix and metrics of the model's argmax predictions.
pub fn evaluate<C: Classifier>(model: &C, ds: &Dataset) -> Result<EvalReport> {
    let predicted: Vec<usize> = predict_all(model, ds)?.iter().map(|p| p.argmax()).collect();
    EvalReport::from_predictions(ds.class_names().to_vec(), &ds.labels(), &predicted)
}
