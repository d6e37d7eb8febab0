use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::raster::LabelMap;

/// Accuracy summary of a classification against reference labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// `confusion[t][p]`: pixels of true class `t + 1` predicted `p + 1`.
    confusion: Vec<Vec<u64>>,
    oa: f64,
    aa: f64,
    kappa: f64,
}

impl Metrics {
    /// Derive the scores from a square confusion matrix (rows = truth).
    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Result<Self> {
        let c = confusion.len();
        if let Some(row) = confusion.iter().find(|r| r.len() != c) {
            return Err(Error::DimensionMismatch {
                expected: c,
                found: row.len(),
            });
        }
        let total: u64 = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::validation("no labeled pixels to evaluate"));
        }
        let t = total as f64;
        let trace: u64 = (0..c).map(|i| confusion[i][i]).sum();
        let rows: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
        let cols: Vec<u64> = (0..c).map(|j| confusion.iter().map(|r| r[j]).sum()).collect();

        let oa = trace as f64 / t;
        let recalls: Vec<f64> = (0..c)
            .filter(|&i| rows[i] > 0)
            .map(|i| confusion[i][i] as f64 / rows[i] as f64)
            .collect();
        let aa = recalls.iter().sum::<f64>() / recalls.len() as f64;
        let pe = (0..c).map(|i| rows[i] as f64 * cols[i] as f64).sum::<f64>() / (t * t);
        let kappa = if pe >= 1.0 {
            if trace == total { 1.0 } else { 0.0 }
        } else {
            (oa - pe) / (1.0 - pe)
        };
        Ok(Metrics {
            confusion,
            oa,
            aa,
            kappa,
        })
    }

    pub fn confusion(&self) -> &[Vec<u64>] {
        &self.confusion
    }

    pub fn class_count(&self) -> usize {
        self.confusion.len()
    }

    /// Overall accuracy: trace over total.
    pub fn oa(&self) -> f64 {
        self.oa
    }

    /// Mean per-class recall over classes present in the truth.
    pub fn aa(&self) -> f64 {
        self.aa
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Recall of class `class` (1-based); `None` if absent from the truth.
    pub fn recall(&self, class: usize) -> Option<f64> {
        let row = &self.confusion[class - 1];
        let n: u64 = row.iter().sum();
        (n > 0).then(|| row[class - 1] as f64 / n as f64)
    }

    /// `metric,class,value` rows: oa, aa, kappa, then per-class recall.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,class,value\n");
        writeln!(s, "oa,,{}", self.oa).unwrap();
        writeln!(s, "aa,,{}", self.aa).unwrap();
        writeln!(s, "kappa,,{}", self.kappa).unwrap();
        for k in 1..=self.class_count() {
            if let Some(r) = self.recall(k) {
                writeln!(s, "recall,{k},{r}").unwrap();
            }
        }
        s
    }

    /// Confusion matrix as CSV, first column the true class.
    pub fn confusion_csv(&self) -> String {
        let mut s = String::from("truth");
        for k in 1..=self.class_count() {
            write!(s, ",{k}").unwrap();
        }
        s.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            write!(s, "{}", i + 1).unwrap();
            for v in row {
                write!(s, ",{v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn to_table(&self) -> String {
        let width = self
            .confusion
            .iter()
            .flatten()
            .map(|v| v.to_string().len())
            .max()
            .unwrap_or(1)
            .max(6);
        let mut s = String::new();
        write!(s, "{:>6}", "truth").unwrap();
        for k in 1..=self.class_count() {
            write!(s, " {:>width$}", k).unwrap();
        }
        writeln!(s, " {:>8}", "recall").unwrap();
        for (i, row) in self.confusion.iter().enumerate() {
            write!(s, "{:>6}", i + 1).unwrap();
            for v in row {
                write!(s, " {v:>width$}").unwrap();
            }
            match self.recall(i + 1) {
                Some(r) => writeln!(s, " {r:>8.4}").unwrap(),
                None => writeln!(s, " {:>8}", "-").unwrap(),
            }
        }
        writeln!(s, "OA    {:.4}", self.oa).unwrap();
        writeln!(s, "AA    {:.4}", self.aa).unwrap();
        writeln!(s, "kappa {:.4}", self.kappa).unwrap();
        s
    }
}

/// Compare predictions with the truth on every pixel whose truth label is
/// not 0.
pub fn evaluate(predicted: &LabelMap, truth: &LabelMap) -> Result<Metrics> {
    truth.check_extent(predicted.extent())?;
    let classes = truth.class_count().max(predicted.class_count()) as usize;
    let mut confusion = vec![vec![0u64; classes]; classes];
    for (i, (&t, &p)) in truth.labels().iter().zip(predicted.labels()).enumerate() {
        if t == 0 {
            continue;
        }
        if p == 0 {
            return Err(Error::validation(format!(
                "no prediction at labeled pixel ({}, {})",
                i / truth.width(),
                i % truth.width()
            )));
        }
        confusion[t as usize - 1][p as usize - 1] += 1;
    }
    Metrics::from_confusion(confusion)
}
