//! Evaluation reports: accuracy, per-class accuracy, confusion matrix and
//! per-stage timings, in human-readable and machine-readable forms.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    /// Class labels in ascending order; confusion rows/columns follow it.
    pub classes: Vec<usize>,
    /// confusion[r][c] = test instances of classes[r] predicted as classes[c].
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub config_echo: String,
    /// (stage name, wall-clock seconds).
    pub timings: Vec<(String, f64)>,
}

impl EvaluationReport {
    /// Builds a report from (true, predicted) label pairs.
    pub fn from_predictions(pairs: &[(usize, usize)], config_echo: String) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("no predictions to report".into()));
        }
        let mut classes: Vec<usize> = pairs.iter().flat_map(|&(t, p)| [t, p]).collect();
        classes.sort_unstable();
        classes.dedup();
        let index = |label: usize| classes.binary_search(&label).unwrap();
        let n = classes.len();
        let mut confusion = vec![vec![0usize; n]; n];
        for &(truth, pred) in pairs {
            confusion[index(truth)][index(pred)] += 1;
        }
        let mut per_class_accuracy = Vec::with_capacity(n);
        let mut trace = 0usize;
        for r in 0..n {
            let row_total: usize = confusion[r].iter().sum();
            trace += confusion[r][r];
            per_class_accuracy.push(if row_total > 0 {
                confusion[r][r] as f64 / row_total as f64
            } else {
                0.0
            });
        }
        let report = EvaluationReport {
            classes,
            confusion,
            accuracy: trace as f64 / pairs.len() as f64,
            per_class_accuracy,
            config_echo,
            timings: Vec::new(),
        };
        report.check_consistency()?;
        Ok(report)
    }

    /// Row sums must equal per-class test counts and accuracy must equal
    /// trace over total.
    pub fn check_consistency(&self) -> Result<()> {
        let total: usize = self.confusion.iter().flatten().sum();
        let trace: usize = (0..self.classes.len()).map(|i| self.confusion[i][i]).sum();
        if total == 0 {
            return Err(Error::InvalidInput("empty confusion matrix".into()));
        }
        if (self.accuracy - trace as f64 / total as f64).abs() > 1e-12 {
            return Err(Error::InvalidInput(
                "accuracy does not equal confusion trace / total".into(),
            ));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "accuracy: {:.4}", self.accuracy);
        let _ = writeln!(out, "per-class accuracy:");
        for (c, a) in self.classes.iter().zip(&self.per_class_accuracy) {
            let _ = writeln!(out, "  class {c}: {a:.4}");
        }
        let _ = writeln!(out, "confusion matrix (rows = truth):");
        let _ = write!(out, "{:>8}", "");
        for c in &self.classes {
            let _ = write!(out, "{c:>6}");
        }
        out.push('\n');
        for (r, row) in self.confusion.iter().enumerate() {
            let _ = write!(out, "{:>8}", self.classes[r]);
            for v in row {
                let _ = write!(out, "{v:>6}");
            }
            out.push('\n');
        }
        if !self.timings.is_empty() {
            let _ = writeln!(out, "timings:");
            for (stage, secs) in &self.timings {
                let _ = writeln!(out, "  {stage}: {secs:.3}s");
            }
        }
        out
    }

    /// Machine-readable `metric value` lines.
    pub fn to_machine(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "accuracy {}", self.accuracy);
        for (c, a) in self.classes.iter().zip(&self.per_class_accuracy) {
            let _ = writeln!(out, "class_accuracy_{c} {a}");
        }
        for (r, row) in self.confusion.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if *v > 0 {
                    let _ = writeln!(out, "confusion_{}_{} {v}", self.classes[r], self.classes[c]);
                }
            }
        }
        for (stage, secs) in &self.timings {
            let _ = writeln!(out, "time_{stage} {secs}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_give_diagonal_matrix() {
        let pairs: Vec<(usize, usize)> = (1..=3).flat_map(|c| vec![(c, c); 4]).collect();
        let report = EvaluationReport::from_predictions(&pairs, String::new()).unwrap();
        assert_eq!(report.accuracy, 1.0);
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(report.confusion[r][c], if r == c { 4 } else { 0 });
            }
        }
    }

    #[test]
    fn row_sums_match_test_counts() {
        let pairs = vec![(1, 1), (1, 2), (2, 2), (2, 2), (2, 1)];
        let report = EvaluationReport::from_predictions(&pairs, String::new()).unwrap();
        assert_eq!(report.confusion[0].iter().sum::<usize>(), 2);
        assert_eq!(report.confusion[1].iter().sum::<usize>(), 3);
        assert!((report.accuracy - 3.0 / 5.0).abs() < 1e-12);
        assert!((report.per_class_accuracy[0] - 0.5).abs() < 1e-12);
        report.check_consistency().unwrap();
    }

    #[test]
    fn machine_format_is_parseable() {
        let pairs = vec![(1, 1), (2, 1)];
        let report = EvaluationReport::from_predictions(&pairs, String::new()).unwrap();
        for line in report.to_machine().lines() {
            let mut it = line.split_whitespace();
            let _metric = it.next().unwrap();
            let value: f64 = it.next().unwrap().parse().unwrap();
            assert!(value.is_finite());
        }
    }
}
