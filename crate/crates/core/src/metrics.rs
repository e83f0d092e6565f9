//! Binary classification metrics with the phishing class as positive.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    /// `predictions` and `labels` are true for the positive (phisher) class.
    pub fn from_predictions(predictions: &[bool], labels: &[bool]) -> Confusion {
        assert_eq!(predictions.len(), labels.len());
        let mut c = Confusion::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    fn ratio(num: usize, den: usize) -> (f64, bool) {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    }

    pub fn precision(&self) -> (f64, bool) {
        Self::ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> (f64, bool) {
        Self::ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when either denominator is
    /// empty or both are 0. The flag reports that degenerate case.
    pub fn f1(&self) -> (f64, bool) {
        let (p, pd) = self.precision();
        let (r, rd) = self.recall();
        if pd || rd || p + r == 0.0 {
            (0.0, true)
        } else {
            (f1_from_pr(p, r), false)
        }
    }

    /// Mean of recall on the positive class and recall on the negative class.
    pub fn balanced_accuracy(&self) -> (f64, bool) {
        let (tpr, d1) = Self::ratio(self.tp, self.tp + self.fn_);
        let (tnr, d2) = Self::ratio(self.tn, self.tn + self.fp);
        ((tpr + tnr) / 2.0, d1 || d2)
    }
}

/// Harmonic mean of precision and recall.
pub fn f1_from_pr(precision: f64, recall: f64) -> f64 {
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub seed: u64,
    pub lambda: f64,
    pub theta: f64,
    pub mode: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub b_acc: f64,
    pub degenerate: bool,
    pub confusion: Confusion,
}

impl EvalReport {
    pub fn new(
        dataset: impl Into<String>,
        seed: u64,
        lambda: f64,
        theta: f64,
        mode: impl Into<String>,
        confusion: Confusion,
    ) -> EvalReport {
        let (precision, d1) = confusion.precision();
        let (recall, d2) = confusion.recall();
        let (f1, d3) = confusion.f1();
        let (b_acc, d4) = confusion.balanced_accuracy();
        EvalReport {
            dataset: dataset.into(),
            seed,
            lambda,
            theta,
            mode: mode.into(),
            precision,
            recall,
            f1,
            b_acc,
            degenerate: d1 || d2 || d3 || d4,
            confusion,
        }
    }
}
