use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub tpr: f64,
    pub tnr: f64,
    pub ba: f64,
    pub counts: Counts,
}

impl MetricSet {
    pub fn from_counts(counts: Counts) -> Result<Self> {
        let pos = counts.tp + counts.fn_;
        let neg = counts.tn + counts.fp;
        if pos == 0 || neg == 0 {
            return Err(Error::Data(
                "balanced accuracy needs both classes in the ground truth".into(),
            ));
        }
        let tpr = counts.tp as f64 / pos as f64;
        let tnr = counts.tn as f64 / neg as f64;
        Ok(Self {
            tpr,
            tnr,
            ba: (tpr + tnr) / 2.0,
            counts,
        })
    }
}

pub fn compute_metrics(preds: &[Label], truth: &[Label]) -> Result<MetricSet> {
    if preds.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Data("no predictions to score".into()));
    }
    let mut c = Counts::default();
    for (p, t) in preds.iter().zip(truth) {
        match (p, t) {
            (Label::FmPlus, Label::FmPlus) => c.tp += 1,
            (Label::FmMinus, Label::FmMinus) => c.tn += 1,
            (Label::FmPlus, Label::FmMinus) => c.fp += 1,
            (Label::FmMinus, Label::FmPlus) => c.fn_ += 1,
        }
    }
    MetricSet::from_counts(c)
}
