use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::MetricSet;
use super::stats::{mean_ci, wilcoxon_signed_rank};
use crate::data::Modality;
use crate::error::{Error, Result};

pub const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        let (mean, lo, hi) = mean_ci(values, CI_LEVEL)?;
        Ok(Self { mean, lo, hi })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub per_fold: Vec<MetricSet>,
    pub ba: Summary,
    pub tpr: Summary,
    pub tnr: Summary,
}

impl ReportRow {
    pub fn new(name: impl Into<String>, per_fold: Vec<MetricSet>) -> Result<Self> {
        let col = |f: fn(&MetricSet) -> f64| per_fold.iter().map(f).collect::<Vec<f64>>();
        Ok(Self {
            name: name.into(),
            ba: Summary::of(&col(|m| m.ba))?,
            tpr: Summary::of(&col(|m| m.tpr))?,
            tnr: Summary::of(&col(|m| m.tnr))?,
            per_fold,
        })
    }

    pub fn fold_ba(&self) -> Vec<f64> {
        self.per_fold.iter().map(|m| m.ba).collect()
    }
}

/// Two-sided signed-rank p-value on per-fold BA; `None` when there are too
/// few non-zero differences for the test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseP {
    pub a: String,
    pub b: String,
    pub p: Option<f64>,
}

/// One training run of the repetition protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub fold: usize,
    pub network: Modality,
    pub repetition: usize,
    pub attempt: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub best_val_loss: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment: String,
    pub n_folds: usize,
    pub rows: Vec<ReportRow>,
    pub pairwise: Vec<PairwiseP>,
    #[serde(default)]
    pub runs: Vec<RunRecord>,
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

impl EvalReport {
    pub fn new(experiment: impl Into<String>, rows: Vec<ReportRow>, runs: Vec<RunRecord>) -> Result<Self> {
        let n_folds = rows.first().map_or(0, |r| r.per_fold.len());
        if rows.iter().any(|r| r.per_fold.len() != n_folds) {
            return Err(Error::Shape("report rows disagree on the number of folds".into()));
        }
        let mut pairwise = Vec::new();
        for (i, a) in rows.iter().enumerate() {
            for b in &rows[i + 1..] {
                pairwise.push(PairwiseP {
                    a: a.name.clone(),
                    b: b.name.clone(),
                    p: wilcoxon_signed_rank(&a.fold_ba(), &b.fold_ba()).ok(),
                });
            }
        }
        Ok(Self {
            experiment: experiment.into(),
            n_folds,
            rows,
            pairwise,
            runs,
        })
    }

    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn p_value(&self, a: &str, b: &str) -> Option<f64> {
        self.pairwise
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
            .and_then(|p| p.p)
    }

    /// Percent table with 95% intervals, then the p-value matrix.
    pub fn to_text(&self) -> String {
        let w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        let mut s = String::new();
        let _ = writeln!(s, "{} ({} folds)", self.experiment, self.n_folds);
        let _ = writeln!(
            s,
            "{:<w$}  {:<22}  {:<22}  {:<22}",
            "Model", "BA [CI 95%]", "TPR [CI 95%]", "TNR [CI 95%]"
        );
        for r in &self.rows {
            let cell = |m: &Summary| format!("{} [{} {}]", pct(m.mean), pct(m.lo), pct(m.hi));
            let _ = writeln!(
                s,
                "{:<w$}  {:<22}  {:<22}  {:<22}",
                r.name,
                cell(&r.ba),
                cell(&r.tpr),
                cell(&r.tnr)
            );
        }
        if self.rows.len() > 1 {
            let _ = writeln!(s, "\nWilcoxon signed-rank p-values (per-fold BA)");
            let _ = write!(s, "{:<w$}", "");
            for r in &self.rows[1..] {
                let _ = write!(s, "  {:>w$}", r.name);
            }
            let _ = writeln!(s);
            for (i, a) in self.rows[..self.rows.len() - 1].iter().enumerate() {
                let _ = write!(s, "{:<w$}", a.name);
                for (j, b) in self.rows[1..].iter().enumerate() {
                    let cell = if j < i {
                        String::new()
                    } else {
                        match self.p_value(&a.name, &b.name) {
                            Some(p) => format!("{p:.4}{}", stars(p)),
                            None => "n/a".into(),
                        }
                    };
                    let _ = write!(s, "  {cell:>w$}");
                }
                let _ = writeln!(s);
            }
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(format!("serializing report: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("parsing report: {e}")))
    }

    /// One line per (row, fold) for downstream plotting.
    pub fn per_fold_csv(&self) -> String {
        let mut s = String::from("model,fold,tp,tn,fp,fn,tpr,tnr,ba\n");
        for r in &self.rows {
            for (f, m) in r.per_fold.iter().enumerate() {
                let c = m.counts;
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    r.name, f, c.tp, c.tn, c.fp, c.fn_, m.tpr, m.tnr, m.ba
                );
            }
        }
        s
    }
}
