use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SubjectId;
use crate::error::{Error, Result};
use crate::seed::{derive, stream};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test_subjects: BTreeSet<SubjectId>,
    pub train_subjects: BTreeSet<SubjectId>,
}

impl Fold {
    /// Rejects any split where a training snippet belongs to a test subject
    /// or a test snippet to a subject outside this fold's test set.
    pub fn check_split<'a>(
        &self,
        train: impl IntoIterator<Item = &'a SubjectId>,
        test: impl IntoIterator<Item = &'a SubjectId>,
    ) -> Result<()> {
        for s in train {
            if self.test_subjects.contains(s) || !self.train_subjects.contains(s) {
                return Err(Error::Data(format!("subject leakage: '{s}' is not a training subject of this fold")));
            }
        }
        for s in test {
            if !self.test_subjects.contains(s) {
                return Err(Error::Data(format!("subject leakage: '{s}' is not a test subject of this fold")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// Checks the partition invariants against the full subject list.
    pub fn validate(&self, subjects: &[SubjectId]) -> Result<()> {
        let all: BTreeSet<&SubjectId> = subjects.iter().collect();
        let mut covered = BTreeSet::new();
        for (i, f) in self.folds.iter().enumerate() {
            if f.test_subjects.is_empty() {
                return Err(Error::Data(format!("fold {i} has no test subjects")));
            }
            if let Some(s) = f.test_subjects.intersection(&f.train_subjects).next() {
                return Err(Error::Data(format!("fold {i}: subject '{s}' is in both train and test")));
            }
            for s in &f.test_subjects {
                if !covered.insert(s) {
                    return Err(Error::Data(format!("subject '{s}' is in more than one test set")));
                }
            }
            let fold_all: BTreeSet<&SubjectId> = f.test_subjects.iter().chain(&f.train_subjects).collect();
            if fold_all != all {
                return Err(Error::Data(format!("fold {i} does not cover every subject exactly once")));
            }
        }
        if covered != all {
            return Err(Error::Data("test sets do not cover every subject".into()));
        }
        Ok(())
    }
}

/// Shuffles subjects by `seed` and deals them into `k` contiguous groups
/// whose sizes differ by at most one.
pub fn make_fold_plan(subjects: &[SubjectId], k: usize, seed: u64) -> Result<FoldPlan> {
    let unique: BTreeSet<&SubjectId> = subjects.iter().collect();
    if unique.len() != subjects.len() {
        return Err(Error::Data("subject list contains duplicates".into()));
    }
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if k > subjects.len() {
        return Err(Error::Config(format!("{k} folds for {} subjects", subjects.len())));
    }
    let mut order: Vec<SubjectId> = subjects.to_vec();
    order.sort();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive(seed, &[stream::FOLDS])));
    let (base, extra) = (order.len() / k, order.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        let test: BTreeSet<SubjectId> = order[start..start + len].iter().cloned().collect();
        let train = order.iter().filter(|s| !test.contains(*s)).cloned().collect();
        folds.push(Fold {
            test_subjects: test,
            train_subjects: train,
        });
        start += len;
    }
    let plan = FoldPlan { folds };
    plan.validate(subjects)?;
    Ok(plan)
}
