//! Evaluation protocols: cross-subject splits and the AS1/AS2/AS3 class
//! subsets of MSR Action3D.

use crate::skeleton::SkeletonSequence;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    /// All classes; odd-numbered subjects train, even-numbered test.
    CrossSubjectAll,
    /// Three class subsets (AS1/AS2/AS3), cross-subject within each.
    AsSubsets,
    /// Explicit train/test subject lists.
    CustomSplit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub train_subjects: Vec<usize>,
    pub test_subjects: Vec<usize>,
}

impl ProtocolSpec {
    pub fn cross_subject_all() -> Self {
        Self {
            kind: ProtocolKind::CrossSubjectAll,
            train_subjects: Vec::new(),
            test_subjects: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ProtocolKind::CustomSplit {
            if self.train_subjects.is_empty() || self.test_subjects.is_empty() {
                return Err(Error::InvalidInput(
                    "custom_split needs train_subjects and test_subjects".into(),
                ));
            }
        }
        for s in &self.train_subjects {
            if self.test_subjects.contains(s) {
                return Err(Error::InvalidInput(format!(
                    "subject {s} appears in both train and test"
                )));
            }
        }
        Ok(())
    }

    /// True if the given subject belongs to the training half.
    pub fn is_train_subject(&self, subject: usize) -> bool {
        match self.kind {
            ProtocolKind::CustomSplit => self.train_subjects.contains(&subject),
            // odd-numbered subjects train, even-numbered test
            _ => subject % 2 == 1,
        }
    }

    /// Splits a dataset (by index) into train and test.
    pub fn split(&self, dataset: &[SkeletonSequence]) -> Result<(Vec<usize>, Vec<usize>)> {
        self.validate()?;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, seq) in dataset.iter().enumerate() {
            if self.is_train_subject(seq.subject_id) {
                train.push(i);
            } else if self.kind != ProtocolKind::CustomSplit
                || self.test_subjects.contains(&seq.subject_id)
            {
                test.push(i);
            }
        }
        if train.is_empty() {
            return Err(Error::InvalidInput("empty training split".into()));
        }
        if test.is_empty() {
            return Err(Error::InvalidInput("empty test split".into()));
        }
        Ok((train, test))
    }
}

/// The three MSR Action3D class subsets (class labels 1..=20).
///
/// AS1: horizontal arm wave, hammer, forward punch, high throw, hand clap,
///      bend, tennis serve, pickup & throw.
/// AS2: high arm wave, hand catch, draw x, draw tick, draw circle,
///      two hand wave, side boxing, forward kick.
/// AS3: high throw, forward kick, side kick, jogging, tennis swing,
///      tennis serve, golf swing, pickup & throw.
pub fn as_subset_classes() -> [Vec<usize>; 3] {
    [
        vec![2, 3, 5, 6, 10, 13, 18, 20],
        vec![1, 4, 7, 8, 9, 11, 12, 14],
        vec![6, 14, 15, 16, 17, 18, 19, 20],
    ]
}

/// Indices of the dataset instances whose class belongs to `classes`.
pub fn filter_classes(dataset: &[SkeletonSequence], classes: &[usize]) -> Vec<usize> {
    (0..dataset.len())
        .filter(|&i| classes.contains(&dataset[i].class_label))
        .collect()
}
