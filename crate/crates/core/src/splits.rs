//! Train/test partitions: a seeded shuffled split and a split by rpm plateau.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::model::{AlignedTable, Dataset, Segment, SplitPair};
use crate::preprocess::Reduction;
use crate::rng::{substream, Stream};

pub const DEFAULT_TRAIN_RATIO: f64 = 0.67;

/// Shuffles the rows with a seeded Fisher-Yates permutation; the first
/// `floor(ratio * n)` permuted rows form the training set.
pub fn shuffled_split(ds: &Dataset, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio.is_finite() && ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    if ds.len() < 3 {
        return Err(Error::TooShort { needed: 3, got: ds.len() });
    }
    let n_train = libm::floor(ratio * ds.len() as f64) as usize;
    if n_train == 0 {
        return Err(Error::EmptyPartition("train"));
    }
    if n_train == ds.len() {
        return Err(Error::EmptyPartition("test"));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut substream(seed, Stream::Shuffle, 0));
    let (train, test) = order.split_at(n_train);
    SplitPair::new(ds.select(train), ds.select(test))
}

/// Assignment of plateau ordinals to the partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub train_steps: BTreeSet<u32>,
    pub test_steps: BTreeSet<u32>,
    pub excluded_steps: BTreeSet<u32>,
}

impl Default for PartitionPlan {
    fn default() -> Self {
        Self {
            train_steps: [1, 3, 5, 7].into(),
            test_steps: [2, 4, 6].into(),
            excluded_steps: [8].into(),
        }
    }
}

impl PartitionPlan {
    pub fn validate(&self) -> Result<()> {
        if self.train_steps.is_empty() {
            return Err(Error::EmptyPartition("train"));
        }
        if self.test_steps.is_empty() {
            return Err(Error::EmptyPartition("test"));
        }
        let sets = [&self.train_steps, &self.test_steps, &self.excluded_steps];
        if sets.iter().any(|s| s.contains(&0)) {
            return Err(Error::InvalidConfig("plateau 0 cannot be assigned to a partition".into()));
        }
        for (i, a) in sets.iter().enumerate() {
            for b in &sets[i + 1..] {
                if let Some(k) = a.intersection(b).next() {
                    return Err(Error::InvalidConfig(format!("plateau {k} assigned to two partitions")));
                }
            }
        }
        Ok(())
    }
}

/// Splits by plateau, reducing each contiguous plateau segment on its own so
/// that no bin straddles two plateaus. Bin ordinals run over all plateau
/// segments of the table in order, so they are unique across partitions.
pub fn partitioned_split(table: &AlignedTable, plan: &PartitionPlan, reduction: &Reduction) -> Result<SplitPair> {
    plan.validate()?;
    reduction.validate()?;
    let runs = table.segment_runs();
    let present: BTreeSet<u32> = runs.iter().filter_map(|(s, _)| s.plateau()).collect();
    for k in plan.train_steps.iter().chain(&plan.test_steps).chain(&plan.excluded_steps) {
        if !present.contains(k) {
            return Err(Error::MissingPlateau(*k));
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut ordinal = 0;
    for (segment, range) in runs {
        let Segment::Plateau(k) = segment else { continue };
        let first = ordinal;
        if let Reduction::Bin(cfg) = reduction {
            ordinal += range.len() / cfg.size;
        }
        let dest = if plan.train_steps.contains(&k) {
            &mut train
        } else if plan.test_steps.contains(&k) {
            &mut test
        } else {
            continue;
        };
        dest.push(reduction.apply_range(table, range, first)?);
    }
    SplitPair::new(Dataset::concat(&train)?, Dataset::concat(&test)?)
}
