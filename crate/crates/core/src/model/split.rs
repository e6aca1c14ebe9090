use super::ModelError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Chronological split by match: the first `train_fraction` of matches
/// train, the rest validate. Moments never decide the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPolicy {
    pub train_fraction: f64,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: BTreeSet<String>,
    pub val: BTreeSet<String>,
}

impl Split {
    pub fn check_disjoint(&self) -> Result<(), ModelError> {
        match self.train.intersection(&self.val).next() {
            Some(m) => Err(ModelError::SplitLeak(m.clone())),
            None => Ok(()),
        }
    }
}

/// Numeric ids sort numerically (StatsBomb match ids grow over a season),
/// everything else lexicographically after them.
pub fn order_matches<'a>(ids: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut v: Vec<String> = ids
        .into_iter()
        .map(str::to_string)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    v.sort_by(|a, b| match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    });
    v
}

impl SplitPolicy {
    pub fn split<'a>(
        &self,
        match_ids: impl IntoIterator<Item = &'a str>,
    ) -> Result<Split, ModelError> {
        let ordered = order_matches(match_ids);
        let n = ordered.len();
        let mut n_train = (n as f64 * self.train_fraction).round() as usize;
        if n >= 2 {
            n_train = n_train.clamp(1, n - 1);
        } else {
            n_train = n;
        }
        let split = Split {
            train: ordered[..n_train].iter().cloned().collect(),
            val: ordered[n_train..].iter().cloned().collect(),
        };
        split.check_disjoint()?;
        Ok(split)
    }
}
