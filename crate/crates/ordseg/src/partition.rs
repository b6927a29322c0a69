//! Ordered partitions of `0..n` into contiguous classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A partition of sample indices `0..n` into `K` time-ordered contiguous
/// classes. Class `k` covers the half-open index range
/// `[class_ends[k-1], class_ends[k])` (with an implicit leading 0).
///
/// `class_ends` is non-decreasing and ends at `n`; a class may be empty
/// (its end equals its predecessor's), which happens when a labeling rule
/// never selects it. [`OrderedPartition::is_complete`] reports whether all
/// classes are populated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedPartition {
    class_ends: Vec<usize>,
}

impl OrderedPartition {
    /// Builds a partition from interior boundaries: `boundaries[k]` is the
    /// first index of class `k + 1`. Boundaries must be strictly increasing
    /// within `1..n`, so every class is non-empty.
    pub fn from_boundaries(n: usize, boundaries: &[usize]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("partition of an empty range".into()));
        }
        for w in boundaries.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidInput(format!(
                    "boundaries must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if boundaries.iter().any(|&b| b == 0 || b >= n) {
            return Err(Error::InvalidInput(format!(
                "boundaries must lie strictly inside 1..{n}"
            )));
        }
        let mut class_ends: Vec<usize> = boundaries.to_vec();
        class_ends.push(n);
        Ok(OrderedPartition { class_ends })
    }

    /// Builds a partition from per-sample labels in `0..num_classes`,
    /// which must be non-decreasing. Labels may skip classes; skipped
    /// classes come out empty.
    pub fn from_labels(labels: &[usize], num_classes: usize) -> Result<Self> {
        if labels.is_empty() || num_classes == 0 {
            return Err(Error::InvalidInput(
                "labels and class count must be non-empty".into(),
            ));
        }
        if let Some(i) = labels.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput(format!(
                "labels must be non-decreasing; violation at sample {}",
                i + 1
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        let n = labels.len();
        let mut class_ends = vec![0usize; num_classes];
        for &l in labels {
            class_ends[l] += 1;
        }
        let mut acc = 0;
        for e in class_ends.iter_mut() {
            acc += *e;
            *e = acc;
        }
        debug_assert_eq!(acc, n);
        Ok(OrderedPartition { class_ends })
    }

    pub fn n(&self) -> usize {
        *self.class_ends.last().unwrap()
    }

    pub fn num_classes(&self) -> usize {
        self.class_ends.len()
    }

    /// Half-open index range of class `k`.
    pub fn range(&self, k: usize) -> std::ops::Range<usize> {
        let start = if k == 0 { 0 } else { self.class_ends[k - 1] };
        start..self.class_ends[k]
    }

    /// Label of sample `i`. For indices at an empty class's (zero-width)
    /// position the populated class is returned.
    pub fn label(&self, i: usize) -> usize {
        debug_assert!(i < self.n());
        self.class_ends.partition_point(|&e| e <= i)
    }

    pub fn labels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n());
        for k in 0..self.num_classes() {
            out.extend(std::iter::repeat(k).take(self.range(k).len()));
        }
        out
    }

    /// Interior boundaries: the first index of each class `1..K`. An empty
    /// class repeats its neighbour's boundary.
    pub fn boundaries(&self) -> &[usize] {
        &self.class_ends[..self.class_ends.len() - 1]
    }

    pub fn non_empty_classes(&self) -> usize {
        (0..self.num_classes())
            .filter(|&k| !self.range(k).is_empty())
            .count()
    }

    /// True when every class holds at least one sample.
    pub fn is_complete(&self) -> bool {
        self.non_empty_classes() == self.num_classes()
    }
}

/// Repairs a label sequence in place so it is non-decreasing: any sample
/// whose label falls below its (repaired) left neighbour's is reassigned to
/// that neighbour's class. Returns the number of samples changed.
pub fn repair_non_decreasing(labels: &mut [usize]) -> usize {
    let mut changed = 0;
    for i in 1..labels.len() {
        if labels[i] < labels[i - 1] {
            labels[i] = labels[i - 1];
            changed += 1;
        }
    }
    changed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries_round_trip_through_labels() {
        let p = OrderedPartition::from_boundaries(10, &[3, 7]).unwrap();
        assert_eq!(p.num_classes(), 3);
        assert_eq!(p.labels(), vec![0, 0, 0, 1, 1, 1, 1, 2, 2, 2]);
        assert_eq!(p.range(1), 3..7);
        assert_eq!(p.label(0), 0);
        assert_eq!(p.label(3), 1);
        assert_eq!(p.label(9), 2);
        let q = OrderedPartition::from_labels(&p.labels(), 3).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_bad_boundaries() {
        assert!(OrderedPartition::from_boundaries(10, &[0]).is_err());
        assert!(OrderedPartition::from_boundaries(10, &[10]).is_err());
        assert!(OrderedPartition::from_boundaries(10, &[4, 4]).is_err());
        assert!(OrderedPartition::from_boundaries(10, &[7, 3]).is_err());
    }

    #[test]
    fn labels_may_skip_classes_and_the_partition_reports_it() {
        let p = OrderedPartition::from_labels(&[0, 0, 2, 2], 3).unwrap();
        assert_eq!(p.non_empty_classes(), 2);
        assert!(!p.is_complete());
        assert_eq!(p.range(1), 2..2);
        assert_eq!(p.labels(), vec![0, 0, 2, 2]);
        assert_eq!(p.label(2), 2);
    }

    #[test]
    fn decreasing_labels_are_rejected() {
        assert!(OrderedPartition::from_labels(&[0, 1, 0], 2).is_err());
    }

    #[test]
    fn repair_assigns_out_of_order_points_to_the_left_neighbour() {
        let mut labels = vec![0, 1, 0, 1, 2, 1, 1, 2];
        let changed = repair_non_decreasing(&mut labels);
        assert_eq!(labels, vec![0, 1, 1, 1, 2, 2, 2, 2]);
        assert_eq!(changed, 3);
    }

    #[test]
    fn repair_keeps_already_ordered_labels() {
        let mut labels = vec![0, 0, 1, 2, 2];
        assert_eq!(repair_non_decreasing(&mut labels), 0);
        assert_eq!(labels, vec![0, 0, 1, 2, 2]);
    }
}
