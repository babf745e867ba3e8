//! Label augmentation for multi-label training data.
//!
//! A base label that names a concept gains one `prop::{property}` label per
//! shared property of that concept and one `cluster::{fraction}::{exemplar}`
//! label per clustering granularity. The prefixes keep augmentation labels
//! apart from base labels so they can be stripped before evaluation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterSet;
use crate::commonality::TableRow;
use crate::corpus::normalize;

pub const PROPERTY_PREFIX: &str = "prop::";
pub const CLUSTER_PREFIX: &str = "cluster::";

pub fn is_augmentation(label: &str) -> bool {
    label.starts_with(PROPERTY_PREFIX) || label.starts_with(CLUSTER_PREFIX)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AugmentError {
    #[error("no commonality rows and no cluster sets to build augmentations from")]
    NoSource,
    #[error("cluster set covers {found} points but {expected} names were given")]
    ClusterSize { expected: usize, found: usize },
}

/// One training or evaluation example.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub mention_span: Option<[usize; 2]>,
    pub labels: Vec<String>,
}

/// Base label → augmentation labels (sorted, deduplicated).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AugmentationMap {
    by_label: BTreeMap<String, Vec<String>>,
}

/// A built map plus the requested labels that received no augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationBuild {
    pub map: AugmentationMap,
    pub omitted: Vec<String>,
}

impl AugmentationMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: &str, augmentation: String) {
        let entry = self.by_label.entry(normalize(label)).or_default();
        if let Err(pos) = entry.binary_search(&augmentation) {
            entry.insert(pos, augmentation);
        }
    }

    pub fn get(&self, label: &str) -> Option<&[String]> {
        self.by_label.get(label).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.by_label.iter().map(|(l, a)| (l.as_str(), a.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.by_label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_label.is_empty()
    }

    /// Builds the map from commonality rows and cluster sets over
    /// `point_names`. With a `label_space`, only those labels are mapped and
    /// the ones without any augmentation are reported as omitted.
    pub fn build(
        rows: &[TableRow],
        clusters: &[ClusterSet],
        point_names: &[String],
        label_space: Option<&[String]>,
    ) -> Result<AugmentationBuild, AugmentError> {
        if rows.is_empty() && clusters.is_empty() {
            return Err(AugmentError::NoSource);
        }
        let wanted: Option<BTreeSet<String>> = label_space.map(|ls| ls.iter().map(|l| normalize(l)).collect());
        let keep = |l: &str| wanted.as_ref().is_none_or(|w| w.contains(l));

        let mut map = AugmentationMap::new();
        for row in rows {
            for concept in &row.concepts {
                let c = normalize(concept);
                if keep(&c) {
                    map.insert(&c, format!("{PROPERTY_PREFIX}{}", row.property));
                }
            }
        }
        for set in clusters {
            if set.assignment.len() != point_names.len() {
                return Err(AugmentError::ClusterSize {
                    expected: point_names.len(),
                    found: set.assignment.len(),
                });
            }
            for (i, name) in point_names.iter().enumerate() {
                let c = normalize(name);
                if keep(&c) {
                    map.insert(&c, set.label(i, point_names));
                }
            }
        }
        let omitted = match label_space {
            Some(ls) => ls
                .iter()
                .filter(|l| map.get(&normalize(l)).is_none())
                .cloned()
                .collect(),
            None => Vec::new(),
        };
        Ok(AugmentationBuild { map, omitted })
    }
}

/// Adds every augmentation of every base label, keeping the existing labels
/// and their order.
pub fn augment_dataset(examples: &[LabeledExample], map: &AugmentationMap) -> Vec<LabeledExample> {
    examples
        .iter()
        .map(|ex| {
            let mut labels = ex.labels.clone();
            let mut present: BTreeSet<String> = labels.iter().cloned().collect();
            for label in &ex.labels {
                if let Some(augs) = map.get(&normalize(label)) {
                    for aug in augs {
                        if present.insert(aug.clone()) {
                            labels.push(aug.clone());
                        }
                    }
                }
            }
            LabeledExample { labels, ..ex.clone() }
        })
        .collect()
}

/// Removes all `prop::` and `cluster::` labels.
pub fn strip_augmentations(examples: &[LabeledExample]) -> Vec<LabeledExample> {
    examples
        .iter()
        .map(|ex| LabeledExample {
            labels: ex.labels.iter().filter(|l| !is_augmentation(l)).cloned().collect(),
            ..ex.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn example(labels: &[&str]) -> LabeledExample {
        LabeledExample {
            id: "1".into(),
            text: "An [elephant] crossed the road".into(),
            mention_span: Some([3, 11]),
            labels: labels.iter().map(|l| l.to_string()).collect(),
        }
    }

    fn wild() -> Vec<TableRow> {
        vec![TableRow {
            property: "found in the wild".into(),
            concepts: vec!["elephant".into(), "lion".into()],
        }]
    }

    #[test]
    fn property_labels_are_added() {
        let built = AugmentationMap::build(&wild(), &[], &[], None).unwrap();
        assert_eq!(
            built.map.get("elephant").unwrap(),
            &["prop::found in the wild".to_string()]
        );
        let out = augment_dataset(&[example(&["elephant"])], &built.map);
        assert_eq!(out[0].labels, vec!["elephant", "prop::found in the wild"]);
        assert_eq!(out[0].text, "An [elephant] crossed the road");
    }

    #[test]
    fn clusters_only() {
        let set = ClusterSet {
            exemplars: vec![1],
            assignment: vec![1, 1],
            granularity_tag: "0.5".into(),
            converged: true,
            iterations: 20,
        };
        let names = vec!["cat".to_string(), "dog".to_string()];
        let built = AugmentationMap::build(&[], &[set], &names, None).unwrap();
        assert_eq!(built.map.get("cat").unwrap(), &["cluster::0.5::dog".to_string()]);
        assert!(built
            .map
            .iter()
            .all(|(_, a)| a.iter().all(|l| l.starts_with(CLUSTER_PREFIX))));
    }

    #[test]
    fn labels_without_sources_are_reported() {
        let space = vec!["elephant".to_string(), "teacher".to_string()];
        let built = AugmentationMap::build(&wild(), &[], &[], Some(&space)).unwrap();
        assert_eq!(built.omitted, vec!["teacher".to_string()]);
        assert!(built.map.get("lion").is_none());
        let out = augment_dataset(&[example(&["teacher"])], &built.map);
        assert_eq!(out[0].labels, vec!["teacher"]);
        assert_eq!(AugmentationMap::build(&[], &[], &[], None), Err(AugmentError::NoSource));
    }

    #[test]
    fn strip_mixed_labels() {
        let out = strip_augmentations(&[example(&["elephant", "prop::x", "cluster::0.5::y"])]);
        assert_eq!(out[0].labels, vec!["elephant"]);
    }
}
