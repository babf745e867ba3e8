//! Shared-property groups: inverting verified assignments and pruning
//! properties that only a single concept holds.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::corpus::Interner;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssignmentError {
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("property {property} assigned twice to concept {concept}")]
    Duplicate { concept: u32, property: u32 },
}

/// Verified properties per concept, with the verifier's score.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropertyAssignment {
    by_concept: BTreeMap<u32, Vec<(u32, f64)>>,
}

impl PropertyAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, concept: u32, property: u32, score: f64) -> Result<(), AssignmentError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(AssignmentError::ScoreOutOfRange(score));
        }
        let props = self.by_concept.entry(concept).or_default();
        if props.iter().any(|&(p, _)| p == property) {
            return Err(AssignmentError::Duplicate { concept, property });
        }
        props.push((property, score));
        Ok(())
    }

    /// Registers a concept even if it ends up with no property.
    pub fn touch(&mut self, concept: u32) {
        self.by_concept.entry(concept).or_default();
    }

    /// Properties of `concept` by descending score, then ascending id.
    pub fn properties(&self, concept: u32) -> Vec<(u32, f64)> {
        let mut props = self.by_concept.get(&concept).cloned().unwrap_or_default();
        props.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        props
    }

    pub fn concepts(&self) -> impl Iterator<Item = u32> + '_ {
        self.by_concept.keys().copied()
    }

    pub fn pair_count(&self) -> usize {
        self.by_concept.values().map(Vec::len).sum()
    }

    pub fn contains(&self, concept: u32, property: u32) -> bool {
        self.by_concept
            .get(&concept)
            .is_some_and(|ps| ps.iter().any(|&(p, _)| p == property))
    }

    /// Concept → property-id set, scores dropped.
    pub fn support(&self) -> BTreeMap<u32, BTreeSet<u32>> {
        self.by_concept
            .iter()
            .filter(|(_, ps)| !ps.is_empty())
            .map(|(&c, ps)| (c, ps.iter().map(|&(p, _)| p).collect()))
            .collect()
    }
}

/// Property → set of concepts holding it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommonalityTable {
    by_property: BTreeMap<u32, BTreeSet<u32>>,
}

impl CommonalityTable {
    pub fn invert(assignment: &PropertyAssignment) -> Self {
        Self::from_support(&assignment.support())
    }

    pub fn from_support(support: &BTreeMap<u32, BTreeSet<u32>>) -> Self {
        let mut by_property: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for (&c, props) in support {
            for &p in props {
                by_property.entry(p).or_default().insert(c);
            }
        }
        CommonalityTable { by_property }
    }

    /// Drops rows held by exactly one concept.
    pub fn prune_singletons(&self) -> Self {
        CommonalityTable {
            by_property: self
                .by_property
                .iter()
                .filter(|(_, cs)| cs.len() >= 2)
                .map(|(&p, cs)| (p, cs.clone()))
                .collect(),
        }
    }

    /// Concept → property-id set view of the table.
    pub fn to_support(&self) -> BTreeMap<u32, BTreeSet<u32>> {
        let mut out: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for (&p, cs) in &self.by_property {
            for &c in cs {
                out.entry(c).or_default().insert(p);
            }
        }
        out
    }

    pub fn concepts_of(&self, property: u32) -> Option<&BTreeSet<u32>> {
        self.by_property.get(&property)
    }

    pub fn rows(&self) -> impl Iterator<Item = (u32, &BTreeSet<u32>)> {
        self.by_property.iter().map(|(&p, cs)| (p, cs))
    }

    pub fn len(&self) -> usize {
        self.by_property.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_property.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.by_property.values().map(BTreeSet::len).sum()
    }

    /// Named rows, largest concept group first, then by property string;
    /// concepts sorted alphabetically within a row.
    pub fn emit(&self, concepts: &Interner, properties: &Interner) -> Vec<TableRow> {
        let mut rows: Vec<TableRow> = self
            .by_property
            .iter()
            .map(|(&p, cs)| {
                let mut names: Vec<String> = cs.iter().map(|&c| concepts.name(c).into()).collect();
                names.sort();
                TableRow {
                    property: properties.name(p).into(),
                    concepts: names,
                }
            })
            .collect();
        sort_rows(&mut rows);
        rows
    }
}

pub fn sort_rows(rows: &mut [TableRow]) {
    rows.sort_by(|a, b| {
        b.concepts
            .len()
            .cmp(&a.concepts.len())
            .then_with(|| a.property.cmp(&b.property))
    });
}

/// One emitted row: a property and the concepts sharing it.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TableRow {
    pub property: String,
    pub concepts: Vec<String>,
}
