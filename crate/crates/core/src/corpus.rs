//! Ingesting (concept, property) pairs and building the concept and property
//! vocabularies.
//!
//! Three textual sources are understood: knowledge-graph triples that get
//! verbalized into pairs, tab-separated pair lists (optionally labeled), and
//! enumerated examples of the form `1. Car, scooter, train have wheels`.
//! Everything here works on `&str`; reading files is the caller's job.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("empty {field} after normalization")]
    EmptyField { field: &'static str },
    #[error("unsupported relation {0:?}")]
    UnsupportedRelation(String),
    #[error("expected {expected} tab-separated columns, found {found}")]
    ColumnCount { expected: &'static str, found: usize },
    #[error("label must be 0 or 1, got {0:?}")]
    BadLabel(String),
    #[error("malformed line: {0:?}")]
    MalformedLine(String),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<CorpusError>,
    },
    #[error("corpus contains no pairs")]
    EmptyCorpus,
    #[error("minimum count must be at least 1")]
    InvalidMinCount,
}

impl CorpusError {
    fn at(self, line: usize) -> Self {
        CorpusError::AtLine {
            line,
            source: Box::new(self),
        }
    }
}

/// Lowercases, turns underscores into spaces, collapses whitespace runs and
/// trims. Idempotent.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase().replace('_', " ");
    let mut out = String::with_capacity(lowered.len());
    for token in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

/// Whitespace tokens of the normalized phrase.
pub fn tokens(phrase: &str) -> Vec<String> {
    normalize(phrase)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(ToString::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Relation {
    IsA,
    PartOf,
    AtLocation,
    UsedFor,
    HasProperty,
}

impl Relation {
    pub const ALL: [Relation; 5] = [
        Relation::IsA,
        Relation::PartOf,
        Relation::AtLocation,
        Relation::UsedFor,
        Relation::HasProperty,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::IsA => "IsA",
            Relation::PartOf => "PartOf",
            Relation::AtLocation => "AtLocation",
            Relation::UsedFor => "UsedFor",
            Relation::HasProperty => "HasProperty",
        }
    }

    /// Text placed before the tail when verbalizing; `None` keeps the tail
    /// as the whole property.
    fn prefix(self) -> Option<&'static str> {
        match self {
            Relation::IsA | Relation::HasProperty => None,
            Relation::PartOf => Some("part of"),
            Relation::UsedFor => Some("used for"),
            Relation::AtLocation => Some("located in"),
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = CorpusError;

    /// Accepts the bare names as well as ConceptNet URIs (`/r/IsA`).
    /// `LocatedAt` is read as `AtLocation`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let name = s.trim();
        let name = name.strip_prefix("/r/").unwrap_or(name);
        match name {
            "IsA" => Ok(Relation::IsA),
            "PartOf" => Ok(Relation::PartOf),
            "AtLocation" | "LocatedAt" => Ok(Relation::AtLocation),
            "UsedFor" => Ok(Relation::UsedFor),
            "HasProperty" => Ok(Relation::HasProperty),
            other => Err(CorpusError::UnsupportedRelation(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub head: String,
    pub relation: Relation,
    pub tail: String,
}

impl Triple {
    pub fn new(head: &str, relation: Relation, tail: &str) -> Result<Self, CorpusError> {
        if head.trim().is_empty() {
            return Err(CorpusError::EmptyField { field: "head" });
        }
        if tail.trim().is_empty() {
            return Err(CorpusError::EmptyField { field: "tail" });
        }
        Ok(Triple {
            head: head.to_string(),
            relation,
            tail: tail.to_string(),
        })
    }

    /// Parses `head\trelation\ttail`.
    pub fn parse_tsv(line: &str) -> Result<Self, CorpusError> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(CorpusError::ColumnCount {
                expected: "3",
                found: cols.len(),
            });
        }
        Triple::new(cols[0], cols[1].parse()?, cols[2])
    }

    pub fn verbalize(&self) -> Result<ConceptPropertyPair, CorpusError> {
        let tail = normalize(&self.tail);
        let property = match self.relation.prefix() {
            Some(prefix) => format!("{prefix} {tail}"),
            None => tail,
        };
        ConceptPropertyPair::new(&self.head, &property, None)
    }
}

/// One (concept, property) record, normalized. `label` is only present in
/// labeled evaluation or verifier-training data.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ConceptPropertyPair {
    pub concept: String,
    pub property: String,
    pub label: Option<bool>,
}

impl ConceptPropertyPair {
    pub fn new(concept: &str, property: &str, label: Option<bool>) -> Result<Self, CorpusError> {
        let concept = normalize(concept);
        let property = normalize(property);
        if concept.is_empty() {
            return Err(CorpusError::EmptyField { field: "concept" });
        }
        if property.is_empty() {
            return Err(CorpusError::EmptyField { field: "property" });
        }
        Ok(ConceptPropertyPair {
            concept,
            property,
            label,
        })
    }

    pub fn positive(concept: &str, property: &str) -> Result<Self, CorpusError> {
        Self::new(concept, property, Some(true))
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.concept, &self.property)
    }

    /// Unlabeled records count as positives.
    pub fn is_positive(&self) -> bool {
        self.label != Some(false)
    }

    /// Parses `concept\tproperty` with an optional third `0`/`1` label column.
    pub fn parse_tsv(line: &str) -> Result<Self, CorpusError> {
        let cols: Vec<&str> = line.split('\t').collect();
        let label = match cols.len() {
            2 => None,
            3 => match cols[2].trim() {
                "1" => Some(true),
                "0" => Some(false),
                other => return Err(CorpusError::BadLabel(other.to_string())),
            },
            n => {
                return Err(CorpusError::ColumnCount {
                    expected: "2 or 3",
                    found: n,
                })
            }
        };
        ConceptPropertyPair::new(cols[0], cols[1], label)
    }
}

/// Cue words separating the concept list from the property, and the text
/// kept in front of the property for each (`None` drops the copula).
const CUES: [(&[&str], Option<&str>); 5] = [
    (&["can", "be"], Some("can be")),
    (&["are"], None),
    (&["is"], None),
    (&["have"], Some("has")),
    (&["has"], Some("has")),
];

fn strip_index(line: &str) -> &str {
    let trimmed = line.trim_start();
    let digits = trimmed.len() - trimmed.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return trimmed;
    }
    match trimmed[digits..].chars().next() {
        Some('.') | Some(')') => &trimmed[digits + 1..],
        _ => trimmed,
    }
}

/// Parses one enumerated example such as
/// `4. Car, scooter, train have wheels` into one pair per listed concept.
pub fn parse_enumerated_line(line: &str) -> Result<Vec<ConceptPropertyPair>, CorpusError> {
    let malformed = || CorpusError::MalformedLine(line.to_string());
    let body = strip_index(line);
    let (list_head, last) = match body.rfind(',') {
        Some(i) => (&body[..i], &body[i + 1..]),
        None => ("", body),
    };

    // first cue in the segment after the last comma; the concept before it
    // is the final list entry
    let words: Vec<&str> = last.split_whitespace().collect();
    let mut found = None;
    'scan: for start in 1..words.len() {
        for (cue, keep) in CUES.iter() {
            let end = start + cue.len();
            if end < words.len()
                && words[start..end]
                    .iter()
                    .zip(cue.iter())
                    .all(|(w, c)| w.eq_ignore_ascii_case(c))
            {
                found = Some((start, end, *keep));
                break 'scan;
            }
        }
    }
    let (start, end, keep) = found.ok_or_else(malformed)?;

    let rest = words[end..].join(" ");
    let property = match keep {
        Some(prefix) => format!("{prefix} {rest}"),
        None => rest,
    };
    let last_concept = words[..start].join(" ");

    let mut concepts: Vec<&str> = if list_head.trim().is_empty() {
        Vec::new()
    } else {
        list_head.split(',').collect()
    };
    concepts.push(&last_concept);

    let pairs = concepts
        .into_iter()
        .filter(|c| !normalize(c).is_empty())
        .map(|c| ConceptPropertyPair::new(c, &property, None))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| malformed())?;
    if pairs.is_empty() {
        return Err(malformed());
    }
    Ok(pairs)
}

/// Records parsed from a multi-line text plus the lines that were rejected.
#[derive(Debug, Clone, Default)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejected: Vec<CorpusError>,
}

fn parse_lines<T>(
    text: &str,
    strict: bool,
    mut parse: impl FnMut(&str) -> Result<Vec<T>, CorpusError>,
) -> Result<Parsed<T>, CorpusError> {
    let mut out = Parsed {
        records: Vec::new(),
        rejected: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse(line) {
            Ok(mut recs) => out.records.append(&mut recs),
            Err(e) if strict => return Err(e.at(i + 1)),
            Err(e) => out.rejected.push(e.at(i + 1)),
        }
    }
    Ok(out)
}

/// Verbalized pairs from a triple TSV. In strict mode the first bad line
/// aborts; otherwise bad lines are collected in `rejected`.
pub fn parse_triples(text: &str, strict: bool) -> Result<Parsed<ConceptPropertyPair>, CorpusError> {
    parse_lines(text, strict, |line| {
        Ok(alloc::vec![Triple::parse_tsv(line)?.verbalize()?])
    })
}

pub fn parse_pairs(text: &str, strict: bool) -> Result<Parsed<ConceptPropertyPair>, CorpusError> {
    parse_lines(text, strict, |line| {
        Ok(alloc::vec![ConceptPropertyPair::parse_tsv(line)?])
    })
}

pub fn parse_enumerated(text: &str, strict: bool) -> Result<Parsed<ConceptPropertyPair>, CorpusError> {
    parse_lines(text, strict, parse_enumerated_line)
}

/// Drops repeated (concept, property) keys, keeping the first occurrence.
pub fn dedup_pairs(pairs: impl IntoIterator<Item = ConceptPropertyPair>) -> Vec<ConceptPropertyPair> {
    let mut seen = BTreeSet::new();
    pairs
        .into_iter()
        .filter(|p| seen.insert((p.concept.clone(), p.property.clone())))
        .collect()
}

/// Dense string ids in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    ids: BTreeMap<String, u32>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = u32::try_from(self.names.len()).expect("more than u32::MAX entries");
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl<S: AsRef<str>> FromIterator<S> for Interner {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut interner = Interner::new();
        for s in iter {
            interner.intern(s.as_ref());
        }
        interner
    }
}

/// The concept vocabulary and the property vocabulary (properties seen in at
/// least `min_count` distinct pairs), with per-property pair counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub concepts: Interner,
    pub properties: Interner,
    property_counts: Vec<u32>,
}

impl Vocabulary {
    pub fn build(pairs: &[ConceptPropertyPair], min_count: u32) -> Result<Self, CorpusError> {
        if min_count == 0 {
            return Err(CorpusError::InvalidMinCount);
        }
        if pairs.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let unique = dedup_pairs(pairs.iter().cloned());
        let mut concepts = Interner::new();
        let mut seen_props = Interner::new();
        let mut counts: Vec<u32> = Vec::new();
        for pair in &unique {
            concepts.intern(&pair.concept);
            let id = seen_props.intern(&pair.property) as usize;
            if id == counts.len() {
                counts.push(0);
            }
            counts[id] += 1;
        }
        let mut properties = Interner::new();
        let mut property_counts = Vec::new();
        for (name, &count) in seen_props.names().iter().zip(&counts) {
            if count >= min_count {
                properties.intern(name);
                property_counts.push(count);
            }
        }
        Ok(Vocabulary {
            concepts,
            properties,
            property_counts,
        })
    }

    /// Reassembles a vocabulary from stored lists.
    pub fn from_parts(concepts: Interner, properties: Vec<(String, u32)>) -> Self {
        let mut interner = Interner::new();
        let mut property_counts = Vec::new();
        for (name, count) in properties {
            let id = interner.intern(&name) as usize;
            if id == property_counts.len() {
                property_counts.push(count);
            }
        }
        Vocabulary {
            concepts,
            properties: interner,
            property_counts,
        }
    }

    pub fn property_count(&self, property_id: u32) -> u32 {
        self.property_counts[property_id as usize]
    }

    pub fn property_counts(&self) -> &[u32] {
        &self.property_counts
    }
}
