//! Metrics and analysis helpers: pair-classification and example-based
//! multi-label F1, property-disjoint splits, a bag-of-words one-vs-rest
//! baseline classifier, Jaccard matching of commonality tables and cosine
//! nearest neighbours.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::augment::is_augmentation;
use crate::commonality::TableRow;
use crate::corpus::{tokens, ConceptPropertyPair, Interner};
use crate::math::{cosine, sigmoid};
use crate::rng::StageRng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("gold set is empty")]
    EmptyGold,
    #[error("gold pair ({0}, {1}) carries no label")]
    Unlabeled(String, String),
    #[error("need at least two distinct properties to split, found {0}")]
    TooFewProperties(usize),
    #[error("split fraction must lie in [0, 1]")]
    BadFraction,
    #[error("example ids differ between predictions and gold (first mismatch: {0})")]
    IdMismatch(String),
    #[error("label space is empty")]
    EmptyLabelSpace,
    #[error("training set is empty")]
    EmptyTraining,
    #[error("unknown query {0:?}")]
    UnknownQuery(String),
    #[error("query {0:?} has a zero vector")]
    ZeroQuery(String),
    #[error("embedding rows must all have dimension {0}")]
    Ragged(usize),
}

/// Precision, recall and F1 with the underlying counts.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Prf1 {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Prf1 {
            precision,
            recall,
            // 2tp / (2tp + fp + fn) equals the harmonic mean of the two
            // ratios and is a single correctly rounded division
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
            tp,
            fp,
            fn_,
        }
    }
}

/// Binary P/R/F1 of a predicted pair set against labeled gold pairs. Any
/// predicted pair that is not a gold positive counts as a false positive.
pub fn pair_f1(predictions: &BTreeSet<(String, String)>, gold: &[ConceptPropertyPair]) -> Result<Prf1, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let mut positives = BTreeSet::new();
    for pair in gold {
        match pair.label {
            Some(true) => {
                positives.insert((pair.concept.clone(), pair.property.clone()));
            }
            Some(false) => {}
            None => return Err(EvalError::Unlabeled(pair.concept.clone(), pair.property.clone())),
        }
    }
    let tp = predictions.intersection(&positives).count();
    Ok(Prf1::from_counts(tp, predictions.len() - tp, positives.len() - tp))
}

/// Splits pairs so that no property occurs on both sides. `fraction` of the
/// distinct properties (rounded, at least one per side) go to the first set.
pub fn property_split(
    pairs: &[ConceptPropertyPair],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<ConceptPropertyPair>, Vec<ConceptPropertyPair>), EvalError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(EvalError::BadFraction);
    }
    let properties: Interner = pairs.iter().map(|p| p.property.as_str()).collect();
    let n = properties.len();
    if n < 2 {
        return Err(EvalError::TooFewProperties(n));
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut StageRng::seed_from_u64(seed));
    let n_train = (libm::round(fraction * n as f64) as usize).clamp(1, n - 1);
    let train_props: BTreeSet<u32> = order[..n_train].iter().copied().collect();
    Ok(pairs
        .iter()
        .cloned()
        .partition(|p| train_props.contains(&properties.get(&p.property).unwrap_or(u32::MAX))))
}

/// Example-based multi-label P/R/F1. Precision averages `|pred ∩ gold| /
/// |pred|` over examples with a non-empty prediction, recall averages
/// `|pred ∩ gold| / |gold|` over examples with non-empty gold, and F1 is
/// their harmonic mean. Counts are micro totals.
pub fn example_f1(
    predicted: &BTreeMap<String, BTreeSet<String>>,
    gold: &BTreeMap<String, BTreeSet<String>>,
) -> Result<Prf1, EvalError> {
    if let Some(id) = predicted
        .keys()
        .find(|k| !gold.contains_key(*k))
        .or_else(|| gold.keys().find(|k| !predicted.contains_key(*k)))
    {
        return Err(EvalError::IdMismatch(id.clone()));
    }
    let (mut p_sum, mut p_n, mut r_sum, mut r_n) = (0.0, 0usize, 0.0, 0usize);
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (id, g) in gold {
        let p = &predicted[id];
        let hit = p.intersection(g).count();
        tp += hit;
        fp += p.len() - hit;
        fn_ += g.len() - hit;
        if !p.is_empty() {
            p_sum += hit as f64 / p.len() as f64;
            p_n += 1;
        }
        if !g.is_empty() {
            r_sum += hit as f64 / g.len() as f64;
            r_n += 1;
        }
    }
    let precision = if p_n == 0 { 0.0 } else { p_sum / p_n as f64 };
    let recall = if r_n == 0 { 0.0 } else { r_sum / r_n as f64 };
    Ok(Prf1 {
        precision,
        recall,
        f1: harmonic(precision, recall),
        tp,
        fp,
        fn_,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ToyConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            epochs: 40,
            learning_rate: 0.5,
            l2: 1e-4,
            threshold: 0.5,
            seed: 0,
        }
    }
}

/// One-vs-rest logistic regression over binary bag-of-words features.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyClassifier {
    features: Interner,
    labels: Interner,
    // labels × (features + 1), bias in the last column
    weights: Vec<f64>,
    threshold: f64,
}

fn features_of(features: &Interner, text: &str) -> Vec<u32> {
    let set: BTreeSet<u32> = tokens(text).iter().filter_map(|t| features.get(t)).collect();
    set.into_iter().collect()
}

impl ToyClassifier {
    /// Trains on `(text, labels)` examples with per-example SGD in seeded
    /// shuffled order. Labels outside `label_space` are ignored.
    pub fn train(
        examples: &[(String, Vec<String>)],
        label_space: &[String],
        config: &ToyConfig,
    ) -> Result<Self, EvalError> {
        if label_space.is_empty() {
            return Err(EvalError::EmptyLabelSpace);
        }
        if examples.is_empty() {
            return Err(EvalError::EmptyTraining);
        }
        let labels: Interner = label_space.iter().collect();
        let mut features = Interner::new();
        for (text, _) in examples {
            for t in tokens(text) {
                features.intern(&t);
            }
        }
        let width = features.len() + 1;
        let mut model = ToyClassifier {
            weights: vec![0.0; labels.len() * width],
            features,
            labels,
            threshold: config.threshold,
        };
        let encoded: Vec<(Vec<u32>, Vec<bool>)> = examples
            .iter()
            .map(|(text, ls)| {
                let mut target = vec![false; model.labels.len()];
                for l in ls {
                    if let Some(id) = model.labels.get(l) {
                        target[id as usize] = true;
                    }
                }
                (features_of(&model.features, text), target)
            })
            .collect();

        let mut order: Vec<usize> = (0..encoded.len()).collect();
        let mut rng = StageRng::seed_from_u64(config.seed);
        let bias = width - 1;
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let (feats, target) = &encoded[i];
                for (l, &y) in target.iter().enumerate() {
                    let row = &mut model.weights[l * width..(l + 1) * width];
                    let z = row[bias] + feats.iter().map(|&f| row[f as usize]).sum::<f64>();
                    let g = sigmoid(z) - if y { 1.0 } else { 0.0 };
                    let step = config.learning_rate * g;
                    for &f in feats {
                        let w = &mut row[f as usize];
                        *w -= step + config.learning_rate * config.l2 * *w;
                    }
                    row[bias] -= step;
                }
            }
        }
        Ok(model)
    }

    pub fn label_space(&self) -> &[String] {
        self.labels.names()
    }

    /// Per-label probabilities for `text`, in label-space order.
    pub fn probabilities(&self, text: &str) -> Vec<f64> {
        let width = self.features.len() + 1;
        let feats = features_of(&self.features, text);
        (0..self.labels.len())
            .map(|l| {
                let row = &self.weights[l * width..(l + 1) * width];
                sigmoid(row[width - 1] + feats.iter().map(|&f| row[f as usize]).sum::<f64>())
            })
            .collect()
    }

    /// Labels with probability at or above the threshold; if none, the
    /// single most probable label (lowest index on ties).
    pub fn predict(&self, text: &str) -> BTreeSet<String> {
        self.predict_among(text, |_| true)
    }

    /// Like [`predict`](Self::predict) but only over base labels, so a model
    /// trained on augmented labels still answers with a base label when
    /// nothing clears the threshold.
    pub fn predict_base(&self, text: &str) -> BTreeSet<String> {
        self.predict_among(text, |l| !is_augmentation(l))
    }

    fn predict_among(&self, text: &str, keep: impl Fn(&str) -> bool) -> BTreeSet<String> {
        let probs = self.probabilities(text);
        let kept: Vec<(usize, f64)> = probs
            .into_iter()
            .enumerate()
            .filter(|(l, _)| keep(self.labels.name(*l as u32)))
            .collect();
        let mut out: BTreeSet<String> = kept
            .iter()
            .filter(|(_, p)| *p >= self.threshold)
            .map(|(l, _)| self.labels.name(*l as u32).into())
            .collect();
        if out.is_empty() {
            let best = kept
                .iter()
                .fold(None, |best: Option<(usize, f64)>, &(l, p)| match best {
                    Some((_, bp)) if bp >= p => best,
                    _ => Some((l, p)),
                });
            if let Some((l, _)) = best {
                out.insert(self.labels.name(l as u32).into());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PropertyMatch {
    pub predicted_property: String,
    pub best_gold: String,
    pub jaccard: f64,
}

pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// For each predicted property, the gold property whose concept set has the
/// highest Jaccard overlap (lexicographically smallest gold property on ties).
pub fn jaccard_match(predicted: &[TableRow], gold: &[TableRow]) -> Vec<PropertyMatch> {
    let mut gold_sets: Vec<(&str, BTreeSet<&str>)> = gold
        .iter()
        .map(|r| (r.property.as_str(), r.concepts.iter().map(String::as_str).collect()))
        .collect();
    gold_sets.sort_by(|a, b| a.0.cmp(b.0));
    predicted
        .iter()
        .filter_map(|row| {
            let set: BTreeSet<&str> = row.concepts.iter().map(String::as_str).collect();
            let mut best: Option<(&str, f64)> = None;
            for (name, g) in &gold_sets {
                let j = jaccard(&set, g);
                if best.is_none_or(|(_, b)| j > b) {
                    best = Some((name, j));
                }
            }
            best.map(|(name, j)| PropertyMatch {
                predicted_property: row.property.clone(),
                best_gold: name.into(),
                jaccard: j,
            })
        })
        .collect()
}

/// Named vectors of equal dimension, e.g. concept embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    names: Interner,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingSet {
    /// Later duplicates of a name are dropped.
    pub fn new(dim: usize, rows: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self, EvalError> {
        let mut set = EmbeddingSet {
            names: Interner::new(),
            dim,
            data: Vec::new(),
        };
        for (name, v) in rows {
            if v.len() != dim {
                return Err(EvalError::Ragged(dim));
            }
            if set.names.get(&name).is_some() {
                continue;
            }
            set.names.intern(&name);
            set.data.extend(v);
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        self.names.names()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.get(name).map(|i| i as usize)
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }
}

/// The `n` entries most cosine-similar to `query`, the query itself first,
/// then by descending cosine with lower index first on ties. Zero vectors
/// other than the query rank with cosine 0.
pub fn nearest_neighbors(set: &EmbeddingSet, query: &str, n: usize) -> Result<Vec<(String, f64)>, EvalError> {
    let qi = set
        .index_of(query)
        .ok_or_else(|| EvalError::UnknownQuery(query.into()))?;
    let q = set.vector(qi);
    if cosine(q, q).is_none() {
        return Err(EvalError::ZeroQuery(query.into()));
    }
    let mut scored: Vec<(usize, f64)> = (0..set.len())
        .filter(|&i| i != qi)
        .map(|i| (i, cosine(q, set.vector(i)).unwrap_or(0.0)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out = vec![(query.into(), 1.0)];
    out.extend(scored.into_iter().map(|(i, c)| (set.names()[i].clone(), c)));
    out.truncate(n);
    Ok(out)
}
