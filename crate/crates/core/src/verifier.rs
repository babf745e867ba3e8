//! Deciding which retrieved candidates to keep.
//!
//! A candidate `(c, p)` survives when its verifier probability is at least
//! `λ`. Three scorers are available: probabilities supplied from outside
//! (e.g. a fine-tuned joint encoder run elsewhere), a logistic model over six
//! pair features trained on labeled pairs, and the bi-encoder probability
//! itself.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::commonality::{AssignmentError, PropertyAssignment};
use crate::corpus::{normalize, tokens, ConceptPropertyPair};
use crate::encoder::{BiEncoderModel, EncoderError, Side};
use crate::evalkit::jaccard;
use crate::math::{dot, norm, sigmoid};
use crate::mips::{Candidates, PropertyIndex};
use crate::optim::AdamW;
use crate::rng::StageRng;

/// Thresholds compared when tuning `λ`.
pub const LAMBDA_SWEEP: [f64; 3] = [0.5, 0.75, 0.9];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifierError {
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("score {0:?} is not a number")]
    BadScore(String),
    #[error("expected 3 tab-separated columns, found {0}")]
    ColumnCount(usize),
    #[error("empty concept or property")]
    EmptyKey,
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: alloc::boxed::Box<VerifierError>,
    },
    #[error("lambda {0} outside [0, 1]")]
    BadLambda(f64),
    #[error("{} candidate pair(s) have no score, first: {:?}", .0.len(), .0.first())]
    MissingScores(Vec<(String, String)>),
    #[error("verifier weights became non-finite")]
    NonFinite,
    #[error("verifier training data needs both positive and negative labels")]
    SingleClass,
    #[error("verifier training pair ({0}, {1}) carries no label")]
    Unlabeled(String, String),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum VerifierSource {
    #[default]
    External,
    Builtin,
    Passthrough,
}

impl core::str::FromStr for VerifierSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "external" | "external-scores" => Ok(VerifierSource::External),
            "builtin" | "builtin-logistic" => Ok(VerifierSource::Builtin),
            "passthrough" | "biencoder-passthrough" => Ok(VerifierSource::Passthrough),
            other => Err(alloc::format!("unknown verifier mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct VerifierConfig {
    pub lambda: f64,
    pub source: VerifierSource,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            lambda: 0.75,
            source: VerifierSource::External,
        }
    }
}

impl VerifierConfig {
    pub fn validate(&self) -> Result<(), VerifierError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(VerifierError::BadLambda(self.lambda));
        }
        Ok(())
    }
}

/// Probabilities for (concept, property) pairs keyed by normalized strings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairScoreSet {
    scores: BTreeMap<(String, String), f64>,
    pub provenance: String,
}

/// A pair whose score was given more than once; the later value is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplicateScore {
    pub line: usize,
    pub concept: String,
    pub property: String,
    pub previous: f64,
    pub kept: f64,
}

impl PairScoreSet {
    pub fn new(provenance: impl Into<String>) -> Self {
        PairScoreSet {
            scores: BTreeMap::new(),
            provenance: provenance.into(),
        }
    }

    /// Stores a score, returning the one it replaced.
    pub fn insert(&mut self, concept: &str, property: &str, score: f64) -> Result<Option<f64>, VerifierError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(VerifierError::ScoreOutOfRange(score));
        }
        let key = (normalize(concept), normalize(property));
        if key.0.is_empty() || key.1.is_empty() {
            return Err(VerifierError::EmptyKey);
        }
        Ok(self.scores.insert(key, score))
    }

    pub fn get(&self, concept: &str, property: &str) -> Option<f64> {
        // keys are stored normalized; try the fast path first
        self.scores
            .get(&(concept.to_string(), property.to_string()))
            .or_else(|| self.scores.get(&(normalize(concept), normalize(property))))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.scores.iter().map(|((c, p), s)| (c.as_str(), p.as_str(), *s))
    }

    /// Parses `concept\tproperty\tscore` lines. Blank lines are skipped;
    /// duplicates keep the last score and are reported.
    pub fn parse_tsv(text: &str, provenance: impl Into<String>) -> Result<(Self, Vec<DuplicateScore>), VerifierError> {
        let mut set = PairScoreSet::new(provenance);
        let mut duplicates = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let at = |e: VerifierError| VerifierError::AtLine {
                line: i + 1,
                source: alloc::boxed::Box::new(e),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(at(VerifierError::ColumnCount(cols.len())));
            }
            let raw = cols[2].trim();
            let score: f64 = raw.parse().map_err(|_| at(VerifierError::BadScore(raw.into())))?;
            if let Some(previous) = set.insert(cols[0], cols[1], score).map_err(at)? {
                duplicates.push(DuplicateScore {
                    line: i + 1,
                    concept: normalize(cols[0]),
                    property: normalize(cols[1]),
                    previous,
                    kept: score,
                });
            }
        }
        Ok((set, duplicates))
    }
}

pub const FEATURE_COUNT: usize = 6;
pub type PairFeatures = [f64; FEATURE_COUNT];

/// Computes verifier features for pairs:
/// `[dot, cosine, |φcon(c)|, |φprop(p)|, token Jaccard, normalized rank]`,
/// where the rank is the fraction of index rows whose dot product with the
/// concept strictly exceeds the pair's.
pub struct FeatureExtractor<'a> {
    model: &'a BiEncoderModel,
    index: &'a PropertyIndex,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(model: &'a BiEncoderModel, index: &'a PropertyIndex) -> Self {
        FeatureExtractor { model, index }
    }

    /// Features of `concept` paired with each of `properties`.
    pub fn features(&self, concept: &str, properties: &[&str]) -> Result<Vec<PairFeatures>, VerifierError> {
        let u = self.model.embed(Side::Concept, concept)?;
        let u_norm = norm(&u);
        let mut all_dots: Vec<f64> = (0..self.index.len()).map(|i| dot(self.index.row(i), &u)).collect();
        all_dots.sort_by(|a, b| a.total_cmp(b));
        let n = all_dots.len() as f64;
        let concept_tokens = tokens(concept).into_iter().collect();
        properties
            .iter()
            .map(|p| {
                let v = self.model.embed(Side::Property, p)?;
                let d = dot(&u, &v);
                let v_norm = norm(&v);
                let cos = if u_norm == 0.0 || v_norm == 0.0 {
                    0.0
                } else {
                    d / (u_norm * v_norm)
                };
                let higher = all_dots.len() - all_dots.partition_point(|x| *x <= d);
                let overlap = jaccard(&concept_tokens, &tokens(p).into_iter().collect());
                Ok([d, cos, u_norm, v_norm, overlap, higher as f64 / n])
            })
            .collect()
    }
}

/// Logistic model over [`PairFeatures`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BuiltinVerifierModel {
    pub weights: PairFeatures,
    pub bias: f64,
}

impl BuiltinVerifierModel {
    pub fn probability(&self, x: &PairFeatures) -> f64 {
        sigmoid(self.bias + dot(&self.weights, x))
    }

    /// Fits the weights with full-batch AdamW on standardized features and
    /// folds the standardization back into the weights.
    pub fn fit(x: &[PairFeatures], y: &[bool], seed: u64) -> Result<Self, VerifierError> {
        let positives = y.iter().filter(|&&l| l).count();
        if positives == 0 || positives == y.len() {
            return Err(VerifierError::SingleClass);
        }
        let n = x.len() as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        let mut scale = [0.0; FEATURE_COUNT];
        for row in x {
            for j in 0..FEATURE_COUNT {
                mean[j] += row[j] / n;
            }
        }
        for row in x {
            for j in 0..FEATURE_COUNT {
                scale[j] += (row[j] - mean[j]) * (row[j] - mean[j]) / n;
            }
        }
        for s in scale.iter_mut() {
            *s = libm::sqrt(*s);
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        let z: Vec<PairFeatures> = x
            .iter()
            .map(|row| core::array::from_fn(|j| (row[j] - mean[j]) / scale[j]))
            .collect();

        // params = weights followed by the bias
        let mut rng = StageRng::seed_from_u64(seed);
        let mut params: Vec<f64> = (0..FEATURE_COUNT).map(|_| rng.random_range(-0.01..0.01)).collect();
        params.push(0.0);
        let mut opt = AdamW::new(0.05, 0.0);
        let (mut m, mut v) = (alloc::vec![0.0; FEATURE_COUNT + 1], alloc::vec![0.0; FEATURE_COUNT + 1]);
        for _ in 0..1500 {
            let mut grad = alloc::vec![0.0; FEATURE_COUNT + 1];
            for (row, &label) in z.iter().zip(y) {
                let p = sigmoid(params[FEATURE_COUNT] + dot(&params[..FEATURE_COUNT], row));
                let g = (p - if label { 1.0 } else { 0.0 }) / n;
                for j in 0..FEATURE_COUNT {
                    grad[j] += g * row[j];
                }
                grad[FEATURE_COUNT] += g;
            }
            opt.begin_step();
            opt.update(&mut params, &grad, &mut m, &mut v);
        }

        let weights: PairFeatures = core::array::from_fn(|j| params[j] / scale[j]);
        let bias = params[FEATURE_COUNT] - (0..FEATURE_COUNT).map(|j| params[j] * mean[j] / scale[j]).sum::<f64>();
        if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(VerifierError::NonFinite);
        }
        Ok(BuiltinVerifierModel { weights, bias })
    }

    /// Trains on labeled pairs with true negatives.
    pub fn train(
        labeled: &[ConceptPropertyPair],
        features: &FeatureExtractor<'_>,
        seed: u64,
    ) -> Result<Self, VerifierError> {
        let mut x = Vec::with_capacity(labeled.len());
        let mut y = Vec::with_capacity(labeled.len());
        for pair in labeled {
            let label = pair
                .label
                .ok_or_else(|| VerifierError::Unlabeled(pair.concept.clone(), pair.property.clone()))?;
            x.extend(features.features(&pair.concept, &[&pair.property])?);
            y.push(label);
        }
        Self::fit(&x, &y, seed)
    }
}

/// Source of verifier probabilities for retrieved candidates.
pub enum Scorer<'a> {
    External(&'a PairScoreSet),
    Builtin {
        model: &'a BuiltinVerifierModel,
        features: FeatureExtractor<'a>,
    },
    /// The bi-encoder's own probability carried by each candidate.
    Passthrough,
}

impl Scorer<'_> {
    /// Probabilities for every candidate, in `Candidates::iter` order.
    /// External scoring fails if any candidate pair is missing from the set.
    pub fn score_candidates(&self, candidates: &Candidates) -> Result<Vec<Vec<f64>>, VerifierError> {
        match self {
            Scorer::Passthrough => Ok(candidates
                .lists
                .iter()
                .map(|list| list.iter().map(|c| c.probability).collect())
                .collect()),
            Scorer::External(set) => {
                let mut missing = Vec::new();
                let mut out = Vec::with_capacity(candidates.lists.len());
                for (c, list) in candidates.lists.iter().enumerate() {
                    let concept = candidates.concepts.name(c as u32);
                    let mut scores = Vec::with_capacity(list.len());
                    for cand in list {
                        let property = candidates.properties.name(cand.property_id);
                        match set.get(concept, property) {
                            Some(s) => scores.push(s),
                            None => missing.push((concept.to_string(), property.to_string())),
                        }
                    }
                    out.push(scores);
                }
                if missing.is_empty() {
                    Ok(out)
                } else {
                    Err(VerifierError::MissingScores(missing))
                }
            }
            Scorer::Builtin { model, features } => candidates
                .lists
                .iter()
                .enumerate()
                .map(|(c, list)| {
                    let props: Vec<&str> = list.iter().map(|x| candidates.properties.name(x.property_id)).collect();
                    let feats = features.features(candidates.concepts.name(c as u32), &props)?;
                    Ok(feats.iter().map(|f| model.probability(f)).collect())
                })
                .collect(),
        }
    }
}

/// Keeps exactly the candidates whose probability is at least `lambda`.
/// Every concept appears in the result, possibly with no property.
pub fn verify(candidates: &Candidates, lambda: f64, scorer: &Scorer<'_>) -> Result<PropertyAssignment, VerifierError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(VerifierError::BadLambda(lambda));
    }
    let scores = scorer.score_candidates(candidates)?;
    let mut out = PropertyAssignment::new();
    for (c, (list, probs)) in candidates.lists.iter().zip(&scores).enumerate() {
        out.touch(c as u32);
        for (cand, &p) in list.iter().zip(probs) {
            if p >= lambda {
                out.insert(c as u32, cand.property_id, p)?;
            }
        }
    }
    Ok(out)
}
