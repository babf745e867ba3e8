//! Bi-encoder over concepts and properties.
//!
//! Each side owns a token-embedding table; a phrase is embedded as the mean
//! of its token rows and a pair is scored as `σ(φcon(c) · φprop(p))`.
//! Training minimizes binary cross-entropy over the positives plus randomly
//! corrupted negatives, with AdamW, a held-out validation split and early
//! stopping on validation loss.
//!
//! Parameters are kept exactly representable as `f32` (the on-disk width)
//! while all arithmetic runs in `f64`, so a saved and reloaded model scores
//! bit-identically to the in-memory one.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::corpus::{tokens, ConceptPropertyPair, Interner};
use crate::evalkit::Prf1;
use crate::math::{bce_with_logit, dot, sigmoid};
use crate::optim::AdamW;
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncoderError {
    #[error("phrase is empty after normalization")]
    EmptyPhrase,
    #[error("invalid encoder config: {0}")]
    InvalidConfig(&'static str),
    #[error("training needs at least 10 positive pairs, got {0}")]
    TooFewPositives(usize),
    #[error("cannot corrupt pairs: only one distinct {0} value")]
    CannotCorrupt(Side),
    #[error("loss became non-finite in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("no pairs to evaluate")]
    EmptyEvaluation,
    #[error("evaluation pair ({concept}, {property}) carries no label")]
    Unlabeled { concept: String, property: String },
    #[error("table shape mismatch: {0}")]
    Shape(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Side {
    Concept,
    Property,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Concept => "concept",
            Side::Property => "property",
        }
    }
}

impl core::fmt::Display for Side {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EncoderConfig {
    pub dim: usize,
    pub negatives_per_positive: usize,
    pub learning_rate: f64,
    /// Decoupled; each update scales a touched row by `1 − learning_rate·weight_decay`.
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 64,
            negatives_per_positive: 2,
            learning_rate: 1e-2,
            weight_decay: 0.1,
            batch_size: 8,
            max_epochs: 100,
            patience: 10,
            validation_fraction: 0.10,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.dim == 0 {
            return Err(EncoderError::InvalidConfig("dim must be at least 1"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(EncoderError::InvalidConfig("validation_fraction must lie in (0, 1)"));
        }
        if self.patience > self.max_epochs {
            return Err(EncoderError::InvalidConfig("patience exceeds max_epochs"));
        }
        if self.batch_size == 0 {
            return Err(EncoderError::InvalidConfig("batch_size must be at least 1"));
        }
        if self.negatives_per_positive == 0 {
            return Err(EncoderError::InvalidConfig("negatives_per_positive must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(EncoderError::InvalidConfig(
                "learning_rate must be finite and non-negative",
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(EncoderError::InvalidConfig(
                "weight_decay must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// Token-embedding matrix for one side of the bi-encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    side: Side,
    tokens: Interner,
    dim: usize,
    weights: Vec<f64>,
}

impl EmbeddingTable {
    pub fn from_parts(side: Side, tokens: Interner, dim: usize, weights: Vec<f64>) -> Result<Self, EncoderError> {
        if dim == 0 {
            return Err(EncoderError::Shape("dim must be at least 1"));
        }
        if weights.len() != tokens.len() * dim {
            return Err(EncoderError::Shape("weights do not match rows × dim"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(EncoderError::Shape("non-finite weight"));
        }
        Ok(EmbeddingTable {
            side,
            tokens,
            dim,
            weights,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &Interner {
        &self.tokens
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, index: u32) -> &[f64] {
        let start = index as usize * self.dim;
        &self.weights[start..start + self.dim]
    }

    pub fn row_mut(&mut self, index: u32) -> &mut [f64] {
        let start = index as usize * self.dim;
        &mut self.weights[start..start + self.dim]
    }

    /// Row indices of the phrase's known tokens, repeats included.
    pub fn token_rows(&self, phrase: &str) -> Result<Vec<u32>, EncoderError> {
        let toks = tokens(phrase);
        if toks.is_empty() {
            return Err(EncoderError::EmptyPhrase);
        }
        Ok(toks.iter().filter_map(|t| self.tokens.get(t)).collect())
    }

    /// Mean of the rows of the phrase's known tokens; unknown tokens are
    /// left out and a phrase with no known token embeds to zero.
    pub fn embed(&self, phrase: &str) -> Result<Vec<f64>, EncoderError> {
        Ok(self.mean_of_rows(&self.token_rows(phrase)?))
    }

    pub fn mean_of_rows(&self, rows: &[u32]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        if rows.is_empty() {
            return out;
        }
        for &r in rows {
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w;
            }
        }
        let n = rows.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiEncoderModel {
    pub concept_table: EmbeddingTable,
    pub property_table: EmbeddingTable,
    pub config: EncoderConfig,
    pub training_log: Vec<EpochLog>,
}

impl BiEncoderModel {
    pub fn new(
        concept_table: EmbeddingTable,
        property_table: EmbeddingTable,
        config: EncoderConfig,
    ) -> Result<Self, EncoderError> {
        if concept_table.dim() != property_table.dim() {
            return Err(EncoderError::Shape("concept and property tables differ in dim"));
        }
        if concept_table.side() != Side::Concept || property_table.side() != Side::Property {
            return Err(EncoderError::Shape("tables assigned to the wrong side"));
        }
        Ok(BiEncoderModel {
            concept_table,
            property_table,
            config,
            training_log: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.concept_table.dim()
    }

    pub fn table(&self, side: Side) -> &EmbeddingTable {
        match side {
            Side::Concept => &self.concept_table,
            Side::Property => &self.property_table,
        }
    }

    fn table_mut(&mut self, side: Side) -> &mut EmbeddingTable {
        match side {
            Side::Concept => &mut self.concept_table,
            Side::Property => &mut self.property_table,
        }
    }

    pub fn embed(&self, side: Side, phrase: &str) -> Result<Vec<f64>, EncoderError> {
        self.table(side).embed(phrase)
    }

    pub fn logit(&self, concept: &str, property: &str) -> Result<f64, EncoderError> {
        Ok(dot(
            &self.embed(Side::Concept, concept)?,
            &self.embed(Side::Property, property)?,
        ))
    }

    /// `σ(φcon(c) · φprop(p))`.
    pub fn score(&self, concept: &str, property: &str) -> Result<f64, EncoderError> {
        Ok(sigmoid(self.logit(concept, property)?))
    }

    pub fn encode(&self, pair: &ConceptPropertyPair) -> Result<EncodedPair, EncoderError> {
        Ok(EncodedPair {
            concept_rows: self.concept_table.token_rows(&pair.concept)?,
            property_rows: self.property_table.token_rows(&pair.property)?,
            label: if pair.is_positive() { 1.0 } else { 0.0 },
        })
    }

    pub fn best_epoch(&self) -> Option<&EpochLog> {
        self.training_log
            .iter()
            .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss))
    }
}

/// A pair resolved to token rows, with a 0/1 target.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPair {
    pub concept_rows: Vec<u32>,
    pub property_rows: Vec<u32>,
    pub label: f64,
}

/// Sparse gradient: token row → gradient of that row, per side.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    pub concept: BTreeMap<u32, Vec<f64>>,
    pub property: BTreeMap<u32, Vec<f64>>,
}

impl Gradient {
    pub fn side(&self, side: Side) -> &BTreeMap<u32, Vec<f64>> {
        match side {
            Side::Concept => &self.concept,
            Side::Property => &self.property,
        }
    }
}

fn accumulate(into: &mut BTreeMap<u32, Vec<f64>>, row: u32, dim: usize, scale: f64, v: &[f64]) {
    let g = into.entry(row).or_insert_with(|| vec![0.0; dim]);
    for (gi, vi) in g.iter_mut().zip(v) {
        *gi += scale * vi;
    }
}

/// Mean BCE over `batch`.
pub fn batch_loss(model: &BiEncoderModel, batch: &[EncodedPair]) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|ex| {
            let u = model.concept_table.mean_of_rows(&ex.concept_rows);
            let v = model.property_table.mean_of_rows(&ex.property_rows);
            bce_with_logit(dot(&u, &v), ex.label)
        })
        .sum();
    total / batch.len() as f64
}

/// Mean BCE over `batch` and its gradient with respect to every touched
/// token row. With `z = u·v`, `∂L/∂z = σ(z) − y`, and each occurrence of a
/// concept token receives `(σ(z) − y)·v / n_concept_tokens` (symmetric for
/// property tokens).
pub fn batch_loss_and_gradient(model: &BiEncoderModel, batch: &[EncodedPair]) -> (f64, Gradient) {
    let dim = model.dim();
    let scale = 1.0 / batch.len() as f64;
    let mut grad = Gradient::default();
    let mut total = 0.0;
    for ex in batch {
        let u = model.concept_table.mean_of_rows(&ex.concept_rows);
        let v = model.property_table.mean_of_rows(&ex.property_rows);
        let z = dot(&u, &v);
        total += bce_with_logit(z, ex.label);
        let dz = (sigmoid(z) - ex.label) * scale;
        if !ex.concept_rows.is_empty() {
            let s = dz / ex.concept_rows.len() as f64;
            for &r in &ex.concept_rows {
                accumulate(&mut grad.concept, r, dim, s, &v);
            }
        }
        if !ex.property_rows.is_empty() {
            let s = dz / ex.property_rows.len() as f64;
            for &r in &ex.property_rows {
                accumulate(&mut grad.property, r, dim, s, &u);
            }
        }
    }
    (total * scale, grad)
}

/// Negatives drawn by corrupting positives, with draw statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSample {
    pub pairs: Vec<ConceptPropertyPair>,
    pub draws: usize,
    pub collisions: usize,
}

impl NegativeSample {
    pub fn collision_rate(&self) -> f64 {
        if self.draws == 0 {
            0.0
        } else {
            self.collisions as f64 / self.draws as f64
        }
    }
}

const MAX_CORRUPTION_ATTEMPTS: usize = 10;

/// Corrupts positives into negatives. Replacement values are drawn from
/// the concepts and properties of `known`, and any draw that lands on a
/// known positive is redrawn.
pub struct NegativeSampler<'a> {
    known: BTreeSet<(&'a str, &'a str)>,
    concepts: Interner,
    properties: Interner,
}

impl<'a> NegativeSampler<'a> {
    pub fn new(known: &'a [ConceptPropertyPair]) -> Result<Self, EncoderError> {
        let concepts: Interner = known.iter().map(|p| p.concept.as_str()).collect();
        let properties: Interner = known.iter().map(|p| p.property.as_str()).collect();
        if concepts.len() < 2 {
            return Err(EncoderError::CannotCorrupt(Side::Concept));
        }
        if properties.len() < 2 {
            return Err(EncoderError::CannotCorrupt(Side::Property));
        }
        Ok(NegativeSampler {
            known: known.iter().map(|p| p.key()).collect(),
            concepts,
            properties,
        })
    }

    /// For each positive, `rate` corruptions that swap either the concept or
    /// the property (fair coin) for a uniform draw among the other values of
    /// that side. A draw that hits a known positive is redrawn up to 10
    /// times, then skipped.
    pub fn sample(
        &self,
        positives: &[ConceptPropertyPair],
        rate: usize,
        seed: u64,
    ) -> Result<NegativeSample, EncoderError> {
        if rate == 0 {
            return Err(EncoderError::InvalidConfig("negative rate must be at least 1"));
        }
        let mut rng = rng::StageRng::seed_from_u64(seed);
        let mut out = NegativeSample {
            pairs: Vec::with_capacity(positives.len() * rate),
            draws: 0,
            collisions: 0,
        };
        for pos in positives {
            for _ in 0..rate {
                for _ in 0..MAX_CORRUPTION_ATTEMPTS {
                    let (c, p) = if rng.random_bool(0.5) {
                        let i = draw_other(&mut rng, &self.concepts, &pos.concept);
                        (self.concepts.name(i), pos.property.as_str())
                    } else {
                        let i = draw_other(&mut rng, &self.properties, &pos.property);
                        (pos.concept.as_str(), self.properties.name(i))
                    };
                    out.draws += 1;
                    if self.known.contains(&(c, p)) {
                        out.collisions += 1;
                        continue;
                    }
                    out.pairs.push(ConceptPropertyPair {
                        concept: c.into(),
                        property: p.into(),
                        label: Some(false),
                    });
                    break;
                }
            }
        }
        Ok(out)
    }
}

// Uniform over the interner, excluding `current` when it is interned.
fn draw_other(rng: &mut rng::StageRng, pool: &Interner, current: &str) -> u32 {
    match pool.get(current) {
        Some(skip) => {
            let i = rng.random_range(0..pool.len() - 1) as u32;
            if i >= skip {
                i + 1
            } else {
                i
            }
        }
        None => rng.random_range(0..pool.len()) as u32,
    }
}

/// Corrupts each positive `rate` times; see [`NegativeSampler::sample`].
pub fn sample_negatives(
    positives: &[ConceptPropertyPair],
    rate: usize,
    seed: u64,
) -> Result<NegativeSample, EncoderError> {
    NegativeSampler::new(positives)?.sample(positives, rate, seed)
}

fn quantize(x: f64) -> f64 {
    x as f32 as f64
}

fn init_table(side: Side, tokens: Interner, dim: usize, rng: &mut rng::StageRng) -> EmbeddingTable {
    let bound = 1.0 / libm::sqrt(dim as f64);
    let weights = (0..tokens.len() * dim)
        .map(|_| quantize(rng.random_range(-bound..bound)))
        .collect();
    EmbeddingTable {
        side,
        tokens,
        dim,
        weights,
    }
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn zeros(len: usize) -> Self {
        Moments {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// Applies one AdamW step to the rows present in `grad`.
fn apply_step(
    model: &mut BiEncoderModel,
    opt: &AdamW,
    grad: &Gradient,
    concept_moments: &mut Moments,
    property_moments: &mut Moments,
) {
    let dim = model.dim();
    for (side, moments) in [(Side::Concept, concept_moments), (Side::Property, property_moments)] {
        let table = model.table_mut(side);
        for (&row, g) in grad.side(side) {
            let range = row as usize * dim..(row as usize + 1) * dim;
            let params = table.row_mut(row);
            opt.update(params, g, &mut moments.m[range.clone()], &mut moments.v[range]);
            params.iter_mut().for_each(|p| *p = quantize(*p));
        }
    }
}

/// One optimizer step on a batch, exposed for checking the update rule.
pub fn step_on_batch(model: &mut BiEncoderModel, opt: &mut AdamW, batch: &[EncodedPair]) -> f64 {
    let (loss, grad) = batch_loss_and_gradient(model, batch);
    let mut cm = Moments::zeros(model.concept_table.weights.len());
    let mut pm = Moments::zeros(model.property_table.weights.len());
    opt.begin_step();
    apply_step(model, opt, &grad, &mut cm, &mut pm);
    loss
}

/// Trains a bi-encoder on `pairs`. Records labeled `false` are used as
/// given negatives; every other record is a positive and is additionally
/// corrupted `negatives_per_positive` times.
pub fn train(pairs: &[ConceptPropertyPair], config: &EncoderConfig) -> Result<BiEncoderModel, EncoderError> {
    config.validate()?;
    let mut seen = BTreeSet::new();
    let mut positives = Vec::new();
    let mut given_negatives = Vec::new();
    for pair in pairs {
        if !seen.insert((pair.concept.as_str(), pair.property.as_str())) {
            continue;
        }
        if pair.is_positive() {
            positives.push(pair.clone());
        } else {
            given_negatives.push(pair.clone());
        }
    }
    if positives.len() < 10 {
        return Err(EncoderError::TooFewPositives(positives.len()));
    }
    let sampled = sample_negatives(
        &positives,
        config.negatives_per_positive,
        rng::derive_seed(config.seed, "negatives"),
    )?;

    let mut all: Vec<ConceptPropertyPair> = positives;
    all.extend(given_negatives);
    all.extend(sampled.pairs);

    let mut concept_tokens = Interner::new();
    let mut property_tokens = Interner::new();
    for pair in &all {
        for t in tokens(&pair.concept) {
            concept_tokens.intern(&t);
        }
        for t in tokens(&pair.property) {
            property_tokens.intern(&t);
        }
    }

    let mut init_rng = rng::stream(config.seed, "init");
    let concept_table = init_table(Side::Concept, concept_tokens, config.dim, &mut init_rng);
    let property_table = init_table(Side::Property, property_tokens, config.dim, &mut init_rng);
    let mut model = BiEncoderModel::new(concept_table, property_table, config.clone())?;

    let mut encoded = all.iter().map(|p| model.encode(p)).collect::<Result<Vec<_>, _>>()?;
    encoded.shuffle(&mut rng::stream(config.seed, "split"));
    let n_val = libm::ceil(encoded.len() as f64 * config.validation_fraction) as usize;
    let n_val = n_val.clamp(1, encoded.len() - 1);
    let mut train_set = encoded.split_off(n_val);
    let val_set = encoded;

    let mut opt = AdamW::new(config.learning_rate, config.weight_decay);
    let mut cm = Moments::zeros(model.concept_table.weights.len());
    let mut pm = Moments::zeros(model.property_table.weights.len());
    let mut shuffle_rng = rng::stream(config.seed, "shuffle");

    let mut best: Option<(f64, EmbeddingTable, EmbeddingTable)> = None;
    let mut since_best = 0;
    let mut log = Vec::new();
    for epoch in 1..=config.max_epochs {
        train_set.shuffle(&mut shuffle_rng);
        let mut train_total = 0.0;
        for batch in train_set.chunks(config.batch_size) {
            let (loss, grad) = batch_loss_and_gradient(&model, batch);
            if !loss.is_finite() {
                return Err(EncoderError::Divergence { epoch });
            }
            train_total += loss * batch.len() as f64;
            opt.begin_step();
            apply_step(&mut model, &opt, &grad, &mut cm, &mut pm);
        }
        let train_loss = train_total / train_set.len() as f64;
        let val_loss = batch_loss(&model, &val_set);
        if !val_loss.is_finite() {
            return Err(EncoderError::Divergence { epoch });
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
        });
        let improved = best.as_ref().is_none_or(|(b, _, _)| val_loss < *b);
        if improved {
            best = Some((val_loss, model.concept_table.clone(), model.property_table.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    if let Some((_, concept_table, property_table)) = best {
        model.concept_table = concept_table;
        model.property_table = property_table;
    }
    model.training_log = log;
    Ok(model)
}

/// Precision, recall and F1 of `score ≥ threshold` against the labels.
pub fn evaluate_pairs(
    model: &BiEncoderModel,
    labeled: &[ConceptPropertyPair],
    threshold: f64,
) -> Result<Prf1, EncoderError> {
    if labeled.is_empty() {
        return Err(EncoderError::EmptyEvaluation);
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for pair in labeled {
        let gold = pair.label.ok_or_else(|| EncoderError::Unlabeled {
            concept: pair.concept.clone(),
            property: pair.property.clone(),
        })?;
        let predicted = model.score(&pair.concept, &pair.property)? >= threshold;
        match (predicted, gold) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(Prf1::from_counts(tp, fp, fn_))
}
