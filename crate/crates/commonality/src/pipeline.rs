//! Pipeline stages. Each stage reads its inputs from the configured paths or
//! the output directory and writes its artifacts there, so running
//! `pipeline` is the same as running the stages one after another.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use commonality_core::augment::{augment_dataset, AugmentationMap, LabeledExample};
use commonality_core::clustering::cluster_granularities;
use commonality_core::commonality::CommonalityTable;
use commonality_core::corpus::{
    dedup_pairs, parse_enumerated, parse_pairs, parse_triples, ConceptPropertyPair, Vocabulary,
};
use commonality_core::encoder::{self, BiEncoderModel, NegativeSampler, Side};
use commonality_core::evalkit::{example_f1, jaccard_match, pair_f1, ToyClassifier};
use commonality_core::mips::{Candidates, PropertyIndex};
use commonality_core::rng::derive_seed;
use commonality_core::verifier::{
    verify as verify_candidates, BuiltinVerifierModel, FeatureExtractor, PairScoreSet, Scorer, VerifierSource,
};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, Invalid, IoContext, Result};
use crate::formats::{self, AssignmentRecord};

/// File names inside the output directory.
pub mod artifacts {
    pub const LOCK: &str = ".commonality.lock";
    pub const PAIRS: &str = "pairs.tsv";
    pub const VOCABULARY: &str = "vocabulary.txt";
    pub const REJECTED: &str = "rejected.tsv";
    pub const MODEL_DIR: &str = "model";
    pub const PROPERTY_INDEX: &str = "property_index.tsv";
    pub const CONCEPT_EMBEDDINGS: &str = "concept_embeddings.tsv";
    pub const CANDIDATES: &str = "candidates.tsv";
    pub const VERIFIER_SCORES: &str = "verifier_scores.tsv";
    pub const VERIFIER_MODEL: &str = "verifier.json";
    pub const ASSIGNMENT: &str = "assignment.jsonl";
    pub const COMMONALITY_TSV: &str = "commonality.tsv";
    pub const COMMONALITY_JSONL: &str = "commonality.jsonl";
    pub const CLUSTERS: &str = "clusters.tsv";
    pub const AUGMENTATION_MAP: &str = "augmentation_map.jsonl";
    pub const AUGMENTED_DATASET: &str = "augmented_dataset.jsonl";
    pub const PAIR_METRICS: &str = "metrics_pairs.json";
    pub const JACCARD: &str = "jaccard.tsv";
    pub const TOY_BASELINE: &str = "metrics_toy_baseline.json";
    pub const TOY_AUGMENTED: &str = "metrics_toy_augmented.json";
}

/// Exclusive ownership of an output directory for one process. The lock
/// file is removed when the guard drops.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
    _file: File,
}

impl OutputLock {
    pub fn acquire(out: &Path) -> Result<Self> {
        const STAGE: &str = "lock";
        fs::create_dir_all(out).at(STAGE, out)?;
        let path = out.join(artifacts::LOCK);
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => CliError::io(
                    STAGE,
                    &path,
                    "output directory is locked by another run; remove the lock file if that run is gone",
                ),
                _ => CliError::io(STAGE, &path, e),
            })?;
        writeln!(file, "{}", std::process::id()).at(STAGE, &path)?;
        Ok(OutputLock { path, _file: file })
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// A configured run over one output directory.
pub struct Run {
    pub config: RunConfig,
}

impl Run {
    pub fn new(config: RunConfig) -> Self {
        Run { config }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.config.paths.out.join(name)
    }

    fn seed(&self, stream: &str) -> u64 {
        derive_seed(self.config.seed, stream)
    }

    fn read_out(&self, stage: &'static str, name: &str) -> Result<String> {
        let path = self.out(name);
        if !path.exists() {
            return Err(CliError::io(
                stage,
                &path,
                "missing; run the stage that produces it first",
            ));
        }
        formats::read_text(stage, &path)
    }

    fn write_out(&self, stage: &'static str, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        formats::write_file(stage, &self.out(name), contents)
    }

    pub fn load_pairs(&self, stage: &'static str) -> Result<Vec<ConceptPropertyPair>> {
        let text = self.read_out(stage, artifacts::PAIRS)?;
        Ok(parse_pairs(&text, true).invalid(stage)?.records)
    }

    pub fn load_vocabulary(&self, stage: &'static str) -> Result<Vocabulary> {
        let text = self.read_out(stage, artifacts::VOCABULARY)?;
        formats::parse_vocabulary(stage, &self.out(artifacts::VOCABULARY), &text)
    }

    pub fn load_model(&self, stage: &'static str) -> Result<BiEncoderModel> {
        let dir = self.out(artifacts::MODEL_DIR);
        if !dir.join("manifest.json").exists() {
            return Err(CliError::io(stage, &dir, "no trained model; run train first"));
        }
        formats::load_model(stage, &dir)
    }

    /// The property index as written by `index`; rows follow the
    /// vocabulary's property order.
    pub fn load_index(&self, stage: &'static str, vocab: &Vocabulary) -> Result<PropertyIndex> {
        let path = self.out(artifacts::PROPERTY_INDEX);
        let (dim, rows) = formats::parse_embeddings(stage, &path, &self.read_out(stage, artifacts::PROPERTY_INDEX)?)?;
        let names: Vec<&str> = rows.iter().map(|(n, _)| n.as_str()).collect();
        let expected: Vec<&str> = vocab.properties.names().iter().map(String::as_str).collect();
        if names != expected {
            return Err(CliError::validation(
                stage,
                "property index does not match the vocabulary; rerun index",
            ));
        }
        let n = rows.len() as u32;
        PropertyIndex::from_rows(dim, rows.into_iter().flat_map(|(_, v)| v).collect(), (0..n).collect()).invalid(stage)
    }

    pub fn load_candidates(&self, stage: &'static str, vocab: &Vocabulary) -> Result<Candidates> {
        let text = self.read_out(stage, artifacts::CANDIDATES)?;
        formats::parse_candidates(stage, &self.out(artifacts::CANDIDATES), &text, vocab)
    }

    /// Parses the configured corpus files, deduplicates the pairs and builds
    /// the property vocabulary.
    pub fn ingest(&self) -> Result<Vocabulary> {
        const STAGE: &str = "ingest";
        let paths = &self.config.paths;
        if paths.pairs.is_empty() && paths.triples.is_empty() && paths.enumerated.is_empty() {
            return Err(CliError::validation(
                STAGE,
                "no corpus files configured (pairs, triples or enumerated)",
            ));
        }
        type Parser = fn(
            &str,
            bool,
        ) -> std::result::Result<
            commonality_core::corpus::Parsed<ConceptPropertyPair>,
            commonality_core::corpus::CorpusError,
        >;
        let sources: [(&[PathBuf], Parser); 3] = [
            (&paths.pairs, parse_pairs),
            (&paths.triples, parse_triples),
            (&paths.enumerated, parse_enumerated),
        ];
        let strict = self.config.ingest.strict;
        let mut all = Vec::new();
        let mut rejected = String::new();
        for (files, parse) in sources {
            for path in files {
                let text = formats::read_text(STAGE, path)?;
                let parsed = parse(&text, strict)
                    .map_err(|e| CliError::validation(STAGE, format!("{}: {e}", path.display())))?;
                for r in &parsed.rejected {
                    rejected.push_str(&format!("{}\t{r}\n", path.display()));
                }
                if !parsed.rejected.is_empty() {
                    warn!(
                        "{}: skipped {} malformed line(s)",
                        path.display(),
                        parsed.rejected.len()
                    );
                }
                all.extend(parsed.records);
            }
        }
        let pairs = dedup_pairs(all);
        let vocab = Vocabulary::build(&pairs, self.config.ingest.min_count).invalid(STAGE)?;
        info!(
            "ingest: {} pairs, {} concepts, {} properties with count >= {}",
            pairs.len(),
            vocab.concepts.len(),
            vocab.properties.len(),
            self.config.ingest.min_count
        );
        self.write_out(STAGE, artifacts::PAIRS, formats::format_pairs(&pairs))?;
        self.write_out(STAGE, artifacts::VOCABULARY, formats::format_vocabulary(&vocab))?;
        self.write_out(STAGE, artifacts::REJECTED, rejected)?;
        Ok(vocab)
    }

    pub fn train(&self) -> Result<BiEncoderModel> {
        const STAGE: &str = "train";
        let pairs = self.load_pairs(STAGE)?;
        let mut config = self.config.encoder.clone();
        config.seed = self.seed("train");
        let model = encoder::train(&pairs, &config).invalid(STAGE)?;
        if let Some(best) = model.best_epoch() {
            info!(
                "train: {} epochs, best epoch {} with validation loss {:.4}",
                model.training_log.len(),
                best.epoch,
                best.val_loss
            );
        }
        formats::save_model(STAGE, &self.out(artifacts::MODEL_DIR), &model)?;
        Ok(model)
    }

    /// Embeds every vocabulary property (the index) and concept.
    pub fn index(&self) -> Result<PropertyIndex> {
        const STAGE: &str = "index";
        let vocab = self.load_vocabulary(STAGE)?;
        let model = self.load_model(STAGE)?;
        let index = PropertyIndex::build(&model, &vocab).invalid(STAGE)?;
        let rows = vocab
            .properties
            .names()
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), index.row(i)));
        self.write_out(STAGE, artifacts::PROPERTY_INDEX, formats::format_embeddings(rows))?;
        let concepts = vocab
            .concepts
            .names()
            .iter()
            .map(|c| model.embed(Side::Concept, c).map(|v| (c.as_str(), v)))
            .collect::<std::result::Result<Vec<_>, _>>()
            .invalid(STAGE)?;
        let text = formats::format_embeddings(concepts.iter().map(|(c, v)| (*c, v.as_slice())));
        self.write_out(STAGE, artifacts::CONCEPT_EMBEDDINGS, text)?;
        info!("index: {} properties, dim {}", index.len(), index.dim());
        Ok(index)
    }

    /// Top-k properties for every concept. Concepts are processed in
    /// parallel; output order is concept id then rank.
    pub fn retrieve(&self) -> Result<Candidates> {
        const STAGE: &str = "retrieve";
        let vocab = self.load_vocabulary(STAGE)?;
        let model = self.load_model(STAGE)?;
        let index = self.load_index(STAGE, &vocab)?;
        let k = self.config.retrieval.top_k;
        let lists = vocab
            .concepts
            .names()
            .par_iter()
            .map(|c| {
                let q = model
                    .embed(Side::Concept, c)
                    .map_err(|e| CliError::validation(STAGE, e))?;
                index.top_k(&q, k).invalid(STAGE)
            })
            .collect::<Result<Vec<_>>>()?;
        let candidates = Candidates {
            concepts: vocab.concepts.clone(),
            properties: vocab.properties.clone(),
            lists,
        };
        info!("retrieve: {} candidate pairs (k = {k})", candidates.pair_count());
        self.write_out(STAGE, artifacts::CANDIDATES, formats::format_candidates(&candidates))?;
        Ok(candidates)
    }

    fn builtin_verifier(&self, stage: &'static str, features: &FeatureExtractor<'_>) -> Result<BuiltinVerifierModel> {
        let pairs = self.load_pairs(stage)?;
        let positives: Vec<ConceptPropertyPair> = pairs.iter().filter(|p| p.is_positive()).cloned().collect();
        let mut labeled: Vec<ConceptPropertyPair> = pairs
            .iter()
            .map(|p| ConceptPropertyPair {
                label: Some(p.is_positive()),
                ..p.clone()
            })
            .collect();
        let negatives = NegativeSampler::new(&positives)
            .and_then(|s| {
                s.sample(
                    &positives,
                    self.config.encoder.negatives_per_positive,
                    self.seed("verifier-negatives"),
                )
            })
            .invalid(stage)?;
        labeled.extend(negatives.pairs);
        let model = BuiltinVerifierModel::train(&labeled, features, self.seed("verifier")).invalid(stage)?;
        let json = serde_json::json!({ "weights": model.weights, "bias": model.bias });
        self.write_out(
            stage,
            artifacts::VERIFIER_MODEL,
            serde_json::to_string_pretty(&json).expect("json") + "\n",
        )?;
        Ok(model)
    }

    /// Scores every candidate and keeps those at or above lambda.
    pub fn verify(&self) -> Result<commonality_core::commonality::PropertyAssignment> {
        const STAGE: &str = "verify";
        let vocab = self.load_vocabulary(STAGE)?;
        let candidates = self.load_candidates(STAGE, &vocab)?;
        let lambda = self.config.verifier.lambda;
        let (scores, assignment) = match self.config.verifier.source {
            VerifierSource::External => {
                let path =
                    self.config.paths.scores.as_ref().ok_or_else(|| {
                        CliError::validation(STAGE, "external verifier needs a score file (--scores)")
                    })?;
                let (set, duplicates) =
                    PairScoreSet::parse_tsv(&formats::read_text(STAGE, path)?, path.display().to_string())
                        .map_err(|e| CliError::validation(STAGE, format!("{}: {e}", path.display())))?;
                for d in &duplicates {
                    warn!(
                        "{}:{}: duplicate score for ({}, {}); keeping {} over {}",
                        path.display(),
                        d.line,
                        d.concept,
                        d.property,
                        d.kept,
                        d.previous
                    );
                }
                let scorer = Scorer::External(&set);
                let scores = scorer.score_candidates(&candidates).invalid(STAGE)?;
                (scores, verify_candidates(&candidates, lambda, &scorer).invalid(STAGE)?)
            }
            VerifierSource::Builtin => {
                let model = self.load_model(STAGE)?;
                let index = self.load_index(STAGE, &vocab)?;
                let features = FeatureExtractor::new(&model, &index);
                let verifier = self.builtin_verifier(STAGE, &features)?;
                let scorer = Scorer::Builtin {
                    model: &verifier,
                    features,
                };
                let scores = scorer.score_candidates(&candidates).invalid(STAGE)?;
                (scores, verify_candidates(&candidates, lambda, &scorer).invalid(STAGE)?)
            }
            VerifierSource::Passthrough => {
                let scorer = Scorer::Passthrough;
                let scores = scorer.score_candidates(&candidates).invalid(STAGE)?;
                (scores, verify_candidates(&candidates, lambda, &scorer).invalid(STAGE)?)
            }
        };
        let dump = candidates
            .iter()
            .zip(scores.iter().flatten())
            .map(|((c, p, _), &s)| (c, p, s));
        self.write_out(STAGE, artifacts::VERIFIER_SCORES, formats::format_scores(dump))?;
        info!(
            "verify: kept {} of {} pairs at lambda {lambda}",
            assignment.pair_count(),
            candidates.pair_count()
        );
        let text = formats::format_assignment(&assignment, &vocab.concepts, &vocab.properties);
        self.write_out(STAGE, artifacts::ASSIGNMENT, text)?;
        Ok(assignment)
    }

    /// Inverts the assignment and drops properties held by one concept.
    pub fn commonalities(&self) -> Result<Vec<commonality_core::commonality::TableRow>> {
        const STAGE: &str = "commonalities";
        let path = self.out(artifacts::ASSIGNMENT);
        let records: Vec<AssignmentRecord> =
            formats::parse_jsonl(STAGE, &path, &self.read_out(STAGE, artifacts::ASSIGNMENT)?)?;
        let (assignment, concepts, properties) = formats::assignment_from_records(STAGE, &path, &records)?;
        let full = CommonalityTable::invert(&assignment);
        let table = full.prune_singletons();
        info!(
            "commonalities: {} shared properties ({} singletons pruned)",
            table.len(),
            full.len() - table.len()
        );
        let rows = table.emit(&concepts, &properties);
        self.write_out(STAGE, artifacts::COMMONALITY_TSV, formats::format_table_tsv(&rows))?;
        self.write_out(STAGE, artifacts::COMMONALITY_JSONL, formats::format_jsonl(&rows))?;
        Ok(rows)
    }

    /// Affinity propagation over concept embeddings, once per preference
    /// fraction.
    pub fn cluster(&self) -> Result<usize> {
        const STAGE: &str = "cluster";
        let path = self
            .config
            .paths
            .embeddings
            .clone()
            .unwrap_or_else(|| self.out(artifacts::CONCEPT_EMBEDDINGS));
        if !path.exists() {
            return Err(CliError::io(
                STAGE,
                &path,
                "missing; pass --embeddings or run index first",
            ));
        }
        let (_, rows) = formats::parse_embeddings(STAGE, &path, &formats::read_text(STAGE, &path)?)?;
        let (names, points): (Vec<String>, Vec<Vec<f64>>) = rows.into_iter().unzip();
        let sets = cluster_granularities(&points, &self.config.clustering.fractions, &self.config.clustering.ap)
            .invalid(STAGE)?;
        for set in &sets {
            if !set.converged {
                warn!(
                    "cluster: fraction {} did not converge in {} iterations",
                    set.granularity_tag, set.iterations
                );
            }
            info!(
                "cluster: fraction {} gives {} clusters",
                set.granularity_tag,
                set.cluster_count()
            );
        }
        self.write_out(STAGE, artifacts::CLUSTERS, formats::format_clusters(&sets, &names))?;
        Ok(sets.len())
    }

    /// Adds property and cluster labels to the configured dataset.
    pub fn augment(&self) -> Result<AugmentationMap> {
        const STAGE: &str = "augment";
        let dataset = self.dataset(STAGE)?;
        let rows = match self.out(artifacts::COMMONALITY_TSV) {
            p if p.exists() => formats::parse_table_tsv(STAGE, &p, &formats::read_text(STAGE, &p)?)?,
            _ => Vec::new(),
        };
        let (names, sets) = match self.out(artifacts::CLUSTERS) {
            p if p.exists() => formats::parse_clusters(STAGE, &p, &formats::read_text(STAGE, &p)?)?,
            _ => (Vec::new(), Vec::new()),
        };
        let mut seen = BTreeSet::new();
        let label_space: Vec<String> = dataset
            .iter()
            .flat_map(|ex| ex.labels.iter())
            .filter(|l| seen.insert(l.as_str()))
            .cloned()
            .collect();
        let built = AugmentationMap::build(&rows, &sets, &names, Some(&label_space)).invalid(STAGE)?;
        if !built.omitted.is_empty() {
            info!(
                "augment: {} of {} labels have no augmentation",
                built.omitted.len(),
                label_space.len()
            );
        }
        let augmented = augment_dataset(&dataset, &built.map);
        self.write_out(
            STAGE,
            artifacts::AUGMENTATION_MAP,
            formats::format_augmentation_map(&built.map),
        )?;
        self.write_out(STAGE, artifacts::AUGMENTED_DATASET, formats::format_jsonl(&augmented))?;
        Ok(built.map)
    }

    fn dataset(&self, stage: &'static str) -> Result<Vec<LabeledExample>> {
        let path = self
            .config
            .paths
            .dataset
            .as_ref()
            .ok_or_else(|| CliError::validation(stage, "no dataset configured (--dataset)"))?;
        formats::parse_dataset(stage, path, &formats::read_text(stage, path)?)
    }

    /// Writes every metric the configured inputs allow; returns the names of
    /// the files written.
    pub fn eval(&self) -> Result<Vec<&'static str>> {
        const STAGE: &str = "eval";
        let paths = &self.config.paths;
        let mut written = Vec::new();
        if let Some(gold_path) = &paths.eval_pairs {
            let gold = parse_pairs(&formats::read_text(STAGE, gold_path)?, true)
                .map_err(|e| CliError::validation(STAGE, format!("{}: {e}", gold_path.display())))?
                .records;
            let path = self.out(artifacts::ASSIGNMENT);
            let records: Vec<AssignmentRecord> =
                formats::parse_jsonl(STAGE, &path, &self.read_out(STAGE, artifacts::ASSIGNMENT)?)?;
            let predicted: BTreeSet<(String, String)> = records
                .iter()
                .flat_map(|r| r.properties.iter().map(move |p| (r.concept.clone(), p.p.clone())))
                .collect();
            let m = pair_f1(&predicted, &gold).invalid(STAGE)?;
            info!("eval: pair F1 {:.4}", m.f1);
            self.write_out(STAGE, artifacts::PAIR_METRICS, formats::format_metric(&m))?;
            written.push(artifacts::PAIR_METRICS);
        }
        if let Some(gold_path) = &paths.gold_table {
            let gold = formats::parse_table_tsv(STAGE, gold_path, &formats::read_text(STAGE, gold_path)?)?;
            let predicted = formats::parse_table_tsv(
                STAGE,
                &self.out(artifacts::COMMONALITY_TSV),
                &self.read_out(STAGE, artifacts::COMMONALITY_TSV)?,
            )?;
            let mut text = String::new();
            for m in jaccard_match(&predicted, &gold) {
                text.push_str(&format!("{}\t{}\t{}\n", m.predicted_property, m.best_gold, m.jaccard));
            }
            self.write_out(STAGE, artifacts::JACCARD, text)?;
            written.push(artifacts::JACCARD);
        }
        if let Some(test_path) = &paths.test_dataset {
            let train = self.dataset(STAGE)?;
            let test = formats::parse_dataset(STAGE, test_path, &formats::read_text(STAGE, test_path)?)?;
            let base = self.toy_f1(STAGE, &train, &test, false)?;
            info!("eval: toy classifier example F1 {:.4}", base.f1);
            self.write_out(STAGE, artifacts::TOY_BASELINE, formats::format_metric(&base))?;
            written.push(artifacts::TOY_BASELINE);
            if self.out(artifacts::AUGMENTED_DATASET).exists() {
                let path = self.out(artifacts::AUGMENTED_DATASET);
                let augmented =
                    formats::parse_dataset(STAGE, &path, &self.read_out(STAGE, artifacts::AUGMENTED_DATASET)?)?;
                let aug = self.toy_f1(STAGE, &augmented, &test, true)?;
                info!("eval: toy classifier with augmented labels, example F1 {:.4}", aug.f1);
                self.write_out(STAGE, artifacts::TOY_AUGMENTED, formats::format_metric(&aug))?;
                written.push(artifacts::TOY_AUGMENTED);
            }
        }
        if written.is_empty() {
            return Err(CliError::validation(
                STAGE,
                "nothing to evaluate; configure eval_pairs, gold_table or dataset with test_dataset",
            ));
        }
        Ok(written)
    }

    fn toy_f1(
        &self,
        stage: &'static str,
        train: &[LabeledExample],
        test: &[LabeledExample],
        augmented: bool,
    ) -> Result<commonality_core::evalkit::Prf1> {
        let mut config = self.config.toy.clone();
        config.seed = self.seed("toy");
        toy_example_f1(train, test, &config, augmented).invalid(stage)
    }

    /// ingest → train → index → retrieve → verify → commonalities.
    pub fn pipeline(&self) -> Result<Vec<commonality_core::commonality::TableRow>> {
        self.ingest()?;
        self.train()?;
        self.index()?;
        self.retrieve()?;
        self.verify()?;
        self.commonalities()
    }
}

/// Trains the toy classifier on `train` and scores base-label predictions
/// on `test`. With `augmented`, the label space includes augmentation
/// labels and predictions are restricted to base labels.
pub fn toy_example_f1(
    train: &[LabeledExample],
    test: &[LabeledExample],
    config: &commonality_core::evalkit::ToyConfig,
    augmented: bool,
) -> std::result::Result<commonality_core::evalkit::Prf1, commonality_core::evalkit::EvalError> {
    let mut seen = BTreeSet::new();
    let label_space: Vec<String> = train
        .iter()
        .flat_map(|ex| ex.labels.iter())
        .filter(|l| seen.insert(l.as_str()))
        .cloned()
        .collect();
    let examples: Vec<(String, Vec<String>)> = train.iter().map(|ex| (ex.text.clone(), ex.labels.clone())).collect();
    let model = ToyClassifier::train(&examples, &label_space, config)?;
    let predicted: BTreeMap<String, BTreeSet<String>> = test
        .iter()
        .map(|ex| {
            let p = if augmented {
                model.predict_base(&ex.text)
            } else {
                model.predict(&ex.text)
            };
            (ex.id.clone(), p)
        })
        .collect();
    let gold: BTreeMap<String, BTreeSet<String>> = test
        .iter()
        .map(|ex| {
            let labels = ex
                .labels
                .iter()
                .filter(|l| !commonality_core::augment::is_augmentation(l))
                .cloned()
                .collect();
            (ex.id.clone(), labels)
        })
        .collect();
    example_f1(&predicted, &gold)
}
