//! Run configuration: a JSON file with defaults for every field, overridden
//! by command-line flags.

use std::path::{Path, PathBuf};

use commonality_core::clustering::{ApConfig, PREFERENCE_SWEEP};
use commonality_core::encoder::EncoderConfig;
use commonality_core::evalkit::ToyConfig;
use commonality_core::mips::DEFAULT_TOP_K;
use commonality_core::verifier::VerifierConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

const STAGE: &str = "config";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub pairs: Vec<PathBuf>,
    pub triples: Vec<PathBuf>,
    pub enumerated: Vec<PathBuf>,
    /// External verifier scores.
    pub scores: Option<PathBuf>,
    /// Concept embeddings to cluster; defaults to the trained model's.
    pub embeddings: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub test_dataset: Option<PathBuf>,
    /// Labeled pairs for pair-classification F1 of the assignment.
    pub eval_pairs: Option<PathBuf>,
    /// Reference commonality TSV for Jaccard matching.
    pub gold_table: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            pairs: Vec::new(),
            triples: Vec::new(),
            enumerated: Vec::new(),
            scores: None,
            embeddings: None,
            dataset: None,
            test_dataset: None,
            eval_pairs: None,
            gold_table: None,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub min_count: u32,
    /// Abort on the first malformed line instead of skipping it.
    pub strict: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            min_count: 2,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub top_k: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig { top_k: DEFAULT_TOP_K }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    /// One clustering per preference fraction; overrides `ap.preference_fraction`.
    pub fractions: Vec<f64>,
    pub ap: ApConfig,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            fractions: PREFERENCE_SWEEP.to_vec(),
            ap: ApConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream; stage seeds are derived from it by name.
    pub seed: u64,
    pub paths: Paths,
    pub ingest: IngestConfig,
    /// `encoder.seed` is ignored; the encoder's seed derives from `seed`.
    pub encoder: EncoderConfig,
    pub retrieval: RetrievalConfig,
    pub verifier: VerifierConfig,
    pub clustering: ClusteringConfig,
    pub toy: ToyConfig,
}

impl RunConfig {
    /// Loads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(STAGE, path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::validation(STAGE, format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.paths.rebase(base);
        Ok(cfg)
    }

    /// Checks ranges and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        let invalid = |e: &dyn std::fmt::Display| CliError::validation(STAGE, e);
        self.encoder.validate().map_err(|e| invalid(&e))?;
        self.verifier.validate().map_err(|e| invalid(&e))?;
        self.clustering.ap.validate().map_err(|e| invalid(&e))?;
        if self.retrieval.top_k == 0 {
            return Err(invalid(&"retrieval.top_k must be at least 1"));
        }
        if self.ingest.min_count == 0 {
            return Err(invalid(&"ingest.min_count must be at least 1"));
        }
        if self.clustering.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(invalid(&"clustering.fractions must lie in [0, 1]"));
        }
        for p in self.paths.inputs() {
            if !p.exists() {
                return Err(invalid(&format!("input {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

impl Paths {
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.pairs.iter_mut().for_each(fix);
        self.triples.iter_mut().for_each(fix);
        self.enumerated.iter_mut().for_each(fix);
        for p in [
            &mut self.scores,
            &mut self.embeddings,
            &mut self.dataset,
            &mut self.test_dataset,
            &mut self.eval_pairs,
            &mut self.gold_table,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.out);
    }

    fn inputs(&self) -> impl Iterator<Item = &PathBuf> {
        self.pairs
            .iter()
            .chain(&self.triples)
            .chain(&self.enumerated)
            .chain(self.scores.iter())
            .chain(self.embeddings.iter())
            .chain(self.dataset.iter())
            .chain(self.test_dataset.iter())
            .chain(self.eval_pairs.iter())
            .chain(self.gold_table.iter())
    }
}
