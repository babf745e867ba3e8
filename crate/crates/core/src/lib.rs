//! Discovering which properties are shared by the concepts of a vocabulary.
//!
//! The pipeline retrieves candidate properties per concept with a trained
//! bi-encoder and exact maximum-inner-product search, keeps the candidates a
//! verifier scores at or above a threshold, and drops properties that end up
//! attached to a single concept. The surviving shared properties (and
//! affinity-propagation clusters of concept embeddings) can then be added as
//! extra labels to multi-label training data.
//!
//! This crate is `no_std` and only needs `alloc`. File formats, fixtures and
//! the command line live in the `commonality` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod augment;
pub mod clustering;
pub mod commonality;
pub mod corpus;
pub mod encoder;
pub mod evalkit;
pub mod math;
pub mod mips;
pub mod optim;
pub mod rng;
pub mod verifier;

pub use augment::{AugmentationMap, LabeledExample};
pub use clustering::{ApConfig, ClusterSet, Similarity};
pub use commonality::{CommonalityTable, PropertyAssignment, TableRow};
pub use corpus::{ConceptPropertyPair, Interner, Relation, Triple, Vocabulary};
pub use encoder::{BiEncoderModel, EmbeddingTable, EncoderConfig, Side};
pub use evalkit::Prf1;
pub use mips::{PropertyIndex, ScoredCandidate};
pub use verifier::{PairScoreSet, VerifierConfig, VerifierSource};
