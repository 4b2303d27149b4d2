//! Graph-based dependency parsing for Universal Dependencies treebanks.
//!
//! The pipeline reads CoNLL-U ([`conllu`]), scores arcs, labels and
//! morphology with a BiLSTM network ([`model`]), decodes a single-rooted
//! tree ([`decoder`]), and evaluates against gold data ([`evaluation`]).
//! Training mixes several treebanks ([`sampler`]), prediction can average
//! several models ([`ensemble`]), and [`harmonizer`] rewrites annotation
//! conventions.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod cli;
pub mod conllu;
pub mod decoder;
pub mod ensemble;
pub mod evaluation;
pub mod harmonizer;
pub mod model;
pub mod sampler;
pub mod scalar;

pub use conllu::{parse_conllu, serialize_conllu, validate_tree, Sentence, Token, Treebank};
pub use decoder::{brute_force_mst, decode_mst, ArcScores};
pub use model::{ModelConfig, ParserModel, ScoredSentence, TrainSchedule};
pub use scalar::Scalar;

/// Single-precision model, as stored in model files.
pub type ParserModelF32 = ParserModel<f32>;
/// Double-precision model, used for gradient checking.
pub type ParserModelF64 = ParserModel<f64>;
pub type ArcScoresF32 = ArcScores<f32>;
pub type ArcScoresF64 = ArcScores<f64>;
pub type ScoredSentenceF32 = ScoredSentence<f32>;
pub type ScoredSentenceF64 = ScoredSentence<f64>;
