//! Deterministic machinery for treating coreference resolution as sequence
//! generation.
//!
//! The crate is organised around the path a document takes through a
//! seq2seq coreference system:
//!
//! * [`model`] holds documents, spans and clustered annotations.
//! * [`symbols`] defines the special symbols and the per-document vocabulary.
//! * [`linearize`] converts annotations to decoder sequences and back.
//! * [`decoder`] tracks generation state, computes allowed-token masks and
//!   runs constrained beam search over an external scorer.
//! * [`align`] recovers document spans from partial linearizations with an
//!   affine-gap alignment.
//! * [`metrics`] scores predictions with MUC, B³, CEAF-φ4 and mention F1.
//! * [`corpus`] reads and writes CoNLL-2012 and JSON-lines corpora, inserts
//!   speaker names and cuts long documents into overlapping segments.
//! * [`synth`] generates random documents for property tests and demos.

pub mod align;
pub mod corpus;
pub mod decoder;
pub mod linearize;
pub mod metrics;
pub mod model;
pub mod symbols;
pub mod synth;

pub use align::{AlignConfig, Alignment, Normalization};
pub use decoder::{DecodeConfig, DecodeOutput, GenerationState, Scorer};
pub use linearize::{Codec, Delinearized, LinearizedPair, Scheme, SchemeKind};
pub use metrics::{Profile, ScoreReport};
pub use model::{CorefAnnotation, Document, Span};
pub use symbols::{SymbolTable, TokenId, Vocab};
