//! ASR post-processing toolkit: n-gram language modeling with modified
//! Kneser-Ney smoothing, CTC greedy and LM-fused beam decoding, edit-distance
//! evaluation, decoder hyperparameter tuning, and the corpus preparation
//! steps that feed them.
//!
//! The acoustic model lives elsewhere; this crate consumes its per-frame
//! logits from files (see [`decoder`]) and turns them into text.

pub mod audio;
pub mod corpus;
pub mod decoder;
pub mod lm;
pub mod metrics;
pub mod text;
pub mod tune;
