//! Masked infilling versus causal generation for synthetic text.
//!
//! The pipeline: load a [`corpus`], [`tokenizer`] it, corrupt it with a
//! masking strategy ([`corruption`]), regenerate the text with a
//! bidirectional or causal predictor ([`predictor`], [`decoder`]), then
//! score it against the original ([`metrics`]) and on downstream tasks
//! ([`downstream`]). [`experiment`] runs the whole grid from a config file.

pub mod corpus;
pub mod corruption;
pub mod decoder;
pub mod downstream;
pub mod experiment;
pub mod metrics;
pub mod predictor;
pub mod tokenizer;
pub mod toy;
