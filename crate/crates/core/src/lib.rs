//! Grammar-preserving text saliency modulation.
//!
//! Each paragraph of a document is shortened over several rounds by an LLM
//! that may only delete words. Every word is then rendered with an opacity
//! that reflects the round in which it was cut: words cut first are the
//! lightest, words that survive every round stay at full color. Because each
//! round's output is itself a grammatical paragraph, reading only the words
//! at or above any opacity level yields grammatical text.
//!
//! The pipeline is [`text_model::segment`] → [`compression_engine`] →
//! [`saliency_map`] → [`renderers`], with LLM access through
//! [`llm_gateway::Gateway`] and persistence in [`cache_store`].

pub mod cache_store;
pub mod candidate_scoring;
pub mod cli;
pub mod compression_engine;
pub mod diff_align;
pub mod llm_gateway;
pub mod pipeline;
pub mod renderers;
pub mod saliency_map;
pub mod text_model;
