//! Explained, entailment-verified classification of privacy-policy
//! paragraphs into twelve data-practice categories, with the corpus tooling
//! and evaluation harness around it.

pub mod corpus;
pub mod gateway;
pub mod jsonl;
pub mod metrics;
pub mod pipeline;
pub mod synthetic;
pub mod text;
