//! Diversity-based selection of in-context examples.
//!
//! For each test input the engine retrieves the `n * k` most similar labeled
//! training examples (tf-idf or dense-embedding cosine), reranks them with
//! Maximal Marginal Relevance down to `k`, renders a few-shot prompt, asks a
//! completion endpoint for the label, and scores the run with macro-F1 and
//! paired t-tests. A validation grid search over `alpha` and `k` picks the
//! configuration reported on the test split.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
mod http;
pub mod kv;
pub mod llm;
pub mod pipeline;
pub mod prompt;
pub mod rerank;
pub mod retrieve;
pub mod vectorize;

pub use error::{Error, Result};
pub use http::RetryPolicy;
