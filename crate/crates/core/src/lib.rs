//! Toolkit for building and evaluating disfluent driver/car-assistant dialog
//! corpora.
//!
//! The pipeline runs in two generation stages (scenario generation, then
//! turn-by-turn dialog simulation against a chat-completion backend),
//! followed by rule-based disfluency tagging or post-hoc injection, and
//! evaluation: lexical diversity, overlap metrics for model generations, and
//! the stratified human-evaluation protocol with its annotation service.

pub mod annotation;
pub mod backend;
pub mod config;
pub mod corpus;
pub mod disfluency;
pub mod eval;
pub mod metrics;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod text;

pub use corpus::{Corpus, Dialog, DomainTag, Scenario, Speaker, Turn};
pub use disfluency::{DisfluencySpan, DisfluencyType, EditTrace, LexiconSet};
