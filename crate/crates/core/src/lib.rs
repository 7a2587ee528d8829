pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod postprocess;
pub mod ranking;
pub mod service;
pub mod tagger;

pub use error::{Error, Result};
