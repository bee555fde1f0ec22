//! Graph-based claim verification.
//!
//! Evidence sentences parsed into semantic-role tuples are turned into a
//! graph over argument spans ([`graph`]). The graph decides the order in
//! which evidence is fed to a relative-position encoder ([`sort`],
//! [`nn::encoder`]), then a graph convolution ([`gcn`]) and claim-to-evidence
//! graph attention ([`gat`]) feed a three-way classifier. [`pipeline`] holds
//! retrieval, evidence selection, training and prediction; [`eval`] the
//! label-accuracy / FEVER-score scorer.

pub mod checkpoint;
pub mod config;
pub mod data;
mod error;
pub mod eval;
pub mod gat;
pub mod gcn;
pub mod graph;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod sort;

pub use config::Config;
pub use error::{Error, Result};
