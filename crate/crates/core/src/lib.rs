//! Entropy landscapes of small neural networks.

pub mod analysis;
pub mod baseline;
pub mod data;
pub mod error;
pub mod kv;
pub mod landscape;
pub mod nn;
pub mod seed;
pub mod toy;
pub mod trajectory;
pub mod wlmc;
pub mod wlmd;

pub use error::{Error, Result};
