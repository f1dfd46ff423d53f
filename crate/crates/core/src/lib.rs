//! Multimodal prototypical few-shot classification.
//!
//! A text-conditional GAN maps text embeddings into the visual embedding
//! space; generated features refine class prototypes built from a handful of
//! real support images.

pub mod analysis;
pub mod data;
pub mod episode;
pub mod error;
pub mod eval;
pub mod gan;
pub mod numkit;
pub mod prototype;
pub mod synth;

pub use error::{Error, Result};
