//! Numerical substrate: vectors, small dense networks, Adam and a
//! finite-difference gradient checker. Everything is `f64`.

mod adam;
mod gradcheck;
mod mlp;
mod vector;

pub use adam::{adam_update, AdamHyper, AdamState};
pub use gradcheck::{grad_check, DEFAULT_STEP as GRAD_CHECK_STEP};
pub use mlp::{
    sigmoid, softplus, Activation, Dense, Mlp, MlpGrads, Params, Tape, DEFAULT_LEAKY_SLOPE,
};
pub use vector::{cosine_distance, dot, mean, norm, Vec64};
