//! Text-conditional feature GAN: maps text embeddings into the visual
//! embedding space, trained adversarially on base classes with an auxiliary
//! class-prediction head.

mod config;
mod io;
mod loss;
mod model;
mod train;

pub use config::{
    GanConfig, LossWeights, DEFAULT_BATCH_SIZE, DEFAULT_ITERATIONS, DEFAULT_KL_WEIGHT, DEFAULT_LR,
};
pub use io::{read_gan_state, write_gan_state, FORMAT_VERSION};
pub use loss::{GanLosses, LossParts};
pub use model::{
    Discriminator, DiscriminatorGrads, FrozenNoise, GaussianNoise, Generator, GeneratorGrads,
    NoiseSource,
};
pub use train::{train_tcgan, BaseSet, Discrimination, GanState, TrainExample};
