use crate::error::{Error, Result};
use crate::numkit::DEFAULT_LEAKY_SLOPE;

pub const DEFAULT_LR: f64 = 2e-4;
pub const DEFAULT_ITERATIONS: u64 = 500;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_KL_WEIGHT: f64 = 0.02;
pub const MAX_DEFAULT_COND_DIM: usize = 128;

/// Hyperparameters of the text-conditional feature GAN.
#[derive(Debug, Clone, PartialEq)]
pub struct GanConfig {
    pub text_dim: usize,
    pub visual_dim: usize,
    /// Output width of the conditioning-augmentation layer.
    pub cond_dim: usize,
    pub gen_hidden: Vec<usize>,
    /// Hidden widths of the discriminator trunk shared by all three heads.
    pub disc_hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub lr: f64,
    pub iterations: u64,
    pub batch_size: usize,
    pub kl_weight: f64,
    pub aux_weight: f64,
    pub uncond_weight: f64,
    pub cond_weight: f64,
    pub seed: u64,
}

impl GanConfig {
    pub fn new(text_dim: usize, visual_dim: usize) -> Self {
        Self {
            text_dim,
            visual_dim,
            cond_dim: text_dim.min(MAX_DEFAULT_COND_DIM),
            gen_hidden: vec![2 * visual_dim],
            disc_hidden: vec![2 * visual_dim],
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            lr: DEFAULT_LR,
            iterations: DEFAULT_ITERATIONS,
            batch_size: DEFAULT_BATCH_SIZE,
            kl_weight: DEFAULT_KL_WEIGHT,
            aux_weight: 1.0,
            uncond_weight: 1.0,
            cond_weight: 1.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.text_dim, self.visual_dim, self.cond_dim, self.batch_size];
        if dims.contains(&0)
            || self.gen_hidden.contains(&0)
            || self.disc_hidden.contains(&0)
        {
            return Err(Error::InvalidConfig("all GAN dimensions must be >= 1".into()));
        }
        let weights = [
            ("kl_weight", self.kl_weight),
            ("aux_weight", self.aux_weight),
            ("uncond_weight", self.uncond_weight),
            ("cond_weight", self.cond_weight),
            ("lr", self.lr),
        ];
        for (name, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {w}")));
            }
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope.is_finite()) {
            return Err(Error::InvalidConfig("leaky_slope must be > 0".into()));
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            uncond: self.uncond_weight,
            cond: self.cond_weight,
            aux: self.aux_weight,
            kl: self.kl_weight,
        }
    }

    /// `key = value` lines describing every field, for output headers.
    pub fn describe(&self) -> Vec<String> {
        let list = |v: &[usize]| {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        vec![
            format!("text_dim = {}", self.text_dim),
            format!("visual_dim = {}", self.visual_dim),
            format!("cond_dim = {}", self.cond_dim),
            format!("gen_hidden = {}", list(&self.gen_hidden)),
            format!("disc_hidden = {}", list(&self.disc_hidden)),
            format!("leaky_slope = {}", self.leaky_slope),
            format!("lr = {}", self.lr),
            format!("iterations = {}", self.iterations),
            format!("batch_size = {}", self.batch_size),
            format!("kl_weight = {}", self.kl_weight),
            format!("aux_weight = {}", self.aux_weight),
            format!("uncond_weight = {}", self.uncond_weight),
            format!("cond_weight = {}", self.cond_weight),
            format!("gan_seed = {}", self.seed),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub uncond: f64,
    pub cond: f64,
    pub aux: f64,
    pub kl: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = GanConfig::new(1024, 256);
        assert_eq!(c.lr, 2e-4);
        assert_eq!(c.iterations, 500);
        assert_eq!(c.cond_dim, 128);
        assert_eq!(c.gen_hidden, vec![512]);
        assert_eq!(GanConfig::new(32, 16).cond_dim, 32);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_negative_weight() {
        let mut c = GanConfig::new(8, 4);
        c.aux_weight = -1.0;
        assert!(c.validate().is_err());
        let mut c = GanConfig::new(8, 4);
        c.gen_hidden = vec![0];
        assert!(c.validate().is_err());
    }
}
