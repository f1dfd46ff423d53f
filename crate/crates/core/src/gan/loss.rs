//! Adversarial, auxiliary-classification and KL objectives.
//!
//! Per batch of `B` examples with weights `(w_u, w_c, w_a, w_kl)`:
//!
//! ```text
//! loss_D = w_u·[mean −log D_u(real) + mean −log(1 − D_u(fake))]
//!        + w_c·[mean −log D_c(real, c) + mean −log(1 − D_c(fake, c))]
//!        + w_a·[mean CE(real) + mean CE(fake)]
//! loss_G = w_u·mean −log D_u(fake) + w_c·mean −log D_c(fake, c)
//!        + w_a·mean CE(fake) + w_kl·mean KL
//! ```
//!
//! All sigmoid terms are evaluated on logits through `softplus`.

use crate::error::{Error, Result};
use crate::gan::model::{Discriminator, DiscriminatorGrads, Generator, GeneratorGrads};
use crate::gan::LossWeights;
use crate::numkit::{sigmoid, softplus};

/// One training example with its class mapped to a logit index.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Indexed<'a> {
    pub visual: &'a [f64],
    pub text: &'a [f64],
    pub class: usize,
}

/// Weighted contribution of every loss term.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub d_uncond_real: f64,
    pub d_uncond_fake: f64,
    pub d_cond_real: f64,
    pub d_cond_fake: f64,
    pub d_aux_real: f64,
    pub d_aux_fake: f64,
    pub g_uncond: f64,
    pub g_cond: f64,
    pub g_aux: f64,
    pub g_kl: f64,
}

impl LossParts {
    pub fn loss_d(&self) -> f64 {
        self.d_uncond_real
            + self.d_uncond_fake
            + self.d_cond_real
            + self.d_cond_fake
            + self.d_aux_real
            + self.d_aux_fake
    }

    pub fn loss_g(&self) -> f64 {
        self.g_uncond + self.g_cond + self.g_aux + self.g_kl
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanLosses {
    pub loss_d: f64,
    pub loss_g: f64,
    pub parts: LossParts,
}

/// Cross-entropy of `logits` against `target` and its gradient w.r.t. the logits.
pub(crate) fn softmax_cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = total.ln() + max - logits[target];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / total).collect();
    grad[target] -= 1.0;
    (loss, grad)
}

fn check_batch(batch: &[Indexed<'_>], noise: &[Vec<f64>]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Empty("GAN batch"));
    }
    if noise.len() != batch.len() {
        return Err(Error::DimensionMismatch {
            context: "noise vectors per batch",
            expected: batch.len(),
            found: noise.len(),
        });
    }
    Ok(())
}

/// Discriminator objective; fills the `d_*` fields of the result.
pub(crate) fn discriminator_objective(
    gen: &Generator,
    disc: &Discriminator,
    w: LossWeights,
    batch: &[Indexed<'_>],
    noise: &[Vec<f64>],
    mut grads: Option<&mut DiscriminatorGrads>,
) -> Result<LossParts> {
    check_batch(batch, noise)?;
    let inv_b = 1.0 / batch.len() as f64;
    let mut parts = LossParts::default();
    for (ex, eps) in batch.iter().zip(noise) {
        if ex.class >= disc.num_classes() {
            return Err(Error::InvalidConfig(format!(
                "class index {} outside the {} discriminator classes",
                ex.class,
                disc.num_classes()
            )));
        }
        let (cond, _) = gen.condition(ex.text, eps)?;
        let fake = gen.net.predict(&cond)?;
        let real_pass = disc.forward(ex.visual, &cond)?;
        let fake_pass = disc.forward(&fake, &cond)?;

        parts.d_uncond_real += w.uncond * inv_b * softplus(-real_pass.uncond_logit);
        parts.d_uncond_fake += w.uncond * inv_b * softplus(fake_pass.uncond_logit);
        parts.d_cond_real += w.cond * inv_b * softplus(-real_pass.cond_logit);
        parts.d_cond_fake += w.cond * inv_b * softplus(fake_pass.cond_logit);
        let (ce_real, g_real) = softmax_cross_entropy(&real_pass.class_logits, ex.class);
        let (ce_fake, g_fake) = softmax_cross_entropy(&fake_pass.class_logits, ex.class);
        parts.d_aux_real += w.aux * inv_b * ce_real;
        parts.d_aux_fake += w.aux * inv_b * ce_fake;

        if let Some(g) = grads.as_deref_mut() {
            let scale = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| x * w.aux * inv_b).collect() };
            disc.backward(
                &real_pass,
                w.uncond * inv_b * (sigmoid(real_pass.uncond_logit) - 1.0),
                w.cond * inv_b * (sigmoid(real_pass.cond_logit) - 1.0),
                &scale(g_real),
                Some(&mut *g),
            )?;
            disc.backward(
                &fake_pass,
                w.uncond * inv_b * sigmoid(fake_pass.uncond_logit),
                w.cond * inv_b * sigmoid(fake_pass.cond_logit),
                &scale(g_fake),
                Some(&mut *g),
            )?;
        }
    }
    Ok(parts)
}

/// Generator objective (non-saturating); fills the `g_*` fields of the result.
pub(crate) fn generator_objective(
    gen: &Generator,
    disc: &Discriminator,
    w: LossWeights,
    batch: &[Indexed<'_>],
    noise: &[Vec<f64>],
    mut grads: Option<&mut GeneratorGrads>,
) -> Result<LossParts> {
    check_batch(batch, noise)?;
    let inv_b = 1.0 / batch.len() as f64;
    let mut parts = LossParts::default();
    for (ex, eps) in batch.iter().zip(noise) {
        if ex.class >= disc.num_classes() {
            return Err(Error::InvalidConfig(format!(
                "class index {} outside the {} discriminator classes",
                ex.class,
                disc.num_classes()
            )));
        }
        let pass = gen.forward(ex.text, eps)?;
        let fake_pass = disc.forward(&pass.output, &pass.cond)?;
        parts.g_uncond += w.uncond * inv_b * softplus(-fake_pass.uncond_logit);
        parts.g_cond += w.cond * inv_b * softplus(-fake_pass.cond_logit);
        let (ce, g_ce) = softmax_cross_entropy(&fake_pass.class_logits, ex.class);
        parts.g_aux += w.aux * inv_b * ce;
        parts.g_kl += w.kl * inv_b * pass.kl;

        if let Some(g) = grads.as_deref_mut() {
            let d_class: Vec<f64> = g_ce.into_iter().map(|x| x * w.aux * inv_b).collect();
            let (d_visual, d_cond) = disc.backward(
                &fake_pass,
                w.uncond * inv_b * (sigmoid(fake_pass.uncond_logit) - 1.0),
                w.cond * inv_b * (sigmoid(fake_pass.cond_logit) - 1.0),
                &d_class,
                None,
            )?;
            gen.backward(&pass, &d_visual, &d_cond, w.kl * inv_b, g)?;
        }
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_cross_entropy_is_ln_r() {
        for r in [2usize, 5, 20] {
            let (loss, grad) = softmax_cross_entropy(&vec![0.7; r], r - 1);
            assert!((loss - (r as f64).ln()).abs() < 1e-12);
            assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_is_stable_for_large_logits() {
        let (loss, _) = softmax_cross_entropy(&[1000.0, 0.0], 1);
        assert!((loss - 1000.0).abs() < 1e-9);
    }
}
