//! Generator (conditioning augmentation + feature MLP) and the three-headed
//! discriminator, each with explicit forward/backward passes.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gan::GanConfig;
use crate::numkit::{dot, Activation, Mlp, MlpGrads, Params, Tape};

/// Source of the standard-normal draws used by conditioning augmentation.
pub trait NoiseSource {
    fn fill(&mut self, out: &mut [f64]) -> Result<()>;
}

/// Fresh `N(0, I)` draws from an RNG.
pub struct GaussianNoise<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> NoiseSource for GaussianNoise<'_, R> {
    fn fill(&mut self, out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = self.0.sample(StandardNormal));
        Ok(())
    }
}

/// The same noise vector on every draw.
#[derive(Debug, Clone)]
pub struct FrozenNoise(pub Vec<f64>);

impl FrozenNoise {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }
}

impl NoiseSource for FrozenNoise {
    fn fill(&mut self, out: &mut [f64]) -> Result<()> {
        if out.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                context: "frozen noise",
                expected: out.len(),
                found: self.0.len(),
            });
        }
        out.copy_from_slice(&self.0);
        Ok(())
    }
}

/// `G_t`: text → conditioning augmentation → visual feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    /// Single identity layer, text → μ.
    pub ca_mu: Mlp,
    /// Single identity layer, text → log σ.
    pub ca_log_sigma: Mlp,
    pub net: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorGrads {
    pub ca_mu: MlpGrads,
    pub ca_log_sigma: MlpGrads,
    pub net: MlpGrads,
}

/// Everything recorded by [`Generator::forward`].
#[derive(Debug, Clone)]
pub struct GeneratorPass {
    pub cond: Vec<f64>,
    pub kl: f64,
    pub output: Vec<f64>,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    eps: Vec<f64>,
    mu_tape: Tape,
    ls_tape: Tape,
    net_tape: Tape,
}

impl Generator {
    pub fn init<R: Rng + ?Sized>(config: &GanConfig, rng: &mut R) -> Result<Self> {
        let ca = [(config.cond_dim, Activation::Identity)];
        let ca_mu = Mlp::init(config.text_dim, &ca, rng)?;
        // σ starts at 1 everywhere.
        let ca_log_sigma = Mlp::zeros(config.text_dim, &ca)?;
        let net = Mlp::init(config.cond_dim, &Self::widths(config), rng)?;
        Ok(Self {
            ca_mu,
            ca_log_sigma,
            net,
        })
    }

    pub fn zeros(config: &GanConfig) -> Result<Self> {
        let ca = [(config.cond_dim, Activation::Identity)];
        Ok(Self {
            ca_mu: Mlp::zeros(config.text_dim, &ca)?,
            ca_log_sigma: Mlp::zeros(config.text_dim, &ca)?,
            net: Mlp::zeros(config.cond_dim, &Self::widths(config))?,
        })
    }

    fn widths(config: &GanConfig) -> Vec<(usize, Activation)> {
        let hidden = Activation::LeakyRelu(config.leaky_slope);
        config
            .gen_hidden
            .iter()
            .map(|&w| (w, hidden))
            .chain([(config.visual_dim, Activation::Identity)])
            .collect()
    }

    pub fn text_dim(&self) -> usize {
        self.ca_mu.input_dim()
    }

    pub fn cond_dim(&self) -> usize {
        self.ca_mu.output_dim()
    }

    pub fn visual_dim(&self) -> usize {
        self.net.output_dim()
    }

    /// Conditioning augmentation: `c = μ(t) + exp(log σ(t)) ⊙ ε` and
    /// `KL(N(μ, σ²) ‖ N(0, I))`.
    pub fn condition(&self, text: &[f64], eps: &[f64]) -> Result<(Vec<f64>, f64)> {
        if eps.len() != self.cond_dim() {
            return Err(Error::DimensionMismatch {
                context: "conditioning noise",
                expected: self.cond_dim(),
                found: eps.len(),
            });
        }
        let mu = self.ca_mu.predict(text)?;
        let log_sigma = self.ca_log_sigma.predict(text)?;
        let mut kl = 0.0;
        let cond = mu
            .iter()
            .zip(&log_sigma)
            .zip(eps)
            .map(|((&m, &ls), &e)| {
                let s = ls.exp();
                kl += 0.5 * (m * m + s * s - 1.0 - 2.0 * ls);
                m + s * e
            })
            .collect();
        Ok((cond, kl))
    }

    pub fn forward(&self, text: &[f64], eps: &[f64]) -> Result<GeneratorPass> {
        if eps.len() != self.cond_dim() {
            return Err(Error::DimensionMismatch {
                context: "conditioning noise",
                expected: self.cond_dim(),
                found: eps.len(),
            });
        }
        let (mu, mu_tape) = self.ca_mu.forward(text)?;
        let (log_sigma, ls_tape) = self.ca_log_sigma.forward(text)?;
        let sigma: Vec<f64> = log_sigma.iter().map(|v| v.exp()).collect();
        let mut kl = 0.0;
        let mut cond = Vec::with_capacity(mu.len());
        for k in 0..mu.len() {
            kl += 0.5 * (mu[k] * mu[k] + sigma[k] * sigma[k] - 1.0 - 2.0 * log_sigma[k]);
            cond.push(mu[k] + sigma[k] * eps[k]);
        }
        let (output, net_tape) = self.net.forward(&cond)?;
        Ok(GeneratorPass {
            cond,
            kl,
            output,
            mu,
            sigma,
            eps: eps.to_vec(),
            mu_tape,
            ls_tape,
            net_tape,
        })
    }

    /// Accumulates `d(loss)/d(params)` where the loss depends on the pass
    /// through its output (`d_output`), directly through the conditioning
    /// vector (`d_cond`, may be empty) and through `kl_coeff · kl`.
    pub fn backward(
        &self,
        pass: &GeneratorPass,
        d_output: &[f64],
        d_cond: &[f64],
        kl_coeff: f64,
        grads: &mut GeneratorGrads,
    ) -> Result<()> {
        let mut dc = self.net.backward_into(&pass.net_tape, d_output, &mut grads.net)?;
        if !d_cond.is_empty() {
            if d_cond.len() != dc.len() {
                return Err(Error::DimensionMismatch {
                    context: "conditioning gradient",
                    expected: dc.len(),
                    found: d_cond.len(),
                });
            }
            dc.iter_mut().zip(d_cond).for_each(|(a, b)| *a += b);
        }
        let d_mu: Vec<f64> = dc
            .iter()
            .zip(&pass.mu)
            .map(|(g, m)| g + kl_coeff * m)
            .collect();
        let d_ls: Vec<f64> = dc
            .iter()
            .zip(pass.sigma.iter().zip(&pass.eps))
            .map(|(g, (s, e))| g * s * e + kl_coeff * (s * s - 1.0))
            .collect();
        self.ca_mu.backward_into(&pass.mu_tape, &d_mu, &mut grads.ca_mu)?;
        self.ca_log_sigma
            .backward_into(&pass.ls_tape, &d_ls, &mut grads.ca_log_sigma)?;
        Ok(())
    }
}

impl GeneratorGrads {
    pub fn zeros_like(g: &Generator) -> Self {
        Self {
            ca_mu: MlpGrads::zeros_like(&g.ca_mu),
            ca_log_sigma: MlpGrads::zeros_like(&g.ca_log_sigma),
            net: MlpGrads::zeros_like(&g.net),
        }
    }
}

/// Discriminator with a shared trunk over the visual vector and three heads:
/// unconditional real/fake logit, conditional real/fake logit and base-class
/// logits.
///
/// The conditional head is a projection: `cond` embeds the conditioning
/// vector into trunk-feature space and the logit is `h · cond(c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub trunk: Mlp,
    pub uncond: Mlp,
    pub cond: Mlp,
    pub class: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorGrads {
    pub trunk: MlpGrads,
    pub uncond: MlpGrads,
    pub cond: MlpGrads,
    pub class: MlpGrads,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorPass {
    pub uncond_logit: f64,
    pub cond_logit: f64,
    pub class_logits: Vec<f64>,
    trunk_tape: Tape,
    uncond_tape: Tape,
    cond_tape: Tape,
    class_tape: Tape,
    feat: Vec<f64>,
    cond_embed: Vec<f64>,
}

impl Discriminator {
    fn widths(config: &GanConfig, num_classes: usize) -> [Vec<(usize, Activation)>; 4] {
        let hidden = Activation::LeakyRelu(config.leaky_slope);
        let trunk = config.disc_hidden.iter().map(|&w| (w, hidden)).collect();
        let feat = config.disc_hidden.last().copied().unwrap_or(config.visual_dim);
        [
            trunk,
            vec![(1, Activation::Identity)],
            vec![(feat, Activation::Identity)],
            vec![(num_classes, Activation::Identity)],
        ]
    }

    fn feature_dim(config: &GanConfig) -> usize {
        config.disc_hidden.last().copied().unwrap_or(config.visual_dim)
    }

    pub fn init<R: Rng + ?Sized>(config: &GanConfig, num_classes: usize, rng: &mut R) -> Result<Self> {
        let [t, u, c, k] = Self::widths(config, num_classes);
        let feat = Self::feature_dim(config);
        Ok(Self {
            trunk: Mlp::init(config.visual_dim, &t, rng)?,
            uncond: Mlp::init(feat, &u, rng)?,
            cond: Mlp::init(config.cond_dim, &c, rng)?,
            class: Mlp::init(feat, &k, rng)?,
        })
    }

    pub fn zeros(config: &GanConfig, num_classes: usize) -> Result<Self> {
        let [t, u, c, k] = Self::widths(config, num_classes);
        let feat = Self::feature_dim(config);
        Ok(Self {
            trunk: Mlp::zeros(config.visual_dim, &t)?,
            uncond: Mlp::zeros(feat, &u)?,
            cond: Mlp::zeros(config.cond_dim, &c)?,
            class: Mlp::zeros(feat, &k)?,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class.output_dim()
    }

    pub fn forward(&self, visual: &[f64], cond: &[f64]) -> Result<DiscriminatorPass> {
        let (feat, trunk_tape) = self.trunk.forward(visual)?;
        if cond.len() != self.cond.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "discriminator conditioning input",
                expected: self.cond.input_dim(),
                found: cond.len(),
            });
        }
        let (u, uncond_tape) = self.uncond.forward(&feat)?;
        let (k, class_tape) = self.class.forward(&feat)?;
        let (cond_embed, cond_tape) = self.cond.forward(cond)?;
        Ok(DiscriminatorPass {
            uncond_logit: u[0],
            cond_logit: dot(&feat, &cond_embed),
            class_logits: k,
            trunk_tape,
            uncond_tape,
            cond_tape,
            class_tape,
            feat,
            cond_embed,
        })
    }

    /// Backpropagates head gradients. Parameter gradients are accumulated into
    /// `grads` when given. Returns `(d_visual, d_cond)`.
    pub fn backward(
        &self,
        pass: &DiscriminatorPass,
        d_uncond: f64,
        d_cond: f64,
        d_class: &[f64],
        grads: Option<&mut DiscriminatorGrads>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let d_embed: Vec<f64> = pass.feat.iter().map(|h| d_cond * h).collect();
        let d_feat_c: Vec<f64> = pass.cond_embed.iter().map(|e| d_cond * e).collect();
        let (d_feat_u, d_c, d_feat_k, d_visual);
        match grads {
            Some(g) => {
                d_feat_u = self.uncond.backward_into(&pass.uncond_tape, &[d_uncond], &mut g.uncond)?;
                d_c = self.cond.backward_into(&pass.cond_tape, &d_embed, &mut g.cond)?;
                d_feat_k = self.class.backward_into(&pass.class_tape, d_class, &mut g.class)?;
                let d_feat = sum3(&d_feat_u, &d_feat_c, &d_feat_k);
                d_visual = self.trunk.backward_into(&pass.trunk_tape, &d_feat, &mut g.trunk)?;
            }
            None => {
                d_feat_u = self.uncond.backward_input(&pass.uncond_tape, &[d_uncond])?;
                d_c = self.cond.backward_input(&pass.cond_tape, &d_embed)?;
                d_feat_k = self.class.backward_input(&pass.class_tape, d_class)?;
                let d_feat = sum3(&d_feat_u, &d_feat_c, &d_feat_k);
                d_visual = self.trunk.backward_input(&pass.trunk_tape, &d_feat)?;
            }
        }
        Ok((d_visual, d_c))
    }
}

fn sum3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    a.iter().zip(b).zip(c).map(|((x, y), z)| x + y + z).collect()
}

impl DiscriminatorGrads {
    pub fn zeros_like(d: &Discriminator) -> Self {
        Self {
            trunk: MlpGrads::zeros_like(&d.trunk),
            uncond: MlpGrads::zeros_like(&d.uncond),
            cond: MlpGrads::zeros_like(&d.cond),
            class: MlpGrads::zeros_like(&d.class),
        }
    }
}

macro_rules! impl_params {
    ($ty:ty { $($field:ident),+ }) => {
        impl Params for $ty {
            fn tensors(&self) -> Vec<&[f64]> {
                let mut out = Vec::new();
                $(out.extend(self.$field.tensors());)+
                out
            }

            fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
                let mut out = Vec::new();
                $(out.extend(self.$field.tensors_mut());)+
                out
            }
        }
    };
}

impl_params!(Generator { ca_mu, ca_log_sigma, net });
impl_params!(GeneratorGrads { ca_mu, ca_log_sigma, net });
impl_params!(Discriminator { trunk, uncond, cond, class });
impl_params!(DiscriminatorGrads { trunk, uncond, cond, class });
