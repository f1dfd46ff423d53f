use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{ClassId, EmbeddingDataset, Split};
use crate::error::{Error, Result};
use crate::gan::loss::{discriminator_objective, generator_objective, GanLosses, Indexed};
use crate::gan::model::{
    Discriminator, DiscriminatorGrads, GaussianNoise, Generator, GeneratorGrads, NoiseSource,
};
use crate::gan::GanConfig;
use crate::numkit::{adam_update, sigmoid, AdamHyper, AdamState, Params, Vec64};

/// One `(visual, text, class)` training triple.
#[derive(Debug, Clone, Copy)]
pub struct TrainExample<'a> {
    pub visual: &'a [f64],
    pub text: &'a [f64],
    pub class: ClassId,
}

/// Discriminator outputs for one `(visual, cond)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrimination {
    pub uncond_score: f64,
    pub cond_score: f64,
    pub class_logits: Vec<f64>,
}

/// Generator, discriminator, their optimizers and the RNG stream that drives
/// batch sampling and conditioning noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GanState {
    pub(crate) config: GanConfig,
    pub(crate) classes: Vec<ClassId>,
    pub(crate) generator: Generator,
    pub(crate) discriminator: Discriminator,
    pub(crate) gen_opt: AdamState,
    pub(crate) disc_opt: AdamState,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) iteration: u64,
    pub(crate) budget: u64,
}

impl GanState {
    /// Freshly initialised state; `classes` become the class-logit order.
    pub fn new(config: GanConfig, mut classes: Vec<ClassId>) -> Result<Self> {
        config.validate()?;
        classes.sort_unstable();
        classes.dedup();
        if classes.is_empty() {
            return Err(Error::Empty("base class list"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let generator = Generator::init(&config, &mut rng)?;
        let discriminator = Discriminator::init(&config, classes.len(), &mut rng)?;
        let hyper = AdamHyper::with_lr(config.lr);
        let gen_opt = AdamState::new(&generator, hyper)?;
        let disc_opt = AdamState::new(&discriminator, hyper)?;
        let budget = config.iterations;
        Ok(Self {
            config,
            classes,
            generator,
            discriminator,
            gen_opt,
            disc_opt,
            rng,
            iteration: 0,
            budget,
        })
    }

    pub fn config(&self) -> &GanConfig {
        &self.config
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn generator_mut(&mut self) -> &mut Generator {
        &mut self.generator
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.discriminator
    }

    pub fn discriminator_mut(&mut self) -> &mut Discriminator {
        &mut self.discriminator
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Number of train steps this state may take in total.
    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn extend_budget(&mut self, steps: u64) {
        self.budget += steps;
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Replaces the RNG stream, e.g. for an independent per-episode snapshot.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn condition_augment(&self, text: &[f64], noise: &mut dyn NoiseSource) -> Result<(Vec64, f64)> {
        self.check_text(text)?;
        let mut eps = vec![0.0; self.config.cond_dim];
        noise.fill(&mut eps)?;
        let (cond, kl) = self.generator.condition(text, &eps)?;
        Ok((Vec64::new(cond)?, kl))
    }

    pub fn generate_feature(&self, text: &[f64], noise: &mut dyn NoiseSource) -> Result<Vec64> {
        let (cond, _) = self.condition_augment(text, noise)?;
        let out = self.generator.net.predict(&cond)?;
        Vec64::new(out).map_err(|_| Error::NonFinite("generated feature".into()))
    }

    /// Mean of the features generated from each of a sample's texts.
    pub fn encode_sample_texts(&self, texts: &[Vec64], noise: &mut dyn NoiseSource) -> Result<Vec64> {
        if texts.is_empty() {
            return Err(Error::Empty("sample texts"));
        }
        let mut acc = vec![0.0; self.config.visual_dim];
        for t in texts {
            let f = self.generate_feature(t, noise)?;
            acc.iter_mut().zip(f.iter()).for_each(|(a, x)| *a += x);
        }
        let n = texts.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Vec64::new(acc)
    }

    pub fn discriminate(&self, visual: &[f64], cond: &[f64]) -> Result<Discrimination> {
        let pass = self.discriminator.forward(visual, cond)?;
        Ok(Discrimination {
            uncond_score: sigmoid(pass.uncond_logit),
            cond_score: sigmoid(pass.cond_logit),
            class_logits: pass.class_logits,
        })
    }

    fn check_text(&self, text: &[f64]) -> Result<()> {
        if text.len() != self.config.text_dim {
            return Err(Error::DimensionMismatch {
                context: "text embedding",
                expected: self.config.text_dim,
                found: text.len(),
            });
        }
        Ok(())
    }

    fn index<'a>(&self, batch: &[TrainExample<'a>]) -> Result<Vec<Indexed<'a>>> {
        if batch.is_empty() {
            return Err(Error::Empty("GAN batch"));
        }
        batch
            .iter()
            .map(|ex| {
                self.check_text(ex.text)?;
                let class = self
                    .classes
                    .binary_search(&ex.class)
                    .map_err(|_| Error::UnknownClass(ex.class))?;
                Ok(Indexed {
                    visual: ex.visual,
                    text: ex.text,
                    class,
                })
            })
            .collect()
    }

    pub fn draw_noise(&mut self, count: usize) -> Vec<Vec<f64>> {
        let dim = self.config.cond_dim;
        let mut source = GaussianNoise(&mut self.rng);
        (0..count)
            .map(|_| {
                let mut eps = vec![0.0; dim];
                source.fill(&mut eps).expect("gaussian noise is infallible");
                eps
            })
            .collect()
    }

    /// Both objectives with explicit conditioning noise (one vector per example).
    pub fn losses_with_noise(&self, batch: &[TrainExample<'_>], noise: &[Vec<f64>]) -> Result<GanLosses> {
        let indexed = self.index(batch)?;
        let w = self.config.loss_weights();
        let d = discriminator_objective(&self.generator, &self.discriminator, w, &indexed, noise, None)?;
        let g = generator_objective(&self.generator, &self.discriminator, w, &indexed, noise, None)?;
        let parts = crate::gan::LossParts {
            g_uncond: g.g_uncond,
            g_cond: g.g_cond,
            g_aux: g.g_aux,
            g_kl: g.g_kl,
            ..d
        };
        Ok(GanLosses {
            loss_d: parts.loss_d(),
            loss_g: parts.loss_g(),
            parts,
        })
    }

    /// Both objectives with conditioning noise drawn from the state's RNG.
    pub fn losses(&mut self, batch: &[TrainExample<'_>]) -> Result<GanLosses> {
        let noise = self.draw_noise(batch.len());
        self.losses_with_noise(batch, &noise)
    }

    /// `loss_D` and its gradient, evaluated with discriminator parameters `disc`.
    pub fn discriminator_loss(
        &self,
        disc: &Discriminator,
        batch: &[TrainExample<'_>],
        noise: &[Vec<f64>],
    ) -> Result<(f64, DiscriminatorGrads)> {
        let indexed = self.index(batch)?;
        let mut grads = DiscriminatorGrads::zeros_like(disc);
        let parts = discriminator_objective(
            &self.generator,
            disc,
            self.config.loss_weights(),
            &indexed,
            noise,
            Some(&mut grads),
        )?;
        Ok((parts.loss_d(), grads))
    }

    /// `loss_G` and its gradient, evaluated with generator parameters `gen`.
    pub fn generator_loss(
        &self,
        gen: &Generator,
        batch: &[TrainExample<'_>],
        noise: &[Vec<f64>],
    ) -> Result<(f64, GeneratorGrads)> {
        let indexed = self.index(batch)?;
        let mut grads = GeneratorGrads::zeros_like(gen);
        let parts = generator_objective(
            gen,
            &self.discriminator,
            self.config.loss_weights(),
            &indexed,
            noise,
            Some(&mut grads),
        )?;
        Ok((parts.loss_g(), grads))
    }

    /// One discriminator update on `loss_D`, then one generator update on
    /// `loss_G` against the updated, frozen discriminator. Both use `noise`.
    pub fn train_step_with_noise(&mut self, batch: &[TrainExample<'_>], noise: &[Vec<f64>]) -> Result<()> {
        if self.iteration >= self.budget {
            return Err(Error::Exhausted(self.iteration));
        }
        let (_, d_grads) = self.discriminator_loss(&self.discriminator, batch, noise)?;
        adam_update(&mut self.discriminator, &d_grads, &mut self.disc_opt)?;
        let (_, g_grads) = self.generator_loss(&self.generator, batch, noise)?;
        adam_update(&mut self.generator, &g_grads, &mut self.gen_opt)?;
        if !self.discriminator.all_finite() || !self.generator.all_finite() {
            return Err(Error::NonFinite(format!(
                "GAN parameters after iteration {}",
                self.iteration + 1
            )));
        }
        self.iteration += 1;
        Ok(())
    }

    pub fn train_step(&mut self, batch: &[TrainExample<'_>]) -> Result<()> {
        let noise = self.draw_noise(batch.len());
        self.train_step_with_noise(batch, &noise)
    }

    /// Extends the budget by `steps` and trains that many steps on `base`.
    pub fn train_more(&mut self, base: &BaseSet<'_>, steps: u64) -> Result<()> {
        self.extend_budget(steps);
        for _ in 0..steps {
            let batch = base.sample_batch(self.config.batch_size, &mut self.rng);
            self.train_step(&batch)?;
        }
        Ok(())
    }
}

/// Base-class training pool: every base sample with its texts.
#[derive(Debug, Clone)]
pub struct BaseSet<'a> {
    items: Vec<(&'a [f64], &'a [Vec64], ClassId)>,
    classes: Vec<ClassId>,
}

impl<'a> BaseSet<'a> {
    pub fn from_dataset(dataset: &'a EmbeddingDataset) -> Result<Self> {
        let classes = dataset.classes(Split::Base);
        let mut items = Vec::new();
        for &class in &classes {
            for &idx in dataset.class_members(class) {
                let sample = dataset.sample(idx);
                let texts = dataset.texts(idx);
                if texts.is_empty() {
                    return Err(Error::MissingTexts(sample.id));
                }
                items.push((sample.visual.as_slice(), texts, class));
            }
        }
        if items.is_empty() {
            return Err(Error::Empty("base split"));
        }
        let classes = classes
            .into_iter()
            .filter(|c| !dataset.class_members(*c).is_empty())
            .collect();
        Ok(Self { items, classes })
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Uniform images with replacement, each paired with one of its texts at random.
    pub fn sample_batch<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Vec<TrainExample<'a>> {
        (0..size)
            .map(|_| {
                let (visual, texts, class) = self.items[rng.random_range(0..self.items.len())];
                let text = &texts[rng.random_range(0..texts.len())];
                TrainExample {
                    visual,
                    text: text.as_slice(),
                    class,
                }
            })
            .collect()
    }
}

/// Trains a fresh generator/discriminator pair on the base split.
pub fn train_tcgan(dataset: &EmbeddingDataset, config: &GanConfig) -> Result<GanState> {
    if config.text_dim != dataset.text_dim() || config.visual_dim != dataset.visual_dim() {
        return Err(Error::InvalidConfig(format!(
            "GAN dims text={} visual={} do not match dataset text={} visual={}",
            config.text_dim,
            config.visual_dim,
            dataset.text_dim(),
            dataset.visual_dim()
        )));
    }
    let base = BaseSet::from_dataset(dataset)?;
    let mut state = GanState::new(config.clone(), base.classes().to_vec())?;
    for _ in 0..config.iterations {
        let batch = base.sample_batch(config.batch_size, &mut state.rng);
        state.train_step(&batch)?;
    }
    log::debug!("trained GAN for {} iterations", state.iteration);
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Sample, SampleId};
    use crate::gan::FrozenNoise;
    use crate::numkit::{grad_check, GRAD_CHECK_STEP};
    use rand_distr::{Distribution, StandardNormal};

    fn small_config(disc_hidden: Vec<usize>) -> GanConfig {
        let mut c = GanConfig::new(6, 5).with_seed(17);
        c.cond_dim = 4;
        c.gen_hidden = vec![7];
        c.disc_hidden = disc_hidden;
        c.kl_weight = 0.7;
        c.aux_weight = 1.3;
        c.uncond_weight = 0.9;
        c.cond_weight = 1.1;
        c
    }

    fn perturb<P: Params>(p: &mut P, rng: &mut ChaCha8Rng, scale: f64) {
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += scale * z;
            }
        }
    }

    fn random_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| StandardNormal.sample(rng)).collect()
    }

    struct Fixture {
        state: GanState,
        visuals: Vec<Vec<f64>>,
        texts: Vec<Vec<f64>>,
        noise: Vec<Vec<f64>>,
    }

    impl Fixture {
        fn new(seed: u64, disc_hidden: Vec<usize>) -> Self {
            let config = small_config(disc_hidden);
            let mut state = GanState::new(config, vec![ClassId(1), ClassId(4), ClassId(9)]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            perturb(&mut state.generator, &mut rng, 0.3);
            perturb(&mut state.discriminator, &mut rng, 0.3);
            let visuals = (0..4).map(|_| random_vec(&mut rng, 5)).collect();
            let texts = (0..4).map(|_| random_vec(&mut rng, 6)).collect();
            let noise = (0..4).map(|_| random_vec(&mut rng, 4)).collect();
            Self {
                state,
                visuals,
                texts,
                noise,
            }
        }

        fn batch(&self) -> Vec<TrainExample<'_>> {
            let classes = [ClassId(1), ClassId(4), ClassId(9), ClassId(4)];
            (0..4)
                .map(|i| TrainExample {
                    visual: &self.visuals[i],
                    text: &self.texts[i],
                    class: classes[i],
                })
                .collect()
        }
    }

    #[test]
    fn discriminator_gradients_match_finite_differences() {
        for (seed, hidden) in [(1, vec![6]), (2, vec![8, 5]), (3, vec![3])] {
            let f = Fixture::new(seed, hidden);
            let batch = f.batch();
            let err = grad_check(&f.state.discriminator, GRAD_CHECK_STEP, |d| {
                f.state.discriminator_loss(d, &batch, &f.noise).unwrap()
            });
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }

    #[test]
    fn generator_gradients_match_finite_differences() {
        for (seed, hidden) in [(4, vec![6]), (5, vec![8, 5]), (6, vec![3])] {
            let f = Fixture::new(seed, hidden);
            let batch = f.batch();
            let err = grad_check(&f.state.generator, GRAD_CHECK_STEP, |g| {
                f.state.generator_loss(g, &batch, &f.noise).unwrap()
            });
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }

    #[test]
    fn zero_discriminator_gives_four_ln_two() {
        let mut config = GanConfig::new(3, 2);
        config.aux_weight = 0.0;
        config.kl_weight = 0.0;
        let mut state = GanState::new(config, vec![ClassId(0)]).unwrap();
        state.discriminator = Discriminator::zeros(&state.config, 1).unwrap();
        let (v, t) = ([0.3, -1.0], [1.0, 2.0, 3.0]);
        let batch = [TrainExample {
            visual: &v,
            text: &t,
            class: ClassId(0),
        }];
        let losses = state.losses(&batch).unwrap();
        assert!((losses.loss_d - 4.0 * 2f64.ln()).abs() < 1e-12);
        let d = state.discriminate(&v, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!((d.uncond_score, d.cond_score), (0.5, 0.5));
        assert_eq!(d.class_logits, vec![0.0]);
    }

    #[test]
    fn zero_weights_give_zero_losses() {
        let mut f = Fixture::new(7, vec![6]);
        let c = &mut f.state.config;
        (c.kl_weight, c.aux_weight, c.uncond_weight, c.cond_weight) = (0.0, 0.0, 0.0, 0.0);
        let batch = f.batch();
        let l = f.state.losses_with_noise(&batch, &f.noise).unwrap();
        assert_eq!((l.loss_d, l.loss_g), (0.0, 0.0));
    }

    #[test]
    fn uniform_class_logits_give_ln_r() {
        let mut config = GanConfig::new(3, 2);
        (config.kl_weight, config.uncond_weight, config.cond_weight) = (0.0, 0.0, 0.0);
        let mut state = GanState::new(config, (0..7).map(ClassId).collect()).unwrap();
        state.discriminator = Discriminator::zeros(&state.config, 7).unwrap();
        let (v, t) = ([0.3, -1.0], [1.0, 2.0, 3.0]);
        let batch = [TrainExample {
            visual: &v,
            text: &t,
            class: ClassId(3),
        }];
        let l = state.losses(&batch).unwrap();
        assert!((l.parts.d_aux_real - 7f64.ln()).abs() < 1e-12);
        assert!((l.parts.g_aux - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn parts_sum_to_totals() {
        let f = Fixture::new(8, vec![8, 5]);
        let l = f.state.losses_with_noise(&f.batch(), &f.noise).unwrap();
        let p = l.parts;
        let d = p.d_uncond_real + p.d_uncond_fake + p.d_cond_real + p.d_cond_fake + p.d_aux_real + p.d_aux_fake;
        assert!((d - l.loss_d).abs() < 1e-10);
        assert!((p.g_uncond + p.g_cond + p.g_aux + p.g_kl - l.loss_g).abs() < 1e-10);
        assert!(p.g_kl >= 0.0);
    }

    #[test]
    fn unknown_class_and_empty_batch() {
        let f = Fixture::new(9, vec![6]);
        let mut batch = f.batch();
        batch[0].class = ClassId(2);
        assert!(matches!(
            f.state.losses_with_noise(&batch, &f.noise),
            Err(Error::UnknownClass(ClassId(2)))
        ));
        assert!(matches!(f.state.losses_with_noise(&[], &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn conditioning_augmentation_cases() {
        let config = GanConfig::new(2, 2);
        let mut state = GanState::new(config, vec![ClassId(0)]).unwrap();
        state.generator = Generator::zeros(&state.config).unwrap();
        let (c, kl) = state
            .condition_augment(&[0.4, -0.2], &mut FrozenNoise(vec![0.7, -1.1]))
            .unwrap();
        assert_eq!((c.as_slice(), kl), (&[0.7, -1.1][..], 0.0));

        state.generator.ca_mu.layers_mut()[0].bias_mut().copy_from_slice(&[1.0, 0.0]);
        let (c, kl) = state
            .condition_augment(&[0.4, -0.2], &mut FrozenNoise::zeros(2))
            .unwrap();
        assert_eq!(c.as_slice(), &[1.0, 0.0]);
        assert!((kl - 0.5).abs() < 1e-15);
    }

    #[test]
    fn generator_output_shape_and_determinism() {
        let mut state = GanState::new(GanConfig::new(32, 16).with_seed(3), vec![ClassId(0)]).unwrap();
        let text: Vec<f64> = (0..32).map(|i| (i as f64).sin()).collect();
        let eps = state.draw_noise(1).remove(0);
        let a = state.generate_feature(&text, &mut FrozenNoise(eps.clone())).unwrap();
        let b = state.generate_feature(&text, &mut FrozenNoise(eps.clone())).unwrap();
        assert_eq!(a.dim(), 16);
        assert_eq!(a, b);
        state.generator.net = crate::numkit::Mlp::zeros(32, &[(16, crate::numkit::Activation::Identity)]).unwrap();
        let bias: Vec<f64> = (0..16).map(|i| i as f64 * 0.1).collect();
        state.generator.net.layers_mut()[0].bias_mut().copy_from_slice(&bias);
        assert_eq!(state.generate_feature(&text, &mut FrozenNoise(eps)).unwrap().as_slice(), &bias[..]);
    }

    #[test]
    fn encode_texts_averages() {
        let f = Fixture::new(10, vec![6]);
        let texts: Vec<Vec64> = f.texts.iter().map(|t| Vec64::new(t.clone()).unwrap()).collect();
        let noise: Vec<f64> = f.noise.concat();
        let single = f.state.encode_sample_texts(&texts[..1], &mut FrozenNoise(noise[..4].to_vec())).unwrap();
        let g0 = f.state.generate_feature(&texts[0], &mut FrozenNoise(noise[..4].to_vec())).unwrap();
        assert_eq!(single, g0);
        assert!(matches!(
            f.state.encode_sample_texts(&[], &mut FrozenNoise::zeros(4)),
            Err(Error::Empty(_))
        ));
    }

    fn toy_dataset() -> EmbeddingDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut samples = Vec::new();
        for c in 0..3u32 {
            for j in 0..4u64 {
                let v = Vec64::new(random_vec(&mut rng, 5)).unwrap();
                let texts = (0..2).map(|_| Vec64::new(random_vec(&mut rng, 6)).unwrap()).collect();
                samples.push(Sample::new(SampleId(c as u64 * 10 + j), ClassId(c), Split::Base, v, texts));
            }
        }
        EmbeddingDataset::new(5, 6, samples, None).unwrap()
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let mut f = Fixture::new(11, vec![6]);
        f.state.gen_opt.hyper.lr = 0.0;
        f.state.disc_opt.hyper.lr = 0.0;
        let before = f.state.clone();
        let mut state = f.state.clone();
        state.train_step_with_noise(&f.batch(), &f.noise).unwrap();
        assert_eq!(state.generator, before.generator);
        assert_eq!(state.discriminator, before.discriminator);
        assert_eq!(state.iteration, 1);
    }

    #[test]
    fn updates_touch_only_their_network() {
        let f = Fixture::new(12, vec![6]);
        let batch = f.batch();
        let mut state = f.state.clone();
        let (_, dg) = state.discriminator_loss(&state.discriminator, &batch, &f.noise).unwrap();
        let gen_before = state.generator.clone();
        adam_update(&mut state.discriminator, &dg, &mut state.disc_opt).unwrap();
        assert_eq!(state.generator, gen_before);
        let disc_before = state.discriminator.clone();
        let (_, gg) = state.generator_loss(&state.generator, &batch, &f.noise).unwrap();
        adam_update(&mut state.generator, &gg, &mut state.gen_opt).unwrap();
        assert_eq!(state.discriminator, disc_before);
        assert_ne!(state.generator, gen_before);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = toy_dataset();
        let mut c = small_config(vec![6]);
        c.iterations = 20;
        c.batch_size = 4;
        let a = train_tcgan(&ds, &c).unwrap();
        let b = train_tcgan(&ds, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iteration(), 20);
        c.iterations = 0;
        let fresh = train_tcgan(&ds, &c).unwrap();
        assert_eq!(fresh, GanState::new(c, vec![ClassId(0), ClassId(1), ClassId(2)]).unwrap());
    }

    #[test]
    fn exhausted_state_refuses_steps() {
        let ds = toy_dataset();
        let mut c = small_config(vec![6]);
        c.iterations = 2;
        c.batch_size = 4;
        let mut s = train_tcgan(&ds, &c).unwrap();
        let base = BaseSet::from_dataset(&ds).unwrap();
        let batch = base.sample_batch(4, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(s.train_step(&batch), Err(Error::Exhausted(2))));
        s.train_more(&base, 3).unwrap();
        assert_eq!(s.iteration(), 5);
    }

    #[test]
    fn dims_must_match_dataset() {
        let ds = toy_dataset();
        assert!(matches!(
            train_tcgan(&ds, &GanConfig::new(7, 5)),
            Err(Error::InvalidConfig(_))
        ));
    }
}
