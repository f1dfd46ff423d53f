//! Class prototypes from real and generated features, multimodal fusion and
//! nearest-prototype classification under cosine distance.

use crate::data::{ClassId, SampleId};
use crate::error::{Error, Result};
use crate::gan::{BaseSet, GanState, NoiseSource};
use crate::numkit::{cosine_distance, mean, Vec64};

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_ROUNDS: usize = 10;
pub const DEFAULT_EXTRA_STEPS: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    ImageOnly,
    TextOnly,
    Multimodal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub class_id: ClassId,
    pub vector: Vec64,
    pub provenance: Provenance,
    pub support_count: usize,
}

/// Prototypes keyed by class, ascending class id.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    prototypes: Vec<Prototype>,
}

impl PrototypeSet {
    pub fn new(mut prototypes: Vec<Prototype>) -> Result<Self> {
        let dim = prototypes
            .first()
            .ok_or(Error::Empty("prototype set"))?
            .vector
            .dim();
        prototypes.sort_by_key(|p| p.class_id);
        for w in prototypes.windows(2) {
            if w[0].class_id == w[1].class_id {
                return Err(Error::InvalidConfig(format!(
                    "duplicate prototype for class {}",
                    w[0].class_id
                )));
            }
        }
        if let Some(p) = prototypes.iter().find(|p| p.vector.dim() != dim) {
            return Err(Error::DimensionMismatch {
                context: "prototype vector",
                expected: dim,
                found: p.vector.dim(),
            });
        }
        Ok(Self { prototypes })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Prototype> {
        self.prototypes.iter()
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.prototypes[0].vector.dim()
    }

    pub fn get(&self, class: ClassId) -> Option<&Prototype> {
        self.prototypes
            .binary_search_by_key(&class, |p| p.class_id)
            .ok()
            .map(|i| &self.prototypes[i])
    }
}

/// Mean of the real support features.
pub fn visual_prototype<V: AsRef<[f64]>>(support: &[V], class_id: ClassId) -> Result<Prototype> {
    if support.is_empty() {
        return Err(Error::Empty("prototype support"));
    }
    Ok(Prototype {
        class_id,
        vector: Vec64::new(mean(support)?)?,
        provenance: Provenance::ImageOnly,
        support_count: support.len(),
    })
}

/// Mean over support samples of the average generated feature of each
/// sample's texts.
pub fn text_prototype(
    gan: &GanState,
    support: &[(SampleId, &[Vec64])],
    class_id: ClassId,
    noise: &mut dyn NoiseSource,
) -> Result<Prototype> {
    if support.is_empty() {
        return Err(Error::Empty("prototype support"));
    }
    let mut encoded = Vec::with_capacity(support.len());
    for &(id, texts) in support {
        if texts.is_empty() {
            return Err(Error::MissingTexts(id));
        }
        encoded.push(gan.encode_sample_texts(texts, noise)?);
    }
    Ok(Prototype {
        class_id,
        vector: Vec64::new(mean(&encoded)?)?,
        provenance: Provenance::TextOnly,
        support_count: support.len(),
    })
}

/// `(p + λ·p_T) / (1 + λ)`.
pub fn fuse(p: &Prototype, p_text: &Prototype, lambda: f64) -> Result<Prototype> {
    if p.class_id != p_text.class_id {
        return Err(Error::ClassMismatch {
            left: p.class_id,
            right: p_text.class_id,
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if p.vector.dim() != p_text.vector.dim() {
        return Err(Error::DimensionMismatch {
            context: "fuse",
            expected: p.vector.dim(),
            found: p_text.vector.dim(),
        });
    }
    let denom = 1.0 + lambda;
    let fused = p
        .vector
        .iter()
        .zip(p_text.vector.iter())
        .map(|(a, b)| (a + lambda * b) / denom)
        .collect();
    Ok(Prototype {
        class_id: p.class_id,
        vector: Vec64::new(fused)?,
        provenance: Provenance::Multimodal,
        support_count: p.support_count,
    })
}

/// One novel class's support set: real features and per-sample texts
/// (already truncated to the texts-per-image cap).
#[derive(Debug, Clone)]
pub struct SupportClass<'a> {
    pub class_id: ClassId,
    pub visuals: Vec<&'a [f64]>,
    pub texts: Vec<(SampleId, &'a [Vec64])>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    pub rounds: usize,
    pub lambda: f64,
    /// Generator/discriminator steps on base data before each round.
    pub extra_steps: u64,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            rounds: DEFAULT_ROUNDS,
            lambda: DEFAULT_LAMBDA,
            extra_steps: DEFAULT_EXTRA_STEPS,
        }
    }
}

/// Starts from the image-only prototypes and, each round, advances the GAN on
/// base data, regenerates the text prototypes and folds them in with [`fuse`].
///
/// Returns the initial image-only set alongside the final multimodal set.
pub fn refine_multimodal_prototypes(
    gan: &mut GanState,
    support: &[SupportClass<'_>],
    params: RefineParams,
    base: &BaseSet<'_>,
    noise: &mut dyn NoiseSource,
) -> Result<(PrototypeSet, PrototypeSet)> {
    if params.rounds == 0 {
        return Err(Error::InvalidConfig("refinement needs at least one round".into()));
    }
    let initial: Vec<Prototype> = support
        .iter()
        .map(|s| visual_prototype(&s.visuals, s.class_id))
        .collect::<Result<_>>()?;
    let image_only = PrototypeSet::new(initial.clone())?;
    let mut current = initial;
    for _ in 0..params.rounds {
        if params.extra_steps > 0 {
            gan.train_more(base, params.extra_steps)?;
        }
        for (proto, class) in current.iter_mut().zip(support) {
            let p_text = text_prototype(gan, &class.texts, class.class_id, noise)?;
            *proto = fuse(proto, &p_text, params.lambda)?;
        }
    }
    Ok((image_only, PrototypeSet::new(current)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub predicted: ClassId,
    /// Every class, nearest first.
    pub ranked: Vec<ClassId>,
    pub distances: Vec<f64>,
}

/// Nearest prototype under cosine distance; ties go to the smaller class id.
pub fn classify(prototypes: &PrototypeSet, query: &[f64]) -> Result<Classification> {
    if query.len() != prototypes.dim() {
        return Err(Error::DimensionMismatch {
            context: "query",
            expected: prototypes.dim(),
            found: query.len(),
        });
    }
    let mut scored: Vec<(f64, ClassId)> = prototypes
        .iter()
        .map(|p| Ok((cosine_distance(query, &p.vector)?, p.class_id)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(Classification {
        predicted: scored[0].1,
        ranked: scored.iter().map(|s| s.1).collect(),
        distances: scored.iter().map(|s| s.0).collect(),
    })
}
