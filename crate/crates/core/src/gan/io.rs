//! Versioned binary model file.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "MMPGAN\0\0" | version u32
//! header: text_dim, visual_dim, cond_dim (u32) | gen_hidden, disc_hidden (u32 list)
//!         leaky_slope, lr (f64) | iterations u64 | batch_size u32
//!         kl, aux, uncond, cond weights (f64) | seed u64
//!         base class ids (u32 list) | iteration u64 | budget u64
//!         rng seed [u8; 32] | rng stream u64 | rng word position u128
//!         layer shapes: per network (7 of them) a list of (out u32, in u32)
//! blocks: generator tensors, discriminator tensors, then for each optimizer
//!         step u64, lr/beta1/beta2/eps (f64), first moments, second moments.
//!         Every tensor is `len u32` followed by `len` f64 values (row-major).
//! ```

use std::io::Read;
use std::path::Path;

use rand_chacha::ChaCha8Rng;

use crate::data::ClassId;
use crate::error::{Error, Result};
use crate::gan::model::{Discriminator, Generator};
use crate::gan::{GanConfig, GanState};
use crate::numkit::{AdamHyper, AdamState, Mlp, Params};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"MMPGAN\0\0";

struct Out(Vec<u8>);

impl Out {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) -> Result<()> {
        let v = u32::try_from(n).map_err(|_| Error::ModelFormat(format!("length {n} exceeds u32")))?;
        self.u32(v);
        Ok(())
    }
    fn tensor(&mut self, t: &[f64]) -> Result<()> {
        self.len(t.len())?;
        t.iter().for_each(|&v| self.f64(v));
        Ok(())
    }
}

struct In<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl In<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::ModelFormat(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice length checked"))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
    fn list(&mut self) -> Result<Vec<usize>> {
        let n = self.usize()?;
        (0..n).map(|_| self.usize()).collect()
    }
    fn tensor_into(&mut self, dst: &mut [f64]) -> Result<()> {
        let n = self.usize()?;
        if n != dst.len() {
            return Err(Error::ModelFormat(format!(
                "tensor of {n} values where {} expected",
                dst.len()
            )));
        }
        for v in dst.iter_mut() {
            *v = self.f64()?;
        }
        Ok(())
    }
}

fn networks<'a>(g: &'a Generator, d: &'a Discriminator) -> [&'a Mlp; 7] {
    [&g.ca_mu, &g.ca_log_sigma, &g.net, &d.trunk, &d.uncond, &d.cond, &d.class]
}

fn shapes(net: &Mlp) -> Vec<(usize, usize)> {
    net.layers().iter().map(|l| (l.out_dim(), l.in_dim())).collect()
}

fn write_adam(out: &mut Out, s: &AdamState) -> Result<()> {
    out.u64(s.step);
    out.f64(s.hyper.lr);
    out.f64(s.hyper.beta1);
    out.f64(s.hyper.beta2);
    out.f64(s.hyper.eps);
    for t in s.first.iter().chain(&s.second) {
        out.tensor(t)?;
    }
    Ok(())
}

fn read_adam<P: Params>(inp: &mut In<'_>, params: &P) -> Result<AdamState> {
    let step = inp.u64()?;
    let hyper = AdamHyper {
        lr: inp.f64()?,
        beta1: inp.f64()?,
        beta2: inp.f64()?,
        eps: inp.f64()?,
    };
    let mut state = AdamState::new(params, hyper)?;
    state.step = step;
    for t in state.first.iter_mut().chain(state.second.iter_mut()) {
        inp.tensor_into(t)?;
    }
    Ok(state)
}

/// Serialises the full state, bit-exact.
pub fn encode_gan_state(state: &GanState) -> Result<Vec<u8>> {
    let c = &state.config;
    let mut out = Out(Vec::new());
    out.0.extend_from_slice(MAGIC);
    out.u32(FORMAT_VERSION);
    for d in [c.text_dim, c.visual_dim, c.cond_dim] {
        out.len(d)?;
    }
    for list in [&c.gen_hidden, &c.disc_hidden] {
        out.len(list.len())?;
        for &w in list.iter() {
            out.len(w)?;
        }
    }
    out.f64(c.leaky_slope);
    out.f64(c.lr);
    out.u64(c.iterations);
    out.len(c.batch_size)?;
    for w in [c.kl_weight, c.aux_weight, c.uncond_weight, c.cond_weight] {
        out.f64(w);
    }
    out.u64(c.seed);
    out.len(state.classes.len())?;
    state.classes.iter().for_each(|k| out.u32(k.0));
    out.u64(state.iteration);
    out.u64(state.budget);
    out.0.extend_from_slice(&state.rng.get_seed());
    out.u64(state.rng.get_stream());
    out.0.extend_from_slice(&state.rng.get_word_pos().to_le_bytes());
    for net in networks(&state.generator, &state.discriminator) {
        let s = shapes(net);
        out.len(s.len())?;
        for (o, i) in s {
            out.len(o)?;
            out.len(i)?;
        }
    }
    for t in state.generator.tensors().into_iter().chain(state.discriminator.tensors()) {
        out.tensor(t)?;
    }
    write_adam(&mut out, &state.gen_opt)?;
    write_adam(&mut out, &state.disc_opt)?;
    Ok(out.0)
}

pub fn decode_gan_state(bytes: &[u8]) -> Result<GanState> {
    let mut inp = In { buf: bytes, pos: 0 };
    if &inp.take::<8>()? != MAGIC {
        return Err(Error::ModelFormat("bad magic, not a model file".into()));
    }
    let version = inp.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let text_dim = inp.usize()?;
    let visual_dim = inp.usize()?;
    let mut config = GanConfig::new(text_dim, visual_dim);
    config.cond_dim = inp.usize()?;
    config.gen_hidden = inp.list()?;
    config.disc_hidden = inp.list()?;
    config.leaky_slope = inp.f64()?;
    config.lr = inp.f64()?;
    config.iterations = inp.u64()?;
    config.batch_size = inp.usize()?;
    config.kl_weight = inp.f64()?;
    config.aux_weight = inp.f64()?;
    config.uncond_weight = inp.f64()?;
    config.cond_weight = inp.f64()?;
    config.seed = inp.u64()?;
    config.validate()?;
    let n_classes = inp.usize()?;
    let classes: Vec<ClassId> = (0..n_classes)
        .map(|_| inp.u32().map(ClassId))
        .collect::<Result<_>>()?;
    if classes.is_empty() || classes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ModelFormat("class list must be non-empty and ascending".into()));
    }
    let iteration = inp.u64()?;
    let budget = inp.u64()?;
    let seed: [u8; 32] = inp.take()?;
    let stream = inp.u64()?;
    let word_pos = inp.u128()?;

    let mut generator = Generator::zeros(&config)?;
    let mut discriminator = Discriminator::zeros(&config, classes.len())?;
    for (k, net) in networks(&generator, &discriminator).into_iter().enumerate() {
        let n_layers = inp.usize()?;
        let stored: Vec<(usize, usize)> = (0..n_layers)
            .map(|_| Ok((inp.usize()?, inp.usize()?)))
            .collect::<Result<_>>()?;
        if stored != shapes(net) {
            return Err(Error::ModelFormat(format!(
                "network {k} layer shapes {stored:?} disagree with the header configuration"
            )));
        }
    }
    for t in generator.tensors_mut() {
        inp.tensor_into(t)?;
    }
    for t in discriminator.tensors_mut() {
        inp.tensor_into(t)?;
    }
    let gen_opt = read_adam(&mut inp, &generator)?;
    let disc_opt = read_adam(&mut inp, &discriminator)?;
    if inp.pos != bytes.len() {
        return Err(Error::ModelFormat(format!(
            "{} trailing bytes",
            bytes.len() - inp.pos
        )));
    }
    if !generator.all_finite() || !discriminator.all_finite() {
        return Err(Error::NonFinite("model file parameters".into()));
    }

    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);

    Ok(GanState {
        config,
        classes,
        generator,
        discriminator,
        gen_opt,
        disc_opt,
        rng,
        iteration,
        budget,
    })
}

pub fn write_gan_state(state: &GanState, path: &Path) -> Result<()> {
    let bytes = encode_gan_state(state)?;
    crate::data::write_atomic(path, |w| w.write_all(&bytes))
}

pub fn read_gan_state(path: &Path) -> Result<GanState> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    decode_gan_state(&bytes)
}
