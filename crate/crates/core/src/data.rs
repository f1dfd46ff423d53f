//! Embedding dataset model, CSV ingestion and export.
//!
//! File formats (comma separated, one header row, `#` comment lines ignored):
//!
//! * visual: `id,class,split,d0,...,d{V-1}` with `split` in `{base, novel}`
//! * texts: `id,text_idx,e0,...,e{T-1}`, any number of rows per sample id
//! * splits (optional override): `class,split`

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::numkit::Vec64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SampleId(pub u64);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Base,
    Novel,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Base => "base",
            Split::Novel => "novel",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "base" => Ok(Split::Base),
            "novel" => Ok(Split::Novel),
            other => Err(format!("unknown split '{other}' (expected base or novel)")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: SampleId,
    pub class: ClassId,
    pub split: Split,
    pub visual: Vec64,
    texts: Vec<Vec64>,
}

impl Sample {
    pub fn new(id: SampleId, class: ClassId, split: Split, visual: Vec64, texts: Vec<Vec64>) -> Self {
        Self {
            id,
            class,
            split,
            visual,
            texts,
        }
    }

    pub fn text_count(&self) -> usize {
        self.texts.len()
    }
}

/// Immutable store of per-sample visual and text embeddings.
///
/// Text vectors are only reachable through [`EmbeddingDataset::texts`], which
/// counts every access.
#[derive(Debug)]
pub struct EmbeddingDataset {
    visual_dim: usize,
    text_dim: usize,
    samples: Vec<Sample>,
    index: HashMap<SampleId, usize>,
    classes: BTreeMap<ClassId, Split>,
    by_class: BTreeMap<ClassId, Vec<usize>>,
    text_reads: AtomicU64,
}

impl EmbeddingDataset {
    /// Builds and validates a dataset. When `class_splits` is `None` the
    /// registry is inferred from the samples.
    pub fn new(
        visual_dim: usize,
        text_dim: usize,
        samples: Vec<Sample>,
        class_splits: Option<BTreeMap<ClassId, Split>>,
    ) -> Result<Self> {
        if visual_dim == 0 || text_dim == 0 {
            return Err(Error::InvalidConfig("dataset dimensions must be >= 1".into()));
        }
        if samples.is_empty() {
            return Err(Error::Empty("dataset has no samples"));
        }
        let explicit = class_splits.is_some();
        let mut classes = class_splits.unwrap_or_default();
        let mut index = HashMap::with_capacity(samples.len());
        let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            if index.insert(s.id, i).is_some() {
                return Err(Error::Duplicate {
                    path: PathBuf::new(),
                    line: 0,
                    what: "sample id",
                    id: s.id.to_string(),
                });
            }
            if s.visual.dim() != visual_dim {
                return Err(Error::DimensionMismatch {
                    context: "sample visual vector",
                    expected: visual_dim,
                    found: s.visual.dim(),
                });
            }
            if let Some(t) = s.texts.iter().find(|t| t.dim() != text_dim) {
                return Err(Error::DimensionMismatch {
                    context: "sample text vector",
                    expected: text_dim,
                    found: t.dim(),
                });
            }
            match classes.get(&s.class) {
                Some(&split) if split != s.split => {
                    return Err(Error::SplitConflict { class: s.class })
                }
                Some(_) => {}
                None if explicit => return Err(Error::UnknownClass(s.class)),
                None => {
                    classes.insert(s.class, s.split);
                }
            }
            by_class.entry(s.class).or_default().push(i);
        }
        for members in by_class.values_mut() {
            members.sort_by_key(|&i| samples[i].id);
        }
        Ok(Self {
            visual_dim,
            text_dim,
            samples,
            index,
            classes,
            by_class,
            text_reads: AtomicU64::new(0),
        })
    }

    pub fn visual_dim(&self) -> usize {
        self.visual_dim
    }

    pub fn text_dim(&self) -> usize {
        self.text_dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, idx: usize) -> &Sample {
        &self.samples[idx]
    }

    pub fn sample_index(&self, id: SampleId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn class_split(&self, class: ClassId) -> Option<Split> {
        self.classes.get(&class).copied()
    }

    /// Class ids of one split, ascending.
    pub fn classes(&self, split: Split) -> Vec<ClassId> {
        self.classes
            .iter()
            .filter(|(_, &s)| s == split)
            .map(|(&c, _)| c)
            .collect()
    }

    /// Sample indices of a class, ordered by sample id.
    pub fn class_members(&self, class: ClassId) -> &[usize] {
        self.by_class.get(&class).map_or(&[], Vec::as_slice)
    }

    /// Text embeddings of the sample at `idx`, in text-index order.
    pub fn texts(&self, idx: usize) -> &[Vec64] {
        self.text_reads.fetch_add(1, Ordering::Relaxed);
        &self.samples[idx].texts
    }

    /// Number of [`texts`](Self::texts) calls since construction or the last reset.
    pub fn text_reads(&self) -> u64 {
        self.text_reads.load(Ordering::Relaxed)
    }

    pub fn reset_text_reads(&self) {
        self.text_reads.store(0, Ordering::Relaxed);
    }
}

impl Clone for EmbeddingDataset {
    fn clone(&self) -> Self {
        Self {
            visual_dim: self.visual_dim,
            text_dim: self.text_dim,
            samples: self.samples.clone(),
            index: self.index.clone(),
            classes: self.classes.clone(),
            by_class: self.by_class.clone(),
            text_reads: AtomicU64::new(0),
        }
    }
}

impl PartialEq for EmbeddingDataset {
    fn eq(&self, other: &Self) -> bool {
        self.visual_dim == other.visual_dim
            && self.text_dim == other.text_dim
            && self.samples == other.samples
            && self.classes == other.classes
    }
}

/// Paths of the three dataset files inside a directory.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub visual: PathBuf,
    pub texts: PathBuf,
    pub splits: Option<PathBuf>,
}

impl DatasetPaths {
    pub fn in_dir(dir: &Path) -> Self {
        let splits = dir.join("splits.csv");
        Self {
            visual: dir.join("visual.csv"),
            texts: dir.join("texts.csv"),
            splits: splits.exists().then_some(splits),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

struct Rows {
    path: PathBuf,
    inner: csv::StringRecordsIntoIter<File>,
}

impl Rows {
    fn open(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            inner: reader(path)?.into_records(),
        })
    }

    fn next_row(&mut self) -> Option<Result<(usize, csv::StringRecord)>> {
        self.inner.next().map(|r| {
            r.map(|rec| {
                let line = rec.position().map_or(0, |p| p.line() as usize);
                (line, rec)
            })
            .map_err(|e| Error::Parse {
                path: self.path.clone(),
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })
        })
    }

    fn parse_err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn field<T: FromStr>(&self, rec: &csv::StringRecord, i: usize, line: usize, what: &str) -> Result<T> {
        let raw = rec.get(i).unwrap_or("");
        raw.parse()
            .map_err(|_| self.parse_err(line, format!("invalid {what} '{raw}'")))
    }

    fn vector(&self, rec: &csv::StringRecord, from: usize, line: usize) -> Result<Vec64> {
        let mut values = Vec::with_capacity(rec.len() - from);
        for i in from..rec.len() {
            let v: f64 = self.field(rec, i, line, "embedding value")?;
            if !v.is_finite() {
                return Err(self.parse_err(line, format!("non-finite embedding value in column {i}")));
            }
            values.push(v);
        }
        Vec64::new(values).map_err(|e| self.parse_err(line, e.to_string()))
    }

    fn header(&mut self, fixed: &[&str], prefix: char) -> Result<usize> {
        let (line, rec) = match self.next_row() {
            Some(r) => r?,
            None => return Err(self.parse_err(1, "missing header row")),
        };
        let names: Vec<&str> = rec.iter().collect();
        if names.len() <= fixed.len() || names[..fixed.len()] != *fixed {
            return Err(self.parse_err(
                line,
                format!("header must start with {} followed by {prefix}0..", fixed.join(",")),
            ));
        }
        for (k, name) in names[fixed.len()..].iter().enumerate() {
            if *name != format!("{prefix}{k}") {
                return Err(self.parse_err(line, format!("unexpected header column '{name}'")));
            }
        }
        Ok(names.len() - fixed.len())
    }
}

fn load_splits(path: &Path) -> Result<BTreeMap<ClassId, Split>> {
    let mut rows = Rows::open(path)?;
    let header = match rows.next_row() {
        Some(r) => r?,
        None => return Err(rows.parse_err(1, "missing header row")),
    };
    if header.1.iter().collect::<Vec<_>>() != ["class", "split"] {
        return Err(rows.parse_err(header.0, "header must be class,split"));
    }
    let mut out = BTreeMap::new();
    while let Some(row) = rows.next_row() {
        let (line, rec) = row?;
        if rec.len() != 2 {
            return Err(rows.parse_err(line, format!("expected 2 columns, found {}", rec.len())));
        }
        let class = ClassId(rows.field(&rec, 0, line, "class id")?);
        let split: Split = rec[1]
            .parse()
            .map_err(|m: String| rows.parse_err(line, m))?;
        if out.insert(class, split).is_some() {
            return Err(Error::Duplicate {
                path: path.to_path_buf(),
                line,
                what: "class",
                id: class.to_string(),
            });
        }
    }
    Ok(out)
}

/// Reads and validates a dataset from its CSV files.
pub fn load_dataset(visual_path: &Path, text_path: &Path, split_path: Option<&Path>) -> Result<EmbeddingDataset> {
    let overrides = split_path.map(load_splits).transpose()?;

    let mut rows = Rows::open(visual_path)?;
    let visual_dim = rows.header(&["id", "class", "split"], 'd')?;
    let mut samples: Vec<Sample> = Vec::new();
    let mut index: HashMap<SampleId, usize> = HashMap::new();
    let mut inferred: BTreeMap<ClassId, Split> = BTreeMap::new();
    while let Some(row) = rows.next_row() {
        let (line, rec) = row?;
        if rec.len() != visual_dim + 3 {
            return Err(Error::RowDimension {
                path: visual_path.to_path_buf(),
                line,
                expected: visual_dim,
                found: rec.len().saturating_sub(3),
            });
        }
        let id = SampleId(rows.field(&rec, 0, line, "sample id")?);
        let class = ClassId(rows.field(&rec, 1, line, "class id")?);
        let row_split: Split = rec[2].parse().map_err(|m: String| rows.parse_err(line, m))?;
        let split = match &overrides {
            Some(map) => *map.get(&class).ok_or(Error::UnregisteredClass {
                path: visual_path.to_path_buf(),
                line,
                id,
                class,
            })?,
            None => {
                if *inferred.entry(class).or_insert(row_split) != row_split {
                    return Err(Error::SplitConflict { class });
                }
                row_split
            }
        };
        let visual = rows.vector(&rec, 3, line)?;
        if index.insert(id, samples.len()).is_some() {
            return Err(Error::Duplicate {
                path: visual_path.to_path_buf(),
                line,
                what: "sample id",
                id: id.to_string(),
            });
        }
        samples.push(Sample::new(id, class, split, visual, Vec::new()));
    }

    let mut rows = Rows::open(text_path)?;
    let text_dim = rows.header(&["id", "text_idx"], 'e')?;
    let mut texts: Vec<BTreeMap<u32, Vec64>> = vec![BTreeMap::new(); samples.len()];
    while let Some(row) = rows.next_row() {
        let (line, rec) = row?;
        if rec.len() != text_dim + 2 {
            return Err(Error::RowDimension {
                path: text_path.to_path_buf(),
                line,
                expected: text_dim,
                found: rec.len().saturating_sub(2),
            });
        }
        let id = SampleId(rows.field(&rec, 0, line, "sample id")?);
        let text_idx: u32 = rows.field(&rec, 1, line, "text index")?;
        let slot = *index.get(&id).ok_or(Error::UnknownSample {
            path: text_path.to_path_buf(),
            line,
            id,
        })?;
        let vector = rows.vector(&rec, 2, line)?;
        if texts[slot].insert(text_idx, vector).is_some() {
            return Err(Error::Duplicate {
                path: text_path.to_path_buf(),
                line,
                what: "text row",
                id: format!("{id}/{text_idx}"),
            });
        }
    }
    for (sample, t) in samples.iter_mut().zip(texts) {
        sample.texts = t.into_values().collect();
    }

    let registry = overrides.unwrap_or(inferred);
    EmbeddingDataset::new(visual_dim, text_dim, samples, Some(registry))
}

pub fn load_dataset_dir(dir: &Path) -> Result<EmbeddingDataset> {
    let paths = DatasetPaths::in_dir(dir);
    load_dataset(&paths.visual, &paths.texts, paths.splits.as_deref())
}

/// Writes `path` through a temporary file in the same directory, renaming it
/// into place only when `body` succeeds.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn write_values(w: &mut dyn Write, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        write!(w, ",{v}")?;
    }
    writeln!(w)
}

/// Writes `visual.csv`, `texts.csv` and `splits.csv` into `dir`.
///
/// Values use the shortest representation that round-trips exactly.
pub fn write_dataset(dataset: &EmbeddingDataset, dir: &Path, header: &[String]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let comments = |w: &mut dyn Write| -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        Ok(())
    };

    write_atomic(&dir.join("visual.csv"), |w| {
        comments(w)?;
        write!(w, "id,class,split")?;
        for k in 0..dataset.visual_dim {
            write!(w, ",d{k}")?;
        }
        writeln!(w)?;
        for s in &dataset.samples {
            write!(w, "{},{},{}", s.id, s.class, s.split)?;
            write_values(w, &s.visual)?;
        }
        Ok(())
    })?;

    write_atomic(&dir.join("texts.csv"), |w| {
        comments(w)?;
        write!(w, "id,text_idx")?;
        for k in 0..dataset.text_dim {
            write!(w, ",e{k}")?;
        }
        writeln!(w)?;
        for s in &dataset.samples {
            for (t, text) in s.texts.iter().enumerate() {
                write!(w, "{},{t}", s.id)?;
                write_values(w, text)?;
            }
        }
        Ok(())
    })?;

    write_atomic(&dir.join("splits.csv"), |w| {
        comments(w)?;
        writeln!(w, "class,split")?;
        for (c, s) in &dataset.classes {
            writeln!(w, "{c},{s}")?;
        }
        Ok(())
    })
}
