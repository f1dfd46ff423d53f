//! k-way n-shot episode sampling over the novel split.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::data::{ClassId, EmbeddingDataset, SampleId, Split};
use crate::error::{Error, Result};

pub const DEFAULT_QUERY_CAP: usize = 15;

/// Maximum number of query samples drawn per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryCap {
    All,
    AtMost(usize),
}

impl Default for QueryCap {
    fn default() -> Self {
        QueryCap::AtMost(DEFAULT_QUERY_CAP)
    }
}

impl QueryCap {
    fn take(self, remaining: usize) -> usize {
        match self {
            QueryCap::All => remaining,
            QueryCap::AtMost(n) => n.min(remaining),
        }
    }
}

impl fmt::Display for QueryCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryCap::All => f.write_str("all"),
            QueryCap::AtMost(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for QueryCap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(QueryCap::All),
            other => match other.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(QueryCap::AtMost(n)),
                _ => Err(Error::InvalidConfig(format!(
                    "query cap must be a positive integer or 'all', got '{s}'"
                ))),
            },
        }
    }
}

/// Texts-per-image limit; the first `k` texts by text index are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TextCap {
    #[default]
    Unlimited,
    First(usize),
}

impl TextCap {
    pub fn apply<T>(self, texts: &[T]) -> &[T] {
        match self {
            TextCap::Unlimited => texts,
            TextCap::First(k) => &texts[..k.min(texts.len())],
        }
    }
}

impl fmt::Display for TextCap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TextCap::Unlimited => f.write_str("all"),
            TextCap::First(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for TextCap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(TextCap::Unlimited),
            other => match other.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(TextCap::First(k)),
                _ => Err(Error::InvalidConfig(format!(
                    "texts cap must be a positive integer or 'all', got '{s}'"
                ))),
            },
        }
    }
}

/// Support and query samples of one class, as dataset indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeClass {
    pub class_id: ClassId,
    pub support: Vec<usize>,
    pub query: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub way: usize,
    pub shot: usize,
    pub texts_cap: TextCap,
    /// Ascending class id.
    pub classes: Vec<EpisodeClass>,
}

impl Episode {
    pub fn support_ids(&self, dataset: &EmbeddingDataset) -> Vec<(ClassId, Vec<SampleId>)> {
        self.ids(dataset, |c| &c.support)
    }

    pub fn query_ids(&self, dataset: &EmbeddingDataset) -> Vec<(ClassId, Vec<SampleId>)> {
        self.ids(dataset, |c| &c.query)
    }

    fn ids(
        &self,
        dataset: &EmbeddingDataset,
        pick: impl Fn(&EpisodeClass) -> &Vec<usize>,
    ) -> Vec<(ClassId, Vec<SampleId>)> {
        self.classes
            .iter()
            .map(|c| (c.class_id, pick(c).iter().map(|&i| dataset.sample(i).id).collect()))
            .collect()
    }

    pub fn query_count(&self) -> usize {
        self.classes.iter().map(|c| c.query.len()).sum()
    }
}

/// Draws `way` distinct novel classes, then `shot` support and up to
/// `query_cap` disjoint query samples per class, all without replacement.
pub fn sample_episode<R: Rng + ?Sized>(
    dataset: &EmbeddingDataset,
    way: usize,
    shot: usize,
    query_cap: QueryCap,
    texts_cap: TextCap,
    rng: &mut R,
) -> Result<Episode> {
    if way == 0 || shot == 0 {
        return Err(Error::InvalidConfig(format!(
            "way and shot must be >= 1 (way={way}, shot={shot})"
        )));
    }
    if texts_cap == TextCap::First(0) {
        return Err(Error::InvalidConfig("texts cap must be >= 1".into()));
    }
    let novel = dataset.classes(Split::Novel);
    if way > novel.len() {
        return Err(Error::WayTooLarge {
            way,
            available: novel.len(),
        });
    }
    let mut chosen: Vec<ClassId> = index::sample(rng, novel.len(), way)
        .into_iter()
        .map(|i| novel[i])
        .collect();
    chosen.sort();
    let mut classes = Vec::with_capacity(way);
    for class_id in chosen {
        let members = dataset.class_members(class_id);
        if members.len() < shot + 1 {
            return Err(Error::ClassTooSmall {
                class: class_id,
                available: members.len(),
                needed: shot + 1,
            });
        }
        let take = shot + query_cap.take(members.len() - shot);
        let picked: Vec<usize> = index::sample(rng, members.len(), take)
            .into_iter()
            .map(|i| members[i])
            .collect();
        let (support, query) = picked.split_at(shot);
        classes.push(EpisodeClass {
            class_id,
            support: support.to_vec(),
            query: query.to_vec(),
        });
    }
    Ok(Episode {
        way,
        shot,
        texts_cap,
        classes,
    })
}
