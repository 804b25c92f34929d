//! Deterministic test corpora.
//!
//! * [`tiny_corpus`]: 20 hand-written records with hand-checkable counts.
//! * [`generate`]: planted-topic corpora of any size. Each topic owns
//!   disjoint pools of terms, authors and journals; documents draw from one
//!   topic and borrow words from others at the mixing rate.
//! * [`hub_fixture`]: a small index with one planted hub entity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entity::{EntityId, EntityKind};
use crate::error::{Error, Result};
use crate::index::SemanticIndex;
use crate::ingest::{read_corpus, ArticleRecord, CorpusLine};
use crate::projector::ProjectorConfig;

const TINY_CORPUS: &str = include_str!("../data/tiny_corpus.jsonl");

/// The hand-written 20-record corpus (machine learning, child care,
/// photosynthesis, and two cross-topic records).
pub fn tiny_corpus() -> Vec<ArticleRecord> {
    read_corpus(TINY_CORPUS.as_bytes())
        .map(|l| match l.expect("in-memory read") {
            CorpusLine::Record(r) => r,
            CorpusLine::Malformed { line, message } => panic!("tiny corpus line {line}: {message}"),
        })
        .collect()
}

/// Raw JSON-lines text of [`tiny_corpus`].
pub fn tiny_corpus_jsonl() -> &'static str {
    TINY_CORPUS
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpusSpec {
    pub seed: u64,
    pub n_docs: usize,
    pub n_topics: usize,
    pub terms_per_topic: usize,
    pub authors_per_topic: usize,
    pub journals: usize,
    /// Probability that a word or author is drawn from another topic.
    pub mixing: f64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        SyntheticCorpusSpec {
            seed: 1,
            n_docs: 1000,
            n_topics: 5,
            terms_per_topic: 30,
            authors_per_topic: 10,
            journals: 10,
            mixing: 0.05,
        }
    }
}

impl SyntheticCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_topics == 0 || self.terms_per_topic == 0 || self.authors_per_topic == 0 || self.journals == 0 {
            return Err(Error::InvalidConfig("topic, term, author and journal counts must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.mixing) {
            return Err(Error::InvalidConfig(format!("mixing rate {} outside [0, 1]", self.mixing)));
        }
        Ok(())
    }

    pub fn term(&self, topic: usize, i: usize) -> String {
        format!("k{topic}w{i}")
    }

    pub fn author(&self, topic: usize, i: usize) -> String {
        format!("author{topic}x{i}")
    }

    pub fn journal_topic(&self, journal: usize) -> usize {
        journal % self.n_topics
    }

    pub fn issn(&self, journal: usize) -> String {
        format!("{:04}-{:04}", 1000 + journal / 10_000, journal % 10_000)
    }

    pub fn dewey(&self, topic: usize) -> String {
        format!("{:03}", (topic * 10) % 1000)
    }

    /// Journals owned by `topic`; topics without one share by modulus.
    fn journals_of(&self, topic: usize) -> Vec<usize> {
        let owned: Vec<usize> = (0..self.journals).filter(|&j| self.journal_topic(j) == topic).collect();
        if owned.is_empty() {
            vec![topic % self.journals]
        } else {
            owned
        }
    }

    /// Planted topic of a generated entity; `None` for bigrams joining two
    /// topics and for keys this generator never produces.
    pub fn topic_of(&self, entity: &EntityId) -> Option<usize> {
        match entity.kind {
            EntityKind::Term => {
                let mut topics = entity.key.split(' ').map(|w| parse_pair(w, 'k', 'w').map(|(t, _)| t));
                let first = topics.next()??;
                topics.try_fold(first, |acc, t| (t? == acc).then_some(acc))
            }
            EntityKind::Author => parse_pair(entity.key.strip_prefix("author")?, '\0', 'x').map(|(t, _)| t),
            EntityKind::Journal => {
                let (hi, lo) = entity.key.split_once('-')?;
                let j = (hi.parse::<usize>().ok()? - 1000) * 10_000 + lo.parse::<usize>().ok()?;
                if j < self.journals {
                    // Journal j serves the topic it was assigned to.
                    (0..self.n_topics).find(|&t| self.journals_of(t).contains(&j))
                } else {
                    None
                }
            }
            EntityKind::Dewey => {
                let d: usize = entity.key.parse().ok()?;
                (0..self.n_topics).find(|&t| (t * 10) % 1000 == d)
            }
        }
    }
}

fn parse_pair(s: &str, prefix: char, sep: char) -> Option<(usize, usize)> {
    let s = if prefix == '\0' { s } else { s.strip_prefix(prefix)? };
    let (a, b) = s.split_once(sep)?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Generates a planted-topic corpus; identical specs give identical corpora.
pub fn generate(spec: &SyntheticCorpusSpec) -> Result<Vec<ArticleRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut docs = Vec::with_capacity(spec.n_docs);
    for d in 0..spec.n_docs {
        let topic = rng.random_range(0..spec.n_topics);
        let pick_topic = |rng: &mut ChaCha8Rng| {
            if spec.n_topics > 1 && rng.random_bool(spec.mixing) {
                let other = rng.random_range(0..spec.n_topics - 1);
                if other >= topic {
                    other + 1
                } else {
                    other
                }
            } else {
                topic
            }
        };
        let words = |rng: &mut ChaCha8Rng, n: usize| {
            (0..n)
                .map(|_| {
                    let t = pick_topic(rng);
                    spec.term(t, rng.random_range(0..spec.terms_per_topic))
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let title = words(&mut rng, 6);
        let abstract_text = words(&mut rng, 30);
        let n_authors = rng.random_range(1..=3);
        let authors = (0..n_authors)
            .map(|_| spec.author(topic, rng.random_range(0..spec.authors_per_topic)))
            .collect();
        let pool = spec.journals_of(topic);
        let journal = pool[rng.random_range(0..pool.len())];
        docs.push(ArticleRecord {
            id: format!("syn-{}-{d}", spec.seed),
            title,
            abstract_text,
            authors,
            issn: Some(spec.issn(journal)),
            dewey: Some(spec.dewey(spec.journal_topic(journal))),
        });
    }
    Ok(docs)
}

/// Index with a planted hub: an entity moderately similar to every cluster.
#[derive(Debug, Clone)]
pub struct HubFixture {
    pub index: SemanticIndex,
    pub hub: EntityId,
    /// Query text resolving to the center of the query cluster.
    pub query: String,
    /// Members of the query cluster (strongly similar to the query).
    pub cluster: Vec<EntityId>,
    /// Weakly query-similar entities that are specific to it.
    pub satellites: Vec<EntityId>,
}

pub fn hub_fixture(seed: u64) -> Result<HubFixture> {
    const DIMS: usize = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_unit = |rng: &mut ChaCha8Rng| unit((0..DIMS).map(|_| rng.random_range(-1.0f64..1.0)).collect());
    let centers: Vec<Vec<f64>> = (0..4).map(|_| random_unit(&mut rng)).collect();

    let mut entities = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    entities.push(EntityId::term("alpha"));
    rows.push(centers[0].clone());

    let mut cluster = Vec::new();
    for i in 0..12 {
        let noise = random_unit(&mut rng);
        rows.push(centers[0].iter().zip(&noise).map(|(c, n)| c + 0.3 * n).collect());
        let e = EntityId::term(format!("alpha member {i}"));
        cluster.push(e.clone());
        entities.push(e);
    }
    let mut satellites = Vec::new();
    for i in 0..15 {
        let own = random_unit(&mut rng);
        rows.push(centers[0].iter().zip(&own).map(|(c, o)| 0.35 * c + o).collect());
        let e = EntityId::author(format!("satellite {i}"));
        satellites.push(e.clone());
        entities.push(e);
    }
    for (c, name) in centers.iter().zip(["", "beta", "gamma", "delta"]).skip(1) {
        for i in 0..25 {
            let noise = random_unit(&mut rng);
            rows.push(c.iter().zip(&noise).map(|(c, n)| c + 0.3 * n).collect());
            entities.push(EntityId::term(format!("{name} member {i}")));
        }
    }
    let hub_row: Vec<f64> = (0..DIMS).map(|j| centers.iter().map(|c| c[j]).sum()).collect();
    let hub = EntityId::journal("0000-0000");
    rows.push(hub_row);
    entities.push(hub.clone());

    let matrix = rows.iter().flat_map(|r| r.iter().map(|&v| v as f32)).collect();
    let config = ProjectorConfig { seed, dims: DIMS, vocab_size: 1 << 16 };
    let index = SemanticIndex::from_rows(config, entities, matrix)?;
    let all = index.active_count();
    let index = index.with_background(all, seed)?;
    Ok(HubFixture { index, hub, query: "alpha".into(), cluster, satellites })
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}
