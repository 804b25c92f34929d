//! Off-line pipeline: corpus file to finalized [`SemanticIndex`].
//!
//! Two streaming passes over the corpus. The first counts document
//! frequencies and journal Dewey classes; the second extracts occurrence
//! events and feeds them to the projector. Records are processed in batches
//! whose tokenization runs in parallel; events are re-serialized in record
//! order before accumulation.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::entity::EntityKind;
use crate::error::{Error, Result};
use crate::index::{SemanticIndex, DEFAULT_BACKGROUND_SAMPLE};
use crate::ingest::{
    document_terms, extract_entities, read_corpus, ArticleRecord, CorpusLine, DocumentFrequency, JournalDewey,
    Stopwords, Vocabulary,
};
use crate::par::{self, Execution};
use crate::projector::{ProjectionBuilder, ProjectorConfig, DEFAULT_DIMS};

pub const DEFAULT_MAX_TERMS: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 42;
const BATCH: usize = 2048;

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub dims: usize,
    pub max_terms: usize,
    pub seed: u64,
    pub background_sample: usize,
    pub stopwords: Stopwords,
    pub exec: Execution,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            dims: DEFAULT_DIMS,
            max_terms: DEFAULT_MAX_TERMS,
            seed: DEFAULT_SEED,
            background_sample: DEFAULT_BACKGROUND_SAMPLE,
            stopwords: Stopwords::english(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounts {
    pub term: usize,
    pub author: usize,
    pub journal: usize,
    pub dewey: usize,
}

impl KindCounts {
    pub fn from_array(c: [usize; 4]) -> Self {
        KindCounts { term: c[0], author: c[1], journal: c[2], dewey: c[3] }
    }

    pub fn get(&self, kind: EntityKind) -> usize {
        match kind {
            EntityKind::Term => self.term,
            EntityKind::Author => self.author,
            EntityKind::Journal => self.journal,
            EntityKind::Dewey => self.dewey,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub records_read: usize,
    pub records_skipped: usize,
    pub vocab_size: usize,
    pub entities: KindCounts,
    pub active_entities: usize,
    pub dims: usize,
    pub seed: u64,
    pub background_sample: u32,
    pub elapsed_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

/// Something that can be read from the start more than once.
pub trait CorpusSource {
    fn lines(&self) -> Result<Box<dyn Iterator<Item = io::Result<CorpusLine>> + '_>>;
}

/// A JSON-lines corpus on disk.
#[derive(Debug, Clone)]
pub struct JsonlFile(pub PathBuf);

impl CorpusSource for JsonlFile {
    fn lines(&self) -> Result<Box<dyn Iterator<Item = io::Result<CorpusLine>> + '_>> {
        let file = File::open(&self.0)?;
        Ok(Box::new(read_corpus(BufReader::new(file))))
    }
}

impl CorpusSource for [ArticleRecord] {
    fn lines(&self) -> Result<Box<dyn Iterator<Item = io::Result<CorpusLine>> + '_>> {
        Ok(Box::new(self.iter().cloned().map(|r| Ok(CorpusLine::Record(r)))))
    }
}

impl CorpusSource for Vec<ArticleRecord> {
    fn lines(&self) -> Result<Box<dyn Iterator<Item = io::Result<CorpusLine>> + '_>> {
        self.as_slice().lines()
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    read: usize,
    skipped: usize,
}

/// Streams accepted records in batches. A record is skipped when its line is
/// malformed, its id is empty, or its id repeats an earlier record.
fn for_each_batch<S, F>(source: &S, mut f: F) -> Result<Tally>
where
    S: CorpusSource + ?Sized,
    F: FnMut(Vec<ArticleRecord>) -> Result<()>,
{
    let mut tally = Tally::default();
    let mut seen = HashSet::new();
    let mut batch = Vec::with_capacity(BATCH);
    for line in source.lines()? {
        tally.read += 1;
        match line? {
            CorpusLine::Record(r) if !r.id.trim().is_empty() && seen.insert(r.id.clone()) => {
                batch.push(r);
                if batch.len() == BATCH {
                    f(std::mem::replace(&mut batch, Vec::with_capacity(BATCH)))?;
                }
            }
            _ => tally.skipped += 1,
        }
    }
    if !batch.is_empty() {
        f(batch)?;
    }
    Ok(tally)
}

/// First pass: vocabulary and journal-level Dewey classes.
pub fn scan_corpus<S: CorpusSource + ?Sized>(
    source: &S,
    max_terms: usize,
    stopwords: &Stopwords,
    exec: Execution,
) -> Result<(Vocabulary, JournalDewey)> {
    let mut df = DocumentFrequency::new();
    let mut dewey = JournalDewey::default();
    for_each_batch(source, |batch| {
        let terms = par::map_slice(exec, &batch, |r| document_terms(r, stopwords));
        for (r, t) in batch.iter().zip(terms) {
            df.add_document(t);
            dewey.observe(r);
        }
        Ok(())
    })?;
    Ok((df.into_vocabulary(max_terms)?, dewey))
}

pub fn build_index<S: CorpusSource + ?Sized>(source: &S, opts: &BuildOptions) -> Result<(SemanticIndex, BuildReport)> {
    let started = Instant::now();
    if opts.max_terms == 0 {
        return Err(Error::InvalidConfig("max_terms must be at least 1".into()));
    }
    let (vocab, dewey) = scan_corpus(source, opts.max_terms, &opts.stopwords, opts.exec)?;
    let config = ProjectorConfig::new(opts.seed, opts.dims, vocab.len() as u64)?;
    let mut builder = ProjectionBuilder::with_execution(config, opts.exec)?;

    let tally = for_each_batch(source, |mut batch| {
        batch.iter_mut().for_each(|r| dewey.apply(r));
        let events = par::map_slice(opts.exec, &batch, |r| extract_entities(r, &vocab, &opts.stopwords));
        let events: Vec<_> = events.into_iter().flatten().collect();
        builder.push_batch(&events)
    })?;

    let index = SemanticIndex::from_finalized(builder.finalize())?;
    let sample = opts.background_sample.min(index.active_count());
    let mut index = index;
    let stats = index.compute_background_with(sample, opts.seed, opts.exec)?;
    index.set_background(stats)?;

    let report = BuildReport {
        records_read: tally.read,
        records_skipped: tally.skipped,
        vocab_size: vocab.len(),
        entities: KindCounts::from_array(index.counts_by_kind()),
        active_entities: index.active_count(),
        dims: config.dims,
        seed: config.seed,
        background_sample: index.background_stats().sample_size,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        output_path: None,
    };
    Ok((index, report))
}

/// Builds from a JSON-lines file and writes the index to `out`.
pub fn build_index_file(input: &Path, out: &Path, opts: &BuildOptions) -> Result<BuildReport> {
    let started = Instant::now();
    let (index, mut report) = build_index(&JsonlFile(input.to_path_buf()), opts)?;
    crate::storage::save(&index, out)?;
    report.output_path = Some(out.display().to_string());
    report.elapsed_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entity::EntityId;

    fn rec(id: &str, title: &str, issn: Option<&str>, dewey: Option<&str>) -> ArticleRecord {
        ArticleRecord {
            id: id.into(),
            title: title.into(),
            authors: vec![format!("author {id}")],
            issn: issn.map(Into::into),
            dewey: dewey.map(Into::into),
            ..Default::default()
        }
    }

    fn opts(dims: usize) -> BuildOptions {
        BuildOptions { dims, background_sample: 5, ..Default::default() }
    }

    #[test]
    fn skips_invalid_and_duplicate_records() {
        let corpus = vec![
            rec("1", "alpha beta gamma", Some("1111-1111"), Some("500")),
            rec("", "alpha beta", None, None),
            rec("1", "delta epsilon", None, None),
            rec("2", "alpha gamma delta", Some("1111-1111"), None),
            rec("3", "beta delta", None, None),
        ];
        let (index, report) = build_index(&corpus, &opts(2)).unwrap();
        assert_eq!(report.records_read, 5);
        assert_eq!(report.records_skipped, 2);
        assert!(index.position(&EntityId::term("epsilon")).is_none());
        assert_eq!(report.entities.journal, 1);
        assert_eq!(report.entities.dewey, 1);
        assert_eq!(report.entities.author, 3);
        assert_eq!(report.entities.term, report.vocab_size);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let corpus: Vec<ArticleRecord> = Vec::new();
        assert!(matches!(build_index(&corpus, &opts(2)), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn dims_must_be_below_vocabulary_size() {
        let corpus = vec![rec("1", "alpha beta", None, None)];
        assert!(matches!(build_index(&corpus, &opts(600)), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn sequential_and_parallel_builds_match() {
        let corpus: Vec<ArticleRecord> = (0..50)
            .map(|i| rec(&i.to_string(), &format!("w{} w{} w{} common", i % 7, i % 5, i % 3), None, None))
            .collect();
        let a = build_index(&corpus, &BuildOptions { exec: Execution::Sequential, ..opts(4) }).unwrap().0;
        let b = build_index(&corpus, &BuildOptions { exec: Execution::Parallel, ..opts(4) }).unwrap().0;
        assert_eq!(a, b);
    }
}
