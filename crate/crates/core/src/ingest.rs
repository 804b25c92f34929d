//! Corpus parsing, tokenization, vocabulary selection and occurrence events.
//!
//! A corpus is a JSON-lines file, one [`ArticleRecord`] per line:
//!
//! ```text
//! {"id":"a1","title":"...","abstract":"...","authors":["lee k"],"issn":"1234-5678","dewey":"006"}
//! ```
//!
//! Unknown fields are ignored; `abstract`, `authors`, `issn` and `dewey` may be
//! omitted.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entity::{EntityId, EntityKind};
use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// One bibliographic record.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issn: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dewey: Option<String>,
}

impl ArticleRecord {
    /// Normalized journal key, if the record names a journal.
    pub fn journal_key(&self) -> Option<String> {
        non_empty(self.issn.as_deref()).map(|s| EntityKind::Journal.normalize_key(s))
    }

    pub fn dewey_key(&self) -> Option<String> {
        non_empty(self.dewey.as_deref()).map(|s| EntityKind::Dewey.normalize_key(s))
    }
}

fn non_empty(s: Option<&str>) -> Option<&str> {
    s.filter(|s| !s.trim().is_empty())
}

/// Lowercased stop word set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The list shipped with the crate.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    /// One token per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stopwords(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Splits text into lowercased unigrams followed by adjacent bigrams.
///
/// Punctuation separates words. Stop words and words shorter than two
/// characters are dropped before bigrams are formed, so a bigram may span a
/// removed stop word ("learning for the web" gives "learning web").
pub fn tokenize(text: &str, stopwords: &Stopwords) -> Vec<String> {
    let words: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| w.chars().count() >= 2 && !stopwords.contains(w))
        .collect();
    let bigrams: Vec<String> = words.windows(2).map(|w| format!("{} {}", w[0], w[1])).collect();
    let mut out = words;
    out.extend(bigrams);
    out
}

/// Tokens of a whole record. Title and abstract are tokenized separately so
/// no bigram straddles the boundary between them.
pub fn document_terms(record: &ArticleRecord, stopwords: &Stopwords) -> Vec<String> {
    let mut terms = tokenize(&record.title, stopwords);
    terms.extend(tokenize(&record.abstract_text, stopwords));
    terms
}

/// Ordered context-term vocabulary; column `i` of the context matrix is `terms[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from terms already in column order.
    ///
    /// Duplicates keep their first position.
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::default();
        for t in terms {
            let t = t.into();
            if !vocab.index.contains_key(&t) {
                vocab.index.insert(t.clone(), vocab.terms.len() as u32);
                vocab.terms.push(t);
            }
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, column: u32) -> Option<&str> {
        self.terms.get(column as usize).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// Counts the number of records each term occurs in.
#[derive(Debug, Clone, Default)]
pub struct DocumentFrequency {
    counts: HashMap<String, u64>,
}

impl DocumentFrequency {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one document given its (possibly repeated) terms.
    pub fn add_document<I, S>(&mut self, terms: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        for t in terms {
            let t = t.as_ref();
            if seen.insert(t.to_string()) {
                *self.counts.entry(t.to_string()).or_insert(0) += 1;
            }
        }
    }

    pub fn get(&self, term: &str) -> u64 {
        self.counts.get(term).copied().unwrap_or(0)
    }

    /// Keeps the `max_terms` terms with highest document frequency, ties
    /// broken lexicographically.
    pub fn into_vocabulary(self, max_terms: usize) -> Result<Vocabulary> {
        if max_terms == 0 {
            return Err(Error::InvalidConfig("max_terms must be at least 1".into()));
        }
        if self.counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut ranked: Vec<(String, u64)> = self.counts.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_terms);
        Ok(Vocabulary::from_terms(ranked.into_iter().map(|(t, _)| t)))
    }
}

/// Selects the vocabulary from a corpus.
pub fn build_vocabulary<'a, I>(corpus: I, max_terms: usize, stopwords: &Stopwords) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a ArticleRecord>,
{
    if max_terms == 0 {
        return Err(Error::InvalidConfig("max_terms must be at least 1".into()));
    }
    let mut df = DocumentFrequency::new();
    for record in corpus {
        df.add_document(document_terms(record, stopwords));
    }
    df.into_vocabulary(max_terms)
}

/// Co-occurrence profile of one entity within one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceEvent {
    pub doc_id: String,
    pub entity: EntityId,
    /// `(column, count)` pairs sorted by column; counts are strictly positive.
    pub cooccurring_terms: Vec<(u32, u32)>,
}

impl OccurrenceEvent {
    pub fn total_count(&self) -> u64 {
        self.cooccurring_terms.iter().map(|&(_, c)| c as u64).sum()
    }
}

/// In-vocabulary term counts of a record, sorted by column.
pub fn term_profile(record: &ArticleRecord, vocab: &Vocabulary, stopwords: &Stopwords) -> Vec<(u32, u32)> {
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for t in document_terms(record, stopwords) {
        if let Some(col) = vocab.get(&t) {
            *counts.entry(col).or_insert(0) += 1;
        }
    }
    counts.into_iter().collect()
}

/// One event per distinct entity of the record.
///
/// Order: term entities by column, then authors in listed order, the
/// journal, and the Dewey class. Term entities leave their own column out of
/// their profile.
pub fn extract_entities(record: &ArticleRecord, vocab: &Vocabulary, stopwords: &Stopwords) -> Vec<OccurrenceEvent> {
    let profile = term_profile(record, vocab, stopwords);
    let mut events = Vec::with_capacity(profile.len() + record.authors.len() + 2);

    for &(col, _) in &profile {
        let term = vocab.term(col).expect("profile columns come from the vocabulary");
        events.push(OccurrenceEvent {
            doc_id: record.id.clone(),
            entity: EntityId::term(term),
            cooccurring_terms: profile.iter().copied().filter(|&(c, _)| c != col).collect(),
        });
    }

    let mut seen_authors = HashSet::new();
    for raw in &record.authors {
        let key = EntityKind::Author.normalize_key(raw);
        if key.is_empty() || !seen_authors.insert(key.clone()) {
            continue;
        }
        events.push(OccurrenceEvent {
            doc_id: record.id.clone(),
            entity: EntityId::author(key),
            cooccurring_terms: profile.clone(),
        });
    }

    if let Some(key) = record.journal_key() {
        events.push(OccurrenceEvent {
            doc_id: record.id.clone(),
            entity: EntityId::journal(key),
            cooccurring_terms: profile.clone(),
        });
    }
    if let Some(key) = record.dewey_key() {
        events.push(OccurrenceEvent {
            doc_id: record.id.clone(),
            entity: EntityId::dewey(key),
            cooccurring_terms: profile,
        });
    }
    events
}

/// Journal-level Dewey assignment.
///
/// Dewey classes belong to journals; a record without a class inherits the
/// first class seen on any record of the same journal.
#[derive(Debug, Clone, Default)]
pub struct JournalDewey {
    by_journal: HashMap<String, String>,
}

impl JournalDewey {
    pub fn observe(&mut self, record: &ArticleRecord) {
        if let (Some(j), Some(d)) = (record.journal_key(), record.dewey_key()) {
            self.by_journal.entry(j).or_insert(d);
        }
    }

    /// The class for this record's journal, falling back to the record's own.
    pub fn resolve(&self, record: &ArticleRecord) -> Option<String> {
        record
            .journal_key()
            .and_then(|j| self.by_journal.get(&j).cloned())
            .or_else(|| record.dewey_key())
    }

    /// Applies [`resolve`](Self::resolve) in place.
    pub fn apply(&self, record: &mut ArticleRecord) {
        record.dewey = self.resolve(record);
    }
}

/// A line of a JSON-lines corpus.
#[derive(Debug)]
pub enum CorpusLine {
    Record(ArticleRecord),
    Malformed { line: usize, message: String },
}

/// Reads a JSON-lines corpus; blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> impl Iterator<Item = io::Result<CorpusLine>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e)),
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok(match serde_json::from_str::<ArticleRecord>(&l) {
            Ok(r) => CorpusLine::Record(r),
            Err(e) => CorpusLine::Malformed { line: i + 1, message: e.to_string() },
        })),
    })
}

pub fn write_corpus<'a, W, I>(mut writer: W, records: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a ArticleRecord>,
{
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}
