use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The four entity types that share one semantic space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Term,
    Author,
    Journal,
    Dewey,
}

impl EntityKind {
    pub const ALL: [EntityKind; 4] = [
        EntityKind::Term,
        EntityKind::Author,
        EntityKind::Journal,
        EntityKind::Dewey,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Term => "term",
            EntityKind::Author => "author",
            EntityKind::Journal => "journal",
            EntityKind::Dewey => "dewey",
        }
    }

    pub(crate) fn to_byte(self) -> u8 {
        match self {
            EntityKind::Term => 0,
            EntityKind::Author => 1,
            EntityKind::Journal => 2,
            EntityKind::Dewey => 3,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0 => EntityKind::Term,
            1 => EntityKind::Author,
            2 => EntityKind::Journal,
            3 => EntityKind::Dewey,
            _ => return None,
        })
    }

    /// Normalizes a raw key the way ingestion stores it for this kind.
    pub fn normalize_key(self, raw: &str) -> String {
        match self {
            EntityKind::Term | EntityKind::Author => collapse_whitespace(raw).to_lowercase(),
            EntityKind::Journal => collapse_whitespace(raw).to_uppercase(),
            EntityKind::Dewey => collapse_whitespace(raw),
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown entity kind {0:?}")]
pub struct UnknownKind(pub String);

impl FromStr for EntityKind {
    type Err = UnknownKind;

    /// Accepts full names, single-letter abbreviations and `issn` as a journal alias.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "term" | "t" => Ok(EntityKind::Term),
            "author" | "a" => Ok(EntityKind::Author),
            "journal" | "issn" | "j" => Ok(EntityKind::Journal),
            "dewey" | "d" => Ok(EntityKind::Dewey),
            _ => Err(UnknownKind(s.to_string())),
        }
    }
}

/// Typed key of one row of the semantic matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId {
    pub kind: EntityKind,
    pub key: String,
}

impl EntityId {
    pub fn new(kind: EntityKind, key: impl Into<String>) -> Self {
        EntityId { kind, key: key.into() }
    }

    pub fn term(key: impl Into<String>) -> Self {
        Self::new(EntityKind::Term, key)
    }

    pub fn author(key: impl Into<String>) -> Self {
        Self::new(EntityKind::Author, key)
    }

    pub fn journal(key: impl Into<String>) -> Self {
        Self::new(EntityKind::Journal, key)
    }

    pub fn dewey(key: impl Into<String>) -> Self {
        Self::new(EntityKind::Dewey, key)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.key)
    }
}

/// A set of entity kinds, used to restrict results to some types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct KindSet(u8);

impl KindSet {
    pub fn all() -> Self {
        KindSet(0b1111)
    }

    pub fn empty() -> Self {
        KindSet(0)
    }

    pub fn only(kind: EntityKind) -> Self {
        KindSet::empty().with(kind)
    }

    pub fn with(self, kind: EntityKind) -> Self {
        KindSet(self.0 | 1 << kind.to_byte())
    }

    pub fn contains(self, kind: EntityKind) -> bool {
        self.0 & (1 << kind.to_byte()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = EntityKind> {
        EntityKind::ALL.into_iter().filter(move |k| self.contains(*k))
    }

    /// Parses a comma-separated list such as `t,a` or `journal,dewey`.
    pub fn parse_list(list: &str) -> Result<Self, UnknownKind> {
        let mut set = KindSet::empty();
        for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            set = set.with(part.parse()?);
        }
        if set.is_empty() {
            return Err(UnknownKind(list.to_string()));
        }
        Ok(set)
    }
}

impl FromIterator<EntityKind> for KindSet {
    fn from_iter<I: IntoIterator<Item = EntityKind>>(iter: I) -> Self {
        iter.into_iter().fold(KindSet::empty(), KindSet::with)
    }
}

pub(crate) fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
