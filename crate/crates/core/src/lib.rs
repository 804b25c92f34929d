//! Random-projection semantic index over bibliographic records, with
//! specificity-filtered context networks for free-text queries.
//!
//! ```no_run
//! use ctxscope_core::{build_index, fixtures, relate, RelateOptions, Stopwords, BuildOptions};
//!
//! let corpus = fixtures::tiny_corpus();
//! let opts = BuildOptions { dims: 16, ..Default::default() };
//! let (index, _report) = build_index(&corpus, &opts).unwrap();
//! let net = relate(&index, "svm", &Stopwords::english(), &RelateOptions::default()).unwrap();
//! println!("{}", net.to_json());
//! ```

pub mod build;
pub mod entity;
pub mod error;
pub mod fixtures;
pub mod index;
pub mod ingest;
pub mod layout;
pub mod network;
pub mod par;
pub mod projector;
pub mod query;
pub mod storage;

pub use build::{build_index, build_index_file, BuildOptions, BuildReport, CorpusSource, JsonlFile, KindCounts};
pub use entity::{EntityId, EntityKind, KindSet};
pub use error::{Error, Result};
pub use index::{Background, BackgroundStats, SemanticIndex};
pub use ingest::{ArticleRecord, Stopwords};
pub use network::{ContextNetwork, Edge, NetworkMeta, Node, QueryEcho};
pub use par::Execution;
pub use projector::{ProjectionBuilder, ProjectorConfig};
pub use query::{relate, ParsedQuery, RelateOptions, ScoredEntity};
