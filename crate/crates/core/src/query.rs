//! On-line query pipeline: parse, average, full-scan retrieval and the
//! specificity filter.

use std::cmp::Ordering;
use std::sync::OnceLock;
use std::time::Instant;

use regex::Regex;

use crate::entity::{EntityId, EntityKind, KindSet};
use crate::error::{Error, Result};
use crate::index::{BackgroundStats, SemanticIndex, SIGMA_FLOOR};
use crate::ingest::{tokenize, Stopwords};
use crate::layout;
use crate::network::{ContextNetwork, NetworkMeta, QueryEcho};
use crate::par::{self, Execution};

/// Size of the candidate pool kept after the full scan.
pub const DEFAULT_CANDIDATES: usize = 500;
/// Number of non-query entities displayed.
pub const DEFAULT_DISPLAY: usize = 20;
pub const DEFAULT_EDGES_PER_NODE: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedQuery {
    pub raw: String,
    pub resolved: Vec<EntityId>,
    pub unresolved: Vec<String>,
    pub type_filter: Option<KindSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredEntity {
    pub entity: EntityId,
    /// Position in the index entity table.
    pub position: usize,
    pub similarity: f64,
    pub specificity: f64,
}

fn tag_pattern() -> &'static Regex {
    static TAG: OnceLock<Regex> = OnceLock::new();
    TAG.get_or_init(|| Regex::new(r"\[\s*([A-Za-z]+)\s*:([^\]]*)\]").expect("valid tag regex"))
}

/// Resolves a raw query against the index.
///
/// `[author:…]`, `[journal:…]`, `[issn:…]`, `[dewey:…]` (and `[term:…]`)
/// name entities directly; remaining text is tokenized like corpus text and
/// matched against term entities. Inactive entities count as unresolved.
pub fn parse_query(raw: &str, index: &SemanticIndex, stopwords: &Stopwords) -> Result<ParsedQuery> {
    let mut resolved: Vec<EntityId> = Vec::new();
    let mut unresolved: Vec<String> = Vec::new();
    let mut resolve = |entity: Option<EntityId>, source: String| match entity {
        Some(e) if index.position(&e).is_some_and(|i| index.is_active(i)) => {
            if !resolved.contains(&e) {
                resolved.push(e);
            }
        }
        _ => {
            if !unresolved.contains(&source) {
                unresolved.push(source);
            }
        }
    };

    let resolve_text = |segment: &str, resolve: &mut dyn FnMut(Option<EntityId>, String)| {
        for token in tokenize(segment, stopwords) {
            resolve(Some(EntityId::term(token.clone())), token);
        }
    };
    let mut last = 0;
    for cap in tag_pattern().captures_iter(raw) {
        let whole = cap.get(0).expect("match");
        resolve_text(&raw[last..whole.start()], &mut resolve);
        last = whole.end();
        let entity = cap[1]
            .parse::<EntityKind>()
            .ok()
            .filter(|_| cap[1].len() > 1)
            .map(|kind| EntityId::new(kind, kind.normalize_key(&cap[2])))
            .filter(|e| !e.key.is_empty());
        resolve(entity, whole.as_str().to_string());
    }
    resolve_text(&raw[last..], &mut resolve);

    if resolved.is_empty() {
        return Err(Error::EmptyQuery { unresolved });
    }
    Ok(ParsedQuery { raw: raw.to_string(), resolved, unresolved, type_filter: None })
}

/// Mean of the resolved entities' unit rows.
pub fn query_vector(parsed: &ParsedQuery, index: &SemanticIndex) -> Result<Vec<f64>> {
    if parsed.resolved.is_empty() {
        return Err(Error::EmptyQuery { unresolved: parsed.unresolved.clone() });
    }
    let mut q = vec![0f64; index.dims()];
    for e in &parsed.resolved {
        let i = index.active_position(e)?;
        q.iter_mut().zip(index.unit_row(i)).for_each(|(a, b)| *a += b);
    }
    let n = parsed.resolved.len() as f64;
    q.iter_mut().for_each(|v| *v /= n);
    Ok(q)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Descending similarity, ties by table position.
fn by_similarity(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
}

pub fn top_candidates(
    index: &SemanticIndex,
    query: &[f64],
    type_filter: Option<KindSet>,
    k_candidates: usize,
) -> Result<Vec<ScoredEntity>> {
    top_candidates_with(index, query, type_filter, k_candidates, Execution::default())
}

/// Exact top-`k_candidates` active entities by cosine to `query`.
pub fn top_candidates_with(
    index: &SemanticIndex,
    query: &[f64],
    type_filter: Option<KindSet>,
    k_candidates: usize,
    exec: Execution,
) -> Result<Vec<ScoredEntity>> {
    let qn = norm(query);
    if !(qn > 1e-12) {
        return Err(Error::NoSignal);
    }
    if query.len() != index.dims() {
        return Err(Error::InvalidConfig(format!(
            "query has {} dims, index has {}",
            query.len(),
            index.dims()
        )));
    }
    const BLOCK: usize = 2048;
    let n = index.len();
    let blocks = par::map_range(exec, n.div_ceil(BLOCK), |b| {
        let end = ((b + 1) * BLOCK).min(n);
        (b * BLOCK..end)
            .filter(|&i| index.is_active(i))
            .filter(|&i| type_filter.is_none_or(|f| f.contains(index.entity(i).kind)))
            .map(|i| (i, index.similarity_to(i, query, qn)))
            .collect::<Vec<_>>()
    });
    let mut scored: Vec<(usize, f64)> = blocks.into_iter().flatten().collect();
    if k_candidates < scored.len() {
        if k_candidates == 0 {
            scored.clear();
        } else {
            scored.select_nth_unstable_by(k_candidates - 1, by_similarity);
            scored.truncate(k_candidates);
        }
    }
    scored.sort_unstable_by(by_similarity);
    Ok(scored
        .into_iter()
        .map(|(i, s)| ScoredEntity { entity: index.entity(i).clone(), position: i, similarity: s, specificity: 0.0 })
        .collect())
}

/// `(s - mu) / max(sigma, SIGMA_FLOOR)`: how far a similarity stands above the
/// entity's usual similarity level.
pub fn specificity(similarity: f64, mu: f32, sigma: f32) -> f64 {
    (similarity - f64::from(mu)) / f64::from(sigma.max(SIGMA_FLOOR))
}

/// Keeps the `k_display` candidates with the largest specificity.
///
/// Hubs, which are similar to almost everything, have a high background mean
/// and therefore a small specificity even at high raw similarity.
pub fn rank_by_specificity(
    candidates: &[ScoredEntity],
    background: &BackgroundStats,
    k_display: usize,
) -> Vec<ScoredEntity> {
    let mut ranked: Vec<ScoredEntity> = candidates
        .iter()
        .map(|c| {
            let bg = background.per_entity[c.position];
            ScoredEntity { specificity: specificity(c.similarity, bg.mu, bg.sigma), ..c.clone() }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.specificity
            .partial_cmp(&a.specificity)
            .unwrap_or(Ordering::Equal)
            .then(b.similarity.partial_cmp(&a.similarity).unwrap_or(Ordering::Equal))
            .then(a.position.cmp(&b.position))
    });
    ranked.truncate(k_display);
    ranked
}

#[derive(Debug, Clone)]
pub struct RelateOptions {
    pub k_display: usize,
    pub k_candidates: usize,
    pub type_filter: Option<KindSet>,
    pub edges_per_node: usize,
    pub exec: Execution,
}

impl Default for RelateOptions {
    fn default() -> Self {
        RelateOptions {
            k_display: DEFAULT_DISPLAY,
            k_candidates: DEFAULT_CANDIDATES,
            type_filter: None,
            edges_per_node: DEFAULT_EDGES_PER_NODE,
            exec: Execution::default(),
        }
    }
}

/// Runs the whole pipeline and lays out the resulting network.
///
/// Query entities are always shown (flagged `is_query`) when their kind
/// passes the type filter; the `k_display` other nodes are the most specific
/// of the remaining candidates.
pub fn relate(index: &SemanticIndex, raw: &str, stopwords: &Stopwords, opts: &RelateOptions) -> Result<ContextNetwork> {
    let started = Instant::now();
    let mut parsed = parse_query(raw, index, stopwords)?;
    parsed.type_filter = opts.type_filter;
    let q = query_vector(&parsed, index)?;
    let query_positions: Vec<usize> = parsed
        .resolved
        .iter()
        .filter_map(|e| index.position(e))
        .collect();
    // The pool holds k_candidates entities besides the query itself.
    let pool = opts.k_candidates + query_positions.len();
    let others: Vec<ScoredEntity> = top_candidates_with(index, &q, opts.type_filter, pool, opts.exec)?
        .into_iter()
        .filter(|c| !query_positions.contains(&c.position))
        .take(opts.k_candidates)
        .collect();
    let ranked = rank_by_specificity(&others, index.background_stats(), opts.k_display);

    let qn = norm(&q);
    let query_nodes: Vec<ScoredEntity> = query_positions
        .iter()
        .filter(|&&i| opts.type_filter.is_none_or(|f| f.contains(index.entity(i).kind)))
        .map(|&i| {
            let s = index.similarity_to(i, &q, qn);
            let bg = index.background(i);
            ScoredEntity {
                entity: index.entity(i).clone(),
                position: i,
                similarity: s,
                specificity: specificity(s, bg.mu, bg.sigma),
            }
        })
        .collect();

    let (nodes, edges) = layout::build_network(&query_nodes, &ranked, index, opts.edges_per_node)?;
    let elapsed_ms = (started.elapsed().as_secs_f64() * 1e6).round() / 1e3;
    Ok(ContextNetwork {
        query: QueryEcho { raw: parsed.raw, resolved: parsed.resolved, unresolved: parsed.unresolved },
        nodes,
        edges,
        meta: NetworkMeta {
            dims: index.dims(),
            k: opts.k_display,
            candidates: opts.k_candidates,
            elapsed_ms,
        },
    })
}
