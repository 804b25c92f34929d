//! Random projection of entity context vectors onto `d` dimensions.
//!
//! The projection matrix has one row of `d` signs in {-1, +1} per vocabulary
//! term. It is never stored: row `t` is regenerated on demand from a
//! counter-based generator keyed on `(seed, t)`. Entity vectors are integer
//! accumulators updated event by event, so the full entity-by-term count
//! matrix never exists in memory.

use std::collections::HashMap;

use crate::entity::EntityId;
use crate::error::{Error, Result};
use crate::ingest::OccurrenceEvent;
use crate::par::{self, Execution};

pub const DEFAULT_DIMS: usize = 600;

/// Seed, reduced dimension and vocabulary size; fully determines the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProjectorConfig {
    pub seed: u64,
    pub dims: usize,
    pub vocab_size: u64,
}

impl ProjectorConfig {
    pub fn new(seed: u64, dims: usize, vocab_size: u64) -> Result<Self> {
        let config = ProjectorConfig { seed, dims, vocab_size };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::InvalidConfig("dims must be at least 1".into()));
        }
        if self.dims as u64 >= self.vocab_size {
            return Err(Error::InvalidConfig(format!(
                "dims ({}) must be smaller than the vocabulary size ({})",
                self.dims, self.vocab_size
            )));
        }
        Ok(())
    }

    fn check_term(&self, term: u32) -> Result<()> {
        if u64::from(term) >= self.vocab_size {
            return Err(Error::IndexOutOfRange { index: term as usize, len: self.vocab_size as usize });
        }
        Ok(())
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64 sign bits for columns `64 * block .. 64 * block + 64` of row `term`.
/// Bit set means +1.
#[inline]
fn sign_block(seed: u64, term: u32, block: u64) -> u64 {
    let key = splitmix64(seed ^ splitmix64(u64::from(term)));
    splitmix64(key ^ splitmix64(block.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Row `term` of the projection matrix.
pub fn projection_row(config: &ProjectorConfig, term: u32) -> Result<Vec<i8>> {
    config.check_term(term)?;
    let mut row = Vec::with_capacity(config.dims);
    for (block, chunk_len) in blocks(config.dims) {
        let bits = sign_block(config.seed, term, block);
        row.extend((0..chunk_len).map(|k| if bits >> k & 1 == 1 { 1i8 } else { -1i8 }));
    }
    Ok(row)
}

fn blocks(dims: usize) -> impl Iterator<Item = (u64, usize)> {
    (0..dims.div_ceil(64)).map(move |b| (b as u64, (dims - b * 64).min(64)))
}

/// `acc += count * R[term]`, without bounds checks on `term`.
#[inline]
fn add_scaled_row(acc: &mut [i64], seed: u64, term: u32, count: u32) {
    let c = i64::from(count);
    for ((block, _), chunk) in blocks(acc.len()).zip(acc.chunks_mut(64)) {
        let bits = sign_block(seed, term, block);
        for (k, v) in chunk.iter_mut().enumerate() {
            let sign = ((bits >> k & 1) as i64) * 2 - 1;
            *v += sign * c;
        }
    }
}

/// One entity's integer accumulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectedRow {
    pub entity: EntityId,
    pub vector: Vec<i64>,
}

impl ProjectedRow {
    pub fn zeros(entity: EntityId, dims: usize) -> Self {
        ProjectedRow { entity, vector: vec![0; dims] }
    }
}

/// Adds one event's co-occurrence counts to `row`.
pub fn accumulate(row: &mut ProjectedRow, event: &OccurrenceEvent, config: &ProjectorConfig) -> Result<()> {
    if row.entity != event.entity {
        return Err(Error::InvalidConfig(format!(
            "event for {} applied to row of {}",
            event.entity, row.entity
        )));
    }
    if row.vector.len() != config.dims {
        return Err(Error::InvalidConfig(format!(
            "row has {} dims, projector has {}",
            row.vector.len(),
            config.dims
        )));
    }
    for &(t, _) in &event.cooccurring_terms {
        config.check_term(t)?;
    }
    for &(t, c) in &event.cooccurring_terms {
        add_scaled_row(&mut row.vector, config.seed, t, c);
    }
    Ok(())
}

/// Accumulates an event stream into one row per entity.
///
/// Entities get table positions in order of first appearance. Within a batch
/// every row has exactly one owner, so parallel and sequential accumulation
/// give identical integers.
#[derive(Debug, Clone)]
pub struct ProjectionBuilder {
    config: ProjectorConfig,
    exec: Execution,
    entities: Vec<EntityId>,
    lookup: HashMap<EntityId, usize>,
    rows: Vec<i64>,
}

impl ProjectionBuilder {
    pub fn new(config: ProjectorConfig) -> Result<Self> {
        Self::with_execution(config, Execution::default())
    }

    pub fn with_execution(config: ProjectorConfig, exec: Execution) -> Result<Self> {
        config.validate()?;
        Ok(ProjectionBuilder {
            config,
            exec,
            entities: Vec::new(),
            lookup: HashMap::new(),
            rows: Vec::new(),
        })
    }

    pub fn config(&self) -> &ProjectorConfig {
        &self.config
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    fn slot(&mut self, entity: &EntityId) -> usize {
        if let Some(&i) = self.lookup.get(entity) {
            return i;
        }
        let i = self.entities.len();
        self.entities.push(entity.clone());
        self.lookup.insert(entity.clone(), i);
        self.rows.resize(self.rows.len() + self.config.dims, 0);
        i
    }

    /// Applies a batch of events. Fails without modifying any row if a term
    /// column is out of range.
    pub fn push_batch(&mut self, events: &[OccurrenceEvent]) -> Result<()> {
        for e in events {
            for &(t, _) in &e.cooccurring_terms {
                self.config.check_term(t)?;
            }
        }
        let mut groups: HashMap<usize, Vec<&[(u32, u32)]>> = HashMap::new();
        for e in events {
            let slot = self.slot(&e.entity);
            if !e.cooccurring_terms.is_empty() {
                groups.entry(slot).or_default().push(&e.cooccurring_terms);
            }
        }
        let mut groups: Vec<(usize, Vec<&[(u32, u32)]>)> = groups.into_iter().collect();
        groups.sort_unstable_by_key(|g| g.0);

        let dims = self.config.dims;
        let seed = self.config.seed;
        let mut work = Vec::with_capacity(groups.len());
        let mut rest: &mut [i64] = &mut self.rows;
        let mut consumed = 0;
        for (slot, profiles) in groups {
            let (_, tail) = rest.split_at_mut((slot - consumed) * dims);
            let (row, tail) = tail.split_at_mut(dims);
            rest = tail;
            consumed = slot + 1;
            work.push((row, profiles));
        }
        par::for_each_owned(self.exec, work, |(row, profiles)| {
            for profile in profiles {
                for &(t, c) in profile {
                    add_scaled_row(row, seed, t, c);
                }
            }
        });
        Ok(())
    }

    pub fn push(&mut self, event: &OccurrenceEvent) -> Result<()> {
        self.push_batch(std::slice::from_ref(event))
    }

    pub fn entities(&self) -> &[EntityId] {
        &self.entities
    }

    /// Integer accumulator of the entity at table position `slot`.
    pub fn row(&self, slot: usize) -> &[i64] {
        &self.rows[slot * self.config.dims..(slot + 1) * self.config.dims]
    }

    pub fn get(&self, entity: &EntityId) -> Option<&[i64]> {
        self.lookup.get(entity).map(|&i| self.row(i))
    }

    pub fn finalize(self) -> FinalizedMatrix {
        finalize(self.config, self.entities, &self.rows, self.exec)
    }
}

/// Floating-point semantic matrix with per-row norms.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalizedMatrix {
    pub config: ProjectorConfig,
    pub entities: Vec<EntityId>,
    /// Row-major `entities.len() x dims`.
    pub matrix: Vec<f32>,
    pub norms: Vec<f32>,
    /// False for all-zero rows, which never take part in search.
    pub active: Vec<bool>,
}

/// Converts integer accumulators to `f32` rows and computes their norms.
pub fn finalize(config: ProjectorConfig, entities: Vec<EntityId>, rows: &[i64], exec: Execution) -> FinalizedMatrix {
    let dims = config.dims;
    assert_eq!(rows.len(), entities.len() * dims, "row buffer does not match entity table");
    let mut matrix = vec![0f32; rows.len()];
    par::for_each_chunk_mut(exec, &mut matrix, dims.max(1) * 1024, |ci, chunk| {
        let start = ci * dims * 1024;
        for (dst, &src) in chunk.iter_mut().zip(&rows[start..]) {
            *dst = src as f32;
        }
    });
    let norms: Vec<f32> = par::map_range(exec, entities.len(), |i| {
        let sq: u128 = rows[i * dims..(i + 1) * dims]
            .iter()
            .map(|&v| (v.unsigned_abs() as u128) * (v.unsigned_abs() as u128))
            .sum();
        (sq as f64).sqrt() as f32
    });
    let active = norms.iter().map(|&n| n > 0.0).collect();
    FinalizedMatrix { config, entities, matrix, norms, active }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64, dims: usize, vocab: u64) -> ProjectorConfig {
        ProjectorConfig::new(seed, dims, vocab).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ProjectorConfig::new(1, 0, 10).is_err());
        assert!(ProjectorConfig::new(1, 10, 10).is_err());
        assert!(ProjectorConfig::new(1, 9, 10).is_ok());
    }

    #[test]
    fn rows_are_signs_with_norm_d() {
        for dims in [1, 63, 64, 65, 600] {
            let c = cfg(7, dims, 10_000);
            for t in [0, 1, 9_999] {
                let r = projection_row(&c, t).unwrap();
                assert_eq!(r.len(), dims);
                assert!(r.iter().all(|&v| v == 1 || v == -1));
                let sq: i64 = r.iter().map(|&v| i64::from(v) * i64::from(v)).sum();
                assert_eq!(sq, dims as i64);
            }
        }
    }

    #[test]
    fn rows_are_deterministic_and_keyed() {
        let c = cfg(1, 128, 100_000);
        assert_eq!(projection_row(&c, 5).unwrap(), projection_row(&c, 5).unwrap());
        for t in 0..1000u32 {
            assert_ne!(projection_row(&c, t).unwrap(), projection_row(&c, t + 1).unwrap());
        }
        let other = cfg(2, 128, 100_000);
        assert_ne!(projection_row(&c, 0).unwrap(), projection_row(&other, 0).unwrap());
        assert!(matches!(projection_row(&c, 100_000), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn sign_balance() {
        let c = cfg(99, 100, 1_000_000);
        let mut plus = 0usize;
        for t in 0..1000 {
            plus += projection_row(&c, t * 997).unwrap().iter().filter(|&&v| v == 1).count();
        }
        let frac = plus as f64 / 100_000.0;
        assert!((frac - 0.5).abs() < 0.01, "fraction of +1 = {frac}");
    }

    fn event(entity: &str, terms: &[(u32, u32)]) -> OccurrenceEvent {
        OccurrenceEvent { doc_id: "d".into(), entity: EntityId::term(entity), cooccurring_terms: terms.to_vec() }
    }

    #[test]
    fn accumulate_identity_and_single_term() {
        let c = cfg(3, 16, 100);
        let mut row = ProjectedRow::zeros(EntityId::term("x"), 16);
        accumulate(&mut row, &event("x", &[]), &c).unwrap();
        assert!(row.vector.iter().all(|&v| v == 0));
        accumulate(&mut row, &event("x", &[(4, 1)]), &c).unwrap();
        let r: Vec<i64> = projection_row(&c, 4).unwrap().into_iter().map(i64::from).collect();
        assert_eq!(row.vector, r);
        assert!(accumulate(&mut row, &event("y", &[(4, 1)]), &c).is_err());
        assert!(accumulate(&mut row, &event("x", &[(100, 1)]), &c).is_err());
    }

    #[test]
    fn builder_matches_single_row_accumulation() {
        let c = cfg(11, 70, 500);
        let events = vec![
            event("a", &[(1, 2), (7, 1)]),
            event("b", &[(3, 5)]),
            event("a", &[(499, 3)]),
            event("c", &[]),
        ];
        for exec in [Execution::Sequential, Execution::Parallel] {
            let mut b = ProjectionBuilder::with_execution(c, exec).unwrap();
            b.push_batch(&events[..2]).unwrap();
            b.push_batch(&events[2..]).unwrap();
            assert_eq!(b.entities(), [EntityId::term("a"), EntityId::term("b"), EntityId::term("c")]);
            let mut a = ProjectedRow::zeros(EntityId::term("a"), 70);
            accumulate(&mut a, &events[0], &c).unwrap();
            accumulate(&mut a, &events[2], &c).unwrap();
            assert_eq!(b.get(&EntityId::term("a")).unwrap(), &a.vector[..]);
            assert!(b.row(2).iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn out_of_range_batch_leaves_builder_untouched() {
        let c = cfg(11, 8, 50);
        let mut b = ProjectionBuilder::new(c).unwrap();
        assert!(b.push_batch(&[event("a", &[(1, 1)]), event("b", &[(50, 1)])]).is_err());
        assert_eq!(b.entity_count(), 0);
    }

    #[test]
    fn finalize_norms_and_activity() {
        let mut rows = vec![0i64; 2 * 4];
        rows[0] = 3;
        rows[1] = 4;
        let c = cfg(0, 4, 10);
        let m = finalize(c, vec![EntityId::term("a"), EntityId::term("z")], &rows, Execution::default());
        assert_eq!(m.norms, [5.0, 0.0]);
        assert_eq!(m.active, [true, false]);
        assert_eq!(&m.matrix[..4], &[3.0, 4.0, 0.0, 0.0]);
    }
}
