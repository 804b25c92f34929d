//! The semantic matrix: one row per entity, with norms and background
//! similarity statistics.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use crate::entity::{EntityId, EntityKind};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::projector::{FinalizedMatrix, ProjectorConfig};

/// Lower bound applied to every active entity's background sigma.
pub const SIGMA_FLOOR: f32 = 1e-6;

pub const DEFAULT_BACKGROUND_SAMPLE: usize = 10_000;

/// Mean and standard deviation of an entity's cosine similarity to a
/// reference sample of entities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Background {
    pub mu: f32,
    pub sigma: f32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BackgroundStats {
    pub sample_size: u32,
    pub per_entity: Vec<Background>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticIndex {
    config: ProjectorConfig,
    entities: Vec<EntityId>,
    lookup: HashMap<EntityId, usize>,
    matrix: Vec<f32>,
    norms: Vec<f32>,
    active: Vec<bool>,
    background: BackgroundStats,
}

impl SemanticIndex {
    /// Wraps a finalized projection. Background statistics start zeroed; see
    /// [`compute_background`](Self::compute_background).
    pub fn from_finalized(m: FinalizedMatrix) -> Result<Self> {
        let n = m.entities.len();
        Self::from_parts(
            m.config,
            m.entities,
            m.matrix,
            m.norms,
            m.active,
            BackgroundStats { sample_size: 0, per_entity: vec![Background::default(); n] },
        )
    }

    /// Builds an index directly from floating-point rows; norms and activity
    /// are derived from the rows.
    pub fn from_rows(config: ProjectorConfig, entities: Vec<EntityId>, matrix: Vec<f32>) -> Result<Self> {
        let dims = config.dims;
        if dims == 0 || matrix.len() != entities.len() * dims {
            return Err(Error::InvalidConfig(format!(
                "matrix of {} values does not hold {} rows of {} dims",
                matrix.len(),
                entities.len(),
                dims
            )));
        }
        let norms: Vec<f32> = matrix
            .chunks(dims)
            .map(|r| r.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt() as f32)
            .collect();
        let active = norms.iter().map(|&n| n > 0.0 && n.is_finite()).collect();
        let n = entities.len();
        Self::from_parts(
            config,
            entities,
            matrix,
            norms,
            active,
            BackgroundStats { sample_size: 0, per_entity: vec![Background::default(); n] },
        )
    }

    pub(crate) fn from_parts(
        config: ProjectorConfig,
        entities: Vec<EntityId>,
        matrix: Vec<f32>,
        norms: Vec<f32>,
        active: Vec<bool>,
        background: BackgroundStats,
    ) -> Result<Self> {
        let n = entities.len();
        if matrix.len() != n * config.dims
            || norms.len() != n
            || active.len() != n
            || background.per_entity.len() != n
        {
            return Err(Error::InvalidConfig("index tables have inconsistent lengths".into()));
        }
        let mut lookup = HashMap::with_capacity(n);
        for (i, e) in entities.iter().enumerate() {
            if lookup.insert(e.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate entity {e}")));
            }
        }
        Ok(SemanticIndex { config, entities, lookup, matrix, norms, active, background })
    }

    pub fn config(&self) -> &ProjectorConfig {
        &self.config
    }

    pub fn dims(&self) -> usize {
        self.config.dims
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entities(&self) -> &[EntityId] {
        &self.entities
    }

    pub fn entity(&self, i: usize) -> &EntityId {
        &self.entities[i]
    }

    pub fn position(&self, entity: &EntityId) -> Option<usize> {
        self.lookup.get(entity).copied()
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.matrix[i * self.config.dims..(i + 1) * self.config.dims]
    }

    pub fn norms(&self) -> &[f32] {
        &self.norms
    }

    pub fn norm(&self, i: usize) -> f32 {
        self.norms[i]
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn active_flags(&self) -> &[bool] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn background(&self, i: usize) -> Background {
        self.background.per_entity[i]
    }

    pub fn background_stats(&self) -> &BackgroundStats {
        &self.background
    }

    /// Entity counts indexed like [`EntityKind::ALL`].
    pub fn counts_by_kind(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for e in &self.entities {
            counts[e.kind.to_byte() as usize] += 1;
        }
        counts
    }

    /// Unit-length row in double precision.
    pub fn unit_row(&self, i: usize) -> Vec<f64> {
        let n = f64::from(self.norms[i]);
        self.row(i).iter().map(|&v| f64::from(v) / n).collect()
    }

    /// Cosine similarity between two table positions. Both must be active.
    pub fn cosine_at(&self, a: usize, b: usize) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let dot: f64 = self
            .row(a)
            .iter()
            .zip(self.row(b))
            .map(|(&x, &y)| f64::from(x) * f64::from(y))
            .sum();
        (dot / (f64::from(self.norms[a]) * f64::from(self.norms[b]))).clamp(-1.0, 1.0)
    }

    pub fn cosine(&self, a: &EntityId, b: &EntityId) -> Result<f64> {
        let ia = self.active_position(a)?;
        let ib = self.active_position(b)?;
        Ok(self.cosine_at(ia, ib))
    }

    pub(crate) fn active_position(&self, e: &EntityId) -> Result<usize> {
        let i = self.position(e).ok_or_else(|| Error::UnknownEntity(e.clone()))?;
        if !self.active[i] {
            return Err(Error::InactiveEntity(e.clone()));
        }
        Ok(i)
    }

    /// Cosine between row `i` and a query vector of norm `query_norm`.
    #[inline]
    pub fn similarity_to(&self, i: usize, query: &[f64], query_norm: f64) -> f64 {
        let dot: f64 = self.row(i).iter().zip(query).map(|(&x, &q)| f64::from(x) * q).sum();
        (dot / (f64::from(self.norms[i]) * query_norm)).clamp(-1.0, 1.0)
    }

    /// Seeded sample of active positions, ascending.
    pub fn background_sample(&self, sample_size: usize, seed: u64) -> Result<Vec<usize>> {
        let active: Vec<usize> = (0..self.len()).filter(|&i| self.active[i]).collect();
        if sample_size < 2 || sample_size > active.len() {
            return Err(Error::SampleTooSmall { requested: sample_size, available: active.len() });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, active.len(), sample_size)
            .into_iter()
            .map(|k| active[k])
            .collect();
        picked.sort_unstable();
        Ok(picked)
    }

    pub fn compute_background(&self, sample_size: usize, seed: u64) -> Result<BackgroundStats> {
        self.compute_background_with(sample_size, seed, Execution::default())
    }

    /// Mean and unbiased standard deviation of each active entity's cosine to
    /// a seeded sample of active entities, excluding itself.
    pub fn compute_background_with(&self, sample_size: usize, seed: u64, exec: Execution) -> Result<BackgroundStats> {
        let sample = self.background_sample(sample_size, seed)?;
        let dims = self.dims();
        // Direct dot products cost |S|*d per entity; the Gram route costs d*d.
        let per_entity = if sample.len() > dims * 2 {
            self.background_via_gram(&sample, exec)
        } else {
            self.background_direct(&sample, exec)
        };
        Ok(BackgroundStats { sample_size: sample.len() as u32, per_entity })
    }

    fn sample_units(&self, sample: &[usize]) -> Vec<f64> {
        sample.iter().flat_map(|&s| self.unit_row(s)).collect()
    }

    pub(crate) fn background_direct(&self, sample: &[usize], exec: Execution) -> Vec<Background> {
        let dims = self.dims();
        let units = self.sample_units(sample);
        par::map_range(exec, self.len(), |i| {
            if !self.active[i] {
                return Background::default();
            }
            let u = self.unit_row(i);
            let (mut sum, mut sumsq, mut n) = (0.0f64, 0.0f64, 0usize);
            for (k, &s) in sample.iter().enumerate() {
                if s == i {
                    continue;
                }
                let c: f64 = u.iter().zip(&units[k * dims..(k + 1) * dims]).map(|(a, b)| a * b).sum();
                sum += c;
                sumsq += c * c;
                n += 1;
            }
            summarize(sum, sumsq, n)
        })
    }

    /// Same statistics from the sample's sum vector and Gram matrix:
    /// `sum_s u.s = u . m` and `sum_s (u.s)^2 = u' G u`.
    pub(crate) fn background_via_gram(&self, sample: &[usize], exec: Execution) -> Vec<Background> {
        let dims = self.dims();
        let units = self.sample_units(sample);
        let mut sum_vec = vec![0f64; dims];
        for u in units.chunks(dims) {
            sum_vec.iter_mut().zip(u).for_each(|(m, v)| *m += v);
        }
        let mut gram = vec![0f64; dims * dims];
        par::for_each_chunk_mut(exec, &mut gram, dims, |r, out| {
            for u in units.chunks(dims) {
                let ur = u[r];
                out.iter_mut().zip(u).for_each(|(g, v)| *g += ur * v);
            }
        });
        par::map_range(exec, self.len(), |i| {
            if !self.active[i] {
                return Background::default();
            }
            let u = self.unit_row(i);
            let mut sum: f64 = u.iter().zip(&sum_vec).map(|(a, b)| a * b).sum();
            let mut sumsq = 0.0;
            for (r, &ur) in u.iter().enumerate() {
                let gu: f64 = gram[r * dims..(r + 1) * dims].iter().zip(&u).map(|(g, v)| g * v).sum();
                sumsq += ur * gu;
            }
            let mut n = sample.len();
            if sample.binary_search(&i).is_ok() {
                let own: f64 = u.iter().map(|v| v * v).sum();
                sum -= own;
                sumsq -= own * own;
                n -= 1;
            }
            summarize(sum, sumsq, n)
        })
    }

    pub fn set_background(&mut self, stats: BackgroundStats) -> Result<()> {
        if stats.per_entity.len() != self.len() {
            return Err(Error::InvalidConfig("background table length mismatch".into()));
        }
        self.background = stats;
        Ok(())
    }

    /// Computes and installs background statistics, using every active
    /// entity when fewer than `sample_size` exist.
    pub fn with_background(mut self, sample_size: usize, seed: u64) -> Result<Self> {
        let size = sample_size.min(self.active_count());
        let stats = self.compute_background(size, seed)?;
        self.set_background(stats)?;
        Ok(self)
    }
}

fn summarize(sum: f64, sumsq: f64, n: usize) -> Background {
    if n == 0 {
        return Background { mu: 0.0, sigma: SIGMA_FLOOR };
    }
    let mean = sum / n as f64;
    let sigma = if n < 2 {
        0.0
    } else {
        ((sumsq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0).sqrt()
    };
    Background {
        mu: mean.clamp(-1.0, 1.0) as f32,
        sigma: (sigma.min(1.0) as f32).max(SIGMA_FLOOR),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dims: usize) -> ProjectorConfig {
        ProjectorConfig { seed: 0, dims, vocab_size: 1 << 20 }
    }

    fn ids(n: usize) -> Vec<EntityId> {
        (0..n).map(|i| EntityId::term(format!("e{i}"))).collect()
    }

    #[test]
    fn cosine_basics() {
        let idx = SemanticIndex::from_rows(
            cfg(3),
            ids(3),
            vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let (a, b, z) = (EntityId::term("e0"), EntityId::term("e1"), EntityId::term("e2"));
        assert_eq!(idx.cosine(&a, &b).unwrap(), 0.0);
        assert!((idx.cosine(&b, &b).unwrap() - 1.0).abs() < 1e-6);
        assert!(matches!(idx.cosine(&a, &z), Err(Error::InactiveEntity(_))));
        assert!(matches!(idx.cosine(&a, &EntityId::author("q")), Err(Error::UnknownEntity(_))));
        assert!(!idx.is_active(2));
    }

    #[test]
    fn duplicate_entities_rejected() {
        let e = vec![EntityId::term("a"), EntityId::term("a")];
        assert!(SemanticIndex::from_rows(cfg(1), e, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn orthogonal_rows_have_zero_background_mean() {
        let n = 8;
        let mut m = vec![0f32; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0 + i as f32;
        }
        let idx = SemanticIndex::from_rows(cfg(n), ids(n), m).unwrap();
        let bg = idx.compute_background(n, 3).unwrap();
        assert_eq!(bg.sample_size as usize, n);
        for b in &bg.per_entity {
            assert!(b.mu.abs() < 1e-9);
            assert_eq!(b.sigma, SIGMA_FLOOR);
        }
    }

    #[test]
    fn sample_size_limits() {
        let idx = SemanticIndex::from_rows(cfg(2), ids(3), vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(idx.compute_background(3, 0), Err(Error::SampleTooSmall { available: 2, .. })));
        assert!(matches!(idx.compute_background(1, 0), Err(Error::SampleTooSmall { .. })));
        let bg = idx.compute_background(2, 0).unwrap();
        assert_eq!(bg.per_entity[2], Background::default());
    }

    #[test]
    fn gram_and_direct_routes_agree() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, d) = (300, 12);
        let m: Vec<f32> = (0..n * d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let idx = SemanticIndex::from_rows(cfg(d), ids(n), m).unwrap();
        let sample = idx.background_sample(100, 9).unwrap();
        let a = idx.background_direct(&sample, Execution::Sequential);
        let b = idx.background_via_gram(&sample, Execution::Parallel);
        for (x, y) in a.iter().zip(&b) {
            assert!((x.mu - y.mu).abs() < 1e-6, "{x:?} {y:?}");
            assert!((x.sigma - y.sigma).abs() < 1e-6, "{x:?} {y:?}");
        }
    }
}
