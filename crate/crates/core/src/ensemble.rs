//! Deterministic trajectory-parallel ensembles.
//!
//! Trajectories are grouped into fixed-size chunks independent of the worker
//! count; chunk results are collected in chunk order and merged sequentially,
//! so the output does not depend on how many threads ran.

use std::ops::Range;

use rayon::prelude::*;

use crate::config::{Engine, IntegratorKind, SimConfig};
use crate::error::{Error, Result};
use crate::noise::{Channel, NoiseStream};
use crate::sphere::{BlockStepper, FullStepper, SphereGeometry, TaggedBlock};
use crate::state::{make_initial_state_with, BathLaw, UniformBath};
use crate::stats::EnsembleSummary;

/// Trajectories per chunk.
pub const CHUNK: usize = 64;

/// Runs `f` on consecutive trajectory ranges covering `0..m`, on `workers`
/// threads, and returns the chunk results in order.
pub fn map_chunks<T, F>(m: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<usize>) -> Result<T> + Sync,
{
    let chunks: Vec<Range<usize>> = (0..m)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(m))
        .collect();
    if workers <= 1 {
        return chunks.into_iter().map(&f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| chunks.into_par_iter().map(&f).collect())
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

enum Inner {
    Full {
        stepper: Box<FullStepper>,
        v: Vec<f64>,
    },
    Block {
        stepper: BlockStepper,
        block: TaggedBlock,
    },
}

/// One path seen through its tagged components.
///
/// Both engines draw the tagged Brownian increments from the channels
/// `Brownian(i)` of the tagged indices, so a coupled process that reuses
/// [`TaggedPath::increments`] sees the same noise either way.
pub struct TaggedPath {
    inner: Inner,
    tagged_idx: Vec<usize>,
    tagged: Vec<f64>,
    increments: Vec<f64>,
    noise: NoiseStream,
    dt: f64,
    step: u64,
}

impl TaggedPath {
    /// Starts a path with the first `c.len()` components fixed to `c` and
    /// the rest drawn from `bath`.
    pub fn new(config: &SimConfig, c: &[f64], noise: NoiseStream, bath: &dyn BathLaw) -> Result<Self> {
        let v = make_initial_state_with(c, config.dimension, &noise, bath)?.into_vec();
        TaggedPath::from_state(config, SphereGeometry::standard(config.dimension), v, noise)
    }

    /// Starts a path at `v` on a sphere of arbitrary radius. The engine,
    /// stepper, tagged set and `dt` come from `config`.
    pub fn from_state(config: &SimConfig, geom: SphereGeometry, v: Vec<f64>, noise: NoiseStream) -> Result<Self> {
        if v.len() != geom.dim {
            return Err(Error::contract("initial state dimension differs from geometry"));
        }
        let d = config.tagged.len();
        let tagged: Vec<f64> = config.tagged.iter().map(|&i| v[i]).collect();
        let inner = match config.engine {
            Engine::Full => {
                if config.integrator == IntegratorKind::KacJump {
                    return Err(Error::config("jump paths are not stepped on a time grid"));
                }
                Inner::Full {
                    stepper: Box::new(FullStepper::new(
                        geom,
                        config.integrator,
                        config.renorm,
                        config.rotation_pairs,
                    )),
                    v,
                }
            }
            Engine::TaggedBlock => {
                if config.tagged.iter().enumerate().any(|(n, &i)| n != i) {
                    return Err(Error::config(
                        "the tagged-block engine needs tagged = [0, 1, ..., d-1]",
                    ));
                }
                let bath_norm_sq = v[d..].iter().map(|x| x * x).sum();
                Inner::Block {
                    stepper: BlockStepper::new(geom, d, config.integrator, config.renorm),
                    block: TaggedBlock {
                        tagged: tagged.clone(),
                        bath_norm_sq,
                    },
                }
            }
        };
        Ok(TaggedPath {
            inner,
            tagged_idx: config.tagged.clone(),
            tagged,
            increments: vec![0.0; d],
            noise,
            dt: config.dt,
            step: 0,
        })
    }

    pub fn tagged(&self) -> &[f64] {
        &self.tagged
    }

    /// Tagged Brownian increments of the last step (zero for rotation paths).
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Squared norm of the full state.
    pub fn norm_sq(&self) -> f64 {
        match &self.inner {
            Inner::Full { v, .. } => v.iter().map(|x| x * x).sum(),
            Inner::Block { block, .. } => {
                block.tagged.iter().map(|x| x * x).sum::<f64>() + block.bath_norm_sq
            }
        }
    }

    pub fn advance(&mut self) {
        let sn = self.noise.at_step(self.step);
        match &mut self.inner {
            Inner::Full { stepper, v } => {
                stepper.step(v, &sn, self.dt, None);
                let rotation = stepper.last_increments().len() != v.len();
                for (n, &i) in self.tagged_idx.iter().enumerate() {
                    self.tagged[n] = v[i];
                    self.increments[n] = if rotation { 0.0 } else { stepper.last_increments()[i] };
                }
            }
            Inner::Block { stepper, block } => {
                sn.brownian_block(self.dt, &mut self.increments);
                stepper.step(block, &self.increments, &sn, self.dt);
                self.tagged.copy_from_slice(&block.tagged);
            }
        }
        self.step += 1;
    }
}

/// Ensemble of tagged paths: checkpoint summary plus every trajectory's
/// terminal tagged values.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedEnsemble {
    pub summary: EnsembleSummary,
    /// `terminal[m]`: tagged values of trajectory `m` at `T`.
    pub terminal: Vec<Vec<f64>>,
}

impl TaggedEnsemble {
    /// Channel layout: `v{k}` and `v{k}_sq` for each tagged index, then
    /// pairs `(v{a}, v{b})` for every tagged pair.
    pub fn layout(tagged: &[usize]) -> (Vec<String>, Vec<(usize, usize)>) {
        let d = tagged.len();
        let mut names: Vec<String> = tagged.iter().map(|i| format!("v{i}")).collect();
        names.extend(tagged.iter().map(|i| format!("v{i}_sq")));
        let mut pairs = Vec::new();
        for a in 0..d {
            for b in a + 1..d {
                pairs.push((a, b));
            }
        }
        (names, pairs)
    }
}

pub fn run_tagged_ensemble(config: &SimConfig, c: &[f64], workers: usize) -> Result<TaggedEnsemble> {
    run_tagged_ensemble_with(config, c, workers, &UniformBath)
}

pub fn run_tagged_ensemble_with(
    config: &SimConfig,
    c: &[f64],
    workers: usize,
    bath: &dyn BathLaw,
) -> Result<TaggedEnsemble> {
    config.validate()?;
    let times = config.record_times();
    let stride = config.record_stride();
    let steps = config.steps();
    let d = config.tagged.len();
    let (names, pairs) = TaggedEnsemble::layout(&config.tagged);
    let base = NoiseStream::new(config.seed, 0);
    let parts = map_chunks(config.ensemble, workers, |range| {
        let mut summary = EnsembleSummary::new(times.clone(), names.clone(), pairs.clone());
        let mut terminal = Vec::with_capacity(range.len());
        let mut row = vec![0.0; 2 * d];
        for m in range {
            let mut path = TaggedPath::new(config, c, base.for_trajectory(m as u64), bath)?;
            let mut record = |k: usize, path: &TaggedPath, summary: &mut EnsembleSummary| {
                for (n, &x) in path.tagged().iter().enumerate() {
                    row[n] = x;
                    row[d + n] = x * x;
                }
                summary.record(k, &row);
            };
            record(0, &path, &mut summary);
            for s in 1..=steps {
                path.advance();
                if s % stride == 0 {
                    record(s / stride, &path, &mut summary);
                }
            }
            terminal.push(path.tagged().to_vec());
        }
        Ok((summary, terminal))
    })?;
    let mut iter = parts.into_iter();
    let (mut summary, mut terminal) = iter
        .next()
        .unwrap_or_else(|| (EnsembleSummary::new(times.clone(), names.clone(), pairs.clone()), Vec::new()));
    for (s, t) in iter {
        summary.merge(&s)?;
        terminal.extend(t);
    }
    Ok(TaggedEnsemble { summary, terminal })
}

/// Independent draws of the tagged components of the initial state, used
/// as a reference sample at `t = 0`.
pub fn initial_tagged_samples(config: &SimConfig, c: &[f64]) -> Result<Vec<Vec<f64>>> {
    let base = NoiseStream::new(config.seed, 0);
    (0..config.ensemble)
        .map(|m| {
            let v = make_initial_state_with(c, config.dimension, &base.for_trajectory(m as u64), &UniformBath)?;
            Ok(config.tagged.iter().map(|&i| v[i]).collect())
        })
        .collect()
}

/// Gaussian increments on an auxiliary channel, independent of every
/// channel a sphere path consumes.
pub fn independent_increment(noise: &NoiseStream, index: usize, step: u64, dt: f64) -> f64 {
    noise.increment(Channel::Independent(index), step, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    fn cfg(engine: Engine) -> SimConfig {
        SimConfig {
            dimension: 20,
            dt: 0.01,
            horizon: 0.5,
            ensemble: 150,
            seed: 4,
            tagged: vec![0, 1],
            engine,
            checkpoints: 5,
            ..SimConfig::default()
        }
    }

    #[test]
    fn output_is_independent_of_worker_count() {
        let c = cfg(Engine::Full);
        let a = run_tagged_ensemble(&c, &[1.0, 0.5], 1).unwrap();
        let b = run_tagged_ensemble(&c, &[1.0, 0.5], 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chunk_ranges_cover_ensemble() {
        let parts = map_chunks(150, 2, |r| Ok(r)).unwrap();
        assert_eq!(parts.first().unwrap().start, 0);
        assert_eq!(parts.last().unwrap().end, 150);
        for w in parts.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
    }

    #[test]
    fn block_and_full_engines_agree_in_law() {
        let mut full = cfg(Engine::Full);
        full.ensemble = 3000;
        let mut block = full.clone();
        block.engine = Engine::TaggedBlock;
        block.seed = 5;
        let c = [1.0, 0.5];
        let a = run_tagged_ensemble(&full, &c, 1).unwrap();
        let b = run_tagged_ensemble(&block, &c, 1).unwrap();
        for n in 0..2 {
            let xa: Vec<f64> = a.terminal.iter().map(|t| t[n]).collect();
            let xb: Vec<f64> = b.terminal.iter().map(|t| t[n]).collect();
            let r = crate::stats::ks_two_sample(&xa, &xb).unwrap();
            assert!(r.p_value > 0.001, "component {n}: {r:?}");
        }
    }

    #[test]
    fn block_engine_requires_leading_tags() {
        let mut c = cfg(Engine::TaggedBlock);
        c.tagged = vec![1];
        assert!(run_tagged_ensemble(&c, &[1.0], 1).is_err());
    }

    #[test]
    fn tagged_path_keeps_radius_under_renormalization() {
        for engine in [Engine::Full, Engine::TaggedBlock] {
            let c = cfg(engine);
            let mut p = TaggedPath::new(&c, &[1.0, 0.5], NoiseStream::new(1, 0), &UniformBath).unwrap();
            for _ in 0..50 {
                p.advance();
            }
            assert!((p.norm_sq() - 20.0).abs() < 1e-9);
        }
    }
}
