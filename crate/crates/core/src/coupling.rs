//! Reference Ornstein-Uhlenbeck processes driven by the tagged channels of a
//! sphere path, and the mean-square distance between the two.

use serde::{Deserialize, Serialize};

use crate::config::{IntegratorKind, SimConfig};
use crate::ensemble::{independent_increment, map_chunks, TaggedPath};
use crate::error::{Error, Result};
use crate::noise::NoiseStream;
use crate::state::UniformBath;
use crate::stats::{EnsembleSummary, Moments};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OUParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for OUParams {
    fn default() -> Self {
        OUParams { alpha: 1.0, beta: 0.5 }
    }
}

impl OUParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.alpha.is_finite() {
            return Err(Error::config(format!(
                "OU parameters need beta > 0, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn stationary_variance(&self) -> f64 {
        self.alpha * self.alpha / (2.0 * self.beta)
    }
}

/// Euler-Maruyama step `x + alpha dW - beta x dt`, componentwise.
pub fn step_ou(x: &[f64], dw: &[f64], dt: f64, params: OUParams) -> Result<Vec<f64>> {
    if x.len() != dw.len() {
        return Err(Error::contract(format!(
            "{} increments for {} OU components",
            dw.len(),
            x.len()
        )));
    }
    Ok(x.iter()
        .zip(dw)
        .map(|(&x, &w)| step_ou_scalar(x, w, dt, params))
        .collect())
}

#[inline]
pub fn step_ou_scalar(x: f64, dw: f64, dt: f64, params: OUParams) -> f64 {
    x + params.alpha * dw - params.beta * x * dt
}

/// `[3 v0 + 3/(2D) (1 + T/(2D)) (2 c^2 T + T^2)] exp(3 T t / 2)`.
pub fn gronwall_bound(v0_ms: f64, c1_sq: f64, dim: usize, horizon: f64, t: f64) -> Result<f64> {
    if t > horizon || t < 0.0 {
        return Err(Error::Domain(format!("t = {t} outside [0, {horizon}]")));
    }
    let d = dim as f64;
    let big_t = horizon;
    let pre = 3.0 * v0_ms
        + 3.0 / (2.0 * d) * (1.0 + big_t / (2.0 * d)) * (2.0 * c1_sq * big_t + big_t * big_t);
    Ok(pre * (1.5 * big_t * t).exp())
}

/// `D + (c^2 - D) exp(-t/D)`, the solution of `dE = (1 - E/D) dt`.
pub fn theory_ev1sq(c1_sq: f64, dim: usize, t: f64) -> f64 {
    let d = dim as f64;
    d + (c1_sq - d) * (-t / d).exp()
}

/// `1 + (c^2 - 1) exp(-t)`, the exact second moment of a tagged component
/// under `dV = sigma(V) dB - (D-1)/(2D) V dt`, whose generator maps `V_1^2`
/// to `1 - V_1^2`.
pub fn exact_ev1sq(c1_sq: f64, t: f64) -> f64 {
    1.0 + (c1_sq - 1.0) * (-t).exp()
}

/// `c^2 t + t^2 / 2`.
pub fn integrated_moment_bound(c1_sq: f64, t: f64) -> f64 {
    c1_sq * t + 0.5 * t * t
}

/// Which noise drives the reference process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Driver {
    /// The tagged channels' own increments.
    #[default]
    Shared,
    /// Fresh increments on auxiliary channels (negative control).
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub times: Vec<f64>,
    /// `E|V_tagged - V'|^2`.
    pub msd: Vec<f64>,
    pub msd_se: Vec<f64>,
    pub bound: Vec<f64>,
    pub dimension: usize,
    pub tagged: usize,
    pub initial: Vec<f64>,
    pub horizon: f64,
    /// `E|V_tagged|^2` on the grid.
    pub second_moment: Vec<f64>,
    pub second_moment_se: Vec<f64>,
    /// `E int_0^t |V_tagged|^2 ds`, integrated per path at step resolution.
    pub integrated_moment: Vec<f64>,
    pub integrated_moment_se: Vec<f64>,
    pub driver: Driver,
}

impl CouplingReport {
    pub fn sup_msd(&self) -> f64 {
        self.msd.iter().copied().fold(0.0, f64::max)
    }

    /// Grid points where `msd > bound + 3 se`.
    pub fn bound_violations(&self) -> Vec<usize> {
        (0..self.times.len())
            .filter(|&k| self.msd[k] > self.bound[k] + 3.0 * self.msd_se[k])
            .collect()
    }

    /// Grid points where the integrated moment exceeds `c^2 t + t^2/2` by
    /// more than 3 SE.
    pub fn integrated_violations(&self) -> Vec<usize> {
        let c_sq: f64 = self.initial.iter().map(|x| x * x).sum();
        (0..self.times.len())
            .filter(|&k| {
                self.integrated_moment[k]
                    > integrated_moment_bound(c_sq, self.times[k]) + 3.0 * self.integrated_moment_se[k]
            })
            .collect()
    }
}

fn check_coupled(config: &SimConfig, c: &[f64], params: OUParams) -> Result<()> {
    config.validate()?;
    params.validate()?;
    if !matches!(config.integrator, IntegratorKind::ItoEm | IntegratorKind::StratHeun) {
        return Err(Error::config(
            "coupling needs a Brownian-driven stepper (ito-em or strat-heun)",
        ));
    }
    if config.tagged.len() != c.len() || config.tagged.iter().enumerate().any(|(n, &i)| n != i) {
        return Err(Error::config(format!(
            "coupling tags the first {} components: set tagged = [0, ..., {}]",
            c.len(),
            c.len().saturating_sub(1)
        )));
    }
    Ok(())
}

/// Couples the tagged block `(V_0, ..., V_{d-1})` to `d` independent OU
/// processes started at `c` and driven by the same increments.
pub fn run_coupled(config: &SimConfig, c: &[f64], params: OUParams, workers: usize) -> Result<CouplingReport> {
    run_coupled_with(config, c, params, Driver::Shared, workers)
}

const CHANNELS: [&str; 3] = ["msd", "tagged_sq", "int_tagged_sq"];

pub fn run_coupled_with(
    config: &SimConfig,
    c: &[f64],
    params: OUParams,
    driver: Driver,
    workers: usize,
) -> Result<CouplingReport> {
    check_coupled(config, c, params)?;
    let d = c.len();
    let times = config.record_times();
    let stride = config.record_stride();
    let steps = config.steps();
    let dt = config.dt;
    let names: Vec<String> = CHANNELS.iter().map(|s| s.to_string()).collect();
    let base = NoiseStream::new(config.seed, 0);
    let parts = map_chunks(config.ensemble, workers, |range| {
        let mut summary = EnsembleSummary::new(times.clone(), names.clone(), vec![]);
        for m in range {
            let noise = base.for_trajectory(m as u64);
            let mut path = TaggedPath::new(config, c, noise.clone(), &UniformBath)?;
            let mut ou = c.to_vec();
            let mut dw = vec![0.0; d];
            let mut integral = 0.0;
            let mut prev_sq = sq(path.tagged());
            summary.record(0, &[0.0, prev_sq, 0.0]);
            for s in 1..=steps {
                path.advance();
                match driver {
                    Driver::Shared => dw.copy_from_slice(path.increments()),
                    Driver::Independent => {
                        for (i, w) in dw.iter_mut().enumerate() {
                            *w = independent_increment(&noise, i, s as u64 - 1, dt);
                        }
                    }
                }
                for (x, &w) in ou.iter_mut().zip(&dw) {
                    *x = step_ou_scalar(*x, w, dt, params);
                }
                let cur_sq = sq(path.tagged());
                integral += 0.5 * (prev_sq + cur_sq) * dt;
                prev_sq = cur_sq;
                if s % stride == 0 {
                    let msd: f64 = path
                        .tagged()
                        .iter()
                        .zip(&ou)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    summary.record(s / stride, &[msd, cur_sq, integral]);
                }
            }
        }
        Ok(summary)
    })?;
    let summary = merge_all(parts, &times, &names)?;
    report_from_summary(config, c, &summary, driver)
}

fn sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn merge_all(parts: Vec<EnsembleSummary>, times: &[f64], names: &[String]) -> Result<EnsembleSummary> {
    let mut acc = EnsembleSummary::new(times.to_vec(), names.to_vec(), vec![]);
    for p in &parts {
        acc.merge(p)?;
    }
    Ok(acc)
}

fn report_from_summary(
    config: &SimConfig,
    c: &[f64],
    summary: &EnsembleSummary,
    driver: Driver,
) -> Result<CouplingReport> {
    let (msd, msd_se) = summary.series(0);
    let (second_moment, second_moment_se) = summary.series(1);
    let (integrated_moment, integrated_moment_se) = summary.series(2);
    let c_sq = sq(c);
    let bound = summary
        .times
        .iter()
        .map(|&t| gronwall_bound(0.0, c_sq, config.dimension, config.horizon, t.min(config.horizon)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CouplingReport {
        times: summary.times.clone(),
        msd,
        msd_se,
        bound,
        dimension: config.dimension,
        tagged: c.len(),
        initial: c.to_vec(),
        horizon: config.horizon,
        second_moment,
        second_moment_se,
        integrated_moment,
        integrated_moment_se,
        driver,
    })
}

/// Single tagged component with a scalar reference process; produces the
/// same report as [`run_coupled`] with `d = 1`.
pub fn run_coupled_scalar(config: &SimConfig, c1: f64, params: OUParams, workers: usize) -> Result<CouplingReport> {
    check_coupled(config, &[c1], params)?;
    let times = config.record_times();
    let stride = config.record_stride();
    let dt = config.dt;
    let names: Vec<String> = CHANNELS.iter().map(|s| s.to_string()).collect();
    let base = NoiseStream::new(config.seed, 0);
    let parts = map_chunks(config.ensemble, workers, |range| {
        let mut moments = vec![[Moments::default(); 3]; times.len()];
        for m in range {
            let mut path = TaggedPath::new(config, &[c1], base.for_trajectory(m as u64), &UniformBath)?;
            let mut x = c1;
            let mut v = path.tagged()[0];
            let mut integral = 0.0;
            let mut prev_sq = v * v;
            moments[0][0].push(0.0);
            moments[0][1].push(prev_sq);
            moments[0][2].push(0.0);
            for s in 1..=config.steps() {
                path.advance();
                x = step_ou_scalar(x, path.increments()[0], dt, params);
                v = path.tagged()[0];
                let cur_sq = v * v;
                integral += 0.5 * (prev_sq + cur_sq) * dt;
                prev_sq = cur_sq;
                if s % stride == 0 {
                    let k = s / stride;
                    moments[k][0].push((v - x) * (v - x));
                    moments[k][1].push(cur_sq);
                    moments[k][2].push(integral);
                }
            }
        }
        let mut summary = EnsembleSummary::new(times.clone(), names.clone(), vec![]);
        for (row, ms) in summary.moments.iter_mut().zip(moments) {
            row.copy_from_slice(&ms);
        }
        Ok(summary)
    })?;
    let summary = merge_all(parts, &times, &names)?;
    report_from_summary(config, &[c1], &summary, Driver::Shared)
}
