use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::DEFAULT_RADIUS_TOL;

/// Noise amplitude `lambda`; every run is in units where it equals one.
pub const LAMBDA: f64 = 1.0;
/// Temperature `theta = 2 e0 / 3`; every run is in units where it equals one.
pub const THETA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    /// Euler-Maruyama on the projected Ito equation.
    ItoEm,
    /// Heun predictor-corrector on the Stratonovich equation.
    StratHeun,
    /// Exact Givens rotations driven by the pair generators.
    Rotation,
    /// Kac pair-collision jump process, clock matched to the diffusion.
    KacJump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Renorm {
    None,
    PerStep,
}

/// How the ensemble is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Every one of the `D` components is integrated.
    Full,
    /// Only the tagged components plus the bath radius are integrated; the
    /// bath noise enters through its two rotation-invariant statistics. Same
    /// law as `Full` for the tagged block, O(d) work per step.
    TaggedBlock,
}

/// Which pair generators a rotation step applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationPairs {
    All,
    /// `k` pairs chosen at random each step, angle variance inflated by
    /// `D(D-1)/(2k)`. An approximation for large `D`.
    Subset(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dimension: usize,
    pub dt: f64,
    pub horizon: f64,
    pub ensemble: usize,
    pub seed: u64,
    pub integrator: IntegratorKind,
    pub renorm: Renorm,
    pub radius_tol: f64,
    pub tagged: Vec<usize>,
    pub engine: Engine,
    pub rotation_pairs: RotationPairs,
    /// Collision-angle scale for `kac-jump`.
    pub kac_epsilon: f64,
    /// Number of recording intervals on `[0, T]`; zero records every step.
    pub checkpoints: usize,
    /// Keep per-step martingale increments in single-path trajectories.
    pub store_martingale: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dimension: 100,
            dt: 1e-3,
            horizon: 1.0,
            ensemble: 1000,
            seed: 0,
            integrator: IntegratorKind::ItoEm,
            renorm: Renorm::PerStep,
            radius_tol: DEFAULT_RADIUS_TOL,
            tagged: vec![0],
            engine: Engine::Full,
            rotation_pairs: RotationPairs::All,
            kac_epsilon: 0.1,
            checkpoints: 10,
            store_martingale: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::InvalidDimension {
                dim: self.dimension,
                min: 2,
            });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!(
                "horizon must be non-negative, got {}",
                self.horizon
            )));
        }
        if self.ensemble == 0 {
            return Err(Error::config("ensemble must be at least 1"));
        }
        if !(self.radius_tol > 0.0) {
            return Err(Error::config("radius_tol must be positive"));
        }
        for (n, &i) in self.tagged.iter().enumerate() {
            if i >= self.dimension {
                return Err(Error::config(format!(
                    "tagged index {i} out of range for dimension {}",
                    self.dimension
                )));
            }
            if self.tagged[..n].contains(&i) {
                return Err(Error::config(format!("tagged index {i} repeated")));
            }
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::config(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.dt
            )));
        }
        if self.checkpoints > 0 && self.steps() % self.checkpoints != 0 {
            return Err(Error::config(format!(
                "{} steps cannot be split into {} checkpoints",
                self.steps(),
                self.checkpoints
            )));
        }
        if self.engine == Engine::TaggedBlock
            && !matches!(self.integrator, IntegratorKind::ItoEm | IntegratorKind::StratHeun)
        {
            return Err(Error::config(
                "the tagged-block engine supports ito-em and strat-heun only",
            ));
        }
        if let RotationPairs::Subset(k) = self.rotation_pairs {
            if k == 0 {
                return Err(Error::config("rotation pair subset must be non-empty"));
            }
        }
        if self.integrator == IntegratorKind::KacJump && !(self.kac_epsilon > 0.0 && self.kac_epsilon <= 1.0) {
            return Err(Error::config("kac_epsilon must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Steps between two recorded grid points.
    pub fn record_stride(&self) -> usize {
        if self.checkpoints == 0 || self.steps() == 0 {
            1
        } else {
            self.steps() / self.checkpoints
        }
    }

    /// Recorded times, starting at zero.
    pub fn record_times(&self) -> Vec<f64> {
        let stride = self.record_stride();
        (0..=self.steps())
            .step_by(stride)
            .map(|k| k as f64 * self.dt)
            .collect()
    }
}
