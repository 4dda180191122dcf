//! Kac pair-collision jump process on the sphere.
//!
//! Each unordered pair `(i, j)` carries a Poisson clock of rate
//! `lambda_eps = 1 / eps^2`. When it rings, `(V_i, V_j)` is rotated by an angle
//! drawn from an even law supported on `[-eps pi, eps pi]`. The process is
//! simulated with one aggregate clock of rate `lambda_eps D (D-1) / 2` and a
//! uniformly chosen pair per event; only one pair moves per event.
//!
//! Per pair, the angular variance accumulates at rate `lambda_eps Var(theta)`,
//! which for the uniform law is `pi^2 / 3` whatever `eps`. The rotation
//! representation of the sphere diffusion accumulates `1 / D` per unit time,
//! so one unit of diffusion time equals `1 / (D lambda_eps Var(theta))` units
//! of jump time (`3 / (pi^2 D)` for the uniform law).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::noise::{Channel, NoiseStream};
use crate::sphere::{givens, pair_count, pair_from_index};
use crate::state::StateVector;

/// Collision-angle law `rho_eps`, even and supported on `[-eps pi, eps pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleLaw {
    Uniform,
    /// Symmetric triangle with its peak at zero.
    Triangular,
}

impl AngleLaw {
    /// Inverse CDF at `u` in `[0, 1)` for half-width `a = eps pi`.
    pub fn quantile(self, u: f64, half_width: f64) -> f64 {
        match self {
            AngleLaw::Uniform => (2.0 * u - 1.0) * half_width,
            AngleLaw::Triangular => {
                if u < 0.5 {
                    half_width * ((2.0 * u).sqrt() - 1.0)
                } else {
                    half_width * (1.0 - (2.0 * (1.0 - u)).sqrt())
                }
            }
        }
    }

    pub fn variance(self, half_width: f64) -> f64 {
        match self {
            AngleLaw::Uniform => half_width * half_width / 3.0,
            AngleLaw::Triangular => half_width * half_width / 6.0,
        }
    }
}

/// How jump time is related to reported (diffusion) time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClockConvention {
    /// One unit of reported time has the per-pair angular variance `1/D` of
    /// the rotation-generator diffusion.
    VarianceMatched,
    /// One unit of reported time holds `1 / tau_D = D - 1` expected
    /// collisions.
    KacTau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpConfig {
    pub epsilon: f64,
    pub dim: usize,
    /// Horizon in jump-clock time.
    pub horizon: f64,
    pub angle_law: AngleLaw,
    pub seed: u64,
    pub event_budget: u64,
    pub clock: ClockConvention,
}

impl JumpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::config(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        if self.dim < 2 {
            return Err(Error::InvalidDimension { dim: self.dim, min: 2 });
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("jump horizon must be non-negative"));
        }
        Ok(())
    }

    /// Per-pair clock rate `1 / eps^2`.
    pub fn pair_rate(&self) -> f64 {
        1.0 / (self.epsilon * self.epsilon)
    }

    pub fn total_rate(&self) -> f64 {
        self.pair_rate() * pair_count(self.dim) as f64
    }

    pub fn half_width(&self) -> f64 {
        self.epsilon * PI
    }

    /// Reported time per unit of jump time (`pi^2 D / 3` for the uniform law
    /// under `VarianceMatched`).
    pub fn rescaling_constant(&self) -> f64 {
        match self.clock {
            ClockConvention::VarianceMatched => {
                self.pair_rate() * self.angle_law.variance(self.half_width()) * self.dim as f64
            }
            ClockConvention::KacTau => self.total_rate() / (self.dim as f64 - 1.0),
        }
    }

    /// Jump time per unit of reported time.
    pub fn time_scale(&self) -> f64 {
        1.0 / self.rescaling_constant()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub i: usize,
    pub j: usize,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrajectory {
    pub initial: StateVector,
    pub horizon: f64,
    pub event_times: Vec<f64>,
    pub events: Vec<JumpEvent>,
    /// Number of events of each pair, lexicographic pair order.
    pub pair_counts: Vec<u64>,
    pub final_state: StateVector,
    /// Largest `| |V|^2 - |V(0)|^2 |` seen after any event.
    pub max_energy_drift: f64,
}

impl JumpTrajectory {
    /// Right-continuous state at jump time `t` (events at times `<= t` applied).
    pub fn state_at(&self, t: f64) -> StateVector {
        let mut v = self.initial.clone().into_vec();
        for (e, &te) in self.events.iter().zip(&self.event_times) {
            if te > t {
                break;
            }
            givens(&mut v, e.i, e.j, e.angle);
        }
        StateVector::new(v).expect("rotations keep the dimension")
    }

    /// States at each of the (sorted) jump times `ts`.
    pub fn states_at(&self, ts: &[f64]) -> Vec<StateVector> {
        let mut v = self.initial.clone().into_vec();
        let mut next = 0;
        let mut out = Vec::with_capacity(ts.len());
        for &t in ts {
            while next < self.events.len() && self.event_times[next] <= t {
                let e = self.events[next];
                givens(&mut v, e.i, e.j, e.angle);
                next += 1;
            }
            out.push(StateVector::new(v.clone()).expect("rotations keep the dimension"));
        }
        out
    }
}

/// Rotates `(V_i, V_j)` by `theta`:
/// `(V_i cos + V_j sin, V_j cos - V_i sin)`.
pub fn rotate_pair(v: &StateVector, i: usize, j: usize, theta: f64) -> Result<StateVector> {
    if i == j || i >= v.dim() || j >= v.dim() {
        return Err(Error::InvalidPair { i, j });
    }
    let mut out = v.clone().into_vec();
    givens(&mut out, i, j, theta);
    StateVector::new(out)
}

/// Event-driven simulation up to `config.horizon` (jump time).
pub fn simulate_kac(config: &JumpConfig, initial: &StateVector, noise: &NoiseStream) -> Result<JumpTrajectory> {
    config.validate()?;
    if initial.dim() != config.dim {
        return Err(Error::contract("initial state dimension differs from jump config"));
    }
    let pairs = pair_count(config.dim);
    let rate = config.total_rate();
    let half_width = config.half_width();
    let e0 = initial.norm_sq();

    let mut v = initial.clone().into_vec();
    let mut traj = JumpTrajectory {
        initial: initial.clone(),
        horizon: config.horizon,
        event_times: Vec::new(),
        events: Vec::new(),
        pair_counts: vec![0; pairs],
        final_state: initial.clone(),
        max_energy_drift: 0.0,
    };
    let mut t = 0.0;
    let mut n: u64 = 0;
    loop {
        t += noise.exponential(Channel::JumpClock, n, rate);
        if t >= config.horizon {
            break;
        }
        if n >= config.event_budget {
            traj.final_state = StateVector::new(v)?;
            return Err(Error::BudgetExceeded {
                budget: config.event_budget,
                partial: Box::new(traj),
            });
        }
        let u = noise.uniform(Channel::JumpPair, n);
        let p = ((u * pairs as f64) as usize).min(pairs - 1);
        let (i, j) = pair_from_index(p, config.dim);
        let angle = config.angle_law.quantile(noise.uniform(Channel::JumpAngle, n), half_width);
        givens(&mut v, i, j, angle);
        let drift = (crate::state::norm_sq(&v) - e0).abs();
        traj.max_energy_drift = traj.max_energy_drift.max(drift);
        traj.event_times.push(t);
        traj.events.push(JumpEvent { i, j, angle });
        traj.pair_counts[p] += 1;
        n += 1;
    }
    traj.final_state = StateVector::new(v)?;
    Ok(traj)
}

/// One row of the jump-to-diffusion comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KacLimitRow {
    pub epsilon: f64,
    /// Two-sample KS distance between terminal tagged-component laws.
    pub ks_distance: f64,
    /// Null standard error of that distance.
    pub se: f64,
    pub p_value: f64,
    pub rescaling_constant: f64,
    pub max_energy_drift: f64,
    pub expected_pair_count: f64,
    pub mean_pair_count: f64,
    pub chi2_statistic: f64,
    pub chi2_dof: usize,
    pub chi2_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KacLimitReport {
    pub dim: usize,
    /// Horizon in diffusion time.
    pub horizon: f64,
    pub ensemble: usize,
    pub rows: Vec<KacLimitRow>,
}

impl KacLimitReport {
    /// Whether the KS distance never grows by more than `k` standard errors
    /// from one epsilon to the next (rows ordered by decreasing epsilon).
    pub fn monotone_within(&self, k: f64) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].ks_distance <= w[0].ks_distance + k * w[1].se.max(w[0].se))
    }
}

/// Terminal law of component 0 under the jump process, for each epsilon,
/// against the diffusion run described by `reference` (which fixes `D`, `T`,
/// `M` and the seed). Initial states are `c` plus a uniform bath for both.
pub fn diffusion_limit_report(
    reference: &crate::config::SimConfig,
    c: &[f64],
    epsilons: &[f64],
    workers: usize,
) -> Result<KacLimitReport> {
    let diffusion = diffusion_reference(reference, c, workers)?;
    let rows = epsilons
        .iter()
        .enumerate()
        .map(|(k, &eps)| kac_limit_row(reference, &diffusion, c, eps, k as u64 + 1, workers))
        .collect::<Result<Vec<_>>>()?;
    Ok(KacLimitReport {
        dim: reference.dimension,
        horizon: reference.horizon,
        ensemble: reference.ensemble,
        rows,
    })
}

/// Terminal values of component 0 under the diffusion in `reference`.
pub fn diffusion_reference(reference: &crate::config::SimConfig, c: &[f64], workers: usize) -> Result<Vec<f64>> {
    let mut reference = reference.clone();
    reference.tagged = vec![0];
    let ens = crate::ensemble::run_tagged_ensemble(&reference, c, workers)?;
    Ok(ens.terminal.iter().map(|t| t[0]).collect())
}

/// One epsilon of [`diffusion_limit_report`]. Jump paths use the seed
/// `reference.seed + stream`, so `stream` must differ from zero and between
/// rows for the samples to be independent.
pub fn kac_limit_row(
    reference: &crate::config::SimConfig,
    diffusion: &[f64],
    c: &[f64],
    eps: f64,
    stream: u64,
    workers: usize,
) -> Result<KacLimitRow> {
    use crate::ensemble::map_chunks;
    use crate::state::make_initial_state;
    use crate::stats::{ks_two_sample, ks_two_sample_se, poisson_chi_square};

    let jump = JumpConfig::matched(reference.dimension, eps, reference.horizon, reference.seed);
    jump.validate()?;
    let seed = reference.seed.wrapping_add(stream);
    let parts = map_chunks(reference.ensemble, workers, |range| {
        let mut terminal = Vec::with_capacity(range.len());
        let mut counts = Vec::new();
        let mut drift = 0.0f64;
        for m in range {
            let noise = NoiseStream::new(seed, m as u64);
            let initial = make_initial_state(c, reference.dimension, &noise)?;
            let path = simulate_kac(&jump, &initial, &noise)?;
            terminal.push(path.final_state[0]);
            counts.extend_from_slice(&path.pair_counts);
            drift = drift.max(path.max_energy_drift);
        }
        Ok((terminal, counts, drift))
    })?;
    let mut samples = Vec::with_capacity(reference.ensemble);
    let mut counts = Vec::new();
    let mut drift = 0.0f64;
    for (t, n, d) in parts {
        samples.extend(t);
        counts.extend(n);
        drift = drift.max(d);
    }
    let ks = ks_two_sample(&samples, diffusion)?;
    let expected = jump.pair_rate() * jump.horizon;
    let chi = poisson_chi_square(&counts, expected)?;
    Ok(KacLimitRow {
        epsilon: eps,
        ks_distance: ks.statistic,
        se: ks_two_sample_se(samples.len(), diffusion.len()),
        p_value: ks.p_value,
        rescaling_constant: jump.rescaling_constant(),
        max_energy_drift: drift,
        expected_pair_count: expected,
        mean_pair_count: counts.iter().sum::<u64>() as f64 / counts.len() as f64,
        chi2_statistic: chi.statistic,
        chi2_dof: chi.dof,
        chi2_p: chi.p_value,
    })
}
