//! The `N`-particle model in three dimensions that conserves both energy and
//! momentum.
//!
//! Velocities are stored flat, particle `k` occupying `3k..3k+3`. The
//! fluctuation `S = V - (u0, ..., u0)` lives on the sphere `|S|^2 = 2 N eps0`
//! inside the zero-momentum plane. The orthogonal map `R` of [`r_entry`]
//! sends that manifold to `s_N = sqrt(N) u0` together with a free
//! `3(N-1)`-sphere for `s_1, ..., s_{N-1}`, which is how ensembles are
//! simulated: the reduced sphere reuses the sphere steppers and the tagged
//! particles are read back through the lower-triangular part of `R^T`.

use serde::{Deserialize, Serialize};

use crate::config::{Engine, IntegratorKind, Renorm, SimConfig};
use crate::coupling::{step_ou_scalar, OUParams};
use crate::ensemble::{map_chunks, TaggedPath};
use crate::error::{Error, Result};
use crate::noise::{Channel, NoiseStream};
use crate::sphere::SphereGeometry;
use crate::state::{dot, norm_sq, rescale_to, BathLaw, UniformBath};
use crate::stats::{CoMoments, EnsembleSummary, Moments};

/// Relative tolerance for the conservation checks of [`MomentumState::new`].
pub const MANIFOLD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    n: usize,
    velocities: Vec<f64>,
    u0: [f64; 3],
    e0: f64,
}

impl MomentumState {
    pub fn new(velocities: Vec<f64>, u0: [f64; 3], e0: f64) -> Result<Self> {
        if velocities.len() % 3 != 0 {
            return Err(Error::contract("velocity vector length is not a multiple of 3"));
        }
        let n = velocities.len() / 3;
        if n < 2 {
            return Err(Error::InvalidDimension { dim: n, min: 2 });
        }
        let eps0 = e0 - 0.5 * norm_sq(&u0);
        if !(eps0 > 0.0) {
            return Err(Error::Domain(format!("energy in the center-of-mass frame is {eps0}")));
        }
        let state = MomentumState { n, velocities, u0, e0 };
        let nf = n as f64;
        let p = state.momentum();
        for g in 0..3 {
            if (p[g] - nf * u0[g]).abs() > MANIFOLD_TOL * nf * (1.0 + u0[g].abs()) {
                return Err(Error::contract(format!("momentum component {g} is {}, not N u0", p[g])));
            }
        }
        if (state.energy() - nf * e0).abs() > MANIFOLD_TOL * nf * e0 {
            return Err(Error::contract(format!(
                "energy is {}, not N e0 = {}",
                state.energy(),
                nf * e0
            )));
        }
        Ok(state)
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn particle(&self, k: usize) -> [f64; 3] {
        [self.velocities[3 * k], self.velocities[3 * k + 1], self.velocities[3 * k + 2]]
    }

    pub fn u0(&self) -> [f64; 3] {
        self.u0
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn eps0(&self) -> f64 {
        self.e0 - 0.5 * norm_sq(&self.u0)
    }

    pub fn momentum(&self) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (i, v) in self.velocities.iter().enumerate() {
            p[i % 3] += v;
        }
        p
    }

    pub fn energy(&self) -> f64 {
        0.5 * norm_sq(&self.velocities)
    }

    /// `S = V - (u0, ..., u0)`.
    pub fn fluctuation(&self) -> Vec<f64> {
        self.velocities
            .iter()
            .enumerate()
            .map(|(i, v)| v - self.u0[i % 3])
            .collect()
    }
}

/// `P(S) w = sigma(S) w - sum_g E^g (E^g . w) / N`.
pub fn projector_p(s: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if s.len() != w.len() || s.len() % 3 != 0 {
        return Err(Error::contract("projector needs two 3N-vectors"));
    }
    let mut out = vec![0.0; s.len()];
    projector_into(s, w, &mut out)?;
    Ok(out)
}

fn projector_into(s: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
    let q = norm_sq(s);
    if q == 0.0 {
        return Err(Error::SingularState);
    }
    let f = dot(s, w) / q;
    let n = (s.len() / 3) as f64;
    let mut mean = [0.0; 3];
    for (i, x) in w.iter().enumerate() {
        mean[i % 3] += x;
    }
    mean.iter_mut().for_each(|m| *m /= n);
    for i in 0..s.len() {
        out[i] = w[i] - f * s[i] - mean[i % 3];
    }
    Ok(())
}

/// Heun step of `dV = P(S) o dB` with `3N` increments `dw`, followed by a
/// rescaling of `S` onto `|S|^2 = 2 N eps0`.
pub fn step_momentum(state: &MomentumState, dw: &[f64], dt: f64) -> Result<MomentumState> {
    step_momentum_with(state, dw, dt, Renorm::PerStep)
}

pub fn step_momentum_with(state: &MomentumState, dw: &[f64], _dt: f64, renorm: Renorm) -> Result<MomentumState> {
    if dw.len() != state.velocities.len() {
        return Err(Error::contract(format!(
            "{} increments for {} velocity components",
            dw.len(),
            state.velocities.len()
        )));
    }
    let s = state.fluctuation();
    let len = s.len();
    let mut p0 = vec![0.0; len];
    projector_into(&s, dw, &mut p0)?;
    let pred: Vec<f64> = s.iter().zip(&p0).map(|(a, b)| a + b).collect();
    let mut p1 = vec![0.0; len];
    projector_into(&pred, dw, &mut p1)?;
    let mut next: Vec<f64> = (0..len).map(|i| s[i] + 0.5 * (p0[i] + p1[i])).collect();
    if renorm == Renorm::PerStep {
        rescale_to(&mut next, 2.0 * state.n as f64 * state.eps0());
    }
    let velocities = next
        .iter()
        .enumerate()
        .map(|(i, x)| x + state.u0[i % 3])
        .collect();
    Ok(MomentumState {
        n: state.n,
        velocities,
        u0: state.u0,
        e0: state.e0,
    })
}

/// Entry `R[row][k]` of the Gram-Schmidt matrix (0-based), `N` particles.
pub fn r_entry(n: usize, row: usize, k: usize) -> f64 {
    if row == n - 1 {
        return 1.0 / (n as f64).sqrt();
    }
    if k < row {
        return 0.0;
    }
    let after = (n - 1 - row) as f64;
    let f = (after / (after + 1.0)).sqrt();
    if k == row {
        f
    } else {
        -f / after
    }
}

/// `s = R V` on flat `3N`-vectors, applied per Cartesian component.
pub fn gram_schmidt_forward(v: &[f64]) -> Result<Vec<f64>> {
    let n = particles_of(v)?;
    let mut s = vec![0.0; v.len()];
    for g in 0..3 {
        let mut suffix = 0.0;
        for k in (0..n).rev() {
            let vk = v[3 * k + g];
            if k < n - 1 {
                let after = (n - 1 - k) as f64;
                let f = (after / (after + 1.0)).sqrt();
                s[3 * k + g] = f * (vk - suffix / after);
            }
            suffix += vk;
        }
        s[3 * (n - 1) + g] = suffix / (n as f64).sqrt();
    }
    Ok(s)
}

/// `V = R^T s`.
pub fn gram_schmidt_inverse(s: &[f64]) -> Result<Vec<f64>> {
    let n = particles_of(s)?;
    let mut v = vec![0.0; s.len()];
    for g in 0..3 {
        let mut total = (n as f64).sqrt() * s[3 * (n - 1) + g];
        for k in 0..n - 1 {
            let after = (n - 1 - k) as f64;
            let vk = (s[3 * k + g] * (after * (after + 1.0)).sqrt() + total) / (after + 1.0);
            v[3 * k + g] = vk;
            total -= vk;
        }
        v[3 * (n - 1) + g] = total;
    }
    Ok(v)
}

fn particles_of(v: &[f64]) -> Result<usize> {
    if v.len() % 3 != 0 {
        return Err(Error::contract("vector length is not a multiple of 3"));
    }
    let n = v.len() / 3;
    if n < 2 {
        return Err(Error::InvalidDimension { dim: n, min: 2 });
    }
    Ok(n)
}

/// `s_1 sqrt((N-1)(N-2))/N + s_N/sqrt(N)`, the reconstruction of the first
/// particle's velocity as it is usually printed. The exact inverse of `R`
/// has `sqrt((N-1)/N)` as the coefficient of `s_1`; the two agree to `O(1/N)`.
pub fn printed_v1_reconstruction(s1: f64, s_last: f64, n: usize) -> f64 {
    let nf = n as f64;
    s1 * ((nf - 1.0) * (nf - 2.0)).sqrt() / nf + s_last / nf.sqrt()
}

/// Parameters of the manifold: particle count, momentum and energy per
/// particle (the latter through `eps0 = e0 - |u0|^2/2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Manifold {
    pub particles: usize,
    pub u0: [f64; 3],
    pub eps0: f64,
}

impl Manifold {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::InvalidDimension {
                dim: self.particles,
                min: 2,
            });
        }
        if !(self.eps0 > 0.0) {
            return Err(Error::config(format!("eps0 must be positive, got {}", self.eps0)));
        }
        Ok(())
    }

    pub fn e0(&self) -> f64 {
        self.eps0 + 0.5 * norm_sq(&self.u0)
    }

    /// `2 N eps0`, the squared radius of the reduced sphere.
    pub fn radius_sq(&self) -> f64 {
        2.0 * self.particles as f64 * self.eps0
    }

    pub fn reduced_geometry(&self) -> SphereGeometry {
        SphereGeometry {
            dim: 3 * (self.particles - 1),
            radius_sq: self.radius_sq(),
        }
    }

    /// Friction of the limiting OU process of a tagged particle,
    /// `beta = 3 / (4 eps0)`; its stationary variance per component is
    /// `2 eps0 / 3`.
    pub fn ou_params(&self) -> OUParams {
        OUParams {
            alpha: 1.0,
            beta: 0.75 / self.eps0,
        }
    }
}

/// Reduced coordinates `s_1, ..., s_{N-1}` of a state whose first `c.len()`
/// particles have fluctuations `c`, the rest drawn uniformly on the residual
/// manifold.
pub fn reduced_initial(manifold: &Manifold, c: &[[f64; 3]], noise: &NoiseStream, bath: &dyn BathLaw) -> Result<Vec<f64>> {
    manifold.validate()?;
    let n = manifold.particles;
    let m = c.len();
    if m > n - 1 {
        return Err(Error::contract(format!("{m} tagged particles out of {n}")));
    }
    let mut s = Vec::with_capacity(3 * (n - 1));
    for k in 0..m {
        for g in 0..3 {
            let mut x = c[k][g];
            for row in 0..k {
                x -= r_entry(n, row, k) * s[3 * row + g];
            }
            s.push(x / r_entry(n, k, k));
        }
    }
    let used = norm_sq(&s);
    let radius_sq = manifold.radius_sq();
    if used > radius_sq * (1.0 + 1e-12) {
        return Err(Error::InfeasibleInitialData {
            norm_sq: used,
            radius_sq,
        });
    }
    let rest = 3 * (n - 1 - m);
    if rest > 0 {
        s.extend(bath.sample(rest, (radius_sq - used).max(0.0), noise));
    } else if (radius_sq - used).abs() > 1e-9 * radius_sq {
        return Err(Error::InfeasibleInitialData {
            norm_sq: used,
            radius_sq,
        });
    }
    Ok(s)
}

/// Full state from reduced coordinates.
pub fn state_from_reduced(manifold: &Manifold, reduced: &[f64]) -> Result<MomentumState> {
    let n = manifold.particles;
    if reduced.len() != 3 * (n - 1) {
        return Err(Error::contract("reduced vector has the wrong length"));
    }
    let mut s = reduced.to_vec();
    let root = (n as f64).sqrt();
    s.extend(manifold.u0.iter().map(|u| root * u));
    MomentumState::new(gram_schmidt_inverse(&s)?, manifold.u0, manifold.e0())
}

/// `S_k = sum_{row <= k} R[row][k] s_row` for the first `m` particles.
fn tagged_fluctuations(n: usize, s: &[f64], m: usize, out: &mut [f64]) {
    for k in 0..m {
        for g in 0..3 {
            let mut x = 0.0;
            for row in 0..=k {
                x += r_entry(n, row, k) * s[3 * row + g];
            }
            out[3 * k + g] = x;
        }
    }
}

/// Tagged-particle coupling experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Prop1Config {
    pub particles: usize,
    /// Initial fluctuation `c_k` of each tagged particle.
    pub tagged: Vec<[f64; 3]>,
    pub u0: [f64; 3],
    pub eps0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub ensemble: usize,
    pub seed: u64,
    pub engine: Engine,
    pub checkpoints: usize,
}

impl Default for Prop1Config {
    fn default() -> Self {
        Prop1Config {
            particles: 100,
            tagged: vec![[1.0, 0.0, 0.0]],
            u0: [0.0; 3],
            eps0: 1.5,
            dt: 1e-3,
            horizon: 1.0,
            ensemble: 1000,
            seed: 0,
            engine: Engine::TaggedBlock,
            checkpoints: 10,
        }
    }
}

impl Prop1Config {
    pub fn manifold(&self) -> Manifold {
        Manifold {
            particles: self.particles,
            u0: self.u0,
            eps0: self.eps0,
        }
    }

    /// Sphere configuration for the reduced coordinates.
    pub fn reduced_config(&self) -> SimConfig {
        SimConfig {
            dimension: 3 * (self.particles.max(2) - 1),
            dt: self.dt,
            horizon: self.horizon,
            ensemble: self.ensemble,
            seed: self.seed,
            integrator: IntegratorKind::ItoEm,
            renorm: Renorm::PerStep,
            tagged: (0..3 * self.tagged.len()).collect(),
            engine: self.engine,
            checkpoints: self.checkpoints,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.manifold().validate()?;
        if self.tagged.is_empty() || self.tagged.len() > self.particles - 1 {
            return Err(Error::config(format!(
                "need between 1 and N-1 tagged particles, got {}",
                self.tagged.len()
            )));
        }
        self.reduced_config().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumReport {
    pub times: Vec<f64>,
    pub particles: usize,
    pub ou: OUParams,
    /// `msd[k][t] = E|S_k(t) - S'_k(t)|^2` per tagged particle.
    pub msd: Vec<Vec<f64>>,
    pub msd_se: Vec<Vec<f64>>,
    /// Average of `msd` over the tagged particles, per trajectory.
    pub mean_msd: Vec<f64>,
    pub mean_msd_se: Vec<f64>,
    /// Terminal covariance of particles 0 and 1 per Cartesian component,
    /// with the standard error of a covariance under independence.
    pub cross_cov: Option<[f64; 3]>,
    pub cross_cov_se: Option<[f64; 3]>,
}

impl MomentumReport {
    pub fn sup_mean_msd(&self) -> f64 {
        self.mean_msd.iter().copied().fold(0.0, f64::max)
    }
}

/// Couples each tagged particle's fluctuation to a 3D OU process driven by
/// the particle's own Brownian motion `B_k`, reconstructed from the reduced
/// drivers as `sum_{row <= k} R[row][k] W_row + W_N / sqrt(N)`.
pub fn run_prop1(config: &Prop1Config, workers: usize) -> Result<MomentumReport> {
    config.validate()?;
    let manifold = config.manifold();
    let reduced = config.reduced_config();
    let geom = manifold.reduced_geometry();
    let ou = manifold.ou_params();
    let n = config.particles;
    let m = config.tagged.len();
    let times = reduced.record_times();
    let stride = reduced.record_stride();
    let steps = reduced.steps();
    let dt = config.dt;
    let root_n = (n as f64).sqrt();
    let mut names: Vec<String> = (0..m).map(|k| format!("msd_{k}")).collect();
    names.push("msd_mean".into());
    let base = NoiseStream::new(config.seed, 0);
    let parts = map_chunks(config.ensemble, workers, |range| {
        let mut summary = EnsembleSummary::new(times.clone(), names.clone(), vec![]);
        let mut cross = [(CoMoments::default(), Moments::default(), Moments::default()); 3];
        let mut tagged_s = vec![0.0; 3 * m];
        let mut drivers = vec![0.0; 3 * m];
        let mut row = vec![0.0; m + 1];
        for traj in range {
            let noise = base.for_trajectory(traj as u64);
            let s0 = reduced_initial(&manifold, &config.tagged, &noise, &UniformBath)?;
            let mut path = TaggedPath::from_state(&reduced, geom, s0, noise)?;
            let mut ou_state: Vec<f64> = config.tagged.iter().flatten().copied().collect();
            summary.record(0, &row);
            for step in 1..=steps {
                path.advance();
                let w = path.increments();
                let sn = noise.at_step(step as u64 - 1);
                let com: [f64; 3] =
                    std::array::from_fn(|g| dt.sqrt() * sn.gaussian(Channel::CenterOfMass(g)) / root_n);
                tagged_fluctuations(n, w, m, &mut drivers);
                for (i, x) in ou_state.iter_mut().enumerate() {
                    *x = step_ou_scalar(*x, drivers[i] + com[i % 3], dt, ou);
                }
                if step % stride == 0 {
                    tagged_fluctuations(n, path.tagged(), m, &mut tagged_s);
                    let mut total = 0.0;
                    for k in 0..m {
                        let d: f64 = (0..3)
                            .map(|g| (tagged_s[3 * k + g] - ou_state[3 * k + g]).powi(2))
                            .sum();
                        row[k] = d;
                        total += d;
                    }
                    row[m] = total / m as f64;
                    summary.record(step / stride, &row);
                    row.iter_mut().for_each(|x| *x = 0.0);
                }
            }
            if m >= 2 {
                if steps == 0 {
                    tagged_fluctuations(n, path.tagged(), m, &mut tagged_s);
                }
                for g in 0..3 {
                    let (x, y) = (tagged_s[g], tagged_s[3 + g]);
                    cross[g].0.push(x, y);
                    cross[g].1.push(x);
                    cross[g].2.push(y);
                }
            }
        }
        Ok((summary, cross))
    })?;
    let mut summary = EnsembleSummary::new(times.clone(), names, vec![]);
    let mut cross = [(CoMoments::default(), Moments::default(), Moments::default()); 3];
    for (s, c) in &parts {
        summary.merge(s)?;
        for g in 0..3 {
            cross[g].0.merge(&c[g].0);
            cross[g].1.merge(&c[g].1);
            cross[g].2.merge(&c[g].2);
        }
    }
    let mut msd = Vec::with_capacity(m);
    let mut msd_se = Vec::with_capacity(m);
    for k in 0..m {
        let (a, b) = summary.series(k);
        msd.push(a);
        msd_se.push(b);
    }
    let (mean_msd, mean_msd_se) = summary.series(m);
    let (cross_cov, cross_cov_se) = if m >= 2 {
        let cov: [f64; 3] = std::array::from_fn(|g| cross[g].0.covariance());
        let se: [f64; 3] = std::array::from_fn(|g| {
            (cross[g].1.variance() * cross[g].2.variance() / config.ensemble as f64).sqrt()
        });
        (Some(cov), Some(se))
    } else {
        (None, None)
    };
    Ok(MomentumReport {
        times,
        particles: n,
        ou,
        msd,
        msd_se,
        mean_msd,
        mean_msd_se,
        cross_cov,
        cross_cov_se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensatedReport {
    pub times: Vec<f64>,
    pub msd: Vec<f64>,
    pub se: Vec<f64>,
    /// `3 t / N`.
    pub theory: Vec<f64>,
}

/// Mean-square distance between `B_1 - (1/N) sum_k B_k` and `B_1`, i.e.
/// `E|(1/N) sum_k B_k(t)|^2`, for `N` independent 3D Brownian motions.
///
/// At `N = 1` the compensated process is identically zero and the distance is
/// `E|B_1(t)|^2 = 3t`.
pub fn compensated_noise_check(
    n: usize,
    horizon: f64,
    checkpoints: usize,
    ensemble: usize,
    seed: u64,
    workers: usize,
) -> Result<CompensatedReport> {
    if n == 0 || checkpoints == 0 || ensemble < 2 || !(horizon > 0.0) {
        return Err(Error::config("compensated noise check needs N, checkpoints, T > 0 and M >= 2"));
    }
    let dt = horizon / checkpoints as f64;
    let times: Vec<f64> = (0..=checkpoints).map(|k| k as f64 * dt).collect();
    let names = vec!["msd".to_string()];
    let base = NoiseStream::new(seed, 0);
    let parts = map_chunks(ensemble, workers, |range| {
        let mut moments = vec![Moments::default(); times.len()];
        for traj in range {
            let noise = base.for_trajectory(traj as u64);
            let mut sum = [0.0; 3];
            moments[0].push(0.0);
            for step in 0..checkpoints {
                let sn = noise.at_step(step as u64);
                let mut rng_inc = vec![0.0; 3 * n];
                sn.brownian_block(dt, &mut rng_inc);
                for (i, w) in rng_inc.iter().enumerate() {
                    sum[i % 3] += w;
                }
                let mean_sq: f64 = sum.iter().map(|x| (x / n as f64).powi(2)).sum();
                moments[step + 1].push(mean_sq);
            }
        }
        let mut summary = EnsembleSummary::new(times.clone(), names.clone(), vec![]);
        for (row, m) in summary.moments.iter_mut().zip(moments) {
            row[0] = m;
        }
        Ok(summary)
    })?;
    let mut summary = EnsembleSummary::new(times.clone(), names, vec![]);
    for p in &parts {
        summary.merge(p)?;
    }
    let (msd, se) = summary.series(0);
    let theory = times.iter().map(|t| 3.0 * t / n as f64).collect();
    Ok(CompensatedReport { times, msd, se, theory })
}

/// Terminal first-particle velocities from direct integration of
/// `dV = P(S) o dB` in all `3N` coordinates.
pub fn direct_terminal_v1(
    initial: &MomentumState,
    dt: f64,
    steps: usize,
    ensemble: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<[f64; 3]>> {
    let len = initial.velocities().len();
    let base = NoiseStream::new(seed, 0);
    let parts = map_chunks(ensemble, workers, |range| {
        let mut out = Vec::with_capacity(range.len());
        let mut dw = vec![0.0; len];
        for traj in range {
            let noise = base.for_trajectory(traj as u64);
            let mut state = initial.clone();
            for step in 0..steps {
                noise.at_step(step as u64).brownian_block(dt, &mut dw);
                state = step_momentum(&state, &dw, dt)?;
            }
            out.push(state.particle(0));
        }
        Ok(out)
    })?;
    Ok(parts.into_iter().flatten().collect())
}

/// Terminal first-particle velocities from the reduced sphere started at
/// the image of `initial`, mapped back through `R^T`.
pub fn reduced_terminal_v1(
    initial: &MomentumState,
    dt: f64,
    steps: usize,
    ensemble: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<[f64; 3]>> {
    let n = initial.particles();
    let manifold = Manifold {
        particles: n,
        u0: initial.u0(),
        eps0: initial.eps0(),
    };
    let s = gram_schmidt_forward(initial.velocities())?;
    let s0 = s[..3 * (n - 1)].to_vec();
    let config = SimConfig {
        dimension: 3 * (n - 1),
        dt,
        horizon: dt * steps as f64,
        ensemble,
        seed,
        integrator: IntegratorKind::StratHeun,
        renorm: Renorm::PerStep,
        tagged: (0..3).collect(),
        engine: Engine::Full,
        checkpoints: 0,
        ..SimConfig::default()
    };
    let geom = manifold.reduced_geometry();
    let base = NoiseStream::new(seed, 0);
    let parts = map_chunks(ensemble, workers, |range| {
        let mut out = Vec::with_capacity(range.len());
        for traj in range {
            let mut path = TaggedPath::from_state(&config, geom, s0.clone(), base.for_trajectory(traj as u64))?;
            for _ in 0..steps {
                path.advance();
            }
            let t = path.tagged();
            out.push(std::array::from_fn(|g| r_entry(n, 0, 0) * t[g] + manifold.u0[g]));
        }
        Ok(out)
    })?;
    Ok(parts.into_iter().flatten().collect())
}
