//! Time-steppers for Brownian motion on the sphere.
//!
//! Three representations of the same diffusion are provided:
//!
//! * the projected Ito equation `dV = sigma(V) dB - (D-1)/(2 r^2) V dt`
//!   (Euler-Maruyama, optional per-step renormalization),
//! * the Stratonovich equation `dV = sigma(V) o dB` (Heun),
//! * the rotation-generator equation `dV_i = sum_j V_j o dOmega_ij`, integrated
//!   exactly as a product of Givens rotations.
//!
//! Givens rotations are applied pair by pair in lexicographic order
//! `(0,1), (0,2), ..., (D-2,D-1)`. For pair `(i, j)` with angle `theta`:
//! `V_i <- V_i cos(theta) + V_j sin(theta)`, `V_j <- V_j cos(theta) - V_i sin(theta)`,
//! which is the finite version of `dV_i = V_j dOmega_ij`, `dV_j = -V_i dOmega_ij`.
//!
//! The kernels work on slices and take the sphere geometry explicitly, so the
//! tagged-block engine can run them on a short embedded vector while keeping
//! the drift of the full `D`-dimensional sphere.

use crate::config::{Engine, IntegratorKind, Renorm, RotationPairs, SimConfig};
use crate::error::{Error, Result};
use crate::kac::{self, AngleLaw, ClockConvention, JumpConfig};
use crate::noise::{Channel, NoiseStream, StepNoise};
use crate::state::{dot, norm_sq, rescale_to, StateVector};

/// Intrinsic dimension and squared radius of the sphere being simulated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereGeometry {
    pub dim: usize,
    pub radius_sq: f64,
}

impl SphereGeometry {
    /// The reduced-unit sphere of radius `sqrt(D)`.
    pub fn standard(dim: usize) -> Self {
        SphereGeometry {
            dim,
            radius_sq: dim as f64,
        }
    }

    /// Coefficient of the inward Ito drift, `(D-1)/(2 r^2)`.
    pub fn drift_coefficient(&self) -> f64 {
        (self.dim as f64 - 1.0) / (2.0 * self.radius_sq)
    }
}

/// One Euler-Maruyama step of the projected Ito equation.
///
/// Writes the new state to `out` and, when given, the martingale increment
/// `sigma(V) dW` to `martingale`.
pub fn ito_em_kernel(
    geom: &SphereGeometry,
    v: &[f64],
    dw: &[f64],
    dt: f64,
    renorm: Renorm,
    out: &mut [f64],
    martingale: Option<&mut [f64]>,
) {
    let q = norm_sq(v);
    let f = dot(v, dw) / q;
    let shrink = 1.0 - geom.drift_coefficient() * dt;
    for i in 0..v.len() {
        out[i] = v[i] * shrink + (dw[i] - f * v[i]);
    }
    if let Some(m) = martingale {
        for i in 0..v.len() {
            m[i] = dw[i] - f * v[i];
        }
    }
    if renorm == Renorm::PerStep {
        rescale_to(out, geom.radius_sq);
    }
}

/// One Heun predictor-corrector step of the Stratonovich equation.
///
/// `scratch` must have the length of `v`.
pub fn heun_kernel(
    geom: &SphereGeometry,
    v: &[f64],
    dw: &[f64],
    renorm: Renorm,
    out: &mut [f64],
    scratch: &mut [f64],
    martingale: Option<&mut [f64]>,
) {
    let q = norm_sq(v);
    let f = dot(v, dw) / q;
    // predictor
    for i in 0..v.len() {
        scratch[i] = v[i] + dw[i] - f * v[i];
    }
    let qp = norm_sq(scratch);
    let fp = dot(scratch, dw) / qp;
    for i in 0..v.len() {
        out[i] = v[i] + dw[i] - 0.5 * (f * v[i] + fp * scratch[i]);
    }
    if let Some(m) = martingale {
        for i in 0..v.len() {
            m[i] = dw[i] - f * v[i];
        }
    }
    if renorm == Renorm::PerStep {
        rescale_to(out, geom.radius_sq);
    }
}

/// Applies the Givens rotation of angle `theta` in the `(i, j)` plane.
#[inline]
pub fn givens(v: &mut [f64], i: usize, j: usize, theta: f64) {
    let (s, c) = theta.sin_cos();
    let (vi, vj) = (v[i], v[j]);
    v[i] = vi * c + vj * s;
    v[j] = vj * c - vi * s;
}

pub fn pair_count(dim: usize) -> usize {
    dim * (dim - 1) / 2
}

/// Lexicographic index of the pair `(i, j)`, `i < j`.
pub fn pair_index(i: usize, j: usize, dim: usize) -> usize {
    debug_assert!(i < j && j < dim);
    i * (2 * dim - i - 1) / 2 + (j - i - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_from_index(p: usize, dim: usize) -> (usize, usize) {
    let mut i = 0;
    let mut first = 0;
    loop {
        let row = dim - i - 1;
        if p < first + row {
            return (i, i + 1 + (p - first));
        }
        first += row;
        i += 1;
    }
}

/// Rotates `v` through the angles `angles[p]` of every pair, in lexicographic
/// order, and optionally records the Ito martingale increment
/// `dM_i = sum_j V_j dOmega_ij` evaluated at the pre-step state.
pub fn rotation_kernel(v: &mut [f64], angles: &[f64], martingale: Option<&mut [f64]>) {
    let dim = v.len();
    if let Some(m) = martingale {
        m.iter_mut().for_each(|x| *x = 0.0);
        let mut p = 0;
        for i in 0..dim {
            for j in i + 1..dim {
                m[i] += v[j] * angles[p];
                m[j] -= v[i] * angles[p];
                p += 1;
            }
        }
    }
    let mut p = 0;
    for i in 0..dim {
        for j in i + 1..dim {
            givens(v, i, j, angles[p]);
            p += 1;
        }
    }
}

/// Draws this step's rotation angles, `Omega_ij ~ N(0, dt / r^2)` per pair.
///
/// For `RotationPairs::Subset(k)` only `k` randomly chosen pairs get a
/// nonzero angle, with the variance inflated so the total generator rate is
/// unchanged.
pub fn draw_rotation_angles(
    noise: &StepNoise,
    geom: &SphereGeometry,
    dt: f64,
    pairs: RotationPairs,
    angles: &mut [f64],
) {
    let total = angles.len();
    match pairs {
        RotationPairs::All => {
            let scale = (dt / geom.radius_sq).sqrt();
            for (p, a) in angles.iter_mut().enumerate() {
                *a = scale * noise.gaussian(Channel::Rotation(p));
            }
        }
        RotationPairs::Subset(k) => {
            angles.iter_mut().for_each(|a| *a = 0.0);
            let scale = (dt / geom.radius_sq * total as f64 / k as f64).sqrt();
            for n in 0..k {
                let u = noise.uniform(Channel::Rotation(total + 2 * n));
                let p = ((u * total as f64) as usize).min(total - 1);
                angles[p] += scale * noise.gaussian(Channel::Rotation(total + 2 * n + 1));
            }
        }
    }
}

fn check_increments(v: &StateVector, dw: &[f64]) -> Result<()> {
    if dw.len() != v.dim() {
        return Err(Error::contract(format!(
            "{} increments for a state of dimension {}",
            dw.len(),
            v.dim()
        )));
    }
    if v.norm_sq() == 0.0 {
        return Err(Error::SingularState);
    }
    Ok(())
}

/// Euler-Maruyama step `V + sigma(V) dW - (D-1)/(2D) V dt` on the sphere of
/// radius `sqrt(D)`.
pub fn step_ito_em(v: &StateVector, dw: &[f64], dt: f64, renorm: Renorm) -> Result<StateVector> {
    check_increments(v, dw)?;
    let mut out = vec![0.0; v.dim()];
    ito_em_kernel(
        &SphereGeometry::standard(v.dim()),
        v.components(),
        dw,
        dt,
        renorm,
        &mut out,
        None,
    );
    StateVector::new(out)
}

/// Heun step for `dV = sigma(V) o dB`, without renormalization.
pub fn step_strat_heun(v: &StateVector, dw: &[f64], _dt: f64) -> Result<StateVector> {
    step_strat_heun_with(v, dw, Renorm::None)
}

pub fn step_strat_heun_with(v: &StateVector, dw: &[f64], renorm: Renorm) -> Result<StateVector> {
    check_increments(v, dw)?;
    let mut out = vec![0.0; v.dim()];
    let mut scratch = vec![0.0; v.dim()];
    heun_kernel(
        &SphereGeometry::standard(v.dim()),
        v.components(),
        dw,
        renorm,
        &mut out,
        &mut scratch,
        None,
    );
    StateVector::new(out)
}

/// Applies the antisymmetric increment matrix `d_omega` as a product of
/// exact Givens rotations in lexicographic pair order.
pub fn step_rotation(v: &StateVector, d_omega: &[Vec<f64>], _dt: f64) -> Result<StateVector> {
    let dim = v.dim();
    if d_omega.len() != dim || d_omega.iter().any(|row| row.len() != dim) {
        return Err(Error::contract("rotation increments must form a D x D matrix"));
    }
    let mut angles = Vec::with_capacity(pair_count(dim));
    for i in 0..dim {
        if d_omega[i][i] != 0.0 {
            return Err(Error::contract(format!("nonzero diagonal entry at {i}")));
        }
        for j in i + 1..dim {
            if d_omega[j][i] != -d_omega[i][j] {
                return Err(Error::contract(format!(
                    "increment matrix not antisymmetric at ({i}, {j})"
                )));
            }
            angles.push(d_omega[i][j]);
        }
    }
    let mut out = v.clone().into_vec();
    rotation_kernel(&mut out, &angles, None);
    StateVector::new(out)
}

/// Coefficients of the tagged-component equation
/// `dV_1 = sigma_1 dB_1 - (D-1)/2 b_1 dt - H . dB_U`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCoefficients {
    pub sigma1: f64,
    pub b1: f64,
    /// `b1 * U`, where `U` is the state without the tagged component.
    pub h: Vec<f64>,
}

pub fn split_coefficients(v: &StateVector, tagged: usize) -> Result<SplitCoefficients> {
    if tagged >= v.dim() {
        return Err(Error::contract(format!(
            "tagged index {tagged} out of range for dimension {}",
            v.dim()
        )));
    }
    let q = v.norm_sq();
    if q == 0.0 {
        return Err(Error::SingularState);
    }
    let x = v[tagged];
    let b1 = x / q;
    let h = v
        .components()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != tagged)
        .map(|(_, &u)| b1 * u)
        .collect();
    Ok(SplitCoefficients {
        sigma1: 1.0 - x * b1,
        b1,
        h,
    })
}

/// A fully recorded single path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub integrator: IntegratorKind,
    /// `|V(t_k)|^2 - D`.
    pub radius_drift: Vec<f64>,
    /// Martingale increments of each step, when requested.
    pub martingale: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn max_radius_drift(&self) -> f64 {
        self.radius_drift.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn terminal(&self) -> &StateVector {
        self.states.last().expect("trajectory has at least one state")
    }
}

/// Full-dimensional single-path integrator with reusable buffers.
#[derive(Debug, Clone)]
pub struct FullStepper {
    geom: SphereGeometry,
    kind: IntegratorKind,
    renorm: Renorm,
    pairs: RotationPairs,
    dw: Vec<f64>,
    next: Vec<f64>,
    scratch: Vec<f64>,
}

impl FullStepper {
    pub fn new(geom: SphereGeometry, kind: IntegratorKind, renorm: Renorm, pairs: RotationPairs) -> Self {
        let n = geom.dim;
        let buf = match kind {
            IntegratorKind::Rotation => pair_count(n),
            _ => n,
        };
        FullStepper {
            geom,
            kind,
            renorm,
            pairs,
            dw: vec![0.0; buf],
            next: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    pub fn from_config(config: &SimConfig) -> Self {
        FullStepper::new(
            SphereGeometry::standard(config.dimension),
            config.integrator,
            config.renorm,
            config.rotation_pairs,
        )
    }

    /// The increments drawn by the last call to [`FullStepper::step`]
    /// (Brownian increments, or rotation angles).
    pub fn last_increments(&self) -> &[f64] {
        &self.dw
    }

    pub fn step(&mut self, v: &mut [f64], noise: &StepNoise, dt: f64, martingale: Option<&mut [f64]>) {
        match self.kind {
            IntegratorKind::ItoEm => {
                noise.brownian_block(dt, &mut self.dw);
                ito_em_kernel(&self.geom, v, &self.dw, dt, self.renorm, &mut self.next, martingale);
                v.copy_from_slice(&self.next);
            }
            IntegratorKind::StratHeun => {
                noise.brownian_block(dt, &mut self.dw);
                heun_kernel(
                    &self.geom,
                    v,
                    &self.dw,
                    self.renorm,
                    &mut self.next,
                    &mut self.scratch,
                    martingale,
                );
                v.copy_from_slice(&self.next);
            }
            IntegratorKind::Rotation => {
                draw_rotation_angles(noise, &self.geom, dt, self.pairs, &mut self.dw);
                rotation_kernel(v, &self.dw, martingale);
            }
            IntegratorKind::KacJump => unreachable!("jump paths are event driven"),
        }
    }
}

/// Reduced state for the tagged-block engine: the tagged components and the
/// squared norm of everything else.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedBlock {
    pub tagged: Vec<f64>,
    pub bath_norm_sq: f64,
}

/// Integrator for [`TaggedBlock`].
///
/// Given the bath `U` and its increment `w`, the step only sees `U.w` and
/// `|w|^2`. Writing `w = xi sqrt(dt) U/|U| + w_perp` with `xi ~ N(0,1)` and
/// `|w_perp|^2 ~ dt chi^2(D-d-1)`, the step is carried out exactly on the
/// vector `(A, |U|, 0)` with increment `(a, xi sqrt(dt), |w_perp|)` and the two
/// bath coordinates are folded back into a norm afterwards.
#[derive(Debug, Clone)]
pub struct BlockStepper {
    geom: SphereGeometry,
    kind: IntegratorKind,
    renorm: Renorm,
    bath_dof: usize,
    v: Vec<f64>,
    dw: Vec<f64>,
    next: Vec<f64>,
    scratch: Vec<f64>,
}

impl BlockStepper {
    pub fn new(geom: SphereGeometry, tagged: usize, kind: IntegratorKind, renorm: Renorm) -> Self {
        assert!(matches!(kind, IntegratorKind::ItoEm | IntegratorKind::StratHeun));
        let n = tagged + 2;
        BlockStepper {
            geom,
            kind,
            renorm,
            bath_dof: geom.dim.saturating_sub(tagged + 1),
            v: vec![0.0; n],
            dw: vec![0.0; n],
            next: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    fn has_bath(&self) -> bool {
        self.geom.dim > self.v.len() - 2
    }

    /// Draws the bath statistics for this step: the radial increment
    /// (variance `dt`) and the squared tangential norm.
    pub fn bath_noise(&self, noise: &StepNoise, dt: f64) -> (f64, f64) {
        if !self.has_bath() {
            return (0.0, 0.0);
        }
        let radial = dt.sqrt() * noise.gaussian(Channel::BathRadial);
        let tangential_sq = dt * noise.chi_square(Channel::BathTangential, self.bath_dof);
        (radial, tangential_sq)
    }

    /// Advances `block` given tagged increments `a` and bath statistics.
    pub fn step_with(&mut self, block: &mut TaggedBlock, a: &[f64], bath: (f64, f64), dt: f64) {
        let d = block.tagged.len();
        self.v[..d].copy_from_slice(&block.tagged);
        self.v[d] = block.bath_norm_sq.max(0.0).sqrt();
        self.v[d + 1] = 0.0;
        self.dw[..d].copy_from_slice(a);
        self.dw[d] = bath.0;
        self.dw[d + 1] = bath.1.max(0.0).sqrt();
        match self.kind {
            IntegratorKind::ItoEm => {
                ito_em_kernel(&self.geom, &self.v, &self.dw, dt, self.renorm, &mut self.next, None)
            }
            _ => heun_kernel(
                &self.geom,
                &self.v,
                &self.dw,
                self.renorm,
                &mut self.next,
                &mut self.scratch,
                None,
            ),
        }
        block.tagged.copy_from_slice(&self.next[..d]);
        block.bath_norm_sq = self.next[d] * self.next[d] + self.next[d + 1] * self.next[d + 1];
    }

    pub fn step(&mut self, block: &mut TaggedBlock, a: &[f64], noise: &StepNoise, dt: f64) {
        let bath = self.bath_noise(noise, dt);
        self.step_with(block, a, bath, dt);
    }
}

/// Integrates one path on the grid `0, dt, ..., T` with the configured
/// stepper, recording every step.
pub fn simulate_path(config: &SimConfig, initial: &StateVector, noise: &NoiseStream) -> Result<Trajectory> {
    config.validate()?;
    if initial.dim() != config.dimension {
        return Err(Error::contract("initial state dimension differs from config"));
    }
    if !initial.on_sphere(config.radius_tol.max(1e-6)) {
        return Err(Error::contract("initial state is not on the sphere"));
    }
    if config.engine == Engine::TaggedBlock {
        return Err(Error::config("simulate_path records full states; use the full engine"));
    }
    let steps = config.steps();
    let dim = config.dimension as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * config.dt).collect();

    if config.integrator == IntegratorKind::KacJump {
        let jump = JumpConfig::matched(config.dimension, config.kac_epsilon, config.horizon, config.seed);
        let path = kac::simulate_kac(&jump, initial, noise)?;
        let scale = jump.time_scale();
        let states: Vec<StateVector> = times.iter().map(|&t| path.state_at(t * scale)).collect();
        let radius_drift = states.iter().map(|s| s.norm_sq() - dim).collect();
        return Ok(Trajectory {
            times,
            states,
            integrator: config.integrator,
            radius_drift,
            martingale: None,
        });
    }

    let mut stepper = FullStepper::from_config(config);
    let mut v = initial.clone().into_vec();
    let mut states = Vec::with_capacity(steps + 1);
    let mut radius_drift = Vec::with_capacity(steps + 1);
    states.push(initial.clone());
    radius_drift.push(initial.norm_sq() - dim);
    let mut mart = config.store_martingale.then(|| Vec::with_capacity(steps));
    let mut m = vec![0.0; config.dimension];
    for k in 0..steps {
        let step_noise = noise.at_step(k as u64);
        if let Some(record) = mart.as_mut() {
            stepper.step(&mut v, &step_noise, config.dt, Some(&mut m));
            record.push(m.clone());
        } else {
            stepper.step(&mut v, &step_noise, config.dt, None);
        }
        radius_drift.push(norm_sq(&v) - dim);
        states.push(StateVector::new(v.clone())?);
    }
    Ok(Trajectory {
        times,
        states,
        integrator: config.integrator,
        radius_drift,
        martingale: mart,
    })
}

/// Halves `dt` (starting from `config.dt`) until the ensemble-mean radius
/// drift per unit time of unrenormalized Euler-Maruyama falls below
/// `1e-3 D`. Returns the calibrated step.
pub fn calibrate_dt(config: &SimConfig, pilot_paths: usize) -> Result<f64> {
    let mut dt = config.dt;
    let horizon = 1.0;
    for _ in 0..20 {
        let geom = SphereGeometry::standard(config.dimension);
        let mut stepper = FullStepper::new(geom, IntegratorKind::ItoEm, Renorm::None, RotationPairs::All);
        let steps = (horizon / dt).round() as usize;
        let mut drift = 0.0;
        for p in 0..pilot_paths {
            let noise = NoiseStream::new(config.seed ^ 0xca1b, p as u64);
            let mut v = crate::state::sample_uniform_sphere(config.dimension, &noise)?.into_vec();
            for k in 0..steps {
                stepper.step(&mut v, &noise.at_step(k as u64), dt, None);
            }
            drift += norm_sq(&v) - geom.radius_sq;
        }
        let rate = (drift / pilot_paths as f64).abs() / horizon;
        if rate < 1e-3 * config.dimension as f64 {
            return Ok(dt);
        }
        dt /= 2.0;
    }
    Err(Error::config("dt calibration did not converge"))
}

/// Default jump-process configuration used when `kac-jump` runs on a
/// diffusion time grid.
impl JumpConfig {
    pub fn matched(dim: usize, epsilon: f64, diffusion_horizon: f64, seed: u64) -> Self {
        let mut c = JumpConfig {
            epsilon,
            dim,
            horizon: 0.0,
            angle_law: AngleLaw::Uniform,
            seed,
            event_budget: u64::MAX,
            clock: ClockConvention::VarianceMatched,
        };
        c.horizon = diffusion_horizon * c.time_scale();
        c
    }
}
