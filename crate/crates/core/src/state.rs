//! Velocity states on the energy sphere.
//!
//! All quantities are in reduced units (temperature `theta = 2 e0 / 3 = 1`,
//! noise amplitude `lambda = 1`), so a state of `D` components lives on the
//! sphere of radius `sqrt(D)`. Physical velocities are recovered as
//! `sqrt(theta) * V` at time `theta * t / lambda^2`.

use crate::error::{Error, Result};
use crate::noise::{Channel, NoiseStream};
use rand::Rng;
use rand_distr::StandardNormal;

pub const DEFAULT_RADIUS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    components: Vec<f64>,
}

impl StateVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::InvalidDimension {
                dim: components.len(),
                min: 2,
            });
        }
        if components.iter().any(|x| !x.is_finite()) {
            return Err(Error::contract("state has non-finite components"));
        }
        Ok(StateVector { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.components
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.components
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.components)
    }

    /// `|V|^2 - D`, the drift away from the reduced-unit sphere.
    pub fn radius_drift(&self) -> f64 {
        self.norm_sq() - self.dim() as f64
    }

    pub fn on_sphere(&self, tol: f64) -> bool {
        self.radius_drift().abs() <= tol * self.dim() as f64
    }
}

impl std::ops::Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.components[i]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Rescales `v` in place onto the sphere of radius `sqrt(radius_sq)`.
pub fn rescale_to(v: &mut [f64], radius_sq: f64) {
    let n = norm_sq(v);
    if n > 0.0 {
        let f = (radius_sq / n).sqrt();
        v.iter_mut().for_each(|x| *x *= f);
    }
}

/// Normalizes a raw Gaussian draw onto the sphere of radius `sqrt(radius_sq)`.
pub fn project_to_sphere(draw: &[f64], radius_sq: f64) -> Result<StateVector> {
    if norm_sq(draw) == 0.0 {
        return Err(Error::SingularState);
    }
    let mut v = draw.to_vec();
    rescale_to(&mut v, radius_sq);
    StateVector::new(v)
}

fn gaussian_vector(dim: usize, noise: &NoiseStream, channel: Channel) -> Vec<f64> {
    let mut rng = noise.rng(channel, 0);
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform sample on the sphere of radius `sqrt(dim)`.
pub fn sample_uniform_sphere(dim: usize, noise: &NoiseStream) -> Result<StateVector> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    let draw = gaussian_vector(dim, noise, Channel::Initial(0));
    project_to_sphere(&draw, dim as f64)
}

/// Law of the untagged components on the residual sphere.
///
/// Any exchangeable law is admissible; `UniformBath` is the default.
pub trait BathLaw: Sync {
    fn sample(&self, dim: usize, radius_sq: f64, noise: &NoiseStream) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformBath;

impl BathLaw for UniformBath {
    fn sample(&self, dim: usize, radius_sq: f64, noise: &NoiseStream) -> Vec<f64> {
        let mut v = gaussian_vector(dim, noise, Channel::Initial(1));
        rescale_to(&mut v, radius_sq);
        v
    }
}

/// Equal-magnitude components with independent fair signs.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomSignBath;

impl BathLaw for RandomSignBath {
    fn sample(&self, dim: usize, radius_sq: f64, noise: &NoiseStream) -> Vec<f64> {
        let mag = (radius_sq / dim as f64).sqrt();
        let mut rng = noise.rng(Channel::Initial(2), 0);
        (0..dim)
            .map(|_| if rng.random::<bool>() { mag } else { -mag })
            .collect()
    }
}

/// State whose first `c.len()` components equal `c`, with the rest drawn
/// uniformly on the residual sphere of radius `sqrt(D - |c|^2)`.
pub fn make_initial_state(c: &[f64], dim: usize, noise: &NoiseStream) -> Result<StateVector> {
    make_initial_state_with(c, dim, noise, &UniformBath)
}

pub fn make_initial_state_with(
    c: &[f64],
    dim: usize,
    noise: &NoiseStream,
    bath: &dyn BathLaw,
) -> Result<StateVector> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    if c.len() > dim {
        return Err(Error::contract(format!(
            "{} tagged values for dimension {dim}",
            c.len()
        )));
    }
    let c_sq = norm_sq(c);
    let d = dim as f64;
    if c_sq > d * (1.0 + 1e-12) {
        return Err(Error::InfeasibleInitialData {
            norm_sq: c_sq,
            radius_sq: d,
        });
    }
    let residual = (d - c_sq).max(0.0);
    let mut v = c.to_vec();
    let rest = dim - c.len();
    if rest > 0 {
        if residual > 0.0 {
            v.extend(bath.sample(rest, residual, noise));
        } else {
            v.extend(std::iter::repeat_n(0.0, rest));
        }
    }
    StateVector::new(v)
}

/// `sigma(V) W = W - V (V.W) / |V|^2`, the projection onto the tangent
/// hyperplane at `V`.
pub fn project_tangent(v: &StateVector, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != v.dim() {
        return Err(Error::contract("vector length differs from state dimension"));
    }
    let mut out = vec![0.0; w.len()];
    project_tangent_into(v.components(), w, &mut out)?;
    Ok(out)
}

pub fn project_tangent_into(v: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
    let q = norm_sq(v);
    if q == 0.0 {
        return Err(Error::SingularState);
    }
    let f = dot(v, w) / q;
    for ((o, &wi), &vi) in out.iter_mut().zip(w).zip(v) {
        *o = wi - f * vi;
    }
    Ok(())
}
