//! One-coordinate marginal `nu_N` of the uniform law on the sphere of radius
//! `sqrt(N)`, and the lift `phi_N` that rebuilds a point of that sphere from a
//! point of the `(N-1)`-sphere and one coordinate.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::state::StateVector;

/// `ln(|S^{N-2}| / |S^{N-1}|) = ln Gamma(N/2) - ln Gamma((N-1)/2) - ln(pi)/2`.
pub fn log_sphere_ratio(n: usize) -> f64 {
    let n = n as f64;
    ln_gamma(n / 2.0) - ln_gamma((n - 1.0) / 2.0) - 0.5 * std::f64::consts::PI.ln()
}

/// Density of `nu_N` at `y`; zero outside `[-sqrt(N), sqrt(N)]`.
///
/// Panics if `n < 2`.
pub fn nu_density(y: f64, n: usize) -> f64 {
    assert!(n >= 2, "nu_N needs N >= 2");
    let nf = n as f64;
    let base = 1.0 - y * y / nf;
    if base < 0.0 {
        return 0.0;
    }
    let exponent = (nf - 3.0) / 2.0;
    let ln_pow = if exponent == 0.0 { 0.0 } else { exponent * base.ln() };
    (log_sphere_ratio(n) + ln_pow - 0.5 * nf.ln()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalLaw {
    n: usize,
    ratio: f64,
}

impl MarginalLaw {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension { dim: n, min: 2 });
        }
        Ok(MarginalLaw {
            n,
            ratio: log_sphere_ratio(n).exp(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    pub fn density(&self, y: f64) -> f64 {
        nu_density(y, self.n)
    }

    /// `ratio * int_0^phi cos^{N-2}`, the mass between `0` and `sqrt(N) sin(phi)`.
    fn half_mass(&self, phi: f64) -> f64 {
        if phi == 0.0 {
            return 0.0;
        }
        let p = self.n as i32 - 2;
        let out = quadrature::double_exponential::integrate(|s: f64| s.cos().powi(p), 0.0, phi, 1e-14);
        self.ratio * out.integral
    }

    /// CDF by quadrature after the substitution `y = sqrt(N) sin(phi)`, which
    /// turns the density into the smooth `ratio * cos^{N-2}(phi)`.
    pub fn cdf(&self, y: f64) -> f64 {
        let r = self.half_width();
        if y <= -r {
            return 0.0;
        }
        if y >= r {
            return 1.0;
        }
        let phi = (y / r).asin();
        let half = self.half_mass(phi.abs());
        (if y >= 0.0 { 0.5 + half } else { 0.5 - half }).clamp(0.0, 1.0)
    }

    /// Total mass, which should be one.
    pub fn normalization(&self) -> f64 {
        2.0 * self.half_mass(std::f64::consts::FRAC_PI_2)
    }

    /// Inverse CDF by bisection.
    pub fn quantile(&self, u: f64) -> f64 {
        let r = self.half_width();
        let (mut lo, mut hi) = (-r, r);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 * r {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Scaling `s_N(y) = sqrt((N - y^2) / (N - 1))`.
pub fn lift_scale(y: f64, n: usize) -> f64 {
    let nf = n as f64;
    ((nf - y * y).max(0.0) / (nf - 1.0)).sqrt()
}

/// `phi_N(u, y) = (s_N(y) u, y)` for `u` on the sphere of radius `sqrt(N-1)`.
pub fn lift_phi(u: &StateVector, y: f64) -> Result<StateVector> {
    let n = u.dim() + 1;
    let nf = n as f64;
    if (u.norm_sq() - (nf - 1.0)).abs() > 1e-8 * nf {
        return Err(Error::contract(format!(
            "lift needs |u|^2 = {}, got {}",
            nf - 1.0,
            u.norm_sq()
        )));
    }
    if y.abs() > nf.sqrt() * (1.0 + 1e-15) {
        return Err(Error::Domain(format!("|y| = {} exceeds sqrt(N)", y.abs())));
    }
    let s = lift_scale(y, n);
    let mut out: Vec<f64> = u.components().iter().map(|x| s * x).collect();
    out.push(y);
    StateVector::new(out)
}
