//! Estimators and distributional tests.

pub mod chaos;
pub mod covariation;
pub mod gof;
pub mod marginal;
pub mod summary;

pub use chaos::{chaos_metric, ChaosReport};
pub use covariation::{quadratic_covariation, CovariationSeries};
pub use gof::{ks_test, ks_two_sample, ks_two_sample_se, poisson_chi_square, ChiSquareResult, KsResult};
pub use marginal::{lift_phi, nu_density, MarginalLaw};
pub use summary::{CoMoments, EnsembleSummary, Moments};

use crate::coupling::OUParams;

/// Mean and variance of the OU process `dX = alpha dB - beta X dt` started at
/// `c`, at time `t`.
pub fn ou_baseline(c: f64, t: f64, params: OUParams) -> (f64, f64) {
    let OUParams { alpha, beta } = params;
    let mean = c * (-beta * t).exp();
    let var = alpha * alpha * (-(-2.0 * beta * t).exp_m1()) / (2.0 * beta);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_baseline_values() {
        let p = OUParams::default();
        assert_eq!(ou_baseline(0.7, 0.0, p), (0.7, 0.0));
        let (m, v) = ou_baseline(1.0, 2.0, p);
        assert!((m - (-1f64).exp()).abs() < 1e-15);
        assert!((v - (1.0 - (-2f64).exp())).abs() < 1e-15);
        assert!((m - 0.36788).abs() < 1e-5 && (v - 0.86466).abs() < 1e-5);
        let (m, v) = ou_baseline(3.0, 1e3, p);
        assert!(m.abs() < 1e-100 && (v - 1.0).abs() < 1e-15);
    }
}
