//! Quadratic covariation of the martingale part of a recorded path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::Trajectory;

/// Cumulative `sum dM_i dM_j` and `int sigma_ij(V) dt` on a path's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariationSeries {
    pub times: Vec<f64>,
    pub empirical: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// `sigma_ij(V) = delta_ij - V_i V_j / |V|^2`.
pub fn sigma_entry(v: &[f64], i: usize, j: usize) -> f64 {
    let q: f64 = v.iter().map(|x| x * x).sum();
    let delta = if i == j { 1.0 } else { 0.0 };
    delta - v[i] * v[j] / q
}

/// Needs a trajectory recorded at every step with martingale increments.
pub fn quadratic_covariation(traj: &Trajectory, i: usize, j: usize) -> Result<CovariationSeries> {
    let mart = traj
        .martingale
        .as_ref()
        .ok_or_else(|| Error::contract("trajectory has no stored martingale increments"))?;
    if mart.len() + 1 != traj.states.len() {
        return Err(Error::contract("martingale record does not match the time grid"));
    }
    let dim = traj.states[0].dim();
    if i >= dim || j >= dim {
        return Err(Error::contract(format!("index out of range for dimension {dim}")));
    }
    let n = traj.states.len();
    let mut empirical = Vec::with_capacity(n);
    let mut predicted = Vec::with_capacity(n);
    let (mut e, mut p) = (0.0, 0.0);
    empirical.push(0.0);
    predicted.push(0.0);
    let mut prev = sigma_entry(traj.states[0].components(), i, j);
    for k in 1..n {
        e += mart[k - 1][i] * mart[k - 1][j];
        let cur = sigma_entry(traj.states[k].components(), i, j);
        p += 0.5 * (prev + cur) * (traj.times[k] - traj.times[k - 1]);
        prev = cur;
        empirical.push(e);
        predicted.push(p);
    }
    Ok(CovariationSeries {
        times: traj.times.clone(),
        empirical,
        predicted,
    })
}
