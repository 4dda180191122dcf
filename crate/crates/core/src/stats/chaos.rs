//! Independence of tagged components across an ensemble.

use serde::{Deserialize, Serialize};

use super::summary::{CoMoments, Moments};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosReport {
    pub covariance: Vec<Vec<f64>>,
    /// Largest `|cov_ij| / sqrt(cov_ii cov_jj)` over `i != j`.
    pub score: f64,
    /// Standard error of a sample correlation under independence, `1/sqrt(M)`.
    pub null_se: f64,
    pub samples: usize,
}

/// `samples[m]` holds the `d` tagged values of trajectory `m`.
pub fn chaos_metric(samples: &[Vec<f64>]) -> Result<ChaosReport> {
    let d = samples.first().map_or(0, Vec::len);
    if d < 2 {
        return Err(Error::contract("the chaos metric needs at least two tagged components"));
    }
    if samples.iter().any(|s| s.len() != d) {
        return Err(Error::contract("ragged tagged samples"));
    }
    let mut var = vec![Moments::default(); d];
    let mut cov = vec![vec![CoMoments::default(); d]; d];
    for s in samples {
        for i in 0..d {
            var[i].push(s[i]);
            for j in i + 1..d {
                cov[i][j].push(s[i], s[j]);
            }
        }
    }
    let mut covariance = vec![vec![0.0; d]; d];
    let mut score = 0.0f64;
    for i in 0..d {
        covariance[i][i] = var[i].variance();
        for j in i + 1..d {
            let c = cov[i][j].covariance();
            covariance[i][j] = c;
            covariance[j][i] = c;
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            let denom = (covariance[i][i] * covariance[j][j]).sqrt();
            let r = if denom > 0.0 { covariance[i][j] / denom } else { 0.0 };
            score = score.max(r.abs());
        }
    }
    Ok(ChaosReport {
        covariance,
        score,
        null_se: 1.0 / (samples.len() as f64).sqrt(),
        samples: samples.len(),
    })
}
