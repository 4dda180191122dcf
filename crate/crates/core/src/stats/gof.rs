//! Goodness-of-fit tests: one- and two-sample Kolmogorov-Smirnov with
//! asymptotic p-values, and a chi-square test of counts against a Poisson law.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::error::{Error, Result};

pub const MIN_KS_SAMPLES: usize = 20;

/// Standard deviation of the limiting Kolmogorov distribution.
pub const KOLMOGOROV_SD: f64 = 0.260_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size used for the p-value.
    pub effective_n: f64,
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // small-lambda form: 1 - sqrt(2 pi)/lambda sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let y = -pi2 / (8.0 * lambda * lambda);
        let s: f64 = (1..=6)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (m * m * y).exp()
            })
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-17 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

fn ks_p_value(statistic: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_survival((sq + 0.12 + 0.11 / sq) * statistic)
}

/// Two-sided one-sample KS test of `samples` against a continuous `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.len() < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            min: MIN_KS_SAMPLES,
        });
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (k, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = k as f64 / n;
        let hi = (k + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
        effective_n: n,
    })
}

/// Two-sided two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let min = a.len().min(b.len());
    if min < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples {
            got: min,
            min: MIN_KS_SAMPLES,
        });
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n_eff),
        effective_n: n_eff,
    })
}

/// Null-distribution standard error of a two-sample KS distance.
pub fn ks_two_sample_se(na: usize, nb: usize) -> f64 {
    KOLMOGOROV_SD * (1.0 / na as f64 + 1.0 / nb as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Cells as `(first count, last count or None for the open tail, observed, expected)`.
    pub cells: Vec<(u64, Option<u64>, u64, f64)>,
}

/// Pearson chi-square test of i.i.d. counts against `Poisson(mean)`.
///
/// Consecutive count values are pooled until each cell expects at least five
/// observations; the last cell is the open upper tail.
pub fn poisson_chi_square(counts: &[u64], mean: f64) -> Result<ChiSquareResult> {
    let law = Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?;
    let n = counts.len() as f64;
    if counts.len() < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples {
            got: counts.len(),
            min: MIN_KS_SAMPLES,
        });
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut observed = vec![0u64; max as usize + 1];
    for &c in counts {
        observed[c as usize] += 1;
    }
    let obs_at = |k: u64| observed.get(k as usize).copied().unwrap_or(0);

    // closed cells [start, k] while the remaining tail can still fill a cell
    let mut cells: Vec<(u64, Option<u64>, u64, f64)> = Vec::new();
    let mut start = 0u64;
    let mut acc_p = 0.0;
    let mut acc_o = 0u64;
    let mut below = 0.0;
    let mut k = 0u64;
    loop {
        acc_p += law.pmf(k);
        acc_o += obs_at(k);
        let tail_p = (1.0 - below - acc_p).max(0.0);
        if n * acc_p >= 5.0 && n * tail_p >= 5.0 {
            cells.push((start, Some(k), acc_o, n * acc_p));
            below += acc_p;
            start = k + 1;
            acc_p = 0.0;
            acc_o = 0;
        } else if n * tail_p < 5.0 {
            break;
        }
        k += 1;
    }
    let tail_o: u64 = counts.iter().filter(|&&c| c >= start).count() as u64;
    let tail_e = n * (1.0 - below).max(0.0);
    cells.push((start, None, tail_o, tail_e));
    if cells.len() < 2 {
        return Err(Error::Domain("not enough mass for two chi-square cells".into()));
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(_, _, o, e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = cells.len() - 1;
    let p_value = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(statistic);
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{Channel, NoiseStream};
    use rand::Rng;
    use rand_distr::{Distribution, Poisson as PoissonSampler};
    use statrs::distribution::Normal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let s = NoiseStream::new(seed, 0);
        (0..n as u64).map(|k| s.gaussian(Channel::Brownian(0), k)).collect()
    }

    #[test]
    fn kolmogorov_survival_reference_points() {
        // classic critical values: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        // both series agree where they meet
        let a = kolmogorov_survival(1.18 - 1e-9);
        let b = kolmogorov_survival(1.18 + 1e-9);
        assert!((a - b).abs() < 1e-8);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn null_calibration() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let r = ks_test(&normals(10_000, 1), |x| normal.cdf(x)).unwrap();
        assert!(r.p_value > 0.001, "p = {}", r.p_value);
    }

    #[test]
    fn constant_samples_are_rejected() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let r = ks_test(&[0.3; 50], |x| normal.cdf(x)).unwrap();
        assert!(r.statistic >= 0.5);
    }

    #[test]
    fn location_shift_is_detected() {
        let shifted = Normal::new(1.0, 1.0).unwrap();
        let r = ks_test(&normals(1000, 2), |x| shifted.cdf(x)).unwrap();
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            ks_test(&[0.0; 19], |x| x),
            Err(Error::TooFewSamples { got: 19, min: 20 })
        ));
    }

    #[test]
    fn two_sample_same_and_shifted() {
        let a = normals(5000, 3);
        let b = normals(5000, 4);
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.001);
        let c: Vec<f64> = b.iter().map(|x| x + 0.3).collect();
        assert!(ks_two_sample(&a, &c).unwrap().p_value < 1e-6);
        let self_d = ks_two_sample(&a, &a).unwrap();
        assert_eq!(self_d.statistic, 0.0);
    }

    #[test]
    fn poisson_chi_square_accepts_poisson_and_rejects_shift() {
        let mut rng = NoiseStream::new(5, 0).rng(Channel::Independent(0), 0);
        let law = PoissonSampler::new(3.0).unwrap();
        let counts: Vec<u64> = (0..5000).map(|_| law.sample(&mut rng) as u64).collect();
        let r = poisson_chi_square(&counts, 3.0).unwrap();
        assert!(r.p_value > 0.001, "{r:?}");
        let total_e: f64 = r.cells.iter().map(|c| c.3).sum();
        assert!((total_e - 5000.0).abs() < 1e-6);
        assert!(r.cells.iter().all(|c| c.3 >= 5.0));
        let r = poisson_chi_square(&counts, 3.4).unwrap();
        assert!(r.p_value < 1e-6);
        let _ = rng.random::<f64>();
    }
}
