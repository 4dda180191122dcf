use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running count, mean and centered second moment (Welford / Chan).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        m
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean - self.mean;
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean, `sample std / sqrt(M)`.
    pub fn se(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Running co-moment of a pair of channels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoMoments {
    pub count: u64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub c: f64,
}

impl CoMoments {
    pub fn push(&mut self, x: f64, y: f64) {
        self.count += 1;
        let n = self.count as f64;
        let dx = x - self.mean_x;
        self.mean_x += dx / n;
        self.mean_y += (y - self.mean_y) / n;
        self.c += dx * (y - self.mean_y);
    }

    pub fn merge(&mut self, other: &CoMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let (na, nb) = (self.count as f64, other.count as f64);
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        self.mean_x += dx * nb / n;
        self.mean_y += dy * nb / n;
        self.c += other.c + dx * dy * na * nb / n;
        self.count += other.count;
    }

    pub fn covariance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.c / (self.count - 1) as f64
        }
    }
}

/// Time-indexed ensemble estimates for a fixed set of named channels and
/// channel pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub channels: Vec<String>,
    pub pairs: Vec<(usize, usize)>,
    /// `moments[k][c]`: channel `c` at time `times[k]`.
    pub moments: Vec<Vec<Moments>>,
    /// `comoments[k][p]`: pair `pairs[p]` at time `times[k]`.
    pub comoments: Vec<Vec<CoMoments>>,
}

impl EnsembleSummary {
    pub fn new(times: Vec<f64>, channels: Vec<String>, pairs: Vec<(usize, usize)>) -> Self {
        let k = times.len();
        EnsembleSummary {
            moments: vec![vec![Moments::default(); channels.len()]; k],
            comoments: vec![vec![CoMoments::default(); pairs.len()]; k],
            times,
            channels,
            pairs,
        }
    }

    /// Records one trajectory's channel values at grid point `k`.
    pub fn record(&mut self, k: usize, values: &[f64]) {
        for (m, &x) in self.moments[k].iter_mut().zip(values) {
            m.push(x);
        }
        for (c, &(i, j)) in self.comoments[k].iter_mut().zip(&self.pairs) {
            c.push(values[i], values[j]);
        }
    }

    pub fn merge(&mut self, other: &EnsembleSummary) -> Result<()> {
        if self.times != other.times || self.channels != other.channels || self.pairs != other.pairs {
            return Err(Error::contract("cannot merge summaries with different layouts"));
        }
        for (a, b) in self.moments.iter_mut().zip(&other.moments) {
            a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
        }
        for (a, b) in self.comoments.iter_mut().zip(&other.comoments) {
            a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
        }
        Ok(())
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    /// Mean and standard error of a channel over the grid.
    pub fn series(&self, channel: usize) -> (Vec<f64>, Vec<f64>) {
        self.moments
            .iter()
            .map(|row| (row[channel].mean, row[channel].se()))
            .unzip()
    }

    pub fn count(&self) -> u64 {
        self.moments
            .first()
            .and_then(|r| r.first())
            .map_or(0, |m| m.count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn moments_match_two_pass() {
        let xs = [1.0, 4.0, -2.0, 3.5, 0.25];
        let m = Moments::from_slice(&xs);
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(close(m.mean, mean));
        assert!(close(m.variance(), var));
        assert!(close(m.se(), (var / 5.0).sqrt()));
    }

    fn summary_of(rows: &[(f64, f64)]) -> EnsembleSummary {
        let mut s = EnsembleSummary::new(vec![0.0], vec!["x".into(), "y".into()], vec![(0, 1)]);
        for &(x, y) in rows {
            s.record(0, &[x, y]);
        }
        s
    }

    proptest! {
        #[test]
        fn merge_is_associative_and_commutative(
            a in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..20),
            b in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..20),
            c in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..20),
        ) {
            let (sa, sb, sc) = (summary_of(&a), summary_of(&b), summary_of(&c));
            let mut left = sa.clone();
            left.merge(&sb).unwrap();
            left.merge(&sc).unwrap();
            let mut bc = sb.clone();
            bc.merge(&sc).unwrap();
            let mut right = sa.clone();
            right.merge(&bc).unwrap();
            let mut swapped = sc.clone();
            swapped.merge(&sa).unwrap();
            swapped.merge(&sb).unwrap();
            let all: Vec<_> = a.iter().chain(&b).chain(&c).copied().collect();
            let direct = summary_of(&all);
            for s in [&left, &right, &swapped] {
                for ch in 0..2 {
                    prop_assert_eq!(s.moments[0][ch].count, direct.moments[0][ch].count);
                    prop_assert!(close(s.moments[0][ch].mean, direct.moments[0][ch].mean));
                    prop_assert!(close(s.moments[0][ch].m2, direct.moments[0][ch].m2));
                }
                prop_assert!(close(s.comoments[0][0].c, direct.comoments[0][0].c));
            }
        }
    }

    #[test]
    fn merge_rejects_layout_mismatch() {
        let mut a = EnsembleSummary::new(vec![0.0], vec!["x".into()], vec![]);
        let b = EnsembleSummary::new(vec![0.0, 1.0], vec!["x".into()], vec![]);
        assert!(a.merge(&b).is_err());
    }
}
