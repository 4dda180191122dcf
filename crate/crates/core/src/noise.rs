//! Counter-based randomness.
//!
//! Every random number used by a simulation is addressed by
//! `(seed, trajectory, channel, step)`. The address is hashed into the seed of
//! a tiny generator from which the value is drawn, so a value never depends on
//! how many other values were drawn before it or on which thread asked for
//! it. Two processes that read the same address see the same number; that is
//! how the sphere process and its Ornstein-Uhlenbeck reference share `B_k`.

use rand::{Rng, SeedableRng};
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};
use rand_xoshiro::SplitMix64;

/// A family of independent random channels.
///
/// `Brownian(k)` is the driver `B_k` of component `k`. The other families are
/// reserved for the rotation generators, the aggregated bath of the
/// tagged-block engine, the jump clocks, initial-state sampling and
/// independent control drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Brownian(usize),
    /// Rotation generator `Omega_ij` for the pair with lexicographic index `p`.
    Rotation(usize),
    /// Component of a bath increment along the current bath direction.
    BathRadial,
    /// Squared norm of the bath increment orthogonal to the bath direction.
    BathTangential,
    /// Center-of-mass driver `W_N` (component 0..3) of the momentum model.
    CenterOfMass(usize),
    /// Driver independent of every sphere channel (negative controls).
    Independent(usize),
    Initial(usize),
    JumpClock,
    JumpPair,
    JumpAngle,
}

impl Channel {
    fn code(self) -> u64 {
        let (family, index) = match self {
            Channel::Brownian(k) => (1u64, k as u64),
            Channel::Rotation(p) => (2, p as u64),
            Channel::BathRadial => (3, 0),
            Channel::BathTangential => (3, 1),
            Channel::CenterOfMass(k) => (4, k as u64),
            Channel::Independent(k) => (5, k as u64),
            Channel::Initial(k) => (6, k as u64),
            Channel::JumpClock => (7, 0),
            Channel::JumpPair => (7, 1),
            Channel::JumpAngle => (7, 2),
        };
        (family << 56) ^ index
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STEP_MUL: u64 = 0x9e37_79b9_7f4a_7c15;
const CHANNEL_MUL: u64 = 0xd1b5_4a32_d192_ed03;

/// Reproducible source of Gaussian increments, uniforms and waiting times for
/// one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
    trajectory: u64,
    base: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        let base = mix64(mix64(seed ^ 0x5eed_5eed_5eed_5eed) ^ trajectory.wrapping_mul(STEP_MUL));
        NoiseStream {
            seed,
            trajectory,
            base,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trajectory(&self) -> u64 {
        self.trajectory
    }

    /// View of the same seed for another trajectory.
    pub fn for_trajectory(&self, trajectory: u64) -> Self {
        NoiseStream::new(self.seed, trajectory)
    }

    /// The generator for one address. Use this when a single address needs
    /// more than one draw (e.g. a whole initial vector).
    pub fn rng(&self, channel: Channel, step: u64) -> SplitMix64 {
        self.at_step(step).rng(channel)
    }

    pub fn at_step(&self, step: u64) -> StepNoise {
        StepNoise {
            key: mix64(self.base ^ step.wrapping_mul(STEP_MUL)),
        }
    }

    pub fn gaussian(&self, channel: Channel, step: u64) -> f64 {
        self.at_step(step).gaussian(channel)
    }

    /// Brownian increment with variance `dt`.
    pub fn increment(&self, channel: Channel, step: u64, dt: f64) -> f64 {
        dt.sqrt() * self.gaussian(channel, step)
    }

    pub fn uniform(&self, channel: Channel, step: u64) -> f64 {
        self.at_step(step).uniform(channel)
    }

    /// Exponential waiting time with the given rate.
    pub fn exponential(&self, channel: Channel, step: u64, rate: f64) -> f64 {
        let e: f64 = self.rng(channel, step).sample(Exp1);
        e / rate
    }
}

/// All channels of one `(seed, trajectory, step)` triple.
#[derive(Debug, Clone, Copy)]
pub struct StepNoise {
    key: u64,
}

impl StepNoise {
    #[inline]
    pub fn rng(&self, channel: Channel) -> SplitMix64 {
        SplitMix64::seed_from_u64(mix64(self.key ^ channel.code().wrapping_mul(CHANNEL_MUL)))
    }

    #[inline]
    pub fn gaussian(&self, channel: Channel) -> f64 {
        self.rng(channel).sample(StandardNormal)
    }

    #[inline]
    pub fn uniform(&self, channel: Channel) -> f64 {
        self.rng(channel).random::<f64>()
    }

    /// Chi-square variate with `dof` degrees of freedom (zero when `dof == 0`).
    pub fn chi_square(&self, channel: Channel, dof: usize) -> f64 {
        if dof == 0 {
            return 0.0;
        }
        let law = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        law.sample(&mut self.rng(channel))
    }

    /// Fills `out[k]` with the increment of `Brownian(channels[k])`.
    pub fn brownian_increments(&self, channels: &[usize], dt: f64, out: &mut [f64]) {
        let scale = dt.sqrt();
        for (o, &k) in out.iter_mut().zip(channels) {
            *o = scale * self.gaussian(Channel::Brownian(k));
        }
    }

    /// Fills `out[k]` with the increment of `Brownian(k)` for `k in 0..out.len()`.
    pub fn brownian_block(&self, dt: f64, out: &mut [f64]) {
        let scale = dt.sqrt();
        for (k, o) in out.iter_mut().enumerate() {
            *o = scale * self.gaussian(Channel::Brownian(k));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_address_same_value() {
        let a = NoiseStream::new(7, 3);
        let b = NoiseStream::new(7, 3);
        for step in 0..50 {
            for k in 0..5 {
                let ch = Channel::Brownian(k);
                assert_eq!(a.gaussian(ch, step).to_bits(), b.gaussian(ch, step).to_bits());
            }
        }
    }

    #[test]
    fn block_matches_single_channel_access() {
        let s = NoiseStream::new(11, 0);
        let mut block = vec![0.0; 8];
        s.at_step(42).brownian_block(0.25, &mut block);
        for (k, &x) in block.iter().enumerate() {
            assert_eq!(x, s.increment(Channel::Brownian(k), 42, 0.25));
        }
        let mut picked = vec![0.0; 2];
        s.at_step(42).brownian_increments(&[5, 2], 0.25, &mut picked);
        assert_eq!(picked, vec![block[5], block[2]]);
    }

    #[test]
    fn addresses_differ() {
        let s = NoiseStream::new(1, 0);
        let x = s.gaussian(Channel::Brownian(0), 0);
        assert_ne!(x, s.gaussian(Channel::Brownian(1), 0));
        assert_ne!(x, s.gaussian(Channel::Brownian(0), 1));
        assert_ne!(x, s.for_trajectory(1).gaussian(Channel::Brownian(0), 0));
        assert_ne!(x, NoiseStream::new(2, 0).gaussian(Channel::Brownian(0), 0));
        assert_ne!(x, s.gaussian(Channel::Independent(0), 0));
    }

    #[test]
    fn gaussian_moments_and_channel_independence() {
        let s = NoiseStream::new(2024, 5);
        let n = 200_000u64;
        let (mut m, mut v, mut c) = (0.0, 0.0, 0.0);
        for step in 0..n {
            let x = s.gaussian(Channel::Brownian(0), step);
            let y = s.gaussian(Channel::Brownian(1), step);
            m += x;
            v += x * x;
            c += x * y;
        }
        let nf = n as f64;
        let se = 1.0 / nf.sqrt();
        assert!((m / nf).abs() < 4.0 * se);
        assert!((v / nf - 1.0).abs() < 4.0 * 2f64.sqrt() * se);
        assert!((c / nf).abs() < 4.0 * se);
    }

    #[test]
    fn exponential_and_chi_square_means() {
        let s = NoiseStream::new(9, 0);
        let n = 100_000u64;
        let mean_exp: f64 =
            (0..n).map(|k| s.exponential(Channel::JumpClock, k, 4.0)).sum::<f64>() / n as f64;
        assert!((mean_exp - 0.25).abs() < 4.0 * 0.25 / (n as f64).sqrt());
        let mean_chi: f64 = (0..n)
            .map(|k| s.at_step(k).chi_square(Channel::BathTangential, 7))
            .sum::<f64>()
            / n as f64;
        assert!((mean_chi - 7.0).abs() < 4.0 * (14.0f64 / n as f64).sqrt());
        assert_eq!(s.at_step(0).chi_square(Channel::BathTangential, 0), 0.0);
    }
}
