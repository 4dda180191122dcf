//! Counter-based noise: every draw is addressed by (seed, trajectory,
//! channel, step), so paths replay exactly and can share channels.
//!
//!     cargo run --release --example noise_streams

use sphere_lab::noise::{Channel, NoiseStream};

fn main() {
    let a = NoiseStream::new(7, 0);
    let b = NoiseStream::new(7, 0);
    let dt = 1e-2;
    let x: Vec<f64> = (0..5).map(|k| a.increment(Channel::Brownian(0), k, dt)).collect();
    // Read in a different order, same values.
    let y: Vec<f64> = (0..5).rev().map(|k| b.increment(Channel::Brownian(0), k, dt)).collect();
    println!("forward  {x:+.4?}");
    println!("reversed {y:+.4?}");

    let other = a.for_trajectory(1);
    println!("trajectory 1 {:+.4}", other.increment(Channel::Brownian(0), 0, dt));
    println!("independent channel {:+.4}", a.increment(Channel::Independent(0), 0, dt));
}
