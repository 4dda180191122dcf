use proptest::prelude::*;

use sphere_lab::config::{IntegratorKind, Renorm, SimConfig};
use sphere_lab::experiment::{Format, Table};
use sphere_lab::kac::{simulate_kac, AngleLaw, ClockConvention, JumpConfig};
use sphere_lab::momentum::{
    gram_schmidt_forward, gram_schmidt_inverse, reduced_initial, state_from_reduced, step_momentum, Manifold,
};
use sphere_lab::noise::{Channel, NoiseStream};
use sphere_lab::sphere::{givens, simulate_path};
use sphere_lab::state::{make_initial_state, project_tangent, sample_uniform_sphere, StateVector, UniformBath};
use sphere_lab::stats::lift_phi;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projector_is_symmetric_and_idempotent(
        v in prop::collection::vec(-3.0f64..3.0, 2..12),
        seed in any::<u64>(),
    ) {
        prop_assume!(dot(&v, &v) > 1e-3);
        let d = v.len();
        let noise = NoiseStream::new(seed, 0);
        let w: Vec<f64> = (0..d).map(|k| noise.gaussian(Channel::Independent(k), 0)).collect();
        let z: Vec<f64> = (0..d).map(|k| noise.gaussian(Channel::Independent(k), 1)).collect();
        let sv = StateVector::new(v).unwrap();
        let pw = project_tangent(&sv, &w).unwrap();
        let pz = project_tangent(&sv, &z).unwrap();
        let scale = dot(&w, &w).sqrt() * dot(&z, &z).sqrt();
        prop_assert!((dot(&pw, &z) - dot(&w, &pz)).abs() <= 1e-12 * scale.max(1.0));
        let ppw = project_tangent(&sv, &pw).unwrap();
        for (a, b) in ppw.iter().zip(&pw) {
            prop_assert!((a - b).abs() <= 1e-12 * dot(&w, &w).sqrt().max(1.0));
        }
    }

    #[test]
    fn givens_is_an_isometry(v in prop::collection::vec(-5.0f64..5.0, 2..20), theta in -10.0f64..10.0, a in 0usize..20, b in 0usize..20) {
        let d = v.len();
        let (i, j) = (a % d, b % d);
        prop_assume!(i != j);
        let mut w = v.clone();
        givens(&mut w, i, j, theta);
        let n0 = dot(&v, &v);
        prop_assert!((dot(&w, &w) - n0).abs() <= 1e-13 * n0.max(1.0));
    }

    #[test]
    fn rotation_paths_conserve_radius(dim in 2usize..12, seed in any::<u64>()) {
        let config = SimConfig {
            dimension: dim,
            dt: 0.01,
            horizon: 0.2,
            integrator: IntegratorKind::Rotation,
            renorm: Renorm::None,
            seed,
            ..SimConfig::default()
        };
        let noise = NoiseStream::new(seed, 0);
        let v0 = sample_uniform_sphere(dim, &noise).unwrap();
        let path = simulate_path(&config, &v0, &noise).unwrap();
        prop_assert!(path.max_radius_drift() <= 1e-10 * dim as f64);
    }

    #[test]
    fn jumps_conserve_energy(dim in 2usize..12, seed in any::<u64>(), eps in 0.05f64..1.0, triangular in any::<bool>()) {
        let config = JumpConfig {
            epsilon: eps,
            dim,
            horizon: 0.5,
            angle_law: if triangular { AngleLaw::Triangular } else { AngleLaw::Uniform },
            seed,
            event_budget: u64::MAX,
            clock: ClockConvention::VarianceMatched,
        };
        let noise = NoiseStream::new(seed, 1);
        let v0 = sample_uniform_sphere(dim, &noise).unwrap();
        let path = simulate_kac(&config, &v0, &noise).unwrap();
        prop_assert!(path.max_energy_drift <= 1e-10 * dim as f64);
        prop_assert_eq!(path.pair_counts.iter().sum::<u64>() as usize, path.events.len());
    }

    #[test]
    fn replay_is_bit_identical(dim in 2usize..8, seed in any::<u64>(), kind in 0usize..3) {
        let integrator = [IntegratorKind::ItoEm, IntegratorKind::StratHeun, IntegratorKind::Rotation][kind];
        let config = SimConfig {
            dimension: dim,
            dt: 0.01,
            horizon: 0.1,
            integrator,
            seed,
            ..SimConfig::default()
        };
        let noise = NoiseStream::new(seed, 3);
        let v0 = make_initial_state(&[0.5], dim, &noise).unwrap();
        let a = simulate_path(&config, &v0, &noise).unwrap();
        let b = simulate_path(&config, &v0, &noise).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gram_schmidt_round_trip(n in 2usize..40, seed in any::<u64>()) {
        let noise = NoiseStream::new(seed, 0);
        let v: Vec<f64> = (0..3 * n).map(|k| noise.gaussian(Channel::Independent(k), 0)).collect();
        let s = gram_schmidt_forward(&v).unwrap();
        let back = gram_schmidt_inverse(&s).unwrap();
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        prop_assert!((dot(&s, &s) - dot(&v, &v)).abs() <= 1e-12 * dot(&v, &v).max(1.0));
    }

    #[test]
    fn momentum_steps_conserve_momentum(n in 3usize..30, seed in any::<u64>(), ux in -1.0f64..1.0) {
        let manifold = Manifold { particles: n, u0: [ux, 0.0, 0.5], eps0: 1.5 };
        let noise = NoiseStream::new(seed, 0);
        let reduced = reduced_initial(&manifold, &[[0.5, 0.0, 0.0]], &noise, &UniformBath).unwrap();
        let mut state = state_from_reduced(&manifold, &reduced).unwrap();
        let p0 = state.momentum();
        let dt = 1e-3;
        for step in 0..20u64 {
            let dw: Vec<f64> = (0..3 * n).map(|k| noise.increment(Channel::Brownian(k), step, dt)).collect();
            state = step_momentum(&state, &dw, dt).unwrap();
            let p = state.momentum();
            for g in 0..3 {
                prop_assert!((p[g] - p0[g]).abs() <= 1e-12 * n as f64);
            }
        }
    }

    #[test]
    fn lift_lands_on_the_sphere(n in 3usize..30, seed in any::<u64>(), frac in -1.0f64..1.0) {
        let u = sample_uniform_sphere(n - 1, &NoiseStream::new(seed, 0)).unwrap();
        let y = frac * (n as f64).sqrt();
        let out = lift_phi(&u, y).unwrap();
        prop_assert!((out.norm_sq() - n as f64).abs() <= 1e-10 * n as f64);
        prop_assert_eq!(out[n - 1], y);
    }

    #[test]
    fn tables_round_trip_through_disk(rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 3), 0..20)) {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("p", &["a", "b", "c"]);
        for r in rows {
            t.push(r);
        }
        for format in [Format::Csv, Format::Json] {
            t.write(dir.path(), format).unwrap();
            prop_assert_eq!(&Table::read(dir.path(), "p", format).unwrap(), &t);
        }
    }
}
