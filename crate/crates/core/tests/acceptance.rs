//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criterion 1 compares the ensemble second moment with the closed form
//! `D + (c^2 - D) e^{-t/D}`. That expression does not solve the moment
//! equation of the simulated process (whose solution is
//! `1 + (c^2 - 1) e^{-t}`), so the line is expected to read FAIL. It is
//! reported but not enforced; the comparison with the actual solution is
//! enforced instead.

use std::time::Instant;

use statrs::distribution::{ContinuousCDF, Normal};

use sphere_lab::config::{Engine, IntegratorKind, Renorm, SimConfig};
use sphere_lab::coupling::{exact_ev1sq, run_coupled, theory_ev1sq, OUParams};
use sphere_lab::ensemble::{map_chunks, run_tagged_ensemble};
use sphere_lab::experiment::{
    parse_spec, resolve, run_experiment, ExperimentKind, RunOptions, Table,
};
use sphere_lab::kac::diffusion_limit_report;
use sphere_lab::momentum::{
    compensated_noise_check, gram_schmidt_forward, gram_schmidt_inverse, reduced_initial, run_prop1,
    state_from_reduced, step_momentum, Manifold, Prop1Config,
};
use sphere_lab::noise::{Channel, NoiseStream};
use sphere_lab::sphere::simulate_path;
use sphere_lab::state::{make_initial_state, sample_uniform_sphere, UniformBath};
use sphere_lab::stats::{chaos_metric, ks_test, ks_two_sample, lift_phi, quadratic_covariation, MarginalLaw, Moments};
use sphere_lab::Result;

struct Outcome {
    pass: bool,
    detail: String,
    /// Whether a FAIL here fails the run.
    enforced: bool,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome {
        pass,
        detail,
        enforced: true,
    }
}

fn sim(dimension: usize, dt: f64, horizon: f64, ensemble: usize, seed: u64) -> SimConfig {
    SimConfig {
        dimension,
        dt,
        horizon,
        ensemble,
        seed,
        ..SimConfig::default()
    }
}

/// Largest `|x - y| / se` over grid points with `se > 0`, and whether every
/// point is within `k` SE.
fn max_z(mean: &[f64], se: &[f64], theory: &[f64], k: f64) -> (bool, f64) {
    let mut worst = 0.0f64;
    let mut ok = true;
    for i in 0..mean.len() {
        let gap = (mean[i] - theory[i]).abs();
        if gap > k * se[i] + 1e-12 * theory[i].abs().max(1.0) {
            ok = false;
        }
        if se[i] > 0.0 {
            worst = worst.max(gap / se[i]);
        }
    }
    (ok, worst)
}

fn moment_ode() -> Result<Outcome> {
    let mut printed_ok = true;
    let mut exact_ok = true;
    let mut parts = Vec::new();
    for (dim, engine) in [(10, Engine::Full), (100, Engine::TaggedBlock), (1000, Engine::TaggedBlock)] {
        let mut config = sim(dim, 1e-3, 5.0, 10_000, 100 + dim as u64);
        config.engine = engine;
        config.checkpoints = 10;
        let ens = run_tagged_ensemble(&config, &[1.0], 1)?;
        let s = &ens.summary;
        let (mean, se) = s.series(s.channel_index("v0_sq").expect("layout"));
        let printed: Vec<f64> = s.times.iter().map(|&t| theory_ev1sq(1.0, dim, t)).collect();
        let exact: Vec<f64> = s.times.iter().map(|&t| exact_ev1sq(1.0, t)).collect();
        let (p_ok, p_z) = max_z(&mean, &se, &printed, 3.0);
        let (e_ok, e_z) = max_z(&mean, &se, &exact, 3.0);
        printed_ok &= p_ok;
        exact_ok &= e_ok;
        parts.push(format!("D={dim}: closed form {p_z:.1} SE, exact solution {e_z:.2} SE"));
    }
    let detail = format!(
        "{}; exact-solution comparison {}",
        parts.join("; "),
        if exact_ok { "PASS" } else { "FAIL" }
    );
    if !exact_ok {
        return Ok(outcome(false, detail));
    }
    Ok(Outcome {
        pass: printed_ok,
        detail,
        enforced: false,
    })
}

fn gronwall() -> Result<Outcome> {
    let mut sups = Vec::new();
    let mut violations = 0;
    for dim in [100usize, 1000, 10_000] {
        let mut config = sim(dim, 1e-3, 1.0, 1000, 200 + dim as u64);
        config.engine = Engine::TaggedBlock;
        config.checkpoints = 20;
        let r = run_coupled(&config, &[1.0], OUParams::default(), 1)?;
        violations += r.bound_violations().len();
        sups.push(r.sup_msd());
    }
    let ratios: Vec<f64> = sups.windows(2).map(|w| w[0] / w[1]).collect();
    let ratio_ok = ratios.iter().all(|r| (5.0..=20.0).contains(r));
    Ok(outcome(
        violations == 0 && ratio_ok,
        format!(
            "{violations} grid points above bound + 3 SE; sup msd {:.3e} {:.3e} {:.3e}, decade ratios {:.2} {:.2}",
            sups[0], sups[1], sups[2], ratios[0], ratios[1]
        ),
    ))
}

fn representations() -> Result<Outcome> {
    let kinds = [IntegratorKind::ItoEm, IntegratorKind::StratHeun, IntegratorKind::Rotation];
    let mut samples = Vec::new();
    for (k, &integrator) in kinds.iter().enumerate() {
        let mut config = sim(10, 1e-4, 1.0, 10_000, 301 + k as u64);
        config.integrator = integrator;
        config.renorm = Renorm::PerStep;
        config.checkpoints = 1;
        let ens = run_tagged_ensemble(&config, &[1.0], 1)?;
        samples.push(ens.terminal.iter().map(|t| t[0]).collect::<Vec<f64>>());
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let r = ks_two_sample(&samples[a], &samples[b])?;
        pass &= r.p_value > 0.01;
        parts.push(format!("{:?}/{:?} p={:.3}", kinds[a], kinds[b], r.p_value));
    }
    Ok(outcome(pass, parts.join(", ")))
}

fn covariation() -> Result<Outcome> {
    let pairs = [(0usize, 0usize), (0, 1), (1, 1)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, integrator) in [IntegratorKind::ItoEm, IntegratorKind::Rotation].into_iter().enumerate() {
        let mut config = sim(10, 1e-4, 1.0, 1000, 401 + k as u64);
        config.integrator = integrator;
        config.store_martingale = true;
        let chunks = map_chunks(config.ensemble, 1, |range| {
            let mut acc = vec![(Moments::default(), Moments::default()); pairs.len()];
            for m in range {
                let noise = NoiseStream::new(config.seed, m as u64);
                let v0 = make_initial_state(&[2.0, 2.0], 10, &noise)?;
                let path = simulate_path(&config, &v0, &noise)?;
                for (p, &(i, j)) in pairs.iter().enumerate() {
                    let q = quadratic_covariation(&path, i, j)?;
                    acc[p].0.push(*q.empirical.last().expect("non-empty"));
                    acc[p].1.push(*q.predicted.last().expect("non-empty"));
                }
            }
            Ok(acc)
        })?;
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let (mut e, mut pr) = (Moments::default(), Moments::default());
            for c in &chunks {
                e.merge(&c[p].0);
                pr.merge(&c[p].1);
            }
            let rel = (e.mean - pr.mean).abs() / pr.mean.abs();
            pass &= rel <= 0.05;
            parts.push(format!("{integrator:?} ({i},{j}) {:.2}%", 100.0 * rel));
        }
    }
    Ok(outcome(pass, format!("relative errors: {}", parts.join(", "))))
}

fn chaos() -> Result<Outcome> {
    let mut config = sim(10_000, 1e-3, 1.0, 10_000, 501);
    config.engine = Engine::TaggedBlock;
    config.tagged = vec![0, 1, 2];
    config.checkpoints = 1;
    let ens = run_tagged_ensemble(&config, &[1.0, 1.0, 1.0], 1)?;
    let r = chaos_metric(&ens.terminal)?;
    let threshold = 1.5 * 3.0 / (config.ensemble as f64).sqrt();

    let mut control = sim(3, 1e-3, 1.0, 10_000, 502);
    control.tagged = vec![0, 1, 2];
    control.checkpoints = 1;
    let c = [1.5f64.sqrt(), 1.5f64.sqrt(), 0.0];
    let neg = chaos_metric(&run_tagged_ensemble(&control, &c, 1)?.terminal)?;
    Ok(outcome(
        r.score < threshold && neg.score > 10.0 * threshold,
        format!(
            "score {:.4} < {threshold:.4}; control at D = d = 3 scores {:.3} (needs > {:.3})",
            r.score,
            neg.score,
            10.0 * threshold
        ),
    ))
}

fn kac_limit() -> Result<Outcome> {
    let mut reference = sim(10, 1e-3, 1.0, 10_000, 601);
    reference.integrator = IntegratorKind::Rotation;
    reference.checkpoints = 1;
    let r = diffusion_limit_report(&reference, &[1.0], &[0.5, 0.25, 0.125], 1)?;
    let monotone = r.monotone_within(2.0);
    let energy = r.rows.iter().all(|row| row.max_energy_drift <= 1e-12 * 10.0);
    let poisson = r.rows.iter().all(|row| row.chi2_p > 0.01);
    let rows: Vec<String> = r
        .rows
        .iter()
        .map(|row| {
            format!(
                "eps={} KS={:.4}+-{:.4} chi2 p={:.2}",
                row.epsilon, row.ks_distance, row.se, row.chi2_p
            )
        })
        .collect();
    let drift = r.rows.iter().map(|row| row.max_energy_drift).fold(0.0, f64::max);
    Ok(outcome(
        monotone && energy && poisson,
        format!(
            "{}; max energy drift {drift:.1e}; time scale pi^2 D/3 = {:.3}",
            rows.join(", "),
            r.rows[0].rescaling_constant
        ),
    ))
}

fn marginal() -> Result<Outcome> {
    let r3 = 3f64.sqrt();
    let uniform: Vec<f64> = (0..100_000u64)
        .map(|m| Ok(sample_uniform_sphere(3, &NoiseStream::new(701, m))?[0]))
        .collect::<Result<_>>()?;
    let ks3 = ks_test(&uniform, |y| ((y + r3) / (2.0 * r3)).clamp(0.0, 1.0))?;

    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let big: Vec<f64> = (0..10_000u64)
        .map(|m| Ok(sample_uniform_sphere(1000, &NoiseStream::new(702, m))?[0]))
        .collect::<Result<_>>()?;
    let ks1000 = ks_test(&big, |y| normal.cdf(y))?;

    let norm_err = (2..=50)
        .map(|n| Ok((MarginalLaw::new(n)?.normalization() - 1.0).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let law = MarginalLaw::new(10)?;
    let lifted: Vec<f64> = (0..10_000u64)
        .map(|m| {
            let u = sample_uniform_sphere(9, &NoiseStream::new(703, m))?;
            let y = sample_uniform_sphere(10, &NoiseStream::new(704, m))?[0];
            Ok(lift_phi(&u, y)?[0])
        })
        .collect::<Result<_>>()?;
    let ks_lift = ks_test(&lifted, |y| law.cdf(y))?;
    Ok(outcome(
        ks3.p_value > 0.01 && ks1000.p_value > 0.01 && norm_err < 1e-8 && ks_lift.p_value > 0.01,
        format!(
            "N=3 uniform p={:.3}; N=1000 normal p={:.3}; max normalization error {norm_err:.1e}; lift N=10 p={:.3}",
            ks3.p_value, ks1000.p_value, ks_lift.p_value
        ),
    ))
}

fn momentum() -> Result<Outcome> {
    // Conservation along direct steps.
    let manifold = Manifold {
        particles: 100,
        u0: [0.4, -0.3, 0.2],
        eps0: 1.5,
    };
    let noise = NoiseStream::new(801, 0);
    let mut state = state_from_reduced(
        &manifold,
        &reduced_initial(&manifold, &[[1.0, 0.0, 0.0]], &noise, &UniformBath)?,
    )?;
    let p0 = state.momentum();
    let mut momentum_err = 0.0f64;
    for step in 0..200u64 {
        let dw: Vec<f64> = (0..300).map(|k| noise.increment(Channel::Brownian(k), step, 1e-3)).collect();
        state = step_momentum(&state, &dw, 1e-3)?;
        let p = state.momentum();
        momentum_err = momentum_err.max((0..3).map(|g| (p[g] - p0[g]).abs()).fold(0.0, f64::max));
    }
    let conserved = momentum_err <= 1e-12 * 100.0;

    let mut gs_err = 0.0f64;
    for n in [10usize, 100, 1000] {
        let v: Vec<f64> = (0..3 * n).map(|k| noise.gaussian(Channel::Independent(k), n as u64)).collect();
        let back = gram_schmidt_inverse(&gram_schmidt_forward(&v)?)?;
        gs_err = gs_err.max(back.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let round_trip = gs_err <= 1e-12;

    let mut sups = Vec::new();
    for n in [100usize, 1000, 10_000] {
        let cfg = Prop1Config {
            particles: n,
            ensemble: 1000,
            seed: 810 + n as u64,
            ..Prop1Config::default()
        };
        sups.push(run_prop1(&cfg, 1)?.sup_mean_msd());
    }
    let ratios: Vec<f64> = sups.windows(2).map(|w| w[0] / w[1]).collect();
    let decay = ratios.iter().all(|r| (5.0..=20.0).contains(r));

    let cfg = Prop1Config {
        particles: 10_000,
        tagged: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        ensemble: 4000,
        seed: 820,
        ..Prop1Config::default()
    };
    let r = run_prop1(&cfg, 1)?;
    let (cov, se) = (r.cross_cov.expect("two tagged"), r.cross_cov_se.expect("two tagged"));
    let cross_z = (0..3).map(|g| (cov[g] / se[g]).abs()).fold(0.0, f64::max);

    let comp = compensated_noise_check(100, 1.0, 10, 10_000, 830, 1)?;
    let (comp_ok, comp_z) = max_z(&comp.msd, &comp.se, &comp.theory, 3.0);

    Ok(outcome(
        conserved && round_trip && decay && cross_z <= 3.0 && comp_ok,
        format!(
            "momentum drift {momentum_err:.1e}; GS round trip {gs_err:.1e}; msd decade ratios {:.2} {:.2}; cross-cov {cross_z:.2} SE; compensated noise {comp_z:.2} SE",
            ratios[0], ratios[1]
        ),
    ))
}

fn stationarity() -> Result<Outcome> {
    let mut config = sim(10_000, 2e-3, 20.0, 10_000, 901);
    config.engine = Engine::TaggedBlock;
    config.checkpoints = 1;
    let ens = run_tagged_ensemble(&config, &[1.0], 1)?;
    let xs: Vec<f64> = ens.terminal.iter().map(|t| t[0]).collect();
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let r = ks_test(&xs, |y| normal.cdf(y))?;
    Ok(outcome(r.p_value > 0.01, format!("KS D={:.4}, p={:.3}", r.statistic, r.p_value)))
}

fn determinism() -> Result<Outcome> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let specs = [
        (
            ExperimentKind::Couple,
            "seed = 7\n[sim]\ndimension = 1000\ndt = 0.001\nhorizon = 0.5\nensemble = 300\nengine = \"tagged-block\"\ncheckpoints = 5\n[couple]\nc = [1.0]\n",
        ),
        (
            ExperimentKind::Kac,
            "seed = 8\n[sim]\ndimension = 6\ndt = 0.01\nhorizon = 0.5\nensemble = 300\n[kac]\nepsilons = [0.5, 0.25]\n",
        ),
    ];
    let mut identical = true;
    let mut files = 0;
    for (kind, text) in specs {
        let spec = parse_spec(text, "inline").expect("valid spec");
        let mut outs = Vec::new();
        for (run, workers) in [(0, 1usize), (1, 1), (2, 3)] {
            let opts = RunOptions {
                workers: Some(workers),
                out: Some(tmp.path().join(format!("{kind}-{run}"))),
                ..RunOptions::default()
            };
            let resolved = resolve(kind, spec.clone(), &opts, text, "inline").expect("valid spec");
            outs.push(run_experiment(&resolved).expect("run succeeds"));
        }
        for name in &outs[0].manifest.tables {
            let file = format!("{name}.csv");
            let first = std::fs::read(outs[0].dir.join(&file)).expect("table written");
            for o in &outs[1..] {
                identical &= std::fs::read(o.dir.join(&file)).expect("table written") == first;
            }
            // Parsed content as well, not only bytes.
            let t = Table::read(&outs[0].dir, name, outs[0].manifest.format).expect("table parses");
            identical &= !t.rows.is_empty();
            files += 1;
        }
    }
    Ok(outcome(
        identical,
        format!("{files} tables byte-identical across 3 runs each (1 and 3 workers)"),
    ))
}

fn main() {
    type Criterion = (usize, &'static str, fn() -> Result<Outcome>);
    let criteria: [Criterion; 10] = [
        (1, "moment ODE", moment_ode),
        (2, "Gronwall domination", gronwall),
        (3, "representation equivalence", representations),
        (4, "covariation identity", covariation),
        (5, "propagation of chaos", chaos),
        (6, "Kac diffusion limit", kac_limit),
        (7, "sphere marginal", marginal),
        (8, "momentum model", momentum),
        (9, "stationarity", stationarity),
        (10, "determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|a| a == &id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let o = f().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = if o.enforced { "" } else { " (reported, not enforced)" };
        println!(
            "criterion {id:>2} {verdict} {name}{note} [{:.1}s]: {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass && o.enforced {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: enforced criteria failed: {failed:?}");
        std::process::exit(1);
    }
}
