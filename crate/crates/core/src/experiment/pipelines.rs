//! Per-kind validation, simulation into tables, and verdicts over tables.

use crate::config::{Engine, IntegratorKind, SimConfig};
use crate::coupling::{exact_ev1sq, integrated_moment_bound, run_coupled_with, theory_ev1sq, OUParams};
use crate::ensemble::{map_chunks, run_tagged_ensemble};
use crate::error::{Error, Result};
use crate::kac::{diffusion_reference, kac_limit_row};
use crate::momentum::run_prop1;
use crate::noise::NoiseStream;
use crate::sphere::simulate_path;
use crate::state::{make_initial_state, sample_uniform_sphere};
use crate::stats::gof::{KOLMOGOROV_SD, MIN_KS_SAMPLES};
use crate::stats::{chaos_metric, ks_test, lift_phi, quadratic_covariation, MarginalLaw, Moments};

use super::{Budget, Check, ExperimentKind, ExperimentSpec, RunError, Statistic, Table};

type Invalid = (&'static str, String);

fn feasible(c: &[f64], sim: &SimConfig, section: &'static str) -> std::result::Result<(), Invalid> {
    if c.len() >= sim.dimension {
        return Err((section, format!("{} fixed components leave no bath in dimension {}", c.len(), sim.dimension)));
    }
    make_initial_state(c, sim.dimension, &NoiseStream::new(0, 0))
        .map(|_| ())
        .map_err(|e| (section, e.to_string()))
}

fn diffusion_only(sim: &SimConfig) -> std::result::Result<(), Invalid> {
    if sim.integrator == IntegratorKind::KacJump {
        return Err(("sim", "the jump process has its own experiment kind, kac".into()));
    }
    Ok(())
}

/// Checks a resolved spec against the preconditions of its pipeline.
/// Errors carry the section to point the diagnostic at.
pub(super) fn validate(kind: ExperimentKind, spec: &ExperimentSpec) -> std::result::Result<(), Invalid> {
    let sim = spec.sim();
    if kind.uses_sim() {
        sim.validate().map_err(|e| ("sim", e.to_string()))?;
        diffusion_only(&sim)?;
    }
    match kind {
        ExperimentKind::Simulate => {
            let s = spec.simulate.as_ref().expect("resolved");
            feasible(&s.c, &sim, "simulate")?;
            if sim.engine == Engine::TaggedBlock && sim.tagged.iter().enumerate().any(|(n, &i)| n != i) {
                return Err(("sim", "the tagged-block engine needs tagged = [0, 1, ..., d-1]".into()));
            }
        }
        ExperimentKind::Couple => {
            let s = spec.couple.as_ref().expect("resolved");
            if s.c.is_empty() {
                return Err(("couple", "c must hold at least one value".into()));
            }
            feasible(&s.c, &sim, "couple")?;
            if !matches!(sim.integrator, IntegratorKind::ItoEm | IntegratorKind::StratHeun) {
                return Err(("sim", "coupling needs the ito-em or strat-heun integrator".into()));
            }
            OUParams {
                alpha: s.alpha,
                beta: s.beta,
            }
            .validate()
            .map_err(|e| ("couple", e.to_string()))?;
        }
        ExperimentKind::Chaos => {
            let s = spec.chaos.as_ref().expect("resolved");
            if s.c.len() < 2 {
                return Err(("chaos", "need at least two tagged components".into()));
            }
            if !(s.safety > 0.0) {
                return Err(("chaos", "safety must be positive".into()));
            }
            feasible(&s.c, &sim, "chaos")?;
        }
        ExperimentKind::Kac => {
            let s = spec.kac.as_ref().expect("resolved");
            if s.epsilons.is_empty() {
                return Err(("kac", "epsilons is empty".into()));
            }
            if s.epsilons.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
                return Err(("kac", "every epsilon must lie in (0, 1]".into()));
            }
            if s.epsilons.windows(2).any(|w| w[1] >= w[0]) {
                return Err(("kac", "epsilons must be strictly decreasing".into()));
            }
            if s.c.is_empty() {
                return Err(("kac", "c must hold at least one value".into()));
            }
            feasible(&s.c, &sim, "kac")?;
            if sim.ensemble < MIN_KS_SAMPLES {
                return Err(("sim", format!("the KS comparison needs ensemble >= {MIN_KS_SAMPLES}")));
            }
        }
        ExperimentKind::Momentum => {
            spec.momentum
                .as_ref()
                .expect("resolved")
                .validate()
                .map_err(|e| ("momentum", e.to_string()))?;
        }
        ExperimentKind::Marginal => {
            let s = spec.marginal.as_ref().expect("resolved");
            let min = if s.lift { 3 } else { 2 };
            if s.n < min {
                return Err(("marginal", format!("n must be at least {min}")));
            }
            if s.samples < MIN_KS_SAMPLES {
                return Err(("marginal", format!("samples must be at least {MIN_KS_SAMPLES}")));
            }
        }
        ExperimentKind::Covariation => {
            let s = spec.covariation.as_ref().expect("resolved");
            if sim.engine != Engine::Full {
                return Err(("sim", "covariation records full paths; use engine = \"full\"".into()));
            }
            feasible(&s.c, &sim, "covariation")?;
            if s.pairs.is_empty() || s.pairs.iter().any(|p| p[0] >= sim.dimension || p[1] >= sim.dimension) {
                return Err(("covariation", "pairs must be non-empty and inside the dimension".into()));
            }
            if !(s.tolerance > 0.0) {
                return Err(("covariation", "tolerance must be positive".into()));
            }
        }
    }
    Ok(())
}

/// Runs the pipeline of `kind`. The flag is true when the budget stopped it
/// before every stage ran.
pub(super) fn run(
    kind: ExperimentKind,
    spec: &ExperimentSpec,
    workers: usize,
    budget: &Budget,
) -> Result<(Vec<Table>, bool)> {
    match kind {
        ExperimentKind::Simulate => simulate(spec, workers).map(|t| (t, false)),
        ExperimentKind::Couple => couple(spec, workers).map(|t| (t, false)),
        ExperimentKind::Chaos => chaos(spec, workers).map(|t| (t, false)),
        ExperimentKind::Kac => kac(spec, workers, budget),
        ExperimentKind::Momentum => momentum(spec, workers).map(|t| (t, false)),
        ExperimentKind::Marginal => marginal(spec, budget),
        ExperimentKind::Covariation => covariation(spec, workers).map(|t| (t, false)),
    }
}

fn simulate(spec: &ExperimentSpec, workers: usize) -> Result<Vec<Table>> {
    let sim = spec.sim();
    let c = &spec.simulate.as_ref().expect("resolved").c;
    let ens = run_tagged_ensemble(&sim, c, workers)?;
    let s = &ens.summary;
    let mut moments = Table::new("moments", &["t", "channel", "mean", "se"]);
    for (k, &t) in s.times.iter().enumerate() {
        for (ch, m) in s.moments[k].iter().enumerate() {
            moments.push(vec![t, ch as f64, m.mean, m.se()]);
        }
    }
    let i0 = sim.tagged[0];
    let e0 = match c.get(i0) {
        Some(x) => x * x,
        None => {
            let c_sq: f64 = c.iter().map(|x| x * x).sum();
            (sim.dimension as f64 - c_sq) / (sim.dimension - c.len()) as f64
        }
    };
    let ch = s.channel_index(&format!("v{i0}_sq")).expect("layout has the squared channel");
    let (mean, se) = s.series(ch);
    let mut second = Table::new("second_moment", &["t", "mean", "se", "exact", "printed"]);
    for (k, &t) in s.times.iter().enumerate() {
        second.push(vec![t, mean[k], se[k], exact_ev1sq(e0, t), theory_ev1sq(e0, sim.dimension, t)]);
    }
    Ok(vec![moments, second])
}

fn couple(spec: &ExperimentSpec, workers: usize) -> Result<Vec<Table>> {
    let sim = spec.sim();
    let s = spec.couple.as_ref().expect("resolved");
    let params = OUParams {
        alpha: s.alpha,
        beta: s.beta,
    };
    let r = run_coupled_with(&sim, &s.c, params, s.driver, workers)?;
    let c_sq = s.c[0] * s.c[0];
    let mut msd = Table::new("msd", &["t", "msd", "se", "bound"]);
    let mut second = Table::new("second_moment", &["t", "mean", "se", "exact", "printed"]);
    let mut integrated = Table::new("integrated_moment", &["t", "mean", "se", "bound"]);
    for (k, &t) in r.times.iter().enumerate() {
        msd.push(vec![t, r.msd[k], r.msd_se[k], r.bound[k]]);
        second.push(vec![
            t,
            r.second_moment[k],
            r.second_moment_se[k],
            exact_ev1sq(c_sq, t),
            theory_ev1sq(c_sq, sim.dimension, t),
        ]);
        integrated.push(vec![
            t,
            r.integrated_moment[k],
            r.integrated_moment_se[k],
            integrated_moment_bound(c_sq, t),
        ]);
    }
    Ok(vec![msd, second, integrated])
}

fn chaos(spec: &ExperimentSpec, workers: usize) -> Result<Vec<Table>> {
    let sim = spec.sim();
    let s = spec.chaos.as_ref().expect("resolved");
    let ens = run_tagged_ensemble(&sim, &s.c, workers)?;
    let report = chaos_metric(&ens.terminal)?;
    let d = report.covariance.len();
    let mut cov = Table::new("chaos_covariance", &["i", "j", "covariance"]);
    for i in 0..d {
        for j in 0..d {
            cov.push(vec![i as f64, j as f64, report.covariance[i][j]]);
        }
    }
    let mut score = Table::new("chaos_score", &["score", "null_se", "samples"]);
    score.push(vec![report.score, report.null_se, report.samples as f64]);
    Ok(vec![cov, score])
}

fn kac(spec: &ExperimentSpec, workers: usize, budget: &Budget) -> Result<(Vec<Table>, bool)> {
    let sim = spec.sim();
    let s = spec.kac.as_ref().expect("resolved");
    let diffusion = diffusion_reference(&sim, &s.c, workers)?;
    let mut table = Table::new(
        "kac",
        &[
            "epsilon",
            "ks_distance",
            "se",
            "p_value",
            "rescaling_constant",
            "max_energy_drift",
            "energy_tol",
            "expected_pair_count",
            "mean_pair_count",
            "chi2_statistic",
            "chi2_dof",
            "chi2_p",
        ],
    );
    let energy_tol = 1e-12 * sim.dimension as f64;
    let mut partial = false;
    for (k, &eps) in s.epsilons.iter().enumerate() {
        if budget.exceeded() {
            partial = true;
            break;
        }
        let r = kac_limit_row(&sim, &diffusion, &s.c, eps, k as u64 + 1, workers)?;
        table.push(vec![
            r.epsilon,
            r.ks_distance,
            r.se,
            r.p_value,
            r.rescaling_constant,
            r.max_energy_drift,
            energy_tol,
            r.expected_pair_count,
            r.mean_pair_count,
            r.chi2_statistic,
            r.chi2_dof as f64,
            r.chi2_p,
        ]);
    }
    Ok((vec![table], partial))
}

fn momentum(spec: &ExperimentSpec, workers: usize) -> Result<Vec<Table>> {
    let cfg = spec.momentum.as_ref().expect("resolved");
    let r = run_prop1(cfg, workers)?;
    let m = r.msd.len();
    let mut cols = vec!["t".to_string(), "mean_msd".into(), "se".into()];
    for k in 0..m {
        cols.push(format!("msd_{k}"));
        cols.push(format!("se_{k}"));
    }
    let mut msd = Table {
        name: "msd".into(),
        columns: cols,
        rows: Vec::new(),
    };
    for (t_idx, &t) in r.times.iter().enumerate() {
        let mut row = vec![t, r.mean_msd[t_idx], r.mean_msd_se[t_idx]];
        for k in 0..m {
            row.push(r.msd[k][t_idx]);
            row.push(r.msd_se[k][t_idx]);
        }
        msd.push(row);
    }
    let mut tables = vec![msd];
    if let (Some(cov), Some(se)) = (r.cross_cov, r.cross_cov_se) {
        let mut t = Table::new("cross_covariance", &["component", "covariance", "se"]);
        for g in 0..3 {
            t.push(vec![g as f64, cov[g], se[g]]);
        }
        tables.push(t);
    }
    Ok(tables)
}

fn marginal(spec: &ExperimentSpec, budget: &Budget) -> Result<(Vec<Table>, bool)> {
    let s = spec.marginal.as_ref().expect("resolved");
    let seed = spec.seed.unwrap_or(0);
    let law = MarginalLaw::new(s.n)?;
    let samples = (0..s.samples)
        .map(|m| Ok(sample_uniform_sphere(s.n, &NoiseStream::new(seed, m as u64))?[0]))
        .collect::<Result<Vec<f64>>>()?;
    let ks = ks_test(&samples, |y| law.cdf(y))?;

    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let mut cdf = Table::new("cdf", &["y", "empirical", "theory", "density"]);
    let r = law.half_width();
    for k in 0..=100 {
        let y = -r + 2.0 * r * k as f64 / 100.0;
        let below = sorted.partition_point(|&x| x <= y) as f64 / sorted.len() as f64;
        cdf.push(vec![y, below, law.cdf(y), law.density(y)]);
    }
    let mut tests = Table::new("ks", &["test", "samples", "statistic", "p_value"]);
    tests.push(vec![0.0, samples.len() as f64, ks.statistic, ks.p_value]);
    let mut norm = Table::new("normalization", &["n", "mass"]);
    norm.push(vec![s.n as f64, law.normalization()]);

    let mut partial = false;
    if s.lift {
        if budget.exceeded() {
            partial = true;
        } else {
            // A uniform point of the (N-1)-sphere, lifted with an independent
            // nu_N coordinate; component 0 of the result should follow nu_N.
            let lift_seed = seed.wrapping_add(1);
            let y_seed = seed.wrapping_add(2);
            let lifted = (0..s.samples)
                .map(|m| {
                    let u = sample_uniform_sphere(s.n - 1, &NoiseStream::new(lift_seed, m as u64))?;
                    let y = sample_uniform_sphere(s.n, &NoiseStream::new(y_seed, m as u64))?[0];
                    Ok(lift_phi(&u, y)?[0])
                })
                .collect::<Result<Vec<f64>>>()?;
            let ks = ks_test(&lifted, |y| law.cdf(y))?;
            tests.push(vec![1.0, lifted.len() as f64, ks.statistic, ks.p_value]);
        }
    }
    Ok((vec![cdf, tests, norm], partial))
}

fn covariation(spec: &ExperimentSpec, workers: usize) -> Result<Vec<Table>> {
    let sim = spec.sim();
    let s = spec.covariation.as_ref().expect("resolved");
    let times = sim.record_times();
    let stride = sim.record_stride();
    let np = s.pairs.len();
    // Per chunk: moments of the empirical, predicted and difference series
    // at each recorded time, per pair.
    let parts = map_chunks(sim.ensemble, workers, |range| {
        let mut acc = vec![vec![[Moments::default(), Moments::default(), Moments::default()]; np]; times.len()];
        for m in range {
            let noise = NoiseStream::new(sim.seed, m as u64);
            let initial = make_initial_state(&s.c, sim.dimension, &noise)?;
            let traj = simulate_path(&sim, &initial, &noise)?;
            for (p, pair) in s.pairs.iter().enumerate() {
                let q = quadratic_covariation(&traj, pair[0], pair[1])?;
                for (k, row) in acc.iter_mut().enumerate() {
                    let n = k * stride;
                    row[p][0].push(q.empirical[n]);
                    row[p][1].push(q.predicted[n]);
                    row[p][2].push(q.empirical[n] - q.predicted[n]);
                }
            }
        }
        Ok(acc)
    })?;
    let mut iter = parts.into_iter();
    let mut acc = iter.next().ok_or_else(|| Error::config("empty ensemble"))?;
    for part in iter {
        for (row, other) in acc.iter_mut().zip(&part) {
            for (a, b) in row.iter_mut().zip(other) {
                for (x, y) in a.iter_mut().zip(b) {
                    x.merge(y);
                }
            }
        }
    }
    let mut table = Table::new("covariation", &["t", "i", "j", "empirical", "predicted", "diff_se"]);
    for (k, &t) in times.iter().enumerate() {
        for (p, pair) in s.pairs.iter().enumerate() {
            let [e, pr, d] = &acc[k][p];
            table.push(vec![t, pair[0] as f64, pair[1] as f64, e.mean, pr.mean, d.se()]);
        }
    }
    Ok(vec![table])
}

fn find<'a>(tables: &'a [Table], name: &str) -> std::result::Result<&'a Table, RunError> {
    tables
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| RunError::Audit(format!("missing table {name}")))
}

fn last_stat(name: &str, value: &[f64], se: &[f64]) -> Statistic {
    Statistic {
        name: name.to_string(),
        value: value.last().copied().unwrap_or(f64::NAN),
        se: se.last().copied().unwrap_or(f64::NAN),
    }
}

/// `|x - y| <= k se` on every grid point, with a few ulps of slack for the
/// deterministic `t = 0` row.
fn within(x: &[f64], se: &[f64], y: &[f64], k: f64) -> (bool, f64) {
    let mut worst = 0.0f64;
    let mut ok = true;
    for ((&a, &s), &b) in x.iter().zip(se).zip(y) {
        let gap = (a - b).abs();
        if gap > k * s + 1e-12 * b.abs().max(1.0) {
            ok = false;
        }
        if s > 0.0 {
            worst = worst.max(gap / s);
        }
    }
    (ok, worst)
}

/// Verdicts and headline statistics of a run, computed from its tables
/// only (plus thresholds from the spec).
pub fn evaluate(
    kind: ExperimentKind,
    spec: &ExperimentSpec,
    tables: &[Table],
) -> std::result::Result<(Vec<Check>, Vec<Statistic>), RunError> {
    let mut checks = Vec::new();
    let mut stats = Vec::new();
    match kind {
        ExperimentKind::Simulate => {
            let t = find(tables, "second_moment")?;
            let (mean, se) = (t.column("mean")?, t.column("se")?);
            for (col, name) in [("exact", "second_moment_exact"), ("printed", "second_moment_printed")] {
                let (pass, worst) = within(&mean, &se, &t.column(col)?, 3.0);
                checks.push(Check {
                    name: name.into(),
                    pass,
                    detail: format!("largest deviation {worst:.2} SE (limit 3)"),
                });
            }
            stats.push(last_stat("second_moment_T", &mean, &se));
        }
        ExperimentKind::Couple => {
            let t = find(tables, "msd")?;
            let (msd, se, bound) = (t.column("msd")?, t.column("se")?, t.column("bound")?);
            let bad = (0..msd.len()).filter(|&k| msd[k] > bound[k] + 3.0 * se[k]).count();
            checks.push(Check {
                name: "bound_domination".into(),
                pass: bad == 0,
                detail: format!("{bad} of {} grid points above bound + 3 SE", msd.len()),
            });
            let t = find(tables, "integrated_moment")?;
            let (m, s, b) = (t.column("mean")?, t.column("se")?, t.column("bound")?);
            let bad = (0..m.len()).filter(|&k| m[k] > b[k] + 3.0 * s[k]).count();
            checks.push(Check {
                name: "integrated_moment_bound".into(),
                pass: bad == 0,
                detail: format!("{bad} of {} grid points above bound + 3 SE", m.len()),
            });
            let arg = (0..msd.len()).fold(0, |a, k| if msd[k] > msd[a] { k } else { a });
            stats.push(Statistic {
                name: "sup_msd".into(),
                value: msd.get(arg).copied().unwrap_or(f64::NAN),
                se: se.get(arg).copied().unwrap_or(f64::NAN),
            });
            stats.push(last_stat("msd_T", &msd, &se));
        }
        ExperimentKind::Chaos => {
            let t = find(tables, "chaos_score")?;
            let (score, null_se) = (t.column("score")?[0], t.column("null_se")?[0]);
            let safety = spec.chaos.as_ref().map_or(1.5, |c| c.safety);
            let limit = safety * 3.0 * null_se;
            checks.push(Check {
                name: "independence".into(),
                pass: score < limit,
                detail: format!("score {score:.4e}, limit {limit:.4e}"),
            });
            stats.push(Statistic {
                name: "score".into(),
                value: score,
                se: null_se,
            });
        }
        ExperimentKind::Kac => {
            let t = find(tables, "kac")?;
            let eps = t.column("epsilon")?;
            let ks = t.column("ks_distance")?;
            let se = t.column("se")?;
            let drift = t.column("max_energy_drift")?;
            let tol = t.column("energy_tol")?;
            let chi_p = t.column("chi2_p")?;
            let bad = (1..ks.len()).filter(|&k| ks[k] > ks[k - 1] + 2.0 * se[k].max(se[k - 1])).count();
            checks.push(Check {
                name: "ks_monotone".into(),
                pass: bad == 0,
                detail: format!("{bad} increases beyond 2 SE over {} epsilons", ks.len()),
            });
            let worst = drift.iter().copied().fold(0.0, f64::max);
            checks.push(Check {
                name: "energy_conservation".into(),
                pass: drift.iter().zip(&tol).all(|(d, t)| d <= t),
                detail: format!("largest drift {worst:.3e}"),
            });
            for (k, &e) in eps.iter().enumerate() {
                checks.push(Check {
                    name: format!("pair_counts_poisson_eps_{e}"),
                    pass: chi_p[k] > 0.01,
                    detail: format!("chi-square p = {:.4}", chi_p[k]),
                });
                stats.push(Statistic {
                    name: format!("ks_eps_{e}"),
                    value: ks[k],
                    se: se[k],
                });
            }
        }
        ExperimentKind::Momentum => {
            let t = find(tables, "msd")?;
            let (msd, se) = (t.column("mean_msd")?, t.column("se")?);
            stats.push(last_stat("mean_msd_T", &msd, &se));
            if let Ok(t) = find(tables, "cross_covariance") {
                let (cov, se) = (t.column("covariance")?, t.column("se")?);
                let (pass, worst) = within(&cov, &se, &[0.0; 3], 3.0);
                checks.push(Check {
                    name: "cross_covariance_zero".into(),
                    pass,
                    detail: format!("largest |cov| {worst:.2} SE (limit 3)"),
                });
            }
        }
        ExperimentKind::Marginal => {
            let t = find(tables, "ks")?;
            let (test, n, stat, p) = (t.column("test")?, t.column("samples")?, t.column("statistic")?, t.column("p_value")?);
            for k in 0..test.len() {
                let name = if test[k] == 0.0 { "marginal_ks" } else { "lift_ks" };
                checks.push(Check {
                    name: name.into(),
                    pass: p[k] > 0.01,
                    detail: format!("D = {:.4e}, p = {:.4}", stat[k], p[k]),
                });
                stats.push(Statistic {
                    name: format!("{name}_distance"),
                    value: stat[k],
                    se: KOLMOGOROV_SD / n[k].sqrt(),
                });
            }
            let t = find(tables, "normalization")?;
            let mass = t.column("mass")?[0];
            checks.push(Check {
                name: "normalization".into(),
                pass: (mass - 1.0).abs() < 1e-8,
                detail: format!("mass - 1 = {:.3e}", mass - 1.0),
            });
        }
        ExperimentKind::Covariation => {
            let t = find(tables, "covariation")?;
            let tol = spec.covariation.as_ref().map_or(0.05, |c| c.tolerance);
            let (time, i, j) = (t.column("t")?, t.column("i")?, t.column("j")?);
            let (emp, pred, se) = (t.column("empirical")?, t.column("predicted")?, t.column("diff_se")?);
            let horizon = time.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for k in (0..time.len()).filter(|&k| time[k] == horizon) {
                let rel = (emp[k] - pred[k]).abs() / pred[k].abs();
                checks.push(Check {
                    name: format!("covariation_{}_{}", i[k], j[k]),
                    pass: rel <= tol,
                    detail: format!("relative error {rel:.4} (limit {tol})"),
                });
                stats.push(Statistic {
                    name: format!("covariation_gap_{}_{}", i[k], j[k]),
                    value: emp[k] - pred[k],
                    se: se[k],
                });
            }
        }
    }
    Ok((checks, stats))
}
