//! Running experiments from a spec string, then comparing two runs.
//!
//!     cargo run --release --example experiment_runs

use sphere_lab::experiment::{compare_runs, parse_spec, resolve, run_experiment, ExperimentKind, RunOptions};

const SPEC: &str = r#"
[sim]
dimension = 100
dt = 0.001
horizon = 1.0
ensemble = 1000
engine = "tagged-block"
checkpoints = 10

[couple]
c = [1.0]
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("sphere-lab-example");
    let spec = parse_spec(SPEC, "inline")?;
    let mut dirs = Vec::new();
    for seed in [1, 2] {
        let opts = RunOptions {
            seed: Some(seed),
            out: Some(dir.join(format!("seed{seed}"))),
            ..RunOptions::default()
        };
        let run = run_experiment(&resolve(ExperimentKind::Couple, spec.clone(), &opts, SPEC, "inline")?)?;
        for c in &run.summary.checks {
            println!("seed {seed}: {} {} ({})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
        }
        dirs.push(run.dir);
    }
    let report = compare_runs(&dirs[0], &dirs[1])?;
    println!("config differences: {}", report.config.len());
    for s in &report.statistics {
        println!("{}: z = {:+.2}, consistent = {}", s.name, s.z, s.consistent);
    }
    println!("outputs under {}", dir.display());
    Ok(())
}
