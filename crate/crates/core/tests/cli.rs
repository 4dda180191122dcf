use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sphere_lab::experiment::{read_manifest, CompareReport, Manifest, Summary};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sphere-lab"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(kind: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(kind)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> Summary {
    serde_json::from_reader(std::fs::File::open(dir.join("summary.json")).unwrap()).unwrap()
}

fn couple_spec(dim: usize, seed: u64) -> String {
    format!(
        "seed = {seed}\n\n[sim]\ndimension = {dim}\ndt = 0.001\nhorizon = 1.0\nensemble = 1000\nengine = \"tagged-block\"\ncheckpoints = 10\n\n[couple]\nc = [1.0]\n"
    )
}

#[test]
fn empty_or_missing_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write(tmp.path(), "empty.toml", "");
    let out = tmp.path().join("out");
    let o = run("couple", &empty, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let o = run("couple", &tmp.path().join("absent.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let o = bin().arg("couple").arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_reported_with_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "seed = 1\n\n[marginal]\nn = 3\nsampels = 100\n");
    let o = run("marginal", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:5:"), "{err}");
    assert!(err.contains("sampels"), "{err}");
}

#[test]
fn marginal_run_is_complete_reproducible_and_auditable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "m.toml", "seed = 3\n\n[marginal]\nn = 3\nsamples = 100000\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(run("marginal", &cfg, &a, &["--check", "--workers", "1"]).status.code(), Some(0));
    assert_eq!(run("marginal", &cfg, &b, &["--check", "--workers", "3"]).status.code(), Some(0));

    let s = summary(&a);
    let ks = s.checks.iter().find(|c| c.name == "marginal_ks").unwrap();
    assert!(ks.pass, "{ks:?}");

    let manifest: Manifest = read_manifest(&a).unwrap();
    let mut listed = manifest.files.clone();
    listed.push("manifest.json".into());
    listed.sort();
    let mut present: Vec<String> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    present.sort();
    assert_eq!(listed, present, "orphan or missing files");

    for f in manifest.files.iter().filter(|f| f.ends_with(".csv")) {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let header = std::fs::read_to_string(a.join("ks.csv")).unwrap();
    assert!(header.starts_with("test,samples,statistic,p_value\n"));

    let o = bin().arg("audit").arg(&a).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn json_tables_audit_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "m.toml", "seed = 3\n\n[marginal]\nn = 10\nsamples = 5000\nlift = true\n");
    let out = tmp.path().join("j");
    assert_eq!(run("marginal", &cfg, &out, &["--format", "json"]).status.code(), Some(0));
    assert!(out.join("ks.json").is_file());
    assert_eq!(bin().arg("audit").arg(&out).output().unwrap().status.code(), Some(0));
}

#[test]
fn couple_run_reports_bound_domination() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "seed = 1\n\n[sim]\ndimension = 10000\ndt = 0.001\nhorizon = 2.0\nensemble = 1000\nengine = \"tagged-block\"\ncheckpoints = 20\n\n[couple]\nc = [1.0]\n",
    );
    let out = tmp.path().join("c");
    assert_eq!(run("couple", &cfg, &out, &["--check"]).status.code(), Some(0));
    let text = std::fs::read_to_string(out.join("msd.csv")).unwrap();
    assert!(text.starts_with("t,msd,se,bound\n"));
    assert_eq!(text.lines().count(), 22);
    assert!(summary(&out).checks.iter().any(|c| c.name == "bound_domination" && c.pass));
}

#[test]
fn failed_check_sets_exit_status_four() {
    let tmp = tempfile::tempdir().unwrap();
    // The second-moment check against the printed ODE fails at small D.
    let cfg = write(
        tmp.path(),
        "s.toml",
        "seed = 2\n\n[sim]\ndimension = 10\ndt = 0.01\nhorizon = 2.0\nensemble = 2000\ncheckpoints = 4\n\n[simulate]\nc = [1.0]\n",
    );
    let out = tmp.path().join("s");
    assert_eq!(run("simulate", &cfg, &out, &[]).status.code(), Some(0));
    assert_eq!(run("simulate", &cfg, &out, &["--check"]).status.code(), Some(4));
    let s = summary(&out);
    assert!(s.checks.iter().any(|c| c.name == "second_moment_exact" && c.pass));
    assert!(s.checks.iter().any(|c| c.name == "second_moment_printed" && !c.pass));
}

#[test]
fn budget_overrun_flags_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "k.toml",
        "seed = 5\nbudget_seconds = 1e-9\n\n[sim]\ndimension = 6\ndt = 0.01\nhorizon = 0.5\nensemble = 200\n\n[kac]\nepsilons = [0.5, 0.25]\n",
    );
    let out = tmp.path().join("k");
    assert_eq!(run("kac", &cfg, &out, &[]).status.code(), Some(3));
    let m = read_manifest(&out).unwrap();
    assert!(m.partial && m.budget_exceeded);
    assert!(summary(&out).partial);
}

fn compare(a: &Path, b: &Path) -> (Option<i32>, Option<CompareReport>) {
    let o = bin().arg("compare").arg(a).arg(b).output().unwrap();
    let report = serde_json::from_slice(&o.stdout).ok();
    (o.status.code(), report)
}

#[test]
fn compare_runs_reports_config_and_statistic_differences() {
    let tmp = tempfile::tempdir().unwrap();
    let paths: Vec<PathBuf> = [(100, 1), (100, 2), (200, 1)]
        .iter()
        .map(|&(d, s)| {
            let cfg = write(tmp.path(), &format!("c{d}_{s}.toml"), &couple_spec(d, s));
            let out = tmp.path().join(format!("c{d}_{s}"));
            assert_eq!(run("couple", &cfg, &out, &[]).status.code(), Some(0));
            out
        })
        .collect();

    let (code, r) = compare(&paths[0], &paths[0]);
    assert_eq!(code, Some(0));
    assert!(r.unwrap().is_empty());

    let r = compare(&paths[0], &paths[1]).1.unwrap();
    assert!(r.config.is_empty(), "{:?}", r.config);
    assert_eq!(r.seeds, (1, 2));
    assert!(!r.statistics.is_empty());
    assert!(r.statistics.iter().all(|s| s.consistent), "{:?}", r.statistics);

    let r = compare(&paths[0], &paths[2]).1.unwrap();
    assert!(r.config.iter().any(|c| c.key == "sim.dimension"));
    let sup = r.statistics.iter().find(|s| s.name == "sup_msd").unwrap();
    assert!((1.6..=2.4).contains(&sup.ratio), "{sup:?}");

    let marg = write(tmp.path(), "m.toml", "[marginal]\nn = 3\nsamples = 100\n");
    let m = tmp.path().join("m");
    assert_eq!(run("marginal", &marg, &m, &[]).status.code(), Some(0));
    assert_eq!(compare(&paths[0], &m).0, Some(2));
}
