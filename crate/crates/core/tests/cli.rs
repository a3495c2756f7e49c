use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use dynassure::harness::{cmd_report, cmd_run_scenario, AppKind, RunManifest, TIMING};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynassure"))
}

fn status(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

/// Relative path -> contents for every file under `dir`.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn run_into(app: AppKind, dir: &Path) {
    let mut m = RunManifest::new(app);
    m.out = Some(dir.to_path_buf());
    cmd_run_scenario(&m).unwrap();
}

#[test]
fn logical_clock_archives_are_byte_identical() {
    for app in [AppKind::Uuv, AppKind::Fx] {
        let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
        run_into(app, a.path());
        run_into(app, b.path());
        let (mut x, mut y) = (snapshot(a.path()), snapshot(b.path()));
        assert!(x.remove(TIMING).is_some() && y.remove(TIMING).is_some());
        assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>());
        for (k, v) in &x {
            assert!(v == &y[k], "{app}: {k} differs between runs");
        }
        assert!(x.keys().any(|k| k.starts_with("evidence")));
        assert!(x.keys().any(|k| k.starts_with("arguments")));
    }
}

#[test]
fn verify_controller_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(status(&["verify-controller", "--app", "uuv", "--out", out]), 0);
    assert!(fs::read_to_string(dir.path().join("controller_report.txt")).unwrap().contains("verdicts: 10/10 hold"));
    let mutant = concat!(env!("CARGO_MANIFEST_DIR"), "/data/uuv_controller_mutant.toml");
    let o = bin().args(["verify-controller", "--app", "uuv", "--network", mutant]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[R4] VIOLATED") && text.contains("counterexample:"), "{text}");
}

#[test]
fn usage_and_configuration_errors_exit_2() {
    assert_eq!(status(&["run-scenario", "--app", "submarine"]), 2);
    assert_eq!(status(&["run-scenario", "--app", "uuv", "--weights", "1"]), 2);
    assert_eq!(status(&["run-scenario", "--app", "uuv", "--weights", "-1,2"]), 2);
    assert_eq!(status(&["run-scenario", "--app", "uuv", "--mode", "sundial"]), 2);
    assert_eq!(status(&["run-scenario", "--app", "uuv", "--scenario", "/nonexistent.toml"]), 2);
    assert_eq!(
        status(&["run-scenario", "--app", "uuv", "--registry", concat!(env!("CARGO_MANIFEST_DIR"), "/data/fx_registry.toml")]),
        2
    );
    assert_eq!(status(&["run-scenario", "--app", "fx", "--deadline", "-3"]), 2);
    assert_eq!(status(&["frobnicate"]), 2);
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("scenario.toml");
    fs::write(&bad, "name = \"x\"\nevents = 3\n").unwrap();
    assert_eq!(status(&["run-scenario", "--app", "fx", "--scenario", bad.to_str().unwrap()]), 2);
}

#[test]
fn run_then_report() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("uuv");
    let o = bin().args(["run-scenario", "--app", "uuv", "--out", out.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 8, "{stdout}");
    let o = bin().args(["report", out.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), cmd_report(&out).unwrap());
}

#[test]
fn corrupt_archives_are_rejected() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fx");
    run_into(AppKind::Fx, &out);
    assert!(cmd_report(&out).is_ok());

    let arg = fs::read_dir(out.join("arguments"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap() != "partial.txt" && p.extension().is_some_and(|x| x == "txt"))
        .unwrap();
    let original = fs::read_to_string(&arg).unwrap();
    fs::write(&arg, original.replacen("sha256:", "sha256:00", 1)).unwrap();
    let e = cmd_report(&out).unwrap_err();
    assert_eq!(e.exit_code(), 1, "{e}");
    assert_eq!(status(&["report", out.to_str().unwrap()]), 1);
    fs::write(&arg, &original).unwrap();

    let evidence = fs::read_dir(out.join("evidence")).unwrap().next().unwrap().unwrap().path();
    let table = fs::read_to_string(&evidence).unwrap();
    fs::write(&evidence, table.replacen('1', "2", 1)).unwrap();
    assert!(cmd_report(&out).is_err());
    fs::write(&evidence, &table).unwrap();
    assert!(cmd_report(&out).is_ok());

    fs::write(out.join("decisions.log"), "").unwrap();
    assert_eq!(status(&["report", out.to_str().unwrap()]), 1);
    assert_eq!(status(&["report", dir.path().join("missing").to_str().unwrap()]), 1);
}

#[test]
fn zero_deadline_forces_failsafe_everywhere() {
    let mut m = RunManifest::new(AppKind::Uuv);
    m.deadline = Some(0.0);
    let run = cmd_run_scenario(&m).unwrap();
    let triggered: Vec<_> = run.decisions.iter().filter(|d| d.triggered).collect();
    assert!(!triggered.is_empty());
    assert!(triggered.iter().all(|d| d.decision == "failsafe"));
}
