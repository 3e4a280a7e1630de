use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

const ONES2: &str = "#ncseries d=2 cutoff=40
#linear dim=1
#u 0,1,0
#v 0,1,0
#mat 1,0,0,1,0
#mat 2,0,0,1,0
#tail-envelope geometric,1,1.4142135623730951
";

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("freenc-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(dir: &PathBuf, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freenc"))
        .args(args)
        .current_dir(dir)
        .env_remove("FREENC_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn radius_of_the_two_letter_geometric_series() {
    let dir = scratch("radius");
    fs::write(dir.join("ones2.txt"), ONES2).unwrap();
    let o = run(&dir, &["radius", "--series", "ones2.txt"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "R=0.707107");
}

#[test]
fn fourth_moment_is_catalan() {
    let dir = scratch("moments");
    let o = run(&dir, &["moments", "--d", "1", "--N", "4", "--word", "1111"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "tau=2");
    let o = run(&dir, &["moments", "--d", "2", "--N", "6", "--word", "112211"]);
    assert_eq!(stdout(&o).trim(), "tau=2");
    let o = run(&dir, &["moments", "--d", "1", "--N", "6", "--word", "111111"]);
    assert_eq!(stdout(&o).trim(), "tau=5");
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = scratch("exit2");
    let o = run(&dir, &["moments", "--d", "2", "--N", "4", "--word", "13"]);
    assert_eq!(o.status.code(), Some(2));
    let line = stderr(&o);
    assert!(line.starts_with("error kind="), "{line}");
    assert!(line.contains("exit=2"));

    let o = run(&dir, &["fock-norm", "--d", "2", "--N", "100000"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kind=basis_too_large"));

    let o = run(&dir, &["radius", "--series", "missing.txt"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&dir, &["moments", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kind=usage"));
}

#[test]
fn numeric_failures_exit_with_three() {
    let dir = scratch("exit3");
    let o = run(&dir, &["wandering", "--d", "2", "--N", "1", "--row", "11:1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("kind=window_too_small exit=3"));
}

#[test]
fn summary_records_a_replayable_config() {
    let dir = scratch("summary");
    fs::write(dir.join("w.cfg"), "d = 2\nN = 4  # overridden below\nrow = 1:1;1:-1\n").unwrap();
    let o = run(&dir, &["wandering", "--config", "w.cfg", "--N", "6", "--summary", "s.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("s.json")).unwrap()).unwrap();
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["command"], "wandering");
    assert_eq!(doc["config"]["N"], "6");
    assert_eq!(doc["config"]["row"], "1:1;1:-1");
    assert_eq!(doc["result"]["wandering_dim"], 1);

    // Replaying the recorded settings reproduces the result.
    let cfg: String = doc["config"]
        .as_object()
        .unwrap()
        .iter()
        .filter(|(k, _)| k.as_str() != "summary")
        .map(|(k, v)| format!("{k}={}\n", v.as_str().unwrap()))
        .collect();
    fs::write(dir.join("replay.cfg"), cfg).unwrap();
    let again = run(&dir, &["wandering", "--config", "replay.cfg"]);
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(stdout(&again), stdout(&o));
}

#[test]
fn artifact_goes_to_out_or_stdout() {
    let dir = scratch("out");
    let args = ["strongconv", "--expr", "(var 1)", "--n", "4,6", "--trials", "3", "--fockN", "8", "--seed", "7"];
    let to_stdout = run(&dir, &args);
    assert!(to_stdout.status.success(), "{}", stderr(&to_stdout));
    let csv = stdout(&to_stdout);
    assert_eq!(csv.lines().next(), Some("n,trial,seed,value,reference,gap,in_domain"));
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    assert!(stderr(&to_stdout).contains("reference="));

    let mut with_out = args.to_vec();
    with_out.extend(["--out", "sub/records.csv"]);
    let o = run(&dir, &with_out);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(dir.join("sub/records.csv")).unwrap(), csv);
    assert!(stdout(&o).contains("reference="));
    let leftovers: Vec<_> = fs::read_dir(dir.join("sub")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers.len(), 1, "temporary files left behind: {leftovers:?}");
}

#[test]
fn out_dir_environment_anchors_relative_paths() {
    let dir = scratch("envdir");
    let base = dir.join("results");
    let o = Command::new(env!("CARGO_BIN_EXE_freenc"))
        .args(["jsr", "--tuple", "x.txt", "--out", "jsr.csv"])
        .current_dir(&dir)
        .env("FREENC_OUT_DIR", &base)
        .output()
        .unwrap();
    // A missing input fails before anything is written.
    assert_eq!(o.status.code(), Some(2));
    fs::write(dir.join("x.txt"), "#nctuple n=1 d=2\n0.3\n0.4\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_freenc"))
        .args(["jsr", "--tuple", "x.txt", "--out", "jsr.csv"])
        .current_dir(&dir)
        .env("FREENC_OUT_DIR", &base)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(base.join("jsr.csv").exists());
    assert!(stdout(&o).starts_with("rho=0.5 "), "{}", stdout(&o));
}
