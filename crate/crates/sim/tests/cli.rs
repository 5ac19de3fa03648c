use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ialf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ialf")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = "K = 3\nnt = 4\nnr = 4\nB_total = 12\n\
alpha.row0 = 1 0.5 0.1\nalpha.row1 = 0.55 1 0.45\nalpha.row2 = 0.1 0.5 1\n\
snr_db = 0 20\nschemes = GREEDY RIMS\nmode = FIXED(1)\ntrials = 500\nseed = 11\n";

#[test]
fn table_one_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t1.csv");
    let o = ialf(&["--config", path_str(&configs().join("table1.cfg")), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 28);
    assert!(lines[0].starts_with("scenario_id,snr_db,scheme,mode_d,B_total,"));
    let at_30: Vec<f64> =
        lines.iter().filter(|l| l.starts_with("table1,30,")).map(|l| l.split(',').nth(5).unwrap().parse().unwrap()).collect();
    // EAS, RIMS, GREEDY in config order.
    assert_eq!(at_30.len(), 3);
    assert!(at_30[2] >= at_30[1] && at_30[1] >= at_30[0], "{at_30:?}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        assert!(ialf(&["--config", path_str(&cfg), "--out", path_str(out)]).status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let o = ialf(&["--config", path_str(&cfg), "--seed", "12"]);
    assert!(o.status.success());
    assert_ne!(o.stdout, fs::read(&a).unwrap());
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",500,12")));
}

#[test]
fn trials_override_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let (theory, mc) = (dir.path().join("theory.csv"), dir.path().join("mc.csv"));
    assert!(ialf(&["--config", path_str(&cfg), "--trials", "0", "--out", path_str(&theory)]).status.success());
    assert!(ialf(&["--config", path_str(&cfg), "--out", path_str(&mc), "--mc-mode", "cell"]).status.success());
    let text = fs::read_to_string(&theory).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains(",,,0,")));

    let same = ialf(&["--compare", path_str(&theory), path_str(&theory), "--threshold", "0"]);
    assert_eq!(same.status.code(), Some(0));
    let report = String::from_utf8(same.stdout).unwrap();
    assert!(report.contains("GREEDY,2,0.000000,0.000000"), "{report}");

    assert_eq!(ialf(&["--compare", path_str(&theory), path_str(&mc)]).status.code(), Some(0));
    assert_eq!(ialf(&["--compare", path_str(&theory), path_str(&mc), "--threshold", "0"]).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.cfg", &SMALL.replace("nr = 4", "nr = four"));
    let o = ialf(&["--config", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    assert_eq!(ialf(&["--config", path_str(&dir.path().join("missing.cfg"))]).status.code(), Some(1));

    let infeasible = write_config(dir.path(), "inf.cfg", &SMALL.replace("FIXED(1)", "FIXED(3)"));
    assert_eq!(ialf(&["--config", path_str(&infeasible)]).status.code(), Some(3));

    let theory = dir.path().join("t.csv");
    let cfg = write_config(dir.path(), "ok.cfg", &SMALL.replace("trials = 500", "trials = 0"));
    assert!(ialf(&["--config", path_str(&cfg), "--out", path_str(&theory)]).status.success());
    let reordered = write_config(dir.path(), "r.cfg", &SMALL.replace("GREEDY RIMS", "RIMS GREEDY").replace("trials = 500", "trials = 0"));
    let other = dir.path().join("r.csv");
    assert!(ialf(&["--config", path_str(&reordered), "--out", path_str(&other)]).status.success());
    assert_eq!(ialf(&["--compare", path_str(&theory), path_str(&other)]).status.code(), Some(1));
}
