use std::fs;
use std::process::Command;

fn mvprof() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mvprof"))
}

#[test]
fn lists_subcommands() {
    let out = mvprof().arg("--help").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["table1", "gbm", "heston", "ap-traces", "real"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "paths = 9\nseed = 1\nsteps = 20\nlookback = 10\nhorizon = 20/252\ngamma = 2\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = mvprof()
        .args(["gbm", "--config"])
        .arg(&cfg)
        .args(["--paths", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("paths = 3\n"));
    assert!(manifest.contains("seed = 1\n"));
    assert!(manifest.contains("gamma = 2\n"));
    assert!(manifest.contains("risk_free = 0.02\n"));
    let ledgers = fs::read_to_string(out.join("ledgers.csv")).unwrap();
    // 3 paths x strategies A, B
    assert_eq!(ledgers.lines().count(), 1 + 6);
}

#[test]
fn bad_price_file_fails_with_row() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("p.csv");
    fs::write(&prices, "date,close\n2020-01-02,1\n2020-01-03,0\n").unwrap();
    let out = mvprof()
        .args(["real", "--prices"])
        .arg(&prices)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("row 2"), "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvprof()
        .args(["heston", "--set", "gama=2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}
