use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn greenprior(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greenprior"))
        .args(args)
        .output()
        .unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> String {
    let conf = dir.join("pipeline.conf").to_string_lossy().into_owned();
    let mut args = vec!["synth", "--config", conf.as_str()];
    args.extend_from_slice(extra);
    let out = greenprior(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    conf
}

#[test]
fn full_chain_matches_goldens() {
    let dir = tempfile::tempdir().unwrap();
    let conf = synth(dir.path(), &[]);
    for stage in ["extract", "indicators", "prioritize", "benefits", "report"] {
        let out = greenprior(&[stage, "--config", &conf]);
        assert!(
            out.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stdout.is_empty());
    }
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/seed42");
    let mut n = 0;
    for entry in fs::read_dir(&golden).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap();
        let ours = fs::read(dir.path().join("out").join(name)).unwrap();
        assert!(ours == fs::read(&p).unwrap(), "{name:?} differs from golden");
        n += 1;
    }
    assert!(n > 20);
}

#[test]
fn synth_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    synth(a.path(), &["--seed", "9", "--buildings", "8"]);
    synth(b.path(), &["--seed", "9", "--buildings", "8"]);
    for entry in fs::read_dir(a.path()).unwrap() {
        let p = entry.unwrap().path();
        assert_eq!(
            fs::read(&p).unwrap(),
            fs::read(b.path().join(p.file_name().unwrap())).unwrap()
        );
    }
    let truth = fs::read_to_string(a.path().join("ground_truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 9);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let conf = synth(dir.path(), &["--buildings", "10"]);
    let out_dir = dir.path().join("elsewhere");
    let od = out_dir.to_string_lossy().into_owned();
    let out = greenprior(&[
        "run", "--config", &conf, "--out", &od, "--scheme", "entropy", "--cell", "1.0",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let weights = fs::read_to_string(out_dir.join("weights.csv")).unwrap();
    assert!(weights.lines().any(|l| l.starts_with("entropy,1,")));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let conf = synth(dir.path(), &["--buildings", "4"]);

    // missing upstream artifact: I/O
    let out = greenprior(&["benefits", "--config", &conf]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("greenprior extract"));

    // bad flag value: validation
    let out = greenprior(&["extract", "--config", &conf, "--scheme", "votes"]);
    assert_eq!(out.status.code(), Some(1));
    let out = greenprior(&["extract", "--config", &conf, "--cell", "-1"]);
    assert_eq!(out.status.code(), Some(1));

    // unknown key in the config: validation, before any work
    let bad = dir.path().join("bad.conf");
    fs::write(&bad, fs::read_to_string(&conf).unwrap() + "colour = green\n").unwrap();
    let out = greenprior(&["extract", "--config", &bad.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    // missing input file: validation
    fs::remove_file(dir.path().join("roads.geojson")).unwrap();
    let out = greenprior(&["extract", "--config", &conf]);
    assert_eq!(out.status.code(), Some(1));

    // no building points: computation
    let empty = tempfile::tempdir().unwrap();
    let conf = synth(empty.path(), &["--buildings", "0"]);
    let out = greenprior(&["extract", "--config", &conf]);
    assert_eq!(out.status.code(), Some(3));

    // usage error
    let out = greenprior(&["extract"]);
    assert_eq!(out.status.code(), Some(1));
    let out = greenprior(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}
