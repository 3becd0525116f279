//! Drives the `hmmstates` binary end to end and checks exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ndarray::{arr1, arr2};

use hmmstates::cli::{cmd_classify, cmd_train};
use hmmstates::hmm::{Hmm, TrainConfig};
use hmmstates::seed;
use hmmstates::Error;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

fn hmmstates(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmmstates"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn generate_validate_stats_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let spec = format!("{FIXTURES}/small_spec.json");
    let out = hmmstates(&["generate", "--spec", &spec, "--out", "data"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(
        dir.path().join("run.json"),
        r#"{
            "cluster_range": [3, 3],
            "state_range": [2, 4],
            "sensor_ranges": [{"label": "All sensors", "first": 1}],
            "train": {"restarts": 1, "max_iter": 40}
        }"#,
    )
    .unwrap();
    let out = hmmstates(&["validate", "--config", "run.json"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("I=4 J=3 K=5"));

    let out = hmmstates(&["stats", "--config", "run.json", "--out", "stats"], dir.path());
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("gesture,avg_cp\n"));
    assert!(dir.path().join("stats/cp_medians.csv").is_file());

    let out = hmmstates(
        &["experiment", "--mode", "A", "--config", "run.json", "--jobs", "1"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("results/experiment_a.csv")).unwrap();
    assert!(table.starts_with("range,all_points,no_boundaries,trends\nAll sensors,"));
}

#[test]
fn seed_override_changes_generated_data() {
    let dir = tempfile::tempdir().unwrap();
    let spec = format!("{FIXTURES}/small_spec.json");
    assert_eq!(code(&hmmstates(&["generate", "--spec", &spec, "--out", "a"], dir.path())), 0);
    assert_eq!(
        code(&hmmstates(&["generate", "--spec", &spec, "--out", "b", "--seed", "99"], dir.path())),
        0
    );
    let read = |d: &str| fs::read(dir.path().join(d).join("g1_e1.csv")).unwrap();
    assert_eq!(read("a"), fs::read(Path::new(FIXTURES).join("small/g1_e1.csv")).unwrap());
    assert_ne!(read("a"), read("b"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"state_range": [5, 2]}"#).unwrap();
    fs::write(dir.path().join("typo.json"), r#"{"clusters": 4}"#).unwrap();

    // configuration problems
    assert_eq!(code(&hmmstates(&["validate", "--config", "bad.json"], dir.path())), 2);
    assert_eq!(code(&hmmstates(&["validate", "--config", "typo.json"], dir.path())), 2);
    // data problems
    assert_eq!(code(&hmmstates(&["validate", "--dataset", "missing"], dir.path())), 3);
    // parameter problems
    fs::write(dir.path().join("seqs.txt"), "1,2,1\n2,2,1\n").unwrap();
    let out = hmmstates(
        &["train", "--input", "seqs.txt", "--states", "0", "--alphabet", "2", "--output", "m.hmm"],
        dir.path(),
    );
    assert_eq!(code(&out), 4);
    // bad command line
    assert_ne!(code(&hmmstates(&["experiment", "--mode", "C"], dir.path())), 0);
}

#[test]
fn train_then_classify() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let generators = [
        ("up", arr2(&[[0.1, 0.9], [0.9, 0.1]]), arr2(&[[0.8, 0.1, 0.1], [0.1, 0.1, 0.8]])),
        ("flat", arr2(&[[0.95, 0.05], [0.05, 0.95]]), arr2(&[[0.1, 0.8, 0.1], [0.3, 0.4, 0.3]])),
    ];
    fs::create_dir(p.join("models")).unwrap();
    let mut rng = seed::rng(3);
    for (label, t, e) in &generators {
        let gen = Hmm::new(arr1(&[0.5, 0.5]), t.clone(), e.clone()).unwrap();
        let lines: Vec<String> = (0..30)
            .map(|_| {
                let s: Vec<String> = gen.sample(40, &mut rng).iter().map(|v| v.to_string()).collect();
                s.join(",")
            })
            .collect();
        fs::write(p.join(format!("{label}.txt")), lines.join("\n")).unwrap();
        let out = hmmstates(
            &[
                "train", "--input", &format!("{label}.txt"), "--states", "2", "--alphabet", "3",
                "--output", &format!("models/{label}.hmm"),
            ],
            p,
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }

    fs::write(p.join("probe.txt"), "2,2,2,2,2,2,2,2,2,2,2,2,1,2,2,2").unwrap();
    let out = hmmstates(&["classify", "--models", "models", "--sequence", "probe.txt"], p);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().last(), Some("flat"));

    let c = cmd_classify(&p.join("models"), &p.join("probe.txt")).unwrap();
    assert_eq!(c.label, "flat");
    assert_eq!(c.scores.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>(), ["flat", "up"]);
}

#[test]
fn classify_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::create_dir(p.join("one")).unwrap();
    fs::write(p.join("seq.txt"), "1 1 2").unwrap();

    // a model trained on one constant sequence still classifies it
    fs::write(p.join("const.txt"), "1,1,1,1,1,1").unwrap();
    cmd_train(&p.join("const.txt"), 2, 2, &TrainConfig::default(), &p.join("one/only.hmm")).unwrap();
    fs::write(p.join("const_probe.txt"), "1,1,1,1").unwrap();
    let c = cmd_classify(&p.join("one"), &p.join("const_probe.txt")).unwrap();
    assert_eq!(c.label, "only");
    assert!(c.scores[0].1 > -1e-6);

    // models over different alphabets cannot be compared
    Hmm::init_random(2, 3, 1).unwrap().save(&p.join("one/other.hmm")).unwrap();
    let err = cmd_classify(&p.join("one"), &p.join("seq.txt")).unwrap_err();
    assert!(matches!(err, Error::AlphabetMismatch { .. }), "{err:?}");
    assert_eq!(code(&hmmstates(&["classify", "--models", "one", "--sequence", "seq.txt"], p)), 3);

    // no models at all
    fs::create_dir(p.join("empty")).unwrap();
    assert!(matches!(
        cmd_classify(&p.join("empty"), &p.join("seq.txt")),
        Err(Error::ModelLoad { .. })
    ));
    fs::write(p.join("empty/broken.hmm"), "2 2\n0.5 0.5\n").unwrap();
    assert!(matches!(
        cmd_classify(&p.join("empty"), &p.join("seq.txt")),
        Err(Error::ModelLoad { .. })
    ));
}
