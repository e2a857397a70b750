//! CLI acceptance: identical configuration and seed must produce byte
//! identical result files (manifests are compared with the wall-clock
//! `started_at` field excluded), plus exit-code contracts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

fn run(dir: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_mixlab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .status()
        .expect("spawn mixlab");
    assert!(status.success(), "mixlab {args:?} exited with {status:?}");
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().into_string().unwrap();
        out.insert(name, fs::read(entry.path()).unwrap());
    }
    out
}

fn manifest_without_start(bytes: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
    v.as_object_mut().unwrap().remove("started_at");
    v
}

#[test]
fn criterion_17_byte_identical_reruns() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["tv", "--mu", "0.5,0.3,0.2", "--nu", "0.2,0.3,0.5"],
        vec!["mix", "--graph", "cycle", "--n", "8"],
        vec!["spectrum", "--graph", "hypercube", "--d", "3"],
        vec!["hitting", "--graph", "cycle", "--n", "6"],
        vec![
            "cover",
            "--graph",
            "cycle",
            "--n",
            "5",
            "--method",
            "monte-carlo",
            "--samples",
            "200",
            "--seed",
            "7",
        ],
        vec!["lamplighter", "--nmin", "3", "--nmax", "4"],
        vec![
            "coupling", "--kind", "cycle", "--n", "6", "--k", "2", "--runs", "100", "--seed", "3",
        ],
        vec![
            "coupling", "--kind", "torus", "--n", "4", "--d", "2", "--k", "2", "--runs", "50",
            "--seed", "5",
        ],
        vec![
            "sst",
            "--kind",
            "hypercube",
            "--n",
            "5",
            "--runs",
            "100",
            "--seed",
            "11",
        ],
        vec![
            "sst",
            "--kind",
            "lamplighter",
            "--n",
            "3",
            "--runs",
            "50",
            "--seed",
            "13",
        ],
        vec!["vc", "--graph", "cycle", "--n", "8", "--tmax", "25"],
        vec![
            "speed", "--model", "tree", "--d", "3", "--steps", "500", "--walks", "200", "--seed",
            "17", "--lazy",
        ],
        vec!["entropy", "--model", "zd", "--d", "2", "--nmax", "12"],
        vec!["geom", "--check", "moments", "--graph", "cycle", "--n", "8"],
        vec![
            "geom",
            "--check",
            "corollary",
            "--graph",
            "hypercube",
            "--d",
            "3",
        ],
        vec!["geom", "--check", "folner", "--graph", "cycle", "--k", "6"],
        vec![
            "adapted", "--action", "simulate", "--rule", "region", "--steps", "20000", "--seed",
            "19",
        ],
        vec!["adapted", "--action", "excessive", "--radius", "20"],
        vec!["adapted", "--action", "lyapunov", "--m1", "1,1,1"],
        vec![
            "adapted",
            "--action",
            "normalize",
            "--m1",
            "1,1,1",
            "--m2",
            "1,2,3",
        ],
        vec![
            "adapted", "--action", "probe", "--shells", "25", "--alpha", "0.01",
        ],
        vec![
            "entropy", "--model", "tree", "--d", "3", "--nmax", "40", "--format", "json",
        ],
        vec![
            "mix", "--graph", "torus", "--n", "3", "--d", "2", "--format", "json",
        ],
    ];
    let base = std::env::temp_dir().join(format!("mixlab-determinism-{}", std::process::id()));
    for (i, args) in cases.iter().enumerate() {
        let dir_a = base.join(format!("case{i}-a"));
        let dir_b = base.join(format!("case{i}-b"));
        fs::create_dir_all(&dir_a).unwrap();
        fs::create_dir_all(&dir_b).unwrap();
        run(&dir_a, args);
        run(&dir_b, args);
        let snap_a = snapshot(&dir_a);
        let snap_b = snapshot(&dir_b);
        assert_eq!(
            snap_a.keys().collect::<Vec<_>>(),
            snap_b.keys().collect::<Vec<_>>(),
            "case {i}: file sets differ"
        );
        for (name, bytes_a) in &snap_a {
            let bytes_b = &snap_b[name];
            if name.ends_with("_manifest.json") {
                assert_eq!(
                    manifest_without_start(bytes_a),
                    manifest_without_start(bytes_b),
                    "case {i}: manifest {name} differs beyond started_at"
                );
            } else {
                assert_eq!(bytes_a, bytes_b, "case {i}: result file {name} differs");
            }
        }
    }
    fs::remove_dir_all(&base).ok();
    println!(
        "criterion 17: PASS - {} subcommand configurations rerun byte-identically",
        cases.len()
    );
}

#[test]
fn unknown_subcommand_exits_with_usage_code() {
    let status = Command::new(env!("CARGO_BIN_EXE_mixlab"))
        .arg("frobnicate")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn size_cap_uses_dedicated_exit_code() {
    // Exact cover time on a 20-vertex graph exceeds the augmented cap.
    let dir = std::env::temp_dir().join(format!("mixlab-cap-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_mixlab"))
        .args([
            "cover", "--graph", "cycle", "--n", "20", "--method", "exact", "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    fs::remove_dir_all(&dir).ok();
}
