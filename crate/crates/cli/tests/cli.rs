use std::path::Path;
use std::process::{Command, Output};

use jointtrack::graph::{build_graph, write_graph};
use jointtrack::model::{Detection, JointType, Point};
use jointtrack::potentials::{write_potentials, PotentialTable};

fn jointtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jointtrack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = jointtrack(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = jointtrack(&["eval", "--gt", "a", "--pred", "b", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn version_names_the_format_revision() {
    let out = jointtrack(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "jointtrack 0.1.0 (format revision 1)");
}

#[test]
fn missing_input_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let out = jointtrack(&["eval", "--gt", s(&missing), "--pred", s(&missing)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn eval_of_annotations_against_themselves_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    let out = jointtrack(&["synth", "--seed", "3", "--frames", "5", "--occlusions", "1", "--out-dir", s(&scene)]);
    assert!(out.status.success());
    let ann = scene.join("annotations.jsonl");
    let out = jointtrack(&["eval", "--gt", s(&ann), "--pred", s(&ann)]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["MOTA"], 100.0);
    assert_eq!(report["mAP"], 100.0);
}

#[test]
fn solve_with_oracle_on_ten_variables() {
    let dir = tempfile::tempdir().unwrap();
    // 5 nodes, 2 spatial and 3 temporal edges.
    let dets = [
        Detection::new(0, 0, JointType(0), Point::new(0.0, 0.0), 0.9, 1.0).unwrap(),
        Detection::new(1, 0, JointType(1), Point::new(0.0, 40.0), 0.8, 1.0).unwrap(),
        Detection::new(2, 1, JointType(0), Point::new(2.0, 0.0), 0.7, 1.0).unwrap(),
        Detection::new(3, 1, JointType(1), Point::new(2.0, 40.0), 0.4, 1.0).unwrap(),
        Detection::new(4, 2, JointType(0), Point::new(4.0, 0.0), 0.6, 1.0).unwrap(),
    ];
    let g = build_graph(&dets, 1).unwrap();
    let mut pot = PotentialTable::default();
    let costs = [-1.5, 0.3, -0.2, 0.8, -2.0, 1.1, -0.4, 0.6, -0.9, 0.25];
    let mut it = costs.iter().copied();
    for d in &g.nodes {
        pot.node_cost.insert(d.id, it.next().unwrap());
    }
    for e in &g.spatial_edges {
        pot.spatial_cost.insert((e.a, e.b), it.next().unwrap());
    }
    for e in &g.temporal_edges {
        pot.temporal_cost.insert((e.a, e.b), it.next().unwrap());
    }
    assert_eq!(it.next(), None, "ten variables");
    let (gp, pp) = (dir.path().join("g.jsonl"), dir.path().join("p.jsonl"));
    write_graph(&gp, &g).unwrap();
    write_potentials(&pp, &pot).unwrap();
    let out = jointtrack(&["solve", "--graph", s(&gp), "--potentials", s(&pp), "--oracle"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let value = |key: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
            .unwrap()
    };
    assert_eq!(value("variables"), "10");
    assert_eq!(value("objective "), value("oracle_objective"));
    assert_eq!(value("match"), "true");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("synth.toml");
    std::fs::write(&cfg, "persons = 1\nframes = 3\nseed = 5\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(jointtrack(&["synth", "--config", s(&cfg), "--out-dir", s(&a)]).status.success());
    assert!(jointtrack(&["synth", "--config", s(&cfg), "--frames", "4", "--out-dir", s(&b)]).status.success());
    let lines = |d: &Path| std::fs::read_to_string(d.join("annotations.jsonl")).unwrap().lines().count();
    assert_eq!((lines(&a), lines(&b)), (3, 4));

    std::fs::write(&cfg, "persons = 1\nbogus = 2\n").unwrap();
    let out = jointtrack(&["synth", "--config", s(&cfg), "--out-dir", s(&a)]);
    assert_eq!(out.status.code(), Some(1));
}
