//! End-to-end CLI checks: exit codes, report shapes, and error routing.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_qcn")
}

fn model(name: &str) -> String {
    format!("{}/models/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn write_temp(name: &str, content: &str) -> PathBuf {
    let p = std::env::temp_dir().join(name);
    std::fs::write(&p, content).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

#[test]
fn joint_output_exact() {
    let out = run(&["joint", &model("chain.qcn")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("report joint\nnodes X Y\nmatrix 4x4\nrow 0.7+0i 0+0i 0+0i 0+0i\n"));
    assert!(text.contains("row 0+0i 0+0i 0+0i 0.3+0i\n"));
    assert!(text.ends_with("end\n"));
}

#[test]
fn parse_error_exits_2() {
    let p = write_temp("bad-parse.qcn", "node X dim=two\n");
    let out = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn missing_file_exits_2() {
    let out = run(&["joint", "/nonexistent/model.qcn"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn semantic_error_exits_1() {
    let p = write_temp("bad-sem.qcn", "node X dim=2\n");
    let out = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("no root/channel declaration"), "{err}");
}

#[test]
fn respects_failure_exits_1() {
    // D2 copies C, but only D1 has the arc from C.
    let text = "node C dim=2\nnode D1 dim=2\nnode D2 dim=2\n\
                edge C -> D1\nedge D1 -- D2\n\
                root {C} component matrix=[0.6,0;0,0.4]\n\
                channel {D1, D2} from {C} component kraus=[1,0;0,0;0,0;0,1]\n";
    let p = write_temp("bad-respects.qcn", text);
    let out = run(&["validate", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("status fail"), "{stdout}");
    assert!(stdout.contains("violation "), "{stdout}");
}

#[test]
fn zero_probability_conditioning_exits_3() {
    let text = "node X dim=2\nnode Y dim=2\nedge X -> Y\n\
                root {X} component matrix=[1,0;0,0]\n\
                channel {Y} from {X} component kraus=[1,0;0,1]\n\
                projset comp on Y proj=[1,0;0,0] proj=[0,0;0,1]\n";
    let p = write_temp("point.qcn", text);
    let out = run(&[
        "reduce",
        p.to_str().unwrap(),
        "--target",
        "Y",
        "--projset",
        "comp",
        "--outcome",
        "o1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("zero probability"), "{err}");
}

#[test]
fn unknown_projset_exits_2() {
    let out = run(&["reduce", &model("chain.qcn"), "--target", "Y", "--projset", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_node_in_marginal_exits_2() {
    let out = run(&["marginal", &model("chain.qcn"), "--nodes", "Q"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reduce_probabilities_reported() {
    let out = run(&["reduce", &model("chain.qcn"), "--target", "Y", "--projset", "comp"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("outcome o0 probability 0.7"));
    assert!(text.contains("outcome o1 probability 0.3"));
}

#[test]
fn do_reports_post_network() {
    let out = run(&["do", &model("bell.qcn"), "--target", "X", "--state", "zero"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("report do\ntarget X\n"));
    assert!(text.contains("row 0.5+0i 0+0i 0+0i 0+0i"));
}

#[test]
fn sequence_tree_and_sample() {
    let script = write_temp("seq-cli.txt", "reduce Y comp\ndo X one\n");
    let out = run(&["sequence", &model("chain.qcn"), "--script", script.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("branch o0 probability 0.7"));
    assert!(text.contains("branch do X probability 1"));

    let out = run(&[
        "sequence",
        &model("chain.qcn"),
        "--script",
        script.to_str().unwrap(),
        "--sample",
        "--seed",
        "3",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("report trajectory\nstep 0 outcome o"));
    assert!(text.contains("step 1 outcome do X probability 1"));
}

#[test]
fn sample_requires_seed() {
    let script = write_temp("seq-cli2.txt", "reduce Y comp\n");
    let out = run(&[
        "sequence",
        &model("chain.qcn"),
        "--script",
        script.to_str().unwrap(),
        "--sample",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_script_line_exits_2() {
    let script = write_temp("seq-bad.txt", "measure Y comp\n");
    let out = run(&["sequence", &model("chain.qcn"), "--script", script.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("script line 1"), "{err}");
}

#[test]
fn five_set_model_full_pipeline() {
    for cmd in [
        vec!["validate", &*model("five.qcn")],
        vec!["joint", &*model("five.qcn")],
        vec!["marginal", &*model("five.qcn"), "--nodes", "E"],
        vec!["reduce", &*model("five.qcn"), "--target", "C", "--projset", "comp"],
        vec!["do", &*model("five.qcn"), "--target", "C", "--state", "zero"],
    ] {
        let out = run(&cmd);
        assert!(
            out.status.success(),
            "{cmd:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
