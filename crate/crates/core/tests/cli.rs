use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn opclass(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opclass"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const SMALL: &str = r#"seed = 5
[input]
synth = true
[synth]
n_minority = 20
n_majority = 60
n_opcodes = 12
separation = 0.9
[output]
dir = "run-report"
[grid]
reducers = ["none", "vt"]
classifiers = ["rf"]
[forest]
n_trees = 10
"#;

#[test]
fn run_matches_manual_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("small.toml"), SMALL).unwrap();
    ok(opclass(&["run", "small.toml"], p));
    ok(opclass(
        &["synth", "--minority", "20", "--majority", "60", "--opcodes", "12", "--sep", "0.9", "--seed", "5", "--out", "synth.csv"],
        p,
    ));
    ok(opclass(
        &["evaluate", "--in", "synth.csv", "--grid", "none,vt:rf", "--config", "small.toml", "--seed", "5", "--out", "manual"],
        p,
    ));
    for file in ["table.csv", "folds.csv", "fit_log.csv", "fold_assignment.csv"] {
        assert_eq!(
            fs::read(p.join("run-report").join(file)).unwrap(),
            fs::read(p.join("manual").join(file)).unwrap(),
            "{file} differs"
        );
    }
    let table = fs::read_to_string(p.join("run-report/table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("# config_hash=") && lines[0].ends_with("seed=5"));
    assert_eq!(lines[1], "features,classifier,accuracy,tpr,tnr,ppv");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("None,RF,"));
    assert!(lines[3].starts_with("VT,RF,"));
}

#[test]
fn missing_asm_dir_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "seed = 1\n[input]\nasm_dir = \"does-not-exist\"\n[output]\ndir = \"out\"\n",
    )
    .unwrap();
    let out = opclass(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn single_class_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("one.csv"), "row_id,label,a,b\nx,1,1,2\ny,1,3,4\nz,1,5,6\n").unwrap();
    let out = opclass(&["evaluate", "--in", "one.csv", "--grid", "none:rf", "--out", "rep"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn diverging_training_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let cfg = SMALL.replace("classifiers = [\"rf\"]", "classifiers = [\"dnn2\"]")
        + "[dnn]\nepochs = 3\nlearning_rate = 1e300\n";
    fs::write(p.join("nan.toml"), cfg).unwrap();
    let out = opclass(&["run", "nan.toml"], p);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("classifier=DNN-2L"));
}

#[test]
fn extract_balance_reduce_train_predict() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let asm = p.join("asm");
    let listings = [
        ("malware", "m1", vec!["push", "mov", "xor", "xor"]),
        ("malware", "m2", vec!["xor", "xor", "call"]),
        ("malware", "m3", vec!["xor", "jmp", "xor"]),
        ("malware", "m4", vec!["xor", "xor", "xor", "ret"]),
        ("benign", "b1", vec!["push", "mov", "ret"]),
        ("benign", "b2", vec!["mov", "mov", "call", "ret"]),
    ];
    for (class, name, ops) in &listings {
        fs::create_dir_all(asm.join(class)).unwrap();
        let mut body = format!("\n{name}.exe:     file format pei-i386\n\nDisassembly of section .text:\n\n");
        for (i, op) in ops.iter().enumerate() {
            body.push_str(&format!("  {:x}:\t55                   \t{op}    %ebp\n", 0x401000 + i));
        }
        fs::write(asm.join(class).join(format!("{name}.asm")), body).unwrap();
    }
    fs::write(asm.join("benign/broken.asm"), "garbage only\n").unwrap();

    ok(opclass(&["extract", "--asm-dir", "asm", "--out", "features.csv", "--master-out", "master.txt"], p));
    let master = fs::read_to_string(p.join("master.txt")).unwrap();
    let ops: Vec<&str> = master.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(ops, ["call", "jmp", "mov", "push", "ret", "xor"]);
    let features = fs::read_to_string(p.join("features.csv")).unwrap();
    assert!(features.contains("row_id,label,call,jmp,mov,push,ret,xor"));
    assert!(features.contains("malware/m4,1,0,0,0,0,1,3"));
    assert!(!features.contains("broken"));

    ok(opclass(
        &["balance", "--in", "features.csv", "--out", "bal.csv", "--k", "2", "--audit", "parents.csv", "--seed", "3"],
        p,
    ));
    let audit = fs::read_to_string(p.join("parents.csv")).unwrap();
    let audit_rows: Vec<&str> = audit.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(audit_rows[0], "synthetic_row_id,parent_a,parent_b,lambda");
    assert_eq!(audit_rows.len(), 1 + 2);
    assert!(audit_rows[1].contains(",benign/"));

    ok(opclass(&["reduce", "--fit", "--kind", "vt", "--threshold", "0.1", "--in", "bal.csv", "--model", "vt.bin"], p));
    ok(opclass(&["reduce", "--apply", "--model", "vt.bin", "--in", "features.csv", "--out", "reduced.csv"], p));
    ok(opclass(
        &["train", "--model", "rf", "--in", "bal.csv", "--reducer", "vt.bin", "--out", "rf.bin", "--trees", "15", "--seed", "7"],
        p,
    ));
    ok(opclass(&["predict", "--model", "rf.bin", "--in", "features.csv", "--reducer", "vt.bin", "--out", "pred.csv"], p));
    let pred = fs::read_to_string(p.join("pred.csv")).unwrap();
    let rows: Vec<&str> = pred.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "row_id,label,proba,predicted");
    assert_eq!(rows.len(), 7);

    // A model trained on reduced features rejects raw input.
    let out = opclass(&["predict", "--model", "rf.bin", "--in", "features.csv", "--out", "bad.csv"], p);
    let reduced_header = fs::read_to_string(p.join("reduced.csv")).unwrap();
    let reduced_cols = reduced_header.lines().find(|l| l.starts_with("row_id")).unwrap().split(',').count() - 2;
    if reduced_cols != 6 {
        assert_eq!(out.status.code(), Some(3));
    }
}

#[test]
fn unknown_model_kind_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.csv"), "row_id,label,a\nx,1,1\ny,0,2\n").unwrap();
    let out = opclass(&["train", "--model", "svm", "--in", "d.csv", "--out", "m.bin"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
