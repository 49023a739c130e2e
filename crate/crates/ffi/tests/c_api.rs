use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use opclass::dataset::{self, SynthParams};
use opclass::models::{train_classifier, ClassifierConfig, ClassifierKind};
use opclass::reduce::{self, ReducerKind, ReducerSpec};
use opclass_ffi::*;

fn small_corpus() -> opclass::dataset::LabeledDataset {
    dataset::synth_corpus(&SynthParams {
        n_minority: 15,
        n_majority: 30,
        n_opcodes: 10,
        separation: 0.9,
        seed: 2,
    })
    .unwrap()
}

fn c_path(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = opc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn dataset_round_trip_through_handle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let data = small_corpus();
    dataset::persist(&data, &path).unwrap();

    let mut handle = ptr::null_mut();
    unsafe {
        assert_eq!(opc_dataset_load(c_path(&path).as_ptr(), &mut handle), OpcStatus::Ok);
        assert_eq!(opc_dataset_rows(handle), 45);
        assert_eq!(opc_dataset_cols(handle), 10);
        let mut matrix = vec![0.0; 450];
        assert_eq!(opc_dataset_matrix(handle, matrix.as_mut_ptr(), matrix.len()), OpcStatus::Ok);
        assert_eq!(matrix, data.matrix.iter().copied().collect::<Vec<_>>());
        let mut labels = vec![9u8; 45];
        assert_eq!(opc_dataset_labels(handle, labels.as_mut_ptr(), 45), OpcStatus::Ok);
        assert_eq!(labels, data.labels.iter().map(|l| l.as_u8()).collect::<Vec<_>>());
        opc_dataset_free(handle);
    }
}

#[test]
fn synth_matches_library() {
    let mut handle = ptr::null_mut();
    unsafe {
        assert_eq!(opc_dataset_synth(15, 30, 10, 0.9, 2, &mut handle), OpcStatus::Ok);
        let mut matrix = vec![0.0; 450];
        assert_eq!(opc_dataset_matrix(handle, matrix.as_mut_ptr(), 450), OpcStatus::Ok);
        assert_eq!(matrix, small_corpus().matrix.iter().copied().collect::<Vec<_>>());
        opc_dataset_free(handle);
    }
}

#[test]
fn reducer_and_classifier_agree_with_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_corpus();
    let fit = reduce::fit(&ReducerSpec::new(ReducerKind::VarianceThreshold), data.matrix.view()).unwrap();
    let reducer_path = dir.path().join("vt.bin");
    fit.model.save(&reducer_path).unwrap();
    let reduced = fit.model.apply_dataset(&data).unwrap();
    let mut cfg = ClassifierConfig::default();
    cfg.forest.n_trees = 10;
    let (model, _) = train_classifier(ClassifierKind::Rf, &reduced, &cfg, 4, "vt").unwrap();
    let model_path = dir.path().join("rf.bin");
    model.save(&model_path).unwrap();
    let expected = model.predict(reduced.matrix.view()).unwrap();

    let raw: Vec<f64> = data.matrix.iter().copied().collect();
    let (mut r, mut c) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(opc_reducer_load(c_path(&reducer_path).as_ptr(), &mut r), OpcStatus::Ok);
        let width = opc_reducer_output_width(r);
        assert_eq!(width, reduced.n_cols());
        let mut x = vec![0.0; 45 * width];
        assert_eq!(opc_reducer_apply(r, raw.as_ptr(), 45, 10, x.as_mut_ptr(), x.len()), OpcStatus::Ok);

        assert_eq!(opc_classifier_load(c_path(&model_path).as_ptr(), &mut c), OpcStatus::Ok);
        assert_eq!(opc_classifier_input_width(c), width);
        let mut proba = vec![0.0; 45];
        let mut labels = vec![0u8; 45];
        assert_eq!(
            opc_classifier_predict(c, x.as_ptr(), 45, width, proba.as_mut_ptr(), labels.as_mut_ptr()),
            OpcStatus::Ok
        );
        assert_eq!(proba, expected.proba);
        assert_eq!(labels, expected.labels.iter().map(|l| l.as_u8()).collect::<Vec<_>>());

        // Wrong width is a data error with a message.
        assert_eq!(
            opc_classifier_predict(c, raw.as_ptr(), 45, 10, proba.as_mut_ptr(), ptr::null_mut()),
            if width == 10 { OpcStatus::Ok } else { OpcStatus::DataError }
        );
        opc_reducer_free(r);
        opc_classifier_free(c);
    }
}

#[test]
fn errors_are_reported() {
    let mut handle = ptr::null_mut();
    unsafe {
        let missing = CString::new("/no/such/file.csv").unwrap();
        assert_eq!(opc_dataset_load(missing.as_ptr(), &mut handle), OpcStatus::DataError);
        assert!(handle.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(opc_dataset_load(ptr::null(), &mut handle), OpcStatus::NullPointer);
        assert_eq!(opc_dataset_synth(0, 5, 10, 0.5, 1, &mut handle), OpcStatus::InvalidArgument);
        assert_eq!(opc_dataset_synth(5, 5, 10, 2.0, 1, &mut handle), OpcStatus::InvalidArgument);

        assert_eq!(opc_dataset_synth(5, 5, 4, 0.5, 1, &mut handle), OpcStatus::Ok);
        let mut small = [0.0; 3];
        assert_eq!(opc_dataset_matrix(handle, small.as_mut_ptr(), 3), OpcStatus::BufferTooSmall);
        assert!(last_error().contains("40"));
        opc_dataset_free(handle);

        assert_eq!(opc_dataset_rows(ptr::null()), 0);
        opc_dataset_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/opclass.h")).unwrap();
    for name in [
        "typedef struct OpcDataset OpcDataset",
        "typedef struct OpcClassifier OpcClassifier",
        "OPC_STATUS_BUFFER_TOO_SMALL",
        "opc_dataset_load",
        "opc_reducer_apply",
        "opc_classifier_predict",
        "opc_last_error",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(opc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn c_program_links_against_the_library() {
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let test_exe = std::env::current_exe().unwrap();
    // The cdylib is built next to the test binary in target/<profile>/deps.
    let lib_dir = test_exe.parent().unwrap();
    if !lib_dir.join("libopclass_ffi.so").exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no shared library or C compiler");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(lib_dir)
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-lopclass_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // 30 rows of 500 tokens over 8 opcodes, 20 malware.
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "30 8 15000 20");
}
