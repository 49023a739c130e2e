//! C interface to opclass datasets, reducers and classifiers.
//!
//! Every fallible function returns an [`OpcStatus`]. On failure the message
//! is available from [`opc_last_error`] on the same thread until the next
//! failing call. Handles are opaque; free each with its matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use opclass::dataset::{self, LabeledDataset, SynthParams};
use opclass::models::Classifier;
use opclass::ndarray::ArrayView2;
use opclass::reduce::ReducerModel;
use opclass::Error;

/// Result codes. Values 2 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericError = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

pub struct OpcDataset {
    inner: LabeledDataset,
}

pub struct OpcReducer {
    inner: ReducerModel,
}

pub struct OpcClassifier {
    inner: Classifier,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: OpcStatus, message: impl Into<String>) -> OpcStatus {
    set_error(message.into());
    status
}

fn from_error(e: Error) -> OpcStatus {
    let status = match e.exit_code() {
        2 => OpcStatus::InvalidArgument,
        4 => OpcStatus::NumericError,
        _ => OpcStatus::DataError,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> OpcStatus) -> OpcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(OpcStatus::Panic, "internal panic"),
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, OpcStatus> {
    if path.is_null() {
        return Err(fail(OpcStatus::NullPointer, "path is NULL"));
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(fail(OpcStatus::InvalidArgument, "path is not UTF-8")),
    }
}

unsafe fn matrix_arg<'a>(data: *const f64, rows: usize, cols: usize) -> Result<ArrayView2<'a, f64>, OpcStatus> {
    if data.is_null() {
        return Err(fail(OpcStatus::NullPointer, "input matrix is NULL"));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| fail(OpcStatus::InvalidArgument, "rows * cols overflows"))?;
    let slice = std::slice::from_raw_parts(data, len);
    Ok(ArrayView2::from_shape((rows, cols), slice).expect("length checked"))
}

unsafe fn out_slice<'a, T>(buf: *mut T, len: usize, needed: usize) -> Result<&'a mut [T], OpcStatus> {
    if buf.is_null() {
        return Err(fail(OpcStatus::NullPointer, "output buffer is NULL"));
    }
    if len < needed {
        return Err(fail(
            OpcStatus::BufferTooSmall,
            format!("output buffer holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(buf, needed))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message of the last failure on this thread, or NULL. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn opc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn opc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a dataset CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn opc_dataset_load(path: *const c_char, out: *mut *mut OpcDataset) -> OpcStatus {
    guard(|| {
        if out.is_null() {
            return fail(OpcStatus::NullPointer, "out is NULL");
        }
        let path = try_status!(path_arg(path));
        match dataset::load(&path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(OpcDataset { inner }));
                OpcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Generates a synthetic corpus.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn opc_dataset_synth(
    n_minority: usize,
    n_majority: usize,
    n_opcodes: usize,
    separation: f64,
    seed: u64,
    out: *mut *mut OpcDataset,
) -> OpcStatus {
    guard(|| {
        if out.is_null() {
            return fail(OpcStatus::NullPointer, "out is NULL");
        }
        let params = SynthParams {
            n_minority,
            n_majority,
            n_opcodes,
            separation,
            seed,
        };
        match dataset::synth_corpus(&params) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(OpcDataset { inner }));
                OpcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `dataset` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn opc_dataset_free(dataset: *mut OpcDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Row count, 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opc_dataset_rows(dataset: *const OpcDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n_rows())
}

/// Column count, 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opc_dataset_cols(dataset: *const OpcDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n_cols())
}

/// Copies the feature matrix, row-major, into `buf` (at least rows × cols values).
///
/// # Safety
/// `dataset` must be a live handle and `buf` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn opc_dataset_matrix(dataset: *const OpcDataset, buf: *mut f64, len: usize) -> OpcStatus {
    guard(|| {
        let Some(d) = dataset.as_ref() else {
            return fail(OpcStatus::NullPointer, "dataset is NULL");
        };
        let out = try_status!(out_slice(buf, len, d.inner.matrix.len()));
        for (dst, src) in out.iter_mut().zip(d.inner.matrix.iter()) {
            *dst = *src;
        }
        OpcStatus::Ok
    })
}

/// Copies the labels (1 = malware, 0 = benign) into `buf` (at least rows values).
///
/// # Safety
/// `dataset` must be a live handle and `buf` writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn opc_dataset_labels(dataset: *const OpcDataset, buf: *mut u8, len: usize) -> OpcStatus {
    guard(|| {
        let Some(d) = dataset.as_ref() else {
            return fail(OpcStatus::NullPointer, "dataset is NULL");
        };
        let out = try_status!(out_slice(buf, len, d.inner.n_rows()));
        for (dst, label) in out.iter_mut().zip(&d.inner.labels) {
            *dst = label.as_u8();
        }
        OpcStatus::Ok
    })
}

/// Loads a fitted reducer file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn opc_reducer_load(path: *const c_char, out: *mut *mut OpcReducer) -> OpcStatus {
    guard(|| {
        if out.is_null() {
            return fail(OpcStatus::NullPointer, "out is NULL");
        }
        let path = try_status!(path_arg(path));
        match ReducerModel::load(&path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(OpcReducer { inner }));
                OpcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `reducer` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn opc_reducer_free(reducer: *mut OpcReducer) {
    if !reducer.is_null() {
        drop(Box::from_raw(reducer));
    }
}

/// Features per output row, 0 for NULL.
///
/// # Safety
/// `reducer` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opc_reducer_output_width(reducer: *const OpcReducer) -> usize {
    reducer.as_ref().map_or(0, |r| r.inner.output_width())
}

/// Reduces a row-major `rows × cols` matrix into `out` (rows × output width values).
///
/// # Safety
/// `input` must be readable for rows × cols values and `out` writable for `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn opc_reducer_apply(
    reducer: *const OpcReducer,
    input: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
    out_len: usize,
) -> OpcStatus {
    guard(|| {
        let Some(r) = reducer.as_ref() else {
            return fail(OpcStatus::NullPointer, "reducer is NULL");
        };
        let x = try_status!(matrix_arg(input, rows, cols));
        let dst = try_status!(out_slice(out, out_len, rows * r.inner.output_width()));
        match r.inner.apply(x) {
            Ok(reduced) => {
                for (d, s) in dst.iter_mut().zip(reduced.iter()) {
                    *d = *s;
                }
                OpcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Loads a trained classifier file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn opc_classifier_load(path: *const c_char, out: *mut *mut OpcClassifier) -> OpcStatus {
    guard(|| {
        if out.is_null() {
            return fail(OpcStatus::NullPointer, "out is NULL");
        }
        let path = try_status!(path_arg(path));
        match Classifier::load(&path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(OpcClassifier { inner }));
                OpcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `classifier` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn opc_classifier_free(classifier: *mut OpcClassifier) {
    if !classifier.is_null() {
        drop(Box::from_raw(classifier));
    }
}

/// Expected features per row, 0 for NULL.
///
/// # Safety
/// `classifier` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opc_classifier_input_width(classifier: *const OpcClassifier) -> usize {
    classifier.as_ref().map_or(0, |c| c.inner.input_width())
}

/// Scores a row-major `rows × cols` matrix. Writes the malware probability
/// of each row to `proba` and, unless `labels` is NULL, the 0/1 decision.
///
/// # Safety
/// `input` must be readable for rows × cols values; `proba` and `labels`
/// (when not NULL) writable for `rows` values.
#[no_mangle]
pub unsafe extern "C" fn opc_classifier_predict(
    classifier: *const OpcClassifier,
    input: *const f64,
    rows: usize,
    cols: usize,
    proba: *mut f64,
    labels: *mut u8,
) -> OpcStatus {
    guard(|| {
        let Some(c) = classifier.as_ref() else {
            return fail(OpcStatus::NullPointer, "classifier is NULL");
        };
        let x = try_status!(matrix_arg(input, rows, cols));
        let proba_out = try_status!(out_slice(proba, rows, rows));
        let prediction = match c.inner.predict(x) {
            Ok(p) => p,
            Err(e) => return from_error(e),
        };
        proba_out.copy_from_slice(&prediction.proba);
        if !labels.is_null() {
            let labels_out = std::slice::from_raw_parts_mut(labels, rows);
            for (d, l) in labels_out.iter_mut().zip(&prediction.labels) {
                *d = l.as_u8();
            }
        }
        OpcStatus::Ok
    })
}
