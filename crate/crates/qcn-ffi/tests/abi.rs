//! Exercises the C ABI exactly as a foreign caller would: through raw
//! pointers, NUL-terminated strings, and caller-allocated buffers.

use qcn_ffi::*;
use std::ffi::{c_char, CStr, CString};

const CHAIN: &str = "node X dim=2\nnode Y dim=2\nedge X -> Y\n\
                     root {X} component matrix=[0.7,0;0,0.3]\n\
                     channel {Y} from {X} component kraus=[1,0;0,1]\n\
                     projset comp on Y proj=[1,0;0,0] proj=[0,0;0,1]\n\
                     state one on X matrix=[0,0;0,1]\n";

const BELL: &str = "node X dim=2\nnode Y dim=2\nedge X -- Y\n\
                    root {X, Y} component matrix=[0.5,0,0,0.5;0,0,0,0;0,0,0,0;0.5,0,0,0.5]\n\
                    state zero on X matrix=[1,0;0,0]\n";

fn parse(text: &str) -> *mut QcnModel {
    let c = CString::new(text).unwrap();
    let mut handle: *mut QcnModel = std::ptr::null_mut();
    let status = unsafe { qcn_model_parse(c.as_ptr(), 1e-9, &mut handle) };
    assert_eq!(status, QcnStatus::QcnOk, "{}", last_error());
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(qcn_last_error()) }.to_string_lossy().into_owned()
}

fn read_matrix(buf: &[f64], d: usize, i: usize, j: usize) -> (f64, f64) {
    (buf[2 * (i * d + j)], buf[2 * (i * d + j) + 1])
}

#[test]
fn parse_inspect_free() {
    let m = parse(CHAIN);
    unsafe {
        assert_eq!(qcn_model_node_count(m), 2);
        assert_eq!(CStr::from_ptr(qcn_model_node_id(m, 0)).to_str(), Ok("X"));
        assert_eq!(CStr::from_ptr(qcn_model_node_id(m, 1)).to_str(), Ok("Y"));
        assert!(qcn_model_node_id(m, 2).is_null());
        assert_eq!(qcn_model_node_dim(m, 0), 2);
        assert_eq!(qcn_model_node_dim(m, 9), 0);
        assert_eq!(qcn_model_joint_dim(m), 4);
        qcn_model_free(m);
    }
}

#[test]
fn joint_values() {
    let m = parse(CHAIN);
    let d = unsafe { qcn_model_joint_dim(m) };
    let mut buf = vec![0.0; 2 * d * d];
    let status = unsafe { qcn_model_joint(m, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(status, QcnStatus::QcnOk, "{}", last_error());
    assert!((read_matrix(&buf, d, 0, 0).0 - 0.7).abs() < 1e-12);
    assert!((read_matrix(&buf, d, 3, 3).0 - 0.3).abs() < 1e-12);
    assert!(read_matrix(&buf, d, 1, 1).0.abs() < 1e-12);
    unsafe { qcn_model_free(m) };
}

#[test]
fn joint_buffer_too_small() {
    let m = parse(CHAIN);
    let mut buf = vec![0.0; 3];
    let status = unsafe { qcn_model_joint(m, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(status, QcnStatus::QcnBufferTooSmall);
    assert!(last_error().contains("need 32"));
    unsafe { qcn_model_free(m) };
}

#[test]
fn validate_ok_and_invalid() {
    let m = parse(CHAIN);
    let status = unsafe { qcn_model_validate(m, 6, 1e-9) };
    assert_eq!(status, QcnStatus::QcnOk, "{}", last_error());
    unsafe { qcn_model_free(m) };

    // D2 copies C without an arc from C.
    let bad = "node C dim=2\nnode D1 dim=2\nnode D2 dim=2\n\
               edge C -> D1\nedge D1 -- D2\n\
               root {C} component matrix=[0.6,0;0,0.4]\n\
               channel {D1, D2} from {C} component kraus=[1,0;0,0;0,0;0,1]\n";
    let m = parse(bad);
    let status = unsafe { qcn_model_validate(m, 6, 1e-9) };
    assert_eq!(status, QcnStatus::QcnInvalidModel);
    assert!(!last_error().is_empty());
    unsafe { qcn_model_free(m) };
}

#[test]
fn marginal_of_named_node() {
    let m = parse(CHAIN);
    let names = [CString::new("Y").unwrap()];
    let ptrs: Vec<*const c_char> = names.iter().map(|c| c.as_ptr()).collect();
    let mut buf = vec![0.0; 8];
    let status =
        unsafe { qcn_model_marginal(m, ptrs.as_ptr(), 1, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(status, QcnStatus::QcnOk, "{}", last_error());
    assert!((read_matrix(&buf, 2, 0, 0).0 - 0.7).abs() < 1e-12);
    assert!((read_matrix(&buf, 2, 1, 1).0 - 0.3).abs() < 1e-12);

    let bogus = [CString::new("Q").unwrap()];
    let ptrs: Vec<*const c_char> = bogus.iter().map(|c| c.as_ptr()).collect();
    let status =
        unsafe { qcn_model_marginal(m, ptrs.as_ptr(), 1, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(status, QcnStatus::QcnUnknownName);
    unsafe { qcn_model_free(m) };
}

#[test]
fn do_surgery_returns_new_model() {
    let m = parse(BELL);
    let target = CString::new("X").unwrap();
    let state = CString::new("zero").unwrap();
    let mut m2: *mut QcnModel = std::ptr::null_mut();
    let status = unsafe { qcn_model_do(m, target.as_ptr(), state.as_ptr(), &mut m2) };
    assert_eq!(status, QcnStatus::QcnOk, "{}", last_error());
    let d = unsafe { qcn_model_joint_dim(m2) };
    assert_eq!(d, 4);
    let mut buf = vec![0.0; 2 * d * d];
    let status = unsafe { qcn_model_joint(m2, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(status, QcnStatus::QcnOk, "{}", last_error());
    // |0><0| on X, maximally mixed on the severed partner Y.
    assert!((read_matrix(&buf, d, 0, 0).0 - 0.5).abs() < 1e-9);
    assert!((read_matrix(&buf, d, 1, 1).0 - 0.5).abs() < 1e-9);
    assert!(read_matrix(&buf, d, 2, 2).0.abs() < 1e-9);
    assert!(read_matrix(&buf, d, 0, 3).0.abs() < 1e-9);

    let wrong = CString::new("Y").unwrap();
    let mut m3: *mut QcnModel = std::ptr::null_mut();
    let status = unsafe { qcn_model_do(m, wrong.as_ptr(), state.as_ptr(), &mut m3) };
    assert_eq!(status, QcnStatus::QcnUnknownName);
    unsafe {
        qcn_model_free(m2);
        qcn_model_free(m);
    }
}

#[test]
fn reduce_probabilities() {
    let m = parse(CHAIN);
    let target = CString::new("Y").unwrap();
    let projset = CString::new("comp").unwrap();
    let mut probs = [0.0; 4];
    let mut count = 0usize;
    let status = unsafe {
        qcn_model_reduce_probabilities(
            m,
            target.as_ptr(),
            projset.as_ptr(),
            probs.as_mut_ptr(),
            probs.len(),
            &mut count,
        )
    };
    assert_eq!(status, QcnStatus::QcnOk, "{}", last_error());
    assert_eq!(count, 2);
    assert!((probs[0] - 0.7).abs() < 1e-12);
    assert!((probs[1] - 0.3).abs() < 1e-12);
    unsafe { qcn_model_free(m) };
}

#[test]
fn null_and_parse_errors() {
    let mut handle: *mut QcnModel = std::ptr::null_mut();
    let status = unsafe { qcn_model_parse(std::ptr::null(), 1e-9, &mut handle) };
    assert_eq!(status, QcnStatus::QcnNullArgument);

    let bad = CString::new("node X dim=two\n").unwrap();
    let status = unsafe { qcn_model_parse(bad.as_ptr(), 1e-9, &mut handle) };
    assert_eq!(status, QcnStatus::QcnParse);
    assert!(last_error().contains("line 1"));

    let sem = CString::new("node X dim=2\n").unwrap();
    let status = unsafe { qcn_model_parse(sem.as_ptr(), 1e-9, &mut handle) };
    assert_eq!(status, QcnStatus::QcnSemantic);

    unsafe {
        assert_eq!(qcn_model_node_count(std::ptr::null()), 0);
        assert_eq!(qcn_model_joint_dim(std::ptr::null()), 0);
        let mut buf = [0.0; 2];
        assert_eq!(
            qcn_model_joint(std::ptr::null(), buf.as_mut_ptr(), 2),
            QcnStatus::QcnNullArgument
        );
        qcn_model_free(std::ptr::null_mut());
    }
}

#[test]
fn header_is_generated() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/qcn.h");
    let text = std::fs::read_to_string(header).unwrap();
    for symbol in [
        "qcn_model_parse",
        "qcn_model_free",
        "qcn_model_validate",
        "qcn_model_joint",
        "qcn_model_marginal",
        "qcn_model_do",
        "qcn_model_reduce_probabilities",
        "qcn_last_error",
        "typedef struct QcnModel QcnModel;",
        "QCN_OK",
    ] {
        assert!(text.contains(symbol), "header is missing `{symbol}`");
    }
}
