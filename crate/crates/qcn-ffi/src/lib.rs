//! C ABI for the qcn library.
//!
//! Models are held behind opaque [`QcnModel`] handles. Every fallible call
//! returns a [`QcnStatus`]; on failure a thread-local message is readable via
//! [`qcn_last_error`]. Operators are written into caller-allocated buffers as
//! row-major interleaved re/im doubles (`2 * dim * dim` values).

use qcn::intervene::{do_set, rd_general, Intervention};
use qcn::model::{load_qcn, parse_model, LoadedModel, ModelError};
use qcn::network::RespectsPolicy;
use qcn::ComplexMatrix;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

/// Result of an FFI call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QcnStatus {
    /// Success.
    QcnOk = 0,
    /// A required pointer argument was null.
    QcnNullArgument = 1,
    /// A string argument was not valid UTF-8.
    QcnUtf8 = 2,
    /// The model text failed to parse.
    QcnParse = 3,
    /// The model text parsed but is semantically invalid.
    QcnSemantic = 4,
    /// A node, projset, or state name is not declared in the model.
    QcnUnknownName = 5,
    /// The output buffer is too small.
    QcnBufferTooSmall = 6,
    /// A numeric operation failed (for example zero-probability conditioning).
    QcnNumeric = 7,
    /// The local distributions do not respect the graph.
    QcnInvalidModel = 8,
}

/// Opaque handle to a loaded model.
pub struct QcnModel {
    model: LoadedModel,
    ids: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: QcnStatus, message: impl Into<Vec<u8>>) -> QcnStatus {
    let c = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
    status
}

fn ok() -> QcnStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::default());
    QcnStatus::QcnOk
}

/// Message for the most recent failure on this thread; empty after a success.
/// The pointer stays valid until the next FFI call on the same thread.
#[no_mangle]
pub extern "C" fn qcn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn utf8_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, QcnStatus> {
    if p.is_null() {
        return Err(fail(QcnStatus::QcnNullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(QcnStatus::QcnUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn model_arg<'a>(m: *const QcnModel) -> Result<&'a QcnModel, QcnStatus> {
    m.as_ref()
        .ok_or_else(|| fail(QcnStatus::QcnNullArgument, "model handle is null"))
}

fn model_status(e: &ModelError) -> QcnStatus {
    match e {
        ModelError::Parse(_) => QcnStatus::QcnParse,
        ModelError::Semantic { .. } => QcnStatus::QcnSemantic,
    }
}

fn wrap(model: LoadedModel) -> *mut QcnModel {
    let ids = model
        .network
        .graph()
        .node_ids()
        .iter()
        .map(|id| CString::new(id.as_str()).expect("node ids have no NUL"))
        .collect();
    Box::into_raw(Box::new(QcnModel { model, ids }))
}

fn write_matrix(m: &ComplexMatrix, out: *mut f64, len: usize) -> QcnStatus {
    let d = m.rows();
    let need = 2 * d * d;
    if out.is_null() {
        return fail(QcnStatus::QcnNullArgument, "output buffer is null");
    }
    if len < need {
        return fail(
            QcnStatus::QcnBufferTooSmall,
            format!("need {need} doubles, got {len}"),
        );
    }
    let slice = unsafe { std::slice::from_raw_parts_mut(out, need) };
    for i in 0..d {
        for j in 0..d {
            let z = m.get(i, j);
            slice[2 * (i * d + j)] = z.re;
            slice[2 * (i * d + j) + 1] = z.im;
        }
    }
    ok()
}

/// Parse model text and build the network. On success `*out` owns the handle;
/// release it with [`qcn_model_free`].
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qcn_model_parse(
    text: *const c_char,
    tolerance: f64,
    out: *mut *mut QcnModel,
) -> QcnStatus {
    if out.is_null() {
        return fail(QcnStatus::QcnNullArgument, "out handle is null");
    }
    let text = match utf8_arg(text, "model text") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let doc = match parse_model(text) {
        Ok(d) => d,
        Err(e) => return fail(QcnStatus::QcnParse, e.to_string()),
    };
    match load_qcn(&doc, tolerance) {
        Ok(model) => {
            *out = wrap(model);
            ok()
        }
        Err(e) => fail(model_status(&e), e.to_string()),
    }
}

/// Release a handle returned by [`qcn_model_parse`] or [`qcn_model_do`].
/// Passing null is a no-op.
///
/// # Safety
/// `m` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qcn_model_free(m: *mut QcnModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcn_model_node_count(m: *const QcnModel) -> usize {
    m.as_ref().map_or(0, |h| h.model.network.graph().node_count())
}

/// Node id at `index`, or null if out of range. The pointer stays valid for
/// the lifetime of the handle.
///
/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcn_model_node_id(m: *const QcnModel, index: usize) -> *const c_char {
    m.as_ref()
        .and_then(|h| h.ids.get(index))
        .map_or(std::ptr::null(), |c| c.as_ptr())
}

/// Dimension of the node at `index`, or 0 if out of range.
///
/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcn_model_node_dim(m: *const QcnModel, index: usize) -> usize {
    m.as_ref()
        .map_or(0, |h| *h.model.network.graph().dims().get(index).unwrap_or(&0))
}

/// Check that the local distributions respect the graph, probing with
/// `fiducial_samples` random basis families per check.
///
/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcn_model_validate(
    m: *const QcnModel,
    fiducial_samples: usize,
    tolerance: f64,
) -> QcnStatus {
    let h = match model_arg(m) {
        Ok(h) => h,
        Err(s) => return s,
    };
    let policy = RespectsPolicy {
        random_sets: fiducial_samples,
        seed: 7,
        tol: tolerance.max(1e-7),
    };
    match h.model.network.check_respects(&policy) {
        Ok(rep) if rep.ok => ok(),
        Ok(rep) => {
            let lines: Vec<String> = rep.violations.iter().map(|v| v.to_string()).collect();
            fail(QcnStatus::QcnInvalidModel, lines.join("; "))
        }
        Err(e) => fail(QcnStatus::QcnNumeric, e.to_string()),
    }
}

/// Dimension of the joint space (product of node dimensions), or 0 for null.
///
/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcn_model_joint_dim(m: *const QcnModel) -> usize {
    m.as_ref()
        .map_or(0, |h| h.model.network.graph().dims().iter().product())
}

/// Build the joint density operator and write it into `out` as row-major
/// interleaved re/im doubles. `len` is the buffer length in doubles and must
/// be at least `2 * d * d` where `d = qcn_model_joint_dim(m)`.
///
/// # Safety
/// `m` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qcn_model_joint(
    m: *const QcnModel,
    out: *mut f64,
    len: usize,
) -> QcnStatus {
    let h = match model_arg(m) {
        Ok(h) => h,
        Err(s) => return s,
    };
    match h.model.network.build_joint() {
        Ok(js) => write_matrix(js.operator.matrix(), out, len),
        Err(e) => fail(QcnStatus::QcnNumeric, e.to_string()),
    }
}

/// Write the reduced density operator of `n_nodes` nodes named in `node_ids`
/// into `out` (same layout as [`qcn_model_joint`]; the marginal dimension is
/// the product of the named nodes' dimensions, in the model's node order).
///
/// # Safety
/// `m` must be a live handle; `node_ids` must point to `n_nodes`
/// NUL-terminated strings; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qcn_model_marginal(
    m: *const QcnModel,
    node_ids: *const *const c_char,
    n_nodes: usize,
    out: *mut f64,
    len: usize,
) -> QcnStatus {
    let h = match model_arg(m) {
        Ok(h) => h,
        Err(s) => return s,
    };
    if node_ids.is_null() {
        return fail(QcnStatus::QcnNullArgument, "node_ids is null");
    }
    let mut names = Vec::with_capacity(n_nodes);
    for k in 0..n_nodes {
        match utf8_arg(*node_ids.add(k), "node id") {
            Ok(s) => names.push(s.to_string()),
            Err(s) => return s,
        }
    }
    for n in &names {
        if h.model.network.graph().node_index(n).is_err() {
            return fail(QcnStatus::QcnUnknownName, format!("unknown node `{n}`"));
        }
    }
    let js = match h.model.network.build_joint() {
        Ok(js) => js,
        Err(e) => return fail(QcnStatus::QcnNumeric, e.to_string()),
    };
    match h.model.network.marginal(&js, &names) {
        Ok(dm) => write_matrix(dm.matrix(), out, len),
        Err(e) => fail(QcnStatus::QcnNumeric, e.to_string()),
    }
}

/// Set node `target` to the declared state named `state` by local surgery and
/// return the post-intervention model as a new handle in `*out`.
///
/// # Safety
/// `m` must be a live handle; `target` and `state` NUL-terminated strings;
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qcn_model_do(
    m: *const QcnModel,
    target: *const c_char,
    state: *const c_char,
    out: *mut *mut QcnModel,
) -> QcnStatus {
    let h = match model_arg(m) {
        Ok(h) => h,
        Err(s) => return s,
    };
    if out.is_null() {
        return fail(QcnStatus::QcnNullArgument, "out handle is null");
    }
    let target = match utf8_arg(target, "target") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let state = match utf8_arg(state, "state name") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let dm = match h.model.states.get(state) {
        Some((node, dm)) if node == target => dm.clone(),
        Some((node, _)) => {
            return fail(
                QcnStatus::QcnUnknownName,
                format!("state `{state}` is declared on `{node}`, not `{target}`"),
            )
        }
        None => {
            return fail(QcnStatus::QcnUnknownName, format!("no state named `{state}`"))
        }
    };
    match do_set(&h.model.network, target, &dm) {
        Ok(q2) => {
            let model = LoadedModel {
                network: q2,
                projsets: h.model.projsets.clone(),
                states: h.model.states.clone(),
            };
            *out = wrap(model);
            ok()
        }
        Err(e) => fail(QcnStatus::QcnNumeric, e.to_string()),
    }
}

/// Enumerate the outcomes of a projective reduction at node `target` using the
/// declared projset named `projset`, writing one probability per outcome into
/// `out_probs`. `len` is the capacity of `out_probs`; the number written goes
/// to `*out_count`.
///
/// # Safety
/// `m` must be a live handle; `target` and `projset` NUL-terminated strings;
/// `out_probs` must point to `len` writable doubles; `out_count` valid.
#[no_mangle]
pub unsafe extern "C" fn qcn_model_reduce_probabilities(
    m: *const QcnModel,
    target: *const c_char,
    projset: *const c_char,
    out_probs: *mut f64,
    len: usize,
    out_count: *mut usize,
) -> QcnStatus {
    let h = match model_arg(m) {
        Ok(h) => h,
        Err(s) => return s,
    };
    if out_probs.is_null() || out_count.is_null() {
        return fail(QcnStatus::QcnNullArgument, "output pointer is null");
    }
    let target = match utf8_arg(target, "target") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let projset = match utf8_arg(projset, "projset name") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let ps = match h.model.projsets.get(projset) {
        Some((node, ps)) if node == target => ps.clone(),
        Some((node, _)) => {
            return fail(
                QcnStatus::QcnUnknownName,
                format!("projset `{projset}` is declared on `{node}`, not `{target}`"),
            )
        }
        None => {
            return fail(
                QcnStatus::QcnUnknownName,
                format!("no projset named `{projset}`"),
            )
        }
    };
    let iv = Intervention::reduction(target, ps);
    match rd_general(&h.model.network, &iv) {
        Ok(outcomes) => {
            if len < outcomes.len() {
                return fail(
                    QcnStatus::QcnBufferTooSmall,
                    format!("need {} doubles, got {len}", outcomes.len()),
                );
            }
            let slice = std::slice::from_raw_parts_mut(out_probs, outcomes.len());
            for (s, o) in slice.iter_mut().zip(&outcomes) {
                *s = o.probability;
            }
            *out_count = outcomes.len();
            ok()
        }
        Err(e) => fail(QcnStatus::QcnNumeric, e.to_string()),
    }
}
