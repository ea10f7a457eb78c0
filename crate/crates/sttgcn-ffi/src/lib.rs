//! C ABI over the fusion-graph pipeline: opaque handles, status codes, and
//! a thread-local last-error message.
//!
//! Conventions:
//! * every fallible call returns an [`SttStatus`]; `STT_STATUS_OK` is 0;
//! * output parameters are written only on success;
//! * handles are created and released by this library (`*_free`); passing a
//!   handle to any other allocator is undefined behavior;
//! * `stt_last_error` retrieves a description of the most recent failure on
//!   the calling thread.
//!
//! The generated header lives at `include/sttgcn.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use sttgcn::graph::{
    blocks_to_tensor, build_fusion_matrix, reconstruct_fusion_graph, AdjTensor, EdgeRecord,
    FusionGraph, ReconstructMethod, ReconstructOptions, SpatialGraph,
};
use sttgcn::tensor::{DenseMatrix, DenseTensor3};
use sttgcn::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SttStatus {
    Ok = 0,
    /// Invalid arguments: bad shapes, ranges, or modes.
    Usage = 1,
    /// Malformed input data.
    Format = 2,
    /// Numerical failure (e.g. an SVD that did not converge).
    Numerical = 3,
    /// Filesystem failure.
    Io = 4,
    /// A required pointer argument was null.
    NullPointer = 5,
    /// A string argument was not valid UTF-8.
    Utf8 = 6,
    /// The requested quantity is undefined for the inputs.
    Undefined = 7,
    /// An internal panic was caught at the boundary.
    Panic = 8,
}

/// Decomposition backend for graph reconstruction.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SttMethod {
    Tucker = 0,
    L1Tucker = 1,
    TensorTrain = 2,
}

/// Opaque spatial road graph.
pub struct SttGraph(SpatialGraph);
/// Opaque dense matrix (row-major f64).
pub struct SttMatrix(DenseMatrix);
/// Opaque dense rank-3 tensor.
pub struct SttTensor(DenseTensor3);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> SttStatus {
    match err {
        Error::Usage(_) => SttStatus::Usage,
        Error::Format { .. } => SttStatus::Format,
        Error::Numerical(_) => SttStatus::Numerical,
        Error::UndefinedMetric(_) => SttStatus::Undefined,
        Error::Io(_) => SttStatus::Io,
    }
}

fn fail(err: Error) -> SttStatus {
    set_error(&err.to_string());
    status_of(&err)
}

/// Run `f`, translating errors and panics to statuses.
fn guarded(f: impl FnOnce() -> Result<SttStatus, Error>) -> SttStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(err)) => fail(err),
        Err(_) => {
            set_error("internal panic");
            SttStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, SttStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(SttStatus::NullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(SttStatus::Utf8)
        }
    }
}

macro_rules! require_nonnull {
    ($ptr:expr) => {
        if $ptr.is_null() {
            set_error(concat!("null pointer argument: ", stringify!($ptr)));
            return SttStatus::NullPointer;
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn stt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the calling thread's last error message (NUL-terminated, truncated
/// to `len`). Returns the full message length excluding the terminator.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn stt_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

// ---------------------------------------------------------------------------
// Graph handles
// ---------------------------------------------------------------------------

/// Parse a `from,to,cost` distance file into a spatial graph. `nodes` = 0
/// infers the count from the largest id.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stt_graph_from_distance_csv(
    path: *const c_char,
    nodes: usize,
    out: *mut *mut SttGraph,
) -> SttStatus {
    require_nonnull!(out);
    let path = match path_arg(path) {
        Ok(p) => p.to_path_buf(),
        Err(s) => return s,
    };
    guarded(move || {
        let edges = sttgcn::graph::load_distance_csv(&path)?;
        let n = if nodes > 0 {
            nodes
        } else {
            edges.iter().map(|e| e.from.max(e.to)).max().ok_or_else(|| {
                Error::usage("distance file has no edges; pass an explicit node count".to_string())
            })?
        };
        let graph = SpatialGraph::from_edges(n, &edges)?;
        *out = Box::into_raw(Box::new(SttGraph(graph)));
        Ok(SttStatus::Ok)
    })
}

/// Build a spatial graph from parallel edge arrays (1-based node ids).
///
/// # Safety
/// `from`, `to` and `cost` must each point to `count` readable elements;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stt_graph_from_edges(
    from: *const u64,
    to: *const u64,
    cost: *const f64,
    count: usize,
    nodes: usize,
    out: *mut *mut SttGraph,
) -> SttStatus {
    require_nonnull!(out);
    if count > 0 {
        require_nonnull!(from);
        require_nonnull!(to);
        require_nonnull!(cost);
    }
    let from = std::slice::from_raw_parts(from, count);
    let to = std::slice::from_raw_parts(to, count);
    let cost = std::slice::from_raw_parts(cost, count);
    guarded(move || {
        let edges: Vec<EdgeRecord> = (0..count)
            .map(|i| EdgeRecord {
                from: from[i] as usize,
                to: to[i] as usize,
                cost: cost[i],
                line: i + 1,
            })
            .collect();
        let graph = SpatialGraph::from_edges(nodes, &edges)?;
        *out = Box::into_raw(Box::new(SttGraph(graph)));
        Ok(SttStatus::Ok)
    })
}

/// Node count of a graph handle (0 for null).
#[no_mangle]
pub extern "C" fn stt_graph_nodes(graph: *const SttGraph) -> usize {
    if graph.is_null() {
        return 0;
    }
    unsafe { (*graph).0.n() }
}

/// # Safety
/// `graph` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn stt_graph_free(graph: *mut SttGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

/// Binary `3n x 3n` fusion matrix of a spatial graph.
///
/// # Safety
/// `graph` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stt_build_fusion_matrix(
    graph: *const SttGraph,
    out: *mut *mut SttMatrix,
) -> SttStatus {
    require_nonnull!(graph);
    require_nonnull!(out);
    guarded(move || {
        let fusion = build_fusion_matrix(&(*graph).0);
        *out = Box::into_raw(Box::new(SttMatrix(fusion.matrix().clone())));
        Ok(SttStatus::Ok)
    })
}

/// `n x n x 9` adjacency tensor of a spatial graph.
///
/// # Safety
/// `graph` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stt_build_adjacency_tensor(
    graph: *const SttGraph,
    out: *mut *mut SttTensor,
) -> SttStatus {
    require_nonnull!(graph);
    require_nonnull!(out);
    guarded(move || {
        let adj = blocks_to_tensor(&build_fusion_matrix(&(*graph).0));
        *out = Box::into_raw(Box::new(SttTensor(adj.tensor().clone())));
        Ok(SttStatus::Ok)
    })
}

/// Reconstruct the real-valued fusion graph offline with the chosen
/// decomposition (full-size core, diagonal fixed to 1).
///
/// # Safety
/// `graph` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stt_reconstruct(
    graph: *const SttGraph,
    method: SttMethod,
    seed: u64,
    out: *mut *mut SttMatrix,
) -> SttStatus {
    require_nonnull!(graph);
    require_nonnull!(out);
    guarded(move || {
        let method = match method {
            SttMethod::Tucker => ReconstructMethod::TuckerHooi,
            SttMethod::L1Tucker => ReconstructMethod::L1Tucker,
            SttMethod::TensorTrain => ReconstructMethod::TensorTrain,
        };
        let opts = ReconstructOptions { seed, ..ReconstructOptions::default() };
        let recon = reconstruct_fusion_graph(&(*graph).0, method, &opts)?;
        *out = Box::into_raw(Box::new(SttMatrix(recon.graph.matrix().clone())));
        Ok(SttStatus::Ok)
    })
}

/// Convert a `3n x 3n` fusion matrix handle into its adjacency tensor.
///
/// # Safety
/// `fusion` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stt_fusion_to_tensor(
    fusion: *const SttMatrix,
    out: *mut *mut SttTensor,
) -> SttStatus {
    require_nonnull!(fusion);
    require_nonnull!(out);
    guarded(move || {
        let graph = FusionGraph::from_matrix((*fusion).0.clone())?;
        let adj: AdjTensor = blocks_to_tensor(&graph);
        *out = Box::into_raw(Box::new(SttTensor(adj.tensor().clone())));
        Ok(SttStatus::Ok)
    })
}

// ---------------------------------------------------------------------------
// Matrix handles
// ---------------------------------------------------------------------------

#[no_mangle]
pub extern "C" fn stt_matrix_rows(m: *const SttMatrix) -> usize {
    if m.is_null() {
        return 0;
    }
    unsafe { (*m).0.rows() }
}

#[no_mangle]
pub extern "C" fn stt_matrix_cols(m: *const SttMatrix) -> usize {
    if m.is_null() {
        return 0;
    }
    unsafe { (*m).0.cols() }
}

/// Read one entry.
///
/// # Safety
/// `m` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stt_matrix_get(
    m: *const SttMatrix,
    row: usize,
    col: usize,
    out: *mut f64,
) -> SttStatus {
    require_nonnull!(m);
    require_nonnull!(out);
    let inner = &(*m).0;
    if row >= inner.rows() || col >= inner.cols() {
        set_error("matrix index out of range");
        return SttStatus::Usage;
    }
    *out = inner.get(row, col);
    SttStatus::Ok
}

/// Copy the whole matrix row-major into `out` (`len` must be rows*cols).
///
/// # Safety
/// `m` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn stt_matrix_copy_data(
    m: *const SttMatrix,
    out: *mut f64,
    len: usize,
) -> SttStatus {
    require_nonnull!(m);
    require_nonnull!(out);
    let inner = &(*m).0;
    if len != inner.rows() * inner.cols() {
        set_error("destination length does not match rows*cols");
        return SttStatus::Usage;
    }
    std::ptr::copy_nonoverlapping(inner.data().as_ptr(), out, len);
    SttStatus::Ok
}

/// Save as an `STM1` container.
///
/// # Safety
/// `m` must be a live handle; `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn stt_matrix_save(m: *const SttMatrix, path: *const c_char) -> SttStatus {
    require_nonnull!(m);
    let path = match path_arg(path) {
        Ok(p) => p.to_path_buf(),
        Err(s) => return s,
    };
    guarded(move || {
        sttgcn::io::write_matrix(&(*m).0, &path)?;
        Ok(SttStatus::Ok)
    })
}

/// Load an `STM1` container.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stt_matrix_load(path: *const c_char, out: *mut *mut SttMatrix) -> SttStatus {
    require_nonnull!(out);
    let path = match path_arg(path) {
        Ok(p) => p.to_path_buf(),
        Err(s) => return s,
    };
    guarded(move || {
        let m = sttgcn::io::read_matrix(&path)?;
        *out = Box::into_raw(Box::new(SttMatrix(m)));
        Ok(SttStatus::Ok)
    })
}

/// # Safety
/// `m` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn stt_matrix_free(m: *mut SttMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

// ---------------------------------------------------------------------------
// Tensor handles
// ---------------------------------------------------------------------------

/// Dimensions of a tensor handle.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn stt_tensor_dims(
    t: *const SttTensor,
    d1: *mut usize,
    d2: *mut usize,
    d3: *mut usize,
) -> SttStatus {
    require_nonnull!(t);
    require_nonnull!(d1);
    require_nonnull!(d2);
    require_nonnull!(d3);
    let dims = (*t).0.dims();
    *d1 = dims.0;
    *d2 = dims.1;
    *d3 = dims.2;
    SttStatus::Ok
}

/// Read one entry (0-based indices).
///
/// # Safety
/// `t` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stt_tensor_get(
    t: *const SttTensor,
    i: usize,
    j: usize,
    k: usize,
    out: *mut f64,
) -> SttStatus {
    require_nonnull!(t);
    require_nonnull!(out);
    let dims = (*t).0.dims();
    if i >= dims.0 || j >= dims.1 || k >= dims.2 {
        set_error("tensor index out of range");
        return SttStatus::Usage;
    }
    *out = (*t).0.get(i, j, k);
    SttStatus::Ok
}

/// Save as an `STT1` container.
///
/// # Safety
/// `t` must be a live handle; `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn stt_tensor_save(t: *const SttTensor, path: *const c_char) -> SttStatus {
    require_nonnull!(t);
    let path = match path_arg(path) {
        Ok(p) => p.to_path_buf(),
        Err(s) => return s,
    };
    guarded(move || {
        sttgcn::io::write_tensor(&(*t).0, &path)?;
        Ok(SttStatus::Ok)
    })
}

/// Load an `STT1` container.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stt_tensor_load(path: *const c_char, out: *mut *mut SttTensor) -> SttStatus {
    require_nonnull!(out);
    let path = match path_arg(path) {
        Ok(p) => p.to_path_buf(),
        Err(s) => return s,
    };
    guarded(move || {
        let t = sttgcn::io::read_tensor(&path)?;
        *out = Box::into_raw(Box::new(SttTensor(t)));
        Ok(SttStatus::Ok)
    })
}

/// # Safety
/// `t` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn stt_tensor_free(t: *mut SttTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

unsafe fn metric(
    y: *const f64,
    pred: *const f64,
    len: usize,
    out: *mut f64,
    f: impl Fn(&[f64], &[f64]) -> Result<f64, Error>,
) -> SttStatus {
    require_nonnull!(y);
    require_nonnull!(pred);
    require_nonnull!(out);
    let y = std::slice::from_raw_parts(y, len);
    let pred = std::slice::from_raw_parts(pred, len);
    guarded(move || {
        *out = f(y, pred)?;
        Ok(SttStatus::Ok)
    })
}

/// Mean absolute error over two equal-length arrays.
///
/// # Safety
/// `y` and `pred` must each point to `len` readable doubles; `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stt_metric_mae(
    y: *const f64,
    pred: *const f64,
    len: usize,
    out: *mut f64,
) -> SttStatus {
    metric(y, pred, len, out, sttgcn::metrics::mae)
}

/// Root mean squared error.
///
/// # Safety
/// As [`stt_metric_mae`].
#[no_mangle]
pub unsafe extern "C" fn stt_metric_rmse(
    y: *const f64,
    pred: *const f64,
    len: usize,
    out: *mut f64,
) -> SttStatus {
    metric(y, pred, len, out, sttgcn::metrics::rmse)
}

/// Mean absolute percentage error (percent), zero targets excluded;
/// `STT_STATUS_UNDEFINED` when every target is zero.
///
/// # Safety
/// As [`stt_metric_mae`].
#[no_mangle]
pub unsafe extern "C" fn stt_metric_mape(
    y: *const f64,
    pred: *const f64,
    len: usize,
    out: *mut f64,
) -> SttStatus {
    metric(y, pred, len, out, sttgcn::metrics::mape)
}
