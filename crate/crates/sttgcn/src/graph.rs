//! The localized spatial-temporal fusion graph: construction from a spatial
//! road graph, the block-matrix <-> adjacency-tensor mapping, and the
//! offline reconstruction pipeline producing the real-valued adjacency
//! `A'` consumed by the forecaster.
//!
//! Layout conventions (all frozen):
//! * three time steps; node `i` (0-based) at step `t` has row `t*n + i`
//!   in the `3n x 3n` fusion matrix;
//! * block `(k, l)` (0-based block-row/col) maps to lateral slice
//!   `3k + l` of the `n x n x 9` adjacency tensor, i.e. the 1-based block
//!   `(k, l)` lands on slice `l + 3(k-1)`;
//! * diagonal blocks carry the spatial adjacency, blocks between adjacent
//!   steps are identities, and the two corner blocks are zero.

use crate::decomp::{self, TuckerDecomp, TTDecomp};
use crate::error::{Error, Result};
use crate::tensor::{frobenius_norm, DenseMatrix, DenseTensor3};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Number of time steps joined into one fusion graph.
pub const TIME_STEPS: usize = 3;
/// Number of blocks, and lateral slices of the adjacency tensor.
pub const BLOCKS: usize = TIME_STEPS * TIME_STEPS;

/// One undirected edge record as parsed from a distance file. Node ids are
/// 1-based as in the file; `line` is the 1-based source line for error
/// reporting (synthetic edges use their ordinal position).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
    pub line: usize,
}

/// Undirected spatial road graph with a binary symmetric adjacency matrix.
/// Distances are retained on the edge list for export and inspection only;
/// the adjacency itself is 0-1.
#[derive(Debug, Clone)]
pub struct SpatialGraph {
    n: usize,
    edges: Vec<EdgeRecord>,
    adjacency: DenseMatrix,
}

impl SpatialGraph {
    /// Validate and assemble the graph. Duplicate undirected pairs are kept
    /// once (first occurrence wins); self-loops, out-of-range ids and
    /// negative costs are format errors naming the offending line.
    pub fn from_edges(n: usize, edges: &[EdgeRecord]) -> Result<SpatialGraph> {
        if n == 0 {
            return Err(Error::usage("node count must be positive".to_string()));
        }
        let mut adjacency = DenseMatrix::zeros(n, n);
        let mut kept = Vec::new();
        for e in edges {
            let bad = |msg: String| Error::format("edge list", e.line, msg);
            if e.from < 1 || e.from > n || e.to < 1 || e.to > n {
                return Err(bad(format!(
                    "node id out of range 1..={n} in edge ({}, {})",
                    e.from, e.to
                )));
            }
            if e.from == e.to {
                return Err(bad(format!("self-loop on node {}", e.from)));
            }
            if !(e.cost >= 0.0) {
                return Err(bad(format!("negative or non-finite cost {}", e.cost)));
            }
            let (a, b) = (e.from - 1, e.to - 1);
            if adjacency.get(a, b) == 0.0 {
                adjacency.set(a, b, 1.0);
                adjacency.set(b, a, 1.0);
                kept.push(e.clone());
            }
        }
        Ok(SpatialGraph {
            n,
            edges: kept,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    /// Binary symmetric adjacency with zero diagonal.
    pub fn adjacency(&self) -> &DenseMatrix {
        &self.adjacency
    }
}

/// Parse a distance file: header `from,to,cost`, then one edge per line with
/// 1-based node ids and nonnegative real costs.
pub fn load_distance_csv(path: &Path) -> Result<Vec<EdgeRecord>> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::format(&name, 0, format!("cannot read: {e}")))?;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line.to_ascii_lowercase().replace(' ', "") == "from,to,cost" {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::format(
                &name,
                line_no,
                format!("expected 3 fields `from,to,cost`, found {}", fields.len()),
            ));
        }
        let from: usize = fields[0]
            .parse()
            .map_err(|_| Error::format(&name, line_no, format!("bad node id `{}`", fields[0])))?;
        let to: usize = fields[1]
            .parse()
            .map_err(|_| Error::format(&name, line_no, format!("bad node id `{}`", fields[1])))?;
        let cost: f64 = fields[2]
            .parse()
            .map_err(|_| Error::format(&name, line_no, format!("bad cost `{}`", fields[2])))?;
        if !cost.is_finite() {
            return Err(Error::format(&name, line_no, format!("non-finite cost `{}`", fields[2])));
        }
        edges.push(EdgeRecord { from, to, cost, line: line_no });
    }
    Ok(edges)
}

/// Convenience wrapper matching the pipeline entry point: parse records and
/// assemble the spatial graph.
pub fn build_spatial_adjacency(edges: &[EdgeRecord], n: usize) -> Result<SpatialGraph> {
    SpatialGraph::from_edges(n, edges)
}

/// The `3n x 3n` localized spatial-temporal block adjacency. Binary right
/// after construction, real-valued after reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionGraph {
    n: usize,
    matrix: DenseMatrix,
}

impl FusionGraph {
    pub fn from_matrix(matrix: DenseMatrix) -> Result<FusionGraph> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows == 0 || rows % TIME_STEPS != 0 {
            return Err(Error::usage(format!(
                "fusion matrix must be square with side divisible by {TIME_STEPS}, got {rows}x{cols}"
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::usage("fusion matrix contains non-finite entries".to_string()));
        }
        Ok(FusionGraph { n: rows / TIME_STEPS, matrix })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> usize {
        TIME_STEPS * self.n
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Copy of block `(k, l)` (0-based block indices).
    pub fn block(&self, k: usize, l: usize) -> DenseMatrix {
        assert!(k < TIME_STEPS && l < TIME_STEPS);
        DenseMatrix::from_fn(self.n, self.n, |i, j| {
            self.matrix.get(k * self.n + i, l * self.n + j)
        })
    }
}

/// Build the binary fusion matrix: spatial blocks on the diagonal, identity
/// blocks between adjacent time steps in both directions, zero blocks
/// between steps 1 and 3.
pub fn build_fusion_matrix(g: &SpatialGraph) -> FusionGraph {
    let n = g.n();
    let mut m = DenseMatrix::zeros(TIME_STEPS * n, TIME_STEPS * n);
    for k in 0..TIME_STEPS {
        for i in 0..n {
            for j in 0..n {
                let v = g.adjacency().get(i, j);
                if v != 0.0 {
                    m.set(k * n + i, k * n + j, v);
                }
            }
        }
    }
    for k in 0..TIME_STEPS - 1 {
        for i in 0..n {
            m.set(k * n + i, (k + 1) * n + i, 1.0);
            m.set((k + 1) * n + i, k * n + i, 1.0);
        }
    }
    FusionGraph { n, matrix: m }
}

/// The `n x n x 9` adjacency tensor; slice `3k + l` holds block `(k, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjTensor {
    tensor: DenseTensor3,
}

impl AdjTensor {
    pub fn from_tensor(tensor: DenseTensor3) -> Result<AdjTensor> {
        let (d1, d2, d3) = tensor.dims();
        if d1 != d2 || d3 != BLOCKS {
            return Err(Error::usage(format!(
                "adjacency tensor must be n x n x {BLOCKS}, got {d1}x{d2}x{d3}"
            )));
        }
        Ok(AdjTensor { tensor })
    }

    pub fn n(&self) -> usize {
        self.tensor.dims().0
    }

    pub fn tensor(&self) -> &DenseTensor3 {
        &self.tensor
    }

    /// Copy of lateral slice `s` (0-based).
    pub fn slice(&self, s: usize) -> DenseMatrix {
        assert!(s < BLOCKS);
        let n = self.n();
        DenseMatrix::from_fn(n, n, |i, j| self.tensor.get(i, j, s))
    }
}

/// Rearrange the nine blocks into lateral slices: block `(k, l)` becomes
/// slice `3k + l`. Pure copy, no arithmetic.
pub fn blocks_to_tensor(f: &FusionGraph) -> AdjTensor {
    let n = f.n();
    let mut t = DenseTensor3::zeros(n, n, BLOCKS);
    for k in 0..TIME_STEPS {
        for l in 0..TIME_STEPS {
            let s = TIME_STEPS * k + l;
            for i in 0..n {
                for j in 0..n {
                    t.set(i, j, s, f.matrix().get(k * n + i, l * n + j));
                }
            }
        }
    }
    AdjTensor { tensor: t }
}

/// Exact inverse of [`blocks_to_tensor`]: slice `3k + l` returns to block
/// `(k, l)`.
pub fn tensor_to_blocks(t: &AdjTensor) -> FusionGraph {
    let n = t.n();
    let mut m = DenseMatrix::zeros(TIME_STEPS * n, TIME_STEPS * n);
    for k in 0..TIME_STEPS {
        for l in 0..TIME_STEPS {
            let s = TIME_STEPS * k + l;
            for i in 0..n {
                for j in 0..n {
                    m.set(k * n + i, l * n + j, t.tensor().get(i, j, s));
                }
            }
        }
    }
    FusionGraph { n, matrix: m }
}

/// Set every per-slice diagonal entry `t(i, i, s)` to 1.0, all nine slices,
/// leaving everything else untouched. A node's connection with itself at the
/// same time step should carry the maximal weight, and the decomposition
/// may have shrunk it.
pub fn fix_diagonal(t: &AdjTensor) -> AdjTensor {
    let mut out = t.tensor.clone();
    let n = t.n();
    for s in 0..BLOCKS {
        for i in 0..n {
            out.set(i, i, s, 1.0);
        }
    }
    AdjTensor { tensor: out }
}

/// Decomposition backend used to reconstruct the fusion graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructMethod {
    TuckerHooi,
    L1Tucker,
    TensorTrain,
}

impl ReconstructMethod {
    pub fn tag(self) -> &'static str {
        match self {
            ReconstructMethod::TuckerHooi => "tucker",
            ReconstructMethod::L1Tucker => "l1tucker",
            ReconstructMethod::TensorTrain => "tt",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tucker" | "tucker_hooi" | "hooi" => Ok(ReconstructMethod::TuckerHooi),
            "l1tucker" | "l1_tucker" | "l1" => Ok(ReconstructMethod::L1Tucker),
            "tt" | "train" | "tensor_train" => Ok(ReconstructMethod::TensorTrain),
            other => Err(Error::usage(format!(
                "unknown method `{other}`, expected tucker | l1tucker | tt"
            ))),
        }
    }
}

/// Options for [`reconstruct_fusion_graph`].
#[derive(Debug, Clone)]
pub struct ReconstructOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Bond-rank cap for the tensor-train method; `None` means large enough
    /// for an exact chain.
    pub tt_max_rank: Option<usize>,
    /// Per-step relative truncation tolerance for the tensor-train method.
    pub tt_tol: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            max_iter: decomp::DEFAULT_MAX_ITER,
            tol: decomp::DEFAULT_TOL,
            seed: 0,
            tt_max_rank: None,
            tt_tol: 0.0,
        }
    }
}

/// Decomposition evidence kept alongside a reconstruction so callers can
/// inspect traces and verify full-rank exactness.
#[derive(Debug, Clone)]
pub enum ReconstructionDetail {
    Tucker(TuckerDecomp),
    TensorTrain(TTDecomp),
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// The reconstructed real-valued fusion graph `A'` (diagonal fixed).
    pub graph: FusionGraph,
    pub method: ReconstructMethod,
    pub seed: u64,
    /// Objective trace of the decomposition (empty for tensor-train).
    pub objective_trace: Vec<f64>,
    pub detail: ReconstructionDetail,
    /// The binary adjacency tensor the decomposition consumed.
    pub source: AdjTensor,
}

/// The offline pipeline: fusion matrix -> adjacency tensor -> full-size-core
/// decomposition -> diagonal fix -> block matrix. The Tucker methods use the
/// core tensor itself as the reconstructed tensor (the core is full-size, a
/// pure multilinear rotation of the input); the tensor-train method, which
/// has no single full-size core, contracts its chain back instead.
pub fn reconstruct_fusion_graph(
    g: &SpatialGraph,
    method: ReconstructMethod,
    opts: &ReconstructOptions,
) -> Result<Reconstruction> {
    let fusion = build_fusion_matrix(g);
    reconstruct_adj_tensor(&blocks_to_tensor(&fusion), method, opts)
}

/// Decomposition half of the pipeline, starting from an already-built
/// adjacency tensor (the form the CLI persists between stages).
pub fn reconstruct_adj_tensor(
    adj: &AdjTensor,
    method: ReconstructMethod,
    opts: &ReconstructOptions,
) -> Result<Reconstruction> {
    let n = adj.n();
    let full_ranks = (n, n, BLOCKS);

    let (tensor, trace, detail) = match method {
        ReconstructMethod::TuckerHooi => {
            let d = decomp::hooi(adj.tensor(), full_ranks, opts.max_iter, opts.tol)?;
            (d.core.clone(), d.objective_trace.clone(), ReconstructionDetail::Tucker(d))
        }
        ReconstructMethod::L1Tucker => {
            let d = decomp::l1_tucker(adj.tensor(), full_ranks, opts.max_iter, opts.tol, opts.seed)?;
            (d.core.clone(), d.objective_trace.clone(), ReconstructionDetail::Tucker(d))
        }
        ReconstructMethod::TensorTrain => {
            let max_rank = opts.tt_max_rank.unwrap_or_else(|| n.max(BLOCKS));
            let d = decomp::tt_svd(adj.tensor(), max_rank, opts.tt_tol)?;
            (decomp::tt_reconstruct(&d), Vec::new(), ReconstructionDetail::TensorTrain(d))
        }
    };

    let fixed = fix_diagonal(&AdjTensor::from_tensor(tensor)?);
    Ok(Reconstruction {
        graph: tensor_to_blocks(&fixed),
        method,
        seed: opts.seed,
        objective_trace: trace,
        detail,
        source: adj.clone(),
    })
}

/// Frobenius norm of the reconstructed tensor before the diagonal fix (the
/// core for Tucker methods). Equals the source norm for full-rank L2 Tucker.
pub fn pre_fix_frobenius(r: &Reconstruction) -> f64 {
    match &r.detail {
        ReconstructionDetail::Tucker(d) => frobenius_norm(&d.core),
        ReconstructionDetail::TensorTrain(d) => frobenius_norm(&decomp::tt_reconstruct(d)),
    }
}

/// Write `A'` as `row,col,value` CSV (1-based indices, every entry) plus the
/// `n x n` slice-1 block (node-to-node relations at the first time step) in
/// the same format.
pub fn export_graph(f: &FusionGraph, full_csv: &Path, slice1_csv: &Path) -> Result<()> {
    let side = f.side();
    let mut out = String::with_capacity(side * side * 8);
    out.push_str("row,col,value\n");
    for i in 0..side {
        for j in 0..side {
            let _ = writeln!(out, "{},{},{}", i + 1, j + 1, f.matrix().get(i, j));
        }
    }
    fs::write(full_csv, out)?;

    let n = f.n();
    let mut out = String::with_capacity(n * n * 8);
    out.push_str("row,col,value\n");
    for i in 0..n {
        for j in 0..n {
            let _ = writeln!(out, "{},{},{}", i + 1, j + 1, f.matrix().get(i, j));
        }
    }
    fs::write(slice1_csv, out)?;
    Ok(())
}

/// Read a `row,col,value` CSV produced by [`export_graph`] back into a
/// fusion graph.
pub fn import_graph_csv(path: &Path) -> Result<FusionGraph> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::format(&name, 0, format!("cannot read: {e}")))?;
    let mut entries = Vec::new();
    let mut side = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line.to_ascii_lowercase().replace(' ', "") == "row,col,value" {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::format(&name, line_no, "expected `row,col,value`".to_string()));
        }
        let r: usize = fields[0]
            .parse()
            .map_err(|_| Error::format(&name, line_no, format!("bad row `{}`", fields[0])))?;
        let c: usize = fields[1]
            .parse()
            .map_err(|_| Error::format(&name, line_no, format!("bad col `{}`", fields[1])))?;
        let v: f64 = fields[2]
            .parse()
            .map_err(|_| Error::format(&name, line_no, format!("bad value `{}`", fields[2])))?;
        if r == 0 || c == 0 || !v.is_finite() {
            return Err(Error::format(&name, line_no, "indices are 1-based and values finite".to_string()));
        }
        side = side.max(r).max(c);
        entries.push((r - 1, c - 1, v));
    }
    let mut m = DenseMatrix::zeros(side, side);
    for (r, c, v) in entries {
        m.set(r, c, v);
    }
    FusionGraph::from_matrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(from: usize, to: usize, line: usize) -> EdgeRecord {
        EdgeRecord { from, to, cost: 1.0, line }
    }

    fn path_graph_n2() -> SpatialGraph {
        SpatialGraph::from_edges(2, &[edge(1, 2, 1)]).unwrap()
    }

    #[test]
    fn spatial_adjacency_basic() {
        let g = path_graph_n2();
        assert_eq!(g.adjacency().data(), &[0.0, 1.0, 1.0, 0.0]);

        let empty = SpatialGraph::from_edges(3, &[]).unwrap();
        assert!(empty.adjacency().data().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn spatial_adjacency_rejects_bad_edges() {
        let err = SpatialGraph::from_edges(2, &[edge(1, 3, 4)]).unwrap_err();
        assert!(err.to_string().contains(":4:"), "{err}");
        assert!(SpatialGraph::from_edges(2, &[edge(1, 1, 1)]).is_err());
        let neg = EdgeRecord { from: 1, to: 2, cost: -1.0, line: 2 };
        assert!(SpatialGraph::from_edges(2, &[neg]).is_err());
    }

    #[test]
    fn spatial_adjacency_dedups() {
        let g = SpatialGraph::from_edges(
            3,
            &[edge(1, 2, 1), edge(2, 1, 2), edge(1, 2, 3), edge(2, 3, 4)],
        )
        .unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.adjacency().get(0, 1), 1.0);
        assert_eq!(g.adjacency().get(1, 2), 1.0);
    }

    #[test]
    fn fusion_matrix_n2_fixture() {
        // Hand-enumerated block layout for the 2-node path graph.
        let f = build_fusion_matrix(&path_graph_n2());
        let want: [[f64; 6]; 6] = [
            [0.0, 1.0, 1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 1.0, 1.0, 0.0],
            [0.0, 1.0, 1.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0, 1.0, 1.0, 0.0],
        ];
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(f.matrix().get(i, j), want[i][j], "({i},{j})");
            }
        }
    }

    #[test]
    fn fusion_matrix_n1_is_temporal_chain() {
        let g = SpatialGraph::from_edges(1, &[]).unwrap();
        let f = build_fusion_matrix(&g);
        assert_eq!(
            f.matrix().data(),
            &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn fusion_matrix_is_symmetric_and_binary() {
        let g = SpatialGraph::from_edges(4, &[edge(1, 2, 1), edge(2, 4, 2), edge(3, 4, 3)]).unwrap();
        let f = build_fusion_matrix(&g);
        let side = f.side();
        for i in 0..side {
            for j in 0..side {
                let v = f.matrix().get(i, j);
                assert!(v == 0.0 || v == 1.0);
                assert_eq!(v, f.matrix().get(j, i));
            }
        }
    }

    #[test]
    fn block_slice_mapping() {
        let f = build_fusion_matrix(&path_graph_n2());
        let t = blocks_to_tensor(&f);
        // 1-based block (2,3) -> 1-based slice 6; 0-based (1,2) -> 5.
        assert_eq!(t.slice(5), f.block(1, 2));
        // block (1,1) -> slice 1; block (3,3) -> slice 9 (0-based 0 and 8).
        assert_eq!(t.slice(0), f.block(0, 0));
        assert_eq!(t.slice(8), f.block(2, 2));

        // Slice contents for the n=2 fixture.
        assert_eq!(t.slice(0).data(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(t.slice(1).data(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(t.slice(2).data(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn blocks_tensor_roundtrip() {
        let g = SpatialGraph::from_edges(3, &[edge(1, 2, 1), edge(2, 3, 2)]).unwrap();
        let f = build_fusion_matrix(&g);
        let back = tensor_to_blocks(&blocks_to_tensor(&f));
        assert_eq!(back, f);

        // And for an arbitrary real-valued tensor.
        let t = DenseTensor3::from_fn((3, 3, 9), |i, j, k| (i * 31 + j * 7 + k) as f64 * 0.13 - 2.0);
        let adj = AdjTensor::from_tensor(t).unwrap();
        let there = blocks_to_tensor(&tensor_to_blocks(&adj));
        assert_eq!(there, adj);
    }

    #[test]
    fn tensor_to_blocks_zero() {
        let adj = AdjTensor::from_tensor(DenseTensor3::zeros(2, 2, 9)).unwrap();
        let f = tensor_to_blocks(&adj);
        assert!(f.matrix().data().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn adj_tensor_shape_validation() {
        assert!(AdjTensor::from_tensor(DenseTensor3::zeros(2, 3, 9)).is_err());
        assert!(AdjTensor::from_tensor(DenseTensor3::zeros(2, 2, 8)).is_err());
        assert!(AdjTensor::from_tensor(DenseTensor3::zeros(2, 2, 9)).is_ok());
    }

    #[test]
    fn fusion_graph_shape_validation() {
        assert!(FusionGraph::from_matrix(DenseMatrix::zeros(4, 4)).is_err());
        assert!(FusionGraph::from_matrix(DenseMatrix::zeros(6, 3)).is_err());
        assert!(FusionGraph::from_matrix(DenseMatrix::zeros(6, 6)).is_ok());
    }

    #[test]
    fn fix_diagonal_touches_exactly_per_slice_diagonals() {
        let n = 3;
        let zero = AdjTensor::from_tensor(DenseTensor3::zeros(n, n, 9)).unwrap();
        let fixed = fix_diagonal(&zero);
        let ones: usize = fixed
            .tensor()
            .data()
            .iter()
            .filter(|x| **x == 1.0)
            .count();
        assert_eq!(ones, 9 * n);
        for s in 0..9 {
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_eq!(fixed.tensor().get(i, j, s), want);
                }
            }
        }

        let mut t = DenseTensor3::zeros(2, 2, 9);
        t.set(0, 0, 0, 0.3);
        t.set(0, 1, 0, 0.7);
        let fixed = fix_diagonal(&AdjTensor::from_tensor(t).unwrap());
        assert_eq!(fixed.tensor().get(0, 0, 0), 1.0);
        assert_eq!(fixed.tensor().get(0, 1, 0), 0.7);

        let twice = fix_diagonal(&fixed);
        assert_eq!(twice, fixed);
    }

    #[test]
    fn reconstruct_full_rank_preserves_energy() {
        let g = SpatialGraph::from_edges(3, &[edge(1, 2, 1), edge(2, 3, 2)]).unwrap();
        let r = reconstruct_fusion_graph(&g, ReconstructMethod::TuckerHooi, &ReconstructOptions::default())
            .unwrap();
        let src_norm = frobenius_norm(r.source.tensor());
        let core_norm = pre_fix_frobenius(&r);
        assert!((core_norm - src_norm).abs() < 1e-10 * src_norm.max(1.0));
        assert!(r.graph.matrix().is_finite());
        assert!(r.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn reconstruct_single_node_graph() {
        let g = SpatialGraph::from_edges(1, &[]).unwrap();
        for method in [
            ReconstructMethod::TuckerHooi,
            ReconstructMethod::L1Tucker,
            ReconstructMethod::TensorTrain,
        ] {
            let r = reconstruct_fusion_graph(&g, method, &ReconstructOptions::default()).unwrap();
            assert_eq!(r.graph.side(), 3);
            assert!(r.graph.matrix().is_finite());
            for i in 0..3 {
                assert_eq!(r.graph.matrix().get(i, i), 1.0, "{method:?}");
            }
        }
    }

    #[test]
    fn reconstruct_deterministic() {
        let g = SpatialGraph::from_edges(4, &[edge(1, 2, 1), edge(2, 3, 2), edge(3, 4, 3), edge(4, 1, 4)])
            .unwrap();
        for method in [
            ReconstructMethod::TuckerHooi,
            ReconstructMethod::L1Tucker,
            ReconstructMethod::TensorTrain,
        ] {
            let a = reconstruct_fusion_graph(&g, method, &ReconstructOptions::default()).unwrap();
            let b = reconstruct_fusion_graph(&g, method, &ReconstructOptions::default()).unwrap();
            assert_eq!(a.graph.matrix().data(), b.graph.matrix().data(), "{method:?}");
        }
    }

    #[test]
    fn export_import_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let full = dir.path().join("aprime.csv");
        let slice1 = dir.path().join("aprime_slice1.csv");

        let f = build_fusion_matrix(&path_graph_n2());
        export_graph(&f, &full, &slice1).unwrap();

        let text = std::fs::read_to_string(&full).unwrap();
        assert_eq!(text.lines().count(), 36 + 1, "6x6 entries plus header");
        let back = import_graph_csv(&full).unwrap();
        assert_eq!(back, f);

        let slice_text = std::fs::read_to_string(&slice1).unwrap();
        assert_eq!(slice_text.lines().count(), 4 + 1);
    }

    #[test]
    fn distance_csv_parsing_errors_name_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dist.csv");
        std::fs::write(&p, "from,to,cost\n1,2,3.5\n2,x,1\n").unwrap();
        let err = load_distance_csv(&p).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");

        std::fs::write(&p, "from,to,cost\n1,2,3.5\n").unwrap();
        let edges = load_distance_csv(&p).unwrap();
        assert_eq!(edges, vec![EdgeRecord { from: 1, to: 2, cost: 3.5, line: 2 }]);
    }
}
