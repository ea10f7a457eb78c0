//! Thin SVD via one-sided Jacobi rotations, plus the polar (nearest
//! orthonormal matrix) step used by the L1 subspace updates.
//!
//! The implementation is deliberately self-contained and deterministic:
//! cyclic sweep order, stable tie-breaking when ordering singular values,
//! and a fixed sign convention (largest-magnitude entry of each left
//! singular vector is nonnegative, ties resolved to the lowest row index).
//! Columns belonging to zero singular values are completed to an orthonormal
//! basis from canonical unit vectors, lowest index first, so factors stay
//! orthonormal even for rank-deficient inputs.

use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

const MAX_SWEEPS: usize = 64;
const JACOBI_TOL: f64 = 1e-15;

/// Thin singular value decomposition `a = u * diag(sigma) * v^T` with
/// `k = min(rows, cols)` columns and singular values in descending order.
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

pub fn svd_thin(a: &DenseMatrix) -> Result<Svd> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::usage("svd of an empty matrix".to_string()));
    }
    let mut svd = if a.rows() >= a.cols() {
        svd_tall(a)?
    } else {
        let Svd { u, sigma, v } = svd_tall(&a.transposed())?;
        Svd { u: v, sigma, v: u }
    };
    // The sign convention is pinned to the left factor of the caller's
    // orientation, so it must run after the wide/tall swap above.
    apply_sign_convention(&mut svd.u, &mut svd.v);
    Ok(svd)
}

/// One-sided Jacobi on a tall (rows >= cols) matrix.
///
/// Works on the transpose so that matrix columns are contiguous rows in
/// memory; right rotations orthogonalize them in place while `vt`
/// accumulates the rotation product.
fn svd_tall(a: &DenseMatrix) -> Result<Svd> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let mut bt = a.transposed(); // row j of bt = column j of the working matrix
    let mut vt = DenseMatrix::identity(n);

    // Columns annihilated by earlier rotations can keep float residue that
    // stays parallel to live columns; below this floor they count as zero.
    let frob2: f64 = bt.data().iter().map(|x| x * x).sum();
    let dead_col_tol = frob2 * 1e-28;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let (app, aqq, apq) = column_moments(&bt, p, q);
                if app <= dead_col_tol || aqq <= dead_col_tol {
                    continue;
                }
                let denom = (app * aqq).sqrt();
                if apq.abs() <= JACOBI_TOL * denom {
                    continue;
                }
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut bt, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
                rotated = true;
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical(format!(
            "one-sided Jacobi SVD did not converge within {MAX_SWEEPS} sweeps for a {m}x{n} matrix"
        )));
    }

    let norms: Vec<f64> = (0..n).map(|j| vec_norm(bt.row(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let sigma_max = norms[order[0]];
    let rank_tol = sigma_max * (m.max(n) as f64) * f64::EPSILON;

    let mut u = DenseMatrix::zeros(m, n);
    let mut v = DenseMatrix::zeros(n, n);
    let mut sigma = vec![0.0; n];
    let mut deficient = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        sigma[slot] = norms[j];
        for r in 0..n {
            v.set(r, slot, vt.get(slot_row(j), r));
        }
        if norms[j] > rank_tol {
            let col = bt.row(j);
            let inv = 1.0 / norms[j];
            for r in 0..m {
                u.set(r, slot, col[r] * inv);
            }
        } else {
            sigma[slot] = 0.0;
            deficient.push(slot);
        }
    }
    drop(norms);

    complete_basis(&mut u, &deficient);
    Ok(Svd { u, sigma, v })
}

// vt rows are indexed identically to bt rows.
#[inline]
fn slot_row(j: usize) -> usize {
    j
}

fn column_moments(bt: &DenseMatrix, p: usize, q: usize) -> (f64, f64, f64) {
    let rp = bt.row(p);
    let rq = bt.row(q);
    let mut app = 0.0;
    let mut aqq = 0.0;
    let mut apq = 0.0;
    for (&x, &y) in rp.iter().zip(rq) {
        app += x * x;
        aqq += y * y;
        apq += x * y;
    }
    (app, aqq, apq)
}

fn rotate_rows(m: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let data = m.data_mut();
    let (head, tail) = data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fill columns listed in `slots` with orthonormal vectors built from
/// canonical basis vectors (lowest index first), Gram-Schmidt twice against
/// everything already in place.
fn complete_basis(u: &mut DenseMatrix, slots: &[usize]) {
    let (m, n) = u.shape();
    for &slot in slots {
        let mut filled = None;
        for cand in 0..m {
            let mut col = vec![0.0; m];
            col[cand] = 1.0;
            for _ in 0..2 {
                for j in 0..n {
                    if j == slot {
                        continue;
                    }
                    let mut dot = 0.0;
                    for r in 0..m {
                        dot += col[r] * u.get(r, j);
                    }
                    if dot != 0.0 {
                        for r in 0..m {
                            let vj = u.get(r, j);
                            col[r] -= dot * vj;
                        }
                    }
                }
            }
            let norm = vec_norm(&col);
            if norm > 0.1 {
                let inv = 1.0 / norm;
                for r in 0..m {
                    u.set(r, slot, col[r] * inv);
                }
                filled = Some(cand);
                break;
            }
        }
        debug_assert!(filled.is_some(), "basis completion must succeed for m >= n");
    }
}

/// Flip column signs so the largest-magnitude entry of each `u` column is
/// nonnegative (ties: lowest row index wins). `v` columns flip alongside so
/// the product is unchanged.
fn apply_sign_convention(u: &mut DenseMatrix, v: &mut DenseMatrix) {
    let (m, k) = u.shape();
    for j in 0..k {
        let mut best_r = 0;
        let mut best = -1.0;
        for r in 0..m {
            let a = u.get(r, j).abs();
            if a > best {
                best = a;
                best_r = r;
            }
        }
        if u.get(best_r, j) < 0.0 {
            for r in 0..m {
                let x = u.get(r, j);
                u.set(r, j, -x);
            }
            for r in 0..v.rows() {
                let x = v.get(r, j);
                v.set(r, j, -x);
            }
        }
    }
}

/// Leading `k` left singular vectors of `a`, orthonormal even when the rank
/// of `a` (or its column count) is below `k`: missing directions are filled
/// by deterministic basis completion. `k` may range up to `a.rows()`.
pub fn top_left_singular_vectors(a: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    if k == 0 || k > a.rows() {
        return Err(Error::usage(format!(
            "requested {k} singular vectors from a {}x{} matrix (valid range 1..={})",
            a.rows(),
            a.cols(),
            a.rows()
        )));
    }
    let u = svd_thin(a)?.u;
    if k <= u.cols() {
        return Ok(u.take_cols(k));
    }
    let mut wide = DenseMatrix::zeros(a.rows(), k);
    for j in 0..u.cols() {
        for r in 0..a.rows() {
            wide.set(r, j, u.get(r, j));
        }
    }
    let extra: Vec<usize> = (u.cols()..k).collect();
    complete_basis(&mut wide, &extra);
    Ok(wide)
}

/// Nearest column-orthonormal matrix to `m` (the orthogonal polar factor
/// `u * v^T` of the thin SVD). Requires `rows >= cols`.
pub fn polar_orthonormal(m: &DenseMatrix) -> Result<DenseMatrix> {
    if m.rows() < m.cols() {
        return Err(Error::usage(format!(
            "polar factor needs a tall matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let svd = svd_thin(m)?;
    Ok(svd.u.matmul_nt(&svd.v))
}
