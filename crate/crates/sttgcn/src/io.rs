//! Binary containers and CSV debug forms.
//!
//! All binary files are little-endian:
//! * tensor (`STT1`): magic, three `u64` dims, then `d1*d2*d3` `f64` values
//!   in the crate-wide `(i*d2 + j)*d3 + k` layout;
//! * matrix (`STM1`): magic, `u64` rows and cols, row-major `f64` values;
//! * flow series (`STF1`): magic, `u64` steps and sensors, row-major `f64`
//!   values (rows are time steps).
//!
//! The tensor CSV debug form uses a `i,j,k,value` header with 1-based
//! indices. Values in CSV output use the shortest round-trippable decimal
//! representation, so export/import cycles are exact.

use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, DenseTensor3};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const TENSOR_MAGIC: &[u8; 4] = b"STT1";
const MATRIX_MAGIC: &[u8; 4] = b"STM1";
const FLOW_MAGIC: &[u8; 4] = b"STF1";

fn write_header(w: &mut impl Write, magic: &[u8; 4], dims: &[u64]) -> Result<()> {
    w.write_all(magic)?;
    for d in dims {
        w.write_all(&d.to_le_bytes())?;
    }
    Ok(())
}

fn write_values(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_magic(r: &mut impl Read, want: &[u8; 4], name: &str) -> Result<()> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| Error::format(name, 0, format!("truncated header: {e}")))?;
    if &magic != want {
        return Err(Error::format(
            name,
            0,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                String::from_utf8_lossy(want)
            ),
        ));
    }
    Ok(())
}

fn read_u64(r: &mut impl Read, name: &str) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::format(name, 0, format!("truncated header: {e}")))?;
    Ok(u64::from_le_bytes(buf))
}

fn read_values(r: &mut impl Read, count: usize, name: &str) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for idx in 0..count {
        r.read_exact(&mut buf)
            .map_err(|e| Error::format(name, 0, format!("truncated at element {idx}: {e}")))?;
        let v = f64::from_le_bytes(buf);
        if !v.is_finite() {
            return Err(Error::format(name, 0, format!("non-finite value at element {idx}")));
        }
        values.push(v);
    }
    Ok(values)
}

pub fn write_tensor(t: &DenseTensor3, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let (d1, d2, d3) = t.dims();
    write_header(&mut w, TENSOR_MAGIC, &[d1 as u64, d2 as u64, d3 as u64])?;
    write_values(&mut w, t.data())?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor3> {
    let name = path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    read_magic(&mut r, TENSOR_MAGIC, &name)?;
    let d1 = read_u64(&mut r, &name)? as usize;
    let d2 = read_u64(&mut r, &name)? as usize;
    let d3 = read_u64(&mut r, &name)? as usize;
    if d1 == 0 || d2 == 0 || d3 == 0 {
        return Err(Error::format(&name, 0, format!("zero dimension in {d1}x{d2}x{d3}")));
    }
    let values = read_values(&mut r, d1 * d2 * d3, &name)?;
    Ok(DenseTensor3::from_vec((d1, d2, d3), values))
}

pub fn write_matrix(m: &DenseMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, MATRIX_MAGIC, &[m.rows() as u64, m.cols() as u64])?;
    write_values(&mut w, m.data())?;
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let name = path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    read_magic(&mut r, MATRIX_MAGIC, &name)?;
    let rows = read_u64(&mut r, &name)? as usize;
    let cols = read_u64(&mut r, &name)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(&name, 0, format!("zero dimension in {rows}x{cols}")));
    }
    let values = read_values(&mut r, rows * cols, &name)?;
    Ok(DenseMatrix::from_vec(rows, cols, values))
}

/// Write a flow series given as a steps-by-sensors matrix.
pub fn write_flow_binary(values: &DenseMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, FLOW_MAGIC, &[values.rows() as u64, values.cols() as u64])?;
    write_values(&mut w, values.data())?;
    w.flush()?;
    Ok(())
}

pub fn read_flow_binary(path: &Path) -> Result<DenseMatrix> {
    let name = path.display().to_string();
    let mut r = BufReader::new(File::open(path)?);
    read_magic(&mut r, FLOW_MAGIC, &name)?;
    let steps = read_u64(&mut r, &name)? as usize;
    let sensors = read_u64(&mut r, &name)? as usize;
    if steps == 0 || sensors == 0 {
        return Err(Error::format(&name, 0, format!("zero dimension in {steps}x{sensors}")));
    }
    let values = read_values(&mut r, steps * sensors, &name)?;
    Ok(DenseMatrix::from_vec(steps, sensors, values))
}

/// Tensor CSV debug form: `i,j,k,value` with 1-based indices, one line per
/// entry in layout order.
pub fn write_tensor_csv(t: &DenseTensor3, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "i,j,k,value")?;
    let (d1, d2, d3) = t.dims();
    for i in 0..d1 {
        for j in 0..d2 {
            for k in 0..d3 {
                writeln!(w, "{},{},{},{}", i + 1, j + 1, k + 1, t.get(i, j, k))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor_csv(path: &Path) -> Result<DenseTensor3> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let mut entries: Vec<(usize, usize, usize, f64)> = Vec::new();
    let mut dims = (0usize, 0usize, 0usize);
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line.to_ascii_lowercase().replace(' ', "") == "i,j,k,value" {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::format(&name, line_no, "expected `i,j,k,value`".to_string()));
        }
        let parse_idx = |s: &str| -> Result<usize> {
            let v: usize = s
                .parse()
                .map_err(|_| Error::format(&name, line_no, format!("bad index `{s}`")))?;
            if v == 0 {
                return Err(Error::format(&name, line_no, "indices are 1-based".to_string()));
            }
            Ok(v)
        };
        let i = parse_idx(fields[0])?;
        let j = parse_idx(fields[1])?;
        let k = parse_idx(fields[2])?;
        let v: f64 = fields[3]
            .parse()
            .map_err(|_| Error::format(&name, line_no, format!("bad value `{}`", fields[3])))?;
        if !v.is_finite() {
            return Err(Error::format(&name, line_no, "non-finite value".to_string()));
        }
        dims.0 = dims.0.max(i);
        dims.1 = dims.1.max(j);
        dims.2 = dims.2.max(k);
        entries.push((i - 1, j - 1, k - 1, v));
    }
    if entries.is_empty() {
        return Err(Error::format(&name, 0, "no tensor entries".to_string()));
    }
    let mut t = DenseTensor3::zeros(dims.0, dims.1, dims.2);
    for (i, j, k, v) in entries {
        t.set(i, j, k, v);
    }
    Ok(t)
}


// ---------------------------------------------------------------------------
// Decomposition containers
// ---------------------------------------------------------------------------

use crate::config::{floats_to_string, KvMap};
use crate::decomp::{TuckerDecomp, TuckerMethod};
use std::path::PathBuf;

/// Persist a Tucker-family decomposition: `{stem}.core.stt1`, one
/// `{stem}.u{mode}.stm1` per factor, and `{stem}.manifest.txt` carrying the
/// method, ranks, iteration count and final objective.
pub fn write_tucker_decomp(d: &TuckerDecomp, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let core_path = dir.join(format!("{stem}.core.stt1"));
    write_tensor(&d.core, &core_path)?;
    written.push(core_path);
    for (idx, factor) in d.factors.iter().enumerate() {
        let p = dir.join(format!("{stem}.u{}.stm1", idx + 1));
        write_matrix(factor, &p)?;
        written.push(p);
    }
    let mut kv = KvMap::default();
    let ranks = d.ranks();
    kv.set("decomp.method", d.method.tag());
    kv.set("decomp.ranks", format!("{},{},{}", ranks.0, ranks.1, ranks.2));
    kv.set("decomp.iterations", d.objective_trace.len().saturating_sub(1));
    if let Some(last) = d.objective_trace.last() {
        kv.set("decomp.final_objective", *last);
    }
    kv.set("decomp.objective_trace", floats_to_string(&d.objective_trace));
    let manifest = dir.join(format!("{stem}.manifest.txt"));
    kv.save(&manifest)?;
    written.push(manifest);
    Ok(written)
}

/// Load a decomposition written by [`write_tucker_decomp`].
pub fn read_tucker_decomp(dir: &Path, stem: &str) -> Result<TuckerDecomp> {
    let kv = KvMap::load(&dir.join(format!("{stem}.manifest.txt")))?;
    let method = match kv.get("decomp.method") {
        Some("hosvd") => TuckerMethod::Hosvd,
        Some("hooi") => TuckerMethod::Hooi,
        Some("l1_tucker") => TuckerMethod::L1Tucker,
        other => {
            return Err(Error::usage(format!(
                "manifest method `{}` unknown",
                other.unwrap_or("<missing>")
            )))
        }
    };
    let core = read_tensor(&dir.join(format!("{stem}.core.stt1")))?;
    let factors = [
        read_matrix(&dir.join(format!("{stem}.u1.stm1")))?,
        read_matrix(&dir.join(format!("{stem}.u2.stm1")))?,
        read_matrix(&dir.join(format!("{stem}.u3.stm1")))?,
    ];
    let objective_trace = match kv.get("decomp.objective_trace") {
        Some(s) => crate::config::floats_from_string(s)?,
        None => Vec::new(),
    };
    Ok(TuckerDecomp { core, factors, objective_trace, method })
}
