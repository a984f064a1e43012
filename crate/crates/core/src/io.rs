//! Text and binary formats: frame, matrix, spectrum, kernel and signal files.
//!
//! Floats are written with 17 significant digits so that every value round-trips.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frames::{FrameKind, GridScheme, SampledFrame};
use crate::kernel::Kernel;
use crate::spectral::{Partition, Spectrum};

pub const SSMK_MAGIC: &[u8; 4] = b"SSMK";
pub const SSMK_VERSION: u32 = 1;
const SSMK_HEADER: usize = 16;

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_field(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("not a number: '{}'", s.trim())))?;
    if !v.is_finite() {
        return Err(parse_err(line, "non-finite value"));
    }
    Ok(v)
}

/// Lines that carry data: blank lines and `#` comments are skipped. Yields 1-based numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn is_numeric_row(line: &str) -> bool {
    line.split(',').all(|f| f.trim().parse::<f64>().is_ok())
}

pub fn write_matrix_csv<W: Write>(mut w: W, header: &str, m: &DMatrix<f64>) -> Result<()> {
    if !header.is_empty() {
        writeln!(w, "# {header}")?;
    }
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_f64(m[(r, c)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_vector_csv<W: Write>(w: W, header: &str, v: &DVector<f64>) -> Result<()> {
    write_matrix_csv(w, header, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

/// Rectangular numeric CSV. An optional non-numeric header row is skipped.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, (line, l)) in data_lines(text).enumerate() {
        if k == 0 && !is_numeric_row(l) {
            continue;
        }
        let row = l
            .split(',')
            .map(|f| parse_field(f, line))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(line, format!("expected {} columns, found {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no data rows"));
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

/// Frame layout: a `node` row of grid points, a `weight` row, then one row per function.
pub fn write_frame_csv<W: Write>(mut w: W, frame: &SampledFrame) -> Result<()> {
    writeln!(
        w,
        "# frame id={} kind={} scheme={} periodic={}",
        frame.id, frame.kind, frame.scheme, frame.periodic
    )?;
    let row = |label: String, vals: &mut dyn Iterator<Item = f64>| {
        let mut s = label;
        for v in vals {
            s.push(',');
            s.push_str(&fmt_f64(v));
        }
        s
    };
    writeln!(w, "{}", row("node".into(), &mut frame.nodes.iter().cloned()))?;
    writeln!(w, "{}", row("weight".into(), &mut frame.weights.iter().cloned()))?;
    for k in 0..frame.size() {
        writeln!(w, "{}", row(format!("phi_{k}"), &mut frame.values.row(k).iter().cloned()))?;
    }
    Ok(())
}

fn header_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    let first = text.lines().find(|l| l.trim_start().starts_with("# frame"))?;
    first
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
}

/// Inverse of [`write_frame_csv`]. Without a `weight` row the weights are uniform.
pub fn parse_frame_csv(text: &str) -> Result<SampledFrame> {
    let mut nodes: Option<Vec<f64>> = None;
    let mut weights: Option<Vec<f64>> = None;
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (line, l) in data_lines(text) {
        let (label, rest) = l.split_once(',').ok_or_else(|| parse_err(line, "expected a label and values"))?;
        let vals = rest
            .split(',')
            .map(|f| parse_field(f, line))
            .collect::<Result<Vec<f64>>>()?;
        match label.trim() {
            "node" | "s" => {
                if nodes.is_some() {
                    return Err(parse_err(line, "duplicate node row"));
                }
                nodes = Some(vals);
            }
            "weight" | "w" => {
                if weights.is_some() {
                    return Err(parse_err(line, "duplicate weight row"));
                }
                weights = Some(vals);
            }
            _ => values.push(vals),
        }
        let m = nodes.as_ref().map(|n| n.len());
        let last = values.last().map(|v| v.len()).or(weights.as_ref().map(|w| w.len()));
        if let (Some(m), Some(len)) = (m, last) {
            if m != len {
                return Err(parse_err(line, format!("expected {m} samples, found {len}")));
            }
        }
    }
    let nodes = nodes.ok_or_else(|| parse_err(0, "missing node row"))?;
    let m = nodes.len();
    if m < 4 {
        return Err(parse_err(0, "at least 4 grid points are required"));
    }
    if nodes.windows(2).any(|p| p[1] <= p[0]) || nodes[0] < 0.0 || nodes[m - 1] > 1.0 {
        return Err(parse_err(0, "nodes must increase strictly within [0, 1]"));
    }
    let weights = weights.unwrap_or_else(|| vec![1.0 / m as f64; m]);
    if weights.len() != m || weights.iter().any(|w| *w <= 0.0) {
        return Err(parse_err(0, "weights must be positive, one per node"));
    }
    if values.is_empty() {
        return Err(parse_err(0, "no frame functions"));
    }
    if values.iter().any(|v| v.len() != m) {
        return Err(parse_err(0, format!("every function needs {m} samples")));
    }
    let scheme = header_value(text, "scheme")
        .and_then(|s| s.parse::<GridScheme>().ok())
        .unwrap_or(GridScheme::Midpoint);
    let periodic = header_value(text, "periodic") == Some("true");
    let id = header_value(text, "id").unwrap_or("imported").to_string();
    let mat = DMatrix::from_fn(values.len(), m, |r, c| values[r][c]);
    Ok(SampledFrame::assemble(id, FrameKind::Custom, mat, nodes, weights, scheme, periodic, None))
}

/// `index,re,im,abs_minus_one,retained,input_weight`.
pub fn write_spectrum_csv<W: Write>(mut w: W, spec: &Spectrum, partition: &Partition) -> Result<()> {
    writeln!(w, "index,re,im,abs_minus_one,retained,input_weight")?;
    for (i, l) in spec.eigenvalues.iter().enumerate() {
        let weight = spec.input_weights.as_ref().map_or(f64::NAN, |v| v[i].norm());
        writeln!(
            w,
            "{},{},{},{},{},{}",
            i,
            fmt_f64(l.re),
            fmt_f64(l.im),
            fmt_f64((l - 1.0).norm()),
            partition.retained.contains(&i),
            fmt_f64(weight)
        )?;
    }
    Ok(())
}

/// `lag,tap`, with the feed-through in a comment line.
pub fn write_kernel_csv<W: Write>(mut w: W, kernel: &Kernel) -> Result<()> {
    writeln!(w, "# source={} feedthrough={}", kernel.source, fmt_f64(kernel.feedthrough))?;
    writeln!(w, "lag,tap")?;
    for (l, t) in kernel.taps.iter().enumerate() {
        writeln!(w, "{},{}", l, fmt_f64(*t))?;
    }
    Ok(())
}

/// Single-column signal; the first line may be a header.
pub fn parse_signal_csv(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, (line, l)) in data_lines(text).enumerate() {
        let field = l.trim_end_matches(',');
        if field.contains(',') {
            return Err(parse_err(line, "expected a single column"));
        }
        match field.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(parse_err(line, "non-finite value")),
            Err(_) if k == 0 => continue,
            Err(_) => return Err(parse_err(line, format!("not a number: '{field}'"))),
        }
    }
    if out.is_empty() {
        return Err(parse_err(0, "no samples"));
    }
    Ok(out)
}

pub fn write_signal_csv<W: Write>(mut w: W, signal: &[f64]) -> Result<()> {
    writeln!(w, "value")?;
    for v in signal {
        writeln!(w, "{}", fmt_f64(*v))?;
    }
    Ok(())
}

/// `"SSMK"`, `u32` version, `u64` length (all little-endian), then `length` f64 values.
pub fn encode_ssmk(signal: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(SSMK_HEADER + 8 * signal.len());
    out.extend_from_slice(SSMK_MAGIC);
    out.extend_from_slice(&SSMK_VERSION.to_le_bytes());
    out.extend_from_slice(&(signal.len() as u64).to_le_bytes());
    for v in signal {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_ssmk(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() < SSMK_HEADER {
        return Err(parse_err(0, format!("{} bytes is shorter than the 16-byte header", bytes.len())));
    }
    if &bytes[..4] != SSMK_MAGIC {
        return Err(parse_err(0, "bad magic (expected SSMK)"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != SSMK_VERSION {
        return Err(parse_err(0, format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let body = &bytes[SSMK_HEADER..];
    if body.len() % 8 != 0 || (body.len() / 8) as u64 != len {
        return Err(parse_err(
            0,
            format!("header declares {len} values, payload holds {} bytes", body.len()),
        ));
    }
    body.chunks_exact(8)
        .map(|c| {
            let v = f64::from_le_bytes(c.try_into().expect("8 bytes"));
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(0, "non-finite value"))
            }
        })
        .collect()
}

/// Read a signal from disk, detecting the binary format by its magic.
pub fn read_signal_file(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(SSMK_MAGIC) {
        parse_ssmk(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| parse_err(0, "signal file is neither SSMK nor UTF-8 text"))?;
        parse_signal_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{sample_legendre_basis, GridSpec};

    #[test]
    fn matrix_roundtrip_is_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0 / 3.0, -2.5e-300, 7.0, 0.1, f64::MAX, -0.0]);
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, "species=test n=2", &m).unwrap();
        let back = parse_matrix_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_rejects_ragged_rows() {
        assert!(parse_matrix_csv("1,2\n3\n").is_err());
        assert!(parse_matrix_csv("a,b\n").is_err());
        assert_eq!(parse_matrix_csv("a,b\n1,2\n").unwrap().ncols(), 2);
    }

    #[test]
    fn frame_roundtrip() {
        let f = sample_legendre_basis(3, &GridSpec::new(16)).unwrap();
        let mut buf = Vec::new();
        write_frame_csv(&mut buf, &f).unwrap();
        let g = parse_frame_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(g.values, f.values);
        assert_eq!(g.nodes, f.nodes);
        assert_eq!(g.weights, f.weights);
        assert_eq!(g.scheme, f.scheme);
        assert_eq!(g.id, f.id);
        assert_eq!(g.effective_dim, 3);
    }

    #[test]
    fn signal_csv_with_and_without_header() {
        assert_eq!(parse_signal_csv("u\n1\n2.5\n").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_signal_csv("1\n\n-3\n").unwrap(), vec![1.0, -3.0]);
        assert!(parse_signal_csv("1\nx\n").is_err());
        assert!(parse_signal_csv("1,2\n").is_err());
        assert!(parse_signal_csv("header\n").is_err());
    }

    #[test]
    fn ssmk_roundtrip_and_rejections() {
        let s = vec![0.5, -1.0, 1e-310];
        let bytes = encode_ssmk(&s);
        assert_eq!(bytes.len(), 16 + 24);
        assert_eq!(parse_ssmk(&bytes).unwrap(), s);
        assert!(parse_ssmk(&bytes[..20]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(parse_ssmk(&bad).is_err());
        let mut huge = bytes.clone();
        huge[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(parse_ssmk(&huge).is_err());
    }

    #[test]
    fn kernel_csv_lists_every_tap() {
        let k = Kernel {
            taps: vec![1.0, 0.5],
            feedthrough: 0.0,
            source: "t".into(),
        };
        let mut buf = Vec::new();
        write_kernel_csv(&mut buf, &k).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let m = parse_matrix_csv(&text).unwrap();
        assert_eq!(m.column(1).iter().cloned().collect::<Vec<_>>(), vec![1.0, 0.5]);
    }
}
