use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::{check_resolution, FrameKind, GridScheme, GridSpec, SampledFrame};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaveletFamily {
    Haar,
    Db2,
    Db4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    ZeroPad,
}

/// Multiscale wavelet frame description.
///
/// `oversampling` is the number of translates per dyadic step: 1 gives the usual
/// orthonormal system, 2 adds the half-step translates and makes the frame redundant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WaveletFrameSpec {
    pub family: WaveletFamily,
    pub coarsest_scale: u32,
    pub finest_scale: u32,
    pub include_scaling_functions: bool,
    pub boundary: Boundary,
    pub oversampling: u32,
}

impl Default for WaveletFrameSpec {
    fn default() -> Self {
        WaveletFrameSpec {
            family: WaveletFamily::Haar,
            coarsest_scale: 0,
            finest_scale: 2,
            include_scaling_functions: true,
            boundary: Boundary::Periodic,
            oversampling: 2,
        }
    }
}

impl WaveletFrameSpec {
    /// Redundant frame whose span has dimension `2^(finest_scale+1)`.
    pub fn redundant(family: WaveletFamily, finest_scale: u32) -> Self {
        WaveletFrameSpec {
            family,
            finest_scale,
            ..Default::default()
        }
    }

    /// Redundant default frame with the given span dimension (a power of two, at least 2).
    pub fn redundant_with_dim(family: WaveletFamily, dim: usize) -> Result<Self> {
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "span dimension {dim} must be a power of two >= 2"
            )));
        }
        Ok(Self::redundant(family, dim.trailing_zeros() - 1))
    }

    pub fn frame_size(&self) -> usize {
        let r = self.oversampling as usize;
        let mut k = 0;
        if self.include_scaling_functions {
            k += r << self.coarsest_scale;
        }
        for j in self.coarsest_scale..=self.finest_scale {
            k += r << j;
        }
        k
    }

    /// Span dimension when it is known in closed form.
    pub fn expected_dim(&self) -> Option<usize> {
        if self.boundary != Boundary::Periodic || !self.include_scaling_functions {
            return None;
        }
        match self.oversampling {
            1 => Some(self.frame_size()),
            2 => Some(2usize << self.finest_scale),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.finest_scale < self.coarsest_scale {
            return Err(Error::UnsupportedFamily(format!(
                "finest scale {} is below coarsest scale {}",
                self.finest_scale, self.coarsest_scale
            )));
        }
        if !(1..=2).contains(&self.oversampling) {
            return Err(Error::UnsupportedFamily(format!(
                "oversampling {} (supported: 1, 2)",
                self.oversampling
            )));
        }
        if self.finest_scale > 16 {
            return Err(Error::UnsupportedFamily(format!("finest scale {} is too fine", self.finest_scale)));
        }
        Ok(())
    }
}

impl fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaveletFamily::Haar => "haar",
            WaveletFamily::Db2 => "db2",
            WaveletFamily::Db4 => "db4",
        })
    }
}

impl FromStr for WaveletFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" | "db1" => Ok(WaveletFamily::Haar),
            "db2" => Ok(WaveletFamily::Db2),
            "db4" => Ok(WaveletFamily::Db4),
            _ => Err(Error::UnsupportedFamily(format!("'{s}' (expected haar, db2 or db4)"))),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::ZeroPad => "zero-pad",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "zero-pad" | "zeropad" => Ok(Boundary::ZeroPad),
            _ => Err(Error::InvalidArgument(format!(
                "unknown boundary '{s}' (expected periodic or zero-pad)"
            ))),
        }
    }
}

const DB2: [f64; 4] = [
    0.482_962_913_144_534_1,
    0.836_516_303_737_807_9,
    0.224_143_868_042_013_4,
    -0.129_409_522_551_260_4,
];

const DB4: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_09,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

/// Low-pass reconstruction filter (sums to sqrt 2).
pub fn lowpass_filter(family: WaveletFamily) -> Vec<f64> {
    match family {
        WaveletFamily::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
        WaveletFamily::Db2 => DB2.to_vec(),
        WaveletFamily::Db4 => DB4.to_vec(),
    }
}

/// Quadrature mirror high-pass filter `g_k = (-1)^k h_{L-1-k}`.
pub fn highpass_filter(h: &[f64]) -> Vec<f64> {
    let l = h.len();
    (0..l)
        .map(|k| if k % 2 == 0 { h[l - 1 - k] } else { -h[l - 1 - k] })
        .collect()
}

/// Samples of the scaling function on the dyadic grid `m / 2^levels`, `m = 0..=(L-1) 2^levels`.
pub fn scaling_function(family: WaveletFamily, levels: u32) -> Vec<f64> {
    let h = lowpass_filter(family);
    let l = h.len();
    let step = 1usize << levels;
    if family == WaveletFamily::Haar {
        let mut phi = vec![1.0; step + 1];
        phi[step] = 0.0;
        return phi;
    }
    // Values at the integers: eigenvector of M[i][j] = sqrt2 h[2i-j] for eigenvalue 1.
    let n = l;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let k = 2 * i as isize - j as isize;
            if k >= 0 && (k as usize) < l {
                m[(i, j)] = std::f64::consts::SQRT_2 * h[k as usize];
            }
        }
    }
    let eig = linalg::eig(&m).expect("small cascade matrix");
    let idx = (0..n)
        .min_by(|&a, &b| {
            (eig.values[a] - 1.0)
                .norm()
                .total_cmp(&(eig.values[b] - 1.0).norm())
        })
        .unwrap();
    let mut cur: Vec<f64> = eig.vectors.column(idx).iter().map(|z| z.re).collect();
    let total: f64 = cur.iter().sum();
    cur.iter_mut().for_each(|v| *v /= total);

    for r in 1..=levels {
        let len = (l - 1) * (1 << r) + 1;
        let half = 1usize << (r - 1);
        let mut next = vec![0.0; len];
        for (mi, out) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, hk) in h.iter().enumerate() {
                let q = mi as isize - (k * half) as isize;
                if q >= 0 && (q as usize) < cur.len() {
                    acc += hk * cur[q as usize];
                }
            }
            *out = std::f64::consts::SQRT_2 * acc;
        }
        cur = next;
    }
    cur
}

fn wavelet_from_scaling(phi: &[f64], family: WaveletFamily, levels: u32) -> Vec<f64> {
    let g = highpass_filter(&lowpass_filter(family));
    let step = 1isize << levels;
    let len = phi.len() as isize;
    (0..len)
        .map(|m| {
            let mut acc = 0.0;
            for (k, gk) in g.iter().enumerate() {
                let q = 2 * m - k as isize * step;
                if q >= 0 && q < len {
                    acc += gk * phi[q as usize];
                }
            }
            std::f64::consts::SQRT_2 * acc
        })
        .collect()
}

/// Width of the Haar mollifier in grid cells.
const MOLLIFIER_CELLS: usize = 4;

/// Normalised taps of the C^2 bump (1-x^2)^3 and of its derivative (per unit s).
fn mollifier(m: usize) -> (Vec<isize>, Vec<f64>, Vec<f64>) {
    let h = 1.0 / m as f64;
    let half = MOLLIFIER_CELLS as f64 / 2.0;
    let reach = half.ceil() as isize;
    let offsets: Vec<isize> = (-reach..=reach).collect();
    let mut b = Vec::new();
    let mut db = Vec::new();
    for &o in &offsets {
        let x = o as f64 / half;
        if x.abs() < 1.0 {
            let q = 1.0 - x * x;
            b.push(q * q * q);
            db.push(-6.0 * x * q * q / (half * h));
        } else {
            b.push(0.0);
            db.push(0.0);
        }
    }
    let total: f64 = b.iter().sum();
    b.iter_mut().for_each(|v| *v /= total);
    db.iter_mut().for_each(|v| *v /= total);
    (offsets, b, db)
}

fn convolve_rows(f: &DMatrix<f64>, offsets: &[isize], taps: &[f64], periodic: bool) -> DMatrix<f64> {
    let (k, m) = f.shape();
    let mi = m as isize;
    let mut out = DMatrix::zeros(k, m);
    for (&o, &t) in offsets.iter().zip(taps) {
        if t == 0.0 {
            continue;
        }
        for i in 0..mi {
            let src = i - o;
            let src = if periodic {
                src.rem_euclid(mi)
            } else if src < 0 || src >= mi {
                continue;
            } else {
                src
            };
            for row in 0..k {
                out[(row, i as usize)] += t * f[(row, src as usize)];
            }
        }
    }
    out
}

/// Sample a multiscale wavelet frame on a uniform grid.
///
/// Haar functions are mollified with a narrow C^2 bump (4 grid cells) so that they
/// have square-integrable derivatives; the bump is part of the frame definition.
/// db2/db4 are sampled exactly on the dyadic grid by the cascade algorithm and
/// differentiated numerically.
///
/// Periodic frames use the plain midpoint rule even when the corrected rule is
/// requested: the integrands wrap around, and endpoint corrections would only
/// disturb the exact discrete cancellation at s = 0 ~ 1.
pub fn build_wavelet_frame(spec: &WaveletFrameSpec, grid: &GridSpec) -> Result<SampledFrame> {
    spec.validate()?;
    let grid = &if spec.boundary == Boundary::Periodic && grid.scheme == GridScheme::CorrectedMidpoint {
        GridSpec::with_scheme(grid.num_points, GridScheme::Midpoint)
    } else {
        *grid
    };
    if !grid.scheme.is_uniform() {
        return Err(Error::InvalidArgument(
            "wavelet frames need a uniform grid".into(),
        ));
    }
    let m = grid.num_points;
    if !m.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "wavelet frames need a power-of-two grid, got {m}"
        )));
    }
    let k_total = spec.frame_size();
    let min_points = (4usize << spec.finest_scale).max(4 * k_total);
    check_resolution(grid, min_points, format!("{k_total} wavelet frame functions"))?;

    let levels = (2 * m).trailing_zeros();
    let phi = scaling_function(spec.family, levels);
    let psi = wavelet_from_scaling(&phi, spec.family, levels);
    let scale = (1usize << levels) as f64;
    let support = (lowpass_filter(spec.family).len() - 1) as f64;
    let periodic = spec.boundary == Boundary::Periodic;
    let r = spec.oversampling as usize;

    let sample = |table: &[f64], x: f64| -> f64 {
        if !(0.0..=support).contains(&x) {
            return 0.0;
        }
        let idx = (x * scale).round() as usize;
        table.get(idx).copied().unwrap_or(0.0)
    };

    let (nodes, weights) = grid.nodes_and_weights();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k_total);
    let mut push = |table: &[f64], j: u32| {
        let dil = (1u64 << j) as f64;
        let norm = dil.sqrt();
        for k in 0..(r << j) {
            let shift = k as f64 / r as f64;
            let row: Vec<f64> = nodes
                .iter()
                .map(|&s| {
                    if periodic {
                        let reach = support.ceil() as i64 + 1;
                        (-reach..=reach)
                            .map(|p| sample(table, dil * (s + p as f64) - shift))
                            .sum::<f64>()
                            * norm
                    } else {
                        sample(table, dil * s - shift) * norm
                    }
                })
                .collect();
            rows.push(row);
        }
    };
    if spec.include_scaling_functions {
        push(&phi, spec.coarsest_scale);
    }
    for j in spec.coarsest_scale..=spec.finest_scale {
        push(&psi, j);
    }
    let mut values = DMatrix::from_fn(rows.len(), m, |a, b| rows[a][b]);

    let mut derivatives = None;
    if spec.family == WaveletFamily::Haar {
        let (offs, b, db) = mollifier(m);
        let raw = values;
        values = convolve_rows(&raw, &offs, &b, periodic);
        derivatives = Some(convolve_rows(&raw, &offs, &db, periodic));
    }

    let id = format!(
        "wavelet({},j0={},J={},r={},{},{},m={})",
        spec.family,
        spec.coarsest_scale,
        spec.finest_scale,
        spec.oversampling,
        if spec.include_scaling_functions { "scaling" } else { "no-scaling" },
        spec.boundary,
        m
    );
    let mut frame = SampledFrame::assemble(
        id,
        FrameKind::WaveletFrame,
        values,
        nodes,
        weights,
        grid.scheme,
        periodic,
        None,
    );
    frame.expected_dim = spec.expected_dim();
    frame.derivatives = derivatives;
    if frame.derivatives.is_none() {
        frame = super::frame_derivative(&frame);
    }
    Ok(frame)
}
