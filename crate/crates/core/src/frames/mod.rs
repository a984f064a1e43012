//! Sampled function frames on [0, 1]: orthonormal shifted Legendre polynomials and
//! multiscale wavelet frames, with canonical duals and derivatives.

mod grid;
mod legendre;
mod wavelet;

pub use grid::{GridScheme, GridSpec};
pub use legendre::{sample_legendre_basis, shifted_legendre};
pub use wavelet::{
    build_wavelet_frame, highpass_filter, lowpass_filter, scaling_function, Boundary,
    WaveletFamily, WaveletFrameSpec,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative singular-value cutoff for ranks and pseudo-inverses.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    LegendreOrthonormal,
    WaveletFrame,
    /// Anything supplied directly as samples.
    Custom,
}

impl std::fmt::Display for FrameKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FrameKind::LegendreOrthonormal => "legendre-orthonormal",
            FrameKind::WaveletFrame => "wavelet-frame",
            FrameKind::Custom => "custom",
        })
    }
}

/// K frame functions sampled on M quadrature nodes.
#[derive(Debug, Clone)]
pub struct SampledFrame {
    pub id: String,
    pub kind: FrameKind,
    /// K x M samples.
    pub values: DMatrix<f64>,
    pub duals: Option<DMatrix<f64>>,
    pub derivatives: Option<DMatrix<f64>>,
    pub dual_derivatives: Option<DMatrix<f64>>,
    /// Pseudo-inverse of the weighted Gram matrix (maps values to duals).
    pub dual_map: Option<DMatrix<f64>>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub scheme: GridScheme,
    pub periodic: bool,
    /// Function values at s = 0 and s = 1.
    pub endpoints: (DVector<f64>, DVector<f64>),
    pub dual_endpoints: Option<(DVector<f64>, DVector<f64>)>,
    /// Span dimension predicted by the construction, if known.
    pub expected_dim: Option<usize>,
    /// Numerical rank of the Gram matrix.
    pub effective_dim: usize,
    /// K / effective_dim.
    pub redundancy: f64,
}

impl SampledFrame {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        id: String,
        kind: FrameKind,
        values: DMatrix<f64>,
        nodes: Vec<f64>,
        weights: Vec<f64>,
        scheme: GridScheme,
        periodic: bool,
        endpoints: Option<(DVector<f64>, DVector<f64>)>,
    ) -> Self {
        let endpoints = endpoints.unwrap_or_else(|| extrapolate_endpoints(&values, periodic));
        let mut frame = SampledFrame {
            id,
            kind,
            values,
            duals: None,
            derivatives: None,
            dual_derivatives: None,
            dual_map: None,
            nodes,
            weights,
            scheme,
            periodic,
            endpoints,
            dual_endpoints: None,
            expected_dim: None,
            effective_dim: 0,
            redundancy: 1.0,
        };
        let sigma = linalg::svd_sorted(&frame.gram()).sigma;
        frame.effective_dim = linalg::numerical_rank(&sigma, RANK_TOL);
        frame.redundancy = frame.size() as f64 / frame.effective_dim.max(1) as f64;
        frame
    }

    /// Frame from raw samples on a grid (rows are functions).
    pub fn from_samples(
        id: impl Into<String>,
        values: DMatrix<f64>,
        grid: &GridSpec,
        periodic: bool,
    ) -> Result<Self> {
        let (nodes, weights) = grid.nodes_and_weights();
        if values.ncols() != nodes.len() {
            return Err(Error::Dimension(format!(
                "{} samples per function, grid has {}",
                values.ncols(),
                nodes.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("frame samples must be finite".into()));
        }
        Ok(Self::assemble(
            id.into(),
            FrameKind::Custom,
            values,
            nodes,
            weights,
            grid.scheme,
            periodic,
            None,
        ))
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_points(&self) -> usize {
        self.values.ncols()
    }

    /// Weighted Gram matrix `values diag(w) values^T`.
    pub fn gram(&self) -> DMatrix<f64> {
        weighted_product(&self.values, &self.values, &self.weights)
    }

    /// Analysis coefficients `<f, dual_k>` of a sampled function.
    pub fn analyze(&self, f: &[f64]) -> Result<DVector<f64>> {
        let duals = self.duals.as_ref().ok_or(Error::MissingDuals)?;
        if f.len() != self.num_points() {
            return Err(Error::Dimension(format!(
                "function has {} samples, frame grid has {}",
                f.len(),
                self.num_points()
            )));
        }
        let wf = DVector::from_iterator(f.len(), f.iter().zip(&self.weights).map(|(a, w)| a * w));
        Ok(duals * wf)
    }

    /// Synthesis `sum_k c_k phi_k` on the grid.
    pub fn synthesize(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        self.values.transpose() * coeffs
    }
}

/// `a diag(w) b^T`.
pub fn weighted_product(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut bw = b.clone();
    for (j, wj) in w.iter().enumerate() {
        bw.column_mut(j).scale_mut(*wj);
    }
    a * bw.transpose()
}

pub(crate) fn check_resolution(grid: &GridSpec, min_points: usize, what: String) -> Result<()> {
    if grid.num_points < min_points || grid.num_points < 12 {
        return Err(Error::ResolutionTooCoarse {
            points: grid.num_points,
            min_points: min_points.max(12),
            required: what,
        });
    }
    Ok(())
}

fn extrapolate_endpoints(values: &DMatrix<f64>, periodic: bool) -> (DVector<f64>, DVector<f64>) {
    let (k, m) = values.shape();
    if periodic {
        let e = DVector::from_fn(k, |r, _| 0.5 * (values[(r, 0)] + values[(r, m - 1)]));
        return (e.clone(), e);
    }
    // cubic through the four nearest midpoints, evaluated at the boundary
    let c = [35.0 / 16.0, -35.0 / 16.0, 21.0 / 16.0, -5.0 / 16.0];
    let left = DVector::from_fn(k, |r, _| (0..4.min(m)).map(|i| c[i] * values[(r, i)]).sum());
    let right = DVector::from_fn(k, |r, _| {
        (0..4.min(m)).map(|i| c[i] * values[(r, m - 1 - i)]).sum()
    });
    (left, right)
}

/// Canonical dual frame: `duals = pinv(G) values` with `G` the weighted Gram matrix.
pub fn compute_dual_frame(frame: &SampledFrame) -> Result<SampledFrame> {
    let g = frame.gram();
    let (gp, rank) = linalg::pinv(&g, RANK_TOL);
    let expected = frame.expected_dim.unwrap_or(rank);
    if rank < expected {
        return Err(Error::RankDeficientFrame { rank, expected });
    }
    let mut out = frame.clone();
    out.duals = Some(&gp * &frame.values);
    out.dual_endpoints = Some((&gp * &frame.endpoints.0, &gp * &frame.endpoints.1));
    out.dual_derivatives = frame.derivatives.as_ref().map(|d| &gp * d);
    out.dual_map = Some(gp);
    out.effective_dim = rank;
    out.redundancy = frame.size() as f64 / rank.max(1) as f64;
    Ok(out)
}

/// First-derivative weights at `z` for the nodes `x` (Fornberg's recursion).
pub fn fd_weights(z: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Fill derivatives by five-point finite differences (periodic wrap or one-sided
/// stencils at the boundary). No-op when derivatives are already present.
pub fn frame_derivative(frame: &SampledFrame) -> SampledFrame {
    let mut out = frame.clone();
    if out.derivatives.is_none() {
        let m = frame.num_points();
        let mut d = DMatrix::zeros(frame.size(), m);
        let width = 5.min(m);
        let x = &frame.nodes;
        for i in 0..m {
            let (idx, pos): (Vec<usize>, Vec<f64>) = if frame.periodic {
                (-2isize..=2)
                    .map(|o| {
                        let raw = i as isize + o;
                        let wrapped = raw.rem_euclid(m as isize) as usize;
                        let shift = raw.div_euclid(m as isize) as f64;
                        (wrapped, x[wrapped] + shift)
                    })
                    .unzip()
            } else {
                let start = i.saturating_sub(width / 2).min(m - width);
                (start..start + width).map(|j| (j, x[j])).unzip()
            };
            let w = fd_weights(x[i], &pos);
            for (j, wj) in idx.iter().zip(&w) {
                for r in 0..frame.size() {
                    d[(r, i)] += wj * frame.values[(r, *j)];
                }
            }
        }
        out.derivatives = Some(d);
    }
    if let (Some(gp), Some(d)) = (&out.dual_map, &out.derivatives) {
        if out.dual_derivatives.is_none() {
            out.dual_derivatives = Some(gp * d);
        }
    }
    out
}
