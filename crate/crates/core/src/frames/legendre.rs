use nalgebra::{DMatrix, DVector};

use super::{check_resolution, FrameKind, GridSpec, SampledFrame};
use crate::error::Result;

/// Values and first derivatives of `sqrt(2n+1) P_n(2s-1)` for n < order.
pub fn shifted_legendre(order: usize, s: f64) -> (Vec<f64>, Vec<f64>) {
    let x = 2.0 * s - 1.0;
    let mut p = vec![0.0; order];
    let mut dp = vec![0.0; order];
    if order > 0 {
        p[0] = 1.0;
    }
    if order > 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for n in 1..order.saturating_sub(1) {
        let nf = n as f64;
        p[n + 1] = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        dp[n + 1] = dp[n - 1] + (2.0 * nf + 1.0) * p[n];
    }
    for n in 0..order {
        let c = (2.0 * n as f64 + 1.0).sqrt();
        p[n] *= c;
        dp[n] *= 2.0 * c;
    }
    (p, dp)
}

/// Orthonormal shifted Legendre polynomials on the grid, with analytic derivatives.
pub fn sample_legendre_basis(order: usize, grid: &GridSpec) -> Result<SampledFrame> {
    if order == 0 {
        return Err(crate::Error::InvalidArgument("Legendre order must be at least 1".into()));
    }
    check_resolution(grid, 4 * order, format!("{order} Legendre polynomials"))?;
    let (nodes, weights) = grid.nodes_and_weights();
    let m = nodes.len();
    let mut values = DMatrix::zeros(order, m);
    let mut derivs = DMatrix::zeros(order, m);
    for (i, &s) in nodes.iter().enumerate() {
        let (p, dp) = shifted_legendre(order, s);
        for n in 0..order {
            values[(n, i)] = p[n];
            derivs[(n, i)] = dp[n];
        }
    }
    let right = DVector::from_fn(order, |n, _| (2.0 * n as f64 + 1.0).sqrt());
    let left = DVector::from_fn(order, |n, _| {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        sign * (2.0 * n as f64 + 1.0).sqrt()
    });
    let mut frame = SampledFrame::assemble(
        format!("legendre(n={order},m={m},{})", grid.scheme),
        FrameKind::LegendreOrthonormal,
        values,
        nodes,
        weights,
        grid.scheme,
        false,
        Some((left, right)),
    );
    frame.derivatives = Some(derivs);
    frame.expected_dim = Some(order);
    frame.effective_dim = order;
    frame.redundancy = 1.0;
    // Self-dual by construction.
    frame.duals = Some(frame.values.clone());
    frame.dual_map = Some(DMatrix::identity(order, order));
    frame.dual_endpoints = Some(frame.endpoints.clone());
    frame.dual_derivatives = frame.derivatives.clone();
    Ok(frame)
}
