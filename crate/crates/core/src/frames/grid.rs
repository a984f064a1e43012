use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Quadrature rule on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridScheme {
    /// Uniform midpoint rule, `w_i = 1/M`.
    Midpoint,
    /// Midpoint nodes with Gregory-type endpoint corrections to the weights.
    /// Same nodes as `Midpoint`; error O(h^6) instead of O(h^2) for smooth integrands.
    CorrectedMidpoint,
    /// Gauss-Legendre nodes and weights. Non-uniform; only usable with frames that
    /// have closed-form samples (Legendre).
    GaussLegendre,
}

impl GridScheme {
    pub fn is_uniform(self) -> bool {
        !matches!(self, GridScheme::GaussLegendre)
    }
}

impl fmt::Display for GridScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridScheme::Midpoint => "midpoint",
            GridScheme::CorrectedMidpoint => "corrected-midpoint",
            GridScheme::GaussLegendre => "gauss-legendre",
        })
    }
}

impl FromStr for GridScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "midpoint" | "uniform-midpoint" => Ok(GridScheme::Midpoint),
            "corrected-midpoint" => Ok(GridScheme::CorrectedMidpoint),
            "gauss-legendre" | "gauss" => Ok(GridScheme::GaussLegendre),
            _ => Err(Error::InvalidArgument(format!(
                "unknown grid scheme '{s}' (expected midpoint, corrected-midpoint or gauss-legendre)"
            ))),
        }
    }
}

/// Grid resolution and quadrature rule over the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub num_points: usize,
    pub scheme: GridScheme,
}

// Endpoint corrections c_i for the first six nodes (mirrored at the right end).
// They make sum_i c_i (i + 1/2)^k match the Euler-Maclaurin boundary terms for k < 6.
const MIDPOINT_CORRECTION: [f64; 6] = [
    184831.0 / 967680.0,
    -532379.0 / 967680.0,
    68155.0 / 96768.0,
    -248543.0 / 483840.0,
    195203.0 / 967680.0,
    -32119.0 / 967680.0,
];

impl GridSpec {
    /// Default grid: corrected midpoint rule.
    pub fn new(num_points: usize) -> Self {
        GridSpec {
            num_points,
            scheme: GridScheme::CorrectedMidpoint,
        }
    }

    pub fn with_scheme(num_points: usize, scheme: GridScheme) -> Self {
        GridSpec { num_points, scheme }
    }

    /// Nodes (ascending) and weights summing to 1.
    pub fn nodes_and_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.num_points;
        match self.scheme {
            GridScheme::Midpoint => {
                let h = 1.0 / m as f64;
                ((0..m).map(|i| (i as f64 + 0.5) * h).collect(), vec![h; m])
            }
            GridScheme::CorrectedMidpoint => {
                let h = 1.0 / m as f64;
                let nodes = (0..m).map(|i| (i as f64 + 0.5) * h).collect();
                let mut w = vec![h; m];
                if m >= 2 * MIDPOINT_CORRECTION.len() {
                    for (i, c) in MIDPOINT_CORRECTION.iter().enumerate() {
                        w[i] += h * c;
                        w[m - 1 - i] += h * c;
                    }
                }
                (nodes, w)
            }
            GridScheme::GaussLegendre => gauss_legendre(m),
        }
    }
}

/// Gauss-Legendre rule mapped to [0, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp: f64;
        for _ in 0..100 {
            let (p, p_prev) = legendre_pair(n, x);
            dp = nf * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, p_prev) = legendre_pair(n, x);
        dp = nf * (x * p - p_prev) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is near +1 for small i, i.e. near s = 1.
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 0.5 * w;
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 0.5 * w;
    }
    (nodes, weights)
}

/// (P_n(x), P_{n-1}(x)) by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(g: &GridSpec, f: impl Fn(f64) -> f64) -> f64 {
        let (x, w) = g.nodes_and_weights();
        x.iter().zip(&w).map(|(x, w)| w * f(*x)).sum()
    }

    #[test]
    fn weights_sum_to_one() {
        for scheme in [GridScheme::Midpoint, GridScheme::CorrectedMidpoint, GridScheme::GaussLegendre] {
            for m in [12usize, 64, 1000] {
                let s: f64 = GridSpec::with_scheme(m, scheme).nodes_and_weights().1.iter().sum();
                assert!((s - 1.0).abs() < 1e-13, "{scheme} {m}");
            }
        }
    }

    #[test]
    fn correction_matches_euler_maclaurin_moments() {
        // Independent check of the constants: sum c_i (i+1/2)^k must equal the
        // Bernoulli boundary term B_{k+1}(1/2)/(k+1) for odd k and 0 for even k.
        let moment = |k: i32| -> f64 {
            MIDPOINT_CORRECTION
                .iter()
                .enumerate()
                .map(|(i, c)| c * (i as f64 + 0.5).powi(k))
                .sum()
        };
        // B_2(1/2) = -1/12, B_4(1/2) = 7/240, B_6(1/2) = -31/1344
        let expect = [0.0, -1.0 / 24.0, 0.0, 7.0 / 960.0, 0.0, -31.0 / 8064.0];
        for (k, e) in expect.iter().enumerate() {
            assert!((moment(k as i32) - e).abs() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn corrected_midpoint_is_third_order() {
        let f = |x: f64| (3.0 * x).exp();
        let exact = ((3.0f64).exp() - 1.0) / 3.0;
        let e1 = (integrate(&GridSpec::new(64), f) - exact).abs();
        let e2 = (integrate(&GridSpec::new(128), f) - exact).abs();
        assert!(e1 / e2 > 30.0, "ratio {}", e1 / e2);
        let m1 = (integrate(&GridSpec::with_scheme(64, GridScheme::Midpoint), f) - exact).abs();
        assert!(e1 < m1);
    }

    #[test]
    fn gauss_is_exact_for_high_degree() {
        let g = GridSpec::with_scheme(10, GridScheme::GaussLegendre);
        let v = integrate(&g, |x| x.powi(19));
        assert!((v - 1.0 / 20.0).abs() < 1e-14);
        let (x, _) = g.nodes_and_weights();
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }
}
