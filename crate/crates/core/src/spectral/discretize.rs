use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{ModeKind, ReducedSystem};
use crate::error::{Error, Result};
use crate::linalg;
use crate::safari::TimeInvariantSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Zero-order hold: exact for piecewise-constant input.
    Zoh,
    /// Tustin / bilinear transform.
    Bilinear,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Zoh => "zoh",
            Method::Bilinear => "bilinear",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zoh" => Ok(Method::Zoh),
            "bilinear" | "tustin" => Ok(Method::Bilinear),
            _ => Err(Error::InvalidArgument(format!(
                "unknown discretization '{s}' (expected zoh or bilinear)"
            ))),
        }
    }
}

/// Discrete transition `x_n = a_d x_{n-1} + b_d u_n`.
#[derive(Debug, Clone)]
pub enum Transition {
    Dense {
        a: DMatrix<f64>,
        b: DVector<f64>,
    },
    Diagonal {
        a: Vec<Complex64>,
        b: Vec<Complex64>,
        kinds: Vec<ModeKind>,
        half_storage: bool,
    },
}

#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub transition: Transition,
    pub dt: f64,
    pub method: Method,
}

impl DiscreteSystem {
    /// State dimension as stored.
    pub fn dim(&self) -> usize {
        match &self.transition {
            Transition::Dense { b, .. } => b.len(),
            Transition::Diagonal { b, .. } => b.len(),
        }
    }

    /// Largest |eigenvalue| of the transition.
    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(match &self.transition {
            Transition::Dense { a, .. } => linalg::eigenvalues(a)?
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max),
            Transition::Diagonal { a, .. } => a.iter().map(|z| z.norm()).fold(0.0, f64::max),
        })
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::NonpositiveStep(dt));
    }
    Ok(())
}

/// Dense discretization of `(-A/theta, B/theta)`.
///
/// ZOH uses the exponential of the augmented matrix `[[F, G], [0, 0]] dt`, whose top
/// right block is `int_0^dt e^{F tau} d tau G`; this stays valid when `A` is singular.
pub fn discretize(sys: &TimeInvariantSystem, dt: f64, method: Method) -> Result<DiscreteSystem> {
    check_dt(dt)?;
    let (f, g) = sys.effective_dynamics();
    let n = g.len();
    let (a, b) = match method {
        Method::Zoh => {
            let mut aug = DMatrix::zeros(n + 1, n + 1);
            aug.view_mut((0, 0), (n, n)).copy_from(&(&f * dt));
            aug.view_mut((0, n), (n, 1)).copy_from(&(&g * dt));
            let e = linalg::expm(&aug);
            (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, 1)).column(0).into_owned())
        }
        Method::Bilinear => {
            let id = DMatrix::<f64>::identity(n, n);
            let lhs = &id - &f * (dt / 2.0);
            let lu = lhs.lu();
            let a = lu
                .solve(&(&id + &f * (dt / 2.0)))
                .ok_or_else(|| Error::InvalidArgument("bilinear map is singular".into()))?;
            let b = lu
                .solve(&(&g * dt))
                .ok_or_else(|| Error::InvalidArgument("bilinear map is singular".into()))?;
            (a, b)
        }
    };
    Ok(DiscreteSystem {
        transition: Transition::Dense { a, b },
        dt,
        method,
    })
}

/// `(1 - e^{-z}) / z`, accurate near zero.
fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        Complex64::new(1.0, 0.0) - z / 2.0 + z * z / 6.0 - z * z * z / 24.0
    } else {
        (Complex64::new(1.0, 0.0) - (-z).exp()) / z
    }
}

/// Elementwise discretization of a reduced diagonal system run with timescale `theta`.
pub fn discretize_reduced(rs: &ReducedSystem, theta: f64, dt: f64, method: Method) -> Result<DiscreteSystem> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::NonpositiveTheta(theta));
    }
    check_dt(dt)?;
    let mut a = Vec::with_capacity(rs.lambda.len());
    let mut b = Vec::with_capacity(rs.lambda.len());
    for (l, bt) in rs.lambda.iter().zip(&rs.b_tilde) {
        let z = l * (dt / theta);
        match method {
            Method::Zoh => {
                a.push((-z).exp());
                b.push(phi1(z) * bt * (dt / theta));
            }
            Method::Bilinear => {
                let den = Complex64::new(1.0, 0.0) + z / 2.0;
                a.push((Complex64::new(1.0, 0.0) - z / 2.0) / den);
                b.push(bt * (dt / theta) / den);
            }
        }
    }
    Ok(DiscreteSystem {
        transition: Transition::Diagonal {
            a,
            b,
            kinds: rs.kinds.clone(),
            half_storage: rs.half_storage,
        },
        dt,
        method,
    })
}
