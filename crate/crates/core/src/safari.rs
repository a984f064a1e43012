//! Continuous-time `(A, B)` from a sampled frame, the HiPPO closed forms, and the
//! time-invariant wrapper.
//!
//! Sign convention: `A` has a nonnegative spectrum and the minus sign lives in the
//! dynamics, `dx/dt = -(1/t) A x + (1/t) B u` (scaled) or `-(1/theta) A x + (1/theta) B u`
//! (translated and time-invariant). The input window is parameterised by `s` in
//! [0, 1] with `s = 1` the present.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frames::{
    build_wavelet_frame, compute_dual_frame, weighted_product, FrameKind, GridSpec, SampledFrame,
    WaveletFrameSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Scaled,
    Translated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    HippoLegs,
    HippoLegt,
    Walrus,
    /// Built from a frame supplied as raw samples.
    Custom,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Scaled => "scaled",
            Measure::Translated => "translated",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled" => Ok(Measure::Scaled),
            "translated" => Ok(Measure::Translated),
            _ => Err(Error::InvalidArgument(format!(
                "unknown measure '{s}' (expected scaled or translated)"
            ))),
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Species::HippoLegs => "hippo-legs",
            Species::HippoLegt => "hippo-legt",
            Species::Walrus => "walrus",
            Species::Custom => "custom",
        })
    }
}

impl FromStr for Species {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hippo-legs" => Ok(Species::HippoLegs),
            "hippo-legt" => Ok(Species::HippoLegt),
            "walrus" => Ok(Species::Walrus),
            "custom" => Ok(Species::Custom),
            _ => Err(Error::InvalidArgument(format!(
                "unknown species '{s}' (expected hippo-legs, hippo-legt, walrus or custom)"
            ))),
        }
    }
}

/// `(A, B)` pair before any timescale or discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSSM {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub measure: Measure,
    pub species: Species,
    /// Id of the generating frame, or a closed-form tag.
    pub frame_ref: String,
}

impl ContinuousSSM {
    pub fn order(&self) -> usize {
        self.b.len()
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(self.b.iter()).all(|v| v.is_finite())
    }
}

fn species_for(frame: &SampledFrame, measure: Measure) -> Species {
    match (frame.kind, measure) {
        (FrameKind::LegendreOrthonormal, Measure::Scaled) => Species::HippoLegs,
        (FrameKind::LegendreOrthonormal, Measure::Translated) => Species::HippoLegt,
        (FrameKind::WaveletFrame, _) => Species::Walrus,
        (FrameKind::Custom, _) => Species::Custom,
    }
}

/// Scaled-measure dynamics from a frame with duals and derivatives.
///
/// With `x_n(t) = int_0^1 f(ts) dual_n(s) ds`, integration by parts gives
/// `A = I + E`, `E[n,m] = int s dual_n'(s) phi_m(s) ds`, `B[n] = dual_n(1)`.
/// Directions outside the analysis range (synthesis null space) are left with
/// eigenvalue exactly 1.
pub fn derive_scaled_ssm(frame: &SampledFrame) -> Result<ContinuousSSM> {
    if frame.duals.is_none() {
        return Err(Error::MissingDuals);
    }
    let dd = frame.dual_derivatives.as_ref().ok_or(Error::MissingDerivatives)?;
    let (_, right) = frame.dual_endpoints.as_ref().ok_or(Error::MissingDuals)?;
    let sw: Vec<f64> = frame.nodes.iter().zip(&frame.weights).map(|(s, w)| s * w).collect();
    let e = weighted_product(dd, &frame.values, &sw);
    let k = frame.size();
    let a = DMatrix::identity(k, k) + e;
    Ok(ContinuousSSM {
        a,
        b: right.clone(),
        measure: Measure::Scaled,
        species: species_for(frame, Measure::Scaled),
        frame_ref: frame.id.clone(),
    })
}

/// Translated-measure (sliding window) dynamics:
/// `A = dual(1) phi(1)^T - int dual(s) phi'(s)^T ds`, `B = dual(1)`.
pub fn derive_translated_ssm(frame: &SampledFrame) -> Result<ContinuousSSM> {
    let duals = frame.duals.as_ref().ok_or(Error::MissingDuals)?;
    let d = frame.derivatives.as_ref().ok_or(Error::MissingDerivatives)?;
    let (_, dual_right) = frame.dual_endpoints.as_ref().ok_or(Error::MissingDuals)?;
    let (_, right) = &frame.endpoints;
    let a = dual_right * right.transpose() - weighted_product(duals, d, &frame.weights);
    Ok(ContinuousSSM {
        a,
        b: dual_right.clone(),
        measure: Measure::Translated,
        species: species_for(frame, Measure::Translated),
        frame_ref: frame.id.clone(),
    })
}

/// Wavelet frame on `grid`, its dual, and the derived SSM for `measure`.
pub fn walrus_ssm(spec: &WaveletFrameSpec, grid: &GridSpec, measure: Measure) -> Result<(SampledFrame, ContinuousSSM)> {
    let frame = compute_dual_frame(&build_wavelet_frame(spec, grid)?)?;
    let ssm = match measure {
        Measure::Scaled => derive_scaled_ssm(&frame)?,
        Measure::Translated => derive_translated_ssm(&frame)?,
    };
    Ok((frame, ssm))
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("state order must be at least 1".into()));
    }
    Ok(())
}

/// HiPPO-LegS: lower triangular, `A[n,k] = sqrt(2n+1) sqrt(2k+1)` below the diagonal,
/// `n+1` on it; `B[n] = sqrt(2n+1)`.
pub fn hippo_legs_closed_form(n: usize) -> Result<ContinuousSSM> {
    check_order(n)?;
    let r = |i: usize| (2.0 * i as f64 + 1.0).sqrt();
    let a = DMatrix::from_fn(n, n, |i, k| match i.cmp(&k) {
        std::cmp::Ordering::Greater => r(i) * r(k),
        std::cmp::Ordering::Equal => i as f64 + 1.0,
        std::cmp::Ordering::Less => 0.0,
    });
    Ok(ContinuousSSM {
        a,
        b: DVector::from_fn(n, |i, _| r(i)),
        measure: Measure::Scaled,
        species: Species::HippoLegs,
        frame_ref: format!("closed-form:legs(n={n})"),
    })
}

/// HiPPO-LegT with the window oriented so that `s = 1` is the present:
/// `A[n,k] = sqrt(2n+1) sqrt(2k+1)` for `n >= k`, times `(-1)^(k-n)` for `n < k`;
/// `B[n] = sqrt(2n+1)`.
pub fn hippo_legt_closed_form(n: usize) -> Result<ContinuousSSM> {
    check_order(n)?;
    let r = |i: usize| (2.0 * i as f64 + 1.0).sqrt();
    let a = DMatrix::from_fn(n, n, |i, k| {
        let sign = if i >= k || (k - i) % 2 == 0 { 1.0 } else { -1.0 };
        sign * r(i) * r(k)
    });
    Ok(ContinuousSSM {
        a,
        b: DVector::from_fn(n, |i, _| r(i)),
        measure: Measure::Translated,
        species: Species::HippoLegt,
        frame_ref: format!("closed-form:legt(n={n})"),
    })
}

/// An SSM run with a fixed timescale `theta` (samples):
/// `dx/dt = -(A/theta) x + (B/theta) u`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeInvariantSystem {
    pub base: ContinuousSSM,
    pub theta: f64,
    /// Set when the base already uses the translated measure.
    pub translated_input: bool,
}

impl TimeInvariantSystem {
    /// `(-A/theta, B/theta)`.
    pub fn effective_dynamics(&self) -> (DMatrix<f64>, DVector<f64>) {
        (&self.base.a * (-1.0 / self.theta), &self.base.b / self.theta)
    }
}

pub fn make_time_invariant(ssm: &ContinuousSSM, theta: f64) -> Result<TimeInvariantSystem> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::NonpositiveTheta(theta));
    }
    let translated_input = ssm.measure == Measure::Translated;
    if translated_input {
        log::warn!("time-invariant wrapper applied to a translated-measure system ({})", ssm.frame_ref);
    }
    Ok(TimeInvariantSystem {
        base: ssm.clone(),
        theta,
        translated_input,
    })
}
