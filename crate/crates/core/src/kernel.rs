//! Convolution kernels, FFT convolution, recurrent scans and history reconstruction.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use realfft::{RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::frames::{FrameKind, SampledFrame};
use crate::safari::{ContinuousSSM, Measure};
use crate::spectral::{DiscreteSystem, Transition};
use crate::spectral::{ModeKind, ReducedSystem};

/// Largest imaginary residue tolerated in a real output, relative to its scale.
pub const IMAG_TOL: f64 = 1e-9;

/// Readout row: real over original coordinates or complex over modal coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Readout {
    Real(DVector<f64>),
    /// One entry per stored mode. Compressed conjugate pairs contribute `2 Re(c x)`.
    Modal(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutMap {
    pub c: Readout,
    pub d: f64,
}

impl ReadoutMap {
    pub fn real(c: DVector<f64>, d: f64) -> Self {
        ReadoutMap { c: Readout::Real(c), d }
    }

    pub fn modal(c: Vec<Complex64>, d: f64) -> Self {
        ReadoutMap { c: Readout::Modal(c), d }
    }

    /// Map a readout over original coordinates onto a reduced system.
    pub fn for_reduced(rs: &ReducedSystem, c: &DVector<f64>, d: f64) -> Result<Self> {
        Ok(ReadoutMap::modal(rs.reduce_readout(c)?, d))
    }

    pub fn len(&self) -> usize {
        match &self.c {
            Readout::Real(c) => c.len(),
            Readout::Modal(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub taps: Vec<f64>,
    pub feedthrough: f64,
    pub source: String,
}

impl Kernel {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Drop the trailing taps whose magnitude is below `tol` (at least one tap is kept).
    pub fn truncate_decayed(&mut self, tol: f64) {
        let keep = self.taps.iter().rposition(|t| t.abs() >= tol).map_or(1, |i| i + 1);
        self.taps.truncate(keep.max(1));
    }
}

/// Output multiplier of stored mode `k`: 2 for a compressed conjugate pair.
fn mode_scale(kinds: &[ModeKind], half: bool, k: usize) -> f64 {
    if half && kinds[k] == ModeKind::Complex {
        2.0
    } else {
        1.0
    }
}

enum ResolvedC<'a> {
    Real(&'a DVector<f64>),
    Modal(Vec<Complex64>),
}

fn resolve_readout<'a>(sys: &DiscreteSystem, readout: &'a ReadoutMap) -> Result<ResolvedC<'a>> {
    let n = sys.dim();
    if readout.len() != n {
        return Err(Error::Dimension(format!(
            "readout has {} entries, system has {} states",
            readout.len(),
            n
        )));
    }
    match (&sys.transition, &readout.c) {
        (Transition::Dense { .. }, Readout::Real(c)) => Ok(ResolvedC::Real(c)),
        (Transition::Dense { .. }, Readout::Modal(_)) => Err(Error::Dimension(
            "modal readout given for a dense system".into(),
        )),
        (Transition::Diagonal { .. }, Readout::Modal(c)) => Ok(ResolvedC::Modal(c.clone())),
        (Transition::Diagonal { .. }, Readout::Real(c)) => {
            Ok(ResolvedC::Modal(c.iter().map(|&v| Complex64::new(v, 0.0)).collect()))
        }
    }
}

fn check_residue(im: f64, scale: f64) -> Result<()> {
    let limit = IMAG_TOL * scale.max(1.0);
    if im.abs() > limit {
        return Err(Error::ImaginaryResidue { residue: im.abs(), limit });
    }
    Ok(())
}

/// Taps `C A_d^l B_d` for `l < len`.
pub fn compute_kernel(sys: &DiscreteSystem, readout: &ReadoutMap, len: usize) -> Result<Kernel> {
    if len == 0 {
        return Err(Error::InvalidArgument("kernel length must be at least 1".into()));
    }
    let c = resolve_readout(sys, readout)?;
    let mut taps = Vec::with_capacity(len);
    match (&sys.transition, c) {
        (Transition::Dense { a, b }, ResolvedC::Real(c)) => {
            let mut x = b.clone();
            let mut next = DVector::zeros(x.len());
            for _ in 0..len {
                taps.push(c.dot(&x));
                next.gemv(1.0, a, &x, 0.0);
                std::mem::swap(&mut x, &mut next);
            }
        }
        (
            Transition::Diagonal {
                a,
                b,
                kinds,
                half_storage,
            },
            ResolvedC::Modal(c),
        ) => {
            let mut w: Vec<Complex64> = c.iter().zip(b).map(|(c, b)| c * b).collect();
            let scales: Vec<f64> = (0..w.len()).map(|k| mode_scale(kinds, *half_storage, k)).collect();
            let magnitude: f64 = w.iter().zip(&scales).map(|(w, s)| w.norm() * s).sum();
            for _ in 0..len {
                let mut re = 0.0;
                let mut im = 0.0;
                for (k, wk) in w.iter().enumerate() {
                    re += scales[k] * wk.re;
                    if scales[k] == 1.0 {
                        im += wk.im;
                    }
                }
                check_residue(im, magnitude)?;
                taps.push(re);
                for (wk, ak) in w.iter_mut().zip(a) {
                    *wk *= ak;
                }
            }
        }
        _ => unreachable!("readout resolved against the transition type"),
    }
    Ok(Kernel {
        taps,
        feedthrough: readout.d,
        source: format!("kernel(dt={},method={},dim={})", sys.dt, sys.method, sys.dim()),
    })
}

/// Reusable real FFT plans for one padded length.
struct FftPair {
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn realfft::ComplexToReal<f64>>,
}

impl FftPair {
    fn new(n: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        FftPair {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }
}

/// Causal convolution truncated to the input length, plus `D u`.
pub fn convolve(kernel: &Kernel, input: &[f64]) -> Vec<f64> {
    let t = input.len();
    if t == 0 {
        return Vec::new();
    }
    let taps = &kernel.taps[..kernel.taps.len().min(t)];
    let n = (t + taps.len() - 1).next_power_of_two().max(2);
    let fft = FftPair::new(n);

    let mut kbuf = vec![0.0; n];
    kbuf[..taps.len()].copy_from_slice(taps);
    let mut ubuf = vec![0.0; n];
    ubuf[..t].copy_from_slice(input);
    let mut kspec = fft.forward.make_output_vec();
    let mut uspec = fft.forward.make_output_vec();
    fft.forward
        .process(&mut kbuf, &mut kspec)
        .expect("buffer sizes come from the plan");
    fft.forward
        .process(&mut ubuf, &mut uspec)
        .expect("buffer sizes come from the plan");
    for (u, k) in uspec.iter_mut().zip(&kspec) {
        *u *= k;
    }
    // The DC and Nyquist bins of a real signal's spectrum are real.
    uspec[0].im = 0.0;
    if let Some(last) = uspec.last_mut() {
        last.im = 0.0;
    }
    let mut out = vec![0.0; n];
    fft.inverse
        .process(&mut uspec, &mut out)
        .expect("buffer sizes come from the plan");
    let norm = 1.0 / n as f64;
    out.truncate(t);
    for (y, u) in out.iter_mut().zip(input) {
        *y = *y * norm + kernel.feedthrough * u;
    }
    out
}

/// Direct `O(T L)` causal convolution, plus `D u`.
pub fn convolve_direct(kernel: &Kernel, input: &[f64]) -> Vec<f64> {
    (0..input.len())
        .map(|n| {
            let acc: f64 = kernel
                .taps
                .iter()
                .take(n + 1)
                .enumerate()
                .map(|(l, k)| k * input[n - l])
                .sum();
            acc + kernel.feedthrough * input[n]
        })
        .collect()
}

/// Recurrent state, real for dense systems and modal for diagonal ones.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Real(DVector<f64>),
    Modal(Vec<Complex64>),
}

impl State {
    pub fn zeros(sys: &DiscreteSystem) -> Self {
        match &sys.transition {
            Transition::Dense { b, .. } => State::Real(DVector::zeros(b.len())),
            Transition::Diagonal { b, .. } => State::Modal(vec![Complex64::new(0.0, 0.0); b.len()]),
        }
    }

    /// Real state vector; modal states are returned as-is in their real parts.
    pub fn as_real(&self) -> Option<&DVector<f64>> {
        match self {
            State::Real(x) => Some(x),
            State::Modal(_) => None,
        }
    }
}

impl DiscreteSystem {
    /// Number of real regression features per state.
    pub fn feature_dim(&self) -> usize {
        match &self.transition {
            Transition::Dense { b, .. } => b.len(),
            Transition::Diagonal { kinds, half_storage, .. } => {
                let complex = kinds.iter().filter(|k| **k == ModeKind::Complex).count();
                let real = kinds.len() - complex;
                if *half_storage {
                    real + 2 * complex
                } else {
                    real + complex
                }
            }
        }
    }

    /// Real features of a state: raw coordinates, or `(Re, Im)` once per conjugate pair.
    pub fn features_into(&self, state: &State, out: &mut [f64]) {
        match (&self.transition, state) {
            (Transition::Dense { .. }, State::Real(x)) => out.copy_from_slice(x.as_slice()),
            (Transition::Diagonal { kinds, half_storage, .. }, State::Modal(x)) => {
                let mut j = 0;
                let mut k = 0;
                while k < kinds.len() {
                    match kinds[k] {
                        ModeKind::Real => {
                            out[j] = x[k].re;
                            j += 1;
                            k += 1;
                        }
                        ModeKind::Complex => {
                            out[j] = x[k].re;
                            out[j + 1] = x[k].im;
                            j += 2;
                            k += if *half_storage { 1 } else { 2 };
                        }
                    }
                }
            }
            _ => panic!("state type does not match the transition"),
        }
    }

    /// Readout realizing `beta . features + d u`.
    pub fn readout_from_features(&self, beta: &[f64], d: f64) -> Result<ReadoutMap> {
        if beta.len() != self.feature_dim() {
            return Err(Error::Dimension(format!(
                "{} weights for {} features",
                beta.len(),
                self.feature_dim()
            )));
        }
        match &self.transition {
            Transition::Dense { .. } => Ok(ReadoutMap::real(DVector::from_column_slice(beta), d)),
            Transition::Diagonal { kinds, half_storage, .. } => {
                let mut c = Vec::with_capacity(kinds.len());
                let mut j = 0;
                let mut k = 0;
                while k < kinds.len() {
                    match kinds[k] {
                        ModeKind::Real => {
                            c.push(Complex64::new(beta[j], 0.0));
                            j += 1;
                            k += 1;
                        }
                        ModeKind::Complex => {
                            let ck = Complex64::new(beta[j] / 2.0, -beta[j + 1] / 2.0);
                            c.push(ck);
                            if !*half_storage {
                                c.push(ck.conj());
                                k += 1;
                            }
                            j += 2;
                            k += 1;
                        }
                    }
                }
                Ok(ReadoutMap::modal(c, d))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    /// `states[n]` is the state after consuming `input[n]`.
    pub states: Vec<State>,
    pub outputs: Vec<f64>,
}

/// Step `x_n = A_d x_{n-1} + B_d u_n`, `y_n = Re(C x_n) + D u_n`, calling `visit(n, x_n, y_n)`
/// after each step. Only the current state is kept.
pub fn scan_with<F>(
    sys: &DiscreteSystem,
    readout: &ReadoutMap,
    input: &[f64],
    x0: Option<State>,
    mut visit: F,
) -> Result<Vec<f64>>
where
    F: FnMut(usize, &State, f64),
{
    let c = resolve_readout(sys, readout)?;
    let mut state = x0.unwrap_or_else(|| State::zeros(sys));
    let mut outputs = Vec::with_capacity(input.len());
    match (&sys.transition, c) {
        (Transition::Dense { a, b }, ResolvedC::Real(c)) => {
            if !matches!(&state, State::Real(x) if x.len() == b.len()) {
                return Err(Error::Dimension("initial state does not match the system".into()));
            }
            let mut next = DVector::zeros(b.len());
            for (n, &u) in input.iter().enumerate() {
                let State::Real(x) = &mut state else { unreachable!() };
                next.gemv(1.0, a, x, 0.0);
                next.axpy(u, b, 1.0);
                std::mem::swap(x, &mut next);
                let y = c.dot(x) + readout.d * u;
                outputs.push(y);
                visit(n, &state, y);
            }
        }
        (
            Transition::Diagonal {
                a,
                b,
                kinds,
                half_storage,
            },
            ResolvedC::Modal(c),
        ) => {
            if !matches!(&state, State::Modal(x) if x.len() == b.len()) {
                return Err(Error::Dimension("initial state does not match the system".into()));
            }
            let scales: Vec<f64> = (0..c.len()).map(|k| mode_scale(kinds, *half_storage, k)).collect();
            for (n, &u) in input.iter().enumerate() {
                let State::Modal(x) = &mut state else { unreachable!() };
                let mut re = 0.0;
                let mut im = 0.0;
                let mut magnitude = 0.0;
                for k in 0..x.len() {
                    x[k] = a[k] * x[k] + b[k] * u;
                    let term = c[k] * x[k];
                    re += scales[k] * term.re;
                    if scales[k] == 1.0 {
                        im += term.im;
                    }
                    magnitude += scales[k] * term.norm();
                }
                check_residue(im, magnitude)?;
                let y = re + readout.d * u;
                outputs.push(y);
                visit(n, &state, y);
            }
        }
        _ => unreachable!("readout resolved against the transition type"),
    }
    Ok(outputs)
}

/// Full scan keeping every state.
pub fn recurrent_scan(sys: &DiscreteSystem, readout: &ReadoutMap, input: &[f64], x0: Option<State>) -> Result<ScanResult> {
    let mut states = Vec::with_capacity(input.len());
    let outputs = scan_with(sys, readout, input, x0, |_, x, _| states.push(x.clone()))?;
    Ok(ScanResult { states, outputs })
}

/// Output-only scan in constant memory.
pub fn scan_outputs(sys: &DiscreteSystem, readout: &ReadoutMap, input: &[f64]) -> Result<Vec<f64>> {
    scan_with(sys, readout, input, None, |_, _, _| {})
}

/// Online scaled-measure coefficients `dx/dt = -(A/t) x + (B/t) u` over the whole input,
/// with sample `n` held on `[n, n+1)` and a bilinear step at each interval midpoint.
/// Returns the state at `t = input.len()`.
pub fn scaled_history_scan(ssm: &ContinuousSSM, input: &[f64]) -> Result<DVector<f64>> {
    if ssm.measure != Measure::Scaled {
        return Err(Error::InvalidArgument("scaled history scan needs a scaled-measure system".into()));
    }
    let n = ssm.order();
    let id = DMatrix::<f64>::identity(n, n);
    let mut x = DVector::zeros(n);
    for (k, &u) in input.iter().enumerate() {
        let tm = k as f64 + 0.5;
        let lhs = &id + &ssm.a * (0.5 / tm);
        let rhs = (&id - &ssm.a * (0.5 / tm)) * &x + &ssm.b * (u / tm);
        x = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidArgument("singular scaled step".into()))?;
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Age of each grid point in samples before the present.
    pub ages: Vec<f64>,
    pub values: Vec<f64>,
    /// Relative weighted L2 error against the supplied input, if any.
    pub rel_error: Option<f64>,
}

fn check_species_frame(ssm: &ContinuousSSM, frame: &SampledFrame) -> Result<()> {
    if ssm.order() != frame.size() {
        return Err(Error::SpeciesFrameMismatch(format!(
            "system order {} vs frame size {}",
            ssm.order(),
            frame.size()
        )));
    }
    let closed_form = ssm.frame_ref.starts_with("closed-form:");
    let ok = if closed_form {
        frame.kind == FrameKind::LegendreOrthonormal
    } else {
        ssm.frame_ref == frame.id
    };
    if !ok {
        return Err(Error::SpeciesFrameMismatch(format!(
            "system built from '{}', frame is '{}'",
            ssm.frame_ref, frame.id
        )));
    }
    Ok(())
}

/// Synthesize the remembered history `sum_k x_k phi_k(s)` from a state over original
/// coordinates. `horizon` is the window length in samples: the full elapsed time for the
/// scaled measure, the window length for the translated one. `truth` is the input seen so
/// far (its last sample is the most recent).
pub fn reconstruct_signal(
    state: &DVector<f64>,
    ssm: &ContinuousSSM,
    frame: &SampledFrame,
    horizon: f64,
    truth: Option<&[f64]>,
) -> Result<Reconstruction> {
    check_species_frame(ssm, frame)?;
    if state.len() != frame.size() {
        return Err(Error::Dimension(format!(
            "state has {} entries, frame has {}",
            state.len(),
            frame.size()
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::NonpositiveTheta(horizon));
    }
    let values: Vec<f64> = frame.synthesize(state).iter().cloned().collect();
    let ages: Vec<f64> = frame.nodes.iter().map(|s| (1.0 - s) * horizon).collect();
    let rel_error = truth.map(|u| {
        let t = u.len() as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for ((age, v), w) in ages.iter().zip(&values).zip(&frame.weights) {
            let idx = (t - age).floor().clamp(0.0, (u.len().max(1) - 1) as f64) as usize;
            let f = u.get(idx).copied().unwrap_or(0.0);
            num += w * (v - f) * (v - f);
            den += w * f * f;
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    });
    Ok(Reconstruction { ages, values, rel_error })
}

/// Lift a modal state of a reduced system back to original coordinates.
pub fn lift_state(rs: &ReducedSystem, x: &[Complex64]) -> Result<DVector<f64>> {
    if x.len() != rs.stored() {
        return Err(Error::Dimension(format!("state has {} entries, system stores {}", x.len(), rs.stored())));
    }
    let n = rs.v_rows.ncols();
    let mut out = DVector::zeros(n);
    for (k, xk) in x.iter().enumerate() {
        let s = mode_scale(&rs.kinds, rs.half_storage, k);
        for c in 0..n {
            out[c] += s * (rs.v_rows[(k, c)] * xk).re;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{discretize, Method};
    use crate::safari::{hippo_legs_closed_form, make_time_invariant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_system(a: f64, b: f64) -> DiscreteSystem {
        DiscreteSystem {
            transition: Transition::Dense {
                a: DMatrix::from_element(1, 1, a),
                b: DVector::from_element(1, b),
            },
            dt: 1.0,
            method: Method::Zoh,
        }
    }

    fn one() -> ReadoutMap {
        ReadoutMap::real(DVector::from_element(1, 1.0), 0.0)
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn nilpotent_and_geometric_taps() {
        let k = compute_kernel(&scalar_system(0.0, 1.0), &one(), 4).unwrap();
        assert_eq!(k.taps, vec![1.0, 0.0, 0.0, 0.0]);
        let k = compute_kernel(&scalar_system(0.5, 1.0), &one(), 4).unwrap();
        assert_eq!(k.taps, vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn identity_and_shift_kernels() {
        let u = random(37, 1);
        let id = Kernel { taps: vec![1.0], feedthrough: 0.5, source: "id".into() };
        let y = convolve(&id, &u);
        for (a, b) in y.iter().zip(&u) {
            assert!((a - 1.5 * b).abs() < 1e-14);
        }
        let shift = Kernel { taps: vec![0.0, 1.0], feedthrough: 0.0, source: "shift".into() };
        let y = convolve(&shift, &u);
        assert!(y[0].abs() < 1e-15);
        for n in 1..u.len() {
            assert!((y[n] - u[n - 1]).abs() < 1e-14);
        }
    }

    #[test]
    fn fft_matches_direct() {
        let k = Kernel { taps: random(64, 2), feedthrough: 0.3, source: "r".into() };
        let u = random(257, 3);
        let a = convolve(&k, &u);
        let b = convolve_direct(&k, &u);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn long_kernel_is_cut_to_input() {
        let k = Kernel { taps: random(500, 4), feedthrough: 0.0, source: "r".into() };
        let u = random(10, 5);
        let a = convolve(&k, &u);
        let b = convolve_direct(&k, &u);
        assert_eq!(a.len(), 10);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_scan_gives_taps() {
        let ti = make_time_invariant(&hippo_legs_closed_form(6).unwrap(), 50.0).unwrap();
        let sys = discretize(&ti, 1.0, Method::Zoh).unwrap();
        let r = ReadoutMap::real(DVector::from_vec(random(6, 6)), 0.25);
        let k = compute_kernel(&sys, &r, 100).unwrap();
        let mut u = vec![0.0; 100];
        u[0] = 1.0;
        let y = scan_outputs(&sys, &r, &u).unwrap();
        assert!((y[0] - k.taps[0] - 0.25).abs() < 1e-12);
        for l in 1..100 {
            assert!((y[l] - k.taps[l]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_input_zero_everything() {
        let sys = scalar_system(0.9, 1.0);
        let res = recurrent_scan(&sys, &one(), &[0.0; 5], None).unwrap();
        assert!(res.outputs.iter().all(|y| *y == 0.0));
        assert!(res.states.iter().all(|s| s.as_real().unwrap()[0] == 0.0));
    }

    #[test]
    fn feature_roundtrip_for_modes() {
        let a = vec![Complex64::new(0.9, 0.0), Complex64::new(0.5, 0.3), Complex64::new(0.5, -0.3)];
        let b = vec![Complex64::new(1.0, 0.0), Complex64::new(0.2, 0.1), Complex64::new(0.2, -0.1)];
        let sys = DiscreteSystem {
            transition: Transition::Diagonal {
                a,
                b,
                kinds: vec![ModeKind::Real, ModeKind::Complex, ModeKind::Complex],
                half_storage: false,
            },
            dt: 1.0,
            method: Method::Zoh,
        };
        assert_eq!(sys.feature_dim(), 3);
        let beta = [0.7, -1.2, 0.4];
        let r = sys.readout_from_features(&beta, 0.1).unwrap();
        let u = random(30, 7);
        let mut feats = vec![0.0; 3];
        let mut expected = Vec::new();
        let y = scan_with(&sys, &r, &u, None, |n, x, _| {
            sys.features_into(x, &mut feats);
            expected.push(feats.iter().zip(&beta).map(|(f, b)| f * b).sum::<f64>() + 0.1 * u[n]);
        })
        .unwrap();
        for (a, b) in y.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn unpaired_readout_leaves_residue() {
        let sys = DiscreteSystem {
            transition: Transition::Diagonal {
                a: vec![Complex64::new(0.5, 0.3), Complex64::new(0.5, -0.3)],
                b: vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
                kinds: vec![ModeKind::Complex, ModeKind::Complex],
                half_storage: false,
            },
            dt: 1.0,
            method: Method::Zoh,
        };
        let r = ReadoutMap::modal(vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)], 0.0);
        assert!(matches!(compute_kernel(&sys, &r, 3), Err(Error::ImaginaryResidue { .. })));
    }

    #[test]
    fn decay_truncation() {
        let mut k = compute_kernel(&scalar_system(0.1, 1.0), &one(), 40).unwrap();
        k.truncate_decayed(1e-12);
        assert_eq!(k.len(), 13);
    }

    #[test]
    fn constant_history_legs() {
        use crate::frames::{sample_legendre_basis, GridSpec};
        let ssm = hippo_legs_closed_form(8).unwrap();
        let frame = sample_legendre_basis(8, &GridSpec::new(256)).unwrap();
        let u = vec![2.5; 400];
        let x = scaled_history_scan(&ssm, &u).unwrap();
        let rec = reconstruct_signal(&x, &ssm, &frame, 400.0, Some(&u)).unwrap();
        assert!(rec.rel_error.unwrap() < 1e-2);
        let zero = reconstruct_signal(&DVector::zeros(8), &ssm, &frame, 400.0, None).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mismatched_frame_is_rejected() {
        use crate::frames::{sample_legendre_basis, GridSpec};
        let ssm = hippo_legs_closed_form(8).unwrap();
        let frame = sample_legendre_basis(4, &GridSpec::new(64)).unwrap();
        let err = reconstruct_signal(&DVector::zeros(8), &ssm, &frame, 10.0, None);
        assert!(matches!(err, Err(Error::SpeciesFrameMismatch(_))));
    }
}
