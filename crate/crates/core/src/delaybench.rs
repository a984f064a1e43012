//! Delay-reconstruction benchmark: fit the optimal linear readout `(C, D)` of a frozen
//! SSM by least squares and measure how well it recovers `u_{n-L0}` on held-out data.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frames::{GridSpec, WaveletFamily, WaveletFrameSpec};
use crate::io::{fmt_f64, read_signal_file};
use crate::kernel::{scan_with, ReadoutMap, State};
use crate::linalg;
use crate::plot::{LinePlot, Series};
use crate::safari::{
    hippo_legs_closed_form, make_time_invariant, walrus_ssm, ContinuousSSM, Measure, Species,
};
use crate::spectral::{
    compress_conjugates, discretize, discretize_reduced, reduce_ssm, DiscreteSystem, Method,
    ReducedSystem,
};

pub const DEFAULT_LENGTH: usize = 2048;
pub const DEFAULT_SEQUENCES: usize = 32;
pub const DEFAULT_CUTOFF: f64 = 0.03;
pub const DEFAULT_STATE_DIM: usize = 64;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
/// Relative ridge: `scale * trace(Gram) / dim`.
pub const AUTO_RIDGE_SCALE: f64 = 1e-8;
pub const MAX_GRAM_CONDITION: f64 = 1e12;
pub const FILTER_TAPS: usize = 257;
/// Tolerance on per-sequence mean and variance of generated signals.
pub const MOMENT_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum SignalKind {
    WhiteGaussian,
    LowpassGaussian,
    CsvFile(PathBuf),
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalKind::WhiteGaussian => f.write_str("white-gaussian"),
            SignalKind::LowpassGaussian => f.write_str("lowpass-gaussian"),
            SignalKind::CsvFile(_) => f.write_str("csv-file"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub length: usize,
    /// Normalized cutoff in cycles per sample, in (0, 0.5].
    pub cutoff: f64,
    pub num_sequences: usize,
    pub seed: u64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        SignalSpec {
            kind: SignalKind::LowpassGaussian,
            length: DEFAULT_LENGTH,
            cutoff: DEFAULT_CUTOFF,
            num_sequences: DEFAULT_SEQUENCES,
            seed: 0,
        }
    }
}

impl SignalSpec {
    fn validate(&self) -> Result<()> {
        if self.length == 0 || self.num_sequences == 0 {
            return Err(Error::InvalidArgument("signal length and sequence count must be positive".into()));
        }
        if self.kind == SignalKind::LowpassGaussian && !(self.cutoff > 0.0 && self.cutoff <= 0.5) {
            return Err(Error::InvalidArgument(format!("cutoff {} outside (0, 0.5]", self.cutoff)));
        }
        Ok(())
    }
}

/// Hamming-windowed sinc lowpass with unit DC gain.
pub fn lowpass_taps(cutoff: f64, taps: usize) -> Vec<f64> {
    let mid = (taps - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..taps)
        .map(|k| {
            let x = k as f64 - mid;
            let sinc = if x == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * std::f64::consts::PI * cutoff * x).sin() / (std::f64::consts::PI * x)
            };
            let w = if taps > 1 {
                0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / (taps - 1) as f64).cos()
            } else {
                1.0
            };
            sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v /= sum;
    }
    h
}

fn normalize(x: &mut [f64]) -> Result<()> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::InvalidArgument("signal has zero variance".into()));
    }
    let sd = var.sqrt();
    for v in x.iter_mut() {
        *v = (*v - mean) / sd;
    }
    Ok(())
}

fn check_moments(x: &[f64]) -> Result<()> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if mean.abs() > MOMENT_TOL || (var - 1.0).abs() > MOMENT_TOL {
        return Err(Error::InvalidArgument(format!(
            "generated signal has mean {mean} and variance {var}"
        )));
    }
    Ok(())
}

/// Generate (or load and cut) the benchmark sequences.
pub fn generate_signals(spec: &SignalSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let t = spec.length;
    match &spec.kind {
        SignalKind::CsvFile(path) => {
            let data = read_signal_file(path)?;
            let count = (data.len() / t).min(spec.num_sequences);
            if count < 2 {
                return Err(Error::InvalidArgument(format!(
                    "{} samples give fewer than two sequences of length {t}",
                    data.len()
                )));
            }
            Ok(data.chunks_exact(t).take(count).map(|c| c.to_vec()).collect())
        }
        kind => {
            let lowpass = *kind == SignalKind::LowpassGaussian;
            let h = if lowpass { lowpass_taps(spec.cutoff, FILTER_TAPS) } else { vec![1.0] };
            let burn = h.len() - 1;
            (0..spec.num_sequences)
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                    rng.set_stream(i as u64);
                    let raw: Vec<f64> = (0..t + burn).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let mut x: Vec<f64> = (0..t)
                        .map(|n| h.iter().enumerate().map(|(k, hk)| hk * raw[n + burn - k]).sum())
                        .collect();
                    normalize(&mut x)?;
                    check_moments(&x)?;
                    Ok(x)
                })
                .collect()
        }
    }
}

/// Inputs and delayed targets. Steps `n < l0` are excluded from every loss.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub l0: usize,
}

/// `target_n = input_{n - l0}` (zero inside the masked prefix).
pub fn delayed(input: &[f64], l0: usize) -> Vec<f64> {
    (0..input.len())
        .map(|n| if n >= l0 { input[n - l0] } else { 0.0 })
        .collect()
}

fn check_delay(l0: usize, t: usize) -> Result<()> {
    if l0 >= t {
        return Err(Error::DelayExceedsLength { delay: l0, length: t });
    }
    Ok(())
}

pub fn dataset_from_signals(inputs: Vec<Vec<f64>>, l0: usize) -> Result<DelayDataset> {
    for s in &inputs {
        check_delay(l0, s.len())?;
    }
    let targets = inputs.iter().map(|u| delayed(u, l0)).collect();
    Ok(DelayDataset { inputs, targets, l0 })
}

pub fn make_delay_dataset(spec: &SignalSpec, l0: usize) -> Result<DelayDataset> {
    check_delay(l0, spec.length)?;
    dataset_from_signals(generate_signals(spec)?, l0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// `AUTO_RIDGE_SCALE * trace(Gram) / dim`.
    Auto,
    Value(f64),
}

impl fmt::Display for Ridge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ridge::Auto => f.write_str("auto"),
            Ridge::Value(v) => write!(f, "{}", fmt_f64(*v)),
        }
    }
}

impl FromStr for Ridge {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Ridge::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(Ridge::Value(v)),
            _ => Err(Error::InvalidArgument(format!("ridge '{s}' is neither 'auto' nor a nonnegative number"))),
        }
    }
}

/// Least-squares solution over `[features | u]`; `d` is the last coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub beta: Vec<f64>,
    pub d: f64,
    pub ridge: f64,
    pub condition: f64,
    pub train_mse: f64,
}

fn masked_rows(f: &DMatrix<f64>, start: usize) -> nalgebra::DMatrixView<'_, f64> {
    f.rows(start, f.nrows() - start)
}

/// Solve `min sum_masked |[x_n, u_n] . beta - target_n|^2 + ridge |beta|^2` by normal equations.
/// Each design matrix is `T x (p + 1)` with the input in the last column.
pub fn fit_linear(design: &[DMatrix<f64>], targets: &[Vec<f64>], mask_start: usize, ridge: Ridge) -> Result<LinearFit> {
    let p = design
        .first()
        .map(|f| f.ncols())
        .ok_or_else(|| Error::InvalidArgument("no training sequences".into()))?;
    if design.len() != targets.len() {
        return Err(Error::Dimension("one target per sequence is required".into()));
    }
    let mut g = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut count = 0usize;
    for (f, t) in design.iter().zip(targets) {
        if f.ncols() != p || f.nrows() != t.len() {
            return Err(Error::Dimension("design and target lengths differ".into()));
        }
        check_delay(mask_start, t.len())?;
        let fm = masked_rows(f, mask_start);
        let tm = DVector::from_column_slice(&t[mask_start..]);
        g.gemm_tr(1.0, &fm, &fm, 1.0);
        rhs.gemv_tr(1.0, &fm, &tm, 1.0);
        count += tm.len();
    }
    let lambda = match ridge {
        Ridge::Auto => AUTO_RIDGE_SCALE * g.trace() / p as f64,
        Ridge::Value(v) => v,
    };
    for i in 0..p {
        g[(i, i)] += lambda;
    }
    let eig = g.clone().symmetric_eigen().eigenvalues;
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::IllConditionedGram(condition));
    }
    let beta = linalg::solve_spd(&g, &rhs)?;
    let mut sse = 0.0;
    for (f, t) in design.iter().zip(targets) {
        let y = masked_rows(f, mask_start) * &beta;
        sse += y.iter().zip(&t[mask_start..]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    let d = beta[p - 1];
    Ok(LinearFit {
        beta: beta.as_slice()[..p - 1].to_vec(),
        d,
        ridge: lambda,
        condition,
        train_mse: sse / count as f64,
    })
}

/// Masked MSE of a fitted linear readout over a set of design matrices.
pub fn masked_mse(design: &[DMatrix<f64>], targets: &[Vec<f64>], fit: &LinearFit, mask_start: usize) -> f64 {
    let mut beta = fit.beta.clone();
    beta.push(fit.d);
    let beta = DVector::from_vec(beta);
    let mut sse = 0.0;
    let mut count = 0usize;
    for (f, t) in design.iter().zip(targets) {
        let y = masked_rows(f, mask_start) * &beta;
        sse += y.iter().zip(&t[mask_start..]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += t.len() - mask_start;
    }
    sse / count.max(1) as f64
}

/// Design matrix `[features(x_n) | u_n]` along one input sequence.
pub fn state_design(sys: &DiscreteSystem, input: &[f64]) -> Result<DMatrix<f64>> {
    let p = sys.feature_dim();
    let zero = match &sys.transition {
        crate::spectral::Transition::Dense { b, .. } => ReadoutMap::real(DVector::zeros(b.len()), 0.0),
        crate::spectral::Transition::Diagonal { b, .. } => {
            ReadoutMap::modal(vec![Complex64::new(0.0, 0.0); b.len()], 0.0)
        }
    };
    // filled row-wise into a column-major buffer, so build the transpose
    let mut buf = DMatrix::<f64>::zeros(p + 1, input.len());
    let mut row = vec![0.0; p];
    scan_with(sys, &zero, input, None::<State>, |n, x, _| {
        sys.features_into(x, &mut row);
        let mut col = buf.column_mut(n);
        col.rows_mut(0, p).copy_from_slice(&row);
        col[p] = input[n];
    })?;
    Ok(buf.transpose())
}

/// Fit `(C, D)` on the given trajectories and return it as a readout of `sys`.
pub fn fit_readout(
    sys: &DiscreteSystem,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    mask_start: usize,
    ridge: Ridge,
) -> Result<(ReadoutMap, LinearFit)> {
    let design = inputs
        .iter()
        .map(|u| state_design(sys, u))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_linear(&design, targets, mask_start, ridge)?;
    Ok((sys.readout_from_features(&fit.beta, fit.d)?, fit))
}

/// Which discretization knob the sweep value drives. Both give `A_d = exp(-g A)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Timescale `theta = 1 / g` samples with `dt = 1`.
    Theta,
    /// `theta = 1` with step `dt = g`.
    Step,
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMode::Theta => "theta",
            SweepMode::Step => "step",
        })
    }
}

impl FromStr for SweepMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(SweepMode::Theta),
            "step" | "dt" => Ok(SweepMode::Step),
            _ => Err(Error::InvalidArgument(format!("unknown sweep mode '{s}' (expected theta or step)"))),
        }
    }
}

impl SweepMode {
    /// `(theta, dt)` for sweep value `g`.
    pub fn params(self, g: f64) -> (f64, f64) {
        match self {
            SweepMode::Theta => (1.0 / g, 1.0),
            SweepMode::Step => (1.0, g),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoreSpec {
    HippoLegs { n: usize },
    /// Scaled-measure WaLRUS from a redundant wavelet frame on `grid_points` nodes.
    Walrus { frame: WaveletFrameSpec, grid_points: usize },
}

impl CoreSpec {
    /// Default cores with matched state budgets.
    pub fn default_pair(n_eff: usize) -> Result<Vec<CoreSpec>> {
        Ok(vec![
            CoreSpec::HippoLegs { n: n_eff },
            CoreSpec::Walrus {
                frame: WaveletFrameSpec::redundant_with_dim(WaveletFamily::Db2, n_eff)?,
                grid_points: default_walrus_grid(n_eff),
            },
        ])
    }
}

/// Grid size used for the default WaLRUS core of a given span dimension.
pub fn default_walrus_grid(n_eff: usize) -> usize {
    (64 * n_eff).max(1024)
}

#[derive(Debug, Clone)]
pub enum CoreSystem {
    Dense(ContinuousSSM),
    Reduced(ReducedSystem),
}

/// A frozen SSM ready to be discretized at any rate.
#[derive(Debug, Clone)]
pub struct PreparedCore {
    pub label: String,
    pub species: Species,
    pub n_eff: usize,
    pub system: CoreSystem,
}

pub fn prepare_core(spec: &CoreSpec, tol_one: f64) -> Result<PreparedCore> {
    match spec {
        CoreSpec::HippoLegs { n } => {
            let ssm = hippo_legs_closed_form(*n)?;
            Ok(PreparedCore {
                label: Species::HippoLegs.to_string(),
                species: Species::HippoLegs,
                n_eff: *n,
                system: CoreSystem::Dense(ssm),
            })
        }
        CoreSpec::Walrus { frame, grid_points } => {
            let (_, ssm) = walrus_ssm(frame, &GridSpec::new(*grid_points), Measure::Scaled)?;
            let red = reduce_ssm(&ssm, tol_one)?;
            let rs = compress_conjugates(&red.reduced)?;
            log::info!(
                "walrus core: K={} n_eff={} stored={} cond={:.3e}",
                ssm.order(),
                rs.n_eff,
                rs.stored(),
                red.spectrum.condition_estimate
            );
            Ok(PreparedCore {
                label: Species::Walrus.to_string(),
                species: Species::Walrus,
                n_eff: rs.n_eff,
                system: CoreSystem::Reduced(rs),
            })
        }
    }
}

impl PreparedCore {
    pub fn discretize(&self, g: f64, mode: SweepMode, method: Method) -> Result<DiscreteSystem> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::NonpositiveTheta(g));
        }
        let (theta, dt) = mode.params(g);
        match &self.system {
            CoreSystem::Dense(ssm) => discretize(&make_time_invariant(ssm, theta)?, dt, method),
            CoreSystem::Reduced(rs) => discretize_reduced(rs, theta, dt, method),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub ridge: Ridge,
    pub train_fraction: f64,
    pub method: Method,
    pub mode: SweepMode,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            ridge: Ridge::Auto,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            method: Method::Zoh,
            mode: SweepMode::Theta,
        }
    }
}

/// Number of training sequences; at least one sequence is held out.
pub fn train_count(total: usize, fraction: f64) -> Result<usize> {
    if total < 2 {
        return Err(Error::InvalidArgument("at least two sequences are needed for a held-out split".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction {fraction} outside (0, 1)")));
    }
    Ok(((total as f64 * fraction).round() as usize).clamp(1, total - 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayResult {
    pub species: String,
    /// Sweep value `g` (per-sample rate).
    pub theta: f64,
    /// Step passed to the discretizer.
    pub dt: f64,
    pub l0: usize,
    pub mse: f64,
    pub log10_mse: f64,
    pub n_eff: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub train_mse: f64,
    pub readout: ReadoutMap,
}

/// Every `(core, g, l0)` cell. Trajectories are computed once per `(core, g)`.
pub fn sweep_grid(
    cores: &[PreparedCore],
    grid: &[f64],
    l0s: &[usize],
    signals: &[Vec<f64>],
    seed: u64,
    opts: &BenchOptions,
) -> Result<Vec<DelayResult>> {
    let n_train = train_count(signals.len(), opts.train_fraction)?;
    for &l0 in l0s {
        for s in signals {
            check_delay(l0, s.len())?;
        }
    }
    if let Some(first) = cores.first() {
        if cores.iter().any(|c| c.n_eff != first.n_eff) {
            log::warn!("cores have different state budgets");
        }
    }
    let cells: Vec<(usize, f64)> = (0..cores.len())
        .flat_map(|c| grid.iter().map(move |&g| (c, g)))
        .collect();
    let per_cell = cells
        .par_iter()
        .map(|&(c, g)| -> Result<Vec<DelayResult>> {
            let core = &cores[c];
            let sys = core.discretize(g, opts.mode, opts.method)?;
            let design = signals
                .iter()
                .map(|u| state_design(&sys, u))
                .collect::<Result<Vec<_>>>()?;
            let (train, eval) = design.split_at(n_train);
            l0s.iter()
                .map(|&l0| {
                    let targets: Vec<Vec<f64>> = signals.iter().map(|u| delayed(u, l0)).collect();
                    let fit = fit_linear(train, &targets[..n_train], l0, opts.ridge)?;
                    let mse = masked_mse(eval, &targets[n_train..], &fit, l0);
                    Ok(DelayResult {
                        species: core.label.clone(),
                        theta: g,
                        dt: sys.dt,
                        l0,
                        mse,
                        log10_mse: mse.log10(),
                        n_eff: core.n_eff,
                        seed,
                        train_fraction: opts.train_fraction,
                        train_mse: fit.train_mse,
                        readout: sys.readout_from_features(&fit.beta, fit.d)?,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    // reorder to (core, l0, g)
    let mut out = Vec::with_capacity(cells.len() * l0s.len());
    for c in 0..cores.len() {
        for li in 0..l0s.len() {
            for gi in 0..grid.len() {
                out.push(per_cell[c * grid.len() + gi][li].clone());
            }
        }
    }
    Ok(out)
}

/// One cell: build, discretize, scan, fit on the training split, score on the rest.
pub fn eval_delay(core: &PreparedCore, g: f64, spec: &SignalSpec, l0: usize, opts: &BenchOptions) -> Result<DelayResult> {
    let signals = generate_signals(spec)?;
    Ok(sweep_grid(std::slice::from_ref(core), &[g], &[l0], &signals, spec.seed, opts)?.remove(0))
}

/// One result per `(core, g)` at a fixed delay.
pub fn sweep_theta(
    cores: &[PreparedCore],
    grid: &[f64],
    spec: &SignalSpec,
    l0: usize,
    opts: &BenchOptions,
) -> Result<Vec<DelayResult>> {
    let signals = generate_signals(spec)?;
    sweep_grid(cores, grid, &[l0], &signals, spec.seed, opts)
}

/// Best result over `g` for every `(species, l0)` in a grid sweep, in first-seen order.
pub fn best_per_delay(results: &[DelayResult]) -> Vec<DelayResult> {
    let mut best: Vec<DelayResult> = Vec::new();
    for r in results {
        match best.iter_mut().find(|b| b.species == r.species && b.l0 == r.l0) {
            Some(b) if r.mse < b.mse => *b = r.clone(),
            Some(_) => {}
            None => best.push(r.clone()),
        }
    }
    best
}

/// Best `g` per `(species, l0)`, re-optimized in every cell.
pub fn sweep_delay(
    cores: &[PreparedCore],
    grid: &[f64],
    l0s: &[usize],
    spec: &SignalSpec,
    opts: &BenchOptions,
) -> Result<Vec<DelayResult>> {
    let signals = generate_signals(spec)?;
    let all = sweep_grid(cores, grid, l0s, &signals, spec.seed, opts)?;
    let best = best_per_delay(&all);
    for (species, steps, rises) in monotonicity_audit(&best) {
        log::info!("{species}: best mse rises on {rises} of {steps} delay steps");
    }
    Ok(best)
}

/// `(species, steps, non-decreasing steps)` of best mse along increasing delay.
pub fn monotonicity_audit(best: &[DelayResult]) -> Vec<(String, usize, usize)> {
    let mut species: Vec<&str> = Vec::new();
    for r in best {
        if !species.contains(&r.species.as_str()) {
            species.push(&r.species);
        }
    }
    species
        .into_iter()
        .map(|s| {
            let mut rows: Vec<&DelayResult> = best.iter().filter(|r| r.species == s).collect();
            rows.sort_by_key(|r| r.l0);
            let steps = rows.len().saturating_sub(1);
            let rises = rows.windows(2).filter(|w| w[1].mse >= w[0].mse).count();
            (s.to_string(), steps, rises)
        })
        .collect()
}

/// Smallest log-MSE per species, in first-seen order.
pub fn best_by_species(results: &[DelayResult]) -> Vec<DelayResult> {
    let mut best: Vec<DelayResult> = Vec::new();
    for r in results {
        match best.iter_mut().find(|b| b.species == r.species) {
            Some(b) if r.mse < b.mse => *b = r.clone(),
            Some(_) => {}
            None => best.push(r.clone()),
        }
    }
    best
}

/// `best log-MSE(first) - best log-MSE(second)` over a result table.
pub fn log_mse_gap(results: &[DelayResult], first: &str, second: &str) -> Option<f64> {
    let best = best_by_species(results);
    let a = best.iter().find(|r| r.species == first)?;
    let b = best.iter().find(|r| r.species == second)?;
    Some(a.log10_mse - b.log10_mse)
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

pub fn default_theta_grid() -> Vec<f64> {
    log_grid(1e-4, 1e-2, 25)
}

/// Wider grid for the delay sweep: short delays want faster rates than 1e-2.
pub fn default_delay_theta_grid() -> Vec<f64> {
    log_grid(1e-4, 1e-1, 37)
}

pub fn default_delay_grid() -> Vec<usize> {
    (1..=10).map(|k| 50 * k).collect()
}

pub const RESULTS_HEADER: &str = "species,theta,dt,L0,mse,log10_mse,n_eff,seed,train_fraction";

pub fn write_results_csv<W: Write>(mut w: W, results: &[DelayResult]) -> Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.species,
            fmt_f64(r.theta),
            fmt_f64(r.dt),
            r.l0,
            fmt_f64(r.mse),
            fmt_f64(r.log10_mse),
            r.n_eff,
            r.seed,
            fmt_f64(r.train_fraction)
        )?;
    }
    Ok(())
}

fn series_by_species(results: &[DelayResult], x: impl Fn(&DelayResult) -> f64) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for r in results {
        let p = (x(r), r.log10_mse);
        match out.iter_mut().find(|s| s.name == r.species) {
            Some(s) => s.points.push(p),
            None => out.push(Series {
                name: r.species.clone(),
                points: vec![p],
            }),
        }
    }
    out
}

/// Log-MSE against the sweep value.
pub fn theta_plot(results: &[DelayResult]) -> LinePlot {
    let l0 = results.first().map_or(0, |r| r.l0);
    LinePlot {
        title: format!("delay reconstruction, L0 = {l0}"),
        x_label: "theta (per-sample rate)".into(),
        y_label: "log10 MSE".into(),
        log_x: true,
        series: series_by_species(results, |r| r.theta),
    }
}

/// Best log-MSE against the delay.
pub fn delay_plot(best: &[DelayResult]) -> LinePlot {
    LinePlot {
        title: "delay reconstruction with optimal theta".into(),
        x_label: "delay L0 (samples)".into(),
        y_label: "log10 MSE".into(),
        log_x: false,
        series: series_by_species(best, |r| r.l0 as f64),
    }
}
