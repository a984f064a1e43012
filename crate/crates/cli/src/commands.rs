//! The five subcommands. Each writes its files into the configured output directory
//! together with the resolved configuration.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use walrus_ssm::delaybench::{
    self, best_by_species, best_per_delay, generate_signals, log_mse_gap, prepare_core, sweep_grid,
    write_results_csv, DelayResult,
};
use walrus_ssm::frames::{sample_legendre_basis, GridSpec, SampledFrame, WaveletFamily, WaveletFrameSpec};
use walrus_ssm::io;
use walrus_ssm::kernel::{compute_kernel, convolve, scan_outputs, Kernel, ReadoutMap};
use walrus_ssm::safari::{
    derive_scaled_ssm, derive_translated_ssm, hippo_legs_closed_form, hippo_legt_closed_form,
    make_time_invariant, walrus_ssm, ContinuousSSM, Measure,
};
use walrus_ssm::spectral::{
    compress_conjugates, discretize, discretize_reduced, eigendecompose_ssm, effective_rank_split,
    reduce_ssm, truncate_system, DiscreteSystem, Method, ReducedSystem, Transition, CONTROL_TOL,
};

use crate::config::{Model, ModelKind, RunConfig};

/// `println!` that ignores a closed stdout (e.g. when piped into `head`).
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// Headline log-MSE gap the benchmark is compared against.
pub const REFERENCE_GAP: f64 = 0.725;

fn prepare_output(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.run.output_dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    cfg.write_resolved(&dir)?;
    Ok(dir)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// A model and, for frame-derived species, the frame it came from.
pub struct BuiltModel {
    pub ssm: ContinuousSSM,
    pub frame: Option<SampledFrame>,
    /// Max-abs distance to the closed form (frame-derived Legendre only).
    pub oracle_error: Option<f64>,
}

fn max_abs_diff(a: &ContinuousSSM, b: &ContinuousSSM) -> f64 {
    (&a.a - &b.a).abs().max().max((&a.b - &b.b).abs().max())
}

pub fn build_model(model: &Model) -> Result<BuiltModel> {
    Ok(match model.kind {
        ModelKind::HippoLegs => BuiltModel {
            ssm: hippo_legs_closed_form(model.n)?,
            frame: None,
            oracle_error: None,
        },
        ModelKind::HippoLegt => BuiltModel {
            ssm: hippo_legt_closed_form(model.n)?,
            frame: None,
            oracle_error: None,
        },
        ModelKind::HippoViaFrame => {
            let frame = sample_legendre_basis(model.n, &model.grid)?;
            let (ssm, oracle) = match model.measure {
                Measure::Scaled => (derive_scaled_ssm(&frame)?, hippo_legs_closed_form(model.n)?),
                Measure::Translated => (derive_translated_ssm(&frame)?, hippo_legt_closed_form(model.n)?),
            };
            let err = max_abs_diff(&ssm, &oracle);
            BuiltModel {
                ssm,
                frame: Some(frame),
                oracle_error: Some(err),
            }
        }
        ModelKind::Walrus => {
            let (frame, ssm) = walrus_ssm(&model.frame, &model.grid, model.measure)?;
            BuiltModel {
                ssm,
                frame: Some(frame),
                oracle_error: None,
            }
        }
    })
}

pub fn cmd_build(cfg: &RunConfig, export_frame: bool) -> Result<()> {
    let model = cfg.model()?;
    let built = build_model(&model)?;
    let dir = prepare_output(cfg)?;
    let ssm = &built.ssm;
    let header = format!(
        "species={} measure={} n={} source={}",
        ssm.species,
        ssm.measure,
        ssm.order(),
        ssm.frame_ref
    );
    io::write_matrix_csv(create(&dir, "A.csv")?, &header, &ssm.a)?;
    io::write_vector_csv(create(&dir, "B.csv")?, &header, &ssm.b)?;

    let mut meta = create(&dir, "provenance.txt")?;
    writeln!(meta, "species = {}", ssm.species)?;
    writeln!(meta, "measure = {}", ssm.measure)?;
    writeln!(meta, "order = {}", ssm.order())?;
    writeln!(meta, "source = {}", ssm.frame_ref)?;
    if let Some(f) = &built.frame {
        writeln!(meta, "frame_kind = {}", f.kind)?;
        writeln!(meta, "frame_size = {}", f.size())?;
        writeln!(meta, "effective_dim = {}", f.effective_dim)?;
        writeln!(meta, "redundancy = {}", io::fmt_f64(f.redundancy))?;
        writeln!(meta, "grid_points = {}", f.num_points())?;
        writeln!(meta, "grid_scheme = {}", f.scheme)?;
        if export_frame {
            io::write_frame_csv(create(&dir, "frame.csv")?, f)?;
        }
    }
    if let Some(err) = built.oracle_error {
        writeln!(meta, "oracle_max_abs_error = {}", io::fmt_f64(err))?;
        say!("constructor vs closed form: max-abs error {}", io::fmt_f64(err));
    }
    meta.flush()?;
    say!(
        "wrote {}x{} A and B for {} to {}",
        ssm.order(),
        ssm.order(),
        ssm.species,
        dir.display()
    );
    Ok(())
}

/// Counts reported by `eigs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Audit {
    pub order: usize,
    pub near_one: usize,
    pub unit: usize,
    pub n_eff: usize,
    pub expected_unit: Option<usize>,
}

pub fn cmd_eigs(cfg: &RunConfig) -> Result<Audit> {
    let model = cfg.model()?;
    let built = build_model(&model)?;
    let ssm = &built.ssm;
    let tol = model.tol_one;
    let spec = eigendecompose_ssm(ssm, tol)?;
    let partition = effective_rank_split(&spec, tol);
    let dir = prepare_output(cfg)?;
    io::write_spectrum_csv(create(&dir, "spectrum.csv")?, &spec, &partition)?;

    let expected_unit = built.frame.as_ref().map(|f| f.size() - f.effective_dim);
    let audit = Audit {
        order: ssm.order(),
        near_one: spec.count_near_one(tol),
        unit: partition.unit.len(),
        n_eff: partition.n_eff,
        expected_unit,
    };
    let truncation = truncate_system(ssm, &spec, &partition);
    let mut out = create(&dir, "audit.txt")?;
    let mut line = |s: String| -> Result<()> {
        say!("{s}");
        writeln!(out, "{s}")?;
        Ok(())
    };
    line(format!("species = {}", ssm.species))?;
    line(format!("order = {}", audit.order))?;
    line(format!("tol_one = {}", io::fmt_f64(tol)))?;
    line(format!("control_tol = {}", io::fmt_f64(CONTROL_TOL)))?;
    line(format!("eigenvalues_near_one = {}", audit.near_one))?;
    line(format!("unit_eigenvalues = {}", audit.unit))?;
    line(format!("n_eff = {}", audit.n_eff))?;
    if let Some(e) = expected_unit {
        line(format!("expected_unit = {e}"))?;
    }
    line(format!("condition_estimate = {}", io::fmt_f64(spec.condition_estimate)))?;
    line(format!("residual = {}", io::fmt_f64(spec.residual)))?;
    match truncation {
        Ok(_) => line("truncation = consistent".into())?,
        Err(e) => line(format!("truncation = inconsistent ({e})"))?,
    }
    if let Some(e) = expected_unit {
        if audit.unit != e {
            let msg = format!(
                "warning: found {} unit eigenvalues at tol_one {}, expected {} (frame size minus span dimension)",
                audit.unit,
                io::fmt_f64(tol),
                e
            );
            eprintln!("{msg}");
            writeln!(out, "# {msg}")?;
        }
    }
    out.flush()?;
    Ok(audit)
}

/// Standard normal readout over original coordinates.
pub fn random_readout(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
}

/// Discrete system for `ssm` at per-sample rate `g`: reduced and diagonal when the
/// spectrum has unit modes, dense otherwise.
pub fn discretize_model(
    ssm: &ContinuousSSM,
    g: f64,
    method: Method,
    tol_one: f64,
    reduce: bool,
) -> Result<(DiscreteSystem, Option<ReducedSystem>)> {
    if !(g > 0.0 && g.is_finite()) {
        bail!("theta must be positive, got {g}");
    }
    if reduce {
        let rs = compress_conjugates(&reduce_ssm(ssm, tol_one)?.reduced)?;
        let sys = discretize_reduced(&rs, 1.0 / g, 1.0, method)?;
        Ok((sys, Some(rs)))
    } else {
        let sys = discretize(&make_time_invariant(ssm, 1.0 / g)?, 1.0, method)?;
        Ok((sys, None))
    }
}

pub fn cmd_kernel(cfg: &RunConfig) -> Result<Kernel> {
    let model = cfg.model()?;
    let built = build_model(&model)?;
    let ssm = &built.ssm;
    let k = &cfg.kernel;
    if k.length == 0 {
        bail!("kernel.length must be at least 1");
    }
    let reduce = model.kind == ModelKind::Walrus;
    let (sys, rs) = discretize_model(ssm, k.theta, model.method, model.tol_one, reduce)?;
    let c = random_readout(ssm.order(), cfg.run.seed);
    let readout = match &rs {
        Some(rs) => ReadoutMap::for_reduced(rs, &c, 0.0)?,
        None => ReadoutMap::real(c, 0.0),
    };
    let mut kernel = compute_kernel(&sys, &readout, k.length)?;
    kernel.source = format!("{} theta={} dim={}", ssm.frame_ref, io::fmt_f64(k.theta), sys.dim());
    let input = match &k.input {
        Some(p) => Some(io::read_signal_file(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let dir = prepare_output(cfg)?;
    io::write_kernel_csv(create(&dir, "kernel.csv")?, &kernel)?;
    if let Some(u) = input {
        let y = convolve(&kernel, &u);
        io::write_signal_csv(create(&dir, "output.csv")?, &y)?;
        say!("convolved {} samples", u.len());
    }
    say!(
        "kernel of {} taps from a {}-state {} system",
        kernel.len(),
        sys.dim(),
        match sys.transition {
            Transition::Dense { .. } => "dense",
            Transition::Diagonal { .. } => "diagonal",
        }
    );
    Ok(kernel)
}

#[derive(Debug, Clone)]
pub struct DelaySummary {
    pub theta_sweep: Vec<DelayResult>,
    pub delay_sweep: Vec<DelayResult>,
    pub gap: Option<f64>,
}

pub fn cmd_delay(cfg: &RunConfig) -> Result<DelaySummary> {
    let d = &cfg.delay;
    let (run_theta, run_delay) = match d.sweeps.as_str() {
        "theta" => (true, false),
        "delay" => (false, true),
        "both" => (true, true),
        other => bail!("unknown delay.sweeps '{other}' (valid options: theta, delay, both)"),
    };
    let spec = cfg.signal_spec()?;
    let opts = cfg.bench_options()?;
    let theta_grid = cfg.theta_grid()?;
    let delay_grid = cfg.delay_theta_grid()?;
    if run_delay && d.l0_grid.is_empty() {
        bail!("delay.l0_grid is empty");
    }
    let cores = cfg
        .bench_cores()?
        .iter()
        .map(|c| prepare_core(c, cfg.spectral.tol_one))
        .collect::<walrus_ssm::Result<Vec<_>>>()?;
    let signals = generate_signals(&spec)?;
    let dir = prepare_output(cfg)?;
    let hippo = cores[0].label.clone();
    let walrus = cores[1].label.clone();

    let mut summary = DelaySummary {
        theta_sweep: Vec::new(),
        delay_sweep: Vec::new(),
        gap: None,
    };
    let mut report = create(&dir, "summary.txt")?;
    if run_theta {
        let rows = sweep_grid(&cores, &theta_grid, &[d.l0], &signals, spec.seed, &opts)?;
        write_results_csv(create(&dir, "theta_sweep.csv")?, &rows)?;
        if d.svg {
            fs::write(dir.join("theta_sweep.svg"), delaybench::theta_plot(&rows).to_svg())?;
        }
        for b in best_by_species(&rows) {
            let s = format!(
                "best {} at L0={}: theta={} log10_mse={} mse={}",
                b.species,
                b.l0,
                io::fmt_f64(b.theta),
                io::fmt_f64(b.log10_mse),
                io::fmt_f64(b.mse)
            );
            say!("{s}");
            writeln!(report, "{s}")?;
        }
        summary.gap = log_mse_gap(&rows, &hippo, &walrus);
        if let Some(g) = summary.gap {
            let s = format!(
                "log-MSE gap ({hippo} - {walrus}) at L0={}: {:.4} (reference {REFERENCE_GAP})",
                d.l0, g
            );
            say!("{s}");
            writeln!(report, "{s}")?;
        }
        summary.theta_sweep = rows;
    }
    if run_delay {
        let rows = sweep_grid(&cores, &delay_grid, &d.l0_grid, &signals, spec.seed, &opts)?;
        let best = best_per_delay(&rows);
        write_results_csv(create(&dir, "delay_sweep.csv")?, &best)?;
        if d.svg {
            fs::write(dir.join("delay_sweep.svg"), delaybench::delay_plot(&best).to_svg())?;
        }
        for &l0 in &d.l0_grid {
            let pick = |sp: &str| best.iter().find(|r| r.l0 == l0 && r.species == sp).map(|r| r.log10_mse);
            if let (Some(h), Some(w)) = (pick(&hippo), pick(&walrus)) {
                let s = format!("L0={l0}: {hippo} {h:.4} {walrus} {w:.4}");
                say!("{s}");
                writeln!(report, "{s}")?;
            }
        }
        for (sp, steps, rises) in delaybench::monotonicity_audit(&best) {
            let s = format!("monotonicity {sp}: best mse non-decreasing on {rises} of {steps} steps");
            say!("{s}");
            writeln!(report, "{s}")?;
        }
        summary.delay_sweep = best;
    }
    report.flush()?;
    Ok(summary)
}

/// Deliberate defects for exercising `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Flip the sign of one constructor entry.
    SignFlip,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            passed: value < limit,
        }
    }

    fn equal(name: &str, value: usize, expected: usize) -> Self {
        Check {
            name: name.into(),
            value: value as f64,
            limit: expected as f64,
            passed: value == expected,
        }
    }

    fn failed(name: &str, err: impl std::fmt::Display) -> Self {
        log::error!("{name}: {err}");
        Check {
            name: name.into(),
            value: f64::NAN,
            limit: f64::NAN,
            passed: false,
        }
    }
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle_check(name: &str, n: usize, m: usize, measure: Measure, fault: Option<Fault>, tol: f64) -> Check {
    let run = || -> walrus_ssm::Result<f64> {
        let frame = sample_legendre_basis(n, &GridSpec::new(m))?;
        let (mut ssm, oracle) = match measure {
            Measure::Scaled => (derive_scaled_ssm(&frame)?, hippo_legs_closed_form(n)?),
            Measure::Translated => (derive_translated_ssm(&frame)?, hippo_legt_closed_form(n)?),
        };
        if fault == Some(Fault::SignFlip) {
            let (r, c) = if n > 1 { (1, 0) } else { (0, 0) };
            ssm.a[(r, c)] = -ssm.a[(r, c)];
        }
        Ok(max_abs_diff(&ssm, &oracle))
    };
    match run() {
        Ok(e) => Check::below(name, e, tol),
        Err(e) => Check::failed(name, e),
    }
}

fn impulse_response(sys: &DiscreteSystem, readout: &ReadoutMap, len: usize) -> walrus_ssm::Result<Vec<f64>> {
    let mut u = vec![0.0; len];
    u[0] = 1.0;
    scan_outputs(sys, readout, &u)
}

/// Unit-eigenvalue count, truncation exactness, conjugate compression and Hadamard fusion
/// on the default redundant Haar frame.
fn walrus_checks(seed: u64) -> Vec<Check> {
    let frame_spec = WaveletFrameSpec::redundant(WaveletFamily::Haar, 2);
    let setup = || -> walrus_ssm::Result<_> {
        let (frame, ssm) = walrus_ssm(&frame_spec, &GridSpec::new(4096), Measure::Scaled)?;
        let red = reduce_ssm(&ssm, walrus_ssm::spectral::DEFAULT_TOL_ONE)?;
        Ok((frame, ssm, red))
    };
    let (frame, ssm, red) = match setup() {
        Ok(v) => v,
        Err(e) => return vec![Check::failed("walrus-setup", e)],
    };
    let mut checks = vec![Check::equal(
        "unit-eigenvalue-count",
        red.partition.unit.len(),
        frame.size() - frame.effective_dim,
    )];
    let g = 0.01;
    let len = 1024;
    let c = random_readout(ssm.order(), seed);
    let run = || -> walrus_ssm::Result<(f64, f64, f64)> {
        let dense = discretize(&make_time_invariant(&ssm, 1.0 / g)?, 1.0, Method::Zoh)?;
        let full = compute_kernel(&dense, &ReadoutMap::real(c.clone(), 0.0), len)?;
        let reduced = discretize_reduced(&red.reduced, 1.0 / g, 1.0, Method::Zoh)?;
        let kr = compute_kernel(&reduced, &ReadoutMap::for_reduced(&red.reduced, &c, 0.0)?, len)?;
        let rs_half = compress_conjugates(&red.reduced)?;
        let half = discretize_reduced(&rs_half, 1.0 / g, 1.0, Method::Zoh)?;
        let kh = compute_kernel(&half, &ReadoutMap::for_reduced(&rs_half, &c, 0.0)?, len)?;
        // (B, C) -> (1, B o C)
        let fused = match &half.transition {
            Transition::Diagonal { a, b, kinds, half_storage } => {
                let cm = rs_half.reduce_readout(&c)?;
                let sys = DiscreteSystem {
                    transition: Transition::Diagonal {
                        a: a.clone(),
                        b: vec![Complex64::new(1.0, 0.0); b.len()],
                        kinds: kinds.clone(),
                        half_storage: *half_storage,
                    },
                    dt: half.dt,
                    method: half.method,
                };
                let bc: Vec<Complex64> = b.iter().zip(&cm).map(|(b, c)| b * c).collect();
                compute_kernel(&sys, &ReadoutMap::modal(bc, 0.0), len)?
            }
            Transition::Dense { .. } => unreachable!("reduced systems are diagonal"),
        };
        Ok((
            max_abs(&kr.taps, &full.taps),
            max_abs(&kh.taps, &kr.taps),
            max_abs(&fused.taps, &kh.taps),
        ))
    };
    match run() {
        Ok((trunc, comp, fuse)) => {
            checks.push(Check::below("truncated-kernel", trunc, 1e-6));
            checks.push(Check::below("conjugate-compression", comp, 1e-12));
            checks.push(Check::below("hadamard-fusion", fuse, 1e-12));
        }
        Err(e) => checks.push(Check::failed("walrus-kernels", e)),
    }
    checks
}

fn path_checks(seed: u64) -> Vec<Check> {
    let run = || -> walrus_ssm::Result<(f64, f64)> {
        let t = 4096;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..t).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ssm = hippo_legs_closed_form(16)?;
        let sys = discretize(&make_time_invariant(&ssm, 200.0)?, 1.0, Method::Zoh)?;
        let r = ReadoutMap::real(random_readout(16, seed), 0.5);
        let k = compute_kernel(&sys, &r, t)?;
        let scan = scan_outputs(&sys, &r, &u)?;
        let conv = convolve(&k, &u);
        let imp = impulse_response(&sys, &r, 256)?;
        let mut taps = k.taps[..256].to_vec();
        taps[0] += r.d;
        Ok((rel_l2(&scan, &conv), max_abs(&imp, &taps)))
    };
    match run() {
        Ok((path, imp)) => vec![
            Check::below("scan-vs-convolution", path, 1e-8),
            Check::below("impulse-response", imp, 1e-10),
        ],
        Err(e) => vec![Check::failed("path-equivalence", e)],
    }
}

pub fn run_checks(cfg: &RunConfig, fault: Option<Fault>) -> Vec<Check> {
    let v = &cfg.verify;
    let mut checks = vec![
        oracle_check("oracle-legs", v.n, v.grid_points, Measure::Scaled, fault, v.oracle_tol),
        oracle_check("oracle-legt", v.n, v.grid_points, Measure::Translated, None, v.oracle_tol),
    ];
    checks.extend(walrus_checks(cfg.run.seed));
    checks.extend(path_checks(cfg.run.seed));
    checks
}

/// Returns whether every check passed.
pub fn cmd_verify(cfg: &RunConfig, fault: Option<Fault>) -> Result<bool> {
    let checks = run_checks(cfg, fault);
    let dir = prepare_output(cfg)?;
    let mut out = create(&dir, "verify.txt")?;
    for c in &checks {
        let s = format!(
            "{} {}: value {} limit {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            io::fmt_f64(c.value),
            io::fmt_f64(c.limit)
        );
        say!("{s}");
        writeln!(out, "{s}")?;
    }
    out.flush()?;
    Ok(checks.iter().all(|c| c.passed))
}
