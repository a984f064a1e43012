//! Run configuration: built-in defaults, overridden by a TOML file, overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use walrus_ssm::delaybench::{
    self, BenchOptions, CoreSpec, Ridge, SignalKind, SignalSpec, SweepMode,
};
use walrus_ssm::frames::{Boundary, GridScheme, GridSpec, WaveletFamily, WaveletFrameSpec};
use walrus_ssm::safari::Measure;
use walrus_ssm::spectral::{Method, DEFAULT_TOL_ONE};

/// File written next to every command's outputs.
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub model: ModelSection,
    pub frame: FrameSection,
    pub spectral: SpectralSection,
    pub kernel: KernelSection,
    pub signal: SignalSection,
    pub delay: DelaySection,
    pub verify: VerifySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            output_dir: PathBuf::from("walrus-out"),
            seed: 0,
        }
    }
}

/// System used by `build`, `eigs` and `kernel`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// hippo-legs | hippo-legt | hippo-via-frame | walrus
    pub species: String,
    /// scaled | translated (frame-derived species only)
    pub measure: String,
    /// Order of the Legendre species.
    pub n: usize,
    pub grid_points: usize,
    pub grid_scheme: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            species: "walrus".into(),
            measure: "scaled".into(),
            n: 8,
            grid_points: 4096,
            grid_scheme: GridScheme::CorrectedMidpoint.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSection {
    pub family: String,
    pub coarsest_scale: u32,
    pub finest_scale: u32,
    pub scaling_functions: bool,
    pub boundary: String,
    pub oversampling: u32,
}

impl Default for FrameSection {
    fn default() -> Self {
        let d = WaveletFrameSpec::default();
        FrameSection {
            family: d.family.to_string(),
            coarsest_scale: d.coarsest_scale,
            finest_scale: d.finest_scale,
            scaling_functions: d.include_scaling_functions,
            boundary: d.boundary.to_string(),
            oversampling: d.oversampling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSection {
    pub tol_one: f64,
    /// zoh | bilinear
    pub discretization: String,
}

impl Default for SpectralSection {
    fn default() -> Self {
        SpectralSection {
            tol_one: DEFAULT_TOL_ONE,
            discretization: Method::Zoh.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    /// Per-sample rate: the system runs with timescale `1 / theta` samples.
    pub theta: f64,
    pub length: usize,
    /// Optional input signal (CSV or SSMK) to convolve with the kernel.
    pub input: Option<PathBuf>,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            theta: 0.01,
            length: 1024,
            input: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    /// white-gaussian | lowpass-gaussian | csv-file
    pub kind: String,
    pub path: Option<PathBuf>,
    pub length: usize,
    pub cutoff: f64,
    pub sequences: usize,
}

impl Default for SignalSection {
    fn default() -> Self {
        let d = SignalSpec::default();
        SignalSection {
            kind: d.kind.to_string(),
            path: None,
            length: d.length,
            cutoff: d.cutoff,
            sequences: d.num_sequences,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelaySection {
    /// theta | delay | both
    pub sweeps: String,
    /// Delay of the theta sweep.
    pub l0: usize,
    pub l0_grid: Vec<usize>,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_points: usize,
    /// Theta grid searched in every cell of the delay sweep.
    pub delay_theta_min: f64,
    pub delay_theta_max: f64,
    pub delay_theta_points: usize,
    /// State budget shared by both species.
    pub n_eff: usize,
    /// Wavelet family of the WaLRUS core.
    pub family: String,
    pub grid_points: usize,
    /// "auto" or a nonnegative number.
    pub ridge: String,
    pub train_fraction: f64,
    /// theta | step
    pub sweep_mode: String,
    pub svg: bool,
}

impl Default for DelaySection {
    fn default() -> Self {
        let n_eff = delaybench::DEFAULT_STATE_DIM;
        DelaySection {
            sweeps: "both".into(),
            l0: 300,
            l0_grid: delaybench::default_delay_grid(),
            theta_min: 1e-4,
            theta_max: 1e-2,
            theta_points: 25,
            delay_theta_min: 1e-4,
            delay_theta_max: 1e-1,
            delay_theta_points: 37,
            n_eff,
            family: WaveletFamily::Db2.to_string(),
            grid_points: delaybench::default_walrus_grid(n_eff),
            ridge: "auto".into(),
            train_fraction: delaybench::DEFAULT_TRAIN_FRACTION,
            sweep_mode: SweepMode::Theta.to_string(),
            svg: true,
        }
    }
}

/// Sizes used by the constructor-oracle checks of `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub n: usize,
    pub grid_points: usize,
    pub oracle_tol: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            n: 16,
            grid_points: 4096,
            oracle_tol: 1e-4,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid configuration")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(RESOLVED_CONFIG);
        std::fs::write(&path, self.to_toml()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Species accepted by the model commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    HippoLegs,
    HippoLegt,
    /// Legendre frame through the generic constructor, checked against the closed form.
    HippoViaFrame,
    Walrus,
}

pub const MODEL_KINDS: &str = "hippo-legs, hippo-legt, hippo-via-frame, walrus";

impl std::str::FromStr for ModelKind {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hippo-legs" => ModelKind::HippoLegs,
            "hippo-legt" => ModelKind::HippoLegt,
            "hippo-via-frame" => ModelKind::HippoViaFrame,
            "walrus" => ModelKind::Walrus,
            _ => bail!("unknown species '{s}' (valid options: {MODEL_KINDS})"),
        })
    }
}

/// Typed model settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub measure: Measure,
    pub n: usize,
    pub grid: GridSpec,
    pub frame: WaveletFrameSpec,
    pub tol_one: f64,
    pub method: Method,
}

fn parse<T: std::str::FromStr>(what: &str, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| anyhow::anyhow!("{what}: {e}"))
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("{what} must be positive and finite, got {v}");
    }
    Ok(())
}

impl RunConfig {
    pub fn model(&self) -> Result<Model> {
        let m = &self.model;
        let f = &self.frame;
        let kind: ModelKind = m.species.parse()?;
        if m.n == 0 {
            bail!("model.n must be at least 1");
        }
        check_positive("spectral.tol_one", self.spectral.tol_one)?;
        Ok(Model {
            kind,
            measure: parse("model.measure", &m.measure)?,
            n: m.n,
            grid: GridSpec::with_scheme(m.grid_points, parse("model.grid_scheme", &m.grid_scheme)?),
            frame: WaveletFrameSpec {
                family: parse::<WaveletFamily>("frame.family", &f.family)?,
                coarsest_scale: f.coarsest_scale,
                finest_scale: f.finest_scale,
                include_scaling_functions: f.scaling_functions,
                boundary: parse::<Boundary>("frame.boundary", &f.boundary)?,
                oversampling: f.oversampling,
            },
            tol_one: self.spectral.tol_one,
            method: parse("spectral.discretization", &self.spectral.discretization)?,
        })
    }

    pub fn signal_spec(&self) -> Result<SignalSpec> {
        let s = &self.signal;
        let kind = match s.kind.as_str() {
            "white-gaussian" => SignalKind::WhiteGaussian,
            "lowpass-gaussian" => SignalKind::LowpassGaussian,
            "csv-file" => SignalKind::CsvFile(
                s.path
                    .clone()
                    .context("signal.kind = csv-file needs signal.path")?,
            ),
            other => bail!(
                "unknown signal kind '{other}' (valid options: white-gaussian, lowpass-gaussian, csv-file)"
            ),
        };
        Ok(SignalSpec {
            kind,
            length: s.length,
            cutoff: s.cutoff,
            num_sequences: s.sequences,
            seed: self.run.seed,
        })
    }

    pub fn bench_options(&self) -> Result<BenchOptions> {
        let d = &self.delay;
        Ok(BenchOptions {
            ridge: parse::<Ridge>("delay.ridge", &d.ridge)?,
            train_fraction: d.train_fraction,
            method: parse("spectral.discretization", &self.spectral.discretization)?,
            mode: parse::<SweepMode>("delay.sweep_mode", &d.sweep_mode)?,
        })
    }

    pub fn bench_cores(&self) -> Result<Vec<CoreSpec>> {
        let d = &self.delay;
        let family: WaveletFamily = parse("delay.family", &d.family)?;
        Ok(vec![
            CoreSpec::HippoLegs { n: d.n_eff },
            CoreSpec::Walrus {
                frame: WaveletFrameSpec::redundant_with_dim(family, d.n_eff)?,
                grid_points: d.grid_points,
            },
        ])
    }

    pub fn theta_grid(&self) -> Result<Vec<f64>> {
        let d = &self.delay;
        grid(d.theta_min, d.theta_max, d.theta_points)
    }

    pub fn delay_theta_grid(&self) -> Result<Vec<f64>> {
        let d = &self.delay;
        grid(d.delay_theta_min, d.delay_theta_max, d.delay_theta_points)
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    check_positive("theta grid bound", lo)?;
    check_positive("theta grid bound", hi)?;
    if n == 0 || hi < lo {
        bail!("theta grid needs at least one point and min <= max");
    }
    Ok(delaybench::log_grid(lo, hi, n))
}
