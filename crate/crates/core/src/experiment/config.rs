use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::SmallCase;
use crate::cavity::CavityConfig;
use crate::drivers::{
    instantaneous_spring_ok, GwSpringDriver, LengthDriver, SampledDriver, SampledSeries, SinusoidDriver,
    SpringParams, StaticDriver, StrainWaveform,
};
use crate::error::{Error, Result};
use crate::farming::{InitialFieldSpec, DEFAULT_MAX_CYCLES, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ValleySweep,
    Vibration,
    FreqResponse,
    Gw,
    Audit,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ValleySweep => "valley_sweep",
            ExperimentKind::Vibration => "vibration",
            ExperimentKind::FreqResponse => "freq_response",
            ExperimentKind::Gw => "gw",
            ExperimentKind::Audit => "audit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointSettings {
    pub tolerance: f64,
    pub max_cycles: usize,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        Self { tolerance: DEFAULT_TOLERANCE, max_cycles: DEFAULT_MAX_CYCLES }
    }
}

/// Strain history. Frequencies are in units of the fundamental `ω1 = π/L0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WaveformSpec {
    Zero,
    Constant { h: f64 },
    /// `h0 sin(ω t)`; `omega_over_omega1` defaults to the spring frequency.
    Sine { h0: f64, omega_over_omega1: Option<f64> },
    /// Two-column CSV `(t, h)`.
    Sampled { path: PathBuf },
}

/// Cavity length history. Lengths are in units of `L0`, frequencies in units
/// of `ω1 = π/L0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriverSpec {
    #[default]
    Static,
    Sinusoid {
        amplitude_over_l0: f64,
        gamma_over_omega1: f64,
    },
    GwSpring {
        omega0_over_omega1: f64,
        quality: f64,
        waveform: WaveformSpec,
        /// Sound speed in the spacer, for the instantaneous-spring check.
        sound_speed: Option<f64>,
    },
    /// Two-column CSV `(t, L)` in absolute units.
    Sampled { path: PathBuf },
}

impl DriverSpec {
    /// Characteristic angular frequency of the perturbation, if any.
    pub fn angular_frequency(&self, cavity: &CavityConfig) -> Option<f64> {
        let w1 = PI / cavity.l0;
        match self {
            DriverSpec::Sinusoid { gamma_over_omega1, .. } => Some(gamma_over_omega1 * w1),
            DriverSpec::GwSpring { omega0_over_omega1, waveform, .. } => match waveform {
                WaveformSpec::Sine { omega_over_omega1, .. } => Some(omega_over_omega1.unwrap_or(*omega0_over_omega1) * w1),
                _ => Some(omega0_over_omega1 * w1),
            },
            _ => None,
        }
    }

    /// Builds the driver, resolving relative paths against `base` and
    /// integrating GW trajectories up to `horizon`.
    pub fn build(&self, cavity: &CavityConfig, base: &Path, horizon: f64) -> Result<Box<dyn LengthDriver>> {
        let l0 = cavity.l0;
        let w1 = PI / l0;
        Ok(match self {
            DriverSpec::Static => Box::new(StaticDriver::new(l0)?),
            DriverSpec::Sinusoid { amplitude_over_l0, gamma_over_omega1 } => {
                Box::new(SinusoidDriver::new(l0, amplitude_over_l0 * l0, gamma_over_omega1 * w1)?)
            }
            DriverSpec::GwSpring { omega0_over_omega1, quality, waveform, sound_speed } => {
                let omega0 = omega0_over_omega1 * w1;
                let wave = match waveform {
                    WaveformSpec::Zero => StrainWaveform::Zero,
                    WaveformSpec::Constant { h } => StrainWaveform::Constant(*h),
                    WaveformSpec::Sine { h0, omega_over_omega1 } => StrainWaveform::Sine {
                        h0: *h0,
                        omega: omega_over_omega1.map_or(omega0, |w| w * w1),
                    },
                    WaveformSpec::Sampled { path } => {
                        StrainWaveform::Sampled(SampledSeries::from_csv(&resolve(base, path))?.0)
                    }
                };
                if let (Some(v_s), Some(omega)) = (sound_speed, self.angular_frequency(cavity)) {
                    instantaneous_spring_ok(omega, *v_s, l0);
                }
                let params = SpringParams { l0, omega0, quality: *quality };
                Box::new(GwSpringDriver::new(params, wave, horizon)?)
            }
            DriverSpec::Sampled { path } => Box::new(SampledDriver::from_csv(&resolve(base, path))?),
        })
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// Extra points of spacing `step` within `half_width` of every integer of the
/// grid's span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Refinement {
    pub step: f64,
    pub half_width: f64,
}

/// Union of explicit values, a linear range, a log range and an
/// integer-refinement band; sorted, deduplicated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub parameter: Option<String>,
    pub values: Vec<f64>,
    pub range: Option<LinearRange>,
    pub log_range: Option<LogRange>,
    pub refine: Option<Refinement>,
}

fn linear(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(Error::Config(format!("bad range {start}..{stop} step {step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

impl GridSpec {
    /// Valley-sweep default: `f ∈ [3.5, 6.5]` in steps of 0.01, refined to
    /// 0.0005 within 0.05 of each integer.
    pub fn default_valley() -> Self {
        Self {
            parameter: Some("f".into()),
            range: Some(LinearRange { start: 3.5, stop: 6.5, step: 0.01 }),
            refine: Some(Refinement { step: 0.0005, half_width: 0.05 }),
            ..Self::default()
        }
    }

    /// Frequency-response default: ten log-spaced points of `γ/ω1`.
    pub fn default_freq_response() -> Self {
        Self {
            parameter: Some("gamma_over_omega1".into()),
            log_range: Some(LogRange { start: 1e-5, stop: 1e-3, points: 10 }),
            ..Self::default()
        }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        let mut out = self.values.clone();
        if let Some(r) = self.range {
            out.extend(linear(r.start, r.stop, r.step)?);
        }
        if let Some(r) = self.log_range {
            if !(r.start > 0.0 && r.stop >= r.start) || r.points < 1 {
                return Err(Error::Config(format!("bad log range {r:?}")));
            }
            if r.points == 1 {
                out.push(r.start);
            } else {
                let ratio = (r.stop / r.start).ln() / (r.points - 1) as f64;
                out.extend((0..r.points).map(|k| r.start * (ratio * k as f64).exp()));
            }
        }
        if let Some(refine) = self.refine {
            let (lo, hi) = out.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            if lo.is_finite() {
                for n in (lo.ceil() as i64)..=(hi.floor() as i64) {
                    let n = n as f64;
                    let band = linear(n - refine.half_width, n + refine.half_width, refine.step)?;
                    out.extend(band.into_iter().filter(|x| *x >= lo && *x <= hi));
                }
            }
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("grid contains non-finite values".into()));
        }
        // Snap to 1e-12 so overlapping ranges collapse onto one point.
        let mut snapped: Vec<f64> = out.into_iter().map(|x| (x * 1e12).round() / 1e12).collect();
        snapped.sort_by(|a, b| a.total_cmp(b));
        snapped.dedup();
        if snapped.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        Ok(snapped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSettings {
    /// Dual evolution under both generators; off when `None`.
    pub small_case: Option<SmallCase>,
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self { small_case: Some(SmallCase::default()) }
    }
}

/// One declarative experiment. Lengths and frequencies of drivers are
/// relative to `L0` and `ω1 = π/L0`; cavity fields are absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Option<ExperimentKind>,
    pub cavity: CavityConfig,
    /// Sets the delay through `f = (T + Δt)/L0` when present.
    pub f: Option<f64>,
    pub initial_field: InitialFieldSpec,
    pub driver: DriverSpec,
    pub grid: Option<GridSpec>,
    pub fixed_point: FixedPointSettings,
    /// Duration of perturbed runs in driver periods.
    pub periods: f64,
    /// Explicit number of perturbed cycles; overrides `periods`.
    pub cycles: Option<usize>,
    pub audit: AuditSettings,
    pub out_dir: Option<PathBuf>,
    /// Reserved; every run is deterministic.
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: None,
            cavity: CavityConfig::default(),
            f: None,
            initial_field: InitialFieldSpec::Vacuum,
            driver: DriverSpec::Static,
            grid: None,
            fixed_point: FixedPointSettings::default(),
            periods: 3.0,
            cycles: None,
            audit: AuditSettings::default(),
            out_dir: None,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Cavity configuration with `f` applied.
    pub fn resolved_cavity(&self) -> Result<CavityConfig> {
        let cavity = match self.f {
            Some(f) => self.cavity.with_f(f)?,
            None => self.cavity.clone(),
        };
        cavity.validate()?;
        Ok(cavity)
    }

    /// Number of perturbed cycles for a driver of angular frequency `omega`.
    pub fn perturbed_cycles(&self, cavity: &CavityConfig, omega: Option<f64>) -> Result<usize> {
        if let Some(n) = self.cycles {
            return Ok(n.max(1));
        }
        let omega = omega.ok_or_else(|| {
            Error::Config("driver has no intrinsic frequency; set `cycles` explicitly".into())
        })?;
        if !(self.periods > 0.0) || !(omega > 0.0) {
            return Err(Error::Config(format!("need periods > 0 and a positive frequency, got {} and {omega}", self.periods)));
        }
        Ok(((self.periods * 2.0 * PI / omega) / cavity.cycle_time()).ceil().max(1.0) as usize)
    }

    /// SHA-256 over the canonical JSON form, ignoring `out_dir`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        let json = serde_json::to_vec(&canonical).expect("scenario serialises");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn check_kind(&self, kind: ExperimentKind) -> Result<()> {
        match self.kind {
            Some(k) if k != kind => Err(Error::Config(format!(
                "config declares kind `{}` but `{}` was requested",
                k.name(),
                kind.name()
            ))),
            _ => Ok(()),
        }
    }
}
