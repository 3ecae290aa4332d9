//! Cavity-length histories `L(t)` and their rates `L̇(t)`.
//!
//! Times are global: `t = 0` is the vibration (or wave) onset.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthSample {
    pub length: f64,
    pub rate: f64,
}

pub trait LengthDriver: Send + Sync {
    fn sample(&self, t: f64) -> Result<LengthSample>;
    fn rest_length(&self) -> f64;
    /// True when `L(t)` is the constant rest length.
    fn is_static(&self) -> bool {
        false
    }
    /// Shortest time scale of the history, used to pick sampling densities.
    fn shortest_period(&self) -> Option<f64> {
        None
    }
    /// Metric strain `h(t)` along the cavity axis (zero unless a
    /// gravitational wave is passing).
    fn strain(&self, _t: f64) -> Result<f64> {
        Ok(0.0)
    }
}

/// `L(t)` and `L̇(t)` with the positivity check every driver must pass.
pub fn length(driver: &dyn LengthDriver, t: f64) -> Result<LengthSample> {
    let s = driver.sample(t)?;
    if !s.length.is_finite() || !s.rate.is_finite() {
        return Err(Error::NonFinite(format!("cavity length at t = {t}")));
    }
    if s.length <= 0.0 {
        return Err(Error::Model(format!("non-positive cavity length {} at t = {t}", s.length)));
    }
    Ok(s)
}

/// `max |L̇|` over `[t0, t1]`, sampled at no fewer than 20 points per
/// shortest driver period (and at least 200 points overall).
pub fn adiabaticity_figure(driver: &dyn LengthDriver, t0: f64, t1: f64) -> Result<f64> {
    if driver.is_static() {
        return Ok(0.0);
    }
    if t1 < t0 {
        return Err(Error::Config(format!("invalid span [{t0}, {t1}]")));
    }
    let mut samples = 200usize;
    if let Some(period) = driver.shortest_period() {
        samples = samples.max((20.0 * (t1 - t0) / period).ceil() as usize + 1);
    }
    let mut worst = 0.0_f64;
    for k in 0..samples {
        let t = t0 + (t1 - t0) * k as f64 / (samples - 1) as f64;
        worst = worst.max(length(driver, t)?.rate.abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticDriver {
    pub l0: f64,
}

impl StaticDriver {
    pub fn new(l0: f64) -> Result<Self> {
        if !(l0 > 0.0) {
            return Err(Error::Config(format!("rest length must be positive, got {l0}")));
        }
        Ok(Self { l0 })
    }
}

impl LengthDriver for StaticDriver {
    fn sample(&self, _: f64) -> Result<LengthSample> {
        Ok(LengthSample { length: self.l0, rate: 0.0 })
    }

    fn rest_length(&self) -> f64 {
        self.l0
    }

    fn is_static(&self) -> bool {
        true
    }
}

/// `L(t) = L0 + A sin(γ t)` for `t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidDriver {
    pub l0: f64,
    pub amplitude: f64,
    pub gamma: f64,
}

impl SinusoidDriver {
    pub fn new(l0: f64, amplitude: f64, gamma: f64) -> Result<Self> {
        if !(l0 > 0.0) {
            return Err(Error::Config(format!("rest length must be positive, got {l0}")));
        }
        if !(amplitude >= 0.0 && amplitude < l0) {
            return Err(Error::Config(format!("amplitude must lie in [0, L0), got {amplitude}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::Config(format!("vibration frequency must be >= 0, got {gamma}")));
        }
        let driver = Self { l0, amplitude, gamma };
        if driver.adiabaticity() > 0.1 {
            log::warn!("γA = {:.3e} is not small; wall motion leaves the adiabatic regime", driver.adiabaticity());
        }
        Ok(driver)
    }

    /// `γ A`, the peak wall speed in units of c.
    pub fn adiabaticity(&self) -> f64 {
        self.amplitude * self.gamma
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.gamma
    }
}

impl LengthDriver for SinusoidDriver {
    fn sample(&self, t: f64) -> Result<LengthSample> {
        if t < 0.0 {
            return Err(Error::OutOfDomain { t, start: 0.0, end: f64::INFINITY });
        }
        let (s, c) = (self.gamma * t).sin_cos();
        Ok(LengthSample { length: self.l0 + self.amplitude * s, rate: self.amplitude * self.gamma * c })
    }

    fn rest_length(&self) -> f64 {
        self.l0
    }

    fn is_static(&self) -> bool {
        self.amplitude == 0.0 || self.gamma == 0.0
    }

    fn shortest_period(&self) -> Option<f64> {
        (self.gamma > 0.0).then(|| self.period())
    }
}

/// Clamped cubic spline through `(t, y)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    t: Vec<f64>,
    y: Vec<f64>,
    second: Vec<f64>,
}

/// Derivative at `x[0]` of the cubic through the first four points.
fn one_sided_derivative(x: &[f64], y: &[f64]) -> f64 {
    let x0 = x[0];
    let mut d = y[0] * (1..4).map(|k| 1.0 / (x0 - x[k])).sum::<f64>();
    for j in 1..4 {
        let num: f64 = (1..4).filter(|&k| k != j).map(|k| x0 - x[k]).product();
        let den: f64 = (0..4).filter(|&k| k != j).map(|k| x[j] - x[k]).product();
        d += y[j] * num / den;
    }
    d
}

impl SampledSeries {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::Config(format!("sampled series needs at least 4 points, got {}", points.len())));
        }
        if points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
            return Err(Error::NonFinite("sampled series".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("sample times must be strictly increasing".into()));
        }
        let (t, y): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        let n = t.len();
        let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let d_start = one_sided_derivative(&t[..4], &y[..4]);
        let rt: Vec<f64> = t[n - 4..].iter().rev().copied().collect();
        let ry: Vec<f64> = y[n - 4..].iter().rev().copied().collect();
        let d_end = one_sided_derivative(&rt, &ry);

        // Tridiagonal system for the second derivatives (Thomas algorithm).
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 2.0 * h[0];
        upper[0] = h[0];
        rhs[0] = 6.0 * (slope[0] - d_start);
        for i in 1..n - 1 {
            lower[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            upper[i] = h[i];
            rhs[i] = 6.0 * (slope[i] - slope[i - 1]);
        }
        lower[n - 1] = h[n - 2];
        diag[n - 1] = 2.0 * h[n - 2];
        rhs[n - 1] = 6.0 * (d_end - slope[n - 2]);
        for i in 1..n {
            let w = lower[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut second = vec![0.0; n];
        second[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            second[i] = (rhs[i] - upper[i] * second[i + 1]) / diag[i];
        }
        Ok(Self { t, y, second })
    }

    pub fn from_csv(path: &Path) -> Result<(Self, [String; 2])> {
        let (headers, points) = read_two_column_csv(path)?;
        Ok((Self::new(points)?, headers))
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn min_spacing(&self) -> f64 {
        self.t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Interpolated value and first derivative.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let (start, end) = self.domain();
        if !(x >= start && x <= end) {
            return Err(Error::OutOfDomain { t: x, start, end });
        }
        let i = match self.t.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => i.min(self.t.len() - 2),
            Err(i) => i - 1,
        };
        let h = self.t[i + 1] - self.t[i];
        let a = self.t[i + 1] - x;
        let b = x - self.t[i];
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let c0 = self.y[i] / h - m0 * h / 6.0;
        let c1 = self.y[i + 1] / h - m1 * h / 6.0;
        let value = m0 * a.powi(3) / (6.0 * h) + m1 * b.powi(3) / (6.0 * h) + c0 * a + c1 * b;
        let slope = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - c0 + c1;
        Ok((value, slope))
    }
}

/// Reads a headed two-column numeric CSV.
pub fn read_two_column_csv(path: &Path) -> Result<([String; 2], Vec<(f64, f64)>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 {
        return Err(Error::Schema { path: path.into(), reason: format!("expected 2 columns, found {}", headers.len()) });
    }
    let names = [headers[0].to_string(), headers[1].to_string()];
    let mut points = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |k: usize| -> Result<f64> {
            record.get(k).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| Error::Schema {
                path: path.into(),
                reason: format!("row {} column {} is not a number", line + 2, k + 1),
            })
        };
        points.push((parse(0)?, parse(1)?));
    }
    Ok((names, points))
}

/// Cavity length interpolated from a sampled `(t, L)` table.
#[derive(Debug, Clone)]
pub struct SampledDriver {
    series: SampledSeries,
    l0: f64,
}

impl SampledDriver {
    pub fn new(series: SampledSeries) -> Result<Self> {
        if series.values().iter().any(|&l| l <= 0.0) {
            return Err(Error::Config("sampled cavity length must be positive everywhere".into()));
        }
        let l0 = series.values()[0];
        Ok(Self { series, l0 })
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let (series, _) = SampledSeries::from_csv(path)?;
        Self::new(series)
    }
}

impl LengthDriver for SampledDriver {
    fn sample(&self, t: f64) -> Result<LengthSample> {
        let (length, rate) = self.series.eval(t)?;
        Ok(LengthSample { length, rate })
    }

    fn rest_length(&self) -> f64 {
        self.l0
    }

    fn shortest_period(&self) -> Option<f64> {
        Some(4.0 * self.series.min_spacing())
    }
}

/// Strain history `h(t)` of a passing gravitational wave.
#[derive(Debug, Clone, PartialEq)]
pub enum StrainWaveform {
    Zero,
    Constant(f64),
    /// `h0 sin(ω t)`.
    Sine { h0: f64, omega: f64 },
    Sampled(SampledSeries),
}

/// Strain amplitudes must stay in the linear regime.
pub const MAX_STRAIN: f64 = 1e-3;

impl StrainWaveform {
    fn validate(&self) -> Result<()> {
        let peak = match self {
            StrainWaveform::Zero => 0.0,
            StrainWaveform::Constant(h) => h.abs(),
            StrainWaveform::Sine { h0, omega } => {
                if !(*omega > 0.0) {
                    return Err(Error::Config(format!("wave frequency must be positive, got {omega}")));
                }
                h0.abs()
            }
            StrainWaveform::Sampled(s) => s.values().iter().fold(0.0_f64, |m, h| m.max(h.abs())),
        };
        if !(peak < MAX_STRAIN) {
            return Err(Error::Config(format!("|h| = {peak:e} violates |h| < {MAX_STRAIN:e}")));
        }
        Ok(())
    }

    /// `(h, ḣ)` at `t`; the wave is absent before `t = 0`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        if t < 0.0 {
            return Ok((0.0, 0.0));
        }
        Ok(match self {
            StrainWaveform::Zero => (0.0, 0.0),
            StrainWaveform::Constant(h) => (*h, 0.0),
            StrainWaveform::Sine { h0, omega } => {
                let (s, c) = (omega * t).sin_cos();
                (h0 * s, h0 * omega * c)
            }
            StrainWaveform::Sampled(series) => {
                let (start, end) = series.domain();
                if t < start || t > end {
                    (0.0, 0.0)
                } else {
                    series.eval(t)?
                }
            }
        })
    }

    fn shortest_period(&self) -> Option<f64> {
        match self {
            StrainWaveform::Sine { omega, .. } => Some(2.0 * PI / omega),
            StrainWaveform::Sampled(s) => Some(4.0 * s.min_spacing()),
            _ => None,
        }
    }
}

/// Mirror spring parameters: rest length, mechanical frequency `ω0 = √(k/m)`
/// and quality factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringParams {
    pub l0: f64,
    pub omega0: f64,
    pub quality: f64,
}

/// Whether the instantaneous-spring idealisation is reasonable: the wave must
/// be slow compared to the sound crossing rate `v_s / L`.
pub fn instantaneous_spring_ok(omega_gw: f64, sound_speed: f64, length: f64) -> bool {
    let ok = omega_gw < 0.1 * sound_speed / length;
    if !ok {
        log::warn!("ω_gw = {omega_gw:e} is not small against v_s/L = {:e}", sound_speed / length);
    }
    ok
}

/// Cavity whose mirrors are joined by a damped spring and driven by a
/// gravitational wave:
/// `δẍ = −(ω0/Q) δẋ − ω0² δx − ½ h(t) ω0² L0`,
/// `L(t) = L0 (1 + h(t)/2) + δx(t)`.
///
/// The trajectory is integrated once up to `horizon` with RK4 and
/// interpolated with cubic Hermite polynomials, so lookups are pure.
#[derive(Debug, Clone)]
pub struct GwSpringDriver {
    params: SpringParams,
    waveform: StrainWaveform,
    dt: f64,
    horizon: f64,
    // (δx, δẋ) at t = k·dt
    trajectory: Vec<(f64, f64)>,
}

impl GwSpringDriver {
    pub fn new(params: SpringParams, waveform: StrainWaveform, horizon: f64) -> Result<Self> {
        Self::with_initial(params, waveform, horizon, (0.0, 0.0))
    }

    /// As [`GwSpringDriver::new`] with a displaced or moving initial mirror.
    pub fn with_initial(
        params: SpringParams,
        waveform: StrainWaveform,
        horizon: f64,
        initial: (f64, f64),
    ) -> Result<Self> {
        if !(params.l0 > 0.0 && params.omega0 > 0.0 && params.quality > 0.0) {
            return Err(Error::Config(format!("spring parameters must be positive: {params:?}")));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        waveform.validate()?;
        let mut period = 2.0 * PI / params.omega0;
        if let Some(p) = waveform.shortest_period() {
            period = period.min(p);
        }
        let steps_hint = (horizon / (period / 200.0)).ceil().max(1.0) as usize;
        let dt = horizon.max(f64::MIN_POSITIVE) / steps_hint as f64;
        let mut driver = Self { params, waveform, dt, horizon, trajectory: Vec::with_capacity(steps_hint + 1) };
        driver.integrate(initial, steps_hint)?;
        Ok(driver)
    }

    fn acceleration(&self, t: f64, x: f64, v: f64) -> Result<f64> {
        let SpringParams { l0, omega0, quality } = self.params;
        let (h, _) = self.waveform.eval(t)?;
        Ok(-(omega0 / quality) * v - omega0 * omega0 * x - 0.5 * h * omega0 * omega0 * l0)
    }

    fn integrate(&mut self, initial: (f64, f64), steps: usize) -> Result<()> {
        let dt = self.dt;
        let (mut x, mut v) = initial;
        self.trajectory.push((x, v));
        for k in 0..steps {
            let t = k as f64 * dt;
            let a1 = self.acceleration(t, x, v)?;
            let (x2, v2) = (x + 0.5 * dt * v, v + 0.5 * dt * a1);
            let a2 = self.acceleration(t + 0.5 * dt, x2, v2)?;
            let (x3, v3) = (x + 0.5 * dt * v2, v + 0.5 * dt * a2);
            let a3 = self.acceleration(t + 0.5 * dt, x3, v3)?;
            let (x4, v4) = (x + dt * v3, v + dt * a3);
            let a4 = self.acceleration(t + dt, x4, v4)?;
            x += dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
            v += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            self.trajectory.push((x, v));
        }
        Ok(())
    }

    pub fn params(&self) -> SpringParams {
        self.params
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Mirror displacement `(δx, δẋ)` at `t`.
    pub fn displacement(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::OutOfDomain { t, start: 0.0, end: self.horizon });
        }
        let last = self.trajectory.len() - 1;
        let k = ((t / self.dt).floor() as usize).min(last.saturating_sub(1));
        if last == 0 {
            return Ok(self.trajectory[0]);
        }
        let (x0, v0) = self.trajectory[k];
        let (x1, v1) = self.trajectory[k + 1];
        let (t0, t1) = (k as f64 * self.dt, (k + 1) as f64 * self.dt);
        let a0 = self.acceleration(t0, x0, v0)?;
        let a1 = self.acceleration(t1, x1, v1)?;
        let h = self.dt;
        let s = (t - t0) / h;
        // Hermite cubic for δx and its derivative, another for δẋ.
        let (h00, h10, h01, h11) = (
            2.0 * s.powi(3) - 3.0 * s * s + 1.0,
            s.powi(3) - 2.0 * s * s + s,
            -2.0 * s.powi(3) + 3.0 * s * s,
            s.powi(3) - s * s,
        );
        let x = h00 * x0 + h10 * h * v0 + h01 * x1 + h11 * h * v1;
        let v = h00 * v0 + h10 * h * a0 + h01 * v1 + h11 * h * a1;
        Ok((x, v))
    }
}

impl LengthDriver for GwSpringDriver {
    fn sample(&self, t: f64) -> Result<LengthSample> {
        let (x, v) = self.displacement(t)?;
        let (h, hdot) = self.waveform.eval(t)?;
        let l0 = self.params.l0;
        Ok(LengthSample { length: l0 * (1.0 + 0.5 * h) + x, rate: 0.5 * l0 * hdot + v })
    }

    fn rest_length(&self) -> f64 {
        self.params.l0
    }

    fn shortest_period(&self) -> Option<f64> {
        let spring = 2.0 * PI / self.params.omega0;
        Some(self.waveform.shortest_period().map_or(spring, |p| p.min(spring)))
    }

    fn strain(&self, t: f64) -> Result<f64> {
        Ok(self.waveform.eval(t)?.0)
    }
}
