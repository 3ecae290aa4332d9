//! Hamiltonian of two harmonic-oscillator detectors coupled to a truncated
//! Dirichlet cavity field.
//!
//! The field is expanded as `φ(x) = Σ_n √(2/(nπ)) q_n sin(k_n x)` with
//! `k_n = ω_n = nπ/L(t)`; each detector couples through its monopole
//! `μ = b + b† = √2 q_d`, giving the `q_d q_n` coefficient
//! `λ χ(t) (2/√(nπ)) sin(nπ x_d/L)`. Detectors sit at fixed fractions of the
//! instantaneous length, so couplings never depend on `L(t)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::drivers::{length, LengthDriver};
use crate::error::{Error, Result};
use crate::integrate::{HamiltonianSource, IntegratorConfig, RotatingFrameModel};

/// Number of detectors in the cavity.
pub const DETECTORS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchingKind {
    /// `C∞` ramps of width `δ` at both ends.
    #[default]
    Smooth,
    /// Coupling on for the whole of `[0, T]`.
    Sharp,
}

/// Which frame the exiting detector covariance is reported in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutPicture {
    /// Free detector rotation by `Ω T` removed.
    #[default]
    Interaction,
    Schrodinger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityConfig {
    /// Rest length `L0`.
    pub l0: f64,
    pub n_modes: usize,
    /// Overall coupling `λ`.
    pub lambda: f64,
    /// Detector gap `Ω`; `None` means resonant with the fundamental, `π/L0`.
    pub omega_gap: Option<f64>,
    /// Interaction time `T` per cycle.
    pub interaction_time: f64,
    /// Switching time `δ`; `None` means `0.2 T`.
    pub switching_time: Option<f64>,
    /// Field-only delay `Δt` after each interaction.
    pub delay: f64,
    /// Detector positions as fractions of the cavity length.
    pub r1: f64,
    pub r2: f64,
    pub switching: SwitchingKind,
    pub readout: ReadoutPicture,
    pub integrator: IntegratorConfig,
}

impl Default for CavityConfig {
    fn default() -> Self {
        let l0 = 8.0;
        Self {
            l0,
            n_modes: 10,
            lambda: 0.01,
            omega_gap: None,
            interaction_time: 2.5 * l0,
            switching_time: None,
            delay: 2.5 * l0,
            r1: 1.0 / 3.0,
            r2: 2.0 / 3.0,
            switching: SwitchingKind::Smooth,
            readout: ReadoutPicture::Interaction,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl CavityConfig {
    pub fn gap(&self) -> f64 {
        self.omega_gap.unwrap_or(PI / self.l0)
    }

    pub fn switching_time(&self) -> f64 {
        self.switching_time.unwrap_or(0.2 * self.interaction_time)
    }

    /// `T + Δt`.
    pub fn cycle_time(&self) -> f64 {
        self.interaction_time + self.delay
    }

    /// Cycle period in units of the light-crossing time, `f = (T + Δt)/L0`.
    pub fn f(&self) -> f64 {
        self.cycle_time() / self.l0
    }

    /// Same configuration with the delay chosen so that `(T + Δt)/L0 = f`.
    pub fn with_f(&self, f: f64) -> Result<Self> {
        let delay = f * self.l0 - self.interaction_time;
        if delay < -1e-12 * self.l0 {
            return Err(Error::Config(format!("f = {f} is below T/L0 = {}", self.interaction_time / self.l0)));
        }
        Ok(Self { delay: delay.max(0.0), ..self.clone() })
    }

    /// Rescales every dimensionful quantity by `s` (lengths and times by `s`,
    /// frequencies and `λ` by `1/s`).
    pub fn rescaled(&self, s: f64) -> Self {
        Self {
            l0: self.l0 * s,
            lambda: self.lambda / s,
            omega_gap: Some(self.gap() / s),
            interaction_time: self.interaction_time * s,
            switching_time: Some(self.switching_time() * s),
            delay: self.delay * s,
            ..self.clone()
        }
    }

    pub fn n_oscillators(&self) -> usize {
        DETECTORS + self.n_modes
    }

    pub fn fractions(&self) -> [f64; DETECTORS] {
        [self.r1, self.r2]
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let delta = self.switching_time();
        if !(self.l0 > 0.0) || !self.l0.is_finite() {
            return fail(format!("L0 must be positive, got {}", self.l0));
        }
        if self.n_modes < 1 {
            return fail("at least one field mode is required".into());
        }
        if !self.lambda.is_finite() {
            return fail("coupling must be finite".into());
        }
        if !(self.gap() >= 0.0) || !self.gap().is_finite() {
            return fail(format!("detector gap must be >= 0, got {}", self.gap()));
        }
        if !(self.interaction_time > 0.0) || !self.interaction_time.is_finite() {
            return fail(format!("interaction time must be positive, got {}", self.interaction_time));
        }
        if !(delta > 0.0 && delta <= 0.5 * self.interaction_time) {
            return fail(format!("switching time must lie in (0, T/2], got {delta}"));
        }
        if !(self.delay >= 0.0) || !self.delay.is_finite() {
            return fail(format!("delay must be >= 0, got {}", self.delay));
        }
        if !(0.0 < self.r1 && self.r1 < self.r2 && self.r2 < 1.0) {
            return fail(format!("need 0 < r1 < r2 < 1, got r1 = {}, r2 = {}", self.r1, self.r2));
        }
        if self.integrator.steps_per_period < 4 {
            return fail("steps_per_period must be at least 4".into());
        }
        if self.interaction_time < (self.r2 - self.r1) * self.l0 {
            log::warn!(
                "interaction time {} is shorter than the light-crossing time {} between detectors",
                self.interaction_time,
                (self.r2 - self.r1) * self.l0
            );
        }
        Ok(())
    }
}

/// `S(x) = [1 − tanh(cot x)]/2` for `x ∈ (0, π)`.
fn ramp(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= PI {
        return 1.0;
    }
    0.5 * (1.0 - (x.cos() / x.sin()).tanh())
}

/// Switching function `χ(t)` on the cycle-local clock: smooth rise over
/// `[0, δ)`, plateau, smooth fall over `[T − δ, T]`, zero outside.
pub fn switching(t: f64, interaction_time: f64, delta: f64) -> f64 {
    if t < 0.0 || t > interaction_time {
        0.0
    } else if t < delta {
        ramp(PI * t / delta)
    } else if t < interaction_time - delta {
        1.0
    } else {
        ramp(PI * (interaction_time - t) / delta)
    }
}

pub fn switching_for(config: &CavityConfig, t: f64) -> f64 {
    match config.switching {
        SwitchingKind::Smooth => switching(t, config.interaction_time, config.switching_time()),
        SwitchingKind::Sharp => {
            if (0.0..=config.interaction_time).contains(&t) {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// `λ (2/√(nπ)) sin(nπ r)` for `n = 1..=N`, with the switching factor left out.
pub fn coupling_profile(config: &CavityConfig, fraction: f64) -> Vec<f64> {
    (1..=config.n_modes)
        .map(|n| {
            let n = n as f64;
            config.lambda * 2.0 / (n * PI).sqrt() * (n * PI * fraction).sin()
        })
        .collect()
}

/// Per-mode `q_d q_n` coefficients of one detector at cycle-local time `t`.
pub fn coupling_row(config: &CavityConfig, fraction: f64, t: f64) -> Vec<f64> {
    let chi = switching_for(config, t);
    coupling_profile(config, fraction).into_iter().map(|g| chi * g).collect()
}

/// Instantaneous mode frequencies `ω_n = nπ/L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeStack {
    pub length: f64,
    pub frequencies: Vec<f64>,
}

impl ModeStack {
    pub fn at(length: f64, n_modes: usize) -> Self {
        Self { length, frequencies: (1..=n_modes).map(|n| n as f64 * PI / length).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    pub matrix: DMatrix<f64>,
    pub t: f64,
}

/// Index of `q_n` (1-based mode number) in the quadrature vector.
pub fn mode_q_index(n: usize) -> usize {
    2 * (DETECTORS + n - 1)
}

/// `F` such that `H = ½ xᵀ F x` at cycle-local time `t_cycle`, with the cavity
/// length taken at global time `t_global`.
pub fn assemble_f(
    config: &CavityConfig,
    t_cycle: f64,
    t_global: f64,
    driver: &dyn LengthDriver,
) -> Result<HamiltonianMatrix> {
    let len = length(driver, t_global)?.length;
    let d = 2 * config.n_oscillators();
    let mut f = DMatrix::zeros(d, d);
    let gap = config.gap();
    for k in 0..DETECTORS {
        f[(2 * k, 2 * k)] = gap;
        f[(2 * k + 1, 2 * k + 1)] = gap;
    }
    for (i, w) in ModeStack::at(len, config.n_modes).frequencies.iter().enumerate() {
        let q = mode_q_index(i + 1);
        f[(q, q)] = *w;
        f[(q + 1, q + 1)] = *w;
    }
    for (k, &r) in config.fractions().iter().enumerate() {
        for (i, g) in coupling_row(config, r, t_cycle).into_iter().enumerate() {
            let q = mode_q_index(i + 1);
            f[(2 * k, q)] = g;
            f[(q, 2 * k)] = g;
        }
    }
    Ok(HamiltonianMatrix { matrix: f, t: t_global })
}

/// `∫ dt/L(t)` over `[a, b]` by composite Simpson with `panels` panels.
pub fn inverse_length_integral(driver: &dyn LengthDriver, a: f64, b: f64, panels: usize) -> Result<f64> {
    if driver.is_static() {
        return Ok((b - a) / driver.rest_length());
    }
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let inv = |t: f64| length(driver, t).map(|s| 1.0 / s.length);
    let mut acc = 0.0;
    let mut left = inv(a)?;
    for k in 0..panels {
        let t = a + k as f64 * h;
        let right = inv(if k + 1 == panels { b } else { t + h })?;
        acc += h / 6.0 * (left + 4.0 * inv(t + 0.5 * h)? + right);
        left = right;
    }
    Ok(acc)
}

/// The cavity Hamiltonian over one interaction window, on a cycle-local
/// clock starting at global time `t_start`.
pub struct CycleHamiltonian<'a> {
    pub config: &'a CavityConfig,
    pub driver: &'a dyn LengthDriver,
    pub t_start: f64,
    profiles: [Vec<f64>; DETECTORS],
}

impl<'a> CycleHamiltonian<'a> {
    pub fn new(config: &'a CavityConfig, driver: &'a dyn LengthDriver, t_start: f64) -> Self {
        let profiles = config.fractions().map(|r| coupling_profile(config, r));
        Self { config, driver, t_start, profiles }
    }

    fn shortest_length(&self, t0: f64, t1: f64) -> f64 {
        [t0, 0.5 * (t0 + t1), t1]
            .iter()
            .filter_map(|&t| length(self.driver, self.t_start + t).ok())
            .map(|s| s.length)
            .fold(self.driver.rest_length(), f64::min)
    }

    fn max_frequency_on(&self, t0: f64, t1: f64) -> f64 {
        let field = self.config.n_modes as f64 * PI / self.shortest_length(t0, t1);
        field.max(self.config.gap())
    }
}

impl HamiltonianSource for CycleHamiltonian<'_> {
    fn n_oscillators(&self) -> usize {
        self.config.n_oscillators()
    }

    fn max_frequency(&self, t0: f64, t1: f64) -> f64 {
        self.max_frequency_on(t0, t1)
    }

    fn matrix_at(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(assemble_f(self.config, t, self.t_start + t, self.driver)?.matrix)
    }
}

impl RotatingFrameModel for CycleHamiltonian<'_> {
    fn n_oscillators(&self) -> usize {
        self.config.n_oscillators()
    }

    fn max_frequency(&self, t0: f64, t1: f64) -> f64 {
        self.max_frequency_on(t0, t1)
    }

    fn free_phases(&self, t0: f64, t1: f64, nodes: usize) -> Result<Vec<Vec<f64>>> {
        let gap = self.config.gap();
        let n_modes = self.config.n_modes;
        let spacing = if nodes > 1 { (t1 - t0) / (nodes - 1) as f64 } else { 0.0 };
        let mut rows = Vec::with_capacity(nodes);
        let mut phi = 0.0;
        for k in 0..nodes {
            let tau = t0 + k as f64 * spacing;
            if k > 0 {
                let a = self.t_start + tau - spacing;
                phi += inverse_length_integral(self.driver, a, a + spacing, 1)?;
            }
            let mut row = Vec::with_capacity(DETECTORS + n_modes);
            row.extend(std::iter::repeat(gap * (tau - t0)).take(DETECTORS));
            row.extend((1..=n_modes).map(|n| n as f64 * PI * phi));
            rows.push(row);
        }
        Ok(rows)
    }

    fn couplings(&self, t: f64, out: &mut Vec<(usize, usize, f64)>) -> Result<()> {
        let chi = switching_for(self.config, t);
        if chi == 0.0 {
            return Ok(());
        }
        for (k, profile) in self.profiles.iter().enumerate() {
            for (i, &g) in profile.iter().enumerate() {
                if g != 0.0 {
                    out.push((k, DETECTORS + i, chi * g));
                }
            }
        }
        Ok(())
    }
}

/// Field rotation angles `nπ ∫ dt/L` over a detector-free interval.
pub fn delay_phases(config: &CavityConfig, driver: &dyn LengthDriver, a: f64, b: f64) -> Result<Vec<f64>> {
    let max_frequency = config.n_modes as f64 * PI / driver.rest_length();
    let panels = config.integrator.step_count(b - a, max_frequency);
    let phi = inverse_length_integral(driver, a, b, panels)?;
    Ok((1..=config.n_modes).map(|n| n as f64 * PI * phi).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{SinusoidDriver, StaticDriver};
    use approx::assert_abs_diff_eq;

    #[test]
    fn switching_reference_points() {
        let (t_int, delta) = (20.0, 4.0);
        assert_eq!(switching(10.0, t_int, delta), 1.0);
        assert_abs_diff_eq!(switching(1e-9, t_int, delta), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(switching(2.0, t_int, delta), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(switching(18.0, t_int, delta), 0.5, epsilon = 1e-15);
        assert_eq!(switching(-0.1, t_int, delta), 0.0);
        assert_eq!(switching(20.1, t_int, delta), 0.0);
        assert_eq!(switching(0.0, t_int, delta), 0.0);
        assert_eq!(switching(20.0, t_int, delta), 0.0);
    }

    #[test]
    fn switching_is_continuous_at_joins() {
        let (t_int, delta) = (20.0, 4.0);
        let eps = 1e-8;
        for &t in &[0.0, delta, t_int - delta, t_int] {
            let jump = (switching(t + eps, t_int, delta) - switching(t - eps, t_int, delta)).abs();
            assert!(jump <= 10.0 * eps, "jump {jump} at {t}");
        }
    }

    #[test]
    fn detector_at_third_decouples_from_every_third_mode() {
        let cfg = CavityConfig::default();
        let row = coupling_row(&cfg, 1.0 / 3.0, 10.0);
        for n in [3, 6, 9] {
            assert!(row[n - 1].abs() < 1e-15);
        }
        assert_abs_diff_eq!(row[0], 0.01 * 2.0 / PI.sqrt() * (PI / 3.0).sin(), epsilon = 1e-16);
        assert_abs_diff_eq!(row[0], 0.009772, epsilon = 5e-7);
        assert!(coupling_row(&cfg, 1.0 / 3.0, 30.0).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mode_frequencies_times_length() {
        for &l in &[0.8, 8.0, 8.0037, 1234.5] {
            let stack = ModeStack::at(l, 10);
            for (i, w) in stack.frequencies.iter().enumerate() {
                assert_abs_diff_eq!(w * l, (i + 1) as f64 * PI, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hand_assembled_two_mode_hamiltonian() {
        let cfg = CavityConfig { n_modes: 2, ..CavityConfig::default() };
        let driver = StaticDriver::new(cfg.l0).unwrap();
        let f = assemble_f(&cfg, 10.0, 123.0, &driver).unwrap().matrix;
        let gap = PI / 8.0;
        let g = |r: f64, n: f64| 0.01 * 2.0 / (n * PI).sqrt() * (n * PI * r).sin();
        let (a1, a2) = (g(1.0 / 3.0, 1.0), g(1.0 / 3.0, 2.0));
        let (b1, b2) = (g(2.0 / 3.0, 1.0), g(2.0 / 3.0, 2.0));
        let (w1, w2) = (PI / 8.0, 2.0 * PI / 8.0);
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(8, 8, &[
            gap, 0.0, 0.0, 0.0, a1, 0.0, a2, 0.0,
            0.0, gap, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, gap, 0.0, b1, 0.0, b2, 0.0,
            0.0, 0.0, 0.0, gap, 0.0, 0.0, 0.0, 0.0,
            a1, 0.0, b1, 0.0, w1, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0, w1, 0.0, 0.0,
            a2, 0.0, b2, 0.0, 0.0, 0.0, w2, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, w2,
        ]);
        assert!((f - expected).amax() < 1e-16);
    }

    #[test]
    fn couplings_do_not_depend_on_length() {
        let cfg = CavityConfig::default();
        let fixed = StaticDriver::new(8.0).unwrap();
        let moving = SinusoidDriver::new(8.0, 0.5, 0.3).unwrap();
        for &t in &[1.0, 7.5, 19.0] {
            let a = assemble_f(&cfg, t, 4.0, &fixed).unwrap().matrix;
            let b = assemble_f(&cfg, t, 4.0, &moving).unwrap().matrix;
            for k in 0..4 {
                for q in 4..a.ncols() {
                    assert_eq!(a[(k, q)], b[(k, q)]);
                }
            }
            assert_eq!(a.transpose(), a);
        }
    }

    #[test]
    fn config_validation() {
        assert!(CavityConfig::default().validate().is_ok());
        let bad = CavityConfig { r1: 0.7, ..CavityConfig::default() };
        assert!(bad.validate().is_err());
        let bad = CavityConfig { switching_time: Some(11.0), ..CavityConfig::default() };
        assert!(bad.validate().is_err());
        let bad = CavityConfig { delay: -1.0, ..CavityConfig::default() };
        assert!(bad.validate().is_err());
        assert!(CavityConfig::default().with_f(2.0).is_err());
        assert_abs_diff_eq!(CavityConfig::default().with_f(4.5).unwrap().delay, 16.0, epsilon = 1e-12);
    }
}
