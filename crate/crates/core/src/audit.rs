//! Moving-mirror corrections to the adiabatic cavity Hamiltonian and a
//! measure of how much they matter.
//!
//! With one wall moving, the exact field Hamiltonian in the instantaneous
//! sine basis picks up
//!
//! ```text
//! − L̇ Σ α_nm ω_n p_n q_m + ½ L̇² Σ (Σ_k α_nk α_mk ω_k) q_n q_m + (L̇²/L) Σ β_nm q_n q_m
//! ```
//!
//! on top of the adiabatic part. Production runs drop these terms; the audit
//! bounds them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix4};
use serde::{Deserialize, Serialize};

use crate::cavity::{assemble_f, mode_q_index, CavityConfig, CycleHamiltonian, HamiltonianMatrix};
use crate::drivers::{length, LengthDriver};
use crate::error::{Error, Result};
use crate::farming::inject_fresh_pair;
use crate::gaussian::{reduce_to_detectors, GaussianState};
use crate::integrate::{evolve, HamiltonianSource};

/// Mode-mixing coefficients, zero-based (`alpha[(m−1, n−1)] = α_mn`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaBetaMatrices {
    pub alpha: DMatrix<f64>,
    pub beta: DMatrix<f64>,
}

impl AlphaBetaMatrices {
    pub fn n_modes(&self) -> usize {
        self.alpha.nrows()
    }
}

pub fn alpha_beta(n_modes: usize) -> Result<AlphaBetaMatrices> {
    if n_modes < 1 {
        return Err(Error::Config("at least one mode is required".into()));
    }
    let alpha = DMatrix::from_fn(n_modes, n_modes, |i, j| {
        let (m, n) = ((i + 1) as f64, (j + 1) as f64);
        if i == j {
            1.0 / (2.0 * PI * n)
        } else {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            -2.0 * sign * (m * n).sqrt() / (PI * (m * m - n * n))
        }
    });
    let beta = DMatrix::from_fn(n_modes, n_modes, |i, j| {
        let (m, n) = ((i + 1) as f64, (j + 1) as f64);
        if i == j {
            n * PI / 6.0 + 1.0 / (4.0 * PI * n)
        } else {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            2.0 * sign * (m * n).sqrt() * (m * m + n * n) / (PI * (m * m - n * n).powi(2))
        }
    });
    Ok(AlphaBetaMatrices { alpha, beta })
}

/// The two correction blocks at one instant, on the field modes only.
struct Corrections {
    /// `C1[(n, m)]`: coefficient of the symmetrised `p_n q_m` entry.
    first: DMatrix<f64>,
    /// `q_n q_m` entries of `F`.
    second: DMatrix<f64>,
}

fn corrections(
    mats: &AlphaBetaMatrices,
    length_now: f64,
    rate: f64,
    strain: f64,
) -> Corrections {
    let n_modes = mats.n_modes();
    let scale = 1.0 + 0.5 * strain;
    let omega: Vec<f64> = (1..=n_modes).map(|n| n as f64 * PI / length_now).collect();
    let alpha = &mats.alpha * scale;
    let beta = &mats.beta * scale;
    let first = DMatrix::from_fn(n_modes, n_modes, |n, m| -rate * alpha[(n, m)] * omega[n]);
    let mut second = DMatrix::from_fn(n_modes, n_modes, |n, m| {
        let mixed: f64 = (0..n_modes).map(|k| alpha[(n, k)] * alpha[(m, k)] * omega[k]).sum();
        rate * rate * mixed + 2.0 * rate * rate / length_now * beta[(n, m)]
    });
    let sym = (&second + second.transpose()) * 0.5;
    second = sym;
    Corrections { first, second }
}

/// Adiabatic `F` plus the moving-wall corrections. The matrices are
/// multiplied by `1 + h/2` when the driver reports a strain.
pub fn assemble_f_full(
    config: &CavityConfig,
    t_cycle: f64,
    t_global: f64,
    driver: &dyn LengthDriver,
    mats: &AlphaBetaMatrices,
) -> Result<HamiltonianMatrix> {
    if mats.n_modes() != config.n_modes {
        return Err(Error::Dimension { expected: config.n_modes, got: mats.n_modes() });
    }
    let mut h = assemble_f(config, t_cycle, t_global, driver)?;
    let sample = length(driver, t_global)?;
    if sample.rate == 0.0 {
        return Ok(h);
    }
    let c = corrections(mats, sample.length, sample.rate, driver.strain(t_global)?);
    let f = &mut h.matrix;
    for n in 1..=config.n_modes {
        for m in 1..=config.n_modes {
            let (qn, qm) = (mode_q_index(n), mode_q_index(m));
            let pn = qn + 1;
            f[(pn, qm)] += c.first[(n - 1, m - 1)];
            f[(qm, pn)] += c.first[(n - 1, m - 1)];
            f[(qn, qm)] += c.second[(n - 1, m - 1)];
        }
    }
    Ok(h)
}

/// Cycle Hamiltonian including the moving-wall corrections.
pub struct FullCycleHamiltonian<'a> {
    pub config: &'a CavityConfig,
    pub driver: &'a dyn LengthDriver,
    pub t_start: f64,
    pub mats: &'a AlphaBetaMatrices,
}

impl HamiltonianSource for FullCycleHamiltonian<'_> {
    fn n_oscillators(&self) -> usize {
        self.config.n_oscillators()
    }

    fn max_frequency(&self, t0: f64, t1: f64) -> f64 {
        let adiabatic = CycleHamiltonian::new(self.config, self.driver, self.t_start);
        HamiltonianSource::max_frequency(&adiabatic, t0, t1)
    }

    fn matrix_at(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(assemble_f_full(self.config, t, self.t_start + t, self.driver, self.mats)?.matrix)
    }
}

/// A short dual evolution under both generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallCase {
    pub n_modes: usize,
    pub cycles: usize,
    /// Global time of the first cycle.
    pub t_start: f64,
}

impl Default for SmallCase {
    fn default() -> Self {
        Self { n_modes: 4, cycles: 3, t_start: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Largest first-order correction entry relative to the largest field
    /// frequency, maximised over the sampled times.
    pub ratio_1: f64,
    /// Same for the `L̇²` entries.
    pub ratio_2: f64,
    pub max_rate: f64,
    pub samples: usize,
    /// Detector covariance under the corrected generator minus the adiabatic
    /// one after the small case.
    pub observable_drift: Option<Matrix4<f64>>,
}

impl AuditReport {
    pub fn max_drift(&self) -> Option<f64> {
        self.observable_drift.map(|d| d.amax())
    }
}

fn sample_times(driver: &dyn LengthDriver, t0: f64, t1: f64) -> Vec<f64> {
    let mut n = 100usize;
    if let Some(period) = driver.shortest_period() {
        n = n.max((20.0 * (t1 - t0) / period).ceil() as usize + 1);
    }
    (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect()
}

/// Sizes the neglected terms over `[t0, t1]` of global time and, if asked,
/// measures their effect on the exiting detectors.
pub fn audit(
    config: &CavityConfig,
    driver: &dyn LengthDriver,
    t_span: (f64, f64),
    small_case: Option<SmallCase>,
) -> Result<AuditReport> {
    config.validate()?;
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(Error::Config(format!("invalid span [{t0}, {t1}]")));
    }
    let mats = alpha_beta(config.n_modes)?;
    let times = sample_times(driver, t0, t1);
    let (mut ratio_1, mut ratio_2, mut max_rate) = (0.0_f64, 0.0_f64, 0.0_f64);
    for &t in &times {
        let s = length(driver, t)?;
        max_rate = max_rate.max(s.rate.abs());
        if s.rate == 0.0 {
            continue;
        }
        let leading = config.n_modes as f64 * PI / s.length;
        let c = corrections(&mats, s.length, s.rate, driver.strain(t)?);
        ratio_1 = ratio_1.max(c.first.amax() / leading);
        ratio_2 = ratio_2.max(c.second.amax() / leading);
    }
    let observable_drift = match small_case {
        Some(case) => Some(dual_evolution(config, driver, case)?),
        None => None,
    };
    Ok(AuditReport { ratio_1, ratio_2, max_rate, samples: times.len(), observable_drift })
}

fn dual_evolution(config: &CavityConfig, driver: &dyn LengthDriver, case: SmallCase) -> Result<Matrix4<f64>> {
    if case.n_modes < 1 || case.cycles < 1 {
        return Err(Error::Config("small case needs at least one mode and one cycle".into()));
    }
    let cfg = CavityConfig { n_modes: case.n_modes, ..config.clone() };
    let mats = alpha_beta(cfg.n_modes)?;
    let mut adiabatic = GaussianState::vacuum(cfg.n_oscillators());
    let mut corrected = adiabatic.clone();
    let mut last = (Matrix4::zeros(), Matrix4::zeros());
    let t_int = cfg.interaction_time;
    for k in 0..case.cycles {
        let t_start = case.t_start + k as f64 * cfg.cycle_time();
        let plain = CycleHamiltonian::new(&cfg, driver, t_start);
        let full = FullCycleHamiltonian { config: &cfg, driver, t_start, mats: &mats };
        let a = evolve(&inject_fresh_pair(&adiabatic), &plain, 0.0, t_int, &cfg.integrator)?.state;
        let b = evolve(&inject_fresh_pair(&corrected), &full, 0.0, t_int, &cfg.integrator)?.state;
        last = (reduce_to_detectors(&a)?, reduce_to_detectors(&b)?);
        adiabatic = a;
        corrected = b;
        if cfg.delay > 0.0 {
            let end = cfg.cycle_time();
            adiabatic = evolve(&adiabatic, &plain, t_int, end, &cfg.integrator)?.state;
            corrected = evolve(&corrected, &full, t_int, end, &cfg.integrator)?.state;
        }
    }
    Ok(last.1 - last.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{SinusoidDriver, StaticDriver};
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_entries() {
        let m = alpha_beta(3).unwrap();
        assert_abs_diff_eq!(m.alpha[(0, 0)], 1.0 / (2.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(m.alpha[(0, 1)], -2.0 * 2f64.sqrt() / (3.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(m.alpha[(0, 1)], -0.30011, epsilon = 1e-5);
        assert_abs_diff_eq!(m.beta[(0, 0)], PI / 6.0 + 1.0 / (4.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(m.beta[(0, 0)], 0.6032, epsilon = 1e-4);
        assert!(alpha_beta(0).is_err());
    }

    #[test]
    fn static_wall_adds_nothing() {
        let cfg = CavityConfig { n_modes: 3, ..CavityConfig::default() };
        let driver = StaticDriver::new(cfg.l0).unwrap();
        let mats = alpha_beta(3).unwrap();
        let full = assemble_f_full(&cfg, 5.0, 5.0, &driver, &mats).unwrap();
        let plain = assemble_f(&cfg, 5.0, 5.0, &driver).unwrap();
        assert_eq!(full.matrix, plain.matrix);
        let report = audit(&cfg, &driver, (0.0, 100.0), None).unwrap();
        assert_eq!((report.ratio_1, report.ratio_2), (0.0, 0.0));
    }

    #[test]
    fn single_mode_correction_entry() {
        let cfg = CavityConfig { n_modes: 1, ..CavityConfig::default() };
        let driver = SinusoidDriver::new(cfg.l0, 0.01, 0.02).unwrap();
        let mats = alpha_beta(1).unwrap();
        let full = assemble_f_full(&cfg, 3.0, 0.0, &driver, &mats).unwrap().matrix;
        let plain = assemble_f(&cfg, 3.0, 0.0, &driver).unwrap().matrix;
        let q = mode_q_index(1);
        let rate = 0.01 * 0.02;
        let omega = PI / cfg.l0;
        assert_abs_diff_eq!(full[(q, q + 1)] - plain[(q, q + 1)], -rate * omega / (2.0 * PI), epsilon = 1e-18);
        assert_eq!(full[(q, q + 1)], full[(q + 1, q)]);
        let beta = PI / 6.0 + 1.0 / (4.0 * PI);
        let expected = rate * rate * omega / (4.0 * PI * PI) + 2.0 * rate * rate / cfg.l0 * beta;
        assert_abs_diff_eq!(full[(q, q)] - plain[(q, q)], expected, epsilon = 1e-16);
    }

    #[test]
    fn full_generator_is_symmetric() {
        let cfg = CavityConfig { n_modes: 5, ..CavityConfig::default() };
        let driver = SinusoidDriver::new(cfg.l0, 0.05, 0.3).unwrap();
        let mats = alpha_beta(5).unwrap();
        for &t in &[0.0, 1.3, 7.7] {
            let f = assemble_f_full(&cfg, t, t, &driver, &mats).unwrap().matrix;
            assert_eq!(f.clone(), f.transpose());
        }
    }
}
