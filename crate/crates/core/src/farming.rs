//! The farming protocol: fresh ground-state detector pairs repeatedly
//! interact with the cavity field, then leave it to evolve freely.
//!
//! Stage one iterates cycles at the rest length until the exiting detector
//! covariance stops changing. Stage two continues from that state while the
//! cavity length follows a [`LengthDriver`], with global time starting at the
//! onset of the perturbation.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::cavity::{delay_phases, CavityConfig, CycleHamiltonian, ReadoutPicture, DETECTORS};
use crate::drivers::{adiabaticity_figure, LengthDriver, StaticDriver};
use crate::error::{Error, Result};
use crate::gaussian::{log_negativity, reduce_to_detectors, rotation_block, symmetrize, GaussianState};
use crate::integrate::{evolve_rotating, rotate_rows};

/// Default convergence threshold on `max |Δσ_det|` between cycles.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_CYCLES: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle_index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub detector_cov: Matrix4<f64>,
    pub log_negativity: f64,
    /// `⟨q₁p₂ + p₂q₁⟩ = 2⟨q₁p₂⟩`.
    pub corr_q1p2: f64,
}

impl CycleRecord {
    fn new(cycle_index: usize, t_start: f64, t_end: f64, detector_cov: Matrix4<f64>) -> Result<Self> {
        Ok(Self {
            cycle_index,
            t_start,
            t_end,
            log_negativity: log_negativity(&detector_cov)?,
            corr_q1p2: 2.0 * detector_cov[(0, 3)],
            detector_cov,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialFieldSpec {
    Vacuum,
    /// Every mode thermal with occupation `nbar`.
    Thermal { nbar: f64 },
    /// Mode `mode` (1-based) squeezed by `r`, the rest in vacuum.
    Squeezed { r: f64, mode: usize },
}

impl Default for InitialFieldSpec {
    fn default() -> Self {
        Self::Vacuum
    }
}

impl InitialFieldSpec {
    /// Global state with ground-state detectors and this field state.
    pub fn state(&self, config: &CavityConfig) -> Result<GaussianState> {
        let n = config.n_oscillators();
        let mut state = GaussianState::vacuum(n);
        match *self {
            InitialFieldSpec::Vacuum => {}
            InitialFieldSpec::Thermal { nbar } => {
                if !(nbar >= 0.0) {
                    return Err(Error::Config(format!("thermal occupation must be >= 0, got {nbar}")));
                }
                for k in DETECTORS..n {
                    state.set_local_block(k, &(Matrix2::identity() * (nbar + 0.5)));
                }
            }
            InitialFieldSpec::Squeezed { r, mode } => {
                if mode < 1 || mode > config.n_modes {
                    return Err(Error::Config(format!("squeezed mode {mode} outside 1..={}", config.n_modes)));
                }
                let block = Matrix2::new(0.5 * (-2.0 * r).exp(), 0.0, 0.0, 0.5 * (2.0 * r).exp());
                state.set_local_block(DETECTORS + mode - 1, &block);
            }
        }
        Ok(state)
    }
}

/// Resets both detectors to their ground state and removes their
/// correlations with the field.
pub fn inject_fresh_pair(state: &GaussianState) -> GaussianState {
    let mut sigma = state.covariance().clone();
    let d = sigma.nrows();
    let det = 2 * DETECTORS;
    sigma.view_mut((0, 0), (det, d)).fill(0.0);
    sigma.view_mut((0, 0), (d, det)).fill(0.0);
    for i in 0..det {
        sigma[(i, i)] = 0.5;
    }
    GaussianState::from_raw(sigma)
}

/// Everything needed to push a state through one cycle starting at a given
/// global time. At a static length every cycle shares the same kernel.
#[derive(Debug, Clone)]
pub struct CycleKernel {
    interaction: DMatrix<f64>,
    /// Free angles over the interaction window, per oscillator.
    exit_phases: Vec<f64>,
    /// Free angles over the whole cycle (interaction plus delay).
    cycle_phases: Vec<f64>,
    t_start: f64,
    interaction_time: f64,
    cycle_time: f64,
    readout: ReadoutPicture,
    pub steps: usize,
}

impl CycleKernel {
    pub fn build(config: &CavityConfig, driver: &dyn LengthDriver, t_start: f64) -> Result<Self> {
        let model = CycleHamiltonian::new(config, driver, t_start);
        let t_int = config.interaction_time;
        let evolution = evolve_rotating(&model, 0.0, t_int, &config.integrator)?;
        let mut cycle_phases = evolution.phases.clone();
        let gap = config.gap();
        for phase in cycle_phases.iter_mut().take(DETECTORS) {
            *phase += gap * config.delay;
        }
        if config.delay > 0.0 {
            let extra = delay_phases(config, driver, t_start + t_int, t_start + t_int + config.delay)?;
            for (phase, add) in cycle_phases[DETECTORS..].iter_mut().zip(extra) {
                *phase += add;
            }
        }
        Ok(Self {
            interaction: evolution.interaction.matrix,
            exit_phases: evolution.phases,
            cycle_phases,
            t_start,
            interaction_time: t_int,
            cycle_time: config.cycle_time(),
            readout: config.readout,
            steps: evolution.steps,
        })
    }

    /// Interaction-frame propagator of the coupling window.
    pub fn interaction_propagator(&self) -> &DMatrix<f64> {
        &self.interaction
    }

    /// Runs one cycle: inject, interact, read out, then drift to the next
    /// injection.
    pub fn apply(&self, state: &GaussianState, cycle_index: usize) -> Result<(GaussianState, CycleRecord)> {
        let fresh = inject_fresh_pair(state);
        let mut sigma = &self.interaction * fresh.covariance() * self.interaction.transpose();
        symmetrize(&mut sigma);
        let rotating = GaussianState::from_raw(sigma);

        let mut detector_cov = reduce_to_detectors(&rotating)?;
        if self.readout == ReadoutPicture::Schrodinger {
            let mut rot = Matrix4::zeros();
            for k in 0..DETECTORS {
                rot.fixed_view_mut::<2, 2>(2 * k, 2 * k).copy_from(&rotation_block(self.exit_phases[k]));
            }
            detector_cov = rot * detector_cov * rot.transpose();
        }
        let record = CycleRecord::new(
            cycle_index,
            self.t_start,
            self.t_start + self.interaction_time,
            detector_cov,
        )?;

        let mut s = DMatrix::identity(sigma_dim(&rotating), sigma_dim(&rotating));
        rotate_rows(&mut s, &self.cycle_phases);
        let out = rotating.transformed(&s)?;
        Ok((out, record))
    }

    pub fn cycle_time(&self) -> f64 {
        self.cycle_time
    }
}

fn sigma_dim(state: &GaussianState) -> usize {
    2 * state.n_oscillators()
}

/// One full cycle beginning at global time `t_start`.
pub fn run_cycle(
    state: &GaussianState,
    config: &CavityConfig,
    driver: &dyn LengthDriver,
    t_start: f64,
    cycle_index: usize,
) -> Result<(GaussianState, CycleRecord)> {
    if state.n_oscillators() != config.n_oscillators() {
        return Err(Error::Dimension { expected: config.n_oscillators(), got: state.n_oscillators() });
    }
    CycleKernel::build(config, driver, t_start)?.apply(state, cycle_index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub converged: bool,
    pub cycles_used: usize,
    pub residual: f64,
    pub tolerance: f64,
    /// Global state right before the next injection.
    pub field_state: GaussianState,
    /// Readout of the last cycle run.
    pub record: CycleRecord,
}

fn max_abs_diff4(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    (a - b).amax()
}

/// Iterates cycles at the rest length until successive detector covariances
/// differ by less than `tol`.
pub fn run_to_fixed_point(
    initial: &InitialFieldSpec,
    config: &CavityConfig,
    tol: f64,
    max_cycles: usize,
) -> Result<FixedPointReport> {
    run_to_fixed_point_from(initial.state(config)?, config, tol, max_cycles)
}

/// As [`run_to_fixed_point`] from an explicit global state.
pub fn run_to_fixed_point_from(
    initial: GaussianState,
    config: &CavityConfig,
    tol: f64,
    max_cycles: usize,
) -> Result<FixedPointReport> {
    config.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    if max_cycles < 2 {
        return Err(Error::Config(format!("max_cycles must be at least 2, got {max_cycles}")));
    }
    if initial.n_oscillators() != config.n_oscillators() {
        return Err(Error::Dimension { expected: config.n_oscillators(), got: initial.n_oscillators() });
    }
    let driver = StaticDriver::new(config.l0)?;
    let kernel = CycleKernel::build(config, &driver, 0.0)?;
    let mut state = initial;
    let mut previous: Option<CycleRecord> = None;
    let mut residual = f64::INFINITY;
    for cycle in 0..max_cycles {
        let (next, record) = kernel.apply(&state, cycle)?;
        state = next;
        if let Some(prev) = &previous {
            residual = max_abs_diff4(&prev.detector_cov, &record.detector_cov);
            if residual < tol {
                return Ok(FixedPointReport {
                    converged: true,
                    cycles_used: cycle + 1,
                    residual,
                    tolerance: tol,
                    field_state: state,
                    record,
                });
            }
        }
        previous = Some(record);
    }
    Ok(FixedPointReport {
        converged: false,
        cycles_used: max_cycles,
        residual,
        tolerance: tol,
        field_state: state,
        record: previous.expect("max_cycles >= 2"),
    })
}

/// Runs `n_cycles` cycles from a converged fixed point while the cavity length
/// follows `driver`; cycle `k` starts at global time `k (T + Δt)`.
pub fn run_perturbed(
    fixed_point: &FixedPointReport,
    config: &CavityConfig,
    driver: &dyn LengthDriver,
    n_cycles: usize,
) -> Result<Vec<CycleRecord>> {
    let mut records = Vec::with_capacity(n_cycles);
    run_perturbed_with(fixed_point, config, driver, n_cycles, |r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok(records)
}

/// Streaming form of [`run_perturbed`]: `sink` sees every record in order.
pub fn run_perturbed_with<F>(
    fixed_point: &FixedPointReport,
    config: &CavityConfig,
    driver: &dyn LengthDriver,
    n_cycles: usize,
    mut sink: F,
) -> Result<GaussianState>
where
    F: FnMut(&CycleRecord) -> Result<()>,
{
    config.validate()?;
    if !fixed_point.converged {
        return Err(Error::NotConverged { cycles: fixed_point.cycles_used, residual: fixed_point.residual });
    }
    if n_cycles < 1 {
        return Err(Error::Config("at least one perturbed cycle is required".into()));
    }
    let period = config.cycle_time();
    let span = period * n_cycles as f64;
    let wall_speed = adiabaticity_figure(driver, 0.0, span)?;
    if wall_speed > 0.1 {
        log::warn!("max |dL/dt| = {wall_speed:.3e} over the run; adiabatic treatment is questionable");
    }
    let mut state = fixed_point.field_state.clone();
    let shared = if driver.is_static() { Some(CycleKernel::build(config, driver, 0.0)?) } else { None };
    for k in 0..n_cycles {
        let t_start = k as f64 * period;
        let built;
        let kernel = match &shared {
            Some(kernel) => kernel,
            None => {
                built = CycleKernel::build(config, driver, t_start)?;
                &built
            }
        };
        let (next, mut record) = kernel.apply(&state, k)?;
        record.t_start = t_start;
        record.t_end = t_start + config.interaction_time;
        sink(&record)?;
        state = next;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::max_abs_diff;

    fn small_config() -> CavityConfig {
        CavityConfig { n_modes: 3, ..CavityConfig::default() }
    }

    #[test]
    fn injection_resets_detectors_only() {
        let cfg = small_config();
        let state = InitialFieldSpec::Thermal { nbar: 0.7 }.state(&cfg).unwrap();
        let driver = StaticDriver::new(cfg.l0).unwrap();
        let (entangled, _) = run_cycle(&state, &cfg, &driver, 0.0, 0).unwrap();
        let fresh = inject_fresh_pair(&entangled);
        assert_eq!(reduce_to_detectors(&fresh).unwrap(), Matrix4::identity() * 0.5);
        let d = fresh.covariance().nrows();
        let field_in = entangled.covariance().view((4, 4), (d - 4, d - 4)).into_owned();
        let field_out = fresh.covariance().view((4, 4), (d - 4, d - 4)).into_owned();
        assert_eq!(field_in, field_out);
        assert!(fresh.covariance().view((0, 4), (4, d - 4)).iter().all(|&x| x == 0.0));
        let vac = GaussianState::vacuum(5);
        assert_eq!(inject_fresh_pair(&vac), vac);
    }

    #[test]
    fn zero_coupling_gives_vacuum_records() {
        let cfg = CavityConfig { lambda: 0.0, ..small_config() };
        let driver = StaticDriver::new(cfg.l0).unwrap();
        let (_, record) = run_cycle(&GaussianState::vacuum(5), &cfg, &driver, 0.0, 0).unwrap();
        assert_eq!(record.detector_cov, Matrix4::identity() * 0.5);
        assert_eq!(record.log_negativity, 0.0);
        assert_eq!(record.corr_q1p2, 0.0);
        let report = run_to_fixed_point(&InitialFieldSpec::Vacuum, &cfg, 1e-9, 10).unwrap();
        assert!(report.converged);
        assert_eq!(report.cycles_used, 2);
        assert_eq!(report.residual, 0.0);
    }

    #[test]
    fn bad_arguments_rejected() {
        let cfg = small_config();
        assert!(run_to_fixed_point(&InitialFieldSpec::Vacuum, &cfg, 0.0, 10).is_err());
        assert!(run_to_fixed_point(&InitialFieldSpec::Vacuum, &cfg, 1e-9, 1).is_err());
        assert!(InitialFieldSpec::Squeezed { r: 0.5, mode: 4 }.state(&cfg).is_err());
        assert!(InitialFieldSpec::Thermal { nbar: -1.0 }.state(&cfg).is_err());
        let driver = StaticDriver::new(cfg.l0).unwrap();
        assert!(run_cycle(&GaussianState::vacuum(3), &cfg, &driver, 0.0, 0).is_err());
    }

    #[test]
    fn unconverged_fixed_point_cannot_seed_stage_two() {
        let cfg = small_config();
        let report = run_to_fixed_point(&InitialFieldSpec::Vacuum, &cfg, 1e-300, 3).unwrap();
        assert!(!report.converged);
        assert_eq!(report.cycles_used, 3);
        let driver = StaticDriver::new(cfg.l0).unwrap();
        assert!(matches!(run_perturbed(&report, &cfg, &driver, 2), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn readout_picture_only_rotates_detectors() {
        let cfg = small_config();
        let sch = CavityConfig { readout: ReadoutPicture::Schrodinger, ..cfg.clone() };
        let driver = StaticDriver::new(cfg.l0).unwrap();
        let state = GaussianState::vacuum(5);
        let (a_state, a) = run_cycle(&state, &cfg, &driver, 0.0, 0).unwrap();
        let (b_state, b) = run_cycle(&state, &sch, &driver, 0.0, 0).unwrap();
        assert_eq!(a_state, b_state);
        assert!((a.log_negativity - b.log_negativity).abs() < 1e-12);
        assert!(max_abs_diff(
            &DMatrix::from_iterator(4, 4, a.detector_cov.iter().copied()),
            &DMatrix::from_iterator(4, 4, b.detector_cov.iter().copied())
        ) > 0.0);
    }
}
