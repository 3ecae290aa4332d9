//! Fixed-step fourth-order Runge–Kutta propagation of `Ṡ = Ω F(t) S`.
//!
//! Two entry points share the same step rule (`h = shortest period /
//! steps_per_period`) and the same symplectic audit:
//!
//! * [`evolve`] integrates in the lab frame for an arbitrary symmetric `F(t)`.
//! * [`evolve_rotating`] splits `F` into independent free rotations (applied
//!   exactly) plus `q_i q_j` couplings, and integrates only the couplings in
//!   the rotating frame. Cavity cycles go through this path: the free part
//!   carries the large frequencies, so RK4 only sees an `O(λ)` generator.
//!
//! When the propagator's symplectic defect exceeds the tolerance the step is
//! halved and the interval redone, up to `max_refinements` times.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{symplectic_defect, GaussianState, Propagator, SymplecticForm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub steps_per_period: usize,
    /// Accepted `max |SᵀΩS − Ω|`.
    pub symplectic_tolerance: f64,
    pub max_refinements: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { steps_per_period: 100, symplectic_tolerance: 1e-8, max_refinements: 4 }
    }
}

impl IntegratorConfig {
    pub fn halved(self) -> Self {
        Self { steps_per_period: self.steps_per_period * 2, ..self }
    }

    /// Number of equal steps covering `span` given the fastest angular
    /// frequency in play.
    pub fn step_count(&self, span: f64, max_frequency: f64) -> usize {
        if span <= 0.0 {
            return 0;
        }
        if max_frequency <= 0.0 {
            return 1;
        }
        let h = 2.0 * std::f64::consts::PI / max_frequency / self.steps_per_period as f64;
        ((span / h).ceil() as usize).max(1)
    }
}

/// A time-dependent quadratic Hamiltonian `H(t) = ½ xᵀ F(t) x`.
pub trait HamiltonianSource {
    fn n_oscillators(&self) -> usize;
    /// Largest angular frequency on the interval, used for step sizing.
    fn max_frequency(&self, t0: f64, t1: f64) -> f64;
    fn matrix_at(&self, t: f64) -> Result<DMatrix<f64>>;
}

/// A time-independent generator.
#[derive(Debug, Clone)]
pub struct ConstantHamiltonian {
    f: DMatrix<f64>,
    max_frequency: f64,
}

impl ConstantHamiltonian {
    pub fn new(f: DMatrix<f64>) -> Self {
        // Spectral radius of ΩF bounded by the largest absolute row sum of F.
        let max_frequency = f.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        Self { f, max_frequency }
    }
}

impl HamiltonianSource for ConstantHamiltonian {
    fn n_oscillators(&self) -> usize {
        self.f.nrows() / 2
    }

    fn max_frequency(&self, _: f64, _: f64) -> f64 {
        self.max_frequency
    }

    fn matrix_at(&self, _: f64) -> Result<DMatrix<f64>> {
        Ok(self.f.clone())
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: GaussianState,
    pub propagator: Propagator,
    pub steps: usize,
}

fn check_interval(t0: f64, t1: f64) -> Result<()> {
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(Error::Config(format!("invalid interval [{t0}, {t1}]")));
    }
    Ok(())
}

fn generator(form: &SymplecticForm, source: &dyn HamiltonianSource, t: f64) -> Result<DMatrix<f64>> {
    let f = source.matrix_at(t)?;
    if f.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("Hamiltonian entry at t = {t}")));
    }
    Ok(form.left_apply(&f))
}

fn lab_frame_propagator(source: &dyn HamiltonianSource, t0: f64, t1: f64, steps: usize) -> Result<DMatrix<f64>> {
    let n = source.n_oscillators();
    let form = SymplecticForm::new(n);
    let mut s = DMatrix::identity(2 * n, 2 * n);
    if steps == 0 {
        return Ok(s);
    }
    let h = (t1 - t0) / steps as f64;
    let mut a_start = generator(&form, source, t0)?;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let a_mid = generator(&form, source, t + 0.5 * h)?;
        let a_end = generator(&form, source, if k + 1 == steps { t1 } else { t + h })?;
        let k1 = &a_start * &s;
        let k2 = &a_mid * (&s + &k1 * (0.5 * h));
        let k3 = &a_mid * (&s + &k2 * (0.5 * h));
        let k4 = &a_end * (&s + &k3 * h);
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        a_start = a_end;
    }
    Ok(s)
}

/// Propagates `state` from `t0` to `t1` under `source`, returning the final
/// state and the propagator `S` with `σ(t1) = S σ(t0) Sᵀ`.
pub fn evolve(
    state: &GaussianState,
    source: &dyn HamiltonianSource,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<Evolution> {
    check_interval(t0, t1)?;
    if source.n_oscillators() != state.n_oscillators() {
        return Err(Error::Dimension { expected: state.n_oscillators(), got: source.n_oscillators() });
    }
    let max_frequency = source.max_frequency(t0, t1);
    let mut cfg = *config;
    let mut refinements = 0;
    loop {
        let steps = cfg.step_count(t1 - t0, max_frequency);
        let s = lab_frame_propagator(source, t0, t1, steps)?;
        let defect = symplectic_defect(&s);
        if defect <= config.symplectic_tolerance || refinements >= config.max_refinements {
            if defect > 10.0 * config.symplectic_tolerance {
                return Err(Error::SymplecticDefect {
                    defect,
                    tolerance: config.symplectic_tolerance,
                    refinements,
                });
            }
            let state = state.transformed(&s)?;
            return Ok(Evolution { state, propagator: Propagator { matrix: s, t0, t1 }, steps });
        }
        cfg = cfg.halved();
        refinements += 1;
    }
}

/// A Hamiltonian made of independent oscillators with (possibly time
/// dependent) frequencies plus `q_i q_j` couplings:
/// `H = Σ_k ω_k(t)(q_k² + p_k²)/2 + Σ_{(i,j)} g_ij(t) q_i q_j`.
pub trait RotatingFrameModel {
    fn n_oscillators(&self) -> usize;
    fn max_frequency(&self, t0: f64, t1: f64) -> f64;
    /// Free rotation angles `∫_{t0}^{t} ω_k` at `nodes` equally spaced times
    /// `t0, t0 + (t1 − t0)/(nodes − 1), ..., t1`, one row per node.
    fn free_phases(&self, t0: f64, t1: f64, nodes: usize) -> Result<Vec<Vec<f64>>>;
    /// Appends `(i, j, g_ij(t))` with `i != j` to `out`.
    fn couplings(&self, t: f64, out: &mut Vec<(usize, usize, f64)>) -> Result<()>;
}

#[derive(Debug, Clone)]
pub struct RotatingEvolution {
    /// Interaction-frame propagator `U` (the full map is `R(phases) · U`).
    pub interaction: Propagator,
    /// Free rotation angles accumulated over the interval.
    pub phases: Vec<f64>,
    pub steps: usize,
}

impl RotatingEvolution {
    /// Lab-frame propagator `R U`.
    pub fn full_propagator(&self) -> DMatrix<f64> {
        let mut s = self.interaction.matrix.clone();
        rotate_rows(&mut s, &self.phases);
        s
    }
}

/// Left-multiplies `m` by `⊕ R(θ_k)`.
pub(crate) fn rotate_rows(m: &mut DMatrix<f64>, phases: &[f64]) {
    for (k, &theta) in phases.iter().enumerate() {
        let (s, c) = theta.sin_cos();
        for col in 0..m.ncols() {
            let q = m[(2 * k, col)];
            let p = m[(2 * k + 1, col)];
            m[(2 * k, col)] = c * q + s * p;
            m[(2 * k + 1, col)] = -s * q + c * p;
        }
    }
}

/// Row-major scratch space for the rotating-frame RK4 loop.
struct Workspace {
    dim: usize,
    y: Vec<f64>,
    v: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let dim = 2 * n;
        Self { dim, y: vec![0.0; n * dim], v: vec![0.0; n * dim] }
    }

    /// `out = G u` where `G = Ω Rᵀ F_c R` for coupling list `pairs` and
    /// rotation angles with cosines `cos` and sines `sin`.
    fn apply(&mut self, pairs: &[(usize, usize, f64)], cos: &[f64], sin: &[f64], u: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let n = cos.len();
        for k in 0..n {
            let (qrow, prow) = (&u[2 * k * d..(2 * k + 1) * d], &u[(2 * k + 1) * d..(2 * k + 2) * d]);
            let y = &mut self.y[k * d..(k + 1) * d];
            for c in 0..d {
                y[c] = cos[k] * qrow[c] + sin[k] * prow[c];
            }
        }
        self.v.iter_mut().for_each(|x| *x = 0.0);
        for &(i, j, g) in pairs {
            for c in 0..d {
                self.v[i * d + c] += g * self.y[j * d + c];
            }
            for c in 0..d {
                self.v[j * d + c] += g * self.y[i * d + c];
            }
        }
        for k in 0..n {
            let v = &self.v[k * d..(k + 1) * d];
            let (qout, rest) = out[2 * k * d..(2 * k + 2) * d].split_at_mut(d);
            for c in 0..d {
                qout[c] = sin[k] * v[c];
                rest[c] = -cos[k] * v[c];
            }
        }
    }
}

fn rotating_propagator(
    model: &dyn RotatingFrameModel,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = model.n_oscillators();
    let d = 2 * n;
    let phases = model.free_phases(t0, t1, 2 * steps + 1)?;
    if phases.len() != 2 * steps + 1 || phases.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension { expected: n, got: phases.first().map_or(0, |r| r.len()) });
    }
    let mut u = vec![0.0; d * d];
    for i in 0..d {
        u[i * d + i] = 1.0;
    }
    if steps == 0 {
        return Ok((DMatrix::from_row_slice(d, d, &u), phases[0].clone()));
    }
    let h = (t1 - t0) / steps as f64;
    let mut ws = Workspace::new(n);
    let mut pairs = Vec::new();
    let trig = |node: usize| -> (Vec<f64>, Vec<f64>) { phases[node].iter().map(|t| (t.cos(), t.sin())).unzip() };
    let (mut cos0, mut sin0) = trig(0);
    let mut k1 = vec![0.0; d * d];
    let mut k2 = vec![0.0; d * d];
    let mut k3 = vec![0.0; d * d];
    let mut k4 = vec![0.0; d * d];
    let mut tmp = vec![0.0; d * d];
    let mut pairs_start = Vec::new();
    model.couplings(t0, &mut pairs_start)?;
    for step in 0..steps {
        let t = t0 + step as f64 * h;
        let (cos_m, sin_m) = trig(2 * step + 1);
        let (cos1, sin1) = trig(2 * step + 2);

        ws.apply(&pairs_start, &cos0, &sin0, &u, &mut k1);

        pairs.clear();
        model.couplings(t + 0.5 * h, &mut pairs)?;
        for (x, (a, b)) in tmp.iter_mut().zip(u.iter().zip(&k1)) {
            *x = a + 0.5 * h * b;
        }
        ws.apply(&pairs, &cos_m, &sin_m, &tmp, &mut k2);
        for (x, (a, b)) in tmp.iter_mut().zip(u.iter().zip(&k2)) {
            *x = a + 0.5 * h * b;
        }
        ws.apply(&pairs, &cos_m, &sin_m, &tmp, &mut k3);

        let mut pairs_end = Vec::new();
        model.couplings(if step + 1 == steps { t1 } else { t + h }, &mut pairs_end)?;
        for (x, (a, b)) in tmp.iter_mut().zip(u.iter().zip(&k3)) {
            *x = a + h * b;
        }
        ws.apply(&pairs_end, &cos1, &sin1, &tmp, &mut k4);

        for idx in 0..d * d {
            u[idx] += h / 6.0 * (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]);
        }
        if pairs_end.iter().any(|p| !p.2.is_finite()) {
            return Err(Error::NonFinite(format!("coupling at t = {}", t + h)));
        }
        pairs_start = pairs_end;
        cos0 = cos1;
        sin0 = sin1;
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("rotating-frame propagator".into()));
    }
    Ok((DMatrix::from_row_slice(d, d, &u), phases[2 * steps].clone()))
}

/// Propagator of a [`RotatingFrameModel`] over `[t0, t1]`.
pub fn evolve_rotating(
    model: &dyn RotatingFrameModel,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<RotatingEvolution> {
    check_interval(t0, t1)?;
    let max_frequency = model.max_frequency(t0, t1);
    let mut cfg = *config;
    let mut refinements = 0;
    loop {
        let steps = cfg.step_count(t1 - t0, max_frequency);
        let (u, phases) = rotating_propagator(model, t0, t1, steps)?;
        let defect = symplectic_defect(&u);
        if defect <= config.symplectic_tolerance || refinements >= config.max_refinements {
            if defect > 10.0 * config.symplectic_tolerance {
                return Err(Error::SymplecticDefect {
                    defect,
                    tolerance: config.symplectic_tolerance,
                    refinements,
                });
            }
            return Ok(RotatingEvolution { interaction: Propagator { matrix: u, t0, t1 }, phases, steps });
        }
        cfg = cfg.halved();
        refinements += 1;
    }
}
