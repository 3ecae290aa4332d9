//! Zero-mean Gaussian states of coupled oscillators.
//!
//! Quadratures are ordered `(q_1, p_1, q_2, p_2, ...)` with `q = (a + a†)/√2`
//! and `p = (a − a†)/(i√2)`, so the vacuum covariance is `I/2`. The first two
//! oscillators of a cavity state are the detectors, the rest are field modes.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tolerated `max |σ − σᵀ|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Slack below 1/2 tolerated on symplectic eigenvalues.
pub const UNCERTAINTY_SLACK: f64 = 1e-9;

/// The block-diagonal symplectic form `⊕ [[0, 1], [−1, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    n_oscillators: usize,
}

impl SymplecticForm {
    pub fn new(n_oscillators: usize) -> Self {
        Self { n_oscillators }
    }

    pub fn n_oscillators(&self) -> usize {
        self.n_oscillators
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let d = 2 * self.n_oscillators;
        let mut omega = DMatrix::zeros(d, d);
        for k in 0..self.n_oscillators {
            omega[(2 * k, 2 * k + 1)] = 1.0;
            omega[(2 * k + 1, 2 * k)] = -1.0;
        }
        omega
    }

    /// `Ω·m` without materialising Ω.
    pub fn left_apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for k in 0..self.n_oscillators {
            out.row_mut(2 * k).copy_from(&m.row(2 * k + 1));
            out.row_mut(2 * k + 1).copy_from(&(-m.row(2 * k)));
        }
        out
    }
}

/// Maximum absolute entry of `a − b`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Phase-space rotation generated by `(q² + p²)/2` over angle `theta`.
pub fn rotation_block(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, s, -s, c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    sigma: DMatrix<f64>,
}

impl GaussianState {
    pub fn vacuum(n_oscillators: usize) -> Self {
        Self { sigma: DMatrix::identity(2 * n_oscillators, 2 * n_oscillators) * 0.5 }
    }

    /// Every oscillator thermal with mean occupation `nbar`.
    pub fn thermal(n_oscillators: usize, nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0) || !nbar.is_finite() {
            return Err(Error::Config(format!("thermal occupation must be >= 0, got {nbar}")));
        }
        Ok(Self {
            sigma: DMatrix::identity(2 * n_oscillators, 2 * n_oscillators) * (nbar + 0.5),
        })
    }

    /// Two-mode squeezed vacuum of squeezing `r` on oscillators (0, 1).
    pub fn two_mode_squeezed(r: f64) -> Self {
        let c = 0.5 * (2.0 * r).cosh();
        let s = 0.5 * (2.0 * r).sinh();
        #[rustfmt::skip]
        let sigma = DMatrix::from_row_slice(4, 4, &[
            c, 0.0, s, 0.0,
            0.0, c, 0.0, -s,
            s, 0.0, c, 0.0,
            0.0, -s, 0.0, c,
        ]);
        Self { sigma }
    }

    /// Validates symmetry and finiteness. Physicality is checked separately by
    /// [`GaussianState::validate_physical`] because it costs an eigensolve.
    pub fn from_covariance(sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != sigma.ncols() || sigma.nrows() % 2 != 0 {
            return Err(Error::Dimension { expected: 2 * (sigma.nrows() / 2), got: sigma.ncols() });
        }
        if sigma.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("covariance entry".into()));
        }
        let asymmetry = max_asymmetry(&sigma);
        if asymmetry > SYMMETRY_TOLERANCE {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(Self { sigma })
    }

    pub(crate) fn from_raw(sigma: DMatrix<f64>) -> Self {
        Self { sigma }
    }

    pub fn n_oscillators(&self) -> usize {
        self.sigma.nrows() / 2
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn into_covariance(self) -> DMatrix<f64> {
        self.sigma
    }

    /// Replaces the 2×2 block of one oscillator (cross terms are left alone).
    pub fn set_local_block(&mut self, k: usize, block: &Matrix2<f64>) {
        self.sigma.fixed_view_mut::<2, 2>(2 * k, 2 * k).copy_from(block);
    }

    pub fn validate_physical(&self) -> Result<()> {
        let nu = symplectic_eigenvalues(&self.sigma)?;
        let nu_min = nu.first().copied().unwrap_or(0.5);
        if nu_min < 0.5 - UNCERTAINTY_SLACK {
            return Err(Error::InvalidCovariance { nu_min });
        }
        Ok(())
    }

    pub fn determinant(&self) -> f64 {
        self.sigma.determinant()
    }

    /// `S σ Sᵀ`, symmetrised to suppress round-off drift.
    pub fn transformed(&self, s: &DMatrix<f64>) -> Result<Self> {
        if s.nrows() != self.sigma.nrows() || s.ncols() != self.sigma.ncols() {
            return Err(Error::Dimension { expected: self.sigma.nrows(), got: s.nrows() });
        }
        let mut out = s * &self.sigma * s.transpose();
        symmetrize(&mut out);
        Ok(Self { sigma: out })
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// A linear symplectic map over `[t0, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub matrix: DMatrix<f64>,
    pub t0: f64,
    pub t1: f64,
}

impl Propagator {
    pub fn identity(n_oscillators: usize, t: f64) -> Self {
        let d = 2 * n_oscillators;
        Self { matrix: DMatrix::identity(d, d), t0: t, t1: t }
    }

    /// `max |SᵀΩS − Ω|`.
    pub fn symplectic_defect(&self) -> f64 {
        symplectic_defect(&self.matrix)
    }

    pub fn apply(&self, state: &GaussianState) -> Result<GaussianState> {
        state.transformed(&self.matrix)
    }
}

pub fn symplectic_defect(s: &DMatrix<f64>) -> f64 {
    let form = SymplecticForm::new(s.nrows() / 2);
    let omega = form.matrix();
    let lhs = s.transpose() * form.left_apply(s);
    max_abs_diff(&lhs, &omega)
}

/// Symplectic eigenvalues of `sigma`, ascending, each reported once.
pub fn symplectic_eigenvalues(sigma: &DMatrix<f64>) -> Result<Vec<f64>> {
    if sigma.nrows() != sigma.ncols() || sigma.nrows() % 2 != 0 {
        return Err(Error::Dimension { expected: 2 * (sigma.nrows() / 2), got: sigma.ncols() });
    }
    let asymmetry = max_asymmetry(sigma);
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let n = sigma.nrows() / 2;
    let form = SymplecticForm::new(n);

    // For σ > 0 the spectrum of iΩσ equals that of the Hermitian matrix
    // σ^{1/2} iΩ σ^{1/2}; its square is the symmetric −(σ^{1/2}Ωσ^{1/2})².
    let eig = sigma.clone().symmetric_eigen();
    let mut nu: Vec<f64> = if eig.eigenvalues.iter().all(|&x| x > 0.0) {
        let sqrt_sigma = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
            * eig.eigenvectors.transpose();
        let m = &sqrt_sigma * form.left_apply(&sqrt_sigma);
        let mut mm = m.transpose() * &m;
        symmetrize(&mut mm);
        mm.symmetric_eigen().eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect()
    } else {
        form.left_apply(sigma).complex_eigenvalues().iter().map(|z| z.norm()).collect()
    };
    nu.sort_by(|a, b| a.total_cmp(b));
    Ok(nu.chunks(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect())
}

/// Leading 4×4 block (the two detectors) of a cavity state.
pub fn reduce_to_detectors(state: &GaussianState) -> Result<Matrix4<f64>> {
    if state.n_oscillators() < 2 {
        return Err(Error::Dimension { expected: 2, got: state.n_oscillators() });
    }
    Ok(state.sigma.fixed_view::<4, 4>(0, 0).into_owned())
}

/// Applies an independent rotation `R(θ_k)` to every oscillator.
pub fn free_rotation(state: &GaussianState, phases: &[f64]) -> Result<GaussianState> {
    let n = state.n_oscillators();
    if phases.len() != n {
        return Err(Error::Dimension { expected: n, got: phases.len() });
    }
    let blocks: Vec<Matrix2<f64>> = phases.iter().map(|&t| rotation_block(t)).collect();
    let mut out = state.sigma.clone();
    for i in 0..n {
        for j in i..n {
            let b = blocks[i] * state.sigma.fixed_view::<2, 2>(2 * i, 2 * j) * blocks[j].transpose();
            out.fixed_view_mut::<2, 2>(2 * i, 2 * j).copy_from(&b);
            if i != j {
                out.fixed_view_mut::<2, 2>(2 * j, 2 * i).copy_from(&b.transpose());
            }
        }
    }
    Ok(GaussianState { sigma: out })
}

fn det2(m: &Matrix4<f64>, r: usize, c: usize) -> f64 {
    m[(r, c)] * m[(r + 1, c + 1)] - m[(r, c + 1)] * m[(r + 1, c)]
}

/// Two-mode invariants `(det A + det B, det C, det σ)`.
fn two_mode_invariants(block: &Matrix4<f64>) -> (f64, f64, f64) {
    let a = det2(block, 0, 0);
    let b = det2(block, 2, 2);
    let c = det2(block, 0, 2);
    (a + b, c, block.determinant())
}

/// Smallest partially transposed symplectic eigenvalue from the closed form
/// `ν̃₋² = (Δ̃ − √(Δ̃² − 4 det σ))/2`. Loses accuracy near `ν̃₋ ≈ ν̃₊`.
pub fn partial_transpose_nu_closed_form(block: &Matrix4<f64>) -> f64 {
    let (ab, c, det) = two_mode_invariants(block);
    let delta = ab - 2.0 * c;
    let radicand = (delta * delta - 4.0 * det).max(0.0);
    (0.5 * (delta - radicand.sqrt())).max(0.0).sqrt()
}

/// Logarithmic negativity (base 2) of a two-mode covariance `[[A, C], [Cᵀ, B]]`.
pub fn log_negativity(block: &Matrix4<f64>) -> Result<f64> {
    if block.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("two-mode covariance".into()));
    }
    let sigma = DMatrix::from_iterator(4, 4, block.iter().copied());
    let nu = symplectic_eigenvalues(&sigma)?;
    if nu[0] < 0.5 - UNCERTAINTY_SLACK {
        return Err(Error::InvalidCovariance { nu_min: nu[0] });
    }
    let (ab, c, det) = two_mode_invariants(block);
    let delta_pt = ab - 2.0 * c;
    let radicand = delta_pt * delta_pt - 4.0 * det;
    if radicand < -1e-9 * delta_pt.abs().max(1.0) {
        return Err(Error::NegativeRadicand(radicand));
    }
    // Partial transposition flips p of the second mode.
    let mut transposed = sigma;
    for k in 0..4 {
        transposed[(3, k)] = -transposed[(3, k)];
        transposed[(k, 3)] = -transposed[(k, 3)];
    }
    let nu_pt = symplectic_eigenvalues(&transposed)?[0];
    Ok((-(2.0 * nu_pt).log2()).max(0.0))
}
