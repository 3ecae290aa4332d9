use std::f64::consts::{LOG2_E, PI};

use cavityfarm::cavity::{CavityConfig, CycleHamiltonian};
use cavityfarm::drivers::StaticDriver;
use cavityfarm::gaussian::{
    log_negativity, max_abs_diff, partial_transpose_nu_closed_form, symplectic_defect, symplectic_eigenvalues,
    GaussianState, SymplecticForm,
};
use cavityfarm::integrate::{evolve, evolve_rotating, ConstantHamiltonian, IntegratorConfig};
use nalgebra::{DMatrix, Matrix4};
use proptest::prelude::*;

fn block(state: &GaussianState) -> Matrix4<f64> {
    state.covariance().fixed_view::<4, 4>(0, 0).into_owned()
}

/// Log negativity of the two-mode squeezed vacuum from its density matrix in
/// a Fock basis truncated at `cutoff` quanta per mode.
fn fock_log_negativity(r: f64, cutoff: usize) -> f64 {
    let d = cutoff + 1;
    let x = r.tanh();
    let mut amp: Vec<f64> = (0..d).map(|n| x.powi(n as i32)).collect();
    let norm = amp.iter().map(|a| a * a).sum::<f64>().sqrt();
    amp.iter_mut().for_each(|a| *a /= norm);
    // ρ = Σ c_m c_n |m m⟩⟨n n|; transposing the second factor maps it to
    // |m n⟩⟨n m|.
    let idx = |a: usize, b: usize| a * d + b;
    let mut pt = DMatrix::<f64>::zeros(d * d, d * d);
    for m in 0..d {
        for n in 0..d {
            pt[(idx(m, n), idx(n, m))] += amp[m] * amp[n];
        }
    }
    let trace_norm: f64 = pt.symmetric_eigen().eigenvalues.iter().map(|l| l.abs()).sum();
    trace_norm.log2()
}

#[test]
fn squeezed_vacuum_matches_fock_partial_transpose() {
    for &r in &[0.05, 0.1, 0.25, 0.4, 0.5] {
        let en = log_negativity(&block(&GaussianState::two_mode_squeezed(r))).unwrap();
        let oracle = fock_log_negativity(r, 20);
        assert!((en - oracle).abs() < 1e-6, "r = {r}: {en} vs {oracle}");
        assert!((en - 2.0 * r * LOG2_E).abs() < 1e-6, "r = {r}: {en}");
    }
}

#[test]
fn product_states_carry_no_entanglement() {
    for nbar in [0.0, 0.3, 2.0] {
        let s = GaussianState::thermal(2, nbar).unwrap();
        assert_eq!(log_negativity(&block(&s)).unwrap(), 0.0);
    }
}

fn random_symmetric(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let d = 2 * n;
    let mut f = DMatrix::from_fn(d, d, |i, j| entries[(i * d + j) % entries.len()]);
    f = (&f + f.transpose()) * 0.5;
    f
}

#[test]
fn constant_generator_matches_matrix_exponential() {
    let f = random_symmetric(3, &[0.7, -0.2, 0.1, 0.4, 0.05, -0.3, 0.25, 0.6, -0.45]);
    let config = IntegratorConfig::default();
    let ev = evolve(&GaussianState::vacuum(3), &ConstantHamiltonian::new(f.clone()), 0.0, 2.5, &config).unwrap();
    let omega = SymplecticForm::new(3).matrix();
    let oracle = (omega * f * 2.5).exp();
    assert!(max_abs_diff(&ev.propagator.matrix, &oracle) < 1e-8);
}

#[test]
fn halving_step_shrinks_defect_eightfold() {
    let f = random_symmetric(2, &[1.1, 0.3, -0.2, 0.8, 0.15, 0.9, -0.4]);
    let source = ConstantHamiltonian::new(f);
    let coarse = IntegratorConfig { steps_per_period: 6, symplectic_tolerance: 1.0, max_refinements: 0 };
    let a = evolve(&GaussianState::vacuum(2), &source, 0.0, 3.0, &coarse).unwrap();
    let b = evolve(&GaussianState::vacuum(2), &source, 0.0, 3.0, &coarse.halved()).unwrap();
    let (da, db) = (a.propagator.symplectic_defect(), b.propagator.symplectic_defect());
    assert!(da >= 8.0 * db, "{da:e} vs {db:e}");
}

#[test]
fn cavity_propagator_agrees_between_frames() {
    let config = CavityConfig { n_modes: 4, ..CavityConfig::default() };
    let driver = StaticDriver::new(config.l0).unwrap();
    let model = CycleHamiltonian::new(&config, &driver, 0.0);
    let t1 = config.interaction_time;
    let rotating = evolve_rotating(&model, 0.0, t1, &config.integrator).unwrap().full_propagator();
    let lab = evolve(&GaussianState::vacuum(config.n_oscillators()), &model, 0.0, t1, &config.integrator)
        .unwrap()
        .propagator
        .matrix;
    assert!(symplectic_defect(&rotating) < 1e-8);
    assert!(max_abs_diff(&rotating, &lab) < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gaussian_unitaries_keep_pure_states_pure(
        entries in prop::collection::vec(-1.0f64..1.0, 9..16),
        t in 0.1f64..3.0,
    ) {
        let f = random_symmetric(3, &entries);
        let ev = evolve(&GaussianState::vacuum(3), &ConstantHamiltonian::new(f), 0.0, t, &IntegratorConfig::default()).unwrap();
        prop_assert!(ev.propagator.symplectic_defect() <= 1e-8);
        let scale = ev.state.covariance().amax().max(1.0);
        for nu in symplectic_eigenvalues(ev.state.covariance()).unwrap() {
            prop_assert!(nu >= 0.5 - 1e-9, "nu = {}", nu);
            prop_assert!((nu - 0.5).abs() < 1e-9 * scale, "nu = {}", nu);
        }
    }

    #[test]
    fn determinant_conserved_under_closed_evolution(
        entries in prop::collection::vec(-1.0f64..1.0, 9..16),
        nbar in 0.0f64..3.0,
        t in 0.1f64..3.0,
    ) {
        let f = random_symmetric(3, &entries);
        let start = GaussianState::thermal(3, nbar).unwrap();
        let ev = evolve(&start, &ConstantHamiltonian::new(f), 0.0, t, &IntegratorConfig::default()).unwrap();
        let (d0, d1) = (start.determinant(), ev.state.determinant());
        prop_assert!(((d1 - d0) / d0).abs() < 1e-8, "{} vs {}", d0, d1);
    }

    #[test]
    fn squeezed_negativity_is_linear_in_r(r in 0.0f64..2.0) {
        let en = log_negativity(&block(&GaussianState::two_mode_squeezed(r))).unwrap();
        prop_assert!((en - 2.0 * r * LOG2_E).abs() < 1e-9);
    }

    #[test]
    fn eigen_and_closed_form_agree(
        entries in prop::collection::vec(-1.0f64..1.0, 9..16),
        nbar in 0.0f64..1.0,
        t in 0.1f64..2.0,
    ) {
        let f = random_symmetric(2, &entries);
        let start = GaussianState::thermal(2, nbar).unwrap();
        let ev = evolve(&start, &ConstantHamiltonian::new(f), 0.0, t, &IntegratorConfig::default()).unwrap();
        let b = block(&ev.state);
        let en = log_negativity(&b).unwrap();
        let closed = (-(2.0 * partial_transpose_nu_closed_form(&b)).log2()).max(0.0);
        prop_assert!((en - closed).abs() < 1e-6, "{} vs {}", en, closed);
    }

    #[test]
    fn local_rotations_leave_negativity_unchanged(r in 0.0f64..1.5, a in 0.0f64..(2.0 * PI), b in 0.0f64..(2.0 * PI)) {
        let s = GaussianState::two_mode_squeezed(r);
        let rotated = cavityfarm::gaussian::free_rotation(&s, &[a, b]).unwrap();
        let x = log_negativity(&block(&s)).unwrap();
        let y = log_negativity(&block(&rotated)).unwrap();
        prop_assert!((x - y).abs() < 1e-9);
    }
}
