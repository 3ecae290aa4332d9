//! Covariance-matrix basics: squeezed and thermal states, log negativity,
//! symplectic spectra and free rotations.

use cavityfarm::gaussian::{free_rotation, log_negativity, symplectic_eigenvalues, GaussianState};
use nalgebra::Matrix4;

fn main() -> cavityfarm::Result<()> {
    for r in [0.0, 0.25, 0.5, 1.0] {
        let state = GaussianState::two_mode_squeezed(r);
        let block: Matrix4<f64> = state.covariance().fixed_view::<4, 4>(0, 0).into_owned();
        let en = log_negativity(&block)?;
        println!("r = {r:4}: E_N = {en:.6} (2r/ln2 = {:.6})", 2.0 * r / std::f64::consts::LN_2);
    }

    let thermal = GaussianState::thermal(3, 0.5)?;
    println!("thermal nbar = 0.5, nu = {:?}", symplectic_eigenvalues(thermal.covariance())?);

    // A local rotation of one oscillator leaves entanglement untouched.
    let state = GaussianState::two_mode_squeezed(0.5);
    let turned = free_rotation(&state, &[0.3, -1.1])?;
    let block: Matrix4<f64> = turned.covariance().fixed_view::<4, 4>(0, 0).into_owned();
    println!("after rotation E_N = {:.6}", log_negativity(&block)?);
    Ok(())
}
