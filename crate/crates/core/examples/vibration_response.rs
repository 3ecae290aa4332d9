//! Perturbs the f = 5 steady state with a slow sinusoidal wall motion and
//! prints the detector observables every 50 cycles.

use std::f64::consts::PI;

use cavityfarm::cavity::CavityConfig;
use cavityfarm::drivers::SinusoidDriver;
use cavityfarm::farming::{run_perturbed_with, run_to_fixed_point, InitialFieldSpec, DEFAULT_TOLERANCE};

fn main() -> cavityfarm::Result<()> {
    let cfg = CavityConfig::default().with_f(5.0)?;
    let fp = run_to_fixed_point(&InitialFieldSpec::Vacuum, &cfg, DEFAULT_TOLERANCE, 5000)?;
    println!("steady state: E_N = {:.3e}, 2<q1p2> = {:.4e}", fp.record.log_negativity, fp.record.corr_q1p2);

    let gamma = 4e-3 * PI / cfg.l0;
    let driver = SinusoidDriver::new(cfg.l0, 1e-3 * cfg.l0, gamma)?;
    let cycles = (driver.period() / cfg.cycle_time()).ceil() as usize;
    println!("cycle,t,E_N,corr_q1p2");
    run_perturbed_with(&fp, &cfg, &driver, cycles, |r| {
        if r.cycle_index % 50 == 0 {
            println!("{},{},{:.6e},{:.6e}", r.cycle_index, r.t_start, r.log_negativity, r.corr_q1p2);
        }
        Ok(())
    })?;
    Ok(())
}
