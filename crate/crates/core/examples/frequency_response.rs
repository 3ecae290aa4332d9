//! Peak detector correlator against wall frequency, and the same curve for
//! a cavity rescaled tenfold smaller.

use std::f64::consts::PI;

use cavityfarm::cavity::CavityConfig;
use cavityfarm::drivers::SinusoidDriver;
use cavityfarm::experiment::response_point;
use cavityfarm::farming::{run_to_fixed_point, InitialFieldSpec, DEFAULT_TOLERANCE};

fn main() -> cavityfarm::Result<()> {
    let original = CavityConfig { n_modes: 4, ..CavityConfig::default() }.with_f(5.0)?;
    for cfg in [original.clone(), original.rescaled(0.1)] {
        let fp = run_to_fixed_point(&InitialFieldSpec::Vacuum, &cfg, DEFAULT_TOLERANCE, 20000)?;
        println!("L0 = {}, lambda = {}", cfg.l0, cfg.lambda);
        for g in [2e-3, 4e-3, 8e-3, 1.6e-2] {
            let gamma = g * PI / cfg.l0;
            let driver = SinusoidDriver::new(cfg.l0, 1e-3 * cfg.l0, gamma)?;
            let n = (3.0 * driver.period() / cfg.cycle_time()).ceil() as usize;
            let p = response_point(&cfg, &fp, &driver, gamma, n)?;
            println!("  gamma/omega1 = {g:.1e}: max |2<q1p2>| = {:.6e}, max E_N = {:.6e}", p.max_abs_corr_q1p2, p.max_log_negativity);
        }
    }
    Ok(())
}
