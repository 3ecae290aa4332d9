//! A cavity mounted on a damped spring and driven by a gravitational-wave
//! strain: steady-state transfer function, then farming under the
//! resulting wall motion.

use std::f64::consts::PI;

use cavityfarm::cavity::CavityConfig;
use cavityfarm::drivers::{length, GwSpringDriver, SpringParams, StrainWaveform};
use cavityfarm::farming::{run_perturbed_with, run_to_fixed_point, InitialFieldSpec, DEFAULT_TOLERANCE};

fn main() -> cavityfarm::Result<()> {
    let p = SpringParams { l0: 8.0, omega0: 0.4, quality: 8.0 };
    let h0 = 1e-4;
    println!("omega/omega0,amplitude/(h0 L0/2)");
    for ratio in [0.25, 0.5, 0.9, 1.0, 1.1, 2.0, 4.0] {
        let omega = ratio * p.omega0;
        let settle = 40.0 * p.quality / p.omega0;
        let window = 4.0 * PI / omega;
        let d = GwSpringDriver::new(p, StrainWaveform::Sine { h0, omega }, settle + window)?;
        let amp = (0..2000)
            .map(|k| d.displacement(settle + window * k as f64 / 1999.0).map(|x| x.0.abs()))
            .try_fold(0.0_f64, |m, x| x.map(|x| m.max(x)))?;
        println!("{ratio},{:.6}", amp / (0.5 * h0 * p.l0));
    }

    let cfg = CavityConfig { n_modes: 4, ..CavityConfig::default() }.with_f(5.0)?;
    let fp = run_to_fixed_point(&InitialFieldSpec::Vacuum, &cfg, DEFAULT_TOLERANCE, 20000)?;
    let omega0 = 0.05 * PI / cfg.l0;
    let params = SpringParams { l0: cfg.l0, omega0, quality: 10.0 };
    let cycles = 200;
    let driver = GwSpringDriver::new(params, StrainWaveform::Sine { h0: 1e-3, omega: omega0 }, (cycles + 1) as f64 * cfg.cycle_time())?;
    println!("cycle,L,E_N,corr_q1p2");
    run_perturbed_with(&fp, &cfg, &driver, cycles, |r| {
        if r.cycle_index % 20 == 0 {
            let l = length(&driver, r.t_start)?.length;
            println!("{},{l:.9},{:.6e},{:.6e}", r.cycle_index, r.log_negativity, r.corr_q1p2);
        }
        Ok(())
    })?;
    Ok(())
}
