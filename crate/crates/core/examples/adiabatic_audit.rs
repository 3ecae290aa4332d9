//! How large are the moving-wall terms the adiabatic generator leaves out?

use std::f64::consts::PI;

use cavityfarm::audit::{alpha_beta, audit, SmallCase};
use cavityfarm::cavity::CavityConfig;
use cavityfarm::drivers::SinusoidDriver;

fn main() -> cavityfarm::Result<()> {
    let mats = alpha_beta(3)?;
    println!("alpha =\n{}beta =\n{}", mats.alpha, mats.beta);

    let cfg = CavityConfig::default().with_f(5.0)?;
    for (a, g) in [(1e-3, 4e-4), (1e-3, 4e-2), (4e-3, 4e-2)] {
        let d = SinusoidDriver::new(cfg.l0, a * cfg.l0, g * PI / cfg.l0)?;
        let case = SmallCase { n_modes: 3, cycles: 2, t_start: 0.0 };
        let r = audit(&cfg, &d, (0.0, d.period().min(50.0 * cfg.cycle_time())), Some(case))?;
        println!(
            "A/L0 = {a:.0e}, gamma/omega1 = {g:.0e}: gamma*A = {:.2e}, ratio_1 = {:.3e}, ratio_2 = {:.3e}, drift = {:.2e}",
            d.adiabaticity(),
            r.ratio_1,
            r.ratio_2,
            r.max_drift().unwrap_or(0.0)
        );
    }
    Ok(())
}
