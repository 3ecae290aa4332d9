//! Steady-state detector entanglement across the resonance valley at f = 5.
//!
//! `cargo run --release --example valley_sweep -- 6` uses six field modes.

use cavityfarm::cavity::CavityConfig;
use cavityfarm::farming::{run_to_fixed_point, InitialFieldSpec, DEFAULT_MAX_CYCLES, DEFAULT_TOLERANCE};

fn main() -> cavityfarm::Result<()> {
    let n_modes = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let base = CavityConfig { n_modes, ..CavityConfig::default() };
    println!("f,E_N,corr_q1p2,cycles");
    for f in [4.4, 4.6, 4.8, 4.9, 4.95, 5.0, 5.05, 5.1, 5.2, 5.4, 5.6] {
        let cfg = base.with_f(f)?;
        let fp = run_to_fixed_point(&InitialFieldSpec::Vacuum, &cfg, DEFAULT_TOLERANCE, DEFAULT_MAX_CYCLES)?;
        println!("{f},{:.6e},{:.6e},{}", fp.record.log_negativity, fp.record.corr_q1p2, fp.cycles_used);
    }
    Ok(())
}
