//! Runs a small declarative sweep from a TOML string, the same way the
//! `cavityfarm` binary does, and prints the resulting CSV.

use cavityfarm::experiment::{valley_sweep, RunOptions, ScenarioConfig};

const SCENARIO: &str = r#"
kind = "valley_sweep"

[cavity]
n_modes = 4

[grid]
range = { start = 4.6, stop = 5.4, step = 0.2 }
values = [4.95, 5.05]
"#;

fn main() -> cavityfarm::Result<()> {
    let scenario = ScenarioConfig::from_toml_str(SCENARIO)?;
    let out = std::env::temp_dir().join("cavityfarm-scenario-example");
    let outcome = valley_sweep(&scenario, &RunOptions { workers: Some(2), ..RunOptions::new(&out) })?;
    print!("{}", std::fs::read_to_string(&outcome.csv)?);
    println!("{} points done, manifest in {}", outcome.manifest.points.len(), out.display());
    Ok(())
}
