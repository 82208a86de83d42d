//! Runs every embedded preset in memory and prints its outcome line.

use flockbench::scenario::{simulate_scenario, Scenario, PRESETS};

fn main() -> flockbench::Result<()> {
    let only = std::env::args().nth(1);
    for (name, _) in PRESETS {
        if only.as_deref().is_some_and(|o| o != *name) {
            continue;
        }
        let s = Scenario::from_preset(name)?;
        let summary = simulate_scenario(&s)?;
        let outcome = summary
            .report
            .lines()
            .find(|l| l.starts_with("outcome = "))
            .unwrap_or("");
        println!("{name:28} {outcome}");
    }
    Ok(())
}
