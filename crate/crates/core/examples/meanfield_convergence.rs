//! Distance of N-particle clouds to a large-N reference after a short
//! flight, with the reference's own sampling noise floor.

use flockbench::meanfield::{convergence_study, DensitySpec, StudyConfig};
use flockbench::{CtModel, Kernel};

fn main() -> flockbench::Result<()> {
    let cfg = StudyConfig {
        spec: DensitySpec::uniform_box(1, 1.0, 1.0)?,
        model: CtModel::symmetric(1.0, Kernel::power_plain(2.0)?)?,
        ns: vec![25, 50, 100, 200],
        horizon: 1.0,
        h: 1e-2,
        trials: 8,
        seed: 3,
    };
    let study = convergence_study(&cfg)?;
    for (n, d) in study.trend() {
        println!("N = {n:4}  mean W1 = {d:.4}");
    }
    let (dec, steps) = study.decreasing_steps();
    println!("decreasing steps: {dec}/{steps}");
    study.write_csv(std::io::stdout().lock(), false)?;
    Ok(())
}
