//! Normalised weights with a fat tail: alignment without any condition on
//! the initial data.

use flockbench::analysis::check_motsch_tadmor;
use flockbench::continuous::integrate;
use flockbench::meanfield::{sample, DensitySpec};
use flockbench::{CtModel, Kernel};

fn main() -> flockbench::Result<()> {
    let kernel = Kernel::power_plain(0.4)?;
    let e0 = sample(&DensitySpec::uniform_box(2, 2.0, 1.0)?, 20, 7)?;
    let report = check_motsch_tadmor(&e0, 1.0, &kernel)?;
    println!("unconditional = {}", report.unconditional);

    let model = CtModel::motsch_tadmor(1.0, kernel)?;
    let mut aligned_at = None;
    integrate(&model, &e0, 1e-2, 6000, |_, e, rec| {
        if aligned_at.is_none() && rec.dv < 1e-6 {
            aligned_at = Some(e.time());
        }
    })?;
    match aligned_at {
        Some(t) => println!("Dv < 1e-6 reached at t = {t:.2}"),
        None => println!("not aligned within the horizon"),
    }
    Ok(())
}
