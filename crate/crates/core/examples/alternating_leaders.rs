//! Leadership that switches between the two ends of a line of agents.

use flockbench::discrete::simulate;
use flockbench::meanfield::{sample, DensitySpec};
use flockbench::topology::SwitchingSignal;
use flockbench::{Digraph, DtModel, Kernel};

fn main() -> flockbench::Result<()> {
    let n = 4;
    let beta = 0.05;
    println!(
        "2 beta (N-1)^2 = {}",
        2.0 * beta * ((n - 1) * (n - 1)) as f64
    );
    let graphs = vec![Digraph::chain(n), Digraph::path(n, &[3, 2, 1, 0])?];
    for (k, g) in graphs.iter().enumerate() {
        let root = if k == 0 { 0 } else { 3 };
        println!("graph {k} rooted at {root}: {}", g.is_rooted(root));
    }
    let signal = SwitchingSignal::periodic_dwell(&[0, 1], 1);
    let kernel = Kernel::power_squared(beta)?;
    let probe = DtModel::switching(1.0, kernel.clone(), graphs.clone(), signal.clone())?;
    let model = DtModel::switching(0.5 * probe.stability_bound(n), kernel, graphs, signal)?;

    let e0 = sample(&DensitySpec::uniform_box(2, 1.0, 1.0)?, n, 5)?;
    let mut first = None;
    simulate(&model, &e0, 2000, |t, _, rec| {
        if first.is_none() && rec.dv < 1e-6 {
            first = Some(t);
        }
    })?;
    println!("Dv < 1e-6 after {:?} steps", first);
    Ok(())
}
