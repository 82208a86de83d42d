//! Discrete leadership along a chain; the flocking matrix contracts in
//! the level-weighted norm at every step.

use flockbench::discrete::simulate;
use flockbench::meanfield::{sample, DensitySpec};
use flockbench::topology::{leader_distance, verify_contraction};
use flockbench::{Digraph, DtModel, Kernel};

fn main() -> flockbench::Result<()> {
    let n = 10;
    let graph = Digraph::chain(n);
    let levels = leader_distance(&graph)?.levels;
    let kernel = Kernel::power_squared(0.25)?;
    let probe = DtModel::leadership(1.0, kernel.clone(), graph.clone())?;
    let model = DtModel::leadership(0.5 * probe.stability_bound(n), kernel, graph)?;

    let e0 = sample(&DensitySpec::uniform_box(2, 1.0, 1.0)?, n, 4)?;
    let mut worst_margin = f64::INFINITY;
    let mut prev = e0.clone();
    let run = simulate(&model, &e0, 1000, |t, e, _| {
        if t > 0 {
            let p = model.flocking_matrix(&prev, t - 1).unwrap();
            let phi_m = model.min_edge_weight(&prev, t - 1).unwrap();
            let c = verify_contraction(&p, &levels[1..], 0.5, model.h(), phi_m).unwrap();
            worst_margin = worst_margin.min(c.margin);
        }
        prev = e.clone();
    })?;
    println!(
        "h = {:.4}, smallest contraction margin = {worst_margin:.3e}",
        model.h()
    );
    println!(
        "Dv after 1000 steps = {:.3e}",
        run.diagnostics.last().unwrap().dv
    );
    Ok(())
}
