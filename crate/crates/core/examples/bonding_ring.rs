//! Alignment plus springs: a ring of agents stays apart, confined and
//! aligned while the energy drains.

use flockbench::analysis::check_bonding;
use flockbench::continuous::integrate;
use flockbench::scenario::optimal_ring_radius;
use flockbench::{CtModel, Ensemble, Kernel};

fn main() -> flockbench::Result<()> {
    let (n, r) = (8, 0.5);
    let radius = optimal_ring_radius(n, r);
    let mut x = Vec::new();
    let mut v = Vec::new();
    for i in 0..n {
        let a = std::f64::consts::TAU * i as f64 / n as f64;
        x.extend([radius * a.cos(), radius * a.sin()]);
        // A small rigid rotation, zero net momentum.
        v.extend([-0.1 * a.sin(), 0.1 * a.cos()]);
    }
    let e0 = Ensemble::from_flat(2, x, v)?;
    let kernel = Kernel::power_plain(1.0)?;
    print!("{}", check_bonding(&e0, 1.0, r, &kernel)?.to_text());

    let model = CtModel::bonding(1.0, 1.0, 1.0, r, kernel)?;
    let run = integrate(&model, &e0, 1e-2, 20_000, |step, e, rec| {
        if step % 4000 == 0 {
            println!(
                "t = {:6.1}  E = {:.6e}  Dx = {:.4}  Dv = {:.3e}",
                e.time(),
                rec.kinetic_energy + rec.potential_energy,
                rec.dx,
                rec.dv
            );
        }
    })?;
    println!("final Dv = {:.3e}", run.diagnostics.last().unwrap().dv);
    Ok(())
}
