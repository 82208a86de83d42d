//! Two agents on a line: closed-form trichotomy against RK4.

use flockbench::continuous::integrate;
use flockbench::two_particle::{self, TwoParticleCase};
use flockbench::CtModel;

fn main() -> flockbench::Result<()> {
    let critical = TwoParticleCase::critical(0.0, 1.0, 2.0)?;
    let model = CtModel::symmetric(critical.k, critical.kernel())?;

    let mut worst = 0.0f64;
    integrate(&model, &critical.to_ensemble(), 1e-3, 10_000, |_, e, _| {
        let (x, v) = two_particle::differences(e).unwrap();
        let (xe, ve) = two_particle::critical_trajectory(&critical, e.time()).unwrap();
        worst = worst.max((x - xe).abs()).max((v - ve).abs());
    })?;
    let (x4, v4) = two_particle::critical_trajectory(&critical, 4.0)?;
    println!("critical v0 = {}, x(4) = {x4}, v(4) = {v4:.6}", critical.v0);
    println!("max |RK4 - exact| on [0, 10] = {worst:.3e}");

    for v0 in [0.5, 1.0, 2.0] {
        let case = TwoParticleCase::new(0.0, v0, 1.0, 2.0)?;
        let class = two_particle::classify(&case).class;
        match two_particle::asymptotic_velocity(&case) {
            Ok(v_inf) => println!("v0 = {v0}: {class}, v_inf = {v_inf}"),
            Err(_) => println!("v0 = {v0}: {class}"),
        }
    }
    Ok(())
}
