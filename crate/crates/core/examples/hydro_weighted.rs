//! Mass-weighted particles as a Lagrangian picture of the hydrodynamic
//! model: momentum is conserved and the velocity spread closes.

use flockbench::analysis::check_hydro;
use flockbench::continuous::integrate;
use flockbench::meanfield::{sample, DensitySpec, Marginal};
use flockbench::{CtModel, Kernel};

fn main() -> flockbench::Result<()> {
    let n = 16;
    let spec = DensitySpec::new(
        vec![Marginal::Uniform { lo: -1.0, hi: 1.0 }],
        vec![Marginal::Uniform { lo: -0.1, hi: 0.1 }],
    )?;
    let masses: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { 3.0 } else { 1.0 } / 32.0)
        .collect();
    let e0 = sample(&spec, n, 6)?.with_masses(masses)?;
    let kernel = Kernel::power_plain(2.0)?;
    print!("{}", check_hydro(&e0, 1.0, &kernel)?.to_text());

    let model = CtModel::weighted(1.0, kernel)?;
    let p0 = e0.momentum()[0];
    let run = integrate(&model, &e0, 1e-2, 8000, |_, _, _| {})?;
    let p1 = run.final_state.momentum()[0];
    println!("momentum drift = {:.2e}", (p1 - p0).abs());
    println!(
        "Dv: {:.3e} -> {:.3e}",
        run.diagnostics[0].dv,
        run.diagnostics.last().unwrap().dv
    );
    Ok(())
}
