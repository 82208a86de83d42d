//! Sufficient condition, Lyapunov radius and measured decay rate for the
//! symmetric model.

use flockbench::analysis::{check_symmetric, classify_outcome, fit_decay_rate, ClassifyConfig};
use flockbench::continuous::integrate;
use flockbench::meanfield::{sample, DensitySpec, Marginal};
use flockbench::{CtModel, Kernel};

fn main() -> flockbench::Result<()> {
    let spec = DensitySpec::new(
        vec![Marginal::Uniform { lo: -1.0, hi: 1.0 }; 2],
        vec![
            Marginal::Uniform {
                lo: -0.05,
                hi: 0.05
            };
            2
        ],
    )?;
    let e0 = sample(&spec, 20, 1)?;
    let k = 5.0;
    let kernel = Kernel::power_plain(2.0)?;

    let report = check_symmetric(&e0, k, &kernel)?;
    print!("{}", report.to_text());

    let model = CtModel::symmetric(k, kernel)?;
    let run = integrate(&model, &e0, model.default_step(), 20_000, |_, _, _| {})?;
    let x_peak = run.diagnostics.iter().map(|r| r.x_sup).fold(0.0, f64::max);
    let series: Vec<(f64, f64)> = run
        .diagnostics
        .iter()
        .map(|r| (r.time, r.dv))
        .filter(|p| p.1 > 1e-12)
        .collect();
    let fit = fit_decay_rate(&series, series.len() / 2)?;
    let outcome = classify_outcome(&run.diagnostics, ClassifyConfig::default());

    println!(
        "sup_t |x|_inf = {x_peak:.4} (x_M = {:.4})",
        report.extra("x_M").unwrap_or(f64::NAN)
    );
    println!(
        "fitted rate = {:.4} (bound {:.4}), outcome = {}",
        fit.rate,
        report.extra("decay_rate_bound").unwrap_or(f64::NAN),
        outcome.label
    );
    Ok(())
}
