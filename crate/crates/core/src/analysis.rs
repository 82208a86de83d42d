//! Sufficient flocking conditions, Lyapunov and energy functionals, decay
//! rate fitting and outcome classification.

use std::fmt::Write as _;

use crate::ensemble::{diameters, dist, sup_norms, DiagnosticsRecord, Ensemble};
use crate::error::{FlockError, Result};
use crate::kernel::{Kernel, Power, TailIntegral};

/// Outcome of a sufficient-condition check.
///
/// `holds` is always `measured < threshold`; a divergent tail integral
/// gives an infinite threshold and sets `unconditional`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub name: &'static str,
    pub holds: bool,
    pub threshold: f64,
    pub measured: f64,
    pub unconditional: bool,
    pub extras: Vec<(&'static str, f64)>,
}

impl ConditionReport {
    fn new(name: &'static str, measured: f64, threshold: f64, unconditional: bool) -> Self {
        ConditionReport {
            name,
            holds: measured < threshold,
            threshold,
            measured,
            unconditional,
            extras: Vec::new(),
        }
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| *k == key).map(|&(_, v)| v)
    }

    /// Flat key-value block, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[condition {}]", self.name);
        let _ = writeln!(s, "holds = {}", self.holds);
        let _ = writeln!(s, "measured = {:e}", self.measured);
        let _ = writeln!(s, "threshold = {:e}", self.threshold);
        let _ = writeln!(s, "unconditional = {}", self.unconditional);
        for (k, v) in &self.extras {
            let _ = writeln!(s, "{k} = {v:e}");
        }
        s
    }
}

/// `½ Σ |v_i - v̄|²` with the arithmetic mean velocity.
pub fn kinetic_energy(e: &Ensemble) -> f64 {
    let (_, vm) = e.means();
    0.5 * (0..e.len()).map(|i| dist(e.v(i), &vm).powi(2)).sum::<f64>()
}

/// `½ Σ m_i |v_i - v̄_m|²` with the mass-weighted mean velocity. Falls back
/// to [`kinetic_energy`] when there are no masses.
pub fn weighted_kinetic_energy(e: &Ensemble) -> f64 {
    let Some(m) = e.masses() else {
        return kinetic_energy(e);
    };
    let vm = e.momentum();
    0.5 * (0..e.len())
        .map(|i| m[i] * dist(e.v(i), &vm).powi(2))
        .sum::<f64>()
}

/// Kinetic and potential energy of the bonding model in the zero-sum
/// frame: `E_k = ½ Σ |v_i|²`, `E_p = K2/(4N) Σ_{i≠j} (|x_j - x_i| - 2R)²`.
pub fn energy(e: &Ensemble, k2: f64, r: f64) -> (f64, f64) {
    let n = e.len();
    let mut pair_sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dev = dist(e.x(i), e.x(j)) - 2.0 * r;
            pair_sum += 2.0 * dev * dev;
        }
    }
    (kinetic_energy(e), k2 / (4.0 * n as f64) * pair_sum)
}

/// Energy dissipation rate of the bonding model, `-dE/dt`:
///
/// `K0/(2N) Σ ψ_ij |v_j - v_i|² + K1/(2N) Σ <v_j - v_i, x_j - x_i>² / |x_j - x_i|`.
///
/// Coincident pairs contribute nothing to the second sum.
pub fn energy_production(e: &Ensemble, k0: f64, k1: f64, kernel: &Kernel) -> f64 {
    let n = e.len();
    let mut align = 0.0;
    let mut proj = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let rij = dist(e.x(i), e.x(j));
            let dv2 = dist(e.v(i), e.v(j)).powi(2);
            align += 2.0 * kernel.value(rij) * dv2;
            if rij > 0.0 {
                let inner: f64 = (0..e.dim())
                    .map(|c| (e.x(j)[c] - e.x(i)[c]) * (e.v(j)[c] - e.v(i)[c]))
                    .sum();
                proj += 2.0 * inner * inner / rij;
            }
        }
    }
    let inv = 1.0 / (2.0 * n as f64);
    k0 * inv * align + k1 * inv * proj
}

/// `L± = |v|_∞ ± (K/2) ∫_0^{2|x|_∞} ψ(s) ds`.
pub fn lyapunov_pm(e: &Ensemble, k: f64, kernel: &Kernel) -> (f64, f64) {
    let s = sup_norms(e);
    let budget = 0.5
        * k
        * kernel
            .integral(0.0, 2.0 * s.x_sup, Power::One)
            .unwrap_or(f64::NAN);
    (s.v_sup + budget, s.v_sup - budget)
}

/// Radius at which the Lyapunov budget is exhausted:
/// the root of `(K/2) ∫_{x0}^{x} ψ(2r) dr = v0`.
pub fn budget_radius(x0: f64, v0: f64, k: f64, kernel: &Kernel) -> Result<f64> {
    if v0 == 0.0 {
        return Ok(x0);
    }
    let spent =
        |x: f64| -> Result<f64> { Ok(0.25 * k * kernel.integral(2.0 * x0, 2.0 * x, Power::One)?) };
    let mut hi = x0 + 1.0;
    let mut guard = 0;
    while spent(hi)? < v0 {
        hi = x0 + 2.0 * (hi - x0);
        guard += 1;
        if guard > 200 || !hi.is_finite() {
            return Err(FlockError::Divergent(
                "Lyapunov budget is never exhausted".into(),
            ));
        }
    }
    let mut lo = x0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spent(mid)? < v0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Symmetric-model condition `|v0|_∞ < (K/2) ∫_{|x0|_∞}^∞ ψ(2r) dr`.
///
/// Extras: `K_star`, `x_M` (when the condition holds) and
/// `decay_rate_bound = K ψ(2 x_M)`.
pub fn check_symmetric(e0: &Ensemble, k: f64, kernel: &Kernel) -> Result<ConditionReport> {
    let s = sup_norms(e0);
    if s.x_sup == 0.0 {
        return Err(FlockError::Degenerate(
            "the symmetric condition requires |x0|_inf > 0".into(),
        ));
    }
    let tail = kernel.tail_integral(s.x_sup, 2.0, Power::One)?;
    let threshold = 0.5 * k * tail.value();
    let mut report = ConditionReport::new(
        "symmetric",
        s.v_sup,
        threshold,
        tail.is_divergent() && k > 0.0,
    );
    let k_star = match tail {
        TailIntegral::Divergent => 0.0,
        TailIntegral::Finite(t) => 2.0 * s.v_sup / t,
    };
    report.extras.push(("K_star", k_star));
    if report.holds {
        let x_m = budget_radius(s.x_sup, s.v_sup, k, kernel)?;
        report.extras.push(("x_M", x_m));
        report
            .extras
            .push(("decay_rate_bound", k * kernel.value(2.0 * x_m)));
    }
    Ok(report)
}

/// Normalised-model condition `D(v0) < K ∫_{D(x0)}^∞ ψ²(r) dr`.
pub fn check_motsch_tadmor(e0: &Ensemble, k: f64, kernel: &Kernel) -> Result<ConditionReport> {
    if !kernel.is_strictly_positive() {
        return Err(FlockError::Domain(
            "the normalised-model condition requires a strictly positive kernel".into(),
        ));
    }
    let d = diameters(e0);
    let tail = kernel.tail_integral(d.dx, 1.0, Power::Two)?;
    Ok(ConditionReport::new(
        "motsch_tadmor",
        d.dv,
        k * tail.value(),
        tail.is_divergent() && k > 0.0,
    ))
}

/// Bonding-model hypotheses: `E(0) < K2 R² N` and
/// `ψ_m = min_{[0, 2R + sqrt(2N E(0)/K2)]} ψ > 0`.
///
/// When `ψ_m` vanishes the threshold is reported as 0.
pub fn check_bonding(e0: &Ensemble, k2: f64, r: f64, kernel: &Kernel) -> Result<ConditionReport> {
    if !(k2 > 0.0 && r > 0.0) {
        return Err(FlockError::Config(format!(
            "bonding condition requires K2 > 0 and R > 0, got K2 = {k2}, R = {r}"
        )));
    }
    let n = e0.len() as f64;
    let (ek, ep) = energy(e0, k2, r);
    let e_total = ek + ep;
    let radius = 2.0 * r + (2.0 * n * e_total / k2).sqrt();
    // non-increasing kernel: the minimum sits at the right endpoint
    let psi_m = kernel.value(radius);
    let threshold = if psi_m > 0.0 { k2 * r * r * n } else { 0.0 };
    let mut report = ConditionReport::new("bonding", e_total, threshold, false);
    report.extras.push(("psi_m", psi_m));
    report.extras.push(("confinement_radius", radius));
    report.extras.push(("kinetic_energy", ek));
    report.extras.push(("potential_energy", ep));
    Ok(report)
}

/// Hydrodynamic condition `R^u_0 < K ∫_{R^x_0}^∞ ψ(s) ds`, diameters over
/// all particles of a mass-weighted ensemble.
pub fn check_hydro(e0: &Ensemble, k: f64, kernel: &Kernel) -> Result<ConditionReport> {
    if e0.masses().is_none() {
        return Err(FlockError::Config(
            "hydrodynamic condition requires masses".into(),
        ));
    }
    let d = diameters(e0);
    let tail = kernel.tail_integral(d.dx, 1.0, Power::One)?;
    Ok(ConditionReport::new(
        "hydro",
        d.dv,
        k * tail.value(),
        tail.is_divergent() && k > 0.0,
    ))
}

/// Least-squares fit of `ln Dv = c - λ t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits the exponential decay rate over the trailing `window` samples.
pub fn fit_decay_rate(series: &[(f64, f64)], window: usize) -> Result<DecayFit> {
    if window < 2 || window > series.len() {
        return Err(FlockError::Window(format!(
            "window of {window} samples on a series of {}",
            series.len()
        )));
    }
    let tail = &series[series.len() - window..];
    if let Some(&(t, y)) = tail.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(FlockError::Window(format!(
            "non-positive value {y} at t = {t}"
        )));
    }
    let pts: Vec<(f64, f64)> = tail.iter().map(|&(t, y)| (t, y.ln())).collect();
    let (slope, intercept, r2) = linear_fit(&pts);
    Ok(DecayFit {
        rate: -slope,
        intercept,
        r_squared: r2,
    })
}

/// Ordinary least squares `y = a + b t`; returns `(b, a, R²)`.
pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let intercept = ym - slope * tm;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeLabel {
    Flocking,
    Dispersing,
    Undetermined,
}

impl std::fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OutcomeLabel::Flocking => "Flocking",
            OutcomeLabel::Dispersing => "Dispersing",
            OutcomeLabel::Undetermined => "Undetermined",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub label: OutcomeLabel,
    pub final_dv: f64,
    /// Least-squares slope of `Dx` over the trailing half of the run.
    pub dx_growth_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyConfig {
    /// Velocity diameter below which the flock counts as aligned.
    pub tol: f64,
    /// Dx slope allowed for a "bounded" flock, relative to the initial Dv.
    pub growth_factor: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            tol: 1e-6,
            growth_factor: 1e-3,
        }
    }
}

/// Labels a diagnostics series.
///
/// * Flocking: final `Dv < tol` and the trailing-half slope of `Dx` stays
///   below `growth_factor · Dv(0)`.
/// * Dispersing: final `Dv ≥ tol`, `Dv` has not halved over the trailing
///   half, and `Dx` grows at least at half the final relative speed.
/// * Undetermined otherwise, including series shorter than 10 samples.
pub fn classify_outcome(traj: &[DiagnosticsRecord], cfg: ClassifyConfig) -> Outcome {
    let Some(last) = traj.last() else {
        return Outcome {
            label: OutcomeLabel::Undetermined,
            final_dv: f64::NAN,
            dx_growth_rate: f64::NAN,
        };
    };
    let final_dv = last.dv;
    if traj.len() < 10 {
        return Outcome {
            label: OutcomeLabel::Undetermined,
            final_dv,
            dx_growth_rate: f64::NAN,
        };
    }
    let half = &traj[traj.len() / 2..];
    let pts: Vec<(f64, f64)> = half.iter().map(|r| (r.time, r.dx)).collect();
    let (slope, _, _) = linear_fit(&pts);
    let growth_limit = cfg.growth_factor * if traj[0].dv > 0.0 { traj[0].dv } else { 1.0 };
    let label = if final_dv < cfg.tol && slope <= growth_limit {
        OutcomeLabel::Flocking
    } else if final_dv >= cfg.tol && final_dv >= 0.5 * half[0].dv && slope >= 0.5 * final_dv {
        OutcomeLabel::Dispersing
    } else {
        OutcomeLabel::Undetermined
    };
    Outcome {
        label,
        final_dv,
        dx_growth_rate: slope,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64], vs: &[f64]) -> Ensemble {
        Ensemble::from_flat(1, xs.to_vec(), vs.to_vec()).unwrap()
    }

    #[test]
    fn symmetric_threshold_closed_form() {
        // |x0|_inf = 1: (K/2) ∫_1^∞ (1+2r)^-2 dr = (K/2)(1/6) = K/12
        let k = Kernel::power_plain(2.0).unwrap();
        let e = line(&[-1.0, 1.0], &[0.01, -0.01]);
        let rep = check_symmetric(&e, 3.0, &k).unwrap();
        assert!((rep.threshold - 0.25).abs() < 1e-15);
        assert!(rep.holds);
        assert!((rep.extra("K_star").unwrap() - 0.12).abs() < 1e-14);
    }

    #[test]
    fn symmetric_degenerate_and_unconditional() {
        let k = Kernel::power_plain(2.0).unwrap();
        assert!(matches!(
            check_symmetric(&line(&[1.0, 1.0], &[1.0, 0.0]), 1.0, &k),
            Err(FlockError::Degenerate(_))
        ));
        let fat = Kernel::power_plain(0.5).unwrap();
        let rep = check_symmetric(&line(&[0.0, 10.0], &[100.0, -100.0]), 0.1, &fat).unwrap();
        assert!(rep.holds && rep.unconditional);
        assert_eq!(rep.extra("K_star"), Some(0.0));
        let rep = check_symmetric(&line(&[0.0, 1.0], &[2.0, 2.0]), 1.0, &k).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.measured, 0.0);
    }

    #[test]
    fn budget_radius_solves_budget_equation() {
        let k = Kernel::power_plain(2.0).unwrap();
        let x_m = budget_radius(1.0, 0.1, 3.0, &k).unwrap();
        let spent = 0.5 * 3.0 * 0.5 * k.integral(2.0, 2.0 * x_m, Power::One).unwrap();
        assert!((spent - 0.1).abs() < 1e-12);
    }

    #[test]
    fn motsch_tadmor_examples() {
        let fat = Kernel::power_plain(0.4).unwrap();
        let rep = check_motsch_tadmor(&line(&[0.0, 5.0], &[9.0, -9.0]), 1.0, &fat).unwrap();
        assert!(rep.unconditional && rep.holds);
        let k = Kernel::power_plain(1.0).unwrap();
        let rep = check_motsch_tadmor(&line(&[0.0, 0.0], &[0.99, 0.0]), 1.0, &k).unwrap();
        assert!((rep.threshold - 1.0).abs() < 1e-15);
        assert!(rep.holds);
        let rep = check_motsch_tadmor(&line(&[0.0, 0.0], &[1.0, 0.0]), 1.0, &k).unwrap();
        assert!(!rep.holds);
        let rep = check_motsch_tadmor(&line(&[0.0, 3.0], &[1.0, 1.0]), 1.0, &k).unwrap();
        assert!(rep.holds);
        let vanishing = Kernel::tabulated(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert!(check_motsch_tadmor(&line(&[0.0], &[0.0]), 1.0, &vanishing).is_err());
    }

    #[test]
    fn bonding_examples() {
        let k = Kernel::power_plain(1.0).unwrap();
        let r = 0.5;
        let ground = line(&[-r, r], &[0.0, 0.0]);
        let rep = check_bonding(&ground, 2.0, r, &k).unwrap();
        assert_eq!(rep.measured, 0.0);
        assert!(rep.holds);
        assert_eq!(rep.extra("psi_m"), Some(k.value(2.0 * r)));
        let fast = line(&[-r, r], &[-100.0, 100.0]);
        assert!(!check_bonding(&fast, 2.0, r, &k).unwrap().holds);
    }

    #[test]
    fn bonding_two_agent_energy_bound() {
        // x = (-R, R), v = (-a, a): E_p = 0, E_k = a², so holds iff a² < 2 K2 R²
        let k = Kernel::power_plain(1.0).unwrap();
        let (r, k2): (f64, f64) = (1.5, 0.8);
        let bound = (2.0 * k2 * r * r).sqrt();
        for (a, expect) in [(0.99 * bound, true), (1.01 * bound, false)] {
            let e = line(&[-r, r], &[-a, a]);
            let rep = check_bonding(&e, k2, r, &k).unwrap();
            assert!((rep.measured - a * a).abs() < 1e-12);
            assert_eq!(rep.holds, expect);
        }
    }

    #[test]
    fn hydro_examples() {
        let k = Kernel::power_plain(2.0).unwrap();
        let still = line(&[0.0, 3.0], &[1.0, 1.0]).with_uniform_masses();
        assert!(check_hydro(&still, 1.0, &k).unwrap().holds);
        let co = line(&[0.0, 0.0], &[0.9, 0.0]).with_uniform_masses();
        let rep = check_hydro(&co, 1.0, &k).unwrap();
        assert!((rep.threshold - 1.0).abs() < 1e-15 && rep.holds);
        let co = line(&[0.0, 0.0], &[1.1, 0.0]).with_uniform_masses();
        assert!(!check_hydro(&co, 1.0, &k).unwrap().holds);
        let fat = Kernel::power_plain(1.0).unwrap();
        assert!(check_hydro(&co, 1.0, &fat).unwrap().unconditional);
        assert!(check_hydro(&line(&[0.0], &[0.0]), 1.0, &k).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let k = Kernel::power_plain(2.0).unwrap();
        let e = line(&[0.0, 2.0], &[1.0, 1.0]);
        let (lp, lm) = lyapunov_pm(&e, 2.0, &k);
        // (K/2) ∫_0^2 (1+s)^-2 ds = 2/3
        assert!((lp - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(lm, -lp);
        let e = line(&[0.0, 2.0], &[1.0, -1.0]);
        assert_eq!(lyapunov_pm(&e, 0.0, &k), (1.0, 1.0));
    }

    #[test]
    fn energy_examples() {
        let r = 0.5;
        let e = line(&[0.0, 2.0 * r], &[0.0, 0.0]);
        assert_eq!(energy(&e, 3.0, r), (0.0, 0.0));
        let e = line(&[0.0, 5.0], &[1.0, -1.0]);
        assert_eq!(energy(&e, 0.0, r).0, 1.0);
    }

    #[test]
    fn decay_fit_examples() {
        let series: Vec<(f64, f64)> = (0..50)
            .map(|k| (0.1 * k as f64, (-3.0 * 0.1 * k as f64).exp()))
            .collect();
        let fit = fit_decay_rate(&series, 20).unwrap();
        assert!((fit.rate - 3.0).abs() < 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);
        let flat: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 2.0)).collect();
        assert_eq!(fit_decay_rate(&flat, 10).unwrap().rate, 0.0);
        let bad = vec![(0.0, 1.0), (1.0, 0.0)];
        assert!(matches!(
            fit_decay_rate(&bad, 2),
            Err(FlockError::Window(_))
        ));
        assert!(fit_decay_rate(&flat, 11).is_err());
    }

    #[test]
    fn short_series_undetermined() {
        let recs = vec![DiagnosticsRecord::default(); 5];
        assert_eq!(
            classify_outcome(&recs, ClassifyConfig::default()).label,
            OutcomeLabel::Undetermined
        );
        assert_eq!(
            classify_outcome(&[], ClassifyConfig::default()).label,
            OutcomeLabel::Undetermined
        );
    }
}
