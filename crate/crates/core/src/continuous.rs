//! Continuous-time flocking models and a fixed-step RK4 integrator.
//!
//! Four right-hand sides share the integrator:
//!
//! * symmetric alignment, `dv_i = (K/N) Σ_j ψ(|x_j - x_i|)(v_j - v_i)`;
//! * the normalised (Motsch-Tadmor) variant, which divides by the local
//!   weight sum `Σ_k ψ(|x_k - x_i|)` instead of `N`;
//! * alignment plus velocity-projection and spring (bonding) forces;
//! * a mass-weighted alignment used as a particle surrogate for the
//!   pressureless hydrodynamic model.

use crate::analysis;
use crate::ensemble::{diameters, dist, sup_norms, DiagnosticsRecord, Ensemble};
use crate::error::{FlockError, Result};
use crate::kernel::Kernel;

/// Pairwise distance below which the bonding forces report a collision.
pub const COLLISION_DISTANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CtVariant {
    Symmetric { k: f64 },
    MotschTadmor { k: f64 },
    Bonding { k0: f64, k1: f64, k2: f64, r: f64 },
    Weighted { k: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtModel {
    variant: CtVariant,
    kernel: Kernel,
}

/// Time derivative of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub dx: Vec<f64>,
    pub dv: Vec<f64>,
}

impl Derivative {
    fn streaming(e: &Ensemble) -> Self {
        Derivative {
            dx: e.velocities().to_vec(),
            dv: vec![0.0; e.velocities().len()],
        }
    }

    pub fn dv_of(&self, i: usize, dim: usize) -> &[f64] {
        &self.dv[i * dim..(i + 1) * dim]
    }
}

fn check_coupling(name: &str, k: f64) -> Result<()> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(FlockError::Config(format!(
            "coupling {name} must be finite and >= 0, got {k}"
        )));
    }
    Ok(())
}

impl CtModel {
    pub fn new(variant: CtVariant, kernel: Kernel) -> Result<Self> {
        match variant {
            CtVariant::Symmetric { k }
            | CtVariant::MotschTadmor { k }
            | CtVariant::Weighted { k } => check_coupling("K", k)?,
            CtVariant::Bonding { k0, k1, k2, r } => {
                check_coupling("K0", k0)?;
                check_coupling("K1", k1)?;
                check_coupling("K2", k2)?;
                if !(r.is_finite() && r > 0.0) {
                    return Err(FlockError::Config(format!(
                        "bonding radius R must be > 0, got {r}"
                    )));
                }
            }
        }
        Ok(CtModel { variant, kernel })
    }

    pub fn symmetric(k: f64, kernel: Kernel) -> Result<Self> {
        Self::new(CtVariant::Symmetric { k }, kernel)
    }

    pub fn motsch_tadmor(k: f64, kernel: Kernel) -> Result<Self> {
        Self::new(CtVariant::MotschTadmor { k }, kernel)
    }

    pub fn bonding(k0: f64, k1: f64, k2: f64, r: f64, kernel: Kernel) -> Result<Self> {
        Self::new(CtVariant::Bonding { k0, k1, k2, r }, kernel)
    }

    pub fn weighted(k: f64, kernel: Kernel) -> Result<Self> {
        Self::new(CtVariant::Weighted { k }, kernel)
    }

    pub fn variant(&self) -> CtVariant {
        self.variant
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Largest coupling constant of the model.
    pub fn max_coupling(&self) -> f64 {
        match self.variant {
            CtVariant::Symmetric { k }
            | CtVariant::MotschTadmor { k }
            | CtVariant::Weighted { k } => k,
            CtVariant::Bonding { k0, k1, k2, .. } => k0.max(k1).max(k2),
        }
    }

    /// `1e-2 · min(1, 1/K_max)`.
    pub fn default_step(&self) -> f64 {
        let k = self.max_coupling();
        1e-2 * if k > 1.0 { 1.0 / k } else { 1.0 }
    }

    pub fn rhs(&self, e: &Ensemble) -> Result<Derivative> {
        match self.variant {
            CtVariant::Symmetric { k } => Ok(rhs_symmetric(e, k, &self.kernel)),
            CtVariant::MotschTadmor { k } => rhs_motsch_tadmor(e, k, &self.kernel),
            CtVariant::Bonding { k0, k1, k2, r } => rhs_bonding(e, k0, k1, k2, r, &self.kernel),
            CtVariant::Weighted { k } => rhs_weighted(e, k, &self.kernel),
        }
    }

    /// Diagnostics for one state. Lyapunov fields are only filled for the
    /// symmetric model; potential energy only for bonding.
    pub fn diagnostics(&self, e: &Ensemble) -> DiagnosticsRecord {
        let d = diameters(e);
        let s = sup_norms(e);
        let mut rec = DiagnosticsRecord {
            time: e.time(),
            dx: d.dx,
            dv: d.dv,
            x_sup: s.x_sup,
            v_sup: s.v_sup,
            ..Default::default()
        };
        match self.variant {
            CtVariant::Symmetric { k } => {
                rec.kinetic_energy = analysis::kinetic_energy(e);
                let (lp, lm) = analysis::lyapunov_pm(e, k, &self.kernel);
                rec.lyapunov_plus = lp;
                rec.lyapunov_minus = lm;
            }
            CtVariant::MotschTadmor { .. } => rec.kinetic_energy = analysis::kinetic_energy(e),
            CtVariant::Bonding { k2, r, .. } => {
                let (ek, ep) = analysis::energy(e, k2, r);
                rec.kinetic_energy = ek;
                rec.potential_energy = ep;
            }
            CtVariant::Weighted { .. } => rec.kinetic_energy = analysis::weighted_kinetic_energy(e),
        }
        rec
    }
}

/// Alignment sum `dv_i = K Σ_j m_j ψ_ij (v_j - v_i)` evaluated pairwise so
/// that each pair contributes equal and opposite mass-weighted momentum.
fn alignment(e: &Ensemble, k: f64, kernel: &Kernel, weight: impl Fn(usize) -> f64) -> Derivative {
    let n = e.len();
    let dim = e.dim();
    let mut out = Derivative::streaming(e);
    if k == 0.0 {
        return out;
    }
    let mut dvel = vec![0.0; dim];
    for i in 0..n {
        let (xi, vi) = (e.x(i), e.v(i));
        let mi = weight(i);
        for j in i + 1..n {
            let w = k * kernel.value(dist(xi, e.x(j)));
            let mj = weight(j);
            for (c, (a, b)) in dvel.iter_mut().zip(e.v(j).iter().zip(vi)) {
                *c = w * (a - b);
            }
            for c in 0..dim {
                out.dv[i * dim + c] += mj * dvel[c];
                out.dv[j * dim + c] -= mi * dvel[c];
            }
        }
    }
    out
}

/// `dx_i = v_i`, `dv_i = (K/N) Σ_j ψ(|x_j - x_i|)(v_j - v_i)`.
pub fn rhs_symmetric(e: &Ensemble, k: f64, kernel: &Kernel) -> Derivative {
    let m = 1.0 / e.len() as f64;
    alignment(e, k, kernel, |_| m)
}

/// `dv_i = K Σ_j m_j ψ(|x_j - x_i|)(v_j - v_i)`; requires masses.
pub fn rhs_weighted(e: &Ensemble, k: f64, kernel: &Kernel) -> Result<Derivative> {
    let masses = e
        .masses()
        .ok_or_else(|| FlockError::Config("weighted model requires masses".into()))?;
    Ok(alignment(e, k, kernel, |i| masses[i]))
}

/// `dv_i = K Σ_j ψ_ij (v_j - v_i) / Σ_k ψ_ik`, self term included in the
/// denominator.
pub fn rhs_motsch_tadmor(e: &Ensemble, k: f64, kernel: &Kernel) -> Result<Derivative> {
    let n = e.len();
    let dim = e.dim();
    let mut out = Derivative::streaming(e);
    let mut den = vec![kernel.value(0.0); n];
    let mut num = vec![0.0; n * dim];
    for i in 0..n {
        for j in i + 1..n {
            let w = kernel.value(dist(e.x(i), e.x(j)));
            den[i] += w;
            den[j] += w;
            for c in 0..dim {
                let dv = e.v(j)[c] - e.v(i)[c];
                num[i * dim + c] += w * dv;
                num[j * dim + c] -= w * dv;
            }
        }
    }
    for i in 0..n {
        if den[i] <= 0.0 {
            return Err(FlockError::SingularWeight { agent: i });
        }
        for c in 0..dim {
            out.dv[i * dim + c] = k * num[i * dim + c] / den[i];
        }
    }
    Ok(out)
}

/// Alignment, velocity-projection and spring forces:
///
/// ```text
/// dv_i = K0/N Σ ψ(r_ij)(v_j - v_i)
///      + K1/N Σ <v_j - v_i, x_j - x_i>/r_ij (x_j - x_i)
///      + K2/N Σ (r_ij - 2R)(x_j - x_i)/r_ij
/// ```
///
/// The spring term is the negative gradient of
/// `E_p = K2/(4N) Σ_{i≠j} (r_ij - 2R)²`.
pub fn rhs_bonding(
    e: &Ensemble,
    k0: f64,
    k1: f64,
    k2: f64,
    r: f64,
    kernel: &Kernel,
) -> Result<Derivative> {
    let n = e.len();
    let dim = e.dim();
    let inv_n = 1.0 / n as f64;
    let needs_separation = k1 > 0.0 || k2 > 0.0;
    let mut out = Derivative::streaming(e);
    let mut dxv = vec![0.0; dim];
    let mut dvv = vec![0.0; dim];
    for i in 0..n {
        for j in i + 1..n {
            for c in 0..dim {
                dxv[c] = e.x(j)[c] - e.x(i)[c];
                dvv[c] = e.v(j)[c] - e.v(i)[c];
            }
            let rij = dxv.iter().map(|a| a * a).sum::<f64>().sqrt();
            if needs_separation && rij < COLLISION_DISTANCE {
                return Err(FlockError::Collision {
                    i,
                    j,
                    distance: rij,
                });
            }
            let align = k0 * inv_n * kernel.value(rij);
            let (proj, spring) = if needs_separation {
                let inner: f64 = dxv.iter().zip(&dvv).map(|(a, b)| a * b).sum();
                (k1 * inv_n * inner / rij, k2 * inv_n * (rij - 2.0 * r) / rij)
            } else {
                (0.0, 0.0)
            };
            for c in 0..dim {
                let f = align * dvv[c] + (proj + spring) * dxv[c];
                out.dv[i * dim + c] += f;
                out.dv[j * dim + c] -= f;
            }
        }
    }
    Ok(out)
}

fn advance(e: &Ensemble, d: &Derivative, h: f64) -> Ensemble {
    let x = e
        .positions()
        .iter()
        .zip(&d.dx)
        .map(|(a, b)| a + h * b)
        .collect();
    let v = e
        .velocities()
        .iter()
        .zip(&d.dv)
        .map(|(a, b)| a + h * b)
        .collect();
    Ensemble::from_parts(e.dim(), x, v, e.masses().map(<[f64]>::to_vec), e.time() + h)
}

/// One classical fourth-order Runge-Kutta step. `h` may be negative for
/// backward integration.
pub fn rk4_step(model: &CtModel, e: &Ensemble, h: f64) -> Result<Ensemble> {
    let k1 = model.rhs(e)?;
    let k2 = model.rhs(&advance(e, &k1, 0.5 * h))?;
    let k3 = model.rhs(&advance(e, &k2, 0.5 * h))?;
    let k4 = model.rhs(&advance(e, &k3, h))?;
    let comb = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..a.len())
            .map(|k| (a[k] + 2.0 * b[k] + 2.0 * c[k] + d[k]) / 6.0)
            .collect()
    };
    let step = Derivative {
        dx: comb(&k1.dx, &k2.dx, &k3.dx, &k4.dx),
        dv: comb(&k1.dv, &k2.dv, &k3.dv, &k4.dv),
    };
    Ok(advance(e, &step, h))
}

/// Output of [`integrate`].
#[derive(Debug, Clone)]
pub struct Run {
    pub final_state: Ensemble,
    /// One record for the initial state and one per step.
    pub diagnostics: Vec<DiagnosticsRecord>,
}

/// Integrates `steps` RK4 steps of size `h`.
///
/// The observer sees `(step, state, record)` for the initial state
/// (`step = 0`) and after every accepted step.
pub fn integrate<F>(
    model: &CtModel,
    e0: &Ensemble,
    h: f64,
    steps: usize,
    mut observer: F,
) -> Result<Run>
where
    F: FnMut(usize, &Ensemble, &DiagnosticsRecord),
{
    if !(h.is_finite() && h > 0.0) {
        return Err(FlockError::Config(format!("step h must be > 0, got {h}")));
    }
    if matches!(model.variant, CtVariant::Weighted { .. }) && e0.masses().is_none() {
        return Err(FlockError::Config("weighted model requires masses".into()));
    }
    let mut diagnostics = Vec::with_capacity(steps + 1);
    let rec = model.diagnostics(e0);
    observer(0, e0, &rec);
    diagnostics.push(rec);
    let mut state = e0.clone();
    for step in 1..=steps {
        state = rk4_step(model, &state, h).map_err(|err| err.at_step(step))?;
        let rec = model.diagnostics(&state);
        observer(step, &state, &rec);
        diagnostics.push(rec);
    }
    Ok(Run {
        final_state: state,
        diagnostics,
    })
}

/// Like [`integrate`] without diagnostics; returns only the final state.
pub fn evolve(model: &CtModel, e0: &Ensemble, h: f64, steps: usize) -> Result<Ensemble> {
    let mut state = e0.clone();
    for step in 1..=steps {
        state = rk4_step(model, &state, h).map_err(|err| err.at_step(step))?;
    }
    Ok(state)
}
