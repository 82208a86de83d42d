//! Closed-form solutions for two agents on a line with the plain power-law
//! weight `ψ(r) = (1 + r)^{-β}`.
//!
//! In difference variables `x = x₁ - x₂`, `v = v₁ - v₂` the symmetric model
//! reduces to `ẋ = v`, `v̇ = -K ψ(|x|) v`, whence
//! `v(t) + K ∫_{x₀}^{x(t)} ψ = v₀`. The fate of the pair is decided by
//! comparing `v₀` with `K ∫_{x₀}^∞ ψ`.

use std::fmt;

use crate::ensemble::Ensemble;
use crate::error::{FlockError, Result};
use crate::kernel::Kernel;

/// Critical-velocity comparison tolerance.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoParticleCase {
    pub x0: f64,
    pub v0: f64,
    pub k: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoParticleClass {
    /// The pair flocks.
    Subcritical,
    /// Both diverge with a common asymptotic velocity; `v(t) ~ t^{-(1-1/β)}`.
    Critical,
    /// Distinct asymptotic velocities.
    Supercritical,
}

impl fmt::Display for TwoParticleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TwoParticleClass::Subcritical => "subcritical",
            TwoParticleClass::Critical => "critical",
            TwoParticleClass::Supercritical => "supercritical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub class: TwoParticleClass,
    /// `β ≤ 1`: `∫ψ` diverges and every case flocks.
    pub divergent_tail: bool,
}

impl TwoParticleCase {
    pub fn new(x0: f64, v0: f64, k: f64, beta: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(x0) && ok(k) && ok(beta) && v0.is_finite() && v0 > 0.0) {
            return Err(FlockError::Domain(format!(
                "two-particle case needs x0 >= 0, v0 > 0, K >= 0, beta >= 0; got x0={x0}, v0={v0}, K={k}, beta={beta}"
            )));
        }
        Ok(TwoParticleCase { x0, v0, k, beta })
    }

    /// The same case started at the critical velocity.
    pub fn critical(x0: f64, k: f64, beta: f64) -> Result<Self> {
        let probe = TwoParticleCase {
            x0,
            v0: 1.0,
            k,
            beta,
        };
        let v0 = critical_velocity(&probe)?;
        Self::new(x0, v0, k, beta)
    }

    pub fn kernel(&self) -> Kernel {
        Kernel::power_plain(self.beta).expect("beta validated at construction")
    }

    /// Symmetric pair in one dimension: `x = ±x₀/2`, `v = ±v₀/2`.
    pub fn to_ensemble(&self) -> Ensemble {
        Ensemble::from_flat(
            1,
            vec![self.x0 / 2.0, -self.x0 / 2.0],
            vec![self.v0 / 2.0, -self.v0 / 2.0],
        )
        .expect("finite coordinates")
    }
}

/// Position and velocity differences `(x₁ - x₂, v₁ - v₂)` of a two-agent
/// one-dimensional ensemble.
pub fn differences(e: &Ensemble) -> Result<(f64, f64)> {
    if e.len() != 2 || e.dim() != 1 {
        return Err(FlockError::Config(format!(
            "expected 2 agents in 1 dimension, got {} in {}",
            e.len(),
            e.dim()
        )));
    }
    Ok((e.x(0)[0] - e.x(1)[0], e.v(0)[0] - e.v(1)[0]))
}

/// `K ∫_{x₀}^∞ (1 + y)^{-β} dy = K (1 + x₀)^{1-β} / (β - 1)`.
pub fn critical_velocity(case: &TwoParticleCase) -> Result<f64> {
    if case.beta <= 1.0 {
        return Err(FlockError::Divergent(format!(
            "tail integral of (1+r)^-beta diverges for beta = {} <= 1",
            case.beta
        )));
    }
    if case.k == 0.0 {
        return Ok(0.0);
    }
    Ok(case.k * (1.0 + case.x0).powf(1.0 - case.beta) / (case.beta - 1.0))
}

fn check_critical(case: &TwoParticleCase) -> Result<f64> {
    let vc = critical_velocity(case)?;
    if (case.v0 - vc).abs() > CRITICAL_TOL {
        return Err(FlockError::NotCritical {
            v0: case.v0,
            critical: vc,
        });
    }
    Ok(vc)
}

/// Exact `(x(t), v(t))` of a critical case.
pub fn critical_trajectory(case: &TwoParticleCase, t: f64) -> Result<(f64, f64)> {
    check_critical(case)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(FlockError::Domain(format!("time must be >= 0, got {t}")));
    }
    let b = case.beta;
    let k = case.k;
    let base = b * k * t / (b - 1.0) + (1.0 + case.x0).powf(b);
    let x = base.powf(1.0 / b) - 1.0;
    let v = k / (b - 1.0) * base.powf(1.0 / b - 1.0);
    Ok((x, v))
}

/// `v∞ = v₀ - K ∫_{x₀}^∞ ψ` for supercritical (or critical) data.
pub fn asymptotic_velocity(case: &TwoParticleCase) -> Result<f64> {
    let vc = critical_velocity(case)?;
    if case.v0 < vc - CRITICAL_TOL {
        return Err(FlockError::Domain(format!(
            "v0 = {} is subcritical (critical velocity {vc}); the pair flocks",
            case.v0
        )));
    }
    Ok(case.v0 - vc)
}

pub fn classify(case: &TwoParticleCase) -> Classification {
    match critical_velocity(case) {
        Err(_) => Classification {
            class: TwoParticleClass::Subcritical,
            divergent_tail: true,
        },
        Ok(vc) => {
            let class = if (case.v0 - vc).abs() <= CRITICAL_TOL {
                TwoParticleClass::Critical
            } else if case.v0 < vc {
                TwoParticleClass::Subcritical
            } else {
                TwoParticleClass::Supercritical
            };
            Classification {
                class,
                divergent_tail: false,
            }
        }
    }
}

/// `v₀ - K ∫_{x₀}^{x} ψ`: the velocity difference an exact solution has at
/// separation `x`.
pub fn velocity_at_separation(case: &TwoParticleCase, x: f64) -> Result<f64> {
    let b = case.beta;
    let prim = |y: f64| -> f64 {
        if (b - 1.0).abs() < 1e-15 {
            (1.0 + y).ln()
        } else {
            (1.0 + y).powf(1.0 - b) / (1.0 - b)
        }
    };
    if !(x.is_finite() && x >= 0.0) {
        return Err(FlockError::Domain(format!(
            "separation must be >= 0, got {x}"
        )));
    }
    Ok(case.v0 - case.k * (prim(x) - prim(case.x0)))
}
