//! Agent states, ensembles and the norm/diameter observables shared by
//! every model.

use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};

/// Position and velocity of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl AgentState {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Self {
        AgentState { x, v }
    }
}

/// Positions, velocities and optional masses of `N` agents in `d`
/// dimensions, at one time instant.
///
/// Coordinates are stored agent-major in flat buffers of length `N·d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    dim: usize,
    x: Vec<f64>,
    v: Vec<f64>,
    masses: Option<Vec<f64>>,
    time: f64,
}

const MASS_SUM_TOL: f64 = 1e-12;

impl Ensemble {
    pub fn new(agents: &[AgentState]) -> Result<Self> {
        let first = agents
            .first()
            .ok_or_else(|| FlockError::Config("ensemble needs at least one agent".into()))?;
        let dim = first.x.len();
        let mut x = Vec::with_capacity(agents.len() * dim);
        let mut v = Vec::with_capacity(agents.len() * dim);
        for (i, a) in agents.iter().enumerate() {
            if a.x.len() != dim || a.v.len() != dim {
                return Err(FlockError::Config(format!(
                    "agent {i} has dimensions ({}, {}), expected {dim}",
                    a.x.len(),
                    a.v.len()
                )));
            }
            x.extend_from_slice(&a.x);
            v.extend_from_slice(&a.v);
        }
        Self::from_flat(dim, x, v)
    }

    /// Builds an ensemble from agent-major coordinate buffers.
    pub fn from_flat(dim: usize, x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(FlockError::Config("dimension must be >= 1".into()));
        }
        if x.is_empty() || !x.len().is_multiple_of(dim) || x.len() != v.len() {
            return Err(FlockError::Config(format!(
                "coordinate buffers of lengths {} and {} do not describe N >= 1 agents in {dim} dimensions",
                x.len(),
                v.len()
            )));
        }
        if let Some(k) = x.iter().chain(v.iter()).position(|c| !c.is_finite()) {
            return Err(FlockError::Config(format!(
                "non-finite coordinate at flat index {k}"
            )));
        }
        Ok(Ensemble {
            dim,
            x,
            v,
            masses: None,
            time: 0.0,
        })
    }

    /// Attaches nonnegative masses summing to one.
    pub fn with_masses(mut self, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != self.len() {
            return Err(FlockError::Config(format!(
                "{} masses for {} agents",
                masses.len(),
                self.len()
            )));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(FlockError::Config("masses must be finite and >= 0".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_SUM_TOL {
            return Err(FlockError::Config(format!(
                "masses must sum to 1, got {total}"
            )));
        }
        self.masses = Some(masses);
        Ok(self)
    }

    /// Attaches uniform masses `1/N`.
    pub fn with_uniform_masses(self) -> Self {
        let n = self.len();
        let m = vec![1.0 / n as f64; n];
        Ensemble {
            masses: Some(m),
            ..self
        }
    }

    pub fn with_time(mut self, time: f64) -> Result<Self> {
        if !(time.is_finite() && time >= 0.0) {
            return Err(FlockError::Config(format!("time must be >= 0, got {time}")));
        }
        self.time = time;
        Ok(self)
    }

    /// Unchecked constructor for integrator output.
    pub(crate) fn from_parts(
        dim: usize,
        x: Vec<f64>,
        v: Vec<f64>,
        masses: Option<Vec<f64>>,
        time: f64,
    ) -> Self {
        Ensemble {
            dim,
            x,
            v,
            masses,
            time,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn v(&self, i: usize) -> &[f64] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    pub fn velocities(&self) -> &[f64] {
        &self.v
    }

    pub fn masses(&self) -> Option<&[f64]> {
        self.masses.as_deref()
    }

    pub fn agents(&self) -> Vec<AgentState> {
        (0..self.len())
            .map(|i| AgentState::new(self.x(i).to_vec(), self.v(i).to_vec()))
            .collect()
    }

    /// Total momentum `Σ m_i v_i`, with `m_i = 1` when no masses are set.
    pub fn momentum(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        for i in 0..self.len() {
            let m = self.masses.as_ref().map_or(1.0, |m| m[i]);
            for (pk, vk) in p.iter_mut().zip(self.v(i)) {
                *pk += m * vk;
            }
        }
        p
    }

    /// Arithmetic mean of positions and velocities.
    pub fn means(&self) -> (Vec<f64>, Vec<f64>) {
        (mean_of(&self.x, self.dim), mean_of(&self.v, self.dim))
    }

    /// Same ensemble with every position shifted by `dx` and every velocity
    /// by `dv`.
    pub fn translated(&self, dx: &[f64], dv: &[f64]) -> Self {
        let shift = |buf: &[f64], by: &[f64]| -> Vec<f64> {
            buf.chunks(self.dim)
                .flat_map(|c| c.iter().zip(by).map(|(a, b)| a + b))
                .collect()
        };
        Ensemble {
            x: shift(&self.x, dx),
            v: shift(&self.v, dv),
            ..self.clone()
        }
    }
}

fn mean_of(buf: &[f64], dim: usize) -> Vec<f64> {
    let n = buf.len() / dim;
    let mut m = vec![0.0; dim];
    for c in buf.chunks(dim) {
        for (mk, ck) in m.iter_mut().zip(c) {
            *mk += ck;
        }
    }
    m.iter_mut().for_each(|mk| *mk /= n as f64);
    m
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Spatial and velocity diameters with their maximizing pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diameters {
    pub dx: f64,
    pub dv: f64,
    /// First maximizing pair in lexicographic order.
    pub dx_pair: (usize, usize),
    pub dv_pair: (usize, usize),
}

/// `D(x) = max |x_i - x_j|`, `D(v) = max |v_i - v_j|`.
pub fn diameters(e: &Ensemble) -> Diameters {
    let n = e.len();
    let mut out = Diameters {
        dx: 0.0,
        dv: 0.0,
        dx_pair: (0, 0),
        dv_pair: (0, 0),
    };
    for i in 0..n {
        for j in i + 1..n {
            let dx = dist(e.x(i), e.x(j));
            if dx > out.dx {
                out.dx = dx;
                out.dx_pair = (i, j);
            }
            let dv = dist(e.v(i), e.v(j));
            if dv > out.dv {
                out.dv = dv;
                out.dv_pair = (i, j);
            }
        }
    }
    out
}

/// Sup-norms of the zero-sum shifted configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupNorms {
    pub x_sup: f64,
    pub v_sup: f64,
}

/// `max_i |x_i - x̄|` and `max_i |v_i - v̄|`, with arithmetic means.
pub fn sup_norms(e: &Ensemble) -> SupNorms {
    let (xm, vm) = e.means();
    let mut out = SupNorms {
        x_sup: 0.0,
        v_sup: 0.0,
    };
    for i in 0..e.len() {
        out.x_sup = out.x_sup.max(dist(e.x(i), &xm));
        out.v_sup = out.v_sup.max(dist(e.v(i), &vm));
    }
    out
}

/// Per-step observables written to the diagnostics CSV.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub dx: f64,
    pub dv: f64,
    pub x_sup: f64,
    pub v_sup: f64,
    pub kinetic_energy: f64,
    pub potential_energy: f64,
    pub lyapunov_plus: f64,
    pub lyapunov_minus: f64,
}
