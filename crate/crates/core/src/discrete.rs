//! Discrete-time flocking under leadership topologies.
//!
//! All variants share the update
//!
//! ```text
//! x_i(t+1) = x_i(t) + h v_i(t)
//! v_i(t+1) = v_i(t) + h Σ_j φ_ij(x(t)) (v_j(t) - v_i(t))  [+ h δ_i(t) q_i]
//! ```
//!
//! where both right-hand sides read the time-`t` state. The weight
//! `φ_ij` is `ψ(|x_i - x_j|)` on the edges of the active graph (every pair
//! for the all-to-all model) and zero elsewhere. No `K/N` factor is
//! applied; coupling is absorbed into `h` and `ψ`.

use crate::analysis;
use crate::ensemble::{diameters, dist, sup_norms, DiagnosticsRecord, Ensemble};
use crate::error::{FlockError, Result};
use crate::kernel::Kernel;
use crate::topology::{Digraph, SquareMatrix, SwitchingSignal};

#[derive(Debug, Clone, PartialEq)]
pub enum DtVariant {
    AllToAll,
    Leadership {
        graph: Digraph,
    },
    /// Leadership with weights `H ψ` and a constant preferred acceleration
    /// `q_i` switched on by the local disagreement
    /// `δ_i = mean_{j ∈ L(i)} |v_j - v_i|` (`δ_0 = 0`).
    Preference {
        graph: Digraph,
        strength: f64,
        preferences: Vec<Vec<f64>>,
        bound: f64,
    },
    Switching {
        graphs: Vec<Digraph>,
        signal: SwitchingSignal,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtModel {
    h: f64,
    kernel: Kernel,
    variant: DtVariant,
    /// Leader lists per graph, indexed `[graph][agent]`.
    leaders: Vec<Vec<Vec<usize>>>,
}

fn leader_lists(g: &Digraph) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); g.n_vertices()];
    for (j, i) in g.edges() {
        out[i].push(j);
    }
    out
}

impl DtModel {
    pub fn new(h: f64, kernel: Kernel, variant: DtVariant) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(FlockError::Config(format!(
                "time step h must be > 0, got {h}"
            )));
        }
        let leaders = match &variant {
            DtVariant::AllToAll => Vec::new(),
            DtVariant::Leadership { graph } => vec![leader_lists(graph)],
            DtVariant::Preference {
                graph,
                strength,
                preferences,
                bound,
            } => {
                if !(strength.is_finite() && *strength > 0.0) {
                    return Err(FlockError::Config(format!(
                        "leader-follower strength H must be > 0, got {strength}"
                    )));
                }
                if preferences.len() != graph.n_vertices() {
                    return Err(FlockError::Config(format!(
                        "{} preferences for {} agents",
                        preferences.len(),
                        graph.n_vertices()
                    )));
                }
                for (i, q) in preferences.iter().enumerate() {
                    let size = q.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if !(size <= *bound) {
                        return Err(FlockError::Config(format!(
                            "preference of agent {i} has size {size} > bound {bound}"
                        )));
                    }
                }
                let lists = leader_lists(graph);
                if let Some(i) = (1..lists.len()).find(|&i| lists[i].is_empty()) {
                    return Err(FlockError::Config(format!(
                        "agent {i} has no leaders; preference dynamics needs a leader for every follower"
                    )));
                }
                vec![lists]
            }
            DtVariant::Switching { graphs, signal } => {
                if graphs.is_empty() {
                    return Err(FlockError::Config(
                        "switching model needs at least one graph".into(),
                    ));
                }
                let n = graphs[0].n_vertices();
                if graphs.iter().any(|g| g.n_vertices() != n) {
                    return Err(FlockError::Config("switching graphs differ in size".into()));
                }
                signal.validate(0, graphs.len())?;
                graphs.iter().map(leader_lists).collect()
            }
        };
        Ok(DtModel {
            h,
            kernel,
            variant,
            leaders,
        })
    }

    pub fn all_to_all(h: f64, kernel: Kernel) -> Result<Self> {
        Self::new(h, kernel, DtVariant::AllToAll)
    }

    pub fn leadership(h: f64, kernel: Kernel, graph: Digraph) -> Result<Self> {
        Self::new(h, kernel, DtVariant::Leadership { graph })
    }

    pub fn switching(
        h: f64,
        kernel: Kernel,
        graphs: Vec<Digraph>,
        signal: SwitchingSignal,
    ) -> Result<Self> {
        Self::new(h, kernel, DtVariant::Switching { graphs, signal })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn variant(&self) -> &DtVariant {
        &self.variant
    }

    fn weight_scale(&self) -> f64 {
        match &self.variant {
            DtVariant::Preference { strength, .. } => *strength,
            _ => 1.0,
        }
    }

    /// Graph active at step `t`, or `None` for the all-to-all model.
    pub fn graph_at(&self, t: usize) -> Result<Option<&Digraph>> {
        Ok(match &self.variant {
            DtVariant::AllToAll => None,
            DtVariant::Leadership { graph } | DtVariant::Preference { graph, .. } => Some(graph),
            DtVariant::Switching { graphs, signal } => Some(&graphs[signal.graph_at(t)?]),
        })
    }

    fn leaders_at(&self, t: usize) -> Result<&[Vec<usize>]> {
        Ok(match &self.variant {
            DtVariant::Switching { signal, .. } => &self.leaders[signal.graph_at(t)?],
            _ => &self.leaders[0],
        })
    }

    /// State-independent step bound `1 / (scale · ψ(0) · max in-degree)`
    /// guaranteeing `h Σ_j φ_ij < 1` for every configuration.
    pub fn stability_bound(&self, n_agents: usize) -> f64 {
        let max_deg = match &self.variant {
            DtVariant::AllToAll => n_agents.saturating_sub(1),
            _ => self
                .leaders
                .iter()
                .flat_map(|g| g.iter().map(Vec::len))
                .max()
                .unwrap_or(0),
        };
        1.0 / (self.weight_scale() * self.kernel.max_value() * max_deg as f64)
    }

    fn check_size(&self, e: &Ensemble) -> Result<()> {
        if let Some(g) = self.leaders.first() {
            if g.len() != e.len() {
                return Err(FlockError::Config(format!(
                    "graph has {} vertices but the ensemble has {} agents",
                    g.len(),
                    e.len()
                )));
            }
        }
        Ok(())
    }

    /// Applies one update. `t` is the step index read by the switching
    /// signal.
    pub fn step(&self, e: &Ensemble, t: usize) -> Result<Ensemble> {
        self.check_size(e)?;
        let n = e.len();
        let dim = e.dim();
        let h = self.h;
        let scale = self.weight_scale();
        let all: Vec<Vec<usize>>;
        let leaders: &[Vec<usize>] = match &self.variant {
            DtVariant::AllToAll => {
                all = (0..n)
                    .map(|i| (0..n).filter(|&j| j != i).collect())
                    .collect();
                &all
            }
            _ => self.leaders_at(t)?,
        };
        let mut v_new = e.velocities().to_vec();
        for i in 0..n {
            let mut degree = 0.0;
            let mut disagreement = 0.0;
            for &j in &leaders[i] {
                let phi = scale * self.kernel.value(dist(e.x(i), e.x(j)));
                degree += phi;
                for c in 0..dim {
                    v_new[i * dim + c] += h * phi * (e.v(j)[c] - e.v(i)[c]);
                }
                disagreement += dist(e.v(j), e.v(i));
            }
            if h * degree >= 1.0 {
                return Err(FlockError::Stability {
                    agent: i,
                    scaled_degree: h * degree,
                });
            }
            if let DtVariant::Preference { preferences, .. } = &self.variant {
                if i > 0 {
                    let delta = disagreement / leaders[i].len() as f64;
                    for c in 0..dim {
                        v_new[i * dim + c] += h * delta * preferences[i][c];
                    }
                }
            }
        }
        let x_new = e
            .positions()
            .iter()
            .zip(e.velocities())
            .map(|(x, v)| x + h * v)
            .collect();
        Ok(Ensemble::from_parts(
            dim,
            x_new,
            v_new,
            e.masses().map(<[f64]>::to_vec),
            e.time() + h,
        ))
    }

    /// Flocking matrix of the active graph at step `t`, acting on the
    /// fluctuations `v_i - v_0`, `i = 1..N`.
    pub fn flocking_matrix(&self, e: &Ensemble, t: usize) -> Result<SquareMatrix> {
        let g = self
            .graph_at(t)?
            .ok_or_else(|| FlockError::Config("the all-to-all model has no leader".into()))?;
        weighted_flocking_matrix(e, g, self.h, &self.kernel, self.weight_scale())
    }

    /// Smallest edge weight `φ_m(t)` of the active graph.
    pub fn min_edge_weight(&self, e: &Ensemble, t: usize) -> Result<f64> {
        let g = self
            .graph_at(t)?
            .ok_or_else(|| FlockError::Config("the all-to-all model has no leader".into()))?;
        Ok(self.weight_scale() * min_edge_weight(e, g, &self.kernel))
    }

    pub fn diagnostics(&self, e: &Ensemble) -> DiagnosticsRecord {
        let d = diameters(e);
        let s = sup_norms(e);
        DiagnosticsRecord {
            time: e.time(),
            dx: d.dx,
            dv: d.dv,
            x_sup: s.x_sup,
            v_sup: s.v_sup,
            kinetic_energy: analysis::kinetic_energy(e),
            ..Default::default()
        }
    }
}

/// `P_t = I - h L_t` on the follower fluctuations, for a graph in which
/// vertex 0 has no leaders.
pub fn flocking_matrix(
    e: &Ensemble,
    graph: &Digraph,
    h: f64,
    kernel: &Kernel,
) -> Result<SquareMatrix> {
    weighted_flocking_matrix(e, graph, h, kernel, 1.0)
}

fn weighted_flocking_matrix(
    e: &Ensemble,
    graph: &Digraph,
    h: f64,
    kernel: &Kernel,
    scale: f64,
) -> Result<SquareMatrix> {
    let n = graph.n_vertices();
    if n != e.len() {
        return Err(FlockError::Config(format!(
            "graph has {n} vertices but the ensemble has {} agents",
            e.len()
        )));
    }
    if let Some(&j) = graph.leader_set(0).first() {
        return Err(FlockError::NotRooted { vertex: j, root: 0 });
    }
    let mut p = SquareMatrix::identity(n - 1);
    for i in 1..n {
        let mut degree = 0.0;
        for j in graph.leader_set(i) {
            let phi = scale * kernel.value(dist(e.x(i), e.x(j)));
            degree += phi;
            if j > 0 {
                p[(i - 1, j - 1)] = h * phi;
            }
        }
        if h * degree >= 1.0 {
            return Err(FlockError::Stability {
                agent: i,
                scaled_degree: h * degree,
            });
        }
        p[(i - 1, i - 1)] = 1.0 - h * degree;
    }
    Ok(p)
}

/// `min_{(j,i) ∈ E} ψ(|x_i - x_j|)`; `+∞` for an edgeless graph.
pub fn min_edge_weight(e: &Ensemble, graph: &Digraph, kernel: &Kernel) -> f64 {
    graph
        .edges()
        .map(|(j, i)| kernel.value(dist(e.x(i), e.x(j))))
        .fold(f64::INFINITY, f64::min)
}

/// Velocity fluctuations `v_i - v_0`, `i = 1..N`, stacked.
pub fn fluctuations(e: &Ensemble) -> Vec<f64> {
    let v0 = e.v(0);
    (1..e.len())
        .flat_map(|i| e.v(i).iter().zip(v0).map(|(a, b)| a - b))
        .collect()
}

#[derive(Debug, Clone)]
pub struct DtRun {
    pub final_state: Ensemble,
    pub diagnostics: Vec<DiagnosticsRecord>,
}

/// Iterates `steps` updates. The observer sees `(t, state, record)` for
/// the initial state and after each update.
pub fn simulate<F>(model: &DtModel, e0: &Ensemble, steps: usize, mut observer: F) -> Result<DtRun>
where
    F: FnMut(usize, &Ensemble, &DiagnosticsRecord),
{
    if let DtVariant::Switching { graphs, signal } = &model.variant {
        signal.validate(steps, graphs.len())?;
    }
    model.check_size(e0)?;
    let mut diagnostics = Vec::with_capacity(steps + 1);
    let rec = model.diagnostics(e0);
    observer(0, e0, &rec);
    diagnostics.push(rec);
    let mut state = e0.clone();
    for t in 0..steps {
        state = model.step(&state, t).map_err(|err| err.at_step(t))?;
        let rec = model.diagnostics(&state);
        observer(t + 1, &state, &rec);
        diagnostics.push(rec);
    }
    Ok(DtRun {
        final_state: state,
        diagnostics,
    })
}
