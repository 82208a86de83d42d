//! Scenario files, embedded presets and the `run` / `check` / `study`
//! drivers behind the command-line tool.
//!
//! Scenarios are sectioned key-value files (TOML). Every key is checked:
//! unknown keys, keys that do not belong to the selected model, and
//! missing required keys are configuration errors reported before any
//! computation starts.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::analysis::{self, classify_outcome, ClassifyConfig, ConditionReport, Outcome};
use crate::continuous::{integrate, CtModel, CtVariant};
use crate::discrete::{simulate, DtModel, DtVariant};
use crate::ensemble::{DiagnosticsRecord, Ensemble};
use crate::error::{FlockError, Result};
use crate::kernel::Kernel;
use crate::meanfield::{self, DensitySpec, Marginal, Study, StudyConfig};
use crate::topology::{self, leader_distance, Digraph, SwitchingSignal};
use crate::two_particle::{self, TwoParticleCase, TwoParticleClass};

/// Embedded presets as `(name, source)`.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "two-particle-critical",
        include_str!("../presets/two-particle-critical.toml"),
    ),
    (
        "two-particle-supercritical",
        include_str!("../presets/two-particle-supercritical.toml"),
    ),
    (
        "theorem-T1-demo",
        include_str!("../presets/theorem-T1-demo.toml"),
    ),
    ("mt-fat-tail", include_str!("../presets/mt-fat-tail.toml")),
    ("bonding-ring", include_str!("../presets/bonding-ring.toml")),
    (
        "hierarchy-chain",
        include_str!("../presets/hierarchy-chain.toml"),
    ),
    (
        "alternating-leaders",
        include_str!("../presets/alternating-leaders.toml"),
    ),
    (
        "hydro-weighted",
        include_str!("../presets/hydro-weighted.toml"),
    ),
];

/// Study presets, used by `study --config preset:NAME`.
pub const STUDY_PRESETS: &[(&str, &str)] = &[(
    "meanfield-ladder",
    include_str!("../presets/meanfield-ladder.toml"),
)];

/// Column header of the diagnostics CSV.
pub const DIAGNOSTICS_HEADER: &str = "t,Dx,Dv,x_sup,v_sup,E_k,E_p,L_plus,L_minus";

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .chain(STUDY_PRESETS)
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
}

/// Reads a config argument: `preset:NAME` or a file path. Returns the text
/// and the directory relative paths inside it resolve against.
pub fn load_config(arg: &str) -> Result<(String, PathBuf)> {
    if let Some(name) = arg.strip_prefix("preset:") {
        let text = preset(name).ok_or_else(|| {
            let known: Vec<&str> = PRESETS
                .iter()
                .chain(STUDY_PRESETS)
                .map(|(n, _)| *n)
                .collect();
            FlockError::Config(format!(
                "unknown preset {name:?}; known: {}",
                known.join(", ")
            ))
        })?;
        return Ok((text.to_string(), PathBuf::from(".")));
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path).map_err(|e| FlockError::Io(format!("{arg}: {e}")))?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((text, base))
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    model: ModelSection,
    kernel: KernelSection,
    initial: InitialSection,
    time: TimeSection,
    topology: Option<TopologySection>,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    checks: ChecksSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    kind: String,
    coupling_k: Option<f64>,
    k0: Option<f64>,
    k1: Option<f64>,
    k2: Option<f64>,
    bond_radius_r: Option<f64>,
    strength_h: Option<f64>,
    preference_bound: Option<f64>,
    preferences: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    family: String,
    beta: Option<f64>,
    value: Option<f64>,
    r: Option<Vec<f64>>,
    psi: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    kind: String,
    // explicit
    x: Option<Vec<Vec<f64>>>,
    v: Option<Vec<Vec<f64>>>,
    // sample / ring
    n: Option<usize>,
    dim: Option<usize>,
    x_half_width: Option<f64>,
    v_half_width: Option<f64>,
    seed: Option<u64>,
    ring_radius: Option<f64>,
    // two-particle
    x0: Option<f64>,
    v0: Option<f64>,
    masses: Option<Vec<f64>>,
    #[serde(default)]
    uniform_masses: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    step_h: Option<f64>,
    step_fraction_of_bound: Option<f64>,
    horizon_t: Option<f64>,
    horizon_steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    graphs: Vec<GraphSection>,
    pattern: Option<Vec<usize>>,
    dwell: Option<usize>,
    schedule: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSection {
    kind: String,
    order: Option<Vec<usize>>,
    root: Option<usize>,
    edges: Option<Vec<[usize; 2]>>,
    file: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    #[serde(default = "default_every")]
    every: usize,
    #[serde(default = "default_diagnostics_file")]
    diagnostics_file: String,
    #[serde(default = "default_report_file")]
    report_file: String,
}

fn default_every() -> usize {
    1
}
fn default_diagnostics_file() -> String {
    "diagnostics.csv".into()
}
fn default_report_file() -> String {
    "report.txt".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            every: default_every(),
            diagnostics_file: default_diagnostics_file(),
            report_file: default_report_file(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChecksSection {
    conditions: Option<Vec<String>>,
    classify_tol: Option<f64>,
    classify_growth_factor: Option<f64>,
    decay_window_fraction: Option<f64>,
}

// ---------------------------------------------------------------------------
// Validated scenario

#[derive(Debug, Clone)]
pub enum ModelSpec {
    Continuous(CtModel),
    Discrete(DtModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Symmetric,
    MotschTadmor,
    Bonding,
    Hydro,
}

impl Condition {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "symmetric" => Condition::Symmetric,
            "motsch-tadmor" => Condition::MotschTadmor,
            "bonding" => Condition::Bonding,
            "hydro" => Condition::Hydro,
            other => return Err(FlockError::Config(format!(
                "unknown condition {other:?}; expected symmetric, motsch-tadmor, bonding or hydro"
            ))),
        })
    }
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: ModelSpec,
    pub initial: Ensemble,
    /// Step size; for discrete models this is the model's `h`.
    pub h: f64,
    pub steps: usize,
    pub conditions: Vec<Condition>,
    pub classify: ClassifyConfig,
    pub decay_window_fraction: f64,
    pub every: usize,
    pub diagnostics_file: String,
    pub report_file: String,
    /// Set when the initial data came from a two-particle case.
    pub two_particle: Option<TwoParticleCase>,
}

fn need<T: Copy>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| FlockError::Config(format!("missing required key {what}")))
}

fn forbid(present: bool, what: &str, ctx: &str) -> Result<()> {
    if present {
        return Err(FlockError::Config(format!(
            "key {what} is not used by {ctx}"
        )));
    }
    Ok(())
}

fn build_kernel(k: &KernelSection) -> Result<Kernel> {
    let ctx = format!("kernel family {:?}", k.family);
    match k.family.as_str() {
        "power-plain" | "power-squared" => {
            forbid(k.value.is_some(), "kernel.value", &ctx)?;
            forbid(k.r.is_some() || k.psi.is_some(), "kernel.r/psi", &ctx)?;
            let beta = need(k.beta, "kernel.beta")?;
            if k.family == "power-plain" {
                Kernel::power_plain(beta)
            } else {
                Kernel::power_squared(beta)
            }
        }
        "constant" => {
            forbid(k.beta.is_some(), "kernel.beta", &ctx)?;
            forbid(k.r.is_some() || k.psi.is_some(), "kernel.r/psi", &ctx)?;
            Kernel::constant(need(k.value, "kernel.value")?)
        }
        "tabulated" => {
            forbid(k.beta.is_some() || k.value.is_some(), "kernel.beta/value", &ctx)?;
            let r = k.r.clone().ok_or_else(|| FlockError::Config("missing required key kernel.r".into()))?;
            let psi = k.psi.clone().ok_or_else(|| FlockError::Config("missing required key kernel.psi".into()))?;
            Kernel::tabulated(r, psi)
        }
        other => Err(FlockError::Config(format!(
            "unknown kernel family {other:?}; expected power-plain, power-squared, constant or tabulated"
        ))),
    }
    .map_err(as_config)
}

/// Construction errors in a config are validation errors.
fn as_config(e: FlockError) -> FlockError {
    match e {
        FlockError::Config(_) => e,
        other => FlockError::Config(other.to_string()),
    }
}

/// Ring radius minimising the spring energy of `n` agents at bond length
/// `2R` on a regular polygon.
pub fn optimal_ring_radius(n: usize, bond_radius: f64) -> f64 {
    let (mut s1, mut s2) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let a = 2.0 * (std::f64::consts::PI * (i as f64 - j as f64).abs() / n as f64).sin();
                s1 += a;
                s2 += a * a;
            }
        }
    }
    if s2 == 0.0 {
        0.0
    } else {
        2.0 * bond_radius * s1 / s2
    }
}

fn build_initial(
    s: &InitialSection,
    model: &ModelSection,
    seed_override: Option<u64>,
) -> Result<(Ensemble, Option<TwoParticleCase>)> {
    let ctx = format!("initial kind {:?}", s.kind);
    let seed = seed_override.or(s.seed).unwrap_or(0);
    let mut tp = None;
    let e = match s.kind.as_str() {
        "explicit" => {
            forbid(s.n.is_some() || s.dim.is_some() || s.seed.is_some(), "initial.n/dim/seed", &ctx)?;
            forbid(s.x0.is_some() || s.v0.is_some(), "initial.x0/v0", &ctx)?;
            let x = s.x.as_ref().ok_or_else(|| FlockError::Config("missing required key initial.x".into()))?;
            let v = s.v.as_ref().ok_or_else(|| FlockError::Config("missing required key initial.v".into()))?;
            if x.len() != v.len() {
                return Err(FlockError::Config(format!("{} positions but {} velocities", x.len(), v.len())));
            }
            let agents: Vec<_> = x
                .iter()
                .zip(v)
                .map(|(x, v)| crate::ensemble::AgentState::new(x.clone(), v.clone()))
                .collect();
            Ensemble::new(&agents)?
        }
        "sample" => {
            forbid(s.x.is_some() || s.v.is_some(), "initial.x/v", &ctx)?;
            forbid(s.x0.is_some() || s.v0.is_some(), "initial.x0/v0", &ctx)?;
            let spec = DensitySpec::uniform_box(
                need(s.dim, "initial.dim")?,
                need(s.x_half_width, "initial.x_half_width")?,
                need(s.v_half_width, "initial.v_half_width")?,
            )?;
            meanfield::sample(&spec, need(s.n, "initial.n")?, seed)?
        }
        "ring" => {
            forbid(s.x.is_some() || s.v.is_some(), "initial.x/v", &ctx)?;
            forbid(s.dim.is_some() || s.x_half_width.is_some(), "initial.dim/x_half_width", &ctx)?;
            let n = need(s.n, "initial.n")?;
            let radius = match s.ring_radius {
                Some(r) => r,
                None => optimal_ring_radius(n, need(model.bond_radius_r, "model.bond_radius_r (for the default ring radius)")?),
            };
            let amp = s.v_half_width.unwrap_or(0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = Vec::with_capacity(2 * n);
            let mut v = Vec::with_capacity(2 * n);
            for i in 0..n {
                let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                x.extend_from_slice(&[radius * th.cos(), radius * th.sin()]);
                for _ in 0..2 {
                    v.push(if amp > 0.0 { rng.gen_range(-amp..=amp) } else { 0.0 });
                }
            }
            Ensemble::from_flat(2, x, v)?
        }
        "two-particle" | "two-particle-critical" => {
            forbid(s.x.is_some() || s.v.is_some() || s.n.is_some(), "initial.x/v/n", &ctx)?;
            let k = need(model.coupling_k, "model.coupling_k")?;
            let x0 = need(s.x0, "initial.x0")?;
            let case = if s.kind == "two-particle" {
                TwoParticleCase::new(x0, need(s.v0, "initial.v0")?, k, 0.0)?
            } else {
                forbid(s.v0.is_some(), "initial.v0", &ctx)?;
                TwoParticleCase::new(x0, 1.0, k, 0.0)?
            };
            tp = Some(case);
            case.to_ensemble()
        }
        other => {
            return Err(FlockError::Config(format!(
                "unknown initial kind {other:?}; expected explicit, sample, ring, two-particle or two-particle-critical"
            )))
        }
    };
    let e = match (&s.masses, s.uniform_masses) {
        (Some(_), true) => {
            return Err(FlockError::Config(
                "give either initial.masses or initial.uniform_masses".into(),
            ))
        }
        (Some(m), false) => e.with_masses(m.clone())?,
        (None, true) => e.with_uniform_masses(),
        (None, false) => e,
    };
    Ok((e, tp))
}

fn build_graph(g: &GraphSection, n: usize, base: &Path) -> Result<Digraph> {
    let ctx = format!("graph kind {:?}", g.kind);
    let graph = match g.kind.as_str() {
        "chain" => Digraph::chain(n),
        "complete-hierarchy" => Digraph::new(n, (0..n).flat_map(|j| (j + 1..n).map(move |i| (j, i))))?,
        "path" => Digraph::path(n, g.order.as_deref().ok_or_else(|| FlockError::Config("missing required key order".into()))?)?,
        "star" => Digraph::star(n, g.root.unwrap_or(0))?,
        "edges" => Digraph::new(
            n,
            g.edges
                .as_ref()
                .ok_or_else(|| FlockError::Config("missing required key edges".into()))?
                .iter()
                .map(|&[j, i]| (j, i)),
        )?,
        "file" => {
            let rel = g.file.as_ref().ok_or_else(|| FlockError::Config("missing required key file".into()))?;
            let path = base.join(rel);
            let text = fs::read_to_string(&path).map_err(|e| FlockError::Io(format!("{}: {e}", path.display())))?;
            let parsed = Digraph::parse_edge_list(&text)?;
            if parsed.n_vertices() != n {
                return Err(FlockError::Config(format!(
                    "{} has {} vertices, the ensemble has {n} agents",
                    path.display(),
                    parsed.n_vertices()
                )));
            }
            parsed
        }
        other => {
            return Err(FlockError::Config(format!(
                "unknown graph kind {other:?}; expected chain, complete-hierarchy, path, star, edges or file"
            )))
        }
    };
    forbid(g.kind != "path" && g.order.is_some(), "order", &ctx)?;
    forbid(g.kind != "star" && g.root.is_some(), "root", &ctx)?;
    forbid(g.kind != "edges" && g.edges.is_some(), "edges", &ctx)?;
    forbid(g.kind != "file" && g.file.is_some(), "file", &ctx)?;
    Ok(graph)
}

impl Scenario {
    /// Parses and validates a scenario. `base` resolves relative topology
    /// files; `seed` overrides the sampling seed.
    pub fn from_toml(text: &str, base: &Path, seed: Option<u64>) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text)
            .map_err(|e| FlockError::Config(e.to_string().replace('\n', " ")))?;
        let m = &file.model;
        let kernel = build_kernel(&file.kernel)?;
        let (initial, mut two_particle) = build_initial(&file.initial, m, seed)?;
        let ctx = format!("model kind {:?}", m.kind);
        let continuous = matches!(
            m.kind.as_str(),
            "symmetric" | "motsch-tadmor" | "bonding" | "weighted"
        );
        let bonding_keys =
            m.k0.is_some() || m.k1.is_some() || m.k2.is_some() || m.bond_radius_r.is_some();
        let pref_keys =
            m.strength_h.is_some() || m.preference_bound.is_some() || m.preferences.is_some();
        if m.kind != "bonding" {
            forbid(bonding_keys, "model.k0/k1/k2/bond_radius_r", &ctx)?;
        }
        if m.kind != "preference" {
            forbid(
                pref_keys,
                "model.strength_h/preference_bound/preferences",
                &ctx,
            )?;
        }
        if continuous {
            forbid(file.topology.is_some(), "[topology]", &ctx)?;
        }
        if let Some(case) = &mut two_particle {
            // The oracle is defined for the plain power law only.
            if let Kernel::PowerLawPlain { beta } = kernel {
                case.beta = beta;
                if file.initial.kind == "two-particle-critical" {
                    *case = TwoParticleCase::critical(case.x0, case.k, beta).map_err(as_config)?;
                }
            } else {
                return Err(FlockError::Config(
                    "two-particle initial data needs the power-plain kernel".into(),
                ));
            }
            if m.kind != "symmetric" {
                return Err(FlockError::Config(
                    "two-particle initial data needs the symmetric model".into(),
                ));
            }
        }
        let initial = match &two_particle {
            Some(case) => case.to_ensemble(),
            None => initial,
        };
        let t = &file.time;
        let (model, h, steps) = if continuous {
            forbid(
                t.step_fraction_of_bound.is_some(),
                "time.step_fraction_of_bound",
                &ctx,
            )?;
            forbid(
                t.horizon_steps.is_some(),
                "time.horizon_steps (continuous models use horizon_t)",
                &ctx,
            )?;
            let model = match m.kind.as_str() {
                "symmetric" => CtModel::symmetric(need(m.coupling_k, "model.coupling_k")?, kernel),
                "motsch-tadmor" => {
                    CtModel::motsch_tadmor(need(m.coupling_k, "model.coupling_k")?, kernel)
                }
                "weighted" => {
                    if initial.masses().is_none() {
                        return Err(FlockError::Config(
                            "the weighted model needs initial.masses or initial.uniform_masses"
                                .into(),
                        ));
                    }
                    CtModel::weighted(need(m.coupling_k, "model.coupling_k")?, kernel)
                }
                _ => {
                    forbid(
                        m.coupling_k.is_some(),
                        "model.coupling_k (bonding uses k0)",
                        &ctx,
                    )?;
                    CtModel::bonding(
                        need(m.k0, "model.k0")?,
                        need(m.k1, "model.k1")?,
                        need(m.k2, "model.k2")?,
                        need(m.bond_radius_r, "model.bond_radius_r")?,
                        kernel,
                    )
                }
            }?;
            let h = t.step_h.unwrap_or_else(|| model.default_step());
            if !(h.is_finite() && h > 0.0) {
                return Err(FlockError::Config(format!(
                    "time.step_h must be > 0, got {h}"
                )));
            }
            let horizon = need(t.horizon_t, "time.horizon_t")?;
            if !(horizon.is_finite() && horizon >= 0.0) {
                return Err(FlockError::Config(format!(
                    "time.horizon_t must be >= 0, got {horizon}"
                )));
            }
            let steps = (horizon / h).round() as usize;
            (ModelSpec::Continuous(model), h, steps)
        } else {
            forbid(
                m.coupling_k.is_some(),
                "model.coupling_k (discrete models absorb coupling into h and the kernel)",
                &ctx,
            )?;
            forbid(
                t.horizon_t.is_some(),
                "time.horizon_t (discrete models use horizon_steps)",
                &ctx,
            )?;
            let steps = need(t.horizon_steps, "time.horizon_steps")?;
            let n = initial.len();
            let topo = file.topology.as_ref();
            let base_graphs = |min: usize| -> Result<Vec<Digraph>> {
                let topo = topo.ok_or_else(|| {
                    FlockError::Config(format!("{ctx} needs a [topology] section"))
                })?;
                if topo.graphs.len() < min {
                    return Err(FlockError::Config(format!(
                        "{ctx} needs at least {min} graph(s)"
                    )));
                }
                topo.graphs
                    .iter()
                    .map(|g| build_graph(g, n, base))
                    .collect()
            };
            let single = |gs: Vec<Digraph>| -> Result<Digraph> {
                if gs.len() != 1 {
                    return Err(FlockError::Config(format!("{ctx} takes exactly one graph")));
                }
                let t = topo.expect("graphs exist");
                forbid(
                    t.pattern.is_some() || t.schedule.is_some() || t.dwell.is_some(),
                    "topology.pattern/schedule/dwell",
                    &ctx,
                )?;
                Ok(gs.into_iter().next().expect("one graph"))
            };
            let variant = match m.kind.as_str() {
                "all-to-all" => {
                    forbid(topo.is_some(), "[topology]", &ctx)?;
                    DtVariant::AllToAll
                }
                "leadership" => DtVariant::Leadership {
                    graph: single(base_graphs(1)?)?,
                },
                "preference" => DtVariant::Preference {
                    graph: single(base_graphs(1)?)?,
                    strength: need(m.strength_h, "model.strength_h")?,
                    preferences: m
                        .preferences
                        .clone()
                        .ok_or_else(|| FlockError::Config("missing required key model.preferences".into()))?,
                    bound: need(m.preference_bound, "model.preference_bound")?,
                },
                "switching" => {
                    let graphs = base_graphs(1)?;
                    let t = topo.expect("graphs exist");
                    let signal = match (&t.pattern, &t.schedule) {
                        (Some(p), None) => SwitchingSignal::periodic_dwell(p, t.dwell.unwrap_or(1)),
                        (None, Some(s)) => {
                            forbid(t.dwell.is_some(), "topology.dwell", "explicit schedules")?;
                            SwitchingSignal::Explicit(s.clone())
                        }
                        _ => {
                            return Err(FlockError::Config(
                                "switching needs exactly one of topology.pattern or topology.schedule".into(),
                            ))
                        }
                    };
                    signal.validate(steps, graphs.len())?;
                    DtVariant::Switching { graphs, signal }
                }
                other => {
                    return Err(FlockError::Config(format!(
                        "unknown model kind {other:?}; expected symmetric, motsch-tadmor, bonding, weighted, all-to-all, leadership, preference or switching"
                    )))
                }
            };
            let h = match (t.step_h, t.step_fraction_of_bound) {
                (Some(h), None) => h,
                (None, Some(f)) => {
                    if !(f > 0.0 && f < 1.0) {
                        return Err(FlockError::Config(format!("time.step_fraction_of_bound must lie in (0, 1), got {f}")));
                    }
                    let probe = DtModel::new(1.0, kernel.clone(), variant.clone()).map_err(as_config)?;
                    f * probe.stability_bound(n)
                }
                _ => {
                    return Err(FlockError::Config(
                        "discrete models need exactly one of time.step_h or time.step_fraction_of_bound".into(),
                    ))
                }
            };
            let model = DtModel::new(h, kernel, variant).map_err(as_config)?;
            (ModelSpec::Discrete(model), h, steps)
        };
        let c = &file.checks;
        let conditions = match &c.conditions {
            Some(list) => list
                .iter()
                .map(|s| Condition::parse(s))
                .collect::<Result<Vec<_>>>()?,
            None => match m.kind.as_str() {
                "symmetric" if two_particle.is_none() => vec![Condition::Symmetric],
                "motsch-tadmor" => vec![Condition::MotschTadmor],
                "bonding" => vec![Condition::Bonding],
                "weighted" => vec![Condition::Hydro],
                _ => Vec::new(),
            },
        };
        if !continuous && !conditions.is_empty() {
            return Err(FlockError::Config(
                "condition checks apply to continuous models only".into(),
            ));
        }
        let classify = ClassifyConfig {
            tol: c.classify_tol.unwrap_or(ClassifyConfig::default().tol),
            growth_factor: c
                .classify_growth_factor
                .unwrap_or(ClassifyConfig::default().growth_factor),
        };
        let decay_window_fraction = c.decay_window_fraction.unwrap_or(0.5);
        if !(decay_window_fraction > 0.0 && decay_window_fraction <= 1.0) {
            return Err(FlockError::Config(
                "checks.decay_window_fraction must lie in (0, 1]".into(),
            ));
        }
        if file.output.every == 0 {
            return Err(FlockError::Config("output.every must be >= 1".into()));
        }
        Ok(Scenario {
            name: file.name.clone().unwrap_or_else(|| "scenario".into()),
            model,
            initial,
            h,
            steps,
            conditions,
            classify,
            decay_window_fraction,
            every: file.output.every,
            diagnostics_file: file.output.diagnostics_file.clone(),
            report_file: file.output.report_file.clone(),
            two_particle,
        })
    }

    pub fn from_preset(name: &str) -> Result<Self> {
        let text =
            preset(name).ok_or_else(|| FlockError::Config(format!("unknown preset {name:?}")))?;
        Self::from_toml(text, Path::new("."), None)
    }
}

// ---------------------------------------------------------------------------
// Drivers

/// Condition reports, or the reason a condition is not applicable.
pub fn condition_reports(
    s: &Scenario,
) -> Result<Vec<std::result::Result<ConditionReport, (Condition, FlockError)>>> {
    let ModelSpec::Continuous(model) = &s.model else {
        return Ok(Vec::new());
    };
    let kernel = model.kernel();
    let k = match model.variant() {
        CtVariant::Symmetric { k } | CtVariant::MotschTadmor { k } | CtVariant::Weighted { k } => k,
        CtVariant::Bonding { k0, .. } => k0,
    };
    let mut out = Vec::new();
    for &c in &s.conditions {
        let r = match c {
            Condition::Symmetric => analysis::check_symmetric(&s.initial, k, kernel),
            Condition::MotschTadmor => analysis::check_motsch_tadmor(&s.initial, k, kernel),
            Condition::Hydro => analysis::check_hydro(&s.initial, k, kernel),
            Condition::Bonding => match model.variant() {
                CtVariant::Bonding { k2, r, .. } => {
                    analysis::check_bonding(&s.initial, k2, r, kernel)
                }
                _ => Err(FlockError::Config(
                    "the bonding condition needs the bonding model".into(),
                )),
            },
        };
        match r {
            Ok(rep) => out.push(Ok(rep)),
            // Inputs outside a theorem's hypotheses are reported, not fatal.
            Err(
                e @ (FlockError::Degenerate(_)
                | FlockError::Indeterminate(_)
                | FlockError::Divergent(_)
                | FlockError::Domain(_)),
            ) => out.push(Err((c, e))),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn condition_name(c: Condition) -> &'static str {
    match c {
        Condition::Symmetric => "symmetric",
        Condition::MotschTadmor => "motsch_tadmor",
        Condition::Bonding => "bonding",
        Condition::Hydro => "hydro",
    }
}

fn report_text(s: &Scenario) -> Result<String> {
    let mut text = String::new();
    let _ = writeln!(
        text,
        "[scenario]\nname = {}\nagents = {}\ndim = {}",
        s.name,
        s.initial.len(),
        s.initial.dim()
    );
    for r in condition_reports(s)? {
        match r {
            Ok(rep) => text.push_str(&rep.to_text()),
            Err((c, e)) => {
                let _ = writeln!(
                    text,
                    "[condition {}]\nholds = not-applicable\nreason = {}",
                    condition_name(c),
                    e
                );
            }
        }
    }
    if let Some(case) = &s.two_particle {
        let cls = two_particle::classify(case);
        let _ = writeln!(
            text,
            "[two_particle]\nx0 = {:e}\nv0 = {:e}\nclass = {}\ndivergent_tail = {}",
            case.x0, case.v0, cls.class, cls.divergent_tail
        );
        if let Ok(vc) = two_particle::critical_velocity(case) {
            let _ = writeln!(text, "critical_velocity = {vc:e}");
        }
        if let Ok(vinf) = two_particle::asymptotic_velocity(case) {
            let _ = writeln!(text, "asymptotic_velocity = {vinf:e}");
        }
    }
    if let ModelSpec::Discrete(model) = &s.model {
        let _ = writeln!(
            text,
            "[topology]\nstep_h = {:e}\nstability_bound = {:e}",
            model.h(),
            model.stability_bound(s.initial.len())
        );
        match model.variant() {
            DtVariant::Leadership { graph } | DtVariant::Preference { graph, .. } => {
                let _ = writeln!(
                    text,
                    "rooted = {}\nhierarchical = {}",
                    graph.is_rooted(0),
                    graph.is_hierarchical()
                );
                if let Ok(ld) = leader_distance(graph) {
                    let _ = writeln!(text, "depth = {}", ld.depth);
                }
            }
            DtVariant::Switching { graphs, signal } => {
                let roots: Vec<String> = graphs
                    .iter()
                    .map(|g| {
                        (0..g.n_vertices())
                            .find(|&r| g.is_rooted(r))
                            .map_or("none".into(), |r| r.to_string())
                    })
                    .collect();
                let _ = writeln!(
                    text,
                    "graphs = {}\nleaders = {}",
                    graphs.len(),
                    roots.join(" ")
                );
                if let SwitchingSignal::Periodic(p) = signal {
                    let joint = topology::is_joint_rooted(graphs, signal, 0, p.len())?;
                    let _ = writeln!(text, "joint_rooted_at_0_per_period = {joint}");
                }
            }
            DtVariant::AllToAll => {}
        }
    }
    Ok(text)
}

/// `check`: condition reports on the initial data only.
pub fn check(s: &Scenario) -> Result<String> {
    report_text(s)
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub final_state: Ensemble,
    pub outcome: Outcome,
    pub report: String,
    /// Largest deviation from the closed-form solution (critical
    /// two-particle runs).
    pub oracle_max_error: Option<f64>,
}

fn oracle_error(case: &TwoParticleCase, e: &Ensemble, best: &mut f64) {
    if let (Ok((x, v)), Ok((xe, ve))) = (
        two_particle::differences(e),
        two_particle::critical_trajectory(case, e.time()),
    ) {
        *best = best.max((x - xe).abs()).max((v - ve).abs());
    }
}

/// Simulates the scenario and assembles the report. Writes nothing.
pub fn simulate_scenario(s: &Scenario) -> Result<RunSummary> {
    let mut report = report_text(s)?;
    let critical = s
        .two_particle
        .filter(|c| two_particle::classify(c).class == TwoParticleClass::Critical);
    let mut oracle_max = 0.0f64;
    let mut contraction_worst: Option<f64> = None;
    let (diagnostics, final_state) = match &s.model {
        ModelSpec::Continuous(model) => {
            let run = integrate(model, &s.initial, s.h, s.steps, |_, e, _| {
                if let Some(c) = &critical {
                    oracle_error(c, e, &mut oracle_max);
                }
            })?;
            (run.diagnostics, run.final_state)
        }
        ModelSpec::Discrete(model) => {
            // Contraction is tracked for fixed hierarchical graphs.
            let tracked = match model.variant() {
                DtVariant::Leadership { graph }
                    if graph.is_hierarchical() && graph.is_rooted(0) =>
                {
                    Some(leader_distance(graph)?.follower_levels().to_vec())
                }
                _ => None,
            };
            let mut err = None;
            let mut prev: Option<Ensemble> = None;
            let run = simulate(model, &s.initial, s.steps, |t, e, _| {
                if let (Some(levels), Some(p)) = (&tracked, &prev) {
                    let check = model
                        .flocking_matrix(p, t - 1)
                        .and_then(|pm| Ok((pm, model.min_edge_weight(p, t - 1)?)))
                        .and_then(|(pm, phi)| {
                            topology::verify_contraction(&pm, levels, 0.5, model.h(), phi)
                        });
                    match check {
                        Ok(c) => {
                            contraction_worst =
                                Some(contraction_worst.map_or(c.margin, |w: f64| w.min(c.margin)))
                        }
                        Err(e) => err = Some(e),
                    }
                }
                if tracked.is_some() {
                    prev = Some(e.clone());
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            (run.diagnostics, run.final_state)
        }
    };
    let outcome = classify_outcome(&diagnostics, s.classify);
    let _ = writeln!(
        report,
        "[run]\nstep_h = {:e}\nsteps = {}\nfinal_time = {:e}",
        s.h,
        s.steps,
        final_state.time()
    );
    if let Some(m) = contraction_worst {
        let _ = writeln!(
            report,
            "contraction_eps = 0.5\ncontraction_min_margin = {m:e}\ncontraction_holds = {}",
            m >= -1e-12
        );
    }
    let oracle_max_error = critical.map(|_| oracle_max);
    if let Some(err) = oracle_max_error {
        let _ = writeln!(report, "oracle_max_error = {err:e}");
    }
    let window = ((diagnostics.len() as f64 * s.decay_window_fraction) as usize).max(2);
    let series: Vec<(f64, f64)> = diagnostics.iter().map(|r| (r.time, r.dv)).collect();
    // Fit only where Dv is still resolvable above roundoff.
    let resolvable: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .take_while(|&(_, dv)| dv > 1e-12)
        .collect();
    if let Ok(fit) = analysis::fit_decay_rate(&resolvable, window.min(resolvable.len())) {
        let _ = writeln!(
            report,
            "fitted_decay_rate = {:e}\nfit_r_squared = {:.6}",
            fit.rate, fit.r_squared
        );
    }
    let mut line = format!(
        "outcome = {} final_dv={:e} dx_growth_rate={:e}",
        outcome.label, outcome.final_dv, outcome.dx_growth_rate
    );
    if let Some(case) = &s.two_particle {
        let cls = two_particle::classify(case);
        let _ = write!(line, " two_particle_class={}", cls.class);
        if cls.class == TwoParticleClass::Critical {
            line.push_str(" (common asymptotic velocity)");
        }
    }
    report.push_str(&line);
    report.push('\n');
    Ok(RunSummary {
        diagnostics,
        final_state,
        outcome,
        report,
        oracle_max_error,
    })
}

/// Diagnostics CSV with every `every`-th record and always the last one.
pub fn diagnostics_csv(records: &[DiagnosticsRecord], every: usize) -> String {
    let mut out = String::with_capacity(records.len() / every.max(1) * 120 + 64);
    out.push_str(DIAGNOSTICS_HEADER);
    out.push('\n');
    let last = records.len().saturating_sub(1);
    for (k, r) in records.iter().enumerate() {
        if k % every.max(1) == 0 || k == last {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.time,
                r.dx,
                r.dv,
                r.x_sup,
                r.v_sup,
                r.kinetic_energy,
                r.potential_energy,
                r.lyapunov_plus,
                r.lyapunov_minus
            );
        }
    }
    out
}

/// Writes every `(file name, contents)` into `dir` atomically: all files
/// are staged as temporaries first and renamed only once all are written.
pub fn write_outputs(dir: &Path, files: &[(&str, &[u8])]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| FlockError::Io(format!("{}: {e}", dir.display())))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)
            .map_err(|e| FlockError::Io(format!("{}: {e}", dir.display())))?;
        tmp.write_all(bytes)?;
        tmp.flush()?;
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, path) in staged {
        tmp.persist(&path)
            .map_err(|e| FlockError::Io(format!("{}: {}", path.display(), e.error)))?;
    }
    Ok(())
}

/// `run`: simulate, then write the diagnostics CSV and the report.
pub fn run(s: &Scenario, out_dir: &Path) -> Result<RunSummary> {
    let summary = simulate_scenario(s)?;
    let csv = diagnostics_csv(&summary.diagnostics, s.every);
    write_outputs(
        out_dir,
        &[
            (&s.diagnostics_file, csv.as_bytes()),
            (&s.report_file, summary.report.as_bytes()),
        ],
    )?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Studies

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyFile {
    name: Option<String>,
    study: StudySection,
    model: ModelSection,
    kernel: KernelSection,
    density: DensitySection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudySection {
    ns: Vec<usize>,
    trials: usize,
    horizon_t: f64,
    step_h: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensitySection {
    x: Vec<MarginalSection>,
    v: Vec<MarginalSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarginalSection {
    family: String,
    lo: f64,
    hi: f64,
    mean: Option<f64>,
    sd: Option<f64>,
}

impl MarginalSection {
    fn build(&self) -> Result<Marginal> {
        match self.family.as_str() {
            "uniform" => {
                forbid(
                    self.mean.is_some() || self.sd.is_some(),
                    "mean/sd",
                    "uniform marginals",
                )?;
                Ok(Marginal::Uniform {
                    lo: self.lo,
                    hi: self.hi,
                })
            }
            "truncated-gaussian" => Ok(Marginal::TruncatedGaussian {
                mean: need(self.mean, "mean")?,
                sd: need(self.sd, "sd")?,
                lo: self.lo,
                hi: self.hi,
            }),
            other => Err(FlockError::Config(format!(
                "unknown marginal family {other:?}; expected uniform or truncated-gaussian"
            ))),
        }
    }
}

/// Validated study configuration.
#[derive(Debug, Clone)]
pub struct StudyScenario {
    pub name: String,
    pub config: StudyConfig,
}

impl StudyScenario {
    pub fn from_toml(text: &str, seed: Option<u64>) -> Result<Self> {
        let f: StudyFile = toml::from_str(text)
            .map_err(|e| FlockError::Config(e.to_string().replace('\n', " ")))?;
        let kernel = build_kernel(&f.kernel)?;
        let m = &f.model;
        let ctx = format!("study model kind {:?}", m.kind);
        forbid(
            m.strength_h.is_some() || m.preference_bound.is_some() || m.preferences.is_some(),
            "preference keys",
            &ctx,
        )?;
        let model = match m.kind.as_str() {
            "symmetric" => CtModel::symmetric(need(m.coupling_k, "model.coupling_k")?, kernel),
            "motsch-tadmor" => {
                CtModel::motsch_tadmor(need(m.coupling_k, "model.coupling_k")?, kernel)
            }
            "bonding" => CtModel::bonding(
                need(m.k0, "model.k0")?,
                need(m.k1, "model.k1")?,
                need(m.k2, "model.k2")?,
                need(m.bond_radius_r, "model.bond_radius_r")?,
                kernel,
            ),
            other => {
                return Err(FlockError::Config(format!(
                    "studies support symmetric, motsch-tadmor and bonding models, got {other:?}"
                )))
            }
        }?;
        let spec = DensitySpec::new(
            f.density
                .x
                .iter()
                .map(MarginalSection::build)
                .collect::<Result<_>>()?,
            f.density
                .v
                .iter()
                .map(MarginalSection::build)
                .collect::<Result<_>>()?,
        )?;
        let st = &f.study;
        if st.trials == 0 {
            return Err(FlockError::Config("study.trials must be >= 1".into()));
        }
        let h = st.step_h.unwrap_or_else(|| model.default_step());
        let config = StudyConfig {
            spec,
            model,
            ns: st.ns.clone(),
            horizon: st.horizon_t,
            h,
            trials: st.trials,
            seed: seed.or(st.seed).unwrap_or(0),
        };
        if config.ns.is_empty()
            || config.ns.contains(&0)
            || config.ns.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(FlockError::Config(format!(
                "study.ns must be strictly increasing positive sizes, got {:?}",
                config.ns
            )));
        }
        if *config.ns.last().expect("nonempty") > meanfield::MAX_ASSIGNMENT_SIZE {
            return Err(FlockError::Config(format!(
                "largest N must not exceed {}",
                meanfield::MAX_ASSIGNMENT_SIZE
            )));
        }
        if !(h.is_finite() && h > 0.0 && st.horizon_t.is_finite() && st.horizon_t >= 0.0) {
            return Err(FlockError::Config(
                "study needs step_h > 0 and horizon_t >= 0".into(),
            ));
        }
        Ok(StudyScenario {
            name: f.name.unwrap_or_else(|| "study".into()),
            config,
        })
    }
}

/// File names written by [`study`].
pub const STUDY_CSV: &str = "study.csv";
pub const STUDY_DISTANCES_CSV: &str = "study_distances.csv";

/// `study`: runs the convergence study and writes `study.csv` (with
/// runtimes) and `study_distances.csv` (runtime-free, byte-reproducible).
pub fn study(s: &StudyScenario, out_dir: &Path) -> Result<Study> {
    let result = meanfield::convergence_study(&s.config)?;
    let mut full = Vec::new();
    result.write_csv(&mut full, true)?;
    let mut det = Vec::new();
    result.write_csv(&mut det, false)?;
    write_outputs(out_dir, &[(STUDY_CSV, &full), (STUDY_DISTANCES_CSV, &det)])?;
    Ok(result)
}

/// Text summary of a study's trend.
pub fn study_summary(study: &Study) -> String {
    let mut s = String::from("[study]\n");
    for (n, d) in study.trend() {
        let _ = writeln!(s, "N = {n} mean_distance = {d:e}");
    }
    let (dec, steps) = study.decreasing_steps();
    let _ = writeln!(s, "decreasing_steps = {dec}/{steps}");
    s
}

// ---------------------------------------------------------------------------
// Exit codes

/// Process exit status for an error: 2 validation, 3 model failure at
/// runtime, 4 I/O.
pub fn exit_code(e: &FlockError) -> i32 {
    match e.root_cause() {
        FlockError::Io(_) => 4,
        FlockError::Collision { .. }
        | FlockError::SingularWeight { .. }
        | FlockError::Stability { .. } => 3,
        _ => 2,
    }
}

fn error_kind(e: &FlockError) -> &'static str {
    match e.root_cause() {
        FlockError::Domain(_) => "domain",
        FlockError::Indeterminate(_) => "indeterminate",
        FlockError::Config(_) => "config",
        FlockError::Collision { .. } => "collision",
        FlockError::SingularWeight { .. } => "singular_weight",
        FlockError::Stability { .. } => "stability",
        FlockError::NotRooted { .. } => "not_rooted",
        FlockError::Degenerate(_) => "degenerate",
        FlockError::Divergent(_) => "divergent",
        FlockError::NotCritical { .. } => "not_critical",
        FlockError::Window(_) => "window",
        FlockError::Coverage { .. } => "coverage",
        FlockError::UnsupportedSize(_) => "unsupported_size",
        FlockError::Io(_) => "io",
        FlockError::AtStep { .. } => unreachable!("root_cause strips step annotations"),
    }
}

/// One-line machine-parsable error: `error code=N kind=K message="..."`.
pub fn error_line(e: &FlockError) -> String {
    let msg = e
        .to_string()
        .replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', " ");
    format!(
        "error code={} kind={} message=\"{}\"",
        exit_code(e),
        error_kind(e),
        msg
    )
}
