//! Empirical measures, kinetic moments, exact order-1 transport distances
//! and particle-number convergence studies.
//!
//! The kinetic density has no closed form, so convergence is measured by
//! self-comparison: each `N` is compared with an independent run at the
//! largest `N` of the ladder, and two independent largest-`N` runs give the
//! noise floor.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::continuous::{evolve, CtModel};
use crate::ensemble::{dist, Ensemble};
use crate::error::{FlockError, Result};

/// Largest cloud accepted by [`w1_distance`].
pub const MAX_ASSIGNMENT_SIZE: usize = 512;

/// Uniform atomic measure on phase-space points `(x_i, ξ_i) ∈ R^{2d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn from_ensemble(e: &Ensemble) -> Self {
        let d = e.dim();
        let mut points = Vec::with_capacity(2 * d * e.len());
        for i in 0..e.len() {
            points.extend_from_slice(e.x(i));
            points.extend_from_slice(e.v(i));
        }
        EmpiricalMeasure { dim: d, points }
    }

    pub fn len(&self) -> usize {
        self.points.len() / (2 * self.dim)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Phase-space point `i` as `[x..., ξ...]`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[2 * self.dim * i..2 * self.dim * (i + 1)]
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.point(i)[..self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.point(i)[self.dim..]
    }

    /// `(1/N) Σ f(x_i, ξ_i)`.
    pub fn integrate<F: Fn(&[f64], &[f64]) -> f64>(&self, f: F) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| f(self.position(i), self.velocity(i)))
            .sum::<f64>()
            / n as f64
    }

    /// The measure with every atom repeated `times` times (same law).
    pub fn replicated(&self, times: usize) -> Self {
        let mut points = Vec::with_capacity(self.points.len() * times);
        for _ in 0..times {
            points.extend_from_slice(&self.points);
        }
        EmpiricalMeasure {
            dim: self.dim,
            points,
        }
    }

    /// `n` atoms drawn with replacement.
    pub fn resampled<R: Rng>(&self, n: usize, rng: &mut R) -> Self {
        let m = self.len();
        let mut points = Vec::with_capacity(2 * self.dim * n);
        for _ in 0..n {
            points.extend_from_slice(self.point(rng.gen_range(0..m)));
        }
        EmpiricalMeasure {
            dim: self.dim,
            points,
        }
    }
}

/// One-dimensional marginal with compact support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Normal(mean, sd) conditioned on `[lo, hi]`.
    TruncatedGaussian {
        mean: f64,
        sd: f64,
        lo: f64,
        hi: f64,
    },
}

impl Marginal {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FlockError::Config(format!(
                "marginal support [{lo}, {hi}] is not a bounded interval"
            )));
        }
        if let Marginal::TruncatedGaussian { mean, sd, .. } = *self {
            if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
                return Err(FlockError::Config(format!(
                    "truncated Gaussian needs finite mean and sd > 0, got {mean}, {sd}"
                )));
            }
            let n = Normal::new(mean, sd).expect("validated");
            if n.cdf(hi) - n.cdf(lo) <= 0.0 {
                return Err(FlockError::Config(
                    "truncated Gaussian has no mass on its support".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { lo, hi } | Marginal::TruncatedGaussian { lo, hi, .. } => (lo, hi),
        }
    }

    /// Inverse-CDF transform of `u ∈ [0, 1)`.
    fn quantile(&self, u: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => lo + u * (hi - lo),
            Marginal::TruncatedGaussian { mean, sd, lo, hi } => {
                let n = Normal::new(mean, sd).expect("validated");
                let (a, b) = (n.cdf(lo), n.cdf(hi));
                n.inverse_cdf(a + u * (b - a)).clamp(lo, hi)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
            Marginal::TruncatedGaussian { mean, sd, lo, hi } => {
                let n = Normal::new(0.0, 1.0).expect("standard normal");
                let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
                let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                mean + sd * (pdf(a) - pdf(b)) / (n.cdf(b) - n.cdf(a))
            }
        }
    }
}

/// Product law with independent position and velocity marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySpec {
    pub x: Vec<Marginal>,
    pub v: Vec<Marginal>,
}

impl DensitySpec {
    pub fn new(x: Vec<Marginal>, v: Vec<Marginal>) -> Result<Self> {
        if x.is_empty() || x.len() != v.len() {
            return Err(FlockError::Config(format!(
                "density needs equal, nonzero numbers of position and velocity marginals, got {} and {}",
                x.len(),
                v.len()
            )));
        }
        for m in x.iter().chain(&v) {
            m.validate()?;
        }
        Ok(DensitySpec { x, v })
    }

    /// Uniform on `[-a, a]^d × [-b, b]^d`.
    pub fn uniform_box(dim: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(
            vec![Marginal::Uniform { lo: -a, hi: a }; dim],
            vec![Marginal::Uniform { lo: -b, hi: b }; dim],
        )
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn means(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.x.iter().map(Marginal::mean).collect(),
            self.v.iter().map(Marginal::mean).collect(),
        )
    }
}

/// Draws `n` i.i.d. agents from `spec`.
pub fn sample_with<R: Rng>(spec: &DensitySpec, n: usize, rng: &mut R) -> Result<Ensemble> {
    if n == 0 {
        return Err(FlockError::Config("sample size must be >= 1".into()));
    }
    let d = spec.dim();
    let mut x = Vec::with_capacity(n * d);
    let mut v = Vec::with_capacity(n * d);
    for _ in 0..n {
        for m in &spec.x {
            x.push(m.quantile(rng.gen::<f64>()));
        }
        for m in &spec.v {
            v.push(m.quantile(rng.gen::<f64>()));
        }
    }
    Ensemble::from_flat(d, x, v)
}

/// Deterministic sample from a ChaCha8 stream seeded by `seed`.
pub fn sample(spec: &DensitySpec, n: usize, seed: u64) -> Result<Ensemble> {
    sample_with(spec, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Uniform spatial bins over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub bins: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, bins: Vec<usize>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.len() != bins.len() {
            return Err(FlockError::Config(
                "grid bounds and bin counts must share one dimension".into(),
            ));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
            || bins.contains(&0)
        {
            return Err(FlockError::Config(
                "grid needs lo < hi and at least one bin per axis".into(),
            ));
        }
        Ok(Grid { lo, hi, bins })
    }

    pub fn n_cells(&self) -> usize {
        self.bins.iter().product()
    }

    /// Row-major cell index, or `None` outside the closed box.
    pub fn cell(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for k in 0..self.bins.len() {
            if !(x[k] >= self.lo[k] && x[k] <= self.hi[k]) {
                return None;
            }
            let frac = (x[k] - self.lo[k]) / (self.hi[k] - self.lo[k]);
            let b = ((frac * self.bins[k] as f64) as usize).min(self.bins[k] - 1);
            idx = idx * self.bins[k] + b;
        }
        Some(idx)
    }
}

/// Binned mass, momentum and energy densities.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub dim: usize,
    pub rho: Vec<f64>,
    /// `ρu` per cell, `dim` components each.
    pub momentum: Vec<f64>,
    pub energy: Vec<f64>,
}

impl Moments {
    pub fn total_mass(&self) -> f64 {
        self.rho.iter().sum()
    }

    pub fn total_momentum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for c in self.momentum.chunks(self.dim) {
            out.iter_mut().zip(c).for_each(|(o, m)| *o += m);
        }
        out
    }

    /// Bulk velocity `u` of a nonempty cell.
    pub fn velocity(&self, cell: usize) -> Option<Vec<f64>> {
        (self.rho[cell] > 0.0).then(|| {
            self.momentum[cell * self.dim..(cell + 1) * self.dim]
                .iter()
                .map(|m| m / self.rho[cell])
                .collect()
        })
    }
}

/// Local mass, momentum and energy densities of `mu` on `grid`.
pub fn moments(mu: &EmpiricalMeasure, grid: &Grid) -> Result<Moments> {
    let d = mu.dim();
    if grid.bins.len() != d {
        return Err(FlockError::Config(format!(
            "grid has {} axes for a {d}-dimensional measure",
            grid.bins.len()
        )));
    }
    let cells = grid.n_cells();
    let w = 1.0 / mu.len() as f64;
    let mut out = Moments {
        dim: d,
        rho: vec![0.0; cells],
        momentum: vec![0.0; cells * d],
        energy: vec![0.0; cells],
    };
    for i in 0..mu.len() {
        let c = grid
            .cell(mu.position(i))
            .ok_or(FlockError::Coverage { index: i })?;
        let xi = mu.velocity(i);
        out.rho[c] += w;
        for k in 0..d {
            out.momentum[c * d + k] += w * xi[k];
        }
        out.energy[c] += w * 0.5 * xi.iter().map(|a| a * a).sum::<f64>();
    }
    Ok(out)
}

/// Order-1 transport distance between equal-size uniform clouds,
/// `min_π (1/N) Σ |z_i - z'_{π(i)}|`, solved exactly as an assignment
/// problem.
pub fn w1_distance(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    let n = a.len();
    if n != b.len() || a.dim() != b.dim() {
        return Err(FlockError::UnsupportedSize(format!(
            "transport distance needs equal sizes and dimensions, got {n}x{} and {}x{}",
            a.dim(),
            b.len(),
            b.dim()
        )));
    }
    if n > MAX_ASSIGNMENT_SIZE {
        return Err(FlockError::UnsupportedSize(format!(
            "exact assignment limited to N <= {MAX_ASSIGNMENT_SIZE}, got {n}"
        )));
    }
    let cost: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| dist(a.point(i), b.point(j)))
        .collect();
    let assignment = min_cost_assignment(n, &cost);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    Ok(total / n as f64)
}

/// Hungarian method with row/column potentials; `cost` is row-major
/// `n × n`. Returns the column assigned to each row.
fn min_cost_assignment(n: usize, cost: &[f64]) -> Vec<usize> {
    // 1-based internally; column 0 is a virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

/// Parameters of a convergence study.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub spec: DensitySpec,
    pub model: CtModel,
    /// Strictly increasing particle numbers; the last is the reference.
    pub ns: Vec<usize>,
    pub horizon: f64,
    pub h: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `N` against the reference size.
    Ladder,
    /// Two independent reference-size runs.
    Floor,
}

impl RowKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowKind::Ladder => "ladder",
            RowKind::Floor => "floor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub trial: usize,
    pub kind: RowKind,
    pub distance: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub rows: Vec<StudyRow>,
}

impl Study {
    /// Mean distance over trials for one `(N, kind)`.
    pub fn mean_distance(&self, n: usize, kind: RowKind) -> Option<f64> {
        let ds: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.n == n && r.kind == kind)
            .map(|r| r.distance)
            .collect();
        (!ds.is_empty()).then(|| ds.iter().sum::<f64>() / ds.len() as f64)
    }

    /// Ladder means for increasing `N`, followed by the noise floor.
    pub fn trend(&self) -> Vec<(usize, f64)> {
        let mut ns: Vec<usize> = self
            .rows
            .iter()
            .filter(|r| r.kind == RowKind::Ladder)
            .map(|r| r.n)
            .collect();
        ns.dedup();
        let mut out: Vec<(usize, f64)> = ns
            .into_iter()
            .filter_map(|n| self.mean_distance(n, RowKind::Ladder).map(|d| (n, d)))
            .collect();
        if let Some(r) = self.rows.iter().find(|r| r.kind == RowKind::Floor) {
            out.push((
                r.n,
                self.mean_distance(r.n, RowKind::Floor)
                    .expect("floor rows exist"),
            ));
        }
        out
    }

    /// Number of consecutive entries of [`trend`](Self::trend) that
    /// strictly decrease.
    pub fn decreasing_steps(&self) -> (usize, usize) {
        let t = self.trend();
        let steps = t.len().saturating_sub(1);
        (t.windows(2).filter(|w| w[1].1 < w[0].1).count(), steps)
    }

    /// CSV with header `N,trial,kind,distance,runtime_s`.
    pub fn write_csv<W: Write>(&self, mut w: W, with_runtime: bool) -> std::io::Result<()> {
        if with_runtime {
            writeln!(w, "N,trial,kind,distance,runtime_s")?;
        } else {
            writeln!(w, "N,trial,kind,distance")?;
        }
        for r in &self.rows {
            write!(
                w,
                "{},{},{},{:e}",
                r.n,
                r.trial,
                r.kind.as_str(),
                r.distance
            )?;
            if with_runtime {
                write!(w, ",{:.6}", r.runtime_s)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

const ROLE_RUN: u64 = 0;
const ROLE_FLOOR: u64 = 1;
const ROLE_BOOTSTRAP: u64 = 2;

/// Independent stream per `(seed, role, N, trial)`.
fn stream(seed: u64, role: u64, n: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((role << 60) | ((n as u64) << 32) | trial as u64);
    rng
}

fn run_to_horizon(cfg: &StudyConfig, e0: &Ensemble) -> Result<EmpiricalMeasure> {
    let steps = (cfg.horizon / cfg.h).round() as usize;
    Ok(EmpiricalMeasure::from_ensemble(&evolve(
        &cfg.model, e0, cfg.h, steps,
    )?))
}

/// Lifts `mu` to `n_ref` atoms: exact replication when `N | n_ref`,
/// bootstrap otherwise.
fn lift(mu: &EmpiricalMeasure, n_ref: usize, rng: &mut ChaCha8Rng) -> EmpiricalMeasure {
    if n_ref.is_multiple_of(mu.len()) {
        mu.replicated(n_ref / mu.len())
    } else {
        mu.resampled(n_ref, rng)
    }
}

/// Runs the study. Trials execute in parallel on the current rayon pool;
/// every random draw comes from a stream fixed by `(seed, N, trial)`, so
/// distances do not depend on scheduling.
pub fn convergence_study(cfg: &StudyConfig) -> Result<Study> {
    if cfg.trials == 0 {
        return Err(FlockError::Config("trials must be >= 1".into()));
    }
    if cfg.ns.is_empty() || cfg.ns.contains(&0) || cfg.ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FlockError::Config(format!(
            "Ns must be a strictly increasing list of positive sizes, got {:?}",
            cfg.ns
        )));
    }
    if !(cfg.horizon.is_finite() && cfg.horizon >= 0.0 && cfg.h.is_finite() && cfg.h > 0.0) {
        return Err(FlockError::Config(format!(
            "need horizon >= 0 and h > 0, got {} and {}",
            cfg.horizon, cfg.h
        )));
    }
    let n_ref = *cfg.ns.last().expect("nonempty");
    if n_ref > MAX_ASSIGNMENT_SIZE {
        return Err(FlockError::UnsupportedSize(format!(
            "reference size {n_ref} exceeds the exact assignment limit {MAX_ASSIGNMENT_SIZE}"
        )));
    }
    let per_trial: Vec<Result<Vec<StudyRow>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let start = Instant::now();
            let reference = run_to_horizon(
                cfg,
                &sample_with(
                    &cfg.spec,
                    n_ref,
                    &mut stream(cfg.seed, ROLE_RUN, n_ref, trial),
                )?,
            )?;
            let ref_time = start.elapsed().as_secs_f64();
            let mut rows = Vec::with_capacity(cfg.ns.len());
            for &n in &cfg.ns[..cfg.ns.len() - 1] {
                let start = Instant::now();
                let mu = run_to_horizon(
                    cfg,
                    &sample_with(&cfg.spec, n, &mut stream(cfg.seed, ROLE_RUN, n, trial))?,
                )?;
                let lifted = lift(&mu, n_ref, &mut stream(cfg.seed, ROLE_BOOTSTRAP, n, trial));
                let distance = w1_distance(&lifted, &reference)?;
                rows.push(StudyRow {
                    n,
                    trial,
                    kind: RowKind::Ladder,
                    distance,
                    runtime_s: start.elapsed().as_secs_f64(),
                });
            }
            let start = Instant::now();
            let twin = run_to_horizon(
                cfg,
                &sample_with(
                    &cfg.spec,
                    n_ref,
                    &mut stream(cfg.seed, ROLE_FLOOR, n_ref, trial),
                )?,
            )?;
            let distance = w1_distance(&twin, &reference)?;
            rows.push(StudyRow {
                n: n_ref,
                trial,
                kind: RowKind::Floor,
                distance,
                runtime_s: ref_time + start.elapsed().as_secs_f64(),
            });
            Ok(rows)
        })
        .collect();
    let mut by_trial = Vec::with_capacity(cfg.trials);
    for r in per_trial {
        by_trial.push(r?);
    }
    // Rows grouped by N (ladder first, floor last), trials ascending.
    let mut rows = Vec::new();
    for k in 0..cfg.ns.len() {
        for t in &by_trial {
            rows.push(t[k]);
        }
    }
    Ok(Study { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;

    fn cloud(pts: &[f64]) -> EmpiricalMeasure {
        // d = 1 with zero velocities.
        let e = Ensemble::from_flat(1, pts.to_vec(), vec![0.0; pts.len()]).unwrap();
        EmpiricalMeasure::from_ensemble(&e)
    }

    fn brute_force_w1(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> f64 {
        fn permute(
            k: usize,
            perm: &mut Vec<usize>,
            best: &mut f64,
            a: &EmpiricalMeasure,
            b: &EmpiricalMeasure,
        ) {
            let n = perm.len();
            if k == n {
                let c: f64 = (0..n).map(|i| dist(a.point(i), b.point(perm[i]))).sum();
                *best = best.min(c / n as f64);
                return;
            }
            for s in k..n {
                perm.swap(k, s);
                permute(k + 1, perm, best, a, b);
                perm.swap(k, s);
            }
        }
        let mut best = f64::INFINITY;
        permute(0, &mut (0..a.len()).collect(), &mut best, a, b);
        best
    }

    #[test]
    fn w1_examples() {
        let a = cloud(&[0.0, 10.0]);
        assert_eq!(w1_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(w1_distance(&a, &cloud(&[1.0, 9.0])).unwrap(), 1.0);
        assert_eq!(w1_distance(&cloud(&[2.0]), &cloud(&[-1.0])).unwrap(), 3.0);
        assert!(matches!(
            w1_distance(&a, &cloud(&[1.0])),
            Err(FlockError::UnsupportedSize(_))
        ));
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = DensitySpec::uniform_box(2, 1.0, 1.0).unwrap();
        for n in 1..=7 {
            for _ in 0..5 {
                let a = EmpiricalMeasure::from_ensemble(&sample_with(&spec, n, &mut rng).unwrap());
                let b = EmpiricalMeasure::from_ensemble(&sample_with(&spec, n, &mut rng).unwrap());
                let fast = w1_distance(&a, &b).unwrap();
                assert!((fast - brute_force_w1(&a, &b)).abs() < 1e-12, "n = {n}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_boxed() {
        let spec = DensitySpec::new(
            vec![Marginal::TruncatedGaussian {
                mean: 0.5,
                sd: 2.0,
                lo: -1.0,
                hi: 1.0,
            }],
            vec![Marginal::Uniform { lo: 2.0, hi: 3.0 }],
        )
        .unwrap();
        let a = sample(&spec, 200, 11).unwrap();
        assert_eq!(a, sample(&spec, 200, 11).unwrap());
        assert_ne!(a, sample(&spec, 200, 12).unwrap());
        assert!(a.positions().iter().all(|x| (-1.0..=1.0).contains(x)));
        assert!(a.velocities().iter().all(|v| (2.0..=3.0).contains(v)));
        let one = sample(&spec, 1, 3).unwrap();
        assert_eq!(one.len(), 1);
        assert!(sample(&spec, 0, 3).is_err());
    }

    #[test]
    fn truncated_gaussian_mean() {
        // Symmetric truncation keeps the mean.
        let m = Marginal::TruncatedGaussian {
            mean: 0.3,
            sd: 1.0,
            lo: -0.7,
            hi: 1.3,
        };
        assert!((m.mean() - 0.3).abs() < 1e-14);
        // One-sided truncation of a standard normal: E = φ(0)/(1/2).
        let m = Marginal::TruncatedGaussian {
            mean: 0.0,
            sd: 1.0,
            lo: 0.0,
            hi: 40.0,
        };
        assert!((m.mean() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sample_means_approach_spec_means() {
        let spec = DensitySpec::new(
            vec![Marginal::TruncatedGaussian {
                mean: 1.0,
                sd: 0.5,
                lo: 0.0,
                hi: 3.0,
            }],
            vec![Marginal::Uniform { lo: -1.0, hi: 2.0 }],
        )
        .unwrap();
        let (mx, mv) = spec.means();
        let err = |n: usize| -> f64 {
            (0..40)
                .map(|s| {
                    let (x, v) = sample(&spec, n, s).unwrap().means();
                    (x[0] - mx[0]).abs() + (v[0] - mv[0]).abs()
                })
                .sum::<f64>()
                / 40.0
        };
        let (e1, e2) = (err(100), err(1600));
        // Sixteen times the sample size should roughly quarter the error.
        assert!(e2 < 0.5 * e1, "{e1} -> {e2}");
    }

    #[test]
    fn moments_examples() {
        let grid = Grid::new(vec![0.0], vec![1.0], vec![4]).unwrap();
        let single =
            EmpiricalMeasure::from_ensemble(&Ensemble::from_flat(1, vec![0.3], vec![2.0]).unwrap());
        let m = moments(&single, &grid).unwrap();
        assert_eq!(m.rho, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(m.energy[1], 2.0);
        let pair = EmpiricalMeasure::from_ensemble(
            &Ensemble::from_flat(1, vec![0.1, 1.0], vec![0.5, 0.5]).unwrap(),
        );
        let m = moments(&pair, &grid).unwrap();
        assert_eq!(m.total_mass(), 1.0);
        assert_eq!(m.total_momentum(), vec![0.5]);
        let out = EmpiricalMeasure::from_ensemble(
            &Ensemble::from_flat(1, vec![0.1, 1.5], vec![0.0; 2]).unwrap(),
        );
        assert_eq!(moments(&out, &grid), Err(FlockError::Coverage { index: 1 }));
    }

    #[test]
    fn study_shapes_and_errors() {
        let spec = DensitySpec::uniform_box(1, 1.0, 1.0).unwrap();
        let model = CtModel::symmetric(1.0, Kernel::power_squared(2.0).unwrap()).unwrap();
        let mut cfg = StudyConfig {
            spec,
            model,
            ns: vec![4, 6, 12],
            horizon: 0.1,
            h: 0.05,
            trials: 3,
            seed: 5,
        };
        let s = convergence_study(&cfg).unwrap();
        assert_eq!(s.rows.len(), 9);
        assert_eq!(
            s.rows.iter().filter(|r| r.kind == RowKind::Floor).count(),
            3
        );
        let again = convergence_study(&cfg).unwrap();
        let d = |s: &Study| s.rows.iter().map(|r| r.distance).collect::<Vec<_>>();
        assert_eq!(d(&s), d(&again));
        cfg.ns = vec![5, 12];
        assert_eq!(convergence_study(&cfg).unwrap().rows.len(), 6);
        cfg.ns = vec![8];
        let floor_only = convergence_study(&cfg).unwrap();
        assert!(floor_only.rows.iter().all(|r| r.kind == RowKind::Floor));
        cfg.trials = 0;
        assert!(convergence_study(&cfg).is_err());
        cfg.trials = 1;
        cfg.ns = vec![10, 5];
        assert!(convergence_study(&cfg).is_err());
    }
}
