//! Leadership digraphs, switching signals and the level-weighted matrix
//! norm used for contraction estimates.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::error::{FlockError, Result};

/// Directed graph on vertices `0..n`. An edge `(j, i)` means `j`
/// influences `i`, i.e. `j` is in the leader set of `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Digraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (j, i) in edges {
            if j >= n || i >= n {
                return Err(FlockError::Config(format!(
                    "edge ({j}, {i}) out of range for {n} vertices"
                )));
            }
            if j == i {
                return Err(FlockError::Config(format!("self-loop at vertex {i}")));
            }
            set.insert((j, i));
        }
        Ok(Digraph { n, edges: set })
    }

    pub fn empty(n: usize) -> Self {
        Digraph {
            n,
            edges: BTreeSet::new(),
        }
    }

    /// `0 → 1 → … → n-1`.
    pub fn chain(n: usize) -> Self {
        Digraph {
            n,
            edges: (1..n).map(|i| (i - 1, i)).collect(),
        }
    }

    /// Chain through the given vertex order, starting at `order[0]`.
    pub fn path(n: usize, order: &[usize]) -> Result<Self> {
        Self::new(n, order.windows(2).map(|w| (w[0], w[1])))
    }

    /// `root → i` for every other vertex.
    pub fn star(n: usize, root: usize) -> Result<Self> {
        Self::new(n, (0..n).filter(|&i| i != root).map(|i| (root, i)))
    }

    pub fn complete(n: usize) -> Self {
        Digraph {
            n,
            edges: (0..n)
                .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (j, i)))
                .collect(),
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, j: usize, i: usize) -> bool {
        self.edges.contains(&(j, i))
    }

    /// `{ j : (j, i) ∈ E }`, ascending.
    pub fn leader_set(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|e| e.1 == i)
            .map(|e| e.0)
            .collect()
    }

    fn successors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for &(j, i) in &self.edges {
            out[j].push(i);
        }
        out
    }

    /// Every edge points from a lower to a higher index and every vertex
    /// other than 0 has at least one leader.
    pub fn is_hierarchical(&self) -> bool {
        let mut led = vec![false; self.n];
        for &(j, i) in &self.edges {
            if j >= i {
                return false;
            }
            led[i] = true;
        }
        led.iter().skip(1).all(|&l| l)
    }

    /// `root` has no incoming edge and reaches every vertex.
    pub fn is_rooted(&self, root: usize) -> bool {
        root < self.n && self.levels_from(root).is_ok()
    }

    /// Breadth-first distances from `root`.
    fn levels_from(&self, root: usize) -> Result<Vec<usize>> {
        if let Some(&(j, _)) = self.edges.iter().find(|e| e.1 == root) {
            return Err(FlockError::NotRooted { vertex: j, root });
        }
        let succ = self.successors();
        let mut level = vec![usize::MAX; self.n];
        level[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &w in &succ[u] {
                if level[w] == usize::MAX {
                    level[w] = level[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if let Some(vertex) = level.iter().position(|&l| l == usize::MAX) {
            return Err(FlockError::NotRooted { vertex, root });
        }
        Ok(level)
    }

    /// Edge-list text: a `digraph <n>` header followed by one `j i` pair per
    /// line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("digraph {}\n", self.n);
        for &(j, i) in &self.edges {
            let _ = writeln!(s, "{j} {i}");
        }
        s
    }

    /// Parses [`Digraph::to_edge_list`] output. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| FlockError::Config("edge list is empty".into()))?;
        let n = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["digraph", n] => n.parse::<usize>().map_err(|_| {
                FlockError::Config(format!("bad vertex count in header '{header}'"))
            })?,
            _ => {
                return Err(FlockError::Config(format!(
                    "expected header 'digraph <n>', got '{header}'"
                )))
            }
        };
        let mut edges = Vec::new();
        for (lineno, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                [j, i] => j.parse::<usize>().ok().zip(i.parse::<usize>().ok()),
                _ => None,
            };
            let edge = parsed.ok_or_else(|| {
                FlockError::Config(format!("line {}: expected 'j i', got '{line}'", lineno + 1))
            })?;
            edges.push(edge);
        }
        Self::new(n, edges)
    }
}

/// Directed distances from the root and the graph depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaderDistances {
    pub levels: Vec<usize>,
    pub depth: usize,
}

impl LeaderDistances {
    /// Levels of the follower vertices `1..n`, the indexing used by the
    /// fluctuation matrices.
    pub fn follower_levels(&self) -> &[usize] {
        &self.levels[1..]
    }
}

/// Shortest directed path lengths from vertex 0; errors when the graph is
/// not rooted at 0.
pub fn leader_distance(g: &Digraph) -> Result<LeaderDistances> {
    leader_distance_from(g, 0)
}

pub fn leader_distance_from(g: &Digraph, root: usize) -> Result<LeaderDistances> {
    let levels = g.levels_from(root)?;
    let depth = levels.iter().copied().max().unwrap_or(0);
    Ok(LeaderDistances { levels, depth })
}

/// Graph whose edge set is the union of the inputs.
pub fn union_graph(gs: &[&Digraph]) -> Result<Digraph> {
    let n = gs
        .first()
        .map(|g| g.n)
        .ok_or_else(|| FlockError::Config("union of zero graphs".into()))?;
    let mut edges = BTreeSet::new();
    for g in gs {
        if g.n != n {
            return Err(FlockError::Config(format!(
                "union of graphs with {} and {} vertices",
                n, g.n
            )));
        }
        edges.extend(g.edges.iter().copied());
    }
    Ok(Digraph { n, edges })
}

/// Maps each step index to the index of the active graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SwitchingSignal {
    /// `σ(t) = pattern[t mod len]`.
    Periodic(Vec<usize>),
    /// `σ(t) = schedule[t]`; only defined for `t < len`.
    Explicit(Vec<usize>),
}

impl SwitchingSignal {
    /// Each graph index held for `dwell` steps, cycling.
    pub fn periodic_dwell(order: &[usize], dwell: usize) -> Self {
        SwitchingSignal::Periodic(
            order
                .iter()
                .flat_map(|&g| std::iter::repeat_n(g, dwell.max(1)))
                .collect(),
        )
    }

    pub fn graph_at(&self, t: usize) -> Result<usize> {
        match self {
            SwitchingSignal::Periodic(p) if !p.is_empty() => Ok(p[t % p.len()]),
            SwitchingSignal::Periodic(_) => {
                Err(FlockError::Config("empty switching pattern".into()))
            }
            SwitchingSignal::Explicit(s) => s.get(t).copied().ok_or_else(|| {
                FlockError::Config(format!("switching schedule undefined at step {t}"))
            }),
        }
    }

    /// Checks the signal is defined on `[0, horizon)` and only names graphs
    /// below `n_graphs`.
    pub fn validate(&self, horizon: usize, n_graphs: usize) -> Result<()> {
        let entries = match self {
            SwitchingSignal::Periodic(p) => {
                if p.is_empty() {
                    return Err(FlockError::Config("empty switching pattern".into()));
                }
                p
            }
            SwitchingSignal::Explicit(s) => {
                if s.len() < horizon {
                    return Err(FlockError::Config(format!(
                        "switching schedule covers {} steps, horizon is {horizon}",
                        s.len()
                    )));
                }
                s
            }
        };
        if let Some(&bad) = entries.iter().find(|&&g| g >= n_graphs) {
            return Err(FlockError::Config(format!(
                "switching signal names graph {bad}, only {n_graphs} available"
            )));
        }
        Ok(())
    }
}

/// Union of the graphs active on `[t1, t2)` is rooted at vertex 0.
pub fn is_joint_rooted(
    gs: &[Digraph],
    signal: &SwitchingSignal,
    t1: usize,
    t2: usize,
) -> Result<bool> {
    if t1 >= t2 {
        return Err(FlockError::Domain(format!("empty window [{t1}, {t2})")));
    }
    let mut active = BTreeSet::new();
    for t in t1..t2 {
        let k = signal.graph_at(t)?;
        if k >= gs.len() {
            return Err(FlockError::Config(format!(
                "signal names missing graph {k}"
            )));
        }
        active.insert(k);
    }
    let refs: Vec<&Digraph> = active.iter().map(|&k| &gs[k]).collect();
    Ok(union_graph(&refs)?.is_rooted(0))
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(FlockError::Config("matrix rows must form a square".into()));
        }
        Ok(SquareMatrix {
            n,
            data: rows.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul(&self, other: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Applies the matrix to `n` stacked `dim`-vectors.
    pub fn apply_blocks(&self, blocks: &[f64], dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; blocks.len()];
        for i in 0..self.n {
            for j in 0..self.n {
                let a = self[(i, j)];
                if a == 0.0 {
                    continue;
                }
                for c in 0..dim {
                    out[i * dim + c] += a * blocks[j * dim + c];
                }
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// `‖D A D⁻¹‖_∞` with `D = diag(ε^{ℓ(i)})`, i.e.
/// `max_i Σ_j |A_ij| ε^{ℓ(i) - ℓ(j)}`.
pub fn epsilon_norm(a: &SquareMatrix, levels: &[usize], eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(FlockError::Domain(format!(
            "epsilon must lie in (0, 1), got {eps}"
        )));
    }
    if levels.len() != a.dim() {
        return Err(FlockError::Config(format!(
            "{} levels for a {}x{} matrix",
            levels.len(),
            a.dim(),
            a.dim()
        )));
    }
    let mut best = 0.0f64;
    for i in 0..a.dim() {
        let li = levels[i] as i32;
        let s: f64 = a
            .row(i)
            .iter()
            .zip(levels)
            .map(|(v, &lj)| v.abs() * eps.powi(li - lj as i32))
            .sum();
        best = best.max(s);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contraction {
    pub holds: bool,
    pub norm: f64,
    pub bound: f64,
    /// `bound - norm`.
    pub margin: f64,
}

/// Compares `‖P‖_ε` against `1 - (1 - ε) h φ_m`, with an absolute slack of
/// `1e-12`.
pub fn verify_contraction(
    p: &SquareMatrix,
    levels: &[usize],
    eps: f64,
    h: f64,
    phi_m: f64,
) -> Result<Contraction> {
    let norm = epsilon_norm(p, levels, eps)?;
    let bound = 1.0 - (1.0 - eps) * h * phi_m;
    Ok(Contraction {
        holds: norm <= bound + 1e-12,
        norm,
        bound,
        margin: bound - norm,
    })
}
