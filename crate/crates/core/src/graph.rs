//! Directed networks, neighbor-selection matrices and the structure of the
//! Markov chain they induce.
//!
//! Indices are 0-based throughout the library API. An edge `(j, i)` means
//! "agent `i` observes agent `j`", so `j` belongs to the in-neighborhood of `i`.
//! Row `i` of a [`SelectionMatrix`] is the distribution of the neighbor agent
//! `i` gossips with; viewed as a Markov chain this is the backward walk
//! `i -> sigma(i)`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Absolute tolerance for row sums of a selection matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Networks up to this size get a dense direct solve for the stationary distribution.
pub const DIRECT_SOLVE_MAX: usize = 2000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedNetwork {
    n: usize,
    edges: Vec<(usize, usize)>,
    in_neighbors: Vec<Vec<usize>>,
    out_neighbors: Vec<Vec<usize>>,
}

impl DirectedNetwork {
    /// Builds a network from 0-based `(source, target)` pairs.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyNetwork);
        }
        let mut seen = BTreeSet::new();
        for &(s, t) in edges {
            if s >= n || t >= n {
                return Err(Error::EdgeOutOfRange {
                    source_node: s + 1,
                    target: t + 1,
                    n,
                });
            }
            if !seen.insert((s, t)) {
                return Err(Error::DuplicateEdge {
                    source_node: s + 1,
                    target: t + 1,
                });
            }
        }
        let mut in_neighbors = vec![Vec::new(); n];
        let mut out_neighbors = vec![Vec::new(); n];
        for &(s, t) in &seen {
            in_neighbors[t].push(s);
            out_neighbors[s].push(t);
        }
        for list in in_neighbors.iter_mut() {
            list.sort_unstable();
        }
        Ok(Self {
            n,
            edges: seen.into_iter().collect(),
            in_neighbors,
            out_neighbors,
        })
    }

    /// Same as [`from_edge_list`](Self::from_edge_list) but with 1-based endpoints.
    /// A zero endpoint is reported as out of range.
    pub fn from_one_based(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut zero = Vec::with_capacity(edges.len());
        for &(s, t) in edges {
            if s == 0 || t == 0 {
                return Err(Error::EdgeOutOfRange {
                    source_node: s,
                    target: t,
                    n,
                });
            }
            zero.push((s - 1, t - 1));
        }
        Self::from_edge_list(n, &zero)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges sorted ascending, 0-based.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Agents observed by `i`, ascending.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    /// Agents that observe `i`, ascending.
    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.in_neighbors[i].len()
    }

    /// Whether `j` is a legal gossip partner for `i` (a neighbor or `i` itself).
    pub fn may_select(&self, i: usize, j: usize) -> bool {
        i == j || self.in_neighbors[i].binary_search(&j).is_ok()
    }

    pub fn is_strongly_connected(&self) -> bool {
        tarjan_scc(&self.out_neighbors).len() == 1
    }
}

/// Row-stochastic neighbor-selection matrix, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SelectionMatrix {
    /// Uniform choice among in-neighbors; agents without neighbors select themselves.
    pub fn uniform(net: &DirectedNetwork) -> Self {
        let rows = (0..net.n())
            .map(|i| {
                let nbrs = net.in_neighbors(i);
                if nbrs.is_empty() {
                    vec![(i, 1.0)]
                } else {
                    let p = 1.0 / nbrs.len() as f64;
                    nbrs.iter().map(|&j| (j, p)).collect()
                }
            })
            .collect();
        Self { rows }
    }

    /// Validates dense rows against `net`: each row must sum to one and may only
    /// put mass on the agent itself or its in-neighbors.
    pub fn custom(net: &DirectedNetwork, rows: &[Vec<f64>]) -> Result<Self> {
        let n = net.n();
        if rows.len() != n {
            return Err(Error::InvalidSelection(format!(
                "expected {n} rows, got {}",
                rows.len()
            )));
        }
        let mut sparse = Vec::with_capacity(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidSelection(format!(
                    "row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            let mut entries = Vec::new();
            for (j, &p) in row.iter().enumerate() {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidSelection(format!(
                        "entry ({}, {}) = {p} is not a probability",
                        i + 1,
                        j + 1
                    )));
                }
                if p > 0.0 {
                    if !net.may_select(i, j) {
                        return Err(Error::InvalidSelection(format!(
                            "row {} puts mass {p} on agent {}, which is neither a neighbor nor itself",
                            i + 1,
                            j + 1
                        )));
                    }
                    entries.push((j, p));
                }
            }
            if entries.is_empty() {
                return Err(Error::InvalidSelection(format!(
                    "row {} has zero mass everywhere",
                    i + 1
                )));
            }
            let sum: f64 = entries.iter().map(|&(_, p)| p).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidSelection(format!(
                    "row {} sums to {sum}, not 1",
                    i + 1
                )));
            }
            sparse.push(entries);
        }
        Ok(Self { rows: sparse })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Nonzero entries of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map_or(0.0, |&(_, p)| p)
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; n];
                for &(j, p) in row {
                    dense[j] = p;
                }
                dense
            })
            .collect()
    }

    /// Checks that every row is supported on the agent itself and its neighbors in `net`.
    pub fn check_against(&self, net: &DirectedNetwork) -> Result<()> {
        if self.n() != net.n() {
            return Err(Error::Inconsistent(format!(
                "selection matrix has dimension {} but network has {} agents",
                self.n(),
                net.n()
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                if !net.may_select(i, j) {
                    return Err(Error::InvalidSelection(format!(
                        "row {} selects agent {}, which is not a neighbor",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Adjacency of the transition graph: `i -> j` whenever `p_ij > 0`.
    pub fn support_graph(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, _)| j).collect())
            .collect()
    }

    /// Draws a column of row `i` from a uniform variate `u` in [0, 1).
    pub fn select(&self, i: usize, u: f64) -> usize {
        let row = &self.rows[i];
        let mut acc = 0.0;
        for &(j, p) in row {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // u landed in the rounding gap at the top of the row
        row.last().map(|&(j, _)| j).unwrap_or(i)
    }
}

/// Strongly connected components of `adj` (Tarjan, iterative).
///
/// Each component is sorted ascending; components come out in reverse
/// topological order of the condensation (sinks first).
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next_index = 0;
    // (node, position in its adjacency list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

/// Closed communicating classes of a selection chain and which of them each node can reach.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecurrentStructure {
    /// Recurrent classes, each sorted, ordered by smallest member.
    pub classes: Vec<Vec<usize>>,
    /// For each node, indices into `classes` reachable from it.
    pub reachable: Vec<Vec<usize>>,
}

impl RecurrentStructure {
    pub fn is_recurrent(&self, node: usize) -> bool {
        self.classes.iter().any(|c| c.binary_search(&node).is_ok())
    }

    pub fn transient(&self) -> Vec<usize> {
        (0..self.reachable.len())
            .filter(|&i| !self.is_recurrent(i))
            .collect()
    }
}

pub fn recurrent_classes(p: &SelectionMatrix) -> RecurrentStructure {
    let adj = p.support_graph();
    let n = adj.len();
    let comps = tarjan_scc(&adj);
    let mut comp_of = vec![0; n];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let mut classes: Vec<Vec<usize>> = comps
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members
                .iter()
                .all(|&v| adj[v].iter().all(|&w| comp_of[w] == *c))
        })
        .map(|(_, members)| members.clone())
        .collect();
    classes.sort_by_key(|c| c[0]);

    let mut class_of = vec![None; n];
    for (k, class) in classes.iter().enumerate() {
        for &v in class {
            class_of[v] = Some(k);
        }
    }
    let reachable = (0..n)
        .map(|start| {
            let mut seen = vec![false; n];
            let mut queue = vec![start];
            seen[start] = true;
            let mut hit = BTreeSet::new();
            while let Some(v) = queue.pop() {
                if let Some(k) = class_of[v] {
                    hit.insert(k);
                    continue;
                }
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push(w);
                    }
                }
            }
            hit.into_iter().collect()
        })
        .collect();
    RecurrentStructure { classes, reachable }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StationarySolver {
    /// Direct solve up to [`DIRECT_SOLVE_MAX`] nodes, power iteration above.
    #[default]
    Auto,
    Direct,
    Power,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pi: Vec<f64>,
}

impl StationaryDistribution {
    /// Wraps a caller-supplied probability vector, e.g. one computed elsewhere.
    pub fn from_vec(pi: Vec<f64>) -> Result<Self> {
        crate::world::check_distribution(&pi, "stationary distribution")?;
        Ok(Self { pi })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.pi
    }

    /// `max_j |(pi P)_j - pi_j|`, computed straight from the matrix entries.
    pub fn residual(&self, p: &SelectionMatrix) -> f64 {
        let mut image = vec![0.0; self.pi.len()];
        for (i, &w) in self.pi.iter().enumerate() {
            for &(j, pij) in p.row(i) {
                image[j] += w * pij;
            }
        }
        image
            .iter()
            .zip(&self.pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn stationary_distribution(p: &SelectionMatrix) -> Result<StationaryDistribution> {
    stationary_distribution_with(p, StationarySolver::Auto)
}

pub fn stationary_distribution_with(
    p: &SelectionMatrix,
    solver: StationarySolver,
) -> Result<StationaryDistribution> {
    let structure = recurrent_classes(p);
    if structure.classes.len() != 1 {
        return Err(Error::NonUniqueStationary(structure.classes));
    }
    let class = &structure.classes[0];
    let use_direct = match solver {
        StationarySolver::Auto => class.len() <= DIRECT_SOLVE_MAX,
        StationarySolver::Direct => true,
        StationarySolver::Power => false,
    };
    let on_class = if use_direct {
        solve_direct(p, class)?
    } else {
        solve_power(p, class)
    };
    let mut pi = vec![0.0; p.n()];
    for (&v, w) in class.iter().zip(on_class) {
        pi[v] = w;
    }
    Ok(StationaryDistribution { pi })
}

fn local_index(class: &[usize]) -> impl Fn(usize) -> usize + '_ {
    move |v| class.binary_search(&v).expect("closed class leaked mass")
}

/// Solves `(P_C^T - I) x = 0`, `sum x = 1` on the closed class `C`.
fn solve_direct(p: &SelectionMatrix, class: &[usize]) -> Result<Vec<f64>> {
    let c = class.len();
    let local = local_index(class);
    let mut a = DMatrix::<f64>::zeros(c, c);
    for (li, &i) in class.iter().enumerate() {
        a[(li, li)] -= 1.0;
        for &(j, pij) in p.row(i) {
            a[(local(j), li)] += pij;
        }
    }
    for col in 0..c {
        a[(c - 1, col)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(c);
    b[c - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or_else(|| {
        Error::InvalidSelection("singular system for stationary distribution".into())
    })?;
    Ok(clean(x.iter().copied().collect()))
}

/// Power iteration on the lazy chain `(I + P) / 2`, which shares the stationary
/// distribution of `P` and is aperiodic even when `P` is not.
fn solve_power(p: &SelectionMatrix, class: &[usize]) -> Vec<f64> {
    const MAX_ITERS: usize = 1_000_000;
    const STEP_TOL: f64 = 1e-15;
    let c = class.len();
    let local = local_index(class);
    let rows: Vec<Vec<(usize, f64)>> = class
        .iter()
        .map(|&i| p.row(i).iter().map(|&(j, w)| (local(j), w)).collect())
        .collect();
    let mut x = vec![1.0 / c as f64; c];
    let mut next = vec![0.0; c];
    for _ in 0..MAX_ITERS {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in rows.iter().enumerate() {
            next[i] += 0.5 * x[i];
            for &(j, w) in row {
                next[j] += 0.5 * x[i] * w;
            }
        }
        let total: f64 = next.iter().sum();
        let mut delta = 0.0f64;
        for (a, b) in x.iter_mut().zip(&next) {
            let v = b / total;
            delta = delta.max((v - *a).abs());
            *a = v;
        }
        if delta < STEP_TOL {
            break;
        }
    }
    clean(x)
}

fn clean(mut x: Vec<f64>) -> Vec<f64> {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    x
}
