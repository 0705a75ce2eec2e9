//! Directed weighted interaction graphs.
//!
//! Convention: an arc `j → i` with weight `w` means agent `i` *receives*
//! information from agent `j`, i.e. `w = wᵢⱼ`. In the dense adjacency matrix
//! `W`, row `i` lists what agent `i` receives. This is the orientation under
//! which the Laplacian `Lᵢᵢ = Σ_{j≠i} wᵢⱼ`, `Lᵢⱼ = −wᵢⱼ` has zero row sums and
//! governs `ẋᵢ = A xᵢ + F Σⱼ wᵢⱼ (xⱼ − xᵢ)`.
//!
//! Vertex ids in the public API are 1-based.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph must have at least one vertex")]
    Empty,
    #[error("vertex id {id} out of range 1..={n}")]
    VertexOutOfRange { id: usize, n: usize },
    #[error("arc {from} -> {to} has negative weight {weight}")]
    NegativeWeight { from: usize, to: usize, weight: f64 },
    #[error("arc {from} -> {to} has non-finite weight")]
    NonFiniteWeight { from: usize, to: usize },
    #[error("adjacency matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("vertex set is empty")]
    EmptyVertexSet,
    #[error("vertex set is not closed: arc {from} -> {to} enters it from outside")]
    NotClosed { from: usize, to: usize },
}

/// One directed arc, `from → to`, carrying `weight = w[to][from]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

impl Arc {
    pub fn new(from: usize, to: usize, weight: f64) -> Self {
        Self { from, to, weight }
    }
}

/// Sorted, duplicate-free set of 1-based vertex ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexSet {
    members: Vec<usize>,
}

impl VertexSet {
    pub fn new<I: IntoIterator<Item = usize>>(ids: I) -> Result<Self, GraphError> {
        let members: BTreeSet<usize> = ids.into_iter().collect();
        if members.is_empty() {
            return Err(GraphError::EmptyVertexSet);
        }
        if members.contains(&0) {
            return Err(GraphError::VertexOutOfRange {
                id: 0,
                n: usize::MAX,
            });
        }
        Ok(Self {
            members: members.into_iter().collect(),
        })
    }

    pub(crate) fn from_sorted(members: Vec<usize>) -> Self {
        debug_assert!(!members.is_empty());
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self { members }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.members.binary_search(&id).is_ok()
    }

    pub fn smallest(&self) -> usize {
        self.members[0]
    }
}

impl fmt::Display for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, id) in self.members.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}

/// Weighted digraph over agents `1..=n`, stored as a dense receiver-major
/// weight matrix (`weights[(i, j)]` is the influence of `j` on `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    weights: DMatrix<f64>,
}

impl WeightedDigraph {
    /// Builds a graph from an arc list. Duplicate arcs are summed; zero
    /// weights are accepted and mean "no arc".
    pub fn new(n: usize, arcs: &[Arc]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut weights = DMatrix::zeros(n, n);
        for arc in arcs {
            for id in [arc.from, arc.to] {
                if id == 0 || id > n {
                    return Err(GraphError::VertexOutOfRange { id, n });
                }
            }
            if !arc.weight.is_finite() {
                return Err(GraphError::NonFiniteWeight {
                    from: arc.from,
                    to: arc.to,
                });
            }
            if arc.weight < 0.0 {
                return Err(GraphError::NegativeWeight {
                    from: arc.from,
                    to: arc.to,
                    weight: arc.weight,
                });
            }
            weights[(arc.to - 1, arc.from - 1)] += arc.weight;
        }
        Ok(Self { weights })
    }

    /// Builds a graph from a dense adjacency matrix, row = receiver.
    pub fn from_adjacency(w: &DMatrix<f64>) -> Result<Self, GraphError> {
        if w.nrows() != w.ncols() {
            return Err(GraphError::NotSquare {
                rows: w.nrows(),
                cols: w.ncols(),
            });
        }
        let n = w.nrows();
        let mut arcs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let weight = w[(i, j)];
                if weight != 0.0 || !weight.is_finite() {
                    arcs.push(Arc::new(j + 1, i + 1, weight));
                }
            }
        }
        Self::new(n, &arcs)
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    /// Influence of `from` on `to` (1-based ids).
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[(to - 1, from - 1)]
    }

    /// Dense adjacency matrix, row = receiver, self-loops included.
    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Canonical arc list (positive weights only), ordered by receiver then source.
    pub fn arcs(&self) -> Vec<Arc> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.weights[(i, j)] > 0.0 {
                    out.push(Arc::new(j + 1, i + 1, self.weights[(i, j)]));
                }
            }
        }
        out
    }

    /// 0-based in-neighbours of 0-based vertex `i`, self-loops excluded.
    fn in_neighbors0(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&j| j != i && self.weights[(i, j)] > 0.0)
    }

    /// 0-based out-neighbours of 0-based vertex `j`, self-loops excluded.
    fn out_neighbors0(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&i| i != j && self.weights[(i, j)] > 0.0)
    }

    /// In-neighbours of `id` (1-based), self-loops excluded.
    pub fn in_neighbors(&self, id: usize) -> Vec<usize> {
        self.in_neighbors0(id - 1).map(|j| j + 1).collect()
    }

    pub fn in_degree(&self, id: usize) -> usize {
        self.in_neighbors0(id - 1).count()
    }

    /// Graph Laplacian. Self-loops carry no dynamical meaning and are dropped.
    pub fn laplacian(&self) -> DMatrix<f64> {
        laplacian_of(&self.weights)
    }

    /// Whether some vertex reaches every other vertex along information flow.
    pub fn has_spanning_tree(&self) -> bool {
        self.condensation().sources().len() == 1
    }

    /// Strongly connected components and the DAG between them.
    pub fn condensation(&self) -> Condensation {
        let n = self.n();
        let succ: Vec<Vec<usize>> = (0..n).map(|j| self.out_neighbors0(j).collect()).collect();
        let comps0 = tarjan(&succ);

        let mut component_of = vec![0; n];
        for (c, comp) in comps0.iter().enumerate() {
            for &v in comp {
                component_of[v] = c;
            }
        }
        let mut arcs = BTreeSet::new();
        for (j, outs) in succ.iter().enumerate() {
            for &i in outs {
                let (cj, ci) = (component_of[j], component_of[i]);
                if cj != ci {
                    arcs.insert((cj, ci));
                }
            }
        }
        let components = comps0
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                VertexSet::from_sorted(c.into_iter().map(|v| v + 1).collect())
            })
            .collect();
        Condensation {
            components,
            component_of,
            arcs,
        }
    }

    /// Independent groups: maximal closed vertex sets whose induced subgraph
    /// has a spanning tree, one per source component of the condensation.
    ///
    /// For a source component `R`, the group is the largest subset of the
    /// vertices reachable from `R` that receives nothing from outside itself.
    /// Groups are returned in ascending order of their smallest member.
    pub fn independent_groups(&self) -> Vec<VertexSet> {
        let n = self.n();
        let cond = self.condensation();
        let mut groups = Vec::new();
        for source in cond.sources() {
            let root = &cond.components[source];

            let mut inside = vec![false; n];
            let mut stack: Vec<usize> = root.members().iter().map(|&v| v - 1).collect();
            for &v in &stack {
                inside[v] = true;
            }
            while let Some(v) = stack.pop() {
                for u in self.out_neighbors0(v) {
                    if !inside[u] {
                        inside[u] = true;
                        stack.push(u);
                    }
                }
            }
            // Peel off vertices fed from outside until the set is closed.
            loop {
                let leaking: Vec<usize> = (0..n)
                    .filter(|&v| inside[v] && self.in_neighbors0(v).any(|u| !inside[u]))
                    .collect();
                if leaking.is_empty() {
                    break;
                }
                for v in leaking {
                    inside[v] = false;
                }
            }
            let group =
                VertexSet::from_sorted((0..n).filter(|&v| inside[v]).map(|v| v + 1).collect());
            debug_assert!(root.members().iter().all(|&v| group.contains(v)));
            debug_assert!(self.entering_arc(&group).is_none());
            groups.push(group);
        }
        groups.sort_by_key(VertexSet::smallest);
        groups
    }

    /// First arc entering `set` from outside, if any.
    pub fn entering_arc(&self, set: &VertexSet) -> Option<Arc> {
        for &to in set.members() {
            for from0 in self.in_neighbors0(to - 1) {
                if !set.contains(from0 + 1) {
                    return Some(Arc::new(from0 + 1, to, self.weights[(to - 1, from0)]));
                }
            }
        }
        None
    }

    /// Subgraph induced by `set`, with vertices renumbered `1..=|set|` in
    /// ascending id order.
    pub fn induced_subgraph(&self, set: &VertexSet) -> Result<WeightedDigraph, GraphError> {
        let n = self.n();
        if let Some(&id) = set.members().iter().find(|&&id| id > n) {
            return Err(GraphError::VertexOutOfRange { id, n });
        }
        let idx: Vec<usize> = set.members().iter().map(|&v| v - 1).collect();
        let weights = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.weights[(idx[a], idx[b])]);
        Ok(WeightedDigraph { weights })
    }

    /// Laplacian of a closed vertex set. Because nothing enters the set, this
    /// equals the principal block of the full Laplacian on those vertices.
    pub fn induced_laplacian(&self, set: &VertexSet) -> Result<DMatrix<f64>, GraphError> {
        let sub = self.induced_subgraph(set)?;
        if let Some(arc) = self.entering_arc(set) {
            return Err(GraphError::NotClosed {
                from: arc.from,
                to: arc.to,
            });
        }
        Ok(sub.laplacian())
    }
}

fn laplacian_of(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            if j != i {
                l[(i, j)] = -w[(i, j)];
                degree += w[(i, j)];
            }
        }
        l[(i, i)] = degree;
    }
    l
}

/// Strongly connected components of a graph and the acyclic graph they form.
#[derive(Debug, Clone, PartialEq)]
pub struct Condensation {
    /// Components, each a set of 1-based vertex ids.
    pub components: Vec<VertexSet>,
    /// 0-based vertex index → component index.
    pub component_of: Vec<usize>,
    /// Component-level arcs `(source component, receiving component)`.
    pub arcs: BTreeSet<(usize, usize)>,
}

impl Condensation {
    /// Components that receive nothing from other components.
    pub fn sources(&self) -> Vec<usize> {
        let mut has_in = vec![false; self.components.len()];
        for &(_, to) in &self.arcs {
            has_in[to] = true;
        }
        (0..self.components.len()).filter(|&c| !has_in[c]).collect()
    }

    pub fn component_containing(&self, id: usize) -> usize {
        self.component_of[id - 1]
    }
}

/// Iterative Tarjan SCC over 0-based successor lists.
fn tarjan(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = succ.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;

    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        // (vertex, position in its successor list)
        let mut call: Vec<(usize, usize)> = vec![(start, 0)];
        index[start] = next;
        low[start] = next;
        next += 1;
        stack.push(start);
        on_stack[start] = true;

        while let Some(top) = call.last_mut() {
            let v = top.0;
            if let Some(&w) = succ[v].get(top.1) {
                top.1 += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
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
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comps.push(comp);
            }
        }
    }
    comps
}
