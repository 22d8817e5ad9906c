//! Fill-reducing orderings.
//!
//! The default is a nested dissection built from breadth-first level
//! structures: a pseudo-peripheral vertex is found, the level holding the
//! median vertex becomes a separator, and both sides are ordered recursively
//! before the separator. Reverse Cuthill-McKee is available for banded work.

use std::collections::VecDeque;

use crate::csr::{CsrMatrix, Graph};

/// Subgraphs at or below this size are emitted without further dissection.
const LEAF_SIZE: usize = 8;

/// How the columns of a matrix are ordered before factorization.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ColumnOrdering {
    Natural,
    ReverseCuthillMcKee,
    #[default]
    NestedDissection,
    /// Caller-supplied elimination order: `order[k]` is the k-th column eliminated.
    Given(Vec<usize>),
}

impl ColumnOrdering {
    pub fn compute(&self, a: &CsrMatrix) -> Vec<usize> {
        match self {
            ColumnOrdering::Natural => (0..a.dim()).collect(),
            ColumnOrdering::ReverseCuthillMcKee => reverse_cuthill_mckee(&a.symmetric_graph()),
            ColumnOrdering::NestedDissection => nested_dissection(&a.symmetric_graph()),
            ColumnOrdering::Given(order) => order.clone(),
        }
    }
}

/// True when `order` is a permutation of `0..n`.
pub fn is_permutation(order: &[usize], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

/// Expands an order over `n_nodes` nodes to a system whose unknown
/// `d * n_nodes + k` is the d-th degree of freedom of node k.
pub fn expand_strided(node_order: &[usize], n_nodes: usize, dofs: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(node_order.len() * dofs);
    for &k in node_order {
        for d in 0..dofs {
            out.push(d * n_nodes + k);
        }
    }
    out
}

struct Levels {
    order: Vec<usize>,
    starts: Vec<usize>,
}

/// BFS restricted to vertices whose label equals `region`.
fn level_structure(g: &Graph, root: usize, label: &[u32], region: u32, dist: &mut [u32]) -> Levels {
    let mut order = vec![root];
    let mut starts = vec![0];
    dist[root] = 0;
    let mut head = 0;
    let mut level = 0u32;
    while head < order.len() {
        let v = order[head];
        if dist[v] != level {
            level += 1;
            starts.push(head);
        }
        head += 1;
        for &w in g.neighbors(v) {
            if label[w] == region && dist[w] == u32::MAX {
                dist[w] = dist[v] + 1;
                order.push(w);
            }
        }
    }
    starts.push(order.len());
    for &v in &order {
        dist[v] = u32::MAX;
    }
    Levels { order, starts }
}

fn pseudo_peripheral(
    g: &Graph,
    start: usize,
    label: &[u32],
    region: u32,
    dist: &mut [u32],
) -> (usize, Levels) {
    let mut root = start;
    let mut levels = level_structure(g, root, label, region, dist);
    loop {
        let depth = levels.starts.len() - 2;
        let last = &levels.order[levels.starts[depth]..levels.starts[depth + 1]];
        let candidate = *last
            .iter()
            .min_by_key(|&&v| (g.degree(v), v))
            .expect("non-empty last level");
        let next = level_structure(g, candidate, label, region, dist);
        if next.starts.len() > levels.starts.len() {
            root = candidate;
            levels = next;
        } else {
            return (root, levels);
        }
    }
}

/// Nested dissection ordering of an undirected graph.
pub fn nested_dissection(g: &Graph) -> Vec<usize> {
    let n = g.len();
    let mut label = vec![0u32; n];
    let mut dist = vec![u32::MAX; n];
    let mut out = Vec::with_capacity(n);
    let mut next_label = 1u32;
    let all: Vec<usize> = (0..n).collect();
    dissect(g, all, 0, &mut label, &mut dist, &mut next_label, &mut out);
    debug_assert!(is_permutation(&out, n));
    out
}

fn dissect(
    g: &Graph,
    vertices: Vec<usize>,
    region: u32,
    label: &mut [u32],
    dist: &mut [u32],
    next_label: &mut u32,
    out: &mut Vec<usize>,
) {
    if vertices.len() <= LEAF_SIZE {
        out.extend(vertices);
        return;
    }
    // Split into connected components first.
    let comp_label = *next_label;
    *next_label += 1;
    let mut components: Vec<Vec<usize>> = Vec::new();
    for &s in &vertices {
        if label[s] != region {
            continue;
        }
        let levels = level_structure(g, s, label, region, dist);
        for &v in &levels.order {
            label[v] = comp_label;
        }
        components.push(levels.order);
    }
    for comp in components {
        let id = *next_label;
        *next_label += 1;
        for &v in &comp {
            label[v] = id;
        }
        if comp.len() <= LEAF_SIZE {
            out.extend(comp);
            continue;
        }
        let start = *comp.iter().min_by_key(|&&v| (g.degree(v), v)).unwrap();
        let (_, levels) = pseudo_peripheral(g, start, label, id, dist);
        let depth = levels.starts.len() - 1;
        if depth < 3 {
            out.extend(comp);
            continue;
        }
        // Separator level: the one containing the median vertex, kept away
        // from the first and last level.
        let half = comp.len() / 2;
        let mut sep_level = 1;
        while sep_level + 1 < depth - 1 && levels.starts[sep_level + 1] <= half {
            sep_level += 1;
        }
        let sep_range = levels.starts[sep_level]..levels.starts[sep_level + 1];
        let below: Vec<usize> = levels.order[..sep_range.start].to_vec();
        let mut above: Vec<usize> = levels.order[sep_range.end..].to_vec();

        // Separator vertices with no neighbour above can join the lower part.
        let above_id = *next_label;
        *next_label += 1;
        for &v in &above {
            label[v] = above_id;
        }
        let mut below = below;
        let mut separator = Vec::with_capacity(sep_range.len());
        for &v in &levels.order[sep_range] {
            if g.neighbors(v).iter().any(|&w| label[w] == above_id) {
                separator.push(v);
            } else {
                below.push(v);
            }
        }
        let below_id = *next_label;
        *next_label += 1;
        for &v in &below {
            label[v] = below_id;
        }
        let sep_id = *next_label;
        *next_label += 1;
        for &v in &separator {
            label[v] = sep_id;
        }
        above.sort_unstable();
        below.sort_unstable();
        dissect(g, below, below_id, label, dist, next_label, out);
        dissect(g, above, above_id, label, dist, next_label, out);
        out.extend(separator);
    }
}

/// Reverse Cuthill-McKee over every connected component.
pub fn reverse_cuthill_mckee(g: &Graph) -> Vec<usize> {
    let n = g.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let label = vec![0u32; n];
    let mut dist = vec![u32::MAX; n];
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (g.degree(v), v));
    for &s in &by_degree {
        if visited[s] {
            continue;
        }
        // Pseudo-peripheral start within this component.
        let (root, _) = pseudo_peripheral(g, s, &label, 0, &mut dist);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        let mut nbrs = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(g.neighbors(v).iter().copied().filter(|&w| !visited[w]));
            nbrs.sort_by_key(|&w| (g.degree(w), w));
            for &w in &nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}
