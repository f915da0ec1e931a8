//! Finite-window structure of the skew product: the reachability graph on
//! `β × [−W, W]`, its communication classes and the sufficient condition for
//! the Linkage Property.
//!
//! Communication on all of `β × ℤ` has no finite certificate. Every edge
//! inside the window is a real edge, so mutual reachability found there is
//! genuine, but a class may grow once the window does. Classes are reported
//! on *certified* nodes only (sites at least one jump bound from the edge),
//! and a class that contains or touches an uncertified node is flagged
//! `truncated`: its closure flag and maximality say nothing about `β × ℤ`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::environment::{EnvironmentRealization, TransitionFunction};
use crate::map::MarkovIntervalMap;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StructureError {
    #[error("window must be at least 1, got {0}")]
    BadWindow(i64),
    #[error("environment has {env} cells, map has {map}")]
    CellMismatch { env: usize, map: usize },
}

/// A node `a_j × {i}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Node {
    pub cell: usize,
    pub site: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: Node,
    pub to: Node,
    /// The target lies outside the window.
    pub external: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkewGraph {
    window: i64,
    cells: usize,
    jump_bound: i64,
    /// Sorted by source node (site, then cell), then target.
    edges: Vec<Edge>,
    /// `offsets[n]..offsets[n+1]` are the edges leaving node index `n`.
    offsets: Vec<usize>,
}

/// Edge `(j, i) → (k, i + f_i(a_j))` for every `k` in the image set of `j`.
pub fn build_skew_graph(
    map: &MarkovIntervalMap,
    env: &EnvironmentRealization,
    window: i64,
) -> Result<SkewGraph, StructureError> {
    if window < 1 {
        return Err(StructureError::BadWindow(window));
    }
    if env.model().cells() != map.len() {
        return Err(StructureError::CellMismatch {
            env: env.model().cells(),
            map: map.len(),
        });
    }
    let cells = map.len();
    let jump_bound = env
        .model()
        .support()
        .iter()
        .map(TransitionFunction::max_abs)
        .max()
        .unwrap_or(0);
    let view = env.window(-window, window);
    let mut edges = Vec::new();
    let mut offsets = vec![0];
    for site in -window..=window {
        for cell in 0..cells {
            let to_site = site + view.jump(site, cell);
            let external = to_site.abs() > window;
            for &k in map.image_set(cell) {
                edges.push(Edge {
                    from: Node { cell, site },
                    to: Node { cell: k, site: to_site },
                    external,
                });
            }
            offsets.push(edges.len());
        }
    }
    Ok(SkewGraph {
        window,
        cells,
        jump_bound,
        edges,
        offsets,
    })
}

impl SkewGraph {
    pub fn window(&self) -> i64 {
        self.window
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn jump_bound(&self) -> i64 {
        self.jump_bound
    }

    pub fn node_count(&self) -> usize {
        self.cells * (2 * self.window as usize + 1)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    fn index(&self, node: Node) -> usize {
        (node.site + self.window) as usize * self.cells + node.cell
    }

    fn node_at(&self, index: usize) -> Node {
        Node {
            cell: index % self.cells,
            site: (index / self.cells) as i64 - self.window,
        }
    }

    pub fn contains(&self, node: Node) -> bool {
        node.cell < self.cells && node.site.abs() <= self.window
    }

    pub fn out_edges(&self, node: Node) -> &[Edge] {
        let n = self.index(node);
        &self.edges[self.offsets[n]..self.offsets[n + 1]]
    }

    pub fn out_degree(&self, node: Node) -> usize {
        self.out_edges(node).len()
    }

    /// Whether every orbit step from this node stays in the window.
    pub fn is_certified(&self, node: Node) -> bool {
        node.site.abs() + self.jump_bound <= self.window
    }

    /// One edge per line, `"j,i -> k,i'"`; edges leaving the window carry a
    /// trailing ` external`.
    pub fn edge_list_text(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = write!(out, "{},{} -> {},{}", e.from.cell, e.from.site, e.to.cell, e.to.site);
            if e.external {
                out.push_str(" external");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommClass {
    /// Sorted by site, then cell.
    pub nodes: Vec<Node>,
    /// No edge leaves the class.
    pub closed: bool,
    /// Some edge joins the class to an uncertified node.
    pub truncated: bool,
}

impl CommClass {
    pub fn sites(&self) -> BTreeSet<i64> {
        self.nodes.iter().map(|n| n.site).collect()
    }
}

/// Strongly connected components of the window graph, restricted to
/// certified nodes and ordered by their smallest node.
pub fn communication_classes(graph: &SkewGraph) -> Vec<CommClass> {
    let n_nodes = graph.node_count();
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n_nodes, graph.edges.len());
    for _ in 0..n_nodes {
        g.add_node(());
    }
    for e in graph.edges.iter().filter(|e| !e.external) {
        g.add_edge(NodeIndex::new(graph.index(e.from)), NodeIndex::new(graph.index(e.to)), ());
    }

    let mut component = vec![0usize; n_nodes];
    let mut groups: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|scc| {
            let mut members: Vec<usize> = scc.into_iter().map(|ix| ix.index()).collect();
            members.sort_unstable();
            members
        })
        .collect();
    groups.sort();
    for (c, members) in groups.iter().enumerate() {
        for &n in members {
            component[n] = c;
        }
    }

    let certified = |n: usize| graph.is_certified(graph.node_at(n));
    let mut truncated: Vec<bool> = groups.iter().map(|m| !m.iter().all(|&n| certified(n))).collect();
    let mut closed = vec![true; groups.len()];
    for e in &graph.edges {
        let src = graph.index(e.from);
        let from_c = component[src];
        if e.external {
            closed[from_c] = false;
            truncated[from_c] = true;
            continue;
        }
        let dst = graph.index(e.to);
        let to_c = component[dst];
        if to_c != from_c {
            closed[from_c] = false;
            if !certified(dst) {
                truncated[from_c] = true;
            }
            if !certified(src) {
                truncated[to_c] = true;
            }
        }
    }

    groups
        .into_iter()
        .enumerate()
        .filter_map(|(c, members)| {
            let mut nodes: Vec<Node> = members
                .into_iter()
                .filter(|&n| certified(n))
                .map(|n| graph.node_at(n))
                .collect();
            if nodes.is_empty() {
                return None;
            }
            nodes.sort_by_key(|n| (n.site, n.cell));
            Some(CommClass {
                nodes,
                closed: closed[c],
                truncated: truncated[c],
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkageCheck {
    pub holds: bool,
    pub witness: String,
}

/// Sufficient condition for the Linkage Property: (i) `2 <= #β`, (ii) every
/// function takes exactly the values `+1` and `−1`, and the base map is
/// full-branch.
pub fn check_linkage(map: &MarkovIntervalMap, support: &[TransitionFunction]) -> LinkageCheck {
    linkage_from_parts(map.len(), map.is_full_branch(), support)
}

/// [`check_linkage`] on the bare ingredients, so that partitions a
/// validated map cannot have (such as `#β = 1`) can still be checked.
pub fn linkage_from_parts(cells: usize, full_branch: bool, support: &[TransitionFunction]) -> LinkageCheck {
    let fail = |witness: String| LinkageCheck { holds: false, witness };
    if cells < 2 {
        return fail(format!("condition (i) fails: #β = {cells} < 2"));
    }
    if support.is_empty() {
        return fail("condition (ii) fails: the support is empty".into());
    }
    for (idx, g) in support.iter().enumerate() {
        if g.len() != cells {
            return fail(format!("support function {idx} has {} cells, #β = {cells}", g.len()));
        }
        let values: BTreeSet<i64> = g.jumps().iter().copied().collect();
        if values != BTreeSet::from([-1, 1]) {
            return fail(format!(
                "condition (ii) fails: support function {idx} takes values {values:?}, not {{+1, -1}}"
            ));
        }
    }
    if !full_branch {
        return fail("the base map is not full-branch".into());
    }
    LinkageCheck {
        holds: true,
        witness: format!(
            "#β = {cells}, full-branch, all {} support functions take values {{+1, -1}}; \
             a·c₁·c₂·b is admissible with c₁, c₂ the −1 cells at sites i+1 and i",
            support.len()
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{EnvKind, EnvironmentModel};

    fn fixed(f: Vec<i64>) -> EnvironmentRealization {
        EnvironmentModel::fixed(TransitionFunction::new(f)).realize(0)
    }

    #[test]
    fn graph_examples() {
        let doubling = MarkovIntervalMap::uniform(2);
        let g = build_skew_graph(&doubling, &fixed(vec![1, -1]), 2).unwrap();
        assert_eq!(g.node_count(), 10);
        for site in -1..=1 {
            for cell in 0..2 {
                assert_eq!(g.out_degree(Node { cell, site }), 2);
            }
        }

        let drift = build_skew_graph(&doubling, &fixed(vec![1, 1]), 3).unwrap();
        assert!(drift.edges().iter().all(|e| e.to.site == e.from.site + 1));

        let triple = MarkovIntervalMap::uniform(3);
        let g = build_skew_graph(&triple, &fixed(vec![1, 1, -1]), 1).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.out_degree(Node { cell: 0, site: 0 }), 3);
        assert!(g.edge_list_text().starts_with("0,-1 -> 0,0\n"));
    }

    #[test]
    fn class_examples() {
        let doubling = MarkovIntervalMap::uniform(2);
        let g = build_skew_graph(&doubling, &fixed(vec![1, -1]), 10).unwrap();
        let classes = communication_classes(&g);
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].sites(), (-9..=9).collect());
        assert_eq!(classes[0].nodes.len(), 38);

        let drift = build_skew_graph(&doubling, &fixed(vec![1, 1]), 5).unwrap();
        let classes = communication_classes(&drift);
        assert_eq!(classes.len(), 2 * 9);
        assert!(classes.iter().all(|c| c.nodes.len() == 1 && !c.closed));
    }

    #[test]
    fn trap_is_a_closed_class() {
        let doubling = MarkovIntervalMap::uniform(2);
        let support = vec![
            TransitionFunction::new(vec![1, -1]),
            TransitionFunction::new(vec![1, 1]),
            TransitionFunction::new(vec![-1, -1]),
        ];
        let model = EnvironmentModel::new(
            support,
            EnvKind::Fixed {
                function: 0,
                overrides: [(0, 1), (1, 2)].into_iter().collect(),
            },
            0,
        )
        .unwrap();
        let g = build_skew_graph(&doubling, &model.realize(0), 6).unwrap();
        let classes = communication_classes(&g);
        let trap: Vec<&CommClass> = classes.iter().filter(|c| c.closed).collect();
        assert_eq!(trap.len(), 1);
        assert_eq!(trap[0].sites(), BTreeSet::from([0, 1]));
        assert!(!trap[0].truncated);
        // The two bulk classes, plus the single nodes that fall into the trap.
        assert_eq!(classes.len(), 5);
        assert!(classes.contains(&CommClass {
            nodes: vec![Node { cell: 0, site: -1 }],
            closed: false,
            truncated: false,
        }));
    }

    #[test]
    fn linkage_examples() {
        let triple = MarkovIntervalMap::uniform(3);
        let support = vec![
            TransitionFunction::new(vec![1, 1, -1]),
            TransitionFunction::new(vec![1, -1, 1]),
            TransitionFunction::new(vec![-1, 1, 1]),
        ];
        assert!(check_linkage(&triple, &support).holds);

        let up = vec![TransitionFunction::new(vec![1, 1, 1])];
        let c = check_linkage(&triple, &up);
        assert!(!c.holds && c.witness.contains("(ii)"));

        let c = linkage_from_parts(1, true, &[TransitionFunction::new(vec![1])]);
        assert!(!c.holds && c.witness.contains("(i)"));

        let c = linkage_from_parts(2, false, &[TransitionFunction::new(vec![1, -1])]);
        assert!(!c.holds && c.witness.contains("full-branch"));
    }
}
