//! Secure multicast over an arbitrary connected weighted graph.
//!
//! The graph is reduced to its minimum spanning tree, the tree is rooted at
//! the global leader and pruned to an embedded binary tree, and leaders are
//! then placed on an antichain of that tree so the importance-weighted mean
//! hop count is minimal. Leader vertices never sit on each other's root path,
//! which is the graph analogue of prefix-free codes.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_traits::Zero;
use serde::Serialize;

use crate::exact::{int, Rational};
use crate::prefix::{expected_depth, optimal_depths, ImportanceProfile, LeaderId, NodePath};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("graph has no vertices")]
    Empty,
    #[error("vertex `{0}` listed more than once")]
    DuplicateVertex(String),
    #[error("edge references unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("self-loop at `{0}`")]
    SelfLoop(String),
    #[error("parallel edge between `{0}` and `{1}`")]
    ParallelEdge(String, String),
    #[error("edge `{0}`-`{1}` has weight {2}; weights must be positive and finite")]
    InvalidWeight(String, String, f64),
    #[error("graph is not connected")]
    Disconnected,
    #[error("root `{0}` is not a vertex of the graph")]
    RootNotInGraph(String),
    #[error("{leaders} leaders cannot be placed: the embedded tree admits at most {capacity} pairwise non-ancestral vertices below the root")]
    Infeasible { leaders: usize, capacity: usize },
    #[error("{0} leaders exceed the exact placement limit of {MAX_LEADERS}")]
    TooManyLeaders(usize),
}

/// Largest leader count accepted by the subset placement program.
pub const MAX_LEADERS: usize = 14;

/// Undirected edge between vertex indices `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Undirected weighted graph without self-loops or parallel edges.
///
/// A vertex's id is its position in the vertex list; that order breaks every
/// tie in the algorithms below. Names are labels for I/O.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl WeightedGraph {
    pub fn new<S: Into<String>>(
        vertices: impl IntoIterator<Item = S>,
        edges: impl IntoIterator<Item = (String, String, f64)>,
    ) -> Result<Self, GraphError> {
        let names: Vec<String> = vertices.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut index = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(GraphError::DuplicateVertex(name.clone()));
            }
        }
        let mut graph = WeightedGraph {
            names,
            index,
            edges: Vec::new(),
            edge_index: HashMap::new(),
        };
        for (a, b, w) in edges {
            let ia = graph
                .vertex(&a)
                .ok_or_else(|| GraphError::UnknownVertex(a.clone()))?;
            let ib = graph
                .vertex(&b)
                .ok_or_else(|| GraphError::UnknownVertex(b.clone()))?;
            if ia == ib {
                return Err(GraphError::SelfLoop(a));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(GraphError::InvalidWeight(a, b, w));
            }
            let (u, v) = ordered(ia, ib);
            if graph.edge_index.contains_key(&(u, v)) {
                return Err(GraphError::ParallelEdge(a, b));
            }
            graph.edge_index.insert((u, v), graph.edges.len());
            graph.edges.push(Edge { u, v, weight: w });
        }
        Ok(graph)
    }

    /// Vertices named `"0".."n-1"` with index-based edges.
    pub fn from_indexed(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        Self::new(
            (0..n).map(|i| i.to_string()),
            edges
                .iter()
                .map(|&(u, v, w)| (u.to_string(), v.to_string(), w)),
        )
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn vertex(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_weight(&self, a: usize, b: usize) -> Option<f64> {
        self.edge_index
            .get(&ordered(a, b))
            .map(|&i| self.edges[i].weight)
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanningTree {
    pub edges: Vec<Edge>,
    pub total_weight: f64,
}

/// Kruskal over the total order (weight, smaller endpoint, larger endpoint).
pub fn minimum_spanning_tree(graph: &WeightedGraph) -> Result<SpanningTree, GraphError> {
    let mut order: Vec<Edge> = graph.edges.clone();
    order.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.u.cmp(&b.u))
            .then(a.v.cmp(&b.v))
    });
    let n = graph.vertex_count();
    let mut sets = DisjointSets::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for e in order {
        if sets.union(e.u, e.v) {
            edges.push(e);
            if edges.len() + 1 == n {
                break;
            }
        }
    }
    if edges.len() + 1 != n {
        return Err(GraphError::Disconnected);
    }
    let total_weight = edges.iter().map(|e| e.weight).sum();
    Ok(SpanningTree {
        edges,
        total_weight,
    })
}

/// Spanning tree oriented away from a root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootedSpanningTree {
    pub root: usize,
    pub parent: Vec<Option<usize>>,
    /// Hop count from the root.
    pub depth: Vec<u32>,
    /// Children in ascending vertex order.
    pub children: Vec<Vec<usize>>,
    pub total_weight: f64,
}

pub fn root_tree(
    tree: &SpanningTree,
    graph: &WeightedGraph,
    root: &str,
) -> Result<RootedSpanningTree, GraphError> {
    let root = graph
        .vertex(root)
        .ok_or_else(|| GraphError::RootNotInGraph(root.to_string()))?;
    let n = graph.vertex_count();
    let mut adjacency = vec![Vec::new(); n];
    for e in &tree.edges {
        adjacency[e.u].push(e.v);
        adjacency[e.v].push(e.u);
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }

    let mut parent = vec![None; n];
    let mut depth = vec![0u32; n];
    let mut children = vec![Vec::new(); n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &w in &adjacency[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(v);
                depth[w] = depth[v] + 1;
                children[v].push(w);
                queue.push_back(w);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(GraphError::Disconnected);
    }
    Ok(RootedSpanningTree {
        root,
        parent,
        depth,
        children,
        total_weight: tree.total_weight,
    })
}

/// Subtree of a rooted spanning tree in which every vertex keeps at most two
/// children.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddedBinaryTree {
    pub root: usize,
    /// Retained children, ordered by (edge weight, vertex id).
    pub children: Vec<Vec<usize>>,
    /// Hop count from the root; `None` for pruned vertices.
    pub depth: Vec<Option<u32>>,
    /// Vertices cut off by pruning, ascending.
    pub uncovered: Vec<usize>,
}

impl EmbeddedBinaryTree {
    pub fn covers(&self, v: usize) -> bool {
        self.depth[v].is_some()
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.children.len()).filter(|&v| self.covers(v) && self.children[v].is_empty())
    }

    /// Most leaders that can be placed below the root without one lying on
    /// another's root path.
    pub fn antichain_capacity(&self) -> usize {
        if self.children[self.root].is_empty() {
            0
        } else {
            self.leaves().count()
        }
    }

    /// Vertex sequence from the root to `v`, or `None` if `v` is pruned.
    pub fn root_path(&self, v: usize) -> Option<Vec<usize>> {
        self.depth[v]?;
        let mut parent = vec![None; self.children.len()];
        for (p, kids) in self.children.iter().enumerate() {
            for &c in kids {
                parent[c] = Some(p);
            }
        }
        let mut path = vec![v];
        let mut cur = v;
        while let Some(p) = parent[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }

    /// Branch-index code of `v`: at each hop, the child's position (0 or 1).
    pub fn code(&self, v: usize) -> Option<NodePath> {
        let path = self.root_path(v)?;
        Some(NodePath(
            path.windows(2)
                .map(|w| self.children[w[0]].iter().position(|&c| c == w[1]).unwrap() as u32)
                .collect(),
        ))
    }
}

/// Keeps, for every vertex, the two children reached over the lightest edges
/// (ties by vertex id). Everything below a dropped child becomes uncovered.
pub fn embed_binary_tree(tree: &RootedSpanningTree, graph: &WeightedGraph) -> EmbeddedBinaryTree {
    let n = tree.children.len();
    let mut children = vec![Vec::new(); n];
    let mut depth = vec![None; n];
    depth[tree.root] = Some(0);
    let mut queue = VecDeque::from([tree.root]);
    while let Some(v) = queue.pop_front() {
        let mut kids = tree.children[v].clone();
        kids.sort_by(|&a, &b| {
            let wa = graph.edge_weight(v, a).expect("tree edge exists in graph");
            let wb = graph.edge_weight(v, b).expect("tree edge exists in graph");
            wa.total_cmp(&wb).then(a.cmp(&b))
        });
        kids.truncate(2);
        for &c in &kids {
            depth[c] = Some(depth[v].unwrap() + 1);
            queue.push_back(c);
        }
        children[v] = kids;
    }
    let uncovered = (0..n).filter(|&v| depth[v].is_none()).collect();
    EmbeddedBinaryTree {
        root: tree.root,
        children,
        depth,
        uncovered,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Placement {
    pub vertex: usize,
    pub depth: u32,
    /// Vertices from the root to the leader, both included.
    pub path: Vec<usize>,
    /// Branch code within the embedded binary tree.
    pub code: NodePath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublyOptimalPlan {
    pub root: usize,
    pub mst: SpanningTree,
    pub embedded: EmbeddedBinaryTree,
    pub profile: ImportanceProfile,
    pub placements: BTreeMap<LeaderId, Placement>,
    pub realized_expected_depth: Rational,
    /// Binary Huffman optimum, which ignores the tree's shape.
    pub ideal_expected_depth: Rational,
}

/// Optimal antichain placement by dynamic programming over leader subsets.
///
/// `best[v][S]` is the least cost of placing exactly the leaders in `S` inside
/// the subtree of `v` with no leader above another: either `S` is a single
/// leader sitting on `v` itself, or `S` is split between the (at most two)
/// children. Runs in `O(V 3^M)`.
pub fn place_leaders(
    tree: &EmbeddedBinaryTree,
    weights: &[Rational],
) -> Option<(Rational, Vec<usize>)> {
    let m = weights.len();
    let full = (1usize << m) - 1;
    let n = tree.children.len();

    // Post-order over covered vertices.
    let mut order = Vec::new();
    let mut stack = vec![tree.root];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(tree.children[v].iter().copied());
    }
    order.reverse();

    // best[v][S] with the choice needed to rebuild the placement.
    #[derive(Clone)]
    enum Choice {
        Here(usize),
        Split(usize),
    }
    let mut best: Vec<Vec<Option<(Rational, Choice)>>> = vec![Vec::new(); n];
    for &v in &order {
        let depth = int(tree.depth[v].unwrap() as u128);
        let kids = &tree.children[v];
        let mut table: Vec<Option<(Rational, Choice)>> = vec![None; full + 1];
        table[0] = Some((Rational::zero(), Choice::Split(0)));
        match kids.as_slice() {
            [] => {}
            [c] => {
                for s in 1..=full {
                    table[s] = best[*c][s]
                        .clone()
                        .map(|(cost, _)| (cost, Choice::Split(s)));
                }
            }
            [a, b] => {
                for s in 1..=full {
                    // Enumerate T ⊆ S going to `a`, the rest to `b`.
                    let mut t = s;
                    loop {
                        if let (Some((ca, _)), Some((cb, _))) = (&best[*a][t], &best[*b][s & !t]) {
                            let cost = ca + cb;
                            if table[s].as_ref().is_none_or(|(c, _)| cost < *c) {
                                table[s] = Some((cost, Choice::Split(t)));
                            }
                        }
                        if t == 0 {
                            break;
                        }
                        t = (t - 1) & s;
                    }
                }
            }
            _ => unreachable!("embedded tree is binary"),
        }
        if v != tree.root {
            for (i, w) in weights.iter().enumerate() {
                let s = 1 << i;
                let cost = w * &depth;
                if table[s].as_ref().is_none_or(|(c, _)| cost <= *c) {
                    table[s] = Some((cost, Choice::Here(i)));
                }
            }
        }
        best[v] = table;
    }

    let (cost, _) = best[tree.root][full].clone()?;
    let mut at = vec![usize::MAX; m];
    let mut work = vec![(tree.root, full)];
    while let Some((v, s)) = work.pop() {
        if s == 0 {
            continue;
        }
        match best[v][s].as_ref().unwrap().1 {
            Choice::Here(i) => at[i] = v,
            Choice::Split(t) => match tree.children[v].as_slice() {
                [c] => work.push((*c, s)),
                [a, b] => {
                    work.push((*a, t));
                    work.push((*b, s & !t));
                }
                _ => unreachable!("non-empty set placed below a leaf"),
            },
        }
    }
    Some((cost, at))
}

/// MST, then binary embedding, then optimal prefix-free leader placement.
pub fn plan_doubly_optimal(
    graph: &WeightedGraph,
    root: &str,
    profile: &ImportanceProfile,
) -> Result<DoublyOptimalPlan, GraphError> {
    let root_ix = graph
        .vertex(root)
        .ok_or_else(|| GraphError::RootNotInGraph(root.to_string()))?;
    let mst = minimum_spanning_tree(graph)?;
    let rooted = root_tree(&mst, graph, root)?;
    let embedded = embed_binary_tree(&rooted, graph);

    let leaders = profile.len();
    if leaders > MAX_LEADERS {
        return Err(GraphError::TooManyLeaders(leaders));
    }
    let capacity = embedded.antichain_capacity();
    if leaders > capacity {
        return Err(GraphError::Infeasible { leaders, capacity });
    }
    let ids: Vec<LeaderId> = profile.weights().keys().copied().collect();
    let weights: Vec<Rational> = profile.weights().values().cloned().collect();
    let (cost, at) =
        place_leaders(&embedded, &weights).ok_or(GraphError::Infeasible { leaders, capacity })?;

    let placements = ids
        .iter()
        .zip(at)
        .map(|(&id, v)| {
            let placement = Placement {
                vertex: v,
                depth: embedded.depth[v].unwrap(),
                path: embedded.root_path(v).unwrap(),
                code: embedded.code(v).unwrap(),
            };
            (id, placement)
        })
        .collect();
    let ideal = ideal_expected_depth(profile);
    Ok(DoublyOptimalPlan {
        root: root_ix,
        mst,
        embedded,
        profile: profile.clone(),
        placements,
        realized_expected_depth: cost,
        ideal_expected_depth: ideal,
    })
}

fn ideal_expected_depth(profile: &ImportanceProfile) -> Rational {
    let depths = optimal_depths(profile, 2).expect("binary arity is valid");
    expected_depth(&depths, profile).expect("ids come from the same profile")
}

/// Re-derives every claim a plan makes against the graph.
///
/// Checks that the MST edges exist in the graph and form a minimum spanning
/// tree, that each leader path starts at the root and walks MST edges, that
/// leaders form an antichain, and that the reported metrics recompute exactly.
pub fn verify_plan(plan: &DoublyOptimalPlan, graph: &WeightedGraph) -> bool {
    let n = graph.vertex_count();
    if plan.root >= n || plan.mst.edges.len() + 1 != n {
        return false;
    }
    let mut mst_edges = BTreeSet::new();
    let mut sets = DisjointSets::new(n);
    for e in &plan.mst.edges {
        if e.u >= n || e.v >= n || graph.edge_weight(e.u, e.v) != Some(e.weight) {
            return false;
        }
        if !sets.union(e.u, e.v) {
            return false;
        }
        mst_edges.insert(ordered(e.u, e.v));
    }
    let weight: f64 = plan.mst.edges.iter().map(|e| e.weight).sum();
    if weight != plan.mst.total_weight {
        return false;
    }
    match minimum_spanning_tree(graph) {
        Ok(best) if best.total_weight == weight => {}
        _ => return false,
    }

    if plan.placements.len() != plan.profile.len() {
        return false;
    }
    let mut realized = Rational::zero();
    let mut leader_vertices = BTreeSet::new();
    for (id, placement) in &plan.placements {
        let path = &placement.path;
        if path.first() != Some(&plan.root) || path.last() != Some(&placement.vertex) {
            return false;
        }
        if path.len() < 2 || placement.depth as usize != path.len() - 1 {
            return false;
        }
        if !path
            .windows(2)
            .all(|w| mst_edges.contains(&ordered(w[0], w[1])))
        {
            return false;
        }
        let mut distinct = path.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != path.len() {
            return false;
        }
        let Some(p) = plan.profile.get(*id) else {
            return false;
        };
        realized += p * int(placement.depth as u128);
        if !leader_vertices.insert(placement.vertex) {
            return false;
        }
    }
    for placement in plan.placements.values() {
        let relays = &placement.path[..placement.path.len() - 1];
        if relays.iter().any(|v| leader_vertices.contains(v)) {
            return false;
        }
    }
    realized == plan.realized_expected_depth
        && ideal_expected_depth(&plan.profile) == plan.ideal_expected_depth
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;

    fn named(vertices: &[&str], edges: &[(&str, &str, f64)]) -> WeightedGraph {
        WeightedGraph::new(
            vertices.iter().copied(),
            edges
                .iter()
                .map(|&(a, b, w)| (a.to_string(), b.to_string(), w)),
        )
        .unwrap()
    }

    fn edge_names(g: &WeightedGraph, t: &SpanningTree) -> Vec<String> {
        let mut out: Vec<String> = t
            .edges
            .iter()
            .map(|e| format!("{}{}", g.name(e.u), g.name(e.v)))
            .collect();
        out.sort();
        out
    }

    #[test]
    fn graph_validation() {
        let v = ["a", "b"];
        let bad = |edges: &[(&str, &str, f64)]| {
            WeightedGraph::new(v, edges.iter().map(|&(a, b, w)| (a.into(), b.into(), w)))
        };
        assert_eq!(
            bad(&[("a", "a", 1.0)]),
            Err(GraphError::SelfLoop("a".into()))
        );
        assert!(matches!(
            bad(&[("a", "b", 1.0), ("b", "a", 2.0)]),
            Err(GraphError::ParallelEdge(..))
        ));
        assert!(matches!(
            bad(&[("a", "b", 0.0)]),
            Err(GraphError::InvalidWeight(..))
        ));
        assert!(matches!(
            bad(&[("a", "b", f64::NAN)]),
            Err(GraphError::InvalidWeight(..))
        ));
        assert_eq!(
            bad(&[("a", "z", 1.0)]),
            Err(GraphError::UnknownVertex("z".into()))
        );
        assert_eq!(
            WeightedGraph::new(["a", "a"], std::iter::empty()),
            Err(GraphError::DuplicateVertex("a".into()))
        );
        assert_eq!(
            WeightedGraph::new(Vec::<String>::new(), std::iter::empty()),
            Err(GraphError::Empty)
        );
    }

    #[test]
    fn mst_examples() {
        let tri = named(
            &["a", "b", "c"],
            &[("a", "b", 1.0), ("b", "c", 2.0), ("a", "c", 3.0)],
        );
        let t = minimum_spanning_tree(&tri).unwrap();
        assert_eq!(edge_names(&tri, &t), vec!["ab", "bc"]);
        assert_eq!(t.total_weight, 3.0);

        let single = named(&["a", "b"], &[("a", "b", 5.0)]);
        assert_eq!(minimum_spanning_tree(&single).unwrap().total_weight, 5.0);

        let square = named(
            &["a", "b", "c", "d"],
            &[
                ("a", "b", 1.0),
                ("b", "c", 1.0),
                ("c", "d", 1.0),
                ("d", "a", 1.0),
                ("a", "c", 10.0),
            ],
        );
        let t = minimum_spanning_tree(&square).unwrap();
        assert_eq!(t.total_weight, 3.0);
        assert!(!edge_names(&square, &t).contains(&"ac".to_string()));
        // Equal weights: (a,b), (a,d), (b,c) come first in endpoint order.
        assert_eq!(edge_names(&square, &t), vec!["ab", "ad", "bc"]);

        let split = named(&["a", "b", "c"], &[("a", "b", 1.0)]);
        assert_eq!(minimum_spanning_tree(&split), Err(GraphError::Disconnected));
        let lone = named(&["a"], &[]);
        assert_eq!(minimum_spanning_tree(&lone).unwrap().edges.len(), 0);
    }

    #[test]
    fn rooting() {
        let path = named(&["a", "b", "c"], &[("a", "b", 1.0), ("b", "c", 1.0)]);
        let t = minimum_spanning_tree(&path).unwrap();
        let r = root_tree(&t, &path, "a").unwrap();
        assert_eq!(r.parent, vec![None, Some(0), Some(1)]);
        assert_eq!(r.depth, vec![0, 1, 2]);
        assert_eq!(
            root_tree(&t, &path, "q"),
            Err(GraphError::RootNotInGraph("q".into()))
        );

        let star = named(
            &["h", "x", "y", "z"],
            &[("h", "x", 1.0), ("h", "y", 1.0), ("h", "z", 1.0)],
        );
        let t = minimum_spanning_tree(&star).unwrap();
        let r = root_tree(&t, &star, "h").unwrap();
        assert!(r.parent[1..].iter().all(|&p| p == Some(0)));
    }

    #[test]
    fn binary_embedding() {
        let g = named(
            &["r", "a", "b", "c"],
            &[("r", "a", 3.0), ("r", "b", 1.0), ("r", "c", 2.0)],
        );
        let t = minimum_spanning_tree(&g).unwrap();
        let e = embed_binary_tree(&root_tree(&t, &g, "r").unwrap(), &g);
        assert_eq!(e.children[0], vec![2, 3]);
        assert_eq!(e.uncovered, vec![1]);

        let star = named(
            &["h", "w", "x", "y", "z"],
            &[
                ("h", "z", 1.0),
                ("h", "y", 1.0),
                ("h", "x", 1.0),
                ("h", "w", 1.0),
            ],
        );
        let t = minimum_spanning_tree(&star).unwrap();
        let e = embed_binary_tree(&root_tree(&t, &star, "h").unwrap(), &star);
        assert_eq!(e.children[0], vec![1, 2]);
        assert_eq!(e.uncovered, vec![3, 4]);

        // Already binary: nothing pruned, children unchanged.
        let bin = complete_binary(2);
        let t = minimum_spanning_tree(&bin).unwrap();
        let rooted = root_tree(&t, &bin, "0").unwrap();
        let e = embed_binary_tree(&rooted, &bin);
        assert!(e.uncovered.is_empty());
        for v in 0..bin.vertex_count() {
            let mut kids = e.children[v].clone();
            kids.sort();
            assert_eq!(kids, rooted.children[v]);
        }
    }

    /// Complete binary tree in heap numbering with unit weights.
    fn complete_binary(depth: u32) -> WeightedGraph {
        let n = (1usize << (depth + 1)) - 1;
        let edges: Vec<(usize, usize, f64)> = (1..n).map(|v| ((v - 1) / 2, v, 1.0)).collect();
        WeightedGraph::from_indexed(n, &edges).unwrap()
    }

    #[test]
    fn plans_on_small_graphs() {
        let g = complete_binary(2);
        let p = ImportanceProfile::from_probs(&[ratio(1, 2), ratio(1, 4), ratio(1, 4)]).unwrap();
        let plan = plan_doubly_optimal(&g, "0", &p).unwrap();
        assert_eq!(plan.realized_expected_depth, ratio(3, 2));
        assert_eq!(plan.ideal_expected_depth, ratio(3, 2));
        assert!(verify_plan(&plan, &g));

        let chain = named(
            &["a", "b", "c", "d"],
            &[("a", "b", 1.0), ("b", "c", 1.0), ("c", "d", 1.0)],
        );
        let one = ImportanceProfile::from_weights(&[1]).unwrap();
        let plan = plan_doubly_optimal(&chain, "a", &one).unwrap();
        assert_eq!(plan.placements[&LeaderId(0)].vertex, 1);
        assert_eq!(plan.realized_expected_depth, ratio(1, 1));

        let short = named(&["a", "b", "c"], &[("a", "b", 1.0), ("b", "c", 1.0)]);
        let two = ImportanceProfile::from_weights(&[1, 1]).unwrap();
        assert_eq!(
            plan_doubly_optimal(&short, "a", &two),
            Err(GraphError::Infeasible {
                leaders: 2,
                capacity: 1
            })
        );
        let lone = named(&["a"], &[]);
        assert!(matches!(
            plan_doubly_optimal(&lone, "a", &one),
            Err(GraphError::Infeasible { capacity: 0, .. })
        ));
    }

    #[test]
    fn tampered_plans_fail_verification() {
        let g = complete_binary(2);
        let p = ImportanceProfile::from_weights(&[2, 1, 1]).unwrap();
        let plan = plan_doubly_optimal(&g, "0", &p).unwrap();
        assert!(verify_plan(&plan, &g));

        // Leader moved onto another leader's root path.
        let mut bad = plan.clone();
        let deep = *bad
            .placements
            .iter()
            .find(|(_, pl)| pl.depth == 2)
            .unwrap()
            .0;
        let relay = bad.placements[&deep].path[1];
        let other = *bad
            .placements
            .keys()
            .find(|&&id| id != deep && bad.placements[&id].vertex != relay)
            .unwrap();
        let pl = bad.placements.get_mut(&other).unwrap();
        pl.vertex = relay;
        pl.path = vec![0, relay];
        pl.depth = 1;
        assert!(!verify_plan(&bad, &g));

        // Path through an edge outside the MST.
        let g2 = named(
            &["r", "a", "b"],
            &[("r", "a", 1.0), ("r", "b", 1.0), ("a", "b", 5.0)],
        );
        let one = ImportanceProfile::from_weights(&[1]).unwrap();
        let plan = plan_doubly_optimal(&g2, "r", &one).unwrap();
        assert!(verify_plan(&plan, &g2));
        let mut bad = plan.clone();
        let pl = bad.placements.get_mut(&LeaderId(0)).unwrap();
        pl.vertex = 2;
        pl.path = vec![0, 1, 2];
        pl.depth = 2;
        bad.realized_expected_depth = ratio(2, 1);
        assert!(!verify_plan(&bad, &g2));

        // Misreported metric.
        let mut bad = plan;
        bad.realized_expected_depth = ratio(5, 1);
        assert!(!verify_plan(&bad, &g2));
    }

    #[test]
    fn codes_follow_embedded_children() {
        let g = complete_binary(2);
        let t = minimum_spanning_tree(&g).unwrap();
        let e = embed_binary_tree(&root_tree(&t, &g, "0").unwrap(), &g);
        assert_eq!(e.code(0).unwrap().to_string(), "");
        assert_eq!(e.code(4).unwrap().to_string(), "01");
        assert_eq!(e.code(5).unwrap().to_string(), "10");
        assert_eq!(e.root_path(6).unwrap(), vec![0, 2, 6]);
    }
}
