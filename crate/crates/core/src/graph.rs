//! Circuit architectures as undirected simple graphs, and the tree machinery behind
//! the Detectability-Lemma chain: breadth-first spanning trees, the recursive
//! leaf-path depth, compressed spanning trees and the flattening rewrite.
//!
//! Vertex ids are 0-based everywhere.

use crate::error::{Error, Result};
use rand::Rng;
use serde::Serialize;
use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a simple graph; edges are normalised to `(min, max)` and sorted.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Graph> {
        if n == 0 {
            return Err(Error::InvalidSize("a graph needs at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Invalid(format!("edge ({u},{v}) references a vertex >= {n}")));
            }
            if u == v {
                return Err(Error::Invalid(format!("self-loop at vertex {u}")));
            }
            if !set.insert((u.min(v), u.max(v))) {
                return Err(Error::Invalid(format!("duplicate edge ({u},{v})")));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        Ok(Graph { n, edges, adj })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Minimum vertex degree (written ϑ in the bounds).
    pub fn min_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// Maximum vertex degree (κ).
    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Distances from `src`; unreachable vertices get `usize::MAX`.
    pub fn bfs_distances(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        let mut queue = VecDeque::from([src]);
        dist[src] = 0;
        while let Some(u) = queue.pop_front() {
            for &w in &self.adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.first_unreachable().is_none()
    }

    fn first_unreachable(&self) -> Option<usize> {
        self.bfs_distances(0).iter().position(|&d| d == usize::MAX)
    }

    pub fn check_connected(&self) -> Result<()> {
        match self.first_unreachable() {
            Some(vertex) => Err(Error::Disconnected { vertex }),
            None => Ok(()),
        }
    }

    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.n && self.is_connected()
    }

    /// True for the open chain on all `n` vertices (in any labelling).
    pub fn is_path_graph(&self) -> bool {
        self.is_tree() && self.max_degree() <= 2
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n * (self.n - 1) / 2
    }

    /// Vertex of minimum eccentricity, smallest id on ties.
    pub fn center(&self) -> usize {
        (0..self.n)
            .min_by_key(|&v| (self.bfs_distances(v).into_iter().max().unwrap_or(0), v))
            .unwrap_or(0)
    }

    /// Image of the graph under `v -> perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::Invalid("relabelling has the wrong length".into()));
        }
        Graph::new(self.n, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))
    }

    /// Star on `n` vertices with centre `n - 1`.
    pub fn star(n: usize) -> Result<Graph> {
        min_size(n)?;
        Graph::new(n, (0..n - 1).map(|i| (n - 1, i)))
    }

    pub fn path(n: usize) -> Result<Graph> {
        min_size(n)?;
        Graph::new(n, (0..n - 1).map(|i| (i, i + 1)))
    }

    pub fn complete(n: usize) -> Result<Graph> {
        min_size(n)?;
        Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    /// `a` rows by `b` columns, vertex `r * b + c`.
    pub fn grid(a: usize, b: usize) -> Result<Graph> {
        if a == 0 || b == 0 {
            return Err(Error::InvalidSize(format!("grid {a}x{b}")));
        }
        min_size(a * b)?;
        let mut edges = Vec::new();
        for r in 0..a {
            for c in 0..b {
                let v = r * b + c;
                if c + 1 < b {
                    edges.push((v, v + 1));
                }
                if r + 1 < a {
                    edges.push((v, v + b));
                }
            }
        }
        Graph::new(a * b, edges)
    }

    /// Three arms of `a`, `b`, `c` edges joined at centre 0; arm vertices are numbered
    /// consecutively outward, first arm first.
    pub fn y(a: usize, b: usize, c: usize) -> Result<Graph> {
        if a == 0 || b == 0 || c == 0 {
            return Err(Error::InvalidSize(format!("y arms {a},{b},{c} must all be positive")));
        }
        let mut edges = Vec::new();
        let mut next = 1;
        for arm in [a, b, c] {
            let mut prev = 0;
            for _ in 0..arm {
                edges.push((prev, next));
                prev = next;
                next += 1;
            }
        }
        Graph::new(next, edges)
    }

    /// Parses an edge list: one `u v` pair per line, `#` comments, 0-based contiguous ids.
    pub fn from_edge_list(text: &str) -> Result<Graph> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected two ids, got {:?}", lineno + 1, line)));
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("line {}: bad vertex id {s:?}", lineno + 1)))
            };
            pairs.push((parse(fields[0])?, parse(fields[1])?));
        }
        let n = pairs.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        min_size(n)?;
        let mut seen = vec![false; n];
        for &(u, v) in &pairs {
            seen[u] = true;
            seen[v] = true;
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(Error::Parse(format!("vertex ids are not contiguous: {v} never appears")));
        }
        let g = Graph::new(n, pairs).map_err(|e| Error::Parse(e.to_string()))?;
        g.check_connected()?;
        Ok(g)
    }
}

fn min_size(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::InvalidSize(format!("need at least 2 vertices, got {n}")))
    } else {
        Ok(())
    }
}

/// Generator grammar `kind:params`, e.g. `star:5`, `grid:3x3`, `y:5,5,5`, `file:edges.txt`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphKind {
    Star(usize),
    Path(usize),
    Complete(usize),
    Grid(usize, usize),
    Y(usize, usize, usize),
    File(PathBuf),
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<GraphKind> {
        let (kind, params) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("graph descriptor {s:?} is not of the form kind:params")))?;
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad number {t:?} in graph descriptor {s:?}")))
        };
        let list = |sep: char, len: usize| -> Result<Vec<usize>> {
            let v = params.split(sep).map(num).collect::<Result<Vec<_>>>()?;
            if v.len() != len {
                return Err(Error::Parse(format!("graph descriptor {s:?} needs {len} parameters")));
            }
            Ok(v)
        };
        match kind {
            "star" => Ok(GraphKind::Star(num(params)?)),
            "path" => Ok(GraphKind::Path(num(params)?)),
            "complete" => Ok(GraphKind::Complete(num(params)?)),
            "grid" => {
                let v = list('x', 2)?;
                Ok(GraphKind::Grid(v[0], v[1]))
            }
            "y" => {
                let v = list(',', 3)?;
                Ok(GraphKind::Y(v[0], v[1], v[2]))
            }
            "file" => Ok(GraphKind::File(PathBuf::from(params))),
            _ => Err(Error::Parse(format!("unknown graph kind {kind:?}"))),
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::Star(n) => write!(f, "star:{n}"),
            GraphKind::Path(n) => write!(f, "path:{n}"),
            GraphKind::Complete(n) => write!(f, "complete:{n}"),
            GraphKind::Grid(a, b) => write!(f, "grid:{a}x{b}"),
            GraphKind::Y(a, b, c) => write!(f, "y:{a},{b},{c}"),
            GraphKind::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

pub fn generate(kind: &GraphKind) -> Result<Graph> {
    match kind {
        GraphKind::Star(n) => Graph::star(*n),
        GraphKind::Path(n) => Graph::path(*n),
        GraphKind::Complete(n) => Graph::complete(*n),
        GraphKind::Grid(a, b) => Graph::grid(*a, *b),
        GraphKind::Y(a, b, c) => Graph::y(*a, *b, *c),
        GraphKind::File(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Parse(format!("cannot read {}: {e}", p.display())))?;
            Graph::from_edge_list(&text)
        }
    }
}

/// Uniform random recursive tree: vertex `i` attaches to a uniform earlier vertex.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Graph> {
    min_size(n)?;
    Graph::new(n, (1..n).map(|i| (rng.random_range(0..i), i)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootedTree {
    root: usize,
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
}

impl RootedTree {
    /// `parent[root] == root`; every other vertex must reach the root.
    pub fn from_parents(root: usize, parent: Vec<usize>) -> Result<RootedTree> {
        let n = parent.len();
        if root >= n || parent[root] != root {
            return Err(Error::Invalid("root must be its own parent".into()));
        }
        let mut children = vec![Vec::new(); n];
        for (v, &p) in parent.iter().enumerate() {
            if p >= n {
                return Err(Error::Invalid(format!("parent of {v} out of range")));
            }
            if v != root {
                if p == v {
                    return Err(Error::Invalid(format!("vertex {v} is a second root")));
                }
                children[p].push(v);
            }
        }
        for c in &mut children {
            c.sort_unstable();
        }
        let t = RootedTree { root, parent, children };
        let mut seen = 0;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            seen += 1;
            stack.extend_from_slice(&t.children[u]);
        }
        if seen != n {
            return Err(Error::Invalid("parent array contains a cycle".into()));
        }
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v != self.root).then_some(self.parent[v])
    }

    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.children[v].is_empty()
    }

    /// Vertices in breadth-first order from the root.
    pub fn bfs_order(&self) -> Vec<usize> {
        let mut order = vec![self.root];
        let mut i = 0;
        while i < order.len() {
            let u = order[i];
            order.extend_from_slice(&self.children[u]);
            i += 1;
        }
        order
    }

    /// Distance of every vertex from the root.
    pub fn levels(&self) -> Vec<usize> {
        let mut lvl = vec![0; self.n()];
        for v in self.bfs_order() {
            if v != self.root {
                lvl[v] = lvl[self.parent[v]] + 1;
            }
        }
        lvl
    }

    pub fn height(&self) -> usize {
        self.levels().into_iter().max().unwrap_or(0)
    }

    pub fn to_graph(&self) -> Graph {
        Graph::new(
            self.n(),
            (0..self.n()).filter(|&v| v != self.root).map(|v| (self.parent[v], v)),
        )
        .expect("a valid rooted tree is a simple graph")
    }

    /// Vertices from `top` down to its descendant `bottom`, `top` first.
    pub fn path_down(&self, top: usize, bottom: usize) -> Option<Vec<usize>> {
        let mut path = vec![bottom];
        let mut v = bottom;
        while v != top {
            if v == self.root {
                return None;
            }
            v = self.parent[v];
            path.push(v);
        }
        path.reverse();
        Some(path)
    }
}

/// Breadth-first spanning tree, neighbours visited in ascending id order.
pub fn spanning_tree(g: &Graph, root: usize) -> Result<RootedTree> {
    if root >= g.n() {
        return Err(Error::Invalid(format!("root {root} is not a vertex")));
    }
    let mut parent = vec![usize::MAX; g.n()];
    parent[root] = root;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &w in g.neighbors(u) {
            if parent[w] == usize::MAX {
                parent[w] = u;
                queue.push_back(w);
            }
        }
    }
    if let Some(vertex) = parent.iter().position(|&p| p == usize::MAX) {
        return Err(Error::Disconnected { vertex });
    }
    RootedTree::from_parents(root, parent)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthMode {
    Exact,
    Heuristic,
}

/// One leaf-path selection: the component rooted at `root` is cut along `root..leaf`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathChoice {
    pub root: usize,
    pub leaf: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DepthAssignment {
    pub root: usize,
    pub labels: Vec<usize>,
    pub depth: usize,
    pub choice_trace: Vec<PathChoice>,
    /// The selected paths, component root first, in trace order.
    pub paths: Vec<Vec<usize>>,
    pub mode: DepthMode,
}

pub const DEFAULT_DEPTH_BUDGET: usize = 1_000_000;

pub fn depth(tree: &RootedTree, mode: DepthMode) -> Result<DepthAssignment> {
    depth_with_budget(tree, mode, DEFAULT_DEPTH_BUDGET)
}

/// Runs the recursive labelling. Exact mode minimises the maximum label over every
/// sequence of leaf-path choices; `budget` caps the number of (component, leaf) states
/// the exact search may expand.
pub fn depth_with_budget(tree: &RootedTree, mode: DepthMode, budget: usize) -> Result<DepthAssignment> {
    let best_leaf = match mode {
        DepthMode::Exact => exact_choices(tree, budget)?,
        DepthMode::Heuristic => deepest_leaves(tree),
    };
    let (labels, choice_trace, paths) = run(tree, |r| Ok(best_leaf[r]))?;
    Ok(assemble(tree, labels, choice_trace, paths, mode))
}

/// Re-runs the labelling with the recorded choices.
pub fn replay(tree: &RootedTree, trace: &[PathChoice], mode: DepthMode) -> Result<DepthAssignment> {
    let mut it = trace.iter();
    let (labels, choice_trace, paths) = run(tree, |r| match it.next() {
        Some(c) if c.root == r => Ok(c.leaf),
        Some(c) => Err(Error::Invalid(format!(
            "trace expects a choice at component {} but the run is at {r}",
            c.root
        ))),
        None => Err(Error::Invalid("trace is shorter than the run".into())),
    })?;
    if it.next().is_some() {
        return Err(Error::Invalid("trace is longer than the run".into()));
    }
    Ok(assemble(tree, labels, choice_trace, paths, mode))
}

fn assemble(
    tree: &RootedTree,
    labels: Vec<usize>,
    choice_trace: Vec<PathChoice>,
    paths: Vec<Vec<usize>>,
    mode: DepthMode,
) -> DepthAssignment {
    DepthAssignment {
        root: tree.root(),
        depth: labels.iter().copied().max().unwrap_or(0),
        labels,
        choice_trace,
        paths,
        mode,
    }
}

type RunOutput = (Vec<usize>, Vec<PathChoice>, Vec<Vec<usize>>);

/// Level-synchronous execution: every component alive at one recursion level shares
/// the counter, roots get the even label `2L` and the cut path plus the root's
/// children get `2L + 1`.
fn run(tree: &RootedTree, mut choose: impl FnMut(usize) -> Result<usize>) -> Result<RunOutput> {
    let mut labels = vec![0; tree.n()];
    let mut trace = Vec::new();
    let mut paths = Vec::new();
    let mut comps = vec![tree.root()];
    let mut d = 0;
    while !comps.is_empty() {
        for &r in &comps {
            labels[r] = d;
        }
        d += 1;
        let mut next = Vec::new();
        for &r in &comps {
            if tree.is_leaf(r) {
                continue;
            }
            let leaf = choose(r)?;
            if !tree.is_leaf(leaf) {
                return Err(Error::Invalid(format!("choice {leaf} is not a leaf")));
            }
            let path = tree
                .path_down(r, leaf)
                .ok_or_else(|| Error::Invalid(format!("leaf {leaf} is not below {r}")))?;
            for &v in &path[1..] {
                labels[v] = d;
            }
            for &c in tree.children(r) {
                labels[c] = d;
                if c != path[1] {
                    next.extend_from_slice(tree.children(c));
                }
            }
            for w in path[1..].windows(2) {
                next.extend(tree.children(w[0]).iter().filter(|&&c| c != w[1]));
            }
            trace.push(PathChoice { root: r, leaf });
            paths.push(path);
        }
        d += 1;
        next.sort_unstable();
        comps = next;
    }
    Ok((labels, trace, paths))
}

/// Deepest leaf below every vertex, smallest id on ties.
fn deepest_leaves(tree: &RootedTree) -> Vec<usize> {
    let lvl = tree.levels();
    let mut best: Vec<usize> = (0..tree.n()).collect();
    for &v in tree.bfs_order().iter().rev() {
        for &c in tree.children(v) {
            let cand = best[c];
            let cur = best[v];
            if cur == v || (lvl[cand], std::cmp::Reverse(cand)) > (lvl[cur], std::cmp::Reverse(cur)) {
                best[v] = cand;
            }
        }
    }
    best
}

/// Memoised minimisation. Residual pieces are always complete subtrees, so the table
/// is keyed by the subtree root.
fn exact_choices(tree: &RootedTree, budget: usize) -> Result<Vec<usize>> {
    let n = tree.n();
    let mut value = vec![0usize; n];
    let mut choice: Vec<usize> = (0..n).collect();
    let mut leaves: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut states = 0usize;
    for &v in tree.bfs_order().iter().rev() {
        if tree.is_leaf(v) {
            leaves[v] = vec![v];
            continue;
        }
        let mut below: Vec<usize> = tree.children(v).iter().flat_map(|&c| leaves[c].iter().copied()).collect();
        below.sort_unstable();
        states += below.len();
        if states > budget {
            return Err(Error::Budget(format!(
                "exact depth needs more than {budget} states; use heuristic mode"
            )));
        }
        let mut best = (usize::MAX, usize::MAX);
        for &leaf in &below {
            let path = tree.path_down(v, leaf).expect("leaf below v");
            let mut worst = 0usize;
            let mut any = false;
            for &c in tree.children(v) {
                if c != path[1] {
                    for &g in tree.children(c) {
                        worst = worst.max(value[g]);
                        any = true;
                    }
                }
            }
            for w in path[1..].windows(2) {
                for &c in tree.children(w[0]) {
                    if c != w[1] {
                        worst = worst.max(value[c]);
                        any = true;
                    }
                }
            }
            let val = if any { 2 + worst } else { 1 };
            if (val, leaf) < best {
                best = (val, leaf);
            }
        }
        value[v] = best.0;
        choice[v] = best.1;
        leaves[v] = below;
    }
    Ok(choice)
}

/// `(2 / ln 2) ln(n + 1) - 1`.
pub fn depth_upper_bound(n: usize) -> f64 {
    2.0 / std::f64::consts::LN_2 * ((n + 1) as f64).ln() - 1.0
}

/// A rooted tree in the compression/flattening pipeline. Level 0 is the compressed
/// spanning tree; level `i` is the result of `i` flattening steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressedTree {
    pub graph: Graph,
    pub root: usize,
    pub level: usize,
    /// Level 0: the compressed paths, component root first. Level `i >= 1`: the
    /// neighbourhoods `[v, v1, .., v_{c-1}]` rewired into paths at step `i`.
    pub path_registry: Vec<Vec<Vec<usize>>>,
    /// Current lowest layer, left to right; chosen on the first flattening step.
    pub line: Option<Vec<usize>>,
}

/// Rewires each selected path `r, p1, .., pk` into the star `r - p_i`.
pub fn compress(tree: &RootedTree, da: &DepthAssignment) -> Result<CompressedTree> {
    if da.labels.len() != tree.n() || da.root != tree.root() {
        return Err(Error::Invalid("depth assignment does not belong to this tree".into()));
    }
    let check = replay(tree, &da.choice_trace, da.mode)?;
    if check.labels != da.labels || check.paths != da.paths {
        return Err(Error::Invalid("depth assignment is not reproduced by its choice trace".into()));
    }
    let mut new_parent = tree.parents().to_vec();
    for path in &da.paths {
        for &v in &path[1..] {
            new_parent[v] = path[0];
        }
    }
    let graph = Graph::new(
        tree.n(),
        (0..tree.n()).filter(|&v| v != tree.root()).map(|v| (new_parent[v], v)),
    )?;
    Ok(CompressedTree {
        graph,
        root: tree.root(),
        level: 0,
        path_registry: vec![da.paths.clone()],
        line: None,
    })
}

impl CompressedTree {
    /// Treats an arbitrary tree as a level-0 compressed tree.
    pub fn from_tree(graph: Graph, root: usize) -> Result<CompressedTree> {
        if !graph.is_tree() {
            return Err(Error::Invalid("compressed trees must be trees".into()));
        }
        if root >= graph.n() {
            return Err(Error::Invalid(format!("root {root} is not a vertex")));
        }
        Ok(CompressedTree { graph, root, level: 0, path_registry: vec![Vec::new()], line: None })
    }

    pub fn height(&self) -> usize {
        self.graph.bfs_distances(self.root).into_iter().max().unwrap_or(0)
    }

    /// The current lowest layer (chosen deterministically if not yet fixed).
    pub fn lowest_layer(&self) -> Vec<usize> {
        self.line.clone().unwrap_or_else(|| initial_line(&self.graph, self.root))
    }
}

/// Leaf-to-leaf path through the root following the two deepest branches
/// (ties by smallest leaf id). A root with a single branch starts the line.
fn initial_line(g: &Graph, root: usize) -> Vec<usize> {
    let tree = spanning_tree(g, root).expect("compressed trees are connected");
    let lvl = tree.levels();
    let deepest = deepest_leaves(&tree);
    let mut branches: Vec<(usize, usize)> = tree
        .children(root)
        .iter()
        .map(|&c| (deepest[c], lvl[deepest[c]]))
        .collect();
    branches.sort_by_key(|&(leaf, depth)| (std::cmp::Reverse(depth), leaf));
    match branches.len() {
        0 => vec![root],
        1 => tree.path_down(root, branches[0].0).expect("leaf below root"),
        _ => {
            let mut left = tree.path_down(root, branches[0].0).expect("leaf below root");
            left.reverse();
            let right = tree.path_down(root, branches[1].0).expect("leaf below root");
            left.extend_from_slice(&right[1..]);
            left
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flattened {
    pub tree: CompressedTree,
    /// True when the input was already a path and nothing changed.
    pub noop: bool,
}

/// One flattening step: every lowest-layer vertex `v` with off-layer neighbours
/// `x1 < .. < xm` and left neighbour `L` has its star `{v-L, v-x_i}` rewired into the
/// path `v - x1 - .. - xm - L`, so the layer reads `.., L, xm, .., x1, v, R, ..`.
pub fn flatten_step(ct: &CompressedTree) -> Result<Flattened> {
    let g = &ct.graph;
    let line = ct.lowest_layer();
    let mut on_line = vec![false; g.n()];
    for &v in &line {
        on_line[v] = true;
    }
    let mut edges: BTreeSet<(usize, usize)> = g.edges().iter().copied().collect();
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut new_line: Vec<usize> = Vec::with_capacity(g.n());
    let mut stars = Vec::new();
    for (idx, &v) in line.iter().enumerate() {
        let xs: Vec<usize> = g.neighbors(v).iter().copied().filter(|&w| !on_line[w]).collect();
        if xs.is_empty() {
            new_line.push(v);
            continue;
        }
        let (anchor, insert_left) = match new_line.last() {
            Some(&l) => (l, true),
            None => match line.get(idx + 1) {
                Some(&r) => (r, false),
                None => return Err(Error::Invalid("isolated lowest layer with branches".into())),
            },
        };
        edges.remove(&key(v, anchor));
        for &x in &xs {
            edges.remove(&key(v, x));
        }
        let mut chain = vec![v];
        chain.extend_from_slice(&xs);
        chain.push(anchor);
        for w in chain.windows(2) {
            edges.insert(key(w[0], w[1]));
        }
        if insert_left {
            new_line.extend(xs.iter().rev());
            new_line.push(v);
        } else {
            new_line.push(v);
            new_line.extend_from_slice(&xs);
        }
        stars.push(chain);
    }
    let noop = stars.is_empty();
    let graph = Graph::new(g.n(), edges)?;
    let mut path_registry = ct.path_registry.clone();
    path_registry.push(stars);
    Ok(Flattened {
        tree: CompressedTree {
            graph,
            root: ct.root,
            level: ct.level + 1,
            path_registry,
            line: Some(new_line),
        },
        noop,
    })
}

#[derive(Clone, Debug)]
pub struct FlattenTrace {
    /// `steps[i]` is the tree after `i + 1` flattening steps.
    pub steps: Vec<CompressedTree>,
    /// Number of steps that changed the graph.
    pub effective: usize,
}

/// Applies exactly `height(ct)` flattening steps and checks the result is a path.
pub fn flatten_all(ct: &CompressedTree) -> Result<FlattenTrace> {
    let iterations = ct.height();
    let mut cur = ct.clone();
    let mut steps = Vec::with_capacity(iterations);
    let mut effective = 0;
    for _ in 0..iterations {
        let f = flatten_step(&cur)?;
        if !f.noop {
            effective += 1;
        }
        cur = f.tree;
        steps.push(cur.clone());
    }
    let line_ok = cur.lowest_layer().len() == cur.graph.n();
    if !(cur.graph.is_path_graph() && line_ok) {
        return Err(Error::Invalid(format!(
            "{iterations} flattening steps did not produce a path"
        )));
    }
    Ok(FlattenTrace { steps, effective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators() {
        let s = Graph::star(4).unwrap();
        assert_eq!(s.edges(), &[(0, 3), (1, 3), (2, 3)]);
        let c = Graph::complete(3).unwrap();
        assert_eq!(c.edges(), &[(0, 1), (0, 2), (1, 2)]);
        let y = Graph::y(5, 5, 5).unwrap();
        assert_eq!(y.n(), 16);
        assert_eq!(y.degree(0), 3);
        assert_eq!(y.bfs_distances(0).into_iter().max(), Some(5));
        assert_eq!(Graph::grid(3, 3).unwrap().edge_count(), 12);
        assert!(matches!(Graph::path(1), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn edge_list_parsing() {
        let g = Graph::from_edge_list("# square\n0 1\n1 2\n\n2 3\n3 0\n").unwrap();
        assert_eq!(g.edge_count(), 4);
        assert!(matches!(Graph::from_edge_list("0 1\n1 x\n"), Err(Error::Parse(_))));
        assert!(matches!(Graph::from_edge_list("0 1 2\n"), Err(Error::Parse(_))));
        assert!(matches!(Graph::from_edge_list("0 1\n2 3\n"), Err(Error::Disconnected { .. })));
        assert!(matches!(Graph::from_edge_list("0 2\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["star:5", "path:8", "complete:4", "grid:3x3", "y:5,5,5"] {
            let k: GraphKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
            generate(&k).unwrap();
        }
        assert!("ring:4".parse::<GraphKind>().is_err());
        assert!("grid:3".parse::<GraphKind>().is_err());
    }

    #[test]
    fn bfs_spanning_trees() {
        let t = spanning_tree(&Graph::complete(3).unwrap(), 0).unwrap();
        assert_eq!(t.parents(), &[0, 0, 0]);
        let p = Graph::path(5).unwrap();
        assert_eq!(spanning_tree(&p, 0).unwrap().to_graph(), p);
        let sq = spanning_tree(&Graph::grid(2, 2).unwrap(), 0).unwrap();
        assert_eq!(sq.to_graph().edge_count(), 3);
        assert_eq!(sq.parents(), &[0, 0, 0, 1]);
        let split = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(spanning_tree(&split, 0), Err(Error::Disconnected { vertex: 2 }));
    }

    #[test]
    fn depth_examples() {
        let y = Graph::y(5, 5, 5).unwrap();
        let t = spanning_tree(&y, 0).unwrap();
        assert_eq!(depth(&t, DepthMode::Exact).unwrap().depth, 3);
        assert_eq!(t.height(), 5);

        let p = spanning_tree(&Graph::path(8).unwrap(), 0).unwrap();
        let da = depth(&p, DepthMode::Exact).unwrap();
        assert_eq!(da.depth, 1);
        assert_eq!(da.labels, vec![0, 1, 1, 1, 1, 1, 1, 1]);

        let s = spanning_tree(&Graph::star(5).unwrap(), 4).unwrap();
        assert_eq!(depth(&s, DepthMode::Exact).unwrap().depth, 1);
    }

    #[test]
    fn depth_budget_is_enforced() {
        let t = spanning_tree(&Graph::y(5, 5, 5).unwrap(), 0).unwrap();
        assert!(matches!(depth_with_budget(&t, DepthMode::Exact, 3), Err(Error::Budget(_))));
    }

    #[test]
    fn trace_replays() {
        let y = Graph::y(3, 4, 2).unwrap();
        let t = spanning_tree(&y, 0).unwrap();
        for mode in [DepthMode::Exact, DepthMode::Heuristic] {
            let da = depth(&t, mode).unwrap();
            assert_eq!(replay(&t, &da.choice_trace, mode).unwrap(), da);
        }
        assert!(replay(&t, &[], DepthMode::Exact).is_err());
    }

    #[test]
    fn compression_examples() {
        let p = spanning_tree(&Graph::path(8).unwrap(), 0).unwrap();
        let ct = compress(&p, &depth(&p, DepthMode::Exact).unwrap()).unwrap();
        assert!(ct.graph.edges().iter().all(|&(u, _)| u == 0));
        assert_eq!(ct.graph.degree(0), 7);

        let s = spanning_tree(&Graph::star(5).unwrap(), 4).unwrap();
        let ct = compress(&s, &depth(&s, DepthMode::Exact).unwrap()).unwrap();
        assert_eq!(ct.graph, Graph::star(5).unwrap());

        let y = spanning_tree(&Graph::y(5, 5, 5).unwrap(), 0).unwrap();
        let da = depth(&y, DepthMode::Exact).unwrap();
        let ct = compress(&y, &da).unwrap();
        assert!(ct.graph.is_tree());
        assert_eq!(ct.height(), 3);
        let mut degs: Vec<usize> = (0..16).map(|v| ct.graph.degree(v)).collect();
        degs.sort_unstable();
        assert_eq!(degs, [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 4, 4, 7]);
    }

    #[test]
    fn compress_rejects_foreign_assignment() {
        let a = spanning_tree(&Graph::path(5).unwrap(), 0).unwrap();
        let b = spanning_tree(&Graph::star(5).unwrap(), 0).unwrap();
        let da = depth(&a, DepthMode::Exact).unwrap();
        assert!(compress(&b, &da).is_err());
    }

    #[test]
    fn flatten_examples() {
        let star = CompressedTree::from_tree(Graph::star(5).unwrap(), 4).unwrap();
        let f = flatten_step(&star).unwrap();
        assert!(!f.noop);
        assert!(f.tree.graph.is_path_graph());

        let p = CompressedTree::from_tree(Graph::path(6).unwrap(), 0).unwrap();
        let f = flatten_step(&p).unwrap();
        assert!(f.noop);
        assert_eq!(f.tree.graph, Graph::path(6).unwrap());

        let y = spanning_tree(&Graph::y(5, 5, 5).unwrap(), 0).unwrap();
        let ct = compress(&y, &depth(&y, DepthMode::Exact).unwrap()).unwrap();
        let trace = flatten_all(&ct).unwrap();
        assert_eq!(trace.steps.len(), 3);
        assert!(trace.steps[2].graph.is_path_graph());
        assert_eq!(trace.steps[2].graph.n(), 16);
    }

    #[test]
    fn flatten_records_neighbourhoods() {
        let star = CompressedTree::from_tree(Graph::star(5).unwrap(), 4).unwrap();
        let f = flatten_step(&star).unwrap();
        assert_eq!(f.tree.path_registry[1], vec![vec![4, 2, 3, 0]]);
        assert_eq!(f.tree.line, Some(vec![0, 3, 2, 4, 1]));
    }

    #[test]
    fn depth_upper_bound_values() {
        assert!((depth_upper_bound(7) - 5.0).abs() < 1e-12);
        assert!((depth_upper_bound(3) - 3.0).abs() < 1e-12);
        assert!((depth_upper_bound(16) - 7.1749).abs() < 1e-3);
    }

    #[test]
    fn random_trees_are_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..30 {
            assert!(random_tree(n, &mut rng).unwrap().is_tree());
        }
    }
}
