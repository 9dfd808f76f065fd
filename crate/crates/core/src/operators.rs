//! Matrix-free operators on `n` sites of local dimension `D`: Hamiltonians
//! `H = Σ_e (I - P_e)`, moment operators `M = Σ_e P_e`, site permutations and
//! ordered products of edge projectors.
//!
//! A state is a real vector of length `D^n` with site 0 the most significant digit.
//! Every operator here is real; the doubled Hilbert space never needs complex storage
//! because the Haar projector and all permutation states are real.

use crate::error::{checked_dim, Error, Result};
use crate::graph::{CompressedTree, DepthAssignment, Graph, RootedTree};
use crate::permsym::{check_k, check_q, HaarProjector};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

/// Default dimension guard for full-space operators.
pub const FULL_GUARD: u128 = 1 << 22;

const MIN_BLOCKS_PER_TASK: usize = 64;

pub type Edge = (usize, usize);

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn hermitian(&self) -> bool {
        true
    }
    /// An upper bound on the operator norm, if cheaply known.
    fn norm_bound(&self) -> Option<f64> {
        None
    }
    fn describe(&self) -> String;
}

/// Two-site projector `P = Σ_{στ} W[σ][τ] (u_σ ⊗ u_σ)(u_τ ⊗ u_τ)^T`.
#[derive(Clone, Debug)]
pub struct LocalProjector {
    site_dim: usize,
    factors: SiteFactors,
    w: DMatrix<f64>,
}

#[derive(Clone, Debug)]
enum SiteFactors {
    /// `u_σ` is the indicator of a support set.
    Indicator(Vec<Vec<u32>>),
    /// Dense `u_σ`.
    Dense(Vec<Vec<f64>>),
}

impl LocalProjector {
    pub fn haar(p: &HaarProjector) -> LocalProjector {
        LocalProjector {
            site_dim: p.site_dim(),
            factors: SiteFactors::Indicator(p.supports().to_vec()),
            w: p.weingarten().clone(),
        }
    }

    pub fn dense(site_dim: usize, vectors: Vec<Vec<f64>>, w: DMatrix<f64>) -> Result<LocalProjector> {
        if vectors.iter().any(|v| v.len() != site_dim) || w.nrows() != vectors.len() || w.ncols() != vectors.len() {
            return Err(Error::Invalid("inconsistent local projector factors".into()));
        }
        Ok(LocalProjector { site_dim, factors: SiteFactors::Dense(vectors), w })
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    fn terms(&self) -> usize {
        self.w.nrows()
    }

    /// Dense `D^2 x D^2` matrix of `P`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.site_dim;
        let m = self.terms();
        let mut v = DMatrix::zeros(d * d, m);
        for s in 0..m {
            match &self.factors {
                SiteFactors::Indicator(sup) => {
                    for &a in &sup[s] {
                        for &b in &sup[s] {
                            v[(a as usize * d + b as usize, s)] = 1.0;
                        }
                    }
                }
                SiteFactors::Dense(u) => {
                    for a in 0..d {
                        for b in 0..d {
                            v[(a * d + b, s)] = u[s][a] * u[s][b];
                        }
                    }
                }
            }
        }
        &v * &self.w * v.transpose()
    }

    fn kernel(&self, si: usize, sj: usize) -> EdgeKernel<'_> {
        let (oi, oj) = match &self.factors {
            SiteFactors::Indicator(sup) => (
                sup.iter().map(|s| s.iter().map(|&a| a as usize * si).collect()).collect(),
                sup.iter().map(|s| s.iter().map(|&b| b as usize * sj).collect()).collect(),
            ),
            SiteFactors::Dense(_) => (
                vec![(0..self.site_dim).map(|a| a * si).collect()],
                vec![(0..self.site_dim).map(|b| b * sj).collect()],
            ),
        };
        EdgeKernel { local: self, oi, oj, stride_i: si, stride_j: sj }
    }
}

/// Per-edge offsets for one local projector.
struct EdgeKernel<'a> {
    local: &'a LocalProjector,
    oi: Vec<Vec<usize>>,
    oj: Vec<Vec<usize>>,
    stride_i: usize,
    stride_j: usize,
}

struct Scratch {
    block: Vec<f64>,
    c: Vec<f64>,
    z: Vec<f64>,
}

impl EdgeKernel<'_> {
    fn scratch(&self) -> Scratch {
        let d = self.local.site_dim;
        let m = self.local.terms();
        Scratch { block: vec![0.0; d * d], c: vec![0.0; m], z: vec![0.0; m] }
    }

    /// Computes the coefficients `z = W (overlaps)` for the block at `base`.
    fn coefficients(&self, x: impl Fn(usize) -> f64, base: usize, s: &mut Scratch) {
        let m = self.local.terms();
        match &self.local.factors {
            SiteFactors::Indicator(_) => {
                for t in 0..m {
                    let mut acc = 0.0;
                    for &a in &self.oi[t] {
                        let row = base + a;
                        for &b in &self.oj[t] {
                            acc += x(row + b);
                        }
                    }
                    s.c[t] = acc;
                }
            }
            SiteFactors::Dense(u) => {
                let d = self.local.site_dim;
                for (a, &oa) in self.oi[0].iter().enumerate() {
                    for (b, &ob) in self.oj[0].iter().enumerate() {
                        s.block[a * d + b] = x(base + oa + ob);
                    }
                }
                for (t, ut) in u.iter().enumerate().take(m) {
                    let mut acc = 0.0;
                    for a in 0..d {
                        if ut[a] != 0.0 {
                            let row = &s.block[a * d..(a + 1) * d];
                            acc += ut[a] * row.iter().zip(ut).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                    s.c[t] = acc;
                }
            }
        }
        for t in 0..m {
            s.z[t] = (0..m).map(|r| self.local.w[(t, r)] * s.c[r]).sum();
        }
    }

    /// Calls `sink(index, value)` for the nonzero entries of `P x` on the block.
    fn scatter(&self, base: usize, s: &Scratch, mut sink: impl FnMut(usize, f64)) {
        match &self.local.factors {
            SiteFactors::Indicator(_) => {
                for (t, &zt) in s.z.iter().enumerate() {
                    for &a in &self.oi[t] {
                        for &b in &self.oj[t] {
                            sink(base + a + b, zt);
                        }
                    }
                }
            }
            SiteFactors::Dense(u) => {
                for (a, &oa) in self.oi[0].iter().enumerate() {
                    for (b, &ob) in self.oj[0].iter().enumerate() {
                        let v: f64 = s.z.iter().zip(u).map(|(&zt, ut)| zt * ut[a] * ut[b]).sum();
                        sink(base + oa + ob, v);
                    }
                }
            }
        }
    }

    fn block_entries(&self, base: usize, mut f: impl FnMut(usize)) {
        let d = self.local.site_dim;
        for a in 0..d {
            for b in 0..d {
                f(base + a * self.stride_i + b * self.stride_j);
            }
        }
    }
}

/// Raw pointer used for disjoint parallel writes.
#[derive(Clone, Copy)]
struct SharedSlice {
    ptr: *mut f64,
}

// SAFETY: callers only write to index sets that are disjoint across tasks.
unsafe impl Send for SharedSlice {}
unsafe impl Sync for SharedSlice {}

impl SharedSlice {
    fn new(y: &mut [f64]) -> SharedSlice {
        SharedSlice { ptr: y.as_mut_ptr() }
    }

    /// # Safety
    /// `i` must be in bounds and not written concurrently by another task.
    unsafe fn add(self, i: usize, v: f64) {
        *self.ptr.add(i) += v;
    }

    /// # Safety
    /// As for [`SharedSlice::add`].
    unsafe fn get(self, i: usize) -> f64 {
        *self.ptr.add(i)
    }

    /// # Safety
    /// As for [`SharedSlice::add`].
    unsafe fn set(self, i: usize, v: f64) {
        *self.ptr.add(i) = v;
    }
}

/// Index arithmetic for the blocks of one edge: every index whose digits at sites
/// `i` and `j` are zero.
#[derive(Clone, Copy, Debug)]
struct Blocks {
    count: usize,
    small: usize,
    mid: usize,
    big_span: usize,
    small_span: usize,
}

impl Blocks {
    fn new(n: usize, d: usize, i: usize, j: usize) -> Blocks {
        let stride = |v: usize| d.pow((n - 1 - v) as u32);
        let (big, small) = (stride(i.min(j)), stride(i.max(j)));
        Blocks {
            count: d.pow(n as u32 - 2),
            small,
            mid: big / (small * d),
            big_span: big * d,
            small_span: small * d,
        }
    }

    fn base(&self, t: usize) -> usize {
        let low = t % self.small;
        let t2 = t / self.small;
        (t2 / self.mid) * self.big_span + (t2 % self.mid) * self.small_span + low
    }
}

/// Shared geometry of `n` sites carrying a local projector.
#[derive(Clone, Debug)]
pub struct SiteSpace {
    n: usize,
    dim: usize,
    local: Arc<LocalProjector>,
}

impl SiteSpace {
    pub fn new(n: usize, local: Arc<LocalProjector>, limit: u128) -> Result<SiteSpace> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("need at least 2 sites, got {n}")));
        }
        let dim = checked_dim(local.site_dim(), n, limit)?;
        Ok(SiteSpace { n, dim, local })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn site_dim(&self) -> usize {
        self.local.site_dim()
    }

    pub fn local(&self) -> &LocalProjector {
        &self.local
    }

    fn stride(&self, v: usize) -> usize {
        self.site_dim().pow((self.n - 1 - v) as u32)
    }

    fn check_edge(&self, (i, j): Edge) -> Result<()> {
        if i == j || i >= self.n || j >= self.n {
            Err(Error::Invalid(format!("({i},{j}) is not a pair of distinct sites")))
        } else {
            Ok(())
        }
    }

    fn kernel(&self, (i, j): Edge) -> (EdgeKernel<'_>, Blocks) {
        (self.local.kernel(self.stride(i), self.stride(j)), Blocks::new(self.n, self.site_dim(), i, j))
    }

    /// `y += sign * P_e x`.
    fn accumulate(&self, e: Edge, x: &[f64], y: &mut [f64], sign: f64) {
        let (kernel, blocks) = self.kernel(e);
        let out = SharedSlice::new(y);
        (0..blocks.count)
            .into_par_iter()
            .with_min_len(MIN_BLOCKS_PER_TASK)
            .for_each_init(
                || kernel.scratch(),
                |s, t| {
                    let base = blocks.base(t);
                    kernel.coefficients(|i| x[i], base, s);
                    // SAFETY: blocks of one edge partition the index space.
                    kernel.scatter(base, s, |i, v| unsafe { out.add(i, sign * v) });
                },
            );
    }

    /// `x <- P_e x`.
    pub fn project_in_place(&self, e: Edge, x: &mut [f64]) {
        let (kernel, blocks) = self.kernel(e);
        let buf = SharedSlice::new(x);
        (0..blocks.count)
            .into_par_iter()
            .with_min_len(MIN_BLOCKS_PER_TASK)
            .for_each_init(
                || kernel.scratch(),
                |s, t| {
                    let base = blocks.base(t);
                    // SAFETY: each task reads and then rewrites only its own block.
                    kernel.coefficients(|i| unsafe { buf.get(i) }, base, s);
                    kernel.block_entries(base, |i| unsafe { buf.set(i, 0.0) });
                    kernel.scatter(base, s, |i, v| unsafe { buf.add(i, v) });
                },
            );
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermMode {
    /// `Σ_e (I - P_e)`.
    Hamiltonian,
    /// `Σ_e P_e`.
    Moment,
}

/// `H(G)` or `M(G)` as a sum of edge terms, applied in ascending edge order.
#[derive(Clone, Debug)]
pub struct SiteHamiltonian {
    space: SiteSpace,
    edges: Vec<Edge>,
    mode: TermMode,
    label: String,
}

impl SiteHamiltonian {
    pub fn new(space: SiteSpace, g: &Graph, mode: TermMode, label: impl Into<String>) -> Result<SiteHamiltonian> {
        g.check_connected()?;
        if g.n() != space.n() {
            return Err(Error::Invalid("graph and site space disagree on n".into()));
        }
        Ok(SiteHamiltonian { space, edges: g.edges().to_vec(), mode, label: label.into() })
    }

    /// `H(G, n, k)` on the full `q^{2nk}`-dimensional space.
    pub fn full(g: &Graph, k: usize, q: usize) -> Result<SiteHamiltonian> {
        SiteHamiltonian::full_with_limit(g, k, q, FULL_GUARD, TermMode::Hamiltonian)
    }

    pub fn full_with_limit(g: &Graph, k: usize, q: usize, limit: u128, mode: TermMode) -> Result<SiteHamiltonian> {
        check_k(k)?;
        check_q(q)?;
        g.check_connected()?;
        checked_dim(q, 2 * k * g.n(), limit)?;
        let local = Arc::new(LocalProjector::haar(&HaarProjector::factored(k, q)?));
        let space = SiteSpace::new(g.n(), local, limit)?;
        SiteHamiltonian::new(space, g, mode, format!("full k={k} q={q}"))
    }

    pub fn space(&self) -> &SiteSpace {
        &self.space
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn mode(&self) -> TermMode {
        self.mode
    }

    pub fn with_mode(&self, mode: TermMode) -> SiteHamiltonian {
        SiteHamiltonian { mode, ..self.clone() }
    }

    /// The single edge projector `P_e` (the local term `m_e`).
    pub fn projector(&self, e: Edge) -> Result<ProjectorProduct> {
        ProjectorProduct::new(self.space.clone(), vec![e])
    }
}

impl LinearOperator for SiteHamiltonian {
    fn dim(&self) -> usize {
        self.space.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self.mode {
            TermMode::Hamiltonian => {
                let ne = self.edges.len() as f64;
                y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi = ne * xi);
                for &e in &self.edges {
                    self.space.accumulate(e, x, y, -1.0);
                }
            }
            TermMode::Moment => {
                y.par_iter_mut().for_each(|v| *v = 0.0);
                for &e in &self.edges {
                    self.space.accumulate(e, x, y, 1.0);
                }
            }
        }
    }

    fn norm_bound(&self) -> Option<f64> {
        Some(self.edges.len() as f64)
    }

    fn describe(&self) -> String {
        let what = match self.mode {
            TermMode::Hamiltonian => "H",
            TermMode::Moment => "M",
        };
        format!("{what} ({}) on {} sites, {} edges, dim {}", self.label, self.space.n(), self.edges.len(), self.dim())
    }
}

/// `P_{e_1} P_{e_2} ... P_{e_L}`; the last listed factor acts first.
#[derive(Clone, Debug)]
pub struct ProjectorProduct {
    space: SiteSpace,
    sequence: Vec<Edge>,
}

impl ProjectorProduct {
    pub fn new(space: SiteSpace, sequence: Vec<Edge>) -> Result<ProjectorProduct> {
        for &e in &sequence {
            space.check_edge(e)?;
        }
        Ok(ProjectorProduct { space, sequence })
    }

    pub fn sequence(&self) -> &[Edge] {
        &self.sequence
    }

    /// The product in reverse order, which is the transpose.
    pub fn transpose(&self) -> ProjectorProduct {
        let mut sequence = self.sequence.clone();
        sequence.reverse();
        ProjectorProduct { space: self.space.clone(), sequence }
    }
}

impl LinearOperator for ProjectorProduct {
    fn dim(&self) -> usize {
        self.space.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        for &e in self.sequence.iter().rev() {
            self.space.project_in_place(e, y);
        }
    }

    fn hermitian(&self) -> bool {
        self.sequence.len() <= 1 || self.sequence.iter().eq(self.sequence.iter().rev())
    }

    fn describe(&self) -> String {
        format!("product of {} edge projectors, dim {}", self.sequence.len(), self.dim())
    }
}

fn normalized(e: Edge) -> Edge {
    (e.0.min(e.1), e.0.max(e.1))
}

/// The Detectability-Lemma operator `Π_i P_{π(i)}` for an ordering of the edges of `h`.
pub fn dl_operator(h: &SiteHamiltonian, ordering: &[Edge]) -> Result<ProjectorProduct> {
    let mut sorted: Vec<Edge> = ordering.iter().map(|&e| normalized(e)).collect();
    sorted.sort_unstable();
    if sorted != h.edges() {
        return Err(Error::Invalid("ordering is not a permutation of the edge set".into()));
    }
    ProjectorProduct::new(h.space().clone(), ordering.to_vec())
}

/// Uniformly shuffled edge ordering.
pub fn random_ordering(edges: &[Edge], seed: u64) -> Vec<Edge> {
    let mut out = edges.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

/// Unitary relabelling of sites: the content of site `v` moves to site `map[v]`.
#[derive(Clone, Debug)]
pub struct SitePermutation {
    n: usize,
    site_dim: usize,
    dim: usize,
    map: Vec<usize>,
}

impl SitePermutation {
    pub fn new(n: usize, site_dim: usize, map: Vec<usize>, limit: u128) -> Result<SitePermutation> {
        let mut seen = vec![false; n];
        if map.len() != n {
            return Err(Error::Invalid("site map has the wrong length".into()));
        }
        for &v in &map {
            if v >= n || seen[v] {
                return Err(Error::Invalid(format!("{map:?} is not a permutation of the sites")));
            }
            seen[v] = true;
        }
        let dim = checked_dim(site_dim, n, limit)?;
        Ok(SitePermutation { n, site_dim, dim, map })
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn adjoint(&self) -> SitePermutation {
        let mut inv = vec![0; self.n];
        for (v, &w) in self.map.iter().enumerate() {
            inv[w] = v;
        }
        SitePermutation { map: inv, ..self.clone() }
    }
}

impl LinearOperator for SitePermutation {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (n, d) = (self.n, self.site_dim);
        let strides: Vec<usize> = (0..n).map(|v| d.pow((n - 1 - v) as u32)).collect();
        // Output digit at site map[v] equals input digit at site v.
        let src_stride: Vec<usize> = {
            let mut s = vec![0; n];
            for v in 0..n {
                s[self.map[v]] = strides[v];
            }
            s
        };
        y.par_iter_mut().enumerate().with_min_len(1024).for_each(|(out, yi)| {
            let mut rem = out;
            let mut src = 0;
            for w in 0..n {
                src += (rem / strides[w]) * src_stride[w];
                rem %= strides[w];
            }
            *yi = x[src];
        });
    }

    fn hermitian(&self) -> bool {
        self.map.iter().enumerate().all(|(v, &w)| self.map[w] == v)
    }

    fn describe(&self) -> String {
        format!("site permutation {:?}", self.map)
    }
}

/// `W_P` for the path `v_1 .. v_P`: the content of `v_i` moves to `v_{i+1}` and the
/// content of `v_P` wraps to `v_1`.
pub fn cyclic_permutation(path: &[usize], n: usize, site_dim: usize, limit: u128) -> Result<SitePermutation> {
    let mut seen = vec![false; n];
    for &v in path {
        if v >= n {
            return Err(Error::Invalid(format!("vertex {v} is not a site")));
        }
        if seen[v] {
            return Err(Error::Invalid(format!("vertex {v} repeats in the path")));
        }
        seen[v] = true;
    }
    let mut map: Vec<usize> = (0..n).collect();
    for (i, &v) in path.iter().enumerate() {
        map[v] = path[(i + 1) % path.len()];
    }
    SitePermutation::new(n, site_dim, map, limit)
}

/// `A_1 A_2 ... A_L x`, rightmost first.
pub fn apply_chain(ops: &[&dyn LinearOperator], x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    let mut next = vec![0.0; x.len()];
    for op in ops.iter().rev() {
        op.apply(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// The edge orderings of the Detectability-Lemma operators before and after
/// compression: `others` (edges on no selected path, ascending) followed by each
/// selected path's edges. In the spanning tree a path contributes
/// `(r,p1),(p1,p2),..`; in the compressed tree the star `(r,p1),(r,p2),..`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteOrderings {
    pub spanning: Vec<Edge>,
    pub compressed: Vec<Edge>,
    /// Paths with at least three vertices, whose cyclic permutations relate the two.
    pub paths: Vec<Vec<usize>>,
}

pub fn rewrite_orderings(tree: &RootedTree, da: &DepthAssignment) -> RewriteOrderings {
    let mut on_path = std::collections::BTreeSet::new();
    let mut st_paths = Vec::new();
    let mut cst_paths = Vec::new();
    let mut paths = Vec::new();
    for p in &da.paths {
        for w in p.windows(2) {
            on_path.insert(normalized((w[0], w[1])));
            st_paths.push(normalized((w[0], w[1])));
        }
        for &v in &p[1..] {
            cst_paths.push(normalized((p[0], v)));
        }
        if p.len() >= 3 {
            paths.push(p.clone());
        }
    }
    let others: Vec<Edge> = tree.to_graph().edges().iter().copied().filter(|e| !on_path.contains(e)).collect();
    RewriteOrderings {
        spanning: others.iter().copied().chain(st_paths).collect(),
        compressed: others.into_iter().chain(cst_paths).collect(),
        paths,
    }
}

/// The interleaved ordering `Π_odd Π_others Π_even` for a compressed tree: the
/// lowest-layer vertices with off-layer neighbours are numbered left to right, each
/// contributes its star `(v,x1),..,(v,xm),(v,L)` (`R` at the left end), odd-numbered
/// stars come first, the remaining edges in ascending order next, even stars last.
pub fn flatten_pipeline_ordering(ct: &CompressedTree) -> Vec<Edge> {
    let g = &ct.graph;
    let line = ct.lowest_layer();
    let mut on_line = vec![false; g.n()];
    for &v in &line {
        on_line[v] = true;
    }
    let mut used = std::collections::BTreeSet::new();
    let mut odd = Vec::new();
    let mut even = Vec::new();
    let mut idx = 0;
    for (pos, &v) in line.iter().enumerate() {
        let xs: Vec<usize> = g.neighbors(v).iter().copied().filter(|&w| !on_line[w]).collect();
        if xs.is_empty() {
            continue;
        }
        let anchor = if pos > 0 { Some(line[pos - 1]) } else { line.get(1).copied() };
        let mut star: Vec<Edge> = xs.iter().map(|&x| normalized((v, x))).collect();
        if let Some(a) = anchor {
            let e = normalized((v, a));
            if !used.contains(&e) {
                star.push(e);
            }
        }
        for &e in &star {
            used.insert(e);
        }
        if idx % 2 == 1 { odd.extend(star) } else { even.extend(star) }
        idx += 1;
    }
    let others: Vec<Edge> = g.edges().iter().copied().filter(|e| !used.contains(e)).collect();
    odd.into_iter().chain(others).chain(even).collect()
}
