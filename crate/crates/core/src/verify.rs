//! Numerical verification suites: operator identities behind compression, the
//! Detectability-Lemma norm rewrite, the DL / quantum-union-bound inequalities and the
//! full-space vs effective-model oracle.

use crate::effective::{assemble_effective, build_k2_model, build_qr_model, effective_ground_states, graph_gap, Representation, EFFECTIVE_GUARD};
use crate::error::{Error, Result};
use crate::graph::{compress, depth, spanning_tree, CompressedTree, DepthMode, Graph, RootedTree};
use crate::operators::{
    apply_chain, cyclic_permutation, dl_operator, flatten_pipeline_ordering, random_ordering, rewrite_orderings, Edge, LinearOperator,
    ProjectorProduct, SiteHamiltonian, TermMode,
};
use crate::report::Check;
use crate::spectra::{self, SolverOptions};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Above this dimension identities are probed with sampled columns and random vectors.
pub const FULL_COLUMN_LIMIT: usize = 4096;

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let n = spectra::norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Max deviation of `lhs x` from `rhs x` over every basis column (small `dim`) or over
/// `probes` sampled columns and `probes` random unit vectors.
pub fn compare_chains(lhs: &[&dyn LinearOperator], rhs: &[&dyn LinearOperator], probes: usize, seed: u64) -> f64 {
    let dim = lhs[0].dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev: f64 = 0.0;
    let mut check = |x: &[f64]| {
        let a = apply_chain(lhs, x);
        let b = apply_chain(rhs, x);
        dev = dev.max(max_abs_diff(&a, &b));
    };
    let mut x = vec![0.0; dim];
    if dim <= FULL_COLUMN_LIMIT {
        for j in 0..dim {
            x[j] = 1.0;
            check(&x);
            x[j] = 0.0;
        }
    } else {
        for _ in 0..probes {
            let j = rng.random_range(0..dim);
            x[j] = 1.0;
            check(&x);
            x[j] = 0.0;
        }
        for _ in 0..probes {
            let v = random_unit(dim, &mut rng);
            check(&v);
        }
    }
    dev
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Identity {
    /// `m12 m23 .. m(P-1,P) = m12 m13 .. m1P W_P`.
    OneDToStar,
    /// `m(v,v1) .. m(v,v_{c-1}) = m(v,v1) m(v1,v2) .. m(v_{c-2},v_{c-1}) W^†`.
    ShiftRight,
    /// `m(v,v1) .. m(v,v_{c-1}) = W^† m(v1,v2) .. m(v_{c-2},v_{c-1}) m(v,v_{c-1})`.
    ShiftLeft,
}

/// Deviation of one compression identity on `p` sites `0..p` in the full space.
pub fn compression_identity(identity: Identity, p: usize, k: usize, q: usize, probes: usize) -> Result<f64> {
    if p < 2 {
        return Err(Error::InvalidSize(format!("need at least 2 sites, got {p}")));
    }
    let limit = 1u128 << 24;
    let h = SiteHamiltonian::full_with_limit(&Graph::path(p)?, k, q, limit, TermMode::Hamiltonian)?;
    let space = h.space().clone();
    let site_dim = space.site_dim();
    let sites: Vec<usize> = (0..p).collect();
    let chain: Vec<Edge> = (0..p - 1).map(|i| (i, i + 1)).collect();
    let star: Vec<Edge> = (1..p).map(|i| (0, i)).collect();
    let w = cyclic_permutation(&sites, p, site_dim, limit)?;
    let wt = w.adjoint();
    let star_op = ProjectorProduct::new(space.clone(), star)?;
    let dev = match identity {
        Identity::OneDToStar => {
            let path_op = ProjectorProduct::new(space, chain)?;
            compare_chains(&[&path_op], &[&star_op, &w], probes, 11)
        }
        Identity::ShiftRight => {
            let path_op = ProjectorProduct::new(space, chain)?;
            compare_chains(&[&star_op], &[&path_op, &wt], probes, 12)
        }
        Identity::ShiftLeft => {
            let mut seq: Vec<Edge> = (1..p - 1).map(|i| (i, i + 1)).collect();
            seq.push((0, p - 1));
            let rhs = ProjectorProduct::new(space, seq)?;
            compare_chains(&[&star_op], &[&wt, &rhs], probes, 13)
        }
    };
    Ok(dev)
}

/// All three identities at `|P| ∈ {3, 4, 5}`, `k = 2`, `q = 2`, plus `k = 1` sanity.
pub fn compression_suite(probes: usize) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for p in [3, 4, 5] {
        for id in [Identity::OneDToStar, Identity::ShiftRight, Identity::ShiftLeft] {
            let dev = compression_identity(id, p, 2, 2, probes)?;
            checks.push(Check::new(format!("{id:?} |P|={p} k=2 q=2"), dev, 1e-12));
        }
    }
    let dev = compression_identity(Identity::OneDToStar, 3, 1, 2, probes)?;
    checks.push(Check::new("OneDToStar |P|=3 k=1 q=2", dev, 1e-12));
    Ok(checks)
}

/// `DL^{ST} x = DL^{CST⁰} (Π W_P) x` for the recorded depth paths of `tree`.
pub fn dl_rewrite_check(tree: &RootedTree, k: usize, q: usize, probes: usize, seed: u64) -> Result<f64> {
    let da = depth(tree, DepthMode::Exact)?;
    let ct = compress(tree, &da)?;
    let orderings = rewrite_orderings(tree, &da);
    let limit = 1u128 << 24;
    let st = SiteHamiltonian::full_with_limit(&tree.to_graph(), k, q, limit, TermMode::Hamiltonian)?;
    let cst = SiteHamiltonian::full_with_limit(&ct.graph, k, q, limit, TermMode::Hamiltonian)?;
    let dl_st = dl_operator(&st, &orderings.spanning)?;
    let dl_cst = dl_operator(&cst, &orderings.compressed)?;
    let ws = orderings
        .paths
        .iter()
        .map(|p| cyclic_permutation(p, tree.n(), st.space().site_dim(), limit))
        .collect::<Result<Vec<_>>>()?;
    let mut rhs: Vec<&dyn LinearOperator> = vec![&dl_cst];
    rhs.extend(ws.iter().map(|w| w as &dyn LinearOperator));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev: f64 = 0.0;
    for _ in 0..probes {
        let x = random_unit(st.dim(), &mut rng);
        let a = apply_chain(&[&dl_st], &x);
        let b = apply_chain(&rhs, &x);
        dev = dev.max((spectra::norm(&a) - spectra::norm(&b)).abs()).max(max_abs_diff(&a, &b));
    }
    Ok(dev)
}

/// Star/path pair (path rooted at an end) and y-graphs with at most six vertices.
pub fn dl_rewrite_suite(probes: usize) -> Result<Vec<Check>> {
    let mut cases: Vec<(String, RootedTree)> = vec![
        ("path(3) from an end".into(), spanning_tree(&Graph::path(3)?, 0)?),
        ("star(3)".into(), spanning_tree(&Graph::star(3)?, 2)?),
        ("path(4) from an end".into(), spanning_tree(&Graph::path(4)?, 0)?),
    ];
    for (a, b, c) in [(1, 1, 1), (1, 1, 2), (1, 2, 2), (1, 1, 3)] {
        cases.push((format!("y({a},{b},{c})"), spanning_tree(&Graph::y(a, b, c)?, 0)?));
    }
    cases
        .into_iter()
        .enumerate()
        .map(|(i, (name, t))| Ok(Check::new(format!("DL rewrite {name}"), dl_rewrite_check(&t, 2, 2, probes, 100 + i as u64)?, 1e-12)))
        .collect()
}

/// `max_{e} |{f ≠ e : f ∩ e ≠ ∅}|`.
pub fn overlap_degree(g: &Graph) -> usize {
    g.edges().iter().map(|&(u, v)| g.degree(u) + g.degree(v) - 2).max().unwrap_or(0)
}

#[derive(Clone, Debug)]
pub struct DlQubReport {
    pub gap: f64,
    pub g: usize,
    /// Largest `||DL ψ||²` over normalised excited states.
    pub dl_max: f64,
    /// Smallest `||DL ψ||²` over normalised excited states.
    pub dl_min: f64,
    /// `||DL ψ||²` on the first excited state.
    pub first_excited: f64,
    /// Smallest slack of `||DL ψ||² - (1 - 4<ψ|H|ψ>)` over random excited probes.
    pub qub_probe_slack: f64,
}

fn dense_excited(h: &dyn LinearOperator, ground: &[Vec<f64>]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let hm = spectra::to_dense(h, spectra::DENSE_LIMIT)?;
    let n = hm.nrows();
    let mut proj = DMatrix::<f64>::identity(n, n);
    for g in ground {
        let v = nalgebra::DVector::from_column_slice(g);
        proj -= &v * v.transpose();
    }
    Ok((hm, proj))
}

/// Detectability Lemma and union-bound quantities for one ordering, in the effective
/// space (DL annihilates everything outside it, so nothing is lost for the maximum).
pub fn dl_qub_check(g: &Graph, q: usize, ordering: &[Edge], seed: u64) -> Result<DlQubReport> {
    let model = build_k2_model(q)?;
    let h = assemble_effective(g, &model)?;
    let ground = effective_ground_states(&model, g.n(), EFFECTIVE_GUARD)?;
    let dl = dl_operator(&h, ordering)?;
    let (hm, proj) = dense_excited(&h, &ground)?;
    let dm = spectra::to_dense(&dl, spectra::DENSE_LIMIT)?;
    let gram = dm.transpose() * &dm;
    let restricted = &proj * &gram * &proj;
    let sym = (&restricted + restricted.transpose()) * 0.5;

    let eig_h = SymmetricEigen::new((&hm + hm.transpose()) * 0.5);
    let mut idx: Vec<usize> = (0..hm.nrows()).collect();
    idx.sort_by(|&a, &b| eig_h.eigenvalues[a].total_cmp(&eig_h.eigenvalues[b]));
    let nground = ground.len();
    let gap = eig_h.eigenvalues[idx[nground]];
    let first = eig_h.eigenvectors.column(idx[nground]).into_owned();
    let first_excited = (&dm * &first).norm_squared();

    // Extremes of the quadratic form on the excited subspace: diagonalise it in an
    // orthonormal basis of that subspace.
    let excited: Vec<_> = idx[nground..].iter().map(|&i| eig_h.eigenvectors.column(i).into_owned()).collect();
    let basis = DMatrix::from_columns(&excited);
    let form = basis.transpose() * &sym * &basis;
    let ev = SymmetricEigen::new(form).eigenvalues;
    let dl_max = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dl_min = ev.iter().copied().fold(f64::INFINITY, f64::min);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slack = f64::INFINITY;
    for _ in 0..20 {
        let c: Vec<f64> = (0..basis.ncols()).map(|_| rng.random::<f64>() - 0.5).collect();
        let psi = &basis * nalgebra::DVector::from_vec(c);
        let psi = &psi / psi.norm();
        let energy = (psi.transpose() * &hm * &psi)[(0, 0)];
        let norm2 = (&dm * &psi).norm_squared();
        slack = slack.min(norm2 - (1.0 - 4.0 * energy));
    }
    Ok(DlQubReport { gap, g: overlap_degree(g), dl_max, dl_min, first_excited, qub_probe_slack: slack })
}

/// Checks derived from one [`DlQubReport`].
pub fn dl_qub_checks(name: &str, r: &DlQubReport) -> Vec<Check> {
    let g2 = (r.g.max(1) * r.g.max(1)) as f64;
    let bound = 1.0 / (1.0 + r.gap / g2);
    vec![
        Check::new(format!("{name}: DL max {:.6} <= {bound:.6}", r.dl_max), r.dl_max - bound, 1e-12),
        Check::new(format!("{name}: union bound over excited space"), (1.0 - 4.0 * r.gap) - r.dl_min, 1e-12),
        Check::new(format!("{name}: union bound on first excited state"), (1.0 - 4.0 * r.gap) - r.first_excited, 1e-12),
        Check::new(format!("{name}: union bound on random probes"), -r.qub_probe_slack, 1e-12),
    ]
}

/// `orderings` seeded random orderings per instance plus the pipeline ordering on trees.
pub fn dl_qub_suite(orderings: usize, seed: u64) -> Result<Vec<Check>> {
    let instances: Vec<(&str, Graph)> = vec![
        ("star(3)", Graph::star(3)?),
        ("star(4)", Graph::star(4)?),
        ("path(4)", Graph::path(4)?),
        ("path(5)", Graph::path(5)?),
        ("y(1,1,2)", Graph::y(1, 1, 2)?),
        ("complete(3)", Graph::complete(3)?),
        ("grid(2x2)", Graph::grid(2, 2)?),
        ("complete(4)", Graph::complete(4)?),
    ];
    let mut checks = Vec::new();
    for (i, (name, g)) in instances.iter().enumerate() {
        for j in 0..orderings {
            let s = seed.wrapping_add((i * 1000 + j) as u64);
            let ord = random_ordering(g.edges(), s);
            let r = dl_qub_check(g, 2, &ord, s)?;
            checks.extend(dl_qub_checks(&format!("{name} ordering #{j}"), &r));
        }
        if g.is_tree() {
            let ct = CompressedTree::from_tree(g.clone(), g.center())?;
            let ord = flatten_pipeline_ordering(&ct);
            let r = dl_qub_check(g, 2, &ord, seed)?;
            checks.extend(dl_qub_checks(&format!("{name} pipeline ordering"), &r));
        }
    }
    Ok(checks)
}

/// Every connected labelled graph on `n` vertices.
pub fn all_connected_graphs(n: usize) -> Result<Vec<Graph>> {
    let pairs: Vec<Edge> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let mut out = Vec::new();
    for mask in 1u64..(1u64 << pairs.len()) {
        let edges = pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e);
        let g = Graph::new(n, edges)?;
        if g.is_connected() {
            out.push(g);
        }
    }
    Ok(out)
}

/// Full-space vs effective gaps on every connected graph with `n` vertices, plus the
/// spanning-tree monotonicity `gap(G) >= gap(ST)`.
pub fn oracle_suite(n: usize, k: usize, q: usize, tol: f64) -> Result<Vec<Check>> {
    let opts = SolverOptions { tol: 1e-10, ..Default::default() };
    let repr = if k == 2 { Representation::EffectiveK2 } else { Representation::EffectiveQr };
    if k != 2 {
        build_qr_model(k, q)?;
    }
    let mut checks = Vec::new();
    for g in all_connected_graphs(n)? {
        let full = graph_gap(&g, k, q, Representation::Full, &opts)?;
        let eff = graph_gap(&g, k, q, repr, &opts)?;
        checks.push(Check::new(format!("full vs effective {:?} k={k} q={q}", g.edges()), (full.gap - eff.gap).abs(), tol));
        let st = spanning_tree(&g, g.center())?.to_graph();
        let st_gap = graph_gap(&st, k, q, repr, &opts)?;
        checks.push(Check::new(format!("gap(G) >= gap(ST) {:?}", g.edges()), st_gap.gap - eff.gap, 1e-9));
    }
    Ok(checks)
}
