//! Symmetric-group machinery: permutations, Gram and Weingarten matrices, the
//! two-site Haar projector and the permutation-state ground basis.
//!
//! Site vectors live on `q^{2k}` indices: `k` forward digits followed by `k`
//! conjugate digits, most significant first. The permutation state of `σ` has a one
//! at `(i_1..i_k, i_{σ(0)}..i_{σ(k-1)})` and zeros elsewhere, so
//! `<σ|τ> = q^{#cycles(σ τ^{-1})}`. A two-site vector is indexed `a * q^{2k} + b`.

use crate::error::{checked_dim, Error, Result};
use crate::report::Check;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::BTreeSet;

pub const MAX_K: usize = 5;

/// Relative eigenvalue cutoff for pseudo-inverses and numerical ranks.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Dense-storage guard for [`haar_projector`]: `q^{4k} <= 2^16`.
pub const HAAR_GUARD: u128 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Permutation> {
        let mut seen = vec![false; images.len()];
        for &x in &images {
            if x >= images.len() || seen[x] {
                return Err(Error::Invalid(format!("{images:?} is not a permutation")));
            }
            seen[x] = true;
        }
        Ok(Permutation { images })
    }

    pub fn identity(k: usize) -> Permutation {
        Permutation { images: (0..k).collect() }
    }

    pub fn k(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, x: usize) -> usize {
        self.images[x]
    }

    /// `self ∘ other`, i.e. `x -> self(other(x))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation { images: other.images.iter().map(|&x| self.images[x]).collect() }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.k()];
        for (i, &x) in self.images.iter().enumerate() {
            inv[x] = i;
        }
        Permutation { images: inv }
    }

    pub fn cycle_count(&self) -> usize {
        let mut seen = vec![false; self.k()];
        let mut cycles = 0;
        for start in 0..self.k() {
            if !seen[start] {
                cycles += 1;
                let mut j = start;
                while !seen[j] {
                    seen[j] = true;
                    j = self.images[j];
                }
            }
        }
        cycles
    }
}

pub(crate) fn check_k(k: usize) -> Result<()> {
    if (1..=MAX_K).contains(&k) {
        Ok(())
    } else {
        Err(Error::UnsupportedMoment(k))
    }
}

/// All of `S_k` in lexicographic order of one-line notation (identity first).
pub fn all_permutations(k: usize) -> Vec<Permutation> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    let mut used = vec![false; k];
    fn rec(k: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
        if cur.len() == k {
            out.push(Permutation { images: cur.clone() });
            return;
        }
        for x in 0..k {
            if !used[x] {
                used[x] = true;
                cur.push(x);
                rec(k, cur, used, out);
                cur.pop();
                used[x] = false;
            }
        }
    }
    rec(k, &mut cur, &mut used, &mut out);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub k: usize,
    pub d: u64,
    pub entries: DMatrix<f64>,
}

/// `G[σ][τ] = d^{#cycles(σ τ^{-1})}` over [`all_permutations`].
pub fn gram_matrix(k: usize, d: u64) -> Result<GramMatrix> {
    check_k(k)?;
    if d == 0 {
        return Err(Error::InvalidSize("Gram dimension must be positive".into()));
    }
    let perms = all_permutations(k);
    let m = perms.len();
    let df = d as f64;
    let entries = DMatrix::from_fn(m, m, |i, j| {
        df.powi(perms[i].compose(&perms[j].inverse()).cycle_count() as i32)
    });
    Ok(GramMatrix { k, d, entries })
}

impl GramMatrix {
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Number of eigenvalues above `1e-10 * λmax`.
    pub fn rank(&self) -> usize {
        let ev = self.eigenvalues();
        let max = ev.last().copied().unwrap_or(0.0);
        ev.iter().filter(|&&x| x > RANK_CUTOFF * max).count()
    }
}

fn pseudo_inverse(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    let mut rank = 0;
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > RANK_CUTOFF * max {
            rank += 1;
            let v = eig.eigenvectors.column(j);
            out += (v * v.transpose()) / lam;
        }
    }
    (out, rank)
}

/// Pseudo-inverse of the Gram matrix with relative cutoff `1e-10`.
pub fn weingarten(k: usize, d: u64) -> Result<DMatrix<f64>> {
    Ok(pseudo_inverse(&gram_matrix(k, d)?.entries).0)
}

/// `Σ (f^λ)^2` over partitions `λ ⊢ k` with at most `d` rows (hook length formula).
pub fn schur_weyl_rank(k: usize, d: u64) -> u64 {
    fn partitions(k: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 0 {
            out.push(cur.clone());
            return;
        }
        for p in (1..=k.min(max)).rev() {
            cur.push(p);
            partitions(k - p, p, cur, out);
            cur.pop();
        }
    }
    let mut parts = Vec::new();
    partitions(k, k, &mut Vec::new(), &mut parts);
    let fact = |n: usize| (1..=n as u64).product::<u64>();
    parts
        .iter()
        .filter(|p| p.len() as u64 <= d)
        .map(|p| {
            let mut hooks = 1u64;
            for (r, &len) in p.iter().enumerate() {
                for c in 0..len {
                    let below = p[r + 1..].iter().filter(|&&l| l > c).count();
                    hooks *= (len - c - 1 + below + 1) as u64;
                }
            }
            let f = fact(k) / hooks;
            f * f
        })
        .sum()
}

/// Support of the single-site permutation state, ascending.
pub fn site_support(sigma: &Permutation, q: usize) -> Vec<u32> {
    let k = sigma.k();
    let count = q.pow(k as u32);
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0usize; k];
    for t in 0..count {
        let mut r = t;
        for a in (0..k).rev() {
            digits[a] = r % q;
            r /= q;
        }
        let mut idx = 0usize;
        for &dg in &digits[..k] {
            idx = idx * q + dg;
        }
        for a in 0..k {
            idx = idx * q + digits[sigma.apply(a)];
        }
        out.push(idx as u32);
    }
    out.sort_unstable();
    out
}

/// Dense single-site permutation state of length `q^{2k}`.
pub fn site_vector(sigma: &Permutation, q: usize) -> Vec<f64> {
    let mut v = vec![0.0; q.pow(2 * sigma.k() as u32)];
    for i in site_support(sigma, q) {
        v[i as usize] = 1.0;
    }
    v
}

/// Projector onto `span{|σ>|σ> : σ ∈ S_k}` on two sites, stored in factored form
/// `P = Σ Wg[σ][τ] |σσ><ττ|` with `Wg` the pseudo-inverse of `Gram(k, q^2)`.
#[derive(Clone, Debug)]
pub struct HaarProjector {
    k: usize,
    q: usize,
    perms: Vec<Permutation>,
    wg: DMatrix<f64>,
    gram: DMatrix<f64>,
    supports: Vec<Vec<u32>>,
    rank: usize,
}

/// The two-site Haar projector, guarded by `q^{4k} <= 2^16`.
pub fn haar_projector(k: usize, q: usize) -> Result<HaarProjector> {
    check_k(k)?;
    check_q(q)?;
    checked_dim(q, 4 * k, HAAR_GUARD)?;
    HaarProjector::factored(k, q)
}

pub(crate) fn check_q(q: usize) -> Result<()> {
    if q < 2 {
        Err(Error::InvalidSize(format!("local dimension q = {q} must be at least 2")))
    } else {
        Ok(())
    }
}

impl HaarProjector {
    /// Factored form without the dense-storage guard.
    pub fn factored(k: usize, q: usize) -> Result<HaarProjector> {
        check_k(k)?;
        check_q(q)?;
        checked_dim(q, 2 * k, u32::MAX as u128)?;
        let perms = all_permutations(k);
        let gram = gram_matrix(k, (q * q) as u64)?.entries;
        let (wg, rank) = pseudo_inverse(&gram);
        let supports = perms.iter().map(|s| site_support(s, q)).collect();
        Ok(HaarProjector { k, q, perms, wg, gram, supports, rank })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn site_dim(&self) -> usize {
        self.q.pow(2 * self.k as u32)
    }

    pub fn dim(&self) -> usize {
        self.site_dim() * self.site_dim()
    }

    pub fn perms(&self) -> &[Permutation] {
        &self.perms
    }

    pub fn weingarten(&self) -> &DMatrix<f64> {
        &self.wg
    }

    /// `Gram(k, q^2)`, the overlaps of the two-site permutation states.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn supports(&self) -> &[Vec<u32>] {
        &self.supports
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `tr P = tr(Wg G)`.
    pub fn trace(&self) -> f64 {
        (&self.wg * &self.gram).trace()
    }

    /// `y = P x` on the two-site space.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let d = self.site_dim();
        let m = self.perms.len();
        let c: Vec<f64> = self
            .supports
            .iter()
            .map(|s| s.iter().map(|&a| s.iter().map(|&b| x[a as usize * d + b as usize]).sum::<f64>()).sum())
            .collect();
        y.iter_mut().for_each(|v| *v = 0.0);
        for sigma in 0..m {
            let z: f64 = (0..m).map(|tau| self.wg[(sigma, tau)] * c[tau]).sum();
            let s = &self.supports[sigma];
            for &a in s {
                for &b in s {
                    y[a as usize * d + b as usize] += z;
                }
            }
        }
    }

    /// Dense matrix, only for `q^{4k} <= 4096`.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        checked_dim(self.q, 4 * self.k, 4096)?;
        Ok(self.to_dense_unchecked())
    }

    /// Columns `|σ>|σ>` as a dense `q^{4k} x k!` matrix.
    fn two_site_states(&self) -> DMatrix<f64> {
        let d = self.site_dim();
        let mut v = DMatrix::zeros(d * d, self.perms.len());
        for (j, s) in self.supports.iter().enumerate() {
            for &a in s {
                for &b in s {
                    v[(a as usize * d + b as usize, j)] = 1.0;
                }
            }
        }
        v
    }

    /// Distinct nonzero membership patterns of two-site indices. Entry
    /// `(a,b),(c,d)` of `V A V^T` depends only on the patterns of `(a,b)` and `(c,d)`.
    fn patterns(&self) -> Vec<u128> {
        let d = self.site_dim();
        let mut masks = vec![0u128; d];
        for (j, s) in self.supports.iter().enumerate() {
            for &a in s {
                masks[a as usize] |= 1 << j;
            }
        }
        let distinct: BTreeSet<u128> = masks.into_iter().collect();
        let mut out = BTreeSet::new();
        for &m1 in &distinct {
            for &m2 in &distinct {
                if m1 & m2 != 0 {
                    out.insert(m1 & m2);
                }
            }
        }
        out.into_iter().collect()
    }
}

fn mask_sum(a: &DMatrix<f64>, p1: u128, p2: u128) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        if p1 >> i & 1 == 1 {
            for j in 0..a.ncols() {
                if p2 >> j & 1 == 1 {
                    s += a[(i, j)];
                }
            }
        }
    }
    s
}

/// Max entry of `V A V^T` over the two-site index space.
fn max_entry(patterns: &[u128], a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for &p1 in patterns {
        for &p2 in patterns {
            worst = worst.max(mask_sum(a, p1, p2).abs());
        }
    }
    worst
}

/// Max entry of `V B` where `B` has one column per vector.
fn max_entry_cols(patterns: &[u128], b: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for &p in patterns {
        for j in 0..b.ncols() {
            let s: f64 = (0..b.nrows()).filter(|&i| p >> i & 1 == 1).map(|i| b[(i, j)]).sum();
            worst = worst.max(s.abs());
        }
    }
    worst
}

/// Modified Gram-Schmidt on the permutation states using only their overlaps.
/// Returns coefficients `C` (k! x r) with `V C` orthonormal.
fn gram_schmidt_coefficients(gram: &DMatrix<f64>) -> DMatrix<f64> {
    let m = gram.nrows();
    let ip = |x: &DVector<f64>, y: &DVector<f64>| (x.transpose() * gram * y)[(0, 0)];
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for s in 0..m {
        let mut e = DVector::zeros(m);
        e[s] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = ip(b, &e);
                e -= b * c;
            }
        }
        let norm2 = ip(&e, &e);
        if norm2 > RANK_CUTOFF * gram[(s, s)] {
            basis.push(e / norm2.sqrt());
        }
    }
    DMatrix::from_columns(&basis)
}

/// Projector built by explicit Gram-Schmidt on the dense two-site states (no
/// Weingarten inversion). Only for `q^{4k} <= 4096`.
pub fn haar_projector_oracle(k: usize, q: usize) -> Result<DMatrix<f64>> {
    check_k(k)?;
    check_q(q)?;
    let dim = checked_dim(q, 4 * k, 4096)?;
    let d = q.pow(2 * k as u32);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for s in all_permutations(k) {
        let sv = site_vector(&s, q);
        let mut v = DVector::from_fn(dim, |i, _| sv[i / d] * sv[i % d]);
        let norm0 = v.norm();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 * norm0 {
            basis.push(v / norm);
        }
    }
    let b = DMatrix::from_columns(&basis);
    Ok(&b * b.transpose())
}

/// Idempotence, symmetry, permutation-state fixing, trace, swap invariance and
/// Gram-Schmidt equivalence, each as a max-entry deviation. Runs in factored form so
/// it covers every `(k, q)` within [`HAAR_GUARD`]; dense cross-checks are added when
/// `q^{4k} <= 256`.
pub fn haar_suite(k: usize, q: usize) -> Result<Vec<Check>> {
    let p = haar_projector(k, q)?;
    let tag = |s: &str| format!("haar k={k} q={q}: {s}");
    let tol = 1e-12;
    let pats = p.patterns();
    let g = p.gram();
    let wg = p.weingarten();
    let m = g.nrows();
    let mut checks = Vec::new();

    let idem = wg * g * wg - wg;
    checks.push(Check::new(tag("idempotent"), max_entry(&pats, &idem), tol));
    checks.push(Check::new(tag("hermitian"), max_entry(&pats, &(wg - wg.transpose())), tol));
    let fix = wg * g - DMatrix::<f64>::identity(m, m);
    checks.push(Check::new(tag("fixes permutation states"), max_entry_cols(&pats, &fix), tol));
    let rank = gram_matrix(k, (q * q) as u64)?.rank();
    checks.push(Check::new(tag("trace equals Gram rank"), (p.trace() - rank as f64).abs(), 1e-10));

    // (a,b) -> (b,a) maps the pattern mask_a & mask_b to mask_b & mask_a.
    let d = p.site_dim();
    let mut masks = vec![0u128; d];
    for (j, s) in p.supports().iter().enumerate() {
        for &a in s {
            masks[a as usize] |= 1 << j;
        }
    }
    let distinct: Vec<u128> = masks.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut swap_dev = 0.0f64;
    for &m1 in &distinct {
        for &m2 in &distinct {
            for &m3 in &distinct {
                for &m4 in &distinct {
                    let lhs = mask_sum(wg, m1 & m2, m4 & m3);
                    let rhs = mask_sum(wg, m1 & m2, m3 & m4);
                    swap_dev = swap_dev.max((lhs - rhs).abs());
                }
            }
        }
    }
    checks.push(Check::new(tag("swap invariant"), swap_dev, tol));

    let c = gram_schmidt_coefficients(g);
    let oracle = wg - &c * c.transpose();
    checks.push(Check::new(tag("equals Gram-Schmidt oracle"), max_entry(&pats, &oracle), tol));

    if p.dim() <= 256 {
        let dense = p.to_dense()?;
        let dim = p.dim();
        checks.push(Check::new(tag("dense idempotent"), (&dense * &dense - &dense).amax(), tol));
        let swap = DMatrix::from_fn(dim, dim, |r, s| if r == (s % d) * d + s / d { 1.0 } else { 0.0 });
        checks.push(Check::new(tag("dense swap invariant"), (&dense * &swap - &dense).amax(), tol));
        let oracle = haar_projector_oracle(k, q)?;
        checks.push(Check::new(tag("dense Gram-Schmidt oracle"), (&dense - oracle).amax(), tol));
        let mut x = vec![0.0; dim];
        let mut y = vec![0.0; dim];
        let mut dev = 0.0f64;
        for col in 0..dim {
            x.iter_mut().for_each(|v| *v = 0.0);
            x[col] = 1.0;
            p.apply(&x, &mut y);
            for r in 0..dim {
                dev = dev.max((y[r] - dense[(r, col)]).abs());
            }
        }
        checks.push(Check::new(tag("factored apply matches dense"), dev, tol));
    }
    Ok(checks)
}

/// Haar-distributed unitary (QR of a complex Ginibre matrix with phase correction).
pub fn haar_unitary<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<Complex64> {
    let z = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) / std::f64::consts::SQRT_2
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

#[derive(Clone, Debug)]
pub struct MonteCarloReport {
    pub samples: usize,
    /// `||avg - P||_F` for the real part of the sample mean.
    pub frobenius_error: f64,
    /// `sqrt((dim - rank) / 2N)`, the typical error of the real part of the mean.
    pub expected_scale: f64,
}

/// Averages `U^{⊗k} ⊗ conj(U)^{⊗k}` over `samples` Haar gates on two sites and
/// compares with the projector. Limited to `q^{4k} <= 1024`.
pub fn monte_carlo_projector(k: usize, q: usize, samples: usize, seed: u64) -> Result<MonteCarloReport> {
    check_k(k)?;
    check_q(q)?;
    let dim = checked_dim(q, 4 * k, 1024)?;
    if samples == 0 {
        return Err(Error::InvalidSize("Monte Carlo needs at least one sample".into()));
    }
    let p = HaarProjector::factored(k, q)?.to_dense_unchecked();
    let g = q * q;
    let half = g.pow(k as u32);
    // copy-major index (A, B), A = forward copies, B = conjugate copies, each copy a
    // pair (i, j) of site digits, mapped to the site-major layout.
    let map: Vec<usize> = (0..dim)
        .map(|idx| {
            let (a, b) = (idx / half, idx % half);
            let mut fi = vec![0; k];
            let mut fj = vec![0; k];
            let mut ci = vec![0; k];
            let mut cj = vec![0; k];
            let (mut ra, mut rb) = (a, b);
            for c in (0..k).rev() {
                fi[c] = (ra % g) / q;
                fj[c] = ra % q;
                ra /= g;
                ci[c] = (rb % g) / q;
                cj[c] = rb % q;
                rb /= g;
            }
            let mut si = 0;
            let mut sj = 0;
            for c in 0..k {
                si = si * q + fi[c];
                sj = sj * q + fj[c];
            }
            for c in 0..k {
                si = si * q + ci[c];
                sj = sj * q + cj[c];
            }
            si * q.pow(2 * k as u32) + sj
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0f64; dim * dim];
    for _ in 0..samples {
        let u = haar_unitary(g, &mut rng);
        let mut w = u.clone();
        for _ in 1..k {
            w = kron(&w, &u);
        }
        for r in 0..dim {
            let (ra, rb) = (r / half, r % half);
            let row = map[r] * dim;
            for c in 0..dim {
                let (ca, cb) = (c / half, c % half);
                let x = w[(ra, ca)];
                let y = w[(rb, cb)];
                acc[row + map[c]] += x.re * y.re + x.im * y.im;
            }
        }
    }
    let n = samples as f64;
    let mut err = 0.0;
    for r in 0..dim {
        for c in 0..dim {
            let diff = acc[r * dim + c] / n - p[(r, c)];
            err += diff * diff;
        }
    }
    let rank = gram_matrix(k, g as u64)?.rank();
    Ok(MonteCarloReport {
        samples,
        frobenius_error: err.sqrt(),
        expected_scale: ((dim - rank) as f64 / (2.0 * n)).sqrt(),
    })
}

impl HaarProjector {
    fn to_dense_unchecked(&self) -> DMatrix<f64> {
        let v = self.two_site_states();
        &v * &self.wg * v.transpose()
    }
}

/// Orthonormal basis of `span{|σ>^{⊗n}}` in coefficient form: basis vector `j` is
/// `Σ_σ coeffs[(σ, j)] |σ>^{⊗n}`.
#[derive(Clone, Debug)]
pub struct GroundBasis {
    pub n: usize,
    pub k: usize,
    pub q: usize,
    pub coeffs: DMatrix<f64>,
}

pub fn ground_state_basis(n: usize, k: usize, q: usize) -> Result<GroundBasis> {
    check_k(k)?;
    check_q(q)?;
    if n == 0 {
        return Err(Error::InvalidSize("need at least one site".into()));
    }
    let d = (q as u64)
        .checked_pow(n as u32)
        .ok_or(Error::TooLarge { dim: u128::MAX, limit: u64::MAX as u128 })?;
    let gram = gram_matrix(k, d)?.entries;
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&j| eig.eigenvalues[j] > RANK_CUTOFF * max).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let cols: Vec<DVector<f64>> = idx
        .iter()
        .map(|&j| eig.eigenvectors.column(j).into_owned() / eig.eigenvalues[j].sqrt())
        .collect();
    Ok(GroundBasis { n, k, q, coeffs: DMatrix::from_columns(&cols) })
}

impl GroundBasis {
    pub fn len(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.ncols() == 0
    }

    /// Materialises the basis given each permutation's single-site vector (full
    /// site vectors or their effective-basis images). Site 0 is most significant.
    pub fn materialize(&self, site_vectors: &[Vec<f64>], limit: u128) -> Result<Vec<Vec<f64>>> {
        let d = site_vectors.first().map_or(0, Vec::len);
        let dim = checked_dim(d, self.n, limit)?;
        let products: Vec<Vec<f64>> = site_vectors
            .iter()
            .map(|u| {
                let mut v = vec![1.0];
                for _ in 0..self.n {
                    v = v.iter().flat_map(|&a| u.iter().map(move |&b| a * b)).collect();
                }
                v
            })
            .collect();
        Ok((0..self.len())
            .map(|j| {
                let mut out = vec![0.0; dim];
                for (s, prod) in products.iter().enumerate() {
                    let c = self.coeffs[(s, j)];
                    if c != 0.0 {
                        out.iter_mut().zip(prod).for_each(|(o, &p)| *o += c * p);
                    }
                }
                out
            })
            .collect())
    }

    /// Full-space vectors of length `q^{2nk}`.
    pub fn full_vectors(&self, limit: u128) -> Result<Vec<Vec<f64>>> {
        let sv: Vec<Vec<f64>> = all_permutations(self.k).iter().map(|s| site_vector(s, self.q)).collect();
        self.materialize(&sv, limit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn permutations_are_lexicographic() {
        let p = all_permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], Permutation::identity(3));
        assert_eq!(p[1].images(), &[0, 2, 1]);
        assert_eq!(p[5].images(), &[2, 1, 0]);
        assert!(Permutation::new(vec![0, 0]).is_err());
    }

    #[test]
    fn gram_examples() {
        let g = gram_matrix(2, 4).unwrap();
        assert_eq!(g.entries, DMatrix::from_row_slice(2, 2, &[16.0, 4.0, 4.0, 16.0]));
        assert_eq!(gram_matrix(1, 3).unwrap().entries[(0, 0)], 3.0);
        assert_eq!(gram_matrix(3, 2).unwrap().rank(), 5);
        assert_eq!(gram_matrix(6, 2), Err(Error::UnsupportedMoment(6)));
    }

    #[test]
    fn weingarten_examples() {
        let w = weingarten(2, 4).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[16.0, -4.0, -4.0, 16.0]) / 240.0;
        assert!((w - expect).amax() < 1e-15);
        assert!((weingarten(1, 5).unwrap()[(0, 0)] - 0.2).abs() < 1e-15);
        let w = weingarten(2, 2).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[4.0, -2.0, -2.0, 4.0]) / 12.0;
        assert!((w - expect).amax() < 1e-15);
    }

    #[test]
    fn rank_table() {
        let table: [(usize, u64, usize); 12] = [
            (1, 2, 1), (1, 3, 1), (1, 4, 1),
            (2, 2, 2), (2, 3, 2), (2, 4, 2),
            (3, 2, 5), (3, 3, 6), (3, 4, 6),
            (4, 2, 14), (4, 3, 23), (4, 4, 24),
        ];
        for (k, d, r) in table {
            assert_eq!(gram_matrix(k, d).unwrap().rank(), r, "k={k} d={d}");
            assert_eq!(schur_weyl_rank(k, d), r as u64, "k={k} d={d}");
        }
        assert_eq!(schur_weyl_rank(5, 2), 42);
    }

    #[test]
    fn site_vectors_reproduce_gram() {
        for (k, q) in [(1, 2), (2, 2), (2, 3), (3, 2)] {
            let perms = all_permutations(k);
            let vs: Vec<Vec<f64>> = perms.iter().map(|s| site_vector(s, q)).collect();
            let g = gram_matrix(k, q as u64).unwrap().entries;
            for i in 0..perms.len() {
                for j in 0..perms.len() {
                    let ip: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
                    assert_eq!(ip, g[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn projector_traces() {
        let p = haar_projector(1, 2).unwrap();
        assert!((p.trace() - 1.0).abs() < 1e-12);
        let dense = p.to_dense().unwrap();
        assert!((dense[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((haar_projector(2, 2).unwrap().trace() - 2.0).abs() < 1e-12);
        assert!((haar_projector(3, 2).unwrap().trace() - 6.0).abs() < 1e-10);
        assert!(matches!(haar_projector(3, 3), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn oracle_matches() {
        let p = haar_projector(2, 2).unwrap().to_dense().unwrap();
        let o = haar_projector_oracle(2, 2).unwrap();
        assert!((p - o).amax() <= 1e-12);
        let o = haar_projector_oracle(1, 3).unwrap();
        assert!((o.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn suite_small_cases() {
        for (k, q) in [(1, 2), (2, 2), (1, 3)] {
            for c in haar_suite(k, q).unwrap() {
                assert!(c.passed, "{c:?}");
            }
        }
    }

    #[test]
    fn monte_carlo_converges() {
        let r = monte_carlo_projector(1, 2, 2000, 11).unwrap();
        assert!(r.frobenius_error <= 3.0 * r.expected_scale, "{r:?}");
    }

    #[test]
    fn ground_basis_sizes() {
        assert_eq!(ground_state_basis(3, 2, 2).unwrap().len(), 2);
        assert_eq!(ground_state_basis(1, 1, 2).unwrap().len(), 1);
        assert_eq!(ground_state_basis(2, 3, 2).unwrap().len(), 6);
        assert_eq!(ground_state_basis(1, 3, 2).unwrap().len(), 5);
    }

    #[test]
    fn ground_basis_is_orthonormal() {
        let b = ground_state_basis(2, 3, 2).unwrap();
        let vs = b.full_vectors(1 << 20).unwrap();
        for i in 0..vs.len() {
            for j in 0..vs.len() {
                let ip: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn cycles_of_inverse_match(k in 1usize..=5, seed in 0usize..120) {
            let perms = all_permutations(k);
            let p = &perms[seed % perms.len()];
            prop_assert_eq!(p.inverse().cycle_count(), p.cycle_count());
            prop_assert_eq!(p.compose(&p.inverse()), Permutation::identity(k));
        }

        #[test]
        fn gram_is_symmetric_psd(k in 1usize..=4, d in 1u64..6) {
            let g = gram_matrix(k, d).unwrap();
            prop_assert_eq!(g.entries.transpose(), g.entries.clone());
            let ev = g.eigenvalues();
            prop_assert!(ev[0] > -1e-9 * ev[ev.len() - 1]);
            prop_assert_eq!(g.rank() == g.entries.nrows(), d as usize >= k);
        }
    }
}
