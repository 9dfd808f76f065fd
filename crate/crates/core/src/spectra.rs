//! Dense and Lanczos eigensolvers and gap extraction by penalty deflation.
//!
//! The gap of a frustration-free `H` with known orthonormal ground vectors `g_i` is
//! the lowest eigenvalue of `H + c Σ |g_i><g_i|` for any `c` above the gap.

use crate::error::{Error, Result};
use crate::operators::LinearOperator;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Largest dimension accepted by [`dense_spectrum`].
pub const DENSE_LIMIT: usize = 4096;

const CHUNK: usize = 1 << 14;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Relative residual tolerance `||Av - θv|| <= tol * max(1, |θ|)`.
    pub tol: f64,
    /// Matrix-vector product budget.
    pub max_iter: usize,
    pub seed: u64,
    /// Dimensions up to this size are diagonalised densely.
    pub dense_threshold: usize,
    /// Krylov subspace size before a thick restart.
    pub krylov: usize,
    /// Ritz vectors kept across a restart.
    pub keep: usize,
    /// Deflation penalty; defaults to `norm_bound + 1`.
    pub penalty: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> SolverOptions {
        SolverOptions {
            tol: 1e-8,
            max_iter: 5000,
            seed: 0x5EED,
            dense_threshold: 1024,
            krylov: 40,
            keep: 12,
            penalty: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Lanczos,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Dense => "dense",
            Method::Lanczos => "lanczos",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GapResult {
    pub gap: f64,
    pub ground_dim: usize,
    pub method: Method,
    pub residual: f64,
    pub iterations: usize,
    pub seed: u64,
    pub penalty: f64,
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub method: Method,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Fixed chunking keeps the summation order independent of the thread count.
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    parts.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(yc, xc)| yc.iter_mut().zip(xc).for_each(|(p, q)| *p += alpha * q));
}

fn scale(alpha: f64, x: &mut [f64]) {
    x.par_chunks_mut(CHUNK).for_each(|c| c.iter_mut().for_each(|v| *v *= alpha));
}

/// Dense matrix of an operator by applying it to every basis vector.
pub fn to_dense(op: &dyn LinearOperator, limit: usize) -> Result<DMatrix<f64>> {
    let n = op.dim();
    if n > limit {
        return Err(Error::TooLarge { dim: n as u128, limit: limit as u128 });
    }
    let mut m = DMatrix::zeros(n, n);
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        x[j] = 1.0;
        op.apply(&x, &mut y);
        x[j] = 0.0;
        m.column_mut(j).copy_from_slice(&y);
    }
    Ok(m)
}

fn symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// All eigenvalues, ascending. Requires a Hermitian operator of dimension <= 4096.
pub fn dense_spectrum(op: &dyn LinearOperator) -> Result<Vec<f64>> {
    if !op.hermitian() {
        return Err(Error::Precondition(format!("{} is not Hermitian", op.describe())));
    }
    Ok(symmetric_eigen(to_dense(op, DENSE_LIMIT)?).0)
}

/// Lowest eigenpair: dense below the threshold, thick-restart Lanczos above.
pub fn lowest_eigenpair(op: &dyn LinearOperator, opts: &SolverOptions) -> Result<EigenPair> {
    if op.dim() <= opts.dense_threshold.min(DENSE_LIMIT) {
        let (vals, vecs) = symmetric_eigen(to_dense(op, DENSE_LIMIT)?);
        let vector: Vec<f64> = vecs.column(0).iter().copied().collect();
        let residual = residual_of(op, vals[0], &vector);
        return Ok(EigenPair { value: vals[0], vector, residual, iterations: 1, method: Method::Dense });
    }
    lanczos(op, opts)
}

fn residual_of(op: &dyn LinearOperator, theta: f64, v: &[f64]) -> f64 {
    let mut av = vec![0.0; v.len()];
    op.apply(v, &mut av);
    axpy(-theta, v, &mut av);
    norm(&av)
}

/// Thick-restart Lanczos with full reorthogonalisation (Krylov-Schur form).
fn lanczos(op: &dyn LinearOperator, opts: &SolverOptions) -> Result<EigenPair> {
    let n = op.dim();
    let m = opts.krylov.clamp(4, n);
    let keep = opts.keep.clamp(1, m - 2);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v0: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nv = norm(&v0);
    scale(1.0 / nv, &mut v0);

    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut locked = 0;
    let mut matvecs = 0;
    loop {
        let mut size = m;
        let mut beta = 0.0;
        let mut tail: Option<Vec<f64>> = None;
        for j in locked..m {
            let mut w = vec![0.0; n];
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            for pass in 0..2 {
                for i in 0..=j {
                    let c = dot(&basis[i], &w);
                    if pass == 0 {
                        h[(i, j)] = c;
                    } else {
                        h[(i, j)] += c;
                    }
                    axpy(-c, &basis[i], &mut w);
                }
            }
            for i in 0..j {
                h[(j, i)] = h[(i, j)];
            }
            beta = norm(&w);
            let scale_ref = h[(j, j)].abs().max(1.0);
            if beta <= 1e-13 * scale_ref {
                size = j + 1;
                beta = 0.0;
                break;
            }
            scale(1.0 / beta, &mut w);
            if j + 1 < m {
                basis.push(w);
            } else {
                tail = Some(w);
            }
        }
        let hs = h.view((0, 0), (size, size)).into_owned();
        let (theta, y) = symmetric_eigen(hs);
        let estimate = beta * y[(size - 1, 0)].abs();
        let bound = opts.tol * theta[0].abs().max(1.0);
        let best = if estimate <= bound || beta == 0.0 {
            let x = ritz_vector(&basis[..size], y.column(0).as_slice());
            let residual = residual_of(op, theta[0], &x);
            matvecs += 1;
            if residual <= bound {
                return Ok(EigenPair { value: theta[0], vector: x, residual, iterations: matvecs, method: Method::Lanczos });
            }
            (theta[0], residual)
        } else {
            (theta[0], estimate)
        };
        if matvecs >= opts.max_iter {
            return Err(Error::Convergence { iterations: matvecs, estimate: best.0, residual: best.1 });
        }
        let Some(f) = tail else {
            // Invariant subspace without a converged pair: restart from the Ritz vector.
            let x = ritz_vector(&basis[..size], y.column(0).as_slice());
            basis = vec![x];
            h.fill(0.0);
            locked = 0;
            continue;
        };
        let p = keep.min(size - 1);
        let mut new_basis: Vec<Vec<f64>> = (0..p).map(|i| ritz_vector(&basis[..size], y.column(i).as_slice())).collect();
        new_basis.push(f);
        basis = new_basis;
        h.fill(0.0);
        for i in 0..p {
            h[(i, i)] = theta[i];
        }
        locked = p;
    }
}

fn ritz_vector(basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    let n = basis[0].len();
    let mut x = vec![0.0; n];
    for (b, &c) in basis.iter().zip(coeffs) {
        axpy(c, b, &mut x);
    }
    let nx = norm(&x);
    scale(1.0 / nx, &mut x);
    x
}

/// `A + c Σ |g><g|`.
pub struct Penalized<'a> {
    pub op: &'a dyn LinearOperator,
    pub ground: &'a [Vec<f64>],
    pub c: f64,
}

impl LinearOperator for Penalized<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply(x, y);
        for g in self.ground {
            let c = self.c * dot(g, x);
            axpy(c, g, y);
        }
    }

    fn describe(&self) -> String {
        format!("{} + {} x projector on {} ground vectors", self.op.describe(), self.c, self.ground.len())
    }
}

/// Checks orthonormality of `ground` and that `op` annihilates each vector.
pub fn check_ground(op: &dyn LinearOperator, ground: &[Vec<f64>], tol: f64) -> Result<()> {
    let mut y = vec![0.0; op.dim()];
    for (i, g) in ground.iter().enumerate() {
        if g.len() != op.dim() {
            return Err(Error::Precondition(format!("ground vector {i} has the wrong length")));
        }
        for (j, h) in ground.iter().enumerate().take(i + 1) {
            let want = if i == j { 1.0 } else { 0.0 };
            if (dot(g, h) - want).abs() > 1e-8 {
                return Err(Error::Precondition("ground vectors are not orthonormal".into()));
            }
        }
        op.apply(g, &mut y);
        let r = norm(&y);
        if r > tol {
            return Err(Error::Precondition(format!("ground vector {i} is not annihilated (residual {r:e})")));
        }
    }
    Ok(())
}

/// Gap of a frustration-free operator by penalty deflation of `ground`.
pub fn spectral_gap(op: &dyn LinearOperator, ground: &[Vec<f64>], opts: &SolverOptions) -> Result<GapResult> {
    let c = match opts.penalty {
        Some(c) => c,
        None => op
            .norm_bound()
            .map(|b| b + 1.0)
            .ok_or_else(|| Error::Precondition("operator has no norm bound; pass a penalty".into()))?,
    };
    check_ground(op, ground, opts.tol.max(1e-9) * op.norm_bound().unwrap_or(1.0).max(1.0))?;
    let shifted = Penalized { op, ground, c };
    let pair = lowest_eigenpair(&shifted, opts)?;
    Ok(GapResult {
        gap: pair.value.max(0.0),
        ground_dim: ground.len(),
        method: pair.method,
        residual: pair.residual,
        iterations: pair.iterations,
        seed: opts.seed,
        penalty: c,
    })
}
