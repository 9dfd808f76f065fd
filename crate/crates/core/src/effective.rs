//! Effective models: every operator built from Haar projectors preserves
//! `span{|σ>}` on each site, so the Hamiltonian can be written on `r` dimensions per
//! site with `r = rank Gram(k, q)`. Site vectors become the columns of the overlap
//! matrix `C` (with `C^T C = Gram(k, q)`) and the two-site projector keeps its
//! Weingarten form.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::operators::{LinearOperator, LocalProjector, SiteHamiltonian, SiteSpace, TermMode, FULL_GUARD};
use crate::permsym::{all_permutations, check_k, check_q, ground_state_basis, site_vector, weingarten, RANK_CUTOFF};
use crate::spectra::{self, GapResult, SolverOptions};
use nalgebra::DMatrix;
use serde::Serialize;
use std::str::FromStr;
use std::sync::Arc;

/// Dimension guard for effective Hamiltonians.
pub const EFFECTIVE_GUARD: u128 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// The full `q^{2k}`-dimensional site space.
    Full,
    /// Closed-form two-dimensional sites, `k = 2` only.
    EffectiveK2,
    /// Orthonormalised permutation span from a pivoted QR.
    EffectiveQr,
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Representation> {
        match s {
            "full" => Ok(Representation::Full),
            "k2" | "effective-k2" => Ok(Representation::EffectiveK2),
            "qr" | "effective-qr" => Ok(Representation::EffectiveQr),
            _ => Err(Error::Parse(format!("unknown representation `{s}` (full, k2, qr)"))),
        }
    }
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Representation::Full => "full",
            Representation::EffectiveK2 => "effective-k2",
            Representation::EffectiveQr => "effective-qr",
        })
    }
}

#[derive(Clone, Debug)]
pub struct EffectiveModel {
    k: usize,
    q: usize,
    representation: Representation,
    overlaps: DMatrix<f64>,
    local: Arc<LocalProjector>,
}

impl EffectiveModel {
    fn from_overlaps(k: usize, q: usize, representation: Representation, overlaps: DMatrix<f64>) -> Result<EffectiveModel> {
        let vectors: Vec<Vec<f64>> = overlaps.column_iter().map(|c| c.iter().copied().collect()).collect();
        let w = weingarten(k, (q * q) as u64)?;
        let local = Arc::new(LocalProjector::dense(overlaps.nrows(), vectors, w)?);
        Ok(EffectiveModel { k, q, representation, overlaps, local })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    /// `r`, the number of effective states per site.
    pub fn per_site_dim(&self) -> usize {
        self.overlaps.nrows()
    }

    /// `C`: column `σ` is `|σ>` in the effective site basis.
    pub fn overlaps(&self) -> &DMatrix<f64> {
        &self.overlaps
    }

    pub fn site_vectors(&self) -> Vec<Vec<f64>> {
        self.overlaps.column_iter().map(|c| c.iter().copied().collect()).collect()
    }

    pub fn local(&self) -> &Arc<LocalProjector> {
        &self.local
    }

    /// Dense `I - P` on two effective sites.
    pub fn local_term(&self) -> DMatrix<f64> {
        let p = self.local.to_dense();
        DMatrix::identity(p.nrows(), p.ncols()) - p
    }
}

/// Closed form for `k = 2`: basis `(|+>, |->)` of symmetric and antisymmetric states.
pub fn build_k2_model(q: usize) -> Result<EffectiveModel> {
    check_q(q)?;
    let qf = q as f64;
    let plus = (qf * (qf + 1.0) / 2.0).sqrt();
    let minus = (qf * (qf - 1.0) / 2.0).sqrt();
    let c = DMatrix::from_row_slice(2, 2, &[plus, plus, minus, -minus]);
    EffectiveModel::from_overlaps(2, q, Representation::EffectiveK2, c)
}

/// Effective basis from a column-pivoted QR of the explicit site-vector matrix.
pub fn build_qr_model(k: usize, q: usize) -> Result<EffectiveModel> {
    check_k(k)?;
    check_q(q)?;
    let perms = all_permutations(k);
    let cols: Vec<Vec<f64>> = perms.iter().map(|s| site_vector(s, q)).collect();
    let v = DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i]);
    let qr = v.clone().col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    let rank = (0..r.nrows().min(r.ncols())).take_while(|&i| r[(i, i)].abs() > RANK_CUTOFF * lead).count();
    let basis = qr.q().columns(0, rank).into_owned();
    let c = basis.transpose() * v;
    EffectiveModel::from_overlaps(k, q, Representation::EffectiveQr, c)
}

pub fn build_model(k: usize, q: usize, repr: Representation) -> Result<EffectiveModel> {
    match repr {
        Representation::EffectiveK2 if k == 2 => build_k2_model(q),
        Representation::EffectiveK2 => Err(Error::Invalid(format!("the closed-form model needs k = 2, got k = {k}"))),
        Representation::EffectiveQr => build_qr_model(k, q),
        Representation::Full => Err(Error::Invalid("the full representation has no effective model".into())),
    }
}

pub fn assemble_effective(g: &Graph, model: &EffectiveModel) -> Result<SiteHamiltonian> {
    assemble_effective_with_limit(g, model, EFFECTIVE_GUARD, TermMode::Hamiltonian)
}

pub fn assemble_effective_with_limit(g: &Graph, model: &EffectiveModel, limit: u128, mode: TermMode) -> Result<SiteHamiltonian> {
    g.check_connected()?;
    let space = SiteSpace::new(g.n(), model.local.clone(), limit)?;
    let label = format!("{} k={} q={}", model.representation, model.k, model.q);
    SiteHamiltonian::new(space, g, mode, label)
}

/// Orthonormal ground states of `H` on `n` effective sites.
pub fn effective_ground_states(model: &EffectiveModel, n: usize, limit: u128) -> Result<Vec<Vec<f64>>> {
    ground_state_basis(n, model.k, model.q)?.materialize(&model.site_vectors(), limit)
}

/// Hamiltonian and orthonormal ground states in the requested representation.
pub fn hamiltonian_with_ground(g: &Graph, k: usize, q: usize, repr: Representation) -> Result<(SiteHamiltonian, Vec<Vec<f64>>)> {
    match repr {
        Representation::Full => {
            let h = SiteHamiltonian::full(g, k, q)?;
            let ground = ground_state_basis(g.n(), k, q)?.full_vectors(FULL_GUARD)?;
            Ok((h, ground))
        }
        _ => {
            let model = build_model(k, q, repr)?;
            let h = assemble_effective(g, &model)?;
            let ground = effective_ground_states(&model, g.n(), EFFECTIVE_GUARD)?;
            Ok((h, ground))
        }
    }
}

/// Spectral gap of `H(G, n, k)` at local dimension `q`.
pub fn graph_gap(g: &Graph, k: usize, q: usize, repr: Representation, opts: &SolverOptions) -> Result<GapResult> {
    let (h, ground) = hamiltonian_with_ground(g, k, q, repr)?;
    spectra::spectral_gap(&h, &ground, opts)
}

/// Smallest representation that supports `k`.
pub fn default_representation(k: usize) -> Representation {
    if k == 2 {
        Representation::EffectiveK2
    } else {
        Representation::EffectiveQr
    }
}

/// `k = 2` star Hamiltonian as a spin model with the centre on site 0:
/// `(n-1)/2 - A σz_0 - B S_z - C σx_0 S_x - D σy_0 S_y`, `S = ½ Σ_{j>0} σ_j`,
/// `A = (n-1)q/(2(q²+1))`, `B = q/(q²+1)`, `C = q²/(q²+1)`, `D = 1/(q²+1)`.
#[derive(Clone, Debug)]
pub struct StarSpinHamiltonian {
    n: usize,
    q: usize,
    dim: usize,
}

pub fn star_spin_hamiltonian(n: usize, q: usize) -> Result<StarSpinHamiltonian> {
    check_q(q)?;
    if n < 2 {
        return Err(Error::InvalidSize(format!("a star needs at least 2 vertices, got {n}")));
    }
    let dim = crate::error::checked_dim(2, n, EFFECTIVE_GUARD)?;
    Ok(StarSpinHamiltonian { n, q, dim })
}

impl StarSpinHamiltonian {
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        spectra::to_dense(self, spectra::DENSE_LIMIT)
    }
}

impl LinearOperator for StarSpinHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        let qf = self.q as f64;
        let den = qf * qf + 1.0;
        let a = (n - 1) as f64 * qf / (2.0 * den);
        let b = qf / den;
        let cx = qf * qf / den;
        let cy = 1.0 / den;
        let z = |s: usize, site: usize| if s >> (n - 1 - site) & 1 == 0 { 1.0 } else { -1.0 };
        let centre = 1usize << (n - 1);
        for (s, out) in y.iter_mut().enumerate() {
            let mut acc = (n - 1) as f64 / 2.0 - a * z(s, 0);
            let mut off = 0.0;
            for j in 1..n {
                acc -= b * z(s, j) / 2.0;
                let t = s ^ centre ^ (1 << (n - 1 - j));
                // <s|σy σy|t> = -z0 zj for a double flip.
                off += (-cx / 2.0 + cy / 2.0 * z(s, 0) * z(s, j)) * x[t];
            }
            *out = acc * x[s] + off;
        }
    }

    fn norm_bound(&self) -> Option<f64> {
        Some((self.n - 1) as f64)
    }

    fn describe(&self) -> String {
        format!("k=2 star spin Hamiltonian n={} q={}", self.n, self.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permsym::gram_matrix;
    use crate::spectra::dense_spectrum;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn overlaps_reproduce_gram() {
        for (k, q) in [(2, 2), (2, 3), (3, 2), (3, 3), (4, 2)] {
            let m = build_qr_model(k, q).unwrap();
            let g = gram_matrix(k, q as u64).unwrap().entries;
            assert!((m.overlaps().transpose() * m.overlaps() - g).abs().max() < 1e-9, "k={k} q={q}");
        }
        let m = build_k2_model(3).unwrap();
        let g = gram_matrix(2, 3).unwrap().entries;
        assert!((m.overlaps().transpose() * m.overlaps() - g).abs().max() < 1e-12);
    }

    #[test]
    fn effective_dimensions() {
        assert_eq!(build_k2_model(2).unwrap().per_site_dim(), 2);
        assert_eq!(build_qr_model(2, 2).unwrap().per_site_dim(), 2);
        assert_eq!(build_qr_model(3, 2).unwrap().per_site_dim(), 5);
        assert_eq!(build_qr_model(3, 3).unwrap().per_site_dim(), 6);
        assert_eq!(build_qr_model(4, 2).unwrap().per_site_dim(), 14);
        assert!(matches!(build_model(3, 2, Representation::EffectiveK2), Err(Error::Invalid(_))));
    }

    #[test]
    fn single_edge_spectrum() {
        let m = build_k2_model(2).unwrap();
        let h = assemble_effective(&Graph::path(2).unwrap(), &m).unwrap();
        assert!(close(&dense_spectrum(&h).unwrap(), &[0.0, 0.0, 1.0, 1.0], 1e-12));
    }

    #[test]
    fn small_star_gaps() {
        for (q, want) in [(2, 0.6), (3, 0.7)] {
            let m = build_k2_model(q).unwrap();
            let h = assemble_effective(&Graph::star(3).unwrap(), &m).unwrap();
            let ev = dense_spectrum(&h).unwrap();
            assert!(ev[0].abs() < 1e-12 && ev[1].abs() < 1e-12);
            assert!((ev[2] - want).abs() < 1e-12, "q={q}: {}", ev[2]);
        }
    }

    #[test]
    fn k2_and_qr_models_agree() {
        let g = Graph::y(1, 2, 1).unwrap();
        for q in [2, 3] {
            let a = dense_spectrum(&assemble_effective(&g, &build_k2_model(q).unwrap()).unwrap()).unwrap();
            let b = dense_spectrum(&assemble_effective(&g, &build_qr_model(2, q).unwrap()).unwrap()).unwrap();
            assert!(close(&a, &b, 1e-10));
        }
    }

    #[test]
    fn effective_matches_full_spectrum_bottom() {
        let g = Graph::path(3).unwrap();
        let full = SiteHamiltonian::full(&g, 1, 2).unwrap();
        let eff = assemble_effective(&g, &build_qr_model(1, 2).unwrap()).unwrap();
        assert_eq!(eff.dim(), 1);
        assert!(dense_spectrum(&full).unwrap()[0].abs() < 1e-12);
        let gf = graph_gap(&Graph::path(3).unwrap(), 2, 2, Representation::Full, &SolverOptions::default()).unwrap();
        let ge = graph_gap(&Graph::path(3).unwrap(), 2, 2, Representation::EffectiveK2, &SolverOptions::default()).unwrap();
        assert!((gf.gap - ge.gap).abs() < 1e-10);
    }

    #[test]
    fn ground_states_are_annihilated() {
        let m = build_qr_model(3, 2).unwrap();
        let g = Graph::star(3).unwrap();
        let h = assemble_effective(&g, &m).unwrap();
        let ground = effective_ground_states(&m, 3, EFFECTIVE_GUARD).unwrap();
        assert_eq!(ground.len(), 6);
        spectra::check_ground(&h, &ground, 1e-10).unwrap();
    }

    #[test]
    fn spin_model_matches_effective_star() {
        for (n, q) in [(3, 2), (5, 2), (4, 3)] {
            let spin = dense_spectrum(&star_spin_hamiltonian(n, q).unwrap()).unwrap();
            let eff = dense_spectrum(&assemble_effective(&Graph::star(n).unwrap(), &build_k2_model(q).unwrap()).unwrap()).unwrap();
            assert!(close(&spin, &eff, 1e-10), "n={n} q={q}");
        }
    }

    #[test]
    fn representation_parsing() {
        assert_eq!("k2".parse::<Representation>().unwrap(), Representation::EffectiveK2);
        assert_eq!("full".parse::<Representation>().unwrap().to_string(), "full");
        assert!("dense".parse::<Representation>().is_err());
    }
}
