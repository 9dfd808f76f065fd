//! Spectral gaps of the moment Hamiltonians `H(G, n, k)` of local random quantum
//! circuits on arbitrary connected graphs, together with the analytic bounds that
//! turn those gaps into approximate unitary design sizes.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: architectures, spanning trees, tree depth, compression and flattening.
//! * [`permsym`]: permutations, Gram and Weingarten matrices, the two-site Haar projector.
//! * [`operators`]: matrix-free Hamiltonians, moment operators, site permutations and
//!   Detectability-Lemma products on the full doubled space.
//! * [`effective`]: the same operators restricted to the per-site permutation span.
//! * [`spectra`]: dense and Lanczos eigensolvers, gap extraction by penalty deflation.
//! * [`bounds`]: Knabe, boosting, Detectability-Lemma chains, size conversions, certificates.
//! * [`semiclassical`]: the two-level semiclassical star model.

pub mod bounds;
pub mod effective;
mod error;
pub mod golden;
pub mod graph;
pub mod operators;
pub mod permsym;
pub mod report;
pub mod semiclassical;
pub mod spectra;
pub mod verify;

pub use bounds::{BoundCertificate, SizeBound};
pub use effective::EffectiveModel;
pub use error::{Error, Result};
pub use graph::{CompressedTree, DepthAssignment, Graph, RootedTree};
pub use operators::{LinearOperator, SiteHamiltonian};
pub use permsym::{GramMatrix, HaarProjector, Permutation};
pub use report::Check;
pub use spectra::GapResult;
