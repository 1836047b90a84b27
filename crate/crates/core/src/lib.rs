//! Eigenpair extraction for PSD matrices from an approximate subspace.
//!
//! Three extractors share one interface: Rayleigh-Ritz, SVD-extract and
//! Nyström. Around them sit synthetic test matrices, subspace generators with
//! controlled principal angles, a priori bounds, and the shift-and-flip remedy
//! for trailing eigenpairs.

pub mod bounds;
pub mod dense;
pub mod error;
pub mod extract;
pub mod matfile;
pub mod model;
pub mod random;
pub mod report;
pub mod subspaces;

pub use bounds::{BoundSet, ErrorMode};
pub use dense::{DenseMatrix, TriangularFactor};
pub use error::{Error, Result};
pub use extract::{EigenpairApprox, Method, SvdVariant};
pub use model::{
    make_psd, DenseOperator, PsdOperator, SpectrumKind, SpectrumSpec, SymmetricOperator,
};
pub use report::{ExtractionReport, MethodSet, ReportMeta, ReportRecord};
pub use subspaces::{OrthonormalBasis, Provenance, Side};
