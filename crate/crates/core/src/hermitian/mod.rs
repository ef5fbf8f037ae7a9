//! Hermitian linear algebra over labeled tensor-product spaces.

mod eig;
mod embed;
mod layout;
mod operator;
mod ops;
pub mod states;

pub use eig::{eig_hermitian_mat, Eigen};
pub use embed::{embedding_adjoint, real_embedding, real_embedding_mat, smat, svec, svec_len};
pub use layout::{Factor, SubsystemLayout, SubsystemSet};
pub(crate) use operator::{c, entries_from_json, entries_to_json, hs_inner};
pub use operator::{hermitian_part, hermiticity_defect, max_abs_diff, CMat, CVec, DensityMatrix, HermitianOperator};
pub(crate) use ops::permutation_between;
pub use ops::{
    extend_identity, extend_identity_raw, kron, partial_trace, partial_trace_raw, partial_transpose,
    partial_transpose_raw, permute_raw, reorder, tensor, trace_norm, trace_out,
};

/// Eigendecomposition with the crate's ordering and phase convention.
pub fn eig_hermitian(a: &HermitianOperator) -> crate::error::Result<Eigen> {
    a.eig()
}
