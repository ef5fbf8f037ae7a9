//! Numerical tolerances shared by every module.
//!
//! All membership, Hermiticity and positivity checks read their thresholds
//! from here so that a single record describes how strict the library is.

use serde::{Deserialize, Serialize};

/// Maximum entrywise deviation `|a - a†|` accepted for a Hermitian operator.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Smallest eigenvalue accepted for a positive semidefinite operator.
pub const PSD_TOL: f64 = 1e-9;

/// Allowed deviation of a density matrix trace from one.
pub const TRACE_TOL: f64 = 1e-9;

/// Tolerance used when comparing eigenvalues in the eigenvector tie-break.
pub const EIG_TIE_TOL: f64 = 1e-12;

/// Snapshot of the fixed tolerances, emitted in result provenance blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub hermitian: f64,
    pub psd: f64,
    pub trace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: HERMITIAN_TOL,
            psd: PSD_TOL,
            trace: TRACE_TOL,
        }
    }
}
