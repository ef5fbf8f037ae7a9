//! Frequently used states and operators.

use super::layout::SubsystemLayout;
use super::operator::{c, CMat, CVec, DensityMatrix};

fn basis_vec(dim: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[k] = c(1.0, 0.0);
    v
}

/// `(|00⟩ + |11⟩)/√2`.
pub fn phi_plus(a: &str, b: &str) -> DensityMatrix {
    max_entangled(a, b, 2)
}

/// `Σₖ |kk⟩/√d`.
pub fn max_entangled(a: &str, b: &str, d: usize) -> DensityMatrix {
    let l = SubsystemLayout::from_pairs([(a, d), (b, d)]).expect("distinct labels");
    let mut v = CVec::zeros(d * d);
    for k in 0..d {
        v[k * d + k] = c(1.0, 0.0);
    }
    DensityMatrix::pure(l, &v).expect("nonzero vector")
}

/// `(|01⟩ + |10⟩)/√2`, the symmetric single-excitation state.
pub fn single_excitation_vec() -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_vec(vec![c(0.0, 0.0), c(s, 0.0), c(s, 0.0), c(0.0, 0.0)])
}

/// `(|001⟩ + |010⟩ + |100⟩)/√3`.
pub fn w_vec() -> CVec {
    let mut v = CVec::zeros(8);
    for k in [1, 2, 4] {
        v[k] = c(1.0, 0.0);
    }
    v.unscale(3f64.sqrt())
}

pub fn w_state(labels: [&str; 3]) -> DensityMatrix {
    DensityMatrix::pure(SubsystemLayout::qubits(&labels), &w_vec()).expect("nonzero vector")
}

/// Two-body marginal of the W state, `(2/3)|ψ⟩⟨ψ| + (1/3)|00⟩⟨00|`
/// with `|ψ⟩ = (|01⟩ + |10⟩)/√2`.
pub fn w_marginal(a: &str, b: &str) -> DensityMatrix {
    let psi = single_excitation_vec();
    let mut m = (&psi * psi.adjoint()).scale(2.0 / 3.0);
    m[(0, 0)] += c(1.0 / 3.0, 0.0);
    DensityMatrix::from_matrix(SubsystemLayout::qubits(&[a, b]), m).expect("valid state")
}

pub fn basis_state(layout: SubsystemLayout, k: usize) -> DensityMatrix {
    let d = layout.total_dim();
    DensityMatrix::pure(layout, &basis_vec(d, k)).expect("nonzero vector")
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}
