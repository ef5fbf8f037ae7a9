//! Index-map implementations of the standard tensor-network operations.
//!
//! Raw versions act on any square matrix with a dimension list so that the
//! solver's modeling layer can apply them to coefficient matrices.

use super::layout::{Radix, SubsystemLayout, SubsystemSet};
use super::operator::{CMat, HermitianOperator};
use crate::error::{Result, RmpError};

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Keeps the factors flagged in `keep`, tracing out the rest.
pub fn partial_trace_raw(m: &CMat, dims: &[usize], keep: &[bool]) -> CMat {
    let r = Radix::new(dims);
    let dk: usize = dims.iter().zip(keep).filter(|(_, &k)| k).map(|(d, _)| d).product();
    let (kept, rest) = r.split(keep);
    let mut out = CMat::zeros(dk, dk);
    // Group indices by their traced-out part so each block is visited once.
    let dr = r.total / dk;
    let mut groups: Vec<Vec<usize>> = vec![Vec::with_capacity(dk); dr];
    for idx in 0..r.total {
        groups[rest[idx]].push(idx);
    }
    for g in &groups {
        for &i in g {
            for &j in g {
                out[(kept[i], kept[j])] += m[(i, j)];
            }
        }
    }
    out
}

/// Transposes the factors flagged in `part`.
pub fn partial_transpose_raw(m: &CMat, dims: &[usize], part: &[bool]) -> CMat {
    let r = Radix::new(dims);
    let n = r.total;
    // digit contribution of transposed factors for each index
    let tpart: Vec<usize> = (0..n)
        .map(|idx| {
            (0..dims.len())
                .filter(|&k| part[k])
                .map(|k| r.digit(idx, k) * r.strides[k])
                .sum()
        })
        .collect();
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let ni = i - tpart[i] + tpart[j];
            let nj = j - tpart[j] + tpart[i];
            out[(ni, nj)] = m[(i, j)];
        }
    }
    out
}

/// Reorders factors: new factor `k` is old factor `perm[k]`.
pub fn permute_raw(m: &CMat, dims: &[usize], perm: &[usize]) -> CMat {
    let old = Radix::new(dims);
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let new = Radix::new(&new_dims);
    let map: Vec<usize> = (0..old.total)
        .map(|idx| {
            perm.iter()
                .enumerate()
                .map(|(k, &p)| old.digit(idx, p) * new.strides[k])
                .sum()
        })
        .collect();
    let mut out = CMat::zeros(old.total, old.total);
    for i in 0..old.total {
        for j in 0..old.total {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    out
}

/// Index permutation taking `from` factor order to `to` factor order.
pub(crate) fn permutation_between(from: &SubsystemLayout, to: &SubsystemLayout) -> Result<Vec<usize>> {
    if !from.same_factors(to) {
        return Err(RmpError::DimensionMismatch(format!(
            "layouts {:?} and {:?} are not permutations of each other",
            from.labels(),
            to.labels()
        )));
    }
    Ok(to
        .labels()
        .iter()
        .map(|l| from.position(l).expect("checked by same_factors"))
        .collect())
}

/// `m ⊗ I` on the factors of `full` missing from `layout`, reordered to `full`.
pub fn extend_identity_raw(m: &CMat, layout: &SubsystemLayout, full: &SubsystemLayout) -> Result<CMat> {
    for l in layout.labels() {
        if !full.contains(l) {
            return Err(RmpError::UnknownLabel(l.to_string()));
        }
    }
    let missing: Vec<String> = full.complement(&layout.labels());
    let rest = full.restrict(&missing)?;
    let joint = layout.concat(&rest)?;
    let ext = kron(m, &CMat::identity(rest.total_dim(), rest.total_dim()));
    let perm = permutation_between(&joint, full)?;
    Ok(permute_raw(&ext, &joint.dims(), &perm))
}

/// Tensor product on the concatenated layout.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    let layout = a.layout().concat(b.layout())?;
    Ok(HermitianOperator::from_hermitian(layout, kron(a.matrix(), b.matrix())))
}

/// Reduction onto `keep`, which retains the original factor order.
pub fn partial_trace(a: &HermitianOperator, keep: &SubsystemSet) -> Result<HermitianOperator> {
    let mask = a.layout().mask(keep.labels())?;
    let out = partial_trace_raw(a.matrix(), &a.layout().dims(), &mask);
    Ok(HermitianOperator::from_hermitian(a.layout().select(&mask), out))
}

/// Traces out the listed labels.
pub fn trace_out<S: AsRef<str>>(a: &HermitianOperator, labels: &[S]) -> Result<HermitianOperator> {
    let mut mask = vec![true; a.layout().len()];
    for l in labels {
        let p = a
            .layout()
            .position(l.as_ref())
            .ok_or_else(|| RmpError::UnknownLabel(l.as_ref().to_string()))?;
        mask[p] = false;
    }
    let out = partial_trace_raw(a.matrix(), &a.layout().dims(), &mask);
    Ok(HermitianOperator::from_hermitian(a.layout().select(&mask), out))
}

pub fn partial_transpose(a: &HermitianOperator, part: &SubsystemSet) -> Result<HermitianOperator> {
    let mask = a.layout().mask(part.labels())?;
    let out = partial_transpose_raw(a.matrix(), &a.layout().dims(), &mask);
    Ok(HermitianOperator::from_hermitian(a.layout().clone(), out))
}

/// Same operator expressed in the factor order of `to`.
pub fn reorder(a: &HermitianOperator, to: &SubsystemLayout) -> Result<HermitianOperator> {
    let perm = permutation_between(a.layout(), to)?;
    let out = permute_raw(a.matrix(), &a.layout().dims(), &perm);
    Ok(HermitianOperator::from_hermitian(to.clone(), out))
}

/// `a ⊗ I` on the rest of `full`.
pub fn extend_identity(a: &HermitianOperator, full: &SubsystemLayout) -> Result<HermitianOperator> {
    let out = extend_identity_raw(a.matrix(), a.layout(), full)?;
    Ok(HermitianOperator::from_hermitian(full.clone(), out))
}

pub fn trace_norm(a: &HermitianOperator) -> Result<f64> {
    a.trace_norm()
}
