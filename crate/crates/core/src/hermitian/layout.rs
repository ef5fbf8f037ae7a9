use serde::{Deserialize, Serialize};

use crate::error::{Result, RmpError};

/// One tensor factor of a composite Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labeled tensor factors. The first factor is the most
/// significant digit of the computational-basis index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct SubsystemLayout {
    factors: Vec<Factor>,
}

impl<'de> Deserialize<'de> for SubsystemLayout {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let factors = Vec::<Factor>::deserialize(d)?;
        SubsystemLayout::new(factors).map_err(serde::de::Error::custom)
    }
}

impl SubsystemLayout {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            if f.dim == 0 {
                return Err(RmpError::InvalidLayout(format!("factor `{}` has dimension 0", f.label)));
            }
            if factors[..i].iter().any(|g| g.label == f.label) {
                return Err(RmpError::LabelCollision(f.label.clone()));
            }
        }
        Ok(Self { factors })
    }

    /// Layout from `(label, dim)` pairs.
    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(label, dim)| Factor {
                    label: label.into(),
                    dim,
                })
                .collect(),
        )
    }

    /// Layout of qubits with the given labels.
    pub fn qubits(labels: &[&str]) -> Self {
        Self::from_pairs(labels.iter().map(|l| (*l, 2))).expect("qubit labels must be distinct")
    }

    /// Zero-factor layout of the scalars (dimension 1).
    pub fn trivial() -> Self {
        Self { factors: vec![] }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.label.as_str()).collect()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.label == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        self.position(label)
            .map(|p| self.factors[p].dim)
            .ok_or_else(|| RmpError::UnknownLabel(label.to_string()))
    }

    /// Concatenation `self ⊗ other`.
    pub fn concat(&self, other: &SubsystemLayout) -> Result<Self> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Self::new(factors)
    }

    /// Boolean mask over factors selecting the given labels.
    pub fn mask<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.factors.len()];
        for l in labels {
            let p = self
                .position(l.as_ref())
                .ok_or_else(|| RmpError::UnknownLabel(l.as_ref().to_string()))?;
            mask[p] = true;
        }
        Ok(mask)
    }

    /// Sub-layout of the given labels, kept in this layout's order.
    pub fn restrict<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let mask = self.mask(labels)?;
        Ok(self.select(&mask))
    }

    pub(crate) fn select(&self, mask: &[bool]) -> Self {
        Self {
            factors: self
                .factors
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(f, _)| f.clone())
                .collect(),
        }
    }

    /// Labels of this layout not present in `labels`.
    pub fn complement<S: AsRef<str>>(&self, labels: &[S]) -> Vec<String> {
        self.factors
            .iter()
            .filter(|f| !labels.iter().any(|l| l.as_ref() == f.label))
            .map(|f| f.label.clone())
            .collect()
    }

    /// True when both layouts have the same factors, ignoring order.
    pub fn same_factors(&self, other: &SubsystemLayout) -> bool {
        self.len() == other.len() && self.factors.iter().all(|f| other.factors.contains(f))
    }
}

/// A nonempty set of factor labels, used to designate marginals, targets
/// and the transposed side of a bipartition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsystemSet {
    labels: Vec<String>,
}

impl SubsystemSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(RmpError::InvalidLayout("empty subsystem set".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(RmpError::LabelCollision(l.clone()));
            }
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn is_subset_of(&self, layout: &SubsystemLayout) -> bool {
        self.labels.iter().all(|l| layout.contains(l))
    }

    pub fn check_in(&self, layout: &SubsystemLayout) -> Result<()> {
        match self.labels.iter().find(|l| !layout.contains(l)) {
            Some(l) => Err(RmpError::UnknownLabel(l.clone())),
            None => Ok(()),
        }
    }

    /// The sub-layout of `layout` spanned by this set, in layout order.
    pub fn layout_in(&self, layout: &SubsystemLayout) -> Result<SubsystemLayout> {
        layout.restrict(&self.labels)
    }

    pub fn union(&self, other: &SubsystemSet) -> SubsystemSet {
        let mut labels = self.labels.clone();
        for l in &other.labels {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
        SubsystemSet { labels }
    }

    pub fn same_members(&self, other: &SubsystemSet) -> bool {
        self.labels.len() == other.labels.len() && self.labels.iter().all(|l| other.contains(l))
    }
}

impl std::fmt::Display for SubsystemSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.labels.join(""))
    }
}

/// Mixed-radix bookkeeping for a layout: strides of each factor.
pub(crate) struct Radix {
    pub dims: Vec<usize>,
    pub strides: Vec<usize>,
    pub total: usize,
}

impl Radix {
    pub fn new(dims: &[usize]) -> Self {
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        Self {
            dims: dims.to_vec(),
            strides,
            total: dims.iter().product(),
        }
    }

    pub fn digit(&self, index: usize, k: usize) -> usize {
        (index / self.strides[k]) % self.dims[k]
    }

    /// Maps every full index to its index over the masked factors and over
    /// the unmasked factors.
    pub fn split(&self, mask: &[bool]) -> (Vec<usize>, Vec<usize>) {
        let mut kept = vec![0; self.total];
        let mut rest = vec![0; self.total];
        for idx in 0..self.total {
            let (mut a, mut b) = (0, 0);
            for k in 0..self.dims.len() {
                let d = self.digit(idx, k);
                if mask[k] {
                    a = a * self.dims[k] + d;
                } else {
                    b = b * self.dims[k] + d;
                }
            }
            kept[idx] = a;
            rest[idx] = b;
        }
        (kept, rest)
    }
}
