use crate::error::{Error, Result};

/// A binary feature vector stored as its sorted set of active indices.
///
/// Every active index holds the value 1.0; every other index is 0.0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparseBinaryFeatures {
    dim: usize,
    active: Vec<usize>,
}

impl SparseBinaryFeatures {
    /// Builds a feature vector from arbitrary indices. Indices are sorted and
    /// duplicates collapse to a single active entry.
    pub fn new(dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("feature dimension must be positive"));
        }
        let mut active: Vec<usize> = indices.into_iter().collect();
        if let Some(&bad) = active.iter().find(|&&i| i >= dim) {
            return Err(Error::config(format!(
                "active index {bad} out of range for dimension {dim}"
            )));
        }
        active.sort_unstable();
        active.dedup();
        Ok(SparseBinaryFeatures { dim, active })
    }

    pub fn empty(dim: usize) -> Self {
        assert!(dim > 0, "feature dimension must be positive");
        SparseBinaryFeatures {
            dim,
            active: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.active.binary_search(&index).is_ok()
    }

    pub fn value(&self, index: usize) -> f64 {
        if self.contains(index) {
            1.0
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim];
        for &i in &self.active {
            dense[i] = 1.0;
        }
        dense
    }

    /// Dot product with a weight vector, summing only over active indices.
    pub fn dot(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: w.len(),
            });
        }
        Ok(self.active.iter().map(|&i| w[i]).sum())
    }
}

/// Linear value estimate `wᵀφ`.
pub fn predict(w: &[f64], phi: &SparseBinaryFeatures) -> Result<f64> {
    phi.dot(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_sums_active_weights() {
        let phi = SparseBinaryFeatures::new(2, [0, 1]).unwrap();
        assert_eq!(predict(&[1.0, 2.0], &phi).unwrap(), 3.0);
        assert_eq!(predict(&[1.0, 2.0], &SparseBinaryFeatures::empty(2)).unwrap(), 0.0);
    }

    #[test]
    fn rejects_out_of_range_and_dedups() {
        assert!(SparseBinaryFeatures::new(3, [3]).is_err());
        assert!(SparseBinaryFeatures::new(0, []).is_err());
        let phi = SparseBinaryFeatures::new(5, [4, 1, 4, 2]).unwrap();
        assert_eq!(phi.active(), &[1, 2, 4]);
        assert_eq!(phi.value(4), 1.0);
        assert_eq!(phi.value(3), 0.0);
    }

    #[test]
    fn predict_checks_dimension() {
        let phi = SparseBinaryFeatures::new(3, [0]).unwrap();
        assert!(matches!(
            predict(&[1.0, 2.0], &phi),
            Err(Error::DimensionMismatch { expected: 3, actual: 2 })
        ));
    }
}
