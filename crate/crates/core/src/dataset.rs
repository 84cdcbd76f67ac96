use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Point cloud with optional per-point class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub name: String,
    features: DenseMatrix<T>,
    labels: Vec<Option<usize>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(name: impl Into<String>, features: DenseMatrix<T>, labels: Vec<Option<usize>>) -> Result<Self> {
        if features.rows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "dataset needs at least 2 points, got {}",
                features.rows()
            )));
        }
        if features.cols() < 1 {
            return Err(Error::InvalidArgument("dataset needs at least one feature".into()));
        }
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                got: labels.len(),
            });
        }
        if let Some(i) = features.data().iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite feature at point {}",
                i / features.cols()
            )));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
        })
    }

    pub fn unlabeled(name: impl Into<String>, features: DenseMatrix<T>) -> Result<Self> {
        let n = features.rows();
        Self::new(name, features, vec![None; n])
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &DenseMatrix<T> {
        &self.features
    }

    pub fn point(&self, i: usize) -> &[T] {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// One more than the largest label present; zero when nothing is labeled.
    pub fn n_classes(&self) -> usize {
        self.labels.iter().flatten().max().map_or(0, |&k| k + 1)
    }

    /// Ground truth for every point, if every point carries a label.
    pub fn ground_truth(&self) -> Option<Vec<usize>> {
        self.labels.iter().copied().collect()
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            name: self.name.clone(),
            features: self.features.map(|x| U::of(x.as_f64())),
            labels: self.labels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_shape() {
        let one = DenseMatrix::from_rows(&[[1.0]]).unwrap();
        assert!(Dataset::unlabeled("x", one).is_err());
        let two = DenseMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(Dataset::new("x", two.clone(), vec![Some(0)]).is_err());
        let d = Dataset::new("x", two, vec![Some(0), Some(2)]).unwrap();
        assert_eq!(d.n_classes(), 3);
        assert_eq!(d.ground_truth(), Some(vec![0, 2]));
    }
}
