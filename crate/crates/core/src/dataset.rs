//! Joint samples of `d` (possibly multidimensional) variables.

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;
use crate::rng::StreamRng;

/// `n_total` i.i.d. joint draws of `d` variables. Variable `j` is stored as an
/// `n_total x dim_j` matrix; row `a` of every variable belongs to draw `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    variables: Vec<Matrix>,
}

impl Dataset {
    pub fn new(variables: Vec<Matrix>) -> Result<Self> {
        let first = variables
            .first()
            .ok_or_else(|| invalid("dataset needs at least one variable"))?;
        let n_total = first.rows();
        for (j, v) in variables.iter().enumerate() {
            if v.rows() != n_total {
                return Err(Error::DimensionMismatch {
                    expected: n_total,
                    got: v.rows(),
                });
            }
            if v.cols() == 0 {
                return Err(invalid(format!("variable {} has dimension 0", j + 1)));
            }
            if !v.all_finite() {
                return Err(invalid(format!(
                    "variable {} contains non-finite values",
                    j + 1
                )));
            }
        }
        Ok(Self { variables })
    }

    /// One-dimensional variables given as columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        Self::new(columns.iter().map(|c| Matrix::column(c)).collect())
    }

    pub fn d(&self) -> usize {
        self.variables.len()
    }

    pub fn n_total(&self) -> usize {
        self.variables[0].rows()
    }

    pub fn variables(&self) -> &[Matrix] {
        &self.variables
    }

    pub fn variable(&self, j: usize) -> &Matrix {
        &self.variables[j]
    }

    pub fn into_variables(self) -> Vec<Matrix> {
        self.variables
    }

    /// The sub-dataset made of the given variables (0-based), in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut vars = Vec::with_capacity(indices.len());
        for &i in indices {
            let v = self
                .variables
                .get(i)
                .ok_or_else(|| invalid(format!("variable index {} out of range", i + 1)))?;
            vars.push(v.clone());
        }
        Self::new(vars)
    }

    /// Same draws, reordered by `order`.
    pub fn reorder_samples(&self, order: &[usize]) -> Self {
        Self {
            variables: self.variables.iter().map(|v| v.select_rows(order)).collect(),
        }
    }

    /// One seeded shuffle of the draws (same permutation for every variable).
    pub fn shuffled(&self, seed: u64) -> Self {
        let order = StreamRng::new(seed, 0x5a17).permutation(self.n_total());
        self.reorder_samples(&order)
    }

    /// Half-sample size used by the split statistics. An odd trailing draw is
    /// dropped with a warning.
    pub fn half_size(&self) -> Result<usize> {
        let n_total = self.n_total();
        if n_total < 4 {
            return Err(Error::Split(format!(
                "need at least 4 samples to form two halves of size >= 2, got {n_total}"
            )));
        }
        if n_total % 2 == 1 {
            log::warn!("odd sample count {n_total}: dropping the last sample before splitting");
        }
        Ok(n_total / 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_nonfinite() {
        let a = Matrix::column(&[1.0, 2.0, 3.0]);
        let b = Matrix::column(&[1.0, 2.0]);
        assert!(matches!(
            Dataset::new(vec![a.clone(), b]),
            Err(Error::DimensionMismatch { .. })
        ));
        let c = Matrix::column(&[1.0, f64::NAN, 3.0]);
        assert!(Dataset::new(vec![a, c]).is_err());
        assert!(Dataset::new(vec![]).is_err());
    }

    #[test]
    fn half_size_drops_odd_tail() {
        let ds = Dataset::from_columns(&[vec![0.0; 9], vec![1.0; 9]]).unwrap();
        assert_eq!(ds.half_size().unwrap(), 4);
        let tiny = Dataset::from_columns(&[vec![0.0; 3]]).unwrap();
        assert!(matches!(tiny.half_size(), Err(Error::Split(_))));
    }

    #[test]
    fn shuffle_keeps_rows_aligned() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 10.0 * x).collect();
        let ds = Dataset::from_columns(&[xs, ys]).unwrap().shuffled(3);
        for a in 0..20 {
            assert_eq!(ds.variable(1)[(a, 0)], 10.0 * ds.variable(0)[(a, 0)]);
        }
    }
}
