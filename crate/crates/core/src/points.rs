//! Dense row-major point storage.

use crate::error::{Error, Result};

/// An `n x d` matrix of real points, stored row-major, with optional column names.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
    names: Option<Vec<String>>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
            names: None,
        }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            dim,
            data: Vec::with_capacity(dim * rows),
            names: None,
        }
    }

    /// Builds a point set from a flat row-major buffer.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::BadParams("dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len() % dim,
            });
        }
        Ok(Self {
            dim,
            data,
            names: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or(Error::EmptyData)?;
        let mut set = Self::with_capacity(dim, rows.len());
        for r in rows {
            set.push(r.as_ref())?;
        }
        Ok(set)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: names.len(),
            });
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub(crate) fn set_names(&mut self, names: Option<Vec<String>>) {
        self.names = names;
    }

    /// Column names, falling back to `x1..xd`.
    pub fn column_names(&self) -> Vec<String> {
        match &self.names {
            Some(n) => n.clone(),
            None => (1..=self.dim).map(|i| format!("x{i}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, ids: &[usize]) -> PointSet {
        let mut out = PointSet::with_capacity(self.dim, ids.len());
        for &i in ids {
            out.data.extend_from_slice(self.row(i));
        }
        out.names = self.names.clone();
        out
    }

    /// Concatenation of two sets with the same dimension.
    pub fn concat(&self, other: &PointSet) -> Result<PointSet> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(PointSet {
            dim: self.dim,
            data,
            names: self.names.clone(),
        })
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for r in self.rows() {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        let n = self.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Covariance with the `1/n` normalizer, row-major `d x d`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mean = self.mean();
        let mut cov = vec![0.0; d * d];
        let mut centered = vec![0.0; d];
        for r in self.rows() {
            for j in 0..d {
                centered[j] = r[j] - mean[j];
            }
            for a in 0..d {
                for b in a..d {
                    cov[a * d + b] += centered[a] * centered[b];
                }
            }
        }
        let n = self.len() as f64;
        for a in 0..d {
            for b in a..d {
                let v = cov[a * d + b] / n;
                cov[a * d + b] = v;
                cov[b * d + a] = v;
            }
        }
        cov
    }

    /// Per-column `(min, max)`.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for r in self.rows() {
            for (lim, &x) in b.iter_mut().zip(r) {
                lim.0 = lim.0.min(x);
                lim.1 = lim.1.max(x);
            }
        }
        b
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_uses_population_normalizer() {
        let x = PointSet::from_rows(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]).unwrap();
        assert_eq!(x.mean(), vec![1.0, 1.0]);
        assert_eq!(x.covariance(), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn push_rejects_wrong_width() {
        let mut x = PointSet::new(2);
        assert!(matches!(
            x.push(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }
}
