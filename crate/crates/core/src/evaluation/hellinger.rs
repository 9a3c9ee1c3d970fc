use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::points::PointSet;

/// Equal-width joint binning. Counts are kept sparse: only occupied joint
/// bins are ever materialized, so high `d` stays feasible. Ordered maps keep
/// the summation order, and hence every bit of the result, reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningSpec {
    /// Per-dimension edges. A constant dimension has the single degenerate
    /// bin `[c, c]`.
    pub edges: Vec<Vec<f64>>,
}

impl BinningSpec {
    pub fn dim(&self) -> usize {
        self.edges.len()
    }

    pub fn bins_in(&self, dim: usize) -> usize {
        (self.edges[dim].len() - 1).max(1)
    }

    /// Bin index along one dimension; out-of-range values clamp to the
    /// boundary bins.
    pub fn index_1d(&self, dim: usize, v: f64) -> usize {
        let e = &self.edges[dim];
        let bins = self.bins_in(dim);
        let (lo, hi) = (e[0], e[e.len() - 1]);
        if bins == 1 || !(hi > lo) {
            return 0;
        }
        let width = (hi - lo) / bins as f64;
        let mut i = ((v - lo) / width).floor();
        if !(i >= 0.0) {
            i = 0.0;
        }
        let mut i = (i as usize).min(bins - 1);
        // Reconcile arithmetic rounding with the stored edges.
        while i > 0 && v < e[i] {
            i -= 1;
        }
        while i + 1 < bins && v >= e[i + 1] {
            i += 1;
        }
        i
    }

    pub fn key(&self, p: &[f64]) -> Vec<u32> {
        p.iter()
            .enumerate()
            .map(|(j, &v)| self.index_1d(j, v) as u32)
            .collect()
    }

    /// Sparse joint histogram of `y`.
    pub fn counts(&self, y: &PointSet) -> BTreeMap<Vec<u32>, u64> {
        let mut h = BTreeMap::new();
        for r in y.rows() {
            *h.entry(self.key(r)).or_insert(0) += 1;
        }
        h
    }
}

/// Equal-width edges over the `[min, max]` range of `data`, per dimension.
pub fn make_binning(data: &PointSet, bins_per_dim: usize) -> Result<BinningSpec> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if bins_per_dim == 0 {
        return Err(Error::BadParams("bins_per_dim must be at least 1".into()));
    }
    let edges = data
        .bounds()
        .into_iter()
        .map(|(lo, hi)| {
            if !(hi > lo) {
                return vec![lo, hi];
            }
            let w = (hi - lo) / bins_per_dim as f64;
            let mut e: Vec<f64> = (0..bins_per_dim).map(|i| lo + w * i as f64).collect();
            e.push(hi);
            e
        })
        .collect();
    Ok(BinningSpec { edges })
}

/// Binning over the union of two sets, so both share one spec.
pub fn make_union_binning(y: &PointSet, z: &PointSet, bins_per_dim: usize) -> Result<BinningSpec> {
    if y.is_empty() || z.is_empty() {
        return Err(Error::EmptyData);
    }
    make_binning(&y.concat(z)?, bins_per_dim)
}

/// Binned Hellinger distance, summed over the sparse union of occupied bins.
pub fn hellinger(y: &PointSet, z: &PointSet, binning: &BinningSpec) -> Result<f64> {
    if y.is_empty() || z.is_empty() {
        return Err(Error::EmptyData);
    }
    for set in [y, z] {
        if set.dim() != binning.dim() {
            return Err(Error::DimensionMismatch {
                expected: binning.dim(),
                got: set.dim(),
            });
        }
    }
    let cy = binning.counts(y);
    let cz = binning.counts(z);
    Ok(hellinger_from_counts(&cy, y.len(), &cz, z.len()))
}

pub(crate) fn hellinger_from_counts(
    cy: &BTreeMap<Vec<u32>, u64>,
    ny: usize,
    cz: &BTreeMap<Vec<u32>, u64>,
    nz: usize,
) -> f64 {
    let (ny, nz) = (ny as f64, nz as f64);
    let term = |a: u64, b: u64| {
        let diff = (a as f64 / ny).sqrt() - (b as f64 / nz).sqrt();
        diff * diff
    };
    let mut sum = 0.0;
    let mut iy = cy.iter().peekable();
    let mut iz = cz.iter().peekable();
    loop {
        match (iy.peek(), iz.peek()) {
            (Some((ky, &a)), Some((kz, &b))) => match ky.cmp(kz) {
                std::cmp::Ordering::Less => {
                    sum += term(a, 0);
                    iy.next();
                }
                std::cmp::Ordering::Greater => {
                    sum += term(0, b);
                    iz.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += term(a, b);
                    iy.next();
                    iz.next();
                }
            },
            (Some((_, &a)), None) => {
                sum += term(a, 0);
                iy.next();
            }
            (None, Some((_, &b))) => {
                sum += term(0, b);
                iz.next();
            }
            (None, None) => break,
        }
    }
    (0.5 * sum).sqrt().min(1.0)
}

/// Hellinger distance with a fresh binning over `y` union `z`.
pub fn hellinger_union(y: &PointSet, z: &PointSet, bins_per_dim: usize) -> Result<f64> {
    let b = make_union_binning(y, z, bins_per_dim)?;
    hellinger(y, z, &b)
}
