//! Exact Euclidean k-nearest neighbors by all-pairs distance computation.
//!
//! Build cost is `O(d n^2)`. Ties in distance are broken by ascending point
//! index so results are deterministic.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::points::PointSet;

/// Sorted k-NN lists for every point of a sample, self excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnIndex {
    k: usize,
    ids: Vec<usize>,
    dists: Vec<f64>,
}

impl KnnIndex {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.ids.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Neighbor ids of point `i`, nearest first.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.ids[i * self.k..(i + 1) * self.k]
    }

    /// Distances matching [`KnnIndex::neighbors`].
    pub fn distances(&self, i: usize) -> &[f64] {
        &self.dists[i * self.k..(i + 1) * self.k]
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Keeps the `k` smallest `(squared distance, id)` pairs, sorted.
fn smallest_k(cands: &mut Vec<(f64, usize)>, k: usize) {
    if k < cands.len() {
        cands.select_nth_unstable_by(k - 1, by_distance_then_index);
        cands.truncate(k);
    }
    cands.sort_unstable_by(by_distance_then_index);
}

fn row_neighbors(x: &PointSet, i: usize, k: usize, ids: &mut [usize], dists: &mut [f64]) {
    let xi = x.row(i);
    let mut cands: Vec<(f64, usize)> = x
        .rows()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, xj)| (squared_distance(xi, xj), j))
        .collect();
    smallest_k(&mut cands, k);
    for (slot, (d2, j)) in cands.into_iter().enumerate() {
        ids[slot] = j;
        dists[slot] = d2.sqrt();
    }
}

/// Builds the exact k-NN lists of every point in `x`.
pub fn build_knn(x: &PointSet, k: usize) -> Result<KnnIndex> {
    let n = x.len();
    if k == 0 || k >= n {
        if k == 0 {
            return Err(Error::BadParams(
                "k must be at least 1 to build an index".into(),
            ));
        }
        return Err(Error::KTooLarge { k, n });
    }
    let mut ids = vec![0usize; n * k];
    let mut dists = vec![0.0; n * k];

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ids.par_chunks_exact_mut(k)
            .zip(dists.par_chunks_exact_mut(k))
            .enumerate()
            .for_each(|(i, (ri, rd))| row_neighbors(x, i, k, ri, rd));
    }
    #[cfg(not(feature = "parallel"))]
    for (i, (ri, rd)) in ids
        .chunks_exact_mut(k)
        .zip(dists.chunks_exact_mut(k))
        .enumerate()
    {
        row_neighbors(x, i, k, ri, rd);
    }

    Ok(KnnIndex { k, ids, dists })
}

/// Exact `k` nearest points of `x` to an external query point `q`.
pub fn query_neighbors(x: &PointSet, q: &[f64], k: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    if q.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: q.len(),
        });
    }
    if k > x.len() {
        return Err(Error::KTooLarge { k, n: x.len() });
    }
    if k == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut cands: Vec<(f64, usize)> = x
        .rows()
        .enumerate()
        .map(|(j, xj)| (squared_distance(q, xj), j))
        .collect();
    smallest_k(&mut cands, k);
    Ok(cands.into_iter().map(|(d2, j)| (j, d2.sqrt())).unzip())
}

/// Distance from point `i` to its k-th nearest neighbor.
pub fn kth_distance(idx: &KnnIndex, i: usize) -> Result<f64> {
    if i >= idx.len() {
        return Err(Error::BadIndex {
            index: i,
            len: idx.len(),
        });
    }
    Ok(idx.distances(i)[idx.k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn line(v: &[f64]) -> PointSet {
        PointSet::from_flat(1, v.to_vec()).unwrap()
    }

    /// Full re-sort of every other point; independent of the selection path.
    fn oracle(x: &PointSet, i: usize, k: usize) -> (Vec<usize>, Vec<f64>) {
        let mut all: Vec<(usize, f64)> = (0..x.len())
            .filter(|&j| j != i)
            .map(|j| {
                let d: f64 = x
                    .row(i)
                    .iter()
                    .zip(x.row(j))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                (j, d)
            })
            .collect();
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(k);
        all.into_iter().map(|(j, d)| (j, d.sqrt())).unzip()
    }

    #[test]
    fn small_line() {
        let x = line(&[0.0, 1.0, 3.0, 7.0]);
        let idx = build_knn(&x, 2).unwrap();
        assert_eq!(idx.neighbors(0), &[1, 2]);
        assert_eq!(idx.distances(0), &[1.0, 3.0]);
        assert_eq!(kth_distance(&idx, 0).unwrap(), 3.0);
        let idx3 = build_knn(&x, 3).unwrap();
        assert_eq!(kth_distance(&idx3, 0).unwrap(), 7.0);
    }

    #[test]
    fn exhaustive_k() {
        let x = line(&[0.0, 1.0, 3.0, 7.0]);
        let idx = build_knn(&x, 3).unwrap();
        assert_eq!(idx.neighbors(2), &[1, 0, 3]);
        assert_eq!(idx.distances(2), &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn duplicates_are_mutual_nearest() {
        let x = line(&[5.0, 5.0, 9.0]);
        let idx = build_knn(&x, 1).unwrap();
        assert_eq!(idx.neighbors(0), &[1]);
        assert_eq!(idx.neighbors(1), &[0]);
        assert_eq!(kth_distance(&idx, 0).unwrap(), 0.0);
    }

    #[test]
    fn k_bounds() {
        let x = line(&[0.0, 1.0, 3.0, 7.0]);
        assert!(matches!(
            build_knn(&x, 4),
            Err(Error::KTooLarge { k: 4, n: 4 })
        ));
        assert!(matches!(
            query_neighbors(&x, &[2.0], 5),
            Err(Error::KTooLarge { .. })
        ));
        let idx = build_knn(&x, 1).unwrap();
        assert!(matches!(kth_distance(&idx, 4), Err(Error::BadIndex { .. })));
    }

    #[test]
    fn query_ties_prefer_lower_index() {
        let x = line(&[0.0, 1.0, 3.0, 7.0]);
        let (ids, d) = query_neighbors(&x, &[2.0], 2).unwrap();
        assert_eq!(ids, vec![1, 2]);
        assert_eq!(d, vec![1.0, 1.0]);

        let (ids, d) = query_neighbors(&x, &[3.0], 1).unwrap();
        assert_eq!((ids, d), (vec![2], vec![0.0]));

        let (ids, _) = query_neighbors(&x, &[6.0], 4).unwrap();
        assert_eq!(ids, vec![3, 2, 1, 0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn matches_resort_oracle(n in 2usize..200, d in 1usize..=8, kf in 0.0f64..1.0, seed in any::<u64>()) {
            let mut rng = seeded(seed);
            // Coarse grid values so exact ties actually occur.
            let flat: Vec<f64> = (0..n * d).map(|_| rng.random_range(0..6) as f64).collect();
            let x = PointSet::from_flat(d, flat).unwrap();
            let k = 1 + ((n - 2) as f64 * kf) as usize;
            let idx = build_knn(&x, k).unwrap();
            for i in 0..n {
                let (ids, dists) = oracle(&x, i, k);
                prop_assert_eq!(idx.neighbors(i), &ids[..]);
                prop_assert_eq!(idx.distances(i), &dists[..]);
                prop_assert!(!idx.neighbors(i).contains(&i));
            }
        }
    }
}
