use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::rex_sample_into;
use crate::knn::{build_knn, KnnIndex};
use crate::points::PointSet;

/// k-NN REX resampler over a fixed sample with its neighbor lists prebuilt.
///
/// Every draw picks a seed point uniformly, adds `m - 1` distinct neighbors
/// drawn without replacement from its k-NN, and samples the REX kernel of
/// that set. A fresh set is drawn per output point.
#[derive(Debug, Clone)]
pub struct KnnRexSampler<'a> {
    sample: &'a PointSet,
    index: Option<KnnIndex>,
    m: usize,
}

impl<'a> KnnRexSampler<'a> {
    /// Validates `(k, m)` and builds the k-NN index. `k = 0` forces `m = 1`
    /// and skips the index (pure bootstrap).
    pub fn new(sample: &'a PointSet, k: usize, m: usize) -> Result<Self> {
        check_params(sample, k, m)?;
        let index = if k == 0 {
            None
        } else {
            Some(build_knn(sample, k)?)
        };
        Ok(Self { sample, index, m })
    }

    /// Reuses a prebuilt index; its `k` must satisfy `m <= k + 1`.
    pub fn with_index(sample: &'a PointSet, index: KnnIndex, m: usize) -> Result<Self> {
        check_params(sample, index.k(), m)?;
        if index.len() != sample.len() {
            return Err(Error::BadParams(format!(
                "index covers {} points, sample has {}",
                index.len(),
                sample.len()
            )));
        }
        Ok(Self {
            sample,
            index: Some(index),
            m,
        })
    }

    pub fn index(&self) -> Option<&KnnIndex> {
        self.index.as_ref()
    }

    pub fn synthesize<R: Rng + ?Sized>(&self, l: usize, rng: &mut R) -> PointSet {
        let d = self.sample.dim();
        let mut out = vec![0.0; l * d];
        let mut scratch = Vec::new();
        let mut parents: Vec<&[f64]> = Vec::with_capacity(self.m);
        for y in out.chunks_exact_mut(d) {
            self.draw_into(rng, &mut scratch, &mut parents, y);
        }
        PointSet::from_flat(d, out).expect("dimension is positive")
    }

    fn draw_into<'s, R: Rng + ?Sized>(
        &'s self,
        rng: &mut R,
        scratch: &mut Vec<usize>,
        parents: &mut Vec<&'s [f64]>,
        out: &mut [f64],
    ) {
        let seed = rng.random_range(0..self.sample.len());
        parents.clear();
        parents.push(self.sample.row(seed));
        if let Some(index) = &self.index {
            choose_distinct(index.neighbors(seed), self.m - 1, rng, scratch);
            parents.extend(scratch.iter().map(|&j| self.sample.row(j)));
        }
        rex_sample_into(parents, rng, out);
    }
}

fn check_params(sample: &PointSet, k: usize, m: usize) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if m == 0 || m > k + 1 {
        return Err(Error::BadParams(format!(
            "KCS size m = {m} must lie in 1..={}",
            k + 1
        )));
    }
    if k >= sample.len() {
        return Err(Error::KTooLarge { k, n: sample.len() });
    }
    Ok(())
}

/// Writes `count` distinct entries of `pool`, chosen uniformly without
/// replacement, into `out` (partial Fisher-Yates on a copy).
pub(crate) fn choose_distinct<R: Rng + ?Sized>(
    pool: &[usize],
    count: usize,
    rng: &mut R,
    out: &mut Vec<usize>,
) {
    out.clear();
    out.extend_from_slice(pool);
    for j in 0..count {
        let r = rng.random_range(j..out.len());
        out.swap(j, r);
    }
    out.truncate(count);
}

/// Synthesizes `l` points from `x` with the k-NN REX kernel.
pub fn synth_knn_rex<R: Rng + ?Sized>(
    x: &PointSet,
    k: usize,
    m: usize,
    l: usize,
    rng: &mut R,
) -> Result<PointSet> {
    Ok(KnnRexSampler::new(x, k, m)?.synthesize(l, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn ring(n: usize) -> PointSet {
        let rows: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        PointSet::from_rows(&rows).unwrap()
    }

    #[test]
    fn single_parent_is_bootstrap() {
        let x = ring(20);
        let y = synth_knn_rex(&x, 5, 1, 500, &mut seeded(1)).unwrap();
        assert_eq!(y.len(), 500);
        for r in y.rows() {
            assert!(x.rows().any(|s| s == r));
        }
    }

    #[test]
    fn zero_neighbors_forces_bootstrap() {
        let x = ring(10);
        let y = synth_knn_rex(&x, 0, 1, 50, &mut seeded(2)).unwrap();
        assert!(y.rows().all(|r| x.rows().any(|s| s == r)));
        assert!(matches!(
            synth_knn_rex(&x, 0, 2, 5, &mut seeded(2)),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn empty_output_and_param_checks() {
        let x = ring(10);
        assert!(synth_knn_rex(&x, 3, 2, 0, &mut seeded(3))
            .unwrap()
            .is_empty());
        assert!(matches!(
            synth_knn_rex(&x, 3, 5, 10, &mut seeded(3)),
            Err(Error::BadParams(_))
        ));
        assert!(matches!(
            synth_knn_rex(&x, 10, 2, 10, &mut seeded(3)),
            Err(Error::KTooLarge { .. })
        ));
        let empty = PointSet::new(2);
        assert!(matches!(
            synth_knn_rex(&empty, 0, 1, 10, &mut seeded(3)),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn full_neighborhood_kcs_reachable() {
        let x = ring(12);
        let y = synth_knn_rex(&x, 4, 5, 200, &mut seeded(4)).unwrap();
        assert!(y.all_finite());
    }

    #[test]
    fn outputs_stay_near_local_neighborhoods() {
        // Points on a ring with tight neighborhoods must not fill the hole.
        let x = ring(400);
        let y = synth_knn_rex(&x, 8, 3, 2000, &mut seeded(5)).unwrap();
        for r in y.rows() {
            let rad = (r[0] * r[0] + r[1] * r[1]).sqrt();
            assert!((rad - 1.0).abs() < 0.2, "{rad}");
        }
    }

    #[test]
    fn choose_distinct_is_distinct() {
        let mut rng = seeded(6);
        let mut out = Vec::new();
        for _ in 0..100 {
            choose_distinct(&[3, 1, 4, 5, 9, 2], 4, &mut rng, &mut out);
            let mut s = out.clone();
            s.sort();
            s.dedup();
            assert_eq!(s.len(), 4);
        }
    }

    #[test]
    fn reproducible() {
        let x = ring(30);
        let a = synth_knn_rex(&x, 6, 3, 100, &mut seeded(7)).unwrap();
        let b = synth_knn_rex(&x, 6, 3, 100, &mut seeded(7)).unwrap();
        assert_eq!(a, b);
    }
}
