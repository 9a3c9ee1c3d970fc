//! Wall-clock benchmark of the k-NN build and the synthesis loop.

use std::fmt::Write as _;
use std::time::Instant;

use crate::data::gen_uniform_cube;
use crate::error::{Error, Result};
use crate::estimators::KnnRexSampler;
use crate::knn::build_knn;
use crate::rng::seeded;

/// Runs `f` on a pool of exactly `threads` workers (inline without the
/// `parallel` feature).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Err(Error::BadParams("thread count must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::BadParams(format!("cannot start {threads} threads: {e}")))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    Ok(f())
}

/// Minimum wall-clock seconds of `reps` runs of `f`.
fn best_of<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let mut best = f64::INFINITY;
    let mut last = None;
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        let v = f()?;
        best = best.min(t.elapsed().as_secs_f64());
        last = Some(v);
    }
    Ok((best, last.expect("at least one repetition")))
}

/// Timings for the complexity check: k-NN build across `sizes`, synthesis
/// across `l_sizes`, and the build share of a full run at the largest size.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub build: Vec<(usize, f64)>,
    pub synth: Vec<(usize, f64)>,
    pub share_n: usize,
    pub share_l: usize,
    pub share_build: f64,
    pub share_synth: f64,
}

impl BenchReport {
    pub fn build_ratios(&self) -> Vec<f64> {
        self.build.windows(2).map(|w| w[1].1 / w[0].1).collect()
    }

    /// Seconds per synthesized point, relative to the first size.
    pub fn synth_linearity(&self) -> Vec<f64> {
        let base = self.synth[0].1 / self.synth[0].0 as f64;
        self.synth
            .iter()
            .map(|&(l, s)| s / l as f64 / base)
            .collect()
    }

    pub fn build_fraction(&self) -> f64 {
        self.share_build / (self.share_build + self.share_synth)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# knn benchmark\n");
        for (n, t) in &self.build {
            let _ = writeln!(s, "build.n{n}={t:.6}");
        }
        for r in self.build_ratios() {
            let _ = writeln!(s, "build_ratio={r:.4}");
        }
        for (l, t) in &self.synth {
            let _ = writeln!(s, "synth.l{l}={t:.6}");
        }
        for r in self.synth_linearity() {
            let _ = writeln!(s, "synth_per_point_relative={r:.4}");
        }
        let _ = writeln!(s, "share.n={}", self.share_n);
        let _ = writeln!(s, "share.l={}", self.share_l);
        let _ = writeln!(s, "share.index_build={:.6}", self.share_build);
        let _ = writeln!(s, "share.synthesis={:.6}", self.share_synth);
        let _ = writeln!(s, "share.build_fraction={:.4}", self.build_fraction());
        s
    }
}

/// Runs the benchmark on uniform data. The synthesis timings reuse one
/// index built at the largest sample size.
pub fn bench_knn_run(
    sizes: &[usize],
    l_sizes: &[usize],
    d: usize,
    k: usize,
    m: usize,
    reps: usize,
    seed: u64,
) -> Result<BenchReport> {
    if sizes.is_empty() || l_sizes.is_empty() {
        return Err(Error::BadParams("benchmark needs at least one size".into()));
    }
    let mut rng = seeded(seed);
    let mut build = Vec::new();
    let mut largest = None;
    for &n in sizes {
        let x = gen_uniform_cube(n, d, 1.0, &mut rng)?;
        let (t, index) = best_of(reps, || build_knn(&x, k))?;
        build.push((n, t));
        largest = Some((x, index));
    }
    let (x, index) = largest.expect("sizes is non-empty");
    let sampler = KnnRexSampler::with_index(&x, index, m)?;
    let mut synth = Vec::new();
    for &l in l_sizes {
        let (t, _) = best_of(reps, || Ok(sampler.synthesize(l, &mut seeded(seed))))?;
        synth.push((l, t));
    }
    // A fold-scale run: n points, l = 99 n (100-fold inverted CV).
    let share_n = x.len();
    let share_l = 99 * share_n;
    let (share_build, index) = best_of(reps, || build_knn(&x, k))?;
    let sampler = KnnRexSampler::with_index(&x, index, m)?;
    let (share_synth, _) = best_of(reps, || Ok(sampler.synthesize(share_l, &mut seeded(seed))))?;
    Ok(BenchReport {
        build,
        synth,
        share_n,
        share_l,
        share_build,
        share_synth,
    })
}
