//! k-NN REX synthesis steered to match published marginal bin frequencies.
//!
//! Each iteration seeds from the currently most under-filled marginal bin,
//! draws one REX child, and evicts random members of any bin that overflows.
//! Bin membership is tested in original units.

use indexmap::IndexSet;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::rex_sample_into;
use crate::knn::{build_knn, query_neighbors};
use crate::points::PointSet;
use crate::preprocess::{whiten_apply, whiten_fit};

use super::knn_rex::choose_distinct;

/// Target frequencies for one variable over contiguous bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalVar {
    pub name: String,
    /// Column of the sample this variable refers to.
    pub column: usize,
    /// `bins + 1` strictly increasing edges; bins are `[lo, hi)` except the
    /// last, which is closed.
    pub edges: Vec<f64>,
    pub freqs: Vec<u64>,
}

impl MarginalVar {
    pub fn bins(&self) -> usize {
        self.freqs.len()
    }

    pub fn bin_of(&self, v: f64) -> Option<usize> {
        let last = *self.edges.last()?;
        if !(v >= self.edges[0]) || v > last {
            return None;
        }
        if v == last {
            return Some(self.bins() - 1);
        }
        // First edge strictly greater than v, minus one.
        let pos = self.edges.partition_point(|&e| e <= v);
        Some(pos - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSpec {
    pub vars: Vec<MarginalVar>,
    pub total: u64,
}

impl MarginalSpec {
    pub fn new(vars: Vec<MarginalVar>, total: u64) -> Result<Self> {
        for v in &vars {
            if v.freqs.is_empty() || v.edges.len() != v.freqs.len() + 1 {
                return Err(Error::BadParams(format!(
                    "variable `{}` needs one more edge than bins",
                    v.name
                )));
            }
            if v.edges.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::BadParams(format!(
                    "variable `{}` has non-increasing bin edges",
                    v.name
                )));
            }
            let sum: u64 = v.freqs.iter().sum();
            if sum != total {
                return Err(Error::InconsistentMarginals {
                    variable: v.name.clone(),
                    sum,
                    total,
                });
            }
        }
        Ok(Self { vars, total })
    }

    /// Equal-width marginals of `reference` over its own range, with counts
    /// scaled to `total` by largest remainder (ties to the lower bin).
    pub fn from_reference(reference: &PointSet, bins: usize, total: u64) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptyData);
        }
        if bins == 0 {
            return Err(Error::BadParams("bins must be at least 1".into()));
        }
        let n = reference.len() as u64;
        let names = reference.column_names();
        let vars = reference
            .bounds()
            .into_iter()
            .enumerate()
            .map(|(j, (lo, hi))| {
                if !(hi > lo) {
                    return Err(Error::BadSpec(format!("column `{}` is constant", names[j])));
                }
                let w = (hi - lo) / bins as f64;
                let mut edges: Vec<f64> = (0..bins).map(|b| lo + w * b as f64).collect();
                edges.push(hi);
                let mut var = MarginalVar {
                    name: names[j].clone(),
                    column: j,
                    edges,
                    freqs: vec![0; bins],
                };
                let mut counts = vec![0u64; bins];
                for r in reference.rows() {
                    counts[var
                        .bin_of(r[j])
                        .expect("reference lies within its own range")] += 1;
                }
                let mut rems: Vec<(u64, usize)> = Vec::with_capacity(bins);
                let mut assigned = 0;
                for (b, &c) in counts.iter().enumerate() {
                    let scaled = c as u128 * total as u128;
                    var.freqs[b] = (scaled / n as u128) as u64;
                    assigned += var.freqs[b];
                    rems.push(((scaled % n as u128) as u64, b));
                }
                rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
                for &(_, b) in rems.iter().take((total - assigned) as usize) {
                    var.freqs[b] += 1;
                }
                Ok(var)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(vars, total)
    }

    /// Marginal histogram of `y` under this spec's bins (`None` rows are
    /// counted nowhere).
    pub fn histogram(&self, y: &PointSet) -> Vec<Vec<u64>> {
        self.vars
            .iter()
            .map(|v| {
                let mut h = vec![0u64; v.bins()];
                for r in y.rows() {
                    if let Some(b) = v.bin_of(r[v.column]) {
                        h[b] += 1;
                    }
                }
                h
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CorrectedOptions {
    pub k: usize,
    pub m: usize,
    pub round_integers: bool,
    /// Give up after this many iterations without reaching a new maximum
    /// population size; `None` means `50 * l`.
    pub stall_iterations: Option<usize>,
    /// Draw the seed from members of the target bin that are also in vacant
    /// bins of every other variable, when any exist. Without this the last
    /// few points rarely fit when deficits sit in bins that seldom co-occur.
    pub prefer_vacant_seeds: bool,
}

impl Default for CorrectedOptions {
    fn default() -> Self {
        Self {
            k: 30,
            m: 3,
            round_integers: false,
            stall_iterations: None,
            prefer_vacant_seeds: true,
        }
    }
}

/// Counters reported alongside a successful run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrectedStats {
    pub iterations: usize,
    pub uniform_seeds: usize,
    /// Seeds drawn from the vacant-everywhere subset of the target bin.
    pub vacant_seeds: usize,
    pub evictions: usize,
    pub rejected_out_of_range: usize,
}

/// Population slots with per-bin membership sets for O(1) random eviction.
struct Population {
    dim: usize,
    slots: Vec<Option<(Vec<f64>, Vec<usize>)>>,
    free: Vec<usize>,
    members: Vec<Vec<IndexSet<usize>>>,
    live: usize,
}

impl Population {
    fn new(dim: usize, spec: &MarginalSpec) -> Self {
        Self {
            dim,
            slots: Vec::new(),
            free: Vec::new(),
            members: spec
                .vars
                .iter()
                .map(|v| vec![IndexSet::new(); v.bins()])
                .collect(),
            live: 0,
        }
    }

    fn count(&self, var: usize, bin: usize) -> u64 {
        self.members[var][bin].len() as u64
    }

    fn insert(&mut self, point: Vec<f64>, bins: Vec<usize>) {
        let id = match self.free.pop() {
            Some(id) => id,
            None => {
                self.slots.push(None);
                self.slots.len() - 1
            }
        };
        for (v, &b) in bins.iter().enumerate() {
            self.members[v][b].insert(id);
        }
        self.slots[id] = Some((point, bins));
        self.live += 1;
    }

    fn remove(&mut self, id: usize) {
        let (_, bins) = self.slots[id].take().expect("live slot");
        for (v, b) in bins.into_iter().enumerate() {
            self.members[v][b].swap_remove(&id);
        }
        self.free.push(id);
        self.live -= 1;
    }

    fn into_points(self) -> PointSet {
        let mut out = PointSet::with_capacity(self.dim, self.live);
        for (p, _) in self.slots.into_iter().flatten() {
            out.push(&p).expect("dimension checked on insert");
        }
        out
    }
}

fn deficits(spec: &MarginalSpec, pop: &Population) -> Vec<Vec<i64>> {
    spec.vars
        .iter()
        .enumerate()
        .map(|(vi, v)| {
            (0..v.bins())
                .map(|b| v.freqs[b] as i64 - pop.count(vi, b) as i64)
                .collect()
        })
        .collect()
}

/// Synthesizes `spec.total` points whose marginal bin counts equal the
/// targets exactly. `x` is in original units; so is the output.
pub fn synth_bias_corrected<R: Rng + ?Sized>(
    x: &PointSet,
    spec: &MarginalSpec,
    opts: &CorrectedOptions,
    rng: &mut R,
) -> Result<(PointSet, CorrectedStats)> {
    let n = x.len();
    let d = x.dim();
    let (k, m) = (opts.k, opts.m);
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if m == 0 || m > k + 1 {
        return Err(Error::BadParams(format!(
            "KCS size m = {m} must lie in 1..={}",
            k + 1
        )));
    }
    if k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    for v in &spec.vars {
        if v.column >= d {
            return Err(Error::BadIndex {
                index: v.column,
                len: d,
            });
        }
    }
    // Re-check consistency; specs may be built field by field.
    let spec = MarginalSpec::new(spec.vars.clone(), spec.total)?;
    let l = spec.total as usize;

    // Sample members of every marginal bin, original units.
    let mut sources: Vec<Vec<Vec<usize>>> = spec
        .vars
        .iter()
        .map(|v| vec![Vec::new(); v.bins()])
        .collect();
    let mut sample_bins: Vec<Vec<usize>> = vec![Vec::with_capacity(spec.vars.len()); n];
    for (i, r) in x.rows().enumerate() {
        for (vi, v) in spec.vars.iter().enumerate() {
            match v.bin_of(r[v.column]) {
                Some(b) => {
                    sources[vi][b].push(i);
                    sample_bins[i].push(b);
                }
                None => {
                    return Err(Error::BadParams(format!(
                        "sample point {i} value {} lies outside the bins of `{}`",
                        r[v.column], v.name
                    )))
                }
            }
        }
    }

    let t = whiten_fit(x)?;
    let w = whiten_apply(&t, x)?;
    let index = if k > 0 { Some(build_knn(&w, k)?) } else { None };
    let bounds = x.bounds();

    let stall_cap = opts.stall_iterations.unwrap_or(50 * l.max(1));
    let mut pop = Population::new(d, &spec);
    let mut stats = CorrectedStats::default();
    let mut best = 0usize;
    let mut since_best = 0usize;

    let mut seed_orig = vec![0.0; d];
    let mut seed_white = vec![0.0; d];
    let mut child = vec![0.0; d];
    let mut scratch = Vec::with_capacity(k);
    let mut fresh_neighbors: Vec<usize>;
    let mut vacant: Vec<usize> = Vec::new();

    while pop.live < l {
        if since_best >= stall_cap {
            return Err(Error::StallLimit {
                iterations: stats.iterations,
                produced: pop.live,
                target: l,
                deficits: deficits(&spec, &pop),
                partial: pop.into_points(),
            });
        }
        stats.iterations += 1;
        since_best += 1;

        // Most vacant bin; ties resolved by (variable, bin) order.
        let mut target = (0usize, 0usize);
        let mut vacancy = i64::MIN;
        for (vi, v) in spec.vars.iter().enumerate() {
            for b in 0..v.bins() {
                let gap = v.freqs[b] as i64 - pop.count(vi, b) as i64;
                if gap > vacancy {
                    vacancy = gap;
                    target = (vi, b);
                }
            }
        }

        let (tv, tb) = target;
        let pool = &sources[tv][tb];
        let seed: &[f64];
        let neighbors: &[usize];
        if !pool.is_empty() {
            vacant.clear();
            if opts.prefer_vacant_seeds {
                vacant.extend(pool.iter().copied().filter(|&i| {
                    sample_bins[i]
                        .iter()
                        .enumerate()
                        .all(|(vi, &b)| pop.count(vi, b) < spec.vars[vi].freqs[b])
                }));
            }
            let choices = if vacant.is_empty() { pool } else { &vacant };
            if !vacant.is_empty() {
                stats.vacant_seeds += 1;
            }
            let i = choices[rng.random_range(0..choices.len())];
            seed = w.row(i);
            neighbors = index.as_ref().map_or(&[][..], |idx| idx.neighbors(i));
        } else {
            stats.uniform_seeds += 1;
            let var = &spec.vars[tv];
            for (j, s) in seed_orig.iter_mut().enumerate() {
                let (lo, hi) = if j == var.column {
                    (var.edges[tb], var.edges[tb + 1])
                } else {
                    bounds[j]
                };
                *s = if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                };
            }
            t.apply_point(&seed_orig, &mut seed_white);
            seed = &seed_white;
            fresh_neighbors = if k > 0 {
                query_neighbors(&w, seed, k)?.0
            } else {
                Vec::new()
            };
            neighbors = &fresh_neighbors;
        }

        choose_distinct(neighbors, m - 1, rng, &mut scratch);
        let mut parents: Vec<&[f64]> = Vec::with_capacity(m);
        parents.push(seed);
        parents.extend(scratch.iter().map(|&j| w.row(j)));
        rex_sample_into(&parents, rng, &mut child);

        let mut y = vec![0.0; d];
        t.invert_point(&child, &mut y);
        if opts.round_integers {
            y.iter_mut().for_each(|v| *v = v.round());
        }
        let bins: Option<Vec<usize>> = spec.vars.iter().map(|v| v.bin_of(y[v.column])).collect();
        let Some(bins) = bins else {
            stats.rejected_out_of_range += 1;
            continue;
        };
        pop.insert(y, bins);

        // Evict until no bin is over its target.
        loop {
            let over = spec.vars.iter().enumerate().find_map(|(vi, v)| {
                (0..v.bins())
                    .find(|&b| pop.count(vi, b) > v.freqs[b])
                    .map(|b| (vi, b))
            });
            let Some((vi, b)) = over else { break };
            let set = &pop.members[vi][b];
            let victim = *set
                .get_index(rng.random_range(0..set.len()))
                .expect("non-empty bin");
            pop.remove(victim);
            stats.evictions += 1;
        }

        if pop.live > best {
            best = pop.live;
            since_best = 0;
        }
    }

    let mut out = pop.into_points();
    out.set_names(x.names().map(|n| n.to_vec()));
    Ok((out, stats))
}
