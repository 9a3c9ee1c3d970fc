//! The `knnrex` command line.
//!
//! Every artifact written to `PATH` gets a `PATH.manifest` sidecar holding
//! the resolved configuration and per-phase wall-clock timings. Reports echo
//! the manifest without timings, so equal inputs give byte-identical reports.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::asymptotics::{asymptotics_report, DensityModel, LinearDensity, UniformDensity};
use crate::bench::{self, bench_knn_run};
use crate::data::{gen_gmm, gen_ring, gen_swiss_roll, gen_uniform_cube, gmm3_fixture};
use crate::error::{Error, Result};
use crate::estimators::{
    km_fit_with, km_synth, synth_bias_corrected, synth_bmp_with_index, synth_fixed_gaussian,
    CorrectedOptions, EstimatorConfig, KmOptions, KnnRexSampler, MarginalSpec, Method,
    DEFAULT_KM_RIDGE,
};
use crate::evaluation::{hellinger_union, icv_sweep, IcvOptions, IcvReport};
use crate::io::{
    read_marginals_file, read_points_file, write_marginals, write_points_file, write_text_file,
};
use crate::knn::build_knn;
use crate::points::PointSet;
use crate::preprocess::{whiten_apply, whiten_fit, whiten_invert};
use crate::rng::seeded;

#[derive(Parser, Debug)]
#[command(
    name = "knnrex",
    version,
    about = "Population synthesis with the k-NN REX kernel"
)]
struct Cli {
    /// Worker threads; 1 is the reference execution.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a benchmark dataset.
    GenData(GenDataArgs),
    /// Synthesize a population from a sample.
    Synthesize(SynthesizeArgs),
    /// Synthesize a population matching marginal bin frequencies.
    SynthesizeCorrected(CorrectedArgs),
    /// Binned Hellinger distance between two point sets.
    Evaluate(EvaluateArgs),
    /// Inverted cross-validation of one configuration.
    Icv(IcvArgs),
    /// Inverted cross-validation over a parameter grid.
    Sweep(SweepArgs),
    /// Compare the small-ball covariance expansion with Monte Carlo.
    ValidateAsymptotics(AsymptoticsArgs),
    /// Time the k-NN build and the synthesis loop.
    BenchKnn(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    KnnRex,
    Fixed,
    Bmp,
    Km,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::KnnRex => Method::KnnRex,
            MethodArg::Fixed => Method::FixedGaussian,
            MethodArg::Bmp => Method::Bmp,
            MethodArg::Km => Method::KmRex,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct MethodOpts {
    #[arg(long, value_enum, default_value_t = MethodArg::KnnRex)]
    method: MethodArg,
    /// Neighbors per point.
    #[arg(long, default_value_t = 30)]
    k: usize,
    /// KCS size.
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Bandwidth (fixed) or bandwidth multiplier (bmp).
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    /// Number of KCSs (km).
    #[arg(long = "L", default_value_t = 10)]
    kcs_count: usize,
    /// Consecutive non-improving iterations before km stops.
    #[arg(long, default_value_t = 10_000)]
    stall_limit: usize,
    /// Relative ridge for singular km kernels.
    #[arg(long, default_value_t = DEFAULT_KM_RIDGE)]
    ridge: f64,
    /// Round synthesized values to integers.
    #[arg(long)]
    round_integers: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl MethodOpts {
    fn config(&self) -> EstimatorConfig {
        EstimatorConfig {
            method: self.method.into(),
            k: self.k,
            m: self.m,
            h: self.h,
            kcs_count: self.kcs_count,
            seed: self.seed,
            stall_limit: self.stall_limit,
            round_integers: self.round_integers,
            ridge: self.ridge,
            ..EstimatorConfig::default()
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Dataset {
    SwissRoll,
    Ring,
    Gmm3,
    Cube,
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long, value_enum)]
    dataset: Dataset,
    /// Number of points.
    #[arg(long)]
    n: usize,
    /// Dimension (cube only).
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write equal-width marginals of the generated data here.
    #[arg(long)]
    marginals: Option<PathBuf>,
    /// Bins per variable for `--marginals`.
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Total the marginals are scaled to (default: n).
    #[arg(long)]
    total: Option<u64>,
}

#[derive(Args, Debug)]
struct SynthesizeArgs {
    #[command(flatten)]
    method: MethodOpts,
    /// Number of points to synthesize.
    #[arg(long = "l")]
    l: usize,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CorrectedArgs {
    #[arg(long, default_value_t = 30)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Marginal spec with header `variable,lo,hi,freq`.
    #[arg(long)]
    marginals: PathBuf,
    /// Population size every variable's frequencies must sum to.
    #[arg(long)]
    total: u64,
    #[arg(long)]
    round_integers: bool,
    /// Iterations without a new population maximum before giving up
    /// (default 50 times the total).
    #[arg(long)]
    stall_limit: Option<usize>,
    /// Draw seeds uniformly from the target bin, ignoring which other bins
    /// are already full.
    #[arg(long)]
    uniform_seed_choice: bool,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IcvArgs {
    #[command(flatten)]
    method: MethodOpts,
    #[arg(long, default_value_t = 100)]
    folds: usize,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    method: MethodOpts,
    /// Comma-separated k values (default: `--k`).
    #[arg(long, value_delimiter = ',')]
    grid_k: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    grid_m: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    grid_h: Vec<f64>,
    #[arg(long = "grid-L", value_delimiter = ',')]
    grid_kcs: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    folds: usize,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DensityArg {
    Uniform,
    Linear,
}

#[derive(Args, Debug)]
struct AsymptoticsArgs {
    #[arg(long, value_enum, default_value_t = DensityArg::Linear)]
    density: DensityArg,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Gradient of the linear density along the first axis (value 1 at the
    /// study point, the origin).
    #[arg(long, default_value_t = 5.0)]
    slope: f64,
    /// Strictly decreasing ball radii.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1")]
    deltas: Vec<f64>,
    /// Accepted Monte-Carlo samples per radius.
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Sample sizes for the k-NN build.
    #[arg(long, value_delimiter = ',', default_value = "2000,4000")]
    sizes: Vec<usize>,
    /// Population sizes for the synthesis loop.
    #[arg(
        long = "l-sizes",
        value_delimiter = ',',
        default_value = "10000,20000,40000"
    )]
    l_sizes: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value_t = 30)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Repetitions per measurement; the minimum is reported.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Resolved configuration, artifact paths and timings of one invocation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub seed: Option<u64>,
    pub config: Vec<(String, String)>,
    pub inputs: Vec<(String, PathBuf)>,
    pub outputs: Vec<(String, PathBuf)>,
    pub phases: Vec<(String, f64)>,
    pub total_seconds: f64,
}

impl RunManifest {
    fn new(subcommand: &str, seed: Option<u64>) -> Self {
        Self {
            subcommand: subcommand.into(),
            seed,
            ..Self::default()
        }
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.into(), value.to_string()));
    }

    fn set_config(&mut self, cfg: &EstimatorConfig) {
        for (k, v) in cfg.describe() {
            if k != "seed" {
                self.set(k, v);
            }
        }
    }

    /// Everything except timings.
    pub fn header_text(&self) -> String {
        let mut s = String::from("# run manifest\n");
        let _ = writeln!(s, "subcommand={}", self.subcommand);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed={seed}");
        }
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k}={v}");
        }
        for (k, p) in &self.inputs {
            let _ = writeln!(s, "input.{k}={}", p.display());
        }
        for (k, p) in &self.outputs {
            let _ = writeln!(s, "output.{k}={}", p.display());
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = self.header_text();
        for (name, secs) in &self.phases {
            let _ = writeln!(s, "time.{name}={secs:.6}");
        }
        let _ = writeln!(s, "time.total={:.6}", self.total_seconds);
        s
    }

    pub fn phase_sum(&self) -> f64 {
        self.phases.iter().map(|p| p.1).sum()
    }
}

/// Consecutive phases: each lap covers the time since the previous one, so
/// phases partition the run.
struct PhaseTimer {
    start: Instant,
    last: Instant,
    phases: Vec<(String, f64)>,
}

impl PhaseTimer {
    fn start() -> Self {
        let now = Instant::now();
        Self {
            start: now,
            last: now,
            phases: Vec::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        let secs = (now - self.last).as_secs_f64();
        match self.phases.iter_mut().find(|p| p.0 == name) {
            Some(p) => p.1 += secs,
            None => self.phases.push((name.into(), secs)),
        }
        self.last = now;
    }

    fn finish(self, manifest: &mut RunManifest) {
        manifest.total_seconds = (self.last - self.start).as_secs_f64();
        manifest.phases = self.phases;
    }
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status: 0 success, 1 runtime error, 2 usage error.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match with_threads(cli.threads, || dispatch(cli.command)) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error[{}]: {e}", e.kind());
            1
        }
    }
}

fn with_threads(threads: Option<usize>, f: impl FnOnce() -> CmdResult + Send) -> CmdResult {
    match threads {
        Some(t) => bench::with_threads(t, f).map_err(|e| Failure::Usage(e.to_string()))?,
        None => f(),
    }
}

fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::GenData(a) => gen_data(a),
        Command::Synthesize(a) => synthesize(a),
        Command::SynthesizeCorrected(a) => synthesize_corrected(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Icv(a) => icv(a),
        Command::Sweep(a) => sweep(a),
        Command::ValidateAsymptotics(a) => validate_asymptotics(a),
        Command::BenchKnn(a) => bench_knn(a),
    }
}

fn require_file(flag: &str, path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{flag}: no such file: {}",
            path.display()
        )))
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn write_manifest(out: &Path, m: &RunManifest) -> CmdResult {
    write_text_file(&manifest_path(out), &m.to_text())?;
    Ok(())
}

/// Writes a report to `out`, or stdout when absent.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen_data(a: GenDataArgs) -> CmdResult {
    if a.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let mut man = RunManifest::new("gen-data", Some(a.seed));
    let mut timer = PhaseTimer::start();
    let name = a.dataset.to_possible_value().expect("no skipped variants");
    man.set("dataset", name.get_name());
    man.set("n", a.n);
    let mut rng = seeded(a.seed);
    let data = match a.dataset {
        Dataset::SwissRoll => gen_swiss_roll(a.n, &mut rng)?,
        Dataset::Ring => gen_ring(a.n, &mut rng)?,
        Dataset::Gmm3 => gen_gmm(&gmm3_fixture(), a.n, &mut rng)?,
        Dataset::Cube => {
            man.set("d", a.d);
            gen_uniform_cube(a.n, a.d, 1.0, &mut rng)?
        }
    };
    timer.lap("generate");
    write_points_file(&a.out, &data)?;
    man.outputs.push(("out".into(), a.out.clone()));
    if let Some(path) = &a.marginals {
        let total = a.total.unwrap_or(a.n as u64);
        man.set("bins", a.bins);
        man.set("total", total);
        let spec = MarginalSpec::from_reference(&data, a.bins, total)?;
        let mut buf = Vec::new();
        write_marginals(&mut buf, &spec)?;
        std::fs::write(path, buf).map_err(Error::from)?;
        man.outputs.push(("marginals".into(), path.clone()));
    }
    timer.lap("write");
    timer.finish(&mut man);
    write_manifest(&a.out, &man)
}

fn round_all(p: &mut PointSet) {
    for i in 0..p.len() {
        p.row_mut(i).iter_mut().for_each(|v| *v = v.round());
    }
}

/// Whiten, synthesize and map back, with the phase breakdown of the
/// reference timing table: index build and km fitting timed separately.
fn synthesize_timed(
    x: &PointSet,
    cfg: &EstimatorConfig,
    l: usize,
    timer: &mut PhaseTimer,
) -> Result<PointSet> {
    let mut rng = seeded(cfg.seed);
    let t = whiten_fit(x)?;
    let w = whiten_apply(&t, x)?;
    timer.lap("whiten");
    let y = match cfg.method {
        Method::KnnRex => {
            let sampler = if cfg.k == 0 {
                KnnRexSampler::new(&w, 0, cfg.m)?
            } else {
                let index = build_knn(&w, cfg.k)?;
                timer.lap("index_build");
                KnnRexSampler::with_index(&w, index, cfg.m)?
            };
            sampler.synthesize(l, &mut rng)
        }
        Method::Bmp => {
            let index = build_knn(&w, cfg.k)?;
            timer.lap("index_build");
            synth_bmp_with_index(&w, &index, cfg.h, l, &mut rng)?
        }
        Method::FixedGaussian => synth_fixed_gaussian(&w, cfg.h, l, &mut rng)?,
        Method::KmRex => {
            let opts = KmOptions {
                kcs_count: cfg.kcs_count,
                m: cfg.m,
                stall_limit: cfg.stall_limit,
                mv: cfg.km_move,
                ridge: cfg.ridge,
            };
            let model = km_fit_with(&w, &opts, &mut rng)?;
            timer.lap("km_fit");
            km_synth(&model, &w, l, &mut rng)?
        }
        Method::KnnRexCorrected => unreachable!("not selectable from the command line"),
    };
    timer.lap("synthesis");
    let mut out = whiten_invert(&t, &y)?;
    if cfg.round_integers {
        round_all(&mut out);
    }
    timer.lap("unwhiten");
    out.with_names(x.column_names())
}

fn synthesize(a: SynthesizeArgs) -> CmdResult {
    require_file("--in", &a.input)?;
    let cfg = a.method.config();
    let mut man = RunManifest::new("synthesize", Some(cfg.seed));
    man.set_config(&cfg);
    man.set("l", a.l);
    man.inputs.push(("in".into(), a.input.clone()));
    man.outputs.push(("out".into(), a.out.clone()));
    let mut timer = PhaseTimer::start();
    let x = read_points_file(&a.input)?;
    timer.lap("read");
    let y = synthesize_timed(&x, &cfg, a.l, &mut timer)?;
    write_points_file(&a.out, &y)?;
    timer.lap("write");
    timer.finish(&mut man);
    write_manifest(&a.out, &man)
}

fn synthesize_corrected(a: CorrectedArgs) -> CmdResult {
    require_file("--in", &a.input)?;
    require_file("--marginals", &a.marginals)?;
    let mut man = RunManifest::new("synthesize-corrected", Some(a.seed));
    man.set("method", Method::KnnRexCorrected);
    man.set("k", a.k);
    man.set("m", a.m);
    man.set("total", a.total);
    man.set("round_integers", a.round_integers);
    man.set("uniform_seed_choice", a.uniform_seed_choice);
    if let Some(s) = a.stall_limit {
        man.set("stall_limit", s);
    }
    man.inputs.push(("in".into(), a.input.clone()));
    man.inputs.push(("marginals".into(), a.marginals.clone()));
    man.outputs.push(("out".into(), a.out.clone()));
    let mut timer = PhaseTimer::start();
    let x = read_points_file(&a.input)?;
    let spec = read_marginals_file(&a.marginals, &x.column_names(), a.total)?;
    timer.lap("read");
    let opts = CorrectedOptions {
        k: a.k,
        m: a.m,
        round_integers: a.round_integers,
        stall_iterations: a.stall_limit,
        prefer_vacant_seeds: !a.uniform_seed_choice,
    };
    let result = synth_bias_corrected(&x, &spec, &opts, &mut seeded(a.seed));
    timer.lap("synthesis");
    match result {
        Ok((y, stats)) => {
            man.set("iterations", stats.iterations);
            man.set("uniform_seeds", stats.uniform_seeds);
            man.set("vacant_seeds", stats.vacant_seeds);
            man.set("evictions", stats.evictions);
            man.set("rejected_out_of_range", stats.rejected_out_of_range);
            write_points_file(&a.out, &y.with_names(x.column_names())?)?;
            timer.lap("write");
            timer.finish(&mut man);
            write_manifest(&a.out, &man)
        }
        Err(Error::StallLimit {
            iterations,
            produced,
            target,
            partial,
            deficits,
        }) => {
            // Keep what was produced so the caller can inspect it.
            man.set("stalled", true);
            man.set("iterations", iterations);
            man.set("produced", produced);
            for (v, d) in spec.vars.iter().zip(&deficits) {
                let d: Vec<String> = d.iter().map(i64::to_string).collect();
                man.set(&format!("deficit.{}", v.name), d.join(" "));
            }
            write_points_file(&a.out, &partial.with_names(x.column_names())?)?;
            timer.lap("write");
            timer.finish(&mut man);
            write_manifest(&a.out, &man)?;
            Err(Failure::Runtime(Error::StallLimit {
                iterations,
                produced,
                target,
                partial: PointSet::new(x.dim()),
                deficits,
            }))
        }
        Err(e) => Err(e.into()),
    }
}

fn evaluate(a: EvaluateArgs) -> CmdResult {
    require_file("--a", &a.a)?;
    require_file("--b", &a.b)?;
    let mut man = RunManifest::new("evaluate", None);
    man.set("bins", a.bins);
    man.inputs.push(("a".into(), a.a.clone()));
    man.inputs.push(("b".into(), a.b.clone()));
    if let Some(o) = &a.out {
        man.outputs.push(("out".into(), o.clone()));
    }
    let mut timer = PhaseTimer::start();
    let ya = read_points_file(&a.a)?;
    let yb = read_points_file(&a.b)?;
    timer.lap("read");
    let h = hellinger_union(&ya, &yb, a.bins)?;
    timer.lap("evaluation");
    let mut text = man.header_text();
    let _ = writeln!(text, "# evaluation");
    let _ = writeln!(text, "n_a={}", ya.len());
    let _ = writeln!(text, "n_b={}", yb.len());
    let _ = writeln!(text, "hellinger={h:e}");
    emit(a.out.as_deref(), &text)?;
    timer.lap("write");
    timer.finish(&mut man);
    if let Some(o) = &a.out {
        write_manifest(o, &man)?;
    }
    Ok(())
}

fn icv_common(
    name: &str,
    input: &Path,
    out: Option<&Path>,
    base: &MethodOpts,
    folds: usize,
    bins: usize,
) -> std::result::Result<(RunManifest, PhaseTimer, PointSet, IcvOptions), Failure> {
    require_file("--in", input)?;
    let mut man = RunManifest::new(name, Some(base.seed));
    man.set("folds", folds);
    man.set("bins", bins);
    man.inputs.push(("in".into(), input.to_path_buf()));
    if let Some(o) = out {
        man.outputs.push(("out".into(), o.to_path_buf()));
    }
    let mut timer = PhaseTimer::start();
    let data = read_points_file(input)?;
    timer.lap("read");
    let opts = IcvOptions {
        folds,
        bins_per_dim: bins,
        seed: base.seed,
    };
    Ok((man, timer, data, opts))
}

fn icv(a: IcvArgs) -> CmdResult {
    let (mut man, mut timer, data, opts) = icv_common(
        "icv",
        &a.input,
        a.out.as_deref(),
        &a.method,
        a.folds,
        a.bins,
    )?;
    let cfg = a.method.config();
    man.set_config(&cfg);
    let report = icv_sweep(&data, std::slice::from_ref(&cfg), &opts)?.remove(0);
    timer.lap("evaluation");
    let text = man.header_text() + &report.to_text();
    emit(a.out.as_deref(), &text)?;
    timer.lap("write");
    timer.finish(&mut man);
    if let Some(o) = &a.out {
        write_manifest(o, &man)?;
    }
    Ok(())
}

fn or_default<T: Clone>(grid: &[T], default: T) -> Vec<T> {
    if grid.is_empty() {
        vec![default]
    } else {
        grid.to_vec()
    }
}

fn sweep_table(reports: &[IcvReport]) -> String {
    let mut s = String::from(
        "method,k,m,h,L,hellinger_mean,hellinger_std,baseline_mean,baseline_std,welch_t,welch_p\n",
    );
    for r in reports {
        let c = &r.config;
        let (t, p) = r
            .versus_baseline()
            .map_or((f64::NAN, f64::NAN), |w| (w.t, w.p));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
            c.method,
            c.k,
            c.m,
            c.h,
            c.kcs_count,
            r.mean,
            r.std,
            r.baseline_mean,
            r.baseline_std,
            t,
            p
        );
    }
    s
}

fn sweep(a: SweepArgs) -> CmdResult {
    let (mut man, mut timer, data, opts) = icv_common(
        "sweep",
        &a.input,
        a.out.as_deref(),
        &a.method,
        a.folds,
        a.bins,
    )?;
    let base = a.method.config();
    man.set("method", base.method);
    let ks = or_default(&a.grid_k, base.k);
    let ms = or_default(&a.grid_m, base.m);
    let hs = or_default(&a.grid_h, base.h);
    let ls = or_default(&a.grid_kcs, base.kcs_count);
    let join = |v: Vec<String>| v.join(" ");
    man.set("grid_k", join(ks.iter().map(ToString::to_string).collect()));
    man.set("grid_m", join(ms.iter().map(ToString::to_string).collect()));
    man.set("grid_h", join(hs.iter().map(ToString::to_string).collect()));
    man.set("grid_L", join(ls.iter().map(ToString::to_string).collect()));
    let mut cfgs = Vec::new();
    for &k in &ks {
        for &m in &ms {
            for &h in &hs {
                for &kcs_count in &ls {
                    cfgs.push(EstimatorConfig {
                        k,
                        m,
                        h,
                        kcs_count,
                        ..base.clone()
                    });
                }
            }
        }
    }
    let reports = icv_sweep(&data, &cfgs, &opts)?;
    timer.lap("evaluation");
    let text = man.header_text() + "# sweep\n" + &sweep_table(&reports);
    emit(a.out.as_deref(), &text)?;
    timer.lap("write");
    timer.finish(&mut man);
    if let Some(o) = &a.out {
        write_manifest(o, &man)?;
    }
    Ok(())
}

fn validate_asymptotics(a: AsymptoticsArgs) -> CmdResult {
    if a.d == 0 {
        return Err(Failure::Usage("--d must be at least 1".into()));
    }
    let mut man = RunManifest::new("validate-asymptotics", Some(a.seed));
    let density = a.density.to_possible_value().expect("no skipped variants");
    man.set("density", density.get_name());
    man.set("d", a.d);
    if a.density == DensityArg::Linear {
        man.set("slope", a.slope);
    }
    if let Some(o) = &a.out {
        man.outputs.push(("out".into(), o.clone()));
    }
    let mut timer = PhaseTimer::start();
    let origin = vec![0.0; a.d];
    let model: Box<dyn DensityModel> = match a.density {
        DensityArg::Uniform => Box::new(UniformDensity { dim: a.d }),
        DensityArg::Linear => {
            let mut slope = vec![0.0; a.d];
            slope[0] = a.slope;
            Box::new(LinearDensity {
                origin: origin.clone(),
                value: 1.0,
                slope,
            })
        }
    };
    let report = asymptotics_report(
        model.as_ref(),
        &origin,
        &a.deltas,
        a.samples,
        &mut seeded(a.seed),
    )?;
    timer.lap("evaluation");
    let text = man.header_text() + &report.to_text();
    emit(a.out.as_deref(), &text)?;
    timer.lap("write");
    timer.finish(&mut man);
    if let Some(o) = &a.out {
        write_manifest(o, &man)?;
    }
    Ok(())
}

fn bench_knn(a: BenchArgs) -> CmdResult {
    let mut man = RunManifest::new("bench-knn", Some(a.seed));
    man.set("d", a.d);
    man.set("k", a.k);
    man.set("m", a.m);
    man.set("reps", a.reps);
    if let Some(o) = &a.out {
        man.outputs.push(("out".into(), o.clone()));
    }
    let mut timer = PhaseTimer::start();
    let report = bench_knn_run(&a.sizes, &a.l_sizes, a.d, a.k, a.m, a.reps, a.seed)?;
    timer.lap("benchmark");
    let text = man.header_text() + &report.to_text();
    emit(a.out.as_deref(), &text)?;
    timer.lap("write");
    timer.finish(&mut man);
    if let Some(o) = &a.out {
        write_manifest(o, &man)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_parsing() {
        let cli = Cli::try_parse_from([
            "knnrex",
            "synthesize",
            "--method",
            "km",
            "--L",
            "7",
            "--l",
            "50",
            "--in",
            "a.csv",
            "--out",
            "b.csv",
        ])
        .unwrap();
        match cli.command {
            Command::Synthesize(s) => {
                assert_eq!(s.method.kcs_count, 7);
                assert_eq!(s.l, 50);
                assert_eq!(s.method.config().method, Method::KmRex);
            }
            _ => panic!("wrong subcommand"),
        }
        assert!(
            Cli::try_parse_from(["knnrex", "synthesize", "--method", "knn-rex-corrected"]).is_err()
        );
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_command(["knnrex", "frobnicate"]), 2);
        assert_eq!(run_command(["knnrex", "evaluate", "--bogus"]), 2);
        assert_eq!(
            run_command([
                "knnrex",
                "evaluate",
                "--a",
                "/nonexistent/a.csv",
                "--b",
                "/nonexistent/b.csv"
            ]),
            2
        );
        assert_eq!(run_command(["knnrex", "--help"]), 0);
    }

    #[test]
    fn phase_timer_partitions() {
        let mut t = PhaseTimer::start();
        std::thread::sleep(std::time::Duration::from_millis(5));
        t.lap("a");
        t.lap("b");
        t.lap("a");
        let mut m = RunManifest::default();
        t.finish(&mut m);
        assert_eq!(m.phases.len(), 2);
        assert!((m.phase_sum() - m.total_seconds).abs() < 1e-9);
    }

    #[test]
    fn manifest_header_excludes_timings() {
        let mut m = RunManifest::new("icv", Some(3));
        m.set("k", 12);
        m.phases.push(("read".into(), 0.5));
        assert_eq!(
            m.header_text(),
            "# run manifest\nsubcommand=icv\nseed=3\nconfig.k=12\n"
        );
        assert!(m.to_text().contains("time.read=0.500000"));
    }
}
