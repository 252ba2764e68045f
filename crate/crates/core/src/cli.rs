//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::adversarial::{self, Metric, Sampling};
use crate::dist::{l1, sample_fixed, DistributionSet};
use crate::io::{read_distribution_set, write_atomically, write_distribution_set};
use crate::nns::LinfBackend;
use crate::rng::derive_seed;
use crate::scheffe::{OnDemandPairs, OpCounter};
use crate::sublinear::{load_index, save_index, PreprocessedIndex, SublinearConfig};
use crate::synth::{self, Family, GridSpec};
use crate::tournament::{self, Mode, PoolRate, QuerySamples, Schedule, TournamentConfig};
use crate::trace::{self, Chunking, NetSetting};
use crate::verify::{self, Suite};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "densel", version, about = "Hypothesis selection for discrete distributions")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset or packet trace.
    Gen(GenArgs),
    /// Chunk a packet trace into per-chunk source distributions.
    Ingest(IngestArgs),
    /// Run base or fast knockout tournaments for a file of query distributions.
    Tournament(TournamentArgs),
    /// Build or query the sublinear selection index.
    #[command(subcommand)]
    Sublinear(SublinearCommand),
    /// Failure rates of nearest-neighbor search on the empirical distribution.
    Adversarial(AdversarialArgs),
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Run a Monte-Carlo verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GenFamily {
    Halfuniform,
    Zipfian,
    Trace,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: GenFamily,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 8192)]
    k: usize,
    /// Trace only: distinct source keys.
    #[arg(long, default_value_t = 2000)]
    keys: usize,
    /// Trace only: number of chunks.
    #[arg(long, default_value_t = 2148)]
    chunks: usize,
    /// Trace only: packets per chunk.
    #[arg(long, default_value_t = 1000)]
    packets_per_chunk: usize,
    /// Trace only: random-walk step of the key log-weights per chunk.
    #[arg(long, default_value_t = 0.05)]
    drift: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    trace: PathBuf,
    /// `count=N` or `time=MS`.
    #[arg(long, default_value = "count=100000")]
    chunk: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dict: PathBuf,
}

#[derive(Debug, Args)]
struct TournamentArgs {
    #[arg(long, value_parser = parse_mode)]
    mode: Mode,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// `theory`, `fastconst=C` or `full=S`.
    #[arg(long, default_value = "theory")]
    schedule: String,
    #[arg(long, default_value_t = 0)]
    nallpairs: usize,
    /// Query sample length (ignored by the theory schedule, which sizes its
    /// own samples).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    dataset: PathBuf,
    /// Distribution file; each row is sampled to form one query.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum SublinearCommand {
    Build(SublinearBuildArgs),
    Query(SublinearQueryArgs),
}

#[derive(Debug, Args)]
struct SublinearBuildArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// `key = value` lines; keys are the long flag names below with `_`
    /// for `-`, plus `linf_backend = exact|sample`. Flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Default 0.5.
    #[arg(long)]
    eps: Option<f64>,
    /// Default `n^(-5/12)`.
    #[arg(long)]
    gamma: Option<f64>,
    /// Default 4.
    #[arg(long)]
    radius_const: Option<f64>,
    /// Default `max(4 ln n max(ln ln n, 1), 2)`.
    #[arg(long)]
    c_inf: Option<f64>,
    /// Query sample size the ℓ2 stage is tuned for.
    #[arg(long)]
    s: Option<usize>,
    /// Per-query miss probability the LSH tables are sized for.
    #[arg(long)]
    lsh_failure: Option<f64>,
    /// Use coordinate sampling instead of an exact scan for the ℓ∞ stage.
    #[arg(long)]
    linf_sample: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SublinearQueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// `label:N` (a dataset member) or `file:PATH` (first row of a
    /// distribution file).
    #[arg(long)]
    p_source: String,
    #[arg(long)]
    s: Option<u64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Which {
    Light,
    Heavy,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SamplingArg {
    Fixed,
    Poisson,
}

#[derive(Debug, Args)]
struct AdversarialArgs {
    #[arg(long, value_enum)]
    which: Which,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    k: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Default `l1` for the light instance, `l2` for the heavy one.
    #[arg(long, value_parser = parse_metric)]
    metric: Option<Metric>,
    #[arg(long, value_enum, default_value = "fixed")]
    sampling: SamplingArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Accuracy-versus-operations grid on a synthetic family.
    Synth(BenchSynthArgs),
    /// Nearest-traffic-pattern retrieval on chunked traces.
    Net(BenchNetArgs),
}

#[derive(Debug, Args)]
struct BenchSynthArgs {
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 8192)]
    k: usize,
    #[arg(long, value_delimiter = ',', default_value = "20,30,40,50,60")]
    samples: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
    fastconst: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,10,20,30")]
    nallpairs: Vec<usize>,
    /// Query sets.
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 20)]
    queries_per_set: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchNetArgs {
    #[arg(long)]
    dists: PathBuf,
    #[arg(long, default_value_t = 2048)]
    n_dataset: usize,
    #[arg(long, default_value_t = 100)]
    n_queries: usize,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    fastconst: usize,
    #[arg(long, default_value_t = 0)]
    nallpairs: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_parser = parse_suite)]
    suite: Suite,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_schedule(s: &str) -> Result<Schedule> {
    let bad = || Error::InvalidParameter(format!("schedule must be `theory`, `fastconst=C` or `full=S`, got `{s}`"));
    if s == "theory" {
        return Ok(Schedule::Theoretical);
    }
    let (kind, v) = s.split_once('=').ok_or_else(bad)?;
    let v: usize = v.parse().map_err(|_| bad())?;
    match kind {
        "fastconst" => Ok(Schedule::FastConst(v)),
        "full" => Ok(Schedule::FullSample(v)),
        _ => Err(bad()),
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not configure {t} threads: {e}");
        }
    }
    match dispatch(cli.command, cli.seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}

fn dispatch(cmd: Command, seed: u64) -> Result<()> {
    match cmd {
        Command::Gen(a) => gen(a, seed),
        Command::Ingest(a) => ingest(a),
        Command::Tournament(a) => run_tournaments(a, seed),
        Command::Sublinear(SublinearCommand::Build(a)) => sublinear_build(a, seed),
        Command::Sublinear(SublinearCommand::Query(a)) => sublinear_query(a, seed),
        Command::Adversarial(a) => adversarial_rates(a, seed),
        Command::Bench(BenchCommand::Synth(a)) => bench_synth(a, seed),
        Command::Bench(BenchCommand::Net(a)) => bench_net(a, seed),
        Command::Verify(a) => run_verify(a, seed),
    }
}

fn gen(a: GenArgs, seed: u64) -> Result<()> {
    match a.family {
        GenFamily::Halfuniform => write_distribution_set(&a.out, &synth::gen_half_uniform(a.n, a.k, seed)?),
        GenFamily::Zipfian => write_distribution_set(&a.out, &synth::gen_zipfian(a.n, a.k, seed)?),
        GenFamily::Trace => {
            let packets = trace::gen_synthetic_trace(a.keys, a.chunks, a.packets_per_chunk, a.drift, seed)?;
            trace::write_trace(&a.out, &packets)
        }
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let chunking: Chunking = a.chunk.parse()?;
    let packets = trace::parse_trace(&a.trace)?;
    let (vs, dict) = trace::chunk_to_distributions(&packets, chunking)?;
    write_distribution_set(&a.out, &vs)?;
    dict.save(&a.dict)?;
    eprintln!("{} packets, {} chunks, {} keys", packets.len(), vs.len(), dict.len());
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomically(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        for r in rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    })
}

#[derive(Serialize)]
struct TournamentRow {
    query_id: usize,
    mode: &'static str,
    samples: usize,
    fastconst: usize,
    nallpairs: usize,
    winner: usize,
    true_label: usize,
    l1_to_winner: f64,
    ops: u64,
}

fn run_tournaments(a: TournamentArgs, seed: u64) -> Result<()> {
    let vs = read_distribution_set(&a.dataset)?;
    let queries = read_distribution_set(&a.queries)?;
    if queries.domain_size() != vs.domain_size() {
        return Err(Error::DimensionMismatch {
            left: queries.domain_size(),
            right: vs.domain_size(),
        });
    }
    let schedule = parse_schedule(&a.schedule)?;
    let cfg = TournamentConfig {
        epsilon: a.eps,
        delta: a.delta,
        schedule,
        n_all_pairs: a.nallpairs,
        rng_seed: seed,
        pool_rate: match schedule {
            Schedule::Theoretical => PoolRate::TheoreticalK13,
            _ => PoolRate::Fixed(a.nallpairs),
        },
    };
    cfg.validate()?;
    let (ko_len, pool_len) = match schedule {
        Schedule::Theoretical => tournament::required_samples(&cfg, vs.len())?,
        _ => (
            a.samples
                .ok_or_else(|| Error::InvalidParameter("--samples is required unless --schedule theory".into()))?,
            0,
        ),
    };
    let pairs = OnDemandPairs::new(&vs);
    let mut rows = Vec::with_capacity(queries.len());
    for (qi, q) in queries.iter().enumerate() {
        let knockout = sample_fixed(q, ko_len, derive_seed(seed, &[qi as u64, 0]));
        let pool = sample_fixed(q, pool_len, derive_seed(seed, &[qi as u64, 1]));
        let samples = QuerySamples {
            knockout: &knockout,
            pool: if pool_len > 0 { &pool } else { &knockout },
        };
        let run_cfg = cfg.clone().with_seed(derive_seed(seed, &[qi as u64, 2]));
        let r = tournament::run(a.mode, &pairs, samples, &run_cfg)?;
        let true_label = (0..vs.len())
            .min_by(|&x, &y| l1(vs[x].probs(), q.probs()).total_cmp(&l1(vs[y].probs(), q.probs())))
            .expect("non-empty dataset");
        rows.push(TournamentRow {
            query_id: qi,
            mode: a.mode.as_str(),
            samples: ko_len,
            fastconst: match schedule {
                Schedule::FastConst(c) => c,
                _ => 0,
            },
            nallpairs: a.nallpairs,
            winner: r.winner,
            true_label,
            l1_to_winner: l1(vs[r.winner].probs(), q.probs()),
            ops: r.ops.scheffe_ops,
        });
    }
    write_rows(&a.out, &rows)
}

/// Parses `key = value` lines; `#` starts a comment.
fn read_config(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        out.insert(k.trim().to_string(), v.trim().trim_matches('"').to_string());
    }
    Ok(out)
}

fn config_value<T: std::str::FromStr>(cfg: &mut HashMap<String, String>, key: &str) -> Result<Option<T>> {
    cfg.remove(key)
        .map(|v| {
            v.parse()
                .map_err(|_| Error::InvalidParameter(format!("bad value `{v}` for `{key}`")))
        })
        .transpose()
}

fn sublinear_build(a: SublinearBuildArgs, seed: u64) -> Result<()> {
    let mut file = match &a.config {
        Some(p) => read_config(p)?,
        None => HashMap::new(),
    };
    let eps = a.eps.or(config_value(&mut file, "eps")?).unwrap_or(0.5);
    let gamma = a.gamma.or(config_value(&mut file, "gamma")?);
    let radius_const = a.radius_const.or(config_value(&mut file, "radius_const")?);
    let c_inf = a.c_inf.or(config_value(&mut file, "c_inf")?);
    let s = a.s.or(config_value(&mut file, "s")?);
    let lsh_failure = a.lsh_failure.or(config_value(&mut file, "lsh_failure")?);
    let sample = match config_value::<String>(&mut file, "linf_backend")?.as_deref() {
        None | Some("exact") => a.linf_sample,
        Some("sample") => true,
        Some(other) => return Err(Error::InvalidParameter(format!("unknown linf_backend `{other}`"))),
    };
    if let Some(k) = file.keys().next() {
        return Err(Error::InvalidParameter(format!("unknown config key `{k}`")));
    }

    let vs = read_distribution_set(&a.dataset)?;
    let (n, k) = (vs.domain_size(), vs.len());
    let mut cfg = SublinearConfig::defaults(n, k, eps)?.with_seed(seed);
    cfg.gamma = gamma.unwrap_or(cfg.gamma);
    cfg.radius_const = radius_const.unwrap_or(cfg.radius_const);
    cfg.c_inf = c_inf.unwrap_or(cfg.c_inf);
    cfg.s = s.unwrap_or(cfg.s);
    cfg.lsh_failure = lsh_failure.unwrap_or(cfg.lsh_failure);
    if sample {
        cfg.linf_backend = LinfBackend::coordinate_sample_default(n, k);
    }
    let idx = PreprocessedIndex::build(vs, cfg)?;
    let st = idx.stats();
    eprintln!(
        "{} groups, {} singletons, mean size {}, {} l2 indexes",
        st.groups, st.singleton_groups, st.mean_group_size, st.l2_indexes
    );
    save_index(&a.out, &idx)
}

#[derive(Serialize)]
struct SublinearRow {
    trial: usize,
    label: Option<usize>,
    answer: usize,
    linf_answer: usize,
    l1_to_answer: f64,
    success: bool,
    group_size: usize,
    light_size: usize,
    linf_evals: u64,
    l2_evals: u64,
    fallback: bool,
    direct: bool,
}

fn sublinear_query(a: SublinearQueryArgs, seed: u64) -> Result<()> {
    let idx = load_index(&a.index)?;
    let (p, label) = match a.p_source.split_once(':') {
        Some(("label", v)) => {
            let i: usize = v
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad label `{v}`")))?;
            let d = idx
                .dataset()
                .get(i)
                .ok_or(Error::IndexOutOfRange {
                    index: i,
                    size: idx.dataset().len(),
                })?
                .clone();
            (d, Some(i))
        }
        Some(("file", path)) => {
            let set: DistributionSet = read_distribution_set(Path::new(path))?;
            (set[0].clone(), None)
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "--p-source must be `label:N` or `file:PATH`, got `{}`",
                a.p_source
            )))
        }
    };
    if p.len() != idx.dataset().domain_size() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: idx.dataset().domain_size(),
        });
    }
    let s = a.s.unwrap_or(idx.config().s as u64);
    let eps = idx.config().epsilon;
    let mut rows = Vec::with_capacity(a.trials);
    for t in 0..a.trials {
        let mut c = OpCounter::new();
        let r = idx.select_with_samples(&p, s, derive_seed(seed, &[t as u64]), &mut c)?;
        let dist = l1(p.probs(), idx.dataset()[r.answer].probs());
        rows.push(SublinearRow {
            trial: t,
            label,
            answer: r.answer,
            linf_answer: r.linf_answer,
            l1_to_answer: dist,
            success: dist <= eps,
            group_size: r.group_size,
            light_size: r.light_size,
            linf_evals: r.linf_evals,
            l2_evals: r.l2_evals,
            fallback: r.fallback,
            direct: r.direct,
        });
    }
    write_rows(&a.out, &rows)
}

#[derive(Serialize)]
struct AdversarialRow {
    which: &'static str,
    n: usize,
    k: usize,
    s: usize,
    metric: &'static str,
    sampling: &'static str,
    trials: usize,
    success_rate: f64,
    failure_rate: f64,
}

fn adversarial_rates(a: AdversarialArgs, seed: u64) -> Result<()> {
    let sampling = match a.sampling {
        SamplingArg::Fixed => Sampling::Fixed,
        SamplingArg::Poisson => Sampling::Poissonized,
    };
    let (which, p, others, default_metric) = match a.which {
        Which::Light => {
            let (p, qs) = adversarial::light_adversarial(a.n, a.k, seed)?;
            ("light", p, qs, Metric::L1)
        }
        Which::Heavy => {
            let (p, q) = adversarial::heavy_adversarial(a.n, a.s)?;
            ("heavy", p, DistributionSet::new(vec![q])?, Metric::L2)
        }
    };
    let metric = a.metric.unwrap_or(default_metric);
    let rate = adversarial::naive_success_rate(&p, &others, metric, a.s, sampling, a.trials, seed)?;
    let row = AdversarialRow {
        which,
        n: a.n,
        k: others.len(),
        s: a.s,
        metric: match metric {
            Metric::L1 => "l1",
            Metric::L2 => "l2",
            Metric::Linf => "linf",
        },
        sampling: match sampling {
            Sampling::Fixed => "fixed",
            Sampling::Poissonized => "poisson",
        },
        trials: a.trials,
        success_rate: rate,
        failure_rate: 1.0 - rate,
    };
    eprintln!("{which}: success {rate:.4}, failure {:.4}", 1.0 - rate);
    write_rows(&a.out, &[row])
}

fn bench_synth(a: BenchSynthArgs, seed: u64) -> Result<()> {
    let vs = a.family.generate(a.n, a.k, derive_seed(seed, &[0]))?;
    let spec = GridSpec {
        samples: a.samples,
        fast_consts: a.fastconst,
        n_all_pairs: a.nallpairs,
        query_sets: a.trials,
        queries_per_set: a.queries_per_set,
    };
    let rows = synth::run_grid(&vs, a.family.as_str(), &spec, derive_seed(seed, &[1]))?;
    synth::write_grid_csv(&a.out, &rows)
}

fn bench_net(a: BenchNetArgs, seed: u64) -> Result<()> {
    let all = read_distribution_set(&a.dists)?;
    let (dataset, queries) = trace::split_dataset(&all, a.n_dataset, a.n_queries)?;
    let setting = NetSetting {
        samples: a.samples,
        fast_const: a.fastconst,
        n_all_pairs: a.nallpairs,
    };
    let rows = trace::nn_eval(&dataset, &queries, setting, a.trials, seed)?;
    trace::write_net_csv(&a.out, &rows)
}

fn run_verify(a: VerifyArgs, seed: u64) -> Result<()> {
    let checks = verify::run_suite(a.suite, a.trials, seed)?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
    if failed > 0 {
        return Err(Error::Format(format!("{failed} verification checks failed")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert_eq!(parse_schedule("theory").unwrap(), Schedule::Theoretical);
        assert_eq!(parse_schedule("fastconst=10").unwrap(), Schedule::FastConst(10));
        assert_eq!(parse_schedule("full=60").unwrap(), Schedule::FullSample(60));
        assert!(parse_schedule("fast=1").is_err());
    }

    #[test]
    fn no_arguments_is_a_usage_error() {
        assert_eq!(run(["densel"]), ExitCode::from(1));
        assert_eq!(run(["densel", "--bogus"]), ExitCode::from(1));
        assert_eq!(run(["densel", "--help"]), ExitCode::SUCCESS);
    }
}
