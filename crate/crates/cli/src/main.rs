//! `ipstable`: generate instances, cluster them, verify stability, benchmark.
//!
//! Exit codes: 0 ok, 1 stability check failed, 2 usage or input error,
//! 3 step cap exceeded, 4 internal error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ipcluster::fast::{fast_ls, FastConfig};
use ipcluster::local_search::{
    max_ip_local_search, natural_local_search, LsConfig, StepKind, TerminalStatus,
};
use ipcluster::median_ip::{median_ip_cluster, MedianConfig};
use ipcluster::merge_split::{merge_split_ls, MergeSplitConfig};
use ipcluster::metric::{
    generate, read_matrix_csv, read_points_csv, write_matrix_csv, write_points_csv, GenKind,
    GenSpec, Norm,
};
use ipcluster::potential::phi_avg_clustering;
use ipcluster::stable_opt::stable_cluster;
use ipcluster::{verify_stability, Clustering, Error, MetricSpace, Objective};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

#[derive(Parser)]
#[command(name = "ipstable", version, about = "IP-stable clustering toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic instance.
    Gen(GenArgs),
    /// Cluster an instance and report stability.
    Cluster(ClusterArgs),
    /// Verify a clustering against an instance.
    Verify(VerifyArgs),
    /// Run algorithms over a grid of generated instances and print CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// euclidean, shortest-path or planted.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Planted only: group diameter over inter-group gap.
    #[arg(long, default_value_t = 0.1)]
    separation: f64,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Write a distance matrix even when coordinates exist.
    #[arg(long)]
    matrix: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// Points when the first row is a header, otherwise a matrix.
    Auto,
    Matrix,
    Points,
}

#[derive(Args)]
struct InstanceArgs {
    /// Distance-matrix CSV or points CSV.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
    /// Norm for points files: l2 or l1.
    #[arg(long, default_value = "l2")]
    norm: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Alg {
    Natural,
    #[value(alias = "merge-split")]
    Mergesplit,
    Fast,
    #[value(alias = "stable")]
    Dp,
    Median,
    Max,
}

impl Alg {
    fn name(self) -> &'static str {
        match self {
            Alg::Natural => "natural",
            Alg::Mergesplit => "mergesplit",
            Alg::Fast => "fast",
            Alg::Dp => "dp",
            Alg::Median => "median",
            Alg::Max => "max",
        }
    }

    fn randomized(self) -> bool {
        matches!(self, Alg::Mergesplit | Alg::Fast)
    }

    fn default_objective(self) -> Objective {
        match self {
            Alg::Median => Objective::Median,
            Alg::Max => Objective::Max,
            _ => Objective::Avg,
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum)]
    alg: Alg,
    /// Stability target for `natural` (default 2·log₂n).
    #[arg(long)]
    alpha: Option<f64>,
    /// Required by the randomized algorithms (mergesplit, fast).
    #[arg(long)]
    seed: Option<u64>,
    /// Step cap (per epoch for `fast`).
    #[arg(long)]
    max_steps: Option<usize>,
    /// Objectives to verify, comma separated (default depends on the algorithm).
    #[arg(long, value_delimiter = ',')]
    objective: Vec<String>,
    /// Directory for clustering.json and report.json.
    #[arg(long)]
    out: PathBuf,
    /// Include wall time in the report.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    clustering: PathBuf,
    #[arg(long, default_value = "avg")]
    objective: String,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Algorithms, comma separated.
    #[arg(long)]
    alg: String,
    /// Instance sizes, comma separated; may be empty.
    #[arg(long)]
    n: String,
    #[arg(long, default_value = "10")]
    k: String,
    #[arg(long, default_value = "1")]
    seeds: String,
    #[arg(long, default_value = "euclidean")]
    kind: String,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0.1)]
    separation: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fill the time column.
    #[arg(long)]
    timing: bool,
}

/// A failure with its exit code.
struct Fail {
    code: u8,
    msg: String,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Cap(_) => 3,
            Error::Internal(_) => 4,
            _ => 2,
        };
        Fail {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail {
            code: 2,
            msg: format!("i/o error: {e}"),
        }
    }
}

fn usage_fail(msg: impl Into<String>) -> Fail {
    Fail {
        code: 2,
        msg: msg.into(),
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<(), Fail> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(&a),
        Cmd::Cluster(a) => cmd_cluster(&a),
        Cmd::Verify(a) => cmd_verify(&a),
        Cmd::Bench(a) => cmd_bench(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("ipstable: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_gen(a: &GenArgs) -> Result<u8, Fail> {
    let kind: GenKind = a.kind.parse()?;
    let spec = GenSpec {
        kind,
        n: a.n,
        k: a.k,
        dim: a.dim,
        separation: a.separation,
        seed: a.seed,
    };
    let g = generate(&spec)?;
    fs::create_dir_all(&a.out)?;
    let mut written = Vec::new();
    if g.space.points().is_some() && !a.matrix {
        let p = a.out.join("points.csv");
        write_points_csv(&g.space, &p)?;
        written.push(p);
    } else {
        let p = a.out.join("matrix.csv");
        write_matrix_csv(&g.space, &p)?;
        written.push(p);
    }
    if let Some(planted) = &g.planted {
        let p = a.out.join("planted.json");
        planted.write_json(&p)?;
        written.push(p);
    }
    for p in written {
        emit(&format!("{}\n", p.display()))?;
    }
    Ok(0)
}

fn load(a: &InstanceArgs) -> Result<MetricSpace, Fail> {
    let norm: Norm = a.norm.parse()?;
    let points = match a.format {
        Format::Matrix => false,
        Format::Points => true,
        Format::Auto => {
            let text = fs::read_to_string(&a.instance)?;
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
            first.split(',').any(|c| c.trim().parse::<f64>().is_err())
        }
    };
    Ok(if points {
        read_points_csv(&a.instance, norm)?
    } else {
        read_matrix_csv(&a.instance)?
    })
}

fn ser_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn ser_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => ser_f64(x, s),
        None => s.serialize_none(),
    }
}

#[derive(Serialize)]
struct Alpha(#[serde(serialize_with = "ser_f64")] f64);

#[derive(Default, Serialize)]
struct StepCounts {
    swap: usize,
    merge_split: usize,
    recompute: usize,
    epoch: usize,
}

#[derive(Serialize)]
struct RunReport {
    algorithm: &'static str,
    k: usize,
    n: usize,
    seed: Option<u64>,
    #[serde(serialize_with = "ser_opt_f64")]
    alpha_target: Option<f64>,
    alpha_achieved: BTreeMap<String, Alpha>,
    #[serde(
        serialize_with = "ser_opt_f64",
        skip_serializing_if = "Option::is_none"
    )]
    potential: Option<f64>,
    steps: StepCounts,
    queries: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_ms: Option<f64>,
    status: TerminalStatus,
}

/// Result of one algorithm run before verification.
struct Run {
    clustering: Clustering,
    alpha_target: Option<f64>,
    steps: StepCounts,
    status: TerminalStatus,
}

fn ls_counts(trace: &ipcluster::local_search::LsTrace) -> StepCounts {
    StepCounts {
        swap: trace.count(StepKind::Swap),
        merge_split: trace.count(StepKind::MergeSplit),
        ..StepCounts::default()
    }
}

fn run_alg(
    space: &MetricSpace,
    alg: Alg,
    k: usize,
    alpha: Option<f64>,
    seed: Option<u64>,
    max_steps: Option<usize>,
) -> Result<Run, Fail> {
    if alpha.is_some() && alg != Alg::Natural {
        return Err(usage_fail("--alpha applies to --alg natural only"));
    }
    if alg.randomized() && seed.is_none() {
        return Err(usage_fail(format!(
            "--alg {} is randomized and needs --seed",
            alg.name()
        )));
    }
    let log_n = (space.n() as f64).log2();
    let ls_config = |alpha| {
        let mut c = LsConfig {
            alpha,
            record: false,
            ..LsConfig::default()
        };
        if let Some(m) = max_steps {
            c.max_steps = m;
        }
        c
    };
    let run = match alg {
        Alg::Natural => {
            let (clustering, trace) = natural_local_search(space, k, &ls_config(alpha))?;
            Run {
                clustering,
                alpha_target: Some(alpha.unwrap_or(2.0 * log_n)),
                steps: ls_counts(&trace),
                status: trace.status,
            }
        }
        Alg::Max => {
            let (clustering, trace) = max_ip_local_search(space, k, &ls_config(None))?;
            Run {
                clustering,
                alpha_target: Some(1.0),
                steps: ls_counts(&trace),
                status: trace.status,
            }
        }
        Alg::Mergesplit => {
            let mut c = MergeSplitConfig {
                seed: seed.unwrap_or(0),
                ..MergeSplitConfig::default()
            };
            if let Some(m) = max_steps {
                c.max_steps = m;
            }
            let (clustering, trace) = merge_split_ls(space, k, &c)?;
            Run {
                clustering,
                alpha_target: Some(4.0 * log_n),
                steps: ls_counts(&trace),
                status: trace.status,
            }
        }
        Alg::Median => {
            let mut c = MedianConfig::default();
            if let Some(m) = max_steps {
                c.max_steps = m;
            }
            let (clustering, trace) = median_ip_cluster(space, k, &c)?;
            Run {
                clustering,
                alpha_target: Some(c.median_alpha()),
                steps: ls_counts(&trace),
                status: trace.status,
            }
        }
        Alg::Fast => {
            let mut c = FastConfig {
                seed: seed.unwrap_or(0),
                ..FastConfig::default()
            };
            if let Some(m) = max_steps {
                c.max_steps = m;
            }
            let (clustering, trace) = fast_ls(space, k, &c)?;
            let e = &trace.epochs;
            let steps = StepCounts {
                swap: e.iter().map(|r| r.swaps).sum(),
                merge_split: e.iter().map(|r| r.merge_splits).sum(),
                recompute: e.iter().map(|r| r.recomputes).sum(),
                epoch: e.len(),
            };
            Run {
                clustering,
                alpha_target: Some(16.0 * log_n),
                steps,
                status: TerminalStatus::Converged,
            }
        }
        Alg::Dp => {
            let (clustering, beta) = stable_cluster(space, k)?;
            Run {
                clustering,
                alpha_target: Some(beta),
                steps: StepCounts::default(),
                status: TerminalStatus::Converged,
            }
        }
    };
    Ok(run)
}

fn parse_objectives(names: &[String], alg: Alg) -> Result<Vec<Objective>, Fail> {
    if names.is_empty() {
        return Ok(vec![alg.default_objective()]);
    }
    let mut out = Vec::new();
    for s in names {
        let o: Objective = s.trim().parse()?;
        if !out.contains(&o) {
            out.push(o);
        }
    }
    Ok(out)
}

fn write_file(path: &Path, text: &str) -> Result<(), Fail> {
    fs::File::create(path)?.write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_cluster(a: &ClusterArgs) -> Result<u8, Fail> {
    let space = load(&a.instance)?;
    let objectives = parse_objectives(&a.objective, a.alg)?;
    let start = Instant::now();
    let run = run_alg(&space, a.alg, a.k, a.alpha, a.seed, a.max_steps)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let queries = space.queries();
    let mut alpha_achieved = BTreeMap::new();
    for o in &objectives {
        let r = verify_stability(&space, &run.clustering, *o, None)?;
        alpha_achieved.insert(o.to_string(), Alpha(r.alpha_achieved));
    }
    let potential = objectives
        .contains(&Objective::Avg)
        .then(|| phi_avg_clustering(&space, &run.clustering));
    let report = RunReport {
        algorithm: a.alg.name(),
        k: a.k,
        n: space.n(),
        seed: a.seed,
        alpha_target: run.alpha_target,
        alpha_achieved,
        potential,
        steps: run.steps,
        queries,
        wall_time_ms: a.timing.then_some(elapsed),
        status: run.status,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Fail {
        code: 4,
        msg: e.to_string(),
    })?;
    fs::create_dir_all(&a.out)?;
    run.clustering.write_json(a.out.join("clustering.json"))?;
    write_file(&a.out.join("report.json"), &format!("{json}\n"))?;
    emit(&format!("{json}\n"))?;
    Ok(match run.status {
        TerminalStatus::Converged => 0,
        TerminalStatus::CapExceeded => 3,
    })
}

fn cmd_verify(a: &VerifyArgs) -> Result<u8, Fail> {
    let space = load(&a.instance)?;
    let clustering = Clustering::read_json(&a.clustering)?;
    let objective: Objective = a.objective.parse()?;
    let report = verify_stability(&space, &clustering, objective, a.alpha)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Fail {
        code: 4,
        msg: e.to_string(),
    })?;
    emit(&format!("{json}\n"))?;
    Ok(if report.stable == Some(false) { 1 } else { 0 })
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Fail> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse::<T>()
                .map_err(|_| usage_fail(format!("bad {what} `{x}`")))
        })
        .collect()
}

fn cmd_bench(a: &BenchArgs) -> Result<u8, Fail> {
    let algs = a
        .alg
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| Alg::from_str(x, true).map_err(|_| usage_fail(format!("unknown algorithm `{x}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let ns: Vec<usize> = parse_list(&a.n, "n")?;
    let ks: Vec<usize> = parse_list(&a.k, "k")?;
    let seeds: Vec<u64> = parse_list(&a.seeds, "seed")?;
    let kind: GenKind = a.kind.parse()?;
    let mut cells = Vec::new();
    for &alg in &algs {
        for &n in &ns {
            for &k in &ks {
                for &seed in &seeds {
                    cells.push((alg, n, k, seed));
                }
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(alg, n, k, seed)| -> Result<String, Fail> {
            let spec = GenSpec {
                kind,
                n,
                k,
                dim: a.dim,
                separation: a.separation,
                seed,
            };
            let space = generate(&spec)?.space;
            let start = Instant::now();
            let (steps, status) = match run_alg(&space, alg, k, None, Some(seed), None) {
                Ok(run) => {
                    let s = &run.steps;
                    let steps = s.swap + s.merge_split + s.recompute;
                    let status = match run.status {
                        TerminalStatus::Converged => "converged",
                        TerminalStatus::CapExceeded => "cap_exceeded",
                    };
                    (steps, status)
                }
                Err(Fail { code: 3, .. }) => (0, "cap_exceeded"),
                Err(f) => return Err(f),
            };
            let time = if a.timing {
                format!("{:.3}", start.elapsed().as_secs_f64() * 1e3)
            } else {
                String::new()
            };
            Ok(format!(
                "{n},{k},{},{seed},{},{steps},{status},{time}",
                alg.name(),
                space.queries()
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = String::from("n,k,alg,seed,queries,steps,status,time_ms\n");
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    match &a.out {
        Some(p) => write_file(p, &out)?,
        None => emit(&out)?,
    }
    Ok(0)
}
