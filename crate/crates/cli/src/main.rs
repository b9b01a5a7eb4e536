use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pinning::annealed::{annealed_solution, crossover_delta0, AnnealedSolution, DEFAULT_EPS2};
use pinning::excursion::{LawConfig, SlowVariation};
use pinning::quenched::{
    contact_fraction, forward_recursion, sample_disorder, CapMode, ModelParams,
};
use pinning::scan::{
    emit_plot_data, gap_probe, run_scan, DeltaGrid, PlotKind, ScanResult, ScanSpec,
};
use serde::Serialize;

mod sample;
mod verify;

/// Quenched and annealed pinning models: solvers, exact recursions, sweeps.
#[derive(Parser)]
#[command(name = "pinlab", version)]
struct Cli {
    /// JSON document with the layout of a scan spec (law, betas, deltas, N, ...).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Annealed solution(s) as JSON: one point from flags, or the config grid.
    Annealed(AnnealedArgs),
    /// One disorder realization: partition function and contact fraction.
    Quenched(QuenchedArgs),
    /// Full replicated sweep; writes replicas.csv, summary.csv, result.json.
    Scan,
    /// Exact path samples with skeleton statistics.
    Sample(sample::SampleArgs),
    /// Oracle identity suite; exits nonzero on any failure.
    Verify(verify::VerifyArgs),
    /// Gnuplot-ready tables (.dat) and JSON mirrors from a scan result.
    PlotData(PlotArgs),
}

/// Law used when no config is given.
#[derive(Args, Clone)]
struct LawArgs {
    /// Tail exponent of the excursion law.
    #[arg(long, default_value_t = 1.8)]
    c: f64,
    /// Last excursion length tabulated before the asymptotic tail.
    #[arg(long, default_value_t = 4096)]
    cap: usize,
}

#[derive(Args)]
struct AnnealedArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[command(flatten)]
    law: LawArgs,
}

#[derive(Args)]
struct QuenchedArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    delta: f64,
    /// System size N.
    #[arg(short = 'N', long = "size")]
    n: usize,
    /// Disorder stream id.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Keep only excursions up to this length in the recursion.
    #[arg(long)]
    capped: Option<usize>,
    #[command(flatten)]
    law: LawArgs,
}

#[derive(Args)]
struct PlotArgs {
    /// Saved `result.json`; without it the config's scan is run first.
    #[arg(long)]
    from: Option<PathBuf>,
    /// Plot kinds to emit (default: all).
    #[arg(long = "kind", value_parser = parse_kind)]
    kinds: Vec<PlotKind>,
}

fn parse_kind(s: &str) -> std::result::Result<PlotKind, String> {
    PlotKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| {
            let names: Vec<&str> = PlotKind::ALL.iter().map(|k| k.name()).collect();
            format!(
                "unknown plot kind {s:?}; expected one of {}",
                names.join(", ")
            )
        })
}

struct Settings {
    spec: Option<ScanSpec>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl Settings {
    fn law(&self, flags: &LawArgs) -> LawConfig {
        match &self.spec {
            Some(s) => s.law,
            None => LawConfig::new(flags.c, SlowVariation::Constant { a: 1.0 }, flags.cap),
        }
    }

    fn seed(&self) -> u64 {
        self.seed
            .or(self.spec.as_ref().map(|s| s.master_seed))
            .unwrap_or(0)
    }

    fn eps2(&self, flag: Option<f64>) -> f64 {
        flag.or(self.spec.as_ref().map(|s| s.eps2))
            .unwrap_or(DEFAULT_EPS2)
    }

    fn require_spec(&self) -> Result<ScanSpec> {
        self.spec
            .clone()
            .context("this subcommand needs --config <scan spec JSON>")
    }
}

/// Writes pretty JSON to `--out` if given, else to stdout.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            serde_json::to_writer_pretty(BufWriter::new(file), value)?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, value)?;
            writeln!(lock)?;
        }
    }
    Ok(())
}

fn annealed(ctx: &Settings, args: &AnnealedArgs) -> Result<()> {
    let law = ctx.law(&args.law).build()?;
    let eps2 = ctx.eps2(args.eps2);
    let solve = |beta: f64, delta: f64| -> Result<AnnealedSolution> {
        let mut sol = annealed_solution(&law, beta, delta, eps2)?;
        sol.delta0 = crossover_delta0(&law, beta).ok().map(|x| x.delta0);
        Ok(sol)
    };
    if let (Some(beta), Some(delta)) = (args.beta, args.delta) {
        return emit_json(&solve(beta, delta)?, ctx.out.as_deref());
    }
    let Some(spec) = &ctx.spec else {
        bail!("give --beta and --delta, or a --config grid");
    };
    let mut all = Vec::new();
    for &beta in &spec.betas {
        match &spec.deltas {
            DeltaGrid::Absolute(ds) => {
                for &d in ds {
                    all.push(solve(beta, d)?);
                }
            }
            DeltaGrid::RelativeToDelta0(rs) => {
                let d0 = crossover_delta0(&law, beta)
                    .with_context(|| format!("Delta0 undefined at beta = {beta}"))?
                    .delta0;
                for &r in rs {
                    all.push(solve(beta, r * d0)?);
                }
            }
        }
    }
    emit_json(&all, ctx.out.as_deref())
}

#[derive(Serialize)]
struct QuenchedReport {
    beta: f64,
    delta: f64,
    #[serde(rename = "N")]
    n: usize,
    seed: u64,
    stream_id: u64,
    log_z0_n: f64,
    log_z_free: f64,
    f_q_hat: f64,
    contact_fraction: f64,
    f_a: f64,
    delta_star: f64,
    cap_bias: Option<f64>,
}

fn quenched(ctx: &Settings, args: &QuenchedArgs) -> Result<()> {
    let law = ctx.law(&args.law).build()?;
    let mode = args.capped.map_or(CapMode::Exact, CapMode::Capped);
    let params = ModelParams {
        mode,
        ..ModelParams::new(args.beta, args.delta, args.n)
    };
    let seed = ctx.seed();
    let disorder = sample_disorder(seed, args.stream, args.n);
    let tables = forward_recursion(&law, &params, &disorder)?;
    let sol = annealed_solution(&law, args.beta, args.delta, ctx.eps2(None))?;
    let log_z0_n = tables.log_z0[args.n];
    let report = QuenchedReport {
        beta: args.beta,
        delta: args.delta,
        n: args.n,
        seed,
        stream_id: args.stream,
        log_z0_n,
        log_z_free: tables.log_zfree,
        f_q_hat: log_z0_n / (args.beta * args.n as f64),
        contact_fraction: contact_fraction(&tables),
        f_a: sol.f_a,
        delta_star: sol.delta_star,
        cap_bias: tables.cap_bias(),
    };
    emit_json(&report, ctx.out.as_deref())
}

fn scan(ctx: &Settings) -> Result<()> {
    let mut spec = ctx.require_spec()?;
    if let Some(seed) = ctx.seed {
        spec.master_seed = seed;
    }
    if let Some(dir) = &ctx.out {
        spec.output = Some(dir.clone());
    }
    let result = run_scan(&spec)?;
    if let Some(dir) = &spec.output {
        let probe = File::create(dir.join("gap_probe.json"))?;
        serde_json::to_writer_pretty(BufWriter::new(probe), &gap_probe(&result))?;
        eprintln!("wrote {} points to {}", result.points.len(), dir.display());
    } else {
        let mut w = csv::Writer::from_writer(io::stdout());
        for p in &result.points {
            w.serialize(p)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn plot(ctx: &Settings, args: &PlotArgs) -> Result<()> {
    let result: ScanResult = match &args.from {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            serde_json::from_reader(io::BufReader::new(file))?
        }
        None => {
            let mut spec = ctx.require_spec()?;
            if let Some(seed) = ctx.seed {
                spec.master_seed = seed;
            }
            spec.output = None;
            run_scan(&spec)?
        }
    };
    let kinds = if args.kinds.is_empty() {
        PlotKind::ALL.to_vec()
    } else {
        args.kinds.clone()
    };
    let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("plots"));
    for path in emit_plot_data(&result, &kinds, &dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let spec = match &cli.config {
        Some(path) => Some(
            ScanSpec::from_json_file(path)
                .with_context(|| format!("reading {}", path.display()))?,
        ),
        None => None,
    };
    let ctx = Settings {
        spec,
        seed: cli.seed,
        out: cli.out,
    };
    if let Some(dir) = ctx
        .out
        .as_deref()
        .filter(|_| matches!(cli.command, Command::Scan))
    {
        fs::create_dir_all(dir)?;
    }
    match &cli.command {
        Command::Annealed(a) => annealed(&ctx, a)?,
        Command::Quenched(a) => quenched(&ctx, a)?,
        Command::Scan => scan(&ctx)?,
        Command::Sample(a) => sample::run(&ctx, a)?,
        Command::Verify(a) => return verify::run(a, ctx.seed()),
        Command::PlotData(a) => plot(&ctx, a)?,
    }
    Ok(ExitCode::SUCCESS)
}

/// Output piped into `head` and similar closes early; that is not an error.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<serde_json::Error>()
                .and_then(|j| j.io_error_kind())
                .is_some_and(|k| k == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
