use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use misnc_core::Variant;
use misnc_harness::report::{report_tables, sweep_tables};
use misnc_harness::{
    emit_report, emit_sweep, run_experiment, run_sweep, InstanceDocument, Mode, ReportFormat,
    SweepConfig,
};

#[derive(Parser)]
#[command(name = "misnc", version, about = "Coded multicast routing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Concurrent-throughput FPTAS on an instance (butterfly, d = 150, by default).
    Offline(RunArgs),
    /// Online admission and routing over a request trace (seeded butterfly trace by default).
    Online(RunArgs),
    /// Min-cost coded multicast for each request (butterfly session A, unit prices, by default).
    Mincost(RunArgs),
    /// Butterfly sweeps over epsilon and phi with the matched link-load table.
    Sweep(SweepArgs),
    /// Writes a butterfly instance document.
    GenButterfly(GenButterflyArgs),
    /// Writes an online butterfly instance with a seeded trace.
    GenTrace(GenTraceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Exact,
    Shifted,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Exact => Variant::Exact,
            VariantArg::Shifted => Variant::Shifted,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Table,
    Both,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Table => ReportFormat::Table,
            FormatArg::Both => ReportFormat::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Offline,
    Online,
    Mincost,
}

#[derive(Args)]
struct Output {
    /// Directory for report files; prints to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct RunArgs {
    /// Instance document (JSON). Flags override its parameters.
    instance: Option<PathBuf>,
    #[arg(long, conflicts_with = "omega")]
    epsilon: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda_thr: Option<f64>,
    /// Seed of the generated butterfly trace when no instance is given.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1,0.05")]
    epsilons: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    phis: Vec<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    variant: VariantArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct GenButterflyArgs {
    #[arg(long, value_enum, default_value = "offline")]
    mode: ModeArg,
    /// Session demand `d` (default 150, or 1.5 per request for online).
    #[arg(long)]
    size: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenTraceArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    count_a: usize,
    #[arg(long, default_value_t = 100)]
    count_b: usize,
    #[arg(long, default_value_t = 1.5)]
    size: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(mode: Mode, args: &RunArgs) -> Result<InstanceDocument> {
    let mut doc = match &args.instance {
        Some(path) => InstanceDocument::from_path(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => match mode {
            Mode::Offline => InstanceDocument::butterfly_offline(150.0),
            Mode::Online => {
                InstanceDocument::butterfly_online(args.seed.unwrap_or(1), 100, 100, 1.5)
            }
            Mode::Mincost => InstanceDocument::butterfly_mincost(150.0),
        },
    };
    if doc.mode != mode {
        bail!("instance is a {:?} document", doc.mode);
    }
    let p = &mut doc.params;
    if args.epsilon.is_some() {
        p.epsilon = args.epsilon;
        p.omega = None;
    }
    if args.omega.is_some() {
        p.omega = args.omega;
        p.epsilon = None;
    }
    p.phi = args.phi.or(p.phi);
    p.variant = args.variant.map(Variant::from).or(p.variant);
    p.sigma = args.sigma.or(p.sigma);
    p.lambda_thr = args.lambda_thr.or(p.lambda_thr);
    p.seed = args.seed.or(p.seed);
    Ok(doc)
}

fn print_tables(tables: Vec<(String, String)>) {
    for (name, text) in tables {
        println!("# {name}");
        print!("{text}");
    }
}

fn run(mode: Mode, args: RunArgs) -> Result<bool> {
    let doc = load(mode, &args)?;
    let report = run_experiment(&doc)?;
    let format = ReportFormat::from(args.output.format);
    match &args.output.out {
        Some(dir) => {
            for path in emit_report(&report, format, dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            if format != ReportFormat::Table {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
            if format != ReportFormat::Json {
                print_tables(report_tables(&report)?);
            }
        }
    }
    for check in &report.certificates.checks {
        let status = if check.passed { "ok" } else { "FAILED" };
        eprintln!("{status:>6} {}: {}", check.name, check.detail);
    }
    Ok(report.passed())
}

fn sweep(args: SweepArgs) -> Result<bool> {
    let config = SweepConfig {
        epsilons: args.epsilons,
        phis: args.phis,
        variant: args.variant.into(),
        seed: args.seed,
        ..SweepConfig::default()
    };
    let report = run_sweep(&config)?;
    let format = ReportFormat::from(args.output.format);
    match &args.output.out {
        Some(dir) => {
            for path in emit_sweep(&report, format, dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            if format != ReportFormat::Table {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
            if format != ReportFormat::Json {
                print_tables(sweep_tables(&report)?);
            }
        }
    }
    Ok(report.passed())
}

fn write_doc(doc: &InstanceDocument, out: Option<PathBuf>) -> Result<bool> {
    match out {
        Some(path) => std::fs::write(&path, doc.to_json() + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{}", doc.to_json()),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Offline(args) => run(Mode::Offline, args),
        Command::Online(args) => run(Mode::Online, args),
        Command::Mincost(args) => run(Mode::Mincost, args),
        Command::Sweep(args) => sweep(args),
        Command::GenButterfly(args) => {
            let doc = match args.mode {
                ModeArg::Offline => InstanceDocument::butterfly_offline(args.size.unwrap_or(150.0)),
                ModeArg::Online => {
                    InstanceDocument::butterfly_online(1, 100, 100, args.size.unwrap_or(1.5))
                }
                ModeArg::Mincost => InstanceDocument::butterfly_mincost(args.size.unwrap_or(150.0)),
            };
            write_doc(&doc, args.out)
        }
        Command::GenTrace(args) => write_doc(
            &InstanceDocument::butterfly_online(args.seed, args.count_a, args.count_b, args.size),
            args.out,
        ),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("certificate checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
