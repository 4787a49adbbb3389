//! `mmtpd`: search, verify, discretize, compose and inspect decompositions of
//! matrix multiplication tensors.
//!
//! Exit codes: 0 on success, 1 when a decomposition fails verification or
//! discretization, 2 on configuration, usage or input errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmtpd::campaign::{run_campaign, CampaignConfig, StSelection};
use mmtpd::discretize::{discretize, DiscretizeConfig};
use mmtpd::layout::{contract, GenCsLayout};
use mmtpd::mmt::{build_mmt, verify_pd, Shape, Verdict};
use mmtpd::pdfile::{PdRecord, STRUCTURE_TOL};
use mmtpd::transforms::{jacobian_rank, recursive_cs_pd, recursive_pd, DEFAULT_RANK_TOL};
use mmtpd::Error;
use serde_json::json;

/// Environment variable overriding the worker count of `search`.
const WORKERS_ENV: &str = "MMTPD_WORKERS";

/// Residual norm accepted as exact for non-integer decompositions.
const FLOAT_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "mmtpd", version, about = "Polyadic decompositions of matrix multiplication tensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a multi-seed search campaign.
    Search(SearchArgs),
    /// Check a PD file against its tensor and declared structure.
    Verify {
        path: PathBuf,
        /// Also report the Jacobian rank.
        #[arg(long)]
        rank: bool,
        #[arg(long, default_value_t = FLOAT_TOL)]
        tol: f64,
    },
    /// Refine a PD file into a practical decomposition.
    Discretize {
        path: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        h_scale: f64,
        #[arg(long, default_value_t = 0.25)]
        threshold: f64,
    },
    /// Compose a PD with itself recursively.
    Compose {
        path: PathBuf,
        #[arg(long, default_value_t = 1)]
        times: u32,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Singular values and numerical rank of the structured Jacobian.
    Rank {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tol: f64,
    },
    /// Print the coordinates of the ones of T_mpn (0-based).
    MmtDump {
        /// `m,p,n`
        shape: String,
    },
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// TOML campaign file; flags below override its values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// `m,p,n`
    #[arg(long)]
    shape: Option<String>,
    #[arg(long)]
    rank: Option<usize>,
    /// `all` or `s,t[;s,t...]`
    #[arg(long)]
    st: Option<String>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long)]
    no_discretize: bool,
    #[arg(long)]
    no_rank: bool,
}

enum Failure {
    Verification(String),
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotVerified(_) | Error::StructureViolation { .. } | Error::Discretize(_) => {
                Failure::Verification(e.to_string())
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn parse_shape(text: &str) -> Result<Shape, Failure> {
    let dims: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Config(format!("shape must be `m,p,n`, got `{text}`")))?;
    match dims[..] {
        [m, p, n] => Ok(Shape::new(m, p, n)?),
        _ => Err(Failure::Config(format!("shape must be `m,p,n`, got `{text}`"))),
    }
}

fn search(args: SearchArgs) -> Result<(), Failure> {
    let mut config = match &args.config {
        Some(path) => CampaignConfig::from_toml_file(path)?,
        None => {
            let (Some(shape), Some(rank)) = (&args.shape, args.rank) else {
                return Err(Failure::Config("without --config, --shape and --rank are required".into()));
            };
            let s = parse_shape(shape)?;
            CampaignConfig::new([s.m, s.p, s.n], rank, StSelection::all(), 50)
        }
    };
    if let Some(shape) = &args.shape {
        let s = parse_shape(shape)?;
        config.shape = [s.m, s.p, s.n];
    }
    if let Some(rank) = args.rank {
        config.rank = rank;
    }
    if let Some(st) = &args.st {
        config.st = StSelection::parse(st)?;
    }
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(base) = args.base_seed {
        config.base_seed = base;
    }
    if args.output.is_some() {
        config.output_dir = args.output.clone();
    }
    if args.workers.is_some() {
        config.workers = args.workers;
    }
    config.discretize.enabled &= !args.no_discretize;
    config.rank_analysis.enabled &= !args.no_rank;
    let summary = run_campaign(&config)?;
    print!("{}", summary.to_table());
    if let Some(dir) = &config.output_dir {
        println!("wrote {} PD files and summary.csv to {}", summary.files.len(), dir.display());
    }
    Ok(())
}

fn verify(path: PathBuf, rank: bool, tol: f64) -> Result<(), Failure> {
    let rec = PdRecord::read(&path)?;
    let shape = rec.shape();
    let tensor = build_mmt(shape.m, shape.p, shape.n)?;
    let verdict = verify_pd(&rec.factors, &tensor, tol)?;
    let verdict_text = match verdict {
        Verdict::ExactInteger => "exact_integer".to_string(),
        Verdict::ExactFloat { residual_norm } => format!("exact_float (residual {residual_norm:.3e})"),
        Verdict::Failed { residual_norm } => format!("failed (residual {residual_norm:.3e})"),
    };
    println!("{}: T_{} rank {}: {verdict_text}", path.display(), shape.label(), rec.rank());
    let structure = match rec.structure {
        None => {
            println!("structure: unstructured, check skipped");
            Ok(())
        }
        Some((s, t)) => match rec.check_structure() {
            Ok(()) => {
                println!("structure: (s,t) = ({s},{t}) conforms");
                Ok(())
            }
            Err(e) => {
                println!("structure: (s,t) = ({s},{t}) violated: {e}");
                Err(e)
            }
        },
    };
    if rank {
        let layout = rec.layout()?;
        let point = contract(&rec.factors, &layout, STRUCTURE_TOL)
            .or_else(|_| contract(&rec.factors, &GenCsLayout::unstructured(shape, rec.rank())?, 0.0))?;
        let report = jacobian_rank(&point, &tensor, DEFAULT_RANK_TOL)?;
        println!("jacobian: {} x {}, rank {}", report.rows, report.cols, report.rank);
    }
    if !verdict.is_exact() {
        return Err(Failure::Verification(format!("residual {:.3e}", verdict.residual_norm())));
    }
    structure.map_err(Failure::from)
}

fn discretize_file(path: PathBuf, output: PathBuf, h_scale: f64, threshold: f64) -> Result<(), Failure> {
    let rec = PdRecord::read(&path)?;
    let layout = rec.layout()?;
    let point = contract(&rec.factors, &layout, STRUCTURE_TOL)?;
    let shape = rec.shape();
    let tensor = build_mmt(shape.m, shape.p, shape.n)?;
    let config = DiscretizeConfig { h_scale, rounding_threshold: threshold, ..Default::default() };
    let mut out = discretize(&point, &tensor, &config)?;
    out.provenance.insert("source".into(), json!(path.display().to_string()));
    out.write(&output)?;
    println!("practical PD written to {}", output.display());
    Ok(())
}

fn compose(path: PathBuf, times: u32, output: PathBuf) -> Result<(), Failure> {
    let mut rec = PdRecord::read(&path)?;
    let check = |rec: &PdRecord| -> Result<(), Failure> {
        let s = rec.shape();
        let verdict = verify_pd(&rec.factors, &build_mmt(s.m, s.p, s.n)?, FLOAT_TOL)?;
        if verdict.is_exact() {
            Ok(())
        } else {
            Err(Failure::Verification(format!("T_{} residual {:.3e}", s.label(), verdict.residual_norm())))
        }
    };
    check(&rec)?;
    for _ in 0..times {
        let layout = rec.layout()?;
        let (factors, structure) = if layout.is_full_cs() {
            let (f, l) = recursive_cs_pd(&rec.factors, &layout)?;
            (f, Some((l.s(), l.t())))
        } else {
            (recursive_pd(&rec.factors)?, None)
        };
        let mut provenance = rec.provenance.clone();
        let depth = provenance.get("composed").and_then(|v| v.as_u64()).unwrap_or(0);
        provenance.insert("composed".into(), json!(depth + 1));
        rec = PdRecord::new(factors, structure, provenance)?;
        check(&rec)?;
    }
    rec.write(&output)?;
    let st = rec.structure.map_or("unstructured".to_string(), |(s, t)| format!("(s,t) = ({s},{t})"));
    println!("T_{} rank {} {st} written to {}", rec.shape().label(), rec.rank(), output.display());
    Ok(())
}

fn rank(path: PathBuf, tol: f64) -> Result<(), Failure> {
    let rec = PdRecord::read(&path)?;
    let shape = rec.shape();
    let tensor = build_mmt(shape.m, shape.p, shape.n)?;
    let layout = rec.layout()?;
    let point = contract(&rec.factors, &layout, STRUCTURE_TOL)?;
    let report = jacobian_rank(&point, &tensor, tol)?;
    let mut summary = report.summary_json();
    if layout.is_unstructured() {
        // Dimension of the scaling and PQR orbit; informational, not a bound on the rank.
        let orbit = 2 * rec.rank() + shape.m * shape.m + shape.p * shape.p + shape.n * shape.n - 3;
        summary["invariance_dim"] = json!(orbit);
        summary["n_vars_minus_invariance_dim"] = json!(layout.n_vars().saturating_sub(orbit));
    }
    println!("{}", serde_json::to_string_pretty(&summary).expect("JSON values serialize"));
    Ok(())
}

fn mmt_dump(shape: &str) -> Result<(), Failure> {
    let s = parse_shape(shape)?;
    let t = build_mmt(s.m, s.p, s.n)?;
    let [a, b, c] = s.tensor_dims();
    println!("# T_{} shape {a}x{b}x{c}, {} ones", s.label(), s.m * s.p * s.n);
    for [i, j, k] in t.nonzeros() {
        println!("{i} {j} {k}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Search(args) => search(args),
        Command::Verify { path, rank, tol } => verify(path, rank, tol),
        Command::Discretize { path, output, h_scale, threshold } => discretize_file(path, output, h_scale, threshold),
        Command::Compose { path, times, output } => compose(path, times, output),
        Command::Rank { path, tol } => rank(path, tol),
        Command::MmtDump { shape } => mmt_dump(&shape),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
