use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qbar_cli::campaign::{run_campaign, run_instance, CampaignConfig, CampaignReport, Op, RunConfig};
use qbar_cli::claims::{parse_claims, verify_claims};
use qbar_cli::instance::parse_instance;
use qbar_cli::{CliError, EXIT_INPUT};

#[derive(Parser)]
#[command(name = "qbar", version, about = "Small-height constructions for quadratic spaces over the algebraic numbers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct Shared {
    /// Campaign seed (per-instance seeds are derived from it).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo trials for finite parts.
    #[arg(long, global = true, default_value_t = 8)]
    trials: usize,
    #[arg(long, global = true, default_value_t = 128)]
    prec_start: u32,
    #[arg(long, global = true, default_value_t = 4096)]
    prec_max: u32,
    #[arg(long, global = true, default_value_t = 64)]
    degree_cap: usize,
    /// Also certify the proof-internal inequalities.
    #[arg(long, global = true)]
    trace_bounds: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    report: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Zero the timing block so reports are byte-comparable.
    #[arg(long, global = true)]
    mask_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct Source {
    /// Instance file (JSON).
    #[arg(long, conflicts_with = "campaign")]
    input: Option<PathBuf>,
    /// Run on this many seeded random instances.
    #[arg(long)]
    campaign: Option<usize>,
    #[arg(long, default_value_t = 2)]
    n_min: usize,
    #[arg(long, default_value_t = 6)]
    n_max: usize,
    #[arg(long, default_value_t = 1)]
    l_min: usize,
    #[arg(long)]
    l_max: Option<usize>,
    /// Keep L < N.
    #[arg(long)]
    proper: bool,
    /// Entry bound for random Gram matrices and subspaces.
    #[arg(long, default_value_t = 10)]
    bound: i64,
    /// Make every k-th campaign instance singular.
    #[arg(long, default_value_t = 0)]
    singular_every: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Heights and a small basis of Z.
    Height(Source),
    /// Small zeros of F and an isotropic vector of Z.
    Isotropic(Source),
    /// A maximal totally isotropic subspace.
    Maxiso(Source),
    /// Witt decomposition.
    Witt(Source),
    /// An F-orthogonal basis of Z.
    Orthobasis(Source),
    /// Cartan–Dieudonné factorization of the instance isometry (or a random one).
    Cd(Source),
    /// Stand-alone height inequality suites.
    Suite(Source),
    /// Check a claim file, or run every construction on an instance.
    Verify {
        #[arg(long)]
        input: PathBuf,
    },
}

fn read(path: &PathBuf) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn run(cli: &Cli) -> Result<CampaignReport, CliError> {
    let s = &cli.shared;
    let rc = RunConfig {
        seed: s.seed,
        trials: s.trials,
        prec_start: s.prec_start,
        prec_max: s.prec_max,
        degree_cap: s.degree_cap,
        trace_bounds: s.trace_bounds,
    };
    let (op, src) = match &cli.cmd {
        Cmd::Height(x) => (Op::Height, x),
        Cmd::Isotropic(x) => (Op::Isotropic, x),
        Cmd::Maxiso(x) => (Op::Maxiso, x),
        Cmd::Witt(x) => (Op::Witt, x),
        Cmd::Orthobasis(x) => (Op::Orthobasis, x),
        Cmd::Cd(x) => (Op::Cd, x),
        Cmd::Suite(x) => (Op::Suite, x),
        Cmd::Verify { input } => {
            let bytes = read(input)?;
            let v: serde_json::Value =
                serde_json::from_slice(&bytes).map_err(|e| CliError::Schema(format!("line {}: {e}", e.line())))?;
            return if v.get("claims").is_some() {
                verify_claims(&parse_claims(&bytes)?, &rc)
            } else {
                let inst = parse_instance(&bytes)?.build(rc.degree_cap)?;
                Ok(run_instance(&Op::CONSTRUCTIONS, &inst, &rc))
            };
        }
    };
    match (&src.input, src.campaign) {
        (Some(path), _) => {
            let inst = parse_instance(&read(path)?)?.build(rc.degree_cap)?;
            Ok(run_instance(&[op], &inst, &rc))
        }
        (None, Some(m)) => {
            let mut cfg = CampaignConfig::new(op, m, rc);
            cfg.n_min = src.n_min;
            cfg.n_max = src.n_max.max(src.n_min);
            cfg.l_min = src.l_min;
            cfg.l_max = src.l_max;
            cfg.proper = src.proper;
            cfg.bound = src.bound;
            cfg.singular_every = src.singular_every;
            if cfg.n_min < 1 || (cfg.proper && cfg.n_min < 2) {
                return Err(CliError::Schema("campaign dimensions too small".into()));
            }
            Ok(run_campaign(&cfg))
        }
        (None, None) => Err(CliError::Schema("give --input PATH or --campaign M".into())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    if cli.shared.mask_timing {
        report.mask_timing();
    }
    let body = match cli.shared.report {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    match &cli.shared.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, body) {
                eprintln!("error: {}: {e}", p.display());
                return ExitCode::from(EXIT_INPUT as u8);
            }
            print!("{}", report.summary());
        }
        None => {
            println!("{body}");
            eprint!("{}", report.summary());
        }
    }
    ExitCode::from(report.exit_code() as u8)
}
