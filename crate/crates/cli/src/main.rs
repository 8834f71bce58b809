use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hymac::postproc::observed_orders;
use hymac_cli::config::{parse_assignment, parse_params, KEYS};
use hymac_cli::{cmd_convergence, cmd_fom, cmd_solve, cmd_train, cmd_validate, fmt_f64, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "hymac", version, about = "Hyper-reduced MAC solver: full-order runs, ROM training and validation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key (repeatable).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Full-order solve at `re`/`nu`: field CSVs and a JSON run record.
    Fom,
    /// Grid-refinement error table.
    Convergence,
    /// Greedy offline training: model file and training log.
    Train,
    /// Online solves of a trained model.
    Solve {
        #[arg(short, long)]
        model: PathBuf,
        /// Parameters `re:nu,...` (default: `params`, then the test set).
        #[arg(short, long)]
        params: Option<String>,
    },
    /// Truncation study of a trained model against truth references.
    Validate {
        #[arg(short, long)]
        model: PathBuf,
    },
    /// List the recognized config keys.
    Keys,
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let text = match &common.config {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        None => String::new(),
    };
    let overrides = common
        .set
        .iter()
        .map(|s| parse_assignment(s).ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {s:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunConfig::from_text(&text, &overrides)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Keys = cli.command {
        for (k, d) in KEYS {
            println!("{k:<18} {d}");
        }
        return Ok(());
    }
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Keys => unreachable!(),
        Command::Fom => {
            let s = cmd_fom(&cfg)?;
            println!("seconds = {}", fmt_f64(s.seconds));
            println!("picard_iterations = {}", s.iterations);
            println!(
                "max_divergence = {} ({})",
                fmt_f64(s.max_divergence),
                if s.divergence_ok() { "ok" } else { "FAILED" }
            );
            for f in &s.files {
                println!("wrote {}", f.display());
            }
            if !s.divergence_ok() {
                return Err(CliError::Numerical("discrete divergence check failed".into()));
            }
        }
        Command::Convergence => {
            let rows = cmd_convergence(&cfg)?;
            println!("n,u_err,v_err,p_err");
            for r in &rows {
                println!("{},{},{},{}", r.n, fmt_f64(r.u_err), fmt_f64(r.v_err), fmt_f64(r.p_err));
            }
            for (w, o) in rows.windows(2).zip(observed_orders(&rows)) {
                println!(
                    "order {}->{}: {} {} {}",
                    w[0].n,
                    w[1].n,
                    fmt_f64(o[0]),
                    fmt_f64(o[1]),
                    fmt_f64(o[2])
                );
            }
        }
        Command::Train => {
            let s = cmd_train(&cfg)?;
            println!("n = {}", s.model.n());
            println!("m = {}", s.model.m());
            println!("adaptive_points = {}", s.log.total_adaptive());
            println!("stop = {}", s.log.stop.describe());
            println!("seconds = {}", fmt_f64(s.seconds));
            println!("wrote {}", s.model_path.display());
            println!("wrote {}", s.log_path.display());
        }
        Command::Solve { model, params } => {
            let params = params.map(|p| parse_params("--params", &p)).transpose()?;
            let rows = cmd_solve(&model, &cfg, params)?;
            for r in &rows {
                println!(
                    "Re = {} nu = {} delta = {} online_seconds = {}{}",
                    fmt_f64(r.param.re),
                    fmt_f64(r.param.nu),
                    fmt_f64(r.delta),
                    fmt_f64(r.seconds),
                    if r.extrapolated { " (extrapolated)" } else { "" }
                );
            }
            println!("wrote {}", cfg.out_dir.join("solve.csv").display());
        }
        Command::Validate { model } => {
            let s = cmd_validate(&model, &cfg)?;
            println!("n,E,Delta");
            for c in &s.curve {
                println!("{},{},{}", c.n, fmt_f64(c.e), fmt_f64(c.delta));
            }
            println!("spearman_log = {}", fmt_f64(s.spearman));
            println!("reference_solves = {}", s.cache_misses);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
