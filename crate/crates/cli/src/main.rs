use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use chemoflow::harness::{self, parse_config, Model, SimConfig, EXPERIMENTS};
use chemoflow::mild_verify::{existence_time, ExistenceParams};
use chemoflow::specfun::{self, EvalPolicy};

#[derive(Parser)]
#[command(name = "chemoflow", version, about = "Fractional chemotaxis-fluid simulations and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the model named in the config (tfksns, ks_only, ctrw or mild).
    Simulate(RunArgs),
    /// Particle random walk.
    Ctrw {
        #[command(subcommand)]
        command: CtrwCommand,
    },
    /// Mild-solution tools.
    Mild {
        #[command(subcommand)]
        command: MildCommand,
    },
    /// Special functions.
    Specfun {
        #[command(subcommand)]
        command: SpecfunCommand,
    },
    /// Named experiment recipe; prints one PASS/FAIL line per check.
    Experiment {
        name: String,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CtrwCommand {
    Run(RunArgs),
}

#[derive(Subcommand)]
enum MildCommand {
    /// Picard iteration for (n, c) on the configured initial data.
    Picard(RunArgs),
    /// Local existence time from the five smallness conditions.
    ExistenceTime {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        d: u32,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long = "R")]
        r: f64,
        #[arg(long = "C")]
        c: f64,
        /// grad_c0,free_n,free_c,free_u
        #[arg(long, value_delimiter = ',', num_args = 1..=4, required = true, allow_negative_numbers = true)]
        norms: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum SpecfunCommand {
    /// Each `--args` value is one comma-separated tuple; one result per line.
    Eval {
        #[arg(long = "fn", value_enum)]
        function: SpecFn,
        #[arg(long, num_args = 1.., required = true, allow_negative_numbers = true)]
        args: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SpecFn {
    /// kappa,lambda,z
    Wright,
    /// alpha,z
    Mainardi,
    /// alpha,beta,z
    Ml,
    /// a,b
    Beta,
}

impl SpecFn {
    fn arity(self) -> usize {
        match self {
            SpecFn::Wright | SpecFn::Ml => 3,
            SpecFn::Mainardi | SpecFn::Beta => 2,
        }
    }
}

type CliResult = Result<bool, String>;

fn load_config(args: &RunArgs, fallback: Model) -> Result<(SimConfig, PathBuf), String> {
    let cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => SimConfig::minimal(fallback, 0.5, 32),
    };
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn print_summary(dir: &Path, summary: &harness::Summary) {
    print!("{}", summary.to_text());
    println!("output: {}", dir.display());
}

fn simulate(args: &RunArgs) -> CliResult {
    let (cfg, out) = load_config(args, Model::Tfksns)?;
    info!("running {} into {}", cfg.model.name(), out.display());
    match cfg.model {
        Model::Ctrw => return ctrw_run(&cfg, &out),
        Model::Mild => return mild_picard(&cfg, &out),
        Model::KsOnly | Model::Tfksns => {}
    }
    let outcome = harness::run_simulation(&cfg, &out).map_err(|e| e.to_string())?;
    print_summary(&out, &outcome.summary);
    Ok(true)
}

fn ctrw_run(cfg: &SimConfig, out: &Path) -> CliResult {
    let outcome = harness::run_ctrw(cfg, out).map_err(|e| e.to_string())?;
    print_summary(out, &outcome.summary);
    Ok(true)
}

fn mild_picard(cfg: &SimConfig, out: &Path) -> CliResult {
    let outcome = harness::run_mild(cfg, out).map_err(|e| e.to_string())?;
    print_summary(out, &outcome.summary);
    Ok(outcome.result.converged)
}

fn parse_tuple(text: &str, arity: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("'{s}': {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != arity {
        return Err(format!("'{text}': expected {arity} comma-separated numbers"));
    }
    Ok(v)
}

fn specfun_eval(function: SpecFn, args: &[String]) -> CliResult {
    let policy = EvalPolicy::default();
    for a in args {
        let x = parse_tuple(a, function.arity())?;
        let value = match function {
            SpecFn::Wright => specfun::wright(x[0], x[1], x[2], &policy),
            SpecFn::Mainardi => specfun::mainardi(x[0], x[1], &policy),
            SpecFn::Ml => specfun::mittag_leffler(x[0], x[1], x[2], &policy),
            SpecFn::Beta => specfun::beta_fn(x[0], x[1]),
        }
        .map_err(|e| e.to_string())?;
        println!("{value:.17e}");
    }
    Ok(true)
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Ctrw {
            command: CtrwCommand::Run(args),
        } => {
            let (cfg, out) = load_config(&args, Model::Ctrw)?;
            ctrw_run(&cfg, &out)
        }
        Command::Mild {
            command: MildCommand::Picard(args),
        } => {
            let (cfg, out) = load_config(&args, Model::Mild)?;
            mild_picard(&cfg, &out)
        }
        Command::Mild {
            command:
                MildCommand::ExistenceTime {
                    alpha,
                    d,
                    q,
                    rho,
                    r,
                    c,
                    norms,
                },
        } => {
            if norms.len() != 4 {
                return Err(format!("--norms takes 4 values, got {}", norms.len()));
            }
            let p = ExistenceParams {
                alpha,
                d,
                q,
                rho,
                r,
                c,
                grad_c0: norms[0],
                free_n: norms[1],
                free_c: norms[2],
                free_u: norms[3],
            };
            let res = existence_time(&p).map_err(|e| e.to_string())?;
            println!("T = {:.12e}", res.t);
            // 0 means the cap T = 1 binds.
            println!("binding = {}", res.binding.map_or(0, |b| b.index()));
            Ok(true)
        }
        Command::Specfun {
            command: SpecfunCommand::Eval { function, args },
        } => specfun_eval(function, &args),
        Command::Experiment { name, run } => {
            if !EXPERIMENTS.contains(&name.as_str()) {
                return Err(format!("unknown experiment '{name}'; known: {}", EXPERIMENTS.join(", ")));
            }
            let (cfg, out) = load_config(&run, Model::KsOnly)?;
            let lines = harness::run_experiment(&name, &cfg, &out).map_err(|e| e.to_string())?;
            for l in &lines {
                println!("{l}");
            }
            Ok(lines.iter().all(|l| l.pass))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let threads = harness::init_threads();
    info!("{threads} worker threads");
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
