use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kernelflows_cli::config::ConstructionName;
use kernelflows_cli::output::write_report;
use kernelflows_cli::{
    run, verify, ConfigError, ExperimentConfig, ExperimentKind, MeasureSpec, Report, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_PASS, THREADS_ENV,
};

/// Monte Carlo experiments for stochastic flows of kernels solving Tanaka's
/// equation.
#[derive(Parser)]
#[command(name = "kernelflows", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file (`--config`).
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Dump driving paths, kernels and n-point trajectories.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Starting points, comma separated; one start gives the one-point motion.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Number of replicas dumped in full.
        #[arg(long)]
        dump: Option<usize>,
    },
    /// Run the full verification suite.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "kernelflows-verify")]
        out: PathBuf,
        /// Only these checks, comma separated (1..=10).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
    /// Estimate α_k for k = 1..points against the closed form.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Compare skew Brownian motion constructions.
    Skew {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        /// Any of flips, walk, sign-product (comma separated).
        #[arg(long, value_delimiter = ',', value_parser = parse_construction)]
        construction: Option<Vec<ConstructionName>>,
        #[arg(long)]
        walk_scale: Option<u32>,
    },
    /// Check (P_t f − f)/t against the generator A^n f.
    Generator {
        #[command(flatten)]
        common: Common,
        /// Evaluation point, comma separated (dimension 1 or 2).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        #[arg(long)]
        t: Option<f64>,
    },
    /// L² error of truncated Wiener chaos expansions.
    Chaos {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Start from this TOML config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// uniform, dirac-half, fair-bernoulli, beta:<a> or atomic:<w>@<x>,...
    #[arg(long)]
    measure: Option<String>,
}

fn parse_construction(s: &str) -> Result<ConstructionName, String> {
    match s {
        "flips" => Ok(ConstructionName::Flips),
        "walk" => Ok(ConstructionName::Walk),
        "sign-product" => Ok(ConstructionName::SignProduct),
        other => Err(format!("unknown construction {other:?}")),
    }
}

impl Common {
    /// The config file (if any) for `kind` with the flags applied.
    fn resolve(&self, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = match (&self.config, kind) {
            (Some(path), _) => {
                let cfg = ExperimentConfig::load(path)?;
                match kind {
                    Some(k) if k != cfg.experiment => {
                        return Err(ConfigError(format!(
                            "{} describes a {} experiment, not {}",
                            path.display(),
                            cfg.experiment.name(),
                            k.name()
                        )))
                    }
                    _ => cfg,
                }
            }
            (None, Some(k)) => ExperimentConfig::new(k),
            (None, None) => return Err(ConfigError("run needs --config <FILE>".into())),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.replicas {
            cfg.replicas = v;
        }
        if let Some(v) = self.dt {
            cfg.grid.dt = v;
        }
        if let Some(v) = self.horizon {
            cfg.grid.horizon = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &self.measure {
            cfg.measure = Some(MeasureSpec::parse(v)?);
        }
        Ok(cfg)
    }
}

fn configure(command: &Command) -> Result<Option<ExperimentConfig>, ConfigError> {
    let cfg = match command {
        Command::Verify { .. } => return Ok(None),
        Command::Run { common } => common.resolve(None)?,
        Command::Simulate { common, x0, dump } => {
            let starts = x0.clone();
            let kind = match (&starts, &common.config) {
                (Some(v), _) if v.len() == 1 => ExperimentKind::OnePoint,
                (Some(_), _) => ExperimentKind::NPoint,
                (None, Some(path)) => ExperimentConfig::load(path)?.experiment,
                (None, None) => ExperimentKind::NPoint,
            };
            if !matches!(kind, ExperimentKind::OnePoint | ExperimentKind::NPoint) {
                return Err(ConfigError(format!("simulate runs one-point or n-point experiments, not {}", kind.name())));
            }
            let mut c = common.resolve(Some(kind))?;
            if starts.is_some() {
                c.x0 = starts;
            }
            if let Some(d) = dump {
                c.dump = *d;
            }
            c
        }
        Command::Classify { common, points } => {
            let mut c = common.resolve(Some(ExperimentKind::Classify))?;
            c.points = points.or(c.points);
            c
        }
        Command::Skew { common, alpha, construction, walk_scale } => {
            let mut c = common.resolve(Some(ExperimentKind::Skew))?;
            c.alpha = alpha.or(c.alpha);
            c.constructions = construction.clone().or(c.constructions);
            c.walk_scale = walk_scale.or(c.walk_scale);
            c
        }
        Command::Generator { common, x, t } => {
            let mut c = common.resolve(Some(ExperimentKind::Generator))?;
            c.x = x.clone().or(c.x);
            c.t = t.or(c.t);
            c
        }
        Command::Chaos { common, x, t } => {
            let mut c = common.resolve(Some(ExperimentKind::Chaos))?;
            c.x = x.map(|v| vec![v]).or(c.x);
            c.t = t.or(c.t);
            c
        }
    };
    cfg.validate()?;
    Ok(Some(cfg))
}

fn init_threads() -> Result<(), ConfigError> {
    let Ok(text) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| ConfigError(format!("{THREADS_ENV} must be a positive integer, got {text:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| ConfigError(e.to_string()))
}

fn report(r: &Report, out: &std::path::Path) -> ExitCode {
    // A closed stdout (e.g. piped into `head`) must not abort the run.
    let mut stdout = std::io::stdout().lock();
    for c in &r.checks {
        let _ = writeln!(stdout, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Err(e) = write_report(out, r) {
        eprintln!("error: cannot write results to {}: {e}", out.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    let _ = writeln!(stdout, "results written to {}", out.display());
    if r.pass() {
        ExitCode::from(EXIT_PASS)
    } else {
        eprintln!("failed checks: {}", r.failures().join(", "));
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let cfg = match configure(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let (result, out) = match (&cli.command, cfg) {
        (Command::Verify { seed, out, only }, _) => (verify(*seed, only), out.clone()),
        (_, Some(cfg)) => (run(&cfg), cfg.out.clone()),
        (_, None) => unreachable!("only verify runs without a config"),
    };
    match result {
        Ok(r) => report(&r, &out),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn negative_points_parse() {
        let cli = Cli::try_parse_from(["kernelflows", "generator", "--x", "0.5,-0.5", "--measure", "dirac-half"]).unwrap();
        let cfg = configure(&cli.command).unwrap().unwrap();
        assert_eq!(cfg.x, Some(vec![0.5, -0.5]));
        assert_eq!(cfg.experiment, ExperimentKind::Generator);
    }
}
