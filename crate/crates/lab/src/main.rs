use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edgewalk::config::{self, ExperimentConfig, PRESETS};
use edgewalk::farm::Farm;
use edgewalk::pipeline::{self, EvolveOptions, Session};
use edgewalk::{LabError, Result};

#[derive(Parser)]
#[command(
    name = "edgewalk",
    version,
    about = "Swarm exploration experiments with Boolean-network and Levy-walk controllers"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named configuration preset.
    #[arg(long)]
    preset: Option<String>,
    /// Base seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Suppress progress messages.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Verb {
    /// Evaluate the walk over its parameter grid.
    SweepLmcrw(Common),
    /// Evaluate random network cohorts against the baseline walk.
    RbnStudy(Common),
    /// Evolve networks, then post-evaluate the best.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Continue from existing checkpoints.
        #[arg(long)]
        resume: bool,
        /// Checkpoint and stop after this many generations.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Evaluate one stored network against the baseline walk.
    PostEval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        network: PathBuf,
    },
    /// Sensitivity and activation raster of one stored network.
    Delta {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        network: PathBuf,
    },
    /// Rebuild a study's report from its stored records.
    Analyze {
        /// Study output directory.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Accepted for symmetry with the other verbs; analyze prints nothing.
        #[arg(long)]
        quiet: bool,
    },
    /// Re-run one trial with command logging.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Network file; the baseline walk when omitted.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        evaluation: usize,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
}

fn resolve(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut config = match (&common.config, &common.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => config::preset(name)
            .ok_or_else(|| LabError::Config(format!("unknown preset {name}; available: {}", PRESETS.join(", "))))?,
        (None, None) => return Err(LabError::Config("one of --config or --preset is required".into())),
    };
    if let Some(seed) = common.seed {
        config.experiment.seed = seed;
    }
    config.validate()?;
    let out = common
        .out
        .clone()
        .or_else(|| config.output.dir.clone().map(PathBuf::from))
        .ok_or_else(|| LabError::Config("no output directory; pass --out or set output.dir".into()))?;
    Ok((config, out))
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(LabError::Config(format!("{}: no such file", path.display())))
    }
}

fn with_session<T>(common: &Common, body: impl FnOnce(&Session) -> Result<T>) -> Result<T> {
    let (config, out) = resolve(common)?;
    let farm = Farm::new(common.workers)?;
    let mut session = Session::new(&config, out, &farm);
    session.progress = !common.quiet;
    body(&session)
}

fn run(cli: Cli) -> Result<()> {
    match cli.verb {
        Verb::SweepLmcrw(common) => with_session(&common, |s| {
            let report = s.sweep_lmcrw()?;
            if let Some(best) = report.best_cell {
                println!(
                    "best cell rho={} alpha={} mean t_f={:.1} s",
                    best.rho, best.alpha, best.mean_tf
                );
            }
            Ok(())
        }),
        Verb::RbnStudy(common) => with_session(&common, |s| {
            let report = s.rbn_study()?;
            for row in &report.table {
                println!(
                    "{}: worse {:.0}% similar {:.0}% better {:.0}%",
                    row.group, row.worse_pct, row.similar_pct, row.better_pct
                );
            }
            Ok(())
        }),
        Verb::Evolve {
            common,
            resume,
            stop_after,
        } => with_session(&common, |s| {
            match s.evolve(EvolveOptions { resume, stop_after })? {
                Some(report) => {
                    for row in &report.table {
                        println!(
                            "{}: worse {:.0}% similar {:.0}% better {:.0}%",
                            row.group, row.worse_pct, row.similar_pct, row.better_pct
                        );
                    }
                }
                None => println!("stopped; resume with --resume"),
            }
            Ok(())
        }),
        Verb::PostEval { common, network } => {
            require_file(&network)?;
            with_session(&common, |s| {
                let report = s.post_eval(&network)?;
                if let Some(g) = report.groups.first() {
                    if let Some(v) = &g.verdict {
                        println!("{} ({}, p={:.4})", v.label.as_str(), v.test.as_str(), v.p_value);
                    }
                }
                Ok(())
            })
        }
        Verb::Delta { common, network } => {
            require_file(&network)?;
            with_session(&common, |s| {
                let d = s.delta(&network)?;
                println!("delta {:.5} ({})", d.delta_mean, d.regime);
                Ok(())
            })
        }
        Verb::Analyze { input, out, .. } => {
            if !input.join(edgewalk::report::MANIFEST_FILE).is_file() {
                return Err(LabError::Config(format!("{}: no study manifest", input.display())));
            }
            let out = out.unwrap_or_else(|| input.join("analysis"));
            pipeline::analyze(&input, &out)?;
            Ok(())
        }
        Verb::Replay {
            common,
            network,
            evaluation,
            trial,
        } => {
            if let Some(n) = &network {
                require_file(n)?;
            }
            with_session(&common, |s| {
                let rows = s.replay(network.as_deref(), evaluation, trial)?;
                let found = rows.iter().filter(|r| !r.censored).count();
                println!("{found}/{} robots found the target", rows.len());
                Ok(())
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
