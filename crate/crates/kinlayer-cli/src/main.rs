//! `kinlayer`: command line driver for the layer, transport and limit experiments.
//!
//! Settings resolve as flags over the `--config` file over built-in defaults.
//! Exit codes: 0 success, 2 solver non-convergence, 3 invalid configuration.

use clap::{Args, Parser, Subcommand};
use kinlayer::harness::{self, Artifact, Bundle, Experiment, ExperimentConfig, Format, Overrides};
use kinlayer::{par, Error};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "kinlayer",
    version,
    about = "Boundary-layer corrected diffusive limit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON experiment configuration
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Comma separated ε values, strictly decreasing
    #[arg(long, global = true, value_name = "LIST")]
    eps: Option<String>,

    /// `circle:a`, `ellipse:a,b` or a JSON domain object
    #[arg(long, global = true, value_name = "SPEC")]
    domain: Option<String>,

    /// Worker threads
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Domain self-checks
    Geom {
        #[command(subcommand)]
        action: GeomAction,
    },
    /// Single ε-Milne layer solves
    Milne {
        #[command(subcommand)]
        action: MilneAction,
    },
    /// Full transport solve
    Transport {
        #[command(subcommand)]
        action: SolveAction,
    },
    /// Diffusive-limit rate study
    Limit {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Weighted derivative sweep of the layer
    Regularity {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Corrected against classical layer solves
    Classical {
        #[command(subcommand)]
        action: CompareAction,
    },
}

#[derive(Subcommand, Debug)]
enum GeomAction {
    Check {
        /// Random sample points
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

#[derive(Subcommand, Debug)]
enum MilneAction {
    Solve,
    Sweep,
}

#[derive(Subcommand, Debug)]
enum SolveAction {
    Solve,
}

#[derive(Subcommand, Debug)]
enum RunAction {
    Run,
}

#[derive(Subcommand, Debug)]
enum CompareAction {
    Compare,
}

/// Largest round-trip and exit-depth error accepted by `geom check`.
const GEOM_TOL: f64 = 1e-9;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn experiment_of(cmd: &Command) -> Experiment {
    match cmd {
        Command::Limit { .. } | Command::Geom { .. } => Experiment::Limit,
        Command::Regularity { .. } => Experiment::Regularity,
        Command::Classical { .. } => Experiment::ClassicalCompare,
        Command::Milne { .. } => Experiment::MilneSingle,
        Command::Transport { .. } => Experiment::TransportSingle,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let c = &cli.common;
    let over = Overrides {
        experiment: Some(experiment_of(&cli.command)),
        eps: c.eps.as_deref().map(harness::parse_eps_list).transpose()?,
        domain: c.domain.as_deref().map(harness::parse_domain).transpose()?,
        out: c.out.clone(),
        workers: c.workers,
    };
    let cfg = ExperimentConfig::load(c.config.as_deref(), &over)?;
    if let Some(w) = cfg.workers {
        par::configure_workers(w);
    }
    let out = cfg.out.clone();
    let manifest = harness::manifest(&cfg);
    let write = |a: &dyn Artifact, extra: serde_json::Value| -> Result<(), Error> {
        let mut m = manifest.clone();
        if let (Some(o), serde_json::Value::Object(e)) = (m.as_object_mut(), extra) {
            o.extend(e);
        }
        for p in harness::emit(a, &Format::ALL, m, &out)? {
            println!("{}", p.display());
        }
        Ok(())
    };
    match cli.command {
        Command::Geom {
            action: GeomAction::Check { samples },
        } => {
            let r = harness::geometry_report(&cfg.domain, samples, cfg.seed)?;
            let ok = r.ok(GEOM_TOL);
            write(
                &r,
                serde_json::json!({"samples": samples, "tolerance": GEOM_TOL, "ok": ok}),
            )?;
            eprintln!(
                "round trip {:.2e}, exit depth {:.2e}, min curvature {:.4}",
                r.round_trip, r.exit_depth, r.kappa_min
            );
            Ok(if ok { 0 } else { 1 })
        }
        Command::Milne {
            action: MilneAction::Solve,
        } => {
            let s = harness::run_milne_single(&cfg)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join("manifest.json"),
                serde_json::to_string_pretty(&manifest)?,
            )?;
            s.write(&out)?;
            eprintln!(
                "f_L = {:.12}, {} iterations",
                s.field.f_l, s.field.meta.iterations
            );
            Ok(0)
        }
        Command::Milne {
            action: MilneAction::Sweep,
        } => {
            let r = harness::run_milne_sweep(&cfg)?;
            write(&r, serde_json::json!({}))?;
            Ok(0)
        }
        Command::Transport { .. } => {
            let s = harness::run_transport_single(&cfg)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join("manifest.json"),
                serde_json::to_string_pretty(&manifest)?,
            )?;
            s.write(&out)?;
            eprintln!(
                "{} iterations, mass defect {:.2e}",
                s.summary.iterations, s.summary.mass_defect
            );
            Ok(0)
        }
        Command::Limit { .. } => {
            let r = harness::run_limit_study(&cfg);
            let runtimes: Vec<_> = r
                .rows
                .iter()
                .map(|x| serde_json::json!({"eps": x.eps, "transport_seconds": x.transport_seconds, "expansion_seconds": x.expansion_seconds}))
                .collect();
            write(
                &r,
                serde_json::json!({
                    "partial": r.partial(),
                    "failures": r.failures,
                    "slope_defined": r.slope_defined,
                    "fit": r.fit,
                    "runtimes": runtimes,
                }),
            )?;
            for f in &r.failures {
                eprintln!("ε = {}: {}", f.eps, f.message);
            }
            if let Some(f) = &r.fit {
                eprintln!(
                    "slope {:.3} ± {:.3}, R² {:.4}",
                    f.slope, f.slope_half_width, f.r_squared
                );
            }
            Ok(r.exit_code() as u8)
        }
        Command::Regularity { .. } => {
            let r = harness::run_regularity_study(&cfg)?;
            let contrast = if cfg.regularity.contrast {
                Some(harness::refinement_contrast(&cfg)?)
            } else {
                None
            };
            let mut parts: Vec<&dyn Artifact> = vec![&r];
            if let Some(c) = &contrast {
                parts.push(c);
            }
            write(
                &Bundle(parts),
                serde_json::json!({"dominance": r.dominance, "contrast": contrast}),
            )?;
            Ok(0)
        }
        Command::Classical { .. } => {
            let r = harness::run_classical_comparison(&cfg)?;
            write(&r, serde_json::json!({}))?;
            Ok(0)
        }
    }
}
