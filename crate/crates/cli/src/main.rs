//! Command-line front end: every subcommand reads a TOML problem file,
//! writes JSON/CSV/SVG artifacts plus `manifest.json` into the output
//! directory, and exits with 0 (success), 2 (configuration), 3 (numerical
//! diagnostic) or 4 (resources: non-convergence, boundary contamination).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand, ValueEnum};

use commands::{Certificate, FieldSource, SpreadArgs, Sweep, TerraceArgs};
use output::Output;
use terracelab::terrace::MergePolicy;

/// A failed check that is reported rather than raised by the library.
#[derive(Debug)]
pub struct Diagnostic(pub String);

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Parser)]
#[command(
    name = "terracelab",
    version,
    about = "Fronts, terraces and spreading shapes of periodic reaction-diffusion equations"
)]
struct Cli {
    /// Output directory.
    #[arg(
        long,
        global = true,
        env = "TERRACELAB_OUT",
        default_value = "terracelab-out"
    )]
    out: PathBuf,
    /// Worker threads for direction sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Leftmost,
    Rightmost,
}

#[derive(Clone, Copy, ValueEnum)]
enum Lemma {
    /// Exponentially decaying eigenfunction perturbation of each stable state.
    Perturbation,
    /// Glued perturbed front profiles of a terrace.
    Glue,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// Directions as `a,b` integer pairs separated by `;`.
    #[arg(long, value_parser = parse_dirs, default_value = "1,0;1,1;0,1;-1,1;-1,0;-1,-1;0,-1;1,-1")]
    dirs: Dirs,
    /// Measure along e1 only and replicate over 360 directions (homogeneous problems).
    #[arg(long)]
    isotropic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Stable and unstable periodic steady states between 0 and the top state.
    States { config: PathBuf },
    /// Speed and profile of the front between two stable states.
    Front {
        config: PathBuf,
        #[arg(long, value_parser = parse_dir, default_value = "1,0")]
        dir: [i32; 2],
        /// Upper state id (default: the top state).
        #[arg(long)]
        upper: Option<String>,
        /// Lower state id (default: 0).
        #[arg(long)]
        lower: Option<String>,
    },
    /// Propagating terrace by merging adjacent fronts.
    Terrace {
        config: PathBuf,
        #[arg(long, value_parser = parse_dir, default_value = "1,0")]
        dir: [i32; 2],
        #[arg(long, value_enum, default_value = "leftmost")]
        policy: Policy,
        /// Also observe the terrace in a Cauchy run and compare.
        #[arg(long)]
        observe: bool,
        /// Rebuild under both merge orders and compare.
        #[arg(long)]
        check_order: bool,
    },
    /// Wulff shape of a speed field, read from CSV or measured per direction.
    Wulff {
        #[arg(required_unless_present = "field")]
        config: Option<PathBuf>,
        /// `angle_degrees,speed,se` CSV.
        #[arg(long, conflicts_with = "config")]
        field: Option<PathBuf>,
        /// Stable state whose terrace speed is sampled (default: 0).
        #[arg(long)]
        state: Option<String>,
        /// Use the uppermost speed of the terrace from the state down to 0.
        #[arg(long)]
        upsilon: bool,
        /// Report the directional spreading speed at this angle (degrees).
        #[arg(long, allow_hyphen_values = true)]
        fg: Option<f64>,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Spreading of a compactly supported datum against predicted shapes.
    Spread {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "100,200")]
        times: Vec<f64>,
        /// Radius of the initial ball of the top state.
        #[arg(long, default_value_t = 8.0)]
        radius: f64,
        /// Half-width of the square domain, in periods.
        #[arg(long, default_value_t = 66)]
        half_width: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Speed field for the prediction instead of measured terraces.
        #[arg(long)]
        field: Option<PathBuf>,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// The three-direction speed field whose Wulff shape has a corner.
    CornerDemo,
    /// Residual certificates for sub- and supersolutions.
    Certify {
        config: PathBuf,
        #[arg(long, value_enum)]
        lemma: Lemma,
        #[arg(long, value_parser = parse_dir, default_value = "1,0")]
        dir: [i32; 2],
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 1e-3)]
        eta: f64,
        #[arg(long, default_value_t = 0.4)]
        smoothing: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 1e-4)]
        delta_min: f64,
        /// Evaluation times (default: 0..=20 for perturbations, 1000,2000 for gluing).
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
}

fn parse_dir(s: &str) -> Result<[i32; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok([
            a.parse().map_err(|e| format!("{a:?}: {e}"))?,
            b.parse().map_err(|e| format!("{b:?}: {e}"))?,
        ]),
        _ => Err(format!("expected `a,b`, got {s:?}")),
    }
}

#[derive(Clone)]
struct Dirs(Vec<[i32; 2]>);

fn parse_dirs(s: &str) -> Result<Dirs, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(parse_dir)
        .collect::<Result<_, _>>()
        .map(Dirs)
}

fn run(cli: Cli, out: &mut Output) -> Result<()> {
    let sweep = |s: SweepArgs| Sweep {
        dirs: s.dirs.0,
        isotropic: s.isotropic,
        jobs: cli.jobs,
    };
    match cli.command {
        Command::States { config } => {
            let s = commands::setup(out, &config)?;
            commands::states(out, &s)
        }
        Command::Front {
            config,
            dir,
            upper,
            lower,
        } => {
            let s = commands::setup(out, &config)?;
            commands::front(out, &s, dir, upper.as_deref(), lower.as_deref())
        }
        Command::Terrace {
            config,
            dir,
            policy,
            observe,
            check_order,
        } => {
            let s = commands::setup(out, &config)?;
            let policy = match policy {
                Policy::Leftmost => MergePolicy::LeftmostFirst,
                Policy::Rightmost => MergePolicy::RightmostFirst,
            };
            commands::terrace(
                out,
                &s,
                &TerraceArgs {
                    dir,
                    policy,
                    observe,
                    check_order,
                },
            )
        }
        Command::Wulff {
            config,
            field,
            state,
            upsilon,
            fg,
            sweep: sw,
        } => match (field, config) {
            (Some(path), _) => commands::wulff(out, FieldSource::File(&path), fg),
            (None, Some(config)) => {
                let s = commands::setup(out, &config)?;
                let id = state.unwrap_or_else(|| s.lattice.zero().id.clone());
                let src = FieldSource::State {
                    setup: &s,
                    id: &id,
                    upsilon,
                    sweep: sweep(sw),
                };
                commands::wulff(out, src, fg)
            }
            (None, None) => Err(anyhow!(terracelab::Error::Config(
                "a config or --field is required".into()
            ))),
        },
        Command::Spread {
            config,
            times,
            radius,
            half_width,
            eps,
            field,
            sweep: sw,
        } => {
            let s = commands::setup(out, &config)?;
            let args = SpreadArgs {
                times,
                radius,
                half_width,
                eps,
                field: field.as_deref(),
                sweep: sweep(sw),
            };
            commands::spread(out, &s, args)
        }
        Command::CornerDemo => commands::corner(out),
        Command::Certify {
            config,
            lemma,
            dir,
            eps,
            eta,
            smoothing,
            tol,
            delta_min,
            times,
        } => {
            let s = commands::setup(out, &config)?;
            let which = match lemma {
                Lemma::Perturbation => Certificate::Perturbation {
                    times: times.unwrap_or_else(|| (0..=20).map(f64::from).collect()),
                    delta_min,
                },
                Lemma::Glue => Certificate::Glue {
                    dir,
                    eps,
                    eta,
                    smoothing,
                    tol,
                    times: times.unwrap_or_else(|| vec![1000.0, 2000.0]),
                },
            };
            commands::certify(out, &s, which)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<terracelab::Error>() {
        return e.exit_code() as u8;
    }
    if err.downcast_ref::<Diagnostic>().is_some() {
        return 3;
    }
    2
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let mut out = match Output::new(&cli.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let result = run(cli, &mut out);
    if let Err(e) = out.finish(&argv) {
        eprintln!("error: {e:#}");
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
