use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use otds_cli::commands::{self, InterpolateMode};
use otds_cli::config::{parse_label_method, parse_solver, RunConfig};
use otds_cli::error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "otds",
    version,
    about = "Synthesize labeled datasets as transport interpolations and project targets onto dataset hulls"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags mirroring the key=value config file; flags win over the file.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Config file in flat key=value form
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Transport solver: exact | sinkhorn
    #[arg(long)]
    solver: Option<String>,
    /// Entropic regularization (default: 0.01 x mean ground cost)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sinkhorn iteration cap
    #[arg(long)]
    max_iters: Option<usize>,
    /// Label geometry: exact | gaussian
    #[arg(long)]
    label_method: Option<String>,
    /// Batched projection batch size (>= 2); unbatched when absent
    #[arg(long)]
    batch_size: Option<usize>,
    /// Seed for every stochastic step
    #[arg(long)]
    seed: Option<u64>,
    /// Simplex grid resolution
    #[arg(long)]
    grid_resolution: Option<usize>,
    /// Feature normalization, off by default: zscore
    #[arg(long)]
    normalize: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> CliResult<(RunConfig, bool)> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(s) = &self.solver {
            cfg.solver = parse_solver(s)
                .ok_or_else(|| CliError::Validation(format!("unknown solver `{s}`")))?;
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(CliError::Validation("epsilon must be positive".into()));
            }
            cfg.epsilon = Some(e);
        }
        if let Some(m) = self.max_iters {
            cfg.max_iters = m;
        }
        if let Some(l) = &self.label_method {
            cfg.label_method = parse_label_method(l)
                .ok_or_else(|| CliError::Validation(format!("unknown label method `{l}`")))?;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = Some(b);
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.grid_resolution {
            cfg.grid_resolution = r;
        }
        let normalize = match self.normalize.as_deref() {
            None => false,
            Some("zscore") => true,
            Some(other) => {
                return Err(CliError::Validation(format!(
                    "unknown normalization `{other}` (supported: zscore)"
                )));
            }
        };
        Ok((cfg, normalize))
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a synthetic labeled dataset from a mixture spec
    Gen {
        /// Generator spec file
        #[arg(long)]
        spec: PathBuf,
        /// Output dataset path (.csv for CSV, anything else binary)
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Also write a scatter plot
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Squared transport distance between two labeled datasets (JSON)
    Otdd {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Push a source dataset onto a target by barycentric projection
    Map {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Solve per-batch couplings of this size instead of the full plan
        #[arg(long)]
        batched: Option<usize>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Synthesize a dataset at a point of the interpolation family
    Interpolate {
        #[arg(long)]
        target: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        sources: Vec<PathBuf>,
        /// Comma-separated mixture weights (one per source, summing to 1)
        #[arg(long, conflicts_with_all = ["mccann", "t"])]
        weights: Option<String>,
        /// Two-dataset path interpolation (needs exactly one source and --t)
        #[arg(long, requires = "t")]
        mccann: bool,
        /// Interpolation time in [0, 1] for --mccann
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Find the mixture weights closest to the target dataset (JSON)
    Project {
        #[arg(long)]
        target: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        sources: Vec<PathBuf>,
        /// Also synthesize the dataset at the solution weights
        #[arg(long)]
        out_dataset: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Sweep the 3-source weight simplex and write surrogate values (CSV)
    Grid {
        #[arg(long)]
        target: PathBuf,
        #[arg(long, num_args = 3..=3, required = true)]
        sources: Vec<PathBuf>,
        /// Grid resolution (default from config: 7)
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Hard-label unlabeled points by k-nearest-neighbor vote
    Pseudolabel {
        /// Features-only CSV (header x0..x{d-1})
        #[arg(long)]
        unlabeled: PathBuf,
        /// Hard-labeled dataset providing the votes
        #[arg(long)]
        fewshot: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::Gen {
            spec,
            out,
            seed,
            svg,
        } => commands::cmd_gen(&spec, &out, seed, svg.as_deref()),
        Cmd::Otdd { a, b, cfg } => {
            let (cfg, normalize) = cfg.resolve()?;
            commands::cmd_otdd(&a, &b, &cfg, normalize)
        }
        Cmd::Map {
            source,
            target,
            out,
            batched,
            svg,
            cfg,
        } => {
            let (cfg, normalize) = cfg.resolve()?;
            commands::cmd_map(
                &source,
                &target,
                &out,
                batched,
                &cfg,
                normalize,
                svg.as_deref(),
            )
        }
        Cmd::Interpolate {
            target,
            sources,
            weights,
            mccann,
            t,
            out,
            svg,
            cfg,
        } => {
            let (cfg, normalize) = cfg.resolve()?;
            let mode = match (weights, mccann) {
                (Some(w), false) => {
                    let parsed: Result<Vec<f64>, _> =
                        w.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
                    InterpolateMode::Weights(parsed.map_err(|_| {
                        CliError::Validation(format!("bad weights `{w}`"))
                    })?)
                }
                (None, true) => InterpolateMode::Mccann(t.expect("clap enforces --t")),
                _ => {
                    return Err(CliError::Validation(
                        "pass either --weights or --mccann --t".into(),
                    ));
                }
            };
            commands::cmd_interpolate(
                &target,
                &sources,
                mode,
                &out,
                &cfg,
                normalize,
                svg.as_deref(),
            )
        }
        Cmd::Project {
            target,
            sources,
            out_dataset,
            cfg,
        } => {
            let (cfg, normalize) = cfg.resolve()?;
            commands::cmd_project(&target, &sources, &cfg, normalize, out_dataset.as_deref())
        }
        Cmd::Grid {
            target,
            sources,
            resolution,
            out,
            cfg,
        } => {
            let (cfg, normalize) = cfg.resolve()?;
            let res = resolution.unwrap_or(cfg.grid_resolution);
            commands::cmd_grid(&target, &sources, res, &out, &cfg, normalize)
        }
        Cmd::Pseudolabel {
            unlabeled,
            fewshot,
            k,
            out,
        } => commands::cmd_pseudolabel(&unlabeled, &fewshot, k, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("otds: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
