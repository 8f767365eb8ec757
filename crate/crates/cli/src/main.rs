use clap::{Args, Parser, Subcommand, ValueEnum};
use hatgae::centrality::{CentralityMethod, PowerIterConfig};
use hatgae::eval::{Metric, ProbeConfig};
use hatgae::graph::SbmConfig;
use hatgae::training::{LrSchedule, TrainConfig};
use hatgae_cli::{
    execute, load_run_spec, parse_dataset, replay, CliError, Invocation, Outcome, PreviewSource, RepeatMode,
    SweepAxis,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hatgae", version, about = "Graph auto-encoder with hierarchical adaptive masking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// key=value config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set pf=0.2 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Zero wall-clock fields so outputs are byte-reproducible.
    #[arg(long)]
    strict: bool,
    #[arg(long, value_enum, default_value = "constant")]
    lr_schedule: LrArg,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LrArg {
    Constant,
    Cosine,
}

#[derive(Args)]
struct ProbeArgs {
    /// Comma-separated l2 candidates, chosen on the validation split.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 1e-3, 1e-2])]
    l2: Vec<f64>,
    #[arg(long, default_value_t = 300)]
    probe_epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    probe_lr: f64,
    #[arg(long, default_value_t = 0)]
    probe_seed: u64,
    #[arg(long, default_value = "accuracy")]
    metric: String,
}

#[derive(Args)]
struct DatasetArgs {
    /// Bundle directory, or sbm[:n=..,blocks=..,p_in=..,p_out=..,feat=..,signal=..,sigma=..,seed=..].
    #[arg(long)]
    dataset: String,
    /// Seed for an SBM dataset that does not name one.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Train and write loss.jsonl plus a checkpoint.
    Train(RunArgs),
    /// Train, export embeddings and probe them, optionally repeated.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        probe: ProbeArgs,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Retrain the encoder for every run (default).
        #[arg(long, conflicts_with = "rerun_probe")]
        rerun_encoder: bool,
        /// Train once and repeat only the probe.
        #[arg(long)]
        rerun_probe: bool,
    },
    /// Run the full model and every ablation variant with shared seeds.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        probe: ProbeArgs,
    },
    /// One run per value of pf, pn or num.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        probe: ProbeArgs,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Treat num values as round counts: num = epochs / rounds.
        #[arg(long)]
        as_rounds: bool,
        /// Largest accepted pf or pn.
        #[arg(long, default_value_t = 0.9)]
        max_rate: f64,
    },
    /// Export encoder embeddings from a checkpoint.
    Embed {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Probe an embeddings TSV against a dataset's labels and split.
    Probe {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        embeddings: PathBuf,
        #[command(flatten)]
        probe: ProbeArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Print node importance scores.
    Importance {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, default_value = "indegree")]
        centrality: String,
        #[arg(long, default_value_t = 0.85)]
        alpha: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print per-round mask counts.
    SchedulePreview {
        /// Preview over an identity order of this many dimensions.
        #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
        dims: Option<usize>,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "indegree")]
        centrality: String,
        #[arg(long)]
        pf: f64,
        #[arg(long)]
        rounds: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic SBM graph bundle.
    Synth {
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        blocks: usize,
        #[arg(long, default_value_t = 0.1)]
        p_in: f64,
        #[arg(long, default_value_t = 0.01)]
        p_out: f64,
        #[arg(long, default_value_t = 16)]
        feat: usize,
        #[arg(long, default_value_t = 0.5)]
        signal: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Re-execute a manifest.json.
    Replay {
        manifest: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Pf,
    Pn,
    Num,
}

impl RunArgs {
    fn resolve(&self) -> Result<hatgae_cli::RunSpec, CliError> {
        let base = TrainConfig {
            strict: self.strict,
            lr_schedule: match self.lr_schedule {
                LrArg::Constant => LrSchedule::Constant,
                LrArg::Cosine => LrSchedule::Cosine,
            },
            ..TrainConfig::default()
        };
        load_run_spec(self.config.as_deref(), &self.overrides, base)
    }
}

impl ProbeArgs {
    fn resolve(&self) -> Result<ProbeConfig, CliError> {
        let cfg = ProbeConfig {
            l2_grid: self.l2.clone(),
            probe_epochs: self.probe_epochs,
            probe_lr: self.probe_lr,
            seed: self.probe_seed,
            metric: self.metric.parse::<Metric>()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn centrality(name: &str, alpha: f64) -> Result<(CentralityMethod, PowerIterConfig), CliError> {
    let method: CentralityMethod = name.parse()?;
    let pi = PowerIterConfig {
        alpha,
        ..PowerIterConfig::default()
    };
    pi.validate()?;
    Ok((method, pi))
}

fn build(cmd: Command) -> Result<(Invocation, Option<PathBuf>), CliError> {
    Ok(match cmd {
        Command::Train(run) => (Invocation::Train { run: run.resolve()? }, Some(run.out)),
        Command::Evaluate {
            run,
            probe,
            runs,
            rerun_probe,
            ..
        } => (
            Invocation::Evaluate {
                run: run.resolve()?,
                probe: probe.resolve()?,
                runs,
                mode: if rerun_probe { RepeatMode::Probe } else { RepeatMode::Encoder },
            },
            Some(run.out),
        ),
        Command::Ablate { run, probe } => (
            Invocation::Ablate {
                run: run.resolve()?,
                probe: probe.resolve()?,
            },
            Some(run.out),
        ),
        Command::Sweep {
            run,
            probe,
            axis,
            values,
            as_rounds,
            max_rate,
        } => {
            let axis = match axis {
                AxisArg::Pf => SweepAxis::Pf,
                AxisArg::Pn => SweepAxis::Pn,
                AxisArg::Num => SweepAxis::Num,
            };
            hatgae_cli::commands::validate_sweep(axis, &values, as_rounds, max_rate)?;
            (
                Invocation::Sweep {
                    run: run.resolve()?,
                    probe: probe.resolve()?,
                    axis,
                    values,
                    as_rounds,
                    max_rate,
                },
                Some(run.out),
            )
        }
        Command::Embed { data, checkpoint, out } => (
            Invocation::Embed {
                dataset: parse_dataset(&data.dataset, data.seed)?,
                checkpoint,
            },
            Some(out),
        ),
        Command::Probe {
            data,
            embeddings,
            probe,
            out,
        } => (
            Invocation::Probe {
                dataset: parse_dataset(&data.dataset, data.seed)?,
                embeddings,
                probe: probe.resolve()?,
            },
            Some(out),
        ),
        Command::Importance {
            data,
            centrality: name,
            alpha,
            out,
        } => {
            let (centrality, power_iter) = centrality(&name, alpha)?;
            (
                Invocation::Importance {
                    dataset: parse_dataset(&data.dataset, data.seed)?,
                    centrality,
                    power_iter,
                },
                out,
            )
        }
        Command::SchedulePreview {
            dims,
            dataset,
            seed,
            centrality: name,
            pf,
            rounds,
            out,
        } => {
            let source = match (dims, dataset) {
                (Some(f), _) => PreviewSource::Dims(f),
                (None, Some(d)) => {
                    let (centrality, power_iter) = centrality(&name, PowerIterConfig::default().alpha)?;
                    PreviewSource::Dataset {
                        dataset: parse_dataset(&d, seed)?,
                        centrality,
                        power_iter,
                    }
                }
                (None, None) => return Err(CliError::Config("give --dims or --dataset".into())),
            };
            (Invocation::SchedulePreview { source, pf, rounds }, out)
        }
        Command::Synth {
            n,
            blocks,
            p_in,
            p_out,
            feat,
            signal,
            sigma,
            seed,
            out,
        } => (
            Invocation::Synth {
                sbm: SbmConfig {
                    n_nodes: n,
                    n_blocks: blocks,
                    p_in,
                    p_out,
                    feat_dim: feat,
                    signal,
                    noise_sigma: sigma,
                    seed,
                },
            },
            Some(out),
        ),
        Command::Replay { .. } => unreachable!("handled before build"),
    })
}

fn report(outcome: &Outcome, out: Option<&Path>) {
    match outcome {
        Outcome::Train(r) => println!(
            "trained {} epochs, final loss {}",
            r.records.len(),
            r.final_loss().unwrap_or(f64::NAN)
        ),
        Outcome::Evaluate(s) => println!(
            "{} {:.4} +- {:.4} over {} runs (raw features {:.4})",
            s.metric,
            s.value,
            s.std,
            s.runs.len(),
            s.baseline
        ),
        Outcome::Ablate(rows) => {
            for r in rows {
                println!("{}\t{}\t{}", r.variant, r.loss_final, r.probe_metric);
            }
        }
        Outcome::Sweep(rows) => {
            let failed = rows.iter().filter(|r| r.result.is_err()).count();
            println!("{} cells, {failed} failed", rows.len());
        }
        Outcome::Text(t) => print!("{t}"),
        Outcome::Probe(p) => println!("{} {}", p.metric, p.value),
        Outcome::Written(p) => println!("wrote {}", p.display()),
    }
    if let Some(dir) = out {
        eprintln!("outputs in {}", dir.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Replay { manifest, out } => replay(&manifest, out.as_deref()).map(|o| (o, out)),
        cmd => build(cmd).and_then(|(inv, out)| execute(&inv, out.as_deref()).map(|o| (o, out))),
    };
    match result {
        Ok((outcome, out)) => {
            report(&outcome, out.as_deref());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
