use crate::config::{DatasetSpec, RunSpec};
use crate::error::CliError;
use crate::manifest::{Invocation, PreviewSource, RepeatMode, RunManifest, SweepAxis};
use hatgae::centrality::{node_scores, CentralityMethod, PowerIterConfig};
use hatgae::eval::{
    export_embeddings, linear_probe, raw_feature_probe, read_embeddings_tsv, write_embeddings_tsv, ProbeConfig,
    ProbeReport,
};
use hatgae::gat::{load_checkpoint, save_checkpoint, ModelParams};
use hatgae::graph::{save_graph_bundle, sbm_generate, Graph, SbmConfig};
use hatgae::masking::{ascending_order, dimension_importance, MaskSchedule};
use hatgae::training::{train, TrainConfig, TrainReport, VariantRegistry};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const LOSS_FILE: &str = "loss.jsonl";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const RUNS_FILE: &str = "runs.tsv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ABLATION_FILE: &str = "ablation.tsv";
pub const SWEEP_FILE: &str = "sweep.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";
pub const PROBE_FILE: &str = "probe.json";
pub const IMPORTANCE_FILE: &str = "importance.tsv";
pub const SCHEDULE_FILE: &str = "schedule.tsv";

/// Epochs averaged at each end of the loss curve in evaluation summaries.
pub const TREND_WINDOW: usize = 10;

/// What a command produced, for callers that want more than the files.
#[derive(Debug, Clone)]
pub enum Outcome {
    Train(TrainReport),
    Evaluate(EvalSummary),
    Ablate(Vec<AblationRow>),
    Sweep(Vec<SweepRow>),
    Text(String),
    Probe(ProbeReport),
    Written(PathBuf),
}

/// Writes the manifest, then runs the command. `out` may be `None` only for
/// commands that print their result.
pub fn execute(inv: &Invocation, out: Option<&Path>) -> Result<Outcome, CliError> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        RunManifest::new(inv.clone(), dir).write(dir)?;
    }
    let need_out = || out.ok_or_else(|| CliError::Config(format!("{} needs an output directory", inv.name())));
    match inv {
        Invocation::Train { run } => cmd_train(run, need_out()?).map(Outcome::Train),
        Invocation::Evaluate { run, probe, runs, mode } => {
            cmd_evaluate(run, probe, *runs, *mode, need_out()?).map(Outcome::Evaluate)
        }
        Invocation::Ablate { run, probe } => cmd_ablate(run, probe, need_out()?).map(Outcome::Ablate),
        Invocation::Sweep {
            run,
            probe,
            axis,
            values,
            as_rounds,
            max_rate,
        } => cmd_sweep(run, probe, *axis, values, *as_rounds, *max_rate, need_out()?).map(Outcome::Sweep),
        Invocation::Embed { dataset, checkpoint } => cmd_embed(dataset, checkpoint, need_out()?).map(Outcome::Written),
        Invocation::Probe {
            dataset,
            embeddings,
            probe,
        } => cmd_probe(dataset, embeddings, probe, need_out()?).map(Outcome::Probe),
        Invocation::Importance {
            dataset,
            centrality,
            power_iter,
        } => {
            let text = cmd_importance(dataset, *centrality, power_iter)?;
            if let Some(dir) = out {
                fs::write(dir.join(IMPORTANCE_FILE), &text)?;
            }
            Ok(Outcome::Text(text))
        }
        Invocation::SchedulePreview { source, pf, rounds } => {
            let text = cmd_schedule_preview(source, *pf, *rounds)?;
            if let Some(dir) = out {
                fs::write(dir.join(SCHEDULE_FILE), &text)?;
            }
            Ok(Outcome::Text(text))
        }
        Invocation::Synth { sbm } => cmd_synth(sbm, need_out()?).map(Outcome::Written),
    }
}

/// Re-executes a manifest, optionally into a different directory.
pub fn replay(manifest: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let m = RunManifest::read(manifest)?;
    let dir = out.map(Path::to_path_buf).unwrap_or(m.out_dir.clone());
    execute(&m.invocation, Some(&dir))
}

fn train_and_save(g: &Graph, cfg: &TrainConfig, dir: &Path, tag: &str) -> Result<(ModelParams, TrainReport), CliError> {
    let (model, mut report) = train(g, cfg)?;
    fs::write(dir.join(format!("{tag}{LOSS_FILE}")), report.to_json_lines())?;
    let ckpt = dir.join(format!("{tag}{CHECKPOINT_FILE}"));
    save_checkpoint(&model, &ckpt)?;
    report.checkpoint = Some(ckpt);
    Ok((model, report))
}

pub fn cmd_train(run: &RunSpec, out: &Path) -> Result<TrainReport, CliError> {
    let g = run.dataset.load()?;
    Ok(train_and_save(&g, &run.train, out, "")?.1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRun {
    pub run: usize,
    pub train_seed: u64,
    pub probe_seed: u64,
    pub value: f64,
    pub l2_chosen: f64,
    pub baseline: f64,
    /// Mean loss over the first and last [`TREND_WINDOW`] epochs.
    pub loss_head: f64,
    pub loss_tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub metric: String,
    pub runs: Vec<EvalRun>,
    pub value: f64,
    pub std: f64,
    pub baseline: f64,
    pub loss_head: f64,
    pub loss_tail: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn trend(report: &TrainReport) -> (f64, f64) {
    let n = report.records.len();
    (
        report.mean_loss(0, TREND_WINDOW).unwrap_or(f64::NAN),
        report.mean_loss(n.saturating_sub(TREND_WINDOW), n).unwrap_or(f64::NAN),
    )
}

/// Repeats train-and-probe `runs` times; run `i` uses seeds offset by `i`.
pub fn cmd_evaluate(
    run: &RunSpec,
    probe: &ProbeConfig,
    runs: usize,
    mode: RepeatMode,
    out: &Path,
) -> Result<EvalSummary, CliError> {
    if runs == 0 {
        return Err(CliError::Config("runs must be at least 1".into()));
    }
    let g = run.dataset.load()?;
    let mut rows = Vec::with_capacity(runs);
    let mut trained: Option<(ModelParams, TrainReport)> = None;
    for i in 0..runs {
        let offset = i as u64;
        let train_seed = match mode {
            RepeatMode::Encoder => run.train.seed + offset,
            RepeatMode::Probe => run.train.seed,
        };
        if mode == RepeatMode::Encoder || trained.is_none() {
            let cfg = TrainConfig {
                seed: train_seed,
                ..run.train.clone()
            };
            trained = Some(train_and_save(&g, &cfg, out, &format!("run{i}_"))?);
        }
        let (model, report) = trained.as_ref().expect("trained above");
        let pcfg = ProbeConfig {
            seed: probe.seed + offset,
            ..probe.clone()
        };
        let emb = export_embeddings(&g, model)?;
        let res = linear_probe(&emb.values, g.labels(), g.split(), &pcfg)?;
        let base = raw_feature_probe(&g, &pcfg)?;
        let (loss_head, loss_tail) = trend(report);
        rows.push(EvalRun {
            run: i,
            train_seed,
            probe_seed: pcfg.seed,
            value: res.value,
            l2_chosen: res.l2_chosen,
            baseline: base.value,
            loss_head,
            loss_tail,
        });
    }
    let value = mean(rows.iter().map(|r| r.value));
    let std = mean(rows.iter().map(|r| (r.value - value).powi(2))).sqrt();
    let summary = EvalSummary {
        metric: probe.metric.name().to_string(),
        value,
        std,
        baseline: mean(rows.iter().map(|r| r.baseline)),
        loss_head: mean(rows.iter().map(|r| r.loss_head)),
        loss_tail: mean(rows.iter().map(|r| r.loss_tail)),
        runs: rows,
    };
    let mut tsv = String::from("run\ttrain_seed\tprobe_seed\tvalue\tl2_chosen\tbaseline\tloss_head\tloss_tail\n");
    for r in &summary.runs {
        writeln!(
            tsv,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.run, r.train_seed, r.probe_seed, r.value, r.l2_chosen, r.baseline, r.loss_head, r.loss_tail
        )
        .expect("write to String");
    }
    fs::write(out.join(RUNS_FILE), tsv)?;
    fs::write(out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: String,
    pub loss_final: f64,
    pub probe_metric: f64,
    pub param_count: usize,
    pub note: String,
}

/// Trains every registered variant with the same seeds and graph.
pub fn cmd_ablate(run: &RunSpec, probe: &ProbeConfig, out: &Path) -> Result<Vec<AblationRow>, CliError> {
    let g = run.dataset.load()?;
    let registry = VariantRegistry::with_defaults();
    let mut rows = Vec::new();
    for name in registry.names() {
        let cfg = TrainConfig {
            variant: name.to_string(),
            ..run.train.clone()
        };
        let (model, report) = train_and_save(&g, &cfg, out, &format!("{name}_"))?;
        let emb = export_embeddings(&g, &model)?;
        let res = linear_probe(&emb.values, g.labels(), g.split(), probe)?;
        let note = if registry.get(name)?.corrupts() {
            String::new()
        } else {
            "noise row excluded from param_count".to_string()
        };
        rows.push(AblationRow {
            variant: name.to_string(),
            loss_final: report.final_loss().unwrap_or(f64::NAN),
            probe_metric: res.value,
            param_count: report.param_count,
            note,
        });
    }
    let mut tsv = String::from("variant\tloss_final\tprobe_metric\tparam_count\tnote\n");
    for r in &rows {
        writeln!(tsv, "{}\t{}\t{}\t{}\t{}", r.variant, r.loss_final, r.probe_metric, r.param_count, r.note)
            .expect("write to String");
    }
    fs::write(out.join(ABLATION_FILE), tsv)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub num: usize,
    pub result: Result<(f64, f64), String>,
}

/// Checks sweep values before any cell runs.
pub fn validate_sweep(axis: SweepAxis, values: &[f64], as_rounds: bool, max_rate: f64) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    for &v in values {
        let ok = match axis {
            SweepAxis::Pf | SweepAxis::Pn => v > 0.0 && v <= max_rate,
            SweepAxis::Num => v >= 1.0 && v.fract() == 0.0,
        };
        if !ok {
            let what = match axis {
                SweepAxis::Pf | SweepAxis::Pn => format!("must lie in (0, {max_rate}]"),
                SweepAxis::Num if as_rounds => "round counts must be positive integers".into(),
                SweepAxis::Num => "intervals must be positive integers".into(),
            };
            return Err(CliError::Config(format!("sweep value {v} {what}")));
        }
    }
    Ok(())
}

/// One train-and-probe per value; a failing cell is recorded, not fatal.
pub fn cmd_sweep(
    run: &RunSpec,
    probe: &ProbeConfig,
    axis: SweepAxis,
    values: &[f64],
    as_rounds: bool,
    max_rate: f64,
    out: &Path,
) -> Result<Vec<SweepRow>, CliError> {
    validate_sweep(axis, values, as_rounds, max_rate)?;
    let g = run.dataset.load()?;
    let mut rows = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let mut cfg = run.train.clone();
        match axis {
            SweepAxis::Pf => cfg.pf = v,
            SweepAxis::Pn => cfg.pn = v,
            SweepAxis::Num if as_rounds => cfg.num = (cfg.epochs / v as usize).max(1),
            SweepAxis::Num => cfg.num = v as usize,
        }
        let result = (|| -> Result<(f64, f64), CliError> {
            let (model, report) = train_and_save(&g, &cfg, out, &format!("cell{i}_"))?;
            let emb = export_embeddings(&g, &model)?;
            let res = linear_probe(&emb.values, g.labels(), g.split(), probe)?;
            Ok((report.final_loss().unwrap_or(f64::NAN), res.value))
        })()
        .map_err(|e| e.to_string());
        rows.push(SweepRow {
            value: v,
            num: cfg.num,
            result,
        });
    }
    let axis_name = serde_json::to_value(axis)?.as_str().unwrap_or_default().to_string();
    let mut tsv = format!("{axis_name}\tnum\tstatus\tloss_final\tprobe_metric\n");
    for r in &rows {
        let line = match &r.result {
            Ok((l, p)) => format!("{}\t{}\tok\t{l}\t{p}", r.value, r.num),
            Err(e) => format!("{}\t{}\terror: {}\t\t", r.value, r.num, e.replace(['\t', '\n'], " ")),
        };
        writeln!(tsv, "{line}").expect("write to String");
    }
    fs::write(out.join(SWEEP_FILE), tsv)?;
    Ok(rows)
}

pub fn cmd_embed(dataset: &DatasetSpec, checkpoint: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let g = dataset.load()?;
    let model = load_checkpoint(checkpoint)?;
    let mut emb = export_embeddings(&g, &model)?;
    emb.checkpoint = checkpoint.display().to_string();
    emb.graph = dataset.describe();
    let path = out.join(EMBEDDINGS_FILE);
    let mut buf = Vec::new();
    write_embeddings_tsv(&emb.values, &mut buf)?;
    fs::write(&path, buf)?;
    Ok(path)
}

pub fn cmd_probe(
    dataset: &DatasetSpec,
    embeddings: &Path,
    probe: &ProbeConfig,
    out: &Path,
) -> Result<ProbeReport, CliError> {
    let g = dataset.load()?;
    let file = fs::File::open(embeddings).map_err(|e| CliError::Io(format!("{}: {e}", embeddings.display())))?;
    let values = read_embeddings_tsv(std::io::BufReader::new(file))?;
    let res = linear_probe(&values, g.labels(), g.split(), probe)?;
    let report = ProbeReport::from(&res);
    fs::write(out.join(PROBE_FILE), serde_json::to_string(&report)? + "\n")?;
    Ok(report)
}

/// One header line naming the method, then `node_id\tscore` rows.
pub fn cmd_importance(
    dataset: &DatasetSpec,
    centrality: CentralityMethod,
    power_iter: &PowerIterConfig,
) -> Result<String, CliError> {
    let g = dataset.load()?;
    let s = node_scores(&g, centrality, power_iter)?;
    let mut text = format!("# method={}", s.method);
    match centrality {
        CentralityMethod::Eigenvector => write!(text, "\tlambda={}", s.eigenvalue.unwrap_or(f64::NAN)),
        CentralityMethod::PageRank => write!(text, "\talpha={}", power_iter.alpha),
        CentralityMethod::InDegree => Ok(()),
    }
    .expect("write to String");
    text.push('\n');
    for (v, x) in s.values.iter().enumerate() {
        writeln!(text, "{v}\t{x}").expect("write to String");
    }
    Ok(text)
}

/// `round\tcount\tremaining\tfirst_dims`, listing at most ten dimensions.
pub fn cmd_schedule_preview(source: &PreviewSource, pf: f64, rounds: usize) -> Result<String, CliError> {
    let order = match source {
        PreviewSource::Dims(f) => (0..*f).collect(),
        PreviewSource::Dataset {
            dataset,
            centrality,
            power_iter,
        } => {
            let g = dataset.load()?;
            let s = node_scores(&g, *centrality, power_iter)?;
            ascending_order(&dimension_importance(&g, &s)?)
        }
    };
    let sched = MaskSchedule::from_order(order, pf, rounds)?;
    let mut text = String::from("round\tcount\tremaining\tfirst_dims\n");
    for r in 1..=sched.rounds() {
        let dims: Vec<String> = sched.round_dims(r).iter().take(10).map(usize::to_string).collect();
        writeln!(text, "{r}\t{}\t{}\t{}", sched.counts()[r - 1], sched.remaining_after(r), dims.join(","))
            .expect("write to String");
    }
    Ok(text)
}

pub fn cmd_synth(sbm: &SbmConfig, out: &Path) -> Result<PathBuf, CliError> {
    let g = sbm_generate(sbm)?;
    save_graph_bundle(&g, out)?;
    Ok(out.to_path_buf())
}
