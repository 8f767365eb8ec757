//! Plain `key=value` run configuration.

use crate::error::CliError;
use hatgae::graph::{load_graph_bundle, sbm_generate, Graph, SbmConfig};
use hatgae::training::{TrainConfig, VariantRegistry};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// The only keys a config file may set.
pub const KEYS: [&str; 13] = [
    "dataset",
    "pf",
    "pn",
    "num",
    "epochs",
    "lr",
    "weight_decay",
    "hidden",
    "heads",
    "seed",
    "centrality",
    "variant",
    "stop_grad_target",
];

const SBM_KEYS: [&str; 8] = ["n", "blocks", "p_in", "p_out", "feat", "signal", "sigma", "seed"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    Bundle { path: PathBuf },
    Sbm(SbmConfig),
}

impl DatasetSpec {
    pub fn load(&self) -> Result<Graph, CliError> {
        Ok(match self {
            DatasetSpec::Bundle { path } => load_graph_bundle(path)?,
            DatasetSpec::Sbm(cfg) => sbm_generate(cfg)?,
        })
    }

    pub fn describe(&self) -> String {
        match self {
            DatasetSpec::Bundle { path } => path.display().to_string(),
            DatasetSpec::Sbm(c) => format!(
                "sbm:n={},blocks={},p_in={},p_out={},feat={},signal={},sigma={},seed={}",
                c.n_nodes, c.n_blocks, c.p_in, c.p_out, c.feat_dim, c.signal, c.noise_sigma, c.seed
            ),
        }
    }
}

/// A resolved dataset plus training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub dataset: DatasetSpec,
    pub train: TrainConfig,
}

fn nearest_key(key: &str, candidates: &[&str]) -> Option<String> {
    candidates
        .iter()
        .map(|k| (strsim::damerau_levenshtein(key, k), *k))
        .min()
        .filter(|(d, _)| *d <= 3)
        .map(|(_, k)| k.to_string())
}

fn unknown(key: &str, candidates: &[&str], context: &str) -> CliError {
    match nearest_key(key, candidates) {
        Some(k) => CliError::Config(format!("unknown {context} key {key:?} (did you mean {k:?}?)")),
        None => CliError::Config(format!("unknown {context} key {key:?} (valid keys: {})", candidates.join(", "))),
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("{key}={value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Config(format!("{key}={value:?}: expected true or false"))),
    }
}

/// `sbm` or `sbm:n=300,blocks=3,...`; anything else is a bundle directory.
/// An SBM without an explicit seed takes `default_seed`.
pub fn parse_dataset(value: &str, default_seed: u64) -> Result<DatasetSpec, CliError> {
    let Some(rest) = value.strip_prefix("sbm").filter(|r| r.is_empty() || r.starts_with(':')) else {
        return Ok(DatasetSpec::Bundle { path: PathBuf::from(value) });
    };
    let mut cfg = SbmConfig {
        seed: default_seed,
        ..SbmConfig::default()
    };
    for part in rest.trim_start_matches(':').split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("sbm option {part:?} is not key=value")))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "n" => cfg.n_nodes = parse_value(k, v)?,
            "blocks" => cfg.n_blocks = parse_value(k, v)?,
            "p_in" => cfg.p_in = parse_value(k, v)?,
            "p_out" => cfg.p_out = parse_value(k, v)?,
            "feat" => cfg.feat_dim = parse_value(k, v)?,
            "signal" => cfg.signal = parse_value(k, v)?,
            "sigma" => cfg.noise_sigma = parse_value(k, v)?,
            "seed" => cfg.seed = parse_value(k, v)?,
            _ => return Err(unknown(k, &SBM_KEYS, "sbm")),
        }
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(DatasetSpec::Sbm(cfg))
}

/// Splits config text into `(line, key, value)` triples, skipping blanks and
/// `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Resolves config file pairs followed by `overrides`; later values win.
pub fn resolve(pairs: &[(String, String)], base: TrainConfig) -> Result<RunSpec, CliError> {
    let mut cfg = base;
    let mut dataset = None;
    for (k, v) in pairs {
        let v = v.as_str();
        match k.as_str() {
            "dataset" => dataset = Some(v.to_string()),
            "pf" => cfg.pf = parse_value(k, v)?,
            "pn" => cfg.pn = parse_value(k, v)?,
            "num" => cfg.num = parse_value(k, v)?,
            "epochs" => cfg.epochs = parse_value(k, v)?,
            "lr" => cfg.lr = parse_value(k, v)?,
            "weight_decay" => cfg.weight_decay = parse_value(k, v)?,
            "hidden" => cfg.hidden = parse_value(k, v)?,
            "heads" => cfg.heads = parse_value(k, v)?,
            "seed" => cfg.seed = parse_value(k, v)?,
            "centrality" => cfg.centrality = parse_value(k, v)?,
            "variant" => cfg.variant = v.to_ascii_lowercase(),
            "stop_grad_target" => cfg.stop_grad_target = parse_bool(k, v)?,
            _ => return Err(unknown(k, &KEYS, "config")),
        }
    }
    let dataset = dataset.ok_or_else(|| CliError::Config("missing required key \"dataset\"".into()))?;
    let dataset = parse_dataset(&dataset, cfg.seed)?;
    VariantRegistry::with_defaults().get(&cfg.variant)?;
    cfg.validate()?;
    if cfg.hidden == 0 || cfg.heads == 0 || !cfg.hidden.is_multiple_of(cfg.heads) {
        return Err(CliError::Config(format!(
            "hidden={} must be a positive multiple of heads={}",
            cfg.hidden, cfg.heads
        )));
    }
    Ok(RunSpec { dataset, train: cfg })
}

/// Reads `path` (if any) and applies `--set key=value` overrides.
pub fn load_run_spec(path: Option<&Path>, overrides: &[String], base: TrainConfig) -> Result<RunSpec, CliError> {
    let mut pairs = Vec::new();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        pairs.extend(parse_pairs(&text)?.into_iter().map(|(_, k, v)| (k, v)));
    }
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {o:?} is not key=value")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    resolve(&pairs, base)
}
