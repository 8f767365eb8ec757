use crate::config::{DatasetSpec, RunSpec};
use crate::error::CliError;
use hatgae::centrality::{CentralityMethod, PowerIterConfig};
use hatgae::eval::ProbeConfig;
use hatgae::graph::SbmConfig;
use hatgae::rng::Stream;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepeatMode {
    /// Retrain the encoder for every run.
    Encoder,
    /// Train once; repeat only the probe.
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Pf,
    Pn,
    Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreviewSource {
    /// Identity dimension order over this many dimensions.
    Dims(usize),
    /// Importance order of a dataset.
    Dataset {
        dataset: DatasetSpec,
        centrality: CentralityMethod,
        power_iter: PowerIterConfig,
    },
}

/// A fully resolved command: everything needed to reproduce its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Invocation {
    Train {
        run: RunSpec,
    },
    Evaluate {
        run: RunSpec,
        probe: ProbeConfig,
        runs: usize,
        mode: RepeatMode,
    },
    Ablate {
        run: RunSpec,
        probe: ProbeConfig,
    },
    Sweep {
        run: RunSpec,
        probe: ProbeConfig,
        axis: SweepAxis,
        values: Vec<f64>,
        as_rounds: bool,
        max_rate: f64,
    },
    Embed {
        dataset: DatasetSpec,
        checkpoint: PathBuf,
    },
    Probe {
        dataset: DatasetSpec,
        embeddings: PathBuf,
        probe: ProbeConfig,
    },
    Importance {
        dataset: DatasetSpec,
        centrality: CentralityMethod,
        power_iter: PowerIterConfig,
    },
    SchedulePreview {
        source: PreviewSource,
        pf: f64,
        rounds: usize,
    },
    Synth {
        sbm: SbmConfig,
    },
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Invocation::Train { .. } => "train",
            Invocation::Evaluate { .. } => "evaluate",
            Invocation::Ablate { .. } => "ablate",
            Invocation::Sweep { .. } => "sweep",
            Invocation::Embed { .. } => "embed",
            Invocation::Probe { .. } => "probe",
            Invocation::Importance { .. } => "importance",
            Invocation::SchedulePreview { .. } => "schedule-preview",
            Invocation::Synth { .. } => "synth",
        }
    }

    fn seeds(&self) -> BTreeMap<String, u64> {
        let mut s = BTreeMap::new();
        let dataset = |d: &DatasetSpec, s: &mut BTreeMap<String, u64>| {
            if let DatasetSpec::Sbm(c) = d {
                s.insert(Stream::Sbm.name().to_string(), c.seed);
            }
        };
        match self {
            Invocation::Train { run }
            | Invocation::Evaluate { run, .. }
            | Invocation::Ablate { run, .. }
            | Invocation::Sweep { run, .. } => {
                dataset(&run.dataset, &mut s);
                for st in [Stream::NodeMask, Stream::Init, Stream::Permutation] {
                    s.insert(st.name().to_string(), run.train.seed);
                }
            }
            Invocation::Embed { dataset: d, .. } | Invocation::Importance { dataset: d, .. } => dataset(d, &mut s),
            Invocation::SchedulePreview {
                source: PreviewSource::Dataset { dataset: d, .. },
                ..
            } => dataset(d, &mut s),
            Invocation::SchedulePreview { .. } => {}
            Invocation::Synth { sbm } => {
                s.insert(Stream::Sbm.name().to_string(), sbm.seed);
            }
            Invocation::Probe { dataset: d, probe, .. } => {
                dataset(d, &mut s);
                s.insert(Stream::Probe.name().to_string(), probe.seed);
            }
        }
        if let Invocation::Evaluate { probe, .. } | Invocation::Ablate { probe, .. } | Invocation::Sweep { probe, .. } =
            self
        {
            s.insert(Stream::Probe.name().to_string(), probe.seed);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub out_dir: PathBuf,
    /// Master seed per named random stream.
    pub seeds: BTreeMap<String, u64>,
    /// ChaCha stream id per stream name.
    pub stream_ids: BTreeMap<String, u64>,
    pub invocation: Invocation,
}

impl RunManifest {
    pub fn new(invocation: Invocation, out_dir: &Path) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            out_dir: out_dir.to_path_buf(),
            seeds: invocation.seeds(),
            stream_ids: Stream::ALL.iter().map(|s| (s.name().to_string(), *s as u64)).collect(),
            invocation,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
