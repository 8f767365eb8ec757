//! Frozen-encoder embeddings and linear-probe evaluation.

mod metrics;
mod probe;

pub use metrics::{metrics, multilabel_micro_f1, per_class_report, ClassReport, Metric};
pub use probe::{fit_softmax, linear_probe, probe_objective, ProbeConfig, ProbeReport, ProbeResult, SoftmaxClassifier};

use crate::autodiff::Matrix;
use crate::gat::{AttentionGraph, GatError, ModelParams};
use crate::graph::{Graph, Split};
use std::io::{BufRead, Write};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("graph has {graph} feature dimensions, encoder expects {model}")]
    DimensionMismatch { graph: usize, model: usize },
    #[error("labels are required for probing")]
    MissingLabels,
    #[error("a train/val/test split is required for probing")]
    MissingSplit,
    #[error("{0} split is empty")]
    EmptySplit(Split),
    #[error("training split has a single class ({0})")]
    SingleClass(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no predictions to score")]
    Empty,
    #[error("embeddings contain non-finite values")]
    NonFinite,
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("invalid probe configuration: {0}")]
    Config(String),
    #[error("embeddings file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Gat(#[from] GatError),
}

impl From<std::io::Error> for EvalError {
    fn from(e: std::io::Error) -> Self {
        EvalError::Io(e.to_string())
    }
}

/// Encoder output `H` for every node, with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub values: Matrix,
    pub checkpoint: String,
    pub graph: String,
}

impl EmbeddingMatrix {
    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }
}

/// Encoder forward pass on the original features: no masking, corruption or
/// remasking.
pub fn export_embeddings(g: &Graph, model: &ModelParams) -> Result<EmbeddingMatrix, EvalError> {
    if g.n_dims() != model.arch.in_dim {
        return Err(EvalError::DimensionMismatch {
            graph: g.n_dims(),
            model: model.arch.in_dim,
        });
    }
    let values = model.encode_values(&AttentionGraph::new(g), g.features())?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    Ok(EmbeddingMatrix {
        values,
        checkpoint: String::new(),
        graph: String::new(),
    })
}

/// The same probe on the raw feature matrix.
pub fn raw_feature_probe(g: &Graph, cfg: &ProbeConfig) -> Result<ProbeResult, EvalError> {
    linear_probe(g.features(), g.labels(), g.split(), cfg)
}

pub fn probe_graph_embeddings(g: &Graph, emb: &EmbeddingMatrix, cfg: &ProbeConfig) -> Result<ProbeResult, EvalError> {
    linear_probe(&emb.values, g.labels(), g.split(), cfg)
}

/// Header `node_id\tv0\t...`, then one row per node.
pub fn write_embeddings_tsv<W: Write>(values: &Matrix, mut out: W) -> Result<(), EvalError> {
    write!(out, "node_id")?;
    for j in 0..values.ncols() {
        write!(out, "\tv{j}")?;
    }
    writeln!(out)?;
    for (i, row) in values.rows().into_iter().enumerate() {
        write!(out, "{i}")?;
        for v in row {
            write!(out, "\t{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Inverse of [`write_embeddings_tsv`]; rows must list node ids `0..N` in order.
pub fn read_embeddings_tsv<R: BufRead>(input: R) -> Result<Matrix, EvalError> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or(EvalError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let width = header?.split('\t').count().saturating_sub(1);
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| EvalError::Parse { line: i + 1, msg };
        let mut fields = line.split('\t');
        let id: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| err("bad node id".into()))?;
        if id != rows {
            return Err(err(format!("expected node id {rows}, got {id}")));
        }
        let row: Vec<f64> = fields
            .map(|f| f.parse::<f64>().map_err(|e| err(format!("{f:?}: {e}"))))
            .collect::<Result<_, _>>()?;
        if row.len() != width {
            return Err(err(format!("expected {width} values, got {}", row.len())));
        }
        values.extend(row);
        rows += 1;
    }
    Ok(Matrix::from_shape_vec((rows, width), values).expect("row widths checked"))
}
