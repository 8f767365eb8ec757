//! Multi-head graph attention encoder and decoder.
//!
//! For every head `k` and node `v`, attention over the incoming set
//! `NB(v) + {v}` is
//!
//! ```text
//! e_vu = LeakyReLU(a_k^T [W_k h_v || W_k h_u])
//! a_vu = softmax_u(e_vu)
//! h'_v = sum_u a_vu W_k h_u
//! ```
//!
//! Heads are concatenated (hidden layers) or averaged (final decoder layer),
//! then passed through PReLU or the identity. There are no bias terms.

mod checkpoint;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError};

use crate::autodiff::{AutodiffError, Matrix, ParamStore, Tape, Var};
use crate::corruption::{NodeMask, NoiseVector};
use crate::graph::Graph;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::rc::Rc;

/// Negative slope of the attention-logit LeakyReLU.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Initial PReLU slope.
pub const PRELU_INIT: f64 = 0.25;
/// Parameter name of the shared noise row.
pub const NOISE_PARAM: &str = "noise";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("layer {layer} expects input width {expected}, got {got}")]
    WidthMismatch {
        layer: String,
        expected: usize,
        got: usize,
    },
    #[error("missing parameter {0:?}")]
    MissingParam(String),
    #[error("mask has {mask} rows, hidden code has {rows}")]
    MaskMismatch { mask: usize, rows: usize },
    #[error("graph has {graph} nodes/{graph_dims} dims, model expects {model_dims} dims")]
    GraphMismatch {
        graph: usize,
        graph_dims: usize,
        model_dims: usize,
    },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    Concat,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Prelu,
    Identity,
}

/// Shape of one attention layer. Weights live in a [`ParamStore`] under
/// `{name}.h{k}.w`, `{name}.h{k}.attn` and `{name}.prelu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatLayer {
    pub name: String,
    pub in_dim: usize,
    pub head_dim: usize,
    pub heads: usize,
    pub combine: Combine,
    pub activation: Activation,
}

impl GatLayer {
    pub fn out_dim(&self) -> usize {
        match self.combine {
            Combine::Concat => self.heads * self.head_dim,
            Combine::Average => self.head_dim,
        }
    }

    pub fn weight_name(&self, head: usize) -> String {
        format!("{}.h{head}.w", self.name)
    }

    pub fn attn_name(&self, head: usize) -> String {
        format!("{}.h{head}.attn", self.name)
    }

    pub fn prelu_name(&self) -> String {
        format!("{}.prelu", self.name)
    }

    fn init_params<R: Rng + ?Sized>(&self, store: &mut ParamStore, rng: &mut R) {
        let glorot = |rows: usize, cols: usize, rng: &mut R| {
            let s = (6.0 / (rows + cols) as f64).sqrt();
            Matrix::from_shape_fn((rows, cols), |_| rng.random_range(-s..s))
        };
        for k in 0..self.heads {
            store.insert(self.weight_name(k), glorot(self.in_dim, self.head_dim, rng));
            store.insert(self.attn_name(k), glorot(2 * self.head_dim, 1, rng));
        }
        if self.activation == Activation::Prelu {
            store.insert(self.prelu_name(), Matrix::from_elem((1, 1), PRELU_INIT));
        }
    }
}

/// Two encoder layers (concat, PReLU) and two decoder layers (concat with
/// PReLU, then head-averaged to the feature width with the identity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub in_dim: usize,
    pub hidden: usize,
    pub heads: usize,
    pub encoder: Vec<GatLayer>,
    pub decoder: Vec<GatLayer>,
}

impl Architecture {
    pub fn new(in_dim: usize, hidden: usize, heads: usize) -> Result<Self, GatError> {
        if in_dim == 0 || hidden == 0 || heads == 0 {
            return Err(GatError::InvalidArchitecture(
                "feature width, hidden size and heads must be positive".into(),
            ));
        }
        if !hidden.is_multiple_of(heads) {
            return Err(GatError::InvalidArchitecture(format!(
                "hidden size {hidden} is not divisible by {heads} heads"
            )));
        }
        let head_dim = hidden / heads;
        let layer = |name: &str, in_dim, head_dim, combine, activation| GatLayer {
            name: name.to_string(),
            in_dim,
            head_dim,
            heads,
            combine,
            activation,
        };
        Ok(Architecture {
            in_dim,
            hidden,
            heads,
            encoder: vec![
                layer("enc0", in_dim, head_dim, Combine::Concat, Activation::Prelu),
                layer("enc1", hidden, head_dim, Combine::Concat, Activation::Prelu),
            ],
            decoder: vec![
                layer("dec0", hidden, head_dim, Combine::Concat, Activation::Prelu),
                layer("dec1", hidden, in_dim, Combine::Average, Activation::Identity),
            ],
        })
    }
}

/// Encoder/decoder weights, PReLU slopes and the noise row.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Architecture,
    pub store: ParamStore,
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut store = ParamStore::new();
        for layer in arch.encoder.iter().chain(&arch.decoder) {
            layer.init_params(&mut store, rng);
        }
        store.insert(NOISE_PARAM, NoiseVector::init(arch.in_dim, rng).w);
        ModelParams { arch, store }
    }

    pub fn noise(&self) -> Option<NoiseVector> {
        self.store.get(NOISE_PARAM).map(|w| NoiseVector { w: w.clone() })
    }

    pub fn is_encoder_param(name: &str) -> bool {
        name.starts_with("enc")
    }

    pub fn is_decoder_param(name: &str) -> bool {
        name.starts_with("dec")
    }

    /// Encoder forward pass on raw feature values, without a gradient tape
    /// being kept around.
    pub fn encode_values(&self, ag: &AttentionGraph, x: &Matrix) -> Result<Matrix, GatError> {
        let mut tape = Tape::new();
        let vars = constants_from(&mut tape, &self.store)?;
        let xv = tape.constant(x.clone())?;
        let h = encode(&mut tape, ag, xv, &self.arch, &vars)?;
        Ok(tape.value(h).clone())
    }
}

fn constants_from(tape: &mut Tape, store: &ParamStore) -> Result<BTreeMap<String, Var>, AutodiffError> {
    store
        .iter()
        .map(|(n, m)| Ok((n.to_string(), tape.constant(m.clone())?)))
        .collect()
}

/// Edge lists grouped by destination, self-loops included, ready for
/// segment softmax.
#[derive(Debug, Clone)]
pub struct AttentionGraph {
    n_nodes: usize,
    offsets: Rc<[usize]>,
    src: Rc<[usize]>,
    dst: Rc<[usize]>,
}

impl AttentionGraph {
    /// Adds a self-loop to every node and groups edges `u -> v` by `v`.
    pub fn new(g: &Graph) -> Self {
        let looped = g.with_self_loops();
        let n = looped.n_nodes();
        let dst: Vec<usize> = (0..n)
            .flat_map(|v| std::iter::repeat_n(v, looped.neighbors_in(v).len()))
            .collect();
        AttentionGraph {
            n_nodes: n,
            offsets: Rc::from(looped.in_offsets()),
            src: Rc::from(looped.in_targets()),
            dst: Rc::from(dst),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.src.len()
    }

    /// Segment boundaries: edges into `v` are `offsets[v]..offsets[v+1]`.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn sources(&self) -> &[usize] {
        &self.src
    }
}

fn lookup(vars: &BTreeMap<String, Var>, name: &str) -> Result<Var, GatError> {
    vars.get(name)
        .copied()
        .ok_or_else(|| GatError::MissingParam(name.to_string()))
}

/// Output of one layer plus each head's per-edge attention column.
pub struct LayerOutput {
    pub out: Var,
    pub attention: Vec<Var>,
}

pub fn gat_layer_forward(
    tape: &mut Tape,
    ag: &AttentionGraph,
    h: Var,
    layer: &GatLayer,
    vars: &BTreeMap<String, Var>,
) -> Result<LayerOutput, GatError> {
    let width = tape.value(h).ncols();
    if width != layer.in_dim || tape.value(h).nrows() != ag.n_nodes {
        return Err(GatError::WidthMismatch {
            layer: layer.name.clone(),
            expected: layer.in_dim,
            got: width,
        });
    }
    let f = layer.head_dim;
    let mut heads = Vec::with_capacity(layer.heads);
    let mut attention = Vec::with_capacity(layer.heads);
    for k in 0..layer.heads {
        let w = lookup(vars, &layer.weight_name(k))?;
        let a = lookup(vars, &layer.attn_name(k))?;
        let wh = tape.matmul(h, w)?;
        let a_dst = tape.slice_rows(a, 0, f)?;
        let a_src = tape.slice_rows(a, f, f)?;
        let s_dst = tape.matmul(wh, a_dst)?;
        let s_src = tape.matmul(wh, a_src)?;
        let e_dst = tape.gather_rows(s_dst, ag.dst.clone())?;
        let e_src = tape.gather_rows(s_src, ag.src.clone())?;
        let logits = tape.add(e_dst, e_src)?;
        let logits = tape.leaky_relu(logits, LEAKY_SLOPE)?;
        let alpha = tape.segment_softmax(logits, ag.offsets.clone())?;
        let messages = tape.gather_rows(wh, ag.src.clone())?;
        let weighted = tape.mul(messages, alpha)?;
        heads.push(tape.scatter_add_rows(weighted, ag.dst.clone(), ag.n_nodes)?);
        attention.push(alpha);
    }
    let combined = match layer.combine {
        Combine::Concat => tape.concat_cols(&heads)?,
        Combine::Average => {
            let mut acc = heads[0];
            for &hk in &heads[1..] {
                acc = tape.add(acc, hk)?;
            }
            tape.scale(acc, 1.0 / layer.heads as f64)?
        }
    };
    let out = match layer.activation {
        Activation::Identity => combined,
        Activation::Prelu => {
            let slope = lookup(vars, &layer.prelu_name())?;
            tape.prelu(combined, slope)?
        }
    };
    Ok(LayerOutput { out, attention })
}

fn stack(
    tape: &mut Tape,
    ag: &AttentionGraph,
    mut h: Var,
    layers: &[GatLayer],
    vars: &BTreeMap<String, Var>,
) -> Result<Var, GatError> {
    for layer in layers {
        h = gat_layer_forward(tape, ag, h, layer, vars)?.out;
    }
    Ok(h)
}

/// `H = E(A, X~)`.
pub fn encode(
    tape: &mut Tape,
    ag: &AttentionGraph,
    x: Var,
    arch: &Architecture,
    vars: &BTreeMap<String, Var>,
) -> Result<Var, GatError> {
    stack(tape, ag, x, &arch.encoder, vars)
}

/// `Z = D(A, H~)`.
pub fn decode(
    tape: &mut Tape,
    ag: &AttentionGraph,
    h: Var,
    arch: &Architecture,
    vars: &BTreeMap<String, Var>,
) -> Result<Var, GatError> {
    stack(tape, ag, h, &arch.decoder, vars)
}

/// Zeroes the hidden codes of noisy nodes.
pub fn remask(tape: &mut Tape, h: Var, mask: &NodeMask) -> Result<Var, GatError> {
    let rows = tape.value(h).nrows();
    if rows != mask.len() {
        return Err(GatError::MaskMismatch {
            mask: mask.len(),
            rows,
        });
    }
    Ok(tape.zero_rows(h, mask.shared_flags())?)
}
