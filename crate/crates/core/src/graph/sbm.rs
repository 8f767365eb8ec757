//! Stochastic block model generator used as the desk-scale dataset.

use super::{Graph, GraphError, Split};
use crate::rng::{stream_rng, Stream};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub n_nodes: usize,
    pub n_blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feat_dim: usize,
    /// Magnitude of the per-block mean shift.
    pub signal: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        SbmConfig {
            n_nodes: 300,
            n_blocks: 3,
            p_in: 0.1,
            p_out: 0.01,
            feat_dim: 16,
            signal: 0.5,
            noise_sigma: 1.0,
            seed: 7,
        }
    }
}

impl SbmConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |m: String| Err(GraphError::InvalidSbm(m));
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return bad(format!("probabilities must lie in [0, 1] (p_in={}, p_out={})", self.p_in, self.p_out));
        }
        if self.p_out > self.p_in {
            return bad(format!("p_out={} exceeds p_in={}", self.p_out, self.p_in));
        }
        if self.n_blocks == 0 || self.n_nodes < self.n_blocks {
            return bad(format!("need 1 <= n_blocks <= n_nodes (got {} blocks, {} nodes)", self.n_blocks, self.n_nodes));
        }
        if self.feat_dim == 0 {
            return bad("feat_dim must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) || !self.signal.is_finite() {
            return bad("signal and noise_sigma must be finite, noise_sigma >= 0".into());
        }
        Ok(())
    }

    /// Block id of node `v`; the remainder of an uneven split goes to the last block.
    pub fn block_of(&self, v: usize) -> usize {
        let size = self.n_nodes / self.n_blocks;
        (v / size).min(self.n_blocks - 1)
    }
}

/// Generates an undirected SBM graph.
///
/// Block `b` has mean vector with ones on the dimensions `d` where
/// `d % n_blocks == b`; a node's features are `signal * mean + N(0, sigma)`.
/// Labels are block ids and the split is a seeded 10/10/80 shuffle.
pub fn sbm_generate(cfg: &SbmConfig) -> Result<Graph, GraphError> {
    cfg.validate()?;
    let n = cfg.n_nodes;
    let mut rng = stream_rng(cfg.seed, Stream::Sbm);
    let blocks: Vec<usize> = (0..n).map(|v| cfg.block_of(v)).collect();

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if blocks[u] == blocks[v] { cfg.p_in } else { cfg.p_out };
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }

    let noise = Normal::new(0.0, cfg.noise_sigma).expect("sigma validated");
    let mut features = Array2::zeros((n, cfg.feat_dim));
    for ((v, d), x) in features.indexed_iter_mut() {
        let mean = if d % cfg.n_blocks == blocks[v] { cfg.signal } else { 0.0 };
        *x = mean + noise.sample(&mut rng);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = n / 10;
    let n_val = n / 10;
    let mut split = vec![Split::Test; n];
    for (rank, &v) in order.iter().enumerate() {
        if rank < n_train {
            split[v] = Split::Train;
        } else if rank < n_train + n_val {
            split[v] = Split::Val;
        }
    }

    Graph::from_edges(features, &edges, false)?
        .with_labels(blocks)?
        .with_split(split)
}
