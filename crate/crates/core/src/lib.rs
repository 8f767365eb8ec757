//! Self-supervised graph auto-encoder with hierarchical adaptive feature
//! masking and trainable node corruption.
//!
//! The pipeline, per training epoch:
//!
//! 1. score nodes ([`centrality`]) and feature dimensions ([`masking`]) once,
//!    then mask the least important dimensions in growing rounds;
//! 2. add a learned noise row to a Bernoulli subset of nodes ([`corruption`]);
//! 3. encode with a two-layer multi-head GAT, zero the hidden codes of the
//!    noisy nodes and decode back to feature space ([`gat`]);
//! 4. minimise the squared cosine error on the noisy nodes with Adam
//!    ([`training`]).
//!
//! Frozen encoder outputs are scored with a linear probe ([`eval`]).

pub mod autodiff;
pub mod centrality;
pub mod corruption;
pub mod eval;
pub mod gat;
pub mod graph;
pub mod masking;
pub mod rng;
pub mod training;
