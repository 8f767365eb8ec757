//! Immutable graph storage.
//!
//! Edges are held in compressed sparse row form in both directions so that
//! in-degree lookups and neighbour aggregation are both O(1) per node. Node
//! features live in a dense `N x F` matrix.

mod bundle;
mod sbm;

pub use bundle::{load_graph_bundle, save_graph_bundle};
pub use sbm::{sbm_generate, SbmConfig};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("node id {id} out of range for {n_nodes} nodes")]
    NodeOutOfRange { id: usize, n_nodes: usize },
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("feature row {row} has {got} columns, expected {expected}")]
    RaggedFeatures {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite feature value at ({row}, {col})")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("invalid SBM configuration: {0}")]
    InvalidSbm(String),
    #[error("graph has no nodes")]
    Empty,
}

/// Node partition used by the evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split tag {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Csr {
    /// Builds from `(row, col)` pairs that are already sorted and unique.
    fn from_sorted(n: usize, pairs: impl Iterator<Item = (usize, usize)>) -> Self {
        let mut offsets = vec![0usize; n + 1];
        let mut targets = Vec::new();
        for (r, c) in pairs {
            offsets[r + 1] += 1;
            targets.push(c);
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Csr { offsets, targets }
    }

    fn row(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// A directed or undirected graph with dense node features.
///
/// Undirected graphs store every edge in both directions. Self-loops, when
/// present, are stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    out: Csr,
    inc: Csr,
    directed: bool,
    features: Array2<f64>,
    labels: Option<Vec<usize>>,
    split: Option<Vec<Split>>,
}

impl Graph {
    /// Builds a graph from an edge list. For undirected graphs `(u, v)` and
    /// `(v, u)` denote the same edge, so listing both is a duplicate.
    pub fn from_edges(
        features: Array2<f64>,
        edges: &[(usize, usize)],
        directed: bool,
    ) -> Result<Self, GraphError> {
        let n = features.nrows();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        for ((row, col), x) in features.indexed_iter() {
            if !x.is_finite() {
                return Err(GraphError::NonFiniteFeature { row, col });
            }
        }
        let mut canonical = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            for id in [u, v] {
                if id >= n {
                    return Err(GraphError::NodeOutOfRange { id, n_nodes: n });
                }
            }
            canonical.push(if directed { (u, v) } else { (u.min(v), u.max(v)) });
        }
        canonical.sort_unstable();
        if let Some(w) = canonical.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }

        let mut stored = canonical.clone();
        if !directed {
            stored.extend(canonical.iter().filter(|(u, v)| u != v).map(|&(u, v)| (v, u)));
            stored.sort_unstable();
        }
        let out = Csr::from_sorted(n, stored.iter().copied());
        let mut reversed: Vec<(usize, usize)> = stored.iter().map(|&(u, v)| (v, u)).collect();
        reversed.sort_unstable();
        let inc = Csr::from_sorted(n, reversed.into_iter());

        Ok(Graph {
            out,
            inc,
            directed,
            features,
            labels: None,
            split: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self, GraphError> {
        if labels.len() != self.n_nodes() {
            return Err(GraphError::LengthMismatch {
                what: "labels",
                got: labels.len(),
                expected: self.n_nodes(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_split(mut self, split: Vec<Split>) -> Result<Self, GraphError> {
        if split.len() != self.n_nodes() {
            return Err(GraphError::LengthMismatch {
                what: "split",
                got: split.len(),
                expected: self.n_nodes(),
            });
        }
        self.split = Some(split);
        Ok(self)
    }

    pub fn n_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.features.ncols()
    }

    /// Number of stored directed edges (an undirected edge counts twice
    /// unless it is a self-loop).
    pub fn n_edges(&self) -> usize {
        self.out.targets.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn split(&self) -> Option<&[Split]> {
        self.split.as_deref()
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    pub fn out_offsets(&self) -> &[usize] {
        &self.out.offsets
    }

    pub fn out_targets(&self) -> &[usize] {
        &self.out.targets
    }

    pub fn in_offsets(&self) -> &[usize] {
        &self.inc.offsets
    }

    pub fn in_targets(&self) -> &[usize] {
        &self.inc.targets
    }

    /// Sorted successors of `v`. Panics if `v >= N`; see [`Graph::try_neighbors_out`].
    pub fn neighbors_out(&self, v: usize) -> &[usize] {
        self.out.row(v)
    }

    /// Sorted predecessors of `v`.
    pub fn neighbors_in(&self, v: usize) -> &[usize] {
        self.inc.row(v)
    }

    pub fn try_neighbors_out(&self, v: usize) -> Result<&[usize], GraphError> {
        self.check_node(v)?;
        Ok(self.out.row(v))
    }

    pub fn try_neighbors_in(&self, v: usize) -> Result<&[usize], GraphError> {
        self.check_node(v)?;
        Ok(self.inc.row(v))
    }

    fn check_node(&self, v: usize) -> Result<(), GraphError> {
        if v >= self.n_nodes() {
            return Err(GraphError::NodeOutOfRange {
                id: v,
                n_nodes: self.n_nodes(),
            });
        }
        Ok(())
    }

    pub fn in_degree(&self) -> Vec<usize> {
        self.inc.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn out_degree(&self) -> Vec<usize> {
        self.out.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n_nodes() && self.out.row(u).binary_search(&v).is_ok()
    }

    /// All stored directed edges in sorted `(u, v)` order.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_nodes()).flat_map(move |u| self.out.row(u).iter().map(move |&v| (u, v)))
    }

    /// The edge list as it would be written to disk: every stored edge for
    /// directed graphs, each undirected edge once with `u <= v` otherwise.
    pub fn canonical_edges(&self) -> Vec<(usize, usize)> {
        self.directed_edges()
            .filter(|&(u, v)| self.directed || u <= v)
            .collect()
    }

    /// Returns a copy in which every node has exactly one self-loop.
    pub fn with_self_loops(&self) -> Graph {
        let mut edges = self.canonical_edges();
        edges.extend((0..self.n_nodes()).filter(|&v| !self.has_edge(v, v)).map(|v| (v, v)));
        let mut g = Graph::from_edges(self.features.clone(), &edges, self.directed)
            .expect("adding missing self-loops keeps a valid graph valid");
        g.labels = self.labels.clone();
        g.split = self.split.clone();
        g
    }

    /// Returns the same graph with `features` swapped in.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Graph, GraphError> {
        if features.nrows() != self.n_nodes() {
            return Err(GraphError::LengthMismatch {
                what: "feature rows",
                got: features.nrows(),
                expected: self.n_nodes(),
            });
        }
        let mut g = Graph::from_edges(features, &self.canonical_edges(), self.directed)?;
        g.labels = self.labels.clone();
        g.split = self.split.clone();
        Ok(g)
    }

    /// Relabels nodes so that old node `v` becomes `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph, GraphError> {
        let n = self.n_nodes();
        if perm.len() != n {
            return Err(GraphError::LengthMismatch {
                what: "permutation",
                got: perm.len(),
                expected: n,
            });
        }
        let mut features = Array2::zeros(self.features.raw_dim());
        for v in 0..n {
            features.row_mut(perm[v]).assign(&self.features.row(v));
        }
        let edges: Vec<_> = self
            .canonical_edges()
            .into_iter()
            .map(|(u, v)| (perm[u], perm[v]))
            .collect();
        let mut g = Graph::from_edges(features, &edges, self.directed)?;
        if let Some(labels) = &self.labels {
            let mut l = vec![0; n];
            for v in 0..n {
                l[perm[v]] = labels[v];
            }
            g.labels = Some(l);
        }
        if let Some(split) = &self.split {
            let mut s = vec![Split::Train; n];
            for v in 0..n {
                s[perm[v]] = split[v];
            }
            g.split = Some(s);
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn feats(n: usize) -> Array2<f64> {
        Array2::eye(n)
    }

    #[test]
    fn undirected_edge_is_symmetrized() {
        let g = Graph::from_edges(feats(2), &[(0, 1)], false).unwrap();
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.in_degree(), vec![1, 1]);
        assert_eq!(g.out_degree(), vec![1, 1]);
    }

    #[test]
    fn directed_in_degree_counts_columns() {
        let g = Graph::from_edges(feats(3), &[(0, 1), (0, 2), (1, 2)], true).unwrap();
        assert_eq!(g.in_degree(), vec![0, 1, 2]);
        let empty = Graph::from_edges(feats(3), &[], true).unwrap();
        assert_eq!(empty.in_degree(), vec![0, 0, 0]);
        let cycle = Graph::from_edges(feats(3), &[(0, 1), (1, 2), (2, 0)], true).unwrap();
        assert_eq!(cycle.in_degree(), vec![1, 1, 1]);
    }

    #[test]
    fn duplicates_are_rejected() {
        let err = Graph::from_edges(feats(2), &[(0, 1), (0, 1)], true).unwrap_err();
        assert!(matches!(err, GraphError::DuplicateEdge(0, 1)));
        let err = Graph::from_edges(feats(2), &[(0, 1), (1, 0)], false).unwrap_err();
        assert!(matches!(err, GraphError::DuplicateEdge(0, 1)));
        // both directions are distinct edges in a directed graph
        assert!(Graph::from_edges(feats(2), &[(0, 1), (1, 0)], true).is_ok());
    }

    #[test]
    fn out_of_range_and_non_finite() {
        assert!(matches!(
            Graph::from_edges(feats(2), &[(0, 2)], true),
            Err(GraphError::NodeOutOfRange { id: 2, n_nodes: 2 })
        ));
        let bad = array![[1.0, f64::NAN]];
        assert!(matches!(
            Graph::from_edges(bad, &[], true),
            Err(GraphError::NonFiniteFeature { row: 0, col: 1 })
        ));
    }

    #[test]
    fn neighbor_lists() {
        let cycle = Graph::from_edges(feats(3), &[(0, 1), (1, 2), (2, 0)], true).unwrap();
        assert_eq!(cycle.neighbors_out(0), &[1]);
        assert_eq!(cycle.neighbors_in(0), &[2]);
        let isolated = Graph::from_edges(feats(3), &[(0, 1)], false).unwrap();
        assert!(isolated.neighbors_out(2).is_empty());
        let star =
            Graph::from_edges(feats(5), &[(0, 3), (0, 1), (4, 0), (0, 2)], false).unwrap();
        assert_eq!(star.neighbors_out(0), &[1, 2, 3, 4]);
        assert!(matches!(
            star.try_neighbors_out(5),
            Err(GraphError::NodeOutOfRange { .. })
        ));
    }

    #[test]
    fn self_loops_added_once() {
        let g = Graph::from_edges(feats(2), &[], false).unwrap().with_self_loops();
        assert_eq!(g.canonical_edges(), vec![(0, 0), (1, 1)]);

        let g = Graph::from_edges(feats(2), &[(0, 0), (0, 1)], false).unwrap();
        let looped = g.with_self_loops();
        assert_eq!(looped.neighbors_out(0), &[0, 1]);
        assert_eq!(looped, looped.with_self_loops());

        let cycle = Graph::from_edges(feats(3), &[(0, 1), (1, 2), (2, 0)], true).unwrap();
        assert_eq!(cycle.with_self_loops().n_edges(), 6);
    }

    #[test]
    fn csr_invariants_hold() {
        let g = Graph::from_edges(feats(5), &[(0, 1), (1, 2), (3, 3), (4, 0), (2, 4)], false)
            .unwrap();
        for offs in [g.out_offsets(), g.in_offsets()] {
            assert!(offs.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*offs.last().unwrap(), g.n_edges());
        }
        assert_eq!(g.in_degree(), g.out_degree());
        let mut a: Vec<_> = g.directed_edges().collect();
        let mut b: Vec<_> = (0..5)
            .flat_map(|v| g.neighbors_in(v).iter().map(move |&u| (u, v)))
            .collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn permutation_relabels_everything() {
        let g = Graph::from_edges(feats(3), &[(0, 1), (1, 2)], true)
            .unwrap()
            .with_labels(vec![0, 1, 2])
            .unwrap();
        let p = g.permute(&[2, 0, 1]).unwrap();
        assert!(p.has_edge(2, 0));
        assert!(p.has_edge(0, 1));
        assert_eq!(p.labels().unwrap(), &[1, 2, 0]);
        assert_eq!(p.features().row(2), g.features().row(0));
    }
}
