//! Node importance scores: in-degree, eigenvector centrality and PageRank.
//!
//! Each scorer implements [`NodeScorer`] and is looked up by name through a
//! [`ScorerRegistry`], which is how the training configuration and the CLI
//! select one at runtime.

use crate::graph::Graph;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CentralityError {
    #[error("power iteration did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("iterate collapsed to the zero vector")]
    ZeroVector,
    #[error("invalid power-iteration config: {0}")]
    InvalidConfig(String),
    #[error("unknown centrality method {0:?}")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentralityMethod {
    #[default]
    InDegree,
    Eigenvector,
    PageRank,
}

impl CentralityMethod {
    pub fn name(self) -> &'static str {
        match self {
            CentralityMethod::InDegree => "indegree",
            CentralityMethod::Eigenvector => "eigenvector",
            CentralityMethod::PageRank => "pagerank",
        }
    }
}

impl fmt::Display for CentralityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CentralityMethod {
    type Err = CentralityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "indegree" | "in_degree" | "in-degree" => Ok(CentralityMethod::InDegree),
            "eigenvector" => Ok(CentralityMethod::Eigenvector),
            "pagerank" => Ok(CentralityMethod::PageRank),
            _ => Err(CentralityError::UnknownMethod(s.to_string())),
        }
    }
}

/// Per-node importance. Eigenvector and PageRank values sum to one; in-degree
/// values are raw counts.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeScores {
    pub values: Vec<f64>,
    pub method: CentralityMethod,
    /// Dominant eigenvalue estimate, eigenvector centrality only.
    pub eigenvalue: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIterConfig {
    /// Stop when the L1 change between normalized iterates drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// PageRank damping factor.
    pub alpha: f64,
}

impl Default for PowerIterConfig {
    fn default() -> Self {
        PowerIterConfig {
            tol: 1e-10,
            max_iter: 10_000,
            alpha: 0.85,
        }
    }
}

impl PowerIterConfig {
    pub fn validate(&self) -> Result<(), CentralityError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CentralityError::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(CentralityError::InvalidConfig(
                "tol must be positive and max_iter at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub trait NodeScorer: Send + Sync {
    fn method(&self) -> CentralityMethod;
    fn score(&self, g: &Graph, cfg: &PowerIterConfig) -> Result<NodeScores, CentralityError>;
}

pub struct InDegreeScorer;
pub struct EigenvectorScorer;
pub struct PageRankScorer;

impl NodeScorer for InDegreeScorer {
    fn method(&self) -> CentralityMethod {
        CentralityMethod::InDegree
    }
    fn score(&self, g: &Graph, _: &PowerIterConfig) -> Result<NodeScores, CentralityError> {
        Ok(indegree_scores(g))
    }
}

impl NodeScorer for EigenvectorScorer {
    fn method(&self) -> CentralityMethod {
        CentralityMethod::Eigenvector
    }
    fn score(&self, g: &Graph, cfg: &PowerIterConfig) -> Result<NodeScores, CentralityError> {
        eigenvector_scores(g, cfg).map(|(s, _)| s)
    }
}

impl NodeScorer for PageRankScorer {
    fn method(&self) -> CentralityMethod {
        CentralityMethod::PageRank
    }
    fn score(&self, g: &Graph, cfg: &PowerIterConfig) -> Result<NodeScores, CentralityError> {
        pagerank_scores(g, cfg)
    }
}

/// Name-keyed collection of scorers.
pub struct ScorerRegistry {
    scorers: BTreeMap<String, Box<dyn NodeScorer>>,
}

impl ScorerRegistry {
    pub fn empty() -> Self {
        ScorerRegistry {
            scorers: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(InDegreeScorer));
        r.register(Box::new(EigenvectorScorer));
        r.register(Box::new(PageRankScorer));
        r
    }

    pub fn register(&mut self, scorer: Box<dyn NodeScorer>) {
        self.scorers.insert(scorer.method().name().to_string(), scorer);
    }

    pub fn get(&self, name: &str) -> Result<&dyn NodeScorer, CentralityError> {
        let key = name
            .parse::<CentralityMethod>()
            .map(|m| m.name().to_string())
            .unwrap_or_else(|_| name.to_string());
        self.scorers
            .get(&key)
            .map(|b| b.as_ref())
            .ok_or_else(|| CentralityError::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.scorers.keys().map(String::as_str)
    }
}

impl Default for ScorerRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

pub fn indegree_scores(g: &Graph) -> NodeScores {
    NodeScores {
        values: g.in_degree().into_iter().map(|d| d as f64).collect(),
        method: CentralityMethod::InDegree,
        eigenvalue: None,
    }
}

fn l1_normalize(x: &mut [f64]) -> f64 {
    let s: f64 = x.iter().map(|v| v.abs()).sum();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
    s
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `y_v = sum_u A_vu x_u`, i.e. aggregation over the out-neighbours of `v`.
fn adjacency_apply(g: &Graph, x: &[f64]) -> Vec<f64> {
    (0..g.n_nodes())
        .map(|v| g.neighbors_out(v).iter().map(|&u| x[u]).sum())
        .collect()
}

/// Eigenvector centrality by power iteration on `A + I`.
///
/// The identity shift keeps the dominant eigenvector of `A` but removes the
/// period-2 oscillation that plain iteration shows on bipartite graphs.
/// Returns the L1-normalized scores and the Rayleigh-quotient eigenvalue of `A`.
pub fn eigenvector_scores(
    g: &Graph,
    cfg: &PowerIterConfig,
) -> Result<(NodeScores, f64), CentralityError> {
    cfg.validate()?;
    let n = g.n_nodes();
    if g.n_edges() == 0 {
        return Err(CentralityError::ZeroVector);
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let ax = adjacency_apply(g, &x);
        if ax.iter().all(|&v| v == 0.0) {
            return Err(CentralityError::ZeroVector);
        }
        let mut next: Vec<f64> = ax.iter().zip(&x).map(|(a, b)| a + b).collect();
        l1_normalize(&mut next);
        let diff = l1_distance(&next, &x);
        x = next;
        if diff < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CentralityError::NonConvergence(cfg.max_iter));
    }
    let ax = adjacency_apply(g, &x);
    if ax.iter().all(|&v| v == 0.0) {
        return Err(CentralityError::ZeroVector);
    }
    let num: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
    let den: f64 = x.iter().map(|a| a * a).sum();
    let lambda = num / den;
    Ok((
        NodeScores {
            values: x,
            method: CentralityMethod::Eigenvector,
            eigenvalue: Some(lambda),
        },
        lambda,
    ))
}

/// PageRank with uniform redistribution of dangling-node mass.
pub fn pagerank_scores(g: &Graph, cfg: &PowerIterConfig) -> Result<NodeScores, CentralityError> {
    cfg.validate()?;
    let n = g.n_nodes();
    let nf = n as f64;
    let out_deg = g.out_degree();
    let alpha = cfg.alpha;
    let mut x = vec![1.0 / nf; n];
    for _ in 0..cfg.max_iter {
        let dangling: f64 = (0..n).filter(|&u| out_deg[u] == 0).map(|u| x[u]).sum();
        let base = alpha * dangling / nf + (1.0 - alpha) / nf;
        let mut next: Vec<f64> = (0..n)
            .map(|v| {
                let inflow: f64 = g
                    .neighbors_in(v)
                    .iter()
                    .map(|&u| x[u] / out_deg[u] as f64)
                    .sum();
                alpha * inflow + base
            })
            .collect();
        l1_normalize(&mut next);
        let diff = l1_distance(&next, &x);
        x = next;
        if diff < cfg.tol {
            return Ok(NodeScores {
                values: x,
                method: CentralityMethod::PageRank,
                eigenvalue: None,
            });
        }
    }
    Err(CentralityError::NonConvergence(cfg.max_iter))
}

/// Scores `g` with the named default scorer.
pub fn node_scores(
    g: &Graph,
    method: CentralityMethod,
    cfg: &PowerIterConfig,
) -> Result<NodeScores, CentralityError> {
    ScorerRegistry::with_defaults().get(method.name())?.score(g, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn graph(n: usize, edges: &[(usize, usize)], directed: bool) -> Graph {
        Graph::from_edges(Array2::zeros((n, 1)), edges, directed).unwrap()
    }

    fn triangle() -> Graph {
        graph(3, &[(0, 1), (1, 2), (0, 2)], false)
    }

    fn cycle3() -> Graph {
        graph(3, &[(0, 1), (1, 2), (2, 0)], true)
    }

    #[test]
    fn indegree_examples() {
        assert_eq!(indegree_scores(&graph(3, &[(0, 1), (0, 2), (1, 2)], true)).values, vec![0.0, 1.0, 2.0]);
        assert_eq!(indegree_scores(&triangle()).values, vec![2.0, 2.0, 2.0]);
        assert_eq!(indegree_scores(&graph(1, &[], false)).values, vec![0.0]);
    }

    #[test]
    fn eigenvector_on_k3() {
        let (s, lambda) = eigenvector_scores(&triangle(), &PowerIterConfig::default()).unwrap();
        for v in s.values {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(lambda, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvector_on_path_is_one_sqrt2_one() {
        let (s, lambda) =
            eigenvector_scores(&graph(3, &[(0, 1), (1, 2)], false), &PowerIterConfig::default())
                .unwrap();
        let z = 2.0 + 2f64.sqrt();
        let expected = [1.0 / z, 2f64.sqrt() / z, 1.0 / z];
        for (a, b) in s.values.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(lambda, 2f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn eigenvector_reports_non_convergence() {
        let cfg = PowerIterConfig { max_iter: 2, ..Default::default() };
        let path = graph(4, &[(0, 1), (1, 2), (2, 3)], false);
        assert_eq!(eigenvector_scores(&path, &cfg).unwrap_err(), CentralityError::NonConvergence(2));
    }

    #[test]
    fn eigenvector_zero_vector_cases() {
        let cfg = PowerIterConfig::default();
        assert_eq!(eigenvector_scores(&graph(3, &[], false), &cfg).unwrap_err(), CentralityError::ZeroVector);
        // a single directed edge 0 -> 1: A x has support on node 0 only, then
        // A applied to a vector supported on 0 is zero
        let dag = graph(2, &[(0, 1)], true);
        let short = PowerIterConfig { max_iter: 50, ..cfg };
        assert!(eigenvector_scores(&dag, &short).is_err());
    }

    #[test]
    fn pagerank_symmetric_examples() {
        let cfg = PowerIterConfig::default();
        for v in pagerank_scores(&cycle3(), &cfg).unwrap().values {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        }
        let two = graph(2, &[(0, 1), (1, 0)], true);
        for v in pagerank_scores(&two, &cfg).unwrap().values {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn pagerank_chain_with_dangling_node() {
        // dense oracle s = (1-a)/n (I - a P)^-1 e, solved by hand for the
        // chain 0 -> 1 -> 2 with node 2 dangling (uniform column):
        //   s0 = c + a s2/3, s1 = c + a s0 + a s2/3, s2 = c + a s1 + a s2/3
        // with c = (1-a)/3; eliminating gives the values below
        let a: f64 = 0.85;
        let c = (1.0 - a) / 3.0;
        let k = a / 3.0;
        // s0 = c + k s2; s1 = c + a s0 + k s2; s2 = c + a s1 + k s2
        // => s2 (1 - k - a k - a^2 k) = c (1 + a + a^2)
        let s2 = c * (1.0 + a + a * a) / (1.0 - k - a * k - a * a * k);
        let s0 = c + k * s2;
        let s1 = c + a * s0 + k * s2;
        let s = pagerank_scores(&graph(3, &[(0, 1), (1, 2)], true), &PowerIterConfig::default())
            .unwrap();
        for (x, y) in s.values.iter().zip([s0, s1, s2]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(s.values.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dispatcher_and_registry() {
        let cfg = PowerIterConfig::default();
        assert_eq!(node_scores(&cycle3(), CentralityMethod::InDegree, &cfg).unwrap().values, vec![1.0; 3]);
        for v in node_scores(&cycle3(), CentralityMethod::PageRank, &cfg).unwrap().values {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        }
        for v in node_scores(&triangle(), CentralityMethod::Eigenvector, &cfg).unwrap().values {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        }
        let reg = ScorerRegistry::with_defaults();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["eigenvector", "indegree", "pagerank"]);
        assert!(reg.get("in-degree").is_ok());
        assert!(matches!(reg.get("katz"), Err(CentralityError::UnknownMethod(_))));
    }

    #[test]
    fn config_validation() {
        let bad = PowerIterConfig { alpha: 1.0, ..Default::default() };
        assert!(matches!(pagerank_scores(&cycle3(), &bad), Err(CentralityError::InvalidConfig(_))));
    }
}
