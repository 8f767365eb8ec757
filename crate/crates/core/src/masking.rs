//! Feature-dimension importance and the hierarchical masking schedule.
//!
//! Dimension importance is the node-score-weighted sum of absolute feature
//! values. Dimensions are masked least-important first, in rounds: each round
//! masks `floor(remaining * pf)` of the dimensions still unmasked, so the
//! schedule never masks every dimension.

use crate::centrality::NodeScores;
use crate::graph::Graph;
use ndarray::Array2;
use rand::seq::SliceRandom;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaskingError {
    #[error("node scores have length {got}, graph has {expected} nodes")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("masking rate pf={0} must lie strictly between 0 and 1")]
    RateOutOfRange(f64),
    #[error("need at least 2 feature dimensions, got {0}")]
    TooFewDimensions(usize),
    #[error("schedule exhausted: round {round} would mask zero dimensions (last feasible round {last_feasible})")]
    ScheduleExhausted { round: usize, last_feasible: usize },
    #[error("dimension index {index} out of range for {n_dims} dimensions")]
    IndexOutOfRange { index: usize, n_dims: usize },
    #[error("level {level} out of range 1..={max}")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("dimension order is not a permutation of 0..{0}")]
    InvalidOrder(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionScores {
    pub values: Vec<f64>,
}

/// `Sd_u = sum_v s_v * |X_vu|`.
pub fn dimension_importance(g: &Graph, s: &NodeScores) -> Result<DimensionScores, MaskingError> {
    if s.values.len() != g.n_nodes() {
        return Err(MaskingError::DimensionMismatch {
            got: s.values.len(),
            expected: g.n_nodes(),
        });
    }
    let mut values = vec![0.0; g.n_dims()];
    for (row, &sv) in g.features().rows().into_iter().zip(&s.values) {
        for (acc, x) in values.iter_mut().zip(row) {
            *acc += sv * x.abs();
        }
    }
    Ok(DimensionScores { values })
}

/// Dimension indices sorted by ascending score, ties by ascending index.
pub fn ascending_order(sd: &DimensionScores) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sd.values.len()).collect();
    order.sort_by(|&a, &b| sd.values[a].total_cmp(&sd.values[b]).then(a.cmp(&b)));
    order
}

/// Chooses the order in which dimensions get masked.
pub trait DimensionOrdering: Send + Sync {
    fn name(&self) -> &'static str;
    fn order(&self, sd: &DimensionScores, rng: &mut dyn rand::RngCore) -> Vec<usize>;
}

/// Least important dimension first.
pub struct AdaptiveOrdering;

/// Seeded uniform permutation, ignoring importance.
pub struct RandomOrdering;

impl DimensionOrdering for AdaptiveOrdering {
    fn name(&self) -> &'static str {
        "adaptive"
    }
    fn order(&self, sd: &DimensionScores, _: &mut dyn rand::RngCore) -> Vec<usize> {
        ascending_order(sd)
    }
}

impl DimensionOrdering for RandomOrdering {
    fn name(&self) -> &'static str {
        "random"
    }
    fn order(&self, sd: &DimensionScores, mut rng: &mut dyn rand::RngCore) -> Vec<usize> {
        let mut order: Vec<usize> = (0..sd.values.len()).collect();
        order.shuffle(&mut rng);
        order
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskSchedule {
    order: Vec<usize>,
    pf: f64,
    counts: Vec<usize>,
    cumulative_sizes: Vec<usize>,
}

// Guards floor() against products such as 0.29 * 100 = 28.999999999999996.
const FLOOR_SLACK: f64 = 1e-9;

fn masked_count(remaining: usize, pf: f64) -> usize {
    (remaining as f64 * pf + FLOOR_SLACK).floor() as usize
}

impl MaskSchedule {
    /// Builds a schedule over an explicit masking order.
    pub fn from_order(order: Vec<usize>, pf: f64, rounds: usize) -> Result<Self, MaskingError> {
        let f = order.len();
        if !(pf > 0.0 && pf < 1.0) {
            return Err(MaskingError::RateOutOfRange(pf));
        }
        if f < 2 {
            return Err(MaskingError::TooFewDimensions(f));
        }
        let mut seen = vec![false; f];
        for &d in &order {
            if d >= f || std::mem::replace(&mut seen[d], true) {
                return Err(MaskingError::InvalidOrder(f));
            }
        }
        let mut counts = Vec::with_capacity(rounds);
        let mut cumulative_sizes = Vec::with_capacity(rounds);
        let mut remaining = f;
        for round in 1..=rounds {
            let m = masked_count(remaining, pf);
            if m == 0 {
                return Err(MaskingError::ScheduleExhausted {
                    round,
                    last_feasible: round - 1,
                });
            }
            remaining -= m;
            counts.push(m);
            cumulative_sizes.push(f - remaining);
        }
        Ok(MaskSchedule {
            order,
            pf,
            counts,
            cumulative_sizes,
        })
    }

    /// A schedule with no masking rounds: every level is the original features.
    pub fn unmasked(n_dims: usize) -> Self {
        MaskSchedule {
            order: (0..n_dims).collect(),
            pf: 0.0,
            counts: Vec::new(),
            cumulative_sizes: Vec::new(),
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn pf(&self) -> f64 {
        self.pf
    }

    pub fn rounds(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn cumulative_sizes(&self) -> &[usize] {
        &self.cumulative_sizes
    }

    /// Dimensions masked after round `round` (1-based); round 0 is empty.
    pub fn cumulative(&self, round: usize) -> &[usize] {
        match round {
            0 => &[],
            r => &self.order[..self.cumulative_sizes[r - 1]],
        }
    }

    /// Dimensions newly masked in round `round` (1-based).
    pub fn round_dims(&self, round: usize) -> &[usize] {
        let start = if round <= 1 { 0 } else { self.cumulative_sizes[round - 2] };
        &self.order[start..self.cumulative_sizes[round - 1]]
    }

    /// Unmasked dimensions remaining after `round` rounds.
    pub fn remaining_after(&self, round: usize) -> usize {
        self.order.len() - self.cumulative(round).len()
    }

    pub fn max_level(&self) -> usize {
        self.rounds() + 1
    }
}

pub fn build_mask_schedule(
    sd: &DimensionScores,
    pf: f64,
    rounds: usize,
) -> Result<MaskSchedule, MaskingError> {
    MaskSchedule::from_order(ascending_order(sd), pf, rounds)
}

/// Zeroes the listed columns of every row.
pub fn apply_adaptive_mask(x: &Array2<f64>, dims: &[usize]) -> Result<Array2<f64>, MaskingError> {
    let mut out = x.clone();
    for &d in dims {
        if d >= x.ncols() {
            return Err(MaskingError::IndexOutOfRange {
                index: d,
                n_dims: x.ncols(),
            });
        }
        out.column_mut(d).fill(0.0);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalFeatures {
    pub level: usize,
    pub matrix: Array2<f64>,
}

/// Features at hierarchy level `level` (1-based; level 1 is the original matrix).
pub fn features_at_level(
    g: &Graph,
    sched: &MaskSchedule,
    level: usize,
) -> Result<HierarchicalFeatures, MaskingError> {
    if level == 0 || level > sched.max_level() {
        return Err(MaskingError::LevelOutOfRange {
            level,
            max: sched.max_level(),
        });
    }
    Ok(HierarchicalFeatures {
        level,
        matrix: apply_adaptive_mask(g.features(), sched.cumulative(level - 1))?,
    })
}
