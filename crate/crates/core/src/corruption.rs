//! Trainable node corruption: a Bernoulli subset of nodes receives a shared,
//! learned noise row.

use crate::autodiff::{AutodiffError, Matrix, Tape, Var};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::rc::Rc;

/// Resampling attempts before an all-clean mask is reported.
pub const MAX_RESAMPLES: usize = 100;

/// Standard deviation of the noise vector's initial values.
pub const NOISE_INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorruptionError {
    #[error("noisy rate pn={0} must lie in [0, 1]")]
    RateOutOfRange(f64),
    #[error("no noisy node drawn (pn={0}); training needs at least one")]
    AllClean(f64),
    #[error("mask has {mask} rows, features have {features}")]
    ShapeMismatch { mask: usize, features: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// `flags[v] == true` marks `v` as noisy: it receives noise, its hidden code
/// is zeroed before decoding, and it contributes to the loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMask {
    flags: Rc<[bool]>,
    count: usize,
}

impl NodeMask {
    pub fn from_flags(flags: Vec<bool>) -> Self {
        let count = flags.iter().filter(|&&f| f).count();
        NodeMask {
            flags: Rc::from(flags),
            count,
        }
    }

    pub fn all_clean(n: usize) -> Self {
        Self::from_flags(vec![false; n])
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub(crate) fn shared_flags(&self) -> Rc<[bool]> {
        self.flags.clone()
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    /// Number of noisy nodes.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_noisy(&self, v: usize) -> bool {
        self.flags[v]
    }

    pub fn noisy_nodes(&self) -> Vec<usize> {
        (0..self.flags.len()).filter(|&v| self.flags[v]).collect()
    }
}

/// Draws each node noisy with probability `pn`. A draw with no noisy node is
/// repeated up to [`MAX_RESAMPLES`] times when `pn > 0`; with `pn == 0` the
/// all-clean mask is returned as is.
pub fn sample_node_mask<R: Rng + ?Sized>(n: usize, pn: f64, rng: &mut R) -> Result<NodeMask, CorruptionError> {
    if !(0.0..=1.0).contains(&pn) {
        return Err(CorruptionError::RateOutOfRange(pn));
    }
    if pn == 0.0 {
        return Ok(NodeMask::all_clean(n));
    }
    for _ in 0..MAX_RESAMPLES {
        let flags: Vec<bool> = (0..n).map(|_| rng.random_bool(pn)).collect();
        if flags.iter().any(|&f| f) {
            return Ok(NodeMask::from_flags(flags));
        }
    }
    Err(CorruptionError::AllClean(pn))
}

/// The shared learned noise row, `1 x F`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVector {
    pub w: Matrix,
}

impl NoiseVector {
    pub fn init<R: Rng + ?Sized>(n_dims: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, NOISE_INIT_STD).expect("positive std");
        NoiseVector {
            w: Matrix::from_shape_fn((1, n_dims), |_| normal.sample(rng)),
        }
    }

    pub fn zeros(n_dims: usize) -> Self {
        NoiseVector {
            w: Matrix::zeros((1, n_dims)),
        }
    }
}

/// Records `X~ = X + mask * w` on the tape; clean rows are copied bitwise.
pub fn apply_corruption(tape: &mut Tape, x: Var, mask: &NodeMask, w: Var) -> Result<Var, CorruptionError> {
    let rows = tape.value(x).nrows();
    if rows != mask.len() {
        return Err(CorruptionError::ShapeMismatch {
            mask: mask.len(),
            features: rows,
        });
    }
    Ok(tape.masked_row_add(x, w, mask.shared_flags())?)
}

/// Off-tape version of [`apply_corruption`].
pub fn corrupt_values(x: &Matrix, mask: &NodeMask, w: &NoiseVector) -> Result<Matrix, CorruptionError> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone())?;
    let wv = tape.constant(w.w.clone())?;
    let out = apply_corruption(&mut tape, xv, mask, wv)?;
    Ok(tape.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use ndarray::array;

    #[test]
    fn extreme_rates() {
        let mut rng = stream_rng(1, Stream::NodeMask);
        let clean = sample_node_mask(10, 0.0, &mut rng).unwrap();
        assert_eq!(clean.count(), 0);
        let all = sample_node_mask(10, 1.0, &mut rng).unwrap();
        assert_eq!(all.count(), 10);
        assert!(matches!(sample_node_mask(10, 1.5, &mut rng), Err(CorruptionError::RateOutOfRange(_))));
    }

    #[test]
    fn half_rate_concentrates() {
        // binomial: count/N within 0.5 +- 3 sqrt(0.25/N)
        let n = 10_000;
        let band = 3.0 * (0.25 / n as f64).sqrt();
        for seed in 0..5 {
            let m = sample_node_mask(n, 0.5, &mut stream_rng(seed, Stream::NodeMask)).unwrap();
            let frac = m.count() as f64 / n as f64;
            assert!((frac - 0.5).abs() <= band, "seed {seed}: {frac}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sample_node_mask(50, 0.3, &mut stream_rng(9, Stream::NodeMask)).unwrap();
        let b = sample_node_mask(50, 0.3, &mut stream_rng(9, Stream::NodeMask)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_rate_on_one_node_is_all_clean() {
        let mut rng = stream_rng(0, Stream::NodeMask);
        assert_eq!(sample_node_mask(1, 1e-12, &mut rng).unwrap_err(), CorruptionError::AllClean(1e-12));
    }

    #[test]
    fn corruption_examples() {
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let w = NoiseVector { w: array![[0.5, -0.5]] };
        let mask = NodeMask::from_flags(vec![true, false]);
        assert_eq!(corrupt_values(&x, &mask, &w).unwrap(), array![[1.5, -0.5], [0.0, 1.0]]);
        assert_eq!(corrupt_values(&x, &NodeMask::all_clean(2), &w).unwrap(), x);
        assert_eq!(corrupt_values(&x, &mask, &NoiseVector::zeros(2)).unwrap(), x);
        assert!(matches!(
            corrupt_values(&x, &NodeMask::all_clean(3), &w),
            Err(CorruptionError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn gradient_reaches_the_noise_vector() {
        let mut tape = Tape::new();
        let x = tape.constant(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let w = tape.param("noise", array![[0.0, 0.0]]).unwrap();
        let mask = NodeMask::from_flags(vec![true, false, true]);
        let y = apply_corruption(&mut tape, x, &mask, w).unwrap();
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get("noise").unwrap(), &array![[2.0, 2.0]]);
    }

    #[test]
    fn init_is_small() {
        let w = NoiseVector::init(1000, &mut stream_rng(3, Stream::Init));
        let std = (w.w.iter().map(|x| x * x).sum::<f64>() / 1000.0).sqrt();
        assert!((std - NOISE_INIT_STD).abs() < 0.003, "{std}");
    }
}
