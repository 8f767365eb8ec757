//! Dense reverse-mode differentiation over `f64` matrices.
//!
//! Sparse graph structure enters only through row gathers and scatters keyed
//! by CSR index arrays; everything else is dense.

mod gradcheck;
pub mod opcheck;
mod params;
mod tape;

pub use gradcheck::{grad_check, grad_check_subset, relative_error, GradCheckReport};
pub use params::ParamStore;
pub use tape::{AutodiffError, Gradients, Matrix, Tape, Var, COSINE_EPS};

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use std::rc::Rc;

    #[test]
    fn sum_gradient_is_all_ones() {
        let mut t = Tape::new();
        let x = t.param("x", Matrix::from_elem((2, 3), 0.7)).unwrap();
        let s = t.sum(x).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get("x").unwrap(), &Matrix::ones((2, 3)));
    }

    #[test]
    fn square_gradient_is_two_x() {
        let mut t = Tape::new();
        let x = t.param("x", array![[1.0, 2.0]]).unwrap();
        let sq = t.square(x).unwrap();
        let s = t.sum(sq).unwrap();
        assert_eq!(t.backward(s).unwrap().get("x").unwrap(), &array![[2.0, 4.0]]);
    }

    #[test]
    fn cosine_gradient_vanishes_on_the_ray() {
        // oracle: central differences of cos(a, b) at a = b = [3, 4]
        let cos = |a: [f64; 2], b: [f64; 2]| {
            let dot = a[0] * b[0] + a[1] * b[1];
            dot / ((a[0] * a[0] + a[1] * a[1]).sqrt() * (b[0] * b[0] + b[1] * b[1]).sqrt())
        };
        let h = 1e-6;
        let fd = [
            (cos([3.0 + h, 4.0], [3.0, 4.0]) - cos([3.0 - h, 4.0], [3.0, 4.0])) / (2.0 * h),
            (cos([3.0, 4.0 + h], [3.0, 4.0]) - cos([3.0, 4.0 - h], [3.0, 4.0])) / (2.0 * h),
        ];
        assert!(fd.iter().all(|d| d.abs() < 1e-9));

        let mut t = Tape::new();
        let a = t.param("a", array![[3.0, 4.0]]).unwrap();
        let b = t.constant(array![[3.0, 4.0]]).unwrap();
        let c = t.row_cosine(a, b).unwrap();
        let s = t.sum(c).unwrap();
        assert!((t.scalar(s) - 1.0).abs() < 1e-15);
        let g = t.backward(s).unwrap();
        for (x, y) in g.get("a").unwrap().iter().zip(fd) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn cosine_with_zero_row_is_zero_without_gradient() {
        let mut t = Tape::new();
        let a = t.param("a", array![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let b = t.constant(array![[1.0, 1.0], [0.0, 1.0]]).unwrap();
        let c = t.row_cosine(a, b).unwrap();
        assert_eq!(t.value(c), &array![[0.0], [0.0]]);
        let s = t.sum(c).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get("a").unwrap().row(0).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn backward_requires_scalar_on_tape() {
        let mut t = Tape::new();
        let x = t.param("x", Matrix::ones((2, 2))).unwrap();
        assert_eq!(t.backward(x).unwrap_err(), AutodiffError::NotScalar((2, 2)));
        let other = Tape::new();
        assert!(matches!(other.backward(x), Err(AutodiffError::UnknownVar(_))));
    }

    #[test]
    fn non_finite_values_trip_the_check() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::from_elem((1, 1), f64::MAX)).unwrap();
        assert_eq!(t.scale(x, 10.0).unwrap_err(), AutodiffError::NonFinite("scale"));
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::ones((2, 3))).unwrap();
        let b = t.constant(Matrix::ones((2, 2))).unwrap();
        assert!(matches!(t.matmul(a, a), Err(AutodiffError::ShapeMismatch { op: "matmul", .. })));
        assert!(matches!(t.add(a, b), Err(AutodiffError::ShapeMismatch { op: "add", .. })));
        assert!(matches!(t.gather_rows(a, Rc::from(vec![5])), Err(AutodiffError::IndexOutOfRange { .. })));
    }

    #[test]
    fn constants_get_no_gradient_entry() {
        let mut t = Tape::new();
        let x = t.param("x", Matrix::ones((1, 2))).unwrap();
        let unused = t.param("unused", Matrix::ones((1, 2))).unwrap();
        let c = t.constant(Matrix::ones((1, 2))).unwrap();
        let y = t.mul(x, c).unwrap();
        let s = t.sum(y).unwrap();
        let g = t.backward(s).unwrap();
        assert!(g.contains("x"));
        assert!(!g.contains("unused"));
        assert!(g.wrt(c).is_none());
        let _ = unused;
    }

    #[test]
    fn detach_stops_gradient() {
        let mut t = Tape::new();
        let x = t.param("x", array![[2.0]]).unwrap();
        let d = t.detach(x).unwrap();
        let y = t.mul(x, d).unwrap();
        let s = t.sum(y).unwrap();
        // d/dx (x * stop(x)) = stop(x) = 2
        assert_eq!(t.backward(s).unwrap().get("x").unwrap(), &array![[2.0]]);
    }

    #[test]
    fn masked_row_add_leaves_clean_rows_bitwise() {
        let mut t = Tape::new();
        let x = t.constant(array![[-0.0, 1.0], [0.0, 1.0]]).unwrap();
        let w = t.param("w", array![[0.5, -0.5]]).unwrap();
        let y = t.masked_row_add(x, w, Rc::from(vec![false, true])).unwrap();
        assert_eq!(t.value(y)[[0, 0]].to_bits(), (-0.0f64).to_bits());
        assert_eq!(t.value(y).row(1).to_vec(), vec![0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn segment_softmax_normalizes_and_is_shift_invariant(
            logits in prop::collection::vec(-30.0f64..30.0, 1..24),
            cuts in prop::collection::vec(0usize..24, 0..5),
            shift in -100.0f64..100.0,
        ) {
            let e = logits.len();
            let mut offsets: Vec<usize> = cuts.into_iter().map(|c| c % (e + 1)).collect();
            offsets.push(0);
            offsets.push(e);
            offsets.sort_unstable();
            let offsets: Rc<[usize]> = Rc::from(offsets);

            let mut t = Tape::new();
            let x = t.constant(Matrix::from_shape_vec((e, 1), logits.clone()).unwrap()).unwrap();
            let y = t.segment_softmax(x, offsets.clone()).unwrap();
            let shifted = t.add_scalar(x, shift).unwrap();
            let y2 = t.segment_softmax(shifted, offsets.clone()).unwrap();
            for w in offsets.windows(2).filter(|w| w[0] < w[1]) {
                let total: f64 = (w[0]..w[1]).map(|i| t.value(y)[[i, 0]]).sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
                for i in w[0]..w[1] {
                    prop_assert!(t.value(y)[[i, 0]] >= 0.0);
                    prop_assert!((t.value(y)[[i, 0]] - t.value(y2)[[i, 0]]).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn backward_is_linear_in_the_output(
            vals in prop::collection::vec(-2.0f64..2.0, 6),
            c1 in -3.0f64..3.0,
            c2 in -3.0f64..3.0,
        ) {
            let build = |t: &mut Tape| {
                let x = t.param("x", Matrix::from_shape_vec((2, 3), vals.clone()).unwrap()).unwrap();
                let sq = t.square(x).unwrap();
                let f1 = t.sum(sq).unwrap();
                let y = t.constant(Matrix::from_elem((2, 3), 0.3)).unwrap();
                let c = t.row_cosine(x, y).unwrap();
                let f2 = t.sum(c).unwrap();
                (f1, f2)
            };
            let mut t = Tape::new();
            let (f1, f2) = build(&mut t);
            let a = t.scale(f1, c1).unwrap();
            let b = t.scale(f2, c2).unwrap();
            let total = t.add(a, b).unwrap();
            let g = t.backward(total).unwrap().get("x").unwrap().clone();
            let g1 = t.backward(f1).unwrap().get("x").unwrap().clone();
            let g2 = t.backward(f2).unwrap().get("x").unwrap().clone();
            let combined = &g1 * c1 + &g2 * c2;
            for (p, q) in g.iter().zip(combined.iter()) {
                prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()));
            }
        }
    }

    #[test]
    fn quadratic_grad_check_is_tight() {
        use crate::rng::{stream_rng, Stream};
        use rand::Rng;
        let mut rng = stream_rng(11, Stream::Init);
        let mut params = ParamStore::new();
        params.insert("p", Matrix::from_shape_fn((3, 3), |_| rng.random_range(-1.0..1.0)));
        let q = Matrix::from_shape_fn((3, 3), |_| rng.random_range(-1.0..1.0));
        let build = |p: &ParamStore| {
            let mut t = Tape::new();
            let x = t.param("p", p.get("p").unwrap().clone())?;
            let a = t.constant(q.clone())?;
            let ax = t.matmul(a, x)?;
            let m = t.mul(ax, x)?;
            let s = t.sum(m)?;
            Ok((t, s))
        };
        let report = grad_check(build, &params, 1e-5).unwrap();
        assert_eq!(report.coordinates, 9);
        assert!(report.max_rel_error <= 1e-7, "{report:?}");
    }

    #[test]
    fn grad_check_detects_non_determinism() {
        use std::cell::Cell;
        let calls = Cell::new(0.0);
        let mut params = ParamStore::new();
        params.insert("p", Matrix::ones((1, 1)));
        let build = |p: &ParamStore| {
            calls.set(calls.get() + 1.0);
            let mut t = Tape::new();
            let x = t.param("p", p.get("p").unwrap() * calls.get())?;
            let s = t.sum(x)?;
            Ok((t, s))
        };
        assert!(matches!(grad_check(build, &params, 1e-5), Err(AutodiffError::NonDeterministic(..))));
    }

    #[test]
    fn every_op_passes_grad_check() {
        for check in opcheck::check_all_ops(50, 5) {
            assert!(check.max_rel_error <= 1e-6, "{check:?}");
        }
    }
}
