//! Finite-difference checks of every backward rule on random inputs.

use super::{grad_check, AutodiffError, Matrix, ParamStore, Tape, Var};
use crate::rng::{stream_rng, Stream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::rc::Rc;

#[derive(Debug, Clone, PartialEq)]
pub struct OpCheck {
    pub op: &'static str,
    pub trials: usize,
    pub max_rel_error: f64,
}

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

/// Uniform entries kept at least 0.05 away from the kink at zero.
fn off_kink(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    uniform(rng, r, c).mapv(|x| if x.abs() < 0.05 { x.signum() * 0.05 + x } else { x })
}

type Forward = dyn Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>;

/// Runs one op under a random upstream weighting `sum(op(inputs) * R)`.
fn check_op(
    rng: &mut ChaCha8Rng,
    inputs: Vec<Matrix>,
    forward: &Forward,
) -> Result<f64, AutodiffError> {
    let mut params = ParamStore::new();
    for (i, m) in inputs.into_iter().enumerate() {
        params.insert(format!("in{i}"), m);
    }
    let n_in = params.len();
    let probe_shape = {
        let mut t = Tape::new();
        let vars = (0..n_in)
            .map(|i| t.constant(params.get(&format!("in{i}")).unwrap().clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let out = forward(&mut t, &vars)?;
        t.value(out).dim()
    };
    let weights = uniform(rng, probe_shape.0, probe_shape.1);
    let build = |p: &ParamStore| {
        let mut t = Tape::new();
        let vars = (0..n_in)
            .map(|i| t.param(&format!("in{i}"), p.get(&format!("in{i}")).unwrap().clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let out = forward(&mut t, &vars)?;
        let w = t.constant(weights.clone())?;
        let weighted = t.mul(out, w)?;
        let s = t.sum(weighted)?;
        Ok((t, s))
    };
    Ok(grad_check(build, &params, 1e-5)?.max_rel_error)
}

/// Checks every differentiable op `trials` times on fresh random inputs.
pub fn check_all_ops(trials: usize, seed: u64) -> Vec<OpCheck> {
    let mut rng = stream_rng(seed, Stream::Init);
    let mut results = Vec::new();
    let mut run = |name: &'static str,
                   rng: &mut ChaCha8Rng,
                   make: &dyn Fn(&mut ChaCha8Rng) -> Vec<Matrix>,
                   forward: &Forward| {
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let inputs = make(rng);
            let err = check_op(rng, inputs, forward).unwrap_or(f64::INFINITY);
            worst = worst.max(err);
        }
        results.push(OpCheck {
            op: name,
            trials,
            max_rel_error: worst,
        });
    };

    run("matmul", &mut rng, &|r| vec![uniform(r, 3, 4), uniform(r, 4, 2)], &|t, v| t.matmul(v[0], v[1]));
    run("add", &mut rng, &|r| vec![uniform(r, 3, 4), uniform(r, 3, 4)], &|t, v| t.add(v[0], v[1]));
    run("add_row_broadcast", &mut rng, &|r| vec![uniform(r, 3, 4), uniform(r, 1, 4)], &|t, v| t.add(v[0], v[1]));
    run("sub_col_broadcast", &mut rng, &|r| vec![uniform(r, 3, 4), uniform(r, 3, 1)], &|t, v| t.sub(v[0], v[1]));
    run("mul", &mut rng, &|r| vec![uniform(r, 3, 4), uniform(r, 3, 4)], &|t, v| t.mul(v[0], v[1]));
    run("mul_col_broadcast", &mut rng, &|r| vec![uniform(r, 3, 4), uniform(r, 3, 1)], &|t, v| t.mul(v[0], v[1]));
    run("mul_row_broadcast", &mut rng, &|r| vec![uniform(r, 3, 4), uniform(r, 1, 4)], &|t, v| t.mul(v[0], v[1]));
    run("scale", &mut rng, &|r| vec![uniform(r, 2, 3)], &|t, v| t.scale(v[0], -1.7));
    run("add_scalar", &mut rng, &|r| vec![uniform(r, 2, 3)], &|t, v| t.add_scalar(v[0], 0.3));
    run("leaky_relu", &mut rng, &|r| vec![off_kink(r, 3, 4)], &|t, v| t.leaky_relu(v[0], 0.2));
    run(
        "prelu",
        &mut rng,
        &|r| vec![off_kink(r, 3, 4), Matrix::from_elem((1, 1), r.random_range(0.05..0.5))],
        &|t, v| t.prelu(v[0], v[1]),
    );
    run(
        "segment_softmax",
        &mut rng,
        &|r| vec![uniform(r, 7, 1).mapv(|x| 3.0 * x)],
        &|t, v| t.segment_softmax(v[0], Rc::from(vec![0, 3, 4, 7])),
    );
    run(
        "gather_rows",
        &mut rng,
        &|r| vec![uniform(r, 4, 3)],
        &|t, v| t.gather_rows(v[0], Rc::from(vec![2, 0, 2, 3, 3, 1])),
    );
    run(
        "scatter_add_rows",
        &mut rng,
        &|r| vec![uniform(r, 6, 3)],
        &|t, v| t.scatter_add_rows(v[0], Rc::from(vec![1, 0, 1, 3, 3, 3]), 4),
    );
    run(
        "concat_cols",
        &mut rng,
        &|r| vec![uniform(r, 3, 2), uniform(r, 3, 1), uniform(r, 3, 3)],
        &|t, v| t.concat_cols(v),
    );
    run("slice_rows", &mut rng, &|r| vec![uniform(r, 5, 2)], &|t, v| t.slice_rows(v[0], 1, 3));
    run("row_cosine", &mut rng, &|r| vec![uniform(r, 4, 3), uniform(r, 4, 3)], &|t, v| t.row_cosine(v[0], v[1]));
    run(
        "mean_over",
        &mut rng,
        &|r| vec![uniform(r, 5, 2)],
        &|t, v| t.mean_over(v[0], Rc::from(vec![0, 2, 3])),
    );
    run("square", &mut rng, &|r| vec![uniform(r, 3, 3)], &|t, v| t.square(v[0]));
    run("sum", &mut rng, &|r| vec![uniform(r, 3, 3)], &|t, v| t.sum(v[0]));
    run(
        "masked_row_add",
        &mut rng,
        &|r| vec![uniform(r, 4, 3), uniform(r, 1, 3)],
        &|t, v| t.masked_row_add(v[0], v[1], Rc::from(vec![true, false, true, true])),
    );
    run(
        "zero_rows",
        &mut rng,
        &|r| vec![uniform(r, 4, 3)],
        &|t, v| t.zero_rows(v[0], Rc::from(vec![false, true, false, true])),
    );
    results
}
