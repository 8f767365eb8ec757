use super::TrainError;
use crate::autodiff::{Matrix, Tape, Var, COSINE_EPS};
use crate::corruption::NodeMask;
use ndarray::ArrayView1;
use std::rc::Rc;

/// `a.b / (|a| |b|)`.
pub fn cosine_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64, TrainError> {
    if a.len() != b.len() {
        return Err(TrainError::Config(format!("vector lengths {} and {} differ", a.len(), b.len())));
    }
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na < COSINE_EPS || nb < COSINE_EPS {
        return Err(TrainError::ZeroNorm);
    }
    Ok(a.dot(&b) / (na * nb))
}

/// `(1/|V~|) sum_{v in V~} (1 - cos(X~_v, Z_v))^2`, with zero-norm rows
/// contributing 1.
pub fn reconstruction_loss(x_tilde: &Matrix, z: &Matrix, mask: &NodeMask) -> Result<f64, TrainError> {
    if x_tilde.dim() != z.dim() || x_tilde.nrows() != mask.len() {
        return Err(TrainError::Config(format!(
            "shapes {:?}, {:?} and mask of {} rows disagree",
            x_tilde.dim(),
            z.dim(),
            mask.len()
        )));
    }
    let noisy = mask.noisy_nodes();
    if noisy.is_empty() {
        return Err(TrainError::EmptyNoisySet);
    }
    let total: f64 = noisy
        .iter()
        .map(|&v| {
            let c = cosine_distance(x_tilde.row(v), z.row(v)).unwrap_or(0.0);
            (1.0 - c) * (1.0 - c)
        })
        .sum();
    Ok(total / noisy.len() as f64)
}

/// Tape version of [`reconstruction_loss`].
pub fn reconstruction_loss_on_tape(tape: &mut Tape, x_tilde: Var, z: Var, mask: &NodeMask) -> Result<Var, TrainError> {
    let noisy: Rc<[usize]> = Rc::from(mask.noisy_nodes());
    if noisy.is_empty() {
        return Err(TrainError::EmptyNoisySet);
    }
    let cos = tape.row_cosine(x_tilde, z)?;
    let gap = tape.scale(cos, -1.0)?;
    let gap = tape.add_scalar(gap, 1.0)?;
    let sq = tape.square(gap)?;
    Ok(tape.mean_over(sq, noisy)?)
}
