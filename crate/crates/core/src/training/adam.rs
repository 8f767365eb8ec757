use super::TrainError;
use crate::autodiff::{Matrix, ParamStore};
use std::collections::BTreeMap;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moments per parameter, created lazily on the first step
/// that touches the parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: BTreeMap<String, Matrix>,
    v: BTreeMap<String, Matrix>,
}

impl Default for AdamState {
    fn default() -> Self {
        AdamState {
            beta1: BETA1,
            beta2: BETA2,
            eps: ADAM_EPS,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Completed optimizer steps.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, name: &str) -> Option<&Matrix> {
        self.m.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Matrix> {
        self.v.get(name)
    }
}

/// One bias-corrected Adam step over every parameter that has a gradient.
/// Decoupled weight decay `p <- p - lr * wd * p` is applied first.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &BTreeMap<String, Matrix>,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<(), TrainError> {
    for (name, g) in grads {
        let p = params
            .get(name)
            .ok_or_else(|| TrainError::Optimizer(format!("gradient for unknown parameter {name:?}")))?;
        if p.dim() != g.dim() {
            return Err(TrainError::Optimizer(format!(
                "{name}: parameter {:?} vs gradient {:?}",
                p.dim(),
                g.dim()
            )));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (name, g) in grads {
        let p = params.get_mut(name).expect("checked above");
        let m = state.m.entry(name.clone()).or_insert_with(|| Matrix::zeros(g.dim()));
        let v = state.v.entry(name.clone()).or_insert_with(|| Matrix::zeros(g.dim()));
        ndarray::Zip::from(&mut *p)
            .and(&mut *m)
            .and(&mut *v)
            .and(g)
            .for_each(|p, m, v, &g| {
                *p -= lr * weight_decay * *p;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one(name: &str, p: f64) -> ParamStore {
        [(name.to_string(), array![[p]])].into_iter().collect()
    }

    fn grad(name: &str, g: f64) -> BTreeMap<String, Matrix> {
        [(name.to_string(), array![[g]])].into_iter().collect()
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = one("p", 0.0);
        let mut s = AdamState::new();
        adam_step(&mut p, &grad("p", 2.0), &mut s, 0.1, 0.0).unwrap();
        let expected = -0.1 * 2.0 / (2.0 + 1e-8);
        assert!((p.get("p").unwrap()[[0, 0]] - expected).abs() < 1e-15);
        assert_eq!(s.steps(), 1);
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = one("p", 1.5);
        let mut s = AdamState::new();
        adam_step(&mut p, &grad("p", 0.0), &mut s, 0.1, 0.0).unwrap();
        assert_eq!(p.get("p").unwrap()[[0, 0]], 1.5);
    }

    #[test]
    fn decoupled_decay() {
        let mut p = one("p", 1.0);
        let mut s = AdamState::new();
        adam_step(&mut p, &grad("p", 0.0), &mut s, 0.1, 0.1).unwrap();
        assert!((p.get("p").unwrap()[[0, 0]] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_leaves_state_untouched() {
        let mut p = one("p", 1.0);
        let mut s = AdamState::new();
        let g: BTreeMap<String, Matrix> = [("p".to_string(), array![[1.0, 2.0]])].into_iter().collect();
        assert!(matches!(adam_step(&mut p, &g, &mut s, 0.1, 0.0), Err(TrainError::Optimizer(_))));
        assert_eq!(s.steps(), 0);
    }

    #[test]
    fn matches_hand_rolled_second_step() {
        let mut p = one("p", 0.5);
        let mut s = AdamState::new();
        adam_step(&mut p, &grad("p", 1.0), &mut s, 0.01, 0.0).unwrap();
        adam_step(&mut p, &grad("p", -3.0), &mut s, 0.01, 0.0).unwrap();
        let m1 = 0.1;
        let v1 = 0.001;
        let p1 = 0.5 - 0.01 * (m1 / 0.1) / ((v1 / 0.001f64).sqrt() + 1e-8);
        let m2 = 0.9 * m1 + 0.1 * -3.0;
        let v2 = 0.999 * v1 + 0.001 * 9.0;
        let p2 = p1 - 0.01 * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
        assert!((p.get("p").unwrap()[[0, 0]] - p2).abs() < 1e-15);
    }
}
