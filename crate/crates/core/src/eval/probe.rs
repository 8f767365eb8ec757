use super::metrics::{metrics, per_class_report, ClassReport, Metric};
use super::EvalError;
use crate::autodiff::Matrix;
use crate::graph::Split;
use crate::rng::{stream_rng, Stream};
use ndarray::{Array1, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Standard deviation of the initial probe weights.
const PROBE_INIT_STD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    /// Candidate ridge strengths; the best on the validation split is kept.
    pub l2_grid: Vec<f64>,
    pub probe_epochs: usize,
    pub probe_lr: f64,
    pub seed: u64,
    pub metric: Metric,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            l2_grid: vec![1e-4, 1e-3, 1e-2],
            probe_epochs: 300,
            probe_lr: 0.01,
            seed: 0,
            metric: Metric::Accuracy,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.l2_grid.is_empty() || self.l2_grid.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
            return Err(EvalError::Config("l2 candidates must be finite and non-negative".into()));
        }
        if self.probe_epochs == 0 {
            return Err(EvalError::Config("probe_epochs must be at least 1".into()));
        }
        if !(self.probe_lr.is_finite() && self.probe_lr > 0.0) {
            return Err(EvalError::Config("probe_lr must be positive".into()));
        }
        Ok(())
    }
}

/// Multinomial logistic regression `softmax(X W + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    pub w: Matrix,
    pub b: Array1<f64>,
}

impl SoftmaxClassifier {
    pub fn logits(&self, x: &Matrix) -> Matrix {
        x.dot(&self.w) + &self.b
    }

    /// Arg-max class per row, lowest index on ties.
    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        self.logits(x)
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0
            })
            .collect()
    }
}

fn softmax_rows(mut z: Matrix) -> Matrix {
    for mut row in z.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    z
}

/// Mean cross-entropy plus `l2/2 |W|^2`, and its gradient.
pub fn probe_objective(
    clf: &SoftmaxClassifier,
    x: &Matrix,
    y: &[usize],
    l2: f64,
) -> (f64, Matrix, Array1<f64>) {
    let n = x.nrows() as f64;
    let mut p = softmax_rows(clf.logits(x));
    let mut ce = 0.0;
    for (i, &c) in y.iter().enumerate() {
        ce -= p[[i, c]].max(f64::MIN_POSITIVE).ln();
        p[[i, c]] -= 1.0;
    }
    let g = p / n;
    let gw = x.t().dot(&g) + &(&clf.w * l2);
    let gb = g.sum_axis(Axis(0));
    let loss = ce / n + 0.5 * l2 * clf.w.iter().map(|v| v * v).sum::<f64>();
    (loss, gw, gb)
}

/// Full-batch Adam on [`probe_objective`]. Returns the classifier and the
/// objective before each step plus the final value.
pub fn fit_softmax(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    l2: f64,
    cfg: &ProbeConfig,
) -> (SoftmaxClassifier, Vec<f64>) {
    let normal = Normal::new(0.0, PROBE_INIT_STD).expect("positive std");
    let mut rng = stream_rng(cfg.seed, Stream::Probe);
    let mut clf = SoftmaxClassifier {
        w: Matrix::from_shape_fn((x.ncols(), n_classes), |_| normal.sample(&mut rng)),
        b: Array1::zeros(n_classes),
    };
    let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let (mut mw, mut vw) = (Matrix::zeros(clf.w.dim()), Matrix::zeros(clf.w.dim()));
    let (mut mb, mut vb) = (Array1::<f64>::zeros(n_classes), Array1::<f64>::zeros(n_classes));
    let mut history = Vec::with_capacity(cfg.probe_epochs + 1);
    for t in 1..=cfg.probe_epochs as i32 {
        let (loss, gw, gb) = probe_objective(&clf, x, y, l2);
        history.push(loss);
        let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
        let lr = cfg.probe_lr;
        ndarray::Zip::from(&mut clf.w).and(&mut mw).and(&mut vw).and(&gw).for_each(|p, m, v, &g| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        });
        ndarray::Zip::from(&mut clf.b).and(&mut mb).and(&mut vb).and(&gb).for_each(|p, m, v, &g| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        });
    }
    history.push(probe_objective(&clf, x, y, l2).0);
    (clf, history)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub metric: Metric,
    /// Test-split value of `metric`.
    pub value: f64,
    pub l2_chosen: f64,
    pub seed: u64,
    pub val_value: f64,
    pub per_class: Vec<ClassReport>,
    /// Objective trajectory of the chosen classifier.
    pub loss_history: Vec<f64>,
}

/// `{metric, value, l2_chosen, seed}` as written to probe report files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub metric: Metric,
    pub value: f64,
    pub l2_chosen: f64,
    pub seed: u64,
}

impl From<&ProbeResult> for ProbeReport {
    fn from(r: &ProbeResult) -> Self {
        ProbeReport {
            metric: r.metric,
            value: r.value,
            l2_chosen: r.l2_chosen,
            seed: r.seed,
        }
    }
}

fn rows_of(x: &Matrix, idx: &[usize]) -> Matrix {
    x.select(Axis(0), idx)
}

/// Trains on the train split for each l2 candidate, keeps the one with the
/// best validation metric (first on ties) and reports on the test split.
pub fn linear_probe(
    emb: &Matrix,
    labels: Option<&[usize]>,
    split: Option<&[Split]>,
    cfg: &ProbeConfig,
) -> Result<ProbeResult, EvalError> {
    cfg.validate()?;
    let labels = labels.ok_or(EvalError::MissingLabels)?;
    let split = split.ok_or(EvalError::MissingSplit)?;
    if labels.len() != emb.nrows() || split.len() != emb.nrows() {
        return Err(EvalError::LengthMismatch {
            left: emb.nrows(),
            right: labels.len().min(split.len()),
        });
    }
    if emb.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let part = |s: Split| -> Result<Vec<usize>, EvalError> {
        let idx: Vec<usize> = (0..split.len()).filter(|&i| split[i] == s).collect();
        if idx.is_empty() {
            Err(EvalError::EmptySplit(s))
        } else {
            Ok(idx)
        }
    };
    let (train, val, test) = (part(Split::Train)?, part(Split::Val)?, part(Split::Test)?);
    let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
    let (y_train, y_val, y_test) = (pick(&train), pick(&val), pick(&test));
    if y_train.iter().all(|&c| c == y_train[0]) {
        return Err(EvalError::SingleClass(y_train[0]));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let (x_train, x_val, x_test) = (rows_of(emb, &train), rows_of(emb, &val), rows_of(emb, &test));

    let mut best: Option<(f64, f64, SoftmaxClassifier, Vec<f64>)> = None;
    for &l2 in &cfg.l2_grid {
        let (clf, history) = fit_softmax(&x_train, &y_train, n_classes, l2, cfg);
        let v = metrics(&clf.predict(&x_val), &y_val, cfg.metric)?;
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, l2, clf, history));
        }
    }
    let (val_value, l2_chosen, clf, loss_history) = best.expect("non-empty grid");
    let preds = clf.predict(&x_test);
    Ok(ProbeResult {
        metric: cfg.metric,
        value: metrics(&preds, &y_test, cfg.metric)?,
        l2_chosen,
        seed: cfg.seed,
        val_value,
        per_class: per_class_report(&preds, &y_test, n_classes),
        loss_history,
    })
}
