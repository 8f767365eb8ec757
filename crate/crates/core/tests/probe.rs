use hatgae::autodiff::Matrix;
use hatgae::eval::{export_embeddings, linear_probe, probe_objective, ProbeConfig, SoftmaxClassifier};
use hatgae::gat::{Architecture, ModelParams};
use hatgae::graph::{sbm_generate, SbmConfig, Split};
use hatgae::rng::{stream_rng, Stream};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn splits(n: usize, rng: &mut ChaCha8Rng) -> Vec<Split> {
    let mut s: Vec<Split> = (0..n)
        .map(|i| match i % 5 {
            0 | 1 => Split::Train,
            2 => Split::Val,
            _ => Split::Test,
        })
        .collect();
    s.shuffle(rng);
    s
}

fn gaussian(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_shape_fn((n, d), |_| StandardNormal.sample(rng))
}

#[test]
fn separable_classes_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let labels: Vec<usize> = (0..200).map(|i| i % 2).collect();
    let mut x = gaussian(200, 4, &mut rng) * 0.1;
    for (i, &y) in labels.iter().enumerate() {
        x[[i, 0]] += if y == 1 { 3.0 } else { -3.0 };
    }
    let r = linear_probe(&x, Some(&labels), Some(&splits(200, &mut rng)), &ProbeConfig::default()).unwrap();
    assert_eq!(r.value, 1.0);
}

#[test]
fn shuffled_labels_score_at_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 3000;
    let x = gaussian(n, 8, &mut rng);
    let mut labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    labels.shuffle(&mut rng);
    let split = splits(n, &mut rng);
    let n_test = split.iter().filter(|&&s| s == Split::Test).count() as f64;
    let r = linear_probe(&x, Some(&labels), Some(&split), &ProbeConfig::default()).unwrap();
    let sigma = (1.0 / 3.0 * 2.0 / 3.0 / n_test).sqrt();
    assert!((r.value - 1.0 / 3.0).abs() <= 3.0 * sigma, "{} vs 1/3 +- {}", r.value, 3.0 * sigma);
}

#[test]
fn constant_embeddings_predict_the_majority() {
    let n = 300;
    let labels: Vec<usize> = (0..n).map(|i| if i % 10 < 6 { 0 } else if i % 10 < 9 { 1 } else { 2 }).collect();
    let split: Vec<Split> = (0..n).map(|i| [Split::Train, Split::Val, Split::Test][(i / 10) % 3]).collect();
    let x = Matrix::from_elem((n, 3), 0.7);
    let r = linear_probe(&x, Some(&labels), Some(&split), &ProbeConfig::default()).unwrap();
    assert!((r.value - 0.6).abs() < 1e-12);
}

#[test]
fn probe_loss_never_increases() {
    let g = sbm_generate(&SbmConfig::default()).unwrap();
    for (seed, x) in [(0, g.features().clone()), (1, g.features().mapv(|v| v * 0.1))] {
        let cfg = ProbeConfig { seed, ..ProbeConfig::default() };
        let r = linear_probe(&x, g.labels(), g.split(), &cfg).unwrap();
        assert_eq!(r.loss_history.len(), cfg.probe_epochs + 1);
        for (e, w) in r.loss_history.windows(2).enumerate() {
            assert!(w[1] <= w[0] + 1e-9, "epoch {e}: {} -> {}", w[0], w[1]);
        }
    }
}

fn random_rotation(d: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let q = a.qr().q();
    Matrix::from_shape_fn((d, d), |(i, j)| q[(i, j)])
}

#[test]
fn unregularised_probe_is_rotation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 240;
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    // overlapping classes so the optimum is finite; Adam is not rotation
    // equivariant step by step, so this relies on converging to the unique
    // optimal loss
    let mut x = gaussian(n, 5, &mut rng);
    for (i, &y) in labels.iter().enumerate() {
        x[[i, y]] += 0.8;
    }
    let split = splits(n, &mut rng);
    let q = random_rotation(5, &mut rng);
    let xr = x.dot(&q);
    let cfg = ProbeConfig { l2_grid: vec![0.0], probe_epochs: 20000, probe_lr: 0.01, ..ProbeConfig::default() };
    let a = linear_probe(&x, Some(&labels), Some(&split), &cfg).unwrap();
    let b = linear_probe(&xr, Some(&labels), Some(&split), &cfg).unwrap();
    let (la, lb) = (a.loss_history.last().unwrap(), b.loss_history.last().unwrap());
    assert!((la - lb).abs() <= 1e-6, "{la} vs {lb}");
    assert_eq!(a.value, b.value);
}

#[test]
fn objective_is_rotation_invariant_at_matched_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = gaussian(30, 4, &mut rng);
    let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let clf = SoftmaxClassifier { w: gaussian(4, 3, &mut rng), b: ndarray::Array1::from(vec![0.1, 0.0, -0.2]) };
    let q = random_rotation(4, &mut rng);
    let rotated = SoftmaxClassifier { w: q.t().dot(&clf.w), b: clf.b.clone() };
    let (l1, _, _) = probe_objective(&clf, &x, &y, 0.0);
    let (l2, _, _) = probe_objective(&rotated, &x.dot(&q), &y, 0.0);
    assert!((l1 - l2).abs() < 1e-12);
}

#[test]
fn export_and_probe_are_deterministic() {
    let g = sbm_generate(&SbmConfig { n_nodes: 90, ..SbmConfig::default() }).unwrap();
    let m = ModelParams::init(Architecture::new(16, 16, 4).unwrap(), &mut stream_rng(2, Stream::Init));
    let (e1, e2) = (export_embeddings(&g, &m).unwrap(), export_embeddings(&g, &m).unwrap());
    assert_eq!(e1, e2);
    let cfg = ProbeConfig { seed: 9, ..ProbeConfig::default() };
    let r1 = linear_probe(&e1.values, g.labels(), g.split(), &cfg).unwrap();
    let r2 = linear_probe(&e2.values, g.labels(), g.split(), &cfg).unwrap();
    assert_eq!(r1, r2);
}

#[test]
fn permuted_graph_permutes_embedding_rows() {
    let g = sbm_generate(&SbmConfig { n_nodes: 60, ..SbmConfig::default() }).unwrap();
    let m = ModelParams::init(Architecture::new(16, 16, 4).unwrap(), &mut stream_rng(3, Stream::Init));
    let mut perm: Vec<usize> = (0..60).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(8));
    let e = export_embeddings(&g, &m).unwrap().values;
    let ep = export_embeddings(&g.permute(&perm).unwrap(), &m).unwrap().values;
    for v in 0..60 {
        for c in 0..16 {
            assert!((e[[v, c]] - ep[[perm[v], c]]).abs() <= 1e-12);
        }
    }
}

#[test]
fn zero_features_give_zero_embeddings() {
    let g = sbm_generate(&SbmConfig { n_nodes: 30, ..SbmConfig::default() }).unwrap();
    let g0 = g.with_features(Matrix::zeros((30, 16))).unwrap();
    let m = ModelParams::init(Architecture::new(16, 16, 4).unwrap(), &mut stream_rng(4, Stream::Init));
    assert!(export_embeddings(&g0, &m).unwrap().values.iter().all(|&v| v == 0.0));
}
