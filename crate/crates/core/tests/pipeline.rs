//! Gradient fidelity and semantics of the full corrupt/encode/remask/decode
//! pipeline.

use hatgae::autodiff::{grad_check_subset, opcheck, Matrix, ParamStore, Tape};
use hatgae::corruption::{sample_node_mask, CorruptionError, NodeMask};
use hatgae::gat::{Architecture, AttentionGraph, ModelParams, NOISE_PARAM};
use hatgae::graph::{sbm_generate, Graph, SbmConfig};
use hatgae::rng::{stream_rng, Stream};
use hatgae::training::{forward_pass, reconstruction_loss, train, PassOptions, TrainConfig, TrainError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn twelve_node_graph() -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = Matrix::from_shape_fn((12, 8), |_| rng.random_range(-1.0..1.0));
    let edges = [
        (0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (6, 7), (7, 8), (8, 9), (9, 10), (10, 11),
        (11, 6), (0, 6), (2, 9), (4, 11), (1, 7),
    ];
    Graph::from_edges(x, &edges, false).unwrap()
}

fn model(g: &Graph, seed: u64) -> ModelParams {
    let mut m = ModelParams::init(Architecture::new(g.n_dims(), 8, 4).unwrap(), &mut stream_rng(seed, Stream::Init));
    // a noise row large enough that its gradient is well above finite-difference noise
    let w = m.store.get_mut(NOISE_PARAM).unwrap();
    w.mapv_inplace(|v| v * 20.0);
    m
}

fn mask_of(n: usize, noisy: &[usize]) -> NodeMask {
    NodeMask::from_flags((0..n).map(|v| noisy.contains(&v)).collect())
}

fn loss_builder<'a>(
    g: &'a Graph,
    ag: &'a AttentionGraph,
    arch: &'a Architecture,
    mask: &'a NodeMask,
    opts: PassOptions,
) -> impl Fn(&ParamStore) -> Result<(Tape, hatgae::autodiff::Var), hatgae::autodiff::AutodiffError> + 'a {
    move |p: &ParamStore| {
        let m = ModelParams { arch: arch.clone(), store: p.clone() };
        let mut tape = Tape::new();
        let pass = forward_pass(&mut tape, ag, g.features(), mask, &m, opts).map_err(|e| match e {
            TrainError::Autodiff(a) => a,
            other => panic!("{other}"),
        })?;
        Ok((tape, pass.loss))
    }
}

const FULL: PassOptions = PassOptions { corrupt: true, stop_grad_target: false };

#[test]
fn every_parameter_group_passes_grad_check() {
    let g = twelve_node_graph();
    let ag = AttentionGraph::new(&g);
    let m = model(&g, 5);
    let mask = mask_of(12, &[0, 3, 4, 8, 10]);
    let build = loss_builder(&g, &ag, &m.arch, &mask, FULL);
    let groups: [(&str, Box<dyn Fn(&str) -> bool>); 4] = [
        ("encoder", Box::new(|n: &str| n.starts_with("enc") && !n.ends_with("prelu"))),
        ("decoder", Box::new(|n: &str| n.starts_with("dec") && !n.ends_with("prelu"))),
        ("prelu", Box::new(|n: &str| n.ends_with("prelu"))),
        ("noise", Box::new(|n: &str| n == NOISE_PARAM)),
    ];
    for (group, include) in groups {
        let r = grad_check_subset(&build, &m.store, 1e-6, include).unwrap();
        assert!(r.coordinates > 0, "{group}: no coordinates");
        assert!(r.max_rel_error <= 1e-4, "{group}: {} at {}[{}]", r.max_rel_error, r.worst_param, r.worst_index);
    }
}

#[test]
fn per_op_suite() {
    for check in opcheck::check_all_ops(50, 99) {
        assert!(check.max_rel_error <= 1e-6, "{}: {}", check.op, check.max_rel_error);
    }
}

#[test]
fn noise_gradient_is_nonzero() {
    let g = twelve_node_graph();
    let ag = AttentionGraph::new(&g);
    let m = model(&g, 6);
    let mut tape = Tape::new();
    let pass = forward_pass(&mut tape, &ag, g.features(), &mask_of(12, &[1, 2, 7]), &m, FULL).unwrap();
    let grads = tape.backward(pass.loss).unwrap();
    assert!(grads.get(NOISE_PARAM).unwrap().iter().any(|&v| v != 0.0));
}

#[test]
fn stop_grad_removes_exactly_the_target_path() {
    let g = twelve_node_graph();
    let ag = AttentionGraph::new(&g);
    let m = model(&g, 7);
    let mask = mask_of(12, &[0, 5, 6, 11]);
    let grad_w = |stop: bool| {
        let mut tape = Tape::new();
        let opts = PassOptions { corrupt: true, stop_grad_target: stop };
        let pass = forward_pass(&mut tape, &ag, g.features(), &mask, &m, opts).unwrap();
        tape.backward(pass.loss).unwrap().get(NOISE_PARAM).unwrap().clone()
    };
    let both = grad_w(false);
    let model_path = grad_w(true);

    // finite difference of the loss with only the target's copy of w perturbed
    let z = {
        let mut tape = Tape::new();
        let pass = forward_pass(&mut tape, &ag, g.features(), &mask, &m, FULL).unwrap();
        tape.value(pass.z).clone()
    };
    let w = m.store.get(NOISE_PARAM).unwrap();
    let target_loss = |w: &Matrix| {
        let mut x_tilde = g.features().clone();
        for v in mask.noisy_nodes() {
            let mut row = x_tilde.row_mut(v);
            row += &w.row(0);
        }
        reconstruction_loss(&x_tilde, &z, &mask).unwrap()
    };
    let h = 1e-6;
    for j in 0..w.ncols() {
        let (mut p, mut q) = (w.clone(), w.clone());
        p[[0, j]] += h;
        q[[0, j]] -= h;
        let fd = (target_loss(&p) - target_loss(&q)) / (2.0 * h);
        let diff = both[[0, j]] - model_path[[0, j]];
        assert!((diff - fd).abs() <= 1e-6 * fd.abs().max(1.0), "dim {j}: {diff} vs {fd}");
    }
}

#[test]
fn remask_blocks_noisy_codes() {
    let g = twelve_node_graph();
    let ag = AttentionGraph::new(&g);
    let m = model(&g, 8);
    let noisy = [2, 3, 9];
    let mask = mask_of(12, &noisy);
    let mut tape = Tape::new();
    let pass = forward_pass(&mut tape, &ag, g.features(), &mask, &m, FULL).unwrap();
    let (h, ht) = (tape.value(pass.h).clone(), tape.value(pass.h_tilde).clone());
    for v in 0..12 {
        for c in 0..h.ncols() {
            if noisy.contains(&v) {
                assert_eq!(ht[[v, c]], 0.0);
            } else {
                assert_eq!(ht[[v, c]].to_bits(), h[[v, c]].to_bits());
            }
        }
    }
    let total = tape.sum(pass.z).unwrap();
    let grads = tape.backward(total).unwrap();
    let dh = grads.wrt(pass.h).unwrap();
    for &v in &noisy {
        assert!(dh.row(v).iter().all(|g| g.abs() <= 1e-10), "row {v}: {:?}", dh.row(v));
    }
    assert!(dh.iter().any(|&g| g != 0.0));
}

#[test]
fn tc_has_no_noise_gradient() {
    let g = twelve_node_graph();
    let ag = AttentionGraph::new(&g);
    let m = model(&g, 9);
    let mut tape = Tape::new();
    let opts = PassOptions { corrupt: false, stop_grad_target: false };
    let pass = forward_pass(&mut tape, &ag, g.features(), &mask_of(12, &[1, 4]), &m, opts).unwrap();
    let grads = tape.backward(pass.loss).unwrap();
    assert!(!grads.contains(NOISE_PARAM));
    assert!(grads.contains("enc0.h0.w"));
}

#[test]
fn zero_noise_rate_fails_training() {
    let g = twelve_node_graph();
    let cfg = TrainConfig { pn: 0.0, epochs: 3, num: 10, hidden: 8, ..TrainConfig::default() };
    assert_eq!(train(&g, &cfg).unwrap_err(), TrainError::Corruption(CorruptionError::AllClean(0.0)));
    let m = sample_node_mask(12, 0.0, &mut stream_rng(0, Stream::NodeMask)).unwrap();
    assert_eq!(m.count(), 0);
}

#[test]
fn loss_is_invariant_to_per_node_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Matrix::from_shape_fn((6, 5), |_| rng.random_range(-2.0..2.0));
    let z = Matrix::from_shape_fn((6, 5), |_| rng.random_range(-2.0..2.0));
    let mask = mask_of(6, &[0, 2, 3, 5]);
    let base = reconstruction_loss(&x, &z, &mask).unwrap();
    let (mut xs, mut zs) = (x.clone(), z.clone());
    for v in 0..6 {
        let c = rng.random_range(0.01..100.0);
        xs.row_mut(v).mapv_inplace(|a| a * c);
        zs.row_mut(v).mapv_inplace(|a| a * c);
    }
    assert!((reconstruction_loss(&xs, &zs, &mask).unwrap() - base).abs() < 1e-12);
}

#[test]
fn encoder_is_permutation_equivariant() {
    let g = sbm_generate(&SbmConfig { n_nodes: 40, feat_dim: 6, p_in: 0.3, p_out: 0.05, ..SbmConfig::default() }).unwrap();
    let m = model(&g, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut perm: Vec<usize> = (0..40).collect();
    rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
    let gp = g.permute(&perm).unwrap();
    let h = m.encode_values(&AttentionGraph::new(&g), g.features()).unwrap();
    let hp = m.encode_values(&AttentionGraph::new(&gp), gp.features()).unwrap();
    for v in 0..40 {
        for c in 0..h.ncols() {
            assert!((h[[v, c]] - hp[[perm[v], c]]).abs() <= 1e-12);
        }
    }
}
