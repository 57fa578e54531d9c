use ndarray::{arr2, Array2};
use qclp_core::graph::{Edge, EdgeSplit};
use qclp_core::predict::{self, Arch, Graph, ModelConfig, ModelParams};
use qclp_core::{EmbeddingMatrix, EmbeddingSource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(arch: Arch) -> ModelConfig {
    ModelConfig {
        layers: 2,
        hidden: 8,
        dropout: 0.0,
        lr: 0.01,
        epochs: 50,
        patience: 10,
        seed: 1,
        ..ModelConfig::new(arch)
    }
}

fn random_graph(n: usize, p: f64, seed: u64) -> Vec<Edge> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                out.push(Edge::new(u, v));
            }
        }
    }
    out
}

#[test]
fn identity_mlp_layer_is_relu() {
    let cfg = ModelConfig {
        layers: 1,
        hidden: 3,
        ..small(Arch::Mlp)
    };
    let mut p = ModelParams::init(&cfg, 3).unwrap();
    p.tensors[0] = Array2::eye(3);
    p.tensors[1] = Array2::zeros((1, 3));
    let x = arr2(&[[1.0, -2.0, 0.5], [-0.1, 0.0, 3.0]]);
    let g = Graph::new(2, &[Edge::new(0, 1)]);
    assert_eq!(p.encode(&g, &x).unwrap(), x.mapv(|v| v.max(0.0)));
}

#[test]
fn gcn_on_edgeless_graph_equals_mlp() {
    let x = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64 - 1.5) * (j as f64 + 0.5));
    let g = Graph::new(4, &[]);
    let gcn = ModelParams::init(&small(Arch::Gcn), 3).unwrap();
    let mut mlp = ModelParams::init(&small(Arch::Mlp), 3).unwrap();
    mlp.tensors[..4].clone_from_slice(&gcn.tensors[..4]);
    assert_eq!(gcn.encode(&g, &x).unwrap(), mlp.encode(&g, &x).unwrap());
}

#[test]
fn sage_isolated_node_uses_zero_neighbor_mean() {
    let cfg = ModelConfig {
        layers: 1,
        hidden: 2,
        ..small(Arch::Sage)
    };
    let p = ModelParams::init(&cfg, 2).unwrap();
    let x = arr2(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]);
    let g = Graph::new(3, &[Edge::new(0, 1)]);
    let h = p.encode(&g, &x).unwrap();
    let input = arr2(&[[0.5, 0.5, 0.0, 0.0]]);
    let want = (input.dot(&p.tensors[0]) + &p.tensors[1]).mapv(|v| v.max(0.0));
    assert_eq!(h.row(2), want.row(0));
}

#[test]
fn gae_zero_embeddings_score_zero() {
    let p = ModelParams::init(&small(Arch::Gae), 2).unwrap();
    let g = Graph::new(2, &[]);
    let h = Array2::zeros((2, 8));
    assert_eq!(p.score(&g, &h, 0, 1), 0.0);
}

#[test]
fn scores_are_symmetric_for_every_arch() {
    let edges = random_graph(12, 0.3, 2);
    let g = Graph::new(12, &edges);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Array2::from_shape_fn((12, 4), |_| rng.random_range(-1.0..1.0));
    for arch in Arch::ALL {
        let p = ModelParams::init(&small(arch), 4).unwrap();
        let h = p.encode(&g, &x).unwrap();
        for u in 0..12 {
            for v in 0..12 {
                if u != v {
                    let (a, b) = (p.score(&g, &h, u, v), p.score(&g, &h, v, u));
                    assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{arch} {u} {v}");
                }
            }
        }
    }
}

#[test]
fn ncn_without_common_neighbors_pads_with_zero() {
    // path 0-1, 2-3: no pair has common neighbors except through the path
    let g = Graph::new(4, &[Edge::new(0, 1), Edge::new(2, 3)]);
    let p = ModelParams::init(&small(Arch::Ncn), 2).unwrap();
    let x = arr2(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, -0.5]]);
    let h = p.encode(&g, &x).unwrap();
    let s = &p.tensors[4..8];
    let mut input = Array2::zeros((1, 16));
    for i in 0..8 {
        input[(0, i)] = h[(0, i)] * h[(2, i)];
    }
    let hidden = (input.dot(&s[0]) + &s[1]).mapv(|v: f64| v.max(0.0));
    let want = (hidden.dot(&s[2]) + &s[3])[(0, 0)];
    assert!((p.score(&g, &h, 0, 2) - want).abs() < 1e-12);
}

#[test]
fn encoders_are_permutation_equivariant() {
    let n = 9;
    let edges = random_graph(n, 0.35, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
    let perm: Vec<usize> = vec![4, 7, 0, 2, 8, 1, 6, 3, 5]; // new id of old node i
    let pedges: Vec<Edge> = edges.iter().map(|e| Edge::new(perm[e.u], perm[e.v])).collect();
    let mut px = Array2::zeros((n, 3));
    for i in 0..n {
        px.row_mut(perm[i]).assign(&x.row(i));
    }
    let (g, pg) = (Graph::new(n, &edges), Graph::new(n, &pedges));
    for arch in Arch::ALL {
        let p = ModelParams::init(&small(arch), 3).unwrap();
        let (h, ph) = (p.encode(&g, &x).unwrap(), p.encode(&pg, &px).unwrap());
        for i in 0..n {
            for k in 0..h.ncols() {
                assert!((h[(i, k)] - ph[(perm[i], k)]).abs() < 1e-12, "{arch}");
            }
        }
    }
}

/// Two groups; positive pairs share the group coordinate.
fn separable(n: usize) -> (EmbeddingMatrix, EdgeSplit) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| if i % 2 == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
        .collect();
    let feats = EmbeddingMatrix::from_rows(&rows, EmbeddingSource::Other("toy".into())).unwrap();
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut val_neg = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let same = (u % 2) == (v % 2);
            if same && (u + v) % 3 != 0 {
                train.push(Edge::new(u, v));
            } else if same {
                val.push(Edge::new(u, v));
            } else if (u + v) % 5 == 0 {
                val_neg.push(Edge::new(u, v));
            }
        }
    }
    let split = EdgeSplit {
        train_pos: train,
        val_pos: val,
        test_pos: vec![],
        val_neg,
        test_neg: vec![],
        test_iso_neg: vec![],
        seed: 0,
    };
    (feats, split)
}

#[test]
fn separable_toy_problem_is_learned() {
    let (feats, split) = separable(20);
    let g = Graph::new(20, &[]);
    let cfg = ModelConfig {
        layers: 1,
        hidden: 8,
        epochs: 200,
        patience: 200,
        lr: 0.05,
        ..small(Arch::Mlp)
    };
    let out = predict::train(&cfg, &feats, &split, &g).unwrap();
    // Resampled negatives include unlabeled same-group pairs, so the loss floor
    // is about 0.3 rather than 0. A chance-level scorer sits at ln 2.
    let tail: Vec<f64> = out.history.iter().rev().take(50).map(|h| h.loss).collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!(mean < 0.55, "tail loss {mean}");
    assert_eq!(out.best_val_auroc, Some(1.0));
}

#[test]
fn zero_epochs_returns_initialization() {
    let (feats, split) = separable(10);
    let g = Graph::new(10, &split.train_pos);
    let cfg = ModelConfig {
        epochs: 0,
        ..small(Arch::Gcn)
    };
    let out = predict::train(&cfg, &feats, &split, &g).unwrap();
    assert_eq!(out.params, ModelParams::init(&cfg, 2).unwrap());
    assert!(out.history.is_empty());
}

#[test]
fn training_is_reproducible_and_early_stopping_keeps_best() {
    let (feats, split) = separable(16);
    let g = Graph::new(16, &split.train_pos);
    for arch in Arch::ALL {
        let cfg = ModelConfig {
            dropout: 0.3,
            epochs: 30,
            patience: 5,
            ..small(arch)
        };
        let a = predict::train(&cfg, &feats, &split, &g).unwrap();
        let b = predict::train(&cfg, &feats, &split, &g).unwrap();
        assert_eq!(a.params, b.params, "{arch}");
        let best = a.best_val_auroc.unwrap();
        let last = a.history.last().unwrap().val_auroc.unwrap();
        assert!(best >= last, "{arch}");
        assert!(a.history.iter().all(|h| h.val_auroc.unwrap() <= best));
    }
}

#[test]
fn checkpoint_round_trips_exactly() {
    for arch in Arch::ALL {
        let mut p = ModelParams::init(&small(arch), 5).unwrap();
        p.tensors[1].mapv_inplace(|_| 0.1 + 1e-17);
        p.tensors[0][(0, 0)] = std::f64::consts::PI / 7.0;
        let text = p.to_json().unwrap();
        let back = ModelParams::from_json(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json().unwrap(), text);
    }
    assert!(ModelParams::from_json("{\"format\":\"x\"}").is_err());
}

#[test]
fn feature_dim_mismatch_is_an_error() {
    let p = ModelParams::init(&small(Arch::Mlp), 3).unwrap();
    let g = Graph::new(2, &[]);
    assert!(p.encode(&g, &Array2::zeros((2, 4))).is_err());
}
