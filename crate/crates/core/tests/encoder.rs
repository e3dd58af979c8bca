use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stems::encoder::*;
use stems::graph::{Bandwidths, BuildingGraph};
use stems::nn::{Activation, Params};

fn bw() -> Bandwidths {
    Bandwidths { sigma_d: 1.0, sigma_f: 1.0 }
}

fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> BuildingGraph {
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        w[[i, i]] = rng.random_range(0.5..1.0);
        for j in 0..i {
            let v = if rng.random_bool(0.7) { rng.random_range(0.05..1.0) } else { 0.0 };
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
    }
    BuildingGraph::from_weights((0..n).collect(), w, 0.0, bw()).unwrap()
}

fn random_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

fn small_config(activation: Activation) -> EncoderConfig {
    EncoderConfig {
        input_dim: 6,
        gcn_layers: 3,
        hidden: 8,
        heads: 2,
        head_dim: 3,
        output_dim: 5,
        window: 4,
        activation,
    }
}

fn random_table(n: usize, dim: usize, steps: usize, rng: &mut ChaCha8Rng) -> FeatureTable {
    let mut t = FeatureTable::new(n, dim);
    for _ in 0..steps {
        let step: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
        t.push_step(&step).unwrap();
    }
    t
}

/// Normalized adjacency recomputed from raw weights with plain loops.
fn dense_norm_adjacency(w: &Array2<f64>) -> Array2<f64> {
    let n = w.nrows();
    let d: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w[[i, j]]).sum()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| w[[i, j]] / (d[i] * d[j]).sqrt())
}

#[test]
fn gcn_single_node_identity() {
    let g = BuildingGraph::from_weights(vec![0], Array2::from_elem((1, 1), 0.7), 0.0, bw()).unwrap();
    let h = Array2::from_shape_vec((1, 3), vec![0.3, -1.2, 4.0]).unwrap();
    let out = gcn_layer(&h, &g, &Array2::eye(3), Activation::Identity).unwrap();
    assert_eq!(out, h);
}

#[test]
fn gcn_identical_nodes_give_identical_rows() {
    let w = Array2::from_shape_vec((2, 2), vec![1.0, 0.4, 0.4, 1.0]).unwrap();
    let g = BuildingGraph::from_weights(vec![0, 1], w, 0.0, bw()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let row = random_matrix(1, 4, &mut rng);
    let h = ndarray::concatenate![ndarray::Axis(0), row, row];
    let out = gcn_layer(&h, &g, &random_matrix(3, 4, &mut rng), Activation::Relu).unwrap();
    for (a, b) in out.row(0).iter().zip(out.row(1).iter()) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn gcn_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = random_graph(4, &mut rng);
    let h = random_matrix(4, 5, &mut rng);
    let w = random_matrix(3, 5, &mut rng);
    let a = dense_norm_adjacency(&g.weights);
    for act in [Activation::Relu, Activation::Tanh] {
        let out = gcn_layer(&h, &g, &w, act).unwrap();
        for i in 0..4 {
            for o in 0..3 {
                let mut acc = 0.0;
                for j in 0..4 {
                    for c in 0..5 {
                        acc += a[[i, j]] * h[[j, c]] * w[[o, c]];
                    }
                }
                assert!((out[[i, o]] - act.apply(acc)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn gcn_rejects_mismatched_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_graph(3, &mut rng);
    assert!(matches!(
        gcn_layer(&random_matrix(2, 4, &mut rng), &g, &random_matrix(2, 4, &mut rng), Activation::Relu),
        Err(EncoderError::Shape(_))
    ));
    assert!(gcn_layer(&random_matrix(3, 4, &mut rng), &g, &random_matrix(2, 5, &mut rng), Activation::Relu).is_err());
}

#[test]
fn uniform_history_gives_uniform_weights() {
    let cfg = EncoderConfig { input_dim: 4, ..Default::default() };
    let params = EncoderParams::new(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(4));
    let x = vec![0.2, -0.7, 1.1, 0.05];
    let mut hist = StateHistory::new(cfg.window);
    for _ in 0..5 {
        hist.push(x.clone());
    }
    let (z, weights) = temporal_attention(&hist, &params);
    let expect = 1.0 / (cfg.window as f64 + 1.0);
    for head in &weights {
        assert_eq!(head.len(), cfg.window + 1);
        assert!(head.iter().all(|w| (w - expect).abs() < 1e-9));
    }
    let xv = Array1::from(x);
    let concat: Vec<f64> = params.wv.iter().flat_map(|w| w.dot(&xv).to_vec()).collect();
    let z_expect = params.wo.dot(&Array1::from(concat));
    for (a, b) in z.iter().zip(z_expect.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn dominant_score_saturates() {
    let cfg = EncoderConfig { input_dim: 1, heads: 1, head_dim: 1, window: 4, ..Default::default() };
    let mut params = EncoderParams::new(cfg, &mut ChaCha8Rng::seed_from_u64(5));
    params.wq[0].fill(1.0);
    params.wk[0].fill(1.0);
    let mut hist = StateHistory::new(4);
    for x in [0.0, 51.0, 0.0, 0.0, 1.0] {
        hist.push(vec![x]);
    }
    let (_, w) = temporal_attention(&hist, &params);
    assert!(w[0][1] >= 1.0 - 1e-6, "{:?}", w[0]);
}

/// Softmax of explicitly recomputed scores with compensated summation.
fn oracle_softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in &e {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    e.iter().map(|v| v / sum).collect()
}

#[test]
fn random_history_weights_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = EncoderConfig { input_dim: 5, window: 6, ..Default::default() };
    let params = EncoderParams::new(cfg.clone(), &mut rng);
    let mut hist = StateHistory::new(cfg.window);
    let mut xs = Vec::new();
    for _ in 0..9 {
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        hist.push(x.clone());
        xs.push(x);
    }
    let window = &xs[xs.len() - (cfg.window + 1)..];
    let (_, weights) = temporal_attention(&hist, &params);
    for h in 0..cfg.heads {
        let q = params.wq[h].dot(&Array1::from(window.last().unwrap().clone()));
        let scores: Vec<f64> = window.iter().map(|x| params.wk[h].dot(&Array1::from(x.clone())).dot(&q)).collect();
        let oracle = oracle_softmax(&scores);
        assert!((weights[h].iter().sum::<f64>() - 1.0).abs() < 1e-6);
        for (a, b) in weights[h].iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn fuse_identities() {
    let cfg = EncoderConfig { hidden: 4, output_dim: 4, heads: 1, head_dim: 3, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut p = EncoderParams::new(cfg, &mut rng);
    let h = vec![0.5, -1.0, 2.0, 0.25];
    let z = vec![1.0, 2.0, 3.0];

    p.b = Array1::from(vec![0.1, 0.2, 0.3, 0.4]);
    assert_eq!(fuse(&[0.0; 4], &[0.0; 3], &p).unwrap(), vec![0.1, 0.2, 0.3, 0.4]);

    let h2: Vec<f64> = h.iter().map(|v| 2.0 * v).collect();
    let diff: Vec<f64> = fuse(&h2, &z, &p).unwrap().iter().zip(fuse(&h, &z, &p).unwrap()).map(|(a, b)| a - b).collect();
    let wsh = p.ws.dot(&Array1::from(h.clone()));
    for (a, b) in diff.iter().zip(wsh.iter()) {
        assert!((a - b).abs() < 1e-12);
    }

    p.ws = Array2::eye(4);
    p.wt.fill(0.0);
    p.b.fill(0.0);
    assert_eq!(fuse(&h, &z, &p).unwrap(), h);
    assert!(fuse(&h[..3], &z, &p).is_err());
}

#[test]
fn zero_features_zero_bias_give_zero() {
    let cfg = EncoderConfig { input_dim: 3, ..Default::default() };
    let params = EncoderParams::new(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(8));
    let g = BuildingGraph::from_weights(vec![0], Array2::from_elem((1, 1), 1.0), 0.0, bw()).unwrap();
    let mut hist = StateHistory::new(cfg.window);
    hist.push(vec![0.0; 3]);
    let r = encode(&g, &[hist], &params).unwrap();
    assert!(r.iter().all(|v| *v == 0.0));
}

#[test]
fn encode_is_deterministic() {
    let cfg = small_config(Activation::Relu);
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = EncoderParams::new(cfg.clone(), &mut rng);
        let g = random_graph(3, &mut rng);
        let table = random_table(3, cfg.input_dim, 6, &mut rng);
        encode_steps(&params, &g, &table, &[2, 5]).unwrap().0
    };
    assert_eq!(run(), run());
}

fn permuted_graph(g: &BuildingGraph, perm: &[usize]) -> BuildingGraph {
    let n = perm.len();
    let w = Array2::from_shape_fn((n, n), |(a, b)| g.weights[[perm[a], perm[b]]]);
    BuildingGraph::from_weights((0..n).collect(), w, 0.0, bw()).unwrap()
}

fn check_equivariance(seed: u64, perm: &[usize]) {
    let n = perm.len();
    let cfg = small_config(Activation::Tanh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = EncoderParams::new(cfg.clone(), &mut rng);
    let g = random_graph(n, &mut rng);
    let table = random_table(n, cfg.input_dim, 7, &mut rng);
    let mut ptable = FeatureTable::new(n, cfg.input_dim);
    for t in 0..table.steps() {
        let step: Vec<Vec<f64>> = perm.iter().map(|&i| table.row(t, i).to_vec()).collect();
        ptable.push_step(&step).unwrap();
    }
    let (r, _) = encode_steps(&params, &g, &table, &[6]).unwrap();
    let (pr, _) = encode_steps(&params, &permuted_graph(&g, perm), &ptable, &[6]).unwrap();
    for (a, &i) in perm.iter().enumerate() {
        for c in 0..cfg.output_dim {
            assert!((pr[[a, c]] - r[[i, c]]).abs() < 1e-10);
        }
    }
}

#[test]
fn encode_is_permutation_equivariant() {
    check_equivariance(10, &[2, 0, 3, 1]);
}

#[test]
fn streaming_matches_batched() {
    let cfg = small_config(Activation::Relu);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = EncoderParams::new(cfg.clone(), &mut rng);
    let g = random_graph(3, &mut rng);
    let full = random_table(3, cfg.input_dim, 9, &mut rng);
    let (batched, _) = encode_steps(&params, &g, &full, &(0..9).collect::<Vec<_>>()).unwrap();
    let mut stream = StreamingEncoder::new(&params);
    let mut grow = FeatureTable::new(3, cfg.input_dim);
    for t in 0..9 {
        let step: Vec<Vec<f64>> = (0..3).map(|i| full.row(t, i).to_vec()).collect();
        grow.push_step(&step).unwrap();
        let r = stream.encode_latest(&params, &g, &grow).unwrap();
        for i in 0..3 {
            for c in 0..cfg.output_dim {
                assert!((r[[i, c]] - batched[[t * 3 + i, c]]).abs() < 1e-12);
            }
        }
    }
    let mut changed = params.clone();
    changed.b[0] += 1.0;
    assert!(matches!(stream.encode_latest(&changed, &g, &grow), Err(EncoderError::StaleCache)));
}

#[test]
fn encode_from_histories_matches_table_path() {
    let cfg = small_config(Activation::Relu);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let params = EncoderParams::new(cfg.clone(), &mut rng);
    let g = random_graph(3, &mut rng);
    let table = random_table(3, cfg.input_dim, 3, &mut rng);
    let mut hists = vec![StateHistory::new(cfg.window); 3];
    for t in 0..3 {
        for (i, h) in hists.iter_mut().enumerate() {
            h.push(table.row(t, i).to_vec());
        }
    }
    let r = encode(&g, &hists, &params).unwrap();
    let (expect, _) = encode_steps(&params, &g, &table, &[2]).unwrap();
    for (a, b) in r.iter().zip(expect.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

fn loss(r: &Array2<f64>, u: &Array2<f64>) -> f64 {
    (r * u).sum()
}

fn fd_check(activation: Activation, seed: u64) {
    let cfg = small_config(activation);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = EncoderParams::new(cfg.clone(), &mut rng);
    let g = random_graph(3, &mut rng);
    let table = random_table(3, cfg.input_dim, 8, &mut rng);
    let steps = [0, 3, 7];
    let (r, cache) = encode_steps(&params, &g, &table, &steps).unwrap();
    let u = random_matrix(r.nrows(), r.ncols(), &mut rng);
    let grads = encoder_backward(&params, &cache, &u).unwrap();

    let eps = 1e-5;
    let base = params.flatten();
    let analytic = grads.flatten();
    let mut offset = 0;
    let mut tensors = Vec::new();
    params.for_each(&mut |name, _, d| {
        tensors.push((name.to_string(), offset, d.len()));
        offset += d.len();
    });
    for (name, start, len) in tensors {
        let (mut num2, mut diff2, mut ana2) = (0.0, 0.0, 0.0);
        for idx in start..start + len {
            let mut p = params.clone();
            let mut flat = base.clone();
            flat[idx] = base[idx] + eps;
            p.assign_flat(&flat);
            let lp = loss(&encode_steps(&p, &g, &table, &steps).unwrap().0, &u);
            flat[idx] = base[idx] - eps;
            p.assign_flat(&flat);
            let lm = loss(&encode_steps(&p, &g, &table, &steps).unwrap().0, &u);
            let num = (lp - lm) / (2.0 * eps);
            num2 += num * num;
            ana2 += analytic[idx] * analytic[idx];
            diff2 += (num - analytic[idx]).powi(2);
        }
        let rel = diff2.sqrt() / (num2.sqrt() + ana2.sqrt()).max(1e-12);
        assert!(rel <= 1e-4, "{name}: relative error {rel:e}");
        assert!(ana2 > 0.0, "{name}: gradient identically zero");
    }
}

#[test]
fn backward_matches_finite_differences_tanh() {
    fd_check(Activation::Tanh, 13);
}

#[test]
fn backward_matches_finite_differences_relu() {
    fd_check(Activation::Relu, 14);
}

#[test]
fn zero_upstream_gives_zero_grads() {
    let cfg = small_config(Activation::Relu);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let params = EncoderParams::new(cfg.clone(), &mut rng);
    let g = random_graph(3, &mut rng);
    let table = random_table(3, cfg.input_dim, 5, &mut rng);
    let (r, cache) = encode_steps(&params, &g, &table, &[4]).unwrap();
    let grads = encoder_backward(&params, &cache, &Array2::zeros(r.raw_dim())).unwrap();
    assert_eq!(grads.squared_norm(), 0.0);
}

#[test]
fn fusion_gradients_have_closed_form() {
    let cfg = small_config(Activation::Relu);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let params = EncoderParams::new(cfg.clone(), &mut rng);
    let g = random_graph(3, &mut rng);
    let table = random_table(3, cfg.input_dim, 5, &mut rng);
    let (r, cache) = encode_steps(&params, &g, &table, &[4]).unwrap();
    let mut u = Array2::zeros(r.raw_dim());
    u[[1, 2]] = 1.0;
    let grads = encoder_backward(&params, &cache, &u).unwrap();
    assert_eq!(grads.b[2], 1.0);
    assert_eq!(grads.b.sum(), 1.0);
    // r[1,2] = Σ_c ws[2,c] h[1,c] + ..., so d/d ws[2,c] = h[1,c]
    let h = stems::encoder::gcn_layer(
        &stems::encoder::gcn_layer(
            &stems::encoder::gcn_layer(&table_rows(&table, 4), &g, &params.gcn[0], Activation::Relu).unwrap(),
            &g,
            &params.gcn[1],
            Activation::Relu,
        )
        .unwrap(),
        &g,
        &params.gcn[2],
        Activation::Relu,
    )
    .unwrap();
    for c in 0..cfg.hidden {
        assert!((grads.ws[[2, c]] - h[[1, c]]).abs() < 1e-12);
        assert_eq!(grads.ws[[0, c]], 0.0);
    }
}

fn table_rows(table: &FeatureTable, t: usize) -> Array2<f64> {
    Array2::from_shape_fn((table.n(), table.dim()), |(i, c)| table.row(t, i)[c])
}

#[test]
fn backward_detects_stale_cache() {
    let cfg = small_config(Activation::Relu);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut params = EncoderParams::new(cfg.clone(), &mut rng);
    let g = random_graph(3, &mut rng);
    let table = random_table(3, cfg.input_dim, 5, &mut rng);
    let (r, cache) = encode_steps(&params, &g, &table, &[4]).unwrap();
    params.gcn[0][[0, 0]] += 1e-3;
    let u = Array2::ones(r.raw_dim());
    assert!(matches!(encoder_backward(&params, &cache, &u), Err(EncoderError::StaleCache)));
    assert!(matches!(
        encoder_backward(&params, &cache, &Array2::ones((1, 1))),
        Err(EncoderError::StaleCache) | Err(EncoderError::Shape(_))
    ));
}

#[test]
fn attention_export_round_trips_bit_exact() {
    let cfg = small_config(Activation::Relu);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let params = EncoderParams::new(cfg.clone(), &mut rng);
    let table = random_table(3, cfg.input_dim, 7, &mut rng);
    let mut hists = vec![StateHistory::new(cfg.window); 3];
    for t in 0..7 {
        for (i, h) in hists.iter_mut().enumerate() {
            h.push(table.row(t, i).to_vec());
        }
    }
    let weights = attention_weights(&hists, &params);
    let mut buf = Vec::new();
    write_attention_csv(&mut buf, &[10, 11, 12], &weights).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("building_id,head,offset,weight\n"));
    let rows = read_attention_csv(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), 3 * cfg.heads * (cfg.window + 1));
    for row in &rows {
        let i = row.building_id - 10;
        let k = (row.offset + cfg.window as i64) as usize;
        assert_eq!(row.weight.to_bits(), weights[i][row.head][k].to_bits());
    }
    for i in 0..3 {
        for h in 0..cfg.heads {
            let s: f64 = rows.iter().filter(|r| r.building_id == 10 + i && r.head == h).map(|r| r.weight).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn attention_rows_are_distributions(seed in 0u64..10_000, len in 1usize..12, scale in 0.1f64..20.0) {
        let cfg = EncoderConfig { input_dim: 4, window: 6, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = EncoderParams::new(cfg.clone(), &mut rng);
        let mut hist = StateHistory::new(cfg.window);
        for _ in 0..len {
            hist.push((0..4).map(|_| rng.random_range(-scale..scale)).collect());
        }
        let (z, weights) = temporal_attention(&hist, &params);
        prop_assert!(z.iter().all(|v| v.is_finite()));
        for w in weights {
            prop_assert!(w.iter().all(|a| *a >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn equivariance_under_random_permutations(seed in 0u64..1000, perm in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle()) {
        check_equivariance(seed, &perm);
    }
}
