use edl_core::backend::{Backend, CkksBackend, ReferenceBackend, Tensor};
use edl_core::ckks::{decode, encode, keygen, CkksContext, Decryptor, Encryptor, HeError, HeParams};
use edl_core::nn::{
    backward, mse, sgd_update, sigmoid_approx, sigmoid_true, train, ActivationLayer, ActivationRegistry, ComputeGraph,
    Conv1d, Dense, Layer, ModelFile, NnError, Sample, TrainOptions, TrainState, APPROX_MAX_DEVIATION,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Encrypted {
    params: HeParams,
    backend: CkksBackend,
    enc: Encryptor,
    dec: Decryptor,
    rng: ChaCha20Rng,
}

impl Encrypted {
    fn new(levels: usize) -> Self {
        let params = HeParams::insecure_test(levels).unwrap();
        let ctx = CkksContext::new(&params).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let keys = keygen(&params, &mut rng).unwrap();
        Self {
            backend: CkksBackend::new(&params, Some(&keys.relin_key)).unwrap(),
            enc: Encryptor::new(ctx.clone(), &keys.public_key).unwrap(),
            dec: Decryptor::new(ctx, &keys.secret_key).unwrap(),
            params,
            rng,
        }
    }

    fn encrypt(&mut self, slots: &[f64]) -> Tensor {
        let ctx = CkksContext::new(&self.params).unwrap();
        let pt = encode(&ctx, slots, self.params.scale(), self.params.max_level()).unwrap();
        Tensor::Encrypted(self.enc.encrypt(&pt, &mut self.rng).unwrap())
    }

    fn decrypt(&self, t: &Tensor) -> Vec<f64> {
        let ctx = CkksContext::new(&self.params).unwrap();
        decode(&ctx, &self.dec.decrypt(&t.clone().into_ciphertext().unwrap()).unwrap()).unwrap()
    }

    fn encrypt_window(&mut self, graph: &ComputeGraph, window: &[Vec<f64>]) -> Vec<Tensor> {
        let slots = self.params.slot_count();
        window
            .iter()
            .map(|x| {
                let v = graph.input_slots(x, slots).unwrap();
                self.encrypt(&v)
            })
            .collect()
    }
}

fn clear_window(r: &ReferenceBackend, graph: &ComputeGraph, window: &[Vec<f64>]) -> Vec<Tensor> {
    let slots = r.params().slot_count();
    window.iter().map(|x| r.fresh(&graph.input_slots(x, slots).unwrap()).unwrap()).collect()
}

fn activation(kind: &str) -> Layer {
    Layer::Activation(ActivationLayer {
        name: "activation".into(),
        op: ActivationRegistry::default().get(kind).unwrap(),
    })
}

fn conv(kernel: Vec<Vec<f64>>, bias: Vec<f64>) -> Layer {
    Layer::Conv1d(Conv1d { name: "conv".into(), kernel, bias })
}

fn dense(weights: Vec<f64>, bias: Vec<f64>) -> Layer {
    Layer::Dense(Dense { name: "dense".into(), weights, bias })
}

#[test]
fn approximation_bound_matches_grid_oracle() {
    let mut worst: f64 = 0.0;
    for i in -500..=500 {
        let x = i as f64 / 100.0;
        let t = 1.0 / (1.0 + f64::exp(-x));
        let p = 0.5 + 0.197 * x - 0.004 * x * x * x;
        worst = worst.max((t - p).abs());
    }
    assert!((worst - APPROX_MAX_DEVIATION).abs() < 1e-15, "{worst}");
    for i in -500..=500 {
        let x = i as f64 / 100.0;
        assert!((sigmoid_true(x) - sigmoid_approx(x)).abs() <= APPROX_MAX_DEVIATION);
    }
}

#[test]
fn encrypted_activation_matches_polynomial() {
    let mut e = Encrypted::new(3);
    let slots = e.params.slot_count();
    let xs: Vec<f64> = (0..slots).map(|_| e.rng.random_range(-1.0..1.0)).collect();
    let ct = e.encrypt(&xs);
    let act = ActivationRegistry::default().get("sigmoid-approx").unwrap();
    let out = act.apply(&e.backend, &ct).unwrap();
    assert_eq!(out.level(), ct.level() - 3);
    let got = e.decrypt(&out);
    for (x, y) in xs.iter().zip(&got) {
        assert!((sigmoid_approx(*x) - y).abs() < 1e-2);
    }
    let r = ReferenceBackend::new(&e.params).unwrap();
    let clear = act.apply(&r, &r.fresh(&xs).unwrap()).unwrap();
    assert_eq!(clear.level(), out.level());
    assert_eq!(clear.scale(), out.scale());
}

#[test]
fn true_sigmoid_refused_on_every_backend() {
    let graph = ComputeGraph::new(vec![conv(vec![vec![1.0]], vec![0.0]), activation("sigmoid")]).unwrap();
    let r = ReferenceBackend::new(&HeParams::insecure_test(2).unwrap()).unwrap();
    let err = graph.forward(&r, &clear_window(&r, &graph, &[vec![0.2]])).unwrap_err();
    assert!(matches!(err, NnError::UnsupportedOnEncrypted { .. }), "{err}");
    assert!(graph.depth_budget().is_err());
}

#[test]
fn convolution_examples() {
    let mut e = Encrypted::new(2);
    let r = ReferenceBackend::new(&e.params).unwrap();
    let g = ComputeGraph::new(vec![conv(vec![vec![1.0], vec![0.0], vec![-1.0]], vec![0.0])]).unwrap();
    let window = vec![vec![1.0], vec![2.0], vec![3.0]];
    assert_eq!(g.predict(&window).unwrap(), -2.0);
    let input = e.encrypt_window(&g, &window);
        let enc = g.forward(&e.backend, &input).unwrap();
    assert!((e.decrypt(&enc.output)[0] + 2.0).abs() < 1e-3);
    let clear = g.forward(&r, &clear_window(&r, &g, &window)).unwrap();
    assert_eq!(clear.output.as_clear().unwrap().values()[0], -2.0);
    assert_eq!(enc.trace.last().unwrap().level, e.params.max_level() - 1);

    let zero = ComputeGraph::new(vec![conv(vec![vec![0.0, 0.0]; 3], vec![0.3, 0.3])]).unwrap();
    let input = e.encrypt_window(&zero, &vec![vec![0.7, 0.1]; 3]);
    let out = zero.forward(&e.backend, &input).unwrap();
    let got = e.decrypt(&out.output);
    assert!((got[0] - 0.3).abs() < 1e-3 && (got[1] - 0.3).abs() < 1e-3);
}

#[test]
fn dense_example() {
    let mut e = Encrypted::new(2);
    let g = ComputeGraph::new(vec![conv(vec![vec![1.0, 1.0]], vec![0.0, 0.0]), dense(vec![0.5, 0.5], vec![0.1, 0.1])])
        .unwrap();
    let input = e.encrypt_window(&g, &[vec![0.2, 0.4]]);
    let out = g.forward(&e.backend, &input).unwrap();
    let got = e.decrypt(&out.output);
    assert!((got[0] - 0.2).abs() < 1e-3 && (got[1] - 0.3).abs() < 1e-3, "{:?}", &got[..2]);
    let cache = g.forward_plain(&[vec![0.2, 0.4]]).unwrap();
    assert!((cache.output()[0] - 0.2).abs() < 1e-15 && (cache.output()[1] - 0.3).abs() < 1e-15);
}

#[test]
fn constant_through_activation() {
    let c = 0.8;
    let g = ComputeGraph::new(vec![conv(vec![vec![0.0]; 3], vec![c]), activation("sigmoid-approx")]).unwrap();
    let r = ReferenceBackend::new(&HeParams::insecure_test(4).unwrap()).unwrap();
    let out = g.forward(&r, &clear_window(&r, &g, &vec![vec![0.4]; 3])).unwrap();
    assert!((out.output.as_clear().unwrap().values()[0] - sigmoid_approx(c)).abs() < 1e-15);
}

#[test]
fn reference_architecture_level_trace_and_sentinel() {
    let mut e = Encrypted::new(5);
    let g = ComputeGraph::reference(2, 3).unwrap();
    assert_eq!(g.depth_budget().unwrap(), 5);
    let window = vec![vec![0.1, 0.9], vec![0.5, 0.3], vec![0.7, 0.2]];
    let input = e.encrypt_window(&g, &window);
    let out = g.forward(&e.backend, &input).unwrap();
    let levels: Vec<(String, usize)> = out.trace.iter().map(|t| (t.node.clone(), t.level)).collect();
    let expected = [("input", 5), ("conv", 4), ("activation", 1), ("dense", 0)];
    assert_eq!(levels, expected.map(|(n, l)| (n.to_string(), l)).to_vec());
    for t in &out.trace {
        assert!((t.scale / e.params.scale() - 1.0).abs() < 0.01, "{t:?}");
    }
    let got = e.decrypt(&out.output);
    assert!((g.read_prediction(&got) - g.predict(&window).unwrap()).abs() < 1e-2);
    assert!((got[e.params.slot_count() - 1] - g.sentinel_output()).abs() < 1e-3);
}

#[test]
fn depth_overflow_names_the_node() {
    let mut e = Encrypted::new(4);
    let g = ComputeGraph::reference(1, 3).unwrap();
    let window = vec![vec![0.3]; 3];
    let enc_in = e.encrypt_window(&g, &window);
    match g.forward(&e.backend, &enc_in).unwrap_err() {
        NnError::DepthExceeded { node, required, available } => {
            assert_eq!((node.as_str(), required, available), ("dense", 5, 4));
        }
        other => panic!("{other}"),
    }
    let r = ReferenceBackend::new(&e.params).unwrap();
    let clear_in = clear_window(&r, &g, &window);
    let runtime = |b: &dyn Backend, w: &[Tensor]| match g.evaluate(b, w).unwrap_err() {
        NnError::Node { node, source: HeError::OutOfLevels { op } } => (node, op),
        other => panic!("{other}"),
    };
    assert_eq!(runtime(&e.backend, &enc_in), runtime(&r, &clear_in));
    assert_eq!(runtime(&r, &clear_in).0, "dense");
}

#[test]
fn encrypted_forward_agrees_with_reference() {
    let mut e = Encrypted::new(5);
    let r = ReferenceBackend::new(&e.params).unwrap();
    let g = ComputeGraph::reference(4, 9).unwrap();
    for _ in 0..10 {
        let window: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| e.rng.random_range(0.0..1.0)).collect()).collect();
        let input = e.encrypt_window(&g, &window);
        let enc = g.forward(&e.backend, &input).unwrap();
        let clear = g.forward(&r, &clear_window(&r, &g, &window)).unwrap();
        let got = e.decrypt(&enc.output);
        let want = clear.output.as_clear().unwrap().values();
        let err = got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-2, "{err}");
        assert!((g.read_prediction(want) - g.predict(&window).unwrap()).abs() < 1e-12);
    }
}

fn random_window(rng: &mut ChaCha20Rng, t: usize, f: usize) -> Vec<Vec<f64>> {
    (0..t).map(|_| (0..f).map(|_| rng.random_range(0.1..1.0)).collect()).collect()
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for seed in 0..5 {
        let mut g = ComputeGraph::reference(3, seed).unwrap();
        let window = random_window(&mut rng, 3, 3);
        let target = 0.4;
        let loss = |g: &ComputeGraph| (g.predict(&window).unwrap() - target).powi(2);
        let cache = g.forward_plain(&window).unwrap();
        let analytic = backward(&g, &cache, 2.0 * (cache.prediction() - target)).unwrap();
        let base = g.parameters();
        let names = g.parameter_names();
        assert_eq!(analytic.len(), base.len());
        let h = 1e-5;
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            g.set_parameters(&p).unwrap();
            let up = loss(&g);
            p[i] -= 2.0 * h;
            g.set_parameters(&p).unwrap();
            let down = loss(&g);
            let numeric = (up - down) / (2.0 * h);
            let rel = (analytic[i] - numeric).abs() / analytic[i].abs();
            assert!(rel < 1e-4, "{}: analytic {} numeric {numeric}", names[i], analytic[i]);
        }
        g.set_parameters(&base).unwrap();
    }
}

#[test]
fn backward_edge_cases() {
    let g = ComputeGraph::reference(2, 1).unwrap();
    let cache = g.forward_plain(&vec![vec![0.3, 0.6]; 3]).unwrap();
    assert!(backward(&g, &cache, 0.0).unwrap().iter().all(|&x| x == 0.0));

    let one = ComputeGraph::new(vec![conv(vec![vec![0.7]], vec![0.2]), activation("sigmoid-approx")]).unwrap();
    let cache = one.forward_plain(&[vec![0.5]]).unwrap();
    let grads = backward(&one, &cache, 1.5).unwrap();
    let z: f64 = 0.7 * 0.5 + 0.2;
    assert!((grads[1] - 1.5 * (0.197 - 0.012 * z * z)).abs() < 1e-15);

    let other = ComputeGraph::new(vec![conv(vec![vec![0.7]], vec![0.2])]).unwrap();
    let foreign = other.forward_plain(&[vec![0.5]]).unwrap();
    assert!(matches!(backward(&one, &foreign, 1.0), Err(NnError::MissingCache(_))));
}

#[test]
fn sgd_step() {
    let mut g = ComputeGraph::new(vec![conv(vec![vec![0.5]], vec![0.0])]).unwrap();
    let mut state = TrainState::new(0.1).unwrap();
    sgd_update(&mut g, &[0.1, 0.0], &mut state).unwrap();
    assert!((g.parameters()[0] - 0.49).abs() < 1e-15);
    assert_eq!(state.iteration, 1);
    sgd_update(&mut g, &[0.0, 0.0], &mut state).unwrap();
    assert!((g.parameters()[0] - 0.49).abs() < 1e-15);
    let err = sgd_update(&mut g, &[f64::NAN, 0.0], &mut state).unwrap_err();
    assert!(matches!(err, NnError::NonFiniteGradient { ref parameter, .. } if parameter == "conv.kernel[0][0]"));
    assert!(TrainState::new(0.0).is_err());
}

#[test]
fn small_step_descends() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut g = ComputeGraph::reference(3, 2).unwrap();
    let sample = Sample { window: random_window(&mut rng, 3, 3), target: 0.9 };
    let before = mse(&g, std::slice::from_ref(&sample)).unwrap();
    let cache = g.forward_plain(&sample.window).unwrap();
    let grads = backward(&g, &cache, 2.0 * (cache.prediction() - sample.target)).unwrap();
    sgd_update(&mut g, &grads, &mut TrainState::new(1e-3).unwrap()).unwrap();
    assert!(mse(&g, &[sample]).unwrap() < before);
}

#[test]
fn constant_target_drives_bias_to_logit() {
    let target: f64 = 0.8;
    let mut g = ComputeGraph::new(vec![
        conv(vec![vec![0.3]], vec![0.0]),
        activation("sigmoid"),
        dense(vec![1.0], vec![0.0]),
    ])
    .unwrap();
    let data = vec![Sample { window: vec![vec![0.0]], target }; 4];
    let opts = TrainOptions {
        epochs: 400,
        learning_rate: 0.5,
        seed: 1,
        frozen: vec!["dense".into()],
    };
    train(&mut g, &data, &opts).unwrap();
    let bias = g.parameters()[1];
    assert!((bias - (target / (1.0 - target)).ln()).abs() < 1e-3, "{bias}");
    assert_eq!(g.parameters()[0], 0.3);
}

fn series(seed: u64, n: usize) -> Vec<Sample> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let rows: Vec<[f64; 2]> = (0..n + 2).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
    rows.windows(3)
        .map(|w| Sample {
            window: w.iter().map(|r| r.to_vec()).collect(),
            target: 0.2 + 0.3 * w[2][0] + 0.2 * w[1][1] + 0.1 * w[0][0],
        })
        .collect()
}

#[test]
fn training_halves_the_loss_deterministically() {
    let data = series(5, 120);
    let opts = TrainOptions { epochs: 50, learning_rate: 0.05, seed: 3, frozen: vec![] };
    let run = || {
        let mut g = ComputeGraph::reference(2, 6).unwrap();
        let out = train(&mut g, &data, &opts).unwrap();
        (out.loss_curve, g.parameters())
    };
    let (curve, params) = run();
    assert_eq!(curve.len(), 51);
    assert!(curve[50] <= 0.5 * curve[0], "{} -> {}", curve[0], curve[50]);
    assert_eq!(run(), (curve, params));
    assert!(matches!(
        train(&mut ComputeGraph::reference(2, 6).unwrap(), &[], &opts),
        Err(NnError::EmptyDataset)
    ));
}

#[test]
fn model_file_round_trip() {
    let g = ComputeGraph::reference(3, 1).unwrap();
    let model = ModelFile::from_graph("yield-v1", &g, None);
    let text = model.to_json();
    let back = ModelFile::from_json(&text).unwrap();
    assert_eq!(back, model);
    let g2 = back.to_graph(&ActivationRegistry::default()).unwrap();
    assert_eq!(g2.parameters(), g.parameters());
    assert_eq!(g2.depth_budget().unwrap(), 5);

    let bad = text.replace("sigmoid-approx", "relu");
    assert!(ModelFile::from_json(&bad).unwrap().to_graph(&ActivationRegistry::default()).is_err());
    assert!(ModelFile::from_json(&text.replace("\"version\": 1", "\"version\": 2")).is_err());
    assert!(ModelFile::from_json("{").is_err());
}
