mod common;

use common::{toy_scene, State};
use tpsgtr_core::decoder::{Arch, Dims, ModelParams, ModelSpec, Param};
use tpsgtr_core::numerics::Tensor;
use tpsgtr_core::scenegraph::SceneRecord;
use tpsgtr_core::training::*;
use tpsgtr_core::vocab::{Vocab, EOS_ID};
use tpsgtr_core::Error;

fn small_dims(rec: &SceneRecord, tags: usize, vocab: usize) -> Dims {
    let d = rec.triplet_dim().unwrap();
    Dims {
        feature: d,
        global: d,
        tags,
        embed: 8,
        hidden: 16,
        attention: 16,
        vocab,
        ..Dims::default()
    }
}

fn one_scene(arch: Arch, seed: u64) -> (SceneRecord, Vocab, ModelSpec) {
    let (rec, cfg) = toy_scene(8, 3, seed, 0);
    let vocab = Vocab::from_records(core::slice::from_ref(&rec));
    let spec = ModelSpec::new(arch, small_dims(&rec, cfg.tag_dim(), vocab.len()));
    (rec, vocab, spec)
}

#[test]
fn loss_is_mean_of_stepwise_log_probs() {
    for arch in Arch::ALL {
        for seed in 0..4 {
            let (rec, cfg) = toy_scene(8, 3, seed, 1);
            let spec = ModelSpec::new(arch, small_dims(&rec, cfg.tag_dim(), 20));
            let p = ModelParams::uniform(spec, seed, 0.7).unwrap();
            let caption = [7, 12];
            let mut s = State::zero(16);
            let mut nll = 0.0;
            for &w in caption.iter().chain(&[EOS_ID]) {
                let o = common::step(&p, &rec, &s);
                nll -= o.log_probs[w];
                s = State { prev: w, ..o.state };
            }
            let got = sequence_loss(&p, &rec, &caption).unwrap();
            assert!((got - nll / 3.0).abs() < 1e-12, "{got} vs {}", nll / 3.0);
        }
    }
}

#[test]
fn zero_model_loss_is_log_vocab() {
    for arch in Arch::ALL {
        let (rec, _, spec) = one_scene(arch, 3);
        let p = ModelParams::zeros(spec).unwrap();
        let v = spec.dims.vocab as f64;
        for caption in [&[][..], &[2, 3, 4][..]] {
            assert!((sequence_loss(&p, &rec, caption).unwrap() - v.ln()).abs() < 1e-14);
        }
    }
}

#[test]
fn certain_model_has_zero_loss() {
    for arch in Arch::ALL {
        let (rec, _, spec) = one_scene(arch, 3);
        let mut p = ModelParams::zeros(spec).unwrap();
        // saturate every gate of the second cell so h2 = tanh(1) > 0
        p.get_mut(Param::Lstm2Bias).data_mut().fill(1e3);
        let h = spec.dims.hidden;
        p.get_mut(Param::Output).data_mut()[EOS_ID * h..(EOS_ID + 1) * h].fill(1e3);
        assert_eq!(sequence_loss(&p, &rec, &[]).unwrap(), 0.0);
    }
}

#[test]
fn unknown_token_is_rejected() {
    let (rec, vocab, spec) = one_scene(Arch::Stdbu, 1);
    let p = ModelParams::zeros(spec).unwrap();
    assert!(matches!(
        sequence_loss(&p, &rec, &[vocab.len()]),
        Err(Error::TokenOutOfRange { .. })
    ));
    assert!(matches!(vocab.encode(&["zebra-unicorn".into()]), Err(Error::UnknownToken(_))));
}

/// Textbook Adam on a single scalar.
fn scalar_adam(mut x: f64, grad: impl Fn(f64) -> f64, steps: usize, cfg: &AdamConfig) -> Vec<f64> {
    let (mut m, mut v) = (0.0, 0.0);
    let mut out = Vec::new();
    for t in 1..=steps {
        let g = grad(x);
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        let mh = m / (1.0 - cfg.beta1.powi(t as i32));
        let vh = v / (1.0 - cfg.beta2.powi(t as i32));
        x -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        out.push(x);
    }
    out
}

#[test]
fn adam_tracks_scalar_reference_on_quadratic() {
    let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
    let grad = |x: f64| 2.0 * (x - 3.0);
    let want = scalar_adam(-1.0, grad, 3, &cfg);
    let (mut p, mut m, mut v) = ([-1.0], [0.0], [0.0]);
    for (t, w) in want.iter().enumerate() {
        let g = [grad(p[0])];
        adam_slice(&mut p, &g, &mut m, &mut v, t as u64 + 1, &cfg);
        assert!((p[0] - w).abs() < 1e-15, "step {t}: {} vs {w}", p[0]);
    }
}

fn grads_like(p: &ModelParams, f: impl Fn(usize) -> f64) -> ParamGrads {
    p.iter()
        .map(|(k, t)| {
            let data = (0..t.len()).map(&f).collect();
            (k, Tensor::new(t.shape().to_vec(), data).unwrap())
        })
        .collect()
}

#[test]
fn adam_zero_gradient_leaves_params() {
    let (_, _, spec) = one_scene(Arch::Tdbu, 1);
    let mut p = ModelParams::init(spec, 4).unwrap();
    let before = p.clone();
    let mut mo = Moments::new(&p);
    for _ in 0..3 {
        adam_update(&mut p, &grads_like(&before, |_| 0.0), &mut mo, &AdamConfig::default()).unwrap();
    }
    assert_eq!(p, before);
}

#[test]
fn adam_first_step_is_signed_lr() {
    let (_, _, spec) = one_scene(Arch::Stdbu, 1);
    let mut p = ModelParams::init(spec, 4).unwrap();
    let before = p.clone();
    let g = grads_like(&p, |i| ((i as f64) * 0.731 + 0.2).sin() * 10f64.powi((i % 5) as i32 - 2));
    let cfg = AdamConfig::default();
    let mut mo = Moments::new(&p);
    adam_update(&mut p, &g, &mut mo, &cfg).unwrap();
    for (k, t) in p.iter() {
        for ((a, b), gi) in t.data().iter().zip(before.get(k).data()).zip(g[&k].data()) {
            let step = a - b;
            let expect = -cfg.lr * gi.signum();
            // the only departure is the denominator's epsilon
            let slack = cfg.lr * cfg.eps / gi.abs();
            assert!((step - expect).abs() <= slack * 1.001 + 1e-18, "{k:?}: {step} vs {expect}");
        }
    }
}

#[test]
fn adam_rejects_misaligned_gradients() {
    let (_, _, spec) = one_scene(Arch::Tdbu, 1);
    let mut p = ModelParams::init(spec, 4).unwrap();
    let mut g = grads_like(&p, |_| 1.0);
    g.remove(&Param::Output);
    let mut mo = Moments::new(&p);
    assert!(matches!(adam_update(&mut p, &g, &mut mo, &AdamConfig::default()), Err(Error::Contract(_))));
}

#[test]
fn clipping_keeps_direction() {
    let (_, _, spec) = one_scene(Arch::Stdbu, 1);
    let p = ModelParams::init(spec, 4).unwrap();
    let g = grads_like(&p, |i| ((i as f64) * 1.37).cos() * 3.0);
    let norm = global_norm(&g);
    let mut c = g.clone();
    assert_eq!(clip_gradients(&mut c, norm / 7.0), norm);
    assert!((global_norm(&c) - norm / 7.0).abs() < 1e-12 * norm);
    let dot: f64 = g.values().zip(c.values()).map(|(a, b)| a.dot(b).unwrap()).sum();
    let cosine = dot / (norm * global_norm(&c));
    assert!((cosine - 1.0).abs() < 1e-12);

    let mut same = g.clone();
    clip_gradients(&mut same, norm * 2.0);
    assert_eq!(same, g);
}

#[test]
fn small_step_lowers_example_loss() {
    for arch in Arch::ALL {
        for seed in 1..=10 {
            let (rec, vocab, spec) = one_scene(arch, seed);
            let caption = vocab.encode(&rec.captions[0]).unwrap();
            let mut p = ModelParams::init(spec, seed).unwrap();
            let enc = tpsgtr_core::decoder::scene_encodings(&rec, &spec).unwrap();
            let (before, _, g) = sequence_loss_and_grads(&p, &rec, &enc, &caption).unwrap();
            let cfg = AdamConfig { lr: 1e-5, ..AdamConfig::default() };
            let mut mo = Moments::new(&p);
            adam_update(&mut p, &g, &mut mo, &cfg).unwrap();
            let after = sequence_loss(&p, &rec, &caption).unwrap();
            assert!(after < before, "{arch:?} seed {seed}: {after} !< {before}");
        }
    }
}

fn small_corpus(n: usize) -> (Vec<SceneRecord>, Vocab, ModelSpec) {
    let (_, cfg) = toy_scene(8, 3, 1, 0);
    let cfg = tpsgtr_core::scenegraph::ToyWorldConfig {
        min_triplets: 1,
        ..cfg
    };
    let data = tpsgtr_core::scenegraph::generate_toy_world(&cfg, n).unwrap();
    let vocab = Vocab::from_records(&data);
    let spec = ModelSpec::new(Arch::Stdbu, small_dims(&data[0], cfg.tag_dim(), vocab.len()));
    (data, vocab, spec)
}

#[test]
fn zero_rate_keeps_loss_constant() {
    let (data, vocab, spec) = small_corpus(6);
    for arch in Arch::ALL {
        let mut cfg = TrainConfig::new(ModelSpec { arch, ..spec });
        cfg.adam.lr = 0.0;
        cfg.epochs = 4;
        let out = train(&data, &vocab, &cfg, |_, _| {}).unwrap();
        assert!(out.losses.iter().all(|&l| l == out.losses[0]), "{:?}", out.losses);
        let start = ModelParams::init(cfg.spec, cfg.seed).unwrap();
        assert_eq!(out.checkpoint.params, start);
        assert_eq!(out.losses[0], corpus_loss(&start, &data, &vocab).unwrap());
    }
}

#[test]
fn training_is_deterministic() {
    let (data, vocab, spec) = small_corpus(5);
    let mut cfg = TrainConfig::new(spec);
    cfg.epochs = 3;
    let mut seen = Vec::new();
    let a = train(&data, &vocab, &cfg, |e, l| seen.push((e, l))).unwrap();
    let b = train(&data, &vocab, &cfg, |_, _| {}).unwrap();
    assert_eq!(a, b);
    assert_eq!(seen, a.losses.iter().enumerate().map(|(i, &l)| (i + 1, l)).collect::<Vec<_>>());
    cfg.seed = 2;
    assert_ne!(train(&data, &vocab, &cfg, |_, _| {}).unwrap().checkpoint.params, a.checkpoint.params);
}

#[test]
fn inconsistent_inputs_fail_before_training() {
    let (data, vocab, spec) = small_corpus(3);
    let mut called = false;
    let mut cfg = TrainConfig::new(spec);
    cfg.spec.dims.vocab += 1;
    assert!(matches!(train(&data, &vocab, &cfg, |_, _| called = true), Err(Error::Mismatch(_))));
    let mut bad = data.clone();
    bad[2].captions[0].push("never-seen".into());
    assert!(train(&bad, &vocab, &TrainConfig::new(spec), |_, _| called = true).is_err());
    assert!(train(&[], &vocab, &TrainConfig::new(spec), |_, _| called = true).is_err());
    let mut cfg = TrainConfig::new(spec);
    cfg.clip_norm = Some(0.0);
    assert!(train(&data, &vocab, &cfg, |_, _| called = true).is_err());
    assert!(!called);
}

#[test]
fn huge_rate_reports_divergence() {
    let (data, vocab, spec) = small_corpus(4);
    let mut cfg = TrainConfig::new(spec);
    cfg.adam.lr = 1e200;
    cfg.clip_norm = None;
    cfg.epochs = 30;
    match train(&data, &vocab, &cfg, |_, _| {}) {
        Err(Error::Divergence { epoch }) => assert!(epoch >= 1),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.losses)),
    }
}

#[test]
fn single_example_overfits() {
    let cfg = tpsgtr_core::scenegraph::ToyWorldConfig {
        seed: 2,
        ..Default::default()
    };
    let rec = tpsgtr_core::scenegraph::ToyWorld::new(cfg.clone()).unwrap().scene(0);
    let rec = SceneRecord {
        captions: vec![rec.captions[0].clone()],
        ..rec
    };
    let vocab = Vocab::from_records(core::slice::from_ref(&rec));
    for arch in Arch::ALL {
        let dims = Dims {
            feature: cfg.feature_dim,
            global: cfg.feature_dim,
            tags: cfg.tag_dim(),
            vocab: vocab.len(),
            ..Dims::default()
        };
        let mut tc = TrainConfig::new(ModelSpec::new(arch, dims));
        tc.epochs = 500;
        let data = [rec.clone()];
        let out = train(&data, &vocab, &tc, |_, _| {}).unwrap();
        let last = *out.losses.last().unwrap();
        assert_eq!(out.losses.len(), 500);
        assert!(last < 0.05, "{arch:?}: {last}");
        let words = tpsgtr_core::decoder::decode_greedy(&out.checkpoint.params, &data[0], 32).unwrap();
        assert_eq!(vocab.decode(&words).unwrap(), data[0].captions[0]);
    }
}
