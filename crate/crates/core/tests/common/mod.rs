//! Loop-by-loop transcription of the decoder step, kept apart from the
//! tape so the library can be checked against it.
#![allow(dead_code)]

use tpsgtr_core::decoder::{Arch, Dims, ModelParams, ModelSpec, Param, Pooling};
use tpsgtr_core::numerics::Tensor;
use tpsgtr_core::scenegraph::{SceneRecord, ToyWorld, ToyWorldConfig};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn matvec(m: &Tensor, x: &[f64]) -> Vec<f64> {
    let (r, c) = (m.shape()[0], m.shape()[1]);
    assert_eq!(c, x.len());
    (0..r)
        .map(|i| (0..c).map(|j| m.data()[i * c + j] * x[j]).sum())
        .collect()
}

pub fn hadamard_column(order: usize, col: usize) -> Vec<f64> {
    let s = (order as f64).sqrt();
    (0..order)
        .map(|i| if (i & col).count_ones().is_multiple_of(2) { 1.0 / s } else { -1.0 / s })
        .collect()
}

/// Row-major `d × R` matrix `Σ_slot filler ⊗ role`, flattened.
pub fn encode(rec: &SceneRecord, dims: &Dims) -> Vec<Vec<f64>> {
    let roles: Vec<Vec<f64>> = dims
        .role_columns
        .iter()
        .map(|&c| hadamard_column(dims.roles, c))
        .collect();
    rec.triplets
        .iter()
        .map(|t| {
            let fillers = [t.subject.data(), t.predicate.data(), t.object.data()];
            let mut out = vec![0.0; dims.feature * dims.roles];
            for (f, r) in fillers.iter().zip(&roles) {
                for i in 0..dims.feature {
                    for j in 0..dims.roles {
                        out[i * dims.roles + j] += f[i] * r[j];
                    }
                }
            }
            out
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct State {
    pub h1: Vec<f64>,
    pub c1: Vec<f64>,
    pub h2: Vec<f64>,
    pub c2: Vec<f64>,
    pub prev: usize,
}

impl State {
    pub fn zero(h: usize) -> Self {
        State {
            h1: vec![0.0; h],
            c1: vec![0.0; h],
            h2: vec![0.0; h],
            c2: vec![0.0; h],
            prev: 0,
        }
    }
}

pub fn lstm(wi: &Tensor, wr: &Tensor, b: &Tensor, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let a = matvec(wi, x);
    let r = matvec(wr, h);
    let z: Vec<f64> = (0..4 * n).map(|k| a[k] + r[k] + b.data()[k]).collect();
    let mut h2 = vec![0.0; n];
    let mut c2 = vec![0.0; n];
    for k in 0..n {
        let i = sigmoid(z[k]);
        let f = sigmoid(z[n + k]);
        let g = z[2 * n + k].tanh();
        let o = sigmoid(z[3 * n + k]);
        c2[k] = f * c[k] + i * g;
        h2[k] = o * c2[k].tanh();
    }
    (h2, c2)
}

pub struct Step {
    pub log_probs: Vec<f64>,
    pub state: State,
    pub weights: Vec<f64>,
    pub pooled: Vec<f64>,
}

/// One step of either decoder, every product spelled out.
pub fn step(p: &ModelParams, rec: &SceneRecord, s: &State) -> Step {
    let dims = *p.dims();
    let arch = p.arch();
    let enc = encode(rec, &dims);

    let top: Vec<f64> = match arch {
        Arch::Tdbu => rec.global_feature.as_ref().unwrap().data().to_vec(),
        Arch::Stdbu => {
            let d = dims.feature;
            let mut acc = vec![0.0; 3 * d];
            for t in &rec.triplets {
                for i in 0..d {
                    acc[i] += t.subject.data()[i];
                    acc[d + i] += t.predicate.data()[i];
                    acc[2 * d + i] += t.object.data()[i];
                }
            }
            acc
        }
    };
    let we = p.get(Param::WordEmbed);
    let emb = &we.data()[s.prev * dims.embed..(s.prev + 1) * dims.embed];
    let x1: Vec<f64> = s.h2.iter().chain(&top).chain(emb).copied().collect();
    let (h1, c1) = lstm(
        p.get(Param::Lstm1Input),
        p.get(Param::Lstm1Recurrent),
        p.get(Param::Lstm1Bias),
        &x1,
        &s.h1,
        &s.c1,
    );

    let n = enc.len();
    let weights: Vec<f64> = match p.spec().pooling {
        Pooling::Mean => vec![1.0 / n as f64; n],
        Pooling::Attention => {
            let q = matvec(p.get(Param::AttnHidden), &h1);
            let scores: Vec<f64> = enc
                .iter()
                .map(|e| {
                    let z: Vec<f64> = matvec(p.get(Param::AttnEncoding), e)
                        .iter()
                        .zip(&q)
                        .map(|(a, b)| (a + b).tanh())
                        .collect();
                    matvec(p.get(Param::AttnScore), &z)[0]
                })
                .collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ex: Vec<f64> = scores.iter().map(|a| (a - m).exp()).collect();
            let tot: f64 = ex.iter().sum();
            ex.iter().map(|e| e / tot).collect()
        }
    };
    let mut pooled = vec![0.0; dims.encoding()];
    for (w, e) in weights.iter().zip(&enc) {
        for k in 0..pooled.len() {
            pooled[k] += w * e[k];
        }
    }

    let (top_hidden, recurrent) = match arch {
        Arch::Tdbu => (h1.clone(), s.h2.clone()),
        Arch::Stdbu => {
            let g1 = matvec(p.get(Param::SemanticGate1), rec.tags.data());
            let g2 = matvec(p.get(Param::SemanticGate2), rec.tags.data());
            let p1 = matvec(p.get(Param::Project1), &h1);
            let p2 = matvec(p.get(Param::Project2), &s.h2);
            (
                g1.iter().zip(&p1).map(|(a, b)| a * b).collect(),
                g2.iter().zip(&p2).map(|(a, b)| a * b).collect(),
            )
        }
    };
    let x2: Vec<f64> = top_hidden.iter().chain(&pooled).copied().collect();
    let (h2, c2) = lstm(
        p.get(Param::Lstm2Input),
        p.get(Param::Lstm2Recurrent),
        p.get(Param::Lstm2Bias),
        &x2,
        &recurrent,
        &s.c2,
    );
    let logits = matvec(p.get(Param::Output), &h2);
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    Step {
        log_probs: logits.iter().map(|z| z - lse).collect(),
        state: State {
            h1,
            c1,
            h2,
            c2,
            prev: s.prev,
        },
        weights,
        pooled,
    }
}

/// Toy scene with exactly `triplets` triplets and feature dimension `d`.
pub fn toy_scene(d: usize, triplets: usize, seed: u64, index: u64) -> (SceneRecord, ToyWorldConfig) {
    let cfg = ToyWorldConfig {
        feature_dim: d,
        min_triplets: triplets,
        max_triplets: triplets,
        seed,
        ..ToyWorldConfig::default()
    };
    (ToyWorld::new(cfg.clone()).unwrap().scene(index), cfg)
}

/// The small model used across decoder tests: d=8, d_h=16, vocab=20.
pub fn toy_model(arch: Arch, cfg: &ToyWorldConfig, seed: u64) -> ModelParams {
    let dims = Dims {
        feature: cfg.feature_dim,
        global: cfg.feature_dim,
        tags: cfg.tag_dim(),
        embed: 8,
        hidden: 16,
        attention: 16,
        vocab: 20,
        ..Dims::default()
    };
    ModelParams::init(ModelSpec::new(arch, dims), seed).unwrap()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
