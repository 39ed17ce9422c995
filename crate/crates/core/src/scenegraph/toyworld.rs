use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{SceneRecord, MAX_TRIPLETS};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rolespace::Triplet;

const OBJECT_NAMES: &[&str] = &[
    "cat", "dog", "mat", "table", "man", "woman", "horse", "car", "tree", "ball", "chair",
    "bird", "boat", "cup", "plate", "bench", "kite", "bus", "train", "sign",
];

const PREDICATE_NAMES: &[&str] = &[
    "on", "near", "under", "holding", "behind", "riding", "beside", "above", "wearing",
    "watching", "inside", "carrying",
];

/// Parameters of the synthetic scene generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyWorldConfig {
    pub objects: usize,
    pub predicates: usize,
    /// Triplet feature dimension `d`.
    pub feature_dim: usize,
    pub min_triplets: usize,
    pub max_triplets: usize,
    /// Standard deviation of the Gaussian noise added to label embeddings.
    pub noise: f64,
    /// Probability that a triplet's features come from wrong labels while
    /// its caption stays correct.
    pub corruption_rate: f64,
    pub seed: u64,
}

impl Default for ToyWorldConfig {
    fn default() -> Self {
        ToyWorldConfig {
            objects: 10,
            predicates: 6,
            feature_dim: 32,
            min_triplets: 1,
            max_triplets: 5,
            noise: 0.1,
            corruption_rate: 0.0,
            seed: 1,
        }
    }
}

impl ToyWorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Argument(msg.into()));
        if self.objects == 0 || self.predicates == 0 || self.feature_dim == 0 {
            return bad("vocabulary sizes and feature dimension must be at least 1");
        }
        if self.min_triplets == 0 || self.min_triplets > self.max_triplets {
            return bad("triplet range must satisfy 1 <= min <= max");
        }
        if self.max_triplets > MAX_TRIPLETS {
            return bad("at most 15 triplets per scene");
        }
        if self.noise < 0.0 || !self.noise.is_finite() {
            return bad("noise scale must be finite and nonnegative");
        }
        if !(0.0..=1.0).contains(&self.corruption_rate) {
            return bad("corruption rate must lie in [0, 1]");
        }
        Ok(())
    }

    /// Dimension of the semantic tag vector: one slot per object and predicate label.
    pub fn tag_dim(&self) -> usize {
        self.objects + self.predicates
    }
}

/// Maps tag labels to positions of the semantic vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagVocab {
    labels: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl TagVocab {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Argument(alloc::format!("duplicate tag {l:?}")));
            }
        }
        Ok(TagVocab { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// Multi-hot vector over `tag_vocab` of every label carried by the record's triplets.
pub fn make_semantic_tags(rec: &SceneRecord, tag_vocab: &TagVocab) -> Result<Tensor> {
    if tag_vocab.is_empty() {
        return Err(Error::Argument("empty tag vocabulary".into()));
    }
    let mut v = vec![0.0; tag_vocab.len()];
    for t in &rec.triplets {
        for label in t.labels.iter().flatten() {
            let i = tag_vocab
                .index_of(label)
                .ok_or_else(|| Error::UnknownToken(label.clone()))?;
            v[i] = 1.0;
        }
    }
    Ok(Tensor::vector(v))
}

/// Label names and fixed label embeddings of one configuration.
#[derive(Debug, Clone)]
pub struct ToyWorld {
    cfg: ToyWorldConfig,
    object_names: Vec<String>,
    predicate_names: Vec<String>,
    object_embeddings: Vec<Vec<f64>>,
    predicate_embeddings: Vec<Vec<f64>>,
    tags: TagVocab,
}

fn names(pool: &[&str], n: usize, prefix: &str) -> Vec<String> {
    (0..n)
        .map(|i| match pool.get(i) {
            Some(s) => s.to_string(),
            None => alloc::format!("{prefix}{i}"),
        })
        .collect()
}

impl ToyWorld {
    pub fn new(cfg: ToyWorldConfig) -> Result<Self> {
        cfg.validate()?;
        let object_names = names(OBJECT_NAMES, cfg.objects, "object");
        let predicate_names = names(PREDICATE_NAMES, cfg.predicates, "relation");
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mut embed = |n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..cfg.feature_dim).map(|_| unit.sample(&mut rng)).collect())
                .collect()
        };
        let object_embeddings = embed(cfg.objects);
        let predicate_embeddings = embed(cfg.predicates);
        let tags = TagVocab::new(
            object_names
                .iter()
                .chain(&predicate_names)
                .cloned()
                .collect(),
        )?;
        Ok(ToyWorld {
            cfg,
            object_names,
            predicate_names,
            object_embeddings,
            predicate_embeddings,
            tags,
        })
    }

    pub fn config(&self) -> &ToyWorldConfig {
        &self.cfg
    }

    pub fn object_names(&self) -> &[String] {
        &self.object_names
    }

    pub fn predicate_names(&self) -> &[String] {
        &self.predicate_names
    }

    pub fn tag_vocab(&self) -> &TagVocab {
        &self.tags
    }

    /// Scene `index`, drawn from its own generator seeded with `seed + index`
    /// so scenes can be produced independently and in any order.
    pub fn scene(&self, index: u64) -> SceneRecord {
        let cfg = &self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index));
        let noise = Normal::new(0.0, cfg.noise).expect("validated noise");

        let n = rng.random_range(cfg.min_triplets..=cfg.max_triplets);
        let mut labels: Vec<[usize; 3]> = (0..n)
            .map(|_| {
                [
                    rng.random_range(0..cfg.objects),
                    rng.random_range(0..cfg.predicates),
                    rng.random_range(0..cfg.objects),
                ]
            })
            .collect();
        // canonical order: captions are then a function of the triplet set
        labels.sort_unstable();

        let sample = |base: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
            base.iter().map(|&b| b + noise.sample(rng)).collect()
        };
        let mut triplets = Vec::with_capacity(n);
        for &[s, p, o] in &labels {
            let [fs, fp, fo] = if cfg.corruption_rate > 0.0 && rng.random::<f64>() < cfg.corruption_rate
            {
                [
                    rng.random_range(0..cfg.objects),
                    rng.random_range(0..cfg.predicates),
                    rng.random_range(0..cfg.objects),
                ]
            } else {
                [s, p, o]
            };
            let subject = sample(&self.object_embeddings[fs], &mut rng);
            let predicate = sample(&self.predicate_embeddings[fp], &mut rng);
            let object = sample(&self.object_embeddings[fo], &mut rng);
            let t = Triplet::new(subject, predicate, object)
                .expect("finite, equal dimensions")
                .with_labels(
                    &self.object_names[s],
                    &self.predicate_names[p],
                    &self.object_names[o],
                );
            triplets.push(t);
        }

        let mut caption = Vec::with_capacity(6 * n);
        for (k, &[s, p, o]) in labels.iter().enumerate() {
            if k > 0 {
                caption.push("and".to_string());
            }
            caption.extend([
                "a".to_string(),
                self.object_names[s].clone(),
                self.predicate_names[p].clone(),
                "a".to_string(),
                self.object_names[o].clone(),
            ]);
        }

        let d = cfg.feature_dim;
        let mut mean = vec![0.0; d];
        for t in &triplets {
            for slot in [&t.subject, &t.predicate, &t.object] {
                for (m, v) in mean.iter_mut().zip(slot.data()) {
                    *m += v;
                }
            }
        }
        let k = (3 * triplets.len()) as f64;
        mean.iter_mut().for_each(|m| *m /= k);

        let mut rec = SceneRecord {
            id: alloc::format!("scene{index:06}"),
            triplets,
            tags: Tensor::zeros(&[self.tags.len()]),
            global_feature: Some(Tensor::vector(mean)),
            captions: vec![caption],
        };
        rec.tags = make_semantic_tags(&rec, &self.tags).expect("labels come from the tag vocabulary");
        rec
    }
}

/// `n_scenes` records for `cfg`; a pure function of its arguments.
pub fn generate_toy_world(cfg: &ToyWorldConfig, n_scenes: usize) -> Result<Vec<SceneRecord>> {
    let world = ToyWorld::new(cfg.clone())?;
    Ok((0..n_scenes as u64).map(|i| world.scene(i)).collect())
}
