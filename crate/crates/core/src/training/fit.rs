use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{sequence_loss_and_grads, ParamGrads};
use super::optim::{adam_update, clip_gradients, AdamConfig, Moments};
use crate::decoder::{scene_encodings, ModelParams, ModelSpec, Unroll};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor};
use crate::scenegraph::SceneRecord;
use crate::vocab::Vocab;

/// Version written into and demanded from checkpoint files.
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained weights with everything needed to decode with them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocab: Vocab,
    pub seed: u64,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn new(params: ModelParams, vocab: Vocab, seed: u64, epoch: usize) -> Result<Self> {
        if vocab.len() != params.dims().vocab {
            return Err(Error::Mismatch(alloc::format!(
                "vocabulary of {} tokens for a model with {} outputs",
                vocab.len(),
                params.dims().vocab
            )));
        }
        Ok(Checkpoint {
            params,
            vocab,
            seed,
            epoch,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub spec: ModelSpec,
    pub adam: AdamConfig,
    pub epochs: usize,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Seeds both the initial weights and the per-epoch example order.
    pub seed: u64,
    /// Stop after the first epoch whose loss falls below this.
    pub stop_below: Option<f64>,
}

impl TrainConfig {
    pub fn new(spec: ModelSpec) -> Self {
        TrainConfig {
            spec,
            adam: AdamConfig::default(),
            epochs: 20,
            clip_norm: Some(5.0),
            seed: 1,
            stop_below: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.dims.validate(self.spec.arch)?;
        self.adam.validate()?;
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be at least 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Argument(alloc::format!("clip norm {c} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Per-token loss of each completed epoch.
    pub losses: Vec<f64>,
}

struct Example {
    record: usize,
    caption: Vec<usize>,
}

struct Prepared {
    encodings: Vec<Vec<Tensor>>,
    examples: Vec<Example>,
}

/// Checks every record and caption against the model and vocabulary
/// before any update happens.
fn prepare(spec: &ModelSpec, data: &[SceneRecord], vocab: &Vocab) -> Result<Prepared> {
    if data.is_empty() {
        return Err(Error::Argument("empty training set".into()));
    }
    if vocab.len() != spec.dims.vocab {
        return Err(Error::Mismatch(alloc::format!(
            "vocabulary has {} tokens, model dims say {}",
            vocab.len(),
            spec.dims.vocab
        )));
    }
    let probe = ModelParams::zeros(*spec)?;
    let mut encodings = Vec::with_capacity(data.len());
    let mut examples = Vec::new();
    for (i, rec) in data.iter().enumerate() {
        let enc = scene_encodings(rec, spec)?;
        Unroll::new(&mut Tape::new(), &probe, rec, &enc)?;
        encodings.push(enc);
        for words in &rec.captions {
            examples.push(Example {
                record: i,
                caption: vocab.encode(words)?,
            });
        }
    }
    if examples.is_empty() {
        return Err(Error::Argument("training set has no captions".into()));
    }
    Ok(Prepared { encodings, examples })
}

/// Token-weighted mean negative log-likelihood of every caption in `data`.
pub fn corpus_loss(params: &ModelParams, data: &[SceneRecord], vocab: &Vocab) -> Result<f64> {
    let prep = prepare(params.spec(), data, vocab)?;
    let mut total = 0.0;
    let mut tokens = 0;
    for ex in &prep.examples {
        let rec = &data[ex.record];
        let mut tape = Tape::new();
        let unroll = Unroll::new(&mut tape, params, rec, &prep.encodings[ex.record])?;
        let (loss, steps) = super::loss::loss_on(&mut tape, &unroll, &ex.caption)?;
        total += tape.value(loss).item() * steps as f64;
        tokens += steps;
    }
    Ok(total / tokens as f64)
}

/// Per-example teacher-forced training. `on_epoch(epoch, loss)` is called
/// after each epoch with the token-weighted loss seen during that epoch.
pub fn train(
    data: &[SceneRecord],
    vocab: &Vocab,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let prep = prepare(&cfg.spec, data, vocab)?;
    let mut params = ModelParams::init(cfg.spec, cfg.seed)?;
    let mut moments = Moments::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);

    let n = prep.examples.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut nll = alloc::vec![0.0; n];
    let mut steps = alloc::vec![0usize; n];
    let total_steps: usize = prep.examples.iter().map(|e| e.caption.len() + 1).sum();
    let mut losses = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let ex = &prep.examples[k];
            let (loss, t, mut grads): (f64, usize, ParamGrads) =
                sequence_loss_and_grads(&params, &data[ex.record], &prep.encodings[ex.record], &ex.caption)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            nll[k] = loss * t as f64;
            steps[k] = t;
            if let Some(c) = cfg.clip_norm {
                clip_gradients(&mut grads, c);
            }
            adam_update(&mut params, &grads, &mut moments, &cfg.adam)?;
        }
        let epoch_loss = nll.iter().sum::<f64>() / total_steps as f64;
        if !epoch_loss.is_finite() || !params.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        losses.push(epoch_loss);
        on_epoch(epoch, epoch_loss);
        if cfg.stop_below.is_some_and(|s| epoch_loss < s) {
            break;
        }
    }
    debug_assert_eq!(steps.iter().sum::<usize>(), total_steps);
    let epoch = losses.len();
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(params, vocab.clone(), cfg.seed, epoch)?,
        losses,
    })
}
