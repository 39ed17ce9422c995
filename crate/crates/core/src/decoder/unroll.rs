//! Per-step computation of both decoders, recorded on a [`Tape`].

use alloc::vec::Vec;

use super::cell::{attend_on, lstm_on, mean_pool_on, AttentionVars, LstmVars, StepTrace};
use super::params::{Arch, ModelParams, ModelSpec, Param, Pooling};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};
use crate::rolespace::{encode_scene, flatten_encoding};
use crate::scenegraph::SceneRecord;
use crate::vocab::BOS_ID;

/// Hidden and cell states of both recurrent units plus the last token.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h1: Tensor,
    pub c1: Tensor,
    pub h2: Tensor,
    pub c2: Tensor,
    pub prev: usize,
}

impl DecoderState {
    /// All-zero states, previous token `<bos>`.
    pub fn initial(hidden: usize) -> Self {
        let z = Tensor::zeros(&[hidden]);
        DecoderState {
            h1: z.clone(),
            c1: z.clone(),
            h2: z.clone(),
            c2: z,
            prev: BOS_ID,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub log_probs: Tensor,
    pub state: DecoderState,
    pub trace: StepTrace,
}

/// `v̄ = v`: the image-driven decoder starts from the global feature.
pub fn tdbu_init(rec: &SceneRecord) -> Result<Tensor> {
    rec.global_feature.clone().ok_or_else(|| {
        Error::Argument(alloc::format!(
            "scene {} has no global feature; the stdbu decoder works from triplets alone",
            rec.id
        ))
    })
}

/// `v̄_s = Σ_i [S_s,i; S_p,i; S_o,i]`.
pub fn stdbu_init(rec: &SceneRecord) -> Result<Tensor> {
    let first = rec
        .triplets
        .first()
        .ok_or_else(|| Error::Argument(alloc::format!("scene {} has no triplets", rec.id)))?;
    let mut acc = first.concatenated();
    for t in &rec.triplets[1..] {
        acc = acc.add(&t.concatenated())?;
    }
    Ok(acc)
}

/// Flattened bindings of every triplet of `rec` under the model's role basis.
pub fn scene_encodings(rec: &SceneRecord, spec: &ModelSpec) -> Result<Vec<Tensor>> {
    let basis = spec.dims.basis()?;
    Ok(encode_scene(rec, &basis)?.iter().map(flatten_encoding).collect())
}

/// State handles on a tape.
#[derive(Debug, Clone, Copy)]
pub struct TapeState {
    pub h1: Var,
    pub c1: Var,
    pub h2: Var,
    pub c2: Var,
    pub prev: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TapeStep {
    pub log_probs: Var,
    pub state: TapeState,
    pub weights: Var,
    pub pooled: Var,
}

/// A decoder bound to one scene on one tape: parameters registered,
/// scene constants and step-invariant projections computed once.
#[derive(Debug, Clone)]
pub struct Unroll {
    spec: ModelSpec,
    vars: [Option<Var>; Param::ALL.len()],
    encodings: Vec<Var>,
    projected: Vec<Var>,
    top: Var,
    gates: Option<(Var, Var)>,
}

impl Unroll {
    /// Registers `params` on `tape` (ids = [`Param::id`]) and prepares `rec`.
    pub fn new<'p>(
        tape: &mut Tape<'p>,
        params: &'p ModelParams,
        rec: &SceneRecord,
        encodings: &[Tensor],
    ) -> Result<Self> {
        let vars: Vec<Var> = params.iter().map(|(p, t)| tape.param(p.id(), t)).collect();
        Self::with_vars(tape, *params.spec(), &vars, rec, encodings)
    }

    /// Like [`Unroll::new`] with parameters already on the tape, one var per
    /// entry of `spec.params()` in that order.
    pub fn with_vars(
        tape: &mut Tape<'_>,
        spec: ModelSpec,
        vars: &[Var],
        rec: &SceneRecord,
        encodings: &[Tensor],
    ) -> Result<Self> {
        let dims = &spec.dims;
        let mut slots = [None; Param::ALL.len()];
        let mut n = 0;
        for (p, &v) in spec.params().zip(vars) {
            slots[p.id()] = Some(v);
            n += 1;
        }
        if n != vars.len() || n != spec.params().count() {
            return Err(Error::Contract(alloc::format!(
                "{} parameter handles for a {}-parameter model",
                vars.len(),
                spec.params().count()
            )));
        }
        if encodings.is_empty() {
            return Err(Error::Argument(alloc::format!("scene {} has no triplets", rec.id)));
        }
        if let Some(e) = encodings.iter().find(|e| e.len() != dims.encoding()) {
            return Err(Error::Mismatch(alloc::format!(
                "encoding length {} but the model expects {}",
                e.len(),
                dims.encoding()
            )));
        }
        if rec.tags.len() != dims.tags {
            return Err(Error::Mismatch(alloc::format!(
                "scene {} has {} tags, the model expects {}",
                rec.id,
                rec.tags.len(),
                dims.tags
            )));
        }
        let top = match spec.arch {
            Arch::Tdbu => tdbu_init(rec)?,
            Arch::Stdbu => stdbu_init(rec)?,
        };
        if top.len() != dims.top_down(spec.arch) {
            return Err(Error::Mismatch(alloc::format!(
                "scene {} top-down feature has length {}, the model expects {}",
                rec.id,
                top.len(),
                dims.top_down(spec.arch)
            )));
        }

        let mut this = Unroll {
            spec,
            vars: slots,
            encodings: Vec::new(),
            projected: Vec::new(),
            top: tape.constant(top),
            gates: None,
        };
        this.encodings = encodings.iter().map(|e| tape.constant(e.clone())).collect();
        if spec.pooling == Pooling::Attention {
            let wb = this.var(Param::AttnEncoding);
            this.projected = this
                .encodings
                .iter()
                .map(|&e| tape.matvec(wb, e))
                .collect::<Result<_>>()?;
        }
        if spec.arch == Arch::Stdbu {
            let tags = tape.constant(rec.tags.clone());
            let g1 = tape.matvec(this.var(Param::SemanticGate1), tags)?;
            let g2 = tape.matvec(this.var(Param::SemanticGate2), tags)?;
            this.gates = Some((g1, g2));
        }
        Ok(this)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn var(&self, p: Param) -> Var {
        self.vars[p.id()].expect("parameter present for this architecture")
    }

    pub fn initial_state(&self, tape: &mut Tape<'_>) -> TapeState {
        self.load_state(tape, &DecoderState::initial(self.spec.dims.hidden))
    }

    pub fn load_state(&self, tape: &mut Tape<'_>, s: &DecoderState) -> TapeState {
        TapeState {
            h1: tape.constant(s.h1.clone()),
            c1: tape.constant(s.c1.clone()),
            h2: tape.constant(s.h2.clone()),
            c2: tape.constant(s.c2.clone()),
            prev: s.prev,
        }
    }

    fn lstm(&self, which: u8) -> LstmVars {
        let (i, r, b) = if which == 1 {
            (Param::Lstm1Input, Param::Lstm1Recurrent, Param::Lstm1Bias)
        } else {
            (Param::Lstm2Input, Param::Lstm2Recurrent, Param::Lstm2Bias)
        };
        LstmVars {
            input: self.var(i),
            recurrent: self.var(r),
            bias: self.var(b),
        }
    }

    /// One decoding step from `state`, conditioned on `state.prev`.
    pub fn step(&self, tape: &mut Tape<'_>, state: &TapeState) -> Result<TapeStep> {
        let emb = tape.row(self.var(Param::WordEmbed), state.prev)?;
        let x1 = tape.concat(&[state.h2, self.top, emb])?;
        let (h1, c1) = lstm_on(tape, self.lstm(1), x1, state.h1, state.c1)?;

        let (weights, pooled) = match self.spec.pooling {
            Pooling::Attention => {
                let w = AttentionVars {
                    score: self.var(Param::AttnScore),
                    hidden: self.var(Param::AttnHidden),
                };
                attend_on(tape, w, &self.projected, &self.encodings, h1)?
            }
            Pooling::Mean => mean_pool_on(tape, &self.encodings)?,
        };

        let (top_hidden, recurrent) = match self.gates {
            None => (h1, state.h2),
            Some((g1, g2)) => {
                let p1 = tape.matvec(self.var(Param::Project1), h1)?;
                let h1n = tape.mul(g1, p1)?;
                let p2 = tape.matvec(self.var(Param::Project2), state.h2)?;
                let h2n = tape.mul(g2, p2)?;
                (h1n, h2n)
            }
        };
        let x2 = tape.concat(&[top_hidden, pooled])?;
        let (h2, c2) = lstm_on(tape, self.lstm(2), x2, recurrent, state.c2)?;

        let logits = tape.matvec(self.var(Param::Output), h2)?;
        let log_probs = tape.log_softmax(logits);
        Ok(TapeStep {
            log_probs,
            state: TapeState {
                h1,
                c1,
                h2,
                c2,
                prev: state.prev,
            },
            weights,
            pooled,
        })
    }

    /// [`Unroll::step`] followed by feeding `token` as the next input.
    pub fn advance(&self, tape: &mut Tape<'_>, state: &TapeState, token: usize) -> Result<TapeStep> {
        let mut s = self.step(tape, state)?;
        s.state.prev = token;
        Ok(s)
    }
}

fn run_step(params: &ModelParams, rec: &SceneRecord, encodings: &[Tensor], state: &DecoderState) -> Result<StepOutput> {
    let mut tape = Tape::new();
    let unroll = Unroll::new(&mut tape, params, rec, encodings)?;
    let s = unroll.load_state(&mut tape, state);
    let out = unroll.step(&mut tape, &s)?;
    Ok(StepOutput {
        log_probs: tape.value(out.log_probs).clone(),
        state: DecoderState {
            h1: tape.value(out.state.h1).clone(),
            c1: tape.value(out.state.c1).clone(),
            h2: tape.value(out.state.h2).clone(),
            c2: tape.value(out.state.c2).clone(),
            prev: state.prev,
        },
        trace: StepTrace {
            weights: tape.value(out.weights).clone(),
            pooled: tape.value(out.pooled).clone(),
        },
    })
}

fn expect_arch(params: &ModelParams, arch: Arch) -> Result<()> {
    if params.arch() != arch {
        return Err(Error::Contract(alloc::format!(
            "{} step called with {} parameters",
            arch.name(),
            params.arch().name()
        )));
    }
    Ok(())
}

/// One image-driven step. The returned state keeps `prev`; set it to the
/// chosen token before the next call.
pub fn tdbu_step(
    params: &ModelParams,
    rec: &SceneRecord,
    encodings: &[Tensor],
    state: &DecoderState,
) -> Result<StepOutput> {
    expect_arch(params, Arch::Tdbu)?;
    run_step(params, rec, encodings, state)
}

/// One semantic-gated step; see [`tdbu_step`] for the state convention.
pub fn stdbu_step(
    params: &ModelParams,
    rec: &SceneRecord,
    encodings: &[Tensor],
    state: &DecoderState,
) -> Result<StepOutput> {
    expect_arch(params, Arch::Stdbu)?;
    run_step(params, rec, encodings, state)
}
