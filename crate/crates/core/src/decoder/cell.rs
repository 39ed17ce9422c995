//! The recurrent cell and the triplet attention shared by both decoders.

use alloc::vec::Vec;

use crate::error::{dim_err, Error, Result};
use crate::numerics::{Tape, Tensor, Var};

/// Stacked gate weights of one LSTM; rows are ordered input, forget,
/// candidate, output.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    pub input: &'a Tensor,
    pub recurrent: &'a Tensor,
    pub bias: &'a Tensor,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LstmVars {
    pub input: Var,
    pub recurrent: Var,
    pub bias: Var,
}

pub(crate) fn lstm_on(
    tape: &mut Tape<'_>,
    w: LstmVars,
    x: Var,
    h: Var,
    c: Var,
) -> Result<(Var, Var)> {
    let hidden = tape.value(h).len();
    let wr = tape.value(w.recurrent).shape();
    if wr != [4 * hidden, hidden] || tape.value(c).len() != hidden {
        return Err(dim_err("lstm recurrent", wr, &[hidden]));
    }
    let a = tape.matvec(w.input, x)?;
    let b = tape.matvec(w.recurrent, h)?;
    let pre = tape.add(a, b)?;
    let pre = tape.add(pre, w.bias)?;
    let gate = |tape: &mut Tape<'_>, k: usize| tape.slice(pre, k * hidden, hidden);
    let (i, f, g, o) = (gate(tape, 0)?, gate(tape, 1)?, gate(tape, 2)?, gate(tape, 3)?);
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let g = tape.tanh(g);
    let o = tape.sigmoid(o);
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c_next = tape.add(keep, write)?;
    let squashed = tape.tanh(c_next);
    let h_next = tape.mul(o, squashed)?;
    Ok((h_next, c_next))
}

/// One LSTM update: `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
pub fn lstm_step(w: LstmWeights<'_>, x: &Tensor, h: &Tensor, c: &Tensor) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new();
    let vars = LstmVars {
        input: tape.constant_ref(w.input),
        recurrent: tape.constant_ref(w.recurrent),
        bias: tape.constant_ref(w.bias),
    };
    let x = tape.constant_ref(x);
    let h = tape.constant_ref(h);
    let c = tape.constant_ref(c);
    let (h2, c2) = lstm_on(&mut tape, vars, x, h, c)?;
    Ok((tape.value(h2).clone(), tape.value(c2).clone()))
}

/// Attention weights and the pooled encoding of one decoding step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    /// `ã`, one weight per triplet.
    pub weights: Tensor,
    /// `ŝ = Σ ã_i s_i`.
    pub pooled: Tensor,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AttentionVars {
    pub score: Var,
    pub hidden: Var,
}

/// `a_i = W_a tanh(W_b s_i + W_c h)`; `projected[i]` is the precomputed
/// `W_b s_i`, which does not change across steps.
pub(crate) fn attend_on(
    tape: &mut Tape<'_>,
    w: AttentionVars,
    projected: &[Var],
    encodings: &[Var],
    h: Var,
) -> Result<(Var, Var)> {
    if encodings.is_empty() {
        return Err(Error::Argument("attention over zero triplets".into()));
    }
    let query = tape.matvec(w.hidden, h)?;
    let mut scores = Vec::with_capacity(projected.len());
    for &p in projected {
        let z = tape.add(p, query)?;
        let z = tape.tanh(z);
        scores.push(tape.matvec(w.score, z)?);
    }
    let scores = tape.concat(&scores)?;
    let weights = tape.softmax(scores);
    let pooled = tape.weighted_sum(weights, encodings)?;
    Ok((weights, pooled))
}

/// Uniform pooling, the no-attention ablation.
pub(crate) fn mean_pool_on(tape: &mut Tape<'_>, encodings: &[Var]) -> Result<(Var, Var)> {
    if encodings.is_empty() {
        return Err(Error::Argument("pooling over zero triplets".into()));
    }
    let n = encodings.len();
    let weights = tape.constant(Tensor::vector(alloc::vec![1.0 / n as f64; n]));
    let pooled = tape.weighted_sum(weights, encodings)?;
    Ok((weights, pooled))
}

/// Soft attention of hidden state `h1` over flattened encodings.
pub fn attend(
    encodings: &[Tensor],
    h1: &Tensor,
    w_score: &Tensor,
    w_encoding: &Tensor,
    w_hidden: &Tensor,
) -> Result<StepTrace> {
    if encodings.is_empty() {
        return Err(Error::Argument("attention over zero triplets".into()));
    }
    let mut tape = Tape::new();
    let wb = tape.constant_ref(w_encoding);
    let w = AttentionVars {
        score: tape.constant_ref(w_score),
        hidden: tape.constant_ref(w_hidden),
    };
    let encs: Vec<Var> = encodings.iter().map(|e| tape.constant_ref(e)).collect();
    let projected = encs
        .iter()
        .map(|&e| tape.matvec(wb, e))
        .collect::<Result<Vec<_>>>()?;
    let h = tape.constant_ref(h1);
    let (weights, pooled) = attend_on(&mut tape, w, &projected, &encs, h)?;
    Ok(StepTrace {
        weights: tape.value(weights).clone(),
        pooled: tape.value(pooled).clone(),
    })
}
