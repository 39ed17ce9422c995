//! Greedy and beam decoding.

use alloc::vec::Vec;

use super::params::ModelParams;
use super::unroll::{scene_encodings, TapeState, Unroll};
use crate::error::{Error, Result};
use crate::numerics::Tape;
use crate::scenegraph::SceneRecord;
use crate::vocab::EOS_ID;

/// A finished beam entry. `tokens` excludes `<eos>`; `score` is the summed
/// log-probability divided by the number of scored steps (tokens plus the
/// `<eos>` when the hypothesis ended on one).
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub score: f64,
    pub ended: bool,
}

fn check_len(max_len: usize) -> Result<()> {
    if max_len == 0 {
        return Err(Error::Argument("max_len must be at least 1".into()));
    }
    Ok(())
}

/// Arg-max decoding until `<eos>` or `max_len` tokens; ties go to the
/// lowest token id. The returned sequence never contains `<eos>`.
pub fn decode_greedy(params: &ModelParams, rec: &SceneRecord, max_len: usize) -> Result<Vec<usize>> {
    check_len(max_len)?;
    let encodings = scene_encodings(rec, params.spec())?;
    let mut tape = Tape::new();
    let unroll = Unroll::new(&mut tape, params, rec, &encodings)?;
    let mut state = unroll.initial_state(&mut tape);
    let mut out = Vec::new();
    while out.len() < max_len {
        let step = unroll.step(&mut tape, &state)?;
        let tok = tape.value(step.log_probs).argmax();
        if tok == EOS_ID {
            break;
        }
        out.push(tok);
        state = step.state;
        state.prev = tok;
    }
    Ok(out)
}

struct Live {
    tokens: Vec<usize>,
    log_prob: f64,
    state: TapeState,
}

/// Length-normalized beam search. Returns every hypothesis that finished
/// (by `<eos>` or by reaching `max_len`), best first.
///
/// At each step all `width × vocab` extensions are ranked by cumulative
/// log-probability (stable, so earlier beams and lower token ids win
/// ties) and the top `width` survive; those ending in `<eos>` leave the
/// beam. With `width = 1` this is exactly [`decode_greedy`].
pub fn decode_beam(
    params: &ModelParams,
    rec: &SceneRecord,
    width: usize,
    max_len: usize,
) -> Result<Vec<Hypothesis>> {
    check_len(max_len)?;
    if width == 0 {
        return Err(Error::Argument("beam width must be at least 1".into()));
    }
    let encodings = scene_encodings(rec, params.spec())?;
    let mut tape = Tape::new();
    let unroll = Unroll::new(&mut tape, params, rec, &encodings)?;
    let mut live = alloc::vec![Live {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: unroll.initial_state(&mut tape),
    }];
    let mut done = Vec::new();

    for t in 0..max_len {
        let mut steps = Vec::with_capacity(live.len());
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (b, hyp) in live.iter().enumerate() {
            let step = unroll.step(&mut tape, &hyp.state)?;
            for (tok, &lp) in tape.value(step.log_probs).data().iter().enumerate() {
                cands.push((hyp.log_prob + lp, b, tok));
            }
            steps.push(step);
        }
        cands.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut next = Vec::with_capacity(width);
        for &(lp, b, tok) in cands.iter().take(width) {
            if tok == EOS_ID {
                done.push(Hypothesis {
                    tokens: live[b].tokens.clone(),
                    log_prob: lp,
                    score: lp / (t + 1) as f64,
                    ended: true,
                });
            } else {
                let mut tokens = live[b].tokens.clone();
                tokens.push(tok);
                let mut state = steps[b].state;
                state.prev = tok;
                next.push(Live {
                    tokens,
                    log_prob: lp,
                    state,
                });
            }
        }
        live = next;
        if live.is_empty() {
            break;
        }
    }
    for hyp in live {
        done.push(Hypothesis {
            tokens: hyp.tokens,
            log_prob: hyp.log_prob,
            score: hyp.log_prob / max_len as f64,
            ended: false,
        });
    }
    done.sort_by(|x, y| y.score.total_cmp(&x.score));
    Ok(done)
}
