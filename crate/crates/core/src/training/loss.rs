use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::decoder::{scene_encodings, ModelParams, Param, Unroll};
use crate::error::{Error, Result};
use crate::numerics::{compare_gradients, finite_difference_check, GradCheckReport, Tape, Tensor, Var};
use crate::scenegraph::SceneRecord;
use crate::vocab::EOS_ID;

/// Per-parameter gradients keyed by name.
pub type ParamGrads = BTreeMap<Param, Tensor>;

/// Worst disagreement between backpropagated and central-difference
/// gradients within one parameter tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupError {
    /// `|a − n| / max(1e-8, |a| + |n|)`
    pub relative: f64,
    pub absolute: f64,
}

fn check_tokens(caption: &[usize], vocab: usize) -> Result<()> {
    match caption.iter().find(|&&t| t >= vocab) {
        Some(&id) => Err(Error::TokenOutOfRange { id, vocab }),
        None => Ok(()),
    }
}

/// Teacher-forced negative log-likelihood of `caption` followed by `<eos>`.
/// Returns the mean over steps as a tape node together with the step count.
pub fn loss_on(tape: &mut Tape<'_>, unroll: &Unroll, caption: &[usize]) -> Result<(Var, usize)> {
    check_tokens(caption, unroll.spec().dims.vocab)?;
    let mut state = unroll.initial_state(tape);
    let mut picked = Vec::with_capacity(caption.len() + 1);
    for &target in caption.iter().chain(core::iter::once(&EOS_ID)) {
        let step = unroll.step(tape, &state)?;
        picked.push(tape.pick(step.log_probs, target)?);
        state = step.state;
        state.prev = target;
    }
    let steps = picked.len();
    let total = tape.sum_of(&picked)?;
    Ok((tape.scale(total, -1.0 / steps as f64), steps))
}

/// Mean per-step `−ln Pr(w_k | w_<k, scene)` of `caption` (token ids,
/// `<eos>` appended).
pub fn sequence_loss(params: &ModelParams, rec: &SceneRecord, caption: &[usize]) -> Result<f64> {
    let encodings = scene_encodings(rec, params.spec())?;
    let mut tape = Tape::new();
    let unroll = Unroll::new(&mut tape, params, rec, &encodings)?;
    let (loss, _) = loss_on(&mut tape, &unroll, caption)?;
    Ok(tape.value(loss).item())
}

/// [`sequence_loss`] and its gradient with respect to every parameter.
pub fn sequence_loss_and_grads(
    params: &ModelParams,
    rec: &SceneRecord,
    encodings: &[Tensor],
    caption: &[usize],
) -> Result<(f64, usize, ParamGrads)> {
    let mut tape = Tape::new();
    let unroll = Unroll::new(&mut tape, params, rec, encodings)?;
    let (loss, steps) = loss_on(&mut tape, &unroll, caption)?;
    let value = tape.value(loss).item();
    let mut by_id = tape.backward(loss)?.into_params();
    let grads = params
        .iter()
        .map(|(p, t)| {
            let g = by_id.remove(&p.id()).unwrap_or_else(|| Tensor::zeros(t.shape()));
            (p, g)
        })
        .collect();
    Ok((value, steps, grads))
}

/// Per-parameter gradient check of [`sequence_loss`] at `params`.
pub fn check_model_gradients(
    params: &ModelParams,
    rec: &SceneRecord,
    caption: &[usize],
    eps: f64,
) -> Result<BTreeMap<Param, GroupError>> {
    check_model_gradients_against(params, rec, caption, None, eps)
}

/// Like [`check_model_gradients`], but compares central differences with
/// the supplied gradients instead of backpropagated ones when given.
pub fn check_model_gradients_against(
    params: &ModelParams,
    rec: &SceneRecord,
    caption: &[usize],
    grads: Option<&ParamGrads>,
    eps: f64,
) -> Result<BTreeMap<Param, GroupError>> {
    let spec = *params.spec();
    let encodings = scene_encodings(rec, &spec)?;
    let names: Vec<Param> = spec.params().collect();
    let flat: Vec<Tensor> = names.iter().map(|&p| params.get(p).clone()).collect();
    let f = |tape: &mut Tape<'_>, vars: &[Var]| -> Result<Var> {
        let unroll = Unroll::with_vars(tape, spec, vars, rec, &encodings)?;
        Ok(loss_on(tape, &unroll, caption)?.0)
    };
    let report: GradCheckReport = match grads {
        None => finite_difference_check(&flat, f, eps)?,
        Some(g) => {
            let given: Vec<Tensor> = names
                .iter()
                .map(|p| {
                    g.get(p)
                        .cloned()
                        .ok_or_else(|| Error::Contract(alloc::format!("no gradient for {}", p.name())))
                })
                .collect::<Result<_>>()?;
            compare_gradients(&flat, f, &given, eps)?
        }
    };
    Ok(names
        .into_iter()
        .zip(report.per_param.into_iter().zip(report.per_param_abs))
        .map(|(p, (relative, absolute))| (p, GroupError { relative, absolute }))
        .collect())
}
