use alloc::vec::Vec;

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Per-parameter worst relative error between backward() and central
/// differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Indexed like the `params` slice that was checked.
    pub per_param: Vec<f64>,
    /// Worst `|analytic − numeric|` per parameter.
    pub per_param_abs: Vec<f64>,
    pub max: f64,
    /// `(param, coordinate)` of the worst disagreement.
    pub worst: (usize, usize),
}

/// Scalar function of a parameter list, built on a tape.
///
/// The closure receives the tape and one [`Var`] per parameter (registered
/// with id = its position) and returns the scalar loss node.
pub trait ScalarFn: for<'p> Fn(&mut Tape<'p>, &[Var]) -> Result<Var> {}
impl<F> ScalarFn for F where F: for<'p> Fn(&mut Tape<'p>, &[Var]) -> Result<Var> {}

fn eval<F: ScalarFn>(params: &[Tensor], f: &F) -> Result<f64> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params
        .iter()
        .enumerate()
        .map(|(i, t)| tape.param(i, t))
        .collect();
    let loss = f(&mut tape, &vars)?;
    let v = tape.value(loss);
    if v.len() != 1 {
        return Err(Error::Contract("gradient check needs a scalar function".into()));
    }
    Ok(v.item())
}

fn analytic<F: ScalarFn>(params: &[Tensor], f: &F) -> Result<Vec<Tensor>> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params
        .iter()
        .enumerate()
        .map(|(i, t)| tape.param(i, t))
        .collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    Ok((0..params.len())
        .map(|i| grads.param(i).cloned().unwrap_or_else(|| Tensor::zeros(params[i].shape())))
        .collect())
}

/// Compares reverse-mode gradients of `f` against central differences over
/// every coordinate of every parameter.
pub fn finite_difference_check<F: ScalarFn>(
    params: &[Tensor],
    f: F,
    eps: f64,
) -> Result<GradCheckReport> {
    let grads = analytic(params, &f)?;
    compare_gradients(params, f, &grads, eps)
}

/// Like [`finite_difference_check`] but against caller-supplied gradients.
pub fn compare_gradients<F: ScalarFn>(
    params: &[Tensor],
    f: F,
    grads: &[Tensor],
    eps: f64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-4).contains(&eps) {
        return Err(Error::Argument(alloc::format!(
            "finite-difference step {eps} outside [1e-7, 1e-4]"
        )));
    }
    if grads.len() != params.len()
        || grads.iter().zip(params).any(|(g, p)| g.shape() != p.shape())
    {
        return Err(Error::Contract("gradients not aligned with parameters".into()));
    }
    let base = eval(params, &f)?;
    if eval(params, &f)?.to_bits() != base.to_bits() {
        return Err(Error::Contract("function is not deterministic".into()));
    }

    let mut work: Vec<Tensor> = params.to_vec();
    let mut per_param = Vec::with_capacity(params.len());
    let mut per_param_abs = Vec::with_capacity(params.len());
    let mut max = 0.0f64;
    let mut worst = (0, 0);
    for i in 0..params.len() {
        let mut group_max = 0.0f64;
        let mut group_abs = 0.0f64;
        for k in 0..params[i].len() {
            let orig = params[i].data()[k];
            work[i].data_mut()[k] = orig + eps;
            let plus = eval(&work, &f)?;
            work[i].data_mut()[k] = orig - eps;
            let minus = eval(&work, &f)?;
            work[i].data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = grads[i].data()[k];
            let diff = libm::fabs(a - numeric);
            let err = diff / f64::max(1e-8, libm::fabs(a) + libm::fabs(numeric));
            group_abs = group_abs.max(diff);
            if err > group_max {
                group_max = err;
            }
            if err > max {
                max = err;
                worst = (i, k);
            }
        }
        per_param.push(group_max);
        per_param_abs.push(group_abs);
    }
    Ok(GradCheckReport {
        per_param,
        per_param_abs,
        max,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn square_at_three() {
        let p = [Tensor::vector(vec![3.0])];
        let r = finite_difference_check(&p, |t: &mut Tape, v: &[Var]| t.dot(v[0], v[0]), 1e-5).unwrap();
        assert!(r.max < 1e-8, "{r:?}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let p = [Tensor::vector(vec![1.0, 2.0])];
        let r = finite_difference_check(
            &p,
            |t: &mut Tape, _v: &[Var]| Ok(t.constant(Tensor::scalar(4.0))),
            1e-5,
        )
        .unwrap();
        assert_eq!(r.max, 0.0);
    }

    #[test]
    fn step_outside_range_is_rejected() {
        let p = [Tensor::vector(vec![1.0])];
        let f = |t: &mut Tape, v: &[Var]| Ok(t.sum(v[0]));
        assert!(finite_difference_check(&p, f, 1e-3).is_err());
        assert!(finite_difference_check(&p, f, 1e-9).is_err());
    }

    #[test]
    fn nondeterministic_function_is_rejected() {
        use core::sync::atomic::{AtomicU32, Ordering};
        static CALLS: AtomicU32 = AtomicU32::new(0);
        let p = [Tensor::vector(vec![1.0])];
        let f = |t: &mut Tape, v: &[Var]| {
            let n = CALLS.fetch_add(1, Ordering::SeqCst) as f64;
            let s = t.sum(v[0]);
            Ok(t.scale(s, 1.0 + n))
        };
        assert!(matches!(
            finite_difference_check(&p, f, 1e-5),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let p = [Tensor::vector(vec![0.4, -0.2])];
        let f = |t: &mut Tape, v: &[Var]| {
            let h = t.tanh(v[0]);
            t.dot(h, h)
        };
        let mut g = analytic(&p, &f).unwrap();
        g[0].data_mut()[1] *= 1.5;
        let r = compare_gradients(&p, f, &g, 1e-5).unwrap();
        assert!(r.max > 0.1);
        assert_eq!(r.worst, (0, 1));
    }
}
