use alloc::collections::BTreeMap;

use super::loss::ParamGrads;
use crate::decoder::{ModelParams, Param};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Adaptive-moment optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Argument(alloc::format!("{what} = {v} is out of range")));
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return bad("learning rate", self.lr);
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1", self.beta1);
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2", self.beta2);
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return bad("epsilon", self.eps);
        }
        Ok(())
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub first: BTreeMap<Param, Tensor>,
    pub second: BTreeMap<Param, Tensor>,
    pub step: u64,
}

impl Moments {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: BTreeMap<Param, Tensor> = params.iter().map(|(p, t)| (p, Tensor::zeros(t.shape()))).collect();
        Moments {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected update of a flat parameter slice. `step` is the
/// 1-based count including this update.
pub fn adam_slice(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], step: u64, cfg: &AdamConfig) {
    let c1 = 1.0 - libm::pow(cfg.beta1, step as f64);
    let c2 = 1.0 - libm::pow(cfg.beta2, step as f64);
    for i in 0..p.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        p[i] -= cfg.lr * mh / (libm::sqrt(vh) + cfg.eps);
    }
}

pub fn adam_update(
    params: &mut ModelParams,
    grads: &ParamGrads,
    moments: &mut Moments,
    cfg: &AdamConfig,
) -> Result<()> {
    for (p, t) in params.iter() {
        let aligned = grads.get(&p).is_some_and(|g| g.shape() == t.shape())
            && moments.first.get(&p).is_some_and(|m| m.shape() == t.shape())
            && moments.second.get(&p).is_some_and(|m| m.shape() == t.shape());
        if !aligned {
            return Err(Error::Contract(alloc::format!(
                "gradient or moments for {} missing or misshapen",
                p.name()
            )));
        }
    }
    if grads.len() != params.len() {
        return Err(Error::Contract("gradients for parameters the model does not have".into()));
    }
    moments.step += 1;
    let step = moments.step;
    for (p, t) in params.iter_mut() {
        let m = moments.first.get_mut(&p).expect("checked").data_mut();
        let v = moments.second.get_mut(&p).expect("checked").data_mut();
        adam_slice(t.data_mut(), grads[&p].data(), m, v, step, cfg);
    }
    Ok(())
}

/// Euclidean norm over all gradient entries.
pub fn global_norm(grads: &ParamGrads) -> f64 {
    libm::sqrt(grads.values().map(Tensor::norm_sq).sum())
}

/// Rescales `grads` so their global norm is at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_gradients(grads: &mut ParamGrads, max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grads.values_mut() {
            g.data_mut().iter_mut().for_each(|x| *x *= k);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn first_step_moves_by_lr_against_the_sign() {
        let cfg = AdamConfig::default();
        let mut p = vec![1.0, -2.0, 0.5];
        let (mut m, mut v) = (vec![0.0; 3], vec![0.0; 3]);
        adam_slice(&mut p, &[0.3, -4.0, 0.0], &mut m, &mut v, 1, &cfg);
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-10);
        assert!((p[1] - (-2.0 + 1e-3)).abs() < 1e-10);
        assert_eq!(p[2], 0.5);
    }

    #[test]
    fn clipping_keeps_direction() {
        let mut g = ParamGrads::new();
        g.insert(Param::Output, Tensor::vector(vec![3.0, 4.0]));
        assert_eq!(clip_gradients(&mut g, 1.0), 5.0);
        assert!((g[&Param::Output].data()[0] - 0.6).abs() < 1e-15);
        assert!((global_norm(&g) - 1.0).abs() < 1e-15);
        assert_eq!(clip_gradients(&mut g, 10.0), global_norm(&g));
    }

    #[test]
    fn config_ranges() {
        assert!(AdamConfig::default().validate().is_ok());
        assert!(AdamConfig { lr: -1.0, ..AdamConfig::default() }.validate().is_err());
        assert!(AdamConfig { beta2: 1.0, ..AdamConfig::default() }.validate().is_err());
        assert!(AdamConfig { eps: 0.0, ..AdamConfig::default() }.validate().is_err());
    }
}
