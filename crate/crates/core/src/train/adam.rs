//! Adam over a [`ParamStore`], with exportable moment estimates so a run can
//! resume bit-exactly from a checkpoint.

use std::collections::BTreeMap;

use candle_core::backprop::GradStore;
use candle_core::{Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nn::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.0002,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(invalid(format!(
                "learning rate must be > 0, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("Adam betas must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(invalid("Adam eps must be > 0"));
        }
        Ok(())
    }
}

struct Slot {
    var: Var,
    m: Tensor,
    v: Tensor,
}

pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    slots: BTreeMap<String, Slot>,
}

impl Adam {
    /// Optimizes every trainable parameter of `store`.
    pub fn new(store: &ParamStore, cfg: AdamConfig) -> Result<Self> {
        cfg.validate()?;
        let slots = store
            .trainable()
            .map(|(name, var)| {
                Ok((
                    name.clone(),
                    Slot {
                        var: var.clone(),
                        m: var.zeros_like()?,
                        v: var.zeros_like()?,
                    },
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            cfg,
            step: 0,
            slots,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. Parameters without a gradient are left untouched.
    pub fn step(&mut self, grads: &GradStore) -> Result<()> {
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.cfg;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for slot in self.slots.values_mut() {
            let Some(g) = grads.get(slot.var.as_tensor()) else {
                continue;
            };
            // Gradients may carry an op graph; keep the moments detached so
            // nothing accumulates across steps.
            let g = g.detach();
            slot.m = ((&slot.m * beta1)? + (&g * (1.0 - beta1))?)?.detach();
            slot.v = ((&slot.v * beta2)? + (g.sqr()? * (1.0 - beta2))?)?.detach();
            let m_hat = (&slot.m / bc1)?;
            let v_hat = (&slot.v / bc2)?;
            let update = (m_hat / (v_hat.sqrt()? + eps)?)?;
            let next = (slot.var.as_tensor().detach() - (update * lr)?)?;
            slot.var.set(&next)?;
        }
        Ok(())
    }

    /// Moment estimates as `m.<param>` / `v.<param>` tensors.
    pub fn state_tensors(&self) -> Vec<(String, Tensor)> {
        self.slots
            .iter()
            .flat_map(|(name, s)| {
                [
                    (format!("m.{name}"), s.m.clone()),
                    (format!("v.{name}"), s.v.clone()),
                ]
            })
            .collect()
    }

    pub fn load_state(&mut self, step: u64, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
        for (name, slot) in self.slots.iter_mut() {
            let fetch = |key: String| {
                tensors
                    .get(&key)
                    .filter(|t| t.dims() == slot.var.dims())
                    .cloned()
                    .ok_or_else(|| Error::Checkpoint(format!("optimizer state {key} missing")))
            };
            slot.m = fetch(format!("m.{name}"))?;
            slot.v = fetch(format!("v.{name}"))?;
        }
        self.step = step;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Builder;
    use crate::rng::seeded;
    use candle_core::Device;

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new(Device::Cpu);
        let mut rng = seeded(0);
        let x = Builder::new(&mut store, &mut rng)
            .constant("x", 3, 2.0)
            .unwrap();
        let mut opt = Adam::new(
            &store,
            AdamConfig {
                lr: 0.05,
                ..AdamConfig::default()
            },
        )
        .unwrap();
        for _ in 0..400 {
            let loss = x.as_tensor().sqr().unwrap().sum_all().unwrap();
            opt.step(&loss.backward().unwrap()).unwrap();
        }
        let v = x.as_tensor().to_vec1::<f64>().unwrap();
        assert!(v.iter().all(|x| x.abs() < 0.05), "{v:?}");
        assert_eq!(opt.step_count(), 400);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction the first update is lr * sign(g) (up to eps).
        let mut store = ParamStore::new(Device::Cpu);
        let mut rng = seeded(0);
        let x = Builder::new(&mut store, &mut rng)
            .constant("x", 1, 1.0)
            .unwrap();
        let mut opt = Adam::new(&store, AdamConfig::default()).unwrap();
        let loss = (x.as_tensor() * 3.0).unwrap().sum_all().unwrap();
        opt.step(&loss.backward().unwrap()).unwrap();
        let v = x.as_tensor().to_vec1::<f64>().unwrap()[0];
        assert!((v - (1.0 - 0.0002)).abs() < 1e-9);
    }
}
