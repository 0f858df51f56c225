use std::collections::{BTreeMap, HashMap};

use crate::tape::Gradients;
use crate::tensor::Tensor;
use crate::{EngineError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    RmsProp { decay: f64, eps: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn rmsprop() -> Self {
        OptimizerKind::RmsProp { decay: 0.9, eps: 1e-8 }
    }
}

/// Mutable view of one learnable tensor handed to [`Optimizer::step`].
pub struct ParamMut<'a> {
    pub name: &'a str,
    pub group: Option<&'a str>,
    pub value: &'a mut Tensor,
}

#[derive(Clone, Debug)]
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
    shape: Vec<usize>,
    steps: u64,
}

/// First-order optimizer with named learning-rate groups.
///
/// Moment accumulators are kept per parameter name and carry their own step
/// count, so parameters that only receive gradients on some steps (the
/// interpreter parameters of tasks that were not sampled) get correctly
/// bias-corrected Adam updates.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    rates: BTreeMap<String, f64>,
    state: HashMap<String, Moments>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Optimizer { kind, rates: BTreeMap::new(), state: HashMap::new(), steps: 0 }
    }

    pub fn with_group(mut self, group: &str, rate: f64) -> Self {
        self.set_rate(group, rate);
        self
    }

    pub fn set_rate(&mut self, group: &str, rate: f64) {
        self.rates.insert(group.to_string(), rate);
    }

    pub fn rate(&self, group: &str) -> Option<f64> {
        self.rates.get(group).copied()
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Apply one update to every parameter that has a gradient. Parameters
    /// absent from `grads` are left untouched. Returns the number updated.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = ParamMut<'a>>,
        grads: &Gradients,
    ) -> Result<usize> {
        let mut updated = 0;
        self.steps += 1;
        for p in params {
            let group = p.group.ok_or_else(|| EngineError::MissingGroup(p.name.to_string()))?;
            let rate = self.rates.get(group).copied().ok_or_else(|| EngineError::UnknownGroup {
                name: p.name.to_string(),
                group: group.to_string(),
            })?;
            let Some(g) = grads.get(p.name) else { continue };
            if g.shape() != p.value.shape() {
                return Err(EngineError::Shape {
                    op: "optimizer step",
                    shapes: vec![p.value.shape().to_vec(), g.shape().to_vec()],
                });
            }
            self.update(p.name, rate, p.value, g)?;
            updated += 1;
        }
        Ok(updated)
    }

    fn update(&mut self, name: &str, rate: f64, value: &mut Tensor, grad: &Tensor) -> Result<()> {
        let kind = self.kind;
        if let OptimizerKind::Sgd = kind {
            for (v, g) in value.data_mut().iter_mut().zip(grad.data()) {
                *v -= rate * g;
            }
            return Ok(());
        }
        let m = self.state.entry(name.to_string()).or_insert_with(|| Moments {
            first: vec![0.0; value.len()],
            second: vec![0.0; value.len()],
            shape: value.shape().to_vec(),
            steps: 0,
        });
        if m.shape != value.shape() {
            return Err(EngineError::StateShape {
                name: name.to_string(),
                expected: m.shape.clone(),
                found: value.shape().to_vec(),
            });
        }
        m.steps += 1;
        match kind {
            OptimizerKind::Sgd => unreachable!(),
            OptimizerKind::RmsProp { decay, eps } => {
                for ((v, g), s) in value.data_mut().iter_mut().zip(grad.data()).zip(&mut m.second) {
                    *s = decay * *s + (1.0 - decay) * g * g;
                    *v -= rate * g / (s.sqrt() + eps);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = m.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((v, g), f), s) in value
                    .data_mut()
                    .iter_mut()
                    .zip(grad.data())
                    .zip(&mut m.first)
                    .zip(&mut m.second)
                {
                    *f = beta1 * *f + (1.0 - beta1) * g;
                    *s = beta2 * *s + (1.0 - beta2) * g * g;
                    let mhat = *f / c1;
                    let vhat = *s / c2;
                    *v -= rate * mhat / (vhat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tape;

    fn grads_for(name: &str, g: f64) -> Gradients {
        let mut t = Tape::new();
        let p = t.param(name, &Tensor::new([1], vec![0.0]).unwrap());
        let s = t.scale(p, g).unwrap();
        let l = t.sum_axis(s, 0).unwrap();
        t.backward(l).unwrap()
    }

    #[test]
    fn sgd_step() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd).with_group("g", 0.1);
        let mut p = Tensor::new([1], vec![1.0]).unwrap();
        opt.step([ParamMut { name: "p", group: Some("g"), value: &mut p }], &grads_for("p", 2.0))
            .unwrap();
        assert!((p.item() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_rate() {
        // m1 = 0.1, v1 = 0.001, mhat = 1, vhat = 1 -> p = -eta / (1 + 1e-8)
        let eta = 1e-3;
        let mut opt = Optimizer::new(OptimizerKind::adam()).with_group("g", eta);
        let mut p = Tensor::new([1], vec![0.0]).unwrap();
        opt.step([ParamMut { name: "p", group: Some("g"), value: &mut p }], &grads_for("p", 1.0))
            .unwrap();
        let expected = -eta / (1.0 + 1e-8);
        assert!((p.item() - expected).abs() < 1e-15, "{}", p.item());
    }

    #[test]
    fn missing_and_unknown_groups_are_errors() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd).with_group("g", 0.1);
        let mut p = Tensor::new([1], vec![1.0]).unwrap();
        let g = grads_for("p", 1.0);
        let err = opt.step([ParamMut { name: "p", group: None, value: &mut p }], &g).unwrap_err();
        assert_eq!(err, EngineError::MissingGroup("p".into()));
        let err = opt.step([ParamMut { name: "p", group: Some("h"), value: &mut p }], &g).unwrap_err();
        assert!(matches!(err, EngineError::UnknownGroup { .. }));
    }

    #[test]
    fn group_rates_scale_sgd_updates() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd).with_group("fast", 0.1).with_group("slow", 0.001);
        let mut a = Tensor::new([1], vec![0.0]).unwrap();
        let mut b = Tensor::new([1], vec![0.0]).unwrap();
        let mut t = Tape::new();
        let pa = t.param("a", &a);
        let pb = t.param("b", &b);
        let s = t.add(pa, pb).unwrap();
        let l = t.sum_axis(s, 0).unwrap();
        let g = t.backward(l).unwrap();
        opt.step(
            [
                ParamMut { name: "a", group: Some("fast"), value: &mut a },
                ParamMut { name: "b", group: Some("slow"), value: &mut b },
            ],
            &g,
        )
        .unwrap();
        assert!((a.item() / b.item() - 100.0).abs() < 1e-9);
    }
}
