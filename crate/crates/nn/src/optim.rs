//! Adaptive-moment optimiser with per-parameter step counts.
//!
//! Only parameters present in a gradient map are touched. A parameter that
//! received no gradient keeps its value and its moment estimates, so an
//! expert that was not routed to in a step is left exactly as it was.

use std::collections::BTreeMap;

use crate::tensor::{ParamId, ParamStore, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    state: BTreeMap<ParamId, Moments>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, state: BTreeMap::new() }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &BTreeMap<ParamId, Tensor>) {
        for (&id, g) in grads {
            let p = store.get_mut(id).data_mut();
            let st = self.state.entry(id).or_insert_with(|| Moments {
                m: vec![0.0; p.len()],
                v: vec![0.0; p.len()],
                t: 0,
            });
            st.t += 1;
            let c1 = 1.0 - self.beta1.powi(st.t as i32);
            let c2 = 1.0 - self.beta2.powi(st.t as i32);
            for (((w, &gv), m), v) in p.iter_mut().zip(g.data()).zip(&mut st.m).zip(&mut st.v) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * gv;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gv * gv;
                *w -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
    }

    pub fn moments(&self, id: ParamId) -> Option<&Moments> {
        self.state.get(&id)
    }

    pub fn set_moments(&mut self, id: ParamId, m: Moments) {
        self.state.insert(id, m);
    }

    pub fn tracked(&self) -> impl Iterator<Item = (ParamId, &Moments)> {
        self.state.iter().map(|(k, v)| (*k, v))
    }
}
