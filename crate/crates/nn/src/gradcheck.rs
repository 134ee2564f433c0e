//! Central finite-difference check of tape gradients.

use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::tensor::{ParamId, ParamStore};

/// Step used by the reference checks.
pub const GRAD_CHECK_EPS: f64 = 1e-5;

/// Largest relative error `|a - n| / max(|a|, |n|, 1e-6)` between the
/// analytic gradient `a` and the central difference `n` over every entry
/// of `params`. `f` must build a scalar loss on the tape it is given.
pub fn grad_check<F>(store: &ParamStore, params: &[ParamId], eps: f64, f: F) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &ParamStore) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let loss = f(&tape, store)?;
    let grads = tape.backward(loss)?;

    let eval = |s: &ParamStore| -> Result<f64> {
        let t = Tape::inference();
        Ok(f(&t, s)?.item())
    };
    let mut probe = store.clone();
    let mut worst = 0.0f64;
    for &id in params {
        let analytic = grads.params.get(&id).map(|g| g.data().to_vec());
        for k in 0..store.get(id).data().len() {
            let x = store.get(id).data()[k];
            probe.get_mut(id).data_mut()[k] = x + eps;
            let up = eval(&probe)?;
            probe.get_mut(id).data_mut()[k] = x - eps;
            let down = eval(&probe)?;
            probe.get_mut(id).data_mut()[k] = x;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.as_ref().map_or(0.0, |g| g[k]);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
