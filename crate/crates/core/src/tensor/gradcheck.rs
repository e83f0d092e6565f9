//! Finite-difference verification of reverse-mode gradients.

use super::{Parameter, Tensor};
use crate::error::{Error, Result};

/// Compare reverse-mode gradients of a scalar function against central
/// differences `(f(x+h) - f(x-h)) / 2h` for every element of every trainable
/// parameter. Returns the worst relative error.
pub fn check_gradients<F>(f: F, params: &[Parameter], h: f64) -> Result<f64>
where
    F: Fn(&[Parameter]) -> Result<Tensor>,
{
    for p in params {
        p.tensor.zero_grad();
    }
    let out = f(params)?;
    if !out.item().is_finite() {
        return Err(Error::NonFinite("check_gradients evaluation".into()));
    }
    out.backward()?;
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| {
            p.tensor
                .grad()
                .unwrap_or_else(|| vec![0.0; p.tensor.len()])
        })
        .collect();
    for p in params {
        p.tensor.zero_grad();
    }

    let mut worst = 0.0f64;
    for (pi, p) in params.iter().enumerate() {
        if !p.trainable {
            continue;
        }
        let base = p.tensor.to_vec();
        for i in 0..base.len() {
            let mut pert = base.clone();
            pert[i] = base[i] + h;
            p.tensor.set_data(&pert);
            let fp = f(params)?.item();
            pert[i] = base[i] - h;
            p.tensor.set_data(&pert);
            let fm = f(params)?.item();
            p.tensor.set_data(&base);
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::NonFinite("check_gradients perturbation".into()));
            }
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[pi][i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
