use serde::Serialize;

use crate::ccdc::Series;
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::model::ModelState;
use crate::numerics::{Rng, Tensor};
use crate::scalar::Scalar;

use super::logit_selector;

/// Class relevance over input positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttentionMap {
    /// Non-negative, one per input position, maximum 1 unless all zero.
    pub values: Vec<f64>,
    pub class_id: usize,
    pub series_id: String,
    /// True when every gradient-weighted map was zero.
    pub is_zero: bool,
}

impl AttentionMap {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("position,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

/// Linearly interpolates samples located at `j·stride + offset` onto
/// positions `0..len`, holding the end values beyond the first and last
/// sample centers.
pub fn upsample_linear(values: &[f64], stride: usize, offset: f64, len: usize) -> Vec<f64> {
    let last = values.len() - 1;
    (0..len)
        .map(|t| {
            let u = (t as f64 - offset) / stride as f64;
            if u <= 0.0 {
                values[0]
            } else if u >= last as f64 {
                values[last]
            } else {
                let j = u.floor() as usize;
                let f = u - j as f64;
                values[j] * (1.0 - f) + values[j + 1] * f
            }
        })
        .collect()
}

/// Gradient-weighted class activation map.
///
/// For each branch, channel weights are the position-averaged gradients of
/// the class logit with respect to the post-ReLU convolution maps; the
/// rectified weighted sum of the maps is upsampled to the input length
/// using each output's receptive-field center. Branch maps are averaged and
/// scaled to a maximum of 1.
pub fn grad_cam<T: Scalar>(model: &ModelState<T>, input: &Series, class_id: usize) -> Result<AttentionMap> {
    let len = model.config.input_length;
    if input.values.len() != len {
        return Err(Error::Shape(format!(
            "series {:?} has length {}, model expects {len}",
            input.id,
            input.values.len()
        )));
    }
    let x = Tensor::new(vec![1, len], input.values.iter().map(|&v| T::cast(v)).collect())?;
    let pass = model.forward(&x, Mode::Infer, &mut Rng::new(0))?;
    let grads = model.backward(&pass, &logit_selector(model, 1, class_id)?)?;
    let mut total = vec![0.0; len];
    for (((act, grad), layout), spec) in pass
        .branch_activations()
        .into_iter()
        .zip(&grads.branch_activations)
        .zip(model.branch_layout())
        .zip(&model.config.branches)
    {
        let (a, g) = (act.data(), grad.data());
        let n = layout.conv_len;
        let mut cam = vec![0.0; n];
        for k in 0..layout.filters {
            let alpha = g[k * n..(k + 1) * n].iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
            for (c, &v) in cam.iter_mut().zip(&a[k * n..(k + 1) * n]) {
                *c += alpha * v.as_f64();
            }
        }
        cam.iter_mut().for_each(|c| *c = c.max(0.0));
        let offset = (spec.width as f64 - 1.0) / 2.0;
        for (t, v) in total.iter_mut().zip(upsample_linear(&cam, spec.stride, offset, len)) {
            *t += v;
        }
    }
    let branches = model.branches.len() as f64;
    total.iter_mut().for_each(|v| *v /= branches);
    let max = total.iter().copied().fold(0.0, f64::max);
    if !max.is_finite() {
        return Err(Error::numeric("grad_cam", "non-finite attention values"));
    }
    if max > 0.0 {
        total.iter_mut().for_each(|v| *v /= max);
    }
    Ok(AttentionMap {
        values: total,
        class_id,
        series_id: input.id.clone(),
        is_zero: max == 0.0,
    })
}
