//! Backward analysis of a trained network: class attention maps, input
//! synthesis by activation maximization, and 2-D feature embeddings.

mod actmax;
mod gradcam;
mod tsne;

pub use actmax::{activation_max, ActMaxConfig, ActMaxResult};
pub use gradcam::{grad_cam, upsample_linear, AttentionMap};
pub use tsne::{tsne, TsneConfig, TsneResult};

use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::numerics::Tensor;
use crate::scalar::Scalar;

/// Upstream gradient selecting the pre-softmax logit of `class` for every row.
fn logit_selector<T: Scalar>(model: &ModelState<T>, rows: usize, class: usize) -> Result<Tensor<T>> {
    let classes = model.config.num_classes;
    if class >= classes {
        return Err(Error::Parameter(format!("class {class} out of range for {classes} classes")));
    }
    let mut d = Tensor::zeros(vec![rows, classes]);
    for r in 0..rows {
        d.data_mut()[r * classes + class] = T::one();
    }
    Ok(d)
}
