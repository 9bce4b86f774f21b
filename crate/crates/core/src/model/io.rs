use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::Container;
use crate::error::{ContainerError, Error, Result};
use crate::numerics::{Rng, Tensor};
use crate::scalar::Scalar;

use super::config::ArchConfig;
use super::network::ModelState;

pub const MODEL_KIND: &str = "model";

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    config: ArchConfig,
    scalar: String,
    step: u64,
    version: String,
}

fn check_shape<T: Scalar>(name: &str, expected: &Tensor<T>, found: &Tensor<T>) -> Result<()> {
    if expected.shape() != found.shape() {
        return Err(ContainerError::Malformed(format!(
            "tensor {name:?} has shape {:?}, architecture needs {:?}",
            found.shape(),
            expected.shape()
        ))
        .into());
    }
    Ok(())
}

impl<T: Scalar> ModelState<T> {
    pub fn to_container(&self) -> Container {
        let meta = ModelMeta {
            config: self.config.clone(),
            scalar: T::NAME.into(),
            step: self.step,
            version: env!("CARGO_PKG_VERSION").into(),
        };
        let mut c = Container::new(MODEL_KIND, serde_json::to_string(&meta).expect("meta serializes"));
        for (name, t) in self.parameters() {
            c.push(name, t);
        }
        for (name, bn) in self.batch_norm_names().into_iter().zip(self.batch_norms()) {
            c.push(format!("{name}.running_mean"), &bn.running_mean);
            c.push(format!("{name}.running_var"), &bn.running_var);
        }
        c
    }

    /// Rebuilds a model from a container. Weights stored at either precision
    /// load into either scalar type.
    pub fn from_container(mut c: Container) -> Result<Self> {
        if c.kind != MODEL_KIND {
            return Err(ContainerError::KindMismatch {
                found: c.kind,
                expected: MODEL_KIND.into(),
            }
            .into());
        }
        let meta: ModelMeta = serde_json::from_str(&c.meta)
            .map_err(|e| ContainerError::Malformed(format!("model metadata: {e}")))?;
        let mut model = ModelState::<T>::build(meta.config, &mut Rng::new(0))?;
        model.step = meta.step;
        let names: Vec<String> = model.parameters().into_iter().map(|(n, _)| n).collect();
        for (name, slot) in names.iter().zip(model.parameters_mut()) {
            let t = c.take::<T>(name)?;
            check_shape(name, slot, &t)?;
            *slot = t;
        }
        let names = model.batch_norm_names();
        for (name, bn) in names.iter().zip(model.batch_norms_mut()) {
            for (suffix, slot) in [("running_mean", &mut bn.running_mean), ("running_var", &mut bn.running_var)] {
                let key = format!("{name}.{suffix}");
                let t = c.take::<T>(&key)?;
                check_shape(&key, slot, &t)?;
                *slot = t;
            }
        }
        if let Some(extra) = c.tensors.first() {
            return Err(ContainerError::Malformed(format!("unexpected tensor {:?}", extra.name)).into());
        }
        Ok(model)
    }
}

pub fn save<T: Scalar>(model: &ModelState<T>, path: &Path) -> Result<()> {
    model.to_container().write(path)
}

pub fn load<T: Scalar>(path: &Path) -> Result<ModelState<T>> {
    ModelState::from_container(Container::read(path, MODEL_KIND)?)
}

/// Loads a model and fails with [`ContainerError::ConfigMismatch`] unless
/// it was built with exactly `expected`.
pub fn load_expecting<T: Scalar>(path: &Path, expected: &ArchConfig) -> Result<ModelState<T>> {
    let model = load::<T>(path)?;
    if &model.config != expected {
        let (a, b) = (
            serde_json::to_value(&model.config).expect("config serializes"),
            serde_json::to_value(expected).expect("config serializes"),
        );
        let fields: Vec<&str> = a
            .as_object()
            .into_iter()
            .flatten()
            .filter(|(k, v)| b.get(k.as_str()) != Some(v))
            .map(|(k, _)| k.as_str())
            .collect();
        return Err(Error::Container(ContainerError::ConfigMismatch(format!(
            "stored model differs in {}",
            fields.join(", ")
        ))));
    }
    Ok(model)
}
