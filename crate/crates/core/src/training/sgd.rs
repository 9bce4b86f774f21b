use crate::error::{Error, Result};
use crate::layers::{one_hot, softmax_xent, Mode};
use crate::model::{Gradients, ModelState};
use crate::numerics::{Rng, Tensor};
use crate::scalar::Scalar;

use super::TrainConfig;

/// `lr0 / (1 + decay·t)` after `t` updates.
pub fn learning_rate(cfg: &TrainConfig, t: u64) -> f64 {
    cfg.lr0 / (1.0 + cfg.decay * t as f64)
}

/// Applies one plain SGD update at the model's current step and advances
/// the step. Gradients are checked before any parameter changes; a
/// non-finite entry aborts naming the parameter.
pub fn sgd_step<T: Scalar>(model: &mut ModelState<T>, grads: &Gradients<T>, cfg: &TrainConfig) -> Result<f64> {
    let names: Vec<String> = model.parameters().into_iter().map(|(n, _)| n).collect();
    if grads.params.len() != names.len() {
        return Err(Error::Shape(format!(
            "{} gradients for {} parameters",
            grads.params.len(),
            names.len()
        )));
    }
    for ((name, g), (_, p)) in names.iter().zip(&grads.params).zip(model.parameters()) {
        if g.shape() != p.shape() {
            return Err(Error::Shape(format!("gradient of {name} has shape {:?}, expected {:?}", g.shape(), p.shape())));
        }
        if !g.all_finite() {
            return Err(Error::numeric(name.clone(), format!("non-finite gradient at step {}", model.step)));
        }
    }
    let lr = learning_rate(cfg, model.step);
    let step = T::cast(lr);
    for (p, g) in model.parameters_mut().into_iter().zip(&grads.params) {
        for (w, &d) in p.data_mut().iter_mut().zip(g.data()) {
            *w -= step * d;
        }
    }
    model.step += 1;
    Ok(lr)
}

/// One train-mode forward/backward/update on a batch. Returns the mean
/// cross-entropy before the update and the number of correct predictions.
pub fn train_batch<T: Scalar>(
    model: &mut ModelState<T>,
    x: &Tensor<T>,
    labels: &[usize],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<(f64, usize)> {
    let pass = model.forward(x, Mode::Train, rng)?;
    let targets = one_hot(labels, model.config.num_classes)?;
    let (loss, d_logits) = softmax_xent(&pass.logits, &targets)?;
    if !loss.is_finite() {
        return Err(Error::numeric("loss", format!("non-finite loss at step {}", model.step)));
    }
    let correct = super::argmax_rows(&pass.probs).iter().zip(labels).filter(|(p, l)| p == l).count();
    let grads = model.backward(&pass, &d_logits)?;
    sgd_step(model, &grads, cfg)?;
    model.commit_running_stats(&pass);
    Ok((loss.as_f64(), correct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArchConfig;

    #[test]
    fn schedule_values() {
        let cfg = TrainConfig::default();
        assert_eq!(learning_rate(&cfg, 0), 0.005);
        assert!((learning_rate(&cfg, 1_000_000) - 0.0025).abs() < 1e-15);
        let flat = TrainConfig { decay: 0.0, ..cfg };
        assert!([0, 1, 10, 1 << 40].iter().all(|&t| learning_rate(&flat, t) == 0.005));
    }

    fn tiny() -> (ModelState<f64>, Tensor<f64>, Vec<usize>) {
        let mut rng = Rng::new(1);
        let mut arch = ArchConfig::standard(32, 3);
        arch.fc_units = vec![16, 8];
        let m = ModelState::build(arch, &mut rng).unwrap();
        let x = Tensor::uniform(&mut rng, vec![6, 32], -1.0, 1.0);
        (m, x, vec![0, 1, 2, 0, 1, 2])
    }

    #[test]
    fn step_moves_along_negative_gradient() {
        let (mut m, x, y) = tiny();
        let before = m.clone();
        let pass = m.forward(&x, Mode::Infer, &mut Rng::new(0)).unwrap();
        let (_, d) = softmax_xent(&pass.logits, &one_hot(&y, 3).unwrap()).unwrap();
        let grads = m.backward(&pass, &d).unwrap();
        let lr = sgd_step(&mut m, &grads, &TrainConfig::default()).unwrap();
        assert_eq!(lr, 0.005);
        assert_eq!(m.step, 1);
        for ((_, a), (b, g)) in m.parameters().iter().zip(before.parameters().iter().map(|(_, t)| *t).zip(&grads.params)) {
            for ((&w1, &w0), &gi) in a.data().iter().zip(b.data()).zip(g.data()) {
                assert_eq!(w1, w0 - 0.005 * gi);
            }
        }
    }

    #[test]
    fn small_step_decreases_loss_on_fixed_batch() {
        let (mut m, x, y) = tiny();
        let targets = one_hot(&y, 3).unwrap();
        let loss = |m: &ModelState<f64>| {
            let p = m.forward(&x, Mode::Infer, &mut Rng::new(0)).unwrap();
            softmax_xent(&p.logits, &targets).unwrap().0
        };
        let l0 = loss(&m);
        let pass = m.forward(&x, Mode::Infer, &mut Rng::new(0)).unwrap();
        let (_, d) = softmax_xent(&pass.logits, &targets).unwrap();
        let grads = m.backward(&pass, &d).unwrap();
        let cfg = TrainConfig { lr0: 1e-4, ..Default::default() };
        sgd_step(&mut m, &grads, &cfg).unwrap();
        assert!(loss(&m) < l0);
    }

    #[test]
    fn non_finite_gradient_names_parameter_and_leaves_model() {
        let (mut m, x, y) = tiny();
        let pass = m.forward(&x, Mode::Infer, &mut Rng::new(0)).unwrap();
        let (_, d) = softmax_xent(&pass.logits, &one_hot(&y, 3).unwrap()).unwrap();
        let mut grads = m.backward(&pass, &d).unwrap();
        grads.params[4].data_mut()[0] = f64::NAN;
        let before = m.clone();
        match sgd_step(&mut m, &grads, &TrainConfig::default()) {
            Err(Error::Numeric { layer, .. }) => assert_eq!(layer, "branch1.conv.kernels"),
            r => panic!("{r:?}"),
        }
        assert_eq!(m, before);
    }
}
