use serde::{Deserialize, Serialize};

use crate::ccdc::Series;
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::model::ModelState;
use crate::numerics::{Rng, Tensor};
use crate::scalar::Scalar;

use super::logit_selector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActMaxConfig {
    pub steps: usize,
    pub step_size: f64,
    /// Weight `λ` of the `λ‖x‖²` penalty.
    pub l2_penalty: f64,
    /// Clamp the input to `[0, 1.2]` after every step.
    pub clip: bool,
    /// Standard deviation of the random starting input.
    pub init_std: f64,
    pub seed: u64,
}

impl Default for ActMaxConfig {
    fn default() -> Self {
        ActMaxConfig {
            steps: 200,
            step_size: 0.1,
            l2_penalty: 0.01,
            clip: false,
            init_std: 0.1,
            seed: 0,
        }
    }
}

const CLIP_RANGE: (f64, f64) = (0.0, 1.2);
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActMaxResult {
    pub series: Series,
    pub class_id: usize,
    /// Objective after each accepted step, starting with the initial value.
    pub objective_trace: Vec<f64>,
}

impl ActMaxResult {
    pub fn initial_objective(&self) -> f64 {
        self.objective_trace[0]
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace starts non-empty")
    }
}

fn clip(x: &mut [f64], on: bool) {
    if on {
        x.iter_mut().for_each(|v| *v = v.clamp(CLIP_RANGE.0, CLIP_RANGE.1));
    }
}

/// Class logit, `λ‖x‖²`-penalized objective and logit gradient at `x`.
fn evaluate<T: Scalar>(model: &ModelState<T>, x: &[f64], class_id: usize, lambda: f64) -> Result<(f64, Vec<f64>)> {
    let input = Tensor::new(vec![1, x.len()], x.iter().map(|&v| T::cast(v)).collect())?;
    let pass = model.forward(&input, Mode::Infer, &mut Rng::new(0))?;
    let logit = pass.logits.data()[class_id].as_f64();
    let grads = model.backward(&pass, &logit_selector(model, 1, class_id)?)?;
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    Ok((logit - lambda * norm2, grads.input.data().iter().map(|g| g.as_f64()).collect()))
}

/// Searches for an input that maximizes the pre-softmax logit of
/// `class_id` minus `λ‖x‖²`, holding the model fixed in inference mode.
///
/// Each step takes a gradient step on the logit and applies the exact
/// proximal map of the penalty, `x ← (x + η∇logit) / (1 + 2ηλ)`. A step
/// that lowers the objective is retried with half the step size.
pub fn activation_max<T: Scalar>(model: &ModelState<T>, class_id: usize, cfg: &ActMaxConfig) -> Result<ActMaxResult> {
    if !(cfg.step_size > 0.0) || !(cfg.l2_penalty >= 0.0) {
        return Err(Error::Parameter("activation maximization needs step_size > 0 and l2_penalty >= 0".into()));
    }
    logit_selector(model, 1, class_id)?;
    let len = model.config.input_length;
    let mut rng = Rng::new(cfg.seed);
    let mut x: Vec<f64> = (0..len).map(|_| cfg.init_std * rng.standard_normal()).collect();
    clip(&mut x, cfg.clip);
    let (mut obj, mut grad) = evaluate(model, &x, class_id, cfg.l2_penalty)?;
    if !obj.is_finite() {
        return Err(Error::numeric("activation_max", "non-finite objective at the starting point"));
    }
    let mut trace = vec![obj];
    let mut eta = cfg.step_size;
    for step in 0..cfg.steps {
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let shrink = 1.0 + 2.0 * eta * cfg.l2_penalty;
            let mut cand: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| (v + eta * g) / shrink).collect();
            clip(&mut cand, cfg.clip);
            let (cand_obj, cand_grad) = evaluate(model, &cand, class_id, cfg.l2_penalty)?;
            if !cand_obj.is_finite() {
                return Err(Error::numeric(
                    "activation_max",
                    format!("non-finite objective at step {step} (step size {eta:e})"),
                ));
            }
            if cand_obj >= obj {
                x = cand;
                obj = cand_obj;
                grad = cand_grad;
                accepted = true;
                break;
            }
            eta /= 2.0;
        }
        if !accepted {
            log::debug!("activation maximization stalled at step {step}");
            break;
        }
        trace.push(obj);
    }
    Ok(ActMaxResult {
        series: Series {
            id: format!("actmax-class{class_id}"),
            values: x,
        },
        class_id,
        objective_trace: trace,
    })
}
