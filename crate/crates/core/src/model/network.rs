use crate::error::{Error, Result};
use crate::layers::{
    dropout, dropout_backward, gaussian_noise, relu, relu_backward, softmax, BatchNormCache, BatchNormParams,
    BatchStats, Conv1dParams, DenseParams, DropoutMask, MaxPool1d, Mode, PReluParams, PoolIndices,
};
use crate::numerics::{Rng, Tensor};
use crate::scalar::Scalar;

use super::config::{ArchConfig, BranchLayout};

const PRELU_INIT: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    pub conv: Conv1dParams<T>,
    pub bn: BatchNormParams<T>,
}

/// Dense → batch norm → PReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct FcBlock<T> {
    pub dense: DenseParams<T>,
    pub bn: BatchNormParams<T>,
    pub prelu: PReluParams<T>,
}

/// Every learnable tensor and running statistic of the network, plus the
/// configuration that shapes them.
///
/// Data flow for a batch `x` of shape `[b × L]`:
///
/// ```text
/// per branch: noise → conv → BN → ReLU → max-pool → flatten (channel-major)
/// merge:      concat(branch₀, branch₁, …, x)
/// dense:      for each fc block: dense → BN → PReLU
/// head:       dropout → dense(num_classes) → softmax
/// ```
///
/// The raw-input skip bypasses the noise layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T> {
    pub config: ArchConfig,
    pub branches: Vec<Branch<T>>,
    pub fc: Vec<FcBlock<T>>,
    pub classifier: DenseParams<T>,
    /// Number of optimizer updates applied so far.
    pub step: u64,
    layout: Vec<BranchLayout>,
    pool: MaxPool1d,
}

struct BranchCache<T> {
    noisy: Tensor<T>,
    bn: BatchNormCache<T>,
    bn_out: Tensor<T>,
    act: Tensor<T>,
    pool: PoolIndices,
}

struct FcCache<T> {
    input: Tensor<T>,
    bn: BatchNormCache<T>,
    bn_out: Tensor<T>,
}

/// Result of a forward pass, holding what the backward pass needs.
pub struct ForwardPass<T> {
    pub logits: Tensor<T>,
    pub probs: Tensor<T>,
    /// Input to the dropout layer: the penultimate features.
    pub features: Tensor<T>,
    batch: usize,
    branches: Vec<BranchCache<T>>,
    merged: Tensor<T>,
    fc: Vec<FcCache<T>>,
    dropout_mask: DropoutMask<T>,
    classifier_in: Tensor<T>,
    bn_stats: Vec<BatchStats<T>>,
}

impl<T: Scalar> ForwardPass<T> {
    /// Post-ReLU, pre-pool activation map of each branch, `[b × filters × conv_len]`.
    pub fn branch_activations(&self) -> Vec<&Tensor<T>> {
        self.branches.iter().map(|c| &c.act).collect()
    }

    pub fn merged(&self) -> &Tensor<T> {
        &self.merged
    }
}

/// Gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    /// One entry per learnable tensor, in [`ModelState::parameters`] order.
    pub params: Vec<Tensor<T>>,
    /// Gradient with respect to the input batch, `[b × L]`.
    pub input: Tensor<T>,
    /// Gradient with respect to each branch's post-ReLU activation map.
    pub branch_activations: Vec<Tensor<T>>,
}

fn uniform_init<T: Scalar>(rng: &mut Rng, shape: Vec<usize>, fan_in: usize, gain: f64) -> Tensor<T> {
    let limit = (gain / fan_in as f64).sqrt();
    Tensor::uniform(rng, shape, -limit, limit)
}

impl<T: Scalar> ModelState<T> {
    /// Fresh network with fan-in-scaled uniform weights (`±sqrt(6/fan_in)`
    /// for layers followed by a rectifier, `±sqrt(3/fan_in)` for the
    /// classifier), zero biases, BN `γ = 1, β = 0` and PReLU `α = 0.25`.
    pub fn build(config: ArchConfig, rng: &mut Rng) -> Result<Self> {
        let layout = config.layout()?;
        let eps = T::cast(config.bn_epsilon);
        let mom = T::cast(config.bn_momentum);
        let branches = config
            .branches
            .iter()
            .map(|b| {
                Ok(Branch {
                    conv: Conv1dParams::new(
                        uniform_init(rng, vec![b.filters, 1, b.width], b.width, 6.0),
                        Tensor::zeros(vec![b.filters]),
                        b.stride,
                    )?,
                    bn: BatchNormParams::new(b.filters, eps, mom)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut fan_in = config.merged_len()?;
        let mut fc = Vec::with_capacity(config.fc_units.len());
        for &units in &config.fc_units {
            fc.push(FcBlock {
                dense: DenseParams::new(uniform_init(rng, vec![units, fan_in], fan_in, 6.0), Tensor::zeros(vec![units]))?,
                bn: BatchNormParams::new(units, eps, mom)?,
                prelu: if config.prelu_per_channel {
                    PReluParams::per_channel(units, T::cast(PRELU_INIT))
                } else {
                    PReluParams::shared(T::cast(PRELU_INIT))
                },
            });
            fan_in = units;
        }
        let classifier = DenseParams::new(
            uniform_init(rng, vec![config.num_classes, fan_in], fan_in, 3.0),
            Tensor::zeros(vec![config.num_classes]),
        )?;
        let pool = MaxPool1d::new(config.pool.window, config.pool.stride)?;
        Ok(ModelState {
            config,
            branches,
            fc,
            classifier,
            step: 0,
            layout,
            pool,
        })
    }

    pub fn branch_layout(&self) -> &[BranchLayout] {
        &self.layout
    }

    /// Learnable tensors with stable names, in canonical order.
    pub fn parameters(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, b) in self.branches.iter().enumerate() {
            out.push((format!("branch{i}.conv.kernels"), &b.conv.kernels));
            out.push((format!("branch{i}.conv.bias"), &b.conv.bias));
            out.push((format!("branch{i}.bn.gamma"), &b.bn.gamma));
            out.push((format!("branch{i}.bn.beta"), &b.bn.beta));
        }
        for (i, f) in self.fc.iter().enumerate() {
            out.push((format!("fc{i}.dense.weights"), &f.dense.weights));
            out.push((format!("fc{i}.dense.bias"), &f.dense.bias));
            out.push((format!("fc{i}.bn.gamma"), &f.bn.gamma));
            out.push((format!("fc{i}.bn.beta"), &f.bn.beta));
            out.push((format!("fc{i}.prelu.alpha"), &f.prelu.alpha));
        }
        out.push(("classifier.weights".into(), &self.classifier.weights));
        out.push(("classifier.bias".into(), &self.classifier.bias));
        out
    }

    /// Mutable view of the tensors listed by [`ModelState::parameters`].
    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for b in &mut self.branches {
            out.push(&mut b.conv.kernels);
            out.push(&mut b.conv.bias);
            out.push(&mut b.bn.gamma);
            out.push(&mut b.bn.beta);
        }
        for f in &mut self.fc {
            out.push(&mut f.dense.weights);
            out.push(&mut f.dense.bias);
            out.push(&mut f.bn.gamma);
            out.push(&mut f.bn.beta);
            out.push(&mut f.prelu.alpha);
        }
        out.push(&mut self.classifier.weights);
        out.push(&mut self.classifier.bias);
        out
    }

    /// Running statistics of every batch-norm layer with its name prefix,
    /// branches first.
    pub fn batch_norm_names(&self) -> Vec<String> {
        (0..self.branches.len())
            .map(|i| format!("branch{i}.bn"))
            .chain((0..self.fc.len()).map(|i| format!("fc{i}.bn")))
            .collect()
    }

    pub fn batch_norms(&self) -> Vec<&BatchNormParams<T>> {
        self.branches.iter().map(|b| &b.bn).chain(self.fc.iter().map(|f| &f.bn)).collect()
    }

    pub(crate) fn batch_norms_mut(&mut self) -> Vec<&mut BatchNormParams<T>> {
        self.branches
            .iter_mut()
            .map(|b| &mut b.bn)
            .chain(self.fc.iter_mut().map(|f| &mut f.bn))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.len()).sum()
    }

    /// Accepts `[b × L]` or `[b × 1 × L]`, returns `[b × 1 × L]`.
    fn input_view(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let l = self.config.input_length;
        match *batch.shape() {
            [b, len] if len == l => batch.clone().reshape(vec![b, 1, l]),
            [_, 1, len] if len == l => Ok(batch.clone()),
            ref s => Err(Error::Shape(format!("expected batch of length-{l} series, got shape {s:?}"))),
        }
    }

    /// Runs the network. Train mode uses batch statistics, noise and dropout
    /// (drawn from `rng`); the running statistics are not updated until
    /// [`ModelState::commit_running_stats`] is called with the pass.
    pub fn forward(&self, batch: &Tensor<T>, mode: Mode, rng: &mut Rng) -> Result<ForwardPass<T>> {
        let x = self.input_view(batch)?;
        let b = x.shape()[0];
        let mut bn_stats = Vec::new();
        let mut branch_caches = Vec::with_capacity(self.branches.len());
        let mut merged_rows: Vec<Vec<T>> = vec![Vec::with_capacity(self.config.merged_len()?); b];
        for branch in &self.branches {
            let noisy = gaussian_noise(self.config.noise_std, &x, rng, mode)?;
            let conv_out = branch.conv.forward(&noisy)?;
            let (bn_out, bn, stats) = branch.bn.forward_batch(&conv_out, mode)?;
            bn_stats.extend(stats);
            let act = relu(&bn_out);
            let (pooled, pool) = self.pool.forward(&act)?;
            let flat = pooled.len() / b;
            for (row, chunk) in merged_rows.iter_mut().zip(pooled.data().chunks(flat)) {
                row.extend_from_slice(chunk);
            }
            branch_caches.push(BranchCache {
                noisy,
                bn,
                bn_out,
                act,
                pool,
            });
        }
        for (row, raw) in merged_rows.iter_mut().zip(x.data().chunks(self.config.input_length)) {
            row.extend_from_slice(raw);
        }
        let merged = Tensor::from_rows(&merged_rows)?;

        let mut h = merged.clone();
        let mut fc_caches = Vec::with_capacity(self.fc.len());
        for block in &self.fc {
            let z = block.dense.forward(&h)?;
            let (bn_out, bn, stats) = block.bn.forward_batch(&z, mode)?;
            bn_stats.extend(stats);
            let out = block.prelu.forward(&bn_out)?;
            fc_caches.push(FcCache { input: h, bn, bn_out });
            h = out;
        }
        let features = h;
        let (classifier_in, dropout_mask) = dropout(self.config.dropout_rate, &features, rng, mode)?;
        let logits = self.classifier.forward(&classifier_in)?;
        let probs = softmax(&logits)?;
        Ok(ForwardPass {
            logits,
            probs,
            features,
            batch: b,
            branches: branch_caches,
            merged,
            fc: fc_caches,
            dropout_mask,
            classifier_in,
            bn_stats,
        })
    }

    /// Folds the batch statistics of a train-mode pass into the running
    /// estimates (no-op for inference passes).
    pub fn commit_running_stats(&mut self, pass: &ForwardPass<T>) {
        if pass.bn_stats.is_empty() {
            return;
        }
        for (bn, stats) in self.batch_norms_mut().into_iter().zip(&pass.bn_stats) {
            bn.update_running(stats);
        }
    }

    /// Inference-mode class probabilities, `[b × num_classes]`.
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(batch, Mode::Infer, &mut Rng::new(0))?.probs)
    }

    /// Inference-mode penultimate features (the classifier layer's input).
    pub fn extract_features(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(batch, Mode::Infer, &mut Rng::new(0))?.features)
    }

    /// Backpropagates `d_logits` (gradient of some scalar with respect to
    /// the pre-softmax logits) through the pass.
    pub fn backward(&self, pass: &ForwardPass<T>, d_logits: &Tensor<T>) -> Result<Gradients<T>> {
        let b = pass.batch;
        if d_logits.shape() != pass.logits.shape() {
            return Err(Error::Shape("logit gradient does not match the forward pass".into()));
        }
        let cls = self.classifier.backward(&pass.classifier_in, d_logits)?;
        let mut grad = dropout_backward(&pass.dropout_mask, &cls.d_input)?;

        let mut fc_grads = Vec::with_capacity(self.fc.len());
        for (block, cache) in self.fc.iter().zip(&pass.fc).rev() {
            let (d_bn_out, d_alpha) = block.prelu.backward(&cache.bn_out, &grad)?;
            let bn = block.bn.backward(&cache.bn, &d_bn_out)?;
            let dense = block.dense.backward(&cache.input, &bn.d_input)?;
            grad = dense.d_input;
            fc_grads.push([dense.d_weights, dense.d_bias, bn.d_gamma, bn.d_beta, d_alpha]);
        }
        fc_grads.reverse();

        let merged_len = pass.merged.shape()[1];
        let d_merged = grad.data();
        let l = self.config.input_length;
        let mut d_input = vec![T::zero(); b * l];
        for n in 0..b {
            let src = &d_merged[n * merged_len + merged_len - l..(n + 1) * merged_len];
            d_input[n * l..(n + 1) * l].copy_from_slice(src);
        }

        let mut offset = 0;
        let mut branch_grads = Vec::with_capacity(self.branches.len());
        let mut act_grads = Vec::with_capacity(self.branches.len());
        for ((branch, cache), layout) in self.branches.iter().zip(&pass.branches).zip(&self.layout) {
            let flat = layout.flat_len();
            let mut d_pooled = Vec::with_capacity(b * flat);
            for n in 0..b {
                d_pooled.extend_from_slice(&d_merged[n * merged_len + offset..n * merged_len + offset + flat]);
            }
            offset += flat;
            let d_pooled = Tensor::new(vec![b, layout.filters, layout.pooled_len], d_pooled)?;
            let d_act = self.pool.backward(&cache.pool, &d_pooled)?;
            let d_bn_out = relu_backward(&cache.bn_out, &d_act)?;
            let bn = branch.bn.backward(&cache.bn, &d_bn_out)?;
            let conv = branch.conv.backward(&cache.noisy, &bn.d_input)?;
            for (d, &g) in d_input.iter_mut().zip(conv.d_input.data()) {
                *d += g;
            }
            act_grads.push(d_act);
            branch_grads.push([conv.d_kernels, conv.d_bias, bn.d_gamma, bn.d_beta]);
        }

        let mut params = Vec::new();
        for g in branch_grads {
            params.extend(g);
        }
        for g in fc_grads {
            params.extend(g);
        }
        params.push(cls.d_weights);
        params.push(cls.d_bias);
        Ok(Gradients {
            params,
            input: Tensor::new(vec![b, l], d_input)?,
            branch_activations: act_grads,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{one_hot, softmax_xent};
    use crate::model::config::{BranchSpec, PoolSpec};
    use crate::testutil::{central_diff, rel_err};

    fn small_config() -> ArchConfig {
        ArchConfig {
            input_length: 24,
            branches: vec![
                BranchSpec { filters: 3, width: 4, stride: 2 },
                BranchSpec { filters: 2, width: 6, stride: 3 },
            ],
            pool: PoolSpec { window: 2, stride: 2 },
            fc_units: vec![7, 5],
            num_classes: 3,
            noise_std: 0.05,
            dropout_rate: 0.3,
            bn_epsilon: 1e-5,
            bn_momentum: 0.9,
            prelu_per_channel: false,
        }
    }

    #[test]
    fn parameter_count_matches_closed_form() {
        for cfg in [small_config(), ArchConfig::standard(128, 15), {
            let mut c = small_config();
            c.prelu_per_channel = true;
            c
        }] {
            let m = ModelState::<f64>::build(cfg.clone(), &mut Rng::new(1)).unwrap();
            assert_eq!(m.parameter_count(), cfg.parameter_count().unwrap());
        }
    }

    #[test]
    fn output_rows_are_distributions() {
        let mut rng = Rng::new(2);
        let m = ModelState::<f64>::build(ArchConfig::standard(128, 15), &mut rng).unwrap();
        let x = Tensor::uniform(&mut rng, vec![4, 128], 0.0, 1.0);
        let p = m.predict(&x).unwrap();
        assert_eq!(p.shape(), &[4, 15]);
        for row in p.data().chunks(15) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(m.extract_features(&x).unwrap().shape(), &[4, 128]);
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let mut rng = Rng::new(3);
        let mut m = ModelState::<f64>::build(small_config(), &mut rng).unwrap();
        for t in m.parameters_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let p = m.predict(&Tensor::uniform(&mut rng, vec![2, 24], -1.0, 1.0)).unwrap();
        assert!(p.data().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn infer_is_deterministic_and_rejects_bad_length() {
        let mut rng = Rng::new(4);
        let m = ModelState::<f64>::build(small_config(), &mut rng).unwrap();
        let x = Tensor::uniform(&mut rng, vec![3, 24], -1.0, 1.0);
        assert_eq!(m.predict(&x).unwrap(), m.predict(&x).unwrap());
        assert!(matches!(m.predict(&Tensor::zeros(vec![3, 25])), Err(Error::Shape(_))));
    }

    #[test]
    fn commit_updates_running_stats_only_in_train_mode() {
        let mut rng = Rng::new(5);
        let mut m = ModelState::<f64>::build(small_config(), &mut rng).unwrap();
        let x = Tensor::uniform(&mut rng, vec![4, 24], -1.0, 1.0);
        let before = m.clone();
        let pass = m.forward(&x, Mode::Infer, &mut rng).unwrap();
        m.commit_running_stats(&pass);
        assert_eq!(m, before);
        let pass = m.forward(&x, Mode::Train, &mut rng).unwrap();
        m.commit_running_stats(&pass);
        assert_ne!(m.branches[0].bn.running_mean, before.branches[0].bn.running_mean);
        assert_eq!(m.parameters()[0].1, before.parameters()[0].1);
    }

    fn check_model_grads(mode: Mode, seed: u64) {
        let mut rng = Rng::new(seed);
        let mut m = ModelState::<f64>::build(small_config(), &mut rng).unwrap();
        for bn in m.batch_norms_mut() {
            bn.running_mean = Tensor::uniform(&mut rng, bn.running_mean.shape().to_vec(), -0.2, 0.2);
            bn.running_var = Tensor::uniform(&mut rng, bn.running_var.shape().to_vec(), 0.5, 1.5);
        }
        let x = Tensor::uniform(&mut rng, vec![5, 24], -1.0, 1.0);
        let targets = one_hot(&[0, 1, 2, 1, 0], 3).unwrap();
        let pass_seed = rng.next_u64();
        let loss = |m: &ModelState<f64>, x: &Tensor<f64>| {
            let pass = m.forward(x, mode, &mut Rng::new(pass_seed)).unwrap();
            softmax_xent(&pass.logits, &targets).unwrap().0
        };
        let pass = m.forward(&x, mode, &mut Rng::new(pass_seed)).unwrap();
        let (_, d_logits) = softmax_xent(&pass.logits, &targets).unwrap();
        let grads = m.backward(&pass, &d_logits).unwrap();

        let num = central_diff(x.data(), 1e-5, |v| loss(&m, &Tensor::new(vec![5, 24], v.to_vec()).unwrap()));
        let err = rel_err(grads.input.data(), &num);
        assert!(err < 1e-4, "{mode:?} input rel err {err}");

        let names: Vec<String> = m.parameters().into_iter().map(|(n, _)| n).collect();
        for (i, name) in names.iter().enumerate() {
            let base = m.parameters()[i].1.clone();
            let num = central_diff(base.data(), 1e-5, |v| {
                let mut q = m.clone();
                q.parameters_mut()[i].data_mut().copy_from_slice(v);
                loss(&q, &x)
            });
            let a = grads.params[i].data();
            // biases feeding a train-mode BN have identically zero gradient
            let scale = a.iter().chain(&num).map(|v| v.abs()).fold(0.0, f64::max);
            if scale < 1e-8 {
                continue;
            }
            let err = rel_err(a, &num);
            assert!(err < 1e-4, "{mode:?} {name} rel err {err}");
        }
    }

    #[test]
    fn full_model_gradients_infer() {
        check_model_grads(Mode::Infer, 10);
    }

    #[test]
    fn full_model_gradients_train() {
        check_model_grads(Mode::Train, 11);
    }
}
