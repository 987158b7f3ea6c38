//! Policy/value function over encoded states.
//!
//! [`Mlp`] is a fully connected network: `tanh` hidden layers, a linear
//! policy head with one logit per flat action (`slot · rows · cols`) and a
//! sigmoid value head predicting remaining return divided by the reward cap.
//! Forward and backward passes are written out by hand in `f64`; all
//! parameters live in one flat vector (per layer: weights input-major, then
//! biases; trunk layers first, then the policy head, then the value head).
//!
//! Initialization: weights `U(-1/√fan_in, 1/√fan_in)`, biases zero.
//! Loss per sample: cross-entropy between the policy target and the softmax
//! of the logits restricted to legal actions, plus squared value error.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub policy_logits: Vec<f64>,
    /// Predicted remaining return / reward cap, in `[0, 1]`.
    pub value: f64,
}

/// Anything the planner can query for priors and a leaf value.
pub trait Evaluator: Sync {
    fn evaluate(&self, features: &[f64]) -> Result<Evaluation>;
}

/// All logits zero, value one half, for any input.
#[derive(Debug, Clone, Copy)]
pub struct UniformEvaluator {
    actions: usize,
}

impl UniformEvaluator {
    pub fn new(actions: usize) -> Self {
        UniformEvaluator { actions }
    }
}

impl Evaluator for UniformEvaluator {
    fn evaluate(&self, _features: &[f64]) -> Result<Evaluation> {
        Ok(Evaluation {
            policy_logits: vec![0.0; self.actions],
            value: 0.5,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arch {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub actions: usize,
}

impl Arch {
    pub fn new(input: usize, hidden: &[usize], actions: usize) -> Self {
        Arch {
            input,
            hidden: hidden.to_vec(),
            actions,
        }
    }

    /// Default widths: two layers of 128 for the 121-wide classic encoding,
    /// scaled with feature length (rounded to a multiple of 16, at least 32).
    pub fn default_for(input: usize, actions: usize) -> Self {
        let width = ((input as f64 * 128.0 / 121.0 / 16.0).round() as usize * 16).max(32);
        Arch::new(input, &[width, width], actions)
    }

    fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input];
        dims.extend(&self.hidden);
        let mut out: Vec<(usize, usize)> = dims.windows(2).map(|w| (w[0], w[1])).collect();
        let last = *dims.last().expect("input dim");
        out.push((last, self.actions));
        out.push((last, 1));
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.input == 0 || self.actions == 0 || self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::ShapeMismatch(format!("degenerate architecture {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    w: usize,
    b: usize,
}

fn layout(arch: &Arch) -> Vec<Layer> {
    let mut off = 0;
    arch.layers()
        .into_iter()
        .map(|(inputs, outputs)| {
            let l = Layer {
                inputs,
                outputs,
                w: off,
                b: off + inputs * outputs,
            };
            off += inputs * outputs + outputs;
            l
        })
        .collect()
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub features: Vec<f64>,
    /// Flat indices of the legal actions (the softmax support).
    pub legal: Vec<usize>,
    /// Target probability per entry of `legal`; sums to 1.
    pub policy: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub grad_norm: f64,
}

impl LossStats {
    pub fn total(&self) -> f64 {
        self.policy_loss + self.value_loss
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    arch: Arch,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

struct Forward {
    /// Input followed by every hidden activation.
    acts: Vec<Vec<f64>>,
    logits: Vec<f64>,
    value: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn affine(params: &[f64], l: Layer, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(&params[l.b..l.b + l.outputs]);
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &params[l.w + i * l.outputs..l.w + (i + 1) * l.outputs];
        for (o, &w) in out.iter_mut().zip(row) {
            *o += xi * w;
        }
    }
}

/// Softmax over `legal` entries of `logits`.
pub fn masked_softmax(logits: &[f64], legal: &[usize]) -> Vec<f64> {
    let max = legal.iter().map(|&a| logits[a]).fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = legal.iter().map(|&a| (logits[a] - max).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

impl Mlp {
    pub fn new(arch: Arch, seed: u64) -> Result<Mlp> {
        arch.validate()?;
        let layers = layout(&arch);
        let mut params = vec![0.0; arch.param_count()];
        let mut rng = seeds::rng(seed);
        for l in &layers {
            let bound = 1.0 / (l.inputs as f64).sqrt();
            for w in &mut params[l.w..l.b] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(Mlp { arch, layers, params })
    }

    /// Checks the architecture against a rule set's feature and action sizes.
    pub fn for_engine(arch: Arch, feature_len: usize, action_count: usize, seed: u64) -> Result<Mlp> {
        if arch.input != feature_len || arch.actions != action_count {
            return Err(Error::ShapeMismatch(format!(
                "architecture expects {} features / {} actions, rule set has {feature_len} / {action_count}",
                arch.input, arch.actions
            )));
        }
        Mlp::new(arch, seed)
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn forward(&self, x: &[f64]) -> Result<Forward> {
        if x.len() != self.arch.input {
            return Err(Error::ShapeMismatch(format!(
                "feature length {} != network input {}",
                x.len(),
                self.arch.input
            )));
        }
        let n = self.layers.len();
        let mut acts = Vec::with_capacity(n - 1);
        acts.push(x.to_vec());
        for &l in &self.layers[..n - 2] {
            let mut h = Vec::with_capacity(l.outputs);
            affine(&self.params, l, acts.last().expect("input"), &mut h);
            h.iter_mut().for_each(|v| *v = v.tanh());
            acts.push(h);
        }
        let top = acts.last().expect("input");
        let mut logits = Vec::with_capacity(self.arch.actions);
        affine(&self.params, self.layers[n - 2], top, &mut logits);
        let mut v = Vec::with_capacity(1);
        affine(&self.params, self.layers[n - 1], top, &mut v);
        Ok(Forward {
            acts,
            logits,
            value: sigmoid(v[0]),
        })
    }

    /// Accumulates the gradient of one sample's loss into `grad`.
    fn backward(&self, fwd: &Forward, dlogits: &[f64], dvalue_pre: f64, grad: &mut [f64]) {
        let n = self.layers.len();
        let top = fwd.acts.last().expect("input");
        let ph = self.layers[n - 2];
        let vh = self.layers[n - 1];

        let mut delta_top = vec![0.0; top.len()];
        for (i, &a) in top.iter().enumerate() {
            let wrow = &self.params[ph.w + i * ph.outputs..ph.w + (i + 1) * ph.outputs];
            let grow = &mut grad[ph.w + i * ph.outputs..ph.w + (i + 1) * ph.outputs];
            let mut back = 0.0;
            for j in 0..ph.outputs {
                let d = dlogits[j];
                if d != 0.0 {
                    grow[j] += a * d;
                    back += wrow[j] * d;
                }
            }
            grad[vh.w + i] += a * dvalue_pre;
            delta_top[i] = back + self.params[vh.w + i] * dvalue_pre;
        }
        for (g, d) in grad[ph.b..ph.b + ph.outputs].iter_mut().zip(dlogits) {
            *g += d;
        }
        grad[vh.b] += dvalue_pre;

        let mut delta = delta_top;
        for k in (0..n - 2).rev() {
            let l = self.layers[k];
            let out = &fwd.acts[k + 1];
            let pre: Vec<f64> = delta.iter().zip(out).map(|(d, a)| d * (1.0 - a * a)).collect();
            let input = &fwd.acts[k];
            let mut below = if k > 0 { vec![0.0; l.inputs] } else { Vec::new() };
            for (i, &x) in input.iter().enumerate() {
                let off = l.w + i * l.outputs;
                if x != 0.0 {
                    for (g, &d) in grad[off..off + l.outputs].iter_mut().zip(&pre) {
                        *g += x * d;
                    }
                }
                if k > 0 {
                    below[i] = self.params[off..off + l.outputs].iter().zip(&pre).map(|(w, d)| w * d).sum();
                }
            }
            for (g, d) in grad[l.b..l.b + l.outputs].iter_mut().zip(&pre) {
                *g += d;
            }
            delta = below;
        }
    }

    fn sample_loss(&self, s: &TrainSample) -> Result<(f64, f64, Forward, Vec<f64>, f64)> {
        let fwd = self.forward(&s.features)?;
        let probs = masked_softmax(&fwd.logits, &s.legal);
        let mut policy_loss = 0.0;
        let mut dlogits = vec![0.0; self.arch.actions];
        for ((&a, &p), &t) in s.legal.iter().zip(&probs).zip(&s.policy) {
            if t > 0.0 {
                policy_loss -= t * p.max(1e-300).ln();
            }
            dlogits[a] = p - t;
        }
        let diff = fwd.value - s.value;
        let value_loss = diff * diff;
        let dvalue_pre = 2.0 * diff * fwd.value * (1.0 - fwd.value);
        Ok((policy_loss, value_loss, fwd, dlogits, dvalue_pre))
    }

    /// Batch-mean loss and its gradient.
    pub fn loss_and_grad(&self, batch: &[TrainSample]) -> Result<(LossStats, Vec<f64>)> {
        self.weighted_loss_and_grad(batch, 1.0)
    }

    /// As [`Mlp::loss_and_grad`] with the value term scaled by `value_weight`
    /// in the gradient; the reported losses stay unweighted.
    pub fn weighted_loss_and_grad(&self, batch: &[TrainSample], value_weight: f64) -> Result<(LossStats, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidTraining("empty training batch".into()));
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut stats = LossStats::default();
        for s in batch {
            let (pl, vl, fwd, dlogits, dv) = self.sample_loss(s)?;
            stats.policy_loss += pl;
            stats.value_loss += vl;
            self.backward(&fwd, &dlogits, value_weight * dv, &mut grad);
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        stats.policy_loss *= scale;
        stats.value_loss *= scale;
        stats.grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        Ok((stats, grad))
    }

    /// Loss only, used by finite differences.
    pub fn loss(&self, batch: &[TrainSample]) -> Result<f64> {
        let mut total = 0.0;
        for s in batch {
            let (pl, vl, ..) = self.sample_loss(s)?;
            total += pl + vl;
        }
        Ok(total / batch.len().max(1) as f64)
    }

    pub fn to_checkpoint(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 4 * self.params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.arch.input as u32).to_le_bytes());
        out.extend_from_slice(&(self.arch.hidden.len() as u32).to_le_bytes());
        for &w in &self.arch.hidden {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.arch.actions as u32).to_le_bytes());
        for &p in &self.params {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        out
    }

    /// Parses a checkpoint; when `expected` is given, the stored architecture
    /// must match it.
    pub fn from_checkpoint(bytes: &[u8], expected: Option<&Arch>) -> Result<Mlp> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let rest = bytes.strip_prefix(CHECKPOINT_MAGIC).ok_or_else(|| bad("wrong magic bytes"))?;
        let mut words = rest.chunks_exact(4);
        let mut next = || -> Result<u32> {
            let c = words.next().ok_or_else(|| bad("truncated header"))?;
            Ok(u32::from_le_bytes(c.try_into().expect("4 bytes")))
        };
        let version = next()?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let input = next()? as usize;
        let depth = next()? as usize;
        if depth > 64 {
            return Err(bad("implausible layer count"));
        }
        let hidden = (0..depth).map(|_| next().map(|w| w as usize)).collect::<Result<Vec<_>>>()?;
        let actions = next()? as usize;
        let arch = Arch::new(input, &hidden, actions);
        arch.validate().map_err(|e| bad(&e.to_string()))?;
        if let Some(want) = expected {
            if *want != arch {
                return Err(bad(&format!("architecture {arch:?} does not match expected {want:?}")));
            }
        }
        let header = CHECKPOINT_MAGIC.len() + 4 * (4 + depth);
        let body = &bytes[header..];
        if body.len() != 4 * arch.param_count() {
            return Err(bad(&format!(
                "parameter block has {} bytes, architecture needs {}",
                body.len(),
                4 * arch.param_count()
            )));
        }
        let params = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        Ok(Mlp {
            layers: layout(&arch),
            arch,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_checkpoint()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, expected: Option<&Arch>) -> Result<Mlp> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Mlp::from_checkpoint(&bytes, expected)
    }

    /// Parameters rounded through `f32`, as a checkpoint round trip would.
    pub fn quantized(&self) -> Mlp {
        let mut m = self.clone();
        m.params.iter_mut().for_each(|p| *p = *p as f32 as f64);
        m
    }
}

pub const CHECKPOINT_MAGIC: &[u8] = b"SGBZ1";
pub const CHECKPOINT_VERSION: u32 = 1;

impl Evaluator for Mlp {
    fn evaluate(&self, features: &[f64]) -> Result<Evaluation> {
        let f = self.forward(features)?;
        Ok(Evaluation {
            policy_logits: f.logits,
            value: f.value,
        })
    }
}

/// Plain SGD with momentum: `v ← μ·v + g`, `θ ← θ − lr·v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    /// Multiplier on the value term of the loss.
    pub value_weight: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(momentum: f64) -> Self {
        Sgd {
            momentum,
            value_weight: 1.0,
            velocity: Vec::new(),
        }
    }

    pub fn with_value_weight(mut self, w: f64) -> Self {
        self.value_weight = w;
        self
    }

    /// One gradient step on `batch`. A non-finite loss leaves the
    /// parameters untouched and reports the offending values.
    pub fn train_batch(&mut self, net: &mut Mlp, batch: &[TrainSample], lr: f64) -> Result<LossStats> {
        let (stats, grad) = net.weighted_loss_and_grad(batch, self.value_weight)?;
        if !stats.policy_loss.is_finite() || !stats.value_loss.is_finite() || !stats.grad_norm.is_finite() {
            return Err(Error::NonFiniteLoss {
                policy: stats.policy_loss,
                value: stats.value_loss,
                step: 0,
            });
        }
        if self.velocity.len() != grad.len() {
            self.velocity = vec![0.0; grad.len()];
        }
        for ((p, v), g) in net.params.iter_mut().zip(&mut self.velocity).zip(&grad) {
            *v = self.momentum * *v + g;
            *p -= lr * *v;
        }
        Ok(stats)
    }
}

/// Deliberate gradient corruption for negative-control tests.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GradFault {
    #[default]
    None,
    /// Adds the given offset to every bias gradient of the first layer.
    BiasOffset(f64),
}

/// Compares analytic gradients with central differences on every bias plus
/// a random subset of weights (at least 200 parameters in total, or all of
/// them for small nets). Relative error is `|a − n| / max(|a|, |n|, 1e-7)`;
/// returns the maximum.
pub fn gradient_check(net: &Mlp, sample: &TrainSample, eps: f64, seed: u64, fault: GradFault) -> Result<f64> {
    let batch = std::slice::from_ref(sample);
    let (_, mut grad) = net.loss_and_grad(batch)?;
    if let GradFault::BiasOffset(d) = fault {
        let first = net.layers[0];
        grad[first.b..first.b + first.outputs].iter_mut().for_each(|g| *g += d);
    }

    let mut idx: Vec<usize> = Vec::new();
    let mut weights: Vec<usize> = Vec::new();
    for l in &net.layers {
        idx.extend(l.b..l.b + l.outputs);
        weights.extend(l.w..l.b);
    }
    let want = 200usize.max(idx.len() + 64);
    if idx.len() + weights.len() <= want {
        idx.extend(weights);
    } else {
        let mut rng = seeds::rng(seed);
        let need = want - idx.len();
        // partial Fisher-Yates
        for k in 0..need {
            let j = rng.gen_range(k..weights.len());
            weights.swap(k, j);
        }
        idx.extend_from_slice(&weights[..need]);
    }

    // Central differences of a loss of size |L| carry rounding noise of about
    // ε·|L|/eps; gradients below 1e4 times that cannot be resolved to 1e-4, so
    // the relative error uses it as a floor in the denominator.
    let base = net.loss(batch)?;
    let floor = (1e4 * 4.0 * f64::EPSILON * base.abs().max(1.0) / eps).max(1e-7);
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for &i in &idx {
        let orig = probe.params[i];
        probe.params[i] = orig + eps;
        let up = probe.loss(batch)?;
        probe.params[i] = orig - eps;
        let down = probe.loss(batch)?;
        probe.params[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grad[i];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(net: &Mlp, seed: u64) -> TrainSample {
        let mut rng = seeds::rng(seed);
        let features: Vec<f64> = (0..net.arch.input).map(|_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 }).collect();
        let mut legal: Vec<usize> = (0..net.arch.actions).filter(|_| rng.gen_bool(0.5)).collect();
        if legal.is_empty() {
            legal.push(0);
        }
        let raw: Vec<f64> = legal.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
        let z: f64 = raw.iter().sum();
        TrainSample {
            features,
            policy: raw.iter().map(|r| r / z).collect(),
            legal,
            value: rng.gen_range(0.0..1.0),
        }
    }

    #[test]
    fn param_count_matches_layer_shapes() {
        let arch = Arch::new(121, &[64, 64], 192);
        assert_eq!(arch.param_count(), 121 * 64 + 64 + 64 * 64 + 64 + 64 * 192 + 192 + 64 + 1);
        let net = Mlp::new(arch, 1).unwrap();
        assert_eq!(net.param_count(), 24513);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = Mlp::new(Arch::new(10, &[8], 6), 3).unwrap();
        let b = Mlp::new(Arch::new(10, &[8], 6), 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Mlp::new(Arch::new(10, &[8], 6), 4).unwrap());
        let bound = 1.0 / 10f64.sqrt();
        assert!(a.params[..80].iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn linear_model_accepted() {
        let net = Mlp::new(Arch::new(5, &[], 3), 0).unwrap();
        assert_eq!(net.param_count(), 5 * 3 + 3 + 5 + 1);
        let e = net.evaluate(&[1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(e.policy_logits.len(), 3);
        assert!((0.0..=1.0).contains(&e.value));
    }

    #[test]
    fn mismatched_shapes_rejected() {
        assert!(Mlp::new(Arch::new(0, &[4], 3), 0).is_err());
        assert!(Mlp::for_engine(Arch::new(10, &[4], 3), 11, 3, 0).is_err());
        let net = Mlp::new(Arch::new(4, &[3], 2), 0).unwrap();
        assert!(net.evaluate(&[0.0; 5]).is_err());
    }

    #[test]
    fn uniform_baseline() {
        let u = UniformEvaluator::new(7);
        let e = u.evaluate(&[1.0, 2.0]).unwrap();
        assert_eq!(e.policy_logits, vec![0.0; 7]);
        assert_eq!(e.value, 0.5);
    }

    #[test]
    fn evaluation_is_pure() {
        let net = Mlp::new(Arch::new(12, &[9, 7], 5), 8).unwrap();
        let s = sample(&net, 1);
        assert_eq!(net.evaluate(&s.features).unwrap(), net.evaluate(&s.features).unwrap());
    }

    #[test]
    fn masked_softmax_zeroes_illegal() {
        let p = masked_softmax(&[1.0, 50.0, -2.0, 0.5], &[0, 2, 3]);
        assert_eq!(p.len(), 3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_point_has_zero_gradient() {
        let net = Mlp::new(Arch::new(12, &[9], 5), 2).unwrap();
        let mut s = sample(&net, 5);
        let e = net.evaluate(&s.features).unwrap();
        s.policy = masked_softmax(&e.policy_logits, &s.legal);
        s.value = e.value;
        let (stats, _) = net.loss_and_grad(&[s]).unwrap();
        assert!(stats.grad_norm <= 1e-8, "{}", stats.grad_norm);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut net = Mlp::new(Arch::new(12, &[9], 5), 2).unwrap();
        let before = net.clone();
        let s = sample(&net, 3);
        let mut opt = Sgd::new(0.9);
        opt.train_batch(&mut net, &[s.clone()], 0.0).unwrap();
        opt.train_batch(&mut net, &[s], 0.0).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn empty_batch_rejected() {
        let mut net = Mlp::new(Arch::new(3, &[], 2), 0).unwrap();
        assert!(Sgd::new(0.9).train_batch(&mut net, &[], 0.1).is_err());
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut net = Mlp::new(Arch::new(3, &[2], 2), 0).unwrap();
        net.params_mut()[0] = f64::NAN;
        let s = TrainSample {
            features: vec![1.0, 1.0, 1.0],
            legal: vec![0, 1],
            policy: vec![0.5, 0.5],
            value: 0.5,
        };
        let before = net.clone();
        let err = Sgd::new(0.9).train_batch(&mut net, &[s], 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }));
        assert_eq!(net.params()[1..], before.params()[1..]);
    }

    #[test]
    fn overfits_single_sample_value() {
        let mut net = Mlp::new(Arch::new(20, &[16, 16], 8), 11).unwrap();
        let mut s = sample(&net, 9);
        s.value = 1.0;
        let mut opt = Sgd::new(0.9);
        for _ in 0..1000 {
            opt.train_batch(&mut net, std::slice::from_ref(&s), 0.05).unwrap();
        }
        assert!(net.evaluate(&s.features).unwrap().value > 0.95);
    }

    #[test]
    fn gradient_check_passes_and_detects_fault() {
        let net = Mlp::new(Arch::new(30, &[12, 10], 9), 4).unwrap();
        let s = sample(&net, 2);
        let err = gradient_check(&net, &s, 1e-5, 0, GradFault::None).unwrap();
        assert!(err < 1e-4, "{err}");
        let bad = gradient_check(&net, &s, 1e-5, 0, GradFault::BiasOffset(1e-2)).unwrap();
        assert!(bad > 1e-2, "{bad}");
    }

    #[test]
    fn linear_gradient_is_near_exact() {
        let net = Mlp::new(Arch::new(8, &[], 4), 6).unwrap();
        let s = sample(&net, 7);
        let err = gradient_check(&net, &s, 1e-5, 0, GradFault::None).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn checkpoint_round_trip_and_rejections() {
        let net = Mlp::new(Arch::new(6, &[5, 4], 3), 1).unwrap();
        let bytes = net.to_checkpoint();
        assert_eq!(&bytes[..5], b"SGBZ1");
        let back = Mlp::from_checkpoint(&bytes, Some(net.arch())).unwrap();
        assert_eq!(back, net.quantized());

        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(Mlp::from_checkpoint(&wrong_magic, None).is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[5] = 9;
        assert!(Mlp::from_checkpoint(&wrong_version, None).is_err());
        assert!(Mlp::from_checkpoint(&bytes[..bytes.len() - 4], None).is_err());
        assert!(Mlp::from_checkpoint(&bytes, Some(&Arch::new(6, &[5], 3))).is_err());
    }
}
