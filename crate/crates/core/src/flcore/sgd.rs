use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::data::Dataset;
use super::model::{Objective, SoftmaxRegression};
use crate::error::{Error, Result};
use crate::ledger::{round_preserving_sum, SampleId};
use crate::math::abs;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelState {
    pub params: Vec<f64>,
    pub round: usize,
}

impl ModelState {
    pub fn zeros(len: usize) -> Self {
        Self { params: vec![0.0; len], round: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BatchPolicy {
    /// `ceil(n / H)`, so H steps see every local sample once.
    #[default]
    DatasetOverH,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalTrainConfig {
    pub local_iterations: usize,
    pub batch_policy: BatchPolicy,
}

impl Default for LocalTrainConfig {
    fn default() -> Self {
        Self { local_iterations: 10, batch_policy: BatchPolicy::DatasetOverH }
    }
}

impl LocalTrainConfig {
    pub fn batch_size(&self, samples: usize) -> usize {
        if samples == 0 {
            return 0;
        }
        match self.batch_policy {
            BatchPolicy::DatasetOverH => samples.div_ceil(self.local_iterations.max(1)),
            BatchPolicy::Fixed(b) => b.clamp(1, samples),
        }
    }
}

/// Everything needed to continue a local SGD run elsewhere: the current
/// parameters, the sampling order and the RNG position.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdCheckpoint {
    pub params: Vec<f64>,
    order: Vec<SampleId>,
    cursor: usize,
    batch: usize,
    step: usize,
    rng: ChaCha8Rng,
}

impl SgdCheckpoint {
    pub fn steps_done(&self) -> usize {
        self.step
    }
}

/// Mini-batch SGD over a fixed sample set. Batches are read from a stream
/// of concatenated random permutations.
pub struct SgdRun<'o, O: Objective + ?Sized> {
    objective: &'o O,
    state: SgdCheckpoint,
    lr: f64,
    grad: Vec<f64>,
    batch_buf: Vec<SampleId>,
}

impl<'o, O: Objective + ?Sized> SgdRun<'o, O> {
    pub fn new(
        objective: &'o O,
        params: Vec<f64>,
        samples: &[SampleId],
        cfg: &LocalTrainConfig,
        lr: f64,
        mut rng: ChaCha8Rng,
    ) -> Result<Self> {
        if params.len() != objective.param_count() {
            return Err(Error::Dimension { expected: objective.param_count(), got: params.len() });
        }
        let mut order = samples.to_vec();
        order.shuffle(&mut rng);
        let batch = cfg.batch_size(order.len());
        Ok(Self::resume(objective, SgdCheckpoint { params, order, cursor: 0, batch, step: 0, rng }, lr))
    }

    pub fn resume(objective: &'o O, state: SgdCheckpoint, lr: f64) -> Self {
        let grad = vec![0.0; state.params.len()];
        Self { objective, state, lr, grad, batch_buf: Vec::new() }
    }

    pub fn params(&self) -> &[f64] {
        &self.state.params
    }

    fn next_batch(&mut self) {
        let s = &mut self.state;
        self.batch_buf.clear();
        while self.batch_buf.len() < s.batch {
            if s.cursor == s.order.len() {
                s.order.shuffle(&mut s.rng);
                s.cursor = 0;
            }
            let take = (s.batch - self.batch_buf.len()).min(s.order.len() - s.cursor);
            self.batch_buf.extend_from_slice(&s.order[s.cursor..s.cursor + take]);
            s.cursor += take;
        }
    }

    /// One SGD step; returns the batch loss before the update.
    pub fn step(&mut self) -> Result<f64> {
        if self.state.order.is_empty() {
            self.state.step += 1;
            return Ok(0.0);
        }
        self.next_batch();
        let loss = self.objective.loss_grad(&self.state.params, &self.batch_buf, &mut self.grad);
        if !loss.is_finite() || self.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { step: self.state.step });
        }
        for (w, g) in self.state.params.iter_mut().zip(&self.grad) {
            *w -= self.lr * g;
        }
        self.state.step += 1;
        Ok(loss)
    }

    pub fn run(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn checkpoint(self) -> SgdCheckpoint {
        self.state
    }
}

/// H local SGD steps starting from `params`.
pub fn local_sgd<O: Objective + ?Sized>(
    objective: &O,
    params: Vec<f64>,
    samples: &[SampleId],
    cfg: &LocalTrainConfig,
    lr: f64,
    rng: ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut run = SgdRun::new(objective, params, samples, cfg, lr, rng)?;
    run.run(cfg.local_iterations)?;
    Ok(run.checkpoint().params)
}

/// Splits H local steps over the serving passes in proportion to the
/// samples each pass processed.
pub fn steps_per_pass(processed: &[f64], local_iterations: usize) -> Vec<usize> {
    let total: f64 = processed.iter().filter(|p| p.is_finite() && **p > 0.0).sum();
    if processed.is_empty() {
        return Vec::new();
    }
    if !(total > 0.0) {
        let mut out = vec![0; processed.len()];
        out[0] = local_iterations;
        return out;
    }
    let scaled: Vec<f64> = processed.iter().map(|p| p.max(0.0) / total * local_iterations as f64).collect();
    let mut out = round_preserving_sum(&scaled, local_iterations);
    let assigned: usize = out.iter().sum();
    if assigned < local_iterations {
        let last = out.len() - 1;
        out[last] += local_iterations - assigned;
    }
    out
}

/// Space-layer training where each pass runs its share of the steps and
/// then hands the run state to the next satellite.
pub fn satellite_training_with_handover<O: Objective + ?Sized>(
    objective: &O,
    params: Vec<f64>,
    samples: &[SampleId],
    cfg: &LocalTrainConfig,
    lr: f64,
    rng: ChaCha8Rng,
    steps: &[usize],
) -> Result<Vec<f64>> {
    let mut carried = SgdRun::new(objective, params, samples, cfg, lr, rng)?.checkpoint();
    for &n in steps {
        let mut run = SgdRun::resume(objective, carried, lr);
        run.run(n)?;
        carried = run.checkpoint();
    }
    Ok(carried.params)
}

/// Weighted average of parameter vectors. Weights must sum to one.
pub fn aggregate(models: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>> {
    if models.len() != weights.len() {
        return Err(Error::Dimension { expected: models.len(), got: weights.len() });
    }
    let sum: f64 = weights.iter().sum();
    if !(abs(sum - 1.0) <= 1e-12) {
        return Err(Error::WeightSum { sum });
    }
    let len = models.first().map_or(0, |m| m.len());
    let mut out = vec![0.0; len];
    for (m, &w) in models.iter().zip(weights) {
        if m.len() != len {
            return Err(Error::Dimension { expected: len, got: m.len() });
        }
        out.iter_mut().zip(m.iter()).for_each(|(o, v)| *o += w * v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub accuracy: f64,
    pub loss: f64,
}

/// Accuracy and mean cross-entropy of softmax parameters on `data`.
pub fn evaluate(params: &[f64], data: &Dataset) -> Metrics {
    if data.is_empty() {
        return Metrics { accuracy: 0.0, loss: 0.0 };
    }
    let model = SoftmaxRegression::new(data);
    let mut correct = 0usize;
    let mut loss = 0.0;
    for i in 0..data.len() {
        let x = data.row(i);
        let y = data.labels[i];
        if model.predict(params, x) == y {
            correct += 1;
        }
        loss += model.sample_loss(params, x, y);
    }
    let n = data.len() as f64;
    Metrics { accuracy: correct as f64 / n, loss: loss / n }
}
