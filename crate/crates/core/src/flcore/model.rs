use alloc::vec;
use alloc::vec::Vec;

use super::data::Dataset;
use crate::ledger::SampleId;
use crate::math::{dot, exp, ln};

/// A per-sample loss averaged over a batch.
pub trait Objective: Sync {
    fn param_count(&self) -> usize;

    /// Mean loss over `batch`; its gradient is written to `grad`.
    fn loss_grad(&self, w: &[f64], batch: &[SampleId], grad: &mut [f64]) -> f64;

    fn loss(&self, w: &[f64], batch: &[SampleId]) -> f64 {
        let mut g = vec![0.0; self.param_count()];
        self.loss_grad(w, batch, &mut g)
    }
}

/// Multinomial logistic regression. Parameters are `classes x dim` weights
/// followed by `classes` biases.
#[derive(Debug, Clone, Copy)]
pub struct SoftmaxRegression<'a> {
    pub data: &'a Dataset,
}

impl<'a> SoftmaxRegression<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        Self { data }
    }

    fn logits(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        let (c, d) = (self.data.classes, self.data.dim);
        for k in 0..c {
            out[k] = dot(&w[k * d..(k + 1) * d], x) + w[c * d + k];
        }
    }

    /// Log-softmax in place; returns nothing, `out` holds log-probabilities.
    fn log_softmax(out: &mut [f64]) {
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + ln(out.iter().map(|z| exp(z - max)).sum::<f64>());
        out.iter_mut().for_each(|z| *z -= lse);
    }

    pub fn predict(&self, w: &[f64], x: &[f64]) -> u8 {
        let mut z = vec![0.0; self.data.classes];
        self.logits(w, x, &mut z);
        let mut best = 0;
        for k in 1..z.len() {
            if z[k] > z[best] {
                best = k;
            }
        }
        best as u8
    }

    /// Cross-entropy of one sample from another dataset with the same shape.
    pub fn sample_loss(&self, w: &[f64], x: &[f64], label: u8) -> f64 {
        let mut z = vec![0.0; self.data.classes];
        self.logits(w, x, &mut z);
        Self::log_softmax(&mut z);
        -z[label as usize]
    }
}

impl Objective for SoftmaxRegression<'_> {
    fn param_count(&self) -> usize {
        self.data.classes * (self.data.dim + 1)
    }

    fn loss_grad(&self, w: &[f64], batch: &[SampleId], grad: &mut [f64]) -> f64 {
        let (c, d) = (self.data.classes, self.data.dim);
        grad.iter_mut().for_each(|g| *g = 0.0);
        if batch.is_empty() {
            return 0.0;
        }
        let mut z = vec![0.0; c];
        let mut loss = 0.0;
        for &i in batch {
            let x = self.data.row(i as usize);
            let y = self.data.labels[i as usize] as usize;
            self.logits(w, x, &mut z);
            Self::log_softmax(&mut z);
            loss -= z[y];
            for k in 0..c {
                let r = exp(z[k]) - if k == y { 1.0 } else { 0.0 };
                for (g, xi) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *g += r * xi;
                }
                grad[c * d + k] += r;
            }
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        loss * scale
    }
}

/// `l(w; x) = 1/2 (w - x)^T A (w - x)` with a symmetric positive
/// semi-definite `A` shared by every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTask {
    pub dim: usize,
    /// Row-major `dim x dim`.
    pub a: Vec<f64>,
    /// Row-major `n x dim` sample centres.
    pub points: Vec<f64>,
}

impl QuadraticTask {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Mean of the centres in `ids`.
    pub fn centroid(&self, ids: &[SampleId]) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for &i in ids {
            m.iter_mut().zip(self.point(i as usize)).for_each(|(a, b)| *a += b);
        }
        let n = ids.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|r| dot(&self.a[r * self.dim..(r + 1) * self.dim], v)).collect()
    }
}

impl Objective for QuadraticTask {
    fn param_count(&self) -> usize {
        self.dim
    }

    fn loss_grad(&self, w: &[f64], batch: &[SampleId], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        if batch.is_empty() {
            return 0.0;
        }
        let mut loss = 0.0;
        let mut diff = vec![0.0; self.dim];
        for &i in batch {
            diff.iter_mut().zip(w.iter().zip(self.point(i as usize))).for_each(|(d, (a, b))| *d = a - b);
            let ad = self.apply(&diff);
            loss += 0.5 * dot(&diff, &ad);
            grad.iter_mut().zip(&ad).for_each(|(g, v)| *g += v);
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        loss * scale
    }
}
