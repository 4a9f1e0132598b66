//! Convergence constants and the non-convex convergence bound.
//!
//! On quadratic tasks every constant is available in closed form, which is
//! what makes the bound checkable. For other objectives the constants are
//! estimated from probes and are only indicative.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::flcore::{aggregate, local_sgd, LocalTrainConfig, Objective, QuadraticTask};
use crate::ledger::SampleId;
use crate::math::{norm_sq, sqrt};
use crate::rng::{purpose, stream};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvergenceConstants {
    /// Smoothness.
    pub l: f64,
    /// Mini-batch gradient variance bound.
    pub sigma_g2: f64,
    /// Relative dissimilarity coefficient.
    pub c: f64,
    /// Absolute dissimilarity term.
    pub delta2: f64,
    pub f_star: f64,
}

/// Inputs of one round to the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundRound {
    pub eta: f64,
    /// Sum of squared aggregation weights over every node.
    pub lambda_sq: f64,
    pub delta2: f64,
}

/// Largest learning rate allowed at a round with dissimilarity `c`.
pub fn max_learning_rate(constants: &ConvergenceConstants, local_iterations: usize) -> f64 {
    1.0 / (2.0 * sqrt(1.0 + constants.c) * local_iterations as f64 * constants.l)
}

pub fn lambda_sq_sum(weights: &[f64]) -> f64 {
    weights.iter().map(|w| w * w).sum()
}

/// Right-hand side of the convergence bound on the weighted average of
/// squared global gradient norms.
pub fn convergence_bound(constants: &ConvergenceConstants, f0: f64, local_iterations: usize, rounds: &[BoundRound]) -> f64 {
    let gamma: f64 = rounds.iter().map(|r| r.eta).sum();
    if !(gamma > 0.0) {
        return f64::INFINITY;
    }
    let h = local_iterations as f64;
    let l = constants.l;
    let s2 = constants.sigma_g2;
    let optimality = 4.0 * (f0 - constants.f_star) / (h * gamma);
    let variance: f64 = rounds.iter().map(|r| r.eta * r.eta * r.lambda_sq).sum::<f64>() * 4.0 * l * s2 / gamma;
    let drift: f64 = rounds.iter().map(|r| r.eta * r.eta * r.eta).sum::<f64>() * 2.0 * h * h * l * l * s2 / gamma;
    let hetero: f64 = rounds.iter().map(|r| r.eta * r.eta * r.eta * r.delta2).sum::<f64>() * 4.0 * h * h * l * l / gamma;
    optimality + variance + drift + hetero
}

fn gradient<O: Objective + ?Sized>(obj: &O, w: &[f64], ids: &[SampleId]) -> Vec<f64> {
    let mut g = vec![0.0; obj.param_count()];
    obj.loss_grad(w, ids, &mut g);
    g
}

fn diff_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact constants of a quadratic task split over `nodes`.
///
/// Per-sample gradients differ from the node mean by `A (x_i - xbar)`,
/// independent of `w`, so the variance and dissimilarity terms are exact
/// and `c = 0`. The batch variance uses sampling without replacement.
pub fn quadratic_constants(task: &QuadraticTask, nodes: &[Vec<SampleId>], cfg: &LocalTrainConfig) -> ConvergenceConstants {
    let d = task.dim;
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &task.a));
    let l = eig.eigenvalues.iter().copied().fold(0.0, f64::max);

    let all: Vec<SampleId> = nodes.iter().flatten().copied().collect();
    let global = task.centroid(&all);
    let spread = |ids: &[SampleId], centre: &[f64]| -> f64 {
        ids.iter()
            .map(|&i| {
                let v: Vec<f64> = task.point(i as usize).iter().zip(centre).map(|(x, m)| x - m).collect();
                norm_sq(&task.apply(&v))
            })
            .sum::<f64>()
            / ids.len().max(1) as f64
    };

    let mut sigma_g2: f64 = 0.0;
    let mut delta2: f64 = 0.0;
    for ids in nodes.iter().filter(|n| !n.is_empty()) {
        let n = ids.len() as f64;
        let b = cfg.batch_size(ids.len()) as f64;
        let centre = task.centroid(ids);
        if n > 1.0 {
            let pop = spread(ids, &centre) * n / (n - 1.0);
            sigma_g2 = sigma_g2.max((n - b) / (n * b) * pop);
        }
        let shift: Vec<f64> = centre.iter().zip(&global).map(|(a, g)| a - g).collect();
        delta2 = delta2.max(norm_sq(&task.apply(&shift)));
    }
    let f_star = task.loss(&global, &all);
    ConvergenceConstants { l, sigma_g2, c: 0.0, delta2, f_star }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBudget {
    pub points: usize,
    /// Mini-batches drawn per point and node for the variance estimate.
    pub batches: usize,
    /// Standard deviation of probe offsets around the centre.
    pub radius: f64,
}

impl Default for ProbeBudget {
    fn default() -> Self {
        Self { points: 32, batches: 16, radius: 1.0 }
    }
}

/// Least-squares fit of `d <= c g + delta2` over `(g, d)` pairs, shifted up
/// so every pair satisfies it. Both coefficients are kept non-negative.
pub fn fit_dissimilarity(pairs: &[(f64, f64)]) -> (f64, f64) {
    if pairs.is_empty() {
        return (0.0, 0.0);
    }
    let n = pairs.len() as f64;
    let mg = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let md = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sgg: f64 = pairs.iter().map(|p| (p.0 - mg) * (p.0 - mg)).sum();
    let sgd: f64 = pairs.iter().map(|p| (p.0 - mg) * (p.1 - md)).sum();
    let mut c = if sgg > 0.0 { (sgd / sgg).max(0.0) } else { 0.0 };
    let mut delta2 = md - c * mg;
    if delta2 < 0.0 {
        // Refit through the origin.
        let gg: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
        c = if gg > 0.0 { pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / gg } else { 0.0 };
        delta2 = 0.0;
    }
    let slack = pairs.iter().map(|p| p.1 - c * p.0 - delta2).fold(0.0, f64::max);
    (c, delta2 + slack)
}

/// Probe-based constants for an arbitrary objective.
///
/// `L` is the largest observed gradient Lipschitz ratio (a lower bound on
/// the true constant). `f_star` is passed through.
pub fn estimate_constants<O: Objective + ?Sized>(
    obj: &O,
    nodes: &[Vec<SampleId>],
    cfg: &LocalTrainConfig,
    centre: &[f64],
    f_star: f64,
    budget: &ProbeBudget,
    rng: &mut ChaCha8Rng,
) -> Result<ConvergenceConstants> {
    if centre.len() != obj.param_count() {
        return Err(Error::Dimension { expected: obj.param_count(), got: centre.len() });
    }
    let nodes: Vec<&Vec<SampleId>> = nodes.iter().filter(|n| !n.is_empty()).collect();
    let all: Vec<SampleId> = nodes.iter().flat_map(|n| n.iter().copied()).collect();
    let probe = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        centre.iter().map(|c| c + budget.radius * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let mut l: f64 = 0.0;
    let mut sigma_g2: f64 = 0.0;
    let mut pairs = Vec::with_capacity(budget.points);
    for _ in 0..budget.points {
        let w1 = probe(rng);
        let w2 = probe(rng);
        let dw = diff_sq(&w1, &w2);
        let global = gradient(obj, &w1, &all);
        let mut worst = 0.0f64;
        for ids in &nodes {
            let g1 = gradient(obj, &w1, ids);
            let g2 = gradient(obj, &w2, ids);
            if dw > 0.0 {
                l = l.max(sqrt(diff_sq(&g1, &g2) / dw));
            }
            worst = worst.max(diff_sq(&g1, &global));
            let b = cfg.batch_size(ids.len());
            let mut var = 0.0;
            let mut pool: Vec<SampleId> = ids.to_vec();
            for _ in 0..budget.batches {
                let (batch, _) = rand::seq::SliceRandom::partial_shuffle(&mut pool[..], rng, b);
                var += diff_sq(&gradient(obj, &w1, batch), &g1);
            }
            sigma_g2 = sigma_g2.max(var / budget.batches.max(1) as f64);
        }
        pairs.push((norm_sq(&global), worst));
    }
    let (c, delta2) = fit_dissimilarity(&pairs);
    Ok(ConvergenceConstants { l, sigma_g2, c, delta2, f_star })
}

/// Synthetic quadratic task: `A = B^T B / dim + 0.1 I` and centres drawn
/// around `groups` well-separated means, in group order.
pub fn synthetic_quadratic(dim: usize, samples: usize, groups: usize, seed: u64) -> QuadraticTask {
    let mut rng = stream(seed, purpose::DATA, 1, 0);
    let b: Vec<f64> = (0..dim * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut a = vec![0.0; dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            let mut s = 0.0;
            for k in 0..dim {
                s += b[k * dim + r] * b[k * dim + c];
            }
            a[r * dim + c] = s / dim as f64 + if r == c { 0.1 } else { 0.0 };
        }
    }
    let groups = groups.max(1);
    let means: Vec<f64> = (0..groups * dim).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut points = Vec::with_capacity(samples * dim);
    for i in 0..samples {
        let g = i * groups / samples.max(1);
        for j in 0..dim {
            points.push(means[g * dim + j] + rng.sample::<f64, _>(StandardNormal));
        }
    }
    QuadraticTask { dim, a, points }
}

/// Trajectory of plain federated rounds with fixed node datasets.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    /// `||grad F(w_r)||^2` before each round.
    pub grad_norms: Vec<f64>,
    pub f0: f64,
    /// `(1/Gamma) sum eta_r ||grad F(w_r)||^2`.
    pub statistic: f64,
    pub rounds: Vec<BoundRound>,
}

/// Runs `schedule.len()` rounds of local SGD plus weighted aggregation and
/// records the quantities the bound is compared against.
pub fn federated_trajectory<O: Objective + ?Sized>(
    obj: &O,
    nodes: &[Vec<SampleId>],
    w0: Vec<f64>,
    cfg: &LocalTrainConfig,
    schedule: &[f64],
    delta2: f64,
    seed: u64,
) -> Result<Trajectory> {
    let all: Vec<SampleId> = nodes.iter().flatten().copied().collect();
    let total = all.len().max(1) as f64;
    let weights: Vec<f64> = nodes.iter().map(|n| n.len() as f64 / total).collect();
    let lambda_sq = lambda_sq_sum(&weights);
    let f0 = obj.loss(&w0, &all);
    let mut w = w0;
    let mut grad_norms = Vec::with_capacity(schedule.len());
    let mut rounds = Vec::with_capacity(schedule.len());
    for (r, &eta) in schedule.iter().enumerate() {
        grad_norms.push(norm_sq(&gradient(obj, &w, &all)));
        let mut models = Vec::with_capacity(nodes.len());
        for (i, ids) in nodes.iter().enumerate() {
            let rng = stream(seed, purpose::TRAIN, i as u64, r as u64);
            models.push(local_sgd(obj, w.clone(), ids, cfg, eta, rng)?);
        }
        let refs: Vec<&[f64]> = models.iter().map(|m| m.as_slice()).collect();
        w = aggregate(&refs, &renormalise(&weights))?;
        rounds.push(BoundRound { eta, lambda_sq, delta2 });
    }
    let gamma: f64 = schedule.iter().sum();
    let statistic = schedule.iter().zip(&grad_norms).map(|(e, g)| e * g).sum::<f64>() / gamma;
    Ok(Trajectory { grad_norms, f0, statistic, rounds })
}

/// Nudges weights so they sum to one within rounding.
fn renormalise(weights: &[f64]) -> Vec<f64> {
    let s: f64 = weights.iter().sum();
    let mut out: Vec<f64> = weights.iter().map(|w| w / s).collect();
    let rest: f64 = out.iter().skip(1).sum();
    if let Some(first) = out.first_mut() {
        *first = 1.0 - rest;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flcore::BatchPolicy;

    fn split(n: usize, parts: usize) -> Vec<Vec<SampleId>> {
        (0..parts).map(|p| ((p * n / parts) as SampleId..((p + 1) * n / parts) as SampleId).collect()).collect()
    }

    #[test]
    fn single_round_noise_free_bound() {
        let k = ConvergenceConstants { l: 3.0, sigma_g2: 0.0, c: 0.0, delta2: 0.0, f_star: 1.0 };
        let b = convergence_bound(&k, 5.0, 4, &[BoundRound { eta: 0.1, lambda_sq: 1.0, delta2: 0.0 }]);
        assert!((b - 4.0 * 4.0 / (4.0 * 0.1)).abs() < 1e-12);
    }

    #[test]
    fn learning_rate_cap() {
        let k = ConvergenceConstants { l: 2.0, ..Default::default() };
        assert!((max_learning_rate(&k, 1) - 0.25).abs() < 1e-15);
        assert!((max_learning_rate(&k, 10) * 2.0 - max_learning_rate(&k, 5)).abs() < 1e-15);
    }

    #[test]
    fn bound_vanishes_with_decaying_rate() {
        let k = ConvergenceConstants { l: 1.0, sigma_g2: 2.0, c: 0.5, delta2: 1.0, f_star: 0.0 };
        let eta0 = max_learning_rate(&k, 5);
        let at = |r: usize| {
            let rounds: Vec<BoundRound> =
                (0..r).map(|i| BoundRound { eta: eta0 / (i + 1) as f64, lambda_sq: 0.3, delta2: 1.0 }).collect();
            convergence_bound(&k, 10.0, 5, &rounds)
        };
        let (a, b, c) = (at(100), at(1000), at(10_000));
        assert!(a > b && b > c);
    }

    #[test]
    fn quadratic_constants_are_exact() {
        let task = QuadraticTask { dim: 2, a: vec![3.0, 0.0, 0.0, 1.0], points: vec![0.0, 0.0, 2.0, 0.0, 0.0, 4.0, 2.0, 4.0] };
        let cfg = LocalTrainConfig { local_iterations: 1, batch_policy: BatchPolicy::Fixed(1) };
        let k = quadratic_constants(&task, &[vec![0, 1], vec![2, 3]], &cfg);
        assert!((k.l - 3.0).abs() < 1e-12);
        // node means (1,0) and (1,4), global (1,2): A * (0, -2) has norm^2 4.
        assert!((k.delta2 - 4.0).abs() < 1e-12);
        // per node: deviations (-1,0),(1,0) -> |A v|^2 = 9, n=2, b=1.
        assert!((k.sigma_g2 - 9.0).abs() < 1e-12);
        // F* = mean 1/2 v^T A v with v = (+-1, +-2): (3 + 4) / 2.
        assert!((k.f_star - 3.5).abs() < 1e-12);
    }

    #[test]
    fn estimated_l_bounded_by_spectrum() {
        let task = synthetic_quadratic(4, 200, 2, 5);
        let cfg = LocalTrainConfig { local_iterations: 5, batch_policy: BatchPolicy::DatasetOverH };
        let nodes = split(200, 2);
        let exact = quadratic_constants(&task, &nodes, &cfg);
        let mut rng = stream(1, purpose::PROBE, 0, 0);
        let budget = ProbeBudget { points: 200, batches: 4, radius: 1.0 };
        let est = estimate_constants(&task, &nodes, &cfg, &[0.0; 4], exact.f_star, &budget, &mut rng).unwrap();
        assert!(est.l <= exact.l * (1.0 + 1e-9));
        assert!(est.l > 0.7 * exact.l);
    }

    #[test]
    fn identical_nodes_have_no_dissimilarity() {
        let mut task = synthetic_quadratic(3, 50, 1, 2);
        let copy = task.points.clone();
        task.points.extend(copy);
        let nodes = vec![(0..50).collect(), (50..100).collect()];
        let cfg = LocalTrainConfig::default();
        let mut rng = stream(3, purpose::PROBE, 0, 0);
        let est = estimate_constants(&task, &nodes, &cfg, &[0.0; 3], 0.0, &ProbeBudget::default(), &mut rng).unwrap();
        assert!(est.delta2 < 1e-20 && est.c < 1e-9);
    }

    #[test]
    fn fitted_dissimilarity_holds_out_of_sample() {
        let task = synthetic_quadratic(3, 400, 2, 9);
        let nodes = split(400, 2);
        let cfg = LocalTrainConfig::default();
        let mut rng = stream(4, purpose::PROBE, 0, 0);
        let k = estimate_constants(&task, &nodes, &cfg, &[0.0; 3], 0.0, &ProbeBudget::default(), &mut rng).unwrap();
        let all: Vec<SampleId> = (0..400).collect();
        let mut violations = 0;
        for _ in 0..500 {
            let w: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let g = gradient(&task, &w, &all);
            for ids in &nodes {
                if diff_sq(&gradient(&task, &w, ids), &g) > k.c * norm_sq(&g) + k.delta2 + 1e-12 {
                    violations += 1;
                }
            }
        }
        assert!(violations <= 10, "{violations} violations");
    }

    #[test]
    fn bound_monotone_in_constants() {
        let base = ConvergenceConstants { l: 1.0, sigma_g2: 1.0, c: 0.0, delta2: 1.0, f_star: 0.0 };
        let rounds = [BoundRound { eta: 0.01, lambda_sq: 0.5, delta2: 1.0 }; 10];
        let b0 = convergence_bound(&base, 3.0, 5, &rounds);
        assert!(convergence_bound(&ConvergenceConstants { f_star: 0.5, ..base }, 3.0, 5, &rounds) < b0);
        assert!(convergence_bound(&ConvergenceConstants { sigma_g2: 2.0, ..base }, 3.0, 5, &rounds) > b0);
    }
}
