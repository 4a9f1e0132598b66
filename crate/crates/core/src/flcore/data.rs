use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::math::powf;
use crate::rng::{purpose, stream};

/// Dense row-major feature matrix with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
    pub dim: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// Gaussian blobs, one per class. Feature `j` is multiplied by
/// `scale_spread^(-j / (dim - 1))`, which leaves the Bayes accuracy alone
/// but makes gradient descent ill-conditioned when the spread is large.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    pub train: usize,
    pub test: usize,
    /// Standard deviation of the class means around the origin.
    pub separation: f64,
    /// Standard deviation of samples around their class mean.
    pub noise: f64,
    /// Ratio of the largest to the smallest feature scale; 1 is isotropic.
    pub scale_spread: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self { classes: 10, dim: 32, train: 60_000, test: 10_000, separation: 0.7, noise: 1.0, scale_spread: 1.0 }
    }
}

/// Draws the class means, then balanced train and test sets.
pub fn gaussian_blobs(spec: &BlobSpec, seed: u64) -> (Dataset, Dataset) {
    let mut rng = stream(seed, purpose::DATA, 0, 0);
    let means: Vec<f64> =
        (0..spec.classes * spec.dim).map(|_| spec.separation * rng.sample::<f64, _>(StandardNormal)).collect();
    let scales: Vec<f64> = (0..spec.dim)
        .map(|j| {
            let t = if spec.dim > 1 { j as f64 / (spec.dim - 1) as f64 } else { 0.0 };
            powf(spec.scale_spread, -t)
        })
        .collect();
    let draw = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let mut features = Vec::with_capacity(n * spec.dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = i % spec.classes;
            labels.push(c as u8);
            let mu = &means[c * spec.dim..(c + 1) * spec.dim];
            features.extend(
                mu.iter().zip(&scales).map(|(m, s)| s * (m + spec.noise * rng.sample::<f64, _>(StandardNormal))),
            );
        }
        Dataset { features, labels, dim: spec.dim, classes: spec.classes }
    };
    let train = draw(spec.train, &mut rng);
    let test = draw(spec.test, &mut rng);
    (train, test)
}
