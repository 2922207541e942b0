//! Running mean/variance statistics used to standardize observations and
//! pose vectors. Updated between training phases, frozen while in use.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Welford running mean/variance over fixed-dimension vectors.
///
/// Until at least two samples have been seen, `standardize` is the identity,
/// so freshly initialized components see raw values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunningMeanVar {
    pub count: u64,
    pub mean: Vec<f64>,
    m2: Vec<f64>,
}

pub const STANDARDIZE_EPS: f64 = 1e-8;

impl RunningMeanVar {
    pub fn new(dim: usize) -> Self {
        RunningMeanVar {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            self.mean[i] += delta / n;
            let delta2 = x[i] - self.mean[i];
            self.m2[i] += delta * delta2;
        }
    }

    pub fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            1.0
        } else {
            self.m2[i] / self.count as f64
        }
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        if self.count < 2 {
            return x.to_vec();
        }
        x.iter()
            .enumerate()
            .map(|(i, &v)| (v - self.mean[i]) / libm::sqrt(self.variance(i) + STANDARDIZE_EPS))
            .collect()
    }

    /// Inverse of `standardize`, used when mapping predictions back to
    /// raw units.
    pub fn destandardize(&self, z: &[f64]) -> Vec<f64> {
        if self.count < 2 {
            return z.to_vec();
        }
        z.iter()
            .enumerate()
            .map(|(i, &v)| v * libm::sqrt(self.variance(i) + STANDARDIZE_EPS) + self.mean[i])
            .collect()
    }

    /// Per-dimension scale factor applied by `standardize` (1 until two
    /// samples have been seen). Needed when backpropagating through the
    /// standardization.
    pub fn scale(&self, i: usize) -> f64 {
        if self.count < 2 {
            1.0
        } else {
            1.0 / libm::sqrt(self.variance(i) + STANDARDIZE_EPS)
        }
    }
}
