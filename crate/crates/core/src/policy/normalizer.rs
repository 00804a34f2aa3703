use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const CLIP: f64 = 10.0;
const EPS: f64 = 1e-8;

/// Running per-feature mean and variance (parallel Welford merge).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub count: f64,
    pub mean: Vec<f64>,
    /// Sum of squared deviations.
    pub m2: Vec<f64>,
}

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2.0 {
            return vec![1.0; self.dim()];
        }
        self.m2.iter().map(|m| m / self.count).collect()
    }

    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(invalid(format!(
                "feature vector has {} entries, expected {}",
                x.len(),
                self.dim()
            )));
        }
        if self.count < 2.0 {
            return Ok(x.to_vec());
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.m2)
            .map(|((v, m), m2)| ((v - m) / (m2 / self.count + EPS).sqrt()).clamp(-CLIP, CLIP))
            .collect())
    }

    /// Fold a batch of samples into the running statistics.
    pub fn update(&mut self, batch: &[Vec<f64>]) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let d = self.dim();
        let nb = batch.len() as f64;
        let mut bmean = vec![0.0; d];
        for x in batch {
            if x.len() != d {
                return Err(invalid("normalizer update with wrong feature width"));
            }
            for (m, v) in bmean.iter_mut().zip(x) {
                *m += v;
            }
        }
        bmean.iter_mut().for_each(|m| *m /= nb);
        let mut bm2 = vec![0.0; d];
        for x in batch {
            for ((s, v), m) in bm2.iter_mut().zip(x).zip(&bmean) {
                *s += (v - m) * (v - m);
            }
        }
        let n = self.count + nb;
        for k in 0..d {
            let delta = bmean[k] - self.mean[k];
            self.mean[k] += delta * nb / n;
            self.m2[k] += bm2[k] + delta * delta * self.count * nb / n;
        }
        self.count = n;
        Ok(())
    }
}
