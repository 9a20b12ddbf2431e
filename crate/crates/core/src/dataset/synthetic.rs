//! Seeded stand-in for the speech corpus: each class owns a mean frame, samples
//! add temporally correlated noise around it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Utterance;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_classes: usize,
    pub n_channels: usize,
    /// Frames per sample.
    pub t_len: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Standard deviation of the class patterns.
    pub separation: f64,
    /// Standard deviation of the additive noise.
    pub noise: f64,
    /// AR(1) coefficient of the noise, in `[0, 1)`.
    pub smoothing: f64,
    /// Constant added to every frame. A positive mean keeps the sign of the
    /// average synaptic drive aligned with the sign of the weights.
    pub offset: f64,
    /// Seed of the class patterns; shared by all splits.
    pub pattern_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_classes: 4,
            n_channels: 39,
            t_len: 40,
            n_train: 256,
            n_val: 64,
            n_test: 64,
            separation: 1.0,
            noise: 1.0,
            smoothing: 0.5,
            offset: 1.0,
            pattern_seed: 0,
        }
    }
}

/// Class patterns plus the generator for samples around them.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub config: SyntheticConfig,
    patterns: Matrix,
}

impl SyntheticTask {
    pub fn new(config: SyntheticConfig) -> Result<Self> {
        if config.n_classes < 2 || config.n_classes > u16::MAX as usize {
            return Err(Error::Config(
                "synthetic task needs at least 2 classes".into(),
            ));
        }
        if config.n_channels == 0 || config.t_len == 0 {
            return Err(Error::Config(
                "synthetic channels and length must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&config.smoothing)
            || !config.noise.is_finite()
            || config.noise < 0.0
            || !config.separation.is_finite()
            || config.separation < 0.0
            || !config.offset.is_finite()
        {
            return Err(Error::Config(
                "synthetic noise and separation must be >= 0, smoothing in [0,1)".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.pattern_seed);
        let patterns = Matrix::from_fn(config.n_classes, config.n_channels, |_, _| {
            config.separation * rng.sample::<f64, _>(StandardNormal)
        });
        Ok(Self { config, patterns })
    }

    pub fn pattern(&self, class: usize) -> &[f64] {
        self.patterns.row(class)
    }

    /// `n` samples with labels drawn uniformly; deterministic in `seed`.
    pub fn generate(&self, n: usize, seed: u64) -> Vec<Utterance> {
        let c = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let innovation = (1.0 - c.smoothing * c.smoothing).sqrt();
        (0..n)
            .map(|_| {
                let class = rng.random_range(0..c.n_classes);
                let mut noise: Vec<f64> = (0..c.n_channels)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let mut frames = Matrix::zeros(c.t_len, c.n_channels);
                for t in 0..c.t_len {
                    if t > 0 {
                        for x in noise.iter_mut() {
                            *x = c.smoothing * *x
                                + innovation * rng.sample::<f64, _>(StandardNormal);
                        }
                    }
                    let mean = self.patterns.row(class);
                    for (ch, f) in frames.row_mut(t).iter_mut().enumerate() {
                        *f = c.offset + mean[ch] + c.noise * noise[ch];
                    }
                }
                Utterance {
                    frames,
                    labels: vec![class as u16; c.t_len],
                }
            })
            .collect()
    }

    /// Train, validation and test splits from disjoint seed streams.
    pub fn splits(&self, seed: u64) -> [Vec<Utterance>; 3] {
        let c = &self.config;
        [
            self.generate(c.n_train, seed.wrapping_mul(3)),
            self.generate(c.n_val, seed.wrapping_mul(3).wrapping_add(1)),
            self.generate(c.n_test, seed.wrapping_mul(3).wrapping_add(2)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_labelled() {
        let task = SyntheticTask::new(SyntheticConfig::default()).unwrap();
        let a = task.generate(10, 5);
        let b = task.generate(10, 5);
        assert_eq!(a, b);
        for u in &a {
            assert_eq!(u.frames.rows(), 40);
            assert_eq!(u.frames.cols(), 39);
            assert!(u.labels.iter().all(|&l| l == u.labels[0] && l < 4));
        }
        assert_ne!(a, task.generate(10, 6));
    }

    #[test]
    fn noiseless_frames_equal_pattern() {
        let cfg = SyntheticConfig {
            noise: 0.0,
            ..SyntheticConfig::default()
        };
        let task = SyntheticTask::new(cfg).unwrap();
        let u = &task.generate(1, 0)[0];
        let class = u.labels[0] as usize;
        for t in 0..u.len() {
            for (f, p) in u.frames.row(t).iter().zip(task.pattern(class)) {
                assert_eq!(*f, 1.0 + p);
            }
        }
    }

    #[test]
    fn rejects_single_class() {
        let cfg = SyntheticConfig {
            n_classes: 1,
            ..SyntheticConfig::default()
        };
        assert!(SyntheticTask::new(cfg).is_err());
    }

    fn frame_mean(u: &Utterance) -> Vec<f64> {
        let mut m = vec![0.0; u.frames.cols()];
        for t in 0..u.len() {
            for (a, x) in m.iter_mut().zip(u.frames.row(t)) {
                *a += x / u.len() as f64;
            }
        }
        m
    }

    #[test]
    fn separable_classes_fall_to_a_centroid_classifier() {
        let cfg = SyntheticConfig {
            n_classes: 2,
            separation: 3.0,
            ..SyntheticConfig::default()
        };
        let task = SyntheticTask::new(cfg).unwrap();
        let [train, _, test] = task.splits(11);
        let mut centroids = vec![vec![0.0; 39]; 2];
        let mut counts = [0usize; 2];
        for u in &train {
            let c = u.labels[0] as usize;
            counts[c] += 1;
            for (a, x) in centroids[c].iter_mut().zip(frame_mean(u)) {
                *a += x;
            }
        }
        assert!(counts.iter().all(|&n| n > 0));
        for (c, n) in centroids.iter_mut().zip(counts) {
            c.iter_mut().for_each(|x| *x /= n as f64);
        }
        let dist =
            |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        let correct = test
            .iter()
            .filter(|u| {
                let m = frame_mean(u);
                let pred = (dist(&m, &centroids[1]) < dist(&m, &centroids[0])) as u16;
                pred == u.labels[0]
            })
            .count();
        assert_eq!(correct, test.len());
    }

    #[test]
    fn single_frame_samples() {
        let cfg = SyntheticConfig {
            t_len: 1,
            ..SyntheticConfig::default()
        };
        let task = SyntheticTask::new(cfg).unwrap();
        let u = task.generate(3, 2);
        assert!(u.iter().all(|u| u.len() == 1 && u.labels.len() == 1));
    }
}
