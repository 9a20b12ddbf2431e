//! MFCC front-end: pre-emphasis, framing, Hamming window, power spectrum, mel
//! filterbank, log, orthonormal DCT, deltas, and channel standardization.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Floor applied to filterbank energies before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;
/// Guard added to channel standard deviations.
pub const STD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub preemph: f64,
    pub frame_len: usize,
    pub frame_step: usize,
    pub fft_size: usize,
    pub n_filters: usize,
    /// Cepstral indices `1..=n_ceps` are kept; index 0 is dropped.
    pub n_ceps: usize,
    pub sample_rate: u32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            preemph: 0.97,
            frame_len: 400,
            frame_step: 160,
            fft_size: 512,
            n_filters: 40,
            n_ceps: 13,
            sample_rate: 16_000,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.frame_len > 0
            && self.frame_step > 0
            && self.fft_size > 0
            && self.n_filters > 0
            && self.n_ceps > 0
            && self.sample_rate > 0;
        if !positive {
            return Err(Error::Config("feature sizes must be positive".into()));
        }
        if self.frame_len > self.fft_size {
            return Err(Error::Config("frame_len must not exceed fft_size".into()));
        }
        if self.n_ceps >= self.n_filters {
            return Err(Error::Config("n_ceps must be below n_filters".into()));
        }
        Ok(())
    }

    /// Static plus delta plus delta-delta channels.
    pub fn n_channels(&self) -> usize {
        3 * self.n_ceps
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Hex SHA-256 of the canonical JSON form; cache manifests are keyed on it.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("plain struct serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// `y[0] = x[0]`, `y[t] = x[t] - coef * x[t-1]`.
pub fn pre_emphasis(x: &[f64], coef: f64) -> Vec<f64> {
    let mut y = Vec::with_capacity(x.len());
    if let Some(&first) = x.first() {
        y.push(first);
    }
    y.extend(x.windows(2).map(|w| w[1] - coef * w[0]));
    y
}

/// `1 + ceil(max(0, len - frame_len) / frame_step)`.
pub fn n_frames(len: usize, cfg: &FeatureConfig) -> usize {
    1 + len.saturating_sub(cfg.frame_len).div_ceil(cfg.frame_step)
}

pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.53836 - 0.46164 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Overlapping frames (zero-padded at the end), each multiplied by `window`.
pub fn frame_and_window(y: &[f64], window: &[f64], cfg: &FeatureConfig) -> Matrix {
    let n = n_frames(y.len(), cfg);
    let mut frames = Matrix::zeros(n, cfg.frame_len);
    for i in 0..n {
        let start = i * cfg.frame_step;
        let row = frames.row_mut(i);
        for (k, v) in row.iter_mut().enumerate() {
            *v = y.get(start + k).copied().unwrap_or(0.0) * window[k];
        }
    }
    frames
}

/// Periodogram `|DFT_K(frame)|^2 / K` over the non-negative bins.
pub struct PowerSpectrum {
    fft: Arc<dyn Fft<f64>>,
    size: usize,
}

impl PowerSpectrum {
    pub fn new(fft_size: usize) -> Self {
        Self {
            fft: FftPlanner::new().plan_fft_forward(fft_size),
            size: fft_size,
        }
    }

    /// `frame` is zero-padded to the transform size.
    pub fn compute(&self, frame: &[f64]) -> Vec<f64> {
        assert!(frame.len() <= self.size, "frame longer than transform");
        let mut buf: Vec<Complex<f64>> = (0..self.size)
            .map(|i| Complex::new(frame.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        self.fft.process(&mut buf);
        buf[..self.size / 2 + 1]
            .iter()
            .map(|x| x.norm_sqr() / self.size as f64)
            .collect()
    }
}

/// Mel value of `f` Hz: `1125 ln(1 + f/700)`, 2835 mel at 8 kHz.
pub fn hz_to_mel(f: f64) -> f64 {
    1125.0 * (f / 700.0).ln_1p()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (m / 1125.0).exp_m1()
}

/// Bin indices `floor((K+1) f / fs)` of the `n_filters + 2` mel-spaced edges.
pub fn mel_bin_edges(cfg: &FeatureConfig) -> Vec<usize> {
    let top = hz_to_mel(cfg.sample_rate as f64 / 2.0);
    let n = cfg.n_filters + 2;
    (0..n)
        .map(|i| {
            let m = top * i as f64 / (n - 1) as f64;
            let f = mel_to_hz(m);
            (((cfg.fft_size + 1) as f64 * f / cfg.sample_rate as f64).floor() as usize)
                .min(cfg.fft_size / 2)
        })
        .collect()
}

/// Triangular filters, `n_filters x n_bins`; filter `i` rises from edge `i`,
/// peaks at edge `i+1` and falls to edge `i+2`.
pub fn mel_filterbank(cfg: &FeatureConfig) -> Matrix {
    let b = mel_bin_edges(cfg);
    Matrix::from_fn(cfg.n_filters, cfg.n_bins(), |i, k| {
        let (lo, peak, hi) = (b[i], b[i + 1], b[i + 2]);
        if k == peak {
            1.0
        } else if k >= lo && k < peak {
            (k - lo) as f64 / (peak - lo) as f64
        } else if k > peak && k <= hi {
            (hi - k) as f64 / (hi - peak) as f64
        } else {
            0.0
        }
    })
}

/// Orthonormal DCT-II matrix, row `k` holds the `k`-th basis vector.
pub fn dct_matrix(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |k, i| {
        let c = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        c * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos()
    })
}

/// `[c | delta c | delta delta c]` with centered differences and clamped edges.
pub fn deltas(ceps: &Matrix) -> Matrix {
    fn diff(m: &Matrix) -> Matrix {
        let t = m.rows();
        Matrix::from_fn(t, m.cols(), |i, c| {
            let next = m.get((i + 1).min(t - 1), c);
            let prev = m.get(i.saturating_sub(1), c);
            (next - prev) / 2.0
        })
    }
    let (t, n) = (ceps.rows(), ceps.cols());
    if t == 0 {
        return Matrix::zeros(0, 3 * n);
    }
    let d = diff(ceps);
    let dd = diff(&d);
    Matrix::from_fn(t, 3 * n, |i, c| match c / n {
        0 => ceps.get(i, c),
        1 => d.get(i, c - n),
        _ => dd.get(i, c - 2 * n),
    })
}

/// Precomputed tables of the whole pipeline.
pub struct MfccExtractor {
    pub config: FeatureConfig,
    window: Vec<f64>,
    spectrum: PowerSpectrum,
    filterbank: Matrix,
    dct: Matrix,
}

impl MfccExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            window: hamming(config.frame_len),
            spectrum: PowerSpectrum::new(config.fft_size),
            filterbank: mel_filterbank(&config),
            dct: dct_matrix(config.n_filters),
            config,
        })
    }

    /// Kept cepstra (`T x n_ceps`) of a waveform.
    pub fn mfcc(&self, samples: &[f64]) -> Matrix {
        let cfg = &self.config;
        let y = pre_emphasis(samples, cfg.preemph);
        let frames = frame_and_window(&y, &self.window, cfg);
        let mut out = Matrix::zeros(frames.rows(), cfg.n_ceps);
        let mut log_energy = vec![0.0; cfg.n_filters];
        for t in 0..frames.rows() {
            let p = self.spectrum.compute(frames.row(t));
            for (i, s) in log_energy.iter_mut().enumerate() {
                let e: f64 = self
                    .filterbank
                    .row(i)
                    .iter()
                    .zip(&p)
                    .map(|(h, p)| h * p)
                    .sum();
                *s = e.max(LOG_FLOOR).ln();
            }
            for (k, c) in out.row_mut(t).iter_mut().enumerate() {
                *c = self
                    .dct
                    .row(k + 1)
                    .iter()
                    .zip(&log_energy)
                    .map(|(d, s)| d * s)
                    .sum();
            }
        }
        out
    }

    /// Unstandardized features (`T x 3 n_ceps`).
    pub fn extract(&self, samples: &[f64]) -> Result<Matrix> {
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::Input(format!("non-finite sample at index {i}")));
        }
        Ok(deltas(&self.mfcc(samples)))
    }
}

/// Per-channel mean and standard deviation of the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Streaming per-channel sums for [`ChannelStats`].
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    n: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, m: &Matrix) -> Result<()> {
        if self.sum.is_empty() {
            self.sum = vec![0.0; m.cols()];
            self.sum_sq = vec![0.0; m.cols()];
        } else if m.cols() != self.sum.len() {
            return Err(Error::Shape {
                what: "feature channels",
                expected: self.sum.len(),
                actual: m.cols(),
            });
        }
        for t in 0..m.rows() {
            for (c, &x) in m.row(t).iter().enumerate() {
                self.sum[c] += x;
                self.sum_sq[c] += x * x;
            }
        }
        self.n += m.rows();
        Ok(())
    }

    /// Population statistics of everything added so far.
    pub fn finish(&self) -> Result<ChannelStats> {
        if self.n == 0 {
            return Err(Error::Input("no frames to compute statistics from".into()));
        }
        let n = self.n as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let std = self
            .sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| (sq / n - m * m).max(0.0).sqrt())
            .collect();
        Ok(ChannelStats { mean, std })
    }
}

/// Population statistics over every frame of every matrix.
pub fn compute_stats<'a>(features: impl IntoIterator<Item = &'a Matrix>) -> Result<ChannelStats> {
    let mut acc = StatsAccumulator::new();
    for m in features {
        acc.add(m)?;
    }
    acc.finish()
}

/// `(x - mean) / (std + eps)` per channel, in place.
pub fn standardize(features: &mut Matrix, stats: &ChannelStats) {
    for t in 0..features.rows() {
        for (c, x) in features.row_mut(t).iter_mut().enumerate() {
            *x = (*x - stats.mean[c]) / (stats.std[c] + STD_EPS);
        }
    }
}

/// A labelled half-open sample interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledInterval {
    pub start: u64,
    pub end: u64,
    pub label: u16,
}

/// Label of the interval holding each frame's center sample. Centers past
/// the last interval take its label.
pub fn align_targets(
    intervals: &[LabeledInterval],
    n_frames: usize,
    cfg: &FeatureConfig,
) -> Result<Vec<u16>> {
    let last = intervals
        .last()
        .ok_or_else(|| Error::Input("no phone intervals".into()))?;
    let mut labels = Vec::with_capacity(n_frames);
    let mut cursor = 0;
    for i in 0..n_frames {
        let center = (i * cfg.frame_step + cfg.frame_len / 2) as u64;
        while cursor < intervals.len() && intervals[cursor].end <= center {
            cursor += 1;
        }
        let label = match intervals.get(cursor) {
            Some(iv) if iv.start <= center => iv.label,
            Some(iv) => {
                // center in a gap before `iv`: the preceding interval, else `iv`
                cursor
                    .checked_sub(1)
                    .map(|p| intervals[p].label)
                    .unwrap_or(iv.label)
            }
            None => last.label,
        };
        labels.push(label);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> FeatureConfig {
        FeatureConfig::default()
    }

    /// Direct O(N^2) DFT.
    fn naive_dft(x: &[f64], n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, &v)| {
                    let a = -2.0 * PI * (k * i) as f64 / n as f64;
                    (re + v * a.cos(), im + v * a.sin())
                })
            })
            .collect()
    }

    #[test]
    fn pre_emphasis_cases() {
        let y = pre_emphasis(&[1.0, 1.0, 1.0], 0.97);
        assert_eq!(y[0], 1.0);
        assert_abs_diff_eq!(y[1], 0.03, epsilon = 1e-15);
        assert_abs_diff_eq!(y[2], 0.03, epsilon = 1e-15);
        assert_eq!(pre_emphasis(&[0.0; 5], 0.97), vec![0.0; 5]);
        assert_eq!(pre_emphasis(&[1.0, 0.0, 0.0], 0.97), vec![1.0, -0.97, 0.0]);
        assert!(pre_emphasis(&[], 0.97).is_empty());
    }

    #[test]
    fn frame_counts_match_enumeration() {
        let c = cfg();
        assert_eq!(n_frames(400, &c), 1);
        assert_eq!(n_frames(561, &c), 3);
        assert_eq!(n_frames(0, &c), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let len = rng.random_range(0..50_000usize);
            // frames start at every multiple of the step until one reaches the end
            let mut starts = vec![0usize];
            while starts.last().unwrap() + c.frame_len < len {
                starts.push(starts.last().unwrap() + c.frame_step);
            }
            assert_eq!(n_frames(len, &c), starts.len(), "len {len}");
        }
    }

    #[test]
    fn hamming_values() {
        let w = hamming(400);
        assert_abs_diff_eq!(w[0], 0.07672, epsilon = 1e-12);
        assert_abs_diff_eq!(w[399], 0.07672, epsilon = 1e-12);
        let odd = hamming(401);
        assert_abs_diff_eq!(odd[200], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn framing_pads_with_zeros() {
        let c = cfg();
        let y: Vec<f64> = (0..561).map(|i| i as f64).collect();
        let ones = vec![1.0; 400];
        let f = frame_and_window(&y, &ones, &c);
        assert_eq!(f.rows(), 3);
        assert_eq!(f.get(1, 0), 160.0);
        assert_eq!(f.get(2, 0), 320.0);
        assert_eq!(f.get(2, 240), 560.0);
        assert_eq!(f.get(2, 241), 0.0);
    }

    #[test]
    fn spectrum_against_naive_dft() {
        let ps = PowerSpectrum::new(512);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let frame: Vec<f64> = (0..400).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let fast = ps.compute(&frame);
            let slow: Vec<f64> = naive_dft(&frame, 512)[..257]
                .iter()
                .map(|(re, im)| (re * re + im * im) / 512.0)
                .collect();
            let num: f64 = fast.iter().zip(&slow).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = slow.iter().map(|b| b * b).sum();
            assert!((num / den).sqrt() <= 1e-8);
        }
    }

    #[test]
    fn spectrum_simple_frames() {
        let ps = PowerSpectrum::new(512);
        assert!(ps.compute(&[0.0; 400]).iter().all(|&p| p == 0.0));
        let p = ps.compute(&[0.5; 400]);
        assert_abs_diff_eq!(p[0], (400.0f64 * 0.5).powi(2) / 512.0, epsilon = 1e-9);
        assert_eq!(p.len(), 257);
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let frame: Vec<f64> = (0..400).map(|_| rng.random::<f64>() - 0.5).collect();
        let energy: f64 = frame.iter().map(|x| x * x).sum();
        let full: f64 = naive_dft(&frame, 512)
            .iter()
            .map(|(re, im)| re * re + im * im)
            .sum::<f64>()
            / 512.0;
        assert!(((energy - full) / energy).abs() <= 1e-8);
        // the one-sided periodogram carries the same energy once mirrored
        let p = PowerSpectrum::new(512).compute(&frame);
        let mirrored = p[0] + p[256] + 2.0 * p[1..256].iter().sum::<f64>();
        assert!(((energy - mirrored) / energy).abs() <= 1e-8);
    }

    #[test]
    fn mel_golden_values() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        let top = hz_to_mel(8000.0);
        assert!((2834.0..=2836.0).contains(&top), "{top}");
        for (m, hz) in [(105.0, 68.5), (1050.0, 1080.1), (2835.0, 8000.0)] {
            assert!((mel_to_hz(m) - hz).abs() <= 0.1, "{m} -> {}", mel_to_hz(m));
        }
    }

    #[test]
    fn filterbank_structure() {
        let c = cfg();
        let edges = mel_bin_edges(&c);
        assert_eq!(edges.len(), 42);
        assert_eq!(edges[0], 0);
        assert_eq!(edges[41], 256);
        assert_eq!((513.0f64 * 8000.0 / 16000.0).floor() as usize, 256);
        assert!(edges.windows(2).all(|w| w[0] < w[1]));
        let fb = mel_filterbank(&c);
        assert_eq!((fb.rows(), fb.cols()), (40, 257));
        for i in 0..40 {
            assert_eq!(fb.get(i, edges[i + 1]), 1.0);
            let support: Vec<usize> = (0..257).filter(|&k| fb.get(i, k) > 0.0).collect();
            let (lo, hi) = (support[0], *support.last().unwrap());
            assert_eq!(
                support.len(),
                hi - lo + 1,
                "filter {i} support not contiguous"
            );
            for j in 0..40 {
                let overlap = (0..257).any(|k| fb.get(i, k) > 0.0 && fb.get(j, k) > 0.0);
                if overlap {
                    assert!(i.abs_diff(j) <= 1);
                }
            }
        }
    }

    #[test]
    fn dct_is_orthonormal() {
        let d = dct_matrix(40);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..40).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let c: Vec<f64> = (0..40)
            .map(|k| d.row(k).iter().zip(&s).map(|(a, b)| a * b).sum())
            .collect();
        for i in 0..40 {
            let back: f64 = (0..40).map(|k| d.get(k, i) * c[k]).sum();
            assert_abs_diff_eq!(back, s[i], epsilon = 1e-10);
        }
        // a constant input lives entirely in coefficient 0
        for k in 1..40 {
            let v: f64 = d.row(k).iter().map(|a| a * 3.0).sum();
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn delta_cases() {
        let constant = Matrix::from_fn(5, 2, |_, _| 4.0);
        let d = deltas(&constant);
        assert_eq!(d.cols(), 6);
        assert!((0..5).all(|t| d.row(t)[2..].iter().all(|&x| x == 0.0)));

        let ramp = Matrix::from_fn(6, 1, |t, _| t as f64);
        let d = deltas(&ramp);
        for t in 2..4 {
            assert_eq!(d.get(t, 1), 1.0);
            assert_eq!(d.get(t, 2), 0.0);
        }
        let single = deltas(&Matrix::from_vec(1, 2, vec![1.0, 2.0]));
        assert_eq!(single.row(0), &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn pipeline_width_and_determinism() {
        let ex = MfccExtractor::new(cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let wave: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() - 0.5).collect();
        let a = ex.extract(&wave).unwrap();
        assert_eq!(a.cols(), 39);
        assert_eq!(a.rows(), n_frames(5000, &cfg()));
        assert_eq!(a, ex.extract(&wave).unwrap());
        assert!(a.is_finite());
        // silence hits the log floor everywhere: constant log energies
        let s = ex.extract(&[0.0; 1000]).unwrap();
        assert!(s.as_slice().iter().all(|&x| x.abs() < 1e-9));
        assert!(ex.extract(&[f64::NAN]).is_err());
    }

    #[test]
    fn standardization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = Matrix::from_fn(50, 3, |_, c| {
            if c == 2 {
                7.0
            } else {
                rng.random::<f64>() * 4.0 + 1.0
            }
        });
        let mut b = Matrix::from_fn(30, 3, |_, c| {
            if c == 2 {
                7.0
            } else {
                rng.random::<f64>() * 4.0 + 1.0
            }
        });
        let stats = compute_stats([&a, &b]).unwrap();
        standardize(&mut a, &stats);
        standardize(&mut b, &stats);
        let after = compute_stats([&a, &b]).unwrap();
        for c in 0..2 {
            assert_abs_diff_eq!(after.mean[c], 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(after.std[c], 1.0, epsilon = 1e-6);
        }
        assert!(a.as_slice().iter().skip(2).step_by(3).all(|&x| x == 0.0));

        // data standardized with someone else's statistics keeps its offset
        let mut shifted = Matrix::from_fn(10, 3, |_, _| 100.0);
        standardize(&mut shifted, &stats);
        assert!(shifted.get(0, 0) > 10.0);
    }

    #[test]
    fn alignment_rules() {
        let c = cfg();
        let one = [LabeledInterval {
            start: 0,
            end: 10_000,
            label: 4,
        }];
        assert_eq!(align_targets(&one, 5, &c).unwrap(), vec![4; 5]);

        // boundary at frame 1's center (360): half-open, the later phone wins
        let two = [
            LabeledInterval {
                start: 0,
                end: 360,
                label: 1,
            },
            LabeledInterval {
                start: 360,
                end: 700,
                label: 2,
            },
        ];
        assert_eq!(align_targets(&two, 4, &c).unwrap(), vec![1, 2, 2, 2]);
        assert!(align_targets(&[], 3, &c).is_err());
    }

    #[test]
    fn config_hash_tracks_fields() {
        let a = cfg();
        let b = FeatureConfig {
            n_filters: 26,
            ..cfg()
        };
        assert_eq!(a.hash(), cfg().hash());
        assert_ne!(a.hash(), b.hash());
        assert!(FeatureConfig {
            frame_len: 600,
            ..cfg()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn mel_round_trip(f in 1e-3..8000.0f64) {
            let back = mel_to_hz(hz_to_mel(f));
            prop_assert!(((back - f) / f).abs() <= 1e-9);
        }

        #[test]
        fn labels_match_frame_count(len in 0usize..20_000, cut in 1u64..20_000) {
            let c = cfg();
            let iv = [
                LabeledInterval { start: 0, end: cut, label: 0 },
                LabeledInterval { start: cut, end: cut + 5000, label: 1 },
            ];
            let n = n_frames(len, &c);
            prop_assert_eq!(align_targets(&iv, n, &c).unwrap().len(), n);
        }
    }
}
