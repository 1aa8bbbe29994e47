//! Fourier-based segmentation of recordings that repeat one sign.
//!
//! A recording becomes a 1D signal: per frame, the Euclidean distance of the
//! stacked `3|G|`-dimensional pose to the first frame's pose. The dominant
//! frequency of that signal (mode of the power spectrum, DC removed) counts
//! the repetitions, and the cuts greedily align to local minima of the
//! smoothed signal near the expected period boundaries.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FrameSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSpec {
    /// Moving-average width; odd.
    pub smoothing_window: usize,
    /// Fraction of the estimated period searched for a local minimum around
    /// each expected cut, in (0, 1].
    pub search_window_fraction: f64,
}

impl Default for SegmentationSpec {
    fn default() -> Self {
        Self {
            smoothing_window: 5,
            search_window_fraction: 0.5,
        }
    }
}

impl SegmentationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(Error::InvalidConfig(
                "smoothing window must be odd and positive".into(),
            ));
        }
        if !(self.search_window_fraction > 0.0 && self.search_window_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "search window fraction must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Distance of each frame's stacked pose to the first frame's pose.
pub fn to_signal(seq: &FrameSequence) -> Vec<f64> {
    let first = &seq.frames[0];
    seq.frames
        .iter()
        .map(|frame| {
            let mut acc = 0.0;
            for (p, q) in frame.positions.iter().zip(&first.positions) {
                for k in 0..3 {
                    let d = p[k] - q[k];
                    acc += d * d;
                }
            }
            acc.sqrt()
        })
        .collect()
}

fn moving_average(signal: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = signal.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            signal[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Estimated repetition count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepetitionEstimate {
    pub count: usize,
    /// Set when the signal was flat and the count defaulted to 1.
    pub degenerate: bool,
}

/// Repetition count: the non-DC frequency (in cycles per recording) with the
/// most power in the spectrum of the smoothed, mean-removed signal.
pub fn estimate_repetitions(signal: &[f64], spec: &SegmentationSpec) -> Result<RepetitionEstimate> {
    spec.validate()?;
    let n = signal.len();
    if n < 4 {
        return Err(Error::InvalidData(format!(
            "signal of length {n} is too short to segment"
        )));
    }
    let smoothed = moving_average(signal, spec.smoothing_window);
    let mean = smoothed.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = smoothed
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .collect();
    if buf.iter().all(|c| c.re.abs() < 1e-12) {
        return Ok(RepetitionEstimate {
            count: 1,
            degenerate: true,
        });
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut best = 1usize;
    let mut best_power = 0.0f64;
    for (k, c) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        let power = c.norm_sqr();
        if power > best_power {
            best_power = power;
            best = k;
        }
    }
    Ok(RepetitionEstimate {
        count: best,
        degenerate: false,
    })
}

/// Segmentation output; `uniform_fallback` is set when the local-minimum
/// search collapsed and the cuts fell back to exact period multiples.
#[derive(Debug, Clone)]
pub struct SegmentOutcome {
    pub segments: Vec<FrameSequence>,
    pub uniform_fallback: bool,
}

/// Cuts `seq` into `r` segments at local minima of the smoothed signal near
/// the expected period boundaries. Segments partition the frames in order
/// and inherit label, subject and fps.
pub fn cut_segments(
    seq: &FrameSequence,
    r: usize,
    spec: &SegmentationSpec,
) -> Result<SegmentOutcome> {
    spec.validate()?;
    let n = seq.len();
    if r == 0 {
        return Err(Error::InvalidConfig("repetition count must be positive".into()));
    }
    if r == 1 {
        return Ok(SegmentOutcome {
            segments: vec![seq.clone()],
            uniform_fallback: false,
        });
    }
    if r > n / 2 {
        return Err(Error::InvalidData(format!(
            "{r} repetitions cannot fit in {n} frames"
        )));
    }
    let smoothed = moving_average(&to_signal(seq), spec.smoothing_window);
    let period = n as f64 / r as f64;
    let half_window = spec.search_window_fraction * period / 2.0;

    let mut cuts: Vec<usize> = Vec::with_capacity(r + 1);
    cuts.push(0);
    let mut collapsed = false;
    for i in 1..r {
        let center = i as f64 * period;
        let prev = *cuts.last().expect("cuts start with 0");
        // Window clipped to start after the previous cut and to leave room
        // for the remaining segments.
        let lo = ((center - half_window).ceil().max(0.0) as usize).max(prev + 1);
        let hi = ((center + half_window).floor() as usize).min(n - (r - i));
        if lo > hi || hi >= n {
            collapsed = true;
            break;
        }
        let mut best = lo;
        for j in lo..=hi {
            if smoothed[j] < smoothed[best] {
                best = j;
            }
        }
        cuts.push(best);
    }
    if collapsed {
        cuts = (0..r).map(|i| ((i as f64 * period).round() as usize).min(n - 1)).collect();
        cuts.dedup();
        if cuts.len() != r {
            return Err(Error::InvalidData(format!(
                "cannot place {r} uniform cuts in {n} frames"
            )));
        }
    }
    cuts.push(n);

    let segments = cuts
        .windows(2)
        .map(|w| {
            FrameSequence::new(
                seq.label.clone(),
                seq.subject.clone(),
                seq.fps,
                seq.frames[w[0]..w[1]].to_vec(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SegmentOutcome {
        segments,
        uniform_fallback: collapsed,
    })
}
