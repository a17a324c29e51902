//! Gait period estimation from the lower-half foreground-pixel signal.
//!
//! Mid-stance frames (legs together) are local minima of the signal and
//! double-support frames (legs apart) are local maxima. Mid-stance occurs
//! once per leg, so one full gait cycle spans two consecutive minima
//! spacings: the period is twice the median min-to-min spacing.

use crate::error::{Error, Result};
use crate::grid::BinaryMask;

/// Detected gait period and the extrema it was derived from.
#[derive(Debug, Clone)]
pub struct GaitPeriod {
    /// Frame count of one full gait cycle.
    pub frames: usize,
    /// Frame indices of detected mid-stances.
    pub minima_indices: Vec<usize>,
    /// Frame indices of detected double-supports.
    pub maxima_indices: Vec<usize>,
}

/// Number of foreground pixels in rows `[floor(H/2), H)`.
pub fn lower_half_count(mask: &BinaryMask) -> f64 {
    let start = mask.height() / 2;
    let mut count = 0u64;
    for r in start..mask.height() {
        for c in 0..mask.width() {
            if mask.get(r, c) {
                count += 1;
            }
        }
    }
    count as f64
}

/// Lower-half counts for every frame.
pub fn count_signal(frames: &[BinaryMask]) -> Vec<f64> {
    frames.iter().map(lower_half_count).collect()
}

/// Centered moving average; windows shrink to the available neighbors at
/// the borders, so the output has the input's length.
pub fn smooth_signal(signal: &[f64], window: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 || window == 0 {
        return Err(Error::Parameter(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    if window > signal.len() {
        return Err(Error::Parameter(format!(
            "smoothing window {window} exceeds signal length {}",
            signal.len()
        )));
    }
    let half = window / 2;
    let n = signal.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let sum: f64 = signal[lo..hi].iter().sum();
        out.push(sum / (hi - lo) as f64);
    }
    Ok(out)
}

/// Strict local minima and maxima of `signal`.
///
/// A flat plateau strictly below (above) both neighbors reports its center
/// index. Signal endpoints are never extrema. Fewer than two minima is an
/// insufficient-cycles error.
pub fn find_extrema(signal: &[f64]) -> Result<(Vec<usize>, Vec<usize>)> {
    if signal.len() < 3 {
        return Err(Error::Parameter(format!(
            "extrema detection needs at least 3 samples, got {}",
            signal.len()
        )));
    }
    let mut minima = Vec::new();
    let mut maxima = Vec::new();
    let n = signal.len();
    let mut i = 0;
    while i < n {
        // Extent of the plateau of equal values starting at i.
        let mut j = i;
        while j + 1 < n && signal[j + 1] == signal[i] {
            j += 1;
        }
        if i > 0 && j + 1 < n {
            let center = (i + j) / 2;
            if signal[i - 1] > signal[i] && signal[j + 1] > signal[i] {
                minima.push(center);
            } else if signal[i - 1] < signal[i] && signal[j + 1] < signal[i] {
                maxima.push(center);
            }
        }
        i = j + 1;
    }
    if minima.len() < 2 {
        return Err(Error::InsufficientCycles(format!(
            "found {} local minima, need at least 2",
            minima.len()
        )));
    }
    Ok((minima, maxima))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Fraction of the signal swing a rise must reach to separate two
/// mid-stances.
const PROMINENCE_FRACTION: f64 = 0.2;

/// Fraction of the swing above the signal floor below which a minimum
/// must lie to count as a mid-stance.
const DEPTH_FRACTION: f64 = 0.5;

/// Keep only significant minima. Mid-stances are the deep troughs of the
/// count signal, so minima in the upper half of the swing are surface
/// ripple and dropped; of the rest, two minima separated by a rise
/// smaller than `PROMINENCE_FRACTION` of the swing are the same
/// mid-stance observed twice and only the lower one survives. A clean
/// signal passes through unchanged: its minima sit at the floor and each
/// separating crest spans the full swing.
fn significant_minima(smoothed: &[f64], minima: &[usize]) -> Vec<usize> {
    let lo = smoothed.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = smoothed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let depth_cut = lo + (hi - lo) * DEPTH_FRACTION;
    let tau = (hi - lo) * PROMINENCE_FRACTION;
    let mut kept: Vec<usize> = Vec::new();
    for &m in minima {
        if smoothed[m] > depth_cut {
            continue;
        }
        match kept.last().copied() {
            None => kept.push(m),
            Some(prev) => {
                let between = smoothed[prev + 1..m]
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                let rise = (between - smoothed[prev]).min(between - smoothed[m]);
                if rise >= tau {
                    kept.push(m);
                } else if smoothed[m] < smoothed[prev] {
                    *kept.last_mut().expect("nonempty") = m;
                }
            }
        }
    }
    kept
}

/// Estimate the gait period from a raw count signal.
///
/// The signal is smoothed and its strict local minima reduced to
/// significant mid-stances. Each leg passes mid-stance once per cycle, so
/// one full period is the sum of two consecutive mid-stance spacings; the
/// estimate is the median of those adjacent-pair sums, which also cancels
/// the one-frame rounding jitter that alternates between neighboring
/// spacings when the stride phase falls between frames. With only two
/// mid-stances the single spacing is doubled instead.
pub fn estimate_period_from_signal(signal: &[f64], smoothing_window: usize) -> Result<GaitPeriod> {
    let smoothed = smooth_signal(signal, smoothing_window)?;
    let (minima, _) = find_extrema(&smoothed)?;
    let minima = significant_minima(&smoothed, &minima);
    if minima.len() < 2 {
        return Err(Error::InsufficientCycles(format!(
            "found {} significant minima, need at least 2",
            minima.len()
        )));
    }
    // One maximum per consecutive mid-stance pair keeps the two lists
    // interleaved.
    let maxima: Vec<usize> = minima
        .windows(2)
        .map(|w| {
            let slice = &smoothed[w[0] + 1..w[1]];
            let (arg, _) = slice
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(ai, av), (i, &v)| {
                    if v > av {
                        (i, v)
                    } else {
                        (ai, av)
                    }
                });
            w[0] + 1 + arg
        })
        .collect();
    let spacings: Vec<f64> = minima
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64)
        .collect();
    let period = if spacings.len() >= 2 {
        let mut pair_sums: Vec<f64> = spacings.windows(2).map(|w| w[0] + w[1]).collect();
        median(&mut pair_sums).round() as usize
    } else {
        (2.0 * spacings[0]).round() as usize
    };
    Ok(GaitPeriod {
        frames: period,
        minima_indices: minima,
        maxima_indices: maxima,
    })
}

/// Estimate the gait period of a frame sequence from its lower-half
/// foreground-pixel counts.
pub fn estimate_gait_period(frames: &[BinaryMask], smoothing_window: usize) -> Result<GaitPeriod> {
    estimate_period_from_signal(&count_signal(frames), smoothing_window)
}
