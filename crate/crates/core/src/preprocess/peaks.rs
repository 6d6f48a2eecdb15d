//! Landmark detection: ECG R peaks, PPG systolic peaks and PPG onsets.
//!
//! A sample is a candidate peak when it is a local maximum above an adaptive
//! threshold computed over a centered 2 s window:
//! `mean + min(2 std, (max - mean) / 2)`. Candidates closer than a refractory
//! period are merged, keeping the larger one. The refractory period starts at
//! 0.25 s and is then re-derived as a quarter of the median inter-peak
//! interval from the first pass.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::signal::{PeakKind, PeakTrain, TimeSeries};

const WINDOW_S: f64 = 2.0;
const STD_FACTOR: f64 = 2.0;
const BOOTSTRAP_REFRACTORY_S: f64 = 0.25;
const REFRACTORY_FRACTION: f64 = 0.25;
const MIN_PEAKS: usize = 3;

pub fn detect_peaks(ts: &TimeSeries, kind: PeakKind) -> Result<PeakTrain> {
    let min_len = (WINDOW_S * ts.fs).ceil() as usize;
    if ts.len() < min_len.max(3) {
        return Err(Error::SignalTooShort {
            len: ts.len(),
            min: min_len.max(3),
        });
    }
    let maxima = detect_maxima(&ts.samples, ts.fs)?;
    match kind {
        PeakKind::EcgR | PeakKind::PpgSystolic => Ok(PeakTrain::new(maxima, kind)),
        PeakKind::PpgOnset => Ok(PeakTrain::new(
            onsets_from_systolic(&ts.samples, &maxima),
            PeakKind::PpgOnset,
        )),
    }
}

/// For each systolic peak, the minimum sample between it and the previous
/// systolic peak. The first peak looks back one median interval. Ties go to
/// the latest sample.
pub fn onsets_from_systolic(samples: &[f64], systolic: &[usize]) -> Vec<usize> {
    let lookback = median_gap(systolic).unwrap_or(0);
    let mut out = Vec::with_capacity(systolic.len());
    for (j, &peak) in systolic.iter().enumerate() {
        let lo = if j == 0 {
            peak.saturating_sub(lookback)
        } else {
            systolic[j - 1] + 1
        };
        let mut best = peak.min(samples.len().saturating_sub(1));
        let mut best_val = f64::INFINITY;
        for (i, &v) in samples.iter().enumerate().take(peak).skip(lo) {
            if v <= best_val {
                best_val = v;
                best = i;
            }
        }
        out.push(best);
    }
    out
}

fn median_gap(indices: &[usize]) -> Option<usize> {
    if indices.len() < 2 {
        return None;
    }
    let mut gaps: Vec<usize> = indices.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_unstable();
    let mid = gaps.len() / 2;
    Some(if gaps.len() % 2 == 0 {
        (gaps[mid - 1] + gaps[mid]) / 2
    } else {
        gaps[mid]
    })
}

fn detect_maxima(x: &[f64], fs: f64) -> Result<Vec<usize>> {
    let half = ((WINDOW_S * fs) / 2.0).round().max(1.0) as usize;
    let threshold = adaptive_threshold(x, half);

    let candidates: Vec<usize> = (1..x.len() - 1)
        .filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] > threshold[i])
        .collect();

    let bootstrap = (BOOTSTRAP_REFRACTORY_S * fs).round() as usize;
    let first = enforce_refractory(x, &candidates, bootstrap);
    let Some(gap) = median_gap(&first) else {
        return Err(Error::TooFewPeaks(first.len()));
    };
    let refractory = (REFRACTORY_FRACTION * gap as f64).round() as usize;
    let peaks = enforce_refractory(x, &candidates, refractory);
    if peaks.len() < MIN_PEAKS {
        return Err(Error::TooFewPeaks(peaks.len()));
    }
    Ok(peaks)
}

fn enforce_refractory(x: &[f64], candidates: &[usize], refractory: usize) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for &c in candidates {
        match kept.last_mut() {
            Some(last) if c - *last < refractory => {
                if x[c] > x[*last] {
                    *last = c;
                }
            }
            _ => kept.push(c),
        }
    }
    kept
}

/// Per-sample threshold over the window `[i - half, i + half]`.
fn adaptive_threshold(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let offset = x.iter().sum::<f64>() / n as f64;
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        let c = v - offset;
        s1[i + 1] = s1[i] + c;
        s2[i + 1] = s2[i] + c * c;
    }

    let mut out = Vec::with_capacity(n);
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        while next < hi {
            while window.back().is_some_and(|&b| x[b] <= x[next]) {
                window.pop_back();
            }
            window.push_back(next);
            next += 1;
        }
        while window.front().is_some_and(|&f| f < lo) {
            window.pop_front();
        }
        let count = (hi - lo) as f64;
        let mean_c = (s1[hi] - s1[lo]) / count;
        let var = ((s2[hi] - s2[lo]) / count - mean_c * mean_c).max(0.0);
        let mean = mean_c + offset;
        let max = x[*window.front().expect("window is non-empty")];
        out.push(mean + (STD_FACTOR * var.sqrt()).min(0.5 * (max - mean)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sinusoid_peaks_one_per_period() {
        let fs = 300.0;
        let x: Vec<f64> = (0..3000).map(|n| (2.0 * PI * n as f64 / fs).sin()).collect();
        let p = detect_peaks(&TimeSeries::new(x, fs), PeakKind::EcgR).unwrap();
        assert_eq!(p.len(), 10);
        for w in p.indices.windows(2) {
            assert!((w[1] as i64 - w[0] as i64 - 300).abs() <= 1);
        }
        // Closed-form maxima at 75 + 300k.
        for (k, &i) in p.indices.iter().enumerate() {
            assert!((i as i64 - (75 + 300 * k as i64)).abs() <= 1);
        }
    }

    #[test]
    fn constant_signal_has_no_peaks() {
        let err = detect_peaks(&TimeSeries::new(vec![1.0; 3000], 300.0), PeakKind::EcgR).unwrap_err();
        assert!(matches!(err, Error::TooFewPeaks(0)));
    }

    #[test]
    fn short_signal_rejected() {
        let err = detect_peaks(&TimeSeries::new(vec![0.0; 100], 300.0), PeakKind::EcgR).unwrap_err();
        assert!(matches!(err, Error::SignalTooShort { .. }));
    }

    #[test]
    fn small_secondary_bumps_are_ignored() {
        // Tall narrow spikes every 240 samples with a smaller wave between.
        let fs = 300.0;
        let n = 4800;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let p = (i % 240) as f64;
                (-0.5 * ((p - 60.0) / 3.0).powi(2)).exp()
                    + 0.3 * (-0.5 * ((p - 140.0) / 12.0).powi(2)).exp()
            })
            .collect();
        let p = detect_peaks(&TimeSeries::new(x, fs), PeakKind::EcgR).unwrap();
        assert_eq!(p.len(), 20);
        assert!(p.indices.iter().all(|i| i % 240 == 60));
    }

    #[test]
    fn onset_is_minimum_between_peaks() {
        let x = vec![5.0, 3.0, 1.0, 2.0, 9.0, 4.0, 0.5, 0.5, 3.0, 8.0];
        let on = onsets_from_systolic(&x, &[4, 9]);
        assert_eq!(on, vec![2, 7]);
    }

    #[test]
    fn onset_kind_goes_through_detector() {
        let fs = 300.0;
        let x: Vec<f64> = (0..3000).map(|n| (2.0 * PI * n as f64 / fs).sin()).collect();
        let on = detect_peaks(&TimeSeries::new(x, fs), PeakKind::PpgOnset).unwrap();
        assert_eq!(on.kind, PeakKind::PpgOnset);
        // Minima of sin at 225 + 300k; the first lookback window reaches 0..75.
        for &i in &on.indices[1..] {
            assert_eq!((i as i64 - 225).rem_euclid(300), 0, "{i}");
        }
    }
}
