//! Cycle segmentation, temporal rescaling and z-normalization.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::signal::{CyclePairSet, Interval, Scheme};

/// Accepted cycle duration in seconds (30 to 240 bpm).
pub const MIN_CYCLE_S: f64 = 0.25;
pub const MAX_CYCLE_S: f64 = 2.0;

const DEGENERATE_STD: f64 = 1e-12;

/// One PPG/ECG cycle cut at shared boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCycle {
    pub bounds: Interval,
    pub ppg: Vec<f64>,
    pub ecg: Vec<f64>,
}

/// Segment boundaries for each scheme; partial cycles at either end are not
/// produced.
pub fn cycle_bounds(r_peaks: &[usize], scheme: Scheme) -> Vec<Interval> {
    match scheme {
        Scheme::R2r => r_peaks
            .windows(2)
            .map(|w| Interval::new(w[0], w[1]))
            .collect(),
        Scheme::Sr => {
            let third = |a: usize, b: usize| ((b - a) as f64 / 3.0).round() as usize;
            r_peaks
                .windows(3)
                .map(|w| Interval::new(w[1] - third(w[0], w[1]), w[2] - third(w[1], w[2])))
                .collect()
        }
    }
}

/// Cuts both signals at identical boundaries.
///
/// Cycles that overlap the artifact mask, leave the signal, or last outside
/// `[0.25 s, 2.0 s]` are dropped.
pub fn segment_cycles(
    ppg: &[f64],
    ecg: &[f64],
    r_peaks: &[usize],
    mask: &[Interval],
    scheme: Scheme,
    fs: f64,
) -> Result<Vec<RawCycle>> {
    let len = ppg.len().min(ecg.len());
    let in_support: Vec<usize> = r_peaks.iter().copied().filter(|&r| r < len).collect();
    if in_support.len() < 3 {
        return Err(Error::TooFewPeaks(in_support.len()));
    }
    let min_len = (MIN_CYCLE_S * fs).ceil() as usize;
    let max_len = (MAX_CYCLE_S * fs).floor() as usize;

    let cycles: Vec<RawCycle> = cycle_bounds(&in_support, scheme)
        .into_iter()
        .filter(|b| b.end <= len && (min_len..=max_len).contains(&b.len()))
        .filter(|b| !mask.iter().any(|m| m.overlaps(b)))
        .map(|b| RawCycle {
            bounds: b,
            ppg: ppg[b.start..b.end].to_vec(),
            ecg: ecg[b.start..b.end].to_vec(),
        })
        .collect();
    if cycles.is_empty() {
        return Err(Error::NoValidCycles);
    }
    Ok(cycles)
}

/// Linear interpolation onto `out_len` uniformly spaced points whose ends sit
/// on the first and last input samples.
pub fn resample_linear(x: &[f64], out_len: usize) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![x[0]; out_len];
    }
    let step = (n - 1) as f64 / (out_len - 1) as f64;
    (0..out_len)
        .map(|j| {
            if j == out_len - 1 {
                return x[n - 1];
            }
            let t = j as f64 * step;
            let i = (t.floor() as usize).min(n - 2);
            let f = t - i as f64;
            x[i] * (1.0 - f) + x[i + 1] * f
        })
        .collect()
}

/// Mean and population standard deviation.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn z_normalize(x: &[f64]) -> Option<Vec<f64>> {
    let (mean, std) = mean_std(x);
    if std < DEGENERATE_STD {
        return None;
    }
    Some(x.iter().map(|v| (v - mean) / std).collect())
}

pub fn scale_and_normalize(cycles: &[RawCycle], len: usize, scheme: Scheme) -> Result<CyclePairSet> {
    if len < 2 {
        return Err(Error::InvalidConfig(format!("cycle length L must be >= 2, got {len}")));
    }
    if cycles.is_empty() {
        return Err(Error::NoValidCycles);
    }
    let mut rows_x: Vec<f64> = Vec::new();
    let mut rows_y: Vec<f64> = Vec::new();
    let mut boundaries = Vec::new();
    let mut dropped = 0;
    for c in cycles {
        if c.ppg.len() < 2 || c.ecg.len() < 2 {
            return Err(Error::SignalTooShort {
                len: c.ppg.len().min(c.ecg.len()),
                min: 2,
            });
        }
        let x = z_normalize(&resample_linear(&c.ppg, len));
        let y = z_normalize(&resample_linear(&c.ecg, len));
        match (x, y) {
            (Some(x), Some(y)) => {
                rows_x.extend(x);
                rows_y.extend(y);
                boundaries.push(c.bounds);
            }
            _ => dropped += 1,
        }
    }
    if boundaries.is_empty() {
        return Err(Error::AllCyclesDegenerate);
    }
    if dropped > 0 {
        warn!("dropped {dropped} degenerate cycle(s)");
    }
    let n = boundaries.len();
    Ok(CyclePairSet {
        c_x: DMatrix::from_row_slice(n, len, &rows_x),
        c_y: DMatrix::from_row_slice(n, len, &rows_y),
        scheme,
        len,
        boundaries,
        degenerate_dropped: dropped,
    })
}
