//! Core data types shared across the pipeline.
//!
//! A [`Session`] carries one subject's simultaneously recorded PPG and ECG.
//! Preprocessing turns it into a [`CyclePairSet`], the spectral layer into a
//! [`CoefficientSet`], and training into a [`TransformModel`].

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub samples: Vec<f64>,
    /// Sampling rate in Hz.
    pub fs: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, fs: f64) -> Self {
        Self { samples, fs }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Half-open sample interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Cycle segmentation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Scheme {
    /// Boundaries one third of a cycle before each R peak.
    #[serde(rename = "SR")]
    Sr,
    /// Boundaries at consecutive R peaks.
    #[default]
    #[serde(rename = "R2R")]
    R2r,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Sr => f.write_str("SR"),
            Scheme::R2r => f.write_str("R2R"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SR" => Ok(Scheme::Sr),
            "R2R" => Ok(Scheme::R2r),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PeakKind {
    EcgR,
    PpgSystolic,
    PpgOnset,
}

/// Strictly increasing landmark indices of one kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeakTrain {
    pub indices: Vec<usize>,
    pub kind: PeakKind,
}

impl PeakTrain {
    pub fn new(indices: Vec<usize>, kind: PeakKind) -> Self {
        Self { indices, kind }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// One subject's recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub ppg: TimeSeries,
    pub ecg: TimeSeries,
    /// Years.
    pub age: Option<f64>,
    /// Kilograms.
    pub weight: Option<f64>,
    pub artifact_mask: Vec<Interval>,
    pub ppg_peaks: Option<Vec<usize>>,
    pub ecg_peaks: Option<Vec<usize>>,
}

impl Session {
    pub fn new(ppg: TimeSeries, ecg: TimeSeries) -> Self {
        Self {
            ppg,
            ecg,
            age: None,
            weight: None,
            artifact_mask: Vec::new(),
            ppg_peaks: None,
            ecg_peaks: None,
        }
    }

    pub fn fs(&self) -> f64 {
        self.ecg.fs
    }

    pub fn len(&self) -> usize {
        self.ecg.len().min(self.ppg.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Relative length difference tolerated before truncation is refused.
pub const LENGTH_TOLERANCE: f64 = 0.01;

/// Checks a session and brings it to canonical form.
///
/// Signals are truncated to their common length (if within 1%), artifact
/// intervals are clipped and merged, and peak annotations beyond the end are
/// dropped. Applying this twice is the same as applying it once.
pub fn validate_session(mut s: Session) -> Result<Session> {
    for fs in [s.ppg.fs, s.ecg.fs] {
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::UnitMismatch(fs));
        }
    }
    if (s.ppg.fs - s.ecg.fs).abs() > 1e-9 * s.ecg.fs {
        return Err(Error::SamplingRateMismatch {
            ppg: s.ppg.fs,
            ecg: s.ecg.fs,
        });
    }

    let (np, ne) = (s.ppg.len(), s.ecg.len());
    let longest = np.max(ne);
    if longest == 0 {
        return Err(Error::SignalTooShort { len: 0, min: 1 });
    }
    if (np.abs_diff(ne) as f64) > LENGTH_TOLERANCE * longest as f64 {
        return Err(Error::LengthMismatchBeyondTolerance { ppg: np, ecg: ne });
    }
    let t = np.min(ne);
    s.ppg.samples.truncate(t);
    s.ecg.samples.truncate(t);

    for series in [&s.ppg, &s.ecg] {
        if let Some(i) = series.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
    }

    if let Some(age) = s.age {
        if !(age >= 0.0) || !age.is_finite() {
            return Err(Error::InvalidConfig(format!("age must be nonnegative, got {age}")));
        }
    }
    if let Some(w) = s.weight {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidConfig(format!("weight must be positive, got {w}")));
        }
    }

    for peaks in [&mut s.ppg_peaks, &mut s.ecg_peaks].into_iter().flatten() {
        if let Some(pos) = peaks.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotonePeaks(pos + 1));
        }
        peaks.retain(|&p| p < t);
    }

    s.artifact_mask = merge_intervals(&s.artifact_mask, t);
    Ok(s)
}

/// Clips intervals to `[0, limit)`, drops empty ones, and merges overlapping
/// or touching intervals into a sorted disjoint list.
pub fn merge_intervals(intervals: &[Interval], limit: usize) -> Vec<Interval> {
    let mut v: Vec<Interval> = intervals
        .iter()
        .map(|iv| Interval::new(iv.start.min(limit), iv.end.min(limit)))
        .filter(|iv| !iv.is_empty())
        .collect();
    v.sort();
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for iv in v {
        match out.last_mut() {
            Some(last) if iv.start <= last.end => last.end = last.end.max(iv.end),
            _ => out.push(iv),
        }
    }
    out
}

/// Aligned, scaled and z-normalized cycle pairs (one row per cycle).
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePairSet {
    /// Normalized PPG cycles, N x L.
    pub c_x: DMatrix<f64>,
    /// Normalized ECG cycles, N x L.
    pub c_y: DMatrix<f64>,
    pub scheme: Scheme,
    /// Cycle length after rescaling.
    pub len: usize,
    /// Segment boundaries in the aligned timeline, one per row.
    pub boundaries: Vec<Interval>,
    /// Rows dropped for near-zero variance.
    pub degenerate_dropped: usize,
}

impl CyclePairSet {
    pub fn n_cycles(&self) -> usize {
        self.c_x.nrows()
    }
}

/// Truncated DCT coefficients of a cycle pair set.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    /// N x L_x.
    pub x_trunc: DMatrix<f64>,
    /// N x L_y.
    pub y_trunc: DMatrix<f64>,
    pub len: usize,
    pub lx: usize,
    pub ly: usize,
}

impl CoefficientSet {
    pub fn n_cycles(&self) -> usize {
        self.x_trunc.nrows()
    }
}

/// Learned PPG-to-ECG coefficient map with the settings needed to reapply it.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformModel {
    /// L_x x L_y.
    pub f_star: DMatrix<f64>,
    pub gamma: f64,
    pub len: usize,
    pub lx: usize,
    pub ly: usize,
    pub scheme: Scheme,
    pub lambda_detrend: f64,
}
