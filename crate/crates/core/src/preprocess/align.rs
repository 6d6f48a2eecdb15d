//! Two-level PPG/ECG alignment: a cycle-level delay chosen by matching peak
//! timing patterns, then a single sample-level shift that brings each PPG
//! onset onto its paired R peak.

use crate::error::{Error, Result};
use crate::preprocess::peaks::onsets_from_systolic;
use crate::signal::{merge_intervals, Interval, PeakTrain, Session, TimeSeries};

/// Default search radius for the cycle delay.
pub const DEFAULT_SEARCH_RADIUS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub cycle_delay: i64,
    /// Samples the PPG stream was moved (negative = earlier).
    pub sample_shift: i64,
    pub ppg: TimeSeries,
    pub ecg: TimeSeries,
    /// Start of the aligned window in the original ECG timeline.
    pub ecg_offset: usize,
    /// R peaks in aligned coordinates.
    pub r_peaks: Vec<usize>,
    /// Artifact intervals of both streams in aligned coordinates.
    pub artifact_mask: Vec<Interval>,
}

/// Index offsets `(systolic, r)` that pair PPG cycle `i + a` with ECG cycle
/// `i + b` for candidate delay `n`.
fn pairing(n: i64) -> (usize, usize) {
    if n < 0 {
        (n.unsigned_abs() as usize, 0)
    } else {
        (0, n as usize)
    }
}

/// Summed absolute timing discrepancy after anchoring both trains at their
/// first paired peak.
pub fn delay_cost(sp: &[usize], rp: &[usize], k: usize, n: i64) -> u64 {
    let total = sp.len().min(rp.len());
    let (a, b) = pairing(n);
    let (sa, rb) = (sp[a] as i64, rp[b] as i64);
    (0..total - k)
        .map(|i| ((sp[i + a] as i64 - sa) - (rp[i + b] as i64 - rb)).unsigned_abs())
        .sum()
}

/// Chooses the delay in `[-k, k]` with the lowest [`delay_cost`]. Ties go to
/// the smallest magnitude, then to the negative candidate.
pub fn estimate_cycle_delay(sp: &PeakTrain, rp: &PeakTrain, k: usize) -> Result<i64> {
    let have = sp.len().min(rp.len());
    if have < k + 2 {
        return Err(Error::InsufficientPeaks {
            needed: k + 2,
            have,
        });
    }
    let candidates = std::iter::once(0i64).chain((1..=k as i64).flat_map(|m| [-m, m]));
    let mut best = (u64::MAX, 0i64);
    for n in candidates {
        let cost = delay_cost(&sp.indices, &rp.indices, k, n);
        if cost < best.0 {
            best = (cost, n);
        }
    }
    Ok(best.1)
}

/// Shifts the PPG so that onsets land on their paired R peaks.
///
/// The shift is the median per-cycle onset-to-R offset. Samples pushed out
/// of range are dropped and both signals are cut to their common support.
pub fn align_to_sample(
    s: &Session,
    r_peaks: &PeakTrain,
    systolic: &PeakTrain,
    delay: i64,
) -> Result<AlignmentResult> {
    let onsets = onsets_from_systolic(&s.ppg.samples, &systolic.indices);
    let (a, b) = pairing(delay);
    let mut offsets: Vec<i64> = onsets
        .iter()
        .skip(a)
        .zip(r_peaks.indices.iter().skip(b))
        .map(|(&o, &r)| o as i64 - r as i64)
        .collect();
    if offsets.is_empty() {
        return Err(Error::InsufficientPeaks { needed: 1, have: 0 });
    }
    offsets.sort_unstable();
    let median = offsets[offsets.len() / 2];
    shift_pair(s, r_peaks, delay, -median)
}

/// Applies a PPG shift of `shift` samples (`new_ppg[n] = ppg[n - shift]`).
pub fn shift_pair(
    s: &Session,
    r_peaks: &PeakTrain,
    delay: i64,
    shift: i64,
) -> Result<AlignmentResult> {
    let t = s.len();
    let m = shift.unsigned_abs() as usize;
    if m >= t {
        return Err(Error::EmptyOverlap);
    }
    let len = t - m;
    let (ppg_offset, ecg_offset) = if shift <= 0 { (m, 0) } else { (0, m) };

    let ppg = TimeSeries::new(s.ppg.samples[ppg_offset..ppg_offset + len].to_vec(), s.ppg.fs);
    let ecg = TimeSeries::new(s.ecg.samples[ecg_offset..ecg_offset + len].to_vec(), s.ecg.fs);

    let r_peaks = r_peaks
        .indices
        .iter()
        .filter(|&&r| r >= ecg_offset && r < ecg_offset + len)
        .map(|&r| r - ecg_offset)
        .collect();

    let remap = |iv: &Interval, off: usize| {
        Interval::new(iv.start.saturating_sub(off), iv.end.saturating_sub(off))
    };
    let mask: Vec<Interval> = s
        .artifact_mask
        .iter()
        .flat_map(|iv| [remap(iv, ecg_offset), remap(iv, ppg_offset)])
        .collect();

    Ok(AlignmentResult {
        cycle_delay: delay,
        sample_shift: shift,
        ppg,
        ecg,
        ecg_offset,
        r_peaks,
        artifact_mask: merge_intervals(&mask, len),
    })
}
