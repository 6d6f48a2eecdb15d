//! From a raw session to aligned, detrended, segmented and normalized cycle
//! pairs.
//!
//! Order: peaks (annotations or detector), cycle delay, sample alignment,
//! detrending of both streams, segmentation, rescaling and normalization.

pub mod align;
pub mod detrend;
pub mod peaks;
pub mod segment;

pub use align::{align_to_sample, estimate_cycle_delay, AlignmentResult};
pub use detrend::detrend;
pub use peaks::detect_peaks;
pub use segment::{scale_and_normalize, segment_cycles, RawCycle};

use crate::config::{PeakSource, PipelineConfig};
use crate::error::{Error, Result};
use crate::signal::{CyclePairSet, PeakKind, PeakTrain, Session, TimeSeries};

/// Cycle pairs plus the alignment that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub cycles: CyclePairSet,
    pub cycle_delay: i64,
    pub sample_shift: i64,
    pub ecg_offset: usize,
}

fn peaks_for(
    series: &TimeSeries,
    annotated: Option<&Vec<usize>>,
    kind: PeakKind,
    source: PeakSource,
) -> Result<PeakTrain> {
    match (source, annotated) {
        (PeakSource::Annotations | PeakSource::Auto, Some(p)) => Ok(PeakTrain::new(p.clone(), kind)),
        (PeakSource::Annotations, None) => Err(Error::InvalidConfig(
            "peak annotations requested but not present".into(),
        )),
        (PeakSource::Detector | PeakSource::Auto, _) => detect_peaks(series, kind),
    }
}

/// Runs the full preprocessing chain on a validated session.
pub fn preprocess_session_detailed(s: &Session, cfg: &PipelineConfig) -> Result<Preprocessed> {
    let rp = peaks_for(&s.ecg, s.ecg_peaks.as_ref(), PeakKind::EcgR, cfg.peak_source)?;
    let sp = peaks_for(&s.ppg, s.ppg_peaks.as_ref(), PeakKind::PpgSystolic, cfg.peak_source)?;
    let delay = estimate_cycle_delay(&sp, &rp, cfg.k)?;
    let aligned = align_to_sample(s, &rp, &sp, delay)?;

    let ppg = detrend(&aligned.ppg, cfg.lambda_detrend)?;
    let ecg = detrend(&aligned.ecg, cfg.lambda_detrend)?;

    let raw = segment_cycles(
        &ppg.samples,
        &ecg.samples,
        &aligned.r_peaks,
        &aligned.artifact_mask,
        cfg.scheme,
        s.fs(),
    )?;
    let mut cycles = scale_and_normalize(&raw, cfg.len, cfg.scheme)?;
    // Report boundaries in the original ECG timeline.
    for b in &mut cycles.boundaries {
        b.start += aligned.ecg_offset;
        b.end += aligned.ecg_offset;
    }
    Ok(Preprocessed {
        cycles,
        cycle_delay: aligned.cycle_delay,
        sample_shift: aligned.sample_shift,
        ecg_offset: aligned.ecg_offset,
    })
}

pub fn preprocess_session(s: &Session, cfg: &PipelineConfig) -> Result<CyclePairSet> {
    preprocess_session_detailed(s, cfg).map(|p| p.cycles)
}
