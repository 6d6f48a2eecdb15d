use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Scheme;

/// Where peak locations come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PeakSource {
    /// Annotations only; missing annotations are an error.
    Annotations,
    /// Always run the detector.
    Detector,
    /// Annotations when present, otherwise the detector.
    #[default]
    Auto,
}

/// Every knob of the subject-dependent pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub scheme: Scheme,
    /// Cycle length after rescaling.
    #[serde(rename = "L")]
    pub len: usize,
    /// Retained PPG coefficients.
    #[serde(rename = "L_x")]
    pub lx: usize,
    /// Retained ECG coefficients.
    #[serde(rename = "L_y")]
    pub ly: usize,
    #[serde(serialize_with = "crate::numfmt::ser_f64")]
    pub lambda_detrend: f64,
    #[serde(serialize_with = "crate::numfmt::ser_f64")]
    pub gamma: f64,
    /// Cycle-delay search radius.
    pub k: usize,
    #[serde(serialize_with = "crate::numfmt::ser_f64")]
    pub train_fraction: f64,
    pub peak_source: PeakSource,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::R2r,
            len: 300,
            lx: 12,
            ly: 100,
            lambda_detrend: 500.0,
            gamma: 10.0,
            k: 5,
            train_fraction: 0.8,
            peak_source: PeakSource::Auto,
        }
    }
}

impl PipelineConfig {
    /// Full check, including `L_x <= L_y <= L`.
    pub fn validate(&self) -> Result<()> {
        self.validate_ranges()?;
        if self.lx > self.ly {
            return Err(Error::InvalidConfig(format!(
                "L_x ({}) must not exceed L_y ({})",
                self.lx, self.ly
            )));
        }
        Ok(())
    }

    /// Checks that hold for every run, sweeps included.
    pub fn validate_ranges(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.len < 2 {
            return bad(format!("L must be >= 2, got {}", self.len));
        }
        for (name, v) in [("L_x", self.lx), ("L_y", self.ly)] {
            if v == 0 || v > self.len {
                return bad(format!("{name} must be in [1, {}], got {v}", self.len));
            }
        }
        if !(self.lambda_detrend > 0.0) || !self.lambda_detrend.is_finite() {
            return bad(format!("lambda_detrend must be positive, got {}", self.lambda_detrend));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must be in (0, 1), got {}", self.train_fraction));
        }
        Ok(())
    }
}
