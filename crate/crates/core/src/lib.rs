//! Reconstructing ECG cycles from PPG cycles through a learned linear map
//! between their DCT coefficients.
//!
//! The pipeline per session: peak detection, cycle-delay and sample
//! alignment, detrending, cycle segmentation and normalization, DCT,
//! ridge regression on the first 80% of cycles, and reconstruction of the
//! remaining 20%.
//!
//! ```no_run
//! use ppg2ecg::{ingest, run_subject_dependent, PipelineConfig, SessionMetrics};
//!
//! let session = ingest("data/session_001".as_ref())?;
//! let run = run_subject_dependent(&session, &PipelineConfig::default())?;
//! let m = SessionMetrics::from_run(&run)?;
//! println!("rho = {:.3}, rRMSE = {:.3}", m.rho, m.rrmse);
//! # Ok::<(), ppg2ecg::Error>(())
//! ```

pub mod config;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod numfmt;
pub mod preprocess;
pub mod regression;
pub mod report;
pub mod signal;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use config::{PeakSource, PipelineConfig};
pub use error::{Error, Result};
pub use evaluation::{
    aggregate, default_grid, pearson, profile_regression, rrmse, sweep_lx, Aggregate,
    ProfileRegressionResult, SessionMetrics,
};
pub use io::ingest;
pub use preprocess::{preprocess_session, preprocess_session_detailed, Preprocessed};
pub use regression::{apply_model, run_subject_dependent, train_ridge, SubjectRun};
pub use report::{Report, SessionEntry};
pub use signal::{
    CoefficientSet, CyclePairSet, Interval, PeakKind, PeakTrain, Scheme, Session, TimeSeries,
    TransformModel,
};
pub use spectral::DctPlan;
pub use synth::{generate, Coupling, GroundTruth, SynthConfig};
