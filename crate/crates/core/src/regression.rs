//! DCT-domain ridge regression from PPG to ECG coefficients, and waveform
//! reconstruction from predicted coefficients.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::numfmt;
use crate::preprocess::{preprocess_session_detailed, Preprocessed};
use crate::signal::{CoefficientSet, CyclePairSet, Scheme, Session, TransformModel};
use crate::spectral::{truncate, zero_pad, DctPlan};

const MAX_CONDITION: f64 = 1e12;
const RESIDUAL_TOL: f64 = 1e-8;

/// Chronological prefix split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8 }
    }
}

impl SplitSpec {
    /// `(n_train, n_test)` for `n` cycles.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize)> {
        // The epsilon keeps products like 0.8 * 600 from landing just below an integer.
        let n_train = (self.train_fraction * n as f64 + 1e-9).floor() as usize;
        if n < 2 || n_train == 0 || n_train >= n {
            return Err(Error::TooFewCycles(n));
        }
        Ok((n_train, n - n_train))
    }
}

pub fn split(cs: &CoefficientSet, spec: SplitSpec) -> Result<(CoefficientSet, CoefficientSet)> {
    let (n_train, n_test) = spec.sizes(cs.n_cycles())?;
    let part = |start: usize, count: usize| CoefficientSet {
        x_trunc: cs.x_trunc.rows(start, count).into_owned(),
        y_trunc: cs.y_trunc.rows(start, count).into_owned(),
        len: cs.len,
        lx: cs.lx,
        ly: cs.ly,
    };
    Ok((part(0, n_train), part(n_train, n_test)))
}

/// Solves `(X^T X + gamma I) F = X^T Y` by Cholesky factorization.
///
/// With `gamma = 0` the Gram matrix must have a condition number below 1e12.
pub fn train_ridge(x: &DMatrix<f64>, y: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.nrows(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::TooFewCycles(0));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidConfig(format!("gamma must be nonnegative, got {gamma}")));
    }
    let p = x.ncols();
    let gram = x.tr_mul(x);
    let rhs = x.tr_mul(y);

    if gamma == 0.0 {
        let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
        let max = eig.max();
        let min = eig.min();
        let cond = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(cond < MAX_CONDITION) {
            return Err(Error::SingularSystem(cond));
        }
    }

    let system = &gram + DMatrix::identity(p, p) * gamma;
    let chol = system
        .clone()
        .cholesky()
        .ok_or(Error::SingularSystem(f64::INFINITY))?;
    let f = chol.solve(&rhs);

    let residual = (&system * &f - &rhs).norm();
    let scale = rhs.norm();
    if !(residual <= RESIDUAL_TOL * scale + f64::MIN_POSITIVE) {
        return Err(Error::SingularSystem(residual / scale));
    }
    Ok(f)
}

/// `X_test f*`.
pub fn predict(model: &TransformModel, x_test: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x_test.ncols() != model.lx {
        return Err(Error::DimensionMismatch {
            expected: model.lx,
            actual: x_test.ncols(),
        });
    }
    Ok(x_test * &model.f_star)
}

/// Zero-pads each predicted row to L, inverts the DCT, and concatenates the
/// cycles in order.
pub fn reconstruct_waveform(model: &TransformModel, coeffs_pred: &DMatrix<f64>) -> Result<Vec<f64>> {
    if coeffs_pred.ncols() != model.ly {
        return Err(Error::DimensionMismatch {
            expected: model.ly,
            actual: coeffs_pred.ncols(),
        });
    }
    let plan = DctPlan::new(model.len);
    let cycles = plan.inverse_rows(&zero_pad(coeffs_pred, model.len)?)?;
    Ok(row_major(&cycles))
}

/// Concatenates matrix rows.
pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Full-length DCT spectra of a cycle pair set; truncation for any `L_x`
/// can be taken from here without redoing preprocessing.
#[derive(Debug, Clone)]
pub struct CycleSpectra {
    pub x_full: DMatrix<f64>,
    pub y_full: DMatrix<f64>,
    pub cycles: CyclePairSet,
}

impl CycleSpectra {
    pub fn new(cycles: CyclePairSet) -> Result<Self> {
        let plan = DctPlan::new(cycles.len);
        Ok(Self {
            x_full: plan.forward_rows(&cycles.c_x)?,
            y_full: plan.forward_rows(&cycles.c_y)?,
            cycles,
        })
    }

    pub fn coefficients(&self, lx: usize, ly: usize) -> Result<CoefficientSet> {
        Ok(CoefficientSet {
            x_trunc: truncate(&self.x_full, lx)?,
            y_trunc: truncate(&self.y_full, ly)?,
            len: self.cycles.len,
            lx,
            ly,
        })
    }
}

/// Outcome of training and testing on one session.
#[derive(Debug, Clone)]
pub struct SubjectRun {
    pub model: TransformModel,
    /// Concatenated reconstructed test cycles.
    pub reconstruction: Vec<f64>,
    /// Concatenated normalized test ECG cycles.
    pub reference: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

/// Train on the chronological prefix, reconstruct the rest.
pub fn fit_and_reconstruct(
    spectra: &CycleSpectra,
    cfg: &PipelineConfig,
    lx: usize,
) -> Result<SubjectRun> {
    let coeffs = spectra.coefficients(lx, cfg.ly)?;
    let spec = SplitSpec {
        train_fraction: cfg.train_fraction,
    };
    let (train, test) = split(&coeffs, spec)?;
    let f_star = train_ridge(&train.x_trunc, &train.y_trunc, cfg.gamma)?;
    let model = TransformModel {
        f_star,
        gamma: cfg.gamma,
        len: cfg.len,
        lx,
        ly: cfg.ly,
        scheme: spectra.cycles.scheme,
        lambda_detrend: cfg.lambda_detrend,
    };
    let reconstruction = reconstruct_waveform(&model, &predict(&model, &test.x_trunc)?)?;
    let n_train = train.n_cycles();
    let reference = row_major(&spectra.cycles.c_y.rows(n_train, test.n_cycles()).into_owned());
    Ok(SubjectRun {
        model,
        reconstruction,
        reference,
        n_train,
        n_test: test.n_cycles(),
    })
}

/// Preprocess, transform, split, train, predict and reconstruct one session.
pub fn run_subject_dependent(s: &Session, cfg: &PipelineConfig) -> Result<SubjectRun> {
    cfg.validate_ranges()?;
    let pre: Preprocessed = preprocess_session_detailed(s, cfg)?;
    let spectra = CycleSpectra::new(pre.cycles)?;
    fit_and_reconstruct(&spectra, cfg, cfg.lx)
}

/// Applies a trained model to the held-out part of a session.
pub fn apply_model(s: &Session, model: &TransformModel, cfg: &PipelineConfig) -> Result<SubjectRun> {
    let cfg = PipelineConfig {
        scheme: model.scheme,
        len: model.len,
        lx: model.lx,
        ly: model.ly,
        lambda_detrend: model.lambda_detrend,
        gamma: model.gamma,
        ..cfg.clone()
    };
    cfg.validate_ranges()?;
    let pre = preprocess_session_detailed(s, &cfg)?;
    let spectra = CycleSpectra::new(pre.cycles)?;
    let coeffs = spectra.coefficients(model.lx, model.ly)?;
    let (train, test) = split(
        &coeffs,
        SplitSpec {
            train_fraction: cfg.train_fraction,
        },
    )?;
    let reconstruction = reconstruct_waveform(model, &predict(model, &test.x_trunc)?)?;
    let reference = row_major(&spectra.cycles.c_y.rows(train.n_cycles(), test.n_cycles()).into_owned());
    Ok(SubjectRun {
        model: model.clone(),
        reconstruction,
        reference,
        n_train: train.n_cycles(),
        n_test: test.n_cycles(),
    })
}

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize)]
struct ModelFileOut<'a> {
    version: u32,
    scheme: Scheme,
    #[serde(rename = "L")]
    len: usize,
    #[serde(rename = "L_x")]
    lx: usize,
    #[serde(rename = "L_y")]
    ly: usize,
    #[serde(serialize_with = "numfmt::ser_f64")]
    gamma: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    lambda_detrend: f64,
    #[serde(serialize_with = "numfmt::ser_f64_slice")]
    f_star: &'a [f64],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFileIn {
    version: u32,
    scheme: Scheme,
    #[serde(rename = "L")]
    len: usize,
    #[serde(rename = "L_x")]
    lx: usize,
    #[serde(rename = "L_y")]
    ly: usize,
    gamma: f64,
    lambda_detrend: f64,
    f_star: Vec<f64>,
}

impl TransformModel {
    /// JSON with `f_star` flattened row-major.
    pub fn to_json(&self) -> Result<String> {
        let flat = row_major(&self.f_star);
        let out = ModelFileOut {
            version: MODEL_VERSION,
            scheme: self.scheme,
            len: self.len,
            lx: self.lx,
            ly: self.ly,
            gamma: self.gamma,
            lambda_detrend: self.lambda_detrend,
            f_star: &flat,
        };
        Ok(serde_json::to_string_pretty(&out)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ModelFileIn = serde_json::from_str(text)?;
        if m.version != MODEL_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported model version {}", m.version)));
        }
        if m.lx == 0 || m.ly == 0 || m.lx > m.len || m.ly > m.len {
            return Err(Error::InvalidConfig("model dimensions out of range".into()));
        }
        if m.f_star.len() != m.lx * m.ly {
            return Err(Error::DimensionMismatch {
                expected: m.lx * m.ly,
                actual: m.f_star.len(),
            });
        }
        if m.f_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("model contains non-finite entries".into()));
        }
        Ok(Self {
            f_star: DMatrix::from_row_slice(m.lx, m.ly, &m.f_star),
            gamma: m.gamma,
            len: m.len,
            lx: m.lx,
            ly: m.ly,
            scheme: m.scheme,
            lambda_detrend: m.lambda_detrend,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
