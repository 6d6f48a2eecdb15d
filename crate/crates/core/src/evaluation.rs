//! Reconstruction metrics, the L_x sweep, cross-session aggregates, and the
//! subject-profile regression with its overall F-test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::numfmt;
use crate::preprocess::preprocess_session;
use crate::regression::{fit_and_reconstruct, CycleSpectra, SubjectRun};
use crate::signal::{Scheme, Session};
use crate::stats::f_survival;

/// `||y - y_hat|| / ||y||`.
pub fn rrmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat, 1)?;
    let denom = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// Pearson correlation, clamped to `[-1, 1]`.
pub fn pearson(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths(y, y_hat, 2)?;
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let mh = y_hat.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(y_hat) {
        let (da, db) = (a - my, b - mh);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn check_lengths(a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < min {
        return Err(Error::LengthMismatch {
            expected: min,
            actual: a.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub rrmse: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub rho: f64,
    pub n_test_cycles: usize,
    pub scheme: Scheme,
    pub l_x: usize,
}

impl SessionMetrics {
    pub fn from_run(run: &SubjectRun) -> Result<Self> {
        Ok(Self {
            rrmse: rrmse(&run.reference, &run.reconstruction)?,
            rho: pearson(&run.reference, &run.reconstruction)?,
            n_test_cycles: run.n_test,
            scheme: run.model.scheme,
            l_x: run.model.lx,
        })
    }
}

/// Default sweep grid: 2, 4, ..., 40.
pub fn default_grid() -> Vec<usize> {
    (1..=20).map(|i| 2 * i).collect()
}

/// Re-trains for each `L_x` in `grid`, reusing one preprocessing pass.
pub fn sweep_lx(s: &Session, grid: &[usize], cfg: &PipelineConfig) -> Result<Vec<(usize, SessionMetrics)>> {
    cfg.validate_ranges()?;
    if let Some(&bad) = grid.iter().find(|&&g| g == 0 || g > cfg.len) {
        return Err(Error::BadCount {
            count: bad,
            len: cfg.len,
        });
    }
    let spectra = CycleSpectra::new(preprocess_session(s, cfg)?)?;
    grid.iter()
        .map(|&lx| {
            let run = fit_and_reconstruct(&spectra, cfg, lx)?;
            Ok((lx, SessionMetrics::from_run(&run)?))
        })
        .collect()
}

/// Sample mean and sample (n - 1) standard deviation of both metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub rrmse_mean: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub rrmse_std: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub rho_mean: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub rho_std: f64,
}

/// Sums run over sorted values so the result does not depend on input order.
pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.first() == sorted.last() {
        return (sorted.first().copied().unwrap_or(f64::NAN), 0.0);
    }
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate(metrics: &[SessionMetrics]) -> Result<Aggregate> {
    if metrics.len() < 2 {
        return Err(Error::TooFewSessions {
            needed: 2,
            have: metrics.len(),
        });
    }
    let r: Vec<f64> = metrics.iter().map(|m| m.rrmse).collect();
    let p: Vec<f64> = metrics.iter().map(|m| m.rho).collect();
    let (rrmse_mean, rrmse_std) = mean_and_sample_std(&r);
    let (rho_mean, rho_std) = mean_and_sample_std(&p);
    Ok(Aggregate {
        n: metrics.len(),
        rrmse_mean,
        rrmse_std,
        rho_mean,
        rho_std,
    })
}

/// OLS fit of `metric ~ 1 + age + weight + age*weight` with the overall
/// F-test against the intercept-only model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRegressionResult {
    /// Intercept, age, weight, age x weight.
    #[serde(serialize_with = "numfmt::ser_f64_slice")]
    pub coefficients: Vec<f64>,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub r_squared: f64,
    /// Infinite for a perfect fit (written as `null`).
    #[serde(serialize_with = "numfmt::ser_f64", deserialize_with = "de_f64_or_inf")]
    pub f_statistic: f64,
    #[serde(serialize_with = "numfmt::ser_f64")]
    pub p_value: f64,
    pub n: usize,
}

fn de_f64_or_inf<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// Number of predictors besides the intercept.
const PROFILE_PREDICTORS: usize = 3;

pub fn profile_regression(rows: &[(f64, f64, f64)]) -> Result<ProfileRegressionResult> {
    let n = rows.len();
    if n < 5 {
        return Err(Error::TooFewSessions { needed: 5, have: n });
    }
    let design = DMatrix::from_fn(n, 4, |i, j| {
        let (age, weight, _) = rows[i];
        match j {
            0 => 1.0,
            1 => age,
            2 => weight,
            _ => age * weight,
        }
    });
    let target = DVector::from_iterator(n, rows.iter().map(|r| r.2));

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficientDesign);
    }
    let beta = svd
        .solve(&target, 0.0)
        .map_err(|_| Error::RankDeficientDesign)?;

    let mean = target.mean();
    let ss_tot: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res = (&design * &beta - &target).norm_squared();

    let df_res = (n - 1 - PROFILE_PREDICTORS) as f64;
    // A metric constant up to rounding has no variance to explain.
    let flat = n as f64 * (4.0 * f64::EPSILON * mean.abs()).powi(2);
    let (r_squared, f_statistic, p_value) = if ss_tot <= flat {
        (0.0, 0.0, 1.0)
    } else if ss_res <= 1e-24 * ss_tot {
        (1.0, f64::INFINITY, 0.0)
    } else {
        let r2 = (1.0 - ss_res / ss_tot).clamp(0.0, 1.0);
        let f = (r2 / PROFILE_PREDICTORS as f64) / ((1.0 - r2) / df_res);
        (r2, f, f_survival(f, PROFILE_PREDICTORS as f64, df_res))
    };

    Ok(ProfileRegressionResult {
        coefficients: beta.iter().copied().collect(),
        r_squared,
        f_statistic,
        p_value,
        n,
    })
}
