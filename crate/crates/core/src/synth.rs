//! Synthetic PPG/ECG sessions with known ground truth.
//!
//! Two couplings are available.
//!
//! `template` renders fixed Gaussian-bump cycles: five bumps (P, Q, R, S, T)
//! for the ECG and an onset dip followed by systolic and dicrotic bumps for
//! the PPG. The PPG onset coincides with the R peak.
//!
//! `linear_dct` builds each cycle directly in the DCT domain so that the ECG
//! coefficients are an exact linear function of the first `coupled_coeffs`
//! PPG coefficients. Cycles start at the R peak. The PPG coefficients are a
//! smooth template with its low band rotated at random per cycle, keeping the
//! cycle norm fixed so that per-cycle z-scoring leaves it unchanged.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Session, TimeSeries};
use crate::spectral::DctPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    Template,
    LinearDct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Hz.
    pub fs: f64,
    pub duration_s: f64,
    /// Beats per minute.
    pub hr_mean: f64,
    /// Relative standard deviation of the cycle length.
    pub hr_jitter: f64,
    pub coupling: Coupling,
    /// Standard deviation of white noise added to both signals.
    pub noise_std: f64,
    pub seed: u64,
    /// Uniform PPG delay in samples.
    pub ppg_delay: usize,
    /// Drawn from the seed when absent.
    pub age: Option<f64>,
    pub weight: Option<f64>,
    /// Sessions emitted by the CLI; session `i` uses `seed + i`.
    pub count: usize,
    /// Grid length of the DCT-domain cycles (`linear_dct`).
    pub basis_len: usize,
    /// PPG coefficients, DC included, that drive the ECG (`linear_dct`).
    pub coupled_coeffs: usize,
    /// Highest nonzero ECG coefficient (`linear_dct`).
    pub ecg_band: usize,
    /// Per-component spread of the PPG low-band perturbation (`linear_dct`).
    pub variation: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            fs: 300.0,
            duration_s: 480.0,
            hr_mean: 75.0,
            hr_jitter: 0.03,
            coupling: Coupling::Template,
            noise_std: 0.0,
            seed: 0,
            ppg_delay: 0,
            age: None,
            weight: None,
            count: 1,
            basis_len: 300,
            coupled_coeffs: 8,
            ecg_band: 30,
            variation: 0.25,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for (name, v) in [("fs", self.fs), ("duration_s", self.duration_s), ("hr_mean", self.hr_mean)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..=0.2).contains(&self.hr_jitter) {
            return bad(format!("hr_jitter must be in [0, 0.2], got {}", self.hr_jitter));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return bad(format!("noise_std must be nonnegative, got {}", self.noise_std));
        }
        if !(self.variation >= 0.0) || !self.variation.is_finite() {
            return bad(format!("variation must be nonnegative, got {}", self.variation));
        }
        if self.count == 0 {
            return bad("count must be at least 1".into());
        }
        if self.nominal_period() < 8.0 {
            return bad("cycle length below 8 samples".into());
        }
        if self.total_samples() < 2 * self.nominal_period().round() as usize {
            return bad("duration shorter than two cycles".into());
        }
        if self.coupling == Coupling::LinearDct {
            let m = self.coupled_coeffs;
            if m < 2 || m > self.basis_len {
                return bad(format!("coupled_coeffs must be in [2, {}], got {m}", self.basis_len));
            }
            if self.ecg_band + 1 > self.basis_len || self.ecg_band < m - 1 {
                return bad(format!(
                    "ecg_band must be in [{}, {}], got {}",
                    m - 1,
                    self.basis_len - 1,
                    self.ecg_band
                ));
            }
        }
        Ok(())
    }

    fn nominal_period(&self) -> f64 {
        self.fs * 60.0 / self.hr_mean
    }

    fn total_samples(&self) -> usize {
        (self.duration_s * self.fs).round() as usize
    }
}

/// What the generator knows about its own output. Indices refer to the
/// emitted signals, PPG delay included.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub r_peaks: Vec<usize>,
    pub systolic_peaks: Vec<usize>,
    pub onsets: Vec<usize>,
    /// Cycles that fit entirely inside the recording.
    pub cycle_count: usize,
    /// `coupled_coeffs x (ecg_band + 1)`; ECG coefficients of a cycle are
    /// its PPG coefficients times this matrix (`linear_dct` only).
    pub f_true: Option<DMatrix<f64>>,
}

#[derive(Serialize)]
struct GroundTruthJson<'a> {
    r_peaks: &'a [usize],
    systolic_peaks: &'a [usize],
    onsets: &'a [usize],
    cycle_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_true_shape: Option<[usize; 2]>,
    #[serde(
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_opt_slice"
    )]
    f_true: Option<Vec<f64>>,
}

fn ser_opt_slice<S: serde::Serializer>(v: &Option<Vec<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(xs) => crate::numfmt::ser_f64_slice(xs, s),
        None => s.serialize_none(),
    }
}

impl GroundTruth {
    /// JSON with `f_true` flattened row-major.
    pub fn to_json(&self) -> Result<String> {
        let j = GroundTruthJson {
            r_peaks: &self.r_peaks,
            systolic_peaks: &self.systolic_peaks,
            onsets: &self.onsets,
            cycle_count: self.cycle_count,
            f_true_shape: self.f_true.as_ref().map(|f| [f.nrows(), f.ncols()]),
            f_true: self.f_true.as_ref().map(crate::regression::row_major),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }
}

// (fraction of cycle, amplitude, width as fraction of cycle)
const ECG_BUMPS: [(f64, f64, f64); 5] = [
    (0.14, 0.12, 0.025),
    (0.27, -0.12, 0.008),
    (0.30, 1.0, 0.010),
    (0.33, -0.22, 0.008),
    (0.58, 0.25, 0.05),
];
const R_FRAC: f64 = 0.30;
// Relative to the onset.
const PPG_BUMPS: [(f64, f64, f64); 3] = [(0.0, -0.2, 0.015), (0.22, 1.0, 0.07), (0.50, 0.45, 0.09)];

fn cycle_lengths(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let p = cfg.nominal_period();
    let total = cfg.total_samples();
    let mut out = Vec::new();
    let mut acc = 0;
    while acc < total {
        let z: f64 = rng.sample::<f64, _>(StandardNormal).clamp(-3.0, 3.0);
        let len = (p * (1.0 + cfg.hr_jitter * z)).round().max(2.0) as usize;
        out.push(len);
        acc += len;
    }
    out
}

fn full_cycles(starts: &[usize], lens: &[usize], total: usize) -> usize {
    starts.iter().zip(lens).filter(|(s, l)| *s + *l <= total).count()
}

fn add_bump(buf: &mut [f64], center: usize, amp: f64, width: f64) {
    let reach = (6.0 * width).ceil() as usize;
    let lo = center.saturating_sub(reach);
    let hi = (center + reach + 1).min(buf.len());
    for (n, v) in buf.iter_mut().enumerate().take(hi).skip(lo) {
        let d = (n as f64 - center as f64) / width;
        *v += amp * (-0.5 * d * d).exp();
    }
}

fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

struct Clean {
    ppg: Vec<f64>,
    ecg: Vec<f64>,
    r_peaks: Vec<usize>,
    systolic: Vec<usize>,
    onsets: Vec<usize>,
    cycle_count: usize,
    f_true: Option<DMatrix<f64>>,
}

fn render_template(cfg: &SynthConfig, lens: &[usize]) -> Clean {
    let total = cfg.total_samples();
    let starts: Vec<usize> = lens.iter().scan(0, |s, &l| {
        let out = *s;
        *s += l;
        Some(out)
    }).collect();
    // Render past the end so the last partial cycle is complete, then cut.
    let span = starts.last().unwrap() + lens.last().unwrap() + lens.iter().max().unwrap();
    let mut ecg = vec![0.0; span];
    let mut ppg = vec![0.0; span];
    let mut r_peaks = Vec::new();
    for (&s, &p) in starts.iter().zip(lens) {
        let pf = p as f64;
        for &(frac, amp, w) in &ECG_BUMPS {
            add_bump(&mut ecg, s + (frac * pf).round() as usize, amp, w * pf);
        }
        let onset = s + (R_FRAC * pf).round() as usize;
        r_peaks.push(onset);
        for &(frac, amp, w) in &PPG_BUMPS {
            add_bump(&mut ppg, onset + (frac * pf).round() as usize, amp, w * pf);
        }
    }
    let onsets = r_peaks.clone();
    let mut systolic = Vec::new();
    for (i, &o) in onsets.iter().enumerate() {
        let end = onsets.get(i + 1).copied().unwrap_or(o + lens[i]).min(span);
        systolic.push(o + argmax(&ppg[o..end]));
    }
    ecg.truncate(total);
    ppg.truncate(total);
    Clean {
        ppg,
        ecg,
        r_peaks,
        systolic,
        onsets,
        cycle_count: full_cycles(&starts, lens, total),
        f_true: None,
    }
}

/// Orthonormal columns spanning `first` plus random directions.
fn orthonormal_with(first: &DVector<f64>, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = first.len();
    let mut m = DMatrix::from_fn(n, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    m.set_column(0, first);
    let mut q = m.qr().q();
    if q.column(0).dot(first) < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

/// Evaluates the orthonormal inverse DCT of `coef` (length `len` grid) at the
/// fractional grid position `u`.
fn idct_at(coef: &[f64], len: usize, u: f64) -> f64 {
    let lf = len as f64;
    let theta = std::f64::consts::PI * (2.0 * u + 1.0) / (2.0 * lf);
    let two_cos = 2.0 * theta.cos();
    let mut acc = coef[0] * (1.0 / lf).sqrt();
    let scale = (2.0 / lf).sqrt();
    let (mut prev, mut cur) = (1.0, theta.cos());
    for &c in &coef[1..] {
        acc += scale * c * cur;
        let next = two_cos * cur - prev;
        prev = cur;
        cur = next;
    }
    acc
}

fn gaussian_on_grid(len: usize, bumps: &[(f64, f64, f64)]) -> Vec<f64> {
    (0..len)
        .map(|j| {
            let ph = j as f64 / (len - 1) as f64;
            bumps
                .iter()
                .map(|&(c, a, w)| a * (-0.5 * ((ph - c) / w).powi(2)).exp())
                .sum()
        })
        .collect()
}

fn z_normalize(x: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    for v in x {
        *v = (*v - mean) / sd;
    }
}

fn render_linear_dct(cfg: &SynthConfig, lens: &[usize], rng: &mut ChaCha8Rng) -> Result<Clean> {
    let len = cfg.basis_len;
    let m = cfg.coupled_coeffs;
    let band = cfg.ecg_band;
    let plan = DctPlan::new(len);

    // PPG template in the R-to-R frame: onset dip, systolic and dicrotic bumps.
    let mut ppg_t = gaussian_on_grid(len, &[(0.25, 1.0, 0.07), (0.55, 0.45, 0.09), (0.0, -0.3, 0.02)]);
    z_normalize(&mut ppg_t);
    let a = plan.forward(&ppg_t)?;
    let v0 = DVector::from_column_slice(&a[1..m]);
    let r = v0.norm();

    // ECG template in the same frame, R at both ends.
    let ecg_t = gaussian_on_grid(
        len,
        &[
            (0.0, 1.0, 0.012),
            (1.0, 1.0, 0.012),
            (0.03, -0.22, 0.01),
            (0.30, 0.25, 0.06),
            (0.85, 0.12, 0.03),
            (0.97, -0.12, 0.01),
        ],
    );
    let e = plan.forward(&ecg_t)?;
    let e_hat = DVector::from_column_slice(&e[1..=band]).normalize();

    let u = orthonormal_with(&(&v0 / r), m - 1, rng);
    let w = orthonormal_with(&e_hat, m - 1, rng);
    let q = &w * u.transpose();
    let gain = (len as f64).sqrt() / r;

    let mut f_true = DMatrix::zeros(m, band + 1);
    for i in 0..m - 1 {
        for j in 0..band {
            f_true[(1 + i, 1 + j)] = gain * q[(j, i)];
        }
    }

    let total = cfg.total_samples();
    let mut ppg = vec![0.0; total];
    let mut ecg = vec![0.0; total];
    let (mut r_peaks, mut systolic) = (Vec::new(), Vec::new());
    let mut start = 0;
    let mut cycle_count = 0;
    let perturb = Normal::new(0.0, cfg.variation).expect("validated spread");
    let mut pc = vec![0.0; len];
    pc[m..].copy_from_slice(&a[m..]);
    let mut ec = vec![0.0; band + 1];
    for &p in lens {
        let mut v = &v0 + DVector::from_fn(m - 1, |_, _| perturb.sample(rng));
        v *= r / v.norm();
        pc[1..m].copy_from_slice(v.as_slice());
        let c = &q * &v * gain;
        ec[1..].copy_from_slice(c.as_slice());

        let end = (start + p).min(total);
        let step = (len - 1) as f64 / (p - 1) as f64;
        for n in start..end {
            let pos = (n - start) as f64 * step;
            ppg[n] = idct_at(&pc, len, pos);
            ecg[n] = idct_at(&ec, len, pos);
        }
        r_peaks.push(start);
        systolic.push(start + argmax(&ppg[start..end]));
        if start + p <= total {
            cycle_count += 1;
        }
        start += p;
    }
    Ok(Clean {
        ppg,
        ecg,
        onsets: r_peaks.clone(),
        r_peaks,
        systolic,
        cycle_count,
        f_true: Some(f_true),
    })
}

/// Generates one session and its ground truth.
pub fn generate(cfg: &SynthConfig) -> Result<(Session, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let age = rng.random_range(1.0..80.0);
    let weight = rng.random_range(10.0..110.0);
    let lens = cycle_lengths(cfg, &mut rng);
    let clean = match cfg.coupling {
        Coupling::Template => render_template(cfg, &lens),
        Coupling::LinearDct => render_linear_dct(cfg, &lens, &mut rng)?,
    };
    let total = clean.ecg.len();
    let d = cfg.ppg_delay;

    let mut ppg: Vec<f64> = (0..total)
        .map(|n| if n >= d { clean.ppg[n - d] } else { clean.ppg[0] })
        .collect();
    let mut ecg = clean.ecg;
    if cfg.noise_std > 0.0 {
        let noise = Normal::new(0.0, cfg.noise_std).expect("validated noise level");
        for v in ppg.iter_mut().chain(ecg.iter_mut()) {
            *v += noise.sample(&mut rng);
        }
    }

    let shifted = |idx: &[usize]| -> Vec<usize> { idx.iter().map(|&i| i + d).filter(|&i| i < total).collect() };
    let r_peaks: Vec<usize> = clean.r_peaks.into_iter().filter(|&i| i < total).collect();
    let truth = GroundTruth {
        systolic_peaks: shifted(&clean.systolic),
        onsets: shifted(&clean.onsets),
        r_peaks: r_peaks.clone(),
        cycle_count: clean.cycle_count,
        f_true: clean.f_true,
    };

    let mut session = Session::new(TimeSeries::new(ppg, cfg.fs), TimeSeries::new(ecg, cfg.fs));
    session.age = Some(cfg.age.unwrap_or(age));
    session.weight = Some(cfg.weight.unwrap_or(weight));
    session.ecg_peaks = Some(r_peaks);
    session.ppg_peaks = Some(truth.systolic_peaks.clone());
    Ok((session, truth))
}
