//! Smoothness-prior detrending.
//!
//! The trend minimizes `||x - t||^2 + lambda ||D2 t||^2`, where `D2` is the
//! interior second-difference stencil `[1, -2, 1]` (first and last rows of
//! the T x T operator are zero, so constants and ramps are in its null
//! space). The normal equations `(I + lambda D2^T D2) t = x` are pentadiagonal
//! and symmetric positive definite; they are solved with a banded Cholesky
//! factorization in O(T).

use crate::error::{Error, Result};
use crate::signal::TimeSeries;

pub const DEFAULT_LAMBDA: f64 = 500.0;

/// Symmetric pentadiagonal matrix stored by its three distinct diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricPentadiagonal {
    pub diag: Vec<f64>,
    /// `A[i+1][i]`, length n-1.
    pub sub1: Vec<f64>,
    /// `A[i+2][i]`, length n-2.
    pub sub2: Vec<f64>,
}

impl SymmetricPentadiagonal {
    /// `I + lambda D2^T D2` for a signal of length `n >= 3`.
    pub fn smoothness_system(n: usize, lambda: f64) -> Self {
        let mut diag = vec![1.0; n];
        let mut sub1 = vec![0.0; n.saturating_sub(1)];
        let mut sub2 = vec![0.0; n.saturating_sub(2)];
        const STENCIL: [f64; 3] = [1.0, -2.0, 1.0];
        // Accumulate lambda * d_r d_r^T for each interior row r.
        for r in 0..n.saturating_sub(2) {
            for a in 0..3 {
                diag[r + a] += lambda * STENCIL[a] * STENCIL[a];
                for b in (a + 1)..3 {
                    let v = lambda * STENCIL[a] * STENCIL[b];
                    match b - a {
                        1 => sub1[r + a] += v,
                        _ => sub2[r + a] += v,
                    }
                }
            }
        }
        Self { diag, sub1, sub2 }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.sub1[i] * x[i + 1];
            y[i + 1] += self.sub1[i] * x[i];
        }
        for i in 0..n.saturating_sub(2) {
            y[i] += self.sub2[i] * x[i + 2];
            y[i + 2] += self.sub2[i] * x[i];
        }
        y
    }

    /// Solves `A x = b` by banded Cholesky. Returns `None` if a pivot is not
    /// positive.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.len();
        assert_eq!(b.len(), n);
        // Factor A = C C^T with C lower triangular, bandwidth 2.
        let mut c0 = vec![0.0; n];
        let mut c1 = vec![0.0; n.saturating_sub(1)];
        let mut c2 = vec![0.0; n.saturating_sub(2)];
        for i in 0..n {
            let mut pivot = self.diag[i];
            if i >= 2 {
                c2[i - 2] = self.sub2[i - 2] / c0[i - 2];
                pivot -= c2[i - 2] * c2[i - 2];
            }
            if i >= 1 {
                let mut v = self.sub1[i - 1];
                if i >= 2 {
                    v -= c2[i - 2] * c1[i - 2];
                }
                c1[i - 1] = v / c0[i - 1];
                pivot -= c1[i - 1] * c1[i - 1];
            }
            if !(pivot > 0.0) {
                return None;
            }
            c0[i] = pivot.sqrt();
        }

        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut v = b[i];
            if i >= 1 {
                v -= c1[i - 1] * z[i - 1];
            }
            if i >= 2 {
                v -= c2[i - 2] * z[i - 2];
            }
            z[i] = v / c0[i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = z[i];
            if i + 1 < n {
                v -= c1[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= c2[i] * x[i + 2];
            }
            x[i] = v / c0[i];
        }
        Some(x)
    }
}

/// Smooth trend of `samples` under the second-difference prior.
pub fn trend(samples: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if samples.len() < 3 {
        return Err(Error::SignalTooShort {
            len: samples.len(),
            min: 3,
        });
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "detrend lambda must be positive, got {lambda}"
        )));
    }
    let system = SymmetricPentadiagonal::smoothness_system(samples.len(), lambda);
    // Pivots are at least 1 for this system, so factorization cannot fail.
    Ok(system
        .solve(samples)
        .expect("I + lambda D2'D2 is positive definite"))
}

/// Returns `x - trend(x)`.
pub fn detrend(ts: &TimeSeries, lambda: f64) -> Result<TimeSeries> {
    let t = trend(&ts.samples, lambda)?;
    let samples = ts.samples.iter().zip(&t).map(|(x, t)| x - t).collect();
    Ok(TimeSeries::new(samples, ts.fs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Builds the T x T operator with zero boundary rows and solves densely.
    fn dense_trend(x: &[f64], lambda: f64) -> Vec<f64> {
        let n = x.len();
        let mut d2 = DMatrix::<f64>::zeros(n, n);
        for r in 1..n - 1 {
            d2[(r, r - 1)] = 1.0;
            d2[(r, r)] = -2.0;
            d2[(r, r + 1)] = 1.0;
        }
        let a = DMatrix::<f64>::identity(n, n) + lambda * d2.transpose() * &d2;
        let sol = a.lu().solve(&DVector::from_column_slice(x)).unwrap();
        sol.as_slice().to_vec()
    }

    fn ts(v: Vec<f64>) -> TimeSeries {
        TimeSeries::new(v, 300.0)
    }

    #[test]
    fn small_system_diagonals() {
        let a = SymmetricPentadiagonal::smoothness_system(5, 1.0);
        assert_eq!(a.diag, vec![2.0, 6.0, 7.0, 6.0, 2.0]);
        assert_eq!(a.sub1, vec![-2.0, -4.0, -4.0, -2.0]);
        assert_eq!(a.sub2, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn constant_is_removed_entirely() {
        let out = detrend(&ts(vec![3.7; 500]), DEFAULT_LAMBDA).unwrap();
        assert!(out.samples.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn ramp_is_removed() {
        let x: Vec<f64> = (0..2000).map(|n| 0.03 * n as f64 - 4.0).collect();
        let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let out = detrend(&ts(x), DEFAULT_LAMBDA).unwrap();
        let worst = out.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-6 * max, "{worst}");
    }

    #[test]
    fn residual_of_banded_solve() {
        let x: Vec<f64> = (0..5000)
            .map(|n| (n as f64 * 0.01).sin() + 0.2 * (n as f64 * 0.37).cos())
            .collect();
        for lambda in [1.0, 500.0, 1e8] {
            let a = SymmetricPentadiagonal::smoothness_system(x.len(), lambda);
            let t = a.solve(&x).unwrap();
            let r: Vec<f64> = a.mul_vec(&t).iter().zip(&x).map(|(p, q)| p - q).collect();
            // Normwise backward error; the infinity norm of A is 1 + 16 lambda.
            let backward = norm(&r) / ((1.0 + 16.0 * lambda) * norm(&t) + norm(&x));
            assert!(backward < 1e-14, "lambda {lambda}: {backward}");
        }
    }

    #[test]
    fn matches_dense_solve() {
        for n in [3usize, 4, 5, 17, 200] {
            let x: Vec<f64> = (0..n)
                .map(|i| ((i * 7919) % 101) as f64 / 10.0 + 0.05 * i as f64)
                .collect();
            for lambda in [0.5, 500.0, 1e4] {
                let banded = trend(&x, lambda).unwrap();
                let dense = dense_trend(&x, lambda);
                let diff: Vec<f64> = banded.iter().zip(&dense).map(|(a, b)| a - b).collect();
                assert!(norm(&diff) <= 1e-10 * norm(&dense), "n={n} lambda={lambda}");
            }
        }
    }

    #[test]
    fn too_short_or_bad_lambda() {
        assert!(matches!(
            detrend(&ts(vec![1.0, 2.0]), 1.0),
            Err(Error::SignalTooShort { len: 2, min: 3 })
        ));
        assert!(matches!(detrend(&ts(vec![1.0; 5]), 0.0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn detrend_is_nearly_idempotent_on_trend_dominated_signal() {
        // Strong slow drift plus a weak fast oscillation.
        let n = 6000;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64;
                5.0 * (t / 3000.0).sin() + 2e-4 * t * t / n as f64 + 0.3 * (t * 1.3).sin()
            })
            .collect();
        let once = detrend(&ts(x), DEFAULT_LAMBDA).unwrap();
        let twice = detrend(&once, DEFAULT_LAMBDA).unwrap();
        let diff: Vec<f64> = twice.samples.iter().zip(&once.samples).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) <= 0.01 * norm(&once.samples));
    }

    proptest! {
        #[test]
        fn detrend_is_linear(
            x in prop::collection::vec(-5f64..5.0, 3..120),
            a in -3f64..3.0,
            b in -3f64..3.0,
            seed in 0u64..1000,
        ) {
            let y: Vec<f64> = (0..x.len()).map(|i| (((i as u64 + seed) * 2654435761) % 1000) as f64 / 100.0).collect();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = detrend(&ts(combo), 500.0).unwrap().samples;
            let dx = detrend(&ts(x.clone()), 500.0).unwrap().samples;
            let dy = detrend(&ts(y), 500.0).unwrap().samples;
            let rhs: Vec<f64> = dx.iter().zip(&dy).map(|(p, q)| a * p + b * q).collect();
            let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(p, q)| p - q).collect();
            let scale = norm(&rhs).max(norm(&lhs)).max(1e-12);
            prop_assert!(norm(&diff) <= 1e-8 * scale + 1e-12);
        }
    }
}
