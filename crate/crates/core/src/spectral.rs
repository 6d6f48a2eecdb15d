//! Orthonormal DCT-II analysis and synthesis, plus coefficient truncation
//! and zero-padding.
//!
//! The basis is stored explicitly as an L x L matrix `B` with
//! `B[k][n] = s(k) cos(pi (2n + 1) k / (2L))`, `s(0) = sqrt(1/L)`,
//! `s(k) = sqrt(2/L)`. Forward is `B x`, inverse is `B^T X`. At L = 300 the
//! direct product is cheap enough that a fast transform is not needed.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Precomputed orthonormal DCT-II basis for one transform length.
#[derive(Debug, Clone)]
pub struct DctPlan {
    len: usize,
    basis: DMatrix<f64>,
}

impl DctPlan {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "DCT length must be positive");
        let l = len as f64;
        let basis = DMatrix::from_fn(len, len, |k, n| {
            let scale = if k == 0 { (1.0 / l).sqrt() } else { (2.0 / l).sqrt() };
            scale * (PI * (2 * n + 1) as f64 * k as f64 / (2.0 * l)).cos()
        });
        Self { len, basis }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Rows are basis vectors.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn forward(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check(row.len())?;
        let x = DVector::from_column_slice(row);
        Ok((&self.basis * x).as_slice().to_vec())
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check(coeffs.len())?;
        let c = DVector::from_column_slice(coeffs);
        Ok((self.basis.tr_mul(&c)).as_slice().to_vec())
    }

    /// Transforms every row of an N x L matrix.
    pub fn forward_rows(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(m.ncols())?;
        Ok(m * self.basis.transpose())
    }

    /// Inverse-transforms every row of an N x L matrix.
    pub fn inverse_rows(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(m.ncols())?;
        Ok(m * &self.basis)
    }

    fn check(&self, actual: usize) -> Result<()> {
        if actual != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual,
            });
        }
        Ok(())
    }
}

/// Keeps the first `m` columns.
pub fn truncate(coeffs: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    let len = coeffs.ncols();
    if m == 0 || m > len {
        return Err(Error::BadCount { count: m, len });
    }
    Ok(coeffs.columns(0, m).into_owned())
}

/// Extends each row to `len` columns with trailing zeros.
pub fn zero_pad(coeffs: &DMatrix<f64>, len: usize) -> Result<DMatrix<f64>> {
    let m = coeffs.ncols();
    if m == 0 || m > len {
        return Err(Error::BadCount { count: m, len });
    }
    let mut out = DMatrix::zeros(coeffs.nrows(), len);
    out.columns_mut(0, m).copy_from(coeffs);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Direct summation, independent of the stored basis.
    fn dct_by_sum(x: &[f64]) -> Vec<f64> {
        let l = x.len() as f64;
        (0..x.len())
            .map(|k| {
                let s = if k == 0 { (1.0 / l).sqrt() } else { (2.0 / l).sqrt() };
                s * x
                    .iter()
                    .enumerate()
                    .map(|(n, v)| v * (PI * (2.0 * n as f64 + 1.0) * k as f64 / (2.0 * l)).cos())
                    .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn constant_maps_to_dc() {
        let l = 300;
        let plan = DctPlan::new(l);
        let c = 2.5;
        let out = plan.forward(&vec![c; l]).unwrap();
        assert!((out[0] - c * (l as f64).sqrt()).abs() < 1e-10);
        assert!(out[1..].iter().all(|v| v.abs() < 1e-10));

        let mut coeffs = vec![0.0; l];
        coeffs[0] = c * (l as f64).sqrt();
        let back = plan.inverse(&coeffs).unwrap();
        assert!(back.iter().all(|v| (v - c).abs() < 1e-10));
    }

    #[test]
    fn single_cosine_lands_in_one_bin() {
        let l = 64;
        let x: Vec<f64> = (0..l)
            .map(|n| (PI * (2 * n + 1) as f64 * 3.0 / (2.0 * l as f64)).cos())
            .collect();
        let oracle = dct_by_sum(&x);
        let out = DctPlan::new(l).forward(&x).unwrap();
        for k in 0..l {
            assert!((out[k] - oracle[k]).abs() < 1e-10);
            if k != 3 {
                assert!(out[k].abs() < 1e-10, "leak at {k}: {}", out[k]);
            }
        }
        assert!(out[3].abs() > 1.0);
    }

    #[test]
    fn basis_is_orthonormal() {
        for l in [1, 2, 7, 32, 64] {
            let b = DctPlan::new(l).basis().clone();
            let err = (b.transpose() * &b - DMatrix::identity(l, l)).amax();
            assert!(err < 1e-10, "L={l}: {err}");
        }
    }

    #[test]
    fn inverse_matches_transpose_oracle() {
        let l = 48;
        let plan = DctPlan::new(l);
        let c: Vec<f64> = (0..l).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        // x[n] = sum_k s(k) cos(...) c[k], summed directly.
        let lf = l as f64;
        let oracle: Vec<f64> = (0..l)
            .map(|n| {
                (0..l)
                    .map(|k| {
                        let s = if k == 0 { (1.0 / lf).sqrt() } else { (2.0 / lf).sqrt() };
                        s * (PI * (2 * n + 1) as f64 * k as f64 / (2.0 * lf)).cos() * c[k]
                    })
                    .sum()
            })
            .collect();
        let out = plan.inverse(&c).unwrap();
        for (a, b) in out.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let plan = DctPlan::new(8);
        assert!(matches!(plan.forward(&[0.0; 7]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(
            plan.forward_rows(&DMatrix::zeros(2, 9)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn truncate_and_pad_edges() {
        let a = DMatrix::from_fn(3, 5, |i, j| (i * 5 + j) as f64);
        assert_eq!(truncate(&a, 5).unwrap(), a);
        assert_eq!(truncate(&a, 1).unwrap(), a.columns(0, 1).into_owned());
        assert_eq!(zero_pad(&truncate(&a, 5).unwrap(), 5).unwrap(), a);
        assert!(matches!(truncate(&a, 0), Err(Error::BadCount { .. })));
        assert!(matches!(truncate(&a, 6), Err(Error::BadCount { .. })));
        assert!(matches!(zero_pad(&a, 4), Err(Error::BadCount { .. })));

        let p = zero_pad(&truncate(&a, 2).unwrap(), 5).unwrap();
        assert!(p.columns(2, 3).iter().all(|&v| v == 0.0));
        assert_eq!(p.columns(0, 2), a.columns(0, 2));
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(x in prop::collection::vec(-1e3f64..1e3, 1..80)) {
            let plan = DctPlan::new(x.len());
            let c = plan.forward(&x).unwrap();
            let back = plan.inverse(&c).unwrap();
            let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nc: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = nx.max(1e-300);
            prop_assert!((nx - nc).abs() <= 1e-10 * scale + 1e-300);
            let err: f64 = x.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-10 * scale + 1e-300);
        }

        #[test]
        fn truncation_error_non_increasing(x in prop::collection::vec(-10f64..10.0, 2..40)) {
            let l = x.len();
            let plan = DctPlan::new(l);
            let row = DMatrix::from_row_slice(1, l, &x);
            let full = plan.forward_rows(&row).unwrap();
            let mut prev = f64::INFINITY;
            for m in 1..=l {
                let rec = plan.inverse_rows(&zero_pad(&truncate(&full, m).unwrap(), l).unwrap()).unwrap();
                let err = (&rec - &row).norm();
                prop_assert!(err <= prev + 1e-9);
                prop_assert!(zero_pad(&truncate(&full, m).unwrap(), l).unwrap().norm() <= full.norm() + 1e-12);
                prev = err;
            }
        }

        #[test]
        fn pad_then_truncate_is_identity(rows in 1usize..5, m in 1usize..10, extra in 0usize..6, seed in any::<u64>()) {
            let a = DMatrix::from_fn(rows, m, |i, j| ((seed.wrapping_add((i * 31 + j) as u64) % 1000) as f64) / 7.0);
            let padded = zero_pad(&a, m + extra).unwrap();
            prop_assert_eq!(truncate(&padded, m).unwrap(), a);
        }
    }
}
