//! Savitzky-Golay convolution weights and delta features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::MfccMatrix;

/// Least-squares polynomial smoothing/differentiation kernel.
///
/// Convolving a window `f[n-M..=n+M]` with `weights` yields the `deriv_order`-th
/// derivative at `n` of the degree-`poly_order` polynomial that best fits the
/// window in the least-squares sense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgFilter {
    pub half_width: usize,
    pub poly_order: usize,
    pub deriv_order: usize,
    /// Weights for offsets `-M..=M`, in that order.
    pub weights: Vec<f64>,
}

impl SgFilter {
    /// Apply at an interior index of `signal`; `None` if the window leaves it.
    pub fn apply_at(&self, signal: &[f64], center: usize) -> Option<f64> {
        let m = self.half_width;
        if center < m || center + m >= signal.len() {
            return None;
        }
        Some(
            self.weights
                .iter()
                .zip(&signal[center - m..=center + m])
                .map(|(w, v)| w * v)
                .sum(),
        )
    }
}

/// Solve `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Closed-form Savitzky-Golay weights for half width `m`, polynomial order
/// `p` and derivative order `deriv`. Requires `m >= 1` and `2m+1 > p >= deriv`.
pub fn sg_filter(m: usize, p: usize, deriv: usize) -> Result<SgFilter> {
    if m == 0 {
        return Err(Error::arg("Savitzky-Golay half width must be positive"));
    }
    if p > 2 * m || deriv > p {
        return Err(Error::arg(format!(
            "Savitzky-Golay needs 2M+1 > p >= deriv, got M={m}, p={p}, deriv={deriv}"
        )));
    }
    // Abscissae scaled to [-1, 1] keep the normal equations well conditioned.
    let xs: Vec<f64> = (-(m as i64)..=m as i64)
        .map(|i| i as f64 / m as f64)
        .collect();
    let powers: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| {
            (0..=p)
                .scan(1.0, |acc, _| {
                    let v = *acc;
                    *acc *= x;
                    Some(v)
                })
                .collect()
        })
        .collect();
    let normal: Vec<Vec<f64>> = (0..=p)
        .map(|i| {
            (0..=p)
                .map(|j| powers.iter().map(|r| r[i] * r[j]).sum())
                .collect()
        })
        .collect();
    let mut unit = vec![0.0; p + 1];
    unit[deriv] = 1.0;
    let c = solve(normal, unit).ok_or_else(|| Error::arg("singular Savitzky-Golay system"))?;

    let factorial: f64 = (1..=deriv).map(|k| k as f64).product();
    let scale = factorial / (m as f64).powi(deriv as i32);
    let mut weights: Vec<f64> = powers
        .iter()
        .map(|r| scale * r.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    // Even derivatives have symmetric kernels, odd ones antisymmetric.
    let sign = if deriv.is_multiple_of(2) { 1.0 } else { -1.0 };
    for j in 1..=m {
        let v = 0.5 * (weights[m + j] + sign * weights[m - j]);
        weights[m + j] = v;
        weights[m - j] = sign * v;
    }
    if deriv % 2 == 1 {
        weights[m] = 0.0;
    }
    Ok(SgFilter {
        half_width: m,
        poly_order: p,
        deriv_order: deriv,
        weights,
    })
}

/// First temporal derivative of each row, estimated with a width-`width`
/// Savitzky-Golay filter of order `p`. Edges replicate the nearest frame.
///
/// The kernel is antisymmetric, so it is applied as `sum_j w_j (f[n+j] - f[n-j])`;
/// constant rows therefore give exactly zero.
pub fn delta(mat: &MfccMatrix, width: usize, p: usize) -> Result<MfccMatrix> {
    if width < 3 || width.is_multiple_of(2) {
        return Err(Error::arg(format!(
            "delta width must be odd and >= 3, got {width}"
        )));
    }
    if p == 0 {
        return Err(Error::arg("delta polynomial order must be at least 1"));
    }
    let m = (width - 1) / 2;
    let filter = sg_filter(m, p, 1)?;
    let rows = mat
        .rows()
        .iter()
        .map(|row| {
            let n = row.len();
            let mut padded = Vec::with_capacity(n + 2 * m);
            padded.extend(std::iter::repeat_n(row[0], m));
            padded.extend_from_slice(row);
            padded.extend(std::iter::repeat_n(row[n - 1], m));
            (0..n)
                .map(|t| {
                    let c = t + m;
                    (1..=m)
                        .map(|j| filter.weights[m + j] * (padded[c + j] - padded[c - j]))
                        .sum()
                })
                .collect()
        })
        .collect();
    MfccMatrix::from_rows(rows)
}
