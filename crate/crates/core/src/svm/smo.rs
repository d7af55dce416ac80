//! Soft-margin binary SVM trained by sequential minimal optimization.
//!
//! Solves `min 1/2 a'Qa - e'a` s.t. `0 <= a <= C`, `y'a = 0`, with
//! `Q_ij = y_i y_j K(x_i, x_j)`. Each iteration picks the maximal violating
//! pair and solves the two-variable subproblem in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{rbf, SvmParams};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    gamma: f64,
    bias: f64,
    support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    dual_coefs: Vec<f64>,
    /// Training-row index of each support vector.
    support_indices: Vec<usize>,
    c: f64,
    dual_objective: f64,
    iterations: usize,
}

impl BinarySvm {
    /// Signed decision value `sum a_i y_i K(x_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, &coef)| coef * rbf(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.decision(x) > 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    pub fn dual_coefs(&self) -> &[f64] {
        &self.dual_coefs
    }

    pub fn support_indices(&self) -> &[usize] {
        &self.support_indices
    }

    /// Multipliers for every training row (zero for non-support vectors).
    pub fn alphas(&self, n_train: usize) -> Vec<f64> {
        let mut a = vec![0.0; n_train];
        for (&i, &coef) in self.support_indices.iter().zip(&self.dual_coefs) {
            a[i] = coef.abs();
        }
        a
    }

    /// Dual objective `sum a - 1/2 a'Qa` at the solution.
    pub fn dual_objective(&self) -> f64 {
        self.dual_objective
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

/// Train on rows `x` with labels `y` in {-1, +1}.
pub fn smo_train(x: &[Vec<f64>], y: &[i8], params: &SvmParams) -> Result<BinarySvm> {
    params.validate()?;
    let n = x.len();
    if n != y.len() {
        return Err(Error::arg(format!("{n} rows but {} labels", y.len())));
    }
    if n < 2 {
        return Err(Error::arg("SMO needs at least two samples"));
    }
    if y.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::arg("binary SVM labels must be -1 or +1"));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::arg("binary SVM needs both classes present"));
    }
    let c = params.c;
    let gamma = params.gamma;
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();

    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = rbf(&x[i], &x[i], gamma);
        for j in 0..i {
            let k = rbf(&x[i], &x[j], gamma);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }
    let q = |i: usize, j: usize| yf[i] * yf[j] * kernel[i * n + j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -yf[t] * grad[t];
            if in_up(alpha[t], yf[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], yf[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < params.tol {
            break;
        }
        if iterations >= params.max_iter {
            return Err(Error::Convergence { iterations, gap });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if yf[i] != yf[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    // Bias from free multipliers, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = yf[t] * grad[t];
        if alpha[t] >= c {
            if yf[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if yf[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    // sum a - 1/2 a'Qa, written through the gradient G = Qa - e
    let dual_objective = -0.5
        * alpha
            .iter()
            .zip(&grad)
            .map(|(a, g)| a * (g - 1.0))
            .sum::<f64>();

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    let mut support_indices = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(x[t].clone());
            dual_coefs.push(alpha[t] * yf[t]);
            support_indices.push(t);
        }
    }
    Ok(BinarySvm {
        gamma,
        bias: -rho,
        support_vectors,
        dual_coefs,
        support_indices,
        c,
        dual_objective,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: f64, gamma: f64) -> SvmParams {
        SvmParams {
            c,
            gamma,
            ..SvmParams::default()
        }
    }

    #[test]
    fn two_point_problem_matches_grid_oracle() {
        let x = vec![vec![0.0], vec![1.0]];
        let m = smo_train(&x, &[-1, 1], &params(1e6, 1.0)).unwrap();
        let a = m.alphas(2);
        assert!((a[0] - a[1]).abs() < 1e-9);
        // brute force over a1 = a2 = s: D(s) = 2s - s^2 (1 - e^-1)
        let k = (-1.0f64).exp();
        let (best_s, _) = (0..=400_000)
            .map(|i| i as f64 * 1e-5)
            .map(|s| (s, 2.0 * s - s * s * (1.0 - k)))
            .fold(
                (0.0, f64::NEG_INFINITY),
                |acc, v| if v.1 > acc.1 { v } else { acc },
            );
        assert!((a[0] - best_s).abs() < 2e-3, "{} vs {best_s}", a[0]);
        assert_eq!(m.predict(&[0.0]), -1);
        assert_eq!(m.predict(&[1.0]), 1);
    }

    #[test]
    fn rejects_single_class_and_bad_labels() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            smo_train(&x, &[1, 1], &params(1.0, 1.0)),
            Err(Error::Argument(_))
        ));
        assert!(smo_train(&x, &[1, 0], &params(1.0, 1.0)).is_err());
        assert!(smo_train(&x[..1], &[1], &params(1.0, 1.0)).is_err());
    }

    #[test]
    fn iteration_guard_reports_gap() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1]).collect();
        let y: Vec<i8> = (0..20).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let p = SvmParams {
            max_iter: 1,
            ..params(10.0, 1.0)
        };
        match smo_train(&x, &y, &p) {
            Err(Error::Convergence { iterations, gap }) => {
                assert_eq!(iterations, 1);
                assert!(gap > 0.0);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn feasibility_holds() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()])
            .collect();
        let y: Vec<i8> = (0..30)
            .map(|i| if (i * 7) % 5 < 2 { 1 } else { -1 })
            .collect();
        let m = smo_train(&x, &y, &params(2.0, 0.5)).unwrap();
        let s: f64 = m.dual_coefs().iter().sum();
        assert!(s.abs() < 1e-6);
        assert!(m.alphas(30).iter().all(|&a| (0.0..=2.0).contains(&a)));
    }
}
