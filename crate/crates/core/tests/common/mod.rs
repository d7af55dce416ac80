//! Independent oracles shared by the property and acceptance suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxdx::svm::{rbf, BinarySvm};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random binary dataset in `[-1, 1]^dim` with both labels present.
pub fn binary_dataset(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<i8>) {
    loop {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<i8> = (0..n)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        if y.contains(&1) && y.contains(&-1) {
            return (x, y);
        }
    }
}

/// Euclidean projection of `v` onto `{0 <= a <= c, y'a = 0}` by bisection
/// on the multiplier of the equality constraint.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lambda: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c))
            .collect()
    };
    let h = |lambda: f64| at(lambda).iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>();
    let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub bias: f64,
}

/// Dual SVM solution by accelerated projected gradient, with the bias taken
/// from margin multipliers (or the midpoint of the feasible interval).
pub fn qp_oracle(x: &[Vec<f64>], y: &[i8], c: f64, gamma: f64) -> QpSolution {
    let n = x.len();
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| yf[i] * yf[j] * rbf(&x[i], &x[j], gamma))
                .collect()
        })
        .collect();
    let lip = q
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| q[i].iter().zip(a).map(|(qij, aj)| qij * aj).sum::<f64>() - 1.0)
            .collect()
    };
    let mut alpha = vec![0.0; n];
    let mut z = alpha.clone();
    let mut t = 1.0f64;
    for _ in 0..50_000 {
        let g = grad(&z);
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi / lip).collect();
        let next = project(&step, &yf, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let moved: f64 = next.iter().zip(&alpha).map(|(a, b)| (a - b).abs()).sum();
        z = next
            .iter()
            .zip(&alpha)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        alpha = next;
        t = t_next;
        if moved < 1e-14 {
            break;
        }
    }
    let g = grad(&alpha);
    let objective = -0.5
        * alpha
            .iter()
            .zip(&g)
            .map(|(a, gi)| a * (gi - 1.0))
            .sum::<f64>();

    let eps = 1e-7 * c.max(1.0);
    let free: Vec<usize> = (0..n)
        .filter(|&i| alpha[i] > eps && alpha[i] < c - eps)
        .collect();
    let rho = if free.is_empty() {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let yg = yf[i] * g[i];
            let at_upper = alpha[i] >= c - eps;
            if (at_upper && yf[i] < 0.0) || (!at_upper && yf[i] > 0.0) {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        }
        0.5 * (ub + lb)
    } else {
        free.iter().map(|&i| yf[i] * g[i]).sum::<f64>() / free.len() as f64
    };
    QpSolution {
        alpha,
        objective,
        bias: -rho,
    }
}

pub fn oracle_decision(
    x: &[Vec<f64>],
    y: &[i8],
    sol: &QpSolution,
    gamma: f64,
    point: &[f64],
) -> f64 {
    x.iter()
        .zip(y)
        .zip(&sol.alpha)
        .map(|((xi, &yi), a)| a * yi as f64 * rbf(xi, point, gamma))
        .sum::<f64>()
        + sol.bias
}

/// Box, equality and three-branch KKT conditions of a trained machine on
/// its own training rows. Returns the first violation found.
pub fn check_kkt(svm: &BinarySvm, x: &[Vec<f64>], y: &[i8], tol: f64) -> Result<(), String> {
    let c = svm.c();
    let alpha = svm.alphas(x.len());
    if let Some(a) = alpha.iter().find(|&&a| !(0.0..=c).contains(&a)) {
        return Err(format!("alpha {a} outside [0, {c}]"));
    }
    let balance: f64 = alpha.iter().zip(y).map(|(a, &yi)| a * yi as f64).sum();
    if balance.abs() > 1e-6 {
        return Err(format!("sum alpha*y = {balance:e}"));
    }
    for (i, (&a, &yi)) in alpha.iter().zip(y).enumerate() {
        let margin = yi as f64 * svm.decision(&x[i]);
        let ok = if a == 0.0 {
            margin >= 1.0 - tol
        } else if a == c {
            margin <= 1.0 + tol
        } else {
            (margin - 1.0).abs() <= tol
        };
        if !ok {
            return Err(format!("row {i}: alpha {a}, y*f = {margin}"));
        }
    }
    Ok(())
}

/// Coefficients in `[-1, 1]` for a polynomial of exactly `degree`.
pub fn random_poly(rng: &mut ChaCha8Rng, degree: usize) -> Vec<f64> {
    (0..=degree).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn poly_eval(coef: &[f64], t: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

pub fn poly_deriv(coef: &[f64], t: f64) -> f64 {
    coef.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c)
}
