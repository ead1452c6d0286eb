//! Damped least squares (Levenberg-Marquardt).
//!
//! Each step solves `(JᵀJ + λ·diag(JᵀJ))h = −Jᵀr` and updates `λ` from the gain
//! ratio between the actual and the linearly predicted cost reduction.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub trait LeastSquaresProblem {
    fn n_params(&self) -> usize;
    /// Weighted residuals `r_i(p)`.
    fn residuals(&self, p: &[f64]) -> Vec<f64>;
    /// `∂r_i/∂p_j`.
    fn jacobian(&self, p: &[f64]) -> DMatrix<f64>;
    /// Projects a trial point onto the feasible set.
    fn project(&self, _p: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative parameter-step tolerance.
    pub xtol: f64,
    /// Tolerance on the largest cosine between `r` and a Jacobian column, with
    /// `|r|` floored at 1.
    pub gtol: f64,
    /// Relative cost-reduction tolerance.
    pub ftol: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            xtol: 1e-10,
            gtol: 1e-10,
            ftol: 1e-15,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// `(JᵀJ)⁻¹` at the solution.
    pub covariance: DMatrix<f64>,
    /// `Σ r_i²`.
    pub chi2: f64,
    /// Largest cosine between the residual vector and a Jacobian column.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>()
}

fn scaled_gradient(j: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    // Residuals are σ-weighted, so unit norm is the natural floor.
    let rn = r.norm().max(1.0);
    let g = j.transpose() * r;
    (0..j.ncols())
        .map(|c| {
            let cn = j.column(c).norm();
            if cn == 0.0 {
                0.0
            } else {
                g[c].abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

/// Minimizes `Σ r_i(p)²` from `p0`. Fails only on a rank-deficient Jacobian;
/// exhausting the iteration budget yields `converged = false`.
pub fn levenberg_marquardt<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    p0: &[f64],
    options: &LmOptions,
) -> Result<LmReport> {
    let n = problem.n_params();
    if p0.len() != n {
        return Err(Error::FitInput(format!("{} start values for {n} parameters", p0.len())));
    }
    let mut p = p0.to_vec();
    problem.project(&mut p);
    let mut r = DVector::from_vec(problem.residuals(&p));
    if r.len() < n {
        return Err(Error::FitInput(format!("{} residuals for {n} parameters", r.len())));
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::FitInput("non-finite residual at the start point".into()));
    }
    let mut f = cost(r.as_slice());
    let mut j = problem.jacobian(&p);
    let mut a = j.transpose() * &j;
    let mut g = j.transpose() * &r;
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    if max_diag == 0.0 {
        return Err(Error::RankDeficient);
    }
    let mut lambda = options.initial_damping;
    let mut nu = 2.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        if scaled_gradient(&j, &r) <= options.gtol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut damped = a.clone();
        for i in 0..n {
            damped[(i, i)] += lambda * a[(i, i)].max(1e-12 * max_diag);
        }
        let h = match damped.cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => {
                lambda *= nu;
                nu *= 2.0;
                continue;
            }
        };
        let mut trial: Vec<f64> = p.iter().zip(h.iter()).map(|(x, d)| x + d).collect();
        problem.project(&mut trial);
        let step = DVector::from_iterator(n, trial.iter().zip(&p).map(|(a, b)| a - b));
        let pnorm = DVector::from_column_slice(&p).norm();
        if step.norm() <= options.xtol * (pnorm + options.xtol) {
            converged = true;
            break;
        }
        let r_new = DVector::from_vec(problem.residuals(&trial));
        let f_new = cost(r_new.as_slice());
        // Reduction of Σr² predicted by the linearized model.
        let predicted = -(2.0 * step.dot(&g) + step.dot(&(&a * &step)));
        let rho = if predicted > 0.0 && f_new.is_finite() {
            (f - f_new) / predicted
        } else {
            -1.0
        };
        if rho > 0.0 {
            let rel = (f - f_new) / f.max(f64::MIN_POSITIVE);
            p = trial;
            r = r_new;
            f = f_new;
            j = problem.jacobian(&p);
            a = j.transpose() * &j;
            g = j.transpose() * &r;
            lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            if rel <= options.ftol {
                converged = true;
                break;
            }
        } else {
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e30 {
                break;
            }
        }
    }

    let gradient_norm = scaled_gradient(&j, &r);
    let covariance = invert_normal(&a)?;
    Ok(LmReport {
        params: p,
        covariance,
        chi2: f,
        gradient_norm,
        iterations,
        converged: converged && gradient_norm <= options.gtol.max(1e-6),
    })
}

fn invert_normal(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let d: Vec<f64> = (0..n).map(|i| a[(i, i)].sqrt()).collect();
    if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::RankDeficient);
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (d[i] * d[j]));
    let sv = scaled.clone().svd(false, false).singular_values;
    let (max, min) = sv.iter().fold((0.0f64, f64::INFINITY), |(mx, mn), &s| (mx.max(s), mn.min(s)));
    if !(min > max * 1e-13) {
        return Err(Error::RankDeficient);
    }
    let inv = scaled.try_inverse().ok_or(Error::RankDeficient)?;
    let cov = DMatrix::from_fn(n, n, |i, j| inv[(i, j)] / (d[i] * d[j]));
    Ok((&cov + cov.transpose()) * 0.5)
}

/// Black-box residuals with a central-difference Jacobian.
pub struct NumericProblem<F: Fn(&[f64]) -> Vec<f64>> {
    pub n_params: usize,
    pub residuals: F,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl<F: Fn(&[f64]) -> Vec<f64>> LeastSquaresProblem for NumericProblem<F> {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn residuals(&self, p: &[f64]) -> Vec<f64> {
        (self.residuals)(p)
    }

    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        central_difference(|q| (self.residuals)(q), p)
    }

    fn project(&self, p: &mut [f64]) {
        for (i, x) in p.iter_mut().enumerate() {
            *x = x.clamp(self.lower[i], self.upper[i]);
        }
    }
}

/// Central-difference Jacobian with steps `1e-6·max(|p|, 1e-3)`.
pub fn central_difference<F: Fn(&[f64]) -> Vec<f64>>(f: F, p: &[f64]) -> DMatrix<f64> {
    let m = f(p).len();
    let mut jac = DMatrix::zeros(m, p.len());
    for c in 0..p.len() {
        let h = 1e-6 * p[c].abs().max(1e-3);
        let mut up = p.to_vec();
        let mut dn = p.to_vec();
        up[c] += h;
        dn[c] -= h;
        let (ru, rd) = (f(&up), f(&dn));
        for i in 0..m {
            jac[(i, c)] = (ru[i] - rd[i]) / (2.0 * h);
        }
    }
    jac
}
