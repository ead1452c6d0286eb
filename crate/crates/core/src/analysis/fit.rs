//! Sinusoid and stretched-exponential fits on top of the LM engine.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::lm::{levenberg_marquardt, LeastSquaresProblem, LmOptions, LmReport};
use crate::{Error, Result};

/// Signal versus field amplitude for one sensing time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetometryCurve {
    pub b_gauss: Vec<f64>,
    pub signal: Vec<f64>,
    pub sigma: Vec<f64>,
    pub tau_s: f64,
    pub spins: usize,
}

impl MagnetometryCurve {
    pub fn validate(&self) -> Result<()> {
        let n = self.b_gauss.len();
        if self.signal.len() != n || self.sigma.len() != n {
            return Err(Error::FitInput("grids differ in length".into()));
        }
        if self.sigma.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::FitInput("σ must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub errors: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub residual_norm: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.params[i])
    }

    pub fn error(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.errors[i])
    }

    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence(self.iterations))
        }
    }

    /// Builds a result in physical units from a report in internal units,
    /// where physical `p_i = scale_i · internal_i`.
    fn from_report(names: &[&str], report: &LmReport, scale: &[f64]) -> Self {
        let n = names.len();
        let params: Vec<f64> = (0..n).map(|i| report.params[i] * scale[i]).collect();
        let covariance: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| report.covariance[(i, j)] * scale[i] * scale[j])
                    .collect()
            })
            .collect();
        let errors = (0..n).map(|i| covariance[i][i].max(0.0).sqrt()).collect();
        FitResult {
            names: names.iter().map(|s| s.to_string()).collect(),
            params,
            errors,
            covariance,
            chi2: report.chi2,
            residual_norm: report.chi2.sqrt(),
            gradient_norm: report.gradient_norm,
            iterations: report.iterations,
            converged: report.converged,
        }
    }
}

/// `S(x) = α·sin(ν·x + φ) + c` on a rescaled abscissa `x = b / scale`.
#[derive(Debug, Clone)]
pub struct SinusoidProblem {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl LeastSquaresProblem for SinusoidProblem {
    fn n_params(&self) -> usize {
        4
    }

    fn residuals(&self, p: &[f64]) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.y)
            .zip(&self.sigma)
            .map(|((x, y), s)| (y - p[0] * (p[1] * x + p[2]).sin() - p[3]) / s)
            .collect()
    }

    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let m = self.x.len();
        let mut j = DMatrix::zeros(m, 4);
        for i in 0..m {
            let (x, s) = (self.x[i], self.sigma[i]);
            let th = p[1] * x + p[2];
            let (sn, cs) = th.sin_cos();
            j[(i, 0)] = -sn / s;
            j[(i, 1)] = -p[0] * x * cs / s;
            j[(i, 2)] = -p[0] * cs / s;
            j[(i, 3)] = -1.0 / s;
        }
        j
    }
}

/// Weighted linear least squares of `y` on `[sin(νx), cos(νx), 1]`; returns the
/// coefficients and the χ² reduction relative to a constant.
fn linear_sine(x: &[f64], y: &[f64], w: &[f64], nu: f64) -> Option<([f64; 3], f64)> {
    let mut ata = DMatrix::<f64>::zeros(3, 3);
    let mut atb = nalgebra::DVector::<f64>::zeros(3);
    for i in 0..x.len() {
        let row = [(nu * x[i]).sin(), (nu * x[i]).cos(), 1.0];
        for a in 0..3 {
            atb[a] += w[i] * row[a] * y[i];
            for b in 0..3 {
                ata[(a, b)] += w[i] * row[a] * row[b];
            }
        }
    }
    let sol = ata.clone().cholesky()?.solve(&atb);
    let wsum: f64 = w.iter().sum();
    let mean = x.iter().enumerate().map(|(i, _)| w[i] * y[i]).sum::<f64>() / wsum;
    let base: f64 = (0..x.len()).map(|i| w[i] * (y[i] - mean).powi(2)).sum();
    let resid: f64 = (0..x.len())
        .map(|i| {
            let m = sol[0] * (nu * x[i]).sin() + sol[1] * (nu * x[i]).cos() + sol[2];
            w[i] * (y[i] - m).powi(2)
        })
        .sum();
    Some(([sol[0], sol[1], sol[2]], base - resid))
}

/// Fits `α·sin(νb + φ) + c`, starting from the strongest component of the
/// least-squares spectrum of the mean-removed data.
pub fn fit_sinusoid(curve: &MagnetometryCurve) -> Result<FitResult> {
    curve.validate()?;
    let n = curve.b_gauss.len();
    if n < 6 {
        return Err(Error::FitInput(format!("{n} points; at least 6 needed")));
    }
    let (lo, hi) = curve
        .b_gauss
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(Error::FitInput("field grid has zero span".into()));
    }
    let scale = span;
    let x: Vec<f64> = curve.b_gauss.iter().map(|b| b / scale).collect();
    let w: Vec<f64> = curve.sigma.iter().map(|s| 1.0 / (s * s)).collect();
    let names = ["amplitude", "rate_rad_per_gauss", "phase_rad", "offset"];

    let ymean = curve.signal.iter().sum::<f64>() / n as f64;
    let spread = curve
        .signal
        .iter()
        .fold(0.0f64, |m, y| m.max((y - ymean).abs()));
    let degenerate = |iterations: usize| FitResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        params: vec![0.0, f64::NAN, f64::NAN, ymean],
        errors: vec![f64::NAN; 4],
        covariance: vec![vec![f64::NAN; 4]; 4],
        chi2: f64::NAN,
        residual_norm: f64::NAN,
        gradient_norm: f64::NAN,
        iterations,
        converged: false,
    };
    if spread <= 1e-12 * (ymean.abs() + 1.0) {
        return Ok(degenerate(0));
    }

    // Frequencies from a quarter cycle up to the grid Nyquist, oversampled 16×.
    let detrended: Vec<f64> = curve.signal.iter().map(|y| y - ymean).collect();
    let nu_min = 0.5 * PI;
    let nu_max = PI * (n as f64 - 1.0);
    let dnu = 2.0 * PI / 16.0;
    let mut best: Option<(f64, [f64; 3], f64)> = None;
    let mut nu = nu_min;
    while nu <= nu_max {
        if let Some((coef, gain)) = linear_sine(&x, &detrended, &w, nu) {
            if best.as_ref().is_none_or(|b| gain > b.2) {
                best = Some((nu, coef, gain));
            }
        }
        nu += dnu;
    }
    let (nu0, coef, _) = best.ok_or_else(|| Error::FitInput("no usable spectral component".into()))?;
    let alpha0 = coef[0].hypot(coef[1]);
    let phi0 = coef[1].atan2(coef[0]);
    let p0 = [alpha0, nu0, phi0, ymean + coef[2]];

    let problem = SinusoidProblem {
        x,
        y: curve.signal.clone(),
        sigma: curve.sigma.clone(),
    };
    let report = levenberg_marquardt(&problem, &p0, &LmOptions::default())?;
    let mut p = report.params.clone();
    if p[0].abs() <= 1e-9 * spread {
        return Ok(degenerate(report.iterations));
    }
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[2] += PI;
    }
    p[2] = (p[2] + PI).rem_euclid(2.0 * PI) - PI;
    let report = LmReport { params: p, ..report };
    Ok(FitResult::from_report(&names, &report, &[1.0, 1.0 / scale, 1.0, 1.0]))
}

/// `S(x) = α₀·exp(−(g·x)^p)` on a rescaled time axis `x = t / scale`.
#[derive(Debug, Clone)]
pub struct StretchedExpProblem {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Exponent held fixed instead of fitted.
    pub fixed_p: Option<f64>,
}

pub const P_BOUNDS: (f64, f64) = (0.5, 3.0);

impl StretchedExpProblem {
    fn unpack(&self, q: &[f64]) -> (f64, f64, f64) {
        (q[0], q[1], self.fixed_p.unwrap_or_else(|| q[2]))
    }
}

impl LeastSquaresProblem for StretchedExpProblem {
    fn n_params(&self) -> usize {
        if self.fixed_p.is_some() {
            2
        } else {
            3
        }
    }

    fn residuals(&self, q: &[f64]) -> Vec<f64> {
        let (a, g, p) = self.unpack(q);
        self.x
            .iter()
            .zip(&self.y)
            .zip(&self.sigma)
            .map(|((x, y), s)| (y - a * (-(g * x).powf(p)).exp()) / s)
            .collect()
    }

    fn jacobian(&self, q: &[f64]) -> DMatrix<f64> {
        let (a, g, p) = self.unpack(q);
        let m = self.x.len();
        let mut j = DMatrix::zeros(m, self.n_params());
        for i in 0..m {
            let (x, s) = (self.x[i], self.sigma[i]);
            let gx = g * x;
            let u = gx.powf(p);
            let e = (-u).exp();
            j[(i, 0)] = -e / s;
            j[(i, 1)] = a * e * p * u / g / s;
            if self.fixed_p.is_none() {
                j[(i, 2)] = if gx > 0.0 { a * e * u * gx.ln() / s } else { 0.0 };
            }
        }
        j
    }
}

struct Bounded<'a>(&'a StretchedExpProblem);

impl LeastSquaresProblem for Bounded<'_> {
    fn n_params(&self) -> usize {
        self.0.n_params()
    }
    fn residuals(&self, p: &[f64]) -> Vec<f64> {
        self.0.residuals(p)
    }
    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        self.0.jacobian(p)
    }
    fn project(&self, p: &mut [f64]) {
        p[1] = p[1].max(1e-9);
        if p.len() > 2 {
            p[2] = p[2].clamp(P_BOUNDS.0 + 1e-9, P_BOUNDS.1 - 1e-9);
        }
    }
}

/// Fits `α₀·exp(−(Γ₂t)^p)`; `p` is fitted within (0.5, 3) unless `fixed_p`
/// is given.
pub fn fit_stretched_exp(
    times: &[f64],
    signals: &[f64],
    sigma: &[f64],
    fixed_p: Option<f64>,
) -> Result<FitResult> {
    let n = times.len();
    if signals.len() != n || sigma.len() != n {
        return Err(Error::FitInput("grids differ in length".into()));
    }
    if n < 5 {
        return Err(Error::FitInput(format!("{n} points; at least 5 needed")));
    }
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::FitInput("times must be positive".into()));
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::FitInput("σ must be positive".into()));
    }
    let scale = times.iter().copied().fold(0.0, f64::max);
    let x: Vec<f64> = times.iter().map(|t| t / scale).collect();

    // Start values from the linearization ln(−ln(y/α₀)) = p·ln g + p·ln x.
    let a0 = signals.iter().copied().fold(f64::NEG_INFINITY, f64::max) * 1.02;
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(signals)
        .filter_map(|(&xi, &y)| {
            let r = y / a0;
            (r > 0.02 && r < 0.98).then(|| (xi.ln(), (-r.ln()).ln()))
        })
        .collect();
    let (mut p_start, mut g_start) = (fixed_p.unwrap_or(1.5), 1.0);
    if pts.len() >= 2 {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { p_start };
        if fixed_p.is_none() && slope.is_finite() {
            p_start = slope.clamp(P_BOUNDS.0 + 0.05, P_BOUNDS.1 - 0.05);
        }
        let intercept = my - p_start * mx;
        let g = (intercept / p_start).exp();
        if g.is_finite() && g > 0.0 {
            g_start = g;
        }
    }
    let problem = StretchedExpProblem {
        x,
        y: signals.to_vec(),
        sigma: sigma.to_vec(),
        fixed_p,
    };
    let mut p0 = vec![a0, g_start];
    if fixed_p.is_none() {
        p0.push(p_start);
    }
    let report = levenberg_marquardt(&Bounded(&problem), &p0, &LmOptions::default())?;
    let mut names = vec!["alpha0", "gamma2_hz"];
    let mut scale_v = vec![1.0, 1.0 / scale];
    if fixed_p.is_none() {
        names.push("p");
        scale_v.push(1.0);
    }
    let mut result = FitResult::from_report(&names, &report, &scale_v);
    if let Some(p) = fixed_p {
        result.names.push("p".into());
        result.params.push(p);
        result.errors.push(0.0);
    }
    Ok(result)
}
