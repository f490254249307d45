//! Relative complex least-squares fit of the mBVD model.
//!
//! Parameters are fitted in log space. Each motional branch is carried as
//! `(ln ω_r, ln c_m, ln r_m)` with `l_m = 1/(ω_r² c_m)`; the product l·c is
//! otherwise so tightly constrained by the data that the normal equations
//! become ill-conditioned. The objective is
//! `Σ_k |Y_model(f_k) − Y_k|² / |Y_k|²`.

use super::{AdmittanceTrace, CircuitError, MbvdModel, MotionalBranch, StaticNetwork};
use crate::exec::Execution;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged when no log-parameter moves by more than this in one step.
    pub step_tolerance: f64,
    /// Converged when an accepted step lowers the cost by less than this fraction.
    pub cost_tolerance: f64,
    pub fit_series_resistance: bool,
    /// Value used for r_s when it is not fitted.
    pub fixed_series_resistance: f64,
    pub fit_static_resistance: bool,
    /// Value used for r_0 when it is not fitted.
    pub fixed_static_resistance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-10,
            cost_tolerance: 1e-14,
            fit_series_resistance: true,
            fixed_series_resistance: 0.0,
            fit_static_resistance: false,
            fixed_static_resistance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// sqrt(Σ |ΔY|²/|Y|²) at the solution.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Names of the fitted parameters, aligned with `confidence_scale`.
    pub parameters: Vec<String>,
    /// Estimated relative 1σ uncertainty of each fitted parameter.
    pub confidence_scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub model: MbvdModel,
    pub report: FitReport,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    fit_rs: bool,
    fit_r0: bool,
    n_branches: usize,
    fixed_rs: f64,
    fixed_r0: f64,
}

impl Layout {
    fn offset(&self) -> usize {
        1 + self.fit_rs as usize + self.fit_r0 as usize
    }

    fn len(&self) -> usize {
        self.offset() + 3 * self.n_branches
    }

    fn unpack(&self, theta: &[f64]) -> Unpacked {
        let c_0 = theta[0].exp();
        let mut idx = 1;
        let r_s = if self.fit_rs {
            idx += 1;
            theta[idx - 1].exp()
        } else {
            self.fixed_rs
        };
        let r_0 = if self.fit_r0 {
            idx += 1;
            theta[idx - 1].exp()
        } else {
            self.fixed_r0
        };
        let branches = (0..self.n_branches)
            .map(|i| {
                let base = self.offset() + 3 * i;
                let omega_r = theta[base].exp();
                let c_m = theta[base + 1].exp();
                let r_m = theta[base + 2].exp();
                (omega_r, c_m, r_m)
            })
            .collect();
        Unpacked { c_0, r_s, r_0, branches }
    }

    fn names(&self) -> Vec<String> {
        let mut names = vec!["c_0".to_string()];
        if self.fit_rs {
            names.push("r_s".into());
        }
        if self.fit_r0 {
            names.push("r_0".into());
        }
        for i in 0..self.n_branches {
            names.push(format!("r_m[{i}]"));
            names.push(format!("l_m[{i}]"));
            names.push(format!("c_m[{i}]"));
        }
        names
    }
}

struct Unpacked {
    c_0: f64,
    r_s: f64,
    r_0: f64,
    /// (ω_r, c_m, r_m)
    branches: Vec<(f64, f64, f64)>,
}

impl Unpacked {
    fn to_model(&self) -> Result<MbvdModel, CircuitError> {
        let branches = self
            .branches
            .iter()
            .map(|&(w, c, r)| MotionalBranch::new(r, 1.0 / (w * w * c), c))
            .collect();
        MbvdModel::new(StaticNetwork::new(self.c_0, self.r_0, self.r_s), branches)
    }
}

/// Evaluates the relative residual vector (re/im interleaved) and, when
/// requested, its Jacobian with respect to the log-parameters.
fn evaluate(
    layout: &Layout,
    theta: &[f64],
    freqs: &[f64],
    measured: &[Complex64],
    weights: &[f64],
    jacobian: Option<&mut DMatrix<f64>>,
) -> DVector<f64> {
    let p = layout.unpack(theta);
    let m = freqs.len();
    let mut res = DVector::zeros(2 * m);
    let mut jac = jacobian;
    let mut dy = vec![Complex64::new(0.0, 0.0); layout.len()];
    for k in 0..m {
        let omega = 2.0 * PI * freqs[k];
        let s = Complex64::new(0.0, omega);
        let y_static = (p.r_0 + (s * p.c_0).inv()).inv();
        let mut y_par = y_static;
        let mut y_b = Vec::with_capacity(p.branches.len());
        for &(w_r, c_m, r_m) in &p.branches {
            let l_m = 1.0 / (w_r * w_r * c_m);
            let yb = (r_m + s * l_m + (s * c_m).inv()).inv();
            y_par += yb;
            y_b.push((yb, l_m));
        }
        let denom = 1.0 + p.r_s * y_par;
        let y = y_par / denom;
        let e = (y - measured[k]) * weights[k];
        res[2 * k] = e.re;
        res[2 * k + 1] = e.im;

        if let Some(j) = jac.as_deref_mut() {
            let dy_dpar = (denom * denom).inv();
            dy[0] = dy_dpar * y_static * y_static / (s * p.c_0);
            let mut idx = 1;
            if layout.fit_rs {
                dy[idx] = -p.r_s * y * y;
                idx += 1;
            }
            if layout.fit_r0 {
                dy[idx] = dy_dpar * (-p.r_0) * y_static * y_static;
            }
            for (i, (&(_, c_m, r_m), &(yb, l_m))) in p.branches.iter().zip(&y_b).enumerate() {
                let base = layout.offset() + 3 * i;
                let yb2 = yb * yb;
                dy[base] = dy_dpar * 2.0 * s * l_m * yb2;
                dy[base + 1] = dy_dpar * yb2 * (s * l_m + (s * c_m).inv());
                dy[base + 2] = dy_dpar * (-r_m) * yb2;
            }
            for (col, d) in dy.iter().enumerate() {
                j[(2 * k, col)] = d.re * weights[k];
                j[(2 * k + 1, col)] = d.im * weights[k];
            }
        }
    }
    res
}

fn median_filter5(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(n);
            let mut w: Vec<f64> = xs[lo..hi].to_vec();
            w.sort_by(|a, b| a.total_cmp(b));
            w[w.len() / 2]
        })
        .collect()
}

/// Local maxima of `m` with their topographic prominence, in index order.
/// A plateau counts once, at its lowest-frequency sample.
fn local_maxima(m: &[f64]) -> Vec<(usize, f64)> {
    let n = m.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if m[i] > m[i - 1] {
            let mut j = i;
            while j + 1 < n && m[j + 1] == m[i] {
                j += 1;
            }
            if j + 1 < n && m[j + 1] < m[i] {
                peaks.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
        .into_iter()
        .map(|p| {
            let h = m[p];
            let mut left_min = h;
            for k in (0..p).rev() {
                if m[k] > h {
                    break;
                }
                left_min = left_min.min(m[k]);
            }
            let mut right_min = h;
            for &v in &m[p + 1..] {
                if v > h {
                    break;
                }
                right_min = right_min.min(v);
            }
            (p, h - left_min.max(right_min))
        })
        .collect()
}

/// Picks the `n` most prominent peaks of the median-filtered |Y|, returned in
/// ascending frequency order.
fn pick_peaks(trace: &AdmittanceTrace, n: usize) -> Result<Vec<usize>, CircuitError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mags: Vec<f64> = trace.admittance().iter().map(|y| y.norm()).collect();
    let filtered = median_filter5(&mags);
    let mut peaks = local_maxima(&filtered);
    if peaks.len() < n {
        return Err(CircuitError::InsufficientPeaks {
            requested: n,
            found: peaks.len(),
        });
    }
    // prominence descending; ties toward lower frequency
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut chosen: Vec<usize> = peaks[..n].iter().map(|p| p.0).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Seeds a branch from the peak of Re(Y) near `idx`: f_r by parabolic
/// interpolation, r from 1/Re(Y), l from the half-power width of Re(Y).
fn seed_branch(freqs: &[f64], y: &[Complex64], idx: usize, lo: usize, hi: usize, c_0: f64) -> (f64, f64, f64) {
    let g: Vec<f64> = y.iter().map(|v| v.re).collect();
    let window = idx.saturating_sub(2).max(lo)..(idx + 3).min(hi + 1);
    let i = window.clone().max_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap_or(idx);
    let mut f_r = freqs[i];
    if i > lo && i < hi {
        let (a, b, c) = (g[i - 1], g[i], g[i + 1]);
        let curv = a - 2.0 * b + c;
        if curv < 0.0 {
            let shift = 0.5 * (a - c) / curv;
            if shift.abs() < 1.0 {
                let step = if shift > 0.0 { freqs[i + 1] - freqs[i] } else { freqs[i] - freqs[i - 1] };
                f_r = freqs[i] + shift * step;
            }
        }
    }
    let g_pk = g[i].max(1e-300);
    let r_total = if g[i] > 0.0 {
        (1.0 / y[i]).re.max(1e-3)
    } else {
        1.0
    };
    let half = 0.5 * g_pk;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = i;
        for j in range {
            if g[j] <= half {
                let t = (g[prev] - half) / (g[prev] - g[j]);
                return Some(freqs[prev] + t * (freqs[j] - freqs[prev]));
            }
            prev = j;
        }
        None
    };
    let left = crossing(&mut (lo..i).rev());
    let right = crossing(&mut (i + 1..=hi));
    let width = match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        (Some(l), None) => Some(2.0 * (f_r - l)),
        (None, Some(r)) => Some(2.0 * (r - f_r)),
        (None, None) => None,
    };
    let omega_r = 2.0 * PI * f_r;
    let c_m = match width {
        Some(w) if w > 0.0 => {
            // half-power width of a series RLC: Δω = R/L
            let l_m = r_total / (2.0 * PI * w);
            1.0 / (omega_r * omega_r * l_m)
        }
        _ => 0.02 * c_0,
    };
    (omega_r, c_m, r_total)
}

fn seed(trace: &AdmittanceTrace, layout: &Layout, peaks: &[usize]) -> Vec<f64> {
    let f = trace.frequencies();
    let y = trace.admittance();
    let c_0 = median(
        f.iter()
            .zip(y)
            .map(|(&fk, yk)| yk.im / (2.0 * PI * fk))
            .filter(|c| *c > 0.0)
            .collect::<Vec<_>>(),
    );
    let c_0 = if c_0.is_finite() && c_0 > 0.0 { c_0 } else { 1e-12 };

    let mut branches = Vec::with_capacity(peaks.len());
    for (n, &p) in peaks.iter().enumerate() {
        // search window bounded by the neighbouring peaks
        let lo = if n == 0 { 0 } else { (peaks[n - 1] + p) / 2 };
        let hi = if n + 1 == peaks.len() { f.len() - 1 } else { (p + peaks[n + 1]) / 2 };
        branches.push(seed_branch(f, y, p, lo, hi, c_0));
    }
    let r_min = branches.iter().map(|b| b.2).fold(f64::INFINITY, f64::min);
    let r_s = if branches.is_empty() {
        let rz = median(y.iter().map(|v| v.inv().re).collect());
        let x_scale = 1.0 / (2.0 * PI * f[f.len() / 2] * c_0);
        rz.max(1e-6 * x_scale)
    } else {
        0.1 * r_min
    };

    let mut theta = vec![c_0.ln()];
    if layout.fit_rs {
        theta.push(r_s.ln());
    }
    if layout.fit_r0 {
        theta.push((0.01 * r_s.max(1e-3)).ln());
    }
    for &(w, c, r) in &branches {
        let r_m = if layout.fit_rs { (r - r_s).max(0.05 * r) } else { r };
        theta.extend([w.ln(), c.ln(), r_m.ln()]);
    }
    theta
}

struct LmResult {
    theta: Vec<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
    jtj: DMatrix<f64>,
}

fn levenberg_marquardt(
    layout: &Layout,
    theta0: Vec<f64>,
    freqs: &[f64],
    measured: &[Complex64],
    weights: &[f64],
    opts: &FitOptions,
) -> LmResult {
    let n = theta0.len();
    let m = 2 * freqs.len();
    let mut theta = theta0;
    let mut jac = DMatrix::zeros(m, n);
    let mut r = evaluate(layout, &theta, freqs, measured, weights, Some(&mut jac));
    let mut cost = 0.5 * r.norm_squared();
    let mut jtj = jac.tr_mul(&jac);
    let mut grad = jac.tr_mul(&r);
    let mut diag_scale: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-300)).collect();
    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut jac_new = DMatrix::zeros(m, n);

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut a = jtj.clone();
        for i in 0..n {
            diag_scale[i] = diag_scale[i].max(jtj[(i, i)]);
            a[(i, i)] += lambda * diag_scale[i];
        }
        let rhs = -&grad;
        let delta = match a.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match a.svd(true, true).solve(&rhs, 1e-300) {
                Ok(d) => d,
                Err(_) => break,
            },
        };
        if delta.iter().any(|d| !d.is_finite()) {
            lambda *= nu;
            nu *= 2.0;
            continue;
        }
        let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
        let r_new = evaluate(layout, &trial, freqs, measured, weights, Some(&mut jac_new));
        let cost_new = 0.5 * r_new.norm_squared();
        let predicted: f64 = (0..n)
            .map(|i| 0.5 * delta[i] * (lambda * diag_scale[i] * delta[i] - grad[i]))
            .sum();
        let max_step = delta.amax();
        if cost_new.is_finite() && cost_new < cost {
            let rho = (cost - cost_new) / predicted.max(1e-300);
            let decrease = cost - cost_new;
            theta = trial;
            r = r_new;
            std::mem::swap(&mut jac, &mut jac_new);
            jtj = jac.tr_mul(&jac);
            grad = jac.tr_mul(&r);
            let old_cost = cost;
            cost = cost_new;
            lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
            nu = 2.0;
            if max_step <= opts.step_tolerance || decrease <= opts.cost_tolerance * old_cost {
                converged = true;
                break;
            }
        } else {
            if max_step <= opts.step_tolerance || lambda > 1e30 {
                // no representable improvement left: numerical minimum
                converged = true;
                break;
            }
            lambda *= nu;
            nu *= 2.0;
        }
    }
    LmResult {
        theta,
        cost,
        iterations,
        converged,
        jtj,
    }
}

/// Maps log-parameter covariance to relative 1σ per reported parameter.
fn confidence(layout: &Layout, jtj: &DMatrix<f64>, cost: f64, m: usize) -> Vec<f64> {
    let n = layout.len();
    let dof = (m as f64 - n as f64).max(1.0);
    let s2 = 2.0 * cost / dof;
    let cov = jtj
        .clone()
        .pseudo_inverse(1e-300)
        .unwrap_or_else(|_| DMatrix::from_element(n, n, f64::NAN))
        * s2;
    // rows of T map (lnω, lnc, lnr) to (ln r_m, ln l_m, ln c_m)
    let mut t = DMatrix::zeros(n, n);
    let off = layout.offset();
    for i in 0..off {
        t[(i, i)] = 1.0;
    }
    for b in 0..layout.n_branches {
        let base = off + 3 * b;
        t[(base, base + 2)] = 1.0;
        t[(base + 1, base)] = -2.0;
        t[(base + 1, base + 1)] = -1.0;
        t[(base + 2, base + 1)] = 1.0;
    }
    let cov_user = &t * cov * t.transpose();
    (0..n).map(|i| cov_user[(i, i)].max(0.0).sqrt()).collect()
}

/// Fits an `n_branches` mBVD model to a measured admittance trace.
///
/// Initial resonances come from the most prominent local maxima of the
/// 5-point median-filtered |Y|; `c_0` from the median of Im(Y)/ω.
pub fn fit_mbvd(trace: &AdmittanceTrace, n_branches: usize, options: &FitOptions) -> Result<FitOutcome, CircuitError> {
    let layout = Layout {
        fit_rs: options.fit_series_resistance,
        fit_r0: options.fit_static_resistance,
        n_branches,
        fixed_rs: options.fixed_series_resistance,
        fixed_r0: options.fixed_static_resistance,
    };
    if trace.len() * 2 < layout.len() {
        return Err(CircuitError::InvalidInput(format!(
            "{} samples cannot determine {} parameters",
            trace.len(),
            layout.len()
        )));
    }
    let peaks = pick_peaks(trace, n_branches)?;
    let theta0 = seed(trace, &layout, &peaks);
    let weights: Vec<f64> = trace
        .admittance()
        .iter()
        .map(|y| 1.0 / y.norm().max(1e-300))
        .collect();
    let lm = levenberg_marquardt(&layout, theta0, trace.frequencies(), trace.admittance(), &weights, options);
    let model = layout.unpack(&lm.theta).to_model()?;
    let report = FitReport {
        residual_norm: (2.0 * lm.cost).sqrt(),
        iterations: lm.iterations,
        converged: lm.converged,
        parameters: layout.names(),
        confidence_scale: confidence(&layout, &lm.jtj, lm.cost, 2 * trace.len()),
    };
    let outcome = FitOutcome { model, report };
    if !lm.converged {
        return Err(CircuitError::NotConverged {
            iterations: lm.iterations,
            residual: outcome.report.residual_norm,
            best: Box::new(outcome),
        });
    }
    Ok(outcome)
}

/// Fits many traces independently, in input order.
pub fn fit_mbvd_batch(
    traces: &[AdmittanceTrace],
    n_branches: usize,
    options: &FitOptions,
    exec: Execution,
) -> Vec<Result<FitOutcome, CircuitError>> {
    exec.map(traces, |t| fit_mbvd(t, n_branches, options))
}
