//! Discrete energies along solver logs and empirical rate exponents.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::operator::MonotoneOperator;
use crate::problem::fmt17;
use crate::solvers::{BetaSchedule, IterateLog};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConfig {
    pub lambda: f64,
    /// Explicit scheme only, `0 < γ < 2`.
    pub gamma: f64,
    pub s: f64,
    pub alpha: f64,
    /// Needed by the regularized energy.
    pub l: Option<f64>,
}

impl EnergyConfig {
    fn check_lambda(&self) -> Result<()> {
        if !(0.0..=self.alpha - 1.0).contains(&self.lambda) {
            return Err(Error::InvalidArgument(format!(
                "lambda must lie in [0, alpha - 1] = [0, {}], got {}",
                self.alpha - 1.0,
                self.lambda
            )));
        }
        Ok(())
    }

    fn check_gamma(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must lie in (0, 2), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

fn require_k(k: usize, min: usize) -> Result<()> {
    if k < min {
        return Err(Error::InvalidArgument(format!("energy needs k >= {min}, got {k}")));
    }
    Ok(())
}

/// Implicit-scheme energy
///
/// ```text
/// E = ½‖2λ(z^k−z*) + 2k(z^k−z^{k−1}) + skβ_{k−1}V(z^k)‖² + 2λ(α−1−λ)‖z^k−z*‖²
///     + 2λskβ_{k−1}⟨z^k−z*, V(z^k)⟩ + ½s²(k+α)kβ_kβ_{k−1}‖V(z^k)‖²
/// ```
pub fn energy_implicit(
    k: usize,
    z: &Vector,
    z_prev: &Vector,
    vz: &Vector,
    z_star: &Vector,
    cfg: &EnergyConfig,
    beta: &BetaSchedule,
) -> Result<f64> {
    require_k(k, 1)?;
    cfg.check_lambda()?;
    let (lam, s, a) = (cfg.lambda, cfg.s, cfg.alpha);
    let kf = k as f64;
    let (b, bp) = (beta.at(k), beta.at(k - 1));
    let d = z - z_star;
    let u = 2.0 * lam * &d + 2.0 * kf * (z - z_prev) + s * kf * bp * vz;
    Ok(0.5 * u.norm_squared()
        + 2.0 * lam * (a - 1.0 - lam) * d.norm_squared()
        + 2.0 * lam * s * kf * bp * d.dot(vz)
        + 0.5 * s * s * (kf + a) * kf * b * bp * vz.norm_squared())
}

/// The same energy regrouped as
///
/// ```text
/// 2λ(α−1)‖z^k−z*‖² + 4λk⟨z^k−z*, z^k−z^{k−1} + sβ_{k−1}V(z^k)⟩
///   + ½k²‖2(z^k−z^{k−1}) + sβ_{k−1}V(z^k)‖² + ½s²(k+α)kβ_kβ_{k−1}‖V(z^k)‖²
/// ```
pub fn energy_implicit_grouped(
    k: usize,
    z: &Vector,
    z_prev: &Vector,
    vz: &Vector,
    z_star: &Vector,
    cfg: &EnergyConfig,
    beta: &BetaSchedule,
) -> Result<f64> {
    require_k(k, 1)?;
    cfg.check_lambda()?;
    let (lam, s, a) = (cfg.lambda, cfg.s, cfg.alpha);
    let kf = k as f64;
    let (b, bp) = (beta.at(k), beta.at(k - 1));
    let d = z - z_star;
    let dz = z - z_prev;
    let w = 2.0 * &dz + s * bp * vz;
    Ok(2.0 * lam * (a - 1.0) * d.norm_squared()
        + 4.0 * lam * kf * d.dot(&(&dz + s * bp * vz))
        + 0.5 * kf * kf * w.norm_squared()
        + 0.5 * s * s * (kf + a) * kf * b * bp * vz.norm_squared())
}

/// Explicit-scheme energy with `u = 2λ(z^k−z*) + 2k(z^k−z^{k−1}) + γskV(z̄^{k−1})`:
///
/// ```text
/// E = ½‖u‖² + 2λ(α−1−λ)‖z^k−z*‖² + 2(2−γ)λsk⟨z^k−z*, V(z̄^{k−1})⟩
///     + ½(2−γ)s²k(γk+α)‖V(z̄^{k−1})‖²
/// ```
pub fn energy_explicit(
    k: usize,
    z: &Vector,
    z_prev: &Vector,
    vbar_prev: &Vector,
    z_star: &Vector,
    cfg: &EnergyConfig,
) -> Result<f64> {
    require_k(k, 1)?;
    cfg.check_lambda()?;
    cfg.check_gamma()?;
    let (lam, g, s, a) = (cfg.lambda, cfg.gamma, cfg.s, cfg.alpha);
    let kf = k as f64;
    let d = z - z_star;
    let u = 2.0 * lam * &d + 2.0 * kf * (z - z_prev) + g * s * kf * vbar_prev;
    Ok(0.5 * u.norm_squared()
        + 2.0 * lam * (a - 1.0 - lam) * d.norm_squared()
        + 2.0 * (2.0 - g) * lam * s * kf * d.dot(vbar_prev)
        + 0.5 * (2.0 - g) * s * s * kf * (g * kf + a) * vbar_prev.norm_squared())
}

/// Quantities around index `k` of an explicit run.
#[derive(Debug, Clone)]
pub struct ExplicitWindow<'a> {
    pub z: &'a Vector,
    pub z_prev: &'a Vector,
    /// `V(z^k)`
    pub vz: &'a Vector,
    /// `V(z̄^{k−1})`
    pub vbar_prev: &'a Vector,
    /// `V(z̄^{k−2})`
    pub vbar_prev2: &'a Vector,
}

/// Regularized explicit energy
///
/// ```text
/// F = E − 2(2−γ)sk²⟨z^k−z^{k−1}, V(z^k) − V(z̄^{k−1})⟩
///     + ½(2−γ)s²k√k(2sL√k + α)‖V(z̄^{k−1}) − V(z̄^{k−2})‖²
///     − ½λ(α−2)s²(2 − α/(k+α))‖V(z̄^{k−1})‖²
/// ```
pub fn energy_regularized(
    k: usize,
    w: &ExplicitWindow<'_>,
    z_star: &Vector,
    cfg: &EnergyConfig,
) -> Result<f64> {
    require_k(k, 2)?;
    let l = cfg
        .l
        .ok_or_else(|| Error::InvalidArgument("regularized energy needs L".into()))?;
    let e = energy_explicit(k, w.z, w.z_prev, w.vbar_prev, z_star, cfg)?;
    let (lam, g, s, a) = (cfg.lambda, cfg.gamma, cfg.s, cfg.alpha);
    let kf = k as f64;
    let sk = kf.sqrt();
    Ok(e - 2.0 * (2.0 - g) * s * kf * kf * (w.z - w.z_prev).dot(&(w.vz - w.vbar_prev))
        + 0.5 * (2.0 - g) * s * s * kf * sk * (2.0 * s * l * sk + a)
            * (w.vbar_prev - w.vbar_prev2).norm_squared()
        - 0.5 * lam * (a - 2.0) * s * s * (2.0 - a / (kf + a)) * w.vbar_prev.norm_squared())
}

/// First index from which the regularized energy is nonnegative:
/// `⌈2λ(α−2)/((2−γ)α)⌉`.
pub fn k1_threshold(lambda: f64, alpha: f64, gamma: f64) -> usize {
    (2.0 * lambda * (alpha - 2.0) / ((2.0 - gamma) * alpha)).ceil().max(0.0) as usize
}

/// λ-window `(α−1−ε/4, α−1)` of the implicit energy with `ε` the growth
/// margin of `beta`; returns `(lo, hi, midpoint)`.
pub fn implicit_lambda_window(alpha: f64, beta: &BetaSchedule) -> Result<(f64, f64, f64)> {
    let eps = beta.check_growth(alpha)?.growth_margin;
    let (lo, hi) = (alpha - 1.0 - eps / 4.0, alpha - 1.0);
    Ok((lo, hi, 0.5 * (lo + hi)))
}

/// Smallest `i` with `series[j+1] ≤ series[j] + tol` for all `j ≥ i`.
/// `None` for an empty series.
pub fn tail_monotone_index(series: &[f64], tol: f64) -> Option<usize> {
    if series.is_empty() {
        return None;
    }
    let last_violation = (0..series.len() - 1)
        .rev()
        .find(|&j| !(series[j + 1] <= series[j] + tol));
    Some(last_violation.map_or(0, |j| j + 1))
}

/// Snapshot lookup that insists on every index being present.
fn snapshot_z(log: &IterateLog, k: usize) -> Result<&crate::solvers::Snapshot> {
    log.snapshot(k).ok_or_else(|| {
        Error::InsufficientData(format!(
            "log has no iterate snapshot at k = {k}; run with snapshots and record_every = 1"
        ))
    })
}

/// `(k, E_λ^k)` for `k = 1..=K` along an implicit run.
pub fn implicit_energy_series<O: MonotoneOperator + ?Sized>(
    op: &O,
    log: &IterateLog,
    z_star: &Vector,
    cfg: &EnergyConfig,
    beta: &BetaSchedule,
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(log.records.len());
    for k in 1..=log.last_k() {
        let z = &snapshot_z(log, k)?.z;
        let zp = &snapshot_z(log, k - 1)?.z;
        out.push((k, energy_implicit(k, z, zp, &op.apply(z), z_star, cfg, beta)?));
    }
    Ok(out)
}

/// One row of an explicit energy series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplicitEnergyRow {
    pub k: usize,
    pub e: f64,
    pub f: f64,
}

/// `(k, E_λ^k, F_λ^k)` for `k = 2..=K` along an explicit run.
pub fn explicit_energy_series<O: MonotoneOperator + ?Sized>(
    op: &O,
    log: &IterateLog,
    z_star: &Vector,
    cfg: &EnergyConfig,
) -> Result<Vec<ExplicitEnergyRow>> {
    let vbar = |k: usize| -> Result<Vector> {
        let snap = snapshot_z(log, k)?;
        let zb = snap.zbar.as_ref().ok_or_else(|| {
            Error::InsufficientData(format!("no extrapolated iterate at k = {k}"))
        })?;
        Ok(op.apply(zb))
    };
    let mut out = Vec::with_capacity(log.records.len());
    if log.last_k() < 2 {
        return Ok(out);
    }
    let (mut vb2, mut vb1) = (vbar(0)?, vbar(1)?);
    for k in 2..=log.last_k() {
        let z = &snapshot_z(log, k)?.z;
        let zp = &snapshot_z(log, k - 1)?.z;
        let vz = op.apply(z);
        let w = ExplicitWindow {
            z,
            z_prev: zp,
            vz: &vz,
            vbar_prev: &vb1,
            vbar_prev2: &vb2,
        };
        let f = energy_regularized(k, &w, z_star, cfg)?;
        let e = energy_explicit(k, z, zp, &vb1, z_star, cfg)?;
        out.push(ExplicitEnergyRow { k, e, f });
        // The last z̄ is only available when the run computed it.
        if k < log.last_k() {
            vb2 = std::mem::replace(&mut vb1, vbar(k)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Residual,
    Velocity,
    Gap,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "residual" => Ok(Metric::Residual),
            "velocity" => Ok(Metric::Velocity),
            "gap" => Ok(Metric::Gap),
            _ => Err(Error::InvalidArgument(format!(
                "unknown metric '{s}', expected residual, velocity or gap"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub window: (usize, usize),
    pub r_squared: f64,
    pub points: usize,
}

/// Minimum number of points in a fit window.
pub const MIN_FIT_POINTS: usize = 50;

/// Least-squares slope of `log(metric)` against `log(k)` over the last
/// `window_fraction` of the series. The series is cut at the first value
/// below `1e-13` times the first positive value (noise floor); only finite
/// positive values with `k ≥ 1` enter the fit.
pub fn rate_slope_series(ks: &[usize], values: &[f64], window_fraction: f64) -> Result<RateFit> {
    if ks.len() != values.len() {
        return Err(Error::DimensionMismatch("k and metric series differ in length".into()));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "window fraction must lie in (0, 1], got {window_fraction}"
        )));
    }
    let Some(i0) = values.iter().position(|v| v.is_finite() && *v > 0.0) else {
        return Err(Error::InsufficientData("no positive metric values".into()));
    };
    let floor = 1e-13 * values[i0];
    let end = values[i0..]
        .iter()
        .position(|&v| v < floor)
        .map_or(values.len(), |i| i0 + i);
    let start = end - ((end as f64) * window_fraction).floor() as usize;
    let pts: Vec<(f64, f64)> = (start..end)
        .filter(|&i| ks[i] >= 1 && values[i].is_finite() && values[i] > 0.0)
        .map(|i| ((ks[i] as f64).ln(), values[i].ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "rate fit needs {MIN_FIT_POINTS} positive values in the window, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("fit window has a single k".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        window: (ks[start], ks[end - 1]),
        r_squared,
        points: pts.len(),
    })
}

fn metric_values(log: &IterateLog, metric: Metric) -> (Vec<usize>, Vec<f64>) {
    let mut ks = Vec::with_capacity(log.records.len());
    let mut vs = Vec::with_capacity(log.records.len());
    for r in &log.records {
        let v = match metric {
            Metric::Residual => Some(r.residual),
            Metric::Velocity => r.velocity,
            Metric::Gap => r.gap,
        };
        if let Some(v) = v {
            ks.push(r.k);
            vs.push(v);
        }
    }
    (ks, vs)
}

/// [`rate_slope_series`] on one column of a log.
pub fn rate_slope(log: &IterateLog, metric: Metric, window_fraction: f64) -> Result<RateFit> {
    let (ks, vs) = metric_values(log, metric);
    rate_slope_series(&ks, &vs, window_fraction)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summability {
    pub total: f64,
    /// Contribution of `k ∈ (K/10, K]`.
    pub last_decade: f64,
}

impl Summability {
    pub fn ratio(&self) -> f64 {
        if self.total == 0.0 {
            0.0
        } else {
            self.last_decade / self.total
        }
    }
}

fn summability(terms: &[(usize, f64)]) -> Summability {
    let kmax = terms.last().map_or(0, |t| t.0);
    let total = terms.iter().map(|t| t.1).sum();
    let last_decade = terms.iter().filter(|t| t.0 * 10 > kmax).map(|t| t.1).sum();
    Summability { total, last_decade }
}

/// Partial sums of `k‖z^{k+1} − z^k‖²` along a log.
pub fn velocity_summability(log: &IterateLog) -> Summability {
    let terms: Vec<(usize, f64)> = log
        .records
        .iter()
        .filter_map(|r| r.velocity.map(|v| (r.k - 1, (r.k - 1) as f64 * v * v)))
        .collect();
    summability(&terms)
}

/// Partial sums of `k‖V(z̄^k)‖²` along a log.
pub fn residual_bar_summability(log: &IterateLog) -> Summability {
    let terms: Vec<(usize, f64)> = log
        .records
        .iter()
        .filter_map(|r| r.residual_bar.map(|v| (r.k, r.k as f64 * v * v)))
        .collect();
    summability(&terms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub k: usize,
    pub e_lambda: Option<f64>,
    pub f_lambda: Option<f64>,
    pub k_residual: f64,
}

/// Per-iteration energies plus a summary block.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticReport {
    pub method: String,
    pub rows: Vec<ReportRow>,
    pub lambda: Option<f64>,
    pub lambda_window: Option<(f64, f64)>,
    pub gamma: Option<f64>,
    pub e_tail_index: Option<usize>,
    pub f_tail_index: Option<usize>,
    pub residual_fit: Option<RateFit>,
    pub velocity_fit: Option<RateFit>,
}

pub const REPORT_HEADER: &str = "k,E_lambda,F_lambda,k_residual_product";

impl DiagnosticReport {
    /// Report with rate fits and `k‖V(z^k)‖` only, as available from a
    /// scalar log.
    pub fn from_log(log: &IterateLog, window_fraction: f64) -> Self {
        Self {
            method: log.method.clone(),
            rows: log
                .records
                .iter()
                .map(|r| ReportRow {
                    k: r.k,
                    e_lambda: None,
                    f_lambda: None,
                    k_residual: r.k as f64 * r.residual,
                })
                .collect(),
            lambda: None,
            lambda_window: None,
            gamma: None,
            e_tail_index: None,
            f_tail_index: None,
            residual_fit: rate_slope(log, Metric::Residual, window_fraction).ok(),
            velocity_fit: rate_slope(log, Metric::Velocity, window_fraction).ok(),
        }
    }

    /// Fills the energy columns and their tail indices; the tail tolerance
    /// is `1e-10(1 + |first value|)`.
    pub fn set_energies(&mut self, e: &[(usize, f64)], f: &[(usize, f64)]) {
        for row in &mut self.rows {
            row.e_lambda = e.iter().find(|p| p.0 == row.k).map(|p| p.1);
            row.f_lambda = f.iter().find(|p| p.0 == row.k).map(|p| p.1);
        }
        let idx = |s: &[(usize, f64)]| {
            let vals: Vec<f64> = s.iter().map(|p| p.1).collect();
            let tol = 1e-10 * (1.0 + vals.first().map_or(0.0, |v| v.abs()));
            tail_monotone_index(&vals, tol).map(|i| s[i].0)
        };
        self.e_tail_index = if e.is_empty() { None } else { idx(e) };
        self.f_tail_index = if f.is_empty() { None } else { idx(f) };
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{REPORT_HEADER}");
        let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.k,
                opt(r.e_lambda),
                opt(r.f_lambda),
                fmt17(r.k_residual)
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "method = {}", self.method);
        let idx = |v: Option<usize>| v.map_or("none".to_string(), |i| i.to_string());
        let fit = |f: &Option<RateFit>| match f {
            Some(f) => format!(
                "{:.4} over k in [{}, {}] (r^2 = {:.4}, {} points)",
                f.slope, f.window.0, f.window.1, f.r_squared, f.points
            ),
            None => "unavailable".to_string(),
        };
        if let Some(l) = self.lambda {
            let _ = writeln!(s, "lambda = {l}");
        }
        if let Some((lo, hi)) = self.lambda_window {
            let _ = writeln!(s, "lambda window = ({lo}, {hi})");
        }
        if let Some(g) = self.gamma {
            let _ = writeln!(s, "gamma = {g}");
        }
        let _ = writeln!(s, "E tail index = {}", idx(self.e_tail_index));
        let _ = writeln!(s, "F tail index = {}", idx(self.f_tail_index));
        let _ = writeln!(s, "residual slope = {}", fit(&self.residual_fit));
        let _ = writeln!(s, "velocity slope = {}", fit(&self.velocity_fit));
        s
    }
}
