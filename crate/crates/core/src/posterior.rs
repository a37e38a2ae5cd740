//! Bayesian pairwise test between beam statistics and its threshold tables.
//!
//! `f(x, y)` is the posterior probability, under an improper uniform prior on
//! the noncentrality parameters, that the beam producing statistic `x` has the
//! stronger underlying channel than the beam producing `y`. Two independent
//! evaluation routes are provided: a single-integral quadrature form (the
//! trusted oracle) and a Laguerre series with a rigorous truncation bound (the
//! fast path). Deactivation at runtime never evaluates `f` directly; it
//! compares statistics against precomputed critical values tau_alpha(x) held
//! in a [`ThresholdTable`].

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use crate::specfun::{marcum_q1_unchecked, NoncentralChi2};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Bumped whenever the on-disk table layout changes.
pub const TABLE_FORMAT_VERSION: u32 = 1;

/// Series truncation cap before falling back to quadrature.
pub const SERIES_TERM_CAP: usize = 100_000;

const LN_HALF: f64 = -std::f64::consts::LN_2;

fn check_stat(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Domain(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Evaluate f(x, y) = 1 - int_0^inf g_x(eta) Q1(sqrt(y), sqrt(eta)) d eta
/// by adaptive quadrature. Absolute error <= 1e-7. This is the trusted
/// oracle the series form is validated against.
pub fn f_quadrature(x: f64, y: f64) -> Result<f64> {
    check_stat("x", x)?;
    check_stat("y", y)?;
    let gx = NoncentralChi2::new(x)?;
    let sqrt_y = y.sqrt();
    // g_x has mean x + 2 and variance 4 + 4x. Twelve standard deviations
    // cover the Gaussian-like bulk at large x, but for small x the density
    // keeps its exponential e^{-eta/2} tail, so an absolute margin of 46
    // (tail mass e^{-23} per unit of x offset) is added on the right.
    let sd = (4.0 + 4.0 * x).sqrt();
    let lo = (x + 2.0 - 12.0 * sd).max(0.0);
    let hi = x + 2.0 + 12.0 * sd + 46.0;
    let integrand = |eta: f64| {
        gx.ln_pdf_unchecked(eta).exp() * marcum_q1_unchecked(sqrt_y, eta.sqrt())
    };
    let mut integral = adaptive_simpson(integrand, lo, hi, 1e-9)?;
    if lo > 0.0 {
        integral += adaptive_simpson(integrand, 0.0, lo, 1e-10)?;
    }
    Ok((1.0 - integral).clamp(0.0, 1.0))
}

/// Outcome of a series evaluation, including fallback diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct SeriesEval {
    pub value: f64,
    /// Number of series terms consumed (0 when the fallback ran).
    pub terms: usize,
    /// True when the term cap was hit and quadrature supplied the value.
    pub fell_back: bool,
}

/// Evaluate f(x, y) through the Laguerre series
/// f = 1 - 1/2 exp(-x/2 - y/4) sum_{m>=1} (1/2)^m L_m(-y/4) sum_{k<m} (x/2)^k/k!
/// with adaptive truncation.
///
/// All terms are positive, and the weighted Laguerre sum has the closed total
/// sum_{m>=0} (1/2)^m L_m(-y/4) = 2 exp(y/4) from the generating function, so
/// after M terms the remaining contribution to f is exactly bounded by
/// 1 - 1/2 exp(-y/4) S_M with S_M the accumulated Laguerre partial sum. The
/// loop stops once that bound drops below `rel_tol`. Accumulation is done in
/// the log domain; the linear form underflows for statistics above ~1400.
pub fn f_series(x: f64, y: f64, rel_tol: f64) -> Result<f64> {
    Ok(f_series_eval(x, y, rel_tol)?.value)
}

pub fn f_series_eval(x: f64, y: f64, rel_tol: f64) -> Result<SeriesEval> {
    check_stat("x", x)?;
    check_stat("y", y)?;
    if !(rel_tol > 0.0 && rel_tol <= 1e-6) {
        return Err(Error::Domain(format!("rel_tol must be in (0, 1e-6], got {rel_tol}")));
    }
    let z = 0.25 * y; // Laguerre argument is -z
    let ln_half_x = if x > 0.0 { (0.5 * x).ln() } else { f64::NEG_INFINITY };

    // Scaled Laguerre recurrence state: L_m(-z) = lag_cur * exp(lag_scale).
    let mut lag_prev = 1.0f64; // L_0
    let mut lag_cur = 1.0 + z; // L_1
    let mut lag_scale = 0.0f64;

    // ln of the partial exponential sum P_m = sum_{k<m} (x/2)^k / k!.
    let mut ln_partial = 0.0f64; // P_1 = 1
    let mut ln_tk = 0.0f64; // ln (x/2)^k / k! at k = 0

    let mut ln_total = f64::NEG_INFINITY;
    // S_M = sum_{m<=M} (1/2)^m L_m(-z), for the tail bound; starts at L_0.
    let mut ln_s = 0.0f64;

    for m in 1..=SERIES_TERM_CAP {
        let mf = m as f64;
        let ln_lag = lag_cur.ln() + lag_scale;
        let ln_weight = -mf * std::f64::consts::LN_2 + ln_lag;
        ln_total = log_add_exp(ln_total, ln_weight + ln_partial);
        ln_s = log_add_exp(ln_s, ln_weight);

        // Remaining contribution to f after M terms.
        let tail = -(-std::f64::consts::LN_2 - z + ln_s).exp_m1();
        if tail <= rel_tol {
            let value = 1.0 - (LN_HALF - 0.5 * x - z + ln_total).exp();
            return Ok(SeriesEval { value: value.clamp(0.0, 1.0), terms: m, fell_back: false });
        }

        // Advance the exponential partial sum to P_{m+1}.
        ln_tk += ln_half_x - mf.ln();
        ln_partial = log_add_exp(ln_partial, ln_tk);

        // Advance the Laguerre recurrence to L_{m+1}(-z).
        let next = ((2.0 * mf + 1.0 + z) * lag_cur - mf * lag_prev) / (mf + 1.0);
        lag_prev = lag_cur;
        lag_cur = next;
        if lag_cur > 1e250 {
            lag_prev *= 1e-250;
            lag_cur *= 1e-250;
            lag_scale += 250.0 * std::f64::consts::LN_10;
        }
    }
    // Term cap exceeded: fall back to the quadrature oracle.
    Ok(SeriesEval { value: f_quadrature(x, y)?, terms: 0, fell_back: true })
}

/// Solve f(x, y) = alpha for y by bisection on [0, x].
///
/// Returns 0 when f(x, 0) <= alpha, i.e. x below the onset point x_alpha.
/// f(x, .) is continuous and strictly decreasing, so the bracket always
/// holds (f(x, x) = 0.5 < alpha).
pub fn critical_value(alpha: f64, x: f64) -> Result<f64> {
    check_stat("x", x)?;
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must be in (0.5, 1), got {alpha}")));
    }
    let tol = 1e-7;
    if f_series(x, 0.0, tol)? <= alpha {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, x);
    let mut mid = 0.5 * x;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let v = f_series(x, mid, tol)?;
        if (v - alpha).abs() <= 1e-6 {
            return Ok(mid);
        }
        if v > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * x.max(1.0) {
            break;
        }
    }
    Ok(mid)
}

/// Find x_alpha, the onset statistic below which tau_alpha(x) = 0, by
/// bisection of f(x, 0) = alpha.
pub fn onset_point(alpha: f64, x_max: f64) -> Result<f64> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must be in (0.5, 1), got {alpha}")));
    }
    let target = |x: f64| f_series(x, 0.0, 1e-8).map(|v| v - alpha);
    let (mut lo, mut hi) = (0.0f64, x_max);
    if target(hi)? < 0.0 {
        return Err(Error::Config(format!("x_max = {x_max} below the onset point for alpha = {alpha}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if target(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-11 * x_max.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sampled critical values tau_alpha(x) with a quadratic fit for
/// extrapolation past the grid.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ThresholdTable {
    pub alpha: f64,
    pub x_grid: Vec<f64>,
    pub tau: Vec<f64>,
    pub x_alpha: f64,
    /// Ascending-power quadratic coefficients in u = sqrt(x), fit over
    /// x > x_alpha. tau approaches x - c sqrt(x) for large x, which a
    /// quadratic in sqrt(x) captures exactly; one in x does not.
    pub poly_coeffs: Option<[f64; 3]>,
    pub version: u32,
}

/// A threshold lookup with extrapolation diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct TauLookup {
    pub value: f64,
    /// True when x fell beyond the grid and the quadratic fit was used.
    pub extrapolated: bool,
}

impl ThresholdTable {
    /// Build a table of `n_points` critical values on [0, x_max].
    ///
    /// The grid is evenly spaced in sqrt(x) (denser where tau bends near its
    /// onset) with x_alpha inserted as an explicit knot so the piecewise
    /// linear interpolant is exact through the kink.
    pub fn build(alpha: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 256 {
            return Err(Error::Config(format!("n_points must be >= 256, got {n_points}")));
        }
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(Error::Config(format!("x_max must be positive, got {x_max}")));
        }
        let x_alpha = onset_point(alpha, x_max)?;
        let mut grid: Vec<f64> = (0..n_points)
            .map(|i| {
                let u = i as f64 / (n_points - 1) as f64;
                u * u * x_max
            })
            .collect();
        grid.push(x_alpha);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();

        let tau: Vec<f64> = grid
            .iter()
            .map(|&x| if x <= x_alpha { Ok(0.0) } else { critical_value(alpha, x) })
            .collect::<Result<_>>()?;

        let poly_coeffs = fit_quadratic(&grid, &tau, x_alpha);
        Ok(Self { alpha, x_grid: grid, tau, x_alpha, poly_coeffs, version: TABLE_FORMAT_VERSION })
    }

    /// Piecewise-linear interpolation of tau_alpha at `x`, clamped below the
    /// grid and extrapolated through the quadratic fit above it.
    pub fn lookup(&self, x: f64) -> f64 {
        self.lookup_ext(x).value
    }

    pub fn lookup_ext(&self, x: f64) -> TauLookup {
        let n = self.x_grid.len();
        if x <= self.x_grid[0] {
            return TauLookup { value: self.tau[0], extrapolated: false };
        }
        if x > self.x_grid[n - 1] {
            let u = x.sqrt();
            let value = match self.poly_coeffs {
                Some([c0, c1, c2]) => (c0 + c1 * u + c2 * u * u).max(0.0),
                None => self.tau[n - 1],
            };
            return TauLookup { value, extrapolated: true };
        }
        let hi = self.x_grid.partition_point(|&g| g < x).min(n - 1);
        let lo = hi - 1;
        let (x0, x1) = (self.x_grid[lo], self.x_grid[hi]);
        let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        TauLookup { value: self.tau[lo] + w * (self.tau[hi] - self.tau[lo]), extrapolated: false }
    }

    /// Largest absolute residual of the quadratic fit over the fitted range.
    pub fn max_fit_residual(&self) -> f64 {
        let Some([c0, c1, c2]) = self.poly_coeffs else { return f64::NAN };
        self.x_grid
            .iter()
            .zip(&self.tau)
            .filter(|(x, _)| **x > self.x_alpha)
            .map(|(&x, &t)| {
                let u = x.sqrt();
                (c0 + c1 * u + c2 * u * u - t).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(path, body)
            .map_err(|e| Error::Io { path: path.display().to_string(), source: e })
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        let table: Self = serde_json::from_str(&body)?;
        if table.version != TABLE_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "table format version {} does not match expected {}",
                table.version, TABLE_FORMAT_VERSION
            )));
        }
        table.validate()?;
        Ok(table)
    }

    /// Structural invariants: matching lengths, strictly increasing grid,
    /// nondecreasing tau, zero exactly below x_alpha, tau < x.
    pub fn validate(&self) -> Result<()> {
        if self.x_grid.len() != self.tau.len() || self.x_grid.is_empty() {
            return Err(Error::Config("grid/tau length mismatch".into()));
        }
        for w in self.x_grid.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config("x_grid not strictly increasing".into()));
            }
        }
        for (w, x) in self.tau.windows(2).zip(self.x_grid.windows(2)) {
            let _ = x;
            if w[1] < w[0] {
                return Err(Error::Config("tau not nondecreasing".into()));
            }
        }
        for (&x, &t) in self.x_grid.iter().zip(&self.tau) {
            if x < self.x_alpha && t != 0.0 {
                return Err(Error::Config(format!("tau({x}) nonzero below x_alpha")));
            }
            if t >= x && t > 0.0 {
                return Err(Error::Config(format!("tau({x}) = {t} not below x")));
            }
        }
        Ok(())
    }
}

/// Least-squares quadratic in sqrt(x) through the (x, tau) points above the
/// onset.
fn fit_quadratic(grid: &[f64], tau: &[f64], x_alpha: f64) -> Option<[f64; 3]> {
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .zip(tau)
        .filter(|(x, _)| **x > x_alpha)
        .map(|(&x, &t)| (x.sqrt(), t))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    // Normal equations for [1, u, u^2]; 3x3 solve by Gaussian elimination.
    let mut m = [[0.0f64; 4]; 3];
    for &(x, t) in &pts {
        let b = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += b[i] * b[j];
            }
            m[i][3] += b[i] * t;
        }
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        m.swap(col, pivot);
        if m[col][col].abs() < 1e-300 {
            return None;
        }
        for row in 0..3 {
            if row != col {
                let k = m[row][col] / m[col][col];
                for j in col..4 {
                    m[row][j] -= k * m[col][j];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}
