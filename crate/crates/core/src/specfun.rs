//! Scalar special functions for the measurement model.
//!
//! Everything here is built around the noncentral chi-square distribution
//! with two degrees of freedom: the density couples the modified Bessel
//! function I0, the survival function is a Marcum Q, and the pairwise test
//! series needs Laguerre polynomials. All densities have log-domain variants
//! because the search statistics can reach the thousands, where the linear
//! forms underflow.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::{gamma_ur, ln_gamma};

const LN_2PI: f64 = 1.837877066409345483560659472811;

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Domain(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

/// Modified Bessel function of the first kind, order zero.
///
/// Power series for small arguments; `exp(log_bessel_i0)` above the
/// crossover, which saturates to infinity past x ~ 713 as the true value
/// exceeds the f64 range.
pub fn bessel_i0(x: f64) -> Result<f64> {
    check_nonneg("x", x)?;
    if x <= 20.0 {
        Ok(i0_series(x))
    } else {
        Ok(log_bessel_i0(x)?.exp())
    }
}

/// ln I0(x), safe for large arguments.
pub fn log_bessel_i0(x: f64) -> Result<f64> {
    check_nonneg("x", x)?;
    if x <= 20.0 {
        Ok(i0_series(x).ln())
    } else {
        // I0(x) ~ e^x / sqrt(2 pi x) * sum_k a_k / x^k,
        // a_k = a_{k-1} * (2k-1)^2 / (8k)
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30u32 {
            let kf = f64::from(k);
            term *= (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (8.0 * kf * x);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        Ok(x - 0.5 * (LN_2PI + x.ln()) + sum.ln())
    }
}

fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-18 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// First-order Marcum Q-function Q1(a, b) = Pr{X > b^2} for X ~ chi2_2(a^2).
///
/// Evaluated as a Poisson mixture of regularized upper incomplete gamma
/// functions: Q1(a,b) = sum_k Pois(k; a^2/2) * Q(k+1, b^2/2). The sum is
/// taken over a window around the Poisson mean wide enough that the omitted
/// mass is below 1e-14, which bounds the absolute error since each gamma
/// factor is in [0, 1]. Stable for a*b well past the naive Bessel-series
/// overflow point.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    check_nonneg("a", a)?;
    check_nonneg("b", b)?;
    Ok(marcum_q1_unchecked(a, b))
}

pub(crate) fn marcum_q1_unchecked(a: f64, b: f64) -> f64 {
    let lambda = 0.5 * a * a; // Poisson mean
    let z = 0.5 * b * b; // gamma argument
    if z == 0.0 {
        return 1.0;
    }
    if lambda == 0.0 {
        return (-z).exp();
    }
    // Window covering all but <1e-15 of the Poisson mass.
    let width = 14.0 * lambda.sqrt() + 30.0;
    let k_lo = (lambda - width).floor().max(0.0) as u64;
    let k_hi = (lambda + width).ceil() as u64;

    let ln_lambda = lambda.ln();
    let ln_z = z.ln();
    let kf = k_lo as f64;
    // Poisson pmf and incomplete-gamma increment at the window start.
    let mut p = (kf * ln_lambda - lambda - ln_gamma(kf + 1.0)).exp();
    let mut t = (kf * ln_z - z - ln_gamma(kf + 1.0)).exp();
    let mut q = gamma_ur(kf + 1.0, z);

    let mut acc = 0.0;
    for k in k_lo..=k_hi {
        acc += p * q;
        let next = (k + 1) as f64;
        p *= lambda / next;
        t *= z / next;
        q += t; // Q(k+2, z) = Q(k+1, z) + e^-z z^(k+1)/(k+1)!
        if q > 1.0 {
            q = 1.0;
        }
    }
    acc.clamp(0.0, 1.0)
}

/// Laguerre polynomial L_m(a) by the three-term recurrence.
pub fn laguerre(m: u32, a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::Domain(format!("argument must be finite, got {a}")));
    }
    let mut prev = 1.0; // L_0
    if m == 0 {
        return Ok(prev);
    }
    let mut cur = 1.0 - a; // L_1
    for k in 1..m {
        let kf = f64::from(k);
        let next = ((2.0 * kf + 1.0 - a) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Noncentral chi-square distribution with two degrees of freedom.
///
/// The degrees of freedom are fixed at 2 throughout: the search statistic
/// T = 2nP|r|^2/sigma^2 is the squared magnitude of a complex Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncentralChi2 {
    noncentrality: f64,
}

impl NoncentralChi2 {
    pub fn new(noncentrality: f64) -> Result<Self> {
        check_nonneg("noncentrality", noncentrality)?;
        Ok(Self { noncentrality })
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }

    /// Density g_eta(x) = 1/2 exp(-(x+eta)/2) I0(sqrt(eta x)).
    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_nonneg("x", x)?;
        Ok(self.ln_pdf_unchecked(x).exp())
    }

    /// ln g_eta(x); the form the posterior integrands consume.
    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        check_nonneg("x", x)?;
        Ok(self.ln_pdf_unchecked(x))
    }

    pub(crate) fn ln_pdf_unchecked(&self, x: f64) -> f64 {
        let eta = self.noncentrality;
        -std::f64::consts::LN_2 - 0.5 * (x + eta) + log_bessel_i0((eta * x).sqrt()).unwrap()
    }

    /// CDF via the Marcum identity: F(x) = 1 - Q1(sqrt(eta), sqrt(x)).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_nonneg("x", x)?;
        Ok(1.0 - marcum_q1_unchecked(self.noncentrality.sqrt(), x.sqrt()))
    }

    /// Survival function Q1(sqrt(eta), sqrt(x)).
    pub fn sf(&self, x: f64) -> Result<f64> {
        check_nonneg("x", x)?;
        Ok(marcum_q1_unchecked(self.noncentrality.sqrt(), x.sqrt()))
    }

    /// Draw one sample: (sqrt(eta) + G1)^2 + G2^2 with G1, G2 standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        let s = self.noncentrality.sqrt() + g1;
        s * s + g2 * g2
    }
}

/// Free-function form of the density, see [`NoncentralChi2::pdf`].
pub fn chi2_pdf(eta: f64, x: f64) -> Result<f64> {
    NoncentralChi2::new(eta)?.pdf(x)
}

/// Free-function form of the CDF, see [`NoncentralChi2::cdf`].
pub fn chi2_cdf(eta: f64, x: f64) -> Result<f64> {
    NoncentralChi2::new(eta)?.cdf(x)
}

/// Free-function form of the sampler.
pub fn chi2_sample<R: Rng + ?Sized>(eta: f64, rng: &mut R) -> Result<f64> {
    Ok(NoncentralChi2::new(eta)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_simpson;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: plain power series with a fixed term count.
    fn i0_power_series(x: f64, terms: u32) -> f64 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=terms {
            term *= q / (f64::from(k) * f64::from(k));
            sum += term;
        }
        sum
    }

    #[test]
    fn i0_at_zero_and_one() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        // Frozen from the 20+ term power series oracle.
        let oracle = i0_power_series(1.0, 25);
        assert!((oracle - 1.2660658777520082).abs() < 1e-14);
        assert!((bessel_i0(1.0).unwrap() - oracle).abs() / oracle < 1e-12);
    }

    #[test]
    fn log_i0_matches_power_series_at_crossover() {
        // Asymptotic branch cross-checked against a 60-term power series.
        for &x in &[10.0, 20.0, 25.0, 50.0, 100.0] {
            let oracle = i0_power_series(x, 260).ln();
            let got = log_bessel_i0(x).unwrap();
            assert!(
                (got - oracle).abs() < 1e-10 * oracle.abs().max(1.0),
                "x={x}: got {got}, oracle {oracle}"
            );
        }
        // Frozen value at x = 10.
        assert!((log_bessel_i0(10.0).unwrap() - 7.942972083118695).abs() < 1e-9);
    }

    #[test]
    fn i0_rejects_bad_input() {
        assert!(bessel_i0(f64::NAN).is_err());
        assert!(bessel_i0(-1.0).is_err());
        assert!(bessel_i0(f64::INFINITY).is_err());
    }

    /// Independent oracle: Q1(a,b) = int_b^inf t exp(-(t^2+a^2)/2) I0(a t) dt.
    fn marcum_integral_oracle(a: f64, b: f64) -> f64 {
        let f = |t: f64| t * (-0.5 * (t * t + a * a)).exp() * i0_power_series(a * t, 200);
        let hi = b.max(a) + 30.0;
        adaptive_simpson(f, b, hi, 1e-12).unwrap()
    }

    #[test]
    fn marcum_basic_values() {
        assert_eq!(marcum_q1(3.0, 0.0).unwrap(), 1.0);
        assert!((marcum_q1(0.0, 2.0).unwrap() - (-2.0f64).exp()).abs() < 1e-12);
        // Frozen from the integral oracle: Q1(1,1) = 0.7328798037968203.
        let oracle = marcum_integral_oracle(1.0, 1.0);
        assert!((oracle - 0.7328798037968203).abs() < 1e-9);
        assert!((marcum_q1(1.0, 1.0).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn marcum_matches_integral_oracle_broadly() {
        for &(a, b) in &[(0.5, 2.0), (2.0, 0.5), (3.0, 3.0), (5.0, 4.0), (1.0, 6.0)] {
            let got = marcum_q1(a, b).unwrap();
            let want = marcum_integral_oracle(a, b);
            assert!((got - want).abs() < 1e-9, "Q1({a},{b}): {got} vs {want}");
        }
    }

    #[test]
    fn marcum_large_arguments_stable() {
        // a*b > 700 regime: must stay in [0,1] and keep the 0.5 symmetry point.
        let v = marcum_q1(45.0, 45.0).unwrap();
        assert!(v > 0.4 && v < 0.6, "Q1(45,45) = {v}");
        assert!(marcum_q1(100.0, 1.0).unwrap() > 1.0 - 1e-10);
        assert!(marcum_q1(1.0, 100.0).unwrap() < 1e-12);
    }

    #[test]
    fn marcum_monotone_grid() {
        // a up => nondecreasing; b up => nonincreasing, 100x100 grid.
        let grid: Vec<f64> = (0..100).map(|i| 0.08 * i as f64).collect();
        for &b in grid.iter().step_by(7) {
            let mut prev = 0.0;
            for &a in &grid {
                let v = marcum_q1(a, b).unwrap();
                assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
        for &a in grid.iter().step_by(7) {
            let mut prev = 1.0;
            for &b in &grid {
                let v = marcum_q1(a, b).unwrap();
                assert!(v <= prev + 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn laguerre_small_orders() {
        assert_eq!(laguerre(0, -1.0).unwrap(), 1.0);
        assert_eq!(laguerre(1, -1.0).unwrap(), 2.0);
        assert_eq!(laguerre(2, -1.0).unwrap(), 3.5);
    }

    #[test]
    fn laguerre_nonpositive_argument_increasing() {
        for &a in &[0.0, -0.5, -3.0] {
            let mut prev = 0.0;
            for m in 0..200 {
                let v = laguerre(m, a).unwrap();
                assert!(v >= 1.0 - 1e-12 && v >= prev - 1e-9, "L_{m}({a}) = {v}");
                prev = v;
            }
        }
    }

    #[test]
    fn pdf_central_case_and_reciprocity() {
        // eta = 0 reduces to the exponential density e^{-x/2}/2.
        for &x in &[0.0f64, 0.5, 2.0, 10.0] {
            let want = 0.5 * (-0.5 * x).exp();
            assert!((chi2_pdf(0.0, x).unwrap() - want).abs() < 1e-14);
        }
        // g_eta(x) = g_x(eta), spot-checked at (4, 9) then swept on a grid.
        assert!((chi2_pdf(4.0, 9.0).unwrap() - chi2_pdf(9.0, 4.0).unwrap()).abs() < 1e-15);
        let grid: Vec<f64> = (0..20).map(|i| 1e-3 * 10f64.powf(i as f64 * 6.0 / 19.0)).collect();
        for &x in &grid {
            for &eta in &grid {
                let a = chi2_pdf(eta, x).unwrap();
                let b = chi2_pdf(x, eta).unwrap();
                assert!((a - b).abs() <= 1e-9 * a.max(1.0));
            }
        }
    }

    #[test]
    fn pdf_normalizes() {
        let d = NoncentralChi2::new(4.0).unwrap();
        let mass = adaptive_simpson(|x| d.pdf(x).unwrap(), 0.0, 120.0, 1e-9).unwrap();
        assert!((mass - 1.0).abs() < 1e-6, "mass = {mass}");
    }

    #[test]
    fn cdf_edges_and_complement() {
        assert_eq!(chi2_cdf(5.0, 0.0).unwrap(), 0.0);
        for &x in &[0.1f64, 1.0, 4.0] {
            let want = 1.0 - (-0.5 * x).exp();
            assert!((chi2_cdf(0.0, x).unwrap() - want).abs() < 1e-12);
        }
        // cdf + marcum == 1 exactly by construction; verify to 1e-12 anyway.
        for &(eta, x) in &[(0.5, 0.5), (2.0, 7.0), (50.0, 40.0), (400.0, 420.0)] {
            let s = chi2_cdf(eta, x).unwrap() + marcum_q1(eta.sqrt(), x.sqrt()).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_matches_pdf_quadrature() {
        // Frozen: cdf(eta=2, x=2) = 0.3457458387231645 from integrating the pdf.
        let d = NoncentralChi2::new(2.0).unwrap();
        let oracle = adaptive_simpson(|x| d.pdf(x).unwrap(), 0.0, 2.0, 1e-11).unwrap();
        assert!((oracle - 0.3457458387231645).abs() < 1e-8);
        assert!((d.cdf(2.0).unwrap() - oracle).abs() < 1e-8);
    }

    #[test]
    fn sampler_mean_and_determinism() {
        let n = 100_000;
        for &eta in &[0.0, 10.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mean: f64 =
                (0..n).map(|_| chi2_sample(eta, &mut rng).unwrap()).sum::<f64>() / n as f64;
            // var = 4 + 4 eta, so 3 sigma of the mean estimate:
            let tol = 3.0 * (4.0 + 4.0 * eta).sqrt() / (n as f64).sqrt();
            assert!((mean - (2.0 + eta)).abs() < tol, "eta={eta}: mean {mean}");
        }
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            assert_eq!(chi2_sample(3.0, &mut a).unwrap(), chi2_sample(3.0, &mut b).unwrap());
        }
    }

    #[test]
    fn sampler_ks_against_cdf() {
        let n = 100_000usize;
        // 1% KS critical value ~ 1.628 / sqrt(n)
        let crit = 1.628 / (n as f64).sqrt();
        for &eta in &[0.0, 5.0, 50.0] {
            let d = NoncentralChi2::new(eta).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1234 + eta as u64);
            let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut ks: f64 = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                let c = d.cdf(x).unwrap();
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                ks = ks.max((c - lo).abs()).max((hi - c).abs());
            }
            assert!(ks < crit, "eta={eta}: KS {ks} >= {crit}");
        }
    }
}
