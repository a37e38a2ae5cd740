//! ULA geometry, DFT codebooks, beamforming gains and beam shifting.
//!
//! Angles are handled throughout in sin-angle space, where DFT beam centers
//! are evenly spaced and beams on the grid are mutually orthogonal.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ula {
    pub n_antennas: usize,
    /// Element spacing over wavelength, d/lambda. Half-wavelength by default.
    pub spacing_over_lambda: f64,
}

impl Ula {
    pub fn new(n_antennas: usize) -> Self {
        Self { n_antennas, spacing_over_lambda: 0.5 }
    }

    pub fn with_spacing(n_antennas: usize, spacing_over_lambda: f64) -> Result<Self> {
        if n_antennas == 0 {
            return Err(Error::Config("array needs at least one antenna".into()));
        }
        if !(spacing_over_lambda > 0.0) {
            return Err(Error::Config(format!("spacing must be positive, got {spacing_over_lambda}")));
        }
        Ok(Self { n_antennas, spacing_over_lambda })
    }
}

/// Unnormalized array response a(psi): element k is exp(-j 2 pi (d/lambda) k psi).
pub fn array_response(array: &Ula, sin_angle: f64) -> Result<Vec<Complex64>> {
    if !(sin_angle.is_finite() && sin_angle.abs() <= 1.0) {
        return Err(Error::Domain(format!("sin-angle must lie in [-1, 1], got {sin_angle}")));
    }
    let step = -TAU * array.spacing_over_lambda * sin_angle;
    Ok((0..array.n_antennas)
        .map(|k| Complex64::from_polar(1.0, step * k as f64))
        .collect())
}

/// A unit-norm beamforming vector with its intended angular coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub weights: Vec<Complex64>,
    /// Beam center in sin-angle space.
    pub center: f64,
    /// Intended coverage interval [center - 1/N, center + 1/N].
    pub coverage: (f64, f64),
}

impl Beam {
    /// |w^H a(phi)|^2 at the given sin-angle.
    pub fn gain(&self, array: &Ula, sin_angle: f64) -> Result<f64> {
        let a = array_response(array, sin_angle)?;
        let inner: Complex64 =
            self.weights.iter().zip(&a).map(|(w, r)| w.conj() * r).sum();
        Ok(inner.norm_sqr())
    }
}

/// Ordered DFT codebook covering a sector of sin-angle space.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub array: Ula,
    pub beams: Vec<Beam>,
    pub sector: (f64, f64),
}

/// Build the DFT codebook for a sector whose width is a multiple of the
/// inter-beam distance 2/N. Beam s is centred at sector_start + (2s+1)/N,
/// so adjacent indices cover adjacent intervals.
pub fn dft_codebook(array: &Ula, sector: (f64, f64)) -> Result<Codebook> {
    let n = array.n_antennas as f64;
    let width = sector.1 - sector.0;
    if !(width > 0.0) || sector.0 < -1.0 - 1e-12 || sector.1 > 1.0 + 1e-12 {
        return Err(Error::Config(format!("bad sector [{}, {}]", sector.0, sector.1)));
    }
    let spacing = 2.0 / n;
    let count = width / spacing;
    let beams_in_sector = count.round();
    if (count - beams_in_sector).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "sector width {width} is not a multiple of the inter-beam distance {spacing}"
        )));
    }
    let beams = (0..beams_in_sector as usize)
        .map(|s| {
            let center = sector.0 + (2.0 * s as f64 + 1.0) / n;
            steered_beam(array, center)
        })
        .collect::<Result<_>>()?;
    Ok(Codebook { array: *array, beams, sector })
}

/// Unit-norm DFT beam steered at an arbitrary sin-angle center.
pub fn steered_beam(array: &Ula, center: f64) -> Result<Beam> {
    let n = array.n_antennas as f64;
    let norm = 1.0 / n.sqrt();
    let weights = array_response(array, center)?
        .into_iter()
        .map(|w| w * norm)
        .collect();
    Ok(Beam { weights, center, coverage: (center - 1.0 / n, center + 1.0 / n) })
}

/// The Phase-1 wide beam: a single active element, exactly flat unit gain
/// over the whole angular range.
pub fn wide_beam(array: &Ula) -> Beam {
    let mut weights = vec![Complex64::new(0.0, 0.0); array.n_antennas];
    weights[0] = Complex64::new(1.0, 0.0);
    Beam { weights, center: 0.0, coverage: (-1.0, 1.0) }
}

/// A synthesized flat beam covering a sin-angle sector: power gain close to
/// (full range)/(sector width) inside the sector, little leakage outside.
/// Synthesis: a linear-FM sweep refined by alternating projections between
/// the target magnitude profile and the realizable weight space (the angular
/// grid operator is orthogonal, so the projection is just its adjoint). A
/// one-element array falls back to the omnidirectional unit-gain probe.
pub fn sector_wide_beam(array: &Ula, sector: (f64, f64)) -> Result<Beam> {
    let width = sector.1 - sector.0;
    if !(width > 0.0) || sector.0 < -1.0 - 1e-12 || sector.1 > 1.0 + 1e-12 {
        return Err(Error::Config(format!("bad sector [{}, {}]", sector.0, sector.1)));
    }
    let n = array.n_antennas;
    let center = 0.5 * (sector.0 + sector.1);
    if n == 1 {
        return Ok(Beam { weights: vec![Complex64::new(1.0, 0.0)], center, coverage: sector });
    }
    // The synthesis is deterministic and moderately expensive; memoize per
    // (array size, sector).
    use std::collections::HashMap;
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64, u64), Vec<Complex64>>>> = OnceLock::new();
    let key = (n, sector.0.to_bits(), sector.1.to_bits());
    if let Some(hit) = CACHE.get_or_init(|| Mutex::new(HashMap::new())).lock().unwrap().get(&key) {
        return Ok(Beam { weights: hit.clone(), center, coverage: sector });
    }

    let norm = 1.0 / (n as f64).sqrt();
    let sweep = width / (2.0 * (n - 1) as f64);
    let mut weights: Vec<Complex64> = (0..n)
        .map(|k| {
            let k = k as f64;
            let phase = std::f64::consts::PI * (sector.0 * k + sweep * k * k);
            Complex64::new(0.0, phase).exp() * norm
        })
        .collect();

    // Alternating projections on a uniform grid over the full sin range. The
    // grid size is a multiple of every harmonic, making the columns of the
    // response operator orthogonal.
    let grid = (16 * n.next_power_of_two()).max(1024);
    let amp = (2.0 / width).sqrt();
    let phis: Vec<f64> = (0..grid).map(|i| -1.0 + 2.0 * i as f64 / grid as f64).collect();
    for _ in 0..300 {
        // Forward: g(phi) = sum_k w_k e^{-j pi k phi}.
        let g: Vec<Complex64> = phis
            .iter()
            .map(|&phi| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, w) in weights.iter().enumerate() {
                    acc += w * Complex64::new(0.0, -std::f64::consts::PI * k as f64 * phi).exp();
                }
                acc
            })
            .collect();
        // Impose the target magnitude, keep the phase.
        let gt: Vec<Complex64> = phis
            .iter()
            .zip(&g)
            .map(|(&phi, v)| {
                let inside = phi >= sector.0 && phi < sector.1;
                let mag = if inside { amp } else { 0.0 };
                let len = v.norm();
                if len > 0.0 {
                    v * (mag / len)
                } else {
                    Complex64::new(mag, 0.0)
                }
            })
            .collect();
        // Back-project (adjoint over the orthogonal grid) and renormalize.
        for (k, w) in weights.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (&phi, v) in phis.iter().zip(&gt) {
                acc += v * Complex64::new(0.0, std::f64::consts::PI * k as f64 * phi).exp();
            }
            *w = acc;
        }
        let norm2: f64 = weights.iter().map(|w| w.norm_sqr()).sum();
        let scale = 1.0 / norm2.sqrt();
        for w in &mut weights {
            *w *= scale;
        }
    }
    CACHE.get().unwrap().lock().unwrap().insert(key, weights.clone());
    Ok(Beam { weights, center, coverage: sector })
}

/// Shift a beam by half a beam width (1/N in sin-angle) towards the adjacent
/// beam centred at `toward_center`, by progressive phase modulation of the
/// weights. The shifted beam peaks on the old coverage boundary.
pub fn shift_beam(array: &Ula, beam: &Beam, toward_center: f64) -> Result<Beam> {
    let n = array.n_antennas as f64;
    let gap = toward_center - beam.center;
    if (gap.abs() - 2.0 / n).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "shift target {toward_center} is not adjacent to beam centre {}",
            beam.center
        )));
    }
    let delta = gap.signum() / n;
    let step = -TAU * array.spacing_over_lambda * delta;
    let weights = beam
        .weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * Complex64::from_polar(1.0, step * k as f64))
        .collect();
    let center = beam.center + delta;
    Ok(Beam { weights, center, coverage: (center - 1.0 / n, center + 1.0 / n) })
}
