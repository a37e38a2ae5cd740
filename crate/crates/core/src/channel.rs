//! Channel generation: fixed single path, LOS Rician, and NLOS multi-path
//! Rician scenarios, plus effective-channel computation.
//!
//! Every generator normalizes the average total path power to 1, so the
//! pre-beamforming SNR of a simulation is exactly tx_power / noise_var.

use crate::beams::{array_response, Beam, Ula};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// One discrete propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    pub tx_sin_angle: f64,
    pub rx_sin_angle: f64,
    /// Share of the average total power carried by this path.
    pub power_fraction: f64,
}

/// Ground-truth path list; fractions sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub paths: Vec<PathComponent>,
}

impl PathSet {
    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::Config("path set must hold at least one path".into()));
        }
        let total: f64 = self.paths.iter().map(|p| p.power_fraction).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("power fractions sum to {total}, expected 1")));
        }
        Ok(())
    }
}

/// A drawn channel matrix with its generating paths kept for oracle baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub n_rx: usize,
    pub n_tx: usize,
    /// Row-major N_R x N_T matrix, H = sum_i gain_i a_R(psi_i) a_T(phi_i)^H.
    pub matrix: Vec<Complex64>,
    pub paths: PathSet,
}

impl ChannelRealization {
    fn from_paths(rx: &Ula, tx: &Ula, paths: PathSet) -> Result<Self> {
        let (n_rx, n_tx) = (rx.n_antennas, tx.n_antennas);
        let mut matrix = vec![Complex64::new(0.0, 0.0); n_rx * n_tx];
        for p in &paths.paths {
            let ar = array_response(rx, p.rx_sin_angle)?;
            let at = array_response(tx, p.tx_sin_angle)?;
            for (r, &arv) in ar.iter().enumerate() {
                for (c, &atv) in at.iter().enumerate() {
                    matrix[r * n_tx + c] += p.gain * arv * atv.conj();
                }
            }
        }
        Ok(Self { n_rx, n_tx, matrix, paths })
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.matrix.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// LOS scenario parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosConfig {
    /// Rician K-factor in dB: dominant-to-diffuse power ratio.
    pub k_factor_db: f64,
    /// Number of discrete sub-paths realizing the diffuse component.
    pub n_scatter: usize,
    /// Tx sin-angle sector for all path angles.
    pub tx_sector: (f64, f64),
    /// Rx sin-angle sector for all path angles.
    pub rx_sector: (f64, f64),
}

impl Default for LosConfig {
    fn default() -> Self {
        Self { k_factor_db: 13.2, n_scatter: 10, tx_sector: (-0.5, 0.5), rx_sector: (-1.0, 1.0) }
    }
}

/// NLOS scenario parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlosConfig {
    /// Mean of the Poisson path count (paths = max(1, Poisson)).
    pub poisson_mean: f64,
    /// Per-path Rician K-factor in dB.
    pub k_factor_db: f64,
    /// Exponential decay constant of the power-fraction profile.
    pub decay: f64,
    pub tx_sector: (f64, f64),
    pub rx_sector: (f64, f64),
}

impl Default for NlosConfig {
    fn default() -> Self {
        Self {
            poisson_mean: 1.8,
            k_factor_db: 6.0,
            decay: 1.5,
            tx_sector: (-0.5, 0.5),
            rx_sector: (-1.0, 1.0),
        }
    }
}

/// Channel scenario selector, deserialized from experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ScenarioConfig {
    Single { gain_re: f64, gain_im: f64, tx_sin_angle: f64, rx_sin_angle: f64 },
    Los(LosConfig),
    Nlos(NlosConfig),
}

impl ScenarioConfig {
    pub fn draw<R: Rng + ?Sized>(&self, rx: &Ula, tx: &Ula, rng: &mut R) -> Result<ChannelRealization> {
        match *self {
            Self::Single { gain_re, gain_im, tx_sin_angle, rx_sin_angle } => {
                single_path(rx, tx, Complex64::new(gain_re, gain_im), tx_sin_angle, rx_sin_angle)
            }
            Self::Los(cfg) => los_channel(rx, tx, &cfg, rng),
            Self::Nlos(cfg) => nlos_channel(rx, tx, &cfg, rng),
        }
    }
}

/// Deterministic rank-1 channel with a single path.
pub fn single_path(
    rx: &Ula,
    tx: &Ula,
    gain: Complex64,
    tx_sin_angle: f64,
    rx_sin_angle: f64,
) -> Result<ChannelRealization> {
    let paths = PathSet {
        paths: vec![PathComponent { gain, tx_sin_angle, rx_sin_angle, power_fraction: 1.0 }],
    };
    ChannelRealization::from_paths(rx, tx, paths)
}

fn uniform_in<R: Rng + ?Sized>(sector: (f64, f64), rng: &mut R) -> f64 {
    sector.0 + rng.gen::<f64>() * (sector.1 - sector.0)
}

fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Rician LOS channel: one dominant path plus `n_scatter` diffuse sub-paths
/// whose total average power is 1/K of the dominant's. Average total power 1.
pub fn los_channel<R: Rng + ?Sized>(
    rx: &Ula,
    tx: &Ula,
    cfg: &LosConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if cfg.n_scatter == 0 {
        return Err(Error::Config("n_scatter must be at least 1".into()));
    }
    let k = 10f64.powf(cfg.k_factor_db / 10.0);
    let dominant_power = k / (1.0 + k);
    let diffuse_power = 1.0 / (1.0 + k);
    let mut paths = Vec::with_capacity(1 + cfg.n_scatter);
    let phase = rng.gen::<f64>() * TAU;
    paths.push(PathComponent {
        gain: Complex64::from_polar(dominant_power.sqrt(), phase),
        tx_sin_angle: uniform_in(cfg.tx_sector, rng),
        rx_sin_angle: uniform_in(cfg.rx_sector, rng),
        power_fraction: dominant_power,
    });
    let per_scatter = diffuse_power / cfg.n_scatter as f64;
    for _ in 0..cfg.n_scatter {
        paths.push(PathComponent {
            gain: complex_gaussian(per_scatter, rng),
            tx_sin_angle: uniform_in(cfg.tx_sector, rng),
            rx_sin_angle: uniform_in(cfg.rx_sector, rng),
            power_fraction: per_scatter,
        });
    }
    ChannelRealization::from_paths(rx, tx, PathSet { paths })
}

/// Draw the NLOS power fractions: proportional to exp(-i/decay) * E_i with
/// E_i i.i.d. unit exponentials, sorted descending, normalized to sum 1.
pub fn nlos_power_fractions<R: Rng + ?Sized>(n: usize, decay: f64, rng: &mut R) -> Vec<f64> {
    let mut f: Vec<f64> = (0..n)
        .map(|i| (-(i as f64) / decay).exp() * rng.sample::<f64, _>(Exp1))
        .collect();
    f.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = f.iter().sum();
    if total > 0.0 {
        for v in &mut f {
            *v /= total;
        }
    } else {
        f[0] = 1.0;
    }
    f
}

/// NLOS multi-path Rician channel: max(1, Poisson(mean)) paths at uniform
/// angles, each a per-path Rician coefficient scaled by its power fraction.
pub fn nlos_channel<R: Rng + ?Sized>(
    rx: &Ula,
    tx: &Ula,
    cfg: &NlosConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if !(cfg.poisson_mean > 0.0) {
        return Err(Error::Config(format!("poisson_mean must be positive, got {}", cfg.poisson_mean)));
    }
    let pois = Poisson::new(cfg.poisson_mean)
        .map_err(|e| Error::Config(format!("bad poisson mean: {e}")))?;
    let count = (pois.sample(rng) as usize).max(1);
    let fractions = nlos_power_fractions(count, cfg.decay, rng);
    let k = 10f64.powf(cfg.k_factor_db / 10.0);
    let los_amp = (k / (1.0 + k)).sqrt();
    let diffuse_var = 1.0 / (1.0 + k);
    let paths = fractions
        .into_iter()
        .map(|fraction| {
            let phase = rng.gen::<f64>() * TAU;
            let rician = Complex64::from_polar(los_amp, phase) + complex_gaussian(diffuse_var, rng);
            PathComponent {
                gain: fraction.sqrt() * rician,
                tx_sin_angle: uniform_in(cfg.tx_sector, rng),
                rx_sin_angle: uniform_in(cfg.rx_sector, rng),
                power_fraction: fraction,
            }
        })
        .collect();
    ChannelRealization::from_paths(rx, tx, PathSet { paths })
}

/// Effective scalar channel h = u^H H w after beamforming on both ends.
pub fn effective_channel(h: &ChannelRealization, rx_beam: &Beam, tx_beam: &Beam) -> Result<Complex64> {
    if rx_beam.weights.len() != h.n_rx || tx_beam.weights.len() != h.n_tx {
        return Err(Error::Config(format!(
            "beam dimensions ({}, {}) do not match channel ({}, {})",
            rx_beam.weights.len(),
            tx_beam.weights.len(),
            h.n_rx,
            h.n_tx
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (r, &u) in rx_beam.weights.iter().enumerate() {
        let row = &h.matrix[r * h.n_tx..(r + 1) * h.n_tx];
        let hw: Complex64 = row.iter().zip(&tx_beam.weights).map(|(&m, &w)| m * w).sum();
        acc += u.conj() * hw;
    }
    Ok(acc)
}
