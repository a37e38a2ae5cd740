//! Comparison schemes and the rate metric: exhaustive search with a fixed
//! time split, the best-codebook-beam oracle, the infinite-resolution oracle,
//! and spectrum efficiency.

use crate::beams::{sector_wide_beam, steered_beam, Beam, Codebook, Ula};
use crate::channel::{effective_channel, ChannelRealization};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

/// Spectrum efficiency log2(1 + P |u^H H w|^2 / sigma^2) in bits/s/Hz.
pub fn spectrum_efficiency(
    h: &ChannelRealization,
    rx_beam: &Beam,
    tx_beam: &Beam,
    tx_power: f64,
    noise_var: f64,
) -> Result<f64> {
    let eff = effective_channel(h, rx_beam, tx_beam)?;
    Ok((1.0 + tx_power * eff.norm_sqr() / noise_var).log2())
}

/// The noiseless two-phase selection: first the Rx beam maximizing the
/// wide-beam effective channel, then the Tx beam given that Rx beam.
/// Returns (rx index, tx index).
pub fn oracle_codebook_pair(
    h: &ChannelRealization,
    rx_codebook: &Codebook,
    tx_codebook: &Codebook,
) -> Result<(usize, usize)> {
    let wide = sector_wide_beam(&tx_codebook.array, tx_codebook.sector)?;
    let rx_best = argmax_by_channel(h, &rx_codebook.beams, |u| effective_channel(h, u, &wide))?;
    let u = &rx_codebook.beams[rx_best];
    let tx_best = argmax_by_channel(h, &tx_codebook.beams, |w| effective_channel(h, u, w))?;
    Ok((rx_best, tx_best))
}

fn argmax_by_channel<F>(_h: &ChannelRealization, beams: &[Beam], f: F) -> Result<usize>
where
    F: Fn(&Beam) -> Result<Complex64>,
{
    let mut best = 0usize;
    let mut best_v = -1.0f64;
    for (i, b) in beams.iter().enumerate() {
        let v = f(b)?.norm_sqr();
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    Ok(best)
}

/// Sequential continuous-angle oracle: steer the Rx beam anywhere in its
/// sector against the Tx wide beam, then the Tx beam given the Rx choice.
/// Each 1-D maximization runs on a grid `grid_density` times finer than the
/// codebook beam spacing, polished by golden-section around the best point.
pub fn oracle_infinite_resolution(
    h: &ChannelRealization,
    rx_array: &Ula,
    tx_array: &Ula,
    rx_sector: (f64, f64),
    tx_sector: (f64, f64),
    grid_density: usize,
) -> Result<(Beam, Beam)> {
    if grid_density < 16 {
        return Err(Error::Config(format!("grid_density must be >= 16, got {grid_density}")));
    }
    let wide = sector_wide_beam(tx_array, tx_sector)?;
    let rx_obj = |psi: f64| -> Result<f64> {
        Ok(effective_channel(h, &steered_beam(rx_array, psi)?, &wide)?.norm_sqr())
    };
    let psi = maximize_on_sector(rx_sector, rx_array.n_antennas, grid_density, &rx_obj)?;
    let u = steered_beam(rx_array, psi)?;
    let tx_obj = |phi: f64| -> Result<f64> {
        Ok(effective_channel(h, &u, &steered_beam(tx_array, phi)?)?.norm_sqr())
    };
    let phi = maximize_on_sector(tx_sector, tx_array.n_antennas, grid_density, &tx_obj)?;
    Ok((u, steered_beam(tx_array, phi)?))
}

fn maximize_on_sector<F>(
    sector: (f64, f64),
    n_antennas: usize,
    grid_density: usize,
    objective: &F,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let spacing = 2.0 / n_antennas as f64;
    let step = spacing / grid_density as f64;
    let n = ((sector.1 - sector.0) / step).ceil() as usize;
    let mut best_x = sector.0;
    let mut best_v = objective(sector.0)?;
    for i in 1..=n {
        let x = (sector.0 + i as f64 * step).min(sector.1);
        let v = objective(x)?;
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }
    // Golden-section polish on the bracketing pair of grid cells.
    let mut a = (best_x - step).max(sector.0);
    let mut b = (best_x + step).min(sector.1);
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c)?;
    let mut fd = objective(d)?;
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Exhaustive search with a fixed (phase-1, phase-2) pilot split: every Rx
/// beam gets split.0/L pilots against the Tx wide beam, the argmax |r| wins,
/// then every Tx beam gets split.1/S pilots. Returns (rx index, tx index).
pub fn exhaustive_search<R: Rng + ?Sized>(
    h: &ChannelRealization,
    rx_codebook: &Codebook,
    tx_codebook: &Codebook,
    split: (u64, u64),
    tx_power: f64,
    noise_var: f64,
    rng: &mut R,
) -> Result<(usize, usize)> {
    let l = rx_codebook.beams.len() as u64;
    let s = tx_codebook.beams.len() as u64;
    if split.0 == 0 || split.1 == 0 || split.0 % l != 0 || split.1 % s != 0 {
        return Err(Error::Config(format!(
            "split ({}, {}) must be positive and divisible by the beam counts ({l}, {s})",
            split.0, split.1
        )));
    }
    let wide = sector_wide_beam(&tx_codebook.array, tx_codebook.sector)?;
    let rx_best = scan_argmax(
        &rx_codebook.beams,
        |u| effective_channel(h, u, &wide),
        split.0 / l,
        tx_power,
        noise_var,
        rng,
    )?;
    let u = &rx_codebook.beams[rx_best];
    let tx_best = scan_argmax(
        &tx_codebook.beams,
        |w| effective_channel(h, u, w),
        split.1 / s,
        tx_power,
        noise_var,
        rng,
    )?;
    Ok((rx_best, tx_best))
}

fn scan_argmax<R, F>(
    beams: &[Beam],
    channel_of: F,
    pilots_per_beam: u64,
    tx_power: f64,
    noise_var: f64,
    rng: &mut R,
) -> Result<usize>
where
    R: Rng + ?Sized,
    F: Fn(&Beam) -> Result<Complex64>,
{
    let var = noise_var / (pilots_per_beam as f64 * tx_power);
    let sd = (0.5 * var).sqrt();
    let mut best = 0usize;
    let mut best_v = -1.0f64;
    for (i, b) in beams.iter().enumerate() {
        let eff = channel_of(b)?;
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let r = eff + Complex64::new(sd * re, sd * im);
        let v = r.norm_sqr();
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    Ok(best)
}

/// Pick the split maximizing the mean exhaustive-search rate over `n_trials`
/// channels drawn by `draw`, paired across candidates. Ties break to the
/// earliest grid entry.
pub fn best_split_search<R, D>(
    rx_codebook: &Codebook,
    tx_codebook: &Codebook,
    split_grid: &[(u64, u64)],
    n_trials: usize,
    tx_power: f64,
    noise_var: f64,
    draw: D,
    rng: &mut R,
) -> Result<(u64, u64)>
where
    R: Rng + ?Sized,
    D: Fn(&mut dyn FnMut() -> f64) -> Result<ChannelRealization>,
{
    if split_grid.is_empty() {
        return Err(Error::Config("split grid must be non-empty".into()));
    }
    let channels: Vec<ChannelRealization> = (0..n_trials)
        .map(|_| draw(&mut || rng.gen::<f64>()))
        .collect::<Result<_>>()?;
    let mut best = split_grid[0];
    let mut best_rate = f64::NEG_INFINITY;
    for (k, &split) in split_grid.iter().enumerate() {
        let mut acc = 0.0;
        for (t, h) in channels.iter().enumerate() {
            // Paired noise per (trial) so splits see identical randomness.
            let mut trial_rng = rand_chacha::ChaCha8Rng::seed_from_u64(
                0x9e37_79b9_7f4a_7c15u64 ^ (t as u64) << 1,
            );
            let (ri, ti) = exhaustive_search(
                h,
                rx_codebook,
                tx_codebook,
                split,
                tx_power,
                noise_var,
                &mut trial_rng,
            )?;
            acc += spectrum_efficiency(
                h,
                &rx_codebook.beams[ri],
                &tx_codebook.beams[ti],
                tx_power,
                noise_var,
            )?;
        }
        let mean = acc / n_trials as f64;
        if mean > best_rate + 1e-12 {
            best_rate = mean;
            best = split_grid[k];
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beams::dft_codebook;
    use crate::channel::{los_channel, single_path, LosConfig};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Ula, Ula, Codebook, Codebook) {
        let rx = Ula::new(16);
        let tx = Ula::new(64);
        let rx_cb = dft_codebook(&rx, (-1.0, 1.0)).unwrap();
        let tx_cb = dft_codebook(&tx, (-0.5, 0.5)).unwrap();
        (rx, tx, rx_cb, tx_cb)
    }

    #[test]
    fn spectrum_efficiency_known_points() {
        let (rx, tx, rx_cb, tx_cb) = setup();
        let phi = tx_cb.beams[24].center;
        let psi = rx_cb.beams[5].center;
        // Post-beamforming SNR P |h|^2 / sigma^2 = 1 => rate 1; = 3 => rate 2.
        let g2: f64 = 1.0 / (16.0 * 64.0);
        let h = single_path(&rx, &tx, Complex64::new(g2.sqrt(), 0.0), phi, psi).unwrap();
        let r = spectrum_efficiency(&h, &rx_cb.beams[5], &tx_cb.beams[24], 1.0, 1.0).unwrap();
        assert!((r - 1.0).abs() < 1e-9, "rate {r}");
        let r = spectrum_efficiency(&h, &rx_cb.beams[5], &tx_cb.beams[24], 3.0, 1.0).unwrap();
        assert!((r - 2.0).abs() < 1e-9, "rate {r}");
        // Orthogonal beam: zero channel, zero rate.
        let r = spectrum_efficiency(&h, &rx_cb.beams[5], &tx_cb.beams[3], 1.0, 1.0).unwrap();
        assert!(r.abs() < 1e-9);
    }

    #[test]
    fn codebook_oracle_finds_centered_pair() {
        let (rx, tx, rx_cb, tx_cb) = setup();
        let phi = tx_cb.beams[24].center;
        let psi = rx_cb.beams[5].center;
        let h = single_path(&rx, &tx, Complex64::new(1.0, 0.0), phi, psi).unwrap();
        assert_eq!(oracle_codebook_pair(&h, &rx_cb, &tx_cb).unwrap(), (5, 24));
    }

    #[test]
    fn infinite_resolution_hits_exact_angles() {
        let (rx, tx, _, _) = setup();
        let gamma = Complex64::new(0.8, 0.6);
        let h = single_path(&rx, &tx, gamma, 0.1234, -0.4321).unwrap();
        let (u, w) =
            oracle_infinite_resolution(&h, &rx, &tx, (-1.0, 1.0), (-0.5, 0.5), 64).unwrap();
        assert!((u.center - (-0.4321)).abs() < 1e-6);
        assert!((w.center - 0.1234).abs() < 1e-6);
        let rate = spectrum_efficiency(&h, &u, &w, 1.0, 1.0).unwrap();
        let want = (1.0 + gamma.norm_sqr() * 16.0 * 64.0).log2();
        assert!((rate - want).abs() < 1e-6, "rate {rate} want {want}");
    }

    #[test]
    fn oracle_ordering_on_random_channels() {
        let (rx, tx, rx_cb, tx_cb) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cfg = LosConfig::default();
        for _ in 0..100 {
            let h = los_channel(&rx, &tx, &cfg, &mut rng).unwrap();
            let (ri, ti) = oracle_codebook_pair(&h, &rx_cb, &tx_cb).unwrap();
            let cb_rate =
                spectrum_efficiency(&h, &rx_cb.beams[ri], &tx_cb.beams[ti], 1.0, 1.0).unwrap();
            let (u, w) =
                oracle_infinite_resolution(&h, &rx, &tx, (-1.0, 1.0), (-0.5, 0.5), 16).unwrap();
            let inf_rate = spectrum_efficiency(&h, &u, &w, 1.0, 1.0).unwrap();
            assert!(inf_rate >= cb_rate - 1e-9, "inf {inf_rate} < cb {cb_rate}");
        }
    }

    #[test]
    fn infinite_resolution_grid_convergence() {
        let (rx, tx, _, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cfg = LosConfig::default();
        for _ in 0..20 {
            let h = los_channel(&rx, &tx, &cfg, &mut rng).unwrap();
            let coarse =
                oracle_infinite_resolution(&h, &rx, &tx, (-1.0, 1.0), (-0.5, 0.5), 16).unwrap();
            let fine =
                oracle_infinite_resolution(&h, &rx, &tx, (-1.0, 1.0), (-0.5, 0.5), 64).unwrap();
            let rc = spectrum_efficiency(&h, &coarse.0, &coarse.1, 1.0, 1.0).unwrap();
            let rf = spectrum_efficiency(&h, &fine.0, &fine.1, 1.0, 1.0).unwrap();
            assert!((rf - rc).abs() < 0.01, "coarse {rc} fine {rf}");
        }
    }

    #[test]
    fn exhaustive_search_noiseless_is_oracle() {
        let (rx, tx, rx_cb, tx_cb) = setup();
        let phi = tx_cb.beams[10].center;
        let psi = rx_cb.beams[12].center;
        let h = single_path(&rx, &tx, Complex64::new(1.0, 0.0), phi, psi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let got = exhaustive_search(&h, &rx_cb, &tx_cb, (16, 32), 1.0, 1e-18, &mut rng).unwrap();
        assert_eq!(got, oracle_codebook_pair(&h, &rx_cb, &tx_cb).unwrap());
        // Misaligned splits rejected.
        assert!(exhaustive_search(&h, &rx_cb, &tx_cb, (17, 32), 1.0, 1.0, &mut rng).is_err());
        assert!(exhaustive_search(&h, &rx_cb, &tx_cb, (16, 0), 1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn exhaustive_rate_nondecreasing_in_budget() {
        let (rx, tx, rx_cb, tx_cb) = setup();
        let cfg = LosConfig::default();
        let noise = 10f64.powf(1.5); // -15 dB
        let mean_at = |split: (u64, u64)| {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut acc = 0.0;
            let n = 400;
            for _ in 0..n {
                let h = los_channel(&rx, &tx, &cfg, &mut rng).unwrap();
                let mut noise_rng = ChaCha8Rng::seed_from_u64(3);
                let (ri, ti) = exhaustive_search(
                    &h, &rx_cb, &tx_cb, split, 1.0, noise, &mut noise_rng,
                )
                .unwrap();
                acc += spectrum_efficiency(
                    &h,
                    &rx_cb.beams[ri],
                    &tx_cb.beams[ti],
                    1.0,
                    noise,
                )
                .unwrap();
            }
            acc / n as f64
        };
        let small = mean_at((16, 32));
        let large = mean_at((160, 320));
        assert!(large >= small, "rate fell with budget: {small} -> {large}");
    }

    #[test]
    fn best_split_prefers_feasible_maximum() {
        let (rx, tx, rx_cb, tx_cb) = setup();
        let cfg = LosConfig::default();
        let grid = [
            (16u64, 32u64),
            (32, 64),
            (64, 128),
            (96, 192),
            (128, 160),
            (160, 128),
            (48, 96),
            (80, 160),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let split = best_split_search(
            &rx_cb,
            &tx_cb,
            &grid,
            60,
            1.0,
            10f64.powf(1.5),
            |uniform| {
                let mut seed = [0u8; 32];
                for chunk in seed.chunks_mut(8) {
                    chunk.copy_from_slice(&(uniform() * u64::MAX as f64).to_bits().to_le_bytes());
                }
                let mut r = ChaCha8Rng::from_seed(seed);
                los_channel(&rx, &tx, &cfg, &mut r)
            },
            &mut rng,
        )
        .unwrap();
        assert!(grid.contains(&split));
        // At -15 dB more pilots help, so the tiny split should not win.
        assert_ne!(split, (16, 32));
    }
}
