//! Config-driven Monte Carlo experiment harness: seeded parallel trials over
//! (scheme, alpha, SNR) cells, aggregation into overhead/rate summaries, and
//! CSV/JSON emission.

use crate::baselines::{exhaustive_search, oracle_codebook_pair, spectrum_efficiency};
use crate::beams::{dft_codebook, Codebook, Ula};
use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::idbs::{run_two_phase, SearchConfig, StopFlag};
use crate::posterior::ThresholdTable;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// Array geometry: antenna counts and scanned sin-angle sectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraysConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub tx_sector: (f64, f64),
    pub rx_sector: (f64, f64),
}

impl Default for ArraysConfig {
    fn default() -> Self {
        Self { n_tx: 64, n_rx: 16, tx_sector: (-0.5, 0.5), rx_sector: (-1.0, 1.0) }
    }
}

fn default_n0() -> u32 {
    1
}

fn default_n1_margin() -> u64 {
    4
}

/// One experiment: a grid of (scheme, alpha, SNR) cells, each run for
/// `n_trials` independent channel realizations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub arrays: ArraysConfig,
    pub alphas: Vec<f64>,
    pub snr_db: Vec<f64>,
    /// Total pilot budget per trial.
    pub budget: u64,
    /// Phase-1 budget rule: N1 = budget - n1_margin * n_tx_beams.
    #[serde(default = "default_n1_margin")]
    pub n1_margin: u64,
    #[serde(default = "default_n0")]
    pub n0: u32,
    pub n_trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
}

/// Search scheme under test, including ablation variants of the main search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Idbs,
    IdbsNoShift,
    IdbsNoCond2,
    IdbsNoRestore,
    Es,
    Oracles,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Self::Idbs => "idbs",
            Self::IdbsNoShift => "idbs_no_shift",
            Self::IdbsNoCond2 => "idbs_no_cond2",
            Self::IdbsNoRestore => "idbs_no_restore",
            Self::Es => "es",
            Self::Oracles => "oracles",
        }
    }
}

/// Outcome of a single trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub overhead: u64,
    pub rate: f64,
    pub budget_stop: bool,
    pub adjacent_stop: bool,
}

/// One aggregated (scheme, alpha, SNR) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scheme: String,
    pub alpha: f64,
    pub snr_db: f64,
    pub mean_overhead: f64,
    pub p90_overhead: f64,
    pub mean_rate: f64,
    pub frac_budget_stop: f64,
    pub frac_adjacent_stop: f64,
    pub n_trials: usize,
    /// 95% normal CI half-width of the mean overhead.
    pub ci_halfwidth: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.alphas.is_empty() || self.snr_db.is_empty() || self.schemes.is_empty() {
            return Err(Error::Config("alphas, snr_db and schemes must be non-empty".into()));
        }
        for &a in &self.alphas {
            if !(a > 0.5 && a < 1.0) {
                return Err(Error::Config(format!("alpha must be in (0.5, 1), got {a}")));
            }
        }
        if self.arrays.n_tx == 0 || self.arrays.n_rx == 0 {
            return Err(Error::Config("antenna counts must be positive".into()));
        }
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// SplitMix64 finalizer over the packed cell coordinates: a per-trial seed
/// that no reordering or worker count can perturb.
pub fn trial_seed(seed: u64, cell: u64, trial: u64) -> u64 {
    let mut z = seed ^ cell.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ trial.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Aggregate a cell's trial records: mean and nearest-rank 90th percentile of
/// the overhead, mean rate, stop-flag fractions, and the 95% CI half-width.
pub fn aggregate(
    scheme: Scheme,
    alpha: f64,
    snr_db: f64,
    records: &[TrialRecord],
) -> Result<AggregateRow> {
    if records.is_empty() {
        return Err(Error::Config("cannot aggregate zero trials".into()));
    }
    let n = records.len();
    let mean_overhead = records.iter().map(|r| r.overhead as f64).sum::<f64>() / n as f64;
    let mean_rate = records.iter().map(|r| r.rate).sum::<f64>() / n as f64;
    let mut sorted: Vec<u64> = records.iter().map(|r| r.overhead).collect();
    sorted.sort_unstable();
    // Nearest-rank: the ceil(0.9 n)-th smallest value.
    let rank = ((0.9 * n as f64).ceil() as usize).clamp(1, n);
    let p90_overhead = sorted[rank - 1] as f64;
    let var = records
        .iter()
        .map(|r| {
            let d = r.overhead as f64 - mean_overhead;
            d * d
        })
        .sum::<f64>()
        / n as f64;
    let ci_halfwidth = 1.96 * (var / n as f64).sqrt();
    let frac_budget_stop =
        records.iter().filter(|r| r.budget_stop).count() as f64 / n as f64;
    let frac_adjacent_stop =
        records.iter().filter(|r| r.adjacent_stop).count() as f64 / n as f64;
    Ok(AggregateRow {
        scheme: scheme.label().to_string(),
        alpha,
        snr_db,
        mean_overhead,
        p90_overhead,
        mean_rate,
        frac_budget_stop,
        frac_adjacent_stop,
        n_trials: n,
        ci_halfwidth,
    })
}

fn one_trial(
    config: &ExperimentConfig,
    scheme: Scheme,
    alpha: f64,
    snr_db: f64,
    table: &Arc<ThresholdTable>,
    rx: &Ula,
    tx: &Ula,
    rx_cb: &Codebook,
    tx_cb: &Codebook,
    seed: u64,
) -> Result<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = config.scenario.draw(rx, tx, &mut rng)?;
    let tx_power = 1.0;
    let noise_var = 10f64.powf(-snr_db / 10.0);
    match scheme {
        Scheme::Oracles => {
            let (ri, ti) = oracle_codebook_pair(&h, rx_cb, tx_cb)?;
            let rate = spectrum_efficiency(
                &h,
                &rx_cb.beams[ri],
                &tx_cb.beams[ti],
                tx_power,
                noise_var,
            )?;
            Ok(TrialRecord { overhead: 0, rate, budget_stop: false, adjacent_stop: false })
        }
        Scheme::Es => {
            let l = rx_cb.beams.len() as u64;
            let s = tx_cb.beams.len() as u64;
            // Fixed split: half the budget per phase, rounded down to whole
            // sweeps, at least one pilot per beam each.
            let p1 = (config.budget / 2 / l).max(1);
            let p2 = ((config.budget - p1 * l) / s).max(1);
            let split = (p1 * l, p2 * s);
            let (ri, ti) = exhaustive_search(&h, rx_cb, tx_cb, split, tx_power, noise_var, &mut rng)?;
            let rate = spectrum_efficiency(
                &h,
                &rx_cb.beams[ri],
                &tx_cb.beams[ti],
                tx_power,
                noise_var,
            )?;
            Ok(TrialRecord {
                overhead: split.0 + split.1,
                rate,
                budget_stop: false,
                adjacent_stop: false,
            })
        }
        _ => {
            let mut search = SearchConfig::new(table.clone(), config.budget, noise_var, tx_power);
            search.alpha = alpha;
            search.n0 = config.n0;
            match scheme {
                Scheme::IdbsNoShift => search.enable_shift = false,
                Scheme::IdbsNoCond2 => search.enable_cond2 = false,
                Scheme::IdbsNoRestore => search.enable_restore = false,
                _ => {}
            }
            let n1 = config
                .budget
                .saturating_sub(self_margin(config, tx_cb.beams.len() as u64));
            let out = run_two_phase(tx_cb, rx_cb, &h, &search, n1, config.budget, &mut rng)?;
            let rate = spectrum_efficiency(
                &h,
                &out.rx_decision.beam,
                &out.tx_decision.beam,
                tx_power,
                noise_var,
            )?;
            let budget_stop = out.rx_decision.flag == StopFlag::BudgetStop
                || out.tx_decision.flag == StopFlag::BudgetStop;
            let adjacent_stop = out.rx_decision.flag == StopFlag::AdjacentStop
                || out.tx_decision.flag == StopFlag::AdjacentStop;
            Ok(TrialRecord { overhead: out.total_overhead, rate, budget_stop, adjacent_stop })
        }
    }
}

fn self_margin(config: &ExperimentConfig, s: u64) -> u64 {
    config.n1_margin * s
}

/// Build (or fetch) one threshold table per alpha.
pub fn table_set(alphas: &[f64]) -> Result<HashMap<u64, Arc<ThresholdTable>>> {
    let mut map = HashMap::new();
    for &a in alphas {
        if !map.contains_key(&a.to_bits()) {
            map.insert(a.to_bits(), Arc::new(ThresholdTable::build(a, 4096.0, 400)?));
        }
    }
    Ok(map)
}

/// Run the full experiment grid. Trials fan out over a worker pool; per-trial
/// seeds depend only on (config.seed, cell, trial), so the output is
/// deterministic regardless of worker count or cell order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<AggregateRow>> {
    run_experiment_with_tables(config, &table_set(&config.alphas)?)
}

/// Same as [`run_experiment`] but with caller-provided threshold tables.
pub fn run_experiment_with_tables(
    config: &ExperimentConfig,
    tables: &HashMap<u64, Arc<ThresholdTable>>,
) -> Result<Vec<AggregateRow>> {
    config.validate()?;
    let rx = Ula::new(config.arrays.n_rx);
    let tx = Ula::new(config.arrays.n_tx);
    let rx_cb = dft_codebook(&rx, config.arrays.rx_sector)?;
    let tx_cb = dft_codebook(&tx, config.arrays.tx_sector)?;
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &scheme in &config.schemes {
        for &alpha in &config.alphas {
            let table = tables
                .get(&alpha.to_bits())
                .ok_or_else(|| Error::Config(format!("no threshold table for alpha {alpha}")))?;
            for &snr in &config.snr_db {
                let records: Vec<TrialRecord> = (0..config.n_trials)
                    .into_par_iter()
                    .map(|t| {
                        one_trial(
                            config,
                            scheme,
                            alpha,
                            snr,
                            table,
                            &rx,
                            &tx,
                            &rx_cb,
                            &tx_cb,
                            trial_seed(config.seed, cell, t as u64),
                        )
                    })
                    .collect::<Result<_>>()?;
                rows.push(aggregate(scheme, alpha, snr, &records)?);
                cell += 1;
            }
        }
    }
    Ok(rows)
}

const CSV_HEADER: &str = "scheme,alpha,snr_db,mean_overhead,p90_overhead,mean_rate,\
frac_budget_stop,frac_adjacent_stop,n_trials,ci_halfwidth";

/// Write rows as CSV with a fixed column order and LF line endings.
pub fn emit_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let io_err = |source| Error::Io { path: path.display().to_string(), source };
    let mut out = std::fs::File::create(path).map_err(io_err)?;
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.scheme,
            r.alpha,
            r.snr_db,
            r.mean_overhead,
            r.p90_overhead,
            r.mean_rate,
            r.frac_budget_stop,
            r.frac_adjacent_stop,
            r.n_trials,
            r.ci_halfwidth
        ));
    }
    out.write_all(text.as_bytes()).map_err(io_err)
}

/// Read back a CSV produced by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!("unexpected CSV header: {other:?}")));
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            return Err(Error::Config(format!("line {}: expected 10 columns", i + 2)));
        }
        let num = |j: usize| -> Result<f64> {
            cols[j]
                .parse()
                .map_err(|_| Error::Config(format!("line {}: bad number {:?}", i + 2, cols[j])))
        };
        rows.push(AggregateRow {
            scheme: cols[0].to_string(),
            alpha: num(1)?,
            snr_db: num(2)?,
            mean_overhead: num(3)?,
            p90_overhead: num(4)?,
            mean_rate: num(5)?,
            frac_budget_stop: num(6)?,
            frac_adjacent_stop: num(7)?,
            n_trials: num(8)? as usize,
            ci_halfwidth: num(9)?,
        });
    }
    Ok(rows)
}

/// Write rows as a JSON array.
pub fn emit_json(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(rows)?;
    std::fs::write(path, text)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })
}
