//! Python bindings: the Bayesian test function, threshold tables, codebook
//! geometry, channel scenarios, the search loop, deactivation bounds, and the
//! experiment harness.

use idbs_core::analysis::{empirical_deactivation_rate, q_bound, union_bound, IdealBeamModel};
use idbs_core::beams::{dft_codebook, wide_beam, Ula};
use idbs_core::channel::{effective_channel, ScenarioConfig};
use idbs_core::harness::{run_experiment, ExperimentConfig};
use idbs_core::idbs::{run_two_phase, DecisionSource, SearchConfig, StopFlag};
use idbs_core::posterior::ThresholdTable;
use idbs_core::specfun::{marcum_q1, NoncentralChi2};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::sync::Arc;

fn err(e: idbs_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// f(x, y): posterior probability that the channel behind statistic y is
/// weaker than the one behind x, under the improper uniform prior.
#[pyfunction]
fn test_function(x: f64, y: f64) -> PyResult<f64> {
    idbs_core::posterior::f_series(x, y, 1e-10).map_err(err)
}

/// Same quantity through the direct quadrature oracle.
#[pyfunction]
fn test_function_quadrature(x: f64, y: f64) -> PyResult<f64> {
    idbs_core::posterior::f_quadrature(x, y).map_err(err)
}

/// First-order Marcum Q function Q1(a, b).
#[pyfunction]
fn marcum_q(a: f64, b: f64) -> PyResult<f64> {
    marcum_q1(a, b).map_err(err)
}

/// CDF of the noncentral chi-square with 2 degrees of freedom.
#[pyfunction]
fn ncx2_cdf(x: f64, noncentrality: f64) -> PyResult<f64> {
    NoncentralChi2::new(noncentrality).map_err(err)?.cdf(x).map_err(err)
}

/// Deactivation threshold table for one confidence level alpha.
#[pyclass(name = "ThresholdTable")]
struct PyThresholdTable {
    inner: Arc<ThresholdTable>,
}

#[pymethods]
impl PyThresholdTable {
    #[new]
    #[pyo3(signature = (alpha, x_max=4096.0, n_points=400))]
    fn new(alpha: f64, x_max: f64, n_points: usize) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(ThresholdTable::build(alpha, x_max, n_points).map_err(err)?) })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(ThresholdTable::load_json(&path).map_err(err)?) })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_json(&path).map_err(err)
    }

    /// tau_alpha(x): deactivate beams whose statistic falls below this.
    fn lookup(&self, x: f64) -> f64 {
        self.inner.lookup(x)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    /// Onset point: tau is zero below this leader statistic.
    #[getter]
    fn x_alpha(&self) -> f64 {
        self.inner.x_alpha
    }
}

/// DFT codebook over a sin-angle sector: beam centers and coverage edges.
#[pyclass(name = "Codebook")]
struct PyCodebook {
    inner: idbs_core::beams::Codebook,
}

#[pymethods]
impl PyCodebook {
    #[new]
    fn new(n_antennas: usize, sector: (f64, f64)) -> PyResult<Self> {
        let array = Ula::new(n_antennas);
        Ok(Self { inner: dft_codebook(&array, sector).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.beams.len()
    }

    fn centers(&self) -> Vec<f64> {
        self.inner.beams.iter().map(|b| b.center).collect()
    }

    fn coverage(&self, index: usize) -> PyResult<(f64, f64)> {
        self.inner
            .beams
            .get(index)
            .map(|b| b.coverage)
            .ok_or_else(|| PyValueError::new_err(format!("no beam {index}")))
    }

    /// Power gain of beam `index` toward a sin-angle.
    fn gain(&self, index: usize, sin_angle: f64) -> PyResult<f64> {
        let beam = self
            .inner
            .beams
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("no beam {index}")))?;
        beam.gain(&self.inner.array, sin_angle).map_err(err)
    }
}

/// One full two-phase search over a freshly drawn channel.
///
/// `scenario_json` follows the experiment config schema, for example
/// `{"type": "los", "k_factor_db": 13.2, "n_scatter": 10,
///   "tx_sector": [-0.5, 0.5], "rx_sector": [-1.0, 1.0]}`.
/// Returns a dict with the chosen beam indices, overhead, rate, and flags.
#[pyfunction]
#[pyo3(signature = (scenario_json, table, snr_db, n_tx=64, n_rx=16, budget=1024, seed=0))]
fn search_once(
    py: Python<'_>,
    scenario_json: &str,
    table: &PyThresholdTable,
    snr_db: f64,
    n_tx: usize,
    n_rx: usize,
    budget: u64,
    seed: u64,
) -> PyResult<PyObject> {
    let scenario: ScenarioConfig =
        serde_json::from_str(scenario_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let tx = Ula::new(n_tx);
    let rx = Ula::new(n_rx);
    let tx_cb = dft_codebook(&tx, (-0.5, 0.5)).map_err(err)?;
    let rx_cb = dft_codebook(&rx, (-1.0, 1.0)).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = scenario.draw(&rx, &tx, &mut rng).map_err(err)?;
    let noise_var = 10f64.powf(-snr_db / 10.0);
    let cfg = SearchConfig::new(table.inner.clone(), budget, noise_var, 1.0);
    let n1 = budget.saturating_sub(4 * n_tx as u64);
    let out = run_two_phase(&tx_cb, &rx_cb, &h, &cfg, n1, budget, &mut rng).map_err(err)?;
    let rate = idbs_core::baselines::spectrum_efficiency(
        &h,
        &out.rx_decision.beam,
        &out.tx_decision.beam,
        1.0,
        noise_var,
    )
    .map_err(err)?;
    let dict = pyo3::types::PyDict::new_bound(py);
    dict.set_item("rx_beam", out.rx_decision.beam_index)?;
    dict.set_item("tx_beam", out.tx_decision.beam_index)?;
    dict.set_item("overhead", out.total_overhead)?;
    dict.set_item("rate", rate)?;
    dict.set_item("tx_shifted", out.tx_decision.source == DecisionSource::Shifted)?;
    dict.set_item("budget_stop", out.tx_decision.flag == StopFlag::BudgetStop)?;
    Ok(dict.into())
}

/// Effective scalar channel magnitude |u^H H w| for a single-path channel and
/// a codebook beam pair, with a wide (single-element) probe at the other end.
#[pyfunction]
fn single_path_gain(
    n_tx: usize,
    tx_beam: usize,
    tx_sin_angle: f64,
) -> PyResult<f64> {
    let tx = Ula::new(n_tx);
    let rx = Ula::new(1);
    let cb = dft_codebook(&tx, (-0.5, 0.5)).map_err(err)?;
    let beam = cb
        .beams
        .get(tx_beam)
        .ok_or_else(|| PyValueError::new_err(format!("no beam {tx_beam}")))?;
    let h = idbs_core::channel::single_path(
        &rx,
        &tx,
        num_complex::Complex64::new(1.0, 0.0),
        tx_sin_angle,
        0.0,
    )
    .map_err(err)?;
    Ok(effective_channel(&h, &wide_beam(&rx), beam).map_err(err)?.norm())
}

/// Union bound on the probability the true beam is ever deactivated, under
/// the ideal-beam single-path model with `m` beams.
#[pyfunction]
#[pyo3(signature = (table, snr_db, m=16))]
fn deactivation_bound(table: &PyThresholdTable, snr_db: f64, m: usize) -> PyResult<f64> {
    let model =
        IdealBeamModel::new(m, 10f64.powf(snr_db / 10.0), table.inner.clone()).map_err(err)?;
    union_bound(&model, 40_000, 1e-7).map_err(err)
}

/// Per-iteration deactivation bound q(t) for the same model.
#[pyfunction]
#[pyo3(signature = (table, snr_db, t, m=16))]
fn deactivation_q(table: &PyThresholdTable, snr_db: f64, t: u32, m: usize) -> PyResult<f64> {
    let model =
        IdealBeamModel::new(m, 10f64.powf(snr_db / 10.0), table.inner.clone()).map_err(err)?;
    q_bound(&model, t).map_err(err)
}

/// Monte Carlo frequency of true-beam deactivation in the ideal-beam model.
#[pyfunction]
#[pyo3(signature = (table, snr_db, n_trials, m=16, t_cap=1500, seed=0))]
fn deactivation_rate(
    table: &PyThresholdTable,
    snr_db: f64,
    n_trials: usize,
    m: usize,
    t_cap: u32,
    seed: u64,
) -> PyResult<f64> {
    let model =
        IdealBeamModel::new(m, 10f64.powf(snr_db / 10.0), table.inner.clone()).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    empirical_deactivation_rate(&model, n_trials, t_cap, &mut rng).map_err(err)
}

/// Run a full experiment from a JSON config string; returns the aggregate
/// rows as a JSON array string.
#[pyfunction]
fn run_experiment_json(config_json: &str) -> PyResult<String> {
    let cfg: ExperimentConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let rows = run_experiment(&cfg).map_err(err)?;
    serde_json::to_string_pretty(&rows).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn idbs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(test_function, m)?)?;
    m.add_function(wrap_pyfunction!(test_function_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(marcum_q, m)?)?;
    m.add_function(wrap_pyfunction!(ncx2_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(search_once, m)?)?;
    m.add_function(wrap_pyfunction!(single_path_gain, m)?)?;
    m.add_function(wrap_pyfunction!(deactivation_bound, m)?)?;
    m.add_function(wrap_pyfunction!(deactivation_q, m)?)?;
    m.add_function(wrap_pyfunction!(deactivation_rate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment_json, m)?)?;
    m.add_class::<PyThresholdTable>()?;
    m.add_class::<PyCodebook>()?;
    Ok(())
}
