//! The iterative deactivation and beam shifting search loop: measurement
//! accumulation, threshold-table deactivation, inactive-beam restoration,
//! stopping conditions, the final decision, and two-phase orchestration.

use crate::beams::{sector_wide_beam, shift_beam, Beam, Codebook};
use crate::channel::{effective_channel, ChannelRealization};
use crate::error::{Error, Result};
use crate::posterior::ThresholdTable;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

/// Per-phase search parameters. The threshold table is shared across trials.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub alpha: f64,
    /// Pilot symbols per measurement block.
    pub n0: u32,
    /// Maximum pilot symbols this phase may spend.
    pub budget: u64,
    pub noise_var: f64,
    pub tx_power: f64,
    pub table: Arc<ThresholdTable>,
    /// Stopping Condition II (two comparable adjacent beams) enabled.
    pub enable_cond2: bool,
    /// Inactive-beam restoration enabled.
    pub enable_restore: bool,
    /// Beam shifting on an adjacent-stop decision enabled.
    pub enable_shift: bool,
}

impl SearchConfig {
    pub fn new(table: Arc<ThresholdTable>, budget: u64, noise_var: f64, tx_power: f64) -> Self {
        Self {
            alpha: table.alpha,
            n0: 1,
            budget,
            noise_var,
            tx_power,
            table,
            enable_cond2: true,
            enable_restore: true,
            enable_shift: true,
        }
    }

    fn validate(&self, n_beams: usize) -> Result<()> {
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0.5, 1), got {}", self.alpha)));
        }
        if self.n0 == 0 {
            return Err(Error::Config("n0 must be at least 1".into()));
        }
        if !(self.noise_var > 0.0) || !(self.tx_power > 0.0) {
            return Err(Error::Config("noise_var and tx_power must be positive".into()));
        }
        if self.budget < self.n0 as u64 * n_beams as u64 {
            return Err(Error::Config(format!(
                "budget {} cannot cover one sweep of {n_beams} beams at n0 = {}",
                self.budget, self.n0
            )));
        }
        Ok(())
    }
}

/// Why the loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopFlag {
    Running,
    /// Condition I: one active beam left.
    SingleStop,
    /// Condition II: two comparable adjacent beams left.
    AdjacentStop,
    /// Condition III: not enough budget for another iteration.
    BudgetStop,
}

/// Live search state over one codebook.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub iteration: u32,
    /// Active beam indices, ascending.
    pub active: Vec<usize>,
    /// Accumulated pilots per beam (n0 * measurement count).
    pub pilots: Vec<u64>,
    /// Running-average matched filter output per beam.
    pub running: Vec<Complex64>,
    /// Accumulated statistic T = 2 n P |r|^2 / sigma^2 per beam.
    pub stat: Vec<f64>,
    /// True if the beam was deactivated at any point (restoration included).
    pub ever_deactivated: Vec<bool>,
    /// Total pilots spent, all beams.
    pub spent: u64,
    pub flag: StopFlag,
}

impl SearchState {
    pub fn new(n_beams: usize) -> Self {
        Self {
            iteration: 0,
            active: (0..n_beams).collect(),
            pilots: vec![0; n_beams],
            running: vec![Complex64::new(0.0, 0.0); n_beams],
            stat: vec![0.0; n_beams],
            ever_deactivated: vec![false; n_beams],
            spent: 0,
            flag: StopFlag::Running,
        }
    }

    /// Index of the strongest active beam by statistic (equivalently |r|).
    pub fn leader(&self) -> usize {
        let mut best = self.active[0];
        for &i in &self.active[1..] {
            if self.stat[i] > self.stat[best] {
                best = i;
            }
        }
        best
    }
}

/// One measurement block of beam `index`: draws the sufficient statistic of
/// an n0-pilot block, a complex Gaussian with mean h and variance
/// sigma^2/(n0 P), folds it into the running average, and recomputes T.
pub fn measure<R: Rng + ?Sized>(
    state: &mut SearchState,
    index: usize,
    channel_h: Complex64,
    config: &SearchConfig,
    rng: &mut R,
) {
    let n0 = config.n0 as u64;
    let block_var = config.noise_var / (config.n0 as f64 * config.tx_power);
    let s = (0.5 * block_var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let obs = channel_h + Complex64::new(s * re, s * im);

    let old_n = state.pilots[index];
    let new_n = old_n + n0;
    let w_new = n0 as f64 / new_n as f64;
    state.running[index] = state.running[index] * (1.0 - w_new) + obs * w_new;
    state.pilots[index] = new_n;
    state.stat[index] =
        2.0 * new_n as f64 * config.tx_power * state.running[index].norm_sqr() / config.noise_var;
    state.spent += n0;
}

/// Deactivation sweep per the threshold-table rule: every active beam other
/// than the leader whose statistic falls below tau_alpha(T_leader) leaves the
/// active set. Returns the removed indices.
pub fn deactivate(state: &mut SearchState, config: &SearchConfig) -> Vec<usize> {
    let leader = state.leader();
    let tau = config.table.lookup(state.stat[leader]);
    if tau <= 0.0 {
        return Vec::new();
    }
    // The runner-up short-circuit: nothing leaves when even the weakest
    // survivor clears the threshold.
    let removed: Vec<usize> = state
        .active
        .iter()
        .copied()
        .filter(|&i| i != leader && state.stat[i] < tau)
        .collect();
    if !removed.is_empty() {
        state.active.retain(|i| !removed.contains(i));
        for &i in &removed {
            state.ever_deactivated[i] = true;
        }
    }
    removed
}

/// Restoration: if the global-maximum running output belongs to an inactive
/// beam, measure it up to the common pilot count (charged to the budget) and
/// re-admit it. Sets BudgetStop if the catch-up cannot be afforded.
pub fn restore<R: Rng + ?Sized>(
    state: &mut SearchState,
    channels: &[Complex64],
    config: &SearchConfig,
    rng: &mut R,
) {
    let mut best = 0usize;
    for i in 1..state.running.len() {
        if state.running[i].norm() > state.running[best].norm() {
            best = i;
        }
    }
    if state.active.contains(&best) {
        return;
    }
    let target = state.pilots[state.leader()];
    while state.pilots[best] < target {
        if state.spent + config.n0 as u64 > config.budget {
            state.flag = StopFlag::BudgetStop;
            return;
        }
        measure(state, best, channels[best], config, rng);
    }
    state.active.push(best);
    state.active.sort_unstable();
}

/// Evaluate the stopping conditions in precedence order I > II > III.
pub fn check_stop(state: &SearchState, config: &SearchConfig) -> StopFlag {
    if state.active.len() == 1 {
        return StopFlag::SingleStop;
    }
    if config.enable_cond2 && state.active.len() == 2 {
        let (a, b) = (state.active[0], state.active[1]);
        if b - a == 1 {
            let (ta, tb) = (state.stat[a], state.stat[b]);
            let (hi, lo) = if ta >= tb { (ta, tb) } else { (tb, ta) };
            if lo > 0.0 && hi / lo < 2.0 {
                return StopFlag::AdjacentStop;
            }
        }
    }
    if state.spent + config.n0 as u64 * state.active.len() as u64 > config.budget {
        return StopFlag::BudgetStop;
    }
    StopFlag::Running
}

/// How the decided beam was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionSource {
    Codebook,
    Shifted,
}

/// Final output of one phase.
#[derive(Debug, Clone)]
pub struct Decision {
    pub beam: Beam,
    pub beam_index: usize,
    pub source: DecisionSource,
    pub overhead: u64,
    pub flag: StopFlag,
}

/// Decision rule: the strongest active beam, shifted half a beam width
/// toward its adjacent rival on an adjacent-stop.
pub fn decide(state: &SearchState, codebook: &Codebook, config: &SearchConfig) -> Result<Decision> {
    if state.flag == StopFlag::Running {
        return Err(Error::Config("decide called on a running search".into()));
    }
    let leader = state.leader();
    if state.flag == StopFlag::AdjacentStop && config.enable_shift {
        let other = *state.active.iter().find(|&&i| i != leader).unwrap();
        let beam =
            shift_beam(&codebook.array, &codebook.beams[leader], codebook.beams[other].center)?;
        return Ok(Decision {
            beam,
            beam_index: leader,
            source: DecisionSource::Shifted,
            overhead: state.spent,
            flag: state.flag,
        });
    }
    Ok(Decision {
        beam: codebook.beams[leader].clone(),
        beam_index: leader,
        source: DecisionSource::Codebook,
        overhead: state.spent,
        flag: state.flag,
    })
}

/// Run one full phase of the search over `codebook`, with `channels[i]` the
/// effective scalar channel of beam i. Returns the decision and final state.
pub fn run_phase<R: Rng + ?Sized>(
    codebook: &Codebook,
    channels: &[Complex64],
    config: &SearchConfig,
    rng: &mut R,
) -> Result<(Decision, SearchState)> {
    let n_beams = codebook.beams.len();
    if channels.len() != n_beams {
        return Err(Error::Config(format!(
            "got {} effective channels for {n_beams} beams",
            channels.len()
        )));
    }
    config.validate(n_beams)?;
    let mut state = SearchState::new(n_beams);
    loop {
        state.iteration += 1;
        for i in 0..n_beams {
            if state.active.contains(&i) {
                measure(&mut state, i, channels[i], config, rng);
            }
        }
        deactivate(&mut state, config);
        if config.enable_restore {
            restore(&mut state, channels, config, rng);
            if state.flag == StopFlag::BudgetStop {
                break;
            }
        }
        state.flag = check_stop(&state, config);
        if state.flag != StopFlag::Running {
            break;
        }
    }
    let decision = decide(&state, codebook, config)?;
    Ok((decision, state))
}

/// Outcome of a full two-phase alignment.
#[derive(Debug, Clone)]
pub struct TwoPhaseOutcome {
    pub rx_decision: Decision,
    pub tx_decision: Decision,
    pub total_overhead: u64,
}

/// Two-phase orchestration: Phase 1 scans the Rx codebook under the Tx wide
/// beam with budget `n1`; Phase 2 scans the Tx codebook with the Phase-1 beam
/// fixed, spending whatever budget remains of `n_total`.
pub fn run_two_phase<R: Rng + ?Sized>(
    tx_codebook: &Codebook,
    rx_codebook: &Codebook,
    h: &ChannelRealization,
    config: &SearchConfig,
    n1: u64,
    n_total: u64,
    rng: &mut R,
) -> Result<TwoPhaseOutcome> {
    let s = tx_codebook.beams.len() as u64;
    if n1 + config.n0 as u64 * s >= n_total {
        return Err(Error::Config(format!(
            "phase-1 budget {n1} leaves no room to scan {s} tx beams within {n_total}"
        )));
    }
    let wide = sector_wide_beam(&tx_codebook.array, tx_codebook.sector)?;
    let rx_channels: Vec<Complex64> = rx_codebook
        .beams
        .iter()
        .map(|u| effective_channel(h, u, &wide))
        .collect::<Result<_>>()?;
    let mut phase1 = config.clone();
    phase1.budget = n1;
    let (rx_decision, rx_state) = run_phase(rx_codebook, &rx_channels, &phase1, rng)?;

    let tx_channels: Vec<Complex64> = tx_codebook
        .beams
        .iter()
        .map(|w| effective_channel(h, &rx_decision.beam, w))
        .collect::<Result<_>>()?;
    let mut phase2 = config.clone();
    phase2.budget = n_total - rx_state.spent;
    let (tx_decision, tx_state) = run_phase(tx_codebook, &tx_channels, &phase2, rng)?;

    Ok(TwoPhaseOutcome {
        rx_decision,
        tx_decision,
        total_overhead: rx_state.spent + tx_state.spent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beams::{dft_codebook, Ula};
    use crate::channel::single_path;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table() -> Arc<ThresholdTable> {
        use std::sync::OnceLock;
        static CACHE: OnceLock<Arc<ThresholdTable>> = OnceLock::new();
        CACHE.get_or_init(|| Arc::new(ThresholdTable::build(0.97, 2048.0, 512).unwrap())).clone()
    }

    fn toy_config(budget: u64, noise_var: f64) -> SearchConfig {
        SearchConfig::new(table(), budget, noise_var, 1.0)
    }

    #[test]
    fn measure_statistics_match_model() {
        // E[T] = 2 + eta with eta = 2 n P |h|^2 / sigma^2.
        let cfg = toy_config(1_000_000, 1.0);
        let h = Complex64::new(1.0, 0.0); // |h|^2 = sigma^2 / P
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let mut st = SearchState::new(1);
            for _ in 0..5 {
                measure(&mut st, 0, h, &cfg, &mut rng);
            }
            acc += st.stat[0];
        }
        let mean = acc / n as f64;
        // eta = 2 * 5 * 1 * 1 = 10, E[T] = 12; var = 4 + 4 eta = 44.
        let tol = 3.0 * (44.0f64).sqrt() / (n as f64).sqrt();
        assert!((mean - 12.0).abs() < tol, "mean T = {mean}");
    }

    #[test]
    fn measure_central_case_and_noiseless_limit() {
        let cfg = toy_config(1_000_000, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let mut st = SearchState::new(1);
            measure(&mut st, 0, Complex64::new(0.0, 0.0), &cfg, &mut rng);
            acc += st.stat[0];
        }
        let mean = acc / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * 2.0 / (n as f64).sqrt(), "central mean {mean}");

        // Vanishing noise: r equals h exactly.
        let cfg = toy_config(1_000_000, 1e-30);
        let mut st = SearchState::new(1);
        let h = Complex64::new(0.3, -0.4);
        measure(&mut st, 0, h, &cfg, &mut rng);
        assert!((st.running[0] - h).norm() < 1e-9);
    }

    #[test]
    fn deactivate_rules() {
        let cfg = toy_config(1_000_000, 1.0);
        let xa = cfg.table.x_alpha;

        // All statistics equal: nothing leaves (tau is below every T).
        let mut st = SearchState::new(4);
        st.stat = vec![20.0, 20.0, 20.0, 20.0];
        assert!(deactivate(&mut st, &cfg).is_empty());
        assert_eq!(st.active.len(), 4);

        // Leader below the onset point: table gives tau = 0, nothing leaves.
        let mut st = SearchState::new(3);
        st.stat = vec![xa * 0.9, 0.0, 0.0];
        assert!(deactivate(&mut st, &cfg).is_empty());

        // Dominant leader: everyone at zero leaves; leader never leaves.
        let mut st = SearchState::new(4);
        st.stat = vec![0.0, 400.0, 0.0, 0.0];
        let removed = deactivate(&mut st, &cfg);
        assert_eq!(removed, vec![0, 2, 3]);
        assert_eq!(st.active, vec![1]);
        assert!(st.ever_deactivated[0] && !st.ever_deactivated[1]);

        // Boundary: just below tau leaves, just above stays.
        let tau = cfg.table.lookup(400.0);
        let mut st = SearchState::new(3);
        st.stat = vec![400.0, tau - 1e-3, tau + 1e-3];
        let removed = deactivate(&mut st, &cfg);
        assert_eq!(removed, vec![1]);
        assert_eq!(st.active, vec![0, 2]);
    }

    #[test]
    fn check_stop_rules() {
        let cfg = toy_config(1000, 1.0);
        let mut st = SearchState::new(16);

        st.active = vec![5];
        assert_eq!(check_stop(&st, &cfg), StopFlag::SingleStop);

        // Adjacent pair with comparable statistics.
        st.active = vec![8, 9];
        st.stat[8] = 10.0;
        st.stat[9] = 6.0;
        assert_eq!(check_stop(&st, &cfg), StopFlag::AdjacentStop);

        // Ratio 2.5: keep running.
        st.stat[9] = 4.0;
        assert_eq!(check_stop(&st, &cfg), StopFlag::Running);

        // Non-adjacent pair never triggers Condition II.
        st.active = vec![8, 10];
        st.stat[10] = 9.0;
        assert_eq!(check_stop(&st, &cfg), StopFlag::Running);

        // Condition II disabled: comparable adjacent pair keeps running.
        let mut no2 = cfg.clone();
        no2.enable_cond2 = false;
        st.active = vec![8, 9];
        st.stat[9] = 6.0;
        assert_eq!(check_stop(&st, &no2), StopFlag::Running);

        // Budget: no room for another 2-beam iteration.
        st.spent = 999;
        assert_eq!(check_stop(&st, &no2), StopFlag::BudgetStop);
        // Condition II wins over budget when both hold.
        assert_eq!(check_stop(&st, &cfg), StopFlag::AdjacentStop);
    }

    #[test]
    fn noiseless_run_selects_true_beam_in_one_sweep() {
        let ula = Ula::new(32);
        let cb = dft_codebook(&ula, (-0.5, 0.5)).unwrap();
        let h = single_path(&Ula::new(1), &ula, Complex64::new(1.0, 0.0), 0.0282, 0.0).unwrap();
        let wide_rx = crate::beams::wide_beam(&Ula::new(1));
        let channels: Vec<Complex64> = cb
            .beams
            .iter()
            .map(|w| effective_channel(&h, &wide_rx, w).unwrap())
            .collect();
        let mut cfg = toy_config(1024, 1e-12);
        cfg.tx_power = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (dec, st) = run_phase(&cb, &channels, &cfg, &mut rng).unwrap();
        assert_eq!(dec.beam_index, 8);
        assert_eq!(dec.flag, StopFlag::SingleStop);
        assert_eq!(st.iteration, 1);
        assert_eq!(dec.overhead, 16);
        assert_eq!(dec.source, DecisionSource::Codebook);
    }

    #[test]
    fn equal_sample_and_budget_invariants() {
        let ula = Ula::new(32);
        let cb = dft_codebook(&ula, (-0.5, 0.5)).unwrap();
        let wide_rx = crate::beams::wide_beam(&Ula::new(1));
        for trial in 0..300u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let phi = -0.5 + (trial as f64 % 16.0) / 16.0 + 0.03;
            let h = single_path(&Ula::new(1), &ula, Complex64::new(1.0, 0.0), phi, 0.0).unwrap();
            let channels: Vec<Complex64> = cb
                .beams
                .iter()
                .map(|w| effective_channel(&h, &wide_rx, w).unwrap())
                .collect();
            // Pre-beamforming SNR -15 dB.
            let cfg = toy_config(1024, 10f64.powf(1.5));
            let (dec, st) = run_phase(&cb, &channels, &cfg, &mut rng).unwrap();
            assert!(st.spent <= cfg.budget, "trial {trial} overspent");
            assert_eq!(dec.overhead, st.spent);
            // Every active beam holds the common per-beam pilot count.
            let common = st.pilots[st.leader()];
            for &i in &st.active {
                assert_eq!(st.pilots[i], common, "trial {trial} beam {i}");
            }
            assert!(st.flag != StopFlag::Running);
        }
    }

    #[test]
    fn restoration_catch_up_charges_budget() {
        let cfg = toy_config(10_000, 1.0);
        let channels = vec![Complex64::new(2.0, 0.0); 4];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut st = SearchState::new(4);
        // Simulate 5 iterations of beams 0..3, with beam 3 deactivated after 2.
        for t in 0..5 {
            for i in 0..4 {
                if i != 3 || t < 2 {
                    measure(&mut st, i, channels[i], &cfg, &mut rng);
                }
            }
        }
        st.active = vec![0, 1, 2];
        st.ever_deactivated[3] = true;
        // Force beam 3 to look like the global maximum.
        st.running[3] = Complex64::new(100.0, 0.0);
        let spent_before = st.spent;
        restore(&mut st, &channels, &cfg, &mut rng);
        assert_eq!(st.active, vec![0, 1, 2, 3]);
        assert_eq!(st.pilots[3], 5);
        assert_eq!(st.spent, spent_before + 3);
    }

    #[test]
    fn restoration_no_op_when_leader_active() {
        let cfg = toy_config(10_000, 1.0);
        let channels = vec![Complex64::new(1.0, 0.0); 3];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut st = SearchState::new(3);
        for i in 0..3 {
            measure(&mut st, i, channels[i], &cfg, &mut rng);
        }
        let before = st.clone();
        restore(&mut st, &channels, &cfg, &mut rng);
        assert_eq!(st.active, before.active);
        assert_eq!(st.spent, before.spent);
    }

    #[test]
    fn decide_shifts_on_adjacent_stop() {
        let ula = Ula::new(32);
        let cb = dft_codebook(&ula, (-0.5, 0.5)).unwrap();
        let cfg = toy_config(1024, 1.0);
        let mut st = SearchState::new(16);
        st.active = vec![8, 9];
        st.stat[8] = 10.0;
        st.stat[9] = 6.0;
        st.flag = StopFlag::AdjacentStop;
        st.spent = 123;
        let dec = decide(&st, &cb, &cfg).unwrap();
        assert_eq!(dec.source, DecisionSource::Shifted);
        assert_eq!(dec.beam_index, 8);
        // Shifted toward beam 9: center moved up by 1/32.
        assert!((dec.beam.center - (cb.beams[8].center + 1.0 / 32.0)).abs() < 1e-12);
        assert_eq!(dec.overhead, 123);

        // Shift disabled: plain codebook leader.
        let mut noshift = cfg.clone();
        noshift.enable_shift = false;
        let dec = decide(&st, &cb, &noshift).unwrap();
        assert_eq!(dec.source, DecisionSource::Codebook);
        assert_eq!(dec.beam_index, 8);

        // Budget stop never shifts.
        st.flag = StopFlag::BudgetStop;
        let dec = decide(&st, &cb, &cfg).unwrap();
        assert_eq!(dec.source, DecisionSource::Codebook);
    }

    #[test]
    fn two_phase_noiseless_matches_oracle_pair() {
        let tx = Ula::new(64);
        let rx = Ula::new(16);
        let tx_cb = dft_codebook(&tx, (-0.5, 0.5)).unwrap();
        let rx_cb = dft_codebook(&rx, (-1.0, 1.0)).unwrap();
        // Path on both grids: tx center s=24, rx center l=5.
        let phi = tx_cb.beams[24].center;
        let psi = rx_cb.beams[5].center;
        let h = single_path(&rx, &tx, Complex64::new(1.0, 0.0), phi, psi).unwrap();
        let cfg = toy_config(1024, 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n1 = 1024 - 32 * 4;
        let out = run_two_phase(&tx_cb, &rx_cb, &h, &cfg, n1, 1024, &mut rng).unwrap();
        assert_eq!(out.rx_decision.beam_index, 5);
        assert_eq!(out.tx_decision.beam_index, 24);
        assert!(out.total_overhead <= 1024);
        // Noiseless: one sweep per phase.
        assert_eq!(out.total_overhead, 16 + 32);

        // Budget rule violation rejected.
        assert!(run_two_phase(&tx_cb, &rx_cb, &h, &cfg, 1024, 1024, &mut rng).is_err());
    }

    #[test]
    fn run_deterministic_under_seed() {
        let ula = Ula::new(32);
        let cb = dft_codebook(&ula, (-0.5, 0.5)).unwrap();
        let wide_rx = crate::beams::wide_beam(&Ula::new(1));
        let h = single_path(&Ula::new(1), &ula, Complex64::new(1.0, 0.0), 0.0594, 0.0).unwrap();
        let channels: Vec<Complex64> = cb
            .beams
            .iter()
            .map(|w| effective_channel(&h, &wide_rx, w).unwrap())
            .collect();
        let cfg = toy_config(1024, 10.0);
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (d, s) = run_phase(&cb, &channels, &cfg, &mut rng).unwrap();
            (d.beam_index, d.overhead, s.iteration, d.source)
        };
        assert_eq!(run(42), run(42));
    }
}
