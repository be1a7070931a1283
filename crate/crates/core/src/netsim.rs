//! Deterministic, seedable transfer environment.
//!
//! The simulator composes a saturating stream gain, pipelining
//! amortization of per-file round trips, a CPU processing ceiling and the
//! end-to-end capacity cap into a throughput model, and a DVFS-style
//! cubic-frequency power model into an energy meter. A clamped AR(1)
//! process supplies the contending load that makes repeated transfers
//! noisy. Sessions implement the tuner's session contract and the module
//! can batch-generate synthetic historical logs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logstore::{DatasetSpec, LogTable, TransferLogEntry, TunableParams};
use crate::surface::ThetaGrid;
use crate::tuner::{interval_for_class, Sample, TransferRecord, TransferSession};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    BadLine { line: usize, text: String },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: bad value for `{key}`: {value}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
}

/// Network and end-system model parameters for one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub name: String,
    pub bandwidth_mbps: f64,
    pub rtt_ms: f64,
    pub buf_size_mb: f64,
    pub v_read_mbps: f64,
    pub v_write_mbps: f64,
    /// Lognormal sigma of the per-step multiplicative throughput noise.
    pub noise_sigma: f64,
    /// AR(1) coefficient of the contending-load process.
    pub load_phi: f64,
    /// Innovation sigma of the contending-load process.
    pub load_sigma: f64,
    /// Initial contending load, in `[0, 1)`.
    pub load_init: f64,
    /// GHz of aggregate CPU capacity needed per Gbps moved.
    pub cpu_capacity_ghz_per_gbps: f64,
    /// Per-stream saturation factor of the stream gain `1 - rho^(cc*p)`.
    pub stream_rho: f64,
}

impl SimScenario {
    /// Named testbed presets. Disk speeds default to twice the link rate
    /// so the link is the binding cap unless overridden.
    pub fn preset(name: &str) -> Result<Self, ScenarioError> {
        let (bandwidth_mbps, rtt_ms, buf_size_mb) = match name {
            "chameleon" => (10_000.0, 34.0, 40.0),
            "cloudlab" => (1_000.0, 38.0, 4.5),
            "intercloud" => (1_000.0, 45.0, 4.5),
            other => return Err(ScenarioError::UnknownPreset(other.to_string())),
        };
        Ok(Self {
            name: name.to_string(),
            bandwidth_mbps,
            rtt_ms,
            buf_size_mb,
            v_read_mbps: 2.0 * bandwidth_mbps,
            v_write_mbps: 2.0 * bandwidth_mbps,
            noise_sigma: 0.05,
            load_phi: 0.9,
            load_sigma: 0.05,
            load_init: 0.05,
            cpu_capacity_ghz_per_gbps: 1.0,
            stream_rho: 0.5,
        })
    }

    pub fn preset_names() -> [&'static str; 3] {
        ["chameleon", "cloudlab", "intercloud"]
    }

    /// Applies `key = value` override lines (# starts a comment). A
    /// `preset` key switches the base scenario first.
    pub fn apply_config(&mut self, text: &str) -> Result<(), ScenarioError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let Some((key, value)) = stripped.split_once('=') else {
                return Err(ScenarioError::BadLine {
                    line,
                    text: raw.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key == "preset" {
                *self = SimScenario::preset(value)?;
                continue;
            }
            if key == "name" {
                self.name = value.to_string();
                continue;
            }
            let slot: &mut f64 = match key {
                "bandwidth_mbps" => &mut self.bandwidth_mbps,
                "rtt_ms" => &mut self.rtt_ms,
                "buf_size_mb" => &mut self.buf_size_mb,
                "v_read_mbps" => &mut self.v_read_mbps,
                "v_write_mbps" => &mut self.v_write_mbps,
                "noise_sigma" => &mut self.noise_sigma,
                "load_phi" => &mut self.load_phi,
                "load_sigma" => &mut self.load_sigma,
                "load_init" => &mut self.load_init,
                "cpu_capacity_ghz_per_gbps" => &mut self.cpu_capacity_ghz_per_gbps,
                "stream_rho" => &mut self.stream_rho,
                _ => {
                    return Err(ScenarioError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            };
            *slot = value.parse().map_err(|_| ScenarioError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
            })?;
        }
        Ok(())
    }

    /// Hard ceiling on end-to-end throughput: link, disk read, disk write.
    pub fn capacity_cap_mbps(&self) -> f64 {
        self.bandwidth_mbps
            .min(self.v_read_mbps)
            .min(self.v_write_mbps)
    }
}

/// Transfer-attributable power model: a flat active-transfer overhead plus
/// per-core static and cubic-in-frequency dynamic terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModelParams {
    pub p_base_w: f64,
    pub alpha_w_per_core: f64,
    pub beta_w_per_ghz3: f64,
}

impl Default for EnergyModelParams {
    fn default() -> Self {
        Self {
            p_base_w: 10.0,
            alpha_w_per_core: 2.0,
            beta_w_per_ghz3: 1.5,
        }
    }
}

/// Noiseless throughput for a parameter setting under a given contending
/// load.
///
/// With available bandwidth `B = b * (1 - l_ctd)`:
/// stream gain `1 - rho^(cc*p)`, pipelining gain `T_f / (T_f + rtt/pp)`
/// where `T_f` is the per-file transfer time at `B` (1 when `rtt` is 0),
/// CPU gain `min(1, cpu_num * cpu_freq / (gamma * B_gbps))`; the product
/// is capped by disk speeds and the link rate.
pub fn throughput_model(
    theta: &TunableParams,
    scenario: &SimScenario,
    avg_file_size_bytes: f64,
    l_ctd: f64,
) -> f64 {
    let b_avail = scenario.bandwidth_mbps * (1.0 - l_ctd);
    if b_avail <= 0.0 {
        return 0.0;
    }
    let stream_gain = 1.0 - scenario.stream_rho.powi(theta.streams() as i32);
    let pipelining_gain = if scenario.rtt_ms == 0.0 {
        1.0
    } else {
        // per-file transfer time in ms at the available rate
        let t_file_ms = avg_file_size_bytes * 8.0 / (b_avail * 1000.0);
        t_file_ms / (t_file_ms + scenario.rtt_ms / theta.pp as f64)
    };
    let cpu_gain = (theta.cpu_num as f64 * theta.cpu_freq_ghz
        / (scenario.cpu_capacity_ghz_per_gbps * b_avail / 1000.0))
        .min(1.0);
    (b_avail * stream_gain * pipelining_gain * cpu_gain)
        .min(scenario.v_read_mbps)
        .min(scenario.v_write_mbps)
        .min(scenario.bandwidth_mbps)
}

/// Transfer-attributable power draw in watts.
pub fn energy_power(theta: &TunableParams, params: &EnergyModelParams) -> f64 {
    params.p_base_w
        + theta.cpu_num as f64
            * (params.alpha_w_per_core + params.beta_w_per_ghz3 * theta.cpu_freq_ghz.powi(3))
}

/// Mutable simulation state owned by one session.
#[derive(Debug, Clone)]
pub struct SimState {
    pub clock_s: f64,
    pub l_ctd: f64,
    pub bytes_remaining: f64,
    pub cumulative_energy_j: f64,
    rng: ChaCha8Rng,
}

/// Outcome of one simulation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub bytes_moved: f64,
    pub joules: f64,
    pub inst_throughput_mbps: f64,
}

/// A simulated transfer session driving [`SimState`] under one scenario.
///
/// Before [`TransferSession::start`] the session is idle-active: the clock
/// runs and the meter charges the base power (an RTT probe), but no bytes
/// move.
#[derive(Debug, Clone)]
pub struct SimSession {
    pub scenario: SimScenario,
    pub dataset: DatasetSpec,
    pub energy_params: EnergyModelParams,
    state: SimState,
    theta: Option<TunableParams>,
    sim_dt_s: f64,
    last_throughput_mbps: f64,
}

impl SimSession {
    pub fn new(
        scenario: SimScenario,
        dataset: DatasetSpec,
        energy_params: EnergyModelParams,
        seed: u64,
    ) -> Self {
        let state = SimState {
            clock_s: 0.0,
            l_ctd: scenario.load_init,
            bytes_remaining: dataset.total_size_bytes as f64,
            cumulative_energy_j: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        Self {
            scenario,
            dataset,
            energy_params,
            state,
            theta: None,
            sim_dt_s: 1.0,
            last_throughput_mbps: 0.0,
        }
    }

    pub fn with_sim_dt(mut self, dt_s: f64) -> Self {
        assert!(dt_s > 0.0);
        self.sim_dt_s = dt_s;
        self
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn current_theta(&self) -> Option<TunableParams> {
        self.theta
    }

    /// Advances the state by `dt_s`: the contending load takes one AR(1)
    /// step, throughput picks up multiplicative lognormal noise (clamped
    /// at `1 + 5 sigma`), bytes move (never more than remain) and the
    /// meter charges power for the full step.
    pub fn step(&mut self, dt_s: f64) -> StepOutcome {
        debug_assert!(dt_s > 0.0);
        let s = &self.scenario;
        if s.load_sigma > 0.0 {
            let noise = Normal::new(0.0, s.load_sigma).expect("load sigma is finite");
            let eps = noise.sample(&mut self.state.rng);
            self.state.l_ctd = (s.load_phi * self.state.l_ctd + eps).clamp(0.0, 0.95);
        } else {
            self.state.l_ctd = (s.load_phi * self.state.l_ctd).clamp(0.0, 0.95);
        }

        let (bytes_moved, throughput, power) = match self.theta {
            Some(theta) => {
                let clean = throughput_model(
                    &theta,
                    s,
                    self.dataset.avg_file_size_bytes,
                    self.state.l_ctd,
                );
                let factor = if s.noise_sigma > 0.0 {
                    let noise = LogNormal::new(0.0, s.noise_sigma).expect("noise sigma is finite");
                    noise
                        .sample(&mut self.state.rng)
                        .min(1.0 + 5.0 * s.noise_sigma)
                } else {
                    1.0
                };
                let throughput = clean * factor;
                let moved = (throughput * 1e6 / 8.0 * dt_s).min(self.state.bytes_remaining);
                (moved, throughput, energy_power(&theta, &self.energy_params))
            }
            // idle-active probe phase
            None => (0.0, 0.0, self.energy_params.p_base_w),
        };

        let joules = power * dt_s;
        self.state.bytes_remaining -= bytes_moved;
        self.state.cumulative_energy_j += joules;
        self.state.clock_s += dt_s;
        self.last_throughput_mbps = throughput;
        StepOutcome {
            bytes_moved,
            joules,
            inst_throughput_mbps: throughput,
        }
    }
}

impl TransferSession for SimSession {
    fn start(&mut self, theta: TunableParams) {
        self.theta = Some(theta);
    }

    fn update_params(&mut self, theta: TunableParams) {
        self.theta = Some(theta);
    }

    fn sample_instantaneous_throughput(&self) -> f64 {
        self.last_throughput_mbps
    }

    fn sample_rtt(&self) -> f64 {
        self.scenario.rtt_ms
    }

    fn sample_instantaneous_energy(&self) -> f64 {
        self.state.cumulative_energy_j
    }

    fn elapsed(&self) -> f64 {
        self.state.clock_s
    }

    fn remaining_bytes(&self) -> f64 {
        self.state.bytes_remaining
    }

    fn is_complete(&self) -> bool {
        self.state.bytes_remaining <= 0.0
    }

    fn advance(&mut self, dt_s: f64) {
        let mut left = dt_s;
        while left > 1e-12 && !(self.theta.is_some() && self.is_complete()) {
            let dt = left.min(self.sim_dt_s);
            self.step(dt);
            left -= dt;
        }
    }
}

fn derive_seed(master: u64, counter: u64) -> u64 {
    // splitmix64
    let mut z = master
        .wrapping_add(counter.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulates one complete transfer at fixed parameters and returns the
/// achieved mean throughput and total energy. No probe phase: historical
/// logs describe whole transfers.
fn simulate_whole_transfer(
    scenario: &SimScenario,
    dataset: &DatasetSpec,
    energy_params: &EnergyModelParams,
    theta: TunableParams,
    seed: u64,
) -> (f64, f64) {
    let mut session = SimSession::new(scenario.clone(), *dataset, *energy_params, seed);
    session.start(theta);
    while !session.is_complete() {
        session.step(session.sim_dt_s);
    }
    let duration = session.state.clock_s;
    let mean_throughput = if duration > 0.0 {
        dataset.total_size_bytes as f64 * 8.0 / duration / 1e6
    } else {
        0.0
    };
    (mean_throughput, session.state.cumulative_energy_j)
}

/// Batch-simulates every (scenario, dataset, grid point, repeat)
/// combination with a derived per-cell seed and collects the outcomes as
/// a historical log table.
pub fn generate_logs(
    scenarios: &[SimScenario],
    grid: &ThetaGrid,
    datasets: &[DatasetSpec],
    repeats: usize,
    seed: u64,
) -> LogTable {
    let energy_params = EnergyModelParams::default();
    let mut entries = Vec::new();
    let mut counter = 0u64;
    for scenario in scenarios {
        for dataset in datasets {
            for theta in grid.points() {
                for _ in 0..repeats {
                    counter += 1;
                    let (throughput, energy) = simulate_whole_transfer(
                        scenario,
                        dataset,
                        &energy_params,
                        theta,
                        derive_seed(seed, counter),
                    );
                    entries.push(TransferLogEntry {
                        entry_no: counter,
                        file_size_kb: dataset.avg_file_size_bytes / 1000.0,
                        num_files: dataset.num_files as f64,
                        rtt_ms: scenario.rtt_ms,
                        buf_size_mb: scenario.buf_size_mb,
                        bandwidth_mbps: scenario.bandwidth_mbps,
                        throughput_mbps: throughput,
                        energy_j: energy,
                        params: theta,
                    });
                }
            }
        }
    }
    LogTable::new(entries, "synthetic").expect("sequential entry numbers are unique")
}

/// Runs a full simulated transfer at a constant parameter setting,
/// recording it the same way the tuners do: a probe phase first, then one
/// sample per check interval.
pub fn run_baseline(
    scenario: &SimScenario,
    dataset: &DatasetSpec,
    energy_params: &EnergyModelParams,
    fixed_theta: TunableParams,
    seed: u64,
    probe_duration_s: f64,
) -> TransferRecord {
    let interval = interval_for_class(dataset.size_class());
    let mut session = SimSession::new(scenario.clone(), *dataset, *energy_params, seed);
    session.advance(probe_duration_s);
    session.start(fixed_theta);
    let t_start = session.elapsed();
    let mut samples = Vec::new();
    while !session.is_complete() {
        session.advance(interval);
        samples.push(Sample {
            t_s: session.elapsed(),
            inst_throughput_mbps: session.sample_instantaneous_throughput(),
            cumulative_energy_j: session.sample_instantaneous_energy(),
            remaining_bytes: session.remaining_bytes(),
            theta: fixed_theta,
        });
    }
    let t_end = session.elapsed();
    let moved = dataset.total_size_bytes as f64 - session.remaining_bytes();
    let mean = if t_end > t_start {
        moved * 8.0 / (t_end - t_start) / 1e6
    } else {
        0.0
    };
    TransferRecord {
        t_start_s: t_start,
        t_end_s: t_end,
        theta_history: vec![(t_start, fixed_theta)],
        mean_throughput_mbps: mean,
        total_energy_j: session.sample_instantaneous_energy(),
        samples,
        model_misses: 0,
    }
}
