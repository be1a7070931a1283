//! Online control loops that keep a running transfer on its SLA.
//!
//! A tuner probes the RTT, fetches an initial parameter setting from the
//! offline model, starts the transfer and then re-queries the model at a
//! fixed cadence with the latest measurements, applying a new setting only
//! when it differs from the current one. The throughput loop queries with
//! the measured instantaneous throughput; the energy loop first projects
//! the transfer's total energy from the meter reading and queries with
//! that.
//!
//! All timing uses the session's own clock through the
//! [`TransferSession`] contract, never the wall clock.

use serde::{Deserialize, Serialize};

use crate::dtree::TreeBand;
use crate::logstore::{AttributeKey, DatasetSpec, SizeClass, TunableParams};
use crate::surface::{
    find_optimal, LookupTable, OptimizerConfig, Recommendation, SlaKind, SlaQuery, SurfaceError,
};

/// Operations a transfer environment must provide to be tunable.
///
/// `advance` is the injected clock: it moves session time forward and is
/// the only way time passes. Cumulative energy must be non-decreasing and
/// remaining bytes non-increasing across `advance` calls.
pub trait TransferSession {
    fn start(&mut self, theta: TunableParams);
    fn update_params(&mut self, theta: TunableParams);
    /// Most recent instantaneous throughput in Mbps.
    fn sample_instantaneous_throughput(&self) -> f64;
    /// Most recent round-trip time in ms.
    fn sample_rtt(&self) -> f64;
    /// Cumulative energy in joules since the session began.
    fn sample_instantaneous_energy(&self) -> f64;
    /// Session clock in seconds.
    fn elapsed(&self) -> f64;
    fn remaining_bytes(&self) -> f64;
    fn is_complete(&self) -> bool;
    fn advance(&mut self, dt_s: f64);
}

/// Check cadence by dataset size class: 10, 20 or 30 seconds.
pub fn interval_for_class(class: SizeClass) -> f64 {
    match class {
        SizeClass::Small => 10.0,
        SizeClass::Medium => 20.0,
        SizeClass::Large => 30.0,
    }
}

/// Tuner settings. The SLA's `target` field seeds the initial model query;
/// later queries use live measurements.
#[derive(Debug, Clone)]
pub struct TunerConfig {
    pub rtt_probe_duration_s: f64,
    /// Overrides the size-class cadence when set.
    pub check_interval_override: Option<f64>,
    pub sla: SlaQuery,
    /// Transfer context; the RTT slot is replaced by measurements.
    pub key: AttributeKey,
    /// Smoothing factor for the measured throughput; `None` queries with
    /// the raw instantaneous sample.
    pub ewma_alpha: Option<f64>,
}

impl TunerConfig {
    pub fn new(sla: SlaQuery, key: AttributeKey) -> Self {
        Self {
            rtt_probe_duration_s: 3.0,
            check_interval_override: None,
            sla,
            key,
            ewma_alpha: None,
        }
    }
}

/// The offline model a tuner consults: a tree band queried live, or a
/// precomputed lookup table (optionally with a band for fallback).
pub enum ModelHandle<'a> {
    Band(&'a TreeBand),
    Lookup {
        table: &'a LookupTable,
        band: Option<&'a TreeBand>,
    },
}

impl ModelHandle<'_> {
    fn recommend(
        &self,
        base: &SlaQuery,
        key: &AttributeKey,
        measured_rtt_ms: f64,
        target: f64,
        opt: &OptimizerConfig,
    ) -> Result<Recommendation, SurfaceError> {
        match self {
            ModelHandle::Band(band) => {
                let query = base.clone().with_target(target);
                find_optimal(band, &key.with_rtt(measured_rtt_ms), &query, opt)
            }
            ModelHandle::Lookup { table, band } => match band {
                Some(band) => {
                    table.lookup_or_live(band, key, measured_rtt_ms, target, base.kind, opt)
                }
                None => table
                    .lookup(key, measured_rtt_ms, target, base.kind)
                    .cloned()
                    .ok_or(SurfaceError::NoFeasiblePoint),
            },
        }
    }
}

/// One per-interval observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t_s: f64,
    pub inst_throughput_mbps: f64,
    pub cumulative_energy_j: f64,
    pub remaining_bytes: f64,
    pub theta: TunableParams,
}

/// Everything a tuned (or baseline) transfer produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    /// Transfer start (probe end) on the session clock.
    pub t_start_s: f64,
    pub t_end_s: f64,
    /// Applied settings over time; the first entry is the initial setting.
    pub theta_history: Vec<(f64, TunableParams)>,
    pub mean_throughput_mbps: f64,
    /// Total metered energy including the probe phase.
    pub total_energy_j: f64,
    pub samples: Vec<Sample>,
    /// Model queries that failed; the current setting was retained.
    pub model_misses: u32,
}

impl TransferRecord {
    /// Settings applied after the initial one.
    pub fn adjustments(&self) -> &[(f64, TunableParams)] {
        &self.theta_history[1..]
    }

    /// Plot-ready CSV: one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "time_s,inst_throughput_mbps,cumulative_energy_j,cc,p,pp,cpu_num,cpu_freq_ghz\n",
        );
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.t_s,
                s.inst_throughput_mbps,
                s.cumulative_energy_j,
                s.theta.cc,
                s.theta.p,
                s.theta.pp,
                s.theta.cpu_num,
                s.theta.cpu_freq_ghz,
            ));
        }
        out
    }
}

/// Projected total transfer energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyProjection {
    Joules(f64),
    /// Remaining work with zero throughput: no finite projection exists.
    Unbounded,
}

/// Projects the total energy of a transfer: mean power so far times the
/// projected total duration (elapsed plus remaining volume at the current
/// rate).
pub fn energy_approximation(
    cumulative_energy_j: f64,
    elapsed_s: f64,
    remaining_bytes: f64,
    inst_throughput_mbps: f64,
) -> EnergyProjection {
    if remaining_bytes <= 0.0 {
        return EnergyProjection::Joules(cumulative_energy_j);
    }
    if cumulative_energy_j == 0.0 {
        return EnergyProjection::Joules(0.0);
    }
    if inst_throughput_mbps <= 0.0 || elapsed_s <= 0.0 {
        return EnergyProjection::Unbounded;
    }
    let mean_power = cumulative_energy_j / elapsed_s;
    let remaining_s = remaining_bytes * 8.0 / (inst_throughput_mbps * 1e6);
    EnergyProjection::Joules(mean_power * (elapsed_s + remaining_s))
}

fn fallback_theta(opt: &OptimizerConfig) -> TunableParams {
    TunableParams::new(1, 1, 1, 1, opt.grid.min_freq())
}

fn drive<S: TransferSession>(
    session: &mut S,
    model: &ModelHandle,
    dataset: &DatasetSpec,
    config: &TunerConfig,
    opt: &OptimizerConfig,
    kind: SlaKind,
) -> TransferRecord {
    let interval = config
        .check_interval_override
        .unwrap_or_else(|| interval_for_class(dataset.size_class()));
    let mut misses = 0u32;

    // RTT probe; the transfer is idle-active
    session.advance(config.rtt_probe_duration_s);
    let rtt = session.sample_rtt();

    let mut theta = match model.recommend(&config.sla, &config.key, rtt, config.sla.target, opt) {
        Ok(rec) => rec.theta,
        Err(_) => {
            misses += 1;
            fallback_theta(opt)
        }
    };
    debug_assert!(theta.streams() <= config.sla.n_streams_limit);
    debug_assert!(theta.pp <= config.sla.pipelining_limit);

    session.start(theta);
    let t_start = session.elapsed();
    let energy_at_start = session.sample_instantaneous_energy();
    let mut theta_history = vec![(t_start, theta)];
    let mut samples = Vec::new();
    let mut smoothed: Option<f64> = None;

    while !session.is_complete() {
        session.advance(interval);
        let now = session.elapsed();
        let inst = session.sample_instantaneous_throughput();
        let cumulative = session.sample_instantaneous_energy();
        samples.push(Sample {
            t_s: now,
            inst_throughput_mbps: inst,
            cumulative_energy_j: cumulative,
            remaining_bytes: session.remaining_bytes(),
            theta,
        });
        if session.is_complete() {
            break;
        }

        let measured_rtt = session.sample_rtt();
        let measured_throughput = match config.ewma_alpha {
            Some(alpha) => {
                let s = smoothed.map_or(inst, |prev| alpha * inst + (1.0 - alpha) * prev);
                smoothed = Some(s);
                s
            }
            None => inst,
        };
        let target = match kind {
            SlaKind::MaxThroughput => Some(measured_throughput),
            // the projection works in transfer time: probe-phase energy
            // and duration are excluded from the mean power
            SlaKind::MinEnergy => match energy_approximation(
                cumulative - energy_at_start,
                now - t_start,
                session.remaining_bytes(),
                inst,
            ) {
                EnergyProjection::Joules(j) => Some(j),
                EnergyProjection::Unbounded => None,
            },
        };

        let updated = target.and_then(|t| {
            model
                .recommend(&config.sla, &config.key, measured_rtt, t, opt)
                .ok()
        });
        match updated {
            Some(rec) => {
                debug_assert!(rec.theta.streams() <= config.sla.n_streams_limit);
                debug_assert!(rec.theta.pp <= config.sla.pipelining_limit);
                // apply only when the setting actually changes
                if rec.theta != theta {
                    session.update_params(rec.theta);
                    theta = rec.theta;
                    theta_history.push((now, theta));
                }
            }
            None => misses += 1,
        }
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
        theta_history,
        mean_throughput_mbps: mean,
        total_energy_j: session.sample_instantaneous_energy(),
        samples,
        model_misses: misses,
    }
}

/// Dynamic throughput tuning: periodic re-queries with the measured RTT
/// and instantaneous throughput.
pub fn tune_throughput<S: TransferSession>(
    session: &mut S,
    model: &ModelHandle,
    dataset: &DatasetSpec,
    config: &TunerConfig,
    opt: &OptimizerConfig,
) -> TransferRecord {
    drive(session, model, dataset, config, opt, SlaKind::MaxThroughput)
}

/// Dynamic energy tuning: periodic re-queries with the measured RTT and
/// the projected total energy.
pub fn tune_energy<S: TransferSession>(
    session: &mut S,
    model: &ModelHandle,
    dataset: &DatasetSpec,
    config: &TunerConfig,
    opt: &OptimizerConfig,
) -> TransferRecord {
    drive(session, model, dataset, config, opt, SlaKind::MinEnergy)
}
