//! Throughput/energy surfaces over the tunable parameters and
//! SLA-constrained point selection.
//!
//! A matched log group is decomposed into binned components by achieved
//! throughput (or energy), the component nearest the query target is
//! selected, and the best feasible point inside it is returned. In the
//! default discrete mode the best point is an exhaustive scan of the
//! component's logs; groups with enough members can instead be fitted
//! with a ridge-regularized quadratic and searched over the parameter
//! grid (polynomial mode).

mod lookup;
mod poly;

pub use lookup::{
    build_lookup_table, deserialize_lookup, serialize_lookup, LookupTable, QuantizationSpec,
    LOOKUP_SCHEMA_VERSION,
};
pub use poly::QuadraticFit;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtree::TreeBand;
use crate::logstore::{AttributeKey, LogTable, TransferLogEntry, TunableParams};

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("cannot decompose an empty log group")]
    EmptyLogs,
    #[error("no log satisfies the query constraints")]
    NoFeasiblePoint,
    #[error("lookup table has no entries")]
    EmptyModel,
    #[error("surface fit failed: {0}")]
    FitFailed(String),
    #[error("malformed lookup table: {0}")]
    MalformedModel(String),
    #[error("lookup table schema version {found} unsupported (reader expects {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
}

/// SLA objective: maximize throughput toward a target, or minimize energy
/// within a budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlaKind {
    MaxThroughput,
    MinEnergy,
}

impl SlaKind {
    pub fn metric(&self) -> SurfaceMetric {
        match self {
            SlaKind::MaxThroughput => SurfaceMetric::Throughput,
            SlaKind::MinEnergy => SurfaceMetric::Energy,
        }
    }
}

/// Which observable a surface is built over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceMetric {
    Throughput,
    Energy,
}

/// Point-selection strategy inside a surface component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Discrete,
    Polynomial,
}

/// An SLA query: objective kind, target level and the constraint set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaQuery {
    pub kind: SlaKind,
    /// Target throughput (Mbps) for `MaxThroughput`, target energy (J)
    /// for `MinEnergy`; selects the surface component to search.
    pub target: f64,
    /// Optional energy budget for throughput queries.
    pub energy_cap: Option<f64>,
    /// Optional throughput guarantee for energy queries.
    pub throughput_floor: Option<f64>,
    /// Upper bound on total streams `cc * p`.
    pub n_streams_limit: u32,
    /// Upper bound on pipelining depth.
    pub pipelining_limit: u32,
    pub mode: EvalMode,
}

impl SlaQuery {
    pub fn max_throughput(target: f64) -> Self {
        Self {
            kind: SlaKind::MaxThroughput,
            target,
            energy_cap: None,
            throughput_floor: None,
            n_streams_limit: 32,
            pipelining_limit: 16,
            mode: EvalMode::Discrete,
        }
    }

    pub fn min_energy(target: f64) -> Self {
        Self {
            kind: SlaKind::MinEnergy,
            ..Self::max_throughput(target)
        }
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = target;
        self
    }

    fn admits(&self, entry: &TransferLogEntry) -> bool {
        if entry.params.streams() > self.n_streams_limit || entry.params.pp > self.pipelining_limit
        {
            return false;
        }
        match self.kind {
            SlaKind::MaxThroughput => self.energy_cap.is_none_or(|cap| entry.energy_j <= cap),
            SlaKind::MinEnergy => self
                .throughput_floor
                .is_none_or(|floor| entry.throughput_mbps >= floor),
        }
    }
}

/// The logs of one metric bin. The bin labeled `b` with width `w` holds
/// values in `(b - w, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceComponent {
    pub bin_upper: f64,
    pub members: Vec<TransferLogEntry>,
    /// Quadratic response-surface fit, when one has been computed.
    pub fit: Option<QuadraticFit>,
}

/// Discrete evaluation grid for the tunable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub cc: Vec<u32>,
    pub p: Vec<u32>,
    pub pp: Vec<u32>,
    pub cpu_num: Vec<u32>,
    pub cpu_freq_ghz: Vec<f64>,
}

impl Default for ThetaGrid {
    fn default() -> Self {
        Self {
            cc: (1..=16).collect(),
            p: (1..=16).collect(),
            pp: (1..=16).collect(),
            cpu_num: vec![1, 2, 4, 8],
            cpu_freq_ghz: vec![1.2, 1.5, 1.8, 2.1, 2.4],
        }
    }
}

impl ThetaGrid {
    /// A small grid for batch simulation work.
    pub fn coarse() -> Self {
        Self {
            cc: vec![1, 2, 4, 8],
            p: vec![1, 2, 4],
            pp: vec![1, 4, 16],
            cpu_num: vec![1, 4, 8],
            cpu_freq_ghz: vec![1.2, 1.8, 2.4],
        }
    }

    pub fn len(&self) -> usize {
        self.cc.len() * self.p.len() * self.pp.len() * self.cpu_num.len() * self.cpu_freq_ghz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn min_freq(&self) -> f64 {
        self.cpu_freq_ghz
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_freq(&self) -> f64 {
        self.cpu_freq_ghz
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn points(&self) -> impl Iterator<Item = TunableParams> + '_ {
        self.cc.iter().flat_map(move |&cc| {
            self.p.iter().flat_map(move |&p| {
                self.pp.iter().flat_map(move |&pp| {
                    self.cpu_num.iter().flat_map(move |&cpu_num| {
                        self.cpu_freq_ghz
                            .iter()
                            .map(move |&f| TunableParams::new(cc, p, pp, cpu_num, f))
                    })
                })
            })
        })
    }
}

/// Tuning knobs for surface construction and point selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub throughput_bin_mbps: f64,
    pub energy_bin_j: f64,
    /// Minimum member count before polynomial mode engages.
    pub poly_member_threshold: usize,
    pub ridge_weight: f64,
    pub grid: ThetaGrid,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            throughput_bin_mbps: 100.0,
            energy_bin_j: 10.0,
            poly_member_threshold: 25,
            ridge_weight: 1e-3,
            grid: ThetaGrid::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn bin_width(&self, metric: SurfaceMetric) -> f64 {
        match metric {
            SurfaceMetric::Throughput => self.throughput_bin_mbps,
            SurfaceMetric::Energy => self.energy_bin_j,
        }
    }
}

/// A recommended parameter setting with its predicted outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub theta: TunableParams,
    pub predicted_throughput_mbps: f64,
    pub predicted_energy_j: f64,
    /// Log entries the recommendation was derived from.
    pub source_entry_ids: Vec<u64>,
    pub mode: EvalMode,
}

fn metric_value(entry: &TransferLogEntry, metric: SurfaceMetric) -> f64 {
    match metric {
        SurfaceMetric::Throughput => entry.throughput_mbps,
        SurfaceMetric::Energy => entry.energy_j,
    }
}

/// Assigns each log to the bin `ceil(value / bin_width) * bin_width` and
/// returns the non-empty components sorted by bin label.
pub fn decompose_surface(
    logs: &LogTable,
    metric: SurfaceMetric,
    bin_width: f64,
) -> Result<Vec<SurfaceComponent>, SurfaceError> {
    if logs.is_empty() {
        return Err(SurfaceError::EmptyLogs);
    }
    let mut bins: std::collections::BTreeMap<i64, Vec<TransferLogEntry>> = Default::default();
    for entry in logs.entries() {
        let k = (metric_value(entry, metric) / bin_width).ceil() as i64;
        bins.entry(k.max(1)).or_default().push(entry.clone());
    }
    Ok(bins
        .into_iter()
        .map(|(k, members)| SurfaceComponent {
            bin_upper: k as f64 * bin_width,
            members,
            fit: None,
        })
        .collect())
}

/// Picks the component whose bin label is nearest the target. Equidistant
/// bins resolve toward the larger bin for throughput queries and the
/// smaller bin for energy queries.
pub fn get_final_surface(
    components: &[SurfaceComponent],
    target: f64,
    kind: SlaKind,
) -> &SurfaceComponent {
    assert!(!components.is_empty(), "component list must be non-empty");
    let mut best = &components[0];
    for c in &components[1..] {
        let d = (c.bin_upper - target).abs();
        let best_d = (best.bin_upper - target).abs();
        let wins = d < best_d
            || (d == best_d
                && match kind {
                    SlaKind::MaxThroughput => c.bin_upper > best.bin_upper,
                    SlaKind::MinEnergy => c.bin_upper < best.bin_upper,
                });
        if wins {
            best = c;
        }
    }
    best
}

fn discrete_point(
    component: &SurfaceComponent,
    query: &SlaQuery,
    key: &AttributeKey,
) -> Result<Recommendation, SurfaceError> {
    let mut best: Option<&TransferLogEntry> = None;
    for entry in component.members.iter().filter(|e| query.admits(e)) {
        let wins = match best {
            None => true,
            Some(b) => match query.kind {
                SlaKind::MaxThroughput => {
                    entry.throughput_mbps > b.throughput_mbps
                        || (entry.throughput_mbps == b.throughput_mbps
                            && entry.entry_no < b.entry_no)
                }
                SlaKind::MinEnergy => {
                    entry.energy_j < b.energy_j
                        || (entry.energy_j == b.energy_j && entry.entry_no < b.entry_no)
                }
            },
        };
        if wins {
            best = Some(entry);
        }
    }
    let best = best.ok_or(SurfaceError::NoFeasiblePoint)?;
    Ok(Recommendation {
        theta: best.params,
        predicted_throughput_mbps: best.throughput_mbps.min(key.bandwidth_mbps),
        predicted_energy_j: best.energy_j,
        source_entry_ids: vec![best.entry_no],
        mode: EvalMode::Discrete,
    })
}

fn polynomial_point(
    component: &SurfaceComponent,
    query: &SlaQuery,
    key: &AttributeKey,
    opt: &OptimizerConfig,
) -> Result<Recommendation, SurfaceError> {
    let throughput_fit = match (&component.fit, query.kind) {
        (Some(fit), SlaKind::MaxThroughput) => fit.clone(),
        _ => poly::fit_quadratic(
            &component.members,
            SurfaceMetric::Throughput,
            opt.ridge_weight,
        )?,
    };
    let energy_fit = match (&component.fit, query.kind) {
        (Some(fit), SlaKind::MinEnergy) => fit.clone(),
        _ => poly::fit_quadratic(&component.members, SurfaceMetric::Energy, opt.ridge_weight)?,
    };

    // search inside the coordinate-wise box the members were observed in
    let bounds = poly::theta_box(&component.members);
    let mut best: Option<(TunableParams, f64, f64, f64)> = None;
    for theta in opt.grid.points() {
        if !bounds.contains(&theta)
            || theta.streams() > query.n_streams_limit
            || theta.pp > query.pipelining_limit
        {
            continue;
        }
        let th_hat = throughput_fit.predict(&theta);
        let en_hat = energy_fit.predict(&theta);
        let feasible = match query.kind {
            SlaKind::MaxThroughput => query.energy_cap.is_none_or(|cap| en_hat <= cap),
            SlaKind::MinEnergy => query.throughput_floor.is_none_or(|f| th_hat >= f),
        };
        if !feasible {
            continue;
        }
        let objective = match query.kind {
            SlaKind::MaxThroughput => th_hat,
            SlaKind::MinEnergy => -en_hat,
        };
        if best.is_none_or(|(_, o, _, _)| objective > o) {
            best = Some((theta, objective, th_hat, en_hat));
        }
    }
    let (theta, _, th_hat, en_hat) = best.ok_or(SurfaceError::NoFeasiblePoint)?;
    Ok(Recommendation {
        theta,
        predicted_throughput_mbps: th_hat.min(key.bandwidth_mbps),
        predicted_energy_j: en_hat,
        source_entry_ids: component.members.iter().map(|e| e.entry_no).collect(),
        mode: EvalMode::Polynomial,
    })
}

/// Returns the best feasible point of a component under the query.
///
/// Discrete mode scans the member logs; polynomial mode (when requested
/// and the component has at least `poly_member_threshold` members) fits a
/// quadratic response surface and searches the parameter grid restricted
/// to the member box. Predicted throughput never exceeds the key's link
/// bandwidth.
pub fn evaluate_point(
    component: &SurfaceComponent,
    query: &SlaQuery,
    key: &AttributeKey,
    opt: &OptimizerConfig,
) -> Result<Recommendation, SurfaceError> {
    if query.mode == EvalMode::Polynomial && component.members.len() >= opt.poly_member_threshold {
        polynomial_point(component, query, key, opt)
    } else {
        discrete_point(component, query, key)
    }
}

/// Full query pipeline: match the band, decompose by the query's metric,
/// pick the component nearest the target and evaluate it.
pub fn find_optimal(
    band: &TreeBand,
    key: &AttributeKey,
    query: &SlaQuery,
    opt: &OptimizerConfig,
) -> Result<Recommendation, SurfaceError> {
    let group = band.match_band(key);
    let metric = query.kind.metric();
    let components = decompose_surface(&group, metric, opt.bin_width(metric))?;
    let component = get_final_surface(&components, query.target, query.kind);
    evaluate_point(component, query, key, opt)
}
