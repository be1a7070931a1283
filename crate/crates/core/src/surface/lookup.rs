//! Precomputed recommendation table for the online tuners.
//!
//! Attribute keys and SLA targets are snapped onto quantization lattices;
//! the table stores the [`find_optimal`] answer for every occupied bucket
//! so the online loop can fetch parameters without touching the trees.
//! Misses fall back to a live query.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{find_optimal, OptimizerConfig, Recommendation, SlaKind, SlaQuery, SurfaceError};
use crate::dtree::TreeBand;
use crate::logstore::{attribute_key, Attribute, AttributeKey};

pub const LOOKUP_SCHEMA_VERSION: u32 = 1;

/// Bucket widths for the five key attributes and the two target axes.
/// A value `v` belongs to the bucket with index `round(v / width)` whose
/// center is `index * width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizationSpec {
    pub file_size_kb: f64,
    pub num_files: f64,
    pub rtt_ms: f64,
    pub buf_size_mb: f64,
    pub bandwidth_mbps: f64,
    pub throughput_target_mbps: f64,
    pub energy_target_j: f64,
}

impl QuantizationSpec {
    /// Derives bucket widths from a table so that each attribute range is
    /// covered by roughly `buckets_per_attribute` buckets.
    pub fn from_table(
        table: &crate::logstore::LogTable,
        buckets_per_attribute: usize,
        opt: &OptimizerConfig,
    ) -> Self {
        let width = |attr: Attribute| {
            let column = table.column(attr);
            let lo = column.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let range = hi - lo;
            if range > 0.0 {
                range / buckets_per_attribute.max(1) as f64
            } else {
                // single distinct value: any width maps it to one bucket
                hi.abs().max(1.0)
            }
        };
        Self {
            file_size_kb: width(Attribute::FileSize),
            num_files: width(Attribute::NumFiles),
            rtt_ms: width(Attribute::Rtt),
            buf_size_mb: width(Attribute::BufSize),
            bandwidth_mbps: width(Attribute::Bandwidth),
            throughput_target_mbps: opt.throughput_bin_mbps,
            energy_target_j: opt.energy_bin_j,
        }
    }

    fn attr_width(&self, attr: Attribute) -> f64 {
        match attr {
            Attribute::FileSize => self.file_size_kb,
            Attribute::NumFiles => self.num_files,
            Attribute::Rtt => self.rtt_ms,
            Attribute::BufSize => self.buf_size_mb,
            Attribute::Bandwidth => self.bandwidth_mbps,
        }
    }

    fn target_width(&self, kind: SlaKind) -> f64 {
        match kind {
            SlaKind::MaxThroughput => self.throughput_target_mbps,
            SlaKind::MinEnergy => self.energy_target_j,
        }
    }

    fn quantize_key(&self, key: &AttributeKey) -> [i64; 5] {
        let mut out = [0i64; 5];
        for (i, attr) in Attribute::ALL.iter().enumerate() {
            out[i] = qidx(key.get(*attr), self.attr_width(*attr));
        }
        out
    }

    fn bucket_center(&self, indices: &[i64; 5]) -> AttributeKey {
        AttributeKey::new(
            indices[0] as f64 * self.file_size_kb,
            indices[1] as f64 * self.num_files,
            indices[2] as f64 * self.rtt_ms,
            indices[3] as f64 * self.buf_size_mb,
            indices[4] as f64 * self.bandwidth_mbps,
        )
    }
}

fn qidx(v: f64, width: f64) -> i64 {
    (v / width).round() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
struct BucketKey {
    attrs: [i64; 5],
    target: i64,
    kind: SlaKind,
}

/// Bucket-indexed map of precomputed recommendations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupTable {
    quantization: QuantizationSpec,
    /// Constraint template; kind and target are overridden per bucket.
    base_query: SlaQuery,
    entries: BTreeMap<BucketKey, Recommendation>,
}

impl LookupTable {
    pub fn quantization(&self) -> &QuantizationSpec {
        &self.quantization
    }

    pub fn base_query(&self) -> &SlaQuery {
        &self.base_query
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Snaps the inputs onto the quantization lattices and returns the
    /// stored recommendation, if the bucket was precomputed. The measured
    /// RTT replaces the key's RTT slot.
    pub fn lookup(
        &self,
        key: &AttributeKey,
        measured_rtt_ms: f64,
        measured_target: f64,
        kind: SlaKind,
    ) -> Option<&Recommendation> {
        let snapped = key.with_rtt(measured_rtt_ms);
        let bucket = BucketKey {
            attrs: self.quantization.quantize_key(&snapped),
            target: qidx(measured_target, self.quantization.target_width(kind)),
            kind,
        };
        self.entries.get(&bucket)
    }

    /// As [`LookupTable::lookup`], falling back to a live [`find_optimal`]
    /// query when the bucket is missing.
    pub fn lookup_or_live(
        &self,
        band: &TreeBand,
        key: &AttributeKey,
        measured_rtt_ms: f64,
        measured_target: f64,
        kind: SlaKind,
        opt: &OptimizerConfig,
    ) -> Result<Recommendation, SurfaceError> {
        if let Some(stored) = self.lookup(key, measured_rtt_ms, measured_target, kind) {
            return Ok(stored.clone());
        }
        let mut query = self.base_query.clone();
        query.kind = kind;
        query.target = measured_target;
        find_optimal(band, &key.with_rtt(measured_rtt_ms), &query, opt)
    }
}

/// Precomputes recommendations for every occupied (key bucket, target bin,
/// SLA kind) combination observed in the band's training table. Target
/// bins cover the observed throughput values plus each key's link
/// bandwidth (the default throughput target), and the observed energies.
pub fn build_lookup_table(
    band: &TreeBand,
    quantization: QuantizationSpec,
    base_query: SlaQuery,
    opt: &OptimizerConfig,
) -> Result<LookupTable, SurfaceError> {
    let table = band.table();
    if table.is_empty() {
        return Err(SurfaceError::EmptyModel);
    }

    let mut key_buckets: Vec<[i64; 5]> = table
        .entries()
        .iter()
        .map(|e| quantization.quantize_key(&attribute_key(e)))
        .collect();
    key_buckets.sort_unstable();
    key_buckets.dedup();

    let tw = quantization.target_width(SlaKind::MaxThroughput);
    let ew = quantization.target_width(SlaKind::MinEnergy);
    let mut throughput_targets: Vec<i64> = table
        .entries()
        .iter()
        .flat_map(|e| [qidx(e.throughput_mbps, tw), qidx(e.bandwidth_mbps, tw)])
        .collect();
    throughput_targets.sort_unstable();
    throughput_targets.dedup();
    let mut energy_targets: Vec<i64> = table
        .entries()
        .iter()
        .map(|e| qidx(e.energy_j, ew))
        .collect();
    energy_targets.sort_unstable();
    energy_targets.dedup();

    let mut entries = BTreeMap::new();
    for bucket in &key_buckets {
        let center = quantization.bucket_center(bucket);
        for (kind, targets, width) in [
            (SlaKind::MaxThroughput, &throughput_targets, tw),
            (SlaKind::MinEnergy, &energy_targets, ew),
        ] {
            for &target_idx in targets {
                let mut query = base_query.clone();
                query.kind = kind;
                query.target = target_idx as f64 * width;
                // infeasible buckets are simply not stored
                if let Ok(rec) = find_optimal(band, &center, &query, opt) {
                    entries.insert(
                        BucketKey {
                            attrs: *bucket,
                            target: target_idx,
                            kind,
                        },
                        rec,
                    );
                }
            }
        }
    }

    Ok(LookupTable {
        quantization,
        base_query,
        entries,
    })
}

#[derive(Serialize, Deserialize)]
struct LookupDoc {
    schema_version: u32,
    quantization: QuantizationSpec,
    base_query: SlaQuery,
    entries: Vec<(BucketKey, Recommendation)>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

pub fn serialize_lookup(table: &LookupTable) -> String {
    let doc = LookupDoc {
        schema_version: LOOKUP_SCHEMA_VERSION,
        quantization: table.quantization.clone(),
        base_query: table.base_query.clone(),
        entries: table.entries.iter().map(|(k, v)| (*k, v.clone())).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("lookup document serializes")
}

pub fn deserialize_lookup(text: &str) -> Result<LookupTable, SurfaceError> {
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| SurfaceError::MalformedModel(e.to_string()))?;
    if probe.schema_version != LOOKUP_SCHEMA_VERSION {
        return Err(SurfaceError::SchemaVersionMismatch {
            found: probe.schema_version,
            expected: LOOKUP_SCHEMA_VERSION,
        });
    }
    let doc: LookupDoc =
        serde_json::from_str(text).map_err(|e| SurfaceError::MalformedModel(e.to_string()))?;
    Ok(LookupTable {
        quantization: doc.quantization,
        base_query: doc.base_query,
        entries: doc.entries.into_iter().collect(),
    })
}
