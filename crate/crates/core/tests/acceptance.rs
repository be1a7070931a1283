//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers (visible with `--nocapture`).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xfertune::bench::{converged_within_two_periods, run_bench, BenchConfig, Controller};
use xfertune::dtree::{
    build_band, build_tree, deserialize_band, serialize_band, BuildConfig, DecisionTree,
};
use xfertune::logstore::{
    attribute_key, parse_logs, Attribute, AttributeKey, LogTable, SizeClass, TransferLogEntry,
    TunableParams,
};
use xfertune::netsim::{energy_power, throughput_model, EnergyModelParams, SimScenario};
use xfertune::ranking::{diversity_index, rank_attributes, Metric};
use xfertune::surface::{
    build_lookup_table, decompose_surface, evaluate_point, EvalMode, OptimizerConfig,
    QuantizationSpec, SlaKind, SlaQuery, SurfaceComponent, SurfaceError, SurfaceMetric,
};
use xfertune::tuner::{energy_approximation, interval_for_class, EnergyProjection};

const TABLE1: &str = include_str!("../testdata/table1.csv");

fn table1() -> LogTable {
    parse_logs(TABLE1).unwrap()
}

fn sorted_leaf_sets(tree: &DecisionTree) -> Vec<Vec<u64>> {
    let mut sets: Vec<Vec<u64>> = tree
        .leaves()
        .map(|n| {
            let mut ids = n.log_ids.clone();
            ids.sort_unstable();
            ids
        })
        .collect();
    sets.sort();
    sets
}

#[test]
fn criterion_01_reference_tree_reconstruction() {
    let started = Instant::now();
    let table = table1();

    // five distinct bandwidth values need value edges, hence cut_number 5
    let bandwidth_tree = build_tree(
        &table,
        BuildConfig {
            leaf_threshold: 2,
            cut_number: 5,
            forced_attributes: vec![Attribute::Bandwidth],
            ..BuildConfig::default()
        },
    )
    .unwrap();
    assert_eq!(bandwidth_tree.depth(), 2);
    assert_eq!(
        sorted_leaf_sets(&bandwidth_tree),
        vec![vec![1, 6], vec![2, 7], vec![3, 8], vec![4, 9], vec![5, 10]]
    );

    let file_size_tree = build_tree(
        &table,
        BuildConfig {
            leaf_threshold: 2,
            cut_number: 5,
            forced_attributes: vec![Attribute::FileSize, Attribute::NumFiles],
            ..BuildConfig::default()
        },
    )
    .unwrap();
    assert_eq!(file_size_tree.depth(), 3);
    let cut_again: Vec<&xfertune::dtree::TreeNode> = file_size_tree
        .root()
        .children
        .iter()
        .map(|&c| &file_size_tree.nodes()[c])
        .filter(|n| !n.is_leaf())
        .collect();
    assert_eq!(cut_again.len(), 1, "exactly one level-2 node is cut");
    let mut ids = cut_again[0].log_ids.clone();
    ids.sort_unstable();
    assert_eq!(
        ids,
        vec![1, 2, 6, 7],
        "the file_size=100 node is the one cut"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "acceptance criterion 01: PASS — bandwidth tree depth 2 with 5 leaves, \
         file-size tree depth 3 with one level-2 cut, in {elapsed:?}"
    );
}

#[test]
fn criterion_02_diversity_index_values() {
    let table = table1();
    let bandwidth_di = diversity_index(&table.column(Attribute::Bandwidth)).unwrap();
    assert!((bandwidth_di - 1.875).abs() < 1e-9, "got {bandwidth_di}");

    let file_size_di = diversity_index(&table.column(Attribute::FileSize)).unwrap();
    assert!(
        (file_size_di - 77.0 / 60.0).abs() < 1e-9,
        "got {file_size_di}"
    );

    let ranked = rank_attributes(&table, Metric::Di).unwrap();
    assert_eq!(ranked[0].attribute, Attribute::Bandwidth);
    println!(
        "acceptance criterion 02: PASS — DI(bandwidth) = {bandwidth_di}, \
         DI(file_size) = {file_size_di:.6}, bandwidth ranked first"
    );
}

#[test]
fn criterion_03_unseen_key_fallback() {
    let tree = build_tree(
        &table1(),
        BuildConfig {
            leaf_threshold: 2,
            cut_number: 5,
            forced_attributes: vec![Attribute::FileSize, Attribute::NumFiles],
            ..BuildConfig::default()
        },
    )
    .unwrap();
    let key = AttributeKey::new(100.0, 255.0, 10.0, 200.0, 10.0);
    let node = tree.traverse(&key);
    let mut ids = node.log_ids.clone();
    ids.sort_unstable();
    assert_eq!(ids, vec![1, 6]);
    println!(
        "acceptance criterion 03: PASS — key (100,255,10,200,10) resolves through \
         file_size=100 to the num_files=250 group {{1,6}}"
    );
}

fn random_entry(rng: &mut ChaCha8Rng, entry_no: u64) -> TransferLogEntry {
    TransferLogEntry {
        entry_no,
        file_size_kb: rng.random_range(10.0..1000.0),
        num_files: rng.random_range(1.0..10_000.0),
        rtt_ms: rng.random_range(1.0..100.0),
        buf_size_mb: rng.random_range(1.0..256.0),
        bandwidth_mbps: rng.random_range(100.0..20_000.0),
        throughput_mbps: rng.random_range(1.0..10_000.0),
        energy_j: rng.random_range(1.0..5_000.0),
        params: TunableParams::new(
            rng.random_range(1..17),
            rng.random_range(1..17),
            rng.random_range(1..33),
            rng.random_range(1..9),
            [1.2, 1.5, 1.8, 2.1, 2.4][rng.random_range(0..5)],
        ),
    }
}

fn random_query(rng: &mut ChaCha8Rng) -> SlaQuery {
    let kind = if rng.random_bool(0.5) {
        SlaKind::MaxThroughput
    } else {
        SlaKind::MinEnergy
    };
    SlaQuery {
        kind,
        target: rng.random_range(1.0..10_000.0),
        energy_cap: rng.random_bool(0.5).then(|| rng.random_range(1.0..4_000.0)),
        throughput_floor: rng.random_bool(0.5).then(|| rng.random_range(1.0..8_000.0)),
        n_streams_limit: rng.random_range(1..257),
        pipelining_limit: rng.random_range(1..33),
        mode: EvalMode::Discrete,
    }
}

// Independent scan: same constraint filter, argbest with lowest-entry_no
// tie break, written directly against the query semantics.
fn exhaustive_scan(members: &[TransferLogEntry], query: &SlaQuery) -> Option<u64> {
    let feasible = members.iter().filter(|e| {
        e.params.cc * e.params.p <= query.n_streams_limit
            && e.params.pp <= query.pipelining_limit
            && match query.kind {
                SlaKind::MaxThroughput => query.energy_cap.is_none_or(|c| e.energy_j <= c),
                SlaKind::MinEnergy => query
                    .throughput_floor
                    .is_none_or(|f| e.throughput_mbps >= f),
            }
    });
    let mut best: Option<&TransferLogEntry> = None;
    for e in feasible {
        best = Some(match best {
            None => e,
            Some(b) => {
                let better = match query.kind {
                    SlaKind::MaxThroughput => {
                        (e.throughput_mbps, b.entry_no) > (b.throughput_mbps, e.entry_no)
                    }
                    SlaKind::MinEnergy => (b.energy_j, b.entry_no) > (e.energy_j, e.entry_no),
                };
                if better {
                    e
                } else {
                    b
                }
            }
        });
    }
    best.map(|e| e.entry_no)
}

#[test]
fn criterion_04_oracle_equivalence_randomized() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0404);
    let opt = OptimizerConfig::default();
    let key = AttributeKey::new(100.0, 10.0, 10.0, 32.0, 1e9);
    let mut matches = 0usize;
    const TRIALS: usize = 1000;
    for _ in 0..TRIALS {
        let len = rng.random_range(1..=500);
        let members: Vec<TransferLogEntry> = (1..=len as u64)
            .map(|i| random_entry(&mut rng, i))
            .collect();
        let query = random_query(&mut rng);
        let component = SurfaceComponent {
            bin_upper: f64::MAX,
            members: members.clone(),
            fit: None,
        };
        let got = evaluate_point(&component, &query, &key, &opt);
        let want = exhaustive_scan(&members, &query);
        match (got, want) {
            (Ok(rec), Some(id)) if rec.source_entry_ids == vec![id] => matches += 1,
            (Err(SurfaceError::NoFeasiblePoint), None) => matches += 1,
            (got, want) => panic!("mismatch: got {got:?}, oracle says {want:?}"),
        }
    }
    let elapsed = started.elapsed();
    assert_eq!(matches, TRIALS);
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "acceptance criterion 04: PASS — {TRIALS}/{TRIALS} randomized trials match the \
         exhaustive constrained scan exactly, in {elapsed:?}"
    );
}

fn random_scenario(rng: &mut ChaCha8Rng) -> SimScenario {
    let bandwidth = rng.random_range(100.0..20_000.0);
    SimScenario {
        name: "random".into(),
        bandwidth_mbps: bandwidth,
        rtt_ms: rng.random_range(0.0..120.0),
        buf_size_mb: rng.random_range(1.0..64.0),
        v_read_mbps: rng.random_range(50.0..40_000.0),
        v_write_mbps: rng.random_range(50.0..40_000.0),
        noise_sigma: 0.0,
        load_phi: 0.9,
        load_sigma: 0.0,
        load_init: rng.random_range(0.0..0.95),
        cpu_capacity_ghz_per_gbps: rng.random_range(0.2..4.0),
        stream_rho: rng.random_range(0.05..0.95),
    }
}

fn random_theta(rng: &mut ChaCha8Rng) -> TunableParams {
    TunableParams::new(
        rng.random_range(1..17),
        rng.random_range(1..17),
        rng.random_range(1..33),
        rng.random_range(1..9),
        rng.random_range(0.8..3.0),
    )
}

#[test]
fn criterion_05_capacity_cap_property() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0505);
    const STEPS: usize = 100_000;
    let mut violations = 0usize;
    for _ in 0..STEPS {
        let scenario = random_scenario(&mut rng);
        let theta = random_theta(&mut rng);
        let f_avg = rng.random_range(1_000.0..1e9);
        let l_ctd = rng.random_range(0.0..0.95);
        let th = throughput_model(&theta, &scenario, f_avg, l_ctd);
        let cap = scenario.capacity_cap_mbps();
        if th > cap {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
    println!(
        "acceptance criterion 05: PASS — {STEPS} randomized noiseless evaluations, \
         0 violations of the capacity cap"
    );
}

#[test]
fn criterion_06_monotonicity_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0606);
    let energy = EnergyModelParams::default();
    const PAIRS: usize = 1000;
    let mut violations = 0usize;
    for _ in 0..PAIRS {
        let scenario = random_scenario(&mut rng);
        let theta = random_theta(&mut rng);
        let f_avg = rng.random_range(1_000.0..1e9);
        let l_ctd = rng.random_range(0.0..0.95);

        // power strictly increases in active cores and in frequency
        let more_cores = TunableParams {
            cpu_num: theta.cpu_num + rng.random_range(1..4),
            ..theta
        };
        let faster = TunableParams {
            cpu_freq_ghz: theta.cpu_freq_ghz + rng.random_range(0.1..1.5),
            ..theta
        };
        if energy_power(&more_cores, &energy) <= energy_power(&theta, &energy) {
            violations += 1;
        }
        if energy_power(&faster, &energy) <= energy_power(&theta, &energy) {
            violations += 1;
        }

        // noiseless throughput is non-decreasing in the stream product
        let more_streams = TunableParams {
            cc: theta.cc * rng.random_range(2..4),
            ..theta
        };
        let base = throughput_model(&theta, &scenario, f_avg, l_ctd);
        let scaled = throughput_model(&more_streams, &scenario, f_avg, l_ctd);
        if scaled < base {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
    println!(
        "acceptance criterion 06: PASS — {PAIRS} randomized pairs, 0 violations \
         (power strict in cores/frequency, throughput non-decreasing in streams)"
    );
}

#[test]
fn criteria_07_08_simulator_benchmark_and_convergence() {
    let started = Instant::now();
    let config = BenchConfig::default();
    let report = run_bench(&config).expect("presets are valid");
    assert!(
        report.training_log_count >= 10_000,
        "only {} training logs",
        report.training_log_count
    );

    // criterion 7: per-preset controller comparisons
    for preset in &config.presets {
        let tuned = report.mean_throughput(Controller::DtreeMaxThroughput, preset);
        let static_min = report.mean_throughput(Controller::StaticMin, preset);
        let oracle = report.mean_throughput(Controller::OracleFixed, preset);
        assert!(
            tuned >= 1.5 * static_min,
            "{preset}: tuned {tuned:.1} Mbps < 1.5 x static {static_min:.1} Mbps"
        );
        assert!(
            tuned >= 0.9 * oracle,
            "{preset}: tuned {tuned:.1} Mbps < 90% of oracle {oracle:.1} Mbps"
        );

        let tuned_energy = report.mean_energy(Controller::DtreeMinEnergy, preset);
        let max_freq_energy = report.mean_energy(Controller::StaticMaxFreq, preset);
        assert!(
            tuned_energy <= 0.9 * max_freq_energy,
            "{preset}: tuned energy {tuned_energy:.0} J > 90% of static max-freq \
             {max_freq_energy:.0} J"
        );
        println!(
            "  {preset}: tuned {tuned:.0} Mbps vs static {static_min:.1} ({:.1}x) \
             vs oracle {oracle:.0} ({:.0}%); energy {tuned_energy:.0} J vs \
             max-freq {max_freq_energy:.0} J ({:.0}%)",
            tuned / static_min,
            100.0 * tuned / oracle,
            100.0 * tuned_energy / max_freq_energy,
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "acceptance criterion 07: PASS — {} training logs, 30 episodes per preset, \
         all margins met in {elapsed:?}",
        report.training_log_count
    );

    // criterion 8: convergence within two adjustment periods
    for preset in &config.presets {
        let episodes: Vec<_> = report
            .outcomes
            .iter()
            .filter(|o| o.controller == Controller::DtreeMaxThroughput && &o.scenario == preset)
            .collect();
        assert_eq!(episodes.len(), 30);
        let converged = episodes
            .iter()
            .filter(|o| converged_within_two_periods(&o.record, interval_for_class(o.class), 0.9))
            .count();
        assert!(
            converged * 100 >= episodes.len() * 80,
            "{preset}: only {converged}/{} episodes converged within two periods",
            episodes.len()
        );
        println!(
            "  {preset}: {converged}/{} episodes converged within 2 periods",
            episodes.len()
        );
    }
    println!(
        "acceptance criterion 08: PASS — >= 80% of episodes reach 90% of their peak \
         within two adjustment periods on every preset"
    );
}

fn fabricated_table(n: usize, seed: u64) -> LogTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 30 distinct transfer contexts, many parameter settings each
    let contexts: Vec<[f64; 5]> = (0..30)
        .map(|_| {
            [
                rng.random_range(10.0..1000.0f64).round(),
                rng.random_range(1.0..10_000.0f64).round(),
                rng.random_range(1.0..100.0f64).round(),
                rng.random_range(1.0..256.0f64).round(),
                [1_000.0, 2_500.0, 5_000.0, 10_000.0][rng.random_range(0..4)],
            ]
        })
        .collect();
    let entries = (1..=n as u64)
        .map(|i| {
            let ctx = contexts[rng.random_range(0..contexts.len())];
            let mut e = random_entry(&mut rng, i);
            e.file_size_kb = ctx[0];
            e.num_files = ctx[1];
            e.rtt_ms = ctx[2];
            e.buf_size_mb = ctx[3];
            e.bandwidth_mbps = ctx[4];
            e
        })
        .collect();
    LogTable::new(entries, "fabricated").unwrap()
}

#[test]
fn criterion_09_offline_timing() {
    let table = fabricated_table(20_000, 0x0909);
    let opt = OptimizerConfig::default();

    let build_started = Instant::now();
    let band = build_band(&table, BuildConfig::default()).unwrap();
    let build_elapsed = build_started.elapsed();
    assert!(
        build_elapsed.as_secs_f64() < 10.0,
        "band construction took {build_elapsed:?}"
    );

    let quant = QuantizationSpec::from_table(&table, 8, &opt);
    let precompute_started = Instant::now();
    let lookup = build_lookup_table(&band, quant, SlaQuery::max_throughput(0.0), &opt).unwrap();
    let precompute_elapsed = precompute_started.elapsed();
    assert!(
        precompute_elapsed.as_secs_f64() < 30.0,
        "lookup precompute took {precompute_elapsed:?}"
    );
    assert!(!lookup.is_empty());
    println!(
        "acceptance criterion 09: PASS — 20000-entry band built in {build_elapsed:?}, \
         lookup table ({} buckets) precomputed in {precompute_elapsed:?}",
        lookup.len()
    );
}

#[test]
fn criterion_10_energy_projection_value() {
    match energy_approximation(50.0, 10.0, 300e6, 80.0) {
        EnergyProjection::Joules(j) => assert_eq!(j, 200.0),
        EnergyProjection::Unbounded => panic!("projection should be finite"),
    }
    println!(
        "acceptance criterion 10: PASS — (50 J, 10 s, 300 MB, 80 Mbps) projects to \
         exactly 200 J"
    );
}

#[test]
fn criterion_11_serialization_round_trip() {
    let table = fabricated_table(2_000, 0x1111);
    let band = build_band(&table, BuildConfig::default()).unwrap();
    let json = serialize_band(&band);
    let restored = deserialize_band(&json).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(0x1112);
    let mut agreement = 0usize;
    const KEYS: usize = 1000;
    for _ in 0..KEYS {
        // half in-distribution keys, half arbitrary
        let key = if rng.random_bool(0.5) {
            let entry = &table.entries()[rng.random_range(0..table.len())];
            let mut k = attribute_key(entry);
            k.num_files += rng.random_range(-0.5..0.5) * k.num_files;
            k
        } else {
            AttributeKey::new(
                rng.random_range(1.0..2_000.0),
                rng.random_range(1.0..20_000.0),
                rng.random_range(0.5..200.0),
                rng.random_range(1.0..512.0),
                rng.random_range(10.0..40_000.0),
            )
        };
        let di_same = band.di_tree().traverse(&key).id == restored.di_tree().traverse(&key).id;
        let sd_same = band.sd_tree().traverse(&key).id == restored.sd_tree().traverse(&key).id;
        let union_same = band.match_band(&key).entries() == restored.match_band(&key).entries();
        if di_same && sd_same && union_same {
            agreement += 1;
        }
    }
    assert_eq!(agreement, KEYS);
    println!(
        "acceptance criterion 11: PASS — serialized and restored bands agree on \
         {KEYS}/{KEYS} random keys"
    );
}

#[test]
fn decomposition_and_classes_sanity() {
    // cross-checks tying the suite together: bins and size classes used
    // by the criteria behave as the tuners assume
    let table = table1();
    let comps = decompose_surface(&table, SurfaceMetric::Throughput, 100.0).unwrap();
    assert_eq!(comps.len(), 1, "sample throughputs all sit in one bin");
    assert_eq!(interval_for_class(SizeClass::Small), 10.0);
    assert_eq!(interval_for_class(SizeClass::Medium), 20.0);
    assert_eq!(interval_for_class(SizeClass::Large), 30.0);
}
