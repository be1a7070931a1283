//! Command-line front end: log generation, model building, SLA queries,
//! simulated tuning runs, benchmarking and model export.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use xfertune::bench::{run_bench, BenchConfig, Controller};
use xfertune::dtree::{
    build_band, build_tree, deserialize_band, deserialize_tree, serialize_band, serialize_tree,
    to_dot, BuildConfig, DecisionTree, TreeBand,
};
use xfertune::logstore::{parse_logs, write_logs, Attribute, AttributeKey, DatasetSpec};
use xfertune::netsim::{generate_logs, EnergyModelParams, SimScenario, SimSession};
use xfertune::ranking::Metric;
use xfertune::surface::{
    build_lookup_table, deserialize_lookup, find_optimal, serialize_lookup, EvalMode, LookupTable,
    OptimizerConfig, QuantizationSpec, SlaKind, SlaQuery, ThetaGrid,
};
use xfertune::tuner::{tune_energy, tune_throughput, ModelHandle, TunerConfig};

#[derive(Parser)]
#[command(
    name = "xfertune",
    version,
    about = "Learn data-transfer parameter settings from historical logs and tune \
             simulated transfers against throughput or energy SLAs"
)]
struct Cli {
    /// Seed for every stochastic step; identical seeds give identical outputs
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Scenario override file with `key = value` lines
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (each subcommand has a default)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit diagnostics as single-line JSON on stderr
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Band,
    Di,
    Sd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GridArg {
    Coarse,
    Full,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Discrete,
    Polynomial,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Dot,
    LookupTable,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TreePick {
    Di,
    Sd,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate transfers over scenario presets and emit a historical log CSV
    GenLogs {
        /// Comma-separated preset names
        #[arg(long, value_delimiter = ',', default_values_t = preset_names())]
        scenarios: Vec<String>,
        /// Datasets: `small`, `medium`, `large`, or `FILESxKB` (e.g. 2000x100)
        #[arg(long, value_delimiter = ',', default_values_t = vec!["small".to_string(), "medium".to_string(), "large".to_string()])]
        datasets: Vec<String>,
        /// Simulated transfers per (scenario, dataset, parameter) cell
        #[arg(long, default_value_t = 2)]
        repeats: usize,
        /// Parameter grid to sweep
        #[arg(long, value_enum, default_value_t = GridArg::Coarse)]
        grid: GridArg,
    },
    /// Build a search-tree model from a historical log CSV
    Build {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long, default_value_t = 2)]
        leaf_threshold: usize,
        #[arg(long, default_value_t = 4)]
        cut_number: usize,
        /// `band` builds both trees; `di`/`sd` build a single tree
        #[arg(long, value_enum, default_value_t = MetricArg::Band)]
        metric: MetricArg,
        /// Comma-separated per-depth attribute overrides
        #[arg(long, value_delimiter = ',')]
        force_attr: Vec<String>,
    },
    /// Query a model for the best parameters under an SLA
    Query {
        #[arg(long)]
        model: PathBuf,
        /// Transfer context: file_size_kb,num_files,rtt_ms,buf_size_mb,bandwidth_mbps
        #[arg(long)]
        key: String,
        /// `max-throughput[:TARGET]` or `min-energy[:TARGET]`
        #[arg(long)]
        sla: String,
        #[arg(long, default_value_t = 32)]
        n_streams: u32,
        #[arg(long, default_value_t = 16)]
        pp_limit: u32,
        #[arg(long)]
        energy_cap: Option<f64>,
        #[arg(long)]
        throughput_floor: Option<f64>,
        #[arg(long, value_enum, default_value_t = ModeArg::Discrete)]
        mode: ModeArg,
    },
    /// Run one simulated transfer under a tuner and emit its record CSV
    Tune {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "cloudlab")]
        scenario: String,
        /// `small`, `medium`, `large`, or `FILESxKB`
        #[arg(long, default_value = "small")]
        dataset: String,
        /// `max-throughput[:TARGET]` or `min-energy[:TARGET]`
        #[arg(long, default_value = "max-throughput")]
        sla: String,
        #[arg(long, default_value_t = 32)]
        n_streams: u32,
        #[arg(long, default_value_t = 16)]
        pp_limit: u32,
        #[arg(long)]
        energy_cap: Option<f64>,
        #[arg(long)]
        throughput_floor: Option<f64>,
        /// Override the size-class check interval (seconds)
        #[arg(long)]
        interval: Option<f64>,
        #[arg(long, default_value_t = 3.0)]
        probe: f64,
    },
    /// Compare tuners against fixed-parameter baselines over many episodes
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = preset_names())]
        scenarios: Vec<String>,
        #[arg(long, default_value_t = 30)]
        episodes: usize,
        #[arg(long, default_value_t = 4)]
        repeats: usize,
    },
    /// Export a model as Graphviz DOT or precompute its lookup table
    Export {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        /// Which tree of a band to render as DOT
        #[arg(long, value_enum, default_value_t = TreePick::Di)]
        tree: TreePick,
        /// Buckets per attribute for lookup-table quantization
        #[arg(long, default_value_t = 8)]
        buckets: usize,
        #[arg(long, default_value_t = 32)]
        n_streams: u32,
        #[arg(long, default_value_t = 16)]
        pp_limit: u32,
    },
}

fn preset_names() -> Vec<String> {
    SimScenario::preset_names()
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn parse_attribute(name: &str) -> Result<Attribute> {
    Attribute::ALL
        .iter()
        .copied()
        .find(|a| {
            a.column_name() == name
                || matches!(
                    (name, a),
                    ("file_size", Attribute::FileSize)
                        | ("num_files", Attribute::NumFiles)
                        | ("rtt", Attribute::Rtt)
                        | ("buf_size", Attribute::BufSize)
                        | ("bandwidth", Attribute::Bandwidth)
                )
        })
        .ok_or_else(|| anyhow!("unknown attribute `{name}`"))
}

fn parse_key(text: &str) -> Result<AttributeKey> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("key `{text}` must be five comma-separated numbers"))?;
    if parts.len() != 5 {
        bail!("key `{text}` must have exactly five fields");
    }
    Ok(AttributeKey::new(
        parts[0], parts[1], parts[2], parts[3], parts[4],
    ))
}

/// `max-throughput[:TARGET]` / `min-energy[:TARGET]`. With no target, a
/// throughput SLA aims at the key's link bandwidth and an energy SLA at
/// the lowest occupied bin.
fn parse_sla(text: &str, key_bandwidth: f64) -> Result<(SlaKind, f64)> {
    let (kind_text, target_text) = match text.split_once(':') {
        Some((k, t)) => (k, Some(t)),
        None => (text, None),
    };
    let kind = match kind_text {
        "max-throughput" => SlaKind::MaxThroughput,
        "min-energy" => SlaKind::MinEnergy,
        other => bail!("unknown SLA kind `{other}` (use max-throughput or min-energy)"),
    };
    let target = match target_text {
        Some(t) => t
            .trim()
            .parse::<f64>()
            .with_context(|| format!("bad SLA target `{t}`"))?,
        None => match kind {
            SlaKind::MaxThroughput => key_bandwidth,
            SlaKind::MinEnergy => 1.0,
        },
    };
    Ok((kind, target))
}

/// `small` / `medium` / `large` reference mixes, or `FILESxKB`.
fn parse_dataset(text: &str) -> Result<DatasetSpec> {
    match text {
        "small" => Ok(DatasetSpec::new(20_000, 2_087_321_600)),
        "medium" => Ok(DatasetSpec::new(5_000, 12_582_912_000)),
        "large" => Ok(DatasetSpec::new(128, 29_900_773_786)),
        custom => {
            let (files, kb) = custom.split_once('x').ok_or_else(|| {
                anyhow!("dataset `{custom}` is not small/medium/large or FILESxKB")
            })?;
            let files: u64 = files
                .parse()
                .with_context(|| format!("bad file count in dataset `{custom}`"))?;
            let kb: f64 = kb
                .parse()
                .with_context(|| format!("bad file size in dataset `{custom}`"))?;
            if files == 0 || kb <= 0.0 {
                bail!("dataset `{custom}` must have positive file count and size");
            }
            Ok(DatasetSpec::new(files, (files as f64 * kb * 1000.0) as u64))
        }
    }
}

fn load_scenario(name: &str, config: &Option<PathBuf>) -> Result<SimScenario> {
    let mut scenario =
        SimScenario::preset(name).with_context(|| format!("loading scenario `{name}`"))?;
    if let Some(path) = config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        scenario
            .apply_config(&text)
            .with_context(|| format!("applying config {}", path.display()))?;
    }
    Ok(scenario)
}

enum Model {
    Band(TreeBand),
    Tree(DecisionTree),
}

impl Model {
    fn load(path: &Path) -> Result<Model> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading model {}", path.display()))?;
        match deserialize_band(&text) {
            Ok(band) => Ok(Model::Band(band)),
            Err(band_err) => match deserialize_tree(&text) {
                Ok(tree) => Ok(Model::Tree(tree)),
                Err(_) => Err(band_err.into()),
            },
        }
    }

    /// A band view: single trees answer queries as a band of two
    /// identical trees.
    fn into_band(self) -> TreeBand {
        match self {
            Model::Band(band) => band,
            Model::Tree(tree) => TreeBand::new(tree.clone(), tree),
        }
    }
}

/// Models the tuner can run against: trees queried live, or a
/// precomputed lookup table.
enum TuneModel {
    Band(TreeBand),
    Lookup(LookupTable),
}

impl TuneModel {
    fn load(path: &Path) -> Result<TuneModel> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading model {}", path.display()))?;
        match deserialize_band(&text) {
            Ok(band) => Ok(TuneModel::Band(band)),
            Err(band_err) => {
                if let Ok(tree) = deserialize_tree(&text) {
                    return Ok(TuneModel::Band(Model::Tree(tree).into_band()));
                }
                match deserialize_lookup(&text) {
                    Ok(table) => Ok(TuneModel::Lookup(table)),
                    Err(_) => Err(band_err.into()),
                }
            }
        }
    }

    fn handle(&self) -> ModelHandle<'_> {
        match self {
            TuneModel::Band(band) => ModelHandle::Band(band),
            TuneModel::Lookup(table) => ModelHandle::Lookup { table, band: None },
        }
    }
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenLogs {
            scenarios,
            datasets,
            repeats,
            grid,
        } => {
            let scenarios: Vec<SimScenario> = scenarios
                .iter()
                .map(|name| load_scenario(name, &cli.config))
                .collect::<Result<_>>()?;
            let datasets: Vec<DatasetSpec> = datasets
                .iter()
                .map(|d| parse_dataset(d))
                .collect::<Result<_>>()?;
            let grid = match grid {
                GridArg::Coarse => ThetaGrid::coarse(),
                GridArg::Full => ThetaGrid::default(),
            };
            let table = generate_logs(&scenarios, &grid, &datasets, repeats, cli.seed);
            let out = cli.out.unwrap_or_else(|| PathBuf::from("logs.csv"));
            write_output(&out, &write_logs(&table))?;
            eprintln!("{} log entries", table.len());
        }
        Command::Build {
            logs,
            leaf_threshold,
            cut_number,
            metric,
            force_attr,
        } => {
            let text = fs::read_to_string(&logs)
                .with_context(|| format!("reading logs {}", logs.display()))?;
            let table = parse_logs(&text)?;
            let forced_attributes = force_attr
                .iter()
                .map(|a| parse_attribute(a))
                .collect::<Result<Vec<Attribute>>>()?;
            let config = BuildConfig {
                leaf_threshold,
                cut_number,
                forced_attributes,
                ..BuildConfig::default()
            };
            let serialized = match metric {
                MetricArg::Band => serialize_band(&build_band(&table, config)?),
                MetricArg::Di => serialize_tree(&build_tree(
                    &table,
                    BuildConfig {
                        metric: Metric::Di,
                        ..config
                    },
                )?),
                MetricArg::Sd => serialize_tree(&build_tree(
                    &table,
                    BuildConfig {
                        metric: Metric::Sd,
                        ..config
                    },
                )?),
            };
            let out = cli.out.unwrap_or_else(|| PathBuf::from("model.json"));
            write_output(&out, &serialized)?;
        }
        Command::Query {
            model,
            key,
            sla,
            n_streams,
            pp_limit,
            energy_cap,
            throughput_floor,
            mode,
        } => {
            let band = Model::load(&model)?.into_band();
            let key = parse_key(&key)?;
            let (kind, target) = parse_sla(&sla, key.bandwidth_mbps)?;
            let query = SlaQuery {
                kind,
                target,
                energy_cap,
                throughput_floor,
                n_streams_limit: n_streams,
                pipelining_limit: pp_limit,
                mode: match mode {
                    ModeArg::Discrete => EvalMode::Discrete,
                    ModeArg::Polynomial => EvalMode::Polynomial,
                },
            };
            let rec = find_optimal(&band, &key, &query, &OptimizerConfig::default())?;
            let line = serde_json::to_string(&rec)?;
            match &cli.out {
                Some(path) => write_output(path, &line)?,
                None => println!("{line}"),
            }
        }
        Command::Tune {
            model,
            scenario,
            dataset,
            sla,
            n_streams,
            pp_limit,
            energy_cap,
            throughput_floor,
            interval,
            probe,
        } => {
            let tune_model = TuneModel::load(&model)?;
            let handle = tune_model.handle();
            let scenario = load_scenario(&scenario, &cli.config)?;
            let dataset = parse_dataset(&dataset)?;
            let key = AttributeKey::new(
                dataset.avg_file_size_bytes / 1000.0,
                dataset.num_files as f64,
                scenario.rtt_ms,
                scenario.buf_size_mb,
                scenario.bandwidth_mbps,
            );
            let (kind, target) = parse_sla(&sla, scenario.bandwidth_mbps)?;
            let sla = SlaQuery {
                kind,
                target,
                energy_cap,
                throughput_floor,
                n_streams_limit: n_streams,
                pipelining_limit: pp_limit,
                mode: EvalMode::Discrete,
            };
            let mut config = TunerConfig::new(sla, key);
            config.rtt_probe_duration_s = probe;
            config.check_interval_override = interval;
            let opt = OptimizerConfig::default();
            let mut session =
                SimSession::new(scenario, dataset, EnergyModelParams::default(), cli.seed);
            let record = match kind {
                SlaKind::MaxThroughput => {
                    tune_throughput(&mut session, &handle, &dataset, &config, &opt)
                }
                SlaKind::MinEnergy => tune_energy(&mut session, &handle, &dataset, &config, &opt),
            };
            let out = cli.out.unwrap_or_else(|| PathBuf::from("record.csv"));
            write_output(&out, &record.to_csv())?;
            println!(
                "{}",
                serde_json::json!({
                    "mean_throughput_mbps": record.mean_throughput_mbps,
                    "total_energy_j": record.total_energy_j,
                    "duration_s": record.t_end_s - record.t_start_s,
                    "adjustments": record.adjustments().len(),
                    "model_misses": record.model_misses,
                })
            );
        }
        Command::Bench {
            scenarios,
            episodes,
            repeats,
        } => {
            let config = BenchConfig {
                presets: scenarios,
                episodes_per_preset: episodes,
                training_repeats: repeats,
                seed: cli.seed,
                grid: ThetaGrid::coarse(),
            };
            let report = run_bench(&config)?;
            for preset in &config.presets {
                println!(
                    "{}",
                    serde_json::json!({
                        "scenario": preset,
                        "tuned_mean_throughput_mbps":
                            report.mean_throughput(Controller::DtreeMaxThroughput, preset),
                        "oracle_mean_throughput_mbps":
                            report.mean_throughput(Controller::OracleFixed, preset),
                        "static_mean_throughput_mbps":
                            report.mean_throughput(Controller::StaticMin, preset),
                        "tuned_mean_energy_j":
                            report.mean_energy(Controller::DtreeMinEnergy, preset),
                        "max_freq_mean_energy_j":
                            report.mean_energy(Controller::StaticMaxFreq, preset),
                    })
                );
            }
            let out = cli.out.unwrap_or_else(|| PathBuf::from("bench.csv"));
            write_output(&out, &report.to_csv())?;
        }
        Command::Export {
            model,
            format,
            tree,
            buckets,
            n_streams,
            pp_limit,
        } => match format {
            ExportFormat::Dot => {
                let model = Model::load(&model)?;
                let rendered = match (&model, tree) {
                    (Model::Tree(t), _) => to_dot(t),
                    (Model::Band(b), TreePick::Di) => to_dot(b.di_tree()),
                    (Model::Band(b), TreePick::Sd) => to_dot(b.sd_tree()),
                };
                let out = cli.out.unwrap_or_else(|| PathBuf::from("model.dot"));
                write_output(&out, &rendered)?;
            }
            ExportFormat::LookupTable => {
                let band = Model::load(&model)?.into_band();
                let opt = OptimizerConfig::default();
                let quant = QuantizationSpec::from_table(band.table(), buckets, &opt);
                let mut base = SlaQuery::max_throughput(0.0);
                base.n_streams_limit = n_streams;
                base.pipelining_limit = pp_limit;
                let lookup = build_lookup_table(&band, quant, base, &opt)?;
                let out = cli.out.unwrap_or_else(|| PathBuf::from("lookup.json"));
                write_output(&out, &serialize_lookup(&lookup))?;
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if json {
                eprintln!("{}", serde_json::json!({ "error": format!("{err:#}") }));
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::FAILURE
        }
    }
}
