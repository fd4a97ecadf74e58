use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qac_core::eval::{evaluate, format_table, run_mix_experiment, EvalEvents, ExperimentConfig};
use qac_core::index::PrefixIndex;
use qac_core::io::{read_jsonl, write_json, write_jsonl};
use qac_core::ranker::{CandidateScorer, RankerModel, RetrievalOrder, TrainConfig};
use qac_core::service::{bench_latency, serve, BenchConfig, SuggestService, PORT_ENV};
use qac_core::sim::{
    generate_catalog, simulate_qac_sessions, simulate_search_logs, BehaviorConfig, CatalogConfig,
    ClickModelConfig, QacEngagementEntry, QacSimConfig, QueryRecord, SearchLogEntry,
};
use qac_core::synth::{
    build_real_instances, estimate_distribution, generate_synthetic, mix_datasets,
    train_linear_baseline, train_neural, MixRatio, PrefixLengthDistribution, TrainingInstance,
};
use qac_core::{Error, Result};

#[derive(Parser)]
#[command(name = "qac", version, about = "Query autocomplete ranking pipeline")]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic query catalog (JSONL).
    GenCatalog {
        #[arg(long, default_value_t = 10_000)]
        n_queries: usize,
        #[arg(long, default_value_t = 8)]
        departments: u16,
        #[arg(long, default_value_t = 6)]
        verticals: u16,
        #[arg(long, default_value_t = 1.0)]
        zipf: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate search logs without autocomplete (JSONL).
    SimulateSearch {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        month: u8,
        #[command(flatten)]
        behavior: BehaviorArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate autocomplete sessions under a ranker and click model (JSONL).
    SimulateQac {
        #[arg(long)]
        index: PathBuf,
        /// Ranker used to order suggestions; retrieval order when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        month: u8,
        #[arg(long, default_value_t = 0.7)]
        examine_decay: f64,
        #[arg(long, default_value_t = 0.9)]
        accept: f64,
        #[arg(long, default_value_t = 10)]
        shown: usize,
        #[command(flatten)]
        behavior: BehaviorArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the prefix index from a catalog.
    BuildIndex {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the prefix-length distribution from engagement logs (JSON).
    EstimateDist {
        #[arg(long)]
        engagement: PathBuf,
        #[arg(long, default_value_t = qac_core::synth::DEFAULT_SMOOTHING)]
        smoothing: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic training instances from search logs (JSONL).
    GenSynth {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 50)]
        m: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build real training instances from engagement logs (JSONL).
    BuildReal {
        #[arg(long)]
        engagement: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mix real and synthetic instances at a ratio (JSONL).
    Mix {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
        /// Fraction of real instances in the output.
        #[arg(long, default_value_t = 0.5)]
        ratio: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a ranker on instances.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        index: PathBuf,
        /// Training configuration (TOML); defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Train the single-layer linear baseline.
        #[arg(long)]
        linear: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a ranker on engagement logs or general search logs.
    Eval {
        #[arg(long)]
        index: PathBuf,
        /// Ranker to evaluate; retrieval order when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Engagement logs: MRR_QAC.
        #[arg(long, conflicts_with = "logs")]
        engagement: Option<PathBuf>,
        /// Search logs: MRR_general (needs --dist).
        #[arg(long, requires = "dist")]
        logs: Option<PathBuf>,
        #[arg(long)]
        dist: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        m: usize,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the training-mix experiment and write its report.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        /// JSON report.
        #[arg(long, default_value = "experiment.json")]
        out: PathBuf,
        /// Text table.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Serve suggestions over HTTP.
    Serve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Measure suggest latency and throughput.
    Bench {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        concurrency: usize,
        #[arg(long, default_value_t = 500)]
        warmup: usize,
    },
}

#[derive(Args)]
struct BehaviorArg {
    /// User behavior parameters (TOML); neutral defaults otherwise.
    #[arg(long)]
    behavior: Option<PathBuf>,
}

impl BehaviorArg {
    fn load(&self) -> Result<BehaviorConfig> {
        match &self.behavior {
            None => Ok(BehaviorConfig::default()),
            Some(path) => load_toml(path),
        }
    }
}

fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e
            .span()
            .map(|s| text[..s.start].matches('\n').count() + 1)
            .unwrap_or(0),
        message: e.message().to_string(),
    })
}

fn load_scorer(model: Option<&Path>) -> Result<Box<dyn CandidateScorer>> {
    Ok(match model {
        Some(path) => Box::new(RankerModel::load(path)?),
        None => Box::new(RetrievalOrder),
    })
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::GenCatalog {
            n_queries,
            departments,
            verticals,
            zipf,
            out,
        } => {
            let catalog = generate_catalog(&CatalogConfig {
                n_queries,
                n_departments: departments,
                n_verticals: verticals,
                zipf_exponent: zipf,
                seed,
            })?;
            write_jsonl(&out, &catalog)?;
            eprintln!("wrote {} queries to {}", catalog.len(), out.display());
        }
        Command::SimulateSearch {
            catalog,
            n,
            month,
            behavior,
            out,
        } => {
            let catalog: Vec<QueryRecord> = read_jsonl(&catalog)?;
            let logs = simulate_search_logs(&catalog, &behavior.load()?, n, month, seed)?;
            write_jsonl(&out, &logs)?;
            eprintln!("wrote {} search entries to {}", logs.len(), out.display());
        }
        Command::SimulateQac {
            index,
            model,
            n,
            month,
            examine_decay,
            accept,
            shown,
            behavior,
            out,
        } => {
            let index = PrefixIndex::load(&index)?;
            let scorer = load_scorer(model.as_deref())?;
            let sim = simulate_qac_sessions(
                &index,
                scorer.as_ref(),
                &QacSimConfig {
                    n_entries: n,
                    shown_limit: shown,
                    month,
                    click_model: ClickModelConfig {
                        examine_decay,
                        accept_if_intended: accept,
                        rng_seed: seed,
                    },
                    behavior: behavior.load()?,
                    ..QacSimConfig::default()
                },
            )?;
            write_jsonl(&out, &sim.entries)?;
            eprintln!(
                "wrote {} engagements to {} ({} users, {} abandoned)",
                sim.entries.len(),
                out.display(),
                sim.users,
                sim.abandoned.len()
            );
        }
        Command::BuildIndex { catalog, out } => {
            let catalog: Vec<QueryRecord> = read_jsonl(&catalog)?;
            let index = PrefixIndex::build(catalog)?;
            index.save(&out)?;
            eprintln!("indexed {} queries into {}", index.len(), out.display());
        }
        Command::EstimateDist {
            engagement,
            smoothing,
            out,
        } => {
            let entries: Vec<QacEngagementEntry> = read_jsonl(&engagement)?;
            let d = estimate_distribution(&entries, smoothing)?;
            d.save(&out)?;
            eprintln!(
                "fitted D(s) on {} engagements ({} observed lengths) into {}",
                entries.len(),
                d.observed.len(),
                out.display()
            );
        }
        Command::GenSynth {
            logs,
            dist,
            index,
            m,
            out,
        } => {
            let logs: Vec<SearchLogEntry> = read_jsonl(&logs)?;
            let d = PrefixLengthDistribution::load(&dist)?;
            let index = PrefixIndex::load(&index)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let set = generate_synthetic(&logs, &d, &index, m, &mut rng)?;
            write_jsonl(&out, &set.instances)?;
            eprintln!(
                "wrote {} synthetic instances to {}; skipped {:?}",
                set.instances.len(),
                out.display(),
                set.skipped
            );
        }
        Command::BuildReal { engagement, out } => {
            let entries: Vec<QacEngagementEntry> = read_jsonl(&engagement)?;
            let set = build_real_instances(&entries);
            write_jsonl(&out, &set.instances)?;
            eprintln!(
                "wrote {} real instances to {}; skipped {:?}",
                set.instances.len(),
                out.display(),
                set.skipped
            );
        }
        Command::Mix {
            real,
            synthetic,
            ratio,
            out,
        } => {
            let real: Vec<TrainingInstance> = read_jsonl(&real)?;
            let synthetic: Vec<TrainingInstance> = read_jsonl(&synthetic)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mixed = mix_datasets(&real, &synthetic, MixRatio::new(ratio)?, &mut rng)?;
            write_jsonl(&out, &mixed)?;
            eprintln!("wrote {} instances to {}", mixed.len(), out.display());
        }
        Command::Train {
            data,
            index,
            config,
            epochs,
            linear,
            out,
        } => {
            let instances: Vec<TrainingInstance> = read_jsonl(&data)?;
            let index = PrefixIndex::load(&index)?;
            let mut train = match &config {
                Some(path) => load_toml::<TrainConfig>(path)?,
                None => TrainConfig::default(),
            };
            train.seed = seed;
            if let Some(e) = epochs {
                train.epochs = e;
            }
            let fitted = if linear {
                train_linear_baseline(&index, &instances, &train)?
            } else {
                train_neural(&index, &instances, &train)?
            };
            for (i, loss) in fitted.report.epoch_losses.iter().enumerate() {
                eprintln!("epoch {:>3}  loss {loss:.6}", i + 1);
            }
            fitted.model.save(&out)?;
            eprintln!(
                "saved model {} to {}",
                fitted.model.version_tag(),
                out.display()
            );
        }
        Command::Eval {
            index,
            model,
            engagement,
            logs,
            dist,
            m,
            json,
        } => {
            let index = PrefixIndex::load(&index)?;
            let scorer = load_scorer(model.as_deref())?;
            let report = match (engagement, logs, dist) {
                (Some(path), _, _) => {
                    let entries: Vec<QacEngagementEntry> = read_jsonl(&path)?;
                    evaluate(scorer.as_ref(), &index, EvalEvents::Qac(&entries), m)?
                }
                (None, Some(path), Some(dist)) => {
                    let logs: Vec<SearchLogEntry> = read_jsonl(&path)?;
                    let d = PrefixLengthDistribution::load(&dist)?;
                    let events = EvalEvents::General {
                        logs: &logs,
                        d: &d,
                        seed,
                    };
                    evaluate(scorer.as_ref(), &index, events, m)?
                }
                _ => {
                    return Err(Error::Argument(
                        "give --engagement, or --logs with --dist".into(),
                    ))
                }
            };
            print!("{report}");
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
        }
        Command::Experiment {
            config,
            seeds,
            out,
            table,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let report = run_mix_experiment(&config, &seeds, &mut |msg| eprintln!("{msg}"))?;
            let text = format_table(&report);
            print!("{text}");
            write_json(&out, &report)?;
            if let Some(path) = table {
                std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
            }
        }
        Command::Serve {
            index,
            model,
            port,
            host,
        } => {
            let port = match std::env::var(PORT_ENV) {
                Ok(v) => v
                    .parse()
                    .map_err(|_| Error::Argument(format!("{PORT_ENV}={v:?} is not a port")))?,
                Err(_) => port,
            };
            let service = Arc::new(SuggestService::from_files(index, model)?);
            let addr = SocketAddr::new(host, port);
            eprintln!(
                "serving model {} on http://{addr}",
                service.model_version().unwrap_or_default()
            );
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Io {
                path: "tokio runtime".into(),
                source: e,
            })?;
            runtime.block_on(serve(service, addr))?;
        }
        Command::Bench {
            index,
            model,
            n,
            concurrency,
            warmup,
        } => {
            let service = SuggestService::from_files(index, model)?;
            let summary = bench_latency(
                &service,
                &BenchConfig {
                    n_requests: n,
                    concurrency,
                    warmup,
                    seed,
                    ..BenchConfig::default()
                },
            )?;
            println!(
                "requests {}  concurrency {}  p50 {:.1}us  p95 {:.1}us  p99 {:.1}us  max {:.1}us  throughput {:.0}/s",
                summary.n_requests,
                summary.concurrency,
                summary.p50_micros,
                summary.p95_micros,
                summary.p99_micros,
                summary.max_micros,
                summary.throughput_per_sec
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
