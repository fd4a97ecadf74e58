//! The training-mix experiment: a linear baseline against neural rankers
//! trained on real engagement only, synthetic prefixes only, and a 50-50
//! mix, scored on held-out engagement and on general search logs.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, EvalEvents};
use crate::error::{Error, Result};
use crate::index::PrefixIndex;
use crate::ranker::{RetrievalOrder, TrainConfig, HIDDEN_LAYERS};
use crate::sim::{
    generate_catalog, simulate_qac_sessions, simulate_search_logs, BehaviorConfig, CatalogConfig,
    ClickModelConfig, QacSimConfig,
};
use crate::synth::{
    build_real_instances, estimate_distribution, generate_synthetic, mix_datasets, train_ranker,
    MixRatio, SkipCounts, TrainingInstance, DEFAULT_SMOOTHING,
};

/// Which data the linear baseline is trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineData {
    Real,
    Synthetic,
    Mix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub catalog: CatalogConfig,
    pub behavior: BehaviorConfig,
    pub click_model: ClickModelConfig,
    pub month: u8,
    pub n_search_logs: usize,
    pub n_qac_events: usize,
    /// Share of each log used for training; the rest is held out.
    pub train_fraction: f64,
    /// Candidates retrieved for general-mode evaluation.
    pub retrieve_m: usize,
    /// Suggestions shown per keystroke in the simulated sessions.
    pub shown_limit: usize,
    /// Candidates retrieved per synthetic instance.
    pub synthetic_m: usize,
    pub smoothing: f64,
    /// Cap on training events per model (applied after mixing).
    pub max_train_events: Option<usize>,
    /// Cap on held-out events per metric.
    pub max_eval_events: Option<usize>,
    pub baseline_data: BaselineData,
    pub hidden_layers: Vec<usize>,
    pub train: TrainConfig,
    pub baseline_train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            catalog: CatalogConfig::default(),
            behavior: BehaviorConfig::default(),
            click_model: ClickModelConfig::default(),
            month: 6,
            n_search_logs: 150_000,
            n_qac_events: 150_000,
            train_fraction: 0.8,
            retrieve_m: 50,
            shown_limit: 10,
            synthetic_m: 50,
            smoothing: DEFAULT_SMOOTHING,
            max_train_events: None,
            max_eval_events: None,
            baseline_data: BaselineData::Mix,
            hidden_layers: HIDDEN_LAYERS.to_vec(),
            train: TrainConfig::default(),
            // A few dozen full-batch steps leave the linear model far from
            // its optimum; it is cheap enough to run to convergence.
            baseline_train: TrainConfig {
                learning_rate: 0.1,
                epochs: 200,
                ..TrainConfig::default()
            },
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must be in (0, 1)".into()));
        }
        if self.n_search_logs < 2 || self.n_qac_events < 2 {
            return Err(Error::Config("need at least two log entries of each kind".into()));
        }
        if self.retrieve_m == 0 || self.synthetic_m == 0 || self.shown_limit == 0 {
            return Err(Error::Config("candidate counts must be positive".into()));
        }
        self.behavior.validate()?;
        self.click_model.validate()?;
        self.train.validate()?;
        self.baseline_train.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearBaseline,
    RealOnly,
    SynthOnly,
    Mix5050,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::LinearBaseline,
        ModelKind::RealOnly,
        ModelKind::SynthOnly,
        ModelKind::Mix5050,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::LinearBaseline => "linear baseline",
            ModelKind::RealOnly => "100% real",
            ModelKind::SynthOnly => "100% synthetic",
            ModelKind::Mix5050 => "50-50 mix",
        }
    }
}

/// One trained model on one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: ModelKind,
    pub train_events: usize,
    pub final_loss: Option<f64>,
    pub mrr_qac: Option<f64>,
    pub mrr_general: Option<f64>,
    pub mean_click_position: Option<f64>,
    /// Relative change against the baseline, in percent.
    pub delta_mrr_qac: Option<f64>,
    pub delta_mrr_general: Option<f64>,
    /// Absolute change in mean click position against the baseline.
    pub delta_click_position: Option<f64>,
    pub error: Option<String>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub real_instances: usize,
    pub synthetic_instances: usize,
    pub real_skipped: SkipCounts,
    pub synthetic_skipped: SkipCounts,
    pub simulated_users: u64,
    pub eval_qac_events: usize,
    pub eval_general_events: usize,
    pub general_target_missing: usize,
    pub logging_policy_mrr_qac: f64,
    pub cells: Vec<CellResult>,
}

/// Medians across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: ModelKind,
    pub mrr_qac: Option<f64>,
    pub mrr_general: Option<f64>,
    pub delta_mrr_qac: Option<f64>,
    pub delta_mrr_general: Option<f64>,
    pub delta_click_position: Option<f64>,
    pub failed_seeds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedReport>,
    pub summary: Vec<Summary>,
    pub pattern: PatternCheck,
}

/// The expected ordering of the three neural models relative to the
/// baseline.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternCheck {
    pub real_only_best_qac: bool,
    pub real_only_general_negative: bool,
    pub synth_only_best_general: bool,
    pub synth_only_qac_negative: bool,
    pub mix_qac_non_negative: bool,
    pub mix_general_non_negative: bool,
}

impl PatternCheck {
    pub fn holds(&self) -> bool {
        self.real_only_best_qac
            && self.real_only_general_negative
            && self.synth_only_best_general
            && self.synth_only_qac_negative
            && self.mix_qac_non_negative
            && self.mix_general_non_negative
    }

    pub fn from_summary(summary: &[Summary]) -> Self {
        let get = |kind: ModelKind| summary.iter().find(|s| s.model == kind);
        let pair = |kind: ModelKind| {
            get(kind).and_then(|s| Some((s.delta_mrr_qac?, s.delta_mrr_general?)))
        };
        let (Some(real), Some(synth), Some(mix)) = (
            pair(ModelKind::RealOnly),
            pair(ModelKind::SynthOnly),
            pair(ModelKind::Mix5050),
        ) else {
            return PatternCheck::default();
        };
        PatternCheck {
            real_only_best_qac: real.0 > synth.0 && real.0 > mix.0,
            real_only_general_negative: real.1 < 0.0,
            synth_only_best_general: synth.1 > real.1 && synth.1 > mix.1,
            synth_only_qac_negative: synth.0 < 0.0,
            mix_qac_non_negative: mix.0 >= 0.0,
            mix_general_non_negative: mix.1 >= 0.0,
        }
    }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    })
}

fn relative(value: Option<f64>, base: Option<f64>) -> Option<f64> {
    match (value, base) {
        (Some(v), Some(b)) if b > 0.0 => Some(100.0 * (v - b) / b),
        _ => None,
    }
}

fn capped<T>(items: &[T], cap: Option<usize>) -> &[T] {
    &items[..cap.unwrap_or(usize::MAX).min(items.len())]
}

/// Run every seed and aggregate.
pub fn run_mix_experiment(
    config: &ExperimentConfig,
    seeds: &[u64],
    progress: &mut dyn FnMut(&str),
) -> Result<ExperimentReport> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::Argument("no seeds given".into()));
    }
    let mut reports = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        reports.push(run_seed(config, seed, progress)?);
    }
    let summary = summarize(&reports);
    let pattern = PatternCheck::from_summary(&summary);
    Ok(ExperimentReport {
        config: config.clone(),
        seeds: reports,
        summary,
        pattern,
    })
}

fn summarize(reports: &[SeedReport]) -> Vec<Summary> {
    ModelKind::ALL
        .iter()
        .map(|&kind| {
            let cells: Vec<&CellResult> = reports
                .iter()
                .flat_map(|r| r.cells.iter().filter(move |c| c.model == kind))
                .collect();
            let collect = |f: fn(&CellResult) -> Option<f64>| median(cells.iter().filter_map(|c| f(c)).collect());
            Summary {
                model: kind,
                mrr_qac: collect(|c| c.mrr_qac),
                mrr_general: collect(|c| c.mrr_general),
                delta_mrr_qac: collect(|c| c.delta_mrr_qac),
                delta_mrr_general: collect(|c| c.delta_mrr_general),
                delta_click_position: collect(|c| c.delta_click_position),
                failed_seeds: cells.iter().filter(|c| c.error.is_some()).count(),
            }
        })
        .collect()
}

/// Simulate, build data, train the four models and evaluate them for one
/// seed.
pub fn run_seed(
    config: &ExperimentConfig,
    seed: u64,
    progress: &mut dyn FnMut(&str),
) -> Result<SeedReport> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut next = || seeds.random::<u64>();
    let (catalog_seed, logs_seed, qac_seed, affinity_seed) = (next(), next(), next(), next());
    let (synth_seed, mix_seed, eval_seed, train_seed) = (next(), next(), next(), next());

    let started = Instant::now();
    let catalog = generate_catalog(&CatalogConfig {
        seed: catalog_seed,
        ..config.catalog.clone()
    })?;
    let index = PrefixIndex::build(catalog)?;
    let behavior = BehaviorConfig {
        affinity_seed,
        ..config.behavior.clone()
    };
    let logs = simulate_search_logs(index.catalog(), &behavior, config.n_search_logs, config.month, logs_seed)?;
    let sim = simulate_qac_sessions(
        &index,
        &RetrievalOrder,
        &QacSimConfig {
            n_entries: config.n_qac_events,
            retrieve_m: config.retrieve_m,
            shown_limit: config.shown_limit,
            month: config.month,
            click_model: ClickModelConfig {
                rng_seed: qac_seed,
                ..config.click_model.clone()
            },
            behavior: behavior.clone(),
        },
    )?;
    progress(&format!(
        "seed {seed}: simulated {} search entries and {} engagements from {} users in {:.1}s",
        logs.len(),
        sim.entries.len(),
        sim.users,
        started.elapsed().as_secs_f64()
    ));

    let split = |n: usize| ((n as f64 * config.train_fraction).round() as usize).clamp(1, n - 1);
    let (qac_train, qac_test) = sim.entries.split_at(split(sim.entries.len()));
    let (logs_train, logs_test) = logs.split_at(split(logs.len()));
    let qac_test = capped(qac_test, config.max_eval_events);
    let logs_test = capped(logs_test, config.max_eval_events);

    let d = estimate_distribution(qac_train, config.smoothing)?;
    let real = build_real_instances(qac_train);
    let mut rng = ChaCha8Rng::seed_from_u64(synth_seed);
    let synthetic = generate_synthetic(logs_train, &d, &index, config.synthetic_m, &mut rng)?;
    progress(&format!(
        "seed {seed}: {} real and {} synthetic instances ({} synthetic skipped)",
        real.instances.len(),
        synthetic.instances.len(),
        synthetic.skipped.total()
    ));

    let mut mix_rng = ChaCha8Rng::seed_from_u64(mix_seed);
    let mut dataset = |ratio: MixRatio| -> Result<Vec<TrainingInstance>> {
        let mut mixed = mix_datasets(&real.instances, &synthetic.instances, ratio, &mut mix_rng)?;
        mixed.truncate(config.max_train_events.unwrap_or(usize::MAX));
        Ok(mixed)
    };
    let real_only = dataset(MixRatio::REAL_ONLY)?;
    let synth_only = dataset(MixRatio::SYNTHETIC_ONLY)?;
    let mixed = dataset(MixRatio::BALANCED)?;
    let baseline_set = match config.baseline_data {
        BaselineData::Real => &real_only,
        BaselineData::Synthetic => &synth_only,
        BaselineData::Mix => &mixed,
    };

    let qac_events = EvalEvents::Qac(qac_test);
    let general_events = EvalEvents::General {
        logs: logs_test,
        d: &d,
        seed: eval_seed,
    };
    let logging = evaluate(&RetrievalOrder, &index, qac_events, config.retrieve_m)?;
    let mut general_missing = 0;

    let mut cells = Vec::with_capacity(4);
    for (i, kind) in ModelKind::ALL.into_iter().enumerate() {
        let (data, hidden, train) = match kind {
            ModelKind::LinearBaseline => (baseline_set, &[][..], &config.baseline_train),
            ModelKind::RealOnly => (&real_only, &config.hidden_layers[..], &config.train),
            ModelKind::SynthOnly => (&synth_only, &config.hidden_layers[..], &config.train),
            ModelKind::Mix5050 => (&mixed, &config.hidden_layers[..], &config.train),
        };
        let train = TrainConfig {
            seed: train_seed.wrapping_add(i as u64),
            ..train.clone()
        };
        let t = Instant::now();
        let mut cell = CellResult {
            model: kind,
            train_events: data.len(),
            final_loss: None,
            mrr_qac: None,
            mrr_general: None,
            mean_click_position: None,
            delta_mrr_qac: None,
            delta_mrr_general: None,
            delta_click_position: None,
            error: None,
            seconds: 0.0,
        };
        match train_ranker(&index, data, hidden, &train) {
            Ok(fitted) => {
                cell.final_loss = fitted.report.epoch_losses.last().copied();
                let q = evaluate(&fitted.model, &index, qac_events, config.retrieve_m)?;
                let g = evaluate(&fitted.model, &index, general_events, config.retrieve_m)?;
                general_missing = g.n_target_missing;
                cell.mrr_qac = Some(q.mrr);
                cell.mean_click_position = q.mean_click_position;
                cell.mrr_general = Some(g.mrr);
            }
            Err(e @ Error::Diverged { .. }) => cell.error = Some(e.to_string()),
            Err(e) => return Err(e),
        }
        cell.seconds = t.elapsed().as_secs_f64();
        progress(&format!(
            "seed {seed}: {:<16} {} events  MRR_QAC {}  MRR_general {}  ({:.1}s)",
            kind.label(),
            cell.train_events,
            fmt_opt(cell.mrr_qac, 4),
            fmt_opt(cell.mrr_general, 4),
            cell.seconds
        ));
        cells.push(cell);
    }

    let base = cells[0].clone();
    for cell in &mut cells {
        cell.delta_mrr_qac = relative(cell.mrr_qac, base.mrr_qac);
        cell.delta_mrr_general = relative(cell.mrr_general, base.mrr_general);
        cell.delta_click_position = match (cell.mean_click_position, base.mean_click_position) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        };
    }

    Ok(SeedReport {
        seed,
        real_instances: real.instances.len(),
        synthetic_instances: synthetic.instances.len(),
        real_skipped: real.skipped,
        synthetic_skipped: synthetic.skipped,
        simulated_users: sim.users,
        eval_qac_events: qac_test.len(),
        eval_general_events: logs_test.len(),
        general_target_missing: general_missing,
        logging_policy_mrr_qac: logging.mrr,
        cells,
    })
}

fn fmt_opt(x: Option<f64>, digits: usize) -> String {
    match x {
        Some(v) => format!("{v:.digits$}"),
        None => "-".into(),
    }
}

fn fmt_pct(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:+.2}%"),
        None => "failed".into(),
    }
}

/// Aligned text table of the per-model medians and per-seed deltas.
pub fn format_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let seeds: Vec<String> = report.seeds.iter().map(|s| s.seed.to_string()).collect();
    let _ = writeln!(
        out,
        "Training strategy vs linear baseline (median over seeds {})",
        seeds.join(", ")
    );
    let _ = writeln!(
        out,
        "{:<18} {:>10} {:>12} {:>10} {:>12} {:>12}",
        "model", "MRR_QAC", "dMRR_QAC", "MRR_gen", "dMRR_gen", "dClickPos"
    );
    for s in &report.summary {
        let _ = writeln!(
            out,
            "{:<18} {:>10} {:>12} {:>10} {:>12} {:>12}",
            s.model.label(),
            fmt_opt(s.mrr_qac, 4),
            fmt_pct(s.delta_mrr_qac),
            fmt_opt(s.mrr_general, 4),
            fmt_pct(s.delta_mrr_general),
            fmt_opt(s.delta_click_position, 3),
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<8} {:<18} {:>12} {:>12}", "seed", "model", "dMRR_QAC", "dMRR_gen");
    for r in &report.seeds {
        for c in r.cells.iter().skip(1) {
            let _ = writeln!(
                out,
                "{:<8} {:<18} {:>12} {:>12}",
                r.seed,
                c.model.label(),
                fmt_pct(c.delta_mrr_qac),
                fmt_pct(c.delta_mrr_general)
            );
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "pattern {}",
        if report.pattern.holds() { "holds" } else { "does not hold" }
    );
    out
}
