//! Training data: the prefix-length distribution D(s), synthetic instances
//! from full search queries, real instances from engagement logs, and mixes
//! of the two.

use std::collections::{BTreeMap, HashMap};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_into, ContextSignals, FeatureLayout, ScalerStats};
use crate::index::{Candidate, PrefixIndex};
use crate::ranker::{train, EventSet, Network, RankerModel, TrainConfig, TrainReport, HIDDEN_LAYERS};
use crate::sim::{DeviceType, QacEngagementEntry, SearchLogEntry, MAX_QUERY_CHARS};

pub const DEFAULT_SMOOTHING: f64 = 0.5;
const FALLBACK_WINDOW: usize = 2;

/// For every query length `s`, a pmf over prefix lengths `1..=s`.
///
/// `pmf[s][k - 1]` is the probability of a `k`-character prefix. Lengths
/// never seen in the fitting data fall back to counts pooled from nearby
/// observed lengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrefixLengthDistribution {
    pub smoothing: f64,
    /// Query lengths that had at least one engagement.
    pub observed: Vec<usize>,
    pub pmf: BTreeMap<usize, Vec<f64>>,
    #[serde(skip)]
    counts: BTreeMap<usize, Vec<f64>>,
}

impl PrefixLengthDistribution {
    /// Fit from `(query length, prefix length)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>, smoothing: f64) -> Result<Self> {
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::Argument(format!("smoothing must be non-negative, got {smoothing}")));
        }
        let mut counts: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (s, k) in pairs {
            if k == 0 || k > s {
                return Err(Error::Argument(format!(
                    "prefix length {k} outside 1..={s}"
                )));
            }
            counts.entry(s).or_insert_with(|| vec![0.0; s])[k - 1] += 1.0;
        }
        if counts.is_empty() {
            return Err(Error::Argument("no engagement to estimate from".into()));
        }
        let mut d = PrefixLengthDistribution {
            smoothing,
            observed: counts.keys().copied().collect(),
            pmf: BTreeMap::new(),
            counts,
        };
        let longest = MAX_QUERY_CHARS.max(*d.observed.last().unwrap());
        for s in 1..=longest {
            let p = d.compute(s);
            d.pmf.insert(s, p);
        }
        Ok(d)
    }

    /// Probability of each prefix length `1..=s`.
    pub fn pmf(&self, s: usize) -> Vec<f64> {
        match self.pmf.get(&s) {
            Some(p) => p.clone(),
            None => self.compute(s),
        }
    }

    fn compute(&self, s: usize) -> Vec<f64> {
        if s == 0 {
            return Vec::new();
        }
        let mut raw = vec![0.0; s];
        if let Some(c) = self.counts.get(&s) {
            raw.copy_from_slice(c);
        } else {
            let max_distance = self
                .observed
                .iter()
                .map(|&o| o.abs_diff(s))
                .max()
                .unwrap_or(0);
            let mut window = FALLBACK_WINDOW;
            loop {
                for (&o, c) in self.counts.range(s.saturating_sub(window)..=s + window) {
                    for (k, &n) in c.iter().enumerate().take(s.min(o)) {
                        raw[k] += n;
                    }
                }
                if raw.iter().any(|&n| n > 0.0) || window >= max_distance {
                    break;
                }
                window += 1;
            }
        }
        for n in &mut raw {
            *n += self.smoothing;
        }
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            raw.iter().map(|n| n / total).collect()
        } else {
            vec![1.0 / s as f64; s]
        }
    }

    /// Draw a prefix length for a query of `s` characters.
    pub fn sample_length<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        let owned;
        let pmf = match self.pmf.get(&s) {
            Some(p) => p,
            None => {
                owned = self.compute(s);
                &owned
            }
        };
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in pmf.iter().enumerate() {
            acc += p;
            if u < acc {
                return k + 1;
            }
        }
        // Rounding left the tail short of 1; take the last supported length.
        pmf.iter().rposition(|&p| p > 0.0).map_or(s, |k| k + 1)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let d: PrefixLengthDistribution = crate::io::read_json(path)?;
        for (&s, p) in &d.pmf {
            let sum: f64 = p.iter().sum();
            if p.len() != s || (sum - 1.0).abs() > 1e-9 || p.iter().any(|&x| x.is_nan() || x < 0.0) {
                return Err(Error::format(path, format!("pmf for length {s} is not a distribution over 1..={s}")));
            }
        }
        if d.pmf.is_empty() {
            return Err(Error::format(path, "no pmfs"));
        }
        Ok(d)
    }
}

/// Tally the click-time prefix length against the clicked query's length.
pub fn estimate_distribution(
    engagement: &[QacEngagementEntry],
    smoothing: f64,
) -> Result<PrefixLengthDistribution> {
    PrefixLengthDistribution::from_pairs(
        engagement
            .iter()
            .map(|e| (e.clicked.chars().count(), e.prefix.chars().count())),
        smoothing,
    )
}

/// The first `k ~ D(len(query))` characters of `query`.
pub fn sample_prefix<R: Rng + ?Sized>(query: &str, d: &PrefixLengthDistribution, rng: &mut R) -> String {
    let s = query.chars().count();
    if s == 0 {
        return String::new();
    }
    let k = d.sample_length(s, rng);
    query.chars().take(k).collect()
}

/// One ranking event: a prefix in context, the query the user wanted and the
/// suggestions they did not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub prefix: String,
    pub device_type: DeviceType,
    pub previous_query_text: Option<String>,
    pub month: u8,
    pub positive: String,
    pub negatives: Vec<String>,
}

impl TrainingInstance {
    pub fn is_trainable(&self) -> bool {
        !self.negatives.is_empty() && !self.negatives.contains(&self.positive)
    }
}

/// Entries dropped while building instances, by reason.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    pub unknown_query: usize,
    pub not_retrieved: usize,
    pub no_negatives: usize,
    pub inconsistent: usize,
}

impl SkipCounts {
    pub fn total(&self) -> usize {
        self.unknown_query + self.not_retrieved + self.no_negatives + self.inconsistent
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InstanceSet {
    pub instances: Vec<TrainingInstance>,
    pub skipped: SkipCounts,
}

/// Synthetic instances: for every logged query sample a prefix from D, take
/// the top `m` retrieved suggestions, and use the logged query as the
/// positive and the other suggestions as negatives. Queries that retrieval
/// does not return for their own prefix are skipped.
pub fn generate_synthetic<R: Rng + ?Sized>(
    search_logs: &[SearchLogEntry],
    d: &PrefixLengthDistribution,
    index: &PrefixIndex,
    m: usize,
    rng: &mut R,
) -> Result<InstanceSet> {
    if m == 0 {
        return Err(Error::Argument("m must be at least 1".into()));
    }
    let mut out = InstanceSet::default();
    let mut cache: HashMap<String, Vec<Candidate>> = HashMap::new();
    for entry in search_logs {
        let Some(id) = index.lookup(&entry.query_text) else {
            out.skipped.unknown_query += 1;
            continue;
        };
        let prefix = sample_prefix(&entry.query_text, d, rng);
        if prefix.is_empty() {
            out.skipped.inconsistent += 1;
            continue;
        }
        if !cache.contains_key(&prefix) {
            let found = index.retrieve(&prefix, m)?;
            cache.insert(prefix.clone(), found);
        }
        let retrieved = &cache[&prefix];
        if !retrieved.iter().any(|c| c.query == id) {
            out.skipped.not_retrieved += 1;
            continue;
        }
        let negatives: Vec<String> = retrieved
            .iter()
            .filter(|c| c.query != id)
            .map(|c| index.query(c.query).text.clone())
            .collect();
        if negatives.is_empty() {
            out.skipped.no_negatives += 1;
            continue;
        }
        out.instances.push(TrainingInstance {
            prefix,
            device_type: entry.device_type,
            previous_query_text: entry.previous_query_text.clone(),
            month: entry.month,
            positive: entry.query_text.clone(),
            negatives,
        });
    }
    Ok(out)
}

/// Real instances: the clicked suggestion is the positive and every other
/// shown suggestion a negative.
pub fn build_real_instances(engagement: &[QacEngagementEntry]) -> InstanceSet {
    let mut out = InstanceSet::default();
    for e in engagement {
        if !e.is_consistent() {
            out.skipped.inconsistent += 1;
            continue;
        }
        let negatives: Vec<String> = e
            .shown
            .iter()
            .filter(|q| **q != e.clicked)
            .cloned()
            .collect();
        if negatives.is_empty() {
            out.skipped.no_negatives += 1;
            continue;
        }
        out.instances.push(TrainingInstance {
            prefix: e.prefix.clone(),
            device_type: e.device_type,
            previous_query_text: e.previous_query_text.clone(),
            month: e.month,
            positive: e.clicked.clone(),
            negatives,
        });
    }
    out
}

/// Fraction of a mixed dataset that comes from real engagement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MixRatio(f64);

impl MixRatio {
    pub const REAL_ONLY: MixRatio = MixRatio(1.0);
    pub const SYNTHETIC_ONLY: MixRatio = MixRatio(0.0);
    pub const BALANCED: MixRatio = MixRatio(0.5);

    pub fn new(real_fraction: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&real_fraction) {
            Ok(MixRatio(real_fraction))
        } else {
            Err(Error::Argument(format!(
                "real fraction must be in [0, 1], got {real_fraction}"
            )))
        }
    }

    pub fn real_fraction(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for MixRatio {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        MixRatio::new(value)
    }
}

impl From<MixRatio> for f64 {
    fn from(r: MixRatio) -> f64 {
        r.0
    }
}

/// Sizes `(real, synthetic)` of a mix. The total is the largest size that
/// both sources can supply at the ratio, capped at the larger source.
pub fn mix_sizes(n_real: usize, n_synthetic: usize, ratio: MixRatio) -> Result<(usize, usize)> {
    let r = ratio.real_fraction();
    if r == 1.0 {
        return if n_real > 0 {
            Ok((n_real, 0))
        } else {
            Err(Error::MixShortfall("real-only mix requested but there are no real instances".into()))
        };
    }
    if r == 0.0 {
        return if n_synthetic > 0 {
            Ok((0, n_synthetic))
        } else {
            Err(Error::MixShortfall(
                "synthetic-only mix requested but there are no synthetic instances".into(),
            ))
        };
    }
    if n_real == 0 || n_synthetic == 0 {
        return Err(Error::MixShortfall(format!(
            "real fraction {r} needs both sources, have {n_real} real and {n_synthetic} synthetic"
        )));
    }
    let total = (n_real.max(n_synthetic) as f64)
        .min(n_real as f64 / r)
        .min(n_synthetic as f64 / (1.0 - r));
    let real = ((total * r).round() as usize).clamp(1, n_real);
    let synthetic = ((total * (1.0 - r)).round() as usize).clamp(1, n_synthetic);
    Ok((real, synthetic))
}

/// Subsample both sources to the ratio and shuffle them together.
pub fn mix_datasets<R: Rng + ?Sized>(
    real: &[TrainingInstance],
    synthetic: &[TrainingInstance],
    ratio: MixRatio,
    rng: &mut R,
) -> Result<Vec<TrainingInstance>> {
    let (n_real, n_synthetic) = mix_sizes(real.len(), synthetic.len(), ratio)?;
    let mut picked: Vec<&TrainingInstance> = Vec::with_capacity(n_real + n_synthetic);
    picked.extend(real.choose_multiple(rng, n_real));
    picked.extend(synthetic.choose_multiple(rng, n_synthetic));
    picked.shuffle(rng);
    Ok(picked.into_iter().cloned().collect())
}

/// Instances encoded for training.
#[derive(Clone, Debug)]
pub struct EncodedEvents {
    pub events: EventSet,
    pub layout: FeatureLayout,
    /// Instances whose positive or a negative is not in the catalog.
    pub skipped_unknown: usize,
}

/// Raw features of every instance, positive row first.
pub fn encode_instances(
    index: &PrefixIndex,
    layout: &FeatureLayout,
    instances: &[TrainingInstance],
) -> EncodedEvents {
    let dim = layout.dim();
    let mut events = EventSet::new(dim);
    let mut skipped_unknown = 0;
    let mut buf = Vec::new();
    'next: for inst in instances {
        let ctx = ContextSignals::resolve(
            index,
            &inst.prefix,
            inst.device_type,
            inst.previous_query_text.as_deref(),
            inst.month,
        );
        buf.clear();
        buf.resize(dim * (1 + inst.negatives.len()), 0.0);
        for (text, row) in std::iter::once(&inst.positive)
            .chain(&inst.negatives)
            .zip(buf.chunks_mut(dim))
        {
            let Some(id) = index.lookup(text) else {
                skipped_unknown += 1;
                continue 'next;
            };
            let c = index.candidate_for(id, &inst.prefix);
            extract_into(layout, index.query(id), c.is_exact_match, &ctx, row);
        }
        events.push(&buf).expect("rows match the layout");
    }
    EncodedEvents {
        events,
        layout: *layout,
        skipped_unknown,
    }
}

/// Fit the scaler on the encoded rows and standardize them in place.
pub fn standardize(encoded: &mut EncodedEvents) -> Result<ScalerStats> {
    let stats = ScalerStats::fit_rows(encoded.layout, encoded.events.matrix())?;
    stats.apply_rows(encoded.events.rows_mut());
    Ok(stats)
}

/// A model trained from instances, with what was dropped on the way.
#[derive(Clone, Debug)]
pub struct FittedModel {
    pub model: RankerModel,
    pub report: TrainReport,
    pub skipped_unknown: usize,
}

/// Encode, standardize and train a network with the given hidden layers.
pub fn train_ranker(
    index: &PrefixIndex,
    instances: &[TrainingInstance],
    hidden: &[usize],
    config: &TrainConfig,
) -> Result<FittedModel> {
    config.validate()?;
    let layout = FeatureLayout::for_catalog(index.catalog());
    let mut encoded = encode_instances(index, &layout, instances);
    if encoded.events.is_empty() {
        return Err(Error::Argument("no trainable instances".into()));
    }
    let scaler = standardize(&mut encoded)?;
    let mut network = Network::init(layout.dim(), hidden, config.seed)?;
    let report = train(&mut network, &encoded.events, config)?;
    let mut model = RankerModel::new(network, scaler)?;
    model.train_config = Some(config.clone());
    Ok(FittedModel {
        model,
        report,
        skipped_unknown: encoded.skipped_unknown,
    })
}

/// The ranker network `[F, 256, 128, 64, 1]`.
pub fn train_neural(
    index: &PrefixIndex,
    instances: &[TrainingInstance],
    config: &TrainConfig,
) -> Result<FittedModel> {
    train_ranker(index, instances, &HIDDEN_LAYERS, config)
}

/// A single affine layer over the same features.
pub fn train_linear_baseline(
    index: &PrefixIndex,
    instances: &[TrainingInstance],
    config: &TrainConfig,
) -> Result<FittedModel> {
    train_ranker(index, instances, &[], config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::sim::QueryRecord;

    fn entry(prefix: &str, shown: &[&str], clicked: &str) -> QacEngagementEntry {
        QacEngagementEntry {
            prefix: prefix.into(),
            shown: shown.iter().map(|s| s.to_string()).collect(),
            clicked: clicked.into(),
            clicked_rank: shown.iter().position(|s| *s == clicked).unwrap() + 1,
            session_id: "s".into(),
            previous_query_text: None,
            device_type: DeviceType::IosApp,
            month: 3,
        }
    }

    fn leather() -> PrefixIndex {
        PrefixIndex::build(vec![
            QueryRecord::new("black leather jacket", 0.9, 0, 0),
            QueryRecord::new("black leather boots", 0.5, 1, 0),
            QueryRecord::new("black leather gloves", 0.2, 0, 1),
        ])
        .unwrap()
    }

    fn log(q: &str) -> SearchLogEntry {
        SearchLogEntry {
            query_text: q.into(),
            session_id: "s1".into(),
            previous_query_text: None,
            device_type: DeviceType::DesktopBrowser,
            month: 5,
        }
    }

    fn point_mass(s: usize, k: usize) -> PrefixLengthDistribution {
        PrefixLengthDistribution::from_pairs([(s, k)], 0.0).unwrap()
    }

    #[test]
    fn single_entry_is_point_mass() {
        let d = estimate_distribution(&[entry("abc", &["abcde", "x"], "abcde")], 0.0).unwrap();
        assert_eq!(d.pmf(5), vec![0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn hand_counted_pmf() {
        let d = PrefixLengthDistribution::from_pairs([(6, 2), (6, 2), (6, 4)], 0.0).unwrap();
        let p = d.pmf(6);
        assert_eq!(p[1], 2.0 / 3.0);
        assert_eq!(p[3], 1.0 / 3.0);
        assert_eq!(p.iter().filter(|&&x| x > 0.0).count(), 2);
    }

    #[test]
    fn smoothing_covers_support() {
        let d = PrefixLengthDistribution::from_pairs([(4, 2)], 0.5).unwrap();
        let p = d.pmf(4);
        assert_eq!(p, vec![0.5 / 3.0, 1.5 / 3.0, 0.5 / 3.0, 0.5 / 3.0]);
    }

    #[test]
    fn fallback_pools_nearby_lengths() {
        let d = PrefixLengthDistribution::from_pairs([(10, 3), (11, 3), (12, 5), (30, 9)], 0.0).unwrap();
        // 11 and 12 are within the window of 13; 10 and 30 are not.
        assert_eq!(d.pmf(13), [vec![0.0, 0.0, 0.5, 0.0, 0.5], vec![0.0; 8]].concat());
        // Nothing within 2 of 20: the window widens until 12 is reached.
        assert_eq!(d.pmf(20)[4], 1.0);
        // Pooled counts longer than s are dropped.
        assert_eq!(d.pmf(2), vec![0.5, 0.5]);
    }

    #[test]
    fn every_pmf_sums_to_one() {
        let d = PrefixLengthDistribution::from_pairs([(7, 1), (7, 7), (9, 4), (40, 13)], 0.3).unwrap();
        for s in 1..=MAX_QUERY_CHARS {
            let p = d.pmf(s);
            assert_eq!(p.len(), s);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12, "s={s}");
        }
    }

    #[test]
    fn empty_engagement_is_an_error() {
        assert!(estimate_distribution(&[], 0.5).is_err());
        assert!(PrefixLengthDistribution::from_pairs([(3, 4)], 0.5).is_err());
        assert!(PrefixLengthDistribution::from_pairs([(3, 1)], -1.0).is_err());
    }

    #[test]
    fn full_length_point_mass_returns_query() {
        let d = point_mass(20, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_prefix("black leather jacket", &d, &mut rng), "black leather jacket");
    }

    #[test]
    fn seven_characters() {
        let d = point_mass(20, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_prefix("black leather jacket", &d, &mut rng), "black l");
    }

    #[test]
    fn synthetic_from_leather_family() {
        let index = leather();
        let d = point_mass(20, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = generate_synthetic(&[log("black leather jacket")], &d, &index, 50, &mut rng).unwrap();
        assert_eq!(out.instances.len(), 1);
        let inst = &out.instances[0];
        assert_eq!(inst.prefix, "black l");
        assert_eq!(inst.positive, "black leather jacket");
        assert_eq!(inst.negatives, vec!["black leather boots", "black leather gloves"]);
        assert_eq!(inst.device_type, DeviceType::DesktopBrowser);
        assert_eq!(inst.month, 5);
    }

    #[test]
    fn synthetic_skips() {
        let index = PrefixIndex::build(vec![
            QueryRecord::new("zebra print", 0.5, 0, 0),
            QueryRecord::new("apple", 0.9, 0, 0),
            QueryRecord::new("apricot", 0.8, 0, 0),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let full = PrefixLengthDistribution::from_pairs([(11, 11), (5, 1), (7, 1)], 0.0).unwrap();
        let logs = [log("zebra print"), log("nope"), log("apricot")];
        let out = generate_synthetic(&logs, &full, &index, 1, &mut rng).unwrap();
        assert_eq!(out.skipped.no_negatives, 1);
        assert_eq!(out.skipped.unknown_query, 1);
        // "a" retrieves only "apple" at m=1.
        assert_eq!(out.skipped.not_retrieved, 1);
        assert!(out.instances.is_empty());
    }

    #[test]
    fn real_instances() {
        let out = build_real_instances(&[
            entry("b", &["a", "b", "c"], "b"),
            entry("a", &["a"], "a"),
        ]);
        assert_eq!(out.instances.len(), 1);
        assert_eq!(out.instances[0].positive, "b");
        assert_eq!(out.instances[0].negatives, vec!["a", "c"]);
        assert_eq!(out.skipped.no_negatives, 1);
    }

    #[test]
    fn mix_size_rule() {
        let half = MixRatio::BALANCED;
        assert_eq!(mix_sizes(1000, 1000, half).unwrap(), (500, 500));
        assert_eq!(mix_sizes(100, 1000, half).unwrap(), (100, 100));
        assert_eq!(mix_sizes(1000, 100, half).unwrap(), (100, 100));
        assert_eq!(mix_sizes(7, 3, MixRatio::REAL_ONLY).unwrap(), (7, 0));
        assert_eq!(mix_sizes(7, 3, MixRatio::SYNTHETIC_ONLY).unwrap(), (0, 3));
        assert_eq!(mix_sizes(300, 1000, MixRatio::new(0.25).unwrap()).unwrap(), (250, 750));
        assert!(mix_sizes(0, 10, half).is_err());
        assert!(mix_sizes(0, 10, MixRatio::REAL_ONLY).is_err());
        assert!(MixRatio::new(1.5).is_err());
    }

    #[test]
    fn mix_preserves_contents() {
        let make = |tag: &str, n: usize| -> Vec<TrainingInstance> {
            (0..n)
                .map(|i| TrainingInstance {
                    prefix: format!("{tag}{i}"),
                    device_type: DeviceType::IosApp,
                    previous_query_text: None,
                    month: 1,
                    positive: format!("{tag}{i}x"),
                    negatives: vec![format!("{tag}{i}y")],
                })
                .collect()
        };
        let (real, synthetic) = (make("r", 40), make("s", 40));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mixed = mix_datasets(&real, &synthetic, MixRatio::BALANCED, &mut rng).unwrap();
        assert_eq!(mixed.len(), 40);
        assert_eq!(mixed.iter().filter(|i| i.prefix.starts_with('r')).count(), 20);
        for m in &mixed {
            assert!(real.contains(m) || synthetic.contains(m));
        }
        let only = mix_datasets(&real, &synthetic, MixRatio::REAL_ONLY, &mut rng).unwrap();
        let mut sorted = only.clone();
        sorted.sort_by(|a, b| a.prefix.cmp(&b.prefix));
        let mut expect = real.clone();
        expect.sort_by(|a, b| a.prefix.cmp(&b.prefix));
        assert_eq!(sorted, expect);
        let again = mix_datasets(&real, &synthetic, MixRatio::BALANCED, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(again, mixed);
    }

    #[test]
    fn encoding_puts_positive_first() {
        let index = leather();
        let layout = FeatureLayout::for_catalog(index.catalog());
        let inst = TrainingInstance {
            prefix: "black l".into(),
            device_type: DeviceType::IosApp,
            previous_query_text: Some("black leather gloves".into()),
            month: 1,
            positive: "black leather boots".into(),
            negatives: vec!["black leather jacket".into(), "unknown".into()],
        };
        let mut good = inst.clone();
        good.negatives.pop();
        let enc = encode_instances(&index, &layout, &[inst, good]);
        assert_eq!(enc.skipped_unknown, 1);
        assert_eq!(enc.events.len(), 1);
        let rows = enc.events.event(0);
        assert_eq!(rows.nrows(), 2);
        assert_eq!(rows[[0, 0]], 0.5f64.ln());
        assert_eq!(rows[[1, 0]], 0.9f64.ln());
        // Department match with "black leather gloves" (department 0).
        let dept_flag = layout.flag_offset() + 1;
        assert_eq!(rows[[0, dept_flag]], 0.0);
        assert_eq!(rows[[1, dept_flag]], 1.0);
    }

    #[test]
    fn distribution_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = PrefixLengthDistribution::from_pairs([(6, 2), (6, 4), (9, 3)], 0.5).unwrap();
        let path = dir.path().join("d.json");
        d.save(&path).unwrap();
        let back = PrefixLengthDistribution::load(&path).unwrap();
        assert_eq!(back.pmf, d.pmf);
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = ChaCha8Rng::seed_from_u64(4);
        for s in [3, 6, 9, 50] {
            assert_eq!(d.sample_length(s, &mut a), back.sample_length(s, &mut b));
        }
    }
}
