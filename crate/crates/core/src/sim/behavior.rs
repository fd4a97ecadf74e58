use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DeviceType, QueryRecord};
use crate::error::{Error, Result};
use crate::index::QueryId;

/// How simulated users choose what to search for.
///
/// The intent weight of a query is
/// `popularity * seasonal_boost[month] * device_factor[device][vertical]`,
/// further multiplied by `department_affinity` / `vertical_affinity` when the
/// session's previous query shares the department / vertical. The neutral
/// default (all factors 1) samples queries proportionally to
/// popularity times seasonality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorConfig {
    /// Probability that a session continues after each query (geometric
    /// session length).
    pub session_continue: f64,
    pub department_affinity: f64,
    pub vertical_affinity: f64,
    /// Spread of the per-(device, vertical) log-multipliers; 0 disables them.
    pub device_vertical_spread: f64,
    /// Relative frequency of ios_app, android_app, desktop_browser,
    /// mobile_browser sessions.
    pub device_mix: [f64; 4],
    pub affinity_seed: u64,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        BehaviorConfig {
            session_continue: 0.5,
            department_affinity: 1.0,
            vertical_affinity: 1.0,
            device_vertical_spread: 0.0,
            device_mix: [0.3, 0.25, 0.3, 0.15],
            affinity_seed: 0,
        }
    }
}

impl BehaviorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.session_continue) {
            return Err(Error::Config("session_continue must be in [0, 1)".into()));
        }
        if !(self.department_affinity > 0.0 && self.vertical_affinity > 0.0) {
            return Err(Error::Config("affinities must be positive".into()));
        }
        if !(self.device_vertical_spread >= 0.0 && self.device_vertical_spread.is_finite()) {
            return Err(Error::Config(
                "device_vertical_spread must be non-negative".into(),
            ));
        }
        if self.device_mix.iter().any(|&w| w.is_nan() || w < 0.0) || self.device_mix.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::Config(
                "device_mix needs non-negative weights with a positive sum".into(),
            ));
        }
        Ok(())
    }
}

type SamplerKey = (usize, Option<(u16, u16)>);

/// Samples intended queries under a [`BehaviorConfig`] for a fixed month.
pub struct IntentModel<'a> {
    catalog: &'a [QueryRecord],
    behavior: BehaviorConfig,
    base: Vec<f64>,
    device_factor: Vec<[f64; 4]>,
    devices: WeightedIndex<f64>,
    samplers: HashMap<SamplerKey, WeightedIndex<f64>>,
}

impl<'a> IntentModel<'a> {
    pub fn new(catalog: &'a [QueryRecord], behavior: &BehaviorConfig, month: u8) -> Result<Self> {
        if catalog.is_empty() {
            return Err(Error::Config("catalog is empty".into()));
        }
        behavior.validate()?;
        super::check_month(month)?;

        let base = catalog
            .iter()
            .map(|q| q.popularity * q.seasonality(month))
            .collect();
        let n_verticals = catalog.iter().map(|q| q.vertical).max().unwrap_or(0) as usize + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(behavior.affinity_seed);
        let device_factor = (0..n_verticals)
            .map(|_| {
                let mut row = [1.0; 4];
                for f in &mut row {
                    let z: f64 = rng.random_range(-1.0..1.0);
                    *f = (behavior.device_vertical_spread * z).exp();
                }
                row
            })
            .collect();
        let devices = WeightedIndex::new(behavior.device_mix)
            .map_err(|e| Error::Config(format!("device_mix: {e}")))?;

        Ok(IntentModel {
            catalog,
            behavior: behavior.clone(),
            base,
            device_factor,
            devices,
            samplers: HashMap::new(),
        })
    }

    pub fn sample_device<R: Rng>(&self, rng: &mut R) -> DeviceType {
        DeviceType::ALL[self.devices.sample(rng)]
    }

    /// Whether the session continues with another query.
    pub fn continues<R: Rng>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < self.behavior.session_continue
    }

    /// Relative intent weight of `query`.
    pub fn weight(&self, query: QueryId, device: DeviceType, previous: Option<QueryId>) -> f64 {
        let q = &self.catalog[query.index()];
        let mut w = self.base[query.index()] * self.device_factor[q.vertical as usize][device.ordinal()];
        if let Some(prev) = previous {
            let p = &self.catalog[prev.index()];
            if p.department == q.department {
                w *= self.behavior.department_affinity;
            }
            if p.vertical == q.vertical {
                w *= self.behavior.vertical_affinity;
            }
        }
        w
    }

    pub fn sample<R: Rng>(
        &mut self,
        rng: &mut R,
        device: DeviceType,
        previous: Option<QueryId>,
    ) -> QueryId {
        let device_key = if self.behavior.device_vertical_spread > 0.0 {
            device.ordinal()
        } else {
            0
        };
        let context_free =
            self.behavior.department_affinity == 1.0 && self.behavior.vertical_affinity == 1.0;
        let prev_key = previous.filter(|_| !context_free).map(|p| {
            let r = &self.catalog[p.index()];
            (r.department, r.vertical)
        });
        let key = (device_key, prev_key);
        if !self.samplers.contains_key(&key) {
            let representative = previous.filter(|_| !context_free);
            let weights: Vec<f64> = (0..self.catalog.len())
                .map(|i| self.weight(QueryId(i as u32), device, representative))
                .collect();
            let sampler = WeightedIndex::new(weights).expect("intent weights are positive");
            self.samplers.insert(key, sampler);
        }
        QueryId(self.samplers[&key].sample(rng) as u32)
    }
}
