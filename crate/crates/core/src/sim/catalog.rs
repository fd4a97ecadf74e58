use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::QueryRecord;
use crate::error::{Error, Result};

/// Upper bound on generated catalog size; the phrase vocabulary supports a
/// few hundred thousand distinct texts and rejection sampling slows down well
/// before that.
pub const MAX_CATALOG_QUERIES: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CatalogConfig {
    pub n_queries: usize,
    pub n_departments: u16,
    pub n_verticals: u16,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        CatalogConfig {
            n_queries: 10_000,
            n_departments: 8,
            n_verticals: 6,
            zipf_exponent: 1.0,
            seed: 7,
        }
    }
}

// Head nouns grouped by shopping area; the group decides the department.
const NOUN_GROUPS: [&[&str]; 12] = [
    &["jacket", "boots", "gloves", "shirt", "jeans", "dress", "hoodie", "sweater", "scarf", "socks"],
    &["headphones", "charger", "speaker", "monitor", "keyboard", "laptop", "tablet", "camera", "cable", "mouse"],
    &["lamp", "rug", "curtains", "pillow", "blanket", "towels", "mirror", "shelf", "vase", "clock"],
    &["pan", "knife", "blender", "kettle", "mug", "plates", "toaster", "skillet", "spatula", "grater"],
    &["milk", "coffee", "cereal", "bread", "cheese", "yogurt", "juice", "pasta", "rice", "tea"],
    &["puzzle", "blocks", "doll", "robot", "kite", "ball", "train set", "race car", "drone", "crayons"],
    &["bike", "helmet", "racket", "dumbbells", "tent", "backpack", "skates", "water bottle", "shorts", "yoga mat"],
    &["shampoo", "lotion", "perfume", "lipstick", "hair brush", "razor", "soap", "serum", "mascara", "sunscreen"],
    &["hose", "shovel", "planter", "seeds", "mower", "rake", "fence", "sprinkler", "soil", "wheelbarrow"],
    &["pens", "notebook", "stapler", "folder", "printer", "desk", "office chair", "binder", "tape", "markers"],
    &["leash", "collar", "kibble", "litter", "aquarium", "cage", "harness", "dog treats", "pet bowl", "dog bed"],
    &["tires", "wipers", "car battery", "wax", "jumper cables", "floor mats", "seat covers", "air filter", "motor oil", "coolant"],
];

const COLORS: &[&str] = &[
    "black", "white", "red", "blue", "green", "gray", "brown", "pink", "navy", "beige", "yellow",
    "purple", "orange", "silver", "gold",
];
const MATERIALS: &[&str] = &[
    "leather", "wool", "cotton", "steel", "wooden", "plastic", "glass", "ceramic", "silk", "denim",
    "bamboo", "organic",
];
const QUALIFIERS: &[&str] = &[
    "small", "large", "mini", "portable", "wireless", "waterproof", "vintage", "kids", "mens",
    "womens", "heavy duty", "premium", "cheap", "best",
];
const BRANDS: &[&str] = &[
    "acme", "zenith", "orion", "nova", "apex", "lumen", "vertex", "polar", "summit", "echo",
];
const AUDIENCES: &[&str] = &["men", "women", "kids", "dogs", "home", "travel"];

/// Generate a catalog of distinct multi-token queries with Zipf popularity
/// `1 / rank^exponent`. Shorter phrases tend to receive the better ranks.
pub fn generate_catalog(config: &CatalogConfig) -> Result<Vec<QueryRecord>> {
    if config.n_queries == 0 || config.n_queries > MAX_CATALOG_QUERIES {
        return Err(Error::Config(format!(
            "n_queries must be in 1..={MAX_CATALOG_QUERIES}, got {}",
            config.n_queries
        )));
    }
    if config.n_departments == 0 || config.n_verticals == 0 {
        return Err(Error::Config(
            "n_departments and n_verticals must be at least 1".into(),
        ));
    }
    if !(config.zipf_exponent > 0.0 && config.zipf_exponent.is_finite()) {
        return Err(Error::Config(format!(
            "zipf_exponent must be positive, got {}",
            config.zipf_exponent
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Per-group seasonal curve: peak month and amplitude.
    let seasons: Vec<(f64, f64)> = (0..NOUN_GROUPS.len())
        .map(|_| (rng.random_range(0..12) as f64, rng.random_range(0.0..0.8)))
        .collect();

    let mut seen = HashSet::with_capacity(config.n_queries);
    let mut drafts: Vec<(f64, QueryRecord)> = Vec::with_capacity(config.n_queries);
    while drafts.len() < config.n_queries {
        let group = rng.random_range(0..NOUN_GROUPS.len());
        let slot = rng.random_range(0..NOUN_GROUPS[group].len());
        let noun = NOUN_GROUPS[group][slot];
        let text = phrase(&mut rng, noun);
        if !seen.insert(text.clone()) {
            continue;
        }
        let (peak, amplitude) = seasons[group];
        let mut seasonal_boost = [0.0; 12];
        for (m, boost) in seasonal_boost.iter_mut().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * (m as f64 - peak) / 12.0;
            let jitter: f64 = rng.random_range(-0.15..0.15);
            *boost = (amplitude * phase.cos() + jitter).exp();
        }
        let tokens = text.split_whitespace().count() as f64;
        let sort_key = tokens + rng.random_range(0.0..2.5);
        drafts.push((
            sort_key,
            QueryRecord {
                text,
                popularity: 0.0,
                department: (group % usize::from(config.n_departments)) as u16,
                vertical: (slot % usize::from(config.n_verticals)) as u16,
                seasonal_boost,
            },
        ));
    }

    drafts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(drafts
        .into_iter()
        .enumerate()
        .map(|(i, (_, mut record))| {
            record.popularity = zipf_weight(i + 1, config.zipf_exponent);
            record
        })
        .collect())
}

pub(crate) fn zipf_weight(rank: usize, exponent: f64) -> f64 {
    (rank as f64).powf(-exponent)
}

fn phrase(rng: &mut ChaCha8Rng, noun: &str) -> String {
    let pick = |rng: &mut ChaCha8Rng, words: &[&'static str]| *words.choose(rng).unwrap();
    match rng.random_range(0..100) {
        0..=3 => noun.to_string(),
        4..=17 => format!("{} {noun}", pick(rng, COLORS)),
        18..=27 => format!("{} {noun}", pick(rng, MATERIALS)),
        28..=37 => format!("{} {noun}", pick(rng, QUALIFIERS)),
        38..=45 => format!("{} {noun}", pick(rng, BRANDS)),
        46..=65 => format!("{} {} {noun}", pick(rng, COLORS), pick(rng, MATERIALS)),
        66..=75 => format!("{} {} {noun}", pick(rng, QUALIFIERS), pick(rng, COLORS)),
        76..=83 => format!("{} {} {noun}", pick(rng, BRANDS), pick(rng, QUALIFIERS)),
        84..=89 => format!("{noun} for {}", pick(rng, AUDIENCES)),
        _ => format!(
            "{} {} {} {noun}",
            pick(rng, BRANDS),
            pick(rng, COLORS),
            pick(rng, MATERIALS)
        ),
    }
}
