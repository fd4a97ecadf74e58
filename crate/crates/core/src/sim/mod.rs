//! Synthetic query catalog and user simulation.
//!
//! Stands in for production data: a Zipf-distributed query catalog, search
//! sessions in which autocomplete was not used, and autocomplete sessions in
//! which a rank-discounted examination model decides which suggestion gets
//! clicked.

mod behavior;
mod catalog;
mod logs;
mod qac;

use serde::{Deserialize, Serialize};

pub use behavior::{BehaviorConfig, IntentModel};
pub use catalog::{generate_catalog, CatalogConfig, MAX_CATALOG_QUERIES};
pub use logs::simulate_search_logs;
pub use qac::{simulate_qac_sessions, ClickModelConfig, QacSimConfig, QacSimulation};

pub const MAX_QUERY_CHARS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceType {
    IosApp,
    AndroidApp,
    DesktopBrowser,
    MobileBrowser,
}

impl DeviceType {
    pub const ALL: [DeviceType; 4] = [
        DeviceType::IosApp,
        DeviceType::AndroidApp,
        DeviceType::DesktopBrowser,
        DeviceType::MobileBrowser,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceType::IosApp => "ios_app",
            DeviceType::AndroidApp => "android_app",
            DeviceType::DesktopBrowser => "desktop_browser",
            DeviceType::MobileBrowser => "mobile_browser",
        }
    }
}

impl std::str::FromStr for DeviceType {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DeviceType::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| crate::Error::Argument(format!("unknown device type {s:?}")))
    }
}

impl std::fmt::Display for DeviceType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One catalog entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub text: String,
    pub popularity: f64,
    pub department: u16,
    pub vertical: u16,
    /// Per-month multiplier, January first.
    pub seasonal_boost: [f64; 12],
}

impl QueryRecord {
    /// A record with flat seasonality.
    pub fn new(text: impl Into<String>, popularity: f64, department: u16, vertical: u16) -> Self {
        QueryRecord {
            text: text.into(),
            popularity,
            department,
            vertical,
            seasonal_boost: [1.0; 12],
        }
    }

    /// Seasonal multiplier for a 1-based month.
    pub fn seasonality(&self, month: u8) -> f64 {
        self.seasonal_boost[usize::from(month.clamp(1, 12)) - 1]
    }

    pub fn validate(&self) -> crate::Result<()> {
        let text_ok = !self.text.is_empty()
            && self.text.trim() == self.text
            && self.text.chars().count() <= MAX_QUERY_CHARS;
        if !text_ok {
            return Err(crate::Error::Config(format!(
                "query text {:?} must be 1..={MAX_QUERY_CHARS} chars without surrounding whitespace",
                self.text
            )));
        }
        if !(self.popularity > 0.0 && self.popularity.is_finite()) {
            return Err(crate::Error::Config(format!(
                "query {:?} has non-positive popularity",
                self.text
            )));
        }
        if self.seasonal_boost.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(crate::Error::Config(format!(
                "query {:?} has a non-positive seasonal multiplier",
                self.text
            )));
        }
        Ok(())
    }
}

/// A query issued without autocomplete.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchLogEntry {
    pub query_text: String,
    pub session_id: String,
    pub previous_query_text: Option<String>,
    pub device_type: DeviceType,
    pub month: u8,
}

/// A clicked autocomplete impression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QacEngagementEntry {
    pub prefix: String,
    pub shown: Vec<String>,
    pub clicked: String,
    /// 1-based position of `clicked` in `shown`.
    pub clicked_rank: usize,
    pub session_id: String,
    pub previous_query_text: Option<String>,
    pub device_type: DeviceType,
    pub month: u8,
}

impl QacEngagementEntry {
    pub fn is_consistent(&self) -> bool {
        self.clicked_rank >= 1
            && self.shown.get(self.clicked_rank - 1) == Some(&self.clicked)
            && !self.prefix.is_empty()
            && self.prefix.chars().count() <= self.clicked.chars().count()
    }
}

pub(crate) fn check_month(month: u8) -> crate::Result<()> {
    if (1..=12).contains(&month) {
        Ok(())
    } else {
        Err(crate::Error::Config(format!("month {month} outside 1..=12")))
    }
}
