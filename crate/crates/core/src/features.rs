//! Fixed-length feature vectors for (prefix, candidate, context) and their
//! standardization.
//!
//! Layout, version 1:
//!
//! | slots                 | content                                                     |
//! |-----------------------|-------------------------------------------------------------|
//! | 0..6                  | ln popularity, seasonal boost for the month, query chars, query tokens, prefix chars, prefix tokens |
//! | 6..6+D                | one-hot query department                                    |
//! | 6+D..6+D+V            | one-hot query vertical                                      |
//! | 6+D+V..6+D+V+4        | one-hot device type                                         |
//! | last 3                | exact match, department matches previous query, vertical matches previous query |
//!
//! Only the six leading scalars are standardized.

use std::fmt;

use ndarray::{ArrayViewMut2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{Candidate, PrefixIndex};
use crate::sim::{DeviceType, QueryRecord};

pub const FEATURE_LAYOUT_VERSION: u32 = 1;
pub const N_SCALARS: usize = 6;
pub const N_FLAGS: usize = 3;

pub const SCALAR_NAMES: [&str; N_SCALARS] = [
    "ln_popularity",
    "seasonal_boost",
    "query_chars",
    "query_tokens",
    "prefix_chars",
    "prefix_tokens",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub version: u32,
    pub n_departments: u16,
    pub n_verticals: u16,
}

impl FeatureLayout {
    pub fn new(n_departments: u16, n_verticals: u16) -> Self {
        FeatureLayout {
            version: FEATURE_LAYOUT_VERSION,
            n_departments,
            n_verticals,
        }
    }

    /// Smallest layout that covers every department and vertical id in the
    /// catalog.
    pub fn for_catalog(catalog: &[QueryRecord]) -> Self {
        let d = catalog.iter().map(|q| q.department + 1).max().unwrap_or(1);
        let v = catalog.iter().map(|q| q.vertical + 1).max().unwrap_or(1);
        FeatureLayout::new(d, v)
    }

    pub fn dim(&self) -> usize {
        self.flag_offset() + N_FLAGS
    }

    pub fn department_offset(&self) -> usize {
        N_SCALARS
    }

    pub fn vertical_offset(&self) -> usize {
        N_SCALARS + usize::from(self.n_departments)
    }

    pub fn device_offset(&self) -> usize {
        self.vertical_offset() + usize::from(self.n_verticals)
    }

    pub fn flag_offset(&self) -> usize {
        self.device_offset() + DeviceType::ALL.len()
    }

    /// Human-readable name of every slot.
    pub fn slot_names(&self) -> Vec<String> {
        let mut names: Vec<String> = SCALAR_NAMES.iter().map(|s| s.to_string()).collect();
        names.extend((0..self.n_departments).map(|d| format!("department={d}")));
        names.extend((0..self.n_verticals).map(|v| format!("vertical={v}")));
        names.extend(DeviceType::ALL.iter().map(|d| format!("device={d}")));
        names.extend(
            ["exact_match", "department_match", "vertical_match"]
                .iter()
                .map(|s| s.to_string()),
        );
        names
    }

    pub fn ensure_same(&self, other: &FeatureLayout) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::LayoutMismatch {
                expected: self.to_string(),
                found: other.to_string(),
            })
        }
    }
}

impl fmt::Display for FeatureLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "v{}(departments={}, verticals={})",
            self.version, self.n_departments, self.n_verticals
        )
    }
}

/// Request context shared by every candidate of one ranking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextSignals {
    pub previous_query_department: Option<u16>,
    pub previous_query_vertical: Option<u16>,
    pub device_type: DeviceType,
    pub prefix_text: String,
    pub month: u8,
}

impl ContextSignals {
    pub fn new(prefix: impl Into<String>, device_type: DeviceType, month: u8) -> Self {
        ContextSignals {
            previous_query_department: None,
            previous_query_vertical: None,
            device_type,
            prefix_text: prefix.into(),
            month,
        }
    }

    pub fn with_previous(mut self, previous: &QueryRecord) -> Self {
        self.previous_query_department = Some(previous.department);
        self.previous_query_vertical = Some(previous.vertical);
        self
    }

    /// Context whose previous query is resolved through the catalog; an
    /// unknown previous query contributes nothing.
    pub fn resolve(
        index: &PrefixIndex,
        prefix: &str,
        device_type: DeviceType,
        previous_query: Option<&str>,
        month: u8,
    ) -> Self {
        let ctx = ContextSignals::new(prefix, device_type, month);
        match previous_query.and_then(|text| index.lookup(text)) {
            Some(id) => ctx.with_previous(index.query(id)),
            None => ctx,
        }
    }

    pub fn has_previous(&self) -> bool {
        self.previous_query_department.is_some() || self.previous_query_vertical.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub layout: FeatureLayout,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn scalars(&self) -> &[f64] {
        &self.values[..N_SCALARS]
    }
}

pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Feature vector of one candidate in context.
pub fn extract(
    layout: &FeatureLayout,
    query: &QueryRecord,
    candidate: &Candidate,
    context: &ContextSignals,
) -> FeatureVector {
    let mut values = vec![0.0; layout.dim()];
    extract_into(layout, query, candidate.is_exact_match, context, &mut values);
    FeatureVector {
        layout: *layout,
        values,
    }
}

/// Write the features into `out`, which must be zeroed and `layout.dim()`
/// long.
pub fn extract_into(
    layout: &FeatureLayout,
    query: &QueryRecord,
    is_exact_match: bool,
    context: &ContextSignals,
    out: &mut [f64],
) {
    debug_assert_eq!(out.len(), layout.dim());
    // Zipf weights span orders of magnitude; the log keeps them comparable
    // after standardization.
    out[0] = query.popularity.ln();
    out[1] = query.seasonality(context.month);
    out[2] = query.text.chars().count() as f64;
    out[3] = token_count(&query.text) as f64;
    out[4] = context.prefix_text.chars().count() as f64;
    out[5] = token_count(&context.prefix_text) as f64;

    if query.department < layout.n_departments {
        out[layout.department_offset() + usize::from(query.department)] = 1.0;
    }
    if query.vertical < layout.n_verticals {
        out[layout.vertical_offset() + usize::from(query.vertical)] = 1.0;
    }
    out[layout.device_offset() + context.device_type.ordinal()] = 1.0;

    let flags = layout.flag_offset();
    out[flags] = f64::from(u8::from(is_exact_match));
    out[flags + 1] = f64::from(u8::from(
        context.previous_query_department == Some(query.department),
    ));
    out[flags + 2] = f64::from(u8::from(
        context.previous_query_vertical == Some(query.vertical),
    ));
}

/// Per-scalar mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub layout: FeatureLayout,
    pub mean: [f64; N_SCALARS],
    pub std: [f64; N_SCALARS],
}

impl ScalerStats {
    pub fn identity(layout: FeatureLayout) -> Self {
        ScalerStats {
            layout,
            mean: [0.0; N_SCALARS],
            std: [1.0; N_SCALARS],
        }
    }

    /// Fit on feature vectors that all share one layout.
    pub fn fit(dataset: &[FeatureVector]) -> Result<Self> {
        let first = dataset
            .first()
            .ok_or_else(|| Error::Argument("cannot fit a scaler on an empty dataset".into()))?;
        for v in dataset {
            first.layout.ensure_same(&v.layout)?;
        }
        Ok(Self::fit_scalars(
            first.layout,
            dataset.iter().map(|v| v.scalars()),
        ))
    }

    /// Fit on rows of an encoded feature matrix.
    pub fn fit_rows(layout: FeatureLayout, rows: ndarray::ArrayView2<'_, f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::Argument(
                "cannot fit a scaler on an empty dataset".into(),
            ));
        }
        if rows.ncols() != layout.dim() {
            return Err(Error::Dimension {
                expected: layout.dim(),
                got: rows.ncols(),
            });
        }
        Ok(Self::fit_scalars(
            layout,
            rows.axis_iter(Axis(0)).map(|r| {
                let mut scalars = [0.0; N_SCALARS];
                for (j, s) in scalars.iter_mut().enumerate() {
                    *s = r[j];
                }
                scalars
            }),
        ))
    }

    fn fit_scalars<I, S>(layout: FeatureLayout, rows: I) -> Self
    where
        I: Iterator<Item = S> + Clone,
        S: AsRef<[f64]>,
    {
        let mut n = 0usize;
        let mut sum = [0.0; N_SCALARS];
        let mut lo = [f64::INFINITY; N_SCALARS];
        let mut hi = [f64::NEG_INFINITY; N_SCALARS];
        for row in rows.clone() {
            n += 1;
            for (j, &x) in row.as_ref().iter().enumerate() {
                sum[j] += x;
                lo[j] = lo[j].min(x);
                hi[j] = hi[j].max(x);
            }
        }
        let mean = sum.map(|s| s / n as f64);
        let mut sq = [0.0; N_SCALARS];
        for row in rows {
            for (j, &x) in row.as_ref().iter().enumerate() {
                sq[j] += (x - mean[j]).powi(2);
            }
        }
        let mut std = [1.0; N_SCALARS];
        for j in 0..N_SCALARS {
            // Constant slots keep unit scale.
            if hi[j] > lo[j] {
                std[j] = (sq[j] / n as f64).sqrt();
            }
        }
        ScalerStats { layout, mean, std }
    }

    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector> {
        self.layout.ensure_same(&v.layout)?;
        let mut out = v.clone();
        self.apply_slice(&mut out.values);
        Ok(out)
    }

    /// De-standardize: inverse of [`ScalerStats::apply`].
    pub fn invert(&self, v: &FeatureVector) -> Result<FeatureVector> {
        self.layout.ensure_same(&v.layout)?;
        let mut out = v.clone();
        for j in 0..N_SCALARS {
            out.values[j] = out.values[j] * self.std[j] + self.mean[j];
        }
        Ok(out)
    }

    pub fn apply_slice(&self, values: &mut [f64]) {
        for ((v, m), s) in values.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn apply_rows(&self, mut rows: ArrayViewMut2<'_, f64>) {
        for mut row in rows.axis_iter_mut(Axis(0)) {
            for j in 0..N_SCALARS {
                row[j] = (row[j] - self.mean[j]) / self.std[j];
            }
        }
    }
}
