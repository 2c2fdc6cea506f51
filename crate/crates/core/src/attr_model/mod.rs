//! Category-level attribute conditional distributions.
//!
//! An [`AttributeTable`] maps each category to one discrete distribution per
//! attribute. Tables come from files (see [`io`]), from instance-level labels
//! through majority voting or frequency counting, or are induced from
//! predicted attribute scores.

mod aggregate;
pub mod io;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TadError};

pub use aggregate::{aggregate_frequency, aggregate_majority, induce_profiles, Binning};

/// Rows whose weights are off from 1 by at most this much are renormalized on load.
pub const RENORMALIZE_BAND: f64 = 1e-6;
/// Normalization tolerance every stored distribution satisfies.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// One discrete attribute with its ordered value set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub id: String,
    pub values: Vec<String>,
}

/// Ordered list of attributes shared by every profile in a table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
}

#[derive(Deserialize)]
struct RawSchema {
    attributes: Vec<Attribute>,
}

impl TryFrom<RawSchema> for AttributeSchema {
    type Error = TadError;

    fn try_from(raw: RawSchema) -> Result<Self> {
        AttributeSchema::new(raw.attributes)
    }
}

impl AttributeSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(TadError::validation("schema needs at least one attribute"));
        }
        let mut seen = std::collections::HashSet::new();
        for attr in &attributes {
            if !seen.insert(attr.id.as_str()) {
                return Err(TadError::validation(format!(
                    "duplicate attribute id '{}'",
                    attr.id
                )));
            }
            if attr.values.len() < 2 {
                return Err(TadError::validation(format!(
                    "attribute '{}' needs at least two values",
                    attr.id
                )));
            }
            let mut vals = std::collections::HashSet::new();
            for v in &attr.values {
                if !vals.insert(v.as_str()) {
                    return Err(TadError::validation(format!(
                        "attribute '{}' repeats value '{}'",
                        attr.id, v
                    )));
                }
            }
        }
        Ok(Self { attributes })
    }

    /// `count` binary attributes named `a_1..a_count` with values `0`, `1`.
    pub fn binary(count: usize) -> Result<Self> {
        Self::new(
            (1..=count)
                .map(|l| Attribute {
                    id: format!("a_{l}"),
                    values: vec!["0".to_string(), "1".to_string()],
                })
                .collect(),
        )
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    /// Number of attributes `L`.
    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    /// `|V^l|` for every attribute, in order.
    pub fn cardinalities(&self) -> Vec<usize> {
        self.attributes.iter().map(|a| a.values.len()).collect()
    }

    pub fn is_binary(&self) -> bool {
        self.attributes.iter().all(|a| a.values.len() == 2)
    }

    /// Size of the joint attribute space, saturating at `u128::MAX`.
    pub fn joint_size(&self) -> u128 {
        self.attributes
            .iter()
            .fold(1u128, |acc, a| acc.saturating_mul(a.values.len() as u128))
    }

    pub fn value_index(&self, attribute: usize, value: &str) -> Option<usize> {
        self.attributes
            .get(attribute)?
            .values
            .iter()
            .position(|v| v == value)
    }

    pub fn attribute_index(&self, id: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.id == id)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}

/// Per-attribute distributions `p(a^l | y)` of one category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryProfile {
    pub category_id: String,
    pub distributions: Vec<Vec<f64>>,
}

impl CategoryProfile {
    /// Degenerate profile putting all mass on one value per attribute.
    pub fn degenerate(
        category_id: impl Into<String>,
        schema: &AttributeSchema,
        value_indices: &[usize],
    ) -> Result<Self> {
        let category_id = category_id.into();
        if value_indices.len() != schema.len() {
            return Err(TadError::validation(format!(
                "category '{category_id}': {} values for {} attributes",
                value_indices.len(),
                schema.len()
            )));
        }
        let distributions = schema
            .cardinalities()
            .into_iter()
            .zip(value_indices)
            .map(|(card, &v)| {
                if v >= card {
                    return Err(TadError::validation(format!(
                        "category '{category_id}': value index {v} out of range {card}"
                    )));
                }
                let mut row = vec![0.0; card];
                row[v] = 1.0;
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            category_id,
            distributions,
        })
    }

    /// Binary profile from `P(a^l = 1)` per attribute; value order is `(0, 1)`.
    pub fn from_binary_marginals(category_id: impl Into<String>, p_one: &[f64]) -> Self {
        Self {
            category_id: category_id.into(),
            distributions: p_one.iter().map(|&p| vec![1.0 - p, p]).collect(),
        }
    }

    fn violations(&self, schema: &AttributeSchema, out: &mut Vec<Violation>) {
        if self.distributions.len() != schema.len() {
            out.push(Violation {
                category: Some(self.category_id.clone()),
                attribute: None,
                message: format!(
                    "profile has {} attributes, schema has {}",
                    self.distributions.len(),
                    schema.len()
                ),
            });
        }
        for (attr, row) in schema.attributes().iter().zip(&self.distributions) {
            let mut complain = |message: String| {
                out.push(Violation {
                    category: Some(self.category_id.clone()),
                    attribute: Some(attr.id.clone()),
                    message,
                })
            };
            if row.len() != attr.values.len() {
                complain(format!(
                    "{} weights for {} values",
                    row.len(),
                    attr.values.len()
                ));
                continue;
            }
            if row.iter().any(|w| !w.is_finite() || *w < 0.0 || *w > 1.0) {
                complain("weights must lie in [0, 1]".to_string());
                continue;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                complain(format!("weights sum to {sum}, not 1"));
            }
        }
    }
}

/// One broken invariant found by [`validate_table`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub category: Option<String>,
    pub attribute: Option<String>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.category, &self.attribute) {
            (Some(c), Some(a)) => write!(f, "{c}/{a}: {}", self.message),
            (Some(c), None) => write!(f, "{c}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

/// Category profiles over one schema, in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributeTable {
    schema: AttributeSchema,
    profiles: Vec<CategoryProfile>,
    index: HashMap<String, usize>,
    pool_tag: String,
}

impl AttributeTable {
    /// Builds a table, rejecting it if any invariant is violated.
    pub fn new(
        schema: AttributeSchema,
        profiles: Vec<CategoryProfile>,
        pool_tag: impl Into<String>,
    ) -> Result<Self> {
        let table = Self::new_unchecked(schema, profiles, pool_tag);
        let report = validate_table(&table);
        if let Some(first) = report.first() {
            return Err(TadError::validation(format!(
                "{first} ({} violation(s) total)",
                report.len()
            )));
        }
        Ok(table)
    }

    /// Builds a table without checking invariants; use [`validate_table`] to inspect it.
    pub fn new_unchecked(
        schema: AttributeSchema,
        profiles: Vec<CategoryProfile>,
        pool_tag: impl Into<String>,
    ) -> Self {
        let index = profiles
            .iter()
            .enumerate()
            .map(|(i, p)| (p.category_id.clone(), i))
            .collect();
        Self {
            schema,
            profiles,
            index,
            pool_tag: pool_tag.into(),
        }
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn profiles(&self) -> &[CategoryProfile] {
        &self.profiles
    }

    pub fn profile(&self, category_id: &str) -> Option<&CategoryProfile> {
        self.index.get(category_id).map(|&i| &self.profiles[i])
    }

    pub fn category_ids(&self) -> impl Iterator<Item = &str> {
        self.profiles.iter().map(|p| p.category_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn pool_tag(&self) -> &str {
        &self.pool_tag
    }

    pub fn with_pool_tag(mut self, tag: impl Into<String>) -> Self {
        self.pool_tag = tag.into();
        self
    }

    /// Table restricted to `category_ids`, in the given order.
    pub fn subset(&self, category_ids: &[String]) -> Result<Self> {
        let profiles = category_ids
            .iter()
            .map(|id| {
                self.profile(id).cloned().ok_or_else(|| {
                    TadError::validation(format!("unknown category '{id}'"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.schema.clone(), profiles, self.pool_tag.clone())
    }
}

/// Lists every invariant violation in `table`; empty iff the table is valid.
pub fn validate_table(table: &AttributeTable) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for profile in &table.profiles {
        if !seen.insert(profile.category_id.as_str()) {
            out.push(Violation {
                category: Some(profile.category_id.clone()),
                attribute: None,
                message: "duplicate category".to_string(),
            });
        }
        profile.violations(&table.schema, &mut out);
    }
    out
}

/// Renormalizes a row whose sum is within [`RENORMALIZE_BAND`] of one.
pub(crate) fn renormalize(row: &mut [f64]) -> std::result::Result<(), String> {
    if let Some(w) = row.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(format!("weight {w} is negative or not finite"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > RENORMALIZE_BAND {
        return Err(format!("weights sum to {sum}"));
    }
    for w in row.iter_mut() {
        *w /= sum;
    }
    Ok(())
}

/// Instance-level attribute labels, stored as value indices into the schema.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceAnnotation {
    pub instance_id: String,
    pub category_id: String,
    pub values: Vec<usize>,
}

/// Predicted per-attribute scores of one instance, each in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub instance_id: String,
    pub category_id: String,
    pub scores: Vec<f64>,
}

impl FeatureRecord {
    pub(crate) fn check(&self, attributes: usize) -> Result<()> {
        if self.scores.len() != attributes {
            return Err(TadError::validation(format!(
                "instance '{}': {} scores for {} attributes",
                self.instance_id,
                self.scores.len(),
                attributes
            )));
        }
        if let Some(s) = self.scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(TadError::validation(format!(
                "instance '{}': score {s} outside [0, 1]",
                self.instance_id
            )));
        }
        Ok(())
    }
}
