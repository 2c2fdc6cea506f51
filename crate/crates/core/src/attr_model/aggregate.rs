use std::collections::HashMap;

use super::{AttributeSchema, AttributeTable, CategoryProfile, FeatureRecord, InstanceAnnotation};
use crate::error::{Result, TadError};

/// Discretization of predicted scores onto attribute values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Binning {
    /// `score >= t` maps to value index 1, otherwise 0. Binary schemas only.
    Threshold(f64),
    /// `[0, 1]` split into `k` equal bins mapped onto value indices `0..k`.
    EqualWidth(usize),
}

impl Default for Binning {
    fn default() -> Self {
        Binning::Threshold(0.5)
    }
}

/// Value counts per category, categories in first-appearance order.
fn count_values(
    annotations: &[InstanceAnnotation],
    schema: &AttributeSchema,
) -> Result<Vec<(String, Vec<Vec<u64>>)>> {
    if annotations.is_empty() {
        return Err(TadError::validation("no annotations to aggregate"));
    }
    let cards = schema.cardinalities();
    let mut order: Vec<(String, Vec<Vec<u64>>)> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for ann in annotations {
        if ann.values.len() != cards.len() {
            return Err(TadError::validation(format!(
                "instance '{}': {} values for {} attributes",
                ann.instance_id,
                ann.values.len(),
                cards.len()
            )));
        }
        let idx = *slot.entry(ann.category_id.as_str()).or_insert_with(|| {
            order.push((
                ann.category_id.clone(),
                cards.iter().map(|&c| vec![0; c]).collect(),
            ));
            order.len() - 1
        });
        for (l, (&v, &card)) in ann.values.iter().zip(&cards).enumerate() {
            if v >= card {
                return Err(TadError::validation(format!(
                    "instance '{}': value index {v} out of range for attribute {}",
                    ann.instance_id,
                    schema.attributes()[l].id
                )));
            }
            order[idx].1[l][v] += 1;
        }
    }
    Ok(order)
}

/// Category distributions from empirical value frequencies.
pub fn aggregate_frequency(
    annotations: &[InstanceAnnotation],
    schema: &AttributeSchema,
) -> Result<AttributeTable> {
    let profiles = count_values(annotations, schema)?
        .into_iter()
        .map(|(category_id, counts)| CategoryProfile {
            category_id,
            distributions: counts
                .into_iter()
                .map(|row| {
                    let total: u64 = row.iter().sum();
                    row.into_iter().map(|c| c as f64 / total as f64).collect()
                })
                .collect(),
        })
        .collect();
    AttributeTable::new(schema.clone(), profiles, "")
}

/// Degenerate distributions on the most frequent value of each attribute.
///
/// Ties go to the value with the smaller index in the schema's value list.
pub fn aggregate_majority(
    annotations: &[InstanceAnnotation],
    schema: &AttributeSchema,
) -> Result<AttributeTable> {
    let profiles = count_values(annotations, schema)?
        .into_iter()
        .map(|(category_id, counts)| {
            let winners: Vec<usize> = counts.iter().map(|row| argmax_first(row)).collect();
            CategoryProfile::degenerate(category_id, schema, &winners)
        })
        .collect::<Result<Vec<_>>>()?;
    AttributeTable::new(schema.clone(), profiles, "")
}

fn argmax_first(row: &[u64]) -> usize {
    let mut best = 0;
    for (i, &c) in row.iter().enumerate() {
        if c > row[best] {
            best = i;
        }
    }
    best
}

fn discretize(score: f64, card: usize, binning: Binning) -> usize {
    match binning {
        Binning::Threshold(t) => usize::from(score >= t),
        Binning::EqualWidth(k) => ((score * k as f64).floor() as usize).min(k - 1).min(card - 1),
    }
}

/// Induces `p(a^l | y)` from predicted scores: discretize, then count frequencies.
pub fn induce_profiles(
    features: &[FeatureRecord],
    schema: &AttributeSchema,
    binning: Binning,
) -> Result<AttributeTable> {
    let cards = schema.cardinalities();
    match binning {
        Binning::Threshold(t) => {
            if !schema.is_binary() {
                return Err(TadError::validation(
                    "threshold binning needs an all-binary schema",
                ));
            }
            if !t.is_finite() {
                return Err(TadError::validation("threshold must be finite"));
            }
        }
        Binning::EqualWidth(k) => {
            if let Some(attr) = schema.attributes().iter().find(|a| a.values.len() != k) {
                return Err(TadError::validation(format!(
                    "equal-width binning with {k} bins, but attribute '{}' has {} values",
                    attr.id,
                    attr.values.len()
                )));
            }
        }
    }
    let annotations = features
        .iter()
        .map(|f| {
            f.check(cards.len())?;
            Ok(InstanceAnnotation {
                instance_id: f.instance_id.clone(),
                category_id: f.category_id.clone(),
                values: f
                    .scores
                    .iter()
                    .zip(&cards)
                    .map(|(&s, &card)| discretize(s, card, binning))
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate_frequency(&annotations, schema)
}
