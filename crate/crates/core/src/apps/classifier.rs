//! Cosine prototype classifier over attribute scores, and the loss evaluators
//! of the attribute-prototype network.

use serde::{Deserialize, Serialize};

use crate::attr_model::{FeatureRecord, InstanceAnnotation};
use crate::error::{Result, TadError};

/// Scores are clamped into `[BCE_EPS, 1 - BCE_EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-7;
/// Loss balance used for 1-shot training.
pub const BETA_ONE_SHOT: f64 = 0.6;
/// Loss balance used for 5-shot training.
pub const BETA_FIVE_SHOT: f64 = 1.0;

/// Per-category mean score vectors, in first-appearance order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    pub categories: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl PrototypeSet {
    pub fn from_records(records: &[FeatureRecord]) -> Result<Self> {
        let width = records
            .first()
            .ok_or_else(|| TadError::validation("no records to average"))?
            .scores
            .len();
        let mut categories: Vec<String> = Vec::new();
        let mut sums: Vec<Vec<f64>> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for r in records {
            if r.scores.len() != width {
                return Err(TadError::validation(format!(
                    "instance '{}' has {} scores, expected {width}",
                    r.instance_id,
                    r.scores.len()
                )));
            }
            if let Some(s) = r.scores.iter().find(|s| !s.is_finite()) {
                return Err(TadError::validation(format!(
                    "instance '{}' has non-finite score {s}",
                    r.instance_id
                )));
            }
            let idx = match categories.iter().position(|c| *c == r.category_id) {
                Some(i) => i,
                None => {
                    categories.push(r.category_id.clone());
                    sums.push(vec![0.0; width]);
                    counts.push(0);
                    categories.len() - 1
                }
            };
            for (acc, s) in sums[idx].iter_mut().zip(&r.scores) {
                *acc += s;
            }
            counts[idx] += 1;
        }
        let vectors = sums
            .into_iter()
            .zip(counts)
            .map(|(s, n)| s.into_iter().map(|x| x / n as f64).collect())
            .collect();
        Ok(Self { categories, vectors })
    }

    pub fn get(&self, category_id: &str) -> Option<&[f64]> {
        self.categories
            .iter()
            .position(|c| c == category_id)
            .map(|i| self.vectors[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (norm(a) * norm(b))
}

/// Softmax of `logits / temperature`, computed stably.
pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = logits.iter().map(|d| d / temperature).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierOutput {
    /// Candidate categories, in prototype order.
    pub categories: Vec<String>,
    pub predictions: Vec<String>,
    /// Cosine similarity of every query to every prototype.
    pub cosines: Vec<Vec<f64>>,
    /// Temperature softmax over the cosines.
    pub probabilities: Vec<Vec<f64>>,
    pub accuracy: f64,
}

/// Classifies each query by its most cosine-similar support prototype.
///
/// Ties go to the earlier category. The prediction is taken from the raw
/// cosines, so it does not depend on the temperature.
pub fn prototype_classifier_eval(
    support: &[FeatureRecord],
    query: &[FeatureRecord],
    temperature: f64,
) -> Result<ClassifierOutput> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(TadError::validation(format!("temperature {temperature} must be positive")));
    }
    if query.is_empty() {
        return Err(TadError::validation("no query records"));
    }
    let protos = PrototypeSet::from_records(support)?;
    for (c, v) in protos.categories.iter().zip(&protos.vectors) {
        if norm(v) == 0.0 {
            return Err(TadError::validation(format!("prototype of '{c}' has zero norm")));
        }
    }
    let width = protos.vectors[0].len();
    let mut predictions = Vec::with_capacity(query.len());
    let mut cosines = Vec::with_capacity(query.len());
    let mut probabilities = Vec::with_capacity(query.len());
    let mut correct = 0usize;
    for q in query {
        if q.scores.len() != width {
            return Err(TadError::validation(format!(
                "query '{}' has {} scores, expected {width}",
                q.instance_id,
                q.scores.len()
            )));
        }
        if protos.get(&q.category_id).is_none() {
            return Err(TadError::validation(format!(
                "no support for query category '{}'",
                q.category_id
            )));
        }
        if norm(&q.scores) == 0.0 {
            return Err(TadError::validation(format!("query '{}' has zero norm", q.instance_id)));
        }
        let cos: Vec<f64> = protos.vectors.iter().map(|p| cosine(&q.scores, p)).collect();
        let mut best = 0;
        for (i, c) in cos.iter().enumerate() {
            if *c > cos[best] {
                best = i;
            }
        }
        let pred = protos.categories[best].clone();
        if pred == q.category_id {
            correct += 1;
        }
        predictions.push(pred);
        probabilities.push(softmax(&cos, temperature));
        cosines.push(cos);
    }
    Ok(ClassifierOutput {
        categories: protos.categories,
        predictions,
        cosines,
        probabilities,
        accuracy: correct as f64 / query.len() as f64,
    })
}

/// Mean cross-entropy of the true category under the temperature softmax.
pub fn episode_loss(output: &ClassifierOutput, query: &[FeatureRecord]) -> Result<f64> {
    if query.len() != output.probabilities.len() || query.is_empty() {
        return Err(TadError::validation("query does not match classifier output"));
    }
    let mut total = 0.0;
    for (q, probs) in query.iter().zip(&output.probabilities) {
        let k = output
            .categories
            .iter()
            .position(|c| *c == q.category_id)
            .ok_or_else(|| TadError::validation(format!("unknown category '{}'", q.category_id)))?;
        total -= probs[k].max(f64::MIN_POSITIVE).ln();
    }
    Ok(total / query.len() as f64)
}

/// Mean binary cross-entropy between scores and binary attribute labels.
///
/// Records are paired by position and must carry the same instance id.
pub fn attribute_bce_loss(scores: &[FeatureRecord], labels: &[InstanceAnnotation]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(TadError::validation(format!(
            "{} score records for {} label records",
            scores.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (s, y) in scores.iter().zip(labels) {
        if s.instance_id != y.instance_id {
            return Err(TadError::validation(format!(
                "score record '{}' paired with label record '{}'",
                s.instance_id, y.instance_id
            )));
        }
        if s.scores.len() != y.values.len() || s.scores.is_empty() {
            return Err(TadError::validation(format!(
                "instance '{}': {} scores for {} labels",
                s.instance_id,
                s.scores.len(),
                y.values.len()
            )));
        }
        let mut row = 0.0;
        for (&z, &a) in s.scores.iter().zip(&y.values) {
            if a > 1 {
                return Err(TadError::validation(format!(
                    "instance '{}': label index {a} is not binary",
                    s.instance_id
                )));
            }
            let z = z.clamp(BCE_EPS, 1.0 - BCE_EPS);
            row += if a == 1 { z.ln() } else { (1.0 - z).ln() };
        }
        total -= row / s.scores.len() as f64;
    }
    Ok(total / scores.len() as f64)
}

/// `beta * bce + mean(episode_losses)`.
pub fn combined_loss(bce: f64, episode_losses: &[f64], beta: f64) -> Result<f64> {
    if episode_losses.is_empty() {
        return Err(TadError::validation("no episode losses"));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(TadError::validation(format!("beta {beta} must be >= 0")));
    }
    let mean = episode_losses.iter().sum::<f64>() / episode_losses.len() as f64;
    Ok(beta * bce + mean)
}
