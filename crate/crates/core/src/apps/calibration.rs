//! Support-feature calibration from the prototypes of closely related training
//! categories.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::classifier::PrototypeSet;
use crate::attr_model::FeatureRecord;
use crate::error::{Result, TadError};
use crate::tad::{distances_to_pool, tad_orig, TaskSpec, Tables, Variant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    /// Number of closest training tasks whose matchings are counted.
    pub k_related: usize,
    /// Training categories kept per novel category.
    pub retain: usize,
    /// Weight of the original feature in the mix.
    pub alpha: f64,
    /// Distance used to rank training tasks.
    pub variant: Variant,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            k_related: 200,
            retain: 5,
            alpha: 0.5,
            variant: Variant::Approx,
        }
    }
}

impl CalibrationConfig {
    pub fn check(&self) -> Result<()> {
        if self.k_related == 0 || self.retain == 0 {
            return Err(TadError::validation("k_related and retain must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(TadError::validation(format!("alpha {} must lie in [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

/// Which training categories were mixed into each novel category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPlan {
    /// Indices into the pool of the kept training tasks, closest first.
    pub related: Vec<usize>,
    /// Per novel category (task order): retained training categories with
    /// their match counts, most frequent first.
    pub retained: Vec<(String, Vec<(String, usize)>)>,
    /// Per novel category: mean prototype of the retained categories, if any
    /// training category was ever matched to it.
    pub calibration: Vec<Option<Vec<f64>>>,
}

/// Picks related training tasks and builds a calibration vector per novel category.
///
/// `tables.first` holds the training categories and `tables.second` the novel
/// ones. A novel category that no kept task matched gets no vector.
pub fn plan_calibration(
    novel_task: &TaskSpec,
    related_pool: &[TaskSpec],
    prototypes: &PrototypeSet,
    tables: Tables<'_>,
    config: &CalibrationConfig,
) -> Result<CalibrationPlan> {
    config.check()?;
    if related_pool.is_empty() {
        return Err(TadError::validation("related training pool is empty"));
    }
    let distances = distances_to_pool(novel_task, related_pool, tables, config.variant)?;
    let mut order: Vec<usize> = (0..related_pool.len()).collect();
    order.sort_by(|&i, &j| distances[i].total_cmp(&distances[j]).then(i.cmp(&j)));
    order.truncate(config.k_related);

    let ways = novel_task.ways();
    let mut counts: Vec<HashMap<&str, usize>> = vec![HashMap::new(); ways];
    for &i in &order {
        let pool_task = &related_pool[i];
        let result = tad_orig(pool_task, novel_task, tables)?;
        let matching = result.matching.expect("matched distance carries its matching");
        for (r, c) in matching.pairs {
            *counts[c].entry(pool_task.category_ids[r].as_str()).or_default() += 1;
        }
    }

    let mut retained = Vec::with_capacity(ways);
    let mut calibration = Vec::with_capacity(ways);
    for (novel_cat, tally) in novel_task.category_ids.iter().zip(counts) {
        let mut ranked: Vec<(String, usize)> =
            tally.into_iter().map(|(c, n)| (c.to_string(), n)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(config.retain);
        let vector = if ranked.is_empty() {
            None
        } else {
            let mut mean: Vec<f64> = Vec::new();
            for (cat, _) in &ranked {
                let proto = prototypes.get(cat).ok_or_else(|| {
                    TadError::validation(format!("no prototype for training category '{cat}'"))
                })?;
                if mean.is_empty() {
                    mean = vec![0.0; proto.len()];
                }
                if proto.len() != mean.len() {
                    return Err(TadError::validation("prototype lengths differ"));
                }
                for (m, p) in mean.iter_mut().zip(proto) {
                    *m += p;
                }
            }
            let n = ranked.len() as f64;
            Some(mean.into_iter().map(|m| m / n).collect())
        };
        retained.push((novel_cat.clone(), ranked));
        calibration.push(vector);
    }
    Ok(CalibrationPlan {
        related: order,
        retained,
        calibration,
    })
}

/// Mixes every support feature with its category's calibration vector:
/// `alpha * x + (1 - alpha) * p`.
pub fn apply_calibration(
    novel_support: &[FeatureRecord],
    novel_task: &TaskSpec,
    plan: &CalibrationPlan,
    alpha: f64,
) -> Result<Vec<FeatureRecord>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TadError::validation(format!("alpha {alpha} must lie in [0, 1]")));
    }
    novel_support
        .iter()
        .map(|rec| {
            let k = novel_task
                .category_ids
                .iter()
                .position(|c| *c == rec.category_id)
                .ok_or_else(|| {
                    TadError::validation(format!(
                        "support record '{}' belongs to '{}', which is not in task '{}'",
                        rec.instance_id, rec.category_id, novel_task.task_id
                    ))
                })?;
            let mut out = rec.clone();
            if let Some(p) = &plan.calibration[k] {
                if p.len() != rec.scores.len() {
                    return Err(TadError::validation(format!(
                        "support record '{}' has {} scores, prototypes have {}",
                        rec.instance_id,
                        rec.scores.len(),
                        p.len()
                    )));
                }
                if alpha < 1.0 {
                    for (x, q) in out.scores.iter_mut().zip(p) {
                        *x = alpha * *x + (1.0 - alpha) * q;
                    }
                }
            }
            Ok(out)
        })
        .collect()
}

/// [`plan_calibration`] followed by [`apply_calibration`].
pub fn calibrate_support(
    novel_support: &[FeatureRecord],
    novel_task: &TaskSpec,
    related_pool: &[TaskSpec],
    prototypes: &PrototypeSet,
    tables: Tables<'_>,
    config: &CalibrationConfig,
) -> Result<Vec<FeatureRecord>> {
    let plan = plan_calibration(novel_task, related_pool, prototypes, tables, config)?;
    apply_calibration(novel_support, novel_task, &plan, config.alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr_model::{AttributeSchema, AttributeTable, CategoryProfile};

    fn setup() -> (AttributeTable, AttributeTable, PrototypeSet) {
        let schema = AttributeSchema::binary(2).unwrap();
        let train = AttributeTable::new(
            schema.clone(),
            vec![
                CategoryProfile::from_binary_marginals("t0", &[1.0, 0.0]),
                CategoryProfile::from_binary_marginals("t1", &[0.0, 1.0]),
                CategoryProfile::from_binary_marginals("t2", &[0.9, 0.1]),
                CategoryProfile::from_binary_marginals("t3", &[0.5, 0.5]),
            ],
            "train",
        )
        .unwrap();
        let novel = AttributeTable::new(
            schema,
            vec![
                CategoryProfile::from_binary_marginals("n0", &[1.0, 0.0]),
                CategoryProfile::from_binary_marginals("n1", &[0.0, 1.0]),
            ],
            "novel",
        )
        .unwrap();
        let protos = PrototypeSet {
            categories: vec!["t0".into(), "t1".into(), "t2".into(), "t3".into()],
            vectors: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.8, 0.2], vec![0.5, 0.5]],
        };
        (train, novel, protos)
    }

    fn rec(id: &str, cat: &str, s: &[f64]) -> FeatureRecord {
        FeatureRecord {
            instance_id: id.into(),
            category_id: cat.into(),
            scores: s.to_vec(),
        }
    }

    #[test]
    fn matches_counted_over_closest_tasks() {
        let (train, novel, protos) = setup();
        let tables = Tables::split(&train, &novel).unwrap();
        let task = TaskSpec::new("n", vec!["n0".into(), "n1".into()], "novel").unwrap();
        let pool = vec![
            TaskSpec::new("a", vec!["t0".into(), "t1".into()], "train").unwrap(),
            TaskSpec::new("b", vec!["t2".into(), "t1".into()], "train").unwrap(),
            TaskSpec::new("c", vec!["t3".into(), "t2".into()], "train").unwrap(),
        ];
        let cfg = CalibrationConfig {
            k_related: 2,
            retain: 1,
            alpha: 0.0,
            variant: Variant::Orig,
        };
        let plan = plan_calibration(&task, &pool, &protos, tables, &cfg).unwrap();
        assert_eq!(plan.related, vec![0, 1]);
        // n0 matched t0 once and t2 once; the id breaks the tie.
        assert_eq!(plan.retained[0].1, vec![("t0".to_string(), 1)]);
        assert_eq!(plan.retained[1].1, vec![("t1".to_string(), 2)]);
        assert_eq!(plan.calibration[0], Some(vec![1.0, 0.0]));

        let support = [rec("x", "n0", &[0.3, 0.3]), rec("y", "n1", &[0.2, 0.2])];
        let out = apply_calibration(&support, &task, &plan, 0.0).unwrap();
        assert_eq!(out[0].scores, vec![1.0, 0.0]);
        assert_eq!(out[1].scores, vec![0.0, 1.0]);
    }

    #[test]
    fn alpha_endpoints_and_mix() {
        let task = TaskSpec::new("n", vec!["n0".into()], "novel").unwrap();
        let plan = CalibrationPlan {
            related: vec![0],
            retained: vec![("n0".into(), vec![("t1".into(), 1)])],
            calibration: vec![Some(vec![0.0, 1.0])],
        };
        let support = [rec("x", "n0", &[1.0, 0.0])];
        assert_eq!(apply_calibration(&support, &task, &plan, 1.0).unwrap(), support.to_vec());
        assert_eq!(apply_calibration(&support, &task, &plan, 0.5).unwrap()[0].scores, vec![0.5, 0.5]);
        assert_eq!(apply_calibration(&support, &task, &plan, 0.0).unwrap()[0].scores, vec![0.0, 1.0]);
        assert!(apply_calibration(&support, &task, &plan, 1.5).is_err());
        assert!(apply_calibration(&[rec("z", "n9", &[1.0, 0.0])], &task, &plan, 0.5).is_err());
    }

    #[test]
    fn retain_beyond_matches_uses_all() {
        let (train, novel, protos) = setup();
        let tables = Tables::split(&train, &novel).unwrap();
        let task = TaskSpec::new("n", vec!["n0".into(), "n1".into()], "novel").unwrap();
        let pool = vec![TaskSpec::new("a", vec!["t0".into(), "t1".into()], "train").unwrap()];
        let cfg = CalibrationConfig {
            retain: 50,
            ..Default::default()
        };
        let plan = plan_calibration(&task, &pool, &protos, tables, &cfg).unwrap();
        assert_eq!(plan.retained[0].1.len(), 1);
    }

    #[test]
    fn empty_pool_and_bad_config() {
        let (train, novel, protos) = setup();
        let tables = Tables::split(&train, &novel).unwrap();
        let task = TaskSpec::new("n", vec!["n0".into(), "n1".into()], "novel").unwrap();
        let cfg = CalibrationConfig::default();
        assert!(plan_calibration(&task, &[], &protos, tables, &cfg).is_err());
        let pool = vec![TaskSpec::new("a", vec!["t0".into(), "t1".into()], "train").unwrap()];
        let bad = CalibrationConfig { alpha: -0.1, ..cfg };
        assert!(plan_calibration(&task, &pool, &protos, tables, &bad).is_err());
    }
}
