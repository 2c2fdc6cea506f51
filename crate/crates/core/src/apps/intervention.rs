//! Test-time intervention: extra labeled support for novel tasks far from the
//! training tasks, reported through the mean accuracy of the worst tasks.

use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::prototype_classifier_eval;
use super::synth::SynthWorld;
use crate::attr_model::FeatureRecord;
use crate::episodes::stream_rng;
use crate::error::{Result, TadError};
use crate::jsonl::read_jsonl;
use crate::tad::TaskSpec;

const STREAM_EPISODE: u64 = 5 << 40;
const STREAM_EXTRA: u64 = 6 << 40;

pub const DEFAULT_KS: [usize; 5] = [5, 10, 20, 60, 120];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// `budget / ways` extra labeled samples for every category.
    Balanced,
    /// `budget` samples drawn uniformly from the task's unlabeled pool, labels
    /// revealed after the draw.
    Imbalanced,
}

impl std::str::FromStr for Strategy {
    type Err = TadError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "imbalanced" => Ok(Self::Imbalanced),
            other => Err(TadError::validation(format!(
                "unknown strategy '{other}' (expected balanced or imbalanced)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionConfig {
    pub threshold_r: f64,
    pub budget: usize,
    pub strategy: Strategy,
    pub seeds: Vec<u64>,
    pub ks: Vec<usize>,
}

impl Default for InterventionConfig {
    fn default() -> Self {
        Self {
            threshold_r: 0.18,
            budget: 25,
            strategy: Strategy::Balanced,
            seeds: vec![0],
            ks: DEFAULT_KS.to_vec(),
        }
    }
}

impl InterventionConfig {
    pub fn check(&self) -> Result<()> {
        if !self.threshold_r.is_finite() {
            return Err(TadError::validation("threshold must be finite"));
        }
        if self.seeds.is_empty() {
            return Err(TadError::validation("need at least one seed"));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(TadError::validation("K values must be >= 1"));
        }
        Ok(())
    }
}

/// Accuracy of one task, optionally with `extra` labeled support added.
///
/// Implementations must be pure: the same arguments give the same accuracy,
/// and the episode drawn for `(task_index, seed)` must not depend on `extra`.
pub trait TaskEvaluator: Sync {
    fn accuracy(
        &self,
        task_index: usize,
        task: &TaskSpec,
        seed: u64,
        extra: Option<(usize, Strategy)>,
    ) -> Result<f64>;
}

/// Prototype classifier episodes over a synthetic world.
#[derive(Clone, Debug)]
pub struct SynthEvaluator<'a> {
    pub world: &'a SynthWorld,
    pub shots: usize,
    pub queries: usize,
    pub temperature: f64,
}

/// Support and query sets of one episode, plus what is left over per category.
pub struct Episode {
    pub support: Vec<FeatureRecord>,
    pub query: Vec<FeatureRecord>,
    pub remaining: Vec<Vec<FeatureRecord>>,
}

impl SynthEvaluator<'_> {
    /// Draws the episode of `task` for `(task_index, seed)`.
    pub fn episode(&self, task_index: usize, task: &TaskSpec, seed: u64) -> Result<Episode> {
        let mut rng = stream_rng(seed, STREAM_EPISODE + task_index as u64);
        let mut support = Vec::with_capacity(task.ways() * self.shots);
        let mut query = Vec::with_capacity(task.ways() * self.queries);
        let mut remaining = Vec::with_capacity(task.ways());
        for cat in &task.category_ids {
            let instances = self.world.instances(cat)?;
            let need = self.shots + self.queries;
            if instances.len() < need {
                return Err(TadError::validation(format!(
                    "class '{cat}' has {} instances, episode needs {need}",
                    instances.len()
                )));
            }
            let order = sample(&mut rng, instances.len(), instances.len()).into_vec();
            support.extend(order[..self.shots].iter().map(|&i| instances[i].clone()));
            query.extend(order[self.shots..need].iter().map(|&i| instances[i].clone()));
            remaining.push(order[need..].iter().map(|&i| instances[i].clone()).collect());
        }
        Ok(Episode { support, query, remaining })
    }
}

impl TaskEvaluator for SynthEvaluator<'_> {
    fn accuracy(
        &self,
        task_index: usize,
        task: &TaskSpec,
        seed: u64,
        extra: Option<(usize, Strategy)>,
    ) -> Result<f64> {
        let Episode {
            mut support,
            query,
            remaining,
        } = self.episode(task_index, task, seed)?;
        if let Some((budget, strategy)) = extra {
            let ways = task.ways();
            match strategy {
                Strategy::Balanced => {
                    check_balanced(budget, ways)?;
                    let per = budget / ways;
                    for (cat, rest) in task.category_ids.iter().zip(&remaining) {
                        if rest.len() < per {
                            return Err(TadError::validation(format!(
                                "class '{cat}' has {} unused samples, intervention needs {per}",
                                rest.len()
                            )));
                        }
                        support.extend_from_slice(&rest[..per]);
                    }
                }
                Strategy::Imbalanced => {
                    let pool: Vec<&FeatureRecord> = remaining.iter().flatten().collect();
                    if pool.len() < budget {
                        return Err(TadError::validation(format!(
                            "unlabeled pool of {} samples cannot supply {budget}",
                            pool.len()
                        )));
                    }
                    let mut rng = stream_rng(seed, STREAM_EXTRA + task_index as u64);
                    let mut picked = sample(&mut rng, pool.len(), budget).into_vec();
                    picked.sort_unstable();
                    support.extend(picked.into_iter().map(|i| pool[i].clone()));
                }
            }
        }
        Ok(prototype_classifier_eval(&support, &query, self.temperature)?.accuracy)
    }
}

fn check_balanced(budget: usize, ways: usize) -> Result<()> {
    if !budget.is_multiple_of(ways) {
        return Err(TadError::validation(format!(
            "balanced budget {budget} is not divisible by {ways} ways"
        )));
    }
    Ok(())
}

/// One line of an externally produced accuracy file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub task_id: String,
    pub accuracy: f64,
    /// Accuracy after intervention, when the producer measured it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_after: Option<f64>,
}

/// Accuracies measured elsewhere, looked up by task id; the seed is ignored.
#[derive(Clone, Debug, Default)]
pub struct ExternalAccuracies {
    records: HashMap<String, AccuracyRecord>,
}

impl ExternalAccuracies {
    pub fn new(records: Vec<AccuracyRecord>) -> Result<Self> {
        let mut map = HashMap::with_capacity(records.len());
        for r in records {
            let ok = |a: f64| (0.0..=1.0).contains(&a);
            if !ok(r.accuracy) || !r.accuracy_after.is_none_or(ok) {
                return Err(TadError::validation(format!(
                    "accuracy of task '{}' lies outside [0, 1]",
                    r.task_id
                )));
            }
            if map.contains_key(&r.task_id) {
                return Err(TadError::validation(format!("task '{}' listed twice", r.task_id)));
            }
            map.insert(r.task_id.clone(), r);
        }
        Ok(Self { records: map })
    }

    pub fn from_jsonl<R: std::io::Read>(input: R) -> Result<Self> {
        Self::new(read_jsonl(input)?)
    }

    pub fn get(&self, task_id: &str) -> Option<&AccuracyRecord> {
        self.records.get(task_id)
    }
}

impl TaskEvaluator for ExternalAccuracies {
    fn accuracy(
        &self,
        _task_index: usize,
        task: &TaskSpec,
        _seed: u64,
        extra: Option<(usize, Strategy)>,
    ) -> Result<f64> {
        let r = self
            .get(&task.task_id)
            .ok_or_else(|| TadError::validation(format!("no accuracy for task '{}'", task.task_id)))?;
        match extra {
            None | Some((0, _)) => Ok(r.accuracy),
            Some(_) => r.accuracy_after.ok_or_else(|| {
                TadError::validation(format!(
                    "task '{}' is intervened but has no post-intervention accuracy",
                    task.task_id
                ))
            }),
        }
    }
}

/// Mean of the `k` smallest accuracies.
pub fn worst_k_accuracy(accuracies: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > accuracies.len() {
        return Err(TadError::validation(format!(
            "K = {k} is outside 1..={}",
            accuracies.len()
        )));
    }
    let mut sorted = accuracies.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}

/// Ids of the `k` least accurate tasks; equal accuracies admit lower ids first.
pub fn worst_k_tasks(records: &[(String, f64)], k: usize) -> Result<Vec<String>> {
    if k == 0 || k > records.len() {
        return Err(TadError::validation(format!("K = {k} is outside 1..={}", records.len())));
    }
    let mut sorted: Vec<&(String, f64)> = records.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(sorted[..k].iter().map(|r| r.0.clone()).collect())
}

/// Linear-interpolation percentile, `q` in `[0, 100]`.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&q) {
        return Err(TadError::validation("percentile needs values and q in [0, 100]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

/// A novel task and its distance to the training tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredTask {
    pub task: TaskSpec,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub acc_k_before: BTreeMap<usize, f64>,
    pub acc_k_after: BTreeMap<usize, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDelta {
    pub task_id: String,
    pub distance: f64,
    pub intervened: bool,
    /// Accuracies averaged over seeds.
    pub before: f64,
    pub after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionReport {
    /// Worst-K accuracies averaged over seeds.
    pub acc_k_before: BTreeMap<usize, f64>,
    pub acc_k_after: BTreeMap<usize, f64>,
    pub intervened_fraction: f64,
    pub per_seed: Vec<SeedReport>,
    pub per_task: Vec<TaskDelta>,
}

/// Gives every task with distance above the threshold `budget` extra labeled
/// samples and compares worst-K accuracy before and after, per seed.
pub fn run_intervention(
    tasks: &[ScoredTask],
    evaluator: &dyn TaskEvaluator,
    config: &InterventionConfig,
) -> Result<InterventionReport> {
    config.check()?;
    if tasks.is_empty() {
        return Err(TadError::validation("no tasks to intervene on"));
    }
    if let Some(&k) = config.ks.iter().find(|&&k| k > tasks.len()) {
        return Err(TadError::validation(format!(
            "K = {k} exceeds the {} available tasks",
            tasks.len()
        )));
    }
    let intervened: Vec<bool> = tasks.iter().map(|t| t.distance > config.threshold_r).collect();
    if config.strategy == Strategy::Balanced {
        for (t, _) in tasks.iter().zip(&intervened).filter(|(_, &on)| on) {
            check_balanced(config.budget, t.task.ways())?;
        }
    }

    let runs: Vec<(Vec<f64>, Vec<f64>)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let pairs: Vec<(f64, f64)> = tasks
                .par_iter()
                .enumerate()
                .map(|(i, t)| {
                    let before = evaluator.accuracy(i, &t.task, seed, None)?;
                    let after = if intervened[i] {
                        evaluator.accuracy(i, &t.task, seed, Some((config.budget, config.strategy)))?
                    } else {
                        before
                    };
                    Ok((before, after))
                })
                .collect::<Result<_>>()?;
            Ok(pairs.into_iter().unzip())
        })
        .collect::<Result<_>>()?;

    let worst = |accs: &[f64]| -> Result<BTreeMap<usize, f64>> {
        config.ks.iter().map(|&k| Ok((k, worst_k_accuracy(accs, k)?))).collect()
    };
    let mut per_seed = Vec::with_capacity(runs.len());
    for (&seed, (before, after)) in config.seeds.iter().zip(&runs) {
        per_seed.push(SeedReport {
            seed,
            acc_k_before: worst(before)?,
            acc_k_after: worst(after)?,
        });
    }
    let n_seeds = config.seeds.len() as f64;
    let average = |pick: fn(&SeedReport) -> &BTreeMap<usize, f64>| -> BTreeMap<usize, f64> {
        config
            .ks
            .iter()
            .map(|&k| (k, per_seed.iter().map(|s| pick(s)[&k]).sum::<f64>() / n_seeds))
            .collect()
    };
    let acc_k_before = average(|s| &s.acc_k_before);
    let acc_k_after = average(|s| &s.acc_k_after);

    let per_task = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| TaskDelta {
            task_id: t.task.task_id.clone(),
            distance: t.distance,
            intervened: intervened[i],
            before: runs.iter().map(|r| r.0[i]).sum::<f64>() / n_seeds,
            after: runs.iter().map(|r| r.1[i]).sum::<f64>() / n_seeds,
        })
        .collect();
    let count = intervened.iter().filter(|&&b| b).count();
    Ok(InterventionReport {
        acc_k_before,
        acc_k_after,
        intervened_fraction: count as f64 / tasks.len() as f64,
        per_seed,
        per_task,
    })
}
