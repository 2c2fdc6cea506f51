//! Episode sampling and the distance analysis protocols: distance–accuracy
//! binning and regression, Gamma moment fits, hardest-task selection and
//! class-frequency pruning.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TadError};
use crate::tad::TaskSpec;

pub const DEFAULT_BIN_WIDTH: f64 = 0.01;
pub const DEFAULT_MIN_COUNT: usize = 5;

/// N-way K-shot episode shape plus the sampling seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub ways: usize,
    pub shots: usize,
    pub queries: usize,
    pub seed: u64,
}

impl EpisodeConfig {
    pub fn check(&self) -> Result<()> {
        if self.ways < 2 || self.shots < 1 || self.queries < 1 {
            return Err(TadError::validation(format!(
                "episode needs ways >= 2, shots >= 1, queries >= 1; got {}/{}/{}",
                self.ways, self.shots, self.queries
            )));
        }
        Ok(())
    }
}

/// RNG stream for one draw: the seed picks the key, the index picks the stream.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Samples `n` tasks of `config.ways` distinct categories each.
///
/// Task `i` draws from its own RNG stream, so it depends only on the seed and `i`.
pub fn sample_tasks(
    class_pool: &[String],
    config: &EpisodeConfig,
    n: usize,
    pool_tag: &str,
) -> Result<Vec<TaskSpec>> {
    config.check()?;
    if class_pool.len() < config.ways {
        return Err(TadError::validation(format!(
            "pool of {} classes cannot fill {}-way tasks",
            class_pool.len(),
            config.ways
        )));
    }
    if n == 0 {
        return Err(TadError::validation("number of tasks must be at least 1"));
    }
    let distinct: std::collections::HashSet<_> = class_pool.iter().collect();
    if distinct.len() != class_pool.len() {
        return Err(TadError::validation("class pool repeats a category"));
    }
    Ok((0..n)
        .map(|i| {
            let mut rng = stream_rng(config.seed, i as u64);
            let cats = sample(&mut rng, class_pool.len(), config.ways)
                .into_iter()
                .map(|k| class_pool[k].clone())
                .collect();
            TaskSpec {
                task_id: format!("{pool_tag}-{i:06}"),
                category_ids: cats,
                pool_tag: pool_tag.to_string(),
            }
        })
        .collect())
}

/// Statistics of the records whose distance falls in `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_accuracy: f64,
    pub ci95: f64,
    /// Fewer than the minimum count of records.
    pub sparse: bool,
}

impl BinStat {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Groups `(distance, accuracy)` records into half-open bins of `bin_width`
/// starting at the smallest distance; empty bins are omitted.
pub fn bin_accuracy_curve(
    records: &[(f64, f64)],
    bin_width: f64,
    min_count: usize,
) -> Result<Vec<BinStat>> {
    if records.is_empty() {
        return Err(TadError::validation("no records to bin"));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(TadError::validation(format!("bin width {bin_width} must be positive")));
    }
    if records.iter().any(|(d, a)| !d.is_finite() || !a.is_finite()) {
        return Err(TadError::validation("records must be finite"));
    }
    let origin = records.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let mut bins: std::collections::BTreeMap<u64, Vec<f64>> = Default::default();
    for &(d, acc) in records {
        let idx = ((d - origin) / bin_width).floor() as u64;
        bins.entry(idx).or_default().push(acc);
    }
    Ok(bins
        .into_iter()
        .map(|(idx, accs)| {
            let n = accs.len();
            let mean = accs.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            BinStat {
                lo: origin + idx as f64 * bin_width,
                hi: origin + (idx + 1) as f64 * bin_width,
                count: n,
                mean_accuracy: mean,
                ci95: 1.96 * sd / (n as f64).sqrt(),
                sparse: n < min_count,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub pearson_r: f64,
}

/// Count-weighted least squares of bin mean accuracy on bin midpoint.
pub fn fit_linear(bins: &[BinStat]) -> Result<RegressionFit> {
    let points: Vec<(f64, f64, f64)> = bins
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| (b.midpoint(), b.mean_accuracy, b.count as f64))
        .collect();
    weighted_fit(&points)
}

/// Weighted least squares over `(x, y, weight)`; r is 0 when y has no variance.
pub fn weighted_fit(points: &[(f64, f64, f64)]) -> Result<RegressionFit> {
    if points.len() < 2 {
        return Err(TadError::validation("regression needs at least two points"));
    }
    let w: f64 = points.iter().map(|p| p.2).sum();
    let mx = points.iter().map(|p| p.2 * p.0).sum::<f64>() / w;
    let my = points.iter().map(|p| p.2 * p.1).sum::<f64>() / w;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| p.2 * (p.1 - my).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(TadError::validation("regression x values are all equal"));
    }
    let slope = sxy / sxx;
    let pearson_r = if syy > 0.0 {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Ok(RegressionFit {
        slope,
        intercept: my - slope * mx,
        pearson_r,
    })
}

/// Gamma parameters from the sample mean and population variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub shape: f64,
    pub scale: f64,
    pub sample_mean: f64,
    pub sample_var: f64,
}

pub fn fit_gamma_moments(samples: &[f64]) -> Result<GammaFit> {
    if samples.len() < 2 {
        return Err(TadError::validation("moment fit needs at least two samples"));
    }
    if samples.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(TadError::validation("moment fit needs positive finite samples"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(TadError::validation("moment fit needs non-constant samples"));
    }
    Ok(GammaFit {
        shape: mean * mean / var,
        scale: var / mean,
        sample_mean: mean,
        sample_var: var,
    })
}

/// The `ceil(fraction * n)` tasks with the largest distance; ties by task id.
pub fn select_top_fraction(records: &[(String, f64)], fraction: f64) -> Result<Vec<String>> {
    if records.is_empty() {
        return Err(TadError::validation("no tasks to select from"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(TadError::validation(format!("fraction {fraction} not in (0, 1]")));
    }
    if records.iter().any(|r| r.1.is_nan()) {
        return Err(TadError::validation("distances must not be NaN"));
    }
    let n = records.len();
    // The small offset absorbs representation error such as 0.05 * 2400 = 120 + 1ulp.
    let keep = ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut sorted: Vec<&(String, f64)> = records.iter().collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(sorted.into_iter().take(keep).map(|r| r.0.clone()).collect())
}

/// Category appearance counts over `tasks`, descending, ties by category id.
pub fn class_frequency_ranking(tasks: &[TaskSpec]) -> Result<Vec<(String, usize)>> {
    if tasks.is_empty() {
        return Err(TadError::validation("no tasks to count"));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in tasks {
        for c in &t.category_ids {
            *counts.entry(c.as_str()).or_default() += 1;
        }
    }
    let mut ranking: Vec<(String, usize)> =
        counts.into_iter().map(|(c, n)| (c.to_string(), n)).collect();
    sort_ranking(&mut ranking);
    Ok(ranking)
}

fn sort_ranking(ranking: &mut [(String, usize)]) {
    ranking.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Removes the `top_k` most frequent classes of `class_pool` (classes absent
/// from every task count zero) and returns the rest in pool order.
pub fn drop_most_frequent(
    class_pool: &[String],
    tasks: &[TaskSpec],
    top_k: usize,
) -> Result<Vec<String>> {
    let counted: HashMap<String, usize> = class_frequency_ranking(tasks)?.into_iter().collect();
    let mut ranking: Vec<(String, usize)> = class_pool
        .iter()
        .map(|c| (c.clone(), counted.get(c).copied().unwrap_or(0)))
        .collect();
    sort_ranking(&mut ranking);
    let dropped: std::collections::HashSet<&str> =
        ranking.iter().take(top_k).map(|(c, _)| c.as_str()).collect();
    Ok(class_pool
        .iter()
        .filter(|c| !dropped.contains(c.as_str()))
        .cloned()
        .collect())
}

/// Within- versus cross-scenario distance summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub within_mean: f64,
    pub cross_mean: f64,
    /// `cross_mean - within_mean`.
    pub gap: f64,
    /// Standard error of the gap from both sample variances.
    pub pooled_se: f64,
    pub within_fit: Option<GammaFit>,
    pub cross_fit: Option<GammaFit>,
}

pub fn scenario_compare(within: &[f64], cross: &[f64]) -> Result<ScenarioReport> {
    if within.is_empty() || cross.is_empty() {
        return Err(TadError::validation("both distance samples must be non-empty"));
    }
    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, var / n)
    };
    let (wm, wse2) = stats(within);
    let (cm, cse2) = stats(cross);
    Ok(ScenarioReport {
        within_mean: wm,
        cross_mean: cm,
        gap: cm - wm,
        pooled_se: (wse2 + cse2).sqrt(),
        within_fit: fit_gamma_moments(within).ok(),
        cross_fit: fit_gamma_moments(cross).ok(),
    })
}
