//! Wall-clock timing of both distance variants as the task size grows.

use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attr_model::AttributeTable;
use crate::episodes::{sample_tasks, EpisodeConfig};
use crate::error::{Result, TadError};
use crate::matching::hungarian_min_weight;
use crate::tad::{cost_matrix, resolve, TaskSums, Variant};

/// Task pairs timed per repetition; the reported time is per pair.
pub const PAIRS_PER_REPETITION: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub variant: Variant,
    pub ways: usize,
    pub repetitions: usize,
    /// Median over repetitions of the mean time per distance call.
    pub median_seconds: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn time_batch(reps: usize, mut call: impl FnMut()) -> Vec<f64> {
    call();
    (0..reps)
        .map(|_| {
            let start = Instant::now();
            call();
            start.elapsed().as_secs_f64() / PAIRS_PER_REPETITION as f64
        })
        .collect()
}

/// Times both variants for each task size on the current thread.
///
/// Both variants start from per-task state that a batch computation would
/// prepare once: resolved category profiles for the matched distance, and
/// category-summed distributions for the approximation. One untimed warm-up
/// round precedes the timed repetitions.
pub fn run_bench(
    table: &AttributeTable,
    ways_list: &[usize],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<BenchRecord>> {
    if repetitions < 5 {
        return Err(TadError::validation(format!("need at least 5 repetitions, got {repetitions}")));
    }
    let classes: Vec<String> = table.category_ids().map(str::to_string).collect();
    let attrs = table.schema().len();
    let mut out = Vec::with_capacity(2 * ways_list.len());
    for &ways in ways_list {
        if ways < 2 || ways > classes.len() {
            return Err(TadError::validation(format!(
                "table with {} categories cannot form {ways}-way tasks",
                classes.len()
            )));
        }
        let cfg = EpisodeConfig {
            ways,
            shots: 1,
            queries: 1,
            seed: seed.wrapping_add(ways as u64),
        };
        let tasks = sample_tasks(&classes, &cfg, 2 * PAIRS_PER_REPETITION, "bench")?;
        let profiles = tasks
            .iter()
            .map(|t| resolve(t, table))
            .collect::<Result<Vec<_>>>()?;
        let sums = tasks
            .iter()
            .map(|t| TaskSums::new(t, table))
            .collect::<Result<Vec<_>>>()?;

        let orig = time_batch(repetitions, || {
            for p in profiles.chunks_exact(2) {
                let m = hungarian_min_weight(&cost_matrix(&p[0], &p[1])).expect("valid cost matrix");
                black_box(m.total_weight / m.pairs.len() as f64);
            }
        });
        let approx = time_batch(repetitions, || {
            for s in sums.chunks_exact(2) {
                black_box(s[0].approx_distance(&s[1], attrs).expect("equal task sizes"));
            }
        });
        out.push(BenchRecord {
            variant: Variant::Orig,
            ways,
            repetitions,
            median_seconds: median(orig),
        });
        out.push(BenchRecord {
            variant: Variant::Approx,
            ways,
            repetitions,
            median_seconds: median(approx),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr_model::{AttributeSchema, CategoryProfile};

    fn table(n: usize) -> AttributeTable {
        let schema = AttributeSchema::binary(4).unwrap();
        let profiles = (0..n)
            .map(|i| {
                let p: Vec<f64> = (0..4).map(|l| ((i + l) % 5) as f64 / 4.0).collect();
                CategoryProfile::from_binary_marginals(format!("k{i}"), &p)
            })
            .collect();
        AttributeTable::new(schema, profiles, "t").unwrap()
    }

    #[test]
    fn records_per_size_and_variant() {
        let recs = run_bench(&table(12), &[2, 4], 5, 1).unwrap();
        assert_eq!(recs.len(), 4);
        assert!(recs.iter().all(|r| r.median_seconds > 0.0 && r.repetitions == 5));
        assert_eq!(recs[0].variant, Variant::Orig);
        assert_eq!(recs[3].ways, 4);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(run_bench(&table(6), &[5], 4, 0).is_err());
        assert!(run_bench(&table(6), &[7], 5, 0).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
