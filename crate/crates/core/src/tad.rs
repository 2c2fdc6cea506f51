//! Task attribute distance: the matched (exact) form and the category-summed
//! approximation, plus pool averages and batch distance matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attr_model::{AttributeTable, CategoryProfile};
use crate::distance::category_distance_unchecked;
use crate::error::{Result, TadError};
use crate::matching::{hungarian_min_weight, CostMatrix, Matching};

/// An ordered set of distinct categories drawn from a named pool.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    #[serde(rename = "id")]
    pub task_id: String,
    #[serde(rename = "categories")]
    pub category_ids: Vec<String>,
    #[serde(rename = "pool")]
    pub pool_tag: String,
}

impl TaskSpec {
    pub fn new(
        task_id: impl Into<String>,
        category_ids: Vec<String>,
        pool_tag: impl Into<String>,
    ) -> Result<Self> {
        let task = Self {
            task_id: task_id.into(),
            category_ids,
            pool_tag: pool_tag.into(),
        };
        task.check()?;
        Ok(task)
    }

    pub fn ways(&self) -> usize {
        self.category_ids.len()
    }

    pub fn check(&self) -> Result<()> {
        if self.category_ids.is_empty() {
            return Err(TadError::validation(format!("task '{}' has no categories", self.task_id)));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.category_ids {
            if !seen.insert(c) {
                return Err(TadError::validation(format!(
                    "task '{}' repeats category '{c}'",
                    self.task_id
                )));
            }
        }
        Ok(())
    }
}

/// Tables resolving the categories of the first and second task of a pair.
#[derive(Clone, Copy, Debug)]
pub struct Tables<'a> {
    pub first: &'a AttributeTable,
    pub second: &'a AttributeTable,
}

impl<'a> Tables<'a> {
    /// One table serves both tasks.
    pub fn shared(table: &'a AttributeTable) -> Self {
        Self { first: table, second: table }
    }

    pub fn split(first: &'a AttributeTable, second: &'a AttributeTable) -> Result<Self> {
        if first.schema() != second.schema() {
            return Err(TadError::validation("tables do not share a schema"));
        }
        Ok(Self { first, second })
    }

    fn attributes(&self) -> usize {
        self.first.schema().len()
    }
}

pub(crate) fn resolve<'a>(task: &TaskSpec, table: &'a AttributeTable) -> Result<Vec<&'a CategoryProfile>> {
    task.check()?;
    task.category_ids
        .iter()
        .map(|c| {
            table.profile(c).ok_or_else(|| {
                TadError::validation(format!(
                    "task '{}': category '{c}' not in table '{}'",
                    task.task_id,
                    table.pool_tag()
                ))
            })
        })
        .collect()
}

/// Which form of the distance to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Orig,
    Approx,
}

impl std::str::FromStr for Variant {
    type Err = TadError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orig" => Ok(Variant::Orig),
            "approx" => Ok(Variant::Approx),
            other => Err(TadError::validation(format!("unknown variant '{other}'"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Orig => "orig",
            Variant::Approx => "approx",
        })
    }
}

/// One matched category pair and its category distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDistance {
    pub first: String,
    pub second: String,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TadResult {
    pub orig: Option<f64>,
    pub approx: Option<f64>,
    pub matching: Option<Matching>,
    pub per_edge: Vec<EdgeDistance>,
}

/// Category distances between every category of `a` (rows) and `b` (cols).
pub fn build_cost_matrix(a: &TaskSpec, b: &TaskSpec, tables: Tables<'_>) -> Result<CostMatrix> {
    let pa = resolve(a, tables.first)?;
    let pb = resolve(b, tables.second)?;
    check_schema(tables)?;
    Ok(cost_matrix(&pa, &pb))
}

fn check_schema(tables: Tables<'_>) -> Result<()> {
    if !std::ptr::eq(tables.first, tables.second) && tables.first.schema() != tables.second.schema()
    {
        return Err(TadError::validation("tables do not share a schema"));
    }
    Ok(())
}

pub(crate) fn cost_matrix(pa: &[&CategoryProfile], pb: &[&CategoryProfile]) -> CostMatrix {
    let entries = pa
        .iter()
        .flat_map(|x| pb.iter().map(move |y| category_distance_unchecked(x, y)))
        .collect();
    CostMatrix::new(pa.len(), pb.len(), entries).expect("category distances are finite")
}

/// Mean category distance over a minimum-weight maximum matching.
pub fn tad_orig(a: &TaskSpec, b: &TaskSpec, tables: Tables<'_>) -> Result<TadResult> {
    let cost = build_cost_matrix(a, b, tables)?;
    let matching = hungarian_min_weight(&cost)?;
    let per_edge: Vec<EdgeDistance> = matching
        .pairs
        .iter()
        .map(|&(r, c)| EdgeDistance {
            first: a.category_ids[r].clone(),
            second: b.category_ids[c].clone(),
            distance: cost.get(r, c),
        })
        .collect();
    let orig = matching.total_weight / matching.pairs.len() as f64;
    let approx = if a.ways() == b.ways() {
        Some(tad_approx(a, b, tables)?)
    } else {
        None
    };
    Ok(TadResult {
        orig: Some(orig),
        approx,
        matching: Some(matching),
        per_edge,
    })
}

/// Flattened per-attribute value sums over a task's categories.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSums {
    ways: usize,
    sums: Vec<f64>,
}

impl TaskSums {
    pub fn new(task: &TaskSpec, table: &AttributeTable) -> Result<Self> {
        let profiles = resolve(task, table)?;
        let width: usize = table.schema().cardinalities().iter().sum();
        let mut sums = vec![0.0; width];
        for p in &profiles {
            for (slot, w) in sums.iter_mut().zip(p.distributions.iter().flatten()) {
                *slot += w;
            }
        }
        Ok(Self { ways: profiles.len(), sums })
    }

    /// Approximate distance between two tasks summarized over `attributes` attributes.
    pub fn approx_distance(&self, other: &TaskSums, attributes: usize) -> Result<f64> {
        if self.ways != other.ways {
            return Err(TadError::infeasible(format!(
                "approximate distance needs equal task sizes, got {} and {}",
                self.ways, other.ways
            )));
        }
        let l1: f64 = self
            .sums
            .iter()
            .zip(&other.sums)
            .map(|(x, y)| (x - y).abs())
            .sum();
        Ok(l1 / (2.0 * attributes as f64 * self.ways as f64))
    }
}

/// Distance between the category-summed attribute distributions of two equal-sized tasks.
pub fn tad_approx(a: &TaskSpec, b: &TaskSpec, tables: Tables<'_>) -> Result<f64> {
    check_schema(tables)?;
    let sa = TaskSums::new(a, tables.first)?;
    let sb = TaskSums::new(b, tables.second)?;
    sa.approx_distance(&sb, tables.attributes())
}

/// Precomputed pool state for repeated distance queries against it.
enum Prepared<'a> {
    Approx(Vec<TaskSums>),
    Orig(Vec<Vec<&'a CategoryProfile>>),
}

fn prepare<'a>(pool: &[TaskSpec], table: &'a AttributeTable, variant: Variant) -> Result<Prepared<'a>> {
    Ok(match variant {
        Variant::Approx => Prepared::Approx(
            pool.iter()
                .map(|t| TaskSums::new(t, table))
                .collect::<Result<_>>()?,
        ),
        Variant::Orig => Prepared::Orig(pool.iter().map(|t| resolve(t, table)).collect::<Result<_>>()?),
    })
}

fn distances_to_prepared(
    novel: &TaskSpec,
    prepared: &Prepared<'_>,
    tables: Tables<'_>,
) -> Result<Vec<f64>> {
    match prepared {
        Prepared::Approx(pool) => {
            let sums = TaskSums::new(novel, tables.second)?;
            let attrs = tables.attributes();
            pool.iter().map(|p| p.approx_distance(&sums, attrs)).collect()
        }
        Prepared::Orig(pool) => {
            let novel_profiles = resolve(novel, tables.second)?;
            pool.iter()
                .map(|p| {
                    let cost = cost_matrix(p, &novel_profiles);
                    let m = hungarian_min_weight(&cost)?;
                    Ok(m.total_weight / m.pairs.len() as f64)
                })
                .collect()
        }
    }
}

/// Distances from every pool task (first table) to `novel` (second table), in pool order.
pub fn distances_to_pool(
    novel: &TaskSpec,
    pool: &[TaskSpec],
    tables: Tables<'_>,
    variant: Variant,
) -> Result<Vec<f64>> {
    check_schema(tables)?;
    let prepared = prepare(pool, tables.first, variant)?;
    distances_to_prepared(novel, &prepared, tables)
}

fn mean_in_order(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean distance from `novel` to the pool tasks, summed in pool order.
pub fn avg_distance_to_pool(
    novel: &TaskSpec,
    pool: &[TaskSpec],
    tables: Tables<'_>,
    variant: Variant,
) -> Result<f64> {
    if pool.is_empty() {
        return Err(TadError::validation("training pool is empty"));
    }
    Ok(mean_in_order(&distances_to_pool(novel, pool, tables, variant)?))
}

/// Entry `(j, i)` is the distance between pool task `i` and novel task `j`.
///
/// Each entry is computed independently, so serial and parallel evaluation
/// produce identical output.
pub fn distance_matrix(
    novel_tasks: &[TaskSpec],
    pool: &[TaskSpec],
    tables: Tables<'_>,
    variant: Variant,
    parallel: bool,
) -> Result<Vec<Vec<f64>>> {
    if pool.is_empty() {
        return Err(TadError::validation("training pool is empty"));
    }
    check_schema(tables)?;
    let prepared = prepare(pool, tables.first, variant)?;
    if parallel {
        novel_tasks
            .par_iter()
            .map(|t| distances_to_prepared(t, &prepared, tables))
            .collect()
    } else {
        novel_tasks
            .iter()
            .map(|t| distances_to_prepared(t, &prepared, tables))
            .collect()
    }
}

/// Row means of [`distance_matrix`], one per novel task.
pub fn avg_distances(
    novel_tasks: &[TaskSpec],
    pool: &[TaskSpec],
    tables: Tables<'_>,
    variant: Variant,
) -> Result<Vec<f64>> {
    Ok(distance_matrix(novel_tasks, pool, tables, variant, true)?
        .iter()
        .map(|row| mean_in_order(row))
        .collect())
}

/// One line of the results JSONL.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub task_id: String,
    pub variant: Variant,
    pub mean_distance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_pool: Option<Vec<PoolDistance>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolDistance {
    pub task_id: String,
    pub distance: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr_model::{AttributeSchema, CategoryProfile};

    fn table(rows: &[(&str, &[f64])]) -> AttributeTable {
        let schema = AttributeSchema::binary(rows[0].1.len()).unwrap();
        let profiles = rows
            .iter()
            .map(|(id, p)| CategoryProfile::from_binary_marginals(*id, p))
            .collect();
        AttributeTable::new(schema, profiles, "t").unwrap()
    }

    fn task(id: &str, cats: &[&str]) -> TaskSpec {
        TaskSpec::new(id, cats.iter().map(|c| c.to_string()).collect(), "p").unwrap()
    }

    #[test]
    fn task_spec_rejects_duplicates_and_empty() {
        assert!(TaskSpec::new("t", vec!["a".into(), "a".into()], "p").is_err());
        assert!(TaskSpec::new("t", vec![], "p").is_err());
    }

    #[test]
    fn identical_and_permuted_tasks() {
        let t = table(&[("a", &[0.1, 0.9]), ("b", &[0.7, 0.2]), ("c", &[0.4, 0.4])]);
        let x = task("x", &["a", "b", "c"]);
        let y = task("y", &["c", "a", "b"]);
        let r = tad_orig(&x, &x, Tables::shared(&t)).unwrap();
        assert_eq!(r.orig, Some(0.0));
        assert_eq!(r.approx, Some(0.0));
        let z = task("z", &["a", "b", "c"]);
        let other = table(&[("a", &[0.0, 1.0]), ("b", &[1.0, 0.5]), ("c", &[0.5, 0.0])]);
        let d1 = tad_orig(&z, &x, Tables::split(&t, &other).unwrap()).unwrap();
        let d2 = tad_orig(&z, &y, Tables::split(&t, &other).unwrap()).unwrap();
        assert!((d1.orig.unwrap() - d2.orig.unwrap()).abs() < 1e-12);
        assert!((d1.approx.unwrap() - d2.approx.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn crossing_example() {
        // Brute force over the two pairings: straight costs 1 + 1, crossed costs 0 + 0.
        let ta = table(&[("a1", &[1.0]), ("a2", &[0.0])]);
        let tb = table(&[("b1", &[0.0]), ("b2", &[1.0])]);
        let a = task("A", &["a1", "a2"]);
        let b = task("B", &["b1", "b2"]);
        let tables = Tables::split(&ta, &tb).unwrap();
        let r = tad_orig(&a, &b, tables).unwrap();
        assert_eq!(r.orig, Some(0.0));
        assert_eq!(r.matching.unwrap().pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(tad_approx(&a, &b, tables).unwrap(), 0.0);
    }

    #[test]
    fn approx_strictly_below_orig() {
        // Sums of P(1): A = 1.0, B = 1.0, so approx = 0; each matched pair has TV 0.5.
        let ta = table(&[("a1", &[1.0]), ("a2", &[0.0])]);
        let tb = table(&[("b1", &[0.5]), ("b2", &[0.5])]);
        let a = task("A", &["a1", "a2"]);
        let b = task("B", &["b1", "b2"]);
        let tables = Tables::split(&ta, &tb).unwrap();
        assert_eq!(tad_approx(&a, &b, tables).unwrap(), 0.0);
        let r = tad_orig(&a, &b, tables).unwrap();
        assert_eq!(r.orig, Some(0.5));
        assert_eq!(r.per_edge.len(), 2);
        assert!(r.per_edge.iter().all(|e| e.distance == 0.5));
    }

    #[test]
    fn unequal_sizes() {
        let t = table(&[("a", &[0.1]), ("b", &[0.6]), ("c", &[0.9])]);
        let small = task("s", &["a"]);
        let big = task("b", &["a", "b", "c"]);
        let r = tad_orig(&small, &big, Tables::shared(&t)).unwrap();
        assert_eq!(r.orig, Some(0.0));
        assert_eq!(r.approx, None);
        assert!(matches!(
            tad_approx(&small, &big, Tables::shared(&t)),
            Err(TadError::Infeasible(_))
        ));
    }

    #[test]
    fn unknown_category_is_named() {
        let t = table(&[("a", &[0.1])]);
        let err = build_cost_matrix(&task("x", &["a"]), &task("y", &["zz"]), Tables::shared(&t))
            .unwrap_err();
        assert!(err.to_string().contains("zz"));
    }

    #[test]
    fn cost_matrix_entries() {
        let t = table(&[("k", &[0.9, 0.1]), ("t", &[0.6, 0.3])]);
        let c = build_cost_matrix(&task("x", &["k"]), &task("y", &["t"]), Tables::shared(&t)).unwrap();
        assert!((c.get(0, 0) - 0.25).abs() < 1e-15);
        let c = build_cost_matrix(&task("x", &["k", "t"]), &task("y", &["k", "t"]), Tables::shared(&t))
            .unwrap();
        assert_eq!((c.get(0, 0), c.get(1, 1)), (0.0, 0.0));
        assert!((c.get(0, 1) - 0.25).abs() < 1e-15 && (c.get(1, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn pool_averages() {
        let t = table(&[("a", &[0.0]), ("b", &[0.1]), ("c", &[0.3])]);
        let novel = task("n", &["a"]);
        let pool = vec![task("p1", &["b"]), task("p2", &["c"])];
        let avg = avg_distance_to_pool(&novel, &pool, Tables::shared(&t), Variant::Orig).unwrap();
        assert!((avg - 0.2).abs() < 1e-15);
        let single = avg_distance_to_pool(&novel, &pool[..1], Tables::shared(&t), Variant::Approx).unwrap();
        assert!((single - 0.1).abs() < 1e-15);
        let copies = vec![novel.clone(), novel.clone()];
        assert_eq!(avg_distance_to_pool(&novel, &copies, Tables::shared(&t), Variant::Orig).unwrap(), 0.0);
        assert!(avg_distance_to_pool(&novel, &[], Tables::shared(&t), Variant::Orig).is_err());
    }

    #[test]
    fn matrix_rows_match_pool_average() {
        let t = table(&[("a", &[0.0, 0.2]), ("b", &[0.1, 0.9]), ("c", &[0.3, 0.5]), ("d", &[1.0, 0.0])]);
        let novel = vec![task("n1", &["a", "b"]), task("n2", &["c", "d"])];
        let pool = vec![task("p1", &["b", "c"]), task("p2", &["a", "d"]), task("p3", &["d", "b"])];
        for variant in [Variant::Orig, Variant::Approx] {
            let serial = distance_matrix(&novel, &pool, Tables::shared(&t), variant, false).unwrap();
            let par = distance_matrix(&novel, &pool, Tables::shared(&t), variant, true).unwrap();
            assert_eq!(serial, par);
            for (row, n) in serial.iter().zip(&novel) {
                let avg = avg_distance_to_pool(n, &pool, Tables::shared(&t), variant).unwrap();
                assert!((mean_in_order(row) - avg).abs() < 1e-12);
            }
            let one = distance_matrix(&novel[..1], &pool[..1], Tables::shared(&t), variant, false).unwrap();
            let direct = match variant {
                Variant::Orig => tad_orig(&pool[0], &novel[0], Tables::shared(&t)).unwrap().orig.unwrap(),
                Variant::Approx => tad_approx(&pool[0], &novel[0], Tables::shared(&t)).unwrap(),
            };
            assert_eq!(one[0][0], direct);
        }
    }

    #[test]
    fn task_jsonl_shape() {
        let t = task("t1", &["a", "b"]);
        let line = serde_json::to_string(&t).unwrap();
        assert_eq!(line, r#"{"id":"t1","categories":["a","b"],"pool":"p"}"#);
    }
}
