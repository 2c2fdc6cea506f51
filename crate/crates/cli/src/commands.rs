//! Subcommand bodies. Each reads its inputs, calls into `tad_core`, writes
//! its outputs and a run manifest next to each of them.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use tad_core::apps::{
    attribute_bce_loss, calibrate_support, combined_loss, episode_loss, generate_synth_world,
    percentile, plan_calibration, prototype_classifier_eval, run_intervention, AccuracyRecord,
    CalibrationConfig, ExternalAccuracies, InterventionConfig, PrototypeSet, ScoredTask, Strategy,
    SynthEvaluator, SynthWorld, SynthWorldConfig, TaskEvaluator,
};
use tad_core::attr_model::io::{
    load_attribute_table, read_annotations_csv, read_features_csv, read_schema,
    save_attribute_table, write_features_csv, TableFormat,
};
use tad_core::attr_model::{aggregate_frequency, aggregate_majority, induce_profiles, Attribute, Binning};
use tad_core::bench::run_bench;
use tad_core::distance::{lemma1_check, Lemma1Report};
use tad_core::episodes::{
    bin_accuracy_curve, drop_most_frequent, fit_gamma_moments, fit_linear, sample_tasks,
    scenario_compare, select_top_fraction, BinStat, EpisodeConfig, GammaFit, RegressionFit,
    ScenarioReport,
};
use tad_core::jsonl::{read_jsonl, write_jsonl};
use tad_core::tad::{distance_matrix, DistanceSummary, PoolDistance};
use tad_core::{
    AttributeSchema, AttributeTable, FeatureRecord, Result, TadError, Tables, TaskSpec, Variant,
};

use crate::manifest::{manifest_path, RunManifest};
use crate::{
    AggregateArgs, AnalyzeArgs, BenchArgs, CalibrateArgs, Command, EvaluateArgs, FormatArg,
    IngestArgs, InduceArgs, InterveneArgs, LemmaArgs, ModeArg, PruneArgs, SampleArgs, SelectArgs,
    StrategyArg, SynthArgs, TableArgs, TadArgs, VariantArg,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Induce(a) => induce(a),
        Command::Tad(a) => tad(a),
        Command::Sample(a) => sample(a),
        Command::Analyze(a) => analyze(a),
        Command::Select(a) => select(a),
        Command::PruneClasses(a) => prune_classes(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Intervene(a) => intervene(a),
        Command::Synth(a) => synth(a),
        Command::LemmaCheck(a) => lemma_check(a),
        Command::Bench(a) => bench(a),
    }
}

impl From<FormatArg> for TableFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::DistributionCsv => TableFormat::DistributionCsv,
            FormatArg::BinaryLabelCsv => TableFormat::BinaryLabelCsv,
        }
    }
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Orig => Variant::Orig,
            VariantArg::Approx => Variant::Approx,
        }
    }
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Balanced => Strategy::Balanced,
            StrategyArg::Imbalanced => Strategy::Imbalanced,
        }
    }
}

fn manifest<P: Serialize>(
    command: &str,
    params: &P,
    seeds: Vec<u64>,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<()> {
    let m = RunManifest::new(command, params, seeds, inputs)?;
    for out in outputs {
        m.write(&manifest_path(out))?;
    }
    Ok(())
}

fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(BufReader::new(File::open(path)?))
}

fn write_jsonl_file<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_jsonl(records, BufWriter::new(File::create(path)?))
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_features_file(path: &Path) -> Result<Vec<FeatureRecord>> {
    read_features_csv(BufReader::new(File::open(path)?))
}

fn write_features_file(path: &Path, records: &[FeatureRecord]) -> Result<()> {
    write_features_csv(records, BufWriter::new(File::create(path)?))
}

/// One id per line; blank lines and `#` comments are skipped.
fn read_class_list(path: &Path) -> Result<Vec<String>> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn write_class_list(path: &Path, classes: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for c in classes {
        writeln!(w, "{c}")?;
    }
    w.flush()?;
    Ok(())
}

fn load_table(args: &TableArgs) -> Result<AttributeTable> {
    let schema = args.schema.as_deref().map(read_schema).transpose()?;
    load_attribute_table(&args.table, args.format.into(), schema.as_ref())
}

fn table_inputs(args: &TableArgs) -> Vec<&Path> {
    let mut v = vec![args.table.as_path()];
    v.extend(args.schema.as_deref());
    v
}

/// Classes from exactly one of a class list or a table.
fn class_pool(classes: Option<&Path>, table: Option<&Path>, format: FormatArg) -> Result<Vec<String>> {
    match (classes, table) {
        (Some(p), None) => read_class_list(p),
        (None, Some(p)) => {
            let t = load_attribute_table(p, format.into(), None)?;
            Ok(t.category_ids().map(String::from).collect())
        }
        _ => Err(TadError::Validation("give exactly one of --classes or --table".into())),
    }
}

fn load_world(dir: &Path) -> Result<SynthWorld> {
    let config: SynthWorldConfig = serde_json::from_str(&std::fs::read_to_string(dir.join("config.json"))?)?;
    generate_synth_world(&config)
}

fn accuracy_map(path: &Path) -> Result<HashMap<String, f64>> {
    let records: Vec<AccuracyRecord> = read_jsonl_file(path)?;
    Ok(records.into_iter().map(|r| (r.task_id, r.accuracy)).collect())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let table = load_table(&a.input)?;
    save_attribute_table(&table, &a.out, a.out_format.into())?;
    manifest("ingest", &a, vec![], &table_inputs(&a.input), &[&a.out])
}

fn aggregate(a: AggregateArgs) -> Result<()> {
    let schema = read_schema(&a.schema)?;
    let annotations = read_annotations_csv(BufReader::new(File::open(&a.annotations)?), &schema)?;
    let table = match a.mode {
        ModeArg::Majority => aggregate_majority(&annotations, &schema)?,
        ModeArg::Frequency => aggregate_frequency(&annotations, &schema)?,
    };
    save_attribute_table(&table, &a.out, TableFormat::DistributionCsv)?;
    manifest("aggregate", &a, vec![], &[&a.annotations, &a.schema], &[&a.out])
}

fn induce(a: InduceArgs) -> Result<()> {
    let features = read_features_file(&a.features)?;
    let width = features
        .first()
        .map(|f| f.scores.len())
        .ok_or_else(|| TadError::Validation("features file has no rows".into()))?;
    let binning = match a.bins {
        Some(k) => Binning::EqualWidth(k),
        None => Binning::Threshold(a.threshold),
    };
    let schema = match (&a.schema, binning) {
        (Some(p), _) => read_schema(p)?,
        (None, Binning::Threshold(_)) => AttributeSchema::binary(width)?,
        (None, Binning::EqualWidth(k)) => AttributeSchema::new(
            (1..=width)
                .map(|l| Attribute {
                    id: format!("a_{l}"),
                    values: (0..k).map(|v| v.to_string()).collect(),
                })
                .collect(),
        )?,
    };
    let table = induce_profiles(&features, &schema, binning)?;
    save_attribute_table(&table, &a.out, TableFormat::DistributionCsv)?;
    let mut inputs = vec![a.features.as_path()];
    inputs.extend(a.schema.as_deref());
    manifest("induce", &a, vec![], &inputs, &[&a.out])
}

fn tad(a: TadArgs) -> Result<()> {
    let pool_table = load_table(&a.table)?;
    let novel_table = a
        .novel_table
        .as_deref()
        .map(|p| {
            let schema = a.table.schema.as_deref().map(read_schema).transpose()?;
            load_attribute_table(p, a.table.format.into(), schema.as_ref())
        })
        .transpose()?;
    let tables = match &novel_table {
        Some(n) => Tables::split(&pool_table, n)?,
        None => Tables::shared(&pool_table),
    };
    let novel: Vec<TaskSpec> = read_jsonl_file(&a.tasks)?;
    let pool: Vec<TaskSpec> = read_jsonl_file(&a.pool)?;
    let variant: Variant = a.variant.into();
    let matrix = distance_matrix(&novel, &pool, tables, variant, !a.serial)?;
    let summaries: Vec<DistanceSummary> = novel
        .iter()
        .zip(&matrix)
        .map(|(t, row)| DistanceSummary {
            task_id: t.task_id.clone(),
            variant,
            mean_distance: row.iter().sum::<f64>() / row.len() as f64,
            per_pool: a.per_pool.then(|| {
                pool.iter()
                    .zip(row)
                    .map(|(p, &d)| PoolDistance {
                        task_id: p.task_id.clone(),
                        distance: d,
                    })
                    .collect()
            }),
        })
        .collect();
    write_jsonl_file(&a.out, &summaries)?;
    let mut inputs = table_inputs(&a.table);
    inputs.extend(a.novel_table.as_deref());
    inputs.extend([a.tasks.as_path(), a.pool.as_path()]);
    manifest("tad", &a, vec![], &inputs, &[&a.out])
}

fn sample(a: SampleArgs) -> Result<()> {
    let classes = class_pool(a.classes.as_deref(), a.table.as_deref(), a.format)?;
    let config = EpisodeConfig {
        ways: a.ways,
        shots: a.shots,
        queries: a.queries,
        seed: a.seed,
    };
    let tasks = sample_tasks(&classes, &config, a.num_tasks, &a.pool_tag)?;
    write_jsonl_file(&a.out, &tasks)?;
    let inputs: Vec<&Path> = a.classes.iter().chain(&a.table).map(PathBuf::as_path).collect();
    manifest("sample", &a, vec![a.seed], &inputs, &[&a.out])
}

#[derive(Serialize)]
struct AnalyzeSummary {
    tasks: usize,
    distance_fit: Option<GammaFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regression: Option<RegressionFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bins: Option<Vec<BinStat>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<ScenarioReport>,
}

fn write_bins_csv(path: &Path, bins: &[BinStat]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lo", "hi", "midpoint", "count", "mean_accuracy", "ci95", "sparse"])?;
    for b in bins {
        w.write_record([
            b.lo.to_string(),
            b.hi.to_string(),
            b.midpoint().to_string(),
            b.count.to_string(),
            b.mean_accuracy.to_string(),
            b.ci95.to_string(),
            b.sparse.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let summaries: Vec<DistanceSummary> = read_jsonl_file(&a.distances)?;
    let distances: Vec<f64> = summaries.iter().map(|s| s.mean_distance).collect();
    let mut summary = AnalyzeSummary {
        tasks: summaries.len(),
        distance_fit: fit_gamma_moments(&distances).ok(),
        regression: None,
        bins: None,
        scenario: None,
    };
    let mut inputs = vec![a.distances.as_path()];
    let mut outputs = vec![a.out.as_path()];
    if let Some(acc_path) = &a.accuracies {
        let acc = accuracy_map(acc_path)?;
        let records = summaries
            .iter()
            .map(|s| {
                acc.get(&s.task_id)
                    .map(|&x| (s.mean_distance, x))
                    .ok_or_else(|| TadError::Validation(format!("no accuracy for task '{}'", s.task_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        let bins = bin_accuracy_curve(&records, a.bin_width, a.min_count)?;
        summary.regression = Some(fit_linear(&bins)?);
        if let Some(p) = &a.bins_out {
            write_bins_csv(p, &bins)?;
            outputs.push(p);
        }
        summary.bins = Some(bins);
        inputs.push(acc_path);
    } else if a.bins_out.is_some() {
        return Err(TadError::Validation("--bins-out needs --accuracies".into()));
    }
    if let Some(cross_path) = &a.cross {
        let cross: Vec<DistanceSummary> = read_jsonl_file(cross_path)?;
        let cross: Vec<f64> = cross.iter().map(|s| s.mean_distance).collect();
        summary.scenario = Some(scenario_compare(&distances, &cross)?);
        inputs.push(cross_path);
    }
    write_json_file(&a.out, &summary)?;
    manifest("analyze", &a, vec![], &inputs, &outputs)
}

#[derive(Serialize, Deserialize)]
struct Selected {
    task_id: String,
    mean_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
}

fn select(a: SelectArgs) -> Result<()> {
    let summaries: Vec<DistanceSummary> = read_jsonl_file(&a.distances)?;
    let records: Vec<(String, f64)> = summaries.iter().map(|s| (s.task_id.clone(), s.mean_distance)).collect();
    let by_id: HashMap<&str, f64> = records.iter().map(|(id, d)| (id.as_str(), *d)).collect();
    let acc = a.accuracies.as_deref().map(accuracy_map).transpose()?;
    let selected = select_top_fraction(&records, a.fraction)?
        .into_iter()
        .map(|id| {
            let accuracy = match &acc {
                Some(m) => Some(*m.get(&id).ok_or_else(|| {
                    TadError::Validation(format!("no accuracy for task '{id}'"))
                })?),
                None => None,
            };
            Ok(Selected {
                mean_distance: by_id[id.as_str()],
                task_id: id,
                accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_jsonl_file(&a.out, &selected)?;
    let mut inputs = vec![a.distances.as_path()];
    inputs.extend(a.accuracies.as_deref());
    manifest("select", &a, vec![], &inputs, &[&a.out])
}

fn prune_classes(a: PruneArgs) -> Result<()> {
    let classes = class_pool(a.classes.as_deref(), a.table.as_deref(), a.format)?;
    let tasks: Vec<TaskSpec> = read_jsonl_file(&a.tasks)?;
    let kept = drop_most_frequent(&classes, &tasks, a.top_k)?;
    write_class_list(&a.out, &kept)?;
    let mut inputs = vec![a.tasks.as_path()];
    inputs.extend(a.classes.iter().chain(&a.table).map(PathBuf::as_path));
    manifest("prune-classes", &a, vec![], &inputs, &[&a.out])
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let train = load_attribute_table(&a.train_table, a.format.into(), None)?;
    let novel = load_attribute_table(&a.novel_table, a.format.into(), Some(train.schema()))?;
    let tables = Tables::split(&train, &novel)?;
    let support = read_features_file(&a.support)?;
    let mut categories: Vec<String> = Vec::new();
    for r in &support {
        if !categories.contains(&r.category_id) {
            categories.push(r.category_id.clone());
        }
    }
    let task = TaskSpec::new("support", categories, novel.pool_tag())?;
    let pool: Vec<TaskSpec> = read_jsonl_file(&a.pool)?;
    let prototypes = PrototypeSet::from_records(&read_features_file(&a.prototypes)?)?;
    let config = CalibrationConfig {
        k_related: a.k_related,
        retain: a.retain,
        alpha: a.alpha,
        variant: a.variant.into(),
    };
    let mut outputs = vec![a.out.as_path()];
    let calibrated = match &a.plan_out {
        Some(plan_path) => {
            let plan = plan_calibration(&task, &pool, &prototypes, tables, &config)?;
            write_json_file(plan_path, &plan)?;
            outputs.push(plan_path);
            tad_core::apps::apply_calibration(&support, &task, &plan, config.alpha)?
        }
        None => calibrate_support(&support, &task, &pool, &prototypes, tables, &config)?,
    };
    write_features_file(&a.out, &calibrated)?;
    let inputs = [
        a.train_table.as_path(),
        a.novel_table.as_path(),
        a.support.as_path(),
        a.pool.as_path(),
        a.prototypes.as_path(),
    ];
    manifest("calibrate", &a, vec![], &inputs, &outputs)
}

#[derive(Serialize)]
struct QueryPrediction {
    instance_id: String,
    category_id: String,
    prediction: String,
    probabilities: Vec<f64>,
}

#[derive(Serialize)]
struct EvaluateReport {
    categories: Vec<String>,
    accuracy: f64,
    episode_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    attribute_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    combined_loss: Option<f64>,
    queries: Vec<QueryPrediction>,
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    match (&a.support, &a.query, &a.world, &a.tasks) {
        (Some(s), Some(q), None, None) => evaluate_files(&a, s, q),
        (None, None, Some(w), Some(t)) => evaluate_world(&a, w, t),
        _ => Err(TadError::Validation(
            "give either --support and --query, or --world and --tasks".into(),
        )),
    }
}

fn evaluate_files(a: &EvaluateArgs, support_path: &Path, query_path: &Path) -> Result<()> {
    let support = read_features_file(support_path)?;
    let query = read_features_file(query_path)?;
    let output = prototype_classifier_eval(&support, &query, a.temperature)?;
    let loss = episode_loss(&output, &query)?;
    let mut inputs = vec![support_path, query_path];
    let attribute_loss = match (&a.labels, &a.schema) {
        (Some(l), Some(s)) => {
            let schema = read_schema(s)?;
            let labels = read_annotations_csv(BufReader::new(File::open(l)?), &schema)?;
            inputs.extend([l.as_path(), s.as_path()]);
            Some(attribute_bce_loss(&query, &labels)?)
        }
        (None, None) => None,
        _ => return Err(TadError::Validation("--labels and --schema go together".into())),
    };
    let combined = match (attribute_loss, a.beta) {
        (Some(bce), Some(beta)) => Some(combined_loss(bce, &[loss], beta)?),
        (None, Some(_)) => return Err(TadError::Validation("--beta needs --labels".into())),
        _ => None,
    };
    let queries = query
        .iter()
        .zip(&output.predictions)
        .zip(&output.probabilities)
        .map(|((q, p), probs)| QueryPrediction {
            instance_id: q.instance_id.clone(),
            category_id: q.category_id.clone(),
            prediction: p.clone(),
            probabilities: probs.clone(),
        })
        .collect();
    let report = EvaluateReport {
        categories: output.categories,
        accuracy: output.accuracy,
        episode_loss: loss,
        attribute_loss,
        combined_loss: combined,
        queries,
    };
    write_json_file(&a.out, &report)?;
    manifest("evaluate", a, vec![], &inputs, &[&a.out])
}

fn evaluate_world(a: &EvaluateArgs, dir: &Path, tasks_path: &Path) -> Result<()> {
    let world = load_world(dir)?;
    let tasks: Vec<TaskSpec> = read_jsonl_file(tasks_path)?;
    let evaluator = SynthEvaluator {
        world: &world,
        shots: a.shots,
        queries: a.queries,
        temperature: a.temperature,
    };
    let records = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Ok(AccuracyRecord {
                task_id: t.task_id.clone(),
                accuracy: evaluator.accuracy(i, t, a.seed, None)?,
                accuracy_after: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_jsonl_file(&a.out, &records)?;
    let config = dir.join("config.json");
    manifest("evaluate", a, vec![a.seed], &[&config, tasks_path], &[&a.out])
}

fn intervene(a: InterveneArgs) -> Result<()> {
    let tasks: Vec<TaskSpec> = read_jsonl_file(&a.tasks)?;
    let summaries: Vec<DistanceSummary> = read_jsonl_file(&a.distances)?;
    let by_id: HashMap<&str, f64> = summaries.iter().map(|s| (s.task_id.as_str(), s.mean_distance)).collect();
    let scored = tasks
        .into_iter()
        .map(|task| {
            let distance = *by_id.get(task.task_id.as_str()).ok_or_else(|| {
                TadError::Validation(format!("no distance for task '{}'", task.task_id))
            })?;
            Ok(ScoredTask { task, distance })
        })
        .collect::<Result<Vec<_>>>()?;
    let threshold = match a.threshold_percentile {
        Some(q) => percentile(&scored.iter().map(|s| s.distance).collect::<Vec<_>>(), q)?,
        None => a.threshold,
    };
    let config = InterventionConfig {
        threshold_r: threshold,
        budget: a.budget,
        strategy: a.strategy.into(),
        seeds: a.seeds.clone(),
        ks: a.ks.clone(),
    };
    let mut inputs = vec![a.tasks.as_path(), a.distances.as_path()];
    let world_config;
    let report = match (&a.accuracies, &a.world) {
        (Some(p), None) => {
            inputs.push(p);
            let external = ExternalAccuracies::from_jsonl(BufReader::new(File::open(p)?))?;
            run_intervention(&scored, &external, &config)?
        }
        (None, Some(dir)) => {
            world_config = dir.join("config.json");
            inputs.push(&world_config);
            let world = load_world(dir)?;
            let evaluator = SynthEvaluator {
                world: &world,
                shots: a.shots,
                queries: a.queries,
                temperature: a.temperature,
            };
            run_intervention(&scored, &evaluator, &config)?
        }
        _ => {
            return Err(TadError::Validation(
                "give exactly one of --accuracies or --world".into(),
            ))
        }
    };
    #[derive(Serialize)]
    struct Output<'a> {
        threshold: f64,
        #[serde(flatten)]
        report: &'a tad_core::apps::InterventionReport,
    }
    write_json_file(&a.out, &Output { threshold, report: &report })?;
    manifest("intervene", &a, a.seeds.clone(), &inputs, &[&a.out])
}

fn synth(a: SynthArgs) -> Result<()> {
    let config = SynthWorldConfig {
        num_classes: a.num_classes,
        num_attributes: a.num_attributes,
        profile_sparsity: a.sparsity,
        noise_sigma: a.sigma,
        samples_per_class: a.samples_per_class,
        seed: a.seed,
        domains: a.domains,
        domain_bias: a.domain_bias,
        train_classes: a.train_classes,
        transfer_penalty: a.transfer_penalty,
        transfer_exponent: a.transfer_exponent,
    };
    let world = generate_synth_world(&config)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let dir = &a.out_dir;
    write_json_file(&dir.join("config.json"), &config)?;
    save_attribute_table(&world.table, dir.join("table.csv"), TableFormat::DistributionCsv)?;
    write_features_file(&dir.join("features.csv"), &world.features)?;
    let mut w = csv::Writer::from_path(dir.join("domains.csv"))?;
    w.write_record(["category", "domain"])?;
    for (c, d) in world.domain_assignment() {
        w.write_record([c, d.to_string()])?;
    }
    w.flush()?;
    write_class_list(&dir.join("train_classes.txt"), &world.train_class_ids())?;
    write_class_list(&dir.join("novel_classes.txt"), &world.novel_class_ids())?;
    RunManifest::new("synth", &a, vec![a.seed], &[])?.write(&dir.join("manifest.json"))
}

#[derive(Serialize)]
struct LemmaLine {
    first: String,
    second: String,
    #[serde(flatten)]
    report: Lemma1Report,
}

fn lemma_check(a: LemmaArgs) -> Result<()> {
    let table = load_table(&a.table)?;
    let profile = |id: &str| {
        table
            .profile(id)
            .ok_or_else(|| TadError::Validation(format!("category '{id}' not in table")))
    };
    let pairs: Vec<(String, String)> = match (&a.first, &a.second) {
        (Some(f), Some(s)) => vec![(f.clone(), s.clone())],
        _ => {
            let ids: Vec<String> = table.category_ids().map(String::from).collect();
            let mut v = Vec::new();
            for i in 0..ids.len() {
                for j in i + 1..ids.len() {
                    v.push((ids[i].clone(), ids[j].clone()));
                }
            }
            v
        }
    };
    let lines = pairs
        .into_iter()
        .map(|(f, s)| {
            let report = lemma1_check(profile(&f)?, profile(&s)?)?;
            Ok(LemmaLine { first: f, second: s, report })
        })
        .collect::<Result<Vec<_>>>()?;
    write_jsonl_file(&a.out, &lines)?;
    manifest("lemma-check", &a, vec![], &table_inputs(&a.table), &[&a.out])
}

fn bench(a: BenchArgs) -> Result<()> {
    let table = match &a.table {
        Some(p) => load_attribute_table(p, a.format.into(), None)?,
        None => {
            let config = SynthWorldConfig {
                seed: a.seed,
                samples_per_class: 1,
                ..SynthWorldConfig::default()
            };
            generate_synth_world(&config)?.table
        }
    };
    let records = run_bench(&table, &a.ways, a.repetitions, a.seed)?;
    write_jsonl_file(&a.out, &records)?;
    let inputs: Vec<&Path> = a.table.iter().map(PathBuf::as_path).collect();
    manifest("bench", &a, vec![a.seed], &inputs, &[&a.out])
}
