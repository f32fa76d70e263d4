//! Pipeline stages. Each stage reads the artifacts of the previous ones from
//! the study directory, checks their digests against the current
//! configuration and dataset, and writes its own.
//!
//! Only `evaluate` and `analyze` see test rows. Every other stage loads the
//! dataset with test rows overwritten by NaN, so an accidental read shows up
//! as NaN in its outputs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use embsurr_core::analysis::{
    ale, importance, monotonicity, overlap_sets, pdp, usage_histogram, CalibratedModel, EffectCurve, Importance, SparsitySummary,
};
use embsurr_core::calib::{apply_temperature, calibrate, fit_temperature, nll_at, CalibrationReport, ProbabilityScores, ReliabilityBin};
use embsurr_core::data::{make_splits, pool_2to1, EmbeddingDataset, Split, ZScoreStats};
use embsurr_core::digest::fnv1a64;
use embsurr_core::gp::{run, RunData, SurrogateModel};
use embsurr_core::metrics::{auc_macro_ovr, t_interval};
use embsurr_core::select::{canonical, macro_f1, RunRecord};
use embsurr_core::spfp::{partition, ViewPartition};
use embsurr_core::{Matrix, Program};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, read_json, write_csv, write_json, StudyDir};
use crate::config::{SeedRange, StudyConfig};
use crate::{embd, table, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestAccess {
    Sealed,
    Open,
}

/// Dataset after split tagging, optional pooling and training-only z-scoring.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: EmbeddingDataset,
    /// Standardized matrix, all rows.
    pub x: Matrix,
    pub stats: ZScoreStats,
    /// Digest of the file contents as loaded, before any processing.
    pub dataset_digest: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Prepared {
    pub fn labels(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&i| self.dataset.y[i]).collect()
    }
}

pub fn dataset_digest(ds: &EmbeddingDataset) -> u64 {
    let mut bytes = Vec::new();
    embd::write_embd(ds, &mut bytes).expect("writing to memory cannot fail");
    fnv1a64(&bytes)
}

pub fn prepare(config: &StudyConfig, access: TestAccess) -> Result<Prepared> {
    let loaded = table::load_any(&config.dataset)?;
    let dataset_digest = dataset_digest(&loaded);
    let mut ds = if loaded.count(Split::Val) == 0 { make_splits(&loaded, config.val_fraction, config.split_seed)? } else { loaded };
    if config.pool {
        let (x, boundary) = pool_2to1(&ds.x, ds.tower_boundary)?;
        ds = EmbeddingDataset { x, tower_boundary: boundary, ..ds };
    }
    ds.validate_for_pipeline()?;
    let test = ds.indices(Split::Test);
    if access == TestAccess::Sealed {
        for &i in &test {
            ds.x.row_mut(i).fill(f64::NAN);
        }
    }
    let train = ds.indices(Split::Train);
    let stats = ZScoreStats::fit_rows(&ds.x, &train, config.zscore_epsilon)?;
    let x = stats.apply(&ds.x)?;
    let val = ds.indices(Split::Val);
    Ok(Prepared { dataset: ds, x, stats, dataset_digest, train, val, test })
}

// ---------------------------------------------------------------- partition

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionArtifact {
    pub config_digest: u64,
    pub dataset_digest: u64,
    pub partition_digest: u64,
    pub classes: usize,
    pub val_rows: Vec<usize>,
    pub preprocess: ZScoreStats,
    pub partition: ViewPartition,
}

pub fn partition_stage(config: &StudyConfig, dir: &StudyDir) -> Result<PartitionArtifact> {
    let prep = prepare(config, TestAccess::Sealed)?;
    let x_train = prep.x.select_rows(&prep.train);
    let p = partition(&x_train, &prep.labels(&prep.train), prep.dataset.classes, &config.spfp)?;
    let artifact = PartitionArtifact {
        config_digest: config.digest(),
        dataset_digest: prep.dataset_digest,
        partition_digest: p.digest(),
        classes: prep.dataset.classes,
        val_rows: prep.val.clone(),
        preprocess: prep.stats,
        partition: p,
    };
    write_json(&dir.path(artifacts::PARTITION), &artifact)?;
    Ok(artifact)
}

/// Read the partition and refuse it if it belongs to another study.
fn load_partition(config: &StudyConfig, dir: &StudyDir, prep: &Prepared) -> Result<PartitionArtifact> {
    let path = dir.path(artifacts::PARTITION);
    let artifact: PartitionArtifact = read_json(&path)?;
    if artifact.config_digest != config.digest() {
        return Err(Error::Validation(format!(
            "{} was written under config digest {:016x} but the current config has {:016x}; refusing to mix studies",
            path.display(),
            artifact.config_digest,
            config.digest()
        )));
    }
    if artifact.dataset_digest != prep.dataset_digest {
        return Err(Error::Validation(format!(
            "{} was written for dataset digest {:016x} but {} has {:016x}",
            path.display(),
            artifact.dataset_digest,
            config.dataset.display(),
            prep.dataset_digest
        )));
    }
    Ok(artifact)
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainSummary {
    pub trained: Vec<u64>,
    /// Seeds whose run file already existed with matching digests.
    pub reused: Vec<u64>,
}

fn check_run(record: &RunRecord, config_digest: u64, partition_digest: u64, path: &std::path::Path) -> Result<()> {
    if record.config_digest != config_digest || record.partition_digest != partition_digest {
        return Err(Error::Validation(format!(
            "{} has digests config {:016x} / partition {:016x}, expected {:016x} / {:016x}; refusing to mix studies",
            path.display(),
            record.config_digest,
            record.partition_digest,
            config_digest,
            partition_digest
        )));
    }
    Ok(())
}

fn read_run(dir: &StudyDir, seed: u64, config_digest: u64, partition_digest: u64) -> Result<RunRecord> {
    let path = dir.run(seed);
    let record: RunRecord = read_json(&path)?;
    check_run(&record, config_digest, partition_digest, &path)?;
    if record.seed != seed {
        return Err(Error::Validation(format!("{} holds seed {}", path.display(), record.seed)));
    }
    Ok(record)
}

/// Run every seed of `seeds` that has no finished run file, `jobs` at a time.
pub fn train_stage(config: &StudyConfig, dir: &StudyDir, seeds: SeedRange, jobs: usize) -> Result<TrainSummary> {
    let prep = prepare(config, TestAccess::Sealed)?;
    let part = load_partition(config, dir, &prep)?;
    let digest = config.digest();
    let mut summary = TrainSummary::default();
    let mut pending = Vec::new();
    for seed in seeds.seeds() {
        match read_run(dir, seed, digest, part.partition_digest) {
            Ok(_) => summary.reused.push(seed),
            Err(Error::MissingArtifact(_)) => pending.push(seed),
            Err(e) => return Err(e),
        }
    }
    let data = RunData { x: &prep.x, y: &prep.dataset.y, train: &prep.train, val: &prep.val };
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, pending.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&seed) = pending.get(k) else { break };
                if failure.lock().expect("no worker panics while holding the lock").is_some() {
                    break;
                }
                let outcome = run(&data, &part.partition, part.classes, &config.gp, seed)
                    .map_err(Error::from)
                    .and_then(|mut record| {
                        record.config_digest = digest;
                        write_json(&dir.run(seed), &record)
                    });
                if let Err(e) = outcome {
                    failure.lock().expect("no worker panics while holding the lock").get_or_insert(e);
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("workers have finished") {
        return Err(e);
    }
    summary.trained = pending;
    Ok(summary)
}

// ---------------------------------------------------------------- select

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub seed: u64,
    pub val_macro_f1: f64,
    pub complexity: usize,
    pub depth: usize,
    pub unique_dims: usize,
    pub generations: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionArtifact {
    pub config_digest: u64,
    pub partition_digest: u64,
    pub best_f1: f64,
    pub se: f64,
    pub threshold: f64,
    pub chosen_seed: u64,
    pub runs: Vec<RunRow>,
    /// Per-class logits of the canonical model, views summed.
    pub canonical_logits: Vec<Program>,
}

fn read_runs(dir: &StudyDir, seeds: SeedRange, config_digest: u64, partition_digest: u64) -> Result<Vec<RunRecord>> {
    seeds.seeds().map(|s| read_run(dir, s, config_digest, partition_digest)).collect()
}

fn read_partition_unchecked(dir: &StudyDir) -> Result<PartitionArtifact> {
    read_json(&dir.path(artifacts::PARTITION))
}

pub fn select_stage(config: &StudyConfig, dir: &StudyDir, seeds: SeedRange) -> Result<SelectionArtifact> {
    let part = read_partition_unchecked(dir)?;
    let digest = config.digest();
    if part.config_digest != digest {
        return Err(Error::Validation(format!("partition was written under config digest {:016x}, current is {digest:016x}", part.config_digest)));
    }
    let runs = read_runs(dir, seeds, digest, part.partition_digest)?;
    let sel = canonical(&runs)?;
    let rows = runs
        .iter()
        .zip(&sel.feasible)
        .map(|(r, &feasible)| RunRow {
            seed: r.seed,
            val_macro_f1: r.val_macro_f1,
            complexity: r.complexity,
            depth: r.depth,
            unique_dims: r.unique_dims,
            generations: r.generations,
            feasible,
        })
        .collect();
    let artifact = SelectionArtifact {
        config_digest: digest,
        partition_digest: part.partition_digest,
        best_f1: sel.best_f1,
        se: sel.se,
        threshold: sel.threshold,
        chosen_seed: sel.chosen_seed,
        runs: rows,
        canonical_logits: runs[sel.chosen].model.class_logits(),
    };
    write_json(&dir.path(artifacts::SELECTION), &artifact)?;
    Ok(artifact)
}

fn load_selection(config: &StudyConfig, dir: &StudyDir) -> Result<(SelectionArtifact, SurrogateModel)> {
    let sel: SelectionArtifact = read_json(&dir.path(artifacts::SELECTION))?;
    if sel.config_digest != config.digest() {
        return Err(Error::Validation(format!("selection was written under config digest {:016x}, current is {:016x}", sel.config_digest, config.digest())));
    }
    let record = read_run(dir, sel.chosen_seed, sel.config_digest, sel.partition_digest)?;
    Ok((sel, record.model))
}

// ---------------------------------------------------------------- calibrate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    pub config_digest: u64,
    pub chosen_seed: u64,
    pub temperature: f64,
    pub val_nll_before: f64,
    pub val_nll_after: f64,
    pub val_before: ProbabilityScores,
    pub val_after: ProbabilityScores,
}

/// Fit the temperature of the canonical model on the validation split.
pub fn calibrate_stage(config: &StudyConfig, dir: &StudyDir) -> Result<CalibrationArtifact> {
    let (sel, model) = load_selection(config, dir)?;
    let prep = prepare(config, TestAccess::Sealed)?;
    load_partition(config, dir, &prep)?;
    let z_val = model.logits_rows(&prep.x, &prep.val)?;
    let y_val = prep.labels(&prep.val);
    let t = fit_temperature(&z_val, &y_val)?;
    let artifact = CalibrationArtifact {
        config_digest: sel.config_digest,
        chosen_seed: sel.chosen_seed,
        temperature: t,
        val_nll_before: nll_at(&z_val, &y_val, 1.0)?,
        val_nll_after: nll_at(&z_val, &y_val, t)?,
        val_before: ProbabilityScores::of(&apply_temperature(&z_val, 1.0)?, &y_val),
        val_after: ProbabilityScores::of(&apply_temperature(&z_val, t)?, &y_val),
    };
    write_json(&dir.path(artifacts::CALIBRATION), &artifact)?;
    Ok(artifact)
}

fn load_calibration(config: &StudyConfig, dir: &StudyDir, chosen_seed: u64) -> Result<CalibrationArtifact> {
    let cal: CalibrationArtifact = read_json(&dir.path(artifacts::CALIBRATION))?;
    if cal.config_digest != config.digest() || cal.chosen_seed != chosen_seed {
        return Err(Error::Validation("calibration.json does not belong to the current selection; rerun calibrate".into()));
    }
    Ok(cal)
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestScores {
    pub seed: u64,
    pub macro_f1: f64,
    pub auc: f64,
    pub ece: f64,
    pub brier: f64,
    pub log_loss: f64,
    pub complexity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub metric: String,
    pub mean: f64,
    /// Absent with fewer than two runs.
    pub halfwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalTest {
    pub seed: u64,
    pub temperature: f64,
    pub f1_before: f64,
    pub f1_after: f64,
    pub auc_before: f64,
    pub auc_after: f64,
    pub report: CalibrationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationArtifact {
    pub config_digest: u64,
    pub runs: Vec<TestScores>,
    pub summary: Vec<Summary>,
    pub canonical: CanonicalTest,
}

fn test_scores(model: &SurrogateModel, seed: u64, prep: &Prepared) -> Result<TestScores> {
    let y = prep.labels(&prep.test);
    let z = model.logits_rows(&prep.x, &prep.test)?;
    let p = apply_temperature(&z, 1.0)?;
    let scores = ProbabilityScores::of(&p, &y);
    Ok(TestScores {
        seed,
        macro_f1: macro_f1(&argmax_rows(&z), &y, model.classes),
        auc: auc_macro_ovr(&p, &y)?.auc,
        ece: scores.ece,
        brier: scores.brier,
        log_loss: scores.log_loss,
        complexity: model.complexity(),
    })
}

fn argmax_rows(z: &Matrix) -> Vec<usize> {
    z.rows_iter()
        .map(|row| (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best }))
        .collect()
}

fn summarize(name: &str, values: &[f64]) -> Summary {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Summary { metric: name.into(), mean, halfwidth: t_interval(values).ok().map(|s| s.halfwidth) }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v}"))
}

pub fn evaluate_stage(config: &StudyConfig, dir: &StudyDir, seeds: SeedRange) -> Result<EvaluationArtifact> {
    let (sel, model) = load_selection(config, dir)?;
    let cal = load_calibration(config, dir, sel.chosen_seed)?;
    let prep = prepare(config, TestAccess::Open)?;
    load_partition(config, dir, &prep)?;
    let runs = read_runs(dir, seeds, sel.config_digest, sel.partition_digest)?;
    let scores: Vec<TestScores> = runs.iter().map(|r| test_scores(&r.model, r.seed, &prep)).collect::<Result<_>>()?;
    let column = |f: fn(&TestScores) -> f64| scores.iter().map(f).collect::<Vec<f64>>();
    let summary = vec![
        summarize("F1", &column(|s| s.macro_f1)),
        summarize("AUC", &column(|s| s.auc)),
        summarize("ECE", &column(|s| s.ece)),
        summarize("Brier", &column(|s| s.brier)),
        summarize("LogLoss", &column(|s| s.log_loss)),
        summarize("Complexity", &column(|s| s.complexity as f64)),
    ];

    let (y_val, y_test) = (prep.labels(&prep.val), prep.labels(&prep.test));
    let z_val = model.logits_rows(&prep.x, &prep.val)?;
    let z_test = model.logits_rows(&prep.x, &prep.test)?;
    let report = calibrate(&z_val, &y_val, &z_test, &y_test)?;
    if report.temperature.to_bits() != cal.temperature.to_bits() {
        return Err(Error::Validation(format!("refitted temperature {} differs from calibration.json {}", report.temperature, cal.temperature)));
    }
    let before = apply_temperature(&z_test, 1.0)?;
    let after = apply_temperature(&z_test, cal.temperature)?;
    let canonical = CanonicalTest {
        seed: sel.chosen_seed,
        temperature: cal.temperature,
        f1_before: macro_f1(&argmax_rows(&before), &y_test, model.classes),
        f1_after: macro_f1(&argmax_rows(&after), &y_test, model.classes),
        auc_before: auc_macro_ovr(&before, &y_test)?.auc,
        auc_after: auc_macro_ovr(&after, &y_test)?.auc,
        report,
    };
    // temperature scaling is a monotone map of each row, so predictions cannot move
    assert_eq!(canonical.f1_before, canonical.f1_after, "temperature scaling changed a predicted class");

    write_csv(
        &dir.path(artifacts::METRICS_CSV),
        &["metric", "mean", "halfwidth"],
        summary.iter().map(|s| vec![s.metric.clone(), format!("{}", s.mean), fmt_opt(s.halfwidth)]),
    )?;
    write_csv(
        &dir.path("runs_test.csv"),
        &["seed", "f1", "auc", "ece", "brier", "log_loss", "complexity"],
        scores.iter().map(|s| {
            vec![
                s.seed.to_string(),
                s.macro_f1.to_string(),
                s.auc.to_string(),
                s.ece.to_string(),
                s.brier.to_string(),
                s.log_loss.to_string(),
                s.complexity.to_string(),
            ]
        }),
    )?;
    let r = &canonical.report;
    write_csv(
        &dir.path(artifacts::CALIBRATION_TEST_CSV),
        &["metric", "before", "after"],
        [
            ("temperature", 1.0, r.temperature),
            ("f1", canonical.f1_before, canonical.f1_after),
            ("auc", canonical.auc_before, canonical.auc_after),
            ("ece", r.before.ece, r.after.ece),
            ("brier", r.before.brier, r.after.brier),
            ("log_loss", r.before.log_loss, r.after.log_loss),
        ]
        .into_iter()
        .map(|(m, b, a)| vec![m.to_string(), b.to_string(), a.to_string()]),
    )?;
    let bin_rows = |phase: &'static str, bins: &[ReliabilityBin]| -> Vec<Vec<String>> {
        bins.iter()
            .map(|b| {
                vec![
                    phase.to_string(),
                    b.lo.to_string(),
                    b.hi.to_string(),
                    b.count.to_string(),
                    b.confidence.to_string(),
                    b.accuracy.to_string(),
                    b.cp_lo.to_string(),
                    b.cp_hi.to_string(),
                ]
            })
            .collect()
    };
    write_csv(
        &dir.path(artifacts::RELIABILITY_CSV),
        &["phase", "lo", "hi", "count", "confidence", "accuracy", "cp_lo", "cp_hi"],
        bin_rows("before", &r.bins_before).into_iter().chain(bin_rows("after", &r.bins_after)),
    )?;
    let artifact = EvaluationArtifact { config_digest: sel.config_digest, runs: scores, summary, canonical };
    write_json(&dir.path(artifacts::METRICS_JSON), &artifact)?;
    Ok(artifact)
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    pub dim: u32,
    pub class: usize,
    pub importance: f64,
    pub delta_p: f64,
    pub ale_abs_integral: f64,
    pub monotonicity_pdp: f64,
    pub monotonicity_ale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisArtifact {
    pub config_digest: u64,
    pub seed: u64,
    pub temperature: f64,
    pub sparsity: SparsitySummary,
    pub effects: Vec<EffectSummary>,
}

/// Importance, usage, overlap and PDP/ALE curves of the calibrated
/// canonical model on the test split.
pub fn analyze_stage(config: &StudyConfig, dir: &StudyDir) -> Result<AnalysisArtifact> {
    let (sel, model) = load_selection(config, dir)?;
    let cal = load_calibration(config, dir, sel.chosen_seed)?;
    let prep = prepare(config, TestAccess::Open)?;
    load_partition(config, dir, &prep)?;
    let eps = model.epsilon;
    let logits = model.class_logits();
    let x_test = prep.x.select_rows(&prep.test);
    let calibrated = CalibratedModel::new(logits.clone(), cal.temperature, eps)?;

    let imp = importance(&logits, &x_test, eps)?;
    let used: BTreeSet<u32> = logits.iter().flat_map(Program::used_dims).collect();
    let mut ranked: Vec<&Importance> = imp.iter().filter(|i| used.contains(&i.dim)).collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.dim.cmp(&b.dim)));
    write_csv(
        &dir.analysis("importance.csv"),
        &["dim", "importance", "pct_logits", "max_power"],
        ranked.iter().map(|i| vec![format!("d{}", i.dim), i.score.to_string(), i.pct_logits.to_string(), i.max_power.to_string()]),
    )?;

    let mut effects = Vec::new();
    let mut curve_rows = Vec::new();
    for top in ranked.iter().take(config.analysis.top_dims) {
        let dim = top.dim as usize;
        // the class whose logit leans on this coordinate the most
        let class = (0..logits.len())
            .map(|c| importance(&logits[c..=c], &x_test, eps).map(|v| v[dim].score))
            .collect::<embsurr_core::Result<Vec<f64>>>()?
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (c, &s)| if s > best.1 { (c, s) } else { best })
            .0;
        let seed = config.analysis.bootstrap_seed.wrapping_add(top.dim as u64);
        let p = pdp(&calibrated, &x_test, dim, class, config.analysis.bootstraps, seed)?;
        let a = ale(&calibrated, &x_test, dim, class, config.analysis.bootstraps, seed)?;
        effects.push(EffectSummary {
            dim: top.dim,
            class,
            importance: top.score,
            delta_p: p.range(),
            ale_abs_integral: a.abs_integral(),
            monotonicity_pdp: monotonicity(&p),
            monotonicity_ale: monotonicity(&a),
        });
        curve_rows.extend(curve_csv(&p));
        curve_rows.extend(curve_csv(&a));
    }
    write_csv(&dir.analysis("effects.csv"), &["dim", "class", "kind", "knot", "grid", "value", "ci_lo", "ci_hi"], curve_rows)?;
    write_csv(
        &dir.analysis("effect_summary.csv"),
        &["dim", "class", "importance", "delta_p", "ale_abs_integral", "monotonicity_pdp", "monotonicity_ale"],
        effects.iter().map(|e| {
            vec![
                format!("d{}", e.dim),
                e.class.to_string(),
                e.importance.to_string(),
                e.delta_p.to_string(),
                e.ale_abs_integral.to_string(),
                e.monotonicity_pdp.to_string(),
                e.monotonicity_ale.to_string(),
            ]
        }),
    )?;
    write_csv(
        &dir.analysis("usage.csv"),
        &["dim", "logits"],
        usage_histogram(&logits).into_iter().map(|(d, f)| vec![format!("d{d}"), f.to_string()]),
    )?;
    write_csv(
        &dir.analysis("overlap.csv"),
        &["logits", "dims"],
        overlap_sets(&logits).into_iter().map(|(members, count)| {
            vec![members.iter().map(usize::to_string).collect::<Vec<_>>().join("|"), count.to_string()]
        }),
    )?;
    let mut text = String::new();
    for (c, l) in logits.iter().enumerate() {
        let _ = writeln!(text, "logit {c}: {l}");
        let _ = writeln!(text, "logit {c} simplified: {}", l.simplify(eps));
    }
    let path = dir.analysis("logits.txt");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    let artifact = AnalysisArtifact {
        config_digest: sel.config_digest,
        seed: sel.chosen_seed,
        temperature: cal.temperature,
        sparsity: SparsitySummary::of(&logits),
        effects,
    };
    write_json(&dir.analysis("analysis.json"), &artifact)?;
    Ok(artifact)
}

fn curve_csv(c: &EffectCurve) -> Vec<Vec<String>> {
    (0..c.grid.len())
        .map(|k| {
            vec![
                format!("d{}", c.dim),
                c.class.to_string(),
                c.kind.name().to_string(),
                k.to_string(),
                c.grid[k].to_string(),
                c.values[k].to_string(),
                c.ci_lo.get(k).map_or_else(String::new, f64::to_string),
                c.ci_hi.get(k).map_or_else(String::new, f64::to_string),
            ]
        })
        .collect()
}

// ---------------------------------------------------------------- report

/// Markdown digest of every stage's artifacts.
pub fn report_stage(config: &StudyConfig, dir: &StudyDir) -> Result<String> {
    let part: PartitionArtifact = read_json(&dir.path(artifacts::PARTITION))?;
    let (sel, _) = load_selection(config, dir)?;
    let cal = load_calibration(config, dir, sel.chosen_seed)?;
    let eval: EvaluationArtifact = read_json(&dir.path(artifacts::METRICS_JSON))?;
    let analysis: AnalysisArtifact = read_json(&dir.analysis("analysis.json"))?;
    if eval.config_digest != config.digest() || analysis.config_digest != config.digest() {
        return Err(Error::Validation("evaluation or analysis artifacts belong to another config; rerun them".into()));
    }
    let mut s = String::new();
    let _ = writeln!(s, "# Study report\n");
    let _ = writeln!(s, "config digest `{:016x}`, dataset digest `{:016x}`, partition digest `{:016x}`\n", part.config_digest, part.dataset_digest, part.partition_digest);
    let _ = writeln!(s, "## Views\n");
    let _ = writeln!(s, "{} views over {} coordinates, budget {}: sizes {:?}\n", part.partition.len(), part.partition.d, part.partition.budget, part.partition.sizes());
    let _ = writeln!(s, "## Test metrics over {} runs\n", eval.runs.len());
    let _ = writeln!(s, "| metric | mean | 95% halfwidth |\n|---|---|---|");
    for m in &eval.summary {
        let _ = writeln!(s, "| {} | {:.4} | {} |", m.metric, m.mean, m.halfwidth.map_or_else(|| "NA".into(), |h| format!("{h:.4}")));
    }
    let _ = writeln!(s, "\n## Canonical model\n");
    let feasible = sel.runs.iter().filter(|r| r.feasible).count();
    let _ = writeln!(
        s,
        "seed {} chosen from {feasible} feasible runs (best val F1 {:.4}, SE {:.4}, threshold {:.4})\n",
        sel.chosen_seed, sel.best_f1, sel.se, sel.threshold
    );
    let sp = &analysis.sparsity;
    let _ = writeln!(
        s,
        "unique dims {}, median dims/logit {:.2}, ops +{} -{} x{} /{}, max depth {}, total nodes {}\n",
        sp.unique_dims, sp.median_dims_per_logit, sp.op_counts.add, sp.op_counts.sub, sp.op_counts.mul, sp.op_counts.div, sp.max_depth, sp.total_nodes
    );
    let c = &eval.canonical;
    let _ = writeln!(s, "## Calibration (test)\n");
    let _ = writeln!(s, "T = {:.4} (val NLL {:.4} -> {:.4})\n", cal.temperature, cal.val_nll_before, cal.val_nll_after);
    let _ = writeln!(s, "| metric | before | after |\n|---|---|---|");
    for (m, b, a) in [
        ("F1", c.f1_before, c.f1_after),
        ("AUC", c.auc_before, c.auc_after),
        ("ECE", c.report.before.ece, c.report.after.ece),
        ("Brier", c.report.before.brier, c.report.after.brier),
        ("LogLoss", c.report.before.log_loss, c.report.after.log_loss),
    ] {
        let _ = writeln!(s, "| {m} | {b:.4} | {a:.4} |");
    }
    let _ = writeln!(s, "\n## Effects\n");
    let _ = writeln!(s, "| dim | class | importance | delta p | int abs ALE | rho PDP | rho ALE |\n|---|---|---|---|---|---|---|");
    for e in &analysis.effects {
        let _ = writeln!(
            s,
            "| d{} | {} | {:.4} | {:.4} | {:.4} | {:.3} | {:.3} |",
            e.dim, e.class, e.importance, e.delta_p, e.ale_abs_integral, e.monotonicity_pdp, e.monotonicity_ale
        );
    }
    let path = dir.path(artifacts::REPORT);
    std::fs::write(&path, &s).map_err(|e| Error::io(&path, e))?;
    Ok(s)
}
