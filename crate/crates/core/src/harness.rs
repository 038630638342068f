//! Reproducible experiment runner: JSON configs, seed management, CSV
//! emission, and run manifests.
//!
//! A config is a single JSON document (no environment-variable overrides)
//! with a `kind` discriminator and one kind-specific section; unknown fields
//! are rejected at parse time. Each run writes one CSV per experiment kind
//! plus a `manifest.json` recording the canonical config hash, the crate
//! version, and the output paths. Work units are distributed over a thread
//! pool, but results are collected and written in deterministic seed order,
//! so re-running an identical config reproduces byte-identical CSVs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bandit::{self, GpBanditModel};
use crate::env::{
    sample_algorithm, sample_description, sample_program_batch, sample_test_suite_batch,
    Environment, Snapshot,
};
use crate::error::{Error, Result};
use crate::refine::{self, Compression, Factorization, FeedbackMode, LoopConfig};
use crate::select::{pass_at_k_eval, score, select_top_k, ExecutionMatrix, Heuristic, ScoreConfig};
use crate::stream::{derive_seed, substream};
use crate::verify;

/// Experiment discriminator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Selection,
    Bandit,
    Refinement,
    Verify,
}

/// Parameters of a selection experiment: per task, sample a batch of
/// programs and suites, score every heuristic, and record whether its top-1
/// pick realizes the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionParams {
    pub tasks: usize,
    /// Programs sampled per task.
    pub n: usize,
    /// Suites sampled per task.
    pub m: usize,
    pub domain_size: usize,
    pub ambiguity_level: f64,
    pub fidelity: f64,
    pub suite_size: usize,
    pub corruption: f64,
    pub heuristics: Vec<Heuristic>,
}

/// Parameters of a bandit experiment over the line-graph reference model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditParams {
    pub arms: usize,
    pub lengthscale: f64,
    pub noise_sd: f64,
    pub hidden_var: f64,
    pub rounds: usize,
    pub episodes: usize,
}

/// Parameters of a refinement experiment: one task and one trajectory per
/// seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementParams {
    pub domain_size: usize,
    pub alphabet_size: usize,
    pub ambiguity_level: f64,
    pub reveal_examples: bool,
    pub rounds: usize,
    pub factorization: Factorization,
    pub compression: Compression,
    pub feedback_mode: FeedbackMode,
    pub suite_size: usize,
    pub corruption: f64,
    pub prior_confidence: f64,
}

/// Parameters of a verify run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    #[serde(default)]
    pub filter: Option<String>,
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub parallel: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub selection: Option<SelectionParams>,
    #[serde(default)]
    pub bandit: Option<BanditParams>,
    #[serde(default)]
    pub refinement: Option<RefinementParams>,
    #[serde(default)]
    pub verify: Option<VerifyParams>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("config parse failed: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.seeds.is_empty() && self.kind != ExperimentKind::Verify {
            problems.push("seeds: must be nonempty".to_string());
        }
        if self.parallel == Some(0) {
            problems.push("parallel: must be positive".to_string());
        }
        match self.kind {
            ExperimentKind::Selection => match &self.selection {
                None => problems.push("selection: section required for kind".into()),
                Some(p) => {
                    for (name, value) in [
                        ("selection.tasks", p.tasks),
                        ("selection.n", p.n),
                        ("selection.m", p.m),
                        ("selection.domain_size", p.domain_size),
                        ("selection.suite_size", p.suite_size),
                    ] {
                        if value == 0 {
                            problems.push(format!("{name}: must be positive"));
                        }
                    }
                    if p.heuristics.is_empty() {
                        problems.push("selection.heuristics: must be nonempty".into());
                    }
                }
            },
            ExperimentKind::Bandit => match &self.bandit {
                None => problems.push("bandit: section required for kind".into()),
                Some(p) => {
                    for (name, value) in [
                        ("bandit.arms", p.arms),
                        ("bandit.rounds", p.rounds),
                        ("bandit.episodes", p.episodes),
                    ] {
                        if value == 0 {
                            problems.push(format!("{name}: must be positive"));
                        }
                    }
                }
            },
            ExperimentKind::Refinement => match &self.refinement {
                None => problems.push("refinement: section required for kind".into()),
                Some(p) => {
                    for (name, value) in [
                        ("refinement.domain_size", p.domain_size),
                        ("refinement.alphabet_size", p.alphabet_size),
                        ("refinement.rounds", p.rounds),
                        ("refinement.suite_size", p.suite_size),
                    ] {
                        if value == 0 {
                            problems.push(format!("{name}: must be positive"));
                        }
                    }
                }
            },
            ExperimentKind::Verify => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

/// Canonical hash of a config document: JSON values sort object keys, so the
/// hash is stable under field reordering in the source text.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let value = serde_json::to_value(config)?;
    let canonical = serde_json::to_string(&value)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Record of one run: what was executed and where the outputs landed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_ms: u128,
}

/// Outcome of [`run`]: the manifest plus the number of failed checks (zero
/// for non-verify kinds).
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub checks_failed: usize,
}

fn with_pool<T: Send>(parallel: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match parallel {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(f),
        None => f(),
    }
}

/// One selection row: the top-1 verdict of one heuristic on one task.
fn selection_rows_for_task(
    params: &SelectionParams,
    seed: u64,
    task: usize,
) -> Result<Vec<(u64, usize, Heuristic, u8)>> {
    let e = Environment::binary();
    let mut rng = substream(seed, &[0x5e1, task as u64]);
    let alg = sample_algorithm(params.domain_size, e.alphabet_size, params.ambiguity_level, &mut rng)?;
    let desc = sample_description(&alg, e.alphabet_size, false, &mut rng);
    let codes = sample_program_batch(&desc, params.fidelity, params.n, &mut rng)?;
    let suites =
        sample_test_suite_batch(&desc, params.suite_size, params.corruption, params.m, &e, &mut rng)?;
    let matrix = ExecutionMatrix::from_batch(&codes, &suites, &e)?;
    let score_cfg = ScoreConfig { seed: derive_seed(seed, &[0x5c0, task as u64]) };
    let mut rows = Vec::with_capacity(params.heuristics.len());
    for &heuristic in &params.heuristics {
        let scored = score(&matrix, heuristic, &score_cfg)?;
        let top1 = select_top_k(&scored.scores, matrix.code_ids(), 1)?;
        let hit = pass_at_k_eval(&codes, &top1, &alg, &e)?;
        rows.push((seed, task, heuristic, hit as u8));
    }
    Ok(rows)
}

fn run_selection(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    use rayon::prelude::*;
    let params = config.selection.as_ref().expect("validated");
    let units: Vec<(u64, usize)> = config
        .seeds
        .iter()
        .flat_map(|&seed| (0..params.tasks).map(move |task| (seed, task)))
        .collect();
    let rows: Vec<Vec<(u64, usize, Heuristic, u8)>> = units
        .par_iter()
        .map(|&(seed, task)| selection_rows_for_task(params, seed, task))
        .collect::<Result<_>>()?;

    let path = out_dir.join("selection.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["seed", "task", "heuristic", "pass_at_1"])?;
    for task_rows in rows {
        for (seed, task, heuristic, hit) in task_rows {
            w.write_record([
                seed.to_string(),
                task.to_string(),
                heuristic.to_string(),
                hit.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(vec![path])
}

fn run_bandit(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let params = config.bandit.as_ref().expect("validated");
    let model = GpBanditModel::line_graph(
        params.arms,
        params.lengthscale,
        params.noise_sd,
        params.hidden_var,
    )?;
    let csv_path = out_dir.join("bandit.csv");
    let json_path = out_dir.join("bandit_summary.json");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["seed", "round", "regret_obs", "regret_true", "cum_obs", "cum_true"])?;
    let mut summaries = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let traces =
            bandit::run_episodes(&model, params.rounds, params.episodes, bandit::Policy::Thompson, seed)?;
        let report = bandit::bound_report(&model, &traces, 100_000, seed)?;
        for t in 0..report.rounds {
            let prev_obs = if t == 0 { 0.0 } else { report.mean_cum_obs[t - 1] };
            let prev_true = if t == 0 { 0.0 } else { report.mean_cum_true[t - 1] };
            w.write_record([
                seed.to_string(),
                (t + 1).to_string(),
                (report.mean_cum_obs[t] - prev_obs).to_string(),
                (report.mean_cum_true[t] - prev_true).to_string(),
                report.mean_cum_obs[t].to_string(),
                report.mean_cum_true[t].to_string(),
            ])?;
        }
        summaries.push((seed, report));
    }
    w.flush()?;
    let summary_json: Vec<serde_json::Value> = summaries
        .iter()
        .map(|(seed, report)| {
            serde_json::json!({
                "seed": seed,
                "report": report,
            })
        })
        .collect();
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary_json)? + "\n")?;
    Ok(vec![csv_path, json_path])
}

fn run_refinement_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    use rayon::prelude::*;
    let params = config.refinement.as_ref().expect("validated");
    let cfg = LoopConfig {
        rounds: params.rounds,
        factorization: params.factorization,
        compression: params.compression,
        feedback_mode: params.feedback_mode,
        suite_size: params.suite_size,
        corruption: params.corruption,
        prior_confidence: params.prior_confidence,
    };
    let runs: Vec<(u64, refine::RefinementRun)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = substream(seed, &[0x6e2]);
            let alg = sample_algorithm(
                params.domain_size,
                params.alphabet_size,
                params.ambiguity_level,
                &mut rng,
            )?;
            let desc =
                sample_description(&alg, params.alphabet_size, params.reveal_examples, &mut rng);
            Ok((seed, refine::run_refinement(&alg, &desc, &cfg, seed)?))
        })
        .collect::<Result<_>>()?;

    let mode = serde_variant_name(&params.feedback_mode)?;
    let factorization = serde_variant_name(&params.factorization)?;
    let compression = serde_variant_name(&params.compression)?;
    let path = out_dir.join("refinement.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "seed",
        "round",
        "oracle_rate",
        "self_rate",
        "mode",
        "factorization",
        "compression",
    ])?;
    for (seed, run) in runs {
        for p in &run.trajectory {
            w.write_record([
                seed.to_string(),
                p.round.to_string(),
                p.oracle_rate.to_string(),
                p.self_rate.to_string(),
                mode.clone(),
                factorization.clone(),
                compression.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(vec![path])
}

/// The snake_case name a unit enum serializes to.
fn serde_variant_name<T: Serialize>(value: &T) -> Result<String> {
    match serde_json::to_value(value)? {
        serde_json::Value::String(s) => Ok(s),
        other => Err(Error::InvalidConfig(format!("expected enum variant, got {other}"))),
    }
}

fn run_verify(config: &ExperimentConfig, out_dir: &Path) -> Result<(Vec<PathBuf>, usize)> {
    let filter = config.verify.as_ref().and_then(|v| v.filter.as_deref());
    let outcomes = verify::run_checks(filter)?;
    let path = out_dir.join("verify.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["check", "passed", "elapsed_ms", "details"])?;
    let mut failed = 0;
    for o in &outcomes {
        if !o.passed {
            failed += 1;
        }
        w.write_record([
            o.name.to_string(),
            (o.passed as u8).to_string(),
            o.elapsed_ms.to_string(),
            o.details.clone(),
        ])?;
    }
    w.flush()?;
    Ok((vec![path], failed))
}

/// Executes a config into `out_dir` (falling back to the config's own
/// `out_dir`), writing the experiment CSVs and a manifest.
pub fn run(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    config.validate()?;
    let out_dir: PathBuf = match out_dir.or(config.out_dir.as_deref()) {
        Some(d) => d.to_path_buf(),
        None => {
            return Err(Error::InvalidConfig(
                "out_dir: required (config field or --out flag)".into(),
            ))
        }
    };
    std::fs::create_dir_all(&out_dir)?;
    let started = Instant::now();
    let (outputs, checks_failed) = with_pool(config.parallel, || match config.kind {
        ExperimentKind::Selection => Ok((run_selection(config, &out_dir)?, 0)),
        ExperimentKind::Bandit => Ok((run_bandit(config, &out_dir)?, 0)),
        ExperimentKind::Refinement => Ok((run_refinement_experiment(config, &out_dir)?, 0)),
        ExperimentKind::Verify => run_verify(config, &out_dir),
    })?;
    let manifest = RunManifest {
        config_hash: config_hash(config)?,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: outputs.clone(),
        wall_clock_ms: started.elapsed().as_millis(),
    };
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(RunOutcome { manifest, checks_failed })
}

/// Samples one environment snapshot (algorithm, description, program and
/// suite batch) from a selection config's first seed.
pub fn write_snapshot(config: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    config.validate()?;
    let params = config
        .selection
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("gen-env needs a selection config".into()))?;
    let seed = *config
        .seeds
        .first()
        .ok_or_else(|| Error::InvalidConfig("seeds: must be nonempty".into()))?;
    let e = Environment::binary();
    let mut rng = substream(seed, &[0x9e0]);
    let alg = sample_algorithm(params.domain_size, e.alphabet_size, params.ambiguity_level, &mut rng)?;
    let desc = sample_description(&alg, e.alphabet_size, false, &mut rng);
    let codes = sample_program_batch(&desc, params.fidelity, params.n, &mut rng)?;
    let suites =
        sample_test_suite_batch(&desc, params.suite_size, params.corruption, params.m, &e, &mut rng)?;
    std::fs::create_dir_all(out_dir)?;
    let snapshot = Snapshot::new(e, alg, desc, codes, suites);
    let path = out_dir.join("snapshot.json");
    snapshot.save(&path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn selection_config(out: Option<PathBuf>) -> ExperimentConfig {
        ExperimentConfig {
            kind: ExperimentKind::Selection,
            seeds: vec![1, 2],
            parallel: Some(2),
            out_dir: out,
            selection: Some(SelectionParams {
                tasks: 4,
                n: 5,
                m: 5,
                domain_size: 5,
                ambiguity_level: 0.0,
                fidelity: 0.8,
                suite_size: 3,
                corruption: 0.1,
                heuristics: vec![
                    Heuristic::Random,
                    Heuristic::MaxPassSoft,
                    Heuristic::CodeTSoft,
                ],
            }),
            bandit: None,
            refinement: None,
            verify: None,
        }
    }

    #[test]
    fn config_rejects_unknown_fields_and_bad_counts() {
        let err = ExperimentConfig::from_json_str(
            r#"{"kind": "selection", "seeds": [1], "bogus": 3}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");

        let err = ExperimentConfig::from_json_str(
            r#"{"kind": "selection", "seeds": []}"#,
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("seeds"), "{text}");
        assert!(text.contains("selection"), "{text}");
    }

    #[test]
    fn config_hash_is_stable_under_field_reordering() {
        let a = ExperimentConfig::from_json_str(
            r#"{"kind": "verify", "seeds": [3], "verify": {"filter": "snr"}}"#,
        )
        .unwrap();
        let b = ExperimentConfig::from_json_str(
            r#"{"seeds": [3], "verify": {"filter": "snr"}, "kind": "verify"}"#,
        )
        .unwrap();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());

        let c = ExperimentConfig::from_json_str(
            r#"{"seeds": [4], "verify": {"filter": "snr"}, "kind": "verify"}"#,
        )
        .unwrap();
        assert_ne!(config_hash(&a).unwrap(), config_hash(&c).unwrap());
    }

    #[test]
    fn selection_run_schema_and_reproducibility() {
        let dir = tempfile::tempdir().unwrap();
        let config = selection_config(None);
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        let outcome_a = run(&config, Some(&out_a)).unwrap();
        run(&config, Some(&out_b)).unwrap();
        assert_eq!(outcome_a.checks_failed, 0);

        let csv_a = std::fs::read(out_a.join("selection.csv")).unwrap();
        let csv_b = std::fs::read(out_b.join("selection.csv")).unwrap();
        assert_eq!(csv_a, csv_b, "reruns must be byte-identical");

        let text = String::from_utf8(csv_a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "seed,task,heuristic,pass_at_1");
        // 2 seeds x 4 tasks x 3 heuristics data rows.
        assert_eq!(text.lines().count(), 1 + 2 * 4 * 3);
        assert!(text.contains("MaxPassSoft"));

        let manifest: RunManifest = serde_json::from_str(
            &std::fs::read_to_string(out_a.join("manifest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(manifest.config_hash, config_hash(&config).unwrap());
        assert_eq!(manifest.outputs.len(), 1);
    }

    #[test]
    fn refinement_run_schema() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            kind: ExperimentKind::Refinement,
            seeds: vec![9, 10, 11],
            parallel: None,
            out_dir: Some(dir.path().to_path_buf()),
            selection: None,
            bandit: None,
            refinement: Some(RefinementParams {
                domain_size: 6,
                alphabet_size: 2,
                ambiguity_level: 0.34,
                reveal_examples: false,
                rounds: 3,
                factorization: Factorization::Independent,
                compression: Compression::FullHistory,
                feedback_mode: FeedbackMode::SelfTest,
                suite_size: 3,
                corruption: 0.1,
                prior_confidence: 0.8,
            }),
            verify: None,
        };
        run(&config, None).unwrap();
        let text = std::fs::read_to_string(dir.path().join("refinement.csv")).unwrap();
        assert!(text
            .starts_with("seed,round,oracle_rate,self_rate,mode,factorization,compression\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 3);
        assert!(text.contains("self_test,independent,full_history"));
    }

    #[test]
    fn snapshot_generation() {
        let dir = tempfile::tempdir().unwrap();
        let config = selection_config(None);
        let path = write_snapshot(&config, dir.path()).unwrap();
        let snapshot = Snapshot::load(&path).unwrap();
        assert_eq!(snapshot.codes.len(), 5);
        assert_eq!(snapshot.suites.len(), 5);
    }

    #[test]
    fn missing_out_dir_is_a_config_error() {
        let config = selection_config(None);
        assert!(matches!(run(&config, None), Err(Error::InvalidConfig(_))));
    }
}
