//! Execution-based candidate selection over a cached code-by-suite matrix.
//!
//! An [`ExecutionMatrix`] stores the harness output of every sampled program
//! against every sampled suite. All selection heuristics are pure reads over
//! it:
//!
//! - `MBRExecSoft` / `MBRExecHard`: mean pairwise agreement of pass/fail
//!   vectors, respectively the all-suites-identical indicator (binary mode).
//! - `AlphaCode` / `FunCoder`: the same two formulas over raw output vectors
//!   (generalized mode).
//! - `MaxPassSoft` / `MaxPassHard`: mean pass fraction, respectively the
//!   fraction of suites passed completely.
//! - `CodeTSoft` / `CodeTHard`: agreement mass times mean pass fraction.
//! - `Random`: a seeded draw that ignores the matrix, as a control.
//!
//! Ties always break toward the smallest code id so that selections replay
//! identically across runs. Greedy top-k selection over exact class
//! probabilities is verifiably optimal when success events are mutually
//! exclusive; [`greedy_optimality_check`] compares the greedy value against
//! exhaustive subset enumeration in exact arithmetic.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    execute, AlgorithmSpec, BehaviorTable, CodeId, Environment, Mode, PassRate, SuiteId,
    TestSuite,
};
use crate::error::{Error, Result};
use crate::exact::{compensated_sum, normalized_weights, ratio_abs_diff, ratio_to_f64};
use crate::kernel::{CodeDistribution, SuiteDistribution};
use crate::stream::substream;

/// Selection heuristics over an execution matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heuristic {
    Random,
    #[serde(rename = "MBRExecHard")]
    MbrExecHard,
    #[serde(rename = "MBRExecSoft")]
    MbrExecSoft,
    AlphaCode,
    FunCoder,
    MaxPassHard,
    MaxPassSoft,
    CodeTHard,
    CodeTSoft,
}

impl Heuristic {
    pub const ALL: [Heuristic; 9] = [
        Heuristic::Random,
        Heuristic::MbrExecHard,
        Heuristic::MbrExecSoft,
        Heuristic::AlphaCode,
        Heuristic::FunCoder,
        Heuristic::MaxPassHard,
        Heuristic::MaxPassSoft,
        Heuristic::CodeTHard,
        Heuristic::CodeTSoft,
    ];

    /// The harness mode the heuristic's score is defined on. `Random` reads
    /// nothing and works in either mode.
    pub fn required_mode(self) -> Option<Mode> {
        match self {
            Heuristic::Random => None,
            Heuristic::AlphaCode | Heuristic::FunCoder => Some(Mode::Generalized),
            _ => Some(Mode::Binary),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Random => "Random",
            Heuristic::MbrExecHard => "MBRExecHard",
            Heuristic::MbrExecSoft => "MBRExecSoft",
            Heuristic::AlphaCode => "AlphaCode",
            Heuristic::FunCoder => "FunCoder",
            Heuristic::MaxPassHard => "MaxPassHard",
            Heuristic::MaxPassSoft => "MaxPassSoft",
            Heuristic::CodeTHard => "CodeTHard",
            Heuristic::CodeTSoft => "CodeTSoft",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Heuristic::ALL
            .into_iter()
            .find(|h| h.name().to_ascii_lowercase() == lower)
            .ok_or_else(|| {
                let names: Vec<&str> = Heuristic::ALL.iter().map(|h| h.name()).collect();
                Error::InvalidConfig(format!(
                    "unknown heuristic '{s}'; valid names: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Cached harness outputs of `n` codes against `m` suites.
///
/// In binary mode the per-case vectors are pass/fail bits and exact pass
/// rates are cached alongside; in generalized mode they are raw output
/// symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionMatrix {
    mode: Mode,
    code_ids: Vec<CodeId>,
    suite_ids: Vec<SuiteId>,
    /// `outputs[i][j]` is the harness output vector of code `i` on suite `j`.
    outputs: Vec<Vec<Vec<u32>>>,
    /// Pass rates per entry (binary mode only).
    pass: Option<Vec<Vec<PassRate>>>,
}

/// Serialized form of [`ExecutionMatrix`]: ids plus nested arrays.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixCache {
    schema_version: u32,
    mode: Mode,
    code_ids: Vec<CodeId>,
    suite_ids: Vec<SuiteId>,
    outputs: Vec<Vec<Vec<u32>>>,
}

const MATRIX_SCHEMA_VERSION: u32 = 1;

impl ExecutionMatrix {
    /// Executes every code against every suite.
    pub fn from_batch(
        codes: &[BehaviorTable],
        suites: &[TestSuite],
        e: &Environment,
    ) -> Result<Self> {
        if codes.is_empty() || suites.is_empty() {
            return Err(Error::InvalidInput("execution matrix needs codes and suites".into()));
        }
        let outputs: Vec<Vec<Vec<u32>>> = codes
            .iter()
            .map(|c| suites.iter().map(|t| execute(c, t, e)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        Self::from_parts(
            e.mode,
            codes.iter().map(|c| c.id).collect(),
            suites.iter().map(|t| t.id).collect(),
            outputs,
        )
    }

    /// Builds a matrix from raw output vectors; validates completeness.
    pub fn from_parts(
        mode: Mode,
        code_ids: Vec<CodeId>,
        suite_ids: Vec<SuiteId>,
        outputs: Vec<Vec<Vec<u32>>>,
    ) -> Result<Self> {
        let n = code_ids.len();
        let m = suite_ids.len();
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput("execution matrix needs codes and suites".into()));
        }
        if outputs.len() != n || outputs.iter().any(|row| row.len() != m) {
            return Err(Error::ShapeMismatch("outputs must be a complete n x m grid".into()));
        }
        for j in 0..m {
            let len = outputs[0][j].len();
            if len == 0 {
                return Err(Error::ShapeMismatch(format!("suite column {j} has empty vectors")));
            }
            for row in &outputs {
                if row[j].len() != len {
                    return Err(Error::ShapeMismatch(format!(
                        "inconsistent vector lengths in suite column {j}"
                    )));
                }
            }
        }
        let pass = match mode {
            Mode::Binary => {
                for row in &outputs {
                    for v in row {
                        if v.iter().any(|&b| b > 1) {
                            return Err(Error::ShapeMismatch(
                                "binary-mode outputs must be pass/fail bits".into(),
                            ));
                        }
                    }
                }
                Some(
                    outputs
                        .iter()
                        .map(|row| {
                            row.iter()
                                .map(|v| {
                                    PassRate::new(
                                        v.iter().filter(|&&b| b == 1).count(),
                                        v.len(),
                                    )
                                })
                                .collect()
                        })
                        .collect(),
                )
            }
            Mode::Generalized => None,
        };
        Ok(ExecutionMatrix { mode, code_ids, suite_ids, outputs, pass })
    }

    pub fn n(&self) -> usize {
        self.code_ids.len()
    }

    pub fn m(&self) -> usize {
        self.suite_ids.len()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn code_ids(&self) -> &[CodeId] {
        &self.code_ids
    }

    pub fn suite_ids(&self) -> &[SuiteId] {
        &self.suite_ids
    }

    pub fn outputs(&self, i: usize, j: usize) -> &[u32] {
        &self.outputs[i][j]
    }

    /// Exact pass rate of code `i` on suite `j` (binary mode).
    pub fn pass_rate(&self, i: usize, j: usize) -> Result<PassRate> {
        self.pass
            .as_ref()
            .map(|p| p[i][j])
            .ok_or_else(|| Error::UnsupportedMode("pass rates exist in binary mode only".into()))
    }

    /// Mean per-suite output agreement of two rows — the shared similarity
    /// kernel behind the MBR-style scores.
    pub fn agreement(&self, a: usize, b: usize) -> f64 {
        let per_suite: Vec<f64> = (0..self.m())
            .map(|j| {
                let (x, y) = (&self.outputs[a][j], &self.outputs[b][j]);
                let same = x.iter().zip(y).filter(|(u, v)| u == v).count();
                same as f64 / x.len() as f64
            })
            .collect();
        compensated_sum(per_suite) / self.m() as f64
    }

    /// Identical output vectors on every suite.
    pub fn full_agreement(&self, a: usize, b: usize) -> bool {
        self.outputs[a] == self.outputs[b]
    }

    /// Partition of the rows into behavior classes by full agreement. Class
    /// indices are assigned in first-occurrence order.
    pub fn behavior_classes(&self) -> Vec<usize> {
        let mut class_of = Vec::with_capacity(self.n());
        let mut reps: Vec<usize> = Vec::new();
        for i in 0..self.n() {
            match reps.iter().position(|&r| self.full_agreement(r, i)) {
                Some(k) => class_of.push(k),
                None => {
                    reps.push(i);
                    class_of.push(reps.len() - 1);
                }
            }
        }
        class_of
    }

    /// Appends a copy of row `i` under a fresh id (the current maximum plus
    /// one), modeling an aliased resample of the same behavior.
    pub fn duplicate_row(&self, i: usize) -> Result<ExecutionMatrix> {
        if i >= self.n() {
            return Err(Error::InvalidInput(format!("row {i} out of range")));
        }
        let mut code_ids = self.code_ids.clone();
        let next = CodeId(code_ids.iter().map(|c| c.0).max().unwrap_or(0) + 1);
        code_ids.push(next);
        let mut outputs = self.outputs.clone();
        outputs.push(self.outputs[i].clone());
        ExecutionMatrix::from_parts(self.mode, code_ids, self.suite_ids.clone(), outputs)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let cache = MatrixCache {
            schema_version: MATRIX_SCHEMA_VERSION,
            mode: self.mode,
            code_ids: self.code_ids.clone(),
            suite_ids: self.suite_ids.clone(),
            outputs: self.outputs.clone(),
        };
        Ok(serde_json::to_string_pretty(&cache)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cache: MatrixCache = serde_json::from_str(text)?;
        if cache.schema_version != MATRIX_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported matrix schema_version {}",
                cache.schema_version
            )));
        }
        ExecutionMatrix::from_parts(cache.mode, cache.code_ids, cache.suite_ids, cache.outputs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Non-matrix inputs to scoring; currently the seed feeding `Random`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub seed: u64,
}

/// Scores plus the induced full ranking (ties broken by ascending code id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    pub heuristic: Heuristic,
    pub scores: Vec<f64>,
    /// All row indices ordered by (score desc, code id asc).
    pub chosen: Vec<usize>,
}

fn mean_agreement_scores(matrix: &ExecutionMatrix, hard: bool) -> Vec<f64> {
    let n = matrix.n();
    (0..n)
        .map(|i| {
            let terms: Vec<f64> = (0..n)
                .map(|i2| {
                    if hard {
                        matrix.full_agreement(i, i2) as u32 as f64
                    } else {
                        matrix.agreement(i, i2)
                    }
                })
                .collect();
            compensated_sum(terms) / n as f64
        })
        .collect()
}

fn mean_pass_scores(matrix: &ExecutionMatrix, hard: bool) -> Result<Vec<f64>> {
    let n = matrix.n();
    let m = matrix.m();
    (0..n)
        .map(|i| {
            let terms: Result<Vec<f64>> = (0..m)
                .map(|j| {
                    let rate = matrix.pass_rate(i, j)?;
                    Ok(if hard { rate.is_full() as u32 as f64 } else { rate.as_f64() })
                })
                .collect();
            Ok(compensated_sum(terms?) / m as f64)
        })
        .collect()
}

/// Computes scores for one heuristic and the induced full ranking.
pub fn score(
    matrix: &ExecutionMatrix,
    heuristic: Heuristic,
    cfg: &ScoreConfig,
) -> Result<SelectionScore> {
    if let Some(required) = heuristic.required_mode() {
        if matrix.mode() != required {
            return Err(Error::UnsupportedMode(format!(
                "{heuristic} requires {required:?}-mode execution data"
            )));
        }
    }
    let scores = match heuristic {
        Heuristic::Random => {
            let mut rng = substream(cfg.seed, &[0x5e1ec7]);
            (0..matrix.n()).map(|_| rng.random::<f64>()).collect()
        }
        Heuristic::MbrExecSoft | Heuristic::FunCoder => mean_agreement_scores(matrix, false),
        Heuristic::MbrExecHard | Heuristic::AlphaCode => mean_agreement_scores(matrix, true),
        Heuristic::MaxPassSoft => mean_pass_scores(matrix, false)?,
        Heuristic::MaxPassHard => mean_pass_scores(matrix, true)?,
        Heuristic::CodeTSoft | Heuristic::CodeTHard => {
            let hard = heuristic == Heuristic::CodeTHard;
            let mass = mean_agreement_scores(matrix, hard);
            let pass = mean_pass_scores(matrix, false)?;
            mass.into_iter().zip(pass).map(|(a, b)| a * b).collect()
        }
    };
    let chosen = select_top_k(&scores, matrix.code_ids(), matrix.n())?;
    Ok(SelectionScore { heuristic, scores, chosen })
}

/// Scores computed over behavior classes: rows are deduplicated to one
/// representative per class before scoring, so aliased resamples of the same
/// behavior cannot shift the ranking. Returns one score per class, in class
/// order.
pub fn score_class_level(
    matrix: &ExecutionMatrix,
    heuristic: Heuristic,
    cfg: &ScoreConfig,
) -> Result<SelectionScore> {
    let class_of = matrix.behavior_classes();
    let class_count = class_of.iter().max().map_or(0, |&c| c + 1);
    let mut rep_rows = Vec::with_capacity(class_count);
    for class in 0..class_count {
        let rep = class_of.iter().position(|&c| c == class).expect("class has a member");
        rep_rows.push(rep);
    }
    let outputs: Vec<Vec<Vec<u32>>> =
        rep_rows.iter().map(|&r| matrix.outputs[r].clone()).collect();
    let dedup = ExecutionMatrix::from_parts(
        matrix.mode(),
        rep_rows.iter().map(|&r| CodeId(r as u64)).collect(),
        matrix.suite_ids().to_vec(),
        outputs,
    )?;
    score(&dedup, heuristic, cfg)
}

/// Top-k indices by (score desc, code id asc).
pub fn select_top_k(scores: &[f64], code_ids: &[CodeId], k: usize) -> Result<Vec<usize>> {
    let n = scores.len();
    if code_ids.len() != n {
        return Err(Error::ShapeMismatch("scores and code ids differ in length".into()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("k = {k} out of range 1..={n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores must be comparable")
            .then(code_ids[a].cmp(&code_ids[b]))
    });
    order.truncate(k);
    Ok(order)
}

/// Whether any chosen code realizes the algorithm's whole truth table.
pub fn pass_at_k_eval(
    codes: &[BehaviorTable],
    chosen: &[usize],
    alg: &AlgorithmSpec,
    e: &Environment,
) -> Result<bool> {
    for &i in chosen {
        let code = codes
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("chosen index {i} out of range")))?;
        if code.outputs.len() != alg.domain_size {
            return Err(Error::ShapeMismatch("code domain does not match algorithm".into()));
        }
        alg.validate(e.alphabet_size)?;
        if code.outputs == alg.truth {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Result of comparing greedy top-k selection against exhaustive subset
/// enumeration over mutually exclusive class success probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyCheck {
    pub greedy_set: Vec<usize>,
    pub greedy_value: f64,
    pub best_value: f64,
    /// Exact equality of greedy and best subset sums.
    pub optimal: bool,
}

fn combinations_sum(
    probs: &[BigRational],
    k: usize,
    start: usize,
    acc: &BigRational,
    best: &mut BigRational,
) {
    if k == 0 {
        if acc > best {
            *best = acc.clone();
        }
        return;
    }
    for i in start..=probs.len() - k {
        let next = acc + &probs[i];
        combinations_sum(probs, k - 1, i + 1, &next, best);
    }
}

/// Verifies that picking the `k` largest class probabilities attains the
/// exhaustive best subset sum, in exact arithmetic.
pub fn greedy_optimality_check(class_probs: &[f64], k: usize) -> Result<GreedyCheck> {
    let n = class_probs.len();
    if n == 0 || n > 20 {
        return Err(Error::InvalidInput(format!(
            "class count {n} outside the enumerable range 1..=20"
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("k = {k} out of range 1..={n}")));
    }
    let probs = normalized_weights(class_probs, 1e-9)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| probs[b].cmp(&probs[a]).then(a.cmp(&b)));
    let greedy_set: Vec<usize> = order.into_iter().take(k).collect();
    let greedy_value: BigRational = greedy_set.iter().map(|&i| probs[i].clone()).sum();

    let mut best = BigRational::zero();
    combinations_sum(&probs, k, 0, &BigRational::zero(), &mut best);

    Ok(GreedyCheck {
        optimal: greedy_value == best,
        greedy_value: ratio_to_f64(&greedy_value),
        best_value: ratio_to_f64(&best),
        greedy_set,
    })
}

/// Builds a code/suite distribution pair that is calibrated by construction:
/// each code is mirrored by a full-domain suite expecting exactly its
/// behavior, carrying the same weight.
pub fn calibrated_family(
    codes: Vec<BehaviorTable>,
    weights: &[f64],
    e: &Environment,
) -> Result<(CodeDistribution, SuiteDistribution)> {
    if e.mode != Mode::Binary {
        return Err(Error::UnsupportedMode("calibrated families use binary mode".into()));
    }
    let suites: Vec<TestSuite> = codes
        .iter()
        .enumerate()
        .map(|(j, c)| {
            TestSuite::new(
                c.outputs
                    .iter()
                    .enumerate()
                    .map(|(input, &out)| crate::env::TestCase {
                        input,
                        expected_output: Some(out),
                    })
                    .collect(),
                SuiteId(j as u64),
            )
        })
        .collect::<Result<_>>()?;
    Ok((CodeDistribution::new(codes, weights)?, SuiteDistribution::new(suites, weights)?))
}

/// Maximum gap, over the code support, between the equivalence-class mass of
/// a code and the probability that a random suite passes it completely.
/// Computed in exact arithmetic; returns exactly zero for calibrated pairs.
pub fn calibration_check(
    codes: &CodeDistribution,
    dist: &SuiteDistribution,
    e: &Environment,
) -> Result<f64> {
    if e.mode != Mode::Binary {
        return Err(Error::UnsupportedMode("calibration_check uses binary mode".into()));
    }
    let mut max_gap = BigRational::zero();
    for c in codes.codes() {
        let mass = crate::kernel::neighborhood_measure_exact_rational(
            c,
            codes,
            dist,
            crate::kernel::Sharpness::Infinite,
            e,
        )?;
        let mut pass_prob = BigRational::zero();
        for (t, w) in dist.suites().iter().zip(dist.weights()) {
            if w.is_zero() {
                continue;
            }
            let bits = execute(c, t, e)?;
            if bits.iter().all(|&b| b == 1) {
                pass_prob += w;
            }
        }
        let gap = ratio_abs_diff(&mass, &pass_prob);
        if gap > max_gap {
            max_gap = gap;
        }
    }
    Ok(ratio_to_f64(&max_gap))
}
