//! The synthetic world: latent algorithms, lossy descriptions, program and
//! test-suite samplers, and the execution harness.
//!
//! Programs are total input/output tables over a finite domain and test
//! suites are explicit case lists, so every quantity downstream (similarity,
//! neighborhood mass, pass probabilities) can be computed by enumeration.
//! A latent [`AlgorithmSpec`] fixes the intended behavior; a [`Description`]
//! reveals it only on the non-ambiguous part of the domain. Samplers stand in
//! for a generator's distributions over implementations and suites, with
//! `fidelity` and `corruption` knobs controlling how faithfully they follow
//! the description.
//!
//! Rewards are stored as exact pass-count fractions ([`PassRate`]) so that
//! "passes the whole suite" is an integer comparison, never a float
//! tolerance question.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output mode of the test harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Each case yields a pass/fail bit by comparing against an expected
    /// output.
    Binary,
    /// Each case yields the program's raw output symbol; cases carry no
    /// expected output.
    Generalized,
}

/// Execution context: output vocabulary size, harness mode, and optional
/// per-execution output noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    /// Number of distinct output symbols.
    pub alphabet_size: usize,
    pub mode: Mode,
    /// Probability that a single execution output is perturbed.
    pub eval_noise: f64,
}

impl Environment {
    /// Deterministic binary environment (two output symbols).
    pub fn binary() -> Self {
        Environment { alphabet_size: 2, mode: Mode::Binary, eval_noise: 0.0 }
    }

    /// Deterministic generalized environment over `alphabet_size` symbols.
    pub fn generalized(alphabet_size: usize) -> Result<Self> {
        let e = Environment { alphabet_size, mode: Mode::Generalized, eval_noise: 0.0 };
        e.validate()?;
        Ok(e)
    }

    pub fn with_eval_noise(mut self, eval_noise: f64) -> Result<Self> {
        self.eval_noise = eval_noise;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphabet_size == 0 {
            return Err(Error::InvalidConfig("alphabet_size must be positive".into()));
        }
        if self.mode == Mode::Binary && self.alphabet_size != 2 {
            return Err(Error::InvalidConfig(format!(
                "binary mode forces alphabet_size = 2, got {}",
                self.alphabet_size
            )));
        }
        if !(0.0..1.0).contains(&self.eval_noise) {
            return Err(Error::InvalidConfig(format!(
                "eval_noise must lie in [0, 1), got {}",
                self.eval_noise
            )));
        }
        Ok(())
    }

    pub fn is_deterministic(&self) -> bool {
        self.eval_noise == 0.0
    }
}

/// The latent ground-truth behavior: a total input-to-output table plus the
/// set of inputs whose behavior the description leaves open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub domain_size: usize,
    /// Output symbol per input; length equals `domain_size`.
    pub truth: Vec<u32>,
    /// Inputs the description does not pin down.
    pub ambiguous_inputs: BTreeSet<usize>,
}

impl AlgorithmSpec {
    pub fn validate(&self, alphabet_size: usize) -> Result<()> {
        if self.truth.len() != self.domain_size {
            return Err(Error::ShapeMismatch(format!(
                "truth has {} entries for domain_size {}",
                self.truth.len(),
                self.domain_size
            )));
        }
        if let Some(&bad) = self.truth.iter().find(|&&o| o as usize >= alphabet_size) {
            return Err(Error::ShapeMismatch(format!(
                "truth output {bad} exceeds alphabet size {alphabet_size}"
            )));
        }
        if self.ambiguous_inputs.iter().any(|&i| i >= self.domain_size) {
            return Err(Error::ShapeMismatch("ambiguous input outside domain".into()));
        }
        Ok(())
    }
}

/// Lossy rendering of an algorithm: the constraints the description pins
/// down, plus the subset explicitly surfaced as worked examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub domain_size: usize,
    pub alphabet_size: usize,
    /// Pinned input-to-output constraints (exactly the non-ambiguous inputs).
    pub revealed: BTreeMap<usize, u32>,
    /// Constraints surfaced as concrete input/output examples.
    pub example_pairs: Vec<(usize, u32)>,
    /// Fraction of the domain left unconstrained.
    pub ambiguity_level: f64,
}

impl Description {
    pub fn ambiguous_inputs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.domain_size).filter(|i| !self.revealed.contains_key(i))
    }
}

/// Opaque stable identifier of a sampled program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CodeId(pub u64);

impl fmt::Display for CodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// Opaque stable identifier of a sampled test suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SuiteId(pub u64);

impl fmt::Display for SuiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Reserved id for the ground-truth suite of an algorithm.
pub const ORACLE_SUITE_ID: SuiteId = SuiteId(u64::MAX);

/// An implementation rendered as its observable function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorTable {
    /// Output symbol per input; length equals the domain size.
    pub outputs: Vec<u32>,
    pub id: CodeId,
}

impl BehaviorTable {
    pub fn new(outputs: Vec<u32>, id: CodeId) -> Self {
        BehaviorTable { outputs, id }
    }

    /// The table realizing an algorithm's ground truth.
    pub fn from_truth(alg: &AlgorithmSpec, id: CodeId) -> Self {
        BehaviorTable { outputs: alg.truth.clone(), id }
    }

    pub fn domain_size(&self) -> usize {
        self.outputs.len()
    }

    /// Same observable function, ignoring ids.
    pub fn same_behavior(&self, other: &BehaviorTable) -> bool {
        self.outputs == other.outputs
    }
}

/// A single test case. `expected_output` is absent in generalized mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: usize,
    pub expected_output: Option<u32>,
}

/// An executable specification: a nonempty list of cases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSuite {
    pub cases: Vec<TestCase>,
    pub id: SuiteId,
}

impl TestSuite {
    pub fn new(cases: Vec<TestCase>, id: SuiteId) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::InvalidInput("test suite must have at least one case".into()));
        }
        Ok(TestSuite { cases, id })
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }
}

/// Exact pass fraction: an integer pass count over the suite size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassRate {
    pub passed: usize,
    pub total: usize,
}

impl PassRate {
    pub fn new(passed: usize, total: usize) -> Self {
        debug_assert!(passed <= total && total > 0);
        PassRate { passed, total }
    }

    /// Float view; a single division, so `as_f64() == 1.0` iff all passed.
    pub fn as_f64(&self) -> f64 {
        self.passed as f64 / self.total as f64
    }

    pub fn is_full(&self) -> bool {
        self.passed == self.total
    }

    pub fn is_zero(&self) -> bool {
        self.passed == 0
    }
}

/// One executed case inside a [`Report`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub input: usize,
    pub expected: u32,
    pub got: u32,
    pub passed: bool,
}

/// Structured execution feedback: per-case records plus the exact pass rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub per_case: Vec<CaseRecord>,
    pub pass_rate: PassRate,
}

/// Default share of suite cases drawn from the ambiguous part of the domain.
pub const AMBIENT_AMBIGUOUS_FRACTION: f64 = 0.1;

/// Draws a latent algorithm: uniform truth table with an exact
/// `floor(ambiguity_level * domain_size)` ambiguous inputs.
pub fn sample_algorithm<R: Rng>(
    domain_size: usize,
    alphabet_size: usize,
    ambiguity_level: f64,
    rng: &mut R,
) -> Result<AlgorithmSpec> {
    if domain_size == 0 {
        return Err(Error::InvalidConfig("domain_size must be positive".into()));
    }
    if alphabet_size == 0 {
        return Err(Error::InvalidConfig("alphabet_size must be positive".into()));
    }
    if !(0.0..1.0).contains(&ambiguity_level) {
        return Err(Error::InvalidConfig(format!(
            "ambiguity_level must lie in [0, 1), got {ambiguity_level}"
        )));
    }
    let truth: Vec<u32> = (0..domain_size)
        .map(|_| rng.random_range(0..alphabet_size) as u32)
        .collect();
    let ambiguous_count = (ambiguity_level * domain_size as f64).floor() as usize;
    let mut inputs: Vec<usize> = (0..domain_size).collect();
    inputs.shuffle(rng);
    let ambiguous_inputs: BTreeSet<usize> = inputs.into_iter().take(ambiguous_count).collect();
    Ok(AlgorithmSpec { domain_size, truth, ambiguous_inputs })
}

/// Renders an algorithm into a description revealing exactly the
/// non-ambiguous inputs. With `reveal_examples`, every revealed constraint is
/// surfaced as a concrete example pair.
pub fn sample_description<R: Rng>(
    alg: &AlgorithmSpec,
    alphabet_size: usize,
    reveal_examples: bool,
    _rng: &mut R,
) -> Description {
    let revealed: BTreeMap<usize, u32> = (0..alg.domain_size)
        .filter(|i| !alg.ambiguous_inputs.contains(i))
        .map(|i| (i, alg.truth[i]))
        .collect();
    let example_pairs = if reveal_examples {
        revealed.iter().map(|(&i, &o)| (i, o)).collect()
    } else {
        Vec::new()
    };
    let ambiguity_level = 1.0 - revealed.len() as f64 / alg.domain_size as f64;
    Description {
        domain_size: alg.domain_size,
        alphabet_size,
        revealed,
        example_pairs,
        ambiguity_level,
    }
}

fn uniform_other_symbol<R: Rng>(current: u32, alphabet_size: usize, rng: &mut R) -> u32 {
    // Uniform over the alphabet minus `current`; with a binary alphabet this
    // is the complement.
    let draw = rng.random_range(0..alphabet_size - 1) as u32;
    if draw >= current {
        draw + 1
    } else {
        draw
    }
}

/// Draws an implementation. On each revealed input the output matches the
/// description with probability `fidelity` (otherwise uniform over the wrong
/// symbols); unrevealed inputs are uniform over the whole alphabet.
pub fn sample_program<R: Rng>(
    desc: &Description,
    fidelity: f64,
    rng: &mut R,
) -> Result<BehaviorTable> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::InvalidInput(format!("fidelity must lie in [0, 1], got {fidelity}")));
    }
    let alphabet = desc.alphabet_size;
    let outputs = (0..desc.domain_size)
        .map(|i| match desc.revealed.get(&i) {
            Some(&want) => {
                if alphabet == 1 || rng.random::<f64>() < fidelity {
                    want
                } else {
                    uniform_other_symbol(want, alphabet, rng)
                }
            }
            None => rng.random_range(0..alphabet) as u32,
        })
        .collect();
    Ok(BehaviorTable::new(outputs, CodeId(0)))
}

/// Batch of programs with sequential ids `0..n`.
pub fn sample_program_batch<R: Rng>(
    desc: &Description,
    fidelity: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<BehaviorTable>> {
    (0..n)
        .map(|i| {
            let mut table = sample_program(desc, fidelity, rng)?;
            table.id = CodeId(i as u64);
            Ok(table)
        })
        .collect()
}

/// Draws a test suite against a description. Case inputs come from the
/// revealed part of the domain except for an `ambient` share drawn from the
/// ambiguous part; expected outputs follow the description with probability
/// `1 - corruption` (ambiguous inputs get uniform expectations).
pub fn sample_test_suite_with<R: Rng>(
    desc: &Description,
    size: usize,
    corruption: f64,
    ambient: f64,
    e: &Environment,
    rng: &mut R,
) -> Result<TestSuite> {
    if size == 0 {
        return Err(Error::InvalidInput("suite size must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&corruption) {
        return Err(Error::InvalidInput(format!("corruption must lie in [0, 1], got {corruption}")));
    }
    let revealed: Vec<usize> = desc.revealed.keys().copied().collect();
    let ambiguous: Vec<usize> = desc.ambiguous_inputs().collect();
    let alphabet = desc.alphabet_size;
    let mut cases = Vec::with_capacity(size);
    for _ in 0..size {
        let from_ambiguous = !ambiguous.is_empty()
            && (revealed.is_empty() || rng.random::<f64>() < ambient);
        let input = if from_ambiguous {
            *ambiguous.choose(rng).expect("nonempty ambiguous pool")
        } else {
            *revealed.choose(rng).expect("nonempty revealed pool")
        };
        let expected_output = match e.mode {
            Mode::Generalized => None,
            Mode::Binary => Some(match desc.revealed.get(&input) {
                Some(&want) => {
                    if alphabet > 1 && rng.random::<f64>() < corruption {
                        uniform_other_symbol(want, alphabet, rng)
                    } else {
                        want
                    }
                }
                None => rng.random_range(0..alphabet) as u32,
            }),
        };
        cases.push(TestCase { input, expected_output });
    }
    TestSuite::new(cases, SuiteId(0))
}

/// [`sample_test_suite_with`] using the default ambient fraction.
pub fn sample_test_suite<R: Rng>(
    desc: &Description,
    size: usize,
    corruption: f64,
    e: &Environment,
    rng: &mut R,
) -> Result<TestSuite> {
    sample_test_suite_with(desc, size, corruption, AMBIENT_AMBIGUOUS_FRACTION, e, rng)
}

/// Batch of suites with sequential ids `0..m`.
pub fn sample_test_suite_batch<R: Rng>(
    desc: &Description,
    size: usize,
    corruption: f64,
    m: usize,
    e: &Environment,
    rng: &mut R,
) -> Result<Vec<TestSuite>> {
    (0..m)
        .map(|j| {
            let mut suite = sample_test_suite(desc, size, corruption, e, rng)?;
            suite.id = SuiteId(j as u64);
            Ok(suite)
        })
        .collect()
}

fn check_shapes(c: &BehaviorTable, t: &TestSuite, e: &Environment) -> Result<()> {
    for case in &t.cases {
        if case.input >= c.outputs.len() {
            return Err(Error::ShapeMismatch(format!(
                "case input {} outside table domain of size {}",
                case.input,
                c.outputs.len()
            )));
        }
        if e.mode == Mode::Binary && case.expected_output.is_none() {
            return Err(Error::ShapeMismatch("binary mode requires expected outputs".into()));
        }
    }
    if let Some(&bad) = c.outputs.iter().find(|&&o| o as usize >= e.alphabet_size) {
        return Err(Error::ShapeMismatch(format!(
            "table output {bad} exceeds alphabet size {}",
            e.alphabet_size
        )));
    }
    Ok(())
}

/// Runs `c` against `t`: per-case pass/fail bits in binary mode, raw output
/// symbols in generalized mode. Deterministic environments only; use
/// [`execute_noisy`] when `eval_noise > 0`.
pub fn execute(c: &BehaviorTable, t: &TestSuite, e: &Environment) -> Result<Vec<u32>> {
    if !e.is_deterministic() {
        return Err(Error::UnsupportedMode(
            "environment has eval_noise > 0; use execute_noisy".into(),
        ));
    }
    check_shapes(c, t, e)?;
    Ok(t.cases
        .iter()
        .map(|case| {
            let got = c.outputs[case.input];
            match e.mode {
                Mode::Binary => (got == case.expected_output.unwrap()) as u32,
                Mode::Generalized => got,
            }
        })
        .collect())
}

/// As [`execute`], with each output independently perturbed with probability
/// `eval_noise` (bit flip in binary mode, uniform other symbol otherwise).
pub fn execute_noisy<R: Rng>(
    c: &BehaviorTable,
    t: &TestSuite,
    e: &Environment,
    rng: &mut R,
) -> Result<Vec<u32>> {
    check_shapes(c, t, e)?;
    let noiseless = Environment { eval_noise: 0.0, ..*e };
    let mut out = execute(c, t, &noiseless)?;
    for v in &mut out {
        if rng.random::<f64>() < e.eval_noise {
            *v = match e.mode {
                Mode::Binary => 1 - *v,
                Mode::Generalized => uniform_other_symbol(*v, e.alphabet_size, rng),
            };
        }
    }
    Ok(out)
}

/// Scalar reward: the exact fraction of passing cases (binary mode only).
pub fn reward(c: &BehaviorTable, t: &TestSuite, e: &Environment) -> Result<PassRate> {
    if e.mode != Mode::Binary {
        return Err(Error::UnsupportedMode("reward is defined for binary mode only".into()));
    }
    let bits = execute(c, t, e)?;
    let passed = bits.iter().filter(|&&b| b == 1).count();
    Ok(PassRate::new(passed, bits.len()))
}

/// As [`reward`] but retaining per-case (input, expected, got) records.
pub fn report(c: &BehaviorTable, t: &TestSuite, e: &Environment) -> Result<Report> {
    if e.mode != Mode::Binary {
        return Err(Error::UnsupportedMode("report is defined for binary mode only".into()));
    }
    check_shapes(c, t, e)?;
    if !e.is_deterministic() {
        return Err(Error::UnsupportedMode(
            "environment has eval_noise > 0; use execute_noisy".into(),
        ));
    }
    let per_case: Vec<CaseRecord> = t
        .cases
        .iter()
        .map(|case| {
            let got = c.outputs[case.input];
            let expected = case.expected_output.unwrap();
            CaseRecord { input: case.input, expected, got, passed: got == expected }
        })
        .collect();
    let passed = per_case.iter().filter(|r| r.passed).count();
    let pass_rate = PassRate::new(passed, per_case.len());
    Ok(Report { per_case, pass_rate })
}

/// The corruption-free ground-truth suite: one case per input, expecting the
/// algorithm's truth table.
pub fn oracle_suite(alg: &AlgorithmSpec) -> TestSuite {
    let cases = (0..alg.domain_size)
        .map(|i| TestCase { input: i, expected_output: Some(alg.truth[i]) })
        .collect();
    TestSuite { cases, id: ORACLE_SUITE_ID }
}

/// Versioned JSON snapshot of an environment, algorithm, description, and a
/// sampled batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub schema_version: u32,
    pub environment: Environment,
    pub algorithm: AlgorithmSpec,
    pub description: Description,
    pub codes: Vec<BehaviorTable>,
    pub suites: Vec<TestSuite>,
}

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

impl Snapshot {
    pub fn new(
        environment: Environment,
        algorithm: AlgorithmSpec,
        description: Description,
        codes: Vec<BehaviorTable>,
        suites: Vec<TestSuite>,
    ) -> Self {
        Snapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            environment,
            algorithm,
            description,
            codes,
            suites,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SNAPSHOT_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        self.environment.validate()?;
        self.algorithm.validate(self.environment.alphabet_size)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let snapshot: Snapshot = serde_json::from_str(&text)?;
        snapshot.validate()?;
        Ok(snapshot)
    }
}
