//! Iterative code/test refinement driven by an exact-Bayesian proposer.
//!
//! The proposer maintains an independent categorical belief per input over
//! the output alphabet, seeded from the description: inputs surfaced as
//! concrete examples start as point masses, inputs only described in prose
//! start with `prior_confidence` on the described output, and unconstrained
//! inputs start uniform. Each round it draws a truth hypothesis from the
//! belief (a Thompson-style proposal), emits the hypothesis table as code,
//! and emits a test suite whose expected outputs come from the belief, the
//! code, or both, depending on the factorization.
//!
//! Feedback closes the loop. Under oracle feedback the report comes from the
//! ground-truth suite and conditioning is exact; under self feedback the
//! report comes from the proposer's own suite, so expected outputs carry no
//! external information about unconstrained inputs — the belief there
//! reinforces its own draws. That asymmetry is the point: self-test runs
//! plateau at the accuracy the description supports, while oracle runs
//! converge.
//!
//! Determinism discipline: every round draws from substreams keyed by
//! `(seed, round)`, and the number of random draws per round depends only on
//! the domain size, suite size, and factorization — never on belief
//! contents. Runs that share a seed are therefore coupled sample-by-sample,
//! which makes paired comparisons across feedback regimes exact rather than
//! statistical.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    oracle_suite, AlgorithmSpec, BehaviorTable, CaseRecord, CodeId, Description, PassRate,
    Report, SuiteId, TestCase, TestSuite,
};
use crate::error::{Error, Result};
use crate::stream::substream;

/// Mass floor used when an observation has zero probability under the
/// current belief.
const BELIEF_FLOOR: f64 = 1e-12;

/// Source of the per-round report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    /// Reports come from the ground-truth suite.
    OracleTest,
    /// Reports come from the proposer's own suite.
    SelfTest,
}

/// Order in which the code and suite of a proposal are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factorization {
    /// Code and suite drawn independently from the belief.
    Independent,
    /// Code first; suite expectations copy the code's outputs.
    CodeFirst,
    /// Suite first; the code is conditioned to pass it.
    TestFirst,
}

/// How much of each report is kept in the record history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compression {
    /// Keep every case record.
    FullHistory,
    /// Keep per-round digests: failing cases in full, passing inputs by name.
    SummaryConcat,
    /// Keep only a single merged map from input to the latest evidence.
    InsightReformulate,
}

/// Parameters of one refinement run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub rounds: usize,
    pub factorization: Factorization,
    pub compression: Compression,
    pub feedback_mode: FeedbackMode,
    /// Cases per proposed suite.
    pub suite_size: usize,
    /// Probability that a proposed expected output is corrupted away from
    /// the drawn hypothesis.
    pub corruption: f64,
    /// Prior mass on the described output for inputs that are revealed but
    /// not surfaced as examples.
    pub prior_confidence: f64,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        if self.suite_size == 0 {
            return Err(Error::InvalidConfig("suite_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.corruption) {
            return Err(Error::InvalidConfig(format!(
                "corruption must lie in [0, 1], got {}",
                self.corruption
            )));
        }
        if !(self.prior_confidence > 0.0 && self.prior_confidence <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "prior_confidence must lie in (0, 1], got {}",
                self.prior_confidence
            )));
        }
        Ok(())
    }
}

/// Independent per-input posteriors over output symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    /// `factors[input][symbol]` is the posterior mass of that output symbol.
    factors: Vec<Vec<f64>>,
    alphabet: usize,
    /// Corruption rate assumed by the likelihood model for expected-output
    /// evidence (zero under oracle feedback).
    evidence_corruption: f64,
    /// Count of zero-probability observations that needed floor smoothing.
    pub smoothing_events: usize,
}

impl BeliefState {
    /// Prior from a description: point masses on exampled inputs,
    /// `prior_confidence` on described-only inputs, uniform elsewhere.
    pub fn from_description(
        desc: &Description,
        prior_confidence: f64,
        evidence_corruption: f64,
    ) -> Result<Self> {
        if !(prior_confidence > 0.0 && prior_confidence <= 1.0) {
            return Err(Error::InvalidConfig("prior_confidence must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&evidence_corruption) {
            return Err(Error::InvalidConfig("evidence_corruption must lie in [0, 1]".into()));
        }
        let a = desc.alphabet_size;
        if a == 0 {
            return Err(Error::InvalidConfig("alphabet must be nonempty".into()));
        }
        let exampled: BTreeMap<usize, u32> = desc.example_pairs.iter().copied().collect();
        let factors = (0..desc.domain_size)
            .map(|i| {
                if let Some(&o) = exampled.get(&i) {
                    let mut f = vec![0.0; a];
                    f[o as usize] = 1.0;
                    f
                } else if let Some(&o) = desc.revealed.get(&i) {
                    if a == 1 {
                        vec![1.0]
                    } else {
                        let spread = (1.0 - prior_confidence) / (a - 1) as f64;
                        let mut f = vec![spread; a];
                        f[o as usize] = prior_confidence;
                        f
                    }
                } else {
                    vec![1.0 / a as f64; a]
                }
            })
            .collect();
        Ok(BeliefState {
            factors,
            alphabet: a,
            evidence_corruption,
            smoothing_events: 0,
        })
    }

    pub fn domain_size(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    /// Highest-mass symbol per input (ties to the lowest symbol).
    pub fn map_table(&self, id: CodeId) -> BehaviorTable {
        let outputs = self
            .factors
            .iter()
            .map(|f| {
                let mut best = 0usize;
                for (v, &m) in f.iter().enumerate() {
                    if m > f[best] {
                        best = v;
                    }
                }
                best as u32
            })
            .collect();
        BehaviorTable::new(outputs, id)
    }

    /// One Bayes step at a single input. A zero-probability observation
    /// resets the factor to the observation with a mass floor elsewhere.
    pub fn apply_evidence(&mut self, input: usize, observed: u32) {
        let factor = &mut self.factors[input];
        let mut total = 0.0;
        let mut updated = vec![0.0; factor.len()];
        for (v, &mass) in factor.iter().enumerate() {
            let lik = if observed == v as u32 {
                1.0 - self.evidence_corruption
            } else if factor.len() > 1 {
                self.evidence_corruption / (factor.len() - 1) as f64
            } else {
                0.0
            };
            updated[v] = mass * lik;
            total += updated[v];
        }
        if total <= 0.0 {
            // The belief assigned zero mass to an event that happened:
            // restart the factor from the observation.
            for (v, m) in updated.iter_mut().enumerate() {
                *m = if v as u32 == observed { 1.0 } else { BELIEF_FLOOR };
            }
            total = updated.iter().sum();
            self.smoothing_events += 1;
        }
        for m in &mut updated {
            *m /= total;
        }
        *factor = updated;
    }

    /// Inverse-CDF draw from one factor (consumes exactly one uniform).
    fn draw_symbol<R: Rng>(&self, input: usize, rng: &mut R) -> u32 {
        let u = rng.random::<f64>();
        let factor = &self.factors[input];
        let mut acc = 0.0;
        for (v, &m) in factor.iter().enumerate() {
            acc += m;
            if u < acc {
                return v as u32;
            }
        }
        (factor.len() - 1) as u32
    }

    /// Full hypothesis table drawn from the belief (one uniform per input).
    fn draw_table<R: Rng>(&self, id: CodeId, rng: &mut R) -> BehaviorTable {
        let outputs = (0..self.domain_size()).map(|i| self.draw_symbol(i, rng)).collect();
        BehaviorTable::new(outputs, id)
    }
}

/// A report reduced under one compression policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CompressedRecord {
    Full(Vec<CaseRecord>),
    Summary {
        failed: Vec<CaseRecord>,
        passed_inputs: Vec<usize>,
    },
    /// Latest expected-output evidence per input.
    Insight(BTreeMap<usize, u32>),
}

/// One round of proposal plus feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub round: usize,
    pub proposal_code: BehaviorTable,
    pub proposal_suite: TestSuite,
    pub report: Report,
    pub compressed: CompressedRecord,
}

/// Reduces a report under the given policy; derivable from the report alone.
pub fn compress(report: &Report, policy: Compression) -> CompressedRecord {
    match policy {
        Compression::FullHistory => CompressedRecord::Full(report.per_case.clone()),
        Compression::SummaryConcat => CompressedRecord::Summary {
            failed: report.per_case.iter().filter(|r| !r.passed).cloned().collect(),
            passed_inputs: report
                .per_case
                .iter()
                .filter(|r| r.passed)
                .map(|r| r.input)
                .collect(),
        },
        Compression::InsightReformulate => {
            let mut map = BTreeMap::new();
            for r in &report.per_case {
                map.insert(r.input, r.expected);
            }
            CompressedRecord::Insight(map)
        }
    }
}

/// Expected-output evidence recoverable from a record, sorted by input.
/// Passing cases in a summary digest are reconstructed through the proposal
/// code (a passing case means expected equals the code's output there), so
/// full and summary records carry the same evidence.
pub fn evidence_pairs(record: &FeedbackRecord) -> Vec<(usize, u32)> {
    let mut pairs: Vec<(usize, u32)> = match &record.compressed {
        CompressedRecord::Full(cases) => cases.iter().map(|r| (r.input, r.expected)).collect(),
        CompressedRecord::Summary { failed, passed_inputs } => failed
            .iter()
            .map(|r| (r.input, r.expected))
            .chain(
                passed_inputs
                    .iter()
                    .map(|&i| (i, record.proposal_code.outputs[i])),
            )
            .collect(),
        CompressedRecord::Insight(map) => map.iter().map(|(&i, &o)| (i, o)).collect(),
    };
    pairs.sort_by_key(|&(input, _)| input);
    pairs
}

/// Conditions the belief on one feedback record (pure; returns the new
/// state).
pub fn belief_update(belief: &BeliefState, record: &FeedbackRecord) -> BeliefState {
    let mut next = belief.clone();
    for (input, observed) in evidence_pairs(record) {
        next.apply_evidence(input, observed);
    }
    next
}

/// Report of a code against a suite by exact output comparison. The suites
/// built in this loop always carry expected outputs.
fn equality_report(code: &BehaviorTable, suite: &TestSuite) -> Result<Report> {
    let per_case: Vec<CaseRecord> = suite
        .cases
        .iter()
        .map(|case| {
            let expected = case.expected_output.ok_or_else(|| {
                Error::ShapeMismatch("refinement suites must carry expected outputs".into())
            })?;
            let got = *code.outputs.get(case.input).ok_or_else(|| {
                Error::ShapeMismatch(format!("case input {} outside domain", case.input))
            })?;
            Ok(CaseRecord { input: case.input, expected, got, passed: got == expected })
        })
        .collect::<Result<_>>()?;
    let passed = per_case.iter().filter(|r| r.passed).count();
    let pass_rate = PassRate::new(passed, per_case.len());
    Ok(Report { per_case, pass_rate })
}

/// Draws a suite whose expected outputs come from the belief (or from the
/// code under the code-first factorization), with per-case corruption.
/// Repeated inputs within a round reuse the first expectation, so a proposal
/// never contradicts itself.
fn draw_suite<R: Rng>(
    belief: &BeliefState,
    cfg: &LoopConfig,
    code: Option<&BehaviorTable>,
    rng: &mut R,
) -> TestSuite {
    let domain = belief.domain_size();
    let alphabet = belief.alphabet;
    let mut expectations: BTreeMap<usize, u32> = BTreeMap::new();
    let mut cases = Vec::with_capacity(cfg.suite_size);
    for _ in 0..cfg.suite_size {
        let input = rng.random_range(0..domain);
        let expected = match expectations.get(&input) {
            Some(&o) => o,
            None => {
                let hypothesis = match code {
                    Some(c) => c.outputs[input],
                    None => belief.draw_symbol(input, rng),
                };
                // Both corruption draws always happen, so the stream advances
                // identically whether or not the case is corrupted.
                let corrupt = rng.random::<f64>() < cfg.corruption;
                let replacement = if alphabet > 1 {
                    let d = rng.random_range(0..alphabet - 1) as u32;
                    if d >= hypothesis {
                        d + 1
                    } else {
                        d
                    }
                } else {
                    rng.random_range(0..1) as u32
                };
                let o = if corrupt && alphabet > 1 { replacement } else { hypothesis };
                expectations.insert(input, o);
                o
            }
        };
        cases.push(TestCase { input, expected_output: Some(expected) });
    }
    TestSuite { cases, id: SuiteId(0) }
}

/// Draws one (code, suite) proposal from the belief under the configured
/// factorization. Under `TestFirst` the code is overridden on the suite's
/// inputs, so it passes its own suite by construction.
pub fn propose<R: Rng>(
    belief: &BeliefState,
    cfg: &LoopConfig,
    rng: &mut R,
) -> Result<(BehaviorTable, TestSuite)> {
    cfg.validate()?;
    match cfg.factorization {
        Factorization::Independent => {
            let code = belief.draw_table(CodeId(0), rng);
            let suite = draw_suite(belief, cfg, None, rng);
            Ok((code, suite))
        }
        Factorization::CodeFirst => {
            let code = belief.draw_table(CodeId(0), rng);
            let suite = draw_suite(belief, cfg, Some(&code), rng);
            Ok((code, suite))
        }
        Factorization::TestFirst => {
            let suite = draw_suite(belief, cfg, None, rng);
            let mut code = belief.draw_table(CodeId(0), rng);
            for case in &suite.cases {
                code.outputs[case.input] = case.expected_output.expect("suite carries expected");
            }
            Ok((code, suite))
        }
    }
}

/// Per-round pass rates against the ground-truth suite and the proposal's
/// own suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub round: usize,
    pub oracle_rate: f64,
    pub self_rate: f64,
}

/// Outcome of one refinement run.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRun {
    pub trajectory: Vec<TrajectoryPoint>,
    pub final_code: BehaviorTable,
    pub final_belief: BeliefState,
}

impl RefinementRun {
    pub fn final_oracle_rate(&self) -> f64 {
        self.trajectory.last().map_or(0.0, |p| p.oracle_rate)
    }
}

/// Plays `cfg.rounds` rounds of propose/execute/update against the latent
/// algorithm. The oracle pass rate is always logged as the true metric; the
/// belief is conditioned on the oracle report or the self report depending
/// on the feedback mode.
pub fn run_refinement(
    alg: &AlgorithmSpec,
    desc: &Description,
    cfg: &LoopConfig,
    seed: u64,
) -> Result<RefinementRun> {
    cfg.validate()?;
    if desc.domain_size != alg.domain_size {
        return Err(Error::ShapeMismatch("description and algorithm domains differ".into()));
    }
    alg.validate(desc.alphabet_size)?;

    let evidence_corruption = match cfg.feedback_mode {
        FeedbackMode::OracleTest => 0.0,
        FeedbackMode::SelfTest => cfg.corruption,
    };
    let prior = BeliefState::from_description(desc, cfg.prior_confidence, evidence_corruption)?;
    let mut belief = prior.clone();
    let oracle = oracle_suite(alg);
    let mut merged_insights: BTreeMap<usize, u32> = BTreeMap::new();
    let mut trajectory = Vec::with_capacity(cfg.rounds);
    let mut final_code = None;

    for round in 1..=cfg.rounds {
        let mut rng = substream(seed, &[0x8ef1e, round as u64]);
        let (code, suite) = propose(&belief, cfg, &mut rng)?;
        let oracle_report = equality_report(&code, &oracle)?;
        let self_report = equality_report(&code, &suite)?;
        trajectory.push(TrajectoryPoint {
            round,
            oracle_rate: oracle_report.pass_rate.as_f64(),
            self_rate: self_report.pass_rate.as_f64(),
        });

        let active = match cfg.feedback_mode {
            FeedbackMode::OracleTest => oracle_report,
            FeedbackMode::SelfTest => self_report,
        };
        let compressed = compress(&active, cfg.compression);
        let record = FeedbackRecord {
            round,
            proposal_code: code.clone(),
            proposal_suite: suite,
            report: active,
            compressed,
        };
        match cfg.compression {
            Compression::InsightReformulate => {
                // Rebuild from the prior with only the latest evidence per
                // input.
                for (input, observed) in evidence_pairs(&record) {
                    merged_insights.insert(input, observed);
                }
                let mut rebuilt = prior.clone();
                rebuilt.smoothing_events = belief.smoothing_events;
                for (&input, &observed) in &merged_insights {
                    rebuilt.apply_evidence(input, observed);
                }
                belief = rebuilt;
            }
            _ => {
                belief = belief_update(&belief, &record);
            }
        }
        final_code = Some(code);
    }

    Ok(RefinementRun {
        trajectory,
        final_code: final_code.expect("at least one round"),
        final_belief: belief,
    })
}
