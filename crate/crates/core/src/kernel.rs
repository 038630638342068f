//! Functional similarity between programs under a distribution over test
//! suites.
//!
//! The base similarity of two tables is the expected per-case output
//! agreement over a suite distribution: for each suite, the fraction of cases
//! on which both programs produce the same harness output, averaged with the
//! suite weights. Raising it to a sharpness exponent `s` interpolates between
//! the smooth score (`s = 1`) and strict functional equivalence (`s = inf`):
//! agreement on every case of every supported suite.
//!
//! Aggregating similarity against a distribution over programs yields the
//! neighborhood measure of a table: the probability mass of programs weighted
//! by how similar they behave. At `s = inf` this is the mass of the exact
//! behavioral equivalence class; at finite `s` it is a smoothed score whose
//! key property is stability — two highly similar programs receive
//! neighborhood masses within `sqrt(2 * (1 - sim^s))` of each other
//! ([`smoothing_gap`]).
//!
//! Exactness: weighted similarities and neighborhood measures are rational
//! whenever the weights are rational, so the `_rational` variants run on
//! `BigRational` end-to-end and the smoothing inequality is checked as
//! `gap^2 <= 2 * eps` with zero tolerance. The `f64` entry points are
//! boundary conversions of the same quantities.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{execute, BehaviorTable, CodeId, Environment, TestSuite};
use crate::error::{Error, Result};
use crate::exact::{compensated_sum, normalized_weights, ratio_abs_diff, ratio_to_f64};

/// Tolerance for weight vectors summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Default eigenvalue floor accepted as positive semi-definite.
///
/// Double-precision eigensolvers on exactly-PSD inputs drift below zero by
/// O(n * machine epsilon).
pub const DEFAULT_PSD_TOL: f64 = 1e-8;

/// Sharpness exponent for similarity: a positive integer or the strict
/// equivalence limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharpness {
    Finite(u32),
    Infinite,
}

impl Sharpness {
    fn validate(self) -> Result<()> {
        match self {
            Sharpness::Finite(0) => {
                Err(Error::InvalidInput("sharpness must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Sharpness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sharpness::Finite(s) => write!(f, "{s}"),
            Sharpness::Infinite => write!(f, "inf"),
        }
    }
}

/// A finite-support distribution over test suites.
#[derive(Debug, Clone)]
pub struct SuiteDistribution {
    suites: Vec<TestSuite>,
    weights: Vec<BigRational>,
    weights_f64: Vec<f64>,
}

impl SuiteDistribution {
    /// Weights are validated (nonnegative, summing to one within
    /// [`WEIGHT_SUM_TOL`]) and exactly renormalized.
    pub fn new(suites: Vec<TestSuite>, weights: &[f64]) -> Result<Self> {
        if suites.is_empty() {
            return Err(Error::InvalidInput("suite distribution must be nonempty".into()));
        }
        if suites.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} suites but {} weights",
                suites.len(),
                weights.len()
            )));
        }
        let weights = normalized_weights(weights, WEIGHT_SUM_TOL)?;
        let weights_f64 = weights.iter().map(ratio_to_f64).collect();
        Ok(SuiteDistribution { suites, weights, weights_f64 })
    }

    pub fn uniform(suites: Vec<TestSuite>) -> Result<Self> {
        let n = suites.len();
        if n == 0 {
            return Err(Error::InvalidInput("suite distribution must be nonempty".into()));
        }
        let weights = vec![BigRational::new(BigInt::from(1), BigInt::from(n as i64)); n];
        let weights_f64 = weights.iter().map(ratio_to_f64).collect();
        Ok(SuiteDistribution { suites, weights, weights_f64 })
    }

    pub fn suites(&self) -> &[TestSuite] {
        &self.suites
    }

    pub fn weights_f64(&self) -> &[f64] {
        &self.weights_f64
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    /// Suites with strictly positive weight.
    pub fn support(&self) -> impl Iterator<Item = &TestSuite> {
        self.suites
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| !w.is_zero())
            .map(|(t, _)| t)
    }
}

/// A finite-support distribution over behavior tables.
#[derive(Debug, Clone)]
pub struct CodeDistribution {
    codes: Vec<BehaviorTable>,
    weights: Vec<BigRational>,
    weights_f64: Vec<f64>,
}

impl CodeDistribution {
    pub fn new(codes: Vec<BehaviorTable>, weights: &[f64]) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::InvalidInput("code distribution must be nonempty".into()));
        }
        if codes.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} codes but {} weights",
                codes.len(),
                weights.len()
            )));
        }
        let weights = normalized_weights(weights, WEIGHT_SUM_TOL)?;
        let weights_f64 = weights.iter().map(ratio_to_f64).collect();
        Ok(CodeDistribution { codes, weights, weights_f64 })
    }

    pub fn uniform(codes: Vec<BehaviorTable>) -> Result<Self> {
        let n = codes.len();
        if n == 0 {
            return Err(Error::InvalidInput("code distribution must be nonempty".into()));
        }
        let weights = vec![BigRational::new(BigInt::from(1), BigInt::from(n as i64)); n];
        let weights_f64 = weights.iter().map(ratio_to_f64).collect();
        Ok(CodeDistribution { codes, weights, weights_f64 })
    }

    pub fn codes(&self) -> &[BehaviorTable] {
        &self.codes
    }

    pub fn weights_f64(&self) -> &[f64] {
        &self.weights_f64
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }
}

/// Per-suite agreement of two tables: cases with equal harness output over
/// the suite size.
fn agreement_counts(
    c1: &BehaviorTable,
    c2: &BehaviorTable,
    t: &TestSuite,
    e: &Environment,
) -> Result<(usize, usize)> {
    let o1 = execute(c1, t, e)?;
    let o2 = execute(c2, t, e)?;
    let agree = o1.iter().zip(&o2).filter(|(a, b)| a == b).count();
    Ok((agree, o1.len()))
}

fn require_deterministic(e: &Environment) -> Result<()> {
    if !e.is_deterministic() {
        return Err(Error::UnsupportedMode(
            "similarity requires a deterministic environment (eval_noise = 0)".into(),
        ));
    }
    Ok(())
}

/// Exact similarity as a rational.
pub fn similarity_exact_rational(
    c1: &BehaviorTable,
    c2: &BehaviorTable,
    dist: &SuiteDistribution,
    e: &Environment,
) -> Result<BigRational> {
    require_deterministic(e)?;
    let mut total = BigRational::zero();
    for (t, w) in dist.suites.iter().zip(&dist.weights) {
        if w.is_zero() {
            continue;
        }
        let (agree, len) = agreement_counts(c1, c2, t, e)?;
        total += w * BigRational::new(BigInt::from(agree as i64), BigInt::from(len as i64));
    }
    Ok(total)
}

/// Expected per-case agreement of two tables under the suite distribution.
pub fn similarity_exact(
    c1: &BehaviorTable,
    c2: &BehaviorTable,
    dist: &SuiteDistribution,
    e: &Environment,
) -> Result<f64> {
    require_deterministic(e)?;
    let mut terms = Vec::with_capacity(dist.suites.len());
    for (t, &w) in dist.suites.iter().zip(&dist.weights_f64) {
        if w == 0.0 {
            continue;
        }
        let (agree, len) = agreement_counts(c1, c2, t, e)?;
        terms.push(w * (agree as f64 / len as f64));
    }
    Ok(compensated_sum(terms))
}

/// Monte Carlo similarity: the mean per-suite agreement over sampled suites.
pub fn similarity_mc(
    c1: &BehaviorTable,
    c2: &BehaviorTable,
    suites: &[TestSuite],
    e: &Environment,
) -> Result<f64> {
    if suites.is_empty() {
        return Err(Error::InvalidInput("similarity_mc needs at least one suite".into()));
    }
    let mut terms = Vec::with_capacity(suites.len());
    for t in suites {
        let (agree, len) = agreement_counts(c1, c2, t, e)?;
        terms.push(agree as f64 / len as f64);
    }
    Ok(compensated_sum(terms) / suites.len() as f64)
}

/// Applies a sharpness exponent. The infinite variant is an explicit strict
/// indicator, not a large power: it keeps exact ones and sends everything
/// else to zero.
pub fn s_power(sim_value: f64, s: Sharpness) -> f64 {
    match s {
        Sharpness::Finite(k) => sim_value.powi(k as i32),
        Sharpness::Infinite => {
            if sim_value == 1.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn s_power_rational(sim: &BigRational, s: Sharpness) -> BigRational {
    match s {
        Sharpness::Finite(k) => sim.pow(k as i32),
        Sharpness::Infinite => {
            if sim.is_one() {
                BigRational::one()
            } else {
                BigRational::zero()
            }
        }
    }
}

/// Strict functional equivalence: identical outputs on every case of every
/// suite with positive weight.
pub fn equivalence(
    c1: &BehaviorTable,
    c2: &BehaviorTable,
    dist: &SuiteDistribution,
    e: &Environment,
) -> Result<bool> {
    require_deterministic(e)?;
    for t in dist.support() {
        let (agree, len) = agreement_counts(c1, c2, t, e)?;
        if agree != len {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A pairwise sharpened-similarity matrix over a code batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramMatrix {
    pub entries: Vec<Vec<f64>>,
    pub code_ids: Vec<CodeId>,
    pub sharpness: Sharpness,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Row-major CSV with the code ids as header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.code_ids.iter().map(|id| id.to_string()))?;
        for row in &self.entries {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pairwise sharpened similarity over a batch. The upper triangle is computed
/// in parallel and mirrored, so results are independent of scheduling.
pub fn gram(
    codes: &[BehaviorTable],
    dist: &SuiteDistribution,
    s: Sharpness,
    e: &Environment,
) -> Result<GramMatrix> {
    s.validate()?;
    require_deterministic(e)?;
    if codes.is_empty() {
        return Err(Error::InvalidInput("gram needs at least one code".into()));
    }
    let n = codes.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if i == j {
                return Ok(1.0);
            }
            match s {
                Sharpness::Infinite => {
                    Ok(equivalence(&codes[i], &codes[j], dist, e)? as u32 as f64)
                }
                Sharpness::Finite(_) => {
                    Ok(s_power(similarity_exact(&codes[i], &codes[j], dist, e)?, s))
                }
            }
        })
        .collect();
    let mut entries = vec![vec![0.0; n]; n];
    for (&(i, j), value) in pairs.iter().zip(values) {
        let v = value?;
        entries[i][j] = v;
        entries[j][i] = v;
    }
    Ok(GramMatrix {
        entries,
        code_ids: codes.iter().map(|c| c.id).collect(),
        sharpness: s,
    })
}

/// Outcome of a positive semi-definiteness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub verdict: bool,
    pub min_eigenvalue: f64,
}

/// Symmetric-eigenvalue PSD check: verdict holds iff the smallest eigenvalue
/// is at least `-tol`.
pub fn psd_check(entries: &[Vec<f64>], tol: f64) -> Result<PsdReport> {
    let n = entries.len();
    if entries.iter().any(|row| row.len() != n) {
        return Err(Error::ShapeMismatch("psd_check needs a square matrix".into()));
    }
    for (i, row) in entries.iter().enumerate() {
        for j in (i + 1)..n {
            if row[j] != entries[j][i] {
                return Err(Error::InvalidInput(format!(
                    "asymmetric input: entry ({i},{j}) = {} vs ({j},{i}) = {}",
                    row[j], entries[j][i]
                )));
            }
        }
    }
    let m = DMatrix::from_fn(n, n, |i, j| entries[i][j]);
    let eigenvalues = m.symmetric_eigen().eigenvalues;
    let min_eigenvalue = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PsdReport { verdict: min_eigenvalue >= -tol, min_eigenvalue })
}

/// Exact neighborhood measure as a rational.
pub fn neighborhood_measure_exact_rational(
    c: &BehaviorTable,
    codes: &CodeDistribution,
    dist: &SuiteDistribution,
    s: Sharpness,
    e: &Environment,
) -> Result<BigRational> {
    s.validate()?;
    let mut total = BigRational::zero();
    for (other, w) in codes.codes.iter().zip(&codes.weights) {
        if w.is_zero() {
            continue;
        }
        let member = match s {
            Sharpness::Infinite => {
                if equivalence(c, other, dist, e)? {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }
            Sharpness::Finite(_) => {
                s_power_rational(&similarity_exact_rational(c, other, dist, e)?, s)
            }
        };
        total += w * member;
    }
    Ok(total)
}

/// Probability mass of the fuzzy neighborhood of `c`: expected sharpened
/// similarity under the code distribution. At infinite sharpness this is the
/// mass of the behavioral equivalence class containing `c`.
pub fn neighborhood_measure_exact(
    c: &BehaviorTable,
    codes: &CodeDistribution,
    dist: &SuiteDistribution,
    s: Sharpness,
    e: &Environment,
) -> Result<f64> {
    Ok(ratio_to_f64(&neighborhood_measure_exact_rational(c, codes, dist, s, e)?))
}

/// Monte Carlo neighborhood measure over sampled codes and suites. Unbiased
/// at `s = 1`; upward-biased for `s > 1`.
pub fn neighborhood_measure_mc(
    c: &BehaviorTable,
    code_samples: &[BehaviorTable],
    suite_samples: &[TestSuite],
    s: Sharpness,
    e: &Environment,
) -> Result<f64> {
    s.validate()?;
    if code_samples.is_empty() {
        return Err(Error::InvalidInput("neighborhood_measure_mc needs code samples".into()));
    }
    let mut terms = Vec::with_capacity(code_samples.len());
    for other in code_samples {
        terms.push(s_power(similarity_mc(c, other, suite_samples, e)?, s));
    }
    Ok(compensated_sum(terms) / code_samples.len() as f64)
}

/// Result of a measure-smoothing comparison between two tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingGap {
    /// `|measure(c) - measure(c')|`.
    pub gap: f64,
    /// `sqrt(2 * (1 - sim^s(c, c')))`.
    pub bound: f64,
    /// Whether `gap <= bound`, decided in exact arithmetic as
    /// `gap^2 <= 2 * eps`.
    pub holds: bool,
}

/// Measures the neighborhood-mass gap of two tables against the smoothing
/// bound implied by their sharpened similarity.
pub fn smoothing_gap(
    c: &BehaviorTable,
    other: &BehaviorTable,
    s: Sharpness,
    codes: &CodeDistribution,
    dist: &SuiteDistribution,
    e: &Environment,
) -> Result<SmoothingGap> {
    s.validate()?;
    let sim_s = match s {
        Sharpness::Infinite => {
            if equivalence(c, other, dist, e)? {
                BigRational::one()
            } else {
                BigRational::zero()
            }
        }
        Sharpness::Finite(_) => {
            s_power_rational(&similarity_exact_rational(c, other, dist, e)?, s)
        }
    };
    let eps = BigRational::one() - sim_s;
    let m1 = neighborhood_measure_exact_rational(c, codes, dist, s, e)?;
    let m2 = neighborhood_measure_exact_rational(other, codes, dist, s, e)?;
    let gap = ratio_abs_diff(&m1, &m2);
    let two_eps = BigRational::new(BigInt::from(2), BigInt::from(1)) * &eps;
    let holds = &gap * &gap <= two_eps;
    Ok(SmoothingGap {
        gap: ratio_to_f64(&gap),
        bound: (2.0 * ratio_to_f64(&eps)).sqrt(),
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{SuiteId, TestCase};
    use crate::stream::substream;
    use rand::Rng;

    fn table(outputs: &[u32], id: u64) -> BehaviorTable {
        BehaviorTable::new(outputs.to_vec(), CodeId(id))
    }

    fn binary_suite(cases: &[(usize, u32)], id: u64) -> TestSuite {
        TestSuite::new(
            cases
                .iter()
                .map(|&(input, expected)| TestCase { input, expected_output: Some(expected) })
                .collect(),
            SuiteId(id),
        )
        .unwrap()
    }

    #[test]
    fn similarity_is_one_on_self() {
        let e = Environment::binary();
        let c = table(&[0, 1, 1, 0], 0);
        let dist =
            SuiteDistribution::uniform(vec![binary_suite(&[(0, 0), (1, 1), (2, 0), (3, 1)], 0)])
                .unwrap();
        assert_eq!(similarity_exact(&c, &c, &dist, &e).unwrap(), 1.0);
    }

    #[test]
    fn similarity_counts_case_agreement() {
        // Four cases; the tables disagree on input 3 only, so they agree on
        // 3 of 4 comparisons.
        let e = Environment::binary();
        let c1 = table(&[0, 1, 1, 0], 0);
        let c2 = table(&[0, 1, 1, 1], 1);
        let dist =
            SuiteDistribution::uniform(vec![binary_suite(&[(0, 0), (1, 1), (2, 0), (3, 1)], 0)])
                .unwrap();
        assert_eq!(similarity_exact(&c1, &c2, &dist, &e).unwrap(), 0.75);
    }

    #[test]
    fn similarity_mixes_suites_by_weight() {
        // Suite 0: agreement on both cases (1.0). Suite 1: agreement on one
        // of two (0.5). Equal weights give 0.75.
        let e = Environment::binary();
        let c1 = table(&[0, 1, 1, 0], 0);
        let c2 = table(&[0, 1, 0, 1], 1);
        let s0 = binary_suite(&[(0, 0), (1, 1)], 0);
        let s1 = binary_suite(&[(2, 1), (0, 0)], 1);
        let dist = SuiteDistribution::new(vec![s0, s1], &[0.5, 0.5]).unwrap();
        assert_eq!(similarity_exact(&c1, &c2, &dist, &e).unwrap(), 0.75);
        let exact = similarity_exact_rational(&c1, &c2, &dist, &e).unwrap();
        assert_eq!(ratio_to_f64(&exact), 0.75);
    }

    #[test]
    fn similarity_mc_matches_exact_within_ci() {
        let e = Environment::binary();
        let mut rng = substream(3, &[0]);
        let alg = crate::env::sample_algorithm(6, 2, 0.0, &mut rng).unwrap();
        let desc = crate::env::sample_description(&alg, 2, false, &mut rng);
        let c1 = crate::env::sample_program(&desc, 0.7, &mut rng).unwrap();
        let c2 = crate::env::sample_program(&desc, 0.7, &mut rng).unwrap();

        // Enumerable reference distribution: 8 suites, uniform.
        let suites: Vec<TestSuite> = (0..8)
            .map(|j| {
                let mut s =
                    crate::env::sample_test_suite(&desc, 3, 0.2, &e, &mut rng).unwrap();
                s.id = SuiteId(j);
                s
            })
            .collect();
        let dist = SuiteDistribution::uniform(suites.clone()).unwrap();
        let exact = similarity_exact(&c1, &c2, &dist, &e).unwrap();

        // Resample suites i.i.d. from the distribution.
        let m = 10_000;
        let drawn: Vec<TestSuite> = (0..m)
            .map(|_| suites[rng.random_range(0..suites.len())].clone())
            .collect();
        let mc = similarity_mc(&c1, &c2, &drawn, &e).unwrap();
        // Per-suite agreement lies in [0,1]; 3 sigma with sd <= 1/2.
        let ci = 3.0 * 0.5 / (m as f64).sqrt();
        assert!((mc - exact).abs() <= ci, "mc {mc} vs exact {exact}");

        assert_eq!(similarity_mc(&c1, &c1, &drawn[..1], &e).unwrap(), 1.0);
        assert!(matches!(similarity_mc(&c1, &c2, &[], &e), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn disjoint_behavior_has_zero_mc_similarity() {
        let e = Environment::binary();
        let c1 = table(&[0, 0], 0);
        let c2 = table(&[1, 1], 1);
        let suites = vec![binary_suite(&[(0, 0), (1, 1)], 0)];
        assert_eq!(similarity_mc(&c1, &c2, &suites, &e).unwrap(), 0.0);
    }

    #[test]
    fn s_power_variants() {
        assert_eq!(s_power(0.75, Sharpness::Finite(2)), 0.5625);
        assert_eq!(s_power(1.0, Sharpness::Infinite), 1.0);
        assert_eq!(s_power(0.999, Sharpness::Infinite), 0.0);
    }

    #[test]
    fn equivalence_respects_support() {
        let e = Environment::binary();
        let c1 = table(&[0, 1, 0], 0);
        let c2 = table(&[0, 1, 1], 1);
        let touching = SuiteDistribution::uniform(vec![binary_suite(&[(2, 1)], 0)]).unwrap();
        assert!(!equivalence(&c1, &c2, &touching, &e).unwrap());
        assert!(equivalence(&c1, &c1, &touching, &e).unwrap());

        // Input 2 is never touched by a supported suite: zero-weight suites
        // do not count.
        let avoiding = SuiteDistribution::new(
            vec![binary_suite(&[(0, 0), (1, 1)], 0), binary_suite(&[(2, 1)], 1)],
            &[1.0, 0.0],
        )
        .unwrap();
        assert!(equivalence(&c1, &c2, &avoiding, &e).unwrap());
    }

    #[test]
    fn gram_small_cases() {
        let e = Environment::binary();
        let dist = SuiteDistribution::uniform(vec![binary_suite(&[(0, 0), (1, 1)], 0)]).unwrap();
        let single = gram(&[table(&[0, 1], 0)], &dist, Sharpness::Finite(1), &e).unwrap();
        assert_eq!(single.entries, [[1.0]]);

        let dup = gram(
            &[table(&[0, 1], 0), table(&[0, 1], 1)],
            &dist,
            Sharpness::Finite(2),
            &e,
        )
        .unwrap();
        assert_eq!(dup.entries, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn gram_random_batch_is_psd() {
        let e = Environment::binary();
        let mut rng = substream(5, &[1]);
        let alg = crate::env::sample_algorithm(8, 2, 0.25, &mut rng).unwrap();
        let desc = crate::env::sample_description(&alg, 2, false, &mut rng);
        let codes = crate::env::sample_program_batch(&desc, 0.7, 8, &mut rng).unwrap();
        let suites =
            crate::env::sample_test_suite_batch(&desc, 3, 0.1, 4, &e, &mut rng).unwrap();
        let dist = SuiteDistribution::uniform(suites).unwrap();
        for s in [Sharpness::Finite(1), Sharpness::Finite(3), Sharpness::Infinite] {
            let g = gram(&codes, &dist, s, &e).unwrap();
            let psd = psd_check(&g.entries, DEFAULT_PSD_TOL).unwrap();
            assert!(psd.verdict, "sharpness {s}: min eigenvalue {}", psd.min_eigenvalue);
        }
    }

    #[test]
    fn psd_check_known_matrices() {
        let identity = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = psd_check(&identity, DEFAULT_PSD_TOL).unwrap();
        assert!(r.verdict);
        assert!((r.min_eigenvalue - 1.0).abs() < 1e-12);

        let ones = vec![vec![1.0; 3]; 3];
        let r = psd_check(&ones, DEFAULT_PSD_TOL).unwrap();
        assert!(r.verdict);
        assert!(r.min_eigenvalue.abs() < 1e-12);

        // Eigenvalues 1 +/- 0.9.
        let near = vec![vec![1.0, 0.9], vec![0.9, 1.0]];
        let r = psd_check(&near, DEFAULT_PSD_TOL).unwrap();
        assert!(r.verdict);
        assert!((r.min_eigenvalue - 0.1).abs() < 1e-10);

        let asym = vec![vec![1.0, 0.5], vec![0.4, 1.0]];
        assert!(matches!(psd_check(&asym, DEFAULT_PSD_TOL), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gram_csv_has_ids_as_header() {
        let e = Environment::binary();
        let dist = SuiteDistribution::uniform(vec![binary_suite(&[(0, 0)], 0)]).unwrap();
        let g = gram(&[table(&[0], 3), table(&[1], 7)], &dist, Sharpness::Finite(1), &e).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("c3,c7\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn neighborhood_measure_examples() {
        let e = Environment::binary();
        let dist =
            SuiteDistribution::uniform(vec![binary_suite(&[(0, 0), (1, 1)], 0)]).unwrap();
        let c = table(&[0, 1], 0);

        let point = CodeDistribution::uniform(vec![c.clone()]).unwrap();
        assert_eq!(
            neighborhood_measure_exact(&c, &point, &dist, Sharpness::Finite(1), &e).unwrap(),
            1.0
        );

        // sim(c, other) = 0.5 under the single two-case suite.
        let other = table(&[0, 0], 1);
        let pair = CodeDistribution::uniform(vec![c.clone(), other.clone()]).unwrap();
        assert_eq!(
            neighborhood_measure_exact(&c, &pair, &dist, Sharpness::Finite(1), &e).unwrap(),
            0.75
        );

        // Infinite sharpness recovers the equivalence-class mass.
        let triple =
            CodeDistribution::uniform(vec![c.clone(), table(&[0, 1], 2), other]).unwrap();
        let mass =
            neighborhood_measure_exact(&c, &triple, &dist, Sharpness::Infinite, &e).unwrap();
        assert!((mass - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn neighborhood_measure_mc_point_sample() {
        let e = Environment::binary();
        let c = table(&[0, 1], 0);
        let suites = vec![binary_suite(&[(0, 0), (1, 1)], 0)];
        assert_eq!(
            neighborhood_measure_mc(&c, std::slice::from_ref(&c), &suites, Sharpness::Finite(1), &e)
                .unwrap(),
            1.0
        );
    }

    #[test]
    fn neighborhood_measure_mc_converges_and_jensen_biases_upward() {
        let e = Environment::binary();
        let mut rng = substream(17, &[2]);
        let alg = crate::env::sample_algorithm(6, 2, 0.0, &mut rng).unwrap();
        let desc = crate::env::sample_description(&alg, 2, false, &mut rng);
        let c = crate::env::sample_program(&desc, 0.8, &mut rng).unwrap();

        let pool: Vec<BehaviorTable> = (0..6)
            .map(|i| {
                let mut t = crate::env::sample_program(&desc, 0.6, &mut rng).unwrap();
                t.id = CodeId(i);
                t
            })
            .collect();
        let suite_pool: Vec<TestSuite> = (0..6)
            .map(|j| {
                let mut s = crate::env::sample_test_suite(&desc, 3, 0.1, &e, &mut rng).unwrap();
                s.id = SuiteId(j);
                s
            })
            .collect();
        let codes = CodeDistribution::uniform(pool.clone()).unwrap();
        let dist = SuiteDistribution::uniform(suite_pool.clone()).unwrap();

        // s = 1 estimator is unbiased: large n, m lands within a generous CI.
        let exact =
            neighborhood_measure_exact(&c, &codes, &dist, Sharpness::Finite(1), &e).unwrap();
        let n = 4000;
        let m = 64;
        let code_samples: Vec<BehaviorTable> =
            (0..n).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect();
        let suite_samples: Vec<TestSuite> =
            (0..m).map(|_| suite_pool[rng.random_range(0..suite_pool.len())].clone()).collect();
        let mc =
            neighborhood_measure_mc(&c, &code_samples, &suite_samples, Sharpness::Finite(1), &e)
                .unwrap();
        assert!((mc - exact).abs() < 0.03, "mc {mc} vs exact {exact}");

        // s = 2: empirical mean must not undershoot the exact squared measure
        // beyond CI slack.
        let exact2 =
            neighborhood_measure_exact(&c, &codes, &dist, Sharpness::Finite(2), &e).unwrap();
        let mc2 =
            neighborhood_measure_mc(&c, &code_samples, &suite_samples, Sharpness::Finite(2), &e)
                .unwrap();
        assert!(mc2 >= exact2 - 0.03, "mc2 {mc2} vs exact2 {exact2}");
    }

    #[test]
    fn smoothing_gap_examples() {
        let e = Environment::binary();
        let mut rng = substream(19, &[3]);
        let alg = crate::env::sample_algorithm(4, 2, 0.0, &mut rng).unwrap();
        let desc = crate::env::sample_description(&alg, 2, false, &mut rng);
        let codes = CodeDistribution::uniform(
            crate::env::sample_program_batch(&desc, 0.5, 6, &mut rng).unwrap(),
        )
        .unwrap();
        let dist = SuiteDistribution::uniform(
            crate::env::sample_test_suite_batch(&desc, 3, 0.2, 4, &e, &mut rng).unwrap(),
        )
        .unwrap();

        let c = codes.codes()[0].clone();
        let same = smoothing_gap(&c, &c, Sharpness::Finite(2), &codes, &dist, &e).unwrap();
        assert_eq!(same.gap, 0.0);
        assert!(same.holds);

        // A 50-case suite with a single disagreement gives sim = 49/50, so
        // eps = 0.02 and the bound is sqrt(0.04) = 0.2.
        let big_a = table(&[0; 50], 100);
        let mut outputs = vec![0; 50];
        outputs[0] = 1;
        let big_b = BehaviorTable::new(outputs, CodeId(101));
        let cases: Vec<(usize, u32)> = (0..50).map(|i| (i, 0)).collect();
        let wide = SuiteDistribution::uniform(vec![binary_suite(&cases, 50)]).unwrap();
        let pair = CodeDistribution::uniform(vec![big_a.clone(), big_b.clone()]).unwrap();
        let r = smoothing_gap(&big_a, &big_b, Sharpness::Finite(1), &pair, &wide, &e).unwrap();
        assert!((r.bound - 0.2).abs() < 1e-12);
        assert!(r.holds);
    }
}
