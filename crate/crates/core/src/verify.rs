//! Named acceptance checks binding every subsystem to an independent oracle.
//!
//! Each check is a self-contained experiment with frozen seeds, sizes, and
//! tolerances, reporting pass/fail plus the measured values. The same checks
//! back the `verify` CLI subcommand and the acceptance test target.

use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::bandit::{self, GpBanditModel, Policy};
use crate::env::{
    sample_algorithm, sample_description, sample_program_batch, sample_test_suite_batch,
    BehaviorTable, Environment,
};
use crate::error::{Error, Result};
use crate::exact::ratio_to_f64;
use crate::harness::{
    self, BanditParams, ExperimentConfig, ExperimentKind, RefinementParams, SelectionParams,
};
use crate::kernel::{
    equivalence, gram, psd_check, similarity_exact_rational, smoothing_gap, s_power,
    CodeDistribution, Sharpness, SuiteDistribution, DEFAULT_PSD_TOL,
};
use crate::refine::{
    run_refinement, Compression, Factorization, FeedbackMode, LoopConfig,
};
use crate::select::{
    calibrated_family, calibration_check, greedy_optimality_check, pass_at_k_eval, score,
    select_top_k, ExecutionMatrix, Heuristic, ScoreConfig,
};
use crate::snr::{snr_empirical, snr_exact, snr_lower_bound, ScoreDistribution};
use crate::stream::{derive_seed, substream, SeedStream};

/// Result of one named check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub elapsed_ms: u128,
    pub limit_ms: u128,
}

type CheckFn = fn() -> Result<(bool, String)>;

const CHECKS: [(&str, u128, CheckFn); 10] = [
    ("kernel-axioms", 60_000, check_kernel_axioms),
    ("measure-smoothing", 60_000, check_measure_smoothing),
    ("snr-dominance", 120_000, check_snr_dominance),
    ("greedy-optimality", 30_000, check_greedy_optimality),
    ("calibration", 30_000, check_calibration),
    ("soft-beats-hard", 300_000, check_soft_beats_hard),
    ("regret-bounds", 300_000, check_regret_bounds),
    ("lemmas", 120_000, check_lemmas),
    ("refinement-regimes", 300_000, check_refinement_regimes),
    ("reproducibility", 300_000, check_reproducibility),
];

/// Names of all checks, in run order.
pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(name, _, _)| *name).collect()
}

/// Runs the checks whose name contains `filter` (all when `None`). An
/// unmatched filter is an error listing the valid names.
pub fn run_checks(filter: Option<&str>) -> Result<Vec<CheckOutcome>> {
    let selected: Vec<&(&str, u128, CheckFn)> = match filter {
        Some(f) => CHECKS.iter().filter(|(name, _, _)| name.contains(f)).collect(),
        None => CHECKS.iter().collect(),
    };
    if selected.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "filter '{}' matches no check; valid names: {}",
            filter.unwrap_or(""),
            check_names().join(", ")
        )));
    }
    let mut outcomes = Vec::with_capacity(selected.len());
    for (name, limit_ms, check) in selected {
        let started = std::time::Instant::now();
        let (mut passed, mut details) = check()?;
        let elapsed_ms = started.elapsed().as_millis();
        if elapsed_ms > *limit_ms {
            passed = false;
            details = format!("{details}; OVER TIME LIMIT {elapsed_ms}ms > {limit_ms}ms");
        }
        outcomes.push(CheckOutcome { name, passed, details, elapsed_ms, limit_ms: *limit_ms });
    }
    Ok(outcomes)
}

// ---------------------------------------------------------------------------
// Randomized instance generators
// ---------------------------------------------------------------------------

struct KernelInstance {
    env: Environment,
    codes: Vec<BehaviorTable>,
    dist: SuiteDistribution,
}

fn random_kernel_instance(
    rng: &mut SeedStream,
    max_codes: usize,
    max_suites: usize,
) -> Result<KernelInstance> {
    let generalized = rng.random::<f64>() < 0.3;
    let env = if generalized {
        Environment::generalized(rng.random_range(3..=5))?
    } else {
        Environment::binary()
    };
    let domain = rng.random_range(3..=8);
    let ambiguity = [0.0, 0.25, 0.4][rng.random_range(0..3)];
    let alg = sample_algorithm(domain, env.alphabet_size, ambiguity, rng)?;
    let desc = sample_description(&alg, env.alphabet_size, false, rng);
    let n = rng.random_range(2..=max_codes);
    let fidelity = 0.4 + 0.6 * rng.random::<f64>();
    let codes = sample_program_batch(&desc, fidelity, n, rng)?;
    let m = rng.random_range(1..=max_suites);
    let suite_size = rng.random_range(1..=6);
    let corruption = 0.3 * rng.random::<f64>();
    let suites = sample_test_suite_batch(&desc, suite_size, corruption, m, &env, rng)?;
    // Dyadic weights on a 1/64 grid, occasionally with zero-weight suites.
    let dist = if rng.random::<f64>() < 0.5 {
        SuiteDistribution::uniform(suites)?
    } else {
        let mut raw: Vec<f64> = (0..m)
            .map(|_| rng.random_range(0..=16) as f64 / 64.0)
            .collect();
        if raw.iter().all(|&w| w == 0.0) {
            raw[0] = 1.0;
        }
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        SuiteDistribution::new(suites, &weights)?
    };
    Ok(KernelInstance { env, codes, dist })
}

// ---------------------------------------------------------------------------
// Criterion 1: kernel axioms and the equivalence limit
// ---------------------------------------------------------------------------

fn check_kernel_axioms() -> Result<(bool, String)> {
    let instances = 1000usize;
    let results: Vec<Result<(f64, usize)>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(0xA1, &[1, i as u64]);
            kernel_axioms_instance(&mut rng, i)
        })
        .collect();
    let mut min_eig = f64::INFINITY;
    let mut limit_pairs = 0usize;
    for r in results {
        let (eig, pairs) = r?;
        min_eig = min_eig.min(eig);
        limit_pairs += pairs;
    }
    let passed = min_eig >= -DEFAULT_PSD_TOL;
    Ok((
        passed,
        format!(
            "{instances} instances: min eigenvalue {min_eig:.3e} >= -1e-8, \
             {limit_pairs} sharpness-limit pairs matched equivalence, \
             partition laws exact"
        ),
    ))
}

fn kernel_axioms_instance(rng: &mut SeedStream, index: usize) -> Result<(f64, usize)> {
    let inst = random_kernel_instance(rng, 32, 8)?;
    let s = [Sharpness::Finite(1), Sharpness::Finite(2), Sharpness::Finite(4), Sharpness::Infinite]
        [rng.random_range(0..4)];
    let g = gram(&inst.codes, &inst.dist, s, &inst.env)?;

    let n = inst.codes.len();
    for i in 0..n {
        if g.entries[i][i] != 1.0 {
            return Err(Error::InvalidInput(format!(
                "instance {index}: diagonal entry {i} is {}",
                g.entries[i][i]
            )));
        }
        for j in 0..n {
            if g.entries[i][j] != g.entries[j][i] {
                return Err(Error::InvalidInput(format!(
                    "instance {index}: asymmetry at ({i},{j})"
                )));
            }
            if !(0.0..=1.0).contains(&g.entries[i][j]) {
                return Err(Error::InvalidInput(format!(
                    "instance {index}: entry ({i},{j}) = {} outside [0,1]",
                    g.entries[i][j]
                )));
            }
        }
    }
    let psd = psd_check(&g.entries, DEFAULT_PSD_TOL)?;
    if !psd.verdict {
        return Err(Error::InvalidInput(format!(
            "instance {index}: min eigenvalue {}",
            psd.min_eigenvalue
        )));
    }

    // Equivalence is an equivalence relation: exhaustive triple check.
    let mut eq = vec![vec![false; n]; n];
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        for j in i..n {
            let e = equivalence(&inst.codes[i], &inst.codes[j], &inst.dist, &inst.env)?;
            eq[i][j] = e;
            eq[j][i] = e;
        }
        if !eq[i][i] {
            return Err(Error::InvalidInput(format!("instance {index}: reflexivity broken")));
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if eq[i][j] && eq[j][k] && !eq[i][k] {
                    return Err(Error::InvalidInput(format!(
                        "instance {index}: transitivity broken at ({i},{j},{k})"
                    )));
                }
            }
        }
    }

    // Sharpness limit: on sampled pairs, a large enough finite exponent must
    // reproduce the equivalence verdict within 1e-9.
    let mut limit_pairs = 0usize;
    for _ in 0..16.min(n * (n - 1) / 2 + 1) {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let sim = similarity_exact_rational(&inst.codes[i], &inst.codes[j], &inst.dist, &inst.env)?;
        let sim_f = ratio_to_f64(&sim);
        let is_eq = eq[i][j];
        if ratio_to_f64(&sim) == 1.0 && sim == num_rational::BigRational::from_integer(1.into()) {
            if !is_eq {
                return Err(Error::InvalidInput(format!(
                    "instance {index}: similarity 1 but not equivalent ({i},{j})"
                )));
            }
        } else {
            if is_eq {
                return Err(Error::InvalidInput(format!(
                    "instance {index}: equivalent pair with similarity < 1 ({i},{j})"
                )));
            }
            let s_star = if sim_f <= 0.0 {
                1
            } else {
                ((1e-9f64).ln() / sim_f.ln()).ceil() as u32
            };
            let limit = s_power(sim_f, Sharpness::Finite(s_star));
            // One ulp of slack for the float power evaluation at the exact
            // boundary.
            if (limit - 0.0).abs() > 1e-9 * (1.0 + 1e-9) {
                return Err(Error::InvalidInput(format!(
                    "instance {index}: sharpness limit {limit} not within 1e-9 of 0"
                )));
            }
        }
        limit_pairs += 1;
    }
    Ok((psd.min_eigenvalue, limit_pairs))
}

// ---------------------------------------------------------------------------
// Criterion 2: measure smoothing with exact arithmetic
// ---------------------------------------------------------------------------

fn check_measure_smoothing() -> Result<(bool, String)> {
    let instances = 500usize;
    let violations: Vec<Result<usize>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(0x500, &[2, i as u64]);
            let inst = random_kernel_instance(&mut rng, 8, 4)?;
            let weights: Vec<f64> = {
                let raw: Vec<f64> =
                    (0..inst.codes.len()).map(|_| (1 + rng.random_range(0..16)) as f64).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|w| w / total).collect()
            };
            let codes = CodeDistribution::new(inst.codes.clone(), &weights)?;
            let s = [Sharpness::Finite(1), Sharpness::Finite(2), Sharpness::Finite(3), Sharpness::Finite(4)]
                [rng.random_range(0..4)];
            let a = rng.random_range(0..inst.codes.len());
            let b = rng.random_range(0..inst.codes.len());
            let gap =
                smoothing_gap(&inst.codes[a], &inst.codes[b], s, &codes, &inst.dist, &inst.env)?;
            Ok((!gap.holds) as usize)
        })
        .collect();
    let mut total_violations = 0usize;
    for v in violations {
        total_violations += v?;
    }
    Ok((
        total_violations == 0,
        format!("{instances} randomized instances, {total_violations} bound violations"),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 3: SNR dominance chain, exact and resampled
// ---------------------------------------------------------------------------

fn check_snr_dominance() -> Result<(bool, String)> {
    let mus = [0.1, 0.2, 0.5, 0.8, 0.95];
    let ms = [1u32, 2, 5, 10];
    let mut combos = 0usize;
    for &mu in &mus {
        // Two-atom score at exactly {0, 1} and a second family with mass at
        // 1 equal to mu^2.
        let bernoulli = ScoreDistribution::new(&[(1.0, mu), (0.0, 1.0 - mu)])?;
        let skewed =
            ScoreDistribution::new(&[(1.0, mu * mu), (mu / (1.0 + mu), 1.0 - mu * mu)])?;
        for dist in [&bernoulli, &skewed] {
            for &m in &ms {
                let report = snr_exact(dist, m)?;
                if !report.exact_dominance {
                    return Ok((
                        false,
                        format!("exact dominance failed at mu={mu}, m={m}"),
                    ));
                }
                let bound = snr_lower_bound(dist.mu(), m)?;
                if report.lower_bound_uniform > bound + 1e-12 {
                    return Ok((false, format!("m^2 floor failed at mu={mu}, m={m}")));
                }
                combos += 1;
            }
        }
    }

    // Resampling layer on the fixed example set.
    let fair = ScoreDistribution::new(&[(1.0, 0.5), (0.0, 0.5)])?;
    let three = ScoreDistribution::new(&[(1.0, 0.25), (0.75, 0.5), (0.0, 0.25)])?;
    let mut worst_rel = 0.0f64;
    for (dist, m, tag) in [(&fair, 1u32, 0u64), (&fair, 4, 1), (&three, 2, 2)] {
        let exact = snr_exact(dist, m)?;
        let mut rng = substream(0x53e, &[3, tag]);
        let emp = snr_empirical(dist, m, 100_000, &mut rng)?;
        for (e, a) in [(exact.snr_smooth, emp.snr_smooth), (exact.snr_sharp, emp.snr_sharp)] {
            let rel = (a / e - 1.0).abs();
            worst_rel = worst_rel.max(rel);
            if rel >= 0.05 {
                return Ok((
                    false,
                    format!("empirical SNR off by {rel:.3} at m={m} (exact {e}, got {a})"),
                ));
            }
        }
    }
    Ok((
        true,
        format!(
            "{combos} (mu, m, dist) combos exactly dominated; empirical worst rel err {worst_rel:.4}"
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 4: greedy top-k equals exhaustive best subset
// ---------------------------------------------------------------------------

fn check_greedy_optimality() -> Result<(bool, String)> {
    let mut rng = substream(0x9c0, &[4]);
    let mut checks = 0usize;
    for n in 1..=12usize {
        for k in 1..=n.min(6) {
            for trial in 0..12 {
                let probs: Vec<f64> = if trial == 0 {
                    vec![1.0 / n as f64; n]
                } else {
                    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-6).collect();
                    let total: f64 = raw.iter().sum();
                    raw.iter().map(|w| w / total).collect()
                };
                let check = greedy_optimality_check(&probs, k)?;
                if !check.optimal {
                    return Ok((
                        false,
                        format!(
                            "greedy {:.6} != best {:.6} at n={n}, k={k}",
                            check.greedy_value, check.best_value
                        ),
                    ));
                }
                checks += 1;
            }
        }
    }
    Ok((true, format!("{checks} instances: greedy equals exhaustive best subset exactly")))
}

// ---------------------------------------------------------------------------
// Criterion 5: calibration duality
// ---------------------------------------------------------------------------

fn check_calibration() -> Result<(bool, String)> {
    let e = Environment::binary();
    let mut families = 0usize;
    for task in 0..10u64 {
        let mut rng = substream(0xca1, &[5, task]);
        let alg = sample_algorithm(5, 2, 0.2, &mut rng)?;
        let desc = sample_description(&alg, 2, false, &mut rng);
        let n = rng.random_range(4..=10);
        let codes = sample_program_batch(&desc, 0.7, n, &mut rng)?;
        let raw: Vec<f64> = (0..n).map(|_| 1.0 + rng.random_range(0..8) as f64).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let (cd, sd) = calibrated_family(codes, &weights, &e)?;
        let gap = calibration_check(&cd, &sd, &e)?;
        if gap != 0.0 {
            return Ok((false, format!("task {task}: calibrated gap {gap} != 0")));
        }
        families += 1;
    }
    Ok((true, format!("{families} constructed calibrated families, max gap exactly 0")))
}

// ---------------------------------------------------------------------------
// Criterion 6: soft variants beat hard variants and Random
// ---------------------------------------------------------------------------

/// Frozen benchmark task shape for the ordering claim.
const BENCH_DOMAIN: usize = 6;
const BENCH_SUITE_SIZE: usize = 4;

fn selection_benchmark_means(
    seed: u64,
    tasks: usize,
    heuristics: &[Heuristic],
) -> Result<Vec<f64>> {
    let e = Environment::binary();
    let rows: Vec<Result<Vec<u8>>> = (0..tasks)
        .into_par_iter()
        .map(|task| {
            let mut rng = substream(seed, &[6, task as u64]);
            let alg = sample_algorithm(BENCH_DOMAIN, 2, 0.0, &mut rng)?;
            let desc = sample_description(&alg, 2, false, &mut rng);
            let codes = sample_program_batch(&desc, 0.8, 10, &mut rng)?;
            let suites =
                sample_test_suite_batch(&desc, BENCH_SUITE_SIZE, 0.1, 10, &e, &mut rng)?;
            let matrix = ExecutionMatrix::from_batch(&codes, &suites, &e)?;
            let cfg = ScoreConfig { seed: derive_seed(seed, &[0x6c, task as u64]) };
            heuristics
                .iter()
                .map(|&h| {
                    let scored = score(&matrix, h, &cfg)?;
                    let top1 = select_top_k(&scored.scores, matrix.code_ids(), 1)?;
                    Ok(pass_at_k_eval(&codes, &top1, &alg, &e)? as u8)
                })
                .collect()
        })
        .collect();
    let mut hits = vec![0usize; heuristics.len()];
    for row in rows {
        for (h, &hit) in row?.iter().enumerate() {
            hits[h] += hit as usize;
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / tasks as f64).collect())
}

fn check_soft_beats_hard() -> Result<(bool, String)> {
    let heuristics = [
        Heuristic::Random,
        Heuristic::CodeTHard,
        Heuristic::CodeTSoft,
        Heuristic::MaxPassHard,
        Heuristic::MaxPassSoft,
    ];
    let seeds = [1u64, 2, 3, 4, 5];
    let tasks = 200usize;
    let mut codet_soft_wins = 0usize;
    let mut maxpass_soft_wins = 0usize;
    let mut families_beat_random = true;
    let mut lines = Vec::new();
    for &seed in &seeds {
        let means = selection_benchmark_means(seed, tasks, &heuristics)?;
        let (random, codet_hard, codet_soft, maxpass_hard, maxpass_soft) =
            (means[0], means[1], means[2], means[3], means[4]);
        if codet_soft >= codet_hard {
            codet_soft_wins += 1;
        }
        if maxpass_soft >= maxpass_hard {
            maxpass_soft_wins += 1;
        }
        for family in [codet_hard, codet_soft, maxpass_hard, maxpass_soft] {
            if family <= random {
                families_beat_random = false;
            }
        }
        lines.push(format!(
            "seed {seed}: random {random:.3} codet {codet_hard:.3}/{codet_soft:.3} \
             maxpass {maxpass_hard:.3}/{maxpass_soft:.3}"
        ));
    }
    let passed =
        codet_soft_wins >= 4 && maxpass_soft_wins >= 4 && families_beat_random;
    Ok((
        passed,
        format!(
            "CodeTSoft>=Hard on {codet_soft_wins}/5 seeds, MaxPassSoft>=Hard on \
             {maxpass_soft_wins}/5, families beat Random: {families_beat_random} | {}",
            lines.join(" | ")
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 7: regret bounds and the irreducible floor
// ---------------------------------------------------------------------------

/// Reference line-graph model parameters.
const REF_ARMS: usize = 8;
const REF_LENGTHSCALE: f64 = 6.0;
const REF_NOISE: f64 = 0.5;
const REF_ROUNDS: usize = 50;
const REF_EPISODES: usize = 500;

fn check_regret_bounds() -> Result<(bool, String)> {
    // No hidden component: both bounds coincide and late regret collapses.
    let clean = GpBanditModel::line_graph(REF_ARMS, REF_LENGTHSCALE, REF_NOISE, 0.0)?;
    let clean_report = bandit::verify_bounds(&clean, REF_ROUNDS, REF_EPISODES, 0x70)?;
    let clean_ok = clean_report.satisfied_obs
        && clean_report.satisfied_true
        && clean_report.delta_hat == 0.0
        && clean_report.last_quartile_regret_true < 0.05;

    // Hidden variance 0.25: bounds still hold and the late per-round regret
    // stays at or above its estimated floor.
    let hidden = GpBanditModel::line_graph(REF_ARMS, REF_LENGTHSCALE, REF_NOISE, 0.25)?;
    let hidden_report = bandit::verify_bounds(&hidden, REF_ROUNDS, REF_EPISODES, 0x71)?;
    let floor_slack = 2.0
        * (hidden_report.last_quartile_se.powi(2) + hidden_report.delta_se.powi(2)).sqrt();
    let hidden_ok = hidden_report.satisfied_obs
        && hidden_report.satisfied_true
        && hidden_report.delta_hat > 0.0
        && hidden_report.last_quartile_regret_true >= hidden_report.delta_hat - floor_slack;

    // Negative control: a feedback-blind policy on a spread prior with tiny
    // noise must violate the observable bound at large T.
    let spread = GpBanditModel::independent(8, 1.0, 0.05, 0.0)?;
    let traces = bandit::run_episodes(&spread, 200, 200, Policy::UniformRandom, 0x72)?;
    let control = bandit::bound_report(&spread, &traces, 10_000, 0x72)?;
    let control_ok = !control.satisfied_obs;

    let passed = clean_ok && hidden_ok && control_ok;
    Ok((
        passed,
        format!(
            "hid=0: obs-bound {} / true-bound {} / late regret {:.4} (<0.05); hid=0.25: \
             obs-bound {} / true-bound {} / late {:.4} vs floor {:.4}-{:.4}; \
             random control violates: {}",
            clean_report.satisfied_obs,
            clean_report.satisfied_true,
            clean_report.last_quartile_regret_true,
            hidden_report.satisfied_obs,
            hidden_report.satisfied_true,
            hidden_report.last_quartile_regret_true,
            hidden_report.delta_hat,
            floor_slack,
            control_ok
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 8: information-gain chain and selection bounds
// ---------------------------------------------------------------------------

fn check_lemmas() -> Result<(bool, String)> {
    // Small-arm variant of the reference model where the true maximum
    // information gain is enumerable.
    let model = GpBanditModel::line_graph(4, REF_LENGTHSCALE, REF_NOISE, 0.25)?;
    let episodes = 300usize;
    let traces = bandit::run_episodes(&model, REF_ROUNDS, episodes, Policy::Thompson, 0x80)?;
    let gamma = bandit::max_info_gain(&model, REF_ROUNDS)?;
    let gamma_exact = gamma
        .exact
        .ok_or_else(|| Error::InvalidInput("4-arm instance must be enumerable".into()))?;
    let (_, c_sigma) = bandit::bound_ingredients(&model);

    let mut worst_chain = f64::NEG_INFINITY;
    let mut worst_det = 0.0f64;
    for (ep, trace) in traces.iter().enumerate() {
        let gain = bandit::info_gain(&model, &trace.chosen)?;
        let pred_sum: f64 = trace.pred_vars.iter().sum();
        let lhs = pred_sum / c_sigma;
        if lhs > gain + 1e-9 {
            return Ok((
                false,
                format!("episode {ep}: predictive-variance chain broken ({lhs} > {gain})"),
            ));
        }
        if gain > gamma_exact + 1e-9 {
            return Ok((
                false,
                format!("episode {ep}: info gain {gain} exceeds exact gamma {gamma_exact}"),
            ));
        }
        worst_chain = worst_chain.max(lhs - gain);
        if ep < 50 {
            let det = bandit::info_gain_logdet(&model, &trace.chosen)?;
            let err = (gain - det).abs();
            worst_det = worst_det.max(err);
            if err > 1e-9 {
                return Ok((false, format!("episode {ep}: log-det mismatch {err:.2e}")));
            }
        }
    }

    // Maximal-coordinate deviation bounds at three arm counts.
    for arms in [2usize, 8, 32] {
        let m = GpBanditModel::independent(arms, 1.0, 1.0, 0.0)?;
        let mut rng = substream(0x81, &[arms as u64]);
        let report = bandit::lemma1_check(&m, 100_000, &mut rng)?;
        if !report.holds {
            return Ok((false, format!("selection bound failed at {arms} arms: {report:?}")));
        }
    }

    // E[max of two standard normals] = 1/sqrt(pi) within 1%.
    let mut rng = substream(0x82, &[0]);
    let draws = 200_000;
    let mut sum = 0.0;
    for _ in 0..draws {
        let a: f64 = rand_distr::StandardNormal.sample(&mut rng);
        let b: f64 = rand_distr::StandardNormal.sample(&mut rng);
        sum += a.max(b);
    }
    let max_mean = sum / draws as f64;
    let target = 1.0 / std::f64::consts::PI.sqrt();
    let rel = (max_mean / target - 1.0).abs();
    if rel >= 0.01 {
        return Ok((false, format!("max-of-normals mean {max_mean:.5} off target by {rel:.4}")));
    }

    Ok((
        true,
        format!(
            "{episodes} episodes: chain slack {worst_chain:.2e} <= 0, log-det err {worst_det:.2e}, \
             selection bounds hold at 2/8/32 arms, max-of-normals {max_mean:.4} ~ {target:.4}"
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 9: refinement regimes
// ---------------------------------------------------------------------------

fn refinement_condition(
    seed: u64,
    reveal_examples: bool,
    mode: FeedbackMode,
) -> Result<f64> {
    let domain = 8;
    let mut rng = substream(seed, &[9, 0x7a5c]);
    let alg = sample_algorithm(domain, 2, 0.5, &mut rng)?;
    let desc = sample_description(&alg, 2, reveal_examples, &mut rng);
    let cfg = LoopConfig {
        rounds: 6,
        factorization: Factorization::Independent,
        compression: Compression::SummaryConcat,
        feedback_mode: mode,
        suite_size: 4,
        corruption: 0.1,
        prior_confidence: 0.8,
    };
    Ok(run_refinement(&alg, &desc, &cfg, seed)?.final_oracle_rate())
}

/// One-sided sign-test p-value: probability of at least `wins` successes in
/// `wins + losses` fair coin flips.
fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    // Exact binomial tail in log space.
    let ln_half = 0.5f64.ln();
    let mut tail = 0.0;
    for k in wins..=n {
        let mut ln_choose = 0.0;
        for i in 0..k.min(n - k) {
            ln_choose += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        tail += (ln_choose + n as f64 * ln_half).exp();
    }
    tail.min(1.0)
}

fn check_refinement_regimes() -> Result<(bool, String)> {
    let seeds = 200u64;
    let results: Vec<Result<(f64, f64, f64)>> = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let oracle = refinement_condition(seed, false, FeedbackMode::OracleTest)?;
            let with_examples = refinement_condition(seed, true, FeedbackMode::SelfTest)?;
            let without_examples = refinement_condition(seed, false, FeedbackMode::SelfTest)?;
            Ok((oracle, with_examples, without_examples))
        })
        .collect();
    let mut ordered = 0usize;
    let mut wins = 0usize;
    let mut losses = 0usize;
    let mut mean = [0.0f64; 3];
    for r in results {
        let (oracle, shown, hidden) = r?;
        if oracle >= shown && shown >= hidden {
            ordered += 1;
        }
        if shown > hidden {
            wins += 1;
        } else if hidden > shown {
            losses += 1;
        }
        mean[0] += oracle;
        mean[1] += shown;
        mean[2] += hidden;
    }
    for m in &mut mean {
        *m /= seeds as f64;
    }
    let ordered_frac = ordered as f64 / seeds as f64;
    let p = sign_test_p(wins, losses);
    let passed = ordered_frac >= 0.9 && p < 0.05 && wins > losses;
    Ok((
        passed,
        format!(
            "ordering holds on {ordered}/{seeds} seeds ({ordered_frac:.2}); \
             uplift sign test: {wins} wins / {losses} losses, p = {p:.2e}; \
             mean final rates oracle {:.3} / with-examples {:.3} / without {:.3}",
            mean[0], mean[1], mean[2]
        ),
    ))
}

// ---------------------------------------------------------------------------
// Criterion 10: byte-identical reruns
// ---------------------------------------------------------------------------

fn rerun_and_compare(config: &ExperimentConfig, tmp: &std::path::Path) -> Result<bool> {
    let out_a = tmp.join("a");
    let out_b = tmp.join("b");
    let a = harness::run(config, Some(&out_a))?;
    harness::run(config, Some(&out_b))?;
    for output in &a.manifest.outputs {
        let name = output.file_name().expect("output file name");
        let bytes_a = std::fs::read(out_a.join(name))?;
        let bytes_b = std::fs::read(out_b.join(name))?;
        if bytes_a != bytes_b {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_reproducibility() -> Result<(bool, String)> {
    let tmp = std::env::temp_dir().join(format!("passlab-verify-{}", std::process::id()));
    std::fs::create_dir_all(&tmp)?;

    let selection = ExperimentConfig {
        kind: ExperimentKind::Selection,
        seeds: vec![1, 2],
        parallel: Some(2),
        out_dir: None,
        selection: Some(SelectionParams {
            tasks: 20,
            n: 6,
            m: 6,
            domain_size: BENCH_DOMAIN,
            ambiguity_level: 0.0,
            fidelity: 0.8,
            suite_size: BENCH_SUITE_SIZE,
            corruption: 0.1,
            heuristics: vec![
                Heuristic::Random,
                Heuristic::MbrExecHard,
                Heuristic::MbrExecSoft,
                Heuristic::MaxPassHard,
                Heuristic::MaxPassSoft,
                Heuristic::CodeTHard,
                Heuristic::CodeTSoft,
            ],
        }),
        bandit: None,
        refinement: None,
        verify: None,
    };
    let bandit_cfg = ExperimentConfig {
        kind: ExperimentKind::Bandit,
        seeds: vec![7],
        parallel: Some(2),
        out_dir: None,
        selection: None,
        bandit: Some(BanditParams {
            arms: 4,
            lengthscale: REF_LENGTHSCALE,
            noise_sd: REF_NOISE,
            hidden_var: 0.25,
            rounds: 10,
            episodes: 100,
        }),
        refinement: None,
        verify: None,
    };
    let refinement = ExperimentConfig {
        kind: ExperimentKind::Refinement,
        seeds: (0..10).collect(),
        parallel: Some(2),
        out_dir: None,
        selection: None,
        bandit: None,
        refinement: Some(RefinementParams {
            domain_size: 8,
            alphabet_size: 2,
            ambiguity_level: 0.5,
            reveal_examples: false,
            rounds: 6,
            factorization: Factorization::Independent,
            compression: Compression::SummaryConcat,
            feedback_mode: FeedbackMode::SelfTest,
            suite_size: 4,
            corruption: 0.1,
            prior_confidence: 0.8,
        }),
        verify: None,
    };

    let mut all_ok = true;
    let mut parts = Vec::new();
    for (name, config) in
        [("selection", &selection), ("bandit", &bandit_cfg), ("refinement", &refinement)]
    {
        let dir = tmp.join(name);
        std::fs::create_dir_all(&dir)?;
        let ok = rerun_and_compare(config, &dir)?;
        parts.push(format!("{name}: {}", if ok { "byte-identical" } else { "DIFFERS" }));
        all_ok &= ok;
    }
    let _ = std::fs::remove_dir_all(&tmp);
    Ok((all_ok, parts.join(", ")))
}
