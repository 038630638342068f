//! Gaussian-process Thompson sampling over a finite arm set with a reward
//! split into an observable and a hidden component.
//!
//! The total reward of arm `x` is `r(x) = r_obs(x) + r_hid(x)`. The
//! observable part has a Gaussian prior with unit-bounded variances and is
//! probed through noisy evaluations `y = r_obs(x) + noise`; the hidden part
//! has its own independent Gaussian prior and is never observed. Thompson
//! sampling draws the observable part from its posterior and the hidden part
//! from its prior, then plays the argmax of the sum.
//!
//! Two benchmarks matter for the regret accounting:
//!
//! - the *observable optimum* `x_obs*`, the play of a Thompson sampler with
//!   full knowledge of `r_obs` (realized with a fresh hidden draw);
//! - the *true optimum* `x* = argmax r`.
//!
//! Cumulative regret against the first is sublinear, bounded by
//! `beta * sqrt(C_sigma * T * gamma_T)` with `beta = 1 + sqrt(2 ln(2|X|) + 2)`
//! and `C_sigma = 2 / ln(1 + sigma^-2)`; regret against the second picks up
//! an additional linear term `T * delta`, where `delta = E[r(x*) -
//! r(x_obs*)]` is the irreducible price of the hidden component. The
//! information-gain machinery ([`info_gain`], [`max_info_gain`]) supplies the
//! `gamma_T` ingredient; [`verify_bounds`] replays episodes and checks the
//! bound chain at every prefix.
//!
//! Natural logarithms are used throughout.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::substream;

/// Jitter added to a vanishing innovation variance so conditioning never
/// hard-fails.
const INNOVATION_JITTER: f64 = 1e-10;

/// Symmetry/PSD slack accepted when validating covariance inputs.
const COV_TOL: f64 = 1e-8;

/// Prior specification of the two reward components and the observation
/// noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GpBanditModel {
    prior_mean: DVector<f64>,
    prior_cov: DMatrix<f64>,
    hidden_mean: DVector<f64>,
    hidden_cov: DMatrix<f64>,
    noise_sd: DVector<f64>,
}

fn check_covariance(name: &str, cov: &DMatrix<f64>, unit_diagonal: bool) -> Result<()> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return Err(Error::ShapeMismatch(format!("{name} must be square")));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (cov[(i, j)] - cov[(j, i)]).abs() > COV_TOL {
                return Err(Error::InvalidInput(format!("{name} is not symmetric")));
            }
        }
        if unit_diagonal && cov[(i, i)] > 1.0 + COV_TOL {
            return Err(Error::InvalidInput(format!(
                "{name} diagonal entry {i} = {} exceeds 1",
                cov[(i, i)]
            )));
        }
    }
    let min_eig = cov
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -COV_TOL {
        return Err(Error::InvalidInput(format!(
            "{name} is not PSD (min eigenvalue {min_eig:.3e})"
        )));
    }
    Ok(())
}

impl GpBanditModel {
    pub fn new(
        prior_mean: Vec<f64>,
        prior_cov: Vec<Vec<f64>>,
        hidden_mean: Vec<f64>,
        hidden_cov: Vec<Vec<f64>>,
        noise_sd: Vec<f64>,
    ) -> Result<Self> {
        let arms = prior_mean.len();
        if arms == 0 {
            return Err(Error::InvalidConfig("model needs at least one arm".into()));
        }
        if hidden_mean.len() != arms || noise_sd.len() != arms {
            return Err(Error::ShapeMismatch("mean and noise vectors must match arm count".into()));
        }
        if prior_cov.len() != arms || prior_cov.iter().any(|r| r.len() != arms) {
            return Err(Error::ShapeMismatch("prior covariance must be arms x arms".into()));
        }
        if hidden_cov.len() != arms || hidden_cov.iter().any(|r| r.len() != arms) {
            return Err(Error::ShapeMismatch("hidden covariance must be arms x arms".into()));
        }
        if noise_sd.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            return Err(Error::InvalidConfig("noise_sd must be strictly positive".into()));
        }
        let prior_cov = DMatrix::from_fn(arms, arms, |i, j| prior_cov[i][j]);
        let hidden_cov = DMatrix::from_fn(arms, arms, |i, j| hidden_cov[i][j]);
        check_covariance("prior covariance", &prior_cov, true)?;
        check_covariance("hidden covariance", &hidden_cov, false)?;
        Ok(GpBanditModel {
            prior_mean: DVector::from_vec(prior_mean),
            prior_cov,
            hidden_mean: DVector::from_vec(hidden_mean),
            hidden_cov,
            noise_sd: DVector::from_vec(noise_sd),
        })
    }

    /// Squared-exponential covariance over arms laid out on a line (unit
    /// diagonal by construction), homoscedastic noise, and isotropic hidden
    /// variance.
    pub fn line_graph(
        arms: usize,
        lengthscale: f64,
        noise_sd: f64,
        hidden_var: f64,
    ) -> Result<Self> {
        if lengthscale <= 0.0 {
            return Err(Error::InvalidConfig("lengthscale must be positive".into()));
        }
        let cov: Vec<Vec<f64>> = (0..arms)
            .map(|i| {
                (0..arms)
                    .map(|j| {
                        let d = i as f64 - j as f64;
                        (-d * d / (2.0 * lengthscale * lengthscale)).exp()
                    })
                    .collect()
            })
            .collect();
        let hid: Vec<Vec<f64>> = (0..arms)
            .map(|i| (0..arms).map(|j| if i == j { hidden_var } else { 0.0 }).collect())
            .collect();
        GpBanditModel::new(vec![0.0; arms], cov, vec![0.0; arms], hid, vec![noise_sd; arms])
    }

    /// Independent arms with a common prior variance.
    pub fn independent(
        arms: usize,
        prior_var: f64,
        noise_sd: f64,
        hidden_var: f64,
    ) -> Result<Self> {
        let eye = |v: f64| -> Vec<Vec<f64>> {
            (0..arms)
                .map(|i| (0..arms).map(|j| if i == j { v } else { 0.0 }).collect())
                .collect()
        };
        GpBanditModel::new(
            vec![0.0; arms],
            eye(prior_var),
            vec![0.0; arms],
            eye(hidden_var),
            vec![noise_sd; arms],
        )
    }

    pub fn arms(&self) -> usize {
        self.prior_mean.len()
    }

    pub fn prior_mean(&self) -> &DVector<f64> {
        &self.prior_mean
    }

    pub fn prior_cov(&self) -> &DMatrix<f64> {
        &self.prior_cov
    }

    pub fn hidden_mean(&self) -> &DVector<f64> {
        &self.hidden_mean
    }

    pub fn hidden_cov(&self) -> &DMatrix<f64> {
        &self.hidden_cov
    }

    pub fn noise_sd(&self) -> &DVector<f64> {
        &self.noise_sd
    }

    pub fn max_noise_sd(&self) -> f64 {
        self.noise_sd.iter().copied().fold(0.0, f64::max)
    }

    pub fn hidden_is_degenerate(&self) -> bool {
        self.hidden_cov.iter().all(|&v| v == 0.0)
    }
}

/// Played arms and noisy observations, in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub steps: Vec<(usize, f64)>,
}

impl History {
    pub fn new() -> Self {
        History { steps: Vec::new() }
    }

    pub fn push(&mut self, arm: usize, observation: f64) {
        self.steps.push((arm, observation));
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn validate(&self, arms: usize) -> Result<()> {
        for &(arm, y) in &self.steps {
            if arm >= arms {
                return Err(Error::InvalidInput(format!("history arm {arm} out of range")));
            }
            if !y.is_finite() {
                return Err(Error::InvalidInput("history observation is not finite".into()));
            }
        }
        Ok(())
    }
}

/// One scalar conditioning step on the running Gaussian state.
fn condition_step(
    mean: &mut DVector<f64>,
    cov: &mut DMatrix<f64>,
    noise_sd: &DVector<f64>,
    arm: usize,
    y: f64,
) {
    let mut innovation_var = cov[(arm, arm)] + noise_sd[arm] * noise_sd[arm];
    if innovation_var < INNOVATION_JITTER {
        innovation_var += INNOVATION_JITTER;
    }
    let k = cov.column(arm).clone_owned();
    let gain = (y - mean[arm]) / innovation_var;
    *mean += &k * gain;
    *cov -= &k * k.transpose() / innovation_var;
    // Resymmetrize against float drift.
    let n = cov.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
}

/// Exact Gaussian conditioning of the observable prior on the history,
/// applied one observation at a time with heteroscedastic noise.
pub fn posterior(model: &GpBanditModel, history: &History) -> Result<(DVector<f64>, DMatrix<f64>)> {
    history.validate(model.arms())?;
    let mut mean = model.prior_mean.clone();
    let mut cov = model.prior_cov.clone();
    for &(arm, y) in &history.steps {
        condition_step(&mut mean, &mut cov, &model.noise_sd, arm, y);
    }
    Ok((mean, cov))
}

/// A reusable Gaussian sampler: the covariance factor is computed once via
/// the symmetric eigendecomposition (tiny negative eigenvalues clamped), so
/// repeated draws cost one matrix-vector product. Works for singular
/// covariances.
pub struct MvnSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl MvnSampler {
    pub fn new(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Self {
        let eigen = cov.clone().symmetric_eigen();
        let mut factor = eigen.eigenvectors;
        for (j, &lambda) in eigen.eigenvalues.iter().enumerate() {
            let scale = lambda.max(0.0).sqrt();
            factor.column_mut(j).scale_mut(scale);
        }
        MvnSampler { mean: mean.clone(), factor }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.mean.len();
        let z = DVector::from_fn(n, |_, _| {
            let v: f64 = StandardNormal.sample(rng);
            v
        });
        &self.mean + &self.factor * z
    }
}

/// One-shot draw from `N(mean, cov)`.
pub fn sample_mvn<R: Rng>(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    MvnSampler::new(mean, cov).sample(rng)
}

/// Draw from an evolving Gaussian state: Cholesky with a jitter retry, and
/// the eigendecomposition as the fallback for genuinely singular
/// covariances. Much cheaper than a fresh eigendecomposition per round.
fn sample_state<R: Rng>(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let n = mean.len();
    let jittered = cov + DMatrix::<f64>::identity(n, n) * 1e-12;
    match jittered.cholesky() {
        Some(chol) => {
            let z = DVector::from_fn(n, |_, _| {
                let v: f64 = StandardNormal.sample(rng);
                v
            });
            mean + chol.l() * z
        }
        None => MvnSampler::new(mean, cov).sample(rng),
    }
}

fn argmax_lowest_tie(values: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// One Thompson draw: observable posterior sample plus a fresh hidden prior
/// sample, argmax of the sum (ties to the lowest index).
pub fn thompson_step<R: Rng>(
    model: &GpBanditModel,
    history: &History,
    rng: &mut R,
) -> Result<usize> {
    let (mean, cov) = posterior(model, history)?;
    let obs_draw = sample_mvn(&mean, &cov, rng);
    let hid_draw = sample_mvn(&model.hidden_mean, &model.hidden_cov, rng);
    Ok(argmax_lowest_tie(&(obs_draw + hid_draw)))
}

/// The observable-optimum benchmark: argmax of the known observable reward
/// plus a fresh hidden prior draw.
pub fn sample_obs_optimum<R: Rng>(
    model: &GpBanditModel,
    r_obs: &DVector<f64>,
    rng: &mut R,
) -> Result<usize> {
    if r_obs.len() != model.arms() {
        return Err(Error::ShapeMismatch("r_obs length must match arm count".into()));
    }
    let hid_draw = sample_mvn(&model.hidden_mean, &model.hidden_cov, rng);
    Ok(argmax_lowest_tie(&(r_obs + hid_draw)))
}

/// Arm-selection rule for episode replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Thompson,
    /// Negative control: ignores all feedback.
    UniformRandom,
}

/// Per-round regrets of one episode against both benchmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub chosen: Vec<usize>,
    /// `r(x_obs*) - r(x_n)` per round.
    pub regret_obs: Vec<f64>,
    /// `r(x*) - r(x_n)` per round.
    pub regret_true: Vec<f64>,
    pub cum_obs: Vec<f64>,
    pub cum_true: Vec<f64>,
    /// Posterior variance of the chosen arm before its observation.
    pub pred_vars: Vec<f64>,
}

impl RegretTrace {
    pub fn rounds(&self) -> usize {
        self.chosen.len()
    }

    /// CSV schema: `round,regret_obs,regret_true,cum_obs,cum_true`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["round", "regret_obs", "regret_true", "cum_obs", "cum_true"])?;
        for t in 0..self.rounds() {
            w.write_record([
                (t + 1).to_string(),
                self.regret_obs[t].to_string(),
                self.regret_true[t].to_string(),
                self.cum_obs[t].to_string(),
                self.cum_true[t].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Replays one episode: draws both reward components from the prior, then
/// plays `rounds` policy steps against noisy observations of the observable
/// part.
pub fn run_episode<R: Rng>(
    model: &GpBanditModel,
    rounds: usize,
    policy: Policy,
    rng: &mut R,
) -> Result<RegretTrace> {
    let hidden_sampler = MvnSampler::new(&model.hidden_mean, &model.hidden_cov);
    let r_obs = sample_mvn(&model.prior_mean, &model.prior_cov, rng);
    let r_hid = hidden_sampler.sample(rng);
    let r_total = &r_obs + &r_hid;
    let x_star = argmax_lowest_tie(&r_total);
    let x_star_obs = sample_obs_optimum(model, &r_obs, rng)?;

    let mut mean = model.prior_mean.clone();
    let mut cov = model.prior_cov.clone();
    let mut trace = RegretTrace {
        chosen: Vec::with_capacity(rounds),
        regret_obs: Vec::with_capacity(rounds),
        regret_true: Vec::with_capacity(rounds),
        cum_obs: Vec::with_capacity(rounds),
        cum_true: Vec::with_capacity(rounds),
        pred_vars: Vec::with_capacity(rounds),
    };
    let mut cum_obs = 0.0;
    let mut cum_true = 0.0;
    for _ in 0..rounds {
        let x_n = match policy {
            Policy::Thompson => {
                let obs_draw = sample_state(&mean, &cov, rng);
                let hid_draw = hidden_sampler.sample(rng);
                argmax_lowest_tie(&(obs_draw + hid_draw))
            }
            Policy::UniformRandom => rng.random_range(0..model.arms()),
        };
        trace.pred_vars.push(cov[(x_n, x_n)]);
        let draw: f64 = StandardNormal.sample(rng);
        let noise = draw * model.noise_sd[x_n];
        let y = r_obs[x_n] + noise;
        condition_step(&mut mean, &mut cov, &model.noise_sd, x_n, y);

        let regret_obs = r_total[x_star_obs] - r_total[x_n];
        let regret_true = r_total[x_star] - r_total[x_n];
        cum_obs += regret_obs;
        cum_true += regret_true;
        trace.chosen.push(x_n);
        trace.regret_obs.push(regret_obs);
        trace.regret_true.push(regret_true);
        trace.cum_obs.push(cum_obs);
        trace.cum_true.push(cum_true);
    }
    Ok(trace)
}

/// Independent episodes with per-episode substreams, in parallel; the result
/// order is the episode order regardless of scheduling.
pub fn run_episodes(
    model: &GpBanditModel,
    rounds: usize,
    episodes: usize,
    policy: Policy,
    base_seed: u64,
) -> Result<Vec<RegretTrace>> {
    (0..episodes)
        .into_par_iter()
        .map(|ep| {
            let mut rng = substream(base_seed, &[0xe9150de, ep as u64]);
            run_episode(model, rounds, policy, &mut rng)
        })
        .collect()
}

/// Sequential information gain of an arm sequence: each observation
/// contributes half the log of one plus its variance ratio, with the
/// posterior variance updated along the way.
pub fn info_gain(model: &GpBanditModel, arm_sequence: &[usize]) -> Result<f64> {
    let arms = model.arms();
    let mut cov = model.prior_cov.clone();
    let mut mean = model.prior_mean.clone();
    let mut total = 0.0;
    for &x in arm_sequence {
        if x >= arms {
            return Err(Error::InvalidInput(format!("arm {x} out of range")));
        }
        let sigma2 = model.noise_sd[x] * model.noise_sd[x];
        total += 0.5 * (1.0 + cov[(x, x)] / sigma2).ln();
        // The variance recursion does not depend on the observed value.
        condition_step(&mut mean, &mut cov, &model.noise_sd, x, 0.0);
    }
    Ok(total)
}

/// Log-determinant route to the same quantity:
/// `0.5 * ln det(I + D^-1 K)` with `K` the prior covariance at the sequence
/// locations (with repeats) and `D` the per-observation noise variances.
pub fn info_gain_logdet(model: &GpBanditModel, arm_sequence: &[usize]) -> Result<f64> {
    let arms = model.arms();
    if arm_sequence.iter().any(|&x| x >= arms) {
        return Err(Error::InvalidInput("arm out of range".into()));
    }
    let t = arm_sequence.len();
    if t == 0 {
        return Ok(0.0);
    }
    let k = DMatrix::from_fn(t, t, |a, b| {
        model.prior_cov[(arm_sequence[a], arm_sequence[b])]
    });
    let mut m: DMatrix<f64> = DMatrix::identity(t, t);
    for a in 0..t {
        let sigma2 = model.noise_sd[arm_sequence[a]].powi(2);
        for b in 0..t {
            m[(a, b)] += k[(a, b)] / sigma2;
        }
    }
    Ok(0.5 * m.determinant().ln())
}

/// Grouped form for a visit-count vector: observing arm `x` `n_x` times is
/// equivalent to one observation with noise variance `sigma_x^2 / n_x`.
fn info_gain_grouped(model: &GpBanditModel, counts: &[usize]) -> f64 {
    let active: Vec<usize> =
        (0..counts.len()).filter(|&x| counts[x] > 0).collect();
    let k = active.len();
    if k == 0 {
        return 0.0;
    }
    let mut m: DMatrix<f64> = DMatrix::identity(k, k);
    for a in 0..k {
        let eff_noise = model.noise_sd[active[a]].powi(2) / counts[active[a]] as f64;
        for b in 0..k {
            m[(a, b)] += model.prior_cov[(active[a], active[b])] / eff_noise;
        }
    }
    0.5 * m.determinant().ln()
}

/// A maximum-information-gain estimate with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    /// True maximum, when the instance was small enough to enumerate.
    pub exact: Option<f64>,
    /// Value achieved by greedy variance-chasing (a lower estimate).
    pub greedy: f64,
    /// Per-arm repetition bound: a closed-form upper surrogate.
    pub upper: f64,
}

impl GammaEstimate {
    /// The value safe to use inside an upper bound: the exact maximum when
    /// known, otherwise the upper surrogate.
    pub fn conservative(&self) -> f64 {
        self.exact.unwrap_or(self.upper)
    }
}

fn multiset_count(t: u128, arms: u128) -> u128 {
    // C(t + arms - 1, arms - 1)
    let k = arms - 1;
    let mut result: u128 = 1;
    for i in 0..k {
        result = result.saturating_mul(t + k - i) / (i + 1);
    }
    result
}

/// Budget of visit-count vectors enumerable in exact mode.
const EXACT_ENUMERATION_LIMIT: u128 = 2_000_000;

fn for_each_count_vector(
    arms: usize,
    remaining: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if current.len() == arms - 1 {
        current.push(remaining);
        visit(current);
        current.pop();
        return;
    }
    for take in 0..=remaining {
        current.push(take);
        for_each_count_vector(arms, remaining - take, current, visit);
        current.pop();
    }
}

/// Maximum information gain over all length-`t` arm sequences.
///
/// Information gain is permutation invariant, so exact mode enumerates visit
/// counts (multisets) rather than sequences; that is feasible up to 16 arms
/// and a bounded multiset count. Larger instances report the greedy value and
/// the repetition upper surrogate only.
pub fn max_info_gain(model: &GpBanditModel, t: usize) -> Result<GammaEstimate> {
    let arms = model.arms();
    if t == 0 {
        return Ok(GammaEstimate { exact: Some(0.0), greedy: 0.0, upper: 0.0 });
    }

    // Greedy: always probe the arm with the largest marginal gain.
    let mut cov = model.prior_cov.clone();
    let mut mean = model.prior_mean.clone();
    let mut greedy = 0.0;
    for _ in 0..t {
        let (best_arm, best_term) = (0..arms)
            .map(|x| {
                let sigma2 = model.noise_sd[x] * model.noise_sd[x];
                (x, 0.5 * (1.0 + cov[(x, x)] / sigma2).ln())
            })
            .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        greedy += best_term;
        condition_step(&mut mean, &mut cov, &model.noise_sd, best_arm, 0.0);
    }

    let upper = max_info_gain_upper(model, t);

    let exact = if arms <= 16
        && multiset_count(t as u128, arms as u128) <= EXACT_ENUMERATION_LIMIT
    {
        let mut best = f64::NEG_INFINITY;
        let mut current = Vec::with_capacity(arms);
        for_each_count_vector(arms, t, &mut current, &mut |counts| {
            let g = info_gain_grouped(model, counts);
            if g > best {
                best = g;
            }
        });
        Some(best)
    } else {
        None
    };

    Ok(GammaEstimate { exact, greedy, upper })
}

/// Closed-form upper surrogate for the maximum information gain: the sum,
/// over arms, of the gain from observing that arm `t` times in isolation.
/// Cross-arm conditioning only shrinks predictive variances, so this always
/// upper-bounds the true maximum.
pub fn max_info_gain_upper(model: &GpBanditModel, t: usize) -> f64 {
    let mut upper = 0.0;
    for x in 0..model.arms() {
        let prior_var = model.prior_cov[(x, x)];
        if prior_var <= 0.0 {
            continue;
        }
        let sigma2 = model.noise_sd[x] * model.noise_sd[x];
        let mut v = prior_var;
        for _ in 0..t {
            upper += 0.5 * (1.0 + v / sigma2).ln();
            v = v * sigma2 / (v + sigma2);
        }
    }
    upper
}

/// The confidence multiplier and noise constant of the regret bound:
/// `beta = 1 + sqrt(2 ln(2 |X|) + 2)` and
/// `C_sigma = 2 / ln(1 + sigma_max^-2)`.
pub fn bound_ingredients(model: &GpBanditModel) -> (f64, f64) {
    let arms = model.arms() as f64;
    let beta = 1.0 + (2.0 * (2.0 * arms).ln() + 2.0).sqrt();
    let sigma = model.max_noise_sd();
    let c_sigma = 2.0 / (1.0 + 1.0 / (sigma * sigma)).ln();
    (beta, c_sigma)
}

/// Monte Carlo estimate (mean, standard error) of the irreducible gap
/// `E[r(x*) - r(x_obs*)]`, nonnegative by optimality of `x*`.
pub fn delta_estimate<R: Rng>(
    model: &GpBanditModel,
    mc_draws: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if mc_draws == 0 {
        return Err(Error::InvalidInput("delta_estimate needs at least one draw".into()));
    }
    let prior_sampler = MvnSampler::new(&model.prior_mean, &model.prior_cov);
    let hidden_sampler = MvnSampler::new(&model.hidden_mean, &model.hidden_cov);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..mc_draws {
        let r_obs = prior_sampler.sample(rng);
        let r_hid = hidden_sampler.sample(rng);
        let r_total = &r_obs + &r_hid;
        let x_star = argmax_lowest_tie(&r_total);
        let fresh_hid = hidden_sampler.sample(rng);
        let x_star_obs = argmax_lowest_tie(&(&r_obs + fresh_hid));
        let gap = r_total[x_star] - r_total[x_star_obs];
        sum += gap;
        sum_sq += gap * gap;
    }
    let n = mc_draws as f64;
    let mean = sum / n;
    let var = ((sum_sq / n) - mean * mean).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Bound ingredients, measured regrets, and per-prefix satisfaction flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rounds: usize,
    pub episodes: usize,
    pub beta: f64,
    pub c_sigma: f64,
    /// Conservative `gamma` at the final round.
    pub gamma_t: f64,
    pub gamma_is_exact: bool,
    pub delta_hat: f64,
    pub delta_se: f64,
    /// Mean cumulative regret against the observable optimum, per prefix.
    pub mean_cum_obs: Vec<f64>,
    pub se_cum_obs: Vec<f64>,
    /// Mean cumulative regret against the true optimum, per prefix.
    pub mean_cum_true: Vec<f64>,
    pub se_cum_true: Vec<f64>,
    /// `beta * sqrt(C_sigma * t * gamma_t)` per prefix.
    pub bound_obs: Vec<f64>,
    /// `bound_obs + t * delta_hat` per prefix.
    pub bound_true: Vec<f64>,
    /// Mean cum regret vs observable optimum within bound at every prefix
    /// (two standard errors of slack).
    pub satisfied_obs: bool,
    /// Same against the true optimum and the delta-augmented bound.
    pub satisfied_true: bool,
    /// Mean per-round regret vs the true optimum over the last quartile of
    /// rounds.
    pub last_quartile_regret_true: f64,
    pub last_quartile_se: f64,
}

impl BoundReport {
    /// CSV schema: `round,regret_obs,regret_true,cum_obs,cum_true` with
    /// per-round means across episodes.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["round", "regret_obs", "regret_true", "cum_obs", "cum_true"])?;
        for t in 0..self.rounds {
            let prev_obs = if t == 0 { 0.0 } else { self.mean_cum_obs[t - 1] };
            let prev_true = if t == 0 { 0.0 } else { self.mean_cum_true[t - 1] };
            w.write_record([
                (t + 1).to_string(),
                (self.mean_cum_obs[t] - prev_obs).to_string(),
                (self.mean_cum_true[t] - prev_true).to_string(),
                self.mean_cum_obs[t].to_string(),
                self.mean_cum_true[t].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean_se_at<F: Fn(&RegretTrace) -> f64>(traces: &[RegretTrace], f: F) -> (f64, f64) {
    let n = traces.len() as f64;
    let values: Vec<f64> = traces.iter().map(f).collect();
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Builds the bound report from replayed traces. `gamma` is evaluated per
/// prefix with [`max_info_gain`] (exact when enumerable, otherwise the upper
/// surrogate, keeping the check conservative).
pub fn bound_report(
    model: &GpBanditModel,
    traces: &[RegretTrace],
    delta_draws: usize,
    seed: u64,
) -> Result<BoundReport> {
    if traces.is_empty() {
        return Err(Error::InvalidInput("bound_report needs at least one trace".into()));
    }
    let rounds = traces[0].rounds();
    if traces.iter().any(|tr| tr.rounds() != rounds) {
        return Err(Error::ShapeMismatch("traces must share the same round count".into()));
    }
    let (beta, c_sigma) = bound_ingredients(model);
    let mut delta_rng = substream(seed, &[0xde17a]);
    let (delta_hat, delta_se) = delta_estimate(model, delta_draws, &mut delta_rng)?;

    let gamma_final = max_info_gain(model, rounds)?;
    let mut mean_cum_obs = Vec::with_capacity(rounds);
    let mut se_cum_obs = Vec::with_capacity(rounds);
    let mut mean_cum_true = Vec::with_capacity(rounds);
    let mut se_cum_true = Vec::with_capacity(rounds);
    let mut bound_obs = Vec::with_capacity(rounds);
    let mut bound_true = Vec::with_capacity(rounds);
    let mut satisfied_obs = true;
    let mut satisfied_true = true;
    for t in 0..rounds {
        let (mo, so) = mean_se_at(traces, |tr| tr.cum_obs[t]);
        let (mt, st) = mean_se_at(traces, |tr| tr.cum_true[t]);
        // Conservative by construction: the bound is evaluated with the
        // repetition upper surrogate at every prefix.
        let gamma = max_info_gain_upper(model, t + 1);
        let b_obs = beta * (c_sigma * (t + 1) as f64 * gamma).sqrt();
        let b_true = b_obs + (t + 1) as f64 * delta_hat;
        satisfied_obs &= mo <= b_obs + 2.0 * so;
        satisfied_true &= mt <= b_true + 2.0 * st;
        mean_cum_obs.push(mo);
        se_cum_obs.push(so);
        mean_cum_true.push(mt);
        se_cum_true.push(st);
        bound_obs.push(b_obs);
        bound_true.push(b_true);
    }

    let quartile_start = rounds - rounds / 4;
    let (lq_mean, lq_se) = mean_se_at(traces, |tr| {
        let slice = &tr.regret_true[quartile_start..];
        slice.iter().sum::<f64>() / slice.len() as f64
    });

    Ok(BoundReport {
        rounds,
        episodes: traces.len(),
        beta,
        c_sigma,
        gamma_t: gamma_final.conservative(),
        gamma_is_exact: gamma_final.exact.is_some(),
        delta_hat,
        delta_se,
        mean_cum_obs,
        se_cum_obs,
        mean_cum_true,
        se_cum_true,
        bound_obs,
        bound_true,
        satisfied_obs,
        satisfied_true,
        last_quartile_regret_true: lq_mean,
        last_quartile_se: lq_se,
    })
}

/// Replays Thompson episodes and checks the regret bounds at every prefix.
pub fn verify_bounds(
    model: &GpBanditModel,
    rounds: usize,
    episodes: usize,
    seed: u64,
) -> Result<BoundReport> {
    if episodes < 100 {
        return Err(Error::InvalidInput("verify_bounds needs at least 100 episodes".into()));
    }
    let traces = run_episodes(model, rounds, episodes, Policy::Thompson, seed)?;
    bound_report(model, &traces, 100_000, seed)
}

/// Monte Carlo check of the two maximal-selection inequalities backing the
/// confidence multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionBoundReport {
    /// `E|r_x - mean_x|` at `x = argmax r`.
    pub centered_mean: f64,
    pub centered_se: f64,
    /// `sqrt(E[var_x] * (2 ln(2|X|) + 2))`.
    pub centered_bound: f64,
    /// `E|r_x - r'_x|` for an independent copy `r'`.
    pub pair_mean: f64,
    pub pair_se: f64,
    /// `beta * sqrt(E[var_x])`.
    pub pair_bound: f64,
    /// Both inequalities hold within two standard errors.
    pub holds: bool,
}

/// Verifies that the absolute deviation of a maximal coordinate stays under
/// the log-cardinality bound, and likewise for the gap to an independent
/// copy.
pub fn lemma1_check<R: Rng>(
    model: &GpBanditModel,
    mc_draws: usize,
    rng: &mut R,
) -> Result<SelectionBoundReport> {
    if mc_draws < 2 {
        return Err(Error::InvalidInput("need at least 2 draws".into()));
    }
    let arms = model.arms() as f64;
    let mut centered = Vec::with_capacity(mc_draws);
    let mut pair = Vec::with_capacity(mc_draws);
    let mut var_at_x = Vec::with_capacity(mc_draws);
    let prior_sampler = MvnSampler::new(&model.prior_mean, &model.prior_cov);
    for _ in 0..mc_draws {
        let r = prior_sampler.sample(rng);
        let r_prime = prior_sampler.sample(rng);
        let x = argmax_lowest_tie(&r);
        centered.push((r[x] - model.prior_mean[x]).abs());
        pair.push((r[x] - r_prime[x]).abs());
        var_at_x.push(model.prior_cov[(x, x)]);
    }
    let n = mc_draws as f64;
    let mean_of = |v: &[f64]| v.iter().sum::<f64>() / n;
    let se_of = |v: &[f64], mean: f64| {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) / n).sqrt()
    };
    let centered_mean = mean_of(&centered);
    let centered_se = se_of(&centered, centered_mean);
    let pair_mean = mean_of(&pair);
    let pair_se = se_of(&pair, pair_mean);
    let expected_var = mean_of(&var_at_x);
    let log_term = 2.0 * (2.0 * arms).ln() + 2.0;
    let centered_bound = (expected_var * log_term).sqrt();
    let beta = 1.0 + log_term.sqrt();
    let pair_bound = beta * expected_var.sqrt();
    let holds = centered_mean <= centered_bound + 2.0 * centered_se
        && pair_mean <= pair_bound + 2.0 * pair_se;
    Ok(SelectionBoundReport {
        centered_mean,
        centered_se,
        centered_bound,
        pair_mean,
        pair_se,
        pair_bound,
        holds,
    })
}
