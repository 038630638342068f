//! Oracle comparisons for the bandit machinery: the sequential posterior
//! against one-shot joint Gaussian conditioning, and information gain
//! against its log-determinant form.

use nalgebra::{DMatrix, DVector};
use passlab_core::bandit::{
    info_gain, info_gain_logdet, max_info_gain, max_info_gain_upper, posterior, run_episodes,
    sample_obs_optimum, GpBanditModel, History, Policy,
};
use passlab_core::stream::substream;
use proptest::prelude::*;
use rand::Rng;

/// Standard normal CDF via the Abramowitz-Stegun erf approximation
/// (absolute error below 1.5e-7), enough for 3-sigma Monte Carlo bands.
fn norm_cdf(x: f64) -> f64 {
    let t = x / std::f64::consts::SQRT_2;
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    let a = t.abs();
    let u = 1.0 / (1.0 + 0.3275911 * a);
    let poly = u
        * (0.254829592 + u * (-0.284496736 + u * (1.421413741 + u * (-1.453152027 + u * 1.061405429))));
    let erf = sign * (1.0 - poly * (-a * a).exp());
    0.5 * (1.0 + erf)
}

/// Simpson quadrature of P[argmax_i (r_i + h_i) = target] for independent
/// zero-mean Gaussian h with per-arm standard deviations.
fn argmax_probability(r: &[f64], sds: &[f64], target: usize) -> f64 {
    let d = sds[target];
    let (lo, hi) = (-8.0 * d, 8.0 * d);
    let steps = 4000usize;
    let h = (hi - lo) / steps as f64;
    let integrand = |x: f64| {
        let density = (-x * x / (2.0 * d * d)).exp() / (d * (2.0 * std::f64::consts::PI).sqrt());
        let mut p = density;
        for j in 0..r.len() {
            if j != target {
                p *= norm_cdf((r[target] + x - r[j]) / sds[j]);
            }
        }
        p
    };
    let mut total = integrand(lo) + integrand(hi);
    for k in 1..steps {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        total += w * integrand(lo + k as f64 * h);
    }
    total * h / 3.0
}

#[test]
fn obs_optimum_frequencies_match_quadrature_oracle() {
    let sds = [0.5f64, 0.3, 0.4];
    let hid_cov: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| if i == j { sds[i] * sds[i] } else { 0.0 }).collect())
        .collect();
    let model = GpBanditModel::new(
        vec![0.0; 3],
        vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ],
        vec![0.0; 3],
        hid_cov,
        vec![0.5; 3],
    )
    .unwrap();
    let r_obs = DVector::from_vec(vec![0.3, 0.0, -0.2]);

    let draws = 100_000usize;
    let mut counts = [0usize; 3];
    let mut rng = substream(0xab5, &[0]);
    for _ in 0..draws {
        counts[sample_obs_optimum(&model, &r_obs, &mut rng).unwrap()] += 1;
    }
    for target in 0..3 {
        let expected = argmax_probability(r_obs.as_slice(), &sds, target);
        let freq = counts[target] as f64 / draws as f64;
        let band = 3.0 * (expected * (1.0 - expected) / draws as f64).sqrt() + 1e-4;
        assert!(
            (freq - expected).abs() < band,
            "arm {target}: frequency {freq:.4} vs quadrature {expected:.4}"
        );
    }
}

#[test]
fn gamma_surrogate_is_nonnegative_and_nondecreasing() {
    let model = GpBanditModel::line_graph(6, 2.0, 0.5, 0.0).unwrap();
    let mut last = 0.0;
    for t in 0..20 {
        let g = max_info_gain_upper(&model, t);
        assert!(g >= last, "gamma upper dropped at t = {t}");
        last = g;
    }
}

#[test]
fn thompson_regret_curve_decreases() {
    // Reference smooth 8-arm model, no hidden part: the mean per-round
    // regret at the final round must be strictly below the midpoint's.
    let model = GpBanditModel::line_graph(8, 6.0, 0.5, 0.0).unwrap();
    let rounds = 50;
    let traces = run_episodes(&model, rounds, 200, Policy::Thompson, 0xcafe).unwrap();
    let mean_at = |t: usize| {
        traces.iter().map(|tr| tr.regret_true[t]).sum::<f64>() / traces.len() as f64
    };
    let mid = mean_at(rounds / 2 - 1);
    let last = mean_at(rounds - 1);
    assert!(last < mid, "late regret {last:.4} should be below midpoint {mid:.4}");
}

/// Joint conditioning in one block solve: the independent route against
/// which the sequential scalar updates are checked.
fn joint_posterior(model: &GpBanditModel, history: &History) -> (DVector<f64>, DMatrix<f64>) {
    let arms = model.arms();
    let t = history.len();
    if t == 0 {
        return (model.prior_mean().clone(), model.prior_cov().clone());
    }
    let sigma = model.prior_cov();
    let mut obs_cov = DMatrix::zeros(t, t);
    let mut cross = DMatrix::zeros(arms, t);
    let mut innovations = DVector::zeros(t);
    for (a, &(xa, ya)) in history.steps.iter().enumerate() {
        for (b, &(xb, _)) in history.steps.iter().enumerate() {
            obs_cov[(a, b)] = sigma[(xa, xb)];
        }
        obs_cov[(a, a)] += model.noise_sd()[xa] * model.noise_sd()[xa];
        for i in 0..arms {
            cross[(i, a)] = sigma[(i, xa)];
        }
        innovations[a] = ya - model.prior_mean()[xa];
    }
    let inv = obs_cov.try_inverse().expect("noise keeps the system invertible");
    let gain = &cross * inv;
    let mean = model.prior_mean() + &gain * innovations;
    let cov = sigma - gain * cross.transpose();
    (mean, cov)
}

fn random_model(seed: u64, arms: usize) -> GpBanditModel {
    let mut rng = substream(seed, &[0x90de1]);
    let lengthscale = 0.8 + 3.0 * rng.random::<f64>();
    let noise: Vec<f64> = (0..arms).map(|_| 0.1 + rng.random::<f64>()).collect();
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
    let zeros = vec![0.0; arms];
    let zero_cov = vec![vec![0.0; arms]; arms];
    GpBanditModel::new(zeros.clone(), cov, zeros, zero_cov, noise).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sequential_posterior_matches_joint_conditioning(
        seed in 0u64..1_000_000,
        arms in 2usize..7,
        steps in 0usize..12,
    ) {
        let model = random_model(seed, arms);
        let mut rng = substream(seed, &[0x415]);
        let mut history = History::new();
        for _ in 0..steps {
            history.push(rng.random_range(0..arms), 2.0 * rng.random::<f64>() - 1.0);
        }
        let (seq_mean, seq_cov) = posterior(&model, &history).unwrap();
        let (joint_mean, joint_cov) = joint_posterior(&model, &history);
        for i in 0..arms {
            prop_assert!(
                (seq_mean[i] - joint_mean[i]).abs() < 1e-8,
                "mean[{i}]: {} vs {}", seq_mean[i], joint_mean[i]
            );
            for j in 0..arms {
                prop_assert!(
                    (seq_cov[(i, j)] - joint_cov[(i, j)]).abs() < 1e-8,
                    "cov[{i},{j}]: {} vs {}", seq_cov[(i, j)], joint_cov[(i, j)]
                );
            }
        }
        // Posterior covariance stays symmetric PSD.
        let min_eig = seq_cov
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        prop_assert!(min_eig >= -1e-8, "min eigenvalue {min_eig}");
    }

    #[test]
    fn info_gain_nonneg_additive_and_permutation_bounded(
        seed in 0u64..1_000_000,
        arms in 2usize..6,
        steps in 1usize..10,
    ) {
        let model = random_model(seed, arms);
        let mut rng = substream(seed, &[0x416]);
        let seq: Vec<usize> = (0..steps).map(|_| rng.random_range(0..arms)).collect();

        let total = info_gain(&model, &seq).unwrap();
        prop_assert!(total >= 0.0);

        // Matches the log-determinant route.
        let det = info_gain_logdet(&model, &seq).unwrap();
        prop_assert!((total - det).abs() < 1e-9, "{total} vs {det}");

        // Invariant under permutation: sorted order gives the same value.
        let mut sorted = seq.clone();
        sorted.sort_unstable();
        let sorted_gain = info_gain(&model, &sorted).unwrap();
        prop_assert!((total - sorted_gain).abs() < 1e-9);

        // Additive over the sequence: prefix gain plus conditional remainder
        // never exceeds the total (monotone accumulation).
        let prefix = info_gain(&model, &seq[..steps / 2]).unwrap();
        prop_assert!(prefix <= total + 1e-12);
    }

    #[test]
    fn gamma_brackets_on_enumerable_instances(
        seed in 0u64..1_000_000,
        arms in 2usize..5,
        t in 1usize..5,
    ) {
        let model = random_model(seed, arms);
        let g = max_info_gain(&model, t).unwrap();
        let exact = g.exact.expect("small instances are enumerable");
        prop_assert!(g.greedy <= exact + 1e-9);
        prop_assert!(exact <= g.upper + 1e-9);
        prop_assert!((max_info_gain_upper(&model, t) - g.upper).abs() < 1e-12);

        // Every explicit sequence is dominated by the enumerated maximum.
        let mut rng = substream(seed, &[0x417]);
        for _ in 0..8 {
            let seq: Vec<usize> = (0..t).map(|_| rng.random_range(0..arms)).collect();
            let gain = info_gain(&model, &seq).unwrap();
            prop_assert!(gain <= exact + 1e-9);
        }
    }
}
