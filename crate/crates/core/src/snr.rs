//! Signal-to-noise diagnostics for smooth vs sharp agreement estimators.
//!
//! Let `Z` be the per-suite agreement score of a fixed pair of programs, with
//! known atom distribution on `[0, 1]`, mean `mu`, and all-agree mass
//! `p1 = P[Z = 1]`. Averaging `m` draws gives the smooth estimator with
//! `SNR = m * mu^2 / Var(Z)`; demanding all `m` draws equal one gives the
//! sharp estimator, a Bernoulli with parameter `p1^m` and
//! `SNR = p1^m / (1 - p1^m)`. The ratio of the two is bounded below by
//! `m * (1/mu)^(m-1) * (1 - mu^m) / (1 - mu)`, which itself is at least
//! `m^2` — the sharp estimator pays at least a quadratic SNR penalty in the
//! number of suites.
//!
//! The closed forms are statements about true moments, so the primary
//! verification path here is exact rational arithmetic on the atom list;
//! resampling ([`snr_empirical`]) is a secondary sanity layer.

use std::io::Write;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{normalized_weights, ratio_from_f64, ratio_pow, ratio_to_f64};

/// A known finite score distribution on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct ScoreDistribution {
    atoms: Vec<(BigRational, BigRational)>,
    atoms_f64: Vec<(f64, f64)>,
    mu: BigRational,
    p1: BigRational,
}

impl ScoreDistribution {
    /// Builds a distribution from `(score, probability)` atoms. Scores must
    /// lie in `[0, 1]`; probabilities are exactly renormalized.
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput("score distribution must be nonempty".into()));
        }
        for &(score, _) in atoms {
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::InvalidInput(format!("score {score} outside [0, 1]")));
            }
        }
        let probs: Vec<f64> = atoms.iter().map(|&(_, p)| p).collect();
        let probs = normalized_weights(&probs, 1e-12)?;
        let exact: Vec<(BigRational, BigRational)> = atoms
            .iter()
            .zip(probs)
            .map(|(&(score, _), p)| Ok((ratio_from_f64(score)?, p)))
            .collect::<Result<_>>()?;
        let mu: BigRational = exact.iter().map(|(s, p)| s * p).sum();
        let p1: BigRational =
            exact.iter().filter(|(s, _)| s.is_one()).map(|(_, p)| p.clone()).sum();
        let atoms_f64 =
            exact.iter().map(|(s, p)| (ratio_to_f64(s), ratio_to_f64(p))).collect();
        Ok(ScoreDistribution { atoms: exact, atoms_f64, mu, p1 })
    }

    pub fn mu(&self) -> f64 {
        ratio_to_f64(&self.mu)
    }

    pub fn p1(&self) -> f64 {
        ratio_to_f64(&self.p1)
    }

    pub fn mu_rational(&self) -> &BigRational {
        &self.mu
    }

    pub fn p1_rational(&self) -> &BigRational {
        &self.p1
    }

    /// Exact `Var(Z) = E[Z^2] - mu^2`.
    pub fn variance_rational(&self) -> BigRational {
        let second: BigRational = self.atoms.iter().map(|(s, p)| s * s * p).sum();
        second - &self.mu * &self.mu
    }

    /// Inverse-CDF draw of one score.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u = rng.random::<f64>();
        let mut acc = 0.0;
        for &(score, p) in &self.atoms_f64 {
            acc += p;
            if u < acc {
                return score;
            }
        }
        self.atoms_f64.last().expect("nonempty atoms").0
    }
}

/// SNR comparison of the smooth and sharp estimators at a given suite count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub mu: f64,
    pub p1: f64,
    pub m: u32,
    /// `m * mu^2 / Var(Z)`.
    pub snr_smooth: f64,
    /// `p1^m / (1 - p1^m)`, the tight form using the true all-agree mass.
    pub snr_sharp: f64,
    /// `mu^m / (1 - mu^m)`, the conservative form substituting `p1 <= mu`.
    pub snr_sharp_mu: f64,
    /// `snr_smooth / snr_sharp`.
    pub ratio: f64,
    /// `m * (1/mu)^(m-1) * (1 - mu^m) / (1 - mu)`.
    pub lower_bound_mu_dependent: f64,
    /// `m^2`.
    pub lower_bound_uniform: f64,
    /// Whether `ratio >= lower_bound_mu_dependent >= m^2` held in exact
    /// arithmetic (always false for the resampled variant).
    pub exact_dominance: bool,
}

fn lower_bound_rational(mu: &BigRational, m: u32) -> BigRational {
    let one = BigRational::one();
    let m_ratio = BigRational::new(BigInt::from(m as i64), BigInt::from(1));
    let inv_mu_pow = ratio_pow(&(one.clone() / mu), m - 1);
    m_ratio * inv_mu_pow * (one.clone() - ratio_pow(mu, m)) / (one - mu)
}

fn require_m(m: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidInput("suite count m must be at least 1".into()));
    }
    Ok(())
}

/// Closed-form SNR report from the atom list.
///
/// Rejects the boundary cases the comparison excludes: `mu` outside `(0, 1)`,
/// zero variance, or `p1` in `{0, 1}`.
pub fn snr_exact(dist: &ScoreDistribution, m: u32) -> Result<SnrReport> {
    require_m(m)?;
    let zero = BigRational::zero();
    let one = BigRational::one();
    let mu = dist.mu_rational().clone();
    if mu <= zero || mu >= one {
        return Err(Error::DegenerateDistribution(format!("mu = {} not in (0, 1)", dist.mu())));
    }
    let var = dist.variance_rational();
    if var.is_zero() {
        return Err(Error::DegenerateDistribution("Var(Z) = 0".into()));
    }
    let p1 = dist.p1_rational().clone();
    if p1.is_zero() || p1.is_one() {
        return Err(Error::DegenerateDistribution(format!("p1 = {} in {{0, 1}}", dist.p1())));
    }

    let m_ratio = BigRational::new(BigInt::from(m as i64), BigInt::from(1));
    let snr_smooth = &m_ratio * &mu * &mu / &var;
    let p1m = ratio_pow(&p1, m);
    let snr_sharp = &p1m / (one.clone() - &p1m);
    let mum = ratio_pow(&mu, m);
    let snr_sharp_mu = &mum / (one.clone() - &mum);
    let ratio = &snr_smooth / &snr_sharp;
    let bound_mu = lower_bound_rational(&mu, m);
    let bound_m2 = &m_ratio * &m_ratio;
    let exact_dominance = ratio >= bound_mu && bound_mu >= bound_m2;

    Ok(SnrReport {
        mu: dist.mu(),
        p1: dist.p1(),
        m,
        snr_smooth: ratio_to_f64(&snr_smooth),
        snr_sharp: ratio_to_f64(&snr_sharp),
        snr_sharp_mu: ratio_to_f64(&snr_sharp_mu),
        ratio: ratio_to_f64(&ratio),
        lower_bound_mu_dependent: ratio_to_f64(&bound_mu),
        lower_bound_uniform: (m as f64) * (m as f64),
        exact_dominance,
    })
}

/// The mu-dependent SNR dominance floor, `m (1/mu)^(m-1) (1 - mu^m)/(1 - mu)`.
pub fn snr_lower_bound(mu: f64, m: u32) -> Result<f64> {
    require_m(m)?;
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidInput(format!("mu = {mu} not in (0, 1)")));
    }
    Ok(ratio_to_f64(&lower_bound_rational(&ratio_from_f64(mu)?, m)))
}

fn empirical_snr(values: &[f64]) -> Result<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(Error::DegenerateDistribution(
            "empirical estimator variance is zero; increase replicates".into(),
        ));
    }
    Ok(mean * mean / var)
}

/// Resampled SNR report: both estimators are recomputed from the same
/// replicate draws, so at `m = 1` on a {0,1}-valued score they coincide
/// exactly.
pub fn snr_empirical<R: Rng>(
    dist: &ScoreDistribution,
    m: u32,
    replicates: usize,
    rng: &mut R,
) -> Result<SnrReport> {
    require_m(m)?;
    if replicates < 2 {
        return Err(Error::InvalidInput("need at least 2 replicates".into()));
    }
    let mut smooth = Vec::with_capacity(replicates);
    let mut sharp = Vec::with_capacity(replicates);
    let mut score_sum = 0.0;
    let mut ones = 0usize;
    for _ in 0..replicates {
        let mut total = 0.0;
        let mut all_one = true;
        for _ in 0..m {
            let z = dist.sample(rng);
            total += z;
            score_sum += z;
            if z == 1.0 {
                ones += 1;
            } else {
                all_one = false;
            }
        }
        smooth.push(total / m as f64);
        sharp.push(if all_one { 1.0 } else { 0.0 });
    }
    let draws = (replicates * m as usize) as f64;
    let mu_hat = score_sum / draws;
    let p1_hat = ones as f64 / draws;
    let snr_smooth = empirical_snr(&smooth)?;
    let snr_sharp = empirical_snr(&sharp)?;
    let in_open_unit = mu_hat > 0.0 && mu_hat < 1.0;
    let bound_mu = if in_open_unit { snr_lower_bound(mu_hat, m)? } else { f64::INFINITY };
    let mum = mu_hat.powi(m as i32);
    let snr_sharp_mu = if in_open_unit { mum / (1.0 - mum) } else { f64::INFINITY };
    Ok(SnrReport {
        mu: mu_hat,
        p1: p1_hat,
        m,
        snr_smooth,
        snr_sharp,
        snr_sharp_mu,
        ratio: snr_smooth / snr_sharp,
        lower_bound_mu_dependent: bound_mu,
        lower_bound_uniform: (m as f64) * (m as f64),
        exact_dominance: false,
    })
}

/// Outcome of a power-of-mean bias probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenProbe {
    /// Empirical `E[(mean of m draws)^s]`.
    pub empirical_mean: f64,
    /// `mu^s`.
    pub true_power: f64,
    /// Standard error of the empirical mean.
    pub se: f64,
}

/// Estimates the upward bias of powering a sample mean: for `s > 1`,
/// `E[Zbar^s] >= mu^s`, with the gap shrinking as `m` grows.
pub fn jensen_bias_probe<R: Rng>(
    dist: &ScoreDistribution,
    m: u32,
    s: u32,
    replicates: usize,
    rng: &mut R,
) -> Result<JensenProbe> {
    require_m(m)?;
    if s == 0 {
        return Err(Error::InvalidInput("exponent s must be at least 1".into()));
    }
    if replicates < 2 {
        return Err(Error::InvalidInput("need at least 2 replicates".into()));
    }
    let mut values = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let mean = (0..m).map(|_| dist.sample(rng)).sum::<f64>() / m as f64;
        values.push(mean.powi(s as i32));
    }
    let n = replicates as f64;
    let empirical_mean = values.iter().sum::<f64>() / n;
    let var =
        values.iter().map(|v| (v - empirical_mean) * (v - empirical_mean)).sum::<f64>() / (n - 1.0);
    Ok(JensenProbe {
        empirical_mean,
        true_power: ratio_to_f64(&ratio_pow(dist.mu_rational(), s)),
        se: (var / n).sqrt(),
    })
}

/// Column order of the SNR CSV schema.
pub const SNR_CSV_HEADER: [&str; 8] =
    ["mu", "p1", "m", "snr_smooth", "snr_sharp", "ratio", "bound_mu", "bound_m2"];

/// Writes the header row of the SNR CSV schema.
pub fn write_snr_csv_header<W: Write>(w: &mut csv::Writer<W>) -> Result<()> {
    w.write_record(SNR_CSV_HEADER)?;
    Ok(())
}

/// Appends one report row under [`SNR_CSV_HEADER`].
pub fn append_snr_csv_row<W: Write>(w: &mut csv::Writer<W>, report: &SnrReport) -> Result<()> {
    w.write_record([
        report.mu.to_string(),
        report.p1.to_string(),
        report.m.to_string(),
        report.snr_smooth.to_string(),
        report.snr_sharp.to_string(),
        report.ratio.to_string(),
        report.lower_bound_mu_dependent.to_string(),
        report.lower_bound_uniform.to_string(),
    ])?;
    Ok(())
}
