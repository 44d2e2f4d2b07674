//! Solo versus pooled mining: exact moments, the risk-averse utility
//! approximation, and a Poisson Monte Carlo of both payouts.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct PoolParams {
    pub hash_rate: u64,
    pub network_hash_rate: u64,
    pub pool_size: u64,
    pub reward: u64,
    /// Share of the solo expectation kept by the pool operator.
    #[serde(with = "crate::runner::scenario::decimal")]
    pub fee: Ratio<u64>,
    /// Blocks found by the whole network per period.
    #[serde(with = "crate::runner::scenario::decimal")]
    pub network_rate: Ratio<u64>,
    #[serde(with = "crate::runner::scenario::decimal")]
    pub risk_aversion: Ratio<u64>,
}

impl PoolParams {
    pub fn example(pool_size: u64, fee: Ratio<u64>) -> Self {
        PoolParams {
            hash_rate: 1,
            network_hash_rate: 10,
            pool_size,
            reward: 1,
            fee,
            network_rate: Ratio::from_integer(100),
            risk_aversion: Ratio::from_integer(1),
        }
    }

    pub fn validate(&self) -> Result<(), PoolError> {
        if self.hash_rate == 0 || self.hash_rate > self.network_hash_rate {
            return Err(PoolError::HashRate);
        }
        if self.pool_size == 0 {
            return Err(PoolError::EmptyPool);
        }
        if self.fee >= Ratio::from_integer(1) {
            return Err(PoolError::Fee);
        }
        if self.risk_aversion.is_zero() {
            return Err(PoolError::RiskAversion);
        }
        Ok(())
    }

    /// The miner's own block rate.
    pub fn own_rate(&self) -> Ratio<u64> {
        Ratio::new(self.hash_rate, self.network_hash_rate) * self.network_rate
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("hash rate must satisfy 0 < h <= H")]
    HashRate,
    #[error("pool size must be at least 1")]
    EmptyPool,
    #[error("pool fee must be below 1")]
    Fee,
    #[error("risk aversion must be positive")]
    RiskAversion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolReport {
    pub solo_mean: Ratio<u64>,
    pub pool_mean: Ratio<u64>,
    /// Solo over pooled expectation.
    pub ratio: Ratio<u64>,
    pub solo_var: Ratio<u64>,
    pub pool_var: Ratio<u64>,
    /// Pooled minus solo expected utility, second-order approximation.
    pub utility_gain: f64,
    pub solo_utility: f64,
    pub pool_utility: f64,
}

fn f(r: Ratio<u64>) -> f64 {
    r.to_f64().expect("finite ratio")
}

/// Exponential utility approximated to second order around the mean.
fn approx_utility(alpha: f64, mean: f64, var: f64) -> f64 {
    -(-alpha * mean).exp() * (1.0 + alpha * alpha * var / 2.0)
}

pub fn pool_math(p: &PoolParams) -> Result<PoolReport, PoolError> {
    p.validate()?;
    let reward = Ratio::from_integer(p.reward);
    let solo_mean = p.own_rate() * reward;
    let keep = Ratio::from_integer(1) - p.fee;
    let pool_mean = keep * solo_mean;
    let solo_var = p.own_rate() * reward * reward;
    let pool_var = solo_var / Ratio::from_integer(p.pool_size);
    let (a, e, v, n) = (f(p.risk_aversion), f(solo_mean), f(solo_var), p.pool_size as f64);
    let utility_gain = -(-a * e).exp() * (a * f(p.fee) * e - a * a * v / 2.0 + a * a * v / (2.0 * n));
    Ok(PoolReport {
        solo_mean,
        pool_mean,
        ratio: keep.recip(),
        solo_var,
        pool_var,
        utility_gain,
        solo_utility: approx_utility(a, e, v),
        pool_utility: approx_utility(a, f(pool_mean), f(pool_var)),
    })
}

/// Sample moments with standard errors for the mean and the variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
    pub mean_se: f64,
    pub var_se: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        Moments { mean, var, mean_se: (var / n).sqrt(), var_se: ((m4 - var * var).max(0.0) / n).sqrt() }
    }

    /// Whether `mean` and `var` lie within `k` standard errors.
    pub fn matches(&self, mean: f64, var: f64, k: f64) -> bool {
        (self.mean - mean).abs() <= k * self.mean_se.max(1e-12) && (self.var - var).abs() <= k * self.var_se.max(1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolSample {
    pub solo: Moments,
    pub pool: Moments,
}

/// Poisson block counts per period. Solo pays `count·R`; the pool pays an
/// equal share of the members' blocks minus the fixed operator fee.
pub fn pool_mc(p: &PoolParams, trials: u64, seed: u64) -> Result<PoolSample, PoolError> {
    p.validate()?;
    let rate = f(p.own_rate());
    let (reward, n) = (p.reward as f64, p.pool_size as f64);
    let fee = f(p.fee) * rate * reward;
    let draws: Vec<(f64, f64)> = (0..trials.max(1))
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            if rate == 0.0 {
                return (0.0, 0.0);
            }
            let solo = Poisson::new(rate).expect("positive rate").sample(&mut rng);
            let pooled = Poisson::new(rate * n).expect("positive rate").sample(&mut rng);
            (solo * reward, pooled * reward / n - fee)
        })
        .collect();
    let (solo, pool): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    Ok(PoolSample { solo: Moments::of(&solo), pool: Moments::of(&pool) })
}
