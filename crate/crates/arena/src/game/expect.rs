//! Expected figures over miner schedules: an exact rational expectation by
//! dynamic programming over strategic states, and a seeded Monte-Carlo
//! estimate.

use std::collections::HashMap;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{baseline, GameError, Layout, Metric, Mode, Scenario, DEFAULT_CAP};
use crate::agents::StrategyProfile;
use crate::ledger::{ChainState, PartyId, Round, StrategicKey};

/// Exact expected figures, one rational per layout metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactUtilities {
    pub layout: Layout,
    pub values: Vec<Ratio<i128>>,
}

impl ExactUtilities {
    pub fn get(&self, m: Metric) -> Ratio<i128> {
        self.layout.index(m).map_or(Ratio::from_integer(0), |i| self.values[i])
    }

    pub fn utility(&self, p: PartyId) -> Ratio<i128> {
        self.get(Metric::Utility(p))
    }
}

/// Sample means with normal-approximation 95% half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct McUtilities {
    pub layout: Layout,
    pub trials: u64,
    pub mean: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl McUtilities {
    pub fn get(&self, m: Metric) -> (f64, f64) {
        self.layout.index(m).map_or((0.0, 0.0), |i| (self.mean[i], self.half_width[i]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UtilityVector {
    Exact(ExactUtilities),
    MonteCarlo(McUtilities),
}

/// Expectation in the scenario's configured mode.
pub fn expected_utilities(scenario: &Scenario, profile: &StrategyProfile) -> Result<UtilityVector, GameError> {
    match scenario.mode {
        Mode::Exact => expected_exact(scenario, profile).map(UtilityVector::Exact),
        Mode::MonteCarlo { trials } => expected_mc(scenario, profile, trials).map(UtilityVector::MonteCarlo),
    }
}

pub fn expected_exact(scenario: &Scenario, profile: &StrategyProfile) -> Result<ExactUtilities, GameError> {
    expected_exact_capped(scenario, profile, DEFAULT_CAP)
}

/// Exact expectation, refusing scenarios with more than `cap` schedules.
pub fn expected_exact_capped(scenario: &Scenario, profile: &StrategyProfile, cap: u128) -> Result<ExactUtilities, GameError> {
    scenario.validate()?;
    let count = scenario.schedule_count();
    if count > cap {
        return Err(GameError::EnumerationCap { count, cap });
    }
    let layout = Layout::for_scenario(scenario);
    let genesis = scenario.genesis(profile)?;
    let (weights, denom) = scenario.integer_weights();
    let horizon = scenario.timing.horizon;
    let mut dp = Dp { scenario, profile, layout: &layout, weights, denom: denom as i128, memo: HashMap::new() };
    let numer = dp.value(&genesis, 1)?;
    let scale = pow(denom as i128, horizon)?;
    let base = baseline(scenario, &layout);
    let start = layout.read(&genesis);
    let values = numer
        .iter()
        .zip(start.iter().zip(&base))
        .map(|(&n, (&s, &b))| Ratio::new(n, scale) + Ratio::from_integer(s - b))
        .collect();
    Ok(ExactUtilities { layout, values })
}

fn pow(base: i128, exp: Round) -> Result<i128, GameError> {
    let exp = u32::try_from(exp).map_err(|_| GameError::Overflow)?;
    base.checked_pow(exp).ok_or(GameError::Overflow)
}

struct Dp<'a> {
    scenario: &'a Scenario,
    profile: &'a StrategyProfile,
    layout: &'a Layout,
    weights: Vec<u64>,
    denom: i128,
    memo: HashMap<(Round, StrategicKey), Vec<i128>>,
}

impl Dp<'_> {
    /// Numerators of the expected remaining increments from `round` on,
    /// over the denominator `D^(horizon - round + 1)`.
    fn value(&mut self, state: &ChainState, round: Round) -> Result<Vec<i128>, GameError> {
        let horizon = self.scenario.timing.horizon;
        let width = self.layout.metrics.len();
        if round > horizon {
            return Ok(vec![0; width]);
        }
        let key = (round, state.strategic_key());
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let choices: Vec<(u8, i128)> = match self.scenario.forced.get(&round) {
            Some(&m) => vec![(m, self.denom)],
            None => self.weights.iter().enumerate().map(|(i, &w)| (i as u8, w as i128)).collect(),
        };
        let scale = pow(self.denom, horizon - round)?;
        let here = self.layout.read(state);
        let mut acc = vec![0i128; width];
        for (m, w) in choices {
            let next = self.scenario.advance(self.profile, state, round, m)?;
            let later = self.value(&next, round + 1)?;
            let there = self.layout.read(&next);
            for i in 0..width {
                let delta = there[i].checked_sub(here[i]).ok_or(GameError::Overflow)?;
                let term = delta
                    .checked_mul(scale)
                    .and_then(|x| x.checked_add(later[i]))
                    .and_then(|x| x.checked_mul(w))
                    .ok_or(GameError::Overflow)?;
                acc[i] = acc[i].checked_add(term).ok_or(GameError::Overflow)?;
            }
        }
        self.memo.insert(key, acc.clone());
        Ok(acc)
    }
}

/// Generator for one trial: the scenario seed with the trial index as stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws a schedule, honouring forced rounds.
pub fn sample_schedule(scenario: &Scenario, rng: &mut impl Rng) -> Vec<u8> {
    let (weights, denom) = scenario.integer_weights();
    (1..=scenario.timing.horizon)
        .map(|round| {
            if let Some(&m) = scenario.forced.get(&round) {
                return m;
            }
            let mut x = rng.random_range(0..denom);
            for (i, &w) in weights.iter().enumerate() {
                if x < w {
                    return i as u8;
                }
                x -= w;
            }
            unreachable!("weights sum to the denominator")
        })
        .collect()
}

/// Runs `trials` seeded games in parallel; results come back in trial order.
pub fn run_trials<T: Send>(
    scenario: &Scenario,
    trials: u64,
    f: impl Fn(u64, &mut ChaCha8Rng) -> Result<T, GameError> + Sync,
) -> Result<Vec<T>, GameError> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(scenario.seed, i);
            f(i, &mut rng)
        })
        .collect()
}

/// Mean and 95% half-width of a sample, summed in index order.
pub fn mean_half_width(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

pub fn expected_mc(scenario: &Scenario, profile: &StrategyProfile, trials: u64) -> Result<McUtilities, GameError> {
    scenario.validate()?;
    if trials == 0 {
        return Err(GameError::InvalidScenario("monte-carlo needs at least one trial".into()));
    }
    let layout = Layout::for_scenario(scenario);
    let genesis = scenario.genesis(profile)?;
    let base = baseline(scenario, &layout);
    let rows = run_trials(scenario, trials, |_, rng| {
        let schedule = sample_schedule(scenario, rng);
        let mut state = genesis.clone();
        for (i, &m) in schedule.iter().enumerate() {
            state = scenario.advance(profile, &state, i as Round + 1, m)?;
        }
        Ok(layout.read(&state).into_iter().zip(&base).map(|(v, b)| (v - b) as f64).collect::<Vec<_>>())
    })?;
    let (mut mean, mut half_width) = (Vec::new(), Vec::new());
    for i in 0..layout.metrics.len() {
        let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        let (m, h) = mean_half_width(&col);
        mean.push(m);
        half_width.push(h);
    }
    Ok(McUtilities { layout, trials, mean, half_width })
}
