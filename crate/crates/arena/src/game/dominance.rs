//! Brute-force pure-strategy dominance over finite policy spaces.

use std::fmt;

use num_rational::Ratio;
use rayon::prelude::*;

use super::expect::expected_exact;
use super::{GameError, Metric, Scenario};
use crate::agents::{AlicePolicy, BobPolicy, MinerPolicy, StrategyProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Strict,
    Weak,
    None,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Strict => write!(f, "strict"),
            Verdict::Weak => write!(f, "weak"),
            Verdict::None => write!(f, "none"),
        }
    }
}

/// The comparison that decided the verdict: the first violation for
/// `None`, the first tie for `Weak`, the smallest margin for `Strict`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub alternative: usize,
    pub opponent: usize,
    pub candidate_value: Ratio<i128>,
    pub alternative_value: Ratio<i128>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dominance {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
}

/// Compares `candidate` against every other member of `own` under every
/// opponent. Members equal to the candidate are skipped; with no remaining
/// alternative the verdict is strict.
pub fn dominance<S, O, F>(candidate: &S, own: &[S], opponents: &[O], eval: F) -> Result<Dominance, GameError>
where
    S: PartialEq + Sync,
    O: Sync,
    F: Fn(&S, &O) -> Result<Ratio<i128>, GameError> + Sync,
{
    if own.is_empty() || opponents.is_empty() {
        return Err(GameError::EmptySpace);
    }
    let alts: Vec<usize> = (0..own.len()).filter(|&i| own[i] != *candidate).collect();
    let base: Vec<Ratio<i128>> = opponents.par_iter().map(|o| eval(candidate, o)).collect::<Result<_, _>>()?;
    let pairs: Vec<(usize, usize)> = alts.iter().flat_map(|&a| (0..opponents.len()).map(move |o| (a, o))).collect();
    let values: Vec<Ratio<i128>> = pairs.par_iter().map(|&(a, o)| eval(&own[a], &opponents[o])).collect::<Result<_, _>>()?;

    let mut tie = None;
    let mut tightest: Option<Witness> = None;
    for (&(a, o), &v) in pairs.iter().zip(&values) {
        let w = Witness { alternative: a, opponent: o, candidate_value: base[o], alternative_value: v };
        if v > base[o] {
            return Ok(Dominance { verdict: Verdict::None, witness: Some(w) });
        }
        if v == base[o] {
            tie.get_or_insert(w);
        } else if tightest.as_ref().is_none_or(|t| base[o] - v < t.candidate_value - t.alternative_value) {
            tightest = Some(w);
        }
    }
    Ok(match (tie, tightest) {
        (None, t) => Dominance { verdict: Verdict::Strict, witness: t },
        (Some(t), Some(_)) => Dominance { verdict: Verdict::Weak, witness: Some(t) },
        // Equal everywhere: no strict comparison anywhere.
        (Some(t), None) => Dominance { verdict: Verdict::None, witness: Some(t) },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    Alice,
    Bob,
    Miner(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PlayerPolicy {
    Alice(AlicePolicy),
    Bob(BobPolicy),
    Miner(MinerPolicy),
}

impl fmt::Display for PlayerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlayerPolicy::Alice(p) => p.fmt(f),
            PlayerPolicy::Bob(p) => p.fmt(f),
            PlayerPolicy::Miner(p) => p.fmt(f),
        }
    }
}

/// `profile` with `player`'s policy replaced.
pub fn substitute(profile: &StrategyProfile, player: Player, policy: &PlayerPolicy) -> Result<StrategyProfile, GameError> {
    let mut p = profile.clone();
    match (player, policy) {
        (Player::Alice, PlayerPolicy::Alice(a)) => p.alice = *a,
        (Player::Bob, PlayerPolicy::Bob(b)) => p.bob = *b,
        (Player::Miner(i), PlayerPolicy::Miner(m)) if (i as usize) < p.miners.len() => p.miners[i as usize] = m.clone(),
        _ => return Err(GameError::InconsistentProfile(format!("policy {policy} does not fit {player:?}"))),
    }
    Ok(p)
}

/// Dominance of `candidate` for `player` on the exact expectation of `metric`.
pub fn dominance_check(
    scenario: &Scenario,
    player: Player,
    metric: Metric,
    candidate: &PlayerPolicy,
    own_space: &[PlayerPolicy],
    opponents: &[StrategyProfile],
) -> Result<Dominance, GameError> {
    dominance(candidate, own_space, opponents, |s, o| {
        let profile = substitute(o, player, s)?;
        Ok(expected_exact(scenario, &profile)?.get(metric))
    })
}
