//! Rounds until a protocol run completes, sampled over miner schedules.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::Zero;
use serde::Deserialize;
use thiserror::Error;

use crate::agents::{AlicePolicy, BobPolicy, MinerPolicy, StrategyProfile};
use crate::contracts::fees::FeeSchedule;
use crate::contracts::Status;
use crate::game::expect::{mean_half_width, run_trials, sample_schedule};
use crate::game::{GameError, MinerProfile, Protocol, Scenario};
use crate::ledger::{ContractId, Round, Tokens};

/// Rounds after the last timelock in which a lagging miner may still delay
/// inclusion; runs unresolved by then count as the horizon plus one.
pub const SLACK: Round = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TtcPath {
    AliceRedeems,
    BobCollateral,
    BobBoth,
}

impl fmt::Display for TtcPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TtcPath::AliceRedeems => "alice-redeems",
            TtcPath::BobCollateral => "bob-collateral",
            TtcPath::BobBoth => "bob-both",
        })
    }
}

impl FromStr for TtcPath {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [TtcPath::AliceRedeems, TtcPath::BobCollateral, TtcPath::BobBoth]
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| format!("unknown path `{s}`"))
    }
}

fn default_deadline() -> Round {
    5
}

fn default_lag() -> Ratio<u64> {
    Ratio::new(1, 4)
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtcSpec {
    pub variant: Protocol,
    pub path: TtcPath,
    pub deposit: u64,
    pub collateral: u64,
    /// Fee of every redemption; also the `f` of the refund-delay rule.
    #[serde(default)]
    pub fee: u64,
    #[serde(default = "default_deadline")]
    pub deadline: Round,
    /// Power of a miner that censors every redemption until the horizon.
    #[serde(default = "default_lag", with = "crate::runner::scenario::decimal")]
    pub lagging_power: Ratio<u64>,
}

#[derive(Debug, Error)]
pub enum TtcError {
    #[error("path {path} is not defined for {variant}")]
    InvalidPath { variant: Protocol, path: TtcPath },
    #[error("the naive protocol has no completion-time model")]
    Naive,
    #[error("collateral must exceed the fee for the refund-delay rule")]
    CollateralBelowFee,
    #[error("lagging power must be below 1")]
    LaggingPower,
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Smallest refund delay `l` with `collateral >= deposit/(l - 1) + fee`.
pub fn refund_delay_for(deposit: u64, collateral: u64, fee: u64) -> Result<Round, TtcError> {
    if collateral <= fee {
        return Err(TtcError::CollateralBelowFee);
    }
    let margin = collateral - fee;
    Ok(deposit.div_ceil(margin) + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtcReport {
    pub refund_delay: Round,
    pub mean: f64,
    pub half_width: f64,
    /// Trials still unresolved at the horizon.
    pub unresolved: u64,
    pub trials: u64,
}

/// Contracts whose resolution ends the path.
fn watched(variant: Protocol, path: TtcPath) -> Result<Vec<ContractId>, TtcError> {
    use ContractId::*;
    Ok(match (variant, path) {
        (Protocol::Naive, _) => return Err(TtcError::Naive),
        (Protocol::Mad | Protocol::He, TtcPath::AliceRedeems) => vec![Deposit],
        (Protocol::Mad, TtcPath::BobCollateral) => vec![Collateral],
        (Protocol::He, TtcPath::BobCollateral) => return Err(TtcError::InvalidPath { variant, path }),
        (Protocol::Mad | Protocol::He, TtcPath::BobBoth) => vec![Deposit, Collateral],
        (Protocol::Demba, TtcPath::AliceRedeems) => vec![Deposit, AliceCollateral],
        (Protocol::Demba, TtcPath::BobCollateral) => vec![BobCollateral],
        (Protocol::Demba, TtcPath::BobBoth) => vec![Deposit, BobCollateral],
    })
}

/// The scenario, profile and watched contracts for one `TtcSpec`.
pub fn ttc_setup(spec: &TtcSpec, seed: u64) -> Result<(Scenario, StrategyProfile, Vec<ContractId>), TtcError> {
    let watch = watched(spec.variant, spec.path)?;
    if spec.lagging_power >= Ratio::from_integer(1) {
        return Err(TtcError::LaggingPower);
    }
    let mut s = Scenario::new(spec.variant);
    s.seed = seed;
    s.timing.deadline = spec.deadline;
    s.timing.publish = 1;
    s.amounts.deposit = Tokens(spec.deposit);
    let fee = Tokens(spec.fee);
    match spec.variant {
        Protocol::Demba => {
            s.amounts.alice_collateral = Tokens(spec.collateral);
            s.amounts.bob_collateral = Tokens(spec.collateral);
            s.amounts.deduction = Tokens(1);
            let paid = [fee.0 + 1, fee.0 + 2, fee.0 + 3, fee.0 + 1].map(Tokens);
            s.fees.schedule = Some(FeeSchedule::with_default_bases(paid, Ratio::new(1, 2), spec.deadline));
        }
        _ => {
            s.amounts.collateral = Tokens(spec.collateral);
            s.fees.alice_deposit = fee;
            s.fees.bob_deposit = fee;
            s.fees.bob_collateral = fee;
        }
    }
    if spec.variant == Protocol::He {
        s.timing.refund_delay = refund_delay_for(spec.deposit, spec.collateral, spec.fee)?;
    }
    s.timing.horizon = s.min_horizon() + SLACK;
    let mut miners = vec![MinerPolicy::HonestFeeMax];
    if spec.lagging_power.is_zero() {
        s.miners = vec![MinerProfile::honest(Ratio::from_integer(1))];
    } else {
        s.miners = vec![
            MinerProfile::honest(Ratio::from_integer(1) - spec.lagging_power),
            MinerProfile::honest(spec.lagging_power),
        ];
        let all = vec![ContractId::Deposit, ContractId::Collateral, ContractId::AliceCollateral, ContractId::BobCollateral];
        miners.push(MinerPolicy::CensorRelated { targets: all, until: s.timing.horizon });
    }
    let alice = match (spec.path, spec.variant) {
        (TtcPath::BobBoth, Protocol::Demba) => AlicePolicy::OfflineThenRefund,
        (TtcPath::BobBoth, _) => AlicePolicy::Silent,
        _ => AlicePolicy::Honest { publish: 1 },
    };
    let profile = StrategyProfile { alice, bob: BobPolicy::Honest { reveal: 1 }, miners };
    Ok((s, profile, watch))
}

pub fn ttc(spec: &TtcSpec, trials: u64, seed: u64) -> Result<TtcReport, TtcError> {
    let (s, profile, watch) = ttc_setup(spec, seed)?;
    s.validate()?;
    let genesis = s.genesis(&profile)?;
    let censored = s.timing.horizon + 1;
    let rounds = run_trials(&s, trials.max(1), |_, rng| {
        let schedule = sample_schedule(&s, rng);
        let mut state = genesis.clone();
        for (i, &m) in schedule.iter().enumerate() {
            state = s.advance(&profile, &state, i as Round + 1, m)?;
        }
        let done = watch.iter().map(|id| match state.contract(*id).map(|c| c.status) {
            Some(Status::Redeemed { round, .. } | Status::Burned { round }) => round,
            _ => censored,
        });
        Ok(done.max().unwrap_or(0))
    })?;
    let unresolved = rounds.iter().filter(|&&r| r == censored).count() as u64;
    let xs: Vec<f64> = rounds.iter().map(|&r| r as f64).collect();
    let (mean, half_width) = mean_half_width(&xs);
    Ok(TtcReport { refund_delay: s.timing.refund_delay, mean, half_width, unresolved, trials: trials.max(1) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refund_delay_rule() {
        assert_eq!(refund_delay_for(100, 100, 1).unwrap(), 3);
        assert_eq!(refund_delay_for(400, 100, 1).unwrap(), 6);
        assert_eq!(refund_delay_for(99, 100, 1).unwrap(), 2);
        assert!(refund_delay_for(1, 1, 1).is_err());
    }

    #[test]
    fn he_has_no_separate_collateral_path() {
        let spec = TtcSpec {
            variant: Protocol::He,
            path: TtcPath::BobCollateral,
            deposit: 10,
            collateral: 10,
            fee: 1,
            deadline: 5,
            lagging_power: Ratio::new(1, 4),
        };
        assert!(matches!(ttc(&spec, 1, 0), Err(TtcError::InvalidPath { .. })));
    }
}
