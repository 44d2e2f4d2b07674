//! Paid-versus-earned fee split for the collateral paths of the two-phase
//! protocol. Before the deadline a miner keeps the whole declared fee; after
//! it the miner keeps a geometrically decaying share of a per-path base and
//! the rest is burned.

use std::fmt;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{Round, Tokens};

/// Collateral redemption kinds that carry a scheduled fee.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeeKey {
    PreA,
    PreAPrime,
    PreAA,
    PreB,
}

impl FeeKey {
    pub const ALL: [FeeKey; 4] = [FeeKey::PreA, FeeKey::PreAPrime, FeeKey::PreAA, FeeKey::PreB];

    fn idx(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FeeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeeKey::PreA => write!(f, "pre-a"),
            FeeKey::PreAPrime => write!(f, "pre-a'"),
            FeeKey::PreAA => write!(f, "pre-aa'"),
            FeeKey::PreB => write!(f, "pre-b"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeeSchedule {
    /// Declared fee per key, indexed by `FeeKey as usize`.
    pub paid: [Tokens; 4],
    /// Post-deadline earning base per key.
    pub base: [Tokens; 4],
    pub decay: Ratio<u64>,
    pub deadline: Round,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleViolation {
    #[error("declared fees must strictly increase pre-a < pre-a' < pre-aa' (got {0}, {1}, {2})")]
    PaidOrdering(Tokens, Tokens, Tokens),
    #[error("miner earnings must strictly decrease pre-a > pre-a' > pre-aa' at round {round}")]
    EarnedOrdering { round: Round },
    #[error("fee burned before the deadline at round {round} for {key}")]
    BurnBeforeDeadline { round: Round, key: FeeKey },
    #[error("burned fee for {key} decreases at round {round}")]
    BurnDecreasing { round: Round, key: FeeKey },
    #[error("base for {key} exceeds its declared fee")]
    BaseAbovePaid { key: FeeKey },
    #[error("decay must be positive")]
    ZeroDecay,
    #[error("horizon {horizon} must exceed the deadline {deadline}")]
    ShortHorizon { horizon: Round, deadline: Round },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleWarning {
    /// Post-deadline inclusion loses nothing, so late inclusion is not deterred.
    DeterrenceVoid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleVerdict {
    pub warnings: Vec<ScheduleWarning>,
}

impl FeeSchedule {
    /// Schedule with the default bases: full for pre-a and pre-b, half of
    /// pre-a's fee for pre-a', a quarter for pre-aa'.
    pub fn with_default_bases(paid: [Tokens; 4], decay: Ratio<u64>, deadline: Round) -> Self {
        let a = paid[FeeKey::PreA.idx()].0;
        let base = [
            paid[FeeKey::PreA.idx()],
            Tokens(a / 2),
            Tokens(a / 4),
            paid[FeeKey::PreB.idx()],
        ];
        FeeSchedule { paid, base, decay, deadline }
    }

    pub fn paid(&self, key: FeeKey) -> Tokens {
        self.paid[key.idx()]
    }

    pub fn base(&self, key: FeeKey) -> Tokens {
        self.base[key.idx()]
    }

    /// Exact post-deadline earning before rounding: decay^(round-deadline) · base.
    pub fn earned_exact(&self, key: FeeKey, round: Round) -> Ratio<BigUint> {
        let base = BigUint::from(self.base(key).0);
        if round <= self.deadline {
            return Ratio::from_integer(BigUint::from(self.paid(key).0));
        }
        let exp = (round - self.deadline) as u32;
        let numer = BigUint::from(*self.decay.numer()).pow(exp) * base;
        let denom = BigUint::from(*self.decay.denom()).pow(exp);
        Ratio::new(numer, denom)
    }

    /// Miner-earned share of the scheduled fee at `round`, capped at the
    /// declared amount.
    pub fn earned(&self, key: FeeKey, round: Round) -> Tokens {
        let declared = self.paid(key);
        if round <= self.deadline {
            return declared;
        }
        let floor = self.earned_exact(key, round).to_integer();
        let floor = floor.to_u64().unwrap_or(u64::MAX);
        Tokens(floor.min(declared.0))
    }

    /// Validates the orderings on every round up to `horizon`.
    pub fn check(&self, horizon: Round) -> Result<ScheduleVerdict, ScheduleViolation> {
        if horizon <= self.deadline {
            return Err(ScheduleViolation::ShortHorizon { horizon, deadline: self.deadline });
        }
        if self.decay.numer().is_zero() {
            return Err(ScheduleViolation::ZeroDecay);
        }
        let (a, ap, aa) = (self.paid(FeeKey::PreA), self.paid(FeeKey::PreAPrime), self.paid(FeeKey::PreAA));
        if !(a < ap && ap < aa) {
            return Err(ScheduleViolation::PaidOrdering(a, ap, aa));
        }
        for key in FeeKey::ALL {
            if self.base(key) > self.paid(key) {
                return Err(ScheduleViolation::BaseAbovePaid { key });
            }
        }
        let mut last_burn = [Tokens::ZERO; 4];
        for round in 0..=horizon {
            if round > self.deadline {
                let e: Vec<_> = [FeeKey::PreA, FeeKey::PreAPrime, FeeKey::PreAA]
                    .into_iter()
                    .map(|k| self.earned_exact(k, round))
                    .collect();
                if !(e[0] > e[1] && e[1] > e[2]) {
                    return Err(ScheduleViolation::EarnedOrdering { round });
                }
            }
            for key in FeeKey::ALL {
                let (_, burned) = self.split(key, self.paid(key), round).expect("declared matches");
                if round <= self.deadline && !burned.is_zero() {
                    return Err(ScheduleViolation::BurnBeforeDeadline { round, key });
                }
                if burned < last_burn[key.idx()] {
                    return Err(ScheduleViolation::BurnDecreasing { round, key });
                }
                last_burn[key.idx()] = burned;
            }
        }
        let mut warnings = Vec::new();
        if self.decay >= Ratio::from_integer(1) {
            warnings.push(ScheduleWarning::DeterrenceVoid);
        }
        Ok(ScheduleVerdict { warnings })
    }

    /// Splits a declared fee into (miner-earned, burned).
    pub fn split(&self, key: FeeKey, declared: Tokens, round: Round) -> Result<(Tokens, Tokens), FeeMismatch> {
        if declared != self.paid(key) {
            return Err(FeeMismatch { expected: self.paid(key), declared });
        }
        let earned = self.earned(key, round);
        Ok((earned, Tokens(declared.0 - earned.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("declared fee {declared} does not match the schedule's {expected}")]
pub struct FeeMismatch {
    pub expected: Tokens,
    pub declared: Tokens,
}

/// Free-function form of [`FeeSchedule::split`].
pub fn fee_split(
    key: FeeKey,
    declared: Tokens,
    round: Round,
    schedule: &FeeSchedule,
) -> Result<(Tokens, Tokens), FeeMismatch> {
    schedule.split(key, declared, round)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(paid: [u64; 4], n: u64, d: u64) -> FeeSchedule {
        FeeSchedule::with_default_bases(paid.map(Tokens), Ratio::new(n, d), 10)
    }

    #[test]
    fn honest_era_keeps_whole_fee() {
        let s = sched([2, 3, 5, 4], 1, 2);
        assert_eq!(s.split(FeeKey::PreB, Tokens(4), 9).unwrap(), (Tokens(4), Tokens(0)));
    }

    #[test]
    fn decayed_base_rounds_down() {
        let mut s = sched([8, 9, 10, 4], 1, 2);
        s.base[0] = Tokens(8);
        assert_eq!(s.split(FeeKey::PreA, Tokens(8), 12).unwrap(), (Tokens(2), Tokens(6)));
    }

    #[test]
    fn zero_fee_splits_to_zero() {
        let s = sched([2, 3, 5, 0], 1, 2);
        for r in [0, 10, 11, 40] {
            assert_eq!(s.split(FeeKey::PreB, Tokens(0), r).unwrap(), (Tokens(0), Tokens(0)));
        }
    }

    #[test]
    fn mismatch_is_rejected() {
        let s = sched([2, 3, 5, 4], 1, 2);
        assert!(s.split(FeeKey::PreA, Tokens(3), 1).is_err());
    }

    #[test]
    fn worked_schedules() {
        assert!(sched([2, 3, 5, 1], 1, 2).check(20).is_ok());
        assert!(matches!(sched([3, 3, 5, 1], 1, 2).check(20), Err(ScheduleViolation::PaidOrdering(..))));
        let v = sched([4, 5, 6, 1], 1, 1).check(20).unwrap();
        assert_eq!(v.warnings, vec![ScheduleWarning::DeterrenceVoid]);
    }
}
