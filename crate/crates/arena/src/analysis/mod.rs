//! Closed-form oracles, hypothesis-versus-simulation verifiers, and the
//! solo-versus-pool mining mathematics.

pub mod closed_form;
pub mod demba;
pub mod lemmas;
pub mod pool;

use std::fmt;

use num_rational::Ratio;
use serde::Serialize;

/// The claims checked against the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Claim {
    /// A colluding miner prefers censoring for bribes over including dep-A.
    AcceptBribe,
    /// A colluding miner prefers funding the bribes and confiscating.
    OfferBribe,
    /// A passive miner prefers waiting to confiscate.
    PassiveWait,
    /// Confiscating at the first chance beats deferring.
    ConfiscateNow,
    /// Per-recipient bribes with a positive premium beat dep-A's fee.
    RecipientBribe,
    /// Alice does best revealing pre-a before the deadline.
    AliceHonest,
    /// Bob does best revealing pre-b before the deadline.
    BobHonest,
    /// Miners earn strictly more including collateral redemptions on time.
    TimelyInclusion,
}

impl Claim {
    pub const ALL: [Claim; 8] = [
        Claim::AcceptBribe,
        Claim::OfferBribe,
        Claim::PassiveWait,
        Claim::ConfiscateNow,
        Claim::RecipientBribe,
        Claim::AliceHonest,
        Claim::BobHonest,
        Claim::TimelyInclusion,
    ];
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Claim::AcceptBribe => "accept-bribe",
            Claim::OfferBribe => "offer-bribe",
            Claim::PassiveWait => "passive-wait",
            Claim::ConfiscateNow => "confiscate-now",
            Claim::RecipientBribe => "recipient-bribe",
            Claim::AliceHonest => "alice-honest",
            Claim::BobHonest => "bob-honest",
            Claim::TimelyInclusion => "timely-inclusion",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Claim {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Claim::ALL.into_iter().find(|c| c.to_string() == s).ok_or_else(|| format!("unknown claim `{s}`"))
    }
}

/// One grid point: the hypothesis evaluated in closed form, the conclusion
/// evaluated by the engine. `consistent = !hypothesis || conclusion`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaVerdict {
    pub claim: Claim,
    pub hypothesis: bool,
    pub conclusion: bool,
    pub consistent: bool,
    /// Hypothesis left side minus right side.
    pub margin: Ratio<i128>,
    /// Engine-side gap: preferred minus alternative.
    pub gap: Ratio<i128>,
    pub point: String,
}

impl LemmaVerdict {
    pub fn new(claim: Claim, hypothesis: bool, conclusion: bool, margin: Ratio<i128>, gap: Ratio<i128>, point: String) -> Self {
        LemmaVerdict { claim, hypothesis, conclusion, consistent: !hypothesis || conclusion, margin, gap, point }
    }
}

/// `Ratio<u64>` widened for mixed arithmetic.
pub(crate) fn wide(r: Ratio<u64>) -> Ratio<i128> {
    Ratio::new(*r.numer() as i128, *r.denom() as i128)
}

pub(crate) fn int(x: u64) -> Ratio<i128> {
    Ratio::from_integer(x as i128)
}
