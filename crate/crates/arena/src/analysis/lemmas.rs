//! Miner-to-miner bribery claims on the delayed-refund protocol: each claim
//! pairs a closed-form hypothesis with an engine-side dominance check.
//!
//! The checked subgames fix a decision round: the miner under test mines
//! the first censorable block, and for the bribe claims the confiscating
//! miner mines the first block after the deadline. All fees other than
//! dep-A's are zero so that utilities isolate the compared quantities.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rayon::prelude::*;

use super::{int, wide, Claim, LemmaVerdict};
use crate::agents::{AlicePolicy, BobPolicy, MinerPolicy, StrategyProfile};
use crate::game::dominance::{dominance_check, Dominance, Player, PlayerPolicy, Verdict, Witness};
use crate::game::{GameError, Metric, MinerKind, MinerProfile, Protocol, Scenario};
use crate::ledger::{PartyId, Round, Tokens};

const PUBLISH: Round = 1;
const DEPOSIT: u64 = 100;

/// One parameter point of the bribery claims.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BribePoint {
    /// Power share of the miner under test, relative to the coalition for
    /// the bribe claims and to the whole network otherwise.
    pub share: Ratio<u64>,
    /// Censored blocks between publication and the deadline.
    pub window: u64,
    pub bribe: u64,
    pub collateral: u64,
    pub alice_fee: u64,
    pub refund_delay: Round,
}

impl BribePoint {
    fn describe(&self) -> String {
        format!(
            "share={} window={} bribe={} collateral={} alice_fee={}",
            self.share, self.window, self.bribe, self.collateral, self.alice_fee
        )
    }

    fn deadline(&self) -> Round {
        PUBLISH + self.window
    }
}

/// Delayed-refund scenario with two miners: the one under test at `index`
/// with power `share`, the other with the rest.
fn two_miner_scenario(p: &BribePoint, index: usize, kind: MinerKind) -> Scenario {
    let mut s = Scenario::new(Protocol::He);
    s.amounts.deposit = Tokens(DEPOSIT);
    s.amounts.collateral = Tokens(p.collateral);
    s.fees.alice_deposit = Tokens(p.alice_fee);
    s.timing.deadline = p.deadline();
    s.timing.refund_delay = p.refund_delay;
    s.timing.publish = PUBLISH;
    s.timing.horizon = s.min_horizon();
    s.bribes.bribe = Tokens(p.bribe);
    let colluding = kind == MinerKind::Active;
    let me = MinerProfile::new(p.share, kind, colluding);
    let other = MinerProfile::new(Ratio::from_integer(1) - p.share, kind, colluding);
    s.miners = if index == 0 { vec![me, other] } else { vec![other, me] };
    s
}

fn profile(miners: Vec<MinerPolicy>) -> StrategyProfile {
    StrategyProfile { alice: AlicePolicy::Honest { publish: PUBLISH }, bob: BobPolicy::Honest { reveal: 1 }, miners }
}

fn compare(
    s: &Scenario,
    miner: u8,
    candidate: MinerPolicy,
    alternatives: &[MinerPolicy],
    opponents: &StrategyProfile,
) -> Result<Dominance, GameError> {
    let cand = PlayerPolicy::Miner(candidate);
    let mut own = vec![cand.clone()];
    own.extend(alternatives.iter().cloned().map(PlayerPolicy::Miner));
    dominance_check(s, Player::Miner(miner), Metric::Utility(PartyId::Miner(miner)), &cand, &own, std::slice::from_ref(opponents))
}

fn gap(w: &Option<Witness>) -> Ratio<i128> {
    w.as_ref().map_or(Ratio::from_integer(0), |w| w.candidate_value - w.alternative_value)
}

fn verdict(claim: Claim, margin: Ratio<i128>, extra: bool, d: &Dominance, point: String) -> LemmaVerdict {
    LemmaVerdict::new(claim, margin > Ratio::from_integer(0) && extra, d.verdict == Verdict::Strict, margin, gap(&d.witness), point)
}

/// Expected bribe income of a recipient over the window minus dep-A's fee.
pub fn accept_bribe_margin(p: &BribePoint) -> Ratio<i128> {
    int(p.window * p.bribe) * wide(p.share) - int(p.alice_fee)
}

/// Expected confiscation share plus net bribes minus dep-A's fee.
pub fn offer_bribe_margin(p: &BribePoint) -> Ratio<i128> {
    let share = wide(p.share);
    int(p.collateral) * share + int(p.window * p.bribe) * (share * 2 - 1) - int(p.alice_fee)
}

pub fn passive_wait_margin(p: &BribePoint) -> Ratio<i128> {
    int(p.collateral) * wide(p.share) - int(p.alice_fee)
}

/// Loss from deferring confiscation to `target`: the prize times one minus
/// the chance of keeping the opportunity through every earlier round.
pub fn confiscate_now_margin(p: &BribePoint, target: Round) -> Ratio<i128> {
    let rounds = target.saturating_sub(p.deadline() + 1);
    let keep = wide(p.share).pow(rounds as i32);
    int(p.collateral) * (Ratio::from_integer(1) - keep)
}

/// Expected payment to one recipient under per-recipient bribes sized to
/// cover dep-A's fee plus `premium` per block.
pub fn recipient_bribe_total(alice_fee: u64, share: Ratio<u64>, window: u64, premium: u64) -> Ratio<i128> {
    int(alice_fee) + wide(share) * int(window * premium)
}

pub fn accept_bribe(p: &BribePoint) -> Result<LemmaVerdict, GameError> {
    let mut s = two_miner_scenario(p, 1, MinerKind::Active);
    s.forced = BTreeMap::from([(PUBLISH + 1, 1), (p.deadline() + 1, 0)]);
    let opp = profile(vec![MinerPolicy::M2mbaActive { confiscate: true }, MinerPolicy::HonestFeeMax]);
    let d = compare(&s, 1, MinerPolicy::M2mbaActive { confiscate: false }, &[MinerPolicy::HonestFeeMax], &opp)?;
    Ok(verdict(Claim::AcceptBribe, accept_bribe_margin(p), true, &d, p.describe()))
}

pub fn offer_bribe(p: &BribePoint) -> Result<LemmaVerdict, GameError> {
    let mut s = two_miner_scenario(p, 0, MinerKind::Active);
    s.forced = BTreeMap::from([(PUBLISH + 1, 0), (p.deadline() + 1, 0)]);
    let opp = profile(vec![MinerPolicy::HonestFeeMax, MinerPolicy::M2mbaActive { confiscate: false }]);
    let d = compare(&s, 0, MinerPolicy::M2mbaActive { confiscate: true }, &[MinerPolicy::HonestFeeMax], &opp)?;
    Ok(verdict(Claim::OfferBribe, offer_bribe_margin(p), true, &d, p.describe()))
}

pub fn passive_wait(p: &BribePoint) -> Result<LemmaVerdict, GameError> {
    let mut s = two_miner_scenario(p, 0, MinerKind::Passive);
    s.forced = BTreeMap::from([(PUBLISH + 1, 0)]);
    let opp = profile(vec![MinerPolicy::HonestFeeMax, MinerPolicy::M2mbaPassive]);
    let d = compare(&s, 0, MinerPolicy::M2mbaPassive, &[MinerPolicy::HonestFeeMax], &opp)?;
    Ok(verdict(Claim::PassiveWait, passive_wait_margin(p), true, &d, p.describe()))
}

pub fn confiscate_now(p: &BribePoint, target: Round) -> Result<LemmaVerdict, GameError> {
    let mut s = two_miner_scenario(p, 0, MinerKind::Passive);
    let solo = p.share == Ratio::from_integer(1);
    if solo {
        s.miners.truncate(1);
    }
    let mut miners = vec![MinerPolicy::HonestFeeMax];
    if !solo {
        miners.push(MinerPolicy::M2mbaPassive);
    }
    let d = compare(&s, 0, MinerPolicy::M2mbaPassive, &[MinerPolicy::Defer { until: target }], &profile(miners))?;
    let deferred = target > p.deadline() + 1 && !solo && p.collateral > p.alice_fee;
    let point = format!("{} defer_to={target}", p.describe());
    Ok(verdict(Claim::ConfiscateNow, confiscate_now_margin(p, target), deferred, &d, point))
}

/// Recipient-bribe point: dep-A's fee is `unit·window·share_numer`, so the
/// per-block bribe `fee/(window·share) + premium` is an integer.
pub fn recipient_bribe(share: Ratio<u64>, window: u64, premium: u64, unit: u64) -> Result<LemmaVerdict, GameError> {
    let alice_fee = unit * window * share.numer();
    let bribe = unit * share.denom() + premium;
    let p = BribePoint { share, window, bribe, collateral: window * bribe + 10, alice_fee, refund_delay: 1 };
    let mut s = two_miner_scenario(&p, 1, MinerKind::Active);
    s.bribes.per_recipient = BTreeMap::from([(1, Tokens(bribe))]);
    s.forced = BTreeMap::from([(PUBLISH + 1, 1), (p.deadline() + 1, 0)]);
    let opp = profile(vec![MinerPolicy::M2mbaActive { confiscate: true }, MinerPolicy::HonestFeeMax]);
    let d = compare(&s, 1, MinerPolicy::M2mbaActive { confiscate: false }, &[MinerPolicy::HonestFeeMax], &opp)?;
    let margin = recipient_bribe_total(alice_fee, share, window, premium) - int(alice_fee);
    Ok(verdict(Claim::RecipientBribe, margin, true, &d, format!("{} premium={premium}", p.describe())))
}

const SHARES: [(u64, u64); 6] = [(1, 5), (1, 4), (1, 3), (1, 2), (2, 3), (3, 4)];

fn shares() -> impl Iterator<Item = Ratio<u64>> {
    SHARES.into_iter().map(|(n, d)| Ratio::new(n, d))
}

pub fn accept_bribe_grid() -> Vec<BribePoint> {
    let mut out = Vec::new();
    for share in shares() {
        for window in 1..=4 {
            for bribe in [1, 2, 3] {
                for alice_fee in [1, 3, 6] {
                    out.push(BribePoint { share, window, bribe, collateral: window * bribe + 10, alice_fee, refund_delay: 1 });
                }
            }
        }
    }
    out
}

/// Collateral at least covers the bribes owed to the other miners even when
/// the briber's own share of the window is counted at face value.
pub fn offer_bribe_grid() -> Vec<BribePoint> {
    let mut out = Vec::new();
    for share in shares() {
        for window in 1..=4 {
            for bribe in [1, 3] {
                let rest = Ratio::from_integer(1) - share;
                let floor = (Ratio::from_integer(window * bribe) / rest).ceil().to_integer();
                for scale in [1, 3] {
                    for alice_fee in [1, 10, 40] {
                        out.push(BribePoint { share, window, bribe, collateral: floor * scale, alice_fee, refund_delay: 1 });
                    }
                }
            }
        }
    }
    out
}

pub fn passive_wait_grid() -> Vec<BribePoint> {
    let mut out = Vec::new();
    for share in shares() {
        for window in [1, 3] {
            for collateral in [10, 30, 60] {
                for alice_fee in [1, 2, 5, 10, 20, 40] {
                    out.push(BribePoint { share, window, bribe: 0, collateral, alice_fee, refund_delay: 1 });
                }
            }
        }
    }
    out
}

pub fn confiscate_now_grid() -> Vec<(BribePoint, Round)> {
    let mut out = Vec::new();
    for share in shares().chain([Ratio::from_integer(1)]) {
        for collateral in [10, 40] {
            for alice_fee in [1, 20] {
                let p = BribePoint { share, window: 2, bribe: 0, collateral, alice_fee, refund_delay: 3 };
                for offset in 1..=p.refund_delay + 1 {
                    out.push((p.clone(), p.deadline() + offset));
                }
            }
        }
    }
    out
}

pub fn recipient_bribe_grid() -> Vec<(Ratio<u64>, u64, u64, u64)> {
    let mut out = Vec::new();
    for share in shares() {
        for window in 1..=4 {
            for premium in [0, 1, 2, 3, 5] {
                for unit in [1, 2] {
                    out.push((share, window, premium, unit));
                }
            }
        }
    }
    out
}

/// All grid verdicts for one bribery claim, in grid order.
pub fn run_grid(claim: Claim) -> Result<Vec<LemmaVerdict>, GameError> {
    match claim {
        Claim::AcceptBribe => accept_bribe_grid().par_iter().map(accept_bribe).collect(),
        Claim::OfferBribe => offer_bribe_grid().par_iter().map(offer_bribe).collect(),
        Claim::PassiveWait => passive_wait_grid().par_iter().map(passive_wait).collect(),
        Claim::ConfiscateNow => confiscate_now_grid().par_iter().map(|(p, t)| confiscate_now(p, *t)).collect(),
        Claim::RecipientBribe => {
            recipient_bribe_grid().par_iter().map(|&(s, w, e, u)| recipient_bribe(s, w, e, u)).collect()
        }
        other => super::demba::run_grid(other),
    }
}

/// A three-role bribery setup for the equilibrium check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalitionSetup {
    pub miners: Vec<(Ratio<u64>, MinerKind)>,
    pub window: u64,
    pub refund_delay: Round,
    pub collateral: u64,
    pub bribe: u64,
    pub alice_fee: u64,
}

impl CoalitionSetup {
    /// Two colluding active miners and one passive miner.
    pub fn standard() -> Self {
        CoalitionSetup {
            miners: vec![
                (Ratio::new(1, 2), MinerKind::Active),
                (Ratio::new(3, 10), MinerKind::Active),
                (Ratio::new(1, 5), MinerKind::Passive),
            ],
            window: 3,
            refund_delay: 2,
            collateral: 100,
            bribe: 5,
            alice_fee: 1,
        }
    }

    fn deadline(&self) -> Round {
        PUBLISH + self.window
    }

    fn coalition_power(&self) -> Ratio<u64> {
        self.miners.iter().filter(|m| m.1 == MinerKind::Active).fold(Ratio::from_integer(0), |a, m| a + m.0)
    }

    fn scenario(&self) -> Scenario {
        let mut s = Scenario::new(Protocol::He);
        s.amounts.deposit = Tokens(DEPOSIT);
        s.amounts.collateral = Tokens(self.collateral);
        s.fees.alice_deposit = Tokens(self.alice_fee);
        s.timing.deadline = self.deadline();
        s.timing.refund_delay = self.refund_delay;
        s.timing.publish = PUBLISH;
        s.timing.horizon = s.min_horizon();
        s.bribes.bribe = Tokens(self.bribe);
        s.miners = self.miners.iter().map(|&(p, k)| MinerProfile::new(p, k, k == MinerKind::Active)).collect();
        s
    }

    fn attack_policy(kind: MinerKind) -> MinerPolicy {
        match kind {
            MinerKind::Active => MinerPolicy::M2mbaActive { confiscate: true },
            MinerKind::Passive => MinerPolicy::M2mbaPassive,
        }
    }

    /// Per-miner policy space: attack policies first, then the alternatives
    /// they must beat.
    pub fn policy_space(&self, miner: usize) -> (Vec<MinerPolicy>, Vec<MinerPolicy>) {
        let alts = vec![MinerPolicy::HonestFeeMax, MinerPolicy::Opportunist];
        match self.miners[miner].1 {
            MinerKind::Active => {
                let mut attack = vec![MinerPolicy::M2mbaActive { confiscate: true }];
                let other_active = self.miners.iter().enumerate().any(|(j, m)| j != miner && m.1 == MinerKind::Active);
                if other_active {
                    attack.push(MinerPolicy::M2mbaActive { confiscate: false });
                }
                (attack, alts)
            }
            MinerKind::Passive => (vec![MinerPolicy::M2mbaPassive], alts),
        }
    }

    /// Closed-form hypotheses per miner: (claim, margin).
    pub fn hypotheses(&self, miner: usize) -> Vec<(Claim, Ratio<i128>)> {
        let (power, kind) = self.miners[miner];
        let point = |share| BribePoint {
            share,
            window: self.window,
            bribe: self.bribe,
            collateral: self.collateral,
            alice_fee: self.alice_fee,
            refund_delay: self.refund_delay,
        };
        match kind {
            MinerKind::Active => {
                let p = point(power / self.coalition_power());
                vec![(Claim::AcceptBribe, accept_bribe_margin(&p)), (Claim::OfferBribe, offer_bribe_margin(&p))]
            }
            MinerKind::Passive => vec![(Claim::PassiveWait, passive_wait_margin(&point(power)))],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinerRow {
    pub miner: u8,
    pub kind: MinerKind,
    pub hypotheses: Vec<(Claim, Ratio<i128>)>,
    /// Dominance of each attack policy over the alternatives.
    pub checks: Vec<(MinerPolicy, Dominance)>,
}

impl MinerRow {
    pub fn hypotheses_hold(&self) -> bool {
        self.hypotheses.iter().all(|(_, m)| *m > Ratio::from_integer(0))
    }

    pub fn dominant(&self) -> bool {
        self.checks.iter().all(|(_, d)| d.verdict == Verdict::Strict)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumTable {
    pub rows: Vec<MinerRow>,
}

impl EquilibriumTable {
    pub fn hypotheses_hold(&self) -> bool {
        self.rows.iter().all(MinerRow::hypotheses_hold)
    }

    pub fn all_dominant(&self) -> bool {
        self.rows.iter().all(MinerRow::dominant)
    }

    /// First attack policy that fails to dominate, with its witness.
    pub fn counterexample(&self) -> Option<(u8, &MinerPolicy, &Witness)> {
        (0..self.rows.len()).find_map(|i| self.counterexample_for(i as u8))
    }

    pub fn counterexample_for(&self, miner: u8) -> Option<(u8, &MinerPolicy, &Witness)> {
        let r = self.rows.iter().find(|r| r.miner == miner)?;
        r.checks
            .iter()
            .find(|(_, d)| d.verdict != Verdict::Strict)
            .and_then(|(p, d)| d.witness.as_ref().map(|w| (r.miner, p, w)))
    }
}

/// Brute-force check that every miner's attack policies dominate the
/// honest alternatives while the others attack. Each miner is checked with
/// itself mining the first censorable block.
pub fn verify_coalition(setup: &CoalitionSetup) -> Result<EquilibriumTable, GameError> {
    let base = setup.scenario();
    base.validate()?;
    let attack: Vec<MinerPolicy> = setup.miners.iter().map(|m| CoalitionSetup::attack_policy(m.1)).collect();
    let rows = (0..setup.miners.len())
        .into_par_iter()
        .map(|i| {
            let mut s = base.clone();
            s.forced = BTreeMap::from([(PUBLISH + 1, i as u8)]);
            let opp = profile(attack.clone());
            let (cands, alts) = setup.policy_space(i);
            let checks = cands
                .into_iter()
                .map(|c| compare(&s, i as u8, c.clone(), &alts, &opp).map(|d| (c, d)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(MinerRow { miner: i as u8, kind: setup.miners[i].1, hypotheses: setup.hypotheses(i), checks })
        })
        .collect::<Result<Vec<_>, GameError>>()?;
    Ok(EquilibriumTable { rows })
}

/// One hypothesis pushed just past its boundary by raising dep-A's fee.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flip {
    pub miner: u8,
    pub claim: Claim,
    pub alice_fee: u64,
    pub table: EquilibriumTable,
}

pub fn flip_each_hypothesis(setup: &CoalitionSetup) -> Result<Vec<Flip>, GameError> {
    let mut out = Vec::new();
    for i in 0..setup.miners.len() {
        for (claim, margin) in setup.hypotheses(i) {
            let lhs = margin + int(setup.alice_fee);
            if lhs < Ratio::from_integer(0) {
                continue;
            }
            let fee = lhs.floor().to_integer() as u64 + 1;
            let flipped = CoalitionSetup { alice_fee: fee, ..setup.clone() };
            out.push(Flip { miner: i as u8, claim, alice_fee: fee, table: verify_coalition(&flipped)? });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipient_total_is_the_fee_without_premium() {
        assert_eq!(recipient_bribe_total(6, Ratio::new(1, 2), 4, 0), int(6));
        assert!(recipient_bribe_total(6, Ratio::new(1, 2), 4, 1) > int(6));
    }

    #[test]
    fn deferral_margin_vanishes_at_the_first_round() {
        let p = BribePoint { share: Ratio::new(1, 2), window: 2, bribe: 0, collateral: 40, alice_fee: 1, refund_delay: 3 };
        assert_eq!(confiscate_now_margin(&p, p.deadline() + 1), int(0));
        assert_eq!(confiscate_now_margin(&p, p.deadline() + 2), int(20));
    }

    #[test]
    fn grids_are_large_enough() {
        assert!(accept_bribe_grid().len() >= 100);
        assert!(offer_bribe_grid().len() >= 100);
        assert!(passive_wait_grid().len() >= 100);
        assert!(confiscate_now_grid().len() >= 100);
        assert!(recipient_bribe_grid().len() >= 100);
    }
}
