//! Two-phase collateral protocol: per-party reveal claims, the fee-decay
//! claim, and the unilateral-deviation search around the honest profile.

use num_rational::Ratio;
use rayon::prelude::*;

use super::{int, Claim, LemmaVerdict};
use crate::agents::{AlicePolicy, BobPolicy, MinerPolicy, StrategyProfile};
use crate::contracts::fees::{FeeKey, FeeSchedule};
use crate::contracts::PathName;
use crate::game::dominance::{dominance_check, Player, PlayerPolicy, Verdict};
use crate::game::expect::expected_exact;
use crate::game::{play, GameError, Metric, MinerProfile, Protocol, Scenario};
use crate::ledger::{ContractId, PartyId, Round, Tokens};

const PUBLISH: Round = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DembaPoint {
    pub deposit: u64,
    pub alice_collateral: u64,
    pub bob_collateral: u64,
    pub deduction: u64,
    /// Declared fees for pre-a, pre-a', pre-aa', pre-b.
    pub paid: [u64; 4],
    pub decay: Ratio<u64>,
    pub deadline: Round,
}

impl DembaPoint {
    pub fn standard() -> Self {
        DembaPoint {
            deposit: 50,
            alice_collateral: 40,
            bob_collateral: 40,
            deduction: 5,
            paid: [2, 3, 5, 2],
            decay: Ratio::new(1, 2),
            deadline: 4,
        }
    }

    pub fn schedule(&self) -> FeeSchedule {
        FeeSchedule::with_default_bases(self.paid.map(Tokens), self.decay, self.deadline)
    }

    /// Scenario with the given miners; the horizon leaves room for a
    /// reveal up to three rounds late.
    pub fn scenario(&self, miners: Vec<MinerProfile>) -> Scenario {
        let mut s = Scenario::new(Protocol::Demba);
        s.amounts.deposit = Tokens(self.deposit);
        s.amounts.alice_collateral = Tokens(self.alice_collateral);
        s.amounts.bob_collateral = Tokens(self.bob_collateral);
        s.amounts.deduction = Tokens(self.deduction);
        s.fees.schedule = Some(self.schedule());
        s.timing.deadline = self.deadline;
        s.timing.publish = PUBLISH;
        s.timing.horizon = self.deadline + 4;
        s.miners = miners;
        s
    }

    fn solo(&self) -> Scenario {
        self.scenario(vec![MinerProfile::honest(Ratio::from_integer(1))])
    }

    fn describe(&self) -> String {
        format!(
            "deposit={} alice_col={} deduction={} paid={:?} decay={} deadline={}",
            self.deposit, self.alice_collateral, self.deduction, self.paid, self.decay, self.deadline
        )
    }
}

pub fn honest_profile(s: &Scenario) -> StrategyProfile {
    StrategyProfile {
        alice: AlicePolicy::Honest { publish: PUBLISH },
        bob: BobPolicy::Honest { reveal: 1 },
        miners: vec![MinerPolicy::HonestFeeMax; s.miners.len()],
    }
}

/// Alice's three ways to redeem her collateral.
pub fn alice_redemptions() -> [AlicePolicy; 3] {
    [AlicePolicy::Honest { publish: PUBLISH }, AlicePolicy::OfflineThenRefund, AlicePolicy::GriefDoubleReveal]
}

pub fn bob_reveals() -> [BobPolicy; 3] {
    [BobPolicy::Honest { reveal: 1 }, BobPolicy::Delay { rounds: 1 }, BobPolicy::Delay { rounds: 2 }]
}

fn with_bob(s: &Scenario, bob: BobPolicy) -> StrategyProfile {
    StrategyProfile { bob, ..honest_profile(s) }
}

fn with_alice(s: &Scenario, alice: AlicePolicy) -> StrategyProfile {
    StrategyProfile { alice, ..honest_profile(s) }
}

fn witness_gap(d: &crate::game::dominance::Dominance) -> Ratio<i128> {
    d.witness.as_ref().map_or(int(0), |w| w.candidate_value - w.alternative_value)
}

/// Honest reveal beats both late redemptions whatever Bob does.
pub fn alice_honest(p: &DembaPoint) -> Result<LemmaVerdict, GameError> {
    let s = p.solo();
    let own: Vec<PlayerPolicy> = alice_redemptions().into_iter().map(PlayerPolicy::Alice).collect();
    let opps: Vec<StrategyProfile> = [BobPolicy::Honest { reveal: 1 }, BobPolicy::Delay { rounds: 1 }]
        .into_iter()
        .map(|b| with_bob(&s, b))
        .collect();
    let d = dominance_check(&s, Player::Alice, Metric::Utility(PartyId::Alice), &own[0], &own, &opps)?;
    let margin = [p.deduction as i128, p.paid[1] as i128 - p.paid[0] as i128, p.paid[2] as i128 - p.paid[1] as i128]
        .into_iter()
        .min()
        .map(Ratio::from_integer)
        .unwrap_or_default();
    Ok(LemmaVerdict::new(Claim::AliceHonest, margin > int(0), d.verdict == Verdict::Strict, margin, witness_gap(&d), p.describe()))
}

/// On-time reveal beats every delay whatever Alice does.
pub fn bob_honest(p: &DembaPoint) -> Result<LemmaVerdict, GameError> {
    let s = p.solo();
    let own: Vec<PlayerPolicy> = bob_reveals().into_iter().map(PlayerPolicy::Bob).collect();
    let opps: Vec<StrategyProfile> = alice_redemptions().into_iter().map(|a| with_alice(&s, a)).collect();
    let d = dominance_check(&s, Player::Bob, Metric::Utility(PartyId::Bob), &own[0], &own, &opps)?;
    let margin = int(p.deduction);
    Ok(LemmaVerdict::new(Claim::BobHonest, margin > int(0), d.verdict == Verdict::Strict, margin, witness_gap(&d), p.describe()))
}

/// Earned fee on time versus `late` rounds after the deadline.
pub fn timely_inclusion(p: &DembaPoint, key: FeeKey, late: Round) -> LemmaVerdict {
    let sched = p.schedule();
    let paid = sched.paid(key);
    let (on_time, _) = sched.split(key, paid, p.deadline).expect("declared fee");
    let (after, _) = sched.split(key, paid, p.deadline + late).expect("declared fee");
    let hypothesis = p.decay < Ratio::from_integer(1) && sched.check(p.deadline + late).is_ok();
    let margin = int(1) - super::wide(p.decay);
    let gap = int(on_time.0) - int(after.0);
    let point = format!("paid={:?} decay={} key={key} late={late}", p.paid, p.decay);
    LemmaVerdict::new(Claim::TimelyInclusion, hypothesis, gap > int(0), margin, gap, point)
}

const PAID: [[u64; 4]; 4] = [[2, 3, 5, 2], [3, 3, 5, 2], [4, 6, 9, 3], [5, 4, 6, 1]];

pub fn party_grid() -> Vec<DembaPoint> {
    let mut out = Vec::new();
    for deduction in [0, 1, 5] {
        for paid in PAID {
            for decay in [Ratio::new(1, 2), Ratio::new(3, 4)] {
                for deposit in [10, 50] {
                    for deadline in [3, 5] {
                        for alice_collateral in [40, 80] {
                            out.push(DembaPoint {
                                deposit,
                                alice_collateral,
                                bob_collateral: 40,
                                deduction,
                                paid,
                                decay,
                                deadline,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn fee_grid() -> Vec<(DembaPoint, FeeKey, Round)> {
    let mut out = Vec::new();
    for decay in [(1, 4), (1, 3), (1, 2), (2, 3), (3, 4), (1, 1)] {
        for paid in PAID {
            for key in FeeKey::ALL {
                for late in [1, 2] {
                    let p = DembaPoint { paid, decay: Ratio::new(decay.0, decay.1), ..DembaPoint::standard() };
                    out.push((p, key, late));
                }
            }
        }
    }
    out
}

pub fn run_grid(claim: Claim) -> Result<Vec<LemmaVerdict>, GameError> {
    match claim {
        Claim::AliceHonest => party_grid().par_iter().map(alice_honest).collect(),
        Claim::BobHonest => party_grid().par_iter().map(bob_honest).collect(),
        Claim::TimelyInclusion => Ok(fee_grid().iter().map(|(p, k, l)| timely_inclusion(p, *k, *l)).collect()),
        other => super::lemmas::run_grid(other),
    }
}

/// Shipped deviation spaces, honest policy first.
pub fn alice_space(deadline: Round) -> Vec<AlicePolicy> {
    vec![
        AlicePolicy::Honest { publish: PUBLISH },
        AlicePolicy::Honest { publish: deadline - 1 },
        AlicePolicy::OfflineThenRefund,
        AlicePolicy::GriefDoubleReveal,
        AlicePolicy::CensoredFallback { publish: PUBLISH },
        AlicePolicy::Silent,
    ]
}

pub fn bob_space() -> Vec<BobPolicy> {
    vec![BobPolicy::Honest { reveal: 1 }, BobPolicy::Delay { rounds: 1 }, BobPolicy::Delay { rounds: 2 }, BobPolicy::Silent]
}

pub fn miner_space(deadline: Round) -> Vec<MinerPolicy> {
    let censor = |targets: Vec<ContractId>| MinerPolicy::CensorRelated { targets, until: deadline };
    vec![
        MinerPolicy::HonestFeeMax,
        censor(vec![ContractId::AliceCollateral]),
        censor(vec![ContractId::BobCollateral]),
        censor(vec![ContractId::AliceCollateral, ContractId::BobCollateral]),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deviation {
    pub player: Player,
    pub policy: PlayerPolicy,
    pub honest: Ratio<i128>,
    pub deviated: Ratio<i128>,
}

impl Deviation {
    pub fn gain(&self) -> Ratio<i128> {
        self.deviated - self.honest
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DembaReport {
    pub deviations: Vec<Deviation>,
    /// Profiles in the joint space where Alice or Bob exceed the collusion bound.
    pub bound_violations: Vec<String>,
    pub profiles_checked: usize,
    pub alice_grief_loss: Ratio<i128>,
    /// Grief loss on Alice's own collateral, with the forfeited deposit removed.
    pub alice_grief_collateral_loss: Ratio<i128>,
    pub grief_burns_deposit: bool,
    pub bob_delay_losses: Vec<(Round, Ratio<i128>)>,
}

impl DembaReport {
    pub fn profitable(&self) -> Vec<&Deviation> {
        self.deviations.iter().filter(|d| d.gain() > int(0)).collect()
    }
}

/// Utilities plus the collateral each party posted.
fn earnings(s: &Scenario, profile: &StrategyProfile) -> Result<(Ratio<i128>, Ratio<i128>), GameError> {
    let e = expected_exact(s, profile)?;
    let a = e.utility(PartyId::Alice) + int(s.amounts.alice_collateral.0);
    let b = e.utility(PartyId::Bob) + int(s.amounts.bob_collateral.0);
    Ok((a, b))
}

/// Unilateral deviations from the honest profile, the collusion bound over
/// the joint space (all miners sharing one policy), and the exact losses of
/// the grief and delay deviations.
pub fn verify_demba(p: &DembaPoint, miners: Vec<MinerProfile>) -> Result<DembaReport, GameError> {
    let s = p.scenario(miners);
    s.validate()?;
    let honest = honest_profile(&s);
    let t = p.deadline;
    let mut tasks: Vec<(Player, PlayerPolicy)> = Vec::new();
    tasks.extend(alice_space(t).into_iter().skip(1).map(|a| (Player::Alice, PlayerPolicy::Alice(a))));
    tasks.extend(bob_space().into_iter().skip(1).map(|b| (Player::Bob, PlayerPolicy::Bob(b))));
    for i in 0..s.miners.len() {
        tasks.extend(miner_space(t).into_iter().skip(1).map(|m| (Player::Miner(i as u8), PlayerPolicy::Miner(m))));
    }
    let base = expected_exact(&s, &honest)?;
    let metric = |pl: Player| match pl {
        Player::Alice => Metric::Utility(PartyId::Alice),
        Player::Bob => Metric::Utility(PartyId::Bob),
        Player::Miner(i) => Metric::Utility(PartyId::Miner(i)),
    };
    let deviations = tasks
        .par_iter()
        .map(|(pl, pol)| {
            let prof = crate::game::dominance::substitute(&honest, *pl, pol)?;
            let v = expected_exact(&s, &prof)?.get(metric(*pl));
            Ok(Deviation { player: *pl, policy: pol.clone(), honest: base.get(metric(*pl)), deviated: v })
        })
        .collect::<Result<Vec<_>, GameError>>()?;

    let mut joint = Vec::new();
    for a in alice_space(t) {
        for b in bob_space() {
            for m in miner_space(t) {
                joint.push(StrategyProfile { alice: a, bob: b, miners: vec![m.clone(); s.miners.len()] });
            }
        }
    }
    let alice_cap = int(p.deposit + p.alice_collateral);
    let bob_cap = int(p.bob_collateral);
    let bound_violations = joint
        .par_iter()
        .map(|prof| {
            let (a, b) = earnings(&s, prof)?;
            Ok((a > alice_cap || b > bob_cap).then(|| format!("{} / {} / {}", prof.alice, prof.bob, prof.miners[0])))
        })
        .collect::<Result<Vec<_>, GameError>>()?
        .into_iter()
        .flatten()
        .collect();

    let solo = p.solo();
    let sched = vec![0; solo.timing.horizon as usize];
    let honest_run = play(&solo, &honest_profile(&solo), &sched)?;
    let grief_run = play(&solo, &with_alice(&solo, AlicePolicy::GriefDoubleReveal), &sched)?;
    let alice_grief_loss = int(0) + Ratio::from_integer(honest_run.utility(PartyId::Alice) - grief_run.utility(PartyId::Alice));
    let grief_burns_deposit = grief_run.resolution == Some(PathName::DepBurn);
    let forfeited = if grief_burns_deposit { int(p.deposit) } else { int(0) };
    let bob_delay_losses = [1, 2]
        .into_iter()
        .map(|d| {
            let run = play(&solo, &with_bob(&solo, BobPolicy::Delay { rounds: d }), &sched)?;
            Ok((d, Ratio::from_integer(honest_run.utility(PartyId::Bob) - run.utility(PartyId::Bob))))
        })
        .collect::<Result<Vec<_>, GameError>>()?;
    Ok(DembaReport {
        deviations,
        bound_violations,
        profiles_checked: joint.len(),
        alice_grief_loss,
        alice_grief_collateral_loss: alice_grief_loss - forfeited,
        grief_burns_deposit,
        bob_delay_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_walk_matches_the_ledger() {
        let p = DembaPoint::standard();
        let s = p.solo();
        let out = play(&s, &honest_profile(&s), &vec![0; s.timing.horizon as usize]).unwrap();
        assert_eq!(out.utility(PartyId::Alice) + 40, 50 + 40 - 2);
        assert_eq!(out.utility(PartyId::Bob) + 40, 40 - 50 - 2);
    }

    #[test]
    fn fee_claim_flags_unit_decay() {
        let p = DembaPoint { decay: Ratio::from_integer(1), ..DembaPoint::standard() };
        let v = timely_inclusion(&p, FeeKey::PreA, 1);
        assert!(!v.hypothesis && !v.conclusion && v.consistent);
    }
}
