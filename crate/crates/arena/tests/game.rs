use std::collections::BTreeMap;

use htlc_arena::agents::{AlicePolicy, BobPolicy, MinerPolicy, StrategyProfile};
use htlc_arena::game::expect::{expected_exact, expected_mc};
use htlc_arena::game::{
    label_rank, play, GameError, Metric, MinerKind, MinerProfile, Mode, Protocol, Scenario, StateLabel,
};
use htlc_arena::ledger::{PartyId, Tokens};
use num_rational::Ratio;

const ALICE: PartyId = PartyId::Alice;
const BOB: PartyId = PartyId::Bob;

fn miners(powers: &[(u64, u64)]) -> Vec<MinerProfile> {
    powers.iter().map(|&(n, d)| MinerProfile::new(Ratio::new(n, d), MinerKind::Active, true)).collect()
}

fn naive(deadline: u64, publish: u64) -> Scenario {
    let mut s = Scenario::new(Protocol::Naive);
    s.amounts.deposit = Tokens(100);
    s.fees.alice_deposit = Tokens(3);
    s.fees.unrelated = Tokens(1);
    s.timing.deadline = deadline;
    s.timing.publish = publish;
    s.timing.horizon = s.min_horizon();
    s
}

fn he(deadline: u64, publish: u64) -> Scenario {
    let mut s = Scenario::new(Protocol::He);
    s.amounts.deposit = Tokens(100);
    s.amounts.collateral = Tokens(50);
    s.timing.deadline = deadline;
    s.timing.refund_delay = 2;
    s.timing.publish = publish;
    s.timing.horizon = s.min_horizon();
    s
}

#[test]
fn honest_naive_pays_alice() {
    let s = naive(4, 2);
    let profile = StrategyProfile::honest(&s);
    let out = play(&s, &profile, &vec![0; s.timing.horizon as usize]).unwrap();
    assert_eq!(out.utility(ALICE), 100 - 3);
    assert_eq!(out.utility(BOB), -100);
    assert_eq!(out.utility(PartyId::Miner(0)), 3 + 8 * 6 - 1);
}

#[test]
fn naive_bribery_worked_example() {
    let mut s = naive(5, 1);
    s.fees.alice_deposit = Tokens(1);
    s.fees.unrelated = Tokens(0);
    s.fees.bob_deposit = Tokens(1);
    s.fees.bribery_contract = Tokens(1);
    s.bribes.bribe = Tokens(2);
    let profile = StrategyProfile {
        alice: AlicePolicy::Honest { publish: 1 },
        bob: BobPolicy::NaiveBriber,
        miners: vec![MinerPolicy::BribeAccomplice],
    };
    let out = play(&s, &profile, &vec![0; s.timing.horizon as usize]).unwrap();
    assert_eq!(out.utility(BOB) + 100, 88);
    assert_eq!(out.utility(ALICE), 0);
}

#[test]
fn m2mba_worked_example() {
    let mut s = he(5, 1);
    s.miners = miners(&[(1, 2), (1, 2)]);
    s.bribes.bribe = Tokens(2);
    s.forced = BTreeMap::from([(2, 1), (3, 1), (4, 1), (5, 0), (6, 0)]);
    let profile = StrategyProfile {
        alice: AlicePolicy::Honest { publish: 1 },
        bob: BobPolicy::Honest { reveal: 1 },
        miners: vec![MinerPolicy::M2mbaActive { confiscate: true }; 2],
    };
    let mut sched = vec![1; s.timing.horizon as usize];
    sched[4] = 0;
    sched[5] = 0;
    let out = play(&s, &profile, &sched).unwrap();
    assert_eq!(out.utility(PartyId::Miner(0)), 50 - 3 * 2);
    assert_eq!(out.utility(PartyId::Miner(1)), 3 * 2);
    assert_eq!(out.get(Metric::Burned), 100);
}

#[test]
fn coalition_bribe_income_expectation() {
    let mut s = he(5, 1);
    s.miners = miners(&[(1, 2), (1, 2)]);
    s.bribes.bribe = Tokens(2);
    let profile = StrategyProfile {
        alice: AlicePolicy::Honest { publish: 1 },
        bob: BobPolicy::Honest { reveal: 1 },
        miners: vec![MinerPolicy::M2mbaActive { confiscate: true }; 2],
    };
    let e = expected_exact(&s, &profile).unwrap();
    assert_eq!(e.get(Metric::BribeIncome(PartyId::Miner(0))), Ratio::from_integer(4));
}

#[test]
fn single_miner_expectation_is_the_single_play() {
    let s = naive(4, 2);
    let profile = StrategyProfile::honest(&s);
    let out = play(&s, &profile, &vec![0; s.timing.horizon as usize]).unwrap();
    let e = expected_exact(&s, &profile).unwrap();
    for (m, v) in &out.values {
        assert_eq!(e.get(*m), Ratio::from_integer(*v), "{m:?}");
    }
}

#[test]
fn monte_carlo_brackets_exact() {
    let mut s = naive(3, 1);
    s.miners = vec![
        MinerProfile::new(Ratio::new(1, 2), MinerKind::Passive, false),
        MinerProfile::new(Ratio::new(1, 2), MinerKind::Active, true),
    ];
    s.fees.bob_deposit = Tokens(1);
    s.fees.bribery_contract = Tokens(1);
    s.bribes.bribe = Tokens(2);
    s.seed = 7;
    s.mode = Mode::MonteCarlo { trials: 20_000 };
    let profile = StrategyProfile {
        alice: AlicePolicy::Honest { publish: 1 },
        bob: BobPolicy::NaiveBriber,
        miners: vec![MinerPolicy::HonestFeeMax, MinerPolicy::BribeAccomplice],
    };
    let exact = expected_exact(&s, &profile).unwrap();
    let mc = expected_mc(&s, &profile, 20_000).unwrap();
    let again = expected_mc(&s, &profile, 20_000).unwrap();
    assert_eq!(mc, again);
    for m in [Metric::Utility(ALICE), Metric::Utility(BOB), Metric::Utility(PartyId::Miner(1))] {
        let x = exact.get(m);
        let x = *x.numer() as f64 / *x.denom() as f64;
        let (mean, hw) = mc.get(m);
        assert!((mean - x).abs() <= 1.5 * hw.max(1e-9), "{m:?}: exact {x} mc {mean} ± {hw}");
    }
}

#[test]
fn scaling_amounts_scales_utilities() {
    let base = naive(4, 2);
    let mut scaled = base.clone();
    scaled.amounts.deposit = Tokens(300);
    scaled.fees.alice_deposit = Tokens(9);
    scaled.fees.unrelated = Tokens(3);
    let p = StrategyProfile::honest(&base);
    let a = expected_exact(&base, &p).unwrap();
    let b = expected_exact(&scaled, &p).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert_eq!(*x * 3, *y);
    }
}

#[test]
fn labels_never_revert() {
    let mut s = naive(3, 1);
    s.miners = miners(&[(1, 2), (1, 2)]);
    let profile = StrategyProfile::honest(&s);
    let out = play(&s, &profile, &vec![1; s.timing.horizon as usize]).unwrap();
    assert_eq!(out.labels[0], StateLabel::Red);
    assert!(out.labels.windows(2).all(|w| label_rank(w[0]) <= label_rank(w[1])));
    assert_eq!(*out.labels.last().unwrap(), StateLabel::NredA);
}

#[test]
fn inconsistent_profile_is_rejected() {
    let s = naive(3, 1);
    let profile = StrategyProfile::honest(&s).with_miner(0, MinerPolicy::M2mbaPassive);
    let err = play(&s, &profile, &vec![0; s.timing.horizon as usize]).unwrap_err();
    assert!(matches!(err, GameError::InconsistentProfile(_)));
}

#[test]
fn enumeration_cap_is_enforced() {
    let mut s = naive(30, 1);
    s.miners = miners(&[(1, 2), (1, 2)]);
    let err = expected_exact(&s, &StrategyProfile::honest(&s)).unwrap_err();
    assert!(matches!(err, GameError::EnumerationCap { .. }));
}
