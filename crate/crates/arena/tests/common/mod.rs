//! Shared fixtures: one desk-scale scenario per protocol and a random
//! block-sequence driver that checks the ledger invariants after every block.

#![allow(dead_code)]

use std::collections::BTreeMap;

use htlc_arena::agents::{self, txs, AlicePolicy, B3aCase, BobPolicy, MinerPolicy, StrategyProfile};
use htlc_arena::contracts::bribery::BriberyCall;
use htlc_arena::contracts::fees::FeeSchedule;
use htlc_arena::contracts::{Status, SECRET_A};
use htlc_arena::game::{MinerKind, MinerProfile, Protocol, Scenario};
use htlc_arena::ledger::{Block, ChainState, ContractId, PartyId, Tokens, Tx, TxId, Witness};
use num_rational::Ratio;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

pub const PROTOCOLS: [Protocol; 4] = [Protocol::Naive, Protocol::Mad, Protocol::He, Protocol::Demba];

pub fn scenario(p: Protocol) -> Scenario {
    let mut s = Scenario::new(p);
    s.amounts.deposit = Tokens(100);
    s.fees.unrelated = Tokens(1);
    s.fees.alice_deposit = Tokens(3);
    s.fees.bob_deposit = Tokens(2);
    s.fees.bob_collateral = Tokens(2);
    s.fees.bribery_contract = Tokens(1);
    s.bribes.bribe = Tokens(2);
    s.timing.deadline = 4;
    s.timing.publish = 1;
    match p {
        Protocol::Naive => {}
        Protocol::Mad => s.amounts.collateral = Tokens(30),
        Protocol::He => {
            s.amounts.collateral = Tokens(60);
            s.timing.refund_delay = 2;
        }
        Protocol::Demba => {
            s.amounts.alice_collateral = Tokens(40);
            s.amounts.bob_collateral = Tokens(40);
            s.amounts.deduction = Tokens(5);
            s.fees.schedule = Some(FeeSchedule::with_default_bases([2, 3, 5, 2].map(Tokens), Ratio::new(1, 2), 4));
        }
    }
    s.miners = vec![
        MinerProfile::new(Ratio::new(1, 2), MinerKind::Active, true),
        MinerProfile::new(Ratio::new(1, 2), MinerKind::Passive, false),
    ];
    s.timing.horizon = s.min_horizon() + 2;
    s
}

fn alice_space(p: Protocol) -> Vec<AlicePolicy> {
    let mut v = vec![AlicePolicy::Honest { publish: 1 }, AlicePolicy::Honest { publish: 3 }, AlicePolicy::Silent];
    if p == Protocol::Demba {
        v.extend([AlicePolicy::OfflineThenRefund, AlicePolicy::GriefDoubleReveal, AlicePolicy::CensoredFallback { publish: 1 }]);
    }
    v
}

fn bob_space(p: Protocol) -> Vec<BobPolicy> {
    let mut v = vec![BobPolicy::Honest { reveal: 1 }, BobPolicy::Silent];
    match p {
        Protocol::Naive => v.push(BobPolicy::NaiveBriber),
        Protocol::Mad => v.extend([
            BobPolicy::NaiveBriber,
            BobPolicy::B3a { case: B3aCase::One },
            BobPolicy::B3a { case: B3aCase::Two },
            BobPolicy::HydraBriber,
            BobPolicy::ReverseBribe,
        ]),
        Protocol::He => {}
        Protocol::Demba => v.extend([BobPolicy::Delay { rounds: 1 }, BobPolicy::Delay { rounds: 2 }]),
    }
    v
}

fn miner_space(p: Protocol) -> Vec<MinerPolicy> {
    let all = vec![ContractId::Deposit, ContractId::Collateral, ContractId::AliceCollateral, ContractId::BobCollateral];
    let mut v = vec![
        MinerPolicy::HonestFeeMax,
        MinerPolicy::CensorRelated { targets: all, until: 6 },
        MinerPolicy::CensorRelated { targets: vec![ContractId::Deposit], until: 4 },
    ];
    match p {
        Protocol::Naive => v.push(MinerPolicy::BribeAccomplice),
        Protocol::Mad => v.extend([
            MinerPolicy::BribeAccomplice,
            MinerPolicy::B3aAccomplice { case: B3aCase::One },
            MinerPolicy::B3aAccomplice { case: B3aCase::Two },
            MinerPolicy::SdrbaBriber,
            MinerPolicy::HydraAccomplice,
            MinerPolicy::Opportunist,
        ]),
        Protocol::He => v.extend([
            MinerPolicy::M2mbaActive { confiscate: true },
            MinerPolicy::M2mbaActive { confiscate: false },
            MinerPolicy::M2mbaPassive,
            MinerPolicy::Defer { until: 7 },
            MinerPolicy::Opportunist,
        ]),
        Protocol::Demba => {}
    }
    v
}

/// A profile drawn from the protocol's policy spaces.
pub fn random_profile(s: &Scenario, rng: &mut impl Rng) -> StrategyProfile {
    let p = s.protocol;
    StrategyProfile {
        alice: *alice_space(p).choose(rng).unwrap(),
        bob: *bob_space(p).choose(rng).unwrap(),
        miners: (0..s.miners.len()).map(|_| miner_space(p).choose(rng).unwrap().clone()).collect(),
    }
}

/// Every transaction anyone could submit, valid or not.
fn tx_pool(s: &Scenario, round: u64, miner: PartyId) -> Vec<Tx> {
    let mut v = vec![
        txs::dep_a(s),
        txs::dep_b(s),
        txs::col_b(s),
        txs::col_pre_a(s),
        txs::col_pre_a_prime(s),
        txs::col_pre_aa(s),
        txs::col_pre_b(s),
        txs::deploy_bribery(s),
    ];
    let mut seq = 0;
    let mut id = || {
        seq += 1;
        agents::ids::miner(round, seq)
    };
    for c in [ContractId::Deposit, ContractId::Collateral] {
        v.push(txs::miner_claim(id(), miner, c));
    }
    for call in [
        BriberyCall::LockCollateral(s.amounts.collateral),
        BriberyCall::RequestBribe,
        BriberyCall::ClaimBribe(SECRET_A),
        BriberyCall::RefundToBob,
        BriberyCall::RefundToMiners,
    ] {
        v.push(txs::call(id(), miner, call));
    }
    // A forged spend: Bob signing Alice's path.
    v.push(Tx { id: TxId(id().0), creator: PartyId::Bob, fee: Tokens(1), witness: Witness::signed(PartyId::Bob), action: txs::dep_a(s).action });
    v
}

fn resolved(state: &ChainState) -> BTreeMap<ContractId, Status> {
    state
        .contracts
        .iter()
        .filter(|(_, c)| matches!(c.status, Status::Redeemed { .. } | Status::Burned { .. }))
        .map(|(id, c)| (*id, c.status))
        .collect()
}

/// Checks the invariants between consecutive states.
fn check(before: &ChainState, after: &ChainState, total: i128) -> Result<(), String> {
    if after.conservation_total() != total {
        return Err(format!("conservation: {} != {total} at height {}", after.conservation_total(), after.height));
    }
    let (a, b) = (resolved(before), resolved(after));
    for (id, st) in &a {
        if b.get(id) != Some(st) {
            return Err(format!("{id} redeemed twice or reverted at height {}", after.height));
        }
    }
    for (k, r) in &before.revealed {
        if after.revealed.get(k) != Some(r) {
            return Err(format!("reveal {k:?} rewritten at height {}", after.height));
        }
    }
    if after.books.balances.values().any(|t| t.0 > u64::MAX / 2) {
        return Err("balance wrapped".into());
    }
    Ok(())
}

/// Plays one random block sequence: each round is either a policy-built
/// block under a freshly drawn profile or a random subset of every possible
/// transaction, with random filler and coinbase outputs. Returns how many
/// random blocks applied.
pub fn fuzz_sequence(s: &Scenario, rng: &mut impl Rng) -> Result<u32, String> {
    let mut profile = random_profile(s, rng);
    let mut state = s.genesis(&profile).map_err(|e| e.to_string())?;
    let total = state.conservation_total();
    let mut applied = 0;
    for round in 1..=s.timing.horizon {
        let me = PartyId::Miner(rng.random_range(0..s.miners.len() as u8));
        let next = if rng.random_bool(0.5) {
            profile = random_profile(s, rng);
            let block = agents::build_block(s, &profile, &state, round, me);
            state.apply_block(&block).map_err(|e| format!("policy block rejected at {round}: {e}"))?
        } else {
            let mut pool = tx_pool(s, round, me);
            pool.extend(state.mempool.iter().cloned());
            pool.shuffle(rng);
            let n = rng.random_range(0..=s.capacity as usize).min(pool.len());
            pool.truncate(n);
            let mut block = Block::empty(round, me, s.capacity);
            block.filler = rng.random_range(0..=s.capacity - n as u32);
            block.txs = pool;
            if rng.random_bool(0.2) {
                block.coinbase.push((PartyId::Bob, Tokens(rng.random_range(0..5))));
            }
            match state.apply_block(&block) {
                Ok(next) => {
                    applied += 1;
                    next
                }
                // A rejected block leaves the state untouched; an empty one takes the round.
                Err(_) => state.apply_block(&Block::empty(round, me, s.capacity)).map_err(|e| e.to_string())?,
            }
        };
        check(&state, &next, total)?;
        state = next;
        agents::parties_act(s, &profile, &mut state, round);
        check(&state, &state, total)?;
    }
    Ok(applied)
}

/// Simulated and closed-form depositor gain of one bribery run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleRow {
    pub simulated: i128,
    pub predicted: i128,
}

fn whole(r: Ratio<i128>) -> i128 {
    assert!(r.is_integer(), "{r} is not whole");
    r.to_integer()
}

use htlc_arena::analysis::closed_form::{closed_form, Attack, AttackParams};
use htlc_arena::contracts::bribery::Split;
use htlc_arena::game::play;

/// Naive HTLC, one accomplice miner, deposit published in round 1.
pub fn naive_bribery(deposit: u64, bribe: u64, window: u64, fee_dep: u64, fee_contract: u64) -> OracleRow {
    let mut s = Scenario::new(Protocol::Naive);
    s.amounts.deposit = Tokens(deposit);
    s.fees.alice_deposit = Tokens(1);
    s.fees.bob_deposit = Tokens(fee_dep);
    s.fees.bribery_contract = Tokens(fee_contract);
    s.bribes.bribe = Tokens(bribe);
    s.timing.publish = 1;
    s.timing.deadline = 1 + window;
    s.timing.horizon = s.min_horizon();
    let profile = StrategyProfile {
        alice: AlicePolicy::Honest { publish: 1 },
        bob: BobPolicy::NaiveBriber,
        miners: vec![MinerPolicy::BribeAccomplice],
    };
    let out = play(&s, &profile, &vec![0; s.timing.horizon as usize]).unwrap();
    let p = AttackParams {
        deposit: Some(deposit),
        bribe: Some(bribe),
        window: Some(window),
        fee_bob_deposit: Some(fee_dep),
        fee_bob_contract: Some(fee_contract),
        ..Default::default()
    };
    OracleRow {
        simulated: out.utility(PartyId::Bob) + deposit as i128,
        predicted: whole(closed_form(Attack::NaiveBribery, &p).unwrap()),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct B3aParams {
    pub deposit: u64,
    pub collateral: u64,
    pub bribe: u64,
    pub window: u64,
    pub fee_collateral: u64,
    pub fee_contract: u64,
}

pub fn b3a(p: B3aParams, case: B3aCase) -> OracleRow {
    let mut s = Scenario::new(Protocol::Mad);
    s.amounts.deposit = Tokens(p.deposit);
    s.amounts.collateral = Tokens(p.collateral);
    s.fees.alice_deposit = Tokens(1);
    s.fees.bob_deposit = Tokens(1);
    s.fees.bob_collateral = Tokens(p.fee_collateral);
    s.fees.bribery_contract = Tokens(p.fee_contract);
    s.bribes.bribe = Tokens(p.bribe);
    s.timing.publish = 1;
    s.timing.deadline = 1 + p.window;
    s.timing.horizon = s.min_horizon();
    let profile = StrategyProfile {
        alice: AlicePolicy::Honest { publish: 1 },
        bob: BobPolicy::B3a { case },
        miners: vec![MinerPolicy::B3aAccomplice { case }],
    };
    let out = play(&s, &profile, &vec![0; s.timing.horizon as usize]).unwrap();
    let attack = if case == B3aCase::One { Attack::B3aCase1 } else { Attack::B3aCase2 };
    let params = AttackParams {
        deposit: Some(p.deposit),
        bribe: Some(p.bribe),
        window: Some(p.window),
        fee_bob_collateral: Some(p.fee_collateral),
        fee_bob_contract: Some(p.fee_contract),
        ..Default::default()
    };
    OracleRow {
        simulated: out.utility(PartyId::Bob) + p.deposit as i128,
        predicted: whole(closed_form(attack, &params).unwrap()),
    }
}

/// He HTLC with two miners: miner 1 mines the first `window - own`
/// censored blocks, miner 0 the remaining `own` and then confiscates.
/// Returns miner 0's utility against the closed form.
pub fn m2mba(collateral: u64, bribe: u64, window: u64, own: u64, split: Split) -> OracleRow {
    let mut s = Scenario::new(Protocol::He);
    s.amounts.deposit = Tokens(100);
    s.amounts.collateral = Tokens(collateral);
    s.fees.alice_deposit = Tokens(1);
    s.bribes.bribe = Tokens(bribe);
    s.bribes.split = split;
    s.timing.publish = 1;
    s.timing.deadline = 1 + window;
    s.timing.refund_delay = 2;
    s.timing.horizon = s.min_horizon();
    s.miners = vec![
        MinerProfile::new(Ratio::new(1, 2), MinerKind::Active, true),
        MinerProfile::new(Ratio::new(1, 2), MinerKind::Active, true),
    ];
    let profile = StrategyProfile {
        alice: AlicePolicy::Honest { publish: 1 },
        bob: BobPolicy::Honest { reveal: 1 },
        miners: vec![MinerPolicy::M2mbaActive { confiscate: true }, MinerPolicy::M2mbaActive { confiscate: false }],
    };
    // Round 1 precedes the censored window, rounds 2..=T are censored.
    let schedule: Vec<u8> = (1..=s.timing.horizon).map(|r| u8::from(r >= 2 && r < 2 + (window - own))).collect();
    let out = play(&s, &profile, &schedule).unwrap();
    let attack = if split == Split::PerBlock { Attack::M2mbaPerBlock } else { Attack::M2mbaEqual };
    let params = AttackParams {
        collateral: Some(collateral),
        bribe: Some(bribe),
        window: Some(window),
        own_blocks: Some(own),
        ..Default::default()
    };
    OracleRow {
        simulated: out.utility(PartyId::Miner(0)),
        predicted: whole(closed_form(attack, &params).unwrap()),
    }
}

/// MAD with one accomplice miner that censors dep-A for `window` rounds and
/// then buys pre-b for `collateral + premium`. The simulated gain counts the
/// collateral as well as the deposit, because the depositor funds both and
/// the closed form credits the payment without the forfeited collateral.
pub fn hydra(p: B3aParams, premium: u64) -> OracleRow {
    let mut s = Scenario::new(Protocol::Mad);
    s.amounts.deposit = Tokens(p.deposit);
    s.amounts.collateral = Tokens(p.collateral);
    s.fees.alice_deposit = Tokens(1);
    s.fees.bob_deposit = Tokens(1);
    s.fees.bob_collateral = Tokens(p.fee_collateral);
    s.fees.bribery_contract = Tokens(p.fee_contract);
    s.bribes.bribe = Tokens(p.bribe);
    s.bribes.premium = Tokens(premium);
    s.timing.publish = 1;
    s.timing.deadline = 1 + p.window;
    s.timing.horizon = s.min_horizon();
    let profile = StrategyProfile {
        alice: AlicePolicy::Honest { publish: 1 },
        bob: BobPolicy::HydraBriber,
        miners: vec![MinerPolicy::HydraAccomplice],
    };
    let out = play(&s, &profile, &vec![0; s.timing.horizon as usize]).unwrap();
    let params = AttackParams {
        collateral: Some(p.collateral),
        premium: Some(premium),
        bribe: Some(p.bribe),
        window: Some(p.window),
        fee_bob_contract: Some(p.fee_contract),
        ..Default::default()
    };
    OracleRow {
        simulated: out.utility(PartyId::Bob) + (p.deposit + p.collateral) as i128,
        predicted: whole(closed_form(Attack::HydraBob, &params).unwrap()),
    }
}

/// MAD with two miners: miner 0 buys pre-b in the first block after pre-a
/// is published and takes the deposit, miner 1 mines every other block and
/// confiscates the collateral first. Returns miner 0's utility.
pub fn sdrba_worst(deposit: u64, collateral: u64, premium: u64) -> OracleRow {
    let mut s = Scenario::new(Protocol::Mad);
    s.amounts.deposit = Tokens(deposit);
    s.amounts.collateral = Tokens(collateral);
    s.fees.alice_deposit = Tokens(1);
    s.fees.bob_deposit = Tokens(1);
    s.fees.bob_collateral = Tokens(1);
    s.bribes.premium = Tokens(premium);
    s.timing.publish = 1;
    s.timing.deadline = 4;
    s.timing.horizon = s.min_horizon();
    s.miners = vec![MinerProfile::honest(Ratio::new(1, 2)), MinerProfile::honest(Ratio::new(1, 2))];
    let profile = StrategyProfile {
        alice: AlicePolicy::Honest { publish: 1 },
        bob: BobPolicy::ReverseBribe,
        miners: vec![MinerPolicy::SdrbaBriber, MinerPolicy::Opportunist],
    };
    let schedule: Vec<u8> = (1..=s.timing.horizon).map(|r| u8::from(r != 2)).collect();
    let out = play(&s, &profile, &schedule).unwrap();
    let params = AttackParams {
        deposit: Some(deposit),
        collateral: Some(collateral),
        premium: Some(premium),
        ..Default::default()
    };
    OracleRow {
        simulated: out.utility(PartyId::Miner(0)),
        predicted: whole(closed_form(Attack::SdrbaWorst, &params).unwrap()),
    }
}
