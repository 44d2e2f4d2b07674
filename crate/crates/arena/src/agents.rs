//! Named behaviour policies. Every policy is a deterministic function of the
//! scenario, the chain state and the round; preimages become common
//! knowledge the moment they are broadcast.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::contracts::bribery::{BriberyCall, BriberyContract, BriberyKind};
use crate::contracts::fees::FeeKey;
use crate::contracts::{PathName, SECRET_A, SECRET_A_PRIME, SECRET_B};
use crate::game::{Protocol, Scenario};
use crate::ledger::{Block, ChainState, ContractId, PartyId, Round, Slot, Tokens, Tx, TxAction, TxId, Witness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum B3aCase {
    /// Bob keeps his collateral through col-B.
    One,
    /// The miner also takes the collateral through col-M.
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlicePolicy {
    /// Reveals pre-a once, at `publish`.
    Honest { publish: Round },
    /// Misses the deadline and redeems with pre-a' afterwards.
    OfflineThenRefund,
    /// Reveals pre-a and pre-a' together after the deadline.
    GriefDoubleReveal,
    /// Reveals pre-a at `publish`; if that never lands, reveals both secrets
    /// after the deadline.
    CensoredFallback { publish: Round },
    Silent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BobPolicy {
    /// Reveals pre-b at `reveal` where the protocol lets him choose; refunds
    /// as soon as the timelocks allow otherwise.
    Honest { reveal: Round },
    /// Reveals pre-b so that it lands `rounds` after the deadline.
    Delay { rounds: Round },
    NaiveBriber,
    B3a { case: B3aCase },
    /// Bribes miners to censor dep-A until the deadline, then sells pre-b to
    /// a miner for the collateral plus the premium.
    HydraBriber,
    /// Sells pre-b to a miner for the collateral plus the premium, without
    /// censorship bribes.
    ReverseBribe,
    Silent,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MinerPolicy {
    /// Greedy by miner-earned fee, ties by transaction id.
    HonestFeeMax,
    /// Honest, except redemptions of `targets` are skipped through `until`.
    CensorRelated { targets: Vec<ContractId>, until: Round },
    /// Censors dep-A for the depositor's bribery contract and claims after.
    BribeAccomplice,
    /// As `BribeAccomplice`, then offers the depositor a coinbase bribe.
    B3aAccomplice { case: B3aCase },
    /// Locks collateral, censors dep-A for bribes, and when `confiscate`
    /// takes the collateral contract at the first chance and pays out.
    M2mbaActive { confiscate: bool },
    /// Censors dep-A without bribes and confiscates at the first chance.
    M2mbaPassive,
    /// Censors dep-A and confiscates no earlier than `until`.
    Defer { until: Round },
    /// Includes dep-A like an honest miner but confiscates whenever it can.
    Opportunist,
    /// Buys pre-b from the depositor as soon as pre-a is known, takes the
    /// deposit through dep-M and then races for the collateral.
    SdrbaBriber,
    /// Censors dep-A for the depositor's bribes, then buys pre-b after the
    /// deadline and takes deposit and collateral in one block.
    HydraAccomplice,
}

impl MinerPolicy {
    pub fn locks_collateral(&self) -> bool {
        matches!(self, MinerPolicy::M2mbaActive { .. })
    }

    pub fn calls_bribery(&self) -> bool {
        !matches!(
            self,
            MinerPolicy::HonestFeeMax
                | MinerPolicy::CensorRelated { .. }
                | MinerPolicy::M2mbaPassive
                | MinerPolicy::Opportunist
                | MinerPolicy::SdrbaBriber
        )
    }

    /// Policies that take the collateral themselves never include col-B.
    pub fn confiscates(&self) -> bool {
        matches!(
            self,
            MinerPolicy::M2mbaActive { confiscate: true }
                | MinerPolicy::M2mbaPassive
                | MinerPolicy::Defer { .. }
                | MinerPolicy::Opportunist
                | MinerPolicy::SdrbaBriber
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StrategyProfile {
    pub alice: AlicePolicy,
    pub bob: BobPolicy,
    pub miners: Vec<MinerPolicy>,
}

impl StrategyProfile {
    pub fn honest(scenario: &Scenario) -> Self {
        StrategyProfile {
            alice: AlicePolicy::Honest { publish: scenario.timing.publish },
            bob: BobPolicy::Honest { reveal: scenario.timing.publish.max(1) },
            miners: vec![MinerPolicy::HonestFeeMax; scenario.miners.len()],
        }
    }

    pub fn with_miner(mut self, i: usize, p: MinerPolicy) -> Self {
        self.miners[i] = p;
        self
    }
}

pub mod ids {
    use crate::ledger::TxId;

    pub const DEP_A: TxId = TxId(1);
    pub const DEP_B: TxId = TxId(2);
    pub const COL_B: TxId = TxId(3);
    pub const COL_PRE_A: TxId = TxId(4);
    pub const COL_PRE_A_PRIME: TxId = TxId(5);
    pub const COL_PRE_AA: TxId = TxId(6);
    pub const COL_PRE_B: TxId = TxId(7);
    pub const DEPLOY: TxId = TxId(8);
    /// The depositor's completion of a partial block.
    pub const EXCHANGE_DEP_M: TxId = TxId(900);
    pub const EXCHANGE_COL: TxId = TxId(901);

    /// Transactions a miner creates for its own block.
    pub fn miner(round: u64, seq: u32) -> TxId {
        TxId(1_000 + round as u32 * 16 + seq)
    }
}

fn redeem(id: TxId, creator: PartyId, fee: Tokens, witness: Witness, contract: ContractId, path: PathName) -> Tx {
    Tx { id, creator, fee, witness, action: TxAction::Redeem { contract, path } }
}

fn scheduled_fee(s: &Scenario, key: FeeKey) -> Tokens {
    s.fees.schedule.as_ref().map_or(Tokens::ZERO, |f| f.paid(key))
}

/// Transactions each party can sign.
pub mod txs {
    use super::*;

    pub fn dep_a(s: &Scenario) -> Tx {
        let w = Witness::signed(PartyId::Alice).with(Slot::A, SECRET_A);
        redeem(ids::DEP_A, PartyId::Alice, s.fees.alice_deposit, w, ContractId::Deposit, PathName::DepA)
    }

    pub fn dep_b(s: &Scenario) -> Tx {
        let mut w = Witness::signed(PartyId::Bob);
        if s.protocol != Protocol::Naive {
            w = w.with(Slot::B, SECRET_B);
        }
        redeem(ids::DEP_B, PartyId::Bob, s.fees.bob_deposit, w, ContractId::Deposit, PathName::DepB)
    }

    pub fn col_b(s: &Scenario) -> Tx {
        let w = Witness::signed(PartyId::Bob);
        redeem(ids::COL_B, PartyId::Bob, s.fees.bob_collateral, w, ContractId::Collateral, PathName::ColB)
    }

    pub fn col_pre_a(s: &Scenario) -> Tx {
        let w = Witness::signed(PartyId::Alice).with(Slot::A, SECRET_A);
        let fee = scheduled_fee(s, FeeKey::PreA);
        redeem(ids::COL_PRE_A, PartyId::Alice, fee, w, ContractId::AliceCollateral, PathName::ColPreA)
    }

    pub fn col_pre_a_prime(s: &Scenario) -> Tx {
        let w = Witness::signed(PartyId::Alice).with(Slot::APrime, SECRET_A_PRIME);
        let fee = scheduled_fee(s, FeeKey::PreAPrime);
        redeem(ids::COL_PRE_A_PRIME, PartyId::Alice, fee, w, ContractId::AliceCollateral, PathName::ColPreAPrime)
    }

    pub fn col_pre_aa(s: &Scenario) -> Tx {
        let w = Witness::signed(PartyId::Alice).with(Slot::A, SECRET_A).with(Slot::APrime, SECRET_A_PRIME);
        let fee = scheduled_fee(s, FeeKey::PreAA);
        redeem(ids::COL_PRE_AA, PartyId::Alice, fee, w, ContractId::AliceCollateral, PathName::ColPreAA)
    }

    pub fn col_pre_b(s: &Scenario) -> Tx {
        let w = Witness::signed(PartyId::Bob).with(Slot::B, SECRET_B);
        let fee = scheduled_fee(s, FeeKey::PreB);
        redeem(ids::COL_PRE_B, PartyId::Bob, fee, w, ContractId::BobCollateral, PathName::ColPreB)
    }

    pub fn deploy_bribery(s: &Scenario) -> Tx {
        let reserve = s.fees.bob_deposit + s.fees.bribery_contract;
        let c = BriberyContract::naive(PartyId::Bob, s.amounts.deposit, s.bribes.bribe, reserve, s.timing.deadline, SECRET_A);
        Tx {
            id: ids::DEPLOY,
            creator: PartyId::Bob,
            fee: s.fees.bribery_contract,
            witness: Witness::signed(PartyId::Bob),
            action: TxAction::Deploy(Box::new(c)),
        }
    }

    /// Miner path on a deposit or collateral using both preimages.
    pub fn miner_claim(id: TxId, creator: PartyId, contract: ContractId) -> Tx {
        let path = if contract == ContractId::Deposit { PathName::DepM } else { PathName::ColM };
        let w = Witness::signed(creator).with(Slot::A, SECRET_A).with(Slot::B, SECRET_B);
        redeem(id, creator, Tokens::ZERO, w, contract, path)
    }

    pub fn call(id: TxId, creator: PartyId, call: BriberyCall) -> Tx {
        Tx { id, creator, fee: Tokens::ZERO, witness: Witness::signed(creator), action: TxAction::Call(call) }
    }
}

/// Alice's and Bob's broadcasts at the end of `round`.
pub fn parties_act(s: &Scenario, profile: &StrategyProfile, state: &mut ChainState, round: Round) {
    for tx in alice_txs(s, profile.alice, state, round) {
        state.broadcast(tx);
    }
    for tx in bob_txs(s, profile.bob, state, round) {
        state.broadcast(tx);
    }
}

fn redeemable(state: &ChainState, id: ContractId) -> bool {
    state.contract(id).is_some_and(|c| c.is_redeemable())
}

fn alice_txs(s: &Scenario, policy: AlicePolicy, state: &ChainState, round: Round) -> Vec<Tx> {
    let t = s.timing.deadline;
    if s.protocol != Protocol::Demba {
        return match policy {
            AlicePolicy::Honest { publish } | AlicePolicy::CensoredFallback { publish } if round == publish && publish <= t => {
                vec![txs::dep_a(s)]
            }
            _ => Vec::new(),
        };
    }
    match policy {
        AlicePolicy::Honest { publish } if round == publish && publish <= t => vec![txs::col_pre_a(s)],
        AlicePolicy::OfflineThenRefund if round == t => vec![txs::col_pre_a_prime(s)],
        AlicePolicy::GriefDoubleReveal if round == t => vec![txs::col_pre_aa(s)],
        AlicePolicy::CensoredFallback { publish } => {
            if round == publish && publish <= t {
                vec![txs::col_pre_a(s)]
            } else if round == t.max(publish) && redeemable(state, ContractId::AliceCollateral) {
                vec![txs::col_pre_aa(s)]
            } else {
                Vec::new()
            }
        }
        _ => Vec::new(),
    }
}

fn bob_txs(s: &Scenario, policy: BobPolicy, state: &ChainState, round: Round) -> Vec<Tx> {
    let t = s.timing.deadline;
    let refunds = |out: &mut Vec<Tx>| match s.protocol {
        Protocol::Naive => {
            if round == t && redeemable(state, ContractId::Deposit) {
                out.push(txs::dep_b(s));
            }
        }
        Protocol::Mad => {
            if round == t {
                if redeemable(state, ContractId::Deposit) {
                    out.push(txs::dep_b(s));
                }
                if redeemable(state, ContractId::Collateral) {
                    out.push(txs::col_b(s));
                }
            }
        }
        Protocol::He => {
            if round == t && redeemable(state, ContractId::Deposit) {
                out.push(txs::dep_b(s));
            }
            if round >= t + s.timing.refund_delay && redeemable(state, ContractId::Collateral) && !state.in_mempool(ids::COL_B) {
                out.push(txs::col_b(s));
            }
        }
        Protocol::Demba => {}
    };
    let mut out = Vec::new();
    match policy {
        BobPolicy::Honest { reveal } => {
            if s.protocol == Protocol::Demba {
                if round == reveal.min(t) {
                    out.push(txs::col_pre_b(s));
                }
            } else {
                refunds(&mut out);
            }
        }
        BobPolicy::Delay { rounds } => {
            if round + 1 == t + rounds.max(1) {
                out.push(txs::col_pre_b(s));
            }
        }
        BobPolicy::NaiveBriber => {
            if round == 0 {
                out.push(txs::deploy_bribery(s));
            }
            refunds(&mut out);
        }
        BobPolicy::B3a { .. } | BobPolicy::HydraBriber => {
            if round == 0 {
                out.push(txs::deploy_bribery(s));
            }
            // The attack never went through: fall back to the refunds.
            if round > t && redeemable(state, ContractId::Deposit) {
                out.push(txs::dep_b(s));
                if redeemable(state, ContractId::Collateral) {
                    out.push(txs::col_b(s));
                }
            }
        }
        BobPolicy::ReverseBribe => refunds(&mut out),
        BobPolicy::Silent => {}
    }
    out
}

/// Terms on which a miner buys the depositor's help with a partial block:
/// the miner pays through the coinbase, the depositor adds the redemptions
/// only he can sign or unlock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exchange {
    B3a(B3aCase),
    /// Deposit only; the collateral is left to whoever mines next.
    Sdrba,
    /// Deposit and collateral, after a censored window.
    Hydra,
}

impl Exchange {
    fn accepted_by(self, bob: BobPolicy) -> bool {
        match (self, bob) {
            (Exchange::B3a(c), BobPolicy::B3a { case }) => c == case,
            (Exchange::Sdrba, BobPolicy::ReverseBribe) | (Exchange::Hydra, BobPolicy::HydraBriber) => true,
            _ => false,
        }
    }

    /// Whether the offer must carry a claim on the depositor's bribery contract.
    fn claims_bribes(self) -> bool {
        self != Exchange::Sdrba
    }
}

/// Partial block a miner offers the depositor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub exchange: Exchange,
    pub coinbase: Vec<(PartyId, Tokens)>,
    pub txs: Vec<Tx>,
}

/// Coinbase amount the depositor expects for each exchange.
pub fn exchange_price(s: &Scenario, ex: Exchange) -> Tokens {
    let (dep, col, br, premium) = (s.amounts.deposit.0, s.amounts.collateral.0, s.bribes.bribe.0, s.bribes.premium.0);
    match ex {
        Exchange::B3a(B3aCase::One) => Tokens(dep.saturating_sub(br)),
        Exchange::B3a(B3aCase::Two) => Tokens((dep + col).saturating_sub(2 * br)),
        Exchange::Sdrba | Exchange::Hydra => Tokens(col + premium),
    }
}

/// The depositor's acceptance predicate: the completing transactions if the
/// proposal matches his terms exactly, otherwise `None`.
pub fn complete_exchange(s: &Scenario, policy: BobPolicy, proposal: &Proposal, state: &ChainState) -> Option<Vec<Tx>> {
    let ex = proposal.exchange;
    if !ex.accepted_by(policy) || proposal.coinbase != vec![(PartyId::Bob, exchange_price(s, ex))] {
        return None;
    }
    let claims = proposal.txs.iter().any(|t| matches!(t.action, TxAction::Call(BriberyCall::ClaimBribe(_))));
    if claims != ex.claims_bribes() || !redeemable(state, ContractId::Deposit) {
        return None;
    }
    let dep_m = txs::miner_claim(ids::EXCHANGE_DEP_M, PartyId::Bob, ContractId::Deposit);
    let col = match ex {
        Exchange::Sdrba => return Some(vec![dep_m]),
        Exchange::B3a(B3aCase::One) => Tx { id: ids::EXCHANGE_COL, ..txs::col_b(s) },
        Exchange::B3a(B3aCase::Two) | Exchange::Hydra => {
            txs::miner_claim(ids::EXCHANGE_COL, PartyId::Bob, ContractId::Collateral)
        }
    };
    redeemable(state, ContractId::Collateral).then(|| vec![dep_m, col])
}

/// Miner-earned fee of `tx` if it were applied to `state` now.
pub fn earned_fee(state: &ChainState, tx: &Tx, round: Round) -> Option<Tokens> {
    match &tx.action {
        TxAction::Redeem { contract, path } => state
            .contract(*contract)?
            .plan_redeem(*path, &tx.witness, tx.fee, round, state)
            .ok()
            .map(|p| p.miner_fee),
        _ => state.validate_tx(tx, round).ok().map(|_| tx.fee),
    }
}

struct Builder<'a> {
    scenario: &'a Scenario,
    round: Round,
    me: PartyId,
    scratch: ChainState,
    txs: Vec<Tx>,
    seq: u32,
}

impl<'a> Builder<'a> {
    fn new(scenario: &'a Scenario, state: &ChainState, round: Round, me: PartyId) -> Self {
        Builder { scenario, round, me, scratch: state.clone(), txs: Vec::new(), seq: 0 }
    }

    fn try_push(&mut self, tx: Tx) -> bool {
        if self.txs.len() as u32 >= self.scenario.capacity {
            return false;
        }
        let mut next = self.scratch.clone();
        if next.apply_tx(&tx, self.round, self.me).is_ok() {
            self.scratch = next;
            self.txs.push(tx);
            true
        } else {
            false
        }
    }

    fn next_id(&mut self) -> TxId {
        self.seq += 1;
        ids::miner(self.round, self.seq)
    }

    fn own(&mut self, make: impl FnOnce(TxId, PartyId) -> Tx) -> bool {
        let id = self.next_id();
        let tx = make(id, self.me);
        self.try_push(tx)
    }

    /// Greedy fill from the mempool by earned fee, skipping `skip`.
    fn greedy(&mut self, skip: impl Fn(&Tx) -> bool) {
        let floor = self.scenario.fees.unrelated;
        let mut pool: Vec<(Tokens, Tx)> = self
            .scratch
            .mempool
            .iter()
            .filter(|t| !skip(t))
            .filter_map(|t| earned_fee(&self.scratch, t, self.round).map(|e| (e, t.clone())))
            .filter(|(e, _)| *e >= floor)
            .collect();
        pool.sort_by(|(ea, ta), (eb, tb)| eb.cmp(ea).then(ta.id.cmp(&tb.id)));
        for (_, tx) in pool {
            self.try_push(tx);
        }
    }

    fn dep_a_pending(&self) -> bool {
        self.scratch
            .mempool
            .iter()
            .any(|t| t.redeems(ContractId::Deposit, PathName::DepA) && self.scratch.validate_tx(t, self.round).is_ok())
    }

    fn bribery_open(&self, kind: BriberyKind) -> bool {
        self.scratch.bribery.as_ref().is_some_and(|b| b.kind == kind && !b.settled)
    }

    fn request(&mut self, kind: BriberyKind) {
        if self.round <= self.scenario.timing.deadline && self.bribery_open(kind) && self.dep_a_pending() {
            self.own(|id, me| txs::call(id, me, BriberyCall::RequestBribe));
        }
    }

    fn claim(&mut self, kind: BriberyKind) {
        if self.bribery_open(kind) && self.scratch.known_preimage(Slot::A).is_some() {
            self.own(|id, me| txs::call(id, me, BriberyCall::ClaimBribe(SECRET_A)));
        }
    }

    fn confiscate(&mut self) -> bool {
        let known = self.scratch.known_preimage(Slot::A).is_some() && self.scratch.known_preimage(Slot::B).is_some();
        known && redeemable(&self.scratch, ContractId::Collateral) && self.own(|id, me| txs::miner_claim(id, me, ContractId::Collateral))
    }

    fn finish(self, coinbase: Vec<(PartyId, Tokens)>) -> Block {
        let cap = self.scenario.capacity;
        Block {
            round: self.round,
            miner: self.me,
            filler: cap - self.txs.len() as u32,
            txs: self.txs,
            capacity: cap,
            coinbase,
        }
    }
}

fn is_dep_a(t: &Tx) -> bool {
    t.redeems(ContractId::Deposit, PathName::DepA)
}

fn is_col_b(t: &Tx) -> bool {
    t.redeems(ContractId::Collateral, PathName::ColB)
}

/// Block content the miner `me` produces at `round`.
pub fn build_block(s: &Scenario, profile: &StrategyProfile, state: &ChainState, round: Round, me: PartyId) -> Block {
    let policy = &profile.miners[me.miner_index().expect("miner")];
    let t = s.timing.deadline;
    let mut b = Builder::new(s, state, round, me);
    let before = round <= t;
    let keep_col = policy.confiscates();
    match policy {
        MinerPolicy::HonestFeeMax => b.greedy(|_| false),
        MinerPolicy::CensorRelated { targets, until } => {
            let active = round <= *until;
            b.greedy(|tx| active && matches!(tx.action, TxAction::Redeem { contract, .. } if targets.contains(&contract)));
        }
        MinerPolicy::BribeAccomplice => {
            if before {
                b.request(BriberyKind::Naive);
                b.greedy(is_dep_a);
            } else {
                b.greedy(|_| false);
                b.claim(BriberyKind::Naive);
            }
        }
        MinerPolicy::B3aAccomplice { case } => {
            if before {
                b.request(BriberyKind::Naive);
                b.greedy(is_dep_a);
            } else if let Some(block) = exchange_block(s, profile, state, round, me, Exchange::B3a(*case)) {
                return block;
            } else {
                b.greedy(|_| false);
                b.claim(BriberyKind::Naive);
            }
        }
        MinerPolicy::M2mbaActive { confiscate } => {
            if before {
                b.request(BriberyKind::MinerToMiner);
                b.greedy(is_dep_a);
            } else {
                b.greedy(|tx| keep_col && is_col_b(tx));
                if *confiscate && b.confiscate() {
                    b.claim(BriberyKind::MinerToMiner);
                }
            }
        }
        MinerPolicy::M2mbaPassive => {
            b.greedy(|tx| (before && is_dep_a(tx)) || is_col_b(tx));
            if !before {
                b.confiscate();
            }
        }
        MinerPolicy::Defer { until } => {
            let locker = state.bribery.as_ref().is_some_and(|c| c.is_locker(me));
            if before && locker {
                b.request(BriberyKind::MinerToMiner);
            }
            b.greedy(|tx| (before && is_dep_a(tx)) || is_col_b(tx));
            if round >= *until && b.confiscate() && locker {
                b.claim(BriberyKind::MinerToMiner);
            }
        }
        MinerPolicy::Opportunist => {
            b.greedy(is_col_b);
            b.confiscate();
        }
        MinerPolicy::SdrbaBriber => {
            if let Some(block) = exchange_block(s, profile, state, round, me, Exchange::Sdrba) {
                return block;
            }
            b.greedy(is_col_b);
            b.confiscate();
        }
        MinerPolicy::HydraAccomplice => {
            if before {
                b.request(BriberyKind::Naive);
                b.greedy(is_dep_a);
            } else if let Some(block) = exchange_block(s, profile, state, round, me, Exchange::Hydra) {
                return block;
            } else {
                b.greedy(|_| false);
                b.claim(BriberyKind::Naive);
            }
        }
    }
    b.finish(Vec::new())
}

fn exchange_block(s: &Scenario, profile: &StrategyProfile, state: &ChainState, round: Round, me: PartyId, ex: Exchange) -> Option<Block> {
    let open = state.bribery.as_ref().is_some_and(|c| c.kind == BriberyKind::Naive && !c.settled);
    if (ex.claims_bribes() && !open) || state.known_preimage(Slot::A).is_none() {
        return None;
    }
    let claim = ex.claims_bribes().then(|| txs::call(ids::miner(round, 15), me, BriberyCall::ClaimBribe(SECRET_A)));
    let proposal = Proposal { exchange: ex, coinbase: vec![(PartyId::Bob, exchange_price(s, ex))], txs: claim.iter().cloned().collect() };
    let mut txs = complete_exchange(s, profile.bob, &proposal, state)?;
    txs.extend(claim);
    let block = Block {
        round,
        miner: me,
        filler: s.capacity.checked_sub(txs.len() as u32)?,
        txs,
        capacity: s.capacity,
        coinbase: proposal.coinbase,
    };
    state.apply_block(&block).ok().map(|_| block)
}

impl fmt::Display for B3aCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            B3aCase::One => write!(f, "1"),
            B3aCase::Two => write!(f, "2"),
        }
    }
}

impl fmt::Display for AlicePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlicePolicy::Honest { publish } => write!(f, "honest({publish})"),
            AlicePolicy::OfflineThenRefund => write!(f, "offline-then-refund"),
            AlicePolicy::GriefDoubleReveal => write!(f, "grief-double-reveal"),
            AlicePolicy::CensoredFallback { publish } => write!(f, "censored-fallback({publish})"),
            AlicePolicy::Silent => write!(f, "silent"),
        }
    }
}

impl fmt::Display for BobPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BobPolicy::Honest { reveal } => write!(f, "honest({reveal})"),
            BobPolicy::Delay { rounds } => write!(f, "delay({rounds})"),
            BobPolicy::NaiveBriber => write!(f, "naive-briber"),
            BobPolicy::B3a { case } => write!(f, "b3a({case})"),
            BobPolicy::HydraBriber => write!(f, "hydra-briber"),
            BobPolicy::ReverseBribe => write!(f, "reverse-bribe"),
            BobPolicy::Silent => write!(f, "silent"),
        }
    }
}

impl fmt::Display for MinerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MinerPolicy::HonestFeeMax => write!(f, "honest-fee-max"),
            MinerPolicy::CensorRelated { targets, until } => {
                let t: Vec<String> = targets.iter().map(|c| c.to_string()).collect();
                write!(f, "censor-related({};{until})", t.join(","))
            }
            MinerPolicy::BribeAccomplice => write!(f, "bribe-accomplice"),
            MinerPolicy::B3aAccomplice { case } => write!(f, "b3a-accomplice({case})"),
            MinerPolicy::M2mbaActive { confiscate: true } => write!(f, "m2mba-active"),
            MinerPolicy::M2mbaActive { confiscate: false } => write!(f, "m2mba-accept"),
            MinerPolicy::M2mbaPassive => write!(f, "m2mba-passive"),
            MinerPolicy::Defer { until } => write!(f, "defer({until})"),
            MinerPolicy::Opportunist => write!(f, "opportunist"),
            MinerPolicy::SdrbaBriber => write!(f, "sdrba-briber"),
            MinerPolicy::HydraAccomplice => write!(f, "hydra-accomplice"),
        }
    }
}

fn arg(s: &str) -> Result<(&str, Option<&str>), String> {
    match s.split_once('(') {
        Some((name, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(|| format!("unclosed argument list in `{s}`"))?;
            Ok((name, Some(inner)))
        }
        None => Ok((s, None)),
    }
}

fn num(v: Option<&str>, what: &str) -> Result<u64, String> {
    v.ok_or_else(|| format!("`{what}` needs a round argument"))?
        .trim()
        .parse()
        .map_err(|_| format!("`{what}` argument must be a non-negative integer"))
}

fn case(v: Option<&str>) -> Result<B3aCase, String> {
    match v.map(str::trim) {
        Some("1") => Ok(B3aCase::One),
        Some("2") => Ok(B3aCase::Two),
        _ => Err("b3a case must be 1 or 2".into()),
    }
}

impl FromStr for AlicePolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (name, a) = arg(s.trim())?;
        Ok(match name {
            "honest" => AlicePolicy::Honest { publish: num(a, name)? },
            "offline-then-refund" => AlicePolicy::OfflineThenRefund,
            "grief-double-reveal" => AlicePolicy::GriefDoubleReveal,
            "censored-fallback" => AlicePolicy::CensoredFallback { publish: num(a, name)? },
            "silent" => AlicePolicy::Silent,
            other => return Err(format!("unknown alice policy `{other}`")),
        })
    }
}

impl FromStr for BobPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (name, a) = arg(s.trim())?;
        Ok(match name {
            "honest" => BobPolicy::Honest { reveal: a.map_or(Ok(1), |_| num(a, name))? },
            "delay" => BobPolicy::Delay { rounds: num(a, name)? },
            "naive-briber" => BobPolicy::NaiveBriber,
            "b3a" => BobPolicy::B3a { case: case(a)? },
            "hydra-briber" => BobPolicy::HydraBriber,
            "reverse-bribe" => BobPolicy::ReverseBribe,
            "silent" => BobPolicy::Silent,
            other => return Err(format!("unknown bob policy `{other}`")),
        })
    }
}

impl FromStr for MinerPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (name, a) = arg(s.trim())?;
        Ok(match name {
            "honest-fee-max" => MinerPolicy::HonestFeeMax,
            "censor-related" => {
                let inner = a.ok_or("censor-related needs (targets;until)")?;
                let (targets, until) = inner.split_once(';').ok_or("censor-related needs (targets;until)")?;
                let targets = targets
                    .split(',')
                    .map(|t| match t.trim() {
                        "dep" => Ok(ContractId::Deposit),
                        "col" => Ok(ContractId::Collateral),
                        "col-a" => Ok(ContractId::AliceCollateral),
                        "col-b" => Ok(ContractId::BobCollateral),
                        other => Err(format!("unknown contract `{other}`")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                MinerPolicy::CensorRelated { targets, until: num(Some(until), name)? }
            }
            "bribe-accomplice" => MinerPolicy::BribeAccomplice,
            "b3a-accomplice" => MinerPolicy::B3aAccomplice { case: case(a)? },
            "m2mba-active" => MinerPolicy::M2mbaActive { confiscate: true },
            "m2mba-accept" => MinerPolicy::M2mbaActive { confiscate: false },
            "m2mba-passive" => MinerPolicy::M2mbaPassive,
            "defer" => MinerPolicy::Defer { until: num(a, name)? },
            "opportunist" => MinerPolicy::Opportunist,
            "sdrba-briber" => MinerPolicy::SdrbaBriber,
            "hydra-accomplice" => MinerPolicy::HydraAccomplice,
            other => return Err(format!("unknown miner policy `{other}`")),
        })
    }
}
