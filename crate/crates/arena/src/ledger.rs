//! Fork-free, discrete-round ledger.
//!
//! One block per round, integer token accounting, a burn total, a mint log
//! for coinbase bribes, and an append-only registry of revealed preimages
//! that collateral-reading contracts consult.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::bribery::{BriberyCall, BriberyContract, Payment};
use crate::contracts::{self, ContractInstance, PathName, Status};

/// Block height. Genesis is 0; the block of round `r` moves the height to `r`.
pub type Round = u64;

/// Non-negative amount in base token units.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Tokens(pub u64);

impl Tokens {
    pub const ZERO: Tokens = Tokens(0);

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn checked_sub(self, rhs: Tokens) -> Option<Tokens> {
        self.0.checked_sub(rhs.0).map(Tokens)
    }

    pub fn times(self, n: u64) -> Tokens {
        Tokens(self.0 * n)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl Add for Tokens {
    type Output = Tokens;
    fn add(self, rhs: Tokens) -> Tokens {
        Tokens(self.0 + rhs.0)
    }
}

impl AddAssign for Tokens {
    fn add_assign(&mut self, rhs: Tokens) {
        self.0 += rhs.0;
    }
}

impl Sum for Tokens {
    fn sum<I: Iterator<Item = Tokens>>(iter: I) -> Tokens {
        Tokens(iter.map(|t| t.0).sum())
    }
}

impl fmt::Display for Tokens {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Alice,
    Bob,
    Miner,
    ExternalUser,
    BurnSink,
}

/// Ledger participant. Miners are indexed in scenario order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PartyId {
    Alice,
    Bob,
    Miner(u8),
    /// Source of the unrelated transactions that fill blocks.
    External,
    BurnSink,
}

impl PartyId {
    pub fn role(self) -> Role {
        match self {
            PartyId::Alice => Role::Alice,
            PartyId::Bob => Role::Bob,
            PartyId::Miner(_) => Role::Miner,
            PartyId::External => Role::ExternalUser,
            PartyId::BurnSink => Role::BurnSink,
        }
    }

    pub fn miner_index(self) -> Option<usize> {
        match self {
            PartyId::Miner(i) => Some(i as usize),
            _ => None,
        }
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::Alice => write!(f, "alice"),
            PartyId::Bob => write!(f, "bob"),
            PartyId::Miner(i) => write!(f, "miner{i}"),
            PartyId::External => write!(f, "external"),
            PartyId::BurnSink => write!(f, "burn"),
        }
    }
}

impl std::str::FromStr for PartyId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "alice" => Ok(PartyId::Alice),
            "bob" => Ok(PartyId::Bob),
            "external" => Ok(PartyId::External),
            "burn" => Ok(PartyId::BurnSink),
            other => other
                .strip_prefix("miner")
                .and_then(|i| i.parse::<u8>().ok())
                .map(PartyId::Miner)
                .ok_or_else(|| format!("unknown party `{other}`")),
        }
    }
}

/// Hashlock slot a preimage can fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slot {
    /// Alice's primary secret.
    A,
    /// Alice's late-redemption secret.
    APrime,
    B,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::A => write!(f, "pre-a"),
            Slot::APrime => write!(f, "pre-a'"),
            Slot::B => write!(f, "pre-b"),
        }
    }
}

/// Exact-witness model: a preimage satisfies a slot iff it equals the
/// committed value bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Preimage(pub u64);

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Witness {
    pub preimages: Vec<(Slot, Preimage)>,
    pub signers: Vec<PartyId>,
}

impl Witness {
    pub fn signed(by: PartyId) -> Self {
        Witness { preimages: Vec::new(), signers: vec![by] }
    }

    pub fn with(mut self, slot: Slot, value: Preimage) -> Self {
        self.preimages.push((slot, value));
        self
    }

    pub fn preimage(&self, slot: Slot) -> Option<Preimage> {
        self.preimages.iter().find(|(s, _)| *s == slot).map(|(_, p)| *p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContractId {
    /// Deposit contract (naive HTLC, MH-Dep, He-Dep, DEMBA deposit).
    Deposit,
    /// Collateral contract of MAD-HTLC and He-HTLC.
    Collateral,
    AliceCollateral,
    BobCollateral,
}

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContractId::Deposit => write!(f, "dep"),
            ContractId::Collateral => write!(f, "col"),
            ContractId::AliceCollateral => write!(f, "col-a"),
            ContractId::BobCollateral => write!(f, "col-b"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TxId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TxKind {
    Related,
    Unrelated,
    ContractCall,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TxAction {
    Redeem { contract: ContractId, path: PathName },
    Unrelated,
    /// Creates the bribery contract, moving its funding from the creator.
    Deploy(Box<BriberyContract>),
    Call(BriberyCall),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tx {
    pub id: TxId,
    pub creator: PartyId,
    pub fee: Tokens,
    pub witness: Witness,
    pub action: TxAction,
}

impl Tx {
    pub fn kind(&self) -> TxKind {
        match self.action {
            TxAction::Redeem { .. } => TxKind::Related,
            TxAction::Unrelated => TxKind::Unrelated,
            TxAction::Deploy(_) | TxAction::Call(_) => TxKind::ContractCall,
        }
    }

    pub fn redeems(&self, contract: ContractId, path: PathName) -> bool {
        matches!(self.action, TxAction::Redeem { contract: c, path: p } if c == contract && p == path)
    }
}

/// A block. Unrelated transactions are fungible, so they are carried as a
/// count (`filler`) rather than as individual records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub round: Round,
    pub miner: PartyId,
    pub txs: Vec<Tx>,
    pub filler: u32,
    pub capacity: u32,
    /// Coinbase outputs paid to parties other than the miner.
    pub coinbase: Vec<(PartyId, Tokens)>,
}

impl Block {
    pub fn empty(round: Round, miner: PartyId, capacity: u32) -> Self {
        Block { round, miner, txs: Vec::new(), filler: 0, capacity, coinbase: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MintReason {
    CoinbaseBribe,
    Endowment,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MintRecord {
    pub round: Round,
    pub to: PartyId,
    pub amount: Tokens,
    pub reason: MintReason,
    /// Miner whose coinbase carried the output, when there is one.
    pub payer: Option<PartyId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Reveal {
    pub value: Preimage,
    pub round: Round,
}

/// Token books. Kept apart from the strategic state so that expectation
/// code can memoise on the latter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Books {
    pub balances: BTreeMap<PartyId, Tokens>,
    pub burned: Tokens,
    pub minted: Tokens,
    pub mints: Vec<MintRecord>,
    /// Bribes credited by a bribery contract, including self-settled ones.
    pub bribe_income: BTreeMap<PartyId, Tokens>,
    pub coinbase_paid: BTreeMap<PartyId, Tokens>,
    /// Last round in which a contract paid the party.
    pub last_payout: BTreeMap<PartyId, Round>,
}

impl Books {
    pub fn balance(&self, p: PartyId) -> Tokens {
        self.balances.get(&p).copied().unwrap_or_default()
    }

    pub(crate) fn credit(&mut self, p: PartyId, amount: Tokens) {
        if p == PartyId::BurnSink {
            self.burned += amount;
        } else {
            *self.balances.entry(p).or_default() += amount;
        }
    }

    pub(crate) fn debit(&mut self, p: PartyId, amount: Tokens) -> Result<(), LedgerError> {
        let bal = self.balance(p);
        let left = bal.checked_sub(amount).ok_or(LedgerError::Underflow { party: p, needed: amount, held: bal })?;
        self.balances.insert(p, left);
        Ok(())
    }

    pub(crate) fn payout(&mut self, p: PartyId, amount: Tokens, round: Round) {
        self.credit(p, amount);
        if p != PartyId::BurnSink && !amount.is_zero() {
            self.last_payout.insert(p, round);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clause {
    Timelock,
    Hashlock(Slot),
    Signer(PartyId),
    CrossRead(ContractId, Slot),
    Unfunded,
    NoManualPath,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clause::Timelock => write!(f, "timelock"),
            Clause::Hashlock(s) => write!(f, "hashlock {s}"),
            Clause::Signer(p) => write!(f, "signature of {p}"),
            Clause::CrossRead(c, s) => write!(f, "cross-read {s} of {c}"),
            Clause::Unfunded => write!(f, "contract not yet funded"),
            Clause::NoManualPath => write!(f, "contract resolves automatically"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("unknown output {0}")]
    UnknownOutput(ContractId),
    #[error("contract {contract} has no path {path}")]
    UnknownPath { contract: ContractId, path: PathName },
    #[error("predicate failed on {contract}/{path}: {clause}")]
    PredicateFailed { contract: ContractId, path: PathName, clause: Clause },
    #[error("over-spend on {contract}: effects and fee need {needed}, deposit holds {held}")]
    OverSpend { contract: ContractId, needed: Tokens, held: Tokens },
    #[error("contract {0} spent twice in one block")]
    DuplicateSpend(ContractId),
    #[error("contract {0} is no longer redeemable")]
    AlreadyRedeemed(ContractId),
    #[error("stale round: expected {expected}, got {got}")]
    StaleRound { expected: Round, got: Round },
    #[error("transaction {index} invalid: {source}")]
    InvalidTx {
        index: usize,
        #[source]
        source: Box<LedgerError>,
    },
    #[error("{party} needs {needed} but holds {held}")]
    Underflow { party: PartyId, needed: Tokens, held: Tokens },
    #[error("block carries {used} transactions, capacity is {capacity}")]
    CapacityExceeded { used: u32, capacity: u32 },
    #[error("declared fee {declared} does not match the schedule's {expected}")]
    FeeMismatch { expected: Tokens, declared: Tokens },
    #[error("no bribery contract deployed")]
    NoBriberyContract,
    #[error("a bribery contract already exists")]
    BriberyExists,
    #[error("burn sink cannot spend")]
    BurnSinkSpend,
}

/// Fork-free chain state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainState {
    pub height: Round,
    pub contracts: BTreeMap<ContractId, ContractInstance>,
    pub bribery: Option<BriberyContract>,
    /// Append-only: (contract, slot) -> first reveal.
    pub revealed: BTreeMap<(ContractId, Slot), Reveal>,
    /// Slots whose preimage has appeared in any broadcast transaction.
    pub public_slots: BTreeSet<Slot>,
    pub mempool: Vec<Tx>,
    pub books: Books,
    pub unrelated_fee: Tokens,
    pub capacity: u32,
}

/// Everything in a state that can influence future play; books excluded.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StrategicKey {
    height: Round,
    contracts: Vec<(ContractId, ContractInstance)>,
    bribery: Option<BriberyContract>,
    revealed: Vec<((ContractId, Slot), Reveal)>,
    public_slots: Vec<Slot>,
    mempool: Vec<Tx>,
}

impl ChainState {
    pub fn new(unrelated_fee: Tokens, capacity: u32) -> Self {
        ChainState {
            height: 0,
            contracts: BTreeMap::new(),
            bribery: None,
            revealed: BTreeMap::new(),
            public_slots: BTreeSet::new(),
            mempool: Vec::new(),
            books: Books::default(),
            unrelated_fee,
            capacity,
        }
    }

    pub fn balance(&self, p: PartyId) -> Tokens {
        self.books.balance(p)
    }

    pub fn contract(&self, id: ContractId) -> Option<&ContractInstance> {
        self.contracts.get(&id)
    }

    pub fn strategic_key(&self) -> StrategicKey {
        StrategicKey {
            height: self.height,
            contracts: self.contracts.iter().map(|(k, v)| (*k, v.clone())).collect(),
            bribery: self.bribery.clone(),
            revealed: self.revealed.iter().map(|(k, v)| (*k, *v)).collect(),
            public_slots: self.public_slots.iter().copied().collect(),
            mempool: self.mempool.clone(),
        }
    }

    /// Σ balances + live deposits + bribery holdings + burned − minted.
    pub fn conservation_total(&self) -> i128 {
        let balances: i128 = self.books.balances.values().map(|t| t.0 as i128).sum();
        let live: i128 = self
            .contracts
            .values()
            .filter(|c| c.is_live())
            .map(|c| c.deposit.0 as i128)
            .sum();
        let held = self.bribery.as_ref().map_or(0, |b| b.holdings().0 as i128);
        balances + live + held + self.books.burned.0 as i128 - self.books.minted.0 as i128
    }

    /// Places a genesis contract funded by `funder`.
    pub fn fund_contract(&mut self, funder: PartyId, contract: ContractInstance) -> Result<(), LedgerError> {
        if contract.status == Status::Redeemable {
            self.books.debit(funder, contract.deposit)?;
        }
        self.contracts.insert(contract.id, contract);
        Ok(())
    }

    /// Preimage for `slot` if any broadcast or confirmed transaction has shown it.
    pub fn known_preimage(&self, slot: Slot) -> Option<Preimage> {
        if let Some(r) = self.revealed.iter().find(|((_, s), _)| *s == slot) {
            return Some(r.1.value);
        }
        self.mempool.iter().find_map(|tx| tx.witness.preimage(slot))
    }

    pub fn broadcast(&mut self, tx: Tx) {
        for (slot, _) in &tx.witness.preimages {
            self.public_slots.insert(*slot);
        }
        if !self.mempool.iter().any(|t| t.id == tx.id) {
            self.mempool.push(tx);
        }
    }

    pub fn in_mempool(&self, id: TxId) -> bool {
        self.mempool.iter().any(|t| t.id == id)
    }

    /// Read-only validity check of `tx` at `round`.
    pub fn validate_tx(&self, tx: &Tx, round: Round) -> Result<(), LedgerError> {
        let mut scratch = self.clone();
        scratch.apply_tx(tx, round, PartyId::BurnSink)
    }

    /// Applies one transaction in place. On error the state may be partially
    /// modified; callers that need atomicity work on a clone.
    pub(crate) fn apply_tx(&mut self, tx: &Tx, round: Round, miner: PartyId) -> Result<(), LedgerError> {
        if tx.creator == PartyId::BurnSink {
            return Err(LedgerError::BurnSinkSpend);
        }
        match &tx.action {
            TxAction::Unrelated => {
                self.books.debit(tx.creator, tx.fee)?;
                self.books.credit(miner, tx.fee);
            }
            TxAction::Redeem { contract, path } => self.apply_redeem(tx, *contract, *path, round, miner)?,
            TxAction::Deploy(contract) => {
                if self.bribery.is_some() {
                    return Err(LedgerError::BriberyExists);
                }
                self.books.debit(tx.creator, tx.fee)?;
                self.books.credit(miner, tx.fee);
                self.books.debit(tx.creator, contract.holdings())?;
                self.bribery = Some((**contract).clone());
            }
            TxAction::Call(call) => {
                self.books.debit(tx.creator, tx.fee)?;
                self.books.credit(miner, tx.fee);
                let mut bribery = self.bribery.take().ok_or(LedgerError::NoBriberyContract)?;
                let outcome = bribery.step(call, tx.creator, round, miner, self);
                let outcome = match outcome.and_then(|o| self.books.debit(tx.creator, o.locked).map(|_| o)) {
                    Ok(o) => o,
                    Err(e) => {
                        self.bribery = Some(bribery);
                        return Err(e);
                    }
                };
                self.bribery = Some(bribery);
                self.settle_payments(&outcome.payments, round);
            }
        }
        for (slot, _) in &tx.witness.preimages {
            self.public_slots.insert(*slot);
        }
        Ok(())
    }

    fn apply_redeem(
        &mut self,
        tx: &Tx,
        id: ContractId,
        name: PathName,
        round: Round,
        miner: PartyId,
    ) -> Result<(), LedgerError> {
        let c = self.contracts.get(&id).ok_or(LedgerError::UnknownOutput(id))?;
        let plan = c.plan_redeem(name, &tx.witness, tx.fee, round, self)?;
        if let Some((t, _)) = plan.forwards.iter().find(|(t, _)| !self.contracts.contains_key(t)) {
            return Err(LedgerError::UnknownOutput(*t));
        }
        self.execute_plan(id, &plan, round, miner, Some(&tx.witness));
        Ok(())
    }

    /// Moves the tokens of a checked plan and marks the contract redeemed.
    pub(crate) fn execute_plan(
        &mut self,
        id: ContractId,
        plan: &contracts::RedeemPlan,
        round: Round,
        miner: PartyId,
        witness: Option<&Witness>,
    ) {
        self.books.credit(miner, plan.miner_fee);
        self.books.burned += plan.fee_burned;
        for (to, amount) in &plan.transfers {
            let to = to.party().unwrap_or(miner);
            self.books.payout(to, *amount, round);
        }
        self.books.burned += plan.burned;
        for (target, amount) in &plan.forwards {
            let t = self.contracts.get_mut(target).expect("forward target exists");
            t.deposit += *amount;
            if t.status == Status::Dormant {
                t.status = Status::Redeemable;
            }
        }
        let c = self.contracts.get_mut(&id).expect("planned contract exists");
        c.deposit = Tokens::ZERO;
        c.status = Status::Redeemed { path: plan.path, round, miner };
        let secrets = c.secrets.clone();
        for (slot, value) in witness.map(|w| w.preimages.as_slice()).unwrap_or(&[]) {
            if secrets.iter().any(|(s, v)| s == slot && v == value) {
                self.revealed.entry((id, *slot)).or_insert(Reveal { value: *value, round });
            }
        }
    }

    pub(crate) fn settle_payments(&mut self, payments: &[Payment], round: Round) {
        for p in payments {
            if p.bribe {
                *self.books.bribe_income.entry(p.to).or_default() += p.amount;
            }
            if p.moves_tokens {
                self.books.payout(p.to, p.amount, round);
            }
        }
    }

    /// Applies a block atomically. The block round must be `height + 1` and
    /// every transaction must validate in order against the running state.
    pub fn apply_block(&self, block: &Block) -> Result<ChainState, LedgerError> {
        let expected = self.height + 1;
        if block.round != expected {
            return Err(LedgerError::StaleRound { expected, got: block.round });
        }
        let used = block.txs.len() as u32 + block.filler;
        if used > block.capacity {
            return Err(LedgerError::CapacityExceeded { used, capacity: block.capacity });
        }
        let mut next = self.clone();
        let mut spent = BTreeSet::new();
        for (index, tx) in block.txs.iter().enumerate() {
            if let TxAction::Redeem { contract, .. } = tx.action {
                if !spent.insert(contract) {
                    return Err(LedgerError::InvalidTx {
                        index,
                        source: Box::new(LedgerError::DuplicateSpend(contract)),
                    });
                }
            }
            next.apply_tx(tx, block.round, block.miner)
                .map_err(|e| LedgerError::InvalidTx { index, source: Box::new(e) })?;
        }
        let filler_fee = next.unrelated_fee.times(block.filler as u64);
        next.books
            .debit(PartyId::External, filler_fee)
            .map_err(|e| LedgerError::InvalidTx { index: block.txs.len(), source: Box::new(e) })?;
        next.books.credit(block.miner, filler_fee);
        for (to, amount) in &block.coinbase {
            next = next.mint(*to, *amount, MintReason::CoinbaseBribe, Some(block.miner), block.round);
        }
        contracts::settle_automatic(&mut next, block.round, block.miner);
        let included: BTreeSet<TxId> = block.txs.iter().map(|t| t.id).collect();
        next.mempool.retain(|t| !included.contains(&t.id));
        next.height = block.round;
        Ok(next)
    }

    /// Credits newly created tokens and logs them so conservation checks can
    /// net them out.
    pub fn mint(
        &self,
        to: PartyId,
        amount: Tokens,
        reason: MintReason,
        payer: Option<PartyId>,
        round: Round,
    ) -> ChainState {
        let mut next = self.clone();
        next.books.credit(to, amount);
        next.books.minted += amount;
        if let Some(p) = payer {
            *next.books.coinbase_paid.entry(p).or_default() += amount;
        }
        next.books.mints.push(MintRecord { round, to, amount, reason, payer });
        next
    }
}
