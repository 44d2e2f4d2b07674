//! Adversarial contracts: a depositor-funded censorship bribe (`Naive`) and
//! the miner-to-miner variant funded from locked collateral
//! (`MinerToMiner`). A guard failure leaves the state untouched and is still
//! a valid call.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::contracts::{PathName, Status};
use crate::ledger::{ChainState, ContractId, LedgerError, PartyId, Preimage, Round, Slot, Tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BriberyKind {
    /// Funded by the depositor; pays out once the refund path lands.
    Naive,
    /// Funded by colluding miners' locked collateral; pays out once the
    /// collateral contract is confiscated by a locker.
    MinerToMiner,
}

/// How the confiscating miner's proceeds are shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    /// A fixed bribe per censoring block.
    PerBlock,
    /// The locked collateral divided evenly across all censoring blocks.
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BriberyCall {
    LockCollateral(Tokens),
    RequestBribe,
    ClaimBribe(Preimage),
    RefundToBob,
    RefundToMiners,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Payment {
    pub to: PartyId,
    pub amount: Tokens,
    /// Counted as bribe income.
    pub bribe: bool,
    /// False for self-settled bribes that never leave the payer's lock.
    pub moves_tokens: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepOutcome {
    pub payments: Vec<Payment>,
    /// Tokens the caller moves into the contract.
    pub locked: Tokens,
    pub applied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BriberyContract {
    pub kind: BriberyKind,
    pub owner: PartyId,
    pub deadline: Round,
    pub bribe: Tokens,
    /// Per-recipient bribe overriding `bribe`.
    pub per_recipient: BTreeMap<PartyId, Tokens>,
    pub split: Split,
    /// Kept back from the bribe pool to cover the owner's own fees.
    pub reserve: Tokens,
    pub held: Tokens,
    pub bal_left: Tokens,
    /// Censoring blocks reserved per miner.
    pub requests: BTreeMap<PartyId, u64>,
    pub last_request: Option<Round>,
    pub locked: BTreeMap<PartyId, Tokens>,
    pub count: u64,
    pub secret: Preimage,
    pub settled: bool,
}

impl BriberyContract {
    pub fn naive(owner: PartyId, deposit: Tokens, bribe: Tokens, reserve: Tokens, deadline: Round, secret: Preimage) -> Self {
        BriberyContract {
            kind: BriberyKind::Naive,
            owner,
            deadline,
            bribe,
            per_recipient: BTreeMap::new(),
            split: Split::PerBlock,
            reserve,
            held: deposit,
            bal_left: deposit,
            requests: BTreeMap::new(),
            last_request: None,
            locked: BTreeMap::new(),
            count: 0,
            secret,
            settled: false,
        }
    }

    pub fn miner_to_miner(
        deployer: PartyId,
        bribe: Tokens,
        per_recipient: BTreeMap<PartyId, Tokens>,
        split: Split,
        deadline: Round,
        secret: Preimage,
    ) -> Self {
        BriberyContract {
            kind: BriberyKind::MinerToMiner,
            owner: deployer,
            deadline,
            bribe,
            per_recipient,
            split,
            reserve: Tokens::ZERO,
            held: Tokens::ZERO,
            bal_left: Tokens::ZERO,
            requests: BTreeMap::new(),
            last_request: None,
            locked: BTreeMap::new(),
            count: 0,
            secret,
            settled: false,
        }
    }

    /// Tokens currently held by the contract.
    pub fn holdings(&self) -> Tokens {
        self.held
    }

    pub fn requests_of(&self, p: PartyId) -> u64 {
        self.requests.get(&p).copied().unwrap_or(0)
    }

    pub fn total_requests(&self) -> u64 {
        self.requests.values().sum()
    }

    pub fn is_locker(&self, p: PartyId) -> bool {
        self.locked.contains_key(&p)
    }

    fn per_block(&self, to: PartyId, pool: Tokens) -> Tokens {
        match self.split {
            Split::PerBlock => self.per_recipient.get(&to).copied().unwrap_or(self.bribe),
            Split::Equal => Tokens(pool.0 / self.total_requests().max(1)),
        }
    }

    /// Executes one call. `chain` is the state before the call with this
    /// contract detached from it.
    pub fn step(
        &mut self,
        call: &BriberyCall,
        caller: PartyId,
        round: Round,
        miner: PartyId,
        chain: &ChainState,
    ) -> Result<StepOutcome, LedgerError> {
        let noop = Ok(StepOutcome::default());
        if self.settled {
            return noop;
        }
        match *call {
            BriberyCall::LockCollateral(amount) => {
                if self.kind != BriberyKind::MinerToMiner || round > self.deadline {
                    return noop;
                }
                let held = chain.balance(caller);
                if held < amount {
                    return Err(LedgerError::Underflow { party: caller, needed: amount, held });
                }
                *self.locked.entry(caller).or_default() += amount;
                self.held += amount;
                Ok(StepOutcome { payments: Vec::new(), locked: amount, applied: true })
            }
            BriberyCall::RequestBribe => {
                if caller != miner || self.last_request == Some(round) || round > self.deadline {
                    return noop;
                }
                if self.kind == BriberyKind::Naive {
                    let Some(left) = self.bal_left.checked_sub(self.bribe) else { return noop };
                    self.bal_left = left;
                }
                self.last_request = Some(round);
                *self.requests.entry(caller).or_default() += 1;
                self.count += 1;
                Ok(StepOutcome { applied: true, ..Default::default() })
            }
            BriberyCall::ClaimBribe(pre) => {
                if pre != self.secret {
                    return noop;
                }
                match self.kind {
                    BriberyKind::Naive => Ok(self.claim_naive(miner, chain)),
                    BriberyKind::MinerToMiner => Ok(self.claim_m2m(caller, chain)),
                }
            }
            BriberyCall::RefundToBob | BriberyCall::RefundToMiners => {
                let wanted = if self.kind == BriberyKind::Naive { BriberyCall::RefundToBob } else { BriberyCall::RefundToMiners };
                if *call != wanted || !self.refund_due(chain, round) {
                    return noop;
                }
                Ok(StepOutcome { payments: self.refund_all(), locked: Tokens::ZERO, applied: true })
            }
        }
    }

    fn claim_naive(&mut self, includer: PartyId, chain: &ChainState) -> StepOutcome {
        let Some(dep) = chain.contract(ContractId::Deposit) else { return StepOutcome::default() };
        let via = dep.redeemed_via();
        let refund_landed = matches!(via, Some(PathName::DepB) | Some(PathName::DepM));
        if !refund_landed || self.bal_left < self.bribe + self.reserve {
            return StepOutcome::default();
        }
        let mut payments = Vec::new();
        let mut paid = Tokens::ZERO;
        for (&to, &n) in &self.requests {
            let amount = self.bribe.times(n);
            paid += amount;
            payments.push(Payment { to, amount, bribe: true, moves_tokens: true });
        }
        payments.push(Payment { to: includer, amount: self.bribe, bribe: true, moves_tokens: true });
        paid += self.bribe;
        let rest = Tokens(self.held.0 - paid.0);
        payments.push(Payment { to: self.owner, amount: rest, bribe: false, moves_tokens: true });
        self.finish();
        StepOutcome { payments, locked: Tokens::ZERO, applied: true }
    }

    fn claim_m2m(&mut self, caller: PartyId, chain: &ChainState) -> StepOutcome {
        let Some(col) = chain.contract(ContractId::Collateral) else { return StepOutcome::default() };
        let Status::Redeemed { path: PathName::ColM, miner: confiscator, .. } = col.status else {
            return StepOutcome::default();
        };
        let Some(&pool) = self.locked.get(&confiscator) else { return StepOutcome::default() };
        let mut cost = Tokens::ZERO;
        for (&to, &n) in &self.requests {
            if to != confiscator {
                cost += self.per_block(to, pool).times(n);
            }
        }
        let incentive = self.split == Split::PerBlock && caller != confiscator;
        if incentive {
            cost += self.bribe;
        }
        if pool < cost {
            return StepOutcome::default();
        }
        let mut payments = Vec::new();
        for (&to, &n) in &self.requests {
            let amount = self.per_block(to, pool).times(n);
            payments.push(Payment { to, amount, bribe: true, moves_tokens: to != confiscator });
        }
        if incentive {
            payments.push(Payment { to: caller, amount: self.bribe, bribe: true, moves_tokens: true });
        }
        self.locked.insert(confiscator, Tokens(pool.0 - cost.0));
        payments.extend(self.refund_all());
        StepOutcome { payments, locked: Tokens::ZERO, applied: true }
    }

    fn finish(&mut self) {
        self.held = Tokens::ZERO;
        self.bal_left = Tokens::ZERO;
        self.requests.clear();
        self.locked.clear();
        self.settled = true;
    }

    fn refund_all(&mut self) -> Vec<Payment> {
        let payments = match self.kind {
            BriberyKind::Naive => vec![Payment { to: self.owner, amount: self.held, bribe: false, moves_tokens: true }],
            BriberyKind::MinerToMiner => self
                .locked
                .iter()
                .map(|(&to, &amount)| Payment { to, amount, bribe: false, moves_tokens: true })
                .collect(),
        };
        self.finish();
        payments
    }

    /// Failure conditions under which the funds go back to their owners.
    pub fn refund_due(&self, chain: &ChainState, round: Round) -> bool {
        let dep = chain.contract(ContractId::Deposit);
        let dep_a_in_time = dep.is_some_and(|d| {
            matches!(d.status, Status::Redeemed { path: PathName::DepA, round: r, .. } if r <= self.deadline)
        });
        if dep_a_in_time {
            return true;
        }
        match self.kind {
            BriberyKind::Naive => {
                let refunded = dep.is_some_and(|d| matches!(d.redeemed_via(), Some(PathName::DepB | PathName::DepM)));
                refunded && !chain.public_slots.contains(&Slot::A)
            }
            BriberyKind::MinerToMiner => match chain.contract(ContractId::Collateral).map(|c| c.status) {
                Some(Status::Redeemed { path: PathName::ColB, .. }) => true,
                Some(Status::Redeemed { path: PathName::ColM, miner, round: r }) => !self.is_locker(miner) || r <= round,
                _ => false,
            },
        }
    }
}

/// Block-end refund hook.
pub(crate) fn auto_refund(state: &mut ChainState, round: Round) {
    let Some(mut b) = state.bribery.take() else { return };
    if !b.settled && b.refund_due(state, round) {
        let payments = b.refund_all();
        state.settle_payments(&payments, round);
    }
    state.bribery = Some(b);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_is_once_per_block_and_miner_only() {
        let chain = ChainState::new(Tokens(0), 8);
        let mut b = BriberyContract::naive(PartyId::Bob, Tokens(100), Tokens(2), Tokens(2), 10, Preimage(7));
        let m = PartyId::Miner(0);
        b.step(&BriberyCall::RequestBribe, m, 3, m, &chain).unwrap();
        b.step(&BriberyCall::RequestBribe, m, 3, m, &chain).unwrap();
        b.step(&BriberyCall::RequestBribe, PartyId::Miner(1), 4, m, &chain).unwrap();
        b.step(&BriberyCall::RequestBribe, m, 11, m, &chain).unwrap();
        assert_eq!(b.total_requests(), 1);
        assert_eq!(b.bal_left, Tokens(98));
    }

    #[test]
    fn wrong_preimage_claim_is_noop() {
        let chain = ChainState::new(Tokens(0), 8);
        let mut b = BriberyContract::naive(PartyId::Bob, Tokens(100), Tokens(2), Tokens(2), 10, Preimage(7));
        let before = b.clone();
        let out = b.step(&BriberyCall::ClaimBribe(Preimage(8)), PartyId::Miner(0), 12, PartyId::Miner(0), &chain).unwrap();
        assert!(!out.applied);
        assert_eq!(b, before);
    }
}
