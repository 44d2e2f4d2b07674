//! Predicate-guarded deposits and the builders for each protocol variant.
//!
//! A contract holds one deposit and a list of redeem paths. A path fires when
//! its window contains the round, the witness carries every required preimage
//! and signature, and every cross-read over the revealed-preimage registry
//! holds. Exactly one path ever fires per contract.

pub mod bribery;
pub mod fees;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{ChainState, Clause, ContractId, LedgerError, PartyId, Preimage, Round, Slot, Tokens, Witness};
use fees::{FeeKey, FeeSchedule, ScheduleViolation};

/// Committed secrets used by every builder in this crate.
pub const SECRET_A: Preimage = Preimage(0x5EC7_A11C_E000_0001);
pub const SECRET_A_PRIME: Preimage = Preimage(0x5EC7_A11C_E000_0002);
pub const SECRET_B: Preimage = Preimage(0x5EC7_0B0B_0000_0003);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PathName {
    DepA,
    DepB,
    DepM,
    ColB,
    ColM,
    ColPreA,
    ColPreAPrime,
    ColPreAA,
    ColPreB,
    DepToAlice,
    DepToBob,
    DepBurn,
}

impl fmt::Display for PathName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PathName::DepA => "dep-A",
            PathName::DepB => "dep-B",
            PathName::DepM => "dep-M",
            PathName::ColB => "col-B",
            PathName::ColM => "col-M",
            PathName::ColPreA => "col-preA",
            PathName::ColPreAPrime => "col-preA'",
            PathName::ColPreAA => "col-preAA'",
            PathName::ColPreB => "col-preB",
            PathName::DepToAlice => "dep-to-alice",
            PathName::DepToBob => "dep-to-bob",
            PathName::DepBurn => "dep-burn",
        };
        f.write_str(s)
    }
}

/// Inclusive round window; `None` leaves that side open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub from: Option<Round>,
    pub to: Option<Round>,
}

impl Window {
    pub const ANY: Window = Window { from: None, to: None };

    pub fn until(last: Round) -> Window {
        Window { from: None, to: Some(last) }
    }

    /// Strictly after `round`.
    pub fn after(round: Round) -> Window {
        Window { from: Some(round + 1), to: None }
    }

    pub fn contains(&self, round: Round) -> bool {
        self.from.is_none_or(|f| round >= f) && self.to.is_none_or(|t| round <= t)
    }
}

/// Condition over another contract's revealed slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CrossRead {
    pub contract: ContractId,
    pub slot: Slot,
    pub revealed: bool,
}

impl CrossRead {
    pub fn holds(&self, state: &ChainState) -> bool {
        state.revealed.contains_key(&(self.contract, self.slot)) == self.revealed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Payee {
    Party(PartyId),
    /// Whoever mines the including block.
    BlockMiner,
}

impl Payee {
    pub fn party(self) -> Option<PartyId> {
        match self {
            Payee::Party(p) => Some(p),
            Payee::BlockMiner => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Amount {
    Fixed(Tokens),
    /// Deposit minus declared fee minus every fixed amount on the path.
    Rest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Effect {
    Transfer(Payee, Amount),
    Burn(Amount),
    Forward(ContractId, Amount),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeeRule {
    /// The miner keeps the declared fee.
    Declared,
    Schedule(FeeKey),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RedeemPath {
    pub name: PathName,
    pub preimages: Vec<Slot>,
    pub signers: Vec<PartyId>,
    pub window: Window,
    pub reads: Vec<CrossRead>,
    pub effects: Vec<Effect>,
    pub fee_rule: FeeRule,
}

impl RedeemPath {
    fn new(name: PathName, window: Window, effects: Vec<Effect>) -> Self {
        RedeemPath {
            name,
            preimages: Vec::new(),
            signers: Vec::new(),
            window,
            reads: Vec::new(),
            effects,
            fee_rule: FeeRule::Declared,
        }
    }

    fn hashlocks(mut self, slots: &[Slot]) -> Self {
        self.preimages = slots.to_vec();
        self
    }

    fn signer(mut self, p: PartyId) -> Self {
        self.signers.push(p);
        self
    }

    fn reads(mut self, reads: &[(ContractId, Slot, bool)]) -> Self {
        self.reads = reads.iter().map(|&(contract, slot, revealed)| CrossRead { contract, slot, revealed }).collect();
        self
    }

    fn scheduled(mut self, key: FeeKey) -> Self {
        self.fee_rule = FeeRule::Schedule(key);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Redeemable,
    /// Awaiting funds forwarded by another contract.
    Dormant,
    Redeemed { path: PathName, round: Round, miner: PartyId },
    Burned { round: Round },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContractInstance {
    pub id: ContractId,
    pub deposit: Tokens,
    pub paths: Vec<RedeemPath>,
    pub status: Status,
    /// Committed hashlock values; these are the slots exposed to cross-reads.
    pub secrets: Vec<(Slot, Preimage)>,
    pub schedule: Option<FeeSchedule>,
    /// Resolved at block end from cross-reads rather than by a transaction.
    pub automatic: bool,
}

/// Token movements a redemption would cause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedeemPlan {
    pub path: PathName,
    pub miner_fee: Tokens,
    pub fee_burned: Tokens,
    pub transfers: Vec<(Payee, Tokens)>,
    pub burned: Tokens,
    pub forwards: Vec<(ContractId, Tokens)>,
}

impl ContractInstance {
    fn new(id: ContractId, deposit: Tokens, secrets: Vec<(Slot, Preimage)>, paths: Vec<RedeemPath>) -> Self {
        ContractInstance {
            id,
            deposit,
            paths,
            status: Status::Redeemable,
            secrets,
            schedule: None,
            automatic: false,
        }
    }

    pub fn is_live(&self) -> bool {
        matches!(self.status, Status::Redeemable | Status::Dormant)
    }

    pub fn is_redeemable(&self) -> bool {
        self.status == Status::Redeemable
    }

    pub fn redeemed_via(&self) -> Option<PathName> {
        match self.status {
            Status::Redeemed { path, .. } => Some(path),
            _ => None,
        }
    }

    pub fn redeemed_round(&self) -> Option<Round> {
        match self.status {
            Status::Redeemed { round, .. } | Status::Burned { round } => Some(round),
            _ => None,
        }
    }

    pub fn secret(&self, slot: Slot) -> Option<Preimage> {
        self.secrets.iter().find(|(s, _)| *s == slot).map(|(_, v)| *v)
    }

    pub fn exposed_slots(&self) -> Vec<Slot> {
        self.secrets.iter().map(|(s, _)| *s).collect()
    }

    pub fn has_path(&self, name: PathName) -> bool {
        self.paths.iter().any(|p| p.name == name)
    }

    fn select(&self, name: PathName, round: Round) -> Result<&RedeemPath, LedgerError> {
        let mut named = self.paths.iter().filter(|p| p.name == name).peekable();
        if named.peek().is_none() {
            return Err(LedgerError::UnknownPath { contract: self.id, path: name });
        }
        named.find(|p| p.window.contains(round)).ok_or(LedgerError::PredicateFailed {
            contract: self.id,
            path: name,
            clause: Clause::Timelock,
        })
    }

    /// Checks every clause of the named path and computes its effects.
    pub fn plan_redeem(
        &self,
        name: PathName,
        witness: &Witness,
        fee: Tokens,
        round: Round,
        state: &ChainState,
    ) -> Result<RedeemPlan, LedgerError> {
        let fail = |clause| LedgerError::PredicateFailed { contract: self.id, path: name, clause };
        match self.status {
            Status::Redeemable => {}
            Status::Dormant => return Err(fail(Clause::Unfunded)),
            Status::Redeemed { .. } | Status::Burned { .. } => return Err(LedgerError::AlreadyRedeemed(self.id)),
        }
        if self.automatic {
            return Err(fail(Clause::NoManualPath));
        }
        let path = self.select(name, round)?;
        for slot in &path.preimages {
            if witness.preimage(*slot).is_none() || witness.preimage(*slot) != self.secret(*slot) {
                return Err(fail(Clause::Hashlock(*slot)));
            }
        }
        for signer in &path.signers {
            if !witness.signers.contains(signer) {
                return Err(fail(Clause::Signer(*signer)));
            }
        }
        for read in &path.reads {
            if !read.holds(state) {
                return Err(fail(Clause::CrossRead(read.contract, read.slot)));
            }
        }
        let (miner_fee, fee_burned) = match path.fee_rule {
            FeeRule::Declared => (fee, Tokens::ZERO),
            FeeRule::Schedule(key) => {
                let schedule = self.schedule.as_ref().expect("scheduled path without schedule");
                schedule
                    .split(key, fee, round)
                    .map_err(|e| LedgerError::FeeMismatch { expected: e.expected, declared: e.declared })?
            }
        };
        self.resolve_effects(path, fee, miner_fee, fee_burned)
    }

    fn resolve_effects(
        &self,
        path: &RedeemPath,
        fee: Tokens,
        miner_fee: Tokens,
        fee_burned: Tokens,
    ) -> Result<RedeemPlan, LedgerError> {
        let fixed: u64 = path
            .effects
            .iter()
            .map(|e| match e {
                Effect::Transfer(_, Amount::Fixed(t)) | Effect::Burn(Amount::Fixed(t)) | Effect::Forward(_, Amount::Fixed(t)) => t.0,
                _ => 0,
            })
            .sum();
        let needed = Tokens(fixed + fee.0);
        let rest = self
            .deposit
            .checked_sub(needed)
            .ok_or(LedgerError::OverSpend { contract: self.id, needed, held: self.deposit })?;
        let amount = |a: &Amount| match a {
            Amount::Fixed(t) => *t,
            Amount::Rest => rest,
        };
        let mut plan = RedeemPlan {
            path: path.name,
            miner_fee,
            fee_burned,
            transfers: Vec::new(),
            burned: Tokens::ZERO,
            forwards: Vec::new(),
        };
        for e in &path.effects {
            match e {
                Effect::Transfer(to, a) => plan.transfers.push((*to, amount(a))),
                Effect::Burn(a) => plan.burned += amount(a),
                Effect::Forward(c, a) => plan.forwards.push((*c, amount(a))),
            }
        }
        Ok(plan)
    }

    /// First automatic path whose window and cross-reads hold.
    pub fn automatic_path(&self, state: &ChainState, round: Round) -> Option<&RedeemPath> {
        if !self.automatic || !self.is_redeemable() {
            return None;
        }
        self.paths
            .iter()
            .find(|p| p.window.contains(round) && p.reads.iter().all(|r| r.holds(state)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("refund delay must be at least 1")]
    RefundDelay,
    #[error("deduction must be positive")]
    ZeroDeduction,
    #[error("{which} collateral {held} cannot cover deduction plus fee {needed}")]
    CollateralTooSmall { which: &'static str, held: Tokens, needed: Tokens },
    #[error("schedule deadline {schedule} differs from contract deadline {contract}")]
    DeadlineMismatch { schedule: Round, contract: Round },
    #[error(transparent)]
    Schedule(#[from] ScheduleViolation),
}

fn positive(t: Tokens, what: &'static str) -> Result<(), BuildError> {
    if t.is_zero() {
        Err(BuildError::NonPositive(what))
    } else {
        Ok(())
    }
}

use Effect::{Burn, Forward, Transfer};
use Payee::{BlockMiner, Party};

/// Single deposit: Alice with her preimage up to the deadline, Bob after it.
pub fn build_naive_htlc(
    alice: PartyId,
    bob: PartyId,
    deposit: Tokens,
    secret_a: Preimage,
    deadline: Round,
) -> Result<ContractInstance, BuildError> {
    positive(deposit, "deposit")?;
    if deadline == 0 {
        return Err(BuildError::NonPositive("deadline"));
    }
    Ok(ContractInstance::new(
        ContractId::Deposit,
        deposit,
        vec![(Slot::A, secret_a)],
        vec![
            RedeemPath::new(PathName::DepA, Window::until(deadline), vec![Transfer(Party(alice), Amount::Rest)])
                .hashlocks(&[Slot::A])
                .signer(alice),
            RedeemPath::new(PathName::DepB, Window::after(deadline), vec![Transfer(Party(bob), Amount::Rest)])
                .signer(bob),
        ],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Digests {
    pub a: Preimage,
    pub a_prime: Preimage,
    pub b: Preimage,
}

impl Default for Digests {
    fn default() -> Self {
        Digests { a: SECRET_A, a_prime: SECRET_A_PRIME, b: SECRET_B }
    }
}

/// Deposit and collateral, each with a miner path unlocked by both preimages.
pub fn build_mad_htlc(
    alice: PartyId,
    bob: PartyId,
    deposit: Tokens,
    collateral: Tokens,
    digests: Digests,
    deadline: Round,
) -> Result<(ContractInstance, ContractInstance), BuildError> {
    positive(deposit, "deposit")?;
    positive(collateral, "collateral")?;
    let secrets = vec![(Slot::A, digests.a), (Slot::B, digests.b)];
    let dep = ContractInstance::new(
        ContractId::Deposit,
        deposit,
        secrets.clone(),
        vec![
            RedeemPath::new(PathName::DepA, Window::until(deadline), vec![Transfer(Party(alice), Amount::Rest)])
                .hashlocks(&[Slot::A])
                .signer(alice),
            RedeemPath::new(PathName::DepB, Window::after(deadline), vec![Transfer(Party(bob), Amount::Rest)])
                .hashlocks(&[Slot::B])
                .signer(bob),
            RedeemPath::new(PathName::DepM, Window::ANY, vec![Transfer(BlockMiner, Amount::Rest)])
                .hashlocks(&[Slot::A, Slot::B]),
        ],
    );
    let col = ContractInstance::new(
        ContractId::Collateral,
        collateral,
        secrets,
        vec![
            RedeemPath::new(PathName::ColB, Window::after(deadline), vec![Transfer(Party(bob), Amount::Rest)])
                .signer(bob),
            RedeemPath::new(PathName::ColM, Window::ANY, vec![Transfer(BlockMiner, Amount::Rest)])
                .hashlocks(&[Slot::A, Slot::B]),
        ],
    );
    Ok((dep, col))
}

/// Deposit that either pays out on Alice's preimage or forwards everything
/// into a delayed collateral contract whose miner path burns the deposit.
pub fn build_he_htlc(
    alice: PartyId,
    bob: PartyId,
    deposit: Tokens,
    collateral: Tokens,
    digests: Digests,
    deadline: Round,
    refund_delay: Round,
) -> Result<(ContractInstance, ContractInstance), BuildError> {
    positive(deposit, "deposit")?;
    positive(collateral, "collateral")?;
    if refund_delay < 1 {
        return Err(BuildError::RefundDelay);
    }
    let secrets = vec![(Slot::A, digests.a), (Slot::B, digests.b)];
    let dep = ContractInstance::new(
        ContractId::Deposit,
        deposit + collateral,
        secrets.clone(),
        vec![
            RedeemPath::new(
                PathName::DepA,
                Window::until(deadline),
                vec![Transfer(Party(bob), Amount::Fixed(collateral)), Transfer(Party(alice), Amount::Rest)],
            )
            .hashlocks(&[Slot::A])
            .signer(alice),
            RedeemPath::new(
                PathName::DepB,
                Window::after(deadline),
                vec![Forward(ContractId::Collateral, Amount::Rest)],
            )
            .hashlocks(&[Slot::B])
            .signer(bob),
        ],
    );
    let mut col = ContractInstance::new(
        ContractId::Collateral,
        Tokens::ZERO,
        secrets,
        vec![
            RedeemPath::new(
                PathName::ColB,
                Window::after(deadline + refund_delay),
                vec![Transfer(Party(bob), Amount::Rest)],
            )
            .signer(bob),
            RedeemPath::new(
                PathName::ColM,
                Window::ANY,
                vec![Burn(Amount::Fixed(deposit)), Transfer(BlockMiner, Amount::Rest)],
            )
            .hashlocks(&[Slot::A, Slot::B]),
        ],
    );
    col.status = Status::Dormant;
    Ok((dep, col))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DembaAmounts {
    pub deposit: Tokens,
    pub alice_collateral: Tokens,
    pub bob_collateral: Tokens,
    pub deduction: Tokens,
}

/// Automatic deposit plus one collateral contract per party.
pub fn build_demba(
    alice: PartyId,
    bob: PartyId,
    amounts: &DembaAmounts,
    digests: Digests,
    deadline: Round,
    schedule: &FeeSchedule,
) -> Result<[ContractInstance; 3], BuildError> {
    if amounts.deduction.is_zero() {
        return Err(BuildError::ZeroDeduction);
    }
    schedule.check(deadline + 1)?;
    build_demba_unchecked(alice, bob, amounts, digests, deadline, schedule)
}

/// As [`build_demba`] but tolerates a zero deduction and skips the schedule
/// orderings; used to evaluate grid points where the hypotheses fail.
pub(crate) fn build_demba_unchecked(
    alice: PartyId,
    bob: PartyId,
    amounts: &DembaAmounts,
    digests: Digests,
    deadline: Round,
    schedule: &FeeSchedule,
) -> Result<[ContractInstance; 3], BuildError> {
    positive(amounts.deposit, "deposit")?;
    positive(amounts.alice_collateral, "alice collateral")?;
    positive(amounts.bob_collateral, "bob collateral")?;
    if schedule.deadline != deadline {
        return Err(BuildError::DeadlineMismatch { schedule: schedule.deadline, contract: deadline });
    }
    let need_a = amounts.deduction + schedule.paid(FeeKey::PreAA).max(schedule.paid(FeeKey::PreAPrime));
    if amounts.alice_collateral < need_a {
        return Err(BuildError::CollateralTooSmall { which: "alice", held: amounts.alice_collateral, needed: need_a });
    }
    let need_b = amounts.deduction + schedule.paid(FeeKey::PreB);
    if amounts.bob_collateral < need_b {
        return Err(BuildError::CollateralTooSmall { which: "bob", held: amounts.bob_collateral, needed: need_b });
    }
    let (col_a, col_b) = (ContractId::AliceCollateral, ContractId::BobCollateral);
    let mut dep = ContractInstance::new(
        ContractId::Deposit,
        amounts.deposit,
        Vec::new(),
        vec![
            RedeemPath::new(PathName::DepBurn, Window::after(deadline), vec![Burn(Amount::Rest)])
                .reads(&[(col_a, Slot::A, true), (col_a, Slot::APrime, true)]),
            RedeemPath::new(PathName::DepToAlice, Window::ANY, vec![Transfer(Party(alice), Amount::Rest)])
                .reads(&[(col_a, Slot::A, true), (col_a, Slot::APrime, false), (col_b, Slot::B, true)]),
            RedeemPath::new(PathName::DepToBob, Window::after(deadline), vec![Transfer(Party(bob), Amount::Rest)])
                .reads(&[(col_a, Slot::APrime, true), (col_a, Slot::A, false), (col_b, Slot::B, true)]),
        ],
    );
    dep.automatic = true;

    let ded = Amount::Fixed(amounts.deduction);
    let mut alice_col = ContractInstance::new(
        col_a,
        amounts.alice_collateral,
        vec![(Slot::A, digests.a), (Slot::APrime, digests.a_prime)],
        vec![
            RedeemPath::new(PathName::ColPreA, Window::until(deadline), vec![Transfer(Party(alice), Amount::Rest)])
                .hashlocks(&[Slot::A])
                .signer(alice)
                .scheduled(FeeKey::PreA),
            RedeemPath::new(PathName::ColPreAPrime, Window::after(deadline), vec![Transfer(Party(alice), Amount::Rest)])
                .hashlocks(&[Slot::APrime])
                .signer(alice)
                .scheduled(FeeKey::PreAPrime),
            RedeemPath::new(PathName::ColPreAA, Window::after(deadline), vec![Burn(ded), Transfer(Party(alice), Amount::Rest)])
                .hashlocks(&[Slot::A, Slot::APrime])
                .signer(alice)
                .scheduled(FeeKey::PreAA),
        ],
    );
    alice_col.schedule = Some(schedule.clone());
    let mut bob_col = ContractInstance::new(
        col_b,
        amounts.bob_collateral,
        vec![(Slot::B, digests.b)],
        vec![
            RedeemPath::new(PathName::ColPreB, Window::until(deadline), vec![Transfer(Party(bob), Amount::Rest)])
                .hashlocks(&[Slot::B])
                .signer(bob)
                .scheduled(FeeKey::PreB),
            RedeemPath::new(PathName::ColPreB, Window::after(deadline), vec![Burn(ded), Transfer(Party(bob), Amount::Rest)])
                .hashlocks(&[Slot::B])
                .signer(bob)
                .scheduled(FeeKey::PreB),
        ],
    );
    bob_col.schedule = Some(schedule.clone());
    Ok([dep, alice_col, bob_col])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    ToAlice(Tokens),
    ToBob(Tokens),
    Burn(Tokens),
    Pending,
}

/// What the automatic deposit would do if evaluated at the end of `round`.
pub fn resolve_demba_dep(dep: &ContractInstance, state: &ChainState, round: Round) -> Resolution {
    match dep.automatic_path(state, round).map(|p| p.name) {
        Some(PathName::DepToAlice) => Resolution::ToAlice(dep.deposit),
        Some(PathName::DepToBob) => Resolution::ToBob(dep.deposit),
        Some(PathName::DepBurn) => Resolution::Burn(dep.deposit),
        _ => Resolution::Pending,
    }
}

/// End-of-block hooks: automatic deposits, then bribery refunds.
pub(crate) fn settle_automatic(state: &mut ChainState, round: Round, miner: PartyId) {
    let ids: Vec<ContractId> = state.contracts.iter().filter(|(_, c)| c.automatic).map(|(id, _)| *id).collect();
    for id in ids {
        let c = &state.contracts[&id];
        let Some(path) = c.automatic_path(state, round) else { continue };
        let plan = c.resolve_effects(path, Tokens::ZERO, Tokens::ZERO, Tokens::ZERO).expect("automatic path within deposit");
        state.execute_plan(id, &plan, round, miner, None);
        if plan.path == PathName::DepBurn {
            state.contracts.get_mut(&id).expect("present").status = Status::Burned { round };
        }
    }
    bribery::auto_refund(state, round);
}
