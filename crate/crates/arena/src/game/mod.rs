//! Scenarios, the round driver, state labels, and per-party tallies.

pub mod dominance;
pub mod expect;

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{self, AlicePolicy, BobPolicy, MinerPolicy, StrategyProfile};
use crate::contracts::bribery::{BriberyContract, Split};
use crate::contracts::fees::FeeSchedule;
use crate::contracts::{self, BuildError, DembaAmounts, Digests, PathName, Status};
use crate::ledger::{ChainState, ContractId, LedgerError, PartyId, Round, Slot, Tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Naive,
    Mad,
    He,
    Demba,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Protocol::Naive => "naive",
            Protocol::Mad => "mad",
            Protocol::He => "he",
            Protocol::Demba => "demba",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinerKind {
    Passive,
    Active,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinerProfile {
    pub power: Ratio<u64>,
    pub kind: MinerKind,
    pub colluding: bool,
}

impl MinerProfile {
    pub fn new(power: Ratio<u64>, kind: MinerKind, colluding: bool) -> Self {
        MinerProfile { power, kind, colluding }
    }

    pub fn honest(power: Ratio<u64>) -> Self {
        MinerProfile::new(power, MinerKind::Passive, false)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Amounts {
    pub deposit: Tokens,
    /// Collateral of the miner-claimable variants.
    pub collateral: Tokens,
    pub alice_collateral: Tokens,
    pub bob_collateral: Tokens,
    pub deduction: Tokens,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fees {
    pub unrelated: Tokens,
    pub alice_deposit: Tokens,
    pub bob_deposit: Tokens,
    pub bob_collateral: Tokens,
    /// Deployment fee of the depositor's bribery contract.
    pub bribery_contract: Tokens,
    pub schedule: Option<FeeSchedule>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Timing {
    pub deadline: Round,
    pub refund_delay: Round,
    pub publish: Round,
    pub horizon: Round,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bribes {
    pub bribe: Tokens,
    pub premium: Tokens,
    /// Per-recipient override keyed by miner index.
    pub per_recipient: BTreeMap<u8, Tokens>,
    pub split: Split,
}

impl Default for Bribes {
    fn default() -> Self {
        Bribes { bribe: Tokens::ZERO, premium: Tokens::ZERO, per_recipient: BTreeMap::new(), split: Split::PerBlock }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    MonteCarlo { trials: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub protocol: Protocol,
    pub amounts: Amounts,
    pub fees: Fees,
    pub timing: Timing,
    pub miners: Vec<MinerProfile>,
    pub bribes: Bribes,
    pub capacity: u32,
    pub seed: u64,
    pub mode: Mode,
    /// Rounds whose miner is fixed rather than drawn.
    pub forced: BTreeMap<Round, u8>,
}

pub const DEFAULT_CAPACITY: u32 = 8;
pub const DEFAULT_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("inconsistent profile: {0}")]
    InconsistentProfile(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("schedule has {got} entries, horizon is {horizon}")]
    ScheduleLength { got: usize, horizon: Round },
    #[error("{count} schedules exceed the enumeration cap {cap}; use monte-carlo mode")]
    EnumerationCap { count: u128, cap: u128 },
    #[error("exact arithmetic overflowed; use monte-carlo mode")]
    Overflow,
    #[error("strategy space is empty")]
    EmptySpace,
}

impl Scenario {
    /// Scenario with the given protocol, one honest miner and zero amounts.
    pub fn new(protocol: Protocol) -> Self {
        Scenario {
            protocol,
            amounts: Amounts::default(),
            fees: Fees::default(),
            timing: Timing::default(),
            miners: vec![MinerProfile::honest(Ratio::from_integer(1))],
            bribes: Bribes::default(),
            capacity: DEFAULT_CAPACITY,
            seed: 0,
            mode: Mode::Exact,
            forced: BTreeMap::new(),
        }
    }

    pub fn miner_ids(&self) -> impl Iterator<Item = PartyId> + '_ {
        (0..self.miners.len()).map(|i| PartyId::Miner(i as u8))
    }

    /// Combined power of colluding active miners.
    pub fn colluding_power(&self) -> Ratio<u64> {
        self.miners
            .iter()
            .filter(|m| m.colluding && m.kind == MinerKind::Active)
            .fold(Ratio::from_integer(0), |acc, m| acc + m.power)
    }

    /// Smallest horizon at which every refund path can land.
    pub fn min_horizon(&self) -> Round {
        self.timing.deadline + self.timing.refund_delay + 2
    }

    pub fn validate(&self) -> Result<(), GameError> {
        let bad = |s: String| Err(GameError::InvalidScenario(s));
        if self.miners.is_empty() {
            return bad("at least one miner is required".into());
        }
        if self.miners.len() > 200 {
            return bad("too many miners".into());
        }
        let sum = self.miners.iter().fold(Ratio::from_integer(0u64), |acc, m| acc + m.power);
        if sum != Ratio::from_integer(1) {
            return bad(format!("miner powers sum to {sum}, expected 1"));
        }
        if self.miners.iter().any(|m| *m.power.numer() == 0) {
            return bad("every miner power must be positive".into());
        }
        if self.timing.deadline == 0 {
            return bad("deadline must be positive".into());
        }
        if self.timing.publish > self.timing.deadline {
            return bad("publish round must not exceed the deadline".into());
        }
        if self.timing.horizon < self.min_horizon() {
            return bad(format!("horizon {} is below deadline + refund delay + 2 = {}", self.timing.horizon, self.min_horizon()));
        }
        if self.capacity == 0 {
            return bad("capacity must be positive".into());
        }
        for (&r, &m) in &self.forced {
            if r == 0 || r > self.timing.horizon || m as usize >= self.miners.len() {
                return bad(format!("forced miner {m} at round {r} is out of range"));
            }
        }
        if self.protocol == Protocol::Demba {
            let Some(s) = &self.fees.schedule else { return bad("demba needs a fee schedule".into()) };
            if s.deadline != self.timing.deadline {
                return bad("fee schedule deadline differs from the scenario deadline".into());
            }
        }
        Ok(())
    }

    /// Starting endowment of every participant; large enough that no policy
    /// can run a wallet dry.
    pub fn endowment(&self) -> Tokens {
        let a = &self.amounts;
        let f = &self.fees;
        let sched = f.schedule.as_ref().map_or(0, |s| s.paid.iter().map(|t| t.0).sum());
        let per = a.deposit.0 + a.collateral.0 + a.alice_collateral.0 + a.bob_collateral.0 + a.deduction.0;
        let fees = f.alice_deposit.0 + f.bob_deposit.0 + f.bob_collateral.0 + f.bribery_contract.0 + sched;
        Tokens(4 * (per + fees) + 4 * self.bribes.bribe.0 + 1_000)
    }

    /// Chain state after contract funding and round-0 broadcasts.
    pub fn genesis(&self, profile: &StrategyProfile) -> Result<ChainState, GameError> {
        self.check_profile(profile)?;
        let mut s = ChainState::new(self.fees.unrelated, self.capacity);
        let w = self.endowment();
        s.books.credit(PartyId::Alice, w);
        s.books.credit(PartyId::Bob, w);
        for m in self.miner_ids() {
            s.books.credit(m, w);
        }
        let filler = self.fees.unrelated.times(self.capacity as u64 * (self.timing.horizon + 1));
        s.books.credit(PartyId::External, filler);

        let (alice, bob) = (PartyId::Alice, PartyId::Bob);
        let a = &self.amounts;
        let t = self.timing.deadline;
        let d = Digests::default();
        match self.protocol {
            Protocol::Naive => {
                s.fund_contract(bob, contracts::build_naive_htlc(alice, bob, a.deposit, d.a, t)?)?;
            }
            Protocol::Mad => {
                let (dep, col) = contracts::build_mad_htlc(alice, bob, a.deposit, a.collateral, d, t)?;
                s.fund_contract(bob, dep)?;
                s.fund_contract(bob, col)?;
            }
            Protocol::He => {
                let (dep, col) = contracts::build_he_htlc(alice, bob, a.deposit, a.collateral, d, t, self.timing.refund_delay)?;
                s.fund_contract(bob, dep)?;
                s.fund_contract(bob, col)?;
            }
            Protocol::Demba => {
                let schedule = self.fees.schedule.as_ref().ok_or_else(|| GameError::InvalidScenario("missing fee schedule".into()))?;
                let amounts = DembaAmounts {
                    deposit: a.deposit,
                    alice_collateral: a.alice_collateral,
                    bob_collateral: a.bob_collateral,
                    deduction: a.deduction,
                };
                let [dep, col_a, col_b] = contracts::build_demba_unchecked(alice, bob, &amounts, d, t, schedule)?;
                s.fund_contract(bob, dep)?;
                s.fund_contract(alice, col_a)?;
                s.fund_contract(bob, col_b)?;
            }
        }

        let lockers: Vec<PartyId> = profile
            .miners
            .iter()
            .enumerate()
            .filter(|(_, p)| p.locks_collateral())
            .map(|(i, _)| PartyId::Miner(i as u8))
            .collect();
        if let Some(&deployer) = lockers.first() {
            let per_recipient = self.bribes.per_recipient.iter().map(|(&i, &b)| (PartyId::Miner(i), b)).collect();
            let mut c = BriberyContract::miner_to_miner(deployer, self.bribes.bribe, per_recipient, self.bribes.split, t, d.a);
            for m in lockers {
                s.books.debit(m, a.collateral)?;
                c.locked.insert(m, a.collateral);
                c.held += a.collateral;
            }
            s.bribery = Some(c);
        }
        agents::parties_act(self, profile, &mut s, 0);
        Ok(s)
    }

    fn check_profile(&self, profile: &StrategyProfile) -> Result<(), GameError> {
        let bad = |s: &str| Err(GameError::InconsistentProfile(s.to_string()));
        if profile.miners.len() != self.miners.len() {
            return bad("one policy per miner is required");
        }
        let p = self.protocol;
        for m in &profile.miners {
            match m {
                MinerPolicy::M2mbaActive { .. } | MinerPolicy::M2mbaPassive | MinerPolicy::Defer { .. } if p != Protocol::He => {
                    return bad("miner-to-miner bribery policies need the he protocol")
                }
                MinerPolicy::BribeAccomplice if !matches!(p, Protocol::Naive | Protocol::Mad) => {
                    return bad("bribe-accomplice needs a protocol with a depositor refund")
                }
                MinerPolicy::B3aAccomplice { .. } | MinerPolicy::SdrbaBriber | MinerPolicy::HydraAccomplice if p != Protocol::Mad => {
                    return bad("partial-block exchange policies need the mad protocol")
                }
                _ => {}
            }
        }
        match profile.bob {
            BobPolicy::NaiveBriber if !matches!(p, Protocol::Naive | Protocol::Mad) => {
                return bad("naive-briber needs the naive or mad protocol")
            }
            BobPolicy::B3a { .. } | BobPolicy::HydraBriber | BobPolicy::ReverseBribe if p != Protocol::Mad => {
                return bad("partial-block exchange policies need the mad protocol")
            }
            BobPolicy::Delay { .. } if p != Protocol::Demba => return bad("delay is a demba policy"),
            _ => {}
        }
        if matches!(profile.alice, AlicePolicy::GriefDoubleReveal | AlicePolicy::OfflineThenRefund) && p != Protocol::Demba {
            return bad("offline and grief policies need the demba protocol");
        }
        Ok(())
    }

    /// Integer weights `w_i` and common denominator `D` with `λ_i = w_i / D`.
    pub fn integer_weights(&self) -> (Vec<u64>, u64) {
        let d = self.miners.iter().fold(1u64, |acc, m| acc.lcm(m.power.denom()));
        let w = self.miners.iter().map(|m| m.power.numer() * (d / m.power.denom())).collect();
        (w, d)
    }

    /// Number of distinct schedules with positive weight.
    pub fn schedule_count(&self) -> u128 {
        let n = self.miners.len() as u128;
        let free = (1..=self.timing.horizon).filter(|r| !self.forced.contains_key(r)).count() as u32;
        n.checked_pow(free).unwrap_or(u128::MAX)
    }

    /// Applies one round: the miner's block, then the parties' broadcasts.
    pub fn advance(
        &self,
        profile: &StrategyProfile,
        state: &ChainState,
        round: Round,
        miner: u8,
    ) -> Result<ChainState, GameError> {
        let me = PartyId::Miner(miner);
        let block = agents::build_block(self, profile, state, round, me);
        let mut next = state.apply_block(&block)?;
        agents::parties_act(self, profile, &mut next, round);
        Ok(next)
    }
}

/// One miner index per round, round 1 first.
pub type Schedule = Vec<u8>;

/// Exact probability of a schedule.
pub fn schedule_weight(scenario: &Scenario, schedule: &Schedule) -> Ratio<u128> {
    let mut w = Ratio::from_integer(1u128);
    for (i, &m) in schedule.iter().enumerate() {
        let round = i as Round + 1;
        match scenario.forced.get(&round) {
            Some(&f) if f == m => {}
            Some(_) => return Ratio::from_integer(0),
            None => {
                let p = scenario.miners[m as usize].power;
                w *= Ratio::new(*p.numer() as u128, *p.denom() as u128);
            }
        }
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Utility(PartyId),
    BribeIncome(PartyId),
    Burned,
    Minted,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Utility(_) => write!(f, "utility"),
            Metric::BribeIncome(_) => write!(f, "bribe-income"),
            Metric::Burned => write!(f, "burned"),
            Metric::Minted => write!(f, "minted"),
        }
    }
}

impl Metric {
    pub fn party(&self) -> Option<PartyId> {
        match self {
            Metric::Utility(p) | Metric::BribeIncome(p) => Some(*p),
            _ => None,
        }
    }
}

/// Fixed layout of the per-party figures tracked through a game.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub metrics: Vec<Metric>,
}

impl Layout {
    pub fn for_scenario(s: &Scenario) -> Self {
        let mut parties = vec![PartyId::Alice, PartyId::Bob];
        parties.extend(s.miner_ids());
        parties.push(PartyId::External);
        let mut metrics: Vec<Metric> = parties.iter().map(|&p| Metric::Utility(p)).collect();
        metrics.extend(parties.iter().filter(|p| p.miner_index().is_some() || **p == PartyId::Bob).map(|&p| Metric::BribeIncome(p)));
        metrics.push(Metric::Burned);
        metrics.push(Metric::Minted);
        Layout { metrics }
    }

    pub fn index(&self, m: Metric) -> Option<usize> {
        self.metrics.iter().position(|x| *x == m)
    }

    /// Raw figures of a state: balances net of issued coinbase, bribe
    /// income, burn and mint totals.
    pub fn read(&self, s: &ChainState) -> Vec<i128> {
        self.metrics
            .iter()
            .map(|m| match *m {
                Metric::Utility(p) => {
                    s.balance(p).0 as i128 - s.books.coinbase_paid.get(&p).map_or(0, |t| t.0 as i128)
                }
                Metric::BribeIncome(p) => s.books.bribe_income.get(&p).map_or(0, |t| t.0 as i128),
                Metric::Burned => s.books.burned.0 as i128,
                Metric::Minted => s.books.minted.0 as i128,
            })
            .collect()
    }
}

/// Per-entity figures at game end, relative to the pre-funding endowments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub values: BTreeMap<Metric, i128>,
    pub labels: Vec<StateLabel>,
    pub resolution: Option<PathName>,
    pub final_state: ChainState,
}

impl Outcome {
    pub fn get(&self, m: Metric) -> i128 {
        self.values.get(&m).copied().unwrap_or(0)
    }

    pub fn utility(&self, p: PartyId) -> i128 {
        self.get(Metric::Utility(p))
    }
}

/// Figures of the endowed state before any contract is funded.
pub(crate) fn baseline(scenario: &Scenario, layout: &Layout) -> Vec<i128> {
    let w = scenario.endowment().0 as i128;
    let filler = scenario.fees.unrelated.times(scenario.capacity as u64 * (scenario.timing.horizon + 1)).0 as i128;
    layout
        .metrics
        .iter()
        .map(|m| match m {
            Metric::Utility(PartyId::External) => filler,
            Metric::Utility(_) => w,
            _ => 0,
        })
        .collect()
}

/// Plays one schedule to the horizon.
pub fn play(scenario: &Scenario, profile: &StrategyProfile, schedule: &Schedule) -> Result<Outcome, GameError> {
    scenario.validate()?;
    if schedule.len() as Round != scenario.timing.horizon {
        return Err(GameError::ScheduleLength { got: schedule.len(), horizon: scenario.timing.horizon });
    }
    if let Some(&m) = schedule.iter().find(|&&m| m as usize >= scenario.miners.len()) {
        return Err(GameError::InvalidScenario(format!("schedule names miner {m}")));
    }
    let mut state = scenario.genesis(profile)?;
    let mut labels = vec![state_label(&state, scenario)];
    for (i, &m) in schedule.iter().enumerate() {
        state = scenario.advance(profile, &state, i as Round + 1, m)?;
        labels.push(state_label(&state, scenario));
    }
    let layout = Layout::for_scenario(scenario);
    let base = baseline(scenario, &layout);
    let values = layout
        .metrics
        .iter()
        .zip(layout.read(&state).into_iter().zip(base))
        .map(|(m, (v, b))| (*m, v - b))
        .collect();
    let resolution = state.contract(ContractId::Deposit).and_then(|c| match c.status {
        Status::Redeemed { path, .. } => Some(path),
        Status::Burned { .. } => Some(PathName::DepBurn),
        _ => None,
    });
    Ok(Outcome { values, labels, resolution, final_state: state })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateLabel {
    Red,
    NredNrev,
    NredRev,
    NredA,
    AllRed,
    Nred { alice: AliceReveal, late: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AliceReveal {
    A,
    APrime,
    Both,
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLabel::Red => write!(f, "red"),
            StateLabel::NredNrev => write!(f, "nred-nrev"),
            StateLabel::NredRev => write!(f, "nred-rev"),
            StateLabel::NredA => write!(f, "nred-A"),
            StateLabel::AllRed => write!(f, "all-red"),
            StateLabel::Nred { alice, late } => {
                let a = match alice {
                    AliceReveal::A => "A",
                    AliceReveal::APrime => "A'",
                    AliceReveal::Both => "AA'",
                };
                write!(f, "nred-{a}B{}", if *late { "T" } else { "" })
            }
        }
    }
}

/// Pure classification of a state.
pub fn state_label(state: &ChainState, scenario: &Scenario) -> StateLabel {
    match scenario.protocol {
        Protocol::Demba => {
            let col_a = state.contract(ContractId::AliceCollateral).and_then(|c| c.redeemed_via());
            let col_b = state.contract(ContractId::BobCollateral);
            let b_round = col_b.and_then(|c| if c.redeemed_via().is_some() { c.redeemed_round() } else { None });
            match (col_a, b_round) {
                (Some(path), Some(r)) => {
                    let alice = match path {
                        PathName::ColPreA => AliceReveal::A,
                        PathName::ColPreAPrime => AliceReveal::APrime,
                        _ => AliceReveal::Both,
                    };
                    StateLabel::Nred { alice, late: r > scenario.timing.deadline }
                }
                _ => StateLabel::AllRed,
            }
        }
        _ => {
            let dep = state.contract(ContractId::Deposit).expect("deposit contract");
            match dep.redeemed_via() {
                None => StateLabel::Red,
                Some(PathName::DepA) => StateLabel::NredA,
                Some(_) if state.public_slots.contains(&Slot::A) => StateLabel::NredRev,
                Some(_) => StateLabel::NredNrev,
            }
        }
    }
}

/// Rank in the label lattice; play never moves to a lower rank.
pub fn label_rank(l: StateLabel) -> u8 {
    match l {
        StateLabel::Red | StateLabel::AllRed => 0,
        StateLabel::NredNrev => 1,
        StateLabel::NredRev | StateLabel::NredA | StateLabel::Nred { .. } => 2,
    }
}
