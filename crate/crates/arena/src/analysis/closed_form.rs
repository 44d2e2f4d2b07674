//! Predicted attack payoffs in closed form. Every formula is evaluated in
//! exact integers; a negative value means the attack loses tokens.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attack {
    NaiveBribery,
    B3aCase1,
    B3aCase2,
    SdrbaWorst,
    HydraBob,
    HydraAlice,
    M2mbaPerBlock,
    M2mbaEqual,
}

impl Attack {
    pub const ALL: [Attack; 8] = [
        Attack::NaiveBribery,
        Attack::B3aCase1,
        Attack::B3aCase2,
        Attack::SdrbaWorst,
        Attack::HydraBob,
        Attack::HydraAlice,
        Attack::M2mbaPerBlock,
        Attack::M2mbaEqual,
    ];
}

impl fmt::Display for Attack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Attack::NaiveBribery => "naive-bribery",
            Attack::B3aCase1 => "b3a-case1",
            Attack::B3aCase2 => "b3a-case2",
            Attack::SdrbaWorst => "sdrba-worst",
            Attack::HydraBob => "hydra-bob",
            Attack::HydraAlice => "hydra-alice",
            Attack::M2mbaPerBlock => "m2mba-perblock",
            Attack::M2mbaEqual => "m2mba-equal",
        };
        f.write_str(s)
    }
}

impl FromStr for Attack {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Attack::ALL.into_iter().find(|a| a.to_string() == s).ok_or_else(|| format!("unknown attack `{s}`"))
    }
}

/// Inputs; each formula reads only the fields it needs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttackParams {
    pub deposit: Option<u64>,
    pub collateral: Option<u64>,
    pub bribe: Option<u64>,
    /// Censored blocks.
    pub window: Option<u64>,
    /// Censored blocks mined by the confiscating miner.
    pub own_blocks: Option<u64>,
    pub premium: Option<u64>,
    pub fee_bob_deposit: Option<u64>,
    pub fee_bob_collateral: Option<u64>,
    pub fee_bob_contract: Option<u64>,
    pub fee_alice_contract: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClosedFormError {
    #[error("{attack} needs `{field}`")]
    MissingParameter { attack: Attack, field: &'static str },
    #[error("equal split needs a positive window")]
    EmptyWindow,
}

/// Predicted net payoff of the attacking party.
pub fn closed_form(attack: Attack, p: &AttackParams) -> Result<Ratio<i128>, ClosedFormError> {
    let need = |v: Option<u64>, field: &'static str| {
        v.map(|x| x as i128).ok_or(ClosedFormError::MissingParameter { attack, field })
    };
    let int = Ratio::from_integer;
    Ok(match attack {
        Attack::NaiveBribery => {
            let (dep, br, k) = (need(p.deposit, "deposit")?, need(p.bribe, "bribe")?, need(p.window, "window")?);
            int(dep - ((k + 1) * br + need(p.fee_bob_deposit, "fee_bob_deposit")? + need(p.fee_bob_contract, "fee_bob_contract")?))
        }
        Attack::B3aCase1 | Attack::B3aCase2 => {
            let (dep, br, k) = (need(p.deposit, "deposit")?, need(p.bribe, "bribe")?, need(p.window, "window")?);
            let last = if attack == Attack::B3aCase1 { need(p.fee_bob_collateral, "fee_bob_collateral")? } else { br };
            int(dep - ((k + 2) * br + last + need(p.fee_bob_contract, "fee_bob_contract")?))
        }
        Attack::SdrbaWorst => int(need(p.deposit, "deposit")? - (need(p.collateral, "collateral")? + need(p.premium, "premium")?)),
        Attack::HydraBob => {
            let (br, k) = (need(p.bribe, "bribe")?, need(p.window, "window")?);
            int(need(p.collateral, "collateral")? + need(p.premium, "premium")? - ((k + 1) * br + need(p.fee_bob_contract, "fee_bob_contract")?))
        }
        Attack::HydraAlice => {
            let (br, k) = (need(p.bribe, "bribe")?, need(p.window, "window")?);
            int(need(p.deposit, "deposit")? + need(p.premium, "premium")? - ((k + 1) * br + need(p.fee_alice_contract, "fee_alice_contract")?))
        }
        Attack::M2mbaPerBlock => {
            let (col, br, k) = (need(p.collateral, "collateral")?, need(p.bribe, "bribe")?, need(p.window, "window")?);
            int(col - (k - need(p.own_blocks, "own_blocks")?) * br)
        }
        Attack::M2mbaEqual => {
            let (col, k) = (need(p.collateral, "collateral")?, need(p.window, "window")?);
            if k == 0 {
                return Err(ClosedFormError::EmptyWindow);
            }
            Ratio::new(col * need(p.own_blocks, "own_blocks")?, k)
        }
    })
}

/// The premium above which the hybrid attack pays for the depositor.
pub fn hydra_profitable(p: &AttackParams) -> Result<bool, ClosedFormError> {
    let attack = Attack::HydraBob;
    let need = |v: Option<u64>, field: &'static str| v.ok_or(ClosedFormError::MissingParameter { attack, field });
    let floor = (need(p.window, "window")? + 1) * need(p.bribe, "bribe")? + need(p.fee_bob_contract, "fee_bob_contract")?;
    Ok(need(p.premium, "premium")? > floor)
}
