//! Scenario files: JSON with exact decimals, validated on load.

use std::collections::BTreeMap;
use std::path::Path;

use num_rational::Ratio;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{AlicePolicy, BobPolicy, MinerPolicy, StrategyProfile};
use crate::contracts::bribery::Split;
use crate::contracts::fees::FeeSchedule;
use crate::game::dominance::{Player, PlayerPolicy};
use crate::game::{MinerKind, MinerProfile, Mode, Protocol, Scenario, DEFAULT_CAPACITY};
use crate::ledger::{PartyId, Round, Tokens};

pub const DEFAULT_TRIALS: u64 = 10_000;

/// Rationals written as `"0.25"`, `"1/4"` or a bare integer.
pub mod decimal {
    use num_rational::Ratio;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn parse(s: &str) -> Result<Ratio<u64>, String> {
        let s = s.trim();
        let bad = || format!("`{s}` is not a non-negative decimal or fraction");
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(format!("`{s}` has a zero denominator"));
            }
            return Ok(Ratio::new(n, d));
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 18 {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let denom = 10u64.pow(frac.len() as u32);
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let numer = int.checked_mul(denom).and_then(|x| x.checked_add(frac)).ok_or_else(bad)?;
        Ok(Ratio::new(numer, denom))
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(u64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio<u64>, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Ratio::from_integer(n)),
            Raw::Text(s) => parse(&s).map_err(de::Error::custom),
        }
    }

    pub fn serialize<S: Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AmountsFile {
    deposit: u64,
    collateral: u64,
    alice_collateral: u64,
    bob_collateral: u64,
    deduction: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    /// Declared fees for pre-a, pre-a', pre-aa', pre-b.
    paid: [u64; 4],
    #[serde(with = "decimal")]
    decay: Ratio<u64>,
    #[serde(default)]
    base: Option<[u64; 4]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FeesFile {
    unrelated: u64,
    alice_deposit: u64,
    bob_deposit: u64,
    bob_collateral: u64,
    bribery_contract: u64,
    schedule: Option<ScheduleFile>,
}

fn one() -> Round {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimingFile {
    deadline: Round,
    #[serde(default)]
    refund_delay: Round,
    #[serde(default = "one")]
    publish: Round,
    #[serde(default)]
    horizon: Option<Round>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MinerFile {
    #[serde(with = "decimal")]
    power: Ratio<u64>,
    #[serde(default = "passive")]
    kind: MinerKind,
    #[serde(default)]
    colluding: bool,
}

fn passive() -> MinerKind {
    MinerKind::Passive
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct BribesFile {
    bribe: u64,
    premium: u64,
    per_recipient: BTreeMap<u8, u64>,
    split: Split,
}

impl Default for BribesFile {
    fn default() -> Self {
        BribesFile { bribe: 0, premium: 0, per_recipient: BTreeMap::new(), split: Split::PerBlock }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    #[default]
    Exact,
    Mc,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub alice: String,
    pub bob: String,
    pub miners: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DominanceFile {
    /// `alice`, `bob` or `miner<index>`.
    player: String,
    candidate: String,
    alternatives: Vec<String>,
    #[serde(default)]
    opponents: Vec<ProfileFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    protocol: Protocol,
    #[serde(default)]
    amounts: AmountsFile,
    #[serde(default)]
    fees: FeesFile,
    timing: TimingFile,
    #[serde(default)]
    miners: Vec<MinerFile>,
    #[serde(default)]
    bribes: BribesFile,
    #[serde(default)]
    capacity: Option<u32>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    mode: ModeName,
    #[serde(default)]
    trials: Option<u64>,
    #[serde(default)]
    forced: BTreeMap<Round, u8>,
    #[serde(default)]
    profile: Option<ProfileFile>,
    #[serde(default)]
    dominance: Option<DominanceFile>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DominanceSpec {
    pub player: Player,
    pub candidate: PlayerPolicy,
    pub space: Vec<PlayerPolicy>,
    pub opponents: Vec<StrategyProfile>,
}

/// A validated scenario plus the profile and checks it names.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub profile: StrategyProfile,
    pub trials: u64,
    pub dominance: Option<DominanceSpec>,
    /// SHA-256 of the file bytes, hex.
    pub digest: String,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}, field `{field}`: {message}")]
    Parse { line: usize, column: usize, field: String, message: String },
    #[error("validation error: {0}")]
    Validation(String),
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Parse { line: inner.line(), column: inner.column(), field, message: inner.to_string() }
    })
}

pub fn read(path: &Path) -> Result<(String, String), ScenarioError> {
    let bytes = std::fs::read(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    let hash = digest(&bytes);
    let text = String::from_utf8(bytes).map_err(|e| ScenarioError::Validation(format!("file is not UTF-8: {e}")))?;
    Ok((text, hash))
}

pub fn load_scenario(path: &Path) -> Result<Loaded, ScenarioError> {
    let (text, hash) = read(path)?;
    let mut loaded = parse_scenario(&text)?;
    loaded.digest = hash;
    Ok(loaded)
}

fn invalid(s: impl ToString) -> ScenarioError {
    ScenarioError::Validation(s.to_string())
}

pub fn parse_profile(p: &ProfileFile) -> Result<StrategyProfile, ScenarioError> {
    Ok(StrategyProfile {
        alice: p.alice.parse::<AlicePolicy>().map_err(invalid)?,
        bob: p.bob.parse::<BobPolicy>().map_err(invalid)?,
        miners: p.miners.iter().map(|m| m.parse::<MinerPolicy>().map_err(invalid)).collect::<Result<_, _>>()?,
    })
}

fn parse_player(s: &str) -> Result<Player, ScenarioError> {
    match s.trim().parse::<PartyId>().map_err(invalid)? {
        PartyId::Alice => Ok(Player::Alice),
        PartyId::Bob => Ok(Player::Bob),
        PartyId::Miner(i) => Ok(Player::Miner(i)),
        other => Err(invalid(format!("{other} takes no decisions"))),
    }
}

fn parse_policy(player: Player, s: &str) -> Result<PlayerPolicy, ScenarioError> {
    Ok(match player {
        Player::Alice => PlayerPolicy::Alice(s.parse().map_err(invalid)?),
        Player::Bob => PlayerPolicy::Bob(s.parse().map_err(invalid)?),
        Player::Miner(_) => PlayerPolicy::Miner(s.parse().map_err(invalid)?),
    })
}

/// Parses and validates scenario text; the digest is of the text itself.
pub fn parse_scenario(text: &str) -> Result<Loaded, ScenarioError> {
    let f: ScenarioFile = parse_json(text)?;
    let mut s = Scenario::new(f.protocol);
    let a = &f.amounts;
    s.amounts.deposit = Tokens(a.deposit);
    s.amounts.collateral = Tokens(a.collateral);
    s.amounts.alice_collateral = Tokens(a.alice_collateral);
    s.amounts.bob_collateral = Tokens(a.bob_collateral);
    s.amounts.deduction = Tokens(a.deduction);
    s.fees.unrelated = Tokens(f.fees.unrelated);
    s.fees.alice_deposit = Tokens(f.fees.alice_deposit);
    s.fees.bob_deposit = Tokens(f.fees.bob_deposit);
    s.fees.bob_collateral = Tokens(f.fees.bob_collateral);
    s.fees.bribery_contract = Tokens(f.fees.bribery_contract);
    s.fees.schedule = f.fees.schedule.as_ref().map(|sch| {
        let mut fs = FeeSchedule::with_default_bases(sch.paid.map(Tokens), sch.decay, f.timing.deadline);
        if let Some(base) = sch.base {
            fs.base = base.map(Tokens);
        }
        fs
    });
    s.timing.deadline = f.timing.deadline;
    s.timing.refund_delay = f.timing.refund_delay;
    s.timing.publish = f.timing.publish;
    s.timing.horizon = f.timing.horizon.unwrap_or_else(|| s.min_horizon());
    if !f.miners.is_empty() {
        s.miners = f.miners.iter().map(|m| MinerProfile::new(m.power, m.kind, m.colluding)).collect();
    }
    s.bribes.bribe = Tokens(f.bribes.bribe);
    s.bribes.premium = Tokens(f.bribes.premium);
    s.bribes.per_recipient = f.bribes.per_recipient.iter().map(|(&k, &v)| (k, Tokens(v))).collect();
    s.bribes.split = f.bribes.split;
    s.capacity = f.capacity.unwrap_or(DEFAULT_CAPACITY);
    s.seed = f.seed;
    let trials = f.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    s.mode = match f.mode {
        ModeName::Exact => Mode::Exact,
        ModeName::Mc => Mode::MonteCarlo { trials },
    };
    s.forced = f.forced;
    s.validate().map_err(invalid)?;
    if let Some(sch) = &s.fees.schedule {
        sch.check(s.timing.horizon).map_err(|e| invalid(format!("fee schedule: {e}")))?;
    }
    let profile = match &f.profile {
        Some(p) => parse_profile(p)?,
        None => StrategyProfile::honest(&s),
    };
    s.genesis(&profile).map_err(invalid)?;
    let dominance = match &f.dominance {
        None => None,
        Some(d) => {
            let player = parse_player(&d.player)?;
            if let Player::Miner(i) = player {
                if i as usize >= s.miners.len() {
                    return Err(invalid(format!("miner {i} does not exist")));
                }
            }
            let candidate = parse_policy(player, &d.candidate)?;
            let mut space = vec![candidate.clone()];
            for alt in &d.alternatives {
                space.push(parse_policy(player, alt)?);
            }
            let opponents = if d.opponents.is_empty() {
                vec![profile.clone()]
            } else {
                d.opponents.iter().map(parse_profile).collect::<Result<_, _>>()?
            };
            Some(DominanceSpec { player, candidate, space, opponents })
        }
    };
    Ok(Loaded { scenario: s, profile, trials, dominance, digest: digest(text.as_bytes()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_are_exact() {
        assert_eq!(decimal::parse("0.25").unwrap(), Ratio::new(1, 4));
        assert_eq!(decimal::parse("1/3").unwrap(), Ratio::new(1, 3));
        assert_eq!(decimal::parse("2").unwrap(), Ratio::from_integer(2));
        assert_eq!(decimal::parse(".5").unwrap(), Ratio::new(1, 2));
        assert!(decimal::parse("1/0").is_err());
        assert!(decimal::parse("-1").is_err());
        assert!(decimal::parse("").is_err());
    }

    #[test]
    fn minimal_naive_file_gets_defaults() {
        let l = parse_scenario(r#"{"protocol":"naive","amounts":{"deposit":10},"timing":{"deadline":3}}"#).unwrap();
        assert_eq!(l.scenario.capacity, 8);
        assert_eq!(l.scenario.timing.horizon, 5);
        assert_eq!(l.trials, DEFAULT_TRIALS);
    }

    #[test]
    fn power_sum_is_checked() {
        let err = parse_scenario(
            r#"{"protocol":"naive","timing":{"deadline":3},"miners":[{"power":"0.5"},{"power":"0.4"}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("sum"), "{err}");
    }

    #[test]
    fn parse_errors_name_the_field() {
        let err = parse_scenario(r#"{"protocol":"naive","timing":{"deadline":"x"}}"#).unwrap_err();
        match err {
            ScenarioError::Parse { field, line, .. } => {
                assert_eq!(field, "timing.deadline");
                assert_eq!(line, 1);
            }
            other => panic!("{other}"),
        }
    }
}
