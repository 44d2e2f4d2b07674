//! Subcommand bodies. Each returns a report and whether a checked verdict
//! failed; the binary maps those to exit codes.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::report::{Record, Report, Value};
use super::scenario::{self, Loaded, ScenarioError, DEFAULT_TRIALS};
use super::ttc::{self, TtcError, TtcSpec};
use crate::analysis::demba::{verify_demba, DembaPoint};
use crate::analysis::lemmas::{flip_each_hypothesis, run_grid, verify_coalition, CoalitionSetup};
use crate::analysis::pool::{pool_math, pool_mc, PoolError, PoolParams};
use crate::analysis::Claim;
use crate::game::dominance::{dominance_check, Player, Verdict};
use crate::game::expect::{expected_exact, expected_mc, sample_schedule, trial_rng};
use crate::game::{play, GameError, Metric, MinerProfile, Mode};
use crate::ledger::PartyId;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Ttc(#[from] TtcError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeFlag {
    Exact,
    Mc,
}

/// Flags shared by every subcommand; `None` defers to the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Flags {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub mode: Option<ModeFlag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub report: Report,
    /// A checked verdict failed.
    pub failed: bool,
}

fn metric_party(m: Metric) -> String {
    m.party().map_or_else(|| "-".into(), |p| p.to_string())
}

fn load(path: &Path, flags: Flags) -> Result<Loaded, CommandError> {
    let mut l = scenario::load_scenario(path)?;
    if let Some(seed) = flags.seed {
        l.scenario.seed = seed;
    }
    if let Some(t) = flags.trials {
        if t == 0 {
            return Err(CommandError::Usage("--trials must be at least 1".into()));
        }
        l.trials = t;
        if let Mode::MonteCarlo { .. } = l.scenario.mode {
            l.scenario.mode = Mode::MonteCarlo { trials: t };
        }
    }
    match flags.mode {
        Some(ModeFlag::Exact) => l.scenario.mode = Mode::Exact,
        Some(ModeFlag::Mc) => l.scenario.mode = Mode::MonteCarlo { trials: l.trials },
        None => {}
    }
    Ok(l)
}

/// One game on the schedule drawn for trial 0 of the seed.
pub fn simulate(path: &Path, flags: Flags) -> Result<Output, CommandError> {
    let l = load(path, flags)?;
    let s = &l.scenario;
    let schedule = sample_schedule(s, &mut trial_rng(s.seed, 0));
    let out = play(s, &l.profile, &schedule)?;
    let mut rep = Report::new("simulate", &l.digest, s.seed);
    let sched: Vec<String> = schedule.iter().map(u8::to_string).collect();
    rep.push(Record::new("schedule", "-", Value::Text(sched.join(","))));
    for (m, v) in &out.values {
        rep.push(Record::new(m.to_string(), metric_party(*m), Value::Exact((*v).into())));
    }
    let res = out.resolution.map_or("unresolved".to_string(), |p| p.to_string());
    rep.push(Record::new("resolution", "dep", Value::Text(res)));
    let last = out.labels.last().map_or("-".to_string(), |l| l.to_string());
    rep.push(Record::new("final-label", "-", Value::Text(last)));
    Ok(Output { report: rep, failed: false })
}

pub fn expect(path: &Path, flags: Flags) -> Result<Output, CommandError> {
    let l = load(path, flags)?;
    let s = &l.scenario;
    let mut rep = Report::new("expect", &l.digest, s.seed);
    match s.mode {
        Mode::Exact => {
            let e = expected_exact(s, &l.profile)?;
            rep.header.push(("mode".into(), "exact".into()));
            for (m, v) in e.layout.metrics.iter().zip(&e.values) {
                rep.push(Record::new(m.to_string(), metric_party(*m), Value::Exact(*v)));
            }
        }
        Mode::MonteCarlo { trials } => {
            let e = expected_mc(s, &l.profile, trials)?;
            rep.header.push(("mode".into(), format!("monte-carlo, {trials} trials, 95% intervals")));
            for (i, m) in e.layout.metrics.iter().enumerate() {
                rep.push(Record::estimate(m.to_string(), metric_party(*m), e.mean[i], e.half_width[i]));
            }
        }
    }
    Ok(Output { report: rep, failed: false })
}

/// Strict and weak dominance pass; no dominance is a failed verdict.
pub fn dominance(path: &Path, flags: Flags) -> Result<Output, CommandError> {
    let l = load(path, flags)?;
    let spec = l.dominance.as_ref().ok_or_else(|| CommandError::Usage("the scenario has no `dominance` block".into()))?;
    let metric = Metric::Utility(match spec.player {
        Player::Alice => PartyId::Alice,
        Player::Bob => PartyId::Bob,
        Player::Miner(i) => PartyId::Miner(i),
    });
    let d = dominance_check(&l.scenario, spec.player, metric, &spec.candidate, &spec.space, &spec.opponents)?;
    let mut rep = Report::new("dominance", &l.digest, l.scenario.seed);
    let who = metric_party(metric);
    rep.push(Record::new("candidate", who.clone(), Value::Text(spec.candidate.to_string())));
    rep.push(Record::new("verdict", who.clone(), Value::Text(d.verdict.to_string())));
    if let Some(w) = &d.witness {
        rep.push(Record::new("witness-alternative", who.clone(), Value::Text(spec.space[w.alternative].to_string())));
        rep.push(Record::new("witness-opponent", who.clone(), Value::Exact((w.opponent as i128).into())));
        rep.push(Record::new("witness-candidate-value", who.clone(), Value::Exact(w.candidate_value)));
        rep.push(Record::new("witness-alternative-value", who, Value::Exact(w.alternative_value)));
    }
    Ok(Output { report: rep, failed: d.verdict == Verdict::None })
}

fn all_claims() -> Vec<String> {
    Claim::ALL.iter().map(Claim::to_string).collect()
}

/// Which checks `lemmas` runs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmasFile {
    #[serde(default = "all_claims")]
    pub claims: Vec<String>,
    /// Also run the three-miner equilibrium check and its hypothesis flips.
    #[serde(default)]
    pub coalition: bool,
    /// Also run the deviation search on the two-phase collateral protocol.
    #[serde(default)]
    pub demba: bool,
}

pub fn lemmas(path: &Path, flags: Flags) -> Result<Output, CommandError> {
    let (text, digest) = scenario::read(path)?;
    let file: LemmasFile = scenario::parse_json(&text)?;
    let claims = file
        .claims
        .iter()
        .map(|c| c.parse::<Claim>().map_err(CommandError::Usage))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rep = Report::new("lemmas", &digest, flags.seed.unwrap_or(0));
    let mut failed = false;
    for claim in claims {
        let verdicts = run_grid(claim)?;
        let bad: Vec<_> = verdicts.iter().filter(|v| !v.consistent).collect();
        let held = verdicts.iter().filter(|v| v.hypothesis).count();
        let name = claim.to_string();
        rep.push(Record::new("consistent", name.clone(), Value::Flag(bad.is_empty())));
        rep.push(Record::new("points", name.clone(), Value::Exact((verdicts.len() as i128).into())));
        rep.push(Record::new("hypothesis-held", name.clone(), Value::Exact((held as i128).into())));
        if let Some(v) = bad.first() {
            rep.push(Record::new("first-inconsistent", name, Value::Text(v.point.clone())));
        }
        failed |= !bad.is_empty();
    }
    if file.coalition {
        let setup = CoalitionSetup::standard();
        let table = verify_coalition(&setup)?;
        let ok = table.hypotheses_hold() && table.all_dominant();
        rep.push(Record::new("coalition-dominant", "-", Value::Flag(ok)));
        let flips = flip_each_hypothesis(&setup)?;
        for f in &flips {
            let witness = f.table.counterexample_for(f.miner).is_some();
            rep.push(Record::new("flip-counterexample", format!("miner{} {}", f.miner, f.claim), Value::Flag(witness)));
            failed |= !witness;
        }
        failed |= !ok;
    }
    if file.demba {
        let p = DembaPoint::standard();
        let miners = vec![
            MinerProfile::honest(num_rational::Ratio::new(1, 2)),
            MinerProfile::honest(num_rational::Ratio::new(1, 2)),
        ];
        let r = verify_demba(&p, miners)?;
        let profitable = r.profitable().len();
        rep.push(Record::new("profitable-deviations", "-", Value::Exact((profitable as i128).into())));
        rep.push(Record::new("collusion-bound-violations", "-", Value::Exact((r.bound_violations.len() as i128).into())));
        rep.push(Record::new("grief-loss", "alice", Value::Exact(r.alice_grief_loss)));
        for (d, loss) in &r.bob_delay_losses {
            rep.push(Record::new(format!("delay-{d}-loss"), "bob", Value::Exact(*loss)));
        }
        failed |= profitable > 0 || !r.bound_violations.is_empty();
    }
    rep.summary.push(if failed { "some checks failed".into() } else { "all checks passed".into() });
    Ok(Output { report: rep, failed })
}

pub fn pool(path: &Path, flags: Flags) -> Result<Output, CommandError> {
    let (text, digest) = scenario::read(path)?;
    let params: PoolParams = scenario::parse_json(&text)?;
    let seed = flags.seed.unwrap_or(0);
    let m = pool_math(&params)?;
    let mut rep = Report::new("pool", &digest, seed);
    let exact = |r: num_rational::Ratio<u64>| Value::Exact(crate::analysis::wide(r));
    rep.push(Record::new("solo-mean", "-", exact(m.solo_mean)));
    rep.push(Record::new("pool-mean", "-", exact(m.pool_mean)));
    rep.push(Record::new("ratio", "-", exact(m.ratio)));
    rep.push(Record::new("solo-var", "-", exact(m.solo_var)));
    rep.push(Record::new("pool-var", "-", exact(m.pool_var)));
    rep.push(Record::new("utility-gain", "-", Value::Approx(m.utility_gain)));
    rep.push(Record::new("solo-utility", "-", Value::Approx(m.solo_utility)));
    rep.push(Record::new("pool-utility", "-", Value::Approx(m.pool_utility)));
    if flags.mode != Some(ModeFlag::Exact) {
        let trials = flags.trials.unwrap_or(DEFAULT_TRIALS);
        let mc = pool_mc(&params, trials, seed)?;
        for (who, mo) in [("solo", mc.solo), ("pool", mc.pool)] {
            rep.push(Record::estimate(format!("{who}-mean-mc"), "-", mo.mean, 1.96 * mo.mean_se));
            rep.push(Record::estimate(format!("{who}-var-mc"), "-", mo.var, 1.96 * mo.var_se));
        }
        rep.header.push(("trials".into(), trials.to_string()));
    }
    Ok(Output { report: rep, failed: false })
}

pub fn ttc(path: &Path, flags: Flags) -> Result<Output, CommandError> {
    let (text, digest) = scenario::read(path)?;
    let spec: TtcSpec = scenario::parse_json(&text)?;
    let seed = flags.seed.unwrap_or(0);
    let trials = flags.trials.unwrap_or(DEFAULT_TRIALS);
    let r = ttc::ttc(&spec, trials, seed)?;
    let mut rep = Report::new("ttc", &digest, seed);
    rep.header.push(("trials".into(), trials.to_string()));
    let who = format!("{} {}", spec.variant, spec.path);
    rep.push(Record::estimate("ttc-rounds", who.clone(), r.mean, r.half_width));
    rep.push(Record::new("refund-delay", who.clone(), Value::Exact((r.refund_delay as i128).into())));
    rep.push(Record::new("unresolved", who, Value::Exact((r.unresolved as i128).into())));
    Ok(Output { report: rep, failed: false })
}
