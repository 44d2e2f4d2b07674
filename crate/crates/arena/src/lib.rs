//! Discrete-round ledger simulator and strategy verifier for hashed-timelock
//! swap protocols and the bribery attacks against them.
//!
//! Layers, bottom up: [`ledger`] applies blocks and keeps the books,
//! [`contracts`] defines redeem paths and the adversarial contracts,
//! [`agents`] turns named policies into transactions and blocks, [`game`]
//! plays schedules and takes expectations, [`analysis`] holds the
//! closed-form oracles and dominance verifiers, and [`runner`] is the
//! scenario-file and report front end.

pub mod agents;
pub mod analysis;
pub mod contracts;
pub mod game;
pub mod ledger;
pub mod runner;
