//! Deterministic discrete-event simulator for whole outsourcing sessions.

mod contest;
mod network;
mod run;
mod scenario;
mod threats;

pub use contest::{contest_scenario, explore_contestation, ExploreConfig, Exploration};
pub use network::{
    flip_byte, inject_drop, inject_latency, inject_tamper, DropRule, Latency, LinkFilter, LinkLatency, NetworkModel,
    TamperRule,
};
pub use run::{dispute_fixture, run_scenario, DisputeFixture, LedgerSummary, Mechanism, MessageStats, OverheadStats, PartyLedger, ScenarioReport};
pub use scenario::{Costs, Scenario, ScenarioError, StrategySpec, Terms, ThreatId};
pub use threats::{assess, rep_seed, run_threat, run_threat_suite, run_threat_with, ThreatMatrix, ThreatRow};

#[cfg(test)]
mod tests;
