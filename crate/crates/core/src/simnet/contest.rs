//! Exhaustive exploration of contestation: every choice of fresh verifiers
//! in every round, and every point at which the deviating worker may stop
//! contesting.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::run::{dispute_fixture, DisputeFixture};
use super::scenario::{Scenario, ScenarioError, StrategySpec, ThreatId};
use crate::contract::Party;
use crate::crypto::{Digest32, PublicKey};
use crate::settlement::{CasePhase, ContestSubmission, Ledger, Opening, Outcome, ResponseEvidence, VERIFIERS_PER_ROUND};
use crate::wire::ContestResponse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreConfig {
    /// Verifiers available to contestation, the session Verifier excluded.
    pub pool: usize,
    /// Pool members that back the false responder.
    pub colluders: usize,
    /// Contractor or Verifier.
    pub false_responder: Party,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exploration {
    pub config: ExploreConfig,
    pub branches: u64,
    pub false_responder_convicted: u64,
    pub honest_worker_convicted: u64,
    pub outsourcer_convicted: u64,
    pub max_rounds: u32,
    pub conservation_failures: u64,
}

impl Exploration {
    /// Every branch ended with the false responder convicted.
    pub fn sound(&self) -> bool {
        self.branches > 0 && self.false_responder_convicted == self.branches && self.conservation_failures == 0
    }
}

fn choices(pool: &[PublicKey], k: usize) -> Vec<Vec<PublicKey>> {
    match k {
        0 => vec![vec![]],
        _ => (0..pool.len())
            .flat_map(|i| {
                choices(&pool[i + 1..], k - 1).into_iter().map(move |mut rest| {
                    rest.insert(0, pool[i]);
                    rest
                })
            })
            .collect(),
    }
}

struct Explorer {
    id: Digest32,
    deadline: u64,
    false_responder: Party,
    /// Signed result of each pool member, honest or colluding.
    results: BTreeMap<PublicKey, ContestResponse>,
    summary: Exploration,
}

impl Explorer {
    fn record(&mut self, outcome: Outcome, ledger: &Ledger, rounds: u32) {
        let s = &mut self.summary;
        s.branches += 1;
        s.max_rounds = s.max_rounds.max(rounds);
        match outcome.convicted {
            p if p == self.false_responder => s.false_responder_convicted += 1,
            Party::Outsourcer => s.outsourcer_convicted += 1,
            _ => s.honest_worker_convicted += 1,
        }
        s.conservation_failures += u64::from(!ledger.is_conserved());
    }

    fn submission(&self, ledger: &Ledger, accused: Party, assigned: &[PublicKey]) -> ContestSubmission {
        let case = ledger.case(&self.id).expect("case exists");
        let (input, response) = match accused {
            Party::Contractor => (case.contractor_input.clone(), case.contractor_evidence.clone()),
            _ => (case.verifier_input.clone(), ResponseEvidence::Signed(case.verifier_response.clone())),
        };
        ContestSubmission {
            submitter: case.key_of(accused),
            input,
            response,
            results: assigned.iter().map(|v| (*v, self.results[v].clone())).collect(),
        }
    }

    fn walk(&mut self, ledger: Ledger, now: u64) {
        let case = ledger.case(&self.id).expect("case exists");
        let accused = match &case.phase {
            CasePhase::Closed(o) => return self.record(*o, &ledger, case.rounds),
            CasePhase::Accused(p) => *p,
            CasePhase::Contested { .. } => unreachable!("rounds are submitted before walking on"),
        };
        let requester = case.key_of(accused);
        if accused == self.false_responder {
            let mut l = ledger.clone();
            l.finalize(now + self.deadline + 1);
            let case = l.case(&self.id).expect("case exists");
            let outcome = case.outcome().expect("expired case is closed");
            self.record(outcome, &l, case.rounds);
        }
        let parties = [case.outsourcer, case.contractor, case.verifier];
        let pool: Vec<PublicKey> = ledger
            .registered_verifiers()
            .iter()
            .filter(|v| !parties.contains(v) && !case.consulted.contains(v))
            .copied()
            .collect();
        let picks = if pool.is_empty() { vec![vec![]] } else { choices(&pool, pool.len().min(VERIFIERS_PER_ROUND)) };
        for pick in picks {
            let mut l = ledger.clone();
            let chosen = pick.clone();
            match l.open_contestation_with(&self.id, &requester, now + 1, move |_, _, _| chosen) {
                Ok(Opening::Resolved(o)) => {
                    let rounds = l.case(&self.id).expect("case exists").rounds;
                    self.record(o, &l, rounds);
                }
                Ok(Opening::Assigned(assigned)) => {
                    let sub = self.submission(&l, accused, &assigned);
                    l.submit_contest(&self.id, &sub, now + 2).expect("well-formed submission");
                    self.walk(l, now + 2);
                }
                Err(e) => panic!("opening a round failed: {e}"),
            }
        }
    }
}

/// Scenario whose first sampled input exposes `false_responder`.
pub fn contest_scenario(cfg: &ExploreConfig) -> Scenario {
    let threat = if cfg.false_responder == Party::Contractor { ThreatId::T1 } else { ThreatId::T2 };
    let mut sc = Scenario::for_threat(threat, cfg.seed);
    sc.name = format!("contest-{}-{}-{}", cfg.pool, cfg.colluders, cfg.false_responder);
    sc.inputs = 4;
    sc.interval_size = 2;
    sc.verifiers = cfg.pool + 1;
    sc.colluding_verifiers = cfg.colluders;
    sc.network = Default::default();
    sc.outsourcer = StrategySpec::Honest;
    let cheat = StrategySpec::CheatRate { rate: 1.0 };
    (sc.contractor, sc.verifier) = match cfg.false_responder {
        Party::Contractor => (cheat, StrategySpec::Honest),
        _ => (StrategySpec::Honest, cheat),
    };
    sc
}

pub fn explore_contestation(cfg: ExploreConfig) -> Result<Exploration, ScenarioError> {
    if cfg.false_responder == Party::Outsourcer {
        return Err(ScenarioError::Invalid("the false responder must be a worker".into()));
    }
    let DisputeFixture { ledger, case, now, verifiers, function, .. } = dispute_fixture(&contest_scenario(&cfg))?;
    let record = ledger.case(&case).expect("fixture filed a case").clone();
    let truth = function.evaluate(&record.contractor_input.payload);
    let lie = match cfg.false_responder {
        Party::Contractor => record.contractor_evidence.payload().to_vec(),
        _ => record.verifier_response.payload.clone(),
    };
    let pool: Vec<PublicKey> = verifiers.keys().filter(|k| **k != record.verifier).copied().collect();
    let colluders: BTreeSet<PublicKey> = pool.iter().take(cfg.colluders).copied().collect();
    let results = pool
        .iter()
        .map(|v| {
            let payload = if colluders.contains(v) { lie.clone() } else { truth.clone() };
            (*v, ContestResponse::sign(&verifiers[v], record.input_digest, payload))
        })
        .collect();
    let mut explorer = Explorer {
        id: case,
        deadline: ledger.config().deadline,
        false_responder: cfg.false_responder,
        results,
        summary: Exploration {
            config: cfg,
            branches: 0,
            false_responder_convicted: 0,
            honest_worker_convicted: 0,
            outsourcer_convicted: 0,
            max_rounds: 0,
            conservation_failures: 0,
        },
    };
    explorer.walk(ledger, now);
    Ok(explorer.summary)
}
