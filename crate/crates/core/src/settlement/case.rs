//! Accusations and multi-round contestation.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::ledger::{Ledger, RedemptionState, TransferKind};
use super::{Accusation, ResponseEvidence, SettlementError};
use crate::contract::{Party, Role};
use crate::crypto::{hash, Digest32, PublicKey};
use crate::randomization::{SelectionContext, SelectionOutcome};
use crate::wire::{ContestResponse, SignedInput, SignedResponse};

/// Verifiers consulted per contestation round.
pub const VERIFIERS_PER_ROUND: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvictionReason {
    /// The accusation stood because the accused never contested it.
    Uncontested,
    /// The accused opened a round but did not submit the fresh results.
    MissedSubmission,
    /// No unconsulted verifier was left and the majority was not with the
    /// accused.
    PoolExhausted,
    /// The Outsourcer signed different inputs for the two workers.
    SplitInput,
    /// The Outsourcer could not show it contacted the selected Verifier.
    IllegitimateVerifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub convicted: Party,
    pub reason: ConvictionReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CasePhase {
    /// `party` stands accused and may open a contestation round.
    Accused(Party),
    /// `accused` must submit the assigned verifiers' results.
    Contested { accused: Party, assigned: Vec<PublicKey> },
    Closed(Outcome),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub contractor: u32,
    pub verifier: u32,
}

impl Tally {
    fn of(&self, party: Party) -> u32 {
        match party {
            Party::Contractor => self.contractor,
            Party::Verifier => self.verifier,
            Party::Outsourcer => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub id: Digest32,
    pub contractor_contract: Digest32,
    pub verifier_contract: Digest32,
    pub outsourcer: PublicKey,
    pub contractor: PublicKey,
    pub verifier: PublicKey,
    pub input_digest: Digest32,
    pub contractor_input: SignedInput,
    pub contractor_evidence: ResponseEvidence,
    pub verifier_input: SignedInput,
    pub verifier_response: SignedResponse,
    pub phase: CasePhase,
    pub deadline: u64,
    pub rounds: u32,
    pub tally: Tally,
    pub consulted: BTreeSet<PublicKey>,
    selection_checked: bool,
    selection: crate::randomization::SelectionProof,
}

impl Case {
    pub fn outcome(&self) -> Option<Outcome> {
        match self.phase {
            CasePhase::Closed(o) => Some(o),
            _ => None,
        }
    }

    pub fn key_of(&self, party: Party) -> PublicKey {
        match party {
            Party::Outsourcer => self.outsourcer,
            Party::Contractor => self.contractor,
            Party::Verifier => self.verifier,
        }
    }

    fn party_of(&self, key: &PublicKey) -> Option<Party> {
        [Party::Contractor, Party::Verifier].into_iter().find(|p| self.key_of(*p) == *key)
    }

    pub(super) fn summary(&self) -> String {
        let phase = match &self.phase {
            CasePhase::Accused(p) => format!("accused={p}"),
            CasePhase::Contested { accused, assigned } => format!("contested={accused} assigned={}", assigned.len()),
            CasePhase::Closed(o) => format!("closed convicted={} reason={:?}", o.convicted, o.reason),
        };
        format!(
            "{phase} rounds={} tally={}:{} consulted={}",
            self.rounds,
            self.tally.contractor,
            self.tally.verifier,
            self.consulted.len()
        )
    }
}

/// What opening a contestation round led to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Opening {
    /// Submit these verifiers' signed results before the deadline.
    Assigned(Vec<PublicKey>),
    /// The case closed without a new round.
    Resolved(Outcome),
}

/// The accused party's answer to an open round: its own original record
/// plus one fresh result per assigned verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ContestSubmission {
    pub submitter: PublicKey,
    pub input: SignedInput,
    pub response: ResponseEvidence,
    pub results: Vec<(PublicKey, ContestResponse)>,
}

fn other(party: Party) -> Party {
    match party {
        Party::Contractor => Party::Verifier,
        _ => Party::Contractor,
    }
}

impl Ledger {
    pub fn case(&self, id: &Digest32) -> Option<&Case> {
        self.cases.get(id)
    }

    pub fn cases(&self) -> impl Iterator<Item = &Case> {
        self.cases.values()
    }

    /// Checks the accusation and opens a case against the Contractor.
    /// Signed inputs that differ between the two workers convict the
    /// Outsourcer on the spot.
    pub fn accuse(&mut self, acc: &Accusation, now: u64) -> Result<Digest32, SettlementError> {
        use SettlementError::{BadSignature, InvalidAccusation};
        let ch_c = acc.contractor_contract.hash();
        let ch_v = acc.verifier_contract.hash();
        for ch in [&ch_c, &ch_v] {
            let record = self.contracts.get(ch).ok_or(SettlementError::UnknownContract)?;
            if record.case.is_some() || self.cases.contains_key(ch) {
                return Err(SettlementError::DuplicateCase);
            }
            match record.redemption {
                RedemptionState::Pending { due, .. } if due < now => return Err(SettlementError::TooLate),
                RedemptionState::Paid { .. } | RedemptionState::Forfeited => return Err(SettlementError::TooLate),
                _ => {}
            }
        }
        let (cc, vc) = (&acc.contractor_contract, &acc.verifier_contract);
        if cc.role != Role::Contractor || vc.role != Role::Verifier {
            return Err(InvalidAccusation("contract roles"));
        }
        if cc.outsourcer_pk != vc.outsourcer_pk || cc.function_id != vc.function_id {
            return Err(InvalidAccusation("contracts belong to different sessions"));
        }
        let o = cc.outsourcer_pk;
        let (ci, vi) = (&acc.contractor_input, &acc.verifier_input);
        if ci.contract_ref != ch_c || vi.contract_ref != ch_v || ci.input_index != vi.input_index {
            return Err(InvalidAccusation("inputs do not reference the contracts"));
        }
        if ci.is_closing() || vi.is_closing() {
            return Err(InvalidAccusation("closing input carries no work"));
        }
        if !ci.verify(&o) || !vi.verify(&o) {
            return Err(BadSignature("outsourcer input"));
        }
        if !acc.contractor_evidence.binds(ci, &o, &cc.worker_pk) {
            return Err(BadSignature("contractor response"));
        }
        if !ResponseEvidence::Signed(acc.verifier_response.clone()).binds(vi, &o, &vc.worker_pk) {
            return Err(BadSignature("verifier response"));
        }
        let split = ci.payload != vi.payload;
        if !split && acc.contractor_evidence.payload() == acc.verifier_response.payload.as_slice() {
            return Err(SettlementError::ResponsesAgree);
        }
        let case = Case {
            id: ch_c,
            contractor_contract: ch_c,
            verifier_contract: ch_v,
            outsourcer: o,
            contractor: cc.worker_pk,
            verifier: vc.worker_pk,
            input_digest: hash(&ci.payload),
            contractor_input: ci.clone(),
            contractor_evidence: acc.contractor_evidence.clone(),
            verifier_input: vi.clone(),
            verifier_response: acc.verifier_response.clone(),
            phase: CasePhase::Accused(Party::Contractor),
            deadline: now + self.cfg.deadline,
            rounds: 0,
            tally: Tally::default(),
            consulted: BTreeSet::new(),
            selection_checked: false,
            selection: acc.selection.clone(),
        };
        for ch in [ch_c, ch_v] {
            self.contracts.get_mut(&ch).expect("checked").case = Some(ch_c);
        }
        self.cases.insert(ch_c, case);
        if split {
            self.close_case(ch_c, Outcome { convicted: Party::Outsourcer, reason: ConvictionReason::SplitInput }, now);
        }
        Ok(ch_c)
    }

    /// Opens the next round, drawing verifiers with the ledger's own
    /// randomness.
    pub fn open_contestation(&mut self, id: &Digest32, requester: &PublicKey, now: u64) -> Result<Opening, SettlementError> {
        self.open_contestation_with(id, requester, now, |pool, k, rng| {
            sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
        })
    }

    /// Like [`Ledger::open_contestation`] with a caller-supplied choice of
    /// `k` verifiers out of the sorted unconsulted pool.
    pub fn open_contestation_with<F>(
        &mut self,
        id: &Digest32,
        requester: &PublicKey,
        now: u64,
        choose: F,
    ) -> Result<Opening, SettlementError>
    where
        F: FnOnce(&[PublicKey], usize, &mut rand_chacha::ChaCha8Rng) -> Vec<PublicKey>,
    {
        let case = self.cases.get(id).ok_or(SettlementError::UnknownCase)?;
        let accused = match case.phase {
            CasePhase::Accused(p) => p,
            CasePhase::Contested { .. } => return Err(SettlementError::RoundOpen),
            CasePhase::Closed(_) => return Err(SettlementError::CaseClosed),
        };
        if case.key_of(accused) != *requester {
            return Err(SettlementError::NotAccused);
        }
        if now > case.deadline {
            return Err(SettlementError::TooLate);
        }
        if !case.selection_checked {
            let ctx = SelectionContext {
                contract_ref: case.contractor_contract,
                outsourcer_pk: case.outsourcer,
                contractor_pk: case.contractor,
            };
            if let SelectionOutcome::Reject(_) = case.selection.check(&ctx, &case.verifier) {
                let outcome = Outcome { convicted: Party::Outsourcer, reason: ConvictionReason::IllegitimateVerifier };
                self.close_case(*id, outcome, now);
                return Ok(Opening::Resolved(outcome));
            }
            self.cases.get_mut(id).expect("exists").selection_checked = true;
        }
        let case = &self.cases[id];
        let parties = [case.outsourcer, case.contractor, case.verifier];
        let pool: Vec<PublicKey> = self
            .verifiers
            .iter()
            .filter(|v| !parties.contains(v) && !case.consulted.contains(v))
            .copied()
            .collect();
        if pool.is_empty() {
            let outcome = Outcome { convicted: accused, reason: ConvictionReason::PoolExhausted };
            self.close_case(*id, outcome, now);
            return Ok(Opening::Resolved(outcome));
        }
        let k = pool.len().min(VERIFIERS_PER_ROUND);
        let mut assigned = choose(&pool, k, &mut self.rng);
        assigned.sort();
        assigned.dedup();
        if assigned.len() != k || assigned.iter().any(|v| pool.binary_search(v).is_err()) {
            return Err(SettlementError::InvalidAssignment);
        }
        let deadline = now + self.cfg.deadline;
        let case = self.cases.get_mut(id).expect("exists");
        case.phase = CasePhase::Contested { accused, assigned: assigned.clone() };
        case.deadline = deadline;
        Ok(Opening::Assigned(assigned))
    }

    /// Tallies the fresh results. The accusation moves to the other worker
    /// only if the submitter now has strictly more support; ties leave it
    /// in place.
    pub fn submit_contest(&mut self, id: &Digest32, sub: &ContestSubmission, now: u64) -> Result<Party, SettlementError> {
        let case = self.cases.get(id).ok_or(SettlementError::UnknownCase)?;
        let (accused, assigned) = match &case.phase {
            CasePhase::Contested { accused, assigned } => (*accused, assigned),
            CasePhase::Accused(_) => return Err(SettlementError::NoRoundOpen),
            CasePhase::Closed(_) => return Err(SettlementError::CaseClosed),
        };
        if case.party_of(&sub.submitter) != Some(accused) {
            return Err(SettlementError::NotAccused);
        }
        if now > case.deadline {
            return Err(SettlementError::TooLate);
        }
        let on_record = match accused {
            Party::Contractor => sub.input == case.contractor_input && sub.response == case.contractor_evidence,
            _ => {
                sub.input == case.verifier_input
                    && sub.response == ResponseEvidence::Signed(case.verifier_response.clone())
            }
        };
        if !on_record {
            return Err(SettlementError::RecordMismatch);
        }
        let mut signers: Vec<PublicKey> = sub.results.iter().map(|(pk, _)| *pk).collect();
        signers.sort();
        if signers != *assigned {
            return Err(SettlementError::InvalidAssignment);
        }
        for (pk, result) in &sub.results {
            if result.input_digest != case.input_digest {
                return Err(SettlementError::InvalidAccusation("result for another input"));
            }
            if !result.verify(pk) {
                return Err(SettlementError::BadSignature("contest result"));
            }
        }
        let c_payload = case.contractor_evidence.payload().to_vec();
        let v_payload = case.verifier_response.payload.clone();
        let deadline = now + self.cfg.deadline;
        let case = self.cases.get_mut(id).expect("exists");
        for (pk, result) in &sub.results {
            if result.payload == c_payload {
                case.tally.contractor += 1;
            } else if result.payload == v_payload {
                case.tally.verifier += 1;
            }
            case.consulted.insert(*pk);
        }
        case.rounds += 1;
        let next = if case.tally.of(accused) > case.tally.of(other(accused)) { other(accused) } else { accused };
        case.phase = CasePhase::Accused(next);
        case.deadline = deadline;
        Ok(next)
    }

    pub(super) fn expire_cases(&mut self, now: u64) {
        let expired: Vec<(Digest32, Outcome)> = self
            .cases
            .iter()
            .filter(|(_, c)| c.deadline < now)
            .filter_map(|(id, c)| {
                let outcome = match c.phase {
                    CasePhase::Accused(p) => Outcome { convicted: p, reason: ConvictionReason::Uncontested },
                    CasePhase::Contested { accused, .. } => {
                        Outcome { convicted: accused, reason: ConvictionReason::MissedSubmission }
                    }
                    CasePhase::Closed(_) => return None,
                };
                Some((*id, outcome))
            })
            .collect();
        for (id, outcome) in expired {
            self.close_case(id, outcome, now);
        }
    }

    /// Applies the penalties of `outcome` and settles both contracts.
    fn close_case(&mut self, id: Digest32, outcome: Outcome, now: u64) {
        let case = self.cases.get_mut(&id).expect("exists");
        case.phase = CasePhase::Closed(outcome);
        let case = case.clone();
        let (ch_c, ch_v) = (case.contractor_contract, case.verifier_contract);
        let contract_of = |l: &Ledger, ch: &Digest32| l.contracts[ch].contract.clone();
        match outcome.convicted {
            Party::Outsourcer => {
                let mut owed = vec![ch_c];
                if outcome.reason == ConvictionReason::SplitInput {
                    owed.push(ch_v);
                }
                for ch in owed {
                    let c = contract_of(self, &ch);
                    self.collect(TransferKind::Fee, c.outsourcer_pk, c.worker_pk, ch, c.fee, now, true);
                }
            }
            worker => {
                let (ch, detector) = match worker {
                    Party::Contractor => (ch_c, case.verifier),
                    _ => (ch_v, case.contractor),
                };
                let c = contract_of(self, &ch);
                let w = c.worker_pk;
                self.collect(TransferKind::Fee, w, c.outsourcer_pk, ch, c.fee, now, true);
                self.collect(TransferKind::Bounty, w, detector, ch, c.bounty, now, true);
                let per_verifier = self.cfg.contest_reward.unwrap_or(c.reward_per_input);
                for v in &case.consulted {
                    self.collect(TransferKind::ContestReward, w, *v, ch, per_verifier, now, true);
                }
                self.contracts.get_mut(&ch).expect("exists").redemption = RedemptionState::Forfeited;
            }
        }
        for ch in [ch_c, ch_v] {
            self.contracts.get_mut(&ch).expect("exists").case = None;
            self.pay_redemption(ch, now);
            self.release(ch, now);
        }
    }
}
