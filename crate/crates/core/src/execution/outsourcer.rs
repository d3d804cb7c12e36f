use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::compare::{compare_pair, Comparison, PendingPair};
use super::qos::{qos_check, QosLedgerLocal, QosStatus, ViolationKind};
use super::{decode, Action, Disposition, Event, InputSource, RejectCause, SamplingSchedule, StepOutput, Strategy};
use crate::contract::{Contract, Party};
use crate::crypto::{Digest32, KeyPair, PublicKey};
use crate::merkle::MerkleTree;
use crate::randomization::SelectionProof;
use crate::settlement::{Accusation, CommittedResponse, ResponseEvidence};
use crate::wire::{
    response_leaf_hash, MembershipChallenge, MembershipProof, Message, RootCommitment, SignedInput, SignedResponse,
    Termination, FLAG_BATCH_END, FLAG_CLOSING,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchConfig {
    pub batch_size: u32,
    pub challenge_seed: u64,
}

pub struct OutsourcerSetup {
    pub keys: KeyPair,
    pub contractor_contract: Contract,
    pub verifier_contract: Contract,
    pub selection: SelectionProof,
    pub schedule: SamplingSchedule,
    pub inputs: InputSource,
    pub strategy: Strategy,
    /// Set when the Contractor answers with Merkle batches.
    pub batching: Option<BatchConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutsourcerPhase {
    Running,
    /// All work answered and closing inputs sent.
    Closed,
    /// Ended by this Outsourcer after a mismatch or a QoS violation.
    Aborted,
    /// A worker ended the session.
    Terminated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionKind {
    /// The two workers disagreed on a sampled input.
    Mismatch,
    /// A committed batch root did not match the leaves that arrived.
    BatchRootMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub input_index: u32,
    pub at: u64,
    pub kind: DetectionKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutsourcerStats {
    pub inputs_to_contractor: u32,
    pub inputs_to_verifier: u32,
    pub challenges_sent: u32,
    pub rejected: u32,
}

struct Leaf {
    payload: Vec<u8>,
    confirmed: bool,
}

pub struct Outsourcer {
    keys: KeyPair,
    contractor_contract: Contract,
    verifier_contract: Contract,
    ch_c: Digest32,
    ch_v: Digest32,
    selection: SelectionProof,
    schedule: SamplingSchedule,
    inputs: InputSource,
    strategy: Strategy,
    batching: Option<BatchConfig>,
    challenge_rng: ChaCha8Rng,
    phase: OutsourcerPhase,
    next_index: u32,
    ack_c: u32,
    ack_v: u32,
    sent_c: BTreeMap<u32, SignedInput>,
    pending: BTreeMap<u32, PendingPair>,
    leaves: BTreeMap<u32, Leaf>,
    roots: BTreeMap<u32, RootCommitment>,
    open_challenges: BTreeSet<u32>,
    challenged: BTreeSet<u32>,
    qos: QosLedgerLocal,
    detection: Option<Detection>,
    accusation: Option<Accusation>,
    stats: OutsourcerStats,
}

impl Outsourcer {
    pub fn new(setup: OutsourcerSetup) -> Self {
        let seed = setup.batching.map_or(0, |b| b.challenge_seed);
        Self {
            ch_c: setup.contractor_contract.hash(),
            ch_v: setup.verifier_contract.hash(),
            keys: setup.keys,
            contractor_contract: setup.contractor_contract,
            verifier_contract: setup.verifier_contract,
            selection: setup.selection,
            schedule: setup.schedule,
            inputs: setup.inputs,
            strategy: setup.strategy,
            batching: setup.batching,
            challenge_rng: ChaCha8Rng::seed_from_u64(seed),
            phase: OutsourcerPhase::Running,
            next_index: 0,
            ack_c: 0,
            ack_v: 0,
            sent_c: BTreeMap::new(),
            pending: BTreeMap::new(),
            leaves: BTreeMap::new(),
            roots: BTreeMap::new(),
            open_challenges: BTreeSet::new(),
            challenged: BTreeSet::new(),
            qos: QosLedgerLocal::default(),
            detection: None,
            accusation: None,
            stats: OutsourcerStats::default(),
        }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public
    }

    pub fn phase(&self) -> OutsourcerPhase {
        self.phase
    }

    pub fn is_running(&self) -> bool {
        self.phase == OutsourcerPhase::Running
    }

    pub fn detection(&self) -> Option<Detection> {
        self.detection
    }

    pub fn accusation(&self) -> Option<&Accusation> {
        self.accusation.as_ref()
    }

    pub fn qos(&self) -> &QosLedgerLocal {
        &self.qos
    }

    pub fn stats(&self) -> &OutsourcerStats {
        &self.stats
    }

    pub fn acknowledged(&self) -> (u32, u32) {
        (self.ack_c, self.ack_v)
    }

    pub fn schedule(&self) -> &SamplingSchedule {
        &self.schedule
    }

    fn peer_contract(&self, party: Party) -> (&Contract, Digest32) {
        match party {
            Party::Verifier => (&self.verifier_contract, self.ch_v),
            _ => (&self.contractor_contract, self.ch_c),
        }
    }

    pub fn step(&mut self, now: u64, event: Event) -> StepOutput {
        match event {
            Event::Tick => StepOutput { actions: self.tick(now), disposition: None },
            Event::Deliver { from, bytes } => self.deliver(now, from, &bytes),
        }
    }

    fn terminations(&self) -> Vec<Action> {
        [(Party::Contractor, self.ch_c, self.ack_c), (Party::Verifier, self.ch_v, self.ack_v)]
            .into_iter()
            .map(|(to, ch, ack)| Action::Send {
                to,
                msg: Message::Termination(Termination::sign(&self.keys, ch, ack)),
                delay: 0,
            })
            .collect()
    }

    fn abort(&mut self, peer: Party, kind: ViolationKind, now: u64) -> Vec<Action> {
        self.qos.blacklist(peer, kind, now);
        self.phase = OutsourcerPhase::Aborted;
        self.terminations()
    }

    fn tick(&mut self, now: u64) -> Vec<Action> {
        if !self.is_running() {
            return Vec::new();
        }
        let thresholds = self.contractor_contract.qos;
        for (peer, t) in [(Party::Contractor, thresholds), (Party::Verifier, self.verifier_contract.qos)] {
            if let Some(p) = self.qos.peer(peer) {
                if let QosStatus::Violation(kind) = qos_check(p, &t, now) {
                    return self.abort(peer, kind, now);
                }
            }
        }
        if self.next_index < self.schedule.total_inputs() {
            return self.send_next(now);
        }
        if self.all_answered() {
            return self.close();
        }
        Vec::new()
    }

    fn all_answered(&self) -> bool {
        let idle = |p: Party| self.qos.peer(p).is_none_or(|q| q.outstanding() == 0);
        idle(Party::Contractor)
            && idle(Party::Verifier)
            && self.leaves.values().all(|l| l.confirmed)
            && self.open_challenges.is_empty()
    }

    fn send_next(&mut self, now: u64) -> Vec<Action> {
        let index = self.next_index;
        self.next_index += 1;
        let payload = self.inputs.generate(index);
        let interval = self.schedule.interval_of(index);
        let last = index + 1 == self.schedule.total_inputs();
        let flags = if last && self.batching.is_some() { FLAG_BATCH_END } else { 0 };
        let to_c = SignedInput::sign(&self.keys, self.ch_c, index, self.ack_c, interval, flags, payload.clone());
        self.sent_c.insert(index, to_c.clone());
        self.qos.peer_mut(Party::Contractor).expect(index, now);
        self.stats.inputs_to_contractor += 1;
        let mut actions = vec![Action::Send { to: Party::Contractor, msg: Message::Input(to_c.clone()), delay: 0 }];
        if self.schedule.is_sampled(index) {
            let v_payload = match self.strategy {
                Strategy::SplitInput => split(payload),
                _ => payload,
            };
            let to_v = SignedInput::sign(&self.keys, self.ch_v, index, self.ack_v, interval, 0, v_payload);
            self.qos.peer_mut(Party::Verifier).expect(index, now);
            self.stats.inputs_to_verifier += 1;
            self.pending.insert(index, PendingPair::new(to_c, to_v.clone()));
            actions.push(Action::Send { to: Party::Verifier, msg: Message::Input(to_v), delay: 0 });
        }
        actions
    }

    fn close(&mut self) -> Vec<Action> {
        self.phase = OutsourcerPhase::Closed;
        if self.strategy == Strategy::PaymentRefuser {
            return Vec::new();
        }
        let index = self.schedule.total_inputs();
        let interval = self.schedule.interval_count();
        [(Party::Contractor, self.ch_c, self.ack_c), (Party::Verifier, self.ch_v, self.ack_v)]
            .into_iter()
            .map(|(to, ch, ack)| Action::Send {
                to,
                msg: Message::Input(SignedInput::sign(&self.keys, ch, index, ack, interval, FLAG_CLOSING, Vec::new())),
                delay: 0,
            })
            .collect()
    }

    fn reject(&mut self, now: u64, from: Party, cause: RejectCause) -> StepOutput {
        self.stats.rejected += 1;
        let actions = match (self.is_running(), from) {
            (true, Party::Contractor | Party::Verifier) => self.abort(from, ViolationKind::InvalidMessage, now),
            _ => Vec::new(),
        };
        StepOutput::delivered(Disposition::Rejected(cause), actions)
    }

    fn deliver(&mut self, now: u64, from: Party, bytes: &[u8]) -> StepOutput {
        let msg = match decode(bytes) {
            Ok(m) => m,
            Err(_) => return self.reject(now, from, RejectCause::Malformed),
        };
        if from == Party::Outsourcer {
            return self.reject(now, from, RejectCause::Unexpected);
        }
        let (contract, ch) = self.peer_contract(from);
        let worker = contract.worker_pk;
        if *msg.contract_ref() != ch {
            return self.reject(now, from, RejectCause::WrongContract);
        }
        let authentic = match &msg {
            Message::Response(m) => m.verify(&worker),
            Message::Root(m) => m.verify(&worker),
            Message::Proof(m) => m.verify_signature(&worker) && m.challenge.verify(&self.keys.public),
            Message::Termination(m) => m.verify(&worker),
            Message::Leaf(_) if from == Party::Contractor && self.batching.is_some() => true,
            _ => return self.reject(now, from, RejectCause::Unexpected),
        };
        if !authentic {
            return self.reject(now, from, RejectCause::BadSignature);
        }
        if !self.is_running() {
            return StepOutput::delivered(Disposition::Ignored, Vec::new());
        }
        match msg {
            Message::Response(r) if from == Party::Contractor && self.batching.is_none() => self.on_contractor_response(now, r),
            Message::Response(r) if from == Party::Verifier => self.on_verifier_response(now, r),
            Message::Leaf(l) => self.on_leaf(now, l.input_index, l.payload),
            Message::Root(r) if from == Party::Contractor => self.on_root(now, r),
            Message::Proof(p) if from == Party::Contractor => self.on_proof(now, p),
            Message::Termination(_) => {
                self.phase = OutsourcerPhase::Terminated;
                StepOutput::delivered(Disposition::Accepted, Vec::new())
            }
            _ => self.reject(now, from, RejectCause::Unexpected),
        }
    }

    fn on_contractor_response(&mut self, now: u64, r: SignedResponse) -> StepOutput {
        let countersigned = self.sent_c.get(&r.input_index).is_some_and(|i| i.sig == r.input_sig);
        if !countersigned {
            return self.reject(now, Party::Contractor, RejectCause::Unexpected);
        }
        if self.qos.peer_mut(Party::Contractor).answer(r.input_index, now).is_none() {
            return StepOutput::delivered(Disposition::Ignored, Vec::new());
        }
        self.ack_c += 1;
        let index = r.input_index;
        if let Some(pair) = self.pending.get_mut(&index) {
            pair.contractor = Some(ResponseEvidence::Signed(r));
        }
        let actions = self.compare(now, index);
        StepOutput::delivered(Disposition::Accepted, actions)
    }

    fn on_verifier_response(&mut self, now: u64, r: SignedResponse) -> StepOutput {
        let countersigned = self.pending.get(&r.input_index).is_some_and(|p| p.verifier_input.sig == r.input_sig);
        if !countersigned {
            return self.reject(now, Party::Verifier, RejectCause::Unexpected);
        }
        if self.qos.peer_mut(Party::Verifier).answer(r.input_index, now).is_none() {
            return StepOutput::delivered(Disposition::Ignored, Vec::new());
        }
        self.ack_v += 1;
        let index = r.input_index;
        self.pending.get_mut(&index).expect("checked above").verifier = Some(r);
        let mut actions = self.maybe_challenge(index);
        actions.extend(self.compare(now, index));
        StepOutput::delivered(Disposition::Accepted, actions)
    }

    fn on_leaf(&mut self, now: u64, index: u32, payload: Vec<u8>) -> StepOutput {
        if !self.sent_c.contains_key(&index) || self.leaves.contains_key(&index) {
            return self.reject(now, Party::Contractor, RejectCause::Unexpected);
        }
        self.qos.peer_mut(Party::Contractor).answer(index, now);
        self.leaves.insert(index, Leaf { payload, confirmed: false });
        StepOutput::delivered(Disposition::Accepted, Vec::new())
    }

    fn on_root(&mut self, now: u64, root: RootCommitment) -> StepOutput {
        let range = root.first_index..root.first_index.saturating_add(root.leaf_count);
        let complete = root.leaf_count > 0
            && !self.roots.contains_key(&root.batch_id)
            && range.clone().all(|i| self.leaves.get(&i).is_some_and(|l| !l.confirmed));
        if !complete {
            return self.reject(now, Party::Contractor, RejectCause::Unexpected);
        }
        let hashes = range.clone().map(|i| response_leaf_hash(i, &self.leaves[&i].payload)).collect();
        let rebuilt = MerkleTree::build(hashes).expect("non-empty").root();
        if rebuilt != root.root {
            // Some leaf changed in transit or the worker equivocated.
            self.detection.get_or_insert(Detection {
                input_index: root.first_index,
                at: now,
                kind: DetectionKind::BatchRootMismatch,
            });
            self.stats.rejected += 1;
            let actions = self.abort(Party::Contractor, ViolationKind::InvalidMessage, now);
            return StepOutput::delivered(Disposition::Rejected(RejectCause::BadSignature), actions);
        }
        for i in range.clone() {
            self.leaves.get_mut(&i).expect("present").confirmed = true;
        }
        self.ack_c += root.leaf_count;
        let routine = root.first_index + self.challenge_rng.gen_range(0..root.leaf_count);
        let batch_id = root.batch_id;
        self.roots.insert(batch_id, root);
        let mut actions = self.challenge(batch_id, routine);
        for i in range {
            actions.extend(self.maybe_challenge(i));
        }
        StepOutput::delivered(Disposition::Accepted, actions)
    }

    fn batch_of(&self, index: u32) -> Option<u32> {
        self.roots.values().find(|r| r.covers(index)).map(|r| r.batch_id)
    }

    fn challenge(&mut self, batch_id: u32, index: u32) -> Vec<Action> {
        if !self.challenged.insert(index) {
            return Vec::new();
        }
        self.open_challenges.insert(index);
        self.stats.challenges_sent += 1;
        let c = MembershipChallenge::sign(&self.keys, self.ch_c, batch_id, index);
        vec![Action::Send { to: Party::Contractor, msg: Message::Challenge(c), delay: 0 }]
    }

    /// Asks for a signed opening of a batched answer that disagrees with the
    /// Verifier.
    fn maybe_challenge(&mut self, index: u32) -> Vec<Action> {
        let disagrees = match (self.pending.get(&index).and_then(|p| p.verifier.as_ref()), self.leaves.get(&index)) {
            (Some(v), Some(leaf)) => v.payload != leaf.payload,
            _ => false,
        };
        match self.batch_of(index) {
            Some(batch_id) if disagrees => self.challenge(batch_id, index),
            _ => Vec::new(),
        }
    }

    fn on_proof(&mut self, now: u64, proof: MembershipProof) -> StepOutput {
        let index = proof.challenge.challenged_index;
        let valid = self.open_challenges.contains(&index)
            && self
                .roots
                .get(&proof.challenge.batch_id)
                .is_some_and(|root| proof.verify_against(root, &self.contractor_contract.worker_pk));
        if !valid {
            return self.reject(now, Party::Contractor, RejectCause::BadSignature);
        }
        self.open_challenges.remove(&index);
        let root = self.roots[&proof.challenge.batch_id].clone();
        if let Some(pair) = self.pending.get_mut(&index) {
            pair.contractor = Some(ResponseEvidence::Committed(Box::new(CommittedResponse { root, proof })));
        }
        let actions = self.compare(now, index);
        StepOutput::delivered(Disposition::Accepted, actions)
    }

    fn compare(&mut self, now: u64, index: u32) -> Vec<Action> {
        let Some(pair) = self.pending.get(&index).filter(|p| p.is_complete()) else {
            return Vec::new();
        };
        match compare_pair(pair) {
            Ok(Comparison::Equal) | Err(_) => {
                self.pending.remove(&index);
                Vec::new()
            }
            Ok(Comparison::Mismatch) => {
                let pair = self.pending.remove(&index).expect("present");
                self.detection = Some(Detection { input_index: index, at: now, kind: DetectionKind::Mismatch });
                let accusation = Accusation {
                    contractor_contract: self.contractor_contract.clone(),
                    verifier_contract: self.verifier_contract.clone(),
                    contractor_input: pair.contractor_input,
                    verifier_input: pair.verifier_input,
                    contractor_evidence: pair.contractor.expect("complete"),
                    verifier_response: pair.verifier.expect("complete"),
                    selection: self.selection.clone(),
                };
                self.accusation = Some(accusation.clone());
                self.phase = OutsourcerPhase::Aborted;
                let mut actions = vec![Action::Accuse(Box::new(accusation))];
                actions.extend(self.terminations());
                actions
            }
        }
    }
}

/// A different input of the same shape.
fn split(mut payload: Vec<u8>) -> Vec<u8> {
    match payload.first_mut() {
        Some(b) => *b ^= 0xff,
        None => payload.push(0xff),
    }
    payload
}
