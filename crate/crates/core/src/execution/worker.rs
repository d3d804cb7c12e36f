use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::qos::{QosLedgerLocal, ViolationKind};
use super::{decode, Action, ComputeFunction, Disposition, Event, RejectCause, StepOutput, Strategy};
use crate::contract::{Contract, Party};
use crate::crypto::{Digest32, KeyPair, PublicKey};
use crate::merkle::MerkleTree;
use crate::wire::{
    response_leaf_hash, MembershipChallenge, MembershipProof, Message, ResponseLeaf, RootCommitment, SignedInput,
    SignedResponse, Termination, FLAG_BATCH_END,
};

pub struct WorkerSetup {
    pub keys: KeyPair,
    pub contract: Contract,
    /// `Contractor` or `Verifier`.
    pub party: Party,
    pub strategy: Strategy,
    pub function: Arc<dyn ComputeFunction>,
    pub seed: u64,
    /// Commit responses in Merkle batches of this size instead of signing
    /// each one.
    pub batch_size: Option<u32>,
    /// Identities this worker can recognise. The contract counterparty is
    /// always included.
    pub known_peers: BTreeSet<PublicKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerPhase {
    Running,
    /// Received the closing input.
    Closed,
    /// The Outsourcer ended the session.
    Terminated,
    /// This worker ended the session after a bad message.
    Aborted,
}

struct CommittedBatch {
    first_index: u32,
    tree: MerkleTree,
    payloads: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkerStats {
    pub inputs_received: u32,
    pub responses_sent: u32,
    pub false_responses: u32,
    pub first_false_at: Option<u64>,
    pub rejected: u32,
}

pub struct Worker {
    keys: KeyPair,
    contract: Contract,
    contract_ref: Digest32,
    party: Party,
    strategy: Strategy,
    function: Arc<dyn ComputeFunction>,
    batch_size: Option<u32>,
    known_peers: BTreeSet<PublicKey>,
    rng: ChaCha8Rng,
    phase: WorkerPhase,
    last_input: Option<SignedInput>,
    open_batch: Vec<(u32, Vec<u8>)>,
    committed: BTreeMap<u32, CommittedBatch>,
    next_batch_id: u32,
    qos: QosLedgerLocal,
    stats: WorkerStats,
}

impl Worker {
    pub fn new(setup: WorkerSetup) -> Self {
        let mut known_peers = setup.known_peers;
        known_peers.insert(setup.contract.outsourcer_pk);
        Self {
            contract_ref: setup.contract.hash(),
            keys: setup.keys,
            contract: setup.contract,
            party: setup.party,
            strategy: setup.strategy,
            function: setup.function,
            batch_size: setup.batch_size.filter(|&b| b > 0),
            known_peers,
            rng: ChaCha8Rng::seed_from_u64(setup.seed),
            phase: WorkerPhase::Running,
            last_input: None,
            open_batch: Vec::new(),
            committed: BTreeMap::new(),
            next_batch_id: 0,
            qos: QosLedgerLocal::default(),
            stats: WorkerStats::default(),
        }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    pub fn party(&self) -> Party {
        self.party
    }

    pub fn contract(&self) -> &Contract {
        &self.contract
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn phase(&self) -> WorkerPhase {
        self.phase
    }

    /// The newest authentic input, which the worker redeems for payment.
    pub fn last_input(&self) -> Option<&SignedInput> {
        self.last_input.as_ref()
    }

    pub fn qos(&self) -> &QosLedgerLocal {
        &self.qos
    }

    pub fn stats(&self) -> &WorkerStats {
        &self.stats
    }

    pub fn step(&mut self, now: u64, event: Event) -> StepOutput {
        match event {
            Event::Tick => StepOutput::default(),
            Event::Deliver { from, bytes } => self.deliver(now, from, &bytes),
        }
    }

    fn reject(&mut self, now: u64, cause: RejectCause) -> StepOutput {
        self.stats.rejected += 1;
        let mut actions = Vec::new();
        if self.phase == WorkerPhase::Running {
            self.qos.blacklist(Party::Outsourcer, ViolationKind::InvalidMessage, now);
            self.phase = WorkerPhase::Aborted;
            let term = Termination::sign(&self.keys, self.contract_ref, self.stats.responses_sent);
            actions.push(Action::Send { to: Party::Outsourcer, msg: Message::Termination(term), delay: 0 });
        }
        StepOutput::delivered(Disposition::Rejected(cause), actions)
    }

    fn deliver(&mut self, now: u64, from: Party, bytes: &[u8]) -> StepOutput {
        let msg = match decode(bytes) {
            Ok(m) => m,
            Err(_) => return self.reject(now, RejectCause::Malformed),
        };
        if from != Party::Outsourcer {
            return self.reject(now, RejectCause::Unexpected);
        }
        if *msg.contract_ref() != self.contract_ref {
            return self.reject(now, RejectCause::WrongContract);
        }
        let outsourcer = self.contract.outsourcer_pk;
        let authentic = match &msg {
            Message::Input(m) => m.verify(&outsourcer),
            Message::Challenge(m) => m.verify(&outsourcer),
            Message::Termination(m) => m.verify(&outsourcer),
            _ => return self.reject(now, RejectCause::Unexpected),
        };
        if !authentic {
            return self.reject(now, RejectCause::BadSignature);
        }
        if self.phase != WorkerPhase::Running {
            return StepOutput::delivered(Disposition::Ignored, Vec::new());
        }
        match msg {
            Message::Input(input) => self.on_input(now, input),
            Message::Challenge(c) => self.on_challenge(now, c),
            Message::Termination(_) => {
                self.phase = WorkerPhase::Terminated;
                StepOutput::delivered(Disposition::Accepted, Vec::new())
            }
            _ => unreachable!("filtered above"),
        }
    }

    fn on_input(&mut self, now: u64, input: SignedInput) -> StepOutput {
        if let Some(last) = &self.last_input {
            // Indices only grow and an acknowledged count is never withdrawn.
            if input.input_index <= last.input_index || input.ack_count < last.ack_count {
                return self.reject(now, RejectCause::Unexpected);
            }
        }
        self.stats.inputs_received += 1;
        self.last_input = Some(input.clone());
        if input.is_closing() {
            self.phase = WorkerPhase::Closed;
            return StepOutput::delivered(Disposition::Accepted, Vec::new());
        }
        let (output, deviated) =
            self.strategy.worker_output(self.function.as_ref(), &input.payload, &self.known_peers, &mut self.rng);
        if deviated && output != self.function.evaluate(&input.payload) {
            self.stats.false_responses += 1;
            self.stats.first_false_at.get_or_insert(now);
        }
        self.stats.responses_sent += 1;
        let delay = self.strategy.response_delay();
        let mut actions = Vec::new();
        match self.batch_size {
            None => {
                let resp = SignedResponse::sign(&self.keys, &input, output);
                actions.push(Action::Send { to: Party::Outsourcer, msg: Message::Response(resp), delay });
            }
            Some(size) => {
                let leaf = ResponseLeaf { contract_ref: self.contract_ref, input_index: input.input_index, payload: output };
                self.open_batch.push((leaf.input_index, leaf.payload.clone()));
                actions.push(Action::Send { to: Party::Outsourcer, msg: Message::Leaf(leaf), delay });
                if self.open_batch.len() as u32 >= size || input.flags & FLAG_BATCH_END != 0 {
                    let root = self.commit_batch();
                    actions.push(Action::Send { to: Party::Outsourcer, msg: Message::Root(root), delay });
                }
            }
        }
        StepOutput::delivered(Disposition::Accepted, actions)
    }

    fn commit_batch(&mut self) -> RootCommitment {
        let entries = std::mem::take(&mut self.open_batch);
        let first_index = entries[0].0;
        let leaves = entries.iter().map(|(i, p)| response_leaf_hash(*i, p)).collect();
        let tree = MerkleTree::build(leaves).expect("batch is non-empty");
        let batch_id = self.next_batch_id;
        self.next_batch_id += 1;
        let root = RootCommitment::sign(
            &self.keys,
            self.contract_ref,
            batch_id,
            first_index,
            entries.len() as u32,
            tree.root(),
        );
        let payloads = entries.into_iter().map(|(_, p)| p).collect();
        self.committed.insert(batch_id, CommittedBatch { first_index, tree, payloads });
        root
    }

    fn on_challenge(&mut self, now: u64, challenge: MembershipChallenge) -> StepOutput {
        let Some(batch) = self.committed.get(&challenge.batch_id) else {
            return self.reject(now, RejectCause::Unexpected);
        };
        let Some(pos) = challenge
            .challenged_index
            .checked_sub(batch.first_index)
            .map(|p| p as usize)
            .filter(|&p| p < batch.payloads.len())
        else {
            return self.reject(now, RejectCause::Unexpected);
        };
        let path = batch.tree.prove(pos).expect("position in range");
        let proof = MembershipProof::sign(&self.keys, challenge, batch.payloads[pos].clone(), path);
        StepOutput::delivered(
            Disposition::Accepted,
            vec![Action::Send { to: Party::Outsourcer, msg: Message::Proof(proof), delay: 0 }],
        )
    }
}
