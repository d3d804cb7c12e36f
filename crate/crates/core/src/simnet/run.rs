//! Runs one scenario: setup, commit-reveal selection, the event loop, then
//! settlement, disputes and reviews.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::network::flip_byte;
use super::scenario::{Scenario, ScenarioError, StrategySpec, ThreatId};
use crate::contract::{Amount, Contract, ContractId, Party, Role};
use crate::crypto::{hash_parts, Digest32, KeyPair, PublicKey, DIGEST_LEN};
use crate::execution::{
    sample_schedule, Action, BatchConfig, ComputeFunction, Detection, Disposition, Event, InputSource, Outsourcer,
    OutsourcerSetup, StepOutput, Strategy, ViolationRecord, Worker, WorkerSetup,
};
use crate::randomization::{
    contractor_commit, outsourcer_commit, verify_selection, SelectionContext, SelectionOutcome, SelectionProof,
    DEFAULT_SIMILARITY_THRESHOLD,
};
use crate::settlement::{
    CasePhase, ContestSubmission, ConvictionReason, Ledger, LedgerConfig, Opening, ResponseEvidence, SettlementError,
    TransferKind,
};
use crate::wire::{overhead_bytes, ContestResponse, Message, SignedResponse};

/// How often a deviating worker reopens a dispute it keeps losing.
const DEVIATOR_ROUNDS: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    SamplingReexecution,
    Contestation,
    SignatureChain,
    DigitalSignatures,
    Randomization,
    PaymentOnBehalf,
    QosEnforcement,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageStats {
    pub sent: u32,
    pub dropped: u32,
    pub delivered: u32,
    pub rejected: u32,
    pub tampered: u32,
    pub tampered_rejected: u32,
    pub bytes: u64,
    pub payload_bytes: u64,
    pub by_kind: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverheadStats {
    pub count: u32,
    pub min: usize,
    pub max: usize,
    pub total: u64,
    /// Inputs whose encoding disagrees with the counted overhead.
    pub mismatches: u32,
}

impl OverheadStats {
    fn add(&mut self, bytes: usize, consistent: bool) {
        self.mismatches += u32::from(!consistent);
        if self.count == 0 {
            self.min = bytes;
            self.max = bytes;
        }
        self.count += 1;
        self.min = self.min.min(bytes);
        self.max = self.max.max(bytes);
        self.total += bytes as u64;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyLedger {
    pub delta: i128,
    pub rewards: Amount,
    pub entitled: Amount,
    pub penalties: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub conserved: bool,
    pub funded: u128,
    pub total: u128,
    pub parties: BTreeMap<Party, PartyLedger>,
    pub contest_rewards: Amount,
    pub pool_penalties: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub threat: ThreatId,
    pub seed: u64,
    /// The scripted violation was detected or prevented.
    pub violation_detected: bool,
    pub mechanism: Option<Mechanism>,
    pub detection: Option<Detection>,
    pub detection_latency: Option<u64>,
    pub accusation_filed: bool,
    pub accusation_error: Option<String>,
    pub convicted: Option<Party>,
    pub conviction_reason: Option<ConvictionReason>,
    pub contest_rounds: u32,
    pub repudiation_rejected: bool,
    pub qos_violations: Vec<ViolationRecord>,
    /// `(observer, blacklisted peer)`.
    pub blacklisted: Vec<(Party, Party)>,
    pub negative_reviews: Vec<Party>,
    pub messages: MessageStats,
    pub input_overhead: OverheadStats,
    pub contractor_inputs: u32,
    pub verifier_inputs: u32,
    pub false_responses: u32,
    pub collusion_channel: bool,
    pub ledger: LedgerSummary,
    pub honest_party_fined: bool,
    pub honest_party_convicted: bool,
    pub outsourcer_phase: String,
    pub truncated: bool,
    pub ended_at: u64,
    pub trace_digest: String,
}

struct Pending {
    to: Party,
    event: Event,
    tampered: bool,
}

fn derive_keys(seed: u64, label: &[u8], index: u32) -> KeyPair {
    KeyPair::from_seed(&hash_parts(&[b"key", &seed.to_le_bytes(), label, &index.to_le_bytes()]).0)
}

fn derive_bytes(seed: u64, label: &[u8]) -> [u8; 32] {
    hash_parts(&[b"rand", &seed.to_le_bytes(), label]).0
}

fn resolve(spec: StrategySpec, keys: &BTreeMap<Party, PublicKey>) -> Strategy {
    match spec {
        StrategySpec::Honest => Strategy::Honest,
        StrategySpec::CheatRate { rate } => Strategy::CheatRate(rate),
        StrategySpec::QAlgorithm { q } => Strategy::QAlgorithm(q),
        StrategySpec::Colluder { partner, rule } => Strategy::Colluder { partner: keys[&partner], rule },
        StrategySpec::SplitInput => Strategy::SplitInput,
        StrategySpec::PaymentRefuser => Strategy::PaymentRefuser,
        StrategySpec::SlowResponder { delay } => Strategy::SlowResponder(delay),
    }
}

struct Sim {
    sc: Scenario,
    function: Arc<dyn ComputeFunction>,
    rng: ChaCha8Rng,
    queue: BTreeMap<(u64, u64), Pending>,
    seq: u64,
    now: u64,
    link_clock: BTreeMap<(Party, Party), u64>,
    outsourcer: Outsourcer,
    contractor: Worker,
    verifier: Worker,
    keys: BTreeMap<Party, PublicKey>,
    pool: BTreeMap<PublicKey, KeyPair>,
    ledger: Ledger,
    contracts: BTreeMap<Party, Contract>,
    stats: MessageStats,
    overhead: OverheadStats,
    first_tamper_at: Option<u64>,
    trace: Sha256,
    collusion_channel: bool,
    funded: BTreeMap<Party, Amount>,
}

pub fn run_scenario(sc: &Scenario) -> Result<ScenarioReport, ScenarioError> {
    sc.validate()?;
    let mut sim = Sim::setup(sc.clone())?;
    let truncated = sim.run_events();
    let outcome = sim.settle();
    Ok(sim.report(truncated, outcome))
}

/// A session run up to a filed accusation, for exploring disputes.
pub struct DisputeFixture {
    pub ledger: Ledger,
    pub case: Digest32,
    pub now: u64,
    /// Every registered verifier, the session Verifier included.
    pub verifiers: BTreeMap<PublicKey, KeyPair>,
    /// The workers, for re-signing records.
    pub workers: BTreeMap<Party, KeyPair>,
    pub function: Arc<dyn ComputeFunction>,
}

/// Runs `sc` until the Outsourcer's accusation has been filed. Fails if the
/// session ends without one.
pub fn dispute_fixture(sc: &Scenario) -> Result<DisputeFixture, ScenarioError> {
    sc.validate()?;
    let mut sim = Sim::setup(sc.clone())?;
    if sim.run_events() {
        return Err(ScenarioError::Invalid("session did not finish within max_ticks".into()));
    }
    let mut out = DisputeOutcome::default();
    let (now, case) = sim.file_claims(&mut out);
    let case = case.ok_or_else(|| {
        ScenarioError::Invalid(out.accusation_error.unwrap_or_else(|| "session produced no accusation".into()))
    })?;
    Ok(DisputeFixture {
        workers: [(Party::Contractor, sim.contractor.keys().clone()), (Party::Verifier, sim.verifier.keys().clone())]
            .into(),
        ledger: sim.ledger,
        case,
        now,
        verifiers: sim.pool,
        function: sim.function,
    })
}

#[derive(Default)]
struct DisputeOutcome {
    accusation_filed: bool,
    accusation_error: Option<String>,
    repudiation_rejected: bool,
}

impl Sim {
    fn setup(sc: Scenario) -> Result<Self, ScenarioError> {
        let seed = sc.seed;
        let o_keys = derive_keys(seed, b"outsourcer", 0);
        let c_keys = derive_keys(seed, b"contractor", 0);
        let pool: BTreeMap<PublicKey, KeyPair> = (0..sc.verifiers as u32)
            .map(|i| derive_keys(seed, b"verifier", i))
            .map(|k| (k.public, k))
            .collect();
        let verifier_list: Vec<PublicKey> = pool.keys().copied().collect();

        let mut ledger = Ledger::new(LedgerConfig { seed: u64::from_le_bytes(derive_bytes(seed, b"ttp")[..8].try_into().expect("8 bytes")), ..sc.ledger });
        for v in &verifier_list {
            ledger.register_verifier(*v, true).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        }

        let terms = sc.terms;
        let function_id = sc.function.function_id();
        let contract = |role: Role, worker: PublicKey| Contract {
            contract_id: ContractId(hash_parts(&[b"contract", &seed.to_le_bytes(), &[role.to_byte()]]).0),
            outsourcer_pk: o_keys.public,
            worker_pk: worker,
            role,
            reward_per_input: terms.reward,
            fee: terms.fee,
            bounty: terms.bounty,
            deposit: terms.deposit,
            function_id,
            qos: sc.qos,
        };
        let c_contract = contract(Role::Contractor, c_keys.public);
        c_contract.validate()?;
        let ch_c = c_contract.hash();

        // Commit-reveal choice of the Verifier.
        let ctx = SelectionContext { contract_ref: ch_c, outsourcer_pk: o_keys.public, contractor_pk: c_keys.public };
        let x = derive_bytes(seed, b"x");
        let y = derive_bytes(seed, b"y");
        let oc = outsourcer_commit(&x, &ch_c, &o_keys);
        let cc = contractor_commit(&ctx, &oc, y, verifier_list.clone(), &c_keys)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let selected = match verify_selection(&ctx, &oc, &cc, &x, &verifier_list, DEFAULT_SIMILARITY_THRESHOLD) {
            SelectionOutcome::Accept(i) => verifier_list[i],
            SelectionOutcome::Reject(r) => return Err(ScenarioError::Invalid(r.to_string())),
        };
        let selection = SelectionProof { commit: oc, contractor: cc, revealed_x: x };
        let contacted = match sc.outsourcer {
            // Ignores the draw and hires a fixed accomplice.
            StrategySpec::Colluder { partner: Party::Verifier, .. } => verifier_list[0],
            _ => selected,
        };
        let v_keys = pool[&contacted].clone();
        let v_contract = contract(Role::Verifier, contacted);

        let schedule = sample_schedule(seed ^ 0x5a5a, sc.inputs, sc.interval_size)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let sampled = Amount::from(schedule.interval_count());
        let o_dep_c = terms.reward * Amount::from(sc.inputs) + terms.fee;
        let o_dep_v = terms.reward * sampled + terms.fee;
        let funded: BTreeMap<Party, Amount> = [
            (Party::Outsourcer, o_dep_c + o_dep_v + terms.reward * (Amount::from(sc.inputs) + sampled)),
            (Party::Contractor, terms.deposit),
            (Party::Verifier, terms.deposit),
        ]
        .into();
        ledger.fund(o_keys.public, funded[&Party::Outsourcer]);
        ledger.fund(c_keys.public, terms.deposit);
        ledger.fund(contacted, terms.deposit);
        ledger.open_contract(c_contract.clone(), o_dep_c, 0).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        ledger.open_contract(v_contract.clone(), o_dep_v, 0).map_err(|e| ScenarioError::Invalid(e.to_string()))?;

        let keys: BTreeMap<Party, PublicKey> = [
            (Party::Outsourcer, o_keys.public),
            (Party::Contractor, c_keys.public),
            (Party::Verifier, contacted),
        ]
        .into();
        let c_strategy = resolve(sc.contractor, &keys);
        let v_strategy = resolve(sc.verifier, &keys);
        let (mut c_known, mut v_known) = (BTreeSet::new(), BTreeSet::new());
        if sc.reveal_partner {
            c_known.insert(contacted);
            v_known.insert(c_keys.public);
        }
        let identifies = |s: &Strategy, known: &BTreeSet<PublicKey>, own_contract: &Contract| match s {
            Strategy::Colluder { partner, .. } => known.contains(partner) || *partner == own_contract.outsourcer_pk,
            _ => false,
        };
        let collusion_channel = identifies(&c_strategy, &c_known, &c_contract) && identifies(&v_strategy, &v_known, &v_contract)
            && matches!((&c_strategy, &v_strategy), (Strategy::Colluder { partner: a, .. }, Strategy::Colluder { partner: b, .. }) if *a == contacted && *b == c_keys.public);

        let function: Arc<dyn ComputeFunction> = Arc::new(sc.function);
        let batching = sc.batch_size.map(|batch_size| BatchConfig { batch_size, challenge_seed: seed ^ 0xc4a1 });
        let mut inputs = InputSource::new(sc.function, seed ^ 0x1e55, sc.object_rate);
        inputs.payload_len = 64;
        let outsourcer = Outsourcer::new(OutsourcerSetup {
            keys: o_keys,
            contractor_contract: c_contract.clone(),
            verifier_contract: v_contract.clone(),
            selection,
            schedule,
            inputs,
            strategy: resolve(sc.outsourcer, &keys),
            batching,
        });
        let contractor = Worker::new(WorkerSetup {
            keys: c_keys,
            contract: c_contract.clone(),
            party: Party::Contractor,
            strategy: c_strategy,
            function: function.clone(),
            seed: seed ^ 0xc0,
            batch_size: sc.batch_size,
            known_peers: c_known,
        });
        let verifier = Worker::new(WorkerSetup {
            keys: v_keys,
            contract: v_contract.clone(),
            party: Party::Verifier,
            strategy: v_strategy,
            function: function.clone(),
            seed: seed ^ 0x7e,
            batch_size: None,
            known_peers: v_known,
        });
        let mut sim = Sim {
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x0e7),
            function,
            queue: BTreeMap::new(),
            seq: 0,
            now: 0,
            link_clock: BTreeMap::new(),
            outsourcer,
            contractor,
            verifier,
            keys,
            pool,
            ledger,
            contracts: [(Party::Contractor, c_contract), (Party::Verifier, v_contract)].into(),
            stats: MessageStats::default(),
            overhead: OverheadStats::default(),
            first_tamper_at: None,
            trace: Sha256::new(),
            collusion_channel,
            funded,
            sc,
        };
        sim.push(0, Party::Outsourcer, Event::Tick, false);
        Ok(sim)
    }

    fn push(&mut self, at: u64, to: Party, event: Event, tampered: bool) {
        self.queue.insert((at, self.seq), Pending { to, event, tampered });
        self.seq += 1;
    }

    fn send(&mut self, from: Party, to: Party, msg: Message, delay: u64) {
        let mut bytes = msg.encode();
        if let Message::Input(_) = msg {
            // Cross-check against the encoding: everything but the payload,
            // the tag and the contract reference.
            let counted = overhead_bytes(&msg);
            let measured = bytes.len() - msg.payload().len() - 1 - DIGEST_LEN;
            self.overhead.add(counted, counted == measured);
        }
        self.stats.sent += 1;
        *self.stats.by_kind.entry(msg.kind().to_string()).or_default() += 1;
        self.stats.bytes += bytes.len() as u64;
        self.stats.payload_bytes += msg.payload().len() as u64;
        let net = &self.sc.network;
        let p_drop = net.drop_probability(from, to);
        if p_drop > 0.0 && self.rng.gen_bool(p_drop) {
            self.stats.dropped += 1;
            return;
        }
        let p_tamper = net.tamper_probability(from, to);
        let tampered = p_tamper > 0.0 && self.rng.gen_bool(p_tamper) && flip_byte(&mut bytes, &mut self.rng).is_some();
        if tampered {
            self.stats.tampered += 1;
            self.first_tamper_at.get_or_insert(self.now);
        }
        let latency = net.latency_for(from, to).sample(&mut self.rng);
        let clock = self.link_clock.entry((from, to)).or_default();
        let at = (self.now + delay + latency).max(*clock);
        *clock = at;
        self.push(at, to, Event::Deliver { from, bytes }, tampered);
    }

    /// Returns true if the run hit `max_ticks`.
    fn run_events(&mut self) -> bool {
        while let Some(((at, seq), pending)) = self.queue.pop_first() {
            if at > self.sc.max_ticks {
                return true;
            }
            self.now = at;
            let Pending { to, event, tampered } = pending;
            let is_tick = event == Event::Tick;
            self.trace.update(at.to_le_bytes());
            self.trace.update(seq.to_le_bytes());
            self.trace.update([to as u8]);
            if let Event::Deliver { from, bytes } = &event {
                self.trace.update([*from as u8]);
                self.trace.update(bytes);
                self.stats.delivered += 1;
            }
            let out: StepOutput = match to {
                Party::Outsourcer => self.outsourcer.step(at, event),
                Party::Contractor => self.contractor.step(at, event),
                Party::Verifier => self.verifier.step(at, event),
            };
            if let Some(d) = out.disposition {
                self.trace.update([match d {
                    Disposition::Accepted => 0,
                    Disposition::Rejected(_) => 1,
                    Disposition::Ignored => 2,
                }]);
                if let Disposition::Rejected(_) = d {
                    self.stats.rejected += 1;
                    if tampered {
                        self.stats.tampered_rejected += 1;
                    }
                }
            }
            for action in out.actions {
                if let Action::Send { to: dest, msg, delay } = action {
                    self.send(to, dest, msg, delay);
                }
            }
            if is_tick && to == Party::Outsourcer && self.outsourcer.is_running() {
                self.push(at + self.sc.input_period, Party::Outsourcer, Event::Tick, false);
            }
        }
        false
    }

    fn worker(&self, party: Party) -> &Worker {
        match party {
            Party::Verifier => &self.verifier,
            _ => &self.contractor,
        }
    }

    fn spec(&self, party: Party) -> StrategySpec {
        match party {
            Party::Outsourcer => self.sc.outsourcer,
            Party::Contractor => self.sc.contractor,
            Party::Verifier => self.sc.verifier,
        }
    }

    /// Payment-refusal, redemptions and the accusation, if any.
    fn file_claims(&mut self, out: &mut DisputeOutcome) -> (u64, Option<Digest32>) {
        let o = self.keys[&Party::Outsourcer];
        let mut t = self.now + 1;
        if self.sc.outsourcer == StrategySpec::PaymentRefuser {
            let stash = derive_keys(self.sc.seed, b"stash", 0).public;
            let all = self.ledger.balance(&o);
            self.ledger.transfer(o, stash, all, t).expect("moving own balance");
        }
        for party in [Party::Contractor, Party::Verifier] {
            let w = self.worker(party);
            if let Some(input) = w.last_input().cloned() {
                let pk = w.public_key();
                self.ledger.redeem(&pk, &input, t).expect("worker redeems its newest authentic input");
            }
        }
        let Some(acc) = self.outsourcer.accusation().cloned() else {
            return (t, None);
        };
        t += 1;
        match self.ledger.accuse(&acc, t) {
            Ok(id) => {
                out.accusation_filed = true;
                (t, Some(id))
            }
            Err(e) => {
                out.accusation_error = Some(e.to_string());
                (t, None)
            }
        }
    }

    fn settle(&mut self) -> DisputeOutcome {
        let mut out = DisputeOutcome::default();
        let (mut t, case) = self.file_claims(&mut out);
        if let Some(id) = case {
            t = self.dispute(id, t, &mut out);
        }
        let end = t + self.ledger.config().deadline + 1;
        self.ledger.finalize(end);
        self.now = end;
        self.review();
        out
    }

    /// Correct output for the input a worker saw.
    fn honest_record(&self, id: &Digest32, party: Party) -> bool {
        let case = self.ledger.case(id).expect("case exists");
        match party {
            Party::Contractor => case.contractor_evidence.payload() == self.function.evaluate(&case.contractor_input.payload),
            _ => case.verifier_response.payload == self.function.evaluate(&case.verifier_input.payload),
        }
    }

    fn dispute(&mut self, id: Digest32, mut t: u64, out: &mut DisputeOutcome) -> u64 {
        let mut deviator_rounds = 0;
        loop {
            let case = self.ledger.case(&id).expect("case exists");
            let accused = match case.phase {
                CasePhase::Accused(p) => p,
                _ => break,
            };
            let honest = self.honest_record(&id, accused);
            if !honest {
                if !self.sc.deviator_contests || deviator_rounds >= DEVIATOR_ROUNDS {
                    break;
                }
                deviator_rounds += 1;
            }
            t += 1;
            let requester = case.key_of(accused);
            let assigned = match self.ledger.open_contestation(&id, &requester, t) {
                Ok(Opening::Assigned(vs)) => vs,
                Ok(Opening::Resolved(_)) | Err(_) => break,
            };
            t += 1;
            let sub = self.submission(&id, accused, &assigned);
            if self.sc.repudiate && !honest && !out.repudiation_rejected {
                let mut forged = sub.clone();
                let correct = self.function.evaluate(&forged.input.payload);
                let keys = self.worker(accused).keys().clone();
                forged.response = ResponseEvidence::Signed(SignedResponse::sign(&keys, &forged.input, correct));
                if let Err(SettlementError::RecordMismatch) = self.ledger.submit_contest(&id, &forged, t) {
                    out.repudiation_rejected = true;
                }
            }
            if self.ledger.submit_contest(&id, &sub, t).is_err() {
                break;
            }
        }
        t
    }

    fn submission(&self, id: &Digest32, accused: Party, assigned: &[PublicKey]) -> ContestSubmission {
        let case = self.ledger.case(id).expect("case exists");
        let raw = &case.contractor_input.payload;
        let truth = self.function.evaluate(raw);
        // Colluding pool members back whichever worker lied.
        let lie = [case.contractor_evidence.payload().to_vec(), case.verifier_response.payload.clone()]
            .into_iter()
            .find(|p| *p != truth);
        let parties = [case.outsourcer, case.contractor, case.verifier];
        let colluders: BTreeSet<PublicKey> =
            self.pool.keys().filter(|k| !parties.contains(k)).take(self.sc.colluding_verifiers).copied().collect();
        let results = assigned
            .iter()
            .map(|v| {
                let payload = match &lie {
                    Some(l) if colluders.contains(v) => l.clone(),
                    _ => truth.clone(),
                };
                (*v, ContestResponse::sign(&self.pool[v], case.input_digest, payload))
            })
            .collect();
        let (input, response) = match accused {
            Party::Contractor => (case.contractor_input.clone(), case.contractor_evidence.clone()),
            _ => (case.verifier_input.clone(), ResponseEvidence::Signed(case.verifier_response.clone())),
        };
        ContestSubmission { submitter: case.key_of(accused), input, response, results }
    }

    fn convicted(&self) -> Option<(Party, ConvictionReason)> {
        self.ledger.cases().find_map(|c| c.outcome()).map(|o| (o.convicted, o.reason))
    }

    fn review(&mut self) {
        let o = self.keys[&Party::Outsourcer];
        let convicted = self.convicted().map(|(p, _)| p);
        for party in [Party::Contractor, Party::Verifier] {
            let w = self.worker(party);
            let (pk, ch) = (w.public_key(), self.contracts[&party].hash());
            let o_score = if self.outsourcer.qos().is_blacklisted(party) || convicted == Some(party) { -1 } else { 1 };
            let w_score =
                if w.qos().is_blacklisted(Party::Outsourcer) || convicted == Some(Party::Outsourcer) { -1 } else { 1 };
            self.ledger.submit_review(o, pk, o_score, &ch).expect("first review by a party");
            self.ledger.submit_review(pk, o, w_score, &ch).expect("first review by a party");
        }
    }

    fn report(mut self, truncated: bool, d: DisputeOutcome) -> ScenarioReport {
        let conviction = self.convicted();
        let case = self.ledger.cases().next();
        let contest_rounds = case.map_or(0, |c| c.rounds);
        let mut parties = BTreeMap::new();
        for party in [Party::Outsourcer, Party::Contractor, Party::Verifier] {
            let pk = self.keys[&party];
            let entitled = match party {
                Party::Outsourcer => 0,
                _ if conviction.map(|c| c.0) == Some(party) => 0,
                _ => self.worker(party).last_input().map_or(0, |i| {
                    self.contracts[&party].reward_per_input * Amount::from(i.ack_count)
                }),
            };
            parties.insert(
                party,
                PartyLedger {
                    delta: i128::from(self.ledger.balance(&pk)) - i128::from(self.funded[&party]),
                    rewards: self.ledger.received(&pk, TransferKind::Reward),
                    entitled,
                    penalties: self.ledger.penalties_paid(&pk),
                },
            );
        }
        let pool_keys: Vec<PublicKey> = self.pool.keys().filter(|k| **k != self.keys[&Party::Verifier]).copied().collect();
        let ledger = LedgerSummary {
            conserved: self.ledger.is_conserved(),
            funded: self.ledger.total_funded(),
            total: self.ledger.total_currency(),
            contest_rewards: pool_keys.iter().map(|k| self.ledger.received(k, TransferKind::ContestReward)).sum(),
            pool_penalties: pool_keys.iter().map(|k| self.ledger.penalties_paid(k)).sum(),
            parties,
        };
        let honest = |p: Party| self.spec(p).is_honest();
        let honest_party_fined = [Party::Outsourcer, Party::Contractor, Party::Verifier]
            .into_iter()
            .any(|p| honest(p) && ledger.parties[&p].penalties > 0)
            || ledger.pool_penalties > 0;
        let honest_party_convicted = conviction.is_some_and(|(p, _)| honest(p));

        let mut qos_violations: Vec<ViolationRecord> = self.outsourcer.qos().violations().to_vec();
        let mut blacklisted: Vec<(Party, Party)> =
            self.outsourcer.qos().blacklisted().map(|(p, _)| (Party::Outsourcer, p)).collect();
        for party in [Party::Contractor, Party::Verifier] {
            let w = self.worker(party);
            qos_violations.extend(w.qos().violations().iter().copied());
            blacklisted.extend(w.qos().blacklisted().map(|(p, _)| (party, p)));
        }
        let negative_reviews = [Party::Outsourcer, Party::Contractor, Party::Verifier]
            .into_iter()
            .filter(|p| self.ledger.reviews(&self.keys[p]).iter().any(|r| r.score < 0))
            .collect();
        let detection = self.outsourcer.detection();
        let first_fault = [
            self.contractor.stats().first_false_at,
            self.verifier.stats().first_false_at,
            self.first_tamper_at,
        ]
        .into_iter()
        .flatten()
        .min();
        let detection_latency = detection.zip(first_fault).map(|(d, f)| d.at.saturating_sub(f));
        let stats = self.outsourcer.stats().clone();
        let trace_digest = {
            let digest: [u8; 32] = std::mem::take(&mut self.trace).finalize().into();
            Digest32(digest).to_string()
        };
        let mut report = ScenarioReport {
            scenario: self.sc.name.clone(),
            threat: self.sc.threat,
            seed: self.sc.seed,
            violation_detected: false,
            mechanism: None,
            detection,
            detection_latency,
            accusation_filed: d.accusation_filed,
            accusation_error: d.accusation_error,
            convicted: conviction.map(|c| c.0),
            conviction_reason: conviction.map(|c| c.1),
            contest_rounds,
            repudiation_rejected: d.repudiation_rejected,
            qos_violations,
            blacklisted,
            negative_reviews,
            messages: self.stats.clone(),
            input_overhead: self.overhead,
            contractor_inputs: stats.inputs_to_contractor,
            verifier_inputs: stats.inputs_to_verifier,
            false_responses: self.contractor.stats().false_responses + self.verifier.stats().false_responses,
            collusion_channel: self.collusion_channel,
            ledger,
            honest_party_fined,
            honest_party_convicted,
            outsourcer_phase: format!("{:?}", self.outsourcer.phase()).to_lowercase(),
            truncated,
            ended_at: self.now,
            trace_digest,
        };
        let (detected, mechanism) = super::threats::assess(&report);
        report.violation_detected = detected;
        report.mechanism = mechanism;
        report
    }
}
