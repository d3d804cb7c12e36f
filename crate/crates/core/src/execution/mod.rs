//! Outsourcer and worker state machines for one outsourcing session.
//!
//! Actors are driven by [`Event`]s and answer with [`Action`]s; they never
//! touch a clock or a socket, so the same code runs under the simulator and
//! in unit tests.

mod compare;
mod function;
mod outsourcer;
mod qos;
mod schedule;
mod worker;

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::Party;
use crate::crypto::PublicKey;
use crate::settlement::Accusation;
use crate::wire::{Message, WireError};

pub use compare::{compare_pair, CompareError, Comparison, PendingPair};
pub use function::{detect_boxes, forged_output, ComputeFunction, InputSource, ReferenceFunction};
pub use outsourcer::{BatchConfig, Detection, DetectionKind, Outsourcer, OutsourcerPhase, OutsourcerSetup};
pub use qos::{qos_check, PeerQos, QosLedgerLocal, QosStatus, ViolationKind, ViolationRecord, MIN_RATE_SAMPLES};
pub use schedule::{sample_schedule, SamplingSchedule};
pub use worker::{Worker, WorkerPhase, WorkerSetup};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("invalid sampling schedule: {0}")]
    InvalidSchedule(&'static str),
    #[error("invalid actor setup: {0}")]
    InvalidSetup(&'static str),
}

/// How a colluder answers once it has identified its partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FalseOutputRule {
    CheapAnswer,
    Forged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Honest,
    /// Forges the output of each input with this probability.
    CheatRate(f64),
    /// Always returns the function's cheap answer, which is right with
    /// probability `q` on the input distribution.
    QAlgorithm(f64),
    /// Lies by `rule` only while `partner` is a known peer.
    Colluder { partner: PublicKey, rule: FalseOutputRule },
    /// Outsourcer: gives the Verifier a different input than the Contractor.
    SplitInput,
    /// Outsourcer: never sends the closing acknowledgement.
    PaymentRefuser,
    /// Worker: holds every response for this many ticks.
    SlowResponder(u64),
}

impl Strategy {
    pub fn response_delay(&self) -> u64 {
        match *self {
            Strategy::SlowResponder(d) => d,
            _ => 0,
        }
    }

    /// The output a worker with this strategy returns, and whether it
    /// deliberately departed from honest evaluation.
    pub fn worker_output<R: Rng>(
        &self,
        function: &dyn ComputeFunction,
        input: &[u8],
        known_peers: &BTreeSet<PublicKey>,
        rng: &mut R,
    ) -> (Vec<u8>, bool) {
        match *self {
            Strategy::CheatRate(c) if rng.gen_bool(c.clamp(0.0, 1.0)) => (forged_output(input), true),
            Strategy::QAlgorithm(_) => (function.cheap_answer(), true),
            Strategy::Colluder { partner, rule } if known_peers.contains(&partner) => match rule {
                FalseOutputRule::CheapAnswer => (function.cheap_answer(), true),
                FalseOutputRule::Forged => (forged_output(input), true),
            },
            _ => (function.evaluate(input), false),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Tick,
    Deliver { from: Party, bytes: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Action {
    Send { to: Party, msg: Message, delay: u64 },
    Accuse(Box<Accusation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectCause {
    Malformed,
    BadSignature,
    WrongContract,
    Unexpected,
}

/// What the receiver made of one delivered message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Accepted,
    Rejected(RejectCause),
    /// Well-formed and authentic, but arrived after the actor stopped.
    Ignored,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub actions: Vec<Action>,
    pub disposition: Option<Disposition>,
}

impl StepOutput {
    fn delivered(disposition: Disposition, actions: Vec<Action>) -> Self {
        Self { actions, disposition: Some(disposition) }
    }
}

fn decode(bytes: &[u8]) -> Result<Message, WireError> {
    Message::decode(bytes)
}
