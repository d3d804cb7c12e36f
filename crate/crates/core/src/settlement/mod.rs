//! The trusted settlement entity: escrow, payment redemption, accusations,
//! contestation and reputation.

mod case;
mod evidence;
mod ledger;

use thiserror::Error;

use crate::contract::{Amount, ContractError};

pub use case::{Case, CasePhase, ContestSubmission, ConvictionReason, Opening, Outcome, Tally, VERIFIERS_PER_ROUND};
pub use evidence::{Accusation, CommittedResponse, ResponseEvidence};
pub use ledger::{Ledger, LedgerConfig, RedemptionState, Review, TransferKind, TransferRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SettlementError {
    #[error(transparent)]
    InvalidContract(#[from] ContractError),
    #[error("contract is not registered")]
    UnknownContract,
    #[error("contract is already registered")]
    DuplicateContract,
    #[error("insufficient funds: need {needed}, have {available}")]
    InsufficientFunds { needed: Amount, available: Amount },
    #[error("signature check failed: {0}")]
    BadSignature(&'static str),
    #[error("payment for this contract was already claimed")]
    DuplicateRedemption,
    #[error("verifier is already registered")]
    DuplicateVerifier,
    #[error("identity attestation missing")]
    MissingAttestation,
    #[error("key is not a party to this contract or case")]
    NotAParty,
    #[error("review score {0} outside -1..=1")]
    ScoreOutOfRange(i8),
    #[error("this party already reviewed this contract")]
    DuplicateReview,
    #[error("invalid accusation: {0}")]
    InvalidAccusation(&'static str),
    #[error("both workers returned the same result")]
    ResponsesAgree,
    #[error("a case for this contract already exists")]
    DuplicateCase,
    #[error("deadline has passed")]
    TooLate,
    #[error("no such case")]
    UnknownCase,
    #[error("case is closed")]
    CaseClosed,
    #[error("only the currently accused party may do this")]
    NotAccused,
    #[error("a contestation round is already open")]
    RoundOpen,
    #[error("no contestation round is open")]
    NoRoundOpen,
    #[error("submitted record differs from the one on file")]
    RecordMismatch,
    #[error("results do not come from exactly the assigned verifiers")]
    InvalidAssignment,
}
