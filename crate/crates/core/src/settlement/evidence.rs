//! What the Outsourcer submits when two workers disagree.

use crate::contract::Contract;
use crate::crypto::PublicKey;
use crate::randomization::SelectionProof;
use crate::wire::{MembershipProof, RootCommitment, SignedInput, SignedResponse};

/// A batched response: the signed root plus a signed membership proof that
/// reveals the payload at the challenged position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommittedResponse {
    pub root: RootCommitment,
    pub proof: MembershipProof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseEvidence {
    Signed(SignedResponse),
    Committed(Box<CommittedResponse>),
}

impl ResponseEvidence {
    pub fn payload(&self) -> &[u8] {
        match self {
            ResponseEvidence::Signed(r) => &r.payload,
            ResponseEvidence::Committed(c) => &c.proof.payload,
        }
    }

    pub fn input_index(&self) -> u32 {
        match self {
            ResponseEvidence::Signed(r) => r.input_index,
            ResponseEvidence::Committed(c) => c.proof.challenge.challenged_index,
        }
    }

    /// The worker really sent this payload in answer to `input`.
    pub fn binds(&self, input: &SignedInput, outsourcer: &PublicKey, worker: &PublicKey) -> bool {
        match self {
            ResponseEvidence::Signed(r) => {
                r.contract_ref == input.contract_ref
                    && r.input_index == input.input_index
                    && r.input_sig == input.sig
                    && r.verify(worker)
            }
            ResponseEvidence::Committed(c) => {
                c.root.contract_ref == input.contract_ref
                    && c.proof.challenge.challenged_index == input.input_index
                    && c.root.verify(worker)
                    && c.proof.challenge.verify(outsourcer)
                    && c.proof.verify_against(&c.root, worker)
            }
        }
    }
}

/// Claim that the Contractor and the Verifier answered the same sampled
/// input differently. Each worker saw its own copy of the input, signed
/// under its own contract.
#[derive(Debug, Clone, PartialEq)]
pub struct Accusation {
    pub contractor_contract: Contract,
    pub verifier_contract: Contract,
    pub contractor_input: SignedInput,
    pub verifier_input: SignedInput,
    pub contractor_evidence: ResponseEvidence,
    pub verifier_response: SignedResponse,
    pub selection: SelectionProof,
}
