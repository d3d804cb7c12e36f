use thiserror::Error;

use crate::settlement::ResponseEvidence;
use crate::wire::{SignedInput, SignedResponse};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("pair for input {0} is missing a response")]
    Incomplete(u32),
    #[error("responses answer different inputs ({contractor} vs {verifier})")]
    IndexMismatch { contractor: u32, verifier: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Equal,
    Mismatch,
}

/// A sampled input and what each worker answered so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingPair {
    pub input_index: u32,
    pub contractor_input: SignedInput,
    pub verifier_input: SignedInput,
    pub contractor: Option<ResponseEvidence>,
    pub verifier: Option<SignedResponse>,
}

impl PendingPair {
    pub fn new(contractor_input: SignedInput, verifier_input: SignedInput) -> Self {
        Self {
            input_index: contractor_input.input_index,
            contractor_input,
            verifier_input,
            contractor: None,
            verifier: None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.contractor.is_some() && self.verifier.is_some()
    }
}

pub fn compare_pair(pair: &PendingPair) -> Result<Comparison, CompareError> {
    let (Some(c), Some(v)) = (&pair.contractor, &pair.verifier) else {
        return Err(CompareError::Incomplete(pair.input_index));
    };
    if c.input_index() != v.input_index {
        return Err(CompareError::IndexMismatch { contractor: c.input_index(), verifier: v.input_index });
    }
    Ok(if c.payload() == v.payload.as_slice() { Comparison::Equal } else { Comparison::Mismatch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{hash, KeyPair};

    fn pair(c_out: &[u8], v_out: &[u8]) -> PendingPair {
        let o = KeyPair::from_seed(&[1; 32]);
        let ci = SignedInput::sign(&o, hash(b"cc"), 4, 0, 0, 0, b"in".to_vec());
        let vi = SignedInput::sign(&o, hash(b"cv"), 4, 0, 0, 0, b"in".to_vec());
        let mut p = PendingPair::new(ci.clone(), vi.clone());
        assert_eq!(compare_pair(&p), Err(CompareError::Incomplete(4)));
        p.contractor = Some(ResponseEvidence::Signed(SignedResponse::sign(&KeyPair::from_seed(&[2; 32]), &ci, c_out.to_vec())));
        p.verifier = Some(SignedResponse::sign(&KeyPair::from_seed(&[3; 32]), &vi, v_out.to_vec()));
        p
    }

    #[test]
    fn equal_and_mismatch() {
        assert_eq!(compare_pair(&pair(b"a", b"a")), Ok(Comparison::Equal));
        assert_eq!(compare_pair(&pair(b"a", b"b")), Ok(Comparison::Mismatch));
    }
}
