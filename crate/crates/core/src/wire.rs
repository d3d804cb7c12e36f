//! Bit-exact message encodings, signature preimages and byte-overhead
//! accounting.
//!
//! Every encoded message starts with a one-byte type tag followed by the
//! 32-byte contract reference. Integers are 4-byte little-endian. A signature
//! always covers the message's own encoding up to (not including) the
//! signature, so the tag byte separates the signing domains of different
//! message types. `PROTOCOL.md` at the repository root documents each layout.

use thiserror::Error;

use crate::crypto::{verify, Digest32, KeyPair, PublicKey, Signature64, DIGEST_LEN, SIGNATURE_LEN};
use crate::merkle::{AuthPath, Side};

pub const TAG_INPUT: u8 = 0x01;
pub const TAG_RESPONSE: u8 = 0x02;
pub const TAG_RESPONSE_LEAF: u8 = 0x03;
pub const TAG_ROOT: u8 = 0x04;
pub const TAG_CHALLENGE: u8 = 0x05;
pub const TAG_PROOF: u8 = 0x06;
pub const TAG_TERMINATION: u8 = 0x07;
pub const TAG_CONTEST_RESPONSE: u8 = 0x08;

/// Marks the Outsourcer's closing input: it carries the final acknowledged
/// count and no work.
pub const FLAG_CLOSING: u32 = 1;
/// Marks the last work input of a stream; a batching worker commits its
/// open batch after answering it.
pub const FLAG_BATCH_END: u32 = 2;

const INT_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("malformed message at byte {offset}: {reason}")]
    MalformedMessage { offset: usize, reason: &'static str },
}

fn malformed(offset: usize, reason: &'static str) -> WireError {
    WireError::MalformedMessage { offset, reason }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn payload_len(payload: &[u8]) -> u32 {
    u32::try_from(payload.len()).expect("payload larger than 4 GiB")
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(malformed(self.buf.len(), "truncated")),
        }
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(INT_LEN)?.try_into().expect("4 bytes")))
    }

    fn digest(&mut self) -> Result<Digest32, WireError> {
        Ok(Digest32(self.take(DIGEST_LEN)?.try_into().expect("32 bytes")))
    }

    fn sig(&mut self) -> Result<Signature64, WireError> {
        Ok(Signature64(self.take(SIGNATURE_LEN)?.try_into().expect("64 bytes")))
    }

    fn payload(&mut self) -> Result<Vec<u8>, WireError> {
        let at = self.pos;
        let len = self.u32()? as usize;
        if len > self.buf.len().saturating_sub(self.pos) {
            return Err(malformed(at, "payload length exceeds buffer"));
        }
        Ok(self.take(len)?.to_vec())
    }

    fn finish(&self) -> Result<(), WireError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(malformed(self.pos, "trailing bytes"))
        }
    }
}

// ---------------------------------------------------------------------------
// Preimages
// ---------------------------------------------------------------------------

pub fn input_sig_preimage(
    contract_ref: &Digest32,
    input_index: u32,
    ack_count: u32,
    interval_id: u32,
    flags: u32,
    payload: &[u8],
) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + DIGEST_LEN + 5 * INT_LEN + payload.len());
    out.push(TAG_INPUT);
    out.extend_from_slice(contract_ref.as_bytes());
    for v in [input_index, ack_count, interval_id, flags, payload_len(payload)] {
        put_u32(&mut out, v);
    }
    out.extend_from_slice(payload);
    out
}

pub fn response_sig_preimage(
    contract_ref: &Digest32,
    input_index: u32,
    input_sig: &Signature64,
    payload: &[u8],
) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + DIGEST_LEN + INT_LEN + SIGNATURE_LEN + INT_LEN + payload.len());
    out.push(TAG_RESPONSE);
    out.extend_from_slice(contract_ref.as_bytes());
    put_u32(&mut out, input_index);
    out.extend_from_slice(input_sig.as_bytes());
    put_u32(&mut out, payload_len(payload));
    out.extend_from_slice(payload);
    out
}

pub fn root_sig_preimage(
    contract_ref: &Digest32,
    batch_id: u32,
    first_index: u32,
    leaf_count: u32,
    root: &Digest32,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + 2 * DIGEST_LEN + 3 * INT_LEN);
    out.push(TAG_ROOT);
    out.extend_from_slice(contract_ref.as_bytes());
    for v in [batch_id, first_index, leaf_count] {
        put_u32(&mut out, v);
    }
    out.extend_from_slice(root.as_bytes());
    out
}

pub fn challenge_sig_preimage(contract_ref: &Digest32, batch_id: u32, challenged_index: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + DIGEST_LEN + 2 * INT_LEN);
    out.push(TAG_CHALLENGE);
    out.extend_from_slice(contract_ref.as_bytes());
    put_u32(&mut out, batch_id);
    put_u32(&mut out, challenged_index);
    out
}

/// Covers the full challenge (including the Outsourcer's signature on it) and
/// the revealed response payload.
pub fn proof_sig_preimage(challenge: &MembershipChallenge, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + DIGEST_LEN + 2 * INT_LEN + SIGNATURE_LEN + INT_LEN + payload.len());
    out.push(TAG_PROOF);
    out.extend_from_slice(challenge.contract_ref.as_bytes());
    put_u32(&mut out, challenge.batch_id);
    put_u32(&mut out, challenge.challenged_index);
    out.extend_from_slice(challenge.sig.as_bytes());
    put_u32(&mut out, payload_len(payload));
    out.extend_from_slice(payload);
    out
}

pub fn termination_sig_preimage(contract_ref: &Digest32, final_ack: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + DIGEST_LEN + INT_LEN);
    out.push(TAG_TERMINATION);
    out.extend_from_slice(contract_ref.as_bytes());
    put_u32(&mut out, final_ack);
    out
}

/// A contestation verifier signs the digest of the disputed raw input
/// together with its own response.
pub fn contest_response_preimage(input_digest: &Digest32, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + DIGEST_LEN + INT_LEN + payload.len());
    out.push(TAG_CONTEST_RESPONSE);
    out.extend_from_slice(input_digest.as_bytes());
    put_u32(&mut out, payload_len(payload));
    out.extend_from_slice(payload);
    out
}

/// Merkle leaf for a batched response: `hash(index_le32 || response)`.
pub fn response_leaf_hash(input_index: u32, payload: &[u8]) -> Digest32 {
    crate::crypto::hash_parts(&[&input_index.to_le_bytes(), payload])
}

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

/// Outsourcer -> worker. The signature chains the input to the contract and
/// doubles as a payment promise for `ack_count` outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedInput {
    pub contract_ref: Digest32,
    pub input_index: u32,
    pub ack_count: u32,
    pub interval_id: u32,
    pub flags: u32,
    pub payload: Vec<u8>,
    pub sig: Signature64,
}

impl SignedInput {
    pub fn sign(
        keys: &KeyPair,
        contract_ref: Digest32,
        input_index: u32,
        ack_count: u32,
        interval_id: u32,
        flags: u32,
        payload: Vec<u8>,
    ) -> Self {
        let sig = keys.sign(&input_sig_preimage(&contract_ref, input_index, ack_count, interval_id, flags, &payload));
        Self { contract_ref, input_index, ack_count, interval_id, flags, payload, sig }
    }

    pub fn preimage(&self) -> Vec<u8> {
        input_sig_preimage(&self.contract_ref, self.input_index, self.ack_count, self.interval_id, self.flags, &self.payload)
    }

    pub fn verify(&self, outsourcer: &PublicKey) -> bool {
        verify(outsourcer, &self.preimage(), &self.sig)
    }

    pub fn is_closing(&self) -> bool {
        self.flags & FLAG_CLOSING != 0
    }
}

/// Worker -> Outsourcer, countersigning the Outsourcer's input signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedResponse {
    pub contract_ref: Digest32,
    pub input_index: u32,
    pub input_sig: Signature64,
    pub payload: Vec<u8>,
    pub sig: Signature64,
}

impl SignedResponse {
    pub fn sign(keys: &KeyPair, input: &SignedInput, payload: Vec<u8>) -> Self {
        let sig = keys.sign(&response_sig_preimage(&input.contract_ref, input.input_index, &input.sig, &payload));
        Self { contract_ref: input.contract_ref, input_index: input.input_index, input_sig: input.sig, payload, sig }
    }

    pub fn preimage(&self) -> Vec<u8> {
        response_sig_preimage(&self.contract_ref, self.input_index, &self.input_sig, &self.payload)
    }

    pub fn verify(&self, worker: &PublicKey) -> bool {
        verify(worker, &self.preimage(), &self.sig)
    }
}

/// Unsigned response sent while Merkle batching is on; bound later by the
/// batch's [`RootCommitment`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseLeaf {
    pub contract_ref: Digest32,
    pub input_index: u32,
    pub payload: Vec<u8>,
}

impl ResponseLeaf {
    pub fn leaf_hash(&self) -> Digest32 {
        response_leaf_hash(self.input_index, &self.payload)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootCommitment {
    pub contract_ref: Digest32,
    pub batch_id: u32,
    pub first_index: u32,
    pub leaf_count: u32,
    pub root: Digest32,
    pub sig: Signature64,
}

impl RootCommitment {
    pub fn sign(keys: &KeyPair, contract_ref: Digest32, batch_id: u32, first_index: u32, leaf_count: u32, root: Digest32) -> Self {
        let sig = keys.sign(&root_sig_preimage(&contract_ref, batch_id, first_index, leaf_count, &root));
        Self { contract_ref, batch_id, first_index, leaf_count, root, sig }
    }

    pub fn verify(&self, worker: &PublicKey) -> bool {
        let pre = root_sig_preimage(&self.contract_ref, self.batch_id, self.first_index, self.leaf_count, &self.root);
        verify(worker, &pre, &self.sig)
    }

    pub fn covers(&self, input_index: u32) -> bool {
        input_index >= self.first_index && input_index - self.first_index < self.leaf_count
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipChallenge {
    pub contract_ref: Digest32,
    pub batch_id: u32,
    pub challenged_index: u32,
    pub sig: Signature64,
}

impl MembershipChallenge {
    pub fn sign(keys: &KeyPair, contract_ref: Digest32, batch_id: u32, challenged_index: u32) -> Self {
        let sig = keys.sign(&challenge_sig_preimage(&contract_ref, batch_id, challenged_index));
        Self { contract_ref, batch_id, challenged_index, sig }
    }

    pub fn verify(&self, outsourcer: &PublicKey) -> bool {
        verify(outsourcer, &challenge_sig_preimage(&self.contract_ref, self.batch_id, self.challenged_index), &self.sig)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipProof {
    pub challenge: MembershipChallenge,
    pub payload: Vec<u8>,
    pub path: AuthPath,
    pub sig: Signature64,
}

impl MembershipProof {
    pub fn sign(keys: &KeyPair, challenge: MembershipChallenge, payload: Vec<u8>, path: AuthPath) -> Self {
        let sig = keys.sign(&proof_sig_preimage(&challenge, &payload));
        Self { challenge, payload, path, sig }
    }

    pub fn verify_signature(&self, worker: &PublicKey) -> bool {
        verify(worker, &proof_sig_preimage(&self.challenge, &self.payload), &self.sig)
    }

    /// Signature valid and the revealed payload is a member of `root`'s batch
    /// at the challenged position.
    pub fn verify_against(&self, root: &RootCommitment, worker: &PublicKey) -> bool {
        let idx = self.challenge.challenged_index;
        root.batch_id == self.challenge.batch_id
            && root.contract_ref == self.challenge.contract_ref
            && root.covers(idx)
            && self.verify_signature(worker)
            && crate::merkle::merkle_verify(
                &root.root,
                &response_leaf_hash(idx, &self.payload),
                (idx - root.first_index) as usize,
                &self.path,
            )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Termination {
    pub contract_ref: Digest32,
    pub final_ack: u32,
    pub sig: Signature64,
}

impl Termination {
    pub fn sign(keys: &KeyPair, contract_ref: Digest32, final_ack: u32) -> Self {
        let sig = keys.sign(&termination_sig_preimage(&contract_ref, final_ack));
        Self { contract_ref, final_ack, sig }
    }

    pub fn verify(&self, sender: &PublicKey) -> bool {
        verify(sender, &termination_sig_preimage(&self.contract_ref, self.final_ack), &self.sig)
    }
}

/// Fresh response from a verifier consulted during contestation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContestResponse {
    pub input_digest: Digest32,
    pub payload: Vec<u8>,
    pub sig: Signature64,
}

impl ContestResponse {
    pub fn sign(keys: &KeyPair, input_digest: Digest32, payload: Vec<u8>) -> Self {
        let sig = keys.sign(&contest_response_preimage(&input_digest, &payload));
        Self { input_digest, payload, sig }
    }

    pub fn verify(&self, verifier: &PublicKey) -> bool {
        verify(verifier, &contest_response_preimage(&self.input_digest, &self.payload), &self.sig)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Input(SignedInput),
    Response(SignedResponse),
    Leaf(ResponseLeaf),
    Root(RootCommitment),
    Challenge(MembershipChallenge),
    Proof(MembershipProof),
    Termination(Termination),
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Message::Input(_) => TAG_INPUT,
            Message::Response(_) => TAG_RESPONSE,
            Message::Leaf(_) => TAG_RESPONSE_LEAF,
            Message::Root(_) => TAG_ROOT,
            Message::Challenge(_) => TAG_CHALLENGE,
            Message::Proof(_) => TAG_PROOF,
            Message::Termination(_) => TAG_TERMINATION,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Input(_) => "input",
            Message::Response(_) => "response",
            Message::Leaf(_) => "response_leaf",
            Message::Root(_) => "root_commitment",
            Message::Challenge(_) => "challenge",
            Message::Proof(_) => "membership_proof",
            Message::Termination(_) => "termination",
        }
    }

    pub fn contract_ref(&self) -> &Digest32 {
        match self {
            Message::Input(m) => &m.contract_ref,
            Message::Response(m) => &m.contract_ref,
            Message::Leaf(m) => &m.contract_ref,
            Message::Root(m) => &m.contract_ref,
            Message::Challenge(m) => &m.contract_ref,
            Message::Proof(m) => &m.challenge.contract_ref,
            Message::Termination(m) => &m.contract_ref,
        }
    }

    pub fn payload(&self) -> &[u8] {
        match self {
            Message::Input(m) => &m.payload,
            Message::Response(m) => &m.payload,
            Message::Leaf(m) => &m.payload,
            Message::Proof(m) => &m.payload,
            Message::Root(_) | Message::Challenge(_) | Message::Termination(_) => &[],
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Message::Input(m) => {
                let mut out = m.preimage();
                out.extend_from_slice(m.sig.as_bytes());
                out
            }
            Message::Response(m) => {
                let mut out = m.preimage();
                out.extend_from_slice(m.sig.as_bytes());
                out
            }
            Message::Leaf(m) => {
                let mut out = vec![TAG_RESPONSE_LEAF];
                out.extend_from_slice(m.contract_ref.as_bytes());
                put_u32(&mut out, m.input_index);
                put_u32(&mut out, payload_len(&m.payload));
                out.extend_from_slice(&m.payload);
                out
            }
            Message::Root(m) => {
                let mut out = root_sig_preimage(&m.contract_ref, m.batch_id, m.first_index, m.leaf_count, &m.root);
                out.extend_from_slice(m.sig.as_bytes());
                out
            }
            Message::Challenge(m) => {
                let mut out = challenge_sig_preimage(&m.contract_ref, m.batch_id, m.challenged_index);
                out.extend_from_slice(m.sig.as_bytes());
                out
            }
            Message::Proof(m) => {
                let c = &m.challenge;
                let mut out = vec![TAG_PROOF];
                out.extend_from_slice(c.contract_ref.as_bytes());
                put_u32(&mut out, c.batch_id);
                put_u32(&mut out, c.challenged_index);
                out.extend_from_slice(c.sig.as_bytes());
                put_u32(&mut out, u32::try_from(m.path.len()).expect("path fits u32"));
                for (digest, side) in &m.path.siblings {
                    out.push(match side {
                        Side::Left => 0,
                        Side::Right => 1,
                    });
                    out.extend_from_slice(digest.as_bytes());
                }
                put_u32(&mut out, payload_len(&m.payload));
                out.extend_from_slice(&m.payload);
                out.extend_from_slice(m.sig.as_bytes());
                out
            }
            Message::Termination(m) => {
                let mut out = termination_sig_preimage(&m.contract_ref, m.final_ack);
                out.extend_from_slice(m.sig.as_bytes());
                out
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let tag = r.u8()?;
        let contract_ref = r.digest()?;
        let msg = match tag {
            TAG_INPUT => {
                let input_index = r.u32()?;
                let ack_count = r.u32()?;
                let interval_id = r.u32()?;
                let flags = r.u32()?;
                let payload = r.payload()?;
                let sig = r.sig()?;
                Message::Input(SignedInput { contract_ref, input_index, ack_count, interval_id, flags, payload, sig })
            }
            TAG_RESPONSE => {
                let input_index = r.u32()?;
                let input_sig = r.sig()?;
                let payload = r.payload()?;
                let sig = r.sig()?;
                Message::Response(SignedResponse { contract_ref, input_index, input_sig, payload, sig })
            }
            TAG_RESPONSE_LEAF => {
                let input_index = r.u32()?;
                let payload = r.payload()?;
                Message::Leaf(ResponseLeaf { contract_ref, input_index, payload })
            }
            TAG_ROOT => {
                let batch_id = r.u32()?;
                let first_index = r.u32()?;
                let leaf_count = r.u32()?;
                let root = r.digest()?;
                let sig = r.sig()?;
                Message::Root(RootCommitment { contract_ref, batch_id, first_index, leaf_count, root, sig })
            }
            TAG_CHALLENGE => {
                let batch_id = r.u32()?;
                let challenged_index = r.u32()?;
                let sig = r.sig()?;
                Message::Challenge(MembershipChallenge { contract_ref, batch_id, challenged_index, sig })
            }
            TAG_PROOF => {
                let batch_id = r.u32()?;
                let challenged_index = r.u32()?;
                let challenge_sig = r.sig()?;
                let at = r.pos;
                let path_len = r.u32()? as usize;
                if path_len > 32 {
                    return Err(malformed(at, "authentication path too long"));
                }
                let mut siblings = Vec::with_capacity(path_len);
                for _ in 0..path_len {
                    let at = r.pos;
                    let side = match r.u8()? {
                        0 => Side::Left,
                        1 => Side::Right,
                        _ => return Err(malformed(at, "invalid side flag")),
                    };
                    siblings.push((r.digest()?, side));
                }
                let payload = r.payload()?;
                let sig = r.sig()?;
                let challenge = MembershipChallenge { contract_ref, batch_id, challenged_index, sig: challenge_sig };
                Message::Proof(MembershipProof { challenge, payload, path: AuthPath { siblings }, sig })
            }
            TAG_TERMINATION => {
                let final_ack = r.u32()?;
                let sig = r.sig()?;
                Message::Termination(Termination { contract_ref, final_ack, sig })
            }
            _ => return Err(malformed(0, "unknown message tag")),
        };
        r.finish()?;
        Ok(msg)
    }

    /// Signature plus 32-bit integer fields, the figure reported as
    /// per-frame bandwidth overhead. Digests, path entries and countersigned
    /// signatures are references and are counted in [`Message::wire_overhead`]
    /// only.
    pub fn overhead_bytes(&self) -> usize {
        let ints = match self {
            Message::Input(_) => 5,
            Message::Response(_) => 2,
            Message::Leaf(_) => 2,
            Message::Root(_) => 3,
            Message::Challenge(_) => 2,
            Message::Proof(_) => 4,
            Message::Termination(_) => 1,
        };
        let own_sig = match self {
            Message::Leaf(_) => 0,
            _ => SIGNATURE_LEN,
        };
        own_sig + ints * INT_LEN
    }

    /// Every non-payload byte of the encoding.
    pub fn wire_overhead(&self) -> usize {
        self.encode().len() - self.payload().len()
    }
}

/// Size of everything in a [`SignedInput`] encoding except its payload.
pub const INPUT_FIXED_LEN: usize = 1 + DIGEST_LEN + 5 * INT_LEN + SIGNATURE_LEN;
/// Size of everything in a [`SignedResponse`] encoding except its payload.
pub const RESPONSE_FIXED_LEN: usize = 1 + DIGEST_LEN + INT_LEN + SIGNATURE_LEN + INT_LEN + SIGNATURE_LEN;

pub fn overhead_bytes(message: &Message) -> usize {
    message.overhead_bytes()
}

pub fn encode(message: &Message) -> Vec<u8> {
    message.encode()
}

pub fn decode(bytes: &[u8]) -> Result<Message, WireError> {
    Message::decode(bytes)
}
