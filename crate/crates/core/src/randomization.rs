//! Commit-reveal selection of the Verifier for a contract.
//!
//! The Outsourcer commits to `h(x)`; the Contractor answers with its own
//! random `y` and the list of available Verifiers, signing over `h(x)`. Only
//! then is `x` used, and the Verifier at `(x + y) mod n` is contacted. Neither
//! side controls the outcome and the Contractor never learns which Verifier
//! was chosen.

use thiserror::Error;

use crate::crypto::{hash, verify, Digest32, KeyPair, PublicKey, Signature64};

pub const TAG_OUTSOURCER_COMMIT: u8 = 0x20;
pub const TAG_CONTRACTOR_COMMIT: u8 = 0x21;

/// Default minimum Jaccard similarity between the Contractor's Verifier list
/// and the Outsourcer's local view.
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectionError {
    #[error("verifier list is empty")]
    EmptyList,
    #[error("verifier list is not strictly ascending")]
    UnsortedList,
    #[error("outsourcer commitment signature does not verify")]
    BadOutsourcerSignature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RejectReason {
    #[error("revealed x does not match the committed hash")]
    HashMismatch,
    #[error("outsourcer commitment signature does not verify")]
    BadOutsourcerSignature,
    #[error("contractor commitment signature does not verify")]
    BadContractorSignature,
    #[error("verifier list is empty or not strictly ascending")]
    MalformedList,
    #[error("verifier list diverges from the local view")]
    ListDivergence,
    #[error("the contacted verifier is not the selected one")]
    WrongVerifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionOutcome {
    Accept(usize),
    Reject(RejectReason),
}

/// Who is signing, and for which contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionContext {
    pub contract_ref: Digest32,
    pub outsourcer_pk: PublicKey,
    pub contractor_pk: PublicKey,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutsourcerCommit {
    pub x_hash: Digest32,
    pub sig_o: Signature64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractorCommit {
    pub y: [u8; 32],
    pub verifier_list: Vec<PublicKey>,
    pub sig_c: Signature64,
}

impl ContractorCommit {
    /// `m = [y:32][count:4][keys:32 each]`.
    pub fn encode_m(&self) -> Vec<u8> {
        encode_m(&self.y, &self.verifier_list)
    }
}

/// Everything the Outsourcer shows the settlement entity to prove it
/// contacted the Verifier it was bound to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionProof {
    pub commit: OutsourcerCommit,
    pub contractor: ContractorCommit,
    pub revealed_x: [u8; 32],
}

impl SelectionProof {
    /// Checks the transcript and that `contacted` sits at the selected index.
    pub fn check(&self, ctx: &SelectionContext, contacted: &PublicKey) -> SelectionOutcome {
        let outcome =
            verify_selection(ctx, &self.commit, &self.contractor, &self.revealed_x, &self.contractor.verifier_list, 1.0);
        match outcome {
            SelectionOutcome::Accept(i) if self.contractor.verifier_list[i] != *contacted => {
                SelectionOutcome::Reject(RejectReason::WrongVerifier)
            }
            other => other,
        }
    }
}

pub fn encode_m(y: &[u8; 32], verifier_list: &[PublicKey]) -> Vec<u8> {
    let mut out = Vec::with_capacity(36 + 32 * verifier_list.len());
    out.extend_from_slice(y);
    out.extend_from_slice(&u32::try_from(verifier_list.len()).expect("list fits u32").to_le_bytes());
    for pk in verifier_list {
        out.extend_from_slice(pk.as_bytes());
    }
    out
}

fn outsourcer_preimage(x_hash: &Digest32, contract_ref: &Digest32) -> Vec<u8> {
    let mut out = Vec::with_capacity(65);
    out.push(TAG_OUTSOURCER_COMMIT);
    out.extend_from_slice(x_hash.as_bytes());
    out.extend_from_slice(contract_ref.as_bytes());
    out
}

fn contractor_preimage(x_hash: &Digest32, contract_ref: &Digest32, m_hash: &Digest32) -> Vec<u8> {
    let mut out = Vec::with_capacity(97);
    out.push(TAG_CONTRACTOR_COMMIT);
    out.extend_from_slice(x_hash.as_bytes());
    out.extend_from_slice(contract_ref.as_bytes());
    out.extend_from_slice(m_hash.as_bytes());
    out
}

fn strictly_sorted(list: &[PublicKey]) -> bool {
    list.windows(2).all(|w| w[0] < w[1])
}

pub fn outsourcer_commit(x: &[u8; 32], contract_ref: &Digest32, keys: &KeyPair) -> OutsourcerCommit {
    let x_hash = hash(x);
    let sig_o = keys.sign(&outsourcer_preimage(&x_hash, contract_ref));
    OutsourcerCommit { x_hash, sig_o }
}

pub fn contractor_commit(
    ctx: &SelectionContext,
    oc: &OutsourcerCommit,
    y: [u8; 32],
    verifier_list: Vec<PublicKey>,
    keys: &KeyPair,
) -> Result<ContractorCommit, SelectionError> {
    if !verify(&ctx.outsourcer_pk, &outsourcer_preimage(&oc.x_hash, &ctx.contract_ref), &oc.sig_o) {
        return Err(SelectionError::BadOutsourcerSignature);
    }
    if verifier_list.is_empty() {
        return Err(SelectionError::EmptyList);
    }
    if !strictly_sorted(&verifier_list) {
        return Err(SelectionError::UnsortedList);
    }
    let m_hash = hash(&encode_m(&y, &verifier_list));
    let sig_c = keys.sign(&contractor_preimage(&oc.x_hash, &ctx.contract_ref, &m_hash));
    Ok(ContractorCommit { y, verifier_list, sig_c })
}

/// Reduces a big-endian unsigned integer modulo `n`.
fn be_mod(bytes: &[u8; 32], n: u128) -> u128 {
    bytes.iter().fold(0u128, |acc, &b| (acc * 256 + u128::from(b)) % n)
}

/// Index `(int(x) + int(y)) mod n`, with `x` and `y` read as big-endian
/// 256-bit integers.
pub fn select_index(x: &[u8; 32], y: &[u8; 32], n: usize) -> Result<usize, SelectionError> {
    if n == 0 {
        return Err(SelectionError::EmptyList);
    }
    let n = n as u128;
    Ok(((be_mod(x, n) + be_mod(y, n)) % n) as usize)
}

pub fn select_verifier(
    x: &[u8; 32],
    y: &[u8; 32],
    verifier_list: &[PublicKey],
) -> Result<(usize, PublicKey), SelectionError> {
    let i = select_index(x, y, verifier_list.len())?;
    Ok((i, verifier_list[i]))
}

/// Jaccard index of two key sets. Two empty sets are identical.
pub fn list_similarity(a: &[PublicKey], b: &[PublicKey]) -> f64 {
    use std::collections::BTreeSet;
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

pub fn verify_selection(
    ctx: &SelectionContext,
    oc: &OutsourcerCommit,
    cc: &ContractorCommit,
    revealed_x: &[u8; 32],
    local_list: &[PublicKey],
    similarity_threshold: f64,
) -> SelectionOutcome {
    use SelectionOutcome::Reject;
    if hash(revealed_x) != oc.x_hash {
        return Reject(RejectReason::HashMismatch);
    }
    if !verify(&ctx.outsourcer_pk, &outsourcer_preimage(&oc.x_hash, &ctx.contract_ref), &oc.sig_o) {
        return Reject(RejectReason::BadOutsourcerSignature);
    }
    let m_hash = hash(&cc.encode_m());
    if !verify(&ctx.contractor_pk, &contractor_preimage(&oc.x_hash, &ctx.contract_ref, &m_hash), &cc.sig_c) {
        return Reject(RejectReason::BadContractorSignature);
    }
    if cc.verifier_list.is_empty() || !strictly_sorted(&cc.verifier_list) {
        return Reject(RejectReason::MalformedList);
    }
    if list_similarity(&cc.verifier_list, local_list) < similarity_threshold {
        return Reject(RejectReason::ListDivergence);
    }
    match select_index(revealed_x, &cc.y, cc.verifier_list.len()) {
        Ok(i) => SelectionOutcome::Accept(i),
        Err(_) => Reject(RejectReason::MalformedList),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn int_bytes(v: u64) -> [u8; 32] {
        let mut out = [0u8; 32];
        out[24..].copy_from_slice(&v.to_be_bytes());
        out
    }

    fn sorted_keys(n: u8, offset: u8) -> Vec<PublicKey> {
        let mut v: Vec<_> = (0..n).map(|i| KeyPair::from_seed(&[i + offset; 32]).public).collect();
        v.sort();
        v
    }

    struct Fixture {
        o: KeyPair,
        c: KeyPair,
        ctx: SelectionContext,
        x: [u8; 32],
        oc: OutsourcerCommit,
        cc: ContractorCommit,
    }

    fn fixture() -> Fixture {
        let o = KeyPair::from_seed(&[200; 32]);
        let c = KeyPair::from_seed(&[201; 32]);
        let ctx = SelectionContext { contract_ref: hash(b"contract"), outsourcer_pk: o.public, contractor_pk: c.public };
        let x = [9u8; 32];
        let oc = outsourcer_commit(&x, &ctx.contract_ref, &o);
        let cc = contractor_commit(&ctx, &oc, [4u8; 32], sorted_keys(10, 1), &c).unwrap();
        Fixture { o, c, ctx, x, oc, cc }
    }

    #[test]
    fn modular_selection_examples() {
        assert_eq!(select_index(&int_bytes(5), &int_bytes(3), 4).unwrap(), 0);
        assert_eq!(select_index(&int_bytes(0), &int_bytes(0), 1).unwrap(), 0);
        assert_eq!(select_index(&int_bytes(1), &int_bytes(1), 0), Err(SelectionError::EmptyList));
        // 2^256 - 1 = 3 * 5 * 17 * ..., so all-ones is divisible by 5.
        assert_eq!(select_index(&[0xff; 32], &int_bytes(0), 5).unwrap(), 0);
    }

    #[test]
    fn fixed_y_shift_is_a_bijection() {
        let n = 13;
        let y = [0xab; 32];
        let mut hits: Vec<usize> = (0..n as u64).map(|x| select_index(&int_bytes(x), &y, n).unwrap()).collect();
        hits.sort();
        assert_eq!(hits, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn outsourcer_commit_hides_x() {
        let f = fixture();
        assert_eq!(f.oc.x_hash, hash(&f.x));
        assert!(verify(&f.o.public, &outsourcer_preimage(&f.oc.x_hash, &f.ctx.contract_ref), &f.oc.sig_o));
        let other = outsourcer_commit(&[10u8; 32], &f.ctx.contract_ref, &f.o);
        assert_ne!(other.x_hash, f.oc.x_hash);
    }

    #[test]
    fn distinct_x_give_distinct_commitments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..2_000 {
            let mut x = [0u8; 32];
            rng.fill_bytes(&mut x);
            seen.insert(hash(&x));
        }
        assert_eq!(seen.len(), 2_000);
    }

    #[test]
    fn contractor_commit_rejects_bad_lists_and_signatures() {
        let f = fixture();
        let mut unsorted = sorted_keys(4, 1);
        unsorted.swap(0, 1);
        assert_eq!(contractor_commit(&f.ctx, &f.oc, [0; 32], unsorted, &f.c), Err(SelectionError::UnsortedList));
        let mut dup = sorted_keys(4, 1);
        dup[1] = dup[0];
        assert_eq!(contractor_commit(&f.ctx, &f.oc, [0; 32], dup, &f.c), Err(SelectionError::UnsortedList));
        assert_eq!(contractor_commit(&f.ctx, &f.oc, [0; 32], vec![], &f.c), Err(SelectionError::EmptyList));
        let mut forged = f.oc.clone();
        forged.x_hash.0[0] ^= 1;
        assert_eq!(
            contractor_commit(&f.ctx, &forged, [0; 32], sorted_keys(3, 1), &f.c),
            Err(SelectionError::BadOutsourcerSignature)
        );
    }

    #[test]
    fn honest_transcript_accepts_with_modular_index() {
        let f = fixture();
        let expected = select_index(&f.x, &f.cc.y, 10).unwrap();
        assert_eq!(
            verify_selection(&f.ctx, &f.oc, &f.cc, &f.x, &f.cc.verifier_list, DEFAULT_SIMILARITY_THRESHOLD),
            SelectionOutcome::Accept(expected)
        );
    }

    #[test]
    fn wrong_reveal_is_hash_mismatch() {
        let f = fixture();
        assert_eq!(
            verify_selection(&f.ctx, &f.oc, &f.cc, &[8u8; 32], &f.cc.verifier_list, 0.9),
            SelectionOutcome::Reject(RejectReason::HashMismatch)
        );
    }

    #[test]
    fn tampered_commit_hash_fails_downstream() {
        let f = fixture();
        let mut oc = f.oc.clone();
        oc.x_hash = hash(&[8u8; 32]);
        // Even revealing the matching preimage cannot rescue a tampered hash.
        let outcome = verify_selection(&f.ctx, &oc, &f.cc, &[8u8; 32], &f.cc.verifier_list, 0.9);
        assert_eq!(outcome, SelectionOutcome::Reject(RejectReason::BadOutsourcerSignature));
    }

    #[test]
    fn list_divergence_by_jaccard() {
        let f = fixture();
        // Local list has 10 keys, the contractor only 7 of them: J = 0.7.
        let small: Vec<_> = f.cc.verifier_list[..7].to_vec();
        let cc = contractor_commit(&f.ctx, &f.oc, [4u8; 32], small.clone(), &f.c).unwrap();
        assert!((list_similarity(&small, &f.cc.verifier_list) - 0.7).abs() < 1e-12);
        assert_eq!(
            verify_selection(&f.ctx, &f.oc, &cc, &f.x, &f.cc.verifier_list, 0.9),
            SelectionOutcome::Reject(RejectReason::ListDivergence)
        );
    }

    #[test]
    fn commitment_binds_every_field() {
        let f = fixture();
        let check = |cc: &ContractorCommit| verify_selection(&f.ctx, &f.oc, cc, &f.x, &cc.verifier_list, 0.0);
        assert!(matches!(check(&f.cc), SelectionOutcome::Accept(_)));
        for byte in 0..32 {
            let mut cc = f.cc.clone();
            cc.y[byte] ^= 1;
            assert_eq!(check(&cc), SelectionOutcome::Reject(RejectReason::BadContractorSignature));
        }
        for i in 0..f.cc.verifier_list.len() {
            let mut cc = f.cc.clone();
            cc.verifier_list[i].0[31] ^= 1;
            assert!(matches!(check(&cc), SelectionOutcome::Reject(_)));
            let mut cc = f.cc.clone();
            cc.verifier_list.remove(i);
            assert_eq!(check(&cc), SelectionOutcome::Reject(RejectReason::BadContractorSignature));
        }
        let mut cc = f.cc.clone();
        cc.verifier_list.push(PublicKey([0xff; 32]));
        assert_eq!(check(&cc), SelectionOutcome::Reject(RejectReason::BadContractorSignature));
        let other_ctx = SelectionContext { contract_ref: hash(b"other"), ..f.ctx };
        assert_eq!(
            verify_selection(&other_ctx, &f.oc, &f.cc, &f.x, &f.cc.verifier_list, 0.0),
            SelectionOutcome::Reject(RejectReason::BadOutsourcerSignature)
        );
    }

    #[test]
    fn selection_proof_pins_the_contacted_verifier() {
        let f = fixture();
        let proof = SelectionProof { commit: f.oc.clone(), contractor: f.cc.clone(), revealed_x: f.x };
        let (idx, chosen) = select_verifier(&f.x, &f.cc.y, &f.cc.verifier_list).unwrap();
        assert_eq!(proof.check(&f.ctx, &chosen), SelectionOutcome::Accept(idx));
        let other = f.cc.verifier_list[(idx + 1) % 10];
        assert_eq!(proof.check(&f.ctx, &other), SelectionOutcome::Reject(RejectReason::WrongVerifier));
    }

    #[test]
    fn chi_square_uniformity() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let n = 7;
        let trials = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = vec![0u64; n];
        for _ in 0..trials {
            let (mut x, mut y) = ([0u8; 32], [0u8; 32]);
            rng.fill_bytes(&mut x);
            rng.fill_bytes(&mut y);
            counts[select_index(&x, &y, n).unwrap()] += 1;
        }
        let expected = trials as f64 / n as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((n - 1) as f64).unwrap().cdf(stat);
        assert!(p > 0.01, "chi2={stat} p={p}");
    }

    #[test]
    fn contractor_cannot_steer_selection() {
        // Whatever deterministic rule the Contractor uses to derive y from the
        // commitment, uniform x keeps the selected index uniform.
        let n = 11;
        let trials = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let strategies: [fn(&Digest32) -> [u8; 32]; 3] = [
            |h| h.0,
            |_| [0u8; 32],
            |h| {
                let mut y = [0u8; 32];
                y[31] = h.0[0] % 11;
                y
            },
        ];
        for strategy in strategies {
            let mut counts = vec![0u64; n];
            for _ in 0..trials {
                let mut x = [0u8; 32];
                rng.fill_bytes(&mut x);
                let y = strategy(&hash(&x));
                counts[select_index(&x, &y, n).unwrap()] += 1;
            }
            let tv: f64 = counts.iter().map(|&c| (c as f64 / trials as f64 - 1.0 / n as f64).abs()).sum::<f64>() / 2.0;
            assert!(tv < 0.02, "tv={tv}");
        }
    }
}
