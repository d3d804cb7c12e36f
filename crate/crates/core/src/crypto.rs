//! Hashing and signature primitives.
//!
//! SHA-256 digests and Ed25519 signatures. Keys are only ever derived from
//! explicit 32-byte seeds so that every simulation run is reproducible.

use std::fmt;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const DIGEST_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SEED_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("seed must be {SEED_LEN} bytes, got {0}")]
    SeedLength(usize),
    #[error("public key must be {PUBLIC_KEY_LEN} bytes, got {0}")]
    PublicKeyLength(usize),
    #[error("signature must be {SIGNATURE_LEN} bytes, got {0}")]
    SignatureLength(usize),
    #[error("public key bytes do not encode a curve point")]
    MalformedPublicKey,
}

fn write_hex(f: &mut fmt::Formatter<'_>, bytes: &[u8]) -> fmt::Result {
    for b in bytes {
        write!(f, "{b:02x}")?;
    }
    Ok(())
}

/// A SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Digest32(pub [u8; DIGEST_LEN]);

impl Digest32 {
    pub const fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }
}

impl fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_hex(f, &self.0[..6])?;
        f.write_str("..")
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_hex(f, &self.0)
    }
}

/// An Ed25519 verification key. Ordering is byte order, which is the order
/// verifier lists are sorted in.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; PUBLIC_KEY_LEN] = bytes
            .try_into()
            .map_err(|_| CryptoError::PublicKeyLength(bytes.len()))?;
        Ok(Self(arr))
    }

    pub const fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    /// Short hex prefix for logs and reports.
    pub fn short(&self) -> String {
        self.0[..4].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pk:{}", self.short())
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_hex(f, &self.0)
    }
}

/// A 512-bit Ed25519 signature.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature64(pub [u8; SIGNATURE_LEN]);

impl Signature64 {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; SIGNATURE_LEN] = bytes
            .try_into()
            .map_err(|_| CryptoError::SignatureLength(bytes.len()))?;
        Ok(Self(arr))
    }

    pub const fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }
}

impl Default for Signature64 {
    fn default() -> Self {
        Self([0u8; SIGNATURE_LEN])
    }
}

impl fmt::Debug for Signature64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("sig:")?;
        write_hex(f, &self.0[..4])?;
        f.write_str("..")
    }
}

/// Signing half of a key pair. Deliberately neither `Serialize` nor `Debug`.
#[derive(Clone)]
pub struct SecretKey(SigningKey);

#[derive(Clone)]
pub struct KeyPair {
    pub secret: SecretKey,
    pub public: PublicKey,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn from_seed(seed: &[u8; SEED_LEN]) -> Self {
        let signing = SigningKey::from_bytes(seed);
        let public = PublicKey(signing.verifying_key().to_bytes());
        Self { secret: SecretKey(signing), public }
    }

    pub fn sign(&self, message: &[u8]) -> Signature64 {
        sign(&self.secret, message)
    }
}

pub fn hash(data: &[u8]) -> Digest32 {
    Digest32(Sha256::digest(data).into())
}

/// Hashes the concatenation of several byte strings without allocating.
pub fn hash_parts(parts: &[&[u8]]) -> Digest32 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    Digest32(hasher.finalize().into())
}

pub fn keypair_from_seed(seed: &[u8]) -> Result<KeyPair, CryptoError> {
    let seed: &[u8; SEED_LEN] = seed.try_into().map_err(|_| CryptoError::SeedLength(seed.len()))?;
    Ok(KeyPair::from_seed(seed))
}

pub fn sign(secret: &SecretKey, message: &[u8]) -> Signature64 {
    Signature64(secret.0.sign(message).to_bytes())
}

/// Verifies `signature` over `message`. A key that is not a valid curve point
/// simply fails verification; use [`try_verify`] to tell the two apart.
pub fn verify(public: &PublicKey, message: &[u8], signature: &Signature64) -> bool {
    match VerifyingKey::from_bytes(&public.0) {
        Ok(key) => verify_with(&key, message, signature),
        Err(_) => false,
    }
}

/// Byte-slice variant of [`verify`] that reports malformed key material as an
/// error instead of folding it into `false`.
pub fn try_verify(public: &[u8], message: &[u8], signature: &[u8]) -> Result<bool, CryptoError> {
    let public = PublicKey::from_slice(public)?;
    let signature = Signature64::from_slice(signature)?;
    let key = VerifyingKey::from_bytes(&public.0).map_err(|_| CryptoError::MalformedPublicKey)?;
    Ok(verify_with(&key, message, &signature))
}

fn verify_with(key: &VerifyingKey, message: &[u8], signature: &Signature64) -> bool {
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    key.verify_strict(message, &sig).is_ok()
}
