//! Public-key schemes `(K, E, D)` with ledgered encryption and decryption.
//!
//! Two base families are provided, Goldwasser-Micali ([`gm`]) and
//! Cramer-Shoup ([`cs`]), plus [`LeakyScheme`], a wrapper that makes the
//! observable cost depend on secret data so there is something for a timing
//! adversary to find.

pub mod cs;
pub mod encoding;
pub mod gm;
mod leaky;

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numtheory::{CostLedger, Natural, NumError};

pub use cs::{CsCiphertext, CsPublicKey, CsScheme, CsSecretKey, HashId};
pub use gm::{GmPublicKey, GmScheme, GmSecretKey};
pub use leaky::{LeakProfile, LeakyScheme};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("key does not belong to scheme family {0}")]
    KeyMismatch(SchemeFamily),
    #[error("message outside the message space: {0}")]
    MessageOutsideSpace(String),
    #[error("invalid scheme parameters: {0}")]
    InvalidParameters(String),
    #[error("key generation exhausted after {0} attempts")]
    KeygenExhausted(usize),
    #[error("{op} cost {cost} exceeds fixed-time budget {budget}")]
    BudgetOverflow { op: OpKind, cost: u64, budget: u64 },
    #[error("malformed encoding: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeFamily {
    Gm,
    Cs,
}

impl fmt::Display for SchemeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeFamily::Gm => f.write_str("gm"),
            SchemeFamily::Cs => f.write_str("cs"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Encrypt,
    Decrypt,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpKind::Encrypt => f.write_str("encrypt"),
            OpKind::Decrypt => f.write_str("decrypt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Plaintext {
    /// Fixed-length bit string, encrypted bit by bit.
    Bits(Vec<bool>),
    /// Group element.
    Element(Natural),
}

impl Plaintext {
    pub fn from_bits(bits: &[u8]) -> Self {
        Plaintext::Bits(bits.iter().map(|&b| b != 0).collect())
    }

    /// Length as seen by the adversary: bit count, or 1 for a group element.
    pub fn len(&self) -> usize {
        match self {
            Plaintext::Bits(bits) => bits.len(),
            Plaintext::Element(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of set bits in the plaintext encoding.
    pub fn popcount(&self) -> u64 {
        match self {
            Plaintext::Bits(bits) => bits.iter().filter(|&&b| b).count() as u64,
            Plaintext::Element(m) => m.count_ones(),
        }
    }
}

impl fmt::Display for Plaintext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Plaintext::Bits(bits) => {
                f.write_str("bits:")?;
                for &b in bits {
                    f.write_str(if b { "1" } else { "0" })?;
                }
                Ok(())
            }
            Plaintext::Element(m) => write!(f, "elem:{m:x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Ciphertext {
    Gm(Vec<Natural>),
    Cs(CsCiphertext),
}

impl Ciphertext {
    pub fn family(&self) -> SchemeFamily {
        match self {
            Ciphertext::Gm(_) => SchemeFamily::Gm,
            Ciphertext::Cs(_) => SchemeFamily::Cs,
        }
    }
}

/// Outcome of a decryption. Rejection is an ordinary result, not an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decryption {
    Plaintext(Plaintext),
    Reject,
}

impl Decryption {
    pub fn plaintext(&self) -> Option<&Plaintext> {
        match self {
            Decryption::Plaintext(m) => Some(m),
            Decryption::Reject => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PublicKey {
    Gm(GmPublicKey),
    Cs(CsPublicKey),
}

impl PublicKey {
    pub fn family(&self) -> SchemeFamily {
        match self {
            PublicKey::Gm(_) => SchemeFamily::Gm,
            PublicKey::Cs(_) => SchemeFamily::Cs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SecretKey {
    Gm(GmSecretKey),
    Cs(CsSecretKey),
}

impl SecretKey {
    /// Recomputes the public key from the secret material.
    pub fn public(&self) -> PublicKey {
        match self {
            SecretKey::Gm(sk) => PublicKey::Gm(sk.public()),
            SecretKey::Cs(sk) => PublicKey::Cs(sk.public()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub pk: PublicKey,
    pub sk: SecretKey,
    pub security_parameter: u64,
}

/// How the validity comparison inside a decryption is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Comparison {
    /// Every position is compared regardless of earlier mismatches.
    #[default]
    Full,
    /// Stops at the first mismatching position.
    EarlyAbort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MessageSpace {
    /// Bit strings of exactly `length` bits.
    BitStrings { length: usize },
    /// Elements of the prime-order subgroup of Z_p^*.
    SubgroupElements { group_bits: u64 },
}

/// A public-key cryptosystem with cost-instrumented `E` and `D`.
///
/// Implementations are immutable; all per-call state lives in the rng and
/// ledger supplied by the caller.
pub trait Scheme: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn family(&self) -> SchemeFamily;

    /// Security parameter in bits (prime size for GM, group size for CS).
    fn security_bits(&self) -> u64;

    fn message_space(&self) -> MessageSpace;

    fn keygen(&self, rng: &mut dyn RngCore) -> Result<KeyPair, SchemeError>;

    fn encrypt(
        &self,
        pk: &PublicKey,
        m: &Plaintext,
        rng: &mut dyn RngCore,
        ledger: &mut CostLedger,
    ) -> Result<Ciphertext, SchemeError>;

    fn decrypt(
        &self,
        sk: &SecretKey,
        c: &Ciphertext,
        ledger: &mut CostLedger,
    ) -> Result<Decryption, SchemeError> {
        self.decrypt_with(sk, c, Comparison::Full, ledger)
    }

    fn decrypt_with(
        &self,
        sk: &SecretKey,
        c: &Ciphertext,
        comparison: Comparison,
        ledger: &mut CostLedger,
    ) -> Result<Decryption, SchemeError>;

    /// Fails if `m` is not a member of the message space under `pk`.
    fn check_message(&self, pk: &PublicKey, m: &Plaintext) -> Result<(), SchemeError>;

    fn sample_message(
        &self,
        pk: &PublicKey,
        rng: &mut dyn RngCore,
    ) -> Result<Plaintext, SchemeError>;

    /// Minimal- and maximal-popcount messages of the message space.
    fn extreme_messages(&self, pk: &PublicKey) -> Result<(Plaintext, Plaintext), SchemeError>;

    /// Invalid ciphertexts derived from a valid one, for rejection-path probing.
    fn invalid_probes(&self, pk: &PublicKey, valid: &Ciphertext) -> Vec<Ciphertext>;
}
