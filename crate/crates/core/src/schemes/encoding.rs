//! Canonical byte encoding for keys, plaintexts and ciphertexts.
//!
//! ```text
//! frame     := u32be(len(tag)) tag u32be(count) component*
//! component := u32be(len(mag)) mag      // minimal big-endian magnitude
//! ```
//!
//! Zero encodes as an empty magnitude. The encoding is stable within one
//! release of this crate.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use sha2::{Digest, Sha256};

use super::{
    Ciphertext, CsCiphertext, CsPublicKey, CsSecretKey, GmPublicKey, GmSecretKey, HashId,
    Plaintext, PublicKey, SchemeError, SecretKey,
};
use crate::numtheory::Natural;

fn magnitude(x: &Natural) -> Vec<u8> {
    if x.is_zero() {
        Vec::new()
    } else {
        x.to_bytes_be()
    }
}

fn put_chunk(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
}

fn frame<'a>(tag: &str, components: impl IntoIterator<Item = &'a Natural>) -> Vec<u8> {
    let components: Vec<&Natural> = components.into_iter().collect();
    let mut out = Vec::new();
    put_chunk(&mut out, tag.as_bytes());
    out.extend_from_slice(&(components.len() as u32).to_be_bytes());
    for c in components {
        put_chunk(&mut out, &magnitude(c));
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn u32(&mut self) -> Result<usize, SchemeError> {
        if self.buf.len() < 4 {
            return Err(SchemeError::Decode("truncated length".into()));
        }
        let (head, rest) = self.buf.split_at(4);
        self.buf = rest;
        Ok(u32::from_be_bytes(head.try_into().expect("4 bytes")) as usize)
    }

    fn chunk(&mut self) -> Result<&'a [u8], SchemeError> {
        let len = self.u32()?;
        if self.buf.len() < len {
            return Err(SchemeError::Decode("truncated chunk".into()));
        }
        let (head, rest) = self.buf.split_at(len);
        self.buf = rest;
        Ok(head)
    }
}

fn unframe(bytes: &[u8]) -> Result<(String, Vec<Natural>), SchemeError> {
    let mut r = Reader { buf: bytes };
    let tag = String::from_utf8(r.chunk()?.to_vec())
        .map_err(|_| SchemeError::Decode("tag is not utf-8".into()))?;
    let count = r.u32()?;
    let mut components = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let mag = r.chunk()?;
        if mag.first() == Some(&0) {
            return Err(SchemeError::Decode("non-canonical leading zero".into()));
        }
        components.push(BigUint::from_bytes_be(mag));
    }
    if !r.buf.is_empty() {
        return Err(SchemeError::Decode("trailing bytes".into()));
    }
    Ok((tag, components))
}

fn expect_arity(tag: &str, parts: &[Natural], n: usize) -> Result<(), SchemeError> {
    if parts.len() == n {
        Ok(())
    } else {
        Err(SchemeError::Decode(format!(
            "{tag} expects {n} components, found {}",
            parts.len()
        )))
    }
}

fn hash_from(x: &Natural) -> Result<HashId, SchemeError> {
    x.to_u8()
        .and_then(HashId::from_code)
        .ok_or_else(|| SchemeError::Decode("unknown hash id".into()))
}

pub fn encode_ciphertext(c: &Ciphertext) -> Vec<u8> {
    match c {
        Ciphertext::Gm(parts) => frame("gm", parts),
        Ciphertext::Cs(ct) => frame("cs", [&ct.u1, &ct.u2, &ct.e, &ct.v]),
    }
}

pub fn decode_ciphertext(bytes: &[u8]) -> Result<Ciphertext, SchemeError> {
    let (tag, mut parts) = unframe(bytes)?;
    match tag.as_str() {
        "gm" => Ok(Ciphertext::Gm(parts)),
        "cs" => {
            expect_arity(&tag, &parts, 4)?;
            let v = parts.pop().expect("arity");
            let e = parts.pop().expect("arity");
            let u2 = parts.pop().expect("arity");
            let u1 = parts.pop().expect("arity");
            Ok(Ciphertext::Cs(CsCiphertext { u1, u2, e, v }))
        }
        other => Err(SchemeError::Decode(format!(
            "unknown ciphertext tag {other}"
        ))),
    }
}

pub fn encode_plaintext(m: &Plaintext) -> Vec<u8> {
    match m {
        Plaintext::Bits(bits) => {
            let mut packed = vec![0u8; bits.len().div_ceil(8)];
            for (i, &b) in bits.iter().enumerate() {
                if b {
                    packed[i / 8] |= 0x80 >> (i % 8);
                }
            }
            let len = BigUint::from(bits.len());
            let value = BigUint::from_bytes_be(&packed);
            frame("bits", [&len, &value])
        }
        Plaintext::Element(x) => frame("elem", [x]),
    }
}

pub fn decode_plaintext(bytes: &[u8]) -> Result<Plaintext, SchemeError> {
    let (tag, parts) = unframe(bytes)?;
    match tag.as_str() {
        "bits" => {
            expect_arity(&tag, &parts, 2)?;
            let len = parts[0]
                .to_usize()
                .ok_or_else(|| SchemeError::Decode("bit length overflow".into()))?;
            let width = len.div_ceil(8);
            let raw = magnitude(&parts[1]);
            if raw.len() > width {
                return Err(SchemeError::Decode("bit string longer than length".into()));
            }
            let mut packed = vec![0u8; width - raw.len()];
            packed.extend(raw);
            let bits: Vec<bool> = (0..len)
                .map(|i| packed[i / 8] & (0x80 >> (i % 8)) != 0)
                .collect();
            // padding bits must be zero
            let repacked = encode_plaintext(&Plaintext::Bits(bits.clone()));
            if repacked != bytes {
                return Err(SchemeError::Decode("non-zero padding bits".into()));
            }
            Ok(Plaintext::Bits(bits))
        }
        "elem" => {
            expect_arity(&tag, &parts, 1)?;
            Ok(Plaintext::Element(parts.into_iter().next().expect("arity")))
        }
        other => Err(SchemeError::Decode(format!(
            "unknown plaintext tag {other}"
        ))),
    }
}

pub fn encode_public_key(pk: &PublicKey) -> Vec<u8> {
    match pk {
        PublicKey::Gm(pk) => frame("gm-pk", [&pk.n, &pk.y]),
        PublicKey::Cs(pk) => {
            let hash = BigUint::from(pk.hash.code());
            frame(
                "cs-pk",
                [&pk.p, &pk.q, &pk.g1, &pk.g2, &pk.c, &pk.d, &pk.h, &hash],
            )
        }
    }
}

pub fn decode_public_key(bytes: &[u8]) -> Result<PublicKey, SchemeError> {
    let (tag, parts) = unframe(bytes)?;
    match tag.as_str() {
        "gm-pk" => {
            expect_arity(&tag, &parts, 2)?;
            let [n, y]: [Natural; 2] = parts.try_into().expect("arity");
            Ok(PublicKey::Gm(GmPublicKey { n, y }))
        }
        "cs-pk" => {
            expect_arity(&tag, &parts, 8)?;
            let hash = hash_from(&parts[7])?;
            let [p, q, g1, g2, c, d, h, _]: [Natural; 8] = parts.try_into().expect("arity");
            Ok(PublicKey::Cs(CsPublicKey {
                p,
                q,
                g1,
                g2,
                c,
                d,
                h,
                hash,
            }))
        }
        other => Err(SchemeError::Decode(format!(
            "unknown public key tag {other}"
        ))),
    }
}

pub fn encode_secret_key(sk: &SecretKey) -> Vec<u8> {
    match sk {
        SecretKey::Gm(sk) => frame("gm-sk", [&sk.p, &sk.q, &sk.y]),
        SecretKey::Cs(sk) => {
            let hash = BigUint::from(sk.hash.code());
            frame(
                "cs-sk",
                [
                    &sk.p, &sk.q, &sk.g1, &sk.g2, &hash, &sk.x1, &sk.x2, &sk.y1, &sk.y2, &sk.z,
                ],
            )
        }
    }
}

/// Decodes and re-validates a secret key.
pub fn decode_secret_key(bytes: &[u8]) -> Result<SecretKey, SchemeError> {
    let (tag, parts) = unframe(bytes)?;
    match tag.as_str() {
        "gm-sk" => {
            expect_arity(&tag, &parts, 3)?;
            let [p, q, y]: [Natural; 3] = parts.try_into().expect("arity");
            Ok(SecretKey::Gm(GmSecretKey::from_parts(p, q, y)?))
        }
        "cs-sk" => {
            expect_arity(&tag, &parts, 10)?;
            let hash = hash_from(&parts[4])?;
            let [p, q, g1, g2, _, x1, x2, y1, y2, z]: [Natural; 10] =
                parts.try_into().expect("arity");
            Ok(SecretKey::Cs(CsSecretKey::from_parts(
                p,
                q,
                g1,
                g2,
                [x1, x2, y1, y2, z],
                hash,
            )?))
        }
        other => Err(SchemeError::Decode(format!(
            "unknown secret key tag {other}"
        ))),
    }
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn ciphertext_digest(c: &Ciphertext) -> String {
    sha256_hex(&encode_ciphertext(c))
}
