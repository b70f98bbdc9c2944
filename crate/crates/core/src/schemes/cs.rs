//! Cramer-Shoup over the order-`q` subgroup of `Z_p^*`, `p = 2q + 1`.
//!
//! All exponentiations use the fixed-width ladder with the width set to the
//! bit length of `p`, so encryption and decryption costs do not depend on
//! the randomness, the key, or the message. The only data-dependent cost is
//! the validity comparison when it is run in [`Comparison::EarlyAbort`] mode.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    Ciphertext, Comparison, Decryption, KeyPair, MessageSpace, Plaintext, PublicKey, Scheme,
    SchemeError, SchemeFamily, SecretKey,
};
use crate::numtheory::{
    byte_width, gen_safe_prime, mod_mul, mod_pow_ladder, to_fixed_be, CostLedger, Natural,
};

/// Hash used to derive the challenge exponent `alpha = H(u1, u2, e) mod q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashId {
    /// SHA-256 over the fixed-width big-endian encodings.
    #[default]
    Sha256,
    /// The concatenated encodings read as one integer. Only for hand-checked
    /// tiny groups; it is not collision resistant.
    Toy,
}

impl HashId {
    pub fn code(self) -> u8 {
        match self {
            HashId::Sha256 => 0,
            HashId::Toy => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(HashId::Sha256),
            1 => Some(HashId::Toy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CsPublicKey {
    pub p: Natural,
    pub q: Natural,
    pub g1: Natural,
    pub g2: Natural,
    pub c: Natural,
    pub d: Natural,
    pub h: Natural,
    pub hash: HashId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsSecretKey {
    pub p: Natural,
    pub q: Natural,
    pub g1: Natural,
    pub g2: Natural,
    pub hash: HashId,
    pub x1: Natural,
    pub x2: Natural,
    pub y1: Natural,
    pub y2: Natural,
    pub z: Natural,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CsCiphertext {
    pub u1: Natural,
    pub u2: Natural,
    pub e: Natural,
    pub v: Natural,
}

fn exact_order_q(g: &Natural, p: &Natural, q: &Natural) -> bool {
    !g.is_zero() && g < p && !g.is_one() && g.modpow(q, p).is_one()
}

fn pow_plain(base: &Natural, exp: &Natural, p: &Natural) -> Natural {
    base.modpow(exp, p)
}

impl CsSecretKey {
    /// Builds a key from explicit group parameters and secret exponents.
    pub fn from_parts(
        p: Natural,
        q: Natural,
        g1: Natural,
        g2: Natural,
        exponents: [Natural; 5],
        hash: HashId,
    ) -> Result<Self, SchemeError> {
        if !((&p - 1u8) % &q).is_zero() {
            return Err(SchemeError::InvalidParameters("q must divide p - 1".into()));
        }
        if !exact_order_q(&g1, &p, &q) || !exact_order_q(&g2, &p, &q) {
            return Err(SchemeError::InvalidParameters(
                "generators must have exact order q".into(),
            ));
        }
        let [x1, x2, y1, y2, z] = exponents.map(|x| x % &q);
        Ok(Self {
            p,
            q,
            g1,
            g2,
            hash,
            x1,
            x2,
            y1,
            y2,
            z,
        })
    }

    pub fn public(&self) -> CsPublicKey {
        let p = &self.p;
        let c = (pow_plain(&self.g1, &self.x1, p) * pow_plain(&self.g2, &self.x2, p)) % p;
        let d = (pow_plain(&self.g1, &self.y1, p) * pow_plain(&self.g2, &self.y2, p)) % p;
        let h = pow_plain(&self.g1, &self.z, p);
        CsPublicKey {
            p: p.clone(),
            q: self.q.clone(),
            g1: self.g1.clone(),
            g2: self.g2.clone(),
            c,
            d,
            h,
            hash: self.hash,
        }
    }
}

impl CsPublicKey {
    pub fn width(&self) -> u64 {
        self.p.bits()
    }

    pub fn is_member(&self, m: &Natural) -> bool {
        !m.is_zero() && *m < self.p && m.modpow(&self.q, &self.p).is_one()
    }

    /// `alpha = H(u1, u2, e) mod q`.
    pub fn alpha(&self, u1: &Natural, u2: &Natural, e: &Natural) -> Natural {
        let w = byte_width(&self.p);
        let mut buf = Vec::with_capacity(3 * w);
        for x in [u1, u2, e] {
            buf.extend(to_fixed_be(x, w));
        }
        match self.hash {
            HashId::Sha256 => BigUint::from_bytes_be(&Sha256::digest(&buf)) % &self.q,
            HashId::Toy => BigUint::from_bytes_be(&buf) % &self.q,
        }
    }

    /// Encrypts with caller-supplied randomness `r < q`. The production path
    /// never passes `r = 0`.
    pub fn encrypt_with(
        &self,
        m: &Natural,
        r: &Natural,
        ledger: &mut CostLedger,
    ) -> Result<CsCiphertext, SchemeError> {
        if !self.is_member(m) {
            return Err(SchemeError::MessageOutsideSpace(
                "not in the order-q subgroup".into(),
            ));
        }
        if r >= &self.q {
            return Err(SchemeError::InvalidParameters(
                "randomness must be < q".into(),
            ));
        }
        let (p, w) = (&self.p, self.width());
        let u1 = mod_pow_ladder(&self.g1, r, p, w, ledger)?;
        let u2 = mod_pow_ladder(&self.g2, r, p, w, ledger)?;
        let hr = mod_pow_ladder(&self.h, r, p, w, ledger)?;
        let e = mod_mul(&hr, m, p, ledger)?;
        let alpha = self.alpha(&u1, &u2, &e);
        let r_alpha = (r * &alpha) % &self.q;
        let cr = mod_pow_ladder(&self.c, r, p, w, ledger)?;
        let dr = mod_pow_ladder(&self.d, &r_alpha, p, w, ledger)?;
        let v = mod_mul(&cr, &dr, p, ledger)?;
        Ok(CsCiphertext { u1, u2, e, v })
    }

    /// Subgroup element with the largest popcount below `p`. Candidates are
    /// all-ones words with zero, one, two, ... cleared bits, scanned in a
    /// fixed order, so the first member found is a maximum.
    pub fn max_popcount_element(&self) -> Natural {
        let w = self.width() as usize;
        let all_ones = (BigUint::one() << w) - 1u8;
        for cleared in 0..=w {
            let mut found = None;
            for_each_combination(w, cleared, &mut |positions| {
                let mut x = all_ones.clone();
                for &pos in positions {
                    x.set_bit(pos as u64, false);
                }
                if self.is_member(&x) {
                    found = Some(x);
                    true
                } else {
                    false
                }
            });
            if let Some(x) = found {
                return x;
            }
        }
        BigUint::one()
    }
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order until it
/// returns `true`.
fn for_each_combination(n: usize, k: usize, f: &mut dyn FnMut(&[usize]) -> bool) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if f(&idx) {
            return;
        }
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + n - k {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsScheme {
    pub group_bits: u64,
    pub hash: HashId,
}

impl CsScheme {
    pub fn new(group_bits: u64, hash: HashId) -> Result<Self, SchemeError> {
        if group_bits < 3 {
            return Err(SchemeError::InvalidParameters(
                "CS needs at least a 3-bit group modulus".into(),
            ));
        }
        Ok(Self { group_bits, hash })
    }

    /// Safe prime `p = 2q + 1` of exactly `group_bits` bits with `q >= 3`.
    pub fn gen_group(&self, rng: &mut dyn RngCore) -> Result<(Natural, Natural), SchemeError> {
        Ok(gen_safe_prime(self.group_bits, rng)?)
    }

    fn sample_generator(p: &Natural, q: &Natural, rng: &mut dyn RngCore) -> Natural {
        let two = BigUint::from(2u8);
        let p_minus_1 = p - 1u8;
        loop {
            let h = rng.gen_biguint_range(&two, &p_minus_1);
            let g = h.modpow(&two, p);
            if exact_order_q(&g, p, q) {
                return g;
            }
        }
    }
}

fn cs_pk(pk: &PublicKey) -> Result<&CsPublicKey, SchemeError> {
    match pk {
        PublicKey::Cs(pk) => Ok(pk),
        _ => Err(SchemeError::KeyMismatch(SchemeFamily::Cs)),
    }
}

fn cs_sk(sk: &SecretKey) -> Result<&CsSecretKey, SchemeError> {
    match sk {
        SecretKey::Cs(sk) => Ok(sk),
        _ => Err(SchemeError::KeyMismatch(SchemeFamily::Cs)),
    }
}

/// Decryption with an explicit comparison mode.
///
/// With [`Comparison::Full`] the accept and reject paths charge identical
/// costs. With [`Comparison::EarlyAbort`] the comparison charges one branch
/// unit per position inspected and returns at the first mismatch.
pub fn decrypt_cs(
    sk: &CsSecretKey,
    ct: &CsCiphertext,
    comparison: Comparison,
    ledger: &mut CostLedger,
) -> Result<Decryption, SchemeError> {
    let p = &sk.p;
    let q = &sk.q;
    let w = p.bits();
    let in_range = |x: &Natural| !x.is_zero() && x < p;
    let well_formed = [&ct.u1, &ct.u2, &ct.e, &ct.v].into_iter().all(in_range);
    if !well_formed && comparison == Comparison::EarlyAbort {
        return Ok(Decryption::Reject);
    }
    let one = BigUint::one();
    let pick = |x: &Natural| if in_range(x) { x.clone() } else { one.clone() };
    let (u1, u2, e, v) = (pick(&ct.u1), pick(&ct.u2), pick(&ct.e), pick(&ct.v));

    let pk = sk.public();
    let alpha = pk.alpha(&u1, &u2, &e);
    let e1 = (&sk.x1 + &sk.y1 * &alpha) % q;
    let e2 = (&sk.x2 + &sk.y2 * &alpha) % q;
    let a = mod_pow_ladder(&u1, &e1, p, w, ledger)?;
    let b = mod_pow_ladder(&u2, &e2, p, w, ledger)?;
    let expected = mod_mul(&a, &b, p, ledger)?;

    let width = byte_width(p);
    let lhs = to_fixed_be(&expected, width);
    let rhs = to_fixed_be(&v, width);
    let valid = match comparison {
        Comparison::Full => {
            ledger.charge_branch(width as u64);
            lhs.iter().zip(&rhs).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
        }
        Comparison::EarlyAbort => {
            for (x, y) in lhs.iter().zip(&rhs) {
                ledger.charge_branch(1);
                if x != y {
                    return Ok(Decryption::Reject);
                }
            }
            true
        }
    };

    let inv_exp = p - 1u8 - &sk.z;
    let mask = mod_pow_ladder(&u1, &inv_exp, p, w, ledger)?;
    let m = mod_mul(&e, &mask, p, ledger)?;
    if valid && well_formed {
        Ok(Decryption::Plaintext(Plaintext::Element(m)))
    } else {
        Ok(Decryption::Reject)
    }
}

/// Copy of `v` with one bit of big-endian byte `position` flipped, kept in
/// `[1, p - 1]`. The first differing byte is then exactly `position`.
pub fn flip_byte(v: &Natural, p: &Natural, position: usize) -> Option<Natural> {
    let width = byte_width(p);
    if position >= width {
        return None;
    }
    let shift = 8 * (width - 1 - position) as u64;
    (0..8u64).find_map(|bit| {
        let mut x = v.clone();
        let at = shift + bit;
        x.set_bit(at, !v.bit(at));
        (!x.is_zero() && x < *p).then_some(x)
    })
}

impl Scheme for CsScheme {
    fn name(&self) -> String {
        "cs".into()
    }

    fn family(&self) -> SchemeFamily {
        SchemeFamily::Cs
    }

    fn security_bits(&self) -> u64 {
        self.group_bits
    }

    fn message_space(&self) -> MessageSpace {
        MessageSpace::SubgroupElements {
            group_bits: self.group_bits,
        }
    }

    fn keygen(&self, rng: &mut dyn RngCore) -> Result<KeyPair, SchemeError> {
        let (p, q) = self.gen_group(rng)?;
        let g1 = Self::sample_generator(&p, &q, rng);
        let g2 = loop {
            let g = Self::sample_generator(&p, &q, rng);
            if g != g1 {
                break g;
            }
        };
        let exponents = [(); 5].map(|_| rng.gen_biguint_below(&q));
        let sk = CsSecretKey::from_parts(p, q, g1, g2, exponents, self.hash)?;
        Ok(KeyPair {
            pk: PublicKey::Cs(sk.public()),
            sk: SecretKey::Cs(sk),
            security_parameter: self.group_bits,
        })
    }

    fn encrypt(
        &self,
        pk: &PublicKey,
        m: &Plaintext,
        rng: &mut dyn RngCore,
        ledger: &mut CostLedger,
    ) -> Result<Ciphertext, SchemeError> {
        self.check_message(pk, m)?;
        let pk = cs_pk(pk)?;
        let Plaintext::Element(m) = m else {
            unreachable!("checked above")
        };
        let r = rng.gen_biguint_range(&BigUint::one(), &pk.q);
        Ok(Ciphertext::Cs(pk.encrypt_with(m, &r, ledger)?))
    }

    fn decrypt_with(
        &self,
        sk: &SecretKey,
        c: &Ciphertext,
        comparison: Comparison,
        ledger: &mut CostLedger,
    ) -> Result<Decryption, SchemeError> {
        let sk = cs_sk(sk)?;
        match c {
            Ciphertext::Cs(ct) => decrypt_cs(sk, ct, comparison, ledger),
            _ => Ok(Decryption::Reject),
        }
    }

    fn check_message(&self, pk: &PublicKey, m: &Plaintext) -> Result<(), SchemeError> {
        let pk = cs_pk(pk)?;
        match m {
            Plaintext::Element(x) if pk.is_member(x) => Ok(()),
            Plaintext::Element(_) => Err(SchemeError::MessageOutsideSpace(
                "not in the order-q subgroup".into(),
            )),
            Plaintext::Bits(_) => Err(SchemeError::MessageOutsideSpace(
                "CS encrypts group elements".into(),
            )),
        }
    }

    fn sample_message(
        &self,
        pk: &PublicKey,
        rng: &mut dyn RngCore,
    ) -> Result<Plaintext, SchemeError> {
        let pk = cs_pk(pk)?;
        let k = rng.gen_biguint_below(&pk.q);
        Ok(Plaintext::Element(pk.g1.modpow(&k, &pk.p)))
    }

    fn extreme_messages(&self, pk: &PublicKey) -> Result<(Plaintext, Plaintext), SchemeError> {
        let pk = cs_pk(pk)?;
        Ok((
            Plaintext::Element(BigUint::one()),
            Plaintext::Element(pk.max_popcount_element()),
        ))
    }

    fn invalid_probes(&self, pk: &PublicKey, valid: &Ciphertext) -> Vec<Ciphertext> {
        let (Ok(pk), Ciphertext::Cs(ct)) = (cs_pk(pk), valid) else {
            return Vec::new();
        };
        let mut probes: Vec<Ciphertext> = (0..byte_width(&pk.p))
            .filter_map(|i| flip_byte(&ct.v, &pk.p, i))
            .map(|v| Ciphertext::Cs(CsCiphertext { v, ..ct.clone() }))
            .collect();
        probes.push(Ciphertext::Cs(CsCiphertext {
            e: (&ct.e * &pk.g1) % &pk.p,
            ..ct.clone()
        }));
        probes
    }
}
