//! Goldwasser-Micali probabilistic encryption over a Blum modulus.
//!
//! A bit `b` encrypts to `y^b * r^2 mod N` where `y` is a pseudo-square. The
//! multiplication by `y^b` is always performed (by `1` when `b = 0`) so the
//! ledger cost per bit is constant.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, RngCore};

use super::{
    Ciphertext, Comparison, Decryption, KeyPair, MessageSpace, Plaintext, PublicKey, Scheme,
    SchemeError, SchemeFamily, SecretKey,
};
use crate::numtheory::{
    gen_prime, jacobi, mod_mul, mod_pow_ladder, Congruence, CostLedger, Natural,
};

const PSEUDO_SQUARE_ATTEMPTS: usize = 10_000;
const DISTINCT_PRIME_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GmPublicKey {
    pub n: Natural,
    pub y: Natural,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GmSecretKey {
    pub p: Natural,
    pub q: Natural,
    pub y: Natural,
}

impl GmSecretKey {
    /// Builds a key from Blum primes and a pseudo-square, checking all
    /// key invariants.
    pub fn from_parts(p: Natural, q: Natural, y: Natural) -> Result<Self, SchemeError> {
        let cond = Congruence::BLUM;
        if p == q || !cond.holds(&p) || !cond.holds(&q) {
            return Err(SchemeError::InvalidParameters(
                "GM primes must be distinct and congruent to 3 mod 4".into(),
            ));
        }
        if !is_pseudo_square(&y, &p, &q) {
            return Err(SchemeError::InvalidParameters(format!(
                "{y} is not a pseudo-square modulo {}",
                &p * &q
            )));
        }
        Ok(Self { p, q, y })
    }

    pub fn public(&self) -> GmPublicKey {
        GmPublicKey {
            n: &self.p * &self.q,
            y: self.y.clone(),
        }
    }
}

/// `y` has Jacobi symbol 1 modulo `pq` but is a non-residue modulo both primes.
pub fn is_pseudo_square(y: &Natural, p: &Natural, q: &Natural) -> bool {
    let n = p * q;
    if y.is_zero() || *y >= n {
        return false;
    }
    matches!(
        (jacobi(y, p), jacobi(y, q), jacobi(y, &n)),
        (Ok(-1), Ok(-1), Ok(1))
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GmScheme {
    pub prime_bits: u64,
    pub message_bits: usize,
}

impl GmScheme {
    pub fn new(prime_bits: u64, message_bits: usize) -> Result<Self, SchemeError> {
        if prime_bits < 3 {
            return Err(SchemeError::InvalidParameters(
                "GM needs at least 3-bit primes".into(),
            ));
        }
        if message_bits == 0 {
            return Err(SchemeError::InvalidParameters(
                "GM messages need at least one bit".into(),
            ));
        }
        Ok(Self {
            prime_bits,
            message_bits,
        })
    }
}

fn gm_pk(pk: &PublicKey) -> Result<&GmPublicKey, SchemeError> {
    match pk {
        PublicKey::Gm(pk) => Ok(pk),
        _ => Err(SchemeError::KeyMismatch(SchemeFamily::Gm)),
    }
}

fn gm_sk(sk: &SecretKey) -> Result<&GmSecretKey, SchemeError> {
    match sk {
        SecretKey::Gm(sk) => Ok(sk),
        _ => Err(SchemeError::KeyMismatch(SchemeFamily::Gm)),
    }
}

/// Samples a unit `r` modulo `n`.
pub fn sample_unit(n: &Natural, rng: &mut dyn RngCore) -> Natural {
    loop {
        let r = rng.gen_biguint_range(&BigUint::one(), n);
        if r.gcd(n).is_one() {
            return r;
        }
    }
}

/// Encrypts one bit with explicit randomness `r` (a unit mod N).
pub fn encrypt_bit_with(
    pk: &GmPublicKey,
    bit: bool,
    r: &Natural,
    ledger: &mut CostLedger,
) -> Result<Natural, SchemeError> {
    let r = r % &pk.n;
    let square = mod_mul(&r, &r, &pk.n, ledger)?;
    let factor = if bit { pk.y.clone() } else { BigUint::one() };
    Ok(mod_mul(&square, &factor, &pk.n, ledger)?)
}

/// Quadratic-residuosity test of one component modulo `p` by Euler's
/// criterion. Returns the decrypted bit.
fn decrypt_component(
    sk: &GmSecretKey,
    c: &Natural,
    ledger: &mut CostLedger,
) -> Result<bool, SchemeError> {
    let exponent = (&sk.p - 1u8) >> 1;
    let residue = c % &sk.p;
    let euler = mod_pow_ladder(&residue, &exponent, &sk.p, sk.p.bits(), ledger)?;
    Ok(!euler.is_one())
}

impl Scheme for GmScheme {
    fn name(&self) -> String {
        "gm".into()
    }

    fn family(&self) -> SchemeFamily {
        SchemeFamily::Gm
    }

    fn security_bits(&self) -> u64 {
        self.prime_bits
    }

    fn message_space(&self) -> MessageSpace {
        MessageSpace::BitStrings {
            length: self.message_bits,
        }
    }

    fn keygen(&self, rng: &mut dyn RngCore) -> Result<KeyPair, SchemeError> {
        let p = gen_prime(self.prime_bits, Some(Congruence::BLUM), rng)?;
        let mut q = None;
        for _ in 0..DISTINCT_PRIME_ATTEMPTS {
            let candidate = gen_prime(self.prime_bits, Some(Congruence::BLUM), rng)?;
            if candidate != p {
                q = Some(candidate);
                break;
            }
        }
        let q = q.ok_or(SchemeError::KeygenExhausted(DISTINCT_PRIME_ATTEMPTS))?;
        let n = &p * &q;
        let two = BigUint::from(2u8);
        for _ in 0..PSEUDO_SQUARE_ATTEMPTS {
            let y = rng.gen_biguint_range(&two, &n);
            if is_pseudo_square(&y, &p, &q) {
                let sk = GmSecretKey { p, q, y };
                return Ok(KeyPair {
                    pk: PublicKey::Gm(sk.public()),
                    sk: SecretKey::Gm(sk),
                    security_parameter: self.prime_bits,
                });
            }
        }
        Err(SchemeError::KeygenExhausted(PSEUDO_SQUARE_ATTEMPTS))
    }

    fn encrypt(
        &self,
        pk: &PublicKey,
        m: &Plaintext,
        rng: &mut dyn RngCore,
        ledger: &mut CostLedger,
    ) -> Result<Ciphertext, SchemeError> {
        self.check_message(pk, m)?;
        let pk = gm_pk(pk)?;
        let Plaintext::Bits(bits) = m else {
            unreachable!("checked above")
        };
        let mut out = Vec::with_capacity(bits.len());
        for &bit in bits {
            let r = sample_unit(&pk.n, rng);
            out.push(encrypt_bit_with(pk, bit, &r, ledger)?);
        }
        Ok(Ciphertext::Gm(out))
    }

    fn decrypt_with(
        &self,
        sk: &SecretKey,
        c: &Ciphertext,
        _comparison: Comparison,
        ledger: &mut CostLedger,
    ) -> Result<Decryption, SchemeError> {
        let sk = gm_sk(sk)?;
        let Ciphertext::Gm(components) = c else {
            return Ok(Decryption::Reject);
        };
        let n = &sk.p * &sk.q;
        let mut bits = Vec::with_capacity(components.len());
        let mut reject = components.len() != self.message_bits;
        let one = BigUint::one();
        for component in components {
            // Bad components are replaced so the ledgered work stays the same.
            let usable = *component < n && component.gcd(&n).is_one();
            reject |= !usable;
            let value = if usable { component } else { &one };
            bits.push(decrypt_component(sk, value, ledger)?);
        }
        if reject {
            Ok(Decryption::Reject)
        } else {
            Ok(Decryption::Plaintext(Plaintext::Bits(bits)))
        }
    }

    fn check_message(&self, pk: &PublicKey, m: &Plaintext) -> Result<(), SchemeError> {
        gm_pk(pk)?;
        match m {
            Plaintext::Bits(bits) if bits.len() == self.message_bits => Ok(()),
            Plaintext::Bits(bits) => Err(SchemeError::MessageOutsideSpace(format!(
                "expected {} bits, got {}",
                self.message_bits,
                bits.len()
            ))),
            Plaintext::Element(_) => Err(SchemeError::MessageOutsideSpace(
                "GM encrypts bit strings".into(),
            )),
        }
    }

    fn sample_message(
        &self,
        pk: &PublicKey,
        rng: &mut dyn RngCore,
    ) -> Result<Plaintext, SchemeError> {
        gm_pk(pk)?;
        Ok(Plaintext::Bits(
            (0..self.message_bits).map(|_| rng.gen::<bool>()).collect(),
        ))
    }

    fn extreme_messages(&self, pk: &PublicKey) -> Result<(Plaintext, Plaintext), SchemeError> {
        gm_pk(pk)?;
        Ok((
            Plaintext::Bits(vec![false; self.message_bits]),
            Plaintext::Bits(vec![true; self.message_bits]),
        ))
    }

    fn invalid_probes(&self, pk: &PublicKey, valid: &Ciphertext) -> Vec<Ciphertext> {
        let (Ok(pk), Ciphertext::Gm(components)) = (gm_pk(pk), valid) else {
            return Vec::new();
        };
        let mut probes = Vec::new();
        for bad in [BigUint::zero(), pk.n.clone()] {
            let mut mutated = components.clone();
            if let Some(first) = mutated.first_mut() {
                *first = bad;
            }
            probes.push(Ciphertext::Gm(mutated));
        }
        probes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn n(v: u64) -> Natural {
        BigUint::from(v)
    }

    fn tiny_key() -> GmSecretKey {
        GmSecretKey::from_parts(n(3), n(7), n(5)).unwrap()
    }

    fn residues(p: u64) -> Vec<u64> {
        (1..p).map(|x| x * x % p).collect()
    }

    #[test]
    fn tiny_pseudo_square() {
        // 5 mod 3 = 2 and 5 mod 7 = 5 are outside the residue tables
        assert!(!residues(3).contains(&(5 % 3)));
        assert!(!residues(7).contains(&5));
        assert_eq!(jacobi(&n(5), &n(21)).unwrap(), 1);
        assert!(is_pseudo_square(&n(5), &n(3), &n(7)));
        assert!(!is_pseudo_square(&n(4), &n(3), &n(7)));
        assert!(GmSecretKey::from_parts(n(3), n(7), n(4)).is_err());
        assert_eq!(tiny_key().public().n, n(21));
    }

    #[test]
    fn tiny_encryptions() {
        let sk = tiny_key();
        let pk = sk.public();
        let mut l = CostLedger::new();
        let c0 = encrypt_bit_with(&pk, false, &n(2), &mut l).unwrap();
        let c1 = encrypt_bit_with(&pk, true, &n(2), &mut l).unwrap();
        assert_eq!(c0, n(4));
        assert_eq!(c1, n(20));
        assert_eq!(jacobi(&c0, &n(21)).unwrap(), 1);
        assert_eq!(jacobi(&c1, &n(21)).unwrap(), 1);
        assert_eq!(l.modmul_count, 4);
    }

    #[test]
    fn tiny_decryptions() {
        let scheme = GmScheme::new(3, 1).unwrap();
        let sk = SecretKey::Gm(tiny_key());
        let mut l = CostLedger::new();
        let d0 = scheme
            .decrypt(&sk, &Ciphertext::Gm(vec![n(4)]), &mut l)
            .unwrap();
        let d1 = scheme
            .decrypt(&sk, &Ciphertext::Gm(vec![n(20)]), &mut l)
            .unwrap();
        assert_eq!(d0, Decryption::Plaintext(Plaintext::from_bits(&[0])));
        assert_eq!(d1, Decryption::Plaintext(Plaintext::from_bits(&[1])));
        // 6 shares the factor 3 with N
        let d = scheme
            .decrypt(&sk, &Ciphertext::Gm(vec![n(6)]), &mut l)
            .unwrap();
        assert_eq!(d, Decryption::Reject);
    }

    #[test]
    fn reject_costs_same_as_accept() {
        let scheme = GmScheme::new(3, 1).unwrap();
        let sk = SecretKey::Gm(tiny_key());
        let mut ok = CostLedger::new();
        let mut bad = CostLedger::new();
        scheme
            .decrypt(&sk, &Ciphertext::Gm(vec![n(4)]), &mut ok)
            .unwrap();
        scheme
            .decrypt(&sk, &Ciphertext::Gm(vec![n(0)]), &mut bad)
            .unwrap();
        assert_eq!(ok, bad);
    }

    #[test]
    fn round_trip_over_random_keys() {
        let scheme = GmScheme::new(8, 2).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let kp = scheme.keygen(&mut rng).unwrap();
            let m = scheme.sample_message(&kp.pk, &mut rng).unwrap();
            let mut l = CostLedger::new();
            let c = scheme.encrypt(&kp.pk, &m, &mut rng, &mut l).unwrap();
            let d = scheme.decrypt(&kp.sk, &c, &mut l).unwrap();
            assert_eq!(d, Decryption::Plaintext(m));
        }
    }

    #[test]
    fn keygen_is_deterministic_and_valid() {
        let scheme = GmScheme::new(16, 8).unwrap();
        let a = scheme.keygen(&mut ChaCha20Rng::seed_from_u64(5)).unwrap();
        let b = scheme.keygen(&mut ChaCha20Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let SecretKey::Gm(sk) = &a.sk else { panic!() };
        assert!(is_pseudo_square(&sk.y, &sk.p, &sk.q));
        assert_eq!(sk.p.bits(), 16);
        assert_eq!(a.sk.public(), a.pk);
    }

    #[test]
    fn three_bit_keygen_exhausts() {
        // 7 is the only 3-bit Blum prime, so no distinct pair exists
        let scheme = GmScheme::new(3, 1).unwrap();
        let err = scheme
            .keygen(&mut ChaCha20Rng::seed_from_u64(1))
            .unwrap_err();
        assert!(matches!(err, SchemeError::KeygenExhausted(_)));
    }

    #[test]
    fn wrong_length_message_is_rejected() {
        let scheme = GmScheme::new(8, 4).unwrap();
        let pk = PublicKey::Gm(tiny_key().public());
        let err = scheme
            .check_message(&pk, &Plaintext::from_bits(&[1, 0]))
            .unwrap_err();
        assert!(matches!(err, SchemeError::MessageOutsideSpace(_)));
    }
}
