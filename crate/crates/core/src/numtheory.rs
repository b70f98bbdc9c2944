//! Modular arithmetic with deterministic cost accounting.
//!
//! Every multiplication or squaring performed through [`mod_mul`] and the
//! exponentiation routines is charged to a caller-owned [`CostLedger`]. The
//! ledger total is the abstract "runtime" that timing-aware adversaries get
//! to observe, so anything that should be visible to them must go through
//! these functions.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Arbitrary-precision non-negative integer.
pub type Natural = BigUint;

/// Default Miller-Rabin round count.
pub const DEFAULT_MR_ROUNDS: usize = 20;

/// Upper bound on candidates drawn by [`gen_prime`] per requested bit.
const PRIME_ATTEMPTS_PER_BIT: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumError {
    #[error("modulus must be at least 2")]
    InvalidModulus,
    #[error("operand not reduced modulo n")]
    UnreducedOperand,
    #[error("exponent does not fit in a {0}-bit ladder")]
    ExponentTooWide(u64),
    #[error("jacobi symbol requires an odd modulus >= 3")]
    EvenModulus,
    #[error("bit size {0} too small")]
    TooFewBits(u64),
    #[error("prime search exhausted after {0} candidates")]
    SearchExhausted(usize),
}

/// Abstract-time accounting for one call scope.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CostLedger {
    pub modmul_count: u64,
    pub branch_count: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.modmul_count + self.branch_count
    }

    pub fn charge_modmul(&mut self, units: u64) {
        self.modmul_count += units;
    }

    pub fn charge_branch(&mut self, units: u64) {
        self.branch_count += units;
    }

    /// Adds another ledger's counters into this one.
    pub fn absorb(&mut self, other: &CostLedger) {
        self.modmul_count += other.modmul_count;
        self.branch_count += other.branch_count;
    }
}

fn check_modulus(n: &Natural) -> Result<(), NumError> {
    if *n < BigUint::from(2u8) {
        Err(NumError::InvalidModulus)
    } else {
        Ok(())
    }
}

/// `a * b mod n`, charging one modular multiplication.
pub fn mod_mul(
    a: &Natural,
    b: &Natural,
    n: &Natural,
    ledger: &mut CostLedger,
) -> Result<Natural, NumError> {
    check_modulus(n)?;
    if a >= n || b >= n {
        return Err(NumError::UnreducedOperand);
    }
    ledger.charge_modmul(1);
    Ok((a * b) % n)
}

/// Left-to-right square-and-multiply. The multiply step only happens for set
/// exponent bits, so the charged cost depends on the exponent's popcount.
pub fn mod_pow_leaky(
    base: &Natural,
    exp: &Natural,
    n: &Natural,
    ledger: &mut CostLedger,
) -> Result<Natural, NumError> {
    check_modulus(n)?;
    if base >= n {
        return Err(NumError::UnreducedOperand);
    }
    if exp.is_zero() {
        return Ok(BigUint::one() % n);
    }
    let bits = exp.bits();
    let mut acc = base.clone();
    for i in (0..bits - 1).rev() {
        acc = mod_mul(&acc, &acc, n, ledger)?;
        if exp.bit(i) {
            acc = mod_mul(&acc, base, n, ledger)?;
        }
    }
    Ok(acc)
}

/// Montgomery ladder over a fixed `width` bits. Every step performs one
/// multiplication and one squaring whatever the bit value, so the charged
/// cost is always `2 * width`.
pub fn mod_pow_ladder(
    base: &Natural,
    exp: &Natural,
    n: &Natural,
    width: u64,
    ledger: &mut CostLedger,
) -> Result<Natural, NumError> {
    check_modulus(n)?;
    if base >= n {
        return Err(NumError::UnreducedOperand);
    }
    if exp.bits() > width {
        return Err(NumError::ExponentTooWide(width));
    }
    let mut r0 = BigUint::one() % n;
    let mut r1 = base.clone();
    for i in (0..width).rev() {
        // Both arms do the same work; only the operand roles swap.
        if exp.bit(i) {
            r0 = mod_mul(&r0, &r1, n, ledger)?;
            r1 = mod_mul(&r1, &r1, n, ledger)?;
        } else {
            r1 = mod_mul(&r0, &r1, n, ledger)?;
            r0 = mod_mul(&r0, &r0, n, ledger)?;
        }
    }
    Ok(r0)
}

/// Jacobi symbol `(a/n)` for odd `n >= 3`.
pub fn jacobi(a: &Natural, n: &Natural) -> Result<i8, NumError> {
    if n.is_even() || *n < BigUint::from(3u8) {
        return Err(NumError::EvenModulus);
    }
    let mut a = a % n;
    let mut n = n.clone();
    let mut sign = 1i8;
    while !a.is_zero() {
        let twos = a.trailing_zeros().unwrap_or(0);
        a >>= twos;
        let n_mod_8 = (&n % 8u8).to_u8_lossy();
        if twos % 2 == 1 && (n_mod_8 == 3 || n_mod_8 == 5) {
            sign = -sign;
        }
        // reciprocity
        if (&a % 4u8).to_u8_lossy() == 3 && (&n % 4u8).to_u8_lossy() == 3 {
            sign = -sign;
        }
        std::mem::swap(&mut a, &mut n);
        a %= &n;
    }
    Ok(if n.is_one() { sign } else { 0 })
}

trait LowByte {
    fn to_u8_lossy(&self) -> u8;
}

impl LowByte for BigUint {
    fn to_u8_lossy(&self) -> u8 {
        self.to_bytes_le()[0]
    }
}

const SMALL_PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Miller-Rabin with `rounds` random bases drawn from `rng`.
pub fn is_probable_prime(n: &Natural, rounds: usize, rng: &mut dyn RngCore) -> bool {
    let two = BigUint::from(2u8);
    if *n < two {
        return false;
    }
    for &p in SMALL_PRIMES.iter() {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u8;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let upper = n - 1u8; // bases drawn from [2, n-2]

    'witness: for _ in 0..rounds.max(1) {
        let a = rng.gen_biguint_range(&two, &upper);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Residue condition `value ≡ residue (mod modulus)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Congruence {
    pub residue: u64,
    pub modulus: u64,
}

impl Congruence {
    pub const BLUM: Congruence = Congruence {
        residue: 3,
        modulus: 4,
    };

    pub fn holds(&self, n: &Natural) -> bool {
        n % self.modulus == BigUint::from(self.residue % self.modulus)
    }
}

/// Random probable prime with exactly `bits` bits.
pub fn gen_prime(
    bits: u64,
    congruence: Option<Congruence>,
    rng: &mut dyn RngCore,
) -> Result<Natural, NumError> {
    if bits < 2 {
        return Err(NumError::TooFewBits(bits));
    }
    let lo = BigUint::one() << (bits - 1);
    let hi = BigUint::one() << bits;
    let attempts = PRIME_ATTEMPTS_PER_BIT * bits as usize;
    for _ in 0..attempts {
        let mut candidate = rng.gen_biguint_range(&lo, &hi);
        if bits > 2 {
            candidate |= BigUint::one();
        }
        if let Some(cond) = congruence {
            if !cond.holds(&candidate) {
                continue;
            }
        }
        if is_probable_prime(&candidate, DEFAULT_MR_ROUNDS, rng) {
            return Ok(candidate);
        }
    }
    Err(NumError::SearchExhausted(attempts))
}

/// Random safe prime `p = 2q + 1` with exactly `bits` bits and `q >= 3`
/// prime. Returns `(p, q)`.
pub fn gen_safe_prime(bits: u64, rng: &mut dyn RngCore) -> Result<(Natural, Natural), NumError> {
    if bits < 3 {
        return Err(NumError::TooFewBits(bits));
    }
    let lo = BigUint::one() << (bits - 2);
    let hi = BigUint::one() << (bits - 1);
    let attempts = PRIME_ATTEMPTS_PER_BIT * bits as usize;
    'candidate: for _ in 0..attempts {
        let q = rng.gen_biguint_range(&lo, &hi) | BigUint::one();
        let p = (&q << 1u8) + 1u8;
        // Cheap rejections first: a small factor of q or of 2q + 1.
        for &sp in &SMALL_PRIMES[1..] {
            let r = (&q % sp).to_u32().unwrap_or(0);
            if (r == 0 && q != BigUint::from(sp))
                || ((2 * r + 1).is_multiple_of(sp) && p != BigUint::from(sp))
            {
                continue 'candidate;
            }
        }
        if is_probable_prime(&q, 1, rng)
            && is_probable_prime(&p, 1, rng)
            && is_probable_prime(&q, DEFAULT_MR_ROUNDS, rng)
            && is_probable_prime(&p, DEFAULT_MR_ROUNDS, rng)
        {
            return Ok((p, q));
        }
    }
    Err(NumError::SearchExhausted(attempts))
}

/// Big-endian encoding padded on the left to `width` bytes.
pub fn to_fixed_be(value: &Natural, width: usize) -> Vec<u8> {
    let raw = value.to_bytes_be();
    let raw: &[u8] = if value.is_zero() { &[] } else { &raw };
    let mut out = vec![0u8; width.saturating_sub(raw.len())];
    out.extend_from_slice(raw);
    out
}

/// Byte width of `n`'s big-endian encoding.
pub fn byte_width(n: &Natural) -> usize {
    n.bits().div_ceil(8) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn n(v: u64) -> Natural {
        BigUint::from(v)
    }

    fn naive_pow(base: u64, exp: u64, m: u64) -> u64 {
        let mut acc = 1 % m;
        for _ in 0..exp {
            acc = acc * base % m;
        }
        acc
    }

    fn legendre_by_table(a: u64, p: u64) -> i8 {
        let a = a % p;
        if a == 0 {
            return 0;
        }
        if (1..p).any(|x| x * x % p == a) {
            1
        } else {
            -1
        }
    }

    #[test]
    fn mod_mul_examples() {
        let mut l = CostLedger::new();
        assert_eq!(mod_mul(&n(3), &n(4), &n(21), &mut l).unwrap(), n(12));
        assert_eq!(mod_mul(&n(0), &n(5), &n(7), &mut l).unwrap(), n(0));
        assert_eq!(
            mod_mul(&n(20), &n(20), &n(21), &mut l).unwrap(),
            n(400 % 21)
        );
        assert_eq!(400 % 21, 1);
        assert_eq!(l.modmul_count, 3);
        assert_eq!(l.total(), 3);
    }

    #[test]
    fn mod_mul_rejects_bad_modulus() {
        let mut l = CostLedger::new();
        assert_eq!(
            mod_mul(&n(0), &n(0), &n(1), &mut l),
            Err(NumError::InvalidModulus)
        );
        assert_eq!(
            mod_mul(&n(0), &n(0), &n(0), &mut l),
            Err(NumError::InvalidModulus)
        );
        assert_eq!(
            mod_mul(&n(7), &n(1), &n(7), &mut l),
            Err(NumError::UnreducedOperand)
        );
        assert_eq!(l.total(), 0);
    }

    #[test]
    fn leaky_pow_examples() {
        let mut l = CostLedger::new();
        assert_eq!(mod_pow_leaky(&n(3), &n(0), &n(7), &mut l).unwrap(), n(1));
        assert_eq!(l.total(), 0);

        let mut l = CostLedger::new();
        assert_eq!(naive_pow(2, 10, 1000), 24);
        assert_eq!(
            mod_pow_leaky(&n(2), &n(10), &n(1000), &mut l).unwrap(),
            n(24)
        );
        assert_eq!(l.modmul_count, 4);

        let mut l = CostLedger::new();
        assert_eq!(naive_pow(5, 117, 19), 1);
        assert_eq!(mod_pow_leaky(&n(5), &n(117), &n(19), &mut l).unwrap(), n(1));
        // 117 = 0b1110101: 6 squarings + 4 multiplies
        assert_eq!(l.modmul_count, 10);
    }

    #[test]
    fn ladder_examples() {
        let mut l = CostLedger::new();
        assert_eq!(
            mod_pow_ladder(&n(2), &n(10), &n(1000), 8, &mut l).unwrap(),
            n(24)
        );
        assert_eq!(l.modmul_count, 16);

        let mut l = CostLedger::new();
        mod_pow_ladder(&n(2), &n(255), &n(1000), 8, &mut l).unwrap();
        assert_eq!(l.modmul_count, 16);

        let mut l = CostLedger::new();
        assert_eq!(
            mod_pow_ladder(&n(3), &n(0), &n(7), 8, &mut l).unwrap(),
            n(1)
        );
        assert_eq!(l.modmul_count, 16);
    }

    #[test]
    fn ladder_rejects_wide_exponent() {
        let mut l = CostLedger::new();
        assert_eq!(
            mod_pow_ladder(&n(2), &n(256), &n(1000), 8, &mut l),
            Err(NumError::ExponentTooWide(8))
        );
    }

    #[test]
    fn jacobi_examples() {
        assert_eq!(jacobi(&n(1), &n(15)).unwrap(), 1);
        assert_eq!(legendre_by_table(2, 3) * legendre_by_table(2, 5), 1);
        assert_eq!(jacobi(&n(2), &n(15)).unwrap(), 1);
        assert_eq!(legendre_by_table(5, 3) * legendre_by_table(5, 7), 1);
        assert_eq!(jacobi(&n(5), &n(21)).unwrap(), 1);
        assert_eq!(jacobi(&n(6), &n(21)).unwrap(), 0);
        assert_eq!(jacobi(&n(3), &n(14)), Err(NumError::EvenModulus));
    }

    #[test]
    fn jacobi_matches_legendre_products() {
        let primes = [3u64, 5, 7, 11, 13, 17, 19, 23];
        for (i, &p) in primes.iter().enumerate() {
            for &q in &primes[i..] {
                let m = p * q;
                for a in 0..m {
                    let expected = legendre_by_table(a, p) * legendre_by_table(a, q);
                    assert_eq!(jacobi(&n(a), &n(m)).unwrap(), expected, "({a}/{m})");
                }
            }
        }
    }

    #[test]
    fn primality_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(is_probable_prime(&n(7), 20, &mut rng));
        assert!(!is_probable_prime(&n(21), 20, &mut rng));
        let m = (1u64 << 31) - 1;
        let trial_division = (2..=46341u64)
            .take_while(|d| d * d <= m)
            .all(|d| !m.is_multiple_of(d));
        assert!(trial_division);
        assert!(is_probable_prime(&n(m), 20, &mut rng));
        // Carmichael number
        assert!(!is_probable_prime(&n(561), 20, &mut rng));
    }

    #[test]
    fn primality_agrees_with_trial_division() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for v in 2u64..5000 {
            let td = (2..v)
                .take_while(|d| d * d <= v)
                .all(|d| !v.is_multiple_of(d));
            assert_eq!(is_probable_prime(&n(v), 20, &mut rng), td, "{v}");
        }
    }

    #[test]
    fn gen_prime_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        // 3-bit candidates are 4..=7; primes 5 ≡ 1 and 7 ≡ 3 (mod 4)
        let scan: Vec<u64> = (4..8u64)
            .filter(|v| (2..*v).all(|d| *v % d != 0) && v % 4 == 3)
            .collect();
        assert_eq!(scan, vec![7]);
        assert_eq!(
            gen_prime(3, Some(Congruence::BLUM), &mut rng).unwrap(),
            n(7)
        );

        let p = gen_prime(2, None, &mut rng).unwrap();
        assert!(p == n(2) || p == n(3));

        let a = gen_prime(16, None, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        let b = gen_prime(16, None, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.bits(), 16);
    }

    #[test]
    fn safe_primes_match_trial_division() {
        let prime = |v: u64| {
            v >= 2
                && (2..)
                    .take_while(|d| d * d <= v)
                    .all(|d| !v.is_multiple_of(d))
        };
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        // 3 bits: only 7 = 2*3 + 1
        assert_eq!(gen_safe_prime(3, &mut rng).unwrap(), (n(7), n(3)));
        for bits in [4u64, 5, 8, 12, 20, 32] {
            for _ in 0..20 {
                let (p, q) = gen_safe_prime(bits, &mut rng).unwrap();
                let (p, q) = (p.to_u64().unwrap(), q.to_u64().unwrap());
                assert_eq!(p, 2 * q + 1);
                assert_eq!(64 - p.leading_zeros() as u64, bits);
                assert!(q >= 3 && prime(q) && prime(p), "{p} {q}");
            }
        }
        assert_eq!(gen_safe_prime(2, &mut rng), Err(NumError::TooFewBits(2)));
    }

    #[test]
    fn gen_prime_exhausts_on_unsatisfiable_condition() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let cond = Congruence {
            residue: 1,
            modulus: 4,
        };
        assert!(matches!(
            gen_prime(2, Some(cond), &mut rng),
            Err(NumError::SearchExhausted(_))
        ));
        assert_eq!(gen_prime(1, None, &mut rng), Err(NumError::TooFewBits(1)));
    }

    #[test]
    fn fixed_width_encoding() {
        assert_eq!(to_fixed_be(&n(0), 2), vec![0, 0]);
        assert_eq!(to_fixed_be(&n(0x1234), 4), vec![0, 0, 0x12, 0x34]);
        assert_eq!(byte_width(&n(0x1ff)), 2);
    }
}
