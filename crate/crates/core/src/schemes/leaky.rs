use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{
    Ciphertext, Comparison, Decryption, KeyPair, MessageSpace, Plaintext, PublicKey, Scheme,
    SchemeError, SchemeFamily, SecretKey,
};
use crate::numtheory::CostLedger;

/// How a [`LeakyScheme`] lets secrets show up in its cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LeakProfile {
    /// Extra branch units charged per set bit of the plaintext encoding.
    #[serde(default)]
    pub enc_leak: u64,
    /// Stop the decryption validity comparison at the first mismatch.
    #[serde(default)]
    pub dec_early_abort: bool,
}

impl LeakProfile {
    pub fn is_zero(&self) -> bool {
        self.enc_leak == 0 && !self.dec_early_abort
    }
}

/// Wraps a scheme so encryption cost grows with plaintext popcount and,
/// optionally, decryption rejects with an early-exit comparison.
#[derive(Debug, Clone)]
pub struct LeakyScheme {
    inner: Arc<dyn Scheme>,
    profile: LeakProfile,
}

impl LeakyScheme {
    pub fn new(inner: Arc<dyn Scheme>, profile: LeakProfile) -> Self {
        Self { inner, profile }
    }

    pub fn profile(&self) -> LeakProfile {
        self.profile
    }
}

impl Scheme for LeakyScheme {
    fn name(&self) -> String {
        format!(
            "leaky[{};enc_leak={};early_abort={}]",
            self.inner.name(),
            self.profile.enc_leak,
            self.profile.dec_early_abort
        )
    }

    fn family(&self) -> SchemeFamily {
        self.inner.family()
    }

    fn security_bits(&self) -> u64 {
        self.inner.security_bits()
    }

    fn message_space(&self) -> MessageSpace {
        self.inner.message_space()
    }

    fn keygen(&self, rng: &mut dyn RngCore) -> Result<KeyPair, SchemeError> {
        self.inner.keygen(rng)
    }

    fn encrypt(
        &self,
        pk: &PublicKey,
        m: &Plaintext,
        rng: &mut dyn RngCore,
        ledger: &mut CostLedger,
    ) -> Result<Ciphertext, SchemeError> {
        let c = self.inner.encrypt(pk, m, rng, ledger)?;
        ledger.charge_branch(self.profile.enc_leak * m.popcount());
        Ok(c)
    }

    fn decrypt_with(
        &self,
        sk: &SecretKey,
        c: &Ciphertext,
        comparison: Comparison,
        ledger: &mut CostLedger,
    ) -> Result<Decryption, SchemeError> {
        let comparison = if self.profile.dec_early_abort {
            Comparison::EarlyAbort
        } else {
            comparison
        };
        self.inner.decrypt_with(sk, c, comparison, ledger)
    }

    fn check_message(&self, pk: &PublicKey, m: &Plaintext) -> Result<(), SchemeError> {
        self.inner.check_message(pk, m)
    }

    fn sample_message(
        &self,
        pk: &PublicKey,
        rng: &mut dyn RngCore,
    ) -> Result<Plaintext, SchemeError> {
        self.inner.sample_message(pk, rng)
    }

    fn extreme_messages(&self, pk: &PublicKey) -> Result<(Plaintext, Plaintext), SchemeError> {
        self.inner.extreme_messages(pk)
    }

    fn invalid_probes(&self, pk: &PublicKey, valid: &Ciphertext) -> Vec<Ciphertext> {
        self.inner.invalid_probes(pk, valid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::{CsScheme, GmScheme, HashId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn encrypt_cost(s: &dyn Scheme, kp: &KeyPair, m: &Plaintext, seed: u64) -> (Ciphertext, u64) {
        let mut l = CostLedger::new();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let c = s.encrypt(&kp.pk, m, &mut rng, &mut l).unwrap();
        (c, l.total())
    }

    #[test]
    fn popcount_gap_is_linear() {
        let base: Arc<dyn Scheme> = Arc::new(GmScheme::new(16, 4).unwrap());
        let leaky = LeakyScheme::new(
            base,
            LeakProfile {
                enc_leak: 10,
                dec_early_abort: false,
            },
        );
        let kp = leaky.keygen(&mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        let (_, low) = encrypt_cost(&leaky, &kp, &Plaintext::from_bits(&[0, 0, 0, 0]), 2);
        let (_, high) = encrypt_cost(&leaky, &kp, &Plaintext::from_bits(&[1, 1, 1, 1]), 2);
        assert_eq!(high - low, 40);
    }

    #[test]
    fn zero_profile_is_identity() {
        let base: Arc<dyn Scheme> = Arc::new(CsScheme::new(32, HashId::Sha256).unwrap());
        let leaky = LeakyScheme::new(base.clone(), LeakProfile::default());
        let kp = base.keygen(&mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        let m = base
            .sample_message(&kp.pk, &mut ChaCha20Rng::seed_from_u64(4))
            .unwrap();
        let (c_base, cost_base) = encrypt_cost(base.as_ref(), &kp, &m, 5);
        let (c_leaky, cost_leaky) = encrypt_cost(&leaky, &kp, &m, 5);
        assert_eq!(c_base, c_leaky);
        assert_eq!(cost_base, cost_leaky);
        for c in std::iter::once(c_base.clone()).chain(base.invalid_probes(&kp.pk, &c_base)) {
            let (mut la, mut lb) = (CostLedger::new(), CostLedger::new());
            let da = base.decrypt(&kp.sk, &c, &mut la).unwrap();
            let db = leaky.decrypt(&kp.sk, &c, &mut lb).unwrap();
            assert_eq!(da, db);
            assert_eq!(la, lb);
        }
    }

    #[test]
    fn early_abort_reveals_mismatch_position() {
        let base: Arc<dyn Scheme> = Arc::new(CsScheme::new(32, HashId::Sha256).unwrap());
        let leaky = LeakyScheme::new(
            base.clone(),
            LeakProfile {
                enc_leak: 0,
                dec_early_abort: true,
            },
        );
        let kp = base.keygen(&mut ChaCha20Rng::seed_from_u64(6)).unwrap();
        let m = base
            .sample_message(&kp.pk, &mut ChaCha20Rng::seed_from_u64(7))
            .unwrap();
        let (c, _) = encrypt_cost(base.as_ref(), &kp, &m, 8);
        let probes = base.invalid_probes(&kp.pk, &c);
        let costs: Vec<u64> = probes[..4]
            .iter()
            .map(|p| {
                let mut l = CostLedger::new();
                assert_eq!(
                    leaky.decrypt(&kp.sk, p, &mut l).unwrap(),
                    Decryption::Reject
                );
                l.total()
            })
            .collect();
        assert!(costs[0] < costs[3], "{costs:?}");
    }
}
