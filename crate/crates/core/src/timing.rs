//! Adversary-visible timing, network delay, and the fixed-time wrapper.
//!
//! "Runtime" is the [`CostLedger`] total of a call. [`FixedTimeScheme`] pads
//! every encryption and every decryption (accepted, rejected, or malformed)
//! to a configured budget, and [`calibrate_worst_case`] picks those budgets
//! as the maximum cost seen over a sample population.

use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numtheory::CostLedger;
use crate::schemes::{
    Ciphertext, Comparison, Decryption, KeyPair, MessageSpace, OpKind, Plaintext, PublicKey,
    Scheme, SchemeError, SchemeFamily, SecretKey,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimingError {
    #[error("calibration sample has no {0} inputs")]
    EmptySample(OpKind),
    #[error("fixed-time budgets must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Phase1,
    Challenge,
    Phase2,
}

/// What a timing-capable adversary sees for one interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingView {
    pub op_kind: OpKind,
    pub compute_cost: u64,
    pub network_delay_out: u64,
    pub network_delay_back: u64,
    pub phase: Phase,
    /// Host wall-clock nanoseconds, only when wall-clock mode is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ns: Option<u64>,
}

impl TimingView {
    /// Round-trip time as observed on the wire.
    pub fn observed_total(&self) -> u64 {
        self.compute_cost + self.network_delay_out + self.network_delay_back
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedTimeConfig {
    pub t_ft_encrypt: u64,
    pub t_ft_decrypt: u64,
}

impl FixedTimeConfig {
    pub fn new(t_ft_encrypt: u64, t_ft_decrypt: u64) -> Result<Self, TimingError> {
        if t_ft_encrypt == 0 || t_ft_decrypt == 0 {
            return Err(TimingError::ZeroBudget);
        }
        Ok(Self {
            t_ft_encrypt,
            t_ft_decrypt,
        })
    }

    pub fn budget(&self, op: OpKind) -> u64 {
        match op {
            OpKind::Encrypt => self.t_ft_encrypt,
            OpKind::Decrypt => self.t_ft_decrypt,
        }
    }
}

/// `delay = base + per_byte * len + jitter(index)`, jitter uniform in
/// `[0, jitter_max]` and seeded per message index.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DelayModel {
    #[serde(default)]
    pub base: u64,
    #[serde(default)]
    pub per_byte: u64,
    #[serde(default)]
    pub jitter_max: u64,
    #[serde(default)]
    pub jitter_seed: u64,
}

impl DelayModel {
    pub fn constant(base: u64) -> Self {
        Self {
            base,
            ..Self::default()
        }
    }

    pub fn jitter(&self, index: u64) -> u64 {
        if self.jitter_max == 0 {
            return 0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.jitter_seed);
        rng.set_stream(index);
        rng.gen_range(0..=self.jitter_max)
    }
}

pub fn network_delay(model: &DelayModel, message_bytes: usize, index: u64) -> u64 {
    model.base + model.per_byte * message_bytes as u64 + model.jitter(index)
}

/// Pads every call of the inner scheme to a fixed ledger cost.
///
/// The padding is charged as dummy multiplications after the inner call. A
/// call whose own cost exceeds its budget fails with
/// [`SchemeError::BudgetOverflow`] instead of being clamped.
#[derive(Debug, Clone)]
pub struct FixedTimeScheme {
    inner: Arc<dyn Scheme>,
    cfg: FixedTimeConfig,
}

pub fn wrap_fixed_time(inner: Arc<dyn Scheme>, cfg: FixedTimeConfig) -> FixedTimeScheme {
    FixedTimeScheme { inner, cfg }
}

impl FixedTimeScheme {
    pub fn config(&self) -> FixedTimeConfig {
        self.cfg
    }

    fn pad(
        &self,
        op: OpKind,
        inner: &CostLedger,
        ledger: &mut CostLedger,
    ) -> Result<(), SchemeError> {
        let budget = self.cfg.budget(op);
        let cost = inner.total();
        if cost > budget {
            return Err(SchemeError::BudgetOverflow { op, cost, budget });
        }
        ledger.absorb(inner);
        ledger.charge_modmul(budget - cost);
        Ok(())
    }
}

impl Scheme for FixedTimeScheme {
    fn name(&self) -> String {
        format!(
            "fixed_time[{};t_enc={};t_dec={}]",
            self.inner.name(),
            self.cfg.t_ft_encrypt,
            self.cfg.t_ft_decrypt
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
        let mut local = CostLedger::new();
        let out = self.inner.encrypt(pk, m, rng, &mut local);
        self.pad(OpKind::Encrypt, &local, ledger)?;
        out
    }

    fn decrypt_with(
        &self,
        sk: &SecretKey,
        c: &Ciphertext,
        comparison: Comparison,
        ledger: &mut CostLedger,
    ) -> Result<Decryption, SchemeError> {
        let mut local = CostLedger::new();
        let out = self.inner.decrypt_with(sk, c, comparison, &mut local);
        self.pad(OpKind::Decrypt, &local, ledger)?;
        out
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

/// Inputs over which worst-case costs are measured.
#[derive(Debug, Clone, Default)]
pub struct CalibrationSample {
    pub encrypt: Vec<(PublicKey, Plaintext)>,
    pub decrypt: Vec<(SecretKey, Ciphertext)>,
}

impl CalibrationSample {
    /// Draws `keys` fresh key pairs; per key, `messages_per_key` random
    /// messages plus both extreme-popcount messages. Each message is
    /// encrypted once and the ciphertext, together with the scheme's invalid
    /// probes derived from it, goes into the decryption sample.
    pub fn draw(
        scheme: &dyn Scheme,
        keys: usize,
        messages_per_key: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self, SchemeError> {
        let mut sample = Self::default();
        for _ in 0..keys {
            let kp = scheme.keygen(rng)?;
            let (lo, hi) = scheme.extreme_messages(&kp.pk)?;
            let mut messages = vec![lo, hi];
            for _ in 0..messages_per_key {
                messages.push(scheme.sample_message(&kp.pk, rng)?);
            }
            for m in messages {
                let c = scheme.encrypt(&kp.pk, &m, rng, &mut CostLedger::new())?;
                for probe in scheme.invalid_probes(&kp.pk, &c) {
                    sample.decrypt.push((kp.sk.clone(), probe));
                }
                sample.decrypt.push((kp.sk.clone(), c));
                sample.encrypt.push((kp.pk.clone(), m));
            }
        }
        Ok(sample)
    }
}

/// Result of [`calibrate_worst_case`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calibration {
    pub config: FixedTimeConfig,
    pub encrypt_samples: usize,
    pub decrypt_samples: usize,
    pub encrypt_min: u64,
    pub decrypt_min: u64,
    pub note: String,
}

pub const WORST_CASE_NOTE: &str = "budgets are worst-case costs over the sample; every call now \
runs at its slowest observed cost";

pub fn max_cost(costs: &[u64], op: OpKind) -> Result<u64, TimingError> {
    costs
        .iter()
        .copied()
        .max()
        .ok_or(TimingError::EmptySample(op))
}

/// Measures every sample input and returns the per-function maxima as
/// fixed-time budgets.
pub fn calibrate_worst_case(
    scheme: &dyn Scheme,
    sample: &CalibrationSample,
    rng: &mut dyn RngCore,
) -> Result<Calibration, TimingError> {
    let mut enc = Vec::with_capacity(sample.encrypt.len());
    for (pk, m) in &sample.encrypt {
        let mut ledger = CostLedger::new();
        scheme.encrypt(pk, m, rng, &mut ledger)?;
        enc.push(ledger.total());
    }
    let mut dec = Vec::with_capacity(sample.decrypt.len());
    for (sk, c) in &sample.decrypt {
        let mut ledger = CostLedger::new();
        scheme.decrypt(sk, c, &mut ledger)?;
        dec.push(ledger.total());
    }
    let t_enc = max_cost(&enc, OpKind::Encrypt)?;
    let t_dec = max_cost(&dec, OpKind::Decrypt)?;
    Ok(Calibration {
        config: FixedTimeConfig::new(t_enc.max(1), t_dec.max(1))?,
        encrypt_samples: enc.len(),
        decrypt_samples: dec.len(),
        encrypt_min: enc.iter().copied().min().unwrap_or(0),
        decrypt_min: dec.iter().copied().min().unwrap_or(0),
        note: WORST_CASE_NOTE.into(),
    })
}
