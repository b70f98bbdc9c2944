//! Adversary strategies.
//!
//! * [`RandomGuess`]: the zero-advantage baseline.
//! * [`GmMalleability`]: re-randomizes the GM challenge and asks the oracle
//!   to decrypt it, which a CCA2 oracle allows since only `c*` is excluded.
//! * [`TimingDistinguisher`]: compares the challenge's compute cost against
//!   costs of locally encrypting both candidates.
//! * [`EarlyAbortProbe`]: measures rejection costs of crafted invalid
//!   ciphertexts. It guesses at random; its output is the diagnostic.

use std::fmt;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::games::{Adversary, AdversaryContext, AdversaryError, AdversaryFactory, Requirements};
use crate::schemes::gm::sample_unit;
use crate::schemes::{Ciphertext, OpKind, Plaintext, PublicKey, Scheme, SchemeFamily};
use crate::timing::{Phase, TimingView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    RandomGuess,
    GmMalleability,
    TimingDistinguisher,
    EarlyAbortProbe,
}

impl AdversaryKind {
    pub const ALL: [AdversaryKind; 4] = [
        AdversaryKind::RandomGuess,
        AdversaryKind::GmMalleability,
        AdversaryKind::TimingDistinguisher,
        AdversaryKind::EarlyAbortProbe,
    ];

    pub fn id(self) -> &'static str {
        match self {
            AdversaryKind::RandomGuess => "random-guess",
            AdversaryKind::GmMalleability => "gm-malleability",
            AdversaryKind::TimingDistinguisher => "timing-distinguisher",
            AdversaryKind::EarlyAbortProbe => "early-abort-probe",
        }
    }

    pub fn parse(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == id)
    }

    pub fn summary(self) -> &'static str {
        match self {
            AdversaryKind::RandomGuess => "fair coin; never queries the oracle",
            AdversaryKind::GmMalleability => {
                "re-randomizes the GM challenge and decrypts it in phase 2"
            }
            AdversaryKind::TimingDistinguisher => {
                "matches the challenge compute cost against local encryptions of m0 and m1"
            }
            AdversaryKind::EarlyAbortProbe => {
                "reports rejection costs of crafted invalid ciphertexts; guesses at random"
            }
        }
    }
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl AdversaryFactory for AdversaryKind {
    fn name(&self) -> String {
        self.id().to_string()
    }

    fn requirements(&self) -> Requirements {
        match self {
            AdversaryKind::RandomGuess => Requirements::default(),
            AdversaryKind::GmMalleability => Requirements {
                needs_oracle_phase2: true,
                ..Requirements::default()
            },
            AdversaryKind::TimingDistinguisher => Requirements {
                needs_timing: true,
                ..Requirements::default()
            },
            AdversaryKind::EarlyAbortProbe => Requirements {
                needs_oracle_phase1: true,
                needs_timing: true,
                ..Requirements::default()
            },
        }
    }

    fn check_scheme(&self, scheme: &dyn Scheme) -> Result<(), String> {
        if *self == AdversaryKind::GmMalleability && scheme.family() != SchemeFamily::Gm {
            return Err(format!(
                "malleability attack needs a GM scheme, got {}",
                scheme.name()
            ));
        }
        Ok(())
    }

    fn create(&self) -> Box<dyn Adversary> {
        match self {
            AdversaryKind::RandomGuess => Box::new(RandomGuess),
            AdversaryKind::GmMalleability => Box::new(GmMalleability),
            AdversaryKind::TimingDistinguisher => Box::new(TimingDistinguisher::default()),
            AdversaryKind::EarlyAbortProbe => Box::new(EarlyAbortProbe::default()),
        }
    }
}

pub fn random_guess_adversary() -> RandomGuess {
    RandomGuess
}

pub fn gm_malleability_adversary() -> GmMalleability {
    GmMalleability
}

pub fn timing_distinguisher_adversary(reference_costs: Option<CostTable>) -> TimingDistinguisher {
    TimingDistinguisher {
        table: reference_costs,
        preset: reference_costs.is_some(),
        last_decision: None,
    }
}

pub fn early_abort_probe_adversary() -> EarlyAbortProbe {
    EarlyAbortProbe::default()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomGuess;

impl Adversary for RandomGuess {
    fn requirements(&self) -> Requirements {
        AdversaryKind::RandomGuess.requirements()
    }

    fn choose_plaintexts(
        &mut self,
        ctx: &mut AdversaryContext<'_, '_>,
    ) -> Result<(Plaintext, Plaintext), AdversaryError> {
        Ok(ctx.extreme_messages()?)
    }

    fn guess(
        &mut self,
        _c_star: &Ciphertext,
        ctx: &mut AdversaryContext<'_, '_>,
    ) -> Result<bool, AdversaryError> {
        Ok(ctx.rng().gen())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GmMalleability;

impl Adversary for GmMalleability {
    fn requirements(&self) -> Requirements {
        AdversaryKind::GmMalleability.requirements()
    }

    fn choose_plaintexts(
        &mut self,
        ctx: &mut AdversaryContext<'_, '_>,
    ) -> Result<(Plaintext, Plaintext), AdversaryError> {
        // all zeros, all ones
        Ok(ctx.extreme_messages()?)
    }

    fn guess(
        &mut self,
        c_star: &Ciphertext,
        ctx: &mut AdversaryContext<'_, '_>,
    ) -> Result<bool, AdversaryError> {
        let PublicKey::Gm(pk) = ctx.public_key().clone() else {
            return Err(AdversaryError::Strategy("not a GM public key".into()));
        };
        let Ciphertext::Gm(components) = c_star else {
            return Err(AdversaryError::Strategy("not a GM ciphertext".into()));
        };
        // Multiplying by r^2 keeps every residuosity class, so the query
        // decrypts to m_b while differing from c*.
        let mauled = loop {
            let mauled: Vec<BigUint> = components
                .iter()
                .map(|c| {
                    let r = sample_unit(&pk.n, ctx.rng());
                    (c * &r * &r) % &pk.n
                })
                .collect();
            if mauled != *components {
                break Ciphertext::Gm(mauled);
            }
        };
        let answer = ctx.decrypt(&mauled)?;
        match answer.result.plaintext() {
            Some(Plaintext::Bits(bits)) if bits.iter().all(|&b| b) => Ok(true),
            Some(Plaintext::Bits(bits)) if bits.iter().all(|&b| !b) => Ok(false),
            _ => Ok(ctx.rng().gen()),
        }
    }
}

/// Local encryption costs of the two challenge candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTable {
    pub m0_cost: u64,
    pub m1_cost: u64,
}

/// Picks the arm whose reference cost is nearer to the challenge's compute
/// cost, recovered by removing the known network delays from the round-trip
/// time. `None` on a tie.
pub fn timing_decision(table: &CostTable, challenge: &TimingView) -> Option<bool> {
    let compute = challenge
        .observed_total()
        .saturating_sub(challenge.network_delay_out + challenge.network_delay_back);
    let d0 = compute.abs_diff(table.m0_cost);
    let d1 = compute.abs_diff(table.m1_cost);
    match d0.cmp(&d1) {
        std::cmp::Ordering::Less => Some(false),
        std::cmp::Ordering::Greater => Some(true),
        std::cmp::Ordering::Equal => None,
    }
}

#[derive(Debug, Clone, Default)]
pub struct TimingDistinguisher {
    table: Option<CostTable>,
    preset: bool,
    last_decision: Option<&'static str>,
}

impl Adversary for TimingDistinguisher {
    fn requirements(&self) -> Requirements {
        AdversaryKind::TimingDistinguisher.requirements()
    }

    fn choose_plaintexts(
        &mut self,
        ctx: &mut AdversaryContext<'_, '_>,
    ) -> Result<(Plaintext, Plaintext), AdversaryError> {
        let (m0, m1) = ctx.extreme_messages()?;
        if !self.preset {
            let (_, m0_cost) = ctx.encrypt_local(&m0)?;
            let (_, m1_cost) = ctx.encrypt_local(&m1)?;
            self.table = Some(CostTable { m0_cost, m1_cost });
        }
        Ok((m0, m1))
    }

    fn guess(
        &mut self,
        _c_star: &Ciphertext,
        ctx: &mut AdversaryContext<'_, '_>,
    ) -> Result<bool, AdversaryError> {
        let challenge = ctx
            .timing_feed()
            .iter()
            .find(|v| v.phase == Phase::Challenge && v.op_kind == OpKind::Encrypt)
            .cloned();
        let decision = match (&self.table, challenge) {
            (Some(table), Some(view)) => timing_decision(table, &view),
            _ => None,
        };
        self.last_decision = Some(match decision {
            Some(_) => "timing",
            None => "coin",
        });
        match decision {
            Some(b) => Ok(b),
            None => Ok(ctx.rng().gen()),
        }
    }

    fn diagnostics(&self) -> Option<serde_json::Value> {
        Some(json!({
            "cost_table": self.table,
            "decided_by": self.last_decision,
        }))
    }
}

#[derive(Debug, Clone, Default)]
pub struct EarlyAbortProbe {
    rejection_costs: Vec<u64>,
    rejected: usize,
}

impl EarlyAbortProbe {
    pub fn rejection_costs(&self) -> &[u64] {
        &self.rejection_costs
    }

    /// Whether rejection costs differ across the crafted inputs.
    pub fn leak_detected(&self) -> bool {
        self.rejection_costs.windows(2).any(|w| w[0] != w[1])
    }
}

impl Adversary for EarlyAbortProbe {
    fn requirements(&self) -> Requirements {
        AdversaryKind::EarlyAbortProbe.requirements()
    }

    fn choose_plaintexts(
        &mut self,
        ctx: &mut AdversaryContext<'_, '_>,
    ) -> Result<(Plaintext, Plaintext), AdversaryError> {
        let m = ctx.sample_message()?;
        let (valid, _) = ctx.encrypt_local(&m)?;
        for probe in ctx.invalid_probes(&valid) {
            let answer = ctx.decrypt(&probe)?;
            if answer.result.plaintext().is_none() {
                self.rejected += 1;
            }
            if let Some(view) = answer.timing {
                self.rejection_costs.push(view.compute_cost);
            }
        }
        Ok(ctx.extreme_messages()?)
    }

    fn guess(
        &mut self,
        _c_star: &Ciphertext,
        ctx: &mut AdversaryContext<'_, '_>,
    ) -> Result<bool, AdversaryError> {
        Ok(ctx.rng().gen())
    }

    fn diagnostics(&self) -> Option<serde_json::Value> {
        Some(json!({
            "rejection_costs": self.rejection_costs,
            "rejected": self.rejected,
            "leak_detected": self.leak_detected(),
        }))
    }
}
