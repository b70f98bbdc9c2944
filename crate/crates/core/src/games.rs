//! Indistinguishability experiments and advantage estimation.
//!
//! A trial runs key generation, a first oracle phase, the challenge, a
//! second oracle phase, and the adversary's guess. Which oracle calls are
//! allowed, and whether the adversary sees [`TimingView`]s, is decided by the
//! [`OraclePolicy`] of the [`ExperimentKind`].
//!
//! The adversary only ever talks to an [`AdversaryContext`]. It holds the
//! challenger by private reference, so the secret key and the challenge bit
//! are not reachable from adversary code.

use std::fmt;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numtheory::CostLedger;
use crate::schemes::encoding::{ciphertext_digest, encode_ciphertext, encode_plaintext};
use crate::schemes::{
    Ciphertext, Decryption, KeyPair, MessageSpace, OpKind, Plaintext, PublicKey, Scheme,
    SchemeError, SchemeFamily,
};
use crate::timing::{network_delay, DelayModel, Phase, TimingView};

/// Default threshold below which an advantage counts as negligible.
pub const DEFAULT_NEGLIGIBLE_THRESHOLD: f64 = 0.05;

const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "CPA")]
    Cpa,
    #[serde(rename = "CCA1")]
    Cca1,
    #[serde(rename = "CCA2")]
    Cca2,
    #[serde(rename = "CCA2_TA")]
    Cca2Ta,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [Self::Cpa, Self::Cca1, Self::Cca2, Self::Cca2Ta];

    pub fn policy(self) -> OraclePolicy {
        let (phase1, phase2, forbid, timing) = match self {
            ExperimentKind::Cpa => (false, false, false, false),
            ExperimentKind::Cca1 => (true, false, false, false),
            ExperimentKind::Cca2 => (true, true, true, false),
            ExperimentKind::Cca2Ta => (true, true, true, true),
        };
        OraclePolicy {
            phase1_decrypt_allowed: phase1,
            phase2_decrypt_allowed: phase2,
            challenge_ciphertext_forbidden: forbid,
            timing_visible: timing,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::Cpa => "CPA",
            ExperimentKind::Cca1 => "CCA1",
            ExperimentKind::Cca2 => "CCA2",
            ExperimentKind::Cca2Ta => "CCA2_TA",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| {
            k.label().eq_ignore_ascii_case(s) || k.label().replace('_', "-").eq_ignore_ascii_case(s)
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OraclePolicy {
    pub phase1_decrypt_allowed: bool,
    pub phase2_decrypt_allowed: bool,
    pub challenge_ciphertext_forbidden: bool,
    pub timing_visible: bool,
}

impl OraclePolicy {
    pub fn decrypt_allowed(&self, phase: Phase) -> bool {
        match phase {
            Phase::Phase1 => self.phase1_decrypt_allowed,
            Phase::Phase2 => self.phase2_decrypt_allowed,
            Phase::Challenge => false,
        }
    }
}

/// What an adversary declares it needs from the experiment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirements {
    pub needs_oracle_phase1: bool,
    pub needs_oracle_phase2: bool,
    pub needs_timing: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum OracleError {
    #[error("decryption oracle closed during {0:?}")]
    PolicyViolation(Phase),
    #[error("the challenge ciphertext may not be queried")]
    ForbiddenQuery,
    #[error("scheme failure: {0}")]
    Scheme(String),
}

/// Answer from the decryption oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleAnswer {
    pub result: Decryption,
    /// Present only when the policy makes timing visible.
    pub timing: Option<TimingView>,
}

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("{0}")]
    Strategy(String),
}

/// Why a trial was aborted. Faulted trials count as losses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum TrialFault {
    PolicyViolation(Phase),
    ForbiddenQuery,
    InvalidChallenge(String),
    Adversary(String),
    Execution(String),
}

impl TrialFault {
    /// Faults caused by the adversary breaking the rules, as opposed to the
    /// harness failing to run the trial.
    pub fn is_adversarial(&self) -> bool {
        !matches!(self, TrialFault::Execution(_))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("adversary {adversary} cannot run under {kind}: {reason}")]
    IncompatiblePairing {
        adversary: String,
        kind: ExperimentKind,
        reason: String,
    },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("all {0} trials failed to execute; first failure: {1}")]
    AllTrialsFailed(usize, String),
    #[error("trials per arm must be at least 1")]
    NoTrials,
}

/// A strategy driven by the challenger.
pub trait Adversary: Send {
    fn requirements(&self) -> Requirements;

    /// Phase 1: may query the oracle, then returns `(m0, m1)`.
    fn choose_plaintexts(
        &mut self,
        ctx: &mut AdversaryContext<'_, '_>,
    ) -> Result<(Plaintext, Plaintext), AdversaryError>;

    /// Phase 2: sees `c*`, may query the oracle, returns the guess `b'`.
    fn guess(
        &mut self,
        c_star: &Ciphertext,
        ctx: &mut AdversaryContext<'_, '_>,
    ) -> Result<bool, AdversaryError>;

    /// Free-form report attached to the transcript.
    fn diagnostics(&self) -> Option<serde_json::Value> {
        None
    }
}

/// Creates one fresh adversary per trial.
pub trait AdversaryFactory: Sync {
    fn name(&self) -> String;

    fn requirements(&self) -> Requirements;

    /// Scheme-specific pairing constraints beyond the requirements.
    fn check_scheme(&self, scheme: &dyn Scheme) -> Result<(), String> {
        let _ = scheme;
        Ok(())
    }

    fn create(&self) -> Box<dyn Adversary>;
}

/// Fails fast when the adversary cannot meaningfully run in the experiment.
///
/// Timing requirements are hard: without the feed the strategy is undefined.
/// Oracle requirements are not checked here; calls outside the policy fault
/// the trial at runtime, which is what makes the policies comparable.
pub fn check_pairing(
    kind: ExperimentKind,
    scheme: &dyn Scheme,
    factory: &dyn AdversaryFactory,
) -> Result<(), GameError> {
    let refuse = |reason: String| GameError::IncompatiblePairing {
        adversary: factory.name(),
        kind,
        reason,
    };
    if factory.requirements().needs_timing && !kind.policy().timing_visible {
        return Err(refuse("adversary needs timing visibility".into()));
    }
    factory.check_scheme(scheme).map_err(refuse)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Phase1,
    Challenge,
    Phase2,
    Finished,
}

impl Stage {
    fn phase(self) -> Phase {
        match self {
            Stage::Phase1 => Phase::Phase1,
            Stage::Challenge => Phase::Challenge,
            Stage::Phase2 | Stage::Finished => Phase::Phase2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub phase: Phase,
    pub ciphertext_digest: String,
    pub result: String,
}

/// Per-trial state owned by the challenger.
pub struct ChallengerState<'a> {
    scheme: &'a dyn Scheme,
    keypair: KeyPair,
    policy: OraclePolicy,
    delay: DelayModel,
    wall_clock: bool,
    stage: Stage,
    b: bool,
    c_star: Option<Ciphertext>,
    message_index: u64,
    views: Vec<TimingView>,
    queries: Vec<QueryRecord>,
    fault: Option<TrialFault>,
    hard_error: Option<SchemeError>,
}

impl<'a> ChallengerState<'a> {
    fn new(
        scheme: &'a dyn Scheme,
        keypair: KeyPair,
        policy: OraclePolicy,
        delay: DelayModel,
        wall_clock: bool,
    ) -> Self {
        Self {
            scheme,
            keypair,
            policy,
            delay,
            wall_clock,
            stage: Stage::Phase1,
            b: false,
            c_star: None,
            message_index: 0,
            views: Vec::new(),
            queries: Vec::new(),
            fault: None,
            hard_error: None,
        }
    }

    fn record_fault(&mut self, fault: TrialFault) {
        self.fault.get_or_insert(fault);
    }

    fn timing_view(
        &mut self,
        op_kind: OpKind,
        compute_cost: u64,
        out_bytes: usize,
        back_bytes: usize,
        elapsed_ns: Option<u64>,
    ) -> TimingView {
        let out = network_delay(&self.delay, out_bytes, self.message_index);
        let back = network_delay(&self.delay, back_bytes, self.message_index + 1);
        self.message_index += 2;
        let view = TimingView {
            op_kind,
            compute_cost,
            network_delay_out: out,
            network_delay_back: back,
            phase: self.stage.phase(),
            wall_clock_ns: elapsed_ns,
        };
        self.views.push(view.clone());
        view
    }

    /// `D(sk, c)` under the oracle policy.
    pub fn oracle_decrypt(&mut self, c: &Ciphertext) -> Result<OracleAnswer, OracleError> {
        let phase = self.stage.phase();
        let digest = ciphertext_digest(c);
        let refuse = |this: &mut Self, err: OracleError, fault: TrialFault| {
            this.queries.push(QueryRecord {
                phase,
                ciphertext_digest: digest.clone(),
                result: format!("refused: {err}"),
            });
            this.record_fault(fault);
            Err(err)
        };
        if !self.policy.decrypt_allowed(phase) || self.stage == Stage::Finished {
            return refuse(
                self,
                OracleError::PolicyViolation(phase),
                TrialFault::PolicyViolation(phase),
            );
        }
        if self.policy.challenge_ciphertext_forbidden && self.c_star.as_ref() == Some(c) {
            return refuse(
                self,
                OracleError::ForbiddenQuery,
                TrialFault::ForbiddenQuery,
            );
        }
        let mut ledger = CostLedger::new();
        let started = self.wall_clock.then(Instant::now);
        let result = match self.scheme.decrypt(&self.keypair.sk, c, &mut ledger) {
            Ok(result) => result,
            Err(e) => {
                self.hard_error.get_or_insert(e.clone());
                return Err(OracleError::Scheme(e.to_string()));
            }
        };
        let elapsed = started.map(|t| t.elapsed().as_nanos() as u64);
        let back_bytes = result.plaintext().map_or(1, |m| encode_plaintext(m).len());
        let view = self.timing_view(
            OpKind::Decrypt,
            ledger.total(),
            encode_ciphertext(c).len(),
            back_bytes,
            elapsed,
        );
        self.queries.push(QueryRecord {
            phase,
            ciphertext_digest: digest,
            result: match &result {
                Decryption::Plaintext(m) => m.to_string(),
                Decryption::Reject => "reject".into(),
            },
        });
        Ok(OracleAnswer {
            result,
            timing: self.policy.timing_visible.then_some(view),
        })
    }

    fn issue_challenge(
        &mut self,
        m0: &Plaintext,
        m1: &Plaintext,
        b: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Ciphertext, SchemeError> {
        self.stage = Stage::Challenge;
        self.b = b;
        let m_b = if b { m1 } else { m0 };
        let mut ledger = CostLedger::new();
        let started = self.wall_clock.then(Instant::now);
        let c_star = self
            .scheme
            .encrypt(&self.keypair.pk, m_b, rng, &mut ledger)?;
        let elapsed = started.map(|t| t.elapsed().as_nanos() as u64);
        let out_bytes = encode_plaintext(m0).len() + encode_plaintext(m1).len();
        self.timing_view(
            OpKind::Encrypt,
            ledger.total(),
            out_bytes,
            encode_ciphertext(&c_star).len(),
            elapsed,
        );
        self.c_star = Some(c_star.clone());
        self.stage = Stage::Phase2;
        Ok(c_star)
    }
}

/// The adversary's handle on a running trial.
pub struct AdversaryContext<'c, 's> {
    challenger: &'c mut ChallengerState<'s>,
    rng: &'c mut dyn RngCore,
}

impl AdversaryContext<'_, '_> {
    pub fn public_key(&self) -> &PublicKey {
        &self.challenger.keypair.pk
    }

    pub fn policy(&self) -> OraclePolicy {
        self.challenger.policy
    }

    pub fn phase(&self) -> Phase {
        self.challenger.stage.phase()
    }

    pub fn scheme_family(&self) -> SchemeFamily {
        self.challenger.scheme.family()
    }

    pub fn message_space(&self) -> MessageSpace {
        self.challenger.scheme.message_space()
    }

    /// The delay model is public knowledge.
    pub fn delay_model(&self) -> DelayModel {
        self.challenger.delay
    }

    pub fn rng(&mut self) -> &mut dyn RngCore {
        self.rng
    }

    /// Runs the public encryption function locally and returns its cost.
    pub fn encrypt_local(&mut self, m: &Plaintext) -> Result<(Ciphertext, u64), SchemeError> {
        let mut ledger = CostLedger::new();
        let pk = &self.challenger.keypair.pk;
        let c = self.challenger.scheme.encrypt(pk, m, self.rng, &mut ledger);
        if let Err(e @ SchemeError::BudgetOverflow { .. }) = &c {
            self.challenger.hard_error.get_or_insert(e.clone());
        }
        Ok((c?, ledger.total()))
    }

    pub fn sample_message(&mut self) -> Result<Plaintext, SchemeError> {
        self.challenger
            .scheme
            .sample_message(&self.challenger.keypair.pk, self.rng)
    }

    pub fn extreme_messages(&self) -> Result<(Plaintext, Plaintext), SchemeError> {
        self.challenger
            .scheme
            .extreme_messages(&self.challenger.keypair.pk)
    }

    /// Invalid ciphertexts derived from `valid` using only public data.
    pub fn invalid_probes(&self, valid: &Ciphertext) -> Vec<Ciphertext> {
        self.challenger
            .scheme
            .invalid_probes(&self.challenger.keypair.pk, valid)
    }

    pub fn decrypt(&mut self, c: &Ciphertext) -> Result<OracleAnswer, OracleError> {
        self.challenger.oracle_decrypt(c)
    }

    /// Timing views seen so far; empty unless the policy makes timing visible.
    pub fn timing_feed(&self) -> &[TimingView] {
        if self.challenger.policy.timing_visible {
            &self.challenger.views
        } else {
            &[]
        }
    }
}

/// Full record of one trial. Contains no secret-key material; the
/// challenge bit is written after the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub trial_index: u64,
    pub scheme: String,
    pub experiment: ExperimentKind,
    pub adversary: String,
    pub queries: Vec<QueryRecord>,
    pub timing_views: Vec<TimingView>,
    pub m0: Option<String>,
    pub m1: Option<String>,
    pub equal_length_verified: bool,
    pub distinct_verified: bool,
    pub challenge_digest: Option<String>,
    pub guess: Option<u8>,
    /// Value of the experiment: the guess, or 0 for a faulted trial.
    pub output: u8,
    pub win: bool,
    pub fault: Option<TrialFault>,
    pub b: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialOptions {
    pub wall_clock: bool,
}

/// Independent challenger and adversary randomness for one trial.
pub struct TrialRngs {
    pub challenger: ChaCha20Rng,
    pub adversary: ChaCha20Rng,
}

impl TrialRngs {
    /// Streams derived from `(master_seed, arm, trial_index)`, so trials can
    /// run in any order.
    pub fn derive(master_seed: u64, arm: u8, trial_index: u64) -> Self {
        let seed = |label: &[u8]| {
            let mut h = Sha256::new();
            h.update(b"indcca/trial/");
            h.update(label);
            h.update(master_seed.to_be_bytes());
            h.update([arm]);
            h.update(trial_index.to_be_bytes());
            ChaCha20Rng::from_seed(h.finalize().into())
        };
        Self {
            challenger: seed(b"challenger"),
            adversary: seed(b"adversary"),
        }
    }
}

/// Runs one experiment trial. `forced_b` fixes the challenge bit; otherwise
/// it is a fair coin from the challenger's stream.
///
/// Rule-breaking by the adversary ends the trial with a recorded fault. A
/// fixed-time budget overflow is returned as an error because it means the
/// wrapper was misconfigured.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    kind: ExperimentKind,
    scheme: &dyn Scheme,
    adversary: &mut dyn Adversary,
    adversary_name: &str,
    forced_b: Option<bool>,
    mut rngs: TrialRngs,
    trial_index: u64,
    delay: &DelayModel,
    options: TrialOptions,
) -> Result<Transcript, GameError> {
    let mut transcript = Transcript {
        trial_index,
        scheme: scheme.name(),
        experiment: kind,
        adversary: adversary_name.to_string(),
        queries: Vec::new(),
        timing_views: Vec::new(),
        m0: None,
        m1: None,
        equal_length_verified: false,
        distinct_verified: false,
        challenge_digest: None,
        guess: None,
        output: 0,
        win: false,
        fault: None,
        b: 0,
        diagnostics: None,
    };

    let keypair = match scheme.keygen(&mut rngs.challenger) {
        Ok(kp) => kp,
        Err(e) => {
            transcript.fault = Some(TrialFault::Execution(format!("keygen: {e}")));
            transcript.b = forced_b.unwrap_or(false) as u8;
            return Ok(transcript);
        }
    };
    let mut challenger =
        ChallengerState::new(scheme, keypair, kind.policy(), *delay, options.wall_clock);
    let b = forced_b.unwrap_or_else(|| rngs.challenger.gen::<bool>());
    let outcome = play(&mut challenger, adversary, b, &mut rngs);
    transcript.diagnostics = adversary.diagnostics();

    if let Some(e) = challenger.hard_error.take() {
        if matches!(e, SchemeError::BudgetOverflow { .. }) {
            return Err(GameError::Configuration(e.to_string()));
        }
        challenger.record_fault(TrialFault::Execution(e.to_string()));
    }
    transcript.queries = std::mem::take(&mut challenger.queries);
    if challenger.policy.timing_visible {
        transcript.timing_views = std::mem::take(&mut challenger.views);
    }
    transcript.challenge_digest = challenger.c_star.as_ref().map(ciphertext_digest);
    transcript.b = b as u8;

    match outcome {
        Ok(PlayOutcome {
            m0,
            m1,
            guess,
            checks,
        }) => {
            transcript.m0 = Some(m0.to_string());
            transcript.m1 = Some(m1.to_string());
            transcript.equal_length_verified = checks;
            transcript.distinct_verified = checks;
            transcript.guess = guess.map(u8::from);
        }
        Err(PlayFailure { m0, m1, fault }) => {
            transcript.m0 = m0.map(|m| m.to_string());
            transcript.m1 = m1.map(|m| m.to_string());
            challenger.record_fault(fault);
        }
    }
    transcript.fault = challenger.fault.take();
    if transcript.fault.is_none() {
        let guess = transcript.guess.unwrap_or(0);
        transcript.output = guess;
        transcript.win = guess == transcript.b;
    }
    Ok(transcript)
}

struct PlayOutcome {
    m0: Plaintext,
    m1: Plaintext,
    guess: Option<bool>,
    checks: bool,
}

struct PlayFailure {
    m0: Option<Plaintext>,
    m1: Option<Plaintext>,
    fault: TrialFault,
}

fn adversary_fault(e: AdversaryError) -> TrialFault {
    match e {
        AdversaryError::Oracle(OracleError::PolicyViolation(p)) => TrialFault::PolicyViolation(p),
        AdversaryError::Oracle(OracleError::ForbiddenQuery) => TrialFault::ForbiddenQuery,
        AdversaryError::Oracle(OracleError::Scheme(s)) => TrialFault::Execution(s),
        other => TrialFault::Adversary(other.to_string()),
    }
}

fn play(
    challenger: &mut ChallengerState<'_>,
    adversary: &mut dyn Adversary,
    b: bool,
    rngs: &mut TrialRngs,
) -> Result<PlayOutcome, PlayFailure> {
    let fail = |m0: Option<&Plaintext>, m1: Option<&Plaintext>, fault| PlayFailure {
        m0: m0.cloned(),
        m1: m1.cloned(),
        fault,
    };
    let chosen = {
        let mut ctx = AdversaryContext {
            challenger: &mut *challenger,
            rng: &mut rngs.adversary,
        };
        adversary.choose_plaintexts(&mut ctx)
    };
    let (m0, m1) = chosen.map_err(|e| fail(None, None, adversary_fault(e)))?;
    if let Some(f) = challenger.fault.clone() {
        return Err(fail(Some(&m0), Some(&m1), f));
    }
    if m0.len() != m1.len() {
        return Err(fail(
            Some(&m0),
            Some(&m1),
            TrialFault::InvalidChallenge("|m0| != |m1|".into()),
        ));
    }
    if m0 == m1 {
        return Err(fail(
            Some(&m0),
            Some(&m1),
            TrialFault::InvalidChallenge("m0 == m1".into()),
        ));
    }
    for m in [&m0, &m1] {
        if let Err(e) = challenger.scheme.check_message(&challenger.keypair.pk, m) {
            return Err(fail(
                Some(&m0),
                Some(&m1),
                TrialFault::InvalidChallenge(e.to_string()),
            ));
        }
    }
    let c_star = match challenger.issue_challenge(&m0, &m1, b, &mut rngs.challenger) {
        Ok(c) => c,
        Err(e) => {
            challenger.hard_error.get_or_insert(e.clone());
            return Err(fail(
                Some(&m0),
                Some(&m1),
                TrialFault::Execution(e.to_string()),
            ));
        }
    };
    let guess = {
        let mut ctx = AdversaryContext {
            challenger: &mut *challenger,
            rng: &mut rngs.adversary,
        };
        adversary.guess(&c_star, &mut ctx)
    };
    challenger.stage = Stage::Finished;
    match guess {
        Ok(g) => Ok(PlayOutcome {
            m0,
            m1,
            guess: Some(g),
            checks: true,
        }),
        Err(e) => Err(fail(Some(&m0), Some(&m1), adversary_fault(e))),
    }
}

/// Trials and `b' = 1` outcomes in one arm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmCounts {
    pub trials: u64,
    pub ones: u64,
}

/// `|Pr[Exp(0) = 1] - Pr[Exp(1) = 1]|` with a 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEstimate {
    pub p_exp0: f64,
    pub p_exp1: f64,
    pub advantage: f64,
    pub arm0: ArmCounts,
    pub arm1: ArmCounts,
    /// Half-width of the Newcombe (Wilson-score) interval for `p_exp0 - p_exp1`.
    pub ci95_halfwidth: f64,
    pub negligible_threshold: f64,
    /// Single-game view: fraction of all trials with `b' = b`.
    pub win_rate: f64,
}

/// Wilson score interval for `successes / trials` at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Advantage from per-arm counts. `wins` is the number of trials with
/// `b' = b` across both arms.
pub fn estimate_advantage(
    arm0: ArmCounts,
    arm1: ArmCounts,
    wins: u64,
    negligible_threshold: f64,
) -> AdvantageEstimate {
    let frac = |c: ArmCounts| {
        if c.trials == 0 {
            0.0
        } else {
            c.ones as f64 / c.trials as f64
        }
    };
    let (p0, p1) = (frac(arm0), frac(arm1));
    // One rounding step: |ones0 * n1 - ones1 * n0| / (n0 * n1).
    let advantage = if arm0.trials == 0 || arm1.trials == 0 {
        0.0
    } else {
        let cross0 = arm0.ones as u128 * arm1.trials as u128;
        let cross1 = arm1.ones as u128 * arm0.trials as u128;
        cross0.abs_diff(cross1) as f64 / (arm0.trials as u128 * arm1.trials as u128) as f64
    };
    let (l0, u0) = wilson_interval(arm0.ones, arm0.trials);
    let (l1, u1) = wilson_interval(arm1.ones, arm1.trials);
    let below = ((p0 - l0).powi(2) + (u1 - p1).powi(2)).sqrt();
    let above = ((u0 - p0).powi(2) + (p1 - l1).powi(2)).sqrt();
    let total = arm0.trials + arm1.trials;
    AdvantageEstimate {
        p_exp0: p0,
        p_exp1: p1,
        advantage,
        arm0,
        arm1,
        ci95_halfwidth: below.max(above),
        negligible_threshold,
        win_rate: if total == 0 {
            0.0
        } else {
            wins as f64 / total as f64
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConsistentWithNegligible,
    AdvantageDetected,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ConsistentWithNegligible => "consistent-with-negligible",
            Verdict::AdvantageDetected => "advantage-detected",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Compares the advantage interval against the configured threshold.
pub fn negligible_check(est: &AdvantageEstimate) -> Verdict {
    verdict_for(est.advantage, est.ci95_halfwidth, est.negligible_threshold)
}

pub fn verdict_for(advantage: f64, halfwidth: f64, threshold: f64) -> Verdict {
    if advantage - halfwidth > threshold {
        Verdict::AdvantageDetected
    } else if advantage + halfwidth <= threshold {
        Verdict::ConsistentWithNegligible
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultTally {
    pub adversarial: u64,
    pub execution: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub kind: ExperimentKind,
    pub trials_per_arm: u64,
    pub master_seed: u64,
    pub delay: DelayModel,
    pub negligible_threshold: f64,
    #[serde(default)]
    pub wall_clock: bool,
}

impl ExperimentParams {
    pub fn new(kind: ExperimentKind, trials_per_arm: u64, master_seed: u64) -> Self {
        Self {
            kind,
            trials_per_arm,
            master_seed,
            delay: DelayModel::default(),
            negligible_threshold: DEFAULT_NEGLIGIBLE_THRESHOLD,
            wall_clock: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub scheme: String,
    pub adversary: String,
    pub experiment: ExperimentKind,
    pub policy: OraclePolicy,
    pub trials_per_arm: u64,
    pub master_seed: u64,
    pub delay: DelayModel,
}

/// Everything one experiment produced; serialized as the transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptStore {
    pub header: StoreHeader,
    /// Arm 0 trials first, each arm in trial-index order.
    pub trials: Vec<Transcript>,
    pub estimate: AdvantageEstimate,
    pub verdict: Verdict,
    pub faults: FaultTally,
}

/// Two-arm experiment: `trials_per_arm` trials with `b = 0` and as many
/// with `b = 1`. Trials run in parallel on the current rayon pool.
pub fn run_experiment(
    scheme: &dyn Scheme,
    factory: &dyn AdversaryFactory,
    params: &ExperimentParams,
) -> Result<TranscriptStore, GameError> {
    if params.trials_per_arm == 0 {
        return Err(GameError::NoTrials);
    }
    check_pairing(params.kind, scheme, factory)?;
    let n = params.trials_per_arm;
    let adversary_name = factory.name();
    let options = TrialOptions {
        wall_clock: params.wall_clock,
    };
    let trials: Vec<Transcript> = (0..2 * n)
        .into_par_iter()
        .map(|global| {
            let arm = (global / n) as u8;
            let index = global % n;
            let mut adversary = factory.create();
            run_trial(
                params.kind,
                scheme,
                adversary.as_mut(),
                &adversary_name,
                Some(arm == 1),
                TrialRngs::derive(params.master_seed, arm, index),
                global,
                &params.delay,
                options,
            )
        })
        .collect::<Result<_, _>>()?;

    let mut arms = [ArmCounts::default(); 2];
    let mut faults = FaultTally::default();
    let mut wins = 0;
    let mut first_failure = None;
    for t in &trials {
        let arm = &mut arms[t.b as usize];
        arm.trials += 1;
        arm.ones += t.output as u64;
        wins += t.win as u64;
        match &t.fault {
            Some(f) if f.is_adversarial() => faults.adversarial += 1,
            Some(f) => {
                faults.execution += 1;
                first_failure.get_or_insert_with(|| format!("{f:?}"));
            }
            None => {}
        }
    }
    if faults.execution == 2 * n {
        return Err(GameError::AllTrialsFailed(
            trials.len(),
            first_failure.unwrap_or_default(),
        ));
    }
    let estimate = estimate_advantage(arms[0], arms[1], wins, params.negligible_threshold);
    Ok(TranscriptStore {
        header: StoreHeader {
            scheme: scheme.name(),
            adversary: adversary_name,
            experiment: params.kind,
            policy: params.kind.policy(),
            trials_per_arm: n,
            master_seed: params.master_seed,
            delay: params.delay,
        },
        verdict: negligible_check(&estimate),
        trials,
        estimate,
        faults,
    })
}
