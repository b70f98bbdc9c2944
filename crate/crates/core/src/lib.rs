//! Game-based indistinguishability experiments (IND-CPA, IND-CCA1, IND-CCA2,
//! and IND-CCA2 with a timing side channel) over public-key schemes whose
//! running time is modeled by a deterministic cost ledger.

pub mod adversaries;
pub mod games;
pub mod numtheory;
pub mod schemes;
pub mod timing;

pub use games::{
    estimate_advantage, negligible_check, run_experiment, run_trial, AdvantageEstimate,
    ExperimentKind, ExperimentParams, OraclePolicy, Transcript, TranscriptStore, Verdict,
};
pub use numtheory::{CostLedger, Natural};
pub use schemes::{Ciphertext, KeyPair, Plaintext, Scheme};
pub use timing::{calibrate_worst_case, wrap_fixed_time, FixedTimeConfig, TimingView};
