//! Suite configuration: JSON in, validated [`SuiteConfig`] out.

use std::collections::HashSet;
use std::path::PathBuf;

use indcca_core::adversaries::AdversaryKind;
use indcca_core::games::{ExperimentKind, DEFAULT_NEGLIGIBLE_THRESHOLD};
use indcca_core::schemes::{HashId, LeakProfile};
use indcca_core::timing::DelayModel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TRIALS_PER_ARM: u64 = 1000;
pub const SCHEME_IDS: [&str; 2] = ["gm", "cs"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("run {run}: missing `seed`; every run needs an explicit master seed")]
    MissingSeed { run: String },
    #[error("run {run}: unknown scheme `{id}` (known: {known})")]
    UnknownScheme {
        run: String,
        id: String,
        known: String,
    },
    #[error("run {run}: unknown adversary `{id}` (known: {known})")]
    UnknownAdversary {
        run: String,
        id: String,
        known: String,
    },
    #[error("run {run}: unknown experiment `{id}` (known: {known})")]
    UnknownExperiment {
        run: String,
        id: String,
        known: String,
    },
    #[error("duplicate run name `{0}`")]
    DuplicateName(String),
    #[error("run {run}: {reason}")]
    Invalid { run: String, reason: String },
}

/// Worst-case calibration settings for fixed-time wrapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    #[serde(default = "default_calibration_keys")]
    pub keys: usize,
    #[serde(default = "default_messages_per_key")]
    pub messages_per_key: usize,
    /// Defaults to the run's master seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_calibration_keys() -> usize {
    32
}

fn default_messages_per_key() -> usize {
    4
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            keys: default_calibration_keys(),
            messages_per_key: default_messages_per_key(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub id: String,
    /// Prime size for GM, group size for CS.
    pub security_bits: u64,
    /// GM only: bits per plaintext.
    #[serde(default = "default_message_bits")]
    pub message_bits: usize,
    /// CS only.
    #[serde(default)]
    pub hash: HashId,
    #[serde(default, skip_serializing_if = "LeakProfile::is_zero")]
    pub leak: LeakProfile,
    #[serde(default)]
    pub fixed_time: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationConfig>,
}

fn default_message_bits() -> usize {
    8
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !SCHEME_IDS.contains(&self.id.as_str()) {
            return Err(format!("unknown scheme `{}`", self.id));
        }
        if self.security_bits < 3 {
            return Err("security_bits must be at least 3".into());
        }
        if self.id == "gm" && self.message_bits == 0 {
            return Err("message_bits must be positive".into());
        }
        if let Some(c) = &self.calibration {
            if c.keys == 0 {
                return Err("calibration needs at least one key".into());
            }
        }
        Ok(())
    }
}

/// One experiment of a suite, as written in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub experiment: ExperimentKind,
    pub scheme: SchemeConfig,
    pub adversary: AdversaryKind,
    pub trials_per_arm: u64,
    pub seed: u64,
    pub delay: DelayModel,
    pub negligible_threshold: f64,
    /// Transcript path; defaults to `<name>.transcript.json` in the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub wall_clock: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub runs: Vec<RunConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuite {
    #[serde(default)]
    runs: Vec<RawRun>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    name: String,
    experiment: String,
    scheme: SchemeConfig,
    adversary: String,
    trials_per_arm: Option<u64>,
    seed: Option<u64>,
    #[serde(default)]
    delay: DelayModel,
    negligible_threshold: Option<f64>,
    output: Option<PathBuf>,
    #[serde(default)]
    wall_clock: bool,
}

fn known<I: IntoIterator<Item = String>>(ids: I) -> String {
    ids.into_iter().collect::<Vec<_>>().join(", ")
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !name.starts_with('.')
}

pub fn parse_config(text: &str) -> Result<SuiteConfig, ConfigError> {
    let raw: RawSuite = serde_json::from_str(text)?;
    let mut seen = HashSet::new();
    let mut runs = Vec::with_capacity(raw.runs.len());
    for r in raw.runs {
        let run = r.name.clone();
        if !valid_name(&run) {
            return Err(ConfigError::Invalid {
                run,
                reason: "names may only use letters, digits, '-', '_' and '.'".into(),
            });
        }
        if !seen.insert(run.clone()) {
            return Err(ConfigError::DuplicateName(run));
        }
        let seed = r
            .seed
            .ok_or_else(|| ConfigError::MissingSeed { run: run.clone() })?;
        if !SCHEME_IDS.contains(&r.scheme.id.as_str()) {
            return Err(ConfigError::UnknownScheme {
                run,
                id: r.scheme.id,
                known: SCHEME_IDS.join(", "),
            });
        }
        r.scheme.validate().map_err(|reason| ConfigError::Invalid {
            run: run.clone(),
            reason,
        })?;
        let adversary =
            AdversaryKind::parse(&r.adversary).ok_or_else(|| ConfigError::UnknownAdversary {
                run: run.clone(),
                id: r.adversary.clone(),
                known: known(AdversaryKind::ALL.iter().map(|k| k.id().to_string())),
            })?;
        let experiment =
            ExperimentKind::parse(&r.experiment).ok_or_else(|| ConfigError::UnknownExperiment {
                run: run.clone(),
                id: r.experiment.clone(),
                known: known(ExperimentKind::ALL.iter().map(|k| k.label().to_string())),
            })?;
        let trials_per_arm = r.trials_per_arm.unwrap_or(DEFAULT_TRIALS_PER_ARM);
        if trials_per_arm == 0 {
            return Err(ConfigError::Invalid {
                run,
                reason: "trials_per_arm must be positive".into(),
            });
        }
        let negligible_threshold = r
            .negligible_threshold
            .unwrap_or(DEFAULT_NEGLIGIBLE_THRESHOLD);
        if !(negligible_threshold > 0.0 && negligible_threshold < 1.0) {
            return Err(ConfigError::Invalid {
                run,
                reason: "negligible_threshold must lie in (0, 1)".into(),
            });
        }
        runs.push(RunConfig {
            name: run,
            experiment,
            scheme: r.scheme,
            adversary,
            trials_per_arm,
            seed,
            delay: r.delay,
            negligible_threshold,
            output: r.output,
            wall_clock: r.wall_clock,
        });
    }
    Ok(SuiteConfig { runs })
}

/// Parses a standalone scheme block, as taken by `calibrate`.
pub fn parse_scheme_config(text: &str) -> Result<SchemeConfig, ConfigError> {
    let scheme: SchemeConfig = serde_json::from_str(text)?;
    scheme.validate().map_err(|reason| ConfigError::Invalid {
        run: "<scheme>".into(),
        reason,
    })?;
    Ok(scheme)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"runs": [{
        "name": "r1", "experiment": "CCA2", "adversary": "random-guess",
        "scheme": {"id": "cs", "security_bits": 32}, "seed": 7
    }]}"#;

    #[test]
    fn minimal_run_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        let r = &cfg.runs[0];
        assert_eq!(r.trials_per_arm, 1000);
        assert_eq!(r.negligible_threshold, 0.05);
        assert_eq!(r.experiment, ExperimentKind::Cca2);
        assert_eq!(r.adversary, AdversaryKind::RandomGuess);
        assert_eq!(r.delay, DelayModel::default());
        assert_eq!(r.scheme.hash, HashId::Sha256);
        assert!(!r.scheme.fixed_time);
    }

    #[test]
    fn seed_is_mandatory() {
        let text = MINIMAL.replace(r#", "seed": 7"#, "");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::MissingSeed { .. })
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let run = r#"{"name": "same", "experiment": "CPA", "adversary": "random-guess",
            "scheme": {"id": "gm", "security_bits": 16}, "seed": 1}"#;
        let text = format!(r#"{{"runs": [{run}, {run}]}}"#);
        assert!(matches!(parse_config(&text), Err(ConfigError::DuplicateName(n)) if n == "same"));
    }

    #[test]
    fn unknown_ids_list_known_ones() {
        let err = parse_config(&MINIMAL.replace("random-guess", "oracle-whisperer")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("oracle-whisperer"));
        for k in AdversaryKind::ALL {
            assert!(msg.contains(k.id()), "{msg}");
        }
        let err = parse_config(&MINIMAL.replace(r#""cs""#, r#""rsa""#)).unwrap_err();
        assert!(err.to_string().contains("gm, cs"), "{err}");
        let err = parse_config(&MINIMAL.replace("CCA2", "CCA3")).unwrap_err();
        assert!(err.to_string().contains("CCA2_TA"), "{err}");
    }

    #[test]
    fn empty_suite_is_valid() {
        assert!(parse_config(r#"{"runs": []}"#).unwrap().runs.is_empty());
        assert!(parse_config("{}").unwrap().runs.is_empty());
    }

    #[test]
    fn bad_values_rejected() {
        assert!(parse_config(&MINIMAL.replace(r#""r1""#, r#""../x""#)).is_err());
        let zero = MINIMAL.replace(r#""seed": 7"#, r#""seed": 7, "trials_per_arm": 0"#);
        assert!(parse_config(&zero).is_err());
        let extra = MINIMAL.replace(r#""seed": 7"#, r#""seed": 7, "colour": 1"#);
        assert!(parse_config(&extra).is_err());
    }
}
