use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use indcca_core::games::{
    run_experiment, AdvantageEstimate, ExperimentKind, ExperimentParams, FaultTally, Verdict,
};
use indcca_core::schemes::{CsScheme, GmScheme, LeakyScheme, Scheme};
use indcca_core::timing::{calibrate_worst_case, wrap_fixed_time, Calibration, CalibrationSample};
use indcca_core::TranscriptStore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{CalibrationConfig, RunConfig, SchemeConfig, SuiteConfig};

/// Keys below this size are flagged as toy parameters in reports.
pub const TOY_KEY_BITS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub scheme_id: String,
    /// Full name of the constructed scheme, including wrappers.
    pub scheme: Option<String>,
    pub security_bits: u64,
    pub experiment: ExperimentKind,
    pub adversary: String,
    pub trials_per_arm: u64,
    pub seed: u64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub estimate: Option<AdvantageEstimate>,
    pub verdict: Option<Verdict>,
    pub faults: Option<FaultTally>,
    pub calibration: Option<Calibration>,
    pub transcript: Option<String>,
    pub transcript_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    /// Unix seconds; the only field that differs between identical runs.
    #[serde(default)]
    pub generated_at: Option<u64>,
    pub toy_parameters: bool,
    pub runs: Vec<RunReport>,
}

impl SuiteReport {
    pub fn any_failed(&self) -> bool {
        self.runs.iter().any(|r| r.status == RunStatus::Failed)
    }

    /// The report with its timestamp removed.
    pub fn body(&self) -> SuiteReport {
        SuiteReport {
            generated_at: None,
            ..self.clone()
        }
    }
}

fn derived_seed(label: &str, seed: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update(seed.to_be_bytes());
    h.finalize().into()
}

/// Base scheme plus leak wrapper, without fixed-time wrapping.
pub fn build_inner_scheme(cfg: &SchemeConfig) -> Result<Arc<dyn Scheme>, String> {
    cfg.validate()?;
    let base: Arc<dyn Scheme> = match cfg.id.as_str() {
        "gm" => {
            Arc::new(GmScheme::new(cfg.security_bits, cfg.message_bits).map_err(|e| e.to_string())?)
        }
        "cs" => Arc::new(CsScheme::new(cfg.security_bits, cfg.hash).map_err(|e| e.to_string())?),
        other => return Err(format!("unknown scheme `{other}`")),
    };
    Ok(if cfg.leak.is_zero() {
        base
    } else {
        Arc::new(LeakyScheme::new(base, cfg.leak))
    })
}

/// Worst-case calibration of the scheme described by `cfg` (fixed-time flag ignored).
pub fn calibrate(cfg: &SchemeConfig, default_seed: u64) -> Result<Calibration, String> {
    let inner = build_inner_scheme(cfg)?;
    calibrate_inner(
        inner.as_ref(),
        cfg.calibration.unwrap_or_default(),
        default_seed,
    )
}

fn calibrate_inner(
    scheme: &dyn Scheme,
    settings: CalibrationConfig,
    default_seed: u64,
) -> Result<Calibration, String> {
    let seed = settings.seed.unwrap_or(default_seed);
    let mut rng = ChaCha20Rng::from_seed(derived_seed("indcca/calibration", seed));
    let sample =
        CalibrationSample::draw(scheme, settings.keys, settings.messages_per_key, &mut rng)
            .map_err(|e| e.to_string())?;
    calibrate_worst_case(scheme, &sample, &mut rng).map_err(|e| e.to_string())
}

pub fn build_scheme(
    cfg: &SchemeConfig,
    run_seed: u64,
) -> Result<(Arc<dyn Scheme>, Option<Calibration>), String> {
    let inner = build_inner_scheme(cfg)?;
    if !cfg.fixed_time {
        return Ok((inner, None));
    }
    let cal = calibrate_inner(
        inner.as_ref(),
        cfg.calibration.unwrap_or_default(),
        run_seed,
    )?;
    Ok((Arc::new(wrap_fixed_time(inner, cal.config)), Some(cal)))
}

fn transcript_path(run: &RunConfig, out_dir: &Path) -> (PathBuf, String) {
    match &run.output {
        Some(p) if p.is_absolute() => (p.clone(), p.display().to_string()),
        Some(p) => (out_dir.join(p), p.display().to_string()),
        None => {
            let file = format!("{}.transcript.json", run.name);
            (out_dir.join(&file), file)
        }
    }
}

fn execute(run: &RunConfig, out_dir: &Path, report: &mut RunReport) -> Result<(), String> {
    let (scheme, calibration) = build_scheme(&run.scheme, run.seed)?;
    report.scheme = Some(scheme.name());
    report.calibration = calibration;
    let params = ExperimentParams {
        kind: run.experiment,
        trials_per_arm: run.trials_per_arm,
        master_seed: run.seed,
        delay: run.delay,
        negligible_threshold: run.negligible_threshold,
        wall_clock: run.wall_clock,
    };
    let store: TranscriptStore =
        run_experiment(scheme.as_ref(), &run.adversary, &params).map_err(|e| e.to_string())?;
    report.estimate = Some(store.estimate.clone());
    report.verdict = Some(store.verdict);
    report.faults = Some(store.faults);

    let bytes = serde_json::to_vec_pretty(&store).map_err(|e| e.to_string())?;
    let (path, shown) = transcript_path(run, out_dir);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
    }
    fs::write(&path, &bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    report.transcript = Some(shown);
    report.transcript_sha256 = Some(hex::encode(Sha256::digest(&bytes)));
    Ok(())
}

pub fn run_one(run: &RunConfig, out_dir: &Path) -> RunReport {
    let mut report = RunReport {
        name: run.name.clone(),
        scheme_id: run.scheme.id.clone(),
        scheme: None,
        security_bits: run.scheme.security_bits,
        experiment: run.experiment,
        adversary: run.adversary.id().to_string(),
        trials_per_arm: run.trials_per_arm,
        seed: run.seed,
        status: RunStatus::Ok,
        error: None,
        estimate: None,
        verdict: None,
        faults: None,
        calibration: None,
        transcript: None,
        transcript_sha256: None,
    };
    if let Err(e) = execute(run, out_dir, &mut report) {
        report.status = RunStatus::Failed;
        report.error = Some(e);
    }
    report
}

/// Runs every experiment, concurrently on the current rayon pool. Failures
/// are recorded per run; the report keeps config order.
pub fn run_suite(cfg: &SuiteConfig, out_dir: &Path) -> SuiteReport {
    let runs: Vec<RunReport> = cfg.runs.par_iter().map(|r| run_one(r, out_dir)).collect();
    SuiteReport {
        generated_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs()),
        toy_parameters: runs.iter().any(|r| r.security_bits < TOY_KEY_BITS),
        runs,
    }
}
