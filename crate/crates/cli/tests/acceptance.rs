//! End-to-end acceptance suite. Runs the demonstration matrix from
//! `configs/demo.json` and the standalone checks, printing one PASS/FAIL
//! line per criterion.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use indcca_cli::{
    build_scheme, emit_report, parse_config, run_suite, Format, RunReport, SuiteConfig, SuiteReport,
};
use indcca_core::adversaries::AdversaryKind;
use indcca_core::games::{
    estimate_advantage, run_experiment, ArmCounts, ExperimentKind, ExperimentParams, Verdict,
};
use indcca_core::numtheory::{mod_pow_ladder, mod_pow_leaky, CostLedger};
use indcca_core::schemes::{
    CsScheme, Decryption, GmScheme, HashId, LeakProfile, LeakyScheme, OpKind, Scheme, SchemeError,
};
use indcca_core::timing::{calibrate_worst_case, wrap_fixed_time, CalibrationSample};
use indcca_core::TranscriptStore;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Check = Result<String, String>;

const THRESHOLD: f64 = 0.05;
const STRONG: f64 = 0.95;

fn demo_config() -> SuiteConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.json");
    parse_config(&fs::read_to_string(path).expect("demo config")).expect("demo config parses")
}

fn row<'a>(report: &'a SuiteReport, name: &str) -> Result<&'a RunReport, String> {
    let r = report
        .runs
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| format!("row {name} missing"))?;
    if let Some(e) = &r.error {
        return Err(format!("row {name} failed: {e}"));
    }
    Ok(r)
}

fn advantage(r: &RunReport) -> f64 {
    r.estimate.as_ref().map(|e| e.advantage).unwrap_or(f64::NAN)
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn leaky_cs() -> Arc<dyn Scheme> {
    Arc::new(LeakyScheme::new(
        Arc::new(CsScheme::new(32, HashId::Sha256).unwrap()),
        LeakProfile {
            enc_leak: 10,
            dec_early_abort: true,
        },
    ))
}

fn correctness() -> Check {
    let leaky = leaky_cs();
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    let sample =
        CalibrationSample::draw(leaky.as_ref(), 32, 4, &mut rng).map_err(|e| e.to_string())?;
    let cal = calibrate_worst_case(leaky.as_ref(), &sample, &mut rng).map_err(|e| e.to_string())?;
    let schemes: Vec<Arc<dyn Scheme>> = vec![
        Arc::new(GmScheme::new(16, 8).unwrap()),
        Arc::new(CsScheme::new(32, HashId::Sha256).unwrap()),
        leaky.clone(),
        Arc::new(wrap_fixed_time(leaky, cal.config)),
    ];
    let mut failures = 0;
    for s in &schemes {
        for _ in 0..1000 {
            let kp = s.keygen(&mut rng).map_err(|e| e.to_string())?;
            let m = s
                .sample_message(&kp.pk, &mut rng)
                .map_err(|e| e.to_string())?;
            let c = s
                .encrypt(&kp.pk, &m, &mut rng, &mut CostLedger::new())
                .map_err(|e| e.to_string())?;
            let d = s
                .decrypt(&kp.sk, &c, &mut CostLedger::new())
                .map_err(|e| e.to_string())?;
            if d != Decryption::Plaintext(m) {
                failures += 1;
            }
        }
    }
    ensure(
        failures == 0,
        format!("{failures} failures over 4 schemes x 1000 (key, m)"),
    )
}

fn baseline(report: &SuiteReport) -> Check {
    let r = row(report, "baseline-cs-cca2")?;
    let adv = advantage(r);
    ensure(
        adv < THRESHOLD && r.verdict == Some(Verdict::ConsistentWithNegligible),
        format!(
            "random-guess vs CS/CCA2: advantage {adv:.4}, verdict {:?}",
            r.verdict
        ),
    )
}

fn cca2_malleability(report: &SuiteReport) -> Check {
    let r = row(report, "gm-malleability-cca2")?;
    let adv = advantage(r);
    ensure(
        adv >= STRONG && r.verdict == Some(Verdict::AdvantageDetected),
        format!(
            "malleability vs GM/CCA2: advantage {adv:.4}, verdict {:?}",
            r.verdict
        ),
    )
}

fn cca1_policy(report: &SuiteReport) -> Check {
    let r = row(report, "gm-malleability-cca1")?;
    let adv = advantage(r);
    let faults = r.faults.map(|f| f.adversarial).unwrap_or(0);
    ensure(
        adv < THRESHOLD,
        format!("malleability vs GM/CCA1: advantage {adv:.4}, {faults} faulted trials"),
    )
}

fn timing_attack(report: &SuiteReport) -> Check {
    let r = row(report, "timing-leaky-cs")?;
    let adv = advantage(r);
    ensure(
        adv >= STRONG,
        format!("timing distinguisher vs leaky CS/CCA2-TA: advantage {adv:.4}"),
    )
}

fn fixed_time_defense(report: &SuiteReport, cfg: &SuiteConfig, out_dir: &Path) -> Check {
    let r = row(report, "timing-fixed-time-cs")?;
    let adv = advantage(r);
    let cal = r.calibration.as_ref().ok_or("no calibration recorded")?;
    let t_enc = cal.config.t_ft_encrypt;
    let t_dec = cal.config.t_ft_decrypt;
    if adv >= THRESHOLD {
        return Err(format!("advantage {adv:.4}"));
    }

    let path = out_dir.join(r.transcript.as_deref().ok_or("no transcript")?);
    let store: TranscriptStore =
        serde_json::from_slice(&fs::read(&path).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let enc_costs: BTreeSet<u64> = store
        .trials
        .iter()
        .flat_map(|t| &t.timing_views)
        .filter(|v| v.op_kind == OpKind::Encrypt)
        .map(|v| v.compute_cost)
        .collect();
    if enc_costs != BTreeSet::from([t_enc]) {
        return Err(format!("encrypt costs {enc_costs:?}, t_ft_encrypt {t_enc}"));
    }

    // Same scheme, probed with crafted invalid ciphertexts.
    let run = cfg
        .runs
        .iter()
        .find(|c| c.name == r.name)
        .ok_or("row config missing")?;
    let (scheme, _) = build_scheme(&run.scheme, run.seed)?;
    let mut params = ExperimentParams::new(ExperimentKind::Cca2Ta, 100, run.seed);
    params.delay = run.delay;
    let probe = run_experiment(scheme.as_ref(), &AdversaryKind::EarlyAbortProbe, &params)
        .map_err(|e| e.to_string())?;
    let dec: Vec<u64> = probe
        .trials
        .iter()
        .flat_map(|t| &t.timing_views)
        .filter(|v| v.op_kind == OpKind::Decrypt)
        .map(|v| v.compute_cost)
        .collect();
    let rejected: u64 = probe
        .trials
        .iter()
        .filter_map(|t| t.diagnostics.as_ref()?["rejected"].as_u64())
        .sum();
    ensure(
        !dec.is_empty() && rejected > 0 && dec.iter().all(|&c| c == t_dec),
        format!(
            "advantage {adv:.4}; {} decrypt views ({rejected} rejections) all at t_ft_decrypt = {t_dec}; encrypt views all at {t_enc}",
            dec.len()
        ),
    )
}

fn sample_costs(
    scheme: &dyn Scheme,
    sample: &CalibrationSample,
    seed: u64,
) -> Result<(u64, u64), SchemeError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut enc = 0;
    for (pk, m) in &sample.encrypt {
        let mut l = CostLedger::new();
        scheme.encrypt(pk, m, &mut rng, &mut l)?;
        enc = enc.max(l.total());
    }
    let mut dec = 0;
    for (sk, c) in &sample.decrypt {
        let mut l = CostLedger::new();
        scheme.decrypt(sk, c, &mut l)?;
        dec = dec.max(l.total());
    }
    Ok((enc, dec))
}

fn calibration() -> Check {
    let gm_leaky: Arc<dyn Scheme> = Arc::new(LeakyScheme::new(
        Arc::new(GmScheme::new(16, 8).unwrap()),
        LeakProfile {
            enc_leak: 7,
            dec_early_abort: false,
        },
    ));
    let mut checked_samples = 0;
    for (i, scheme) in [leaky_cs(), gm_leaky].into_iter().enumerate() {
        for seed in 0..5u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(700 + 10 * i as u64 + seed);
            let sample = CalibrationSample::draw(scheme.as_ref(), 32, 4, &mut rng)
                .map_err(|e| e.to_string())?;
            let cal = calibrate_worst_case(scheme.as_ref(), &sample, &mut rng)
                .map_err(|e| e.to_string())?;
            let expected =
                sample_costs(scheme.as_ref(), &sample, seed).map_err(|e| e.to_string())?;
            if (cal.config.t_ft_encrypt, cal.config.t_ft_decrypt) != expected {
                return Err(format!(
                    "calibration {:?} != sample maximum {expected:?}",
                    cal.config
                ));
            }
            checked_samples += 1;
        }
    }

    // Fresh inputs from the same population never overflow the budgets.
    let scheme = leaky_cs();
    let mut rng = ChaCha20Rng::seed_from_u64(777);
    let sample =
        CalibrationSample::draw(scheme.as_ref(), 32, 4, &mut rng).map_err(|e| e.to_string())?;
    let cal =
        calibrate_worst_case(scheme.as_ref(), &sample, &mut rng).map_err(|e| e.to_string())?;
    let fixed = wrap_fixed_time(scheme, cal.config);
    let mut inputs = 0;
    while inputs < 1000 {
        let kp = fixed.keygen(&mut rng).map_err(|e| e.to_string())?;
        let (lo, hi) = fixed.extreme_messages(&kp.pk).map_err(|e| e.to_string())?;
        let mut messages = vec![lo, hi];
        for _ in 0..8 {
            messages.push(
                fixed
                    .sample_message(&kp.pk, &mut rng)
                    .map_err(|e| e.to_string())?,
            );
        }
        for m in messages {
            let c = fixed
                .encrypt(&kp.pk, &m, &mut rng, &mut CostLedger::new())
                .map_err(|e| format!("fresh encryption: {e}"))?;
            fixed
                .decrypt(&kp.sk, &c, &mut CostLedger::new())
                .map_err(|e| format!("fresh decryption: {e}"))?;
            inputs += 1;
        }
    }
    Ok(format!(
        "calibration equals sample maximum on {checked_samples} samples; {inputs} fresh inputs within budget"
    ))
}

fn naive_pow(base: u64, exp: u64, n: u64) -> u64 {
    let mut acc = 1 % n;
    for _ in 0..exp {
        acc = acc * base % n;
    }
    acc
}

fn constant_cost_primitive() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(808);
    let n = BigUint::from(4_294_967_291u64);
    let base = BigUint::from(123_456_789u64);
    let mut ladder_costs = BTreeSet::new();
    let mut leaky_costs = BTreeSet::new();
    for _ in 0..1000 {
        let exp = BigUint::from(rng.gen::<u32>() | 1 << 31);
        let mut l = CostLedger::new();
        mod_pow_ladder(&base, &exp, &n, 32, &mut l).map_err(|e| e.to_string())?;
        ladder_costs.insert(l.total());
        let mut l = CostLedger::new();
        mod_pow_leaky(&base, &exp, &n, &mut l).map_err(|e| e.to_string())?;
        let expected = (exp.bits() - 1) + (exp.count_ones() - 1);
        if l.total() != expected {
            return Err(format!(
                "leaky cost {} for exponent {exp}, expected {expected}",
                l.total()
            ));
        }
        leaky_costs.insert(l.total());
    }
    if ladder_costs.len() != 1 || leaky_costs.len() < 2 {
        return Err(format!(
            "ladder costs {ladder_costs:?}, leaky costs {leaky_costs:?}"
        ));
    }
    let cases = 10_000;
    for _ in 0..cases {
        let n = rng.gen_range(2..=1u64 << 16);
        let b = rng.gen_range(0..n);
        let e = rng.gen_range(0..=1u64 << 12);
        let want = BigUint::from(naive_pow(b, e, n));
        let (bb, eb, nb) = (BigUint::from(b), BigUint::from(e), BigUint::from(n));
        let leaky =
            mod_pow_leaky(&bb, &eb, &nb, &mut CostLedger::new()).map_err(|e| e.to_string())?;
        let ladder =
            mod_pow_ladder(&bb, &eb, &nb, 13, &mut CostLedger::new()).map_err(|e| e.to_string())?;
        if leaky != want || ladder != want {
            return Err(format!(
                "{b}^{e} mod {n}: naive {want}, leaky {leaky}, ladder {ladder}"
            ));
        }
    }
    Ok(format!(
        "ladder cost {:?} over 1000 exponents; leaky costs span {} values; {cases} cases match naive",
        ladder_costs,
        leaky_costs.len()
    ))
}

fn determinism(
    cfg: &SuiteConfig,
    first: &SuiteReport,
    first_dir: &Path,
    second_dir: &Path,
) -> Check {
    let second = run_suite(cfg, second_dir);
    let a = emit_report(&first.body(), Format::Json).map_err(|e| e.to_string())?;
    let b = emit_report(&second.body(), Format::Json).map_err(|e| e.to_string())?;
    if a != b {
        return Err("report bodies differ".into());
    }
    for r in &first.runs {
        let file = r.transcript.as_deref().ok_or("missing transcript")?;
        let x = fs::read(first_dir.join(file)).map_err(|e| e.to_string())?;
        let y = fs::read(second_dir.join(file)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("transcript {file} differs"));
        }
    }
    let digests: Vec<_> = second
        .runs
        .iter()
        .map(|r| r.transcript_sha256.clone())
        .collect();
    ensure(
        digests.iter().all(Option::is_some),
        format!(
            "{} runs: identical report bodies and transcript digests",
            digests.len()
        ),
    )
}

fn advantage_arithmetic() -> Check {
    let arm = |trials, ones| ArmCounts { trials, ones };
    let cases = [
        (arm(1000, 900), arm(1000, 100), 0.8),
        (arm(1000, 500), arm(1000, 500), 0.0),
        (arm(10, 0), arm(10, 10), 1.0),
        (arm(4, 3), arm(2, 1), 0.25),
        (arm(1000, 100), arm(1000, 900), 0.8),
    ];
    for (a0, a1, want) in cases {
        let got = estimate_advantage(a0, a1, 0, THRESHOLD).advantage;
        if got != want {
            return Err(format!("{a0:?} vs {a1:?}: {got} != {want}"));
        }
    }
    Ok(format!(
        "{} hand-set tables reproduce |p0 - p1| exactly",
        cases.len()
    ))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let cfg = demo_config();
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir_a: PathBuf = tmp.path().join("a");
    let dir_b: PathBuf = tmp.path().join("b");
    let report = run_suite(&cfg, &dir_a);

    let results: Vec<(u8, &str, Check)> = vec![
        (1, "correctness", correctness()),
        (2, "baseline fairness", baseline(&report)),
        (
            3,
            "CCA2 breaks malleable encryption",
            cca2_malleability(&report),
        ),
        (4, "oracle policy matters", cca1_policy(&report)),
        (
            5,
            "CCA2-TA breaks timing-leaky scheme",
            timing_attack(&report),
        ),
        (
            6,
            "fixed-time defense",
            fixed_time_defense(&report, &cfg, &dir_a),
        ),
        (7, "worst-case calibration", calibration()),
        (8, "constant-cost primitive", constant_cost_primitive()),
        (9, "determinism", determinism(&cfg, &report, &dir_a, &dir_b)),
        (10, "advantage arithmetic", advantage_arithmetic()),
    ];

    let mut failed = 0;
    for (id, name, result) in &results {
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail}");
            }
        }
    }
    if let Ok(table) = emit_report(&report, Format::Text) {
        println!("\n{table}");
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
