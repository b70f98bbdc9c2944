use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::suite::{RunReport, RunStatus, SuiteReport, TOY_KEY_BITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown format `{0}` (known: json, csv, text)")]
    UnknownFormat(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" | "table" | "text-table" => Ok(Format::Text),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

pub const TOY_WARNING: &str =
    "WARNING: toy parameters (keys under 64 bits); results demonstrate the games, not real-world security";

pub fn emit_report(report: &SuiteReport, format: Format) -> Result<String, ReportError> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        Format::Csv => csv_report(report),
        Format::Text => Ok(text_report(report)),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn status(r: &RunReport) -> &'static str {
    match r.status {
        RunStatus::Ok => "ok",
        RunStatus::Failed => "failed",
    }
}

fn csv_report(report: &SuiteReport) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "name",
        "scheme",
        "security_bits",
        "experiment",
        "adversary",
        "trials_per_arm",
        "seed",
        "status",
        "p_exp0",
        "p_exp1",
        "advantage",
        "ci95_halfwidth",
        "verdict",
        "adversarial_faults",
        "execution_faults",
        "transcript_sha256",
        "error",
    ])?;
    for r in &report.runs {
        let est = r.estimate.as_ref();
        w.write_record([
            r.name.clone(),
            r.scheme.clone().unwrap_or_else(|| r.scheme_id.clone()),
            r.security_bits.to_string(),
            r.experiment.to_string(),
            r.adversary.clone(),
            r.trials_per_arm.to_string(),
            r.seed.to_string(),
            status(r).to_string(),
            opt(est.map(|e| e.p_exp0)),
            opt(est.map(|e| e.p_exp1)),
            opt(est.map(|e| e.advantage)),
            opt(est.map(|e| e.ci95_halfwidth)),
            opt(r.verdict),
            opt(r.faults.map(|f| f.adversarial)),
            opt(r.faults.map(|f| f.execution)),
            r.transcript_sha256.clone().unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

fn text_report(report: &SuiteReport) -> String {
    let header = [
        "run",
        "scheme",
        "experiment",
        "adversary",
        "advantage",
        "ci95",
        "verdict",
    ];
    let rows: Vec<[String; 7]> = report
        .runs
        .iter()
        .map(|r| {
            let (adv, ci) = match &r.estimate {
                Some(e) => (
                    format!("{:.4}", e.advantage),
                    format!("±{:.4}", e.ci95_halfwidth),
                ),
                None => ("-".into(), "-".into()),
            };
            let verdict = match (&r.verdict, &r.error) {
                (Some(v), _) => v.to_string(),
                (None, Some(e)) => format!("FAILED: {e}"),
                (None, None) => "-".into(),
            };
            let mut scheme = format!("{}-{}", r.scheme_id, r.security_bits);
            if let Some(full) = &r.scheme {
                if full.contains("leaky[") {
                    scheme.push_str(" leaky");
                }
                if full.starts_with("fixed_time[") {
                    scheme.push_str(" fixed-time");
                }
            }
            [
                r.name.clone(),
                scheme,
                r.experiment.to_string(),
                r.adversary.clone(),
                adv,
                ci,
                verdict,
            ]
        })
        .collect();

    let mut widths = header.map(|h| h.chars().count());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    if report.runs.iter().any(|r| r.security_bits < TOY_KEY_BITS) {
        out.push_str(TOY_WARNING);
        out.push_str("\n\n");
    }
    let line = |out: &mut String, cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&mut out, &header.map(String::from));
    line(&mut out, &widths.map(|w| "-".repeat(w)));
    for row in &rows {
        line(&mut out, row);
    }
    if rows.is_empty() {
        out.push_str("(no runs)\n");
    }
    out
}
