use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use indcca_cli::{calibrate, emit_report, parse_config, parse_scheme_config, run_suite, Format};
use indcca_core::adversaries::AdversaryKind;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUN_FAILED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "indcca",
    version,
    about = "Run indistinguishability experiment suites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a suite config and print the report.
    Run {
        config: PathBuf,
        /// json, csv or text.
        #[arg(long, default_value = "text")]
        format: String,
        /// Where transcripts are written.
        #[arg(long, default_value = "indcca-out")]
        out_dir: PathBuf,
        /// Worker threads (default: one per core).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List scheme ids usable in configs.
    ListSchemes,
    /// List adversary ids usable in configs.
    ListAdversaries,
    /// Calibrate fixed-time budgets for a scheme block and print them.
    Calibrate {
        scheme_config: PathBuf,
        /// Calibration seed when the block does not set one.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// json or text.
        #[arg(long, default_value = "text")]
        format: String,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err("--threads must be positive".into());
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| e.to_string())
}

fn run(config: PathBuf, format: &str, out_dir: PathBuf, threads: Option<usize>) -> ExitCode {
    let format: Format = match format.parse() {
        Ok(f) => f,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let text = match fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", config.display())),
    };
    let suite = match parse_config(&text) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let pool = match thread_pool(threads) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let report = pool.install(|| run_suite(&suite, &out_dir));
    match emit_report(&report, format) {
        Ok(doc) => print!("{doc}"),
        Err(e) => return fail(EXIT_RUN_FAILED, e),
    }
    for r in report.runs.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "run {} failed: {}",
            r.name,
            r.error.as_deref().unwrap_or_default()
        );
    }
    if report.any_failed() {
        ExitCode::from(EXIT_RUN_FAILED)
    } else {
        ExitCode::SUCCESS
    }
}

fn calibrate_cmd(path: PathBuf, seed: u64, format: &str, threads: Option<usize>) -> ExitCode {
    let format: Format = match format.parse() {
        Ok(f) => f,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", path.display())),
    };
    let scheme = match parse_scheme_config(&text) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let pool = match thread_pool(threads) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let cal = match pool.install(|| calibrate(&scheme, seed)) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_RUN_FAILED, e),
    };
    match format {
        Format::Text => {
            println!("t_ft_encrypt  {}", cal.config.t_ft_encrypt);
            println!("t_ft_decrypt  {}", cal.config.t_ft_decrypt);
            println!(
                "samples       {} encrypt, {} decrypt",
                cal.encrypt_samples, cal.decrypt_samples
            );
            println!(
                "cheapest      {} encrypt, {} decrypt",
                cal.encrypt_min, cal.decrypt_min
            );
            println!("note          {}", cal.note);
        }
        _ => match serde_json::to_string_pretty(&cal) {
            Ok(s) => println!("{s}"),
            Err(e) => return fail(EXIT_RUN_FAILED, e),
        },
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match cli.command {
        Command::Run {
            config,
            format,
            out_dir,
            threads,
        } => run(config, &format, out_dir, threads),
        Command::ListSchemes => {
            println!(
                "gm  Goldwasser-Micali; security_bits = prime size, message_bits = plaintext bits"
            );
            println!("cs  Cramer-Shoup over a safe-prime subgroup; security_bits = group size, hash = sha256|toy");
            println!();
            println!("modifiers: leak {{enc_leak, dec_early_abort}}, fixed_time, calibration {{keys, messages_per_key, seed}}");
            ExitCode::SUCCESS
        }
        Command::ListAdversaries => {
            for k in AdversaryKind::ALL {
                println!("{:<22}{}", k.id(), k.summary());
            }
            ExitCode::SUCCESS
        }
        Command::Calibrate {
            scheme_config,
            seed,
            format,
            threads,
        } => calibrate_cmd(scheme_config, seed, &format, threads),
    }
}
