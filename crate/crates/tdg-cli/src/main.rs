//! `tdg` — command-line front end for the template-based data generation
//! engine. See `tdg --help` for the subcommand list.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tdg_core::authoring::{self, DraftRequest, HttpDraftClient, StubDraftClient};
use tdg_core::dataset::{self, JsonlWriter};
use tdg_core::lexicon::{load_lexicon, Lexicon};
use tdg_core::pipeline::{generate_corpus, GenerationConfig};
use tdg_core::solver::DEFAULT_STEP_BUDGET;
use tdg_core::template::{parse_template, MetaTemplate};
use tdg_core::verifier::{self, run_reward_loop, Verdict};

#[derive(Parser)]
#[command(name = "tdg", version, about = "Template-based math word problem generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a verified problem corpus from a template directory.
    Generate(GenerateArgs),
    /// Re-verify every record in a JSONL corpus.
    Verify {
        /// Corpus file to check.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
    },
    /// Run the line-delimited JSON reward oracle on stdin/stdout.
    Reward,
    /// Print corpus statistics.
    Stats {
        /// Corpus file to analyze.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Emit machine-readable JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Draft a candidate meta-template for a topic.
    Draft {
        /// Topic of the word problem, e.g. "splitting a bill".
        #[arg(long)]
        topic: String,
        /// Use the offline stub client instead of the configured endpoint.
        #[arg(long)]
        stub: bool,
    },
    /// Dry-run a candidate template and report whether it is admissible.
    Audit {
        /// Candidate template file.
        #[arg(long)]
        template: PathBuf,
        /// Lexicon file.
        #[arg(long)]
        lexicon: PathBuf,
        /// Number of instantiate-render-verify cycles.
        #[arg(short = 'n', long = "cycles", default_value_t = 100)]
        n: u64,
        /// Base seed for the dry run.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// Directory scanned recursively for *.tdg.json templates.
    #[arg(long)]
    templates: PathBuf,
    /// Lexicon file.
    #[arg(long)]
    lexicon: PathBuf,
    /// Output corpus (JSON Lines).
    #[arg(long)]
    out: PathBuf,
    /// Run manifest output (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Instances to emit per template.
    #[arg(long = "per-template", default_value_t = 1000)]
    per_template: u64,
    /// Global seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads. Never affects output bytes.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Skip the NL-final-number consistency check.
    #[arg(long = "no-nl-check")]
    no_nl_check: bool,
    /// Reward assigned to rejected candidates (0 or -1). Rejected
    /// candidates are never emitted, so this only affects reward
    /// bookkeeping and is validated for range.
    #[arg(long = "reject-reward", default_value_t = 0, allow_hyphen_values = true)]
    reject_reward: i32,
}

/// Anything that should exit with status 2 (bad config, bad corpus, I/O).
struct ConfigError(String);

impl<E: std::fmt::Display> From<E> for ConfigError {
    fn from(e: E) -> Self {
        ConfigError(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Verify { input } => return run_or_exit2(cmd_verify(&input)),
        Command::Reward => cmd_reward(),
        Command::Stats { input, json } => cmd_stats(&input, json),
        Command::Draft { topic, stub } => cmd_draft(&topic, stub),
        Command::Audit { template, lexicon, n, seed } => {
            return run_or_exit2(cmd_audit(&template, &lexicon, n, seed))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(ConfigError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run_or_exit2(r: Result<ExitCode, ConfigError>) -> ExitCode {
    match r {
        Ok(code) => code,
        Err(ConfigError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_templates(dir: &Path) -> Result<Vec<MetaTemplate>, ConfigError> {
    let mut paths: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.to_string_lossy().ends_with(".tdg.json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(ConfigError(format!(
            "no *.tdg.json templates found under {}",
            dir.display()
        )));
    }
    let mut templates = Vec::with_capacity(paths.len());
    for path in paths {
        let source = fs::read_to_string(&path)?;
        let tpl = parse_template(&source)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        templates.push(tpl);
    }
    Ok(templates)
}

fn load_lexicon_file(path: &Path) -> Result<Lexicon, ConfigError> {
    let source = fs::read_to_string(path)?;
    load_lexicon(&source).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), ConfigError> {
    if args.reject_reward != 0 && args.reject_reward != -1 {
        return Err(ConfigError(format!(
            "--reject-reward must be 0 or -1, got {}",
            args.reject_reward
        )));
    }
    let templates = load_templates(&args.templates)?;
    let lex = load_lexicon_file(&args.lexicon)?;
    let cfg = GenerationConfig {
        global_seed: args.seed,
        per_template: args.per_template,
        nl_check: !args.no_nl_check,
        jobs: args.jobs.max(1),
        ..GenerationConfig::default()
    };

    let out_file = fs::File::create(&args.out)?;
    let mut sink = JsonlWriter::new(BufWriter::new(out_file));
    let manifest = generate_corpus(&templates, &lex, &cfg, &mut sink)?;
    let emitted = sink.count();
    sink.finish()?.flush()?;

    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&args.manifest, manifest_json + "\n")?;

    eprintln!(
        "emitted {emitted} records from {} templates ({} rejected, {} duplicates resampled)",
        manifest.templates.len(),
        manifest.totals.rejected,
        manifest.totals.duplicates_resampled,
    );
    Ok(())
}

fn cmd_verify(input: &Path) -> Result<ExitCode, ConfigError> {
    let records = dataset::read_records_from_path(input)?;
    let mut failures = 0u64;
    for r in &records {
        let verdict = verifier::verify(&r.solution_code, Some(&r.solution_nl), DEFAULT_STEP_BUDGET);
        let ok = match &verdict {
            Verdict::Accepted { result_rounded, .. } => *result_rounded == r.result,
            Verdict::Rejected { .. } => false,
        };
        if !ok {
            failures += 1;
            match verdict {
                Verdict::Accepted { result_rounded, .. } => eprintln!(
                    "{}: result mismatch (stored {}, recomputed {})",
                    r.id, r.result, result_rounded
                ),
                Verdict::Rejected { category, detail } => {
                    eprintln!("{}: rejected ({category}): {detail}", r.id)
                }
            }
        }
    }
    if failures == 0 {
        println!("ok: {} records verified", records.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL: {failures} of {} records failed verification", records.len());
        Ok(ExitCode::from(1))
    }
}

fn cmd_reward() -> Result<(), ConfigError> {
    let stdin = io::stdin();
    let stdout = io::stdout();
    run_reward_loop(stdin.lock(), stdout.lock(), DEFAULT_STEP_BUDGET)?;
    Ok(())
}

fn cmd_stats(input: &Path, json: bool) -> Result<(), ConfigError> {
    let records = dataset::read_records_from_path(input)?;
    let stats = dataset::compute_stats(&records)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&stats)?);
        return Ok(());
    }
    println!(
        "records: {}   templates: {}",
        stats.record_count, stats.template_count
    );
    println!("(whitespace tokens; not comparable to subword tokenizer counts)");
    println!();
    println!(
        "{:<16} {:>8} {:>8} {:>10} {:>10} | {:>8} {:>8} {:>10} {:>10}",
        "field", "tok.min", "tok.max", "tok.mean", "tok.std", "ch.min", "ch.max", "ch.mean", "ch.std"
    );
    for (name, f) in [
        ("problem", &stats.problem),
        ("solution_code", &stats.solution_code),
        ("solution_nl", &stats.solution_nl),
    ] {
        println!(
            "{:<16} {:>8} {:>8} {:>10.2} {:>10.2} | {:>8} {:>8} {:>10.2} {:>10.2}",
            name,
            f.tokens_min,
            f.tokens_max,
            f.tokens_mean,
            f.tokens_std,
            f.chars_min,
            f.chars_max,
            f.chars_mean,
            f.chars_std,
        );
    }
    Ok(())
}

fn cmd_draft(topic: &str, stub: bool) -> Result<(), ConfigError> {
    let req = DraftRequest::new(topic);
    let draft = if stub {
        authoring::draft_template(&req, &StubDraftClient)?
    } else {
        let client = HttpDraftClient::from_env()?;
        authoring::draft_template(&req, &client)?
    };
    println!("{draft}");
    Ok(())
}

fn cmd_audit(template: &Path, lexicon: &Path, n: u64, seed: u64) -> Result<ExitCode, ConfigError> {
    let source = fs::read_to_string(template)?;
    let lex = load_lexicon_file(lexicon)?;
    let report = authoring::audit_template(&source, &lex, n, seed);
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.admitted {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}
