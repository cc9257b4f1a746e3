mod commands;
mod config;
mod data;
mod error;
mod eval;
mod gateway;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{CorrelateArgs, GenerateArgs, Probe};
use crate::config::ConfigArgs;
use crate::error::CliError;
use crate::eval::EvalKind;
use crate::run::Run;

/// Probe masked language models for constructional knowledge.
#[derive(Debug, Parser)]
#[command(name = "cxnprobe", version)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ad-hoc affinity on one sentence.
    Probe {
        #[command(subcommand)]
        what: ProbeCommand,
    },
    /// Run evaluations and write scores, a table and a manifest.
    Eval {
        #[arg(value_enum)]
        which: EvalKind,
    },
    /// N-gram counts and usage classification over text corpora.
    Corpus {
        #[command(subcommand)]
        what: CorpusCommand,
    },
    /// NPN sentence generation.
    Npn {
        #[command(subcommand)]
        what: NpnCommand,
    },
    /// Tables and benchmark correlation.
    Report {
        #[command(subcommand)]
        what: ReportCommand,
    },
    /// Serve the mock gateway over the wire protocol.
    MockAdapter {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// hashed, uniform or peaked=P.
        #[arg(long, default_value = "hashed")]
        mode: String,
        /// stdio or tcp:<port>.
        #[arg(long, default_value = "stdio")]
        listen: String,
        #[arg(long)]
        no_tagger: bool,
        #[arg(long)]
        max_positions: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum ProbeCommand {
    /// Probability of the original word with only that word masked.
    Global {
        #[arg(long)]
        text: String,
        /// Word index or word form.
        #[arg(long)]
        word: String,
    },
    /// Divergence at word i caused by also masking word j.
    Local {
        #[arg(long)]
        text: String,
        #[arg(long)]
        i: String,
        #[arg(long)]
        j: String,
    },
    /// Every pairwise local affinity.
    Matrix {
        #[arg(long)]
        text: String,
    },
}

#[derive(Debug, Subcommand)]
enum CorpusCommand {
    /// Count n-gram occurrences over a shard directory or a single file.
    Count {
        #[arg(long)]
        corpus: PathBuf,
        /// Phrase of 2 or 3 words (repeatable).
        #[arg(long = "query")]
        queries: Vec<String>,
        /// File with one phrase per line.
        #[arg(long)]
        queries_file: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Classify occurrences of a phrase as constructional or not.
    Classify {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long)]
        limit: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum NpnCommand {
    /// Generate one NPN sentence per noun and preposition via a chat endpoint.
    Generate {
        /// One noun per line.
        #[arg(long)]
        nouns: PathBuf,
        #[arg(long, value_delimiter = ',')]
        preps: Vec<String>,
        #[arg(long)]
        endpoint: String,
        #[arg(long, default_value = "gpt-4-0613")]
        llm_model: String,
        #[arg(long, default_value_t = 3)]
        max_attempts: u32,
    },
}

#[derive(Debug, Subcommand)]
enum ReportCommand {
    /// Build a model × evaluation table from score files.
    Assemble {
        #[arg(long = "scores", required = true, num_args = 1..)]
        scores: Vec<PathBuf>,
    },
    /// Correlate score columns with a benchmark column across models.
    Correlate {
        /// Score table (TSV); defaults to the bundled reference table.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Benchmark table (TSV); defaults to the bundled BabyLM scores.
        #[arg(long)]
        benchmark: Option<PathBuf>,
        #[arg(long, default_value = "macro_avg")]
        benchmark_column: String,
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
    },
}

fn dispatch(run: &mut Run, command: Command) -> Result<(), CliError> {
    match command {
        Command::Probe { what } => match what {
            ProbeCommand::Global { text, word } => {
                commands::probe(run, &text, Probe::Global { word })
            }
            ProbeCommand::Local { text, i, j } => {
                commands::probe(run, &text, Probe::Local { i, j })
            }
            ProbeCommand::Matrix { text } => commands::probe(run, &text, Probe::Matrix),
        },
        Command::Eval { which } => eval::run_eval(run, which),
        Command::Corpus { what } => match what {
            CorpusCommand::Count {
                corpus,
                queries,
                queries_file,
                threads,
            } => commands::corpus_count(run, &corpus, &queries, queries_file.as_deref(), threads),
            CorpusCommand::Classify {
                corpus,
                query,
                limit,
            } => commands::corpus_classify(run, &corpus, &query, limit),
        },
        Command::Npn {
            what:
                NpnCommand::Generate {
                    nouns,
                    preps,
                    endpoint,
                    llm_model,
                    max_attempts,
                },
        } => commands::npn_generate(
            run,
            GenerateArgs {
                nouns: &nouns,
                preps: &preps,
                endpoint: &endpoint,
                model: &llm_model,
                max_attempts,
            },
        ),
        Command::Report { what } => match what {
            ReportCommand::Assemble { scores } => commands::report_assemble(run, &scores),
            ReportCommand::Correlate {
                table,
                benchmark,
                benchmark_column,
                columns,
            } => commands::report_correlate(
                run,
                CorrelateArgs {
                    table: table.as_deref(),
                    benchmark: benchmark.as_deref(),
                    benchmark_column: &benchmark_column,
                    columns: &columns,
                },
            ),
        },
        Command::MockAdapter { .. } => unreachable!("handled without a run"),
    }
}

fn main() -> ExitCode {
    // usage errors are config errors (exit 1), not clap's default 2
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::MockAdapter {
            seed,
            mode,
            listen,
            no_tagger,
            max_positions,
        } => commands::mock_adapter(seed, &mode, &listen, !no_tagger, max_positions),
        command => cli.config.resolve().and_then(|config| {
            let argv: Vec<String> = std::env::args().skip(1).collect();
            let mut run = Run::start(argv, config)?;
            let result = dispatch(&mut run, command);
            run.finish(result)
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cxnprobe: {e}");
            e.exit_code()
        }
    }
}
