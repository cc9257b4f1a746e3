use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use cxnprobe::affinity::{analyze, global_record, local_record, pairwise_matrix};
use cxnprobe::corpus::{
    classify_usage, count_shards, extract_occurrences, list_shards, open_shard, NgramCounter,
    NgramQuery,
};
use cxnprobe::datasets::generate::{generate_npn, ChatCompletionEndpoint, GenerationConfig};
use cxnprobe::datasets::NPN_PREPOSITIONS;
use cxnprobe::evals::{correlate_with_benchmark, EvalScore};
use cxnprobe::gateway::protocol::serve;
use cxnprobe::gateway::{Gateway, MockGateway};
use cxnprobe::model::{normalize_word, AnalyzedSentence};
use cxnprobe::report::ReportTable;
use serde::Serialize;
use serde_json::json;

use crate::config::ENV_LLM_API_KEY;
use crate::data::{read_input, SAMPLE_TABLE1, SAMPLE_TABLE3};
use crate::error::CliError;
use crate::gateway::{self, GatewaySpec};
use crate::run::Run;

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializable");
        out.push(b'\n');
    }
    out
}

fn open_gateway(run: &mut Run) -> Result<Box<dyn Gateway>, CliError> {
    let c = &run.config;
    let gw = gateway::open(&c.gateway, c.seed, c.parallel, c.cache_dir.as_deref())?;
    run.manifest.model = Some(gw.handshake()?);
    Ok(Box::new(gw))
}

/// Word index from either a number or a word form (first match).
fn word_index(s: &AnalyzedSentence, word: &str) -> Result<usize, CliError> {
    if let Ok(i) = word.parse::<usize>() {
        return Ok(i);
    }
    let want = normalize_word(word);
    (0..s.len())
        .find(|&i| normalize_word(s.core(i)) == want)
        .ok_or_else(|| CliError::Config(format!("no word {word:?} in sentence")))
}

pub enum Probe {
    Global { word: String },
    Local { i: String, j: String },
    Matrix,
}

pub fn probe(run: &mut Run, text: &str, what: Probe) -> Result<(), CliError> {
    let gw = open_gateway(run)?;
    let s = analyze(gw.as_ref(), "probe", text)?;
    let line = match what {
        Probe::Global { word } => {
            serde_json::to_value(global_record(gw.as_ref(), &s, word_index(&s, &word)?)?)
        }
        Probe::Local { i, j } => {
            let (i, j) = (word_index(&s, &i)?, word_index(&s, &j)?);
            serde_json::to_value(local_record(gw.as_ref(), &s, i, j)?)
        }
        Probe::Matrix => serde_json::to_value(pairwise_matrix(gw.as_ref(), &s)?),
    }
    .expect("serializable");
    let words: Vec<&str> = (0..s.len()).map(|i| s.core(i)).collect();
    let out = json!({"sentence": text, "words": words, "result": line});
    println!("{out}");
    run.write("probe.jsonl", &jsonl(&[out]))
}

fn shard_paths(corpus: &Path) -> Result<Vec<PathBuf>, CliError> {
    if corpus.is_file() {
        Ok(vec![corpus.to_path_buf()])
    } else {
        let shards = list_shards(corpus)?;
        if shards.is_empty() {
            return Err(CliError::Dataset(format!(
                "no .txt or .txt.gz shards in {}",
                corpus.display()
            )));
        }
        Ok(shards)
    }
}

fn queries(phrases: &[String], file: Option<&Path>) -> Result<Vec<NgramQuery>, CliError> {
    let mut all: Vec<String> = phrases.to_vec();
    if let Some(f) = file {
        let text = std::fs::read_to_string(f)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", f.display())))?;
        all.extend(
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(str::to_string),
        );
    }
    if all.is_empty() {
        return Err(CliError::Config("no n-gram queries given".into()));
    }
    all.iter()
        .map(|p| NgramQuery::parse(p).map_err(CliError::from))
        .collect()
}

pub fn corpus_count(
    run: &mut Run,
    corpus: &Path,
    phrases: &[String],
    query_file: Option<&Path>,
    threads: usize,
) -> Result<(), CliError> {
    let counter = NgramCounter::new(queries(phrases, query_file)?);
    let shards = shard_paths(corpus)?;
    let result = count_shards(&shards, &counter, threads.max(1));
    run.detail("corpus", corpus.display().to_string());
    run.detail(
        "shards",
        shards
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>(),
    );
    run.detail("bytes", result.bytes);
    run.detail("threads", threads);
    run.detail("shard_errors", &result.errors);
    let tsv = result.counts.to_tsv();
    print!("{tsv}");
    run.write("counts.tsv", tsv.as_bytes())?;
    match result.errors.first() {
        Some(e) => Err(CliError::Dataset(format!(
            "{} of {} shards unreadable (first: {}: {})",
            result.errors.len(),
            shards.len(),
            e.path,
            e.message
        ))),
        None => Ok(()),
    }
}

pub fn corpus_classify(
    run: &mut Run,
    corpus: &Path,
    phrase: &str,
    limit: Option<usize>,
) -> Result<(), CliError> {
    let query = NgramQuery::parse(phrase)?;
    let mut occurrences = Vec::new();
    for shard in shard_paths(corpus)? {
        let reader = open_shard(&shard)
            .map_err(|e| CliError::Dataset(format!("{}: {e}", shard.display())))?;
        let found = extract_occurrences(reader, &query)
            .map_err(|e| CliError::Dataset(format!("{}: {e}", shard.display())))?;
        occurrences.extend(found);
        if limit.is_some_and(|n| occurrences.len() >= n) {
            break;
        }
    }
    if let Some(n) = limit {
        occurrences.truncate(n);
    }
    let gw = open_gateway(run)?;
    let summary = classify_usage(&occurrences, gw.as_ref(), run.config.threshold)?;
    run.write("usage.jsonl", &jsonl(&summary.items))?;
    let head = json!({
        "query": query.to_string(),
        "n_constructional": summary.n_constructional,
        "n_total": summary.n_total,
        "n_skipped": summary.n_skipped,
        "skipped": summary.skipped,
        "threshold": summary.threshold,
    });
    println!("{head}");
    run.detail("summary", head);
    Ok(())
}

pub struct GenerateArgs<'a> {
    pub nouns: &'a Path,
    pub preps: &'a [String],
    pub endpoint: &'a str,
    pub model: &'a str,
    pub max_attempts: u32,
}

pub fn npn_generate(run: &mut Run, args: GenerateArgs) -> Result<(), CliError> {
    let key = std::env::var(ENV_LLM_API_KEY)
        .map_err(|_| CliError::Config(format!("{ENV_LLM_API_KEY} is not set")))?;
    let (bytes, source) = read_input(Some(args.nouns), "", "")?;
    run.manifest.inputs.insert("nouns".into(), source);
    let nouns: Vec<String> = String::from_utf8_lossy(&bytes)
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let preps: Vec<String> = if args.preps.is_empty() {
        NPN_PREPOSITIONS.iter().map(|p| p.to_string()).collect()
    } else {
        args.preps.to_vec()
    };
    let config = GenerationConfig {
        model: args.model.to_string(),
        max_attempts: args.max_attempts,
        ..GenerationConfig::default()
    };
    run.detail("generation", &config);
    run.detail("endpoint", args.endpoint);
    let endpoint = ChatCompletionEndpoint::new(args.endpoint, key, config.clone());
    let (records, report) = generate_npn(&nouns, &preps, &endpoint, config.max_attempts)?;
    // acceptability is added by annotation before loading
    let lines: Vec<_> = records
        .iter()
        .map(|r| {
            json!({
                "id": r.id,
                "noun": r.meta_str("noun"),
                "preposition": r.label,
                "sentence": r.sentence,
            })
        })
        .collect();
    run.write("npn_generated.jsonl", &jsonl(&lines))?;
    run.write("npn_flagged.jsonl", &jsonl(&report.flagged))?;
    run.detail(
        "report",
        json!({"requested": report.requested, "generated": report.generated,
               "retries": report.retries, "flagged": report.flagged.len()}),
    );
    eprintln!(
        "generated {} of {} ({} retries, {} flagged)",
        report.generated,
        report.requested,
        report.retries,
        report.flagged.len()
    );
    Ok(())
}

pub fn report_assemble(run: &mut Run, files: &[PathBuf]) -> Result<(), CliError> {
    let mut scores = Vec::new();
    for f in files {
        let (bytes, source) = read_input(Some(f), "", "")?;
        run.manifest.inputs.insert(f.display().to_string(), source);
        for (n, line) in bytes.lines().enumerate() {
            let line = line.map_err(|e| CliError::Dataset(format!("{}: {e}", f.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let s: EvalScore = serde_json::from_str(&line)
                .map_err(|e| CliError::Dataset(format!("{} line {}: {e}", f.display(), n + 1)))?;
            scores.push(s);
        }
    }
    if scores.is_empty() {
        return Err(CliError::Dataset("no scores to assemble".into()));
    }
    run.write_table(&scores)?;
    let name = format!("table.{}", run.config.format.extension());
    let text = std::fs::read_to_string(run.path(&name))
        .map_err(|e| CliError::output(&run.path(&name), e))?;
    print!("{text}");
    Ok(())
}

pub struct CorrelateArgs<'a> {
    pub table: Option<&'a Path>,
    pub benchmark: Option<&'a Path>,
    pub benchmark_column: &'a str,
    pub columns: &'a [String],
}

pub fn report_correlate(run: &mut Run, args: CorrelateArgs) -> Result<(), CliError> {
    let mut load = |path: Option<&Path>, name: &str, builtin: &'static str| {
        let (bytes, source) = read_input(path, name, builtin)?;
        run.manifest.inputs.insert(name.to_string(), source);
        let text = String::from_utf8(bytes).map_err(|e| CliError::Dataset(e.to_string()))?;
        Ok::<_, CliError>(ReportTable::parse_tsv(&text)?)
    };
    let table = load(args.table, "table1", SAMPLE_TABLE1)?;
    let bench = load(args.benchmark, "table3", SAMPLE_TABLE3)?;
    if !bench.columns.iter().any(|c| c == args.benchmark_column) {
        return Err(CliError::Dataset(format!(
            "benchmark has no column {:?}",
            args.benchmark_column
        )));
    }
    let benchmark: BTreeMap<String, f64> = bench.column_map(args.benchmark_column);
    let columns = (!args.columns.is_empty()).then_some(args.columns);
    let corr = correlate_with_benchmark(&table, &benchmark, columns)?;
    let mut json = serde_json::to_vec_pretty(&corr).expect("serializable");
    json.push(b'\n');
    run.write("correlation.json", &json)?;
    match corr.sd_r {
        Some(sd) => println!(
            "mean r = {:.4}, sd = {:.4}, models = {}",
            corr.mean_r,
            sd,
            corr.models.len()
        ),
        None => println!(
            "mean r = {:.4}, models = {}",
            corr.mean_r,
            corr.models.len()
        ),
    }
    for c in &corr.per_column {
        match (c.r, &c.excluded) {
            (Some(r), _) => println!("{}\t{r:.4}", c.column),
            (None, Some(why)) => println!("{}\texcluded: {why}", c.column),
            (None, None) => println!("{}\texcluded", c.column),
        }
    }
    Ok(())
}

/// Serves the mock over stdio, or over TCP (one thread per connection).
pub fn mock_adapter(
    seed: u64,
    mode: &str,
    listen: &str,
    tagger: bool,
    max_positions: Option<usize>,
) -> Result<(), CliError> {
    let spec: GatewaySpec = format!("mock:{mode}").parse()?;
    let GatewaySpec::Mock(mode) = spec else {
        unreachable!("mock prefix");
    };
    let mut gw = MockGateway::with_mode(seed, mode);
    if !tagger {
        gw = gw.without_tagger();
    }
    if let Some(n) = max_positions {
        gw = gw.with_max_positions(n);
    }
    let transport = |e: std::io::Error| CliError::Gateway(e.into());
    if listen == "stdio" {
        let stdin = std::io::stdin().lock();
        let stdout = BufWriter::new(std::io::stdout().lock());
        return serve(&gw, BufReader::new(stdin), stdout).map_err(transport);
    }
    let port = listen
        .strip_prefix("tcp:")
        .ok_or_else(|| CliError::Config(format!("bad --listen {listen:?}")))?;
    let addr = if port.contains(':') {
        port.to_string()
    } else {
        format!("127.0.0.1:{port}")
    };
    let listener = TcpListener::bind(&addr).map_err(transport)?;
    eprintln!("listening on {}", listener.local_addr().map_err(transport)?);
    std::io::stderr().flush().ok();
    for stream in listener.incoming() {
        let stream = stream.map_err(transport)?;
        let gw = gw.clone();
        std::thread::spawn(move || {
            let reader = match stream.try_clone() {
                Ok(r) => BufReader::new(r),
                Err(_) => return,
            };
            let _ = serve(&gw, reader, BufWriter::new(stream));
        });
    }
    Ok(())
}
