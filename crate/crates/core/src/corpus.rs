//! Streaming n-gram counting, occurrence extraction and constructional-usage
//! classification over plain-text corpora.
//!
//! Words are whitespace-delimited chunks, compared on their core (edge
//! punctuation stripped) after lowercasing. An n-gram never spans a sentence
//! boundary: a newline, or a chunk ending in `.`, `?` or `!`. Overlapping
//! matches each count.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affinity::{analyze, global_affinities, AffinityError};
use crate::gateway::{Gateway, GatewayError};
use crate::model::{AnalyzedSentence, SkipReason};

pub const DEFAULT_USAGE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("an n-gram query needs 2 or 3 words, got {0}")]
    BadArity(usize),
    #[error("query word {0:?} is empty after normalization")]
    EmptyWord(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("counts line {line}: {message}")]
    BadCounts { line: usize, message: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("threshold must lie in [0, 1], got {0}")]
    BadThreshold(f64),
}

/// Case-folded word sequence of length 2 or 3.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NgramQuery {
    pub pattern: Vec<String>,
}

impl NgramQuery {
    pub fn new<S: AsRef<str>>(words: &[S]) -> Result<Self, CorpusError> {
        if !(2..=3).contains(&words.len()) {
            return Err(CorpusError::BadArity(words.len()));
        }
        let pattern = words
            .iter()
            .map(|w| {
                let n = crate::model::normalize_word(w.as_ref());
                if n.is_empty() {
                    Err(CorpusError::EmptyWord(w.as_ref().to_string()))
                } else {
                    Ok(n)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { pattern })
    }

    /// Parses a whitespace-separated phrase such as `"let alone"`.
    pub fn parse(phrase: &str) -> Result<Self, CorpusError> {
        Self::new(&phrase.split_whitespace().collect::<Vec<_>>())
    }

    pub fn n(&self) -> usize {
        self.pattern.len()
    }
}

impl fmt::Display for NgramQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pattern.join(" "))
    }
}

/// A word chunk of a line: byte ranges of the chunk and of its core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Chunk {
    start: usize,
    end: usize,
    core_start: usize,
    core_end: usize,
    ascii: bool,
    ends_sentence: bool,
}

static ASCII_WS: [bool; 128] = {
    let mut t = [false; 128];
    t[b' ' as usize] = true;
    t[b'\t' as usize] = true;
    t[b'\n' as usize] = true;
    t[0x0b] = true;
    t[0x0c] = true;
    t[b'\r' as usize] = true;
    t
};

#[inline]
fn char_at(line: &str, i: usize) -> char {
    line[i..].chars().next().expect("in bounds")
}

#[inline]
fn prev_char_start(b: &[u8], mut i: usize) -> usize {
    i -= 1;
    while b[i] & 0xC0 == 0x80 {
        i -= 1;
    }
    i
}

/// Iterates the word chunks of one line.
struct Chunks<'a> {
    line: &'a str,
    pos: usize,
}

impl<'a> Chunks<'a> {
    fn new(line: &'a str) -> Self {
        Self { line, pos: 0 }
    }
}

impl Iterator for Chunks<'_> {
    type Item = Chunk;

    #[inline]
    fn next(&mut self) -> Option<Chunk> {
        let line = self.line;
        let b = line.as_bytes();
        let n = b.len();
        let mut i = self.pos;
        // skip whitespace
        loop {
            if i >= n {
                self.pos = n;
                return None;
            }
            let c = b[i];
            if c < 0x80 {
                if !ASCII_WS[c as usize] {
                    break;
                }
                i += 1;
            } else {
                let ch = char_at(line, i);
                if !ch.is_whitespace() {
                    break;
                }
                i += ch.len_utf8();
            }
        }
        let start = i;
        let mut hi = 0u8;
        while i < n {
            let c = b[i];
            if c < 0x80 {
                if ASCII_WS[c as usize] {
                    break;
                }
                i += 1;
            } else {
                let ch = char_at(line, i);
                if ch.is_whitespace() {
                    break;
                }
                hi = 0x80;
                i += ch.len_utf8();
            }
        }
        let end = i;
        self.pos = end;

        let mut cs = start;
        while cs < end {
            let c = b[cs];
            if c < 0x80 {
                if c.is_ascii_alphanumeric() {
                    break;
                }
                cs += 1;
            } else {
                let ch = char_at(line, cs);
                if ch.is_alphanumeric() {
                    break;
                }
                cs += ch.len_utf8();
            }
        }
        let mut ce = end;
        while ce > cs {
            let c = b[ce - 1];
            if c < 0x80 {
                if c.is_ascii_alphanumeric() {
                    break;
                }
                ce -= 1;
            } else {
                let p = prev_char_start(b, ce);
                if char_at(line, p).is_alphanumeric() {
                    break;
                }
                ce = p;
            }
        }
        let (core_start, core_end) = if cs == ce { (start, end) } else { (cs, ce) };
        let last = b[end - 1];
        Some(Chunk {
            start,
            end,
            core_start,
            core_end,
            ascii: hi == 0,
            ends_sentence: matches!(last, b'.' | b'?' | b'!'),
        })
    }
}

const NONE: u32 = u32::MAX;

/// Multi-pattern counter over normalized word streams.
///
/// Query words get dense ids; each corpus word is mapped to an id through a
/// length and first-byte prefilter, so most words cost one table lookup.
#[derive(Debug, Clone)]
pub struct NgramCounter {
    queries: Vec<NgramQuery>,
    vocab: Vec<String>,
    by_word: HashMap<String, u32>,
    len_mask: u64,
    first_byte: [bool; 256],
    long_words: bool,
    /// Query ids per word id of the pattern's last word.
    ends_with: Vec<Vec<(usize, [u32; 3], usize)>>,
}

impl NgramCounter {
    pub fn new(queries: Vec<NgramQuery>) -> Self {
        let mut vocab: Vec<String> = Vec::new();
        let mut by_word: HashMap<String, u32> = HashMap::new();
        let mut len_mask = 0u64;
        let mut first_byte = [false; 256];
        let mut long_words = false;
        let mut ends_with: Vec<Vec<(usize, [u32; 3], usize)>> = Vec::new();
        for (q, query) in queries.iter().enumerate() {
            let mut ids = [NONE; 3];
            for (k, w) in query.pattern.iter().enumerate() {
                let id = *by_word.entry(w.clone()).or_insert_with(|| {
                    vocab.push(w.clone());
                    ends_with.push(Vec::new());
                    if w.is_ascii() {
                        if w.len() < 64 {
                            len_mask |= 1 << w.len();
                        } else {
                            long_words = true;
                        }
                        first_byte[w.as_bytes()[0] as usize] = true;
                    }
                    (vocab.len() - 1) as u32
                });
                ids[k] = id;
            }
            ends_with[ids[query.n() - 1] as usize].push((q, ids, query.n()));
        }
        Self {
            queries,
            vocab,
            by_word,
            len_mask,
            first_byte,
            long_words,
            ends_with,
        }
    }

    pub fn queries(&self) -> &[NgramQuery] {
        &self.queries
    }

    #[inline]
    fn word_id(&self, line: &str, c: &Chunk) -> u32 {
        let core = &line.as_bytes()[c.core_start..c.core_end];
        if c.ascii {
            let len = core.len();
            let len_ok = if len < 64 {
                self.len_mask & (1 << len) != 0
            } else {
                self.long_words
            };
            if !len_ok || !self.first_byte[core[0].to_ascii_lowercase() as usize] {
                return NONE;
            }
            for (id, w) in self.vocab.iter().enumerate() {
                if w.len() == len && w.as_bytes().eq_ignore_ascii_case(core) {
                    return id as u32;
                }
            }
            NONE
        } else {
            let lower = line[c.core_start..c.core_end].to_lowercase();
            self.by_word.get(&lower).copied().unwrap_or(NONE)
        }
    }

    #[inline]
    fn matches_at(&self, w: [u32; 3], hits: &mut impl FnMut(usize)) {
        let cur = w[2];
        if cur == NONE {
            return;
        }
        for &(q, ids, n) in &self.ends_with[cur as usize] {
            let ok = if n == 2 {
                ids[0] == w[1]
            } else {
                ids[0] == w[0] && ids[1] == w[1]
            };
            if ok {
                hits(q);
            }
        }
    }

    /// Adds the matches in one line (no embedded newlines) to `counts`.
    pub fn count_line(&self, line: &str, counts: &mut [u64]) {
        let mut w = [NONE; 3];
        for c in Chunks::new(line) {
            w = [w[1], w[2], self.word_id(line, &c)];
            self.matches_at(w, &mut |q| counts[q] += 1);
            if c.ends_sentence {
                w = [NONE; 3];
            }
        }
    }

    pub fn count_text(&self, text: &str) -> Counts {
        let mut counts = vec![0u64; self.queries.len()];
        for line in text.split('\n') {
            self.count_line(line, &mut counts);
        }
        self.counts(counts)
    }

    /// Counts a line-oriented stream; invalid UTF-8 is replaced, not fatal.
    pub fn count_reader<R: BufRead>(&self, mut reader: R) -> io::Result<(Counts, u64)> {
        let mut counts = vec![0u64; self.queries.len()];
        let mut buf = Vec::with_capacity(1 << 16);
        let mut bytes = 0u64;
        loop {
            buf.clear();
            let n = reader.read_until(b'\n', &mut buf)?;
            if n == 0 {
                break;
            }
            bytes += n as u64;
            match std::str::from_utf8(&buf) {
                Ok(s) => self.count_line(s.trim_end_matches('\n'), &mut counts),
                Err(_) => {
                    let s = String::from_utf8_lossy(&buf);
                    self.count_line(s.trim_end_matches('\n'), &mut counts);
                }
            }
        }
        Ok((self.counts(counts), bytes))
    }

    fn counts(&self, counts: Vec<u64>) -> Counts {
        Counts {
            queries: self.queries.clone(),
            counts,
        }
    }

    /// Every match in `line`, as byte ranges of the matched words' cores.
    fn line_matches(&self, line: &str, query: usize, out: &mut Vec<LineMatch>) {
        let mut w = [NONE; 3];
        let mut spans: [(usize, usize); 3] = [(0, 0); 3];
        let mut sentence_start: Option<usize> = None;
        let mut pending: Vec<Vec<(usize, usize)>> = Vec::new();
        let n = self.queries[query].n();
        for c in Chunks::new(line) {
            let s_start = *sentence_start.get_or_insert(c.start);
            w = [w[1], w[2], self.word_id(line, &c)];
            spans = [spans[1], spans[2], (c.core_start, c.core_end)];
            let mut hit = false;
            self.matches_at(w, &mut |q| hit |= q == query);
            if hit {
                pending.push(spans[3 - n..].to_vec());
            }
            if c.ends_sentence {
                for words in pending.drain(..) {
                    out.push(LineMatch {
                        sentence: (s_start, c.end),
                        words,
                    });
                }
                w = [NONE; 3];
                sentence_start = None;
            }
        }
        if let Some(s_start) = sentence_start {
            let end = line.trim_end().len();
            for words in pending.drain(..) {
                out.push(LineMatch {
                    sentence: (s_start, end),
                    words,
                });
            }
        }
    }
}

struct LineMatch {
    sentence: (usize, usize),
    words: Vec<(usize, usize)>,
}

/// Counts per query, in query order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub queries: Vec<NgramQuery>,
    pub counts: Vec<u64>,
}

impl Counts {
    pub fn get(&self, q: &NgramQuery) -> Option<u64> {
        self.queries
            .iter()
            .position(|x| x == q)
            .map(|i| self.counts[i])
    }

    /// Adds counts for the same query list.
    pub fn merge(&mut self, other: &Counts) {
        assert_eq!(
            self.queries, other.queries,
            "merging counts of different queries"
        );
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Phrase (words joined by one space) to count.
    pub fn as_map(&self) -> HashMap<String, u64> {
        self.queries
            .iter()
            .zip(&self.counts)
            .map(|(q, c)| (q.to_string(), *c))
            .collect()
    }

    /// `pattern<TAB>count` lines in query order.
    pub fn to_tsv(&self) -> String {
        self.queries
            .iter()
            .zip(&self.counts)
            .map(|(q, c)| format!("{q}\t{c}\n"))
            .collect()
    }
}

/// Reads `pattern<TAB>count` lines into a phrase → count map.
pub fn parse_counts_tsv(text: &str) -> Result<HashMap<String, u64>, CorpusError> {
    let mut out = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| CorpusError::BadCounts {
            line: n + 1,
            message,
        };
        let (pattern, count) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected pattern<TAB>count".into()))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|e| bad(format!("count {count:?}: {e}")))?;
        let q = NgramQuery::parse(pattern).map_err(|e| bad(e.to_string()))?;
        *out.entry(q.to_string()).or_default() += count;
    }
    Ok(out)
}

pub fn count_ngrams(text: &str, queries: &[NgramQuery]) -> Counts {
    NgramCounter::new(queries.to_vec()).count_text(text)
}

/// `.txt` and `.txt.gz` files directly under `dir`, sorted by path.
pub fn list_shards(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if path.is_file() && (name.ends_with(".txt") || name.ends_with(".txt.gz")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn open_shard(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let file = File::open(path)?;
    let reader: Box<dyn Read + Send> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::with_capacity(1 << 20, reader)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardError {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardedCounts {
    pub counts: Counts,
    pub bytes: u64,
    pub shards: usize,
    /// Shards that failed to read; their partial counts are discarded.
    pub errors: Vec<ShardError>,
}

/// Counts each shard independently (in parallel when `threads > 1`) and
/// merges in path order.
pub fn count_shards(paths: &[PathBuf], counter: &NgramCounter, threads: usize) -> ShardedCounts {
    let one = |path: &PathBuf| -> Result<(Counts, u64), ShardError> {
        open_shard(path)
            .and_then(|r| counter.count_reader(r))
            .map_err(|e| ShardError {
                path: path.display().to_string(),
                message: e.to_string(),
            })
    };
    let results: Vec<Result<(Counts, u64), ShardError>> = if threads > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| paths.par_iter().map(one).collect()),
            Err(_) => paths.iter().map(one).collect(),
        }
    } else {
        paths.iter().map(one).collect()
    };
    let mut merged = counter.counts(vec![0; counter.queries.len()]);
    let mut bytes = 0;
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok((c, b)) => {
                merged.merge(&c);
                bytes += b;
            }
            Err(e) => errors.push(e),
        }
    }
    ShardedCounts {
        counts: merged,
        bytes,
        shards: paths.len(),
        errors,
    }
}

/// One n-gram match with its sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub sentence: String,
    /// Byte ranges in `sentence` of each matched word's core.
    pub words: Vec<(usize, usize)>,
    /// 1-based line number in the source stream.
    pub line: usize,
}

/// All matches of `query` in a line-oriented stream, in stream order.
pub fn extract_occurrences<R: BufRead>(
    reader: R,
    query: &NgramQuery,
) -> io::Result<Vec<Occurrence>> {
    let counter = NgramCounter::new(vec![query.clone()]);
    let mut out = Vec::new();
    let mut found = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        found.clear();
        counter.line_matches(&line, 0, &mut found);
        for m in found.drain(..) {
            let (s, e) = m.sentence;
            out.push(Occurrence {
                sentence: line[s..e].to_string(),
                words: m.words.iter().map(|&(a, b)| (a - s, b - s)).collect(),
                line: n + 1,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageClassification {
    pub sentence: String,
    /// First and last matched word.
    pub phrase_offsets: [(usize, usize); 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub affinities: Option<[f64; 2]>,
    pub constructional: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<SkipReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageSummary {
    pub n_constructional: usize,
    /// All occurrences, skipped ones included.
    pub n_total: usize,
    pub n_skipped: usize,
    pub skipped: BTreeMap<SkipReason, usize>,
    pub threshold: f64,
    pub items: Vec<UsageClassification>,
}

/// Constructional iff the global affinity of both the first and the last
/// matched word (each masked alone) is at least `threshold`. Output order is
/// input order.
pub fn classify_usage<G: Gateway + ?Sized>(
    occurrences: &[Occurrence],
    gw: &G,
    threshold: f64,
) -> Result<UsageSummary, CorpusError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CorpusError::BadThreshold(threshold));
    }
    let mut analyzed: Vec<Result<AnalyzedSentence, SkipReason>> =
        Vec::with_capacity(occurrences.len());
    for (k, occ) in occurrences.iter().enumerate() {
        analyzed.push(match analyze(gw, &format!("occ{k}"), &occ.sentence) {
            Ok(s) => Ok(s),
            Err(AffinityError::Skipped { reason, .. }) => Err(reason),
            Err(AffinityError::Gateway(GatewayError::Encoding(_))) => {
                Err(SkipReason::OffsetMismatch)
            }
            Err(AffinityError::Gateway(e)) => return Err(e.into()),
            Err(e) => return Err(GatewayError::Transport(e.to_string()).into()),
        });
    }
    let mut items = Vec::with_capacity(occurrences.len());
    let mut targets: Vec<(&AnalyzedSentence, usize)> = Vec::new();
    let mut owners: Vec<usize> = Vec::new();
    for (k, occ) in occurrences.iter().enumerate() {
        let first = occ.words[0];
        let last = *occ.words.last().expect("non-empty match");
        let mut item = UsageClassification {
            sentence: occ.sentence.clone(),
            phrase_offsets: [first, last],
            affinities: None,
            constructional: false,
            skipped: None,
        };
        match &analyzed[k] {
            Ok(s) => match (
                s.word_containing(first.0, first.1),
                s.word_containing(last.0, last.1),
            ) {
                (Some(i), Some(j)) => {
                    targets.push((s, i));
                    targets.push((s, j));
                    owners.push(k);
                }
                _ => item.skipped = Some(SkipReason::TargetNotFound),
            },
            Err(r) => item.skipped = Some(*r),
        }
        items.push(item);
    }
    let values = global_affinities(gw, &targets);
    for (pair, &k) in values.chunks(2).zip(&owners) {
        let item = &mut items[k];
        match (&pair[0], &pair[1]) {
            (Ok(a), Ok(b)) => {
                item.affinities = Some([*a, *b]);
                item.constructional = *a >= threshold && *b >= threshold;
            }
            (Err(e), _) | (_, Err(e)) => match e.skip_reason() {
                Some(r) => item.skipped = Some(r),
                None => return Err(GatewayError::Transport(e.to_string()).into()),
            },
        }
    }
    let mut skipped = BTreeMap::new();
    for it in &items {
        if let Some(r) = it.skipped {
            *skipped.entry(r).or_default() += 1;
        }
    }
    Ok(UsageSummary {
        n_constructional: items.iter().filter(|i| i.constructional).count(),
        n_total: items.len(),
        n_skipped: skipped.values().sum(),
        skipped,
        threshold,
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockGateway;

    fn q(p: &str) -> NgramQuery {
        NgramQuery::parse(p).unwrap()
    }

    #[test]
    fn overlapping_matches_each_count() {
        let c = count_ngrams("a b a b a", &[q("a b")]);
        assert_eq!(c.counts, vec![2]);
    }

    #[test]
    fn normalization_and_boundaries() {
        let text = "Much less, MUCH LESS! much. less\n\"much\nless\" much (less)";
        let c = count_ngrams(text, &[q("much less")]);
        // "Much less," and "MUCH LESS!" and "much (less)"
        assert_eq!(c.counts, vec![3]);
    }

    #[test]
    fn trigram_and_unicode_whitespace() {
        let text = "day\u{a0}by\u{2003}day and Día por día";
        let c = count_ngrams(text, &[q("day by day"), q("día por día")]);
        assert_eq!(c.counts, vec![1, 1]);
    }

    #[test]
    fn arity_is_checked() {
        assert!(matches!(
            NgramQuery::parse("alone"),
            Err(CorpusError::BadArity(1))
        ));
        assert!(matches!(
            NgramQuery::parse("a b c d"),
            Err(CorpusError::BadArity(4))
        ));
    }

    #[test]
    fn extraction_recounts_to_counter() {
        let text = "He has not been tried, much less convicted. It rained much less. Much less\nmuch less much less";
        let query = q("much less");
        let occ = extract_occurrences(text.as_bytes(), &query).unwrap();
        assert_eq!(occ.len() as u64, count_ngrams(text, &[query]).counts[0]);
        assert_eq!(occ.len(), 5);
        assert_eq!(
            occ[0].sentence,
            "He has not been tried, much less convicted."
        );
        let (s, e) = occ[0].words[1];
        assert_eq!(&occ[0].sentence[s..e], "less");
        assert_eq!(occ[2].sentence, "Much less");
        assert_eq!(occ[3].line, 2);
    }

    #[test]
    fn tsv_round_trip() {
        let c = count_ngrams("let alone let alone", &[q("let alone"), q("much less")]);
        assert_eq!(c.to_tsv(), "let alone\t2\nmuch less\t0\n");
        let back = parse_counts_tsv(&c.to_tsv()).unwrap();
        assert_eq!(back["let alone"], 2);
    }

    #[test]
    fn peaked_targets_are_constructional() {
        let occ = extract_occurrences(
            "none is strong let alone certain".as_bytes(),
            &q("let alone"),
        )
        .unwrap();
        let high = classify_usage(&occ, &MockGateway::peaked(0.95), 0.9).unwrap();
        assert_eq!((high.n_constructional, high.n_total), (1, 1));
        let low = classify_usage(&occ, &MockGateway::uniform(), 0.9).unwrap();
        assert_eq!(
            (low.n_constructional, low.n_total, low.n_skipped),
            (0, 1, 0)
        );
    }

    #[test]
    fn classify_tallies_skips_separately() {
        let occ = extract_occurrences(
            "much less extraordinary\nwe extraordinarily much less".as_bytes(),
            &q("much less"),
        )
        .unwrap();
        let long = "x ".repeat(200) + "much less";
        let mut all = occ.clone();
        all.extend(extract_occurrences(long.as_bytes(), &q("much less")).unwrap());
        let s = classify_usage(&all, &MockGateway::new(1), 0.9).unwrap();
        assert_eq!(s.n_total, 3);
        assert_eq!(s.skipped.get(&SkipReason::TooLong), Some(&1));
        assert_eq!(s.items[2].skipped, Some(SkipReason::TooLong));
    }
}
