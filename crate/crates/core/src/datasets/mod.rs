//! Dataset loaders, validators and the common-vocabulary filter.
//!
//! Loaders read UTF-8 JSONL, one item per line, blank lines ignored. A bad line
//! is rejected with a reason and never aborts the load. For every loader
//! `lines == accepted_lines + sum(rejected_lines)`.
//!
//! Canonical line schemas:
//!
//! * CEC, multi-that and CoGS: an [`EvalRecord`] as serialized here
//!   (`{"id","dataset","sentence","label","targets":[{"start","end","role"}],"meta"}`).
//! * MAGPIE: one sentence per line,
//!   `{"id","sentence","confidence","words":[{"start","end","text","label"}]}`;
//!   each surviving word becomes its own record.
//! * NPN: `{"id","noun","preposition","sentence","acceptability"}`.
//!
//! Offsets are byte offsets into `sentence`, end exclusive.

pub mod generate;

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::affinity::{analyze, AffinityError};
use crate::gateway::{Gateway, GatewayError};
use crate::model::{maskable, normalize_word, segment_words, AnalyzedSentence, SkipReason};

pub use generate::{
    build_prompt, generate_npn, ChatCompletionEndpoint, CompletionEndpoint, GenerationConfig,
    GenerationReport, NpnCandidate, NPN_PROMPT_TEMPLATE,
};

pub const CEC_LABELS: [&str; 3] = ["CEC", "EAP", "AAP"];
pub const MAGPIE_LABELS: [&str; 2] = ["literal", "figurative"];
pub const NPN_PREPOSITIONS: [&str; 4] = ["after", "upon", "by", "to"];
pub const MAGPIE_MIN_CONFIDENCE: f64 = 0.99;
pub const NPN_ACCEPTABLE: i64 = 4;

pub const CONSTRUCTIONS: [&str; 6] = [
    "causative-with",
    "comparative-correlative",
    "conative",
    "let-alone",
    "much-less",
    "way-manner",
];

/// Fixed-word roles each CoGS construction must carry, with the surface word.
pub fn construction_roles(construction: &str) -> Option<&'static [(&'static str, &'static str)]> {
    Some(match construction {
        "causative-with" => &[("with", "with")],
        "comparative-correlative" => &[("the1", "the"), ("the2", "the")],
        "conative" => &[("at", "at")],
        "let-alone" => &[("let", "let"), ("alone", "alone")],
        "much-less" => &[("much", "much"), ("less", "less")],
        "way-manner" => &[("way", "way")],
        _ => return None,
    })
}

/// Roles of the two schematic comparative slots of a comparative correlative.
pub const CC_SLOT_ROLES: [&str; 2] = ["comp1", "comp2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Cec,
    Magpie,
    Cogs,
    Npn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub start: usize,
    pub end: usize,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub dataset: Dataset,
    pub sentence: String,
    pub label: String,
    pub targets: Vec<Target>,
    #[serde(default)]
    pub meta: BTreeMap<String, Value>,
}

impl EvalRecord {
    pub fn targets_with_role<'a>(&'a self, role: &'a str) -> impl Iterator<Item = &'a Target> + 'a {
        self.targets.iter().filter(move |t| t.role == role)
    }

    pub fn target(&self, role: &str) -> Option<&Target> {
        self.targets.iter().find(|t| t.role == role)
    }

    pub fn target_text(&self, t: &Target) -> &str {
        &self.sentence[t.start..t.end]
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key).and_then(Value::as_f64)
    }

    pub fn meta_i64(&self, key: &str) -> Option<i64> {
        self.meta.get(key).and_then(Value::as_i64)
    }

    pub fn meta_str(&self, key: &str) -> Option<&str> {
        self.meta.get(key).and_then(Value::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Not valid JSON or wrong field types.
    Schema,
    WrongDataset,
    UnknownLabel,
    UnknownConstruction,
    MissingTarget,
    /// Offsets out of bounds, not on a char boundary, or not matching the stated text.
    BadOffsets,
    LowConfidence,
    FormViolation,
    TooFewCandidates,
    MissingCausalIndex,
    BadAcceptability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub reason: RejectReason,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    /// Non-blank input lines.
    pub lines: usize,
    pub accepted_lines: usize,
    pub rejected_lines: BTreeMap<RejectReason, usize>,
    /// Records emitted; equals `accepted_lines` except for MAGPIE (one per word).
    pub records: usize,
    /// Item-level drops inside accepted lines (MAGPIE words).
    pub rejected_items: BTreeMap<RejectReason, usize>,
    pub errors: Vec<LineError>,
}

impl LoadReport {
    pub fn rejected(&self) -> usize {
        self.rejected_lines.values().sum()
    }

    pub fn rejected_for(&self, reason: RejectReason) -> usize {
        self.rejected_lines.get(&reason).copied().unwrap_or(0)
    }

    pub fn items_rejected_for(&self, reason: RejectReason) -> usize {
        self.rejected_items.get(&reason).copied().unwrap_or(0)
    }

    fn reject(&mut self, line: usize, reason: RejectReason, message: impl Into<String>) {
        *self.rejected_lines.entry(reason).or_default() += 1;
        self.errors.push(LineError {
            line,
            reason,
            message: message.into(),
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub records: Vec<EvalRecord>,
    pub report: LoadReport,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("counts are required for the acceptable_unseen filter")]
    MissingCounts,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("LLM endpoint error: {0}")]
    Endpoint(String),
}

struct Rejection(RejectReason, String);

fn rej(reason: RejectReason, msg: impl Into<String>) -> Rejection {
    Rejection(reason, msg.into())
}

fn open(path: &Path) -> Result<BufReader<File>, DatasetError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn load_with<R, F>(reader: R, mut parse: F) -> Result<Loaded, DatasetError>
where
    R: BufRead,
    F: FnMut(&str, &mut LoadReport) -> Result<Vec<EvalRecord>, Rejection>,
{
    let mut report = LoadReport::default();
    let mut records = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DatasetError::Io {
            path: format!("<line {}>", n + 1),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        match parse(&line, &mut report) {
            Ok(recs) => {
                report.accepted_lines += 1;
                report.records += recs.len();
                records.extend(recs);
            }
            Err(Rejection(reason, msg)) => report.reject(n + 1, reason, msg),
        }
    }
    Ok(Loaded { records, report })
}

/// The five loadable inputs, for callers that pick a loader at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Cec,
    Multithat,
    Magpie,
    Cogs,
    Npn,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 5] = [
        DatasetKind::Cec,
        DatasetKind::Multithat,
        DatasetKind::Magpie,
        DatasetKind::Cogs,
        DatasetKind::Npn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Cec => "cec",
            DatasetKind::Multithat => "multithat",
            DatasetKind::Magpie => "magpie",
            DatasetKind::Cogs => "cogs",
            DatasetKind::Npn => "npn",
        }
    }
}

pub fn load_reader<R: BufRead>(kind: DatasetKind, reader: R) -> Result<Loaded, DatasetError> {
    match kind {
        DatasetKind::Cec => load_cec_from(reader),
        DatasetKind::Multithat => load_multithat_from(reader),
        DatasetKind::Magpie => load_magpie_from(reader, MAGPIE_MIN_CONFIDENCE),
        DatasetKind::Cogs => load_cogs_from(reader),
        DatasetKind::Npn => load_npn_from(reader),
    }
}

pub fn load_path(kind: DatasetKind, path: &Path) -> Result<Loaded, DatasetError> {
    load_reader(kind, open(path)?)
}

fn check_span(sentence: &str, start: usize, end: usize) -> Result<(), Rejection> {
    if start >= end
        || end > sentence.len()
        || !sentence.is_char_boundary(start)
        || !sentence.is_char_boundary(end)
    {
        return Err(rej(
            RejectReason::BadOffsets,
            format!(
                "span {start}..{end} invalid for sentence of {} bytes",
                sentence.len()
            ),
        ));
    }
    Ok(())
}

fn parse_record(line: &str, dataset: Dataset) -> Result<EvalRecord, Rejection> {
    let rec: EvalRecord =
        serde_json::from_str(line).map_err(|e| rej(RejectReason::Schema, e.to_string()))?;
    if rec.dataset != dataset {
        return Err(rej(
            RejectReason::WrongDataset,
            format!("expected {dataset:?}, got {:?}", rec.dataset),
        ));
    }
    for t in &rec.targets {
        check_span(&rec.sentence, t.start, t.end)?;
    }
    Ok(rec)
}

fn require_word(rec: &EvalRecord, t: &Target, word: &str) -> Result<(), Rejection> {
    let got = normalize_word(rec.target_text(t));
    if got != word {
        return Err(rej(
            RejectReason::BadOffsets,
            format!("target {:?} covers {got:?}, expected {word:?}", t.role),
        ));
    }
    Ok(())
}

fn parse_cec(line: &str) -> Result<EvalRecord, Rejection> {
    let rec = parse_record(line, Dataset::Cec)?;
    if !CEC_LABELS.contains(&rec.label.as_str()) {
        return Err(rej(
            RejectReason::UnknownLabel,
            format!("label {:?}", rec.label),
        ));
    }
    let so: Vec<_> = rec.targets_with_role("so").collect();
    match so.as_slice() {
        [t] => require_word(&rec, t, "so")?,
        [] => return Err(rej(RejectReason::MissingTarget, "no \"so\" target")),
        _ => return Err(rej(RejectReason::Schema, "more than one \"so\" target")),
    }
    Ok(rec)
}

/// CEC records: labels CEC/EAP/AAP, exactly one `so` target.
pub fn load_cec(path: &Path) -> Result<Loaded, DatasetError> {
    load_cec_from(open(path)?)
}

pub fn load_cec_from<R: BufRead>(reader: R) -> Result<Loaded, DatasetError> {
    load_with(reader, |line, _| parse_cec(line).map(|r| vec![r]))
}

/// Multi-that records: CEC records with at least two `that` targets and
/// `meta.causal_index` indexing the causal one among them (in listed order).
pub fn load_multithat(path: &Path) -> Result<Loaded, DatasetError> {
    load_multithat_from(open(path)?)
}

pub fn load_multithat_from<R: BufRead>(reader: R) -> Result<Loaded, DatasetError> {
    load_with(reader, |line, _| {
        let rec = parse_cec(line)?;
        let thats: Vec<_> = rec.targets_with_role("that").collect();
        for t in &thats {
            require_word(&rec, t, "that")?;
        }
        if thats.len() < 2 {
            return Err(rej(
                RejectReason::TooFewCandidates,
                format!("{} \"that\" target(s), need at least 2", thats.len()),
            ));
        }
        match rec.meta_i64("causal_index") {
            Some(k) if k >= 0 && (k as usize) < thats.len() => Ok(vec![rec]),
            _ => Err(rej(
                RejectReason::MissingCausalIndex,
                "causal_index absent or out of range",
            )),
        }
    })
}

#[derive(Deserialize)]
struct MagpieLine {
    id: String,
    sentence: String,
    confidence: f64,
    words: Vec<MagpieWord>,
}

#[derive(Deserialize)]
struct MagpieWord {
    start: usize,
    end: usize,
    text: String,
    label: String,
}

/// MAGPIE sentences with confidence at least `min_confidence`; each word
/// whose offsets match its text becomes one record labeled literal/figurative.
pub fn load_magpie_with(path: &Path, min_confidence: f64) -> Result<Loaded, DatasetError> {
    load_magpie_from(open(path)?, min_confidence)
}

pub fn load_magpie_from<R: BufRead>(
    reader: R,
    min_confidence: f64,
) -> Result<Loaded, DatasetError> {
    load_with(reader, |line, report| {
        let m: MagpieLine =
            serde_json::from_str(line).map_err(|e| rej(RejectReason::Schema, e.to_string()))?;
        if m.confidence.is_nan() || m.confidence < min_confidence {
            return Err(rej(
                RejectReason::LowConfidence,
                format!("confidence {} below {min_confidence}", m.confidence),
            ));
        }
        let mut out = Vec::new();
        for (k, w) in m.words.iter().enumerate() {
            let dropped = if check_span(&m.sentence, w.start, w.end).is_err()
                || m.sentence[w.start..w.end] != w.text
            {
                Some(RejectReason::BadOffsets)
            } else if !MAGPIE_LABELS.contains(&w.label.as_str()) {
                Some(RejectReason::UnknownLabel)
            } else {
                None
            };
            if let Some(reason) = dropped {
                *report.rejected_items.entry(reason).or_default() += 1;
                continue;
            }
            let mut meta = BTreeMap::new();
            meta.insert("confidence".into(), Value::from(m.confidence));
            meta.insert("sentence_id".into(), Value::from(m.id.clone()));
            out.push(EvalRecord {
                id: format!("{}#{k}", m.id),
                dataset: Dataset::Magpie,
                sentence: m.sentence.clone(),
                label: w.label.clone(),
                targets: vec![Target {
                    start: w.start,
                    end: w.end,
                    role: "word".into(),
                }],
                meta,
            });
        }
        Ok(out)
    })
}

pub fn load_magpie(path: &Path) -> Result<Loaded, DatasetError> {
    load_magpie_with(path, MAGPIE_MIN_CONFIDENCE)
}

/// CoGS records: `label` names the construction; every fixed-word role is
/// present, and comparative correlatives also carry both comparative slots.
pub fn load_cogs(path: &Path) -> Result<Loaded, DatasetError> {
    load_cogs_from(open(path)?)
}

pub fn load_cogs_from<R: BufRead>(reader: R) -> Result<Loaded, DatasetError> {
    load_with(reader, |line, _| {
        let mut rec = parse_record(line, Dataset::Cogs)?;
        let roles = construction_roles(&rec.label).ok_or_else(|| {
            rej(
                RejectReason::UnknownConstruction,
                format!("construction {:?}", rec.label),
            )
        })?;
        for (role, word) in roles {
            let t = rec
                .target(role)
                .ok_or_else(|| rej(RejectReason::MissingTarget, format!("no {role:?} target")))?;
            require_word(&rec, t, word)?;
        }
        if rec.label == "comparative-correlative" {
            for role in CC_SLOT_ROLES {
                if rec.target(role).is_none() {
                    return Err(rej(
                        RejectReason::MissingTarget,
                        format!("no {role:?} slot"),
                    ));
                }
            }
        }
        rec.meta
            .insert("construction".into(), Value::from(rec.label.clone()));
        Ok(vec![rec])
    })
}

#[derive(Deserialize)]
struct NpnLine {
    id: String,
    noun: String,
    preposition: String,
    sentence: String,
    acceptability: i64,
}

/// Byte ranges of the first `noun prep noun` word sequence in `sentence`,
/// compared on normalized word identity.
pub fn find_npn(sentence: &str, noun: &str, prep: &str) -> Option<[(usize, usize); 3]> {
    let words = segment_words(sentence);
    let noun = noun.to_lowercase();
    let prep = prep.to_lowercase();
    let norm = |w: &(usize, usize, usize, usize)| sentence[w.2..w.3].to_lowercase();
    words.windows(3).find_map(|w| {
        (norm(&w[0]) == noun && norm(&w[1]) == prep && norm(&w[2]) == noun)
            .then(|| [(w[0].2, w[0].3), (w[1].2, w[1].3), (w[2].2, w[2].3)])
    })
}

/// NPN records: prepositions after/upon/by/to, acceptability 1 to 5, and the
/// sentence must contain the exact noun+prep+noun trigram.
pub fn load_npn(path: &Path) -> Result<Loaded, DatasetError> {
    load_npn_from(open(path)?)
}

pub fn load_npn_from<R: BufRead>(reader: R) -> Result<Loaded, DatasetError> {
    load_with(reader, |line, _| {
        let n: NpnLine =
            serde_json::from_str(line).map_err(|e| rej(RejectReason::Schema, e.to_string()))?;
        if !NPN_PREPOSITIONS.contains(&n.preposition.as_str()) {
            return Err(rej(
                RejectReason::UnknownLabel,
                format!("preposition {:?}", n.preposition),
            ));
        }
        if !(1..=5).contains(&n.acceptability) {
            return Err(rej(
                RejectReason::BadAcceptability,
                format!("acceptability {}", n.acceptability),
            ));
        }
        let [a, p, b] = find_npn(&n.sentence, &n.noun, &n.preposition).ok_or_else(|| {
            rej(
                RejectReason::FormViolation,
                format!("no \"{0} {1} {0}\" in sentence", n.noun, n.preposition),
            )
        })?;
        let target = |(start, end): (usize, usize), role: &str| Target {
            start,
            end,
            role: role.into(),
        };
        let mut meta = BTreeMap::new();
        meta.insert("noun".into(), Value::from(n.noun.clone()));
        meta.insert("preposition".into(), Value::from(n.preposition.clone()));
        meta.insert("acceptability".into(), Value::from(n.acceptability));
        Ok(vec![EvalRecord {
            id: n.id,
            dataset: Dataset::Npn,
            sentence: n.sentence,
            label: n.preposition,
            targets: vec![target(a, "noun1"), target(p, "prep"), target(b, "noun2")],
            meta,
        }])
    })
}

/// Lowercased `noun prep noun` phrase of an NPN record.
pub fn npn_phrase(rec: &EvalRecord) -> Option<String> {
    let noun = rec.meta_str("noun")?.to_lowercase();
    let prep = rec.meta_str("preposition")?.to_lowercase();
    Some(format!("{noun} {prep} {noun}"))
}

/// Word index of a target in an analyzed sentence.
pub fn locate_target(s: &AnalyzedSentence, t: &Target) -> Result<usize, SkipReason> {
    s.word_containing(t.start, t.end)
        .ok_or(SkipReason::TargetNotFound)
}

/// Tokenizes each distinct sentence once.
#[derive(Default)]
pub struct SentenceCache {
    by_text: HashMap<String, Result<AnalyzedSentence, SkipReason>>,
}

impl SentenceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get<G: Gateway + ?Sized>(
        &mut self,
        gw: &G,
        rec: &EvalRecord,
    ) -> Result<Result<&AnalyzedSentence, SkipReason>, GatewayError> {
        if !self.by_text.contains_key(&rec.sentence) {
            let analyzed = match analyze(gw, &rec.id, &rec.sentence) {
                Ok(s) => Ok(s),
                Err(AffinityError::Skipped { reason, .. }) => Err(reason),
                Err(AffinityError::Gateway(GatewayError::Encoding(_))) => {
                    Err(SkipReason::OffsetMismatch)
                }
                Err(AffinityError::Gateway(e)) => return Err(e),
                Err(e) => return Err(GatewayError::Transport(e.to_string())),
            };
            self.by_text.insert(rec.sentence.clone(), analyzed);
        }
        Ok(self.by_text[&rec.sentence].as_ref().map_err(|r| *r))
    }
}

/// Keeps records whose targets are all single-token words under every
/// gateway. Returns the survivors and the number dropped.
pub fn common_vocabulary(
    records: Vec<EvalRecord>,
    gateways: &[&dyn Gateway],
) -> Result<(Vec<EvalRecord>, usize), GatewayError> {
    let mut caches: Vec<SentenceCache> = gateways.iter().map(|_| SentenceCache::new()).collect();
    let mut kept = Vec::with_capacity(records.len());
    let mut dropped = 0;
    for rec in records {
        let mut ok = true;
        for (gw, cache) in gateways.iter().zip(caches.iter_mut()) {
            let survives = match cache.get(*gw, &rec)? {
                Ok(s) => rec.targets.iter().all(|t| {
                    locate_target(s, t)
                        .ok()
                        .and_then(|i| s.word(i))
                        .is_some_and(maskable)
                }),
                Err(_) => false,
            };
            if !survives {
                ok = false;
                break;
            }
        }
        if ok {
            kept.push(rec);
        } else {
            dropped += 1;
        }
    }
    Ok((kept, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockGateway;
    use std::io::Write;

    fn file(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn cec_missing_so_is_rejected() {
        let f = file(&[
            r#"{"id":"1","dataset":"cec","sentence":"It was so hot that the road melted.","label":"CEC","targets":[{"start":7,"end":9,"role":"so"}]}"#,
            r#"{"id":"2","dataset":"cec","sentence":"I was happy that it worked.","label":"AAP","targets":[]}"#,
            r#"{"id":"3","dataset":"cec","sentence":"x","label":"XYZ","targets":[]}"#,
            "not json",
            "",
        ]);
        let l = load_cec(f.path()).unwrap();
        assert_eq!(l.records.len(), 1);
        assert_eq!(l.report.lines, 4);
        assert_eq!(l.report.rejected_for(RejectReason::MissingTarget), 1);
        assert_eq!(l.report.rejected_for(RejectReason::UnknownLabel), 1);
        assert_eq!(l.report.rejected_for(RejectReason::Schema), 1);
    }

    #[test]
    fn magpie_threshold_is_inclusive() {
        let f = file(&[
            r#"{"id":"a","sentence":"spill the beans","confidence":0.99,"words":[{"start":0,"end":5,"text":"spill","label":"figurative"}]}"#,
            r#"{"id":"b","sentence":"spill the beans","confidence":0.98,"words":[{"start":0,"end":5,"text":"spill","label":"literal"}]}"#,
        ]);
        let l = load_magpie(f.path()).unwrap();
        assert_eq!(l.records.len(), 1);
        assert_eq!(l.records[0].id, "a#0");
        assert_eq!(l.report.rejected_for(RejectReason::LowConfidence), 1);
    }

    #[test]
    fn npn_form_check() {
        assert_eq!(
            find_npn("Day by day, it grew.", "day", "by"),
            Some([(0, 3), (4, 6), (7, 10)])
        );
        assert!(find_npn("A day by the sea.", "day", "by").is_none());
    }

    #[test]
    fn common_vocabulary_drops_multi_token_targets() {
        let mk = |sentence: &str, start, end| EvalRecord {
            id: "r".into(),
            dataset: Dataset::Magpie,
            sentence: sentence.into(),
            label: "literal".into(),
            targets: vec![Target {
                start,
                end,
                role: "word".into(),
            }],
            meta: BTreeMap::new(),
        };
        let recs = vec![mk("a big day", 2, 5), mk("an extraordinary day", 3, 16)];
        let a = MockGateway::new(1);
        let b = MockGateway::new(2);
        let (kept, dropped) = common_vocabulary(recs, &[&a, &b]).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(dropped, 1);
    }
}
