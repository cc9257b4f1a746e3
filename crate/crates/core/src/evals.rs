//! Construction evaluations and benchmark correlation.
//!
//! Every evaluation returns scores on a 0 to 100 scale with
//! `n_used + n_skipped` equal to the number of candidate slots (or records,
//! for the multi-that test). Skip reasons are tallied in `breakdown` under
//! `skipped.<reason>`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affinity::{
    analyze, global_affinities, local_affinity, word_distribution, AffinityError,
};
use crate::datasets::{
    construction_roles, locate_target, npn_phrase, EvalRecord, Target, CC_SLOT_ROLES,
    NPN_ACCEPTABLE, NPN_PREPOSITIONS,
};
use crate::gateway::{is_comparative_tag, Gateway, GatewayError};
use crate::model::{maskable, AnalyzedSentence, DistributionError, SkipReason};
use crate::report::ReportTable;
use crate::stats::{self, ScoredSample, StatsError};
use crate::tagger::{TaggerMode, TaggerPolicy};

/// Score columns in table order.
pub const TABLE_COLUMNS: [&str; 13] = [
    "cec_auc",
    "so_that",
    "idioms_auc",
    "much",
    "less",
    "let",
    "alone",
    "at",
    "way",
    "with",
    "the",
    "cc_adj_adv",
    "npn_upon",
];

/// Fixed-slot columns; `the` pools both `the` slots of a comparative correlative.
pub const FIXED_SLOT_COLUMNS: [&str; 8] =
    ["much", "less", "let", "alone", "at", "way", "with", "the"];

pub const DEFAULT_NUCLEUS_Q: f64 = 0.85;

/// Records are analyzed and scored in batches of this many slots.
const BATCH: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalScore {
    pub model: String,
    pub eval_name: String,
    pub value: f64,
    pub n_used: usize,
    pub n_skipped: usize,
    #[serde(default)]
    pub breakdown: BTreeMap<String, f64>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("invalid distribution from gateway: {0}")]
    Distribution(#[from] DistributionError),
    #[error("no records pass the {0} filter")]
    EmptyFilter(String),
    #[error("trigram counts are required for the acceptable_unseen filter")]
    MissingCounts,
    #[error("{0}: no usable items")]
    NothingUsable(String),
    #[error("need at least 3 models in both tables, got {0}")]
    TooFewModels(usize),
    #[error("nucleus threshold must lie in (0, 1], got {0}")]
    BadThreshold(f64),
}

fn from_affinity(e: AffinityError) -> Result<SkipReason, EvalError> {
    match e {
        AffinityError::Skipped { reason, .. } => Ok(reason),
        AffinityError::Gateway(g) => Err(EvalError::Gateway(g)),
        AffinityError::Distribution(d) => Err(EvalError::Distribution(d)),
        AffinityError::Stats(s) => Err(EvalError::Stats(s)),
        AffinityError::SamePosition(i) | AffinityError::NoSuchWord(i) => Err(EvalError::Gateway(
            GatewayError::BadRequest(format!("word {i}")),
        )),
    }
}

#[derive(Debug, Default)]
struct SkipTally(BTreeMap<SkipReason, usize>);

impl SkipTally {
    fn add(&mut self, r: SkipReason) {
        *self.0.entry(r).or_default() += 1;
    }

    fn total(&self) -> usize {
        self.0.values().sum()
    }

    fn write(&self, breakdown: &mut BTreeMap<String, f64>) {
        for (r, n) in &self.0 {
            breakdown.insert(format!("skipped.{r}"), *n as f64);
        }
    }
}

/// Distinct sentences analyzed once each.
struct Analyzed {
    sentences: Vec<Result<AnalyzedSentence, SkipReason>>,
    index: Vec<usize>,
}

impl Analyzed {
    fn new<G: Gateway + ?Sized>(gw: &G, records: &[EvalRecord]) -> Result<Self, EvalError> {
        let mut by_text: HashMap<&str, usize> = HashMap::new();
        let mut sentences = Vec::new();
        let mut index = Vec::with_capacity(records.len());
        for rec in records {
            let k = match by_text.get(rec.sentence.as_str()) {
                Some(&k) => k,
                None => {
                    let a = match analyze(gw, &rec.id, &rec.sentence) {
                        Ok(s) => Ok(s),
                        Err(AffinityError::Gateway(GatewayError::Encoding(_))) => {
                            Err(SkipReason::OffsetMismatch)
                        }
                        Err(e) => Err(from_affinity(e)?),
                    };
                    sentences.push(a);
                    by_text.insert(&rec.sentence, sentences.len() - 1);
                    sentences.len() - 1
                }
            };
            index.push(k);
        }
        Ok(Self { sentences, index })
    }

    fn of(&self, rec: usize) -> Result<&AnalyzedSentence, SkipReason> {
        self.sentences[self.index[rec]].as_ref().map_err(|r| *r)
    }

    fn word(&self, rec: usize, t: &Target) -> Result<(&AnalyzedSentence, usize), SkipReason> {
        let s = self.of(rec)?;
        let i = locate_target(s, t)?;
        Ok((s, i))
    }
}

/// Global affinity for each `(record index, target)` slot.
fn slot_affinities<G: Gateway + ?Sized>(
    gw: &G,
    analyzed: &Analyzed,
    slots: &[(usize, &Target)],
) -> Result<Vec<Result<f64, SkipReason>>, EvalError> {
    let mut out: Vec<Result<f64, SkipReason>> = Vec::with_capacity(slots.len());
    let mut pending: Vec<(usize, (&AnalyzedSentence, usize))> = Vec::new();
    for &(rec, t) in slots {
        match analyzed.word(rec, t) {
            Ok(target) => {
                pending.push((out.len(), target));
                out.push(Err(SkipReason::TargetNotFound));
            }
            Err(r) => out.push(Err(r)),
        }
    }
    for chunk in pending.chunks(BATCH) {
        let targets: Vec<(&AnalyzedSentence, usize)> = chunk.iter().map(|p| p.1).collect();
        for ((slot, _), r) in chunk.iter().zip(global_affinities(gw, &targets)) {
            out[*slot] = match r {
                Ok(v) => Ok(v),
                Err(e) => Err(from_affinity(e)?),
            };
        }
    }
    Ok(out)
}

fn model_name<G: Gateway + ?Sized>(gw: &G) -> Result<String, EvalError> {
    Ok(gw.handshake()?.model_name)
}

fn auc_eval<G: Gateway + ?Sized>(
    gw: &G,
    records: &[EvalRecord],
    eval_name: &str,
    role: &str,
    is_positive: impl Fn(&EvalRecord) -> bool,
) -> Result<EvalScore, EvalError> {
    let analyzed = Analyzed::new(gw, records)?;
    let slots: Vec<(usize, &Target)> = records
        .iter()
        .enumerate()
        .flat_map(|(k, r)| r.targets_with_role(role).map(move |t| (k, t)))
        .collect();
    let values = slot_affinities(gw, &analyzed, &slots)?;
    let mut skips = SkipTally::default();
    let mut samples = Vec::new();
    for (&(rec, _), v) in slots.iter().zip(values) {
        match v {
            Ok(v) => samples.push(ScoredSample::new(v, is_positive(&records[rec]))),
            Err(r) => skips.add(r),
        }
    }
    let auc = stats::roc_auc(&samples)?;
    let positives = samples.iter().filter(|s| s.is_positive()).count();
    let mut breakdown = BTreeMap::new();
    breakdown.insert("n_positive".into(), positives as f64);
    breakdown.insert("n_negative".into(), (samples.len() - positives) as f64);
    breakdown.insert("flipped".into(), 100.0 * (1.0 - auc));
    skips.write(&mut breakdown);
    Ok(EvalScore {
        model: model_name(gw)?,
        eval_name: eval_name.into(),
        value: 100.0 * auc,
        n_used: samples.len(),
        n_skipped: skips.total(),
        breakdown,
    })
}

/// AUC of global affinity on `so`, CEC against EAP and AAP.
pub fn eval_cec_auc<G: Gateway + ?Sized>(
    records: &[EvalRecord],
    gw: &G,
) -> Result<EvalScore, EvalError> {
    auc_eval(gw, records, "cec_auc", "so", |r| r.label == "CEC")
}

/// AUC of per-word global affinity, literal as the positive class.
pub fn eval_idioms<G: Gateway + ?Sized>(
    records: &[EvalRecord],
    gw: &G,
) -> Result<EvalScore, EvalError> {
    auc_eval(gw, records, "idioms_auc", "word", |r| r.label == "literal")
}

/// Percentage of records whose causal `that` has the strictly largest local
/// affinity from `so`. Ties are incorrect.
pub fn eval_multithat<G: Gateway + ?Sized>(
    records: &[EvalRecord],
    gw: &G,
) -> Result<EvalScore, EvalError> {
    let analyzed = Analyzed::new(gw, records)?;
    let mut skips = SkipTally::default();
    let mut correct = 0usize;
    let mut used = 0usize;
    let mut ties = 0usize;
    'records: for (k, rec) in records.iter().enumerate() {
        let Some(so) = rec.target("so") else {
            skips.add(SkipReason::TargetNotFound);
            continue;
        };
        let thats: Vec<&Target> = rec.targets_with_role("that").collect();
        let causal = rec.meta_i64("causal_index").unwrap_or(-1);
        let (s, i) = match analyzed.word(k, so) {
            Ok(x) => x,
            Err(r) => {
                skips.add(r);
                continue;
            }
        };
        let mut scores = Vec::with_capacity(thats.len());
        for t in &thats {
            let j = match locate_target(s, t) {
                Ok(j) => j,
                Err(r) => {
                    skips.add(r);
                    continue 'records;
                }
            };
            match local_affinity(gw, s, i, j) {
                Ok(v) => scores.push(v),
                Err(e) => {
                    skips.add(from_affinity(e)?);
                    continue 'records;
                }
            }
        }
        used += 1;
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..scores.len()).filter(|&m| scores[m] == best).collect();
        if winners.len() > 1 {
            ties += 1;
        } else if winners[0] as i64 == causal {
            correct += 1;
        }
    }
    if used == 0 {
        return Err(EvalError::NothingUsable("so_that".into()));
    }
    let mut breakdown = BTreeMap::new();
    breakdown.insert("correct".into(), correct as f64);
    breakdown.insert("ties".into(), ties as f64);
    skips.write(&mut breakdown);
    Ok(EvalScore {
        model: model_name(gw)?,
        eval_name: "so_that".into(),
        value: 100.0 * correct as f64 / used as f64,
        n_used: used,
        n_skipped: skips.total(),
        breakdown,
    })
}

/// How the two `the` slots of a comparative correlative are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThePooling {
    /// Every `the` slot is one sample.
    #[default]
    Slots,
    /// Slots are averaged per sentence first.
    Sentences,
}

fn column_of_role(role: &str) -> &str {
    match role {
        "the1" | "the2" => "the",
        other => other,
    }
}

/// Mean global affinity (×100) on each fixed-word role of the CoGS records.
/// Columns with no candidate slots are omitted.
pub fn eval_fixed_slots<G: Gateway + ?Sized>(
    records: &[EvalRecord],
    gw: &G,
    pooling: ThePooling,
) -> Result<Vec<EvalScore>, EvalError> {
    let analyzed = Analyzed::new(gw, records)?;
    let mut slots: Vec<(usize, &Target)> = Vec::new();
    for (k, rec) in records.iter().enumerate() {
        let Some(roles) = construction_roles(&rec.label) else {
            continue;
        };
        for (role, _) in roles {
            if let Some(t) = rec.target(role) {
                slots.push((k, t));
            }
        }
    }
    let values = slot_affinities(gw, &analyzed, &slots)?;
    let model = model_name(gw)?;
    let mut out = Vec::new();
    for column in FIXED_SLOT_COLUMNS {
        let mut skips = SkipTally::default();
        let mut used = Vec::new();
        let mut per_record: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut candidates = 0;
        for (&(rec, t), v) in slots.iter().zip(&values) {
            if column_of_role(&t.role) != column {
                continue;
            }
            candidates += 1;
            match v {
                Ok(v) => {
                    used.push(*v);
                    per_record.entry(rec).or_default().push(*v);
                }
                Err(r) => skips.add(*r),
            }
        }
        if candidates == 0 {
            continue;
        }
        let samples: Vec<f64> = match pooling {
            ThePooling::Slots => used.clone(),
            ThePooling::Sentences => per_record
                .values()
                .map(|v| stats::mean(v).expect("non-empty"))
                .collect(),
        };
        let mean = stats::mean(&samples).ok_or_else(|| EvalError::NothingUsable(column.into()))?;
        let mut breakdown = BTreeMap::new();
        skips.write(&mut breakdown);
        out.push(EvalScore {
            model: model.clone(),
            eval_name: column.into(),
            value: 100.0 * mean,
            n_used: used.len(),
            n_skipped: skips.total(),
            breakdown,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NpnFilter {
    All,
    Acceptable,
    AcceptableUnseen,
}

impl NpnFilter {
    pub const ALL: [NpnFilter; 3] = [
        NpnFilter::All,
        NpnFilter::Acceptable,
        NpnFilter::AcceptableUnseen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NpnFilter::All => "all",
            NpnFilter::Acceptable => "acceptable",
            NpnFilter::AcceptableUnseen => "acceptable_unseen",
        }
    }

    /// Column name for one preposition; the unseen filter is the headline column.
    pub fn column(self, prep: &str) -> String {
        match self {
            NpnFilter::AcceptableUnseen => format!("npn_{prep}"),
            NpnFilter::Acceptable => format!("npn_{prep}_acc"),
            NpnFilter::All => format!("npn_{prep}_all"),
        }
    }
}

impl std::str::FromStr for NpnFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NpnFilter::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown NPN filter {s:?}"))
    }
}

/// Records passing `filter`. `counts` maps lowercased `noun prep noun`
/// phrases to corpus frequency; absent phrases count as unseen.
pub fn npn_filter<'a>(
    records: &'a [EvalRecord],
    counts: Option<&HashMap<String, u64>>,
    filter: NpnFilter,
) -> Result<Vec<&'a EvalRecord>, EvalError> {
    if filter == NpnFilter::AcceptableUnseen && counts.is_none() {
        return Err(EvalError::MissingCounts);
    }
    Ok(records
        .iter()
        .filter(|r| match filter {
            NpnFilter::All => true,
            NpnFilter::Acceptable | NpnFilter::AcceptableUnseen => {
                r.meta_i64("acceptability").unwrap_or(0) >= NPN_ACCEPTABLE
                    && (filter == NpnFilter::Acceptable
                        || npn_phrase(r)
                            .map(|p| counts.and_then(|c| c.get(&p)).copied().unwrap_or(0) == 0)
                            .unwrap_or(false))
            }
        })
        .collect())
}

/// Mean global affinity (×100) over both noun slots, per preposition.
pub fn eval_npn<G: Gateway + ?Sized>(
    records: &[EvalRecord],
    counts: Option<&HashMap<String, u64>>,
    gw: &G,
    filter: NpnFilter,
) -> Result<Vec<EvalScore>, EvalError> {
    let kept: Vec<EvalRecord> = npn_filter(records, counts, filter)?
        .into_iter()
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(EvalError::EmptyFilter(filter.name().into()));
    }
    let analyzed = Analyzed::new(gw, &kept)?;
    let model = model_name(gw)?;
    let mut out = Vec::new();
    for prep in NPN_PREPOSITIONS {
        let slots: Vec<(usize, &Target)> = kept
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == prep)
            .flat_map(|(k, r)| {
                ["noun1", "noun2"]
                    .into_iter()
                    .filter_map(move |role| r.target(role).map(|t| (k, t)))
            })
            .collect();
        if slots.is_empty() {
            continue;
        }
        let mut skips = SkipTally::default();
        let mut used = Vec::new();
        for v in slot_affinities(gw, &analyzed, &slots)? {
            match v {
                Ok(v) => used.push(v),
                Err(r) => skips.add(r),
            }
        }
        let column = filter.column(prep);
        let mean = stats::mean(&used).ok_or_else(|| EvalError::NothingUsable(column.clone()))?;
        let mut breakdown = BTreeMap::new();
        breakdown.insert("records".into(), (slots.len() / 2) as f64);
        skips.write(&mut breakdown);
        out.push(EvalScore {
            model: model.clone(),
            eval_name: column,
            value: 100.0 * mean,
            n_used: used.len(),
            n_skipped: skips.total(),
            breakdown,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Probability mass of comparative fills over nucleus mass.
    #[default]
    Mass,
    /// Number of comparative fills over nucleus size.
    Count,
}

impl std::str::FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mass" => Ok(Weighting::Mass),
            "count" => Ok(Weighting::Count),
            other => Err(format!("unknown weighting {other:?}")),
        }
    }
}

/// `sentence` with the core of word `i` replaced by `fill`.
pub fn substitute(s: &AnalyzedSentence, i: usize, fill: &str) -> String {
    let w = &s.words[i];
    format!(
        "{}{}{}",
        &s.text[..w.core_start],
        fill,
        &s.text[w.core_end..]
    )
}

/// Score of one comparative slot: nucleus entries tagged comparative, weighted
/// per `weighting`, as a fraction of the nucleus.
pub fn comparative_slot_score<G: Gateway + ?Sized>(
    gw: &G,
    s: &AnalyzedSentence,
    i: usize,
    probs: &[f64],
    q: f64,
    policy: &TaggerPolicy,
    weighting: Weighting,
) -> Result<f64, EvalError> {
    let nucleus = stats::nucleus(probs, q)?;
    let ids: Vec<u32> = nucleus.entries.iter().map(|e| e.0).collect();
    let forms = gw.decode(&ids)?;
    let rules = policy.rule_tagger();
    let mut hit_mass = 0.0;
    let mut hit_count = 0usize;
    for ((_, p), form) in nucleus.entries.iter().zip(&forms) {
        let form = form.trim();
        let comparative = if form.is_empty() || form.contains(char::is_whitespace) {
            false
        } else {
            match policy.mode {
                TaggerMode::RuleBased => rules.is_comparative(form),
                TaggerMode::External => {
                    let tags = gw.pos_tag(&substitute(s, i, form))?;
                    tags.get(i).is_some_and(|t| is_comparative_tag(&t.tag))
                }
            }
        };
        if comparative {
            hit_mass += p;
            hit_count += 1;
        }
    }
    Ok(match weighting {
        Weighting::Mass => hit_mass / nucleus.mass,
        Weighting::Count => hit_count as f64 / nucleus.len() as f64,
    })
}

/// Comparative score on the schematic slots of comparative correlatives,
/// with mean nucleus sizes at 0.5 and 0.8 in the breakdown.
pub fn eval_cc_schematic<G: Gateway + ?Sized>(
    records: &[EvalRecord],
    gw: &G,
    policy: &TaggerPolicy,
    q: f64,
    weighting: Weighting,
) -> Result<EvalScore, EvalError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(EvalError::BadThreshold(q));
    }
    let analyzed = Analyzed::new(gw, records)?;
    let mut skips = SkipTally::default();
    let mut scores = Vec::new();
    let mut p50 = Vec::new();
    let mut p80 = Vec::new();
    for (k, rec) in records.iter().enumerate() {
        if rec.label != "comparative-correlative" {
            continue;
        }
        for role in CC_SLOT_ROLES {
            let Some(t) = rec.target(role) else {
                skips.add(SkipReason::TargetNotFound);
                continue;
            };
            let (s, i) = match analyzed.word(k, t) {
                Ok(x) => x,
                Err(r) => {
                    skips.add(r);
                    continue;
                }
            };
            if !maskable(&s.words[i]) {
                skips.add(SkipReason::MultiToken);
                continue;
            }
            let d = match word_distribution(gw, s, &[i], i) {
                Ok(d) => d,
                Err(e) => {
                    skips.add(from_affinity(e)?);
                    continue;
                }
            };
            let probs = d.probs();
            scores.push(comparative_slot_score(
                gw, s, i, &probs, q, policy, weighting,
            )?);
            p50.push(stats::words_to_percentile(&probs, 0.5)? as f64);
            p80.push(stats::words_to_percentile(&probs, 0.8)? as f64);
        }
    }
    let mean = stats::mean(&scores).ok_or_else(|| EvalError::NothingUsable("cc_adj_adv".into()))?;
    let mut breakdown = BTreeMap::new();
    breakdown.insert(
        "words_p50".into(),
        stats::mean(&p50).expect("same length as scores"),
    );
    breakdown.insert(
        "words_p80".into(),
        stats::mean(&p80).expect("same length as scores"),
    );
    breakdown.insert("q".into(), q);
    skips.write(&mut breakdown);
    Ok(EvalScore {
        model: model_name(gw)?,
        eval_name: "cc_adj_adv".into(),
        value: 100.0 * mean,
        n_used: scores.len(),
        n_skipped: skips.total(),
        breakdown,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnCorrelation {
    pub column: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
    pub n_models: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub mean_r: f64,
    /// Sample standard deviation of the per-column r values; absent with one column.
    pub sd_r: Option<f64>,
    pub models: Vec<String>,
    pub per_column: Vec<ColumnCorrelation>,
}

/// Pearson r of each score column against the benchmark, over models present
/// in both inputs (rows without a benchmark value are not used).
pub fn correlate_with_benchmark(
    table: &ReportTable,
    benchmark: &BTreeMap<String, f64>,
    columns: Option<&[String]>,
) -> Result<Correlation, EvalError> {
    let models: Vec<String> = table
        .models()
        .filter(|m| benchmark.contains_key(*m))
        .map(str::to_string)
        .collect();
    if models.len() < 3 {
        return Err(EvalError::TooFewModels(models.len()));
    }
    let columns: Vec<String> = match columns {
        Some(c) => c.to_vec(),
        None => table.columns.clone(),
    };
    let mut per_column = Vec::new();
    let mut rs = Vec::new();
    for column in columns {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for m in &models {
            if let Some(cell) = table.get(m, &column) {
                x.push(cell.value);
                y.push(benchmark[m]);
            }
        }
        let n_models = x.len();
        match stats::pearson(&x, &y) {
            Ok(r) => {
                rs.push(r);
                per_column.push(ColumnCorrelation {
                    column,
                    r: Some(r),
                    excluded: None,
                    n_models,
                });
            }
            Err(e) => per_column.push(ColumnCorrelation {
                column,
                r: None,
                excluded: Some(e.to_string()),
                n_models,
            }),
        }
    }
    let mean_r = stats::mean(&rs).ok_or(EvalError::NothingUsable("correlation".into()))?;
    let sd_r = stats::sample_sd(&rs);
    Ok(Correlation {
        mean_r,
        sd_r,
        models,
        per_column,
    })
}
