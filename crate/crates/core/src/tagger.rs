//! Offline rule-based tagger for comparative adjectives and adverbs.
//!
//! A word is comparative iff it is in the irregular lexicon, or it ends in
//! "er" and some regular stem of it is in the bundled adjective/adverb list.

use serde::{Deserialize, Serialize};

use crate::gateway::{TaggedWord, TAG_COMPARATIVE_ADJ, TAG_COMPARATIVE_ADV};
use crate::model::normalize_word;

pub const IRREGULAR_COMPARATIVES: &[&str] = &[
    "more", "less", "better", "worse", "fewer", "further", "farther", "later", "elder", "lesser",
];

/// Adverbial comparatives; the remaining irregulars are tagged as adjectives.
const ADVERBIAL: &[&str] = &["more", "less", "further", "farther", "later"];

/// Base forms whose "-er" comparatives are recognized by the suffix rule.
pub const ADJECTIVE_STEMS: &[&str] = &[
    "angry", "big", "bitter", "black", "bold", "brave", "bright", "brief", "broad", "busy", "calm",
    "cheap", "clean", "clear", "clever", "close", "cold", "cool", "crazy", "cruel", "dark", "dear",
    "deep", "dirty", "dry", "dull", "early", "easy", "empty", "fair", "fast", "fat", "few",
    "fierce", "fine", "firm", "flat", "free", "fresh", "friendly", "full", "funny", "gentle",
    "glad", "grand", "great", "green", "gross", "happy", "hard", "harsh", "healthy", "heavy",
    "high", "hot", "huge", "hungry", "keen", "kind", "large", "late", "lazy", "light", "likely",
    "long", "loose", "loud", "lovely", "low", "lucky", "mad", "mean", "merry", "mild", "narrow",
    "near", "neat", "new", "nice", "noisy", "odd", "old", "pale", "plain", "polite", "poor",
    "pretty", "proud", "pure", "quick", "quiet", "rare", "rich", "ripe", "rough", "rude", "sad",
    "safe", "scary", "sharp", "short", "shy", "silly", "simple", "slim", "slow", "small", "smart",
    "smooth", "soft", "soon", "sour", "steep", "stiff", "strange", "strict", "strong", "sweet",
    "tall", "thick", "thin", "tight", "tiny", "tough", "true", "ugly", "vague", "warm", "weak",
    "wealthy", "weird", "wet", "white", "wide", "wild", "wise", "young",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaggerMode {
    /// Tags come from the gateway's `pos_tag`.
    External,
    /// Tags come from [`RuleTagger`].
    RuleBased,
}

/// How candidate fills are tagged in the comparative-slot evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerPolicy {
    pub mode: TaggerMode,
    pub irregular: Vec<String>,
    pub suffix_rule: bool,
}

impl TaggerPolicy {
    pub fn external() -> Self {
        Self {
            mode: TaggerMode::External,
            ..Self::rule_based()
        }
    }

    pub fn rule_based() -> Self {
        Self {
            mode: TaggerMode::RuleBased,
            irregular: IRREGULAR_COMPARATIVES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            suffix_rule: true,
        }
    }

    pub fn rule_tagger(&self) -> RuleTagger {
        RuleTagger {
            irregular: self.irregular.clone(),
            suffix_rule: self.suffix_rule,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RuleTagger {
    irregular: Vec<String>,
    suffix_rule: bool,
}

impl Default for RuleTagger {
    fn default() -> Self {
        TaggerPolicy::rule_based().rule_tagger()
    }
}

impl RuleTagger {
    pub fn is_comparative(&self, word: &str) -> bool {
        self.comparative_tag(word).is_some()
    }

    pub fn comparative_tag(&self, word: &str) -> Option<&'static str> {
        let w = normalize_word(word);
        if self.irregular.contains(&w) {
            return Some(if ADVERBIAL.contains(&w.as_str()) {
                TAG_COMPARATIVE_ADV
            } else {
                TAG_COMPARATIVE_ADJ
            });
        }
        if self.suffix_rule && w.len() > 3 && w.ends_with("er") {
            let stems = regular_stems(&w[..w.len() - 2]);
            if stems.iter().any(|s| ADJECTIVE_STEMS.contains(&s.as_str())) {
                return Some(TAG_COMPARATIVE_ADJ);
            }
        }
        None
    }

    /// Tags each whitespace word; non-comparatives get a coarse tag.
    pub fn tag(&self, text: &str) -> Vec<TaggedWord> {
        text.split_whitespace()
            .map(|word| {
                let tag = match self.comparative_tag(word) {
                    Some(t) => t,
                    None => coarse_tag(&normalize_word(word)),
                };
                TaggedWord {
                    word: word.to_string(),
                    tag: tag.to_string(),
                }
            })
            .collect()
    }
}

fn coarse_tag(w: &str) -> &'static str {
    match w {
        "the" | "a" | "an" | "this" | "that" | "these" | "those" => "DT",
        "after" | "upon" | "by" | "to" | "at" | "with" | "of" | "in" | "on" | "for" => "IN",
        "i" | "you" | "he" | "she" | "it" | "we" | "they" => "PRP",
        "and" | "or" | "but" => "CC",
        "" => ".",
        _ if w.chars().all(|c| c.is_ascii_digit()) => "CD",
        _ if w.ends_with("ly") => "RB",
        _ => "NN",
    }
}

/// Candidate base forms for "<stem>er": bigg→big, happi→happy, nic→nice.
fn regular_stems(stem: &str) -> Vec<String> {
    let mut out = vec![stem.to_string(), format!("{stem}e")];
    let b = stem.as_bytes();
    if b.len() >= 2 && b[b.len() - 1] == b[b.len() - 2] {
        out.push(stem[..stem.len() - 1].to_string());
    }
    if let Some(s) = stem.strip_suffix('i') {
        out.push(format!("{s}y"));
    }
    out
}
