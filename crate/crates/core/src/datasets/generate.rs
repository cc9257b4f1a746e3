//! NPN sentence generation through a chat-completion endpoint.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{find_npn, Dataset, DatasetError, EvalRecord, Target};

/// Prompt sent once per phrase; `{phrase}` is replaced by e.g. "day by day".
pub const NPN_PROMPT_TEMPLATE: &str = "An NPN construction is one like \"day by day\" or \"face to face\". It has a repeated singular noun with a preposition in the middle. Other prepositions are also possible: \"book upon book\", \"week over week\", \"year after year\". Please use \"{phrase}\" in an NPN construction, placing \"{phrase}\" in the middle of the sentence. Make sure the sentence establishes a context in which the noun makes sense. Please provide only the sentence in the response.";

pub fn build_prompt(phrase: &str) -> String {
    NPN_PROMPT_TEMPLATE.replace("{phrase}", phrase)
}

pub trait CompletionEndpoint {
    fn complete(&self, prompt: &str) -> Result<String, DatasetError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Attempts per phrase before it is flagged.
    pub max_attempts: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            model: "gpt-4-0613".into(),
            temperature: 0.7,
            max_tokens: 100,
            max_attempts: 3,
        }
    }
}

/// OpenAI-style `POST {url}` chat-completions endpoint.
pub struct ChatCompletionEndpoint {
    url: String,
    api_key: String,
    config: GenerationConfig,
    agent: ureq::Agent,
}

impl ChatCompletionEndpoint {
    pub fn new(
        url: impl Into<String>,
        api_key: impl Into<String>,
        config: GenerationConfig,
    ) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self {
            url: url.into(),
            api_key: api_key.into(),
            config,
            agent,
        }
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "messages": [{"role": "user", "content": prompt}],
        })
    }
}

impl CompletionEndpoint for ChatCompletionEndpoint {
    fn complete(&self, prompt: &str) -> Result<String, DatasetError> {
        let err = |e: ureq::Error| DatasetError::Endpoint(e.to_string());
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(self.request_body(prompt))
            .map_err(err)?;
        let body: Value = resp.body_mut().read_json().map_err(err)?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                DatasetError::Endpoint("response has no choices[0].message.content".into())
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpnCandidate {
    pub noun: String,
    pub preposition: String,
    pub attempts: u32,
    /// Last generation, valid or not.
    pub sentence: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub requested: usize,
    pub generated: usize,
    pub retries: usize,
    /// Phrases that never matched the noun+prep+noun form.
    pub flagged: Vec<NpnCandidate>,
}

fn clean(reply: &str) -> String {
    reply.trim().trim_matches('"').trim().to_string()
}

/// One validated sentence per (noun, preposition). Records carry no
/// acceptability; that is added by annotation before `load_npn`.
pub fn generate_npn(
    nouns: &[String],
    preps: &[String],
    endpoint: &dyn CompletionEndpoint,
    max_attempts: u32,
) -> Result<(Vec<EvalRecord>, GenerationReport), DatasetError> {
    let mut report = GenerationReport::default();
    let mut out = Vec::new();
    for noun in nouns {
        for prep in preps {
            report.requested += 1;
            let phrase = format!("{noun} {prep} {noun}");
            let prompt = build_prompt(&phrase);
            let mut last = String::new();
            let mut found = None;
            let mut attempts = 0;
            while attempts < max_attempts.max(1) {
                attempts += 1;
                last = clean(&endpoint.complete(&prompt)?);
                if let Some(spans) = find_npn(&last, noun, prep) {
                    found = Some(spans);
                    break;
                }
            }
            report.retries += attempts as usize - 1;
            let Some([a, p, b]) = found else {
                report.flagged.push(NpnCandidate {
                    noun: noun.clone(),
                    preposition: prep.clone(),
                    attempts,
                    sentence: last,
                });
                continue;
            };
            report.generated += 1;
            let t = |(start, end): (usize, usize), role: &str| Target {
                start,
                end,
                role: role.into(),
            };
            let mut meta = BTreeMap::new();
            meta.insert("noun".into(), Value::from(noun.clone()));
            meta.insert("preposition".into(), Value::from(prep.clone()));
            out.push(EvalRecord {
                id: format!("{noun}-{prep}"),
                dataset: Dataset::Npn,
                sentence: last,
                label: prep.clone(),
                targets: vec![t(a, "noun1"), t(p, "prep"), t(b, "noun2")],
                meta,
            });
        }
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    struct Scripted(RefCell<Vec<String>>);

    impl CompletionEndpoint for Scripted {
        fn complete(&self, _prompt: &str) -> Result<String, DatasetError> {
            Ok(self.0.borrow_mut().remove(0))
        }
    }

    #[test]
    fn prompt_substitutes_phrase_twice() {
        let p = build_prompt("week by week");
        assert_eq!(p.matches("\"week by week\"").count(), 2);
        assert!(!p.contains("{phrase}"));
    }

    #[test]
    fn malformed_generation_is_retried_then_flagged() {
        let ep = Scripted(RefCell::new(vec![
            "\"We met day by day.\"".into(),
            "Nothing here.".into(),
            "Still nothing.".into(),
            "Nope.".into(),
        ]));
        let (recs, report) =
            generate_npn(&["day".into(), "week".into()], &["by".into()], &ep, 3).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].sentence, "We met day by day.");
        assert_eq!(report.flagged.len(), 1);
        assert_eq!(report.flagged[0].attempts, 3);
        assert_eq!(report.retries, 2);
    }

    #[test]
    fn request_body_carries_sampling_parameters() {
        let ep =
            ChatCompletionEndpoint::new("http://localhost:1", "k", GenerationConfig::default());
        let body = ep.request_body("hi");
        assert_eq!(body["model"], "gpt-4-0613");
        assert_eq!(body["temperature"], 0.7);
        assert_eq!(body["max_tokens"], 100);
        assert_eq!(body["messages"][0]["content"], "hi");
    }
}
