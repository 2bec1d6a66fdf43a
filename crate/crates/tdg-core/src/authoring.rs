//! Template authoring support: an external drafting client with an offline
//! stub, and a dry-run audit that gates corpus admission.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::lexicon::Lexicon;
use crate::pipeline::GenerationConfig;
use crate::renderer::render_instance;
use crate::rng::derive_instance_seed;
use crate::sampler::{sample_binding, SampleError};
use crate::template::{self, TemplateError, Violation};
use crate::verifier::{verify, Verdict};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DraftRequest {
    pub topic: String,
    pub difficulty: Option<String>,
    pub required_slots: Vec<String>,
}

impl DraftRequest {
    pub fn new(topic: impl Into<String>) -> Self {
        DraftRequest {
            topic: topic.into(),
            difficulty: None,
            required_slots: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum DraftError {
    #[error("drafting endpoint unavailable: {0}")]
    EndpointUnavailable(String),
    #[error("empty response from drafting client")]
    EmptyResponse,
    #[error("topic must be nonempty")]
    EmptyTopic,
}

/// Abstract text-generation endpoint used for template drafting.
pub trait DraftClient {
    fn draft(&self, req: &DraftRequest) -> Result<String, DraftError>;
}

/// Offline stub: a pure lookup from topic to a bundled fixture template.
pub struct StubDraftClient;

const STUB_DRAFTS: &[(&str, &str)] = &[
    (
        "sales over two months",
        include_str!("../../../data/drafts/sales_two_months.tdg.json"),
    ),
    (
        "buying and giving away items",
        include_str!("../../../data/drafts/buy_give_away.tdg.json"),
    ),
    (
        "splitting a bill",
        include_str!("../../../data/drafts/split_bill.tdg.json"),
    ),
];

impl DraftClient for StubDraftClient {
    fn draft(&self, req: &DraftRequest) -> Result<String, DraftError> {
        if req.topic.is_empty() {
            return Err(DraftError::EmptyTopic);
        }
        let topic = req.topic.to_ascii_lowercase();
        STUB_DRAFTS
            .iter()
            .find(|(t, _)| *t == topic)
            .map(|(_, src)| src.to_string())
            .ok_or(DraftError::EmptyResponse)
    }
}

/// Network client. Reads the endpoint URL from `TDG_LLM_ENDPOINT` and the
/// credential from `TDG_LLM_KEY`; sends the drafting prompt documented in
/// `docs/drafting.md` and returns the response text verbatim.
pub struct HttpDraftClient {
    pub endpoint: String,
    pub key: Option<String>,
}

impl HttpDraftClient {
    pub fn from_env() -> Result<Self, DraftError> {
        let endpoint = std::env::var("TDG_LLM_ENDPOINT")
            .map_err(|_| DraftError::EndpointUnavailable("TDG_LLM_ENDPOINT not set".into()))?;
        Ok(HttpDraftClient {
            endpoint,
            key: std::env::var("TDG_LLM_KEY").ok(),
        })
    }

    pub fn drafting_prompt(req: &DraftRequest) -> String {
        let mut prompt = format!(
            "Write one meta-template as a single JSON document with fields id, params, \
             lexicon_slots, constraint, problem_template, nl_solution_template, \
             code_solution_template. Topic: {}.",
            req.topic
        );
        if let Some(d) = &req.difficulty {
            prompt.push_str(&format!(" Difficulty: {d}."));
        }
        if !req.required_slots.is_empty() {
            prompt.push_str(&format!(
                " Use lexicon slots from categories: {}.",
                req.required_slots.join(", ")
            ));
        }
        prompt.push_str(
            " The code_solution_template must be straight-line assignments ending in \
             `result = ...`, and the natural-language solution must end with the final \
             integer answer.",
        );
        prompt
    }
}

impl DraftClient for HttpDraftClient {
    fn draft(&self, req: &DraftRequest) -> Result<String, DraftError> {
        if req.topic.is_empty() {
            return Err(DraftError::EmptyTopic);
        }
        let client = reqwest::blocking::Client::new();
        let mut post = client.post(&self.endpoint).json(&serde_json::json!({
            "prompt": Self::drafting_prompt(req),
        }));
        if let Some(key) = &self.key {
            post = post.bearer_auth(key);
        }
        let resp = post
            .send()
            .map_err(|e| DraftError::EndpointUnavailable(e.to_string()))?;
        let body: serde_json::Value = resp
            .json()
            .map_err(|e| DraftError::EndpointUnavailable(e.to_string()))?;
        let text = body
            .get("text")
            .and_then(|t| t.as_str())
            .unwrap_or_default()
            .to_string();
        if text.is_empty() {
            return Err(DraftError::EmptyResponse);
        }
        Ok(text)
    }
}

/// Request a candidate template from the configured client.
pub fn draft_template(
    req: &DraftRequest,
    client: &dyn DraftClient,
) -> Result<String, DraftError> {
    client.draft(req)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TemplateReport {
    pub parse_ok: bool,
    pub parse_error: Option<String>,
    pub violations: Vec<String>,
    pub instances_attempted: u64,
    pub verified: u64,
    pub rejected_by_category: BTreeMap<String, u64>,
    pub admitted: bool,
}

/// Dry-run a candidate template: parse, validate references, then run
/// `n_dry_run` full instantiate-render-verify cycles with the same seed
/// derivation the pipeline uses. Admission requires a clean parse and 100%
/// verification.
pub fn audit_template(
    source: &str,
    lex: &Lexicon,
    n_dry_run: u64,
    seed: u64,
) -> TemplateReport {
    let mut report = TemplateReport {
        parse_ok: false,
        parse_error: None,
        violations: Vec::new(),
        instances_attempted: 0,
        verified: 0,
        rejected_by_category: BTreeMap::new(),
        admitted: false,
    };

    let tpl = match template::parse_template_lenient(source) {
        Ok(t) => t,
        Err(e) => {
            report.parse_error = Some(e.to_string());
            return report;
        }
    };
    let violations = template::validate_references(&tpl);
    report.violations = violations.iter().map(Violation::to_string).collect();
    match template::typecheck(&tpl) {
        Ok(()) => report.parse_ok = true,
        Err(TemplateError::TypeMismatch { context, message }) => {
            report
                .violations
                .push(format!("type mismatch in {context}: {message}"));
            report.parse_ok = true;
        }
        Err(e) => {
            report.parse_error = Some(e.to_string());
            return report;
        }
    }
    if !report.violations.is_empty() {
        return report;
    }
    for slot in &tpl.lexicon_slots {
        if !lex.has_category(&slot.category) {
            report
                .violations
                .push(format!("lexicon category `{}` not loaded", slot.category));
        }
    }
    if !report.violations.is_empty() {
        return report;
    }

    let cfg = GenerationConfig::default();
    for i in 0..n_dry_run.max(1) {
        report.instances_attempted += 1;
        let base_seed = derive_instance_seed(seed, &tpl.id, i);
        let binding = match sample_binding(&tpl, lex, base_seed, cfg.max_attempts_per_instance) {
            Ok(b) => b,
            Err(SampleError::Unsatisfiable { .. }) => {
                *report
                    .rejected_by_category
                    .entry("unsatisfiable".into())
                    .or_insert(0) += 1;
                continue;
            }
            Err(e) => {
                *report
                    .rejected_by_category
                    .entry(format!("sample_error: {e}"))
                    .or_insert(0) += 1;
                continue;
            }
        };
        let rendered = match render_instance(&tpl, &binding) {
            Ok(r) => r,
            Err(e) => {
                *report
                    .rejected_by_category
                    .entry(format!("render_error: {e}"))
                    .or_insert(0) += 1;
                continue;
            }
        };
        match verify(
            &rendered.code_source,
            Some(&rendered.nl_solution),
            cfg.step_budget,
        ) {
            Verdict::Accepted { .. } => report.verified += 1,
            Verdict::Rejected { category, .. } => {
                *report
                    .rejected_by_category
                    .entry(category.to_string())
                    .or_insert(0) += 1;
            }
        }
    }
    report.admitted = report.parse_ok
        && report.violations.is_empty()
        && report.verified == report.instances_attempted;
    report
}
