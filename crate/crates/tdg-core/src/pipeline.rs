//! The generation loop: instantiate, render, verify, accept-or-resample,
//! across a template corpus, deterministically and in parallel.
//!
//! Work is partitioned by (template, instance index). Each unit is a pure
//! function of its derived seed, and outputs are merged in (template order,
//! instance index) order, so the worker count never shows in the output.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::{DatasetError, DatasetRecord};
use crate::lexicon::Lexicon;
use crate::renderer::{render_instance, RenderedInstance};
use crate::rng::{derive_instance_seed, fnv1a64, substream_seed, Fnv1a64};
use crate::sampler::{sample_binding_counted, Binding, SampleError};
use crate::solver::DEFAULT_STEP_BUDGET;
use crate::template::{MetaTemplate, ParamDomain};
use crate::verifier::{verify, Verdict};

/// Duplicate resamples draw from substreams far above the rejection-retry
/// substreams, so the two sequences never overlap.
const DUPLICATE_STREAM_BASE: u64 = 1 << 32;

/// Instances probed before declaring a whole template unsatisfiable.
const UNSAT_PROBE_LIMIT: u64 = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct GenerationConfig {
    pub global_seed: u64,
    pub per_template: u64,
    pub max_attempts_per_instance: u32,
    pub max_resamples_on_duplicate: u32,
    pub step_budget: u64,
    pub nl_check: bool,
    /// Worker count; never affects output bytes, so it is not echoed into
    /// the manifest.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            global_seed: 0,
            per_template: 1000,
            max_attempts_per_instance: 100,
            max_resamples_on_duplicate: 10,
            step_budget: DEFAULT_STEP_BUDGET,
            nl_check: true,
            jobs: 1,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.per_template < 1 {
            return Err(PipelineError::InvalidConfig("per_template must be >= 1".into()));
        }
        if self.max_attempts_per_instance < 1 {
            return Err(PipelineError::InvalidConfig(
                "max_attempts_per_instance must be >= 1".into(),
            ));
        }
        if self.step_budget < 1 {
            return Err(PipelineError::InvalidConfig("step_budget must be >= 1".into()));
        }
        if self.jobs < 1 {
            return Err(PipelineError::InvalidConfig("jobs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("template `{template_id}` uses lexicon category `{category}` which is not loaded")]
    MissingLexiconCategory {
        template_id: String,
        category: String,
    },
    #[error("sink error: {0}")]
    Sink(#[from] DatasetError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct TemplateCounters {
    pub template_id: String,
    pub emitted: u64,
    pub rejected_by_category: BTreeMap<String, u64>,
    pub duplicates_resampled: u64,
    /// Instances dropped because the duplicate-resample budget ran out.
    pub duplicate_shortfall: u64,
    pub unsatisfiable: bool,
}

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct RunTotals {
    pub emitted: u64,
    pub rejected: u64,
    pub duplicates_resampled: u64,
    pub duplicate_shortfall: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub config: GenerationConfig,
    /// FNV-1a digest over the template corpus and lexicon content, hex.
    pub corpus_digest: String,
    pub templates: Vec<TemplateCounters>,
    pub totals: RunTotals,
}

impl PartialEq for GenerationConfig {
    fn eq(&self, other: &Self) -> bool {
        self.global_seed == other.global_seed
            && self.per_template == other.per_template
            && self.max_attempts_per_instance == other.max_attempts_per_instance
            && self.max_resamples_on_duplicate == other.max_resamples_on_duplicate
            && self.step_budget == other.step_budget
            && self.nl_check == other.nl_check
    }
}

/// Anything that consumes emitted records in canonical order.
pub trait RecordSink {
    fn emit(&mut self, record: DatasetRecord) -> Result<(), DatasetError>;
}

impl RecordSink for Vec<DatasetRecord> {
    fn emit(&mut self, record: DatasetRecord) -> Result<(), DatasetError> {
        self.push(record);
        Ok(())
    }
}

impl<W: std::io::Write> RecordSink for crate::dataset::JsonlWriter<W> {
    fn emit(&mut self, record: DatasetRecord) -> Result<(), DatasetError> {
        self.write(&record)
    }
}

/// Stable content digest of a problem text, used for intra-template
/// deduplication. The empty text hashes to the FNV-1a offset basis.
pub fn dedup_key(problem_text: &str) -> u64 {
    fnv1a64(problem_text.as_bytes())
}

/// Deterministic retry: the binding for retry `attempt` of an instance.
pub fn resample_instance(
    tpl: &MetaTemplate,
    lex: &Lexicon,
    base_seed: u64,
    attempt: u64,
    max_attempts: u32,
) -> Result<Binding, SampleError> {
    sample_binding_counted(tpl, lex, substream_seed(base_seed, attempt), max_attempts)
        .map(|(b, _)| b)
}

// one fully generated, verified candidate
struct Candidate {
    rendered: RenderedInstance,
    result_rounded: i64,
}

enum InstanceOutcome {
    Emitted {
        candidate: Candidate,
        rejections: Vec<String>,
    },
    Failed {
        rejections: Vec<String>,
        unsatisfiable: bool,
    },
}

/// Generate one instance: bounded loop of draw, render, verify.
/// `stream_base` offsets the substream sequence (0 for the primary pass,
/// [`DUPLICATE_STREAM_BASE`]` + k` for duplicate resamples).
fn generate_instance(
    tpl: &MetaTemplate,
    lex: &Lexicon,
    cfg: &GenerationConfig,
    base_seed: u64,
    stream_base: u64,
) -> InstanceOutcome {
    let mut remaining = cfg.max_attempts_per_instance;
    let mut rejections = Vec::new();
    let mut any_binding = false;
    let mut stream = stream_base;
    while remaining > 0 {
        let seed = substream_seed(base_seed, stream);
        stream += 1;
        let (binding, used) = match sample_binding_counted(tpl, lex, seed, remaining) {
            Ok(ok) => ok,
            Err(SampleError::Unsatisfiable { .. }) => {
                return InstanceOutcome::Failed {
                    unsatisfiable: !any_binding && rejections.is_empty(),
                    rejections,
                };
            }
            Err(_) => {
                return InstanceOutcome::Failed {
                    rejections,
                    unsatisfiable: false,
                };
            }
        };
        any_binding = true;
        remaining = remaining.saturating_sub(used);
        let rendered = match render_instance(tpl, &binding) {
            Ok(r) => r,
            Err(e) => {
                rejections.push(format!("render_error: {e}"));
                continue;
            }
        };
        let nl = if cfg.nl_check {
            Some(rendered.nl_solution.as_str())
        } else {
            None
        };
        match verify(&rendered.code_source, nl, cfg.step_budget) {
            Verdict::Accepted { result_rounded, .. } => {
                return InstanceOutcome::Emitted {
                    candidate: Candidate {
                        rendered,
                        result_rounded,
                    },
                    rejections,
                }
            }
            Verdict::Rejected { category, .. } => {
                rejections.push(category.to_string());
            }
        }
    }
    InstanceOutcome::Failed {
        rejections,
        unsatisfiable: false,
    }
}

fn corpus_digest(templates: &[MetaTemplate], lex: &Lexicon) -> u64 {
    let mut h = Fnv1a64::new();
    for tpl in templates {
        h.update(tpl.id.as_bytes());
        h.update(&[0xff]);
        for p in &tpl.params {
            h.update(p.name.as_bytes());
            h.update(&[0xfe]);
            match &p.domain {
                ParamDomain::IntRange { lo, hi } => {
                    h.update(b"int_range");
                    h.update(&lo.to_le_bytes());
                    h.update(&hi.to_le_bytes());
                }
                ParamDomain::Choice(vs) => {
                    h.update(b"choice");
                    for v in vs {
                        h.update(&v.to_le_bytes());
                    }
                }
                ParamDomain::FloatChoice(vs) => {
                    h.update(b"float_choice");
                    for v in vs {
                        h.update(&v.to_bits().to_le_bytes());
                    }
                }
            }
            h.update(&[0xff]);
        }
        for s in &tpl.lexicon_slots {
            h.update(s.name.as_bytes());
            h.update(&[0xfe]);
            h.update(s.category.as_bytes());
            h.update(&[0xff]);
        }
        if let Some(c) = &tpl.constraint_source {
            h.update(c.as_bytes());
        }
        h.update(&[0xff]);
        for text in [
            &tpl.problem_template,
            &tpl.nl_solution_template,
            &tpl.code_solution_template,
        ] {
            h.update(text.to_source().as_bytes());
            h.update(&[0xff]);
        }
    }
    for cat in lex.categories() {
        h.update(cat.as_bytes());
        h.update(&[0xfe]);
        for term in lex.terms(cat).unwrap_or(&[]) {
            h.update(term.as_bytes());
            h.update(&[0xff]);
        }
    }
    h.finish()
}

/// Run the full corpus generation. Records reach the sink in
/// (template order, instance index) order.
pub fn generate_corpus(
    templates: &[MetaTemplate],
    lex: &Lexicon,
    cfg: &GenerationConfig,
    sink: &mut dyn RecordSink,
) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    for tpl in templates {
        for slot in &tpl.lexicon_slots {
            if !lex.has_category(&slot.category) {
                return Err(PipelineError::MissingLexiconCategory {
                    template_id: tpl.id.clone(),
                    category: slot.category.clone(),
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| PipelineError::ThreadPool(e.to_string()))?;

    let mut manifest_templates = Vec::with_capacity(templates.len());
    let mut totals = RunTotals::default();

    for tpl in templates {
        let mut counters = TemplateCounters {
            template_id: tpl.id.clone(),
            ..TemplateCounters::default()
        };

        let outcomes: Vec<(u64, InstanceOutcome)> = pool.install(|| {
            (0..cfg.per_template)
                .into_par_iter()
                .map(|i| {
                    let base_seed = derive_instance_seed(cfg.global_seed, &tpl.id, i);
                    (base_seed, generate_instance(tpl, lex, cfg, base_seed, 0))
                })
                .collect()
        });

        // a template is unsatisfiable when its leading instances all
        // exhaust their draw budgets without ever producing a binding
        let probe = outcomes
            .iter()
            .take(UNSAT_PROBE_LIMIT as usize)
            .map(|(_, o)| matches!(o, InstanceOutcome::Failed { unsatisfiable: true, .. }));
        counters.unsatisfiable = probe.len() > 0 && probe.into_iter().all(|u| u);

        // sequential dedup pass in instance order; resamples are rare and
        // deterministic given the instance's base seed
        let mut seen = std::collections::HashSet::new();
        for (i, (base_seed, outcome)) in outcomes.into_iter().enumerate() {
            let instance_index = i as u64;
            match outcome {
                InstanceOutcome::Emitted {
                    mut candidate,
                    rejections,
                } => {
                    for r in &rejections {
                        *counters.rejected_by_category.entry(r.clone()).or_insert(0) += 1;
                        totals.rejected += 1;
                    }
                    let mut key = dedup_key(&candidate.rendered.problem);
                    let mut accepted = seen.insert(key);
                    if !accepted {
                        for k in 1..=u64::from(cfg.max_resamples_on_duplicate) {
                            counters.duplicates_resampled += 1;
                            totals.duplicates_resampled += 1;
                            match generate_instance(
                                tpl,
                                lex,
                                cfg,
                                base_seed,
                                k * DUPLICATE_STREAM_BASE,
                            ) {
                                InstanceOutcome::Emitted {
                                    candidate: fresh, ..
                                } => {
                                    key = dedup_key(&fresh.rendered.problem);
                                    if seen.insert(key) {
                                        candidate = fresh;
                                        accepted = true;
                                        break;
                                    }
                                }
                                InstanceOutcome::Failed { .. } => continue,
                            }
                        }
                    }
                    if accepted {
                        let rendered = candidate.rendered;
                        sink.emit(DatasetRecord {
                            id: format!("{}#{}", tpl.id, instance_index),
                            template_id: tpl.id.clone(),
                            instance_index,
                            seed: rendered.binding.instance_seed,
                            problem: rendered.problem,
                            solution_code: rendered.code_source,
                            solution_nl: rendered.nl_solution,
                            result: candidate.result_rounded,
                            verified: true,
                        })?;
                        counters.emitted += 1;
                        totals.emitted += 1;
                    } else {
                        counters.duplicate_shortfall += 1;
                        totals.duplicate_shortfall += 1;
                    }
                }
                InstanceOutcome::Failed {
                    rejections,
                    unsatisfiable,
                } => {
                    for r in &rejections {
                        *counters.rejected_by_category.entry(r.clone()).or_insert(0) += 1;
                        totals.rejected += 1;
                    }
                    if unsatisfiable {
                        *counters
                            .rejected_by_category
                            .entry("unsatisfiable".to_string())
                            .or_insert(0) += 1;
                        totals.rejected += 1;
                    }
                }
            }
        }
        manifest_templates.push(counters);
    }

    Ok(RunManifest {
        config: cfg.clone(),
        corpus_digest: format!("{:016x}", corpus_digest(templates, lex)),
        templates: manifest_templates,
        totals,
    })
}
