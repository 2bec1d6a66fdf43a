//! Template-based generation of verified math problem/solution datasets.
//!
//! A template corpus (`.tdg.json` files) plus a lexicon is instantiated
//! into problem / natural-language solution / code solution triples. Every
//! triple is verified by executing the code solution in a closed
//! straight-line arithmetic language; only verified instances are emitted.
//! The same verifier doubles as a binary reward oracle for training loops.
//!
//! Modules follow the pipeline stages: [`template`] and [`lexicon`] define
//! the inputs, [`sampler`] draws constraint-satisfying bindings from
//! deterministic seeds, [`renderer`] produces the three texts, [`solver`]
//! and [`verifier`] check them, [`pipeline`] orchestrates generation, and
//! [`dataset`] handles the JSONL output and statistics.

pub mod authoring;
pub mod dataset;
pub mod lexicon;
pub mod pipeline;
pub mod renderer;
pub mod rng;
pub mod sampler;
pub mod solver;
pub mod template;
pub mod value;
pub mod verifier;

pub use dataset::{CorpusStats, DatasetRecord};
pub use lexicon::Lexicon;
pub use pipeline::{GenerationConfig, RunManifest};
pub use renderer::RenderedInstance;
pub use sampler::Binding;
pub use solver::{ExecOutcome, SolutionProgram};
pub use template::MetaTemplate;
pub use value::NumericValue;
pub use verifier::{RewardConfig, Verdict};
