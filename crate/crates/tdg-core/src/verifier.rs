//! Render-independent verification of a problem/solution triple and the
//! binary reward mapping.

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{self, SolverError};
use crate::value::NumericValue;

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Accepted {
        result_raw: NumericValue,
        result_rounded: i64,
    },
    Rejected {
        category: RejectCategory,
        detail: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectCategory {
    ParseFailure,
    ExecutionError,
    MissingResult,
    NonFinite,
    NlMismatch,
    BudgetExceeded,
}

impl std::fmt::Display for RejectCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RejectCategory::ParseFailure => "parse_failure",
            RejectCategory::ExecutionError => "execution_error",
            RejectCategory::MissingResult => "missing_result",
            RejectCategory::NonFinite => "non_finite",
            RejectCategory::NlMismatch => "nl_mismatch",
            RejectCategory::BudgetExceeded => "budget_exceeded",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    /// 0 or -1.
    pub reject_reward: i32,
}

impl RewardConfig {
    pub fn new(reject_reward: i32) -> Result<Self, RewardConfigError> {
        if reject_reward == 0 || reject_reward == -1 {
            Ok(RewardConfig { reject_reward })
        } else {
            Err(RewardConfigError(reject_reward))
        }
    }
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { reject_reward: 0 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("reject reward must be 0 or -1, got {0}")]
pub struct RewardConfigError(pub i32);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no number found in natural-language solution")]
pub struct NoNumberFound;

/// Verify a code solution, optionally cross-checking the natural-language
/// final answer. Total: every input maps to a verdict, nothing is thrown.
pub fn verify(code_source: &str, nl_solution: Option<&str>, step_budget: u64) -> Verdict {
    let prog = match solver::parse_program(code_source) {
        Ok(p) => p,
        Err(e) => {
            return Verdict::Rejected {
                category: RejectCategory::ParseFailure,
                detail: e.to_string(),
            }
        }
    };
    if !solver::check_straight_line(&prog) {
        return Verdict::Rejected {
            category: RejectCategory::ParseFailure,
            detail: "program is not in straight-line form".into(),
        };
    }
    let outcome = match solver::execute(&prog, step_budget) {
        Ok(o) => o,
        Err(e) => {
            let category = match e {
                SolverError::MissingResult => RejectCategory::MissingResult,
                SolverError::NonFiniteResult { .. } | SolverError::ResultOutOfRange => {
                    RejectCategory::NonFinite
                }
                SolverError::BudgetExceeded { .. } => RejectCategory::BudgetExceeded,
                SolverError::Syntax { .. } => RejectCategory::ParseFailure,
                _ => RejectCategory::ExecutionError,
            };
            return Verdict::Rejected {
                category,
                detail: e.to_string(),
            };
        }
    };
    if !outcome.result_raw.is_finite() {
        return Verdict::Rejected {
            category: RejectCategory::NonFinite,
            detail: "result is not finite".into(),
        };
    }
    if let Some(nl) = nl_solution {
        match extract_final_number(nl) {
            Ok(claimed) if claimed == outcome.result_rounded => {}
            Ok(claimed) => {
                return Verdict::Rejected {
                    category: RejectCategory::NlMismatch,
                    detail: format!("expected {} got {claimed}", outcome.result_rounded),
                }
            }
            Err(NoNumberFound) => {
                return Verdict::Rejected {
                    category: RejectCategory::NlMismatch,
                    detail: "no final number in NL solution".into(),
                }
            }
        }
    }
    Verdict::Accepted {
        result_raw: outcome.result_raw,
        result_rounded: outcome.result_rounded,
    }
}

static NUMBER_RE: Lazy<Regex> = Lazy::new(|| {
    // integers with optional thousands separators, e.g. 55 or 1,250
    Regex::new(r"-?\d+(?:,\d{3})*").unwrap()
});

/// The last integer literal in the text, scanning left to right.
/// Thousands-separator commas are stripped; `$` math delimiters are ignored
/// because the regex never matches them.
pub fn extract_final_number(nl_solution: &str) -> Result<i64, NoNumberFound> {
    let last = NUMBER_RE
        .find_iter(nl_solution)
        .last()
        .ok_or(NoNumberFound)?;
    let cleaned: String = last.as_str().chars().filter(|c| *c != ',').collect();
    cleaned.parse().map_err(|_| NoNumberFound)
}

/// Map a verdict to the binary training reward.
pub fn reward(v: &Verdict, cfg: RewardConfig) -> i32 {
    match v {
        Verdict::Accepted { .. } => 1,
        Verdict::Rejected { .. } => cfg.reject_reward,
    }
}

// ---------------------------------------------------------------------------
// Reward oracle protocol (line-delimited JSON over stdio)
// ---------------------------------------------------------------------------

/// One oracle request: `{"code": ..., "nl": ..., "reject_reward": 0|-1}`.
/// `nl` and `reject_reward` are optional.
#[derive(Debug, Deserialize)]
pub struct RewardRequest {
    pub code: String,
    #[serde(default)]
    pub nl: Option<String>,
    #[serde(default)]
    pub reject_reward: Option<i32>,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct RewardResponse {
    pub verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<RejectCategory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<i64>,
    pub reward: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Answer one oracle request.
pub fn answer_reward_request(req: &RewardRequest, step_budget: u64) -> RewardResponse {
    let cfg = match req.reject_reward {
        Some(r) => match RewardConfig::new(r) {
            Ok(c) => c,
            Err(e) => {
                return RewardResponse {
                    verdict: "error",
                    category: None,
                    result: None,
                    reward: 0,
                    error: Some(e.to_string()),
                }
            }
        },
        None => RewardConfig::default(),
    };
    let verdict = verify(&req.code, req.nl.as_deref(), step_budget);
    let reward = reward(&verdict, cfg);
    match verdict {
        Verdict::Accepted { result_rounded, .. } => RewardResponse {
            verdict: "accepted",
            category: None,
            result: Some(result_rounded),
            reward,
        error: None,
        },
        Verdict::Rejected { category, .. } => RewardResponse {
            verdict: "rejected",
            category: Some(category),
            result: None,
            reward,
            error: None,
        },
    }
}

/// Serve the oracle protocol: one JSON request per input line, one JSON
/// response per output line. Malformed lines get an `"error"` response
/// rather than terminating the loop.
pub fn run_reward_loop<R: std::io::BufRead, W: std::io::Write>(
    input: R,
    mut output: W,
    step_budget: u64,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<RewardRequest>(&line) {
            Ok(req) => answer_reward_request(&req, step_budget),
            Err(e) => RewardResponse {
                verdict: "error",
                category: None,
                result: None,
                reward: 0,
                error: Some(format!("bad request: {e}")),
            },
        };
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted { .. })
    }

    pub fn category(&self) -> Option<RejectCategory> {
        match self {
            Verdict::Accepted { .. } => None,
            Verdict::Rejected { category, .. } => Some(*category),
        }
    }
}
