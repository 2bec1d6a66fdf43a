//! Categorized term lists (names, items, month pairs, places) that fill
//! lexicon slots during instantiation.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::rng::SplitMix64;

/// Immutable category → terms mapping. Term order is file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    categories: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexiconError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("category `{0}` is empty")]
    EmptyCategory(String),
    #[error("duplicate term `{term}` in category `{category}`")]
    DuplicateTerm { category: String, term: String },
    #[error("empty term in category `{0}`")]
    EmptyTerm(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("sanitizing `{0}` left nothing")]
    EmptyResult(String),
}

/// Parse the lexicon file format: a JSON object mapping category names to
/// arrays of terms.
pub fn load_lexicon(source: &str) -> Result<Lexicon, LexiconError> {
    #[derive(Deserialize)]
    #[serde(transparent)]
    struct Raw(serde_json::Map<String, serde_json::Value>);

    let raw: Raw = serde_json::from_str(source).map_err(|e| LexiconError::Syntax {
        line: e.line(),
        col: e.column(),
        message: e.to_string(),
    })?;

    let mut categories = BTreeMap::new();
    for (category, value) in raw.0 {
        let arr = value.as_array().ok_or_else(|| LexiconError::Syntax {
            line: 0,
            col: 0,
            message: format!("category `{category}` is not an array"),
        })?;
        let mut terms = Vec::with_capacity(arr.len());
        let mut seen = std::collections::HashSet::new();
        for v in arr {
            let term = v.as_str().ok_or_else(|| LexiconError::Syntax {
                line: 0,
                col: 0,
                message: format!("non-string term in category `{category}`"),
            })?;
            if term.is_empty() {
                return Err(LexiconError::EmptyTerm(category));
            }
            if !seen.insert(term.to_string()) {
                return Err(LexiconError::DuplicateTerm {
                    category,
                    term: term.to_string(),
                });
            }
            terms.push(term.to_string());
        }
        if terms.is_empty() {
            return Err(LexiconError::EmptyCategory(category));
        }
        categories.insert(category, terms);
    }
    Ok(Lexicon { categories })
}

impl Lexicon {
    pub fn from_categories(
        categories: impl IntoIterator<Item = (String, Vec<String>)>,
    ) -> Result<Self, LexiconError> {
        let map: BTreeMap<String, Vec<String>> = categories.into_iter().collect();
        for (cat, terms) in &map {
            if terms.is_empty() {
                return Err(LexiconError::EmptyCategory(cat.clone()));
            }
        }
        Ok(Lexicon { categories: map })
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }

    pub fn has_category(&self, category: &str) -> bool {
        self.categories.contains_key(category)
    }

    pub fn terms(&self, category: &str) -> Option<&[String]> {
        self.categories.get(category).map(Vec::as_slice)
    }

    /// Uniform draw from a category using the supplied generator.
    pub fn draw_term(
        &self,
        category: &str,
        rng: &mut SplitMix64,
    ) -> Result<&str, LexiconError> {
        let terms = self
            .categories
            .get(category)
            .ok_or_else(|| LexiconError::UnknownCategory(category.to_string()))?;
        let idx = rng.below(terms.len() as u64) as usize;
        Ok(&terms[idx])
    }
}

/// Turn an arbitrary term into a solution-language identifier: spaces become
/// underscores, anything outside `[A-Za-z0-9_]` is dropped, and a leading
/// digit gets an underscore prefix.
pub fn sanitize_identifier(term: &str) -> Result<String, LexiconError> {
    let mut out = String::with_capacity(term.len());
    for ch in term.chars() {
        if ch == ' ' {
            out.push('_');
        } else if ch == '_' || ch.is_ascii_alphanumeric() {
            out.push(ch);
        }
    }
    if out.is_empty() {
        return Err(LexiconError::EmptyResult(term.to_string()));
    }
    if out.as_bytes()[0].is_ascii_digit() {
        out.insert(0, '_');
    }
    Ok(out)
}
