//! Meta-template file format and the placeholder expression language.
//!
//! A template file is a JSON document (`.tdg.json`) with typed parameter
//! domains, lexicon slots, an optional constraint, and three render targets
//! whose texts embed `{...}` placeholders. The placeholder grammar is
//! documented in `docs/template-format.md`.

use serde::Deserialize;
use thiserror::Error;

use crate::value::NumericValue;

#[derive(Debug, Clone, PartialEq)]
pub struct MetaTemplate {
    pub id: String,
    pub params: Vec<ParamSpec>,
    pub lexicon_slots: Vec<SlotSpec>,
    pub constraint: Option<ConstraintExpr>,
    /// Raw constraint text as written in the file (for digests and reports).
    pub constraint_source: Option<String>,
    pub problem_template: TemplateText,
    pub nl_solution_template: TemplateText,
    pub code_solution_template: TemplateText,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub domain: ParamDomain,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamDomain {
    /// Inclusive integer range.
    IntRange { lo: i64, hi: i64 },
    Choice(Vec<i64>),
    FloatChoice(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotSpec {
    pub name: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintExpr {
    Compare {
        op: CmpOp,
        lhs: PlaceholderExpr,
        rhs: PlaceholderExpr,
    },
    And(Box<ConstraintExpr>, Box<ConstraintExpr>),
    Or(Box<ConstraintExpr>, Box<ConstraintExpr>),
    Not(Box<ConstraintExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

/// One render target, split into literal and placeholder segments.
/// Concatenating the segments' raw text reproduces the source byte-for-byte.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateText {
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    /// Raw source text; may contain `{{` / `}}` escapes.
    Literal { raw: String },
    Placeholder {
        /// Interior of the braces, verbatim.
        raw: String,
        expr: PlaceholderExpr,
        format: FormatSpec,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlaceholderExpr {
    Number(NumericValue),
    /// Parameter or lexicon-slot reference; resolved against declarations.
    Ref(String),
    Neg(Box<PlaceholderExpr>),
    Binary {
        op: BinOp,
        lhs: Box<PlaceholderExpr>,
        rhs: Box<PlaceholderExpr>,
    },
    /// `recv.split(delim)[index]`
    Split {
        recv: Box<PlaceholderExpr>,
        delim: String,
        index: usize,
    },
    /// `recv.sanitize()`
    Sanitize { recv: Box<PlaceholderExpr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatSpec {
    Default,
    /// `.Nf` with 0 <= N <= 6.
    FixedDecimals(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprType {
    Num,
    Text,
}

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("undeclared reference `{0}`")]
    UndeclaredReference(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("bad format spec `{0}`")]
    BadFormatSpec(String),
    #[error("type mismatch in `{context}`: {message}")]
    TypeMismatch { context: String, message: String },
    #[error("template id is empty")]
    EmptyId,
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("invalid domain for `{name}`: {message}")]
    InvalidDomain { name: String, message: String },
}

/// A reference-validation finding. Returned, never thrown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UndeclaredReference(String),
    /// Constraint symbol that resolves to a slot, not a param.
    ConstraintOnSlot(String),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::UndeclaredReference(n) => write!(f, "undeclared reference `{n}`"),
            Violation::ConstraintOnSlot(n) => {
                write!(f, "constraint references lexicon slot `{n}` (params only)")
            }
        }
    }
}

pub fn is_valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_ascii_alphanumeric())
}

// ---------------------------------------------------------------------------
// File parsing
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    id: String,
    #[serde(default)]
    params: Vec<RawParam>,
    #[serde(default)]
    lexicon_slots: Vec<RawSlot>,
    #[serde(default)]
    constraint: Option<String>,
    problem_template: String,
    nl_solution_template: String,
    code_solution_template: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParam {
    name: String,
    domain: RawDomain,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawDomain {
    IntRange([i64; 2]),
    Choice(Vec<i64>),
    FloatChoice(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlot {
    name: String,
    category: String,
}

impl MetaTemplate {
    /// Re-emit the template as source JSON. Parsing the output yields a
    /// structurally equal template.
    pub fn to_source(&self) -> String {
        use serde_json::{json, Map, Value};
        let params: Vec<Value> = self
            .params
            .iter()
            .map(|p| {
                let domain = match &p.domain {
                    ParamDomain::IntRange { lo, hi } => json!({ "int_range": [lo, hi] }),
                    ParamDomain::Choice(v) => json!({ "choice": v }),
                    ParamDomain::FloatChoice(v) => json!({ "float_choice": v }),
                };
                json!({ "name": p.name, "domain": domain })
            })
            .collect();
        let slots: Vec<Value> = self
            .lexicon_slots
            .iter()
            .map(|s| json!({ "name": s.name, "category": s.category }))
            .collect();
        let mut obj = Map::new();
        obj.insert("id".into(), json!(self.id));
        obj.insert("params".into(), Value::Array(params));
        obj.insert("lexicon_slots".into(), Value::Array(slots));
        if let Some(src) = &self.constraint_source {
            obj.insert("constraint".into(), json!(src));
        }
        obj.insert("problem_template".into(), json!(self.problem_template.to_source()));
        obj.insert(
            "nl_solution_template".into(),
            json!(self.nl_solution_template.to_source()),
        );
        obj.insert(
            "code_solution_template".into(),
            json!(self.code_solution_template.to_source()),
        );
        serde_json::to_string_pretty(&Value::Object(obj)).expect("template JSON")
    }
}

/// Parse one template file into a fully validated [`MetaTemplate`].
pub fn parse_template(source: &str) -> Result<MetaTemplate, TemplateError> {
    let tpl = parse_template_lenient(source)?;
    let violations = validate_references(&tpl);
    if let Some(v) = violations.first() {
        return Err(match v {
            Violation::UndeclaredReference(n) => TemplateError::UndeclaredReference(n.clone()),
            Violation::ConstraintOnSlot(n) => TemplateError::UndeclaredReference(n.clone()),
        });
    }
    typecheck_template(&tpl)?;
    Ok(tpl)
}

/// Parse without resolving references or type-checking, so callers can
/// report all findings instead of the first failure.
pub fn parse_template_lenient(source: &str) -> Result<MetaTemplate, TemplateError> {
    let raw: RawTemplate = serde_json::from_str(source).map_err(|e| TemplateError::Syntax {
        line: e.line(),
        col: e.column(),
        message: e.to_string(),
    })?;

    if raw.id.is_empty() {
        return Err(TemplateError::EmptyId);
    }

    let mut seen = std::collections::HashSet::new();
    let mut params = Vec::with_capacity(raw.params.len());
    for p in raw.params {
        if !is_valid_identifier(&p.name) {
            return Err(TemplateError::InvalidIdentifier(p.name));
        }
        if !seen.insert(p.name.clone()) {
            return Err(TemplateError::DuplicateName(p.name));
        }
        let domain = match p.domain {
            RawDomain::IntRange([lo, hi]) => {
                if lo > hi {
                    return Err(TemplateError::InvalidDomain {
                        name: p.name,
                        message: format!("int_range lo {lo} > hi {hi}"),
                    });
                }
                ParamDomain::IntRange { lo, hi }
            }
            RawDomain::Choice(vs) => {
                if vs.is_empty() {
                    return Err(TemplateError::InvalidDomain {
                        name: p.name,
                        message: "choice list is empty".into(),
                    });
                }
                ParamDomain::Choice(vs)
            }
            RawDomain::FloatChoice(vs) => {
                if vs.is_empty() || vs.iter().any(|v| !v.is_finite()) {
                    return Err(TemplateError::InvalidDomain {
                        name: p.name,
                        message: "float_choice must be nonempty and finite".into(),
                    });
                }
                ParamDomain::FloatChoice(vs)
            }
        };
        params.push(ParamSpec {
            name: p.name,
            domain,
        });
    }

    let mut slots = Vec::with_capacity(raw.lexicon_slots.len());
    for s in raw.lexicon_slots {
        if !is_valid_identifier(&s.name) {
            return Err(TemplateError::InvalidIdentifier(s.name));
        }
        if !seen.insert(s.name.clone()) {
            return Err(TemplateError::DuplicateName(s.name));
        }
        slots.push(SlotSpec {
            name: s.name,
            category: s.category,
        });
    }

    let constraint = match &raw.constraint {
        Some(src) => Some(parse_constraint(src)?),
        None => None,
    };

    Ok(MetaTemplate {
        id: raw.id,
        params,
        lexicon_slots: slots,
        constraint,
        constraint_source: raw.constraint,
        problem_template: parse_template_text(&raw.problem_template)?,
        nl_solution_template: parse_template_text(&raw.nl_solution_template)?,
        code_solution_template: parse_template_text(&raw.code_solution_template)?,
    })
}

/// Error raised when the template's expressions do not type-check; exposed
/// so audit reports can run the check separately from parsing.
pub fn typecheck(tpl: &MetaTemplate) -> Result<(), TemplateError> {
    typecheck_template(tpl)
}

/// Collect every unresolved or misplaced name reference in the template.
pub fn validate_references(tpl: &MetaTemplate) -> Vec<Violation> {
    let params: std::collections::HashSet<&str> =
        tpl.params.iter().map(|p| p.name.as_str()).collect();
    let slots: std::collections::HashSet<&str> =
        tpl.lexicon_slots.iter().map(|s| s.name.as_str()).collect();

    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();

    let check_expr = |expr: &PlaceholderExpr, out: &mut Vec<Violation>, seen: &mut std::collections::HashSet<String>| {
        for name in expr_refs(expr) {
            if !params.contains(name.as_str()) && !slots.contains(name.as_str())
                && seen.insert(name.clone())
            {
                out.push(Violation::UndeclaredReference(name));
            }
        }
    };

    for text in [
        &tpl.problem_template,
        &tpl.nl_solution_template,
        &tpl.code_solution_template,
    ] {
        for seg in &text.segments {
            if let Segment::Placeholder { expr, .. } = seg {
                check_expr(expr, &mut out, &mut seen);
            }
        }
    }

    if let Some(c) = &tpl.constraint {
        for name in constraint_refs(c) {
            if params.contains(name.as_str()) {
                continue;
            }
            if slots.contains(name.as_str()) {
                if seen.insert(name.clone()) {
                    out.push(Violation::ConstraintOnSlot(name));
                }
            } else if seen.insert(name.clone()) {
                out.push(Violation::UndeclaredReference(name));
            }
        }
    }
    out
}

fn expr_refs(expr: &PlaceholderExpr) -> Vec<String> {
    let mut out = Vec::new();
    collect_refs(expr, &mut out);
    out
}

fn collect_refs(expr: &PlaceholderExpr, out: &mut Vec<String>) {
    match expr {
        PlaceholderExpr::Number(_) => {}
        PlaceholderExpr::Ref(n) => out.push(n.clone()),
        PlaceholderExpr::Neg(e) | PlaceholderExpr::Sanitize { recv: e } => collect_refs(e, out),
        PlaceholderExpr::Split { recv, .. } => collect_refs(recv, out),
        PlaceholderExpr::Binary { lhs, rhs, .. } => {
            collect_refs(lhs, out);
            collect_refs(rhs, out);
        }
    }
}

fn constraint_refs(c: &ConstraintExpr) -> Vec<String> {
    let mut out = Vec::new();
    fn go(c: &ConstraintExpr, out: &mut Vec<String>) {
        match c {
            ConstraintExpr::Compare { lhs, rhs, .. } => {
                collect_refs(lhs, out);
                collect_refs(rhs, out);
            }
            ConstraintExpr::And(a, b) | ConstraintExpr::Or(a, b) => {
                go(a, out);
                go(b, out);
            }
            ConstraintExpr::Not(a) => go(a, out),
        }
    }
    go(c, &mut out);
    out
}

/// Static type check: arithmetic over numbers, text methods over text.
fn typecheck_template(tpl: &MetaTemplate) -> Result<(), TemplateError> {
    let lookup = |name: &str| -> Option<ExprType> {
        if tpl.params.iter().any(|p| p.name == name) {
            Some(ExprType::Num)
        } else if tpl.lexicon_slots.iter().any(|s| s.name == name) {
            Some(ExprType::Text)
        } else {
            None
        }
    };
    for (target, text) in [
        ("problem_template", &tpl.problem_template),
        ("nl_solution_template", &tpl.nl_solution_template),
        ("code_solution_template", &tpl.code_solution_template),
    ] {
        for seg in &text.segments {
            if let Segment::Placeholder { raw, expr, format } = seg {
                let ty = infer_type(expr, &lookup).map_err(|message| {
                    TemplateError::TypeMismatch {
                        context: format!("{target}: {{{raw}}}"),
                        message,
                    }
                })?;
                if *format != FormatSpec::Default && ty == ExprType::Text {
                    return Err(TemplateError::TypeMismatch {
                        context: format!("{target}: {{{raw}}}"),
                        message: "fixed-decimal format applied to text value".into(),
                    });
                }
            }
        }
    }
    if let Some(c) = &tpl.constraint {
        typecheck_constraint(c, &lookup).map_err(|message| TemplateError::TypeMismatch {
            context: "constraint".into(),
            message,
        })?;
    }
    Ok(())
}

pub fn infer_type<F>(expr: &PlaceholderExpr, lookup: &F) -> Result<ExprType, String>
where
    F: Fn(&str) -> Option<ExprType>,
{
    match expr {
        PlaceholderExpr::Number(_) => Ok(ExprType::Num),
        PlaceholderExpr::Ref(n) => lookup(n).ok_or_else(|| format!("unknown name `{n}`")),
        PlaceholderExpr::Neg(e) => {
            if infer_type(e, lookup)? != ExprType::Num {
                return Err("unary minus applied to text value".into());
            }
            Ok(ExprType::Num)
        }
        PlaceholderExpr::Binary { lhs, rhs, .. } => {
            if infer_type(lhs, lookup)? != ExprType::Num
                || infer_type(rhs, lookup)? != ExprType::Num
            {
                return Err("arithmetic applied to text value".into());
            }
            Ok(ExprType::Num)
        }
        PlaceholderExpr::Split { recv, .. } => {
            if infer_type(recv, lookup)? != ExprType::Text {
                return Err("split() applied to numeric value".into());
            }
            Ok(ExprType::Text)
        }
        PlaceholderExpr::Sanitize { recv } => {
            if infer_type(recv, lookup)? != ExprType::Text {
                return Err("sanitize() applied to numeric value".into());
            }
            Ok(ExprType::Text)
        }
    }
}

fn typecheck_constraint<F>(c: &ConstraintExpr, lookup: &F) -> Result<(), String>
where
    F: Fn(&str) -> Option<ExprType>,
{
    match c {
        ConstraintExpr::Compare { lhs, rhs, .. } => {
            for side in [lhs, rhs] {
                if infer_type(side, lookup)? != ExprType::Num {
                    return Err("comparison over text value".into());
                }
            }
            Ok(())
        }
        ConstraintExpr::And(a, b) | ConstraintExpr::Or(a, b) => {
            typecheck_constraint(a, lookup)?;
            typecheck_constraint(b, lookup)
        }
        ConstraintExpr::Not(a) => typecheck_constraint(a, lookup),
    }
}

// ---------------------------------------------------------------------------
// Template text scanning
// ---------------------------------------------------------------------------

/// Split a render target into literal and placeholder segments.
/// `{{` and `}}` are literal-brace escapes.
pub fn parse_template_text(source: &str) -> Result<TemplateText, TemplateError> {
    let bytes = source.as_bytes();
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                literal.push_str("{{");
                i += 2;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                literal.push_str("}}");
                i += 2;
            }
            b'{' => {
                let end = find_placeholder_end(source, i + 1).ok_or_else(|| {
                    let (line, col) = line_col(source, i);
                    TemplateError::Syntax {
                        line,
                        col,
                        message: "unbalanced `{` in template text".into(),
                    }
                })?;
                if !literal.is_empty() {
                    segments.push(Segment::Literal {
                        raw: std::mem::take(&mut literal),
                    });
                }
                let raw = &source[i + 1..end];
                let (expr, format) = parse_placeholder(raw).map_err(|e| at_offset(source, i + 1, e))?;
                segments.push(Segment::Placeholder {
                    raw: raw.to_string(),
                    expr,
                    format,
                });
                i = end + 1;
            }
            b'}' => {
                let (line, col) = line_col(source, i);
                return Err(TemplateError::Syntax {
                    line,
                    col,
                    message: "unbalanced `}` in template text".into(),
                });
            }
            _ => {
                let ch_len = source[i..].chars().next().map(char::len_utf8).unwrap_or(1);
                literal.push_str(&source[i..i + ch_len]);
                i += ch_len;
            }
        }
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal { raw: literal });
    }
    Ok(TemplateText { segments })
}

/// Find the `}` closing a placeholder, skipping quoted string literals.
fn find_placeholder_end(source: &str, mut i: usize) -> Option<usize> {
    let bytes = source.as_bytes();
    while i < bytes.len() {
        match bytes[i] {
            b'}' => return Some(i),
            b'{' => return None,
            q @ (b'\'' | b'"') => {
                i += 1;
                while i < bytes.len() && bytes[i] != q {
                    i += 1;
                }
                if i >= bytes.len() {
                    return None;
                }
                i += 1;
            }
            _ => i += 1,
        }
    }
    None
}

fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (idx, ch) in source.char_indices() {
        if idx >= offset {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

/// Re-anchor a placeholder-local syntax error onto the enclosing text.
fn at_offset(source: &str, base: usize, e: TemplateError) -> TemplateError {
    match e {
        TemplateError::Syntax { col, message, .. } => {
            let (line, base_col) = line_col(source, base);
            TemplateError::Syntax {
                line,
                col: base_col + col - 1,
                message,
            }
        }
        other => other,
    }
}

impl TemplateText {
    /// Reassemble the exact source text.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal { raw } => out.push_str(raw),
                Segment::Placeholder { raw, .. } => {
                    out.push('{');
                    out.push_str(raw);
                    out.push('}');
                }
            }
        }
        out
    }

    /// True when the text contains at least one placeholder.
    pub fn has_placeholders(&self) -> bool {
        self.segments
            .iter()
            .any(|s| matches!(s, Segment::Placeholder { .. }))
    }
}

// ---------------------------------------------------------------------------
// Placeholder expression parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(NumericValue),
    Ident(String),
    Str(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Dot,
    Colon,
    Cmp(CmpOp),
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, TemplateError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        match bytes[i] {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                toks.push((Tok::Plus, start));
                i += 1;
            }
            b'-' => {
                toks.push((Tok::Minus, start));
                i += 1;
            }
            b'*' => {
                toks.push((Tok::Star, start));
                i += 1;
            }
            b'/' => {
                toks.push((Tok::Slash, start));
                i += 1;
            }
            b'(' => {
                toks.push((Tok::LParen, start));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, start));
                i += 1;
            }
            b'[' => {
                toks.push((Tok::LBracket, start));
                i += 1;
            }
            b']' => {
                toks.push((Tok::RBracket, start));
                i += 1;
            }
            b':' => {
                toks.push((Tok::Colon, start));
                i += 1;
            }
            b'<' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    toks.push((Tok::Cmp(CmpOp::Le), start));
                    i += 2;
                } else {
                    toks.push((Tok::Cmp(CmpOp::Lt), start));
                    i += 1;
                }
            }
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    toks.push((Tok::Cmp(CmpOp::Ge), start));
                    i += 2;
                } else {
                    toks.push((Tok::Cmp(CmpOp::Gt), start));
                    i += 1;
                }
            }
            b'=' => {
                // both `=` and `==` mean equality
                if bytes.get(i + 1) == Some(&b'=') {
                    toks.push((Tok::Cmp(CmpOp::Eq), start));
                    i += 2;
                } else {
                    toks.push((Tok::Cmp(CmpOp::Eq), start));
                    i += 1;
                }
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                toks.push((Tok::Cmp(CmpOp::Ne), start));
                i += 2;
            }
            q @ (b'\'' | b'"') => {
                i += 1;
                let s_start = i;
                while i < bytes.len() && bytes[i] != q {
                    i += 1;
                }
                if i >= bytes.len() {
                    return Err(syntax(start, "unterminated string literal"));
                }
                toks.push((Tok::Str(src[s_start..i].to_string()), start));
                i += 1;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let mut is_float = false;
                if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                    is_float = true;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text = &src[start..i];
                let num = if is_float {
                    NumericValue::Float(
                        text.parse::<f64>()
                            .map_err(|_| syntax(start, "bad float literal"))?,
                    )
                } else {
                    NumericValue::Int(
                        text.parse::<i64>()
                            .map_err(|_| syntax(start, "integer literal out of range"))?,
                    )
                };
                toks.push((Tok::Num(num), start));
            }
            b'.' => {
                toks.push((Tok::Dot, start));
                i += 1;
            }
            c if c == b'_' || c.is_ascii_alphabetic() => {
                while i < bytes.len()
                    && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric())
                {
                    i += 1;
                }
                toks.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(syntax(
                    start,
                    &format!("unexpected character `{}`", &src[start..].chars().next().unwrap()),
                ))
            }
        }
    }
    Ok(toks)
}

fn syntax(col0: usize, message: &str) -> TemplateError {
    TemplateError::Syntax {
        line: 1,
        col: col0 + 1,
        message: message.to_string(),
    }
}

struct ExprParser<'a> {
    lexer: Lexer<'a>,
    pos: usize,
}

impl<'a> ExprParser<'a> {
    fn new(src: &'a str) -> Result<Self, TemplateError> {
        Ok(ExprParser {
            lexer: Lexer {
                src,
                toks: lex(src)?,
            },
            pos: 0,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.lexer.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.lexer
            .toks
            .get(self.pos)
            .map(|&(_, o)| o)
            .unwrap_or(self.lexer.src.len())
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.lexer.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), TemplateError> {
        let off = self.offset();
        match self.bump() {
            Some(t) if &t == want => Ok(()),
            _ => Err(syntax(off, &format!("expected {what}"))),
        }
    }

    fn expr(&mut self) -> Result<PlaceholderExpr, TemplateError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = PlaceholderExpr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<PlaceholderExpr, TemplateError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = PlaceholderExpr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<PlaceholderExpr, TemplateError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(PlaceholderExpr::Neg(Box::new(self.unary()?)));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<PlaceholderExpr, TemplateError> {
        let mut expr = self.primary()?;
        while matches!(self.peek(), Some(Tok::Dot)) {
            self.bump();
            let off = self.offset();
            let name = match self.bump() {
                Some(Tok::Ident(n)) => n,
                _ => return Err(syntax(off, "expected method name after `.`")),
            };
            expr = match name.as_str() {
                "split" => {
                    self.expect(&Tok::LParen, "`(`")?;
                    let off = self.offset();
                    let delim = match self.bump() {
                        Some(Tok::Str(s)) => s,
                        _ => return Err(syntax(off, "split() takes a string delimiter")),
                    };
                    self.expect(&Tok::RParen, "`)`")?;
                    self.expect(&Tok::LBracket, "`[`")?;
                    let off = self.offset();
                    let index = match self.bump() {
                        Some(Tok::Num(NumericValue::Int(i))) if i >= 0 => i as usize,
                        _ => return Err(syntax(off, "split() index must be a nonnegative integer")),
                    };
                    self.expect(&Tok::RBracket, "`]`")?;
                    PlaceholderExpr::Split {
                        recv: Box::new(expr),
                        delim,
                        index,
                    }
                }
                "sanitize" => {
                    self.expect(&Tok::LParen, "`(`")?;
                    self.expect(&Tok::RParen, "`)`")?;
                    PlaceholderExpr::Sanitize {
                        recv: Box::new(expr),
                    }
                }
                other => return Err(TemplateError::UnknownMethod(other.to_string())),
            };
        }
        Ok(expr)
    }

    fn primary(&mut self) -> Result<PlaceholderExpr, TemplateError> {
        let off = self.offset();
        match self.bump() {
            Some(Tok::Num(n)) => Ok(PlaceholderExpr::Number(n)),
            Some(Tok::Ident(n)) => Ok(PlaceholderExpr::Ref(n)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(syntax(off, "expected number, name, or `(`")),
        }
    }
}

/// Parse the interior of a `{...}` placeholder into an expression plus
/// optional `:.Nf` format spec.
pub fn parse_placeholder(source: &str) -> Result<(PlaceholderExpr, FormatSpec), TemplateError> {
    let mut p = ExprParser::new(source)?;
    let expr = p.expr()?;
    match p.peek() {
        None => Ok((expr, FormatSpec::Default)),
        Some(Tok::Colon) => {
            p.bump();
            let rest = source[p.offset()..].trim();
            let fmt = parse_format_spec(rest)?;
            Ok((expr, fmt))
        }
        Some(_) => Err(syntax(p.offset(), "trailing tokens after expression")),
    }
}

fn parse_format_spec(text: &str) -> Result<FormatSpec, TemplateError> {
    let inner = text
        .strip_prefix('.')
        .and_then(|t| t.strip_suffix('f'))
        .ok_or_else(|| TemplateError::BadFormatSpec(text.to_string()))?;
    let n: u8 = inner
        .parse()
        .map_err(|_| TemplateError::BadFormatSpec(text.to_string()))?;
    if n > 6 {
        return Err(TemplateError::BadFormatSpec(text.to_string()));
    }
    Ok(FormatSpec::FixedDecimals(n))
}

// ---------------------------------------------------------------------------
// Constraint parsing
// ---------------------------------------------------------------------------

/// Grammar: `or := and ("or" and)*`, `and := not ("and" not)*`,
/// `not := "not" not | "(" or ")" | comparison`.
pub fn parse_constraint(source: &str) -> Result<ConstraintExpr, TemplateError> {
    let mut p = ExprParser::new(source)?;
    let c = parse_or(&mut p, source)?;
    if p.peek().is_some() {
        return Err(syntax(p.offset(), "trailing tokens after constraint"));
    }
    Ok(c)
}

fn parse_or(p: &mut ExprParser, src: &str) -> Result<ConstraintExpr, TemplateError> {
    let mut lhs = parse_and(p, src)?;
    while matches!(p.peek(), Some(Tok::Ident(n)) if n == "or") {
        p.bump();
        let rhs = parse_and(p, src)?;
        lhs = ConstraintExpr::Or(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_and(p: &mut ExprParser, src: &str) -> Result<ConstraintExpr, TemplateError> {
    let mut lhs = parse_not(p, src)?;
    while matches!(p.peek(), Some(Tok::Ident(n)) if n == "and") {
        p.bump();
        let rhs = parse_not(p, src)?;
        lhs = ConstraintExpr::And(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_not(p: &mut ExprParser, src: &str) -> Result<ConstraintExpr, TemplateError> {
    if matches!(p.peek(), Some(Tok::Ident(n)) if n == "not") {
        p.bump();
        return Ok(ConstraintExpr::Not(Box::new(parse_not(p, src)?)));
    }
    // A leading `(` may open a boolean group or a parenthesized arithmetic
    // operand; try the boolean reading first and backtrack.
    if matches!(p.peek(), Some(Tok::LParen)) {
        let save = p.pos;
        p.bump();
        if let Ok(inner) = parse_or(p, src) {
            if matches!(p.peek(), Some(Tok::RParen)) {
                p.bump();
                return Ok(inner);
            }
        }
        p.pos = save;
    }
    parse_comparison(p, src)
}

fn parse_comparison(p: &mut ExprParser, _src: &str) -> Result<ConstraintExpr, TemplateError> {
    let lhs = p.expr()?;
    let off = p.offset();
    let op = match p.bump() {
        Some(Tok::Cmp(op)) => op,
        _ => return Err(syntax(off, "expected comparison operator")),
    };
    let rhs = p.expr()?;
    Ok(ConstraintExpr::Compare { op, lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_template_parses() {
        let src = r#"{
            "id": "mini",
            "params": [{"name": "n", "domain": {"int_range": [1, 9]}}],
            "problem_template": "n is {n}.",
            "nl_solution_template": "n is {n}.",
            "code_solution_template": "result = {n}"
        }"#;
        let tpl = parse_template(src).unwrap();
        assert_eq!(tpl.params.len(), 1);
        assert!(tpl.lexicon_slots.is_empty());
    }

    #[test]
    fn static_template_parses() {
        let src = r#"{
            "id": "static",
            "problem_template": "What is one plus one?",
            "nl_solution_template": "One plus one is 2.",
            "code_solution_template": "result = 1 + 1"
        }"#;
        let tpl = parse_template(src).unwrap();
        assert!(tpl.params.is_empty());
        assert!(!tpl.problem_template.has_placeholders());
    }

    #[test]
    fn unbalanced_brace_is_syntax_error() {
        let err = parse_template_text("total is {amount").unwrap_err();
        assert!(matches!(err, TemplateError::Syntax { .. }), "{err:?}");
    }

    #[test]
    fn placeholder_with_format() {
        let (expr, fmt) = parse_placeholder("subsequent_ratio*100:.0f").unwrap();
        assert_eq!(fmt, FormatSpec::FixedDecimals(0));
        match expr {
            PlaceholderExpr::Binary { op: BinOp::Mul, lhs, rhs } => {
                assert_eq!(*lhs, PlaceholderExpr::Ref("subsequent_ratio".into()));
                assert_eq!(*rhs, PlaceholderExpr::Number(NumericValue::Int(100)));
            }
            other => panic!("unexpected expr {other:?}"),
        }
    }

    #[test]
    fn bare_reference_default_format() {
        let (expr, fmt) = parse_placeholder("name").unwrap();
        assert_eq!(expr, PlaceholderExpr::Ref("name".into()));
        assert_eq!(fmt, FormatSpec::Default);
    }

    #[test]
    fn split_method_parses() {
        let (expr, fmt) = parse_placeholder("month.split(' and ')[1]").unwrap();
        assert_eq!(fmt, FormatSpec::Default);
        assert_eq!(
            expr,
            PlaceholderExpr::Split {
                recv: Box::new(PlaceholderExpr::Ref("month".into())),
                delim: " and ".into(),
                index: 1,
            }
        );
    }

    #[test]
    fn unknown_method_rejected() {
        let err = parse_placeholder("month.upper()").unwrap_err();
        assert_eq!(err, TemplateError::UnknownMethod("upper".into()));
    }

    #[test]
    fn bad_format_spec_rejected() {
        assert!(matches!(
            parse_placeholder("n:.9f"),
            Err(TemplateError::BadFormatSpec(_))
        ));
        assert!(matches!(
            parse_placeholder("n:0f"),
            Err(TemplateError::BadFormatSpec(_))
        ));
    }

    #[test]
    fn undeclared_reference_detected() {
        let src = r#"{
            "id": "typo",
            "params": [{"name": "price", "domain": {"int_range": [1, 9]}}],
            "problem_template": "costs {pricee}",
            "nl_solution_template": "x",
            "code_solution_template": "result = {price}"
        }"#;
        let err = parse_template(src).unwrap_err();
        assert_eq!(err, TemplateError::UndeclaredReference("pricee".into()));
    }

    #[test]
    fn constraint_over_undeclared_param() {
        let src = r#"{
            "id": "c",
            "params": [{"name": "n", "domain": {"int_range": [1, 9]}}],
            "constraint": "m > 0",
            "problem_template": "{n}",
            "nl_solution_template": "{n}",
            "code_solution_template": "result = {n}"
        }"#;
        let err = parse_template(src).unwrap_err();
        assert_eq!(err, TemplateError::UndeclaredReference("m".into()));
    }

    #[test]
    fn duplicate_param_slot_name_rejected() {
        let src = r#"{
            "id": "dup",
            "params": [{"name": "n", "domain": {"int_range": [1, 9]}}],
            "lexicon_slots": [{"name": "n", "category": "item"}],
            "problem_template": "{n}",
            "nl_solution_template": "{n}",
            "code_solution_template": "result = 1"
        }"#;
        assert_eq!(
            parse_template(src).unwrap_err(),
            TemplateError::DuplicateName("n".into())
        );
    }

    #[test]
    fn arithmetic_on_slot_is_type_error() {
        let src = r#"{
            "id": "ty",
            "lexicon_slots": [{"name": "item", "category": "item"}],
            "problem_template": "{item * 2}",
            "nl_solution_template": "x",
            "code_solution_template": "result = 1"
        }"#;
        assert!(matches!(
            parse_template(src).unwrap_err(),
            TemplateError::TypeMismatch { .. }
        ));
    }

    #[test]
    fn brace_escapes_round_trip() {
        let text = parse_template_text("a {{literal}} brace and {n} value").unwrap();
        assert_eq!(text.to_source(), "a {{literal}} brace and {n} value");
    }

    #[test]
    fn constraint_boolean_operators() {
        let c = parse_constraint("n > 0 and (m < 5 or not m = 3)").unwrap();
        match c {
            ConstraintExpr::And(_, rhs) => {
                assert!(matches!(*rhs, ConstraintExpr::Or(_, _)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
