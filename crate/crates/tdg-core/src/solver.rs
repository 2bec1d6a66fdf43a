//! The straight-line arithmetic solution language.
//!
//! Sandboxing is a grammar property: the language has assignments, `#`
//! comments, and arithmetic expressions only — no loops, branches, calls,
//! or I/O — so every accepted program terminates in time proportional to
//! its node count. Grammar in `docs/solution-language.md`.

use thiserror::Error;

use crate::value::NumericValue;

pub const DEFAULT_STEP_BUDGET: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionProgram {
    pub statements: Vec<Statement>,
    /// Comment lines, kept as trivia with their line numbers.
    pub comments: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub target: String,
    pub expr: ArithExpr,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArithExpr {
    Literal(NumericValue),
    Var(String),
    Neg(Box<ArithExpr>),
    Binary {
        op: ArithOp,
        lhs: Box<ArithExpr>,
        rhs: Box<ArithExpr>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecOutcome {
    pub env: std::collections::BTreeMap<String, NumericValue>,
    pub result_raw: NumericValue,
    /// Round-half-to-even of `result_raw`.
    pub result_rounded: i64,
    pub steps_used: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("undefined variable `{name}` at statement {statement}")]
    UndefinedVariable { name: String, statement: usize },
    #[error("division by zero at statement {statement}")]
    DivisionByZero { statement: usize },
    #[error("integer overflow at statement {statement}")]
    IntOverflow { statement: usize },
    #[error("non-finite result at statement {statement}")]
    NonFiniteResult { statement: usize },
    #[error("program never assigns `result`")]
    MissingResult,
    #[error("step budget exceeded at statement {statement}")]
    BudgetExceeded { statement: usize },
    #[error("result does not round to a 64-bit integer")]
    ResultOutOfRange,
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parse a program: one `ident = expr` per line, `#` comments, blank lines.
pub fn parse_program(source: &str) -> Result<SolutionProgram, SolverError> {
    let mut statements = Vec::new();
    let mut comments = Vec::new();
    for (idx, raw_line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            comments.push((lineno, comment.trim().to_string()));
            continue;
        }
        // split on the first `=`; the expression side may not contain one
        let eq = line.find('=').ok_or_else(|| SolverError::Syntax {
            line: lineno,
            col: 1,
            message: "expected assignment `ident = expr`".into(),
        })?;
        let target = line[..eq].trim();
        if !crate::template::is_valid_identifier(target) {
            return Err(SolverError::Syntax {
                line: lineno,
                col: 1,
                message: format!("invalid assignment target `{target}`"),
            });
        }
        let expr_src = &line[eq + 1..];
        // strip a trailing comment on the same line
        let expr_src = match expr_src.find('#') {
            Some(pos) => &expr_src[..pos],
            None => expr_src,
        };
        let expr = parse_expr_line(expr_src, lineno)?;
        statements.push(Statement {
            target: target.to_string(),
            expr,
            line: lineno,
        });
    }
    Ok(SolutionProgram {
        statements,
        comments,
    })
}

struct LineParser<'a> {
    toks: Vec<(LineTok, usize)>,
    pos: usize,
    line: usize,
    src: &'a str,
}

#[derive(Debug, Clone, PartialEq)]
enum LineTok {
    Num(NumericValue),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

fn parse_expr_line(src: &str, line: usize) -> Result<ArithExpr, SolverError> {
    let mut p = LineParser::new(src, line)?;
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(p.err("trailing tokens after expression"));
    }
    Ok(e)
}

impl<'a> LineParser<'a> {
    fn new(src: &'a str, line: usize) -> Result<Self, SolverError> {
        let bytes = src.as_bytes();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let start = i;
            match bytes[i] {
                b' ' | b'\t' => i += 1,
                b'+' => {
                    toks.push((LineTok::Plus, start));
                    i += 1;
                }
                b'-' => {
                    toks.push((LineTok::Minus, start));
                    i += 1;
                }
                b'*' => {
                    toks.push((LineTok::Star, start));
                    i += 1;
                }
                b'/' => {
                    toks.push((LineTok::Slash, start));
                    i += 1;
                }
                b'(' => {
                    toks.push((LineTok::LParen, start));
                    i += 1;
                }
                b')' => {
                    toks.push((LineTok::RParen, start));
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
                        NumericValue::Float(text.parse().map_err(|_| SolverError::Syntax {
                            line,
                            col: start + 1,
                            message: "bad float literal".into(),
                        })?)
                    } else {
                        NumericValue::Int(text.parse().map_err(|_| SolverError::Syntax {
                            line,
                            col: start + 1,
                            message: "integer literal out of range".into(),
                        })?)
                    };
                    toks.push((LineTok::Num(num), start));
                }
                c if c == b'_' || c.is_ascii_alphabetic() => {
                    while i < bytes.len()
                        && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric())
                    {
                        i += 1;
                    }
                    toks.push((LineTok::Ident(src[start..i].to_string()), start));
                }
                _ => {
                    return Err(SolverError::Syntax {
                        line,
                        col: start + 1,
                        message: format!(
                            "unexpected character `{}`",
                            src[start..].chars().next().unwrap()
                        ),
                    })
                }
            }
        }
        Ok(LineParser {
            toks,
            pos: 0,
            line,
            src,
        })
    }

    fn err(&self, message: &str) -> SolverError {
        let col = self
            .toks
            .get(self.pos)
            .map(|&(_, o)| o + 1)
            .unwrap_or(self.src.len() + 1);
        SolverError::Syntax {
            line: self.line,
            col,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<&LineTok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn bump(&mut self) -> Option<LineTok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<ArithExpr, SolverError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(LineTok::Plus) => ArithOp::Add,
                Some(LineTok::Minus) => ArithOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = ArithExpr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<ArithExpr, SolverError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(LineTok::Star) => ArithOp::Mul,
                Some(LineTok::Slash) => ArithOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = ArithExpr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ArithExpr, SolverError> {
        if matches!(self.peek(), Some(LineTok::Minus)) {
            self.bump();
            return Ok(ArithExpr::Neg(Box::new(self.unary()?)));
        }
        match self.bump() {
            Some(LineTok::Num(n)) => Ok(ArithExpr::Literal(n)),
            Some(LineTok::Ident(name)) => Ok(ArithExpr::Var(name)),
            Some(LineTok::LParen) => {
                let e = self.expr()?;
                match self.bump() {
                    Some(LineTok::RParen) => Ok(e),
                    _ => {
                        self.pos -= 1;
                        Err(self.err("expected `)`"))
                    }
                }
            }
            _ => {
                self.pos -= 1;
                Err(self.err("expected number, variable, or `(`"))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// True iff the program is in assignment-only straight-line form. Parser
/// output always is; this guards externally constructed ASTs in the reward
/// path.
pub fn check_straight_line(prog: &SolutionProgram) -> bool {
    prog.statements
        .iter()
        .all(|s| crate::template::is_valid_identifier(&s.target) && expr_is_finite_literals(&s.expr))
}

fn expr_is_finite_literals(e: &ArithExpr) -> bool {
    match e {
        ArithExpr::Literal(v) => v.is_finite(),
        ArithExpr::Var(_) => true,
        ArithExpr::Neg(inner) => expr_is_finite_literals(inner),
        ArithExpr::Binary { lhs, rhs, .. } => {
            expr_is_finite_literals(lhs) && expr_is_finite_literals(rhs)
        }
    }
}

/// Run the program. Statements execute in order; `result` must be assigned.
pub fn execute(prog: &SolutionProgram, step_budget: u64) -> Result<ExecOutcome, SolverError> {
    let mut env = std::collections::BTreeMap::new();
    let mut steps: u64 = 0;
    for (idx, stmt) in prog.statements.iter().enumerate() {
        let value = eval(&stmt.expr, &env, idx, &mut steps, step_budget)?;
        env.insert(stmt.target.clone(), value);
    }
    let result_raw = *env.get("result").ok_or(SolverError::MissingResult)?;
    let result_rounded = result_raw
        .round_ties_even_i64()
        .ok_or(SolverError::ResultOutOfRange)?;
    Ok(ExecOutcome {
        env,
        result_raw,
        result_rounded,
        steps_used: steps,
    })
}

fn eval(
    expr: &ArithExpr,
    env: &std::collections::BTreeMap<String, NumericValue>,
    statement: usize,
    steps: &mut u64,
    budget: u64,
) -> Result<NumericValue, SolverError> {
    *steps += 1;
    if *steps > budget {
        return Err(SolverError::BudgetExceeded { statement });
    }
    match expr {
        ArithExpr::Literal(v) => Ok(*v),
        ArithExpr::Var(name) => env
            .get(name)
            .copied()
            .ok_or_else(|| SolverError::UndefinedVariable {
                name: name.clone(),
                statement,
            }),
        ArithExpr::Neg(inner) => match eval(inner, env, statement, steps, budget)? {
            NumericValue::Int(i) => i
                .checked_neg()
                .map(NumericValue::Int)
                .ok_or(SolverError::IntOverflow { statement }),
            NumericValue::Float(f) => Ok(NumericValue::Float(-f)),
        },
        ArithExpr::Binary { op, lhs, rhs } => {
            let l = eval(lhs, env, statement, steps, budget)?;
            let r = eval(rhs, env, statement, steps, budget)?;
            apply(*op, l, r, statement)
        }
    }
}

fn apply(
    op: ArithOp,
    l: NumericValue,
    r: NumericValue,
    statement: usize,
) -> Result<NumericValue, SolverError> {
    use NumericValue::{Float, Int};
    let v = match (op, l, r) {
        (ArithOp::Add, Int(a), Int(b)) => {
            Int(a.checked_add(b).ok_or(SolverError::IntOverflow { statement })?)
        }
        (ArithOp::Sub, Int(a), Int(b)) => {
            Int(a.checked_sub(b).ok_or(SolverError::IntOverflow { statement })?)
        }
        (ArithOp::Mul, Int(a), Int(b)) => {
            Int(a.checked_mul(b).ok_or(SolverError::IntOverflow { statement })?)
        }
        (ArithOp::Div, Int(a), Int(b)) => {
            if b == 0 {
                return Err(SolverError::DivisionByZero { statement });
            }
            Float(a as f64 / b as f64)
        }
        (ArithOp::Add, a, b) => Float(a.as_f64() + b.as_f64()),
        (ArithOp::Sub, a, b) => Float(a.as_f64() - b.as_f64()),
        (ArithOp::Mul, a, b) => Float(a.as_f64() * b.as_f64()),
        (ArithOp::Div, a, b) => {
            if b.as_f64() == 0.0 {
                return Err(SolverError::DivisionByZero { statement });
            }
            Float(a.as_f64() / b.as_f64())
        }
    };
    if !v.is_finite() {
        return Err(SolverError::NonFiniteResult { statement });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const APPLE_PROGRAM: &str = "\
# Initial number of apples Emily has
initial_apples = 15

# Emily buys 3 times more apples
apples_bought = initial_apples * 3

# Total apples after buying more
total_apples = initial_apples + apples_bought

# Emily gives away 5 apples
apples_given_away = 5

# Apples Emily has now
apples_now = total_apples - apples_given_away

result = apples_now  # Emily has 55 apples now
";

    #[test]
    fn comment_and_assignment() {
        let prog = parse_program("# note\nresult = 1 + 2").unwrap();
        assert_eq!(prog.statements.len(), 1);
        assert_eq!(prog.comments.len(), 1);
    }

    #[test]
    fn apple_listing_parses_and_runs() {
        let prog = parse_program(APPLE_PROGRAM).unwrap();
        // the sixth assignment is `result = apples_now`; trailing comment is trivia
        assert_eq!(prog.statements.len(), 6);
        assert_eq!(prog.statements[0].target, "initial_apples");
        assert_eq!(prog.statements.last().unwrap().target, "result");
        let out = execute(&prog, DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(out.result_raw, NumericValue::Int(55));
        assert_eq!(out.result_rounded, 55);
    }

    #[test]
    fn branching_is_out_of_grammar() {
        assert!(matches!(
            parse_program("if x > 0:"),
            Err(SolverError::Syntax { .. })
        ));
    }

    #[test]
    fn simple_multiply() {
        let prog = parse_program("x = 2\nresult = x * 3").unwrap();
        let out = execute(&prog, DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(out.result_raw, NumericValue::Int(6));
    }

    #[test]
    fn division_by_zero_at_statement_zero() {
        let prog = parse_program("result = 1/0").unwrap();
        assert_eq!(
            execute(&prog, DEFAULT_STEP_BUDGET).unwrap_err(),
            SolverError::DivisionByZero { statement: 0 }
        );
    }

    #[test]
    fn undefined_variable_reported_with_statement() {
        let prog = parse_program("a = 1\nresult = a + b").unwrap();
        assert_eq!(
            execute(&prog, DEFAULT_STEP_BUDGET).unwrap_err(),
            SolverError::UndefinedVariable {
                name: "b".into(),
                statement: 1
            }
        );
    }

    #[test]
    fn empty_program_missing_result() {
        let prog = parse_program("").unwrap();
        assert!(check_straight_line(&prog));
        assert_eq!(
            execute(&prog, DEFAULT_STEP_BUDGET).unwrap_err(),
            SolverError::MissingResult
        );
    }

    #[test]
    fn int_overflow_detected() {
        let prog = parse_program(&format!("result = {} + 1", i64::MAX)).unwrap();
        assert_eq!(
            execute(&prog, DEFAULT_STEP_BUDGET).unwrap_err(),
            SolverError::IntOverflow { statement: 0 }
        );
    }

    #[test]
    fn budget_exceeded() {
        let prog = parse_program("result = 1 + 2 + 3 + 4").unwrap();
        assert!(matches!(
            execute(&prog, 2),
            Err(SolverError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn int_division_promotes() {
        let prog = parse_program("result = 7 / 2").unwrap();
        let out = execute(&prog, DEFAULT_STEP_BUDGET).unwrap();
        assert_eq!(out.result_raw, NumericValue::Float(3.5));
        assert_eq!(out.result_rounded, 4);
    }

    #[test]
    fn self_reference_surfaces_at_execute() {
        let prog = parse_program("x = x + 1\nresult = 1").unwrap();
        assert!(check_straight_line(&prog));
        assert!(matches!(
            execute(&prog, DEFAULT_STEP_BUDGET),
            Err(SolverError::UndefinedVariable { .. })
        ));
    }
}
