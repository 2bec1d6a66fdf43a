//! Placeholder evaluation and rendering of the three instance texts.

use thiserror::Error;

use crate::lexicon::sanitize_identifier;
use crate::sampler::{apply_binop, Binding};
use crate::template::{FormatSpec, MetaTemplate, PlaceholderExpr, Segment, TemplateText};
use crate::value::NumericValue;

/// One fully rendered (problem, NL solution, code solution) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedInstance {
    pub template_id: String,
    pub problem: String,
    pub nl_solution: String,
    pub code_source: String,
    pub binding: Binding,
}

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("unbound name `{0}`")]
    UnboundName(String),
    #[error("split('{delimiter}')[{index}] out of range: only {pieces} pieces")]
    SplitIndexOutOfRange {
        delimiter: String,
        index: usize,
        pieces: usize,
    },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("arithmetic failed (division by zero or overflow)")]
    ArithmeticFailure,
    #[error("sanitize produced an empty identifier from `{0}`")]
    EmptySanitize(String),
    #[error("in template `{template_id}` target {target}, segment {segment}: {source}")]
    InTarget {
        template_id: String,
        target: &'static str,
        segment: usize,
        source: Box<RenderError>,
    },
}

/// A placeholder evaluates to either a number or a piece of text.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalValue {
    Num(NumericValue),
    Text(String),
}

fn eval_expr(expr: &PlaceholderExpr, binding: &Binding) -> Result<EvalValue, RenderError> {
    match expr {
        PlaceholderExpr::Number(n) => Ok(EvalValue::Num(*n)),
        PlaceholderExpr::Ref(name) => {
            if let Some(v) = binding.params.get(name) {
                Ok(EvalValue::Num(*v))
            } else if let Some(t) = binding.slots.get(name) {
                Ok(EvalValue::Text(t.clone()))
            } else {
                Err(RenderError::UnboundName(name.clone()))
            }
        }
        PlaceholderExpr::Neg(e) => match eval_expr(e, binding)? {
            EvalValue::Num(NumericValue::Int(i)) => i
                .checked_neg()
                .map(|v| EvalValue::Num(NumericValue::Int(v)))
                .ok_or(RenderError::ArithmeticFailure),
            EvalValue::Num(NumericValue::Float(f)) => {
                Ok(EvalValue::Num(NumericValue::Float(-f)))
            }
            EvalValue::Text(_) => {
                Err(RenderError::TypeMismatch("unary minus on text".into()))
            }
        },
        PlaceholderExpr::Binary { op, lhs, rhs } => {
            let l = expect_num(eval_expr(lhs, binding)?)?;
            let r = expect_num(eval_expr(rhs, binding)?)?;
            apply_binop(*op, l, r)
                .map(EvalValue::Num)
                .ok_or(RenderError::ArithmeticFailure)
        }
        PlaceholderExpr::Split { recv, delim, index } => {
            let text = expect_text(eval_expr(recv, binding)?)?;
            let pieces: Vec<&str> = text.split(delim.as_str()).collect();
            pieces
                .get(*index)
                .map(|s| EvalValue::Text(s.to_string()))
                .ok_or_else(|| RenderError::SplitIndexOutOfRange {
                    delimiter: delim.clone(),
                    index: *index,
                    pieces: pieces.len(),
                })
        }
        PlaceholderExpr::Sanitize { recv } => {
            let text = expect_text(eval_expr(recv, binding)?)?;
            sanitize_identifier(&text)
                .map(EvalValue::Text)
                .map_err(|_| RenderError::EmptySanitize(text))
        }
    }
}

fn expect_num(v: EvalValue) -> Result<NumericValue, RenderError> {
    match v {
        EvalValue::Num(n) => Ok(n),
        EvalValue::Text(t) => Err(RenderError::TypeMismatch(format!(
            "expected number, found text `{t}`"
        ))),
    }
}

fn expect_text(v: EvalValue) -> Result<String, RenderError> {
    match v {
        EvalValue::Text(t) => Ok(t),
        EvalValue::Num(n) => Err(RenderError::TypeMismatch(format!(
            "expected text, found number {n}"
        ))),
    }
}

/// Evaluate one placeholder to its rendered text.
pub fn eval_placeholder(
    expr: &PlaceholderExpr,
    fmt: FormatSpec,
    binding: &Binding,
) -> Result<String, RenderError> {
    match (eval_expr(expr, binding)?, fmt) {
        (EvalValue::Text(t), FormatSpec::Default) => Ok(t),
        (EvalValue::Text(_), FormatSpec::FixedDecimals(_)) => Err(RenderError::TypeMismatch(
            "fixed-decimal format on text value".into(),
        )),
        (EvalValue::Num(n), FormatSpec::Default) => Ok(n.render_default()),
        (EvalValue::Num(n), FormatSpec::FixedDecimals(d)) => Ok(n.render_fixed(d)),
    }
}

/// Render one target text segment by segment. Literal `{{`/`}}` escapes
/// become single braces in the output.
pub fn render_text(text: &TemplateText, binding: &Binding) -> Result<String, RenderError> {
    let mut out = String::new();
    for seg in &text.segments {
        match seg {
            Segment::Literal { raw } => {
                out.push_str(&raw.replace("{{", "{").replace("}}", "}"));
            }
            Segment::Placeholder { expr, format, .. } => {
                out.push_str(&eval_placeholder(expr, *format, binding)?);
            }
        }
    }
    Ok(out)
}

/// Render all three targets of a template under a complete binding.
pub fn render_instance(
    tpl: &MetaTemplate,
    binding: &Binding,
) -> Result<RenderedInstance, RenderError> {
    let render = |target: &'static str, text: &TemplateText| -> Result<String, RenderError> {
        let mut out = String::new();
        for (i, seg) in text.segments.iter().enumerate() {
            match seg {
                Segment::Literal { raw } => {
                    out.push_str(&raw.replace("{{", "{").replace("}}", "}"));
                }
                Segment::Placeholder { expr, format, .. } => {
                    let piece =
                        eval_placeholder(expr, *format, binding).map_err(|e| {
                            RenderError::InTarget {
                                template_id: tpl.id.clone(),
                                target,
                                segment: i,
                                source: Box::new(e),
                            }
                        })?;
                    out.push_str(&piece);
                }
            }
        }
        Ok(out)
    };
    Ok(RenderedInstance {
        template_id: tpl.id.clone(),
        problem: render("problem", &tpl.problem_template)?,
        nl_solution: render("nl_solution", &tpl.nl_solution_template)?,
        code_source: render("code_solution", &tpl.code_solution_template)?,
        binding: binding.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::{parse_placeholder, parse_template};
    use std::collections::BTreeMap;

    fn binding(
        params: &[(&str, NumericValue)],
        slots: &[(&str, &str)],
    ) -> Binding {
        Binding {
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect::<BTreeMap<_, _>>(),
            slots: slots
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect::<BTreeMap<_, _>>(),
            instance_seed: 0,
        }
    }

    #[test]
    fn ratio_times_hundred_fixed_zero() {
        let (expr, fmt) = parse_placeholder("subsequent_ratio*100:.0f").unwrap();
        let b = binding(&[("subsequent_ratio", NumericValue::Float(0.5))], &[]);
        assert_eq!(eval_placeholder(&expr, fmt, &b).unwrap(), "50");
    }

    #[test]
    fn split_takes_first_month() {
        let (expr, fmt) = parse_placeholder("month.split(' and ')[0]").unwrap();
        let b = binding(&[], &[("month", "January and February")]);
        assert_eq!(eval_placeholder(&expr, fmt, &b).unwrap(), "January");
    }

    #[test]
    fn int_identity_rendering() {
        let (expr, fmt) = parse_placeholder("n").unwrap();
        let b = binding(&[("n", NumericValue::Int(7))], &[]);
        assert_eq!(eval_placeholder(&expr, fmt, &b).unwrap(), "7");
    }

    #[test]
    fn split_index_out_of_range() {
        let (expr, fmt) = parse_placeholder("month.split(' and ')[2]").unwrap();
        let b = binding(&[], &[("month", "January and February")]);
        assert_eq!(
            eval_placeholder(&expr, fmt, &b).unwrap_err(),
            RenderError::SplitIndexOutOfRange {
                delimiter: " and ".into(),
                index: 2,
                pieces: 2
            }
        );
    }

    #[test]
    fn unbound_name_error() {
        let (expr, fmt) = parse_placeholder("ghost").unwrap();
        let b = binding(&[], &[]);
        assert_eq!(
            eval_placeholder(&expr, fmt, &b).unwrap_err(),
            RenderError::UnboundName("ghost".into())
        );
    }

    #[test]
    fn all_literal_template_renders_literally() {
        let tpl = parse_template(
            r#"{
            "id": "static",
            "problem_template": "What is one plus one?",
            "nl_solution_template": "Two.",
            "code_solution_template": "result = 1 + 1"
        }"#,
        )
        .unwrap();
        let b = binding(&[], &[]);
        let inst = render_instance(&tpl, &b).unwrap();
        assert_eq!(inst.problem, "What is one plus one?");
        assert_eq!(inst.code_source, "result = 1 + 1");
    }

    #[test]
    fn render_error_is_position_tagged() {
        let tpl = parse_template(
            r#"{
            "id": "t",
            "params": [{"name": "n", "domain": {"int_range": [1, 2]}}],
            "problem_template": "a {n} b {1/0} c",
            "nl_solution_template": "x",
            "code_solution_template": "result = {n}"
        }"#,
        )
        .unwrap();
        let b = binding(&[("n", NumericValue::Int(1))], &[]);
        match render_instance(&tpl, &b).unwrap_err() {
            RenderError::InTarget {
                template_id,
                target,
                segment,
                ..
            } => {
                assert_eq!(template_id, "t");
                assert_eq!(target, "problem");
                assert_eq!(segment, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn escaped_braces_render_single() {
        let text = crate::template::parse_template_text("set {{x}} to {n}").unwrap();
        let b = binding(&[("n", NumericValue::Int(4))], &[]);
        assert_eq!(render_text(&text, &b).unwrap(), "set {x} to 4");
    }
}
