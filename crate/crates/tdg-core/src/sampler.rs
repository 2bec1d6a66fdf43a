//! Constraint-satisfying parameter/term bindings from deterministic seeds,
//! via bounded rejection sampling.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lexicon::{Lexicon, LexiconError};
use crate::rng::{substream_seed, SplitMix64};
use crate::template::{BinOp, CmpOp, ConstraintExpr, MetaTemplate, ParamDomain, PlaceholderExpr};
use crate::value::NumericValue;

pub const DEFAULT_MAX_ATTEMPTS: u32 = 100;

/// One concrete assignment of parameter values and lexicon terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub params: BTreeMap<String, NumericValue>,
    pub slots: BTreeMap<String, String>,
    pub instance_seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("template `{template_id}` unsatisfiable after {attempts} attempts")]
    Unsatisfiable { template_id: String, attempts: u32 },
    #[error("max_attempts must be at least 1")]
    ZeroAttempts,
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

/// Draw a binding for `tpl` from `instance_seed`. Parameters are drawn in
/// declaration order and re-drawn from the next RNG substream while the
/// constraint fails; slot terms are drawn once the constraint holds.
pub fn sample_binding(
    tpl: &MetaTemplate,
    lex: &Lexicon,
    instance_seed: u64,
    max_attempts: u32,
) -> Result<Binding, SampleError> {
    sample_binding_counted(tpl, lex, instance_seed, max_attempts).map(|(b, _)| b)
}

/// Like [`sample_binding`], also reporting how many draw attempts were used.
pub fn sample_binding_counted(
    tpl: &MetaTemplate,
    lex: &Lexicon,
    instance_seed: u64,
    max_attempts: u32,
) -> Result<(Binding, u32), SampleError> {
    if max_attempts == 0 {
        return Err(SampleError::ZeroAttempts);
    }
    for attempt in 0..max_attempts {
        let mut rng = SplitMix64::new(substream_seed(instance_seed, u64::from(attempt)));
        let mut params = BTreeMap::new();
        for spec in &tpl.params {
            params.insert(spec.name.clone(), draw_param(&spec.domain, &mut rng));
        }
        if let Some(constraint) = &tpl.constraint {
            if !eval_constraint(constraint, &params) {
                continue;
            }
        }
        let mut slots = BTreeMap::new();
        for slot in &tpl.lexicon_slots {
            let term = lex.draw_term(&slot.category, &mut rng)?;
            slots.insert(slot.name.clone(), term.to_string());
        }
        return Ok((
            Binding {
                params,
                slots,
                instance_seed,
            },
            attempt + 1,
        ));
    }
    Err(SampleError::Unsatisfiable {
        template_id: tpl.id.clone(),
        attempts: max_attempts,
    })
}

fn draw_param(domain: &ParamDomain, rng: &mut SplitMix64) -> NumericValue {
    match domain {
        ParamDomain::IntRange { lo, hi } => NumericValue::Int(rng.int_range(*lo, *hi)),
        ParamDomain::Choice(vs) => NumericValue::Int(vs[rng.below(vs.len() as u64) as usize]),
        ParamDomain::FloatChoice(vs) => {
            NumericValue::Float(vs[rng.below(vs.len() as u64) as usize])
        }
    }
}

/// Evaluate a constraint under a complete parameter assignment.
/// Division by zero anywhere makes the whole constraint false, so the draw
/// is rejected rather than the run aborted.
pub fn eval_constraint(expr: &ConstraintExpr, params: &BTreeMap<String, NumericValue>) -> bool {
    match try_eval_constraint(expr, params) {
        Some(b) => b,
        None => false,
    }
}

fn try_eval_constraint(
    expr: &ConstraintExpr,
    params: &BTreeMap<String, NumericValue>,
) -> Option<bool> {
    match expr {
        ConstraintExpr::Compare { op, lhs, rhs } => {
            let l = eval_arith(lhs, params)?;
            let r = eval_arith(rhs, params)?;
            Some(compare(*op, l, r))
        }
        ConstraintExpr::And(a, b) => {
            Some(try_eval_constraint(a, params)? && try_eval_constraint(b, params)?)
        }
        ConstraintExpr::Or(a, b) => {
            Some(try_eval_constraint(a, params)? || try_eval_constraint(b, params)?)
        }
        ConstraintExpr::Not(a) => Some(!try_eval_constraint(a, params)?),
    }
}

fn compare(op: CmpOp, l: NumericValue, r: NumericValue) -> bool {
    match (l, r) {
        (NumericValue::Int(a), NumericValue::Int(b)) => match op {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        },
        _ => {
            let (a, b) = (l.as_f64(), r.as_f64());
            match op {
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                CmpOp::Ge => a >= b,
                CmpOp::Gt => a > b,
            }
        }
    }
}

/// Arithmetic over params with the solution-language promotion rule:
/// Int op Int stays Int except division, which promotes to Float.
/// `None` signals division by zero or a non-finite intermediate.
pub(crate) fn eval_arith(
    expr: &PlaceholderExpr,
    params: &BTreeMap<String, NumericValue>,
) -> Option<NumericValue> {
    match expr {
        PlaceholderExpr::Number(n) => Some(*n),
        PlaceholderExpr::Ref(name) => params.get(name).copied(),
        PlaceholderExpr::Neg(e) => match eval_arith(e, params)? {
            NumericValue::Int(i) => Some(NumericValue::Int(i.checked_neg()?)),
            NumericValue::Float(f) => Some(NumericValue::Float(-f)),
        },
        PlaceholderExpr::Binary { op, lhs, rhs } => {
            let l = eval_arith(lhs, params)?;
            let r = eval_arith(rhs, params)?;
            apply_binop(*op, l, r)
        }
        // text operations have no meaning in numeric context
        PlaceholderExpr::Split { .. } | PlaceholderExpr::Sanitize { .. } => None,
    }
}

pub(crate) fn apply_binop(op: BinOp, l: NumericValue, r: NumericValue) -> Option<NumericValue> {
    use NumericValue::{Float, Int};
    let v = match (op, l, r) {
        (BinOp::Add, Int(a), Int(b)) => Int(a.checked_add(b)?),
        (BinOp::Sub, Int(a), Int(b)) => Int(a.checked_sub(b)?),
        (BinOp::Mul, Int(a), Int(b)) => Int(a.checked_mul(b)?),
        (BinOp::Div, Int(a), Int(b)) => {
            if b == 0 {
                return None;
            }
            Float(a as f64 / b as f64)
        }
        (BinOp::Add, a, b) => Float(a.as_f64() + b.as_f64()),
        (BinOp::Sub, a, b) => Float(a.as_f64() - b.as_f64()),
        (BinOp::Mul, a, b) => Float(a.as_f64() * b.as_f64()),
        (BinOp::Div, a, b) => {
            if b.as_f64() == 0.0 {
                return None;
            }
            Float(a.as_f64() / b.as_f64())
        }
    };
    if !v.is_finite() {
        return None;
    }
    Some(v)
}

impl Binding {
    /// Check that every value lies in its declared domain and the constraint
    /// holds. Used by tests as an independent soundness oracle.
    pub fn satisfies(&self, tpl: &MetaTemplate) -> bool {
        if self.params.len() != tpl.params.len() || self.slots.len() != tpl.lexicon_slots.len() {
            return false;
        }
        for spec in &tpl.params {
            let Some(v) = self.params.get(&spec.name) else {
                return false;
            };
            let ok = match (&spec.domain, v) {
                (ParamDomain::IntRange { lo, hi }, NumericValue::Int(i)) => {
                    (lo..=hi).contains(&i)
                }
                (ParamDomain::Choice(vs), NumericValue::Int(i)) => vs.contains(i),
                (ParamDomain::FloatChoice(vs), NumericValue::Float(f)) => vs.contains(f),
                _ => false,
            };
            if !ok {
                return false;
            }
        }
        for slot in &tpl.lexicon_slots {
            if !self.slots.contains_key(&slot.name) {
                return false;
            }
        }
        match &tpl.constraint {
            Some(c) => eval_constraint(c, &self.params),
            None => true,
        }
    }
}
