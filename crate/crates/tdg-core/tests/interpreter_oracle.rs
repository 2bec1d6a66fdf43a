//! Interpreter equivalence against an independently written brute-force
//! evaluator: generate random straight-line programs, render them to source,
//! and require identical outcomes (exact for Int, bit-exact for Float).

use proptest::prelude::*;
use tdg_core::solver::{self, DEFAULT_STEP_BUDGET};
use tdg_core::value::NumericValue;

// --- the test's own program representation, separate from the solver AST ---

#[derive(Debug, Clone)]
enum Expr {
    Lit(i64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone)]
struct Program {
    stmts: Vec<Expr>, // statement i assigns v{i}; the last assigns `result`
}

fn var_name(i: usize, last: bool, total: usize) -> String {
    if last && i == total - 1 {
        "result".to_string()
    } else {
        format!("v{i}")
    }
}

fn render_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Lit(n) => {
            // negative literals render as negation applied to the magnitude
            if *n < 0 {
                out.push_str("-(");
                out.push_str(&n.unsigned_abs().to_string());
                out.push(')');
            } else {
                out.push_str(&n.to_string());
            }
        }
        Expr::Var(i) => out.push_str(&format!("v{i}")),
        Expr::Neg(inner) => {
            out.push_str("-(");
            render_expr(inner, out);
            out.push(')');
        }
        Expr::Bin(op, l, r) => {
            out.push('(');
            render_expr(l, out);
            out.push(' ');
            out.push(*op);
            out.push(' ');
            render_expr(r, out);
            out.push(')');
        }
    }
}

fn render_program(p: &Program) -> String {
    let mut src = String::new();
    let total = p.stmts.len();
    for (i, e) in p.stmts.iter().enumerate() {
        src.push_str(&var_name(i, true, total));
        src.push_str(" = ");
        render_expr(e, &mut src);
        src.push('\n');
    }
    src
}

// --- brute-force evaluation with its own arithmetic ---

#[derive(Debug, Clone, Copy, PartialEq)]
enum V {
    I(i64),
    F(f64),
}

fn oracle_eval(e: &Expr, env: &[V]) -> Result<V, ()> {
    let finite = |f: f64| if f.is_finite() { Ok(V::F(f)) } else { Err(()) };
    match e {
        Expr::Lit(n) => Ok(V::I(*n)),
        Expr::Var(i) => env.get(*i).copied().ok_or(()),
        Expr::Neg(inner) => match oracle_eval(inner, env)? {
            V::I(i) => i.checked_neg().map(V::I).ok_or(()),
            V::F(f) => Ok(V::F(-f)),
        },
        Expr::Bin(op, l, r) => {
            let l = oracle_eval(l, env)?;
            let r = oracle_eval(r, env)?;
            match (op, l, r) {
                ('+', V::I(a), V::I(b)) => a.checked_add(b).map(V::I).ok_or(()),
                ('-', V::I(a), V::I(b)) => a.checked_sub(b).map(V::I).ok_or(()),
                ('*', V::I(a), V::I(b)) => a.checked_mul(b).map(V::I).ok_or(()),
                ('/', V::I(a), V::I(b)) => {
                    if b == 0 {
                        Err(())
                    } else {
                        finite(a as f64 / b as f64)
                    }
                }
                (op, a, b) => {
                    let (a, b) = (as_f64(a), as_f64(b));
                    match op {
                        '+' => finite(a + b),
                        '-' => finite(a - b),
                        '*' => finite(a * b),
                        '/' => {
                            if b == 0.0 {
                                Err(())
                            } else {
                                finite(a / b)
                            }
                        }
                        _ => unreachable!(),
                    }
                }
            }
        }
    }
}

fn as_f64(v: V) -> f64 {
    match v {
        V::I(i) => i as f64,
        V::F(f) => f,
    }
}

fn oracle_run(p: &Program) -> Result<V, ()> {
    let mut env = Vec::new();
    for e in &p.stmts {
        let v = oracle_eval(e, &env)?;
        env.push(v);
    }
    let result = *env.last().ok_or(())?;
    // mirror the rounding contract: result must round to an i64
    if let V::F(f) = result {
        let r = f.round_ties_even();
        if !(r >= -(2f64.powi(63)) && r < 2f64.powi(63)) {
            return Err(());
        }
    }
    Ok(result)
}

// --- proptest strategies ---

fn arb_expr(defined: usize) -> impl Strategy<Value = Expr> {
    let leaf = if defined == 0 {
        prop_oneof![(-1000i64..1000).prop_map(Expr::Lit)].boxed()
    } else {
        prop_oneof![
            (-1000i64..1000).prop_map(Expr::Lit),
            (0..defined).prop_map(Expr::Var),
        ]
        .boxed()
    };
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (proptest::sample::select(vec!['+', '-', '*', '/']), inner.clone(), inner)
                .prop_map(|(op, l, r)| Expr::Bin(op, Box::new(l), Box::new(r))),
        ]
    })
}

fn arb_program() -> impl Strategy<Value = Program> {
    (1usize..8).prop_flat_map(|n| {
        let stmts: Vec<_> = (0..n).map(arb_expr).collect();
        stmts.prop_map(|stmts| Program { stmts })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn interpreter_matches_brute_force(p in arb_program()) {
        let src = render_program(&p);
        let parsed = solver::parse_program(&src).expect("generated source must parse");
        prop_assert!(solver::check_straight_line(&parsed));
        let interp = solver::execute(&parsed, DEFAULT_STEP_BUDGET);
        match (oracle_run(&p), interp) {
            (Ok(expected), Ok(outcome)) => match (expected, outcome.result_raw) {
                (V::I(a), NumericValue::Int(b)) => prop_assert_eq!(a, b),
                (V::F(a), NumericValue::Float(b)) => {
                    prop_assert_eq!(a.to_bits(), b.to_bits(), "{} vs {}", a, b)
                }
                (e, g) => prop_assert!(false, "type mismatch: oracle {:?}, interpreter {:?}", e, g),
            },
            (Err(()), Err(_)) => {}
            (Err(()), Ok(o)) => {
                prop_assert!(false, "oracle errored, interpreter produced {:?}\n{}", o.result_raw, src)
            }
            (Ok(e), Err(err)) => {
                prop_assert!(false, "interpreter errored ({}), oracle produced {:?}\n{}", err, e, src)
            }
        }
    }
}
