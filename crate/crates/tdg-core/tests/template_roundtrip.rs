//! Property: parse -> to_source -> parse is the identity on the template AST.

use proptest::prelude::*;
use serde_json::json;
use tdg_core::template::parse_template;

#[derive(Debug, Clone)]
enum Domain {
    IntRange(i64, i64),
    Choice(Vec<i64>),
    FloatChoice(Vec<f64>),
}

fn arb_domain() -> impl Strategy<Value = Domain> {
    prop_oneof![
        (1i64..50, 1i64..50).prop_map(|(lo, span)| Domain::IntRange(lo, lo + span)),
        proptest::collection::vec(-50i64..50, 1..4).prop_map(Domain::Choice),
        proptest::sample::subsequence(vec![0.25, 0.5, 0.75, 1.5, 2.0], 1..4)
            .prop_map(Domain::FloatChoice),
    ]
}

#[derive(Debug, Clone)]
struct Tpl {
    id: String,
    params: Vec<Domain>,
    slots: usize,
    constraint: Option<String>,
    texts: [String; 3],
}

/// A placeholder expression over `n_params` params and `n_slots` slots.
fn arb_placeholder(n_params: usize, n_slots: usize) -> impl Strategy<Value = String> {
    let param = (0..n_params).prop_map(|i| format!("p{i}"));
    let mut options = vec![
        param.clone().prop_map(|p| format!("{{{p}}}")).boxed(),
        (param.clone(), 1i64..20, proptest::sample::select(vec!['+', '-', '*', '/']))
            .prop_map(|(p, n, op)| format!("{{{p} {op} {n}}}"))
            .boxed(),
        (param.clone(), 0u8..4).prop_map(|(p, d)| format!("{{{p} / 4:.{d}f}}")).boxed(),
        param.prop_map(|p| format!("{{-{p}}}")).boxed(),
    ];
    if n_slots > 0 {
        let slot = (0..n_slots).prop_map(|i| format!("s{i}"));
        options.push(slot.clone().prop_map(|s| format!("{{{s}}}")).boxed());
        options.push(slot.prop_map(|s| format!("{{{s}.sanitize()}}")).boxed());
    }
    proptest::strategy::Union::new(options)
}

fn arb_text(n_params: usize, n_slots: usize) -> impl Strategy<Value = String> {
    let literal = prop_oneof![
        "[a-z ,.]{1,12}",
        Just("{{".to_string()),
        Just("}}".to_string()),
    ];
    let piece = prop_oneof![literal, arb_placeholder(n_params, n_slots)];
    proptest::collection::vec(piece, 1..8).prop_map(|v| v.concat())
}

fn arb_constraint(n_params: usize) -> impl Strategy<Value = Option<String>> {
    let cmp = (
        0..n_params,
        proptest::sample::select(vec!["<", "<=", "=", "!=", ">=", ">"]),
        -20i64..20,
    )
        .prop_map(|(i, op, n)| format!("p{i} {op} {n}"));
    prop_oneof![
        Just(None),
        cmp.clone().prop_map(Some),
        (cmp.clone(), cmp.clone(), proptest::sample::select(vec!["and", "or"]))
            .prop_map(|(a, b, j)| Some(format!("{a} {j} {b}"))),
        cmp.prop_map(|c| Some(format!("not ({c})"))),
    ]
}

fn arb_template() -> impl Strategy<Value = Tpl> {
    ("[a-z]{1,10}", proptest::collection::vec(arb_domain(), 1..4), 0usize..3).prop_flat_map(
        |(id, params, slots)| {
            let n = params.len();
            (
                Just(id),
                Just(params),
                Just(slots),
                arb_constraint(n),
                [arb_text(n, slots), arb_text(n, slots), arb_text(n, slots)],
            )
                .prop_map(|(id, params, slots, constraint, texts)| Tpl {
                    id: format!("tpl_{id}"),
                    params,
                    slots,
                    constraint,
                    texts,
                })
        },
    )
}

fn to_json(t: &Tpl) -> String {
    const CATEGORIES: [&str; 3] = ["first_name", "item", "place"];
    let params: Vec<_> = t
        .params
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let domain = match d {
                Domain::IntRange(lo, hi) => json!({ "int_range": [lo, hi] }),
                Domain::Choice(v) => json!({ "choice": v }),
                Domain::FloatChoice(v) => json!({ "float_choice": v }),
            };
            json!({ "name": format!("p{i}"), "domain": domain })
        })
        .collect();
    let slots: Vec<_> = (0..t.slots)
        .map(|i| json!({ "name": format!("s{i}"), "category": CATEGORIES[i % 3] }))
        .collect();
    let mut obj = json!({
        "id": t.id,
        "params": params,
        "lexicon_slots": slots,
        "problem_template": t.texts[0],
        "nl_solution_template": t.texts[1],
        "code_solution_template": t.texts[2],
    });
    if let Some(c) = &t.constraint {
        obj["constraint"] = json!(c);
    }
    serde_json::to_string_pretty(&obj).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn parse_to_source_parse_is_identity(t in arb_template()) {
        let source = to_json(&t);
        let first = parse_template(&source).expect("generated template must parse");
        let emitted = first.to_source();
        let second = parse_template(&emitted)
            .unwrap_or_else(|e| panic!("re-parse failed: {e}\n{emitted}"));
        prop_assert_eq!(first, second);
    }
}
