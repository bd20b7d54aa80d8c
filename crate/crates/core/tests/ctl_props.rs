use std::collections::BTreeMap;

use catforge::ctl::{
    evaluate, parse, pretty_print, values_equal, EvalLimits, Limit, NoTools, RuntimeErrorKind, ToolFault, ToolHost,
    Value,
};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::Int),
        any::<f64>().prop_filter("finite", |x| x.is_finite()).prop_map(Value::Float),
        "[ -~\\n\\t\"\\\\é]{0,12}".prop_map(Value::Str),
    ]
}

fn value() -> impl Strategy<Value = Value> {
    leaf().prop_recursive(4, 48, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..6).prop_map(Value::List),
            prop::collection::btree_map("[a-z_]{1,6}", inner, 0..6).prop_map(Value::Map),
        ]
    })
}

fn run(src: &str) -> Value {
    evaluate(&parse(src).unwrap(), &mut NoTools, EvalLimits::default()).unwrap().result
}

struct Counter(usize);

impl ToolHost for Counter {
    fn call_tool(&mut self, _: &str, _: &BTreeMap<String, Value>) -> Result<Value, ToolFault> {
        self.0 += 1;
        Ok(Value::Int(self.0 as i64))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Rendered values are literals that evaluate back to themselves.
    #[test]
    fn display_round_trips(v in value()) {
        let back = run(&format!("return {v}"));
        prop_assert_eq!(back, v);
    }

    #[test]
    fn equality_is_reflexive_and_symmetric(a in value(), b in value()) {
        prop_assert!(values_equal(&a, &a));
        prop_assert_eq!(values_equal(&a, &b), values_equal(&b, &a));
    }

    #[test]
    fn int_arithmetic_matches_checked_ops(a in any::<i64>(), b in any::<i64>()) {
        let got = evaluate(&parse(&format!("return ({a}) + ({b})")).unwrap(), &mut NoTools, EvalLimits::default());
        match a.checked_add(b) {
            Some(sum) => prop_assert_eq!(got.unwrap().result, Value::Int(sum)),
            None => prop_assert_eq!(got.unwrap_err().kind, RuntimeErrorKind::Overflow),
        }
    }

    /// Nested loops either finish inside the step budget or stop with a step
    /// breach; no statement runs past the budget.
    #[test]
    fn step_budget_is_never_exceeded(outer in 0usize..15, inner in 0usize..15, budget in 1u64..200) {
        let list = |n: usize| format!("[{}]", (0..n).map(|i| i.to_string()).collect::<Vec<_>>().join(", "));
        let src = format!(
            "n = 0\nfor i in {} {{\n    for j in {} {{\n        n = n + 1\n    }}\n}}\nreturn n",
            list(outer),
            list(inner)
        );
        let limits = EvalLimits { max_steps: budget, ..EvalLimits::default() };
        match evaluate(&parse(&src).unwrap(), &mut NoTools, limits) {
            Ok(out) => {
                prop_assert!(out.steps_used <= budget);
                prop_assert_eq!(out.result, Value::Int((outer * inner) as i64));
            }
            Err(e) => prop_assert_eq!(e.kind, RuntimeErrorKind::LimitExceeded(Limit::Steps)),
        }
    }

    /// Tool calls stop at the budget, and the host sees no call past it.
    #[test]
    fn tool_budget_is_never_exceeded(n in 0usize..20, budget in 1usize..10) {
        let src = format!("for i in [{}] {{\n    ping()\n}}", vec!["0"; n].join(", "));
        let limits = EvalLimits { max_tool_calls: budget, ..EvalLimits::default() };
        let mut host = Counter(0);
        let out = evaluate(&parse(&src).unwrap(), &mut host, limits);
        prop_assert!(host.0 <= budget);
        if n > budget {
            prop_assert_eq!(out.unwrap_err().kind, RuntimeErrorKind::LimitExceeded(Limit::ToolCalls));
        } else {
            prop_assert_eq!(out.unwrap().tool_trace.len(), n);
        }
    }

    /// The parser never panics on arbitrary input.
    #[test]
    fn parse_is_total(src in "[ -~\\n]{0,80}") {
        let _ = parse(&src);
    }
}

#[test]
fn pretty_print_is_a_fixed_point_on_golden_programs() {
    let golden = include_str!("data/ctl_golden.txt");
    let mut checked = 0;
    for block in golden.split("\n=== ").skip(1) {
        let source: Vec<&str> = block
            .lines()
            .skip(1)
            .take_while(|l| !l.starts_with("--- expect"))
            .filter(|l| !l.starts_with("--- "))
            .collect();
        let Ok(program) = parse(&source.join("\n")) else { continue };
        let once = pretty_print(&program);
        let twice = pretty_print(&parse(&once).unwrap());
        assert_eq!(once, twice);
        checked += 1;
    }
    assert!(checked >= 50);
}
