#[path = "support/golden.rs"]
mod golden;

use golden::{check, parse_cases, Expect};

#[test]
fn golden_suite_passes_exactly() {
    let cases = parse_cases();
    assert!(cases.len() >= 60, "only {} golden cases", cases.len());
    let failures: Vec<String> =
        cases.iter().filter_map(|c| check(c).err().map(|e| format!("{}: {e}", c.name))).collect();
    assert!(failures.is_empty(), "{} golden failures:\n{}", failures.len(), failures.join("\n"));
}

#[test]
fn golden_suite_covers_every_error_class() {
    let cases = parse_cases();
    let classes: Vec<&str> = cases
        .iter()
        .filter_map(|c| match &c.expect {
            Expect::Error(class, _) => Some(class.as_str()),
            _ => None,
        })
        .collect();
    for want in [
        "UnknownTool",
        "TypeMismatch",
        "KeyMissing",
        "IndexOutOfRange",
        "DivByZero",
        "LimitExceeded",
        "Overflow",
        "UndefinedVariable",
        "ToolError",
    ] {
        assert!(classes.contains(&want), "no golden case for {want}");
    }
    assert!(cases.iter().any(|c| matches!(c.expect, Expect::Syntax)));
}

#[test]
fn golden_names_are_unique() {
    let cases = parse_cases();
    let mut names: Vec<&str> = cases.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    let before = names.len();
    names.dedup();
    assert_eq!(before, names.len());
}
