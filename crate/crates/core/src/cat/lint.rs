use std::sync::LazyLock;

use regex::Regex;

use super::bundle::CatBundle;
use crate::ctl::{self, CallArgs, Expr, Value};

static ID_LIKE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:[#A-Za-z0-9_./-]*[0-9][#A-Za-z0-9_./-]*|[A-Z][A-Z0-9]{5})$").expect("valid regex")
});

/// True for literals that look like record identifiers.
pub fn is_id_like(s: &str) -> bool {
    s.len() >= 5 && ID_LIKE.is_match(s) && s.parse::<f64>().is_err()
}

/// Identifier literals used by the verifier but absent from the instruction.
/// Expected answers passed to `check_answer` are exempt. This is a heuristic:
/// an empty result does not prove the instruction is complete.
pub fn missing_ids(bundle: &CatBundle) -> Result<Vec<String>, ctl::SyntaxError> {
    let verify = ctl::parse(&bundle.verify)?;
    let mut exempt: Vec<&Expr> = Vec::new();
    let mut literals: Vec<(&Expr, &str)> = Vec::new();
    for stmt in &verify.body {
        stmt.visit_exprs(&mut |e| match e {
            Expr::Call { name, args: CallArgs::Keyword(args) } if name == "check_answer" => {
                exempt.extend(args.iter().filter(|(k, _)| k == "expected").map(|(_, v)| v));
            }
            Expr::Literal(Value::Str(s)) => literals.push((e, s.as_str())),
            _ => {}
        });
    }
    let mut out: Vec<String> = Vec::new();
    for (expr, s) in literals {
        if exempt.iter().any(|x| std::ptr::eq(*x, expr)) {
            continue;
        }
        if is_id_like(s) && !bundle.instruction.contains(s) && !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_shapes() {
        assert!(is_id_like("#W7678072"));
        assert!(is_id_like("credit_card_7815826"));
        assert!(is_id_like("M05KNL"));
        assert!(is_id_like("ABCDEF"));
        assert!(!is_id_like("status"));
        assert!(!is_id_like("112.71"));
        assert!(!is_id_like("return requested"));
    }
}
