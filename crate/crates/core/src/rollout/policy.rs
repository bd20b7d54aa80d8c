use std::collections::BTreeMap;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use super::transcript::{last_value, text_of, Role, Turn};
use crate::ctl::Value;
use crate::env::{AgentAction, ParamType, ToolSpec};
use crate::envs::EnvKind;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("policy transport failed: {0}")]
    Transport(String),
    #[error("policy failed: {0}")]
    Other(String),
}

/// Chooses the next turn from the transcript alone. Implementations never
/// receive environment state, so they cannot read hidden tables.
pub trait Policy {
    fn name(&self) -> String;
    fn next_action(&mut self, transcript: &[Turn]) -> Result<String, PolicyError>;
    /// Extra metadata a challenger attaches to the bundle it produces.
    fn annotations(&self) -> BTreeMap<String, serde_json::Value> {
        BTreeMap::new()
    }
}

fn code(src: &str) -> String {
    AgentAction::Code(src.to_string()).render()
}

fn answer(text: &str) -> String {
    AgentAction::Answer(text.to_string()).render()
}

fn assistant_turns(transcript: &[Turn]) -> usize {
    transcript.iter().filter(|t| t.role == Role::Assistant).count()
}

/// Replays a known solution, then answers with its result.
pub struct OracleReplay {
    solution: String,
}

impl OracleReplay {
    pub fn new(solution: impl Into<String>) -> OracleReplay {
        OracleReplay { solution: solution.into() }
    }
}

impl Policy for OracleReplay {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn next_action(&mut self, transcript: &[Turn]) -> Result<String, PolicyError> {
        if assistant_turns(transcript) == 0 {
            return Ok(code(&self.solution));
        }
        Ok(answer(&last_value(transcript).map(Value::answer_text).unwrap_or_default()))
    }
}

/// Submits an empty answer immediately.
pub struct ImmediateAnswer;

impl Policy for ImmediateAnswer {
    fn name(&self) -> String {
        "immediate".into()
    }

    fn next_action(&mut self, _: &[Turn]) -> Result<String, PolicyError> {
        Ok(answer(""))
    }
}

static ID_TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"#W[0-9]{7}|\b[a-z]+_[a-z]+_[0-9]{4}\b|\b(?:credit_card|paypal|gift_card)_[0-9]{7}\b|\b[0-9]{10}\b|\b[A-Z][A-Z0-9]{5}\b|\bpg[0-9]{4}\b|\b[A-Z]{3}\b"#)
        .expect("valid regex")
});

/// Calls random executor tools with arguments drawn from strings seen in the
/// transcript. Never answers, so episodes end by exhaustion.
pub struct RandomTool {
    rng: ChaCha8Rng,
    tools: Vec<ToolSpec>,
}

impl RandomTool {
    pub fn new(seed: u64, tools: Vec<ToolSpec>) -> RandomTool {
        RandomTool { rng: ChaCha8Rng::seed_from_u64(seed), tools }
    }

    fn random_arg(&mut self, ty: ParamType, seen: &[String]) -> Value {
        let s = |rng: &mut ChaCha8Rng| -> Value {
            if seen.is_empty() {
                Value::str("unknown")
            } else {
                Value::str(seen[rng.random_range(0..seen.len())].clone())
            }
        };
        match ty {
            ParamType::String | ParamType::Any => s(&mut self.rng),
            ParamType::Integer => Value::Int(self.rng.random_range(0..5)),
            ParamType::Number => Value::Float(self.rng.random_range(0..500) as f64 / 2.0),
            ParamType::Boolean => Value::Bool(self.rng.random_bool(0.5)),
            ParamType::List => Value::List(vec![s(&mut self.rng)]),
            ParamType::Map => Value::Map(BTreeMap::new()),
        }
    }
}

impl Policy for RandomTool {
    fn name(&self) -> String {
        "random".into()
    }

    fn next_action(&mut self, transcript: &[Turn]) -> Result<String, PolicyError> {
        if self.tools.is_empty() {
            return Ok(code("result = null"));
        }
        let mut seen: Vec<String> = Vec::new();
        for t in transcript.iter().filter(|t| t.role != Role::System) {
            for m in ID_TOKEN.find_iter(&t.content) {
                if !seen.iter().any(|s| s == m.as_str()) {
                    seen.push(m.as_str().to_string());
                }
            }
        }
        let tool = self.tools[self.rng.random_range(0..self.tools.len())].clone();
        let mut args = Vec::new();
        for p in tool.params.iter().filter(|p| p.required) {
            args.push(format!("{}={}", p.name, self.random_arg(p.ty, &seen)));
        }
        Ok(code(&format!("{}({})", tool.name, args.join(", "))))
    }
}

static RE_ORDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#W[0-9]{7}").expect("valid regex"));
static RE_PM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(?:credit_card|paypal|gift_card)_[0-9]{7}\b").expect("valid regex"));
static RE_ITEM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[0-9]{10}\b").expect("valid regex"));
static RE_RES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[A-Z0-9][A-Z0-9]{5}\b").expect("valid regex"));
static RE_DNA: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[ACGT]{4,}\b").expect("valid regex"));
static RE_QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""([^"]+)""#).expect("valid regex"));
static RE_INT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([0-9]+)\b").expect("valid regex"));

fn all(re: &Regex, text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for m in re.find_iter(text) {
        if !out.iter().any(|o| o == m.as_str()) {
            out.push(m.as_str().to_string());
        }
    }
    out
}

fn str_list(items: &[String]) -> String {
    Value::List(items.iter().map(|s| Value::str(s.as_str())).collect()).to_string()
}

/// Keyword heuristics over the user's words: asks for every identifier once,
/// performs the single tool call the request most resembles, then answers.
/// Solves simple requests and fails multi-step ones.
pub struct ScriptedGreedy {
    kind: EnvKind,
}

impl ScriptedGreedy {
    pub fn new(kind: EnvKind) -> ScriptedGreedy {
        ScriptedGreedy { kind }
    }

    fn state_action(&self, request: &str, user_text: &str) -> Option<String> {
        let lower = request.to_lowercase();
        let q = |s: &str| Value::str(s).to_string();
        match self.kind {
            EnvKind::Retail => {
                let order = all(&RE_ORDER, user_text).into_iter().next()?;
                let pm = all(&RE_PM, user_text).into_iter().next();
                let items = all(&RE_ITEM, user_text);
                if lower.contains("cancel") {
                    let reason = if lower.contains("mistake") { "ordered by mistake" } else { "no longer needed" };
                    Some(format!("cancel_order(order_id={}, reason={})", q(&order), q(reason)))
                } else if lower.contains("return") {
                    Some(format!(
                        "return_delivered_order_items(order_id={}, item_ids={}, payment_method_id={})",
                        q(&order),
                        str_list(&items),
                        q(&pm?)
                    ))
                } else if lower.contains("exchange") || lower.contains("swap") || lower.contains("change") {
                    let half = items.len() / 2;
                    let tool = if lower.contains("exchange") {
                        "exchange_delivered_order_items"
                    } else {
                        "modify_pending_order_items"
                    };
                    Some(format!(
                        "{tool}(order_id={}, item_ids={}, new_item_ids={}, payment_method_id={})",
                        q(&order),
                        str_list(&items[..half]),
                        str_list(&items[half..]),
                        q(&pm?)
                    ))
                } else {
                    None
                }
            }
            EnvKind::Airline => {
                let rid = all(&RE_RES, user_text).into_iter().next()?;
                let pm = all(&RE_PM, user_text).into_iter().next();
                if lower.contains("cancel") {
                    Some(format!("cancel_reservation(reservation_id={})", q(&rid)))
                } else if lower.contains("bag") {
                    let nums: Vec<i64> = RE_INT.captures_iter(request).filter_map(|c| c[1].parse().ok()).collect();
                    let (total, nonfree) = (*nums.first()?, *nums.get(1).unwrap_or(&0));
                    Some(format!(
                        "update_reservation_baggages(reservation_id={}, total_baggages={total}, nonfree_baggages={nonfree}, payment_id={})",
                        q(&rid),
                        q(&pm?)
                    ))
                } else {
                    None
                }
            }
            EnvKind::Calc | EnvKind::Web => None,
        }
    }

    fn answer_program(&self, request: &str) -> Option<String> {
        let lower = request.to_lowercase();
        let q = |s: &str| Value::str(s).to_string();
        match self.kind {
            EnvKind::Calc => {
                if let Some(seq) = all(&RE_DNA, request).into_iter().next() {
                    let tool = if lower.contains("reverse complement") {
                        "reverse_complement"
                    } else if lower.contains("gc") {
                        "gc_content"
                    } else if lower.contains("rna") || lower.contains("transcribe") {
                        "transcribe_dna_to_rna"
                    } else {
                        return None;
                    };
                    return Some(format!("result = {tool}(sequence={})", q(&seq)));
                }
                let quoted = RE_QUOTED.captures_iter(request).next()?[1].to_string();
                if lower.contains("hex") {
                    Some(format!("result = hex_decode(hex_string={})", q(&quoted)))
                } else if lower.contains("reverse") {
                    Some(format!("result = reverse_string(message={})", q(&quoted)))
                } else {
                    None
                }
            }
            EnvKind::Web => {
                let field = ["price", "stock", "sku", "date", "ticket_price", "location", "email", "role", "office"]
                    .into_iter()
                    .rev()
                    .find(|f| lower.contains(&f.replace('_', " ")))?;
                Some(format!(
                    "wanted = {}\nresult = null\nfor section in [\"products\", \"events\", \"staff\"] {{\n    page = open_page(page_id=section)\n    for title in page.links {{\n        if title != \"Home\" and contains(wanted, title) {{\n            target = follow_link(page_id=section, link_text=title)\n            if contains(target.info, {}) {{\n                result = target.info[{}]\n            }}\n        }}\n    }}\n}}",
                    q(request),
                    q(field),
                    q(field)
                ))
            }
            EnvKind::Retail | EnvKind::Airline => None,
        }
    }
}

impl Policy for ScriptedGreedy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn next_action(&mut self, transcript: &[Turn]) -> Result<String, PolicyError> {
        let acted = assistant_turns(transcript);
        let request = transcript.iter().find(|t| t.role == Role::User).map(|t| t.content.clone()).unwrap_or_default();
        match self.kind {
            EnvKind::Retail | EnvKind::Airline => {
                if acted == 0 {
                    return Ok(
                        "Could you tell me your user id, order id, reservation id, item ids and payment method?"
                            .to_string(),
                    );
                }
                let user_text = text_of(transcript, Role::User);
                match (acted, self.state_action(&request, &user_text)) {
                    (1, Some(call)) => Ok(code(&call)),
                    (_, _) if acted >= 2 && last_value(transcript).is_some() => {
                        Ok("Your request has been processed. Is there anything else?".to_string())
                    }
                    _ => Ok(answer("")),
                }
            }
            EnvKind::Calc | EnvKind::Web => match (acted, self.answer_program(&request)) {
                (0, Some(program)) => Ok(code(&program)),
                _ => Ok(answer(&last_value(transcript).map(Value::answer_text).unwrap_or_default())),
            },
        }
    }
}
