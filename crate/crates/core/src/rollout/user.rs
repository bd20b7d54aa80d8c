//! Deterministic stand-in for the simulated customer in retail and airline.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::env::UserResponder;

pub const STOP_TOKEN: &str = "###STOP###";
pub const REFUSAL: &str = "I don't have that.";

struct FactPattern {
    field: &'static str,
    label: &'static str,
    regex: Regex,
    /// All matches joined, for fields that can repeat.
    many: bool,
}

static FACT_PATTERNS: LazyLock<Vec<FactPattern>> = LazyLock::new(|| {
    let p =
        |field, label, re: &str, many| FactPattern { field, label, regex: Regex::new(re).expect("valid regex"), many };
    vec![
        p("email", "email", r"[A-Za-z0-9._+-]+@[A-Za-z0-9-]+\.[A-Za-z.]+[A-Za-z]", false),
        p("user_id", "user id", r"\b[a-z]+_[a-z]+_[0-9]{4}\b", false),
        p("order_id", "order id", r"#W[0-9]{7}", false),
        p("reservation_id", "reservation id", r"\b[A-Z0-9][A-Z0-9]{5}\b", false),
        p("payment_method", "payment method", r"\b(?:credit_card|paypal|gift_card)_[0-9]{7}\b", false),
        p("item_ids", "item ids", r"\b[0-9]{10}\b", true),
        p("zip", "zip code", r"(?i)\bzip(?: code)?(?: is)? ([0-9]{5})\b", false),
        p("name", "name", r"\b(?:name is|I am) ([A-Z][a-z]+ [A-Z][a-z]+)", false),
    ]
});

/// Which words in an agent message ask for which fact.
pub const REVEAL_RULES: &[(&str, &str)] = &[
    ("email", "email"),
    ("user id", "user_id"),
    ("user_id", "user_id"),
    ("username", "user_id"),
    ("order", "order_id"),
    ("reservation", "reservation_id"),
    ("booking", "reservation_id"),
    ("confirmation", "reservation_id"),
    ("payment", "payment_method"),
    ("card", "payment_method"),
    ("item", "item_ids"),
    ("zip", "zip"),
    ("postal", "zip"),
    ("name", "name"),
];

static COMPLETION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(done|completed|has been (?:cancelled|canceled|updated|submitted|processed)|anything else)\b")
        .expect("valid regex")
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSimScript {
    /// First message: the instruction's sentences that carry no fact.
    pub opening: String,
    /// Field name to value, in pattern order. Only values present in the instruction.
    pub facts: Vec<(String, String)>,
    pub stopped: bool,
}

fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        let ends = matches!(b, b'.' | b'?' | b'!') && bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace());
        if ends || b == b'\n' {
            let s = text[start..=i].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = i + 1;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

impl UserSimScript {
    pub fn from_instruction(instruction: &str) -> UserSimScript {
        let mut facts = Vec::new();
        for p in FACT_PATTERNS.iter() {
            let values: Vec<String> = p
                .regex
                .captures_iter(instruction)
                .map(|c| c.get(1).unwrap_or_else(|| c.get(0).expect("whole match")).as_str().to_string())
                .collect();
            let value = if p.many { values.join(", ") } else { values.into_iter().next().unwrap_or_default() };
            if !value.is_empty() {
                facts.push((p.field.to_string(), value));
            }
        }
        let opening: Vec<&str> = sentences(instruction)
            .into_iter()
            .filter(|s| !facts.iter().any(|(_, v)| v.split(", ").any(|part| s.contains(part))))
            .collect();
        let opening = if opening.is_empty() { "Hi, I need some help.".to_string() } else { opening.join(" ") };
        UserSimScript { opening, facts, stopped: false }
    }

    pub fn fact(&self, field: &str) -> Option<&str> {
        self.facts.iter().find(|(f, _)| f == field).map(|(_, v)| v.as_str())
    }

    /// Reply to one agent message.
    pub fn reply(&mut self, message: &str) -> String {
        if self.stopped {
            return String::new();
        }
        if COMPLETION.is_match(message) {
            self.stopped = true;
            return STOP_TOKEN.to_string();
        }
        let lower = message.to_lowercase();
        let mut asked: Vec<&str> = Vec::new();
        for (keyword, field) in REVEAL_RULES {
            if lower.contains(keyword) && !asked.contains(field) {
                asked.push(field);
            }
        }
        let mut parts = Vec::new();
        let mut missing = false;
        for field in asked {
            match self.fact(field) {
                Some(v) => {
                    let label = FACT_PATTERNS.iter().find(|p| p.field == field).map_or(field, |p| p.label);
                    parts.push(format!("My {label} is {v}."));
                }
                None => missing = true,
            }
        }
        if parts.is_empty() {
            return REFUSAL.to_string();
        }
        if missing {
            parts.push("I don't have anything else you asked for.".to_string());
        }
        parts.join(" ")
    }
}

impl UserResponder for UserSimScript {
    fn respond(&mut self, message: &str) -> String {
        self.reply(message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INSTR: &str = "I want to cancel an order because it was ordered by mistake. \
The order is #W1234567. My email is ana.lee1234@example.com.";

    #[test]
    fn reveals_only_known_facts() {
        let mut u = UserSimScript::from_instruction(INSTR);
        assert_eq!(u.opening, "I want to cancel an order because it was ordered by mistake.");
        assert_eq!(u.reply("What is your email?"), "My email is ana.lee1234@example.com.");
        assert_eq!(u.reply("Could you give me your zip code?"), REFUSAL);
        assert_eq!(u.reply("Which order?"), "My order id is #W1234567.");
    }

    #[test]
    fn stops_once() {
        let mut u = UserSimScript::from_instruction(INSTR);
        assert_eq!(u.reply("Your order has been cancelled."), STOP_TOKEN);
        assert!(u.stopped);
        assert_eq!(u.reply("Anything else?"), "");
    }
}
