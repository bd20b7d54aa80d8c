//! Scripted challengers. They explore the world with tool calls like a model
//! would, read the results from the transcript, and emit a task answer in the
//! tag format. The noisy variant plants one known flaw per task.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::challenger::{render_task_answer, TaskParts};
use super::policy::{Policy, PolicyError};
use super::transcript::{Role, Turn};
use crate::cat::RejectClass;
use crate::ctl::Value;
use crate::env::AgentAction;
use crate::envs::airline::CABINS;
use crate::envs::calc::{AMENITIES, CURRENCIES, LOCATIONS, TRAVEL_DATES};
use crate::envs::EnvKind;

/// Order, reservation, hex string and currency that never exist in a world.
pub const MISSING_ORDER: &str = "#W0000001";
pub const MISSING_RESERVATION: &str = "000000";
const MISSING_LOCATION: &str = "Z";
const MISSING_PAGE_TITLE: &str = "Golden Teapot";
const MISSING_CURRENCY: &str = "XYZ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flaw {
    /// The verifier references an undefined variable.
    Unrunnable,
    /// The task targets a record that does not exist.
    InfeasibleSolution,
    /// The verifier already passes on the untouched world.
    LenientVerifier,
    /// The instruction omits a detail the verifier needs. Not detectable.
    AmbiguousInstruction,
}

impl Flaw {
    pub const ALL: [Flaw; 4] =
        [Flaw::Unrunnable, Flaw::InfeasibleSolution, Flaw::LenientVerifier, Flaw::AmbiguousInstruction];

    pub fn as_str(self) -> &'static str {
        match self {
            Flaw::Unrunnable => "unrunnable",
            Flaw::InfeasibleSolution => "infeasible_solution",
            Flaw::LenientVerifier => "lenient_verifier",
            Flaw::AmbiguousInstruction => "ambiguous_instruction",
        }
    }

    pub fn parse(s: &str) -> Option<Flaw> {
        Flaw::ALL.into_iter().find(|f| f.as_str() == s)
    }

    /// The reject class a full filter assigns, or None when the flaw passes.
    pub fn expected_reject(self) -> Option<RejectClass> {
        match self {
            Flaw::Unrunnable => Some(RejectClass::VerifyUnrunnable),
            Flaw::InfeasibleSolution => Some(RejectClass::SolutionFails),
            Flaw::LenientVerifier => Some(RejectClass::NoopPasses),
            Flaw::AmbiguousInstruction => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlawRates {
    pub unrunnable: f64,
    pub infeasible_solution: f64,
    pub lenient_verifier: f64,
    pub ambiguous_instruction: f64,
}

impl Default for FlawRates {
    fn default() -> Self {
        FlawRates { unrunnable: 0.2, infeasible_solution: 0.2, lenient_verifier: 0.2, ambiguous_instruction: 0.1 }
    }
}

/// Assigns flaws to `n` task slots: `round(rate * n)` of each kind, in a
/// seeded random order. The rest stay clean.
pub fn plan_flaws(n: usize, seed: u64, rates: &FlawRates) -> Vec<Option<Flaw>> {
    let mut plan = Vec::with_capacity(n);
    for (flaw, rate) in [
        (Flaw::Unrunnable, rates.unrunnable),
        (Flaw::InfeasibleSolution, rates.infeasible_solution),
        (Flaw::LenientVerifier, rates.lenient_verifier),
        (Flaw::AmbiguousInstruction, rates.ambiguous_instruction),
    ] {
        let k = ((rate.clamp(0.0, 1.0) * n as f64).round() as usize).min(n - plan.len());
        plan.extend(std::iter::repeat_n(Some(flaw), k));
    }
    plan.resize(n, None);
    plan.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    plan
}

fn q(s: &str) -> String {
    Value::str(s).to_string()
}

fn str_list(items: &[String]) -> String {
    Value::List(items.iter().map(|s| Value::str(s.as_str())).collect()).to_string()
}

fn and_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [rest @ .., last] => format!("{} and {last}", rest.join(", ")),
    }
}

fn s<'a>(v: &'a Value, key: &str) -> &'a str {
    v.get(key).and_then(Value::as_str).unwrap_or("")
}

fn list<'a>(v: &'a Value, key: &str) -> &'a [Value] {
    v.get(key).and_then(Value::as_list).unwrap_or(&[])
}

/// A finished state-verified task and the pieces each flaw swaps in.
struct StateDraft {
    task_type: &'static str,
    /// Goal sentence without ids; the user simulator opens with it.
    goal: String,
    /// Sentences carrying the ids.
    facts: Vec<String>,
    /// Index into `facts` of the sentence the ambiguous variant drops.
    key_fact: usize,
    verify: String,
    solution: String,
    failures: Vec<String>,
    /// `(record id, variable)` for the unrunnable and infeasible variants.
    target_id: String,
    missing_id: &'static str,
    /// Verifier that already passes on the fresh world.
    lenient_verify: String,
}

/// A candidate question for an answer-verified world, before it is tried.
#[derive(Clone)]
struct AnswerCandidate {
    task_type: &'static str,
    instruction: String,
    ambiguous_instruction: String,
    solution: String,
    mistake: String,
    infeasible_instruction: String,
    infeasible_solution: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Start,
    Explored,
    TryingSolution,
    TryingMistake,
    Done,
}

/// Scripted challenger. With a flaw set it plays the noisy challenger.
pub struct TemplateChallenger {
    kind: EnvKind,
    rng: ChaCha8Rng,
    noisy: bool,
    flaw: Option<Flaw>,
    phase: Phase,
    candidates: Vec<AnswerCandidate>,
    current: usize,
    expected: Option<Value>,
    annotations: BTreeMap<String, serde_json::Value>,
    /// Calc exploration draws its cipher text before seeing any result.
    cipher: (String, i64),
}

static USER_HINT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"user id ([a-z]+_[a-z]+_[0-9]{4})").expect("valid regex"));

static USER_FACT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"user id is ([a-z]+_[a-z]+_[0-9]{4})").expect("valid regex"));

const PLAINTEXTS: &[&str] = &[
    "meet at the north gate",
    "the package arrives friday",
    "bring the blue folder",
    "call me after lunch",
    "the key is under the mat",
    "dinner moved to eight",
];

impl TemplateChallenger {
    pub fn new(kind: EnvKind, seed: u64) -> TemplateChallenger {
        TemplateChallenger::build(kind, seed, false, None)
    }

    /// Noisy challenger planting `flaw` (or none) into its task.
    pub fn noisy(kind: EnvKind, seed: u64, flaw: Option<Flaw>) -> TemplateChallenger {
        TemplateChallenger::build(kind, seed, true, flaw)
    }

    fn build(kind: EnvKind, seed: u64, noisy: bool, flaw: Option<Flaw>) -> TemplateChallenger {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6368_616c);
        let cipher = (PLAINTEXTS[rng.random_range(0..PLAINTEXTS.len())].to_string(), rng.random_range(1..26));
        TemplateChallenger {
            kind,
            rng,
            noisy,
            flaw,
            phase: Phase::Start,
            candidates: Vec::new(),
            current: 0,
            expected: None,
            annotations: BTreeMap::new(),
            cipher,
        }
    }

    fn exploration(&self, transcript: &[Turn]) -> Option<String> {
        let system = transcript.iter().find(|t| t.role == Role::System).map_or("", |t| t.content.as_str());
        let user = || USER_HINT.captures(system).map(|c| c[1].to_string());
        Some(match self.kind {
            EnvKind::Retail => format!(
                "user = get_user_details(user_id={})\norders = []\nproducts = []\nfor oid in user.orders {{\n    order = get_order_details(order_id=oid)\n    orders = orders + [order]\n    for item in order.items {{\n        products = products + [get_product_details(product_id=item.product_id)]\n    }}\n}}\nreturn {{\"user\": user, \"orders\": orders, \"products\": products}}",
                q(&user()?)
            ),
            EnvKind::Airline => format!(
                "user = get_user_details(user_id={})\nreservations = []\nfor rid in user.reservations {{\n    reservations = reservations + [get_reservation_details(reservation_id=rid)]\n}}\nreturn {{\"user\": user, \"reservations\": reservations}}",
                q(&user()?)
            ),
            EnvKind::Calc => format!(
                "return {{\"locations\": list_locations(), \"currencies\": list_currencies(), \"cipher\": hex_encode(message=caesar_encode(message={}, shift={}))}}",
                q(&self.cipher.0),
                self.cipher.1
            ),
            EnvKind::Web => "home = open_page(page_id=\"home\")\nreturn {\"products\": open_page(page_id=\"products\").links, \"events\": open_page(page_id=\"events\").links}".to_string(),
        })
    }

    fn give_up(&mut self) -> String {
        self.phase = Phase::Done;
        AgentAction::Answer(String::new()).render()
    }

    fn annotate(&mut self, task_type: &str, oracle_verify: &str) {
        self.annotations.insert("task_type".into(), task_type.into());
        self.annotations.insert("oracle_verify".into(), oracle_verify.into());
        if self.noisy {
            let flaw = self.flaw.map_or("none", Flaw::as_str);
            self.annotations.insert("planted_flaw".into(), flaw.into());
        }
    }

    fn finish_state(&mut self, d: StateDraft) -> String {
        self.annotate(d.task_type, &d.verify);
        let facts = |drop: Option<usize>| -> String {
            let kept: Vec<&str> =
                d.facts.iter().enumerate().filter(|(i, _)| Some(*i) != drop).map(|(_, f)| f.as_str()).collect();
            format!("{} {}", d.goal, kept.join(" "))
        };
        let mut parts = TaskParts {
            instruction: facts(None),
            verify: d.verify.clone(),
            solution: d.solution.clone(),
            failures: d.failures.clone(),
        };
        match self.flaw {
            None => {}
            Some(Flaw::Unrunnable) => {
                // The first verifier line fetches the target; use an unset variable instead.
                parts.verify = d.verify.replacen(&q(&d.target_id), "target_id", 1);
            }
            Some(Flaw::InfeasibleSolution) => {
                parts.instruction = parts.instruction.replace(&d.target_id, d.missing_id);
                parts.verify = d.verify.replace(&q(&d.target_id), &q(d.missing_id));
                parts.solution = d.solution.replace(&q(&d.target_id), &q(d.missing_id));
            }
            Some(Flaw::LenientVerifier) => parts.verify = d.lenient_verify.clone(),
            Some(Flaw::AmbiguousInstruction) => parts.instruction = facts(Some(d.key_fact)),
        }
        // Look things up before acting, as a careful agent would. The lookups
        // use the real ids, so a planted infeasible target still fails below.
        let mut lookups = Vec::new();
        if let Some(uid) = USER_FACT.captures(&d.facts.join(" ")).map(|c| c[1].to_string()) {
            lookups.push(format!("user = get_user_details(user_id={})", q(&uid)));
        }
        lookups.push(match self.kind {
            EnvKind::Airline => format!("reservation = get_reservation_details(reservation_id={})", q(&d.target_id)),
            _ => format!("order = get_order_details(order_id={})", q(&d.target_id)),
        });
        let k = self.rng.random_range(0..=lookups.len());
        if k > 0 {
            parts.solution = format!("{}\n{}", lookups[lookups.len() - k..].join("\n"), parts.solution);
        }
        self.phase = Phase::Done;
        AgentAction::Answer(render_task_answer(&parts)).render()
    }

    fn finish_answer(&mut self, mistake_value: Option<Value>) -> String {
        let c = self.candidates[self.current].clone();
        let expected = self.expected.clone().unwrap_or(Value::Null);
        let text = expected.answer_text();
        let numeric = matches!(expected, Value::Int(_) | Value::Float(_));
        let mode = if numeric { "numeric" } else { "exact_string" };
        let verify = format!("return check_answer(answer=answer, expected={}, mode={})", q(&text), q(mode));
        self.annotate(c.task_type, &verify);

        let wrong_constant = if numeric {
            let x = expected.as_f64().unwrap_or(0.0) + 1.0;
            format!("result = {}", Value::Float(x))
        } else if text.eq_ignore_ascii_case("unknown") {
            "result = \"none\"".to_string()
        } else {
            "result = \"unknown\"".to_string()
        };
        let distinct = |v: &Value| -> bool {
            let t = v.answer_text();
            match (numeric, t.trim().parse::<f64>(), expected.as_f64()) {
                (true, Ok(a), Some(b)) => (a - b).abs() > 1e-6,
                (true, _, _) => true,
                (false, _, _) => !t.trim().eq_ignore_ascii_case(text.trim()) && !t.trim().is_empty(),
            }
        };
        let mistake = match mistake_value {
            Some(v) if distinct(&v) => c.mistake.clone(),
            // A mistake that errors or lands on the right answer is replaced.
            _ => {
                if numeric {
                    format!("result = {}", Value::Float(expected.as_f64().unwrap_or(0.0) + 2.0))
                } else {
                    "result = \"n/a\"".to_string()
                }
            }
        };
        let mut parts = TaskParts {
            instruction: c.instruction.clone(),
            verify: verify.clone(),
            solution: c.solution.clone(),
            failures: vec![mistake, wrong_constant, "result = null".to_string()],
        };
        match self.flaw {
            None => {}
            Some(Flaw::Unrunnable) => {
                parts.verify =
                    format!("return check_answer(answer=answer, expected=expected_output, mode={})", q(mode));
            }
            Some(Flaw::InfeasibleSolution) => {
                parts.instruction = c.infeasible_instruction.clone();
                parts.solution = c.infeasible_solution.clone();
            }
            Some(Flaw::LenientVerifier) => {
                parts.verify = format!(
                    "return answer == null or check_answer(answer=answer, expected={}, mode={})",
                    q(&text),
                    q(mode)
                );
            }
            Some(Flaw::AmbiguousInstruction) => parts.instruction = c.ambiguous_instruction.clone(),
        }
        self.phase = Phase::Done;
        AgentAction::Answer(render_task_answer(&parts)).render()
    }

    fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.rng.random_range(0..items.len())]
    }

    // ---- retail ----

    fn retail_draft(&mut self, v: &Value) -> Option<StateDraft> {
        let user = v.get("user")?;
        let uid = s(user, "user_id").to_string();
        let pms: Vec<String> = user.get("payment_methods")?.as_map()?.keys().cloned().collect();
        let orders = list(v, "orders");
        let products: BTreeMap<&str, &Value> = list(v, "products").iter().map(|p| (s(p, "product_id"), p)).collect();
        let with_status = |st: &str| -> Vec<&Value> { orders.iter().filter(|o| s(o, "status") == st).collect() };
        let (pending, delivered) = (with_status("pending"), with_status("delivered"));
        let item_ids =
            |o: &Value| -> Vec<String> { list(o, "items").iter().map(|i| s(i, "item_id").to_string()).collect() };
        // (old item, alternative available variants) for items appearing once in the order.
        let swaps = |o: &Value| -> Vec<(String, Vec<String>)> {
            let ids = item_ids(o);
            list(o, "items")
                .iter()
                .filter(|i| ids.iter().filter(|x| *x == s(i, "item_id")).count() == 1)
                .filter_map(|i| {
                    let variants = products.get(s(i, "product_id"))?.get("variants")?.as_map()?;
                    let alts: Vec<String> = variants
                        .iter()
                        .filter(|(id, var)| var.get("available") == Some(&Value::Bool(true)) && !ids.contains(id))
                        .map(|(id, _)| id.clone())
                        .collect();
                    (!alts.is_empty()).then(|| (s(i, "item_id").to_string(), alts))
                })
                .collect()
        };

        let mut kinds = Vec::new();
        if !pending.is_empty() {
            kinds.push("cancel_order");
            if pending.iter().any(|o| !swaps(o).is_empty()) {
                kinds.push("modify_pending_items");
            }
        }
        if !delivered.is_empty() {
            kinds.push("return_items");
            if delivered.iter().any(|o| !swaps(o).is_empty()) {
                kinds.push("exchange_items");
            }
        }
        if kinds.is_empty() {
            return None;
        }
        let kind = *self.pick(&kinds);
        let pm = self.pick(&pms).clone();
        let other_pm = pms.iter().find(|p| **p != pm).cloned();
        let user_fact = format!("My user id is {uid}.");
        let read_only = |oid: &str| format!("get_order_details(order_id={})", q(oid));
        let fetch = |oid: &str| format!("order = get_order_details(order_id={})", q(oid));

        let draft = match kind {
            "cancel_order" => {
                let order = *self.pick(&pending);
                let oid = s(order, "order_id").to_string();
                let (reason, other, phrase) = if self.rng.random_bool(0.5) {
                    ("ordered by mistake", "no longer needed", "I ordered it by mistake")
                } else {
                    ("no longer needed", "ordered by mistake", "I no longer need it")
                };
                let other_pending = pending.iter().map(|o| s(o, "order_id")).find(|o| *o != oid);
                StateDraft {
                    task_type: kind,
                    goal: format!("I want to cancel one of my pending orders because {phrase}."),
                    facts: vec![format!("The order is {oid}."), user_fact],
                    key_fact: 0,
                    verify: format!(
                        "{}\nreturn order.status == \"cancelled\" and order.cancel_reason == {}",
                        fetch(&oid),
                        q(reason)
                    ),
                    solution: format!("cancel_order(order_id={}, reason={})", q(&oid), q(reason)),
                    failures: vec![
                        format!("# wrong reason\ncancel_order(order_id={}, reason={})", q(&oid), q(other)),
                        match other_pending {
                            Some(o) => format!("# wrong order\ncancel_order(order_id={}, reason={})", q(o), q(reason)),
                            None => format!(
                                "# unsupported reason\ncancel_order(order_id={}, reason=\"changed my mind\")",
                                q(&oid)
                            ),
                        },
                        format!("# only looks the order up\n{}", read_only(&oid)),
                    ],
                    lenient_verify: format!("{}\nreturn order.status == \"pending\"", fetch(&oid)),
                    target_id: oid,
                    missing_id: MISSING_ORDER,
                }
            }
            "return_items" => {
                let order = *self.pick(&delivered);
                let oid = s(order, "order_id").to_string();
                let all = item_ids(order);
                let mut ids = all.clone();
                ids.dedup();
                let n = self.rng.random_range(1..=ids.len());
                let chosen: Vec<String> = ids[..n].to_vec();
                let wrong_items: Vec<String> = if n < ids.len() { ids.clone() } else { ids[..n - 1].to_vec() };
                StateDraft {
                    task_type: kind,
                    goal: format!(
                        "I want to return {} from a delivered order and get a refund.",
                        if n == 1 { "one item".to_string() } else { format!("{n} items") }
                    ),
                    facts: vec![
                        format!("The order is {oid}."),
                        format!("The item ids are {}.", and_list(&chosen)),
                        format!("Please refund {pm}."),
                        user_fact,
                    ],
                    key_fact: 1,
                    verify: format!(
                        "{}\nok = order.status == \"return requested\"\nok = ok and order.return_items == {}\nok = ok and order.return_payment_method_id == {}\nreturn ok",
                        fetch(&oid),
                        str_list(&chosen),
                        q(&pm)
                    ),
                    solution: format!(
                        "return_delivered_order_items(order_id={}, item_ids={}, payment_method_id={})",
                        q(&oid),
                        str_list(&chosen),
                        q(&pm)
                    ),
                    failures: vec![
                        format!(
                            "# refund to the wrong payment method\nreturn_delivered_order_items(order_id={}, item_ids={}, payment_method_id={})",
                            q(&oid),
                            str_list(&chosen),
                            q(other_pm.as_deref().unwrap_or("credit_card_0000000"))
                        ),
                        if wrong_items.is_empty() {
                            format!("# only looks the user up\nget_user_details(user_id={})", q(&uid))
                        } else {
                            format!(
                                "# wrong items\nreturn_delivered_order_items(order_id={}, item_ids={}, payment_method_id={})",
                                q(&oid),
                                str_list(&wrong_items),
                                q(&pm)
                            )
                        },
                        format!("# only looks the order up\n{}", read_only(&oid)),
                    ],
                    lenient_verify: format!("{}\nreturn order.status == \"delivered\"", fetch(&oid)),
                    target_id: oid,
                    missing_id: MISSING_ORDER,
                }
            }
            "exchange_items" | "modify_pending_items" => {
                let exchange = kind == "exchange_items";
                let pool: Vec<&Value> = if exchange { delivered.clone() } else { pending.clone() }
                    .into_iter()
                    .filter(|o| !swaps(o).is_empty())
                    .collect();
                let order = *self.pick(&pool);
                let oid = s(order, "order_id").to_string();
                let options = swaps(order);
                let (old, alts) = self.pick(&options).clone();
                let new = self.pick(&alts).clone();
                let other_new = alts.iter().find(|a| **a != new).cloned();
                let (tool, status, goal) = if exchange {
                    (
                        "exchange_delivered_order_items",
                        "delivered",
                        "I want to exchange an item from a delivered order for another variant of the same product.",
                    )
                } else {
                    (
                        "modify_pending_order_items",
                        "pending",
                        "I want to change an item in a pending order to another variant of the same product.",
                    )
                };
                let call = |new_id: &str, pm_id: &str| {
                    format!(
                        "{tool}(order_id={}, item_ids={}, new_item_ids={}, payment_method_id={})",
                        q(&oid),
                        str_list(std::slice::from_ref(&old)),
                        str_list(&[new_id.to_string()]),
                        q(pm_id)
                    )
                };
                let verify = if exchange {
                    format!(
                        "{}\nok = order.status == \"exchange requested\"\nok = ok and order.exchange_items == {}\nok = ok and order.exchange_new_items == {}\nok = ok and order.exchange_payment_method_id == {}\nreturn ok",
                        fetch(&oid),
                        str_list(std::slice::from_ref(&old)),
                        str_list(std::slice::from_ref(&new)),
                        q(&pm)
                    )
                } else {
                    format!(
                        "{}\nids = []\nfor item in order.items {{\n    ids = ids + [item.item_id]\n}}\nreturn order.status == \"pending\" and contains(ids, {}) and not contains(ids, {})",
                        fetch(&oid),
                        q(&new),
                        q(&old)
                    )
                };
                let second = match (&other_new, exchange) {
                    (Some(o), _) => format!("# wrong variant\n{}", call(o, &pm)),
                    (None, true) => format!(
                        "# returns instead of exchanging\nreturn_delivered_order_items(order_id={}, item_ids={}, payment_method_id={})",
                        q(&oid),
                        str_list(std::slice::from_ref(&old)),
                        q(&pm)
                    ),
                    (None, false) => format!(
                        "# cancels instead of changing\ncancel_order(order_id={}, reason=\"no longer needed\")",
                        q(&oid)
                    ),
                };
                let mut failures = vec![second, format!("# only looks the order up\n{}", read_only(&oid))];
                if exchange {
                    failures.push(format!(
                        "# pays with a card the user does not have\n{}",
                        call(&new, "credit_card_0000000")
                    ));
                } else {
                    failures.push(format!(
                        "# cancels instead of changing\ncancel_order(order_id={}, reason=\"no longer needed\")",
                        q(&oid)
                    ));
                }
                StateDraft {
                    task_type: kind,
                    goal: goal.to_string(),
                    facts: vec![
                        format!("The order is {oid}."),
                        format!("Replace item {old} with item {new}."),
                        format!("Use {pm} for any price difference."),
                        user_fact,
                    ],
                    key_fact: 1,
                    verify,
                    solution: call(&new, &pm),
                    failures,
                    lenient_verify: format!("{}\nreturn order.status == {}", fetch(&oid), q(status)),
                    target_id: oid,
                    missing_id: MISSING_ORDER,
                }
            }
            _ => return None,
        };
        Some(draft)
    }

    // ---- airline ----

    fn airline_draft(&mut self, v: &Value) -> Option<StateDraft> {
        let user = v.get("user")?;
        let uid = s(user, "user_id").to_string();
        let pms: Vec<String> = user.get("payment_methods")?.as_map()?.keys().cloned().collect();
        let active: Vec<&Value> = list(v, "reservations").iter().filter(|r| s(r, "status") == "active").collect();
        if active.is_empty() || pms.is_empty() {
            return None;
        }
        let r = *self.pick(&active);
        let rid = s(r, "reservation_id").to_string();
        let other_active = active.iter().map(|x| s(x, "reservation_id")).find(|x| *x != rid);
        let pm = self.pick(&pms).clone();
        let other_pm = pms.iter().find(|p| **p != pm).cloned().unwrap_or_else(|| "gift_card_0000000".into());
        let fetch = format!("r = get_reservation_details(reservation_id={})", q(&rid));
        let read_only = format!("# only looks the reservation up\nget_reservation_details(reservation_id={})", q(&rid));
        let total = r.get("total_baggages").and_then(Value::as_int).unwrap_or(0);
        let nonfree = r.get("nonfree_baggages").and_then(Value::as_int).unwrap_or(0);
        let facts = |extra: Vec<String>| {
            let mut f = vec![format!("The reservation id is {rid}.")];
            f.extend(extra);
            f.push(format!("My user id is {uid}."));
            f
        };
        let kinds = ["cancel_reservation", "add_baggage", "change_cabin"];
        let kind = *self.pick(&kinds);
        let draft = match kind {
            "cancel_reservation" => StateDraft {
                task_type: kind,
                goal: "I want to cancel my upcoming reservation.".into(),
                facts: facts(vec![]),
                key_fact: 0,
                verify: format!("{fetch}\nreturn r.status == \"cancelled\""),
                solution: format!("cancel_reservation(reservation_id={})", q(&rid)),
                failures: vec![
                    match other_active {
                        Some(o) => format!("# cancels the wrong reservation\ncancel_reservation(reservation_id={})", q(o)),
                        None => format!("# only looks the user up\nget_user_details(user_id={})", q(&uid)),
                    },
                    format!(
                        "# changes baggage instead\nupdate_reservation_baggages(reservation_id={}, total_baggages={}, nonfree_baggages={nonfree}, payment_id={})",
                        q(&rid),
                        total + 1,
                        q(&pm)
                    ),
                    read_only.clone(),
                ],
                lenient_verify: format!("{fetch}\nreturn r.status == \"active\""),
                target_id: rid.clone(),
                missing_id: MISSING_RESERVATION,
            },
            "add_baggage" => {
                let j = self.rng.random_range(1..=2);
                let (t, nf) = (total + j, nonfree + j);
                let call = |tt: i64, pay: &str| {
                    format!(
                        "update_reservation_baggages(reservation_id={}, total_baggages={tt}, nonfree_baggages={nf}, payment_id={})",
                        q(&rid),
                        q(pay)
                    )
                };
                StateDraft {
                    task_type: kind,
                    goal: format!(
                        "I want {t} checked bag{} in total on my reservation, {nf} of them paid, which adds {j} paid bag{}.",
                        if t == 1 { "" } else { "s" },
                        if j == 1 { "" } else { "s" }
                    ),
                    facts: facts(vec![format!("Charge the bags to {pm}.")]),
                    key_fact: 0,
                    verify: format!(
                        "{fetch}\nlast = r.payment_history[-1]\nreturn r.total_baggages == {t} and r.nonfree_baggages == {nf} and last.payment_id == {} and last.amount == {}",
                        q(&pm),
                        50 * j
                    ),
                    solution: call(t, &pm),
                    failures: vec![
                        format!("# one bag too many\n{}", call(t + 1, &pm)),
                        format!("# wrong payment method\n{}", call(t, &other_pm)),
                        read_only.clone(),
                    ],
                    lenient_verify: format!("{fetch}\nreturn r.status == \"active\" and r.total_baggages >= {total}"),
                    target_id: rid.clone(),
                    missing_id: MISSING_RESERVATION,
                }
            }
            _ => {
                let current = s(r, "cabin").to_string();
                let choices: Vec<&str> = CABINS.iter().copied().filter(|c| *c != current).collect();
                let cabin = self.pick(&choices).to_string();
                let wrong_cabin = choices.iter().find(|c| **c != cabin).copied().unwrap_or("basic_economy");
                let legs: Vec<Value> = list(r, "flights")
                    .iter()
                    .map(|f| {
                        let mut m = BTreeMap::new();
                        m.insert("flight_number".to_string(), Value::str(s(f, "flight_number")));
                        m.insert("date".to_string(), Value::str(s(f, "date")));
                        Value::Map(m)
                    })
                    .collect();
                let numbers: Vec<String> = list(r, "flights").iter().map(|f| s(f, "flight_number").to_string()).collect();
                let call = |c: &str| {
                    format!(
                        "update_reservation_flights(reservation_id={}, cabin={}, flights={}, payment_id={})",
                        q(&rid),
                        q(c),
                        Value::List(legs.clone()),
                        q(&pm)
                    )
                };
                StateDraft {
                    task_type: kind,
                    goal: format!(
                        "I want to move my reservation to {} class and keep the same flights.",
                        cabin.replace('_', " ")
                    ),
                    facts: facts(vec![
                        format!("The flights are {}.", and_list(&numbers)),
                        format!("Settle any fare difference with {pm}."),
                    ]),
                    key_fact: 0,
                    verify: format!(
                        "{fetch}\nnumbers = []\nfor f in r.flights {{\n    numbers = numbers + [f.flight_number]\n}}\nreturn r.cabin == {} and numbers == {} and r.payment_history[-1].payment_id == {}",
                        q(&cabin),
                        str_list(&numbers),
                        q(&pm)
                    ),
                    solution: call(&cabin),
                    failures: vec![
                        format!("# wrong cabin\n{}", call(wrong_cabin)),
                        format!("# cancels instead\ncancel_reservation(reservation_id={})", q(&rid)),
                        read_only.clone(),
                    ],
                    lenient_verify: format!("{fetch}\nreturn r.status == \"active\""),
                    target_id: rid.clone(),
                    missing_id: MISSING_RESERVATION,
                }
            }
        };
        Some(draft)
    }

    // ---- calc ----

    fn calc_candidates(&mut self, v: &Value) -> Vec<AnswerCandidate> {
        let hex = s(v, "cipher").to_string();
        let mut out = Vec::new();
        for _ in 0..3 {
            let from = *self.pick(LOCATIONS);
            let others: Vec<&str> = LOCATIONS.iter().copied().filter(|l| *l != from).collect();
            let to = *self.pick(&others);
            let date = *self.pick(TRAVEL_DATES);
            let amenity = *self.pick(AMENITIES);
            let nights = self.rng.random_range(2..=5);
            let program = |to: &str, agg: &str| {
                format!(
                    "costs = []\nfor f in find_flights(from_location={}, to_location={}, date={}) {{\n    for h in book_hotel(location={}, preference={}) {{\n        costs = costs + [budget_calculator(flight_price=f.price, hotel_price_per_night=h.price_per_night, num_nights={nights})]\n    }}\n}}\nresult = {agg}(costs)",
                    q(from), q(to), q(date), q(to), q(amenity)
                )
            };
            let text = |to: &str, nights_text: &str| {
                format!(
                    "You are at {from}. Find the cheapest flight to {to} on {date} and the cheapest hotel in {to} with {amenity}{nights_text}. What is the total budget for the trip? Answer with a number."
                )
            };
            out.push(AnswerCandidate {
                task_type: "trip_budget",
                instruction: text(to, &format!(", for {nights} nights")),
                ambiguous_instruction: text(to, ""),
                solution: program(to, "min"),
                mistake: program(to, "max"),
                infeasible_instruction: text(MISSING_LOCATION, &format!(", for {nights} nights")),
                infeasible_solution: program(MISSING_LOCATION, "min"),
            });
        }

        let mut seqs: Vec<String> = Vec::new();
        let mut lengths: Vec<usize> = (5..12).collect();
        lengths.shuffle(&mut self.rng);
        for (i, len) in lengths.into_iter().take(4).enumerate() {
            let bases: &[u8] = if i == 0 { b"ACGTX" } else { b"ACGT" };
            let mut seq: String = (0..len).map(|_| char::from(bases[self.rng.random_range(0..bases.len())])).collect();
            if i == 0 && !seq.contains('X') {
                seq.replace_range(0..1, "X");
            }
            seqs.push(seq);
        }
        seqs.shuffle(&mut self.rng);
        let invalid: Vec<String> = seqs.iter().map(|q| format!("{}N", &q[..q.len() - 1])).collect();
        let dna = |list: &[String], tail: &str| {
            format!(
                "best = \"\"\nfor s in {} {{\n    if is_valid_dna_sequence(sequence=s) and len(s) > len(best) {{\n        best = s\n    }}\n}}\n{tail}",
                str_list(list)
            )
        };
        let dna_text = |list: &str| {
            format!("Among the DNA sequences {list}, take the longest valid one and give its reverse complement. Answer with the sequence.")
        };
        out.push(AnswerCandidate {
            task_type: "dna_reverse_complement",
            instruction: dna_text(&str_list(&seqs)),
            ambiguous_instruction:
                "Take the longest valid DNA sequence and give its reverse complement. Answer with the sequence.".into(),
            solution: dna(&seqs, "result = reverse_complement(sequence=best)"),
            mistake: dna(&seqs, "result = best"),
            infeasible_instruction: dna_text(&str_list(&invalid)),
            infeasible_solution: dna(&invalid, "result = reverse_complement(sequence=best)"),
        });

        let shift = self.cipher.1;
        let decode =
            |h: &str| format!("result = caesar_decode(message=hex_decode(hex_string={}), shift={shift})", q(h));
        let bad_hex = format!("zz{hex}");
        out.push(AnswerCandidate {
            task_type: "decode_message",
            instruction: format!(
                "The hex string \"{hex}\" encodes a message that was Caesar-shifted by {shift}. Decode it and answer with the plain text."
            ),
            ambiguous_instruction: format!(
                "The hex string \"{hex}\" encodes a Caesar-shifted message. Decode it and answer with the plain text."
            ),
            solution: decode(&hex),
            mistake: format!("result = hex_decode(hex_string={})", q(&hex)),
            infeasible_instruction: format!(
                "The hex string \"{bad_hex}\" encodes a message that was Caesar-shifted by {shift}. Decode it and answer with the plain text."
            ),
            infeasible_solution: decode(&bad_hex),
        });

        let currencies: Vec<&str> = CURRENCIES.iter().copied().filter(|c| *c != "USD").collect();
        let cur = *self.pick(&currencies);
        let amount = self.rng.random_range(100..2000);
        let rate = self.rng.random_range(5..26);
        let weight = self.rng.random_range(1..21);
        let trade = |c: &str, converted: bool| {
            let price = if converted { "usd" } else { &amount.to_string() };
            format!(
                "usd = convert_currency(amount={amount}, from_currency={}, to_currency=\"USD\")\nship = estimate_shipping_cost(weight_kg={weight})\nresult = calculate_final_price(price={price}, tariff_rate={rate}, shipping_cost=ship)",
                q(c)
            )
        };
        let trade_text = |c: &str, weight_text: &str| {
            format!(
                "I am importing goods worth {amount} {c}. Convert the price to USD, then add a {rate}% tariff and the shipping cost{weight_text}. What is the final price in USD? Answer with a number."
            )
        };
        out.push(AnswerCandidate {
            task_type: "import_price",
            instruction: trade_text(cur, &format!(" for {weight} kg")),
            ambiguous_instruction: trade_text(cur, ""),
            solution: trade(cur, true),
            mistake: trade(cur, false),
            infeasible_instruction: trade_text(MISSING_CURRENCY, &format!(" for {weight} kg")),
            infeasible_solution: trade(MISSING_CURRENCY, true),
        });
        out.shuffle(&mut self.rng);
        out
    }

    // ---- web ----

    fn web_candidates(&mut self, v: &Value) -> Vec<AnswerCandidate> {
        let titles = |section: &str| -> Vec<String> {
            v.get(section)
                .and_then(Value::as_map)
                .map(|m| m.keys().filter(|k| *k != "Home").cloned().collect())
                .unwrap_or_default()
        };
        let (products, events) = (titles("products"), titles("events"));
        let mut out = Vec::new();
        let nav = |section: &str, title: &str, tail: &str| {
            format!(
                "section = follow_link(page_id=\"home\", link_text={})\npage = follow_link(page_id=section.page_id, link_text={})\n{tail}",
                q(section),
                q(title)
            )
        };
        if !products.is_empty() {
            let p = self.pick(&products).clone();
            let (field, other) = if self.rng.random_bool(0.5) { ("price", "stock") } else { ("stock", "price") };
            let text = |t: &str| format!("What is the {field} of the {t} listed on the website? Answer with a number.");
            out.push(AnswerCandidate {
                task_type: "product_field",
                instruction: text(&p),
                ambiguous_instruction: format!(
                    "What is the {field} of our most popular product? Answer with a number."
                ),
                solution: nav("Products", &p, &format!("result = page.info.{field}")),
                mistake: nav("Products", &p, &format!("result = page.info.{other}")),
                infeasible_instruction: text(MISSING_PAGE_TITLE),
                infeasible_solution: nav("Products", MISSING_PAGE_TITLE, &format!("result = page.info.{field}")),
            });
            let p = self.pick(&products).clone();
            let hop = "manager = follow_link(page_id=page.page_id, link_text=\"Product manager\")\n";
            let text = |t: &str| {
                format!("What is the email address of the product manager of the {t}? Answer with the email address.")
            };
            out.push(AnswerCandidate {
                task_type: "product_manager_email",
                instruction: text(&p),
                ambiguous_instruction:
                    "What is the email address of the product manager? Answer with the email address.".into(),
                solution: nav("Products", &p, &format!("{hop}result = manager.info.email")),
                mistake: nav("Products", &p, &format!("{hop}result = manager.info.role")),
                infeasible_instruction: text(MISSING_PAGE_TITLE),
                infeasible_solution: nav("Products", MISSING_PAGE_TITLE, &format!("{hop}result = manager.info.email")),
            });
        }
        if !events.is_empty() {
            let e = self.pick(&events).clone();
            let fields = [("date", "date"), ("ticket_price", "ticket price"), ("location", "location")];
            let (field, label) = *self.pick(&fields);
            let other = fields.iter().find(|f| f.0 != field).map_or("date", |f| f.0);
            let fmt = if field == "ticket_price" { "Answer with a number." } else { "Answer with the value as shown." };
            let text = |t: &str| format!("What is the {label} of the {t} event? {fmt}");
            out.push(AnswerCandidate {
                task_type: "event_field",
                instruction: text(&e),
                ambiguous_instruction: format!("What is the {label} of the upcoming event? {fmt}"),
                solution: nav("Events", &e, &format!("result = page.info.{field}")),
                mistake: nav("Events", &e, &format!("result = page.info.{other}")),
                infeasible_instruction: text(MISSING_PAGE_TITLE),
                infeasible_solution: nav("Events", MISSING_PAGE_TITLE, &format!("result = page.info.{field}")),
            });
            let e = self.pick(&events).clone();
            let hop = "host = follow_link(page_id=page.page_id, link_text=\"Host\")\n";
            let text = |t: &str| {
                format!("In which office can I find the host of the {t} event? Answer with the office as shown.")
            };
            out.push(AnswerCandidate {
                task_type: "event_host_office",
                instruction: text(&e),
                ambiguous_instruction: "In which office can I find the event host? Answer with the office as shown."
                    .into(),
                solution: nav("Events", &e, &format!("{hop}result = host.info.office")),
                mistake: nav("Events", &e, "result = page.info.location"),
                infeasible_instruction: text(MISSING_PAGE_TITLE),
                infeasible_solution: nav("Events", MISSING_PAGE_TITLE, &format!("{hop}result = host.info.office")),
            });
        }
        out.shuffle(&mut self.rng);
        out
    }
}

fn code(src: &str) -> String {
    AgentAction::Code(src.to_string()).render()
}

impl Policy for TemplateChallenger {
    fn name(&self) -> String {
        if self.noisy { "noisy" } else { "template" }.into()
    }

    fn next_action(&mut self, transcript: &[Turn]) -> Result<String, PolicyError> {
        // Only the observation of the previous action is consumed.
        let observed = transcript.last().filter(|t| t.role == Role::Tool).and_then(|t| t.value.clone());
        Ok(match self.phase {
            Phase::Start => match self.exploration(transcript) {
                Some(program) => {
                    self.phase = Phase::Explored;
                    code(&program)
                }
                None => self.give_up(),
            },
            Phase::Explored => {
                let Some(v) = observed else { return Ok(self.give_up()) };
                match self.kind {
                    EnvKind::Retail | EnvKind::Airline => {
                        let draft =
                            if self.kind == EnvKind::Retail { self.retail_draft(&v) } else { self.airline_draft(&v) };
                        match draft {
                            Some(d) => self.finish_state(d),
                            None => self.give_up(),
                        }
                    }
                    EnvKind::Calc | EnvKind::Web => {
                        self.candidates =
                            if self.kind == EnvKind::Calc { self.calc_candidates(&v) } else { self.web_candidates(&v) };
                        match self.candidates.first() {
                            Some(c) => {
                                self.phase = Phase::TryingSolution;
                                code(&c.solution)
                            }
                            None => self.give_up(),
                        }
                    }
                }
            }
            Phase::TryingSolution => match observed {
                Some(v) if v != Value::Null && !v.answer_text().trim().is_empty() => {
                    self.expected = Some(v);
                    self.phase = Phase::TryingMistake;
                    code(&self.candidates[self.current].mistake)
                }
                _ => {
                    // The candidate is not feasible in this world; try the next one.
                    self.current += 1;
                    match self.candidates.get(self.current) {
                        Some(c) => code(&c.solution),
                        None => self.give_up(),
                    }
                }
            },
            Phase::TryingMistake => self.finish_answer(observed),
            Phase::Done => self.give_up(),
        })
    }

    fn annotations(&self) -> BTreeMap<String, serde_json::Value> {
        self.annotations.clone()
    }
}
