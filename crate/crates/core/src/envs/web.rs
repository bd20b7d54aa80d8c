//! Synthetic website navigated page by page from a landing page.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;

use super::answer::check_answer_tool;
use super::gen;
use super::Scale;
use crate::ctl::{ToolError, Value};
use crate::env::{arg_str, Args, EnvState, ParamType, Tool, ToolRegistry, Verification, World};
use crate::vmap;

pub const LANDING: &str = "home";

const PRODUCT_NAMES: &[&str] = &[
    "Trail Backpack",
    "Steel Thermos",
    "Desk Lamp",
    "Canvas Tote",
    "Field Notebook",
    "Travel Mug",
    "Rain Jacket",
    "Camp Stove",
    "Wool Beanie",
    "Bike Light",
    "Pocket Knife",
    "Yoga Block",
];
const EVENT_NAMES: &[&str] = &[
    "Spring Workshop",
    "Product Launch",
    "Community Meetup",
    "Repair Cafe",
    "Summer Sale",
    "Book Club",
    "Hackathon",
    "Photo Walk",
];
const ROLES: &[&str] = &["product manager", "designer", "support lead", "engineer", "buyer"];

pub struct WebWorld {
    scale: Scale,
    registry: ToolRegistry,
}

impl WebWorld {
    pub fn new(scale: Scale) -> WebWorld {
        let registry = ToolRegistry::new(vec![
            Tool::read("open_page", "Open a page by id; returns its title, body, info and links.", open_page)
                .param("page_id", ParamType::String),
            Tool::read(
                "follow_link",
                "Follow the link with the given text on a page; returns the target page.",
                follow_link,
            )
            .param("page_id", ParamType::String)
            .param("link_text", ParamType::String),
            Tool::read("find_text", "Lines of a page body containing the query (case-insensitive).", find_text)
                .param("page_id", ParamType::String)
                .param("query", ParamType::String),
            check_answer_tool(),
        ])
        .expect("web tool names are unique");
        WebWorld { scale, registry }
    }
}

impl World for WebWorld {
    fn name(&self) -> &'static str {
        "web"
    }

    fn generate(&self, seed: u64) -> EnvState {
        generate(seed, self.scale)
    }

    fn registry(&self) -> &ToolRegistry {
        &self.registry
    }

    fn verification(&self) -> Verification {
        Verification::Answer
    }

    fn description(&self) -> String {
        format!(
            "You are browsing a small website. The browser starts at page `{LANDING}`. Navigate with the \
tools to find the requested information and submit it as your final answer."
        )
    }

    fn hidden_values(&self, state: &EnvState) -> Vec<String> {
        let mut out = Vec::new();
        for page in state.table("pages").into_iter().flat_map(|t| t.values()) {
            if let Some(info) = page.get("info").and_then(Value::as_map) {
                out.extend(info.get("email").and_then(Value::as_str).map(str::to_string));
                out.extend(info.get("sku").and_then(Value::as_str).map(str::to_string));
            }
        }
        out
    }
}

struct PageDraft {
    title: String,
    intro: String,
    info: BTreeMap<String, Value>,
    links: BTreeMap<String, String>,
}

fn body(d: &PageDraft) -> String {
    let mut lines = vec![d.title.clone(), d.intro.clone()];
    for (k, v) in &d.info {
        lines.push(format!("{k}: {}", v.answer_text()));
    }
    lines.join("\n")
}

pub fn generate(seed: u64, scale: Scale) -> EnvState {
    let mut rng = gen::rng(seed, 4);
    let mut state = EnvState::new("web", seed);
    let mut taken: BTreeSet<String> = ["home", "products", "staff", "events"].iter().map(|s| s.to_string()).collect();
    let per_section = match scale {
        Scale::Small => 4,
        Scale::Medium => 8,
    };
    let mut pages: BTreeMap<String, PageDraft> = BTreeMap::new();
    let mut fresh_id = |rng: &mut gen::WorldRng| gen::unique(rng, &mut taken, |r| format!("pg{}", gen::digits(r, 4)));

    let mut staff = Vec::new();
    let mut used_names = BTreeSet::new();
    for _ in 0..per_section {
        let id = fresh_id(&mut rng);
        let name = gen::unique(&mut rng, &mut used_names, |r| {
            format!("{} {}", gen::pick(r, gen::FIRST_NAMES), gen::pick(r, gen::LAST_NAMES))
        });
        let email = format!("{}{}@example.org", name.to_lowercase().replace(' ', "."), gen::digits(&mut rng, 2));
        let info = BTreeMap::from([
            ("email".to_string(), Value::str(email)),
            ("role".to_string(), Value::str(*gen::pick(&mut rng, ROLES))),
            ("office".to_string(), Value::str(format!("Room {}", rng.random_range(100..500)))),
        ]);
        pages.insert(
            id.clone(),
            PageDraft { title: name.clone(), intro: format!("Profile of {name}."), info, links: BTreeMap::new() },
        );
        staff.push((id, name));
    }

    let section_links = |title: &str| {
        BTreeMap::from([("Home".to_string(), LANDING.to_string()), (title.to_string(), title.to_lowercase())])
    };
    let mut products = Vec::new();
    let mut names: Vec<&str> = PRODUCT_NAMES.to_vec();
    for _ in 0..per_section.min(names.len()) {
        let idx = rng.random_range(0..names.len());
        let name = names.swap_remove(idx);
        let id = fresh_id(&mut rng);
        let info = BTreeMap::from([
            ("price".to_string(), Value::Float(gen::price(&mut rng, 5, 150))),
            ("sku".to_string(), Value::str(format!("SKU-{}", gen::digits(&mut rng, 5)))),
            ("stock".to_string(), Value::Int(rng.random_range(0..60))),
        ]);
        let (manager_id, manager_name) = gen::pick(&mut rng, &staff).clone();
        let mut links = section_links("Products");
        links.insert("Product manager".to_string(), manager_id);
        pages.insert(
            id.clone(),
            PageDraft { title: name.to_string(), intro: format!("{name} is managed by {manager_name}."), info, links },
        );
        products.push((id, name.to_string()));
    }

    let mut events = Vec::new();
    let mut names: Vec<&str> = EVENT_NAMES.to_vec();
    for _ in 0..per_section.min(names.len()) {
        let idx = rng.random_range(0..names.len());
        let name = names.swap_remove(idx);
        let id = fresh_id(&mut rng);
        let info = BTreeMap::from([
            ("date".to_string(), Value::str(format!("2024-06-{:02}", rng.random_range(1..29)))),
            ("ticket_price".to_string(), Value::Float(gen::price(&mut rng, 0, 60))),
            ("location".to_string(), Value::str(*gen::pick(&mut rng, &["Hall A", "Hall B", "Rooftop", "Library"]))),
        ]);
        let (host_id, host_name) = gen::pick(&mut rng, &staff).clone();
        let mut links = section_links("Events");
        links.insert("Host".to_string(), host_id);
        pages.insert(
            id.clone(),
            PageDraft { title: name.to_string(), intro: format!("{name}, hosted by {host_name}."), info, links },
        );
        events.push((id, name.to_string()));
    }
    for (id, _) in &staff {
        if let Some(p) = pages.get_mut(id) {
            p.links = section_links("Staff");
        }
    }

    let section = |title: &str, items: &[(String, String)]| PageDraft {
        title: title.to_string(),
        intro: format!("All {}.", title.to_lowercase()),
        info: BTreeMap::new(),
        links: std::iter::once(("Home".to_string(), LANDING.to_string()))
            .chain(items.iter().map(|(id, name)| (name.clone(), id.clone())))
            .collect(),
    };
    pages.insert("products".into(), section("Products", &products));
    pages.insert("staff".into(), section("Staff", &staff));
    pages.insert("events".into(), section("Events", &events));
    pages.insert(
        LANDING.into(),
        PageDraft {
            title: "Home".into(),
            intro: "Welcome. Browse our products, staff and events.".into(),
            info: BTreeMap::new(),
            links: ["Products", "Staff", "Events"].iter().map(|s| (s.to_string(), s.to_lowercase())).collect(),
        },
    );

    for (id, d) in pages {
        let links: BTreeMap<String, Value> = d.links.iter().map(|(k, v)| (k.clone(), Value::str(v.as_str()))).collect();
        state.table_mut("pages").insert(
            id.clone(),
            vmap! {
                "page_id" => id.as_str(),
                "title" => d.title.as_str(),
                "body" => body(&d),
                "info" => Value::Map(d.info),
                "links" => Value::Map(links),
            },
        );
    }
    state.table_mut("meta").insert("landing".into(), Value::str(LANDING));
    state
}

fn page<'a>(state: &'a EnvState, id: &str) -> Result<&'a Value, ToolError> {
    state.record("pages", id).ok_or_else(|| ToolError::not_found(format!("page {id}")))
}

fn open_page(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    page(state, arg_str(args, "page_id")?).cloned()
}

fn follow_link(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let (id, text) = (arg_str(args, "page_id")?, arg_str(args, "link_text")?);
    let target = page(state, id)?
        .get("links")
        .and_then(|l| l.get(text))
        .and_then(Value::as_str)
        .ok_or_else(|| ToolError::not_found(format!("link `{text}` on page {id}")))?;
    page(state, target).cloned()
}

fn find_text(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let (id, query) = (arg_str(args, "page_id")?, arg_str(args, "query")?);
    let q = query.to_lowercase();
    let body = page(state, id)?.get("body").and_then(Value::as_str).unwrap_or("");
    Ok(Value::List(body.lines().filter(|l| l.to_lowercase().contains(&q)).map(Value::str).collect()))
}

/// Every link resolves and every page is reachable from the landing page.
pub fn check_invariants(state: &EnvState) -> Result<(), String> {
    let pages = state.table("pages").ok_or("missing pages table")?;
    let mut seen = BTreeSet::from([LANDING.to_string()]);
    let mut queue = VecDeque::from([LANDING.to_string()]);
    while let Some(id) = queue.pop_front() {
        let p = pages.get(&id).ok_or_else(|| format!("link to missing page {id}"))?;
        for target in p.get("links").and_then(Value::as_map).into_iter().flat_map(|m| m.values()) {
            let t = target.as_str().unwrap_or("").to_string();
            if !pages.contains_key(&t) {
                return Err(format!("page {id} links to missing page {t}"));
            }
            if seen.insert(t.clone()) {
                queue.push_back(t);
            }
        }
    }
    if seen.len() != pages.len() {
        return Err(format!("{} of {} pages reachable from landing", seen.len(), pages.len()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_is_connected() {
        for seed in 0..20 {
            check_invariants(&generate(seed, Scale::Small)).unwrap();
            check_invariants(&generate(seed, Scale::Medium)).unwrap();
        }
    }
}
