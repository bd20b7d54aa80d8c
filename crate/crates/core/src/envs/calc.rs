//! Calculation tools in four domains: travel planning, DNA sequences,
//! message decoding and trade arithmetic. Every tool is read-only; the
//! state only holds the travel and currency catalogs.

use std::collections::BTreeMap;

use rand::Rng;

use super::answer::check_answer_tool;
use super::gen;
use crate::ctl::{ToolError, Value};
use crate::env::{arg_f64, arg_int, arg_str, Args, EnvState, ParamType, Tool, ToolRegistry, Verification, World};
use crate::vmap;

pub const LOCATIONS: &[&str] = &["A", "B", "C", "D", "E", "F"];
pub const AMENITIES: &[&str] = &["wifi", "pool", "gym", "breakfast", "parking"];
pub const CURRENCIES: &[&str] = &["USD", "EUR", "GBP", "JPY", "CAD", "CNY"];
pub const TRAVEL_DATES: &[&str] = &["2023-08-14", "2023-08-15", "2023-08-16", "2023-08-17"];

pub struct CalcWorld {
    registry: ToolRegistry,
}

impl Default for CalcWorld {
    fn default() -> Self {
        Self::new()
    }
}

impl CalcWorld {
    pub fn new() -> CalcWorld {
        use ParamType::*;
        let registry = ToolRegistry::new(vec![
            // travel
            Tool::read("find_flights", "List flights between two locations on a date (YYYY-MM-DD).", find_flights)
                .param("from_location", String)
                .param("to_location", String)
                .param("date", String),
            Tool::read("book_hotel", "List hotels at a location offering the preferred amenity.", book_hotel)
                .param("location", String)
                .param("preference", String),
            Tool::read(
                "budget_calculator",
                "Total trip budget: flight_price + hotel_price_per_night * num_nights.",
                budget_calculator,
            )
            .param("flight_price", Number)
            .param("hotel_price_per_night", Number)
            .param("num_nights", Integer),
            Tool::read("list_locations", "List all travel locations.", list_locations),
            Tool::read("get_hotel_details", "Get a hotel by name.", get_hotel_details).param("name", String),
            // dna
            Tool::read("is_valid_dna_sequence", "True when the sequence only contains A, C, G and T.", is_valid_dna)
                .param("sequence", String),
            Tool::read("count_nucleotides", "Count each nucleotide in a DNA sequence.", count_nucleotides)
                .param("sequence", String),
            Tool::read("reverse_complement", "Reverse complement of a DNA sequence.", reverse_complement)
                .param("sequence", String),
            Tool::read("gc_content", "Fraction of G and C bases in a DNA sequence.", gc_content)
                .param("sequence", String),
            Tool::read("transcribe_dna_to_rna", "Transcribe DNA to RNA (T becomes U).", transcribe)
                .param("sequence", String),
            Tool::read("find_motif", "Zero-based start positions of a motif in a DNA sequence.", find_motif)
                .param("sequence", String)
                .param("motif", String),
            // message
            Tool::read("hex_decode", "Decode a hexadecimal string to text.", hex_decode).param("hex_string", String),
            Tool::read("hex_encode", "Encode text as lowercase hexadecimal.", hex_encode).param("message", String),
            Tool::read("reverse_string", "Reverse a string.", reverse_string).param("message", String),
            Tool::read("caesar_decode", "Decode a Caesar cipher with the given shift.", caesar_decode)
                .param("message", String)
                .param("shift", Integer),
            Tool::read("caesar_encode", "Encode text with a Caesar cipher with the given shift.", caesar_encode)
                .param("message", String)
                .param("shift", Integer),
            Tool::read("string_count", "Count non-overlapping occurrences of a substring.", string_count)
                .param("message", String)
                .param("substring", String),
            // trade
            Tool::read("get_exchange_rate", "Units of to_currency per unit of from_currency.", get_exchange_rate)
                .param("from_currency", String)
                .param("to_currency", String),
            Tool::read("convert_currency", "Convert an amount between currencies, rounded to cents.", convert_currency)
                .param("amount", Number)
                .param("from_currency", String)
                .param("to_currency", String),
            Tool::read(
                "calculate_tariff",
                "Tariff owed: price * tariff_rate / 100, rounded to cents.",
                calculate_tariff,
            )
            .param("price", Number)
            .param("tariff_rate", Number),
            Tool::read(
                "estimate_shipping_cost",
                "Shipping cost: base fee + per-kg rate * weight_kg, rounded to cents.",
                estimate_shipping_cost,
            )
            .param("weight_kg", Number),
            Tool::read(
                "calculate_final_price",
                "Final price: price + tariff + shipping_cost, rounded to cents.",
                calculate_final_price,
            )
            .param("price", Number)
            .param("tariff_rate", Number)
            .param("shipping_cost", Number),
            Tool::read("list_currencies", "List supported currency codes.", list_currencies),
            check_answer_tool(),
        ])
        .expect("calc tool names are unique");
        CalcWorld { registry }
    }
}

impl World for CalcWorld {
    fn name(&self) -> &'static str {
        "calc"
    }

    fn generate(&self, seed: u64) -> EnvState {
        generate(seed)
    }

    fn registry(&self) -> &ToolRegistry {
        &self.registry
    }

    fn verification(&self) -> Verification {
        Verification::Answer
    }

    fn description(&self) -> String {
        "You are an assistant with calculation tools for travel planning, DNA sequences, message decoding \
and trade arithmetic. Use the tools to compute the requested value and submit it as your final answer."
            .to_string()
    }

    fn hidden_values(&self, state: &EnvState) -> Vec<String> {
        state.table("hotels").map(|t| t.keys().cloned().collect()).unwrap_or_default()
    }
}

const HOTEL_WORDS: &[&str] = &["Grand", "Harbor", "Summit", "Maple", "Royal", "Cedar", "Lakeside", "Central"];
const HOTEL_KINDS: &[&str] = &["Inn", "Hotel", "Suites", "Lodge"];

pub fn generate(seed: u64) -> EnvState {
    let mut rng = gen::rng(seed, 3);
    let mut state = EnvState::new("calc", seed);
    let mut n = 0;
    for from in LOCATIONS {
        for to in LOCATIONS {
            if from == to {
                continue;
            }
            for date in TRAVEL_DATES {
                for _ in 0..rng.random_range(0..=2) {
                    n += 1;
                    let key = format!("F{n:04}");
                    let price = gen::price(&mut rng, 40, 400);
                    state.table_mut("flights").insert(
                        key.clone(),
                        vmap! { "flight_id" => key.as_str(), "from_location" => *from, "to_location" => *to, "date" => *date, "price" => price },
                    );
                }
            }
        }
    }
    let mut taken = std::collections::BTreeSet::new();
    for location in LOCATIONS {
        for _ in 0..rng.random_range(2..=4) {
            let name = gen::unique(&mut rng, &mut taken, |r| {
                format!("{} {} {location}", gen::pick(r, HOTEL_WORDS), gen::pick(r, HOTEL_KINDS))
            });
            let amenities: Vec<Value> =
                AMENITIES.iter().filter(|_| rng.random_bool(0.55)).map(|a| Value::str(*a)).collect();
            let price = gen::price(&mut rng, 20, 200);
            state.table_mut("hotels").insert(
                name.clone(),
                vmap! { "name" => name.as_str(), "location" => *location, "price_per_night" => price, "amenities" => Value::List(amenities) },
            );
        }
    }
    // Rates are units per USD.
    for c in CURRENCIES {
        let rate = match *c {
            "USD" => 1.0,
            "JPY" => (rng.random_range(13_000..16_000) as f64) / 100.0,
            "CNY" => (rng.random_range(650..760) as f64) / 100.0,
            _ => (rng.random_range(70..140) as f64) / 100.0,
        };
        state.table_mut("rates").insert(c.to_string(), Value::Float(rate));
    }
    state.table_mut("shipping").extend([
        ("base_fee".to_string(), Value::Float(gen::price(&mut rng, 5, 20))),
        ("per_kg".to_string(), Value::Float(gen::price(&mut rng, 1, 6))),
    ]);
    state
}

fn list_values(state: &EnvState, table: &str, keep: impl Fn(&Value) -> bool) -> Value {
    Value::List(state.table(table).into_iter().flat_map(|t| t.values()).filter(|v| keep(v)).cloned().collect())
}

fn find_flights(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let (from, to, date) = (arg_str(args, "from_location")?, arg_str(args, "to_location")?, arg_str(args, "date")?);
    Ok(list_values(state, "flights", |f| {
        f.get("from_location").and_then(Value::as_str) == Some(from)
            && f.get("to_location").and_then(Value::as_str) == Some(to)
            && f.get("date").and_then(Value::as_str) == Some(date)
    }))
}

fn book_hotel(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let (location, pref) = (arg_str(args, "location")?, arg_str(args, "preference")?);
    let wanted = Value::str(pref);
    Ok(list_values(state, "hotels", |h| {
        h.get("location").and_then(Value::as_str) == Some(location)
            && h.get("amenities").and_then(Value::as_list).is_some_and(|a| a.contains(&wanted))
    }))
}

fn budget_calculator(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let flight = arg_f64(args, "flight_price")?;
    let nightly = arg_f64(args, "hotel_price_per_night")?;
    let nights = arg_int(args, "num_nights")?;
    if nights < 0 {
        return Err(ToolError::invalid_argument("num_nights must be non-negative"));
    }
    Ok(Value::Float(gen::cents(flight + nightly * nights as f64)))
}

fn list_locations(_: &EnvState, _: &Args) -> Result<Value, ToolError> {
    Ok(Value::from(LOCATIONS.to_vec()))
}

fn get_hotel_details(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let name = arg_str(args, "name")?;
    state.record("hotels", name).cloned().ok_or_else(|| ToolError::not_found(format!("hotel {name}")))
}

pub fn is_valid_dna_sequence(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| matches!(c, 'A' | 'C' | 'G' | 'T'))
}

fn dna_arg(args: &Args) -> Result<&str, ToolError> {
    let s = arg_str(args, "sequence")?;
    if is_valid_dna_sequence(s) {
        Ok(s)
    } else {
        Err(ToolError::invalid_argument(format!("`{s}` is not a valid DNA sequence")))
    }
}

fn is_valid_dna(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    Ok(Value::Bool(is_valid_dna_sequence(arg_str(args, "sequence")?)))
}

fn count_nucleotides(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let s = dna_arg(args)?;
    let mut counts: BTreeMap<String, Value> =
        ["A", "C", "G", "T"].iter().map(|b| (b.to_string(), Value::Int(0))).collect();
    for c in s.chars() {
        if let Some(Value::Int(n)) = counts.get_mut(c.to_string().as_str()) {
            *n += 1;
        }
    }
    Ok(Value::Map(counts))
}

fn reverse_complement(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let s = dna_arg(args)?;
    Ok(Value::Str(
        s.chars()
            .rev()
            .map(|c| match c {
                'A' => 'T',
                'T' => 'A',
                'C' => 'G',
                _ => 'C',
            })
            .collect(),
    ))
}

fn gc_content(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let s = dna_arg(args)?;
    let gc = s.chars().filter(|c| matches!(c, 'G' | 'C')).count();
    Ok(Value::Float(gc as f64 / s.len() as f64))
}

fn transcribe(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    Ok(Value::Str(dna_arg(args)?.replace('T', "U")))
}

fn find_motif(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let s = dna_arg(args)?;
    let motif = arg_str(args, "motif")?;
    if motif.is_empty() {
        return Err(ToolError::invalid_argument("motif must not be empty"));
    }
    let positions =
        (0..=s.len().saturating_sub(motif.len())).filter(|&i| s[i..].starts_with(motif)).map(Value::from).collect();
    Ok(Value::List(positions))
}

fn hex_decode(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let h = arg_str(args, "hex_string")?;
    let bytes = hex::decode(h.trim()).map_err(|e| ToolError::invalid_argument(format!("invalid hex: {e}")))?;
    String::from_utf8(bytes)
        .map(Value::Str)
        .map_err(|_| ToolError::invalid_argument("decoded bytes are not UTF-8 text"))
}

fn hex_encode(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    Ok(Value::Str(hex::encode(arg_str(args, "message")?)))
}

fn reverse_string(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    Ok(Value::Str(arg_str(args, "message")?.chars().rev().collect()))
}

/// Shifts ASCII letters by `shift` positions, preserving case.
pub fn caesar(message: &str, shift: i64) -> String {
    let k = shift.rem_euclid(26) as u8;
    message
        .chars()
        .map(|c| match c {
            'a'..='z' => char::from(b'a' + (c as u8 - b'a' + k) % 26),
            'A'..='Z' => char::from(b'A' + (c as u8 - b'A' + k) % 26),
            other => other,
        })
        .collect()
}

fn caesar_decode(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    Ok(Value::Str(caesar(arg_str(args, "message")?, -arg_int(args, "shift")?)))
}

fn caesar_encode(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    Ok(Value::Str(caesar(arg_str(args, "message")?, arg_int(args, "shift")?)))
}

fn string_count(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let (m, sub) = (arg_str(args, "message")?, arg_str(args, "substring")?);
    if sub.is_empty() {
        return Err(ToolError::invalid_argument("substring must not be empty"));
    }
    Ok(Value::from(m.matches(sub).count()))
}

fn rate(state: &EnvState, currency: &str) -> Result<f64, ToolError> {
    state
        .record("rates", currency)
        .and_then(Value::as_f64)
        .ok_or_else(|| ToolError::not_found(format!("currency {currency}")))
}

fn get_exchange_rate(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let (from, to) = (arg_str(args, "from_currency")?, arg_str(args, "to_currency")?);
    let r = rate(state, to)? / rate(state, from)?;
    Ok(Value::Float(format!("{r:.6}").parse().unwrap_or(r)))
}

fn convert_currency(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let amount = arg_f64(args, "amount")?;
    let (from, to) = (arg_str(args, "from_currency")?, arg_str(args, "to_currency")?);
    Ok(Value::Float(gen::cents(amount / rate(state, from)? * rate(state, to)?)))
}

fn calculate_tariff(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    Ok(Value::Float(gen::cents(arg_f64(args, "price")? * arg_f64(args, "tariff_rate")? / 100.0)))
}

fn estimate_shipping_cost(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let w = arg_f64(args, "weight_kg")?;
    if w < 0.0 {
        return Err(ToolError::invalid_argument("weight_kg must be non-negative"));
    }
    let base = state.record("shipping", "base_fee").and_then(Value::as_f64).unwrap_or(0.0);
    let per_kg = state.record("shipping", "per_kg").and_then(Value::as_f64).unwrap_or(0.0);
    Ok(Value::Float(gen::cents(base + per_kg * w)))
}

fn calculate_final_price(_: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let price = arg_f64(args, "price")?;
    let tariff = price * arg_f64(args, "tariff_rate")? / 100.0;
    Ok(Value::Float(gen::cents(price + tariff + arg_f64(args, "shipping_cost")?)))
}

fn list_currencies(_: &EnvState, _: &Args) -> Result<Value, ToolError> {
    Ok(Value::from(CURRENCIES.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Access;

    fn call(name: &str, args: Value) -> Value {
        let world = CalcWorld::new();
        let mut s = world.generate(1);
        world.registry().call(&mut s, Access::Full, name, args.as_map().unwrap()).unwrap()
    }

    #[test]
    fn dna_validity() {
        assert_eq!(call("is_valid_dna_sequence", vmap! { "sequence" => "XYZABC" }), Value::Bool(false));
        assert_eq!(call("is_valid_dna_sequence", vmap! { "sequence" => "GTCAGT" }), Value::Bool(true));
    }

    #[test]
    fn zero_hotel_budget() {
        let v =
            call("budget_calculator", vmap! { "flight_price" => 100, "hotel_price_per_night" => 0, "num_nights" => 4 });
        assert_eq!(v.as_f64(), Some(100.0));
    }

    #[test]
    fn decode_pipeline_inverts_encoding() {
        let original = "meet me at noon";
        // Oracle: encode with shift 3, reverse, hex-encode; decoding undoes each step.
        let encoded = hex::encode(caesar(original, 3).chars().rev().collect::<String>());
        let step1 = call("hex_decode", vmap! { "hex_string" => encoded.as_str() });
        let step2 = call("reverse_string", vmap! { "message" => step1 });
        let step3 = call("caesar_decode", vmap! { "message" => step2, "shift" => 3 });
        assert_eq!(step3, Value::str(original));
    }
}
