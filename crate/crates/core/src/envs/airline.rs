//! Airline booking world: flights by number and date, reservations and
//! their payment histories.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use super::gen;
use super::Scale;
use crate::ctl::{ToolError, ToolErrorKind, Value};
use crate::env::{arg_int, arg_list, arg_str, Args, EnvState, ParamType, Tool, ToolRegistry, Verification, World};
use crate::vmap;

pub const AIRPORTS: &[(&str, &str)] = &[
    ("ATL", "Atlanta"),
    ("BOS", "Boston"),
    ("DEN", "Denver"),
    ("DFW", "Dallas"),
    ("JFK", "New York"),
    ("LAS", "Las Vegas"),
    ("LAX", "Los Angeles"),
    ("MIA", "Miami"),
    ("ORD", "Chicago"),
    ("PHL", "Philadelphia"),
    ("SEA", "Seattle"),
    ("SFO", "San Francisco"),
];

pub const CABINS: &[&str] = &["basic_economy", "economy", "business"];

/// Flight dates run over ten consecutive days starting 2024-05-15.
pub const FIRST_DAY: u32 = 15;
pub const DAYS: u32 = 10;

pub fn date(day: u32) -> String {
    format!("2024-05-{day:02}")
}

pub fn flight_key(number: &str, date: &str) -> String {
    format!("{number}/{date}")
}

pub const BAG_FEE: f64 = 50.0;

pub struct AirlineWorld {
    scale: Scale,
    registry: ToolRegistry,
}

impl AirlineWorld {
    pub fn new(scale: Scale) -> AirlineWorld {
        let registry = ToolRegistry::new(vec![
            Tool::read(
                "get_user_details",
                "Get the details of a user, including their reservations.",
                get_user_details,
            )
            .param("user_id", ParamType::String),
            Tool::read("get_reservation_details", "Get the details of a reservation.", get_reservation_details)
                .param("reservation_id", ParamType::String),
            Tool::read(
                "search_direct_flight",
                "Search direct flights between two airports on a date (YYYY-MM-DD).",
                search_direct_flight,
            )
            .param("origin", ParamType::String)
            .param("destination", ParamType::String)
            .param("date", ParamType::String),
            Tool::read("list_all_airports", "List all airport codes and their cities.", list_all_airports),
            Tool::write(
                "update_reservation_flights",
                "Replace the flights and cabin of a reservation. Each flight is a map with flight_number and \
date. The fare difference is charged or refunded to payment_id.",
                update_reservation_flights,
            )
            .param("reservation_id", ParamType::String)
            .param("cabin", ParamType::String)
            .param("flights", ParamType::List)
            .param("payment_id", ParamType::String),
            Tool::write(
                "update_reservation_baggages",
                "Set the baggage counts of a reservation; each added non-free bag costs 50.",
                update_reservation_baggages,
            )
            .param("reservation_id", ParamType::String)
            .param("total_baggages", ParamType::Integer)
            .param("nonfree_baggages", ParamType::Integer)
            .param("payment_id", ParamType::String),
            Tool::write(
                "cancel_reservation",
                "Cancel an active reservation and refund every payment.",
                cancel_reservation,
            )
            .param("reservation_id", ParamType::String),
        ])
        .expect("airline tool names are unique");
        AirlineWorld { scale, registry }
    }
}

impl World for AirlineWorld {
    fn name(&self) -> &'static str {
        "airline"
    }

    fn generate(&self, seed: u64) -> EnvState {
        generate(seed, self.scale)
    }

    fn registry(&self) -> &ToolRegistry {
        &self.registry
    }

    fn verification(&self) -> Verification {
        Verification::State
    }

    fn description(&self) -> String {
        "You are an airline reservation agent. Authenticate the user by user id before acting. You can \
change the flights and cabin of an active reservation, update its baggage, or cancel it. Confirm the \
details with the user before any change."
            .to_string()
    }

    fn hidden_values(&self, state: &EnvState) -> Vec<String> {
        let mut out = Vec::new();
        for user in state.table("users").into_iter().flat_map(|t| t.values()) {
            out.extend(user.get("email").and_then(Value::as_str).map(str::to_string));
            if let Some(pms) = user.get("payment_methods").and_then(Value::as_map) {
                out.extend(pms.keys().cloned());
            }
        }
        out
    }
}

fn reservation_id(rng: &mut gen::WorldRng) -> String {
    const LETTERS: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZ";
    const ALNUM: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZ0123456789";
    let mut s = String::new();
    s.push(char::from(*gen::pick(rng, LETTERS)));
    for _ in 0..5 {
        s.push(char::from(*gen::pick(rng, ALNUM)));
    }
    s
}

pub fn generate(seed: u64, scale: Scale) -> EnvState {
    let mut rng = gen::rng(seed, 2);
    let mut state = EnvState::new("airline", seed);
    let mut ids = BTreeSet::new();

    let airports: BTreeMap<String, Value> =
        AIRPORTS.iter().map(|(code, city)| (code.to_string(), Value::str(*city))).collect();
    state.table_mut("airports").extend(airports);

    // Routes come in there-and-back pairs so round trips are always bookable.
    let pairs = match scale {
        Scale::Small => 8,
        Scale::Medium => 20,
    };
    let mut routes: Vec<(String, &str, &str)> = Vec::new();
    for _ in 0..pairs {
        let mut codes: Vec<&str> = AIRPORTS.iter().map(|a| a.0).collect();
        codes.shuffle(&mut rng);
        let (a, b) = (codes[0], codes[1]);
        for (o, d) in [(a, b), (b, a)] {
            let number = gen::unique(&mut rng, &mut ids, |r| format!("HAT{:03}", r.random_range(1..1000)));
            routes.push((number, o, d));
        }
    }
    for (number, origin, destination) in &routes {
        let hour = rng.random_range(5..22);
        for day in FIRST_DAY..FIRST_DAY + DAYS {
            let base = gen::price(&mut rng, 60, 200);
            let prices = vmap! {
                "basic_economy" => base,
                "economy" => gen::cents(base * 1.6),
                "business" => gen::cents(base * 3.5),
            };
            let d = date(day);
            state.table_mut("flights").insert(
                flight_key(number, &d),
                vmap! {
                    "flight_number" => number.as_str(),
                    "date" => d.as_str(),
                    "origin" => *origin,
                    "destination" => *destination,
                    "scheduled_departure_time_est" => format!("{hour:02}:00:00"),
                    "status" => "available",
                    "prices" => prices,
                },
            );
        }
    }

    for _ in 0..scale.users() {
        let first = *gen::pick(&mut rng, gen::FIRST_NAMES);
        let last = *gen::pick(&mut rng, gen::LAST_NAMES);
        let user_id = gen::unique(&mut rng, &mut ids, |r| {
            format!("{}_{}_{}", first.to_lowercase(), last.to_lowercase(), gen::digits(r, 4))
        });
        let mut pms = BTreeMap::new();
        let cc = gen::unique(&mut rng, &mut ids, |r| format!("credit_card_{}", gen::digits(r, 7)));
        pms.insert(
            cc.clone(),
            vmap! { "source" => "credit_card", "brand" => *gen::pick(&mut rng, &["visa", "mastercard"]), "last_four" => gen::digits(&mut rng, 4), "id" => cc.as_str() },
        );
        let gc = gen::unique(&mut rng, &mut ids, |r| format!("gift_card_{}", gen::digits(r, 7)));
        pms.insert(
            gc.clone(),
            vmap! { "source" => "gift_card", "amount" => gen::price(&mut rng, 50, 500), "id" => gc.as_str() },
        );
        let pm_ids: Vec<String> = pms.keys().cloned().collect();

        let mut reservation_ids = Vec::new();
        for _ in 0..3 {
            let rid = gen::unique(&mut rng, &mut ids, reservation_id);
            let pair = rng.random_range(0..pairs);
            let (out, back) = (&routes[2 * pair], &routes[2 * pair + 1]);
            let round_trip = rng.random_bool(0.5);
            let day = rng.random_range(FIRST_DAY..FIRST_DAY + DAYS - 3);
            let cabin = *gen::pick(&mut rng, CABINS);
            let mut legs = vec![(out, day)];
            if round_trip {
                legs.push((back, day + rng.random_range(1..=3)));
            }
            let passengers: Vec<Value> = (0..rng.random_range(1..=3))
                .map(|i| {
                    let (f, l) = if i == 0 {
                        (first, last)
                    } else {
                        (*gen::pick(&mut rng, gen::FIRST_NAMES), *gen::pick(&mut rng, gen::LAST_NAMES))
                    };
                    vmap! { "first_name" => f, "last_name" => l }
                })
                .collect();
            let mut flights = Vec::new();
            let mut fare = 0.0;
            for ((number, o, d), day) in legs {
                let dt = date(day);
                let price = state
                    .record("flights", &flight_key(number, &dt))
                    .and_then(|f| f.get("prices"))
                    .and_then(|p| p.get(cabin))
                    .and_then(Value::as_f64)
                    .unwrap_or(0.0);
                fare += price;
                flights.push(vmap! { "flight_number" => number.as_str(), "date" => dt, "origin" => *o, "destination" => *d, "price" => price });
            }
            let total = gen::cents(fare * passengers.len() as f64);
            let bags = rng.random_range(0..=2);
            let status = if rng.random_bool(0.9) { "active" } else { "cancelled" };
            let payment = gen::pick(&mut rng, &pm_ids).clone();
            let mut history = vec![vmap! { "payment_id" => payment.as_str(), "amount" => total }];
            if status == "cancelled" {
                history.push(vmap! { "payment_id" => payment.as_str(), "amount" => -total });
            }
            state.table_mut("reservations").insert(
                rid.clone(),
                vmap! {
                    "reservation_id" => rid.as_str(),
                    "user_id" => user_id.as_str(),
                    "origin" => out.1,
                    "destination" => out.2,
                    "flight_type" => if round_trip { "round_trip" } else { "one_way" },
                    "cabin" => cabin,
                    "flights" => Value::List(flights),
                    "passengers" => Value::List(passengers),
                    "payment_history" => Value::List(history),
                    "total_baggages" => bags,
                    "nonfree_baggages" => 0,
                    "insurance" => if rng.random_bool(0.3) { "yes" } else { "no" },
                    "status" => status,
                },
            );
            reservation_ids.push(Value::Str(rid));
        }
        state.table_mut("users").insert(
            user_id.clone(),
            vmap! {
                "user_id" => user_id.as_str(),
                "name" => vmap! { "first_name" => first, "last_name" => last },
                "email" => format!("{}.{}{}@example.com", first.to_lowercase(), last.to_lowercase(), gen::digits(&mut rng, 3)),
                "membership" => *gen::pick(&mut rng, &["regular", "silver", "gold"]),
                "payment_methods" => Value::Map(pms),
                "reservations" => Value::List(reservation_ids),
            },
        );
    }
    state
}

fn field_str<'a>(v: &'a Value, key: &str) -> &'a str {
    v.get(key).and_then(Value::as_str).unwrap_or("")
}

fn lookup<'a>(state: &'a EnvState, table: &str, what: &str, key: &str) -> Result<&'a Value, ToolError> {
    state.record(table, key).ok_or_else(|| ToolError::not_found(format!("{what} {key}")))
}

fn get_user_details(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    lookup(state, "users", "user", arg_str(args, "user_id")?).cloned()
}

fn get_reservation_details(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    lookup(state, "reservations", "reservation", arg_str(args, "reservation_id")?).cloned()
}

fn search_direct_flight(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let (origin, destination, date) = (arg_str(args, "origin")?, arg_str(args, "destination")?, arg_str(args, "date")?);
    let found = state
        .table("flights")
        .into_iter()
        .flat_map(|t| t.values())
        .filter(|f| {
            field_str(f, "origin") == origin
                && field_str(f, "destination") == destination
                && field_str(f, "date") == date
        })
        .cloned()
        .collect();
    Ok(Value::List(found))
}

fn list_all_airports(state: &EnvState, _: &Args) -> Result<Value, ToolError> {
    Ok(Value::Map(state.table("airports").cloned().unwrap_or_default()))
}

fn active_reservation<'a>(state: &'a EnvState, rid: &str) -> Result<&'a Value, ToolError> {
    let r = lookup(state, "reservations", "reservation", rid)?;
    match field_str(r, "status") {
        "active" => Ok(r),
        other => Err(ToolError::new(
            ToolErrorKind::IneligibleStatus,
            format!("reservation {rid} is {other}; only active reservations can be changed"),
        )),
    }
}

fn require_payment(state: &EnvState, reservation: &Value, payment_id: &str) -> Result<(), ToolError> {
    let user = lookup(state, "users", "user", field_str(reservation, "user_id"))?;
    if user.get("payment_methods").and_then(|m| m.get(payment_id)).is_some() {
        Ok(())
    } else {
        Err(ToolError::not_found(format!("payment method {payment_id}")))
    }
}

fn reservation_mut<'a>(state: &'a mut EnvState, rid: &str) -> &'a mut BTreeMap<String, Value> {
    state
        .record_mut("reservations", rid)
        .and_then(Value::as_map_mut)
        .expect("reservation existence checked before mutation")
}

fn push_payment(reservation: &mut BTreeMap<String, Value>, payment_id: &str, amount: f64) {
    if let Some(Value::List(h)) = reservation.get_mut("payment_history") {
        h.push(vmap! { "payment_id" => payment_id, "amount" => gen::cents(amount) });
    }
}

fn update_reservation_flights(state: &mut EnvState, args: &Args) -> Result<Value, ToolError> {
    let rid = arg_str(args, "reservation_id")?;
    let cabin = arg_str(args, "cabin")?;
    let wanted = arg_list(args, "flights")?;
    let payment_id = arg_str(args, "payment_id")?;
    let reservation = active_reservation(state, rid)?;
    if !CABINS.contains(&cabin) {
        return Err(ToolError::invalid_argument(format!("unknown cabin `{cabin}`")));
    }
    if wanted.is_empty() {
        return Err(ToolError::invalid_argument("flights must not be empty"));
    }
    let mut legs = Vec::new();
    let mut new_fare = 0.0;
    for f in wanted {
        let (Some(number), Some(date)) =
            (f.get("flight_number").and_then(Value::as_str), f.get("date").and_then(Value::as_str))
        else {
            return Err(ToolError::type_mismatch("each flight must be a map with string flight_number and date"));
        };
        let flight = lookup(state, "flights", "flight", &flight_key(number, date))?;
        let price = flight.get("prices").and_then(|p| p.get(cabin)).and_then(Value::as_f64).unwrap_or(0.0);
        new_fare += price;
        legs.push(vmap! {
            "flight_number" => number,
            "date" => date,
            "origin" => field_str(flight, "origin"),
            "destination" => field_str(flight, "destination"),
            "price" => price,
        });
    }
    require_payment(state, reservation, payment_id)?;
    let old_fare: f64 = reservation
        .get("flights")
        .and_then(Value::as_list)
        .unwrap_or(&[])
        .iter()
        .filter_map(|f| f.get("price").and_then(Value::as_f64))
        .sum();
    let passengers = reservation.get("passengers").and_then(Value::as_list).map_or(1, <[Value]>::len) as f64;
    let r = reservation_mut(state, rid);
    r.insert("flights".into(), Value::List(legs));
    r.insert("cabin".into(), Value::str(cabin));
    push_payment(r, payment_id, (new_fare - old_fare) * passengers);
    Ok(Value::Map(r.clone()))
}

fn update_reservation_baggages(state: &mut EnvState, args: &Args) -> Result<Value, ToolError> {
    let rid = arg_str(args, "reservation_id")?;
    let total = arg_int(args, "total_baggages")?;
    let nonfree = arg_int(args, "nonfree_baggages")?;
    let payment_id = arg_str(args, "payment_id")?;
    let reservation = active_reservation(state, rid)?;
    if total < 0 || nonfree < 0 || nonfree > total {
        return Err(ToolError::invalid_argument("need 0 <= nonfree_baggages <= total_baggages"));
    }
    require_payment(state, reservation, payment_id)?;
    let old_nonfree = reservation.get("nonfree_baggages").and_then(Value::as_int).unwrap_or(0);
    let r = reservation_mut(state, rid);
    r.insert("total_baggages".into(), Value::Int(total));
    r.insert("nonfree_baggages".into(), Value::Int(nonfree));
    let added = (nonfree - old_nonfree).max(0);
    if added > 0 {
        push_payment(r, payment_id, BAG_FEE * added as f64);
    }
    Ok(Value::Map(r.clone()))
}

fn cancel_reservation(state: &mut EnvState, args: &Args) -> Result<Value, ToolError> {
    let rid = arg_str(args, "reservation_id")?;
    let reservation = active_reservation(state, rid)?;
    let refunds: Vec<(String, f64)> = reservation
        .get("payment_history")
        .and_then(Value::as_list)
        .unwrap_or(&[])
        .iter()
        .filter_map(|p| {
            let amount = p.get("amount").and_then(Value::as_f64)?;
            (amount > 0.0).then(|| (field_str(p, "payment_id").to_string(), amount))
        })
        .collect();
    let r = reservation_mut(state, rid);
    r.insert("status".into(), Value::str("cancelled"));
    for (pid, amount) in refunds {
        push_payment(r, &pid, -amount);
    }
    Ok(Value::Map(r.clone()))
}

/// Checks referential invariants of an airline state.
pub fn check_invariants(state: &EnvState) -> Result<(), String> {
    let flights = state.table("flights").ok_or("missing flights table")?;
    let users = state.table("users").ok_or("missing users table")?;
    for (rid, r) in state.table("reservations").ok_or("missing reservations table")? {
        if field_str(r, "reservation_id") != rid || rid.len() != 6 || !rid.starts_with(|c: char| c.is_ascii_uppercase())
        {
            return Err(format!("malformed reservation id {rid}"));
        }
        if !users.contains_key(field_str(r, "user_id")) {
            return Err(format!("reservation {rid} has unknown user"));
        }
        for f in r.get("flights").and_then(Value::as_list).unwrap_or(&[]) {
            let key = flight_key(field_str(f, "flight_number"), field_str(f, "date"));
            if !flights.contains_key(&key) {
                return Err(format!("reservation {rid} references missing flight {key}"));
            }
        }
        if r.get("payment_history").and_then(Value::as_list).is_none_or(|h| h.is_empty()) {
            return Err(format!("reservation {rid} has empty payment history"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Access;

    #[test]
    fn generation_is_valid() {
        let s = generate(9, Scale::Small);
        check_invariants(&s).unwrap();
        assert_eq!(s.table("reservations").unwrap().len(), 30);
        assert_eq!(s.digest(), generate(9, Scale::Small).digest());
    }

    #[test]
    fn update_appends_payment() {
        let world = AirlineWorld::new(Scale::Small);
        let mut s = world.generate(9);
        let (rid, r) = s
            .table("reservations")
            .unwrap()
            .iter()
            .find(|(_, r)| field_str(r, "status") == "active")
            .map(|(k, v)| (k.clone(), v.clone()))
            .unwrap();
        let leg = &r.get("flights").unwrap().as_list().unwrap()[0];
        let pid = field_str(&r.get("payment_history").unwrap().as_list().unwrap()[0], "payment_id").to_string();
        let args = vmap! {
            "reservation_id" => rid.as_str(),
            "cabin" => "business",
            "flights" => Value::List(vec![vmap! { "flight_number" => field_str(leg, "flight_number"), "date" => field_str(leg, "date") }]),
            "payment_id" => pid.as_str(),
        };
        let out = world
            .registry()
            .call(&mut s, Access::Executor, "update_reservation_flights", args.as_map().unwrap())
            .unwrap();
        assert_eq!(field_str(&out, "cabin"), "business");
        let history = out.get("payment_history").unwrap().as_list().unwrap();
        assert_eq!(field_str(history.last().unwrap(), "payment_id"), pid);
        check_invariants(&s).unwrap();
    }
}
