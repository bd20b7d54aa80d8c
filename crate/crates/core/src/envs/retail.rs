//! Online retail customer service world.
//!
//! Orders move `pending -> cancelled`, `delivered -> return requested` and
//! `delivered -> exchange requested`. Pending orders may also have items
//! swapped for other variants of the same product.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::gen;
use super::Scale;
use crate::ctl::{ToolError, ToolErrorKind, Value};
use crate::env::{arg_str, arg_str_list, Args, EnvState, ParamType, Tool, ToolRegistry, Verification, World};
use crate::vmap;

pub const STATUSES: &[&str] = &["pending", "delivered", "cancelled", "return requested", "exchange requested"];
pub const CANCEL_REASONS: &[&str] = &["no longer needed", "ordered by mistake"];

struct ProductDef {
    name: &'static str,
    options: &'static [(&'static str, &'static [&'static str])],
    price: (u32, u32),
}

const CATALOG: &[ProductDef] = &[
    ProductDef {
        name: "Electric Kettle",
        options: &[
            ("capacity", &["1L", "1.5L", "2L"]),
            ("material", &["glass", "plastic", "stainless steel"]),
            ("color", &["black", "white", "silver"]),
        ],
        price: (120, 160),
    },
    ProductDef {
        name: "Gaming Mouse",
        options: &[
            ("color", &["black", "white", "RGB"]),
            ("sensor type", &["optical", "laser"]),
            ("connectivity", &["wired", "wireless"]),
        ],
        price: (130, 190),
    },
    ProductDef {
        name: "Backpack",
        options: &[
            ("color", &["green", "black", "grey", "navy"]),
            ("size", &["small", "medium", "large"]),
            ("material", &["polyester", "nylon", "leather"]),
        ],
        price: (180, 230),
    },
    ProductDef {
        name: "Water Bottle",
        options: &[
            ("capacity", &["500ml", "750ml", "1000ml"]),
            ("material", &["glass", "plastic", "stainless steel"]),
            ("color", &["red", "blue", "green", "black"]),
        ],
        price: (20, 60),
    },
    ProductDef {
        name: "Desk Lamp",
        options: &[
            ("color", &["black", "white", "silver"]),
            ("brightness", &["low", "medium", "high"]),
            ("power source", &["AC adapter", "USB", "battery"]),
        ],
        price: (80, 160),
    },
    ProductDef {
        name: "Running Shoes",
        options: &[
            ("size", &["8", "9", "10", "11"]),
            ("color", &["black", "white", "red"]),
            ("material", &["mesh", "synthetic"]),
        ],
        price: (90, 170),
    },
    ProductDef {
        name: "Wireless Earbuds",
        options: &[
            ("color", &["black", "white", "blue"]),
            ("battery life", &["4 hours", "6 hours", "8 hours"]),
            ("water resistance", &["IPX4", "IPX7", "not resistant"]),
        ],
        price: (60, 250),
    },
    ProductDef {
        name: "Office Chair",
        options: &[
            ("material", &["mesh", "leather", "fabric"]),
            ("color", &["black", "gray", "blue"]),
            ("armrest", &["fixed", "adjustable", "none"]),
        ],
        price: (250, 500),
    },
    ProductDef {
        name: "Coffee Maker",
        options: &[
            ("color", &["black", "stainless steel", "white"]),
            ("capacity", &["1 cup", "4 cups", "8 cups"]),
            ("type", &["drip", "espresso", "french press"]),
        ],
        price: (50, 300),
    },
    ProductDef {
        name: "Yoga Mat",
        options: &[
            ("thickness", &["4mm", "6mm", "8mm"]),
            ("material", &["PVC", "natural rubber", "TPE"]),
            ("color", &["pink", "purple", "green"]),
        ],
        price: (25, 120),
    },
    ProductDef {
        name: "T-Shirt",
        options: &[
            ("color", &["black", "white", "red", "blue"]),
            ("size", &["S", "M", "L", "XL"]),
            ("style", &["crew neck", "v-neck"]),
        ],
        price: (15, 60),
    },
    ProductDef {
        name: "Mechanical Keyboard",
        options: &[
            ("switch type", &["linear", "tactile", "clicky"]),
            ("backlight", &["none", "white", "RGB"]),
            ("size", &["full size", "80%", "60%"]),
        ],
        price: (90, 280),
    },
];

pub struct RetailWorld {
    scale: Scale,
    registry: ToolRegistry,
}

impl RetailWorld {
    pub fn new(scale: Scale) -> RetailWorld {
        let registry = ToolRegistry::new(vec![
            Tool::read("get_user_details", "Get the details of a user, including their orders.", get_user_details)
                .param("user_id", ParamType::String),
            Tool::read("get_order_details", "Get the status and details of an order.", get_order_details)
                .param("order_id", ParamType::String),
            Tool::read("get_product_details", "Get the inventory details of a product.", get_product_details)
                .param("product_id", ParamType::String),
            Tool::read(
                "find_user_id_by_name_zip",
                "Find a user id by first name, last name and zip code.",
                find_user_id_by_name_zip,
            )
            .param("first_name", ParamType::String)
            .param("last_name", ParamType::String)
            .param("zip", ParamType::String),
            Tool::read("find_user_id_by_email", "Find a user id by email.", find_user_id_by_email)
                .param("email", ParamType::String),
            Tool::write(
                "cancel_order",
                "Cancel a pending order. The reason is either 'no longer needed' or 'ordered by mistake'.",
                cancel_order,
            )
            .param("order_id", ParamType::String)
            .param("reason", ParamType::String),
            Tool::write(
                "return_delivered_order_items",
                "Request a return of some items of a delivered order, refunded to the given payment method.",
                return_delivered_order_items,
            )
            .param("order_id", ParamType::String)
            .param("item_ids", ParamType::List)
            .param("payment_method_id", ParamType::String),
            Tool::write(
                "exchange_delivered_order_items",
                "Exchange items of a delivered order for other available variants of the same products.",
                exchange_delivered_order_items,
            )
            .param("order_id", ParamType::String)
            .param("item_ids", ParamType::List)
            .param("new_item_ids", ParamType::List)
            .param("payment_method_id", ParamType::String),
            Tool::write(
                "modify_pending_order_items",
                "Swap items of a pending order for other available variants of the same products.",
                modify_pending_order_items,
            )
            .param("order_id", ParamType::String)
            .param("item_ids", ParamType::List)
            .param("new_item_ids", ParamType::List)
            .param("payment_method_id", ParamType::String),
        ])
        .expect("retail tool names are unique");
        RetailWorld { scale, registry }
    }
}

impl World for RetailWorld {
    fn name(&self) -> &'static str {
        "retail"
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
        "You are a customer service agent for an online retail store. Authenticate the user by email or by \
name and zip code before acting. Pending orders can be cancelled or have items modified; delivered orders \
can have items returned or exchanged. Confirm the details with the user before any change."
            .to_string()
    }

    fn hidden_values(&self, state: &EnvState) -> Vec<String> {
        let mut out = Vec::new();
        for user in state.table("users").into_iter().flat_map(|t| t.values()) {
            out.extend(user.get("email").and_then(Value::as_str).map(str::to_string));
        }
        for order in state.table("orders").into_iter().flat_map(|t| t.values()) {
            for item in order.get("items").and_then(Value::as_list).unwrap_or(&[]) {
                out.extend(item.get("item_id").and_then(Value::as_str).map(str::to_string));
            }
        }
        out
    }
}

fn variant_combinations(def: &ProductDef) -> Vec<Vec<(&'static str, &'static str)>> {
    let mut combos: Vec<Vec<(&str, &str)>> = vec![Vec::new()];
    for (key, values) in def.options {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut next = c.clone();
                    next.push((key, v));
                    next
                })
            })
            .collect();
    }
    combos
}

fn options_value(opts: &[(&str, &str)]) -> Value {
    Value::Map(opts.iter().map(|(k, v)| (k.to_string(), Value::str(*v))).collect())
}

/// (item_id, price, options, available)
type Variant = (String, f64, Value, bool);

pub fn generate(seed: u64, scale: Scale) -> EnvState {
    let mut rng = gen::rng(seed, 1);
    let mut state = EnvState::new("retail", seed);
    let mut ids = BTreeSet::new();

    let mut variants_by_product: Vec<(String, &ProductDef, Vec<Variant>)> = Vec::new();
    for def in CATALOG {
        let product_id = gen::unique(&mut rng, &mut ids, |r| gen::digits(r, 10));
        let mut combos = variant_combinations(def);
        combos.shuffle(&mut rng);
        let n = rng.random_range(4..=6).min(combos.len());
        let mut variants = Vec::new();
        for (i, combo) in combos.into_iter().take(n).enumerate() {
            let item_id = gen::unique(&mut rng, &mut ids, |r| gen::digits(r, 10));
            let price = gen::price(&mut rng, def.price.0, def.price.1);
            // At least two variants stay available so exchanges are always possible.
            let available = i < 2 || rng.random_bool(0.7);
            variants.push((item_id, price, options_value(&combo), available));
        }
        let variant_map = variants
            .iter()
            .map(|(item_id, price, options, available)| {
                (
                    item_id.clone(),
                    vmap! {
                        "item_id" => item_id.as_str(),
                        "options" => options.clone(),
                        "available" => *available,
                        "price" => *price,
                    },
                )
            })
            .collect();
        state.table_mut("products").insert(
            product_id.clone(),
            vmap! { "name" => def.name, "product_id" => product_id.as_str(), "variants" => Value::Map(variant_map) },
        );
        variants_by_product.push((product_id, def, variants));
    }

    let mut user_ids = Vec::new();
    let mut user_pms: Vec<Vec<String>> = Vec::new();
    let mut user_addr = Vec::new();
    for _ in 0..scale.users() {
        let first = *gen::pick(&mut rng, gen::FIRST_NAMES);
        let last = *gen::pick(&mut rng, gen::LAST_NAMES);
        let user_id = gen::unique(&mut rng, &mut ids, |r| {
            format!("{}_{}_{}", first.to_lowercase(), last.to_lowercase(), gen::digits(r, 4))
        });
        let email = gen::unique(&mut rng, &mut ids, |r| {
            format!("{}.{}{}@example.com", first.to_lowercase(), last.to_lowercase(), gen::digits(r, 4))
        });
        let &(city, st, zip_prefix) = gen::pick(&mut rng, gen::CITIES);
        let address = vmap! {
            "address1" => format!("{} {}", rng.random_range(100..999), gen::pick(&mut rng, gen::STREETS)),
            "address2" => format!("Suite {}", rng.random_range(100..999)),
            "city" => city,
            "country" => "USA",
            "state" => st,
            "zip" => format!("{zip_prefix}{}", gen::digits(&mut rng, 3)),
        };
        let mut pms = std::collections::BTreeMap::new();
        let cc = gen::unique(&mut rng, &mut ids, |r| format!("credit_card_{}", gen::digits(r, 7)));
        let brand = *gen::pick(&mut rng, &["visa", "mastercard"]);
        pms.insert(
            cc.clone(),
            vmap! { "source" => "credit_card", "brand" => brand, "last_four" => gen::digits(&mut rng, 4), "id" => cc.as_str() },
        );
        let mut pm_ids = vec![cc];
        if rng.random_bool(0.5) {
            let pp = gen::unique(&mut rng, &mut ids, |r| format!("paypal_{}", gen::digits(r, 7)));
            pms.insert(pp.clone(), vmap! { "source" => "paypal", "id" => pp.as_str() });
            pm_ids.push(pp);
        }
        if rng.random_bool(0.5) {
            let gc = gen::unique(&mut rng, &mut ids, |r| format!("gift_card_{}", gen::digits(r, 7)));
            let balance = gen::price(&mut rng, 10, 200);
            pms.insert(gc.clone(), vmap! { "source" => "gift_card", "balance" => balance, "id" => gc.as_str() });
            pm_ids.push(gc);
        }
        state.table_mut("users").insert(
            user_id.clone(),
            vmap! {
                "user_id" => user_id.as_str(),
                "name" => vmap! { "first_name" => first, "last_name" => last },
                "address" => address.clone(),
                "email" => email,
                "payment_methods" => Value::Map(pms),
                "orders" => Value::List(Vec::new()),
            },
        );
        user_ids.push(user_id);
        user_pms.push(pm_ids);
        user_addr.push(address);
    }

    for k in 0..scale.orders() {
        // Round-robin owners so every user has at least one order.
        let owner = k % user_ids.len();
        let order_id = gen::unique(&mut rng, &mut ids, |r| format!("#W{}", gen::digits(r, 7)));
        let n_items = rng.random_range(1..=4);
        let mut product_idx: Vec<usize> = (0..variants_by_product.len()).collect();
        product_idx.shuffle(&mut rng);
        let mut items = Vec::new();
        let mut total = 0.0;
        for &p in product_idx.iter().take(n_items) {
            let (product_id, def, variants) = &variants_by_product[p];
            let (item_id, price, options, _) = gen::pick(&mut rng, variants);
            total += price;
            items.push(vmap! {
                "name" => def.name,
                "product_id" => product_id.as_str(),
                "item_id" => item_id.as_str(),
                "price" => *price,
                "options" => options.clone(),
            });
        }
        let total = gen::cents(total);
        let roll: f64 = rng.random();
        let status = if roll < 0.4 {
            "pending"
        } else if roll < 0.85 {
            "delivered"
        } else {
            "cancelled"
        };
        let pm = gen::pick(&mut rng, &user_pms[owner]).clone();
        let mut payments =
            vec![vmap! { "transaction_type" => "payment", "amount" => total, "payment_method_id" => pm.as_str() }];
        let item_ids: Vec<Value> = items.iter().filter_map(|i| i.get("item_id").cloned()).collect();
        let fulfillments = if status == "delivered" {
            vec![vmap! { "tracking_id" => vec![gen::digits(&mut rng, 12)], "item_ids" => Value::List(item_ids) }]
        } else {
            Vec::new()
        };
        let mut order = vmap! {
            "order_id" => order_id.as_str(),
            "user_id" => user_ids[owner].as_str(),
            "address" => user_addr[owner].clone(),
            "items" => Value::List(items),
            "fulfillments" => Value::List(fulfillments),
            "status" => status,
        };
        if status == "cancelled" {
            payments
                .push(vmap! { "transaction_type" => "refund", "amount" => total, "payment_method_id" => pm.as_str() });
            set(&mut order, "cancel_reason", Value::str(*gen::pick(&mut rng, CANCEL_REASONS)));
        }
        set(&mut order, "payment_history", Value::List(payments));
        state.table_mut("orders").insert(order_id.clone(), order);
        if let Some(Value::List(list)) =
            state.record_mut("users", &user_ids[owner]).and_then(Value::as_map_mut).and_then(|u| u.get_mut("orders"))
        {
            list.push(Value::Str(order_id));
        }
    }
    state
}

fn set(record: &mut Value, key: &str, v: Value) {
    if let Some(m) = record.as_map_mut() {
        m.insert(key.to_string(), v);
    }
}

fn lookup<'a>(state: &'a EnvState, table: &str, what: &str, key: &str) -> Result<&'a Value, ToolError> {
    state.record(table, key).ok_or_else(|| ToolError::not_found(format!("{what} {key}")))
}

fn field_str<'a>(v: &'a Value, key: &str) -> &'a str {
    v.get(key).and_then(Value::as_str).unwrap_or("")
}

fn get_user_details(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    lookup(state, "users", "user", arg_str(args, "user_id")?).cloned()
}

fn get_order_details(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    lookup(state, "orders", "order", arg_str(args, "order_id")?).cloned()
}

fn get_product_details(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    lookup(state, "products", "product", arg_str(args, "product_id")?).cloned()
}

fn find_user_id_by_name_zip(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let (first, last, zip) = (arg_str(args, "first_name")?, arg_str(args, "last_name")?, arg_str(args, "zip")?);
    state
        .table("users")
        .into_iter()
        .flat_map(|t| t.iter())
        .find(|(_, u)| {
            let name = u.get("name");
            name.and_then(|n| n.get("first_name"))
                .and_then(Value::as_str)
                .is_some_and(|f| f.eq_ignore_ascii_case(first))
                && name
                    .and_then(|n| n.get("last_name"))
                    .and_then(Value::as_str)
                    .is_some_and(|l| l.eq_ignore_ascii_case(last))
                && u.get("address").map(|a| field_str(a, "zip")) == Some(zip)
        })
        .map(|(id, _)| Value::str(id.as_str()))
        .ok_or_else(|| ToolError::not_found("user"))
}

fn find_user_id_by_email(state: &EnvState, args: &Args) -> Result<Value, ToolError> {
    let email = arg_str(args, "email")?;
    state
        .table("users")
        .into_iter()
        .flat_map(|t| t.iter())
        .find(|(_, u)| field_str(u, "email").eq_ignore_ascii_case(email))
        .map(|(id, _)| Value::str(id.as_str()))
        .ok_or_else(|| ToolError::not_found("user"))
}

fn require_status(order: &Value, order_id: &str, wanted: &str, action: &str) -> Result<(), ToolError> {
    let status = field_str(order, "status");
    if status == wanted {
        Ok(())
    } else {
        Err(ToolError::new(
            ToolErrorKind::IneligibleStatus,
            format!("order {order_id} is {status}; {action} requires status {wanted}"),
        ))
    }
}

fn require_payment_method(state: &EnvState, order: &Value, pm: &str) -> Result<(), ToolError> {
    let user = lookup(state, "users", "user", field_str(order, "user_id"))?;
    if user.get("payment_methods").and_then(|m| m.get(pm)).is_some() {
        Ok(())
    } else {
        Err(ToolError::not_found(format!("payment method {pm}")))
    }
}

fn order_item<'a>(order: &'a Value, item_id: &str) -> Option<&'a Value> {
    order.get("items")?.as_list()?.iter().find(|i| field_str(i, "item_id") == item_id)
}

fn invalid_item(msg: String) -> ToolError {
    ToolError::new(ToolErrorKind::InvalidItem, msg)
}

/// Checks item ids are non-empty, distinct and all in the order.
fn require_items(order: &Value, order_id: &str, item_ids: &[String]) -> Result<(), ToolError> {
    if item_ids.is_empty() {
        return Err(invalid_item("no item ids given".into()));
    }
    let mut seen = BTreeSet::new();
    for id in item_ids {
        if !seen.insert(id) {
            return Err(invalid_item(format!("item {id} listed twice")));
        }
        if order_item(order, id).is_none() {
            return Err(invalid_item(format!("item {id} is not in order {order_id}")));
        }
    }
    Ok(())
}

/// Validates a swap of `old` for `new` variants; returns the total price change.
fn swap_price_difference(
    state: &EnvState,
    order: &Value,
    order_id: &str,
    old: &[String],
    new: &[String],
) -> Result<f64, ToolError> {
    require_items(order, order_id, old)?;
    if old.len() != new.len() {
        return Err(ToolError::invalid_argument("item_ids and new_item_ids must have the same length"));
    }
    let mut diff = 0.0;
    for (old_id, new_id) in old.iter().zip(new) {
        let item = order_item(order, old_id).ok_or_else(|| invalid_item(format!("item {old_id} not in order")))?;
        if old_id == new_id {
            return Err(invalid_item(format!("new item {new_id} is the same as the old item")));
        }
        let product = lookup(state, "products", "product", field_str(item, "product_id"))?;
        let variant = product
            .get("variants")
            .and_then(|v| v.get(new_id))
            .ok_or_else(|| invalid_item(format!("item {new_id} is not a variant of {}", field_str(product, "name"))))?;
        if variant.get("available") != Some(&Value::Bool(true)) {
            return Err(invalid_item(format!("item {new_id} is not available")));
        }
        let new_price = variant.get("price").and_then(Value::as_f64).unwrap_or(0.0);
        let old_price = item.get("price").and_then(Value::as_f64).unwrap_or(0.0);
        diff += new_price - old_price;
    }
    Ok(gen::cents(diff))
}

fn order_mut<'a>(state: &'a mut EnvState, order_id: &str) -> &'a mut std::collections::BTreeMap<String, Value> {
    state.record_mut("orders", order_id).and_then(Value::as_map_mut).expect("order existence checked before mutation")
}

fn strings(ids: &[String]) -> Value {
    Value::List(ids.iter().map(|s| Value::str(s.as_str())).collect())
}

fn cancel_order(state: &mut EnvState, args: &Args) -> Result<Value, ToolError> {
    let order_id = arg_str(args, "order_id")?;
    let reason = arg_str(args, "reason")?;
    let order = lookup(state, "orders", "order", order_id)?;
    require_status(order, order_id, "pending", "cancellation")?;
    if !CANCEL_REASONS.contains(&reason) {
        return Err(ToolError::invalid_argument(format!(
            "reason must be 'no longer needed' or 'ordered by mistake', got '{reason}'"
        )));
    }
    let refunds: Vec<Value> = order
        .get("payment_history")
        .and_then(Value::as_list)
        .unwrap_or(&[])
        .iter()
        .filter(|p| field_str(p, "transaction_type") == "payment")
        .map(|p| {
            vmap! {
                "transaction_type" => "refund",
                "amount" => p.get("amount").cloned().unwrap_or(Value::Float(0.0)),
                "payment_method_id" => field_str(p, "payment_method_id"),
            }
        })
        .collect();
    let order = order_mut(state, order_id);
    order.insert("status".into(), Value::str("cancelled"));
    order.insert("cancel_reason".into(), Value::str(reason));
    if let Some(Value::List(history)) = order.get_mut("payment_history") {
        history.extend(refunds);
    }
    Ok(Value::Map(order.clone()))
}

fn return_delivered_order_items(state: &mut EnvState, args: &Args) -> Result<Value, ToolError> {
    let order_id = arg_str(args, "order_id")?;
    let item_ids = arg_str_list(args, "item_ids")?;
    let pm = arg_str(args, "payment_method_id")?;
    let order = lookup(state, "orders", "order", order_id)?;
    require_status(order, order_id, "delivered", "return")?;
    require_items(order, order_id, &item_ids)?;
    require_payment_method(state, order, pm)?;
    let order = order_mut(state, order_id);
    order.insert("status".into(), Value::str("return requested"));
    order.insert("return_items".into(), strings(&item_ids));
    order.insert("return_payment_method_id".into(), Value::str(pm));
    Ok(Value::Map(order.clone()))
}

fn exchange_delivered_order_items(state: &mut EnvState, args: &Args) -> Result<Value, ToolError> {
    let order_id = arg_str(args, "order_id")?;
    let item_ids = arg_str_list(args, "item_ids")?;
    let new_item_ids = arg_str_list(args, "new_item_ids")?;
    let pm = arg_str(args, "payment_method_id")?;
    let order = lookup(state, "orders", "order", order_id)?;
    require_status(order, order_id, "delivered", "exchange")?;
    let diff = swap_price_difference(state, order, order_id, &item_ids, &new_item_ids)?;
    require_payment_method(state, order, pm)?;
    let order = order_mut(state, order_id);
    order.insert("status".into(), Value::str("exchange requested"));
    order.insert("exchange_items".into(), strings(&item_ids));
    order.insert("exchange_new_items".into(), strings(&new_item_ids));
    order.insert("exchange_payment_method_id".into(), Value::str(pm));
    order.insert("exchange_price_difference".into(), Value::Float(diff));
    Ok(Value::Map(order.clone()))
}

fn modify_pending_order_items(state: &mut EnvState, args: &Args) -> Result<Value, ToolError> {
    let order_id = arg_str(args, "order_id")?;
    let item_ids = arg_str_list(args, "item_ids")?;
    let new_item_ids = arg_str_list(args, "new_item_ids")?;
    let pm = arg_str(args, "payment_method_id")?;
    let order = lookup(state, "orders", "order", order_id)?;
    require_status(order, order_id, "pending", "modification")?;
    let diff = swap_price_difference(state, order, order_id, &item_ids, &new_item_ids)?;
    require_payment_method(state, order, pm)?;
    // Resolve replacement variants before taking the mutable borrow.
    let mut replacements = Vec::new();
    for (old_id, new_id) in item_ids.iter().zip(&new_item_ids) {
        let item = order_item(order, old_id).cloned().unwrap_or(Value::Null);
        let variant = state
            .record("products", field_str(&item, "product_id"))
            .and_then(|p| p.get("variants"))
            .and_then(|v| v.get(new_id))
            .cloned()
            .unwrap_or(Value::Null);
        replacements.push((old_id.clone(), variant));
    }
    let order = order_mut(state, order_id);
    if let Some(Value::List(items)) = order.get_mut("items") {
        for (old_id, variant) in replacements {
            if let Some(Value::Map(item)) = items.iter_mut().find(|i| field_str(i, "item_id") == old_id) {
                for key in ["item_id", "price", "options"] {
                    item.insert(key.into(), variant.get(key).cloned().unwrap_or(Value::Null));
                }
            }
        }
    }
    if diff != 0.0 {
        let kind = if diff > 0.0 { "payment" } else { "refund" };
        if let Some(Value::List(history)) = order.get_mut("payment_history") {
            history.push(vmap! { "transaction_type" => kind, "amount" => diff.abs(), "payment_method_id" => pm });
        }
    }
    Ok(Value::Map(order.clone()))
}

/// Checks referential and status invariants of a retail state.
pub fn check_invariants(state: &EnvState) -> Result<(), String> {
    let users = state.table("users").ok_or("missing users table")?;
    let orders = state.table("orders").ok_or("missing orders table")?;
    for (id, order) in orders {
        let uid = field_str(order, "user_id");
        if !users.contains_key(uid) {
            return Err(format!("order {id} references unknown user {uid}"));
        }
        let status = field_str(order, "status");
        if !STATUSES.contains(&status) {
            return Err(format!("order {id} has unknown status {status}"));
        }
        if order.get("payment_history").and_then(Value::as_list).is_none_or(|h| h.is_empty()) {
            return Err(format!("order {id} has no payment history"));
        }
        for field in ["return_items", "exchange_items"] {
            for item in order.get(field).and_then(Value::as_list).unwrap_or(&[]) {
                let item = item.as_str().unwrap_or("");
                if order_item(order, item).is_none() {
                    return Err(format!("order {id} {field} lists {item} which is not in the order"));
                }
            }
        }
    }
    for (uid, user) in users {
        for oid in user.get("orders").and_then(Value::as_list).unwrap_or(&[]) {
            let oid = oid.as_str().unwrap_or("");
            match orders.get(oid) {
                Some(o) if field_str(o, "user_id") == uid => {}
                _ => return Err(format!("user {uid} lists order {oid} it does not own")),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctl::{ToolErrorKind, ToolFault};
    use crate::env::Access;

    fn call(world: &RetailWorld, state: &mut EnvState, name: &str, args: Value) -> Result<Value, ToolFault> {
        let Value::Map(args) = args else { panic!("args must be a map") };
        world.registry().call(state, Access::Executor, name, &args)
    }

    fn first_with_status(state: &EnvState, status: &str) -> Value {
        state.table("orders").unwrap().values().find(|o| field_str(o, "status") == status).unwrap().clone()
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let a = generate(42, Scale::Small);
        assert_eq!(a.digest(), generate(42, Scale::Small).digest());
        assert_ne!(a.digest(), generate(43, Scale::Small).digest());
        assert_eq!(a.table("users").unwrap().len(), 10);
        assert_eq!(a.table("orders").unwrap().len(), 50);
        check_invariants(&a).unwrap();
        assert!(a.table("orders").unwrap().keys().all(|k| k.len() == 9 && k.starts_with("#W")));
    }

    #[test]
    fn cancel_requires_pending() {
        let world = RetailWorld::new(Scale::Small);
        let mut state = world.generate(42);
        let delivered = first_with_status(&state, "delivered");
        let err = call(
            &world,
            &mut state,
            "cancel_order",
            vmap! { "order_id" => field_str(&delivered, "order_id"), "reason" => "no longer needed" },
        );
        assert!(matches!(err, Err(ToolFault::Failed(e)) if e.kind == ToolErrorKind::IneligibleStatus));
    }

    #[test]
    fn return_then_read_back() {
        let world = RetailWorld::new(Scale::Small);
        let mut state = world.generate(42);
        let order = first_with_status(&state, "delivered");
        let oid = field_str(&order, "order_id").to_string();
        let item = field_str(&order.get("items").unwrap().as_list().unwrap()[0], "item_id").to_string();
        let pm = order.get("payment_history").unwrap().as_list().unwrap()[0].get("payment_method_id").unwrap().clone();
        call(
            &world,
            &mut state,
            "return_delivered_order_items",
            vmap! { "order_id" => oid.as_str(), "item_ids" => vec![item.as_str()], "payment_method_id" => pm.clone() },
        )
        .unwrap();
        let back = call(&world, &mut state, "get_order_details", vmap! { "order_id" => oid.as_str() }).unwrap();
        assert_eq!(field_str(&back, "status"), "return requested");
        assert_eq!(back.get("return_items"), Some(&Value::from(vec![item.as_str()])));
        assert_eq!(back.get("return_payment_method_id"), Some(&pm));
        check_invariants(&state).unwrap();
    }

    #[test]
    fn failed_calls_do_not_mutate() {
        let world = RetailWorld::new(Scale::Small);
        let mut state = world.generate(7);
        let before = state.digest();
        let order = first_with_status(&state, "delivered");
        let err = call(
            &world,
            &mut state,
            "return_delivered_order_items",
            vmap! {
                "order_id" => field_str(&order, "order_id"), "item_ids" => vec!["0000000000"], "payment_method_id" => "x",
            },
        );
        assert!(matches!(err, Err(ToolFault::Failed(e)) if e.kind == ToolErrorKind::InvalidItem));
        assert_eq!(state.digest(), before);
    }
}
