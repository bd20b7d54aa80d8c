//! Shared fixture vocabulary and random helpers for world generation.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type WorldRng = ChaCha8Rng;

/// Each world salts the seed so equal seeds give unrelated worlds.
pub fn rng(seed: u64, salt: u64) -> WorldRng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub const FIRST_NAMES: &[&str] = &[
    "Noah", "Aarav", "Mia", "Olivia", "Liam", "Emma", "Yusuf", "Sofia", "Lucas", "Amelia", "Ethan", "Isabella", "Mei",
    "Omar", "Chen", "Fatima", "Raj", "Harper", "Mason", "Ava", "Ivan", "Lena", "Juan", "Aisha",
];

pub const LAST_NAMES: &[&str] = &[
    "Brown",
    "Garcia",
    "Smith",
    "Nguyen",
    "Kim",
    "Patel",
    "Lopez",
    "Muller",
    "Rossi",
    "Khan",
    "Silva",
    "Ito",
    "Wilson",
    "Moore",
    "Santos",
    "Johansson",
    "Ali",
    "Davis",
    "Clark",
    "Lee",
];

/// (city, state, zip prefix)
pub const CITIES: &[(&str, &str, &str)] = &[
    ("Denver", "CO", "80"),
    ("Austin", "TX", "78"),
    ("Seattle", "WA", "98"),
    ("Boston", "MA", "02"),
    ("Chicago", "IL", "60"),
    ("Phoenix", "AZ", "85"),
    ("Portland", "OR", "97"),
    ("Atlanta", "GA", "30"),
];

pub const STREETS: &[&str] = &[
    "Sunset Drive",
    "Maple Avenue",
    "Oak Street",
    "Pine Lane",
    "Elm Court",
    "Cedar Road",
    "Lakeview Drive",
    "Hillcrest Way",
];

pub fn pick<'a, T>(rng: &mut WorldRng, items: &'a [T]) -> &'a T {
    items.choose(rng).expect("non-empty vocabulary")
}

/// Decimal string of exactly `n` digits with a nonzero leading digit.
pub fn digits(rng: &mut WorldRng, n: usize) -> String {
    let mut s = String::with_capacity(n);
    s.push(char::from(b'1' + rng.random_range(0..9u8)));
    for _ in 1..n {
        s.push(char::from(b'0' + rng.random_range(0..10u8)));
    }
    s
}

/// Price in cents resolution, as a float with at most two decimals.
pub fn price(rng: &mut WorldRng, lo: u32, hi: u32) -> f64 {
    cents(rng.random_range(lo * 100..=hi * 100) as f64 / 100.0)
}

/// Rounds to two decimals via decimal formatting.
pub fn cents(x: f64) -> f64 {
    format!("{x:.2}").parse().unwrap_or(x)
}

/// Draws a fresh value from `make` that is not yet in `taken`.
pub fn unique(
    rng: &mut WorldRng,
    taken: &mut std::collections::BTreeSet<String>,
    mut make: impl FnMut(&mut WorldRng) -> String,
) -> String {
    loop {
        let candidate = make(rng);
        if taken.insert(candidate.clone()) {
            return candidate;
        }
    }
}
