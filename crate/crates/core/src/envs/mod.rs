//! The four concrete worlds and the answer matcher.

pub mod airline;
pub mod answer;
pub mod calc;
mod gen;
pub mod retail;
pub mod web;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use airline::AirlineWorld;
pub use answer::{match_answer, AnswerTask, MatchMode, NUMERIC_TOLERANCE};
pub use calc::CalcWorld;
pub use retail::RetailWorld;
pub use web::WebWorld;

use crate::env::{EnvState, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Retail,
    Airline,
    Calc,
    Web,
}

impl EnvKind {
    pub const ALL: [EnvKind; 4] = [EnvKind::Retail, EnvKind::Airline, EnvKind::Calc, EnvKind::Web];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Retail => "retail",
            EnvKind::Airline => "airline",
            EnvKind::Calc => "calc",
            EnvKind::Web => "web",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown environment `{0}` (expected retail, airline, calc or web)")]
pub struct UnknownEnv(pub String);

impl FromStr for EnvKind {
    type Err = UnknownEnv;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnvKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| UnknownEnv(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Small,
    Medium,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Small => "small",
            Scale::Medium => "medium",
        }
    }

    pub fn users(self) -> usize {
        match self {
            Scale::Small => 10,
            Scale::Medium => 100,
        }
    }

    pub fn orders(self) -> usize {
        match self {
            Scale::Small => 50,
            Scale::Medium => 500,
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "small" => Ok(Scale::Small),
            "medium" => Ok(Scale::Medium),
            other => Err(format!("unknown scale `{other}` (expected small or medium)")),
        }
    }
}

pub fn world(kind: EnvKind, scale: Scale) -> Arc<dyn World> {
    match kind {
        EnvKind::Retail => Arc::new(RetailWorld::new(scale)),
        EnvKind::Airline => Arc::new(AirlineWorld::new(scale)),
        EnvKind::Calc => Arc::new(CalcWorld::new()),
        EnvKind::Web => Arc::new(WebWorld::new(scale)),
    }
}

/// Deterministic in (kind, seed, scale).
pub fn generate_world(kind: EnvKind, seed: u64, scale: Scale) -> EnvState {
    match kind {
        EnvKind::Retail => retail::generate(seed, scale),
        EnvKind::Airline => airline::generate(seed, scale),
        EnvKind::Calc => calc::generate(seed),
        EnvKind::Web => web::generate(seed, scale),
    }
}

pub fn check_invariants(kind: EnvKind, state: &EnvState) -> Result<(), String> {
    match kind {
        EnvKind::Retail => retail::check_invariants(state),
        EnvKind::Airline => airline::check_invariants(state),
        EnvKind::Calc => Ok(()),
        EnvKind::Web => web::check_invariants(state),
    }
}

/// One shared instance of every world at every scale.
#[derive(Clone)]
pub struct WorldSet {
    worlds: Vec<((EnvKind, Scale), Arc<dyn World>)>,
}

impl Default for WorldSet {
    fn default() -> Self {
        Self::new()
    }
}

impl WorldSet {
    pub fn new() -> WorldSet {
        let mut worlds = Vec::new();
        for kind in EnvKind::ALL {
            for scale in [Scale::Small, Scale::Medium] {
                worlds.push(((kind, scale), world(kind, scale)));
            }
        }
        WorldSet { worlds }
    }

    pub fn get(&self, kind: EnvKind, scale: Scale) -> &Arc<dyn World> {
        &self.worlds.iter().find(|(key, _)| *key == (kind, scale)).expect("every (kind, scale) pair is constructed").1
    }
}
