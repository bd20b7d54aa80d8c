use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::challenger::{run_challenger_episode, ChallengeError, ChallengerConfig};
use super::policy::{Policy, PolicyError};
use super::remote::{RemoteChat, RemoteConfig};
use super::templates::{plan_flaws, Flaw, FlawRates, TemplateChallenger};
use crate::cat::CatBundle;
use crate::envs::{EnvKind, Scale, WorldSet};

/// SplitMix64 finaliser over `base`, `index` and `attempt`.
pub fn mix_seed(base: u64, index: u64, attempt: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(attempt.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChallengerKind {
    Template,
    /// Template challenger that plants flaws at the given rates.
    Noisy(FlawRates),
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub kind: EnvKind,
    pub scale: Scale,
    pub count: usize,
    pub base_seed: u64,
    pub challenger: ChallengerKind,
    /// Worlds tried per slot before the slot is reported as failed.
    pub attempts: u32,
    pub episode: ChallengerConfig,
}

#[derive(Debug)]
pub struct GenerateReport {
    pub bundles: Vec<CatBundle>,
    /// `(slot, last error)` for slots that produced no bundle.
    pub failed: Vec<(usize, String)>,
    /// Slots abandoned because the policy endpoint could not be reached.
    pub transport_failures: usize,
}

enum SlotError {
    Transport(String),
    Other(String),
}

/// Runs one challenger episode per slot in parallel. Slot `i` tries worlds
/// `mix_seed(base, i, attempt)` until one yields a well-formed task. Output
/// order and content depend only on the config, not on the thread count.
pub fn generate_bundles(worlds: &WorldSet, config: &GenerateConfig) -> GenerateReport {
    let flaws = match &config.challenger {
        ChallengerKind::Noisy(rates) => plan_flaws(config.count, config.base_seed, rates),
        _ => vec![None; config.count],
    };
    let world = worlds.get(config.kind, config.scale);
    let results: Vec<Result<CatBundle, SlotError>> = (0..config.count)
        .into_par_iter()
        .map(|i| {
            let mut last = String::from("no attempts");
            for attempt in 0..config.attempts.max(1) {
                let seed = mix_seed(config.base_seed, i as u64, u64::from(attempt));
                let mut policy: Box<dyn Policy> = match &config.challenger {
                    ChallengerKind::Template => Box::new(TemplateChallenger::new(config.kind, seed)),
                    ChallengerKind::Noisy(_) => Box::new(TemplateChallenger::noisy(config.kind, seed, flaws[i])),
                    ChallengerKind::Remote(remote) => match RemoteChat::new(remote.clone()) {
                        Ok(chat) => Box::new(chat),
                        Err(e) => return Err(SlotError::Transport(e.to_string())),
                    },
                };
                let run =
                    run_challenger_episode(config.kind, config.scale, world, policy.as_mut(), seed, &config.episode);
                match run {
                    Ok(outcome) => {
                        let mut bundle = outcome.bundle;
                        let id = format!("{}-{}-{i}", config.kind, config.base_seed);
                        bundle.metadata.insert("task_id".into(), id.into());
                        return Ok(bundle);
                    }
                    Err(e @ (ChallengeError::MalformedAnswer(_) | ChallengeError::ExplorationExhausted(_))) => {
                        last = e.to_string();
                    }
                    Err(ChallengeError::Policy(e @ PolicyError::Transport(_))) => {
                        return Err(SlotError::Transport(e.to_string()))
                    }
                    Err(e) => return Err(SlotError::Other(e.to_string())),
                }
            }
            Err(SlotError::Other(last))
        })
        .collect();
    let mut report = GenerateReport { bundles: Vec::new(), failed: Vec::new(), transport_failures: 0 };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(b) => report.bundles.push(b),
            Err(SlotError::Transport(e)) => {
                report.transport_failures += 1;
                report.failed.push((i, e));
            }
            Err(SlotError::Other(e)) => report.failed.push((i, e)),
        }
    }
    report
}

/// The flaw a noisy challenger planted, read back from bundle metadata.
pub fn planted_flaw(bundle: &CatBundle) -> Option<Flaw> {
    bundle.planted_flaw().and_then(Flaw::parse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_seed_spreads() {
        let a = mix_seed(7, 0, 0);
        assert_ne!(a, mix_seed(7, 1, 0));
        assert_ne!(a, mix_seed(7, 0, 1));
        assert_ne!(a, mix_seed(8, 0, 0));
        assert_eq!(a, mix_seed(7, 0, 0));
    }
}
