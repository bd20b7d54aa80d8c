//! Training datasets from trajectory pools: rejection fine-tuning keeps the
//! reward-1 trajectories, distillation keeps all of them, and DPO pairs a
//! success with a failure on the same task.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::EnvKind;
use crate::rollout::{Role, Trajectory};

/// Context budget of one training sample, in estimated tokens.
pub const DEFAULT_MAX_TOKENS: usize = 16_192;
pub const DEFAULT_MAX_PAIRS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub task_id: String,
    pub reward: u8,
    pub seed: u64,
    pub policy: String,
    pub env_kind: EnvKind,
}

/// `mask[i]` is true when message `i` is trained on. Only assistant messages
/// are ever unmasked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatSample {
    pub messages: Vec<ChatMessage>,
    pub mask: Vec<bool>,
    pub meta: SampleMeta,
}

impl ChatSample {
    /// Characters over four, rounded up; a tokenizer-free estimate.
    pub fn estimated_tokens(&self) -> usize {
        estimate_tokens(&self.messages)
    }
}

pub fn estimate_tokens(messages: &[ChatMessage]) -> usize {
    messages.iter().map(|m| m.content.chars().count()).sum::<usize>().div_ceil(4)
}

/// Renders a trajectory as a chat. Tool results become user messages,
/// consecutive non-assistant messages are merged, and trailing
/// non-assistant messages are dropped. None when no assistant turn remains.
pub fn render_sample(t: &Trajectory) -> Option<ChatSample> {
    let mut messages: Vec<ChatMessage> = Vec::new();
    for turn in &t.turns {
        let role = match turn.role {
            Role::System => "system",
            Role::Assistant => "assistant",
            Role::User | Role::Tool => "user",
        };
        match messages.last_mut() {
            Some(prev) if prev.role == role && role != "assistant" => {
                prev.content.push_str("\n\n");
                prev.content.push_str(&turn.content);
            }
            _ => messages.push(ChatMessage { role: role.to_string(), content: turn.content.clone() }),
        }
    }
    while messages.last().is_some_and(|m| m.role != "assistant") {
        messages.pop();
    }
    if messages.is_empty() {
        return None;
    }
    let mask = messages.iter().map(|m| m.role == "assistant").collect();
    let meta = SampleMeta {
        task_id: t.task_id.clone(),
        reward: t.reward,
        seed: t.seed,
        policy: t.policy.clone(),
        env_kind: t.env_kind,
    };
    Some(ChatSample { messages, mask, meta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportOptions {
    pub max_tokens: usize,
}

impl Default for ExportOptions {
    fn default() -> Self {
        ExportOptions { max_tokens: DEFAULT_MAX_TOKENS }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportCounts {
    pub input: usize,
    pub selected: usize,
    pub written: usize,
    pub dropped_overlength: usize,
    /// Selected trajectories with no assistant turn.
    pub dropped_empty: usize,
}

#[derive(Debug, Clone)]
pub struct SampleExport {
    pub samples: Vec<ChatSample>,
    pub counts: ExportCounts,
}

fn export_where(pool: &[Trajectory], opts: &ExportOptions, keep: impl Fn(&Trajectory) -> bool + Sync) -> SampleExport {
    let rendered: Vec<Option<Option<ChatSample>>> =
        pool.par_iter().map(|t| keep(t).then(|| render_sample(t))).collect();
    let mut counts = ExportCounts { input: pool.len(), ..ExportCounts::default() };
    let mut samples = Vec::new();
    for r in rendered {
        let Some(sample) = r else { continue };
        counts.selected += 1;
        match sample {
            None => counts.dropped_empty += 1,
            Some(s) if s.estimated_tokens() > opts.max_tokens => counts.dropped_overlength += 1,
            Some(s) => samples.push(s),
        }
    }
    counts.written = samples.len();
    if counts.dropped_overlength > 0 {
        log::warn!("dropped {} trajectories over {} tokens", counts.dropped_overlength, opts.max_tokens);
    }
    SampleExport { samples, counts }
}

/// Rejection fine-tuning set: exactly the reward-1 trajectories.
pub fn export_rft(pool: &[Trajectory], opts: &ExportOptions) -> SampleExport {
    export_where(pool, opts, |t| t.reward == 1)
}

/// Distillation set: every trajectory, or only successes with `only_success`.
pub fn export_distill(pool: &[Trajectory], only_success: bool, opts: &ExportOptions) -> SampleExport {
    export_where(pool, opts, |t| !only_success || t.reward == 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairMeta {
    pub task_id: String,
    pub env_kind: EnvKind,
    pub chosen_seed: u64,
    pub rejected_seed: u64,
    pub chosen_policy: String,
    pub rejected_policy: String,
}

/// `prompt` is the longest common message prefix; `chosen` and `rejected`
/// continue it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt: Vec<ChatMessage>,
    pub chosen: Vec<ChatMessage>,
    pub rejected: Vec<ChatMessage>,
    pub meta: PairMeta,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpoCounts {
    pub tasks: usize,
    pub tasks_with_pairs: usize,
    pub tasks_without_pairs: usize,
    pub pairs: usize,
    pub dropped_overlength: usize,
}

#[derive(Debug, Clone)]
pub struct DpoExport {
    pub pairs: Vec<PreferencePair>,
    pub counts: DpoCounts,
}

fn task_rng(seed: u64, task_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(task_id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn make_pair(good: &ChatSample, bad: &ChatSample) -> PreferencePair {
    let mut shared = good.messages.iter().zip(&bad.messages).take_while(|(a, b)| a == b).count();
    // Both continuations must keep at least one message.
    shared = shared.min(good.messages.len() - 1).min(bad.messages.len() - 1);
    // The prompt ends before an assistant turn.
    while shared > 0 && good.messages[shared].role != "assistant" {
        shared -= 1;
    }
    PreferencePair {
        prompt: good.messages[..shared].to_vec(),
        chosen: good.messages[shared..].to_vec(),
        rejected: bad.messages[shared..].to_vec(),
        meta: PairMeta {
            task_id: good.meta.task_id.clone(),
            env_kind: good.meta.env_kind,
            chosen_seed: good.meta.seed,
            rejected_seed: bad.meta.seed,
            chosen_policy: good.meta.policy.clone(),
            rejected_policy: bad.meta.policy.clone(),
        },
    }
}

/// Up to `max_pairs` (success, failure) pairs per task, drawn without
/// replacement from the full cross product in a seeded order.
pub fn export_dpo(pool: &[Trajectory], max_pairs: usize, seed: u64, opts: &ExportOptions) -> DpoExport {
    let mut counts = DpoCounts::default();
    let mut by_task: BTreeMap<&str, (Vec<ChatSample>, Vec<ChatSample>)> = BTreeMap::new();
    for t in pool {
        let entry = by_task.entry(t.task_id.as_str()).or_default();
        let Some(sample) = render_sample(t) else { continue };
        if sample.estimated_tokens() > opts.max_tokens {
            counts.dropped_overlength += 1;
            continue;
        }
        if t.reward == 1 {
            entry.0.push(sample);
        } else {
            entry.1.push(sample);
        }
    }
    counts.tasks = by_task.len();
    let mut pairs = Vec::new();
    for (task, (good, bad)) in &by_task {
        if good.is_empty() || bad.is_empty() {
            counts.tasks_without_pairs += 1;
            log::info!("task {task}: {} successes, {} failures, no pairs", good.len(), bad.len());
            continue;
        }
        let mut cells: Vec<(usize, usize)> =
            (0..good.len()).flat_map(|i| (0..bad.len()).map(move |j| (i, j))).collect();
        cells.shuffle(&mut task_rng(seed, task));
        cells.truncate(max_pairs);
        cells.sort_unstable();
        counts.tasks_with_pairs += 1;
        pairs.extend(cells.into_iter().map(|(i, j)| make_pair(&good[i], &bad[j])));
    }
    counts.pairs = pairs.len();
    DpoExport { pairs, counts }
}
