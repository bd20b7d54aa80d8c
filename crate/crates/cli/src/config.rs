//! Declarative run configuration. Every field is optional; command-line flags
//! override the file, and built-in defaults fill the rest.

use std::path::{Path, PathBuf};

use catforge::ctl::EvalLimits;
use catforge::envs::{EnvKind, Scale};
use catforge::rollout::{FlawRates, RemoteConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Forbid implicit seeds.
    pub ci: bool,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub env: Option<EnvKind>,
    pub scale: Option<Scale>,
    /// Directory for outputs whose path is not given explicitly.
    pub out_dir: Option<PathBuf>,
    pub limits: Option<EvalLimits>,
    pub challenge: ChallengeSection,
    pub validate: ValidateSection,
    pub rollout: RolloutSection,
    pub export: ExportSection,
    pub audit: AuditSection,
    pub remote: Option<RemoteSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChallengeSection {
    pub n: Option<usize>,
    pub challenger: Option<String>,
    pub attempts: Option<u32>,
    pub max_steps: Option<u32>,
    pub format_retries: Option<u32>,
    pub flaw_rates: Option<FlawRates>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub variant: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutSection {
    pub policies: Option<Vec<String>>,
    pub trials: Option<usize>,
    pub max_steps: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSection {
    pub mode: Option<String>,
    pub only_success: Option<bool>,
    pub max_pairs: Option<usize>,
    pub max_tokens: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub n: Option<usize>,
}

/// Endpoint settings. The auth token comes from the environment only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteSection {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
    #[serde(default)]
    pub attempts: Option<u32>,
    #[serde(default)]
    pub min_interval_ms: Option<u64>,
}

impl RemoteSection {
    pub fn to_remote(&self) -> RemoteConfig {
        let d = RemoteConfig::default();
        RemoteConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            temperature: self.temperature.unwrap_or(d.temperature),
            max_tokens: self.max_tokens.unwrap_or(d.max_tokens),
            timeout_secs: self.timeout_secs.unwrap_or(d.timeout_secs),
            attempts: self.attempts.unwrap_or(d.attempts),
            min_interval_ms: self.min_interval_ms.unwrap_or(d.min_interval_ms),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// The run seed: flag, then file. CI mode refuses to invent one.
    pub fn seed(&self, flag: Option<u64>) -> CliResult<u64> {
        match flag.or(self.seed) {
            Some(s) => Ok(s),
            None if self.ci => {
                Err(CliError::Config("a seed is required in CI mode (--seed or `seed` in the config)".into()))
            }
            None => Ok(0),
        }
    }

    pub fn env(&self, flag: Option<EnvKind>) -> CliResult<EnvKind> {
        flag.or(self.env).ok_or_else(|| CliError::Config("no environment given (--env or `env` in the config)".into()))
    }

    pub fn scale(&self, flag: Option<Scale>) -> Scale {
        flag.or(self.scale).unwrap_or_default()
    }

    pub fn limits(&self) -> CliResult<EvalLimits> {
        let limits = self.limits.unwrap_or_default();
        limits.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(limits)
    }

    /// Resolves an output path: the flag, else `out_dir/default_name`.
    pub fn out_path(&self, flag: Option<PathBuf>, default_name: &str) -> PathBuf {
        flag.unwrap_or_else(|| self.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")).join(default_name))
    }

    pub fn remote(&self) -> CliResult<RemoteConfig> {
        self.remote
            .as_ref()
            .map(RemoteSection::to_remote)
            .ok_or_else(|| CliError::Config("a remote policy needs a [remote] section with endpoint and model".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_document_parses() {
        let cfg: RunConfig = toml::from_str(
            r#"
            ci = true
            seed = 7
            env = "airline"
            scale = "medium"
            [challenge]
            n = 20
            challenger = "noisy"
            flaw_rates = { unrunnable = 0.1, infeasible_solution = 0.1, lenient_verifier = 0.3, ambiguous_instruction = 0.0 }
            [rollout]
            policies = ["oracle", "random"]
            trials = 4
            [remote]
            endpoint = "http://localhost:9/v1/chat/completions"
            model = "m"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.env, Some(EnvKind::Airline));
        assert_eq!(cfg.seed(None).unwrap(), 7);
        assert_eq!(cfg.seed(Some(3)).unwrap(), 3);
        assert_eq!(cfg.remote().unwrap().attempts, 3);
    }

    #[test]
    fn ci_requires_seed_and_unknown_keys_fail() {
        let cfg = RunConfig { ci: true, ..RunConfig::default() };
        assert!(matches!(cfg.seed(None), Err(CliError::Config(_))));
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
    }
}
