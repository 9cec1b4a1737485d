//! Run configuration: a TOML file with one section per concern, strict about
//! unknown keys so typos in sweep scripts fail loudly instead of silently
//! running defaults. Values can be overridden from the command line with
//! repeated `--set section.key=value` flags; overrides are applied to the
//! parsed TOML before type-checking, so they obey the same strictness.

use std::fs;
use std::path::Path;

use ecorl_core::baselines;
use ecorl_core::conservation::ConservationParams;
use ecorl_core::decision::EnvConfig;
use ecorl_core::experiments::SearchSpace;
use ecorl_core::fishery::FisheryParams;
use ecorl_core::space::BoxSpace;
use ecorl_core::td3::Td3Hyperparams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub fishery: FisherySection,
    pub conservation: ConservationSection,
    pub td3: Td3Section,
    pub experiments: ExperimentsSection,
    pub tune: TuneSection,
    pub mdp: MdpSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FisherySection {
    pub r: f64,
    pub k: f64,
    pub sigma: f64,
    pub x0: f64,
    pub horizon: usize,
    pub discount: f64,
}

impl Default for FisherySection {
    fn default() -> Self {
        let p = FisheryParams::default();
        FisherySection {
            r: p.r,
            k: p.k,
            sigma: p.sigma,
            x0: p.x0,
            horizon: p.config.horizon,
            discount: p.config.discount,
        }
    }
}

impl FisherySection {
    pub fn to_params(&self, seed: u64) -> FisheryParams {
        FisheryParams {
            r: self.r,
            k: self.k,
            sigma: self.sigma,
            x0: self.x0,
            config: EnvConfig { horizon: self.horizon, discount: self.discount, seed },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConservationSection {
    pub r: f64,
    pub k: f64,
    pub h: f64,
    pub alpha: f64,
    pub a_max: f64,
    pub sigma: f64,
    pub b: f64,
    pub c: f64,
    pub m0: f64,
    /// Omit to start on the healthy branch at `m0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    pub horizon: usize,
    pub discount: f64,
}

impl Default for ConservationSection {
    fn default() -> Self {
        let p = ConservationParams::default();
        ConservationSection {
            r: p.r,
            k: p.k,
            h: p.h,
            alpha: p.alpha,
            a_max: p.a_max,
            sigma: p.sigma,
            b: p.b,
            c: p.c,
            m0: p.m0,
            x0: p.x0,
            horizon: p.config.horizon,
            discount: p.config.discount,
        }
    }
}

impl ConservationSection {
    pub fn to_params(&self, seed: u64) -> ConservationParams {
        ConservationParams {
            r: self.r,
            k: self.k,
            h: self.h,
            alpha: self.alpha,
            a_max: self.a_max,
            sigma: self.sigma,
            b: self.b,
            c: self.c,
            m0: self.m0,
            x0: self.x0,
            config: EnvConfig { horizon: self.horizon, discount: self.discount, seed },
        }
    }
}

/// Agent hyperparameters. Every field is optional; unset fields fall back to
/// the action-space-scaled defaults, so a config only needs to state what it
/// changes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Td3Section {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actor_lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critic_lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy_delay: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exploration_noise_sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_noise_sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_noise_clip: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffer_capacity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_env_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
}

impl Td3Section {
    pub fn resolve(&self, action_space: &BoxSpace, seed: u64) -> Td3Hyperparams {
        let mut hp = Td3Hyperparams::for_action_space(action_space);
        if let Some(v) = self.actor_lr {
            hp.actor_lr = v;
        }
        if let Some(v) = self.critic_lr {
            hp.critic_lr = v;
        }
        if let Some(v) = self.tau {
            hp.tau = v;
        }
        if let Some(v) = self.policy_delay {
            hp.policy_delay = v;
        }
        if let Some(v) = self.exploration_noise_sd {
            hp.exploration_noise_sd = v;
        }
        if let Some(v) = self.target_noise_sd {
            hp.target_noise_sd = v;
        }
        if let Some(v) = self.target_noise_clip {
            hp.target_noise_clip = v;
        }
        if let Some(v) = self.batch_size {
            hp.batch_size = v;
        }
        if let Some(v) = self.buffer_capacity {
            hp.buffer_capacity = v;
        }
        if let Some(v) = self.warmup_steps {
            hp.warmup_steps = v;
        }
        if let Some(v) = self.total_env_steps {
            hp.total_env_steps = v;
        }
        if let Some(v) = self.discount {
            hp.discount = v;
        }
        hp.seed = seed;
        hp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentsSection {
    /// Monte Carlo replicates for `evaluate`.
    pub replicates: usize,
    /// Episodes per evaluation point during training and tuning.
    pub eval_episodes: usize,
    /// Environment steps between learning-curve points.
    pub eval_interval: usize,
}

impl Default for ExperimentsSection {
    fn default() -> Self {
        ExperimentsSection { replicates: 100, eval_episodes: 10, eval_interval: 5_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneSection {
    pub n_trials: usize,
    /// Each trial trains with this fraction of `td3.total_env_steps`.
    pub trial_budget_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actor_lr: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critic_lr: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exploration_noise_sd: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy_delay: Option<[usize; 2]>,
}

impl Default for TuneSection {
    fn default() -> Self {
        TuneSection {
            n_trials: 10,
            trial_budget_fraction: 0.25,
            actor_lr: None,
            critic_lr: None,
            tau: None,
            exploration_noise_sd: None,
            policy_delay: None,
        }
    }
}

impl TuneSection {
    /// Search ranges centered on `base`, with any explicitly configured
    /// range taking precedence.
    pub fn resolve_space(&self, base: &Td3Hyperparams) -> SearchSpace {
        let mut space = SearchSpace::around(base);
        if let Some([lo, hi]) = self.actor_lr {
            space.actor_lr = (lo, hi);
        }
        if let Some([lo, hi]) = self.critic_lr {
            space.critic_lr = (lo, hi);
        }
        if let Some([lo, hi]) = self.tau {
            space.tau = (lo, hi);
        }
        if let Some([lo, hi]) = self.exploration_noise_sd {
            space.exploration_noise_sd = (lo, hi);
        }
        if let Some([lo, hi]) = self.policy_delay {
            space.policy_delay = (lo, hi);
        }
        space
    }

    pub fn trial_hyperparams(&self, full: &Td3Hyperparams) -> Result<Td3Hyperparams, CliError> {
        if !(self.trial_budget_fraction > 0.0 && self.trial_budget_fraction <= 1.0) {
            return Err(CliError::validation(format!(
                "tune.trial_budget_fraction must lie in (0, 1], got {}",
                self.trial_budget_fraction
            )));
        }
        let steps = (full.total_env_steps as f64 * self.trial_budget_fraction).round() as usize;
        Ok(Td3Hyperparams { total_env_steps: steps.max(1), ..full.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdpSection {
    pub n_states: usize,
    pub n_actions: usize,
    pub discount: f64,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for MdpSection {
    fn default() -> Self {
        MdpSection {
            n_states: 400,
            n_actions: 400,
            discount: 0.99,
            tolerance: 1e-9,
            max_sweeps: 200_000,
        }
    }
}

impl MdpSection {
    pub fn solve(
        &self,
        params: &FisheryParams,
    ) -> Result<(baselines::DiscreteMdp, baselines::MdpSolution), CliError> {
        let mdp = baselines::discretize_fishery(params, self.n_states, self.n_actions)?;
        let solution =
            baselines::value_iteration(&mdp, self.discount, self.tolerance, self.max_sweeps)?;
        Ok((mdp, solution))
    }
}

impl RunConfig {
    /// Reads `path` (or starts from defaults when `None`), applies `--set`
    /// overrides, and type-checks the result.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<RunConfig, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| {
                    CliError::validation(format!("cannot read config {}: {e}", p.display()))
                })?;
                text.parse::<toml::Table>().map_err(|e| {
                    CliError::validation(format!("config {}: {e}", p.display()))
                })?
            }
            None => toml::Table::new(),
        };
        for set in sets {
            apply_set(&mut table, set)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::validation(format!("config: {e}")))
    }

    /// Canonical TOML used for hashing and for the `config.toml` echo that
    /// every command writes next to its outputs.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

/// Applies one `section.key=value` override to the parsed TOML.
fn apply_set(table: &mut toml::Table, set: &str) -> Result<(), CliError> {
    let (path, raw) = set.split_once('=').ok_or_else(|| {
        CliError::validation(format!("--set expects section.key=value, got {set:?}"))
    })?;
    let path = path.trim();
    let segments: Vec<&str> = path.split('.').collect();
    if path.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::validation(format!("--set key must be dotted, got {path:?}")));
    }
    // Parse the value as TOML so numbers, booleans, and arrays work; fall
    // back to a bare string for things like file paths.
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut current = table;
    for segment in &segments[..segments.len() - 1] {
        current = current
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                CliError::validation(format!("--set {path}: {segment} is not a table"))
            })?;
    }
    current.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let config = RunConfig::default();
        let text = config.canonical_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_offending_name() {
        let err = RunConfig::load(None, &["fishery.growth_rate=0.3".into()]).unwrap_err();
        assert!(err.to_string().contains("growth_rate"), "{err}");
    }

    #[test]
    fn set_overrides_nest_and_type_check() {
        let config = RunConfig::load(
            None,
            &[
                "fishery.sigma=0.0".into(),
                "td3.total_env_steps=500".into(),
                "tune.actor_lr=[1e-5, 1e-2]".into(),
            ],
        )
        .unwrap();
        assert_eq!(config.fishery.sigma, 0.0);
        assert_eq!(config.td3.total_env_steps, Some(500));
        assert_eq!(config.tune.actor_lr, Some([1e-5, 1e-2]));
    }

    #[test]
    fn malformed_set_flags_are_validation_errors() {
        for bad in ["fishery.sigma", "=3", "fishery..sigma=1", "td3.tau=not_a_number"] {
            let err = RunConfig::load(None, &[bad.to_string()]).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{bad} should be a validation error: {err}");
        }
    }

    #[test]
    fn hash_tracks_content_not_flag_order() {
        let a = RunConfig::load(None, &["fishery.sigma=0.2".into(), "mdp.n_states=10".into()])
            .unwrap();
        let b = RunConfig::load(None, &["mdp.n_states=10".into(), "fishery.sigma=0.2".into()])
            .unwrap();
        let c = RunConfig::load(None, &["mdp.n_states=11".into()]).unwrap();
        assert_eq!(a.sha256(), b.sha256());
        assert_ne!(a.sha256(), c.sha256());
    }

    #[test]
    fn td3_section_resolves_against_action_space_defaults() {
        let space = BoxSpace::scalar(0.0, 2.0).unwrap();
        let section = Td3Section { tau: Some(0.5), ..Td3Section::default() };
        let hp = section.resolve(&space, 9);
        assert_eq!(hp.tau, 0.5);
        assert_eq!(hp.seed, 9);
        let defaults = Td3Hyperparams::for_action_space(&space);
        assert_eq!(hp.exploration_noise_sd, defaults.exploration_noise_sd);
    }
}
