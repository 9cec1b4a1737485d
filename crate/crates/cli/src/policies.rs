//! Policy selection for `evaluate`, `policy-curve`, and `recommend`. A policy
//! argument is a short spec string:
//!
//! * `escapement:<threshold>` - harvest everything above the threshold
//! * `steady-state` or `steady-state:<effort>` - constant action, defaulting
//!   to the configured degradation rate `alpha`
//! * `actor:<path>` - a trained actor snapshot saved by `train`
//! * `mdp` - value iteration on the discretized fishery, solved on the spot

use std::fs;
use std::path::PathBuf;

use ecorl_core::baselines::{EscapementPolicy, MdpGreedyPolicy, SteadyStatePolicy};
use ecorl_core::decision::{Environment, Policy};
use ecorl_core::nn::Mlp;

use crate::config::RunConfig;
use crate::commands::EnvKind;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Escapement(f64),
    SteadyState(Option<f64>),
    Actor(PathBuf),
    Mdp,
}

impl std::str::FromStr for PolicySpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("escapement", Some(raw)) => {
                let threshold: f64 = raw.parse().map_err(|_| {
                    CliError::validation(format!("escapement threshold {raw:?} is not a number"))
                })?;
                Ok(PolicySpec::Escapement(threshold))
            }
            ("escapement", None) => {
                Err(CliError::validation("escapement needs a threshold, e.g. escapement:0.5"))
            }
            ("steady-state", None) => Ok(PolicySpec::SteadyState(None)),
            ("steady-state", Some(raw)) => {
                let effort: f64 = raw.parse().map_err(|_| {
                    CliError::validation(format!("steady-state effort {raw:?} is not a number"))
                })?;
                Ok(PolicySpec::SteadyState(Some(effort)))
            }
            ("actor", Some(path)) => Ok(PolicySpec::Actor(PathBuf::from(path))),
            ("actor", None) => {
                Err(CliError::validation("actor needs a snapshot path, e.g. actor:out/actor.txt"))
            }
            ("mdp", None) => Ok(PolicySpec::Mdp),
            _ => Err(CliError::validation(format!(
                "unknown policy {s:?}; expected escapement:<t>, steady-state[:<a>], \
                 actor:<path>, or mdp"
            ))),
        }
    }
}

impl PolicySpec {
    /// Builds the policy and checks its dimensions against the environment.
    pub fn build<E: Environment>(
        &self,
        env: &E,
        config: &RunConfig,
        env_kind: EnvKind,
        seed: u64,
    ) -> Result<Box<dyn Policy>, CliError> {
        let obs_dim = env.observation_space().dim();
        let act_dim = env.action_space().dim();
        match self {
            PolicySpec::Escapement(threshold) => {
                Ok(Box::new(EscapementPolicy::new(*threshold)?))
            }
            PolicySpec::SteadyState(effort) => {
                let effort = effort.unwrap_or(config.conservation.alpha);
                Ok(Box::new(SteadyStatePolicy::new(effort)?))
            }
            PolicySpec::Actor(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::validation(format!("cannot read actor {}: {e}", path.display()))
                })?;
                let actor = Mlp::from_text(&text)?;
                if actor.input_size() != obs_dim || actor.output_size() != act_dim {
                    return Err(CliError::validation(format!(
                        "actor {} maps {} -> {} but the environment needs {} -> {}",
                        path.display(),
                        actor.input_size(),
                        actor.output_size(),
                        obs_dim,
                        act_dim
                    )));
                }
                Ok(Box::new(actor))
            }
            PolicySpec::Mdp => {
                if env_kind != EnvKind::Fishery {
                    return Err(CliError::validation(
                        "the mdp policy is defined only for the fishery environment",
                    ));
                }
                let params = config.fishery.to_params(seed);
                let (mdp, solution) = config.mdp.solve(&params)?;
                Ok(Box::new(MdpGreedyPolicy::from_solution(&mdp, &solution)))
            }
        }
    }
}
