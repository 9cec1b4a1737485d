//! Episodic decision-process abstractions: environments, policies, rollouts.
//!
//! Both management problems are fully observed, so observations coincide with
//! states and the general formulation reduces to a seeded episodic MDP: a
//! fixed horizon `H`, a discount `gamma`, and one stochastic transition per
//! step. Trajectories store `H + 1` observations and `H` actions/rewards.

use alloc::string::String;
use alloc::vec::Vec;

use crate::space::BoxSpace;
use crate::{Error, Result};

/// Episode-level settings shared by every environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConfig {
    /// Number of steps per episode.
    pub horizon: usize,
    /// Per-step discount applied when scoring returns. Episodes themselves
    /// always run to the horizon regardless of discounting.
    pub discount: f64,
    /// Base seed; callers conventionally run replicate `i` with `seed + i`.
    pub seed: u64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::config("discount must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// True exactly when the step just taken was the horizon-th one.
    pub terminal: bool,
}

/// A seeded episodic environment.
///
/// `reset(seed)` must fully determine the subsequent noise stream: two resets
/// with the same seed produce identical episodes under identical actions.
pub trait Environment {
    fn observation_space(&self) -> &BoxSpace;
    fn action_space(&self) -> &BoxSpace;
    fn config(&self) -> &EnvConfig;
    /// Start a new episode and return the initial observation.
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    /// Advance one step. Actions are clamped into the action space; non-finite
    /// components are an error.
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

/// A deterministic mapping from observation to action.
pub trait Policy {
    fn action(&self, observation: &[f64]) -> Vec<f64>;
}

impl<P: Policy + ?Sized> Policy for &P {
    fn action(&self, observation: &[f64]) -> Vec<f64> {
        (**self).action(observation)
    }
}

/// One completed episode: `len() + 1` observations, `len()` actions and
/// rewards. Actions are stored as executed, i.e. after clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    /// Number of steps taken.
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Checks the length invariant tying observations to actions and rewards.
    pub fn check_shape(&self) -> Result<()> {
        if self.actions.len() != self.rewards.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rewards.len(),
                got: self.actions.len(),
            });
        }
        if self.observations.len() != self.rewards.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.rewards.len() + 1,
                got: self.observations.len(),
            });
        }
        Ok(())
    }
}

/// Serializes a trajectory as CSV: `t,obs_0..obs_k,act_0..act_m,reward`,
/// one row per step. The final observation has no action or reward and is
/// not emitted; it is recoverable as the next row's observation in longer
/// tables or from the environment's dynamics.
pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    use core::fmt::Write;

    let obs_dim = trajectory.observations.first().map_or(0, Vec::len);
    let act_dim = trajectory.actions.first().map_or(0, Vec::len);
    let mut text = String::from("t");
    for d in 0..obs_dim {
        let _ = write!(text, ",obs_{d}");
    }
    for d in 0..act_dim {
        let _ = write!(text, ",act_{d}");
    }
    text.push_str(",reward\n");
    for t in 0..trajectory.len() {
        let _ = write!(text, "{t}");
        for v in &trajectory.observations[t] {
            let _ = write!(text, ",{v}");
        }
        for v in &trajectory.actions[t] {
            let _ = write!(text, ",{v}");
        }
        let _ = write!(text, ",{}\n", trajectory.rewards[t]);
    }
    text
}

/// Discounted return `sum_t gamma^t r_t`. With `gamma = 1` this is the plain
/// sum of rewards.
pub fn trajectory_return(trajectory: &Trajectory, discount: f64) -> f64 {
    let mut total = 0.0;
    let mut weight = 1.0;
    for &r in &trajectory.rewards {
        total += weight * r;
        weight *= discount;
    }
    total
}

/// Run one full episode of `policy` in `env`, seeded with `seed`.
///
/// The policy's action is validated (non-finite components are an error naming
/// the step index), clamped into the action space, and recorded as executed.
pub fn rollout<E: Environment + ?Sized, P: Policy + ?Sized>(
    env: &mut E,
    policy: &P,
    seed: u64,
) -> Result<Trajectory> {
    let horizon = env.config().horizon;
    let mut observations = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);

    let mut obs = env.reset(seed);
    debug_assert!(env.observation_space().contains(&obs));
    for step in 0..horizon {
        let raw = policy.action(&obs);
        if raw.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFiniteAction { step });
        }
        let action = env.action_space().clip(&raw)?;
        let result = env.step(&action)?;
        debug_assert!(env.observation_space().contains(&result.observation));
        observations.push(obs);
        actions.push(action);
        rewards.push(result.reward);
        obs = result.observation;
        if result.terminal {
            break;
        }
    }
    observations.push(obs);

    let trajectory = Trajectory { observations, actions, rewards };
    trajectory.check_shape()?;
    Ok(trajectory)
}
