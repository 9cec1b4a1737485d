//! Twin Delayed Deep Deterministic Policy Gradient.
//!
//! A deterministic actor is trained against two critics. Three devices keep
//! the bootstrapped value estimates from running away, following Fujimoto et
//! al.'s recipe:
//!
//! * twin critics: TD targets bootstrap from the elementwise minimum of the
//!   two target critics, damping overestimation bias;
//! * target policy smoothing: the target action is the target actor's output
//!   plus clipped Gaussian noise, then clipped to the action box;
//! * delayed policy updates: the actor and all target networks update only
//!   every `policy_delay` critic updates, targets by polyak averaging.
//!
//! The TD target is `y = r + discount * (1 - terminal) * min(Q'1, Q'2)`.
//! Episodes here end by timeout rather than absorbing failure, but the
//! terminal mask is applied as written so the backup never bootstraps past
//! an episode boundary.

use alloc::format;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::decision::{rollout, trajectory_return, Environment};
use crate::nn::{polyak_average, AdamState, Batch, ForwardCache, Mlp, OutputTransform, ReplayBuffer};
use crate::space::BoxSpace;
use crate::{Error, Result};

/// Hidden layer widths shared by the actor and both critics.
const HIDDEN: [usize; 2] = [64, 64];

#[derive(Debug, Clone, PartialEq)]
pub struct Td3Hyperparams {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Polyak coefficient for target network tracking, in (0, 1].
    pub tau: f64,
    /// Critic updates per actor/target update.
    pub policy_delay: usize,
    /// Gaussian noise added to actions during training interaction.
    pub exploration_noise_sd: f64,
    /// Gaussian smoothing noise on target actions.
    pub target_noise_sd: f64,
    /// Clip bound on the smoothing noise before the action-box clip.
    pub target_noise_clip: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Interaction steps with uniform-random actions before the policy acts.
    pub warmup_steps: usize,
    pub total_env_steps: usize,
    /// Bootstrap discount for TD targets, in (0, 1].
    pub discount: f64,
    pub seed: u64,
}

impl Td3Hyperparams {
    /// Defaults with noise scales tied to the action box: exploration and
    /// smoothing noise 0.1 of the widest action dimension, clip 0.25 of it.
    pub fn for_action_space(space: &BoxSpace) -> Self {
        let width = space.max_width();
        Td3Hyperparams {
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            tau: 0.005,
            policy_delay: 2,
            exploration_noise_sd: 0.1 * width,
            target_noise_sd: 0.1 * width,
            target_noise_clip: 0.25 * width,
            batch_size: 128,
            buffer_capacity: 300_000,
            warmup_steps: 1_000,
            total_env_steps: 100_000,
            discount: 0.99,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.policy_delay == 0 {
            return Err(Error::config("policy_delay must be at least 1"));
        }
        for (name, v) in [
            ("exploration_noise_sd", self.exploration_noise_sd),
            ("target_noise_sd", self.target_noise_sd),
            ("target_noise_clip", self.target_noise_clip),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.target_noise_sd > 0.0 && self.target_noise_clip == 0.0 {
            return Err(Error::config("target_noise_clip must be positive when smoothing noise is on"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::config(format!(
                "buffer_capacity {} is smaller than batch_size {}",
                self.buffer_capacity, self.batch_size
            )));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::config(format!("discount must lie in (0, 1], got {}", self.discount)));
        }
        Ok(())
    }
}

/// Per-update training signals. `actor_loss` is present only on the updates
/// where the delayed policy step ran; it is the negated critic value, so
/// more negative is better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateDiagnostics {
    pub critic_loss: f64,
    pub actor_loss: Option<f64>,
}

/// Reusable buffers for one update step; kept out of the hot loop's way.
#[derive(Debug, Clone)]
struct Scratch {
    batch: Batch,
    critic_in: Vec<f64>,
    next_critic_in: Vec<f64>,
    targets: Vec<f64>,
    d_out: Vec<f64>,
    d_critic_in: Vec<f64>,
    d_action: Vec<f64>,
    grads: Vec<f64>,
    cache_a: ForwardCache,
    cache_b: ForwardCache,
    cache_c: ForwardCache,
}

#[derive(Debug, Clone)]
pub struct Td3Agent {
    hp: Td3Hyperparams,
    obs_space: BoxSpace,
    act_space: BoxSpace,
    actor: Mlp,
    critic1: Mlp,
    critic2: Mlp,
    target_actor: Mlp,
    target_critic1: Mlp,
    target_critic2: Mlp,
    actor_opt: AdamState,
    critic1_opt: AdamState,
    critic2_opt: AdamState,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    observed: usize,
    updates: u64,
    scratch: Scratch,
}

impl Td3Agent {
    pub fn new(obs_space: BoxSpace, act_space: BoxSpace, hp: Td3Hyperparams) -> Result<Self> {
        hp.validate()?;
        let (obs_dim, act_dim) = (obs_space.dim(), act_space.dim());
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let actor = Mlp::new(
            &[obs_dim, HIDDEN[0], HIDDEN[1], act_dim],
            OutputTransform::Bounded {
                low: act_space.low().to_vec(),
                high: act_space.high().to_vec(),
            },
            &mut rng,
        )?;
        let critic_sizes = [obs_dim + act_dim, HIDDEN[0], HIDDEN[1], 1];
        let critic1 = Mlp::new(&critic_sizes, OutputTransform::Identity, &mut rng)?;
        let critic2 = Mlp::new(&critic_sizes, OutputTransform::Identity, &mut rng)?;
        let buffer = ReplayBuffer::new(hp.buffer_capacity, obs_dim, act_dim)?;
        let batch = hp.batch_size;
        Ok(Td3Agent {
            target_actor: actor.clone(),
            target_critic1: critic1.clone(),
            target_critic2: critic2.clone(),
            actor_opt: AdamState::new(actor.params().len(), hp.actor_lr)?,
            critic1_opt: AdamState::new(critic1.params().len(), hp.critic_lr)?,
            critic2_opt: AdamState::new(critic2.params().len(), hp.critic_lr)?,
            scratch: Scratch {
                batch: Batch::new(batch, obs_dim, act_dim),
                critic_in: alloc::vec![0.0; batch * (obs_dim + act_dim)],
                next_critic_in: alloc::vec![0.0; batch * (obs_dim + act_dim)],
                targets: alloc::vec![0.0; batch],
                d_out: alloc::vec![0.0; batch],
                d_critic_in: alloc::vec![0.0; batch * (obs_dim + act_dim)],
                d_action: alloc::vec![0.0; batch * act_dim],
                grads: alloc::vec![0.0; critic1.params().len().max(actor.params().len())],
                cache_a: ForwardCache::new(),
                cache_b: ForwardCache::new(),
                cache_c: ForwardCache::new(),
            },
            actor,
            critic1,
            critic2,
            buffer,
            rng,
            observed: 0,
            updates: 0,
            hp,
            obs_space,
            act_space,
        })
    }

    pub fn hyperparams(&self) -> &Td3Hyperparams {
        &self.hp
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critics(&self) -> (&Mlp, &Mlp) {
        (&self.critic1, &self.critic2)
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn update_count(&self) -> u64 {
        self.updates
    }

    /// Actor output, optionally with exploration noise, always clipped to the
    /// action box. During the first `warmup_steps` observed transitions an
    /// exploring agent acts uniformly at random instead.
    pub fn select_action(&mut self, observation: &[f64], explore: bool) -> Vec<f64> {
        assert_eq!(observation.len(), self.obs_space.dim(), "observation size mismatch");
        debug_assert!(self.obs_space.contains(observation), "observation outside its box");
        if explore && self.observed < self.hp.warmup_steps {
            return self.act_space.sample_uniform(&mut self.rng);
        }
        let mut action = self.actor.forward(observation);
        if explore && self.hp.exploration_noise_sd > 0.0 {
            for a in action.iter_mut() {
                let noise: f64 = StandardNormal.sample(&mut self.rng);
                *a += self.hp.exploration_noise_sd * noise;
            }
            self.act_space
                .clip_in_place(&mut action)
                .expect("action dimensions match the space");
        }
        action
    }

    /// Stores one environment transition in the replay buffer.
    pub fn observe(
        &mut self,
        observation: &[f64],
        action: &[f64],
        reward: f64,
        next_observation: &[f64],
        terminal: bool,
    ) {
        self.buffer.push(observation, action, reward, next_observation, terminal);
        self.observed += 1;
    }

    /// One TD3 update: both critics regress to the smoothed twin target;
    /// every `policy_delay` calls the actor ascends critic 1 and all targets
    /// take a polyak step.
    pub fn update(&mut self) -> Result<UpdateDiagnostics> {
        let (obs_dim, act_dim) = (self.obs_space.dim(), self.act_space.dim());
        let batch = self.hp.batch_size;
        let s = &mut self.scratch;
        self.buffer.sample_into(&mut self.rng, &mut s.batch)?;

        // Smoothed target actions: target actor output plus clipped noise,
        // clipped to the action box.
        self.target_actor.forward_batch(&s.batch.next_observations, batch, &mut s.cache_a);
        let target_actions = self.target_actor.output_of(&s.cache_a);
        let clip = self.hp.target_noise_clip;
        for b in 0..batch {
            let row = b * (obs_dim + act_dim);
            s.next_critic_in[row..row + obs_dim]
                .copy_from_slice(&s.batch.next_observations[b * obs_dim..(b + 1) * obs_dim]);
            for d in 0..act_dim {
                let noise: f64 = StandardNormal.sample(&mut self.rng);
                let noise = (self.hp.target_noise_sd * noise).clamp(-clip, clip);
                s.next_critic_in[row + obs_dim + d] = (target_actions[b * act_dim + d] + noise)
                    .clamp(self.act_space.low()[d], self.act_space.high()[d]);
            }
        }

        // TD targets from the pessimistic twin: y = r + gamma * (1 - T) * min(Q'1, Q'2).
        self.target_critic1.forward_batch(&s.next_critic_in, batch, &mut s.cache_a);
        self.target_critic2.forward_batch(&s.next_critic_in, batch, &mut s.cache_b);
        let q1 = self.target_critic1.output_of(&s.cache_a);
        let q2 = self.target_critic2.output_of(&s.cache_b);
        for b in 0..batch {
            s.targets[b] = s.batch.rewards[b]
                + self.hp.discount * (1.0 - s.batch.terminals[b]) * q1[b].min(q2[b]);
        }

        for b in 0..batch {
            s.critic_in[b * (obs_dim + act_dim)..][..obs_dim]
                .copy_from_slice(&s.batch.observations[b * obs_dim..(b + 1) * obs_dim]);
            s.critic_in[b * (obs_dim + act_dim) + obs_dim..][..act_dim]
                .copy_from_slice(&s.batch.actions[b * act_dim..(b + 1) * act_dim]);
        }

        let mut critic_loss = 0.0;
        for (critic, opt) in [
            (&mut self.critic1, &mut self.critic1_opt),
            (&mut self.critic2, &mut self.critic2_opt),
        ] {
            critic.forward_batch(&s.critic_in, batch, &mut s.cache_a);
            let q = critic.output_of(&s.cache_a);
            let mut loss = 0.0;
            for b in 0..batch {
                let err = q[b] - s.targets[b];
                loss += err * err;
                s.d_out[b] = 2.0 * err / batch as f64;
            }
            loss /= batch as f64;
            if !loss.is_finite() {
                return Err(non_finite_loss("critic", loss, self.updates, &s.batch.rewards));
            }
            critic_loss += 0.5 * loss;
            let grads = &mut s.grads[..critic.params().len()];
            grads.fill(0.0);
            critic.backward_batch(&s.cache_a, &s.d_out, Some(&mut *grads), None);
            opt.apply(critic.params_mut(), grads);
        }

        self.updates += 1;
        let mut actor_loss = None;
        if self.updates % self.hp.policy_delay as u64 == 0 {
            // Deterministic policy gradient: d(-Q1(s, pi(s)))/d(theta_pi),
            // obtained by backpropagating through critic 1 into its action
            // inputs, then through the actor.
            self.actor.forward_batch(&s.batch.observations, batch, &mut s.cache_c);
            let actions = self.actor.output_of(&s.cache_c);
            for b in 0..batch {
                s.critic_in[b * (obs_dim + act_dim)..][..obs_dim]
                    .copy_from_slice(&s.batch.observations[b * obs_dim..(b + 1) * obs_dim]);
                s.critic_in[b * (obs_dim + act_dim) + obs_dim..][..act_dim]
                    .copy_from_slice(&actions[b * act_dim..(b + 1) * act_dim]);
            }
            self.critic1.forward_batch(&s.critic_in, batch, &mut s.cache_a);
            let q = self.critic1.output_of(&s.cache_a);
            let loss = -q.iter().sum::<f64>() / batch as f64;
            if !loss.is_finite() {
                return Err(non_finite_loss("actor", loss, self.updates, &s.batch.rewards));
            }
            actor_loss = Some(loss);
            s.d_out.fill(-1.0 / batch as f64);
            self.critic1.backward_batch(&s.cache_a, &s.d_out, None, Some(&mut s.d_critic_in));
            for b in 0..batch {
                s.d_action[b * act_dim..(b + 1) * act_dim].copy_from_slice(
                    &s.d_critic_in[b * (obs_dim + act_dim) + obs_dim..][..act_dim],
                );
            }
            let grads = &mut s.grads[..self.actor.params().len()];
            grads.fill(0.0);
            self.actor.backward_batch(&s.cache_c, &s.d_action, Some(&mut *grads), None);
            self.actor_opt.apply(self.actor.params_mut(), grads);

            polyak_average(&mut self.target_actor, &self.actor, self.hp.tau);
            polyak_average(&mut self.target_critic1, &self.critic1, self.hp.tau);
            polyak_average(&mut self.target_critic2, &self.critic2, self.hp.tau);
        }

        Ok(UpdateDiagnostics { critic_loss, actor_loss })
    }

}

fn non_finite_loss(which: &str, loss: f64, updates: u64, rewards: &[f64]) -> Error {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &r in rewards {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Error::NonFiniteLoss(format!(
        "{which} loss became {loss} after {updates} updates (batch rewards in [{lo}, {hi}])"
    ))
}

/// One point of the learning curve: evaluation of the frozen greedy policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub env_step: usize,
    pub eval_return_mean: f64,
    pub eval_return_sd: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub agent: Td3Agent,
    pub curve: Vec<CurvePoint>,
}

/// A training failure carrying whatever learning curve existed when the
/// error hit, so diverged runs can still be inspected.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub partial_curve: Vec<CurvePoint>,
}

impl core::fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "training failed: {}", self.error)
    }
}

impl From<TrainFailure> for Error {
    fn from(failure: TrainFailure) -> Error {
        failure.error
    }
}

/// Offset between training episode seeds and evaluation seeds so the two
/// never share noise streams.
const EVAL_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Mean and sample standard deviation of undiscounted-or-configured returns
/// of the frozen actor over `episodes` rollouts.
fn evaluate_actor<E: Environment + Clone>(
    proto: &E,
    actor: &Mlp,
    episodes: usize,
    base_seed: u64,
) -> Result<(f64, f64)> {
    assert!(episodes > 0, "evaluation needs at least one episode");
    let discount = proto.config().discount;
    let mut returns = Vec::with_capacity(episodes);
    let mut env = proto.clone();
    for k in 0..episodes {
        let trajectory = rollout(&mut env, actor, base_seed.wrapping_add(k as u64))?;
        returns.push(trajectory_return(&trajectory, discount));
    }
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    let var = if episodes > 1 {
        returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (episodes - 1) as f64
    } else {
        0.0
    };
    Ok((mean, libm::sqrt(var)))
}

/// Runs the full interaction-and-update loop against clones of `proto`.
///
/// Episodes reseed deterministically from `hp.seed`; every `eval_interval`
/// environment steps (and at the end) the frozen policy is evaluated on
/// `eval_episodes` separately seeded episodes for the learning curve. One
/// gradient update runs per post-warmup environment step.
pub fn train<E: Environment + Clone>(
    proto: &E,
    hp: &Td3Hyperparams,
    eval_interval: usize,
    eval_episodes: usize,
) -> core::result::Result<TrainResult, TrainFailure> {
    let mut curve = Vec::new();
    let fail = |error: Error, curve: &mut Vec<CurvePoint>| TrainFailure {
        error,
        partial_curve: core::mem::take(curve),
    };
    if eval_interval == 0 || eval_episodes == 0 {
        return Err(fail(
            Error::config("eval_interval and eval_episodes must be positive"),
            &mut curve,
        ));
    }
    let mut agent = Td3Agent::new(
        proto.observation_space().clone(),
        proto.action_space().clone(),
        hp.clone(),
    )
    .map_err(|e| TrainFailure { error: e, partial_curve: Vec::new() })?;

    let mut env = proto.clone();
    let mut episode = 0u64;
    let mut obs = env.reset(hp.seed.wrapping_add(episode));
    for step in 1..=hp.total_env_steps {
        let action = agent.select_action(&obs, true);
        let result = match env.step(&action) {
            Ok(r) => r,
            Err(e) => return Err(fail(e, &mut curve)),
        };
        agent.observe(&obs, &action, result.reward, &result.observation, result.terminal);
        obs = if result.terminal {
            episode += 1;
            env.reset(hp.seed.wrapping_add(episode))
        } else {
            result.observation
        };

        if step >= hp.warmup_steps && agent.buffer_len() >= hp.batch_size {
            if let Err(e) = agent.update() {
                return Err(fail(e, &mut curve));
            }
        }

        if step % eval_interval == 0 || step == hp.total_env_steps {
            let eval_seed = hp.seed ^ EVAL_SEED_OFFSET;
            let (mean, sd) =
                match evaluate_actor(proto, &agent.actor, eval_episodes, eval_seed) {
                    Ok(stats) => stats,
                    Err(e) => return Err(fail(e, &mut curve)),
                };
            curve.push(CurvePoint { env_step: step, eval_return_mean: mean, eval_return_sd: sd });
        }
    }
    Ok(TrainResult { agent, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fishery::{FisheryEnv, FisheryParams};
    use proptest::prelude::*;

    fn tiny_spaces() -> (BoxSpace, BoxSpace) {
        (BoxSpace::scalar(0.0, 2.0).unwrap(), BoxSpace::scalar(0.0, 2.0).unwrap())
    }

    fn quick_hp(space: &BoxSpace) -> Td3Hyperparams {
        Td3Hyperparams {
            batch_size: 16,
            buffer_capacity: 4_096,
            warmup_steps: 0,
            ..Td3Hyperparams::for_action_space(space)
        }
    }

    fn fill_buffer(agent: &mut Td3Agent, n: usize) {
        for i in 0..n {
            let x = (i % 7) as f64 * 0.25;
            agent.observe(&[x], &[x * 0.5], x - 0.5, &[x * 0.9 + 0.1], i % 50 == 49);
        }
    }

    #[test]
    fn deterministic_action_is_repeatable_and_inside_the_box() {
        let (obs, act) = tiny_spaces();
        let mut agent =
            Td3Agent::new(obs, act.clone(), quick_hp(&act)).unwrap();
        let a1 = agent.select_action(&[0.7], false);
        let a2 = agent.select_action(&[0.7], false);
        assert_eq!(a1, a2);
        assert!(act.contains(&a1));
    }

    #[test]
    fn zero_exploration_noise_equals_the_deterministic_action() {
        let (obs, act) = tiny_spaces();
        let hp = Td3Hyperparams {
            exploration_noise_sd: 0.0,
            warmup_steps: 0,
            ..quick_hp(&act)
        };
        let mut agent = Td3Agent::new(obs, act, hp).unwrap();
        let greedy = agent.select_action(&[0.3], false);
        let explored = agent.select_action(&[0.3], true);
        assert_eq!(greedy, explored);
    }

    #[test]
    fn warmup_actions_are_uniform_and_updates_wait_for_the_budget() {
        let params = FisheryParams::default();
        let env = FisheryEnv::new(params).unwrap();
        let hp = Td3Hyperparams {
            warmup_steps: 50,
            total_env_steps: 40,
            batch_size: 8,
            ..Td3Hyperparams::for_action_space(env.action_space())
        };
        let result = train(&env, &hp, 20, 2).unwrap();
        // No update ever ran, so parameters still equal the seeded init.
        let fresh = Td3Agent::new(
            env.observation_space().clone(),
            env.action_space().clone(),
            hp,
        )
        .unwrap();
        assert_eq!(result.agent.actor().params(), fresh.actor().params());
        assert_eq!(result.agent.update_count(), 0);
        assert_eq!(result.curve.len(), 2);
    }

    #[test]
    fn update_without_enough_samples_is_an_error() {
        let (obs, act) = tiny_spaces();
        let mut agent = Td3Agent::new(obs, act.clone(), quick_hp(&act)).unwrap();
        fill_buffer(&mut agent, 3);
        match agent.update() {
            Err(Error::BufferUnderfilled { len: 3, requested: 16 }) => {}
            other => panic!("expected BufferUnderfilled, got {other:?}"),
        }
    }

    /// The actor gradient chains critic 1's input gradients into the actor's
    /// backward pass; a sign or slicing error here trains the policy toward
    /// the worst action instead of the best. Check the whole composed path
    /// against central finite differences on the actor parameters.
    #[test]
    fn actor_gradient_matches_finite_differences() {
        let obs = BoxSpace::new(alloc::vec![0.0, 0.0], alloc::vec![2.0, 1.0]).unwrap();
        let act = BoxSpace::scalar(0.0, 2.0).unwrap();
        let mut agent = Td3Agent::new(obs, act.clone(), quick_hp(&act)).unwrap();
        let batch = 5;
        let observations: Vec<f64> =
            alloc::vec![0.1, 0.9, 0.75, 0.2, 1.3, 0.0, 0.5, 0.5, 1.9, 1.0];

        let loss = |actor: &Mlp, critic: &Mlp| -> f64 {
            let mut total = 0.0;
            for b in 0..batch {
                let o = &observations[b * 2..(b + 1) * 2];
                let a = actor.forward(o);
                let q = critic.forward(&[o[0], o[1], a[0]]);
                total -= q[0];
            }
            total / batch as f64
        };

        // Analytic gradient via the same composed path update() uses.
        let mut cache_actor = crate::nn::ForwardCache::new();
        let mut cache_critic = crate::nn::ForwardCache::new();
        agent.actor.forward_batch(&observations, batch, &mut cache_actor);
        let actions = agent.actor.output_of(&cache_actor).to_vec();
        let mut critic_in = alloc::vec![0.0; batch * 3];
        for b in 0..batch {
            critic_in[b * 3..b * 3 + 2].copy_from_slice(&observations[b * 2..(b + 1) * 2]);
            critic_in[b * 3 + 2] = actions[b];
        }
        agent.critic1.forward_batch(&critic_in, batch, &mut cache_critic);
        let d_out = alloc::vec![-1.0 / batch as f64; batch];
        let mut d_critic_in = alloc::vec![0.0; batch * 3];
        agent
            .critic1
            .backward_batch(&cache_critic, &d_out, None, Some(&mut d_critic_in));
        let d_action: Vec<f64> = (0..batch).map(|b| d_critic_in[b * 3 + 2]).collect();
        let mut grads = alloc::vec![0.0; agent.actor.params().len()];
        agent.actor.backward_batch(&cache_actor, &d_action, Some(&mut grads), None);

        // Central finite differences over a spread of parameter positions.
        let n = agent.actor.params().len();
        let step = 1e-6;
        for idx in (0..n).step_by(n / 40) {
            let original = agent.actor.params()[idx];
            agent.actor.params_mut()[idx] = original + step;
            let up = loss(&agent.actor, &agent.critic1);
            agent.actor.params_mut()[idx] = original - step;
            let down = loss(&agent.actor, &agent.critic1);
            agent.actor.params_mut()[idx] = original;
            let numeric = (up - down) / (2.0 * step);
            let scale = numeric.abs().max(grads[idx].abs()).max(1e-8);
            assert!(
                (numeric - grads[idx]).abs() / scale < 1e-4,
                "param {idx}: analytic {} vs numeric {numeric}",
                grads[idx]
            );
        }
    }

    #[test]
    fn full_tau_polyak_copies_online_networks() {
        let (obs, act) = tiny_spaces();
        let hp = Td3Hyperparams { tau: 1.0, policy_delay: 1, ..quick_hp(&act) };
        let mut agent = Td3Agent::new(obs, act, hp).unwrap();
        fill_buffer(&mut agent, 64);
        agent.update().unwrap();
        assert_eq!(agent.target_actor.params(), agent.actor.params());
        assert_eq!(agent.target_critic1.params(), agent.critic1.params());
        assert_eq!(agent.target_critic2.params(), agent.critic2.params());
    }

    #[test]
    fn actor_changes_at_most_once_per_policy_delay() {
        let (obs, act) = tiny_spaces();
        let hp = Td3Hyperparams { policy_delay: 3, ..quick_hp(&act) };
        let mut agent = Td3Agent::new(obs, act, hp).unwrap();
        fill_buffer(&mut agent, 64);
        let mut changes = Vec::new();
        let mut before = agent.actor.params().to_vec();
        for k in 1..=9 {
            let diag = agent.update().unwrap();
            let changed = agent.actor.params() != before.as_slice();
            assert_eq!(changed, k % 3 == 0, "update {k}");
            assert_eq!(diag.actor_loss.is_some(), k % 3 == 0);
            if changed {
                changes.push(k);
                before = agent.actor.params().to_vec();
            }
        }
        assert_eq!(changes, alloc::vec![3, 6, 9]);
    }

    /// Terminal transitions pin the TD target to the raw reward: a buffer of
    /// only terminal transitions with reward 3 drives the critics to 3, not
    /// to the discounted series 3/(1-gamma).
    #[test]
    fn terminal_mask_stops_bootstrapping() {
        let obs_space = BoxSpace::scalar(0.0, 0.0).unwrap();
        let act_space = BoxSpace::scalar(0.0, 0.0).unwrap();
        let hp = Td3Hyperparams {
            batch_size: 8,
            buffer_capacity: 64,
            warmup_steps: 0,
            discount: 0.9,
            tau: 0.05,
            ..Td3Hyperparams::for_action_space(&act_space)
        };
        let mut agent = Td3Agent::new(obs_space, act_space, hp).unwrap();
        for _ in 0..32 {
            agent.observe(&[0.0], &[0.0], 3.0, &[0.0], true);
        }
        for _ in 0..1_500 {
            agent.update().unwrap();
        }
        let q1 = agent.critic1.forward(&[0.0, 0.0])[0];
        let q2 = agent.critic2.forward(&[0.0, 0.0])[0];
        assert!((q1 - 3.0).abs() < 1e-2, "critic 1 reached {q1}");
        assert!((q2 - 3.0).abs() < 1e-2, "critic 2 reached {q2}");
    }

    /// The Bellman fixed point of a single state with constant reward 1 and
    /// discount 0.5 is 1/(1 - 0.5) = 2. With a degenerate action box the
    /// squash has zero width, so the actor is inert and the critics must
    /// find the value on their own.
    #[test]
    fn critics_converge_to_the_geometric_series_value() {
        let obs_space = BoxSpace::scalar(0.0, 0.0).unwrap();
        let act_space = BoxSpace::scalar(0.0, 0.0).unwrap();
        let hp = Td3Hyperparams {
            batch_size: 8,
            buffer_capacity: 64,
            warmup_steps: 0,
            discount: 0.5,
            tau: 0.05,
            target_noise_sd: 0.0,
            target_noise_clip: 0.0,
            ..Td3Hyperparams::for_action_space(&act_space)
        };
        let mut agent = Td3Agent::new(obs_space, act_space, hp).unwrap();
        let initial_actor = agent.actor.params().to_vec();
        for _ in 0..32 {
            agent.observe(&[0.0], &[0.0], 1.0, &[0.0], false);
        }
        for _ in 0..2_500 {
            agent.update().unwrap();
        }
        let q1 = agent.critic1.forward(&[0.0, 0.0])[0];
        let q2 = agent.critic2.forward(&[0.0, 0.0])[0];
        assert!((q1 - 2.0).abs() < 1e-2, "critic 1 reached {q1}");
        assert!((q2 - 2.0).abs() < 1e-2, "critic 2 reached {q2}");
        // A zero-width action box gives the actor exactly zero gradient.
        assert_eq!(agent.actor.params(), initial_actor.as_slice());
    }

    #[test]
    fn training_is_deterministic_given_the_seed() {
        let env = FisheryEnv::new(FisheryParams::default()).unwrap();
        let hp = Td3Hyperparams {
            total_env_steps: 600,
            warmup_steps: 100,
            batch_size: 32,
            seed: 42,
            ..Td3Hyperparams::for_action_space(env.action_space())
        };
        let a = train(&env, &hp, 200, 3).unwrap();
        let b = train(&env, &hp, 200, 3).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.agent.actor().params(), b.agent.actor().params());
    }

    #[test]
    fn oversized_buffer_capacity_does_not_change_training() {
        let env = FisheryEnv::new(FisheryParams::default()).unwrap();
        let base = Td3Hyperparams {
            total_env_steps: 500,
            warmup_steps: 100,
            batch_size: 32,
            seed: 7,
            ..Td3Hyperparams::for_action_space(env.action_space())
        };
        let small = Td3Hyperparams { buffer_capacity: 1_000, ..base.clone() };
        let large = Td3Hyperparams { buffer_capacity: 100_000, ..base };
        let a = train(&env, &small, 250, 2).unwrap();
        let b = train(&env, &large, 250, 2).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.agent.actor().params(), b.agent.actor().params());
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        let (_, act) = tiny_spaces();
        let good = Td3Hyperparams::for_action_space(&act);
        assert!(good.validate().is_ok());
        let cases = [
            Td3Hyperparams { tau: 0.0, ..good.clone() },
            Td3Hyperparams { tau: 1.5, ..good.clone() },
            Td3Hyperparams { policy_delay: 0, ..good.clone() },
            Td3Hyperparams { actor_lr: -1.0, ..good.clone() },
            Td3Hyperparams { batch_size: 0, ..good.clone() },
            Td3Hyperparams { buffer_capacity: 1, ..good.clone() },
            Td3Hyperparams { discount: 0.0, ..good.clone() },
            Td3Hyperparams { target_noise_sd: 0.1, target_noise_clip: 0.0, ..good.clone() },
        ];
        for hp in cases {
            assert!(hp.validate().is_err(), "{hp:?} should be invalid");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn exploration_actions_stay_inside_the_box(
            seed in 0u64..1_000,
            obs in 0.0f64..2.0,
        ) {
            let (obs_space, act_space) = tiny_spaces();
            let hp = Td3Hyperparams {
                seed,
                warmup_steps: 3,
                exploration_noise_sd: 1.5,
                ..quick_hp(&act_space)
            };
            let mut agent = Td3Agent::new(obs_space, act_space.clone(), hp).unwrap();
            for i in 0..64 {
                let action = agent.select_action(&[obs], true);
                prop_assert!(act_space.contains(&action), "step {i}: {action:?}");
                agent.observe(&[obs], &action, 0.0, &[obs], false);
            }
        }

        /// A polyak step contracts the target toward the online network by
        /// exactly (1 - tau) in every coordinate, so the distance strictly
        /// decreases unless the two already coincide.
        #[test]
        fn polyak_step_contracts_the_target_gap(
            seed in 0u64..1_000,
            tau in 0.001f64..0.999,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let online = Mlp::new(&[2, 8, 1], OutputTransform::Identity, &mut rng).unwrap();
            let mut target = Mlp::new(&[2, 8, 1], OutputTransform::Identity, &mut rng).unwrap();
            let gap_before: f64 = target
                .params()
                .iter()
                .zip(online.params())
                .map(|(t, o)| (t - o) * (t - o))
                .sum::<f64>()
                .sqrt();
            polyak_average(&mut target, &online, tau);
            let gap_after: f64 = target
                .params()
                .iter()
                .zip(online.params())
                .map(|(t, o)| (t - o) * (t - o))
                .sum::<f64>()
                .sqrt();
            prop_assert!(gap_after < gap_before);
            prop_assert!((gap_after - (1.0 - tau) * gap_before).abs() < 1e-9 * gap_before);
        }
    }
}
