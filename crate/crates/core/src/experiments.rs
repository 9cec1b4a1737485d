//! Evaluation and hyperparameter search harness.
//!
//! Everything here is replicate-based Monte Carlo: a policy is rolled out on
//! `R` independently seeded episodes (replicate `i` uses `base_seed + i`),
//! and per-step statistics are aggregated with normal-approximation
//! confidence intervals. Random search tries hyperparameter points sampled
//! from a box, scores each by the trained policy's mean evaluation return,
//! and keeps the best; failed trials are recorded and skipped rather than
//! aborting the search.

use alloc::vec::Vec;

use crate::decision::{rollout, trajectory_return, Environment, Policy, Trajectory};
use crate::{Error, Result};

/// Monte Carlo summary of a policy over independently seeded replicates.
///
/// Step statistics are indexed by time: `step_state_mean[t]` holds the mean
/// observation vector after `t` steps (so index 0 is the initial state and
/// the last index is the final state), while `step_reward_mean[t]` is the
/// mean reward of step `t`. Half-widths are `1.96 * sd / sqrt(R)`, zero when
/// `R = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub replicates: usize,
    /// Discounted return of each replicate, under the environment's discount.
    pub returns: Vec<f64>,
    pub mean_return: f64,
    /// Sample standard deviation of the replicate returns.
    pub return_sd: f64,
    /// Final observation of each replicate.
    pub final_observations: Vec<Vec<f64>>,
    pub step_state_mean: Vec<Vec<f64>>,
    pub step_state_half_width: Vec<Vec<f64>>,
    pub step_reward_mean: Vec<f64>,
}

impl EvaluationReport {
    /// Number of steps per episode.
    pub fn horizon(&self) -> usize {
        self.step_reward_mean.len()
    }

    /// Running sum of the mean per-step rewards; entry `t` is the mean
    /// cumulative reward collected through step `t`.
    pub fn cumulative_reward_mean(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.step_reward_mean.len());
        let mut total = 0.0;
        for &r in &self.step_reward_mean {
            total += r;
            out.push(total);
        }
        out
    }
}

fn sample_sd(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    libm::sqrt(var)
}

/// Rolls out `policy` on `replicates` episodes seeded `base_seed + i` and
/// aggregates returns and per-step statistics.
///
/// A failure inside replicate `i` is reported as [`Error::Replicate`] with
/// that index. All episodes must run to the same horizon.
pub fn evaluate_policy<E: Environment + Clone, P: Policy + ?Sized>(
    proto: &E,
    policy: &P,
    replicates: usize,
    base_seed: u64,
) -> Result<EvaluationReport> {
    if replicates == 0 {
        return Err(Error::config("evaluation needs at least one replicate"));
    }
    let discount = proto.config().discount;
    let mut env = proto.clone();
    let mut trajectories: Vec<Trajectory> = Vec::with_capacity(replicates);
    for i in 0..replicates {
        let trajectory = rollout(&mut env, policy, base_seed.wrapping_add(i as u64))
            .map_err(|e| Error::Replicate { index: i, source: alloc::boxed::Box::new(e) })?;
        if let Some(first) = trajectories.first() {
            assert_eq!(trajectory.len(), first.len(), "replicates must share the horizon");
        }
        trajectories.push(trajectory);
    }

    let returns: Vec<f64> =
        trajectories.iter().map(|t| trajectory_return(t, discount)).collect();
    let mean_return = returns.iter().sum::<f64>() / replicates as f64;
    let return_sd = sample_sd(&returns, mean_return);

    let horizon = trajectories[0].len();
    let obs_dim = trajectories[0].observations[0].len();
    let r = replicates as f64;
    let ci_scale = 1.96 / libm::sqrt(r);
    let mut step_state_mean = Vec::with_capacity(horizon + 1);
    let mut step_state_half_width = Vec::with_capacity(horizon + 1);
    let mut component = Vec::with_capacity(replicates);
    for t in 0..=horizon {
        let mut means = Vec::with_capacity(obs_dim);
        let mut widths = Vec::with_capacity(obs_dim);
        for d in 0..obs_dim {
            component.clear();
            component.extend(trajectories.iter().map(|tr| tr.observations[t][d]));
            let mean = component.iter().sum::<f64>() / r;
            means.push(mean);
            widths.push(ci_scale * sample_sd(&component, mean));
        }
        step_state_mean.push(means);
        step_state_half_width.push(widths);
    }
    let step_reward_mean = (0..horizon)
        .map(|t| trajectories.iter().map(|tr| tr.rewards[t]).sum::<f64>() / r)
        .collect();

    Ok(EvaluationReport {
        replicates,
        final_observations: trajectories
            .iter()
            .map(|t| t.observations[horizon].clone())
            .collect(),
        returns,
        mean_return,
        return_sd,
        step_state_mean,
        step_state_half_width,
        step_reward_mean,
    })
}

/// The policy's action at each probe observation, in order. Useful for
/// plotting a learned controller against a rule like constant escapement.
pub fn extract_policy_curve<P: Policy + ?Sized>(
    policy: &P,
    observations: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    observations.iter().map(|obs| policy.action(obs)).collect()
}

/// Index of the largest finite value, ignoring NaN entries; ties go to the
/// earliest index. `None` when nothing is finite.
pub fn best_index(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(feature = "std")]
pub use tune::{random_search_tune, SearchSpace, TrialRecord, TuneResult};

#[cfg(feature = "std")]
mod tune {
    use super::*;
    use crate::td3::{train, Td3Hyperparams};
    use alloc::format;
    use alloc::string::String;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Box of hyperparameter ranges explored by random search. Learning
    /// rates and tau are sampled log-uniformly, exploration noise uniformly,
    /// and the policy delay uniformly over integers. Degenerate ranges
    /// (`lo == hi`) pin a coordinate.
    #[derive(Debug, Clone, PartialEq)]
    pub struct SearchSpace {
        pub actor_lr: (f64, f64),
        pub critic_lr: (f64, f64),
        pub tau: (f64, f64),
        pub exploration_noise_sd: (f64, f64),
        pub policy_delay: (usize, usize),
    }

    impl SearchSpace {
        /// Ranges bracketing a base point: learning rates over roughly a
        /// decade around the base, tau a factor of four either way,
        /// exploration noise from a quarter to 2.5 times the base, and
        /// policy delay 1 to 3.
        pub fn around(base: &Td3Hyperparams) -> Self {
            SearchSpace {
                actor_lr: (base.actor_lr / 10.0, base.actor_lr * 3.0),
                critic_lr: (base.critic_lr / 10.0, base.critic_lr * 3.0),
                tau: ((base.tau / 4.0).min(1.0), (base.tau * 4.0).min(1.0)),
                exploration_noise_sd: (
                    base.exploration_noise_sd * 0.25,
                    base.exploration_noise_sd * 2.5,
                ),
                policy_delay: (1, 3),
            }
        }

        pub fn validate(&self) -> crate::Result<()> {
            for (name, (lo, hi)) in [
                ("actor_lr", self.actor_lr),
                ("critic_lr", self.critic_lr),
                ("tau", self.tau),
            ] {
                if !(lo > 0.0 && lo.is_finite() && hi >= lo && hi.is_finite()) {
                    return Err(Error::config(format!(
                        "{name} range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
                    )));
                }
            }
            let (lo, hi) = self.exploration_noise_sd;
            if !(lo >= 0.0 && lo.is_finite() && hi >= lo && hi.is_finite()) {
                return Err(Error::config(format!(
                    "exploration_noise_sd range must satisfy 0 <= lo <= hi, got [{lo}, {hi}]"
                )));
            }
            let (lo, hi) = self.policy_delay;
            if lo == 0 || hi < lo {
                return Err(Error::config(format!(
                    "policy_delay range must satisfy 1 <= lo <= hi, got [{lo}, {hi}]"
                )));
            }
            Ok(())
        }

        fn sample<R: Rng>(&self, base: &Td3Hyperparams, rng: &mut R) -> Td3Hyperparams {
            fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
                if lo == hi {
                    return lo;
                }
                libm::exp(rng.gen_range(libm::log(lo)..=libm::log(hi)))
            }
            let (nlo, nhi) = self.exploration_noise_sd;
            Td3Hyperparams {
                actor_lr: log_uniform(rng, self.actor_lr),
                critic_lr: log_uniform(rng, self.critic_lr),
                tau: log_uniform(rng, self.tau),
                exploration_noise_sd: if nlo == nhi {
                    nlo
                } else {
                    rng.gen_range(nlo..=nhi)
                },
                policy_delay: rng.gen_range(self.policy_delay.0..=self.policy_delay.1),
                ..base.clone()
            }
        }
    }

    /// Outcome of one random-search trial. `mean_return` is NaN when the
    /// trial failed; `error` then says why.
    #[derive(Debug, Clone)]
    pub struct TrialRecord {
        pub index: usize,
        pub hyperparams: Td3Hyperparams,
        pub mean_return: f64,
        pub error: Option<String>,
        pub wall_time_s: f64,
    }

    #[derive(Debug, Clone)]
    pub struct TuneResult {
        pub best: Td3Hyperparams,
        pub best_mean_return: f64,
        pub trials: Vec<TrialRecord>,
    }

    /// Random search over `space`, scoring each point by the mean return of
    /// the final trained policy over `eval_episodes` evaluation rollouts.
    ///
    /// Trial 0 evaluates `base` unchanged so the search never does worse
    /// than the defaults; later trials sample the space. Trial `k` trains
    /// with seed `seed + k`. Trials that fail (for example a diverged loss)
    /// are recorded with the error message and skipped. Errors only if every
    /// trial fails.
    pub fn random_search_tune<E: Environment + Clone>(
        proto: &E,
        base: &Td3Hyperparams,
        space: &SearchSpace,
        n_trials: usize,
        eval_episodes: usize,
        seed: u64,
    ) -> crate::Result<TuneResult> {
        if n_trials == 0 {
            return Err(Error::config("random search needs at least one trial"));
        }
        if base.total_env_steps == 0 || eval_episodes == 0 {
            return Err(Error::config(
                "tuning needs a positive step budget and at least one evaluation episode",
            ));
        }
        space.validate()?;
        base.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trials = Vec::with_capacity(n_trials);
        for index in 0..n_trials {
            let mut hp = if index == 0 { base.clone() } else { space.sample(base, &mut rng) };
            hp.seed = seed.wrapping_add(index as u64);
            let started = std::time::Instant::now();
            let outcome = train(proto, &hp, hp.total_env_steps, eval_episodes);
            let wall_time_s = started.elapsed().as_secs_f64();
            let (mean_return, error) = match outcome {
                Ok(result) => {
                    let last = result
                        .curve
                        .last()
                        .expect("training always evaluates at the final step");
                    (last.eval_return_mean, None)
                }
                Err(failure) => (f64::NAN, Some(format!("{}", failure.error))),
            };
            trials.push(TrialRecord { index, hyperparams: hp, mean_return, error, wall_time_s });
        }

        let scores: Vec<f64> = trials.iter().map(|t| t.mean_return).collect();
        let best = best_index(&scores).ok_or_else(|| {
            Error::config(format!(
                "all {n_trials} tuning trials failed; first error: {}",
                trials[0].error.as_deref().unwrap_or("unknown")
            ))
        })?;
        Ok(TuneResult {
            best: trials[best].hyperparams.clone(),
            best_mean_return: trials[best].mean_return,
            trials,
        })
    }
}
