//! Stochastic fishery with logistic regrowth and a harvest-quota control.
//!
//! Each step the manager sets a quota; the realized harvest is capped by the
//! available stock. Escapement (stock left in the water) regrows logistically
//! and is then hit by multiplicative lognormal recruitment noise with median 1,
//! so the deterministic skeleton is exactly the `sigma = 0` dynamics:
//!
//! ```text
//! h  = min(quota, X)
//! S  = X - h
//! X' = clamp((S + r*S*(1 - S/K)) * exp(sigma * xi), 0, 2K),  xi ~ N(0, 1)
//! ```
//!
//! The reward is the realized harvest. Leaving escapement `K/2` in the water
//! maximizes the sustainable per-step yield `r*S*(1 - S/K)`.

use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::decision::{EnvConfig, Environment, StepResult};
use crate::space::BoxSpace;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FisheryParams {
    /// Logistic growth rate.
    pub r: f64,
    /// Carrying capacity; states and quotas live in `[0, 2K]`.
    pub k: f64,
    /// Log-standard deviation of the recruitment noise (median-1 lognormal).
    pub sigma: f64,
    /// Initial stock.
    pub x0: f64,
    pub config: EnvConfig,
}

impl Default for FisheryParams {
    fn default() -> Self {
        FisheryParams {
            r: 0.3,
            k: 1.0,
            sigma: 0.1,
            x0: 0.75,
            config: EnvConfig { horizon: 100, discount: 1.0, seed: 0 },
        }
    }
}

impl FisheryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::config("fishery r must be positive and finite"));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::config("fishery K must be positive and finite"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::config("fishery sigma must be non-negative and finite"));
        }
        if !(self.x0.is_finite() && (0.0..=2.0 * self.k).contains(&self.x0)) {
            return Err(Error::config("fishery x0 must lie in [0, 2K]"));
        }
        self.config.validate()
    }
}

/// Fishery environment. Observation is the current stock `[X]`; the action is
/// a quota in `[0, 2K]`.
#[derive(Debug, Clone)]
pub struct FisheryEnv {
    params: FisheryParams,
    obs_space: BoxSpace,
    act_space: BoxSpace,
    rng: ChaCha8Rng,
    stock: f64,
    t: usize,
}

impl FisheryEnv {
    pub fn new(params: FisheryParams) -> Result<Self> {
        params.validate()?;
        let top = 2.0 * params.k;
        let seed = params.config.seed;
        Ok(FisheryEnv {
            obs_space: BoxSpace::scalar(0.0, top)?,
            act_space: BoxSpace::scalar(0.0, top)?,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stock: params.x0,
            t: 0,
            params,
        })
    }

    pub fn params(&self) -> &FisheryParams {
        &self.params
    }

    /// Deterministic regrowth map applied to escapement.
    pub fn growth(&self, escapement: f64) -> f64 {
        let s = escapement;
        s + self.params.r * s * (1.0 - s / self.params.k)
    }
}

impl Environment for FisheryEnv {
    fn observation_space(&self) -> &BoxSpace {
        &self.obs_space
    }

    fn action_space(&self) -> &BoxSpace {
        &self.act_space
    }

    fn config(&self) -> &EnvConfig {
        &self.params.config
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.stock = self.params.x0;
        self.t = 0;
        vec![self.stock]
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if action.len() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: action.len() });
        }
        if self.t >= self.params.config.horizon {
            return Err(Error::EpisodeOver { horizon: self.params.config.horizon });
        }
        if !action[0].is_finite() {
            return Err(Error::NonFiniteAction { step: self.t });
        }
        let top = 2.0 * self.params.k;
        let quota = action[0].clamp(0.0, top);

        let harvest = quota.min(self.stock);
        let escapement = self.stock - harvest;
        let grown = self.growth(escapement);
        // The normal draw happens even when sigma = 0 so that switching noise
        // off does not shift the random stream consumed by later steps.
        let xi: f64 = StandardNormal.sample(&mut self.rng);
        let shock = libm::exp(self.params.sigma * xi);
        self.stock = (grown * shock).clamp(0.0, top);
        self.t += 1;

        Ok(StepResult {
            observation: vec![self.stock],
            reward: harvest,
            terminal: self.t == self.params.config.horizon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::EscapementPolicy;
    use crate::decision::rollout;
    use proptest::prelude::*;

    fn deterministic(r: f64, k: f64, x0: f64) -> FisheryEnv {
        FisheryEnv::new(FisheryParams {
            r,
            k,
            sigma: 0.0,
            x0,
            config: EnvConfig { horizon: 100, discount: 1.0, seed: 0 },
        })
        .unwrap()
    }

    #[test]
    fn single_step_hand_computation() {
        // From X = 0.5 with quota 0.1: harvest 0.1, escapement 0.4,
        // regrowth 0.4 + 0.3*0.4*0.6 = 0.472.
        let mut env = deterministic(0.3, 1.0, 0.5);
        env.reset(0);
        let step = env.step(&[0.1]).unwrap();
        assert_eq!(step.reward, 0.1);
        assert!((step.observation[0] - 0.472).abs() < 1e-12);
    }

    #[test]
    fn unfished_stock_follows_logistic_growth_toward_k() {
        let mut env = deterministic(0.3, 1.0, 0.5);
        let mut obs = env.reset(0);
        assert_eq!(obs[0], 0.5);
        let mut previous = obs[0];
        for _ in 0..60 {
            obs = env.step(&[0.0]).unwrap().observation;
            assert!(obs[0] >= previous);
            previous = obs[0];
        }
        // First growth step: 0.5 -> 0.575; long-run limit is K.
        let mut check = deterministic(0.3, 1.0, 0.5);
        check.reset(0);
        assert!((check.step(&[0.0]).unwrap().observation[0] - 0.575).abs() < 1e-12);
        assert!((previous - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constant_escapement_settles_on_fixed_point_yield() {
        // Escapement 0.5 from x0 = 0.75: first harvest 0.25, then the stock
        // regrows to 0.575 every step and the policy harvests 0.075.
        let mut env = deterministic(0.3, 1.0, 0.75);
        let policy = EscapementPolicy::new(0.5).unwrap();
        let traj = rollout(&mut env, &policy, 0).unwrap();
        assert!((traj.rewards[0] - 0.25).abs() < 1e-12);
        for (t, &r) in traj.rewards.iter().enumerate().skip(1) {
            assert!((r - 0.075).abs() < 1e-12, "step {t}: reward {r}");
        }
        for obs in &traj.observations[1..] {
            assert!((obs[0] - 0.575).abs() < 1e-12);
        }
    }

    #[test]
    fn harvest_never_exceeds_available_stock() {
        let mut env = deterministic(0.3, 1.0, 0.3);
        env.reset(0);
        let step = env.step(&[5.0]).unwrap();
        // Quota clamps to 2K = 2 and the harvest caps at the stock.
        assert_eq!(step.reward, 0.3);
        assert_eq!(step.observation[0], 0.0);
    }

    #[test]
    fn noise_has_median_one_and_mean_exp_half_sigma_squared() {
        // One growth step from a fixed state, many replicates: the ratio
        // X'' / growth(X) is lognormal with mean exp(sigma^2 / 2).
        let sigma = 0.3;
        let mut env = FisheryEnv::new(FisheryParams {
            sigma,
            config: EnvConfig { horizon: 1, discount: 1.0, seed: 0 },
            ..FisheryParams::default()
        })
        .unwrap();
        let base = env.growth(env.params().x0);
        let n = 40_000;
        let mut sum = 0.0;
        let mut above = 0usize;
        for i in 0..n {
            env.reset(1_000 + i as u64);
            let x = env.step(&[0.0]).unwrap().observation[0];
            let ratio = x / base;
            sum += ratio;
            if ratio > 1.0 {
                above += 1;
            }
        }
        let mean = sum / n as f64;
        let expected = libm::exp(sigma * sigma / 2.0);
        // Monte-Carlo tolerance: sd of the lognormal is ~0.31, so the mean of
        // 40k draws has standard error ~0.0016; allow 4 standard errors.
        assert!(
            (mean - expected).abs() < 0.007,
            "mean ratio {mean}, expected {expected}"
        );
        // Median 1: about half the draws land above the deterministic value.
        let frac = above as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "fraction above median: {frac}");
    }

    #[test]
    fn same_seed_reproduces_the_exact_trajectory() {
        let params = FisheryParams::default();
        let mut a = FisheryEnv::new(params.clone()).unwrap();
        let mut b = FisheryEnv::new(params).unwrap();
        let policy = EscapementPolicy::new(0.5).unwrap();
        let ta = rollout(&mut a, &policy, 42).unwrap();
        let tb = rollout(&mut b, &policy, 42).unwrap();
        assert_eq!(ta, tb);
        let tc = rollout(&mut a, &policy, 43).unwrap();
        assert_ne!(ta, tc);
    }

    #[test]
    fn invalid_params_are_rejected_by_name() {
        let bad = FisheryParams { r: -0.1, ..FisheryParams::default() };
        let msg = alloc::format!("{}", FisheryEnv::new(bad).unwrap_err());
        assert!(msg.contains("r must be positive"));
        let bad = FisheryParams { x0: 3.0, ..FisheryParams::default() };
        assert!(FisheryEnv::new(bad).is_err());
    }

    proptest! {
        #[test]
        fn states_and_rewards_respect_bounds(
            seed in 0u64..500,
            quota in -1.0f64..4.0,
            sigma in 0.0f64..0.5,
            r in 0.05f64..2.5,
        ) {
            let mut env = FisheryEnv::new(FisheryParams {
                r,
                sigma,
                config: EnvConfig { horizon: 30, discount: 1.0, seed: 0 },
                ..FisheryParams::default()
            }).unwrap();
            let mut obs = env.reset(seed);
            for _ in 0..30 {
                let before = obs[0];
                let step = env.step(&[quota]).unwrap();
                prop_assert!(step.reward <= before + 1e-15);
                prop_assert!(step.reward >= 0.0);
                prop_assert!(env.observation_space().contains(&step.observation));
                obs = step.observation;
            }
        }
    }
}
