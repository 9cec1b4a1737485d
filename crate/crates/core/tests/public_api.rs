//! Exercises the library surface the way a downstream user would: configure
//! an environment, train briefly, snapshot the actor, reload it, and check
//! the reloaded policy reproduces the original's behavior.

use ecorl_core::baselines::EscapementPolicy;
use ecorl_core::decision::{Environment, Policy};
use ecorl_core::experiments::evaluate_policy;
use ecorl_core::fishery::{FisheryEnv, FisheryParams};
use ecorl_core::nn::Mlp;
use ecorl_core::td3::{train, Td3Hyperparams};

#[test]
fn train_snapshot_reload_evaluate_round_trip() {
    let env = FisheryEnv::new(FisheryParams::default()).expect("default params are valid");
    let hp = Td3Hyperparams {
        total_env_steps: 1_500,
        warmup_steps: 200,
        batch_size: 32,
        seed: 5,
        ..Td3Hyperparams::for_action_space(env.action_space())
    };
    let result = train(&env, &hp, 500, 3).expect("short training run");
    assert_eq!(result.curve.len(), 3);

    let text = result.agent.actor().to_text();
    let reloaded = Mlp::from_text(&text).expect("snapshot parses back");
    for x in [0.0, 0.3, 0.75, 1.4, 2.0] {
        assert_eq!(result.agent.actor().action(&[x]), reloaded.action(&[x]));
    }

    let report = evaluate_policy(&env, &reloaded, 10, 123).expect("evaluation");
    assert_eq!(report.returns.len(), 10);
    assert!(report.returns.iter().all(|r| r.is_finite()));
}

#[test]
fn baseline_policies_respect_the_action_box() {
    let env = FisheryEnv::new(FisheryParams::default()).expect("default params are valid");
    let policy = EscapementPolicy::new(0.5).expect("positive threshold");
    let lo = env.action_space().low()[0];
    let hi = env.action_space().high()[0];
    for i in 0..=20 {
        let x = 2.0 * i as f64 / 20.0;
        let quota = policy.action(&[x])[0];
        assert!((lo..=hi).contains(&quota), "quota {quota} for stock {x}");
    }
}
