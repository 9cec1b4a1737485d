//! Subcommand implementations. Each command loads the strict config, runs
//! the corresponding core routine, and writes CSV artifacts plus a manifest
//! into `--out`. Everything an artifact contains is derived from the config
//! and seed, never from the clock, so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use ecorl_core::baselines::{fitted_escapement, greedy_quotas};
use ecorl_core::conservation::{equilibria, fold_points, lower_branch_state, ConservationEnv};
use ecorl_core::decision::{rollout, trajectory_csv, Environment};
use ecorl_core::experiments::{evaluate_policy, extract_policy_curve, random_search_tune};
use ecorl_core::fishery::FisheryEnv;
use ecorl_core::td3::{train, Td3Hyperparams};

use crate::config::RunConfig;
use crate::output::{csv_row, OutDir};
use crate::policies::PolicySpec;
use crate::stock::{recommend_quotas, recommendations_csv, StockSeries};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EnvKind {
    Fishery,
    Conservation,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Fishery => "fishery",
            EnvKind::Conservation => "conservation",
        }
    }
}

fn fishery_env(config: &RunConfig, seed: u64) -> Result<FisheryEnv, CliError> {
    Ok(FisheryEnv::new(config.fishery.to_params(seed))?)
}

fn conservation_env(config: &RunConfig, seed: u64) -> Result<ConservationEnv, CliError> {
    Ok(ConservationEnv::new(config.conservation.to_params(seed))?)
}

fn learning_curve_csv(curve: &[ecorl_core::td3::CurvePoint]) -> String {
    let mut text = String::from("env_step,eval_return_mean,eval_return_sd\n");
    for point in curve {
        text.push_str(&csv_row(&[
            point.env_step.to_string(),
            point.eval_return_mean.to_string(),
            point.eval_return_sd.to_string(),
        ]));
    }
    text
}

pub fn train_cmd(
    env_kind: EnvKind,
    config: &RunConfig,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    match env_kind {
        EnvKind::Fishery => run_train(&fishery_env(config, seed)?, env_kind, config, seed, out),
        EnvKind::Conservation => {
            run_train(&conservation_env(config, seed)?, env_kind, config, seed, out)
        }
    }
}

fn run_train<E: Environment + Clone>(
    proto: &E,
    env_kind: EnvKind,
    config: &RunConfig,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let hp = config.td3.resolve(proto.action_space(), seed);
    let mut out = OutDir::create(out)?;
    let exp = &config.experiments;
    match train(proto, &hp, exp.eval_interval, exp.eval_episodes) {
        Ok(result) => {
            out.write("learning_curve.csv", &learning_curve_csv(&result.curve))?;
            out.write("actor.txt", &result.agent.actor().to_text())?;
            let last = result.curve.last().expect("training emits at least one point");
            out.detail("env", env_kind.name());
            out.detail("final_eval_return_mean", last.eval_return_mean);
            out.detail("final_eval_return_sd", last.eval_return_sd);
            out.detail("updates", result.agent.update_count());
            out.finish("train", seed, config)?;
            println!(
                "trained {} for {} steps: final evaluation return {:.4} (sd {:.4})",
                env_kind.name(),
                hp.total_env_steps,
                last.eval_return_mean,
                last.eval_return_sd
            );
            Ok(())
        }
        Err(failure) => {
            // Keep the partial curve around for post-mortems, then report
            // the training error itself.
            out.write("learning_curve.csv", &learning_curve_csv(&failure.partial_curve))?;
            out.detail("env", env_kind.name());
            out.detail("error", failure.error.to_string());
            out.finish("train", seed, config)?;
            Err(CliError::from(failure.error))
        }
    }
}

pub fn evaluate_cmd(
    env_kind: EnvKind,
    policy_spec: &PolicySpec,
    config: &RunConfig,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    match env_kind {
        EnvKind::Fishery => {
            run_evaluate(&fishery_env(config, seed)?, env_kind, policy_spec, config, seed, out)
        }
        EnvKind::Conservation => run_evaluate(
            &conservation_env(config, seed)?,
            env_kind,
            policy_spec,
            config,
            seed,
            out,
        ),
    }
}

fn run_evaluate<E: Environment + Clone>(
    proto: &E,
    env_kind: EnvKind,
    policy_spec: &PolicySpec,
    config: &RunConfig,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let policy = policy_spec.build(proto, config, env_kind, seed)?;
    let report = evaluate_policy(proto, &*policy, config.experiments.replicates, seed)?;
    let obs_dim = proto.observation_space().dim();

    let mut text = String::from("t");
    if obs_dim == 1 {
        text.push_str(",mean_state,ci_lo,ci_hi");
    } else {
        for d in 0..obs_dim {
            let _ = write!(text, ",mean_state_{d},ci_lo_{d},ci_hi_{d}");
        }
    }
    text.push_str(",mean_reward\n");
    for t in 0..=report.horizon() {
        let _ = write!(text, "{t}");
        for d in 0..obs_dim {
            let mean = report.step_state_mean[t][d];
            let half = report.step_state_half_width[t][d];
            let _ = write!(text, ",{},{},{}", mean, mean - half, mean + half);
        }
        // One reward per transition: the row for the final state repeats the
        // last mean reward so the table stays rectangular.
        let reward = report.step_reward_mean[t.min(report.horizon() - 1)];
        let _ = write!(text, ",{reward}\n");
    }

    let mut returns = String::from("replicate,return\n");
    for (i, value) in report.returns.iter().enumerate() {
        returns.push_str(&csv_row(&[i.to_string(), value.to_string()]));
    }

    // One full episode at the base seed, the same draw as replicate 0.
    let mut sample_env = proto.clone();
    let sample = rollout(&mut sample_env, &*policy, seed)?;

    let mut out = OutDir::create(out)?;
    out.write("evaluation.csv", &text)?;
    out.write("returns.csv", &returns)?;
    out.write("trajectory.csv", &trajectory_csv(&sample))?;
    out.detail("env", env_kind.name());
    out.detail("replicates", report.replicates as u64);
    out.detail("mean_return", report.mean_return);
    out.detail("return_sd", report.return_sd);
    out.finish("evaluate", seed, config)?;
    println!(
        "evaluated {} over {} replicates: mean return {:.4} (sd {:.4})",
        env_kind.name(),
        report.replicates,
        report.mean_return,
        report.return_sd
    );
    Ok(())
}

pub fn tune_cmd(
    env_kind: EnvKind,
    config: &RunConfig,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    match env_kind {
        EnvKind::Fishery => run_tune(&fishery_env(config, seed)?, env_kind, config, seed, out),
        EnvKind::Conservation => {
            run_tune(&conservation_env(config, seed)?, env_kind, config, seed, out)
        }
    }
}

fn run_tune<E: Environment + Clone>(
    proto: &E,
    env_kind: EnvKind,
    config: &RunConfig,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let full = config.td3.resolve(proto.action_space(), seed);
    let trial_hp = config.tune.trial_hyperparams(&full)?;
    let space = config.tune.resolve_space(&trial_hp);
    let result = random_search_tune(
        proto,
        &trial_hp,
        &space,
        config.tune.n_trials,
        config.experiments.eval_episodes,
        seed,
    )?;

    let mut trials = String::from(
        "trial_id,actor_lr,critic_lr,tau,exploration_noise_sd,policy_delay,mean_return,error\n",
    );
    for record in &result.trials {
        let hp = &record.hyperparams;
        trials.push_str(&csv_row(&[
            record.index.to_string(),
            hp.actor_lr.to_string(),
            hp.critic_lr.to_string(),
            hp.tau.to_string(),
            hp.exploration_noise_sd.to_string(),
            hp.policy_delay.to_string(),
            record.mean_return.to_string(),
            record.error.clone().unwrap_or_default(),
        ]));
    }

    // The winning point, restated at the full step budget as a config
    // fragment that `train --config` accepts directly.
    let best = Td3Hyperparams { total_env_steps: full.total_env_steps, ..result.best.clone() };
    let best_toml = format!(
        "[td3]\nactor_lr = {}\ncritic_lr = {}\ntau = {}\npolicy_delay = {}\n\
         exploration_noise_sd = {}\ntarget_noise_sd = {}\ntarget_noise_clip = {}\n\
         batch_size = {}\nbuffer_capacity = {}\nwarmup_steps = {}\ntotal_env_steps = {}\n\
         discount = {}\n",
        best.actor_lr,
        best.critic_lr,
        best.tau,
        best.policy_delay,
        best.exploration_noise_sd,
        best.target_noise_sd,
        best.target_noise_clip,
        best.batch_size,
        best.buffer_capacity,
        best.warmup_steps,
        best.total_env_steps,
        best.discount,
    );

    let mut out = OutDir::create(out)?;
    out.write("trials.csv", &trials)?;
    out.write("best.toml", &best_toml)?;
    out.detail("env", env_kind.name());
    out.detail("best_mean_return", result.best_mean_return);
    out.detail("trials", result.trials.len() as u64);
    out.finish("tune", seed, config)?;
    println!(
        "tuned {} over {} trials of {} steps: best mean return {:.4}",
        env_kind.name(),
        result.trials.len(),
        trial_hp.total_env_steps,
        result.best_mean_return
    );
    Ok(())
}

pub fn policy_curve_cmd(
    env_kind: EnvKind,
    policy_spec: &PolicySpec,
    grid: &GridSpec,
    config: &RunConfig,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    match env_kind {
        EnvKind::Fishery => {
            run_policy_curve(&fishery_env(config, seed)?, env_kind, policy_spec, grid, config, seed, out)
        }
        EnvKind::Conservation => run_policy_curve(
            &conservation_env(config, seed)?,
            env_kind,
            policy_spec,
            grid,
            config,
            seed,
            out,
        ),
    }
}

/// Inclusive observation grid `lo:hi:points` over the first observation
/// dimension; remaining dimensions sit at the environment's reset values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl std::str::FromStr for GridSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || CliError::validation(format!("grid must be lo:hi:points, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let points: usize = parts[2].parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) || points < 2 {
            return Err(CliError::validation(format!(
                "grid needs finite lo <= hi and at least 2 points, got {s:?}"
            )));
        }
        Ok(GridSpec { lo, hi, points })
    }
}

fn run_policy_curve<E: Environment + Clone>(
    proto: &E,
    env_kind: EnvKind,
    policy_spec: &PolicySpec,
    grid: &GridSpec,
    config: &RunConfig,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let policy = policy_spec.build(proto, config, env_kind, seed)?;
    let space = proto.observation_space();
    if grid.lo < space.low()[0] || grid.hi > space.high()[0] {
        return Err(CliError::validation(format!(
            "grid [{}, {}] leaves the observation box [{}, {}]",
            grid.lo,
            grid.hi,
            space.low()[0],
            space.high()[0]
        )));
    }
    // Non-swept dimensions hold their initial observation value.
    let mut probe = proto.clone();
    let rest = probe.reset(seed);
    let observations: Vec<Vec<f64>> = (0..grid.points)
        .map(|i| {
            let x = grid.lo + (grid.hi - grid.lo) * i as f64 / (grid.points - 1) as f64;
            let mut obs = rest.clone();
            obs[0] = x;
            obs
        })
        .collect();
    let actions = extract_policy_curve(&*policy, &observations);

    let obs_dim = space.dim();
    let act_dim = proto.action_space().dim();
    let mut text = String::new();
    if obs_dim == 1 {
        text.push_str("obs");
    } else {
        for d in 0..obs_dim {
            if d > 0 {
                text.push(',');
            }
            let _ = write!(text, "obs_{d}");
        }
    }
    if act_dim == 1 {
        text.push_str(",action\n");
    } else {
        for d in 0..act_dim {
            let _ = write!(text, ",action_{d}");
        }
        text.push('\n');
    }
    for (obs, act) in observations.iter().zip(&actions) {
        let cells: Vec<String> =
            obs.iter().chain(act.iter()).map(|v| v.to_string()).collect();
        text.push_str(&csv_row(&cells));
    }

    let mut out = OutDir::create(out)?;
    out.write("policy_curve.csv", &text)?;
    out.detail("env", env_kind.name());
    out.detail("points", grid.points as u64);
    out.finish("policy-curve", seed, config)?;
    println!("wrote a {}-point policy curve for {}", grid.points, env_kind.name());
    Ok(())
}

pub fn bifurcation_cmd(
    config: &RunConfig,
    m_max: f64,
    m_points: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    if !(m_max > 0.0 && m_max.is_finite()) || m_points < 2 {
        return Err(CliError::validation(format!(
            "bifurcation scan needs finite m_max > 0 and at least 2 points, \
             got m_max {m_max} with {m_points} points"
        )));
    }
    let params = config.conservation.to_params(seed);
    let folds = fold_points(&params)?;

    let mut text = String::from("m,x,stability\n");
    for i in 0..m_points {
        let m = m_max * i as f64 / (m_points - 1) as f64;
        for eq in equilibria(&params, m)? {
            text.push_str(&csv_row(&[
                m.to_string(),
                eq.x.to_string(),
                if eq.stable { "stable" } else { "unstable" }.to_string(),
            ]));
        }
    }

    let collapsed = lower_branch_state(&params, folds.m_upper)
        .expect("degraded branch exists at the tipping point");
    let folds_csv = format!(
        "m_upper_fold,m_lower_fold,collapsed_state\n{},{},{}\n",
        folds.m_upper, folds.m_lower, collapsed
    );

    let mut out = OutDir::create(out)?;
    out.write("bifurcation.csv", &text)?;
    out.write("folds.csv", &folds_csv)?;
    out.detail("m_upper_fold", folds.m_upper);
    out.detail("m_lower_fold", folds.m_lower);
    out.detail("collapsed_state", collapsed);
    out.finish("bifurcation", seed, config)?;
    println!(
        "folds at m = {:.4} (tipping) and m = {:.4} (recovery); degraded branch at {:.4}",
        folds.m_upper, folds.m_lower, collapsed
    );
    Ok(())
}

pub fn solve_mdp_cmd(config: &RunConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let params = config.fishery.to_params(seed);
    let (mdp, solution) = config.mdp.solve(&params)?;
    let quotas = greedy_quotas(&mdp, &solution);
    let threshold = fitted_escapement(&mdp, &solution);

    let mut text = String::from("state,value,action\n");
    for (i, state) in mdp.states().iter().enumerate() {
        text.push_str(&csv_row(&[
            state.to_string(),
            solution.values[i].to_string(),
            quotas[i].to_string(),
        ]));
    }

    let mut out = OutDir::create(out)?;
    out.write("solution.csv", &text)?;
    out.detail("sweeps", solution.sweeps as u64);
    out.detail("fitted_escapement", threshold);
    out.finish("solve-mdp", seed, config)?;
    println!(
        "value iteration converged in {} sweeps; fitted escapement threshold {:.4}",
        solution.sweeps, threshold
    );
    Ok(())
}

pub fn recommend_cmd(
    stock_path: &Path,
    k_estimate: f64,
    policy_spec: &PolicySpec,
    config: &RunConfig,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let series = StockSeries::from_csv_path(stock_path, k_estimate)?;
    let env = fishery_env(config, seed)?;
    let policy = policy_spec.build(&env, config, EnvKind::Fishery, seed)?;
    let (recommendations, warnings) =
        recommend_quotas(&*policy, &series, env.observation_space(), env.action_space());
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }

    let mut out = OutDir::create(out)?;
    out.write("recommendations.csv", &recommendations_csv(&recommendations))?;
    out.detail("years", recommendations.len() as u64);
    out.detail("clip_warnings", warnings.len() as u64);
    out.finish("recommend", seed, config)?;
    println!(
        "recommended quotas for {} years from {}",
        recommendations.len(),
        stock_path.display()
    );
    Ok(())
}
