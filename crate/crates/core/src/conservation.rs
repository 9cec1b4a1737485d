//! Ecosystem with a tipping point under slow degradation.
//!
//! The state couples a biomass-like variable `X` with a stress parameter `m`
//! that drifts upward at rate `alpha` unless offset by management effort `A`:
//!
//! ```text
//! m' = max(m + alpha - A, 0)
//! X' = clamp(X + r*X*(1 - X/K) - m'*X^2/(X^2 + h^2) + sigma*X*xi, 0, 2K)
//! reward = b*X - c*A^2
//! ```
//!
//! The saturating loss term gives the classic S-shaped equilibrium curve: for
//! `m` between two fold points the system is bistable, and crossing the upper
//! fold collapses the high-biomass branch onto a degraded one. [`fold_points`]
//! locates the folds, [`equilibria`] enumerates branches at a given `m`, and
//! [`calibrate`] inverts the geometry: it picks `(r, K, h)` so the folds and
//! the post-collapse state land on requested values.

use alloc::format;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::decision::{EnvConfig, Environment, StepResult};
use crate::space::BoxSpace;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConservationParams {
    /// Logistic growth rate of `X`.
    pub r: f64,
    /// Carrying capacity of `X`.
    pub k: f64,
    /// Half-saturation constant of the loss term.
    pub h: f64,
    /// Per-step upward drift of the stress parameter `m`.
    pub alpha: f64,
    /// Upper bound on the management action.
    pub a_max: f64,
    /// Multiplicative noise level on `X`.
    pub sigma: f64,
    /// Per-step benefit coefficient on `X`.
    pub b: f64,
    /// Quadratic cost coefficient on the action.
    pub c: f64,
    /// Initial stress level.
    pub m0: f64,
    /// Initial biomass; `None` starts on the largest stable equilibrium at
    /// `m0`, which is the healthy branch whenever one exists.
    pub x0: Option<f64>,
    pub config: EnvConfig,
}

impl Default for ConservationParams {
    fn default() -> Self {
        // r, K, h come from `calibrate` with the targets in
        // `default_calibration_targets()`; see the test
        // `committed_defaults_reproduce_calibration`. sigma is set so that
        // holding m at m0 = 0.19 drives roughly two thirds of replicates
        // across the fold within one 300-step episode, while stress levels
        // at or below the recovery fold make crossing rare.
        ConservationParams {
            r: 0.495_401_370,
            k: 1.642_425_392,
            h: 0.190_296_739,
            alpha: 0.002,
            a_max: 0.008,
            sigma: 0.115,
            b: 1.0,
            c: 7_000.0,
            m0: 0.19,
            x0: None,
            config: EnvConfig { horizon: 300, discount: 1.0, seed: 0 },
        }
    }
}

/// Fold targets reproduced by the committed default `(r, K, h)`.
pub fn default_calibration_targets() -> CalibrationTargets {
    CalibrationTargets { m_upper: 0.215, m_lower: 0.165, x_collapsed: 0.10 }
}

impl ConservationParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v, strictly_positive) in [
            ("r", self.r, true),
            ("K", self.k, true),
            ("h", self.h, true),
            ("alpha", self.alpha, false),
            ("a_max", self.a_max, true),
            ("sigma", self.sigma, false),
            ("b", self.b, false),
            ("c", self.c, false),
            ("m0", self.m0, false),
        ] {
            if !v.is_finite() || v < 0.0 || (strictly_positive && v == 0.0) {
                return Err(Error::config(format!(
                    "conservation {name} must be {} and finite, got {v}",
                    if strictly_positive { "positive" } else { "non-negative" }
                )));
            }
        }
        if let Some(x0) = self.x0 {
            if !(x0.is_finite() && (0.0..=2.0 * self.k).contains(&x0)) {
                return Err(Error::config("conservation x0 must lie in [0, 2K]"));
            }
        }
        self.config.validate()
    }
}

/// Net deterministic change of `X` in one step at stress level `m`.
pub fn net_growth(p: &ConservationParams, m: f64, x: f64) -> f64 {
    p.r * x * (1.0 - x / p.k) - m * x * x / (x * x + p.h * p.h)
}

/// d(net_growth)/dX, used for stability classification.
fn net_growth_dx(p: &ConservationParams, m: f64, x: f64) -> f64 {
    let hh = p.h * p.h;
    let denom = x * x + hh;
    p.r * (1.0 - 2.0 * x / p.k) - m * 2.0 * x * hh / (denom * denom)
}

/// Stress level at which `x > 0` is an equilibrium: the equilibrium manifold
/// `m(X) = r (1 - X/K) (X^2 + h^2) / X`.
fn m_on_curve(p: &ConservationParams, x: f64) -> f64 {
    p.r * (1.0 - x / p.k) * (x * x + p.h * p.h) / x
}

/// Slope of the equilibrium manifold; folds are its roots.
fn m_curve_slope(p: &ConservationParams, x: f64) -> f64 {
    p.r * (1.0 - p.h * p.h / (x * x) - 2.0 * x / p.k)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    debug_assert!(f_lo * f(hi) <= 0.0, "bisection bracket must straddle a root");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let f_mid = f(mid);
        if f_lo * f_mid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    0.5 * (lo + hi)
}

/// Locations of the two saddle-node folds of the equilibrium curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldPoints {
    /// Stress level where the healthy branch is annihilated (tipping point).
    pub m_upper: f64,
    /// Stress level below which the degraded branch disappears (recovery).
    pub m_lower: f64,
    /// Biomass at the upper fold.
    pub x_at_m_upper: f64,
    /// Biomass at the lower fold.
    pub x_at_m_lower: f64,
}

/// Solves `net_growth = 0` and `d(net_growth)/dX = 0` simultaneously.
///
/// On the equilibrium manifold the second condition is equivalent to a
/// vanishing slope of `m(X)`, so the folds are bracketed by the slope's sign
/// changes and refined by bisection. Errors when the dynamics are monostable,
/// naming the violated condition (`h < K / sqrt(27)`).
pub fn fold_points(p: &ConservationParams) -> Result<FoldPoints> {
    p.validate()?;
    let bound = p.k / libm::sqrt(27.0);
    if p.h >= bound {
        return Err(Error::NoBistableRegime(format!(
            "requires h < K/sqrt(27) = {bound:.6}, got h = {}",
            p.h
        )));
    }
    // The slope r*(1 - h^2/x^2 - 2x/K) rises from -inf, peaks at (K h^2)^(1/3),
    // and falls below zero before x = K; bistability makes the peak positive.
    let x_peak = libm::cbrt(p.k * p.h * p.h);
    debug_assert!(m_curve_slope(p, x_peak) > 0.0);
    let x_lower_fold = bisect(|x| m_curve_slope(p, x), 1e-9 * p.k, x_peak);
    let x_upper_fold = bisect(|x| m_curve_slope(p, x), x_peak, p.k);
    // The tangency at larger biomass carries the larger stress level: it is
    // where the healthy branch dies.
    let m_at_small_x = m_on_curve(p, x_lower_fold);
    let m_at_large_x = m_on_curve(p, x_upper_fold);
    Ok(FoldPoints {
        m_upper: m_at_large_x,
        m_lower: m_at_small_x,
        x_at_m_upper: x_upper_fold,
        x_at_m_lower: x_lower_fold,
    })
}

/// Healthy-branch equilibrium at stress `m`, when it exists.
pub fn upper_branch_state(p: &ConservationParams, m: f64) -> Option<f64> {
    let folds = fold_points(p).ok()?;
    if m > folds.m_upper || m < 0.0 {
        return None;
    }
    if m == 0.0 {
        return Some(p.k);
    }
    Some(bisect(|x| m_on_curve(p, x) - m, folds.x_at_m_upper, p.k))
}

/// Degraded-branch equilibrium at stress `m`, when it exists.
pub fn lower_branch_state(p: &ConservationParams, m: f64) -> Option<f64> {
    let folds = fold_points(p).ok()?;
    if m < folds.m_lower {
        return None;
    }
    Some(bisect(|x| m_on_curve(p, x) - m, 1e-12 * p.k, folds.x_at_m_lower))
}

/// Unstable equilibrium separating the two basins, for `m` strictly between
/// the folds.
pub fn unstable_threshold(p: &ConservationParams, m: f64) -> Option<f64> {
    let folds = fold_points(p).ok()?;
    if m <= folds.m_lower || m >= folds.m_upper {
        return None;
    }
    Some(bisect(|x| m_on_curve(p, x) - m, folds.x_at_m_lower, folds.x_at_m_upper))
}

/// True when `(x, m)` sits in (or beyond) the basin of the degraded branch:
/// above the tipping point there is nothing to return to, below the recovery
/// fold the degraded branch does not exist, and in between the unstable
/// equilibrium separates the basins.
pub fn in_collapsed_basin(p: &ConservationParams, m: f64, x: f64) -> Result<bool> {
    let folds = fold_points(p)?;
    if m >= folds.m_upper {
        return Ok(true);
    }
    if m <= folds.m_lower {
        return Ok(false);
    }
    // Unwrap is safe: m is strictly between the folds here.
    Ok(x < unstable_threshold(p, m).expect("m strictly between folds"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub x: f64,
    pub stable: bool,
}

/// All positive equilibria at stress `m`, found by a sign-change scan of the
/// net growth over `(0, 2K]` with bisection refinement. Works for monostable
/// parameter sets too; `x = 0` (always an equilibrium) is not listed.
pub fn equilibria(p: &ConservationParams, m: f64) -> Result<Vec<Equilibrium>> {
    p.validate()?;
    let n = 4096;
    let top = 2.0 * p.k;
    let mut roots = Vec::new();
    let mut x_prev = top * 1e-9;
    let mut f_prev = net_growth(p, m, x_prev);
    for i in 1..=n {
        let x = top * i as f64 / n as f64;
        let f = net_growth(p, m, x);
        if f_prev == 0.0 {
            roots.push(x_prev);
        } else if f_prev * f < 0.0 {
            roots.push(bisect(|x| net_growth(p, m, x), x_prev, x));
        }
        x_prev = x;
        f_prev = f;
    }
    Ok(roots
        .into_iter()
        .map(|x| Equilibrium { x, stable: net_growth_dx(p, m, x) < 0.0 })
        .collect())
}

/// Largest stable equilibrium at stress `m`. At least one stable equilibrium
/// always exists because growth dominates at small positive `X`.
pub fn largest_stable_equilibrium(p: &ConservationParams, m: f64) -> Result<f64> {
    let eq = equilibria(p, m)?;
    eq.iter()
        .rev()
        .find(|e| e.stable)
        .map(|e| e.x)
        .ok_or_else(|| Error::config("no stable equilibrium found; m0 may be extreme"))
}

/// Targets for [`calibrate`]: the two fold stress levels and the biomass of
/// the degraded branch evaluated at the tipping point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    pub m_upper: f64,
    pub m_lower: f64,
    pub x_collapsed: f64,
}

/// `(r, K, h)` solved by [`calibrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedTriple {
    pub r: f64,
    pub k: f64,
    pub h: f64,
}

/// Chooses `(r, K, h)` so that [`fold_points`] lands on the requested stress
/// levels and the degraded branch at the tipping point sits at `x_collapsed`.
///
/// The geometry separates cleanly in scaled units `u = X/K`, `eta = h/K`:
/// the fold ratio `m_lower / m_upper` depends only on `eta` (monotone in it),
/// the product `r*K` then scales the folds onto the targets, and the scaled
/// degraded state fixes `K` itself.
pub fn calibrate(targets: &CalibrationTargets) -> Result<CalibratedTriple> {
    let CalibrationTargets { m_upper, m_lower, x_collapsed } = *targets;
    if !(m_upper.is_finite() && m_lower.is_finite() && x_collapsed.is_finite()) {
        return Err(Error::config("calibration targets must be finite"));
    }
    if !(0.0 < m_lower && m_lower < m_upper) {
        return Err(Error::config("calibration requires 0 < m_lower < m_upper"));
    }
    if x_collapsed <= 0.0 {
        return Err(Error::config("calibration requires x_collapsed > 0"));
    }

    let scaled = |eta: f64| ConservationParams {
        r: 1.0,
        k: 1.0,
        h: eta,
        ..ConservationParams::default()
    };
    let ratio = |eta: f64| {
        let f = fold_points(&scaled(eta)).expect("eta below bistability bound");
        f.m_lower / f.m_upper
    };

    let eta_max = 1.0 / libm::sqrt(27.0) - 1e-9;
    let target_ratio = m_lower / m_upper;
    // ratio(eta) rises monotonically from 0 toward 1 on (0, K/sqrt(27)).
    if ratio(eta_max) <= target_ratio {
        return Err(Error::config(
            "fold ratio m_lower/m_upper too close to 1 for a bistable system",
        ));
    }
    let eta = bisect(|e| ratio(e) - target_ratio, 1e-6, eta_max);

    let unit = scaled(eta);
    let folds = fold_points(&unit)?;
    let rk = m_upper / folds.m_upper;
    let u_collapsed = lower_branch_state(&unit, folds.m_upper)
        .expect("degraded branch exists at the upper fold");
    let k = x_collapsed / u_collapsed;
    Ok(CalibratedTriple { r: rk / k, k, h: eta * k })
}

/// Conservation environment. Observation is `[X, m]`; the action is effort
/// `A` in `[0, a_max]`.
#[derive(Debug, Clone)]
pub struct ConservationEnv {
    params: ConservationParams,
    resolved_x0: f64,
    obs_space: BoxSpace,
    act_space: BoxSpace,
    rng: ChaCha8Rng,
    x: f64,
    m: f64,
    t: usize,
}

impl ConservationEnv {
    pub fn new(params: ConservationParams) -> Result<Self> {
        params.validate()?;
        let resolved_x0 = match params.x0 {
            Some(x0) => x0,
            None => largest_stable_equilibrium(&params, params.m0)?,
        };
        // m grows by at most alpha per step. Accumulate the cap with the same
        // repeated addition the dynamics use, so rounding can never push an
        // observed m above the declared box.
        let mut m_cap = params.m0;
        for _ in 0..params.config.horizon {
            m_cap += params.alpha;
        }
        let seed = params.config.seed;
        Ok(ConservationEnv {
            obs_space: BoxSpace::new(
                alloc::vec![0.0, 0.0],
                alloc::vec![2.0 * params.k, m_cap],
            )?,
            act_space: BoxSpace::scalar(0.0, params.a_max)?,
            rng: ChaCha8Rng::seed_from_u64(seed),
            x: resolved_x0,
            m: params.m0,
            t: 0,
            resolved_x0,
            params,
        })
    }

    pub fn params(&self) -> &ConservationParams {
        &self.params
    }

    /// Initial biomass after resolving the `x0 = None` default.
    pub fn initial_state(&self) -> f64 {
        self.resolved_x0
    }
}

impl Environment for ConservationEnv {
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
        self.x = self.resolved_x0;
        self.m = self.params.m0;
        self.t = 0;
        alloc::vec![self.x, self.m]
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
        let p = &self.params;
        let a = action[0].clamp(0.0, p.a_max);

        // Effort offsets this step's drift, so the loss term already sees the
        // updated stress level.
        let m_next = (self.m + p.alpha - a).max(0.0);
        let xi: f64 = StandardNormal.sample(&mut self.rng);
        let x_next = (self.x + net_growth(p, m_next, self.x) + p.sigma * self.x * xi)
            .clamp(0.0, 2.0 * p.k);
        // Benefit accrues on the pre-step state; the quadratic cost is charged
        // on the executed effort even when m is already floored at zero.
        let reward = p.b * self.x - p.c * a * a;

        self.x = x_next;
        self.m = m_next;
        self.t += 1;
        Ok(StepResult {
            observation: alloc::vec![self.x, self.m],
            reward,
            terminal: self.t == self.params.config.horizon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::SteadyStatePolicy;
    use crate::decision::rollout;
    use proptest::prelude::*;

    fn noiseless() -> ConservationParams {
        ConservationParams { sigma: 0.0, ..ConservationParams::default() }
    }

    #[test]
    fn committed_defaults_reproduce_calibration() {
        let triple = calibrate(&default_calibration_targets()).unwrap();
        let p = ConservationParams::default();
        assert!((triple.r - p.r).abs() < 1e-4, "r: {} vs {}", triple.r, p.r);
        assert!((triple.k - p.k).abs() < 1e-4, "K: {} vs {}", triple.k, p.k);
        assert!((triple.h - p.h).abs() < 1e-4, "h: {} vs {}", triple.h, p.h);
    }

    #[test]
    fn fold_points_land_on_calibration_targets() {
        let p = ConservationParams::default();
        let folds = fold_points(&p).unwrap();
        let targets = default_calibration_targets();
        assert!((folds.m_upper - targets.m_upper).abs() < 1e-3);
        assert!((folds.m_lower - targets.m_lower).abs() < 1e-3);
        let degraded = lower_branch_state(&p, folds.m_upper).unwrap();
        assert!((degraded - targets.x_collapsed).abs() < 1e-3);
    }

    #[test]
    fn monostable_parameters_are_rejected_by_name() {
        // h above K/sqrt(27) removes the bistable regime.
        let p = ConservationParams { h: 0.4, k: 1.0, ..ConservationParams::default() };
        let err = fold_points(&p).unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("h < K/sqrt(27)"), "{msg}");
    }

    #[test]
    fn fold_stress_levels_scale_linearly_with_r() {
        let p = ConservationParams::default();
        let folds = fold_points(&p).unwrap();
        let doubled = ConservationParams { r: 2.0 * p.r, ..p };
        let folds2 = fold_points(&doubled).unwrap();
        assert!((folds2.m_upper - 2.0 * folds.m_upper).abs() < 1e-9);
        assert!((folds2.m_lower - 2.0 * folds.m_lower).abs() < 1e-9);
        // Fold biomass locations do not depend on r.
        assert!((folds2.x_at_m_upper - folds.x_at_m_upper).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_count_matches_regime() {
        let p = noiseless();
        let folds = fold_points(&p).unwrap();
        let mid = 0.5 * (folds.m_lower + folds.m_upper);
        assert_eq!(equilibria(&p, mid).unwrap().len(), 3);
        assert_eq!(equilibria(&p, folds.m_lower * 0.5).unwrap().len(), 1);
        assert_eq!(equilibria(&p, folds.m_upper * 1.2).unwrap().len(), 1);
        // Between the folds: stable, unstable, stable by increasing biomass.
        let eq = equilibria(&p, mid).unwrap();
        assert!(eq[0].stable && !eq[1].stable && eq[2].stable);
        assert!(eq[0].x < eq[1].x && eq[1].x < eq[2].x);
    }

    #[test]
    fn branch_functions_agree_with_scan() {
        let p = noiseless();
        let m = 0.19;
        let eq = equilibria(&p, m).unwrap();
        assert!((lower_branch_state(&p, m).unwrap() - eq[0].x).abs() < 1e-8);
        assert!((unstable_threshold(&p, m).unwrap() - eq[1].x).abs() < 1e-8);
        assert!((upper_branch_state(&p, m).unwrap() - eq[2].x).abs() < 1e-8);
    }

    #[test]
    fn steady_state_effort_holds_stress_constant() {
        let p = noiseless();
        let alpha = p.alpha;
        let mut env = ConservationEnv::new(p).unwrap();
        env.reset(0);
        for _ in 0..50 {
            let obs = env.step(&[alpha]).unwrap().observation;
            assert!((obs[1] - 0.19).abs() < 1e-12);
        }
    }

    #[test]
    fn extinct_state_stays_extinct_with_zero_reward() {
        let p = ConservationParams { x0: Some(0.0), ..ConservationParams::default() };
        let mut env = ConservationEnv::new(p).unwrap();
        env.reset(0);
        let step = env.step(&[0.0]).unwrap();
        assert_eq!(step.observation[0], 0.0);
        assert_eq!(step.reward, 0.0);
    }

    #[test]
    fn stress_parameter_is_floored_at_zero() {
        let p = ConservationParams { sigma: 0.0, m0: 0.001, ..ConservationParams::default() };
        let a_max = p.a_max;
        let mut env = ConservationEnv::new(p).unwrap();
        env.reset(0);
        let obs = env.step(&[a_max]).unwrap().observation;
        assert_eq!(obs[1], 0.0);
    }

    #[test]
    fn unmanaged_system_collapses_shortly_after_the_tipping_point() {
        // With zero effort, m ratchets up by alpha each step; the biomass
        // tracks the healthy branch until the fold, then drops to the
        // degraded branch.
        let p = noiseless();
        let folds = fold_points(&p).unwrap();
        let mut env = ConservationEnv::new(p.clone()).unwrap();
        let mut obs = env.reset(0);
        let healthy_start = obs[0];
        let mut m_at_collapse = None;
        for _ in 0..p.config.horizon {
            let step = env.step(&[0.0]).unwrap();
            obs = step.observation;
            if m_at_collapse.is_none() && obs[0] < 0.5 * healthy_start {
                m_at_collapse = Some(obs[1]);
            }
            if step.terminal {
                break;
            }
        }
        let m_at_collapse = m_at_collapse.expect("system never collapsed");
        assert!(
            m_at_collapse >= folds.m_upper - 1e-9,
            "collapsed before the fold: m = {m_at_collapse}"
        );
        // The crash lags the fold crossing: relaxation slows critically near
        // a fold, so allow a few dozen drift steps before the drop completes.
        assert!(m_at_collapse <= folds.m_upper + 0.06, "m = {m_at_collapse}");
        // Afterwards the biomass tracks the degraded branch for the current
        // stress level.
        let expected = lower_branch_state(&p, obs[1]).expect("past the fold");
        assert!(
            (obs[0] - expected).abs() < 0.02,
            "final biomass {} vs degraded branch {expected}",
            obs[0]
        );
    }

    #[test]
    fn default_start_is_the_healthy_branch() {
        let p = noiseless();
        let env = ConservationEnv::new(p.clone()).unwrap();
        let expected = upper_branch_state(&p, p.m0).unwrap();
        assert!((env.initial_state() - expected).abs() < 1e-9);
    }

    #[test]
    fn same_seed_reproduces_trajectories() {
        let p = ConservationParams::default();
        let alpha = p.alpha;
        let mut a = ConservationEnv::new(p.clone()).unwrap();
        let mut b = ConservationEnv::new(p).unwrap();
        let policy = SteadyStatePolicy::new(alpha).unwrap();
        let ta = rollout(&mut a, &policy, 11).unwrap();
        let tb = rollout(&mut b, &policy, 11).unwrap();
        assert_eq!(ta, tb);
    }

    proptest! {
        #[test]
        fn reward_decomposes_into_benefit_minus_cost(
            seed in 0u64..200,
            effort in 0.0f64..0.01,
        ) {
            let p = ConservationParams::default();
            let (b, c, a_max) = (p.b, p.c, p.a_max);
            let mut env = ConservationEnv::new(p).unwrap();
            let mut obs = env.reset(seed);
            for _ in 0..20 {
                let x_before = obs[0];
                let step = env.step(&[effort]).unwrap();
                let a = effort.clamp(0.0, a_max);
                let rebuilt = step.reward + c * a * a;
                prop_assert!(
                    (rebuilt - b * x_before).abs() <= 1e-12 * (1.0 + x_before.abs()),
                    "reward {} + cost {} != benefit {}", step.reward, c * a * a, b * x_before
                );
                obs = step.observation;
            }
        }

        #[test]
        fn spreading_total_effort_over_more_steps_costs_less(
            total in 0.001f64..0.1,
            c in 1.0f64..10_000.0,
            n1 in 1usize..20,
            extra in 1usize..20,
        ) {
            // Quadratic costs reward smoothing: n steps at E/n cost c*E^2/n.
            let n2 = n1 + extra;
            let cost = |n: usize| c * (total / n as f64).powi(2) * n as f64;
            prop_assert!(cost(n2) < cost(n1));
        }

        #[test]
        fn observations_stay_in_the_declared_box(
            seed in 0u64..200,
            effort in -0.01f64..0.02,
        ) {
            let mut env = ConservationEnv::new(ConservationParams::default()).unwrap();
            env.reset(seed);
            for _ in 0..300 {
                let step = env.step(&[effort]).unwrap();
                prop_assert!(env.observation_space().contains(&step.observation));
                if step.terminal { break; }
            }
        }
    }
}
