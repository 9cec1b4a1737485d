//! Classical benchmark policies and a discretized stochastic dynamic program.
//!
//! Three baselines are implemented: constant escapement (harvest everything
//! above a fixed stock threshold), the steady-state rule of thumb (constant
//! effort that exactly offsets drift), and the greedy policy of value
//! iteration on a grid-discretized fishery MDP.
//!
//! Discretization uses Voronoi bins around a uniform stock grid. Recruitment
//! noise is lognormal, so each transition row is a vector of normal CDF
//! differences in log space; the outermost bins absorb the tail mass beyond
//! the grid rather than renormalizing, which keeps every row an exact
//! probability distribution and makes grid truncation visible. Rows are
//! stored sparsely (CSR) because most of the lognormal mass concentrates in a
//! narrow band of bins.

use alloc::format;
use alloc::vec::Vec;

use crate::decision::Policy;
use crate::fishery::FisheryParams;
use crate::{Error, Result};

/// Harvests everything above a fixed stock threshold: `quota = max(X - S*, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapementPolicy {
    threshold: f64,
}

impl EscapementPolicy {
    pub fn new(threshold: f64) -> Result<Self> {
        if !threshold.is_finite() || threshold < 0.0 {
            return Err(Error::config(format!(
                "escapement threshold must be non-negative and finite, got {threshold}"
            )));
        }
        Ok(EscapementPolicy { threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl Policy for EscapementPolicy {
    fn action(&self, observation: &[f64]) -> Vec<f64> {
        assert!(!observation.is_empty(), "observation must have a stock component");
        alloc::vec![(observation[0] - self.threshold).max(0.0)]
    }
}

/// Applies the same scalar action at every step, e.g. effort `A = alpha`
/// that exactly cancels the drift of the stress parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStatePolicy {
    effort: f64,
}

impl SteadyStatePolicy {
    pub fn new(effort: f64) -> Result<Self> {
        if !effort.is_finite() || effort < 0.0 {
            return Err(Error::config(format!(
                "steady-state effort must be non-negative and finite, got {effort}"
            )));
        }
        Ok(SteadyStatePolicy { effort })
    }

    pub fn effort(&self) -> f64 {
        self.effort
    }
}

impl Policy for SteadyStatePolicy {
    fn action(&self, _observation: &[f64]) -> Vec<f64> {
        alloc::vec![self.effort]
    }
}

/// Finite MDP over stock and quota grids with sparse transition rows.
///
/// Row `s * n_actions + a` holds the distribution of the successor state
/// index after taking action `a` in state `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMdp {
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    probs: Vec<f64>,
}

impl DiscreteMdp {
    /// Assembles an MDP from raw parts, checking CSR structure and that every
    /// transition row is a probability distribution (sum within 1e-9 of 1).
    pub fn from_parts(
        states: Vec<f64>,
        actions: Vec<f64>,
        rewards: Vec<f64>,
        row_offsets: Vec<usize>,
        col_indices: Vec<u32>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let n_rows = states.len() * actions.len();
        if states.is_empty() || actions.is_empty() {
            return Err(Error::config("MDP needs at least one state and one action"));
        }
        if rewards.len() != n_rows {
            return Err(Error::DimensionMismatch { expected: n_rows, got: rewards.len() });
        }
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::DimensionMismatch {
                expected: n_rows + 1,
                got: row_offsets.len(),
            });
        }
        if row_offsets[0] != 0
            || *row_offsets.last().expect("non-empty offsets") != probs.len()
            || col_indices.len() != probs.len()
        {
            return Err(Error::config("transition arrays disagree with row offsets"));
        }
        for (row, w) in row_offsets.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::config(format!("transition row {row} is empty")));
            }
            let mut sum = 0.0;
            for k in w[0]..w[1] {
                let p = probs[k];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(format!(
                        "transition row {row} has probability {p} outside [0, 1]"
                    )));
                }
                if col_indices[k] as usize >= states.len() {
                    return Err(Error::config(format!(
                        "transition row {row} points at state {} of {}",
                        col_indices[k],
                        states.len()
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "transition row {row} sums to {sum}, expected 1"
                )));
            }
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::config("rewards must be finite"));
        }
        Ok(DiscreteMdp { states, actions, rewards, row_offsets, col_indices, probs })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.actions.len() + action]
    }

    /// Successor indices and probabilities for one state-action pair.
    pub fn transition_row(&self, state: usize, action: usize) -> (&[u32], &[f64]) {
        let row = state * self.actions.len() + action;
        let span = self.row_offsets[row]..self.row_offsets[row + 1];
        (&self.col_indices[span.clone()], &self.probs[span])
    }
}

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// Entries smaller than this are dropped from transition rows; the removed
/// mass is folded into the row's largest entry so rows still sum to one.
const PROB_FLOOR: f64 = 1e-14;

/// Discretizes the fishery onto uniform stock and quota grids over [0, 2K].
///
/// Deterministic dynamics (sigma = 0, or zero escapement) split the unit
/// mass between the two grid points bracketing the successor, in proportion
/// to position, so the expected next state is exact. Snapping to the nearest
/// bin instead would hand the solver up to half a cell of free growth per
/// step, which at these growth rates is enough to bury the escapement
/// structure under grid artifacts. Stochastic dynamics spread the lognormal
/// recruitment factor over bins by CDF differences in log space, with the
/// edge bins absorbing both tails.
pub fn discretize_fishery(
    params: &FisheryParams,
    n_states: usize,
    n_actions: usize,
) -> Result<DiscreteMdp> {
    params.validate()?;
    if n_states < 2 || n_actions < 2 {
        return Err(Error::config("discretization needs at least 2 states and 2 actions"));
    }
    let top = 2.0 * params.k;
    let grid = |n: usize, i: usize| top * i as f64 / (n - 1) as f64;
    let states: Vec<f64> = (0..n_states).map(|i| grid(n_states, i)).collect();
    let actions: Vec<f64> = (0..n_actions).map(|j| grid(n_actions, j)).collect();
    let cell = top / (n_states - 1) as f64;
    let nearest = |x: f64| -> u32 {
        let idx = libm::round(x / cell);
        (idx.max(0.0) as usize).min(n_states - 1) as u32
    };

    let n_rows = n_states * n_actions;
    let mut rewards = Vec::with_capacity(n_rows);
    let mut row_offsets = Vec::with_capacity(n_rows + 1);
    let mut col_indices: Vec<u32> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    row_offsets.push(0usize);

    for &x in &states {
        for &quota in &actions {
            let harvest = quota.min(x);
            rewards.push(harvest);
            let escapement = x - harvest;
            let mean_next =
                escapement + params.r * escapement * (1.0 - escapement / params.k);

            if params.sigma == 0.0 || mean_next <= 0.0 {
                let pos = mean_next.clamp(0.0, top) / cell;
                let below = (pos as usize).min(n_states - 2);
                let weight_above = pos - below as f64;
                if weight_above < PROB_FLOOR {
                    col_indices.push(below as u32);
                    probs.push(1.0);
                } else if weight_above > 1.0 - PROB_FLOOR {
                    col_indices.push(below as u32 + 1);
                    probs.push(1.0);
                } else {
                    col_indices.push(below as u32);
                    probs.push(1.0 - weight_above);
                    col_indices.push(below as u32 + 1);
                    probs.push(weight_above);
                }
                row_offsets.push(probs.len());
                continue;
            }

            // All but ~1e-16 of the lognormal mass lies within 8.5 log-sd of
            // the deterministic successor; bins outside that band would be
            // dropped by the probability floor anyway.
            let ln_mean = libm::log(mean_next);
            let reach = 8.5 * params.sigma;
            let first = nearest(libm::exp(ln_mean - reach)) as usize;
            let last = nearest(libm::exp(ln_mean + reach)) as usize;

            // CDF at the shared bin edges; bin i spans [edge_i, edge_{i+1})
            // with the first edge at -inf and the last at +inf.
            let mut cdf = Vec::with_capacity(last - first + 2);
            cdf.push(0.0);
            for i in first..last {
                let edge = cell * (i as f64 + 0.5);
                cdf.push(standard_normal_cdf((libm::log(edge) - ln_mean) / params.sigma));
            }
            cdf.push(1.0);

            let start = probs.len();
            let mut kept = 0.0;
            for (i, pair) in (first..=last).zip(cdf.windows(2)) {
                let p = pair[1] - pair[0];
                if p >= PROB_FLOOR {
                    col_indices.push(i as u32);
                    probs.push(p);
                    kept += p;
                }
            }
            assert!(probs.len() > start, "a transition row lost all its mass");
            // Fold dropped tails and float residue into the largest entry.
            let largest = (start..probs.len())
                .max_by(|&a, &b| probs[a].total_cmp(&probs[b]))
                .expect("row has entries");
            probs[largest] += 1.0 - kept;
            row_offsets.push(probs.len());
        }
    }

    DiscreteMdp::from_parts(states, actions, rewards, row_offsets, col_indices, probs)
}

/// Converged values and greedy action indices from [`value_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSolution {
    pub values: Vec<f64>,
    /// Greedy action index per state; ties break toward the lowest index.
    pub policy: Vec<usize>,
    pub sweeps: usize,
    pub residual: f64,
}

/// Synchronous value iteration to a sup-norm residual below `tol`.
///
/// Sweeps are Jacobi-style (new values read only old values), so the result
/// is independent of state ordering. Returns an error when `max_sweeps`
/// passes without reaching the tolerance.
pub fn value_iteration(
    mdp: &DiscreteMdp,
    discount: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<MdpSolution> {
    if !(discount > 0.0 && discount < 1.0) {
        return Err(Error::config(format!(
            "value iteration requires 0 < discount < 1 for contraction, got {discount}"
        )));
    }
    if !(tol > 0.0 && tol.is_finite()) || max_sweeps == 0 {
        return Err(Error::config("tolerance must be positive and max_sweeps at least 1"));
    }
    let (n_states, n_actions) = (mdp.n_states(), mdp.n_actions());
    let mut values = alloc::vec![0.0f64; n_states];
    let mut next_values = alloc::vec![0.0f64; n_states];
    let mut policy = alloc::vec![0usize; n_states];

    for sweep in 1..=max_sweeps {
        let mut residual = 0.0f64;
        for s in 0..n_states {
            let mut best = f64::NEG_INFINITY;
            let mut best_action = 0;
            for a in 0..n_actions {
                let row = s * n_actions + a;
                let span = mdp.row_offsets[row]..mdp.row_offsets[row + 1];
                let mut expected = 0.0;
                for k in span {
                    expected += mdp.probs[k] * values[mdp.col_indices[k] as usize];
                }
                let q = mdp.rewards[row] + discount * expected;
                if q > best {
                    best = q;
                    best_action = a;
                }
            }
            residual = residual.max((best - values[s]).abs());
            next_values[s] = best;
            policy[s] = best_action;
        }
        core::mem::swap(&mut values, &mut next_values);
        if residual <= tol {
            return Ok(MdpSolution { values, policy, sweeps: sweep, residual });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_sweeps,
        residual: values
            .iter()
            .zip(&next_values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max),
    })
}

/// Greedy quota (action value) per state for a solved MDP.
pub fn greedy_quotas(mdp: &DiscreteMdp, solution: &MdpSolution) -> Vec<f64> {
    solution.policy.iter().map(|&a| mdp.actions()[a]).collect()
}

/// Escapement threshold implied by a greedy policy: the median of
/// `stock - executed harvest` over states where any harvest occurs.
///
/// The median is robust to the one-cell rounding of both grids; a perfect
/// constant-escapement policy returns its threshold up to half a cell.
pub fn fitted_escapement(mdp: &DiscreteMdp, solution: &MdpSolution) -> f64 {
    let mut escapements: Vec<f64> = mdp
        .states()
        .iter()
        .zip(&solution.policy)
        .map(|(&x, &a)| (x, mdp.actions()[a].min(x)))
        .filter(|&(_, h)| h > 0.0)
        .map(|(x, h)| x - h)
        .collect();
    assert!(!escapements.is_empty(), "policy never harvests; no threshold to fit");
    escapements.sort_by(f64::total_cmp);
    let n = escapements.len();
    if n % 2 == 1 {
        escapements[n / 2]
    } else {
        0.5 * (escapements[n / 2 - 1] + escapements[n / 2])
    }
}

/// Plays a solved MDP's greedy policy in the continuous environment by
/// looking up the nearest grid state.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpGreedyPolicy {
    states: Vec<f64>,
    quotas: Vec<f64>,
}

impl MdpGreedyPolicy {
    pub fn from_solution(mdp: &DiscreteMdp, solution: &MdpSolution) -> Self {
        MdpGreedyPolicy {
            states: mdp.states().to_vec(),
            quotas: greedy_quotas(mdp, solution),
        }
    }
}

impl Policy for MdpGreedyPolicy {
    fn action(&self, observation: &[f64]) -> Vec<f64> {
        assert!(!observation.is_empty(), "observation must have a stock component");
        let x = observation[0];
        // Uniform grid: the nearest state is a rounded index.
        let cell = (self.states[self.states.len() - 1] - self.states[0])
            / (self.states.len() - 1) as f64;
        let idx = libm::round((x - self.states[0]) / cell);
        let idx = (idx.max(0.0) as usize).min(self.states.len() - 1);
        alloc::vec![self.quotas[idx]]
    }
}
