//! Finite-MDP data model and exact evaluation oracles.
//!
//! A [`TabularMdp`] is the tuple (S, A, P, r, γ, μ) with finite state and
//! action spaces. Rewards are stored in the general `r(s, a, s')` form and
//! the expected reward `r̄(s, a)` is precomputed. All quantities downstream
//! (values, advantages, visitation distributions, optimal values) are
//! solver-produced, never sampled.

mod eval;
mod optimal;

pub use eval::{
    performance_difference, policy_evaluation, value_error_bound, visitation_from, ValueBundle,
};
pub use optimal::{b_gap, solve_optimal, OptimalBundle};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for probability rows summing to one.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Errors arising from MDP construction and the exact solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("transition row ({state},{action}) is not a probability vector (sum = {sum})")]
    RowNotStochastic { state: usize, action: usize, sum: f64 },

    #[error("reward ({state},{action},{next_state}) = {value} lies outside [0,1]")]
    RewardOutOfRange {
        state: usize,
        action: usize,
        next_state: usize,
        value: f64,
    },

    #[error("initial distribution has mu({state}) = 0; every state needs positive mass")]
    DegenerateInitial { state: usize },

    #[error("initial distribution is not a probability vector (sum = {sum})")]
    InitialNotStochastic { sum: f64 },

    #[error("discount factor {gamma} is outside [0,1)")]
    BadDiscount { gamma: f64 },

    #[error("inconsistent dimensions: {0}")]
    DimensionMismatch(String),

    #[error("policy row {state} is not a probability vector (sum = {sum})")]
    PolicyNotStochastic { state: usize, sum: f64 },

    #[error("linear system is singular; this cannot happen for gamma < 1")]
    SingularSystem,

    #[error("value iteration hit the cap of {iterations} sweeps (residual {residual})")]
    NonConvergence { iterations: usize, residual: f64 },
}

/// Unvalidated MDP description; the schema of the on-disk JSON format.
///
/// Fields mirror the file layout exactly: `transition[s][a]` is the
/// probability vector over next states and `reward[s][a][s']` the scalar
/// reward for that transition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub mu: Vec<f64>,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<Vec<f64>>>,
}

/// A validated finite MDP. Immutable after construction; all operations on
/// it are pure functions, so values can be shared freely across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawMdp", into = "RawMdp")]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    mu: Vec<f64>,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<Vec<f64>>>,
    expected_reward: Vec<Vec<f64>>,
}

impl TryFrom<RawMdp> for TabularMdp {
    type Error = MdpError;

    fn try_from(raw: RawMdp) -> Result<Self, MdpError> {
        validate_mdp(raw)
    }
}

impl From<TabularMdp> for RawMdp {
    fn from(mdp: TabularMdp) -> RawMdp {
        RawMdp {
            num_states: mdp.num_states,
            num_actions: mdp.num_actions,
            gamma: mdp.gamma,
            mu: mdp.mu,
            transition: mdp.transition,
            reward: mdp.reward,
        }
    }
}

/// Validates a raw MDP description, checking every structural invariant:
/// stochastic transition rows, rewards in [0,1], a fully supported initial
/// distribution and a discount strictly below one.
pub fn validate_mdp(raw: RawMdp) -> Result<TabularMdp, MdpError> {
    let s_n = raw.num_states;
    let a_n = raw.num_actions;
    if s_n == 0 || a_n == 0 {
        return Err(MdpError::DimensionMismatch(
            "num_states and num_actions must be positive".into(),
        ));
    }
    if !(raw.gamma >= 0.0 && raw.gamma < 1.0) {
        return Err(MdpError::BadDiscount { gamma: raw.gamma });
    }
    if raw.mu.len() != s_n {
        return Err(MdpError::DimensionMismatch(format!(
            "mu has length {}, expected {s_n}",
            raw.mu.len()
        )));
    }
    check_shape(&raw.transition, s_n, a_n, "transition")?;
    check_shape(&raw.reward, s_n, a_n, "reward")?;

    for (s, per_action) in raw.transition.iter().enumerate() {
        for (a, row) in per_action.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&p| p < 0.0) {
                return Err(MdpError::RowNotStochastic { state: s, action: a, sum });
            }
        }
    }
    for (s, per_action) in raw.reward.iter().enumerate() {
        for (a, row) in per_action.iter().enumerate() {
            for (s2, &r) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&r) {
                    return Err(MdpError::RewardOutOfRange {
                        state: s,
                        action: a,
                        next_state: s2,
                        value: r,
                    });
                }
            }
        }
    }
    let mu_sum: f64 = raw.mu.iter().sum();
    if (mu_sum - 1.0).abs() > ROW_SUM_TOL || raw.mu.iter().any(|&p| p < 0.0) {
        return Err(MdpError::InitialNotStochastic { sum: mu_sum });
    }
    if let Some(s) = raw.mu.iter().position(|&p| p == 0.0) {
        return Err(MdpError::DegenerateInitial { state: s });
    }

    let expected_reward = (0..s_n)
        .map(|s| {
            (0..a_n)
                .map(|a| {
                    raw.transition[s][a]
                        .iter()
                        .zip(&raw.reward[s][a])
                        .map(|(&p, &r)| p * r)
                        .sum()
                })
                .collect()
        })
        .collect();

    Ok(TabularMdp {
        num_states: s_n,
        num_actions: a_n,
        gamma: raw.gamma,
        mu: raw.mu,
        transition: raw.transition,
        reward: raw.reward,
        expected_reward,
    })
}

fn check_shape(
    tensor: &[Vec<Vec<f64>>],
    s_n: usize,
    a_n: usize,
    name: &str,
) -> Result<(), MdpError> {
    if tensor.len() != s_n {
        return Err(MdpError::DimensionMismatch(format!(
            "{name} has {} state entries, expected {s_n}",
            tensor.len()
        )));
    }
    for (s, per_action) in tensor.iter().enumerate() {
        if per_action.len() != a_n {
            return Err(MdpError::DimensionMismatch(format!(
                "{name}[{s}] has {} action entries, expected {a_n}",
                per_action.len()
            )));
        }
        for (a, row) in per_action.iter().enumerate() {
            if row.len() != s_n {
                return Err(MdpError::DimensionMismatch(format!(
                    "{name}[{s}][{a}] has length {}, expected {s_n}",
                    row.len()
                )));
            }
        }
    }
    Ok(())
}

impl TabularMdp {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Initial state distribution μ.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Minimum initial-state probability μ̃ = min_s μ(s). Strictly positive
    /// for every validated MDP.
    pub fn mu_tilde(&self) -> f64 {
        self.mu.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Next-state distribution P(·|s, a).
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[s][a]
    }

    pub fn reward(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.reward[s][a][s2]
    }

    /// Expected one-step reward r̄(s, a) = Σ_{s'} P(s'|s,a) r(s,a,s').
    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.expected_reward[s][a]
    }
}

/// A row-stochastic state → action-distribution table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Policy {
    probs: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for Policy {
    type Error = MdpError;

    fn try_from(probs: Vec<Vec<f64>>) -> Result<Self, MdpError> {
        Policy::new(probs)
    }
}

impl From<Policy> for Vec<Vec<f64>> {
    fn from(pi: Policy) -> Self {
        pi.probs
    }
}

impl Policy {
    /// Validates row-stochasticity: nonnegative entries summing to one
    /// within [`ROW_SUM_TOL`].
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self, MdpError> {
        for (s, row) in probs.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&p| p < 0.0) {
                return Err(MdpError::PolicyNotStochastic { state: s, sum });
            }
        }
        Ok(Policy { probs })
    }

    /// Uniform policy over `num_actions` at every state.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Policy {
            probs: vec![vec![p; num_actions]; num_states],
        }
    }

    /// Deterministic policy choosing `actions[s]` at state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Self {
        let probs = actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; num_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        Policy { probs }
    }

    pub(crate) fn from_rows_unchecked(probs: Vec<Vec<f64>>) -> Self {
        Policy { probs }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s][a]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// Smallest action probability over all states.
    pub fn min_prob(&self) -> f64 {
        self.probs
            .iter()
            .flatten()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest entrywise absolute difference to another policy of the same shape.
    pub fn max_abs_diff(&self, other: &Policy) -> f64 {
        self.probs
            .iter()
            .flatten()
            .zip(other.probs.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Single-state MDP with per-action rewards `rewards` and discount `gamma`;
    /// a discounted multi-armed bandit.
    pub fn bandit(rewards: &[f64], gamma: f64) -> TabularMdp {
        let k = rewards.len();
        validate_mdp(RawMdp {
            num_states: 1,
            num_actions: k,
            gamma,
            mu: vec![1.0],
            transition: vec![vec![vec![1.0]; k]],
            reward: vec![rewards.iter().map(|&r| vec![r]).collect()],
        })
        .unwrap()
    }

    /// 2-state deterministic flip chain s0 → s1 → s0 with r(s0,·) = 1 and
    /// r(s1,·) = 0, one action per state.
    pub fn flip_chain(gamma: f64) -> TabularMdp {
        validate_mdp(RawMdp {
            num_states: 2,
            num_actions: 1,
            gamma,
            mu: vec![0.5, 0.5],
            transition: vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
            reward: vec![vec![vec![1.0, 1.0]], vec![vec![0.0, 0.0]]],
        })
        .unwrap()
    }

    /// Flip chain with two redundant actions per state, for policy-pair tests.
    pub fn flip_chain_two_actions(gamma: f64) -> TabularMdp {
        validate_mdp(RawMdp {
            num_states: 2,
            num_actions: 2,
            gamma,
            mu: vec![0.5, 0.5],
            transition: vec![
                vec![vec![0.0, 1.0], vec![0.6, 0.4]],
                vec![vec![1.0, 0.0], vec![0.3, 0.7]],
            ],
            reward: vec![
                vec![vec![1.0, 1.0], vec![0.2, 0.8]],
                vec![vec![0.0, 0.0], vec![0.5, 0.1]],
            ],
        })
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_raw() -> RawMdp {
        RawMdp {
            num_states: 2,
            num_actions: 2,
            gamma: 0.9,
            mu: vec![0.5, 0.5],
            transition: vec![
                vec![vec![0.7, 0.3], vec![0.2, 0.8]],
                vec![vec![0.5, 0.5], vec![1.0, 0.0]],
            ],
            reward: vec![
                vec![vec![1.0, 0.0], vec![0.5, 0.5]],
                vec![vec![0.0, 0.0], vec![0.2, 0.9]],
            ],
        }
    }

    #[test]
    fn well_formed_mdp_passes() {
        let mdp = validate_mdp(two_state_raw()).unwrap();
        assert_eq!(mdp.num_states(), 2);
        assert_eq!(mdp.num_actions(), 2);
        // r̄(0,0) = 0.7*1.0 + 0.3*0.0
        assert!((mdp.expected_reward(0, 0) - 0.7).abs() < 1e-15);
        assert!((mdp.mu_tilde() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_stochastic_row_rejected() {
        let mut raw = two_state_raw();
        raw.transition[0][0] = vec![0.5, 0.4];
        match validate_mdp(raw) {
            Err(MdpError::RowNotStochastic { state: 0, action: 0, .. }) => {}
            other => panic!("expected RowNotStochastic, got {other:?}"),
        }
    }

    #[test]
    fn reward_out_of_range_rejected() {
        let mut raw = two_state_raw();
        raw.reward[1][0][1] = 1.5;
        match validate_mdp(raw) {
            Err(MdpError::RewardOutOfRange { value, .. }) => assert_eq!(value, 1.5),
            other => panic!("expected RewardOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_initial_rejected() {
        let mut raw = two_state_raw();
        raw.mu = vec![1.0, 0.0];
        match validate_mdp(raw) {
            Err(MdpError::DegenerateInitial { state: 1 }) => {}
            other => panic!("expected DegenerateInitial, got {other:?}"),
        }
    }

    #[test]
    fn bad_discount_rejected() {
        for gamma in [1.0, -0.1, 1.5] {
            let mut raw = two_state_raw();
            raw.gamma = gamma;
            assert!(matches!(validate_mdp(raw), Err(MdpError::BadDiscount { .. })));
        }
    }

    #[test]
    fn negative_transition_entry_rejected() {
        let mut raw = two_state_raw();
        raw.transition[0][0] = vec![1.2, -0.2];
        assert!(matches!(
            validate_mdp(raw),
            Err(MdpError::RowNotStochastic { .. })
        ));
    }

    #[test]
    fn json_round_trip_validates() {
        let mdp = validate_mdp(two_state_raw()).unwrap();
        let text = serde_json::to_string(&mdp).unwrap();
        let back: TabularMdp = serde_json::from_str(&text).unwrap();
        assert_eq!(back.num_states(), 2);
        assert_eq!(back.transition(0, 1), mdp.transition(0, 1));

        let mut raw = two_state_raw();
        raw.gamma = 1.0;
        let bad = serde_json::to_string(&raw).unwrap();
        assert!(serde_json::from_str::<TabularMdp>(&bad).is_err());
    }

    #[test]
    fn policy_validation() {
        assert!(Policy::new(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).is_ok());
        assert!(matches!(
            Policy::new(vec![vec![0.5, 0.4]]),
            Err(MdpError::PolicyNotStochastic { state: 0, .. })
        ));
        assert!(Policy::new(vec![vec![1.5, -0.5]]).is_err());
        let uni = Policy::uniform(3, 4);
        assert_eq!(uni.prob(2, 3), 0.25);
        assert_eq!(uni.min_prob(), 0.25);
    }
}
