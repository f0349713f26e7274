//! Softmax policy-gradient baselines and the native single-state (MAB)
//! steppers used in the comparison experiment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{policy_evaluation, MdpError, Policy, RawMdp, TabularMdp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("a bandit instance needs at least one arm")]
    NoArms,

    #[error("arm {arm} has reward {value} outside [0,1]")]
    RewardOutOfRange { arm: usize, value: f64 },
}

/// Unconstrained logits inducing π(a|s) = exp(θ_{s,a})/Σ exp(θ_{s,a'}).
///
/// Rows are kept shift-normalized (row maximum pinned at zero). The induced
/// policy is invariant to per-row shifts, and without the renormalization
/// the NPG logits grow linearly in the iteration count and eventually
/// overflow the exponential.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxParams {
    logits: Vec<Vec<f64>>,
}

impl SoftmaxParams {
    pub fn new(logits: Vec<Vec<f64>>) -> Self {
        let mut p = SoftmaxParams { logits };
        p.renormalize();
        p
    }

    /// All-zero logits: the uniform policy.
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        SoftmaxParams {
            logits: vec![vec![0.0; num_actions]; num_states],
        }
    }

    fn renormalize(&mut self) {
        for row in &mut self.logits {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.iter_mut().for_each(|x| *x -= max);
        }
    }

    pub fn num_states(&self) -> usize {
        self.logits.len()
    }

    pub fn num_actions(&self) -> usize {
        self.logits.first().map_or(0, Vec::len)
    }

    pub fn logits(&self) -> &[Vec<f64>] {
        &self.logits
    }

    /// Induced softmax policy.
    pub fn policy(&self) -> Policy {
        Policy::from_rows_unchecked(self.logits.iter().map(|row| softmax(row)).collect())
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// One softmax policy-gradient step with exact gradients:
/// θ'_{s,a} = θ_{s,a} + η (1/(1−γ)) d^π_μ(s) π(a|s) A^π(s,a).
/// On a single-state undiscounted instance this reduces to
/// θ'_a = θ_a + η π(a) A(a).
pub fn softmax_pg_step(
    mdp: &TabularMdp,
    params: &SoftmaxParams,
    eta: f64,
) -> Result<SoftmaxParams, MdpError> {
    let pi = params.policy();
    let vb = policy_evaluation(mdp, &pi)?;
    let scale = 1.0 / (1.0 - mdp.gamma());
    let logits = params
        .logits
        .iter()
        .enumerate()
        .map(|(s, row)| {
            let w = eta * scale * vb.visitation[s];
            row.iter()
                .enumerate()
                .map(|(a, &t)| t + w * pi.prob(s, a) * vb.adv[s][a])
                .collect()
        })
        .collect();
    Ok(SoftmaxParams::new(logits))
}

/// One tabular softmax natural-policy-gradient step:
/// θ'_{s,a} = θ_{s,a} + η A(s,a), applied per state with the supplied
/// advantage table.
pub fn softmax_npg_step(params: &SoftmaxParams, adv: &[Vec<f64>], eta: f64) -> SoftmaxParams {
    let logits = params
        .logits
        .iter()
        .zip(adv)
        .map(|(row, adv_row)| {
            row.iter()
                .zip(adv_row)
                .map(|(&t, &a)| t + eta * a)
                .collect()
        })
        .collect();
    SoftmaxParams::new(logits)
}

/// A K-armed bandit instance: one state, rewards in [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MabInstance {
    rewards: Vec<f64>,
}

impl MabInstance {
    pub fn new(rewards: Vec<f64>) -> Result<Self, BaselineError> {
        if rewards.is_empty() {
            return Err(BaselineError::NoArms);
        }
        for (arm, &r) in rewards.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(BaselineError::RewardOutOfRange { arm, value: r });
            }
        }
        Ok(MabInstance { rewards })
    }

    pub fn num_arms(&self) -> usize {
        self.rewards.len()
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn optimal_value(&self) -> f64 {
        self.rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// One-shot value error max_a r(a) − E_{a∼π} r(a), accumulated as a
    /// nonnegative sum so it degrades gracefully to zero instead of losing
    /// sign to cancellation.
    pub fn value_error(&self, pi: &[f64]) -> f64 {
        let best = self.optimal_value();
        pi.iter()
            .zip(&self.rewards)
            .map(|(&p, &r)| p * (best - r))
            .sum()
    }

    /// Advantage A(a) = r(a) − E_{a'∼π} r(a').
    pub fn advantage(&self, pi: &[f64]) -> Vec<f64> {
        let mean: f64 = pi.iter().zip(&self.rewards).map(|(&p, &r)| p * r).sum();
        self.rewards.iter().map(|&r| r - mean).collect()
    }

    /// The 1-state, γ = 0 MDP carrying this instance, for cross-checking the
    /// native steppers against the general machinery.
    pub fn as_mdp(&self) -> TabularMdp {
        let k = self.num_arms();
        crate::mdp::validate_mdp(RawMdp {
            num_states: 1,
            num_actions: k,
            gamma: 0.0,
            mu: vec![1.0],
            transition: vec![vec![vec![1.0]; k]],
            reward: vec![self.rewards.iter().map(|&r| vec![r]).collect()],
        })
        .expect("a valid bandit instance embeds into a valid MDP")
    }
}

/// Native single-state Hadamard step in the policy domain:
/// π'_a ∝ π_a (1 + 2ηA(a))², with the exact normalizer
/// 1 + 4η² E_{a'∼π}[A(a')²].
pub fn mab_hadamard_step(pi: &[f64], inst: &MabInstance, eta: f64) -> Vec<f64> {
    let adv = inst.advantage(pi);
    let exp_sq: f64 = pi.iter().zip(&adv).map(|(&p, &a)| p * a * a).sum();
    let denom = 1.0 + 4.0 * eta * eta * exp_sq;
    pi.iter()
        .zip(&adv)
        .map(|(&p, &a)| {
            let m = 1.0 + 2.0 * eta * a;
            p * m * m / denom
        })
        .collect()
}

/// Native single-state softmax PG step: θ'_a = θ_a + η π(a) A(a).
/// Returns shift-normalized logits.
pub fn mab_softmax_pg_step(logits: &[f64], inst: &MabInstance, eta: f64) -> Vec<f64> {
    let pi = softmax(logits);
    let adv = inst.advantage(&pi);
    let next: Vec<f64> = logits
        .iter()
        .zip(pi.iter().zip(&adv))
        .map(|(&t, (&p, &a))| t + eta * p * a)
        .collect();
    shift_normalize(next)
}

/// Native single-state softmax NPG step: θ'_a = θ_a + η A(a).
/// Returns shift-normalized logits.
pub fn mab_softmax_npg_step(logits: &[f64], inst: &MabInstance, eta: f64) -> Vec<f64> {
    let pi = softmax(logits);
    let adv = inst.advantage(&pi);
    let next: Vec<f64> = logits.iter().zip(&adv).map(|(&t, &a)| t + eta * a).collect();
    shift_normalize(next)
}

fn shift_normalize(mut logits: Vec<f64>) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    logits.iter_mut().for_each(|x| *x -= max);
    logits
}
