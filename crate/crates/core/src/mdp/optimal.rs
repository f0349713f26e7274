//! Bellman-optimality solving: V*, Q*, optimal action sets and the derived
//! gap quantities V̂*, Ṽ* that drive the convergence constants.

use std::collections::BTreeSet;

use super::{MdpError, Policy, TabularMdp};

const MAX_VI_SWEEPS: usize = 5_000_000;

/// Optimal values and the structure built on them. `optimal_actions[s]` is
/// the tie-tolerant argmax set A*_s; `v_hat`/`v_tilde` are the min/max of
/// Q* over the non-optimal actions, with the convention v_hat(s) = 0 and
/// v_tilde(s) = V*(s) at states where every action is optimal. `s_tilde`
/// collects the states that still have non-optimal actions.
#[derive(Debug, Clone)]
pub struct OptimalBundle {
    pub v_star: Vec<f64>,
    pub q_star: Vec<Vec<f64>>,
    pub optimal_actions: Vec<BTreeSet<usize>>,
    pub v_hat: Vec<f64>,
    pub v_tilde: Vec<f64>,
    pub s_tilde: BTreeSet<usize>,
}

impl OptimalBundle {
    /// V* averaged under a state distribution.
    pub fn v_star_under(&self, rho: &[f64]) -> f64 {
        rho.iter().zip(&self.v_star).map(|(&r, &v)| r * v).sum()
    }
}

/// Solves the Bellman optimality equation by value iteration.
///
/// Iterates until the sup-norm difference of successive sweeps falls below
/// tol·(1−γ)/(2γ) (clamped to at most tol), which leaves `v_star` within
/// `tol` of the true V* and the Bellman residual below `tol`. Ties in the
/// argmax are resolved with the `tie_tol` band: an action is optimal when
/// its Q* is within `tie_tol` of the row maximum.
pub fn solve_optimal(
    mdp: &TabularMdp,
    tol: f64,
    tie_tol: f64,
) -> Result<OptimalBundle, MdpError> {
    assert!(tol > 0.0 && tie_tol > 0.0, "tolerances must be positive");
    let n = mdp.num_states();
    let a_n = mdp.num_actions();
    let gamma = mdp.gamma();

    let threshold = if gamma > 0.0 {
        (tol * (1.0 - gamma) / (2.0 * gamma)).min(tol)
    } else {
        0.0
    };

    let backup = |v: &[f64], s: usize, a: usize| -> f64 {
        let future: f64 = mdp
            .transition(s, a)
            .iter()
            .zip(v)
            .map(|(&p, &vs)| p * vs)
            .sum();
        mdp.expected_reward(s, a) + gamma * future
    };

    // Starting from zero keeps the iterates below V*, so the solved values
    // never overshoot the true optimum.
    let mut v = vec![0.0; n];
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_VI_SWEEPS {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                (0..a_n)
                    .map(|a| backup(&v, s, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        residual = next
            .iter()
            .zip(&v)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if residual <= threshold {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MdpError::NonConvergence {
            iterations: MAX_VI_SWEEPS,
            residual,
        });
    }

    let q_star: Vec<Vec<f64>> = (0..n)
        .map(|s| (0..a_n).map(|a| backup(&v, s, a)).collect())
        .collect();
    let v_star: Vec<f64> = q_star
        .iter()
        .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();

    let mut optimal_actions = Vec::with_capacity(n);
    let mut v_hat = vec![0.0; n];
    let mut v_tilde = vec![0.0; n];
    let mut s_tilde = BTreeSet::new();
    for s in 0..n {
        let set: BTreeSet<usize> = (0..a_n)
            .filter(|&a| q_star[s][a] >= v_star[s] - tie_tol)
            .collect();
        if set.len() < a_n {
            s_tilde.insert(s);
            let non_optimal = (0..a_n).filter(|a| !set.contains(a));
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for a in non_optimal {
                lo = lo.min(q_star[s][a]);
                hi = hi.max(q_star[s][a]);
            }
            v_hat[s] = lo;
            v_tilde[s] = hi;
        } else {
            // All actions optimal: the convention used throughout the bounds.
            v_hat[s] = 0.0;
            v_tilde[s] = v_star[s];
        }
        optimal_actions.push(set);
    }

    Ok(OptimalBundle {
        v_star,
        q_star,
        optimal_actions,
        v_hat,
        v_tilde,
        s_tilde,
    })
}

/// b_s^π = Σ_{a ∉ A*_s} π(a|s): the policy mass on non-optimal actions,
/// the quantity whose decay certifies convergence.
pub fn b_gap(pi: &Policy, opt: &OptimalBundle) -> Vec<f64> {
    (0..pi.num_states())
        .map(|s| {
            (0..pi.num_actions())
                .filter(|a| !opt.optimal_actions[s].contains(a))
                .map(|a| pi.prob(s, a))
                .sum()
        })
        .collect()
}
