//! Exact policy evaluation: values, advantages and visitation distributions
//! via direct linear solves (dense elimination for small state spaces, a
//! fixed-point iteration beyond that).

use nalgebra::{DMatrix, DVector};

use super::{MdpError, OptimalBundle, Policy, TabularMdp, ROW_SUM_TOL};

/// State counts up to this size are solved by dense LU elimination; larger
/// systems fall back to fixed-point iteration.
const DIRECT_SOLVE_MAX_STATES: usize = 512;
const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_CAP: usize = 100_000_000;

/// Everything the gradient algorithms need about a fixed policy: V^π, Q^π,
/// the advantage A^π = Q^π − V^π, the discounted visitation d^π_μ and the
/// scalar objective V^π(μ).
#[derive(Debug, Clone)]
pub struct ValueBundle {
    pub v: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub adv: Vec<Vec<f64>>,
    pub visitation: Vec<f64>,
    pub v_mu: f64,
}

fn check_dims(mdp: &TabularMdp, pi: &Policy) -> Result<(), MdpError> {
    if pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions() {
        return Err(MdpError::DimensionMismatch(format!(
            "policy is {}x{}, MDP is {}x{}",
            pi.num_states(),
            pi.num_actions(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    Ok(())
}

/// Row-stochastic state transition matrix under `pi`:
/// P_π(s, s') = Σ_a π(a|s) P(s'|s, a).
fn policy_transition(mdp: &TabularMdp, pi: &Policy) -> DMatrix<f64> {
    let n = mdp.num_states();
    let mut m = DMatrix::zeros(n, n);
    for s in 0..n {
        for a in 0..mdp.num_actions() {
            let w = pi.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for (s2, &p) in mdp.transition(s, a).iter().enumerate() {
                m[(s, s2)] += w * p;
            }
        }
    }
    m
}

/// Solves (I − γ M) x = b. For γ < 1 the system is always nonsingular.
fn solve_discounted(m: &DMatrix<f64>, b: &[f64], gamma: f64) -> Result<Vec<f64>, MdpError> {
    let n = b.len();
    if n <= DIRECT_SOLVE_MAX_STATES {
        let mut a = DMatrix::identity(n, n);
        a -= m.scale(gamma);
        let rhs = DVector::from_column_slice(b);
        let x = a.lu().solve(&rhs).ok_or(MdpError::SingularSystem)?;
        return Ok(x.as_slice().to_vec());
    }
    // Fixed point x ← b + γ M x, contraction factor γ.
    let mut x = DVector::from_column_slice(b);
    for _ in 0..FIXED_POINT_CAP {
        let next = DVector::from_column_slice(b) + m.scale(gamma) * &x;
        let residual = (&next - &x).amax();
        x = next;
        if residual <= FIXED_POINT_TOL * (1.0 + x.amax()) {
            return Ok(x.as_slice().to_vec());
        }
    }
    Err(MdpError::NonConvergence {
        iterations: FIXED_POINT_CAP,
        residual: f64::NAN,
    })
}

/// Discounted state visitation d^π_ρ for an arbitrary start distribution ρ,
/// from the transpose fixed-point system (I − γ P_πᵀ) d = (1 − γ) ρ.
///
/// ρ may put zero mass on states; only the MDP's own μ must be fully
/// supported.
pub fn visitation_from(mdp: &TabularMdp, pi: &Policy, rho: &[f64]) -> Result<Vec<f64>, MdpError> {
    check_dims(mdp, pi)?;
    check_distribution(rho, mdp.num_states())?;
    let p = policy_transition(mdp, pi);
    let scaled: Vec<f64> = rho.iter().map(|&r| (1.0 - mdp.gamma()) * r).collect();
    solve_discounted(&p.transpose(), &scaled, mdp.gamma())
}

fn check_distribution(rho: &[f64], n: usize) -> Result<(), MdpError> {
    if rho.len() != n {
        return Err(MdpError::DimensionMismatch(format!(
            "distribution has length {}, expected {n}",
            rho.len()
        )));
    }
    let sum: f64 = rho.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL || rho.iter().any(|&p| p < 0.0) {
        return Err(MdpError::InitialNotStochastic { sum });
    }
    Ok(())
}

/// Exact evaluation of a fixed policy.
///
/// V solves the Bellman system V = r_π + γ P_π V; Q, A and the visitation
/// distribution follow from it. No sampling anywhere.
pub fn policy_evaluation(mdp: &TabularMdp, pi: &Policy) -> Result<ValueBundle, MdpError> {
    check_dims(mdp, pi)?;
    let n = mdp.num_states();
    let a_n = mdp.num_actions();
    let gamma = mdp.gamma();

    let p = policy_transition(mdp, pi);
    let r_pi: Vec<f64> = (0..n)
        .map(|s| {
            (0..a_n)
                .map(|a| pi.prob(s, a) * mdp.expected_reward(s, a))
                .sum()
        })
        .collect();
    let v = solve_discounted(&p, &r_pi, gamma)?;

    let q: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..a_n)
                .map(|a| {
                    let future: f64 = mdp
                        .transition(s, a)
                        .iter()
                        .zip(&v)
                        .map(|(&pr, &vs)| pr * vs)
                        .sum();
                    mdp.expected_reward(s, a) + gamma * future
                })
                .collect()
        })
        .collect();
    let adv: Vec<Vec<f64>> = q
        .iter()
        .zip(&v)
        .map(|(qs, &vs)| qs.iter().map(|&qa| qa - vs).collect())
        .collect();

    let scaled_mu: Vec<f64> = mdp.mu().iter().map(|&m| (1.0 - gamma) * m).collect();
    let visitation = solve_discounted(&p.transpose(), &scaled_mu, gamma)?;

    let v_mu = mdp.mu().iter().zip(&v).map(|(&m, &vs)| m * vs).sum();

    Ok(ValueBundle {
        v,
        q,
        adv,
        visitation,
        v_mu,
    })
}

/// Performance difference lemma evaluated from the π₁ side:
/// (1/(1−γ)) E_{s∼d_ρ^{π₁}} E_{a∼π₁} [A^{π₂}(s, a)], which equals
/// V^{π₁}(ρ) − V^{π₂}(ρ).
pub fn performance_difference(
    mdp: &TabularMdp,
    pi1: &Policy,
    pi2: &Policy,
    rho: &[f64],
) -> Result<f64, MdpError> {
    check_dims(mdp, pi1)?;
    let vb2 = policy_evaluation(mdp, pi2)?;
    let d1 = visitation_from(mdp, pi1, rho)?;
    let mut total = 0.0;
    for s in 0..mdp.num_states() {
        let inner: f64 = (0..mdp.num_actions())
            .map(|a| pi1.prob(s, a) * vb2.adv[s][a])
            .sum();
        total += d1[s] * inner;
    }
    Ok(total / (1.0 - mdp.gamma()))
}

/// Both sides of the value-error upper bound through b-gaps:
/// lhs = V*(ρ) − V^π(ρ) and
/// rhs = (max_s (V*(s) − V̂*(s)) / (1−γ)) · E_{s∼d_ρ^π} [b_s^π].
/// The bound guarantees lhs ≤ rhs.
pub fn value_error_bound(
    mdp: &TabularMdp,
    pi: &Policy,
    opt: &OptimalBundle,
    vb: &ValueBundle,
    rho: &[f64],
) -> Result<(f64, f64), MdpError> {
    check_dims(mdp, pi)?;
    let lhs: f64 = rho
        .iter()
        .zip(opt.v_star.iter().zip(&vb.v))
        .map(|(&r, (&vs, &vp))| r * (vs - vp))
        .sum();
    let d = visitation_from(mdp, pi, rho)?;
    let b = super::b_gap(pi, opt);
    let max_gap = opt
        .v_star
        .iter()
        .zip(&opt.v_hat)
        .map(|(&vs, &vh)| vs - vh)
        .fold(0.0, f64::max);
    let expected_b: f64 = d.iter().zip(&b).map(|(&ds, &bs)| ds * bs).sum();
    Ok((lhs, max_gap / (1.0 - mdp.gamma()) * expected_b))
}
