//! Deterministic policy gradient under the Hadamard parameterization.
//!
//! Two equivalent forms are implemented. The sphere-constrained form keeps a
//! unit vector θ_s per state with π(a|s) = θ_{s,a}² and ascends the
//! Riemannian gradient followed by renormalization. The normalized form
//! keeps an unconstrained nonzero θ_s with π(a|s) = θ_{s,a}²/‖θ_s‖² and
//! takes plain gradient steps on a per-iteration surrogate objective; no
//! projection is ever needed because the gradient is orthogonal to the
//! iterate. Both produce identical policy sequences from the same initial
//! policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{
    b_gap, policy_evaluation, MdpError, OptimalBundle, Policy, TabularMdp, ValueBundle,
};

/// Unit-norm tolerance for sphere rows.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Errors from parameter construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("row {state} has norm {norm}, expected 1 within {UNIT_NORM_TOL}")]
    RowNotUnit { state: usize, norm: f64 },

    #[error("parameter ({state},{action}) is zero; initialization requires nonzero entries")]
    ZeroEntry { state: usize, action: usize },

    #[error("parameter row {state} has zero norm")]
    ZeroRow { state: usize },

    #[error("policy probability ({state},{action}) is not strictly positive")]
    NonPositiveProbability { state: usize, action: usize },

    #[error("kappa = {kappa} is outside (0,1)")]
    BadKappa { kappa: f64 },

    #[error("eta = {eta} must be positive")]
    BadEta { eta: f64 },

    #[error("parameter rows are ragged or empty")]
    BadShape,
}

/// Errors raised while stepping.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error(transparent)]
    Mdp(#[from] MdpError),

    #[error("parameter ({state},{action}) became exactly zero during the update")]
    ZeroParameter { state: usize, action: usize },

    #[error("parameter row {state} has zero norm")]
    ZeroRow { state: usize },
}

/// Step-size configuration. In the κ-driven regime the step size is
/// η = (1−γ)²κ/4 with κ ∈ (0,1); a raw η can be supplied instead for the
/// single-state comparisons where the step size is set directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    kappa: Option<f64>,
    eta: f64,
    max_iters: usize,
}

impl StepConfig {
    pub fn from_kappa(kappa: f64, gamma: f64, max_iters: usize) -> Result<Self, ParamError> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(ParamError::BadKappa { kappa });
        }
        let eta = (1.0 - gamma) * (1.0 - gamma) * kappa / 4.0;
        Ok(StepConfig {
            kappa: Some(kappa),
            eta,
            max_iters,
        })
    }

    pub fn from_eta(eta: f64, max_iters: usize) -> Result<Self, ParamError> {
        if eta.is_nan() || eta <= 0.0 {
            return Err(ParamError::BadEta { eta });
        }
        Ok(StepConfig {
            kappa: None,
            eta,
            max_iters,
        })
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn max_iters(&self) -> usize {
        self.max_iters
    }
}

fn check_shape(theta: &[Vec<f64>]) -> Result<(), ParamError> {
    let a_n = theta.first().map_or(0, Vec::len);
    if theta.is_empty() || a_n == 0 || theta.iter().any(|row| row.len() != a_n) {
        return Err(ParamError::BadShape);
    }
    Ok(())
}

/// Per-state unit-norm parameter vectors for the sphere-constrained form;
/// the induced policy is the entrywise square.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereParams {
    theta: Vec<Vec<f64>>,
}

impl SphereParams {
    /// Validates unit row norms and nonzero entries.
    pub fn new(theta: Vec<Vec<f64>>) -> Result<Self, ParamError> {
        check_shape(&theta)?;
        for (s, row) in theta.iter().enumerate() {
            if let Some(a) = row.iter().position(|&x| x == 0.0) {
                return Err(ParamError::ZeroEntry { state: s, action: a });
            }
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(ParamError::RowNotUnit { state: s, norm });
            }
        }
        Ok(SphereParams { theta })
    }

    /// Uniform initialization θ_{s,a} = 1/√|A|; the default for experiments.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let x = 1.0 / (num_actions as f64).sqrt();
        SphereParams {
            theta: vec![vec![x; num_actions]; num_states],
        }
    }

    /// Seeded random rows with nonzero entries, normalized to the sphere.
    pub fn random(seed: u64, num_states: usize, num_actions: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..num_states)
            .map(|_| {
                let mut row: Vec<f64> = (0..num_actions)
                    .map(|_| loop {
                        let x: f64 = rng.random_range(-1.0..1.0);
                        if x.abs() >= 1e-3 {
                            break x;
                        }
                    })
                    .collect();
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                row.iter_mut().for_each(|x| *x /= norm);
                row
            })
            .collect();
        SphereParams { theta }
    }

    /// Square roots of a strictly positive policy.
    pub fn from_policy(pi: &Policy) -> Result<Self, ParamError> {
        let theta = pi
            .rows()
            .iter()
            .enumerate()
            .map(|(s, row)| {
                row.iter()
                    .enumerate()
                    .map(|(a, &p)| {
                        if p > 0.0 {
                            Ok(p.sqrt())
                        } else {
                            Err(ParamError::NonPositiveProbability { state: s, action: a })
                        }
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        Ok(SphereParams { theta })
    }

    pub fn num_states(&self) -> usize {
        self.theta.len()
    }

    pub fn num_actions(&self) -> usize {
        self.theta.first().map_or(0, Vec::len)
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.theta[s]
    }

    /// Induced policy π(a|s) = θ_{s,a}².
    pub fn policy(&self) -> Policy {
        Policy::from_rows_unchecked(
            self.theta
                .iter()
                .map(|row| row.iter().map(|&x| x * x).collect())
                .collect(),
        )
    }
}

/// Unconstrained nonzero parameter rows for the normalized form; the induced
/// policy is π(a|s) = θ_{s,a}²/‖θ_s‖². Row norms never decrease under the
/// gradient steps, so nonzero rows stay nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeParams {
    theta: Vec<Vec<f64>>,
}

impl FreeParams {
    pub fn new(theta: Vec<Vec<f64>>) -> Result<Self, ParamError> {
        check_shape(&theta)?;
        for (s, row) in theta.iter().enumerate() {
            if row.iter().all(|&x| x == 0.0) {
                return Err(ParamError::ZeroRow { state: s });
            }
        }
        Ok(FreeParams { theta })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let x = 1.0 / (num_actions as f64).sqrt();
        FreeParams {
            theta: vec![vec![x; num_actions]; num_states],
        }
    }

    pub fn from_policy(pi: &Policy) -> Self {
        FreeParams {
            theta: pi
                .rows()
                .iter()
                .map(|row| row.iter().map(|&p| p.sqrt()).collect())
                .collect(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.theta.len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.theta[s]
    }

    pub fn row_norms(&self) -> Vec<f64> {
        self.theta
            .iter()
            .map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }

    /// Induced policy π(a|s) = θ_{s,a}²/‖θ_s‖².
    pub fn policy(&self) -> Policy {
        Policy::from_rows_unchecked(
            self.theta
                .iter()
                .map(|row| {
                    let norm_sq: f64 = row.iter().map(|x| x * x).sum();
                    row.iter().map(|&x| x * x / norm_sq).collect()
                })
                .collect(),
        )
    }
}

/// Riemannian gradient of V^{π_θ}(μ) on the product of unit spheres:
/// g_{s,a} = (2 θ_{s,a}/(1−γ)) d^π_μ(s) A^π(s,a). Tangent to θ_s at every
/// state because the advantage is centered under π.
pub fn riemannian_gradient(
    mdp: &TabularMdp,
    params: &SphereParams,
    vb: &ValueBundle,
) -> Vec<Vec<f64>> {
    let scale = 2.0 / (1.0 - mdp.gamma());
    params
        .theta
        .iter()
        .enumerate()
        .map(|(s, row)| {
            let w = scale * vb.visitation[s];
            row.iter()
                .zip(&vb.adv[s])
                .map(|(&t, &a)| w * t * a)
                .collect()
        })
        .collect()
}

/// Gradient of the per-iteration surrogate objective of the normalized form:
/// ∂L_k/∂θ_{s,a} = (2 d^k_μ(s)/(1−γ)) θ_{s,a} A^k(s,a), evaluated at the
/// current iterate.
pub fn normalized_gradient(
    mdp: &TabularMdp,
    params: &FreeParams,
    vb: &ValueBundle,
) -> Vec<Vec<f64>> {
    let scale = 2.0 / (1.0 - mdp.gamma());
    params
        .theta
        .iter()
        .enumerate()
        .map(|(s, row)| {
            let w = scale * vb.visitation[s];
            row.iter()
                .zip(&vb.adv[s])
                .map(|(&t, &a)| w * t * a)
                .collect()
        })
        .collect()
}

fn step_sphere_rows(
    params: &SphereParams,
    grad: &[Vec<f64>],
    eta: f64,
) -> Result<SphereParams, StepError> {
    let theta = params
        .theta
        .iter()
        .zip(grad)
        .enumerate()
        .map(|(s, (row, g))| {
            let moved: Vec<f64> = row.iter().zip(g).map(|(&t, &gi)| t + eta * gi).collect();
            // ‖θ + ηg‖² = 1 + η²‖g‖² by tangency, so the norm is at least 1.
            let norm = moved.iter().map(|x| x * x).sum::<f64>().sqrt();
            let row: Vec<f64> = moved.into_iter().map(|x| x / norm).collect();
            if let Some(a) = row.iter().position(|&x| x == 0.0) {
                return Err(StepError::ZeroParameter { state: s, action: a });
            }
            Ok(row)
        })
        .collect::<Result<_, _>>()?;
    Ok(SphereParams { theta })
}

/// One sphere-constrained update: ascend the Riemannian gradient and
/// renormalize each row. Returns the new parameters and the induced policy.
pub fn hadamard_step(
    mdp: &TabularMdp,
    params: &SphereParams,
    cfg: &StepConfig,
) -> Result<(SphereParams, Policy), StepError> {
    let vb = policy_evaluation(mdp, &params.policy())?;
    hadamard_step_with(mdp, params, &vb, cfg.eta())
}

/// Sphere-constrained update reusing an already computed evaluation of the
/// current policy.
pub fn hadamard_step_with(
    mdp: &TabularMdp,
    params: &SphereParams,
    vb: &ValueBundle,
    eta: f64,
) -> Result<(SphereParams, Policy), StepError> {
    let grad = riemannian_gradient(mdp, params, vb);
    let next = step_sphere_rows(params, &grad, eta)?;
    let pi = next.policy();
    Ok((next, pi))
}

/// One projection-free update of the normalized form: a plain gradient step
/// θ ← θ + η ∇L_k. Row norms cannot shrink, so the parameterization stays
/// well defined.
pub fn normalized_step(
    mdp: &TabularMdp,
    params: &FreeParams,
    cfg: &StepConfig,
) -> Result<(FreeParams, Policy), StepError> {
    for (s, row) in params.theta.iter().enumerate() {
        if row.iter().all(|&x| x == 0.0) {
            return Err(StepError::ZeroRow { state: s });
        }
    }
    let vb = policy_evaluation(mdp, &params.policy())?;
    normalized_step_with(mdp, params, &vb, cfg.eta())
}

/// Normalized update reusing an already computed evaluation.
pub fn normalized_step_with(
    mdp: &TabularMdp,
    params: &FreeParams,
    vb: &ValueBundle,
    eta: f64,
) -> Result<(FreeParams, Policy), StepError> {
    let grad = normalized_gradient(mdp, params, vb);
    let theta: Vec<Vec<f64>> = params
        .theta
        .iter()
        .zip(&grad)
        .map(|(row, g)| row.iter().zip(g).map(|(&t, &gi)| t + eta * gi).collect())
        .collect();
    let next = FreeParams { theta };
    let pi = next.policy();
    Ok((next, pi))
}

/// Closed-form one-step policy change π^{k+1}(a|s) − π^k(a|s), computed
/// without touching the parameters:
/// Δ(s,a) = π/(1+η²‖g_s‖²) · (4ηd/(1−γ)) · (A + (ηd/(1−γ))(A² − E_π[A²])).
/// Deltas sum to zero per state and adding them to the current policy
/// reproduces the sphere update exactly.
pub fn policy_delta(
    mdp: &TabularMdp,
    pi: &Policy,
    vb: &ValueBundle,
    cfg: &StepConfig,
) -> Vec<Vec<f64>> {
    let eta = cfg.eta();
    let scale = 2.0 / (1.0 - mdp.gamma());
    (0..pi.num_states())
        .map(|s| {
            let w = scale * vb.visitation[s];
            let exp_sq: f64 = (0..pi.num_actions())
                .map(|a| pi.prob(s, a) * vb.adv[s][a] * vb.adv[s][a])
                .sum();
            let grad_norm_sq = w * w * exp_sq;
            let denom = 1.0 + eta * eta * grad_norm_sq;
            (0..pi.num_actions())
                .map(|a| {
                    let adv = vb.adv[s][a];
                    let inner = adv + 0.5 * eta * w * (adv * adv - exp_sq);
                    pi.prob(s, a) / denom * 2.0 * eta * w * inner
                })
                .collect()
        })
        .collect()
}

/// One per-iteration snapshot of everything the convergence audits consume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Iteration index, contiguous from zero.
    pub k: usize,
    /// Policy at iteration k.
    pub policy: Policy,
    /// V^k(μ).
    pub v_mu: f64,
    /// δ_k = V*(μ) − V^k(μ).
    pub delta: f64,
    /// Per-state mass on non-optimal actions b_s^k.
    pub b_gap: Vec<f64>,
    /// Per-state Riemannian gradient norm ‖g_s^k‖.
    pub grad_norm: Vec<f64>,
    /// Per-state E_{a∼π^k}[(A^k(s,a))²].
    pub exp_sq_adv: Vec<f64>,
}

/// Full per-iteration diagnostics of one gradient-ascent run; the input to
/// the theorem auditor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of gradient steps taken (records minus the initial snapshot).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_policy(&self) -> Option<&Policy> {
        self.records.last().map(|r| &r.policy)
    }
}

fn make_record(
    mdp: &TabularMdp,
    opt: &OptimalBundle,
    v_star_mu: f64,
    k: usize,
    pi: &Policy,
    vb: &ValueBundle,
) -> TraceRecord {
    let scale = 2.0 / (1.0 - mdp.gamma());
    let n = mdp.num_states();
    let mut grad_norm = Vec::with_capacity(n);
    let mut exp_sq_adv = Vec::with_capacity(n);
    for s in 0..n {
        let exp_sq: f64 = (0..mdp.num_actions())
            .map(|a| pi.prob(s, a) * vb.adv[s][a] * vb.adv[s][a])
            .sum();
        exp_sq_adv.push(exp_sq);
        grad_norm.push(scale * vb.visitation[s] * exp_sq.sqrt());
    }
    TraceRecord {
        k,
        policy: pi.clone(),
        v_mu: vb.v_mu,
        delta: v_star_mu - vb.v_mu,
        b_gap: b_gap(pi, opt),
        grad_norm,
        exp_sq_adv,
    }
}

/// Runs the sphere-constrained algorithm for a fixed iteration budget,
/// recording every diagnostic at every iteration. The trace always contains
/// `max_iters + 1` records: the initial policy plus one per step.
pub fn run(
    mdp: &TabularMdp,
    init: SphereParams,
    cfg: &StepConfig,
    opt: &OptimalBundle,
) -> Result<RunTrace, StepError> {
    let v_star_mu = opt.v_star_under(mdp.mu());
    let mut params = init;
    let mut pi = params.policy();
    let mut vb = policy_evaluation(mdp, &pi)?;
    let mut records = Vec::with_capacity(cfg.max_iters() + 1);
    records.push(make_record(mdp, opt, v_star_mu, 0, &pi, &vb));
    for k in 0..cfg.max_iters() {
        let (next, next_pi) = hadamard_step_with(mdp, &params, &vb, cfg.eta())?;
        params = next;
        pi = next_pi;
        vb = policy_evaluation(mdp, &pi)?;
        records.push(make_record(mdp, opt, v_star_mu, k + 1, &pi, &vb));
    }
    Ok(RunTrace { records })
}
