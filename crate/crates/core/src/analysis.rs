//! Convergence constants and run-trace audits.
//!
//! Every constant in the sublinear and linear convergence guarantees is
//! computed from the MDP and its optimal values, and every inequality those
//! guarantees assert is replayed against recorded traces: monotone values,
//! the quantitative one-iteration improvement, the g⁻¹/k sublinear bound,
//! the local and global linear bounds, the value-error/b-gap bound, b-gap
//! monotonicity past the threshold iteration and the max-error/μ̃ bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hadamard::RunTrace;
use crate::mdp::{policy_evaluation, MdpError, OptimalBundle, TabularMdp};

pub const CHECK_VALUE_MONOTONICITY: &str = "value_monotonicity";
pub const CHECK_IMPROVEMENT_LOWER_BOUND: &str = "improvement_lower_bound";
pub const CHECK_SUBLINEAR_BOUND: &str = "sublinear_bound";
pub const CHECK_SUBLINEAR_BOUND_HALF_LAMBDA: &str = "sublinear_bound_half_lambda";
pub const CHECK_LOCAL_LINEAR_BOUND: &str = "local_linear_bound";
pub const CHECK_GLOBAL_LINEAR_BOUND: &str = "global_linear_bound";
pub const CHECK_VALUE_ERROR_B_GAP_BOUND: &str = "value_error_b_gap_bound";
pub const CHECK_B_GAP_MONOTONE_AFTER_K0: &str = "b_gap_monotone_after_k0";
pub const CHECK_MAX_ERROR_MU_BOUND: &str = "max_error_mu_bound";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("trace is empty")]
    EmptyTrace,

    #[error("trace indices are not contiguous from zero: record {index} has k = {found}")]
    NonContiguousTrace { index: usize, found: usize },

    #[error("constants carry lambda_hat = {expected} but the trace gives {found}")]
    LambdaMismatch { expected: f64, found: f64 },

    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Constants of the convergence guarantees for one (MDP, κ) pair.
///
/// `g_value` is the improvement constant in its proof form
/// 3κμ̃²(1−γ)⁴λ/(4+κ²); the statement form with (1−γ⁴) is reported next to
/// it but never used by the audits, since only the (1−γ)⁴ version is backed
/// by the derivation. Fields that divide by a minimum over states with
/// non-optimal actions are `None` when no such state exists. `rho` and
/// `c_local` depend on recorded b-gaps at the threshold iteration and stay
/// `None` until bound against a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub kappa: f64,
    pub gamma: f64,
    pub mu_tilde: f64,
    pub lambda_hat: f64,
    pub g_value: f64,
    pub g_statement: f64,
    pub m1: Option<f64>,
    pub k0: Option<f64>,
    pub rho: Option<f64>,
    pub c_local: Option<f64>,
    pub c_global: f64,
}

/// Computes every trace-independent constant.
///
/// `lambda_hat` is the running estimate of λ = inf_k min_s (1 − b_s^k); use
/// [`estimate_lambda`] on the trace that will be audited.
pub fn compute_constants(
    mdp: &TabularMdp,
    opt: &OptimalBundle,
    kappa: f64,
    lambda_hat: f64,
) -> TheoremConstants {
    assert!(kappa > 0.0 && kappa < 1.0, "kappa must lie in (0,1)");
    assert!(
        lambda_hat > 0.0 && lambda_hat <= 1.0,
        "lambda_hat must lie in (0,1]"
    );
    let gamma = mdp.gamma();
    let mu_tilde = mdp.mu_tilde();
    let one_minus = 1.0 - gamma;
    let g_base = 3.0 * kappa * mu_tilde * mu_tilde / (4.0 + kappa * kappa) * lambda_hat;
    let g_value = g_base * one_minus.powi(4);
    let g_statement = g_base * (1.0 - gamma.powi(4));

    let max_gap = opt
        .v_star
        .iter()
        .zip(&opt.v_hat)
        .map(|(&vs, &vh)| vs - vh)
        .fold(0.0, f64::max);
    let c_global = max_gap / one_minus;

    let (m1, k0) = if opt.s_tilde.is_empty() {
        (None, None)
    } else {
        let min_tilde_gap = opt
            .s_tilde
            .iter()
            .map(|&s| opt.v_star[s] - opt.v_tilde[s])
            .fold(f64::INFINITY, f64::min);
        let min_sum = opt
            .v_star
            .iter()
            .zip(&opt.v_hat)
            .map(|(&vs, &vh)| vs + vh)
            .fold(f64::INFINITY, f64::min);
        let m1 = min_tilde_gap
            * (1.0 - kappa / 2.0 + kappa * one_minus * one_minus * mu_tilde / 4.0 * min_sum);
        let k0 = 8.0 * gamma / (g_value * mu_tilde * m1);
        (Some(m1), Some(k0))
    };

    TheoremConstants {
        kappa,
        gamma,
        mu_tilde,
        lambda_hat,
        g_value,
        g_statement,
        m1,
        k0,
        rho: None,
        c_local: None,
        c_global,
    }
}

impl TheoremConstants {
    /// Threshold iteration rounded up to a usable trace index.
    pub fn k0_index(&self) -> Option<usize> {
        self.k0.map(|k0| k0.ceil() as usize)
    }

    /// Fills `rho` and `c_local` from the recorded b-gaps at ⌈k₀/2⌉ and
    /// ⌈k₀⌉. Leaves them `None` when the trace is too short to reach ⌈k₀⌉
    /// or when no state has non-optimal actions.
    pub fn bind_trace(&mut self, trace: &RunTrace) {
        let (Some(k0), Some(m1)) = (self.k0, self.m1) else {
            return;
        };
        let k0_idx = k0.ceil() as usize;
        let half_idx = (k0 / 2.0).ceil() as usize;
        if k0_idx >= trace.len() {
            return;
        }
        let max_b_half = trace.records[half_idx]
            .b_gap
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        let max_b_k0 = trace.records[k0_idx]
            .b_gap
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        let one_minus = 1.0 - self.gamma;
        self.rho = Some(
            one_minus * one_minus * self.kappa * self.mu_tilde / (4.0 + self.kappa * self.kappa)
                * (1.0 - max_b_half)
                * m1,
        );
        self.c_local = Some(self.c_global * max_b_k0);
    }
}

/// Running estimate of λ: the minimum over recorded iterations of
/// min_s (1 − b_s^k). Strictly positive whenever the initial policy is, and
/// nonincreasing as the trace is extended.
pub fn estimate_lambda(trace: &RunTrace) -> f64 {
    assert!(!trace.is_empty(), "estimate_lambda needs a nonempty trace");
    trace
        .records
        .iter()
        .flat_map(|r| r.b_gap.iter().map(|&b| 1.0 - b))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

/// Outcome of a single audited inequality. `worst_violation` is the largest
/// margin lhs − rhs seen over the trace (negative when the inequality held
/// everywhere with room to spare) and `at_iteration` is where it occurred.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub tolerance: f64,
    pub worst_violation: Option<f64>,
    pub at_iteration: Option<usize>,
}

/// Per-check verdicts for one audited trace, with the constants the audit
/// was run against (trace-bound fields filled in).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub constants: TheoremConstants,
    pub checks: Vec<CheckResult>,
}

impl AuditReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tracks the worst (largest) violation across iterations.
struct Worst {
    violation: f64,
    at: usize,
    seen: bool,
}

impl Worst {
    fn new() -> Self {
        Worst {
            violation: f64::NEG_INFINITY,
            at: 0,
            seen: false,
        }
    }

    fn update(&mut self, violation: f64, at: usize) {
        if !self.seen || violation > self.violation {
            self.violation = violation;
            self.at = at;
        }
        self.seen = true;
    }

    fn finish(self, name: &str, tolerance: f64) -> CheckResult {
        if !self.seen {
            return skipped(name, tolerance);
        }
        CheckResult {
            name: name.to_string(),
            status: if self.violation <= tolerance {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            tolerance,
            worst_violation: Some(self.violation),
            at_iteration: Some(self.at),
        }
    }
}

fn skipped(name: &str, tolerance: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        status: CheckStatus::Skipped,
        tolerance,
        worst_violation: None,
        at_iteration: None,
    }
}

/// Replays every audited inequality against a recorded trace.
///
/// The constants must have been computed with `lambda_hat` equal to
/// [`estimate_lambda`] of the same trace; the audit rebinds `rho` and
/// `c_local` from the trace itself. Linear-regime checks are reported as
/// skipped when the trace does not reach ⌈k₀⌉ or when no state has
/// non-optimal actions.
pub fn audit(
    trace: &RunTrace,
    mdp: &TabularMdp,
    opt: &OptimalBundle,
    consts: &TheoremConstants,
    tol: f64,
) -> Result<AuditReport, AnalysisError> {
    if trace.is_empty() {
        return Err(AnalysisError::EmptyTrace);
    }
    for (index, rec) in trace.records.iter().enumerate() {
        if rec.k != index {
            return Err(AnalysisError::NonContiguousTrace { index, found: rec.k });
        }
    }
    let lambda = estimate_lambda(trace);
    if lambda != consts.lambda_hat {
        return Err(AnalysisError::LambdaMismatch {
            expected: consts.lambda_hat,
            found: lambda,
        });
    }
    let mut consts = consts.clone();
    consts.bind_trace(trace);

    let n = trace.len();
    let gamma = mdp.gamma();
    let mu_tilde = mdp.mu_tilde();
    let records = &trace.records;

    // Per-step checks over consecutive iterations.
    let mut monotone = Worst::new();
    let mut improvement = Worst::new();
    let improve_coef = 3.0 * consts.kappa * mu_tilde * mu_tilde * (1.0 - gamma) * (1.0 - gamma)
        / (4.0 + consts.kappa * consts.kappa);
    for k in 0..n.saturating_sub(1) {
        let gain = records[k + 1].v_mu - records[k].v_mu;
        monotone.update(-gain, k + 1);
        let total_sq: f64 = records[k].exp_sq_adv.iter().sum();
        improvement.update(improve_coef * total_sq - gain, k + 1);
    }

    // Sublinear bound δ_k ≤ g⁻¹/k for k ≥ 1, plus the λ̂/2 sensitivity form.
    let mut sublinear = Worst::new();
    let mut sublinear_half = Worst::new();
    for (k, rec) in records.iter().enumerate().skip(1) {
        let bound = 1.0 / (consts.g_value * k as f64);
        sublinear.update(rec.delta - bound, k);
        sublinear_half.update(rec.delta - 2.0 * bound, k);
    }

    // Linear-regime checks, evaluable only when the trace reaches ⌈k₀⌉.
    let k0_reachable = consts
        .k0_index()
        .map(|idx| idx < n)
        .unwrap_or(false);
    let (local_linear, global_linear, b_monotone) = if k0_reachable {
        let k0_idx = consts.k0_index().unwrap();
        let rho = consts.rho.expect("bound above");
        let c_local = consts.c_local.expect("bound above");
        let mut local = Worst::new();
        let mut global = Worst::new();
        for (k, rec) in records.iter().enumerate() {
            let decay = (1.0 - rho).powf(k as f64 - k0_idx as f64);
            global.update(rec.delta - consts.c_global * decay, k);
            if k >= k0_idx {
                local.update(rec.delta - c_local * decay, k);
            }
        }
        let mut b_mono = Worst::new();
        for k in k0_idx..n - 1 {
            for s in 0..mdp.num_states() {
                b_mono.update(records[k + 1].b_gap[s] - records[k].b_gap[s], k + 1);
            }
        }
        (
            local.finish(CHECK_LOCAL_LINEAR_BOUND, tol),
            global.finish(CHECK_GLOBAL_LINEAR_BOUND, tol),
            b_mono.finish(CHECK_B_GAP_MONOTONE_AFTER_K0, tol),
        )
    } else {
        (
            skipped(CHECK_LOCAL_LINEAR_BOUND, tol),
            skipped(CHECK_GLOBAL_LINEAR_BOUND, tol),
            skipped(CHECK_B_GAP_MONOTONE_AFTER_K0, tol),
        )
    };

    // Per-record checks that re-evaluate the recorded policies exactly.
    let mut value_error = Worst::new();
    let mut max_error = Worst::new();
    for (k, rec) in records.iter().enumerate() {
        let vb = policy_evaluation(mdp, &rec.policy)?;
        let expected_b: f64 = vb
            .visitation
            .iter()
            .zip(&rec.b_gap)
            .map(|(&d, &b)| d * b)
            .sum();
        value_error.update(rec.delta - consts.c_global * expected_b, k);
        let worst_state_error = opt
            .v_star
            .iter()
            .zip(&vb.v)
            .map(|(&vs, &vk)| vs - vk)
            .fold(f64::NEG_INFINITY, f64::max);
        max_error.update(worst_state_error - rec.delta / mu_tilde, k);
    }

    let checks = vec![
        monotone.finish(CHECK_VALUE_MONOTONICITY, tol),
        improvement.finish(CHECK_IMPROVEMENT_LOWER_BOUND, tol),
        sublinear.finish(CHECK_SUBLINEAR_BOUND, tol),
        sublinear_half.finish(CHECK_SUBLINEAR_BOUND_HALF_LAMBDA, tol),
        local_linear,
        global_linear,
        value_error.finish(CHECK_VALUE_ERROR_B_GAP_BOUND, tol),
        b_monotone,
        max_error.finish(CHECK_MAX_ERROR_MU_BOUND, tol),
    ];

    Ok(AuditReport {
        constants: consts,
        checks,
    })
}
