//! Property tests over randomized small instances: the structural
//! invariants every evaluated policy, gradient step and audit must satisfy.

use hadamard_pg::analysis::{audit, compute_constants, estimate_lambda};
use hadamard_pg::baselines::{mab_hadamard_step, MabInstance};
use hadamard_pg::hadamard::{
    hadamard_step_with, normalized_step_with, policy_delta, riemannian_gradient, run, FreeParams,
    RunTrace, SphereParams, StepConfig,
};
use hadamard_pg::mdp::{
    performance_difference, policy_evaluation, solve_optimal, validate_mdp, value_error_bound,
    Policy, RawMdp, TabularMdp,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_mdp(seed: u64, states: usize, actions: usize, gamma: f64) -> TabularMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transition = (0..states)
        .map(|_| {
            (0..actions)
                .map(|_| {
                    let raw: Vec<f64> = (0..states).map(|_| 1.0 - rng.random::<f64>()).collect();
                    let total: f64 = raw.iter().sum();
                    raw.into_iter().map(|p| p / total).collect()
                })
                .collect()
        })
        .collect();
    let reward = (0..states)
        .map(|_| {
            (0..actions)
                .map(|_| (0..states).map(|_| rng.random::<f64>()).collect())
                .collect()
        })
        .collect();
    validate_mdp(RawMdp {
        num_states: states,
        num_actions: actions,
        gamma,
        mu: vec![1.0 / states as f64; states],
        transition,
        reward,
    })
    .unwrap()
}

fn random_policy(seed: u64, states: usize, actions: usize) -> Policy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..states)
        .map(|_| {
            let raw: Vec<f64> = (0..actions).map(|_| 1.0 - rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|p| p / total).collect()
        })
        .collect();
    Policy::new(rows).unwrap()
}

prop_compose! {
    fn instance()(seed in any::<u64>(), states in 1usize..=5, actions in 1usize..=4,
                  gamma_idx in 0usize..4) -> (u64, usize, usize, f64) {
        (seed, states, actions, [0.3, 0.5, 0.8, 0.9][gamma_idx])
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn advantage_centering_and_visitation_bounds((seed, s_n, a_n, gamma) in instance()) {
        let mdp = random_mdp(seed, s_n, a_n, gamma);
        let pi = random_policy(seed ^ 0xABCD, s_n, a_n);
        let vb = policy_evaluation(&mdp, &pi).unwrap();

        for s in 0..s_n {
            let centered: f64 = (0..a_n).map(|a| pi.prob(s, a) * vb.adv[s][a]).sum();
            prop_assert!(centered.abs() <= 1e-10);
            prop_assert!(vb.visitation[s] >= (1.0 - gamma) * mdp.mu()[s] - 1e-12);
            prop_assert!(vb.v[s] >= -1e-12);
            prop_assert!(vb.v[s] <= 1.0 / (1.0 - gamma) + 1e-12);
        }
        let total: f64 = vb.visitation.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn performance_difference_identity((seed, s_n, a_n, gamma) in instance()) {
        let mdp = random_mdp(seed, s_n, a_n, gamma);
        let pi1 = random_policy(seed ^ 1, s_n, a_n);
        let pi2 = random_policy(seed ^ 2, s_n, a_n);
        let pd = performance_difference(&mdp, &pi1, &pi2, mdp.mu()).unwrap();
        let v1 = policy_evaluation(&mdp, &pi1).unwrap().v_mu;
        let v2 = policy_evaluation(&mdp, &pi2).unwrap().v_mu;
        prop_assert!((pd - (v1 - v2)).abs() <= 1e-8);
    }

    #[test]
    fn value_error_bound_never_violated((seed, s_n, a_n, gamma) in instance()) {
        let mdp = random_mdp(seed, s_n, a_n, gamma);
        let opt = solve_optimal(&mdp, 1e-10, 1e-9).unwrap();
        let pi = random_policy(seed ^ 3, s_n, a_n);
        let vb = policy_evaluation(&mdp, &pi).unwrap();
        let (lhs, rhs) = value_error_bound(&mdp, &pi, &opt, &vb, mdp.mu()).unwrap();
        prop_assert!(lhs <= rhs + 1e-8);
    }

    #[test]
    fn bellman_residual_within_tolerance((seed, s_n, a_n, gamma) in instance()) {
        let mdp = random_mdp(seed, s_n, a_n, gamma);
        let tol = 1e-10;
        let tie_tol = 1e-9;
        let opt = solve_optimal(&mdp, tol, tie_tol).unwrap();
        for s in 0..s_n {
            let backup = (0..a_n)
                .map(|a| {
                    let future: f64 = mdp
                        .transition(s, a)
                        .iter()
                        .zip(&opt.v_star)
                        .map(|(&p, &v)| p * v)
                        .sum();
                    mdp.expected_reward(s, a) + gamma * future
                })
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((backup - opt.v_star[s]).abs() <= tol);
            if opt.s_tilde.contains(&s) {
                prop_assert!(opt.v_hat[s] <= opt.v_tilde[s]);
                prop_assert!(opt.v_tilde[s] < opt.v_star[s] + tie_tol);
            } else {
                prop_assert!(opt.v_hat[s] == 0.0);
                prop_assert!((opt.v_tilde[s] - opt.v_star[s]).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn gradient_steps_keep_structure((seed, s_n, a_n, gamma) in instance()) {
        let mdp = random_mdp(seed, s_n, a_n, gamma);
        let kappa = [0.1, 0.5, 0.9][(seed % 3) as usize];
        let cfg = StepConfig::from_kappa(kappa, gamma, 1).unwrap();
        let mut params = SphereParams::random(seed ^ 4, s_n, a_n);
        let mut prev_v_mu = f64::NEG_INFINITY;
        for _ in 0..50 {
            let pi = params.policy();
            let vb = policy_evaluation(&mdp, &pi).unwrap();
            prop_assert!(vb.v_mu >= prev_v_mu - 1e-12);
            prev_v_mu = vb.v_mu;

            let grad = riemannian_gradient(&mdp, &params, &vb);
            for s in 0..s_n {
                let inner: f64 = grad[s].iter().zip(params.row(s)).map(|(&g, &t)| g * t).sum();
                prop_assert!(inner.abs() <= 1e-12);
                let norm_sq: f64 = grad[s].iter().map(|g| g * g).sum();
                prop_assert!(1.0 + cfg.eta() * cfg.eta() * norm_sq
                    <= 1.0 + kappa * kappa / 4.0 + 1e-12);
            }

            let delta = policy_delta(&mdp, &pi, &vb, &cfg);
            let (next, next_pi) = hadamard_step_with(&mdp, &params, &vb, cfg.eta()).unwrap();
            for s in 0..s_n {
                let norm: f64 = next.row(s).iter().map(|x| x * x).sum::<f64>().sqrt();
                prop_assert!((norm - 1.0).abs() <= 1e-12);
                for a in 0..a_n {
                    prop_assert!((pi.prob(s, a) + delta[s][a] - next_pi.prob(s, a)).abs() <= 1e-10);
                }
            }
            // Strict positivity is preserved from a strictly positive start.
            prop_assert!(next_pi.min_prob() > 0.0);
            params = next;
        }
    }

    #[test]
    fn two_parameterizations_agree((seed, s_n, a_n, gamma) in instance()) {
        let mdp = random_mdp(seed, s_n, a_n, gamma);
        let cfg = StepConfig::from_kappa(0.5, gamma, 1).unwrap();
        let pi0 = random_policy(seed ^ 5, s_n, a_n);
        let mut sphere = SphereParams::from_policy(&pi0).unwrap();
        let mut free = FreeParams::from_policy(&pi0);
        let mut prev_norms = free.row_norms();
        for _ in 0..50 {
            let vb_a = policy_evaluation(&mdp, &sphere.policy()).unwrap();
            let (s2, pi_a) = hadamard_step_with(&mdp, &sphere, &vb_a, cfg.eta()).unwrap();
            let vb_b = policy_evaluation(&mdp, &free.policy()).unwrap();
            let (f2, pi_b) = normalized_step_with(&mdp, &free, &vb_b, cfg.eta()).unwrap();
            prop_assert!(pi_a.max_abs_diff(&pi_b) <= 1e-9);
            let norms = f2.row_norms();
            for (old, new) in prev_norms.iter().zip(&norms) {
                prop_assert!(*new >= *old - 1e-15);
            }
            sphere = s2;
            free = f2;
            prev_norms = norms;
        }
    }

    #[test]
    fn honest_traces_pass_audit((seed, a_n, gamma_idx, kappa_idx) in
        (any::<u64>(), 1usize..=5, 0usize..4, 0usize..3)) {
        let s_n = 1 + (seed % 6) as usize;
        let gamma = [0.3, 0.5, 0.8, 0.95][gamma_idx];
        let kappa = [0.1, 0.5, 0.9][kappa_idx];
        let mdp = random_mdp(seed, s_n, a_n, gamma);
        let opt = solve_optimal(&mdp, 1e-10, 1e-9).unwrap();
        let cfg = StepConfig::from_kappa(kappa, gamma, 100).unwrap();
        let trace = run(&mdp, SphereParams::uniform(s_n, a_n), &cfg, &opt).unwrap();
        let consts = compute_constants(&mdp, &opt, kappa, estimate_lambda(&trace));
        let report = audit(&trace, &mdp, &opt, &consts, 1e-8).unwrap();
        prop_assert!(report.all_passed(), "checks: {:?}", report.checks);
        for rec in &trace.records {
            prop_assert!(rec.delta >= -1e-10);
        }
    }

    #[test]
    fn lambda_estimate_is_running_infimum((seed, s_n, a_n, gamma) in instance()) {
        let mdp = random_mdp(seed, s_n, a_n, gamma);
        let opt = solve_optimal(&mdp, 1e-10, 1e-9).unwrap();
        let cfg = StepConfig::from_kappa(0.5, gamma, 30).unwrap();
        let trace = run(&mdp, SphereParams::uniform(s_n, a_n), &cfg, &opt).unwrap();
        let mut prev = f64::INFINITY;
        for end in 1..=trace.len() {
            let prefix = RunTrace { records: trace.records[..end].to_vec() };
            let lambda = estimate_lambda(&prefix);
            prop_assert!(lambda <= prev + 1e-15);
            prop_assert!(lambda > 0.0);
            prev = lambda;
        }
    }

    #[test]
    fn mab_update_stays_on_simplex(seed in any::<u64>(), arms in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rewards: Vec<f64> = (0..arms).map(|_| rng.random::<f64>()).collect();
        let inst = MabInstance::new(rewards).unwrap();
        let raw: Vec<f64> = (0..arms).map(|_| 1.0 - rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let mut pi: Vec<f64> = raw.into_iter().map(|p| p / total).collect();
        for _ in 0..20 {
            pi = mab_hadamard_step(&pi, &inst, 0.4);
            let sum: f64 = pi.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(pi.iter().all(|&p| p >= 0.0));
        }
    }
}
