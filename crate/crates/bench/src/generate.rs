//! Seeded random instance generation.
//!
//! All randomness flows through ChaCha8 seeded from a caller-supplied 64-bit
//! seed, so instances are bit-reproducible across platforms and runs.

use hadamard_pg::baselines::MabInstance;
use hadamard_pg::mdp::{validate_mdp, RawMdp, TabularMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random MDP: transition rows are normalized strictly-positive uniform
/// variates, rewards are uniform on [0,1] per (s, a, s'), and the initial
/// distribution is uniform over states. Deterministic in the seed.
///
/// Panics if `num_states`/`num_actions` are zero or `gamma` is outside
/// [0,1); the CLI validates its inputs before calling this.
pub fn generate_random_mdp(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    gamma: f64,
) -> TabularMdp {
    assert!(num_states >= 1 && num_actions >= 1, "dimensions must be positive");
    assert!((0.0..1.0).contains(&gamma), "gamma must lie in [0,1)");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transition = (0..num_states)
        .map(|_| {
            (0..num_actions)
                .map(|_| {
                    // 1 − U ∈ (0,1] keeps every row entry strictly positive.
                    let raw: Vec<f64> = (0..num_states)
                        .map(|_| 1.0 - rng.random::<f64>())
                        .collect();
                    let total: f64 = raw.iter().sum();
                    raw.into_iter().map(|p| p / total).collect()
                })
                .collect()
        })
        .collect();
    let reward = (0..num_states)
        .map(|_| {
            (0..num_actions)
                .map(|_| (0..num_states).map(|_| rng.random::<f64>()).collect())
                .collect()
        })
        .collect();
    validate_mdp(RawMdp {
        num_states,
        num_actions,
        gamma,
        mu: vec![1.0 / num_states as f64; num_states],
        transition,
        reward,
    })
    .expect("generator output satisfies every MDP invariant")
}

/// Random bandit instance with arm rewards i.i.d. uniform on [0,1].
/// Deterministic in the seed.
pub fn generate_random_mab(seed: u64, k_arms: usize) -> MabInstance {
    assert!(k_arms >= 1, "need at least one arm");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rewards = (0..k_arms).map(|_| rng.random::<f64>()).collect();
    MabInstance::new(rewards).expect("generator output satisfies instance invariants")
}
