//! Value iteration vs policy iteration (exact and randomized accept-reject):
//! `cargo run --release --example mdp_solvers`

use pilotwave::hjb::mdp::random_mdp;
use pilotwave::hjb::{policy_iteration, value_iteration, Improvement, LatticeMdp};

fn main() -> pilotwave::Result<()> {
    // closed form sanity: a 3-cycle paying 1 when leaving state 0 has
    // V(0) = 1 / (1 - gamma^3)
    let gamma: f64 = 0.9;
    let mut transition = vec![vec![vec![0.0; 3]; 1]; 3];
    for s in 0..3 {
        transition[s][0][(s + 1) % 3] = 1.0;
    }
    let mut reward = vec![vec![0.0; 1]; 3];
    reward[0][0] = 1.0;
    let cycle = LatticeMdp {
        n_states: 3,
        n_actions: 1,
        transition,
        reward,
        discount: gamma,
    };
    let out = value_iteration(&cycle)?;
    println!(
        "3-cycle: V(0) = {:.10} vs closed form {:.10}",
        out.values[0],
        1.0 / (1.0 - gamma.powi(3))
    );

    let mdp = random_mdp(20, 4, 0.9, 12345);
    let vi = value_iteration(&mdp)?;
    let pi = policy_iteration(&mdp, Improvement::ExactGreedy)?;
    let ar = policy_iteration(
        &mdp,
        Improvement::RandomizedAcceptReject {
            seed: 99,
            proposals_per_state: 8,
        },
    )?;
    let gap = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0_f64, f64::max)
    };
    println!("random 20-state 4-action MDP, gamma = 0.9:");
    println!("  value iteration:     {} sweeps", vi.iterations);
    println!("  policy iteration:    {} rounds", pi.iterations);
    println!("  accept-reject:       {} rounds", ar.iterations);
    println!("  |V_vi - V_pi|_inf  = {:.3e}", gap(&vi.values, &pi.values));
    println!("  |V_vi - V_ar|_inf  = {:.3e}", gap(&vi.values, &ar.values));
    println!("  greedy policies identical: {}", vi.policy == pi.policy);
    // the contraction factor shows up in the sup-norm history
    let tail: Vec<f64> = vi
        .sup_norm_history
        .windows(2)
        .skip(5)
        .take(5)
        .map(|w| w[1] / w[0])
        .collect();
    println!("  successive sup-norm ratios ~ gamma: {tail:.3?}");
    Ok(())
}
