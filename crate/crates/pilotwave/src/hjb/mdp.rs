//! Finite MDPs with value iteration and policy iteration.
//!
//! Both solvers are deterministic: iteration order is part of the contract,
//! greedy ties break toward the lowest action index, and the randomized
//! accept-reject improvement draws from a seeded stream. Policy evaluation is
//! a dense LU solve of `(I - gamma P_pi) V = R_pi`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particles::stream_rng;

/// Dense finite MDP: `transition[s][a]` is a probability row over successor
/// states, `reward[s][a]` the immediate reward for taking `a` in `s`.
#[derive(Clone, Debug)]
pub struct LatticeMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
    pub discount: f64,
}

impl LatticeMdp {
    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::Dp("MDP needs at least one state and action".into()));
        }
        if self.n_states > 10_000 {
            return Err(Error::Dp("MDP capped at 1e4 states (dense solves)".into()));
        }
        if self.transition.len() != self.n_states || self.reward.len() != self.n_states {
            return Err(Error::Dp(
                "transition/reward tables must cover every state".into(),
            ));
        }
        for (s, rows) in self.transition.iter().enumerate() {
            if rows.len() != self.n_actions || self.reward[s].len() != self.n_actions {
                return Err(Error::Dp(format!("state {s}: action tables incomplete")));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != self.n_states {
                    return Err(Error::Dp(format!("state {s} action {a}: bad row length")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::Dp(format!(
                        "state {s} action {a}: transition row sums to {sum}"
                    )));
                }
                if row.iter().any(|&p| p < -1e-15) {
                    return Err(Error::Dp(format!(
                        "state {s} action {a}: negative transition probability"
                    )));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::Dp(format!(
                "discount must be in [0, 1], got {}",
                self.discount
            )));
        }
        if self.discount >= 1.0 && !self.has_terminal_state() {
            return Err(Error::Dp(
                "discount = 1 requires an absorbing zero-reward state".into(),
            ));
        }
        Ok(())
    }

    /// An absorbing state with zero reward under every action.
    fn has_terminal_state(&self) -> bool {
        (0..self.n_states).any(|s| {
            (0..self.n_actions)
                .all(|a| self.reward[s][a] == 0.0 && (self.transition[s][a][s] - 1.0).abs() < 1e-12)
        })
    }

    /// One-step lookahead value of `(s, a)` under `values`.
    pub fn q_value(&self, values: &[f64], s: usize, a: usize) -> f64 {
        let future: f64 = self.transition[s][a]
            .iter()
            .zip(values)
            .map(|(&p, &v)| p * v)
            .sum();
        self.reward[s][a] + self.discount * future
    }

    /// Exact policy evaluation by dense LU.
    pub fn evaluate_policy(&self, policy: &[usize]) -> Result<Vec<f64>> {
        let n = self.n_states;
        let mut m = DMatrix::<f64>::identity(n, n);
        let mut r = DVector::<f64>::zeros(n);
        for s in 0..n {
            let a = policy[s];
            for sp in 0..n {
                m[(s, sp)] -= self.discount * self.transition[s][a][sp];
            }
            r[s] = self.reward[s][a];
        }
        let v = m
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::Dp("policy evaluation system is singular".into()))?;
        Ok(v.iter().copied().collect())
    }
}

/// Solver output: values, the policy, and per-iteration sup-norm deltas
/// (value iteration) or evaluation counts (policy iteration).
#[derive(Clone, Debug, Serialize)]
pub struct SolveOutcome {
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// Sup-norm of successive value changes (value iteration only).
    pub sup_norm_history: Vec<f64>,
}

/// Bellman optimality iteration to sup-norm tolerance 1e-10.
pub fn value_iteration(mdp: &LatticeMdp) -> Result<SolveOutcome> {
    mdp.validate()?;
    let n = mdp.n_states;
    let mut values = vec![0.0; n];
    let mut history = Vec::new();
    let tol = 1e-10;
    let max_iter = 1_000_000;
    for it in 0..max_iter {
        let mut next = vec![0.0; n];
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions {
                best = best.max(mdp.q_value(&values, s, a));
            }
            next[s] = best;
        }
        let delta = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        history.push(delta);
        values = next;
        if delta <= tol {
            let policy = greedy_policy(mdp, &values);
            return Ok(SolveOutcome {
                values,
                policy,
                iterations: it + 1,
                sup_norm_history: history,
            });
        }
    }
    Err(Error::Dp("value iteration did not converge".into()))
}

/// Greedy policy with lowest-index tie breaking.
pub fn greedy_policy(mdp: &LatticeMdp, values: &[f64]) -> Vec<usize> {
    (0..mdp.n_states)
        .map(|s| {
            let mut best_a = 0;
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions {
                let q = mdp.q_value(values, s, a);
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            best_a
        })
        .collect()
}

/// Policy improvement strategies.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum Improvement {
    /// Full argmax sweep each round.
    ExactGreedy,
    /// Per state, propose `proposals_per_state` random actions and accept a
    /// change only when it strictly improves the one-step lookahead value.
    RandomizedAcceptReject {
        seed: u64,
        proposals_per_state: usize,
    },
}

/// Alternating exact evaluation and improvement. Terminates when the Bellman
/// optimality gap of the evaluated policy drops below 1e-10, which makes the
/// randomized variant land on the same fixed point as the exact sweep.
pub fn policy_iteration(mdp: &LatticeMdp, improvement: Improvement) -> Result<SolveOutcome> {
    mdp.validate()?;
    let n = mdp.n_states;
    let mut policy = vec![0usize; n];
    let mut rng = match improvement {
        Improvement::RandomizedAcceptReject { seed, .. } => Some(stream_rng(seed, 0)),
        Improvement::ExactGreedy => None,
    };
    let max_rounds = 100_000;
    for round in 0..max_rounds {
        let values = mdp.evaluate_policy(&policy)?;
        // convergence: no action beats the current policy's value anywhere
        let gap = (0..n)
            .map(|s| {
                let vs = values[s];
                (0..mdp.n_actions)
                    .map(|a| mdp.q_value(&values, s, a) - vs)
                    .fold(0.0_f64, f64::max)
            })
            .fold(0.0_f64, f64::max);
        if gap <= 1e-10 {
            return Ok(SolveOutcome {
                values,
                policy,
                iterations: round + 1,
                sup_norm_history: Vec::new(),
            });
        }
        match improvement {
            Improvement::ExactGreedy => {
                policy = greedy_policy(mdp, &values);
            }
            Improvement::RandomizedAcceptReject {
                proposals_per_state,
                ..
            } => {
                let rng = rng.as_mut().unwrap();
                for s in 0..n {
                    let mut current_q = mdp.q_value(&values, s, policy[s]);
                    for _ in 0..proposals_per_state.max(1) {
                        let a = rng.gen_range(0..mdp.n_actions);
                        let q = mdp.q_value(&values, s, a);
                        if q > current_q + 1e-12 {
                            policy[s] = a;
                            current_q = q;
                        }
                    }
                }
            }
        }
    }
    Err(Error::Dp("policy iteration did not converge".into()))
}

/// JSON encoding of an MDP: sparse transition triplets plus rewards.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpJson {
    pub states: usize,
    pub actions: usize,
    /// `(state, action, next_state, probability)`
    pub transitions: Vec<(usize, usize, usize, f64)>,
    /// `(state, action, reward)`
    pub rewards: Vec<(usize, usize, f64)>,
    pub discount: f64,
}

pub fn read_mdp_json(path: &Path) -> Result<LatticeMdp> {
    let text = fs::read_to_string(path)?;
    let input: MdpJson = serde_json::from_str(&text)?;
    let mut mdp = LatticeMdp {
        n_states: input.states,
        n_actions: input.actions,
        transition: vec![vec![vec![0.0; input.states]; input.actions]; input.states],
        reward: vec![vec![0.0; input.actions]; input.states],
        discount: input.discount,
    };
    for (s, a, sp, p) in input.transitions {
        if s >= input.states || a >= input.actions || sp >= input.states {
            return Err(Error::Dp(format!("transition ({s},{a},{sp}) out of range")));
        }
        mdp.transition[s][a][sp] += p;
    }
    for (s, a, r) in input.rewards {
        if s >= input.states || a >= input.actions {
            return Err(Error::Dp(format!("reward ({s},{a}) out of range")));
        }
        mdp.reward[s][a] = r;
    }
    mdp.validate()?;
    Ok(mdp)
}

pub fn write_mdp_json(mdp: &LatticeMdp, path: &Path) -> Result<()> {
    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            for sp in 0..mdp.n_states {
                let p = mdp.transition[s][a][sp];
                if p != 0.0 {
                    transitions.push((s, a, sp, p));
                }
            }
            if mdp.reward[s][a] != 0.0 {
                rewards.push((s, a, mdp.reward[s][a]));
            }
        }
    }
    let out = MdpJson {
        states: mdp.n_states,
        actions: mdp.n_actions,
        transitions,
        rewards,
        discount: mdp.discount,
    };
    fs::write(path, serde_json::to_string_pretty(&out)?)?;
    Ok(())
}

/// Seeded random dense MDP for tests and the solver scenario.
pub fn random_mdp(n_states: usize, n_actions: usize, discount: f64, seed: u64) -> LatticeMdp {
    let mut rng = stream_rng(seed, 1);
    let mut transition = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
    let mut reward = vec![vec![0.0; n_actions]; n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            let mut row: Vec<f64> = (0..n_states).map(|_| -(rng.gen::<f64>().ln())).collect();
            let sum: f64 = row.iter().sum();
            for p in &mut row {
                *p /= sum;
            }
            // renormalize exactly against accumulated roundoff
            let sum2: f64 = row.iter().sum();
            let last = n_states - 1;
            row[last] += 1.0 - sum2;
            transition[s][a] = row;
            reward[s][a] = rng.gen::<f64>();
        }
    }
    LatticeMdp {
        n_states,
        n_actions,
        transition,
        reward,
        discount,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_cycle(gamma: f64) -> LatticeMdp {
        // single action, reward 1 only when leaving state 0
        let n = 3;
        let mut transition = vec![vec![vec![0.0; n]; 1]; n];
        let mut reward = vec![vec![0.0; 1]; n];
        for s in 0..n {
            transition[s][0][(s + 1) % n] = 1.0;
        }
        reward[0][0] = 1.0;
        LatticeMdp {
            n_states: n,
            n_actions: 1,
            transition,
            reward,
            discount: gamma,
        }
    }

    #[test]
    fn gamma_zero_takes_max_immediate_reward() {
        let mdp = random_mdp(8, 3, 0.0, 17);
        let out = value_iteration(&mdp).unwrap();
        for s in 0..8 {
            let best = (0..3).map(|a| mdp.reward[s][a]).fold(f64::MIN, f64::max);
            assert!((out.values[s] - best).abs() < 1e-12);
        }
    }

    #[test]
    fn three_cycle_matches_geometric_series() {
        let gamma: f64 = 0.9;
        let mdp = three_cycle(gamma);
        let out = value_iteration(&mdp).unwrap();
        // brute-force rollout of the discounted reward stream
        let oracle = |start: usize| {
            let mut v = 0.0;
            let mut s = start;
            let mut g = 1.0;
            for _ in 0..2000 {
                v += g * mdp.reward[s][0];
                g *= gamma;
                s = (s + 1) % 3;
            }
            v
        };
        for s in 0..3 {
            assert!(
                (out.values[s] - oracle(s)).abs() < 1e-9,
                "state {s}: {} vs {}",
                out.values[s],
                oracle(s)
            );
        }
        // closed form for state 0: 1 / (1 - gamma^3)
        assert!((out.values[0] - 1.0 / (1.0 - gamma.powi(3))).abs() < 1e-9);
    }

    #[test]
    fn vi_and_pi_agree_on_random_mdps() {
        for seed in 0..10 {
            let mdp = random_mdp(20, 4, 0.9, 100 + seed);
            let vi = value_iteration(&mdp).unwrap();
            let pi = policy_iteration(&mdp, Improvement::ExactGreedy).unwrap();
            let diff = vi
                .values
                .iter()
                .zip(&pi.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            assert!(diff < 1e-8, "seed {seed}: value gap {diff}");
            assert_eq!(vi.policy, pi.policy, "seed {seed}: policies differ");
        }
    }

    #[test]
    fn randomized_improvement_reaches_the_same_fixed_point() {
        for seed in 0..5 {
            let mdp = random_mdp(12, 4, 0.9, 300 + seed);
            let exact = policy_iteration(&mdp, Improvement::ExactGreedy).unwrap();
            let rand = policy_iteration(
                &mdp,
                Improvement::RandomizedAcceptReject {
                    seed: 900 + seed,
                    proposals_per_state: 8,
                },
            )
            .unwrap();
            let diff = exact
                .values
                .iter()
                .zip(&rand.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            assert!(diff < 1e-8, "seed {seed}: value gap {diff}");
        }
    }

    #[test]
    fn exhaustive_enumeration_oracle_small_mdp() {
        let mdp = random_mdp(5, 3, 0.85, 71);
        let vi = value_iteration(&mdp).unwrap();
        // enumerate all 3^5 deterministic policies
        let mut best = vec![f64::NEG_INFINITY; 5];
        let total = 3usize.pow(5);
        for code in 0..total {
            let mut c = code;
            let policy: Vec<usize> = (0..5)
                .map(|_| {
                    let a = c % 3;
                    c /= 3;
                    a
                })
                .collect();
            let v = mdp.evaluate_policy(&policy).unwrap();
            for s in 0..5 {
                best[s] = best[s].max(v[s]);
            }
        }
        for s in 0..5 {
            assert!(
                (vi.values[s] - best[s]).abs() < 1e-8,
                "state {s}: vi {} vs enumerated {}",
                vi.values[s],
                best[s]
            );
        }
    }

    #[test]
    fn value_iteration_contracts_at_gamma() {
        let gamma = 0.9;
        let mdp = random_mdp(15, 3, gamma, 55);
        let out = value_iteration(&mdp).unwrap();
        for w in out.sup_norm_history.windows(2) {
            if w[0] > 1e-12 && w[1] > 1e-12 {
                assert!(
                    w[1] <= gamma * w[0] + 1e-12,
                    "contraction violated: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let mut mdp = random_mdp(4, 2, 0.9, 5);
        mdp.transition[1][0][2] += 0.1;
        assert!(value_iteration(&mdp).is_err());
        let mut mdp2 = random_mdp(4, 2, 1.0, 6);
        assert!(mdp2.validate().is_err()); // gamma = 1 without terminal state
                                           // add an absorbing zero-reward state
        for a in 0..2 {
            mdp2.transition[3][a] = vec![0.0, 0.0, 0.0, 1.0];
            mdp2.reward[3][a] = 0.0;
        }
        assert!(mdp2.validate().is_ok());
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mdp = random_mdp(6, 2, 0.8, 77);
        let path = dir.path().join("mdp.json");
        write_mdp_json(&mdp, &path).unwrap();
        let back = read_mdp_json(&path).unwrap();
        let a = value_iteration(&mdp).unwrap();
        let b = value_iteration(&back).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
