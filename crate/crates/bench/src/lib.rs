//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use rdfrl_core::planning::{DiscreteMdp, Transitions};

/// A ring of `n` states with `k` actions. Action `a` moves `a + 1` steps
/// forward with probability 0.8 and stays put otherwise. State 0 is terminal.
pub fn ring_mdp(n: usize, k: usize, gamma: f64) -> DiscreteMdp {
    let mut row_ptr = vec![0];
    let mut next = Vec::new();
    let mut prob = Vec::new();
    let mut reward = Vec::new();
    for s in 0..n {
        for a in 0..k {
            if s == 0 {
                next.push(0);
                prob.push(1.0);
                reward.push(0.0);
            } else {
                next.extend([(s + a + 1) % n, s]);
                prob.extend([0.8, 0.2]);
                let r = -1.0 - 0.1 * a as f64;
                reward.extend([r, r]);
            }
            row_ptr.push(next.len());
        }
    }
    let mut terminal = vec![false; n];
    terminal[0] = true;
    let t = Transitions { n_states: n, n_actions: k, row_ptr, next, prob, terminal };
    DiscreteMdp::new(Arc::new(t), reward, gamma).expect("ring MDP is well formed")
}
