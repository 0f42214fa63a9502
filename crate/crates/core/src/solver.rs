//! Average-cost solver for finite MDPs.
//!
//! [`rvia`] runs relative value iteration. The remaining functions certify or
//! cross-check its output: exact policy evaluation through the stationary
//! distribution of the induced chain, a Bellman residual, a closed-class
//! count for the unichain property, and exhaustive policy enumeration for
//! tiny instances.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
/// Closed classes up to this size are solved with a dense LU factorization.
const DENSE_LIMIT: usize = 800;
const POWER_TOL: f64 = 1e-14;
const POWER_MAX_ITERS: usize = 2_000_000;

/// Finite MDP with sparse transition rows indexed by `state * n_actions + action`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
    cost: Vec<f64>,
}

impl FiniteMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        rows: Vec<Vec<(usize, f64)>>,
        cost: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::param("mdp", "needs at least one state and one action"));
        }
        let n_rows = n_states * n_actions;
        if rows.len() != n_rows || cost.len() != n_rows {
            return Err(Error::param(
                "mdp",
                format!(
                    "expected {n_rows} rows, got {} kernel rows and {} costs",
                    rows.len(),
                    cost.len()
                ),
            ));
        }
        let mut offsets = Vec::with_capacity(n_rows + 1);
        let mut entries = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        offsets.push(0);
        for (r, row) in rows.into_iter().enumerate() {
            let mut sum = 0.0;
            for &(j, p) in &row {
                if j >= n_states || !(p >= 0.0) {
                    return Err(Error::param("mdp", format!("row {r}: bad entry ({j}, {p})")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::param("mdp", format!("row {r} sums to {sum}")));
            }
            entries.extend(row);
            offsets.push(entries.len());
        }
        if let Some(c) = cost.iter().find(|c| !c.is_finite()) {
            return Err(Error::param("mdp", format!("non-finite cost {c}")));
        }
        Ok(Self {
            n_states,
            n_actions,
            offsets,
            entries,
            cost,
        })
    }

    /// Same kernel, different cost table.
    pub fn with_cost(&self, cost: Vec<f64>) -> Result<Self> {
        if cost.len() != self.cost.len() {
            return Err(Error::param("mdp", "cost table has the wrong length"));
        }
        if let Some(c) = cost.iter().find(|c| !c.is_finite()) {
            return Err(Error::param("mdp", format!("non-finite cost {c}")));
        }
        Ok(Self {
            cost,
            ..self.clone()
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn row(&self, state: usize, action: usize) -> &[(usize, f64)] {
        let r = state * self.n_actions + action;
        &self.entries[self.offsets[r]..self.offsets[r + 1]]
    }

    #[inline]
    pub fn cost(&self, state: usize, action: usize) -> f64 {
        self.cost[state * self.n_actions + action]
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    fn q_value(&self, state: usize, action: usize, h: &[f64]) -> f64 {
        self.cost(state, action) + self.row(state, action).iter().map(|&(j, p)| p * h[j]).sum::<f64>()
    }

    /// Lowest-index minimizer of the one-step lookahead.
    #[inline]
    fn greedy(&self, state: usize, h: &[f64]) -> (usize, f64) {
        let mut best = (0, self.q_value(state, 0, h));
        for a in 1..self.n_actions {
            let q = self.q_value(state, a, h);
            if q < best.1 {
                best = (a, q);
            }
        }
        best
    }

    fn check_policy(&self, policy: &[usize]) -> Result<()> {
        if policy.len() != self.n_states || policy.iter().any(|&a| a >= self.n_actions) {
            return Err(Error::param("policy", "length or action out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RviaOptions {
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for RviaOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iters: 1_000_000,
        }
    }
}

/// Deterministic stationary policy with its solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub actions: Vec<usize>,
    /// `V(ref)` at convergence.
    pub average_cost: f64,
    /// Final sup-norm change of the relative values.
    pub residual: f64,
    pub iterations: usize,
    pub ref_state: usize,
    /// Relative values `h` the policy is greedy with respect to.
    #[serde(skip)]
    pub bias: Vec<f64>,
}

impl PolicyTable {
    #[inline]
    pub fn action(&self, state: usize) -> usize {
        self.actions[state]
    }
}

/// Relative value iteration.
///
/// Starting from `h = 0`, repeats `V(z) = min_a [C(z,a) + sum P(z'|z,a) h(z')]`
/// and `h = V - V(ref)` until the relative values move by less than
/// `epsilon` in sup norm. The returned policy is greedy with respect to the
/// returned bias, and `average_cost` is the matching `V(ref)`, so the triple
/// satisfies the Bellman equation up to `residual`.
pub fn rvia(mdp: &FiniteMdp, ref_state: usize, opts: &RviaOptions) -> Result<PolicyTable> {
    if ref_state >= mdp.n_states {
        return Err(Error::param("ref_state", format!("{ref_state} out of range")));
    }
    if !(opts.epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    let n = mdp.n_states;
    let mut h = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut actions = vec![0; n];
    let mut delta = f64::INFINITY;
    for it in 1..=opts.max_iters {
        for z in 0..n {
            let (a, q) = mdp.greedy(z, &h);
            actions[z] = a;
            v[z] = q;
        }
        let gain = v[ref_state];
        delta = 0.0;
        for z in 0..n {
            let next = v[z] - gain;
            delta = f64::max(delta, (next - h[z]).abs());
            v[z] = next;
        }
        if delta < opts.epsilon {
            return Ok(PolicyTable {
                actions,
                average_cost: gain,
                residual: delta,
                iterations: it,
                ref_state,
                bias: h,
            });
        }
        std::mem::swap(&mut h, &mut v);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iters,
        residual: delta,
    })
}

/// Sup-norm violation of the average-cost Bellman equation at `(policy, bias, gain)`.
///
/// Measures both `|C + P h - g - h|` along the policy and how far the policy
/// is from greedy.
pub fn bellman_residual(mdp: &FiniteMdp, policy: &[usize], bias: &[f64], gain: f64) -> f64 {
    (0..mdp.n_states)
        .map(|z| {
            let q = mdp.q_value(z, policy[z], bias);
            let (_, best) = mdp.greedy(z, bias);
            f64::max((q - gain - bias[z]).abs(), q - best)
        })
        .fold(0.0, f64::max)
}

/// Induced Markov chain of a deterministic policy.
struct InducedChain<'a> {
    mdp: &'a FiniteMdp,
    policy: &'a [usize],
}

impl<'a> InducedChain<'a> {
    fn row(&self, z: usize) -> &'a [(usize, f64)] {
        self.mdp.row(z, self.policy[z])
    }

    fn n(&self) -> usize {
        self.mdp.n_states
    }

    /// Closed communicating classes, each sorted by state index.
    fn closed_classes(&self) -> Vec<Vec<usize>> {
        let mut g = DiGraph::<(), ()>::with_capacity(self.n(), self.mdp.nnz());
        let nodes: Vec<_> = (0..self.n()).map(|_| g.add_node(())).collect();
        for z in 0..self.n() {
            for &(j, p) in self.row(z) {
                if p > 0.0 {
                    g.add_edge(nodes[z], nodes[j], ());
                }
            }
        }
        // Kosaraju is iterative; the recursive Tarjan overflows worker-thread stacks on long chains.
        let sccs = kosaraju_scc(&g);
        let mut comp = vec![0usize; self.n()];
        for (c, scc) in sccs.iter().enumerate() {
            for node in scc {
                comp[node.index()] = c;
            }
        }
        let mut classes: Vec<Vec<usize>> = sccs
            .into_iter()
            .enumerate()
            .filter(|(c, scc)| {
                scc.iter().all(|node| {
                    self.row(node.index())
                        .iter()
                        .all(|&(j, p)| p == 0.0 || comp[j] == *c)
                })
            })
            .map(|(_, scc)| {
                let mut v: Vec<usize> = scc.into_iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        classes.sort();
        classes
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(z) = stack.pop() {
            for &(j, p) in self.row(z) {
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    }

    /// Stationary distribution of a closed class, aligned with `class`.
    fn class_stationary(&self, class: &[usize]) -> Result<Vec<f64>> {
        match class.len() {
            1 => Ok(vec![1.0]),
            m if m <= DENSE_LIMIT => self.dense_stationary(class),
            _ => self.power_stationary(class),
        }
    }

    fn local_index(&self, class: &[usize]) -> Vec<usize> {
        let mut local = vec![usize::MAX; self.n()];
        for (k, &z) in class.iter().enumerate() {
            local[z] = k;
        }
        local
    }

    fn dense_stationary(&self, class: &[usize]) -> Result<Vec<f64>> {
        let m = class.len();
        let local = self.local_index(class);
        // Rows of (P^T - I) with the last balance equation replaced by sum(pi) = 1.
        let mut a = DMatrix::<f64>::zeros(m, m);
        for (k, &z) in class.iter().enumerate() {
            for &(j, p) in self.row(z) {
                a[(local[j], k)] += p;
            }
            a[(k, k)] -= 1.0;
        }
        for k in 0..m {
            a[(m - 1, k)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(m);
        rhs[m - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SingularChain(format!("LU solve failed on a class of {m} states")))?;
        let pi: Vec<f64> = pi.iter().map(|&v| if v < 0.0 && v > -1e-12 { 0.0 } else { v }).collect();
        if pi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::SingularChain("stationary solve produced negative mass".into()));
        }
        Ok(pi)
    }

    fn power_stationary(&self, class: &[usize]) -> Result<Vec<f64>> {
        let m = class.len();
        let local = self.local_index(class);
        let mut pi = vec![1.0 / m as f64; m];
        let mut next = vec![0.0; m];
        // Lazy chain (I + P) / 2 has the same stationary law and is aperiodic.
        for _ in 0..POWER_MAX_ITERS {
            next.iter_mut().zip(&pi).for_each(|(n, &p)| *n = 0.5 * p);
            for (k, &z) in class.iter().enumerate() {
                let mass = 0.5 * pi[k];
                for &(j, p) in self.row(z) {
                    next[local[j]] += mass * p;
                }
            }
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut pi, &mut next);
            if diff < POWER_TOL {
                let total: f64 = pi.iter().sum();
                return Ok(pi.into_iter().map(|v| v / total).collect());
            }
        }
        Err(Error::SingularChain(format!(
            "power iteration on a class of {m} states did not converge"
        )))
    }

    /// Probability of ending up in each closed class when started at `start`.
    fn absorption(&self, start: usize, classes: &[Vec<usize>]) -> Result<Vec<f64>> {
        let reach = self.reachable_from(start);
        let reached: Vec<usize> = (0..classes.len()).filter(|&c| reach[classes[c][0]]).collect();
        let mut out = vec![0.0; classes.len()];
        if reached.len() == 1 {
            out[reached[0]] = 1.0;
            return Ok(out);
        }
        let mut class_of = vec![usize::MAX; self.n()];
        for (c, class) in classes.iter().enumerate() {
            for &z in class {
                class_of[z] = c;
            }
        }
        let mut mu = vec![0.0; self.n()];
        mu[start] = 1.0;
        let mut next = vec![0.0; self.n()];
        for _ in 0..POWER_MAX_ITERS {
            let transient: f64 = (0..self.n())
                .filter(|&z| class_of[z] == usize::MAX)
                .map(|z| mu[z])
                .sum();
            if transient < POWER_TOL {
                for z in 0..self.n() {
                    if class_of[z] != usize::MAX {
                        out[class_of[z]] += mu[z];
                    }
                }
                let total: f64 = out.iter().sum();
                return Ok(out.into_iter().map(|v| v / total).collect());
            }
            next.iter_mut().for_each(|v| *v = 0.0);
            for z in 0..self.n() {
                if mu[z] != 0.0 {
                    for &(j, p) in self.row(z) {
                        next[j] += mu[z] * p;
                    }
                }
            }
            std::mem::swap(&mut mu, &mut next);
        }
        Err(Error::SingularChain("absorption probabilities did not converge".into()))
    }
}

/// Long-run average cost of `policy` started from state 0.
///
/// For a unichain policy this is the gain of every state. When the induced
/// chain has several closed classes, the class gains are weighted by the
/// probability of absorption from state 0.
pub fn evaluate_policy(mdp: &FiniteMdp, policy: &[usize]) -> Result<f64> {
    evaluate_policy_from(mdp, policy, 0)
}

pub fn evaluate_policy_from(mdp: &FiniteMdp, policy: &[usize], start: usize) -> Result<f64> {
    mdp.check_policy(policy)?;
    if start >= mdp.n_states {
        return Err(Error::param("start", format!("{start} out of range")));
    }
    let chain = InducedChain { mdp, policy };
    let classes = chain.closed_classes();
    let weights = chain.absorption(start, &classes)?;
    let mut total = 0.0;
    for (class, w) in classes.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let pi = chain.class_stationary(class)?;
        let gain: f64 = class
            .iter()
            .zip(&pi)
            .map(|(&z, &m)| m * mdp.cost(z, policy[z]))
            .sum();
        total += w * gain;
    }
    Ok(total)
}

/// Stationary distribution over all states of a unichain policy.
pub fn stationary_distribution(mdp: &FiniteMdp, policy: &[usize]) -> Result<Vec<f64>> {
    mdp.check_policy(policy)?;
    let chain = InducedChain { mdp, policy };
    let classes = chain.closed_classes();
    if classes.len() != 1 {
        return Err(Error::SingularChain(format!(
            "policy induces {} closed classes",
            classes.len()
        )));
    }
    let pi = chain.class_stationary(&classes[0])?;
    let mut full = vec![0.0; mdp.n_states];
    for (&z, m) in classes[0].iter().zip(pi) {
        full[z] = m;
    }
    Ok(full)
}

/// True iff the chain induced by `policy` has exactly one closed communicating class.
pub fn certify_unichain(mdp: &FiniteMdp, policy: &[usize]) -> bool {
    if mdp.check_policy(policy).is_err() {
        return false;
    }
    InducedChain { mdp, policy }.closed_classes().len() == 1
}

pub const ORACLE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub policy: Vec<usize>,
    pub average_cost: f64,
    /// Policies skipped because they were not unichain or failed to evaluate.
    pub skipped: usize,
}

/// Exhaustive search over all deterministic stationary policies.
pub fn brute_force_oracle(mdp: &FiniteMdp) -> Result<OracleResult> {
    let too_large = || Error::TooLarge {
        n_states: mdp.n_states,
        n_actions: mdp.n_actions,
        limit: ORACLE_LIMIT,
    };
    let n_states = u32::try_from(mdp.n_states).map_err(|_| too_large())?;
    let total = (mdp.n_actions as u64)
        .checked_pow(n_states)
        .filter(|&t| t <= ORACLE_LIMIT)
        .ok_or_else(too_large)?;

    let mut policy = vec![0usize; mdp.n_states];
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut skipped = 0;
    for _ in 0..total {
        let value = certify_unichain(mdp, &policy)
            .then(|| evaluate_policy(mdp, &policy).ok())
            .flatten();
        match value {
            Some(g) if best.as_ref().map_or(true, |(_, b)| g < *b) => best = Some((policy.clone(), g)),
            Some(_) => {}
            None => skipped += 1,
        }
        // Mixed-radix increment.
        for a in policy.iter_mut() {
            *a += 1;
            if *a < mdp.n_actions {
                break;
            }
            *a = 0;
        }
    }
    let (policy, average_cost) =
        best.ok_or_else(|| Error::SingularChain("no policy could be evaluated".into()))?;
    Ok(OracleResult {
        policy,
        average_cost,
        skipped,
    })
}

/// Random MDP in which every row reaches state 0, so every policy is unichain
/// and aperiodic. Costs are uniform on `[0, 10)`.
pub fn random_unichain_mdp<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize) -> FiniteMdp {
    let mut rows = Vec::with_capacity(n_states * n_actions);
    let mut cost = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states * n_actions {
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(n_states);
        for j in 0..n_states {
            if j == 0 || rng.random_bool(0.5) {
                row.push((j, rng.random_range(0.05..1.0)));
            }
        }
        let total: f64 = row.iter().map(|e| e.1).sum();
        row.iter_mut().for_each(|e| e.1 /= total);
        rows.push(row);
        cost.push(rng.random_range(0.0..10.0));
    }
    FiniteMdp::new(n_states, n_actions, rows, cost).expect("rows are normalized")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_state() -> FiniteMdp {
        FiniteMdp::new(1, 2, vec![vec![(0, 1.0)], vec![(0, 1.0)]], vec![3.0, 1.0]).unwrap()
    }

    fn two_state_coin() -> FiniteMdp {
        let row = vec![(0, 0.5), (1, 0.5)];
        FiniteMdp::new(2, 2, vec![row.clone(); 4], vec![0.0, 0.0, 1.0, 1.0]).unwrap()
    }

    fn tight() -> RviaOptions {
        RviaOptions {
            epsilon: 1e-10,
            max_iters: 1_000_000,
        }
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(FiniteMdp::new(2, 1, vec![vec![(0, 0.5)], vec![(1, 1.0)]], vec![0.0; 2]).is_err());
        assert!(FiniteMdp::new(1, 1, vec![vec![(3, 1.0)]], vec![0.0]).is_err());
        assert!(FiniteMdp::new(1, 1, vec![vec![(0, 1.0)]], vec![f64::NAN]).is_err());
    }

    #[test]
    fn single_state_mdp() {
        let mdp = single_state();
        let t = rvia(&mdp, 0, &RviaOptions::default()).unwrap();
        assert_eq!(t.actions, vec![1]);
        assert_eq!(t.average_cost, 1.0);
        assert_eq!(evaluate_policy(&mdp, &[0]).unwrap(), 3.0);
        assert_eq!(bellman_residual(&mdp, &t.actions, &[0.0], 1.0), 0.0);
        let oracle = brute_force_oracle(&mdp).unwrap();
        assert_eq!(oracle.policy, vec![1]);
        assert!(certify_unichain(&mdp, &[0]));
    }

    #[test]
    fn coin_chain_costs_half() {
        let mdp = two_state_coin();
        let t = rvia(&mdp, 0, &tight()).unwrap();
        assert!((t.average_cost - 0.5).abs() < 1e-9);
        assert!((evaluate_policy(&mdp, &t.actions).unwrap() - 0.5).abs() < 1e-12);
        // Identical actions: tie-break picks action 0 everywhere.
        assert_eq!(t.actions, vec![0, 0]);
    }

    #[test]
    fn perturbed_bias_increases_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mdp = random_unichain_mdp(&mut rng, 6, 3);
        let t = rvia(&mdp, 0, &RviaOptions::default()).unwrap();
        let r0 = bellman_residual(&mdp, &t.actions, &t.bias, t.average_cost);
        assert!(r0 <= 1e-3);
        let mut bias = t.bias.clone();
        bias[2] += 0.5;
        assert!(bellman_residual(&mdp, &t.actions, &bias, t.average_cost) > r0);
    }

    #[test]
    fn class_search_does_not_recurse() {
        // A 200k-state cycle on a 256 KiB stack.
        let n = 200_000;
        let rows = (0..n).map(|z| vec![((z + 1) % n, 1.0)]).collect();
        let mdp = FiniteMdp::new(n, 1, rows, vec![1.0; n]).unwrap();
        let ok = std::thread::Builder::new()
            .stack_size(256 * 1024)
            .spawn(move || certify_unichain(&mdp, &vec![0; n]))
            .unwrap()
            .join()
            .unwrap();
        assert!(ok);
    }

    #[test]
    fn disconnected_absorbing_states_are_not_unichain() {
        let mdp = FiniteMdp::new(2, 1, vec![vec![(0, 1.0)], vec![(1, 1.0)]], vec![1.0, 2.0]).unwrap();
        assert!(!certify_unichain(&mdp, &[0, 0]));
        assert_eq!(evaluate_policy_from(&mdp, &[0, 0], 1).unwrap(), 2.0);
        assert!(stationary_distribution(&mdp, &[0, 0]).is_err());
    }

    #[test]
    fn multichain_gain_is_absorption_weighted() {
        // 0 -> {1, 2} evenly; 1 and 2 absorbing with costs 2 and 4.
        let mdp = FiniteMdp::new(
            3,
            1,
            vec![vec![(1, 0.25), (2, 0.75)], vec![(1, 1.0)], vec![(2, 1.0)]],
            vec![0.0, 2.0, 4.0],
        )
        .unwrap();
        assert!((evaluate_policy(&mdp, &[0, 0, 0]).unwrap() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_matches_dense() {
        // A birth-death chain longer than the dense limit against its product-form law.
        let m = DENSE_LIMIT + 50;
        let (up, down) = (0.3, 0.4);
        let rows: Vec<Vec<(usize, f64)>> = (0..m)
            .map(|z| {
                let mut row = vec![];
                if z + 1 < m {
                    row.push((z + 1, up));
                }
                if z > 0 {
                    row.push((z - 1, down));
                }
                let stay = 1.0 - row.iter().map(|e| e.1).sum::<f64>();
                row.push((z, stay));
                row
            })
            .collect();
        let cost: Vec<f64> = (0..m).map(|z| z as f64).collect();
        let mdp = FiniteMdp::new(m, 1, rows, cost).unwrap();
        let pi = stationary_distribution(&mdp, &vec![0; m]).unwrap();
        let r: f64 = up / down;
        let norm: f64 = (0..m).map(|k| r.powi(k as i32)).sum();
        for k in 0..20 {
            assert!((pi[k] - r.powi(k as i32) / norm).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mdp = random_unichain_mdp(&mut rng, 16, 3);
        assert!(matches!(brute_force_oracle(&mdp), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn rvia_matches_oracle_on_random_mdps() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=6);
            let k = rng.random_range(1..=3);
            let mdp = random_unichain_mdp(&mut rng, n, k);
            let t = rvia(&mdp, 0, &tight()).unwrap();
            let o = brute_force_oracle(&mdp).unwrap();
            assert_eq!(o.skipped, 0);
            assert!((t.average_cost - o.average_cost).abs() < 1e-6, "seed {seed}");
            let eval = evaluate_policy(&mdp, &t.actions).unwrap();
            assert!((eval - o.average_cost).abs() < 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn gain_is_independent_of_reference_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mdp = random_unichain_mdp(&mut rng, 30, 3);
        let opts = RviaOptions::default();
        let base = rvia(&mdp, 0, &opts).unwrap();
        for r in [3, 7, 11, 29] {
            let t = rvia(&mdp, r, &opts).unwrap();
            assert!((t.average_cost - base.average_cost).abs() < 10.0 * opts.epsilon);
        }
        let eval = evaluate_policy(&mdp, &base.actions).unwrap();
        assert!((eval - base.average_cost).abs() < 10.0 * opts.epsilon);
    }

    #[test]
    fn non_convergence_is_reported() {
        // Period-2 chain: relative values oscillate forever.
        let mdp = FiniteMdp::new(2, 1, vec![vec![(1, 1.0)], vec![(0, 1.0)]], vec![0.0, 1.0]).unwrap();
        let err = rvia(&mdp, 0, &RviaOptions { epsilon: 1e-3, max_iters: 100 }).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 100, .. }));
    }
}
