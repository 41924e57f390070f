//! Formulaic cost bounds for access sequences.
//!
//! Every bound here is a closed form or a polynomial algorithm over the
//! sequence, sometimes parameterized by a weight function, a finger, or
//! a reference tree. All logarithms are base 2; bound values are reals
//! while raw costs stay integral. The min-over-certificate bounds
//! ([`static_optimality`], [`lazy_finger_opt`], [`fixed_finger_opt`],
//! [`k_lazy_finger_at`]) compute exact optima with an emitted witness
//! where one exists, and carry size guards where the search is
//! superquadratic.
//!
//! Reference implementations ([`working_set_naive`],
//! [`k_lazy_finger_bruteforce`]) are deliberately simple quadratic or
//! state-space algorithms kept public so harness code can cross-check
//! the fast paths.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::key::Key;
use crate::sequences::AccessSequence;
use crate::tree::{assemble, for_each_bst, weights_from_tree, SearchTree, WeightFunction};

/// Certificate achieving a reported bound value.
#[derive(Clone, Debug)]
pub enum Witness {
    Tree(SearchTree),
    Finger(usize),
    TreeAndFinger(SearchTree, usize),
    Weights(WeightFunction),
}

/// A named bound evaluation. When a witness is present, re-evaluating
/// the bound at the witness reproduces `value`.
#[derive(Clone, Debug)]
pub struct BoundValue {
    pub kind: &'static str,
    pub value: f64,
    pub witness: Option<Witness>,
}

fn frequencies(seq: &AccessSequence) -> Vec<usize> {
    let mut f = vec![0usize; seq.n() + 1];
    for &k in seq.keys() {
        f[k] += 1;
    }
    f
}

fn check_finger(seq: &AccessSequence, f: usize) -> Result<()> {
    if f == 0 || f > seq.n() {
        return Err(Error::KeyOutOfRange {
            key: f as i64,
            n: seq.n(),
        });
    }
    Ok(())
}

fn check_weights(seq: &AccessSequence, w: &WeightFunction) -> Result<()> {
    if w.n() != seq.n() {
        return Err(Error::invalid(format!(
            "weight function covers {} keys but the sequence universe is {}",
            w.n(),
            seq.n()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Closed forms.

/// `m * log2(n)`: what a static balanced tree pays.
pub fn balance_bound(seq: &AccessSequence) -> f64 {
    seq.m() as f64 * (seq.n() as f64).log2()
}

/// `sum_i m_i * log2(m / m_i)` over accessed keys.
pub fn entropy_bound(seq: &AccessSequence) -> f64 {
    let m = seq.m() as f64;
    frequencies(seq)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 * (m / c as f64).log2())
        .sum()
}

/// `sum_j log2(W / w(s_j))` for the given positive weights, `W` their total.
pub fn weighted_balance(seq: &AccessSequence, w: &WeightFunction) -> Result<f64> {
    check_weights(seq, w)?;
    let total = w.total();
    Ok(seq.keys().iter().map(|&s| (total / w.get(s)).log2()).sum())
}

/// The minimum of [`weighted_balance`] over all weight functions, which
/// the frequency-proportional weights achieve: the value equals
/// [`entropy_bound`] exactly. The witness is emitted only when every key
/// is accessed; otherwise the infimum requires zero weight on unaccessed
/// keys and is not attained by any valid weight function.
pub fn weighted_balance_opt(seq: &AccessSequence) -> BoundValue {
    let freq = frequencies(seq);
    let witness = freq[1..].iter().all(|&c| c > 0).then(|| {
        let w: Vec<f64> = freq[1..].iter().map(|&c| c as f64).collect();
        Witness::Weights(WeightFunction::new(w).expect("all counts positive"))
    });
    BoundValue {
        kind: "weighted_balance_opt",
        value: entropy_bound(seq),
        witness,
    }
}

/// `sum_j log2(|f - s_j| + 1)` for a fixed finger position `f`.
pub fn static_finger_at(seq: &AccessSequence, f: usize) -> Result<f64> {
    check_finger(seq, f)?;
    Ok(seq
        .keys()
        .iter()
        .map(|&s| (s.abs_diff(f) as f64 + 1.0).log2())
        .sum())
}

/// Minimum of [`static_finger_at`] over all fingers, by direct scan;
/// leftmost minimizer wins ties.
pub fn static_finger(seq: &AccessSequence) -> BoundValue {
    let mut best = (1usize, f64::INFINITY);
    for f in 1..=seq.n() {
        let v = static_finger_at(seq, f).expect("finger in range");
        if v < best.1 {
            best = (f, v);
        }
    }
    BoundValue {
        kind: "static_finger",
        value: best.1,
        witness: Some(Witness::Finger(best.0)),
    }
}

/// `sum_j log2(w[f:s_j] / min(w(f), w(s_j)))` with inclusive range sums.
pub fn weighted_static_finger_at(seq: &AccessSequence, w: &WeightFunction, f: usize) -> Result<f64> {
    check_weights(seq, w)?;
    check_finger(seq, f)?;
    Ok(seq
        .keys()
        .iter()
        .map(|&s| (w.range_sum(f, s) / w.get(f).min(w.get(s))).log2())
        .sum())
}

/// `sum_{j>=2} log2(|s_j - s_{j-1}| + 1)`.
pub fn dynamic_finger(seq: &AccessSequence) -> f64 {
    seq.keys()
        .windows(2)
        .map(|p| (p[0].abs_diff(p[1]) as f64 + 1.0).log2())
        .sum()
}

/// `sum_{j>=2} log2(w[s_{j-1}:s_j] / min(w(s_{j-1}), w(s_j)))`.
pub fn weighted_dynamic_finger(seq: &AccessSequence, w: &WeightFunction) -> Result<f64> {
    check_weights(seq, w)?;
    Ok(seq
        .keys()
        .windows(2)
        .map(|p| (w.range_sum(p[0], p[1]) / w.get(p[0]).min(w.get(p[1]))).log2())
        .sum())
}

// ---------------------------------------------------------------------------
// Working set.

struct Fenwick {
    t: Vec<i32>,
}

impl Fenwick {
    fn new(n: usize) -> Fenwick {
        Fenwick { t: vec![0; n + 1] }
    }

    fn add(&mut self, mut i: usize, d: i32) {
        while i < self.t.len() {
            self.t[i] += d;
            i += i & i.wrapping_neg();
        }
    }

    fn prefix(&self, mut i: usize) -> i32 {
        let mut s = 0;
        while i > 0 {
            s += self.t[i];
            i &= i - 1;
        }
        s
    }
}

/// Working-set window sizes: entry `j` counts the distinct keys accessed
/// since the previous access to `s_j` (window `(rho(j), j]`, the whole
/// prefix when `s_j` is new). Runs in `O(m log m)` by keeping one mark
/// per key at its latest position.
pub fn working_set_sizes(seq: &AccessSequence) -> Vec<usize> {
    let m = seq.m();
    let mut bit = Fenwick::new(m);
    let mut last = vec![0usize; seq.n() + 1];
    let mut sizes = Vec::with_capacity(m);
    for (j0, &s) in seq.keys().iter().enumerate() {
        let j = j0 + 1;
        let rho = last[s];
        if rho > 0 {
            bit.add(rho, -1);
        }
        bit.add(j, 1);
        last[s] = j;
        sizes.push((bit.prefix(j) - bit.prefix(rho)) as usize);
    }
    sizes
}

/// `sum_j log2 |w_S(j)|`.
pub fn working_set(seq: &AccessSequence) -> f64 {
    working_set_sizes(seq)
        .into_iter()
        .map(|z| (z as f64).log2())
        .sum()
}

/// Quadratic reference implementation of [`working_set`]: rescans the
/// window for every access.
pub fn working_set_naive(seq: &AccessSequence) -> f64 {
    let keys = seq.keys();
    let mut total = 0.0;
    for j in 0..keys.len() {
        let mut start = 0;
        for i in (0..j).rev() {
            if keys[i] == keys[j] {
                start = i + 1;
                break;
            }
        }
        let distinct: std::collections::HashSet<usize> = keys[start..=j].iter().copied().collect();
        total += (distinct.len() as f64).log2();
    }
    total
}

// ---------------------------------------------------------------------------
// Static optimality.

/// Largest universe the quadratic optimal-tree program accepts.
pub const STATIC_OPTIMALITY_MAX_N: usize = 10_000;

/// Exact `min_T sum_i m_i * d_T(i)` by the classical optimal-BST dynamic
/// program with the monotone-root speedup; emits the optimal tree.
pub fn static_optimality(seq: &AccessSequence) -> Result<BoundValue> {
    let n = seq.n();
    if n > STATIC_OPTIMALITY_MAX_N {
        return Err(Error::guard(format!(
            "optimal static tree needs a quadratic table; n={n} exceeds {STATIC_OPTIMALITY_MAX_N} \
             (the entropy bound approximates it within constant factors)"
        )));
    }
    let freq = frequencies(seq);
    let mut pre = vec![0u64; n + 1];
    for i in 1..=n {
        pre[i] = pre[i - 1] + freq[i] as u64;
    }
    // triangular tables over 1 <= i <= j <= n
    let idx = |i: usize, j: usize| {
        let a = i - 1;
        a * n - a * a.saturating_sub(1) / 2 + (j - i)
    };
    let cells = n * (n + 1) / 2;
    let mut e = vec![0u64; cells];
    let mut root = vec![0u32; cells];
    for i in 1..=n {
        e[idx(i, i)] = freq[i] as u64;
        root[idx(i, i)] = i as u32;
    }
    for len in 2..=n {
        for i in 1..=(n - len + 1) {
            let j = i + len - 1;
            let lo = root[idx(i, j - 1)] as usize;
            let hi = root[idx(i + 1, j)] as usize;
            let mut best = u64::MAX;
            let mut best_r = lo;
            for r in lo..=hi {
                let left = if r > i { e[idx(i, r - 1)] } else { 0 };
                let right = if r < j { e[idx(r + 1, j)] } else { 0 };
                if left + right < best {
                    best = left + right;
                    best_r = r;
                }
            }
            e[idx(i, j)] = best + (pre[j] - pre[i - 1]);
            root[idx(i, j)] = best_r as u32;
        }
    }
    let value = (e[idx(1, n)] - seq.m() as u64) as f64;
    let keys: Vec<Key> = (1..=n as i64).map(Key::int).collect();
    let witness = assemble(&keys, |lo, hi| root[idx(lo + 1, hi + 1)] as usize - 1);
    Ok(BoundValue {
        kind: "static_optimality",
        value,
        witness: Some(Witness::Tree(witness)),
    })
}

/// `sum_j d_T(s_j)`: the cost of the fixed tree `T` on the sequence.
pub fn static_cost(seq: &AccessSequence, tree: &SearchTree) -> Result<f64> {
    let mut total = 0usize;
    for &s in seq.keys() {
        total += tree.depth(Key::from(s))?;
    }
    Ok(total as f64)
}

// ---------------------------------------------------------------------------
// Finger bounds over a reference tree.

/// `sum_j d_T(f, s_j)`: one finger parked at `f` pays tree distance per
/// access.
pub fn fixed_finger_at(seq: &AccessSequence, tree: &SearchTree, f: usize) -> Result<f64> {
    let fk = Key::from(f);
    let mut total = 0usize;
    for &s in seq.keys() {
        total += tree.distance(fk, Key::from(s))?;
    }
    Ok(total as f64)
}

/// `sum_{j>=2} d_T(s_{j-1}, s_j)`: one finger that only ever moves to
/// the next access. Auxiliary non-integer keys in `tree` are fine; only
/// the accessed keys must be present.
pub fn lazy_finger_at(seq: &AccessSequence, tree: &SearchTree) -> Result<f64> {
    let mut total = 0usize;
    for p in seq.keys().windows(2) {
        total += tree.distance(Key::from(p[0]), Key::from(p[1]))?;
    }
    Ok(total as f64)
}

/// `sum_j log2(min(|f - s_j| + 1, d_T(s_j) + 1, |w_S(j)|))`. The depth
/// is offset by one so the root does not take `log 0`.
pub fn unified_at(seq: &AccessSequence, tree: &SearchTree, f: usize) -> Result<f64> {
    check_finger(seq, f)?;
    let sizes = working_set_sizes(seq);
    let mut total = 0.0;
    for (&s, &z) in seq.keys().iter().zip(&sizes) {
        let a = s.abs_diff(f) + 1;
        let b = tree.depth(Key::from(s))? + 1;
        total += (a.min(b).min(z) as f64).log2();
    }
    Ok(total)
}

/// Largest universe [`lazy_finger_opt`] enumerates trees for.
pub const LAZY_FINGER_OPT_MAX_N: usize = 12;

/// Exact `min_T` of [`lazy_finger_at`] over every BST on `[n]`, with the
/// minimizing tree as witness. Exponential in `n` (Catalan enumeration).
pub fn lazy_finger_opt(seq: &AccessSequence) -> Result<BoundValue> {
    let n = seq.n();
    if n > LAZY_FINGER_OPT_MAX_N {
        return Err(Error::guard(format!(
            "exact lazy-finger optimum enumerates all trees; n={n} exceeds {LAZY_FINGER_OPT_MAX_N} \
             (build a reference tree and evaluate lazy_finger_at instead)"
        )));
    }
    let mut best = f64::INFINITY;
    let mut best_tree = None;
    for_each_bst(n, |t| {
        let v = lazy_finger_at(seq, t).expect("tree covers the universe");
        if v < best {
            best = v;
            best_tree = Some(t.clone());
        }
    })?;
    Ok(BoundValue {
        kind: "lazy_finger",
        value: best,
        witness: best_tree.map(Witness::Tree),
    })
}

/// Largest universe [`fixed_finger_opt`] searches exhaustively.
pub const FIXED_FINGER_OPT_MAX_N: usize = 10;

/// Exact `min_{T,f}` of [`fixed_finger_at`]; witness carries both the
/// tree and the finger. Above the guard, derive an upper bound through
/// [`ff_witness_to_weights`] instead.
pub fn fixed_finger_opt(seq: &AccessSequence) -> Result<BoundValue> {
    let n = seq.n();
    if n > FIXED_FINGER_OPT_MAX_N {
        return Err(Error::guard(format!(
            "exact fixed-finger optimum enumerates all trees and fingers; n={n} exceeds \
             {FIXED_FINGER_OPT_MAX_N}"
        )));
    }
    let mut best = f64::INFINITY;
    let mut best_witness = None;
    for_each_bst(n, |t| {
        for f in 1..=n {
            let v = fixed_finger_at(seq, t, f).expect("tree covers the universe");
            if v < best {
                best = v;
                best_witness = Some((t.clone(), f));
            }
        }
    })?;
    Ok(BoundValue {
        kind: "fixed_finger",
        value: best,
        witness: best_witness.map(|(t, f)| Witness::TreeAndFinger(t, f)),
    })
}

// ---------------------------------------------------------------------------
// Optimal offline k fingers: minimum-cost flow.

/// Largest sequence length the k-finger flow accepts (the request graph
/// is quadratic in m).
pub const K_LAZY_MAX_M: usize = 2048;

struct McfArc {
    to: u32,
    next: i32,
    cap: i32,
    cost: i64,
}

struct Mcf {
    head: Vec<i32>,
    arcs: Vec<McfArc>,
}

impl Mcf {
    fn new(nodes: usize) -> Mcf {
        Mcf {
            head: vec![-1; nodes],
            arcs: Vec::new(),
        }
    }

    fn arc(&mut self, u: usize, v: usize, cap: i32, cost: i64) {
        for (a, b, c, w) in [(u, v, cap, cost), (v, u, 0, -cost)] {
            let id = self.arcs.len() as i32;
            self.arcs.push(McfArc {
                to: b as u32,
                next: self.head[a],
                cap: c,
                cost: w,
            });
            self.head[a] = id;
        }
    }

    /// Min-cost flow of exactly `target` units from `s` to `t` by
    /// successive shortest paths. Arc costs may be negative but the arcs
    /// must form a DAG in increasing node id, which seeds the potentials
    /// in one topological pass.
    fn solve(&mut self, s: usize, t: usize, target: i64) -> i64 {
        let v = self.head.len();
        let inf = i64::MAX / 4;
        let mut pot = vec![inf; v];
        pot[s] = 0;
        for u in 0..v {
            if pot[u] == inf {
                continue;
            }
            let mut e = self.head[u];
            while e >= 0 {
                let a = &self.arcs[e as usize];
                if a.cap > 0 {
                    pot[a.to as usize] = pot[a.to as usize].min(pot[u] + a.cost);
                }
                e = a.next;
            }
        }
        let mut flow = 0i64;
        let mut total = 0i64;
        let mut dist = vec![inf; v];
        let mut prev_arc = vec![-1i32; v];
        while flow < target {
            dist.fill(inf);
            prev_arc.fill(-1);
            dist[s] = 0;
            let mut heap = std::collections::BinaryHeap::new();
            heap.push(std::cmp::Reverse((0i64, s)));
            while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                let mut e = self.head[u];
                while e >= 0 {
                    let a = &self.arcs[e as usize];
                    let w = a.to as usize;
                    if a.cap > 0 && pot[w] < inf {
                        let nd = d + a.cost + pot[u] - pot[w];
                        if nd < dist[w] {
                            dist[w] = nd;
                            prev_arc[w] = e;
                            heap.push(std::cmp::Reverse((nd, w)));
                        }
                    }
                    e = a.next;
                }
            }
            assert!(dist[t] < inf, "flow target is infeasible");
            for p in pot.iter_mut().zip(&dist) {
                if *p.1 < inf {
                    *p.0 += p.1.min(&dist[t]);
                }
            }
            let mut push = target - flow;
            let mut u = t;
            while u != s {
                let e = prev_arc[u] as usize;
                push = push.min(self.arcs[e].cap as i64);
                u = self.arcs[e ^ 1].to as usize;
            }
            let mut u = t;
            while u != s {
                let e = prev_arc[u] as usize;
                self.arcs[e].cap -= push as i32;
                self.arcs[e ^ 1].cap += push as i32;
                total += push * self.arcs[e].cost;
                u = self.arcs[e ^ 1].to as usize;
            }
            flow += push;
        }
        total
    }
}

/// Exact optimal offline cost of serving `seq` in `tree` with `k`
/// fingers: every access costs 1 plus the tree distance the serving
/// finger moves, and initial finger placement is chosen optimally (a
/// finger's first service is free of movement). Solved as minimum-cost
/// flow over the request chain graph.
pub fn k_lazy_finger_at(seq: &AccessSequence, tree: &SearchTree, k: usize) -> Result<f64> {
    let n = seq.n();
    let m = seq.m();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("finger count {k} not in 1..={n}")));
    }
    if m > K_LAZY_MAX_M {
        return Err(Error::guard(format!(
            "k-finger flow graph is quadratic in the sequence length; m={m} exceeds {K_LAZY_MAX_M}"
        )));
    }
    let reqs: Vec<Key> = seq.keys().iter().map(|&s| Key::from(s)).collect();
    let mut pair_dist = Vec::with_capacity(m * (m - 1) / 2);
    let mut maxd = 0usize;
    for i in 0..m {
        for j in i + 1..m {
            let d = tree.distance(reqs[i], reqs[j])?;
            maxd = maxd.max(d);
            pair_dist.push(d as i64);
        }
    }
    let big = (maxd as i64 + 1) * (m as i64 + 1) + 1;
    // nodes: source, in/out pair per request in time order, sink
    let (source, sink) = (0usize, 2 * m + 1);
    let r_in = |i: usize| 1 + 2 * i;
    let r_out = |i: usize| 2 + 2 * i;
    let mut g = Mcf::new(2 * m + 2);
    g.arc(source, sink, k as i32, 0);
    let mut pd = pair_dist.into_iter();
    for i in 0..m {
        g.arc(source, r_in(i), 1, 0);
        g.arc(r_in(i), r_out(i), 1, -big);
        g.arc(r_out(i), sink, 1, 0);
        for j in i + 1..m {
            g.arc(r_out(i), r_in(j), 1, pd.next().unwrap());
        }
    }
    let cost = g.solve(source, sink, k as i64);
    Ok((cost + m as i64 * big + m as i64) as f64)
}

/// State-space reference implementation of [`k_lazy_finger_at`]: dynamic
/// program over the multiset of idle finger positions (0 marks a finger
/// not yet placed, whose first move is free). Exponential; guarded to
/// desk sizes.
pub fn k_lazy_finger_bruteforce(seq: &AccessSequence, tree: &SearchTree, k: usize) -> Result<f64> {
    let n = seq.n();
    let m = seq.m();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("finger count {k} not in 1..={n}")));
    }
    if n > 10 || m > 12 || k > 4 {
        return Err(Error::guard(
            "finger-configuration search is exponential; keep n<=10, m<=12, k<=4",
        ));
    }
    let keys = seq.keys();
    let dist = |a: usize, b: usize| -> Result<u64> {
        if a == 0 {
            Ok(0)
        } else {
            Ok(tree.distance(Key::from(a), Key::from(b))? as u64)
        }
    };
    // state: sorted positions of the k-1 fingers not at the last access
    let mut states: HashMap<Vec<usize>, u64> = HashMap::new();
    states.insert(vec![0; k - 1], 1);
    for t in 1..m {
        let (prev, s) = (keys[t - 1], keys[t]);
        let mut next: HashMap<Vec<usize>, u64> = HashMap::new();
        let mut relax = |st: Vec<usize>, c: u64| {
            let e = next.entry(st).or_insert(u64::MAX);
            *e = (*e).min(c);
        };
        for (others, &c) in &states {
            relax(others.clone(), c + 1 + dist(prev, s)?);
            for (i, &p) in others.iter().enumerate() {
                let mut o2 = others.clone();
                o2[i] = prev;
                o2.sort_unstable();
                relax(o2, c + 1 + dist(p, s)?);
            }
        }
        states = next;
    }
    Ok(*states.values().min().expect("nonempty sequence") as f64)
}

// ---------------------------------------------------------------------------
// Monotone k-finger strategy.

/// Online strategy for k-monotone sequences: patience-partition the
/// sequence into at most `k` non-decreasing runs (or non-increasing when
/// the other orientation fits), give each run its own finger, and pay
/// 1 plus the tree distance per access. The result upper-bounds
/// [`k_lazy_finger_at`]. Since a monotone walk over any tree costs at
/// most twice the tree size, the total is at most `2nk + m`, which is
/// asserted.
pub fn kfinger_monotone_strategy(seq: &AccessSequence, tree: &SearchTree, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("need at least one finger"));
    }
    let keys = seq.keys();
    let lis = crate::sequences::lis_strict(keys);
    let flipped: Vec<usize> = keys.iter().map(|&x| seq.n() + 1 - x).collect();
    let lds = crate::sequences::lis_strict(&flipped);
    let ascending = if lds <= k {
        true
    } else if lis <= k {
        false
    } else {
        return Err(Error::invalid(format!(
            "sequence is not {k}-monotone: longest increasing run cover needs {lds}, \
             decreasing needs {lis}"
        )));
    };
    let mut tops: Vec<usize> = Vec::new();
    let mut cost = 0u64;
    for &s in keys {
        let mut pick: Option<usize> = None;
        for (i, &t) in tops.iter().enumerate() {
            let feasible = if ascending { t <= s } else { t >= s };
            let better = match pick {
                None => true,
                Some(p) => {
                    if ascending {
                        t > tops[p]
                    } else {
                        t < tops[p]
                    }
                }
            };
            if feasible && better {
                pick = Some(i);
            }
        }
        match pick {
            Some(i) => {
                cost += 1 + tree.distance(Key::from(tops[i]), Key::from(s))? as u64;
                tops[i] = s;
            }
            None => {
                tops.push(s);
                cost += 1;
            }
        }
    }
    assert!(tops.len() <= k, "patience partition exceeded the finger count");
    let walk_bound = 2 * seq.n() as u64 * k as u64 + seq.m() as u64;
    assert!(cost <= walk_bound, "monotone fingers exceeded the walk bound");
    Ok(cost as f64)
}

// ---------------------------------------------------------------------------
// Equivalence transforms between bound certificates.

/// Depth-exponential weights `w(i) = 4^(-d_T(i))` from a static tree.
pub fn so_witness_to_weights(tree: &SearchTree) -> Result<WeightFunction> {
    weights_from_tree(tree)
}

/// Randomized weight-sensitive tree realizing a weight function.
pub fn weights_to_so_witness(w: &WeightFunction, seed: u64) -> SearchTree {
    SearchTree::treap_from_weights(w, seed)
}

/// Distance-exponential weights `w(i) = 4^(-d_T(f, i))` from a tree with
/// a fixed finger.
pub fn ff_witness_to_weights(tree: &SearchTree, f: usize) -> Result<WeightFunction> {
    let n = tree.real_universe()?;
    let fk = Key::from(f);
    let mut w = Vec::with_capacity(n);
    for i in 1..=n {
        let d = tree.distance(fk, Key::from(i))?;
        if d > 500 {
            return Err(Error::guard(format!(
                "distance {d} would underflow the 4^-d weight"
            )));
        }
        w.push(4f64.powi(-(d as i32)));
    }
    WeightFunction::new(w)
}
