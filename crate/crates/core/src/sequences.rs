//! Access sequences, permutations, and their structure.
//!
//! An [`AccessSequence`] is a nonempty list of keys from `1..=n`. A
//! [`Permutation`] is an access sequence hitting every key exactly once.
//! Sequences compose: a [`CompositionTemplate`] holds a template sequence
//! over part indices plus one part sequence per index, and [`compose`]
//! interleaves the parts into disjoint shifted key ranges following the
//! template. [`decompose`] is the inverse along a given interval
//! partition of the key space.
//!
//! The structural analyzers are the monotone parameter (length of the
//! shortest monotone pattern the sequence avoids), brute-force pattern
//! containment, and the substitution decomposition of a permutation into
//! nested blocks, from which the decomposability parameter (maximal
//! prime skeleton arity, floor 2) falls out.
//!
//! Generators produce the structured families used throughout: the
//! sequential permutation, preorder traversals, tilted grids (column
//! reads of a sheared grid), random bounded-arity decomposable
//! permutations, and random phase sequences (short repeating blocks of
//! 2k keys per phase).

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding;
use crate::tree::SearchTree;

/// A nonempty sequence of accesses to keys in `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessSequence {
    n: usize,
    keys: Vec<usize>,
}

impl AccessSequence {
    /// Sequence over universe `1..=n`. Rejects empty sequences and
    /// out-of-range keys.
    pub fn new(n: usize, keys: Vec<usize>) -> Result<AccessSequence> {
        if keys.is_empty() {
            return Err(Error::EmptySequence);
        }
        if n == 0 {
            return Err(Error::invalid("universe size must be positive"));
        }
        for &k in &keys {
            if k < 1 || k > n {
                return Err(Error::KeyOutOfRange { key: k as i64, n });
            }
        }
        Ok(AccessSequence { n, keys })
    }

    /// Universe size `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of accesses `m`.
    pub fn m(&self) -> usize {
        self.keys.len()
    }

    pub fn keys(&self) -> &[usize] {
        &self.keys
    }

    /// Number of distinct keys actually accessed.
    pub fn distinct(&self) -> usize {
        let mut seen = vec![false; self.n + 1];
        let mut count = 0;
        for &k in &self.keys {
            if !seen[k] {
                seen[k] = true;
                count += 1;
            }
        }
        count
    }

    /// Serialize as `n m` on the first line and the keys on the second.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.keys.len());
        let mut first = true;
        for &k in &self.keys {
            if !first {
                out.push(' ');
            }
            let _ = write!(out, "{k}");
            first = false;
        }
        out.push('\n');
        out
    }

    /// Parse the [`AccessSequence::to_text`] format. Key tokens may be
    /// split across lines; out-of-range keys are rejected.
    pub fn parse(text: &str) -> Result<AccessSequence> {
        let mut tokens = text.split_whitespace();
        let mut next_num = |what: &str| -> Result<usize> {
            let tok = tokens.next().ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("missing {what}"),
            })?;
            tok.parse().map_err(|_| Error::Parse {
                line: 1,
                msg: format!("bad {what}: {tok:?}"),
            })
        };
        let n = next_num("universe size")?;
        let m = next_num("length")?;
        let mut keys = Vec::with_capacity(m);
        for _ in 0..m {
            keys.push(next_num("key")?);
        }
        if tokens.next().is_some() {
            return Err(Error::Parse {
                line: 1,
                msg: "trailing tokens".to_string(),
            });
        }
        AccessSequence::new(n, keys)
    }
}

/// An access sequence that hits each key of `1..=n` exactly once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    seq: AccessSequence,
}

impl Permutation {
    pub fn new(keys: Vec<usize>) -> Result<Permutation> {
        let n = keys.len();
        let seq = AccessSequence::new(n, keys)?;
        let mut seen = vec![false; n + 1];
        for &k in seq.keys() {
            if seen[k] {
                return Err(Error::NotPermutation {
                    n,
                    reason: format!("key {k} repeats"),
                });
            }
            seen[k] = true;
        }
        Ok(Permutation { seq })
    }

    pub fn n(&self) -> usize {
        self.seq.n()
    }

    pub fn keys(&self) -> &[usize] {
        self.seq.keys()
    }

    pub fn as_sequence(&self) -> &AccessSequence {
        &self.seq
    }

    pub fn into_sequence(self) -> AccessSequence {
        self.seq
    }

    /// `inverse()[v]` is the 0-based position of value `v`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.n() + 1];
        for (pos, &v) in self.keys().iter().enumerate() {
            inv[v] = pos;
        }
        inv
    }
}

/// A template over part indices `1..=parts.len()` plus the parts
/// themselves; occurrence counts in the template must match part lengths.
#[derive(Clone, Debug)]
pub struct CompositionTemplate {
    template: AccessSequence,
    parts: Vec<AccessSequence>,
}

impl CompositionTemplate {
    pub fn new(template: AccessSequence, parts: Vec<AccessSequence>) -> Result<CompositionTemplate> {
        if template.n() != parts.len() {
            return Err(Error::invalid(format!(
                "template universe {} does not match part count {}",
                template.n(),
                parts.len()
            )));
        }
        let mut counts = vec![0usize; parts.len() + 1];
        for &t in template.keys() {
            counts[t] += 1;
        }
        for (i, part) in parts.iter().enumerate() {
            if counts[i + 1] != part.m() {
                return Err(Error::invalid(format!(
                    "part {} has length {} but occurs {} times in the template",
                    i + 1,
                    part.m(),
                    counts[i + 1]
                )));
            }
        }
        Ok(CompositionTemplate { template, parts })
    }

    pub fn template(&self) -> &AccessSequence {
        &self.template
    }

    pub fn parts(&self) -> &[AccessSequence] {
        &self.parts
    }
}

/// Interleave the parts along the template: the `t`-th access reads the
/// next key of part `template[t]`, shifted so part `i` occupies the key
/// range just above parts `1..i`.
pub fn compose(ct: &CompositionTemplate) -> AccessSequence {
    let offsets: Vec<usize> = ct
        .parts
        .iter()
        .scan(0usize, |acc, p| {
            let base = *acc;
            *acc += p.n();
            Some(base)
        })
        .collect();
    let n: usize = ct.parts.iter().map(|p| p.n()).sum();
    let mut cursor = vec![0usize; ct.parts.len()];
    let mut keys = Vec::with_capacity(ct.template.m());
    for &t in ct.template.keys() {
        let part = &ct.parts[t - 1];
        keys.push(part.keys()[cursor[t - 1]] + offsets[t - 1]);
        cursor[t - 1] += 1;
    }
    AccessSequence::new(n, keys).expect("composed keys in range")
}

/// Split `seq` along an interval partition of `1..=n`: parts are the
/// restrictions to each interval (keys re-based to 1), the template
/// records which interval each access hit. Inverse of [`compose`].
/// Every interval must receive at least one access.
pub fn decompose(
    seq: &AccessSequence,
    partition: &[(usize, usize)],
) -> Result<CompositionTemplate> {
    if partition.is_empty() {
        return Err(Error::invalid("empty partition"));
    }
    let mut expect = 1usize;
    for &(a, b) in partition {
        if a != expect || b < a {
            return Err(Error::invalid(format!(
                "partition interval [{a}, {b}] does not continue at {expect}"
            )));
        }
        expect = b + 1;
    }
    if expect != seq.n() + 1 {
        return Err(Error::invalid(format!(
            "partition covers 1..={} but the universe is 1..={}",
            expect - 1,
            seq.n()
        )));
    }
    // block_of[k] = 1-based interval index containing key k.
    let mut block_of = vec![0usize; seq.n() + 1];
    for (i, &(a, b)) in partition.iter().enumerate() {
        for k in a..=b {
            block_of[k] = i + 1;
        }
    }
    let mut template = Vec::with_capacity(seq.m());
    let mut part_keys: Vec<Vec<usize>> = vec![Vec::new(); partition.len()];
    for &k in seq.keys() {
        let b = block_of[k];
        template.push(b);
        part_keys[b - 1].push(k - (partition[b - 1].0 - 1));
    }
    let mut parts = Vec::with_capacity(partition.len());
    for (i, keys) in part_keys.into_iter().enumerate() {
        if keys.is_empty() {
            return Err(Error::invalid(format!(
                "interval [{}, {}] receives no accesses",
                partition[i].0, partition[i].1
            )));
        }
        let width = partition[i].1 - partition[i].0 + 1;
        parts.push(AccessSequence::new(width, keys)?);
    }
    CompositionTemplate::new(AccessSequence::new(partition.len(), template)?, parts)
}

// ---------------------------------------------------------------------------
// Generators.

/// The sequential permutation `(1, 2, ..., n)`.
pub fn gen_sequential(n: usize) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    Permutation::new((1..=n).collect())
}

/// Preorder traversal of a tree over exactly the keys `1..=n`.
pub fn gen_preorder(tree: &SearchTree) -> Result<Permutation> {
    let n = tree.real_universe()?;
    if tree.len() != n {
        return Err(Error::invalid(
            "preorder source tree must not contain auxiliary keys",
        ));
    }
    let keys = tree
        .preorder_keys()
        .into_iter()
        .map(|k| k.as_integer().expect("integer key") as usize)
        .collect();
    Permutation::new(keys)
}

/// The tilted `k` by `l` grid order on `n = k·l` keys: column reads of
/// the `k` blocks `B_i = [l(i-1)+1, l·i]`, i.e.
/// `1, l+1, ..., l(k-1)+1, 2, l+2, ...`.
pub fn gen_tilted_grid(k: usize, l: usize) -> Result<Permutation> {
    if k == 0 || l == 0 {
        return Err(Error::invalid("grid dimensions must be positive"));
    }
    let n = k
        .checked_mul(l)
        .filter(|&n| i64::try_from(n).is_ok())
        .ok_or_else(|| Error::guard("grid size overflows"))?;
    let mut keys = Vec::with_capacity(n);
    for j in 1..=l {
        for i in 0..k {
            keys.push(l * i + j);
        }
    }
    Permutation::new(keys)
}

/// Random phase sequence: `y` phases, each drawing `2k` distinct keys
/// from `1..=n` and repeating them (in sorted order) `x / 2k` times, for
/// a total length of `x·y`. Deterministic in `seed`.
pub fn gen_phase_sequence(n: usize, k: usize, x: usize, y: usize, seed: u64) -> Result<AccessSequence> {
    if k == 0 || y == 0 {
        return Err(Error::invalid("k and y must be positive"));
    }
    if 2 * k > n {
        return Err(Error::invalid(format!("2k = {} exceeds n = {n}", 2 * k)));
    }
    if x == 0 || x % (2 * k) != 0 {
        return Err(Error::invalid(format!(
            "phase length {x} is not a positive multiple of 2k = {}",
            2 * k
        )));
    }
    let mut rng = seeding::rng(seed);
    let mut keys = Vec::with_capacity(x * y);
    for _ in 0..y {
        let mut drawn = Vec::with_capacity(2 * k);
        while drawn.len() < 2 * k {
            let c = rng.gen_range(1..=n);
            if !drawn.contains(&c) {
                drawn.push(c);
            }
        }
        drawn.sort_unstable();
        for _ in 0..x / (2 * k) {
            keys.extend_from_slice(&drawn);
        }
    }
    AccessSequence::new(n, keys)
}

/// Random permutation assembled by recursive inflation with all skeleton
/// arities between 2 and `k`; the result is `k`-decomposable. `depth` 0
/// gives the singleton, and the length is at most `k^depth`.
pub fn gen_decomposable(k: usize, depth: u32, seed: u64) -> Result<Permutation> {
    if k < 2 {
        return Err(Error::invalid("arity bound must be at least 2"));
    }
    if (k as f64).powi(depth as i32) > 1e6 {
        return Err(Error::guard(format!("k^depth too large (k={k}, depth={depth})")));
    }
    let mut rng = seeding::rng(seed);
    fn rec(k: usize, depth: u32, rng: &mut impl Rng) -> Vec<usize> {
        if depth == 0 {
            return vec![1];
        }
        let arity = rng.gen_range(2..=k);
        let mut skeleton: Vec<usize> = (1..=arity).collect();
        skeleton.shuffle(rng);
        let children: Vec<Vec<usize>> = (0..arity).map(|_| rec(k, depth - 1, rng)).collect();
        inflate(&skeleton, &children)
    }
    Permutation::new(rec(k, depth, &mut rng))
}

/// Substitute `children[i]` (in position order) into the skeleton
/// pattern: child `i` occupies the value range determined by skeleton
/// value `skeleton[i]`.
fn inflate(skeleton: &[usize], children: &[Vec<usize>]) -> Vec<usize> {
    // base value offset for the child at skeleton value v: total size of
    // children whose skeleton value is smaller.
    let arity = skeleton.len();
    let mut size_by_value = vec![0usize; arity + 1];
    for (i, child) in children.iter().enumerate() {
        size_by_value[skeleton[i]] = child.len();
    }
    let mut base_by_value = vec![0usize; arity + 1];
    for v in 1..=arity {
        base_by_value[v] = base_by_value[v - 1] + size_by_value[v - 1];
    }
    let mut out = Vec::with_capacity(size_by_value.iter().sum());
    for (i, child) in children.iter().enumerate() {
        let base = base_by_value[skeleton[i]];
        out.extend(child.iter().map(|&v| v + base));
    }
    out
}

// ---------------------------------------------------------------------------
// Pattern containment and monotone structure.

/// Brute-force pattern containment: true iff some subsequence of `seq`
/// is order-isomorphic to `pattern`. Backtracking search, exponential in
/// the worst case, hence the guard `|pattern| <= 6`.
pub fn contains_pattern(seq: &AccessSequence, pattern: &Permutation) -> Result<bool> {
    if pattern.n() > 6 {
        return Err(Error::guard(format!(
            "pattern length {} exceeds the brute-force limit 6",
            pattern.n()
        )));
    }
    Ok(contains_pattern_unguarded(seq.keys(), pattern.keys()))
}

pub(crate) fn contains_pattern_unguarded(seq: &[usize], pattern: &[usize]) -> bool {
    fn rec(seq: &[usize], pattern: &[usize], start: usize, chosen: &mut Vec<usize>) -> bool {
        if chosen.len() == pattern.len() {
            return true;
        }
        let t = chosen.len();
        for i in start..seq.len() {
            if seq.len() - i < pattern.len() - t {
                return false;
            }
            let v = seq[i];
            let ok = chosen.iter().enumerate().all(|(s, &u)| {
                if pattern[s] < pattern[t] {
                    u < v
                } else {
                    u > v
                }
            });
            if ok {
                chosen.push(v);
                if rec(seq, pattern, i + 1, chosen) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    if pattern.len() > seq.len() {
        return false;
    }
    rec(seq, pattern, 0, &mut Vec::with_capacity(pattern.len()))
}

/// Length of a longest strictly increasing subsequence (patience).
pub(crate) fn lis_strict(keys: &[usize]) -> usize {
    let mut tails: Vec<usize> = Vec::new();
    for &x in keys {
        let idx = tails.partition_point(|&t| t < x);
        if idx == tails.len() {
            tails.push(x);
        } else {
            tails[idx] = x;
        }
    }
    tails.len()
}

/// Smallest `m' >= 2` such that the sequence has no strictly increasing
/// or no strictly decreasing subsequence of length `m'`; equals
/// `min(LIS, LDS) + 1`.
pub fn monotone_parameter(seq: &AccessSequence) -> usize {
    let lis = lis_strict(seq.keys());
    let flipped: Vec<usize> = seq.keys().iter().map(|&x| seq.n() + 1 - x).collect();
    let lds = lis_strict(&flipped);
    lis.min(lds) + 1
}

// ---------------------------------------------------------------------------
// Substitution decomposition.

/// Kind of a node in the substitution decomposition of a permutation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecompositionKind {
    /// Single value.
    Leaf,
    /// Children in increasing value order (finest splitting, so children
    /// are never themselves sums).
    Sum,
    /// Children in decreasing value order.
    Skew,
    /// Children substituted into a simple skeleton pattern.
    Prime { skeleton: Vec<usize> },
}

/// Node of the canonical substitution decomposition; children are in
/// position order, value ranges are inclusive.
#[derive(Clone, Debug)]
pub struct DecompositionNode {
    pub kind: DecompositionKind,
    pub children: Vec<DecompositionNode>,
    pub value_lo: usize,
    pub value_hi: usize,
}

impl DecompositionNode {
    /// Largest arity over prime nodes in this subtree (0 if none).
    pub fn max_prime_arity(&self) -> usize {
        let own = match self.kind {
            DecompositionKind::Prime { .. } => self.children.len(),
            _ => 0,
        };
        self.children
            .iter()
            .map(|c| c.max_prime_arity())
            .fold(own, usize::max)
    }
}

/// Canonical substitution decomposition of a permutation: maximal sum or
/// skew splittings where possible, otherwise the partition into maximal
/// proper blocks under a simple skeleton.
pub fn decomposition_tree(perm: &Permutation) -> DecompositionNode {
    fn rec(vals: &[usize]) -> DecompositionNode {
        let lo = *vals.iter().min().unwrap();
        let hi = *vals.iter().max().unwrap();
        debug_assert_eq!(hi - lo + 1, vals.len(), "block values must be contiguous");
        if vals.len() == 1 {
            return DecompositionNode {
                kind: DecompositionKind::Leaf,
                children: Vec::new(),
                value_lo: lo,
                value_hi: hi,
            };
        }
        // Sum: cut wherever the prefix is exactly the bottom value range.
        let sum_cuts = |vals: &[usize]| {
            let mut cuts = Vec::new();
            let mut mx = 0;
            for (t, &v) in vals.iter().enumerate() {
                mx = mx.max(v);
                if mx - lo == t {
                    cuts.push(t + 1);
                }
            }
            cuts
        };
        // Skew: cut wherever the prefix is exactly the top value range.
        let skew_cuts = |vals: &[usize]| {
            let mut cuts = Vec::new();
            let mut mn = usize::MAX;
            for (t, &v) in vals.iter().enumerate() {
                mn = mn.min(v);
                if hi - mn == t {
                    cuts.push(t + 1);
                }
            }
            cuts
        };
        for (kind, cuts) in [
            (DecompositionKind::Sum, sum_cuts(vals)),
            (DecompositionKind::Skew, skew_cuts(vals)),
        ] {
            if cuts.len() >= 2 {
                let mut children = Vec::with_capacity(cuts.len());
                let mut start = 0;
                for &end in &cuts {
                    children.push(rec(&vals[start..end]));
                    start = end;
                }
                return DecompositionNode {
                    kind,
                    children,
                    value_lo: lo,
                    value_hi: hi,
                };
            }
        }
        // Prime: partition into maximal proper blocks (value-contiguous
        // position intervals); neither sum nor skew splits exist, so
        // these blocks are disjoint and the skeleton is simple.
        let mut children = Vec::new();
        let mut i = 0;
        while i < vals.len() {
            let mut best = i;
            let (mut bmin, mut bmax) = (vals[i], vals[i]);
            for j in i + 1..vals.len() {
                bmin = bmin.min(vals[j]);
                bmax = bmax.max(vals[j]);
                if bmax - bmin == j - i && !(i == 0 && j == vals.len() - 1) {
                    best = j;
                }
            }
            children.push(rec(&vals[i..=best]));
            i = best + 1;
        }
        let skeleton = rank_pattern(&children.iter().map(|c| c.value_lo).collect::<Vec<_>>());
        debug_assert!(
            skeleton.len() >= 4 && is_simple_pattern(&skeleton),
            "prime skeleton must be simple"
        );
        DecompositionNode {
            kind: DecompositionKind::Prime { skeleton },
            children,
            value_lo: lo,
            value_hi: hi,
        }
    }
    rec(perm.keys())
}

/// Rank-normalize distinct values to the pattern `1..=len`.
pub(crate) fn rank_pattern(vals: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by_key(|&i| vals[i]);
    let mut out = vec![0; vals.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank + 1;
    }
    out
}

/// True iff the pattern has no proper nontrivial interval (a position
/// interval of length in `2..len` whose values are contiguous).
pub(crate) fn is_simple_pattern(p: &[usize]) -> bool {
    let n = p.len();
    for i in 0..n {
        let (mut mn, mut mx) = (p[i], p[i]);
        for j in i + 1..n {
            mn = mn.min(p[j]);
            mx = mx.max(p[j]);
            if (i, j) != (0, n - 1) && mx - mn == j - i {
                return false;
            }
        }
    }
    true
}

/// Smallest `d >= 2` such that the permutation is `d`-decomposable:
/// the maximal prime skeleton arity of the substitution decomposition,
/// with monotone nodes counting as 2 and a floor of 2.
pub fn decomposability_parameter(perm: &Permutation) -> usize {
    decomposition_tree(perm).max_prime_arity().max(2)
}
