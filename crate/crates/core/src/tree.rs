//! Binary search trees over rational keys.
//!
//! A [`SearchTree`] is an arena of nodes with parent/child links, a single
//! root, and strictly increasing in-order key sequence. The real keys are
//! the integers `1..=n`; constructions may add auxiliary rational keys
//! between integers or outside `[1, n]` to control shape. The only
//! restructuring primitive is the single rotation, so every algorithm in
//! this crate bottoms out in [`SearchTree::rotate_id`].
//!
//! Besides the plain constructions (balanced, random), this module holds
//! the weight-to-tree constructions and their inverse:
//!
//! - [`SearchTree::treap_from_weights`]: randomized, key `i` roots any
//!   key range with probability `w(i)` over the range weight, so the
//!   expected depth of `i` is Θ(log(W/w(i))).
//! - [`SearchTree::deterministic_from_weights`]: weight-centroid
//!   recursion with the guarantee `depth(i) ≤ 2·log2(W/w(i)) + 2` (the
//!   construction actually achieves `log2(W/w(i))`, see the proof sketch
//!   at the function).
//! - [`weights_from_tree`]: `w(i) = 4^(-depth(i))`, which turns tree
//!   depths back into weights such that subtree weight sums stay within a
//!   factor 2 of the subtree root's own weight.
//!
//! Reference-tree builders for structured access families (decomposable
//! permutations, tilted grids) also live here; they are what the lazy
//! finger bounds are measured against.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::key::Key;
use crate::seeding;
use rand::Rng;

/// Index of a node in a [`SearchTree`] arena. Stable across rotations;
/// invalidated only by explicit splicing.
pub type NodeId = usize;

#[derive(Clone, Debug)]
struct Node {
    key: Key,
    parent: Option<NodeId>,
    left: Option<NodeId>,
    right: Option<NodeId>,
    live: bool,
}

/// A binary search tree. See the module documentation.
#[derive(Clone)]
pub struct SearchTree {
    nodes: Vec<Node>,
    root: NodeId,
    by_key: HashMap<Key, NodeId>,
}

impl std::fmt::Debug for SearchTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl SearchTree {
    fn empty_arena() -> SearchTree {
        SearchTree {
            nodes: Vec::new(),
            root: usize::MAX,
            by_key: HashMap::new(),
        }
    }

    /// Single node holding `key`.
    pub fn singleton(key: Key) -> SearchTree {
        let mut t = SearchTree::empty_arena();
        let id = t.new_node(key);
        t.root = id;
        t
    }

    pub(crate) fn try_new_node(&mut self, key: Key) -> Result<NodeId> {
        if self.by_key.contains_key(&key) {
            return Err(Error::invalid(format!("duplicate key {key}")));
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            key,
            parent: None,
            left: None,
            right: None,
            live: true,
        });
        self.by_key.insert(key, id);
        Ok(id)
    }

    pub(crate) fn new_node(&mut self, key: Key) -> NodeId {
        self.try_new_node(key).expect("fresh key")
    }

    pub(crate) fn set_root(&mut self, id: NodeId) {
        self.root = id;
        self.nodes[id].parent = None;
    }

    pub(crate) fn link_left(&mut self, parent: NodeId, child: NodeId) {
        debug_assert!(self.nodes[parent].left.is_none());
        self.nodes[parent].left = Some(child);
        self.nodes[child].parent = Some(parent);
    }

    pub(crate) fn link_right(&mut self, parent: NodeId, child: NodeId) {
        debug_assert!(self.nodes[parent].right.is_none());
        self.nodes[parent].right = Some(child);
        self.nodes[child].parent = Some(parent);
    }

    /// Unhook `child` from its parent (or from the root slot), leaving it
    /// the root of a floating subtree. The tree is in a partial state
    /// until a new root/attachment is established.
    pub(crate) fn detach(&mut self, child: NodeId) {
        if let Some(p) = self.nodes[child].parent {
            if self.nodes[p].left == Some(child) {
                self.nodes[p].left = None;
            } else {
                debug_assert_eq!(self.nodes[p].right, Some(child));
                self.nodes[p].right = None;
            }
            self.nodes[child].parent = None;
        }
    }

    /// Remove a node with at most one child, reconnecting that child (if
    /// any) to the node's parent in its place.
    pub(crate) fn splice_out(&mut self, id: NodeId) -> Result<()> {
        let (l, r) = (self.nodes[id].left, self.nodes[id].right);
        if l.is_some() && r.is_some() {
            return Err(Error::invalid("cannot splice out a node with two children"));
        }
        let child = l.or(r);
        let parent = self.nodes[id].parent;
        if let Some(c) = child {
            self.nodes[c].parent = parent;
        }
        match parent {
            None => {
                let c = child.ok_or_else(|| Error::invalid("cannot splice out the last node"))?;
                self.root = c;
            }
            Some(p) => {
                if self.nodes[p].left == Some(id) {
                    self.nodes[p].left = child;
                } else {
                    self.nodes[p].right = child;
                }
            }
        }
        self.by_key.remove(&self.nodes[id].key);
        self.nodes[id].live = false;
        self.nodes[id].parent = None;
        self.nodes[id].left = None;
        self.nodes[id].right = None;
        Ok(())
    }

    /// Remove a node that is already fully detached: no parent, no
    /// children, and not the root. Counterpart to [`SearchTree::splice_out`]
    /// for nodes isolated by hand.
    pub(crate) fn kill_detached(&mut self, id: NodeId) {
        debug_assert!(self.nodes[id].parent.is_none());
        debug_assert!(self.nodes[id].left.is_none() && self.nodes[id].right.is_none());
        debug_assert_ne!(self.root, id);
        self.by_key.remove(&self.nodes[id].key);
        self.nodes[id].live = false;
    }

    /// Number of live nodes.
    pub fn len(&self) -> usize {
        self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }

    pub fn root_id(&self) -> NodeId {
        self.root
    }

    pub fn root_key(&self) -> Key {
        self.nodes[self.root].key
    }

    pub fn key_of(&self, id: NodeId) -> Key {
        debug_assert!(self.nodes[id].live);
        self.nodes[id].key
    }

    pub fn left(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].left
    }

    pub fn right(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].right
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn find(&self, key: Key) -> Option<NodeId> {
        self.by_key.get(&key).copied()
    }

    pub fn contains(&self, key: Key) -> bool {
        self.by_key.contains_key(&key)
    }

    fn require(&self, key: Key) -> Result<NodeId> {
        self.find(key)
            .ok_or_else(|| Error::invalid(format!("key {key} not in tree")))
    }

    /// Edges from the root down to `id`.
    pub fn depth_id(&self, id: NodeId) -> usize {
        let mut d = 0;
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            d += 1;
            cur = p;
        }
        d
    }

    /// Edges from the root down to `key`; the root has depth 0.
    pub fn depth(&self, key: Key) -> Result<usize> {
        Ok(self.depth_id(self.require(key)?))
    }

    /// Lowest common ancestor of two nodes.
    pub fn lca(&self, a: NodeId, b: NodeId) -> NodeId {
        let (mut a, mut b) = (a, b);
        let (mut da, mut db) = (self.depth_id(a), self.depth_id(b));
        while da > db {
            a = self.nodes[a].parent.unwrap();
            da -= 1;
        }
        while db > da {
            b = self.nodes[b].parent.unwrap();
            db -= 1;
        }
        while a != b {
            a = self.nodes[a].parent.unwrap();
            b = self.nodes[b].parent.unwrap();
        }
        a
    }

    /// Edge distance between two present keys, via the lowest common
    /// ancestor: `depth(a) + depth(b) - 2·depth(lca)`.
    pub fn distance(&self, a: Key, b: Key) -> Result<usize> {
        let (x, y) = (self.require(a)?, self.require(b)?);
        Ok(self.distance_ids(x, y))
    }

    pub fn distance_ids(&self, x: NodeId, y: NodeId) -> usize {
        let l = self.lca(x, y);
        self.depth_id(x) + self.depth_id(y) - 2 * self.depth_id(l)
    }

    /// True if `a` is an ancestor of `b` (or equal to it).
    pub fn is_ancestor(&self, a: NodeId, b: NodeId) -> bool {
        let mut cur = Some(b);
        while let Some(c) = cur {
            if c == a {
                return true;
            }
            cur = self.nodes[c].parent;
        }
        false
    }

    /// Root-to-node search path for a present key, by key comparisons.
    pub fn search_path(&self, key: Key) -> Result<Vec<NodeId>> {
        self.require(key)?;
        let mut path = Vec::new();
        let mut cur = self.root;
        loop {
            path.push(cur);
            let k = self.nodes[cur].key;
            cur = match key.cmp(&k) {
                std::cmp::Ordering::Equal => return Ok(path),
                std::cmp::Ordering::Less => self.nodes[cur].left.expect("key present"),
                std::cmp::Ordering::Greater => self.nodes[cur].right.expect("key present"),
            };
        }
    }

    /// Rotate the node with this key above its parent.
    pub fn rotate(&mut self, key: Key) -> Result<()> {
        let id = self.require(key)?;
        self.rotate_id(id)
    }

    /// Single rotation: move `x` above its parent, preserving symmetric
    /// order. Errors on the root.
    pub fn rotate_id(&mut self, x: NodeId) -> Result<()> {
        let p = self.nodes[x]
            .parent
            .ok_or_else(|| Error::invalid("cannot rotate the root"))?;
        let g = self.nodes[p].parent;
        if self.nodes[p].left == Some(x) {
            let b = self.nodes[x].right;
            self.nodes[p].left = b;
            if let Some(b) = b {
                self.nodes[b].parent = Some(p);
            }
            self.nodes[x].right = Some(p);
        } else {
            debug_assert_eq!(self.nodes[p].right, Some(x));
            let b = self.nodes[x].left;
            self.nodes[p].right = b;
            if let Some(b) = b {
                self.nodes[b].parent = Some(p);
            }
            self.nodes[x].left = Some(p);
        }
        self.nodes[p].parent = Some(x);
        match g {
            None => {
                self.root = x;
                self.nodes[x].parent = None;
            }
            Some(g) => {
                if self.nodes[g].left == Some(p) {
                    self.nodes[g].left = Some(x);
                } else {
                    self.nodes[g].right = Some(x);
                }
                self.nodes[x].parent = Some(g);
            }
        }
        Ok(())
    }

    /// Node ids of the subtree rooted at `id`, preorder.
    pub fn subtree_ids(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            out.push(v);
            if let Some(r) = self.nodes[v].right {
                stack.push(r);
            }
            if let Some(l) = self.nodes[v].left {
                stack.push(l);
            }
        }
        out
    }

    /// Keys in symmetric order (iterative, safe for deep trees).
    pub fn inorder_keys(&self) -> Vec<Key> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = Vec::new();
        let mut cur = Some(self.root);
        while cur.is_some() || !stack.is_empty() {
            while let Some(c) = cur {
                stack.push(c);
                cur = self.nodes[c].left;
            }
            let v = stack.pop().unwrap();
            out.push(self.nodes[v].key);
            cur = self.nodes[v].right;
        }
        out
    }

    /// Keys in preorder (root, left subtree, right subtree).
    pub fn preorder_keys(&self) -> Vec<Key> {
        self.subtree_ids(self.root)
            .into_iter()
            .map(|id| self.nodes[id].key)
            .collect()
    }

    /// Greatest depth over all nodes.
    pub fn height(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut best = 0;
        for id in self.subtree_ids(self.root) {
            let d = match self.nodes[id].parent {
                None => 0,
                Some(p) => depth[p] + 1,
            };
            depth[id] = d;
            best = best.max(d);
        }
        best
    }

    /// Sorted list of the integer keys.
    pub fn real_keys(&self) -> Vec<i64> {
        let mut v: Vec<i64> = self.by_key.keys().filter_map(|k| k.as_integer()).collect();
        v.sort_unstable();
        v
    }

    /// The `n` such that the integer keys are exactly `1..=n`.
    pub fn real_universe(&self) -> Result<usize> {
        let ints = self.real_keys();
        if ints.is_empty() {
            return Err(Error::invalid("tree has no integer keys"));
        }
        let n = ints.len();
        if ints[0] != 1 || ints[n - 1] != n as i64 {
            return Err(Error::invalid(format!(
                "integer keys do not form 1..={n}"
            )));
        }
        Ok(n)
    }

    /// Depths of the real keys, indexed by key (`out[i]` for key `i`,
    /// entry 0 unused). Errors unless the integer keys are exactly `1..=n`.
    pub fn int_depths(&self) -> Result<Vec<usize>> {
        let n = self.real_universe()?;
        let mut depth_of = vec![0usize; self.nodes.len()];
        let mut out = vec![0usize; n + 1];
        for id in self.subtree_ids(self.root) {
            let d = match self.nodes[id].parent {
                None => 0,
                Some(p) => depth_of[p] + 1,
            };
            depth_of[id] = d;
            if let Some(k) = self.nodes[id].key.as_integer() {
                out[k as usize] = d;
            }
        }
        Ok(out)
    }

    /// Structural and order sanity: one root, mutually consistent links,
    /// all live nodes reachable, strictly increasing in-order keys, and a
    /// consistent key index.
    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::invalid("empty tree"));
        }
        let root = self.root;
        if !self.nodes[root].live || self.nodes[root].parent.is_some() {
            return Err(Error::invalid("bad root designation"));
        }
        let mut seen = 0usize;
        for id in self.subtree_ids(root) {
            let node = &self.nodes[id];
            if !node.live {
                return Err(Error::invalid("reachable dead node"));
            }
            seen += 1;
            for (child, side) in [(node.left, "left"), (node.right, "right")] {
                if let Some(c) = child {
                    if self.nodes[c].parent != Some(id) {
                        return Err(Error::invalid(format!("{side} child parent link broken")));
                    }
                }
            }
            if self.by_key.get(&node.key) != Some(&id) {
                return Err(Error::invalid("key index inconsistent"));
            }
        }
        if seen != self.len() {
            return Err(Error::invalid("unreachable live nodes"));
        }
        let keys = self.inorder_keys();
        if keys.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("in-order keys not strictly increasing"));
        }
        Ok(())
    }

    /// Parenthesized preorder text: `(key left right)` with `.` for an
    /// empty subtree. Inverse of [`SearchTree::parse`], bit-exact.
    pub fn to_text(&self) -> String {
        enum Step {
            Open(NodeId),
            Lit(&'static str),
        }
        let mut out = String::new();
        let mut stack = vec![Step::Open(self.root)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Lit(s) => out.push_str(s),
                Step::Open(id) => {
                    out.push('(');
                    out.push_str(&self.nodes[id].key.to_string());
                    stack.push(Step::Lit(")"));
                    match self.nodes[id].right {
                        None => stack.push(Step::Lit(" .")),
                        Some(r) => {
                            stack.push(Step::Open(r));
                            stack.push(Step::Lit(" "));
                        }
                    }
                    match self.nodes[id].left {
                        None => stack.push(Step::Lit(" .")),
                        Some(l) => {
                            stack.push(Step::Open(l));
                            stack.push(Step::Lit(" "));
                        }
                    }
                }
            }
        }
        out
    }

    /// Parse the `(key left right)` format produced by
    /// [`SearchTree::to_text`]. Rational keys are written `p/q`.
    pub fn parse(text: &str) -> Result<SearchTree> {
        let mut tokens = Vec::new();
        let mut rest = text;
        while let Some(c) = rest.chars().next() {
            match c {
                '(' | ')' => {
                    tokens.push(&rest[..1]);
                    rest = &rest[1..];
                }
                c if c.is_whitespace() => rest = &rest[1..],
                _ => {
                    let end = rest
                        .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
                        .unwrap_or(rest.len());
                    tokens.push(&rest[..end]);
                    rest = &rest[end..];
                }
            }
        }
        let err = |msg: &str| Error::Parse {
            line: 1,
            msg: msg.to_string(),
        };
        let mut tree = SearchTree::empty_arena();
        // Explicit stack of nodes whose children are still being read;
        // usize::MAX marks a completed subtree handed up to the parent.
        let mut pos = 0usize;
        let mut parents: Vec<(NodeId, u8)> = Vec::new(); // (node, children attached)
        let mut done: Option<NodeId>;
        loop {
            if pos == tokens.len() {
                return Err(err("unexpected end of input"));
            }
            match tokens[pos] {
                "(" => {
                    if pos + 1 == tokens.len() {
                        return Err(err("missing key after '('"));
                    }
                    let key: Key = tokens[pos + 1].parse()?;
                    let id = tree
                        .try_new_node(key)
                        .map_err(|_| err(&format!("duplicate key {key}")))?;
                    parents.push((id, 0));
                    pos += 2;
                }
                "." => {
                    done = None;
                    pos += 1;
                    // fall through to attachment below
                    Self::attach_parsed(&mut tree, &mut parents, &mut done, true)?;
                    if parents.is_empty() {
                        break;
                    }
                    continue;
                }
                ")" => {
                    let (id, attached) = parents.pop().ok_or_else(|| err("unbalanced ')'"))?;
                    if attached != 2 {
                        return Err(err("node with fewer than two subtree slots"));
                    }
                    done = Some(id);
                    pos += 1;
                    Self::attach_parsed(&mut tree, &mut parents, &mut done, false)?;
                    if parents.is_empty() {
                        break;
                    }
                    continue;
                }
                t => return Err(err(&format!("unexpected token {t:?}"))),
            }
        }
        if pos != tokens.len() {
            return Err(err("trailing tokens after tree"));
        }
        let root = done.ok_or_else(|| err("empty tree"))?;
        tree.root = root;
        tree.validate()?;
        Ok(tree)
    }

    fn attach_parsed(
        tree: &mut SearchTree,
        parents: &mut Vec<(NodeId, u8)>,
        done: &mut Option<NodeId>,
        is_empty: bool,
    ) -> Result<()> {
        let child = if is_empty { None } else { *done };
        if let Some((pid, attached)) = parents.last_mut() {
            match *attached {
                0 => {
                    if let Some(c) = child {
                        tree.nodes[*pid].left = Some(c);
                        tree.nodes[c].parent = Some(*pid);
                    }
                }
                1 => {
                    if let Some(c) = child {
                        tree.nodes[*pid].right = Some(c);
                        tree.nodes[c].parent = Some(*pid);
                    }
                }
                _ => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: "node with more than two subtrees".to_string(),
                    })
                }
            }
            *attached += 1;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Constructions.

/// Build a tree over `keys` (sorted, distinct) by repeatedly choosing a
/// root index for each subrange. Iterative so deep outputs cannot
/// overflow the stack.
pub(crate) fn assemble(keys: &[Key], mut choose: impl FnMut(usize, usize) -> usize) -> SearchTree {
    assert!(!keys.is_empty());
    let mut t = SearchTree::empty_arena();
    let mut stack = vec![(0usize, keys.len() - 1, None::<NodeId>, false)];
    while let Some((lo, hi, parent, is_left)) = stack.pop() {
        let r = choose(lo, hi);
        debug_assert!((lo..=hi).contains(&r));
        let id = t.new_node(keys[r]);
        match parent {
            None => t.root = id,
            Some(p) => {
                if is_left {
                    t.link_left(p, id);
                } else {
                    t.link_right(p, id);
                }
            }
        }
        if r > lo {
            stack.push((lo, r - 1, Some(id), true));
        }
        if r < hi {
            stack.push((r + 1, hi, Some(id), false));
        }
    }
    t
}

fn sorted_distinct(keys: &[Key]) -> Result<Vec<Key>> {
    if keys.is_empty() {
        return Err(Error::invalid("cannot build a tree over no keys"));
    }
    let mut v = keys.to_vec();
    v.sort();
    if v.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("duplicate keys"));
    }
    Ok(v)
}

impl SearchTree {
    /// Median-rooted balanced tree over the given distinct keys; depth is
    /// at most `ceil(log2(n+1))`.
    pub fn build_balanced(keys: &[Key]) -> Result<SearchTree> {
        let keys = sorted_distinct(keys)?;
        Ok(assemble(&keys, |lo, hi| lo + (hi - lo) / 2))
    }

    /// Balanced tree over the integer keys `1..=n`.
    pub fn balanced_over(n: usize) -> SearchTree {
        let keys: Vec<Key> = (1..=n as i64).map(Key::int).collect();
        SearchTree::build_balanced(&keys).expect("distinct keys")
    }

    /// Randomized weight-sensitive tree: key `i` becomes the root of any
    /// key subrange with probability `w(i)` divided by the subrange
    /// weight, which matches the treap model where key `i` carries the
    /// maximum of `w(i)` many i.i.d. priority draws. Expected depth of
    /// key `i` is `Θ(log2(W/w(i)))`.
    pub fn treap_from_weights(w: &WeightFunction, seed: u64) -> SearchTree {
        let mut rng = seeding::rng(seed);
        let keys: Vec<Key> = (1..=w.n() as i64).map(Key::int).collect();
        assemble(&keys, |lo, hi| {
            // Prefix sums are over 1-based keys: range [lo, hi] of key
            // indices is keys lo+1 ..= hi+1.
            let total = w.range_sum(lo + 1, hi + 1);
            let target = w.prefix()[lo] + rng.gen_range(0.0..total);
            // First index whose through-prefix exceeds the target.
            let (mut a, mut b) = (lo, hi);
            while a < b {
                let mid = (a + b) / 2;
                if w.prefix()[mid + 1] > target {
                    b = mid;
                } else {
                    a = mid + 1;
                }
            }
            a
        })
    }

    /// Deterministic weight-sensitive tree by weight-centroid recursion:
    /// each subrange is rooted at the key minimizing the heavier of the
    /// two remaining sides (leftmost on ties). The chosen pivot always
    /// leaves both sides with at most half the subrange weight, because
    /// the first key whose prefix reaches half already does; hence key
    /// `i` ends at depth at most `log2(W/w(i))`, comfortably within the
    /// promised `2·log2(W/w(i)) + 2`.
    pub fn deterministic_from_weights(w: &WeightFunction) -> SearchTree {
        let keys: Vec<Key> = (1..=w.n() as i64).map(Key::int).collect();
        assemble(&keys, |lo, hi| {
            let total = w.range_sum(lo + 1, hi + 1);
            let left_weight = |r: usize| w.prefix()[r] - w.prefix()[lo];
            // The left side grows with r while the right side shrinks, so
            // the smallest max sits at the crossing; compare the crossing
            // pivot with its left neighbor, preferring the leftmost.
            let crossed = |r: usize| left_weight(r) >= total - left_weight(r) - w.get(r + 1);
            let (mut a, mut b) = (lo, hi);
            while a < b {
                let mid = (a + b) / 2;
                if crossed(mid) {
                    b = mid;
                } else {
                    a = mid + 1;
                }
            }
            let score = |r: usize| {
                let l = left_weight(r);
                l.max(total - l - w.get(r + 1))
            };
            if a > lo && score(a - 1) <= score(a) {
                a - 1
            } else {
                a
            }
        })
    }

    /// Uniformly random BST shape over `1..=n` (uniform over shapes in
    /// the random-insertion sense, i.e. the uniform-priority treap).
    pub fn random_bst(n: usize, seed: u64) -> SearchTree {
        let keys: Vec<Key> = (1..=n as i64).map(Key::int).collect();
        SearchTree::random_over_keys(&keys, seed).expect("distinct keys")
    }

    /// Random-insertion BST shape over arbitrary distinct keys.
    pub fn random_over_keys(keys: &[Key], seed: u64) -> Result<SearchTree> {
        let keys = sorted_distinct(keys)?;
        let mut rng = seeding::rng(seed);
        Ok(assemble(&keys, |lo, hi| rng.gen_range(lo..=hi)))
    }
}

/// Enumerate every BST shape over `1..=n`, invoking `f` on each. The
/// number of shapes is the `n`-th Catalan number, so `n` is capped at 14
/// (2.7 million shapes).
pub fn for_each_bst(n: usize, mut f: impl FnMut(&SearchTree)) -> Result<()> {
    if n == 0 || n > 14 {
        return Err(Error::guard(format!(
            "BST enumeration needs 1 <= n <= 14, got {n}"
        )));
    }
    // child[k-1] = (left, right) child keys of k, 0 for none. Enumerated
    // in continuation-passing style: `then` receives the subrange root.
    struct Walk<'a> {
        child: Vec<(u8, u8)>,
        emit: &'a mut dyn FnMut(&[(u8, u8)], u8),
    }
    fn rec(w: &mut Walk, lo: u8, hi: u8, then: &mut dyn FnMut(&mut Walk, u8)) {
        if lo > hi {
            then(w, 0);
            return;
        }
        for root in lo..=hi {
            rec(w, lo, root - 1, &mut |w, lroot| {
                rec(w, root + 1, hi, &mut |w, rroot| {
                    w.child[root as usize - 1] = (lroot, rroot);
                    then(w, root);
                });
            });
        }
    }
    let mut emit = |child: &[(u8, u8)], root: u8| {
        let mut t = SearchTree::empty_arena();
        let ids: Vec<NodeId> = (1..=n as i64).map(|k| t.new_node(Key::int(k))).collect();
        for k in 1..=n {
            let (l, r) = child[k - 1];
            if l != 0 {
                t.link_left(ids[k - 1], ids[l as usize - 1]);
            }
            if r != 0 {
                t.link_right(ids[k - 1], ids[r as usize - 1]);
            }
        }
        t.root = ids[root as usize - 1];
        f(&t);
    };
    let mut w = Walk {
        child: vec![(0, 0); n],
        emit: &mut emit,
    };
    rec(&mut w, 1, n as u8, &mut |w, root| {
        let child = std::mem::take(&mut w.child);
        (w.emit)(&child, root);
        w.child = child;
    });
    Ok(())
}

// ---------------------------------------------------------------------------
// Weights.

/// Positive weights on the keys `1..=n`, with cached total and prefix
/// sums. Range sums are inclusive and order-insensitive:
/// `range_sum(i, j)` sums over `min(i,j) ..= max(i,j)`.
#[derive(Clone, Debug)]
pub struct WeightFunction {
    w: Vec<f64>,
    prefix: Vec<f64>,
}

impl WeightFunction {
    /// Weights for keys `1..=n`, given in key order.
    pub fn new(weights: Vec<f64>) -> Result<WeightFunction> {
        if weights.is_empty() {
            return Err(Error::invalid("weight function needs at least one key"));
        }
        if weights.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::invalid("weights must be positive and finite"));
        }
        let mut prefix = Vec::with_capacity(weights.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &x in &weights {
            acc += x;
            prefix.push(acc);
        }
        Ok(WeightFunction { w: weights, prefix })
    }

    pub fn uniform(n: usize) -> WeightFunction {
        WeightFunction::new(vec![1.0; n]).expect("positive")
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// Weight of key `i` (1-based).
    pub fn get(&self, i: usize) -> f64 {
        self.w[i - 1]
    }

    /// Total weight `W`.
    pub fn total(&self) -> f64 {
        self.prefix[self.w.len()]
    }

    /// Inclusive range sum over `min(i,j) ..= max(i,j)`.
    pub fn range_sum(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (i.min(j), i.max(j));
        self.prefix[hi] - self.prefix[lo - 1]
    }

    /// Prefix sums: `prefix()[i]` is the weight of keys `1..=i`.
    pub(crate) fn prefix(&self) -> &[f64] {
        &self.prefix
    }
}

/// Weights `w(i) = 4^(-depth(i))` over the real keys of `tree`.
/// Auxiliary keys influence the depths but carry no weight themselves.
/// Within any subtree the weights below sum to at most twice the subtree
/// root's weight, since depths grow by one per level while weights decay
/// by four and levels at most double in width.
pub fn weights_from_tree(tree: &SearchTree) -> Result<WeightFunction> {
    let n = tree.real_universe()?;
    let mut w = vec![0.0; n];
    for (i, item) in w.iter_mut().enumerate() {
        let d = tree.depth(Key::int(i as i64 + 1))? as i32;
        *item = 4f64.powi(-d);
        if *item == 0.0 {
            return Err(Error::guard(format!(
                "depth {d} underflows the 4^-depth weight"
            )));
        }
    }
    WeightFunction::new(w)
}

// ---------------------------------------------------------------------------
// Reference trees for structured access families.

/// Reference tree for a `k`-decomposable permutation: recursively
/// replaces each node of the substitution decomposition by a balanced
/// gadget over its children (in value order), with auxiliary separator
/// keys `b + 1/2` between adjacent child value ranges. Errors if some
/// prime skeleton has arity above `k`, i.e. the permutation is not
/// `k`-decomposable.
pub fn build_decomposable_reference_tree(
    perm: &crate::sequences::Permutation,
    k: usize,
) -> Result<SearchTree> {
    if k < 2 {
        return Err(Error::invalid("decomposability arity must be at least 2"));
    }
    let decomp = crate::sequences::decomposition_tree(perm);
    if decomp.max_prime_arity() > k {
        return Err(Error::invalid(format!(
            "permutation is not {k}-decomposable (prime arity {})",
            decomp.max_prime_arity()
        )));
    }
    let mut t = SearchTree::empty_arena();
    let root = assemble_decomposable(&mut t, &decomp)?;
    t.root = root;
    t.nodes[root].parent = None;
    t.validate()?;
    Ok(t)
}

fn assemble_decomposable(
    t: &mut SearchTree,
    node: &crate::sequences::DecompositionNode,
) -> Result<NodeId> {
    use crate::sequences::DecompositionKind::*;
    if let Leaf = node.kind {
        return t.try_new_node(Key::int(node.value_lo as i64));
    }
    // Children in value order; gadget internal keys separate adjacent
    // child value ranges at (range end) + 1/2.
    let mut kids: Vec<&crate::sequences::DecompositionNode> = node.children.iter().collect();
    kids.sort_by_key(|c| c.value_lo);
    let roots: Vec<NodeId> = kids
        .iter()
        .map(|c| assemble_decomposable(t, c))
        .collect::<Result<_>>()?;
    build_gadget(t, &kids, &roots, 0, kids.len() - 1)
}

/// Balanced binary gadget over child subtrees `lo..=hi` (value order),
/// returning its root. Internal nodes get keys `end(mid) + 1/2`.
fn build_gadget(
    t: &mut SearchTree,
    kids: &[&crate::sequences::DecompositionNode],
    roots: &[NodeId],
    lo: usize,
    hi: usize,
) -> Result<NodeId> {
    if lo == hi {
        return Ok(roots[lo]);
    }
    let mid = lo + (hi - lo) / 2;
    let sep = t.try_new_node(Key::int(kids[mid].value_hi as i64).offset(1, 2))?;
    let l = build_gadget(t, kids, roots, lo, mid)?;
    let r = build_gadget(t, kids, roots, mid + 1, hi)?;
    t.link_left(sep, l);
    t.link_right(sep, r);
    Ok(sep)
}

/// Reference tree for the tilted `k` by `l` grid: a balanced top tree
/// over `k` auxiliary leaves `l(i-1) + 1/2`, each carrying block
/// `B_i = [l(i-1)+1, l*i]` as a right spine below it. Top-tree internal
/// separators sit at `l*h + 1/4`. For `k = 1` the tree is the bare spine.
pub fn build_tilted_grid_reference_tree(k: usize, l: usize) -> Result<SearchTree> {
    if k == 0 || l == 0 {
        return Err(Error::invalid("grid dimensions must be positive"));
    }
    k.checked_mul(l)
        .and_then(|n| i64::try_from(n).ok())
        .ok_or_else(|| Error::guard("grid size overflows"))?;
    let mut t = SearchTree::empty_arena();
    let spine = |t: &mut SearchTree, block: usize| -> NodeId {
        let base = (l * (block - 1)) as i64;
        let top = t.new_node(Key::int(base + 1));
        let mut prev = top;
        for off in 2..=l as i64 {
            let id = t.new_node(Key::int(base + off));
            t.link_right(prev, id);
            prev = id;
        }
        top
    };
    if k == 1 {
        let s = spine(&mut t, 1);
        t.root = s;
        t.validate()?;
        return Ok(t);
    }
    // Balanced top over leaf indices 1..=k; leaves carry the spines.
    fn top(
        t: &mut SearchTree,
        l: usize,
        lo: usize,
        hi: usize,
        spine: &impl Fn(&mut SearchTree, usize) -> NodeId,
    ) -> NodeId {
        if lo == hi {
            let leaf = t.new_node(Key::int((l * (lo - 1)) as i64).offset(1, 2));
            let s = spine(t, lo);
            t.link_right(leaf, s);
            return leaf;
        }
        let mid = lo + (hi - lo) / 2;
        let sep = t.new_node(Key::int((l * mid) as i64).offset(1, 4));
        let a = top(t, l, lo, mid, spine);
        let b = top(t, l, mid + 1, hi, spine);
        t.link_left(sep, a);
        t.link_right(sep, b);
        sep
    }
    let root = top(&mut t, l, 1, k, &spine);
    t.root = root;
    t.validate()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::derive_seed;

    fn lf_cost(t: &SearchTree, keys: &[usize]) -> usize {
        keys.windows(2)
            .map(|w| t.distance(Key::int(w[0] as i64), Key::int(w[1] as i64)).unwrap())
            .sum()
    }

    #[test]
    fn rotate_chain() {
        let mut t = SearchTree::parse("(2 (1 . .) .)").unwrap();
        t.rotate(Key::int(1)).unwrap();
        assert_eq!(t.to_text(), "(1 . (2 . .))");
        t.validate().unwrap();
    }

    #[test]
    fn rotate_is_involutive_and_order_preserving() {
        use rand::Rng;
        for trial in 0..1000u64 {
            let mut rng = seeding::rng(derive_seed(61, trial));
            let n = rng.gen_range(2..=40usize);
            let mut t = SearchTree::random_bst(n, derive_seed(67, trial));
            let before = t.to_text();
            let inorder = t.inorder_keys();
            let x = loop {
                let id = t.find(Key::int(rng.gen_range(1..=n) as i64)).unwrap();
                if t.parent(id).is_some() {
                    break id;
                }
            };
            let p = t.parent(x).unwrap();
            t.rotate_id(x).unwrap();
            t.validate().unwrap();
            assert_eq!(t.inorder_keys(), inorder);
            t.rotate_id(p).unwrap();
            assert_eq!(t.to_text(), before);
        }
    }

    #[test]
    fn rotate_root_rejected() {
        let mut t = SearchTree::parse("(2 (1 . .) .)").unwrap();
        assert!(t.rotate(Key::int(2)).is_err());
        assert!(t.rotate(Key::int(9)).is_err());
    }

    #[test]
    fn depth_examples() {
        let t = SearchTree::parse("(5 (4 (3 (2 (1 . .) .) .) .) .)").unwrap();
        assert_eq!(t.depth(Key::int(5)).unwrap(), 0);
        assert_eq!(t.depth(Key::int(4)).unwrap(), 1);
        assert_eq!(t.depth(Key::int(1)).unwrap(), 4);
        assert!(t.depth(Key::int(6)).is_err());
    }

    #[test]
    fn distance_examples() {
        let b = SearchTree::parse("(2 (1 . .) (3 . .))").unwrap();
        assert_eq!(b.distance(Key::int(2), Key::int(2)).unwrap(), 0);
        assert_eq!(b.distance(Key::int(1), Key::int(3)).unwrap(), 2);
        let chain = SearchTree::parse("(1 . (2 . (3 . .)))").unwrap();
        assert_eq!(chain.distance(Key::int(1), Key::int(3)).unwrap(), 2);
        assert!(chain.distance(Key::int(1), Key::int(4)).is_err());
    }

    #[test]
    fn balanced_examples() {
        let one = SearchTree::build_balanced(&[Key::int(1)]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.height(), 0);
        let three = SearchTree::balanced_over(3);
        assert_eq!(three.root_key(), Key::int(2));
        let seven = SearchTree::balanced_over(7);
        assert_eq!(seven.height(), 2);
        for n in 1..=64 {
            let t = SearchTree::balanced_over(n);
            t.validate().unwrap();
            assert!(t.height() + 1 <= ((n + 1) as f64).log2().ceil() as usize + 1);
        }
        assert!(SearchTree::build_balanced(&[Key::int(1), Key::int(1)]).is_err());
        assert!(SearchTree::build_balanced(&[]).is_err());
    }

    #[test]
    fn treap_single_node() {
        let w = WeightFunction::new(vec![3.0]).unwrap();
        let t = SearchTree::treap_from_weights(&w, 1);
        assert_eq!(t.len(), 1);
        assert_eq!(t.depth(Key::int(1)).unwrap(), 0);
    }

    #[test]
    fn treap_uniform_depth_statistics() {
        let w = WeightFunction::uniform(1023);
        let mut total = 0usize;
        for seed in 0..200u64 {
            let t = SearchTree::treap_from_weights(&w, derive_seed(71, seed));
            total += t.depth(Key::int(512)).unwrap();
        }
        let mean = total as f64 / 200.0;
        assert!(mean <= 2.0 * 1024f64.log2(), "mean depth {mean} too large");
    }

    #[test]
    fn treap_heavy_key_usually_roots() {
        let mut w = vec![1.0; 51];
        w[0] = 1000.0;
        let w = WeightFunction::new(w).unwrap();
        let mut hits = 0;
        for seed in 0..200u64 {
            let t = SearchTree::treap_from_weights(&w, derive_seed(73, seed));
            t.validate().unwrap();
            if t.root_key() == Key::int(1) {
                hits += 1;
            }
        }
        assert!(hits >= 180, "heavy key rooted only {hits}/200 times");
    }

    #[test]
    fn centroid_examples() {
        let t = SearchTree::deterministic_from_weights(&WeightFunction::uniform(3));
        assert_eq!(t.root_key(), Key::int(2));
        let mut w = vec![1.0; 8];
        w[0] = 8.0;
        let w = WeightFunction::new(w).unwrap();
        let t = SearchTree::deterministic_from_weights(&w);
        let bound = 2.0 * (w.total() / w.get(1)).log2() + 2.0;
        assert!((t.depth(Key::int(1)).unwrap() as f64) <= bound);
    }

    #[test]
    fn centroid_depth_bound_property() {
        use rand::Rng;
        for trial in 0..500u64 {
            let mut rng = seeding::rng(derive_seed(79, trial));
            let n = rng.gen_range(1..=64usize);
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..100.0)).collect();
            let w = WeightFunction::new(weights).unwrap();
            let t = SearchTree::deterministic_from_weights(&w);
            t.validate().unwrap();
            for i in 1..=n {
                let bound = 2.0 * (w.total() / w.get(i)).log2() + 2.0;
                let d = t.depth(Key::int(i as i64)).unwrap() as f64;
                assert!(d <= bound, "depth({i}) = {d} exceeds {bound}");
            }
        }
    }

    #[test]
    fn weights_from_tree_examples() {
        let single = SearchTree::parse("(1 . .)").unwrap();
        let w = weights_from_tree(&single).unwrap();
        assert_eq!(w.get(1), 1.0);
        let two = SearchTree::parse("(1 . (2 . .))").unwrap();
        let w = weights_from_tree(&two).unwrap();
        assert_eq!(w.get(1), 1.0);
        assert_eq!(w.get(2), 0.25);
    }

    #[test]
    fn subtree_weight_is_within_twice_root_weight() {
        for trial in 0..100u64 {
            let t = SearchTree::random_bst(60, derive_seed(83, trial));
            let w = weights_from_tree(&t).unwrap();
            for id in t.subtree_ids(t.root_id()) {
                let own = w.get(t.key_of(id).as_integer().unwrap() as usize);
                let sum: f64 = t
                    .subtree_ids(id)
                    .iter()
                    .map(|&v| w.get(t.key_of(v).as_integer().unwrap() as usize))
                    .sum();
                assert!(sum <= 2.0 * own + 1e-12);
            }
        }
    }

    #[test]
    fn weight_tree_round_trip_depths() {
        for trial in 0..100u64 {
            let t = SearchTree::random_bst(50, derive_seed(89, trial));
            let w = weights_from_tree(&t).unwrap();
            let rebuilt = SearchTree::deterministic_from_weights(&w);
            for i in 1..=50i64 {
                let old = t.depth(Key::int(i)).unwrap();
                let new = rebuilt.depth(Key::int(i)).unwrap();
                assert!(new <= 4 * old + 4, "key {i}: old {old}, new {new}");
            }
        }
    }

    #[test]
    fn auxiliary_elimination_keeps_distances() {
        use rand::seq::SliceRandom;
        use rand::Rng;
        for trial in 0..10u64 {
            let mut rng = seeding::rng(derive_seed(97, trial));
            let n = 40i64;
            let mut keys: Vec<Key> = (1..=n).map(Key::int).collect();
            let mut positions: Vec<i64> = (1..n).collect();
            positions.shuffle(&mut rng);
            for &p in positions.iter().take(15) {
                keys.push(Key::int(p).offset(1, 2));
            }
            let t = SearchTree::random_over_keys(&keys, derive_seed(101, trial)).unwrap();
            let w = weights_from_tree(&t).unwrap();
            for _ in 0..30 {
                let i = Key::int(rng.gen_range(1..=n));
                let j = Key::int(rng.gen_range(1..=n));
                let d = t.distance(i, j).unwrap() as f64;
                let mut total = 0f64;
                for seed in 0..64u64 {
                    let prime = SearchTree::treap_from_weights(&w, derive_seed(103, seed));
                    total += prime.distance(i, j).unwrap() as f64;
                }
                let mean = total / 64.0;
                assert!(
                    mean <= 8.0 * (d + 1.0),
                    "expected distance {mean} vs direct {d}"
                );
            }
        }
    }

    #[test]
    fn text_round_trip() {
        for trial in 0..50u64 {
            let t = SearchTree::random_bst(30, derive_seed(107, trial));
            let text = t.to_text();
            let back = SearchTree::parse(&text).unwrap();
            assert_eq!(back.to_text(), text);
        }
        let t = SearchTree::parse("(3/2 (1 . .) (7/4 . .))").unwrap();
        assert_eq!(t.to_text(), "(3/2 (1 . .) (7/4 . .))");
        for bad in [
            "",
            "(1",
            "(1 . . .)",
            "(1 (2 . .) .)",
            "(1 . .) (2 . .)",
            "(1 (1 . .) .)",
            ".",
            "()",
        ] {
            assert!(SearchTree::parse(bad).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn deep_tree_text_round_trip() {
        // right spine of 50000 nodes: text I/O must not recurse
        let keys: Vec<Key> = (1..=50_000).map(Key::int).collect();
        let mut t = SearchTree::parse(&spine_text(50_000)).unwrap();
        assert_eq!(t.inorder_keys(), keys);
        assert_eq!(t.depth(Key::int(50_000)).unwrap(), 49_999);
        t.rotate(Key::int(2)).unwrap();
        t.validate().unwrap();
        fn spine_text(n: usize) -> String {
            let mut s = String::new();
            for i in 1..=n {
                s.push_str(&format!("({i} . "));
            }
            s.push('.');
            for _ in 0..n {
                s.push(')');
            }
            s
        }
    }

    #[test]
    fn decomposable_reference_tree_examples() {
        let p = crate::sequences::Permutation::new(vec![1]).unwrap();
        let t = build_decomposable_reference_tree(&p, 2).unwrap();
        assert_eq!(t.len(), 1);

        for seed in 0..20u64 {
            let base = SearchTree::random_bst(100, derive_seed(109, seed));
            let p = crate::sequences::gen_preorder(&base).unwrap();
            let t = build_decomposable_reference_tree(&p, 2).unwrap();
            let n = p.n();
            assert!(
                lf_cost(&t, p.keys()) <= 4 * (n - 1),
                "preorder reference tree exceeded the lazy finger budget"
            );
        }

        for seed in 0..20u64 {
            let p = crate::sequences::gen_decomposable(4, 4, derive_seed(113, seed)).unwrap();
            let t = build_decomposable_reference_tree(&p, 4).unwrap();
            let n = p.n();
            if n >= 2 {
                assert!(lf_cost(&t, p.keys()) <= 4 * (n - 1) * 2);
            }
        }

        let simple = crate::sequences::Permutation::new(vec![2, 4, 1, 3]).unwrap();
        assert!(build_decomposable_reference_tree(&simple, 2).is_err());
        assert!(build_decomposable_reference_tree(&simple, 4).is_ok());
    }

    #[test]
    fn tilted_grid_reference_tree_shape() {
        let spine = build_tilted_grid_reference_tree(1, 5).unwrap();
        assert_eq!(spine.to_text(), "(1 . (2 . (3 . (4 . (5 . .)))))");

        let t = build_tilted_grid_reference_tree(2, 2).unwrap();
        assert_eq!(t.distance(Key::int(1), Key::int(2)).unwrap(), 1);
        assert_eq!(t.distance(Key::int(3), Key::int(4)).unwrap(), 1);

        for k in [1usize, 2, 3, 5, 8] {
            for l in [1usize, 2, 5, 9] {
                let t = build_tilted_grid_reference_tree(k, l).unwrap();
                t.validate().unwrap();
                assert_eq!(t.real_universe().unwrap(), k * l);
                let top_budget = (k as f64).log2().ceil() as usize + 2;
                for i in 0..k {
                    let head = Key::int((l * i + 1) as i64);
                    assert!(t.depth(head).unwrap() <= top_budget);
                    // spine steps cost 1 each within a block
                    for off in 1..l as i64 {
                        let a = Key::int((l * i) as i64 + off);
                        let b = Key::int((l * i) as i64 + off + 1);
                        assert_eq!(t.distance(a, b).unwrap(), 1);
                    }
                }
            }
        }
    }

    #[test]
    fn bst_enumeration_counts() {
        let catalan = [1usize, 2, 5, 14, 42, 132, 429, 1430];
        for (i, &expect) in catalan.iter().enumerate() {
            let n = i + 1;
            let mut count = 0;
            let mut texts = std::collections::HashSet::new();
            for_each_bst(n, |t| {
                t.validate().unwrap();
                texts.insert(t.to_text());
                count += 1;
            })
            .unwrap();
            assert_eq!(count, expect, "n = {n}");
            assert_eq!(texts.len(), expect);
        }
        assert!(for_each_bst(0, |_| {}).is_err());
        assert!(for_each_bst(15, |_| {}).is_err());
    }

    #[test]
    fn weight_function_basics() {
        let w = WeightFunction::new(vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(w.total(), 7.0);
        assert_eq!(w.range_sum(1, 3), 7.0);
        assert_eq!(w.range_sum(3, 1), 7.0);
        assert_eq!(w.range_sum(2, 2), 2.0);
        assert!(WeightFunction::new(vec![1.0, 0.0]).is_err());
        assert!(WeightFunction::new(vec![-1.0]).is_err());
        assert!(WeightFunction::new(vec![f64::INFINITY]).is_err());
        assert!(WeightFunction::new(vec![]).is_err());
    }

    #[test]
    fn universe_and_depth_vectors() {
        let t = SearchTree::parse("(2 (1 . .) (3 . (4 . .)))").unwrap();
        assert_eq!(t.real_universe().unwrap(), 4);
        assert_eq!(t.int_depths().unwrap(), vec![0, 1, 0, 1, 2]);
        let aux = SearchTree::parse("(3/2 (1 . .) (2 . .))").unwrap();
        assert_eq!(aux.real_universe().unwrap(), 2);
        let gap = SearchTree::parse("(1 . (3 . .))").unwrap();
        assert!(gap.real_universe().is_err());
    }
}
