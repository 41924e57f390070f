//! A k-finger BST machine and its simulation by an ordinary BST.
//!
//! The machine keeps k fingers on a tree; each instruction moves one
//! finger to a neighbor, rotates the fingered node above its parent,
//! or declares that the fingered key serves the next access. Machine
//! cost is one unit per instruction.
//!
//! [`simulate`] maintains a second, single-pointer tree that mirrors
//! the machine at an O(log k) factor. Its shape follows the hand
//! decomposition: the Steiner tree spanned by the fingers (plus the
//! root) splits into pseudofingers (fingers and branch nodes) and
//! tendons (paths between consecutive pseudofingers), each tendon
//! splits into two half tendons by comparison with its lower endpoint,
//! and the resulting disjoint key intervals form a balanced top
//! structure. Half-tendon interiors are kept as two-chain deque
//! subtrees so their extreme elements move in and out in O(1)
//! amortized rotations; everything else hangs below as knuckles.
//! A machine step changes the hand only at interval endpoints, so the
//! simulator pays O(log k) rotations per step, rebuilding the top
//! structure whenever a pseudofinger drifts past the depth line
//! `4*log2(k+1) + 4`, a hard invariant asserted after every step.
//!
//! Simulated cost counts rotations performed plus nodes touched on
//! declared accesses; bookkeeping outside the tree is free, matching
//! the usual BST-model accounting.

use std::collections::HashSet;

use rand::Rng;

use crate::algorithms::CostLedger;
use crate::error::{Error, Result};
use crate::key::Key;
use crate::sequences::AccessSequence;
use crate::tree::{NodeId, SearchTree};

// ---------------------------------------------------------------------------
// Instructions.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Parent,
    Left,
    Right,
}

/// One machine instruction; fingers are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Instruction {
    Move(usize, Direction),
    Rotate(usize),
    Access(usize),
}

/// Render a trace in the line format `M i P|L|R`, `R i`, `A i`.
pub fn format_trace(trace: &[Instruction]) -> String {
    let mut out = String::new();
    for ins in trace {
        match ins {
            Instruction::Move(i, d) => {
                let c = match d {
                    Direction::Parent => 'P',
                    Direction::Left => 'L',
                    Direction::Right => 'R',
                };
                out.push_str(&format!("M {i} {c}\n"));
            }
            Instruction::Rotate(i) => out.push_str(&format!("R {i}\n")),
            Instruction::Access(i) => out.push_str(&format!("A {i}\n")),
        }
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<Instruction>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: no + 1,
            msg: msg.to_string(),
        };
        let mut it = line.split_whitespace();
        let op = it.next().ok_or_else(|| bad("empty instruction"))?;
        let finger: usize = it
            .next()
            .ok_or_else(|| bad("missing finger index"))?
            .parse()
            .map_err(|_| bad("bad finger index"))?;
        let ins = match op {
            "M" => {
                let d = match it.next() {
                    Some("P") => Direction::Parent,
                    Some("L") => Direction::Left,
                    Some("R") => Direction::Right,
                    _ => return Err(bad("move direction must be P, L or R")),
                };
                Instruction::Move(finger, d)
            }
            "R" => Instruction::Rotate(finger),
            "A" => Instruction::Access(finger),
            _ => return Err(bad("unknown instruction")),
        };
        if it.next().is_some() {
            return Err(bad("trailing tokens"));
        }
        out.push(ins);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// The machine.

/// A BST with k movable fingers. Fingers are key-identified: rotations
/// rearrange nodes but never detach a finger from its key. Every
/// instruction costs one unit; the ledger records one entry per
/// declared access (its moves and rotations plus one).
#[derive(Clone, Debug)]
pub struct KFingerMachine {
    tree: SearchTree,
    fingers: Vec<Key>,
    ledger: CostLedger,
    pending: usize,
    accessed: Vec<Key>,
}

impl KFingerMachine {
    /// All fingers start at the root.
    pub fn new(tree0: &SearchTree, k: usize) -> Result<KFingerMachine> {
        if k == 0 {
            return Err(Error::invalid("need at least one finger"));
        }
        Ok(KFingerMachine {
            fingers: vec![tree0.root_key(); k],
            tree: tree0.clone(),
            ledger: CostLedger::new(),
            pending: 0,
            accessed: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.fingers.len()
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn fingers(&self) -> &[Key] {
        &self.fingers
    }

    /// Keys declared accessed so far, in order.
    pub fn accessed(&self) -> &[Key] {
        &self.accessed
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    /// Total instructions executed.
    pub fn total_cost(&self) -> usize {
        self.ledger.total() + self.pending
    }

    fn finger_node(&self, i: usize) -> Result<(usize, NodeId)> {
        if i == 0 || i > self.fingers.len() {
            return Err(Error::invalid(format!("no finger {i}")));
        }
        let id = self
            .tree
            .find(self.fingers[i - 1])
            .expect("finger keys stay present");
        Ok((i - 1, id))
    }

    pub fn step(&mut self, ins: Instruction) -> Result<()> {
        match ins {
            Instruction::Move(i, d) => {
                let (f, id) = self.finger_node(i)?;
                let to = match d {
                    Direction::Parent => self.tree.parent(id),
                    Direction::Left => self.tree.left(id),
                    Direction::Right => self.tree.right(id),
                };
                let to = to.ok_or_else(|| {
                    Error::invalid(format!("finger {i} has no {d:?} neighbor"))
                })?;
                self.fingers[f] = self.tree.key_of(to);
                self.pending += 1;
            }
            Instruction::Rotate(i) => {
                let (_, id) = self.finger_node(i)?;
                self.tree.rotate_id(id)?;
                self.pending += 1;
            }
            Instruction::Access(i) => {
                let (f, _) = self.finger_node(i)?;
                self.accessed.push(self.fingers[f]);
                self.ledger.push(self.pending + 1);
                self.pending = 0;
            }
        }
        Ok(())
    }

    pub fn run(&mut self, trace: &[Instruction]) -> Result<()> {
        for &ins in trace {
            self.step(ins)?;
        }
        Ok(())
    }

    /// Run a trace and check that its declared accesses spell exactly
    /// `seq`.
    pub fn run_access_sequence(
        &mut self,
        trace: &[Instruction],
        seq: &AccessSequence,
    ) -> Result<()> {
        let before = self.accessed.len();
        self.run(trace)?;
        let declared = &self.accessed[before..];
        if declared.len() != seq.m()
            || declared
                .iter()
                .zip(seq.keys())
                .any(|(&k, &s)| k != Key::from(s))
        {
            return Err(Error::invalid("declared accesses do not match the sequence"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Hand decomposition.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Elements less than the tendon's lower endpoint.
    Less,
    /// Elements greater than the tendon's lower endpoint.
    Greater,
}

/// Half of a tendon: the elements of a pseudofinger-to-pseudofinger
/// path lying on one side of the path's lower endpoint, viewed as the
/// key interval `[lo, hi]`. `elements` is sorted ascending, which is
/// also the bottom-up path order for the Less half and the top-down
/// order for the Greater half.
#[derive(Clone, Debug)]
pub struct HalfTendon {
    pub lo: Key,
    pub hi: Key,
    pub orientation: Orientation,
    pub elements: Vec<Key>,
}

/// One interval of the extended hand.
#[derive(Clone, Copy, Debug)]
pub struct HandInterval {
    pub lo: Key,
    pub hi: Key,
    pub pseudofinger: bool,
}

/// The extended hand of `(tree, fingers)`: pseudofingers, half
/// tendons, their ordered merge, and where each knuckle hangs.
#[derive(Clone, Debug)]
pub struct Hand {
    /// Fingers plus branch nodes of their Steiner tree, sorted.
    pub pseudofingers: Vec<Key>,
    pub half_tendons: Vec<HalfTendon>,
    /// All intervals (pseudofingers and half tendons), sorted and
    /// pairwise disjoint.
    pub extended: Vec<HandInterval>,
    /// `(knuckle root, its parent in the Steiner tree)`, sorted by root.
    pub knuckles: Vec<(Key, Key)>,
}

/// Decompose `tree` around `fingers` (which must include the root).
/// The result satisfies, and asserts, the structural facts: at most
/// `2k` pseudofingers and `6k` intervals for `k` distinct fingers,
/// pairwise disjoint intervals, and the intervals partition the
/// Steiner tree's key set.
pub fn compute_hand(tree: &SearchTree, fingers: &[Key]) -> Result<Hand> {
    if fingers.is_empty() {
        return Err(Error::invalid("need at least one finger"));
    }
    let mut finger_ids = Vec::new();
    for &f in fingers {
        finger_ids.push(
            tree.find(f)
                .ok_or_else(|| Error::invalid(format!("finger key {f} absent")))?,
        );
    }
    if !fingers.contains(&tree.root_key()) {
        return Err(Error::invalid("the root must be among the fingers"));
    }
    finger_ids.sort_unstable();
    finger_ids.dedup();
    let k = finger_ids.len();

    // Steiner tree: union of the fingers' root paths
    let mut steiner: HashSet<NodeId> = HashSet::new();
    for &f in &finger_ids {
        let mut cur = Some(f);
        while let Some(id) = cur {
            if !steiner.insert(id) {
                break;
            }
            cur = tree.parent(id);
        }
    }

    let finger_set: HashSet<NodeId> = finger_ids.iter().copied().collect();
    let in_s = |x: Option<NodeId>| x.is_some_and(|id| steiner.contains(&id));
    let mut pseudo_ids: Vec<NodeId> = steiner
        .iter()
        .copied()
        .filter(|&id| finger_set.contains(&id) || (in_s(tree.left(id)) && in_s(tree.right(id))))
        .collect();
    pseudo_ids.sort_by_key(|&id| tree.key_of(id));
    let pseudo_set: HashSet<NodeId> = pseudo_ids.iter().copied().collect();
    assert!(pseudo_ids.len() <= 2 * k, "more than 2k pseudofingers");

    // one tendon per pseudofinger that has another pseudofinger above it
    let mut half_tendons = Vec::new();
    for &y in &pseudo_ids {
        let ykey = tree.key_of(y);
        let mut path = Vec::new();
        let mut cur = tree.parent(y);
        let mut found_upper = false;
        while let Some(id) = cur {
            if pseudo_set.contains(&id) {
                found_upper = true;
                break;
            }
            debug_assert!(steiner.contains(&id));
            path.push(tree.key_of(id));
            cur = tree.parent(id);
        }
        if !found_upper {
            debug_assert!(path.is_empty(), "the top pseudofinger is not the highest");
            continue;
        }
        for orientation in [Orientation::Less, Orientation::Greater] {
            let mut elements: Vec<Key> = path
                .iter()
                .copied()
                .filter(|&t| match orientation {
                    Orientation::Less => t < ykey,
                    Orientation::Greater => t > ykey,
                })
                .collect();
            if elements.is_empty() {
                continue;
            }
            elements.sort();
            half_tendons.push(HalfTendon {
                lo: elements[0],
                hi: *elements.last().unwrap(),
                orientation,
                elements,
            });
        }
    }

    let mut extended: Vec<HandInterval> = pseudo_ids
        .iter()
        .map(|&id| HandInterval {
            lo: tree.key_of(id),
            hi: tree.key_of(id),
            pseudofinger: true,
        })
        .chain(half_tendons.iter().map(|t| HandInterval {
            lo: t.lo,
            hi: t.hi,
            pseudofinger: false,
        }))
        .collect();
    extended.sort_by_key(|iv| iv.lo);
    for w in extended.windows(2) {
        assert!(w[0].hi < w[1].lo, "extended hand intervals overlap");
    }
    assert!(extended.len() <= 6 * k, "more than 6k hand intervals");

    // the intervals partition the Steiner tree's keys
    let covered =
        pseudo_ids.len() + half_tendons.iter().map(|t| t.elements.len()).sum::<usize>();
    assert_eq!(covered, steiner.len(), "hand does not partition the Steiner tree");

    let mut knuckles = Vec::new();
    for &id in &steiner {
        for child in [tree.left(id), tree.right(id)].into_iter().flatten() {
            if !steiner.contains(&child) {
                knuckles.push((tree.key_of(child), tree.key_of(id)));
            }
        }
    }
    knuckles.sort_by_key(|&(r, _)| r);

    Ok(Hand {
        pseudofingers: pseudo_ids.iter().map(|&id| tree.key_of(id)).collect(),
        half_tendons,
        extended,
        knuckles,
    })
}

// ---------------------------------------------------------------------------
// DequeBST.

/// A deque in the BST model: a root with two monotone chains, the left
/// chain holding the smaller half with the minimum on top and the
/// right chain the larger half with the maximum on top. Pushes and
/// pops at either end cost O(1) rotations amortized; when one chain
/// empties, the other is split at its middle, paid for by the
/// `|len1 - len2|` potential.
#[derive(Clone, Debug, Default)]
pub struct DequeBST {
    tree: Option<SearchTree>,
    /// Total rotations performed by all operations so far.
    pub rotations: usize,
}

impl DequeBST {
    pub fn new() -> DequeBST {
        DequeBST::default()
    }

    pub fn len(&self) -> usize {
        self.tree.as_ref().map_or(0, |t| t.len())
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_none()
    }

    /// Contents in key order.
    pub fn keys(&self) -> Vec<Key> {
        self.tree.as_ref().map_or(Vec::new(), |t| t.inorder_keys())
    }

    fn rotate(&mut self, key: Key) {
        self.tree
            .as_mut()
            .unwrap()
            .rotate(key)
            .expect("legal rotation");
        self.rotations += 1;
    }

    pub fn push_min(&mut self, key: Key) -> Result<()> {
        match &mut self.tree {
            None => self.tree = Some(SearchTree::singleton(key)),
            Some(t) => {
                if key >= t.inorder_keys()[0] {
                    return Err(Error::invalid("push_min key is not a new minimum"));
                }
                let root = t.root_id();
                let root_key = t.key_of(root);
                let nn = t.try_new_node(key)?;
                t.link_right(nn, root);
                t.set_root(nn);
                // swing the old root back on top; the new key becomes
                // the left chain's top
                self.rotate(root_key);
            }
        }
        Ok(())
    }

    pub fn push_max(&mut self, key: Key) -> Result<()> {
        match &mut self.tree {
            None => self.tree = Some(SearchTree::singleton(key)),
            Some(t) => {
                if key <= *t.inorder_keys().last().unwrap() {
                    return Err(Error::invalid("push_max key is not a new maximum"));
                }
                let root = t.root_id();
                let root_key = t.key_of(root);
                let nn = t.try_new_node(key)?;
                t.link_left(nn, root);
                t.set_root(nn);
                self.rotate(root_key);
            }
        }
        Ok(())
    }

    /// Rebuild a bare chain (the state after one side emptied) into the
    /// two-chain shape, split at the middle.
    fn rebalance(&mut self) {
        let keys = self.keys();
        let q = keys.len();
        if q < 2 {
            return;
        }
        let root_key = {
            let t = self.tree.as_ref().unwrap();
            t.key_of(t.root_id())
        };
        if root_key == keys[q - 1] {
            // descending left-leaning chain: reverse into an ascending vine
            for &k in keys[..q - 1].iter().rev() {
                self.rotate(k);
            }
        }
        let mid = q / 2;
        // lift the middle; the prefix folds into a min-topped chain
        loop {
            let t = self.tree.as_ref().unwrap();
            let id = t.find(keys[mid]).unwrap();
            if t.parent(id).is_none() {
                break;
            }
            self.rotate(keys[mid]);
        }
        // fold the suffix into a max-topped chain
        for &k in keys.iter().skip(mid + 2) {
            self.rotate(k);
        }
    }

    pub fn pop_min(&mut self) -> Result<Key> {
        let t = self
            .tree
            .as_mut()
            .ok_or_else(|| Error::invalid("pop from an empty deque"))?;
        if t.len() == 1 {
            let k = t.root_key();
            self.tree = None;
            return Ok(k);
        }
        let root = t.root_id();
        match t.left(root) {
            Some(m) => {
                let k = t.key_of(m);
                self.rotate(k);
                let t = self.tree.as_mut().unwrap();
                let id = t.find(k).unwrap();
                t.splice_out(id)?;
                Ok(k)
            }
            None => {
                // the root is the minimum; only the right chain remains
                let k = t.key_of(root);
                t.splice_out(root)?;
                self.rebalance();
                Ok(k)
            }
        }
    }

    pub fn pop_max(&mut self) -> Result<Key> {
        let t = self
            .tree
            .as_mut()
            .ok_or_else(|| Error::invalid("pop from an empty deque"))?;
        if t.len() == 1 {
            let k = t.root_key();
            self.tree = None;
            return Ok(k);
        }
        let root = t.root_id();
        match t.right(root) {
            Some(m) => {
                let k = t.key_of(m);
                self.rotate(k);
                let t = self.tree.as_mut().unwrap();
                let id = t.find(k).unwrap();
                t.splice_out(id)?;
                Ok(k)
            }
            None => {
                let k = t.key_of(root);
                t.splice_out(root)?;
                self.rebalance();
                Ok(k)
            }
        }
    }

    /// Check the two-chain shape; used by tests.
    pub fn shape_ok(&self) -> bool {
        let Some(t) = &self.tree else { return true };
        let root = t.root_id();
        let mut cur = t.left(root);
        while let Some(id) = cur {
            if t.left(id).is_some() {
                return false;
            }
            cur = t.right(id);
        }
        let mut cur = t.right(root);
        while let Some(id) = cur {
            if t.right(id).is_some() {
                return false;
            }
            cur = t.left(id);
        }
        true
    }
}

// ---------------------------------------------------------------------------
// The simulator.

/// When the simulator rebuilds its balanced top structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RebalancePolicy {
    /// Rebuild only when some pseudofinger's depth crosses the
    /// `4*log2(k+1) + 4` line; amortizes into the O(log k) budget.
    OnViolation,
    /// Rebuild whenever the pseudofinger set changes. Simple, but the
    /// per-step cost is O(k) rather than O(log k).
    OnPseudofingerChange,
}

#[derive(Clone, Debug)]
pub struct SimulationReport {
    pub n: usize,
    pub k: usize,
    pub machine_cost: usize,
    pub simulated_cost: usize,
    pub ratio: f64,
    /// `16 * log2(k+1) * machine_cost + 16 * n`.
    pub budget: f64,
    pub within_budget: bool,
    pub max_pseudofinger_depth: usize,
    /// The hard per-step depth line `4*log2(k+1) + 4`.
    pub depth_bound: f64,
    pub rebuilds: usize,
}

/// Depth line pseudofingers must stay above after every machine step.
pub fn pseudofinger_depth_bound(k: usize) -> f64 {
    4.0 * ((k + 1) as f64).log2() + 4.0
}

/// Live bookkeeping for one half tendon's subtree: the gadget root
/// `elements[0]`, its right child `elements[last]`, and the interior
/// deque below. Stack vectors keep their tops last; the left stack's
/// top is the interior minimum, the right stack's top its maximum.
#[derive(Clone, Debug)]
struct TendonState {
    orientation: Orientation,
    elements: Vec<Key>,
    left_stack: Vec<Key>,
    right_stack: Vec<Key>,
    dq_root: Option<Key>,
}

impl TendonState {
    fn fresh(orientation: Orientation) -> TendonState {
        TendonState {
            orientation,
            elements: Vec::new(),
            left_stack: Vec::new(),
            right_stack: Vec::new(),
            dq_root: None,
        }
    }

    fn span(&self) -> (Key, Key) {
        (self.elements[0], *self.elements.last().unwrap())
    }
}

struct Simulator {
    t: SearchTree,
    k: usize,
    bound: f64,
    policy: RebalancePolicy,
    cost: usize,
    rebuilds: usize,
    max_depth: usize,
    tendons: Vec<TendonState>,
}

impl Simulator {
    fn rotate(&mut self, key: Key) {
        self.t.rotate(key).expect("legal rotation");
        self.cost += 1;
    }

    fn depth(&self, key: Key) -> usize {
        self.t.depth(key).expect("key present")
    }

    /// Rotate `key` to the root of the simulated tree.
    fn lift_to_root(&mut self, key: Key) {
        let id = self.t.find(key).expect("key present");
        while self.t.parent(id).is_some() {
            self.t.rotate_id(id).expect("not the root");
            self.cost += 1;
        }
    }

    /// Rotate `key` upward until its parent is the node holding `under`.
    fn lift_below(&mut self, key: Key, under: Key) {
        let id = self.t.find(key).expect("key present");
        let pid = self.t.find(under).expect("key present");
        while self.t.parent(id) != Some(pid) {
            self.t.rotate_id(id).expect("not the root");
            self.cost += 1;
        }
    }

    /// Lift the gadget pair `lo` (whose right child is `hi`, with the
    /// deque hanging below) until `lo`'s parent is the node holding
    /// `under`. A plain lift would hand `lo`'s right subtree to every
    /// larger rotation partner; re-rotating `hi` right after each such
    /// rise restores the pair edge, so the deque is never exposed.
    fn lift_pair_below(&mut self, lo: Key, hi: Key, under: Key) {
        let lo_id = self.t.find(lo).expect("key present");
        let under_id = self.t.find(under).expect("key present");
        while self.t.parent(lo_id) != Some(under_id) {
            let v = self.t.parent(lo_id).expect("under is an ancestor");
            let leftward = self.t.key_of(v) > lo;
            self.rotate(lo);
            if leftward {
                self.rotate(hi);
            }
        }
    }

    /// Bring the loose key `x` to the root and the gadget of `st`
    /// directly below it, keeping the gadget's edges intact.
    fn stage_push(&mut self, st: &TendonState, x: Key) {
        self.lift_to_root(x);
        let (g, hi) = st.span();
        if st.elements.len() >= 2 {
            self.lift_pair_below(g, hi, x);
        } else {
            self.lift_below(g, x);
        }
    }

    // -- deque operations on a tendon's gadget ---------------------------

    /// Rebuild the interior chain after a stack emptied, splitting it
    /// at the middle.
    fn rebalance_interior(&mut self, st: &mut TendonState) {
        let interior: Vec<Key> = st.elements[1..st.elements.len() - 1].to_vec();
        let q = interior.len();
        st.left_stack.clear();
        st.right_stack.clear();
        if q == 0 {
            st.dq_root = None;
            return;
        }
        if q == 1 {
            st.dq_root = Some(interior[0]);
            return;
        }
        let hi = *st.elements.last().unwrap();
        // reverse a descending chain into an ascending vine first
        let top = {
            let hi_id = self.t.find(hi).unwrap();
            let dq = self.t.left(hi_id).expect("interior nonempty");
            self.t.key_of(dq)
        };
        if top == interior[q - 1] {
            for &k in interior[..q - 1].iter().rev() {
                self.rotate(k);
            }
        } else {
            debug_assert_eq!(top, interior[0], "interior is not a chain");
        }
        let mid = q / 2;
        self.lift_below(interior[mid], hi);
        for &k in interior.iter().skip(mid + 2) {
            self.rotate(k);
        }
        st.dq_root = Some(interior[mid]);
        st.left_stack = interior[..mid].iter().rev().copied().collect();
        st.right_stack = interior[mid + 1..].to_vec();
    }

    /// Remove the tendon's minimum; the removed node ends up floating
    /// directly above the shrunk gadget.
    fn tendon_pop_min(&mut self, st: &mut TendonState) {
        match st.elements.len() {
            0 => unreachable!("pop from an empty tendon"),
            1 | 2 => {
                // the gadget root already sits above the remainder
                st.elements.remove(0);
            }
            _ => {
                let (m, needs_rebalance) = match st.left_stack.pop() {
                    Some(top) => (top, false),
                    None => (st.dq_root.take().expect("interior nonempty"), true),
                };
                if !needs_rebalance {
                    self.rotate(m); // above the deque root
                }
                self.rotate(m); // above the old right child: m heads the gadget
                st.elements.remove(0);
                if needs_rebalance {
                    self.rebalance_interior(st);
                }
            }
        }
    }

    /// Remove the tendon's maximum; the removed node ends up floating
    /// directly above the shrunk gadget.
    fn tendon_pop_max(&mut self, st: &mut TendonState) {
        match st.elements.len() {
            0 => unreachable!("pop from an empty tendon"),
            1 => {
                st.elements.pop();
            }
            2 => {
                let hi = st.elements.pop().unwrap();
                self.rotate(hi);
            }
            _ => {
                let hi = st.elements.pop().unwrap();
                self.rotate(hi); // the old maximum floats above the gadget
                match st.right_stack.pop() {
                    Some(top) => {
                        debug_assert_eq!(Some(&top), st.elements.last());
                        self.rotate(top); // above the deque root: new right child
                    }
                    None => {
                        // the deque root was the maximum and is in place
                        st.dq_root.take().expect("interior nonempty");
                        self.rebalance_interior(st);
                    }
                }
            }
        }
    }

    /// Insert `x`, currently loose, as the tendon's new minimum.
    fn tendon_push_min(&mut self, st: &mut TendonState, x: Key) {
        let n = st.elements.len();
        if n == 0 {
            st.elements.push(x);
            return;
        }
        let g = st.elements[0];
        self.stage_push(st, x);
        if n >= 2 {
            let hi = *st.elements.last().unwrap();
            self.rotate(hi); // the old root folds under the right child
            if n >= 3 {
                let r = st.dq_root.expect("interior nonempty");
                st.left_stack.push(g);
                self.rotate(r); // old root becomes the interior minimum
            } else {
                st.dq_root = Some(g);
            }
        }
        st.elements.insert(0, x);
    }

    /// Insert `x`, currently loose, as the tendon's new maximum.
    fn tendon_push_max(&mut self, st: &mut TendonState, x: Key) {
        let n = st.elements.len();
        if n == 0 {
            st.elements.push(x);
            return;
        }
        let g = st.elements[0];
        self.stage_push(st, x);
        self.rotate(g); // the gadget root comes back on top, x at its right
        if n >= 2 {
            let old_hi = st.elements[n - 1];
            if n >= 3 {
                let r = st.dq_root.expect("interior nonempty");
                st.right_stack.push(old_hi);
                self.rotate(r); // old right child becomes the interior maximum
            } else {
                st.dq_root = Some(old_hi);
            }
        }
        st.elements.push(x);
    }

    // -- top structure ----------------------------------------------------

    fn deepest_pseudofinger(&self, hand: &Hand) -> usize {
        hand.pseudofingers
            .iter()
            .map(|&p| self.depth(p))
            .max()
            .unwrap_or(0)
    }

    /// Rebuild the top structure: a balanced tree over the extended
    /// hand's intervals, each half tendon contributing its gadget pair
    /// with the deque interior untouched below it.
    fn rebuild_top(&mut self, hand: &Hand) {
        self.rebuilds += 1;
        // target shape as (key, parent slot), parents always first
        let mut shape: Vec<(Key, usize)> = Vec::new();
        fn build(intervals: &[HandInterval], parent: usize, shape: &mut Vec<(Key, usize)>) {
            if intervals.is_empty() {
                return;
            }
            let mid = intervals.len() / 2;
            let iv = intervals[mid];
            let id = shape.len();
            shape.push((iv.lo, parent));
            let right_parent = if iv.hi != iv.lo {
                shape.push((iv.hi, id));
                id + 1
            } else {
                id
            };
            build(&intervals[..mid], id, shape);
            build(&intervals[mid + 1..], right_parent, shape);
        }
        build(&hand.extended, usize::MAX, &mut shape);
        for i in 0..shape.len() {
            let (key, parent) = shape[i];
            if parent == usize::MAX {
                self.lift_to_root(key);
            } else {
                self.lift_below(key, shape[parent].0);
            }
        }
    }

    /// Update the maintained tree after one machine step moved the
    /// hand to `new`. Each surviving half tendon is paired with the
    /// old state it shares the most elements with; everything else is
    /// popped loose first and pushed back where it now belongs. A
    /// single step only ever moves a few elements, which the churn
    /// assertion enforces.
    fn apply_hand_change(&mut self, new: &Hand) {
        let mut old_states = std::mem::take(&mut self.tendons);
        let mut churn = 0usize;

        let targets: Vec<HashSet<Key>> = new
            .half_tendons
            .iter()
            .map(|ht| ht.elements.iter().copied().collect())
            .collect();
        let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
        for (j, ht) in new.half_tendons.iter().enumerate() {
            for (i, st) in old_states.iter().enumerate() {
                if st.orientation != ht.orientation {
                    continue;
                }
                let shared = st
                    .elements
                    .iter()
                    .filter(|k| targets[j].contains(k))
                    .count();
                if shared > 0 {
                    pairs.push((shared, j, i));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut ht_state: Vec<Option<usize>> = vec![None; new.half_tendons.len()];
        let mut claimed = vec![false; old_states.len()];
        for (_, j, i) in pairs {
            if ht_state[j].is_none() && !claimed[i] {
                ht_state[j] = Some(i);
                claimed[i] = true;
            }
        }

        // pops first so transferred elements are loose when pushed
        for (j, _) in new.half_tendons.iter().enumerate() {
            let Some(i) = ht_state[j] else { continue };
            let st = &mut old_states[i];
            loop {
                let (lo, hi) = st.span();
                if !targets[j].contains(&lo) {
                    self.tendon_pop_min(st);
                } else if !targets[j].contains(&hi) {
                    self.tendon_pop_max(st);
                } else {
                    break;
                }
                churn += 1;
            }
        }
        for (i, st) in old_states.iter_mut().enumerate() {
            if claimed[i] {
                continue;
            }
            while !st.elements.is_empty() {
                self.tendon_pop_min(st);
                churn += 1;
            }
        }

        let mut next = Vec::with_capacity(new.half_tendons.len());
        for (j, ht) in new.half_tendons.iter().enumerate() {
            let mut st = match ht_state[j] {
                Some(i) => {
                    std::mem::replace(&mut old_states[i], TendonState::fresh(ht.orientation))
                }
                None => TendonState::fresh(ht.orientation),
            };
            let have: HashSet<Key> = st.elements.iter().copied().collect();
            let missing: Vec<Key> = ht
                .elements
                .iter()
                .copied()
                .filter(|k| !have.contains(k))
                .collect();
            if st.elements.is_empty() {
                for &x in &missing {
                    self.tendon_push_max(&mut st, x);
                    churn += 1;
                }
            } else {
                let (lo, hi) = st.span();
                for &x in missing.iter().rev().filter(|&&x| x < lo) {
                    self.tendon_push_min(&mut st, x);
                    churn += 1;
                }
                for &x in missing.iter().filter(|&&x| x > hi) {
                    self.tendon_push_max(&mut st, x);
                    churn += 1;
                }
            }
            assert_eq!(st.elements, ht.elements, "tendon update left a gap");
            next.push(st);
        }
        assert!(churn <= 16, "hand changed by more than a few elements in one step");
        self.tendons = next;
        #[cfg(debug_assertions)]
        self.check_tendons();
    }

    /// Verify each tendon's physical shape: gadget root over right
    /// child, the deque root at the right child's left, and chain
    /// edges matching the logical stacks.
    #[cfg(debug_assertions)]
    fn check_tendons(&self) {
        for st in &self.tendons {
            let n = st.elements.len();
            if n < 2 {
                continue;
            }
            let lo = self.t.find(st.elements[0]).unwrap();
            let hi = self.t.find(st.elements[n - 1]).unwrap();
            assert_eq!(self.t.right(lo), Some(hi), "gadget edge broken");
            if n == 2 {
                continue;
            }
            let r = self.t.find(st.dq_root.unwrap()).unwrap();
            assert_eq!(self.t.left(hi), Some(r), "deque root misplaced");
            let mut cur = r;
            let mut first = true;
            for &k in st.left_stack.iter().rev() {
                let id = self.t.find(k).unwrap();
                let step = if first { self.t.left(cur) } else { self.t.right(cur) };
                assert_eq!(step, Some(id), "left chain broken");
                cur = id;
                first = false;
            }
            let mut cur = r;
            let mut first = true;
            for &k in st.right_stack.iter().rev() {
                let id = self.t.find(k).unwrap();
                let step = if first { self.t.right(cur) } else { self.t.left(cur) };
                assert_eq!(step, Some(id), "right chain broken");
                cur = id;
                first = false;
            }
        }
    }
}

/// Simulate a machine trace with an ordinary BST under the default
/// rebuild-on-violation policy. Returns the simulating tree's
/// per-access ledger and the overhead report.
pub fn simulate(
    trace: &[Instruction],
    tree0: &SearchTree,
    k: usize,
) -> Result<(CostLedger, SimulationReport)> {
    simulate_with(trace, tree0, k, RebalancePolicy::OnViolation)
}

pub fn simulate_with(
    trace: &[Instruction],
    tree0: &SearchTree,
    k: usize,
    policy: RebalancePolicy,
) -> Result<(CostLedger, SimulationReport)> {
    let mut machine = KFingerMachine::new(tree0, k)?;
    let mut sim = Simulator {
        t: tree0.clone(),
        k,
        bound: pseudofinger_depth_bound(k),
        policy,
        cost: 0,
        rebuilds: 0,
        max_depth: 0,
        tendons: Vec::new(),
    };
    let n = tree0.len();
    let mut ledger = CostLedger::new();
    let mut pool = 0usize;
    let fingers_with_root = |m: &KFingerMachine| {
        let mut f: Vec<Key> = m.fingers().to_vec();
        f.push(m.tree().root_key());
        f.sort();
        f.dedup();
        f
    };
    let mut hand = compute_hand(machine.tree(), &fingers_with_root(&machine))?;
    for &ins in trace {
        let before = sim.cost;
        let old_pseudo = std::mem::take(&mut hand.pseudofingers);
        machine.step(ins)?;
        hand = compute_hand(machine.tree(), &fingers_with_root(&machine))?;
        sim.apply_hand_change(&hand);
        let changed = old_pseudo != hand.pseudofingers;
        let violated = sim.deepest_pseudofinger(&hand) as f64 > sim.bound;
        if violated || (sim.policy == RebalancePolicy::OnPseudofingerChange && changed) {
            sim.rebuild_top(&hand);
        }
        let deepest = sim.deepest_pseudofinger(&hand);
        assert!(
            (deepest as f64) <= sim.bound,
            "pseudofinger at depth {deepest} exceeds the bound {}",
            sim.bound
        );
        sim.max_depth = sim.max_depth.max(deepest);
        pool += sim.cost - before;
        if let Instruction::Access(i) = ins {
            let key = machine.fingers()[i - 1];
            let d = sim.depth(key);
            pool += d + 1;
            sim.cost += d + 1;
            ledger.push(pool);
            pool = 0;
        }
    }
    let machine_cost = machine.total_cost();
    let simulated_cost = sim.cost;
    let budget = 16.0 * ((k + 1) as f64).log2() * machine_cost as f64 + 16.0 * n as f64;
    let report = SimulationReport {
        n,
        k: sim.k,
        machine_cost,
        simulated_cost,
        ratio: if machine_cost > 0 {
            simulated_cost as f64 / machine_cost as f64
        } else {
            0.0
        },
        within_budget: (simulated_cost as f64) <= budget,
        budget,
        max_pseudofinger_depth: sim.max_depth,
        depth_bound: sim.bound,
        rebuilds: sim.rebuilds,
    };
    Ok((ledger, report))
}

// ---------------------------------------------------------------------------
// Finger strategies.

/// Largest strategy space `k^m` that [`optimal_strategy`] will search.
pub const STRATEGY_SEARCH_LIMIT: u64 = 4_000_000;

/// Exhaustively optimal finger assignment for serving `seq` on the
/// static `tree` with `k` fingers and free initial placement: returns
/// the per-access finger choice and its cost, the sum of
/// `1 + distance` over the accesses.
pub fn optimal_strategy(
    tree: &SearchTree,
    seq: &AccessSequence,
    k: usize,
) -> Result<(Vec<usize>, u64)> {
    if k == 0 {
        return Err(Error::invalid("need at least one finger"));
    }
    let m = seq.m();
    let space = (k as u64).checked_pow(m as u32);
    if space.map_or(true, |s| s > STRATEGY_SEARCH_LIMIT) {
        return Err(Error::guard(format!(
            "strategy space {k}^{m} exceeds {STRATEGY_SEARCH_LIMIT}"
        )));
    }
    let n = seq.n();
    let mut dist = vec![vec![0usize; n + 1]; n + 1];
    for a in 1..=n {
        for b in a + 1..=n {
            let d = tree.distance(Key::from(a), Key::from(b))?;
            dist[a][b] = d;
            dist[b][a] = d;
        }
    }
    let mut best: Option<(Vec<usize>, u64)> = None;
    let mut assign = vec![0usize; m];
    loop {
        let mut pos: Vec<Option<usize>> = vec![None; k];
        let mut cost = 0u64;
        for (j, &s) in seq.keys().iter().enumerate() {
            let f = assign[j];
            cost += 1 + pos[f].map_or(0, |p| dist[p][s]) as u64;
            pos[f] = Some(s);
        }
        if best.as_ref().map_or(true, |(_, c)| cost < *c) {
            best = Some((assign.clone(), cost));
        }
        let mut j = 0;
        while j < m {
            assign[j] += 1;
            if assign[j] < k {
                break;
            }
            assign[j] = 0;
            j += 1;
        }
        if j == m {
            break;
        }
    }
    Ok(best.expect("at least one assignment"))
}

/// Turn a finger assignment into a machine trace: each access walks
/// its finger along the tree path to the key, then declares the
/// access. Fingers start at the root per the machine convention.
pub fn strategy_trace(
    tree: &SearchTree,
    seq: &AccessSequence,
    assignment: &[usize],
    k: usize,
) -> Result<Vec<Instruction>> {
    if assignment.len() != seq.m() {
        return Err(Error::invalid("assignment length must match the sequence"));
    }
    if assignment.iter().any(|&f| f >= k) {
        return Err(Error::invalid("assignment names a finger out of range"));
    }
    let mut fingers = vec![tree.root_key(); k];
    let mut trace = Vec::new();
    for (&s, &f) in seq.keys().iter().zip(assignment) {
        let target = Key::from(s);
        let from = tree.find(fingers[f]).expect("finger key present");
        let to = tree
            .find(target)
            .ok_or_else(|| Error::invalid(format!("key {target} absent")))?;
        let lca = tree.lca(from, to);
        let mut cur = from;
        while cur != lca {
            trace.push(Instruction::Move(f + 1, Direction::Parent));
            cur = tree.parent(cur).unwrap();
        }
        while cur != to {
            let ck = tree.key_of(cur);
            let (dir, next) = if target < ck {
                (Direction::Left, tree.left(cur).unwrap())
            } else {
                (Direction::Right, tree.right(cur).unwrap())
            };
            trace.push(Instruction::Move(f + 1, dir));
            cur = next;
        }
        trace.push(Instruction::Access(f + 1));
        fingers[f] = target;
    }
    Ok(trace)
}

/// Random legal machine trace for tests: fingers wander, rotate, and
/// declare accesses.
pub fn random_trace(
    tree0: &SearchTree,
    k: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<Instruction>> {
    let mut machine = KFingerMachine::new(tree0, k)?;
    let mut r = crate::seeding::rng(seed);
    let mut trace = Vec::with_capacity(steps);
    for _ in 0..steps {
        let i = 1 + r.gen_range(0..k);
        let ins = match r.gen_range(0..8) {
            0 => Instruction::Access(i),
            1 => Instruction::Rotate(i),
            _ => {
                let d = match r.gen_range(0..4) {
                    0 | 1 => Direction::Parent,
                    2 => Direction::Left,
                    _ => Direction::Right,
                };
                Instruction::Move(i, d)
            }
        };
        if machine.step(ins).is_ok() {
            trace.push(ins);
        }
    }
    Ok(trace)
}
