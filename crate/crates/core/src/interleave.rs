//! Time-interleaved execution of composed sequences.
//!
//! A sequence over `[n]` splits along an interval partition into part
//! sequences and a template recording which interval each access hits.
//! [`composed_execute`] runs an executor on every part and on the
//! template, then stitches the executions into one run on a single tree
//! whose total cost is at most `sum_i cost(part_i) + 3 * cost(template)`.
//! The stitching tree keeps the template's keys as an upper skeleton of
//! auxiliary rational keys (via [`leaves_tripling`]) with one part
//! subtree hanging below each template leaf; [`eliminate_auxiliary`]
//! then removes the rationals one at a time without ever increasing a
//! per-access cost, landing back on a plain run over `[n]`.
//!
//! Executions are [`ExecutionTrace`] values: an initial tree plus one
//! step per access. A step witnesses its rearrangement either by a
//! rotation list (compact, replayable) or by an explicit snapshot of
//! the tree after the access (used by auxiliary elimination, whose
//! rearrangements are not rotation scripts). [`ExecutionTrace::validate`]
//! replays a trace and checks the model rules: every touched set is a
//! connected region containing the root and the accessed key, and each
//! step rearranges only touched nodes.

use std::collections::{HashMap, HashSet};

use crate::algorithms::{mtr_access_logged, splay_access_logged, CostLedger};
use crate::error::{Error, Result};
use crate::key::Key;
use crate::sequences::{decompose, AccessSequence};
use crate::tree::{assemble, NodeId, SearchTree};

/// A tree-restructuring executor usable as a part or template algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Splay,
    MoveToRoot,
}

impl Algorithm {
    fn access(self, tree: &mut SearchTree, key: Key, log: &mut Vec<Key>) -> Result<usize> {
        match self {
            Algorithm::Splay => splay_access_logged(tree, key, log),
            Algorithm::MoveToRoot => mtr_access_logged(tree, key, log),
        }
    }

    /// Execute `accesses` from `tree0`, producing a rotation-witnessed
    /// trace.
    pub fn trace(self, tree0: &SearchTree, accesses: &[Key]) -> Result<ExecutionTrace> {
        let mut tree = tree0.clone();
        let mut steps = Vec::with_capacity(accesses.len());
        for &key in accesses {
            let touched: Vec<Key> = tree
                .search_path(key)?
                .into_iter()
                .map(|id| tree.key_of(id))
                .collect();
            let mut log = Vec::new();
            let cost = self.access(&mut tree, key, &mut log)?;
            debug_assert_eq!(cost, touched.len());
            steps.push(TraceStep {
                access: key,
                touched,
                body: StepBody::Rotations(log),
            });
        }
        Ok(ExecutionTrace {
            initial: tree0.clone(),
            steps,
        })
    }

    /// [`Algorithm::trace`] over an integer-keyed access sequence.
    pub fn trace_seq(self, tree0: &SearchTree, seq: &AccessSequence) -> Result<ExecutionTrace> {
        let keys: Vec<Key> = seq.keys().iter().map(|&s| Key::from(s)).collect();
        self.trace(tree0, &keys)
    }
}

/// Witness for one step's rearrangement.
#[derive(Clone, Debug)]
pub enum StepBody {
    /// Keys rotated above their parents, in order.
    Rotations(Vec<Key>),
    /// The tree after the access.
    Snapshot(SearchTree),
}

/// One access of an [`ExecutionTrace`].
#[derive(Clone, Debug)]
pub struct TraceStep {
    pub access: Key,
    /// Keys touched by this access; the step's cost is their number.
    pub touched: Vec<Key>,
    pub body: StepBody,
}

/// An execution: initial tree plus per-access touched sets and
/// rearrangement witnesses.
#[derive(Clone, Debug)]
pub struct ExecutionTrace {
    pub initial: SearchTree,
    pub steps: Vec<TraceStep>,
}

fn apply_step(tree: &mut SearchTree, step: &TraceStep) -> Result<()> {
    match &step.body {
        StepBody::Rotations(rs) => {
            for &r in rs {
                tree.rotate(r)?;
            }
        }
        StepBody::Snapshot(next) => *tree = next.clone(),
    }
    Ok(())
}

/// Key to (left, right) child keys, for structural diffs. A node whose
/// child links are intact did not act in a rearrangement even if a
/// rotation above it handed its whole subtree to a new parent, so
/// parent links are deliberately not compared.
fn shape_map(tree: &SearchTree) -> HashMap<Key, (Option<Key>, Option<Key>)> {
    let mut map = HashMap::with_capacity(tree.len());
    for id in tree.subtree_ids(tree.root_id()) {
        let of = |x: Option<NodeId>| x.map(|i| tree.key_of(i));
        map.insert(tree.key_of(id), (of(tree.left(id)), of(tree.right(id))));
    }
    map
}

impl ExecutionTrace {
    /// Total cost: one unit per touched node.
    pub fn cost(&self) -> usize {
        self.steps.iter().map(|s| s.touched.len()).sum()
    }

    pub fn ledger(&self) -> CostLedger {
        let mut ledger = CostLedger::new();
        for s in &self.steps {
            ledger.push(s.touched.len());
        }
        ledger
    }

    /// Trees before each access plus the final tree; `m + 1` entries.
    pub fn snapshots(&self) -> Result<Vec<SearchTree>> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(self.initial.clone());
        for step in &self.steps {
            let mut next = out.last().unwrap().clone();
            apply_step(&mut next, step)?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn final_tree(&self) -> Result<SearchTree> {
        let mut tree = self.initial.clone();
        for step in &self.steps {
            apply_step(&mut tree, step)?;
        }
        Ok(tree)
    }

    /// Replay the trace and check the execution model rules for every
    /// step: the touched set is duplicate-free, contains the accessed
    /// key, and is closed under parents (hence a connected region
    /// containing the root and the whole search path); rotations move
    /// only touched keys over touched keys; snapshot steps keep the key
    /// set and restructure touched keys only.
    pub fn validate(&self) -> Result<()> {
        self.initial.validate()?;
        let mut tree = self.initial.clone();
        for (t, step) in self.steps.iter().enumerate() {
            let fail = |msg: String| Err(Error::invalid(format!("step {t}: {msg}")));
            let touched: HashSet<Key> = step.touched.iter().copied().collect();
            if touched.len() != step.touched.len() {
                return fail("duplicate touched keys".into());
            }
            if !touched.contains(&step.access) {
                return fail(format!("access {} not touched", step.access));
            }
            for &k in &touched {
                let id = match tree.find(k) {
                    Some(id) => id,
                    None => return fail(format!("touched key {k} absent")),
                };
                if let Some(p) = tree.parent(id) {
                    if !touched.contains(&tree.key_of(p)) {
                        return fail(format!("touched set not parent-closed at {k}"));
                    }
                }
            }
            match &step.body {
                StepBody::Rotations(rs) => {
                    for &r in rs {
                        let id = tree
                            .find(r)
                            .ok_or_else(|| Error::invalid(format!("step {t}: rotating absent key {r}")))?;
                        let p = tree
                            .parent(id)
                            .ok_or_else(|| Error::invalid(format!("step {t}: rotating the root {r}")))?;
                        if !touched.contains(&r) || !touched.contains(&tree.key_of(p)) {
                            return fail(format!("rotation at {r} leaves the touched set"));
                        }
                        tree.rotate(r)?;
                    }
                }
                StepBody::Snapshot(next) => {
                    next.validate()?;
                    let before = shape_map(&tree);
                    let after = shape_map(next);
                    if before.len() != after.len()
                        || before.keys().any(|k| !after.contains_key(k))
                    {
                        return fail("snapshot changes the key set".into());
                    }
                    for (k, shape) in &before {
                        if after[k] != *shape && !touched.contains(k) {
                            return fail(format!("untouched key {k} was restructured"));
                        }
                    }
                    tree = next.clone();
                }
            }
        }
        Ok(())
    }
}

/// Gadget keys for [`leaves_tripling`]: each integer `i` gains an upper
/// pair `i - 1/2` and `i + 1/4`, chained `i-1/2 -> i+1/4 -> i` so the
/// integer sits as a leaf.
fn gadget_low(k: Key) -> Key {
    k.offset(-1, 2)
}

fn gadget_high(k: Key) -> Key {
    k.offset(1, 4)
}

fn tripled_tree(tree: &SearchTree) -> SearchTree {
    let ints = tree.inorder_keys();
    let mut keys = Vec::with_capacity(3 * ints.len());
    for &k in &ints {
        keys.push(gadget_low(k));
        keys.push(k);
        keys.push(gadget_high(k));
    }
    // range (lo, hi) of gadget-key indices -> root index: the low gadget
    // key of the subtree root, whose own right child is the high gadget
    // key over the pair (leaf, right block)
    let mut table = HashMap::new();
    let mut sizes: HashMap<NodeId, usize> = HashMap::new();
    for &id in tree.subtree_ids(tree.root_id()).iter().rev() {
        let size = 1
            + tree.left(id).map_or(0, |l| sizes[&l])
            + tree.right(id).map_or(0, |r| sizes[&r]);
        sizes.insert(id, size);
    }
    let mut stack = vec![(tree.root_id(), 0usize)];
    while let Some((id, lo)) = stack.pop() {
        let hi = lo + 3 * sizes[&id] - 1;
        let split = lo + 3 * tree.left(id).map_or(0, |l| sizes[&l]);
        table.insert((lo, hi), split);
        table.insert((split + 1, hi), split + 2);
        if let Some(l) = tree.left(id) {
            stack.push((l, lo));
        }
        if let Some(r) = tree.right(id) {
            stack.push((r, split + 3));
        }
    }
    assemble(&keys, |lo, hi| *table.get(&(lo, hi)).unwrap_or(&lo))
}

/// Map each rotation of the input execution to rotations of gadget keys
/// that keep every original key a leaf. One input rotation becomes two
/// output rotations; each access touches at most three times as many
/// nodes as before, so per-access cost grows by a factor of at most 3
/// (asserted).
///
/// The input must be rotation-witnessed ([`StepBody::Rotations`]) with
/// all keys integral.
pub fn leaves_tripling(trace: &ExecutionTrace) -> Result<ExecutionTrace> {
    trace.validate()?;
    if trace.initial.inorder_keys().iter().any(|k| !k.is_integer()) {
        return Err(Error::invalid("tripling expects an integer-keyed execution"));
    }
    let mut b = trace.initial.clone();
    let mut a = tripled_tree(&b);
    let initial = a.clone();
    let mut steps = Vec::with_capacity(trace.steps.len());
    for step in &trace.steps {
        let rs = match &step.body {
            StepBody::Rotations(rs) => rs,
            StepBody::Snapshot(_) => {
                return Err(Error::invalid(
                    "tripling expects rotation-witnessed steps",
                ))
            }
        };
        let mut touched: HashSet<Key> = HashSet::new();
        for id in a.search_path(step.access)? {
            touched.insert(a.key_of(id));
        }
        let mut rotations = Vec::with_capacity(2 * rs.len());
        let mut emit = |a: &mut SearchTree, key: Key, touched: &mut HashSet<Key>| -> Result<()> {
            let id = a.find(key).expect("gadget key present");
            let p = a.parent(id).expect("gadget rotations never hit the root");
            touched.insert(key);
            touched.insert(a.key_of(p));
            rotations.push(key);
            a.rotate_id(id)
        };
        for &v in rs {
            let vid = b.find(v).expect("rotated key present");
            let u = b.key_of(b.parent(vid).expect("rotations never hit the root"));
            b.rotate_id(vid)?;
            // moving v's gadget above u's gadget: two rotations, whose
            // pattern depends on which side v came from
            if v < u {
                emit(&mut a, gadget_low(v), &mut touched)?;
                emit(&mut a, gadget_high(v), &mut touched)?;
            } else {
                emit(&mut a, gadget_low(v), &mut touched)?;
                emit(&mut a, gadget_low(v), &mut touched)?;
            }
        }
        assert!(
            touched.len() <= 3 * step.touched.len(),
            "tripled access exceeded three times the original cost"
        );
        let leaf = a.find(step.access).expect("original key present");
        debug_assert!(a.left(leaf).is_none() && a.right(leaf).is_none());
        let mut touched: Vec<Key> = touched.into_iter().collect();
        touched.sort();
        steps.push(TraceStep {
            access: step.access,
            touched,
            body: StepBody::Rotations(rotations),
        });
    }
    Ok(ExecutionTrace { initial, steps })
}

/// Cost accounting of a composed execution.
#[derive(Clone, Debug)]
pub struct CompositionBreakdown {
    /// Cost of the executor on each part, in partition order.
    pub parts: Vec<usize>,
    /// Cost of the executor on the template sequence.
    pub template: usize,
    /// Cost spent in the auxiliary skeleton; at most `3 * template`.
    pub template_portion: usize,
    /// Composed cost: `sum(parts) + template_portion`.
    pub total: usize,
}

/// Execute `seq` by interleaving executions of its parts under an
/// auxiliary skeleton driven by the template execution.
///
/// Parts and template start from balanced trees. The composed total is
/// at most `sum_i cost(sub on part i) + 3 * cost(template algorithm on
/// template)`, asserted on every run, with per-access breakdown exact
/// by construction.
pub fn composed_execute(
    seq: &AccessSequence,
    partition: &[(usize, usize)],
    sub_algorithm: Algorithm,
    template_algorithm: Algorithm,
) -> Result<(ExecutionTrace, CompositionBreakdown)> {
    let ct = decompose(seq, partition)?;
    let k = partition.len();

    // part executions, over the original (unshifted) keys of each block
    let mut part_traces = Vec::with_capacity(k);
    for (i, part) in ct.parts().iter().enumerate() {
        let base = partition[i].0 - 1;
        let keys: Vec<Key> = (partition[i].0..=partition[i].1).map(Key::from).collect();
        let tree0 = SearchTree::build_balanced(&keys)?;
        let accesses: Vec<Key> = part.keys().iter().map(|&s| Key::from(s + base)).collect();
        part_traces.push(sub_algorithm.trace(&tree0, &accesses)?);
    }

    let template_trace =
        template_algorithm.trace_seq(&SearchTree::balanced_over(k), ct.template())?;
    let tripled = leaves_tripling(&template_trace)?;

    // remap the skeleton's keys to rationals at the interval boundaries:
    // the gadget pair of template key i becomes (a_i - 1/2, b_i + 1/4),
    // and template leaf i stands for the root of part subtree i
    let mut remap: HashMap<Key, Key> = HashMap::new();
    for (i, &(a, b)) in partition.iter().enumerate() {
        let t = Key::from(i + 1);
        remap.insert(gadget_low(t), gadget_low(Key::from(a)));
        remap.insert(gadget_high(t), gadget_high(Key::from(b)));
    }

    // composed initial tree: tripled template skeleton with each leaf
    // replaced by its part tree
    let mut keys: Vec<Key> = Vec::with_capacity(seq.n() + 2 * k);
    for (i, &(a, b)) in partition.iter().enumerate() {
        let _ = i;
        keys.push(gadget_low(Key::from(a)));
        keys.extend((a..=b).map(Key::from));
        keys.push(gadget_high(Key::from(b)));
    }
    // template leaves span their whole block in the global key order;
    // every other key spans just itself
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    fn fill_tree(
        tree: &SearchTree,
        start: usize,
        width: &dyn Fn(Key) -> usize,
        table: &mut HashMap<(usize, usize), usize>,
    ) {
        let mut sizes: HashMap<NodeId, usize> = HashMap::new();
        for &id in tree.subtree_ids(tree.root_id()).iter().rev() {
            let size = width(tree.key_of(id))
                + tree.left(id).map_or(0, |l| sizes[&l])
                + tree.right(id).map_or(0, |r| sizes[&r]);
            sizes.insert(id, size);
        }
        let mut stack = vec![(tree.root_id(), start)];
        while let Some((id, lo)) = stack.pop() {
            let hi = lo + sizes[&id] - 1;
            let split = lo + tree.left(id).map_or(0, |l| sizes[&l]);
            let w = width(tree.key_of(id));
            if w == 1 {
                table.insert((lo, hi), split);
            }
            if let Some(l) = tree.left(id) {
                stack.push((l, lo));
            }
            if let Some(r) = tree.right(id) {
                stack.push((r, split + w));
            }
        }
    }
    let block_width = |key: Key| -> usize {
        match key.as_integer() {
            Some(i) => {
                let (a, b) = partition[i as usize - 1];
                b - a + 1
            }
            None => 1,
        }
    };
    fill_tree(&tripled.initial, 0, &block_width, &mut table);
    let mut offset = 0usize;
    for (i, &(a, b)) in partition.iter().enumerate() {
        fill_tree(&part_traces[i].initial, offset + 1, &|_| 1, &mut table);
        offset += (b - a + 1) + 2;
    }
    let initial = assemble(&keys, |lo, hi| *table.get(&(lo, hi)).unwrap_or(&lo));

    // merge: each access spends its template step in the skeleton
    // (minus the leaf, which is the part root) and its part step inside
    // the part subtree
    let mut cursor = vec![0usize; k];
    let mut steps = Vec::with_capacity(seq.m());
    let mut template_portion = 0usize;
    let mut total = 0usize;
    for (j, (&s, &t)) in seq.keys().iter().zip(ct.template().keys()).enumerate() {
        let tstep = &tripled.steps[j];
        debug_assert_eq!(tstep.access, Key::from(t));
        let pstep = &part_traces[t - 1].steps[cursor[t - 1]];
        cursor[t - 1] += 1;
        debug_assert_eq!(pstep.access, Key::from(s));
        let mut touched = Vec::with_capacity(tstep.touched.len() - 1 + pstep.touched.len());
        for &key in &tstep.touched {
            if key.is_integer() {
                debug_assert_eq!(key, Key::from(t));
            } else {
                touched.push(remap[&key]);
            }
        }
        template_portion += touched.len();
        touched.extend_from_slice(&pstep.touched);
        touched.sort();
        let mut rotations = Vec::new();
        if let (StepBody::Rotations(trs), StepBody::Rotations(prs)) = (&tstep.body, &pstep.body) {
            rotations.extend(trs.iter().map(|r| remap[r]));
            rotations.extend_from_slice(prs);
        }
        total += touched.len();
        steps.push(TraceStep {
            access: Key::from(s),
            touched,
            body: StepBody::Rotations(rotations),
        });
    }

    let parts: Vec<usize> = part_traces.iter().map(|t| t.cost()).collect();
    let template = template_trace.cost();
    assert_eq!(total, parts.iter().sum::<usize>() + template_portion);
    assert!(template_portion <= 3 * template, "skeleton cost exceeded 3x template");
    let trace = ExecutionTrace { initial, steps };
    Ok((
        trace,
        CompositionBreakdown {
            parts,
            template,
            template_portion,
            total,
        },
    ))
}

/// Contract auxiliary key `y` onto its neighbor `yp` in one tree: the
/// two are adjacent, so one is an ancestor of the other; the pair keeps
/// the shallower of their two positions (held by `yp`) and everything
/// else stays put.
fn contract(tree: &SearchTree, y: Key, yp: Key) -> Result<SearchTree> {
    let mut t = tree.clone();
    let miss = |k: Key| Error::invalid(format!("key {k} not in the tree"));
    let yid = t.find(y).ok_or_else(|| miss(y))?;
    let pid = t.find(yp).ok_or_else(|| miss(yp))?;
    if t.is_ancestor(pid, yid) {
        // neighbor already above: y's other side is empty, splice it
        t.splice_out(yid)?;
    } else if t.is_ancestor(yid, pid) {
        // y above: its neighbor moves into y's slot; the neighbor's own
        // node (missing one side, since it borders y) is spliced
        t.splice_out(pid)?;
        let nn = t.new_node(yp);
        for (child, left) in [(t.left(yid), true), (t.right(yid), false)] {
            if let Some(c) = child {
                t.detach(c);
                if left {
                    t.link_left(nn, c);
                } else {
                    t.link_right(nn, c);
                }
            }
        }
        match t.parent(yid) {
            Some(p) => {
                let was_left = t.left(p) == Some(yid);
                t.detach(yid);
                if was_left {
                    t.link_left(p, nn);
                } else {
                    t.link_right(p, nn);
                }
            }
            None => t.set_root(nn),
        }
        t.kill_detached(yid);
    } else {
        return Err(Error::invalid(format!(
            "adjacent keys {y} and {yp} are not ancestor-related"
        )));
    }
    Ok(t)
}

/// Remove one auxiliary key from an execution, never increasing any
/// per-access cost.
fn eliminate_one(trace: &ExecutionTrace, y: Key) -> Result<ExecutionTrace> {
    let keys = trace.initial.inorder_keys();
    let pos = keys.binary_search(&y).map_err(|_| {
        Error::invalid(format!("auxiliary key {y} not in the execution"))
    })?;
    let yp = if pos > 0 { keys[pos - 1] } else { keys[pos + 1] };

    let mut a = trace.initial.clone();
    let mut b = contract(&a, y, yp)?;
    let initial = b.clone();
    let mut steps = Vec::with_capacity(trace.steps.len());
    for step in &trace.steps {
        if step.access == y {
            return Err(Error::invalid("cannot eliminate an accessed key"));
        }
        let a_path: HashSet<Key> = a
            .search_path(step.access)?
            .into_iter()
            .map(|id| a.key_of(id))
            .collect();
        apply_step(&mut a, step)?;
        let next = contract(&a, y, yp)?;

        let b_path: Vec<Key> = b
            .search_path(step.access)?
            .into_iter()
            .map(|id| b.key_of(id))
            .collect();
        for k in &b_path {
            assert!(
                a_path.contains(k) || (*k == yp && a_path.contains(&y)),
                "search path gained a key after contraction"
            );
        }
        let before = shape_map(&b);
        let after = shape_map(&next);
        let mut touched: HashSet<Key> = b_path.into_iter().collect();
        for (k, shape) in &before {
            if after[k] != *shape {
                touched.insert(*k);
            }
        }
        let allowed: HashSet<Key> = step
            .touched
            .iter()
            .copied()
            .filter(|&k| k != y)
            .chain(std::iter::once(yp))
            .collect();
        assert!(
            touched.is_subset(&allowed),
            "contraction touched a key outside the original step"
        );
        assert!(
            touched.len() <= step.touched.len(),
            "contraction increased an access cost"
        );
        let mut touched: Vec<Key> = touched.into_iter().collect();
        touched.sort();
        steps.push(TraceStep {
            access: step.access,
            touched,
            body: StepBody::Snapshot(next.clone()),
        });
        b = next;
    }
    Ok(ExecutionTrace { initial, steps })
}

/// Strip every non-integer key from an execution, one at a time, never
/// increasing any per-access cost. The result is an execution over the
/// original integer universe with `cost <= trace.cost()`.
pub fn eliminate_auxiliary(trace: &ExecutionTrace) -> Result<ExecutionTrace> {
    trace.validate()?;
    let mut out = trace.clone();
    loop {
        let aux = out
            .initial
            .inorder_keys()
            .into_iter()
            .find(|k| !k.is_integer());
        match aux {
            Some(y) => out = eliminate_one(&out, y)?,
            None => return Ok(out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::{derive_seed, rng};
    use crate::sequences::gen_tilted_grid;
    use rand::Rng;

    fn useq(n: usize, keys: &[usize]) -> AccessSequence {
        AccessSequence::new(n, keys.to_vec()).unwrap()
    }

    fn random_seq(n: usize, m: usize, seed: u64) -> AccessSequence {
        let mut r = rng(seed);
        AccessSequence::new(n, (0..m).map(|_| 1 + r.gen_range(0..n)).collect()).unwrap()
    }

    #[test]
    fn traces_replay_and_validate() {
        let seq = random_seq(12, 40, 0xD01);
        for alg in [Algorithm::Splay, Algorithm::MoveToRoot] {
            let trace = alg.trace_seq(&SearchTree::random_bst(12, 5), &seq).unwrap();
            trace.validate().unwrap();
            assert_eq!(trace.cost(), trace.ledger().total());
            let snaps = trace.snapshots().unwrap();
            assert_eq!(snaps.len(), 41);
            // splay and move-to-root leave the accessed key at the root
            for (snap, &s) in snaps[1..].iter().zip(seq.keys()) {
                assert_eq!(snap.root_key(), Key::from(s));
            }
        }
    }

    #[test]
    fn validate_rejects_broken_traces() {
        let seq = useq(4, &[3, 1]);
        let trace = Algorithm::Splay
            .trace_seq(&SearchTree::balanced_over(4), &seq)
            .unwrap();
        let mut missing_access = trace.clone();
        missing_access.steps[0].touched.retain(|&k| k != Key::int(3));
        assert!(missing_access.validate().is_err());
        let mut foreign_rotation = trace;
        if let StepBody::Rotations(rs) = &mut foreign_rotation.steps[1].body {
            rs.push(Key::int(4));
        }
        assert!(foreign_rotation.validate().is_err());
    }

    #[test]
    fn tripling_a_single_node_trace_costs_three_per_access() {
        let trace = Algorithm::Splay
            .trace_seq(&SearchTree::balanced_over(1), &useq(1, &[1, 1]))
            .unwrap();
        let tripled = leaves_tripling(&trace).unwrap();
        tripled.validate().unwrap();
        assert_eq!(trace.cost(), 2);
        assert_eq!(tripled.cost(), 6);
        assert_eq!(tripled.initial.len(), 3);
        assert_eq!(tripled.initial.root_key(), Key::new(1, 2));
    }

    #[test]
    fn tripling_keeps_originals_as_leaves_within_triple_cost() {
        for trial in 0..15u64 {
            let n = 2 + (trial as usize % 7);
            let seq = random_seq(n, 25, derive_seed(0xD02, trial));
            let tree0 = SearchTree::random_bst(n, derive_seed(0xD03, trial));
            let alg = if trial % 2 == 0 {
                Algorithm::Splay
            } else {
                Algorithm::MoveToRoot
            };
            let trace = alg.trace_seq(&tree0, &seq).unwrap();
            let tripled = leaves_tripling(&trace).unwrap();
            tripled.validate().unwrap();
            for snap in tripled.snapshots().unwrap() {
                for k in 1..=n {
                    let id = snap.find(Key::from(k)).unwrap();
                    assert!(snap.left(id).is_none() && snap.right(id).is_none());
                }
            }
            for (a, b) in tripled.steps.iter().zip(&trace.steps) {
                assert!(a.touched.len() <= 3 * b.touched.len());
            }
            // reaching key i costs at most three times its old cost
            let depths = trace.initial.int_depths().unwrap();
            for k in 1..=n {
                let d = tripled.initial.depth(Key::from(k)).unwrap();
                assert!(d + 1 <= 3 * (depths[k] + 1));
                assert!(d >= depths[k] + 2, "gadget chain must lengthen the path");
            }
        }
    }

    #[test]
    fn degenerate_composition_adds_a_constant_skeleton_tax() {
        let seq = random_seq(9, 30, 0xD04);
        let (trace, breakdown) =
            composed_execute(&seq, &[(1, 9)], Algorithm::Splay, Algorithm::Splay).unwrap();
        trace.validate().unwrap();
        // the template is a single repeated key: every access pays its
        // part cost plus two skeleton nodes
        assert_eq!(breakdown.template, seq.m());
        assert_eq!(breakdown.template_portion, 2 * seq.m());
        assert_eq!(breakdown.total, breakdown.parts[0] + 2 * seq.m());
    }

    #[test]
    fn small_tilted_grid_composition_matches_the_explicit_bound() {
        let seq = gen_tilted_grid(2, 2).unwrap().into_sequence();
        assert_eq!(seq.keys(), &[1, 3, 2, 4]);
        let (trace, breakdown) =
            composed_execute(&seq, &[(1, 2), (3, 4)], Algorithm::Splay, Algorithm::Splay).unwrap();
        trace.validate().unwrap();
        let splay_cost = |n: usize, keys: &[usize]| {
            let mut t = SearchTree::balanced_over(n);
            crate::algorithms::run_splay(&mut t, &useq(n, keys)).unwrap().total()
        };
        let lhs = breakdown.total;
        let rhs =
            splay_cost(2, &[1, 2]) + splay_cost(2, &[1, 2]) + 3 * splay_cost(2, &[1, 2, 1, 2]);
        assert!(lhs <= rhs, "{lhs} > {rhs}");
        assert_eq!(breakdown.parts, vec![splay_cost(2, &[1, 2]); 2]);
        assert_eq!(breakdown.template, splay_cost(2, &[1, 2, 1, 2]));
    }

    #[test]
    fn composed_cost_obeys_the_part_plus_template_bound() {
        for trial in 0..10u64 {
            let mut r = rng(derive_seed(0xD05, trial));
            let k = 2 + (trial as usize % 3);
            let widths: Vec<usize> = (0..k).map(|_| 1 + r.gen_range(0..4)).collect();
            let n: usize = widths.iter().sum();
            let mut partition = Vec::new();
            let mut a = 1;
            for w in widths {
                partition.push((a, a + w - 1));
                a += w;
            }
            // every interval needs at least one access
            let mut keys: Vec<usize> = partition.iter().map(|&(a, _)| a).collect();
            for _ in 0..40 {
                keys.push(1 + r.gen_range(0..n));
            }
            let seq = useq(n, &keys);
            let (trace, breakdown) =
                composed_execute(&seq, &partition, Algorithm::Splay, Algorithm::MoveToRoot)
                    .unwrap();
            trace.validate().unwrap();
            assert_eq!(trace.cost(), breakdown.total);
            assert!(
                breakdown.total
                    <= breakdown.parts.iter().sum::<usize>() + 3 * breakdown.template
            );
            // auxiliary skeleton stays above the real keys in every snapshot
            for snap in trace.snapshots().unwrap() {
                for id in snap.subtree_ids(snap.root_id()) {
                    if !snap.key_of(id).is_integer() {
                        if let Some(p) = snap.parent(id) {
                            assert!(!snap.key_of(p).is_integer());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn contracting_an_untouched_auxiliary_preserves_costs() {
        // auxiliary 5/2 sits as a leaf nobody accesses
        let initial = SearchTree::parse("(2 (1 . .) (4 (3 (5/2 . .) .) .))").unwrap();
        let trace = Algorithm::Splay
            .trace(&initial, &[Key::int(1), Key::int(4), Key::int(1)])
            .unwrap();
        let out = eliminate_auxiliary(&trace).unwrap();
        out.validate().unwrap();
        assert_eq!(
            out.ledger().per_access(),
            trace.ledger().per_access(),
            "costs changed though the auxiliary was never touched"
        );
    }

    #[test]
    fn contraction_moves_the_neighbor_into_the_removed_slot() {
        // 5/2 is the parent of its successor 3: 3 should take its place
        let initial = SearchTree::parse("(1 . (5/2 . (3 . (4 . .))))").unwrap();
        let trace = ExecutionTrace {
            initial,
            steps: Vec::new(),
        };
        let out = eliminate_auxiliary(&trace).unwrap();
        assert_eq!(out.initial.to_text(), "(1 . (3 . (4 . .)))");
        // and with the pair the other way (neighbor above): splice only
        let initial = SearchTree::parse("(3 (2 . (5/2 . .)) .)").unwrap();
        let trace = ExecutionTrace {
            initial,
            steps: Vec::new(),
        };
        let out = eliminate_auxiliary(&trace).unwrap();
        assert_eq!(out.initial.to_text(), "(3 (2 . .) .)");
    }

    #[test]
    fn elimination_of_tripled_traces_lands_back_on_the_originals() {
        for trial in 0..8u64 {
            let n = 2 + (trial as usize % 5);
            let seq = random_seq(n, 20, derive_seed(0xD06, trial));
            let trace = Algorithm::Splay
                .trace_seq(&SearchTree::random_bst(n, derive_seed(0xD07, trial)), &seq)
                .unwrap();
            let tripled = leaves_tripling(&trace).unwrap();
            let out = eliminate_auxiliary(&tripled).unwrap();
            out.validate().unwrap();
            assert_eq!(out.initial.len(), n);
            assert!(out.initial.inorder_keys().iter().all(|k| k.is_integer()));
            for (o, t) in out.steps.iter().zip(&tripled.steps) {
                assert!(o.touched.len() <= t.touched.len());
            }
        }
    }

    #[test]
    fn composed_then_eliminated_execution_is_a_plain_run() {
        let seq = gen_tilted_grid(4, 4).unwrap().into_sequence();
        let partition: Vec<(usize, usize)> = (0..4).map(|i| (4 * i + 1, 4 * i + 4)).collect();
        let (trace, breakdown) =
            composed_execute(&seq, &partition, Algorithm::Splay, Algorithm::Splay).unwrap();
        let out = eliminate_auxiliary(&trace).unwrap();
        out.validate().unwrap();
        assert_eq!(out.initial.real_universe().unwrap(), 16);
        assert!(out.cost() <= breakdown.total);
        assert_eq!(out.steps.len(), seq.m());
    }

    #[test]
    fn tilted_grid_composition_is_linear_in_n() {
        for exp in [3usize, 4, 5] {
            let l = 1 << exp;
            let n = l * l;
            let seq = gen_tilted_grid(l, l).unwrap().into_sequence();
            let partition: Vec<(usize, usize)> =
                (0..l).map(|i| (l * i + 1, l * i + l)).collect();
            let (_, breakdown) =
                composed_execute(&seq, &partition, Algorithm::Splay, Algorithm::Splay).unwrap();
            let ratio = breakdown.total as f64 / n as f64;
            assert!(ratio <= 40.0, "n={n}: composed cost per access {ratio}");
        }
    }
}
