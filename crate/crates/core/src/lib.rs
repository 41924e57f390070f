/*!
Cost bounds and executable algorithms for binary search trees.

This library works in the classic dynamic BST model: a fixed key set, a
sequence of accesses, and a tree that may be reshaped by single rotations
along each search path. The cost of serving an access is the number of
nodes touched, i.e. depth of the accessed key plus one. Everything here is
built around that accounting:

- [`sequences`]: access sequences, permutations, composition of sequences
  from a template and parts, pattern containment, and the structured
  families (sequential, preorder, tilted grids, phase sequences,
  bounded-arity decomposable permutations).
- [`tree`]: binary search trees over rational keys with rotations, depth
  and distance queries, and the weight-to-tree constructions (randomized
  treap, deterministic weight-centroid tree) plus their inverses.
- [`algorithms`]: executable self-adjusting algorithms (splay, move to
  root, greedy in the geometric view) with full touch/rotation traces.
- [`bounds`]: evaluators for the formula cost bounds (entropy, weighted
  static, working set, static and dynamic finger, weighted variants,
  unified, static optimum, lazy fingers with one or k fingers) and exact
  small-instance optima for cross-checking.
- [`kfinger`]: a k-finger machine on a static tree and the simulation of
  that machine by an ordinary single-pointer BST algorithm with
  O(log k)-factor overhead.
- [`interleave`]: execution traces, the composition theorem machinery
  (tripled template trees, combined executions), and removal of auxiliary
  keys from a trace.
- [`keyindependent`]: expected costs under uniformly random relabeling of
  the key space.

Keys are the integers `1..=n`; constructions that need intermediate
elements use exact rational keys (see [`key::Key`]). All logarithms are
base 2.
*/

pub mod algorithms;
pub mod bounds;
pub mod error;
pub mod interleave;
pub mod key;
pub mod keyindependent;
pub mod kfinger;
pub mod seeding;
pub mod sequences;
pub mod tree;

pub use error::{Error, Result};
pub use key::Key;
pub use sequences::{AccessSequence, CompositionTemplate, Permutation};
pub use tree::{SearchTree, WeightFunction};

/// Base-2 logarithm, the only log used anywhere in this crate.
#[inline]
pub fn log2(x: f64) -> f64 {
    x.log2()
}
