//! Key-independent cost evaluation for move-to-root.
//!
//! The key-independent cost of a sequence is the expected cost after
//! relabeling the universe by a uniform random permutation. For
//! move-to-root from a fixed initial tree this expectation tracks the
//! working-set bound up to constants plus an additive `sum_i d_T(i)`
//! term for first accesses, and the estimators here exist to measure
//! that relationship.
//!
//! [`ki_mtr`] is the Monte Carlo estimator (deterministic per seed, one
//! derived seed per trial). [`ki_mtr_exhaustive`] averages over every
//! permutation at toy sizes. [`ki_ratio_report`] packages the estimate
//! against `WS(S) + sum_i d_T(i) + m` with an engineering acceptance
//! band, since the underlying theorems fix no constants.
//!
//! In debug builds every trial asserts two structural facts along the
//! way: after each access the already-accessed keys form a connected
//! component containing the root, and on a repeat access every ancestor
//! of the target was itself accessed since the target's previous access
//! (so the touched path stays inside the working-set window).

use rand::seq::SliceRandom;

use crate::algorithms::mtr_access;
use crate::error::{Error, Result};
use crate::key::Key;
use crate::seeding::{derive_seed, rng};
use crate::sequences::AccessSequence;
use crate::tree::SearchTree;

/// Monte Carlo estimate of a key-independent cost.
#[derive(Clone, Debug)]
pub struct KiEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Total move-to-root cost of serving `seq` from `tree0`.
pub fn mtr_cost(tree0: &SearchTree, seq: &AccessSequence) -> Result<usize> {
    let mut t = tree0.clone();
    let mut total = 0;
    for &s in seq.keys() {
        total += mtr_access(&mut t, Key::from(s))?;
    }
    Ok(total)
}

fn check_universe(tree0: &SearchTree, seq: &AccessSequence) -> Result<()> {
    if tree0.real_universe()? != seq.n() || tree0.len() != seq.n() {
        return Err(Error::invalid(
            "initial tree must hold exactly the keys 1..=n of the sequence",
        ));
    }
    Ok(())
}

/// One relabeled run; returns per-access costs. `check` turns on the
/// structural assertions.
fn relabeled_run(
    tree0: &SearchTree,
    seq: &AccessSequence,
    perm: &[usize],
    check: bool,
) -> Vec<usize> {
    let n = seq.n();
    let mut t = tree0.clone();
    let mut last = vec![0usize; n + 1];
    let mut accessed = 0usize;
    let mut costs = Vec::with_capacity(seq.m());
    for (j0, &s) in seq.keys().iter().enumerate() {
        let x = perm[s - 1];
        let xk = Key::from(x);
        if check && last[x] > 0 {
            // every ancestor of a repeat access lies in its working-set
            // window: accessed strictly after the previous access to x
            let id = t.find(xk).expect("key present");
            let mut a = t.parent(id);
            let mut ancestors = 0;
            while let Some(p) = a {
                let pk = t.key_of(p).as_integer().expect("integer universe") as usize;
                assert!(
                    last[pk] > last[x],
                    "ancestor {pk} of {x} was not accessed since its previous access"
                );
                ancestors += 1;
                a = t.parent(p);
            }
            assert_eq!(ancestors, t.depth_id(id));
        }
        costs.push(mtr_access(&mut t, xk).expect("key present"));
        if last[x] == 0 {
            accessed += 1;
        }
        last[x] = j0 + 1;
        if check {
            // accessed keys form a connected component containing the root
            let mut stack = vec![t.root_id()];
            let mut reached = 0;
            while let Some(id) = stack.pop() {
                let key = t.key_of(id).as_integer().expect("integer universe") as usize;
                if last[key] == 0 {
                    continue;
                }
                reached += 1;
                stack.extend([t.left(id), t.right(id)].into_iter().flatten());
            }
            assert_eq!(reached, accessed, "accessed keys disconnected from the root");
        }
    }
    costs
}

/// Key-independent move-to-root estimate: the mean of
/// [`mtr_cost`]`(tree0, pi(seq))` over `trials` uniform relabelings.
/// Trial `i` draws its permutation from a seed derived as
/// `derive_seed(seed, i)`, so results are reproducible and order
/// independent.
pub fn ki_mtr(tree0: &SearchTree, seq: &AccessSequence, trials: usize, seed: u64) -> Result<KiEstimate> {
    Ok(ki_mtr_detailed(tree0, seq, trials, seed)?.0)
}

/// [`ki_mtr`] plus the per-access mean cost across trials, for
/// window-size profiling.
pub fn ki_mtr_detailed(
    tree0: &SearchTree,
    seq: &AccessSequence,
    trials: usize,
    seed: u64,
) -> Result<(KiEstimate, Vec<f64>)> {
    check_universe(tree0, seq)?;
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let n = seq.n();
    let check = cfg!(debug_assertions);
    let mut totals = Vec::with_capacity(trials);
    let mut per_access = vec![0u64; seq.m()];
    for i in 0..trials {
        let mut r = rng(derive_seed(seed, i as u64));
        let mut perm: Vec<usize> = (1..=n).collect();
        perm.shuffle(&mut r);
        let costs = relabeled_run(tree0, seq, &perm, check);
        for (acc, &c) in per_access.iter_mut().zip(&costs) {
            *acc += c as u64;
        }
        totals.push(costs.iter().sum::<usize>() as f64);
    }
    let mean = totals.iter().sum::<f64>() / trials as f64;
    let stderr = if trials > 1 {
        let var = totals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    let per_access = per_access
        .into_iter()
        .map(|s| s as f64 / trials as f64)
        .collect();
    Ok((
        KiEstimate {
            mean,
            stderr,
            trials,
            seed,
        },
        per_access,
    ))
}

/// Largest universe [`ki_mtr_exhaustive`] enumerates (n! permutations).
pub const KI_EXHAUSTIVE_MAX_N: usize = 7;

/// Exact key-independent expectation by averaging over every
/// permutation of the universe.
pub fn ki_mtr_exhaustive(tree0: &SearchTree, seq: &AccessSequence) -> Result<f64> {
    check_universe(tree0, seq)?;
    let n = seq.n();
    if n > KI_EXHAUSTIVE_MAX_N {
        return Err(Error::guard(format!(
            "exact key independence averages n! runs; n={n} exceeds {KI_EXHAUSTIVE_MAX_N}"
        )));
    }
    // Heap's algorithm, iterative
    let mut perm: Vec<usize> = (1..=n).collect();
    let mut c = vec![0usize; n];
    let mut total = 0u64;
    let mut count = 0u64;
    let mut tally = |p: &[usize]| {
        total += relabeled_run(tree0, seq, p, false)
            .iter()
            .sum::<usize>() as u64;
        count += 1;
    };
    tally(&perm);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            tally(&perm);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(total as f64 / count as f64)
}

/// Threshold band for [`ki_ratio_report`]: the underlying theorems are
/// Theta-claims with unstated constants, so the check is an engineering
/// band, not theory.
pub const KI_RATIO_BAND: (f64, f64) = (1.0 / 16.0, 16.0);

/// Comparison of the key-independent move-to-root estimate against its
/// working-set yardstick.
#[derive(Clone, Debug)]
pub struct KiRatioReport {
    pub estimate: KiEstimate,
    /// Working-set bound of the unrelabeled sequence (relabeling does
    /// not change window sizes).
    pub ws: f64,
    /// First-access term: sum of all key depths in the initial tree.
    pub f_n: f64,
    pub m: usize,
    /// `mean / (ws + f_n + m)`.
    pub ratio: f64,
    pub in_band: bool,
}

/// Estimate KI-MTR from the balanced tree over `[n]` and report the
/// ratio against `WS(S) + sum_i d_T(i) + m`.
pub fn ki_ratio_report(seq: &AccessSequence, trials: usize, seed: u64) -> Result<KiRatioReport> {
    let tree0 = SearchTree::balanced_over(seq.n());
    let estimate = ki_mtr(&tree0, seq, trials, seed)?;
    let ws = crate::bounds::working_set(seq);
    let f_n = tree0.int_depths()?[1..].iter().sum::<usize>() as f64;
    let m = seq.m();
    let ratio = estimate.mean / (ws + f_n + m as f64);
    Ok(KiRatioReport {
        in_band: (KI_RATIO_BAND.0..=KI_RATIO_BAND.1).contains(&ratio),
        estimate,
        ws,
        f_n,
        m,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::working_set_sizes;
    use rand::Rng;

    fn seq(n: usize, keys: &[usize]) -> AccessSequence {
        AccessSequence::new(n, keys.to_vec()).unwrap()
    }

    #[test]
    fn mtr_cost_examples() {
        let t = SearchTree::balanced_over(7);
        let root = t.root_key().as_integer().unwrap() as usize;
        assert_eq!(mtr_cost(&t, &seq(7, &[root; 5])).unwrap(), 5);
        let n = 9;
        let spine_text = (1..=n).rev().fold(String::from("."), |acc, k| format!("({k} . {acc})"));
        let spine = SearchTree::parse(&spine_text).unwrap();
        assert_eq!(mtr_cost(&spine, &seq(n, &[n])).unwrap(), n);
        assert_eq!(mtr_cost(&spine, &seq(n, &[n, n])).unwrap(), n + 1);
    }

    #[test]
    fn single_key_universe_is_deterministic() {
        let t = SearchTree::balanced_over(1);
        let e = ki_mtr(&t, &seq(1, &[1, 1, 1, 1]), 5, 42).unwrap();
        assert_eq!(e.mean, 4.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn two_key_expectation_is_exact() {
        let t = SearchTree::balanced_over(2);
        let s = seq(2, &[1, 2]);
        let exact = ki_mtr_exhaustive(&t, &s).unwrap();
        assert_eq!(exact, 3.5);
        let e = ki_mtr(&t, &s, 400, 7).unwrap();
        assert!((e.mean - exact).abs() <= 3.0 * e.stderr.max(0.05));
    }

    #[test]
    fn estimator_is_reproducible_per_seed() {
        let t = SearchTree::balanced_over(6);
        let s = seq(6, &[1, 4, 2, 4, 6, 1, 1, 3]);
        let a = ki_mtr(&t, &s, 50, 11).unwrap();
        let b = ki_mtr(&t, &s, 50, 11).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.stderr, b.stderr);
    }

    #[test]
    fn estimator_agrees_with_the_exhaustive_average() {
        for trial in 0..6u64 {
            let n = 3 + (trial as usize % 4);
            let mut r = rng(derive_seed(0xC01, trial));
            let keys: Vec<usize> = (0..12).map(|_| 1 + r.gen_range(0..n)).collect();
            let s = seq(n, &keys);
            let t = SearchTree::balanced_over(n);
            let exact = ki_mtr_exhaustive(&t, &s).unwrap();
            let e = ki_mtr(&t, &s, 300, derive_seed(0xC02, trial)).unwrap();
            assert!(
                (e.mean - exact).abs() <= 3.0 * e.stderr.max(0.05),
                "n={n} exact={exact} est={} se={}",
                e.mean,
                e.stderr
            );
        }
    }

    #[test]
    fn guards_and_input_validation() {
        let t = SearchTree::balanced_over(8);
        let s = seq(8, &[1, 2]);
        assert!(ki_mtr_exhaustive(&t, &s).is_err());
        assert!(ki_mtr(&t, &s, 0, 1).is_err());
        let wrong = SearchTree::balanced_over(5);
        assert!(ki_mtr(&wrong, &s, 1, 1).is_err());
    }

    /// Accesses with working-set size z cost at most 4*(log2 z + 1) on
    /// average.
    #[test]
    fn mean_cost_tracks_the_window_size()  {
        let n = 64;
        let mut r = rng(0xC03);
        let mut keys = Vec::new();
        // mix hot keys and cold sweeps to spread the window sizes
        for _ in 0..6 {
            for _ in 0..30 {
                keys.push(1 + r.gen_range(0..4));
            }
            for k in 1..=n {
                keys.push(k);
            }
        }
        let s = seq(n, &keys);
        let t = SearchTree::balanced_over(n);
        let (_, per_access) = ki_mtr_detailed(&t, &s, 60, 0xC04).unwrap();
        let sizes = working_set_sizes(&s);
        let mut sum = vec![0.0f64; n + 1];
        let mut cnt = vec![0usize; n + 1];
        // skip first accesses: their cost is the depth term, not the window
        let mut seen = vec![false; n + 1];
        for ((&z, &c), &k) in sizes.iter().zip(&per_access).zip(s.keys()) {
            if seen[k] {
                sum[z] += c;
                cnt[z] += 1;
            }
            seen[k] = true;
        }
        for z in 1..=n {
            if cnt[z] > 0 {
                let mean = sum[z] / cnt[z] as f64;
                let cap = 4.0 * ((z as f64).log2() + 1.0);
                assert!(mean <= cap, "window {z}: mean {mean} over cap {cap}");
            }
        }
    }

    #[test]
    fn ratio_report_sits_in_the_band() {
        let n = 64;
        let mut r = rng(0xC05);
        let m = n * 6;
        let uniform: Vec<usize> = (0..m).map(|_| 1 + r.gen_range(0..n)).collect();
        let round_robin: Vec<usize> = (0..m).map(|j| 1 + (j % 8)).collect();
        let sequential: Vec<usize> = (0..m).map(|j| 1 + (j % n)).collect();
        for keys in [uniform, round_robin, sequential] {
            let s = seq(n, &keys);
            let report = ki_ratio_report(&s, 40, 0xC06).unwrap();
            assert!(
                report.in_band,
                "ratio {} outside band, ws={} f_n={}",
                report.ratio, report.ws, report.f_n
            );
            let denom = report.ws + report.f_n + report.m as f64;
            assert!((report.ratio - report.estimate.mean / denom).abs() < 1e-12);
        }
    }
}
