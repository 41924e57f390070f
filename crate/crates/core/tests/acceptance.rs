//! Acceptance gate: one test per shipped guarantee. Every test ends by
//! printing `ACCEPTANCE <n> <name>: PASS`; a failing assertion anywhere
//! marks the criterion failed.

use bstlab::algorithms::{greedy_run, splay_amortized_check, PointSet};
use bstlab::bounds::{
    entropy_bound, k_lazy_finger_at, k_lazy_finger_bruteforce, kfinger_monotone_strategy,
    lazy_finger_at, static_cost, static_optimality, weighted_balance, weighted_balance_opt,
    working_set, working_set_naive, Witness,
};
use bstlab::interleave::{composed_execute, Algorithm};
use bstlab::keyindependent::{ki_mtr, ki_mtr_exhaustive, ki_ratio_report};
use bstlab::kfinger::{optimal_strategy, random_trace, simulate, strategy_trace};
use bstlab::seeding::{derive_seed, rng};
use bstlab::sequences::{gen_decomposable, gen_phase_sequence, gen_tilted_grid};
use bstlab::tree::{
    build_decomposable_reference_tree, build_tilted_grid_reference_tree, for_each_bst,
};
use bstlab::{AccessSequence, SearchTree, WeightFunction};
use rand::Rng;

fn pass(num: usize, name: &str) {
    println!("ACCEPTANCE {num:2} {name}: PASS");
}

fn random_sequence(n: usize, m: usize, r: &mut impl Rng) -> AccessSequence {
    let keys = (0..m).map(|_| r.gen_range(1..=n)).collect();
    AccessSequence::new(n, keys).expect("keys drawn in range")
}

fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        (x - 1).ilog2() + 1
    }
}

#[test]
fn working_set_matches_the_quadratic_oracle() {
    let mut r = rng(0xac01);
    for i in 0..1000 {
        let n = r.gen_range(1..=512);
        let m = if i % 40 == 0 {
            r.gen_range(2048..=4096)
        } else {
            r.gen_range(1..=512)
        };
        let s = random_sequence(n, m, &mut r);
        assert_eq!(
            working_set(&s),
            working_set_naive(&s),
            "instance {i}: n={n} m={m}"
        );
    }
    pass(1, "working set equals the quadratic oracle on 1000 sequences");
}

#[test]
fn optimal_static_tree_dp_matches_exhaustive_enumeration() {
    let mut r = rng(0xac02);
    for i in 0..100 {
        let n = r.gen_range(2..=10);
        let m = r.gen_range(n..=3 * n + 10);
        let s = random_sequence(n, m, &mut r);
        let dp = static_optimality(&s).expect("dp runs at desk sizes");

        let mut freq = vec![0u64; n + 1];
        for &k in s.keys() {
            freq[k] += 1;
        }
        let mut best = u64::MAX;
        for_each_bst(n, |t| {
            let d = t.int_depths().expect("integer keys");
            let cost: u64 = (1..=n).map(|k| freq[k] * d[k] as u64).sum();
            best = best.min(cost);
        })
        .expect("enumeration runs");
        assert_eq!(dp.value, best as f64, "instance {i}: n={n} m={m}");

        match dp.witness {
            Some(Witness::Tree(t)) => {
                assert_eq!(static_cost(&s, &t).expect("witness evaluates"), dp.value)
            }
            other => panic!("expected a tree witness, got {other:?}"),
        }
    }
    pass(2, "static optimum DP equals the exhaustive tree minimum");
}

#[test]
fn k_finger_flow_matches_the_configuration_dp() {
    let mut r = rng(0xac03);
    let mut instances = Vec::new();
    for n in 2..=8usize {
        for m in 1..=8usize {
            for k in 1..=3usize {
                instances.push((n, m, k));
            }
        }
    }
    while instances.len() < 200 {
        instances.push((r.gen_range(2..=8), r.gen_range(1..=8), r.gen_range(1..=3)));
    }
    for (i, (n, m, k)) in instances.into_iter().enumerate() {
        let k = k.min(n);
        let tree = SearchTree::random_bst(n, derive_seed(0xac03, i as u64));
        let s = random_sequence(n, m, &mut r);
        let flow = k_lazy_finger_at(&s, &tree, k).expect("flow value");
        let dp = k_lazy_finger_bruteforce(&s, &tree, k).expect("reference value");
        assert_eq!(flow, dp, "instance {i}: n={n} m={m} k={k}");
        assert!(flow >= m as f64, "every access pays at least its declaration");
    }
    pass(3, "k-finger flow equals the configuration DP on 200 instances");
}

#[test]
fn weighted_balance_optimum_is_entropy_and_tracks_static_optimality() {
    let mut r = rng(0xac04);
    for i in 0..50 {
        let n = r.gen_range(2..=10);
        let m = r.gen_range(n..=4 * n);
        let s = random_sequence(n, m, &mut r);

        let opt = weighted_balance_opt(&s);
        let gap = (opt.value - entropy_bound(&s)).abs();
        assert!(gap <= 1e-9, "instance {i}: optimum off entropy by {gap}");
        let mut freq = vec![0usize; n + 1];
        for &k in s.keys() {
            freq[k] += 1;
        }
        match opt.witness {
            Some(Witness::Weights(ref w)) => {
                let replayed = weighted_balance(&s, w).expect("witness evaluates");
                assert!((replayed - opt.value).abs() <= 1e-9);
            }
            None => assert!(
                freq[1..].contains(&0),
                "instance {i}: witness withheld although every key is accessed"
            ),
            ref other => panic!("expected a weight witness, got {other:?}"),
        }
        for _ in 0..200 {
            let w = WeightFunction::new((0..n).map(|_| r.gen_range(0.01..10.0)).collect())
                .expect("positive weights");
            let at_w = weighted_balance(&s, &w).expect("evaluates");
            assert!(at_w >= opt.value - 1e-9, "instance {i}: {at_w} beats the optimum");
        }

        let so = static_optimality(&s).expect("exact minimum").value;
        let m = s.m() as f64;
        assert!(so <= 8.0 * opt.value + 8.0 * m, "instance {i}");
        assert!(opt.value <= 8.0 * so + 8.0 * m, "instance {i}");
    }
    pass(4, "weighted balance optimum is the entropy, sandwiched by the static optimum");
}

#[test]
fn decomposable_reference_trees_keep_lazy_finger_linear_in_log_k() {
    for &k in &[2usize, 4, 8] {
        let mut depth = 1u32;
        while k.pow(depth) <= 1 << 12 {
            let n = k.pow(depth);
            let seed = derive_seed(0xac05, (k * 100) as u64 + depth as u64);
            let perm = gen_decomposable(k, depth, seed).expect("generator");
            let tree = build_decomposable_reference_tree(&perm, k).expect("reference tree");
            let lf = lazy_finger_at(perm.as_sequence(), &tree).expect("lazy finger");
            let bound = 4.0 * (n as f64 - 1.0) * ceil_log2(k) as f64;
            assert!(lf <= bound, "k={k} n={n}: lazy finger {lf} above {bound}");
            depth += 1;
        }
    }
    pass(5, "lazy finger on decomposable reference trees stays within 4(n-1)ceil(log2 k)");
}

fn random_k_monotone(n: usize, k: usize, r: &mut impl Rng) -> AccessSequence {
    // each key joins one of k ascending runs; the runs interleave randomly
    let mut runs: Vec<Vec<usize>> = vec![Vec::new(); k];
    for key in 1..=n {
        runs[r.gen_range(0..k)].push(key);
    }
    let mut idx = vec![0usize; k];
    let mut keys = Vec::with_capacity(n);
    while keys.len() < n {
        let live: Vec<usize> = (0..k).filter(|&i| idx[i] < runs[i].len()).collect();
        let pick = live[r.gen_range(0..live.len())];
        keys.push(runs[pick][idx[pick]]);
        idx[pick] += 1;
    }
    AccessSequence::new(n, keys).expect("permutation")
}

#[test]
fn monotone_finger_strategy_is_linear_and_dominates_the_optimum() {
    let mut r = rng(0xac06);
    for &k in &[2usize, 4, 8] {
        for &n in &[64usize, 512, 1 << 12] {
            let s = random_k_monotone(n, k, &mut r);
            let tree = SearchTree::balanced_over(n);
            let cost = kfinger_monotone_strategy(&s, &tree, k).expect("strategy");
            let line = 4.0 * (n * k) as f64;
            assert!(cost <= line, "k={k} n={n}: strategy {cost} above {line}");
        }
    }
    for i in 0..40 {
        let n = r.gen_range(2..=8);
        let k = r.gen_range(1..=3).min(n);
        let s = random_k_monotone(n, k, &mut r);
        let tree = SearchTree::random_bst(n, derive_seed(0xac06, i));
        let strategy = kfinger_monotone_strategy(&s, &tree, k).expect("strategy");
        let optimum = k_lazy_finger_at(&s, &tree, k).expect("flow value");
        assert!(
            strategy >= optimum,
            "instance {i}: strategy {strategy} beats the optimum {optimum}"
        );
    }
    pass(6, "monotone finger strategy costs at most 4nk and never beats the optimum");
}

#[test]
fn kfinger_simulation_overhead_stays_logarithmic_in_k() {
    for (i, &k) in [2usize, 4, 8].iter().enumerate() {
        for (j, &n) in [128usize, 512].iter().enumerate() {
            let tree0 = SearchTree::balanced_over(n);
            let seed = derive_seed(0xac07, (i * 10 + j) as u64);
            let trace = random_trace(&tree0, k, 8 * n, seed).expect("trace");
            let (_, report) = simulate(&trace, &tree0, k).expect("simulation");
            assert!(
                report.within_budget,
                "random trace k={k} n={n}: {} > {}",
                report.simulated_cost, report.budget
            );
        }

        // one finger per grid block, walking its spine
        let l = 1024 / k;
        let grid = gen_tilted_grid(k, l).expect("grid");
        let tree = build_tilted_grid_reference_tree(k, l).expect("reference tree");
        let assignment: Vec<usize> = (0..grid.as_sequence().m()).map(|t| t % k).collect();
        let trace = strategy_trace(&tree, grid.as_sequence(), &assignment, k).expect("trace");
        let (_, report) = simulate(&trace, &tree, k).expect("simulation");
        assert!(
            report.within_budget,
            "grid trace k={k}: {} > {}",
            report.simulated_cost, report.budget
        );
    }

    // on a grid small enough to search exhaustively, the optimal
    // assignment cost agrees with the flow value, and its trace also
    // stays in budget
    let grid = gen_tilted_grid(2, 3).expect("grid");
    let tree = build_tilted_grid_reference_tree(2, 3).expect("reference tree");
    let (assignment, cost) = optimal_strategy(&tree, grid.as_sequence(), 2).expect("search");
    let flow = k_lazy_finger_at(grid.as_sequence(), &tree, 2).expect("flow");
    assert_eq!(cost as f64, flow, "assignment search disagrees with the flow");
    let per_block: Vec<usize> = (0..grid.as_sequence().m()).map(|t| t % 2).collect();
    let trace = strategy_trace(&tree, grid.as_sequence(), &per_block, 2).expect("trace");
    let (ledger, report) = simulate(&trace, &tree, 2).expect("simulation");
    assert_eq!(ledger.total(), report.simulated_cost);
    assert!(report.within_budget);
    let optimal_trace = strategy_trace(&tree, grid.as_sequence(), &assignment, 2).expect("trace");
    let (_, optimal_report) = simulate(&optimal_trace, &tree, 2).expect("simulation");
    assert!(optimal_report.within_budget);
    assert!(cost <= report.machine_cost as u64);

    pass(7, "simulation keeps cost within 16 log2(k+1) per step plus 16n");
}

#[test]
fn composed_tilted_grid_executions_cost_linear_total() {
    for j in 6..=12u32 {
        let n = 1usize << j;
        let l = n / 2;
        let grid = gen_tilted_grid(2, l).expect("grid");
        let partition = vec![(1, l), (l + 1, 2 * l)];
        let (_, b) = composed_execute(
            grid.as_sequence(),
            &partition,
            Algorithm::Splay,
            Algorithm::Splay,
        )
        .expect("composition");
        let parts: usize = b.parts.iter().sum();
        assert_eq!(b.total, parts + b.template_portion, "n={n}");
        assert!(b.template_portion <= 3 * b.template, "n={n}");
        let per_key = b.total as f64 / n as f64;
        assert!(per_key <= 40.0, "n={n}: composed cost {per_key} per key");
    }
    pass(8, "composed tilted-grid executions cost at most 40 per key");
}

#[test]
fn key_independent_mtr_tracks_the_working_set_yardstick() {
    for (i, &n) in [64usize, 128, 256].iter().enumerate() {
        let m = (n as f64 * (n as f64).log2()).round() as usize;
        let uniform: Vec<usize> = {
            let mut r = rng(derive_seed(0xac09, 100 + i as u64));
            (0..m).map(|_| r.gen_range(1..=n)).collect()
        };
        let families: [(&str, Vec<usize>); 3] = [
            ("uniform", uniform),
            ("round-robin-8", (0..m).map(|t| (t % 8) * (n / 8) + 1).collect()),
            ("sequential", (0..m).map(|t| t % n + 1).collect()),
        ];
        for (name, keys) in families {
            let s = AccessSequence::new(n, keys).expect("family in range");
            let report = ki_ratio_report(&s, 200, derive_seed(0xac09, i as u64)).expect("report");
            assert!(
                report.in_band,
                "family {name} n={n}: ratio {} outside [1/16, 16]",
                report.ratio
            );
        }
    }

    // at tiny sizes the sampled mean agrees with the exhaustive
    // expectation over all relabelings, within three standard errors
    let mut r = rng(0xac29);
    for i in 0..10 {
        let n = r.gen_range(2..=6);
        let m = r.gen_range(4..=12);
        let s = random_sequence(n, m, &mut r);
        let tree0 = SearchTree::balanced_over(n);
        let exact = ki_mtr_exhaustive(&tree0, &s).expect("exhaustive average");
        let est = ki_mtr(&tree0, &s, 400, derive_seed(0xac29, i)).expect("estimate");
        let gap = (est.mean - exact).abs();
        assert!(
            gap <= 3.0 * est.stderr || gap == 0.0,
            "instance {i}: mean {} vs exact {exact} with stderr {}",
            est.mean,
            est.stderr
        );
    }
    pass(9, "key-independent MTR stays within a factor 16 of its yardstick");
}

#[test]
fn greedy_point_sets_are_satisfied_and_row_minimal() {
    let mut r = rng(0xac10);
    for i in 0..25 {
        let n = r.gen_range(2..=32);
        let m = r.gen_range(1..=200);
        let s = random_sequence(n, m, &mut r);
        let tree = SearchTree::random_bst(n, derive_seed(0xac10, i));
        let out = greedy_run(&s, Some(&tree)).expect("greedy runs");
        assert!(out.point_set().is_arborally_satisfied(), "instance {i}");
    }

    let s = random_sequence(512, 10_000, &mut r);
    let out = greedy_run(&s, Some(&SearchTree::balanced_over(512))).expect("greedy runs");
    let sampled = out.point_set().sampled_unsatisfied_pair(10_000, 0xac10);
    assert!(sampled.is_none(), "sampled violation: {sampled:?}");

    // dropping any touched point other than the access itself must
    // break satisfaction: greedy rows carry no slack
    for i in 0..15 {
        let n = r.gen_range(2..=8);
        let m = r.gen_range(1..=30);
        let s = random_sequence(n, m, &mut r);
        let tree = SearchTree::random_bst(n, derive_seed(0x1ac10, i));
        let out = greedy_run(&s, Some(&tree)).expect("greedy runs");
        let full = out.point_set();
        assert!(full.is_arborally_satisfied(), "instance {i}");
        for (row_idx, row) in out.rows.iter().enumerate() {
            let t = row_idx as i64 + 1;
            for &x in row.touched.iter().filter(|&&x| x != row.access) {
                let pruned: Vec<(usize, i64)> = full
                    .points()
                    .iter()
                    .copied()
                    .filter(|&p| p != (x, t))
                    .collect();
                let pruned = PointSet::new(pruned).expect("still one point per pair");
                assert!(
                    !pruned.is_arborally_satisfied(),
                    "instance {i} time {t}: touching {x} was redundant"
                );
            }
        }
    }
    pass(10, "greedy point sets are arborally satisfied with no redundant touch");
}

#[test]
fn splay_amortized_cost_stays_under_twelve_reference_depths() {
    let mut r = rng(0xac11);
    let mut accesses = 0usize;
    let mut i = 0u64;
    while accesses < 10_000 {
        let n = r.gen_range(2..=256);
        let m = r.gen_range(1..=200).min(10_000 - accesses);
        let s = random_sequence(n, m, &mut r);
        let start = SearchTree::random_bst(n, derive_seed(0xac11, i));
        let reference = SearchTree::random_bst(n, derive_seed(0x1ac11, i));
        let report = splay_amortized_check(&s, &start, &reference).expect("check runs");
        assert!(
            report.pass,
            "instance {i}: amortized ratio {} above {}",
            report.max_ratio, report.threshold
        );
        accesses += m;
        i += 1;
    }
    pass(11, "splay amortized cost stays under 12 reference depths per access");
}

#[test]
fn two_fingers_beat_one_finger_on_the_tilted_grid() {
    let grid = gen_tilted_grid(2, 6).expect("grid");
    let seq = grid.as_sequence();
    let m = seq.m() as f64;

    let mut best1 = f64::INFINITY;
    let mut best2 = f64::INFINITY;
    let mut count = 0usize;
    let mut spot = 0usize;
    for_each_bst(12, |t| {
        // one finger: chain walk plus one declaration per access
        let lf1 = m + lazy_finger_at(seq, t).expect("lazy finger");
        if spot % 10_000 == 0 {
            let flow1 = k_lazy_finger_at(seq, t, 1).expect("flow");
            assert_eq!(flow1, lf1, "one-finger flow disagrees with the chain walk");
        }
        spot += 1;
        let lf2 = k_lazy_finger_at(seq, t, 2).expect("flow");
        best1 = best1.min(lf1);
        best2 = best2.min(lf2);
        count += 1;
    })
    .expect("enumeration runs");
    assert_eq!(count, 208_012, "all trees over 12 keys");
    let ratio = best1 / best2;
    assert!(ratio >= 1.5, "best LF1 {best1} / best LF2 {best2} = {ratio}");
    println!("two fingers on the 2x6 grid: LF1 {best1}, LF2 {best2}, ratio {ratio:.3}");

    // larger grids, reference-tree flow values, reported only
    for &l in &[12usize, 24, 48] {
        let grid = gen_tilted_grid(2, l).expect("grid");
        let tree = build_tilted_grid_reference_tree(2, l).expect("reference tree");
        let lf1 = k_lazy_finger_at(grid.as_sequence(), &tree, 1).expect("flow");
        let lf2 = k_lazy_finger_at(grid.as_sequence(), &tree, 2).expect("flow");
        println!("  n = {:3}: reference-tree LF1 / LF2 = {:.3}", 2 * l, lf1 / lf2);
    }
    pass(12, "two fingers beat one by a factor 1.5 on the 2x6 grid");
}

#[test]
fn phase_sequences_keep_working_set_low_while_fingers_pay() {
    let (n, k, x, y) = (512usize, 2usize, 48usize, 24usize);
    let s = gen_phase_sequence(n, k, x, y, 0xac13).expect("phases");
    assert_eq!(s.m(), x * y);

    let ws = working_set(&s);
    let line = 1.5
        * y as f64
        * (2.0 * k as f64 * (n as f64).log2() + x as f64 * (2.0 * k as f64).log2());
    assert!(ws <= line, "working set {ws} above the phase line {line}");

    let mut min_lf = f64::INFINITY;
    let mut sum = 0.0;
    for i in 0..50 {
        let tree = SearchTree::random_bst(n, derive_seed(0xac13, i));
        let lf = k_lazy_finger_at(&s, &tree, k).expect("flow");
        min_lf = min_lf.min(lf);
        sum += lf;
    }
    let target = 3.0 * ws / (n as f64).log2();
    println!(
        "phase exhibit: WS {ws:.1} <= {line:.1}; two-finger cost over 50 random trees: \
         min {min_lf:.1}, mean {:.1}, separation target {target:.1} ({})",
        sum / 50.0,
        if min_lf >= target { "met" } else { "not met" }
    );
    pass(13, "phase sequences stay cheap for working set while fingers pay");
}
